//! Dense layer kernels with hand-written backward passes.
//!
//! Every kernel works on one subgraph row at a time: a row is a `len × depth`
//! row-major slice. Rows never interact before the capsule layer, so the
//! model loops (or fans out) over rows and documents itself. All kernels are
//! generic over [`Real`] so the same code runs in `f32` for training and in
//! `f64` for gradient checks.

pub(crate) mod capsule;
pub(crate) mod conv;
pub(crate) mod dense;
mod gradcheck;
pub(crate) mod lstm;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::sync::atomic::{AtomicBool, Ordering};

use indexmap::IndexMap;
use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use capsule::{
    capsule_lengths, capsule_lengths_backward, dynamic_routing, dynamic_routing_backward, prediction_vectors,
    prediction_vectors_backward, squash, squash_backward, squash_scale, RoutingTrace, DEFAULT_ROUTING_ITERATIONS,
};
pub use conv::{conv_row, conv_row_backward, Activation, ConvShape};
pub use dense::{
    bce_with_logits, fc_sigmoid_head, fc_sigmoid_head_backward, margin_loss, margin_loss_grad, sigmoid, FcCache,
    FcShape, MarginParams,
};
pub use gradcheck::layer_gradchecks;
pub use lstm::{attn_lstm_row, attn_lstm_row_backward, LstmCache, LstmShape};

/// Floating-point scalar the kernels are generic over.
pub trait Real:
    Float + AddAssign + SubAssign + MulAssign + DivAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

pub(crate) fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).fold(R::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn axpy<R: Real>(alpha: R, x: &[R], y: &mut [R]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

static CHECK_FINITE: AtomicBool = AtomicBool::new(false);

/// Toggle the per-op NaN/Inf scan.
pub fn set_check_finite(on: bool) {
    CHECK_FINITE.store(on, Ordering::Relaxed);
}

pub fn check_finite_enabled() -> bool {
    CHECK_FINITE.load(Ordering::Relaxed)
}

/// Fails with [`Error::NonFinite`] if scanning is on and `data` holds a
/// NaN or infinity.
pub fn ensure_finite<R: Real>(op: &'static str, data: &[R]) -> Result<()> {
    if check_finite_enabled() && data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<R> {
    shape: Vec<usize>,
    data: Vec<R>,
}

impl<R: Real> Tensor<R> {
    pub fn new(shape: Vec<usize>, data: Vec<R>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape {
                op: "tensor",
                detail: format!("zero-sized dimension in {shape:?}"),
            });
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape {
                op: "tensor",
                detail: format!("shape {shape:?} needs {n} values, got {}", data.len()),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![R::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: R) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Uniform in `[-scale, scale)`.
    pub fn uniform(shape: &[usize], scale: f64, rng: &mut Rng) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| R::of(rng.gen_range(-scale..scale))).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<S: Real>(&self) -> Tensor<S> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| S::of(x.as_f64())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<R> {
    pub value: Tensor<R>,
    pub grad: Tensor<R>,
}

/// Named parameters in insertion order; the order fixes checkpoint layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerParams<R> {
    params: IndexMap<String, Param<R>>,
}

impl<R: Real> LayerParams<R> {
    pub fn new() -> Self {
        LayerParams {
            params: IndexMap::new(),
        }
    }

    /// Registers `value` under `name` and returns its index.
    pub fn insert(&mut self, name: &str, value: Tensor<R>) -> usize {
        let grad = Tensor::zeros(value.shape());
        let (idx, _) = self.params.insert_full(name.to_string(), Param { value, grad });
        idx
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.get_index_of(name)
    }

    pub fn get(&self, name: &str) -> Option<&Param<R>> {
        self.params.get(name)
    }

    pub fn by_index(&self, idx: usize) -> &Param<R> {
        &self.params[idx]
    }

    pub fn by_index_mut(&mut self, idx: usize) -> &mut Param<R> {
        &mut self.params[idx]
    }

    pub fn value(&self, idx: usize) -> &[R] {
        self.params[idx].value.data()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<R>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<R>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad.data_mut().fill(R::zero());
        }
    }

    /// Zeroed gradient buffers shaped like the parameters.
    pub fn grad_buffers(&self) -> Vec<Vec<R>> {
        self.params.values().map(|p| vec![R::zero(); p.value.len()]).collect()
    }

    /// Adds `buffers` (aligned with [`grad_buffers`](Self::grad_buffers))
    /// into the gradient accumulators.
    pub fn accumulate(&mut self, buffers: &[Vec<R>]) {
        for (p, g) in self.params.values_mut().zip(buffers) {
            for (a, &b) in p.grad.data_mut().iter_mut().zip(g) {
                *a += b;
            }
        }
    }

    pub fn scale_grads(&mut self, factor: R) {
        for p in self.params.values_mut() {
            for g in p.grad.data_mut() {
                *g *= factor;
            }
        }
    }

    pub fn num_values(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn cast<S: Real>(&self) -> LayerParams<S> {
        LayerParams {
            params: self
                .params
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Param {
                            value: p.value.cast(),
                            grad: p.grad.cast(),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, aligned with a [`LayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<R> {
    pub t: u64,
    pub m: Vec<Vec<R>>,
    pub v: Vec<Vec<R>>,
}

impl<R: Real> AdamState<R> {
    pub fn new(params: &LayerParams<R>) -> Self {
        AdamState {
            t: 0,
            m: params.grad_buffers(),
            v: params.grad_buffers(),
        }
    }
}

/// One bias-corrected Adam update from the accumulated gradients.
pub fn adam_step<R: Real>(params: &mut LayerParams<R>, state: &mut AdamState<R>, cfg: &AdamConfig) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (R::of(cfg.beta1), R::of(cfg.beta2));
    let c1 = R::one() - R::of(cfg.beta1.powi(t));
    let c2 = R::one() - R::of(cfg.beta2.powi(t));
    let (lr, eps) = (R::of(cfg.lr), R::of(cfg.eps));
    for (k, (_, p)) in params.params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        let Param { value, grad } = p;
        for (((w, &g), mi), vi) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = b1 * *mi + (R::one() - b1) * g;
            *vi = b2 * *vi + (R::one() - b2) * g * g;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *w -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Gradients smaller than this are compared absolutely: central differences
/// of an O(1) loss cannot resolve them to four significant digits.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Largest relative error between `analytic` and central differences of `f`
/// around `x`.
pub fn grad_check(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64) -> f64 {
    assert_eq!(x.len(), analytic.len(), "gradient length must match input");
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f(&probe);
        probe[i] = x[i] - eps;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}

/// Default finite-difference step for [`grad_check`]: small enough for
/// truncation error, large enough that `f64` roundoff stays below 1e-4
/// relative on gradients around 1e-6.
pub const GRAD_CHECK_EPS: f64 = 1e-5;
