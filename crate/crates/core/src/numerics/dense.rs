//! Losses and the fully connected sigmoid head.

use serde::{Deserialize, Serialize};

use super::{axpy, dot, ensure_finite, Real};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    pub m_plus: f64,
    pub m_minus: f64,
    pub lambda: f64,
}

impl Default for MarginParams {
    fn default() -> Self {
        MarginParams {
            m_plus: 0.9,
            m_minus: 0.1,
            lambda: 0.5,
        }
    }
}

/// `sum_k T_k max(0, m+ - l_k)² + λ p α_k (1 - T_k) max(0, l_k - m-)²`.
/// With every `α = 1` and `p = 1` this is the plain capsule margin loss.
pub fn margin_loss<R: Real>(lengths: &[R], targets: &[bool], alpha: &[R], p: R, mp: &MarginParams) -> R {
    margin_loss_grad(lengths, targets, alpha, p, mp).0
}

/// Loss and its gradient w.r.t. the lengths.
pub fn margin_loss_grad<R: Real>(lengths: &[R], targets: &[bool], alpha: &[R], p: R, mp: &MarginParams) -> (R, Vec<R>) {
    let (mplus, mminus, lambda) = (R::of(mp.m_plus), R::of(mp.m_minus), R::of(mp.lambda));
    let two = R::of(2.0);
    let mut loss = R::zero();
    let mut grad = vec![R::zero(); lengths.len()];
    for (k, &len) in lengths.iter().enumerate() {
        if targets[k] {
            let gap = (mplus - len).max(R::zero());
            loss += gap * gap;
            grad[k] = -two * gap;
        } else {
            let gap = (len - mminus).max(R::zero());
            let weight = lambda * p * alpha[k];
            loss += weight * gap * gap;
            grad[k] = two * weight * gap;
        }
    }
    (loss, grad)
}

pub fn sigmoid<R: Real>(x: R) -> R {
    R::one() / (R::one() + (-x).exp())
}

/// Binary cross-entropy summed over classes, computed from logits, and its
/// gradient `y - t` w.r.t. the logits.
pub fn bce_with_logits<R: Real>(logits: &[R], targets: &[bool]) -> (R, Vec<R>) {
    let mut loss = R::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &t) in logits.iter().zip(targets) {
        // softplus(z) - t z, written to stay finite for large |z|
        let softplus = z.max(R::zero()) + (-z.abs()).exp().ln_1p();
        loss += softplus - if t { z } else { R::zero() };
        grad.push(sigmoid(z) - if t { R::one() } else { R::zero() });
    }
    (loss, grad)
}

/// `input → hidden (ReLU) → output (sigmoid)`. Weights are `[out × in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FcShape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FcCache<R> {
    pub hidden: Vec<R>,
    pub logits: Vec<R>,
    pub output: Vec<R>,
}

pub fn fc_sigmoid_head<R: Real>(s: &FcShape, x: &[R], w1: &[R], b1: &[R], w2: &[R], b2: &[R]) -> Result<FcCache<R>> {
    let hidden: Vec<R> = (0..s.hidden)
        .map(|j| (b1[j] + dot(&w1[j * s.input..(j + 1) * s.input], x)).max(R::zero()))
        .collect();
    let logits: Vec<R> = (0..s.output)
        .map(|k| b2[k] + dot(&w2[k * s.hidden..(k + 1) * s.hidden], &hidden))
        .collect();
    let output: Vec<R> = logits.iter().map(|&z| sigmoid(z)).collect();
    ensure_finite("fc_sigmoid_head", &output)?;
    Ok(FcCache { hidden, logits, output })
}

/// Backward from gradients on the logits; adds into the parameter
/// gradients and, when given, `dx`.
#[allow(clippy::too_many_arguments)]
pub fn fc_sigmoid_head_backward<R: Real>(
    s: &FcShape,
    x: &[R],
    w1: &[R],
    w2: &[R],
    cache: &FcCache<R>,
    dlogits: &[R],
    mut dx: Option<&mut [R]>,
    dw1: &mut [R],
    db1: &mut [R],
    dw2: &mut [R],
    db2: &mut [R],
) {
    let mut dh = vec![R::zero(); s.hidden];
    for k in 0..s.output {
        let g = dlogits[k];
        db2[k] += g;
        axpy(g, &cache.hidden, &mut dw2[k * s.hidden..(k + 1) * s.hidden]);
        axpy(g, &w2[k * s.hidden..(k + 1) * s.hidden], &mut dh);
    }
    for j in 0..s.hidden {
        if cache.hidden[j] <= R::zero() || dh[j] == R::zero() {
            continue;
        }
        db1[j] += dh[j];
        axpy(dh[j], x, &mut dw1[j * s.input..(j + 1) * s.input]);
        if let Some(dx) = dx.as_deref_mut() {
            axpy(dh[j], &w1[j * s.input..(j + 1) * s.input], dx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, Tensor, GRAD_CHECK_EPS};
    use crate::rng::rng;
    use proptest::prelude::*;

    const MP: MarginParams = MarginParams {
        m_plus: 0.9,
        m_minus: 0.1,
        lambda: 0.5,
    };

    #[test]
    fn margin_examples() {
        let ones = [1.0f64; 3];
        assert_eq!(
            margin_loss(&[0.95, 0.05, 0.9], &[true, false, true], &ones, 1.0, &MP),
            0.0
        );
        assert!((margin_loss(&[1.0f64], &[false], &[1.0], 1.0, &MP) - 0.405).abs() < 1e-15);
        assert!((margin_loss(&[0.0f64], &[true], &[1.0], 1.0, &MP) - 0.81).abs() < 1e-15);
    }

    #[test]
    fn margin_gradient() {
        let lengths = [0.2f64, 0.7, 0.95, 0.4, 0.05];
        let targets = [true, false, true, false, false];
        let alpha = [0.0, 0.3, 0.0, 0.9, 1.0];
        let (_, g) = margin_loss_grad(&lengths, &targets, &alpha, 0.7, &MP);
        let err = grad_check(
            |l| margin_loss(l, &targets, &alpha, 0.7, &MP),
            &lengths,
            &g,
            GRAD_CHECK_EPS,
        );
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let (loss, g) = bce_with_logits(&[0.0f64; 4], &[true, false, true, true]);
        assert!((loss - 4.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, vec![-0.5, 0.5, -0.5, -0.5]);
        let (big, _) = bce_with_logits(&[800.0f64, -800.0], &[false, true]);
        assert!((big - 1600.0).abs() < 1e-9);
    }

    fn fc_case(seed: u64) -> (FcShape, Vec<Vec<f64>>) {
        let s = FcShape {
            input: 6,
            hidden: 5,
            output: 3,
        };
        let mut r = rng(seed);
        let parts = [6, 30, 5, 15, 3]
            .iter()
            .map(|&n| Tensor::<f64>::uniform(&[n], 1.0, &mut r).into_data())
            .collect();
        (s, parts)
    }

    #[test]
    fn fc_zero_weights_give_half() {
        let s = FcShape {
            input: 4,
            hidden: 3,
            output: 2,
        };
        let c = fc_sigmoid_head(&s, &[1.0f64; 4], &[0.0; 12], &[0.0; 3], &[0.0; 6], &[0.0; 2]).unwrap();
        assert_eq!(c.output, vec![0.5, 0.5]);
    }

    #[test]
    fn fc_gradients() {
        let (s, p) = fc_case(3);
        let targets = [true, false, true];
        let loss = |p: &[Vec<f64>]| {
            let c = fc_sigmoid_head(&s, &p[0], &p[1], &p[2], &p[3], &p[4]).unwrap();
            bce_with_logits(&c.logits, &targets).0
        };
        let c = fc_sigmoid_head(&s, &p[0], &p[1], &p[2], &p[3], &p[4]).unwrap();
        let (_, dz) = bce_with_logits(&c.logits, &targets);
        let mut g: Vec<Vec<f64>> = p.iter().map(|v| vec![0.0; v.len()]).collect();
        let [gx, gw1, gb1, gw2, gb2] = &mut g[..] else {
            unreachable!()
        };
        fc_sigmoid_head_backward(&s, &p[0], &p[1], &p[3], &c, &dz, Some(gx), gw1, gb1, gw2, gb2);
        for k in 0..5 {
            let err = grad_check(
                |v| {
                    let mut q = p.clone();
                    q[k] = v.to_vec();
                    loss(&q)
                },
                &p[k],
                &g[k],
                GRAD_CHECK_EPS,
            );
            assert!(err < 1e-4, "part {k}: {err}");
        }
    }

    proptest! {
        #[test]
        fn margin_nonnegative_and_alpha_linear(
            rows in prop::collection::vec((0.0f64..1.0, any::<bool>(), 0.0f64..1.0), 1..10),
            k in 0usize..10,
            p in 0.01f64..2.0,
        ) {
            let lengths: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let targets: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let alpha: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let base = margin_loss(&lengths, &targets, &alpha, p, &MP);
            prop_assert!(base >= 0.0);
            let k = k % rows.len();
            let mut doubled = alpha.clone();
            doubled[k] *= 2.0;
            let term = if targets[k] {
                0.0
            } else {
                MP.lambda * p * alpha[k] * (lengths[k] - MP.m_minus).max(0.0).powi(2)
            };
            let delta = margin_loss(&lengths, &targets, &doubled, p, &MP) - base;
            prop_assert!((delta - term).abs() < 1e-12);
        }
    }
}
