//! Attentional LSTM along one row.
//!
//! The gates read the previous *cell* state, and each input is scaled by the
//! attention scalar of the block it belongs to:
//!
//! ```text
//! f = sig(W_f a x + U_f c' + b_f)     i = sig(W_i a x + U_i c' + b_i)
//! o = sig(W_o a x + U_o c' + b_o)     g = tanh(W_c a x + b_c)
//! c = f c' + i g                      h = o tanh(c)
//! ```
//!
//! Positions labelled block 0 are padding: the cell state passes through
//! untouched and the output is zero. A plain LSTM is the same cell with every
//! scalar fixed at one.

use super::{axpy, dot, ensure_finite, Real, Tensor};
use crate::error::{Error, Result};

/// `w: [4H × cin]` (gate rows f, i, o, c), `u: [3H × H]`, `b: [4H]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmShape {
    pub len: usize,
    pub cin: usize,
    pub hidden: usize,
}

impl LstmShape {
    pub fn w_len(&self) -> usize {
        4 * self.hidden * self.cin
    }
    pub fn u_len(&self) -> usize {
        3 * self.hidden * self.hidden
    }
    pub fn b_len(&self) -> usize {
        4 * self.hidden
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LstmCache<R> {
    /// `[len × 4H]`: f, i, o after the sigmoid and g after the tanh.
    pub gates: Vec<R>,
    /// `[len × H]` cell state after each step.
    pub cell: Vec<R>,
    /// `[len × H]` cell state entering each step.
    pub prev: Vec<R>,
}

fn sigmoid<R: Real>(x: R) -> R {
    R::one() / (R::one() + (-x).exp())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_row_raw<R: Real>(
    s: &LstmShape,
    x: &[R],
    blocks: &[u16],
    alpha: &[R],
    w: &[R],
    u: &[R],
    b: &[R],
    h_out: &mut [R],
    cache: &mut LstmCache<R>,
) {
    let (h, c_in) = (s.hidden, s.cin);
    cache.gates.clear();
    cache.gates.resize(s.len * 4 * h, R::zero());
    cache.cell.clear();
    cache.cell.resize(s.len * h, R::zero());
    cache.prev.clear();
    cache.prev.resize(s.len * h, R::zero());
    let mut c = vec![R::zero(); h];
    let mut pre = vec![R::zero(); 4 * h];
    for t in 0..s.len {
        cache.prev[t * h..(t + 1) * h].copy_from_slice(&c);
        let out = &mut h_out[t * h..(t + 1) * h];
        if blocks[t] == 0 {
            out.fill(R::zero());
            cache.cell[t * h..(t + 1) * h].copy_from_slice(&c);
            continue;
        }
        let a = alpha[blocks[t] as usize - 1];
        let xt = &x[t * c_in..(t + 1) * c_in];
        for (j, p) in pre.iter_mut().enumerate() {
            *p = a * dot(&w[j * c_in..(j + 1) * c_in], xt) + b[j];
            if j < 3 * h {
                *p += dot(&u[j * h..(j + 1) * h], &c);
            }
        }
        let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..4 * h {
            gates[j] = if j < 3 * h { sigmoid(pre[j]) } else { pre[j].tanh() };
        }
        for k in 0..h {
            let (f, i, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            c[k] = f * c[k] + i * g;
            out[k] = o * c[k].tanh();
        }
        cache.cell[t * h..(t + 1) * h].copy_from_slice(&c);
    }
}

/// Adds gradients into `dw`, `du`, `db` and, when present, `dx` and
/// `dalpha` (indexed by block - 1).
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_row_backward_raw<R: Real>(
    s: &LstmShape,
    x: &[R],
    blocks: &[u16],
    alpha: &[R],
    w: &[R],
    u: &[R],
    cache: &LstmCache<R>,
    dh: &[R],
    mut dx: Option<&mut [R]>,
    mut dalpha: Option<&mut [R]>,
    dw: &mut [R],
    du: &mut [R],
    db: &mut [R],
) {
    let (h, c_in) = (s.hidden, s.cin);
    let mut dc = vec![R::zero(); h];
    let mut da = vec![R::zero(); 4 * h];
    let mut dz = vec![R::zero(); c_in];
    for t in (0..s.len).rev() {
        if blocks[t] == 0 {
            continue;
        }
        let a = alpha[blocks[t] as usize - 1];
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        let cell = &cache.cell[t * h..(t + 1) * h];
        let prev = &cache.prev[t * h..(t + 1) * h];
        let dht = &dh[t * h..(t + 1) * h];
        for k in 0..h {
            let (f, i, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cell[k].tanh();
            let d_o = dht[k] * tc;
            let dct = dc[k] + dht[k] * o * (R::one() - tc * tc);
            da[k] = dct * prev[k] * f * (R::one() - f);
            da[h + k] = dct * g * i * (R::one() - i);
            da[2 * h + k] = d_o * o * (R::one() - o);
            da[3 * h + k] = dct * i * (R::one() - g * g);
            dc[k] = dct * f;
        }
        for j in 0..3 * h {
            axpy(da[j], &u[j * h..(j + 1) * h], &mut dc);
            axpy(da[j], prev, &mut du[j * h..(j + 1) * h]);
        }
        let xt = &x[t * c_in..(t + 1) * c_in];
        dz.fill(R::zero());
        for j in 0..4 * h {
            db[j] += da[j];
            axpy(da[j] * a, xt, &mut dw[j * c_in..(j + 1) * c_in]);
            axpy(da[j], &w[j * c_in..(j + 1) * c_in], &mut dz);
        }
        if let Some(dx) = dx.as_deref_mut() {
            axpy(a, &dz, &mut dx[t * c_in..(t + 1) * c_in]);
        }
        if let Some(dal) = dalpha.as_deref_mut() {
            dal[blocks[t] as usize - 1] += dot(&dz, xt);
        }
    }
}

fn check<R: Real>(
    x: &Tensor<R>,
    blocks: &[u16],
    alpha: &[R],
    w: &Tensor<R>,
    u: &Tensor<R>,
    b: &Tensor<R>,
) -> Result<LstmShape> {
    let shape_err = |detail: String| Error::Shape {
        op: "attn_lstm_row",
        detail,
    };
    let &[len, cin] = x.shape() else {
        return Err(shape_err(format!("input must be [len × depth], got {:?}", x.shape())));
    };
    let hidden = b.len() / 4;
    let s = LstmShape { len, cin, hidden };
    if !b.len().is_multiple_of(4) || w.len() != s.w_len() || u.len() != s.u_len() {
        return Err(shape_err(format!(
            "weights {:?}/{:?}/{:?} do not fit depth {cin}",
            w.shape(),
            u.shape(),
            b.shape()
        )));
    }
    if blocks.len() != len {
        return Err(shape_err(format!("{} block labels for {len} positions", blocks.len())));
    }
    if let Some(&bad) = blocks.iter().find(|&&bl| bl as usize > alpha.len()) {
        return Err(shape_err(format!(
            "block {bad} has no attention scalar (q = {})",
            alpha.len()
        )));
    }
    Ok(s)
}

/// Runs the cell over `x: [len × cin]`; returns `[len × H]` outputs and the
/// cache for [`attn_lstm_row_backward`].
pub fn attn_lstm_row<R: Real>(
    x: &Tensor<R>,
    blocks: &[u16],
    alpha: &[R],
    w: &Tensor<R>,
    u: &Tensor<R>,
    b: &Tensor<R>,
) -> Result<(Tensor<R>, LstmCache<R>)> {
    let s = check(x, blocks, alpha, w, u, b)?;
    let mut out = vec![R::zero(); s.len * s.hidden];
    let mut cache = LstmCache::default();
    lstm_row_raw(
        &s,
        x.data(),
        blocks,
        alpha,
        w.data(),
        u.data(),
        b.data(),
        &mut out,
        &mut cache,
    );
    ensure_finite("attn_lstm_row", &out)?;
    Ok((Tensor::new(vec![s.len, s.hidden], out)?, cache))
}

/// Gradients `(dx, dalpha, dw, du, db)`.
#[allow(clippy::type_complexity, clippy::too_many_arguments)]
pub fn attn_lstm_row_backward<R: Real>(
    x: &Tensor<R>,
    blocks: &[u16],
    alpha: &[R],
    w: &Tensor<R>,
    u: &Tensor<R>,
    b: &Tensor<R>,
    cache: &LstmCache<R>,
    dh: &Tensor<R>,
) -> Result<(Tensor<R>, Vec<R>, Tensor<R>, Tensor<R>, Tensor<R>)> {
    let s = check(x, blocks, alpha, w, u, b)?;
    if dh.shape() != [s.len, s.hidden] {
        return Err(Error::Shape {
            op: "attn_lstm_row",
            detail: format!("output gradient {:?}", dh.shape()),
        });
    }
    let mut dx = Tensor::zeros(x.shape());
    let mut dalpha = vec![R::zero(); alpha.len()];
    let (mut dw, mut du, mut db) = (
        Tensor::zeros(w.shape()),
        Tensor::zeros(u.shape()),
        Tensor::zeros(b.shape()),
    );
    lstm_row_backward_raw(
        &s,
        x.data(),
        blocks,
        alpha,
        w.data(),
        u.data(),
        cache,
        dh.data(),
        Some(dx.data_mut()),
        Some(&mut dalpha),
        dw.data_mut(),
        du.data_mut(),
        db.data_mut(),
    );
    Ok((dx, dalpha, dw, du, db))
}
