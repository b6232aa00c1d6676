//! Squash, prediction vectors and routing-by-agreement.

use super::{axpy, dot, ensure_finite, Real};
use crate::error::{Error, Result};

pub const DEFAULT_ROUTING_ITERATIONS: usize = 3;

/// `‖v‖ / ‖s‖` for squash: `n / (1 + n²)` with `n = ‖s‖`.
pub fn squash_scale<R: Real>(norm: R) -> R {
    norm / (R::one() + norm * norm)
}

/// `v = (n² / (1 + n²)) · s / n`; zero maps to zero.
pub fn squash<R: Real>(s: &[R]) -> Vec<R> {
    let k = squash_scale(dot(s, s).sqrt());
    s.iter().map(|&x| k * x).collect()
}

/// Vector-Jacobian product of [`squash`]:
/// `ds = k dv + (k'(n) / n) (s · dv) s` with `k'(n) = (1 - n²) / (1 + n²)²`.
pub fn squash_backward<R: Real>(s: &[R], dv: &[R]) -> Vec<R> {
    let n2 = dot(s, s);
    if n2 == R::zero() {
        return vec![R::zero(); s.len()];
    }
    let n = n2.sqrt();
    let k = squash_scale(n);
    let denom = R::one() + n2;
    let dk_over_n = (R::one() - n2) / (denom * denom) / n;
    let proj = dot(s, dv) * dk_over_n;
    s.iter().zip(dv).map(|(&si, &d)| k * d + proj * si).collect()
}

/// Norms of `count` consecutive `dim`-vectors.
pub fn capsule_lengths<R: Real>(v: &[R], dim: usize) -> Vec<R> {
    v.chunks(dim).map(|c| dot(c, c).sqrt()).collect()
}

pub fn capsule_lengths_backward<R: Real>(v: &[R], dim: usize, dlen: &[R]) -> Vec<R> {
    let mut dv = vec![R::zero(); v.len()];
    for (k, (c, &g)) in v.chunks(dim).zip(dlen).enumerate() {
        let n = dot(c, c).sqrt();
        if n > R::zero() {
            axpy(g / n, c, &mut dv[k * dim..(k + 1) * dim]);
        }
    }
    dv
}

fn caps_shape_err(detail: String) -> Error {
    Error::Shape {
        op: "prediction_vectors",
        detail,
    }
}

/// `û[i][j] = W[i][j] u[i]` with `u: [inc × m_in]`,
/// `W: [inc × outc × m_out × m_in]`, result `[inc × outc × m_out]`.
pub fn prediction_vectors<R: Real>(
    u: &[R],
    w: &[R],
    inc: usize,
    outc: usize,
    m_out: usize,
    m_in: usize,
) -> Result<Vec<R>> {
    if u.len() != inc * m_in || w.len() != inc * outc * m_out * m_in {
        return Err(caps_shape_err(format!(
            "u has {} values and W {} for {inc} inputs, {outc} outputs, {m_in} -> {m_out}",
            u.len(),
            w.len()
        )));
    }
    let mut out = vec![R::zero(); inc * outc * m_out];
    for i in 0..inc {
        let ui = &u[i * m_in..(i + 1) * m_in];
        for j in 0..outc {
            for d in 0..m_out {
                let row = ((i * outc + j) * m_out + d) * m_in;
                out[(i * outc + j) * m_out + d] = dot(&w[row..row + m_in], ui);
            }
        }
    }
    ensure_finite("prediction_vectors", &out)?;
    Ok(out)
}

/// Adds `dW` into `dw` and, when given, `du` into `du`.
#[allow(clippy::too_many_arguments)]
pub fn prediction_vectors_backward<R: Real>(
    u: &[R],
    w: &[R],
    inc: usize,
    outc: usize,
    m_out: usize,
    m_in: usize,
    duhat: &[R],
    mut du: Option<&mut [R]>,
    dw: &mut [R],
) {
    for i in 0..inc {
        let ui = &u[i * m_in..(i + 1) * m_in];
        for j in 0..outc {
            for d in 0..m_out {
                let g = duhat[(i * outc + j) * m_out + d];
                if g == R::zero() {
                    continue;
                }
                let row = ((i * outc + j) * m_out + d) * m_in;
                axpy(g, ui, &mut dw[row..row + m_in]);
                if let Some(du) = du.as_deref_mut() {
                    axpy(g, &w[row..row + m_in], &mut du[i * m_in..(i + 1) * m_in]);
                }
            }
        }
    }
}

/// Every intermediate of a routing run, one entry per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTrace<R> {
    pub inc: usize,
    pub outc: usize,
    pub dim: usize,
    /// Coupling coefficients `[inc × outc]`.
    pub c: Vec<Vec<R>>,
    /// Pre-squash totals `[outc × dim]`.
    pub s: Vec<Vec<R>>,
    /// Output capsules `[outc × dim]`.
    pub v: Vec<Vec<R>>,
}

impl<R: Real> RoutingTrace<R> {
    pub fn output(&self) -> &[R] {
        self.v.last().unwrap()
    }

    pub fn coupling(&self) -> &[R] {
        self.c.last().unwrap()
    }
}

fn softmax_rows<R: Real>(b: &[R], cols: usize) -> Vec<R> {
    let mut c = vec![R::zero(); b.len()];
    for (row, out) in b.chunks(cols).zip(c.chunks_mut(cols)) {
        let max = row.iter().copied().fold(R::neg_infinity(), R::max);
        let mut z = R::zero();
        for (o, &x) in out.iter_mut().zip(row) {
            *o = (x - max).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
    }
    c
}

/// Routing by agreement over `u_hat: [inc × outc × dim]`.
///
/// Logits start at zero; each iteration takes a softmax over output capsules,
/// forms `s_j = sum_i c_ij û_j|i`, squashes, and (except after the last
/// iteration) adds the agreement `û_j|i · v_j` to the logits.
pub fn dynamic_routing<R: Real>(
    u_hat: &[R],
    inc: usize,
    outc: usize,
    dim: usize,
    iterations: usize,
) -> Result<RoutingTrace<R>> {
    if iterations == 0 {
        return Err(Error::Config("routing needs at least one iteration".into()));
    }
    if u_hat.len() != inc * outc * dim {
        return Err(Error::Shape {
            op: "dynamic_routing",
            detail: format!("{} prediction values for {inc}x{outc}x{dim}", u_hat.len()),
        });
    }
    let mut b = vec![R::zero(); inc * outc];
    let mut trace = RoutingTrace {
        inc,
        outc,
        dim,
        c: vec![],
        s: vec![],
        v: vec![],
    };
    for it in 0..iterations {
        let c = softmax_rows(&b, outc);
        let mut s = vec![R::zero(); outc * dim];
        for i in 0..inc {
            for j in 0..outc {
                let base = (i * outc + j) * dim;
                axpy(
                    c[i * outc + j],
                    &u_hat[base..base + dim],
                    &mut s[j * dim..(j + 1) * dim],
                );
            }
        }
        let v: Vec<R> = s.chunks(dim).flat_map(squash).collect();
        if it + 1 < iterations {
            for i in 0..inc {
                for j in 0..outc {
                    let base = (i * outc + j) * dim;
                    b[i * outc + j] += dot(&u_hat[base..base + dim], &v[j * dim..(j + 1) * dim]);
                }
            }
        }
        trace.c.push(c);
        trace.s.push(s);
        trace.v.push(v);
    }
    ensure_finite("dynamic_routing", trace.output())?;
    Ok(trace)
}

/// Exact gradient w.r.t. `u_hat` through every unrolled iteration, including
/// the paths through the coupling coefficients.
pub fn dynamic_routing_backward<R: Real>(u_hat: &[R], trace: &RoutingTrace<R>, dv: &[R]) -> Vec<R> {
    let (inc, outc, dim) = (trace.inc, trace.outc, trace.dim);
    let iters = trace.v.len();
    let mut du = vec![R::zero(); u_hat.len()];
    // gradient w.r.t. the logits entering the iteration after the current one
    let mut db_next: Option<Vec<R>> = None;
    let mut dc = vec![R::zero(); inc * outc];
    for r in (0..iters).rev() {
        let mut dvr = if r + 1 == iters {
            dv.to_vec()
        } else {
            vec![R::zero(); outc * dim]
        };
        if let Some(g) = &db_next {
            // b_{r+1} = b_r + û · v_r
            for i in 0..inc {
                for j in 0..outc {
                    let gij = g[i * outc + j];
                    let base = (i * outc + j) * dim;
                    axpy(gij, &trace.v[r][j * dim..(j + 1) * dim], &mut du[base..base + dim]);
                    axpy(gij, &u_hat[base..base + dim], &mut dvr[j * dim..(j + 1) * dim]);
                }
            }
        }
        let ds: Vec<R> = trace.s[r]
            .chunks(dim)
            .zip(dvr.chunks(dim))
            .flat_map(|(s, d)| squash_backward(s, d))
            .collect();
        let c = &trace.c[r];
        for i in 0..inc {
            for j in 0..outc {
                let base = (i * outc + j) * dim;
                let dsj = &ds[j * dim..(j + 1) * dim];
                dc[i * outc + j] = dot(dsj, &u_hat[base..base + dim]);
                axpy(c[i * outc + j], dsj, &mut du[base..base + dim]);
            }
        }
        if r == 0 {
            break;
        }
        let mut db = db_next.take().unwrap_or_else(|| vec![R::zero(); inc * outc]);
        for i in 0..inc {
            let row = &c[i * outc..(i + 1) * outc];
            let drow = &dc[i * outc..(i + 1) * outc];
            let mean = dot(row, drow);
            for j in 0..outc {
                db[i * outc + j] += row[j] * (drow[j] - mean);
            }
        }
        db_next = Some(db);
    }
    du
}
