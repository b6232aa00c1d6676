//! Horizontal convolution along one subgraph row.

use serde::{Deserialize, Serialize};

use super::{ensure_finite, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

/// Geometry of a `1 × width × cin` convolution with `cout` kernels.
///
/// Kernels are stored `[cout][width][cin]`; rows are `[len][depth]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub len_in: usize,
    pub cin: usize,
    pub cout: usize,
    pub width: usize,
    pub stride: usize,
}

impl ConvShape {
    pub fn len_out(&self) -> usize {
        (self.len_in - self.width) / self.stride + 1
    }

    pub fn kernel_len(&self) -> usize {
        self.cout * self.width * self.cin
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.stride == 0 || self.cin == 0 || self.cout == 0 {
            return Err(Error::Shape {
                op: "conv_row",
                detail: format!("degenerate geometry {self:?}"),
            });
        }
        if self.len_in < self.width {
            return Err(Error::Shape {
                op: "conv_row",
                detail: format!("row length {} shorter than kernel {}", self.len_in, self.width),
            });
        }
        Ok(())
    }
}

/// Row kernel: `y[t][o] = act(b[o] + sum_{k,c} w[o][k][c] x[t*stride+k][c])`.
pub(crate) fn conv_row_raw<R: Real>(s: &ConvShape, x: &[R], w: &[R], b: &[R], act: Activation, y: &mut [R]) {
    let span = s.width * s.cin;
    for t in 0..s.len_out() {
        let window = &x[t * s.stride * s.cin..t * s.stride * s.cin + span];
        for o in 0..s.cout {
            let mut acc = b[o] + super::dot(&w[o * span..(o + 1) * span], window);
            if act == Activation::Relu && acc < R::zero() {
                acc = R::zero();
            }
            y[t * s.cout + o] = acc;
        }
    }
}

/// Backward of [`conv_row_raw`] given its output `y`. Gradients are added
/// into `dw`, `db` and, when present, `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_row_backward_raw<R: Real>(
    s: &ConvShape,
    x: &[R],
    w: &[R],
    y: &[R],
    act: Activation,
    dy: &[R],
    mut dx: Option<&mut [R]>,
    dw: &mut [R],
    db: &mut [R],
) {
    let span = s.width * s.cin;
    for t in 0..s.len_out() {
        let start = t * s.stride * s.cin;
        for o in 0..s.cout {
            let i = t * s.cout + o;
            let g = match act {
                Activation::Relu if y[i] <= R::zero() => continue,
                _ => dy[i],
            };
            if g == R::zero() {
                continue;
            }
            db[o] += g;
            super::axpy(g, &x[start..start + span], &mut dw[o * span..(o + 1) * span]);
            if let Some(dx) = dx.as_deref_mut() {
                super::axpy(g, &w[o * span..(o + 1) * span], &mut dx[start..start + span]);
            }
        }
    }
}

fn check_params<R: Real>(s: &ConvShape, w: &Tensor<R>, b: &Tensor<R>) -> Result<()> {
    s.validate()?;
    if w.shape() != [s.cout, s.width, s.cin] || b.shape() != [s.cout] {
        return Err(Error::Shape {
            op: "conv_row",
            detail: format!(
                "kernels {:?} / bias {:?} do not fit {}x{}x{} with {} outputs",
                w.shape(),
                b.shape(),
                1,
                s.width,
                s.cin,
                s.cout
            ),
        });
    }
    Ok(())
}

fn shape_of<R: Real>(x: &Tensor<R>, w: &Tensor<R>, stride: usize) -> Result<(usize, ConvShape)> {
    let (&[rows, len_in, cin], &[cout, width, _]) = (x.shape(), w.shape()) else {
        return Err(Error::Shape {
            op: "conv_row",
            detail: format!(
                "expected rank-3 input and kernels, got {:?} and {:?}",
                x.shape(),
                w.shape()
            ),
        });
    };
    Ok((
        rows,
        ConvShape {
            len_in,
            cin,
            cout,
            width,
            stride,
        },
    ))
}

/// Convolves every row of `x: [rows × len × cin]` independently.
pub fn conv_row<R: Real>(
    x: &Tensor<R>,
    w: &Tensor<R>,
    b: &Tensor<R>,
    stride: usize,
    act: Activation,
) -> Result<Tensor<R>> {
    let (rows, s) = shape_of(x, w, stride)?;
    check_params(&s, w, b)?;
    let (in_row, out_row) = (s.len_in * s.cin, s.len_out() * s.cout);
    let mut y = vec![R::zero(); rows * out_row];
    for r in 0..rows {
        conv_row_raw(
            &s,
            &x.data()[r * in_row..(r + 1) * in_row],
            w.data(),
            b.data(),
            act,
            &mut y[r * out_row..(r + 1) * out_row],
        );
    }
    ensure_finite("conv_row", &y)?;
    Tensor::new(vec![rows, s.len_out(), s.cout], y)
}

/// Gradients `(dx, dw, db)` of [`conv_row`] given its output and `dy`.
pub fn conv_row_backward<R: Real>(
    x: &Tensor<R>,
    w: &Tensor<R>,
    y: &Tensor<R>,
    stride: usize,
    act: Activation,
    dy: &Tensor<R>,
) -> Result<(Tensor<R>, Tensor<R>, Tensor<R>)> {
    let (rows, s) = shape_of(x, w, stride)?;
    s.validate()?;
    if y.shape() != [rows, s.len_out(), s.cout] || dy.shape() != y.shape() {
        return Err(Error::Shape {
            op: "conv_row",
            detail: format!("output gradient {:?} does not match output {:?}", dy.shape(), y.shape()),
        });
    }
    let (in_row, out_row) = (s.len_in * s.cin, s.len_out() * s.cout);
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[s.cout]);
    for r in 0..rows {
        conv_row_backward_raw(
            &s,
            &x.data()[r * in_row..(r + 1) * in_row],
            w.data(),
            &y.data()[r * out_row..(r + 1) * out_row],
            act,
            &dy.data()[r * out_row..(r + 1) * out_row],
            Some(&mut dx.data_mut()[r * in_row..(r + 1) * in_row]),
            dw.data_mut(),
            db.data_mut(),
        );
    }
    Ok((dx, dw, db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, GRAD_CHECK_EPS};
    use crate::rng::rng;
    use proptest::prelude::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn zero_input_gives_relu_of_bias() {
        let x = Tensor::<f64>::zeros(&[2, 5, 3]);
        let w = Tensor::uniform(&[4, 3, 3], 1.0, &mut rng(2));
        let b = t(&[4], vec![0.5, -0.5, 0.0, 2.0]);
        let y = conv_row(&x, &w, &b, 1, Activation::Relu).unwrap();
        assert_eq!(y.shape(), &[2, 3, 4]);
        for chunk in y.data().chunks(4) {
            assert_eq!(chunk, &[0.5, 0.0, 0.0, 2.0]);
        }
    }

    #[test]
    fn center_tap_crops() {
        let (len, c) = (6, 2);
        let x = Tensor::<f64>::uniform(&[1, len, c], 1.0, &mut rng(3));
        let x = t(&[1, len, c], x.data().iter().map(|v| v.abs()).collect());
        let mut w = vec![0.0; c * 3 * c];
        for o in 0..c {
            w[(o * 3 + 1) * c + o] = 1.0;
        }
        let y = conv_row(&x, &t(&[c, 3, c], w), &Tensor::zeros(&[c]), 1, Activation::Relu).unwrap();
        assert_eq!(y.data(), &x.data()[c..(len - 1) * c]);
    }

    #[test]
    fn output_widths() {
        let s = ConvShape {
            len_in: 20,
            cin: 1,
            cout: 1,
            width: 3,
            stride: 1,
        };
        assert_eq!(s.len_out(), 18);
        assert_eq!(ConvShape { len_in: 18, ..s }.len_out(), 16);
        assert_eq!(ConvShape { stride: 2, ..s }.len_out(), 9);
        let x = Tensor::<f64>::zeros(&[1, 2, 1]);
        let w = Tensor::<f64>::zeros(&[1, 3, 1]);
        assert!(conv_row(&x, &w, &Tensor::zeros(&[1]), 1, Activation::Relu).is_err());
        let w_bad = Tensor::<f64>::zeros(&[1, 3, 2]);
        let x3 = Tensor::<f64>::zeros(&[1, 4, 1]);
        assert!(conv_row(&x3, &w_bad, &Tensor::zeros(&[1]), 1, Activation::Relu).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (stride, act, width) in [
            (1, Activation::Relu, 3),
            (2, Activation::Relu, 3),
            (1, Activation::Identity, 4),
        ] {
            let mut r = rng(7 + stride as u64);
            let x = Tensor::<f64>::uniform(&[2, 7, 3], 1.0, &mut r);
            let w = Tensor::<f64>::uniform(&[4, width, 3], 0.6, &mut r);
            let b = Tensor::<f64>::uniform(&[4], 0.3, &mut r);
            let probe = Tensor::<f64>::uniform(&[2, (7 - width) / stride + 1, 4], 1.0, &mut r);
            let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| {
                let y = conv_row(x, w, b, stride, act).unwrap();
                crate::numerics::dot(y.data(), probe.data())
            };
            let y = conv_row(&x, &w, &b, stride, act).unwrap();
            let (dx, dw, db) = conv_row_backward(&x, &w, &y, stride, act, &probe).unwrap();
            let ex = grad_check(
                |v| loss(&t(x.shape(), v.to_vec()), &w, &b),
                x.data(),
                dx.data(),
                GRAD_CHECK_EPS,
            );
            let ew = grad_check(
                |v| loss(&x, &t(w.shape(), v.to_vec()), &b),
                w.data(),
                dw.data(),
                GRAD_CHECK_EPS,
            );
            let eb = grad_check(
                |v| loss(&x, &w, &t(&[4], v.to_vec())),
                b.data(),
                db.data(),
                GRAD_CHECK_EPS,
            );
            assert!(ex.max(ew).max(eb) < 1e-4, "{stride} {act:?}: {ex} {ew} {eb}");
        }
    }

    proptest! {
        #[test]
        fn rows_are_independent(seed in any::<u64>(), perm_seed in 0usize..6) {
            let mut r = rng(seed);
            let x = Tensor::<f64>::uniform(&[3, 5, 2], 1.0, &mut r);
            let w = Tensor::<f64>::uniform(&[3, 3, 2], 1.0, &mut r);
            let b = Tensor::<f64>::uniform(&[3], 1.0, &mut r);
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let p = perms[perm_seed];
            let permute = |data: &[f64], row: usize| -> Vec<f64> {
                p.iter().flat_map(|&i| data[i * row..(i + 1) * row].to_vec()).collect()
            };
            let y = conv_row(&x, &w, &b, 1, Activation::Relu).unwrap();
            let xp = t(&[3, 5, 2], permute(x.data(), 10));
            let yp = conv_row(&xp, &w, &b, 1, Activation::Relu).unwrap();
            prop_assert_eq!(yp.data().to_vec(), permute(y.data(), 9));
        }
    }
}
