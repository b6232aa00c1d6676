//! Finite-difference checks of every layer's backward pass, each against the
//! scalar objective `sum(g ⊙ output)` for a fixed random projection `g`.

use super::*;
use crate::rng::{rng, Rng};

fn rand_vec(r: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    Tensor::<f64>::uniform(&[n.max(1)], scale, r).into_data()[..n].to_vec()
}

fn project(out: &[f64], g: &[f64]) -> f64 {
    out.iter().zip(g).map(|(a, b)| a * b).sum()
}

struct Checks {
    eps: f64,
    results: Vec<(String, f64)>,
}

impl Checks {
    fn run(&mut self, name: &str, x: &[f64], analytic: &[f64], f: impl FnMut(&[f64]) -> f64) {
        self.results
            .push((name.to_string(), grad_check(f, x, analytic, self.eps)));
    }
}

fn tensor(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), data.to_vec()).expect("valid probe shape")
}

/// `(check name, max relative error)` for each layer input and parameter.
pub fn layer_gradchecks(seed: u64) -> Result<Vec<(String, f64)>> {
    let mut r = rng(seed);
    let mut c = Checks {
        eps: GRAD_CHECK_EPS,
        results: Vec::new(),
    };

    // conv_row, both strides
    for stride in [1usize, 2] {
        let (rows, len, cin, cout, width) = (2, 7, 3, 4, 3);
        let xs = [rows, len, cin];
        let ws = [cout, width, cin];
        let x = rand_vec(&mut r, rows * len * cin, 1.0);
        let w = rand_vec(&mut r, cout * width * cin, 0.5);
        let b = rand_vec(&mut r, cout, 0.5);
        let fwd = |x: &[f64], w: &[f64], b: &[f64]| {
            conv_row(
                &tensor(&xs, x),
                &tensor(&ws, w),
                &tensor(&[cout], b),
                stride,
                Activation::Relu,
            )
        };
        let y = fwd(&x, &w, &b)?;
        let g = rand_vec(&mut r, y.len(), 1.0);
        let dy = tensor(y.shape(), &g);
        let (dx, dw, db) = conv_row_backward(&tensor(&xs, &x), &tensor(&ws, &w), &y, stride, Activation::Relu, &dy)?;
        let obj = |y: Tensor<f64>| project(y.data(), &g);
        c.run(&format!("conv_row/s{stride}/x"), &x, dx.data(), |v| {
            obj(fwd(v, &w, &b).unwrap())
        });
        c.run(&format!("conv_row/s{stride}/w"), &w, dw.data(), |v| {
            obj(fwd(&x, v, &b).unwrap())
        });
        c.run(&format!("conv_row/s{stride}/b"), &b, db.data(), |v| {
            obj(fwd(&x, &w, v).unwrap())
        });
    }

    // attentional LSTM, with a padded slot and three blocks
    {
        let (len, cin, h) = (6, 3, 4);
        let blocks = [1u16, 1, 2, 2, 0, 3];
        let x = rand_vec(&mut r, len * cin, 1.0);
        let alpha: Vec<f64> = rand_vec(&mut r, 3, 0.5).iter().map(|a| a + 1.0).collect();
        let w = rand_vec(&mut r, 4 * h * cin, 0.5);
        let u = rand_vec(&mut r, 3 * h * h, 0.5);
        let b = rand_vec(&mut r, 4 * h, 0.5);
        let fwd = |x: &[f64], a: &[f64], w: &[f64], u: &[f64], b: &[f64]| {
            attn_lstm_row(
                &tensor(&[len, cin], x),
                &blocks,
                a,
                &tensor(&[4 * h, cin], w),
                &tensor(&[3 * h, h], u),
                &tensor(&[4 * h], b),
            )
            .unwrap()
            .0
        };
        let (y, cache) = attn_lstm_row(
            &tensor(&[len, cin], &x),
            &blocks,
            &alpha,
            &tensor(&[4 * h, cin], &w),
            &tensor(&[3 * h, h], &u),
            &tensor(&[4 * h], &b),
        )?;
        let g = rand_vec(&mut r, y.len(), 1.0);
        let (dx, da, dw, du, db) = attn_lstm_row_backward(
            &tensor(&[len, cin], &x),
            &blocks,
            &alpha,
            &tensor(&[4 * h, cin], &w),
            &tensor(&[3 * h, h], &u),
            &tensor(&[4 * h], &b),
            &cache,
            &tensor(y.shape(), &g),
        )?;
        let obj = |y: Tensor<f64>| project(y.data(), &g);
        c.run("attn_lstm_row/x", &x, dx.data(), |v| obj(fwd(v, &alpha, &w, &u, &b)));
        c.run("attn_lstm_row/alpha", &alpha, &da, |v| obj(fwd(&x, v, &w, &u, &b)));
        c.run("attn_lstm_row/w", &w, dw.data(), |v| obj(fwd(&x, &alpha, v, &u, &b)));
        c.run("attn_lstm_row/u", &u, du.data(), |v| obj(fwd(&x, &alpha, &w, v, &b)));
        c.run("attn_lstm_row/b", &b, db.data(), |v| obj(fwd(&x, &alpha, &w, &u, v)));
    }

    // capsule prediction vectors
    {
        let (inc, outc, m_out, m_in) = (4, 3, 5, 2);
        let u = rand_vec(&mut r, inc * m_in, 1.0);
        let w = rand_vec(&mut r, inc * outc * m_out * m_in, 1.0);
        let g = rand_vec(&mut r, inc * outc * m_out, 1.0);
        let mut du = vec![0.0; u.len()];
        let mut dw = vec![0.0; w.len()];
        prediction_vectors_backward(&u, &w, inc, outc, m_out, m_in, &g, Some(&mut du), &mut dw);
        let obj = |u: &[f64], w: &[f64]| project(&prediction_vectors(u, w, inc, outc, m_out, m_in).unwrap(), &g);
        c.run("prediction_vectors/u", &u, &du, |v| obj(v, &w));
        c.run("prediction_vectors/w", &w, &dw, |v| obj(&u, v));
    }

    // routing by agreement
    for iters in 1..=DEFAULT_ROUTING_ITERATIONS {
        let (inc, outc, dim) = (5, 3, 4);
        let u_hat = rand_vec(&mut r, inc * outc * dim, 1.0);
        let trace = dynamic_routing(&u_hat, inc, outc, dim, iters)?;
        let g = rand_vec(&mut r, outc * dim, 1.0);
        let du = dynamic_routing_backward(&u_hat, &trace, &g);
        c.run(&format!("dynamic_routing/r{iters}"), &u_hat, &du, |v| {
            project(dynamic_routing(v, inc, outc, dim, iters).unwrap().output(), &g)
        });
    }

    // squash and capsule lengths
    {
        let s = rand_vec(&mut r, 6, 1.5);
        let g = rand_vec(&mut r, 6, 1.0);
        c.run("squash", &s, &squash_backward(&s, &g), |v| project(&squash(v), &g));
        let v = rand_vec(&mut r, 12, 1.0);
        let gl = rand_vec(&mut r, 3, 1.0);
        c.run("capsule_lengths", &v, &capsule_lengths_backward(&v, 4, &gl), |x| {
            project(&capsule_lengths(x, 4), &gl)
        });
    }

    // margin loss, with lengths kept clear of the hinge points
    {
        let lengths = [0.3, 0.6, 0.95, 0.05, 0.5, 0.75];
        let targets = [true, false, true, false, true, false];
        let alpha: Vec<f64> = rand_vec(&mut r, 6, 0.5).iter().map(|a| a + 0.5).collect();
        let mp = MarginParams::default();
        let (_, grad) = margin_loss_grad(&lengths, &targets, &alpha, 0.7, &mp);
        c.run("margin_loss", &lengths, &grad, |v| {
            margin_loss(v, &targets, &alpha, 0.7, &mp)
        });
        let logits = rand_vec(&mut r, 6, 3.0);
        let (_, grad) = bce_with_logits(&logits, &targets);
        c.run("bce_with_logits", &logits, &grad, |v| bce_with_logits(v, &targets).0);
    }

    // fully connected sigmoid head
    {
        let s = FcShape {
            input: 6,
            hidden: 5,
            output: 3,
        };
        let x = rand_vec(&mut r, s.input, 1.0);
        let w1 = rand_vec(&mut r, s.hidden * s.input, 1.0);
        let b1 = rand_vec(&mut r, s.hidden, 0.5);
        let w2 = rand_vec(&mut r, s.output * s.hidden, 1.0);
        let b2 = rand_vec(&mut r, s.output, 0.5);
        let g = rand_vec(&mut r, s.output, 1.0);
        let cache = fc_sigmoid_head(&s, &x, &w1, &b1, &w2, &b2)?;
        let mut dx = vec![0.0; x.len()];
        let (mut dw1, mut db1) = (vec![0.0; w1.len()], vec![0.0; b1.len()]);
        let (mut dw2, mut db2) = (vec![0.0; w2.len()], vec![0.0; b2.len()]);
        fc_sigmoid_head_backward(
            &s,
            &x,
            &w1,
            &w2,
            &cache,
            &g,
            Some(&mut dx),
            &mut dw1,
            &mut db1,
            &mut dw2,
            &mut db2,
        );
        let obj = |x: &[f64], w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64]| {
            project(&fc_sigmoid_head(&s, x, w1, b1, w2, b2).unwrap().logits, &g)
        };
        c.run("fc_head/x", &x, &dx, |v| obj(v, &w1, &b1, &w2, &b2));
        c.run("fc_head/w1", &w1, &dw1, |v| obj(&x, v, &b1, &w2, &b2));
        c.run("fc_head/b1", &b1, &db1, |v| obj(&x, &w1, v, &w2, &b2));
        c.run("fc_head/w2", &w2, &dw2, |v| obj(&x, &w1, &b1, v, &b2));
        c.run("fc_head/b2", &b2, &db2, |v| obj(&x, &w1, &b1, &w2, v));
    }

    Ok(c.results)
}
