//! Forward and backward passes of the full network for one document.

use std::collections::HashMap;

use super::config::{LossKind, ModelConfig, CONV_WIDTH};
use crate::error::{Error, Result};
use crate::numerics::conv::{conv_row_backward_raw, conv_row_raw};
use crate::numerics::lstm::{lstm_row_backward_raw, lstm_row_raw};
use crate::numerics::{
    bce_with_logits, capsule_lengths, capsule_lengths_backward, dynamic_routing, dynamic_routing_backward,
    ensure_finite, fc_sigmoid_head, fc_sigmoid_head_backward, margin_loss_grad, prediction_vectors,
    prediction_vectors_backward, squash, squash_backward, Activation, ConvShape, FcCache, FcShape, LayerParams,
    LstmCache, LstmShape, Real, RoutingTrace, Tensor,
};
use crate::rng::{derive_seed, fnv1a, rng};
use crate::wordvec::DocTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Uniform(f64),
    Zeros,
    Ones,
}

/// Parameter names, shapes and initialisers implied by a configuration, in
/// checkpoint order.
fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = &cfg.dims;
    let f = &cfg.flags;
    let fan = |n: usize| Init::Uniform(1.0 / (n as f64).sqrt());
    let mut out = Vec::new();
    let layer = |out: &mut Vec<(String, Vec<usize>, Init)>, name: &str, cin: usize, k: usize| {
        out.push((
            format!("{name}.conv.w"),
            vec![k, CONV_WIDTH, cin],
            fan(CONV_WIDTH * cin),
        ));
        out.push((format!("{name}.conv.b"), vec![k], Init::Zeros));
        if f.recurrent() {
            out.push((format!("{name}.lstm.w"), vec![4 * k, k], fan(k)));
            out.push((format!("{name}.lstm.u"), vec![3 * k, k], fan(k)));
            out.push((format!("{name}.lstm.b"), vec![4 * k], Init::Zeros));
        }
        if f.attentional_lstm {
            out.push((format!("{name}.attn"), vec![d.n, d.attention_per_row()], Init::Ones));
        }
    };
    layer(&mut out, "l1", d.d, d.k1);
    layer(&mut out, "l2", d.k1, d.k2);
    if f.capsule {
        let pw = d.primary_kernel();
        let mm = d.caps_channels * d.m;
        out.push(("primary.w".into(), vec![mm, pw, d.k2], fan(pw * d.k2)));
        out.push(("primary.b".into(), vec![mm], Init::Zeros));
        out.push((
            "digit.w".into(),
            vec![d.primary_capsules(), d.labels, d.digit_dim, d.m],
            fan(d.m),
        ));
    } else {
        let flat = d.n * d.t2() * d.k2;
        out.push(("fc1.w".into(), vec![d.fc_hidden, flat], fan(flat)));
        out.push(("fc1.b".into(), vec![d.fc_hidden], Init::Zeros));
        out.push(("fc2.w".into(), vec![d.labels, d.fc_hidden], fan(d.fc_hidden)));
        out.push(("fc2.b".into(), vec![d.labels], Init::Zeros));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerIds {
    conv_w: usize,
    conv_b: usize,
    lstm: Option<(usize, usize, usize)>,
    attn: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HeadIds {
    Capsule {
        prim_w: usize,
        prim_b: usize,
        digit_w: usize,
    },
    Fc {
        w1: usize,
        b1: usize,
        w2: usize,
        b2: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ids {
    l1: LayerIds,
    l2: LayerIds,
    head: HeadIds,
}

fn resolve_ids<R: Real>(cfg: &ModelConfig, p: &LayerParams<R>) -> Ids {
    let id = |n: &str| p.index_of(n).expect("layout guarantees the parameter");
    let opt = |n: &str| p.index_of(n);
    let layer = |name: &str| LayerIds {
        conv_w: id(&format!("{name}.conv.w")),
        conv_b: id(&format!("{name}.conv.b")),
        lstm: opt(&format!("{name}.lstm.w")).map(|w| (w, id(&format!("{name}.lstm.u")), id(&format!("{name}.lstm.b")))),
        attn: opt(&format!("{name}.attn")),
    };
    let head = if cfg.flags.capsule {
        HeadIds::Capsule {
            prim_w: id("primary.w"),
            prim_b: id("primary.b"),
            digit_w: id("digit.w"),
        }
    } else {
        HeadIds::Fc {
            w1: id("fc1.w"),
            b1: id("fc1.b"),
            w2: id("fc2.w"),
            b2: id("fc2.b"),
        }
    };
    Ids {
        l1: layer("l1"),
        l2: layer("l2"),
        head,
    }
}

/// What one document is trained towards.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub labels: Vec<bool>,
    /// Alpha weight per label (positives ignored); required by the weighted
    /// margin loss.
    pub alpha: Option<Vec<f64>>,
}

/// Cached activations of one convolution (+ recurrent) layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace<R> {
    pub len: usize,
    pub depth: usize,
    /// Block label of every output position, `[N × len]`.
    pub blocks: Vec<u16>,
    pub conv: Vec<R>,
    pub lstm: Vec<LstmCache<R>>,
    /// Layer output `[N × len × depth]`.
    pub out: Vec<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadTrace<R> {
    Capsule {
        primary_pre: Vec<R>,
        primary: Vec<R>,
        u_hat: Vec<R>,
        routing: RoutingTrace<R>,
    },
    Fc(FcCache<R>),
}

/// Everything the backward pass and the exporters need.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<R> {
    pub x: Vec<R>,
    /// Blocks present per row.
    pub q: Vec<usize>,
    pub l1: LayerTrace<R>,
    pub l2: LayerTrace<R>,
    pub head: HeadTrace<R>,
    /// Class scores in `[0, 1)`: capsule lengths or sigmoid outputs.
    pub lengths: Vec<R>,
}

impl<R: Real> ForwardTrace<R> {
    /// Routing coefficients `[inputs × labels]`, for capsule models.
    pub fn coupling(&self) -> Option<&[R]> {
        match &self.head {
            HeadTrace::Capsule { routing, .. } => Some(routing.coupling()),
            HeadTrace::Fc(_) => None,
        }
    }
}

/// Block label of each convolution output: the label at the centre of its
/// receptive field, else the first labelled slot in the field, else padding.
pub(crate) fn propagate_blocks(blocks: &[u16], len_in: usize, width: usize, stride: usize) -> Vec<u16> {
    let len_out = (len_in - width) / stride + 1;
    let rows = blocks.len() / len_in;
    let mut out = Vec::with_capacity(rows * len_out);
    for row in blocks.chunks(len_in) {
        for t in 0..len_out {
            let field = &row[t * stride..t * stride + width];
            let centre = field[width / 2];
            out.push(if centre != 0 {
                centre
            } else {
                field.iter().copied().find(|&b| b != 0).unwrap_or(0)
            });
        }
    }
    debug_assert_eq!(out.len(), rows * len_out);
    out
}

/// Offset of the `q`-vector for one row inside a row of the attention bank.
pub(crate) fn attention_offset(q: usize) -> usize {
    q * q.saturating_sub(1) / 2
}

/// The network for one configuration, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<R> {
    pub cfg: ModelConfig,
    pub params: LayerParams<R>,
    ids: Ids,
}

impl<R: Real> Network<R> {
    /// Fresh parameters. Each tensor draws from its own stream keyed by its
    /// name, so adding a layer never reshuffles the others.
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut params = LayerParams::new();
        for (name, shape, init) in layout(cfg) {
            let t = match init {
                Init::Zeros => Tensor::zeros(&shape),
                Init::Ones => Tensor::filled(&shape, R::one()),
                Init::Uniform(scale) => {
                    let seed = derive_seed(cfg.training.seed, &[fnv1a(name.as_bytes())]);
                    Tensor::uniform(&shape, scale, &mut rng(seed))
                }
            };
            params.insert(&name, t);
        }
        let ids = resolve_ids(cfg, &params);
        Ok(Network {
            cfg: cfg.clone(),
            params,
            ids,
        })
    }

    /// Wraps existing parameters after checking names and shapes.
    pub fn from_params(cfg: &ModelConfig, params: LayerParams<R>) -> Result<Self> {
        cfg.validate()?;
        let want = layout(cfg);
        let got: Vec<(&str, &[usize])> = params.iter().map(|(n, p)| (n, p.value.shape())).collect();
        let matches = want.len() == got.len()
            && want
                .iter()
                .zip(&got)
                .all(|((n, s, _), (gn, gs))| n == gn && s.as_slice() == *gs);
        if !matches {
            return Err(Error::Metadata(format!(
                "parameters {:?} do not match the configured layout {:?}",
                got.iter().map(|g| g.0).collect::<Vec<_>>(),
                want.iter().map(|w| w.0.as_str()).collect::<Vec<_>>()
            )));
        }
        let ids = resolve_ids(cfg, &params);
        Ok(Network {
            cfg: cfg.clone(),
            params,
            ids,
        })
    }

    pub fn cast<S: Real>(&self) -> Network<S> {
        Network {
            cfg: self.cfg.clone(),
            params: self.params.cast(),
            ids: self.ids,
        }
    }

    fn check_doc(&self, doc: &DocTensor) -> Result<()> {
        let d = &self.cfg.dims;
        if (doc.n, doc.t, doc.d) != (d.n, d.t, d.d) {
            return Err(Error::Shape {
                op: "forward",
                detail: format!(
                    "document `{}` is {}x{}x{}, model expects {}x{}x{}",
                    doc.doc_id, doc.n, doc.t, doc.d, d.n, d.t, d.d
                ),
            });
        }
        Ok(())
    }

    fn alpha_slice<'a>(&'a self, ids: &LayerIds, row: usize, q: usize, ones: &'a [R]) -> &'a [R] {
        match ids.attn {
            Some(a) => {
                let per_row = self.cfg.dims.attention_per_row();
                let start = row * per_row + attention_offset(q);
                &self.params.value(a)[start..start + q]
            }
            None => &ones[..q],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn layer_forward(
        &self,
        ids: &LayerIds,
        x: &[R],
        blocks_in: &[u16],
        len_in: usize,
        cin: usize,
        k: usize,
        q: &[usize],
    ) -> Result<LayerTrace<R>> {
        let n = self.cfg.dims.n;
        let s = ConvShape {
            len_in,
            cin,
            cout: k,
            width: CONV_WIDTH,
            stride: self.cfg.dims.stride,
        };
        let len = s.len_out();
        let (w, b) = (self.params.value(ids.conv_w), self.params.value(ids.conv_b));
        let mut conv = vec![R::zero(); n * len * k];
        for r in 0..n {
            conv_row_raw(
                &s,
                &x[r * len_in * cin..(r + 1) * len_in * cin],
                w,
                b,
                Activation::Relu,
                &mut conv[r * len * k..(r + 1) * len * k],
            );
        }
        ensure_finite("conv_row", &conv)?;
        let blocks = propagate_blocks(blocks_in, len_in, CONV_WIDTH, self.cfg.dims.stride);
        let mut lstm = Vec::new();
        let out = match ids.lstm {
            Some((lw, lu, lb)) => {
                let shape = LstmShape { len, cin: k, hidden: k };
                let ones = vec![R::one(); self.cfg.dims.t];
                let mut h = vec![R::zero(); n * len * k];
                for r in 0..n {
                    let mut cache = LstmCache::default();
                    lstm_row_raw(
                        &shape,
                        &conv[r * len * k..(r + 1) * len * k],
                        &blocks[r * len..(r + 1) * len],
                        self.alpha_slice(ids, r, q[r], &ones),
                        self.params.value(lw),
                        self.params.value(lu),
                        self.params.value(lb),
                        &mut h[r * len * k..(r + 1) * len * k],
                        &mut cache,
                    );
                    lstm.push(cache);
                }
                ensure_finite("attn_lstm_row", &h)?;
                h
            }
            None => conv.clone(),
        };
        Ok(LayerTrace {
            len,
            depth: k,
            blocks,
            conv,
            lstm,
            out,
        })
    }

    pub fn forward(&self, doc: &DocTensor) -> Result<ForwardTrace<R>> {
        self.check_doc(doc)?;
        let d = self.cfg.dims;
        let x: Vec<R> = doc.data.iter().map(|&v| R::of(v as f64)).collect();
        let q: Vec<usize> = (0..d.n).map(|r| doc.row_q(r)).collect();
        let l1 = self.layer_forward(&self.ids.l1, &x, &doc.blocks, d.t, d.d, d.k1, &q)?;
        let l2 = self.layer_forward(&self.ids.l2, &l1.out, &l1.blocks, l1.len, d.k1, d.k2, &q)?;
        let (head, lengths) = match self.ids.head {
            HeadIds::Capsule {
                prim_w,
                prim_b,
                digit_w,
            } => {
                let s = self.primary_shape();
                let per_row = s.len_out() * s.cout;
                let mut pre = vec![R::zero(); d.n * per_row];
                for r in 0..d.n {
                    conv_row_raw(
                        &s,
                        &l2.out[r * l2.len * d.k2..(r + 1) * l2.len * d.k2],
                        self.params.value(prim_w),
                        self.params.value(prim_b),
                        Activation::Identity,
                        &mut pre[r * per_row..(r + 1) * per_row],
                    );
                }
                ensure_finite("primary_capsules", &pre)?;
                let primary: Vec<R> = pre.chunks(d.m).flat_map(squash).collect();
                let inc = d.primary_capsules();
                let u_hat = prediction_vectors(&primary, self.params.value(digit_w), inc, d.labels, d.digit_dim, d.m)?;
                let routing = dynamic_routing(&u_hat, inc, d.labels, d.digit_dim, self.cfg.training.routing_iters)?;
                let lengths = capsule_lengths(routing.output(), d.digit_dim);
                (
                    HeadTrace::Capsule {
                        primary_pre: pre,
                        primary,
                        u_hat,
                        routing,
                    },
                    lengths,
                )
            }
            HeadIds::Fc { w1, b1, w2, b2 } => {
                let cache = fc_sigmoid_head(
                    &self.fc_shape(),
                    &l2.out,
                    self.params.value(w1),
                    self.params.value(b1),
                    self.params.value(w2),
                    self.params.value(b2),
                )?;
                let lengths = cache.output.clone();
                (HeadTrace::Fc(cache), lengths)
            }
        };
        Ok(ForwardTrace {
            x,
            q,
            l1,
            l2,
            head,
            lengths,
        })
    }

    fn primary_shape(&self) -> ConvShape {
        let d = &self.cfg.dims;
        ConvShape {
            len_in: d.t2(),
            cin: d.k2,
            cout: d.caps_channels * d.m,
            width: d.primary_kernel(),
            stride: 1,
        }
    }

    fn fc_shape(&self) -> FcShape {
        let d = &self.cfg.dims;
        FcShape {
            input: d.n * d.t2() * d.k2,
            hidden: d.fc_hidden,
            output: d.labels,
        }
    }

    /// Class scores only.
    pub fn lengths(&self, doc: &DocTensor) -> Result<Vec<R>> {
        Ok(self.forward(doc)?.lengths)
    }

    fn check_target(&self, target: &Target) -> Result<()> {
        if target.labels.len() != self.cfg.dims.labels {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.dims.labels,
                actual: target.labels.len(),
            });
        }
        if self.cfg.flags.loss() == LossKind::WeightedMargin {
            match &target.alpha {
                None => return Err(Error::MissingLabelEmbedding),
                Some(a) if a.len() != target.labels.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: target.labels.len(),
                        actual: a.len(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Loss for one document and its gradient w.r.t. the class scores
    /// (capsule head) or the logits (sigmoid head).
    fn loss_head(&self, trace: &ForwardTrace<R>, target: &Target, p: f64) -> (R, Vec<R>) {
        let mp = &self.cfg.training.margin;
        let kind = self.cfg.flags.loss();
        let margin = |alpha: Vec<R>, p: R| margin_loss_grad(&trace.lengths, &target.labels, &alpha, p, mp);
        let (loss, grad) = match kind {
            LossKind::WeightedMargin => {
                let a = target.alpha.as_ref().expect("checked by check_target");
                margin(a.iter().map(|&v| R::of(v)).collect(), R::of(p))
            }
            LossKind::Margin => margin(vec![R::one(); trace.lengths.len()], R::one()),
            LossKind::CrossEntropy => match &trace.head {
                HeadTrace::Fc(c) => return bce_with_logits(&c.logits, &target.labels),
                HeadTrace::Capsule { .. } => unreachable!("cross-entropy implies the sigmoid head"),
            },
        };
        match &trace.head {
            // chain through the sigmoid to the logits
            HeadTrace::Fc(c) => {
                let g = grad
                    .iter()
                    .zip(&c.output)
                    .map(|(&g, &y)| g * y * (R::one() - y))
                    .collect();
                (loss, g)
            }
            HeadTrace::Capsule { .. } => (loss, grad),
        }
    }

    pub fn loss(&self, doc: &DocTensor, target: &Target, p: f64) -> Result<R> {
        self.check_target(target)?;
        let trace = self.forward(doc)?;
        Ok(self.loss_head(&trace, target, p).0)
    }

    /// Loss and gradients aligned with [`LayerParams::grad_buffers`].
    pub fn loss_and_grad(&self, doc: &DocTensor, target: &Target, p: f64) -> Result<(R, Vec<Vec<R>>)> {
        self.check_target(target)?;
        let trace = self.forward(doc)?;
        let (loss, dhead) = self.loss_head(&trace, target, p);
        let mut grads = self.params.grad_buffers();
        self.backward(&trace, &dhead, &mut grads);
        Ok((loss, grads))
    }

    fn backward(&self, tr: &ForwardTrace<R>, dhead: &[R], grads: &mut [Vec<R>]) {
        let d = self.cfg.dims;
        let mut dl2 = vec![R::zero(); tr.l2.out.len()];
        match (&tr.head, self.ids.head) {
            (
                HeadTrace::Capsule {
                    primary_pre,
                    primary,
                    u_hat,
                    routing,
                },
                HeadIds::Capsule {
                    prim_w,
                    prim_b,
                    digit_w,
                },
            ) => {
                let dv = capsule_lengths_backward(routing.output(), d.digit_dim, dhead);
                let du_hat = dynamic_routing_backward(u_hat, routing, &dv);
                let mut du = vec![R::zero(); primary.len()];
                prediction_vectors_backward(
                    primary,
                    self.params.value(digit_w),
                    d.primary_capsules(),
                    d.labels,
                    d.digit_dim,
                    d.m,
                    &du_hat,
                    Some(&mut du),
                    &mut grads[digit_w],
                );
                let dpre: Vec<R> = primary_pre
                    .chunks(d.m)
                    .zip(du.chunks(d.m))
                    .flat_map(|(s, g)| squash_backward(s, g))
                    .collect();
                let s = self.primary_shape();
                let per_row = s.len_out() * s.cout;
                let in_row = tr.l2.len * d.k2;
                let (gw, gb) = two_mut(grads, prim_w, prim_b);
                let primary_out = &primary_pre;
                for r in 0..d.n {
                    conv_row_backward_raw(
                        &s,
                        &tr.l2.out[r * in_row..(r + 1) * in_row],
                        self.params.value(prim_w),
                        &primary_out[r * per_row..(r + 1) * per_row],
                        Activation::Identity,
                        &dpre[r * per_row..(r + 1) * per_row],
                        Some(&mut dl2[r * in_row..(r + 1) * in_row]),
                        gw,
                        gb,
                    );
                }
            }
            (HeadTrace::Fc(cache), HeadIds::Fc { w1, b1, w2, b2 }) => {
                let [g1, gb1, g2, gb2] = four_mut(grads, [w1, b1, w2, b2]);
                fc_sigmoid_head_backward(
                    &self.fc_shape(),
                    &tr.l2.out,
                    self.params.value(w1),
                    self.params.value(w2),
                    cache,
                    dhead,
                    Some(&mut dl2),
                    g1,
                    gb1,
                    g2,
                    gb2,
                );
            }
            _ => unreachable!("trace and parameters come from the same config"),
        }
        let mut dl1 = vec![R::zero(); tr.l1.out.len()];
        self.layer_backward(
            &self.ids.l2,
            &tr.l2,
            &tr.l1.out,
            d.k1,
            &tr.q,
            &dl2,
            Some(&mut dl1),
            grads,
        );
        self.layer_backward(&self.ids.l1, &tr.l1, &tr.x, d.d, &tr.q, &dl1, None, grads);
    }

    #[allow(clippy::too_many_arguments)]
    fn layer_backward(
        &self,
        ids: &LayerIds,
        lt: &LayerTrace<R>,
        x: &[R],
        cin: usize,
        q: &[usize],
        dout: &[R],
        mut dx: Option<&mut [R]>,
        grads: &mut [Vec<R>],
    ) {
        let d = self.cfg.dims;
        let (len, k) = (lt.len, lt.depth);
        let len_in = x.len() / (d.n * cin);
        let row = len * k;
        let dconv: Vec<R> = match ids.lstm {
            Some((lw, lu, lb)) => {
                let shape = LstmShape { len, cin: k, hidden: k };
                let ones = vec![R::one(); d.t];
                let mut dconv = vec![R::zero(); dout.len()];
                let per_row = d.attention_per_row();
                let mut dattn = ids.attn.map(|a| std::mem::take(&mut grads[a]));
                let [gw, gu, gb] = three_mut(grads, [lw, lu, lb]);
                for r in 0..d.n {
                    let dal = dattn.as_mut().map(|g| {
                        let start = r * per_row + attention_offset(q[r]);
                        &mut g[start..start + q[r]]
                    });
                    lstm_row_backward_raw(
                        &shape,
                        &lt.conv[r * row..(r + 1) * row],
                        &lt.blocks[r * len..(r + 1) * len],
                        self.alpha_slice(ids, r, q[r], &ones),
                        self.params.value(lw),
                        self.params.value(lu),
                        &lt.lstm[r],
                        &dout[r * row..(r + 1) * row],
                        Some(&mut dconv[r * row..(r + 1) * row]),
                        dal,
                        gw,
                        gu,
                        gb,
                    );
                }
                if let (Some(a), Some(g)) = (ids.attn, dattn) {
                    grads[a] = g;
                }
                dconv
            }
            None => dout.to_vec(),
        };
        let s = ConvShape {
            len_in,
            cin,
            cout: k,
            width: CONV_WIDTH,
            stride: d.stride,
        };
        let in_row = len_in * cin;
        let (gw, gb) = two_mut(grads, ids.conv_w, ids.conv_b);
        for r in 0..d.n {
            conv_row_backward_raw(
                &s,
                &x[r * in_row..(r + 1) * in_row],
                self.params.value(ids.conv_w),
                &lt.conv[r * row..(r + 1) * row],
                Activation::Relu,
                &dconv[r * row..(r + 1) * row],
                dx.as_deref_mut().map(|g| &mut g[r * in_row..(r + 1) * in_row]),
                gw,
                gb,
            );
        }
    }

    /// Attention scalars a document actually uses: `(row, layer, block,
    /// alpha)` with 1-based row, layer and block.
    pub fn attention_records(&self, doc: &DocTensor) -> Result<Vec<(usize, usize, usize, R)>> {
        if !self.cfg.flags.attentional_lstm {
            return Err(Error::AttentionDisabled);
        }
        self.check_doc(doc)?;
        let per_row = self.cfg.dims.attention_per_row();
        let mut out = Vec::new();
        for r in 0..self.cfg.dims.n {
            let q = doc.row_q(r);
            for (layer, ids) in [(1, &self.ids.l1), (2, &self.ids.l2)] {
                let bank = self.params.value(ids.attn.expect("attention flag implies a bank"));
                let start = r * per_row + attention_offset(q);
                for (b, &a) in bank[start..start + q].iter().enumerate() {
                    out.push((r + 1, layer, b + 1, a));
                }
            }
        }
        Ok(out)
    }

    /// Flattened parameter values, in layout order.
    pub fn flat_values(&self) -> Vec<R> {
        self.params.iter().flat_map(|(_, p)| p.value.data().to_vec()).collect()
    }

    /// Overwrites every parameter from a flat vector in layout order.
    pub fn set_flat_values(&mut self, flat: &[R]) {
        let mut off = 0;
        for (_, p) in self.params.iter_mut() {
            let n = p.value.len();
            p.value.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    /// Parameter name -> (offset, length) in [`flat_values`](Self::flat_values).
    pub fn flat_ranges(&self) -> HashMap<String, (usize, usize)> {
        let mut off = 0;
        self.params
            .iter()
            .map(|(n, p)| {
                let r = (n.to_string(), (off, p.value.len()));
                off += p.value.len();
                r
            })
            .collect()
    }
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert!(a != b);
    if a < b {
        let (x, y) = v.split_at_mut(b);
        (&mut x[a], &mut y[0])
    } else {
        let (x, y) = v.split_at_mut(a);
        (&mut y[0], &mut x[b])
    }
}

fn three_mut<T>(v: &mut [T], idx: [usize; 3]) -> [&mut T; 3] {
    v.get_disjoint_mut(idx).expect("distinct parameter indices")
}

fn four_mut<T>(v: &mut [T], idx: [usize; 4]) -> [&mut T; 4] {
    v.get_disjoint_mut(idx).expect("distinct parameter indices")
}
