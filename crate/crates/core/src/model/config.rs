use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{MarginParams, DEFAULT_ROUTING_ITERATIONS};

/// Which mechanisms are switched on; one field per ablation-grid column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flags {
    pub cnn: bool,
    pub sorting: bool,
    pub lstm: bool,
    pub attentional_lstm: bool,
    pub capsule: bool,
    pub weighted_margin_loss: bool,
}

impl Flags {
    /// A recurrent pass runs after each convolution.
    pub fn recurrent(&self) -> bool {
        self.lstm || self.attentional_lstm
    }

    pub fn loss(&self) -> LossKind {
        if self.weighted_margin_loss {
            LossKind::WeightedMargin
        } else if self.capsule {
            LossKind::Margin
        } else {
            LossKind::CrossEntropy
        }
    }

    /// Names of the fields that differ between `self` and `other`.
    pub fn diff(&self, other: &Flags) -> Vec<&'static str> {
        let pairs = [
            ("cnn", self.cnn, other.cnn),
            ("sorting", self.sorting, other.sorting),
            ("lstm", self.lstm, other.lstm),
            ("attentional_lstm", self.attentional_lstm, other.attentional_lstm),
            ("capsule", self.capsule, other.capsule),
            (
                "weighted_margin_loss",
                self.weighted_margin_loss,
                other.weighted_margin_loss,
            ),
        ];
        pairs.iter().filter(|p| p.1 != p.2).map(|p| p.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Margin loss with taxonomy-derived alpha weights and factor `p`.
    WeightedMargin,
    /// Margin loss with every alpha and `p` equal to one.
    Margin,
    /// Per-class binary cross-entropy on the sigmoid head.
    CrossEntropy,
}

/// The thirteen named rows of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "TGCNN(No-R)")]
    TgcnnNoR,
    #[serde(rename = "TGCNN")]
    Tgcnn,
    #[serde(rename = "TGRCNN")]
    Tgrcnn,
    #[serde(rename = "GCCNN")]
    Gccnn,
    #[serde(rename = "TAGRCNN")]
    Tagrcnn,
    #[serde(rename = "GCRCNN")]
    Gcrcnn,
    #[serde(rename = "AGCRCNN")]
    Agcrcnn,
    #[serde(rename = "HE-TGCNN")]
    HeTgcnn,
    #[serde(rename = "HE-TGRCNN")]
    HeTgrcnn,
    #[serde(rename = "HE-GCCNN")]
    HeGccnn,
    #[serde(rename = "HE-TAGRCNN")]
    HeTagrcnn,
    #[serde(rename = "HE-GCRCNN")]
    HeGcrcnn,
    #[serde(rename = "HE-AGCRCNN")]
    HeAgcrcnn,
}

impl Variant {
    pub const ALL: [Variant; 13] = [
        Variant::TgcnnNoR,
        Variant::Tgcnn,
        Variant::Tgrcnn,
        Variant::Gccnn,
        Variant::Tagrcnn,
        Variant::Gcrcnn,
        Variant::Agcrcnn,
        Variant::HeTgcnn,
        Variant::HeTgrcnn,
        Variant::HeGccnn,
        Variant::HeTagrcnn,
        Variant::HeGcrcnn,
        Variant::HeAgcrcnn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::TgcnnNoR => "TGCNN(No-R)",
            Variant::Tgcnn => "TGCNN",
            Variant::Tgrcnn => "TGRCNN",
            Variant::Gccnn => "GCCNN",
            Variant::Tagrcnn => "TAGRCNN",
            Variant::Gcrcnn => "GCRCNN",
            Variant::Agcrcnn => "AGCRCNN",
            Variant::HeTgcnn => "HE-TGCNN",
            Variant::HeTgrcnn => "HE-TGRCNN",
            Variant::HeGccnn => "HE-GCCNN",
            Variant::HeTagrcnn => "HE-TAGRCNN",
            Variant::HeGcrcnn => "HE-GCRCNN",
            Variant::HeAgcrcnn => "HE-AGCRCNN",
        }
    }

    pub fn flags(&self) -> Flags {
        use Variant::*;
        // columns: sorting, lstm, attentional lstm, capsule, weighted loss
        let (sorting, lstm, attn, capsule, he) = match self {
            TgcnnNoR => (false, false, false, false, false),
            Tgcnn => (true, false, false, false, false),
            Tgrcnn => (true, true, false, false, false),
            Gccnn => (true, false, false, true, false),
            Tagrcnn => (true, false, true, false, false),
            Gcrcnn => (true, true, false, true, false),
            Agcrcnn => (true, false, true, true, false),
            HeTgcnn => (true, false, false, false, true),
            HeTgrcnn => (true, true, false, false, true),
            HeGccnn => (true, false, false, true, true),
            // the published grid ticks the plain LSTM here, which would
            // duplicate HE-TGRCNN; the name calls for the attentional one
            HeTagrcnn => (true, false, true, false, true),
            HeGcrcnn => (true, true, false, true, true),
            HeAgcrcnn => (true, false, true, true, true),
        };
        Flags {
            cnn: true,
            sorting,
            lstm,
            attentional_lstm: attn,
            capsule,
            weighted_margin_loss: he,
        }
    }

    pub fn from_flags(flags: &Flags) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.flags() == *flags)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Rows (central words) per document.
    pub n: usize,
    /// Slots per row.
    pub t: usize,
    /// Word-vector width.
    pub d: usize,
    pub k1: usize,
    pub k2: usize,
    /// Primary capsule width.
    pub m: usize,
    /// Primary capsule channels.
    pub caps_channels: usize,
    pub digit_dim: usize,
    /// Number of labels.
    pub labels: usize,
    /// Horizontal stride of both convolutions.
    pub stride: usize,
    /// Primary-capsule kernel width; `None` spans the whole row.
    pub primary_width: Option<usize>,
    /// Hidden width of the fully connected head.
    pub fc_hidden: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            n: 100,
            t: 20,
            d: 50,
            k1: 64,
            k2: 128,
            m: 16,
            caps_channels: 64,
            digit_dim: 32,
            labels: 103,
            stride: 1,
            primary_width: None,
            fc_hidden: 1024,
        }
    }
}

pub(crate) const CONV_WIDTH: usize = 3;

impl Dims {
    /// Positions after the first convolution.
    pub fn t1(&self) -> usize {
        (self.t - CONV_WIDTH) / self.stride + 1
    }

    /// Positions after the second convolution.
    pub fn t2(&self) -> usize {
        (self.t1() - CONV_WIDTH) / self.stride + 1
    }

    pub fn primary_kernel(&self) -> usize {
        self.primary_width.unwrap_or_else(|| self.t2())
    }

    /// Primary capsule positions per row.
    pub fn primary_positions(&self) -> usize {
        self.t2() - self.primary_kernel() + 1
    }

    pub fn primary_capsules(&self) -> usize {
        self.n * self.primary_positions() * self.caps_channels
    }

    /// Attention scalars per row: one vector of length q for each q <= T.
    pub fn attention_per_row(&self) -> usize {
        self.t * (self.t + 1) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub routing_iters: usize,
    pub threshold: f64,
    pub margin: MarginParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch: 32,
            lr: 1e-3,
            epochs: 20,
            seed: 1,
            routing_iters: DEFAULT_ROUTING_ITERATIONS,
            threshold: 0.5,
            margin: MarginParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub flags: Flags,
    /// Set when `flags` is deliberately outside the named grid.
    #[serde(default)]
    pub custom: bool,
    pub dims: Dims,
    pub training: TrainConfig,
    pub label_names: Vec<String>,
}

impl ModelConfig {
    pub fn new(variant: Variant, dims: Dims, training: TrainConfig, label_names: Vec<String>) -> Self {
        ModelConfig {
            flags: variant.flags(),
            custom: false,
            dims,
            training,
            label_names,
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        Variant::from_flags(&self.flags)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.flags.cnn {
            return bad("every variant convolves; `cnn` cannot be disabled".into());
        }
        if !self.custom && self.variant().is_none() {
            return bad(format!(
                "flags {:?} match no named variant; mark the config custom",
                self.flags
            ));
        }
        if self.label_names.len() != d.labels {
            return bad(format!(
                "{} label names for {} labels",
                self.label_names.len(),
                d.labels
            ));
        }
        for (name, v) in [
            ("N", d.n),
            ("D", d.d),
            ("k1", d.k1),
            ("k2", d.k2),
            ("m", d.m),
            ("M", d.caps_channels),
            ("digit_dim", d.digit_dim),
            ("labels", d.labels),
            ("fc_hidden", d.fc_hidden),
            ("batch", self.training.batch),
            ("routing_iters", self.training.routing_iters),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(1..=2).contains(&d.stride) {
            return bad(format!("stride must be 1 or 2, got {}", d.stride));
        }
        if d.t < CONV_WIDTH || d.t1() < CONV_WIDTH {
            return bad(format!("T = {} is too short for two width-3 convolutions", d.t));
        }
        if d.t > u16::MAX as usize {
            return bad("T exceeds the block-label range".into());
        }
        if let Some(w) = d.primary_width {
            if w == 0 || w > d.t2() {
                return bad(format!("primary kernel width {w} must lie in 1..={}", d.t2()));
            }
        }
        let th = self.training.threshold;
        if !(th > 0.0 && th < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {th}"));
        }
        if self.training.lr.is_nan() || self.training.lr <= 0.0 {
            return bad("learning rate must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("L{i}")).collect()
    }

    #[test]
    fn grid_is_distinct_and_round_trips() {
        let mut seen = std::collections::HashSet::new();
        for v in Variant::ALL {
            assert!(seen.insert(v.flags()), "{v} duplicates another row");
            assert_eq!(Variant::from_flags(&v.flags()), Some(v));
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("nope".parse::<Variant>().is_err());
    }

    #[test]
    fn grid_differs_from_full_model_as_tabulated() {
        let full = Variant::HeAgcrcnn.flags();
        assert_eq!(Variant::Agcrcnn.flags().diff(&full), vec!["weighted_margin_loss"]);
        assert_eq!(
            Variant::TgcnnNoR.flags().diff(&full),
            vec!["sorting", "attentional_lstm", "capsule", "weighted_margin_loss"]
        );
        assert_eq!(Variant::HeGcrcnn.flags().diff(&full), vec!["lstm", "attentional_lstm"]);
        assert_eq!(Variant::HeTagrcnn.flags().diff(&full), vec!["capsule"]);
    }

    #[test]
    fn loss_selection() {
        assert_eq!(Variant::HeTgcnn.flags().loss(), LossKind::WeightedMargin);
        assert_eq!(Variant::Gccnn.flags().loss(), LossKind::Margin);
        assert_eq!(Variant::Tgcnn.flags().loss(), LossKind::CrossEntropy);
        assert!(Variant::Tagrcnn.flags().recurrent());
        assert!(!Variant::Gccnn.flags().recurrent());
    }

    #[test]
    fn shape_chain() {
        let d = Dims {
            t: 20,
            ..Dims::default()
        };
        assert_eq!((d.t1(), d.t2(), d.primary_positions()), (18, 16, 1));
        assert_eq!(d.primary_capsules(), d.n * d.caps_channels);
        let s2 = Dims { stride: 2, ..d };
        assert_eq!((s2.t1(), s2.t2()), (9, 4));
        let defaults = Dims::default();
        assert_eq!(
            (defaults.m, defaults.caps_channels, defaults.digit_dim, defaults.d),
            (16, 64, 32, 50)
        );
        assert_eq!(TrainConfig::default().batch, 32);
        assert_eq!(TrainConfig::default().lr, 0.001);
    }

    #[test]
    fn validation() {
        let dims = Dims {
            labels: 3,
            ..Dims::default()
        };
        let ok = ModelConfig::new(Variant::HeAgcrcnn, dims, TrainConfig::default(), labels(3));
        ok.validate().unwrap();
        let mut c = ok.clone();
        c.flags.cnn = false;
        c.custom = true;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.flags.lstm = true;
        assert!(c.validate().is_err());
        c.custom = true;
        c.validate().unwrap();
        let mut c = ok.clone();
        c.label_names.pop();
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.dims.t = 4;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.training.threshold = 1.0;
        assert!(c.validate().is_err());
        let mut c = ok;
        c.dims.primary_width = Some(17);
        assert!(c.validate().is_err());
    }
}
