pub mod corpus;
pub mod error;
pub mod rng;
pub mod textgraph;

pub use error::{Error, Result};
mod binio;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod skipgram;
pub mod taxonomy;
pub mod toy;
pub mod wordvec;
