//! Arranged words-matrix -> `N × T × D` input tensor.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{self, Cursor};
use crate::error::{Error, Result};
use crate::skipgram::EmbeddingTable;
use crate::textgraph::ArrangedMatrix;

pub const TENSOR_MAGIC: [u8; 4] = *b"AGTX";
pub const TENSOR_VERSION: u32 = 1;

/// One document ready for the network.
///
/// `mask` is 1 for every word slot (including out-of-vocabulary words, which
/// carry the zero vector) and 0 for padding. `blocks` holds the 1-based block
/// label of each slot, 0 for padding.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTensor {
    pub doc_id: String,
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub data: Vec<f32>,
    pub mask: Vec<u8>,
    pub blocks: Vec<u16>,
    pub oov: usize,
}

impl DocTensor {
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.t * self.d..(r + 1) * self.t * self.d]
    }

    pub fn row_blocks(&self, r: usize) -> &[u16] {
        &self.blocks[r * self.t..(r + 1) * self.t]
    }

    /// Number of blocks present in row `r`.
    pub fn row_q(&self, r: usize) -> usize {
        self.row_blocks(r).iter().copied().max().unwrap_or(0) as usize
    }

    /// An all-padding document.
    pub fn empty(doc_id: &str, n: usize, t: usize, d: usize) -> Self {
        DocTensor {
            doc_id: doc_id.to_string(),
            n,
            t,
            d,
            data: vec![0.0; n * t * d],
            mask: vec![0; n * t],
            blocks: vec![0; n * t],
            oov: 0,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_string(&TensorMeta {
            doc_id: self.doc_id.clone(),
            n: self.n,
            t: self.t,
            d: self.d,
            oov: self.oov,
        })
        .expect("tensor metadata serializes");
        let mut out = Vec::with_capacity(binio::HEADER_FIXED + meta.len() + self.data.len() * 4 + self.mask.len() * 3);
        binio::write_header(&mut out, &TENSOR_MAGIC, TENSOR_VERSION, &meta);
        binio::put_f32s(&mut out, &self.data);
        out.extend_from_slice(&self.mask);
        binio::put_u16s(&mut out, &self.blocks);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, payload) = binio::read_header(bytes, &TENSOR_MAGIC, TENSOR_VERSION)?;
        let meta: TensorMeta = serde_json::from_str(meta).map_err(|e| Error::Metadata(e.to_string()))?;
        let cells = meta.n * meta.t;
        let mut c = Cursor::new(payload);
        let data = c.f32s(cells * meta.d, "tensor data")?;
        let mask = c.take(cells, "mask")?.to_vec();
        let blocks = c.u16s(cells, "block labels")?;
        c.finish()?;
        Ok(DocTensor {
            doc_id: meta.doc_id,
            n: meta.n,
            t: meta.t,
            d: meta.d,
            data,
            mask,
            blocks,
            oov: meta.oov,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    doc_id: String,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "D")]
    d: usize,
    oov: usize,
}

/// Looks up every word slot in `emb`. Unknown words become zero vectors and
/// are counted in `oov`.
pub fn assemble(matrix: &ArrangedMatrix, emb: &EmbeddingTable, dim: usize) -> Result<DocTensor> {
    if emb.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: emb.dim(),
        });
    }
    let (n, t) = (matrix.n, matrix.t);
    if matrix.rows.len() != n || matrix.rows.iter().any(|r| r.slots.len() != t) {
        return Err(Error::Shape {
            op: "assemble",
            detail: format!("matrix `{}` is not {n}x{t}", matrix.doc_id),
        });
    }
    let mut out = DocTensor::empty(&matrix.doc_id, n, t, dim);
    for (r, row) in matrix.rows.iter().enumerate() {
        for (c, slot) in row.slots.iter().enumerate() {
            let Some(lemma) = &slot.lemma else { continue };
            let cell = r * t + c;
            out.mask[cell] = 1;
            out.blocks[cell] = u16::try_from(slot.block).map_err(|_| Error::Shape {
                op: "assemble",
                detail: format!("block label {} exceeds u16", slot.block),
            })?;
            match emb.get(lemma) {
                Some(v) => out.data[cell * dim..(cell + 1) * dim].copy_from_slice(v),
                None => out.oov += 1,
            }
        }
    }
    if out.oov > 0 {
        log::warn!(
            "document `{}`: {} out-of-vocabulary slot(s) mapped to zero",
            matrix.doc_id,
            out.oov
        );
    }
    Ok(out)
}

pub fn serialize_tensor(dt: &DocTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn deserialize_tensor(path: impl AsRef<Path>) -> Result<DocTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    DocTensor::from_bytes(&bytes)
}
