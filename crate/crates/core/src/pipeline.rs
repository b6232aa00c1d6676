//! Corpus → arranged matrices → tensors → training samples.
//!
//! Each stage maps documents independently; with `serial = false` the work
//! fans out over rayon but results always come back in input order.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::corpus::{tokenize, Document, TextConfig, TokenStream};
use crate::error::{Error, Result};
use crate::model::{Sample, Target};
use crate::skipgram::EmbeddingTable;
use crate::taxonomy::{alpha_weights, AlphaTable, LabelEmbedding, LabelTaxonomy};
use crate::textgraph::{arrange_matrix, ArrangeConfig, ArrangedMatrix};
use crate::wordvec::{assemble, DocTensor};

fn map_ordered<T: Sync, U: Send>(serial: bool, items: &[T], f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    if serial {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(&f).collect()
    }
}

pub fn tokenize_all(docs: &[Document], text: &TextConfig) -> Vec<TokenStream> {
    docs.iter().map(|d| tokenize(&d.text, text)).collect()
}

/// Lemma sequences, the skip-gram training input for word vectors.
pub fn word_sequences(docs: &[Document], text: &TextConfig) -> Vec<Vec<String>> {
    tokenize_all(docs, text)
        .into_iter()
        .map(|s| s.tokens.into_iter().map(|t| t.lemma).collect())
        .collect()
}

pub fn arrange_all(
    docs: &[Document],
    text: &TextConfig,
    arrange: &ArrangeConfig,
    serial: bool,
) -> Result<Vec<ArrangedMatrix>> {
    text.validate()?;
    arrange.validate()?;
    map_ordered(serial, docs, |d| {
        arrange_matrix(&d.id, &tokenize(&d.text, text), arrange)
    })
}

pub fn assemble_all(matrices: &[ArrangedMatrix], emb: &EmbeddingTable, serial: bool) -> Result<Vec<DocTensor>> {
    map_ordered(serial, matrices, |m| assemble(m, emb, emb.dim()))
}

/// The classifier's label order: the taxonomy's when given, otherwise the
/// sorted union of document labels.
pub fn label_space(docs: &[Document], tax: Option<&LabelTaxonomy>) -> Result<Vec<String>> {
    match tax {
        Some(t) => {
            for d in docs {
                if let Some(bad) = d.labels.iter().find(|l| t.id(l).is_none()) {
                    return Err(Error::UnknownLabel(bad.clone()));
                }
            }
            Ok(t.labels().to_vec())
        }
        None => {
            let all: BTreeSet<&String> = docs.iter().flat_map(|d| &d.labels).collect();
            if all.is_empty() {
                return Err(Error::Config("documents carry no labels".into()));
            }
            Ok(all.into_iter().cloned().collect())
        }
    }
}

pub fn alpha_tables(docs: &[Document], emb: &LabelEmbedding, labels: &[String]) -> Result<Vec<AlphaTable>> {
    docs.iter().map(|d| alpha_weights(emb, &d.labels, labels)).collect()
}

/// Pair each tensor with its document's targets. Tensors must be in corpus
/// order.
pub fn build_samples(
    docs: &[Document],
    tensors: Vec<DocTensor>,
    labels: &[String],
    alphas: Option<&[AlphaTable]>,
) -> Result<Vec<Sample>> {
    if docs.len() != tensors.len() || alphas.is_some_and(|a| a.len() != docs.len()) {
        return Err(Error::Config(
            "documents, tensors and alpha tables differ in count".into(),
        ));
    }
    docs.iter()
        .zip(tensors)
        .enumerate()
        .map(|(i, (doc, tensor))| {
            if doc.id != tensor.doc_id {
                return Err(Error::Config(format!(
                    "tensor `{}` paired with document `{}`",
                    tensor.doc_id, doc.id
                )));
            }
            if let Some(bad) = doc.labels.iter().find(|l| !labels.contains(l)) {
                return Err(Error::UnknownLabel(bad.clone()));
            }
            let target = Target {
                labels: labels.iter().map(|l| doc.labels.contains(l)).collect(),
                alpha: alphas.map(|a| a[i].dense(labels)),
            };
            Ok(Sample { tensor, target })
        })
        .collect()
}
