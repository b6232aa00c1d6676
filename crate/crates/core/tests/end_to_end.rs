use std::collections::BTreeSet;

use graphcaps::corpus::{tokenize, Document, TextConfig};
use graphcaps::model::{
    self, random_doc, tiny_config, Dims, Model, ModelConfig, Network, TrainConfig, TrainOptions, Variant,
};
use graphcaps::pipeline::{arrange_all, assemble_all, build_samples, label_space, word_sequences};
use graphcaps::skipgram::{train_skipgram, SkipgramConfig};
use graphcaps::textgraph::{arrange_matrix, ArrangeConfig};
use graphcaps::toy::{toy_corpus, ToyConfig};

fn toy_dims(labels: usize, d: usize) -> Dims {
    Dims {
        n: 16,
        t: 12,
        d,
        k1: 16,
        k2: 32,
        m: 8,
        caps_channels: 8,
        digit_dim: 8,
        labels,
        stride: 1,
        primary_width: None,
        fc_hidden: 32,
    }
}

#[test]
fn multi_label_document_lights_every_capsule() {
    let toy = toy_corpus(&ToyConfig::default());
    let mut docs = toy.single_label();
    // one document covering four labels from both subtrees
    let wanted = ["ECON.TRADE", "ECON.LABOR", "SPORT.SOCCER", "SPORT.TENNIS"];
    let text: Vec<&str> = wanted
        .iter()
        .map(|l| {
            docs.iter()
                .find(|d| d.labels.contains(*l))
                .expect("label present")
                .text
                .as_str()
        })
        .collect();
    docs.push(Document {
        id: "four".into(),
        text: text.join(" "),
        labels: wanted.iter().map(|l| l.to_string()).collect(),
    });

    let text_cfg = TextConfig::default();
    let words = train_skipgram(
        &word_sequences(&docs, &text_cfg),
        &SkipgramConfig {
            dim: 16,
            epochs: 5,
            ..SkipgramConfig::for_words()
        },
    )
    .unwrap();
    let labels = label_space(&docs, Some(&toy.taxonomy)).unwrap();
    let dims = toy_dims(labels.len(), 16);
    let arrange = ArrangeConfig {
        n: dims.n,
        t: dims.t,
        ..ArrangeConfig::default()
    };
    let matrices = arrange_all(&docs, &text_cfg, &arrange, true).unwrap();
    let samples = build_samples(&docs, assemble_all(&matrices, &words, true).unwrap(), &labels, None).unwrap();

    let training = TrainConfig {
        epochs: 150,
        batch: 8,
        lr: 0.01,
        ..TrainConfig::default()
    };
    let cfg = ModelConfig::new(Variant::Agcrcnn, dims, training, labels.clone());
    let mut m = Model::new(&cfg).unwrap();
    model::train(&mut m, &samples, &TrainOptions::default(), |_| Ok(())).unwrap();

    let lengths = m.net.lengths(&samples.last().unwrap().tensor).unwrap();
    let lit: BTreeSet<&str> = labels
        .iter()
        .zip(&lengths)
        .filter(|(_, &l)| l > 0.9)
        .map(|(n, _)| n.as_str())
        .collect();
    assert_eq!(lit, wanted.into_iter().collect(), "lengths {lengths:?}");
}

#[test]
fn reordering_only_changes_the_input_arrangement() {
    let plain = tiny_config(Variant::TgcnnNoR);
    let sorted = tiny_config(Variant::Tgcnn);
    let a = Network::<f64>::init(&plain).unwrap();
    let b = Network::<f64>::init(&sorted).unwrap();
    assert_eq!(a.params, b.params);
    let doc = random_doc(&plain, 5);
    assert_eq!(a.lengths(&doc).unwrap(), b.lengths(&doc).unwrap());
}

#[test]
fn single_block_documents_arrange_the_same_words_either_way() {
    // every lemma occurs once and every row is one positional block, so
    // sorting can only permute words within a row
    let stream = tokenize("alpha beta gamma delta epsilon zeta eta theta", &TextConfig::default());
    let sorted = ArrangeConfig {
        n: 4,
        t: 10,
        ..ArrangeConfig::default()
    };
    let unsorted = ArrangeConfig { sort: false, ..sorted };
    let a = arrange_matrix("d", &stream, &sorted).unwrap();
    let b = arrange_matrix("d", &stream, &unsorted).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.q, 1);
        let wa: BTreeSet<&str> = ra.words().into_iter().collect();
        let wb: BTreeSet<&str> = rb.words().into_iter().collect();
        assert_eq!(wa, wb);
    }
}
