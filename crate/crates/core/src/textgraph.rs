//! Word-order-preserving graph-of-words and the arranged words-matrix.
//!
//! A document becomes a directed co-occurrence graph whose nodes remember
//! every position their lemma occupied. The most central words (closeness
//! centrality) each seed a small subgraph, and every subgraph is flattened
//! back into positional blocks of text to form one row of the matrix.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::TokenStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordNode {
    pub lemma: String,
    /// Sorted, 1-based document positions.
    pub positions: Vec<usize>,
}

/// Weighted directed co-occurrence graph. Nodes are kept in first-occurrence
/// order; edge weights count in-window co-occurrences from source to target.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordGraph {
    nodes: Vec<WordNode>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), u32>,
}

impl WordGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[WordNode] {
        &self.nodes
    }

    pub fn node_id(&self, lemma: &str) -> Option<usize> {
        self.index.get(lemma).copied()
    }

    pub fn positions(&self, lemma: &str) -> Option<&[usize]> {
        self.node_id(lemma).map(|i| self.nodes[i].positions.as_slice())
    }

    pub fn weight(&self, from: &str, to: &str) -> u32 {
        match (self.node_id(from), self.node_id(to)) {
            (Some(a), Some(b)) => self.edges.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Directed edges as `(source, target, weight)` by node id.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Undirected view: for every node, its neighbours with the summed
    /// weight of both edge directions. Neighbour lists are sorted by id.
    pub fn undirected(&self) -> Vec<Vec<(usize, u32)>> {
        let mut adj: Vec<BTreeMap<usize, u32>> = vec![BTreeMap::new(); self.nodes.len()];
        for (&(a, b), &w) in &self.edges {
            *adj[a].entry(b).or_insert(0) += w;
            *adj[b].entry(a).or_insert(0) += w;
        }
        adj.into_iter().map(|m| m.into_iter().collect()).collect()
    }

    fn first_position(&self, id: usize) -> usize {
        self.nodes[id].positions[0]
    }
}

/// Connect each token to the following `window - 1` tokens of the filtered
/// stream. Pairs of identical lemmas are skipped, so the graph has no
/// self-loops.
pub fn build_graph(stream: &TokenStream, window: usize) -> WordGraph {
    let mut g = WordGraph::default();
    let mut ids = Vec::with_capacity(stream.len());
    for tok in &stream.tokens {
        let id = match g.index.get(&tok.lemma) {
            Some(&id) => id,
            None => {
                let id = g.nodes.len();
                g.nodes.push(WordNode {
                    lemma: tok.lemma.clone(),
                    positions: Vec::new(),
                });
                g.index.insert(tok.lemma.clone(), id);
                id
            }
        };
        g.nodes[id].positions.push(tok.position);
        ids.push(id);
    }
    for node in &mut g.nodes {
        node.positions.sort_unstable();
    }
    let span = window.max(1);
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len().min(i + span) {
            if ids[i] != ids[j] {
                *g.edges.entry((ids[i], ids[j])).or_insert(0) += 1;
            }
        }
    }
    g
}

/// Edge length used by the shortest-path search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    #[default]
    Unit,
    /// length = 1 / (co-occurrence weight of both directions)
    InverseWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedWord {
    pub node: usize,
    pub lemma: String,
    pub score: f64,
}

/// Nodes ordered by descending closeness; ties go to the earlier first
/// occurrence, then to the lexicographically smaller lemma.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityRanking {
    pub entries: Vec<RankedWord>,
    /// rank[node] = index of that node in `entries`
    rank: Vec<usize>,
}

impl CentralityRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rank_of(&self, node: usize) -> usize {
        self.rank[node]
    }

    pub fn score(&self, lemma: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.lemma == lemma).map(|e| e.score)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapDist(f64);

impl Eq for HeapDist {}

impl PartialOrd for HeapDist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapDist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn dijkstra(adj: &[Vec<(usize, u32)>], source: usize, mode: DistanceMode) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((HeapDist(0.0), source)));
    while let Some(Reverse((HeapDist(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let len = match mode {
                DistanceMode::Unit => 1.0,
                DistanceMode::InverseWeight => 1.0 / w as f64,
            };
            let nd = d + len;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((HeapDist(nd), v)));
            }
        }
    }
    dist
}

/// Closeness `(n-1) / sum d(v,u)` on the undirected view, with the
/// Wasserman-Faust correction `(r-1)/(n-1)` when only `r` nodes (including
/// `v`) are reachable. Isolated nodes score 0.
pub fn closeness_scores(g: &WordGraph, mode: DistanceMode) -> Vec<f64> {
    let n = g.node_count();
    let adj = g.undirected();
    (0..n)
        .map(|v| {
            if n <= 1 {
                return 0.0;
            }
            let dist = dijkstra(&adj, v, mode);
            let (reach, total) = dist
                .iter()
                .filter(|d| d.is_finite())
                .fold((0usize, 0.0f64), |(r, s), d| (r + 1, s + d));
            if reach <= 1 || total <= 0.0 {
                return 0.0;
            }
            let r1 = (reach - 1) as f64;
            (r1 / total) * (r1 / (n - 1) as f64)
        })
        .collect()
}

pub fn rank_nodes(g: &WordGraph, scores: &[f64]) -> CentralityRanking {
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| g.first_position(a).cmp(&g.first_position(b)))
            .then_with(|| g.nodes[a].lemma.cmp(&g.nodes[b].lemma))
    });
    let mut rank = vec![0; order.len()];
    for (r, &node) in order.iter().enumerate() {
        rank[node] = r;
    }
    CentralityRanking {
        entries: order
            .into_iter()
            .map(|node| RankedWord {
                node,
                lemma: g.nodes[node].lemma.clone(),
                score: scores[node],
            })
            .collect(),
        rank,
    }
}

pub fn closeness_centrality(g: &WordGraph) -> CentralityRanking {
    closeness_centrality_with(g, DistanceMode::Unit)
}

pub fn closeness_centrality_with(g: &WordGraph, mode: DistanceMode) -> CentralityRanking {
    rank_nodes(g, &closeness_scores(g, mode))
}

pub fn select_central_words(rank: &CentralityRanking, n: usize) -> Vec<String> {
    rank.entries.iter().take(n).map(|e| e.lemma.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub center: String,
    /// Discovery order; `members[0] == center`.
    pub members: Vec<String>,
}

/// Grow a subgraph of at most `k` nodes around `center`.
///
/// Breadth-first over the undirected view with each frontier expanded in
/// ranking order. If the component runs out first, depth-first searches are
/// restarted from the best-ranked unvisited node until `k` nodes are found.
pub fn extract_subgraph(g: &WordGraph, center: &str, k: usize, rank: &CentralityRanking) -> Result<Subgraph> {
    let start = g
        .node_id(center)
        .ok_or_else(|| Error::Config(format!("center `{center}` is not in the graph")))?;
    let adj = g.undirected();
    let by_rank = |v: usize| -> Vec<usize> {
        let mut nb: Vec<usize> = adj[v].iter().map(|&(u, _)| u).collect();
        nb.sort_by_key(|&u| rank.rank_of(u));
        nb
    };
    let k = k.max(1);
    let mut visited = vec![false; g.node_count()];
    let mut members = vec![start];
    visited[start] = true;

    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        if members.len() >= k {
            break;
        }
        for u in by_rank(v) {
            if members.len() >= k {
                break;
            }
            if !visited[u] {
                visited[u] = true;
                members.push(u);
                queue.push_back(u);
            }
        }
    }

    'restart: while members.len() < k {
        let Some(root) = rank.entries.iter().map(|e| e.node).find(|&v| !visited[v]) else {
            break;
        };
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            members.push(v);
            if members.len() >= k {
                break 'restart;
            }
            for u in by_rank(v).into_iter().rev() {
                if !visited[u] {
                    stack.push(u);
                }
            }
        }
    }

    Ok(Subgraph {
        center: center.to_string(),
        members: members.into_iter().map(|v| g.nodes[v].lemma.clone()).collect(),
    })
}

/// One slot of a normalized row. PAD slots have no lemma, position 0 and
/// block 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(Option<String>, usize, usize)", into = "(Option<String>, usize, usize)")]
pub struct Slot {
    pub lemma: Option<String>,
    pub position: usize,
    pub block: usize,
}

impl Slot {
    pub fn pad() -> Self {
        Slot {
            lemma: None,
            position: 0,
            block: 0,
        }
    }

    pub fn is_pad(&self) -> bool {
        self.lemma.is_none()
    }
}

impl From<(Option<String>, usize, usize)> for Slot {
    fn from((lemma, position, block): (Option<String>, usize, usize)) -> Self {
        Slot { lemma, position, block }
    }
}

impl From<Slot> for (Option<String>, usize, usize) {
    fn from(s: Slot) -> Self {
        (s.lemma, s.position, s.block)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub slots: Vec<Slot>,
    pub q: usize,
}

impl NormalizedRow {
    pub fn empty(t: usize) -> Self {
        NormalizedRow {
            slots: vec![Slot::pad(); t],
            q: 0,
        }
    }

    pub fn words(&self) -> Vec<&str> {
        self.slots.iter().filter_map(|s| s.lemma.as_deref()).collect()
    }
}

/// Split sorted positions into maximal runs whose successive gaps are at
/// most `window`. Returns half-open index ranges.
pub fn positional_blocks(positions: &[usize], window: usize) -> Vec<std::ops::Range<usize>> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=positions.len() {
        if i == positions.len() || positions[i] - positions[i - 1] > window {
            if i > start {
                blocks.push(start..i);
            }
            start = i;
        }
    }
    blocks
}

/// Flatten a subgraph into a row of exactly `t` slots.
///
/// With `sort`, every occurrence of every member is laid out by position,
/// cut into positional blocks, and the blocks are emitted longest first
/// (earlier start breaks ties). Without `sort`, each member contributes only
/// its earliest occurrence, in discovery order, as a single block.
pub fn normalize_subgraph(sub: &Subgraph, g: &WordGraph, t: usize, window: usize, sort: bool) -> NormalizedRow {
    let mut slots = Vec::with_capacity(t);
    let mut q = 0;
    if sort {
        let mut occ: Vec<(usize, &str)> = sub
            .members
            .iter()
            .flat_map(|m| g.positions(m).unwrap_or(&[]).iter().map(move |&p| (p, m.as_str())))
            .collect();
        occ.sort_unstable();
        let positions: Vec<usize> = occ.iter().map(|&(p, _)| p).collect();
        let mut blocks = positional_blocks(&positions, window);
        blocks.sort_by(|a, b| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)));
        'fill: for (bi, range) in blocks.into_iter().enumerate() {
            for &(pos, lemma) in &occ[range] {
                if slots.len() == t {
                    break 'fill;
                }
                slots.push(Slot {
                    lemma: Some(lemma.to_string()),
                    position: pos,
                    block: bi + 1,
                });
                q = bi + 1;
            }
        }
    } else {
        for m in sub.members.iter().take(t) {
            let pos = g.positions(m).and_then(|p| p.first().copied()).unwrap_or(0);
            slots.push(Slot {
                lemma: Some(m.clone()),
                position: pos,
                block: 1,
            });
            q = 1;
        }
    }
    slots.resize(t, Slot::pad());
    NormalizedRow { slots, q }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrangeConfig {
    /// Number of central words (rows).
    pub n: usize,
    /// Maximum subgraph size.
    pub k: usize,
    /// Row length.
    pub t: usize,
    pub window: usize,
    pub sort: bool,
    pub distance: DistanceMode,
}

impl Default for ArrangeConfig {
    fn default() -> Self {
        ArrangeConfig {
            n: 100,
            k: 25,
            t: 20,
            window: crate::corpus::DEFAULT_GRAPH_WINDOW,
            sort: true,
            distance: DistanceMode::Unit,
        }
    }
}

impl ArrangeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.t == 0 {
            return Err(Error::Config("N, K and T must be positive".into()));
        }
        if self.window < 2 {
            return Err(Error::Config("graph window must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrangedMatrix {
    pub doc_id: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub rows: Vec<NormalizedRow>,
}

impl ArrangedMatrix {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix serializes")
    }
}

pub fn arrange_matrix(doc_id: &str, stream: &TokenStream, cfg: &ArrangeConfig) -> Result<ArrangedMatrix> {
    cfg.validate()?;
    let g = build_graph(stream, cfg.window);
    let mut rows = Vec::with_capacity(cfg.n);
    if !g.is_empty() {
        let rank = closeness_centrality_with(&g, cfg.distance);
        for center in select_central_words(&rank, cfg.n) {
            let sub = extract_subgraph(&g, &center, cfg.k, &rank)?;
            rows.push(normalize_subgraph(&sub, &g, cfg.t, cfg.window, cfg.sort));
        }
    }
    rows.resize(cfg.n, NormalizedRow::empty(cfg.t));
    Ok(ArrangedMatrix {
        doc_id: doc_id.to_string(),
        n: cfg.n,
        t: cfg.t,
        rows,
    })
}
