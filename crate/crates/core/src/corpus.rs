//! Document ingestion and tokenization.
//!
//! Tokens carry the 1-based index they had in the unfiltered token sequence,
//! so removing stopwords leaves gaps in the positions instead of renumbering.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labeled (or, at predict time, unlabeled) document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub position: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.lemma.as_str())
    }

    /// Build a stream from `(lemma, position)` pairs; surface = lemma.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, usize)]) -> Self {
        TokenStream {
            tokens: pairs
                .iter()
                .map(|(l, p)| Token {
                    surface: l.as_ref().to_string(),
                    lemma: l.as_ref().to_string(),
                    position: *p,
                })
                .collect(),
        }
    }
}

/// Text preprocessing knobs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextConfig {
    pub stopwords: HashSet<String>,
    pub lemmas: HashMap<String, String>,
    pub lowercase: bool,
    /// Sliding-window size used for the document graph.
    pub window: usize,
}

pub const DEFAULT_GRAPH_WINDOW: usize = 3;

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            stopwords: HashSet::new(),
            lemmas: HashMap::new(),
            lowercase: true,
            window: DEFAULT_GRAPH_WINDOW,
        }
    }
}

impl TextConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config(format!(
                "graph window must be at least 2, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Split on whitespace and punctuation. A hyphen survives only when it sits
/// between two alphanumeric characters ("long-term" stays one token).
pub fn split_words(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &ch) in chars.iter().enumerate() {
        let keep = if ch.is_alphanumeric() {
            true
        } else if ch == '-' {
            let prev = i > 0 && chars[i - 1].is_alphanumeric();
            let next = chars.get(i + 1).is_some_and(|c| c.is_alphanumeric());
            prev && next && !cur.is_empty()
        } else {
            false
        };
        if keep {
            cur.push(ch);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn tokenize(text: &str, cfg: &TextConfig) -> TokenStream {
    let mut tokens = Vec::new();
    for (idx, raw) in split_words(text).into_iter().enumerate() {
        let surface = if cfg.lowercase { raw.to_lowercase() } else { raw };
        let lemma = cfg.lemmas.get(&surface).cloned().unwrap_or_else(|| surface.clone());
        if cfg.stopwords.contains(&surface) || cfg.stopwords.contains(&lemma) {
            continue;
        }
        tokens.push(Token {
            surface,
            lemma,
            position: idx + 1,
        });
    }
    TokenStream { tokens }
}

/// Read a JSON Lines corpus. Line numbers in errors are 1-based.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, path)
}

pub fn parse_corpus(text: &str, path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d).expect("document serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_lemmas(text: &str, path: &Path) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (surface, lemma) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `surface<TAB>lemma`"))?;
        map.insert(surface.trim().to_string(), lemma.trim().to_string());
    }
    Ok(map)
}

/// Load the stopword list and lemma map; either path may be omitted.
pub fn load_text_maps(
    stopwords: Option<&Path>,
    lemmas: Option<&Path>,
) -> Result<(HashSet<String>, HashMap<String, String>)> {
    let stop = match stopwords {
        Some(p) => parse_stopwords(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
        None => HashSet::new(),
    };
    let lem = match lemmas {
        Some(p) => parse_lemmas(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?, p)?,
        None => HashMap::new(),
    };
    Ok((stop, lem))
}
