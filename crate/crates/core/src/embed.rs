//! Word, lemma and compound embedding tables loaded from GloVe-style text
//! files (`token v1 v2 ... vd`, most frequent first).

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::RwLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension { line: usize, expected: usize, found: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("vector file is empty")]
    Empty,
    #[error("no vector for `{0}`")]
    Missing(String),
    #[error("unknown OOV policy `{0}`")]
    BadPolicy(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, EmbedError>;

/// What `lookup` returns for tokens without a stored vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OovPolicy {
    /// Uniform in `[-scale, scale]`, derived from the token and the seed.
    RandomInit {
        seed: u64,
        scale: f64,
    },
    Zero,
    Error,
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy::RandomInit { seed: 0, scale: 0.1 }
    }
}

impl fmt::Display for OovPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OovPolicy::RandomInit { .. } => f.write_str("random"),
            OovPolicy::Zero => f.write_str("zero"),
            OovPolicy::Error => f.write_str("error"),
        }
    }
}

impl FromStr for OovPolicy {
    type Err = EmbedError;
    /// `random` (seed 0, scale 0.1), `zero` or `error`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(OovPolicy::default()),
            "zero" => Ok(OovPolicy::Zero),
            "error" => Ok(OovPolicy::Error),
            _ => Err(EmbedError::BadPolicy(s.to_string())),
        }
    }
}

#[derive(Debug)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    oov: OovPolicy,
    oov_cache: RwLock<HashMap<String, Vec<f64>>>,
}

impl Clone for EmbeddingTable {
    fn clone(&self) -> Self {
        EmbeddingTable {
            dim: self.dim,
            tokens: self.tokens.clone(),
            index: self.index.clone(),
            data: self.data.clone(),
            oov: self.oov,
            oov_cache: RwLock::new(self.oov_cache.read().unwrap().clone()),
        }
    }
}

/// FNV-1a, stable across runs and platforms.
fn token_hash(token: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl EmbeddingTable {
    pub fn new(dim: usize, oov: OovPolicy) -> Self {
        EmbeddingTable {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            oov,
            oov_cache: RwLock::new(HashMap::new()),
        }
    }

    /// Inserts or overwrites `token`.
    pub fn insert(&mut self, token: &str, vector: &[f64]) {
        assert_eq!(vector.len(), self.dim, "vector dimension");
        match self.index.get(token) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(token.to_string(), self.tokens.len());
                self.tokens.push(token.to_string());
                self.data.extend_from_slice(vector);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov
    }

    pub fn set_oov_policy(&mut self, oov: OovPolicy) {
        self.oov = oov;
        self.oov_cache.write().unwrap().clear();
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Stored vector only, ignoring the OOV policy.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn lookup(&self, token: &str) -> Result<Cow<'_, [f64]>> {
        if let Some(v) = self.get(token) {
            return Ok(Cow::Borrowed(v));
        }
        match self.oov {
            OovPolicy::Zero => Ok(Cow::Owned(vec![0.0; self.dim])),
            OovPolicy::Error => Err(EmbedError::Missing(token.to_string())),
            OovPolicy::RandomInit { seed, scale } => {
                if let Some(v) = self.oov_cache.read().unwrap().get(token) {
                    return Ok(Cow::Owned(v.clone()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(token_hash(token) ^ seed);
                let v: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-scale..=scale)).collect();
                let mut cache = self.oov_cache.write().unwrap();
                Ok(Cow::Owned(cache.entry(token.to_string()).or_insert(v).clone()))
            }
        }
    }

    /// Top-`k` cosine neighbours of `query` among tokens accepted by
    /// `filter`, excluding `exclude`. Ties go to the smaller token.
    /// Zero-norm candidates are skipped.
    pub fn nearest<F>(&self, query: &[f64], k: usize, exclude: Option<&str>, filter: F) -> Vec<(String, f64)>
    where
        F: Fn(&str) -> bool,
    {
        let qn = norm(query);
        if qn == 0.0 || k == 0 {
            return Vec::new();
        }
        let mut scored: Vec<(&str, f64)> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| Some(t.as_str()) != exclude && filter(t))
            .filter_map(|(i, t)| {
                let v = &self.data[i * self.dim..(i + 1) * self.dim];
                let n = norm(v);
                (n > 0.0).then(|| (t.as_str(), dot(query, v) / (qn * n)))
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        scored.truncate(k);
        scored.into_iter().map(|(t, s)| (t.to_string(), s)).collect()
    }

    /// [`nearest`](Self::nearest) for a token resolved through the OOV policy.
    pub fn cosine_topk<F>(&self, token: &str, k: usize, filter: F) -> Result<Vec<(String, f64)>>
    where
        F: Fn(&str) -> bool,
    {
        let q = self.lookup(token)?.into_owned();
        Ok(self.nearest(&q, k, Some(token), filter))
    }

    /// GloVe text format; floats use the shortest exact representation.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, t) in self.tokens.iter().enumerate() {
            write!(w, "{t}")?;
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, max_vocab: usize, oov: OovPolicy) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| EmbedError::Malformed {
                    line: n + 1,
                    reason: e.to_string(),
                })?;
            let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len(), oov));
            if values.len() != t.dim || values.is_empty() {
                return Err(EmbedError::Dimension {
                    line: n + 1,
                    expected: t.dim,
                    found: values.len(),
                });
            }
            if t.len() >= max_vocab {
                break;
            }
            // keep the first (most frequent) occurrence of a duplicate
            if !t.contains(token) {
                t.insert(token, &values);
            }
        }
        table.ok_or(EmbedError::Empty)
    }
}

pub fn load_vectors(path: &Path, max_vocab: usize, oov: OovPolicy) -> Result<EmbeddingTable> {
    EmbeddingTable::read_text(BufReader::new(File::open(path)?), max_vocab, oov)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SMALL: &str = "the 0.1 0.2 0.3\nof -0.5 0.25 1e-3\ncoffee_cup 1 2 3\n";

    #[test]
    fn truncates_to_max_vocab() {
        let t = EmbeddingTable::read_text(SMALL.as_bytes(), 2, OovPolicy::Zero).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("of").unwrap(), &[-0.5, 0.25, 1e-3]);
        assert!(!t.contains("coffee_cup"));
    }

    #[test]
    fn inconsistent_dimension_names_the_line() {
        let text = "a 1 2 3\nb 1 2\n";
        match EmbeddingTable::read_text(text.as_bytes(), 10, OovPolicy::Zero) {
            Err(EmbedError::Dimension { line, expected, found }) => assert_eq!((line, expected, found), (2, 3, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oov_policies() {
        let mut t = EmbeddingTable::read_text(SMALL.as_bytes(), 10, OovPolicy::Zero).unwrap();
        assert_eq!(&*t.lookup("the").unwrap(), &[0.1, 0.2, 0.3]);
        assert_eq!(&*t.lookup("missing").unwrap(), &[0.0; 3]);

        t.set_oov_policy(OovPolicy::Error);
        assert!(matches!(t.lookup("missing"), Err(EmbedError::Missing(ref s)) if s == "missing"));

        t.set_oov_policy(OovPolicy::RandomInit { seed: 9, scale: 0.1 });
        let a = t.lookup("paper_cup").unwrap().into_owned();
        let b = t.lookup("paper_cup").unwrap().into_owned();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 0.1));
        assert_ne!(a, t.lookup("tea_pot").unwrap().into_owned());
        // derived from token + seed, not from lookup order
        let fresh = EmbeddingTable::new(3, OovPolicy::RandomInit { seed: 9, scale: 0.1 });
        assert_eq!(fresh.lookup("paper_cup").unwrap().into_owned(), a);
    }

    #[test]
    fn cosine_ranking() {
        let mut t = EmbeddingTable::new(2, OovPolicy::Error);
        t.insert("q", &[1.0, 0.0]);
        t.insert("a", &[1.0, 0.0]);
        t.insert("b", &[0.0, 1.0]);
        t.insert("c", &[-1.0, 0.0]);
        t.insert("z", &[0.0, 0.0]);
        let r = t.cosine_topk("q", 10, |_| true).unwrap();
        let names: Vec<&str> = r.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(r.iter().map(|x| x.1).collect::<Vec<_>>(), [1.0, 0.0, -1.0]);
        assert_eq!(t.cosine_topk("q", 1, |_| true).unwrap().len(), 1);
        assert_eq!(t.cosine_topk("q", 10, |tok| tok != "a").unwrap()[0].0, "b");
    }

    #[test]
    fn equal_scores_break_ties_by_token() {
        let mut t = EmbeddingTable::new(2, OovPolicy::Error);
        t.insert("q", &[1.0, 1.0]);
        t.insert("y", &[2.0, 2.0]);
        t.insert("x", &[3.0, 3.0]);
        let r = t.cosine_topk("q", 2, |_| true).unwrap();
        assert_eq!(r[0].0, "x");
        assert_eq!(r[1].0, "y");
    }

    proptest! {
        #[test]
        fn cosine_self_and_symmetry(a in proptest::collection::vec(-10.0f64..10.0, 5),
                                    b in proptest::collection::vec(-10.0f64..10.0, 5)) {
            prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
            prop_assert!((cosine(&a, &a) - 1.0).abs() < 1e-6);
            prop_assert!((cosine(&a, &b) - cosine(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn text_round_trip_is_bit_exact(rows in proptest::collection::vec(proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 4), 1..20)) {
            let mut t = EmbeddingTable::new(4, OovPolicy::Zero);
            for (i, r) in rows.iter().enumerate() {
                t.insert(&format!("w{i}"), r);
            }
            let mut buf = Vec::new();
            t.write_text(&mut buf).unwrap();
            let back = EmbeddingTable::read_text(buf.as_slice(), usize::MAX, OovPolicy::Zero).unwrap();
            for (i, r) in rows.iter().enumerate() {
                let got = back.get(&format!("w{i}")).unwrap();
                prop_assert!(got.iter().zip(r).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
            let mut again = Vec::new();
            back.write_text(&mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
