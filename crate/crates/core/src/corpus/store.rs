use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use super::path::{extract_paths, DependencyPath, ExtractOptions, PathError};
use super::{CorpusError, ParsedSentence, Result};

/// `(modifier, head)` lemma pair.
pub type NcKey = (String, String);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoreOptions {
    pub extract: ExtractOptions,
    /// Paths kept per compound after finalisation.
    pub cap: usize,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions {
            extract: ExtractOptions::default(),
            cap: 1000,
        }
    }
}

/// Per-compound path multisets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathStore {
    entries: BTreeMap<NcKey, HashMap<DependencyPath, u64>>,
}

/// Frequency descending, then serialised path ascending.
fn rank(mut v: Vec<(String, &DependencyPath, u64)>) -> Vec<(String, &DependencyPath, u64)> {
    v.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
    v
}

impl PathStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, modifier: &str, head: &str, path: DependencyPath, count: u64) {
        *self
            .entries
            .entry((modifier.to_string(), head.to_string()))
            .or_default()
            .entry(path)
            .or_insert(0) += count;
    }

    /// Adds all counts of `other`. Associative and commutative.
    pub fn merge(&mut self, other: PathStore) {
        for (key, paths) in other.entries {
            let dst = self.entries.entry(key).or_default();
            for (p, c) in paths {
                *dst.entry(p).or_insert(0) += c;
            }
        }
    }

    /// Keeps the `cap` most frequent paths of every compound; ties go to the
    /// lexicographically smaller serialisation.
    pub fn finalize(&mut self, cap: usize) {
        for paths in self.entries.values_mut() {
            if paths.len() <= cap {
                continue;
            }
            let kept: HashMap<DependencyPath, u64> = rank(paths.iter().map(|(p, &c)| (p.to_string(), p, c)).collect())
                .into_iter()
                .take(cap)
                .map(|(_, p, c)| (p.clone(), c))
                .collect();
            *paths = kept;
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &NcKey> {
        self.entries.keys()
    }

    pub fn contains(&self, modifier: &str, head: &str) -> bool {
        self.entries
            .get(&(modifier.to_string(), head.to_string()))
            .is_some_and(|p| !p.is_empty())
    }

    /// Paths of one compound in ranked order; empty when unseen.
    pub fn paths(&self, modifier: &str, head: &str) -> Vec<(&DependencyPath, u64)> {
        match self.entries.get(&(modifier.to_string(), head.to_string())) {
            None => Vec::new(),
            Some(paths) => rank(paths.iter().map(|(p, &c)| (p.to_string(), p, c)).collect())
                .into_iter()
                .map(|(_, p, c)| (p, c))
                .collect(),
        }
    }

    /// Every distinct path in the store, sorted by serialisation.
    pub fn distinct_paths(&self) -> Vec<&DependencyPath> {
        let mut all: BTreeMap<String, &DependencyPath> = BTreeMap::new();
        for paths in self.entries.values() {
            for p in paths.keys() {
                all.entry(p.to_string()).or_insert(p);
            }
        }
        all.into_values().collect()
    }

    pub fn total_paths(&self) -> usize {
        self.entries.values().map(HashMap::len).sum()
    }

    /// `w1<TAB>w2<TAB>path<TAB>count`, sorted by (w1, w2, count desc, path asc).
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (w1, w2) in self.entries.keys() {
            for (p, c) in self.paths(w1, w2) {
                writeln!(w, "{w1}\t{w2}\t{p}\t{c}")?;
            }
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut store = PathStore::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| CorpusError::Malformed { line: n + 1, reason };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", fields.len())));
            }
            let path: DependencyPath = fields[2].parse().map_err(|e: CorpusError| bad(e.to_string()))?;
            let count: u64 = fields[3]
                .parse()
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| bad(format!("bad count `{}`", fields[3])))?;
            store.add(fields[0], fields[1], path, count);
        }
        Ok(store)
    }
}

/// Accumulates paths for a fixed set of target compounds, one sentence at a
/// time. Collectors over disjoint corpus shards can be merged.
#[derive(Clone, Debug)]
pub struct PathCollector {
    targets: HashMap<String, Vec<String>>,
    opts: StoreOptions,
    store: PathStore,
    /// Pairs whose route could not be computed.
    pub warnings: usize,
    pub occurrences: usize,
}

impl PathCollector {
    pub fn new<'a, I>(targets: I, opts: StoreOptions) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut by_mod: HashMap<String, Vec<String>> = HashMap::new();
        for (m, h) in targets {
            let heads = by_mod.entry(m.to_lowercase()).or_default();
            let h = h.to_lowercase();
            if !heads.contains(&h) {
                heads.push(h);
            }
        }
        PathCollector {
            targets: by_mod,
            opts,
            store: PathStore::new(),
            warnings: 0,
            occurrences: 0,
        }
    }

    /// Same targets and options, empty store.
    pub fn fresh(&self) -> Self {
        PathCollector {
            targets: self.targets.clone(),
            opts: self.opts,
            store: PathStore::new(),
            warnings: 0,
            occurrences: 0,
        }
    }

    pub fn observe(&mut self, sentence: &ParsedSentence) {
        let lemmas: Vec<String> = sentence.tokens().iter().map(|t| t.lemma.to_lowercase()).collect();
        for (i, li) in lemmas.iter().enumerate() {
            let Some(heads) = self.targets.get(li) else { continue };
            for (j, lj) in lemmas.iter().enumerate() {
                if i == j || !heads.contains(lj) {
                    continue;
                }
                self.occurrences += 1;
                match extract_paths(sentence, i, j, &self.opts.extract) {
                    Ok(paths) => {
                        for p in paths {
                            self.store.add(li, lj, p, 1);
                        }
                    }
                    Err(PathError::Disconnected) => self.warnings += 1,
                    Err(e) => unreachable!("indices come from the sentence: {e:?}"),
                }
            }
        }
    }

    pub fn merge(&mut self, other: PathCollector) {
        self.store.merge(other.store);
        self.warnings += other.warnings;
        self.occurrences += other.occurrences;
    }

    pub fn finish(mut self) -> PathStore {
        self.store.finalize(self.opts.cap);
        self.store
    }
}

/// Scans `sentences` for lemma co-occurrences of the target compounds and
/// keeps the `cap` most frequent paths per compound.
pub fn build_path_store<'a, I, T>(sentences: I, targets: T, opts: StoreOptions) -> PathStore
where
    I: IntoIterator<Item = ParsedSentence>,
    T: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut c = PathCollector::new(targets, opts);
    for s in sentences {
        c.observe(&s);
    }
    c.finish()
}
