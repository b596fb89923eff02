//! Labeled noun-compound datasets and the four train/validation/test splits.
//!
//! Datasets are UTF-8 TSV files with one `modifier<TAB>head<TAB>label` line
//! per compound. Tokens are lowercased on load.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::manifest::Manifest;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("dataset is empty")]
    Empty,
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("random split needs at least 20 instances, got {0}")]
    TooSmall(usize),
    #[error("lexical split needs at least 3 distinct word types, got {0}")]
    TooFewTypes(usize),
    #[error("split ratios must be positive and sum to 1, got {0}")]
    BadRatios(String),
    #[error("unknown {what} `{value}`")]
    Parse { what: &'static str, value: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// A noun compound `modifier head` with its relation label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NcInstance {
    pub modifier: String,
    pub head: String,
    pub label: String,
}

impl NcInstance {
    pub fn new(modifier: &str, head: &str, label: &str) -> Self {
        NcInstance {
            modifier: modifier.to_lowercase(),
            head: head.to_lowercase(),
            label: label.to_string(),
        }
    }

    /// Single-token form used for compound vectors, e.g. `coffee_cup`.
    pub fn nc_token(&self) -> String {
        nc_token(&self.modifier, &self.head)
    }

    pub fn slot(&self, slot: Slot) -> &str {
        match slot {
            Slot::Head => &self.head,
            Slot::Modifier => &self.modifier,
        }
    }
}

pub const NC_JOINER: char = '_';

pub fn nc_token(modifier: &str, head: &str) -> String {
    format!("{modifier}{NC_JOINER}{head}")
}

/// Ordered, duplicate-free list of relation names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationInventory {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl RelationInventory {
    /// Builds the inventory as the sorted set of `names`.
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        let names: Vec<String> = set.into_iter().collect();
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        RelationInventory { names, index }
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| DatasetError::UnknownRelation(name.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelLevel {
    Fine,
    Coarse,
}

impl LabelLevel {
    /// Relation count of the corresponding Tratz label set.
    pub fn tratz_k(self) -> usize {
        match self {
            LabelLevel::Fine => 37,
            LabelLevel::Coarse => 12,
        }
    }
}

impl FromStr for LabelLevel {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine" => Ok(LabelLevel::Fine),
            "coarse" => Ok(LabelLevel::Coarse),
            _ => Err(DatasetError::Parse {
                what: "label level",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for LabelLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelLevel::Fine => "fine",
            LabelLevel::Coarse => "coarse",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub level: LabelLevel,
    pub instances: Vec<NcInstance>,
    pub inventory: RelationInventory,
}

impl Dataset {
    pub fn labels(&self) -> Vec<usize> {
        self.instances
            .iter()
            .map(|i| {
                self.inventory
                    .index_of(&i.label)
                    .expect("inventory built from instances")
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<NcInstance> {
        indices.iter().map(|&i| self.instances[i].clone()).collect()
    }
}

pub fn load_dataset(path: &Path, level: LabelLevel) -> Result<Dataset> {
    let instances = read_instances(BufReader::new(File::open(path)?))?;
    if instances.is_empty() {
        return Err(DatasetError::Empty);
    }
    let inventory = RelationInventory::new(instances.iter().map(|i| i.label.clone()));
    Ok(Dataset {
        level,
        instances,
        inventory,
    })
}

/// Parses TSV lines; blank lines are ignored.
pub fn read_instances<R: BufRead>(reader: R) -> Result<Vec<NcInstance>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |reason: String| DatasetError::Malformed { line: n + 1, reason };
        if fields.len() != 3 {
            return Err(malformed(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        if fields.iter().any(|f| f.trim().is_empty()) {
            return Err(malformed("empty field".to_string()));
        }
        out.push(NcInstance::new(fields[0].trim(), fields[1].trim(), fields[2].trim()));
    }
    Ok(out)
}

pub fn write_instances<W: Write>(mut w: W, instances: &[NcInstance]) -> io::Result<()> {
    for i in instances {
        writeln!(w, "{}\t{}\t{}", i.modifier, i.head, i.label)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Head,
    Modifier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitKind {
    Random,
    LexicalFull,
    LexicalHead,
    LexicalMod,
}

impl SplitKind {
    pub const ALL: [SplitKind; 4] = [
        SplitKind::Random,
        SplitKind::LexicalHead,
        SplitKind::LexicalMod,
        SplitKind::LexicalFull,
    ];
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitKind::Random => "random",
            SplitKind::LexicalFull => "lexical_full",
            SplitKind::LexicalHead => "lexical_head",
            SplitKind::LexicalMod => "lexical_mod",
        })
    }
}

impl FromStr for SplitKind {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitKind::Random),
            "lexical_full" => Ok(SplitKind::LexicalFull),
            "lexical_head" => Ok(SplitKind::LexicalHead),
            "lexical_mod" => Ok(SplitKind::LexicalMod),
            _ => Err(DatasetError::Parse {
                what: "split kind",
                value: s.to_string(),
            }),
        }
    }
}

/// Train/validation/test proportions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Ratios {
    pub const RANDOM: Ratios = Ratios {
        train: 0.75,
        validation: 0.05,
        test: 0.20,
    };

    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = Ratios {
            train,
            validation,
            test,
        };
        let ok = [train, validation, test].iter().all(|v| v.is_finite() && *v > 0.0)
            && (train + validation + test - 1.0).abs() < 1e-9;
        if ok {
            Ok(r)
        } else {
            Err(DatasetError::BadRatios(r.to_string()))
        }
    }
}

/// Word-type ratios for the lexical splits.
impl Default for Ratios {
    fn default() -> Self {
        Ratios {
            train: 0.60,
            validation: 0.25,
            test: 0.15,
        }
    }
}

impl fmt::Display for Ratios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.train, self.validation, self.test)
    }
}

impl FromStr for Ratios {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split([',', ':'])
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| DatasetError::BadRatios(s.to_string()))?;
        match parts[..] {
            // accept percentages such as 60:25:15
            [a, b, c] if (a + b + c - 100.0).abs() < 1e-6 => Ratios::new(a / 100.0, b / 100.0, c / 100.0),
            [a, b, c] => Ratios::new(a, b, c),
            _ => Err(DatasetError::BadRatios(s.to_string())),
        }
    }
}

/// Instance indices per set. Every list is sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub kind: SplitKind,
    pub seed: u64,
    pub ratios: Ratios,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Instances whose words fell into different sets (lexical-full only).
    pub discarded: Vec<usize>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }

    pub fn manifest(&self) -> Manifest {
        Manifest::new()
            .with("kind", self.kind)
            .with("seed", self.seed)
            .with("ratios", self.ratios)
            .with("train", self.train.len())
            .with("validation", self.validation.len())
            .with("test", self.test.len())
            .with("discarded", self.discarded.len())
    }

    /// Writes `train.tsv`, `val.tsv`, `test.tsv` (plus `discarded.tsv` for
    /// lexical-full) and `split.manifest` into `dir`.
    pub fn write(&self, dir: &Path, instances: &[NcInstance], extra: &Manifest) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut sets = vec![("train", &self.train), ("val", &self.validation), ("test", &self.test)];
        if self.kind == SplitKind::LexicalFull {
            sets.push(("discarded", &self.discarded));
        }
        for (name, idx) in sets {
            let subset: Vec<NcInstance> = idx.iter().map(|&i| instances[i].clone()).collect();
            let mut buf = Vec::new();
            write_instances(&mut buf, &subset)?;
            fs::write(dir.join(format!("{name}.tsv")), buf)?;
        }
        let mut m = self.manifest();
        m.extend(extra);
        m.write(&dir.join("split.manifest"))
    }
}

/// `round(x/100 · n)` with halves rounded up, in integer arithmetic.
fn percent_round_half_up(n: usize, pct: usize) -> usize {
    (pct * n + 50) / 100
}

/// Random 75:20:5 split: |val| = round-half-up(0.05n), |test| = floor(0.20n).
pub fn split_random(n: usize, seed: u64) -> Result<Split> {
    if n < 20 {
        return Err(DatasetError::TooSmall(n));
    }
    let n_val = percent_round_half_up(n, 5);
    let n_test = n / 5;
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        kind: SplitKind::Random,
        seed,
        ratios: Ratios::RANDOM,
        train,
        validation,
        test,
        discarded: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Train,
    Validation,
    Test,
}

/// Number of types per set; each set receives at least one type.
fn type_counts(n: usize, ratios: Ratios) -> [usize; 3] {
    let val = ((ratios.validation * n as f64).round() as usize).max(1);
    let test = ((ratios.test * n as f64).round() as usize).max(1);
    let mut counts = [n.saturating_sub(val + test), val, test];
    while counts[0] < 1 {
        let donor = if counts[1] >= counts[2] { 1 } else { 2 };
        counts[donor] -= 1;
        counts[0] += 1;
    }
    counts
}

/// Shuffles the sorted word types and deals them to the three sets.
fn assign_types(types: BTreeSet<&str>, ratios: Ratios, seed: u64) -> Result<HashMap<&str, Part>> {
    if types.len() < 3 {
        return Err(DatasetError::TooFewTypes(types.len()));
    }
    let mut types: Vec<&str> = types.into_iter().collect();
    types.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [n_train, n_val, _] = type_counts(types.len(), ratios);
    Ok(types
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let part = if i < n_train {
                Part::Train
            } else if i < n_train + n_val {
                Part::Validation
            } else {
                Part::Test
            };
            (t, part)
        })
        .collect())
}

/// The set each distinct word of `words` is dealt to.
pub fn word_partition<'a, I>(words: I, ratios: Ratios, seed: u64) -> Result<BTreeMap<&'a str, Part>>
where
    I: IntoIterator<Item = &'a str>,
{
    let ratios = Ratios::new(ratios.train, ratios.validation, ratios.test)?;
    Ok(assign_types(words.into_iter().collect(), ratios, seed)?
        .into_iter()
        .collect())
}

fn collect_split<I>(kind: SplitKind, seed: u64, ratios: Ratios, parts: I) -> Split
where
    I: IntoIterator<Item = (usize, Option<Part>)>,
{
    let mut split = Split {
        kind,
        seed,
        ratios,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        discarded: Vec::new(),
    };
    for (i, part) in parts {
        match part {
            Some(Part::Train) => split.train.push(i),
            Some(Part::Validation) => split.validation.push(i),
            Some(Part::Test) => split.test.push(i),
            None => split.discarded.push(i),
        }
    }
    split
}

/// Lexical-head / lexical-mod split: the words of one slot are disjoint
/// across sets and every instance is kept.
pub fn split_lexical_constituent(instances: &[NcInstance], slot: Slot, ratios: Ratios, seed: u64) -> Result<Split> {
    let ratios = Ratios::new(ratios.train, ratios.validation, ratios.test)?;
    let types: BTreeSet<&str> = instances.iter().map(|i| i.slot(slot)).collect();
    let assignment = assign_types(types, ratios, seed)?;
    let kind = match slot {
        Slot::Head => SplitKind::LexicalHead,
        Slot::Modifier => SplitKind::LexicalMod,
    };
    Ok(collect_split(
        kind,
        seed,
        ratios,
        instances
            .iter()
            .enumerate()
            .map(|(i, nc)| (i, Some(assignment[nc.slot(slot)]))),
    ))
}

/// Lexical-full split: all word types (either slot) are dealt to sets; an
/// instance is kept only when both of its words landed in the same set.
pub fn split_lexical_full(instances: &[NcInstance], ratios: Ratios, seed: u64) -> Result<Split> {
    let ratios = Ratios::new(ratios.train, ratios.validation, ratios.test)?;
    let types: BTreeSet<&str> = instances
        .iter()
        .flat_map(|i| [i.modifier.as_str(), i.head.as_str()])
        .collect();
    let assignment = assign_types(types, ratios, seed)?;
    Ok(collect_split(
        SplitKind::LexicalFull,
        seed,
        ratios,
        instances.iter().enumerate().map(|(i, nc)| {
            let a = assignment[nc.modifier.as_str()];
            let b = assignment[nc.head.as_str()];
            (i, (a == b).then_some(a))
        }),
    ))
}

pub fn make_split(instances: &[NcInstance], kind: SplitKind, ratios: Ratios, seed: u64) -> Result<Split> {
    match kind {
        SplitKind::Random => split_random(instances.len(), seed),
        SplitKind::LexicalHead => split_lexical_constituent(instances, Slot::Head, ratios, seed),
        SplitKind::LexicalMod => split_lexical_constituent(instances, Slot::Modifier, ratios, seed),
        SplitKind::LexicalFull => split_lexical_full(instances, ratios, seed),
    }
}

/// Per-relation instance counts, useful for reporting label skew.
pub fn label_histogram(instances: &[NcInstance]) -> BTreeMap<&str, usize> {
    let mut h = BTreeMap::new();
    for i in instances {
        *h.entry(i.label.as_str()).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nc(m: &str, h: &str, l: &str) -> NcInstance {
        NcInstance::new(m, h, l)
    }

    #[test]
    fn parses_tsv() {
        let text = "coffee\tcup\tCONTAIN\npaper\tcup\tMATERIAL\n";
        let inst = read_instances(text.as_bytes()).unwrap();
        assert_eq!(inst.len(), 2);
        let inv = RelationInventory::new(inst.iter().map(|i| i.label.clone()));
        assert_eq!(inv.k(), 2);
        assert_eq!(inv.names(), ["CONTAIN", "MATERIAL"]);
        assert_eq!(inst[0].nc_token(), "coffee_cup");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "coffee\tcup\tCONTAIN\npaper cup MATERIAL\n";
        match read_instances(text.as_bytes()) {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.tsv");
        fs::write(&p, "").unwrap();
        assert!(matches!(load_dataset(&p, LabelLevel::Fine), Err(DatasetError::Empty)));
    }

    #[test]
    fn random_split_sizes() {
        assert_eq!(split_random(19_158, 1).unwrap().sizes(), (14_369, 958, 3_831));
        assert_eq!(split_random(18_791, 1).unwrap().sizes(), (14_093, 940, 3_758));
        assert_eq!(split_random(100, 1).unwrap().sizes(), (75, 5, 20));
        assert!(matches!(split_random(19, 1), Err(DatasetError::TooSmall(19))));
    }

    #[test]
    fn lexical_head_keeps_heads_apart() {
        let inst = vec![
            nc("a", "x", "R1"),
            nc("b", "x", "R2"),
            nc("a", "y", "R1"),
            nc("c", "z", "R2"),
        ];
        let s = split_lexical_constituent(&inst, Slot::Head, Ratios::default(), 3).unwrap();
        let part_of = |i: usize| {
            [&s.train, &s.validation, &s.test]
                .iter()
                .position(|set| set.contains(&i))
                .unwrap()
        };
        assert_eq!(part_of(0), part_of(1));
        assert_eq!(s.train.len() + s.validation.len() + s.test.len(), 4);
    }

    #[test]
    fn too_few_types() {
        let inst = vec![nc("a", "x", "R1"), nc("b", "y", "R2")];
        assert!(matches!(
            split_lexical_constituent(&inst, Slot::Head, Ratios::default(), 0),
            Err(DatasetError::TooFewTypes(2))
        ));
    }

    #[test]
    fn ratios_validation() {
        assert!(Ratios::new(0.5, 0.5, 0.5).is_err());
        assert!(Ratios::new(1.0, 0.0, 0.0).is_err());
        assert_eq!("60:25:15".parse::<Ratios>().unwrap(), Ratios::default());
        assert!("0.6,0.25,0.15".parse::<Ratios>().is_ok());
    }

    #[test]
    fn type_counts_cover_all_sets() {
        for n in 3..200 {
            let c = type_counts(n, Ratios::default());
            assert_eq!(c.iter().sum::<usize>(), n);
            assert!(c.iter().all(|&x| x >= 1), "{n}: {c:?}");
        }
    }

    #[test]
    fn lexical_full_forced_assignment() {
        // Only the assignment matters: hand-build one and check the filter.
        let inst = [nc("a", "b", "R1"), nc("a", "c", "R1"), nc("d", "e", "R2")];
        let mut assignment = HashMap::new();
        for w in ["a", "b", "c"] {
            assignment.insert(w, Part::Train);
        }
        for w in ["d", "e"] {
            assignment.insert(w, Part::Test);
        }
        let s = collect_split(
            SplitKind::LexicalFull,
            0,
            Ratios::default(),
            inst.iter().enumerate().map(|(i, nc)| {
                let a = assignment[nc.modifier.as_str()];
                (i, (a == assignment[nc.head.as_str()]).then_some(a))
            }),
        );
        assert_eq!(s.train, vec![0, 1]);
        assert_eq!(s.test, vec![2]);
        assert!(s.discarded.is_empty());
    }

    #[test]
    fn split_files_and_manifest() {
        let inst: Vec<NcInstance> = (0..30)
            .map(|i| nc(&format!("m{i}"), &format!("h{}", i % 7), "R"))
            .collect();
        let split = split_lexical_full(&inst, Ratios::default(), 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        split
            .write(dir.path(), &inst, &Manifest::new().with("config", "abc"))
            .unwrap();
        let m = Manifest::read(&dir.path().join("split.manifest")).unwrap();
        assert_eq!(m.get("kind"), Some("lexical_full"));
        assert_eq!(m.get("seed"), Some("7"));
        assert_eq!(m.get("config"), Some("abc"));
        let train = read_instances(fs::read(dir.path().join("train.tsv")).unwrap().as_slice()).unwrap();
        assert_eq!(train.len(), split.train.len());
        assert!(dir.path().join("discarded.tsv").exists());
    }

    proptest! {
        #[test]
        fn random_split_rounding_contract(n in 20usize..50_000, seed: u64) {
            let s = split_random(n, seed).unwrap();
            let (tr, va, te) = s.sizes();
            // round-half-up(n/20) = floor((n + 10) / 20)
            prop_assert_eq!(va, (n + 10) / 20);
            prop_assert_eq!(te, n / 5);
            prop_assert_eq!(tr + va + te, n);
        }
    }
}
