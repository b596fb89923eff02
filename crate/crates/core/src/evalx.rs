//! Metrics, result tables and the two analysis procedures (indicative
//! paths and compound-vector neighbourhoods).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::DependencyPath;
use crate::dataset::RelationInventory;
use crate::embed::{EmbeddingTable, OovPolicy};
use crate::neural::argmax;
use crate::pathenc::{EdgeVocabularies, PathEncError, PathEncoder};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {golds} gold labels")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("label index {index} outside inventory of {k}")]
    OutOfRange { index: usize, k: usize },
    #[error("label {0:?} not in the relation inventory")]
    UnknownLabel(String),
    #[error("need at least {needed} labelled compounds with vectors, found {found}")]
    TooFewVectors { needed: usize, found: usize },
    #[error(transparent)]
    Encoder(#[from] PathEncError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub relations: Vec<String>,
    pub per_class: Vec<ClassScores>,
    /// Unweighted mean of F1 over every relation of the inventory.
    pub macro_f1: f64,
    /// Support-weighted mean of F1.
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Report over indices `0..k`; panics on out-of-range indices.
pub(crate) fn evaluate_indices(predictions: &[usize], golds: &[usize], k: usize) -> EvalReport {
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &g) in predictions.iter().zip(golds) {
        confusion[g][p] += 1;
    }
    let n = golds.len();
    let per_class: Vec<ClassScores> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScores {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let macro_f1 = if k == 0 {
        0.0
    } else {
        per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64
    };
    let weighted_f1 = if n == 0 {
        0.0
    } else {
        per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / n as f64
    };
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    EvalReport {
        relations: (0..k).map(|i| i.to_string()).collect(),
        per_class,
        macro_f1,
        weighted_f1,
        accuracy: ratio(correct, n),
        confusion,
        n,
    }
}

pub fn evaluate(predictions: &[usize], golds: &[usize], inventory: &RelationInventory) -> Result<EvalReport> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let k = inventory.k();
    if let Some(&index) = predictions.iter().chain(golds).find(|&&i| i >= k) {
        return Err(EvalError::OutOfRange { index, k });
    }
    let mut report = evaluate_indices(predictions, golds, k);
    report.relations = inventory.names().to_vec();
    Ok(report)
}

/// Same as [`evaluate`] with relation names instead of indices.
pub fn evaluate_labels<S: AsRef<str>>(
    predictions: &[S],
    golds: &[S],
    inventory: &RelationInventory,
) -> Result<EvalReport> {
    let index = |s: &S| {
        inventory
            .index_of(s.as_ref())
            .ok_or_else(|| EvalError::UnknownLabel(s.as_ref().to_string()))
    };
    let p: Vec<usize> = predictions.iter().map(index).collect::<Result<_>>()?;
    let g: Vec<usize> = golds.iter().map(index).collect::<Result<_>>()?;
    evaluate(&p, &g, inventory)
}

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("relation\tprecision\trecall\tf1\tsupport\n");
        for (name, c) in self.relations.iter().zip(&self.per_class) {
            writeln!(s, "{name}\t{}\t{}\t{}\t{}", c.precision, c.recall, c.f1, c.support).unwrap();
        }
        writeln!(s, "#macro_f1\t{}", self.macro_f1).unwrap();
        writeln!(s, "#weighted_f1\t{}", self.weighted_f1).unwrap();
        writeln!(s, "#accuracy\t{}", self.accuracy).unwrap();
        writeln!(s, "#n\t{}", self.n).unwrap();
        s
    }

    pub fn confusion_tsv(&self) -> String {
        let mut s = String::from("gold\\pred");
        for r in &self.relations {
            write!(s, "\t{r}").unwrap();
        }
        s.push('\n');
        for (r, row) in self.relations.iter().zip(&self.confusion) {
            s.push_str(r);
            for c in row {
                write!(s, "\t{c}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let width = self.relations.iter().map(String::len).max().unwrap_or(0).max(8);
        let mut s = format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}\n",
            "relation", "precision", "recall", "f1", "support"
        );
        for (name, c) in self.relations.iter().zip(&self.per_class) {
            writeln!(
                s,
                "{name:<width$}  {:>9.3}  {:>9.3}  {:>9.3}  {:>7}",
                c.precision, c.recall, c.f1, c.support
            )
            .unwrap();
        }
        writeln!(
            s,
            "\nweighted F1 {:.3}  macro F1 {:.3}  accuracy {:.3}  n={}",
            self.weighted_f1, self.macro_f1, self.accuracy, self.n
        )
        .unwrap();
        s
    }
}

/// Aligned dataset × split × method table of weighted F1 scores.
#[derive(Clone, Debug, Default)]
pub struct ResultsTable {
    cells: BTreeMap<(String, String), Vec<(String, f64)>>,
}

impl ResultsTable {
    pub fn insert(&mut self, dataset: &str, split: &str, method: &str, f1: f64) {
        let row = self.cells.entry((dataset.to_string(), split.to_string())).or_default();
        match row.iter_mut().find(|(m, _)| m == method) {
            Some(cell) => cell.1 = f1,
            None => row.push((method.to_string(), f1)),
        }
    }

    pub fn get(&self, dataset: &str, split: &str, method: &str) -> Option<f64> {
        self.cells
            .get(&(dataset.to_string(), split.to_string()))?
            .iter()
            .find(|(m, _)| m == method)
            .map(|c| c.1)
    }

    fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for row in self.cells.values() {
            for (m, _) in row {
                if !out.contains(&m.as_str()) {
                    out.push(m);
                }
            }
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("dataset\tsplit\tmethod\tweighted_f1\n");
        for ((d, sp), row) in &self.cells {
            for (m, f) in row {
                writeln!(s, "{d}\t{sp}\t{m}\t{f}").unwrap();
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let methods = self.methods();
        let dw = self.cells.keys().map(|(d, _)| d.len()).max().unwrap_or(0).max(7);
        let sw = self.cells.keys().map(|(_, s)| s.len()).max().unwrap_or(0).max(5);
        let mw: Vec<usize> = methods.iter().map(|m| m.len().max(5)).collect();
        let mut s = format!("{:<dw$}  {:<sw$}", "dataset", "split");
        for (m, w) in methods.iter().zip(&mw) {
            write!(s, "  {m:>w$}").unwrap();
        }
        s.push('\n');
        for (d, sp) in self.cells.keys() {
            write!(s, "{d:<dw$}  {sp:<sw$}").unwrap();
            for (m, w) in methods.iter().zip(&mw) {
                match self.get(d, sp, m) {
                    Some(f) => write!(s, "  {f:>w$.3}").unwrap(),
                    None => write!(s, "  {:>w$}", "-").unwrap(),
                }
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndicativePathRow {
    pub relation: String,
    pub path: String,
    pub score: f64,
}

/// Assigns each path to its best-scoring relation under the path-only
/// prediction and keeps rows with score ≥ `threshold`, grouped by relation
/// in inventory order and sorted by descending score.
pub fn indicative_paths(
    encoder: &PathEncoder,
    vocabs: &EdgeVocabularies,
    universe: &[&DependencyPath],
    relations: &[String],
    threshold: f64,
) -> Result<Vec<IndicativePathRow>> {
    let scored: Vec<(usize, f64, String)> = universe
        .par_iter()
        .map(|p| -> Result<_> {
            let dist = encoder.path_distribution(&vocabs.encode(p))?;
            let r = argmax(&dist);
            Ok((r, dist[r], p.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut kept: Vec<(usize, f64, String)> = scored.into_iter().filter(|(_, s, _)| *s >= threshold).collect();
    kept.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)).then_with(|| a.2.cmp(&b.2)));
    Ok(kept
        .into_iter()
        .map(|(r, score, path)| IndicativePathRow {
            relation: relations.get(r).cloned().unwrap_or_else(|| r.to_string()),
            path,
            score,
        })
        .collect())
}

pub fn indicative_paths_tsv(rows: &[IndicativePathRow]) -> String {
    let mut s = String::from("relation\tpath\tscore\n");
    for r in rows {
        writeln!(s, "{}\t{}\t{}", r.relation, r.path, r.score).unwrap();
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct MismatchRow {
    pub nc: String,
    pub label: String,
    pub nearest: String,
    pub nearest_label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborAgreement {
    pub queries: usize,
    pub covered: usize,
    pub coverage: f64,
    pub agreeing: usize,
    /// Share of covered queries whose neighbours mostly share their label.
    pub fraction: f64,
    pub mismatches: Vec<MismatchRow>,
}

/// For each query compound with a stored vector, retrieves its `k` nearest
/// labelled compounds (itself excluded) by cosine similarity and counts it
/// as agreeing when strictly more than half share its label.
///
/// `pool` lists every labelled compound token with its label; `queries`
/// are the evaluated compounds (normally the test set).
pub fn nc_neighbor_agreement(
    table: &EmbeddingTable,
    pool: &[(String, String)],
    queries: &[(String, String)],
    k: usize,
    max_mismatches: usize,
) -> Result<NeighborAgreement> {
    let mut labels: HashMap<&str, &str> = HashMap::new();
    let mut sub = EmbeddingTable::new(table.dim(), OovPolicy::Zero);
    for (tok, label) in pool {
        if let Some(v) = table.get(tok) {
            if !labels.contains_key(tok.as_str()) {
                labels.insert(tok, label);
                sub.insert(tok, v);
            }
        }
    }
    if sub.len() < k + 1 {
        return Err(EvalError::TooFewVectors {
            needed: k + 1,
            found: sub.len(),
        });
    }
    let covered: Vec<&(String, String)> = queries.iter().filter(|(t, _)| table.contains(t)).collect();
    let verdicts: Vec<(bool, Option<MismatchRow>)> = covered
        .par_iter()
        .map(|(tok, label)| {
            let q = table.get(tok).expect("covered");
            let nn = sub.nearest(q, k, Some(tok), |_| true);
            let same = nn.iter().filter(|(n, _)| labels[n.as_str()] == label).count();
            let agree = 2 * same > nn.len();
            let mismatch = nn
                .first()
                .filter(|(n, _)| labels[n.as_str()] != label)
                .map(|(n, _)| MismatchRow {
                    nc: tok.clone(),
                    label: label.clone(),
                    nearest: n.clone(),
                    nearest_label: labels[n.as_str()].to_string(),
                });
            (agree, mismatch)
        })
        .collect();
    let agreeing = verdicts.iter().filter(|(a, _)| *a).count();
    Ok(NeighborAgreement {
        queries: queries.len(),
        covered: covered.len(),
        coverage: ratio(covered.len(), queries.len()),
        agreeing,
        fraction: ratio(agreeing, covered.len()),
        mismatches: verdicts
            .into_iter()
            .filter_map(|(_, m)| m)
            .take(max_mismatches)
            .collect(),
    })
}

impl NeighborAgreement {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "coverage\t{}/{}\t{}", self.covered, self.queries, self.coverage).unwrap();
        writeln!(s, "agreement\t{}/{}\t{}", self.agreeing, self.covered, self.fraction).unwrap();
        s.push_str("nc\tlabel\tnearest\tnearest_label\n");
        for m in &self.mismatches {
            writeln!(s, "{}\t{}\t{}\t{}", m.nc, m.label, m.nearest, m.nearest_label).unwrap();
        }
        s
    }
}
