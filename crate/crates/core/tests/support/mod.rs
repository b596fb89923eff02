//! Brute-force oracles shared by the integration and acceptance tests.
//! They deliberately avoid the library's own algorithms.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use ncrel::corpus::{ParsedSentence, Token};
use ncrel::dataset::NcInstance;
use rand::seq::SliceRandom;
use rand::Rng;

const LEMMAS: [&str; 6] = ["Cup", "coffee", "of", "made", "in", "Glass"];
const POS: [&str; 3] = ["NOUN", "VERB", "ADP"];
const DEPS: [&str; 4] = ["nsubj", "dobj", "prep", "amod"];

/// Uniformly shaped random tree over `n` tokens.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize) -> ParsedSentence {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![0usize; n];
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        heads[order[k]] = parent + 1;
    }
    let tokens = (0..n)
        .map(|t| {
            let lemma = LEMMAS[rng.gen_range(0..LEMMAS.len())];
            let dep = if heads[t] == 0 {
                "root"
            } else {
                DEPS[rng.gen_range(0..DEPS.len())]
            };
            Token::new(lemma, lemma, POS[rng.gen_range(0..POS.len())], heads[t], dep)
        })
        .collect();
    ParsedSentence::new(tokens).expect("generated tree is valid")
}

/// Serialised core path between `i` and `j` found by breadth-first search
/// over undirected tree edges.
pub fn bfs_path(s: &ParsedSentence, i: usize, j: usize) -> String {
    let n = s.len();
    let head = |t: usize| s.tokens()[t].head;
    let mut adj = vec![Vec::new(); n];
    for t in 0..n {
        if head(t) > 0 {
            adj[t].push(head(t) - 1);
            adj[head(t) - 1].push(t);
        }
    }
    let mut prev = vec![usize::MAX; n];
    prev[i] = i;
    let mut queue = VecDeque::from([i]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if prev[v] == usize::MAX {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut route = vec![j];
    while *route.last().unwrap() != i {
        route.push(prev[*route.last().unwrap()]);
    }
    route.reverse();
    let mut parts = Vec::new();
    for (k, &t) in route.iter().enumerate() {
        let tok = &s.tokens()[t];
        let lemma = if t == i {
            "<X>".to_string()
        } else if t == j {
            "<Y>".to_string()
        } else {
            tok.lemma.to_lowercase()
        };
        let dir = match route.get(k + 1) {
            None => "END",
            Some(&next) if head(t) == next + 1 => "UP",
            Some(_) => "DOWN",
        };
        parts.push(format!("{lemma}/{}/{}/{dir}", tok.pos, tok.deprel));
    }
    parts.join(" ")
}

/// Per-word majority label with the lexicographically smallest label
/// winning ties.
pub fn majority_oracle(train: &[NcInstance], head_slot: bool) -> BTreeMap<String, String> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for nc in train {
        let w = if head_slot { &nc.head } else { &nc.modifier };
        *counts
            .entry(w.clone())
            .or_default()
            .entry(nc.label.clone())
            .or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(w, c)| {
            let max = *c.values().max().unwrap();
            let label = c.into_iter().find(|(_, n)| *n == max).unwrap().0;
            (w, label)
        })
        .collect()
}

/// Per-class (tp, predicted, gold) counts from a direct scan.
pub fn recount(preds: &[usize], golds: &[usize], k: usize) -> Vec<(usize, usize, usize)> {
    (0..k)
        .map(|c| {
            let tp = preds.iter().zip(golds).filter(|(p, g)| **p == c && **g == c).count();
            let predicted = preds.iter().filter(|p| **p == c).count();
            let gold = golds.iter().filter(|g| **g == c).count();
            (tp, predicted, gold)
        })
        .collect()
}

pub fn f1_from_counts(tp: usize, predicted: usize, gold: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (predicted + gold) as f64
}

/// Random compounds over small modifier/head vocabularies.
pub fn random_instances<R: Rng>(rng: &mut R, n: usize, vocab: usize, labels: usize) -> Vec<NcInstance> {
    (0..n)
        .map(|_| {
            NcInstance::new(
                &format!("m{}", rng.gen_range(0..vocab)),
                &format!("h{}", rng.gen_range(0..vocab)),
                &format!("L{}", rng.gen_range(0..labels)),
            )
        })
        .collect()
}

/// Fraction of queries whose `k` nearest pool items (query excluded,
/// zero vectors skipped, ties by token) mostly share the query label.
pub fn neighbor_oracle(
    vectors: &HashMap<String, Vec<f64>>,
    pool: &[(String, String)],
    queries: &[(String, String)],
    k: usize,
) -> f64 {
    let cos = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        d / (na * nb)
    };
    let mut agree = 0;
    let mut covered = 0;
    for (q, label) in queries {
        let Some(qv) = vectors.get(q) else { continue };
        covered += 1;
        let mut scored: Vec<(f64, &str, &str)> = pool
            .iter()
            .filter(|(t, _)| t != q)
            .filter_map(|(t, l)| vectors.get(t).map(|v| (cos(qv, v), t.as_str(), l.as_str())))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        let top = &scored[..k.min(scored.len())];
        let same = top.iter().filter(|(_, _, l)| l == label).count();
        if same * 2 > top.len() {
            agree += 1;
        }
    }
    agree as f64 / covered as f64
}
