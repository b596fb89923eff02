//! Small generated tasks used by tests, the acceptance suite and the
//! `grad-check` command.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DependencyPath, PathStore};
use crate::dataset::{NcInstance, RelationInventory};
use crate::embed::{EmbeddingTable, OovPolicy};
use crate::pathenc::PathEmbeddingCache;

/// Compounds whose relation is signalled by one path pattern per relation,
/// mixed with uninformative paths shared by every relation.
#[derive(Clone, Debug)]
pub struct PathTask {
    pub store: PathStore,
    pub instances: Vec<NcInstance>,
    pub inventory: RelationInventory,
    /// `(relation, signature path)` in inventory order.
    pub signatures: Vec<(String, DependencyPath)>,
    /// Paths attached to compounds of every relation.
    pub noise: Vec<DependencyPath>,
}

const SIGNALS: [(&str, &str); 3] = [("MEASURE", "by"), ("PART_WHOLE", "of"), ("PURPOSE", "for")];

const NOISE: [&str; 2] = [
    "<X>/NOUN/conj/UP <Y>/NOUN/root/END",
    "<X>/NOUN/nsubj/UP have/VERB/root/DOWN <Y>/NOUN/dobj/END",
];

pub fn signature_path(preposition: &str) -> DependencyPath {
    format!("<X>/NOUN/pobj/UP {preposition}/ADP/prep/UP <Y>/NOUN/root/END")
        .parse()
        .expect("valid path")
}

/// `per_relation` compounds for each of three relations.
pub fn path_task(per_relation: usize, seed: u64) -> PathTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inventory = RelationInventory::new(SIGNALS.iter().map(|(r, _)| *r));
    let noise: Vec<DependencyPath> = NOISE.iter().map(|p| p.parse().expect("valid path")).collect();
    let mut store = PathStore::new();
    let mut instances = Vec::new();
    let mut signatures = Vec::new();
    for (relation, prep) in SIGNALS {
        let sig = signature_path(prep);
        for i in 0..per_relation {
            let nc = NcInstance::new(&format!("{prep}mod{i}"), &format!("{prep}head{i}"), relation);
            store.add(&nc.modifier, &nc.head, sig.clone(), rng.gen_range(2..=4));
            for p in &noise {
                if rng.gen_bool(0.6) {
                    store.add(&nc.modifier, &nc.head, p.clone(), rng.gen_range(1..=2));
                }
            }
            instances.push(nc);
        }
        signatures.push((relation.to_string(), sig));
    }
    store.finalize(1000);
    PathTask {
        store,
        instances,
        inventory,
        signatures,
        noise,
    }
}

impl PathTask {
    /// Deterministic 60/20/20 partition by position modulo 5.
    pub fn partition(&self) -> (Vec<NcInstance>, Vec<NcInstance>, Vec<NcInstance>) {
        let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for (i, nc) in self.instances.iter().enumerate() {
            match i % 5 {
                4 => test.push(nc.clone()),
                3 => val.push(nc.clone()),
                _ => train.push(nc.clone()),
            }
        }
        (train, val, test)
    }
}

/// Two relations separable from the modifier vector alone, with compound
/// vectors and a one-path store with its embedding cache.
#[derive(Clone, Debug)]
pub struct DistTask {
    pub words: EmbeddingTable,
    pub ncs: EmbeddingTable,
    pub store: PathStore,
    pub cache: PathEmbeddingCache,
    pub instances: Vec<NcInstance>,
    pub inventory: RelationInventory,
}

pub fn dist_task(per_relation: usize, d_w: usize, d_nc: usize, d_path: usize, seed: u64) -> DistTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let relations = ["CAUSE", "LOCATION"];
    let inventory = RelationInventory::new(relations);
    let mut words = EmbeddingTable::new(d_w, OovPolicy::Zero);
    let mut ncs = EmbeddingTable::new(d_nc, OovPolicy::Zero);
    let shared: DependencyPath = NOISE[0].parse().expect("valid path");
    let mut store = PathStore::new();
    let mut instances = Vec::new();
    let noise = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect() };
    for (r, relation) in relations.iter().enumerate() {
        let sign = if r == 0 { 1.0 } else { -1.0 };
        for i in 0..per_relation {
            let nc = NcInstance::new(&format!("m{r}x{i}"), &format!("h{r}x{i}"), relation);
            let mut v = noise(d_w, &mut rng);
            v[0] = sign * rng.gen_range(0.5..1.0);
            words.insert(&nc.modifier, &v);
            words.insert(&nc.head, &noise(d_w, &mut rng));
            ncs.insert(&nc.nc_token(), &noise(d_nc, &mut rng));
            store.add(&nc.modifier, &nc.head, shared.clone(), 1);
            instances.push(nc);
        }
    }
    store.finalize(1000);
    let mut vectors = BTreeMap::new();
    vectors.insert(shared.to_string(), noise(d_path, &mut rng));
    DistTask {
        words,
        ncs,
        store,
        cache: PathEmbeddingCache {
            dim: d_path,
            encoder: "synthetic".into(),
            vectors,
        },
        instances,
        inventory,
    }
}
