//! Dependency-path encoder trained with distant supervision.
//!
//! Each path node becomes the concatenation of its lemma, POS, dependency
//! label and direction vectors. An LSTM runs over the node vectors and its
//! last hidden state is the path embedding `p`. A compound's label
//! distribution is the frequency-weighted mean of the per-path
//! distributions `softmax(W_o·p + b_o)`, and training minimises the
//! cross-entropy of that pooled distribution against the compound label.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{DependencyPath, Direction, PathNode, PathStore, X_PLACEHOLDER, Y_PLACEHOLDER};
use crate::dataset::{NcInstance, RelationInventory};
use crate::embed::EmbeddingTable;
use crate::evalx;
use crate::neural::{
    self, argmax, cross_entropy, Activation, Adam, AdamConfig, Dense, Lstm, LstmTrace, NeuralError, ParamSet, Tensor,
};
use crate::training::{EarlyStopping, EpochRecord, TrainHistory, Verdict};

#[derive(Debug, Error)]
pub enum PathEncError {
    #[error("{} training compounds have no paths: {}", .0.len(), .0.join(", "))]
    NoPaths(Vec<String>),
    #[error("no paths to pool")]
    EmptyPathSet,
    #[error("path frequencies must be positive")]
    BadFrequency,
    #[error("label index {0} outside the relation inventory")]
    BadLabel(usize),
    #[error("label {0:?} is not in the relation inventory")]
    UnknownLabel(String),
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("pretrained lemma vectors have dimension {found}, encoder expects {expected}")]
    LemmaDim { expected: usize, found: usize },
    #[error("malformed file {file}: {reason}")]
    Format { file: String, reason: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, PathEncError>;

pub const UNKNOWN: &str = "<unk>";

/// String-to-index map; index 0 is always `<unk>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        let mut v = Vocab {
            items: Vec::new(),
            index: HashMap::new(),
        };
        v.insert(UNKNOWN);
        v
    }
}

impl Vocab {
    pub fn insert(&mut self, item: &str) -> usize {
        if let Some(&i) = self.index.get(item) {
            return i;
        }
        self.index.insert(item.to_string(), self.items.len());
        self.items.push(item.to_string());
        self.items.len() - 1
    }

    /// Index of `item`, or 0 (`<unk>`).
    pub fn id(&self, item: &str) -> usize {
        self.index.get(item).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        for it in &self.items {
            writeln!(w, "{it}")?;
        }
        Ok(())
    }

    fn read<R: BufRead>(r: R, file: &str) -> Result<Self> {
        let items: Vec<String> = r.lines().collect::<io::Result<_>>()?;
        if items.first().map(String::as_str) != Some(UNKNOWN) {
            return Err(PathEncError::Format {
                file: file.to_string(),
                reason: "first entry must be <unk>".into(),
            });
        }
        let mut v = Vocab::default();
        for it in &items[1..] {
            v.insert(it);
        }
        Ok(v)
    }
}

/// Node-component vocabularies. `<X>`/`<Y>` and all directions are always
/// present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeVocabularies {
    pub lemma: Vocab,
    pub pos: Vocab,
    pub dep: Vocab,
    pub dir: Vocab,
}

/// A path as rows into the four embedding tables, one `[lemma, pos, dep,
/// dir]` per node.
pub type EncodedPath = Vec<[usize; 4]>;

impl Default for EdgeVocabularies {
    fn default() -> Self {
        let mut lemma = Vocab::default();
        lemma.insert(X_PLACEHOLDER);
        lemma.insert(Y_PLACEHOLDER);
        let mut dir = Vocab::default();
        for d in Direction::ALL {
            dir.insert(d.as_str());
        }
        EdgeVocabularies {
            lemma,
            pos: Vocab::default(),
            dep: Vocab::default(),
            dir,
        }
    }
}

impl EdgeVocabularies {
    pub fn from_paths<'a, I>(paths: I) -> Self
    where
        I: IntoIterator<Item = &'a DependencyPath>,
    {
        let mut v = EdgeVocabularies::default();
        for p in paths {
            for n in p.nodes() {
                v.lemma.insert(&n.lemma);
                v.pos.insert(&n.pos);
                v.dep.insert(&n.dep);
            }
        }
        v
    }

    pub fn encode_node(&self, node: &PathNode) -> [usize; 4] {
        [
            self.lemma.id(&node.lemma),
            self.pos.id(&node.pos),
            self.dep.id(&node.dep),
            self.dir.id(node.dir.as_str()),
        ]
    }

    pub fn encode(&self, path: &DependencyPath) -> EncodedPath {
        path.nodes().iter().map(|n| self.encode_node(n)).collect()
    }

    pub fn save(&self, dir: &Path) -> io::Result<()> {
        for (name, v) in self.named() {
            let mut buf = Vec::new();
            v.write(&mut buf)?;
            fs::write(dir.join(format!("vocab.{name}.txt")), buf)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Vocab> {
            let file = format!("vocab.{name}.txt");
            Vocab::read(io::BufReader::new(fs::File::open(dir.join(&file))?), &file)
        };
        Ok(EdgeVocabularies {
            lemma: read("lemma")?,
            pos: read("pos")?,
            dep: read("dep")?,
            dir: read("dir")?,
        })
    }

    fn named(&self) -> [(&'static str, &Vocab); 4] {
        [
            ("lemma", &self.lemma),
            ("pos", &self.pos),
            ("dep", &self.dep),
            ("dir", &self.dir),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderDims {
    pub lemma: usize,
    pub pos: usize,
    pub dep: usize,
    pub dir: usize,
    pub path: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        EncoderDims {
            lemma: 50,
            pos: 4,
            dep: 5,
            dir: 1,
            path: 60,
        }
    }
}

impl EncoderDims {
    pub fn edge(&self) -> usize {
        self.lemma + self.pos + self.dep + self.dir
    }
}

/// Trainable parameters: four component tables, the LSTM, and the output
/// projection to `k` relations (softmax activation).
#[derive(Clone, Debug, PartialEq)]
pub struct PathEncoder {
    pub lemma: Tensor,
    pub pos: Tensor,
    pub dep: Tensor,
    pub dir: Tensor,
    pub lstm: Lstm,
    pub proj: Dense,
}

impl ParamSet for PathEncoder {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("lemma", &self.lemma),
            ("pos", &self.pos),
            ("dep", &self.dep),
            ("dir", &self.dir),
            ("lstm.weight", &self.lstm.weight),
            ("lstm.bias", &self.lstm.bias),
            ("proj.weight", &self.proj.weight),
            ("proj.bias", &self.proj.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("lemma", &mut self.lemma),
            ("pos", &mut self.pos),
            ("dep", &mut self.dep),
            ("dir", &mut self.dir),
            ("lstm.weight", &mut self.lstm.weight),
            ("lstm.bias", &mut self.lstm.bias),
            ("proj.weight", &mut self.proj.weight),
            ("proj.bias", &mut self.proj.bias),
        ]
    }
}

/// Forward state of one path, kept for the backward pass.
struct PathForward {
    trace: LstmTrace,
    embedding: Vec<f64>,
    distribution: Vec<f64>,
}

/// Sparse gradient of one training compound: dense LSTM/projection parts
/// plus the touched embedding rows.
struct InstanceGrads {
    lstm: Lstm,
    proj: Dense,
    rows: Vec<(usize, usize, Vec<f64>)>,
}

impl PathEncoder {
    /// Random initialisation; lemma rows found in `pretrained` are copied.
    pub fn new<R: Rng + ?Sized>(
        vocabs: &EdgeVocabularies,
        dims: EncoderDims,
        k: usize,
        pretrained: Option<&EmbeddingTable>,
        rng: &mut R,
    ) -> Result<Self> {
        let table = |n: usize, d: usize, rng: &mut R| Tensor::uniform(&[n, d], (3.0 / d as f64).sqrt().min(1.0), rng);
        let mut lemma = table(vocabs.lemma.len(), dims.lemma, rng);
        if let Some(pre) = pretrained {
            if pre.dim() != dims.lemma {
                return Err(PathEncError::LemmaDim {
                    expected: dims.lemma,
                    found: pre.dim(),
                });
            }
            for (i, l) in vocabs.lemma.items().iter().enumerate() {
                if let Some(v) = pre.get(l) {
                    lemma.row_mut(i).copy_from_slice(v);
                }
            }
        }
        Ok(PathEncoder {
            lemma,
            pos: table(vocabs.pos.len(), dims.pos, rng),
            dep: table(vocabs.dep.len(), dims.dep, rng),
            dir: table(vocabs.dir.len(), dims.dir, rng),
            lstm: Lstm::new(dims.edge(), dims.path, rng),
            proj: Dense::new(dims.path, k, Activation::Softmax, rng),
        })
    }

    /// All-zero parameters with the right shapes (used to restore checkpoints).
    pub fn zeros(vocabs: &EdgeVocabularies, dims: EncoderDims, k: usize) -> Self {
        PathEncoder {
            lemma: Tensor::zeros(&[vocabs.lemma.len(), dims.lemma]),
            pos: Tensor::zeros(&[vocabs.pos.len(), dims.pos]),
            dep: Tensor::zeros(&[vocabs.dep.len(), dims.dep]),
            dir: Tensor::zeros(&[vocabs.dir.len(), dims.dir]),
            lstm: Lstm::zeros(dims.edge(), dims.path),
            proj: Dense::zeros(dims.path, k, Activation::Softmax),
        }
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            lemma: self.lemma.cols(),
            pos: self.pos.cols(),
            dep: self.dep.cols(),
            dir: self.dir.cols(),
            path: self.lstm.hidden_dim(),
        }
    }

    pub fn k(&self) -> usize {
        self.proj.output_dim()
    }

    fn table(&self, slot: usize) -> &Tensor {
        match slot {
            0 => &self.lemma,
            1 => &self.pos,
            2 => &self.dep,
            _ => &self.dir,
        }
    }

    fn table_mut(&mut self, slot: usize) -> &mut Tensor {
        match slot {
            0 => &mut self.lemma,
            1 => &mut self.pos,
            2 => &mut self.dep,
            _ => &mut self.dir,
        }
    }

    /// `[v_lemma; v_pos; v_dep; v_dir]` for one node.
    pub fn encode_edge(&self, node: [usize; 4]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.lstm.input_dim());
        for (slot, &row) in node.iter().enumerate() {
            v.extend_from_slice(self.table(slot).row(row));
        }
        v
    }

    fn run(&self, path: &[[usize; 4]], drop_lemma: &[bool]) -> Result<PathForward> {
        let inputs: Vec<Vec<f64>> = path
            .iter()
            .enumerate()
            .map(|(t, &node)| {
                let mut v = self.encode_edge(node);
                if drop_lemma.get(t).copied().unwrap_or(false) {
                    v[..self.lemma.cols()].iter_mut().for_each(|x| *x = 0.0);
                }
                v
            })
            .collect();
        let trace = self.lstm.forward(&inputs)?;
        let embedding = trace.last_hidden().to_vec();
        let distribution = self.proj.forward(&embedding)?;
        Ok(PathForward {
            trace,
            embedding,
            distribution,
        })
    }

    /// The path embedding `p`: last LSTM hidden state.
    pub fn embed(&self, path: &[[usize; 4]]) -> Result<Vec<f64>> {
        Ok(self.run(path, &[])?.embedding)
    }

    pub fn embed_path(&self, path: &DependencyPath, vocabs: &EdgeVocabularies) -> Result<Vec<f64>> {
        self.embed(&vocabs.encode(path))
    }

    /// `softmax(W_o·p + b_o)` for a single path.
    pub fn path_distribution(&self, path: &[[usize; 4]]) -> Result<Vec<f64>> {
        Ok(self.run(path, &[])?.distribution)
    }

    /// Frequency-weighted mean of per-path distributions, and its argmax
    /// (lowest index on ties).
    pub fn pooled_prediction(&self, paths: &[(EncodedPath, f64)]) -> Result<(Vec<f64>, usize)> {
        normalised_weights(paths)?;
        let dists: Vec<(Vec<f64>, f64)> = paths
            .iter()
            .map(|(p, f)| Ok((self.path_distribution(p)?, *f)))
            .collect::<Result<_>>()?;
        pool_distributions(&dists)
    }

    fn instance_grads(
        &self,
        paths: &[(EncodedPath, f64)],
        gold: usize,
        drops: &[Vec<bool>],
    ) -> Result<(f64, InstanceGrads)> {
        let weights = normalised_weights(paths)?;
        let forwards: Vec<PathForward> = paths
            .iter()
            .enumerate()
            .map(|(i, (p, _))| self.run(p, drops.get(i).map(Vec::as_slice).unwrap_or(&[])))
            .collect::<Result<_>>()?;
        let mut o = vec![0.0; self.k()];
        for (f, w) in forwards.iter().zip(&weights) {
            neural::axpy(*w, &f.distribution, &mut o);
        }
        let (loss, d_o) = cross_entropy(&o, gold)?;

        let mut g = InstanceGrads {
            lstm: self.lstm.zeros_like(),
            proj: self.proj.zeros_like(),
            rows: Vec::new(),
        };
        let d = self.dims();
        let widths = [d.lemma, d.pos, d.dep, d.dir];
        for (i, (((path, _), f), w)) in paths.iter().zip(&forwards).zip(&weights).enumerate() {
            let mask = drops.get(i).map(Vec::as_slice).unwrap_or(&[]);
            let dy: Vec<f64> = d_o.iter().map(|v| v * w).collect();
            let dp = self.proj.backward(&f.embedding, &f.distribution, &dy, &mut g.proj);
            let dxs = self.lstm.backward_last(&f.trace, &dp, &mut g.lstm);
            for (t, (node, dx)) in path.iter().zip(dxs).enumerate() {
                let mut offset = 0;
                for slot in 0..4 {
                    let dropped = slot == 0 && mask.get(t).copied().unwrap_or(false);
                    if !dropped {
                        g.rows
                            .push((slot, node[slot], dx[offset..offset + widths[slot]].to_vec()));
                    }
                    offset += widths[slot];
                }
            }
        }
        Ok((loss, g))
    }

    /// Loss of one compound and the dense gradient of every parameter.
    pub fn loss_and_gradient(&self, paths: &[(EncodedPath, f64)], gold: usize) -> Result<(f64, PathEncoder)> {
        let (loss, g) = self.instance_grads(paths, gold, &[])?;
        let mut dense = self.zeros_like();
        dense.accumulate(&g, 1.0);
        Ok((loss, dense))
    }

    pub fn loss(&self, paths: &[(EncodedPath, f64)], gold: usize) -> Result<f64> {
        let (o, _) = self.pooled_prediction(paths)?;
        Ok(cross_entropy(&o, gold)?.0)
    }

    fn accumulate(&mut self, g: &InstanceGrads, scale: f64) {
        neural::axpy(scale, g.lstm.weight.data(), self.lstm.weight.data_mut());
        neural::axpy(scale, g.lstm.bias.data(), self.lstm.bias.data_mut());
        neural::axpy(scale, g.proj.weight.data(), self.proj.weight.data_mut());
        neural::axpy(scale, g.proj.bias.data(), self.proj.bias.data_mut());
        for (slot, row, v) in &g.rows {
            neural::axpy(scale, v, self.table_mut(*slot).row_mut(*row));
        }
    }
}

/// Frequency-weighted mean of per-path label distributions and its argmax.
pub fn pool_distributions(dists: &[(Vec<f64>, f64)]) -> Result<(Vec<f64>, usize)> {
    if dists.is_empty() {
        return Err(PathEncError::EmptyPathSet);
    }
    if dists.iter().any(|(_, f)| !(*f > 0.0 && f.is_finite())) {
        return Err(PathEncError::BadFrequency);
    }
    let total: f64 = dists.iter().map(|(_, f)| f).sum();
    let mut o = vec![0.0; dists[0].0.len()];
    for (d, f) in dists {
        neural::axpy(f / total, d, &mut o);
    }
    let r = argmax(&o);
    Ok((o, r))
}

fn normalised_weights(paths: &[(EncodedPath, f64)]) -> Result<Vec<f64>> {
    if paths.is_empty() {
        return Err(PathEncError::EmptyPathSet);
    }
    if paths.iter().any(|(p, f)| !(*f > 0.0 && f.is_finite()) || p.is_empty()) {
        return Err(PathEncError::BadFrequency);
    }
    let total: f64 = paths.iter().map(|(_, f)| f).sum();
    Ok(paths.iter().map(|(_, f)| f / total).collect())
}

/// A compound's encoded paths with frequencies, plus its label index.
#[derive(Clone, Debug, PartialEq)]
pub struct PathExample {
    pub paths: Vec<(EncodedPath, f64)>,
    pub label: usize,
}

/// Encodes the stored paths of each instance. Instances without paths get
/// an empty path list.
pub fn build_examples(
    store: &PathStore,
    instances: &[NcInstance],
    inventory: &RelationInventory,
    vocabs: &EdgeVocabularies,
) -> Result<Vec<PathExample>> {
    instances
        .iter()
        .map(|nc| {
            let label = inventory
                .index_of(&nc.label)
                .ok_or_else(|| PathEncError::UnknownLabel(nc.label.clone()))?;
            let paths = store
                .paths(&nc.modifier, &nc.head)
                .into_iter()
                .map(|(p, c)| (vocabs.encode(p), c as f64))
                .collect();
            Ok(PathExample { paths, label })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub dims: EncoderDims,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stopping drop on validation F1.
    pub stop_drop: f64,
    /// Lemma dropout inside paths; off by default.
    pub lemma_dropout: f64,
    pub freeze_lemma: bool,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dims: EncoderDims::default(),
            adam: AdamConfig::default(),
            batch_size: 10,
            max_epochs: 30,
            stop_drop: 0.08,
            lemma_dropout: 0.0,
            freeze_lemma: false,
            seed: 1,
        }
    }
}

/// Weighted F1 of pooled argmax predictions; examples without paths are skipped.
pub fn pooled_f1(encoder: &PathEncoder, examples: &[PathExample], k: usize) -> Result<f64> {
    let scored: Vec<(usize, usize)> = examples
        .par_iter()
        .filter(|e| !e.paths.is_empty())
        .map(|e| encoder.pooled_prediction(&e.paths).map(|(_, r)| (r, e.label)))
        .collect::<Result<_>>()?;
    let (pred, gold): (Vec<usize>, Vec<usize>) = scored.into_iter().unzip();
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(evalx::evaluate_indices(&pred, &gold, k).weighted_f1)
}

fn mean_loss(encoder: &PathEncoder, examples: &[PathExample]) -> Result<f64> {
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|e| encoder.loss(&e.paths, e.label))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Mini-batch Adam on the pooled cross-entropy, with F1-based early
/// stopping on `validation` (or on `train` when no validation compound has
/// paths). Returns the parameters of the best epoch.
pub fn train_encoder(
    mut encoder: PathEncoder,
    train: &[PathExample],
    validation: &[PathExample],
    config: &EncoderConfig,
) -> Result<(PathEncoder, TrainHistory)> {
    let k = encoder.k();
    if let Some(bad) = train.iter().find(|e| e.label >= k) {
        return Err(PathEncError::BadLabel(bad.label));
    }
    let empty: Vec<String> = train
        .iter()
        .enumerate()
        .filter(|(_, e)| e.paths.is_empty())
        .map(|(i, _)| format!("#{i}"))
        .collect();
    if !empty.is_empty() {
        return Err(PathEncError::NoPaths(empty));
    }
    let monitor: &[PathExample] = if validation.iter().any(|e| !e.paths.is_empty()) {
        validation
    } else {
        train
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.adam);
    let mut history = TrainHistory {
        initial_loss: mean_loss(&encoder, train)?,
        ..Default::default()
    };
    let mut stopper = EarlyStopping::new(config.stop_drop);
    let mut best = encoder.clone();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = encoder.zeros_like();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size.max(1)).enumerate() {
            let batch_seed: u64 = rng.gen();
            let results: Vec<(f64, InstanceGrads)> = batch
                .par_iter()
                .enumerate()
                .map(|(slot, &i)| {
                    let drops = lemma_drops(&train[i], config.lemma_dropout, batch_seed, slot as u64);
                    encoder.instance_grads(&train[i].paths, train[i].label, &drops)
                })
                .collect::<Result<_>>()?;
            grads.scale(0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                grads.accumulate(g, scale);
            }
            if !batch_loss.is_finite() {
                return Err(PathEncError::NonFiniteLoss { epoch, batch: b });
            }
            if config.freeze_lemma {
                grads.lemma.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
            adam.step(&mut encoder, &grads)?;
            epoch_loss += batch_loss;
        }
        let val_f1 = pooled_f1(&encoder, monitor, k)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_f1,
        });
        match stopper.observe(epoch, val_f1) {
            Verdict::Improved => best = encoder.clone(),
            Verdict::Continue => {}
            Verdict::Stop => {
                history.stopped_early = true;
                break;
            }
        }
        log::info!(
            "path encoder epoch {epoch}: loss {:.4} val F1 {val_f1:.4}",
            epoch_loss / train.len() as f64
        );
    }
    let (best_epoch, best_f1) = stopper.best().unwrap_or((0, 0.0));
    history.best_epoch = best_epoch;
    history.best_f1 = best_f1;
    Ok((best, history))
}

/// Per-path lemma-drop masks; placeholders are never dropped.
fn lemma_drops(example: &PathExample, p: f64, batch_seed: u64, slot: u64) -> Vec<Vec<bool>> {
    if p <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(batch_seed ^ slot.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    example
        .paths
        .iter()
        .map(|(path, _)| path.iter().map(|n| n[0] > 2 && rng.gen::<f64>() < p).collect())
        .collect()
}

/// A trained encoder with the vocabularies and relation names it was
/// trained against.
#[derive(Clone, Debug)]
pub struct TrainedEncoder {
    pub encoder: PathEncoder,
    pub vocabs: EdgeVocabularies,
    pub relations: Vec<String>,
    pub history: TrainHistory,
}

/// Builds vocabularies over the whole store, initialises lemma rows from
/// `lemma_vectors`, and trains on the compounds of `train` (validation
/// compounds without paths are ignored).
pub fn train_path_encoder(
    store: &PathStore,
    train: &[NcInstance],
    validation: &[NcInstance],
    inventory: &RelationInventory,
    lemma_vectors: Option<&EmbeddingTable>,
    config: &EncoderConfig,
) -> Result<TrainedEncoder> {
    let missing: Vec<String> = train
        .iter()
        .filter(|nc| !store.contains(&nc.modifier, &nc.head))
        .map(NcInstance::nc_token)
        .collect();
    if !missing.is_empty() {
        return Err(PathEncError::NoPaths(missing));
    }
    let vocabs = EdgeVocabularies::from_paths(store.distinct_paths());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let encoder = PathEncoder::new(&vocabs, config.dims, inventory.k(), lemma_vectors, &mut rng)?;
    let train_ex = build_examples(store, train, inventory, &vocabs)?;
    let val_ex = build_examples(store, validation, inventory, &vocabs)?;
    let (encoder, history) = train_encoder(encoder, &train_ex, &val_ex, config)?;
    Ok(TrainedEncoder {
        encoder,
        vocabs,
        relations: inventory.names().to_vec(),
        history,
    })
}

impl TrainedEncoder {
    pub fn save(&self, dir: &Path, meta: &[(String, String)]) -> Result<()> {
        let d = self.encoder.dims();
        let mut all = vec![
            (
                "dims".to_string(),
                format!("{},{},{},{},{}", d.lemma, d.pos, d.dep, d.dir, d.path),
            ),
            ("k".to_string(), self.encoder.k().to_string()),
        ];
        all.extend_from_slice(meta);
        neural::save_checkpoint(dir, &self.encoder, &all)?;
        self.vocabs.save(dir)?;
        fs::write(dir.join("relations.txt"), self.relations.join("\n") + "\n")?;
        fs::write(dir.join("history.tsv"), self.history.to_tsv())?;
        Ok(())
    }

    /// Restores an encoder written by [`save`](Self::save). The history is
    /// not reloaded.
    pub fn load(dir: &Path) -> Result<Self> {
        let bad = |reason: &str| PathEncError::Format {
            file: dir.join("manifest.txt").display().to_string(),
            reason: reason.to_string(),
        };
        let ckpt = neural::load_checkpoint(dir)?;
        let dims: Vec<usize> = ckpt
            .meta("dims")
            .ok_or_else(|| bad("missing dims"))?
            .split(',')
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad dims"))?;
        let [lemma, pos, dep, dir_d, path] = dims[..] else {
            return Err(bad("dims needs 5 entries"));
        };
        let dims = EncoderDims {
            lemma,
            pos,
            dep,
            dir: dir_d,
            path,
        };
        let relations: Vec<String> = fs::read_to_string(dir.join("relations.txt"))?
            .lines()
            .map(str::to_string)
            .collect();
        let vocabs = EdgeVocabularies::load(dir)?;
        let mut encoder = PathEncoder::zeros(&vocabs, dims, relations.len());
        neural::restore(&mut encoder, &ckpt)?;
        Ok(TrainedEncoder {
            encoder,
            vocabs,
            relations,
            history: TrainHistory::default(),
        })
    }
}

/// Frozen path embeddings keyed by serialised path.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEmbeddingCache {
    pub dim: usize,
    /// Fingerprint of the encoder that produced the vectors.
    pub encoder: String,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl PathEmbeddingCache {
    pub fn get(&self, path: &str) -> Option<&[f64]> {
        self.vectors.get(path).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Header lines `# d_path=`, `# count=`, `# encoder=`, then
    /// `path<TAB>v1 v2 ...` in path order.
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# d_path={}", self.dim)?;
        writeln!(w, "# count={}", self.vectors.len())?;
        writeln!(w, "# encoder={}", self.encoder)?;
        let mut line = String::new();
        for (p, v) in &self.vectors {
            line.clear();
            line.push_str(p);
            line.push('\t');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                write!(line, "{x}").unwrap();
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let bad = |n: usize, reason: String| PathEncError::Format {
            file: "path embedding cache".into(),
            reason: format!("line {n}: {reason}"),
        };
        let mut cache = PathEmbeddingCache {
            dim: 0,
            encoder: String::new(),
            vectors: BTreeMap::new(),
        };
        let mut count = None;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if let Some(h) = line.strip_prefix("# ") {
                match h.split_once('=') {
                    Some(("d_path", v)) => cache.dim = v.parse().map_err(|_| bad(n + 1, "bad d_path".into()))?,
                    Some(("count", v)) => count = Some(v.parse::<usize>().map_err(|_| bad(n + 1, "bad count".into()))?),
                    Some(("encoder", v)) => cache.encoder = v.to_string(),
                    _ => {}
                }
                continue;
            }
            let (p, vals) = line.split_once('\t').ok_or_else(|| bad(n + 1, "missing tab".into()))?;
            let v: Vec<f64> = vals
                .split(' ')
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(n + 1, format!("{e}")))?;
            if v.len() != cache.dim {
                return Err(bad(
                    n + 1,
                    format!("expected {} components, found {}", cache.dim, v.len()),
                ));
            }
            cache.vectors.insert(p.to_string(), v);
        }
        if count.is_some_and(|c| c != cache.vectors.len()) {
            return Err(bad(0, "count header does not match".into()));
        }
        Ok(cache)
    }
}

/// Embeds every distinct path of `store` once.
pub fn export_path_embeddings(
    encoder: &PathEncoder,
    vocabs: &EdgeVocabularies,
    store: &PathStore,
) -> Result<PathEmbeddingCache> {
    let paths = store.distinct_paths();
    let vectors: Vec<(String, Vec<f64>)> = paths
        .par_iter()
        .map(|p| encoder.embed_path(p, vocabs).map(|v| (p.to_string(), v)))
        .collect::<Result<_>>()?;
    Ok(PathEmbeddingCache {
        dim: encoder.dims().path,
        encoder: encoder.fingerprint(),
        vectors: vectors.into_iter().collect(),
    })
}
