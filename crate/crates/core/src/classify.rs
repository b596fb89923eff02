//! The five classifier variants, their shared training loop, and the
//! per-constituent frequency baselines.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::PathStore;
use crate::dataset::{NcInstance, RelationInventory, Slot};
use crate::embed::{EmbedError, EmbeddingTable};
use crate::evalx;
use crate::neural::{
    self, argmax, cross_entropy, word_dropout, Activation, Adam, AdamConfig, Dense, Mode, NeuralError, ParamSet, Tensor,
};
use crate::pathenc::PathEmbeddingCache;
use crate::training::{EarlyStopping, EpochRecord, TrainHistory, Verdict};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("variant {variant} needs {what}")]
    MissingSource { variant: Variant, what: &'static str },
    #[error("path {0:?} is not in the embedding cache")]
    CacheMiss(String),
    #[error("input has {found} components, classifier expects {expected}")]
    InputDim { expected: usize, found: usize },
    #[error("classifier input must have at least 2 components")]
    TooSmall,
    #[error("label {0:?} is not in the relation inventory")]
    UnknownLabel(String),
    #[error("empty training set")]
    EmptyTrain,
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("unknown variant {0:?}")]
    BadVariant(String),
    #[error("malformed classifier checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, ClassifyError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Path,
    Dist,
    DistNc,
    Integrated,
    IntegratedNc,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Path,
        Variant::Dist,
        Variant::DistNc,
        Variant::Integrated,
        Variant::IntegratedNc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Path => "path",
            Variant::Dist => "dist",
            Variant::DistNc => "dist_nc",
            Variant::Integrated => "integrated",
            Variant::IntegratedNc => "integrated_nc",
        }
    }

    pub fn uses_words(self) -> bool {
        self != Variant::Path
    }

    pub fn uses_nc(self) -> bool {
        matches!(self, Variant::DistNc | Variant::IntegratedNc)
    }

    pub fn uses_paths(self) -> bool {
        matches!(self, Variant::Path | Variant::Integrated | Variant::IntegratedNc)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| ClassifyError::BadVariant(s.to_string()))
    }
}

/// Input layout: `[v_w1, v_w2, v_nc, v_P]`, keeping only the components the
/// variant uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputSpec {
    pub variant: Variant,
    pub d_w: usize,
    pub d_nc: usize,
    pub d_path: usize,
}

impl InputSpec {
    pub fn new(variant: Variant, d_w: usize, d_nc: usize, d_path: usize) -> Self {
        InputSpec {
            variant,
            d_w,
            d_nc,
            d_path,
        }
    }

    fn widths(&self) -> [usize; 4] {
        let v = self.variant;
        [
            if v.uses_words() { self.d_w } else { 0 },
            if v.uses_words() { self.d_w } else { 0 },
            if v.uses_nc() { self.d_nc } else { 0 },
            if v.uses_paths() { self.d_path } else { 0 },
        ]
    }

    fn ranges(&self) -> [Range<usize>; 4] {
        let w = self.widths();
        let mut start = 0;
        w.map(|n| {
            let r = start..start + n;
            start += n;
            r
        })
    }

    pub fn len(&self) -> usize {
        self.widths().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hidden_dim(&self) -> usize {
        self.len() / 2
    }

    /// Distributional slots subject to word dropout.
    pub fn dropout_slots(&self) -> Vec<Range<usize>> {
        self.ranges()[..3].iter().filter(|r| !r.is_empty()).cloned().collect()
    }

    pub fn path_range(&self) -> Range<usize> {
        self.ranges()[3].clone()
    }
}

/// Lookup tables a variant may draw from.
#[derive(Clone, Copy, Debug, Default)]
pub struct FeatureSources<'a> {
    pub words: Option<&'a EmbeddingTable>,
    pub ncs: Option<&'a EmbeddingTable>,
    pub cache: Option<&'a PathEmbeddingCache>,
    pub store: Option<&'a PathStore>,
}

impl<'a> FeatureSources<'a> {
    /// Layout implied by these tables for `variant`.
    pub fn spec(&self, variant: Variant) -> Result<InputSpec> {
        let need = |present: bool, what| {
            if present {
                Ok(())
            } else {
                Err(ClassifyError::MissingSource { variant, what })
            }
        };
        if variant.uses_words() {
            need(self.words.is_some(), "word vectors")?;
        }
        if variant.uses_nc() {
            need(self.ncs.is_some(), "compound vectors")?;
        }
        if variant.uses_paths() {
            need(
                self.cache.is_some() && self.store.is_some(),
                "a path store and path embeddings",
            )?;
        }
        let spec = InputSpec::new(
            variant,
            self.words.map_or(0, EmbeddingTable::dim),
            self.ncs.map_or(0, EmbeddingTable::dim),
            self.cache.map_or(0, |c| c.dim),
        );
        if spec.len() < 2 {
            return Err(ClassifyError::TooSmall);
        }
        Ok(spec)
    }
}

/// Frequency-weighted mean of the cached path embeddings; zero when the
/// compound has no paths.
pub fn path_average(nc: &NcInstance, store: &PathStore, cache: &PathEmbeddingCache) -> Result<Vec<f64>> {
    let mut v = vec![0.0; cache.dim];
    let mut total = 0.0;
    for (p, count) in store.paths(&nc.modifier, &nc.head) {
        let key = p.to_string();
        let e = cache.get(&key).ok_or(ClassifyError::CacheMiss(key))?;
        neural::axpy(count as f64, e, &mut v);
        total += count as f64;
    }
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    Ok(v)
}

pub fn build_input(spec: &InputSpec, nc: &NcInstance, sources: &FeatureSources) -> Result<Vec<f64>> {
    let missing = |what| ClassifyError::MissingSource {
        variant: spec.variant,
        what,
    };
    let mut x = Vec::with_capacity(spec.len());
    if spec.variant.uses_words() {
        let words = sources.words.ok_or_else(|| missing("word vectors"))?;
        x.extend_from_slice(&words.lookup(&nc.modifier)?);
        x.extend_from_slice(&words.lookup(&nc.head)?);
    }
    if spec.variant.uses_nc() {
        let ncs = sources.ncs.ok_or_else(|| missing("compound vectors"))?;
        x.extend_from_slice(&ncs.lookup(&nc.nc_token())?);
    }
    if spec.variant.uses_paths() {
        let (Some(store), Some(cache)) = (sources.store, sources.cache) else {
            return Err(missing("a path store and path embeddings"));
        };
        x.extend(path_average(nc, store, cache)?);
    }
    if x.len() != spec.len() {
        return Err(ClassifyError::InputDim {
            expected: spec.len(),
            found: x.len(),
        });
    }
    Ok(x)
}

pub fn build_inputs(spec: &InputSpec, instances: &[NcInstance], sources: &FeatureSources) -> Result<Vec<Vec<f64>>> {
    instances.par_iter().map(|nc| build_input(spec, nc, sources)).collect()
}

/// `|x| → ⌊|x|/2⌋` tanh layer followed by a softmax layer over `k` relations.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub hidden: Dense,
    pub out: Dense,
}

impl ParamSet for ClassifierParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("hidden.weight", &self.hidden.weight),
            ("hidden.bias", &self.hidden.bias),
            ("out.weight", &self.out.weight),
            ("out.bias", &self.out.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("hidden.weight", &mut self.hidden.weight),
            ("hidden.bias", &mut self.hidden.bias),
            ("out.weight", &mut self.out.weight),
            ("out.bias", &mut self.out.bias),
        ]
    }
}

impl ClassifierParams {
    pub fn new<R: Rng + ?Sized>(input: usize, k: usize, rng: &mut R) -> Result<Self> {
        if input < 2 {
            return Err(ClassifyError::TooSmall);
        }
        let h = input / 2;
        Ok(ClassifierParams {
            hidden: Dense::new(input, h, Activation::Tanh, rng),
            out: Dense::new(h, k, Activation::Softmax, rng),
        })
    }

    pub fn zeros(input: usize, k: usize) -> Self {
        let h = input / 2;
        ClassifierParams {
            hidden: Dense::zeros(input, h, Activation::Tanh),
            out: Dense::zeros(h, k, Activation::Softmax),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim()
    }

    pub fn k(&self) -> usize {
        self.out.output_dim()
    }

    pub fn loss(&self, x: &[f64], gold: usize) -> Result<f64> {
        let (o, _) = classify(self, x)?;
        Ok(cross_entropy(&o, gold)?.0)
    }

    /// Cross-entropy of one input and its gradient, accumulated into `grads`.
    pub fn accumulate_gradient(&self, x: &[f64], gold: usize, grads: &mut ClassifierParams) -> Result<f64> {
        check_dim(self, x)?;
        let h = self.hidden.forward(x)?;
        let o = self.out.forward(&h)?;
        let (loss, d_o) = cross_entropy(&o, gold)?;
        let dh = self.out.backward(&h, &o, &d_o, &mut grads.out);
        self.hidden.backward(x, &h, &dh, &mut grads.hidden);
        Ok(loss)
    }

    pub fn loss_and_gradient(&self, x: &[f64], gold: usize) -> Result<(f64, ClassifierParams)> {
        let mut g = self.zeros_like();
        let loss = self.accumulate_gradient(x, gold, &mut g)?;
        Ok((loss, g))
    }
}

fn check_dim(params: &ClassifierParams, x: &[f64]) -> Result<()> {
    if x.len() != params.input_dim() {
        return Err(ClassifyError::InputDim {
            expected: params.input_dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Output distribution and its argmax (lowest index on ties).
pub fn classify(params: &ClassifierParams, x: &[f64]) -> Result<(Vec<f64>, usize)> {
    check_dim(params, x)?;
    let o = params.out.forward(&params.hidden.forward(x)?)?;
    let r = argmax(&o);
    Ok((o, r))
}

pub fn predict_all(params: &ClassifierParams, inputs: &[Vec<f64>]) -> Result<Vec<usize>> {
    inputs.par_iter().map(|x| classify(params, x).map(|(_, r)| r)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub stop_drop: f64,
    pub word_dropout: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            adam: AdamConfig::default(),
            batch_size: 10,
            max_epochs: 30,
            stop_drop: 0.08,
            word_dropout: 0.1,
            seed: 1,
        }
    }
}

/// Built inputs with label indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Examples {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn build(
        spec: &InputSpec,
        instances: &[NcInstance],
        sources: &FeatureSources,
        inventory: &RelationInventory,
    ) -> Result<Self> {
        let labels = instances
            .iter()
            .map(|nc| {
                inventory
                    .index_of(&nc.label)
                    .ok_or_else(|| ClassifyError::UnknownLabel(nc.label.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(Examples {
            inputs: build_inputs(spec, instances, sources)?,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn weighted_f1(params: &ClassifierParams, data: &Examples) -> Result<f64> {
    let preds = predict_all(params, &data.inputs)?;
    Ok(evalx::evaluate_indices(&preds, &data.labels, params.k()).weighted_f1)
}

/// Mini-batch Adam with word dropout on the distributional slots and
/// early stopping on validation weighted F1 (training F1 when `validation`
/// is empty). Returns the best epoch's parameters.
pub fn train_classifier(
    spec: &InputSpec,
    k: usize,
    train: &Examples,
    validation: &Examples,
    config: &ClassifierConfig,
) -> Result<(ClassifierParams, TrainHistory)> {
    if train.is_empty() {
        return Err(ClassifyError::EmptyTrain);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ClassifierParams::new(spec.len(), k, &mut rng)?;
    if let Some(x) = train
        .inputs
        .iter()
        .chain(&validation.inputs)
        .find(|x| x.len() != spec.len())
    {
        return Err(ClassifyError::InputDim {
            expected: spec.len(),
            found: x.len(),
        });
    }
    let monitor = if validation.is_empty() { train } else { validation };
    let slots = spec.dropout_slots();
    let mut adam = Adam::new(config.adam);
    let mut stopper = EarlyStopping::new(config.stop_drop);
    let initial: Vec<f64> = (0..train.len())
        .into_par_iter()
        .map(|i| params.loss(&train.inputs[i], train.labels[i]))
        .collect::<Result<_>>()?;
    let mut history = TrainHistory {
        initial_loss: initial.iter().sum::<f64>() / train.len() as f64,
        ..Default::default()
    };
    let mut best = params.clone();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = params.zeros_like();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size.max(1)).enumerate() {
            let batch_seed: u64 = rng.gen();
            let results: Vec<(f64, ClassifierParams)> = batch
                .par_iter()
                .enumerate()
                .map(|(slot, &i)| {
                    let mut x = train.inputs[i].clone();
                    let mut drng =
                        ChaCha8Rng::seed_from_u64(batch_seed ^ (slot as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                    word_dropout(&mut x, &slots, config.word_dropout, &mut drng, Mode::Train);
                    params.loss_and_gradient(&x, train.labels[i])
                })
                .collect::<Result<_>>()?;
            grads.scale(0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                for ((_, dst), (_, src)) in grads.tensors_mut().into_iter().zip(g.tensors()) {
                    neural::axpy(scale, src.data(), dst.data_mut());
                }
            }
            if !batch_loss.is_finite() {
                return Err(ClassifyError::NonFiniteLoss { epoch, batch: b });
            }
            adam.step(&mut params, &grads)?;
            epoch_loss += batch_loss;
        }
        let val_f1 = weighted_f1(&params, monitor)?;
        let train_loss = epoch_loss / train.len() as f64;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_f1,
        });
        log::info!("classifier epoch {epoch}: loss {train_loss:.4} val F1 {val_f1:.4}");
        match stopper.observe(epoch, val_f1) {
            Verdict::Improved => best = params.clone(),
            Verdict::Continue => {}
            Verdict::Stop => {
                history.stopped_early = true;
                break;
            }
        }
    }
    let (best_epoch, best_f1) = stopper.best().unwrap_or((0, 0.0));
    history.best_epoch = best_epoch;
    history.best_f1 = best_f1;
    Ok((best, history))
}

/// Parameters plus the layout and relation names needed to reuse them.
#[derive(Clone, Debug)]
pub struct TrainedClassifier {
    pub params: ClassifierParams,
    pub spec: InputSpec,
    pub relations: Vec<String>,
}

impl TrainedClassifier {
    pub fn save(&self, dir: &Path, meta: &[(String, String)]) -> Result<()> {
        let s = &self.spec;
        let mut all = vec![
            ("variant".to_string(), s.variant.to_string()),
            ("d_w".to_string(), s.d_w.to_string()),
            ("d_nc".to_string(), s.d_nc.to_string()),
            ("d_path".to_string(), s.d_path.to_string()),
            ("k".to_string(), self.relations.len().to_string()),
        ];
        all.extend_from_slice(meta);
        neural::save_checkpoint(dir, &self.params, &all)?;
        fs::write(dir.join("relations.txt"), self.relations.join("\n") + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let ckpt = neural::load_checkpoint(dir)?;
        let get = |key: &str| -> Result<usize> {
            ckpt.meta(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ClassifyError::Format(format!("missing or bad {key}")))
        };
        let variant: Variant = ckpt
            .meta("variant")
            .ok_or_else(|| ClassifyError::Format("missing variant".into()))?
            .parse()?;
        let spec = InputSpec::new(variant, get("d_w")?, get("d_nc")?, get("d_path")?);
        let relations: Vec<String> = fs::read_to_string(dir.join("relations.txt"))?
            .lines()
            .map(str::to_string)
            .collect();
        let mut params = ClassifierParams::zeros(spec.len(), relations.len());
        neural::restore(&mut params, &ckpt)?;
        Ok(TrainedClassifier {
            params,
            spec,
            relations,
        })
    }
}

/// `w1<TAB>w2<TAB>gold<TAB>predicted` lines.
pub fn predictions_tsv(instances: &[NcInstance], predictions: &[usize], relations: &[String]) -> String {
    let mut s = String::new();
    for (nc, &p) in instances.iter().zip(predictions) {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            nc.modifier, nc.head, nc.label, relations[p]
        ));
    }
    s
}

/// Majority relation per head (or modifier) word; unseen words get a
/// relation drawn from a seeded stream.
#[derive(Clone, Debug)]
pub struct FreqBaseline {
    pub slot: Slot,
    majority: HashMap<String, usize>,
    k: usize,
    seed: u64,
    rng: ChaCha8Rng,
}

/// Fits the baseline; ties go to the lexicographically smallest relation.
pub fn freq_fit(train: &[NcInstance], slot: Slot, inventory: &RelationInventory, seed: u64) -> Result<FreqBaseline> {
    if train.is_empty() {
        return Err(ClassifyError::EmptyTrain);
    }
    let k = inventory.k();
    let mut counts: HashMap<&str, Vec<usize>> = HashMap::new();
    for nc in train {
        let label = inventory
            .index_of(&nc.label)
            .ok_or_else(|| ClassifyError::UnknownLabel(nc.label.clone()))?;
        counts.entry(nc.slot(slot)).or_insert_with(|| vec![0; k])[label] += 1;
    }
    // inventory order is lexicographic, so the first maximum wins ties
    let majority = counts
        .into_iter()
        .map(|(w, c)| {
            let best = (0..k).fold(0, |b, i| if c[i] > c[b] { i } else { b });
            (w.to_string(), best)
        })
        .collect();
    Ok(FreqBaseline {
        slot,
        majority,
        k,
        seed,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl FreqBaseline {
    pub fn predict(&mut self, modifier: &str, head: &str) -> usize {
        let word = match self.slot {
            Slot::Head => head,
            Slot::Modifier => modifier,
        };
        match self.majority.get(word) {
            Some(&r) => r,
            None => self.rng.gen_range(0..self.k),
        }
    }

    pub fn seen(&self, word: &str) -> bool {
        self.majority.contains_key(word)
    }

    /// Restarts the stream used for unseen words.
    pub fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }
}
