//! Flat `key = value` run configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ncrel::classify::{ClassifierConfig, Variant};
use ncrel::corpus::{ExtractOptions, StoreOptions};
use ncrel::dataset::{LabelLevel, Ratios, SplitKind};
use ncrel::embed::OovPolicy;
use ncrel::neural::AdamConfig;
use ncrel::pathenc::{EncoderConfig, EncoderDims};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: String,
    pub label_level: LabelLevel,
    pub corpus: String,
    pub text: String,
    pub word_vectors: String,
    pub lemma_vectors: String,
    pub nc_vectors: String,
    pub max_vocab: usize,
    pub oov: String,
    pub split: SplitKind,
    /// Lexical split proportions; the random split is fixed at 75/5/20.
    pub ratios: Ratios,
    pub split_seed: u64,
    pub variant: Variant,
    pub d_lemma: usize,
    pub d_pos: usize,
    pub d_dep: usize,
    pub d_dir: usize,
    pub d_path: usize,
    pub path_cap: usize,
    pub max_edges: usize,
    pub max_sentence: usize,
    pub satellites: bool,
    pub batch: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub path_lemma_dropout: f64,
    pub freeze_lemma: bool,
    pub stop_drop: f64,
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub indicative_threshold: f64,
    pub neighbors: usize,
    pub grad_tolerance: f64,
    pub seed: u64,
    pub out_dir: String,
    pub threads: usize,
    /// Directory relative paths are resolved against; not part of the file form.
    pub base: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: String::new(),
            label_level: LabelLevel::Fine,
            corpus: String::new(),
            text: String::new(),
            word_vectors: String::new(),
            lemma_vectors: String::new(),
            nc_vectors: String::new(),
            max_vocab: 400_000,
            oov: "random".into(),
            split: SplitKind::Random,
            ratios: Ratios::default(),
            split_seed: 1,
            variant: Variant::Integrated,
            d_lemma: 50,
            d_pos: 4,
            d_dep: 5,
            d_dir: 1,
            d_path: 60,
            path_cap: 1000,
            max_edges: 8,
            max_sentence: 32,
            satellites: true,
            batch: 10,
            epochs: 30,
            dropout: 0.1,
            path_lemma_dropout: 0.0,
            freeze_lemma: false,
            stop_drop: 0.08,
            adam_lr: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            indicative_threshold: 0.8,
            neighbors: 10,
            grad_tolerance: 1e-4,
            seed: 1,
            out_dir: "out".into(),
            threads: 0,
            base: PathBuf::from("."),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| anyhow!("bad value {value:?} for {key}: {e}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "dataset" => self.dataset = v.into(),
            "label_level" => self.label_level = parse(key, v)?,
            "corpus" => self.corpus = v.into(),
            "text" => self.text = v.into(),
            "word_vectors" => self.word_vectors = v.into(),
            "lemma_vectors" => self.lemma_vectors = v.into(),
            "nc_vectors" => self.nc_vectors = v.into(),
            "max_vocab" => self.max_vocab = parse(key, v)?,
            "oov" => {
                parse::<OovPolicy>(key, v)?;
                self.oov = v.into()
            }
            "split" => self.split = parse(key, v)?,
            "ratios" => self.ratios = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "variant" => self.variant = parse(key, v)?,
            "d_lemma" => self.d_lemma = parse(key, v)?,
            "d_pos" => self.d_pos = parse(key, v)?,
            "d_dep" => self.d_dep = parse(key, v)?,
            "d_dir" => self.d_dir = parse(key, v)?,
            "d_path" => self.d_path = parse(key, v)?,
            "path_cap" => self.path_cap = parse(key, v)?,
            "max_edges" => self.max_edges = parse(key, v)?,
            "max_sentence" => self.max_sentence = parse(key, v)?,
            "satellites" => self.satellites = parse(key, v)?,
            "batch" => self.batch = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "dropout" => self.dropout = parse(key, v)?,
            "path_lemma_dropout" => self.path_lemma_dropout = parse(key, v)?,
            "freeze_lemma" => self.freeze_lemma = parse(key, v)?,
            "stop_drop" => self.stop_drop = parse(key, v)?,
            "adam_lr" => self.adam_lr = parse(key, v)?,
            "adam_beta1" => self.adam_beta1 = parse(key, v)?,
            "adam_beta2" => self.adam_beta2 = parse(key, v)?,
            "adam_eps" => self.adam_eps = parse(key, v)?,
            "indicative_threshold" => self.indicative_threshold = parse(key, v)?,
            "neighbors" => self.neighbors = parse(key, v)?,
            "grad_tolerance" => self.grad_tolerance = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "out_dir" => self.out_dir = v.into(),
            "threads" => self.threads = parse(key, v)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Parses the file form; unknown keys and malformed lines are errors.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            c.set(k.trim(), v.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut c = Self::parse_str(&text)?;
        c.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| anyhow!("override {o:?} is not key=value"))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_lemma", self.d_lemma),
            ("d_pos", self.d_pos),
            ("d_dep", self.d_dep),
            ("d_dir", self.d_dir),
            ("d_path", self.d_path),
            ("batch", self.batch),
            ("epochs", self.epochs),
            ("path_cap", self.path_cap),
            ("max_edges", self.max_edges),
            ("max_sentence", self.max_sentence),
            ("neighbors", self.neighbors),
        ];
        for (k, v) in positive {
            if v == 0 {
                bail!("{k} must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.path_lemma_dropout) {
            bail!("dropout rates must lie in [0, 1)");
        }
        if !(self.adam_lr > 0.0 && self.adam_eps > 0.0) {
            bail!("adam_lr and adam_eps must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            bail!("Adam betas must lie in [0, 1)");
        }
        if self.stop_drop < 0.0 || self.grad_tolerance <= 0.0 {
            bail!("stop_drop must be non-negative and grad_tolerance positive");
        }
        Ok(())
    }

    /// Resolves a configured path against the config file's directory.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn require(&self, key: &str, value: &str) -> Result<PathBuf> {
        if value.is_empty() {
            bail!("config key {key} is not set");
        }
        Ok(self.resolve(value))
    }

    /// Digest of every setting that can change an artifact's contents.
    pub fn hash(&self) -> String {
        let text = self.to_string();
        let kept: String = text
            .lines()
            .filter(|l| !l.starts_with("out_dir ") && !l.starts_with("threads "))
            .map(|l| format!("{l}\n"))
            .collect();
        hex::encode(Sha256::digest(kept.as_bytes()))
    }

    pub fn oov_policy(&self) -> OovPolicy {
        match self.oov.parse().expect("validated on set") {
            OovPolicy::RandomInit { scale, .. } => OovPolicy::RandomInit { seed: self.seed, scale },
            other => other,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.adam_lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_eps,
        }
    }

    pub fn store_options(&self) -> StoreOptions {
        StoreOptions {
            extract: ExtractOptions {
                max_edges: self.max_edges,
                satellites: self.satellites,
            },
            cap: self.path_cap,
        }
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            dims: EncoderDims {
                lemma: self.d_lemma,
                pos: self.d_pos,
                dep: self.d_dep,
                dir: self.d_dir,
                path: self.d_path,
            },
            adam: self.adam(),
            batch_size: self.batch,
            max_epochs: self.epochs,
            stop_drop: self.stop_drop,
            lemma_dropout: self.path_lemma_dropout,
            freeze_lemma: self.freeze_lemma,
            seed: self.seed,
        }
    }

    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            adam: self.adam(),
            batch_size: self.batch,
            max_epochs: self.epochs,
            stop_drop: self.stop_drop,
            word_dropout: self.dropout,
            seed: self.seed,
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self;
        let entries = [
            ("dataset", c.dataset.clone()),
            ("label_level", c.label_level.to_string()),
            ("corpus", c.corpus.clone()),
            ("text", c.text.clone()),
            ("word_vectors", c.word_vectors.clone()),
            ("lemma_vectors", c.lemma_vectors.clone()),
            ("nc_vectors", c.nc_vectors.clone()),
            ("max_vocab", c.max_vocab.to_string()),
            ("oov", c.oov.clone()),
            ("split", c.split.to_string()),
            ("ratios", c.ratios.to_string()),
            ("split_seed", c.split_seed.to_string()),
            ("variant", c.variant.to_string()),
            ("d_lemma", c.d_lemma.to_string()),
            ("d_pos", c.d_pos.to_string()),
            ("d_dep", c.d_dep.to_string()),
            ("d_dir", c.d_dir.to_string()),
            ("d_path", c.d_path.to_string()),
            ("path_cap", c.path_cap.to_string()),
            ("max_edges", c.max_edges.to_string()),
            ("max_sentence", c.max_sentence.to_string()),
            ("satellites", c.satellites.to_string()),
            ("batch", c.batch.to_string()),
            ("epochs", c.epochs.to_string()),
            ("dropout", c.dropout.to_string()),
            ("path_lemma_dropout", c.path_lemma_dropout.to_string()),
            ("freeze_lemma", c.freeze_lemma.to_string()),
            ("stop_drop", c.stop_drop.to_string()),
            ("adam_lr", c.adam_lr.to_string()),
            ("adam_beta1", c.adam_beta1.to_string()),
            ("adam_beta2", c.adam_beta2.to_string()),
            ("adam_eps", c.adam_eps.to_string()),
            ("indicative_threshold", c.indicative_threshold.to_string()),
            ("neighbors", c.neighbors.to_string()),
            ("grad_tolerance", c.grad_tolerance.to_string()),
            ("seed", c.seed.to_string()),
            ("out_dir", c.out_dir.clone()),
            ("threads", c.threads.to_string()),
        ];
        for (k, v) in entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse_str(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn edited_config_round_trips() {
        let mut c = RunConfig::default();
        c.apply_overrides(&[
            "split=lexical_full".into(),
            "ratios=0.5,0.25,0.25".into(),
            "variant=dist_nc".into(),
            "adam_eps=1e-7".into(),
            "dropout=0.3".into(),
            "dataset=data/x y.tsv".into(),
        ])
        .unwrap();
        let back = RunConfig::parse_str(&c.to_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(c.hash(), RunConfig::default().hash());
    }

    #[test]
    fn hash_ignores_output_location_and_threads() {
        let mut c = RunConfig::default();
        let h = c.hash();
        c.apply_overrides(&["out_dir=/elsewhere".into(), "threads=3".into()])
            .unwrap();
        assert_eq!(c.hash(), h);
        c.apply_overrides(&["seed=2".into()]).unwrap();
        assert_ne!(c.hash(), h);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse_str("nonsense = 1").is_err());
        assert!(RunConfig::parse_str("batch").is_err());
        assert!(RunConfig::parse_str("batch = 0").is_err());
        assert!(RunConfig::parse_str("variant = lstm").is_err());
        assert!(RunConfig::parse_str("oov = maybe").is_err());
        assert!(RunConfig::parse_str("# comment\n\nseed = 4\n").unwrap().seed == 4);
    }
}
