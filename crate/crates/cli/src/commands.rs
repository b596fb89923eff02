use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use ncrel::classify::{
    self, freq_fit, predictions_tsv, Examples, FeatureSources, InputSpec, TrainedClassifier, Variant,
};
use ncrel::corpus::{ConlluReader, NcRewriter, PathCollector, PathStore};
use ncrel::dataset::{load_dataset, make_split, Dataset, NcInstance, Slot, Split};
use ncrel::embed::{load_vectors, EmbeddingTable, OovPolicy};
use ncrel::evalx::{self, evaluate, indicative_paths, indicative_paths_tsv, nc_neighbor_agreement, ResultsTable};
use ncrel::manifest::Manifest;
use ncrel::neural::{grad_check, Activation, Dense, GradCheckConfig, GradCheckReport, Lstm, ParamSet, Tensor};
use ncrel::pathenc::{
    export_path_embeddings, train_path_encoder, EdgeVocabularies, EncodedPath, EncoderDims, PathEmbeddingCache,
    PathEncoder, TrainedEncoder,
};
use ncrel::synthetic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;

/// A failed command, classified by exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Check(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "configuration error: {e:#}"),
            Failure::Data(e) => write!(f, "data error: {e:#}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

trait OrData<T> {
    fn data(self) -> Outcome<T>;
    fn data_ctx(self, what: impl FnOnce() -> String) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> OrData<T> for Result<T, E> {
    fn data(self) -> Outcome<T> {
        self.map_err(|e| Failure::Data(e.into()))
    }

    fn data_ctx(self, what: impl FnOnce() -> String) -> Outcome<T> {
        self.map_err(|e| Failure::Data(e.into().context(what())))
    }
}

fn usage<T>(r: anyhow::Result<T>) -> Outcome<T> {
    r.map_err(Failure::Usage)
}

/// Artifact locations under `out_dir`.
pub mod layout {
    pub const SPLIT: &str = "split";
    pub const PATHS: &str = "paths";
    pub const PATH_STORE: &str = "paths/paths.tsv";
    pub const REWRITE: &str = "rewrite";
    pub const ENCODER: &str = "encoder";
    pub const EMBEDDINGS: &str = "path_embeddings";
    pub const EMBEDDINGS_FILE: &str = "path_embeddings/embeddings.tsv";
    pub const BASELINE: &str = "baseline_freq";
    pub const ANALYSIS: &str = "analysis";

    pub fn model(variant: &str) -> String {
        format!("model_{variant}")
    }

    pub fn eval(variant: &str) -> String {
        format!("eval_{variant}")
    }
}

pub struct Ctx {
    pub cfg: RunConfig,
    hash: String,
    out: PathBuf,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Self {
        let hash = cfg.hash();
        let out = cfg.out();
        Ctx { cfg, hash, out }
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new()
            .with("command", command)
            .with("config_hash", &self.hash)
            .with("seed", self.cfg.seed)
            .with("split", self.cfg.split)
            .with("split_seed", self.cfg.split_seed)
    }

    fn meta(&self, command: &str) -> Vec<(String, String)> {
        self.manifest(command).entries().to_vec()
    }

    fn dir(&self, rel: &str) -> Outcome<PathBuf> {
        let d = self.out.join(rel);
        fs::create_dir_all(&d).data_ctx(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Writes through a temporary sibling so a failure never leaves a
    /// truncated artifact behind.
    fn write(&self, path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
        let tmp = partial(path);
        fs::write(&tmp, contents)
            .and_then(|_| fs::rename(&tmp, path))
            .data_ctx(|| format!("writing {}", path.display()))
    }

    /// Records the effective configuration next to the artifacts.
    fn record_config(&self) -> Outcome {
        self.dir("")?;
        self.write(&self.out.join("run.conf"), self.cfg.to_string())
    }

    fn dataset(&self) -> Outcome<Dataset> {
        let path = usage(self.cfg.require("dataset", &self.cfg.dataset))?;
        let ds = load_dataset(&path, self.cfg.label_level).data_ctx(|| format!("loading {}", path.display()))?;
        let expected = self.cfg.label_level.tratz_k();
        if ds.inventory.k() != expected {
            log::debug!(
                "dataset has {} relations ({} level of the reference inventory has {expected})",
                ds.inventory.k(),
                self.cfg.label_level
            );
        }
        Ok(ds)
    }

    fn split(&self, ds: &Dataset) -> Outcome<Split> {
        make_split(&ds.instances, self.cfg.split, self.cfg.ratios, self.cfg.split_seed).data()
    }

    fn dataset_name(&self) -> String {
        Path::new(&self.cfg.dataset)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }

    fn store(&self) -> Outcome<PathStore> {
        let p = self.path(layout::PATH_STORE);
        let f = fs::File::open(&p).data_ctx(|| format!("opening {} (run extract-paths first)", p.display()))?;
        PathStore::read_tsv(BufReader::new(f)).data_ctx(|| format!("reading {}", p.display()))
    }

    fn vectors(&self, key: &str, value: &str, oov: OovPolicy) -> Outcome<EmbeddingTable> {
        let p = usage(self.cfg.require(key, value))?;
        load_vectors(&p, self.cfg.max_vocab, oov).data_ctx(|| format!("loading {}", p.display()))
    }

    fn cache(&self) -> Outcome<PathEmbeddingCache> {
        let p = self.path(layout::EMBEDDINGS_FILE);
        let f = fs::File::open(&p).data_ctx(|| format!("opening {} (run export-paths first)", p.display()))?;
        PathEmbeddingCache::read(BufReader::new(f)).data_ctx(|| format!("reading {}", p.display()))
    }
}

fn partial(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

fn subset(instances: &[NcInstance], idx: &[usize]) -> Vec<NcInstance> {
    idx.iter().map(|&i| instances[i].clone()).collect()
}

pub fn split(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let ds = ctx.dataset()?;
    let s = ctx.split(&ds)?;
    let dir = ctx.dir(layout::SPLIT)?;
    s.write(&dir, &ds.instances, &ctx.manifest("split")).data()?;
    let (a, b, c) = s.sizes();
    println!(
        "{} split: train {a}, validation {b}, test {c}, discarded {}",
        s.kind,
        s.discarded.len()
    );
    Ok(())
}

pub fn extract_paths(ctx: &Ctx) -> Outcome {
    const CHUNK: usize = 4096;
    ctx.record_config()?;
    let ds = ctx.dataset()?;
    let corpus = usage(ctx.cfg.require("corpus", &ctx.cfg.corpus))?;
    let file = fs::File::open(&corpus).data_ctx(|| format!("opening {}", corpus.display()))?;
    let mut reader = ConlluReader::with_max_tokens(BufReader::new(file), ctx.cfg.max_sentence);
    let proto = PathCollector::new(
        ds.instances.iter().map(|i| (i.modifier.as_str(), i.head.as_str())),
        ctx.cfg.store_options(),
    );
    let mut total = proto.fresh();
    loop {
        let chunk: Vec<_> = reader.by_ref().take(CHUNK).collect::<Result<_, _>>().data()?;
        if chunk.is_empty() {
            break;
        }
        let part = chunk
            .par_iter()
            .fold(
                || proto.fresh(),
                |mut c, s| {
                    c.observe(s);
                    c
                },
            )
            .reduce(
                || proto.fresh(),
                |mut a, b| {
                    a.merge(b);
                    a
                },
            );
        total.merge(part);
    }
    let stats = reader.stats();
    let (occurrences, warnings) = (total.occurrences, total.warnings);
    let store = total.finish();
    let dir = ctx.dir(layout::PATHS)?;
    let mut buf = Vec::new();
    store.write_tsv(&mut buf).data()?;
    ctx.write(&ctx.path(layout::PATH_STORE), buf)?;
    let covered = ds
        .instances
        .iter()
        .filter(|i| store.contains(&i.modifier, &i.head))
        .count();
    ctx.manifest("extract-paths")
        .with("sentences", stats.sentences)
        .with("dropped_long", stats.dropped_long)
        .with("malformed", stats.malformed)
        .with("occurrences", occurrences)
        .with("route_warnings", warnings)
        .with("compounds", ds.instances.len())
        .with("compounds_with_paths", covered)
        .with("distinct_paths", store.distinct_paths().len())
        .with("stored_paths", store.total_paths())
        .write(&dir.join("paths.manifest"))
        .data()?;
    println!(
        "{} sentences read ({} too long, {} malformed); {covered}/{} compounds have paths; {} distinct paths",
        stats.sentences,
        stats.dropped_long,
        stats.malformed,
        ds.instances.len(),
        store.distinct_paths().len()
    );
    Ok(())
}

pub fn rewrite_nc(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let ds = ctx.dataset()?;
    let text = usage(ctx.cfg.require("text", &ctx.cfg.text))?;
    let rewriter = NcRewriter::new(ds.instances.iter().map(|i| (i.modifier.as_str(), i.head.as_str())));
    let input = fs::File::open(&text).data_ctx(|| format!("opening {}", text.display()))?;
    let dir = ctx.dir(layout::REWRITE)?;
    let out_path = dir.join("text.txt");
    let tmp = partial(&out_path);
    let out = fs::File::create(&tmp).data_ctx(|| format!("creating {}", tmp.display()))?;
    let mut w = BufWriter::new(out);
    let mut lines = 0usize;
    for line in BufReader::new(input).lines() {
        let line = line.data()?;
        writeln!(w, "{}", rewriter.rewrite_line(&line)).data()?;
        lines += 1;
    }
    w.flush().data()?;
    drop(w);
    fs::rename(&tmp, &out_path).data()?;
    ctx.manifest("rewrite-nc")
        .with("lines", lines)
        .write(&dir.join("rewrite.manifest"))
        .data()?;
    println!("rewrote {lines} lines into {}", out_path.display());
    Ok(())
}

pub fn train_paths(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let ds = ctx.dataset()?;
    let s = ctx.split(&ds)?;
    let store = ctx.store()?;
    let with_paths = |idx: &[usize]| -> Vec<NcInstance> {
        subset(&ds.instances, idx)
            .into_iter()
            .filter(|i| store.contains(&i.modifier, &i.head))
            .collect()
    };
    let train = with_paths(&s.train);
    let val = with_paths(&s.validation);
    log::info!(
        "encoder training on {}/{} train and {}/{} validation compounds with paths",
        train.len(),
        s.train.len(),
        val.len(),
        s.validation.len()
    );
    if train.is_empty() {
        return Err(Failure::Data(anyhow!("no training compound has corpus paths")));
    }
    let lemmas = if ctx.cfg.lemma_vectors.is_empty() {
        None
    } else {
        Some(ctx.vectors("lemma_vectors", &ctx.cfg.lemma_vectors, OovPolicy::Zero)?)
    };
    let trained =
        train_path_encoder(&store, &train, &val, &ds.inventory, lemmas.as_ref(), &ctx.cfg.encoder()).data()?;
    let dir = ctx.dir(layout::ENCODER)?;
    let mut meta = ctx.meta("train-paths");
    meta.push(("train_compounds".into(), train.len().to_string()));
    trained.save(&dir, &meta).data()?;
    let h = &trained.history;
    println!(
        "path encoder: {} epochs, best epoch {} (validation F1 {:.4}){}",
        h.epochs.len(),
        h.best_epoch,
        h.best_f1,
        if h.stopped_early { ", stopped early" } else { "" }
    );
    Ok(())
}

pub fn export_paths(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let enc = TrainedEncoder::load(&ctx.path(layout::ENCODER))
        .data_ctx(|| "loading encoder (run train-paths first)".into())?;
    let store = ctx.store()?;
    let cache = export_path_embeddings(&enc.encoder, &enc.vocabs, &store).data()?;
    let dir = ctx.dir(layout::EMBEDDINGS)?;
    let mut buf = Vec::new();
    cache.write(&mut buf).data()?;
    ctx.write(&ctx.path(layout::EMBEDDINGS_FILE), buf)?;
    ctx.manifest("export-paths")
        .with("d_path", cache.dim)
        .with("count", cache.len())
        .with("encoder", &cache.encoder)
        .write(&dir.join("embeddings.manifest"))
        .data()?;
    println!("exported {} path embeddings of dimension {}", cache.len(), cache.dim);
    Ok(())
}

/// Tables the configured variant needs, loaded once.
struct Sources {
    words: Option<EmbeddingTable>,
    ncs: Option<EmbeddingTable>,
    cache: Option<PathEmbeddingCache>,
    store: Option<PathStore>,
}

impl Sources {
    fn load(ctx: &Ctx, variant: Variant) -> Outcome<Self> {
        let oov = ctx.cfg.oov_policy();
        Ok(Sources {
            words: if variant.uses_words() {
                Some(ctx.vectors("word_vectors", &ctx.cfg.word_vectors, oov)?)
            } else {
                None
            },
            ncs: if variant.uses_nc() {
                Some(ctx.vectors("nc_vectors", &ctx.cfg.nc_vectors, oov)?)
            } else {
                None
            },
            cache: if variant.uses_paths() { Some(ctx.cache()?) } else { None },
            store: if variant.uses_paths() { Some(ctx.store()?) } else { None },
        })
    }

    fn view(&self) -> FeatureSources<'_> {
        FeatureSources {
            words: self.words.as_ref(),
            ncs: self.ncs.as_ref(),
            cache: self.cache.as_ref(),
            store: self.store.as_ref(),
        }
    }
}

pub fn train(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let variant = ctx.cfg.variant;
    let ds = ctx.dataset()?;
    let s = ctx.split(&ds)?;
    let sources = Sources::load(ctx, variant)?;
    let view = sources.view();
    let spec = view.spec(variant).data()?;
    let train = Examples::build(&spec, &subset(&ds.instances, &s.train), &view, &ds.inventory).data()?;
    let val = Examples::build(&spec, &subset(&ds.instances, &s.validation), &view, &ds.inventory).data()?;
    let (params, history) =
        classify::train_classifier(&spec, ds.inventory.k(), &train, &val, &ctx.cfg.classifier()).data()?;
    let dir = ctx.dir(&layout::model(variant.as_str()))?;
    let trained = TrainedClassifier {
        params,
        spec,
        relations: ds.inventory.names().to_vec(),
    };
    trained.save(&dir, &ctx.meta("train")).data()?;
    ctx.write(&dir.join("history.tsv"), history.to_tsv())?;
    println!(
        "{variant}: |x| = {}, {} epochs, best epoch {} (validation F1 {:.4}){}",
        spec.len(),
        history.epochs.len(),
        history.best_epoch,
        history.best_f1,
        if history.stopped_early { ", stopped early" } else { "" }
    );
    Ok(())
}

pub fn eval(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let variant = ctx.cfg.variant;
    let ds = ctx.dataset()?;
    let s = ctx.split(&ds)?;
    let model_dir = ctx.path(&layout::model(variant.as_str()));
    let model = TrainedClassifier::load(&model_dir)
        .data_ctx(|| format!("loading {} (run train first)", model_dir.display()))?;
    if model.relations != ds.inventory.names() {
        return Err(Failure::Data(anyhow!(
            "model relations differ from the dataset's inventory"
        )));
    }
    let sources = Sources::load(ctx, variant)?;
    let view = sources.view();
    let spec = view.spec(variant).data()?;
    if spec != model.spec {
        return Err(Failure::Data(anyhow!(
            "input layout {spec:?} does not match the trained model {:?}",
            model.spec
        )));
    }
    let test = subset(&ds.instances, &s.test);
    let ex = Examples::build(&spec, &test, &view, &ds.inventory).data()?;
    let preds = classify::predict_all(&model.params, &ex.inputs).data()?;
    let report = evaluate(&preds, &ex.labels, &ds.inventory).data()?;
    let dir = ctx.dir(&layout::eval(variant.as_str()))?;
    write_report(ctx, &dir, &report)?;
    ctx.write(
        &dir.join("predictions.tsv"),
        predictions_tsv(&test, &preds, &model.relations),
    )?;
    let mut table = ResultsTable::default();
    table.insert(
        &ctx.dataset_name(),
        &s.kind.to_string(),
        variant.as_str(),
        report.weighted_f1,
    );
    ctx.write(&dir.join("table.txt"), table.to_text())?;
    ctx.manifest("eval")
        .with("variant", variant)
        .with("test", test.len())
        .with("weighted_f1", report.weighted_f1)
        .with("macro_f1", report.macro_f1)
        .write(&dir.join("eval.manifest"))
        .data()?;
    print!("{}", report.to_text());
    Ok(())
}

fn write_report(ctx: &Ctx, dir: &Path, report: &evalx::EvalReport) -> Outcome {
    ctx.write(&dir.join("report.tsv"), report.to_tsv())?;
    ctx.write(&dir.join("report.txt"), report.to_text())?;
    ctx.write(&dir.join("confusion.tsv"), report.confusion_tsv())
}

pub fn baseline_freq(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let ds = ctx.dataset()?;
    let s = ctx.split(&ds)?;
    let train = subset(&ds.instances, &s.train);
    let test = subset(&ds.instances, &s.test);
    let golds: Vec<usize> = test
        .iter()
        .map(|i| ds.inventory.index_of(&i.label).expect("labels come from the inventory"))
        .collect();
    let dir = ctx.dir(layout::BASELINE)?;
    let mut table = ResultsTable::default();
    let mut m = ctx.manifest("baseline-freq");
    for (name, slot) in [("head", Slot::Head), ("mod", Slot::Modifier)] {
        let mut b = freq_fit(&train, slot, &ds.inventory, ctx.cfg.seed).data()?;
        let preds: Vec<usize> = test.iter().map(|i| b.predict(&i.modifier, &i.head)).collect();
        let report = evaluate(&preds, &golds, &ds.inventory).data()?;
        let sub = dir.join(name);
        fs::create_dir_all(&sub).data()?;
        write_report(ctx, &sub, &report)?;
        ctx.write(
            &sub.join("predictions.tsv"),
            predictions_tsv(&test, &preds, ds.inventory.names()),
        )?;
        table.insert(
            &ctx.dataset_name(),
            &s.kind.to_string(),
            &format!("freq_{name}"),
            report.weighted_f1,
        );
        m.set(format!("weighted_f1_{name}"), report.weighted_f1);
        println!(
            "freq baseline ({name}): weighted F1 {:.4}, macro F1 {:.4}",
            report.weighted_f1, report.macro_f1
        );
    }
    ctx.write(&dir.join("table.txt"), table.to_text())?;
    m.write(&dir.join("baseline.manifest")).data()
}

pub fn analyze_paths(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let enc = TrainedEncoder::load(&ctx.path(layout::ENCODER))
        .data_ctx(|| "loading encoder (run train-paths first)".into())?;
    let store = ctx.store()?;
    let universe = store.distinct_paths();
    let rows = indicative_paths(
        &enc.encoder,
        &enc.vocabs,
        &universe,
        &enc.relations,
        ctx.cfg.indicative_threshold,
    )
    .data()?;
    let dir = ctx.dir(layout::ANALYSIS)?;
    ctx.write(&dir.join("indicative_paths.tsv"), indicative_paths_tsv(&rows))?;
    ctx.manifest("analyze-paths")
        .with("threshold", ctx.cfg.indicative_threshold)
        .with("universe", universe.len())
        .with("rows", rows.len())
        .write(&dir.join("indicative_paths.manifest"))
        .data()?;
    println!(
        "{} of {} paths score at least {}",
        rows.len(),
        universe.len(),
        ctx.cfg.indicative_threshold
    );
    for r in rows.iter().take(20) {
        println!("{}\t{:.3}\t{}", r.relation, r.score, r.path);
    }
    Ok(())
}

pub fn analyze_neighbors(ctx: &Ctx) -> Outcome {
    ctx.record_config()?;
    let ds = ctx.dataset()?;
    let s = ctx.split(&ds)?;
    let table = ctx.vectors("nc_vectors", &ctx.cfg.nc_vectors, OovPolicy::Zero)?;
    let labelled = |idx: &mut dyn Iterator<Item = &NcInstance>| -> Vec<(String, String)> {
        idx.map(|i| (i.nc_token(), i.label.clone())).collect()
    };
    let pool = labelled(&mut ds.instances.iter());
    let queries = labelled(&mut s.test.iter().map(|&i| &ds.instances[i]));
    let r = nc_neighbor_agreement(&table, &pool, &queries, ctx.cfg.neighbors, 20).data()?;
    let dir = ctx.dir(layout::ANALYSIS)?;
    ctx.write(&dir.join("neighbors.txt"), r.to_text())?;
    ctx.manifest("analyze-neighbors")
        .with("k", ctx.cfg.neighbors)
        .with("pool", "all_labelled")
        .with("coverage", r.coverage)
        .with("fraction", r.fraction)
        .write(&dir.join("neighbors.manifest"))
        .data()?;
    println!(
        "{}/{} test compounds have vectors ({:.2}%); {:.2}% have mostly same-label neighbours",
        r.covered,
        r.queries,
        100.0 * r.coverage,
        100.0 * r.fraction
    );
    Ok(())
}

/// Finite-difference checks of every trainable component at float64.
pub fn grad_check_suite(seed: u64) -> Vec<(String, GradCheckReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GradCheckConfig::exhaustive();
    let mut out = Vec::new();

    for act in [Activation::Identity, Activation::Tanh, Activation::Softmax] {
        let d = Dense::new(5, 4, act, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |p: &Dense| -> f64 { p.forward(&x).unwrap().iter().zip(&c).map(|(y, c)| y * c).sum() };
        let y = d.forward(&x).unwrap();
        let mut g = d.zeros_like();
        d.backward(&x, &y, &c, &mut g);
        out.push((format!("dense/{act:?}").to_lowercase(), grad_check(loss, &d, &g, &cfg)));
    }

    let lstm = Lstm::new(3, 4, &mut rng);
    let xs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ws: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let lstm_loss = |p: &Lstm| -> f64 {
        let t = p.forward(&xs).unwrap();
        t.hidden_states()
            .iter()
            .zip(&ws)
            .map(|(h, w)| h.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let trace = lstm.forward(&xs).unwrap();
    let mut g = lstm.zeros_like();
    lstm.backward(&trace, &ws, &mut g);
    out.push(("lstm".into(), grad_check(lstm_loss, &lstm, &g, &cfg)));

    let task = synthetic::path_task(2, seed);
    let vocabs = EdgeVocabularies::from_paths(task.store.distinct_paths());
    let dims = EncoderDims {
        lemma: 4,
        pos: 2,
        dep: 2,
        dir: 1,
        path: 4,
    };
    let mut enc = PathEncoder::new(&vocabs, dims, 3, None, &mut rng).unwrap();
    enc.lstm.bias = Tensor::uniform(&[4 * dims.path], 0.5, &mut rng);
    enc.proj.bias = Tensor::uniform(&[3], 0.5, &mut rng);
    let mut pool: Vec<(EncodedPath, f64)> = task
        .store
        .distinct_paths()
        .iter()
        .map(|p| (vocabs.encode(p), rng.gen_range(1..5) as f64))
        .collect();
    pool.truncate(5);
    for n in [1, 2, 5] {
        let paths = &pool[..n];
        let (_, g) = enc.loss_and_gradient(paths, 1).unwrap();
        let r = grad_check(|p: &PathEncoder| p.loss(paths, 1).unwrap(), &enc, &g, &cfg);
        out.push((format!("path_encoder/{n}_paths"), r));
    }

    for v in Variant::ALL {
        let spec = InputSpec::new(v, 3, 2, 4);
        let p = classify::ClassifierParams::new(spec.len(), 4, &mut rng).unwrap();
        let x: Vec<f64> = (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = p.loss_and_gradient(&x, 3).unwrap();
        let r = grad_check(|q: &classify::ClassifierParams| q.loss(&x, 3).unwrap(), &p, &g, &cfg);
        out.push((format!("classifier/{v}"), r));
    }
    out
}

pub fn grad_check_cmd(ctx: &Ctx) -> Outcome {
    let tol = ctx.cfg.grad_tolerance;
    let results = grad_check_suite(ctx.cfg.seed);
    let mut worst: f64 = 0.0;
    for (name, r) in &results {
        println!("{name}\t{:e}\t{} coordinates", r.max_rel_error, r.checked);
        worst = worst.max(r.max_rel_error);
    }
    println!("max relative error {worst:e} (tolerance {tol:e})");
    if worst >= tol || worst.is_nan() {
        return Err(Failure::Check(format!("max relative error {worst:e} ≥ {tol:e}")));
    }
    Ok(())
}

pub fn show_config(ctx: &Ctx) -> Outcome {
    print!("{}", ctx.cfg);
    println!("# config_hash = {}", ctx.hash);
    Ok(())
}
