use std::process::{Command, Output};

fn ncrel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncrel"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    ncrel(args).status.code().unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["split"]), 1);
    assert_eq!(code(&["show-config", "--set", "variant=lstm"]), 1);
}

#[test]
fn missing_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = format!("out_dir={}", dir.path().display());
    assert_eq!(
        code(&["split", "--set", "dataset=/nonexistent/data.tsv", "--set", &out]),
        2
    );
}

#[test]
fn failed_checks_exit_with_three() {
    assert_eq!(code(&["grad-check", "--set", "grad_tolerance=1e-15"]), 3);
}

#[test]
fn options_before_and_after_the_subcommand_combine() {
    let o = ncrel(&["--set", "seed=5", "show-config", "--set", "batch=3", "--threads", "2"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for line in ["seed = 5", "batch = 3", "threads = 2"] {
        assert!(text.lines().any(|l| l == line), "{line} missing from\n{text}");
    }
}

#[test]
fn toy_pipeline_emits_parseable_artifacts() {
    use ncrel::corpus::PathStore;
    use ncrel::manifest::Manifest;
    use ncrel::pathenc::PathEmbeddingCache;
    use std::io::BufReader;
    use std::path::Path;

    let dir = tempfile::tempdir().unwrap();
    let out = format!("out_dir={}", dir.path().display());
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/toy.conf");
    let conf = conf.to_str().unwrap();
    for stage in ["split", "extract-paths", "train-paths", "export-paths", "train", "eval"] {
        let o = ncrel(&[stage, "--config", conf, "--set", &out]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let root = dir.path();
    let store = PathStore::read_tsv(BufReader::new(std::fs::File::open(root.join("paths/paths.tsv")).unwrap())).unwrap();
    assert_eq!(store.len(), 24);
    let cache = PathEmbeddingCache::read(BufReader::new(
        std::fs::File::open(root.join("path_embeddings/embeddings.tsv")).unwrap(),
    ))
    .unwrap();
    assert_eq!(cache.len(), store.distinct_paths().len());

    let report = std::fs::read_to_string(root.join("eval_integrated/report.tsv")).unwrap();
    assert!(report.lines().count() > 4, "{report}");
    let predictions = std::fs::read_to_string(root.join("eval_integrated/predictions.tsv")).unwrap();
    let test_size = std::fs::read_to_string(root.join("split/test.tsv")).unwrap().lines().count();
    assert_eq!(predictions.lines().count(), test_size);

    let m = Manifest::read(&root.join("eval_integrated/eval.manifest")).unwrap();
    assert_eq!(m.get("seed"), Some("11"));
    assert_eq!(m.get("config_hash").map(str::len), Some(64));
    let leftovers = walk(root).into_iter().filter(|p| p.to_string_lossy().ends_with(".partial")).count();
    assert_eq!(leftovers, 0);
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
