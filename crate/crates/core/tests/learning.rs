use ncrel::classify::{self, ClassifierConfig, Examples, FeatureSources, Variant};
use ncrel::evalx::{evaluate, indicative_paths};
use ncrel::neural::ParamSet;
use ncrel::pathenc::{build_examples, export_path_embeddings, pooled_f1, train_path_encoder, EncoderConfig};
use ncrel::synthetic;

#[test]
fn path_encoder_learns_signature_paths() {
    let task = synthetic::path_task(30, 1);
    let (train, val, test) = task.partition();
    let cfg = EncoderConfig::default();
    let trained = train_path_encoder(&task.store, &train, &val, &task.inventory, None, &cfg).unwrap();
    let k = task.inventory.k();

    let first = &trained.history.epochs[0];
    assert!(first.train_loss < trained.history.initial_loss, "{:?}", trained.history);

    let train_ex = build_examples(&task.store, &train, &task.inventory, &trained.vocabs).unwrap();
    let test_ex = build_examples(&task.store, &test, &task.inventory, &trained.vocabs).unwrap();
    assert!(pooled_f1(&trained.encoder, &train_ex, k).unwrap() >= 0.95);
    assert!(pooled_f1(&trained.encoder, &test_ex, k).unwrap() >= 0.90);

    let universe = task.store.distinct_paths();
    let rows = indicative_paths(&trained.encoder, &trained.vocabs, &universe, &trained.relations, 0.8).unwrap();
    for (relation, sig) in &task.signatures {
        let s = sig.to_string();
        assert!(
            rows.iter().any(|r| &r.relation == relation && r.path == s),
            "{relation}: {rows:?}"
        );
    }
    for r in &rows {
        let p: ncrel::corpus::DependencyPath = r.path.parse().unwrap();
        let dist = trained.encoder.path_distribution(&trained.vocabs.encode(&p)).unwrap();
        assert!((dist.iter().cloned().fold(f64::MIN, f64::max) - r.score).abs() < 1e-9);
        assert!(universe.iter().any(|u| u.to_string() == r.path));
    }
    assert!(indicative_paths(
        &trained.encoder,
        &trained.vocabs,
        &universe,
        &trained.relations,
        1.0 + 1e-9
    )
    .unwrap()
    .is_empty());
}

#[test]
fn path_encoder_training_is_deterministic() {
    let task = synthetic::path_task(10, 2);
    let (train, val, _) = task.partition();
    let cfg = EncoderConfig {
        max_epochs: 3,
        ..Default::default()
    };
    let a = train_path_encoder(&task.store, &train, &val, &task.inventory, None, &cfg).unwrap();
    let b = train_path_encoder(&task.store, &train, &val, &task.inventory, None, &cfg).unwrap();
    assert_eq!(a.encoder.fingerprint(), b.encoder.fingerprint());
    assert_eq!(a.history, b.history);
}

#[test]
fn missing_training_paths_are_listed() {
    let task = synthetic::path_task(3, 0);
    let mut train = task.instances.clone();
    train.push(ncrel::dataset::NcInstance::new("lonely", "compound", "PURPOSE"));
    let err = train_path_encoder(
        &task.store,
        &train,
        &[],
        &task.inventory,
        None,
        &EncoderConfig::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("lonely_compound"), "{err}");
}

#[test]
fn exported_cache_matches_fresh_embeddings() {
    let task = synthetic::path_task(5, 3);
    let cfg = EncoderConfig {
        max_epochs: 1,
        ..Default::default()
    };
    let trained = train_path_encoder(&task.store, &task.instances, &[], &task.inventory, None, &cfg).unwrap();
    let cache = export_path_embeddings(&trained.encoder, &trained.vocabs, &task.store).unwrap();
    assert_eq!(cache.len(), task.store.distinct_paths().len());
    for p in task.store.distinct_paths() {
        let fresh = trained.encoder.embed_path(p, &trained.vocabs).unwrap();
        assert_eq!(cache.get(&p.to_string()).unwrap(), &fresh[..]);
    }
}

#[test]
fn integrated_classifier_fits_a_separable_task() {
    let task = synthetic::dist_task(20, 6, 4, 5, 7);
    let src = FeatureSources {
        words: Some(&task.words),
        ncs: Some(&task.ncs),
        cache: Some(&task.cache),
        store: Some(&task.store),
    };
    for variant in [Variant::Integrated, Variant::Dist] {
        let spec = src.spec(variant).unwrap();
        let train = Examples::build(&spec, &task.instances, &src, &task.inventory).unwrap();
        let (params, history) = classify::train_classifier(
            &spec,
            task.inventory.k(),
            &train,
            &Examples::default(),
            &ClassifierConfig::default(),
        )
        .unwrap();
        let preds = classify::predict_all(&params, &train.inputs).unwrap();
        let report = evaluate(&preds, &train.labels, &task.inventory).unwrap();
        assert_eq!(report.weighted_f1, 1.0, "{variant}: {history:?}");
    }
}

#[test]
fn classifier_training_is_deterministic_and_keeps_the_best_epoch() {
    let task = synthetic::dist_task(15, 4, 3, 3, 1);
    let src = FeatureSources {
        words: Some(&task.words),
        ncs: Some(&task.ncs),
        cache: Some(&task.cache),
        store: Some(&task.store),
    };
    let spec = src.spec(Variant::IntegratedNc).unwrap();
    let (tr, va): (Vec<_>, Vec<_>) = task
        .instances
        .iter()
        .cloned()
        .enumerate()
        .partition(|(i, _)| i % 4 != 0);
    let tr: Vec<_> = tr.into_iter().map(|(_, x)| x).collect();
    let va: Vec<_> = va.into_iter().map(|(_, x)| x).collect();
    let train = Examples::build(&spec, &tr, &src, &task.inventory).unwrap();
    let val = Examples::build(&spec, &va, &src, &task.inventory).unwrap();
    let cfg = ClassifierConfig::default();
    let (a, ha) = classify::train_classifier(&spec, 2, &train, &val, &cfg).unwrap();
    let (b, hb) = classify::train_classifier(&spec, 2, &train, &val, &cfg).unwrap();
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert_eq!(ha, hb);
    let best = ha.epochs.iter().map(|e| e.val_f1).fold(f64::MIN, f64::max);
    assert_eq!(ha.best_f1, best);
    let preds = classify::predict_all(&a, &val.inputs).unwrap();
    let f1 = evaluate(&preds, &val.labels, &task.inventory).unwrap().weighted_f1;
    assert_eq!(f1, best);
}
