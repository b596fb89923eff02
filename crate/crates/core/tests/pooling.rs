use ncrel::corpus::{DependencyPath, PathStore};
use ncrel::neural::softmax;
use ncrel::pathenc::{pool_distributions, EdgeVocabularies, EncodedPath, EncoderDims, PathEncoder};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PATHS: [&str; 5] = [
    "<X>/NOUN/pobj/UP of/ADP/prep/UP <Y>/NOUN/root/END",
    "<X>/NOUN/root/DOWN in/ADP/prep/DOWN <Y>/NOUN/pobj/END",
    "<X>/NOUN/compound/UP <Y>/NOUN/root/END",
    "<X>/NOUN/dobj/UP containing/VERB/acl/UP <Y>/NOUN/root/END",
    "the/DET/det/SAT_LEFT <X>/NOUN/compound/UP <Y>/NOUN/root/END",
];

fn setup(seed: u64) -> (PathEncoder, Vec<EncodedPath>) {
    let paths: Vec<DependencyPath> = PATHS.iter().map(|p| p.parse().unwrap()).collect();
    let vocabs = EdgeVocabularies::from_paths(&paths);
    let dims = EncoderDims {
        lemma: 4,
        pos: 2,
        dep: 2,
        dir: 1,
        path: 5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = PathEncoder::new(&vocabs, dims, 4, None, &mut rng).unwrap();
    (enc, paths.iter().map(|p| vocabs.encode(p)).collect())
}

#[test]
fn one_path_gives_its_own_softmax() {
    let (enc, paths) = setup(0);
    let p = enc.embed(&paths[0]).unwrap();
    let mut z = enc.proj.weight.matvec(&p);
    for (zi, b) in z.iter_mut().zip(enc.proj.bias.data()) {
        *zi += b;
    }
    let (o, _) = enc.pooled_prediction(&[(paths[0].clone(), 7.0)]).unwrap();
    assert_eq!(o, softmax(&z));
}

#[test]
fn opposite_distributions_average_to_a_tie() {
    let (o, r) = pool_distributions(&[(vec![0.8, 0.2], 1.0), (vec![0.2, 0.8], 1.0)]).unwrap();
    assert!((o[0] - 0.5).abs() < 1e-12 && (o[1] - 0.5).abs() < 1e-12);
    assert_eq!(r, 0);
}

#[test]
fn weighted_mean_of_three_paths() {
    let (enc, paths) = setup(1);
    let f = [1.0, 2.0, 3.0];
    let d: Vec<Vec<f64>> = paths[..3].iter().map(|p| enc.path_distribution(p).unwrap()).collect();
    let input: Vec<(EncodedPath, f64)> = paths[..3].iter().cloned().zip(f).collect();
    let (o, _) = enc.pooled_prediction(&input).unwrap();
    for c in 0..4 {
        let oracle = (d[0][c] + 2.0 * d[1][c] + 3.0 * d[2][c]) / 6.0;
        assert!((o[c] - oracle).abs() < 1e-9);
    }
}

#[test]
fn path_store_counts_feed_the_pooling() {
    let mut store = PathStore::new();
    let p: DependencyPath = PATHS[0].parse().unwrap();
    store.add("tea", "cup", p.clone(), 3);
    store.finalize(1000);
    assert_eq!(store.paths("tea", "cup"), vec![(&p, 3)]);
}

proptest! {
    #[test]
    fn pooled_output_properties(
        seed in 0u64..50,
        picks in proptest::collection::vec((0usize..5, 1u32..20), 1..8),
        scale in 0.01f64..100.0,
        rot in 0usize..8,
    ) {
        let (enc, paths) = setup(seed);
        let input: Vec<(EncodedPath, f64)> = picks.iter().map(|&(i, f)| (paths[i].clone(), f as f64)).collect();
        let (o, r) = enc.pooled_prediction(&input).unwrap();
        prop_assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-6);

        let scaled: Vec<(EncodedPath, f64)> = input.iter().map(|(p, f)| (p.clone(), f * scale)).collect();
        let (o2, r2) = enc.pooled_prediction(&scaled).unwrap();
        prop_assert!(o.iter().zip(&o2).all(|(a, b)| (a - b).abs() < 1e-9));

        let mut rotated = input.clone();
        rotated.rotate_left(rot % input.len());
        rotated.reverse();
        let (o3, _) = enc.pooled_prediction(&rotated).unwrap();
        prop_assert!(o.iter().zip(&o3).all(|(a, b)| (a - b).abs() < 1e-9));
        let margin = {
            let mut s = o.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            s[0] - s[1]
        };
        if margin > 1e-9 {
            prop_assert_eq!(r, r2);
        }
    }
}
