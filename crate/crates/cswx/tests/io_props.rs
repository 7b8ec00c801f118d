use cswx::io::{parse_corpus, read_distance_csv, render_corpus, render_distance_csv, write_text};
use cswx::parallel::{par_distance_matrix, par_population_diversity};
use cswx_core::analysis::{pairwise_distance_matrix, population_diversity};
use cswx_core::grammar::{sample_tree, GrammarConfig};
use cswx_core::{DerivationTree, Method, ScoringMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn trees(n: usize, seed: u64) -> Vec<DerivationTree> {
    let config = GrammarConfig::with_max_depth(5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_tree(&config, &mut rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn corpus_round_trips(seed in any::<u64>(), n in 1usize..12) {
        let t = trees(n, seed);
        let text = render_corpus(&t, &[format!("seed {seed}")]);
        let back = parse_corpus(Path::new("p.trees"), &text).unwrap();
        prop_assert_eq!(
            back.iter().map(|x| x.canonical_form()).collect::<Vec<_>>(),
            t.iter().map(|x| x.canonical_form()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn parallel_matrix_is_bit_identical(seed in any::<u64>(), n in 2usize..14) {
        let m = ScoringMatrix::sm0();
        let t = trees(n, seed);
        for method in [Method::Cswx, Method::Rcswx] {
            let seq = pairwise_distance_matrix(&t, method, &m).unwrap();
            let par = par_distance_matrix(&t, method, &m).unwrap();
            prop_assert_eq!(&seq, &par);
            prop_assert_eq!(
                population_diversity(&t, method, &m).unwrap().to_bits(),
                par_population_diversity(&t, method, &m).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn distance_csv_round_trips(seed in any::<u64>(), n in 2usize..10) {
        let m = par_distance_matrix(&trees(n, seed), Method::Rcswx, &ScoringMatrix::sm0()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_text(&p, &render_distance_csv(&m, &[])).unwrap();
        let back = read_distance_csv(&p, Method::Rcswx, &m.scoring).unwrap();
        prop_assert_eq!(back, m);
    }
}
