use cswx_core::crossover::{crossover, generate_offspring, stx_crossover, StxOptions};
use cswx_core::grammar::{sample_tree, validate, GrammarConfig};
use cswx_core::rcswx::rcswx_distance;
use cswx_core::{cswx, rcswx, Method, ScoringMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn valid_selections_always_build_and_interpolate() {
    let config = GrammarConfig::with_max_depth(5);
    let m = ScoringMatrix::sm0();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut over_strict = 0;
    let mut checked = 0;
    for _ in 0..300 {
        let a = sample_tree(&config, &mut rng);
        let b = sample_tree(&config, &mut rng);
        let d = rcswx_distance(&a, &b, &m).unwrap();
        for path in [cswx::cswx_path(&a, &b, &m).unwrap(), rcswx::rcswx_path(&a, &b, &m).unwrap()] {
            let n = path.ops.len();
            for _ in 0..20 {
                let sel: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
                let built = generate_offspring(&path, &sel);
                if path.selection_valid(&sel) {
                    let child = built.unwrap();
                    checked += 1;
                    if path.total_cost == d {
                        let d1 = rcswx_distance(&child, &a, &m).unwrap();
                        let d2 = rcswx_distance(&child, &b, &m).unwrap();
                        assert!(d1 + d2 <= d + 1e-9, "{d1} + {d2} > {d}");
                    }
                } else if built.is_ok() {
                    over_strict += 1;
                }
            }
        }
    }
    eprintln!("checked {checked}, rejected-but-buildable {over_strict}");
}

#[test]
fn crossovers_are_valid_and_deterministic() {
    let config = GrammarConfig::default();
    let m = ScoringMatrix::sm0();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..300 {
        let a = sample_tree(&config, &mut rng);
        let b = sample_tree(&config, &mut rng);
        for method in [Method::Cswx, Method::Rcswx] {
            let c1 = crossover(&a, &b, method, &m, 0.0, &mut ChaCha8Rng::seed_from_u64(k)).unwrap();
            let c2 = crossover(&a, &b, method, &m, 0.0, &mut ChaCha8Rng::seed_from_u64(k)).unwrap();
            validate(&c1.child).unwrap();
            assert_eq!(c1.child, c2.child);
            assert!(c1.path.selection_valid(&c1.selection.mask(c1.path.ops.len())));
        }
        let s = stx_crossover(&a, &b, StxOptions::default(), &mut rng).unwrap();
        validate(&s).unwrap();
    }
}
