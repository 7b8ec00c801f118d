use cswx_core::cswx::align;
use cswx_core::grammar::{sample_tree, GrammarConfig};
use cswx_core::oracle::exhaustive_edit_distance;
use cswx_core::{serialise, ScoringMatrix};
use cswx_core::scoring::Preset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn dp_matches_exhaustive_search() {
    let config = GrammarConfig::with_max_depth(4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut done = 0;
    let mut nonzero = 0;
    while done < 200 {
        let a = serialise(&sample_tree(&config, &mut rng));
        let b = serialise(&sample_tree(&config, &mut rng));
        if a.len() + b.len() > 14 {
            continue;
        }
        for preset in Preset::ALL {
            let m = ScoringMatrix::preset(preset);
            let dp = align(&a, &b, &m).unwrap().distance;
            let ex = exhaustive_edit_distance(&a, &b, &m).unwrap();
            assert_eq!(dp, ex, "{:?}\n{}\n{}", preset, a.dump(), b.dump());
            if dp > 0.0 { nonzero += 1; }
        }
        done += 1;
    }
    eprintln!("nonzero {nonzero}");
}
