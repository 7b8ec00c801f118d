use cswx_core::cswx::cswx_distance;
use cswx_core::grammar::{grow_tree, mutate, parse_tree, render_tree, sample_tree, validate, GrammarConfig};
use cswx_core::rcswx::rcswx_distance;
use cswx_core::scoring::Preset;
use cswx_core::serialise::Token;
use cswx_core::{serialise, DerivationTree, ScoringMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree(seed: u64, depth: usize) -> DerivationTree {
    sample_tree(&GrammarConfig::with_max_depth(depth), &mut ChaCha8Rng::seed_from_u64(seed))
}

fn preset() -> impl Strategy<Value = ScoringMatrix> {
    prop_oneof![Just(Preset::Sm0), Just(Preset::Sm1), Just(Preset::Sm2), Just(Preset::Sm3)].prop_map(ScoringMatrix::preset)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn render_parse_round_trip(seed in any::<u64>(), depth in 2usize..7) {
        let t = tree(seed, depth);
        prop_assert!(validate(&t).is_ok());
        prop_assert!(t.depth() <= depth);
        let back = parse_tree(&render_tree(&t)).unwrap();
        prop_assert_eq!(back.canonical_form(), t.canonical_form());
        prop_assert_eq!(serialise(&back), serialise(&t));
    }

    #[test]
    fn serialisation_starts_once_and_closes_every_opener(seed in any::<u64>()) {
        let s = serialise(&tree(seed, 6));
        prop_assert_eq!(&s.tokens[0], &Token::Start);
        prop_assert!(s.tokens[1..].iter().all(|t| *t != Token::Start));
        let mut open = Vec::new();
        for (k, t) in s.tokens.iter().enumerate() {
            if t.is_opener() {
                open.push(k);
            }
            if let Token::Separator { opener, .. } = t {
                prop_assert_eq!(open.last(), Some(opener));
                if !matches!(t, Token::Separator { role: cswx_core::serialise::SeparatorRole::Divider, .. }) {
                    open.pop();
                }
            }
        }
        prop_assert!(open.is_empty());
    }

    #[test]
    fn grown_trees_have_the_requested_size(seed in any::<u64>(), size in 2usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(t) = grow_tree(&GrammarConfig::with_max_depth(64), size, &mut rng) {
            prop_assert!(validate(&t).is_ok());
            prop_assert_eq!(serialise(&t).len(), size);
        }
    }

    #[test]
    fn mutation_keeps_trees_valid(seed in any::<u64>()) {
        let config = GrammarConfig::with_max_depth(5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = sample_tree(&config, &mut rng);
        let child = mutate(&t, &config, &mut rng);
        prop_assert!(validate(&child).is_ok());
        prop_assert!(child.depth() <= config.max_depth);
    }

    #[test]
    fn distances_are_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(), m in preset()) {
        let (x, y, z) = (tree(a, 4), tree(b, 4), tree(c, 4));
        let dxy = rcswx_distance(&x, &y, &m).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert_eq!(rcswx_distance(&x, &x, &m).unwrap(), 0.0);
        prop_assert_eq!(dxy, rcswx_distance(&y, &x, &m).unwrap());
        let dyz = rcswx_distance(&y, &z, &m).unwrap();
        let dxz = rcswx_distance(&x, &z, &m).unwrap();
        prop_assert!(dxz <= dxy + dyz + 1e-9);
        prop_assert_eq!(cswx_distance(&x, &y, &m).unwrap(), cswx_distance(&y, &x, &m).unwrap());
        prop_assert!(dxy <= cswx_distance(&x, &y, &m).unwrap());
    }

    #[test]
    fn branch_swaps_cost_nothing(seed in any::<u64>(), mask in any::<u64>(), m in preset()) {
        let t = tree(seed, 5);
        let swapped = t.swap_branches(mask);
        prop_assert!(validate(&swapped).is_ok());
        prop_assert_eq!(rcswx_distance(&t, &swapped, &m).unwrap(), 0.0);
    }
}
