use cswx_core::grammar::{sample_tree, GrammarConfig};
use cswx_core::oracle::{ged_sepx_path, sepx_crossover, GraphEdit, SmallGraph};
use cswx_core::rcswx::rcswx_distance;
use cswx_core::scoring::Preset;
use cswx_core::ScoringMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ged_matches_invariant_alignment() {
    let config = GrammarConfig::with_max_depth(6);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut done = 0;
    let mut worst = 0u64;
    while done < 400 {
        let a = sample_tree(&config, &mut rng);
        let b = sample_tree(&config, &mut rng);
        if a.node_count() > 12 || b.node_count() > 12 || a.node_count() + b.node_count() < 14 {
            continue;
        }
        let (ga, gb) = (SmallGraph::from_tree(&a).unwrap(), SmallGraph::from_tree(&b).unwrap());
        for preset in Preset::ALL {
            let m = ScoringMatrix::preset(preset);
            let g = ged_sepx_path(&ga, &gb, &m).unwrap();
            let d = rcswx_distance(&a, &b, &m).unwrap();
            worst = worst.max(g.expansions);
            assert_eq!(g.cost, d, "{preset:?}\n{a}\n{b}");
        }
        done += 1;
    }
    eprintln!("max expansions {worst}");
}

#[test]
fn graph_rebuilds_from_its_edges() {
    let config = GrammarConfig::with_max_depth(6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let t = sample_tree(&config, &mut rng);
        let Ok(g) = SmallGraph::from_tree(&t) else { continue };
        let r = SmallGraph::from_parts(g.nodes.clone(), g.edges.clone()).unwrap();
        assert_eq!(r, g, "{t}");
    }
}

#[test]
fn sepx_offspring_lies_between_parents() {
    let config = GrammarConfig::with_max_depth(5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = ScoringMatrix::sm0();
    let mut done = 0;
    while done < 150 {
        let a = sample_tree(&config, &mut rng);
        let b = sample_tree(&config, &mut rng);
        if a.node_count() > 10 || b.node_count() > 10 {
            continue;
        }
        let (ga, gb) = (SmallGraph::from_tree(&a).unwrap(), SmallGraph::from_tree(&b).unwrap());
        let (same, _) = sepx_crossover(&ga, &ga, &m, &mut rng).unwrap();
        assert_eq!(same, ga);
        let full = ged_sepx_path(&ga, &gb, &m).unwrap();
        let (child, applied) = sepx_crossover(&ga, &gb, &m, &mut rng).unwrap();
        assert_eq!(applied.len(), full.edits.len().div_ceil(2));
        let inserted = applied.iter().filter(|e| matches!(e, GraphEdit::Insert { .. })).count();
        let deleted = applied.iter().filter(|e| matches!(e, GraphEdit::Delete { .. })).count();
        assert_eq!(child.len(), ga.len() + inserted - deleted);
        let lo = ga.len().min(gb.len());
        let hi = ga.len().max(gb.len());
        assert!(child.len() + deleted >= lo && child.len() <= hi + inserted);
        if child.len() <= 12 {
            let d1 = ged_sepx_path(&child, &ga, &m).unwrap().cost;
            let d2 = ged_sepx_path(&child, &gb, &m).unwrap().cost;
            assert!(d1 <= full.cost + 1e-9 && d2 <= full.cost + 1e-9, "{a}\n{b}\n{d1} {d2} {}\n{child:?}\n{applied:?}\n{full:?}", full.cost);
        }
        done += 1;
    }
}
