//! Steady-state evolutionary search.
//!
//! Each iteration selects parents by tournament, builds one offspring by
//! crossover and mutation, evaluates it, appends it to the population and
//! removes the oldest individual.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::population_diversity;
use crate::crossover::{crossover, stx_crossover, StxOptions};
use crate::error::{Error, Result};
use crate::grammar::{mutate, sample_tree, validate, DerivationTree, GrammarConfig};
use crate::rcswx::rcswx_distance;
use crate::scoring::ScoringMatrix;
use crate::serialise::{serialise, Token};
use crate::Method;

/// Fitness given to individuals whose evaluation failed.
pub const WORST_FITNESS: f64 = f64::MIN;

/// Tournament size used when none is configured.
pub const DEFAULT_TOURNAMENT_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub tree: DerivationTree,
    pub fitness: f64,
    /// Evaluation index at which the individual was created.
    pub birth: usize,
}

/// Recombination operator of a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CrossoverMethod {
    /// Mutation only.
    None,
    Stx,
    Cswx,
    Rcswx,
}

impl CrossoverMethod {
    pub fn name(self) -> &'static str {
        match self {
            CrossoverMethod::None => "none",
            CrossoverMethod::Stx => "stx",
            CrossoverMethod::Cswx => "cswx",
            CrossoverMethod::Rcswx => "rcswx",
        }
    }
}

impl fmt::Display for CrossoverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CrossoverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CrossoverMethod::None),
            "stx" => Ok(CrossoverMethod::Stx),
            "cswx" => Ok(CrossoverMethod::Cswx),
            "rcswx" => Ok(CrossoverMethod::Rcswx),
            other => Err(Error::InvalidArgument(format!(
                "unknown crossover `{other}` (expected none, stx, cswx or rcswx)"
            ))),
        }
    }
}

/// Synthetic fitness landscapes.
#[derive(Debug, Clone, PartialEq)]
pub enum FitnessSpec {
    /// Negated invariant distance to a hidden target.
    TargetDistance {
        target: DerivationTree,
        scoring: ScoringMatrix,
    },
    /// Occurrences of the token pattern of `motif` in the serialisation.
    MotifCount { motif: DerivationTree },
}

impl FitnessSpec {
    pub fn evaluate(&self, tree: &DerivationTree) -> Result<f64> {
        match self {
            FitnessSpec::TargetDistance { target, scoring } => {
                target_distance_fitness(tree, target, scoring)
            }
            FitnessSpec::MotifCount { motif } => Ok(motif_count_fitness(tree, motif) as f64),
        }
    }
}

/// `-rcswx_distance(tree, target)`: zero exactly on the target's
/// functional equivalence class.
pub fn target_distance_fitness(
    tree: &DerivationTree,
    target: &DerivationTree,
    m: &ScoringMatrix,
) -> Result<f64> {
    Ok(0.0 - rcswx_distance(tree, target, m)?)
}

/// Number of (possibly overlapping) occurrences of the motif's tokens,
/// without its start token, as a contiguous run of the tree's tokens.
/// Node tokens match on label; separators match on role and on the relative
/// position of their opener.
pub fn motif_count_fitness(tree: &DerivationTree, motif: &DerivationTree) -> usize {
    let hay = serialise(tree).tokens;
    let pat = &serialise(motif).tokens[1..];
    if pat.is_empty() || pat.len() >= hay.len() {
        return 0;
    }
    (1..=hay.len() - pat.len())
        .filter(|&s| {
            pat.iter().enumerate().all(|(k, p)| match (p, &hay[s + k]) {
                (Token::Node { label: a, .. }, Token::Node { label: b, .. }) => a == b,
                (
                    Token::Separator { opener: o1, role: r1 },
                    Token::Separator { opener: o2, role: r2 },
                ) => r1 == r2 && *o1 >= 1 && *o2 == s + o1 - 1,
                _ => false,
            })
        })
        .count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub population_size: usize,
    /// Evaluations including the initial population.
    pub total_evaluations: usize,
    pub tournament_size: usize,
    pub crossover: CrossoverMethod,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub skewness: f64,
    /// Scoring used by the alignment crossovers and the diversity trace.
    pub scoring: ScoringMatrix,
    pub seed: u64,
    pub fitness: FitnessSpec,
    pub grammar: GrammarConfig,
    /// Record population diversity every this many iterations; 0 never.
    pub diversity_every: usize,
    /// Stop once the incumbent fitness reaches this value.
    pub stop_at: Option<f64>,
}

impl SearchConfig {
    pub fn new(fitness: FitnessSpec) -> SearchConfig {
        SearchConfig {
            population_size: 100,
            total_evaluations: 1000,
            tournament_size: DEFAULT_TOURNAMENT_SIZE,
            crossover: CrossoverMethod::Rcswx,
            crossover_prob: 1.0,
            mutation_prob: 1.0,
            skewness: 0.0,
            scoring: ScoringMatrix::sm0(),
            seed: 0,
            fitness,
            grammar: GrammarConfig::default(),
            diversity_every: 0,
            stop_at: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.population_size == 0 {
            return bad("population size must be positive");
        }
        if self.total_evaluations < self.population_size {
            return bad("total evaluations must be at least the population size");
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad("tournament size must be in 1..=population size");
        }
        for (name, p) in [
            ("crossover", self.crossover_prob),
            ("mutation", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "{name} probability {p} is outside [0, 1]"
                )));
            }
        }
        if !self.skewness.is_finite() {
            return bad("skewness must be finite");
        }
        self.scoring.check()?;
        self.grammar.check()
    }
}

/// One line of the search history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Evaluations so far.
    pub iteration: usize,
    /// Best fitness seen so far.
    pub best_fitness: f64,
    /// Mean fitness of the current population.
    pub mean_fitness: f64,
    pub diversity: Option<f64>,
    /// How the newest individual was made.
    pub operator: String,
    /// Birth indices of its parents.
    pub parents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHistory {
    pub records: Vec<IterationRecord>,
    pub population: Vec<Individual>,
    pub best: Individual,
    pub evaluations: usize,
    /// Evaluations whose fitness function failed.
    pub failures: usize,
}

impl SearchHistory {
    /// First evaluation count at which the incumbent reached `fitness`.
    pub fn evaluations_to(&self, fitness: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.best_fitness >= fitness)
            .map(|r| r.iteration)
    }
}

/// Index of the fittest of `k` individuals drawn without replacement; ties
/// go to the earlier draw.
pub fn tournament_select<R: Rng + ?Sized>(population: &[Individual], k: usize, rng: &mut R) -> usize {
    let k = k.clamp(1, population.len());
    let mut best: Option<usize> = None;
    for i in sample(rng, population.len(), k) {
        if best.is_none_or(|b| population[i].fitness > population[b].fitness) {
            best = Some(i);
        }
    }
    best.expect("non-empty population")
}

/// Runs the search with the fitness of `config`.
pub fn evolve(config: &SearchConfig) -> Result<SearchHistory> {
    let spec = config.fitness.clone();
    evolve_with(config, &mut |t| spec.evaluate(t))
}

/// Runs the search with an arbitrary fitness function. A failed evaluation
/// gives [`WORST_FITNESS`].
pub fn evolve_with(
    config: &SearchConfig,
    fitness: &mut dyn FnMut(&DerivationTree) -> Result<f64>,
) -> Result<SearchHistory> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut failures = 0usize;
    let mut evaluate = |t: &DerivationTree, failures: &mut usize| match fitness(t) {
        Ok(f) if f.is_finite() => f,
        _ => {
            *failures += 1;
            WORST_FITNESS
        }
    };
    let mut population: VecDeque<Individual> = VecDeque::with_capacity(config.population_size + 1);
    let mut best: Option<Individual> = None;
    let mut records = Vec::new();
    for birth in 0..config.population_size {
        let tree = sample_tree(&config.grammar, &mut rng);
        let fitness = evaluate(&tree, &mut failures);
        let ind = Individual {
            tree,
            fitness,
            birth,
        };
        if best.as_ref().is_none_or(|b| ind.fitness > b.fitness) {
            best = Some(ind.clone());
        }
        population.push_back(ind);
    }
    let method = match config.crossover {
        CrossoverMethod::Cswx => Some(Method::Cswx),
        CrossoverMethod::Rcswx => Some(Method::Rcswx),
        _ => None,
    };
    let mut evaluations = config.population_size;
    let record = |population: &VecDeque<Individual>,
                      best: &Individual,
                      evaluations: usize,
                      operator: String,
                      parents: Vec<usize>|
     -> Result<IterationRecord> {
        let step = evaluations - config.population_size;
        let diversity = if config.diversity_every > 0 && step.is_multiple_of(config.diversity_every) {
            let trees: Vec<DerivationTree> = population.iter().map(|i| i.tree.clone()).collect();
            Some(population_diversity(&trees, Method::Rcswx, &config.scoring)?)
        } else {
            None
        };
        Ok(IterationRecord {
            iteration: evaluations,
            best_fitness: best.fitness,
            mean_fitness: population.iter().map(|i| i.fitness).sum::<f64>() / population.len() as f64,
            diversity,
            operator,
            parents,
        })
    };
    records.push(record(
        &population,
        best.as_ref().expect("population is non-empty"),
        evaluations,
        "init".into(),
        Vec::new(),
    )?);
    let reached = |best: &Individual| config.stop_at.is_some_and(|s| best.fitness >= s);
    while evaluations < config.total_evaluations
        && !reached(best.as_ref().expect("population is non-empty"))
    {
        let slice = population.make_contiguous();
        let p1 = tournament_select(slice, config.tournament_size, &mut rng);
        let mut operator = String::from("clone");
        let mut parents = alloc::vec![slice[p1].birth];
        let mut child = slice[p1].tree.clone();
        if config.crossover != CrossoverMethod::None && rng.gen_bool(config.crossover_prob) {
            let p2 = tournament_select(slice, config.tournament_size, &mut rng);
            parents.push(slice[p2].birth);
            let made = match method {
                Some(method) => crossover(
                    &slice[p1].tree,
                    &slice[p2].tree,
                    method,
                    &config.scoring,
                    config.skewness,
                    &mut rng,
                )
                .map(|o| o.child),
                None => stx_crossover(
                    &slice[p1].tree,
                    &slice[p2].tree,
                    StxOptions::default(),
                    &mut rng,
                ),
            };
            if let Ok(c) = made {
                child = c;
                operator = String::from(config.crossover.name());
            }
        }
        if rng.gen_bool(config.mutation_prob) {
            child = mutate(&child, &config.grammar, &mut rng);
            operator.push_str("+mutate");
        }
        if validate(&child).is_err() {
            return Err(Error::Internal("search produced an invalid tree".into()));
        }
        let fitness = evaluate(&child, &mut failures);
        let ind = Individual {
            tree: child,
            fitness,
            birth: evaluations,
        };
        evaluations += 1;
        if best.as_ref().is_none_or(|b| ind.fitness > b.fitness) {
            best = Some(ind.clone());
        }
        population.push_back(ind);
        population.pop_front();
        records.push(record(
            &population,
            best.as_ref().expect("population is non-empty"),
            evaluations,
            operator,
            parents,
        )?);
    }
    Ok(SearchHistory {
        records,
        population: population.into(),
        best: best.expect("population is non-empty"),
        evaluations,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_tree;

    fn tree(s: &str) -> DerivationTree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn target_fitness() {
        let m = ScoringMatrix::sm0();
        let t = tree("branch2(clone,2; comp(relu); comp(identity); add,2)");
        assert_eq!(target_distance_fitness(&t, &t, &m).unwrap(), 0.0);
        assert_eq!(target_distance_fitness(&t.swap_branches(1), &t, &m).unwrap(), 0.0);
        let s = tree("branch2(clone,2; comp(relu); comp(softmax); add,2)");
        assert_eq!(target_distance_fitness(&s, &t, &m).unwrap(), -0.5);
    }

    #[test]
    fn motif_counts() {
        let motif = tree("route(transpose, comp(relu), transpose)");
        assert_eq!(motif_count_fitness(&tree("comp(identity)"), &motif), 0);
        assert_eq!(motif_count_fitness(&motif, &motif), 1);
        let three = tree(
            "seq(route(transpose, comp(relu), transpose), seq(route(transpose, comp(relu), transpose), route(transpose, comp(relu), transpose)))",
        );
        assert_eq!(motif_count_fitness(&three, &motif), 3);
    }

    #[test]
    fn tournament_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pop: Vec<Individual> = (0..10)
            .map(|i| Individual {
                tree: tree("comp(relu)"),
                fitness: i as f64,
                birth: i,
            })
            .collect();
        for _ in 0..20 {
            assert_eq!(tournament_select(&pop, 10, &mut rng), 9);
        }
    }

    #[test]
    fn steady_state_and_determinism() {
        let target = tree("seq(comp(relu), comp(softmax))");
        let mut config = SearchConfig::new(FitnessSpec::TargetDistance {
            target,
            scoring: ScoringMatrix::sm0(),
        });
        config.population_size = 10;
        config.total_evaluations = 40;
        config.grammar = GrammarConfig::with_max_depth(3);
        config.seed = 9;
        let a = evolve(&config).unwrap();
        let b = evolve(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.population.len(), 10);
        assert_eq!(a.records.len(), 31);
        assert!(a.records.windows(2).all(|w| w[0].best_fitness <= w[1].best_fitness));
        config.crossover = CrossoverMethod::None;
        let c = evolve(&config).unwrap();
        assert!(c.records[1..].iter().all(|r| r.operator == "clone+mutate"));
    }
}
