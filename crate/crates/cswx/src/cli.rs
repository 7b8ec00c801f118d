//! The `cswx` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 domain error (invalid tree,
//! unalignable pair, failed crossover), 3 internal error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use cswx_core::analysis::{
    empirical_semivariogram, fit_spherical, metric_axiom_check, scoring_sensitivity, AxiomPlan, DEFAULT_BINS,
};
use cswx_core::crossover::{crossover, generate_offspring, stx_crossover, StxOptions};
use cswx_core::cswx::{align, trace_back, EditPath};
use cswx_core::grammar::{grow_tree, parse_tree, render_tree, sample_tree, GrammarConfig};
use cswx_core::rcswx::{align_recursive, rcswx_distance};
use cswx_core::scoring::Preset;
use cswx_core::search::{evolve, CrossoverMethod, FitnessSpec, SearchConfig};
use cswx_core::{serialise, DerivationTree, Error, Method, ScoringMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{log_log_slope, median_seconds, render_csv, scaling_benchmark, BenchConfig, BenchMethod};
use crate::io::{self, IoError};
use crate::parallel::{par_distance_matrix, par_population_diversity};
use crate::suites::{run_suite, Suite};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            Error::Internal(_) => CliError::Internal(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// A hidden search target is sampled from this offset of the run's seed.
pub const TARGET_SEED_OFFSET: u64 = 1000;

#[derive(Debug, Parser)]
#[command(name = "cswx", version, about = "Grammar-aware alignment, distance and crossover of architecture trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Align two trees and print their distance.
    Align(AlignArgs),
    /// Print the distance between two trees.
    Distance(DistanceArgs),
    /// Build one offspring of two trees.
    Crossover(CrossoverArgs),
    /// Replay a dumped edit path and check that it rebuilds the second tree.
    Verify(VerifyArgs),
    /// Sample random trees.
    Sample(SampleArgs),
    /// Run a steady-state evolutionary search.
    Search(SearchArgs),
    /// Population and landscape analysis.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Time the alignment methods and the graph-edit oracle.
    Bench(BenchArgs),
    /// Check the fast methods against the reference oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Args)]
struct ScoringArgs {
    /// Scoring preset: sm0, sm1, sm2 or sm3.
    #[arg(long, default_value = "sm0")]
    scoring: String,
    /// Key-value file with c1, c2, indel_default, separator and
    /// branching_weighted; overrides --scoring.
    #[arg(long)]
    scoring_file: Option<PathBuf>,
}

impl ScoringArgs {
    fn matrix(&self) -> CliResult<ScoringMatrix> {
        match &self.scoring_file {
            Some(path) => scoring_from_file(path),
            None => Ok(ScoringMatrix::preset(self.scoring.parse::<Preset>()?)),
        }
    }
}

fn scoring_from_file(path: &Path) -> CliResult<ScoringMatrix> {
    let table = io::read_keyfile(path)?;
    let base = ScoringMatrix::sm0();
    let num = |key: &str, default: f64| -> CliResult<f64> {
        match table.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| CliError::Domain(format!("{}: `{key}` must be a number", path.display()))),
        }
    };
    for key in table.keys() {
        if !["c1", "c2", "indel_default", "separator", "branching_weighted"].contains(&key.as_str()) {
            return Err(CliError::Usage(format!("{}: unknown key `{key}`", path.display())));
        }
    }
    let branching_weighted = match table.get("branching_weighted") {
        None => false,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| CliError::Domain(format!("{}: `branching_weighted` must be true or false", path.display())))?,
    };
    Ok(ScoringMatrix::custom(
        num("c1", base.c1)?,
        num("c2", base.c2)?,
        num("indel_default", base.indel_default)?,
        num("separator", base.separator)?,
        branching_weighted,
    )?)
}

#[derive(Debug, Args)]
struct AlignArgs {
    a: PathBuf,
    b: PathBuf,
    /// cswx or rcswx.
    #[arg(long, default_value = "cswx")]
    method: Method,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Write the distance matrix as CSV.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    /// Write the traced edit path as JSON.
    #[arg(long)]
    dump_ops: Option<PathBuf>,
    /// Print both token sequences after the distance.
    #[arg(long)]
    dump_tokens: bool,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value = "rcswx")]
    method: Method,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Write the traced edit path as JSON.
    #[arg(long)]
    dump_ops: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CrossoverArgs {
    a: PathBuf,
    b: PathBuf,
    /// cswx, rcswx or stx.
    #[arg(long, default_value = "rcswx")]
    method: CrossoverMethod,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    skewness: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// STX only: never cross over at computation modules.
    #[arg(long)]
    exclude_computation: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    a: PathBuf,
    b: PathBuf,
    ops: PathBuf,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    max_depth: usize,
    /// Grow trees to exactly this many tokens instead of sampling.
    #[arg(long)]
    tokens: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the configuration file.
    #[arg(long)]
    seed: Option<u64>,
    /// History CSV.
    #[arg(long)]
    out: PathBuf,
    /// Final population.
    #[arg(long)]
    trees_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Pairwise distance matrix of a tree corpus as dense CSV.
    Distances {
        trees: PathBuf,
        #[arg(long, default_value = "rcswx")]
        method: Method,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Mean pairwise distance of every `.trees` file in a directory.
    Diversity {
        dir: PathBuf,
        #[arg(long, default_value = "rcswx")]
        method: Method,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Empirical semivariogram and spherical fit.
    Variogram {
        distances: PathBuf,
        fitness: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the metric axioms on random trees.
    MetricCheck {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value = "rcswx")]
        method: Method,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        max_depth: usize,
    },
    /// Correlate distances under the four presets on random pairs.
    Sensitivity {
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "rcswx")]
        method: Method,
    },
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "cswx,rcswx,sepx")]
    methods: Vec<BenchMethod>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample pairs without routing or branching modules.
    #[arg(long)]
    branch_free: bool,
    /// Graph-edit oracle time limit per pair, in seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Run one agreement suite.
    Check {
        /// dp, perm or ged.
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let invocation: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &invocation.join(" ")) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> CliResult {
    match output {
        Some(p) => Ok(io::write_text(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn dispatch(command: Command, invocation: &str) -> CliResult {
    let header = |seed: Option<u64>| -> Vec<String> {
        let mut h = vec![invocation.to_string()];
        if let Some(s) = seed {
            h.push(format!("seed {s}"));
        }
        h
    };
    match command {
        Command::Align(args) => {
            let m = args.scoring.matrix()?;
            let (a, b) = (io::read_tree(&args.a)?, io::read_tree(&args.b)?);
            let (s1, s2) = (serialise(&a), serialise(&b));
            let alignment = match args.method {
                Method::Cswx => align(&s1, &s2, &m)?,
                Method::Rcswx => align_recursive(&s1, &s2, &m)?,
            };
            println!("{}", alignment.distance);
            if let Some(p) = &args.dump_matrix {
                io::write_text(p, &io::render_alignment_csv(&alignment.matrix, &s1, &s2))?;
            }
            if let Some(p) = &args.dump_ops {
                io::write_text(p, &to_json(&trace_back(&alignment))?)?;
            }
            if args.dump_tokens {
                print!("{}\n{}", s1.dump(), s2.dump());
            }
            Ok(())
        }
        Command::Distance(args) => {
            let m = args.scoring.matrix()?;
            let (a, b) = (io::read_tree(&args.a)?, io::read_tree(&args.b)?);
            let (s1, s2) = (serialise(&a), serialise(&b));
            let alignment = match args.method {
                Method::Cswx => align(&s1, &s2, &m)?,
                Method::Rcswx => align_recursive(&s1, &s2, &m)?,
            };
            println!("{}", alignment.distance);
            if let Some(p) = &args.dump_ops {
                io::write_text(p, &to_json(&trace_back(&alignment))?)?;
            }
            Ok(())
        }
        Command::Crossover(args) => {
            let m = args.scoring.matrix()?;
            let (a, b) = (io::read_tree(&args.a)?, io::read_tree(&args.b)?);
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let child = match args.method {
                CrossoverMethod::None => a.clone(),
                CrossoverMethod::Stx => stx_crossover(
                    &a,
                    &b,
                    StxOptions {
                        exclude_computation: args.exclude_computation,
                    },
                    &mut rng,
                )?,
                CrossoverMethod::Cswx => crossover(&a, &b, Method::Cswx, &m, args.skewness, &mut rng)?.child,
                CrossoverMethod::Rcswx => crossover(&a, &b, Method::Rcswx, &m, args.skewness, &mut rng)?.child,
            };
            emit(
                args.output.as_deref(),
                &io::render_corpus(std::slice::from_ref(&child), &header(Some(args.seed))),
            )
        }
        Command::Verify(args) => {
            let (a, b) = (io::read_tree(&args.a)?, io::read_tree(&args.b)?);
            let path: EditPath = serde_json::from_str(&io::read_text(&args.ops)?)
                .map_err(|e| CliError::Domain(format!("{}: {e}", args.ops.display())))?;
            if path.s1 != serialise(&a) || path.s2 != serialise(&b) {
                return Err(CliError::Domain("the edit path was not traced between these trees".into()));
            }
            let child = generate_offspring(&path, &vec![true; path.ops.len()])?;
            let d = rcswx_distance(&child, &b, &ScoringMatrix::sm0())?;
            if d != 0.0 {
                return Err(CliError::Domain(format!(
                    "replay gives {} which differs from the second tree by {d}",
                    render_tree(&child)
                )));
            }
            println!("ok: {} operations rebuild the second tree", path.ops.len());
            Ok(())
        }
        Command::Sample(args) => {
            let config = GrammarConfig::with_max_depth(args.max_depth);
            config.check()?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let mut trees = Vec::with_capacity(args.n);
            while trees.len() < args.n {
                match args.tokens {
                    Some(t) => {
                        let grown = grow_tree(&config, t, &mut rng)
                            .ok_or_else(|| CliError::Usage(format!("no tree has exactly {t} tokens")))?;
                        trees.push(grown);
                    }
                    None => trees.push(sample_tree(&config, &mut rng)),
                }
            }
            emit(args.output.as_deref(), &io::render_corpus(&trees, &header(Some(args.seed))))
        }
        Command::Search(args) => {
            let mut config = search_config(&args.config)?;
            if let Some(s) = args.seed {
                config.seed = s;
            }
            let history = evolve(&config)?;
            io::write_text(&args.out, &io::render_history_csv(&history, &header(Some(config.seed))))?;
            if let Some(p) = &args.trees_out {
                let trees: Vec<DerivationTree> = history.population.iter().map(|i| i.tree.clone()).collect();
                io::write_corpus(p, &trees, &header(Some(config.seed)))?;
            }
            eprintln!(
                "best fitness {} after {} evaluations ({} failed)",
                history.best.fitness, history.evaluations, history.failures
            );
            Ok(())
        }
        Command::Analyze(cmd) => analyze(cmd, &header(None)),
        Command::Bench(args) => {
            if !(args.timeout > 0.0 && args.timeout.is_finite()) {
                return Err(CliError::Usage("timeout must be positive".into()));
            }
            let mut config = BenchConfig::new(args.sizes, args.samples, args.methods);
            config.seed = args.seed;
            config.branch_free = args.branch_free;
            config.timeout = Duration::from_secs_f64(args.timeout);
            let records = scaling_benchmark(&config)?;
            emit(args.output.as_deref(), &render_csv(&records, &header(Some(args.seed))))?;
            for &method in &config.methods {
                for &size in &config.sizes {
                    if let Some(t) = median_seconds(&records, method, size) {
                        eprintln!("{method} size {size}: median {t:.3e}s");
                    }
                }
                if let Some(s) = log_log_slope(&records, method) {
                    eprintln!("{method} log-log slope {s:.3}");
                }
            }
            Ok(())
        }
        Command::Oracle(OracleCommand::Check {
            suite,
            pairs,
            seed,
            scoring,
        }) => {
            let report = run_suite(suite, pairs, seed, &scoring.matrix()?)?;
            println!("{report}");
            if report.failed > 0 {
                return Err(CliError::Internal(format!("{} pairs disagree with the oracle", report.failed)));
            }
            Ok(())
        }
    }
}

fn analyze(cmd: AnalyzeCommand, header: &[String]) -> CliResult {
    match cmd {
        AnalyzeCommand::Distances {
            trees,
            method,
            scoring,
            output,
        } => {
            let m = scoring.matrix()?;
            let trees = io::read_corpus(&trees)?;
            let matrix = par_distance_matrix(&trees, method, &m)?;
            emit(output.as_deref(), &io::render_distance_csv(&matrix, header))
        }
        AnalyzeCommand::Diversity { dir, method, scoring } => {
            let m = scoring.matrix()?;
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "trees"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::Usage(format!("{}: no .trees files", dir.display())));
            }
            println!("file,diversity");
            for f in files {
                let trees = io::read_corpus(&f)?;
                let d = par_population_diversity(&trees, method, &m)?;
                println!("{},{d}", f.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
            }
            Ok(())
        }
        AnalyzeCommand::Variogram {
            distances,
            fitness,
            bins,
            output,
        } => {
            let matrix = io::read_distance_csv(&distances, Method::Rcswx, "")?;
            let f = io::read_fitness_csv(&fitness)?;
            let points = empirical_semivariogram(&matrix, &f, bins)?;
            let model = fit_spherical(&points)?;
            let json = serde_json::json!({
                "nugget": model.nugget,
                "sill": model.sill,
                "range": model.range,
                "residual": model.residual,
                "degenerate": model.degenerate,
                "bins": points,
            });
            emit(output.as_deref(), &to_json(&json)?)
        }
        AnalyzeCommand::MetricCheck {
            n,
            method,
            scoring,
            seed,
            max_depth,
        } => {
            let m = scoring.matrix()?;
            let config = GrammarConfig::with_max_depth(max_depth);
            config.check()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let report = metric_axiom_check(
                &mut |r: &mut ChaCha8Rng| sample_tree(&config, r),
                AxiomPlan::uniform(n),
                method,
                &m,
                &mut rng,
            )?;
            print!("{}", to_json(&report)?);
            println!("{}", if report.passed(method) { "pass" } else { "fail" });
            Ok(())
        }
        AnalyzeCommand::Sensitivity { pairs, seed, method } => {
            let config = GrammarConfig::with_max_depth(64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let trees: Vec<(DerivationTree, DerivationTree)> = (0..pairs)
                .map(|_| {
                    let grow = |rng: &mut ChaCha8Rng| loop {
                        let t = rng.gen_range(4..=104);
                        if let Some(tree) = grow_tree(&config, t, rng) {
                            break tree;
                        }
                    };
                    (grow(&mut rng), grow(&mut rng))
                })
                .collect();
            let presets: Vec<ScoringMatrix> = [Preset::Sm0, Preset::Sm1, Preset::Sm2, Preset::Sm3]
                .into_iter()
                .map(ScoringMatrix::preset)
                .collect();
            let report = scoring_sensitivity(&trees, &presets, method)?;
            println!("preset,pearson,slope,intercept,r_squared");
            for c in &report.comparisons {
                println!("{},{},{},{},{}", c.preset.name(), c.pearson, c.slope, c.intercept, c.r_squared);
            }
            Ok(())
        }
    }
}

/// Reads a search configuration from a key-value file.
pub fn search_config(path: &Path) -> CliResult<SearchConfig> {
    let table = io::read_keyfile(path)?;
    let bad = |key: &str, what: &str| CliError::Domain(format!("{}: `{key}` must be {what}", path.display()));
    let int = |key: &str| -> CliResult<Option<u64>> {
        table
            .get(key)
            .map(|v| v.as_integer().filter(|i| *i >= 0).map(|i| i as u64).ok_or_else(|| bad(key, "a non-negative integer")))
            .transpose()
    };
    let num = |key: &str| -> CliResult<Option<f64>> {
        table
            .get(key)
            .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)).ok_or_else(|| bad(key, "a number")))
            .transpose()
    };
    let text = |key: &str| -> CliResult<Option<String>> {
        table
            .get(key)
            .map(|v| v.as_str().map(String::from).ok_or_else(|| bad(key, "a string")))
            .transpose()
    };
    const KEYS: [&str; 16] = [
        "population_size",
        "total_evaluations",
        "tournament_size",
        "crossover",
        "crossover_prob",
        "mutation_prob",
        "skewness",
        "scoring",
        "seed",
        "max_depth",
        "fitness",
        "target",
        "target_depth",
        "motif",
        "diversity_every",
        "stop_at",
    ];
    if let Some(k) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(CliError::Usage(format!("{}: unknown key `{k}`", path.display())));
    }
    let scoring = match text("scoring")? {
        Some(s) => ScoringMatrix::preset(s.parse::<Preset>()?),
        None => ScoringMatrix::sm0(),
    };
    let seed = int("seed")?.unwrap_or(0);
    let tree_of = |key: &str, s: String| parse_tree(&s).map_err(|e| CliError::Domain(format!("{}: `{key}`: {e}", path.display())));
    let fitness = match text("fitness")?.as_deref().unwrap_or("target-distance") {
        "target-distance" => {
            let target = match text("target")? {
                Some(s) => tree_of("target", s)?,
                None => {
                    let depth = int("target_depth")?.unwrap_or(3) as usize;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(TARGET_SEED_OFFSET));
                    sample_tree(&GrammarConfig::with_max_depth(depth), &mut rng)
                }
            };
            FitnessSpec::TargetDistance { target, scoring }
        }
        "motif-count" => {
            let motif = text("motif")?.ok_or_else(|| bad("motif", "set for motif-count fitness"))?;
            FitnessSpec::MotifCount {
                motif: tree_of("motif", motif)?,
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "{}: unknown fitness `{other}` (expected target-distance or motif-count)",
                path.display()
            )))
        }
    };
    let mut config = SearchConfig::new(fitness);
    config.scoring = scoring;
    config.seed = seed;
    if let Some(v) = int("population_size")? {
        config.population_size = v as usize;
    }
    if let Some(v) = int("total_evaluations")? {
        config.total_evaluations = v as usize;
    }
    if let Some(v) = int("tournament_size")? {
        config.tournament_size = v as usize;
    }
    if let Some(v) = text("crossover")? {
        config.crossover = v.parse()?;
    }
    if let Some(v) = num("crossover_prob")? {
        config.crossover_prob = v;
    }
    if let Some(v) = num("mutation_prob")? {
        config.mutation_prob = v;
    }
    if let Some(v) = num("skewness")? {
        config.skewness = v;
    }
    if let Some(v) = int("max_depth")? {
        config.grammar = GrammarConfig::with_max_depth(v as usize);
    }
    if let Some(v) = int("diversity_every")? {
        config.diversity_every = v as usize;
    }
    config.stop_at = num("stop_at")?;
    config.check()?;
    Ok(config)
}
