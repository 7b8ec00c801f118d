//! Runtime scaling of the alignment methods and the graph-edit oracle.
//!
//! Size is the serialised token count without the start token. Timings
//! exclude serialisation and graph construction.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use cswx_core::cswx::align;
use cswx_core::grammar::{grow_tree, ExpansionWeights, GrammarConfig};
use cswx_core::math::{linear_fit, median};
use cswx_core::oracle::{ged_sepx_path_with_abort, SmallGraph, MAX_GED_NODES};
use cswx_core::rcswx::{align_recursive, brute_force_visits, visit_bound};
use cswx_core::{serialise, DerivationTree, Error, Result, ScoringMatrix, SerialisedSequence};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Repeat quick measurements until at least this much time has passed.
const MIN_MEASURE: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchMethod {
    Cswx,
    Rcswx,
    Sepx,
}

impl BenchMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Cswx => "cswx",
            BenchMethod::Rcswx => "rcswx",
            BenchMethod::Sepx => "sepx",
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cswx" => Ok(BenchMethod::Cswx),
            "rcswx" => Ok(BenchMethod::Rcswx),
            "sepx" => Ok(BenchMethod::Sepx),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected cswx, rcswx or sepx)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub samples: usize,
    pub methods: Vec<BenchMethod>,
    pub seed: u64,
    /// Sample pairs without routing or branching modules.
    pub branch_free: bool,
    pub timeout: Duration,
    pub scoring: ScoringMatrix,
}

impl BenchConfig {
    pub fn new(sizes: Vec<usize>, samples: usize, methods: Vec<BenchMethod>) -> Self {
        BenchConfig {
            sizes,
            samples,
            methods,
            seed: 0,
            branch_free: false,
            timeout: Duration::from_secs(120),
            scoring: ScoringMatrix::sm0(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: BenchMethod,
    pub size: usize,
    pub sample: usize,
    /// Token counts without the start token.
    pub nodes: (usize, usize),
    /// Seconds per call; for censored runs, the time until the timeout.
    pub seconds: f64,
    /// DP cells filled, or search nodes expanded by the graph oracle.
    pub cell_visits: u64,
    pub variant_peak: u64,
    /// `sum_ij 2^(d_i + d_j)` for the pair.
    pub visit_bound: u64,
    /// Cells filled by aligning every branch-order combination separately.
    pub brute_force_visits: u64,
    pub censored: bool,
}

pub const CSV_HEADER: [&str; 11] = [
    "method",
    "size",
    "sample",
    "nodes1",
    "nodes2",
    "seconds",
    "cell_visits",
    "variant_peak",
    "visit_bound",
    "brute_force_visits",
    "censored",
];

impl BenchRecord {
    pub fn csv_row(&self) -> [String; 11] {
        [
            self.method.name().into(),
            self.size.to_string(),
            self.sample.to_string(),
            self.nodes.0.to_string(),
            self.nodes.1.to_string(),
            format!("{:e}", self.seconds),
            self.cell_visits.to_string(),
            self.variant_peak.to_string(),
            self.visit_bound.to_string(),
            self.brute_force_visits.to_string(),
            self.censored.to_string(),
        ]
    }
}

/// Pairs of trees with exactly `size + 1` tokens each.
pub fn bench_pairs(config: &BenchConfig, size: usize) -> Vec<(DerivationTree, DerivationTree)> {
    let mut grammar = GrammarConfig::with_max_depth(64);
    if config.branch_free {
        grammar.weights = ExpansionWeights::branch_free();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (size as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut grow = || loop {
        if let Some(t) = grow_tree(&grammar, size + 1, &mut rng) {
            break t;
        }
    };
    (0..config.samples).map(|_| (grow(), grow())).collect()
}

fn time_per_call(mut f: impl FnMut()) -> f64 {
    let start = Instant::now();
    let mut calls = 0u32;
    while calls == 0 || start.elapsed() < MIN_MEASURE {
        f();
        calls += 1;
    }
    start.elapsed().as_secs_f64() / f64::from(calls)
}

fn measure(
    method: BenchMethod,
    s1: &SerialisedSequence,
    s2: &SerialisedSequence,
    graphs: Option<&(SmallGraph, SmallGraph)>,
    config: &BenchConfig,
) -> Result<Option<(f64, u64, u64, bool)>> {
    let m = &config.scoring;
    Ok(match method {
        BenchMethod::Cswx => {
            let stats = align(s1, s2, m)?.stats;
            let secs = time_per_call(|| {
                let _ = std::hint::black_box(align(s1, s2, m));
            });
            Some((secs, stats.cell_visits, stats.variant_peak, false))
        }
        BenchMethod::Rcswx => {
            let stats = align_recursive(s1, s2, m)?.stats;
            let secs = time_per_call(|| {
                let _ = std::hint::black_box(align_recursive(s1, s2, m));
            });
            Some((secs, stats.cell_visits, stats.variant_peak, false))
        }
        BenchMethod::Sepx => {
            let Some((g1, g2)) = graphs else { return Ok(None) };
            let start = Instant::now();
            let abort = || start.elapsed() > config.timeout;
            match ged_sepx_path_with_abort(g1, g2, m, &abort) {
                Ok(p) => {
                    let first = start.elapsed().as_secs_f64();
                    let secs = if first < MIN_MEASURE.as_secs_f64() {
                        time_per_call(|| {
                            let _ = std::hint::black_box(ged_sepx_path_with_abort(g1, g2, m, &|| false));
                        })
                    } else {
                        first
                    };
                    Some((secs, p.expansions, 0, false))
                }
                Err(Error::Aborted) => Some((start.elapsed().as_secs_f64(), 0, 0, true)),
                Err(e) => return Err(e),
            }
        }
    })
}

/// Times every method on `samples` pairs per size. The graph oracle is only
/// run on pairs whose graphs fit its node limit.
pub fn scaling_benchmark(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if config.sizes.iter().any(|&s| s < 2) {
        return Err(Error::InvalidArgument("sizes must be at least 2".into()));
    }
    let mut out = Vec::new();
    for &size in &config.sizes {
        for (sample, (a, b)) in bench_pairs(config, size).iter().enumerate() {
            let (s1, s2) = (serialise(a), serialise(b));
            let graphs = match (SmallGraph::from_tree(a), SmallGraph::from_tree(b)) {
                (Ok(g1), Ok(g2)) if g1.len() <= MAX_GED_NODES && g2.len() <= MAX_GED_NODES => Some((g1, g2)),
                _ => None,
            };
            let bound = visit_bound(&s1, &s2)?;
            let brute = brute_force_visits(&s1, &s2)?;
            for &method in &config.methods {
                if let Some((seconds, cell_visits, variant_peak, censored)) =
                    measure(method, &s1, &s2, graphs.as_ref(), config)?
                {
                    out.push(BenchRecord {
                        method,
                        size,
                        sample,
                        nodes: (s1.len() - 1, s2.len() - 1),
                        seconds,
                        cell_visits,
                        variant_peak,
                        visit_bound: bound,
                        brute_force_visits: brute,
                        censored,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Median seconds of `method` at `size`.
pub fn median_seconds(records: &[BenchRecord], method: BenchMethod, size: usize) -> Option<f64> {
    let times: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method && r.size == size)
        .map(|r| r.seconds)
        .collect();
    (!times.is_empty()).then(|| median(&times))
}

/// Slope of log(median seconds) against log(size) for `method`.
pub fn log_log_slope(records: &[BenchRecord], method: BenchMethod) -> Option<f64> {
    let mut sizes: Vec<usize> = records.iter().filter(|r| r.method == method).map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = sizes
        .iter()
        .map(|&s| median_seconds(records, method, s).expect("size present").ln())
        .collect();
    Some(linear_fit(&xs, &ys).slope)
}

pub fn render_csv(records: &[BenchRecord], header: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory writer");
    for r in records {
        w.write_record(r.csv_row()).expect("in-memory writer");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8");
    header.iter().map(|h| format!("# {h}\n")).collect::<String>() + &body
}
