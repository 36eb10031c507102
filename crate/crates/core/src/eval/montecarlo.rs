use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{map_error, relative_map_error};
use crate::eval::report::RunReport;
use crate::graph::PoseGraph;
use crate::optimizer::{optimize, OptimizerConfig};
use crate::pruning::{prune_vertices, Marginalization, PruneLog, PruningConfig};
use crate::synthetic::{add_noise, corrupt_loop_closures, gen_grid, CorruptionSpec, GridSpec, GroundTruth, NoiseSpec};

/// What happens to the graph before optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    None,
    Sid,
    ChowLiu,
}

impl Method {
    pub fn marginalization(self) -> Option<Marginalization> {
        match self {
            Method::None => None,
            Method::Sid => Some(Marginalization::Sid),
            Method::ChowLiu => Some(Marginalization::ChowLiu),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.marginalization() {
            None => f.write_str("none"),
            Some(m) => m.fmt(f),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Method::None),
            other => match other.parse::<Marginalization>()? {
                Marginalization::Sid => Ok(Method::Sid),
                Marginalization::ChowLiu => Ok(Method::ChowLiu),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub name: String,
    pub grid: GridSpec,
    /// Noise levels; the seed field is replaced per run.
    pub noise: NoiseSpec,
    pub fractions: Vec<f64>,
    pub runs: usize,
    pub methods: Vec<Method>,
    pub pruning: PruningConfig,
    pub optimizer: OptimizerConfig,
    /// Every run seed is derived from this one.
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub jobs: usize,
}

impl MonteCarloConfig {
    pub fn run_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.runs).map(|_| rng.random()).collect()
    }
}

/// Quantiles over runs for one (method, corruption fraction) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCell {
    pub method: Method,
    pub fraction: f64,
    pub runs: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    /// Per-run mean vertex position error, in seed order. Failed runs are `+∞`.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub cells: Vec<MonteCarloCell>,
    pub seeds: Vec<u64>,
    /// Ordered by (seed, fraction, method).
    pub reports: Vec<RunReport>,
    /// sid-pruned runs whose corrupted loop-closure count was checked not to grow.
    pub sid_runs_checked: usize,
    /// Chow–Liu marginalizations with exactly one corrupted edge among
    /// distinct neighbors, each checked to produce `neighbors − 1` corrupted
    /// candidates.
    pub single_corruption_cliques: usize,
}

impl MonteCarloResult {
    pub fn cell(&self, method: Method, fraction: f64) -> Option<&MonteCarloCell> {
        self.cells.iter().find(|c| c.method == method && c.fraction == fraction)
    }
}

/// Linear-interpolation quantile of sorted data; `+∞` entries propagate.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let t = pos - lo as f64;
    if t == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else if sorted[hi].is_infinite() {
        sorted[hi]
    } else {
        sorted[lo] + t * (sorted[hi] - sorted[lo])
    }
}

struct Outcome {
    error: f64,
    report: RunReport,
    sid_checked: bool,
    single_corruption_cliques: usize,
}

/// Checks the bookkeeping claims of the two marginalization schemes on one
/// pruning log and returns how many single-corruption cliques were checked.
fn check_log(method: Method, log: &PruneLog, before: usize, after: usize) -> Result<usize> {
    if method == Method::Sid && after > before {
        return Err(Error::InvariantViolated(format!(
            "sid marginalization increased corrupted loop closures from {before} to {after}"
        )));
    }
    let mut checked = 0;
    for c in log.cliques() {
        if c.corrupted_incident == 1 && c.incident_edges == c.neighbors && c.neighbors >= 2 {
            if c.corrupted_candidates != c.neighbors - 1 {
                return Err(Error::InvariantViolated(format!(
                    "clique over {} neighbors with one corrupted edge produced {} corrupted candidates",
                    c.neighbors, c.corrupted_candidates
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn run_one(
    cfg: &MonteCarloConfig,
    base: &PoseGraph,
    truth: &GroundTruth,
    seed: u64,
    fraction: f64,
    method: Method,
) -> Result<Outcome> {
    let mut g = base.clone();
    let (vertices_before, edges_before) = (g.vertex_count(), g.edge_count());
    let corrupted_before = g.count_corrupted_loop_closures();

    let t0 = Instant::now();
    let mut single_corruption_cliques = 0;
    if let Some(m) = method.marginalization() {
        let log = prune_vertices(&mut g, &cfg.pruning, m)?;
        single_corruption_cliques =
            check_log(method, &log, corrupted_before, g.count_corrupted_loop_closures())?;
    }
    let prune_seconds = t0.elapsed().as_secs_f64();
    let corrupted_after = g.count_corrupted_loop_closures();

    let t1 = Instant::now();
    let solved = optimize(&mut g, &cfg.optimizer);
    let optimize_seconds = t1.elapsed().as_secs_f64();
    let converged = matches!(&solved, Ok(s) if s.converged);
    let (me, rme) = match solved {
        Ok(_) => (Some(map_error(&g, truth)?), Some(relative_map_error(&g, truth)?)),
        Err(Error::SingularSystem(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let error = me.as_ref().map_or(f64::INFINITY, |m| m.translation_mean);
    let error = if error.is_finite() { error } else { f64::INFINITY };
    let pick = |m: &Option<crate::eval::MetricResult>, f: fn(&crate::eval::MetricResult) -> f64| {
        m.as_ref().map_or(f64::INFINITY, f)
    };
    let report = RunReport {
        config_name: cfg.name.clone(),
        seed,
        corruption_fraction: fraction,
        method: method.to_string(),
        te_translation_mean: None,
        te_translation_sd: None,
        te_rotation_mean_deg: None,
        te_rotation_sd_deg: None,
        me_translation_mean: pick(&me, |m| m.translation_mean),
        me_translation_sd: pick(&me, |m| m.translation_sd),
        me_rotation_mean_deg: pick(&me, |m| m.rotation_mean_deg),
        me_rotation_sd_deg: pick(&me, |m| m.rotation_sd_deg),
        rme_translation_mean: pick(&rme, |m| m.translation_mean),
        rme_translation_sd: pick(&rme, |m| m.translation_sd),
        rme_rotation_mean_deg: pick(&rme, |m| m.rotation_mean_deg),
        rme_rotation_sd_deg: pick(&rme, |m| m.rotation_sd_deg),
        rme_mean_pair_distance: pick(&rme, |m| m.mean_pair_distance.unwrap_or(f64::NAN)),
        vertices_before,
        vertices_after: g.vertex_count(),
        edges_before,
        edges_after: g.edge_count(),
        corrupted_before,
        corrupted_after,
        converged,
        prune_seconds,
        optimize_seconds,
    };
    Ok(Outcome {
        error,
        report,
        sid_checked: method == Method::Sid,
        single_corruption_cliques,
    })
}

/// The noisy, corrupted graph shared by every method for one seed and fraction.
/// Vertex poses start at the ground truth.
pub fn build_instance(cfg: &MonteCarloConfig, seed: u64, fraction_index: usize) -> Result<(PoseGraph, GroundTruth)> {
    let (mut g, truth) = gen_grid(&cfg.grid)?;
    add_noise(&mut g, &cfg.noise.with_seed(seed))?;
    let corruption_seed = seed ^ (fraction_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let spec = CorruptionSpec::for_grid(cfg.fractions[fraction_index], corruption_seed, &cfg.grid);
    corrupt_loop_closures(&mut g, &spec)?;
    Ok((g, truth))
}

/// Generates, corrupts, prunes and optimizes one grid per (seed, fraction)
/// and method, then reduces the per-run mean position errors to quantiles.
/// Results do not depend on the number of worker threads.
pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<MonteCarloResult> {
    if cfg.runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    if cfg.fractions.is_empty() || cfg.methods.is_empty() {
        return Err(Error::InvalidArgument("need at least one fraction and one method".into()));
    }
    cfg.pruning.validate()?;
    cfg.optimizer.validate()?;
    let seeds = cfg.run_seeds();
    let jobs: Vec<(usize, u64, usize)> = seeds
        .iter()
        .enumerate()
        .flat_map(|(r, s)| (0..cfg.fractions.len()).map(move |f| (r, *s, f)))
        .collect();

    let work = || -> Result<Vec<Vec<Outcome>>> {
        jobs.par_iter()
            .map(|&(_, seed, f)| {
                let (g, truth) = build_instance(cfg, seed, f)?;
                cfg.methods
                    .iter()
                    .map(|&m| run_one(cfg, &g, &truth, seed, cfg.fractions[f], m))
                    .collect()
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let outcomes = pool.install(work)?;

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for (fi, &fraction) in cfg.fractions.iter().enumerate() {
            let mi = cfg.methods.iter().position(|m| *m == method).unwrap();
            let errors: Vec<f64> = jobs
                .iter()
                .zip(&outcomes)
                .filter(|((_, _, f), _)| *f == fi)
                .map(|(_, o)| o[mi].error)
                .collect();
            let mut sorted = errors.clone();
            sorted.sort_by(f64::total_cmp);
            cells.push(MonteCarloCell {
                method,
                fraction,
                runs: errors.len(),
                q25: quantile(&sorted, 0.25),
                median: quantile(&sorted, 0.5),
                q75: quantile(&sorted, 0.75),
                errors,
            });
        }
    }
    let flat: Vec<&Outcome> = outcomes.iter().flatten().collect();
    Ok(MonteCarloResult {
        cells,
        seeds,
        reports: flat.iter().map(|o| o.report.clone()).collect(),
        sid_runs_checked: flat.iter().filter(|o| o.sid_checked).count(),
        single_corruption_cliques: flat.iter().map(|o| o.single_corruption_cliques).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[2.0], 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, f64::INFINITY], 0.75), f64::INFINITY);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, f64::INFINITY], 0.5), 2.5);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::None, Method::Sid, Method::ChowLiu] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    fn small(runs: usize, noise: NoiseSpec, fractions: Vec<f64>, methods: Vec<Method>) -> MonteCarloConfig {
        let mut pruning = PruningConfig::aggressive();
        pruning.keep_recent = 10;
        pruning.min_prunable = 10;
        MonteCarloConfig {
            name: "test".into(),
            grid: GridSpec::new(8, 8, 0.3),
            noise,
            fractions,
            runs,
            methods,
            pruning,
            optimizer: OptimizerConfig::default(),
            seed: 9,
            jobs: 1,
        }
    }

    #[test]
    fn exact_case_recovers_ground_truth() {
        let r = run_monte_carlo(&small(1, NoiseSpec::zero(0), vec![0.0], vec![Method::None])).unwrap();
        let c = &r.cells[0];
        assert!(c.median < 1e-6);
        assert_eq!((c.q25, c.median, c.q75), (c.errors[0], c.errors[0], c.errors[0]));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let mut cfg = small(3, NoiseSpec::default(), vec![0.0, 0.2], vec![Method::None, Method::Sid, Method::ChowLiu]);
        let a = run_monte_carlo(&cfg).unwrap();
        cfg.jobs = 3;
        let b = run_monte_carlo(&cfg).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.seeds, b.seeds);
        assert_eq!(a.sid_runs_checked, 6);
        for c in &a.cells {
            assert!(c.q25 <= c.median && c.median <= c.q75);
        }
    }
}
