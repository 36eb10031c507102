mod cli;
mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use sidprune::config::Preset;
use sidprune::eval::{map_error, relative_map_error, run_monte_carlo, trajectory_error, MetricResult, MonteCarloConfig};
use sidprune::graph::PoseGraph;
use sidprune::io::{export_report, parse_graph, parse_ground_truth, serialize_graph, serialize_ground_truth};
use sidprune::optimizer::{optimize, OptimizerConfig, RobustKernel};
use sidprune::pruning::{prune_edges, prune_vertices, PruningConfig};
use sidprune::synthetic::{
    add_noise, corrupt_loop_closures, gen_grid, gen_random_trajectory, CorruptionSpec, GridSpec, GroundTruth,
    NoiseSpec, TrajectorySpec,
};
use sidprune::Error;

use cli::{Cli, Command, EvalArgs, Generate, MonteCarloArgs, NoiseArgs, OptimizeArgs, PruneArgs, ThresholdArgs};

/// Failures, split by exit code.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Usage(m),
            other => Failure::Data(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<PoseGraph, Failure> {
    parse_graph(&read(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Writes to stdout, exiting quietly once the reader has gone away.
fn emit(text: &str) {
    let mut out = io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: stdout: {e}");
        std::process::exit(2);
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn scaled_noise(scale: f64, seed: u64) -> Result<NoiseSpec, Failure> {
    if !(scale >= 0.0) {
        return Err(Failure::Usage(format!("sigma must be non-negative, got {scale}")));
    }
    let d = NoiseSpec::default();
    Ok(NoiseSpec {
        odometry_sigma: d.odometry_sigma.map(|s| s * scale),
        loop_sigma: d.loop_sigma.map(|s| s * scale),
        seed,
    })
}

fn finish_generated(mut g: PoseGraph, truth: GroundTruth, noise: &NoiseArgs, arena: [f64; 4]) -> CmdResult {
    if noise.sigma > 0.0 {
        add_noise(&mut g, &scaled_noise(noise.sigma, noise.seed)?)?;
    } else if noise.sigma < 0.0 {
        return Err(Failure::Usage("sigma must be non-negative".into()));
    }
    if noise.corrupt > 0.0 {
        let spec = CorruptionSpec {
            fraction: noise.corrupt,
            seed: noise.seed,
            arena,
        };
        corrupt_loop_closures(&mut g, &spec)?;
    }
    match &noise.out {
        Some(out) => {
            write(out, &serialize_graph(&g))?;
            write(&with_suffix(out, ".gt"), &serialize_ground_truth(&truth))?;
            eprintln!("wrote {} vertices, {} edges to {}", g.vertex_count(), g.edge_count(), out.display());
        }
        None => emit(&serialize_graph(&g)),
    }
    Ok(())
}

fn cmd_generate(cmd: Generate) -> CmdResult {
    match cmd {
        Generate::Grid(a) => {
            let spec = GridSpec {
                radius_factor: a.radius_factor,
                ..GridSpec::new(a.rows, a.cols, a.spacing)
            };
            let (g, truth) = gen_grid(&spec)?;
            let arena = CorruptionSpec::for_grid(0.0, 0, &spec).arena;
            finish_generated(g, truth, &a.noise, arena)
        }
        Generate::Random(a) => {
            let spec = TrajectorySpec {
                bounds: [0.0, 0.0, a.size, a.size],
                step_length: a.step_length,
                loop_radius: a.loop_radius,
                ..TrajectorySpec::new(a.steps, a.noise.seed)
            };
            let (g, truth) = gen_random_trajectory(&spec)?;
            finish_generated(g, truth, &a.noise, spec.bounds)
        }
    }
}

/// Preset values overridden by explicit thresholds; `None` means no pruning.
fn resolve_thresholds(t: &ThresholdArgs) -> Result<Option<PruningConfig>, Failure> {
    let preset = t.preset.unwrap_or(Preset::Aggressive);
    let Some(mut cfg) = preset.pruning() else {
        if t.any_explicit() {
            return Err(Failure::Usage(format!("{preset} disables pruning; drop the explicit thresholds")));
        }
        return Ok(None);
    };
    if let Some(v) = t.s_hat {
        cfg.density_threshold = v;
    }
    if let Some(v) = t.big_n_hat {
        cfg.neighbor_count = v;
    }
    if let Some(v) = t.n_hat {
        cfg.min_prunable = v;
    }
    if let Some(v) = t.m_hat {
        cfg.keep_recent = v;
    }
    if let Some(v) = t.e_hat {
        cfg.max_edges_per_vertex = v;
    }
    if let Some(v) = t.d_hat {
        cfg.max_path_ratio = v;
    }
    if let Some(v) = t.gate {
        cfg.mahalanobis_gate = v;
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn cmd_prune(a: PruneArgs) -> CmdResult {
    let cfg = resolve_thresholds(&a.thresholds)?;
    let mut g = load_graph(&a.input)?;
    let (v0, e0) = (g.vertex_count(), g.edge_count());
    let mut log = sidprune::pruning::PruneLog::new();
    if let Some(cfg) = cfg {
        log.extend(prune_vertices(&mut g, &cfg, a.method)?);
        log.extend(prune_edges(&mut g, &cfg)?);
    }
    write(&a.out, &serialize_graph(&g))?;
    write(&a.log.unwrap_or_else(|| with_suffix(&a.out, ".log")), &log.to_text())?;
    emit(&format!("vertices {v0} -> {}\nedges {e0} -> {}\n", g.vertex_count(), g.edge_count()));
    Ok(())
}

fn cmd_optimize(a: OptimizeArgs) -> CmdResult {
    let mut g = load_graph(&a.input)?;
    let cfg = OptimizerConfig {
        max_iterations: a.max_iterations,
        kernel: a.huber.map_or(RobustKernel::None, |delta| RobustKernel::Huber { delta }),
        ..OptimizerConfig::default()
    };
    let stats = optimize(&mut g, &cfg)?;
    write(&a.out, &serialize_graph(&g))?;
    let mut trace = String::new();
    for (i, c) in stats.chi2_trace.iter().enumerate() {
        let _ = writeln!(trace, "{i} {c:.10e}");
    }
    match a.trace {
        Some(p) => write(&p, &trace)?,
        None => emit(&trace),
    }
    eprintln!(
        "{} after {} iterations, chi2 {:.6e}",
        if stats.converged { "converged" } else { "stopped" },
        stats.iterations,
        stats.final_chi2()
    );
    Ok(())
}

fn metric_line(label: &str, m: &MetricResult) -> String {
    let mut s = format!(
        "{label:<4}translation {:.6} ± {:.6} m  rotation {:.6} ± {:.6} deg  ({} items)",
        m.translation_mean,
        m.translation_sd,
        m.rotation_mean_deg,
        m.rotation_sd_deg,
        m.translation_errors.len()
    );
    if let Some(d) = m.mean_pair_distance {
        let _ = write!(s, "  mean pair distance {d:.6} m");
    }
    s
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let est = load_graph(&a.estimate)?;
    let ref_path = a.reference.unwrap_or_else(|| with_suffix(&a.estimate, ".gt"));
    let reference =
        parse_ground_truth(&read(&ref_path)?).map_err(|e| Failure::Data(format!("{}: {e}", ref_path.display())))?;

    let me = map_error(&est, &reference)?;
    let rme = relative_map_error(&est, &reference)?;
    // Without per-step snapshots the trajectory is the final pose stream in insertion order.
    let mut order: Vec<_> = est.vertices().collect();
    order.sort_by_key(|v| v.seq);
    let stream: Vec<_> = order.iter().map(|v| v.pose).collect();
    let ref_stream: Vec<_> = order.iter().map(|v| reference[&v.id]).collect();
    let te = trajectory_error(&stream, &ref_stream)?;

    emit(&format!("{}\n{}\n{}\n", metric_line("TE", &te), metric_line("ME", &me), metric_line("RME", &rme)));
    Ok(())
}

fn cmd_montecarlo(a: MonteCarloArgs) -> CmdResult {
    let pruning = resolve_thresholds(&a.thresholds)?.ok_or_else(|| {
        Failure::Usage("montecarlo needs pruning thresholds; use --methods none for an unpruned baseline".into())
    })?;
    let cfg = MonteCarloConfig {
        name: a.name,
        grid: GridSpec::new(a.rows, a.cols, a.spacing),
        noise: scaled_noise(a.sigma, 0)?,
        fractions: a.fractions,
        runs: a.runs,
        methods: a.methods,
        pruning,
        optimizer: OptimizerConfig::default()
            .with_kernel(a.huber.map_or(RobustKernel::None, |delta| RobustKernel::Huber { delta })),
        seed: a.seed,
        jobs: a.jobs,
    };
    cfg.grid.validate()?;
    let result = run_monte_carlo(&cfg)?;

    let mut table = format!("{:<10}{:>9}{:>6}{:>12}{:>12}{:>12}\n", "method", "fraction", "runs", "q25", "median", "q75");
    for c in &result.cells {
        let _ = writeln!(
            table,
            "{:<10}{:>9.3}{:>6}{:>12.6}{:>12.6}{:>12.6}",
            c.method.to_string(),
            c.fraction,
            c.runs,
            c.q25,
            c.median,
            c.q75
        );
    }
    emit(&table);
    if let Some(out) = a.out {
        write(&out, &export_report(&result.reports, a.format)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Generate(g) => cmd_generate(g),
        Command::Prune(a) => cmd_prune(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
