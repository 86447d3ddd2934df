//! The three subcommands. Each writes its numeric artifacts (CSV, JSON)
//! first and renders SVG plots from the same in-memory data afterwards.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::offsets::{read_offsets, write_offsets};
use crate::plot;
use raceline::baseline::{compare as compare_methods, CompareSetup, ComparisonReport, Exclusion, Method};
use raceline::bayesopt::{run_with_observer, RaceLine};
use raceline::lap::{LapEvaluation, LapTimeEvaluator};
use raceline::par::Parallelism;
use raceline::speed::{gg_points, SpeedProfile};
use raceline::track::{load_track, select_nodes_weighted, CenterLine, OffsetVector};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Share of the friction limit counted as "on the boundary" of the GG
/// diagram.
pub const NEAR_BOUNDARY: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GgStats {
    /// Largest `sqrt(a_long^2 + a_lat^2) / (mu_s g)` along the profile.
    pub max_ratio: f64,
    /// Fraction of segments at or above [`NEAR_BOUNDARY`] of the limit.
    pub near_boundary_fraction: f64,
}

pub fn gg_stats(profile: &SpeedProfile) -> GgStats {
    let ratios: Vec<f64> = gg_points(profile)
        .iter()
        .map(|(lat, long)| lat.hypot(*long) / profile.friction_accel)
        .collect();
    let near = ratios.iter().filter(|r| **r >= NEAR_BOUNDARY).count();
    GgStats {
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        near_boundary_fraction: near as f64 / ratios.len().max(1) as f64,
    }
}

fn parallelism(cfg: &RunConfig) -> Parallelism {
    if cfg.jobs == Some(1) {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

/// Runs `f` on a pool limited to `cfg.jobs` threads when a limit is set.
fn with_jobs<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = cfg.jobs.filter(|j| *j > 1) {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
        return Ok(pool.install(f));
    }
    let _ = cfg;
    Ok(f())
}

/// Center line and lap-time evaluator described by `cfg`.
pub fn evaluator(cfg: &RunConfig) -> Result<(CenterLine, LapTimeEvaluator), CliError> {
    let center = load_track(&cfg.track)?;
    let nodes = select_nodes_weighted(&center, cfg.nodes, cfg.corner_weight)?;
    let mut ev = LapTimeEvaluator::new(nodes, cfg.vehicle, cfg.resample)?;
    ev.v0 = 0.0;
    Ok((center, ev))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", cfg.out.display())))?;
    Ok(cfg.out.clone())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let context = format!("cannot write {}", path.display());
    let file = File::create(path).map_err(CliError::io(context.clone()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(CliError::io(context))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_file(path, |w| w.write_all(text.as_bytes()))
}

fn write_gg_csv<W: Write>(mut out: W, profile: &SpeedProfile) -> std::io::Result<()> {
    writeln!(out, "s_m,a_lat_mps2,a_long_mps2")?;
    for (s, (lat, long)) in profile.arc.iter().zip(gg_points(profile)) {
        writeln!(out, "{s},{lat},{long}")?;
    }
    Ok(())
}

/// `raceline.csv`, `gg.csv` and their plots for one evaluated trajectory.
fn write_profile_artifacts(dir: &Path, center: &CenterLine, eval: &LapEvaluation, label: &str) -> Result<(), CliError> {
    let profile = &eval.profile;
    write_file(&dir.join("raceline.csv"), |w| profile.write_csv(w))?;
    write_file(&dir.join("gg.csv"), |w| write_gg_csv(w, profile))?;
    let title = format!("{label}: lap time {:.3} s", profile.lap_time);
    write_text(&dir.join("raceline.svg"), &plot::raceline_svg(center, profile, &title))?;
    write_text(
        &dir.join("gg.svg"),
        &plot::gg_svg(&gg_points(profile), profile.friction_accel, "GG diagram"),
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct OptimizeSummary {
    pub command: &'static str,
    pub lap_time_s: f64,
    pub center_lap_time_s: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub seed: u64,
    pub runtime_s: f64,
    pub gg: GgStats,
    pub w_best_m: Vec<f64>,
    pub config: RunConfig,
}

pub struct OptimizeOutcome {
    pub summary: OptimizeSummary,
    pub line: RaceLine,
}

pub fn optimize(cfg: &RunConfig) -> Result<OptimizeOutcome, CliError> {
    let start = Instant::now();
    let (center, ev) = evaluator(cfg)?;
    let dir = out_dir(cfg)?;
    let mut opt = cfg.optimizer.clone();
    opt.parallelism = parallelism(cfg);
    let center_time = ev.lap_time(&OffsetVector::zeros(ev.dim()))?;
    log::info!("center line lap time {center_time:.4} s, {} nodes", ev.dim());
    let line = with_jobs(cfg, || {
        run_with_observer(&ev, &opt, |state| {
            if let Some(r) = state.history.last() {
                log::info!("step {:>3}: tau {:.4} s, best {:.4} s", r.iteration, r.tau, r.tau_best);
            }
        })
    })??;
    let state = &line.state;
    write_file(&dir.join("history.csv"), |w| state.write_history_csv(w))?;
    write_file(&dir.join("w_best.csv"), |w| write_offsets(w, &ev.nodes, line.w_best()))?;
    let summary = OptimizeSummary {
        command: "optimize",
        lap_time_s: line.lap_time(),
        center_lap_time_s: center_time,
        evaluations: state.taus.len(),
        iterations: state.history.len(),
        seed: cfg.optimizer.rng_seed,
        runtime_s: start.elapsed().as_secs_f64(),
        gg: gg_stats(&line.best.profile),
        w_best_m: line.w_best().0.clone(),
        config: cfg.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_text(&dir.join("summary.json"), &(json + "\n"))?;
    write_profile_artifacts(&dir, &center, &line.best, "racing line")?;
    Ok(OptimizeOutcome { summary, line })
}

pub struct EvaluateOutcome {
    pub lap_time: f64,
    pub evaluation: LapEvaluation,
}

pub fn evaluate(cfg: &RunConfig, offsets: &Path) -> Result<EvaluateOutcome, CliError> {
    let (center, ev) = evaluator(cfg)?;
    let w = read_offsets(offsets)?;
    let evaluation = ev.evaluate_full(&w)?;
    let dir = out_dir(cfg)?;
    write_profile_artifacts(&dir, &center, &evaluation, "trajectory")?;
    Ok(EvaluateOutcome {
        lap_time: evaluation.lap_time(),
        evaluation,
    })
}

#[derive(Debug, Serialize)]
pub struct MethodFinal {
    pub method: Method,
    pub n_runs: usize,
    pub final_mean_s: f64,
    pub final_lower_s: f64,
    pub final_upper_s: f64,
}

#[derive(Debug, Serialize)]
pub struct CompareSummary {
    pub command: &'static str,
    pub evaluations: usize,
    pub runs: usize,
    pub methods: Vec<MethodFinal>,
    pub exclusions: Vec<Exclusion>,
    pub runtime_s: f64,
    pub config: RunConfig,
}

pub fn compare(cfg: &RunConfig) -> Result<(ComparisonReport, CompareSummary), CliError> {
    if cfg.compare.runs < 2 {
        return Err(CliError::Usage(format!(
            "--runs must be at least 2 to form confidence bands, got {}",
            cfg.compare.runs
        )));
    }
    if cfg.compare.evaluations < cfg.optimizer.n_init
        && cfg.compare.methods.iter().any(|m| *m != Method::Random)
    {
        return Err(CliError::Config(format!(
            "{} evaluations per run cannot cover the {} initial samples",
            cfg.compare.evaluations, cfg.optimizer.n_init
        )));
    }
    let start = Instant::now();
    let (_, ev) = evaluator(cfg)?;
    let dir = out_dir(cfg)?;
    // Runs are spread over the workers; each run is sequential inside.
    let setup = CompareSetup {
        evaluations: cfg.compare.evaluations,
        optimizer: raceline::bayesopt::OptConfig {
            parallelism: Parallelism::Sequential,
            ..cfg.optimizer.clone()
        },
        base_seed: cfg.optimizer.rng_seed,
        identical_seeds: cfg.compare.identical_seeds,
        parallelism: parallelism(cfg),
    };
    let report = with_jobs(cfg, || compare_methods(&ev, &cfg.compare.methods, cfg.compare.runs, &setup))??;
    write_file(&dir.join("comparison.csv"), |w| report.write_csv(w))?;
    write_text(&dir.join("comparison.json"), &(report.to_json() + "\n"))?;
    let summary = CompareSummary {
        command: "compare",
        evaluations: report.evaluations,
        runs: report.n_runs,
        methods: report
            .methods
            .iter()
            .map(|m| MethodFinal {
                method: m.method,
                n_runs: m.n_runs,
                final_mean_s: m.final_mean(),
                final_lower_s: m.final_band().0,
                final_upper_s: m.final_band().1,
            })
            .collect(),
        exclusions: report.exclusions.clone(),
        runtime_s: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_text(&dir.join("summary.json"), &(json + "\n"))?;
    let title = format!("best lap time over {} runs", report.n_runs);
    write_text(&dir.join("comparison.svg"), &plot::comparison_svg(&report, &title))?;
    Ok((report, summary))
}
