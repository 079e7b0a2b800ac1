//! `brwlab`: command-line front end.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 configuration
//! error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use brwlab::brw::{BrwConfig, DEFAULT_NODE_CAP};
use brwlab::check::{run_all, CheckContext, Status, Tier};
use brwlab::experiments::sweep::{self, append_manifest, green_for, read_rows, write_trace, SWEEP_CSV};
use brwlab::experiments::{
    estimate_mean_visits, estimate_visit, fit_scaling, run_sweep, rw_green_functional, ConfigError, ExperimentError,
    FitMode, RunConfig, RunOptions, RwMode, SweepOptions,
};
use brwlab::green::CacheOutcome;
use brwlab::oracle::{enumerate_depth, enumerate_small, solve_nonvisit, EnumerationReport, OracleError};

#[derive(Parser)]
#[command(name = "brwlab", version, about = "Critical branching random walk laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a configuration and print the derived moments.
    Validate(Common),
    /// Build (or load from cache) the Green table and dump it as CSV.
    Green(Common),
    /// Estimate P(visit a) and E N at one target.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Target, comma separated, e.g. 4,0,0,0.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        target: Vec<i64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
        node_cap: u64,
        /// Write a per-sample JSONL trace of this many samples.
        #[arg(long, default_value_t = 0)]
        trace_samples: u64,
    },
    /// Fixed-point bracket on P(visit a).
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        target: Vec<i64>,
        #[arg(long, default_value_t = 80)]
        radius: i64,
        #[arg(long, default_value_t = 1e-15)]
        tol: f64,
    },
    /// Exhaustive enumeration of small trees; prints path statistics.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        target: Vec<i64>,
        /// Cap on the number of particles.
        #[arg(long, conflicts_with = "depth")]
        max_nodes: Option<usize>,
        /// Cap on the generation instead.
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Run the configured |a| grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trace_samples: u64,
        /// Ignore rows of an earlier run.
        #[arg(long)]
        fresh: bool,
    },
    /// Green functional Σ G(S_i) along plain walks.
    Rwfunc {
        #[command(flatten)]
        common: Common,
        /// Exit radius (exit mode).
        #[arg(long, conflicts_with = "target")]
        radius: Option<u64>,
        /// Target (hitting mode).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        target: Vec<i64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 100_000_000)]
        step_cap: u64,
    },
    /// Fit a power law to the rows of a sweep CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Sweep CSV; defaults to <out>/sweep.csv.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "pure_power")]
        mode: String,
        #[arg(long)]
        dim: usize,
    },
    /// Run the acceptance suite.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "fast")]
        tier: String,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("I/O: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            ExperimentError::Io(e) => CliError::Io(e.to_string()),
            ExperimentError::Csv(e) => CliError::Io(e.to_string()),
            ExperimentError::Brw(e) => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<brwlab::green::GreenError> for CliError {
    fn from(e: brwlab::green::GreenError) -> Self {
        match e {
            brwlab::green::GreenError::Io(e) => CliError::Io(e.to_string()),
            brwlab::green::GreenError::RecurrentDimension(_) | brwlab::green::GreenError::NonSeparableStep => {
                CliError::Config(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::TargetDimension { .. } | OracleError::TargetOutsideBox | OracleError::NotExact => {
                CliError::Config(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<brwlab::brw::BrwConfigError> for CliError {
    fn from(e: brwlab::brw::BrwConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    Ok(RunConfig::load(path)?)
}

fn seed(common: &Common, cfg: &RunConfig) -> u64 {
    common.seed.unwrap_or(cfg.seed)
}

fn workers(common: &Common, cfg: &RunConfig) -> usize {
    common.workers.unwrap_or(cfg.workers)
}

fn target_of(cfg: &RunConfig, target: &[i64]) -> Result<Vec<i64>, CliError> {
    if target.len() != cfg.model.dim {
        return Err(CliError::Config(format!(
            "--target needs {} coordinates, got {}",
            cfg.model.dim,
            target.len()
        )));
    }
    Ok(target.to_vec())
}

fn manifest(out: &Path, cfg: &RunConfig, command: &str, started: Instant, extra: serde_json::Value) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    let mut entry = serde_json::json!({
        "command": command,
        "config_hash": cfg.hash,
        "wall_clock_s": started.elapsed().as_secs_f64(),
    });
    if let (Some(e), serde_json::Value::Object(x)) = (entry.as_object_mut(), extra) {
        e.extend(x);
    }
    append_manifest(out, &entry)?;
    Ok(())
}

fn print_paths(r: &EnumerationReport) {
    println!("steps,s,p,e,g,slack");
    for p in &r.paths {
        println!(
            "{},{},{},{},{},{}",
            p.step_word(),
            p.s(),
            p.p(),
            p.e(),
            p.g().map(|g| g.to_string()).unwrap_or_default(),
            p.slack
        );
    }
    eprintln!(
        "P(N>0) = {} ({}), excluded mass {}, (γ,l,m) events {}, factorization mismatches {}, p > s on {} paths",
        r.visit_probability,
        to_f64(&r.visit_probability),
        r.excluded(),
        r.factorization.events,
        r.factorization.exact_mismatches,
        r.p_exceeds_s
    );
}

fn to_f64(r: &num_rational::BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    match cli.command {
        Command::Validate(common) => {
            let cfg = load(&common)?;
            let off = cfg.model.offspring()?;
            let step = cfg.model.step()?;
            println!("config_hash {}", cfg.hash);
            println!(
                "offspring: mean {} variance {} P(mu>=2) {} P(mu=1) {} exact {}",
                off.mean(),
                off.variance(),
                off.p_ge2(),
                off.p1(),
                off.exact_atoms().is_some()
            );
            println!(
                "step: dim {} atoms {} mean {:?} moment5 {} range {} symmetric {} period {} exact {}",
                step.dim(),
                step.len(),
                step.mean_vec(),
                step.moment5(),
                step.range(),
                step.is_symmetric(),
                step.period(),
                step.exact_weights().is_some()
            );
            println!("step covariance {:?}", step.covariance());
        }
        Command::Green(common) => {
            let cfg = load(&common)?;
            let (table, cache) = green_for(&cfg, &common.out)?
                .ok_or_else(|| CliError::Config("the Green function is infinite for d ≤ 2".into()))?;
            let path = common.out.join(format!("green_{}_r{}.csv", table.method(), table.radius()));
            table.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            eprintln!(
                "G(0) = {}, harmonicity residual {:.2e}, cache {:?}, wrote {}",
                table.value(&vec![0; cfg.model.dim]),
                table.harmonicity_residual(),
                cache,
                path.display()
            );
            manifest(
                &common.out,
                &cfg,
                "green",
                started,
                serde_json::json!({ "green_cache": matches!(cache, CacheOutcome::Hit) }),
            )?;
        }
        Command::Sample {
            common,
            target,
            samples,
            node_cap,
            trace_samples,
        } => {
            let cfg = load(&common)?;
            let target = target_of(&cfg, &target)?;
            let table = green_for(&cfg, &common.out)?.map(|(t, _)| Arc::new(t));
            let brw = BrwConfig::new(cfg.model.offspring()?, cfg.model.step()?, &target, node_cap, table)?;
            let opts = RunOptions::new(seed(&common, &cfg))
                .cell(sweep::cell_id(&target))
                .workers(workers(&common, &cfg));
            std::fs::create_dir_all(&common.out)?;
            if trace_samples > 0 {
                write_trace(&brw, trace_samples, &opts, &common.out.join("trace.jsonl"))?;
            }
            let v = estimate_visit(&brw, samples, &opts);
            let m = estimate_mean_visits(&brw, samples, &opts);
            println!("quantity,estimate,stderr,n_samples,n_events,ci_lo,ci_hi,trunc_rate");
            for (name, r) in [("p_visit", v.report), ("mean_N", m.report)] {
                println!(
                    "{name},{},{},{},{},{},{},{}",
                    r.estimate, r.stderr, r.n_samples, r.n_events, r.ci95.0, r.ci95.1, r.truncation_rate
                );
            }
            if let Some((g, se)) = v.conditional_mean_g() {
                println!("mean_G_given_visit,{g},{se},{samples},{},,,", v.report.n_events);
            }
            manifest(&common.out, &cfg, "sample", started, serde_json::json!({ "target": target }))?;
        }
        Command::Oracle {
            common,
            target,
            radius,
            tol,
        } => {
            let cfg = load(&common)?;
            let target = target_of(&cfg, &target)?;
            let f = solve_nonvisit(&cfg.model.offspring()?, &cfg.model.step()?, &target, radius, 100_000_000, tol)?;
            let (lo, hi) = f.visit_bracket();
            println!("box_radius,visit_lower,visit_upper,width,residual,iterations,monotonicity_violations");
            println!(
                "{radius},{lo},{hi},{},{},{},{}",
                f.width(),
                f.residual,
                f.iterations,
                f.monotonicity_violations
            );
        }
        Command::Enumerate {
            common,
            target,
            max_nodes,
            depth,
        } => {
            let cfg = load(&common)?;
            let target = target_of(&cfg, &target)?;
            let (off, step) = (cfg.model.offspring()?, cfg.model.step()?);
            let r = match depth {
                Some(d) => enumerate_depth(&off, &step, &target, d)?,
                None => enumerate_small(&off, &step, &target, max_nodes.unwrap_or(9), None)?,
            };
            print_paths(&r);
        }
        Command::Sweep {
            common,
            trace_samples,
            fresh,
        } => {
            let cfg = load(&common)?;
            let o = run_sweep(
                &cfg,
                &common.out,
                &SweepOptions {
                    workers: common.workers,
                    seed: common.seed,
                    resume: !fresh,
                    trace_samples,
                },
            )?;
            eprintln!(
                "{} cells ({} reused), wrote {}",
                o.rows.len(),
                o.cells_reused,
                o.csv_path.display()
            );
            if let Some(f) = o.fit {
                eprintln!(
                    "{} slope {:.4} CI ({:.4}, {:.4}), flatness {:.4}",
                    f.mode, f.slope, f.slope_ci.0, f.slope_ci.1, f.log_corrected_flatness
                );
            }
        }
        Command::Rwfunc {
            common,
            radius,
            target,
            samples,
            step_cap,
        } => {
            let cfg = load(&common)?;
            let step = cfg.model.step()?;
            let mode = match radius {
                Some(n) => RwMode::ExitRadius(n),
                None => RwMode::HitTarget(target_of(&cfg, &target)?),
            };
            let (table, _) = green_for(&cfg, &common.out)?
                .ok_or_else(|| CliError::Config("the Green function is infinite for d ≤ 2".into()))?;
            let opts = RunOptions::new(seed(&common, &cfg)).workers(workers(&common, &cfg));
            let s = rw_green_functional(&step, &table.dense(), &mode, samples, step_cap, &opts)?;
            println!("n_samples,completed,cap_exceeded,scale,mean_ratio,stderr,q10,q50,q90,mean_steps");
            println!(
                "{},{},{},{},{},{},{},{},{},{}",
                s.n_samples,
                s.completed,
                s.cap_exceeded,
                s.scale,
                s.mean_ratio,
                s.mean_ratio_stderr,
                s.quantiles[0],
                s.quantiles[1],
                s.quantiles[2],
                s.mean_steps
            );
        }
        Command::Fit {
            common,
            input,
            mode,
            dim,
        } => {
            let mode: FitMode = mode.parse().map_err(|e: ExperimentError| CliError::Config(e.to_string()))?;
            let path = input.unwrap_or_else(|| common.out.join(SWEEP_CSV));
            if !path.exists() {
                return Err(CliError::Io(format!("{} does not exist", path.display())));
            }
            let rows = read_rows(&path, dim)?;
            let pts: Vec<_> = rows.iter().map(|r| (r.abs_a, r.p_hat, r.stderr)).collect();
            let f = fit_scaling(&pts, mode)?;
            println!("mode,n_points,slope,slope_stderr,slope_ci_lo,slope_ci_hi,log_corrected_flatness,weighted");
            println!(
                "{},{},{},{},{},{},{},{}",
                f.mode,
                f.points.len(),
                f.slope,
                f.slope_stderr,
                f.slope_ci.0,
                f.slope_ci.1,
                f.log_corrected_flatness,
                f.weighted
            );
        }
        Command::Check { common, tier, only } => {
            let tier: Tier = tier.parse().map_err(CliError::Config)?;
            let ctx = CheckContext::new(
                &common.out,
                common.seed.unwrap_or(0),
                common.workers.unwrap_or(1),
                tier,
            );
            std::fs::create_dir_all(&common.out)?;
            let results: Vec<_> = if only.is_empty() {
                run_all(&ctx, |r| println!("{r}"))
            } else {
                only.iter()
                    .map(|&id| {
                        let r = brwlab::check::run_criterion(id, &ctx);
                        println!("{r}");
                        r
                    })
                    .collect()
            };
            let failed = results.iter().filter(|r| r.status == Status::Fail).count();
            append_manifest(
                &common.out,
                &serde_json::json!({
                    "command": "check",
                    "tier": tier.to_string(),
                    "seed": ctx.seed,
                    "workers": ctx.workers,
                    "failed": failed,
                    "wall_clock_s": started.elapsed().as_secs_f64(),
                }),
            )?;
            if failed > 0 {
                return Err(CliError::Failed(format!("{failed} criteria failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
