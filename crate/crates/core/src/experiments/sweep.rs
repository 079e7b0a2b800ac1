//! Grid sweeps over |a| with persisted, resumable per-cell results.
//!
//! Each cell writes one CSV row, flushed as soon as the cell finishes, so an
//! interrupted sweep keeps its completed cells. A rerun skips cells whose row
//! (same target, seed, sample count and node cap) is already present.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::brw::{sample_brw, BrwConfig};
use crate::green::{cache_dir, load_or_build, CacheOutcome, GreenTable};
use crate::point::euclid_norm;
use crate::rng::substream;

use super::config::{Estimator, RunConfig, SweepSpec};
use super::estimators::{estimate_mean_visits, estimate_visit, VisitReport};
use super::fit::{fit_scaling, ScalingFit};
use super::{ExperimentError, RunOptions};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const FIT_CSV: &str = "fit.csv";
pub const MANIFEST: &str = "manifest.jsonl";

/// One persisted cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dim: usize,
    pub target: Vec<i64>,
    pub abs_a: f64,
    pub n_samples: u64,
    pub n_events: u64,
    pub p_hat: f64,
    pub stderr: f64,
    /// Present for the mean estimator only.
    pub mean_n: Option<f64>,
    pub mean_n_stderr: Option<f64>,
    pub trunc_rate: f64,
    pub seed: u64,
    pub node_cap: u64,
    /// Truncation upper bound and quarter-cap estimate (visit estimator).
    pub p_upper: Option<f64>,
    pub p_quarter_cap: Option<f64>,
    /// E(𝒢 | visit) and its stderr (visit estimator with a Green table).
    pub g_mean: Option<f64>,
    pub g_mean_stderr: Option<f64>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepRow {
    pub fn header(dim: usize) -> Vec<String> {
        let mut h = vec!["dim".to_string()];
        h.extend((1..=dim).map(|i| format!("a_{i}")));
        h.extend(
            [
                "abs_a",
                "n_samples",
                "n_events",
                "p_hat",
                "stderr",
                "mean_N",
                "mean_N_stderr",
                "trunc_rate",
                "seed",
                "node_cap",
                "p_upper",
                "p_quarter_cap",
                "g_mean",
                "g_mean_stderr",
            ]
            .map(String::from),
        );
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![self.dim.to_string()];
        r.extend(self.target.iter().map(|x| x.to_string()));
        r.extend([
            self.abs_a.to_string(),
            self.n_samples.to_string(),
            self.n_events.to_string(),
            self.p_hat.to_string(),
            self.stderr.to_string(),
            opt(self.mean_n),
            opt(self.mean_n_stderr),
            self.trunc_rate.to_string(),
            self.seed.to_string(),
            self.node_cap.to_string(),
            opt(self.p_upper),
            opt(self.p_quarter_cap),
            opt(self.g_mean),
            opt(self.g_mean_stderr),
        ]);
        r
    }

    fn parse(rec: &csv::StringRecord, dim: usize) -> Option<Self> {
        let f = |i: usize| rec.get(i)?.parse::<f64>().ok();
        let o = |i: usize| match rec.get(i) {
            Some("") => Some(None),
            Some(s) => s.parse::<f64>().ok().map(Some),
            None => None,
        };
        let u = |i: usize| rec.get(i)?.parse::<u64>().ok();
        let b = dim + 1;
        Some(Self {
            dim: rec.get(0)?.parse().ok()?,
            target: (1..=dim).map(|i| rec.get(i)?.parse().ok()).collect::<Option<_>>()?,
            abs_a: f(b)?,
            n_samples: u(b + 1)?,
            n_events: u(b + 2)?,
            p_hat: f(b + 3)?,
            stderr: f(b + 4)?,
            mean_n: o(b + 5)?,
            mean_n_stderr: o(b + 6)?,
            trunc_rate: f(b + 7)?,
            seed: u(b + 8)?,
            node_cap: u(b + 9)?,
            p_upper: o(b + 10)?,
            p_quarter_cap: o(b + 11)?,
            g_mean: o(b + 12)?,
            g_mean_stderr: o(b + 13)?,
        })
    }
}

/// Options that are not part of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Overrides the configured worker count.
    pub workers: Option<usize>,
    /// Overrides the configured seed.
    pub seed: Option<u64>,
    /// Reuse rows of an existing CSV; otherwise start afresh.
    pub resume: bool,
    /// Write a per-sample JSONL trace of this many samples per cell.
    pub trace_samples: u64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Visit reports of the cells run in this invocation (None if reused or
    /// produced by the mean estimator).
    pub visit_reports: Vec<Option<VisitReport>>,
    pub fit: Option<ScalingFit>,
    pub cells_reused: usize,
    pub green_cache: Option<CacheOutcome>,
    pub csv_path: PathBuf,
}

/// Substream family of a target: the first 8 bytes of a SHA-256 of its
/// coordinates.
pub fn cell_id(target: &[i64]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"cell");
    for x in target {
        h.update(x.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// The Green table a configuration asks for, or None in d ≤ 2.
pub fn green_for(cfg: &RunConfig, out: &Path) -> Result<Option<(GreenTable, CacheOutcome)>, ExperimentError> {
    if cfg.model.dim <= 2 {
        return Ok(None);
    }
    let step = cfg.model.step()?;
    let dir = cache_dir(&out.join("cache"));
    let t = load_or_build(&dir, &step, cfg.green.method()?, cfg.green.radius, cfg.green.accuracy()?)?;
    Ok(Some(t))
}

/// Runs the `[sweep]` grid of `cfg`, writing `sweep.csv`, `fit.csv` and a
/// manifest line under `out`.
pub fn run_sweep(cfg: &RunConfig, out: &Path, opts: &SweepOptions) -> Result<SweepOutcome, ExperimentError> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ExperimentError::InvalidParameter("configuration has no [sweep] section".into()))?;
    std::fs::create_dir_all(out)?;
    let started = Instant::now();
    let seed = opts.seed.unwrap_or(cfg.seed);
    let workers = opts.workers.unwrap_or(cfg.workers);
    let dim = cfg.model.dim;
    let csv_path = out.join(SWEEP_CSV);

    let existing = if opts.resume { read_rows(&csv_path, dim)? } else { Vec::new() };
    let (table, green_cache) = if spec.radii.is_empty() {
        (None, None)
    } else {
        match green_for(cfg, out)? {
            Some((t, c)) => (Some(Arc::new(t)), Some(c)),
            None => (None, None),
        }
    };
    let base = if spec.radii.is_empty() {
        None
    } else {
        Some(BrwConfig::new(
            cfg.model.offspring()?,
            cfg.model.step()?,
            &spec.target(dim, spec.radii[0]),
            spec.node_cap,
            table,
        )?)
    };

    // rewrite the file from the reusable rows so a partial trailing line
    // from an interrupted run is dropped
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(&csv_path)?));
    writer.write_record(SweepRow::header(dim))?;
    writer.flush()?;

    let mut rows = Vec::new();
    let mut visit_reports = Vec::new();
    let mut reused = 0;
    for &r in &spec.radii {
        let target = spec.target(dim, r);
        let prior = existing.iter().find(|row| {
            row.target == target && row.seed == seed && row.n_samples == spec.samples && row.node_cap == spec.node_cap
        });
        let row = match prior {
            Some(row) => {
                reused += 1;
                visit_reports.push(None);
                row.clone()
            }
            None => {
                let cell_cfg = base.as_ref().expect("grid is nonempty").with_target(&target)?;
                let ropts = RunOptions::new(seed).cell(cell_id(&target)).workers(workers);
                if opts.trace_samples > 0 {
                    write_trace(&cell_cfg, opts.trace_samples, &ropts, &out.join(format!("trace_{}.jsonl", label(&target))))?;
                }
                let (row, report) = run_cell(&cell_cfg, spec, seed, &ropts);
                visit_reports.push(report);
                row
            }
        };
        writer.write_record(row.record())?;
        writer.flush()?;
        rows.push(row);
    }
    drop(writer);

    let fit = match spec.fit_mode()? {
        Some(mode) if rows.len() >= super::fit::MIN_POINTS => {
            let pts: Vec<_> = rows.iter().map(|r| (r.abs_a, r.p_hat, r.stderr)).collect();
            let f = fit_scaling(&pts, mode)?;
            write_fit(&out.join(FIT_CSV), &f)?;
            Some(f)
        }
        _ => None,
    };

    append_manifest(
        out,
        &serde_json::json!({
            "command": "sweep",
            "config_hash": cfg.hash,
            "seed": seed,
            "workers": workers,
            "cells": rows.len(),
            "cells_reused": reused,
            "green_cache": green_cache.map(|c| format!("{c:?}").to_lowercase()),
            "wall_clock_s": started.elapsed().as_secs_f64(),
        }),
    )?;
    Ok(SweepOutcome {
        rows,
        visit_reports,
        fit,
        cells_reused: reused,
        green_cache,
        csv_path,
    })
}

/// Estimates one cell.
pub fn run_cell(cfg: &BrwConfig, spec: &SweepSpec, seed: u64, opts: &RunOptions) -> (SweepRow, Option<VisitReport>) {
    let target = cfg.target().to_vec();
    let mut row = SweepRow {
        dim: cfg.dim(),
        abs_a: euclid_norm(&target),
        target,
        n_samples: spec.samples,
        n_events: 0,
        p_hat: 0.0,
        stderr: 0.0,
        mean_n: None,
        mean_n_stderr: None,
        trunc_rate: 0.0,
        seed,
        node_cap: cfg.node_cap(),
        p_upper: None,
        p_quarter_cap: None,
        g_mean: None,
        g_mean_stderr: None,
    };
    match spec.estimator {
        Estimator::Visit => {
            let v = estimate_visit(cfg, spec.samples, opts);
            row.n_events = v.report.n_events;
            row.p_hat = v.report.estimate;
            row.stderr = v.report.stderr;
            row.trunc_rate = v.report.truncation_rate;
            row.p_quarter_cap = Some(v.quarter_cap_estimate());
            if cfg.green().is_some() {
                row.p_upper = Some(v.truncation_upper());
                if let Some((m, s)) = v.conditional_mean_g() {
                    row.g_mean = Some(m);
                    row.g_mean_stderr = Some(s);
                }
            }
            (row, Some(v))
        }
        Estimator::Mean => {
            let m = estimate_mean_visits(cfg, spec.samples, opts);
            let n = spec.samples.max(1) as f64;
            let p = m.report.n_events as f64 / n;
            row.n_events = m.report.n_events;
            row.p_hat = p;
            row.stderr = (p * (1.0 - p) / n).sqrt();
            row.mean_n = Some(m.report.estimate);
            row.mean_n_stderr = Some(m.report.stderr);
            row.trunc_rate = m.report.truncation_rate;
            (row, None)
        }
    }
}

fn label(target: &[i64]) -> String {
    target.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("_")
}

/// Rows of an existing sweep CSV; unreadable rows are dropped.
pub fn read_rows(path: &Path, dim: usize) -> Result<Vec<SweepRow>, ExperimentError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    if rdr.headers()?.iter().ne(SweepRow::header(dim).iter().map(String::as_str)) {
        return Ok(Vec::new());
    }
    Ok(rdr.records().filter_map(|r| r.ok()).filter_map(|r| SweepRow::parse(&r, dim)).collect())
}

pub fn write_fit(path: &Path, f: &ScalingFit) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mode",
        "n_points",
        "slope",
        "slope_stderr",
        "slope_ci_lo",
        "slope_ci_hi",
        "intercept",
        "log_corrected_flatness",
        "weighted",
    ])?;
    w.write_record([
        f.mode.to_string(),
        f.points.len().to_string(),
        f.slope.to_string(),
        f.slope_stderr.to_string(),
        f.slope_ci.0.to_string(),
        f.slope_ci.1.to_string(),
        f.intercept.to_string(),
        f.log_corrected_flatness.to_string(),
        f.weighted.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn append_manifest(out: &Path, entry: &serde_json::Value) -> Result<(), ExperimentError> {
    let mut f = OpenOptions::new().create(true).append(true).open(out.join(MANIFEST))?;
    writeln!(f, "{entry}")?;
    Ok(())
}

/// Per-sample JSONL trace of full traversals. Uses its own substream so the
/// estimates are unaffected.
pub fn write_trace(cfg: &BrwConfig, n: u64, opts: &RunOptions, path: &Path) -> Result<(), ExperimentError> {
    let mut rng = substream(opts.seed, opts.cell, u64::MAX);
    let mut w = BufWriter::new(File::create(path)?);
    for _ in 0..n {
        let s = sample_brw(cfg, &mut rng);
        let line = serde_json::json!({
            "N": s.n_visits,
            "tree_size": s.tree_size,
            "g_of_path": s.g_of_path,
            "truncated": s.truncated,
        });
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(radii: &str, samples: u64) -> RunConfig {
        RunConfig::from_toml(&format!(
            r#"
seed = 11
[model]
dim = 3
offspring = {{ 0 = "1/2", 2 = "1/2" }}
step = "simple"
[green]
radius = 6
[sweep]
radii = {radii}
samples = {samples}
node_cap = 100000
fit = "pure_power"
"#
        ))
        .unwrap()
    }

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("brwlab-sweep-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn empty_grid_writes_header_only() {
        let out = tmp("empty");
        let o = run_sweep(&config("[]", 10), &out, &SweepOptions::default()).unwrap();
        assert!(o.rows.is_empty() && o.fit.is_none());
        let text = std::fs::read_to_string(out.join(SWEEP_CSV)).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("dim,a_1,a_2,a_3,abs_a,n_samples,n_events,p_hat,stderr,mean_N,mean_N_stderr,trunc_rate,seed"));
        std::fs::remove_dir_all(out).unwrap();
    }

    #[test]
    fn rerun_is_byte_identical_and_resumes() {
        let cfg = config("[1, 2, 3, 4]", 20_000);
        let a = tmp("a");
        let b = tmp("b");
        let oa = run_sweep(&cfg, &a, &SweepOptions::default()).unwrap();
        let ob = run_sweep(&cfg, &b, &SweepOptions { workers: Some(3), ..Default::default() }).unwrap();
        let ta = std::fs::read(a.join(SWEEP_CSV)).unwrap();
        assert_eq!(ta, std::fs::read(b.join(SWEEP_CSV)).unwrap());
        assert_eq!(std::fs::read(a.join(FIT_CSV)).unwrap(), std::fs::read(b.join(FIT_CSV)).unwrap());
        assert_eq!(oa.rows, ob.rows);
        assert!(oa.fit.unwrap().slope < 0.0);

        let oc = run_sweep(&cfg, &a, &SweepOptions { resume: true, ..Default::default() }).unwrap();
        assert_eq!(oc.cells_reused, 4);
        assert_eq!(oc.green_cache, Some(CacheOutcome::Hit));
        assert_eq!(std::fs::read(a.join(SWEEP_CSV)).unwrap(), ta);
        assert_eq!(std::fs::read_to_string(a.join(MANIFEST)).unwrap().lines().count(), 2);
        for d in [a, b] {
            std::fs::remove_dir_all(d).unwrap();
        }
    }

    #[test]
    fn rows_round_trip() {
        let row = SweepRow {
            dim: 2,
            target: vec![3, -1],
            abs_a: 10f64.sqrt(),
            n_samples: 7,
            n_events: 2,
            p_hat: 2.0 / 7.0,
            stderr: 0.1,
            mean_n: Some(0.5),
            mean_n_stderr: None,
            trunc_rate: 0.0,
            seed: 9,
            node_cap: 100,
            p_upper: None,
            p_quarter_cap: Some(0.25),
            g_mean: None,
            g_mean_stderr: None,
        };
        let rec = csv::StringRecord::from(row.record());
        assert_eq!(SweepRow::parse(&rec, 2), Some(row));
        assert_ne!(cell_id(&[1, 0]), cell_id(&[0, 1]));
    }
}
