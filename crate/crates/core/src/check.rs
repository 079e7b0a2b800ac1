//! The acceptance suite: ten named criteria, each writing its evidence as
//! CSV under one output directory.
//!
//! The fast tier runs the exact and deterministic criteria (2 on the line,
//! 3, 4, 5, 10) in a couple of minutes. The full tier adds the Monte Carlo
//! campaigns and takes hours on one core.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::brw::BrwConfig;
use crate::distributions::{OffspringDistribution, StepDistribution, Weight};
use crate::experiments::config::{Direction, Estimator, SweepSpec};
use crate::experiments::{
    estimate_mean_visits, estimate_visit, fit_scaling, rw_green_functional, sweep, ExperimentError, FitMode,
    RunOptions, RwMode, ScalingFit, VisitReport,
};
use crate::green::{
    asymptotic_profile, cache_dir, green_convolution, load_or_build, profile_flatness, GreenError, GreenMethod,
    GreenTable,
};
use crate::oracle::{enumerate_depth, enumerate_small, lemma1_check, solve_nonvisit, EnumerationReport, OracleError};
use crate::point::euclid_norm;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Brw(#[from] crate::brw::BrwConfigError),
    #[error(transparent)]
    Distribution(#[from] crate::distributions::DistributionError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown criterion {0}")]
    UnknownCriterion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Fast,
    Full,
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(Tier::Fast),
            "full" => Ok(Tier::Full),
            other => Err(format!("unknown tier {other:?} (expected fast or full)")),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Fast => "fast",
            Tier::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {} ({:.1} s): {}",
            self.status, self.id, self.name, self.seconds, self.detail
        )
    }
}

/// Criterion ids and names, in run order.
pub const CRITERIA: [(u32, &str); 10] = [
    (1, "first_moment"),
    (2, "oracle_bracket"),
    (3, "green_cross_validation"),
    (4, "lemma_enumeration"),
    (5, "p_below_s"),
    (6, "z4_headline"),
    (7, "dimension_regimes"),
    (8, "small_g_structure"),
    (9, "rw_green_functional"),
    (10, "determinism"),
];

/// |a| grid of the d=4 sweep.
pub const Z4_RADII: [i64; 5] = [8, 12, 16, 24, 32];
const D5_RADII: [i64; 5] = [6, 8, 10, 12, 14];
const D3_RADII: [i64; 5] = [4, 6, 8, 12, 16];
const EXIT_RADII: [u64; 4] = [16, 32, 64, 128];
const NODE_CAP: u64 = 10_000_000;

pub struct CheckContext {
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub tier: Tier,
    /// Green table cache, shared by reruns.
    pub cache: PathBuf,
    z4: OnceLock<Result<Arc<Sweep>, String>>,
}

/// A sweep held in memory together with its visit reports.
pub struct Sweep {
    pub dim: usize,
    pub radii: Vec<i64>,
    pub reports: Vec<VisitReport>,
    pub g0: f64,
}

impl CheckContext {
    pub fn new(out: impl Into<PathBuf>, seed: u64, workers: usize, tier: Tier) -> Self {
        let out = out.into();
        Self {
            cache: cache_dir(&out.join("cache")),
            out,
            seed,
            workers: workers.max(1),
            tier,
            z4: OnceLock::new(),
        }
    }

    fn dir(&self, id: u32) -> Result<PathBuf, CheckError> {
        let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("extra");
        let d = self.out.join(format!("c{id:02}_{name}"));
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn opts(&self, cell: u64) -> RunOptions {
        RunOptions::new(self.seed).cell(cell).workers(self.workers)
    }

    fn green(&self, step: &StepDistribution, radius: i64) -> Result<GreenTable, CheckError> {
        Ok(load_or_build(&self.cache, step, GreenMethod::Quadrature, radius, crate::green::DEFAULT_ABS_TOL)?.0)
    }
}

fn binary() -> OffspringDistribution {
    OffspringDistribution::from_ratios(&[(0, 1, 2), (2, 1, 2)]).expect("valid law")
}

fn axis(dim: usize, r: i64) -> Vec<i64> {
    let mut t = vec![0; dim];
    t[0] = r;
    t
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CheckError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn s<T: ToString>(x: T) -> String {
    x.to_string()
}

fn verdict(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Runs one criterion; errors become failures.
pub fn run_criterion(id: u32, ctx: &CheckContext) -> CriterionResult {
    let name = CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1).unwrap_or("unknown");
    let t0 = Instant::now();
    let fast_only = matches!(id, 2 | 3 | 4 | 5 | 10);
    let out = if ctx.tier == Tier::Fast && !fast_only {
        Ok((Status::Skip, "full tier only".to_string()))
    } else {
        match id {
            1 => first_moment(ctx),
            2 => oracle_bracket(ctx),
            3 => green_cross_validation(ctx),
            4 => lemma_enumeration(ctx),
            5 => p_below_s(ctx),
            6 => z4_headline(ctx),
            7 => dimension_regimes(ctx),
            8 => small_g_structure(ctx),
            9 => rw_functional(ctx),
            10 => determinism(ctx),
            other => Err(CheckError::UnknownCriterion(other)),
        }
    };
    let (status, detail) = out.unwrap_or_else(|e| (Status::Fail, format!("error: {e}")));
    CriterionResult {
        id,
        name,
        status,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

/// Runs every criterion in order, reporting each result as it completes.
pub fn run_all(ctx: &CheckContext, mut on_result: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .map(|&(id, _)| {
            let r = run_criterion(id, ctx);
            on_result(&r);
            r
        })
        .collect()
}

type Outcome = Result<(Status, String), CheckError>;

/// E N = G(a): mean of N, completed past the node cap by its conditional
/// expectation, against the Green table.
fn first_moment(ctx: &CheckContext) -> Outcome {
    const SAMPLES: u64 = 1_000_000;
    const CAP: u64 = 1_000_000;
    let dir = ctx.dir(1)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for d in [3usize, 4, 5] {
        let step = StepDistribution::simple(d)?;
        let table = Arc::new(ctx.green(&step, 10)?);
        for r in [2i64, 4, 6] {
            let target = axis(d, r);
            let cfg = BrwConfig::new(binary(), step.clone(), &target, CAP, Some(table.clone()))?;
            let m = estimate_mean_visits(&cfg, SAMPLES, &ctx.opts(sweep::cell_id(&target)));
            let g = table.value(&target);
            let z = (m.report.estimate - g).abs() / m.report.stderr;
            worst = worst.max(z);
            rows.push(vec![
                s(d),
                s(r),
                s(SAMPLES),
                s(CAP),
                s(g),
                s(m.report.estimate),
                s(m.report.stderr),
                s(z),
                s(m.raw_mean),
                s(m.raw_stderr),
                s(m.median_of_means),
                s(m.report.truncation_rate),
            ]);
        }
    }
    write_csv(
        &dir.join("first_moment.csv"),
        &[
            "dim",
            "abs_a",
            "n_samples",
            "node_cap",
            "green",
            "mean_N",
            "stderr",
            "z",
            "raw_mean_N",
            "raw_stderr",
            "median_of_means",
            "trunc_rate",
        ],
        &rows,
    )?;
    Ok((verdict(worst <= 3.0), format!("9 cells, max |mean − G(a)|/stderr = {worst:.2} (≤ 3)")))
}

/// Fixed-point brackets at R=80 and MC estimates inside them.
fn oracle_bracket(ctx: &CheckContext) -> Outcome {
    const R: i64 = 80;
    const SAMPLES: u64 = 1_000_000;
    let dir = ctx.dir(2)?;
    let mut fixtures: Vec<Vec<i64>> = (1..=5).map(|a| vec![a]).collect();
    if ctx.tier == Tier::Full {
        fixtures.extend([vec![1, 0], vec![1, 1], vec![2, 0], vec![2, 1], vec![3, 0], vec![3, 4], vec![5, 0]]);
    }
    let mut rows = Vec::new();
    let mut max_width: f64 = 0.0;
    let mut outside = 0;
    for target in &fixtures {
        let step = StepDistribution::simple(target.len())?;
        let field = solve_nonvisit(&binary(), &step, target, R, 10_000_000, 1e-15)?;
        let (lo, hi) = field.visit_bracket();
        let cfg = BrwConfig::new(binary(), step, target, NODE_CAP, None)?;
        let v = estimate_visit(&cfg, SAMPLES, &ctx.opts(sweep::cell_id(target)));
        let p = v.report.estimate;
        let se = v.report.stderr;
        let inside = p >= lo - 3.0 * se && p <= hi + 3.0 * se;
        outside += !inside as usize;
        max_width = max_width.max(field.width());
        rows.push(vec![
            s(target.len()),
            target.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
            s(R),
            s(lo),
            s(hi),
            s(field.width()),
            s(field.residual),
            s(field.monotonicity_violations),
            s(p),
            s(se),
            s(v.report.truncation_rate),
            s(inside),
        ]);
    }
    write_csv(
        &dir.join("brackets.csv"),
        &[
            "dim",
            "target",
            "box_radius",
            "visit_lower",
            "visit_upper",
            "width",
            "residual",
            "monotonicity_violations",
            "p_hat",
            "stderr",
            "trunc_rate",
            "inside",
        ],
        &rows,
    )?;
    let ok = max_width < 1e-6 && outside == 0;
    let scope = if ctx.tier == Tier::Full { "d=1,2" } else { "d=1" };
    Ok((
        verdict(ok),
        format!(
            "{} targets ({scope}), max width {max_width:.2e} (< 1e-6), {outside} MC estimates outside bracket ± 3 se",
            fixtures.len()
        ),
    ))
}

/// Quadrature against convolution, harmonicity and the radial profile.
fn green_cross_validation(ctx: &CheckContext) -> Outcome {
    let dir = ctx.dir(3)?;
    let mut rows = Vec::new();
    let mut ok = true;
    let mut summary = Vec::new();
    for d in [3usize, 4, 5] {
        let step = StepDistribution::simple(d)?;
        let quad = ctx.green(&step, 20)?;
        let n_max = [2000u64, 800, 300][d - 3];
        let conv = green_convolution(&step, 10, n_max)?;
        let max_diff = conv
            .estimate
            .entries()
            .map(|(x, v)| (v - quad.value(x)).abs())
            .fold(0.0, f64::max);
        let residual = quad.harmonicity_residual().max(conv.estimate.harmonicity_residual());
        let profile = asymptotic_profile(&quad)?;
        let flat = profile_flatness(&profile, quad.radius());
        let pass = max_diff <= 1e-4 && residual <= 1e-5 && flat <= 1.15;
        ok &= pass;
        summary.push(format!("d={d}: diff {max_diff:.1e}, resid {residual:.1e}, flat {flat:.4}"));
        rows.push(vec![
            s(d),
            s(quad.value(&vec![0; d])),
            s(conv.estimate.value(&vec![0; d])),
            s(max_diff),
            s(residual),
            s(flat),
            s(n_max),
        ]);
        let prof: Vec<Vec<String>> = profile.iter().map(|p| vec![s(p.radius), s(p.mean), s(p.sites)]).collect();
        write_csv(&dir.join(format!("profile_d{d}.csv")), &["radius", "mean_G_r_pow", "sites"], &prof)?;
    }
    write_csv(
        &dir.join("green.csv"),
        &[
            "dim",
            "G0_quadrature",
            "G0_convolution",
            "max_abs_diff",
            "harmonicity_residual",
            "profile_flatness",
            "n_max",
        ],
        &rows,
    )?;
    Ok((verdict(ok), summary.join("; ")))
}

/// The enumeration fixtures shared by criteria 4 and 5.
struct Fixtures {
    node: Vec<(String, EnumerationReport)>,
    depth: Vec<(String, EnumerationReport)>,
}

fn asymmetric() -> Result<(OffspringDistribution, StepDistribution), CheckError> {
    let off = OffspringDistribution::from_ratios(&[(0, 1, 2), (1, 1, 4), (3, 1, 4)])?;
    let step = StepDistribution::from_weights(1, &[(vec![1], Weight::ratio(2, 3)), (vec![-2], Weight::ratio(1, 3))])?;
    Ok((off, step))
}

fn enumeration_fixtures() -> Result<Fixtures, CheckError> {
    const MAX_NODES: usize = 9;
    let srw = StepDistribution::simple(1)?;
    let mut node = Vec::new();
    for a in 1..=3i64 {
        let field = solve_nonvisit(&binary(), &srw, &[a], 80, 10_000_000, 1e-15)?;
        node.push((format!("binary_srw_a{a}_n{MAX_NODES}"), enumerate_small(&binary(), &srw, &[a], MAX_NODES, Some(&field))?));
    }
    let (off, step) = asymmetric()?;
    for a in [1i64, -1] {
        node.push((format!("asymmetric_a{a}_n{MAX_NODES}"), enumerate_small(&off, &step, &[a], MAX_NODES, None)?));
    }
    let mut depth = Vec::new();
    for a in 0..=3i64 {
        depth.push((format!("binary_srw_a{a}_depth3"), enumerate_depth(&binary(), &srw, &[a], 3)?));
    }
    Ok(Fixtures { node, depth })
}

fn path_rows(name: &str, r: &EnumerationReport) -> Vec<Vec<String>> {
    r.paths
        .iter()
        .map(|p| {
            vec![
                s(name),
                p.step_word(),
                s(p.s()),
                s(p.p()),
                s(p.e()),
                p.g().map(s).unwrap_or_default(),
                s(p.slack),
                s(&p.p_gamma),
                s(&p.s_gamma),
            ]
        })
        .collect()
}

/// e(γ) ≥ P(μ≥2)g(γ), the sibling bound and the product formula.
fn lemma_enumeration(ctx: &CheckContext) -> Outcome {
    let dir = ctx.dir(4)?;
    let fx = enumeration_fixtures()?;
    let p2 = crate::oracle::enumerate::exact_p_ge2(&binary())?;
    let p2_asym = crate::oracle::enumerate::exact_p_ge2(&asymmetric()?.0)?;
    let mut rows = Vec::new();
    let mut paths = Vec::new();
    let mut failures = Vec::new();
    let (mut lemma_paths, mut sibling_indices, mut events) = (0, 0, 0);
    for (name, r) in fx.node.iter().chain(&fx.depth) {
        let f = &r.factorization;
        events += f.events;
        let p = if name.starts_with("asymmetric") { &p2_asym } else { &p2 };
        let lemma = lemma1_check(&r.paths, p);
        let gf_ok = r.gf_visit_probability.as_ref().is_none_or(|g| *g == r.visit_probability);
        let moment_ok = r.truncated_green.as_ref().is_none_or(|g| *g == r.visit_mass);
        let bracket_ok = !f.bracket_checked || (f.max_excess_over_upper <= 1e-12 && f.max_shortfall_below_lower <= 1e-12);
        let ok = f.exact_mismatches == 0 && r.conditional_mean_mismatches == 0 && gf_ok && moment_ok && bracket_ok && lemma.is_ok();
        if !ok {
            failures.push(name.clone());
        }
        let (checked, sib, margin, sib_margin) = match &lemma {
            Ok(l) => (l.paths_checked, l.sibling_indices_checked, l.min_margin, l.min_sibling_margin),
            Err(_) => (0, 0, f64::NAN, f64::NAN),
        };
        lemma_paths += checked;
        sibling_indices += sib;
        rows.push(vec![
            s(name),
            s(r.configurations),
            s(f.events),
            s(f.exact_mismatches),
            s(r.conditional_mean_mismatches),
            s(gf_ok),
            s(moment_ok),
            s(f.max_excess_over_upper),
            s(f.max_shortfall_below_lower),
            s(r.excluded()),
            s(checked),
            s(sib),
            s(margin),
            s(sib_margin),
            lemma.err().map(|e| e.to_string()).unwrap_or_default(),
        ]);
        paths.extend(path_rows(name, r));
    }
    write_csv(
        &dir.join("fixtures.csv"),
        &[
            "fixture",
            "configurations",
            "events",
            "factorization_mismatches",
            "conditional_mean_mismatches",
            "gf_visit_probability_matches",
            "first_moment_matches",
            "max_excess_over_q_upper",
            "max_shortfall_below_q_lower",
            "excluded_mass",
            "lemma_paths_checked",
            "sibling_indices_checked",
            "min_margin",
            "min_sibling_margin",
            "violation",
        ],
        &rows,
    )?;
    write_csv(&dir.join("paths.csv"), &["fixture", "steps", "s", "p", "e", "g", "slack", "p_exact", "s_exact"], &paths)?;
    let ok = failures.is_empty() && lemma_paths > 0 && sibling_indices > 0;
    Ok((
        verdict(ok),
        format!(
            "{} fixtures, {events} (γ,l,m) events exact, lemma on {lemma_paths} paths, sibling bound on {sibling_indices} indices{}",
            rows.len(),
            if failures.is_empty() { String::new() } else { format!(", failed: {}", failures.join(" ")) }
        ),
    ))
}

/// p(γ) ≤ s(γ) in exact arithmetic.
fn p_below_s(ctx: &CheckContext) -> Outcome {
    let dir = ctx.dir(5)?;
    let fx = enumeration_fixtures()?;
    let mut rows = Vec::new();
    let (mut checked, mut violations) = (0usize, 0usize);
    for (name, r) in fx.node.iter().chain(&fx.depth) {
        for p in r.paths.iter().filter(|p| p.p_gamma > BigRational::zero()) {
            checked += 1;
            let ok = p.p_gamma <= p.s_gamma;
            violations += !ok as usize;
            rows.push(vec![s(name), p.step_word(), s(&p.p_gamma), s(&p.s_gamma), s(ok)]);
        }
    }
    write_csv(&dir.join("p_le_s.csv"), &["fixture", "steps", "p_exact", "s_exact", "holds"], &rows)?;
    Ok((verdict(violations == 0 && checked > 0), format!("{checked} paths, {violations} violations")))
}

/// Visit sweep kept in memory, with sweep-format CSV and diagnostics.
fn visit_sweep(ctx: &CheckContext, dir: &Path, dim: usize, radii: &[i64], samples: u64, green_radius: i64) -> Result<Sweep, CheckError> {
    let step = StepDistribution::simple(dim)?;
    let table = Arc::new(ctx.green(&step, green_radius)?);
    let g0 = table.value(&vec![0; dim]);
    let spec = SweepSpec {
        estimator: Estimator::Visit,
        radii: radii.to_vec(),
        direction: Direction::Axis,
        samples,
        node_cap: NODE_CAP,
        fit: None,
    };
    let base = BrwConfig::new(binary(), step, &axis(dim, radii[0]), NODE_CAP, Some(table))?;
    let mut w = csv::Writer::from_path(dir.join(format!("sweep_d{dim}.csv")))?;
    w.write_record(sweep::SweepRow::header(dim))?;
    let mut reports = Vec::new();
    for &r in radii {
        let target = axis(dim, r);
        let cfg = base.with_target(&target)?;
        let (row, rep) = sweep::run_cell(&cfg, &spec, ctx.seed, &ctx.opts(sweep::cell_id(&target)));
        w.write_record(row.record())?;
        w.flush()?;
        reports.push(rep.expect("visit estimator"));
    }
    let sw = Sweep {
        dim,
        radii: radii.to_vec(),
        reports,
        g0,
    };
    let diag: Vec<Vec<String>> = sw
        .radii
        .iter()
        .zip(&sw.reports)
        .map(|(r, v)| {
            vec![
                s(r),
                s(v.report.estimate),
                s(v.report.stderr),
                s(v.quarter_cap_estimate()),
                s(v.cap_extrapolated()),
                s(v.cap_extrapolated_stderr()),
                s(v.truncation_upper()),
                s(v.report.truncation_rate),
                s(v.report.estimate * (*r as f64).powi(2) * (*r as f64).ln()),
            ]
        })
        .collect();
    write_csv(
        &dir.join(format!("truncation_d{dim}.csv")),
        &[
            "abs_a",
            "p_hat",
            "stderr",
            "p_quarter_cap",
            "p_cap_extrapolated",
            "p_cap_extrapolated_stderr",
            "p_upper",
            "trunc_rate",
            "p_a2_log_a",
        ],
        &diag,
    )?;
    Ok(sw)
}

impl Sweep {
    fn points(&self) -> Vec<(f64, f64, f64)> {
        self.radii
            .iter()
            .zip(&self.reports)
            .map(|(&r, v)| (euclid_norm(&axis(self.dim, r)), v.report.estimate, v.report.stderr))
            .collect()
    }

    fn fit(&self, dir: &Path) -> Result<ScalingFit, CheckError> {
        let f = fit_scaling(&self.points(), FitMode::PurePower)?;
        sweep::write_fit(&dir.join(format!("fit_d{}.csv", self.dim)), &f)?;
        Ok(f)
    }
}

fn z4(ctx: &CheckContext) -> Result<Arc<Sweep>, CheckError> {
    ctx.z4
        .get_or_init(|| {
            let dir = ctx.dir(6).map_err(|e| e.to_string())?;
            visit_sweep(ctx, &dir, 4, &Z4_RADII, 10_000_000, 20)
                .map(Arc::new)
                .map_err(|e| e.to_string())
        })
        .clone()
        .map_err(|e| CheckError::Experiment(ExperimentError::InvalidParameter(format!("d=4 sweep failed: {e}"))))
}

/// Flatness of p̂·|a|²·log|a| and the pure-power slope in d=4.
fn z4_headline(ctx: &CheckContext) -> Outcome {
    let sw = z4(ctx)?;
    let f = sw.fit(&ctx.dir(6)?)?;
    let ok = f.log_corrected_flatness <= 1.6 && f.slope_ci.1 < -2.0;
    Ok((
        verdict(ok),
        format!(
            "flatness {:.3} (≤ 1.6), slope {:.3} CI ({:.3}, {:.3}) (upper < −2)",
            f.log_corrected_flatness, f.slope, f.slope_ci.0, f.slope_ci.1
        ),
    ))
}

/// Slopes −3 in d=5 and −2 in d=3.
fn dimension_regimes(ctx: &CheckContext) -> Outcome {
    let dir = ctx.dir(7)?;
    let d5 = visit_sweep(ctx, &dir, 5, &D5_RADII, 4_000_000, 10)?.fit(&dir)?;
    let d3 = visit_sweep(ctx, &dir, 3, &D3_RADII, 2_000_000, 10)?.fit(&dir)?;
    let ok = (d5.slope + 3.0).abs() <= 0.3 && (d3.slope + 2.0).abs() <= 0.3;
    Ok((
        verdict(ok),
        format!(
            "d=5 slope {:.3} ± {:.3} (−3 ± 0.3), d=3 slope {:.3} ± {:.3} (−2 ± 0.3)",
            d5.slope, d5.slope_stderr, d3.slope, d3.slope_stderr
        ),
    ))
}

/// 𝒢 ≥ G(0), the exact split of the visit event and E(𝒢 | visit) in |a|.
fn small_g_structure(ctx: &CheckContext) -> Outcome {
    let sw = z4(ctx)?;
    let dir = ctx.dir(8)?;
    let mut rows = Vec::new();
    let mut below_g0 = 0u64;
    let mut split_failures = 0usize;
    let mut ties = 0u64;
    let mut means = Vec::new();
    for (&r, v) in sw.radii.iter().zip(&sw.reports) {
        let log_a = (r as f64).ln();
        let mut thresholds = vec![0.99 * sw.g0];
        thresholds.extend([1.0, 2.0, 4.0, 8.0].map(|c1| c1 * log_a));
        for t in thresholds {
            let small = v.g_values.iter().filter(|&&g| g > 0.0 && g < t).count() as u64;
            let small_le = v.g_values.iter().filter(|&&g| g > 0.0 && g <= t).count() as u64;
            let large = v.g_values.iter().filter(|&&g| g >= t).count() as u64;
            ties += small_le - small;
            if t < sw.g0 {
                below_g0 += small_le;
            }
            let holds = small + large == v.report.n_events;
            split_failures += !holds as usize;
            let n = v.report.n_samples as f64;
            rows.push(vec![
                s(r),
                s(t),
                s(v.report.n_events),
                s(small_le),
                s(large),
                s(small_le as f64 / n),
                s(large as f64 / n),
                s(holds),
            ]);
        }
        means.push(v.conditional_mean_g().map(|m| m.0).unwrap_or(f64::NAN));
    }
    write_csv(
        &dir.join("g_split.csv"),
        &["abs_a", "threshold", "visits", "small_events", "large_events", "p_small", "p_large", "split_exact"],
        &rows,
    )?;
    let cm: Vec<Vec<String>> = sw
        .radii
        .iter()
        .zip(&sw.reports)
        .map(|(r, v)| {
            let (m, se) = v.conditional_mean_g().unwrap_or((f64::NAN, f64::NAN));
            vec![s(r), s(m), s(se), s(m / (*r as f64).ln())]
        })
        .collect();
    write_csv(&dir.join("conditional_mean_g.csv"), &["abs_a", "mean_G", "stderr", "mean_G_over_log_a"], &cm)?;
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    let ok = below_g0 == 0 && split_failures == 0 && ties == 0 && monotone;
    Ok((
        verdict(ok),
        format!(
            "{below_g0} events with 0 < 𝒢 ≤ t < G(0), {split_failures} inexact splits, {ties} ties at t, E(𝒢|visit) {}: {}",
            if monotone { "nondecreasing" } else { "NOT monotone" },
            means.iter().map(|m| format!("{m:.2}")).collect::<Vec<_>>().join(" ")
        ),
    ))
}

/// Σ G(S_i) up to the exit from radius n over log n.
fn rw_functional(ctx: &CheckContext) -> Outcome {
    const WALKS: u64 = 100_000;
    let dir = ctx.dir(9)?;
    let step = StepDistribution::simple(4)?;
    let dense = ctx.green(&step, 20)?.dense();
    let mut sums = Vec::new();
    for (i, &n) in EXIT_RADII.iter().enumerate() {
        let cap = 1000 * n * n;
        sums.push(rw_green_functional(&step, &dense, &RwMode::ExitRadius(n), WALKS, cap, &ctx.opts(i as u64 + 1))?);
    }
    let ratios: Vec<f64> = sums.iter().map(|s| s.mean_ratio).collect();
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    // a constant c with every ratio in [0.8c, 1.2c] exists iff max/min ≤ 1.5
    let c = 0.5 * (max + min);
    let within = ratios.iter().all(|r| (r - c).abs() <= 0.2 * c);
    let tails: Vec<f64> = sums.iter().map(|s| s.lower_tail(0.1 * c)).collect();
    let monotone = tails.windows(2).all(|w| w[1] <= w[0]);
    let capped: u64 = sums.iter().map(|s| s.cap_exceeded).sum();
    let rows: Vec<Vec<String>> = EXIT_RADII
        .iter()
        .zip(&sums)
        .zip(&tails)
        .map(|((n, s_), t)| {
            vec![
                s(n),
                s(s_.n_samples),
                s(s_.completed),
                s(s_.mean_ratio),
                s(s_.mean_ratio_stderr),
                s(s_.quantiles[0]),
                s(s_.quantiles[1]),
                s(s_.quantiles[2]),
                s(s_.mean_steps),
                s(t),
            ]
        })
        .collect();
    write_csv(
        &dir.join("rw_functional.csv"),
        &["radius", "walks", "completed", "mean_ratio", "stderr", "q10", "q50", "q90", "mean_steps", "lower_tail"],
        &rows,
    )?;
    let ok = within && monotone && capped == 0;
    Ok((
        verdict(ok),
        format!(
            "mean Σ G/log n: {} (c = {c:.3}, ±20% {}); lower tail below {:.3}·log n: {} ({}); {capped} walks capped",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" "),
            if within { "holds" } else { "fails" },
            0.1 * c,
            tails.iter().map(|t| format!("{t:.2e}")).collect::<Vec<_>>().join(" "),
            if monotone { "nonincreasing" } else { "NOT monotone" },
        ),
    ))
}

/// Reruns the fast tier and a small sweep twice, with different worker
/// counts, and compares every CSV byte for byte.
fn determinism(ctx: &CheckContext) -> Outcome {
    let root = ctx.out.join("c10_determinism");
    let run = |name: &str, workers: usize| -> Result<PathBuf, CheckError> {
        let dir = root.join(name);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        let mut sub = CheckContext::new(&dir, ctx.seed, workers, Tier::Fast);
        sub.cache = ctx.cache.clone();
        for id in [2, 3, 4, 5] {
            let r = run_criterion(id, &sub);
            if r.status != Status::Pass {
                return Err(CheckError::Experiment(ExperimentError::InvalidParameter(format!(
                    "rerun of criterion {id} did not pass: {}",
                    r.detail
                ))));
            }
        }
        let sweep_dir = dir.join("sweep");
        fs::create_dir_all(&sweep_dir)?;
        let step = StepDistribution::simple(3)?;
        let table = Arc::new(sub.green(&step, 10)?);
        let cfg = BrwConfig::new(binary(), step, &[2, 0, 0], NODE_CAP, Some(table))?;
        let spec = SweepSpec {
            estimator: Estimator::Mean,
            radii: vec![2, 3],
            direction: Direction::Axis,
            samples: 50_000,
            node_cap: NODE_CAP,
            fit: None,
        };
        let mut w = csv::Writer::from_path(sweep_dir.join("sweep.csv"))?;
        w.write_record(sweep::SweepRow::header(3))?;
        for r in [2i64, 3] {
            let t = axis(3, r);
            let (row, _) = sweep::run_cell(&cfg.with_target(&t)?, &spec, sub.seed, &sub.opts(sweep::cell_id(&t)));
            w.write_record(row.record())?;
        }
        w.flush()?;
        Ok(dir)
    };
    let a = run("run_a", 1)?;
    let b = run("run_b", ctx.workers.max(2))?;
    let files_a = csv_files(&a)?;
    let files_b = csv_files(&b)?;
    let mut differing = Vec::new();
    for rel in &files_a {
        if fs::read(a.join(rel))? != fs::read(b.join(rel)).unwrap_or_default() {
            differing.push(rel.display().to_string());
        }
    }
    let ok = files_a == files_b && differing.is_empty() && !files_a.is_empty();
    Ok((
        verdict(ok),
        format!(
            "{} CSV files compared across worker counts 1 and {}, {} differ{}",
            files_a.len(),
            ctx.workers.max(2),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(" ")) }
        ),
    ))
}

/// CSV files under `root`, relative and sorted.
fn csv_files(root: &Path) -> Result<Vec<PathBuf>, CheckError> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push(p.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiers_parse() {
        assert_eq!("fast".parse::<Tier>().unwrap(), Tier::Fast);
        assert_eq!(Tier::Full.to_string(), "full");
        assert!("slow".parse::<Tier>().is_err());
    }

    #[test]
    fn full_only_criteria_skip_in_fast_tier() {
        let dir = std::env::temp_dir().join(format!("brwlab-check-skip-{}", std::process::id()));
        let ctx = CheckContext::new(&dir, 1, 1, Tier::Fast);
        for id in [1, 6, 7, 8, 9] {
            assert_eq!(run_criterion(id, &ctx).status, Status::Skip);
        }
        assert_eq!(run_criterion(42, &CheckContext::new(&dir, 1, 1, Tier::Full)).status, Status::Fail);
        let _ = fs::remove_dir_all(dir);
    }

    #[test]
    fn enumeration_criteria_pass() {
        let dir = std::env::temp_dir().join(format!("brwlab-check-enum-{}", std::process::id()));
        let ctx = CheckContext::new(&dir, 1, 1, Tier::Fast);
        for id in [4, 5] {
            let r = run_criterion(id, &ctx);
            assert_eq!(r.status, Status::Pass, "{r}");
        }
        assert!(dir.join("c04_lemma_enumeration").join("paths.csv").exists());
        let _ = fs::remove_dir_all(dir);
    }
}
