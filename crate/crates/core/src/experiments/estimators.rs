//! Visit probability, mean visit count and 𝒢-tail estimators.

use crate::brw::{sample_brw, sample_visit, BrwConfig};
use crate::point::euclid_norm;

use super::{run_blocks, EstimatorReport, ExperimentError, RunOptions};

/// Estimate of P(N > 0) with truncation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitReport {
    /// p̂: fraction of samples that visited within the node cap.
    pub report: EstimatorReport,
    pub node_cap: u64,
    pub truncated: u64,
    /// Visits whose leftmost visiting particle had pre-order index at most
    /// cap/4, i.e. the visits a run with a quarter of the cap would count.
    pub visits_quarter_cap: u64,
    /// Σ over truncated samples of min(1, expected visits among the
    /// unexplored particles). NaN without a Green table.
    pub pending_mass: f64,
    /// 𝒢 for each visiting sample, in sample order. Empty without a Green
    /// table.
    pub g_values: Vec<f64>,
}

impl VisitReport {
    /// Upper end of the truncation bracket: p̂ + pending_mass / n. The
    /// probability that the unexplored part of a truncated tree visits is at
    /// most its expected number of visits.
    pub fn truncation_upper(&self) -> f64 {
        self.report.estimate + self.pending_mass / self.report.n_samples.max(1) as f64
    }

    /// p̂ at a quarter of the node cap.
    pub fn quarter_cap_estimate(&self) -> f64 {
        self.visits_quarter_cap as f64 / self.report.n_samples.max(1) as f64
    }

    /// 2·p̂(C) − p̂(C/4): removes a bias of the form b·C^{−1/2}.
    pub fn cap_extrapolated(&self) -> f64 {
        2.0 * self.report.estimate - self.quarter_cap_estimate()
    }

    /// Stderr of the extrapolation: per sample it is 1 for an early visit,
    /// 2 for a visit after cap/4 and 0 otherwise.
    pub fn cap_extrapolated_stderr(&self) -> f64 {
        let n = self.report.n_samples.max(1) as f64;
        let early = self.quarter_cap_estimate();
        let late = self.report.estimate - early;
        let m = self.cap_extrapolated();
        ((early + 4.0 * late - m * m).max(0.0) / n).sqrt()
    }

    /// Mean and standard error of 𝒢 over visiting samples.
    pub fn conditional_mean_g(&self) -> Option<(f64, f64)> {
        let k = self.g_values.len();
        if k == 0 {
            return None;
        }
        let mean = self.g_values.iter().sum::<f64>() / k as f64;
        let var = if k > 1 {
            self.g_values.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1) as f64
        } else {
            0.0
        };
        Some((mean, (var / k as f64).sqrt()))
    }
}

struct VisitBlock {
    visits: u64,
    truncated: u64,
    quarter: u64,
    pending: f64,
    g: Vec<f64>,
}

/// Binomial estimate of P(N > 0), stopping each tree at its first visit.
pub fn estimate_visit(cfg: &BrwConfig, n_samples: u64, opts: &RunOptions) -> VisitReport {
    let quarter = cfg.node_cap() / 4;
    let with_green = cfg.green().is_some();
    let blocks = run_blocks(n_samples, opts, |rng, n| {
        let mut b = VisitBlock {
            visits: 0,
            truncated: 0,
            quarter: 0,
            pending: 0.0,
            g: Vec::new(),
        };
        for _ in 0..n {
            let o = sample_visit(cfg, rng);
            if o.visited {
                b.visits += 1;
                b.quarter += (o.nodes <= quarter) as u64;
                if with_green {
                    b.g.push(o.g_var);
                }
            }
            if o.truncated {
                b.truncated += 1;
                b.pending += o.pending_visits.min(1.0);
            }
        }
        b
    });
    let mut visits = 0;
    let mut truncated = 0;
    let mut quarter_visits = 0;
    let mut pending = 0.0;
    let mut g_values = Vec::new();
    for b in blocks {
        visits += b.visits;
        truncated += b.truncated;
        quarter_visits += b.quarter;
        pending += b.pending;
        g_values.extend(b.g);
    }
    VisitReport {
        report: EstimatorReport::binomial(visits, n_samples, truncated),
        node_cap: cfg.node_cap(),
        truncated,
        visits_quarter_cap: quarter_visits,
        pending_mass: if with_green { pending } else { f64::NAN },
        g_values,
    }
}

/// Estimate of E N.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVisitReport {
    /// Mean of N plus, for truncated samples, the conditional expectation of
    /// the unexplored remainder. Unbiased for E N whatever the cap.
    pub report: EstimatorReport,
    /// Plain mean of the N counted within the cap, and its stderr.
    pub raw_mean: f64,
    pub raw_stderr: f64,
    /// Median over blocks of the block means of the completed count.
    pub median_of_means: f64,
    pub truncated: u64,
}

#[derive(Default)]
struct MeanBlock {
    n: u64,
    sum: f64,
    sumsq: f64,
    raw_sum: f64,
    raw_sumsq: f64,
    events: u64,
    truncated: u64,
}

/// Mean of N from full tree traversals. The completed count needs a Green
/// table for truncated samples; without one it equals N.
pub fn estimate_mean_visits(cfg: &BrwConfig, n_samples: u64, opts: &RunOptions) -> MeanVisitReport {
    let blocks = run_blocks(n_samples, opts, |rng, n| {
        let mut b = MeanBlock {
            n,
            ..Default::default()
        };
        for _ in 0..n {
            let s = sample_brw(cfg, rng);
            let raw = s.n_visits as f64;
            let full = if s.truncated && s.pending_visits.is_finite() {
                s.completed_visits()
            } else {
                raw
            };
            b.sum += full;
            b.sumsq += full * full;
            b.raw_sum += raw;
            b.raw_sumsq += raw * raw;
            b.events += s.visited() as u64;
            b.truncated += s.truncated as u64;
        }
        b
    });
    let mut t = MeanBlock::default();
    let mut block_means = Vec::with_capacity(blocks.len());
    for b in &blocks {
        t.n += b.n;
        t.sum += b.sum;
        t.sumsq += b.sumsq;
        t.raw_sum += b.raw_sum;
        t.raw_sumsq += b.raw_sumsq;
        t.events += b.events;
        t.truncated += b.truncated;
        if b.n > 0 {
            block_means.push(b.sum / b.n as f64);
        }
    }
    let n = t.n.max(1) as f64;
    let mean_se = |sum: f64, sumsq: f64| {
        let m = sum / n;
        let var = if t.n > 1 { ((sumsq - n * m * m) / (n - 1.0)).max(0.0) } else { 0.0 };
        (m, (var / n).sqrt())
    };
    let (mean, se) = mean_se(t.sum, t.sumsq);
    let (raw_mean, raw_se) = mean_se(t.raw_sum, t.raw_sumsq);
    block_means.sort_by(f64::total_cmp);
    let median_of_means = match block_means.len() {
        0 => f64::NAN,
        k if k % 2 == 1 => block_means[k / 2],
        k => 0.5 * (block_means[k / 2 - 1] + block_means[k / 2]),
    };
    MeanVisitReport {
        report: EstimatorReport::with(mean, se, t.events, n_samples, t.truncated),
        raw_mean,
        raw_stderr: raw_se,
        median_of_means,
        truncated: t.truncated,
    }
}

/// Split of the visit event by the size of 𝒢 at a threshold t.
#[derive(Debug, Clone, PartialEq)]
pub struct GTailReport {
    pub threshold: f64,
    /// P(N>0).
    pub visit: EstimatorReport,
    /// P(0 < 𝒢 < t).
    pub small: EstimatorReport,
    /// P(𝒢 ≥ t).
    pub large: EstimatorReport,
    /// E(𝒢 | N>0) and its stderr.
    pub conditional_mean: Option<(f64, f64)>,
}

impl GTailReport {
    /// The two events partition the visit event, so their counts add up.
    pub fn decomposition_holds(&self) -> bool {
        self.small.n_events + self.large.n_events == self.visit.n_events
    }

    /// Split of an existing visit sample set at threshold t.
    pub fn from_visits(v: &VisitReport, threshold: f64) -> Self {
        let n = v.report.n_samples;
        let small = v.g_values.iter().filter(|&&g| g > 0.0 && g < threshold).count() as u64;
        let large = v.g_values.iter().filter(|&&g| g >= threshold).count() as u64;
        Self {
            threshold,
            visit: v.report,
            small: EstimatorReport::binomial(small, n, v.truncated),
            large: EstimatorReport::binomial(large, n, v.truncated),
            conditional_mean: v.conditional_mean_g(),
        }
    }
}

/// Estimates P(0 < 𝒢 < c1·log|a|) and its complement within the visit
/// event. Needs a Green table on `cfg`.
pub fn estimate_g_tail(cfg: &BrwConfig, c1: f64, n_samples: u64, opts: &RunOptions) -> Result<GTailReport, ExperimentError> {
    if c1.is_nan() || c1 <= 0.0 {
        return Err(ExperimentError::InvalidParameter(format!("c1 must be positive, got {c1}")));
    }
    if cfg.green().is_none() {
        return Err(ExperimentError::InvalidParameter("a Green table is needed for 𝒢".into()));
    }
    let t = c1 * euclid_norm(cfg.target()).ln();
    let v = estimate_visit(cfg, n_samples, opts);
    Ok(GTailReport::from_visits(&v, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{OffspringDistribution, StepDistribution};
    use crate::green::green_quadrature;
    use std::sync::Arc;

    fn cfg(d: usize, target: &[i64], green: bool) -> BrwConfig {
        let off = OffspringDistribution::from_ratios(&[(0, 1, 2), (2, 1, 2)]).unwrap();
        let step = StepDistribution::simple(d).unwrap();
        let table = green.then(|| Arc::new(green_quadrature(&step, 8, 1e-6).unwrap()));
        BrwConfig::new(off, step, target, 1_000_000, table).unwrap()
    }

    #[test]
    fn origin_is_always_visited() {
        let v = estimate_visit(&cfg(3, &[0, 0, 0], false), 1000, &RunOptions::new(1));
        assert_eq!(v.report.estimate, 1.0);
        assert_eq!(v.report.stderr, 0.0);
        let m = estimate_mean_visits(&cfg(3, &[0, 0, 0], false), 1000, &RunOptions::new(1));
        assert!(m.report.estimate >= 1.0);
    }

    #[test]
    fn binomial_coherence_and_worker_independence() {
        let c = cfg(3, &[2, 0, 0], true);
        let a = estimate_visit(&c, 25_000, &RunOptions::new(5));
        let b = estimate_visit(&c, 25_000, &RunOptions::new(5).workers(3));
        assert_eq!(a, b);
        assert_eq!(a.report.estimate, a.report.n_events as f64 / 25_000.0);
        assert_eq!(a.g_values.len() as u64, a.report.n_events);
    }

    #[test]
    fn mean_matches_green_in_d4() {
        let c = cfg(4, &[2, 0, 0, 0], true);
        let m = estimate_mean_visits(&c, 200_000, &RunOptions::new(9));
        let g = c.green().unwrap().value(&[2, 0, 0, 0]);
        assert!((m.report.estimate - g).abs() <= 4.0 * m.report.stderr, "{m:?} vs {g}");
    }

    #[test]
    fn disjoint_seeds_agree() {
        let c = cfg(3, &[1, 1, 0], false);
        let a = estimate_mean_visits(&c, 100_000, &RunOptions::new(1));
        let b = estimate_mean_visits(&c, 100_000, &RunOptions::new(2));
        let se = (a.report.stderr.powi(2) + b.report.stderr.powi(2)).sqrt();
        assert!((a.report.estimate - b.report.estimate).abs() <= 3.0 * se);
    }

    #[test]
    fn g_tail_below_g0_is_empty() {
        let c = cfg(4, &[3, 0, 0, 0], true);
        let g0 = c.green().unwrap().value(&[0, 0, 0, 0]);
        let c1 = 0.9 * g0 / 3f64.ln();
        let r = estimate_g_tail(&c, c1, 50_000, &RunOptions::new(4)).unwrap();
        assert_eq!(r.small.n_events, 0);
        assert_eq!(r.small.estimate, 0.0);
        assert!(r.decomposition_holds());
        assert!(r.visit.n_events > 0);
        let v = estimate_visit(&c, 50_000, &RunOptions::new(4));
        assert!(v.g_values.iter().all(|&g| g >= g0));
        assert!(estimate_g_tail(&c, 0.0, 10, &RunOptions::new(4)).is_err());
    }
}
