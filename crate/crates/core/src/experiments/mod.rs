//! Monte Carlo estimation campaigns and their statistical summaries.
//!
//! Every estimator splits its samples into fixed-size blocks. Block `b` of
//! cell `c` draws from `substream(seed, c, b)`, and block results are merged
//! in block order, so outputs do not depend on the number of workers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::rng::{substream, SimRng};

pub mod config;
pub mod estimators;
pub mod fit;
pub mod rwfunc;
pub mod sweep;

pub use config::{ConfigError, GreenSpec, ModelSpec, RunConfig, SweepSpec};
pub use estimators::{
    estimate_g_tail, estimate_mean_visits, estimate_visit, GTailReport, MeanVisitReport, VisitReport,
};
pub use fit::{fit_scaling, FitMode, ScalingFit};
pub use rwfunc::{rw_green_functional, RwFunctionalSample, RwFunctionalSummary, RwMode};
pub use sweep::{run_sweep, SweepOptions, SweepOutcome, SweepRow};

/// Samples per block. Part of the definition of a run: changing it changes
/// which substream each sample comes from.
pub const DEFAULT_BLOCK_SIZE: u64 = 10_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("fit needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("estimate at |a| = {0} is not positive")]
    DegeneratePoints(f64),
    #[error("all points share one |a|; the slope is undefined")]
    DegenerateFit,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Green(#[from] crate::green::GreenError),
    #[error(transparent)]
    Brw(#[from] crate::brw::BrwConfigError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Binomial or mean estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: u64,
    /// Samples in the event (binomial) or with N > 0 (means).
    pub n_events: u64,
    pub ci95: (f64, f64),
    /// Fraction of samples that hit the node cap.
    pub truncation_rate: f64,
}

impl EstimatorReport {
    /// p̂ = k/n with stderr √(p̂(1−p̂)/n).
    pub fn binomial(n_events: u64, n_samples: u64, truncated: u64) -> Self {
        let n = n_samples.max(1) as f64;
        let p = n_events as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        Self::with(p, se, n_events, n_samples, truncated)
    }

    fn with(estimate: f64, stderr: f64, n_events: u64, n_samples: u64, truncated: u64) -> Self {
        Self {
            estimate,
            stderr,
            n_samples,
            n_events,
            ci95: (estimate - 1.96 * stderr, estimate + 1.96 * stderr),
            truncation_rate: truncated as f64 / n_samples.max(1) as f64,
        }
    }
}

/// How samples are spread over threads.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub seed: u64,
    /// Identifies the cell within a sweep; selects the substream family.
    pub cell: u64,
    pub workers: usize,
    pub block_size: u64,
}

impl RunOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            cell: 0,
            workers: 1,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }

    pub fn cell(mut self, cell: u64) -> Self {
        self.cell = cell;
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

/// Runs `f(rng, count)` on every block and returns the results in block
/// order.
pub fn run_blocks<T, F>(n_samples: u64, opts: &RunOptions, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, u64) -> T + Sync,
{
    let bs = opts.block_size.max(1);
    let blocks = n_samples.div_ceil(bs) as usize;
    let count = |b: usize| bs.min(n_samples - b as u64 * bs);
    let workers = opts.workers.clamp(1, blocks.max(1));
    if workers == 1 {
        return (0..blocks)
            .map(|b| f(&mut substream(opts.seed, opts.cell, b as u64), count(b)))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..blocks).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::Relaxed);
                if b >= blocks {
                    break;
                }
                let out = f(&mut substream(opts.seed, opts.cell, b as u64), count(b));
                slots.lock().expect("no worker panicked")[b] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|s| s.expect("every block ran"))
        .collect()
}
