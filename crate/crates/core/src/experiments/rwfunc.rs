//! Green functionals Σ G(S_i) along plain random walks.
//!
//! Along a path from 0 to a the BRW statistic is Σ_i G(a − z_i). Reading the
//! path backwards from a turns it into a walk with reversed steps started at
//! 0, along which one sums G at the walk's own position. Both modes below
//! use that form: the walk takes θ-steps and is charged G(−S_i), the Green
//! function of the reversed walk at S_i.

use crate::distributions::StepDistribution;
use crate::green::DenseGreen;
use crate::point::MAX_DIM;
use crate::sampling::WordSource;

use super::{run_blocks, ExperimentError, RunOptions};

#[derive(Debug, Clone, PartialEq)]
pub enum RwMode {
    /// Sum up to and including the hitting time of the target, charging
    /// G(a − S_i). Walks that miss the target within the cap are censored.
    HitTarget(Vec<i64>),
    /// Sum up to and including the first exit from the Euclidean ball of
    /// this radius, charging G(−S_i).
    ExitRadius(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwFunctionalSample {
    /// The stopping time was reached within the step cap.
    pub hit: bool,
    pub g_sum: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RwFunctionalSummary {
    pub n_samples: u64,
    /// Walks that reached the stopping time.
    pub completed: u64,
    pub cap_exceeded: u64,
    /// log n (exit mode) or log|a| (hit mode).
    pub scale: f64,
    /// Mean and stderr of g_sum/scale over completed walks.
    pub mean_ratio: f64,
    pub mean_ratio_stderr: f64,
    /// 10%, 50% and 90% quantiles of g_sum/scale over completed walks.
    pub quantiles: [f64; 3],
    pub mean_steps: f64,
    /// Sorted g_sum/scale of completed walks.
    ratios: Vec<f64>,
}

impl RwFunctionalSummary {
    /// Fraction of all walks that completed with g_sum ≤ c·scale.
    pub fn lower_tail(&self, c: f64) -> f64 {
        let k = self.ratios.partition_point(|&r| r <= c);
        k as f64 / self.n_samples.max(1) as f64
    }

    pub fn cap_exceeded_rate(&self) -> f64 {
        self.cap_exceeded as f64 / self.n_samples.max(1) as f64
    }
}

fn walk<R: rand::Rng + ?Sized>(
    step: &StepDistribution,
    green: &DenseGreen,
    mode: &RwMode,
    cap: u64,
    src: &mut WordSource<'_, R>,
) -> RwFunctionalSample {
    let d = step.dim();
    let mut s = [0i64; MAX_DIM];
    let mut arg = [0i64; MAX_DIM];
    let (target, radius_sq) = match mode {
        RwMode::HitTarget(a) => {
            let mut t = [0i64; MAX_DIM];
            t[..d].copy_from_slice(a);
            (Some(t), 0)
        }
        RwMode::ExitRadius(n) => (None, (*n as i64) * (*n as i64)),
    };
    let charge = |s: &[i64; MAX_DIM], arg: &mut [i64; MAX_DIM]| {
        for i in 0..d {
            arg[i] = match &target {
                Some(t) => t[i] - s[i],
                None => -s[i],
            };
        }
        green.value(&arg[..d])
    };
    let done = |s: &[i64; MAX_DIM]| match &target {
        Some(t) => s[..d] == t[..d],
        None => s[..d].iter().map(|x| x * x).sum::<i64>() >= radius_sq,
    };
    let mut g_sum = charge(&s, &mut arg);
    let mut steps = 0;
    while !done(&s) {
        if steps >= cap {
            return RwFunctionalSample { hit: false, g_sum, steps };
        }
        let y = step.coords(step.sample_index_from(src));
        for i in 0..d {
            s[i] += y[i];
        }
        steps += 1;
        g_sum += charge(&s, &mut arg);
    }
    RwFunctionalSample { hit: true, g_sum, steps }
}

/// Simulates `n_samples` walks and summarizes g_sum.
pub fn rw_green_functional(
    step: &StepDistribution,
    green: &DenseGreen,
    mode: &RwMode,
    n_samples: u64,
    step_cap: u64,
    opts: &RunOptions,
) -> Result<RwFunctionalSummary, ExperimentError> {
    if step.dim() <= 2 {
        return Err(ExperimentError::InvalidParameter("the Green function is infinite for d ≤ 2".into()));
    }
    let scale = match mode {
        RwMode::ExitRadius(0) => return Err(ExperimentError::InvalidParameter("exit radius must be at least 1".into())),
        RwMode::ExitRadius(n) => (*n as f64).ln(),
        RwMode::HitTarget(a) if a.len() != step.dim() => {
            return Err(ExperimentError::InvalidParameter("target dimension differs from the step law".into()))
        }
        RwMode::HitTarget(a) => crate::point::euclid_norm(a).ln(),
    };
    let samples = rw_samples(step, green, mode, n_samples, step_cap, opts);
    let completed: Vec<&RwFunctionalSample> = samples.iter().filter(|s| s.hit).collect();
    let k = completed.len();
    let mut ratios: Vec<f64> = completed.iter().map(|s| s.g_sum / scale).collect();
    let mean = ratios.iter().sum::<f64>() / k.max(1) as f64;
    let var = if k > 1 {
        ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1) as f64
    } else {
        0.0
    };
    ratios.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if k == 0 {
            f64::NAN
        } else {
            ratios[((p * k as f64) as usize).min(k - 1)]
        }
    };
    Ok(RwFunctionalSummary {
        n_samples,
        completed: k as u64,
        cap_exceeded: (samples.len() - k) as u64,
        scale,
        mean_ratio: mean,
        mean_ratio_stderr: (var / k.max(1) as f64).sqrt(),
        quantiles: [q(0.1), q(0.5), q(0.9)],
        mean_steps: samples.iter().map(|s| s.steps as f64).sum::<f64>() / samples.len().max(1) as f64,
        ratios,
    })
}

/// Raw samples, for callers that need the individual values.
pub fn rw_samples(
    step: &StepDistribution,
    green: &DenseGreen,
    mode: &RwMode,
    n_samples: u64,
    step_cap: u64,
    opts: &RunOptions,
) -> Vec<RwFunctionalSample> {
    run_blocks(n_samples, opts, |rng, n| {
        let mut src = WordSource::new(rng);
        (0..n).map(|_| walk(step, green, mode, step_cap, &mut src)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::green_quadrature;

    fn setup() -> (StepDistribution, DenseGreen) {
        let step = StepDistribution::simple(4).unwrap();
        let g = green_quadrature(&step, 8, 1e-6).unwrap().dense();
        (step, g)
    }

    #[test]
    fn unit_radius_takes_one_step() {
        let (step, g) = setup();
        let g0 = g.value(&[0, 0, 0, 0]);
        let s = rw_samples(&step, &g, &RwMode::ExitRadius(1), 100, 10, &RunOptions::new(1));
        for x in s {
            assert!(x.hit && x.steps == 1);
            assert!(x.g_sum >= g0);
        }
        assert!(rw_green_functional(&step, &g, &RwMode::ExitRadius(0), 1, 1, &RunOptions::new(1)).is_err());
    }

    #[test]
    fn exit_time_is_about_radius_squared() {
        let (step, g) = setup();
        let r = rw_green_functional(&step, &g, &RwMode::ExitRadius(10), 4000, 1_000_000, &RunOptions::new(2)).unwrap();
        assert_eq!(r.completed, 4000);
        // E|S_k|² = k for SRW, overshoot adds a little
        assert!(r.mean_steps > 100.0 && r.mean_steps < 125.0, "{}", r.mean_steps);
        assert!(r.quantiles[0] <= r.quantiles[1] && r.quantiles[1] <= r.quantiles[2]);
        assert_eq!(r.lower_tail(f64::INFINITY), 1.0);
        assert_eq!(r.lower_tail(0.0), 0.0);
    }

    #[test]
    fn hit_mode_ends_at_the_target() {
        let (step, g) = setup();
        let s = rw_samples(&step, &g, &RwMode::HitTarget(vec![1, 0, 0, 0]), 2000, 10_000, &RunOptions::new(3));
        let g0 = g.value(&[0, 0, 0, 0]);
        let hits = s.iter().filter(|x| x.hit).count();
        assert!(hits > 0 && hits < 2000);
        for x in s.iter().filter(|x| x.hit) {
            assert!(x.g_sum >= g0 + g.value(&[1, 0, 0, 0]) - 1e-12);
        }
    }
}
