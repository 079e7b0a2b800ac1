//! Green function by time integration of the continuous-time heat kernel.
//!
//! With jumps at rate one, the continuous-time walk X_t satisfies
//! ∫_0^∞ P(X_t = x) dt = Σ_n θ^{*n}(x). When every support vector lies on a
//! coordinate axis, X_t has independent coordinates, each a compound Poisson
//! walk on Z whose law is obtained by a discrete Fourier transform of
//! exp(−s(1 − ψ(k))). The time integral uses Gauss–Legendre panels on dyadic
//! intervals up to T; beyond T the Gaussian heat kernel is integrated in
//! closed form. Continuous time removes the parity singularities of periodic
//! walks.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{check_transient, GreenError, GreenMethod, GreenTable, StepGaussian, Symmetry};
use crate::distributions::StepDistribution;

const FINE_NODES: usize = 24;
const COARSE_NODES: usize = 16;

/// A one-dimensional compound Poisson law, evaluated at many intensities.
struct AxisKernel {
    size: usize,
    decay: Vec<f64>,
    phase: Vec<f64>,
}

impl AxisKernel {
    fn new(law: &[(i64, f64)], size: usize) -> Self {
        let mut decay = vec![0.0; size];
        let mut phase = vec![0.0; size];
        for j in 0..size {
            let k = 2.0 * std::f64::consts::PI * j as f64 / size as f64;
            for &(y, w) in law {
                let half = (k * y as f64 / 2.0).sin();
                decay[j] += w * 2.0 * half * half;
                phase[j] += w * (k * y as f64).sin();
            }
        }
        Self { size, decay, phase }
    }

    /// P(Y_s = n) for |n| ≤ radius, indexed by n + radius.
    fn eval(&self, s: f64, radius: i64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
        let mut buf: Vec<Complex64> = (0..self.size)
            .map(|j| Complex64::from_polar((-s * self.decay[j]).exp(), s * self.phase[j]))
            .collect();
        planner.plan_fft_forward(self.size).process(&mut buf);
        let m = self.size as i64;
        (-radius..=radius)
            .map(|n| buf[n.rem_euclid(m) as usize].re / self.size as f64)
            .collect()
    }
}

type AxisLaw = (f64, Vec<(i64, f64)>);

/// Splits θ into per-axis jump rates and conditional one-dimensional laws.
fn axis_laws(step: &StepDistribution) -> Result<Vec<AxisLaw>, GreenError> {
    let d = step.dim();
    let mut laws: Vec<AxisLaw> = vec![(0.0, Vec::new()); d];
    for (v, w) in step.atoms() {
        let nonzero: Vec<usize> = (0..d).filter(|&i| v[i] != 0).collect();
        match nonzero.as_slice() {
            [] => {}
            [i] => {
                laws[*i].0 += w;
                laws[*i].1.push((v[*i], w));
            }
            _ => return Err(GreenError::NonSeparableStep),
        }
    }
    for (rate, law) in &mut laws {
        law.iter_mut().for_each(|(_, w)| *w /= *rate);
    }
    Ok(laws)
}

/// Dyadic time panels [0,½], [½,1], [1,2], …, [T/2, T].
fn panels(t_max: f64) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.5), (0.5, 1.0)];
    let mut t = 1.0;
    while t < t_max {
        out.push((t, 2.0 * t));
        t *= 2.0;
    }
    out
}

pub fn green_quadrature(
    step: &StepDistribution,
    box_radius: i64,
    abs_tol: f64,
) -> Result<GreenTable, GreenError> {
    check_transient(step)?;
    if abs_tol.is_nan() || abs_tol <= 0.0 {
        return Err(GreenError::InvalidParameter(format!("abs_tol {abs_tol}")));
    }
    if box_radius < 0 {
        return Err(GreenError::InvalidParameter(format!("radius {box_radius}")));
    }
    let d = step.dim();
    let laws = axis_laws(step)?;
    let gaussian = StepGaussian::of_step(step);
    let symmetry = Symmetry::of_step(step);
    let sites = symmetry.canonical_sites(box_radius);

    // The Gaussian replacement beyond T is off by O(T^{-d/2}).
    let t_target = (abs_tol / 100.0).powf(-2.0 / d as f64);
    let t_max = 2f64.powi(t_target.log2().ceil().max(4.0) as i32);
    let panels = panels(t_max);

    // axes with identical (rate, law) share a kernel, keyed by the first such axis
    let mut kernels: Vec<(usize, AxisKernel)> = Vec::new();
    let mut axis_kernel = vec![0usize; d];
    for (i, (rate, law)) in laws.iter().enumerate() {
        if let Some(k) = kernels.iter().position(|&(j, _)| laws[j] == laws[i]) {
            axis_kernel[i] = k;
            continue;
        }
        let second: f64 = law.iter().map(|(y, w)| w * (y * y) as f64).sum();
        let reach = law.iter().map(|(y, _)| y.abs()).max().unwrap_or(0);
        let spread = 14.0 * (rate * t_max * second).sqrt() + 30.0 * reach as f64;
        let size = (2 * box_radius as usize + 2 * spread.ceil() as usize + 2).next_power_of_two();
        axis_kernel[i] = kernels.len();
        kernels.push((i, AxisKernel::new(law, size)));
    }

    let fine = GaussLegendre::new(NonZeroUsize::new(FINE_NODES).unwrap());
    let coarse = GaussLegendre::new(NonZeroUsize::new(COARSE_NODES).unwrap());
    let mut planner = FftPlanner::new();
    let mut fine_sum = vec![0.0; sites.len()];
    let mut coarse_sum = vec![0.0; sites.len()];
    let offset = box_radius as usize;
    for &(lo, hi) in &panels {
        let half = (hi - lo) / 2.0;
        let mid = (hi + lo) / 2.0;
        for (rule, acc) in [(&fine, &mut fine_sum), (&coarse, &mut coarse_sum)] {
            for &(node, weight) in rule.as_node_weight_pairs() {
                let t = mid + half * node;
                let tables: Vec<Vec<f64>> = kernels
                    .iter()
                    .map(|(j, k)| k.eval(laws[*j].0 * t, box_radius, &mut planner))
                    .collect();
                let w = weight * half;
                for (slot, c) in acc.iter_mut().zip(&sites) {
                    let mut p = w;
                    for i in 0..d {
                        p *= tables[axis_kernel[i]][(c[i] + offset as i64) as usize];
                    }
                    *slot += p;
                }
            }
        }
    }

    let mut achieved: f64 = 0.0;
    let values: Vec<f64> = sites
        .iter()
        .zip(fine_sum.iter().zip(&coarse_sum))
        .map(|(c, (f, g))| {
            achieved = achieved.max((f - g).abs());
            f + gaussian.time_tail(gaussian.quad_form(&c[..d]), t_max)
        })
        .collect();
    if achieved > abs_tol {
        return Err(GreenError::QuadratureNotConverged {
            achieved,
            requested: abs_tol,
        });
    }
    Ok(GreenTable::from_parts(
        step,
        box_radius,
        GreenMethod::Quadrature,
        abs_tol,
        symmetry,
        sites,
        values,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polya_return_constants() {
        // G(0) = 1/(1 − return probability) for simple random walk
        for (d, g0) in [(3, 1.516_386_059), (4, 1.239_467_122), (5, 1.156_308_125)] {
            let step = StepDistribution::simple(d).unwrap();
            let t = green_quadrature(&step, 3, 1e-8).unwrap();
            let v = t.value(&vec![0; d]);
            assert!((v - g0).abs() < 1e-7, "d={d}: {v} vs {g0}");
        }
    }

    #[test]
    fn srw_symmetries_and_harmonicity() {
        let step = StepDistribution::simple(3).unwrap();
        let t = green_quadrature(&step, 8, 1e-7).unwrap();
        assert_eq!(t.value(&[1, 0, 0]), t.value(&[0, 1, 0]));
        assert_eq!(t.value(&[2, -3, 1]), t.value(&[-2, 3, -1]));
        assert!(t.harmonicity_residual() < 1e-6, "{}", t.harmonicity_residual());
        // the neighbours of the origin average to G(0) − 1
        assert!((t.value(&[1, 0, 0]) - (t.value(&[0, 0, 0]) - 1.0)).abs() < 1e-7);
    }

    #[test]
    fn asymmetric_walk_is_harmonic() {
        let step = StepDistribution::new(
            3,
            &[
                (vec![1, 0, 0], 2.0 / 9.0),
                (vec![-2, 0, 0], 1.0 / 9.0),
                (vec![0, 1, 0], 1.0 / 6.0),
                (vec![0, -1, 0], 1.0 / 6.0),
                (vec![0, 0, 1], 1.0 / 6.0),
                (vec![0, 0, -1], 1.0 / 6.0),
            ],
        )
        .unwrap();
        let t = green_quadrature(&step, 6, 1e-7).unwrap();
        assert!(t.harmonicity_residual() < 1e-6);
        assert!(t.value(&[1, 0, 0]) != t.value(&[-1, 0, 0]));
    }

    #[test]
    fn diagonal_steps_are_not_separable() {
        let step = StepDistribution::new(
            3,
            &[
                (vec![1, 1, 0], 1.0 / 6.0),
                (vec![-1, -1, 0], 1.0 / 6.0),
                (vec![0, 1, 1], 1.0 / 6.0),
                (vec![0, -1, -1], 1.0 / 6.0),
                (vec![1, 0, 1], 1.0 / 6.0),
                (vec![-1, 0, -1], 1.0 / 6.0),
            ],
        );
        // this support generates only the even-sum sublattice
        assert!(step.is_err());
        let step = StepDistribution::new(
            3,
            &[
                (vec![1, 1, 1], 0.25),
                (vec![-1, -1, -1], 0.25),
                (vec![1, 0, 0], 0.125),
                (vec![-1, 0, 0], 0.125),
                (vec![0, 1, 0], 0.0625),
                (vec![0, -1, 0], 0.0625),
                (vec![0, 0, 1], 0.0625),
                (vec![0, 0, -1], 0.0625),
            ],
        )
        .unwrap();
        assert!(matches!(
            green_quadrature(&step, 2, 1e-6),
            Err(GreenError::NonSeparableStep)
        ));
    }
}
