//! Gaussian approximations used for tails and far-field values.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::distributions::StepDistribution;

/// Centred Gaussian with the covariance of one step.
#[derive(Debug, Clone)]
pub struct StepGaussian {
    dim: usize,
    precision: Vec<f64>,
    // (2π)^{-d/2} det(Σ)^{-1/2}
    norm: f64,
}

impl StepGaussian {
    pub fn of_step(step: &StepDistribution) -> Self {
        let dim = step.dim();
        let cov = step.covariance();
        let m = DMatrix::from_fn(dim, dim, |i, j| cov[i][j]);
        let det = m.determinant();
        let inv = m
            .try_inverse()
            .expect("a generating zero-mean step law has nonsingular covariance");
        Self {
            dim,
            precision: inv.iter().copied().collect(),
            norm: (2.0 * PI).powf(-(dim as f64) / 2.0) / det.sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// xᵀ Σ⁻¹ x.
    pub fn quad_form(&self, x: &[i64]) -> f64 {
        let d = self.dim;
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += x[i] as f64 * self.precision[i * d + j] * x[j] as f64;
            }
        }
        q
    }

    /// Density of N(0, tΣ) at a point with quadratic form `q`.
    pub fn density(&self, q: f64, t: f64) -> f64 {
        self.norm * t.powf(-(self.dim as f64) / 2.0) * (-q / (2.0 * t)).exp()
    }

    /// ∫_T^∞ density(q, t) dt, for d ≥ 3.
    ///
    /// Substituting u = q/(2t) turns this into a lower incomplete gamma
    /// function, evaluated by its power series.
    pub fn time_tail(&self, q: f64, t0: f64) -> f64 {
        let a = self.dim as f64 / 2.0 - 1.0;
        let z = q / (2.0 * t0);
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= z / (a + k);
            sum += term;
            k += 1.0;
            if k > 10_000.0 {
                break;
            }
        }
        self.norm * t0.powf(-a) * (-z).exp() * sum
    }

    /// Constant c with G(x) ~ c·q(x)^{(2−d)/2} for a transient walk.
    pub fn far_field_constant(&self) -> f64 {
        let a = self.dim as f64 / 2.0 - 1.0;
        self.norm * 2f64.powf(a) * gamma(a)
    }
}

/// Γ(a) for the half-integers and integers that occur here.
fn gamma(a: f64) -> f64 {
    let twice = (2.0 * a).round();
    assert!((2.0 * a - twice).abs() < 1e-12 && twice >= 1.0, "gamma at {a}");
    let mut x = if twice as i64 % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut s = if twice as i64 % 2 == 0 { 1.0 } else { 0.5 };
    while s < a - 1e-9 {
        x *= s;
        s += 1.0;
    }
    x
}
