//! Two-sided bounds on the non-visit probability h(x) = P(BRW from x never
//! visits a).
//!
//! h solves h(x) = 1{x≠a}·f(Σ_y θ(y) h(x+y)) with f the offspring pgf. On a
//! finite box the exterior is clamped to 1 for the upper field. For the
//! lower field it is clamped to a lower bound on the probability that a BRW
//! never leaves a box of radius R − |a|∞, itself computed by iterating from
//! 0 with exterior 0; a particle outside the box must leave such a box to
//! reach a. Since f is monotone on [0,1], Gauss–Seidel sweeps started from 1
//! stay above h and sweeps started from 0 stay below it, so every iterate is
//! a rigorous bound.

use crate::distributions::{OffspringDistribution, StepDistribution};
use crate::point::sup_norm;

use super::OracleError;

const OUTSIDE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct OracleField {
    dim: usize,
    pub box_radius: i64,
    pub target: Vec<i64>,
    /// h⁻ on the box, row-major with the first coordinate slowest.
    pub lower: Vec<f64>,
    /// h⁺ on the box.
    pub upper: Vec<f64>,
    /// Lower bound on h used outside the box: the probability that a BRW
    /// stays inside a box of radius R − |a|∞, bounded from below.
    pub exterior_lower: f64,
    pub iterations: usize,
    /// Largest fixed-point residual of either field at interior sites.
    pub residual: f64,
    /// Sites where a sweep moved a field against its monotone direction.
    pub monotonicity_violations: u64,
    step: Vec<(Vec<i64>, f64)>,
}

struct BoxGrid {
    dim: usize,
    radius: i64,
    side: i64,
}

impl BoxGrid {
    fn len(&self) -> usize {
        (self.side as usize).pow(self.dim as u32)
    }

    fn index(&self, x: &[i64]) -> Option<usize> {
        if sup_norm(x) > self.radius {
            return None;
        }
        let mut k = 0i64;
        for &xi in x {
            k = k * self.side + xi + self.radius;
        }
        Some(k as usize)
    }

    fn point(&self, mut k: usize) -> Vec<i64> {
        let mut x = vec![0; self.dim];
        for xi in x.iter_mut().rev() {
            *xi = (k % self.side as usize) as i64 - self.radius;
            k /= self.side as usize;
        }
        x
    }
}

impl OracleField {
    fn grid(&self) -> BoxGrid {
        BoxGrid {
            dim: self.dim,
            radius: self.box_radius,
            side: 2 * self.box_radius + 1,
        }
    }

    /// (h⁻(x), h⁺(x)); outside the box the exterior closures.
    pub fn h_bounds(&self, x: &[i64]) -> (f64, f64) {
        match self.grid().index(x) {
            Some(i) => (self.lower[i], self.upper[i]),
            None => (self.exterior_lower, 1.0),
        }
    }

    /// Bounds on q(z) = Σ_y θ(y) h(z + y), the non-visit probability of a
    /// particle at z with exactly one child.
    pub fn q_bounds(&self, z: &[i64]) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (y, w) in &self.step {
            let x: Vec<i64> = z.iter().zip(y).map(|(a, b)| a + b).collect();
            let (l, h) = self.h_bounds(&x);
            lo += w * l;
            hi += w * h;
        }
        (lo, hi)
    }

    /// Bracket [1 − h⁺(0), 1 − h⁻(0)] on P(visit a) from the origin.
    pub fn visit_bracket(&self) -> (f64, f64) {
        let (lo, hi) = self.h_bounds(&vec![0; self.dim]);
        (1.0 - hi, 1.0 - lo)
    }

    pub fn width(&self) -> f64 {
        let (lo, hi) = self.visit_bracket();
        hi - lo
    }
}

/// Fixed point for the pgf of `offspring`.
pub fn solve_nonvisit(
    offspring: &OffspringDistribution,
    step: &StepDistribution,
    target: &[i64],
    box_radius: i64,
    max_iter: usize,
    tol: f64,
) -> Result<OracleField, OracleError> {
    let atoms: Vec<(u32, f64)> = offspring.atoms().collect();
    let pgf = move |s: f64| atoms.iter().map(|&(k, p)| p * s.powi(k as i32)).sum::<f64>();
    solve_with_pgf(pgf, step, target, box_radius, max_iter, tol)
}

/// Fixed point for an arbitrary monotone map f: [0,1] → [0,1].
pub fn solve_with_pgf<F: Fn(f64) -> f64>(
    pgf: F,
    step: &StepDistribution,
    target: &[i64],
    box_radius: i64,
    max_iter: usize,
    tol: f64,
) -> Result<OracleField, OracleError> {
    let dim = step.dim();
    if target.len() != dim {
        return Err(OracleError::TargetDimension {
            expected: dim,
            found: target.len(),
        });
    }
    let grid = BoxGrid {
        dim,
        radius: box_radius,
        side: 2 * box_radius + 1,
    };
    let Some(target_idx) = grid.index(target) else {
        return Err(OracleError::TargetOutsideBox);
    };
    let kernel = Kernel::new(&grid, step, Some(target_idx));

    // A particle outside the box is at sup-distance at least r + 1 from a,
    // so visiting a requires leaving the radius-r box around it.
    let r = box_radius - sup_norm(target);
    let (exterior_lower, mut iterations) = if r >= 1 {
        let exit_grid = BoxGrid {
            dim,
            radius: r,
            side: 2 * r + 1,
        };
        let exit = Kernel::new(&exit_grid, step, None);
        let mut u = vec![0.0; exit.n];
        let centre = exit_grid.index(&vec![0; dim]).expect("origin is in the box");
        let mut it = 0;
        let mut ignored = 0;
        while it < max_iter {
            it += 1;
            if exit.sweep(&mut u, 0.0, &pgf, false, &mut ignored) <= tol {
                break;
            }
        }
        (u[centre], it)
    } else {
        (0.0, 0)
    };

    let n = kernel.n;
    let mut upper = vec![1.0; n];
    let mut lower = vec![0.0; n];
    upper[target_idx] = 0.0;
    let mut violations = 0u64;
    let mut converged = false;
    let mut own = 0;
    while own < max_iter {
        own += 1;
        let cu = kernel.sweep(&mut upper, 1.0, &pgf, true, &mut violations);
        let cl = kernel.sweep(&mut lower, exterior_lower, &pgf, false, &mut violations);
        if cu.max(cl) <= tol {
            converged = true;
            break;
        }
    }
    iterations += own;
    let residual = kernel.residual(&upper, 1.0, &pgf).max(kernel.residual(&lower, exterior_lower, &pgf));
    if !converged {
        return Err(OracleError::NotConverged {
            iterations,
            residual,
        });
    }
    Ok(OracleField {
        dim,
        box_radius,
        target: target.to_vec(),
        lower,
        upper,
        exterior_lower,
        iterations,
        residual,
        monotonicity_violations: violations,
        step: step.atoms().map(|(v, w)| (v.to_vec(), w)).collect(),
    })
}

/// Neighbour table of one box; `pinned` is held at 0.
struct Kernel {
    n: usize,
    m: usize,
    weights: Vec<f64>,
    neighbours: Vec<u32>,
    pinned: Option<usize>,
}

impl Kernel {
    fn new(grid: &BoxGrid, step: &StepDistribution, pinned: Option<usize>) -> Self {
        let n = grid.len();
        let weights: Vec<f64> = (0..step.len()).map(|j| step.weight(j)).collect();
        let m = weights.len();
        let mut neighbours = vec![OUTSIDE; n * m];
        for k in 0..n {
            let x = grid.point(k);
            for j in 0..m {
                let z: Vec<i64> = x.iter().zip(step.vector(j)).map(|(a, b)| a + b).collect();
                if let Some(i) = grid.index(&z) {
                    neighbours[k * m + j] = i as u32;
                }
            }
        }
        Self {
            n,
            m,
            weights,
            neighbours,
            pinned,
        }
    }

    fn argument(&self, h: &[f64], k: usize, exterior: f64) -> f64 {
        let mut s = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            let nb = self.neighbours[k * self.m + j];
            s += w * if nb == OUTSIDE { exterior } else { h[nb as usize] };
        }
        s
    }

    /// One Gauss–Seidel sweep; returns the largest change.
    fn sweep<F: Fn(f64) -> f64>(&self, h: &mut [f64], exterior: f64, pgf: &F, decreasing: bool, violations: &mut u64) -> f64 {
        let mut change: f64 = 0.0;
        for k in 0..self.n {
            if Some(k) == self.pinned {
                continue;
            }
            let v = pgf(self.argument(h, k, exterior));
            // rounding may move a converged value by an ulp
            if (decreasing && v > h[k] + 1e-15) || (!decreasing && v < h[k] - 1e-15) {
                *violations += 1;
            }
            change = change.max((v - h[k]).abs());
            h[k] = v;
        }
        change
    }

    fn residual<F: Fn(f64) -> f64>(&self, h: &[f64], exterior: f64, pgf: &F) -> f64 {
        (0..self.n)
            .filter(|&k| Some(k) != self.pinned)
            .map(|k| (h[k] - pgf(self.argument(h, k, exterior))).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> OffspringDistribution {
        OffspringDistribution::from_ratios(&[(0, 1, 2), (2, 1, 2)]).unwrap()
    }

    #[test]
    fn origin_target_is_certain() {
        let step = StepDistribution::simple(2).unwrap();
        let f = solve_nonvisit(&binary(), &step, &[0, 0], 3, 10_000, 1e-12).unwrap();
        assert_eq!(f.visit_bracket(), (1.0, 1.0));
    }

    #[test]
    fn constant_pgf_never_visits() {
        let step = StepDistribution::simple(1).unwrap();
        let f = solve_with_pgf(|_| 1.0, &step, &[2], 5, 100, 0.0).unwrap();
        for x in -5..=5i64 {
            let (lo, hi) = f.h_bounds(&[x]);
            let expected = if x == 2 { 0.0 } else { 1.0 };
            assert_eq!((lo, hi), (expected, expected));
        }
    }

    #[test]
    fn brackets_are_ordered_and_monotone() {
        let step = StepDistribution::simple(1).unwrap();
        let f = solve_nonvisit(&binary(), &step, &[3], 30, 200_000, 1e-14).unwrap();
        assert_eq!(f.monotonicity_violations, 0);
        for (lo, hi) in f.lower.iter().zip(&f.upper) {
            assert!(0.0 <= *lo && lo <= hi && *hi <= 1.0);
        }
        assert!(f.residual < 1e-12);
        let (lo, hi) = f.visit_bracket();
        assert!(lo > 0.0 && hi < 1.0);
    }

    #[test]
    fn bracket_narrows_with_the_box() {
        let step = StepDistribution::simple(2).unwrap();
        let widths: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&r| solve_nonvisit(&binary(), &step, &[1, 1], r, 200_000, 1e-13).unwrap().width())
            .collect();
        assert!(widths[0] >= widths[1] && widths[1] >= widths[2], "{widths:?}");
    }

    #[test]
    fn line_fixture_bracket_is_tight() {
        let f = solve_nonvisit(&binary(), &StepDistribution::simple(1).unwrap(), &[3], 60, 1_000_000, 1e-15).unwrap();
        assert!(f.width() < 1e-6, "{}", f.width());
        assert!(f.exterior_lower > 0.99 && f.exterior_lower < 1.0);
        let (lo, hi) = f.visit_bracket();
        assert!(lo > 0.172 && hi < 0.1721);
    }

    #[test]
    fn exterior_closure_is_a_lower_bound() {
        // the large-box lower field dominates the small box's exterior bound
        let step = StepDistribution::simple(1).unwrap();
        let small = solve_nonvisit(&binary(), &step, &[2], 10, 1_000_000, 1e-15).unwrap();
        let big = solve_nonvisit(&binary(), &step, &[2], 40, 1_000_000, 1e-15).unwrap();
        for x in [-40i64, -11, 11, 13, 40] {
            assert!(small.exterior_lower <= big.h_bounds(&[x]).1, "{x}");
        }
        let (lo, hi) = big.visit_bracket();
        let (slo, shi) = small.visit_bracket();
        assert!(slo <= lo + 1e-15 && hi <= shi + 1e-15);
    }

    #[test]
    fn rejects_target_outside_box() {
        let step = StepDistribution::simple(1).unwrap();
        assert!(matches!(
            solve_nonvisit(&binary(), &step, &[9], 5, 10, 1e-9),
            Err(OracleError::TargetOutsideBox)
        ));
    }
}
