//! Green function by direct summation of n-step laws.
//!
//! The n-step law is propagated on an enlarged box whose margin is three
//! standard deviations of the walk at time n_max; mass leaving the box is
//! discarded, so partial sums are lower bounds. The remainder Σ_{n>n_max} is
//! estimated from the local limit theorem on the coset of the difference
//! lattice that x occupies, and a Richardson step between n_max/2 and n_max
//! removes the leading O(n^{-d/2}) error of that estimate.

use std::collections::HashMap;

use super::{check_transient, GreenError, GreenMethod, GreenTable, StepGaussian, Symmetry};
use crate::distributions::StepDistribution;
use crate::point::{pack, sup_norm, Coords};

/// Partial sums, remainder estimates and the extrapolated table.
#[derive(Debug, Clone)]
pub struct ConvolutionGreen {
    pub n_max: u64,
    /// Σ_{n≤n_max} θ^{*n}(x), restricted to the enlarged box.
    pub partial: GreenTable,
    /// Estimated Σ_{n>n_max} θ^{*n}(x), aligned with `partial.entries()`.
    pub tail: Vec<f64>,
    /// Partial sum plus remainder, extrapolated.
    pub estimate: GreenTable,
    pub work_radius: i64,
}

impl ConvolutionGreen {
    pub fn table(&self) -> &GreenTable {
        &self.estimate
    }
}

pub fn green_convolution(
    step: &StepDistribution,
    box_radius: i64,
    n_max: u64,
) -> Result<ConvolutionGreen, GreenError> {
    check_transient(step)?;
    if box_radius < 0 {
        return Err(GreenError::InvalidParameter(format!("radius {box_radius}")));
    }
    let d = step.dim();
    let symmetry = Symmetry::of_step(step);
    let gaussian = StepGaussian::of_step(step);
    let var_max = (0..d).map(|i| step.covariance()[i][i]).fold(0.0, f64::max);
    let margin = (3.0 * (n_max as f64 * var_max).sqrt()).ceil() as i64 + step.range();
    let work_radius = box_radius + margin;

    let sites = symmetry.canonical_sites(work_radius);
    let index: HashMap<u128, u32> = sites
        .iter()
        .enumerate()
        .map(|(i, c)| (pack(&c[..d]), i as u32))
        .collect();
    let outside = sites.len() as u32;
    let atoms: Vec<(Coords, f64)> = (0..step.len()).map(|k| (*step.coords(k), step.weight(k))).collect();
    let mut neighbours = Vec::with_capacity(sites.len() * atoms.len());
    let mut back = [0i64; crate::point::MAX_DIM];
    for c in &sites {
        for (y, _) in &atoms {
            for i in 0..d {
                back[i] = c[i] - y[i];
            }
            let slot = if sup_norm(&back[..d]) > work_radius {
                outside
            } else {
                index[&pack(&symmetry.canonical(&back[..d])[..d])]
            };
            neighbours.push(slot);
        }
    }

    let origin = index[&pack(&vec![0; d])] as usize;
    let mut law = vec![0.0; sites.len() + 1];
    law[origin] = 1.0;
    let mut next = vec![0.0; sites.len() + 1];
    let mut sum = law.clone();
    let half_n = n_max / 2;
    let mut half_sum = if half_n == 0 { sum.clone() } else { Vec::new() };
    let m = atoms.len();
    for n in 1..=n_max {
        for (i, slot) in next[..sites.len()].iter_mut().enumerate() {
            let nb = &neighbours[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (k, &j) in nb.iter().enumerate() {
                acc += atoms[k].1 * law[j as usize];
            }
            *slot = acc;
        }
        std::mem::swap(&mut law, &mut next);
        for (s, p) in sum.iter_mut().zip(&law) {
            *s += p;
        }
        if n == half_n {
            half_sum = sum.clone();
        }
    }

    let period = step.period() as u64;
    let lattice = step.difference_lattice();
    let first = step.vector(0).to_vec();
    let class_of = |x: &[i64]| -> u64 {
        (0..period)
            .find(|&r| {
                let shifted: Vec<i64> = (0..d).map(|i| x[i] - r as i64 * first[i]).collect();
                lattice.contains(&shifted)
            })
            .expect("the cosets of the difference lattice are reached by multiples of one step")
    };
    let remainder = |x: &[i64], after: u64| -> f64 {
        let r = class_of(x);
        // first n > after with n ≡ r (mod period)
        let n0 = after + 1 + (r + period - (after + 1) % period) % period;
        gaussian.time_tail(gaussian.quad_form(x), n0 as f64 - period as f64 / 2.0)
    };
    let ratio = 2f64.powf(d as f64 / 2.0) - 1.0;
    let mut kept = Vec::new();
    let (mut partial, mut tail, mut estimate) = (Vec::new(), Vec::new(), Vec::new());
    let mut correction: f64 = 0.0;
    for (i, c) in sites.iter().enumerate() {
        let x = &c[..d];
        // keep only the requested box
        if sup_norm(x) > box_radius {
            continue;
        }
        kept.push(*c);
        let t = remainder(x, n_max);
        let full = sum[i] + t;
        let value = if n_max >= 2 {
            let coarse = half_sum[i] + remainder(x, half_n);
            let delta = (full - coarse) / ratio;
            correction = correction.max(delta.abs());
            full + delta
        } else {
            full
        };
        partial.push(sum[i]);
        tail.push(t);
        estimate.push(value);
    }
    let tail_max = tail.iter().cloned().fold(0.0, f64::max);
    let tol = if n_max >= 2 { correction } else { tail_max };
    Ok(ConvolutionGreen {
        n_max,
        partial: GreenTable::from_parts(
            step,
            box_radius,
            GreenMethod::Convolution,
            tail_max,
            symmetry.clone(),
            kept.clone(),
            partial,
        ),
        tail,
        estimate: GreenTable::from_parts(
            step,
            box_radius,
            GreenMethod::Convolution,
            tol,
            symmetry,
            kept,
            estimate,
        ),
        work_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::green_quadrature;

    #[test]
    fn zero_steps_give_delta() {
        let step = StepDistribution::simple(3).unwrap();
        let c = green_convolution(&step, 3, 0).unwrap();
        for (x, v) in c.partial.entries() {
            let expected = if x.iter().all(|&v| v == 0) { 1.0 } else { 0.0 };
            assert_eq!(v, expected);
        }
    }

    #[test]
    fn partial_sums_increase_with_consistent_increments() {
        let step = StepDistribution::simple(4).unwrap();
        let runs: Vec<ConvolutionGreen> = [25, 50, 100, 200]
            .iter()
            .map(|&n| green_convolution(&step, 3, n).unwrap())
            .collect();
        for w in runs.windows(2) {
            for ((_, a), (_, b)) in w[0].partial.entries().zip(w[1].partial.entries()) {
                assert!(b >= a);
            }
        }
        let g0: Vec<f64> = runs.iter().map(|r| r.partial.value(&[0; 4])).collect();
        // increments over doublings shrink like n^{-1} in d = 4
        for k in 0..2 {
            let ratio = (g0[k + 1] - g0[k]) / (g0[k + 2] - g0[k + 1]);
            assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn agrees_with_quadrature_in_three_dimensions() {
        let step = StepDistribution::simple(3).unwrap();
        let q = green_quadrature(&step, 5, 1e-8).unwrap();
        let c = green_convolution(&step, 5, 400).unwrap();
        for (x, v) in c.estimate.entries() {
            assert!((v - q.value(x)).abs() < 2e-5, "{x:?}: {v} vs {}", q.value(x));
        }
    }

    #[test]
    fn skewed_walk_agrees() {
        // skewed along the first axis, aperiodic
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
        let q = green_quadrature(&step, 4, 1e-8).unwrap();
        let c = green_convolution(&step, 4, 400).unwrap();
        for (x, v) in c.estimate.entries() {
            assert!((v - q.value(x)).abs() < 5e-5, "{x:?}: {v} vs {}", q.value(x));
        }
    }
}
