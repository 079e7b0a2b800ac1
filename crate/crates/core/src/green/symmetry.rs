//! Reduction of lattice boxes by the coordinate symmetries of a step law.
//!
//! The group used is generated by single-coordinate sign flips and
//! coordinate transpositions that leave θ invariant. Transpositions generate
//! full symmetric groups on the connected blocks they link, so a canonical
//! representative is obtained by taking absolute values on flippable
//! coordinates and sorting inside each block.

use crate::distributions::{StepDistribution, WEIGHT_TOL};
use crate::point::{Coords, MAX_DIM};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symmetry {
    dim: usize,
    flips: Vec<bool>,
    blocks: Vec<Vec<usize>>,
}

impl Symmetry {
    pub fn trivial(dim: usize) -> Self {
        Self {
            dim,
            flips: vec![false; dim],
            blocks: (0..dim).map(|i| vec![i]).collect(),
        }
    }

    pub fn of_step(step: &StepDistribution) -> Self {
        let dim = step.dim();
        let invariant = |map: &dyn Fn(&[i64]) -> Vec<i64>| {
            step.atoms()
                .all(|(v, w)| (step.prob(&map(v)) - w).abs() <= WEIGHT_TOL)
        };
        let flips: Vec<bool> = (0..dim)
            .map(|i| {
                invariant(&|v: &[i64]| {
                    let mut u = v.to_vec();
                    u[i] = -u[i];
                    u
                })
            })
            .collect();
        // union-find over invariant transpositions
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        for i in 0..dim {
            for j in i + 1..dim {
                let swaps = invariant(&|v: &[i64]| {
                    let mut u = v.to_vec();
                    u.swap(i, j);
                    u
                });
                if swaps {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for i in 0..dim {
            let root = find(&mut parent, i);
            match blocks.iter_mut().find(|b| b[0] == root) {
                Some(b) => b.push(i),
                None => blocks.push(vec![i]),
            }
        }
        Self { dim, flips, blocks }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Order of the group.
    pub fn order(&self) -> u64 {
        let flips = 1u64 << self.flips.iter().filter(|&&f| f).count();
        self.blocks
            .iter()
            .map(|b| (1..=b.len() as u64).product::<u64>())
            .product::<u64>()
            * flips
    }

    #[inline]
    pub fn canonical(&self, x: &[i64]) -> Coords {
        let mut c = [0i64; MAX_DIM];
        for i in 0..self.dim {
            c[i] = if self.flips[i] { x[i].abs() } else { x[i] };
        }
        for b in &self.blocks {
            if b.len() > 1 {
                let mut vals: Vec<i64> = b.iter().map(|&i| c[i]).collect();
                vals.sort_unstable();
                for (&i, v) in b.iter().zip(vals) {
                    c[i] = v;
                }
            }
        }
        c
    }

    pub fn is_canonical(&self, x: &[i64]) -> bool {
        self.canonical(x)[..self.dim] == x[..self.dim]
    }

    /// Number of distinct images of a canonical point.
    pub fn orbit_size(&self, x: &[i64]) -> u64 {
        let mut size = 1u64;
        for (&flip, &xi) in self.flips.iter().zip(x) {
            if flip && xi != 0 {
                size *= 2;
            }
        }
        for b in &self.blocks {
            let mut vals: Vec<i64> = b.iter().map(|&i| x[i]).collect();
            vals.sort_unstable();
            let mut perms: u64 = (1..=vals.len() as u64).product();
            let mut run = 1u64;
            for w in vals.windows(2) {
                if w[0] == w[1] {
                    run += 1;
                    perms /= run;
                } else {
                    run = 1;
                }
            }
            size *= perms;
        }
        size
    }

    /// Canonical representatives of the box ‖x‖∞ ≤ radius, in lexicographic order.
    pub fn canonical_sites(&self, radius: i64) -> Vec<Coords> {
        let mut prev_in_block = vec![None; self.dim];
        for b in &self.blocks {
            for w in b.windows(2) {
                prev_in_block[w[1]] = Some(w[0]);
            }
        }
        let mut out = Vec::new();
        let mut cur = [0i64; MAX_DIM];
        self.fill(0, radius, &prev_in_block, &mut cur, &mut out);
        out
    }

    fn fill(
        &self,
        i: usize,
        radius: i64,
        prev: &[Option<usize>],
        cur: &mut Coords,
        out: &mut Vec<Coords>,
    ) {
        if i == self.dim {
            out.push(*cur);
            return;
        }
        let mut lo = if self.flips[i] { 0 } else { -radius };
        if let Some(p) = prev[i] {
            lo = lo.max(cur[p]);
        }
        for v in lo..=radius {
            cur[i] = v;
            self.fill(i + 1, radius, prev, cur, out);
        }
        cur[i] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_count(sym: &Symmetry, radius: i64) -> u64 {
        sym.canonical_sites(radius)
            .iter()
            .map(|c| sym.orbit_size(&c[..sym.dim()]))
            .sum()
    }

    #[test]
    fn srw_has_hyperoctahedral_symmetry() {
        let sym = Symmetry::of_step(&StepDistribution::simple(4).unwrap());
        assert_eq!(sym.order(), 16 * 24);
        assert_eq!(box_count(&sym, 5), 11u64.pow(4));
        assert_eq!(&sym.canonical(&[3, -1, 0, -2])[..4], &[0, 1, 2, 3]);
    }

    #[test]
    fn skewed_walk_has_no_flips() {
        let step = StepDistribution::new(
            3,
            &[
                (vec![1, 0, 0], 2.0 / 9.0),
                (vec![-2, 0, 0], 1.0 / 9.0),
                (vec![0, 1, 0], 2.0 / 9.0),
                (vec![0, -2, 0], 1.0 / 9.0),
                (vec![0, 0, 1], 1.0 / 6.0),
                (vec![0, 0, -1], 1.0 / 6.0),
            ],
        )
        .unwrap();
        let sym = Symmetry::of_step(&step);
        assert_eq!(sym.order(), 4);
        assert_eq!(box_count(&sym, 3), 7u64.pow(3));
        let x = [-3, 2, -1];
        let c = sym.canonical(&x);
        assert_eq!(&c[..3], &[-3, 2, 1]);
    }

    #[test]
    fn trivial_group_enumerates_whole_box() {
        let sym = Symmetry::trivial(2);
        assert_eq!(sym.canonical_sites(2).len(), 25);
        assert_eq!(sym.order(), 1);
    }
}
