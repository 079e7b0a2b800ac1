//! Integer lattices generated by finite sets of vectors.
//!
//! Used to decide whether a step law generates all of Z^d, and to find the
//! period of a walk (the index of the lattice spanned by support
//! differences).

/// Echelon basis of the subgroup of Z^d spanned by some integer vectors.
#[derive(Debug, Clone)]
pub struct IntLattice {
    dim: usize,
    // rows[c] is the basis row whose first nonzero entry sits in column c
    rows: Vec<Option<Vec<i128>>>,
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

impl IntLattice {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![None; dim],
        }
    }

    pub fn generated_by<'a, I>(dim: usize, vectors: I) -> Self
    where
        I: IntoIterator<Item = &'a [i64]>,
    {
        let mut lattice = Self::new(dim);
        for v in vectors {
            lattice.insert(v);
        }
        lattice
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, v: &[i64]) {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        let mut v: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        for c in 0..self.dim {
            if v[c] == 0 {
                continue;
            }
            match self.rows[c].take() {
                None => {
                    if v[c] < 0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    self.rows[c] = Some(v);
                    self.reduce_above(c);
                    return;
                }
                Some(r) => {
                    let (g, s, t) = ext_gcd(r[c], v[c]);
                    let (rc, vc) = (r[c] / g, v[c] / g);
                    let pivot: Vec<i128> = r.iter().zip(&v).map(|(x, y)| s * x + t * y).collect();
                    let rest: Vec<i128> = r.iter().zip(&v).map(|(x, y)| vc * x - rc * y).collect();
                    self.rows[c] = Some(pivot);
                    self.reduce_above(c);
                    v = rest;
                }
            }
        }
    }

    // Keeps entries small: reduce entries right of each pivot modulo later pivots.
    fn reduce_above(&mut self, c: usize) {
        let Some(pivot_row) = self.rows[c].clone() else {
            return;
        };
        for r in 0..c {
            if let Some(row) = self.rows[r].as_mut() {
                let q = row[c].div_euclid(pivot_row[c]);
                if q != 0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= q * p);
                }
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.iter().filter(|r| r.is_some()).count()
    }

    /// Index of the lattice in Z^d, or `None` when it is not of full rank.
    pub fn index(&self) -> Option<u128> {
        let mut index: u128 = 1;
        for row in self.rows.iter().enumerate().map(|(c, r)| r.as_ref().map(|r| r[c])) {
            index = index.checked_mul(row? as u128)?;
        }
        Some(index)
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        let mut v: Vec<i128> = v.iter().map(|&x| x as i128).collect();
        for c in 0..self.dim {
            if v[c] == 0 {
                continue;
            }
            let Some(row) = self.rows[c].as_ref() else {
                return false;
            };
            if v[c] % row[c] != 0 {
                return false;
            }
            let q = v[c] / row[c];
            v.iter_mut().zip(row).for_each(|(x, r)| *x -= q * r);
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_vectors_generate_everything() {
        let e: Vec<Vec<i64>> = (0..4)
            .map(|i| (0..4).map(|j| i64::from(i == j)).collect())
            .collect();
        let l = IntLattice::generated_by(4, e.iter().map(|v| v.as_slice()));
        assert_eq!(l.index(), Some(1));
        assert!(l.contains(&[3, -7, 1, 0]));
    }

    #[test]
    fn srw_differences_have_index_two() {
        let atoms: Vec<Vec<i64>> = vec![vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]];
        let diffs: Vec<Vec<i64>> = atoms
            .iter()
            .flat_map(|a| atoms.iter().map(move |b| vec![a[0] - b[0], a[1] - b[1]]))
            .collect();
        let l = IntLattice::generated_by(2, diffs.iter().map(|v| v.as_slice()));
        assert_eq!(l.index(), Some(2));
        assert!(l.contains(&[1, 1]));
        assert!(!l.contains(&[1, 0]));
    }

    #[test]
    fn rank_deficient_has_no_index() {
        let l = IntLattice::generated_by(3, [[1i64, 1, 0].as_slice(), [2, 2, 0].as_slice()]);
        assert_eq!(l.rank(), 1);
        assert_eq!(l.index(), None);
    }

    fn det3(m: &[[i64; 3]; 3]) -> i64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    proptest! {
        // Vectors drawn from B·Z^3 never generate Z^3 when |det B| >= 2, and
        // the basis columns themselves give exactly |det B|.
        #[test]
        fn sublattice_index_matches_determinant(
            b in prop::array::uniform3(prop::array::uniform3(-4i64..=4)),
            coeffs in prop::collection::vec(prop::array::uniform3(-3i64..=3), 1..12),
        ) {
            let det = det3(&b).abs();
            prop_assume!(det != 0);
            let cols: Vec<Vec<i64>> = (0..3).map(|j| (0..3).map(|i| b[i][j]).collect()).collect();
            let basis = IntLattice::generated_by(3, cols.iter().map(|v| v.as_slice()));
            prop_assert_eq!(basis.index(), Some(det as u128));
            let points: Vec<Vec<i64>> = coeffs
                .iter()
                .map(|c| (0..3).map(|i| (0..3).map(|j| b[i][j] * c[j]).sum()).collect())
                .collect();
            let sub = IntLattice::generated_by(3, points.iter().map(|v| v.as_slice()));
            if det >= 2 {
                prop_assert_ne!(sub.index(), Some(1));
            }
            for p in &points {
                prop_assert!(basis.contains(p));
            }
        }
    }
}
