//! Truncated power series with exact rational coefficients.
//!
//! Coefficient j of a size generating function is the probability that the
//! tree has exactly j particles.

use num_rational::BigRational;
use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq)]
pub struct Series(pub Vec<BigRational>);

impl Series {
    pub fn zero(degree: usize) -> Self {
        Series(vec![BigRational::zero(); degree + 1])
    }

    pub fn one(degree: usize) -> Self {
        let mut s = Self::zero(degree);
        s.0[0] = BigRational::one();
        s
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn mul(&self, other: &Series) -> Series {
        let n = self.degree();
        let mut out = Series::zero(n);
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.0.iter().enumerate().take(n + 1 - i) {
                if !b.is_zero() {
                    out.0[i + j] += a * b;
                }
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Series {
        let mut out = Series::one(self.degree());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Series {
        Series(self.0.iter().map(|a| a * c).collect())
    }

    pub fn add_assign(&mut self, other: &Series) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &Series) -> Series {
        Series(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Multiplication by x, dropping the top coefficient.
    pub fn shift(&self) -> Series {
        let mut v = vec![BigRational::zero()];
        v.extend(self.0[..self.degree()].iter().cloned());
        Series(v)
    }

    /// Σ_k p_k S^k.
    pub fn compose_pgf(&self, atoms: &[(u32, BigRational)]) -> Series {
        let mut out = Series::zero(self.degree());
        for (k, p) in atoms {
            out.add_assign(&self.pow(*k).scale(p));
        }
        out
    }

    /// Sum of coefficients, i.e. the value at x = 1 of the truncation.
    pub fn total(&self) -> BigRational {
        self.0.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn binary_tree_sizes_are_catalan() {
        // T = x(1/2 + T²/2): P(|T| = 2n+1) = C_n / 2^{2n+1}
        let atoms = vec![(0, r(1, 2)), (2, r(1, 2))];
        let mut t = Series::zero(9);
        for _ in 0..10 {
            t = t.compose_pgf(&atoms).shift();
        }
        let catalan = [1, 1, 2, 5, 14];
        for (n, c) in catalan.iter().enumerate() {
            assert_eq!(t.0[2 * n + 1], r(*c, 1 << (2 * n + 1)));
            assert!(t.0[2 * n].is_zero());
        }
    }
}
