//! Offspring law μ on ℕ and jump law θ on Z^d.
//!
//! Both are finite-support laws validated against the hypotheses of the
//! visiting-probability theorem: μ critical and nondegenerate, θ centred and
//! not supported on a strict subgroup of Z^d. Weights may be given as floats
//! or as exact rationals; when every weight is rational the normalisation,
//! criticality and zero-mean checks are exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use crate::sampling::{IndexSampler, WordSource};
use thiserror::Error;

use crate::lattice::IntLattice;
use crate::point::{Coords, MAX_DIM};

/// Tolerance on Σp = 1, Eμ = 1 and Eθ = 0 for floating-point weights.
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("distribution has no atoms")]
    Empty,
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("weights sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("offspring mean is {0}, not 1")]
    NotCritical(f64),
    #[error("offspring law is the point mass at 1")]
    Degenerate,
    #[error("step mean {0:?} is not zero")]
    NonzeroMean(Vec<f64>),
    #[error("support generates a sublattice of index {index:?} (None: rank deficient)")]
    StrictSubgroup { index: Option<u128> },
    #[error("atom has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension must be in 1..={MAX_DIM}, got {0}")]
    UnsupportedDimension(usize),
}

/// A probability weight, optionally carrying its exact rational value.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Float(f64),
    Exact(BigRational),
}

impl Weight {
    pub fn ratio(num: i64, den: i64) -> Self {
        Weight::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn value(&self) -> f64 {
        match self {
            Weight::Float(x) => *x,
            Weight::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    fn exact(&self) -> Option<&BigRational> {
        match self {
            Weight::Exact(r) => Some(r),
            Weight::Float(_) => None,
        }
    }
}

impl From<f64> for Weight {
    fn from(x: f64) -> Self {
        Weight::Float(x)
    }
}

/// Parses `"p/q"`, a decimal literal such as `"0.25"` (kept exact), or
/// anything `f64::from_str` accepts.
impl std::str::FromStr for Weight {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
            let q: BigInt = q.trim().parse().map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
            if q.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            return Ok(Weight::Exact(BigRational::new(p, q)));
        }
        let plain = s.strip_prefix('+').unwrap_or(s);
        let (neg, digits) = match plain.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, plain),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        let decimal = !digits.is_empty()
            && int_part.chars().all(|c| c.is_ascii_digit())
            && frac_part.chars().all(|c| c.is_ascii_digit())
            && !(int_part.is_empty() && frac_part.is_empty());
        if decimal {
            let mantissa: BigInt = format!("{int_part}{frac_part}").parse().unwrap_or_default();
            let scale = num_traits::pow(BigInt::from(10), frac_part.len());
            let r = BigRational::new(mantissa, scale);
            return Ok(Weight::Exact(if neg { -r } else { r }));
        }
        s.parse::<f64>()
            .map(Weight::Float)
            .map_err(|e| format!("bad weight {s:?}: {e}"))
    }
}

fn all_exact(weights: &[&Weight]) -> Option<Vec<BigRational>> {
    weights.iter().map(|w| w.exact().cloned()).collect()
}

/// Critical, nondegenerate offspring law with finite support.
#[derive(Debug, Clone)]
pub struct OffspringDistribution {
    values: Vec<u32>,
    probs: Vec<f64>,
    exact: Option<Vec<BigRational>>,
    mean: f64,
    p_ge2: f64,
    p1: f64,
    sampler: IndexSampler,
}

impl OffspringDistribution {
    pub fn new(probs: &[(u32, f64)]) -> Result<Self, DistributionError> {
        let weights: Vec<(u32, Weight)> = probs.iter().map(|&(k, p)| (k, Weight::Float(p))).collect();
        Self::from_weights(&weights)
    }

    /// `probs` as `(k, numerator, denominator)`.
    pub fn from_ratios(probs: &[(u32, i64, i64)]) -> Result<Self, DistributionError> {
        let weights: Vec<(u32, Weight)> = probs
            .iter()
            .map(|&(k, p, q)| (k, Weight::ratio(p, q)))
            .collect();
        Self::from_weights(&weights)
    }

    pub fn from_weights(probs: &[(u32, Weight)]) -> Result<Self, DistributionError> {
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (_, w) in probs {
            let v = w.value();
            if v < 0.0 || w.exact().is_some_and(|r| r.is_negative()) {
                return Err(DistributionError::NegativeWeight(v));
            }
        }
        // merge repeated k, keep positive mass only
        let mut merged: Vec<(u32, Weight)> = Vec::new();
        for (k, w) in probs {
            match merged.iter_mut().find(|(j, _)| j == k) {
                Some((_, acc)) => *acc = add_weights(acc, w),
                None => merged.push((*k, w.clone())),
            }
        }
        merged.sort_by_key(|(k, _)| *k);
        merged.retain(|(_, w)| w.value() > 0.0);
        if merged.is_empty() {
            return Err(DistributionError::NotNormalized(0.0));
        }

        let refs: Vec<&Weight> = merged.iter().map(|(_, w)| w).collect();
        let exact = all_exact(&refs);
        let values: Vec<u32> = merged.iter().map(|(k, _)| *k).collect();
        let probs: Vec<f64> = refs.iter().map(|w| w.value()).collect();
        let total: f64 = probs.iter().sum();
        let mean: f64 = values.iter().zip(&probs).map(|(&k, p)| k as f64 * p).sum();

        match &exact {
            Some(ex) => {
                let total_ex: BigRational = ex.iter().sum();
                if !total_ex.is_one() {
                    return Err(DistributionError::NotNormalized(total));
                }
                let mean_ex: BigRational = values
                    .iter()
                    .zip(ex)
                    .map(|(&k, p)| p * BigRational::from_integer(BigInt::from(k)))
                    .sum();
                if !mean_ex.is_one() {
                    return Err(DistributionError::NotCritical(mean));
                }
            }
            None => {
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(DistributionError::NotNormalized(total));
                }
                if (mean - 1.0).abs() > WEIGHT_TOL {
                    return Err(DistributionError::NotCritical(mean));
                }
            }
        }

        let p1: f64 = values.iter().zip(&probs).filter(|(&k, _)| k == 1).fold(0.0, |acc, (_, p)| acc + p);
        let degenerate = match &exact {
            Some(ex) => values.iter().zip(ex).any(|(&k, p)| k == 1 && p.is_one()),
            None => p1 >= 1.0 - WEIGHT_TOL,
        };
        if degenerate {
            return Err(DistributionError::Degenerate);
        }
        let p_ge2 = values.iter().zip(&probs).filter(|(&k, _)| k >= 2).map(|(_, p)| p).sum();
        let sampler = IndexSampler::new(&probs, exact.as_deref());
        Ok(Self {
            values,
            probs,
            exact,
            mean,
            p_ge2,
            p1,
            sampler,
        })
    }

    /// Atoms `(k, P(μ = k))` with positive mass, sorted by `k`.
    pub fn atoms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn exact_atoms(&self) -> Option<impl Iterator<Item = (u32, &BigRational)> + '_> {
        self.exact
            .as_ref()
            .map(|ex| self.values.iter().copied().zip(ex.iter()))
    }

    pub fn prob(&self, k: u32) -> f64 {
        self.atoms().find(|&(j, _)| j == k).map_or(0.0, |(_, p)| p)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.atoms()
            .map(|(k, p)| p * (k as f64 - self.mean).powi(2))
            .sum()
    }

    /// P(μ ≥ 2).
    pub fn p_ge2(&self) -> f64 {
        self.p_ge2
    }

    /// P(μ = 1).
    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn max_offspring(&self) -> u32 {
        *self.values.last().expect("nonempty")
    }

    /// Probability generating function f(s) = Σ p_k s^k.
    pub fn pgf(&self, s: f64) -> f64 {
        self.atoms().map(|(k, p)| p * s.powi(k as i32)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.sample_from(&mut WordSource::new(rng))
    }

    #[inline]
    pub fn sample_from<R: Rng + ?Sized>(&self, src: &mut WordSource<'_, R>) -> u32 {
        self.values[self.sampler.sample(src)]
    }
}

fn add_weights(a: &Weight, b: &Weight) -> Weight {
    match (a, b) {
        (Weight::Exact(x), Weight::Exact(y)) => Weight::Exact(x + y),
        _ => Weight::Float(a.value() + b.value()),
    }
}

/// Centred finite-support jump law on Z^d whose support generates Z^d.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    dim: usize,
    vectors: Vec<Vec<i64>>,
    coords: Vec<Coords>,
    weights: Vec<f64>,
    exact: Option<Vec<BigRational>>,
    mean_vec: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    moment5: f64,
    sampler: IndexSampler,
}

impl StepDistribution {
    pub fn new(dim: usize, atoms: &[(Vec<i64>, f64)]) -> Result<Self, DistributionError> {
        let weights: Vec<(Vec<i64>, Weight)> = atoms
            .iter()
            .map(|(v, p)| (v.clone(), Weight::Float(*p)))
            .collect();
        Self::from_weights(dim, &weights)
    }

    /// Simple random walk: uniform on the 2d unit vectors ±e_i, exact weights.
    pub fn simple(dim: usize) -> Result<Self, DistributionError> {
        let atoms: Vec<(Vec<i64>, Weight)> = (0..dim)
            .flat_map(|i| {
                [1i64, -1].into_iter().map(move |s| {
                    let mut v = vec![0; dim];
                    v[i] = s;
                    (v, Weight::ratio(1, 2 * dim as i64))
                })
            })
            .collect();
        Self::from_weights(dim, &atoms)
    }

    pub fn from_weights(dim: usize, atoms: &[(Vec<i64>, Weight)]) -> Result<Self, DistributionError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(DistributionError::UnsupportedDimension(dim));
        }
        if atoms.is_empty() {
            return Err(DistributionError::Empty);
        }
        let mut merged: Vec<(Vec<i64>, Weight)> = Vec::new();
        for (v, w) in atoms {
            if v.len() != dim {
                return Err(DistributionError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            let value = w.value();
            if value < 0.0 || w.exact().is_some_and(|r| r.is_negative()) {
                return Err(DistributionError::NegativeWeight(value));
            }
            match merged.iter_mut().find(|(u, _)| u == v) {
                Some((_, acc)) => *acc = add_weights(acc, w),
                None => merged.push((v.clone(), w.clone())),
            }
        }
        merged.retain(|(_, w)| w.value() > 0.0);
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        if merged.is_empty() {
            return Err(DistributionError::NotNormalized(0.0));
        }

        let refs: Vec<&Weight> = merged.iter().map(|(_, w)| w).collect();
        let exact = all_exact(&refs);
        let vectors: Vec<Vec<i64>> = merged.iter().map(|(v, _)| v.clone()).collect();
        let weights: Vec<f64> = refs.iter().map(|w| w.value()).collect();
        let total: f64 = weights.iter().sum();
        let mean_vec: Vec<f64> = (0..dim)
            .map(|i| vectors.iter().zip(&weights).map(|(v, w)| v[i] as f64 * w).sum())
            .collect();

        match &exact {
            Some(ex) => {
                let total_ex: BigRational = ex.iter().sum();
                if !total_ex.is_one() {
                    return Err(DistributionError::NotNormalized(total));
                }
                for i in 0..dim {
                    let m: BigRational = vectors
                        .iter()
                        .zip(ex)
                        .map(|(v, w)| w * BigRational::from_integer(BigInt::from(v[i])))
                        .sum();
                    if !m.is_zero() {
                        return Err(DistributionError::NonzeroMean(mean_vec));
                    }
                }
            }
            None => {
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(DistributionError::NotNormalized(total));
                }
                if mean_vec.iter().any(|m| m.abs() > WEIGHT_TOL) {
                    return Err(DistributionError::NonzeroMean(mean_vec));
                }
            }
        }

        let lattice = IntLattice::generated_by(dim, vectors.iter().map(|v| v.as_slice()));
        let index = lattice.index();
        if index != Some(1) {
            return Err(DistributionError::StrictSubgroup { index });
        }

        let covariance: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        vectors
                            .iter()
                            .zip(&weights)
                            .map(|(v, w)| w * v[i] as f64 * v[j] as f64)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let moment5 = vectors
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * v.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt().powi(5))
            .sum();
        let coords = vectors.iter().map(|v| crate::point::to_coords(v)).collect();
        let sampler = IndexSampler::new(&weights, exact.as_deref());
        Ok(Self {
            dim,
            vectors,
            coords,
            weights,
            exact,
            mean_vec,
            covariance,
            moment5,
            sampler,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Atoms `(y, θ(y))` with positive mass, sorted lexicographically by `y`.
    pub fn atoms(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.vectors.iter().map(|v| v.as_slice()).zip(self.weights.iter().copied())
    }

    pub fn exact_weights(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[i64] {
        &self.vectors[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn coords(&self, i: usize) -> &Coords {
        &self.coords[i]
    }

    pub fn prob(&self, y: &[i64]) -> f64 {
        self.vectors
            .iter()
            .position(|v| v == y)
            .map_or(0.0, |i| self.weights[i])
    }

    pub fn mean_vec(&self) -> &[f64] {
        &self.mean_vec
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    /// E|θ|⁵ (Euclidean norm).
    pub fn moment5(&self) -> f64 {
        self.moment5
    }

    /// Largest sup-norm of a support vector.
    pub fn range(&self) -> i64 {
        self.vectors
            .iter()
            .map(|v| v.iter().map(|x| x.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.atoms().all(|(v, w)| {
            let neg: Vec<i64> = v.iter().map(|x| -x).collect();
            (self.prob(&neg) - w).abs() <= WEIGHT_TOL
        })
    }

    /// The law of −θ.
    pub fn reversed(&self) -> Self {
        let atoms: Vec<(Vec<i64>, Weight)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let w = match &self.exact {
                    Some(ex) => Weight::Exact(ex[i].clone()),
                    None => Weight::Float(self.weights[i]),
                };
                (v.iter().map(|x| -x).collect(), w)
            })
            .collect();
        Self::from_weights(self.dim, &atoms).expect("negation preserves validity")
    }

    /// Index of the lattice spanned by differences of support points, which
    /// is also the period of the walk.
    pub fn period(&self) -> u128 {
        self.difference_lattice().index().expect("full rank for a generating support")
    }

    pub fn difference_lattice(&self) -> IntLattice {
        let base = &self.vectors[0];
        let diffs: Vec<Vec<i64>> = self
            .vectors
            .iter()
            .map(|v| v.iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        IntLattice::generated_by(self.dim, diffs.iter().map(|v| v.as_slice()))
    }

    /// Stable textual description, used for cache keys.
    pub fn fingerprint(&self) -> String {
        let mut s = format!("d={}", self.dim);
        for (i, (v, w)) in self.atoms().enumerate() {
            match &self.exact {
                Some(ex) => s.push_str(&format!(";{v:?}:{}", ex[i])),
                None => s.push_str(&format!(";{v:?}:{w:e}")),
            }
        }
        s
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(&mut WordSource::new(rng))
    }

    #[inline]
    pub fn sample_index_from<R: Rng + ?Sized>(&self, src: &mut WordSource<'_, R>) -> usize {
        self.sampler.sample(src)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[i64] {
        &self.vectors[self.sample_index(rng)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn binary_critical_law_is_valid() {
        let mu = OffspringDistribution::from_ratios(&[(0, 1, 2), (2, 1, 2)]).unwrap();
        assert_eq!(mu.mean(), 1.0);
        assert_eq!(mu.p_ge2(), 0.5);
        assert_eq!(mu.p1(), 0.0);
        assert!(mu.exact_atoms().is_some());
        let float = OffspringDistribution::new(&[(0, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(float.variance(), 1.0);
    }

    #[test]
    fn point_mass_at_one_is_degenerate() {
        assert_eq!(
            OffspringDistribution::new(&[(1, 1.0)]).unwrap_err(),
            DistributionError::Degenerate
        );
    }

    #[test]
    fn supercritical_law_is_rejected() {
        let err = OffspringDistribution::from_ratios(&[(0, 1, 2), (3, 1, 2)]).unwrap_err();
        assert_eq!(err, DistributionError::NotCritical(1.5));
    }

    #[test]
    fn offspring_errors() {
        assert_eq!(
            OffspringDistribution::new(&[]).unwrap_err(),
            DistributionError::Empty
        );
        assert!(matches!(
            OffspringDistribution::new(&[(0, 0.6), (2, 0.5)]).unwrap_err(),
            DistributionError::NotNormalized(_)
        ));
        assert!(matches!(
            OffspringDistribution::new(&[(0, -0.5), (2, 1.5)]).unwrap_err(),
            DistributionError::NegativeWeight(_)
        ));
        // mean 1.2
        let mu = OffspringDistribution::new(&[(0, 0.3), (1, 0.4), (2, 0.1), (3, 0.2)]);
        assert!(matches!(mu.unwrap_err(), DistributionError::NotCritical(_)));
        let mu = OffspringDistribution::new(&[(0, 0.4), (1, 0.3), (2, 0.2), (3, 0.1)]).unwrap();
        assert!((mu.mean() - 1.0).abs() < 1e-12);
        assert!((mu.p_ge2() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn decimal_strings_parse_exactly() {
        let w: Weight = "0.25".parse().unwrap();
        assert_eq!(w, Weight::ratio(1, 4));
        let w: Weight = " 2/6 ".parse().unwrap();
        assert_eq!(w, Weight::ratio(1, 3));
        let w: Weight = "1e-3".parse().unwrap();
        assert_eq!(w, Weight::Float(1e-3));
        assert!("1/0".parse::<Weight>().is_err());
        let mu = OffspringDistribution::from_weights(&[
            (0, "0.1".parse().unwrap()),
            (1, "0.8".parse().unwrap()),
            (2, "0.1".parse().unwrap()),
        ])
        .unwrap();
        assert!(mu.exact_atoms().is_some());
    }

    #[test]
    fn srw_d4_is_valid() {
        let theta = StepDistribution::simple(4).unwrap();
        assert_eq!(theta.len(), 8);
        assert!(theta.mean_vec().iter().all(|&m| m == 0.0));
        assert!(theta.is_symmetric());
        assert_eq!(theta.period(), 2);
        assert_eq!(theta.moment5(), 1.0);
        assert_eq!(theta.covariance()[0][0], 0.25);
        assert_eq!(theta.covariance()[0][1], 0.0);
    }

    #[test]
    fn even_sublattice_is_strict_subgroup() {
        let atoms: Vec<(Vec<i64>, f64)> = vec![
            (vec![2, 0], 0.25),
            (vec![-2, 0], 0.25),
            (vec![0, 2], 0.25),
            (vec![0, -2], 0.25),
        ];
        assert_eq!(
            StepDistribution::new(2, &atoms).unwrap_err(),
            DistributionError::StrictSubgroup { index: Some(4) }
        );
    }

    #[test]
    fn skewed_one_dimensional_step_is_centred() {
        let theta = StepDistribution::from_weights(
            1,
            &[(vec![1], Weight::ratio(2, 3)), (vec![-2], Weight::ratio(1, 3))],
        )
        .unwrap();
        assert_eq!(theta.mean_vec(), &[0.0]);
        assert!(!theta.is_symmetric());
        assert_eq!(theta.period(), 3);
        assert_eq!(theta.reversed().prob(&[2]), 1.0 / 3.0);
    }

    #[test]
    fn step_errors() {
        assert_eq!(
            StepDistribution::new(2, &[(vec![1, 0], 1.0)]).unwrap_err(),
            DistributionError::NonzeroMean(vec![1.0, 0.0])
        );
        assert!(matches!(
            StepDistribution::new(2, &[(vec![1], 0.5), (vec![-1], 0.5)]).unwrap_err(),
            DistributionError::DimensionMismatch { expected: 2, found: 1 }
        ));
        assert!(matches!(
            StepDistribution::new(1, &[(vec![1], 0.5), (vec![-1], 0.6)]).unwrap_err(),
            DistributionError::NotNormalized(_)
        ));
        // a line in Z^2 is rank deficient
        assert_eq!(
            StepDistribution::new(2, &[(vec![1, 1], 0.5), (vec![-1, -1], 0.5)]).unwrap_err(),
            DistributionError::StrictSubgroup { index: None }
        );
        assert!(matches!(
            StepDistribution::new(0, &[]).unwrap_err(),
            DistributionError::UnsupportedDimension(0)
        ));
    }

    #[test]
    fn offspring_sampling_matches_law() {
        let mu = OffspringDistribution::from_ratios(&[(0, 1, 2), (2, 1, 2)]).unwrap();
        let mut rng = substream(7, 0, 0);
        let n = 1_000_000;
        let mut sum = 0u64;
        let mut zeros = 0u64;
        for _ in 0..n {
            let k = mu.sample(&mut rng);
            assert!(k == 0 || k == 2);
            zeros += u64::from(k == 0);
            sum += u64::from(k);
        }
        // σ² = Σ p_k k² − 1 = 1
        let mean = sum as f64 / n as f64;
        assert!((mean - 1.0).abs() <= 3.0 * 1.0 / 1000.0, "mean {mean}");
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 4.0 * (0.25f64 / n as f64).sqrt());
    }

    #[test]
    fn general_offspring_frequencies_within_four_binomial_errors() {
        let mu = OffspringDistribution::new(&[(0, 0.4), (1, 0.3), (2, 0.2), (3, 0.1)]).unwrap();
        let mut rng = substream(11, 0, 0);
        let n = 1_000_000usize;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[mu.sample(&mut rng) as usize] += 1;
        }
        for (k, p) in mu.atoms() {
            let f = counts[k as usize] as f64 / n as f64;
            assert!((f - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "k={k} f={f}");
        }
        assert_eq!(counts[4], 0);
    }

    #[test]
    fn srw_d4_sampling_has_zero_mean() {
        let theta = StepDistribution::simple(4).unwrap();
        let mut rng = substream(3, 1, 2);
        let n = 1_000_000;
        let mut sums = [0i64; 4];
        for _ in 0..n {
            for (s, y) in sums.iter_mut().zip(theta.sample(&mut rng)) {
                *s += y;
            }
        }
        // per-coordinate variance 1/4
        let se = (0.25f64 / n as f64).sqrt();
        for s in sums {
            assert!((s as f64 / n as f64).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let theta = StepDistribution::simple(1).unwrap();
        let mu = OffspringDistribution::from_ratios(&[(0, 1, 2), (2, 1, 2)]).unwrap();
        let draw = |seed| {
            let mut rng = substream(seed, 5, 9);
            (0..1000)
                .map(|_| (mu.sample(&mut rng), theta.sample(&mut rng)[0]))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }
}
