//! Index samplers for finite laws.
//!
//! Laws whose exact weights share a small common denominator D are sampled
//! by one table lookup on a uniform integer in [0, D), drawn from 32-bit
//! halves of the generator output. Everything else uses an alias table.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;

/// Largest common denominator served by a lookup table.
const MAX_TABLE: u64 = 1 << 16;

/// A generator that hands out 32-bit words, keeping the unused half of each
/// 64-bit draw.
pub struct WordSource<'a, R: ?Sized> {
    rng: &'a mut R,
    spare: Option<u32>,
}

impl<'a, R: Rng + ?Sized> WordSource<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        Self { rng, spare: None }
    }

    #[inline]
    pub fn word(&mut self) -> u32 {
        match self.spare.take() {
            Some(w) => w,
            None => {
                let x: u64 = self.rng.random();
                self.spare = Some((x >> 32) as u32);
                x as u32
            }
        }
    }

    /// Uniform on [0, n) by multiply-and-reject.
    #[inline]
    pub fn below(&mut self, n: u32) -> u32 {
        let mut m = self.word() as u64 * n as u64;
        if (m as u32) < n {
            let threshold = n.wrapping_neg() % n;
            while (m as u32) < threshold {
                m = self.word() as u64 * n as u64;
            }
        }
        (m >> 32) as u32
    }

    pub fn rng(&mut self) -> &mut R {
        self.rng
    }
}

#[derive(Debug, Clone)]
pub enum IndexSampler {
    Lookup { denom: u32, table: Vec<u32> },
    Alias(WeightedAliasIndex<f64>),
}

impl IndexSampler {
    pub fn new(probs: &[f64], exact: Option<&[BigRational]>) -> Self {
        exact
            .and_then(Self::lookup)
            .unwrap_or_else(|| IndexSampler::Alias(WeightedAliasIndex::new(probs.to_vec()).expect("validated weights")))
    }

    fn lookup(exact: &[BigRational]) -> Option<Self> {
        let mut denom = BigInt::from(1);
        for w in exact {
            denom = denom.lcm(w.denom());
            if denom > BigInt::from(MAX_TABLE) {
                return None;
            }
        }
        let d = denom.to_u64()?;
        let mut table = Vec::with_capacity(d as usize);
        for (i, w) in exact.iter().enumerate() {
            let count = (w * BigRational::from_integer(denom.clone())).to_integer().to_u64()?;
            table.extend(std::iter::repeat_n(i as u32, count as usize));
        }
        debug_assert_eq!(table.len() as u64, d);
        Some(IndexSampler::Lookup {
            denom: d as u32,
            table,
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, src: &mut WordSource<'_, R>) -> usize {
        match self {
            IndexSampler::Lookup { denom, table } => table[src.below(*denom) as usize] as usize,
            IndexSampler::Alias(alias) => alias.sample(src.rng()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn below_is_uniform() {
        let mut rng = substream(4, 0, 0);
        let mut src = WordSource::new(&mut rng);
        let mut counts = [0u32; 6];
        for _ in 0..600_000 {
            counts[src.below(6) as usize] += 1;
        }
        let sd = (600_000.0f64 / 6.0 * 5.0 / 6.0).sqrt();
        for c in counts {
            assert!((c as f64 - 100_000.0).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn lookup_used_for_small_denominators() {
        let third = |n| BigRational::new(BigInt::from(n), BigInt::from(3));
        let s = IndexSampler::new(&[1.0 / 3.0, 2.0 / 3.0], Some(&[third(1), third(2)]));
        match s {
            IndexSampler::Lookup { denom, ref table } => {
                assert_eq!(denom, 3);
                assert_eq!(table, &vec![0, 1, 1]);
            }
            _ => panic!("expected lookup"),
        }
        let big = BigRational::new(BigInt::from(1), BigInt::from(1u64 << 20));
        let rest = BigRational::from_integer(BigInt::from(1)) - &big;
        let s = IndexSampler::new(&[0.0, 1.0], Some(&[big, rest]));
        assert!(matches!(s, IndexSampler::Alias(_)));
    }
}
