use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::schedule::Sampling;

/// Draws the coordinate set `S_t` each iteration.
///
/// Uniform subsets use a partial Fisher-Yates shuffle over a persistent
/// permutation, so each draw costs `O(P log P)` regardless of `d`. Subsets are
/// returned in ascending order.
#[derive(Debug, Clone)]
pub struct SubsetSampler {
    d: usize,
    p: usize,
    sampling: Sampling,
    perm: Vec<usize>,
    rng: ChaCha8Rng,
}

impl SubsetSampler {
    pub fn new(d: usize, p: usize, sampling: Sampling, seed: u64) -> Result<Self> {
        if p == 0 || p > d {
            return Err(Error::InvalidParameter(format!(
                "P must lie in [1, d]; got P={p}, d={d}"
            )));
        }
        if sampling == Sampling::BlockPartition && d % p != 0 {
            return Err(Error::BlockPartition { d, p });
        }
        let perm = match sampling {
            Sampling::UniformSubset => (0..d).collect(),
            Sampling::BlockPartition => Vec::new(),
        };
        Ok(Self {
            d,
            p,
            sampling,
            perm,
            rng: stream_rng(seed, Stream::Subsets),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Writes the next subset into `out` (cleared first).
    pub fn sample_into(&mut self, out: &mut Vec<usize>) {
        out.clear();
        match self.sampling {
            Sampling::UniformSubset if self.p == self.d => out.extend(0..self.d),
            Sampling::UniformSubset => {
                for k in 0..self.p {
                    let r = self.rng.random_range(k..self.d);
                    self.perm.swap(k, r);
                }
                out.extend_from_slice(&self.perm[..self.p]);
                out.sort_unstable();
            }
            Sampling::BlockPartition => {
                let block = self.d / self.p;
                for b in 0..self.p {
                    out.push(b * block + self.rng.random_range(0..block));
                }
            }
        }
    }

    pub fn sample(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.p);
        self.sample_into(&mut out);
        out
    }
}

/// One uniformly random `P`-subset of `0..d`, sorted.
pub fn sample_subset(d: usize, p: usize, seed: u64) -> Result<Vec<usize>> {
    Ok(SubsetSampler::new(d, p, Sampling::UniformSubset, seed)?.sample())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_sorted_and_distinct() {
        let mut s = SubsetSampler::new(50, 7, Sampling::UniformSubset, 3).unwrap();
        for _ in 0..200 {
            let sub = s.sample();
            assert_eq!(sub.len(), 7);
            assert!(sub.windows(2).all(|w| w[0] < w[1]));
            assert!(sub.iter().all(|&j| j < 50));
        }
    }

    #[test]
    fn full_subset_is_everything() {
        let mut s = SubsetSampler::new(5, 5, Sampling::UniformSubset, 0).unwrap();
        assert_eq!(s.sample(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn uniform_marginals() {
        let (d, p, draws) = (10, 3, 30_000);
        let mut s = SubsetSampler::new(d, p, Sampling::UniformSubset, 11).unwrap();
        let mut counts = vec![0usize; d];
        for _ in 0..draws {
            for j in s.sample() {
                counts[j] += 1;
            }
        }
        let expected = (draws * p / d) as f64;
        for c in counts {
            assert!((c as f64 - expected).abs() < 0.05 * expected, "{c}");
        }
    }

    #[test]
    fn block_partition_one_per_block() {
        let mut s = SubsetSampler::new(12, 4, Sampling::BlockPartition, 1).unwrap();
        for _ in 0..100 {
            let sub = s.sample();
            for (b, &j) in sub.iter().enumerate() {
                assert_eq!(j / 3, b);
            }
        }
        assert!(matches!(
            SubsetSampler::new(10, 4, Sampling::BlockPartition, 1),
            Err(Error::BlockPartition { d: 10, p: 4 })
        ));
    }

    #[test]
    fn seeded_draws_repeat() {
        let a: Vec<_> = {
            let mut s = SubsetSampler::new(100, 9, Sampling::UniformSubset, 42).unwrap();
            (0..10).map(|_| s.sample()).collect()
        };
        let mut s = SubsetSampler::new(100, 9, Sampling::UniformSubset, 42).unwrap();
        let b: Vec<_> = (0..10).map(|_| s.sample()).collect();
        assert_eq!(a, b);
    }
}
