use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_columns, Dataset, SparseColMatrix};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::rng::{stream_rng, Stream};

/// Synthetic sparse regression or classification problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub n: usize,
    pub d: usize,
    /// Probability that an entry is nonzero.
    pub density: f64,
    pub loss: LossKind,
    pub noise_std: f64,
    /// Nonzeros in the planted weight vector.
    pub w_star_nnz: usize,
    /// Rows are scaled by `10^(k * decades / (n - 1))`, `k = 0..n` in random
    /// order, before the columns are normalized. Zero gives i.i.d. rows.
    pub row_scale_decades: f64,
    pub seed: u64,
}

impl GenerateConfig {
    /// The instance used for rate comparisons: 100 x 200 at density 0.1,
    /// noiseless square loss, dense planted weights, rows spread over four
    /// decades of scale.
    pub fn standard(seed: u64) -> Self {
        Self {
            n: 100,
            d: 200,
            density: 0.1,
            loss: LossKind::Square,
            noise_std: 0.0,
            w_star_nnz: 200,
            row_scale_decades: 4.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n == 0 || self.d == 0 {
            return bad(format!(
                "n and d must be positive, got {}x{}",
                self.n, self.d
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must lie in (0, 1], got {}", self.density));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!(
                "noise_std must be non-negative, got {}",
                self.noise_std
            ));
        }
        if self.w_star_nnz > self.d {
            return bad(format!(
                "w_star_nnz {} exceeds d = {}",
                self.w_star_nnz, self.d
            ));
        }
        if !(self.row_scale_decades >= 0.0 && self.row_scale_decades.is_finite()) {
            return bad(format!(
                "row_scale_decades must be non-negative, got {}",
                self.row_scale_decades
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedProblem {
    /// Unit-norm columns, stored without normalization metadata.
    pub dataset: Dataset,
    pub w_star: Vec<f64>,
}

fn nonzero_normal(rng: &mut impl Rng) -> f64 {
    loop {
        let v: f64 = rng.sample(StandardNormal);
        if v != 0.0 {
            return v;
        }
    }
}

/// Draws a problem; identical configurations give identical problems.
///
/// Every column receives at least one entry so that normalization is defined.
pub fn generate(cfg: &GenerateConfig) -> Result<GeneratedProblem> {
    cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);
    let mut rng = stream_rng(cfg.seed, Stream::Data);

    let mut scales: Vec<f64> = if n > 1 {
        (0..n)
            .map(|i| 10f64.powf(cfg.row_scale_decades * i as f64 / (n - 1) as f64))
            .collect()
    } else {
        vec![1.0]
    };
    scales.shuffle(&mut rng);

    let mut col_ptr = Vec::with_capacity(d + 1);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    col_ptr.push(0);
    for _ in 0..d {
        let start = row_idx.len();
        for i in 0..n {
            if cfg.density >= 1.0 || rng.random::<f64>() < cfg.density {
                row_idx.push(i);
                values.push(scales[i] * nonzero_normal(&mut rng));
            }
        }
        if row_idx.len() == start {
            let i = rng.random_range(0..n);
            row_idx.push(i);
            values.push(scales[i] * nonzero_normal(&mut rng));
        }
        col_ptr.push(row_idx.len());
    }
    let raw = SparseColMatrix::new(n, d, col_ptr, row_idx, values)?;
    let (x, _) = normalize_columns(&raw)?;

    let mut w_star = vec![0.0; d];
    for j in index::sample(&mut rng, d, cfg.w_star_nnz) {
        w_star[j] = nonzero_normal(&mut rng);
    }
    let margins = x.mul_vec(&w_star);
    let y: Vec<f64> = match cfg.loss {
        LossKind::Square => margins
            .iter()
            .map(|&m| {
                if cfg.noise_std > 0.0 {
                    m + cfg.noise_std * rng.sample::<f64, _>(StandardNormal)
                } else {
                    m
                }
            })
            .collect(),
        LossKind::Logistic => margins
            .iter()
            .map(|&m| {
                let p_pos = 1.0 / (1.0 + (-m).exp());
                if rng.random::<f64>() < p_pos {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect(),
    };
    Ok(GeneratedProblem {
        dataset: Dataset::new(x, y)?,
        w_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_dataset;

    fn cfg(seed: u64) -> GenerateConfig {
        GenerateConfig {
            n: 30,
            d: 20,
            density: 0.2,
            loss: LossKind::Square,
            noise_std: 0.0,
            w_star_nnz: 5,
            row_scale_decades: 0.0,
            seed,
        }
    }

    #[test]
    fn dense_two_by_two() {
        let p = generate(&GenerateConfig {
            n: 2,
            d: 2,
            density: 1.0,
            w_star_nnz: 2,
            ..cfg(4)
        })
        .unwrap();
        let x = p.dataset.x();
        assert_eq!(x.nnz(), 4);
        for j in 0..2 {
            assert!((x.column_sq_norm(j) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn noiseless_square_has_zero_loss_at_planted_weights() {
        let p = generate(&cfg(1)).unwrap();
        let m = p.dataset.x().mul_vec(&p.w_star);
        assert_eq!(m, p.dataset.y());
        assert_eq!(p.w_star.iter().filter(|v| **v != 0.0).count(), 5);
    }

    #[test]
    fn same_seed_same_bytes() {
        let bytes = |seed| {
            let mut buf = Vec::new();
            write_dataset(&generate(&cfg(seed)).unwrap().dataset, &mut buf).unwrap();
            buf
        };
        assert_eq!(bytes(7), bytes(7));
        assert_ne!(bytes(7), bytes(8));
    }

    #[test]
    fn logistic_labels_are_signs() {
        let p = generate(&GenerateConfig {
            loss: LossKind::Logistic,
            ..cfg(2)
        })
        .unwrap();
        assert!(p.dataset.y().iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn every_column_is_populated() {
        let p = generate(&GenerateConfig {
            density: 0.001,
            ..cfg(3)
        })
        .unwrap();
        let x = p.dataset.x();
        assert!((0..x.n_cols()).all(|j| x.column_nnz(j) > 0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate(&GenerateConfig {
            density: 0.0,
            ..cfg(0)
        })
        .is_err());
        assert!(generate(&GenerateConfig {
            density: 1.5,
            ..cfg(0)
        })
        .is_err());
        assert!(generate(&GenerateConfig { n: 0, ..cfg(0) }).is_err());
        assert!(generate(&GenerateConfig {
            w_star_nnz: 21,
            ..cfg(0)
        })
        .is_err());
        assert!(generate(&GenerateConfig {
            noise_std: -1.0,
            ..cfg(0)
        })
        .is_err());
    }
}
