//! Sparsity measures and the spectral radius of `X^T X`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SparseColMatrix;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Row sparsity `kappa_i`, its maximum `kappa`, and the weighted measure
/// `kappa_bar = max_j sum_i kappa_i X_ij^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityMeasures {
    pub row_counts: Vec<usize>,
    pub kappa: usize,
    pub kappa_bar: f64,
}

/// `kappa_bar` is only meaningful when the columns have unit norm; `kappa` is
/// valid for any matrix.
pub fn sparsity_measures(x: &SparseColMatrix) -> SparsityMeasures {
    let row_counts = x.row_counts();
    let kappa = row_counts.iter().copied().max().unwrap_or(0);
    let kappa_bar = (0..x.n_cols())
        .map(|j| {
            let (rows, vals) = x.column(j);
            rows.iter()
                .zip(vals)
                .map(|(&i, &v)| row_counts[i] as f64 * v * v)
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    SparsityMeasures {
        row_counts,
        kappa,
        kappa_bar,
    }
}

/// Power-iteration settings for [`spectral_radius`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    /// Relative change of the estimate that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub rho: f64,
    pub converged: bool,
    /// Rayleigh quotient after each iteration.
    pub history: Vec<f64>,
}

/// Largest eigenvalue of `X^T X` by power iteration on `v -> X^T (X v)`.
///
/// The estimate is the Rayleigh quotient `||X v||^2` of the current unit
/// vector, which never exceeds the true spectral radius and is non-decreasing
/// across iterations.
pub fn spectral_radius(x: &SparseColMatrix, cfg: PowerIteration) -> Result<SpectralEstimate> {
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "power iteration needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    let d = x.n_cols();
    let mut rng = stream_rng(cfg.seed, Stream::PowerIteration);
    let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    if !normalize(&mut v) {
        v.iter_mut().for_each(|e| *e = 1.0);
        normalize(&mut v);
    }

    let mut xv = vec![0.0; x.n_rows()];
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        x.mul_vec_into(&v, &mut xv);
        let est: f64 = xv.iter().map(|e| e * e).sum();
        if !est.is_finite() {
            return Err(Error::NonFinite("power iteration"));
        }
        let prev = history.last().copied();
        history.push(est);
        if est == 0.0 {
            converged = true;
            break;
        }
        if let Some(p) = prev {
            if (est - p).abs() <= cfg.tol * est {
                converged = true;
                break;
            }
        }
        v = x.t_mul_vec(&xv);
        if !normalize(&mut v) {
            return Err(Error::NonFinite("power iteration"));
        }
    }
    Ok(SpectralEstimate {
        rho: *history.last().unwrap(),
        converged,
        history,
    })
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return false;
    }
    v.iter_mut().for_each(|e| *e /= norm);
    true
}

/// All the data-dependent constants the step-size rules need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub row_counts: Vec<usize>,
    pub kappa: usize,
    pub kappa_bar: f64,
    pub rho: f64,
    pub rho_converged: bool,
}

impl SparsityReport {
    pub fn compute(x: &SparseColMatrix, power: PowerIteration) -> Result<Self> {
        let m = sparsity_measures(x);
        let s = spectral_radius(x, power)?;
        Ok(Self {
            row_counts: m.row_counts,
            kappa: m.kappa,
            kappa_bar: m.kappa_bar,
            rho: s.rho,
            rho_converged: s.converged,
        })
    }
}
