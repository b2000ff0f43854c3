#![allow(dead_code)]

use accelcd::cli::generate::{generate, GenerateConfig};
use accelcd::data::{Dataset, PowerIteration, SparseColMatrix, SparsityReport};
use accelcd::loss::LossKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn instance(n: usize, d: usize, density: f64, loss: LossKind, seed: u64) -> Dataset {
    generate(&GenerateConfig {
        n,
        d,
        density,
        loss,
        noise_std: if loss == LossKind::Square { 0.1 } else { 0.0 },
        w_star_nnz: d.min(5),
        row_scale_decades: 0.0,
        seed,
    })
    .expect("generate")
    .dataset
}

pub fn report(data: &Dataset) -> SparsityReport {
    SparsityReport::compute(data.x(), PowerIteration::default()).expect("report")
}

/// Matrix with exactly `k` entries per column at random rows, normalized.
pub fn fixed_column_nnz(n: usize, d: usize, k: usize, seed: u64) -> SparseColMatrix {
    let mut r = rng(seed);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for j in 0..d {
        let picked = rand::seq::index::sample(&mut r, n, k);
        for i in picked {
            let v: f64 = r.random_range(0.5..1.5) * if r.random::<bool>() { 1.0 } else { -1.0 };
            rows[i].push((j, v));
        }
    }
    let x = SparseColMatrix::from_rows(d, &rows).expect("matrix");
    accelcd::data::normalize_columns(&x).expect("normalize").0
}

pub fn gaussian_vec(r: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| scale * r.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}

/// Dense `F(w) = sum_i l(x_i w, y_i) + lambda ||w||_1`, written out directly
/// as an independent check on the library.
pub fn dense_objective(data: &Dataset, loss: LossKind, lambda: f64, w: &[f64]) -> f64 {
    let dense = data.x().to_dense();
    let mut f = 0.0;
    for (row, &y) in dense.iter().zip(data.y()) {
        let m: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
        f += match loss {
            LossKind::Square => 0.5 * (m - y) * (m - y),
            LossKind::Logistic => (1.0 + (-y * m).exp()).ln(),
        };
    }
    f + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn soft_threshold(v: f64, a: f64) -> f64 {
    v.signum() * (v.abs() - a).max(0.0)
}

pub fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
