//! Smooth losses and evaluation of `F(w) = sum_i l(x_i^T w, y_i) + lambda ||w||_1`.
//!
//! Everything here works from cached margins `X w`; nothing multiplies by the
//! design matrix on the caller's behalf except [`Objective::margins`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Below this much work (stored entries or examples) reductions run inline.
pub(crate) const PAR_MIN_WORK: usize = 1 << 16;
/// Fixed chunk length for example-wise sums, so the summation tree does not
/// depend on the number of worker threads.
const SUM_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `0.5 (yhat - y)^2`
    Square,
    /// `ln(1 + exp(-y yhat))` with labels in {-1, +1}
    Logistic,
}

impl LossKind {
    /// Upper bound on the second derivative in the prediction.
    pub fn beta(self) -> f64 {
        match self {
            LossKind::Square => 1.0,
            LossKind::Logistic => 0.25,
        }
    }

    #[inline]
    pub fn value(self, yhat: f64, y: f64) -> f64 {
        match self {
            LossKind::Square => {
                let r = yhat - y;
                0.5 * r * r
            }
            LossKind::Logistic => {
                let m = y * yhat;
                (-m).max(0.0) + (-m.abs()).exp().ln_1p()
            }
        }
    }

    /// Derivative with respect to the prediction.
    #[inline]
    pub fn deriv(self, yhat: f64, y: f64) -> f64 {
        match self {
            LossKind::Square => yhat - y,
            LossKind::Logistic => {
                // -y * sigmoid(-m), written so that exp never overflows
                let m = y * yhat;
                let s = if m >= 0.0 {
                    let e = (-m).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + m.exp())
                };
                -y * s
            }
        }
    }
}

/// Maximum absolute entry; zero for an empty slice.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// The regularized empirical loss over one dataset.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    data: &'a Dataset,
    loss: LossKind,
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a Dataset, loss: LossKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be a finite non-negative number, got {lambda}"
            )));
        }
        if loss == LossKind::Logistic {
            if let Some((index, &value)) = data
                .y()
                .iter()
                .enumerate()
                .find(|(_, &v)| v != 1.0 && v != -1.0)
            {
                return Err(Error::InvalidLabel { index, value });
            }
        }
        Ok(Self { data, loss, lambda })
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.loss.beta()
    }

    pub fn n_features(&self) -> usize {
        self.data.n_features()
    }

    pub fn n_examples(&self) -> usize {
        self.data.n_examples()
    }

    pub fn margins(&self, w: &[f64]) -> Vec<f64> {
        self.data.x().mul_vec(w)
    }

    /// `f(w) = sum_i l((Xw)_i, y_i)` from the margins `Xw`.
    pub fn smooth_value(&self, margins: &[f64]) -> f64 {
        let y = self.data.y();
        debug_assert_eq!(margins.len(), y.len());
        let loss = self.loss;
        let chunk_sum = |(m, y): (&[f64], &[f64])| -> f64 {
            m.iter().zip(y).map(|(&m, &y)| loss.value(m, y)).sum()
        };
        let partials: Vec<f64> = if margins.len() >= PAR_MIN_WORK {
            margins
                .par_chunks(SUM_CHUNK)
                .zip(y.par_chunks(SUM_CHUNK))
                .map(chunk_sum)
                .collect()
        } else {
            margins
                .chunks(SUM_CHUNK)
                .zip(y.chunks(SUM_CHUNK))
                .map(chunk_sum)
                .collect()
        };
        partials.iter().sum()
    }

    /// `F(w) = f(w) + lambda ||w||_1`.
    pub fn full_value(&self, w: &[f64], margins: &[f64]) -> f64 {
        let f = self.smooth_value(margins);
        if self.lambda == 0.0 {
            f
        } else {
            f + self.lambda * l1_norm(w)
        }
    }

    /// Per-example loss derivatives `l'((Xu)_i, y_i)`.
    pub fn loss_derivs(&self, margins: &[f64]) -> Vec<f64> {
        let loss = self.loss;
        margins
            .iter()
            .zip(self.data.y())
            .map(|(&m, &y)| loss.deriv(m, y))
            .collect()
    }

    /// Gradient of the smooth part, `X^T g`, from the margins `Xu`.
    pub fn full_gradient(&self, margins: &[f64]) -> Vec<f64> {
        let g = self.loss_derivs(margins);
        let x = self.data.x();
        if x.nnz() >= PAR_MIN_WORK {
            (0..x.n_cols())
                .into_par_iter()
                .with_min_len(64)
                .map(|j| x.column_dot(j, &g))
                .collect()
        } else {
            x.t_mul_vec(&g)
        }
    }

    /// One gradient coordinate, touching only the stored entries of column `j`.
    pub fn gradient_coordinate(&self, j: usize, margins: &[f64]) -> Result<f64> {
        if j >= self.n_features() {
            return Err(Error::OutOfBounds {
                index: j,
                dim: self.n_features(),
            });
        }
        Ok(self.column_gradient(j, |i| margins[i]))
    }

    /// `sum_{i in col j} X_ij l'(margin(i), y_i)` in storage order. The margin is
    /// supplied per row so callers holding margins implicitly need not build them.
    #[inline]
    pub(crate) fn column_gradient(&self, j: usize, margin: impl Fn(usize) -> f64) -> f64 {
        let (rows, vals) = self.data.x().column(j);
        let y = self.data.y();
        let mut acc = 0.0;
        for (&i, &v) in rows.iter().zip(vals) {
            acc += v * self.loss.deriv(margin(i), y[i]);
        }
        acc
    }

    /// Infinity norm of the minimum-norm subgradient of `F` at `w`; equals
    /// `||grad f(w)||_inf` when lambda is zero and vanishes exactly at minimizers.
    pub fn optimality_residual(&self, w: &[f64], grad: &[f64]) -> f64 {
        if self.lambda == 0.0 {
            return inf_norm(grad);
        }
        w.iter().zip(grad).fold(0.0, |m, (&wj, &gj)| {
            let r = if wj > 0.0 {
                (gj + self.lambda).abs()
            } else if wj < 0.0 {
                (gj - self.lambda).abs()
            } else {
                (gj.abs() - self.lambda).max(0.0)
            };
            m.max(r)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseColMatrix;

    fn identity_data(y: Vec<f64>) -> Dataset {
        let d = y.len();
        Dataset::new(SparseColMatrix::identity(d), y).unwrap()
    }

    #[test]
    fn loss_examples() {
        assert_eq!(LossKind::Square.value(1.3, 1.3), 0.0);
        assert_eq!(LossKind::Square.deriv(1.3, 1.3), 0.0);
        let v = LossKind::Logistic.value(0.0, 1.0);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((LossKind::Logistic.deriv(0.0, 1.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn logistic_is_stable_at_extremes() {
        for &m in &[1000.0, -1000.0, 710.0, -745.0, 1e300, -1e300] {
            for &y in &[1.0, -1.0] {
                let v = LossKind::Logistic.value(m, y);
                let g = LossKind::Logistic.deriv(m, y);
                assert!(v.is_finite() && g.is_finite(), "m={m} y={y}");
                assert!(v >= 0.0);
                assert!(g.abs() <= 1.0);
            }
        }
        assert!(LossKind::Logistic.value(1000.0, 1.0) < 1e-300);
        assert_eq!(LossKind::Logistic.value(-1000.0, 1.0), 1000.0);
    }

    #[test]
    fn smooth_value_examples() {
        let data = identity_data(vec![1.0, 2.0]);
        let obj = Objective::new(&data, LossKind::Square, 0.0).unwrap();
        assert_eq!(obj.smooth_value(&obj.margins(&[0.0, 0.0])), 2.5);
        assert_eq!(obj.smooth_value(&obj.margins(&[1.0, 2.0])), 0.0);

        let data = identity_data(vec![1.0, -1.0, 1.0]);
        let obj = Objective::new(&data, LossKind::Logistic, 0.0).unwrap();
        let f = obj.smooth_value(&[0.0; 3]);
        assert!((f - 3.0 * std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn full_value_examples() {
        let data = identity_data(vec![2.0, 0.3]);
        let obj = Objective::new(&data, LossKind::Square, 0.5).unwrap();
        let w = [1.5, 0.0];
        let f = obj.full_value(&w, &obj.margins(&w));
        assert!((f - 0.92).abs() < 1e-12, "{f}");
        assert_eq!(
            obj.full_value(&[0.0; 2], &[0.0; 2]),
            obj.smooth_value(&[0.0; 2])
        );
        let obj0 = Objective::new(&data, LossKind::Square, 0.0).unwrap();
        assert_eq!(
            obj0.full_value(&w, &obj0.margins(&w)),
            obj0.smooth_value(&obj0.margins(&w))
        );
    }

    #[test]
    fn gradient_examples() {
        let data = identity_data(vec![1.0, 2.0]);
        let obj = Objective::new(&data, LossKind::Square, 0.0).unwrap();
        assert_eq!(obj.full_gradient(&[0.0, 0.0]), vec![-1.0, -2.0]);
        assert_eq!(obj.gradient_coordinate(1, &[0.0, 0.0]).unwrap(), -2.0);
        assert_eq!(obj.full_gradient(&[1.0, 2.0]), vec![0.0, 0.0]);
        assert!(obj.gradient_coordinate(2, &[0.0, 0.0]).is_err());

        let x =
            SparseColMatrix::from_dense(&[vec![0.6, 0.8], vec![0.8, 0.0], vec![0.0, 0.6]]).unwrap();
        let data = Dataset::new(x, vec![1.0, -1.0, 1.0]).unwrap();
        let obj = Objective::new(&data, LossKind::Logistic, 0.0).unwrap();
        let g = obj.full_gradient(&[0.0; 3]);
        let xty = data.x().t_mul_vec(data.y());
        for j in 0..2 {
            assert!((g[j] + 0.5 * xty[j]).abs() < 1e-15);
        }
        let m = [0.3, -1.2, 2.0];
        let g = obj.full_gradient(&m);
        for (j, gj) in g.iter().enumerate() {
            assert_eq!(
                gj.to_bits(),
                obj.gradient_coordinate(j, &m).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn logistic_labels_validated() {
        let data = identity_data(vec![1.0, 0.5]);
        assert!(matches!(
            Objective::new(&data, LossKind::Logistic, 0.0),
            Err(Error::InvalidLabel { index: 1, .. })
        ));
        assert!(Objective::new(&data, LossKind::Square, -1.0).is_err());
        assert!(Objective::new(&data, LossKind::Square, f64::NAN).is_err());
    }

    #[test]
    fn residual_vanishes_at_lasso_optimum() {
        let data = identity_data(vec![2.0, 0.3]);
        let obj = Objective::new(&data, LossKind::Square, 0.5).unwrap();
        let w = [1.5, 0.0];
        let g = obj.full_gradient(&obj.margins(&w));
        assert!(obj.optimality_residual(&w, &g) < 1e-15);
        let w = [1.0, 0.0];
        let g = obj.full_gradient(&obj.margins(&w));
        assert!((obj.optimality_residual(&w, &g) - 0.5).abs() < 1e-15);
    }
}
