use crate::data::SparseColMatrix;
use crate::error::{Error, Result};

/// Unit-norm tolerance checked on every normalized column.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// What to do with a feature column that has no nonzero entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ZeroColumnPolicy {
    #[default]
    Error,
    /// Remove the column; the solution reports 0 for it.
    Drop,
}

/// Divides every column by its Euclidean norm.
///
/// Returns the normalized matrix together with the removed norms, so that
/// `original[:, j] == normalized[:, j] * scales[j]`.
pub fn normalize_columns(x: &SparseColMatrix) -> Result<(SparseColMatrix, Vec<f64>)> {
    let scales = column_norms(x)?;
    // Divide rather than multiply by the reciprocal: unit columns stay bit-identical.
    let mut values = x.values().to_vec();
    for (j, &s) in scales.iter().enumerate() {
        for v in &mut values[x.col_ptr()[j]..x.col_ptr()[j + 1]] {
            *v /= s;
        }
    }
    let normalized = SparseColMatrix::new(
        x.n_rows(),
        x.n_cols(),
        x.col_ptr().to_vec(),
        x.row_indices().to_vec(),
        values,
    )?;
    Ok((normalized, scales))
}

fn column_norms(x: &SparseColMatrix) -> Result<Vec<f64>> {
    (0..x.n_cols())
        .map(|j| {
            if x.column_nnz(j) == 0 {
                return Err(Error::ZeroColumn(j));
            }
            let s = x.column_sq_norm(j).sqrt();
            if !s.is_finite() {
                return Err(Error::NonFinite("column norm"));
            }
            Ok(s)
        })
        .collect()
}

/// Maps a solution found on normalized columns back to the original feature scale.
pub fn unscale_solution(w: &[f64], scales: &[f64]) -> Result<Vec<f64>> {
    if w.len() != scales.len() {
        return Err(Error::LengthMismatch {
            expected: scales.len(),
            found: w.len(),
        });
    }
    if let Some(j) = scales.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "scale {j} is not positive"
        )));
    }
    Ok(w.iter().zip(scales).map(|(wj, s)| wj / s).collect())
}

/// Kept columns after dropping empty features.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub original_cols: usize,
    pub kept: Vec<usize>,
}

/// Design matrix plus responses, with the normalization bookkeeping needed to
/// report solutions in the original feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: SparseColMatrix,
    y: Vec<f64>,
    scales: Option<Vec<f64>>,
    column_map: Option<ColumnMap>,
}

impl Dataset {
    pub fn new(x: SparseColMatrix, y: Vec<f64>) -> Result<Self> {
        Self::from_parts(x, y, None, None)
    }

    /// Assembles a dataset and checks its invariants. When `scales` is present
    /// the matrix must already have unit-norm columns.
    pub fn from_parts(
        x: SparseColMatrix,
        y: Vec<f64>,
        scales: Option<Vec<f64>>,
        column_map: Option<ColumnMap>,
    ) -> Result<Self> {
        if y.len() != x.n_rows() {
            return Err(Error::LengthMismatch {
                expected: x.n_rows(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("labels"));
        }
        if let Some(s) = &scales {
            if s.len() != x.n_cols() {
                return Err(Error::LengthMismatch {
                    expected: x.n_cols(),
                    found: s.len(),
                });
            }
            if let Some(j) = s.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter(format!(
                    "scale {j} is not positive"
                )));
            }
            for j in 0..x.n_cols() {
                if (x.column_sq_norm(j) - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(Error::InvalidMatrix(format!(
                        "column {j} is not unit norm in a normalized dataset"
                    )));
                }
            }
        }
        if let Some(map) = &column_map {
            if map.kept.len() != x.n_cols()
                || map.kept.windows(2).any(|w| w[0] >= w[1])
                || map.kept.last().is_some_and(|&k| k >= map.original_cols)
            {
                return Err(Error::InvalidMatrix("inconsistent column map".into()));
            }
        }
        Ok(Self {
            x,
            y,
            scales,
            column_map,
        })
    }

    pub fn x(&self) -> &SparseColMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn scales(&self) -> Option<&[f64]> {
        self.scales.as_deref()
    }

    pub fn column_map(&self) -> Option<&ColumnMap> {
        self.column_map.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.scales.is_some()
    }

    pub fn n_examples(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    /// Normalizes the columns. Returns the new dataset and the original indices
    /// of any dropped (empty) columns. A dataset that is already normalized is
    /// returned unchanged.
    pub fn normalize(&self, policy: ZeroColumnPolicy) -> Result<(Dataset, Vec<usize>)> {
        if self.is_normalized() {
            return Ok((self.clone(), Vec::new()));
        }
        let empty: Vec<usize> = (0..self.x.n_cols())
            .filter(|&j| self.x.column_nnz(j) == 0)
            .collect();
        let (x, column_map) = match (empty.first(), policy) {
            (None, _) => (self.x.clone(), self.column_map.clone()),
            (Some(&j), ZeroColumnPolicy::Error) => return Err(Error::ZeroColumn(j)),
            (Some(_), ZeroColumnPolicy::Drop) => {
                let keep: Vec<usize> = (0..self.x.n_cols())
                    .filter(|&j| self.x.column_nnz(j) > 0)
                    .collect();
                if keep.is_empty() {
                    return Err(Error::ZeroColumn(0));
                }
                let original_cols = self.original_cols();
                let kept = keep.iter().map(|&j| self.original_index(j)).collect();
                (
                    self.x.select_columns(&keep)?,
                    Some(ColumnMap {
                        original_cols,
                        kept,
                    }),
                )
            }
        };
        let (x, scales) = normalize_columns(&x)?;
        let dropped = empty.iter().map(|&j| self.original_index(j)).collect();
        Ok((
            Dataset::from_parts(x, self.y.clone(), Some(scales), column_map)?,
            dropped,
        ))
    }

    fn original_cols(&self) -> usize {
        self.column_map
            .as_ref()
            .map_or(self.x.n_cols(), |m| m.original_cols)
    }

    fn original_index(&self, j: usize) -> usize {
        self.column_map.as_ref().map_or(j, |m| m.kept[j])
    }

    /// Maps a solution on this dataset's columns back to the original feature
    /// space: undoes normalization and reinserts zeros for dropped columns.
    pub fn restore_solution(&self, w: &[f64]) -> Result<Vec<f64>> {
        let w = match &self.scales {
            Some(s) => unscale_solution(w, s)?,
            None => {
                if w.len() != self.n_features() {
                    return Err(Error::LengthMismatch {
                        expected: self.n_features(),
                        found: w.len(),
                    });
                }
                w.to_vec()
            }
        };
        Ok(match &self.column_map {
            Some(map) => {
                let mut out = vec![0.0; map.original_cols];
                for (&k, v) in map.kept.iter().zip(w) {
                    out[k] = v;
                }
                out
            }
            None => w,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_already_normalized() {
        let (x, s) = normalize_columns(&SparseColMatrix::identity(2)).unwrap();
        assert_eq!(x, SparseColMatrix::identity(2));
        assert_eq!(s, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_scaling_is_removed() {
        let x = SparseColMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let (n, s) = normalize_columns(&x).unwrap();
        assert_eq!(n, SparseColMatrix::identity(2));
        assert_eq!(s, vec![2.0, 3.0]);
    }

    #[test]
    fn empty_column_is_an_error() {
        let x = SparseColMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(normalize_columns(&x), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn unscale_examples() {
        assert_eq!(
            unscale_solution(&[1.5, 0.0], &[2.0, 3.0]).unwrap(),
            vec![0.75, 0.0]
        );
        let w = [0.3, -7.0, 1e-9];
        assert_eq!(unscale_solution(&w, &[1.0; 3]).unwrap(), w.to_vec());
        assert_eq!(
            unscale_solution(&[0.0; 3], &[4.0, 5.0, 6.0]).unwrap(),
            vec![0.0; 3]
        );
        assert!(unscale_solution(&[1.0], &[1.0, 2.0]).is_err());
        assert!(unscale_solution(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn drop_policy_keeps_track_of_columns() {
        let x = SparseColMatrix::from_dense(&[vec![2.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let d = Dataset::new(x, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            d.normalize(ZeroColumnPolicy::Error),
            Err(Error::ZeroColumn(1))
        ));
        let (n, dropped) = d.normalize(ZeroColumnPolicy::Drop).unwrap();
        assert_eq!(dropped, vec![1]);
        assert_eq!(n.n_features(), 2);
        let w = n.restore_solution(&[1.0, 2.0_f64.sqrt()]).unwrap();
        assert_eq!(w.len(), 3);
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert_eq!(w[1], 0.0);
        assert!((w[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn label_length_checked() {
        let x = SparseColMatrix::identity(2);
        assert!(matches!(
            Dataset::new(x, vec![1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
