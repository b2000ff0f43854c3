//! Design matrix storage, normalization, sparsity measures and dataset I/O.

mod dataset;
mod io;
mod matrix;
mod sparsity;

pub use dataset::{
    normalize_columns, unscale_solution, ColumnMap, Dataset, ZeroColumnPolicy, UNIT_NORM_TOL,
};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use matrix::SparseColMatrix;
pub use sparsity::{
    sparsity_measures, spectral_radius, PowerIteration, SparsityMeasures, SparsityReport,
    SpectralEstimate,
};
