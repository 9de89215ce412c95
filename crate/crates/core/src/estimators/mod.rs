//! FRF estimators: multiband local polynomial, sparse multisine, and the
//! naive ETFE baseline.

pub mod etfe;
pub mod lpm;
pub mod sparse;

pub use etfe::{etfe_baseline, EtfeEstimate};
pub use lpm::{
    build_regression, estimate_bin, estimate_frf_lpm, estimate_variance, solve_local, BinStatus, FrfEstimate,
    LocalEstimate, LocalSolver, LpmConfig, Regression, VarianceEstimate,
};
pub use sparse::{estimate_sparse, SparseBin, SparseEstimate, SparseStatus};
