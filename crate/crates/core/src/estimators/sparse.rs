//! FRF from a sparse multisine: each excited fast bin owns its slow bin, so
//! `G(k) = F Y_l(k mod M) / U_h(k)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{FrequencyGrid, Spectrum};

/// Relative floor (against the largest `|U_h|` on the set) below which an
/// input line counts as not excited.
pub const DEFAULT_INPUT_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SparseStatus {
    Valid,
    /// `|U_h(k)|` below the floor; no estimate.
    ZeroInput,
    /// Another fast bin excites the same slow bin; the ratio is still
    /// reported but is contaminated by those bins.
    Interference { other_bins: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseBin {
    pub bin: usize,
    /// NaN when the input is zero.
    pub frf: Complex64,
    pub status: SparseStatus,
}

#[derive(Clone, Debug)]
pub struct SparseEstimate {
    pub grid: FrequencyGrid,
    pub bins: Vec<SparseBin>,
}

impl SparseEstimate {
    pub fn valid(&self) -> impl Iterator<Item = &SparseBin> {
        self.bins.iter().filter(|b| b.status == SparseStatus::Valid)
    }

    /// Bins flagged for interference, with the bins they collide with.
    pub fn warnings(&self) -> Vec<(usize, Vec<usize>)> {
        self.bins
            .iter()
            .filter_map(|b| match &b.status {
                SparseStatus::Interference { other_bins } => Some((b.bin, other_bins.clone())),
                _ => None,
            })
            .collect()
    }
}

/// Estimate `G` at the bins of `set` from a sparse-multisine experiment.
pub fn estimate_sparse(
    input: &Spectrum,
    output: &Spectrum,
    grid: &FrequencyGrid,
    set: &[usize],
    input_floor: f64,
) -> Result<SparseEstimate> {
    let (n, m, f) = (grid.n(), grid.m(), grid.factor());
    if input.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: input.len(),
        });
    }
    if output.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: output.len(),
        });
    }
    if let Some(&bin) = set.iter().find(|&&k| k >= n) {
        return Err(Error::BinOutOfRange { bin, max: n - 1 });
    }
    let peak = set.iter().map(|&k| input[k].norm()).fold(0.0, f64::max);
    let floor = input_floor * peak;

    let bins = set
        .iter()
        .map(|&k| {
            let u = input[k];
            if u.norm().is_nan() || u.norm() <= floor {
                return SparseBin {
                    bin: k,
                    frf: Complex64::new(f64::NAN, f64::NAN),
                    status: SparseStatus::ZeroInput,
                };
            }
            let slow = k % m;
            let other_bins: Vec<usize> = (0..f)
                .map(|band| slow + band * m)
                .filter(|&b| b != k && input[b].norm() > floor)
                .collect();
            let frf = output[slow] * f as f64 / u;
            let status = if other_bins.is_empty() {
                SparseStatus::Valid
            } else {
                SparseStatus::Interference { other_bins }
            };
            SparseBin { bin: k, frf, status }
        })
        .collect();
    Ok(SparseEstimate { grid: *grid, bins })
}
