//! Naive empirical transfer function estimate `Y_l(k mod M) / U_h(k)`.
//!
//! Ignores aliasing on purpose; it is the baseline the multiband estimator is
//! compared against.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectra::{FrequencyGrid, Spectrum};

/// Relative floor (against the largest `|U_h|`) for a usable input bin.
pub const DEFAULT_ETFE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EtfeEstimate {
    pub grid: FrequencyGrid,
    /// NaN where the input is zero.
    pub frf: Vec<Complex64>,
    pub valid: Vec<bool>,
}

pub fn etfe_baseline(input: &Spectrum, output: &Spectrum, grid: &FrequencyGrid) -> Result<EtfeEstimate> {
    let (n, m) = (grid.n(), grid.m());
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
    let floor = DEFAULT_ETFE_FLOOR * input.values().iter().map(|u| u.norm()).fold(0.0, f64::max);
    let mut frf = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for k in 0..n {
        let u = input[k];
        if u.norm() > floor {
            frf.push(output[k % m] / u);
            valid.push(true);
        } else {
            frf.push(Complex64::new(f64::NAN, f64::NAN));
            valid.push(false);
        }
    }
    Ok(EtfeEstimate { grid: *grid, frf, valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::Rate;

    #[test]
    fn periodic_in_slow_bins_for_flat_input() {
        let grid = FrequencyGrid::new(4, 3, 1.0).unwrap();
        let u = Spectrum::new(vec![Complex64::new(2.0, 0.0); 12], Rate::Fast);
        let y = Spectrum::new((0..4).map(|k| Complex64::new(k as f64, 1.0)).collect(), Rate::Slow);
        let est = etfe_baseline(&u, &y, &grid).unwrap();
        for k in 0..8 {
            assert_eq!(est.frf[k], est.frf[k + 4]);
        }
    }

    #[test]
    fn zero_input_flagged() {
        let grid = FrequencyGrid::new(2, 2, 1.0).unwrap();
        let mut u = Spectrum::new(vec![Complex64::new(1.0, 0.0); 4], Rate::Fast);
        u.values_mut()[3] = Complex64::new(0.0, 0.0);
        let y = Spectrum::new(vec![Complex64::new(1.0, 0.0); 2], Rate::Slow);
        let est = etfe_baseline(&u, &y, &grid).unwrap();
        assert_eq!(est.valid, vec![true, true, true, false]);
        assert!(est.frf[3].re.is_nan());
    }
}
