//! DFT machinery, frequency grids, decimation and aliasing.
//!
//! The forward transform is unscaled and the inverse carries `1/L`. All bin
//! indices are circular: bin `k` of an `L`-point spectrum is bin `k mod L`.

use std::f64::consts::PI;
use std::ops::Index;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling rate a record or spectrum belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rate {
    Fast,
    Slow,
}

/// Record lengths and sampling times of a fast/slow measurement pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    n: usize,
    m: usize,
    factor: usize,
    ts_fast: f64,
    ts_slow: f64,
}

impl FrequencyGrid {
    /// Grid with `m` slow samples, downsampling factor `factor` and fast
    /// sampling time `ts_fast` seconds.
    pub fn new(m: usize, factor: usize, ts_fast: f64) -> Result<Self> {
        if factor == 0 {
            return Err(Error::ZeroFactor);
        }
        if m == 0 {
            return Err(Error::InvalidGrid("slow record length must be positive".into()));
        }
        if !(ts_fast.is_finite() && ts_fast > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "fast sampling time must be positive, got {ts_fast}"
            )));
        }
        Ok(Self {
            n: m * factor,
            m,
            factor,
            ts_fast,
            ts_slow: factor as f64 * ts_fast,
        })
    }

    /// Grid from a fast sampling rate (Hz), downsampling factor and
    /// measurement time (s). `fs_fast * t_m` must be an integer multiple of
    /// `factor`.
    pub fn from_rates(fs_fast: f64, factor: usize, t_m: f64) -> Result<Self> {
        if factor == 0 {
            return Err(Error::ZeroFactor);
        }
        let n_real = fs_fast * t_m;
        let n = n_real.round();
        if !(n_real.is_finite() && n >= 1.0) || (n_real - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "fs_h * T_m = {n_real} is not a positive integer"
            )));
        }
        let n = n as usize;
        if !n.is_multiple_of(factor) {
            return Err(Error::NotDivisible { len: n, factor });
        }
        Self::new(n / factor, factor, 1.0 / fs_fast)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn ts_fast(&self) -> f64 {
        self.ts_fast
    }

    pub fn ts_slow(&self) -> f64 {
        self.ts_slow
    }

    pub fn fs_fast(&self) -> f64 {
        1.0 / self.ts_fast
    }

    pub fn fs_slow(&self) -> f64 {
        1.0 / self.ts_slow
    }

    /// Generalized frequency `2 pi k / (N Tsh)` in rad/s.
    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / (self.n as f64 * self.ts_fast)
    }

    /// The same frequency written on the slow grid, `2 pi k / (M Tsl)`.
    pub fn omega_slow(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / (self.m as f64 * self.ts_slow)
    }

    pub fn hz(&self, k: usize) -> f64 {
        k as f64 / (self.n as f64 * self.ts_fast)
    }

    /// Index of the slow-Nyquist band (`fs_l / 2` wide) that fast bin `k`
    /// falls in, after folding `k` into `[0, N/2]`. Band 0 is the baseband.
    pub fn nyquist_band(&self, k: usize) -> usize {
        let k = k % self.n;
        let folded = k.min(self.n - k);
        let half_m = (self.m / 2).max(1);
        (folded / half_m).min(self.factor.saturating_sub(1))
    }

    /// True when fast bin `k` lies strictly above the slow Nyquist frequency
    /// (after folding into `[0, N/2]`).
    pub fn above_slow_nyquist(&self, k: usize) -> bool {
        let k = k % self.n;
        let folded = k.min(self.n - k);
        2 * folded > self.m
    }
}

/// `Omega_k` for `k = 0..N-1` in rad/s.
pub fn frequency_grid_values(grid: &FrequencyGrid) -> Vec<f64> {
    (0..grid.n()).map(|k| grid.omega(k)).collect()
}

/// `Omega_k / 2 pi` for `k = 0..N-1` in Hz.
pub fn frequency_grid_hz(grid: &FrequencyGrid) -> Vec<f64> {
    (0..grid.n()).map(|k| grid.hz(k)).collect()
}

/// DFT coefficients of a finite record.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    values: Vec<Complex64>,
    rate: Rate,
}

impl Spectrum {
    pub fn new(values: Vec<Complex64>, rate: Rate) -> Self {
        Self { values, rate }
    }

    pub fn zeros(len: usize, rate: Rate) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], rate)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Circular access: `at(k) == values[k mod L]` for any integer `k`.
    #[inline]
    pub fn at(&self, k: i64) -> Complex64 {
        self.values[k.rem_euclid(self.values.len() as i64) as usize]
    }
}

impl Index<usize> for Spectrum {
    type Output = Complex64;

    fn index(&self, k: usize) -> &Complex64 {
        &self.values[k % self.values.len()]
    }
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// Unscaled DFT of a real record.
pub fn dft(signal: &[f64], rate: Rate) -> Result<Spectrum> {
    if signal.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, false);
    Ok(Spectrum::new(buf, rate))
}

/// Unscaled DFT of a complex record.
pub fn dft_complex(signal: &[Complex64], rate: Rate) -> Result<Spectrum> {
    if signal.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buf = signal.to_vec();
    fft_in_place(&mut buf, false);
    Ok(Spectrum::new(buf, rate))
}

/// Inverse DFT with `1/L` scaling.
pub fn idft(spectrum: &Spectrum) -> Result<Vec<Complex64>> {
    if spectrum.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buf = spectrum.values().to_vec();
    fft_in_place(&mut buf, true);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|x| *x *= scale);
    Ok(buf)
}

fn check_factor(len: usize, factor: usize) -> Result<()> {
    if factor == 0 {
        return Err(Error::ZeroFactor);
    }
    if !len.is_multiple_of(factor) {
        return Err(Error::NotDivisible { len, factor });
    }
    Ok(())
}

/// Keep every `factor`-th sample: `out[m] = x[m * factor]`.
pub fn downsample<T: Copy>(signal: &[T], factor: usize) -> Result<Vec<T>> {
    check_factor(signal.len(), factor)?;
    Ok(signal.iter().step_by(factor).copied().collect())
}

/// Slow-rate spectrum of a downsampled record, computed from the fast-rate
/// spectrum: `out[k] = (1/F) sum_f fast[k + M f]`.
pub fn alias_spectrum(fast: &Spectrum, factor: usize) -> Result<Spectrum> {
    if fast.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_factor(fast.len(), factor)?;
    let m = fast.len() / factor;
    let scale = 1.0 / factor as f64;
    let values = (0..m)
        .map(|k| (0..factor).map(|f| fast.values[k + m * f]).sum::<Complex64>() * scale)
        .collect();
    Ok(Spectrum::new(values, Rate::Slow))
}

/// The `2 nw + 1` values `spectrum[k - nw ..= k + nw]`, indices taken modulo
/// the spectrum length.
pub fn gather_window(spectrum: &Spectrum, center: i64, half_width: usize) -> Result<Vec<Complex64>> {
    let width = 2 * half_width + 1;
    if width > spectrum.len() {
        return Err(Error::WindowTooLong {
            width,
            len: spectrum.len(),
        });
    }
    let start = center - half_width as i64;
    Ok((0..width as i64).map(|i| spectrum.at(start + i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dft_of_constant_is_dc() {
        let x = dft(&[1.0; 4], Rate::Fast).unwrap();
        assert_abs_diff_eq!(x[0].re, 4.0, epsilon = 1e-14);
        for k in 1..4 {
            assert!(x[k].norm() < 1e-14);
        }
    }

    #[test]
    fn dft_of_ramp() {
        let x = dft(&[1.0, 2.0, 3.0, 4.0], Rate::Fast).unwrap();
        let expect = [c(10.0, 0.0), c(-2.0, 2.0), c(-2.0, 0.0), c(-2.0, -2.0)];
        for (a, b) in x.values().iter().zip(expect) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn real_dft_is_conjugate_symmetric() {
        let x = dft(&[0.3, -1.2, 2.5, 0.0, 4.1, -0.7, 1.9, 3.3], Rate::Fast).unwrap();
        assert!((x[7] - x[1].conj()).norm() < 1e-13);
        assert!((x[6] - x[2].conj()).norm() < 1e-13);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(dft(&[], Rate::Fast), Err(Error::EmptyInput)));
        assert!(matches!(
            idft(&Spectrum::new(vec![], Rate::Fast)),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn idft_of_dc() {
        let x = idft(&Spectrum::new(vec![c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], Rate::Fast)).unwrap();
        for v in x {
            assert!((v - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn grid_values() {
        let grid = FrequencyGrid::new(2, 2, 0.5).unwrap();
        let omega = frequency_grid_values(&grid);
        let expect = [0.0, PI, 2.0 * PI, 3.0 * PI];
        for (a, b) in omega.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn table_grid_fast_nyquist() {
        let grid = FrequencyGrid::from_rates(120.0, 4, 120.0).unwrap();
        assert_eq!(grid.n(), 14400);
        assert_eq!(grid.m(), 3600);
        assert_abs_diff_eq!(grid.omega(7200) / (2.0 * PI), 60.0, epsilon = 1e-12);
        assert_abs_diff_eq!(grid.ts_slow(), 1.0 / 30.0, epsilon = 1e-16);
        assert_eq!(grid.omega(0), 0.0);
    }

    #[test]
    fn grid_rejects_fractional_record() {
        assert!(FrequencyGrid::from_rates(120.0, 7, 1.0).is_err());
        assert!(FrequencyGrid::from_rates(120.0, 4, 0.01).is_err());
        assert!(FrequencyGrid::new(4, 0, 1.0).is_err());
    }

    #[test]
    fn downsample_cases() {
        assert_eq!(downsample(&[1, 2, 3, 4, 5, 6], 3).unwrap(), vec![1, 4]);
        assert_eq!(downsample(&[1, 2, 3], 1).unwrap(), vec![1, 2, 3]);
        assert!(matches!(
            downsample(&[1, 2, 3, 4, 5], 2),
            Err(Error::NotDivisible { len: 5, factor: 2 })
        ));
    }

    #[test]
    fn alias_of_ramp() {
        let x = dft(&[1.0, 2.0, 3.0, 4.0], Rate::Fast).unwrap();
        let a = alias_spectrum(&x, 2).unwrap();
        assert_eq!(a.rate(), Rate::Slow);
        assert!((a[0] - c(4.0, 0.0)).norm() < 1e-13);
        assert!((a[1] - c(-2.0, 0.0)).norm() < 1e-13);
        let direct = dft(&[1.0, 3.0], Rate::Slow).unwrap();
        for k in 0..2 {
            assert!((a[k] - direct[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn alias_identity_and_single_bin() {
        let x = dft(&[0.5, -1.0, 2.0, 0.25], Rate::Fast).unwrap();
        assert_eq!(alias_spectrum(&x, 1).unwrap().values(), x.values());

        let mut fast = Spectrum::zeros(12, Rate::Fast);
        fast.values_mut()[2] = c(3.0, -1.5);
        let a = alias_spectrum(&fast, 4).unwrap();
        for k in 0..3 {
            let expect = if k == 2 { c(0.75, -0.375) } else { c(0.0, 0.0) };
            assert_eq!(a[k], expect);
        }
        assert!(alias_spectrum(&fast, 5).is_err());
    }

    #[test]
    fn window_wraps() {
        let s = Spectrum::new((0..8).map(|k| c(k as f64, 0.0)).collect(), Rate::Fast);
        let idx = |w: Vec<Complex64>| w.iter().map(|v| v.re as usize).collect::<Vec<_>>();
        assert_eq!(idx(gather_window(&s, 0, 1).unwrap()), vec![7, 0, 1]);
        assert_eq!(idx(gather_window(&s, 4, 2).unwrap()), vec![2, 3, 4, 5, 6]);
        assert_eq!(idx(gather_window(&s, 5, 0).unwrap()), vec![5]);
        assert!(matches!(
            gather_window(&s, 0, 4),
            Err(Error::WindowTooLong { width: 9, len: 8 })
        ));
    }

    #[test]
    fn circular_index() {
        let s = Spectrum::new((0..5).map(|k| c(k as f64, 1.0)).collect(), Rate::Slow);
        for k in -12i64..12 {
            assert_eq!(s.at(k), s.at(k + 5));
        }
    }
}
