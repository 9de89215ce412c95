//! Multisine excitation signals.
//!
//! Full-spectrum random-phase multisines drive the multiband local polynomial
//! estimator; the sparse multisine excites a set of bins that never share a
//! slow-rate bin, so each slow output bin sees a single fast input line.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::spectra::{dft, idft, FrequencyGrid, Rate, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationKind {
    Full,
    Sparse,
}

/// What to excite and how loud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    pub grid: FrequencyGrid,
    /// Ascending, deduplicated bins in `[0, N/2]`.
    pub excited_bins: Vec<usize>,
    pub rms: f64,
    pub seed: u64,
    pub kind: ExcitationKind,
}

impl ExcitationSpec {
    pub fn new(
        grid: FrequencyGrid,
        mut excited_bins: Vec<usize>,
        rms: f64,
        seed: u64,
        kind: ExcitationKind,
    ) -> Result<Self> {
        excited_bins.sort_unstable();
        excited_bins.dedup();
        if excited_bins.is_empty() {
            return Err(Error::EmptyExcitation);
        }
        let max = grid.n() / 2;
        if let Some(&bin) = excited_bins.iter().find(|&&b| b > max) {
            return Err(Error::BinOutOfRange { bin, max });
        }
        if !(rms.is_finite() && rms > 0.0) {
            return Err(Error::InvalidConfig(format!("excitation rms must be positive, got {rms}")));
        }
        Ok(Self {
            grid,
            excited_bins,
            rms,
            seed,
            kind,
        })
    }

    /// Every bin in `1..=N/2`. DC is left out; the estimator still returns a
    /// DC value through its local window.
    pub fn full_spectrum(grid: FrequencyGrid, rms: f64, seed: u64) -> Result<Self> {
        let bins = (1..=grid.n() / 2).collect();
        Self::new(grid, bins, rms, seed, ExcitationKind::Full)
    }

    /// The sparse set of [`sparse_multisine_bins`], folded into `[0, N/2]`.
    pub fn sparse(grid: FrequencyGrid, rms: f64, seed: u64) -> Result<Self> {
        let set = sparse_multisine_bins(&grid)?;
        let bins = fold_to_half_spectrum(&set, grid.n());
        Self::new(grid, bins, rms, seed, ExcitationKind::Sparse)
    }
}

/// A synthesized excitation: the real fast-rate record and its DFT.
#[derive(Clone, Debug)]
pub struct Multisine {
    pub record: Vec<f64>,
    pub spectrum: Spectrum,
}

/// Flat-amplitude random-phase multisine.
///
/// Phases are drawn uniformly on `[0, 2 pi)` in ascending bin order from a
/// `ChaCha20Rng` seeded with `spec.seed`. DC and the fast Nyquist bin, when
/// excited, get a real amplitude whose sign follows `cos(phase)`. The record is
/// scaled to `spec.rms` after synthesis.
pub fn random_phase_multisine(spec: &ExcitationSpec) -> Result<Multisine> {
    if spec.excited_bins.is_empty() {
        return Err(Error::EmptyExcitation);
    }
    let n = spec.grid.n();
    let mut rng = rng_from_seed(spec.seed);
    let mut lines = vec![Complex64::new(0.0, 0.0); n];
    for &k in &spec.excited_bins {
        let phase: f64 = rng.random_range(0.0..2.0 * PI);
        if k == 0 || 2 * k == n {
            lines[k] = Complex64::new(phase.cos().signum(), 0.0);
        } else {
            let v = Complex64::from_polar(1.0, phase);
            lines[k] = v;
            lines[n - k] = v.conj();
        }
    }
    let time = idft(&Spectrum::new(lines, Rate::Fast))?;
    debug_assert!(time.iter().all(|x| x.im.abs() < 1e-12));
    let raw: Vec<f64> = time.iter().map(|x| x.re).collect();
    let raw_rms = rms(&raw);
    let scale = spec.rms / raw_rms;
    let record: Vec<f64> = raw.iter().map(|x| x * scale).collect();
    let spectrum = dft(&record, Rate::Fast)?;
    Ok(Multisine { record, spectrum })
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// The sparse excitation set `{ j + i (M + 1) : i in 0..F, j in {0, F, 2F, .., M/2} }`.
///
/// Returned ascending. Its bins are pairwise distinct modulo `M`.
pub fn sparse_multisine_bins(grid: &FrequencyGrid) -> Result<Vec<usize>> {
    let (n, m, f) = (grid.n(), grid.m(), grid.factor());
    if m % 2 != 0 {
        return Err(Error::OddSlowLength(m));
    }
    let mut set: Vec<usize> = (0..f)
        .flat_map(|i| (0..=m / 2).step_by(f).map(move |j| (j + i * (m + 1)) % n))
        .collect();
    set.sort_unstable();
    set.dedup();

    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in &set {
        if let Some(&other) = seen.get(&(k % m)) {
            return Err(Error::SparseCollision {
                a: other,
                b: k,
                residue: k % m,
            });
        }
        seen.insert(k % m, k);
    }
    Ok(set)
}

/// Map bins to their representative in `[0, N/2]` (`k` or `N - k`).
pub fn fold_to_half_spectrum(bins: &[usize], n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = bins.iter().map(|&k| (k % n).min(n - k % n) % n).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Bins of `set` whose slow bin also receives a different excited fast bin
/// once the set is completed with its conjugate mirror images `N - k`.
///
/// A real record always excites both `k` and `N - k`; for the sparse set this
/// breaks the single-contribution property at a few slow bins around `M/2`.
pub fn mirror_collisions(set: &[usize], grid: &FrequencyGrid) -> Vec<usize> {
    let (n, m) = (grid.n(), grid.m());
    let mut by_residue: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut excited: Vec<usize> = set.iter().flat_map(|&k| [k % n, (n - k % n) % n]).collect();
    excited.sort_unstable();
    excited.dedup();
    for k in excited {
        by_residue.entry(k % m).or_default().push(k);
    }
    set.iter()
        .copied()
        .filter(|&k| by_residue[&(k % m)].len() > 1)
        .collect()
}

/// Outcome of the input roughness check at one bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Roughness {
    pub rough: bool,
    /// Smallest `|U(k + r1 + iM) - U(k + r2 + iM)|` over the window and bands.
    pub margin: f64,
}

pub const DEFAULT_ROUGHNESS_FLOOR: f64 = 1e-12;

/// Checks that the input differs between every pair of window positions in
/// every band: `|U(k + r1 + iM) - U(k + r2 + iM)| > floor` for `r1 != r2`.
pub fn check_roughness(
    input: &Spectrum,
    grid: &FrequencyGrid,
    half_width: usize,
    k: usize,
    floor: f64,
) -> Roughness {
    let m = grid.m() as i64;
    let nw = half_width as i64;
    let mut margin = f64::INFINITY;
    for band in 0..grid.factor() as i64 {
        let window: Vec<Complex64> = (-nw..=nw).map(|r| input.at(k as i64 + r + band * m)).collect();
        for (a, ua) in window.iter().enumerate() {
            for ub in &window[a + 1..] {
                margin = margin.min((ua - ub).norm());
            }
        }
    }
    if half_width == 0 {
        // a single position has nothing to differ from
        margin = input.at(k as i64).norm();
    }
    Roughness {
        rough: margin > floor,
        margin,
    }
}
