//! Monte Carlo check of the analytic FRF variance: fixed excitation and
//! plant, independent noise realizations, empirical versus analytic
//! variance per bin for both candidate scalings.

use std::io::Write;
use std::path::Path;

use frfid_core::estimators::{estimate_bin, estimate_variance};
use frfid_core::plantsim::add_noise;
use frfid_core::spectra::dft;
use frfid_core::{Complex64, Error, NoiseModel, Rate, Spectrum};
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{median, Bundle, Manifest, Timing, RESOLVED_CONFIG};
use crate::config::{validate_config, ExperimentConfig, Setup};
use crate::experiment::{excite, resolve_sigma, seed_for, simulate_clean, RecordKind, STREAM_EXCITATION, STREAM_MONTECARLO};
use crate::{at, HarnessError};

/// A scaling "matches" when its median analytic/empirical ratio lies here.
pub const RATIO_BAND: (f64, f64) = (0.5, 2.0);

pub const MC_HEADER: [&str; 12] = [
    "bin",
    "freq_hz",
    "band",
    "empirical_var",
    "analytic_f_mean",
    "analytic_f2_mean",
    "ratio_f",
    "ratio_f2",
    "noise_variance_run0",
    "analytic_f_run0",
    "mean_frf_abs",
    "valid_flag",
];

/// Per-bin results; NaN where the bin has no estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinResult {
    pub bin: usize,
    /// Sample variance of `G_hat` over the runs, `sum |G - mean|^2 / (n - 1)`.
    pub empirical: f64,
    /// Mean over runs of `F (S^H S) C_V`.
    pub analytic_f: f64,
    /// Mean over runs of `F^2 (S^H S) C_V`.
    pub analytic_f2: f64,
    /// `C_V` and `F (S^H S) C_V` of the first run, for the structure checks.
    pub noise_variance_run0: f64,
    pub analytic_f_run0: f64,
    pub mean_frf: Complex64,
    pub valid: bool,
}

/// Largest relative deviations of the structure checks, over valid bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Periodicity {
    /// `C_V(k)` against `C_V(k + M)`.
    pub noise_variance_shift: f64,
    /// `C_V(k)` against `C_V` at the bin mirrored about `M/2` in its band.
    pub noise_variance_mirror: f64,
    /// Same two checks on the analytic FRF variance.
    pub variance_shift: f64,
    pub variance_mirror: f64,
    /// Analytic FRF variance at `k` against `N - k`.
    pub variance_conjugate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub sigma: f64,
    pub valid_bins: usize,
    pub median_ratio_f: f64,
    pub median_ratio_f2: f64,
    pub f_matches: bool,
    pub f2_matches: bool,
    /// `"F"` or `"F^2"` when exactly one scaling matches.
    pub winner: Option<String>,
    pub ratio_band: (f64, f64),
    pub periodicity: Periodicity,
}

#[derive(Clone, Debug)]
pub struct MonteCarloResult {
    pub setup: Setup,
    pub bins: Vec<BinResult>,
    pub summary: MonteCarloSummary,
    pub manifest: Manifest,
}

fn rel_dev(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Bin mirrored about the middle of its band of width `M`.
fn band_mirror(k: usize, m: usize, n: usize) -> usize {
    let j = k % m;
    (k - j + (m - j) % m) % n
}

fn max_dev(bins: &[BinResult], pair: impl Fn(usize) -> usize, value: impl Fn(&BinResult) -> f64) -> f64 {
    bins.iter()
        .filter(|b| b.valid)
        .filter_map(|b| {
            let o = &bins[pair(b.bin)];
            o.valid.then(|| rel_dev(value(b), value(o)))
        })
        .fold(0.0, f64::max)
}

fn summarize(setup: &Setup, bins: &[BinResult], runs: usize, sigma: f64) -> MonteCarloSummary {
    let (n, m) = (setup.grid.n(), setup.grid.m());
    let valid: Vec<&BinResult> = bins.iter().filter(|b| b.valid && b.empirical > 0.0).collect();
    let ratio = |f: &dyn Fn(&BinResult) -> f64| -> f64 {
        median(&valid.iter().map(|b| f(b) / b.empirical).collect::<Vec<_>>()).unwrap_or(f64::NAN)
    };
    let median_ratio_f = ratio(&|b| b.analytic_f);
    let median_ratio_f2 = ratio(&|b| b.analytic_f2);
    let inside = |r: f64| r >= RATIO_BAND.0 && r <= RATIO_BAND.1;
    let (f_matches, f2_matches) = (inside(median_ratio_f), inside(median_ratio_f2));
    let winner = match (f_matches, f2_matches) {
        (true, false) => Some("F".to_string()),
        (false, true) => Some("F^2".to_string()),
        _ => None,
    };
    let cv = |b: &BinResult| b.noise_variance_run0;
    let var = |b: &BinResult| b.analytic_f_run0;
    MonteCarloSummary {
        runs,
        sigma,
        valid_bins: valid.len(),
        median_ratio_f,
        median_ratio_f2,
        f_matches,
        f2_matches,
        winner,
        ratio_band: RATIO_BAND,
        periodicity: Periodicity {
            noise_variance_shift: max_dev(bins, |k| (k + m) % n, cv),
            noise_variance_mirror: max_dev(bins, |k| band_mirror(k, m, n), cv),
            variance_shift: max_dev(bins, |k| (k + m) % n, var),
            variance_mirror: max_dev(bins, |k| band_mirror(k, m, n), var),
            variance_conjugate: max_dev(bins, |k| (n - k) % n, var),
        },
    }
}

fn bin_result(k: usize, frfs: &[Complex64], vars: &[(f64, f64, f64)]) -> BinResult {
    let runs = frfs.len() as f64;
    let mean = frfs.iter().sum::<Complex64>() / runs;
    let empirical = frfs.iter().map(|g| (g - mean).norm_sqr()).sum::<f64>() / (runs - 1.0);
    let avg = |f: fn(&(f64, f64, f64)) -> f64| vars.iter().map(f).sum::<f64>() / runs;
    BinResult {
        bin: k,
        empirical,
        analytic_f: avg(|v| v.0),
        analytic_f2: avg(|v| v.1),
        noise_variance_run0: vars[0].2,
        analytic_f_run0: vars[0].0,
        mean_frf: mean,
        valid: true,
    }
}

fn invalid(k: usize) -> BinResult {
    BinResult {
        bin: k,
        empirical: f64::NAN,
        analytic_f: f64::NAN,
        analytic_f2: f64::NAN,
        noise_variance_run0: f64::NAN,
        analytic_f_run0: f64::NAN,
        mean_frf: Complex64::new(f64::NAN, f64::NAN),
        valid: false,
    }
}

fn write_csv<W: Write>(w: W, setup: &Setup, bins: &[BinResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(MC_HEADER)?;
    for b in bins {
        w.write_record([
            b.bin.to_string(),
            setup.grid.hz(b.bin).to_string(),
            setup.grid.nyquist_band(b.bin).to_string(),
            b.empirical.to_string(),
            b.analytic_f.to_string(),
            b.analytic_f2.to_string(),
            (b.analytic_f / b.empirical).to_string(),
            (b.analytic_f2 / b.empirical).to_string(),
            b.noise_variance_run0.to_string(),
            b.analytic_f_run0.to_string(),
            b.mean_frf.norm().to_string(),
            u8::from(b.valid).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run `cfg.runs` noise realizations and compare the empirical FRF variance
/// with both analytic scalings.
pub fn run_montecarlo(cfg: &ExperimentConfig, out: &Path) -> Result<MonteCarloResult, HarnessError> {
    let mut timing = Timing::new();
    let setup = validate_config(cfg)?;
    let mut problems: Vec<String> = setup
        .lpm
        .violations(setup.grid.m())
        .into_iter()
        .map(|v| format!("lpm: {v}"))
        .collect();
    if cfg.runs < 2 {
        problems.push(format!("runs = {} but a variance needs at least 2", cfg.runs));
    }
    if cfg.noise.sigma == 0.0 && cfg.noise.snr_db.is_none() {
        problems.push("noise-free Monte Carlo: set noise.sigma or noise.snr_db".to_string());
    }
    if !problems.is_empty() {
        return Err(HarnessError::Config(problems));
    }

    let text = setup.config.to_toml();
    let mut bundle = Bundle::create(out)?;
    bundle.write(RESOLVED_CONFIG, text.as_bytes())?;
    let mut manifest = Manifest::new("montecarlo", &text, cfg.seed, &setup.grid);

    let (input, u) = excite(&setup, RecordKind::Full)?;
    let clean = simulate_clean(&setup, RecordKind::Full, &input)?;
    let sigma = resolve_sigma(cfg, &clean);
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(HarnessError::Config(vec![format!("resolved noise level {sigma} is not positive")]));
    }
    manifest.noise_sigma = Some(sigma);
    manifest.seeds.insert("excitation".to_string(), seed_for(&setup, STREAM_EXCITATION));
    manifest.seeds.insert("montecarlo_run_0".to_string(), seed_for(&setup, STREAM_MONTECARLO));
    manifest.seeds.insert(
        format!("montecarlo_run_{}", cfg.runs - 1),
        seed_for(&setup, STREAM_MONTECARLO + cfg.runs as u64 - 1),
    );
    let ts = setup.grid.ts_fast();
    bundle.write_with("input_fast.csv", |w| frfid_core::export::write_record_csv(w, &input, ts))?;
    timing.lap("simulate");

    let outputs: Vec<Spectrum> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let noise = NoiseModel {
                tf: setup.noise_tf.clone(),
                sigma,
                seed: seed_for(&setup, STREAM_MONTECARLO + r as u64),
            };
            dft(&add_noise(&clean, &noise).output, Rate::Slow)
        })
        .collect::<Result<_, _>>()
        .map_err(at("dft"))?;
    let refs: Vec<&Spectrum> = outputs.iter().collect();
    timing.lap("noise");

    let bins: Vec<BinResult> = (0..setup.grid.n())
        .into_par_iter()
        .map(|k| match estimate_bin(&u, &refs, &setup.grid, k, &setup.lpm) {
            Ok(locals) => {
                let frfs: Vec<Complex64> = locals.iter().map(|l| l.frf()).collect();
                let vars: Vec<(f64, f64, f64)> = locals
                    .iter()
                    .map(|l| match estimate_variance(l, &setup.lpm) {
                        Ok(v) => (v.nominal, v.squared_factor, v.noise_variance),
                        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
                    })
                    .collect();
                Ok(bin_result(k, &frfs, &vars))
            }
            Err(Error::RankDeficient { .. }) => Ok(invalid(k)),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()
        .map_err(at("estimate"))?;
    timing.lap("estimate");

    let summary = summarize(&setup, &bins, cfg.runs, sigma);
    bundle.write_with("montecarlo.csv", |w| write_csv(w, &setup, &bins))?;
    bundle.write_json("montecarlo_summary.json", &summary)?;
    manifest.methods = vec![serde_json::json!({
        "method": "lpm",
        "record": "full",
        "valid_bins": summary.valid_bins,
        "winner": summary.winner,
    })];
    let manifest = bundle.finish(manifest, &timing)?;
    Ok(MonteCarloResult {
        setup,
        bins,
        summary,
        manifest,
    })
}
