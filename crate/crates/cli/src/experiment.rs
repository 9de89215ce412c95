//! Excitation, simulation and identification pipelines.

use std::collections::BTreeMap;
use std::path::Path;

use frfid_core::estimators::{estimate_frf_lpm, estimate_sparse, etfe_baseline, EtfeEstimate, FrfEstimate, SparseEstimate, SparseStatus};
use frfid_core::estimators::sparse::DEFAULT_INPUT_FLOOR;
use frfid_core::excitation::{random_phase_multisine, rms, sparse_multisine_bins, ExcitationSpec};
use frfid_core::export::{read_record_csv, write_frf_csv, write_record_csv};
use frfid_core::plantsim::{add_noise, simulate_lti, simulate_steady_state, slow_sample, true_frf};
use frfid_core::seed::derive_seed;
use frfid_core::spectra::dft;
use frfid_core::{Complex64, NoiseModel, Rate, Spectrum};
use serde::Serialize;

use crate::bundle::{Bundle, Manifest, Stats, Timing, RESOLVED_CONFIG};
use crate::compare::{ErrorSummary, MethodErrors};
use crate::config::{validate_config, ExperimentConfig, Method, Setup};
use crate::{at, HarnessError};

/// Seed streams derived from the master seed.
pub const STREAM_EXCITATION: u64 = 0;
pub const STREAM_SPARSE_EXCITATION: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_SPARSE_NOISE: u64 = 3;
/// Monte Carlo realization `r` uses stream `STREAM_MONTECARLO + r`.
pub const STREAM_MONTECARLO: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    /// Random-phase multisine on every bin; used by `lpm` and `etfe`.
    Full,
    /// Sparse multisine, always simulated in periodic steady state.
    Sparse,
}

impl RecordKind {
    fn suffix(self) -> &'static str {
        match self {
            RecordKind::Full => "",
            RecordKind::Sparse => "_sparse",
        }
    }
}

/// One input/output experiment.
#[derive(Clone, Debug)]
pub struct Record {
    pub kind: RecordKind,
    /// Fast input record, length `N`.
    pub input: Vec<f64>,
    /// Noise-free slow output, when simulated.
    pub clean_output: Option<Vec<f64>>,
    /// Slow output record as measured, length `M`.
    pub output: Vec<f64>,
    /// Resolved white-noise standard deviation.
    pub sigma: f64,
    pub input_spectrum: Spectrum,
    pub output_spectrum: Spectrum,
}

/// User-supplied records replacing the simulation.
#[derive(Clone, Debug)]
pub struct ExternalData {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl ExternalData {
    pub fn load(input: &Path, output: &Path) -> Result<Self, HarnessError> {
        let read = |p: &Path| -> Result<Vec<f64>, HarnessError> {
            let f = std::fs::File::open(p).map_err(|e| HarnessError::Stage {
                stage: "load",
                message: format!("{}: {e}", p.display()),
            })?;
            let (values, _) = read_record_csv(f).map_err(|e| HarnessError::Stage {
                stage: "load",
                message: format!("{}: {e}", p.display()),
            })?;
            Ok(values)
        };
        Ok(Self {
            input: read(input)?,
            output: read(output)?,
        })
    }
}

pub(crate) fn seed_for(setup: &Setup, stream: u64) -> u64 {
    derive_seed(setup.config.seed, stream)
}

pub(crate) fn resolve_sigma(cfg: &ExperimentConfig, clean: &[f64]) -> f64 {
    match cfg.noise.snr_db {
        Some(snr) => rms(clean) * 10f64.powf(-snr / 20.0),
        None => cfg.noise.sigma,
    }
}

/// Synthesize the excitation of `kind` (stage "excite").
pub fn excite(setup: &Setup, kind: RecordKind) -> Result<(Vec<f64>, Spectrum), HarnessError> {
    let cfg = &setup.config;
    let spec = match kind {
        RecordKind::Full => ExcitationSpec::full_spectrum(setup.grid, cfg.excitation.rms, seed_for(setup, STREAM_EXCITATION)),
        RecordKind::Sparse => ExcitationSpec::sparse(
            setup.grid,
            cfg.excitation.sparse_rms,
            seed_for(setup, STREAM_SPARSE_EXCITATION),
        ),
    }
    .map_err(at("excite"))?;
    let ms = random_phase_multisine(&spec).map_err(at("excite"))?;
    Ok((ms.record, ms.spectrum))
}

/// Noise-free slow output for a fast input (stage "simulate").
pub fn simulate_clean(setup: &Setup, kind: RecordKind, input: &[f64]) -> Result<Vec<f64>, HarnessError> {
    let steady = kind == RecordKind::Sparse || setup.config.excitation.steady_state;
    let y = if steady {
        simulate_steady_state(&setup.plant, input).map_err(at("simulate"))?
    } else {
        simulate_lti(&setup.plant, input, None)
    };
    slow_sample(&y, setup.grid.factor()).map_err(at("simulate"))
}

/// Excite, simulate, add noise and transform.
pub fn simulate_record(setup: &Setup, kind: RecordKind) -> Result<Record, HarnessError> {
    let (input, input_spectrum) = excite(setup, kind)?;
    let clean = simulate_clean(setup, kind, &input)?;
    let sigma = resolve_sigma(&setup.config, &clean);
    let stream = match kind {
        RecordKind::Full => STREAM_NOISE,
        RecordKind::Sparse => STREAM_SPARSE_NOISE,
    };
    let noise = NoiseModel {
        tf: setup.noise_tf.clone(),
        sigma,
        seed: seed_for(setup, stream),
    };
    let output = add_noise(&clean, &noise).output;
    let output_spectrum = dft(&output, Rate::Slow).map_err(at("dft"))?;
    Ok(Record {
        kind,
        input,
        clean_output: Some(clean),
        output,
        sigma,
        input_spectrum,
        output_spectrum,
    })
}

fn external_record(setup: &Setup, data: &ExternalData) -> Result<Record, HarnessError> {
    let (n, m) = (setup.grid.n(), setup.grid.m());
    if data.input.len() != n || data.output.len() != m {
        return Err(HarnessError::Stage {
            stage: "load",
            message: format!(
                "external records have {} fast and {} slow samples, the configured grid needs {n} and {m}",
                data.input.len(),
                data.output.len()
            ),
        });
    }
    Ok(Record {
        kind: RecordKind::Full,
        input_spectrum: dft(&data.input, Rate::Fast).map_err(at("dft"))?,
        output_spectrum: dft(&data.output, Rate::Slow).map_err(at("dft"))?,
        input: data.input.clone(),
        clean_output: None,
        output: data.output.clone(),
        sigma: f64::NAN,
    })
}

fn needs_full(cfg: &ExperimentConfig) -> bool {
    cfg.has(Method::Lpm) || cfg.has(Method::Etfe)
}

fn seeds(setup: &Setup) -> BTreeMap<String, u64> {
    let cfg = &setup.config;
    let mut s = BTreeMap::new();
    if needs_full(cfg) {
        s.insert("excitation".to_string(), seed_for(setup, STREAM_EXCITATION));
        s.insert("noise".to_string(), seed_for(setup, STREAM_NOISE));
    }
    if cfg.has(Method::Sparse) {
        s.insert("sparse_excitation".to_string(), seed_for(setup, STREAM_SPARSE_EXCITATION));
        s.insert("sparse_noise".to_string(), seed_for(setup, STREAM_SPARSE_NOISE));
    }
    s
}

fn start(cfg: &ExperimentConfig, out: &Path, command: &str) -> Result<(Setup, Bundle, Manifest), HarnessError> {
    let setup = validate_config(cfg)?;
    let text = setup.config.to_toml();
    let mut bundle = Bundle::create(out)?;
    bundle.write(RESOLVED_CONFIG, text.as_bytes())?;
    let mut manifest = Manifest::new(command, &text, cfg.seed, &setup.grid);
    manifest.seeds = seeds(&setup);
    Ok((setup, bundle, manifest))
}

fn write_input(bundle: &mut Bundle, setup: &Setup, kind: RecordKind, input: &[f64]) -> Result<(), HarnessError> {
    let ts = setup.grid.ts_fast();
    bundle.write_with(&format!("input_fast{}.csv", kind.suffix()), |w| write_record_csv(w, input, ts))
}

fn write_output(bundle: &mut Bundle, setup: &Setup, rec: &Record) -> Result<(), HarnessError> {
    let ts = setup.grid.ts_slow();
    bundle.write_with(&format!("output_slow{}.csv", rec.kind.suffix()), |w| {
        write_record_csv(w, &rec.output, ts)
    })
}

fn kinds(cfg: &ExperimentConfig) -> Vec<RecordKind> {
    let mut k = Vec::new();
    if needs_full(cfg) {
        k.push(RecordKind::Full);
    }
    if cfg.has(Method::Sparse) {
        k.push(RecordKind::Sparse);
    }
    k
}

/// Write the excitation records only.
pub fn run_excite(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest, HarnessError> {
    let mut timing = Timing::new();
    let (setup, mut bundle, manifest) = start(cfg, out, "excite")?;
    for kind in kinds(cfg) {
        let (input, _) = excite(&setup, kind)?;
        write_input(&mut bundle, &setup, kind, &input)?;
    }
    timing.lap("excite");
    bundle.finish(manifest, &timing)
}

/// Write excitation and simulated (noisy) slow output records.
pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest, HarnessError> {
    let mut timing = Timing::new();
    let (setup, mut bundle, mut manifest) = start(cfg, out, "simulate")?;
    for kind in kinds(cfg) {
        let rec = simulate_record(&setup, kind)?;
        write_input(&mut bundle, &setup, kind, &rec.input)?;
        write_output(&mut bundle, &setup, &rec)?;
        manifest.noise_sigma = Some(rec.sigma);
    }
    timing.lap("simulate");
    bundle.finish(manifest, &timing)
}

#[derive(Serialize)]
struct MethodSummary {
    method: Method,
    record: &'static str,
    estimated_bins: usize,
    valid_bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<Stats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    band_consistency: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    interference_bins: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorSummary>,
}

/// Everything `identify` computed, also written to disk.
#[derive(Clone, Debug)]
pub struct IdentifyResult {
    pub setup: Setup,
    pub full: Option<Record>,
    pub sparse_record: Option<Record>,
    /// True FRF on every fast bin, when the plant was simulated.
    pub truth: Option<Vec<Complex64>>,
    pub lpm: Option<FrfEstimate>,
    pub etfe: Option<EtfeEstimate>,
    pub sparse: Option<SparseEstimate>,
    pub errors: Vec<MethodErrors>,
    pub manifest: Manifest,
}

impl IdentifyResult {
    pub fn errors_of(&self, method: Method) -> Option<&MethodErrors> {
        self.errors.iter().find(|e| e.method == method)
    }
}

/// The full pipeline: excite, simulate with noise, transform, estimate with
/// every selected method, compare against the true FRF, write the bundle.
/// With `external` data the simulation and the oracle comparison are
/// skipped and all methods use the supplied records.
pub fn run_identify(
    cfg: &ExperimentConfig,
    out: &Path,
    external: Option<&ExternalData>,
) -> Result<IdentifyResult, HarnessError> {
    let mut timing = Timing::new();
    let (setup, mut bundle, mut manifest) = start(cfg, out, "identify")?;
    let grid = setup.grid;
    let half = grid.n() / 2;

    let (full, sparse_record) = match external {
        Some(data) => {
            manifest.data_source = "external".to_string();
            manifest.seeds.clear();
            (Some(external_record(&setup, data)?), None)
        }
        None => {
            let full = needs_full(cfg).then(|| simulate_record(&setup, RecordKind::Full)).transpose()?;
            let sparse = cfg.has(Method::Sparse).then(|| simulate_record(&setup, RecordKind::Sparse)).transpose()?;
            manifest.noise_sigma = full.as_ref().or(sparse.as_ref()).map(|r| r.sigma);
            (full, sparse)
        }
    };
    for rec in full.iter().chain(&sparse_record) {
        write_input(&mut bundle, &setup, rec.kind, &rec.input)?;
        write_output(&mut bundle, &setup, rec)?;
    }
    timing.lap("simulate");

    let truth = match external {
        Some(_) => None,
        None => Some(
            (0..grid.n())
                .map(|k| true_frf(&setup.plant, grid.omega(k)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(at("oracle"))?,
        ),
    };

    let mut result = IdentifyResult {
        setup: setup.clone(),
        full: None,
        sparse_record: None,
        truth,
        lpm: None,
        etfe: None,
        sparse: None,
        errors: Vec::new(),
        manifest: manifest.clone(),
    };
    let mut summaries = Vec::new();

    for method in Method::ALL.into_iter().filter(|m| cfg.has(*m)) {
        // `rows` are (bin, value, valid) on the half spectrum
        let (rows, mut summary) = match method {
            Method::Lpm => {
                let rec = full.as_ref().expect("full record");
                let est = estimate_frf_lpm(&rec.input_spectrum, &rec.output_spectrum, &grid, &setup.lpm).map_err(at("estimate"))?;
                bundle.write_with("frf_lpm.csv", |w| write_frf_csv(w, &est.rows()))?;
                let rows: Vec<_> = (0..=half).map(|k| (k, est.frf[k], est.status[k].is_valid())).collect();
                let summary = MethodSummary {
                    method,
                    record: "full",
                    estimated_bins: grid.n(),
                    valid_bins: est.valid_count(),
                    condition: Stats::of(est.condition.iter().copied()),
                    band_consistency: Some(est.band_consistency()),
                    interference_bins: Vec::new(),
                    error: None,
                };
                result.lpm = Some(est);
                (rows, summary)
            }
            Method::Etfe => {
                let rec = full.as_ref().expect("full record");
                let est = etfe_baseline(&rec.input_spectrum, &rec.output_spectrum, &grid).map_err(at("estimate"))?;
                bundle.write_with("frf_etfe.csv", |w| write_frf_csv(w, &est.rows()))?;
                let rows: Vec<_> = (0..=half).map(|k| (k, est.frf[k], est.valid[k])).collect();
                let summary = MethodSummary {
                    method,
                    record: "full",
                    estimated_bins: grid.n(),
                    valid_bins: est.valid.iter().filter(|v| **v).count(),
                    condition: None,
                    band_consistency: None,
                    interference_bins: Vec::new(),
                    error: None,
                };
                result.etfe = Some(est);
                (rows, summary)
            }
            Method::Sparse => {
                let (rec, name) = match (&sparse_record, &full) {
                    (Some(r), _) => (r, "sparse"),
                    (None, Some(r)) => (r, "external"),
                    (None, None) => unreachable!("a record exists for every selected method"),
                };
                let set = sparse_multisine_bins(&grid).map_err(at("estimate"))?;
                let est = estimate_sparse(&rec.input_spectrum, &rec.output_spectrum, &grid, &set, DEFAULT_INPUT_FLOOR)
                    .map_err(at("estimate"))?;
                bundle.write_with("frf_sparse.csv", |w| write_frf_csv(w, &est.rows()))?;
                let rows: Vec<_> = est.bins.iter().map(|b| (b.bin, b.frf, b.status == SparseStatus::Valid)).collect();
                let summary = MethodSummary {
                    method,
                    record: name,
                    estimated_bins: est.bins.len(),
                    valid_bins: est.valid().count(),
                    condition: None,
                    band_consistency: None,
                    interference_bins: est.warnings().into_iter().map(|(k, _)| k).collect(),
                    error: None,
                };
                result.sparse = Some(est);
                (rows, summary)
            }
        };
        if let Some(truth) = &result.truth {
            let errors = MethodErrors::new(method, &grid, truth, rows);
            bundle.write_with(&format!("error_{method}.csv"), |w| errors.write_csv(w))?;
            summary.error = Some(errors.summary());
            result.errors.push(errors);
        }
        summaries.push(summary);
        timing.lap(&format!("estimate_{method}"));
    }

    manifest.methods = summaries
        .iter()
        .map(|s| serde_json::to_value(s).expect("summary serializes"))
        .collect();
    result.manifest = bundle.finish(manifest, &timing)?;
    result.full = full;
    result.sparse_record = sparse_record;
    Ok(result)
}
