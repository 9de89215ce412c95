//! Experiment configuration: TOML in, validated setup out.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use frfid_core::excitation::sparse_multisine_bins;
use frfid_core::plantsim::REFERENCE_RESONANCES;
use frfid_core::{FrequencyGrid, LpmConfig, PlantModel, TransferFunction};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lpm,
    Sparse,
    Etfe,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lpm, Method::Sparse, Method::Etfe];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lpm => "lpm",
            Method::Sparse => "sparse",
            Method::Etfe => "etfe",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| format!("unknown method {s:?} (expected lpm, sparse or etfe)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Fast sampling rate in Hz.
    pub fs_fast: f64,
    pub factor: usize,
    /// Measurement time in seconds; `fs_fast * t_m` fast samples.
    pub t_m: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            fs_fast: 120.0,
            factor: 4,
            t_m: 120.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    /// Two-resonance fourth-order plant, see [`REFERENCE_RESONANCES`].
    Reference,
    /// Pure delay of `delay` fast samples.
    Delay,
    /// Explicit `num` / `den` in powers of `z^-1`.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub model: PlantKind,
    pub delay: usize,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            model: PlantKind::Reference,
            delay: 1,
            num: Vec::new(),
            den: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Standard deviation of the white noise driving the noise filter.
    pub sigma: f64,
    /// Alternative to `sigma`: the white-noise level is set from the RMS of
    /// the clean slow output, `sigma = rms(y) 10^(-snr_db / 20)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            snr_db: None,
            num: vec![1.0],
            den: vec![1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationSection {
    /// RMS of the full-spectrum multisine.
    pub rms: f64,
    /// RMS of the sparse multisine used by the `sparse` method.
    pub sparse_rms: f64,
    /// Simulate the full-spectrum experiment in periodic steady state
    /// instead of from zero initial state.
    pub steady_state: bool,
}

impl Default for ExcitationSection {
    fn default() -> Self {
        Self {
            rms: 8.3e-3,
            sparse_rms: 9.6e-3,
            steady_state: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpmSection {
    pub order: usize,
    pub half_width: usize,
    pub rank_tol: f64,
    pub normalize_basis: bool,
}

impl Default for LpmSection {
    fn default() -> Self {
        Self {
            order: 2,
            half_width: 150,
            rank_tol: 1e-10,
            normalize_basis: true,
        }
    }
}

/// Everything that determines the output of a run. `out_dir` and thread
/// count are deliberately not part of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Monte Carlo realizations.
    pub runs: usize,
    #[serde(skip_serializing)]
    pub out_dir: Option<String>,
    pub grid: GridSection,
    pub plant: PlantSection,
    pub noise: NoiseSection,
    pub excitation: ExcitationSection,
    pub lpm: LpmSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            methods: Method::ALL.to_vec(),
            runs: 500,
            out_dir: None,
            grid: GridSection::default(),
            plant: PlantSection::default(),
            noise: NoiseSection::default(),
            excitation: ExcitationSection::default(),
            lpm: LpmSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    /// The fully resolved config as written next to every result.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn lpm_config(&self) -> LpmConfig {
        let mut cfg = LpmConfig::new(self.lpm.order, self.lpm.half_width, self.grid.factor);
        cfg.rank_tol = self.lpm.rank_tol;
        cfg.normalize_basis = self.lpm.normalize_basis;
        cfg
    }

    pub fn has(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }
}

/// A config that passed [`validate_config`], with the derived objects.
#[derive(Clone, Debug)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub grid: FrequencyGrid,
    pub plant: PlantModel,
    pub noise_tf: TransferFunction,
    pub lpm: LpmConfig,
}

fn finite_positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Check every constraint and report all violations at once.
pub fn validate_config(cfg: &ExperimentConfig) -> Result<Setup, HarnessError> {
    let mut errors = Vec::new();

    let g = &cfg.grid;
    if !finite_positive(g.fs_fast) {
        errors.push(format!("grid.fs_fast = {} must be positive", g.fs_fast));
    }
    if !finite_positive(g.t_m) {
        errors.push(format!("grid.t_m = {} must be positive", g.t_m));
    }
    if g.factor == 0 {
        errors.push("grid.factor must be at least 1".to_string());
    }
    let grid = if errors.is_empty() {
        match FrequencyGrid::from_rates(g.fs_fast, g.factor, g.t_m) {
            Ok(grid) => Some(grid),
            Err(e) => {
                errors.push(format!("grid: {e}"));
                None
            }
        }
    } else {
        None
    };

    let lpm = cfg.lpm_config();
    if let Some(grid) = &grid {
        if cfg.has(Method::Lpm) {
            errors.extend(lpm.violations(grid.m()).into_iter().map(|v| format!("lpm: {v}")));
        }
        if cfg.has(Method::Sparse) {
            if let Err(e) = sparse_multisine_bins(grid) {
                errors.push(format!("sparse: {e}"));
            }
        }
    }
    if cfg.methods.is_empty() {
        errors.push("methods is empty".to_string());
    }
    let distinct: BTreeSet<_> = cfg.methods.iter().collect();
    if distinct.len() != cfg.methods.len() {
        errors.push("methods lists a method twice".to_string());
    }

    if !finite_positive(cfg.excitation.rms) {
        errors.push(format!("excitation.rms = {} must be positive", cfg.excitation.rms));
    }
    if !finite_positive(cfg.excitation.sparse_rms) {
        errors.push(format!(
            "excitation.sparse_rms = {} must be positive",
            cfg.excitation.sparse_rms
        ));
    }

    let plant_tf = match cfg.plant.model {
        PlantKind::Reference => g
            .fs_fast
            .is_finite()
            .then(|| TransferFunction::from_resonances(&REFERENCE_RESONANCES, 1.0 / g.fs_fast))
            .transpose(),
        PlantKind::Delay => Ok(Some(TransferFunction::delay(cfg.plant.delay))),
        PlantKind::Custom => TransferFunction::new(cfg.plant.num.clone(), cfg.plant.den.clone()).map(Some),
    };
    let plant_tf = match plant_tf {
        Ok(tf) => tf,
        Err(e) => {
            errors.push(format!("plant: {e}"));
            None
        }
    };
    if let Some(tf) = &plant_tf {
        if !tf.is_stable() {
            errors.push(format!(
                "plant: unstable, largest pole radius {}",
                tf.max_pole_radius()
            ));
        }
    }

    let n = &cfg.noise;
    if !(n.sigma.is_finite() && n.sigma >= 0.0) {
        errors.push(format!("noise.sigma = {} must be finite and nonnegative", n.sigma));
    }
    if let Some(snr) = n.snr_db {
        if !snr.is_finite() {
            errors.push(format!("noise.snr_db = {snr} must be finite"));
        }
        if n.sigma != 0.0 {
            errors.push("noise.sigma and noise.snr_db are mutually exclusive".to_string());
        }
    }
    let noise_tf = match TransferFunction::new(n.num.clone(), n.den.clone()) {
        Ok(tf) => {
            if !tf.is_stable() {
                errors.push(format!(
                    "noise: unstable filter, largest pole radius {}",
                    tf.max_pole_radius()
                ));
            }
            Some(tf)
        }
        Err(e) => {
            errors.push(format!("noise: {e}"));
            None
        }
    };

    if !errors.is_empty() {
        return Err(HarnessError::Config(errors));
    }
    let grid = grid.expect("checked");
    Ok(Setup {
        config: cfg.clone(),
        plant: PlantModel::new(plant_tf.expect("checked"), grid.ts_fast()),
        grid,
        noise_tf: noise_tf.expect("checked"),
        lpm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(cfg: &ExperimentConfig) -> Vec<String> {
        match validate_config(cfg) {
            Err(HarnessError::Config(v)) => v,
            Ok(_) => Vec::new(),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn defaults_are_table_one() {
        let setup = validate_config(&ExperimentConfig::default()).unwrap();
        assert_eq!(setup.grid.n(), 14400);
        assert_eq!(setup.grid.m(), 3600);
        assert_eq!(setup.grid.fs_slow(), 30.0);
        assert_eq!(setup.lpm.parameters(), 15);
        assert_eq!(setup.lpm.equations(), 301);
    }

    #[test]
    fn narrow_window_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.lpm.half_width = 6;
        let errs = messages(&cfg);
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("13") && errs[0].contains("15"), "{errs:?}");
    }

    #[test]
    fn window_equal_to_period_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.lpm.half_width = 1800;
        assert_eq!(messages(&cfg).len(), 1);
    }

    #[test]
    fn all_errors_are_listed() {
        let mut cfg = ExperimentConfig::default();
        cfg.lpm.half_width = 6;
        cfg.excitation.rms = -1.0;
        cfg.methods.push(Method::Lpm);
        cfg.noise.sigma = 1.0;
        cfg.noise.snr_db = Some(20.0);
        assert_eq!(messages(&cfg).len(), 4);
    }

    #[test]
    fn non_integer_grid_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.t_m = 120.005;
        assert_eq!(messages(&cfg).len(), 1);
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.snr_db = Some(20.0);
        cfg.methods = vec![Method::Etfe];
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn method_names() {
        assert_eq!("sparse".parse::<Method>().unwrap(), Method::Sparse);
        assert!("fft".parse::<Method>().is_err());
    }
}
