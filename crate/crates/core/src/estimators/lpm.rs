//! Multiband local polynomial estimator.
//!
//! At every fast bin `k` the slow output over the window `k - nw ..= k + nw`
//! is modelled as
//!
//! ```text
//! Y_l(k + r) = sum_i sum_s theta_{s,i} r^s U_h(k + r + iM) + sum_s t_s r^s + V(k + r)
//! ```
//!
//! i.e. a degree-`R` polynomial for the FRF in each of the `F` aliased bands
//! plus a degree-`R` polynomial for the summed transient. The `(R+1)(F+1)`
//! parameters are found by least squares. The first parameter is `G(k)/F`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{check_roughness, DEFAULT_ROUGHNESS_FLOOR};
use crate::spectra::{FrequencyGrid, Spectrum};

const NAN_C: Complex64 = Complex64::new(f64::NAN, f64::NAN);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpmConfig {
    /// Polynomial degree `R`.
    pub order: usize,
    /// Window half-width `nw`.
    pub half_width: usize,
    /// Downsampling factor `F`.
    pub factor: usize,
    /// Smallest accepted `sigma_min / sigma_max` of the regressor.
    pub rank_tol: f64,
    /// Use powers of `r / nw` instead of `r` in the polynomial basis.
    pub normalize_basis: bool,
}

impl LpmConfig {
    pub fn new(order: usize, half_width: usize, factor: usize) -> Self {
        Self {
            order,
            half_width,
            factor,
            rank_tol: 1e-10,
            normalize_basis: true,
        }
    }

    /// `(R + 1)(F + 1)`.
    pub fn parameters(&self) -> usize {
        (self.order + 1) * (self.factor + 1)
    }

    /// `2 nw + 1`.
    pub fn equations(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Residual degrees of freedom `2nw + 1 - (R + 1)(F + 1)`.
    pub fn degrees_of_freedom(&self) -> isize {
        self.equations() as isize - self.parameters() as isize
    }

    /// Every violated constraint for a slow record of `m` samples.
    pub fn violations(&self, m: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.factor == 0 {
            out.push("downsampling factor F must be at least 1".to_string());
        }
        if self.equations() < self.parameters() {
            out.push(format!(
                "window too small: 2nw+1 = {} < (F+1)(R+1) = {} (nw = {}, F = {}, R = {})",
                self.equations(),
                self.parameters(),
                self.half_width,
                self.factor,
                self.order
            ));
        }
        if m < self.equations() {
            out.push(format!(
                "window too large: 2nw+1 = {} must be < M+1 = {} (nw = {}, M = {})",
                self.equations(),
                m + 1,
                self.half_width,
                m
            ));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            out.push(format!("rank tolerance {} not in (0, 1)", self.rank_tol));
        }
        out
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let v = self.violations(m);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }

    fn basis_point(&self, r: i64) -> f64 {
        if self.normalize_basis && self.half_width > 0 {
            r as f64 / self.half_width as f64
        } else {
            r as f64
        }
    }

    fn transient_offset(&self) -> usize {
        self.factor * (self.order + 1)
    }
}

/// Local regression at one bin: `output ~ Theta * regressor`.
#[derive(Clone, Debug)]
pub struct Regression {
    pub center: usize,
    /// `Y_{l,nw}`, length `2nw + 1`.
    pub output: Vec<Complex64>,
    /// `K_{nw}`, `(R+1)(F+1)` rows by `2nw + 1` columns.
    pub regressor: DMatrix<Complex64>,
}

/// Regressor for bin `k`. Column `r` is `[K1(r) (x) Ubar(k + r); K1(r)]` with
/// `K1(r) = [1, r, .., r^R]` and `Ubar(k + r) = [U(k + r + iM)]_{i < F}`.
pub fn build_regression(input: &Spectrum, output: &Spectrum, k: usize, cfg: &LpmConfig) -> Regression {
    let m = output.len() as i64;
    let f = cfg.factor;
    let nw = cfg.half_width as i64;
    let n_eq = cfg.equations();
    let offset = cfg.transient_offset();
    let mut regressor = DMatrix::zeros(cfg.parameters(), n_eq);
    let mut out = Vec::with_capacity(n_eq);
    for (col, r) in (-nw..=nw).enumerate() {
        let x = cfg.basis_point(r);
        let ubar: Vec<Complex64> = (0..f as i64).map(|i| input.at(k as i64 + r + i * m)).collect();
        let mut power = 1.0;
        for s in 0..=cfg.order {
            for (i, u) in ubar.iter().enumerate() {
                regressor[(s * f + i, col)] = u * power;
            }
            regressor[(offset + s, col)] = Complex64::new(power, 0.0);
            power *= x;
        }
        out.push(output.at(k as i64 + r));
    }
    Regression {
        center: k,
        output: out,
        regressor,
    }
}

/// Parameters and residuals of one local fit.
#[derive(Clone, Debug)]
pub struct LocalEstimate {
    pub center: usize,
    /// `[theta_G | theta_g1 .. theta_gR | T | t_1 .. t_R]`.
    pub theta: Vec<Complex64>,
    /// `Y_{l,nw} - Theta K_{nw}`.
    pub residuals: Vec<Complex64>,
    /// `sigma_max / sigma_min` of the regressor.
    pub condition: f64,
    /// `S^H S` with `S = K^H (K K^H)^-1 e_1`.
    pub sensitivity: f64,
    factor: usize,
    order: usize,
}

impl LocalEstimate {
    /// `G(k) = F theta_0`.
    pub fn frf(&self) -> Complex64 {
        self.theta[0] * self.factor as f64
    }

    /// `F theta_{0,i}` for each band `i`, i.e. estimates of `G(k + iM)`.
    pub fn band_frf(&self) -> Vec<Complex64> {
        self.theta[..self.factor]
            .iter()
            .map(|t| t * self.factor as f64)
            .collect()
    }

    /// Constant term of the transient polynomial.
    pub fn transient(&self) -> Complex64 {
        self.theta[self.factor * (self.order + 1)]
    }

    pub fn residual_energy(&self) -> f64 {
        self.residuals.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Orthogonal factorization of one local regressor, reusable for any number
/// of outputs sharing the same input.
#[derive(Clone, Debug)]
pub struct LocalSolver {
    center: usize,
    /// Thin `Q` of `K^T = Q R`.
    q: DMatrix<Complex64>,
    r: DMatrix<Complex64>,
    condition: f64,
    sensitivity: f64,
    factor: usize,
    order: usize,
}

impl LocalSolver {
    /// Factor `K^T = Q R` and check the rank against `cfg.rank_tol`.
    pub fn factor(regressor: &DMatrix<Complex64>, center: usize, cfg: &LpmConfig) -> Result<Self> {
        let a = regressor.transpose();
        let p = a.ncols();
        if a.nrows() < p {
            return Err(Error::InvalidConfig(format!(
                "{} equations for {} parameters",
                a.nrows(),
                p
            )));
        }
        let qr = a.qr();
        let q = qr.q();
        let r = qr.r();
        let sv = r.singular_values();
        let max = sv.max();
        let min = sv.min();
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if ratio.is_nan() || ratio < cfg.rank_tol {
            return Err(Error::RankDeficient {
                bin: center,
                ratio,
                margin: f64::NAN,
            });
        }
        // row 0 of R^-1, via R^T x = e_1
        let mut e1 = DVector::zeros(p);
        e1[0] = Complex64::new(1.0, 0.0);
        let x = r
            .transpose()
            .solve_lower_triangular(&e1)
            .ok_or(Error::RankDeficient {
                bin: center,
                ratio,
                margin: f64::NAN,
            })?;
        let sensitivity = x.iter().map(|v| v.norm_sqr()).sum();
        Ok(Self {
            center,
            q,
            r,
            condition: max / min,
            sensitivity,
            factor: cfg.factor,
            order: cfg.order,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    /// Least-squares fit of `output` (length `2nw + 1`).
    pub fn solve(&self, output: &[Complex64]) -> LocalEstimate {
        let y = DVector::from_column_slice(output);
        let qhy = self.q.ad_mul(&y);
        let theta = self
            .r
            .solve_upper_triangular(&qhy)
            .expect("R is nonsingular after the rank check");
        let fitted = &self.q * &qhy;
        let residuals = (y - fitted).iter().copied().collect();
        LocalEstimate {
            center: self.center,
            theta: theta.iter().copied().collect(),
            residuals,
            condition: self.condition,
            sensitivity: self.sensitivity,
            factor: self.factor,
            order: self.order,
        }
    }
}

/// Least-squares solution of `Y = Theta K` by QR of `K^T`.
pub fn solve_local(output: &[Complex64], regressor: &DMatrix<Complex64>, cfg: &LpmConfig) -> Result<LocalEstimate> {
    solve_local_at(output, regressor, cfg, 0)
}

fn solve_local_at(output: &[Complex64], regressor: &DMatrix<Complex64>, cfg: &LpmConfig, center: usize) -> Result<LocalEstimate> {
    if output.len() != regressor.ncols() {
        return Err(Error::LengthMismatch {
            expected: regressor.ncols(),
            actual: output.len(),
        });
    }
    Ok(LocalSolver::factor(regressor, center, cfg)?.solve(output))
}

/// FRF variance at one bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceEstimate {
    /// `F (S^H S) C_V`.
    pub nominal: f64,
    /// `F^2 (S^H S) C_V`, the scaling implied by `G_hat - G = F V S`.
    pub squared_factor: f64,
    /// `C_V = V V^H / (2nw + 1 - (R+1)(F+1))`.
    pub noise_variance: f64,
}

pub fn estimate_variance(local: &LocalEstimate, cfg: &LpmConfig) -> Result<VarianceEstimate> {
    let dof = cfg.degrees_of_freedom();
    if dof <= 0 {
        return Err(Error::NoDegreesOfFreedom {
            equations: cfg.equations(),
            parameters: cfg.parameters(),
        });
    }
    let noise_variance = local.residual_energy() / dof as f64;
    let f = cfg.factor as f64;
    Ok(VarianceEstimate {
        nominal: f * local.sensitivity * noise_variance,
        squared_factor: f * f * local.sensitivity * noise_variance,
        noise_variance,
    })
}

/// Why a bin has no estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BinStatus {
    Valid,
    RankDeficient { ratio: f64, roughness_margin: f64 },
}

impl BinStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, BinStatus::Valid)
    }
}

/// FRF over the whole fast grid.
#[derive(Clone, Debug)]
pub struct FrfEstimate {
    pub grid: FrequencyGrid,
    pub config: LpmConfig,
    /// `G_hat(Omega_k)`, NaN at invalid bins.
    pub frf: Vec<Complex64>,
    /// `T_hat(Omega_k)`, NaN at invalid bins.
    pub transient: Vec<Complex64>,
    /// Nominal scaling `F (S^H S) C_V`. NaN at invalid bins and when the
    /// window has no residual degrees of freedom.
    pub variance: Vec<f64>,
    /// `F^2 (S^H S) C_V`.
    pub variance_squared_factor: Vec<f64>,
    /// `C_V(k)`.
    pub noise_variance: Vec<f64>,
    pub condition: Vec<f64>,
    pub status: Vec<BinStatus>,
    /// All `F` band values of each local fit, row-major `N x F`.
    pub band_frf: Vec<Complex64>,
}

impl FrfEstimate {
    pub fn valid_count(&self) -> usize {
        self.status.iter().filter(|s| s.is_valid()).count()
    }

    /// Largest relative gap between the band-`i` value of the fit at `k`
    /// and the first-band value of the fit at `k + iM`, over valid pairs.
    pub fn band_consistency(&self) -> f64 {
        let (n, m, f) = (self.grid.n(), self.grid.m(), self.grid.factor());
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 1..f {
                let other = (k + i * m) % n;
                if !(self.status[k].is_valid() && self.status[other].is_valid()) {
                    continue;
                }
                let a = self.band_frf[k * f + i];
                let b = self.frf[other];
                worst = worst.max((a - b).norm() / b.norm().max(f64::MIN_POSITIVE));
            }
        }
        worst
    }
}

fn check_lengths(input: &Spectrum, output: &Spectrum, grid: &FrequencyGrid, cfg: &LpmConfig) -> Result<()> {
    if input.len() != grid.n() {
        return Err(Error::LengthMismatch {
            expected: grid.n(),
            actual: input.len(),
        });
    }
    if output.len() != grid.m() {
        return Err(Error::LengthMismatch {
            expected: grid.m(),
            actual: output.len(),
        });
    }
    if cfg.factor != grid.factor() {
        return Err(Error::InvalidConfig(format!(
            "config factor {} differs from grid factor {}",
            cfg.factor,
            grid.factor()
        )));
    }
    cfg.validate(grid.m())
}

/// Fit bin `k` for several outputs that share one input, factoring the
/// regressor once.
pub fn estimate_bin(
    input: &Spectrum,
    outputs: &[&Spectrum],
    grid: &FrequencyGrid,
    k: usize,
    cfg: &LpmConfig,
) -> Result<Vec<LocalEstimate>> {
    let Some(first) = outputs.first() else {
        return Ok(Vec::new());
    };
    let reg = build_regression(input, first, k, cfg);
    let solver = LocalSolver::factor(&reg.regressor, k, cfg).map_err(|e| match e {
        Error::RankDeficient { bin, ratio, .. } => Error::RankDeficient {
            bin,
            ratio,
            margin: check_roughness(input, grid, cfg.half_width, k, DEFAULT_ROUGHNESS_FLOOR).margin,
        },
        other => other,
    })?;
    let nw = cfg.half_width as i64;
    Ok(outputs
        .iter()
        .map(|y| {
            let window: Vec<Complex64> = (-nw..=nw).map(|r| y.at(k as i64 + r)).collect();
            solver.solve(&window)
        })
        .collect())
}

/// Full-grid multiband LPM: one local fit per fast bin `k = 0..N-1`.
pub fn estimate_frf_lpm(input: &Spectrum, output: &Spectrum, grid: &FrequencyGrid, cfg: &LpmConfig) -> Result<FrfEstimate> {
    check_lengths(input, output, grid, cfg)?;
    let n = grid.n();
    let f = cfg.factor;
    let per_bin: Vec<std::result::Result<(LocalEstimate, Option<VarianceEstimate>), Error>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let local = estimate_bin(input, &[output], grid, k, cfg)?.pop().expect("one output");
            let var = estimate_variance(&local, cfg).ok();
            Ok((local, var))
        })
        .collect();

    let mut est = FrfEstimate {
        grid: *grid,
        config: *cfg,
        frf: vec![NAN_C; n],
        transient: vec![NAN_C; n],
        variance: vec![f64::NAN; n],
        variance_squared_factor: vec![f64::NAN; n],
        noise_variance: vec![f64::NAN; n],
        condition: vec![f64::NAN; n],
        status: vec![BinStatus::Valid; n],
        band_frf: vec![NAN_C; n * f],
    };
    for (k, res) in per_bin.into_iter().enumerate() {
        match res {
            Ok((local, var)) => {
                est.frf[k] = local.frf();
                est.transient[k] = local.transient();
                est.condition[k] = local.condition;
                est.band_frf[k * f..(k + 1) * f].copy_from_slice(&local.band_frf());
                if let Some(v) = var {
                    est.variance[k] = v.nominal;
                    est.variance_squared_factor[k] = v.squared_factor;
                    est.noise_variance[k] = v.noise_variance;
                }
            }
            Err(Error::RankDeficient { ratio, margin, .. }) => {
                est.status[k] = BinStatus::RankDeficient {
                    ratio,
                    roughness_margin: margin,
                };
            }
            Err(e) => return Err(e),
        }
    }
    Ok(est)
}
