//! Discrete-time LTI plant and noise simulation.
//!
//! Models are rational transfer functions in `z^-1`, simulated with a
//! transposed direct-form II difference equation. The plant runs at the fast
//! rate; the noise filter runs at the slow rate and is added after the
//! downsampler.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::spectra::downsample;

/// `B(z^-1) / A(z^-1)` with `A` normalized so that `a[0] == 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidModel("empty coefficient list".into()));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        let a0 = den[0];
        if a0 == 0.0 {
            return Err(Error::InvalidModel("leading denominator coefficient is zero".into()));
        }
        Ok(Self {
            num: num.iter().map(|b| b / a0).collect(),
            den: den.iter().map(|a| a / a0).collect(),
        })
    }

    pub fn unity() -> Self {
        Self {
            num: vec![1.0],
            den: vec![1.0],
        }
    }

    /// Pure delay of `samples` samples.
    pub fn delay(samples: usize) -> Self {
        let mut num = vec![0.0; samples + 1];
        num[samples] = 1.0;
        Self { num, den: vec![1.0] }
    }

    /// All-pole resonant model with unit DC gain and one sample of delay.
    ///
    /// Each `(f_hz, zeta)` adds the complex pole pair obtained by mapping
    /// `s = -zeta w +/- j w sqrt(1 - zeta^2)` through `z = exp(s ts)`.
    pub fn from_resonances(resonances: &[(f64, f64)], ts: f64) -> Result<Self> {
        let mut den = vec![1.0];
        for &(f_hz, zeta) in resonances {
            if !(f_hz > 0.0 && (0.0..1.0).contains(&zeta)) {
                return Err(Error::InvalidModel(format!(
                    "resonance ({f_hz} Hz, zeta {zeta}) out of range"
                )));
            }
            let w = 2.0 * PI * f_hz;
            let s = Complex64::new(-zeta * w, w * (1.0 - zeta * zeta).sqrt());
            let p = (s * ts).exp();
            // (1 - p z^-1)(1 - conj(p) z^-1)
            den = poly_mul(&den, &[1.0, -2.0 * p.re, p.norm_sqr()]);
        }
        let gain: f64 = den.iter().sum();
        Self::new(vec![0.0, gain], den)
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn order(&self) -> usize {
        self.num.len().max(self.den.len()) - 1
    }

    /// Evaluate at `z = exp(j theta)` where `theta = Omega Ts` is the
    /// normalized angular frequency.
    pub fn response_at_angle(&self, theta: f64) -> Result<Complex64> {
        let zinv = Complex64::from_polar(1.0, -theta);
        let num = horner(&self.num, zinv);
        let den = horner(&self.den, zinv);
        let scale = self.den.iter().map(|a| a.abs()).sum::<f64>();
        if den.norm() <= 1e-12 * scale {
            return Err(Error::PoleOnUnitCircle {
                omega: theta,
                magnitude: den.norm(),
            });
        }
        Ok(num / den)
    }

    pub fn dc_gain(&self) -> Result<f64> {
        self.response_at_angle(0.0).map(|g| g.re)
    }

    /// Roots of the denominator in `z`.
    pub fn poles(&self) -> Vec<Complex64> {
        let n = self.den.len() - 1;
        if n == 0 {
            return Vec::new();
        }
        let companion = DMatrix::from_fn(n, n, |i, j| {
            if i == 0 {
                -self.den[j + 1]
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        companion.complex_eigenvalues().iter().copied().collect()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }

    /// Filter `input` starting from `state` (transposed direct-form II
    /// registers, length [`order`](Self::order)); `None` means zero state.
    pub fn filter(&self, input: &[f64], state: Option<&[f64]>) -> Vec<f64> {
        let order = self.order();
        let coef = |c: &[f64], i: usize| c.get(i).copied().unwrap_or(0.0);
        let mut z = vec![0.0; order];
        if let Some(s) = state {
            for (dst, src) in z.iter_mut().zip(s) {
                *dst = *src;
            }
        }
        let mut out = Vec::with_capacity(input.len());
        for &u in input {
            let y = coef(&self.num, 0) * u + z.first().copied().unwrap_or(0.0);
            for i in 0..order {
                let next = if i + 1 < order { z[i + 1] } else { 0.0 };
                z[i] = next + coef(&self.num, i + 1) * u - coef(&self.den, i + 1) * y;
            }
            out.push(y);
        }
        out
    }
}

fn horner(coef: &[f64], x: Complex64) -> Complex64 {
    coef.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Fast-rate plant `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    pub tf: TransferFunction,
    /// Fast sampling time in seconds.
    pub ts: f64,
}

impl PlantModel {
    pub fn new(tf: TransferFunction, ts: f64) -> Self {
        Self { tf, ts }
    }

    /// Two-resonance reference plant: 12 Hz (zeta 0.25) and 45 Hz (zeta
    /// 0.08), the second one above the 15 Hz slow Nyquist frequency of the
    /// default 120 Hz / F = 4 setup.
    pub fn reference(ts: f64) -> Self {
        let tf = TransferFunction::from_resonances(&REFERENCE_RESONANCES, ts)
            .expect("reference resonances are valid");
        Self { tf, ts }
    }
}

pub const REFERENCE_RESONANCES: [(f64, f64); 2] = [(12.0, 0.25), (45.0, 0.08)];

/// Slow-rate noise filter `H` driven by white Gaussian noise of standard
/// deviation `sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub tf: TransferFunction,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn white(sigma: f64, seed: u64) -> Self {
        Self {
            tf: TransferFunction::unity(),
            sigma,
            seed,
        }
    }
}

/// Simulate `model` on `input`, starting from `initial_state` (zero when
/// `None`).
pub fn simulate_lti(model: &PlantModel, input: &[f64], initial_state: Option<&[f64]>) -> Vec<f64> {
    model.tf.filter(input, initial_state)
}

/// Number of leading periods to discard so that the transient has decayed
/// below `1e-12` of its initial size.
pub fn steady_state_periods(tf: &TransferFunction, period: usize) -> Result<usize> {
    let rho = tf.max_pole_radius();
    if rho >= 1.0 {
        return Err(Error::InvalidModel(format!(
            "steady state requires a stable model, largest pole radius {rho}"
        )));
    }
    let decay = if rho > 0.0 {
        (1e-12f64.ln() / rho.ln() / period as f64).ceil() as usize
    } else {
        0
    };
    let fir = tf.order().div_ceil(period.max(1));
    Ok(decay.max(fir))
}

/// Periodic steady-state response to one period of a periodic input:
/// simulates `P + 1` periods from zero state and returns the last one.
pub fn simulate_steady_state(model: &PlantModel, period: &[f64]) -> Result<Vec<f64>> {
    if period.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = steady_state_periods(&model.tf, period.len())?;
    let long: Vec<f64> = period.iter().copied().cycle().take(period.len() * (p + 1)).collect();
    let y = simulate_lti(model, &long, None);
    Ok(y[period.len() * p..].to_vec())
}

/// Exact frequency response at `omega` rad/s.
pub fn true_frf(model: &PlantModel, omega: f64) -> Result<Complex64> {
    model
        .tf
        .response_at_angle(omega * model.ts)
        .map_err(|e| match e {
            Error::PoleOnUnitCircle { magnitude, .. } => Error::PoleOnUnitCircle { omega, magnitude },
            other => other,
        })
}

/// Slow sampling of a fast record; same contract as [`downsample`].
pub fn slow_sample(fast: &[f64], factor: usize) -> Result<Vec<f64>> {
    downsample(fast, factor)
}

/// A slow output record with additive noise, plus the noise realization.
#[derive(Clone, Debug)]
pub struct NoisyRecord {
    pub output: Vec<f64>,
    pub noise: Vec<f64>,
}

/// Add `H e` to a slow record, `e` i.i.d. `N(0, sigma^2)` drawn from the
/// noise model's seed. `H` starts from zero state.
pub fn add_noise(slow: &[f64], noise: &NoiseModel) -> NoisyRecord {
    if noise.sigma == 0.0 {
        return NoisyRecord {
            output: slow.to_vec(),
            noise: vec![0.0; slow.len()],
        };
    }
    let mut rng = rng_from_seed(noise.seed);
    let e: Vec<f64> = (0..slow.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise.sigma * z
        })
        .collect();
    let v = noise.tf.filter(&e, None);
    NoisyRecord {
        output: slow.iter().zip(&v).map(|(y, v)| y + v).collect(),
        noise: v,
    }
}
