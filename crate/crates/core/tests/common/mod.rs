#![allow(dead_code)]

use frfid_core::excitation::{random_phase_multisine, ExcitationSpec};
use frfid_core::plantsim::{simulate_lti, simulate_steady_state, slow_sample, true_frf};
use frfid_core::spectra::{dft, FrequencyGrid, Rate, Spectrum};
use frfid_core::{Complex64, PlantModel};

pub struct Dataset {
    pub grid: FrequencyGrid,
    pub input: Spectrum,
    pub output: Spectrum,
    pub truth: Vec<Complex64>,
}

/// Full random-phase multisine through `plant`, noise-free. Zero initial
/// state unless `steady` is set.
pub fn full_dataset(grid: FrequencyGrid, plant: &PlantModel, seed: u64, steady: bool) -> Dataset {
    let ms = random_phase_multisine(&ExcitationSpec::full_spectrum(grid, 8.3e-3, seed).unwrap()).unwrap();
    let y = if steady {
        simulate_steady_state(plant, &ms.record).unwrap()
    } else {
        simulate_lti(plant, &ms.record, None)
    };
    let yl = slow_sample(&y, grid.factor()).unwrap();
    Dataset {
        grid,
        input: ms.spectrum,
        output: dft(&yl, Rate::Slow).unwrap(),
        truth: (0..grid.n()).map(|k| true_frf(plant, grid.omega(k)).unwrap()).collect(),
    }
}

pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
