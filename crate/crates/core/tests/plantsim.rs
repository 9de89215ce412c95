use frfid_core::excitation::{random_phase_multisine, ExcitationSpec};
use frfid_core::plantsim::{add_noise, simulate_lti, simulate_steady_state, slow_sample, true_frf};
use frfid_core::spectra::{alias_spectrum, dft, FrequencyGrid, Rate};
use frfid_core::{NoiseModel, PlantModel, TransferFunction};

fn second_order(ts: f64) -> PlantModel {
    PlantModel::new(TransferFunction::from_resonances(&[(9.0, 0.05)], ts).unwrap(), ts)
}

#[test]
fn steady_state_ratio_matches_frf() {
    let grid = FrequencyGrid::new(512, 1, 1.0 / 120.0).unwrap();
    let plant = second_order(grid.ts_fast());
    let ms = random_phase_multisine(&ExcitationSpec::full_spectrum(grid, 1.0, 4).unwrap()).unwrap();
    let y = simulate_steady_state(&plant, &ms.record).unwrap();
    let ys = dft(&y, Rate::Fast).unwrap();
    for k in 1..=256 {
        let g = true_frf(&plant, grid.omega(k)).unwrap();
        let ratio = ys[k] / ms.spectrum[k];
        assert!((ratio - g).norm() <= 1e-8 * g.norm(), "bin {k}");
    }
}

#[test]
fn simulated_pipeline_obeys_aliasing_law() {
    let grid = FrequencyGrid::new(300, 4, 1.0 / 120.0).unwrap();
    let plant = PlantModel::reference(grid.ts_fast());
    let ms = random_phase_multisine(&ExcitationSpec::full_spectrum(grid, 0.01, 8).unwrap()).unwrap();
    let y = simulate_lti(&plant, &ms.record, None);
    let lhs = dft(&slow_sample(&y, 4).unwrap(), Rate::Slow).unwrap();
    let rhs = alias_spectrum(&dft(&y, Rate::Fast).unwrap(), 4).unwrap();
    let scale = rhs.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    for k in 0..grid.m() {
        assert!((lhs[k] - rhs[k]).norm() <= 1e-10 * scale);
    }
}

#[test]
fn white_noise_statistics() {
    let m = 1_000_000;
    let out = add_noise(&vec![0.0; m], &NoiseModel::white(1.0, 2024));
    let mean = out.noise.iter().sum::<f64>() / m as f64;
    let var = out.noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    assert!(mean.abs() < 4.0 / (m as f64).sqrt(), "mean {mean}");
    assert!((var.sqrt() - 1.0).abs() < 0.01, "std {}", var.sqrt());
}

#[test]
fn colored_noise_goes_through_filter() {
    let h = TransferFunction::new(vec![1.0], vec![1.0, -0.5]).unwrap();
    let noise = NoiseModel { tf: h.clone(), sigma: 0.3, seed: 5 };
    let white = add_noise(&vec![0.0; 64], &NoiseModel::white(0.3, 5));
    let colored = add_noise(&vec![1.0; 64], &noise);
    let expect = h.filter(&white.noise, None);
    for (v, e) in colored.noise.iter().zip(&expect) {
        assert_eq!(v, e);
    }
    assert_eq!(colored.output[3], 1.0 + expect[3]);
}
