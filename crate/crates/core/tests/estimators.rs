mod common;

use common::{full_dataset, median, rel_err};
use frfid_core::estimators::{build_regression, estimate_frf_lpm, estimate_sparse, etfe_baseline, LpmConfig, SparseStatus};
use frfid_core::excitation::{mirror_collisions, random_phase_multisine, sparse_multisine_bins, ExcitationSpec};
use frfid_core::plantsim::{simulate_steady_state, slow_sample, true_frf};
use frfid_core::spectra::{dft, FrequencyGrid, Rate, Spectrum};
use frfid_core::{Complex64, PlantModel, TransferFunction};
use nalgebra::{DMatrix, DVector};

const TS: f64 = 1.0 / 120.0;

#[test]
fn sparse_method_is_exact_in_steady_state() {
    let grid = FrequencyGrid::new(360, 4, TS).unwrap();
    let plant = PlantModel::reference(TS);
    let set = sparse_multisine_bins(&grid).unwrap();
    let ms = random_phase_multisine(&ExcitationSpec::sparse(grid, 9.6e-3, 3).unwrap()).unwrap();
    let y = simulate_steady_state(&plant, &ms.record).unwrap();
    let yl = dft(&slow_sample(&y, 4).unwrap(), Rate::Slow).unwrap();
    let est = estimate_sparse(&ms.spectrum, &yl, &grid, &set, 1e-8).unwrap();

    let predicted = mirror_collisions(&set, &grid);
    assert_eq!(predicted.len(), 2 * 4 - 1);
    let flagged: Vec<usize> = est.warnings().into_iter().map(|(k, _)| k).collect();
    assert_eq!(flagged, predicted);

    let mut worst: f64 = 0.0;
    for b in est.valid() {
        let g = true_frf(&plant, grid.omega(b.bin)).unwrap();
        worst = worst.max(rel_err(b.frf, g));
    }
    assert!(worst <= 1e-6, "max relative error {worst}");
    assert_eq!(est.valid().count(), set.len() - predicted.len());
}

#[test]
fn sparse_and_etfe_reduce_to_ratio_without_aliasing() {
    let grid = FrequencyGrid::new(256, 1, TS).unwrap();
    let plant = PlantModel::reference(TS);
    let data = full_dataset(grid, &plant, 2, true);
    let bins: Vec<usize> = (1..256).collect();
    let sparse = estimate_sparse(&data.input, &data.output, &grid, &bins, 1e-8).unwrap();
    for b in &sparse.bins {
        assert_eq!(b.status, SparseStatus::Valid);
        assert!(rel_err(b.frf, data.truth[b.bin]) < 1e-8);
    }
    let etfe = etfe_baseline(&data.input, &data.output, &grid).unwrap();
    for k in 1..256 {
        assert!(rel_err(etfe.frf[k], data.truth[k]) < 1e-8);
    }
    assert!(!etfe.valid[0]);
}

/// Frequency-domain data whose FRF and summed transient are exact degree-R
/// polynomials in the bin index over every window that does not cross a
/// multiple of M.
#[test]
fn recovers_polynomial_truth() {
    let (m, f, r_deg, nw) = (120usize, 3usize, 2usize, 10usize);
    let n = m * f;
    let grid = FrequencyGrid::new(m, f, TS).unwrap();
    let mut s = 17u64;
    let mut rnd = || {
        s = frfid_core::seed::splitmix64(s);
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let input: Vec<Complex64> = (0..n).map(|_| Complex64::new(rnd(), rnd())).collect();
    let g_coef: Vec<Complex64> = (0..=r_deg).map(|_| Complex64::new(rnd(), rnd())).collect();
    let t_coef: Vec<Complex64> = (0..=r_deg).map(|_| Complex64::new(rnd(), rnd())).collect();
    let poly = |c: &[Complex64], x: f64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, v| acc * x + v);
    let g = |k: usize| poly(&g_coef, k as f64 / n as f64 * 3.0);
    let t = |k: usize| poly(&t_coef, k as f64 / m as f64 * 2.0);
    let output: Vec<Complex64> = (0..m)
        .map(|k| (0..f).map(|i| g(k + i * m) * input[k + i * m]).sum::<Complex64>() / f as f64 + t(k))
        .collect();
    let input = Spectrum::new(input, Rate::Fast);
    let output = Spectrum::new(output, Rate::Slow);

    for normalize in [true, false] {
        let mut cfg = LpmConfig::new(r_deg, nw, f);
        cfg.normalize_basis = normalize;
        let est = estimate_frf_lpm(&input, &output, &grid, &cfg).unwrap();
        let mut checked = 0;
        for k in 0..n {
            let slow = k % m;
            if slow < nw || slow + nw >= m {
                continue;
            }
            assert!((est.frf[k] - g(k)).norm() < 1e-9, "G at {k}");
            assert!((est.transient[k] - t(slow)).norm() < 1e-9, "T at {k}");
            assert!(est.noise_variance[k] < 1e-20);
            checked += 1;
        }
        assert_eq!(checked, f * (m - 2 * nw));
    }
}

#[test]
fn basis_normalization_leaves_estimate_unchanged() {
    let grid = FrequencyGrid::new(600, 4, TS).unwrap();
    let data = full_dataset(grid, &PlantModel::reference(TS), 9, false);
    let a = estimate_frf_lpm(&data.input, &data.output, &grid, &LpmConfig::new(2, 40, 4)).unwrap();
    let mut raw = LpmConfig::new(2, 40, 4);
    raw.normalize_basis = false;
    let b = estimate_frf_lpm(&data.input, &data.output, &grid, &raw).unwrap();
    for k in 0..grid.n() {
        assert!((a.frf[k] - b.frf[k]).norm() <= 1e-9 * a.frf[k].norm(), "bin {k}");
        assert!((a.variance[k] - b.variance[k]).abs() <= 1e-8 * a.variance[k].abs() + 1e-30);
    }
}

/// Classical single-rate LPM, written independently: regressor
/// `[U, xU, .., x^R U, 1, x, .., x^R]` per window row, solved with an SVD.
fn classical_lpm(u: &Spectrum, y: &Spectrum, order: usize, nw: usize) -> Vec<Complex64> {
    let n = u.len() as i64;
    let rows = 2 * nw + 1;
    let cols = 2 * (order + 1);
    (0..n)
        .map(|k| {
            let mut a = DMatrix::<Complex64>::zeros(rows, cols);
            let mut b = DVector::<Complex64>::zeros(rows);
            for (row, r) in (-(nw as i64)..=nw as i64).enumerate() {
                let x = r as f64 / nw as f64;
                let idx = (k + r).rem_euclid(n) as usize;
                for s in 0..=order {
                    let p = x.powi(s as i32);
                    a[(row, s)] = u[idx] * p;
                    a[(row, order + 1 + s)] = Complex64::new(p, 0.0);
                }
                b[row] = y[idx];
            }
            let svd = a.svd(true, true);
            svd.solve(&b, 1e-14).unwrap()[0]
        })
        .collect()
}

#[test]
fn single_rate_case_is_classical_lpm() {
    let grid = FrequencyGrid::new(1024, 1, TS).unwrap();
    let data = full_dataset(grid, &PlantModel::reference(TS), 5, false);
    let est = estimate_frf_lpm(&data.input, &data.output, &grid, &LpmConfig::new(2, 20, 1)).unwrap();
    let oracle = classical_lpm(&data.input, &data.output, 2, 20);
    for (k, (g, o)) in est.frf.iter().zip(&oracle).enumerate() {
        let d = (g - o).norm() / o.norm();
        assert!(d <= 1e-12, "bin {k}: {d:e}");
    }
}

#[test]
fn pure_delay_is_all_pass() {
    let grid = FrequencyGrid::new(900, 4, TS).unwrap();
    let plant = PlantModel::new(TransferFunction::delay(1), TS);
    let data = full_dataset(grid, &plant, 12, false);
    let est = estimate_frf_lpm(&data.input, &data.output, &grid, &LpmConfig::new(2, 150, 4)).unwrap();
    assert_eq!(est.valid_count(), grid.n());
    for k in 0..grid.n() {
        assert!((est.frf[k].norm() - 1.0).abs() < 1e-3, "bin {k}");
    }
}

#[test]
fn properties_on_reference_plant() {
    let grid = FrequencyGrid::new(900, 4, TS).unwrap();
    let data = full_dataset(grid, &PlantModel::reference(TS), 21, false);
    let cfg = LpmConfig::new(2, 100, 4);
    let est = estimate_frf_lpm(&data.input, &data.output, &grid, &cfg).unwrap();
    let n = grid.n();
    for k in 0..n {
        assert!(est.status[k].is_valid());
        assert!(est.variance[k] >= 0.0 && est.variance[k].is_finite());
        // real data: conjugate symmetry of the estimate
        let mirror = est.frf[(n - k) % n];
        assert!((mirror - est.frf[k].conj()).norm() <= 1e-9 * est.frf[k].norm());
    }
    // every band value of a fit is an estimate of G at the aliased bin
    assert!(est.band_consistency() < 0.05, "{}", est.band_consistency());

    // sparse/full consistency at the bins of the sparse set
    let set = sparse_multisine_bins(&grid).unwrap();
    let errs: Vec<f64> = set.iter().map(|&k| rel_err(est.frf[k], data.truth[k])).collect();
    // the wide window biases the fit near the 12 Hz resonance only
    assert!(median(errs.clone()) < 1e-2);
    assert!(errs.iter().all(|&e| e < 0.1));

    // residual check on one local fit
    let reg = build_regression(&data.input, &data.output, 77, &cfg);
    let local = frfid_core::estimators::solve_local(&reg.output, &reg.regressor, &cfg).unwrap();
    let theta = DMatrix::from_row_slice(1, cfg.parameters(), &local.theta);
    let y = DMatrix::from_row_slice(1, cfg.equations(), &reg.output);
    let k = &reg.regressor;
    let rhs = &y * k.adjoint();
    assert!((&theta * (k * k.adjoint()) - &rhs).norm() <= 1e-8 * rhs.norm());
}

#[test]
fn bias_does_not_grow_with_order() {
    let grid = FrequencyGrid::new(900, 4, TS).unwrap();
    let data = full_dataset(grid, &PlantModel::reference(TS), 4, false);
    let mut prev = f64::INFINITY;
    for order in 0..=2 {
        let est = estimate_frf_lpm(&data.input, &data.output, &grid, &LpmConfig::new(order, 60, 4)).unwrap();
        let err = median((0..grid.n()).map(|k| (est.frf[k] - data.truth[k]).norm()).collect());
        assert!(err <= prev, "R = {order}: {err} > {prev}");
        prev = err;
    }
}

#[test]
fn parallel_schedule_does_not_change_bits() {
    let grid = FrequencyGrid::new(300, 4, TS).unwrap();
    let data = full_dataset(grid, &PlantModel::reference(TS), 6, false);
    let cfg = LpmConfig::new(2, 30, 4);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_frf_lpm(&data.input, &data.output, &grid, &cfg).unwrap())
    };
    let one = run(1);
    let many = run(6);
    for k in 0..grid.n() {
        assert_eq!(one.frf[k].re.to_bits(), many.frf[k].re.to_bits());
        assert_eq!(one.frf[k].im.to_bits(), many.frf[k].im.to_bits());
        assert_eq!(one.variance[k].to_bits(), many.variance[k].to_bits());
    }
}

#[test]
fn etfe_is_periodic_and_wrong_above_slow_nyquist() {
    let grid = FrequencyGrid::new(900, 4, TS).unwrap();
    let data = full_dataset(grid, &PlantModel::reference(TS), 33, false);
    let etfe = etfe_baseline(&data.input, &data.output, &grid).unwrap();
    let lpm = estimate_frf_lpm(&data.input, &data.output, &grid, &LpmConfig::new(2, 100, 4)).unwrap();
    let above: Vec<usize> = (0..grid.n()).filter(|&k| grid.above_slow_nyquist(k)).collect();
    let e = median(above.iter().map(|&k| rel_err(etfe.frf[k], data.truth[k])).collect());
    let l = median(above.iter().map(|&k| rel_err(lpm.frf[k], data.truth[k])).collect());
    assert!(e >= 10.0 * l, "etfe {e} vs lpm {l}");
    // flat |U| makes Y_l / U differ from its M-shifted copy only by the phase of U
    for k in 1..grid.m() {
        let a = etfe.frf[k] * data.input[k];
        let b = etfe.frf[k + grid.m()] * data.input[k + grid.m()];
        assert!((a - b).norm() <= 1e-12 * a.norm());
    }
}
