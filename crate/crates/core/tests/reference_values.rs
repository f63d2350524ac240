//! Reference error values of the model problems at h ≈ 1e-3.

use subdiff_core::experiments::{
    run_example1, run_example2, run_example3, run_example4, run_fast_accuracy, Example, ExperimentSpec, RateTable,
};
use subdiff_core::stepping::Scheme;
use subdiff_core::{FastAlgorithm, FastConfig};

fn table(example: Example, alpha: f64, thetas: &[f64], scheme: Scheme) -> RateTable {
    let mut spec = ExperimentSpec::new(example);
    spec.alphas = vec![alpha];
    spec.thetas = thetas.to_vec();
    spec.scheme = scheme;
    match example {
        Example::Ex1 => run_example1(&spec),
        Example::Ex2i | Example::Ex2ii => run_example2(&spec),
        Example::Ex3 => run_example3(&spec),
        _ => run_example4(&spec),
    }
    .unwrap()
}

fn close(value: f64, reference: f64, factor: f64) -> bool {
    value / reference <= factor && reference / value <= factor
}

#[test]
fn uncorrected_crank_nicolson_smooth() {
    let t = table(Example::Ex1, 0.9, &[0.5], Scheme::NoCorrection);
    let row = &t.rows[0];
    assert!(close(row.errors[0], 9.24e-5, 1.02), "{:e}", row.errors[0]);
    assert!(row.rates[..3].iter().all(|r| (r - 2.0).abs() < 0.05));
}

#[test]
fn corrected_small_alpha() {
    let t = table(Example::Ex1, 0.1, &[0.3], Scheme::Corrected);
    let row = &t.rows[0];
    assert!(close(row.errors[4], 2.67e-6, 1.05), "{:e}", row.errors[4]);
    assert!((row.rates[3] - 1.98).abs() < 0.05);
}

#[test]
fn smooth_initial_data_table() {
    let t = table(Example::Ex2i, 0.5, &[0.3], Scheme::Corrected);
    let row = &t.rows[0];
    assert!(close(row.errors[0], 1.60e-4, 1.02));
    assert!(close(row.errors[4], 6.15e-7, 1.1), "{:e}", row.errors[4]);
}

#[test]
fn nonsmooth_crank_nicolson_row() {
    let t = table(Example::Ex2ii, 0.5, &[0.5], Scheme::Corrected);
    let row = &t.rows[0];
    let reference = [2.04e-1, 1.56e-1, 1.17e-1, 8.51e-2, 5.91e-2];
    for (e, p) in row.errors.iter().zip(reference) {
        assert!(close(*e, p, 1.05), "{e:e} vs {p:e}");
    }
}

#[test]
fn small_theta_robustness() {
    let t = table(Example::Ex3, 0.5, &[0.001], Scheme::Corrected);
    assert!(close(t.rows[0].errors[4], 1.26e-6, 1.05));
    let t = table(Example::Ex3, 0.1, &[0.0], Scheme::Corrected);
    assert!(t.rows[0].rates.iter().all(|r| (r - 1.12).abs() < 0.03), "{:?}", t.rows[0].rates);
}

#[test]
fn crank_nicolson_bdf2_rows() {
    let t = table(Example::Ex4, 0.5, &[0.2, 0.5], Scheme::CnFbdf2);
    assert!(close(t.row(0.5, 0.2).unwrap().errors[0], 2.17e-4, 1.02));
    let cn = t.row(0.5, 0.5).unwrap();
    let reference = [1.02e-1, 7.38e-2, 5.31e-2, 3.80e-2, 2.71e-2];
    for (e, p) in cn.errors.iter().zip(reference) {
        assert!(close(*e, p, 1.01), "{e:e} vs {p:e}");
    }
    let t = table(Example::Ex4, 0.9, &[0.4], Scheme::CnFbdf2);
    assert!(close(t.rows[0].errors[4], 3.75e-6, 1.02));
    let t = table(Example::Ex4, 0.1, &[0.5], Scheme::CnFbdf2);
    assert!(t.rows[0].rates.iter().all(|r| (0.06..=0.07).contains(r)), "{:?}", t.rows[0].rates);
}

#[test]
fn fast_weights_extreme_orders() {
    let cfg = FastConfig::default();
    let rows = run_fast_accuracy(0.01, 0.005, FastAlgorithm::I, cfg, 248).unwrap();
    assert!(rows.iter().filter(|r| r.n >= 50).all(|r| r.abs_error <= 1e-10));
    // θ below α/2 still works for α close to one
    let rows = run_fast_accuracy(0.99, 0.4, FastAlgorithm::II, cfg, 248).unwrap();
    assert!(rows.iter().filter(|r| r.n >= 50).all(|r| r.abs_error <= 1e-10));
}
