use super::*;
use crate::equations::{make_initial_data, nls_problem, DataKind, PotentialTerm};
use crate::spectral::SpectralState;

fn cubic() -> Problem {
    nls_problem(vec![PotentialTerm::cubic()]).unwrap()
}

fn data(p: &Problem, kmax: usize, kind: DataKind, seed: u64) -> SpectralState {
    let g = p.build_grid(kmax);
    make_initial_data(p, &g, kind, seed).unwrap()
}

#[test]
fn temporal_slopes_match_gauss_orders() {
    let p = cubic();
    let u0 = data(&p, 16, DataKind::BandLimitedSmooth { k0: 0.5 }, 1);
    // h lambda_1 <= 1 on the occupied modes
    let h: Vec<f64> = (2..6).map(|i| 0.1 * 0.5f64.powi(i)).collect();
    for s in [1, 2] {
        let t = gauss_legendre(s).unwrap();
        let r = temporal_order_study(&p, &t, &u0, &[4, 8, 16], &h, 0.1, &StudyOptions::default()).unwrap();
        assert_eq!(r.verdict, StudyVerdict::Pass, "{}", r.summary());
        for f in &r.fits {
            let slope = f.fit.unwrap().slope;
            assert!((slope - 2.0 * s as f64).abs() < 0.3, "s={s}: {slope}");
        }
        assert_eq!(r.cells.len(), 12);
    }
}

#[test]
fn free_problem_is_measured_against_the_semigroup() {
    let p = nls_problem(vec![]).unwrap();
    let u0 = data(&p, 8, DataKind::BandLimitedSmooth { k0: 0.5 }, 2);
    let t = gauss_legendre(1).unwrap();
    let h: Vec<f64> = (2..6).map(|i| 0.1 * 0.5f64.powi(i)).collect();
    let r = temporal_order_study(&p, &t, &u0, &[2, 4, 8], &h, 0.1, &StudyOptions::default()).unwrap();
    assert!(r.metadata.iter().any(|(k, v)| k == "reference" && v == "exact-semigroup"));
    assert_eq!(r.verdict, StudyVerdict::Pass, "{}", r.summary());

    let zero = SpectralState::zeros(u0.grid().clone());
    let r = temporal_order_study(&p, &t, &zero, &[2, 4, 8], &h, 0.1, &StudyOptions::default()).unwrap();
    assert_eq!(r.verdict, StudyVerdict::Floor);
}

#[test]
fn temporal_preconditions() {
    let p = cubic();
    let u0 = data(&p, 8, DataKind::BandLimitedSmooth { k0: 1.0 }, 1);
    let t = gauss_legendre(1).unwrap();
    let o = StudyOptions::default();
    assert!(temporal_order_study(&p, &t, &u0, &[2, 4, 8], &[0.1, 0.03], 0.3, &o).is_err());
    assert!(temporal_order_study(&p, &t, &u0, &[4, 2], &[0.1, 0.05], 0.3, &o).is_err());
    assert!(temporal_order_study(&p, &t, &u0, &[4, 16], &[0.1, 0.05], 0.3, &o).is_err());
}

#[test]
fn algebraic_data_gives_the_predicted_spatial_slope() {
    // r = 4.6: Y_1 = H^3 finite, Y_2 = H^5 not
    let p = cubic();
    assert_eq!(crate::equations::finite_scale_index(&p, 4.6), Some(1));
    let u0 = data(&p, 64, DataKind::AlgebraicDecay { r: 4.6 }, 3);
    let t = gauss_legendre(2).unwrap();
    let r = spatial_order_study(
        &p,
        &t,
        &u0,
        &[2, 4, 8, 16],
        64,
        0.001,
        0.01,
        SpatialExpectation::Algebraic { exponent: 1 },
        &StudyOptions::default(),
    )
    .unwrap();
    assert_eq!(r.verdict, StudyVerdict::Pass, "{}", r.summary());
    assert!(r.slope("m").unwrap() <= -1.0);
}

#[test]
fn single_mode_data_sits_on_the_floor() {
    let p = cubic();
    let u0 = data(&p, 16, DataKind::SingleMode { k: 1 }, 0);
    let t = gauss_legendre(1).unwrap();
    let r = spatial_order_study(
        &p,
        &t,
        &u0,
        &[2, 4, 8],
        16,
        0.01,
        0.05,
        SpatialExpectation::Algebraic { exponent: 1 },
        &StudyOptions::default(),
    )
    .unwrap();
    // a plane wave is an exact solution; every cutoff above the mode is exact
    assert_eq!(r.verdict, StudyVerdict::Floor, "{}", r.summary());
}

#[test]
fn smooth_data_reduces_spectrally_and_coarse_steps_are_inconclusive() {
    let p = cubic();
    let u0 = data(&p, 32, DataKind::BandLimitedSmooth { k0: 1.0 }, 4);
    let t = gauss_legendre(2).unwrap();
    let o = StudyOptions::default();
    let r = spatial_order_study(&p, &t, &u0, &[2, 4, 8], 32, 0.0005, 0.005, SpatialExpectation::Spectral, &o).unwrap();
    assert_eq!(r.verdict, StudyVerdict::Pass, "{}", r.summary());
    assert!(!r.checks.is_empty());

    // past m = 2 the spatial error drowns in the midpoint step error
    let alg = SpatialExpectation::Algebraic { exponent: 1 };
    let r = spatial_order_study(&p, &gauss_legendre(1).unwrap(), &u0, &[2, 4, 8], 32, 0.1, 0.1, alg, &o).unwrap();
    assert_eq!(r.verdict, StudyVerdict::Inconclusive, "{}", r.summary());
    assert!(r.notes.iter().any(|n| n.contains("shrink h_small")));
}

#[test]
fn coupling_grid_is_stable_and_the_control_blows_up() {
    let p = cubic();
    let u0 = data(&p, 64, DataKind::BandLimitedSmooth { k0: 0.5 }, 5);
    let t = gauss_legendre(1).unwrap();
    let control = ButcherTableau::explicit_euler();
    let r = coupling_study(&p, &t, &u0, &[0.04, 0.02, 0.01], &[8, 16, 32, 64], 0.4, Some(&control), &StudyOptions::default()).unwrap();
    assert_eq!(r.verdict, StudyVerdict::Pass, "{}", r.summary());
    let ctl = r.cells.last().unwrap();
    assert!(matches!(ctl.status, CellStatus::ExpectedFailure(_)));
    assert_eq!((ctl.h, ctl.m), (0.04, 64));
    assert_eq!(r.failed_cells(), 0);
}

#[test]
fn a_stable_control_fails_the_study() {
    let p = cubic();
    let u0 = data(&p, 8, DataKind::BandLimitedSmooth { k0: 0.5 }, 5);
    let t = gauss_legendre(1).unwrap();
    let r = coupling_study(&p, &t, &u0, &[0.02, 0.01], &[2, 4, 8], 0.04, Some(&t), &StudyOptions::default()).unwrap();
    assert_eq!(r.verdict, StudyVerdict::Fail);
}

#[test]
fn derivative_error_of_a_low_mode_direction_vanishes() {
    let p = nls_problem(vec![]).unwrap();
    let u0 = data(&p, 16, DataKind::BandLimitedSmooth { k0: 1.0 }, 6);
    let v = make_initial_data(&p, u0.grid(), DataKind::SingleMode { k: 1 }, 0).unwrap();
    let t = gauss_legendre(2).unwrap();
    let r = derivative_projection_study(&p, &t, &u0, &v, &[2, 4, 8], 16, 0.01, 1, None, &StudyOptions::default()).unwrap();
    for c in r.cells.iter().filter(|c| c.series == "derivative_step") {
        assert!(c.error.unwrap() < 1e-9, "{c:?}");
    }
    assert_eq!(r.verdict, StudyVerdict::Floor);
}

#[test]
fn derivative_projection_error_decays() {
    let p = cubic();
    let u0 = data(&p, 64, DataKind::BandLimitedSmooth { k0: 1.0 }, 7);
    // Y_1 = H^3 finite, Y_2 not
    let v = make_initial_data(&p, u0.grid(), DataKind::AlgebraicDecay { r: 4.0 }, 8).unwrap();
    let t = gauss_legendre(1).unwrap();
    let r = derivative_projection_study(&p, &t, &u0, &v, &[4, 8, 16, 32], 64, 0.01, 1, Some(0.02), &StudyOptions::default()).unwrap();
    assert_eq!(r.verdict, StudyVerdict::Pass, "{}", r.summary());
    assert!(r.slope("step").unwrap() <= -0.5);
    assert!(r.slope("flow").unwrap() <= -0.5);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let p = cubic();
    let u0 = data(&p, 16, DataKind::BandLimitedSmooth { k0: 1.0 }, 9);
    let t = gauss_legendre(1).unwrap();
    let h = [0.1, 0.05, 0.025];
    let one = StudyOptions {
        jobs: Some(1),
        ..StudyOptions::default()
    };
    let four = StudyOptions {
        jobs: Some(4),
        ..StudyOptions::default()
    };
    let a = temporal_order_study(&p, &t, &u0, &[4, 8, 16], &h, 0.2, &one).unwrap();
    let b = temporal_order_study(&p, &t, &u0, &[4, 8, 16], &h, 0.2, &four).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.summary(), b.summary());
}
