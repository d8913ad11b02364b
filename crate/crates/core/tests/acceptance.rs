//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p galerkin-rk --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use galerkin_rk::analysis::{
    coupling_study, derivative_projection_study, spatial_order_study, temporal_order_study,
    SpatialExpectation, StudyOptions, StudyReport, StudyVerdict,
};
use galerkin_rk::equations::{
    finite_scale_index, make_initial_data, nls_problem, wave_problem, DataKind, PotentialTerm, Problem,
};
use galerkin_rk::integrator::{
    build_resolvent_cache, dense_stage_step, integrate, picard_oracle, reference_solution, rk_step,
    IntegrateOptions, PicardOptions, StageOptions,
};
use galerkin_rk::spectral::SpectralState;
use galerkin_rk::tableau::{gauss_legendre, verify_a_stability, ButcherTableau, StabilityGrid};

type Outcome = (bool, String);

fn cubic() -> Problem {
    nls_problem(vec![PotentialTerm::cubic()]).unwrap()
}

fn data(p: &Problem, kmax: usize, kind: DataKind, seed: u64) -> SpectralState {
    make_initial_data(p, &p.build_grid(kmax), kind, seed).unwrap()
}

fn slopes(r: &StudyReport) -> String {
    r.fits
        .iter()
        .map(|f| match f.fit {
            Some(fit) => format!("{}:{:.3}", f.label, fit.slope),
            None => format!("{}:-", f.label),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Temporal order uniform in m.
fn c1() -> Outcome {
    let p = cubic();
    let u0 = data(&p, 256, DataKind::BandLimitedSmooth { k0: 0.25 }, 1);
    let h: Vec<f64> = (4..=8).map(|i| 0.5f64.powi(i)).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for s in [1, 2] {
        let t = gauss_legendre(s).unwrap();
        let r = temporal_order_study(&p, &t, &u0, &[64, 128, 256], &h, 1.0, &StudyOptions::default()).unwrap();
        ok &= r.verdict == StudyVerdict::Pass;
        detail.push(format!("gauss{s} [{}] {}", slopes(&r), r.verdict.as_str()));
    }
    (ok, detail.join("; "))
}

/// Spatial order from data smoothness.
fn c2() -> (Outcome, Option<f64>) {
    let p = cubic();
    let t = gauss_legendre(2).unwrap();
    let o = StudyOptions::default();
    let m = [2, 4, 8, 16, 32];
    let mut ok = true;
    let mut detail = Vec::new();
    let mut k0_slope = None;
    for (k, r) in [(0u32, 4.6), (1, 6.6)] {
        assert_eq!(finite_scale_index(&p, r), Some(k + 1));
        let u0 = data(&p, 128, DataKind::AlgebraicDecay { r }, 3);
        let rep = spatial_order_study(&p, &t, &u0, &m, 128, 0.01, 0.1, SpatialExpectation::Algebraic { exponent: k + 1 }, &o).unwrap();
        ok &= rep.verdict == StudyVerdict::Pass;
        if k == 0 {
            k0_slope = rep.slope("m");
        }
        detail.push(format!("K={k} r={r} [{}] {}", slopes(&rep), rep.verdict.as_str()));
    }
    let u0 = data(&p, 128, DataKind::BandLimitedSmooth { k0: 1.0 }, 3);
    let rep = spatial_order_study(&p, &t, &u0, &m, 128, 0.01, 0.1, SpatialExpectation::Spectral, &o).unwrap();
    ok &= rep.verdict == StudyVerdict::Pass;
    let ratios: Vec<String> = rep.checks.iter().map(|c| format!("{:.1e}", c.value)).collect();
    detail.push(format!("smooth reductions [{}] {}", ratios.join(" "), rep.verdict.as_str()));
    ((ok, detail.join("; ")), k0_slope)
}

/// No h-m coupling.
fn c3() -> Outcome {
    let p = cubic();
    let u0 = data(&p, 512, DataKind::BandLimitedSmooth { k0: 0.5 }, 5);
    let t = gauss_legendre(1).unwrap();
    let control = ButcherTableau::explicit_euler();
    let r = coupling_study(
        &p,
        &t,
        &u0,
        &[0.04, 0.02, 0.01],
        &[16, 32, 64, 128, 256, 512],
        0.4,
        Some(&control),
        &StudyOptions::default(),
    )
    .unwrap();
    let extreme = 0.01 * 512f64.powi(2);
    let checks: Vec<String> = r
        .checks
        .iter()
        .map(|c| format!("{}={:.3}", c.name, c.value))
        .collect();
    let ctl = r.cells.last().map(|c| c.status.label()).unwrap_or_default();
    (
        r.verdict == StudyVerdict::Pass && extreme > 2500.0,
        format!("h*m^2 up to {extreme:.0}; {}; control {ctl}", checks.join(" ")),
    )
}

/// A-stability certificates.
fn c4() -> Outcome {
    let grid = StabilityGrid::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for s in 1..=3 {
        let r = verify_a_stability(&gauss_legendre(s).unwrap(), &grid);
        let excess = r.max_modulus_on_imaginary_axis - 1.0;
        let pass = excess <= 1e-12 && r.min_alpha_eigenvalue_real > 0.0 && r.rk1.passed() && r.rk2.passed();
        ok &= pass;
        detail.push(format!("gauss{s} |S|-1={excess:.1e} min Re eig={:.3}", r.min_alpha_eigenvalue_real));
    }
    let euler = verify_a_stability(&ButcherTableau::explicit_euler(), &grid);
    ok &= !euler.rk1.passed();
    detail.push(format!("euler max|S(iy)|={:.1e} (RK1 {})", euler.max_modulus_on_imaginary_axis, if euler.rk1.passed() { "pass" } else { "fail" }));
    (ok, detail.join("; "))
}

/// Resolvent bounds uniform in the spectrum.
fn c5() -> Outcome {
    let p = cubic();
    let mut ok = true;
    let mut detail = Vec::new();
    for s in 1..=3 {
        let t = gauss_legendre(s).unwrap();
        let a = build_resolvent_cache(&t, &p.build_grid(512), 0.01).unwrap();
        let b = build_resolvent_cache(&t, &p.build_grid(1024), 0.01).unwrap();
        let (la, lb) = (a.lambda_obs(), b.lambda_obs());
        let variation = (lb - la).abs() / la;
        let shifted = a.shifted_resolvent_obs();
        let pass = la.is_finite() && variation < 0.05 && shifted <= 1.0 + la + 1e-10;
        ok &= pass;
        detail.push(format!("gauss{s} Lambda={la:.4} var={variation:.1e} shifted={shifted:.4}"));
    }
    (ok, detail.join("; "))
}

/// Conservation.
fn c6() -> Outcome {
    let free = nls_problem(vec![]).unwrap();
    let u = data(&free, 32, DataKind::BandLimitedSmooth { k0: 3.0 }, 6);
    let mut worst: f64 = 0.0;
    for s in 1..=3 {
        let run = integrate(&free, &gauss_legendre(s).unwrap(), &u, f64::INFINITY, 0.01, 1000, &IntegrateOptions::default()).unwrap();
        for level in 0..=4 {
            let (a, b) = (u.scale_norm(level), run.state.scale_norm(level));
            worst = worst.max((a - b).abs() / a);
        }
    }
    let p = cubic();
    let u = data(&p, 32, DataKind::BandLimitedSmooth { k0: 2.0 }, 7);
    let opts = IntegrateOptions {
        stage: StageOptions::default().with_tol(1e-12),
        ..IntegrateOptions::default()
    };
    let run = integrate(&p, &gauss_legendre(1).unwrap(), &u, f64::INFINITY, 0.01, 100, &opts).unwrap();
    let drift = run
        .records
        .iter()
        .map(|r| (r.invariant - run.initial_invariant).abs())
        .fold(0.0, f64::max);
    (
        worst <= 1e-12 && drift <= 1e-9,
        format!("B=0 max relative Y_l drift {worst:.1e}; midpoint mass drift {drift:.1e}"),
    )
}

/// Oracle equivalence.
fn c7() -> Outcome {
    let t_final = 0.01;
    let n = 64;
    let h = t_final / n as f64;
    let g4 = gauss_legendre(4).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [cubic(), wave_problem(vec![0.0, 1.0, 0.0, 1.0]).unwrap()] {
        let u0 = data(&p, 8, DataKind::BandLimitedSmooth { k0: 2.0 }, 8);
        let m = u0.grid().threshold_for_wavenumber(8);
        let mut dense = u0.project(m);
        for _ in 0..n {
            dense = dense_stage_step(&p, &g4, &dense, m, h).unwrap();
        }
        let stage = StageOptions::default().with_tol(1e-14);
        let cache = build_resolvent_cache(&g4, u0.grid(), h).unwrap();
        let mut fixed = u0.project(m);
        for _ in 0..n {
            fixed = rk_step(&p, &cache, &fixed, m, &stage).unwrap().0;
        }
        let picard = picard_oracle(&p, &u0, t_final, m, &PicardOptions::default()).unwrap().state;
        let reference = reference_solution(&p, &u0, t_final, m).unwrap();
        let all = [("dense", &dense), ("rk_step", &fixed), ("picard", &picard), ("reference", &reference)];
        let mut worst: f64 = 0.0;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                worst = worst.max((all[i].1 - all[j].1).norm());
            }
        }
        ok &= worst <= 1e-8;
        detail.push(format!("{} max pairwise {worst:.1e}", p.name()));
    }
    (ok, detail.join("; "))
}

/// Derivative projection error.
fn c8(spatial_k0_slope: Option<f64>) -> Outcome {
    let p = cubic();
    let u0 = data(&p, 128, DataKind::AlgebraicDecay { r: 4.6 }, 3);
    // Y_1 = H^3 finite, Y_2 = H^5 not
    let v = make_initial_data(&p, u0.grid(), DataKind::AlgebraicDecay { r: 4.0 }, 9).unwrap();
    assert_eq!(finite_scale_index(&p, 4.0), Some(1));
    let t = gauss_legendre(2).unwrap();
    let r = derivative_projection_study(&p, &t, &u0, &v, &[2, 4, 8, 16, 32], 128, 0.01, 1, Some(0.1), &StudyOptions::default()).unwrap();
    let value = r.slope("value");
    let consistent = match (value, spatial_k0_slope) {
        (Some(a), Some(b)) => (a - b).abs() <= 0.3,
        _ => false,
    };
    (
        r.verdict == StudyVerdict::Pass && consistent,
        format!(
            "[{}] {}; zeroth order vs spatial K=0 slope {:?}",
            slopes(&r),
            r.verdict.as_str(),
            spatial_k0_slope.map(|s| (s * 1000.0).round() / 1000.0)
        ),
    )
}

/// Fixed-point contraction scaling.
fn c9() -> Outcome {
    let p = cubic();
    // the smooth state of C1
    let u = data(&p, 64, DataKind::BandLimitedSmooth { k0: 0.25 }, 1);
    let t = gauss_legendre(1).unwrap();
    let opts = StageOptions::default().with_tol(1e-14);
    let ratios: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let cache = build_resolvent_cache(&t, u.grid(), h).unwrap();
            rk_step(&p, &cache, &u, f64::INFINITY, &opts)
                .unwrap()
                .1
                .observed_ratio()
                .unwrap()
        })
        .collect();
    let halvings: Vec<f64> = ratios.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = halvings.iter().all(|&q| (2.0 / 2.5..=2.0 * 2.5).contains(&q));
    (
        ok,
        format!(
            "ratios {:.3e} {:.3e} {:.3e}; successive quotients {:.2} {:.2}",
            ratios[0], ratios[1], ratios[2], halvings[0], halvings[1]
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    let mut k0_slope = None;
    report("C1 temporal order uniform in m", &mut c1);
    report("C2 spatial order from data smoothness", &mut || {
        let (out, slope) = c2();
        k0_slope = slope;
        out
    });
    report("C3 no h-m coupling", &mut c3);
    report("C4 A-stability certificates", &mut c4);
    report("C5 resolvent bounds", &mut c5);
    report("C6 conservation", &mut c6);
    report("C7 oracle equivalence", &mut c7);
    report("C8 derivative projection error", &mut || c8(k0_slope));
    report("C9 contraction scaling", &mut c9);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
