use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use galerkin_rk::analysis::{
    coupling_study, derivative_projection_study, spatial_order_study, temporal_order_study, StudyReport, StudyVerdict,
};
use galerkin_rk::integrator::{
    build_resolvent_cache, dense_stage_step, integrate, picard_oracle, reference_solution_with, rk_step,
    IntegrateOptions, PicardOptions,
};
use galerkin_rk::spectral::{Snapshot, SpectralState};
use galerkin_rk::tableau::{
    gauss_legendre, parse_tableau, verify_a_stability, verify_order_conditions, write_tableau, ButcherTableau,
    StabilityGrid,
};
use galerkin_rk::Error;

use crate::config::{Loaded, StudyName};
use crate::output::{remove_stale, write_atomic};

/// Largest pairwise `Y_0` difference accepted by `oracle-check`.
pub const ORACLE_TOL: f64 = 1e-8;
/// `run --verify-linear` tolerance against the exact semigroup.
pub const LINEAR_TOL: f64 = 1e-11;
/// The dense Newton oracle is only run on small grids.
pub const DENSE_MAX_M: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 3,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or files; exit 2.
    Usage(anyhow::Error),
    /// The computation itself failed; exit 1.
    Failure(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(e) | CliError::Failure(e) => e,
        }
    }
}

pub type CmdResult = Result<Status, CliError>;

trait Usage<T> {
    fn usage(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Usage<T> for Result<T, E> {
    fn usage(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Usage(e.into()))
    }
}

/// Precondition violations are the caller's fault; everything else is a
/// failed computation.
fn classify(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(_) | Error::GridMismatch(_) | Error::Parse { .. } => CliError::Usage(e.into()),
        _ => CliError::Failure(e.into()),
    }
}

pub fn cmd_tableau(gauss: Option<usize>, file: Option<&Path>) -> CmdResult {
    let t = match (gauss, file) {
        (Some(s), _) => gauss_legendre(s).usage()?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow!("cannot read {}: {e}", path.display()))
                .usage()?;
            parse_tableau(&text).usage()?
        }
        (None, None) => return Err(CliError::Usage(anyhow!("give --gauss or --file"))),
    };
    let (text, passed) = tableau_report(&t);
    print!("{text}");
    Ok(if passed { Status::Pass } else { Status::Fail })
}

fn tableau_report(t: &ButcherTableau) -> (String, bool) {
    let mut out = String::new();
    out.push_str(&write_tableau(t));
    let order = verify_order_conditions(t, t.order());
    let _ = writeln!(
        out,
        "\norder conditions through p = {}: {} (max residual {:.2e})",
        order.order,
        verdict(order.passed),
        order.max_residual()
    );
    for r in &order.residuals {
        let _ = writeln!(out, "  p={} {:<12} {:.2e}", r.order, r.tree, r.residual);
    }
    let s = verify_a_stability(t, &StabilityGrid::default());
    let _ = writeln!(out, "\nstability");
    let _ = writeln!(
        out,
        "  max |S| on imaginary axis   {:.6}",
        s.max_modulus_on_imaginary_axis
    );
    let _ = writeln!(
        out,
        "  max |S| on left half grid   {:.6}",
        s.max_modulus_on_left_half_grid
    );
    let _ = writeln!(out, "  min singular value          {:.3e}", s.min_singular_value);
    let _ = writeln!(out, "  min Re eig(alpha)           {:.6}", s.min_alpha_eigenvalue_real);
    let _ = writeln!(out, "  singular samples            {}", s.singular_samples.len());
    let _ = writeln!(out, "  (RK1) {}", verdict(s.rk1.passed()));
    let _ = writeln!(out, "  (RK1) boundary {}", verdict(s.rk1_boundary.passed()));
    let _ = writeln!(out, "  (RK2) {}", verdict(s.rk2.passed()));
    let _ = writeln!(out, "  (RK2) exact {}", verdict(s.rk2_exact.passed()));
    let passed = order.passed && s.passed();
    let _ = writeln!(out, "verdict {}", verdict(passed));
    (out, passed)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

struct Setup {
    problem: galerkin_rk::equations::Problem,
    tableau: ButcherTableau,
    u0: SpectralState,
    dir: PathBuf,
}

fn setup(loaded: &Loaded) -> Result<Setup, CliError> {
    let c = &loaded.config;
    let problem = c.problem().usage()?;
    let tableau = c.tableau.build(&loaded.base).usage()?;
    let grid = problem.build_grid(c.grid.kmax);
    let u0 = c.data.spec().build(&problem, &grid).usage()?;
    Ok(Setup {
        problem,
        tableau,
        u0,
        dir: c.output_dir(),
    })
}

pub fn cmd_run(loaded: &Loaded, verify_linear: bool) -> CmdResult {
    let c = &loaded.config;
    let (h, m) = c.single_cell().usage()?;
    let n = c.steps(h).usage()?;
    let Setup { problem: p, tableau: t, u0, dir } = setup(loaded)?;
    if verify_linear && !p.is_linear() {
        return Err(CliError::Usage(anyhow!("--verify-linear needs a problem with B linear")));
    }
    let threshold = u0.grid().threshold_for_wavenumber(m);
    let opts = IntegrateOptions {
        stage: c.stage_options(),
        horizon: f64::INFINITY,
    };
    let snapshot = dir.join("run.snapshot");
    let diagnostics = dir.join("run_diagnostics.csv");
    let status_file = dir.join("run.status");
    let mut status = String::new();
    let _ = writeln!(status, "problem {}", p.fingerprint());
    let _ = writeln!(status, "h {h:e}\nm {m}\nsteps {n}");

    let run = match integrate(&p, &t, &u0, threshold, h, n, &opts) {
        Ok(run) => run,
        Err(e) => {
            remove_stale(&snapshot).usage()?;
            remove_stale(&diagnostics).usage()?;
            let _ = writeln!(status, "status failed:{}\nerror {e}", e.kind());
            write_atomic(&status_file, &loaded.hash, &status).usage()?;
            eprintln!("run failed: {e}");
            return Ok(Status::Fail);
        }
    };

    let mut csv = String::from("step,iterations,contraction_ratio,invariant,norm\n");
    for r in &run.records {
        let _ = writeln!(
            csv,
            "{},{},{:.16e},{:.16e},{:.16e}",
            r.step, r.iterations, r.contraction_ratio, r.invariant, r.norm
        );
    }
    write_atomic(&diagnostics, &loaded.hash, &csv).usage()?;
    write_atomic(&snapshot, &loaded.hash, &Snapshot::from_state(&run.state).to_text()).usage()?;

    let mut passed = true;
    let _ = writeln!(status, "status ok");
    let _ = writeln!(status, "lambda_obs {:.6e}", run.lambda_obs);
    let _ = writeln!(status, "max_iterations {}", run.max_iterations());
    let _ = writeln!(status, "max_contraction_ratio {:.6e}", run.max_contraction_ratio());
    let _ = writeln!(status, "final_norm {:.16e}", run.state.norm());
    if verify_linear {
        let exact = p
            .linear_flow(&u0.project(threshold), c.grid.t_final)
            .expect("problem is linear")
            .map_err(classify)?;
        let diff = (&run.state - &exact).norm();
        passed = diff <= LINEAR_TOL;
        let _ = writeln!(status, "verify_linear {diff:.3e} limit {LINEAR_TOL:.0e} {}", verdict(passed));
    }
    write_atomic(&status_file, &loaded.hash, &status).usage()?;
    print!("{status}");
    Ok(if passed { Status::Pass } else { Status::Fail })
}

fn required<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(anyhow!("{what} is required for this study")))
}

fn single_h(h: &[f64]) -> Result<f64, CliError> {
    match h {
        [h] => Ok(*h),
        _ => Err(CliError::Usage(anyhow!("this study takes exactly one h"))),
    }
}

pub fn cmd_study(loaded: &Loaded, jobs: Option<usize>) -> CmdResult {
    let c = &loaded.config;
    let s = required(c.study.as_ref(), "[study]")?;
    let Setup { problem: p, tableau: t, u0, dir } = setup(loaded)?;
    let opts = c.study_options(jobs);
    let g = &c.grid;
    let report = match s.kind {
        StudyName::Temporal => temporal_order_study(&p, &t, &u0, &g.m, &g.h, g.t_final, &opts),
        StudyName::Spatial => {
            let h = single_h(&g.h)?;
            let m_ref = required(g.m_ref, "grid.m_ref")?;
            let expect = c.spatial_expectation().usage()?;
            spatial_order_study(&p, &t, &u0, &g.m, m_ref, h, g.t_final, expect, &opts)
        }
        StudyName::Coupling => {
            let control = match &s.control {
                Some(src) => Some(src.build(&loaded.base).usage()?),
                None => None,
            };
            coupling_study(&p, &t, &u0, &g.h, &g.m, g.t_final, control.as_ref(), &opts)
        }
        StudyName::Derivative => {
            let h = single_h(&g.h)?;
            let m_ref = required(g.m_ref, "grid.m_ref")?;
            let spec = required(c.data.direction.as_ref(), "data.direction")?;
            let p_target = required(s.p_target, "study.p_target")?;
            let v = spec.build(&p, u0.grid()).usage()?;
            derivative_projection_study(&p, &t, &u0, &v, &g.m, m_ref, h, p_target, s.semiflow_t, &opts)
        }
    }
    .map_err(classify)?
    .with_metadata("config-hash", &loaded.hash);
    write_report(&report, &dir, &loaded.hash)?;
    print!("{}", report.summary());
    Ok(match report.verdict {
        StudyVerdict::Pass | StudyVerdict::Floor => Status::Pass,
        StudyVerdict::Fail => Status::Fail,
        StudyVerdict::Inconclusive => Status::Inconclusive,
    })
}

fn write_report(report: &StudyReport, dir: &Path, hash: &str) -> Result<(), CliError> {
    let stem = report.kind.as_str();
    write_atomic(&dir.join(format!("{stem}.csv")), hash, &report.to_csv()).usage()?;
    write_atomic(&dir.join(format!("{stem}.verdict")), hash, &report.summary()).usage()
}

pub fn cmd_oracle_check(loaded: &Loaded) -> CmdResult {
    let c = &loaded.config;
    let (h, m) = c.single_cell().usage()?;
    let n = c.steps(h).usage()?;
    let Setup { problem: p, tableau: t, u0, dir } = setup(loaded)?;
    let t_final = c.grid.t_final;
    let threshold = u0.grid().threshold_for_wavenumber(m);

    // Picard first: it is the cheap one that detects a horizon that is too long
    let picard = match picard_oracle(&p, &u0, t_final, threshold, &PicardOptions::default()) {
        Ok(out) => out.state,
        Err(e @ Error::HorizonExceeded { .. }) => {
            eprintln!("picard oracle: {e}");
            return Ok(Status::Fail);
        }
        Err(e) => return Err(classify(e)),
    };
    let reference = reference_solution_with(&p, &u0, t_final, threshold, &c.reference_options()).map_err(classify)?;

    let mut stage = c.stage_options();
    if c.grid.stage_tol.is_none() {
        stage.tol = 1e-14;
    }
    let cache = build_resolvent_cache(&t, u0.grid(), h).map_err(classify)?;
    let mut stepped = u0.project(threshold);
    for _ in 0..n {
        stepped = rk_step(&p, &cache, &stepped, threshold, &stage).map_err(classify)?.0;
    }

    let mut results = vec![("picard", picard), ("reference", reference), ("rk_step", stepped)];
    if m <= DENSE_MAX_M {
        let mut dense = u0.project(threshold);
        for _ in 0..n {
            dense = dense_stage_step(&p, &t, &dense, threshold, h).map_err(classify)?;
        }
        results.push(("dense", dense));
    }

    let mut csv = String::from("a,b,difference\n");
    let mut worst: f64 = 0.0;
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let d = (&results[i].1 - &results[j].1).norm();
            worst = worst.max(d);
            let _ = writeln!(csv, "{},{},{d:.6e}", results[i].0, results[j].0);
        }
    }
    write_atomic(&dir.join("oracle.csv"), &loaded.hash, &csv).usage()?;
    let passed = worst <= ORACLE_TOL;
    print!("{csv}");
    println!("max difference {worst:.3e} limit {ORACLE_TOL:.0e} {}", verdict(passed));
    Ok(if passed { Status::Pass } else { Status::Fail })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_report_passes_and_euler_fails() {
        let (text, passed) = tableau_report(&gauss_legendre(2).unwrap());
        assert!(passed, "{text}");
        assert!(text.contains("s = 2"));
        let (text, passed) = tableau_report(&ButcherTableau::explicit_euler());
        assert!(!passed);
        assert!(text.contains("(RK1) fail"));
    }

    #[test]
    fn library_errors_map_to_exit_codes() {
        assert_eq!(classify(Error::InvalidArgument("x".into())).code(), 2);
        assert_eq!(
            classify(Error::ContractionFailure {
                iterations: 3,
                last_ratio: 2.0
            })
            .code(),
            1
        );
        assert_eq!(Status::Inconclusive.code(), 3);
    }
}
