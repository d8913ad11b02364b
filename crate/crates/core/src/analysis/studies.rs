use rayon::prelude::*;

use super::fit::{fit_order, noise_floor};
use super::{Cell, CellStatus, FitEntry, StudyKind, StudyReport, StudyVerdict};
use crate::equations::Problem;
use crate::error::{Error, Result};
use crate::integrator::{
    build_resolvent_cache, flow_derivative, integrate, integrate_with_cache,
    reference_solution_with, rk_step, IntegrateOptions, ReferenceOptions, Run, StageOptions,
};
use crate::spectral::SpectralState;
use crate::tableau::{gauss_legendre, ButcherTableau, MAX_GAUSS_STAGES};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub stage: StageOptions,
    pub reference: ReferenceOptions,
    /// Temporal slopes must lie in `[p - slope_below, p + slope_above]`.
    pub slope_below: f64,
    pub slope_above: f64,
    /// Largest spread of the per-m temporal slopes.
    pub uniformity: f64,
    /// Spatial and derivative slopes must be `<= -exponent + slack`.
    pub slack: f64,
    /// Competing error source must be this factor below the measured error.
    pub dominance: f64,
    /// Interior coupling cells must match the two-term model within this factor.
    pub coupling_factor: f64,
    pub iteration_spread: usize,
    /// Smooth data: required error reduction per doubling of the cutoff.
    pub spectral_reduction: f64,
    /// Stage iterations per step inside finite-difference derivatives.
    pub derivative_iterations: usize,
    /// Derivative errors below this multiple of `||D_ref||` count as floor.
    pub derivative_floor: f64,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            stage: StageOptions::default(),
            reference: ReferenceOptions::default(),
            slope_below: 0.3,
            slope_above: 0.5,
            uniformity: 0.2,
            slack: 0.5,
            dominance: 10.0,
            coupling_factor: 3.0,
            iteration_spread: 1,
            spectral_reduction: 64.0,
            derivative_iterations: 40,
            derivative_floor: 1e-9,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialExpectation {
    /// Data with finite `Y_exponent` norm: error `O(m^-exponent)`.
    Algebraic { exponent: u32 },
    /// Band-limited data: super-algebraic decay down to the floor.
    Spectral,
}

fn par_map<T, F>(n: usize, jobs: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
    match jobs.map(|j| rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build()) {
        Some(Ok(pool)) => pool.install(run),
        _ => run(),
    }
}

fn tableau_label(t: &ButcherTableau) -> String {
    if t.stages() <= MAX_GAUSS_STAGES {
        if let Ok(g) = gauss_legendre(t.stages()) {
            let same = (0..t.stages())
                .all(|i| (0..t.stages()).all(|j| (g.a(i, j) - t.a(i, j)).abs() < 1e-14))
                && g.b().iter().zip(t.b()).all(|(x, y)| (x - y).abs() < 1e-14);
            if same {
                return format!("gauss{}", t.stages());
            }
        }
    }
    if *t == ButcherTableau::explicit_euler() {
        return "explicit-euler".into();
    }
    format!("custom-s{}-p{}", t.stages(), t.order())
}

fn thresholds(u0: &SpectralState, m_list: &[usize]) -> Result<Vec<f64>> {
    if m_list.is_empty() {
        return Err(Error::invalid("m list is empty"));
    }
    if m_list.windows(2).any(|w| w[1] <= w[0]) || m_list[0] == 0 {
        return Err(Error::invalid("m values must be positive and increasing"));
    }
    let grid = u0.grid();
    if *m_list.last().unwrap() > grid.kmax() {
        return Err(Error::invalid(format!(
            "cutoff {} exceeds the data grid (kmax {})",
            m_list.last().unwrap(),
            grid.kmax()
        )));
    }
    Ok(m_list.iter().map(|&k| grid.threshold_for_wavenumber(k)).collect())
}

fn steps_for(h: f64, t_final: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("step sizes must be positive"));
    }
    let n = (t_final / h).round();
    if n < 1.0 || (n * h - t_final).abs() > 1e-9 * t_final.max(h) {
        return Err(Error::invalid(format!("T = {t_final} is not a multiple of h = {h}")));
    }
    Ok(n as usize)
}

fn run_to(
    p: &Problem,
    t: &ButcherTableau,
    u0: &SpectralState,
    m: f64,
    h: f64,
    t_final: f64,
    stage: StageOptions,
) -> Result<Run> {
    let opts = IntegrateOptions {
        stage,
        horizon: f64::INFINITY,
    };
    integrate(p, t, u0, m, h, steps_for(h, t_final)?, &opts)
}

fn references(
    p: &Problem,
    u0: &SpectralState,
    t_final: f64,
    thresholds: &[f64],
    opts: &StudyOptions,
) -> Result<Vec<SpectralState>> {
    par_map(thresholds.len(), opts.jobs, |i| {
        reference_solution_with(p, u0, t_final, thresholds[i], &opts.reference)
    })
    .into_iter()
    .collect()
}

/// Fit verdict when the fit itself could not be made.
fn unfitted(cells: &[&Cell]) -> StudyVerdict {
    if !cells.is_empty() && cells.iter().all(|c| c.status == CellStatus::Floor) {
        StudyVerdict::Floor
    } else {
        StudyVerdict::Inconclusive
    }
}

fn fit_entry(
    label: String,
    axis: &'static str,
    cells: &[&Cell],
    grid: &[f64],
    window: Option<(f64, f64)>,
) -> FitEntry {
    let errors: Vec<f64> = cells
        .iter()
        .map(|c| match (c.status == CellStatus::Ok, c.error) {
            (true, Some(e)) => e,
            _ => f64::NAN,
        })
        .collect();
    let fit = fit_order(&errors, grid, 0.0).ok();
    let verdict = match (fit, window) {
        (None, _) => unfitted(cells),
        (Some(_), None) => StudyVerdict::Pass,
        (Some(f), Some((lo, hi))) => {
            if f.slope >= lo && f.slope <= hi {
                StudyVerdict::Pass
            } else {
                StudyVerdict::Fail
            }
        }
    };
    FitEntry {
        label,
        axis,
        fit,
        window,
        verdict,
    }
}

fn finish(report: &mut StudyReport, informational: &[&str]) {
    let mut verdict = StudyVerdict::Floor;
    for f in &report.fits {
        if !informational.iter().any(|l| f.label.starts_with(l)) {
            verdict = verdict.combine(f.verdict);
        }
    }
    if report.checks.iter().any(|c| !c.passed) {
        verdict = StudyVerdict::Fail;
    } else if verdict == StudyVerdict::Floor && !report.checks.is_empty() && report.fits.is_empty() {
        verdict = StudyVerdict::Pass;
    }
    report.verdict = verdict;
}

/// Error of `(psi_m^h)^{T/h}` against the same-`m` reference `phi_m(T)`,
/// over `m_list x h_list`, with one slope fit per `m`.
///
/// For linear problems the reference is the exact semigroup. Cells within
/// the dominance factor of the reference tolerance are excluded from fits.
pub fn temporal_order_study(
    p: &Problem,
    t: &ButcherTableau,
    u0: &SpectralState,
    m_list: &[usize],
    h_list: &[f64],
    t_final: f64,
    opts: &StudyOptions,
) -> Result<StudyReport> {
    let thr = thresholds(u0, m_list)?;
    if h_list.len() < 2 || h_list.windows(2).any(|w| ((w[0] / w[1]) - 2.0).abs() > 1e-9) {
        return Err(Error::invalid("h list must be geometric with ratio 2, largest first"));
    }
    for &h in h_list {
        steps_for(h, t_final)?;
    }
    let refs = references(p, u0, t_final, &thr, opts)?;
    let label = tableau_label(t);
    let linear = p.is_linear();
    let nh = h_list.len();
    let cells = par_map(thr.len() * nh, opts.jobs, |idx| {
        let (i, j) = (idx / nh, idx % nh);
        let scale = refs[i].norm();
        let competing = if linear {
            0.0
        } else {
            opts.reference.target * scale.max(1.0)
        };
        let (error, iterations, status) = match run_to(p, t, u0, thr[i], h_list[j], t_final, opts.stage) {
            Ok(run) => {
                let e = (&run.state - &refs[i]).norm();
                let status = if e <= noise_floor(scale) {
                    CellStatus::Floor
                } else if e < opts.dominance * competing {
                    CellStatus::Dominated
                } else {
                    CellStatus::Ok
                };
                (Some(e), Some(run.max_iterations()), status)
            }
            Err(e) => (None, None, CellStatus::Failed(e.kind())),
        };
        Cell {
            series: StudyKind::Temporal.as_str().into(),
            tableau: label.clone(),
            h: h_list[j],
            m: m_list[i],
            threshold: thr[i],
            norm_index: 0,
            error,
            competing: Some(competing),
            iterations,
            status,
        }
    });

    let order = t.order() as f64;
    let window = (order - opts.slope_below, order + opts.slope_above);
    let mut report = StudyReport::new(StudyKind::Temporal, p.fingerprint(), label);
    report.h_values = h_list.to_vec();
    report.m_values = m_list.to_vec();
    for (i, &m) in m_list.iter().enumerate() {
        let row: Vec<&Cell> = cells[i * nh..(i + 1) * nh].iter().collect();
        report.fits.push(fit_entry(format!("m={m}"), "h", &row, h_list, Some(window)));
    }
    let slopes: Vec<f64> = report.fits.iter().filter_map(|f| f.fit.map(|x| x.slope)).collect();
    if slopes.len() >= 2 {
        let spread = slopes.iter().cloned().fold(f64::MIN, f64::max)
            - slopes.iter().cloned().fold(f64::MAX, f64::min);
        report.check("slope-spread-across-m", spread, opts.uniformity, spread <= opts.uniformity);
    }
    report.cells = cells;
    report.meta("T", t_final);
    report.meta("expected_order", order);
    report.meta("stage_tol", opts.stage.tol);
    report.meta(
        "reference",
        if linear { "exact-semigroup" } else { "lawson-rk4" },
    );
    report.meta("reference_target", opts.reference.target);
    finish(&mut report, &[]);
    if report.verdict == StudyVerdict::Floor {
        report.notes.push("all errors at the noise floor; no slope fitted".into());
    }
    Ok(report)
}

/// Error `||psi_m(T) - psi_{m_ref}(T)||_{Y_0}` at a small fixed step over
/// the cutoffs in `m_list`.
///
/// The competing temporal error of a cell is how far the measured error
/// moves from `||phi_m(T) - phi_{m_ref}(T)||` computed with the references;
/// cells where it is not `dominance` times below the error are excluded.
#[allow(clippy::too_many_arguments)]
pub fn spatial_order_study(
    p: &Problem,
    t: &ButcherTableau,
    u0: &SpectralState,
    m_list: &[usize],
    m_ref: usize,
    h_small: f64,
    t_final: f64,
    expect: SpatialExpectation,
    opts: &StudyOptions,
) -> Result<StudyReport> {
    let mut all = m_list.to_vec();
    all.push(m_ref);
    let thr = thresholds(u0, &all)?;
    steps_for(h_small, t_final)?;
    let refs = references(p, u0, t_final, &thr, opts)?;
    let runs = par_map(all.len(), opts.jobs, |i| {
        run_to(p, t, u0, thr[i], h_small, t_final, opts.stage)
    });
    let n = m_list.len();
    let fine = match &runs[n] {
        Ok(run) => run.state.clone(),
        Err(e) => return Err(e.clone()),
    };
    let scale = fine.norm();
    let floor = noise_floor(scale).max(opts.reference.target * scale.max(1.0));
    let label = tableau_label(t);
    let cells: Vec<Cell> = (0..n)
        .map(|i| {
            let (error, competing, iterations, status) = match &runs[i] {
                Ok(run) => {
                    let e = (&run.state - &fine).norm();
                    // temporal contamination of the measured error itself
                    let exact = (&refs[i] - &refs[n]).norm();
                    let c = (e - exact).abs() + 2.0 * opts.reference.target * scale.max(1.0);
                    let status = if e <= floor {
                        CellStatus::Floor
                    } else if opts.dominance * c > e {
                        CellStatus::Dominated
                    } else {
                        CellStatus::Ok
                    };
                    (Some(e), Some(c), Some(run.max_iterations()), status)
                }
                Err(e) => (None, None, None, CellStatus::Failed(e.kind())),
            };
            Cell {
                series: StudyKind::Spatial.as_str().into(),
                tableau: label.clone(),
                h: h_small,
                m: m_list[i],
                threshold: thr[i],
                norm_index: 0,
                error,
                competing,
                iterations,
                status,
            }
        })
        .collect();

    let mut report = StudyReport::new(StudyKind::Spatial, p.fingerprint(), label);
    report.h_values = vec![h_small];
    report.m_values = m_list.to_vec();
    report.meta("T", t_final);
    report.meta("m_ref", m_ref);
    report.meta("floor", floor);
    let cell_refs: Vec<&Cell> = cells.iter().collect();
    match expect {
        SpatialExpectation::Algebraic { exponent } => {
            report.meta("expected_exponent", format!("-{exponent}"));
            report.meta("data_space", format!("Y_{exponent} = {}", p.sobolev_label(exponent)));
            let window = (f64::NEG_INFINITY, -(exponent as f64) + opts.slack);
            report.fits.push(fit_entry("m".into(), "m", &cell_refs, &thr[..n], Some(window)));
        }
        SpatialExpectation::Spectral => {
            report.meta("expected_reduction_per_doubling", opts.spectral_reduction);
            for i in 0..n.saturating_sub(1) {
                if m_list[i + 1] != 2 * m_list[i] {
                    continue;
                }
                let (a, b) = (&cells[i], &cells[i + 1]);
                let usable = |c: &Cell| matches!(c.status, CellStatus::Ok | CellStatus::Dominated);
                if !usable(a) {
                    break;
                }
                let (ea, ca) = (a.error.expect("run succeeded"), a.competing.unwrap_or(0.0));
                let (eb, cb, last) = match b.status {
                    CellStatus::Floor => (floor, 0.0, true),
                    _ if usable(b) => (b.error.expect("run succeeded"), b.competing.unwrap_or(0.0), false),
                    _ => break,
                };
                // smallest ratio consistent with the competing error estimates
                let ratio = (ea - ca).max(0.0) / (eb + cb);
                let dominated = a.status == CellStatus::Dominated || b.status == CellStatus::Dominated;
                if ratio < opts.spectral_reduction && dominated {
                    break;
                }
                let passed = ratio >= opts.spectral_reduction || last;
                report.check(format!("reduction m={}->{}", a.m, b.m), ratio, opts.spectral_reduction, passed);
                if last {
                    break;
                }
            }
        }
    }
    report.cells = cells;
    finish(&mut report, &[]);
    if matches!(expect, SpatialExpectation::Spectral) && report.checks.is_empty() {
        report.verdict = unfitted(&report.cells.iter().collect::<Vec<_>>());
    }
    if report.verdict == StudyVerdict::Inconclusive
        && report.cells.iter().any(|c| c.status == CellStatus::Dominated)
    {
        report
            .notes
            .push(format!("temporal error not dominated at h = {h_small}; shrink h_small"));
    }
    Ok(report)
}

/// Stability and error model over the full `(h, m)` grid, with no relation
/// imposed between `h` and `m`.
///
/// Checks: no failed cell; the per-step stage-iteration maximum varies by at
/// most `iteration_spread` along each `h` row; `C1 h^p + C2 m^-q`, fitted on
/// the smallest-`h` row and the largest-`m` column, predicts the interior
/// cells within `coupling_factor`; and the optional control tableau fails at
/// the cell with the largest `h m^2`.
#[allow(clippy::too_many_arguments)]
pub fn coupling_study(
    p: &Problem,
    t: &ButcherTableau,
    u0: &SpectralState,
    h_list: &[f64],
    m_list: &[usize],
    t_final: f64,
    control: Option<&ButcherTableau>,
    opts: &StudyOptions,
) -> Result<StudyReport> {
    let thr = thresholds(u0, m_list)?;
    if h_list.is_empty() {
        return Err(Error::invalid("h list is empty"));
    }
    for &h in h_list {
        steps_for(h, t_final)?;
    }
    let nm = m_list.len();
    let i_ref = nm - 1;
    let reference = reference_solution_with(p, u0, t_final, thr[i_ref], &opts.reference)?;
    let scale = reference.norm();
    let floor = noise_floor(scale).max(opts.reference.target * scale.max(1.0));
    let label = tableau_label(t);
    let cell = |t: &ButcherTableau, series: &str, j: usize, i: usize| -> Cell {
        let (error, iterations, status) = match run_to(p, t, u0, thr[i], h_list[j], t_final, opts.stage) {
            Ok(run) => {
                let e = (&run.state - &reference).norm();
                let status = if e <= floor { CellStatus::Floor } else { CellStatus::Ok };
                (Some(e), Some(run.max_iterations()), status)
            }
            Err(e) => (None, None, CellStatus::Failed(e.kind())),
        };
        Cell {
            series: series.into(),
            tableau: tableau_label(t),
            h: h_list[j],
            m: m_list[i],
            threshold: thr[i],
            norm_index: 0,
            error,
            competing: None,
            iterations,
            status,
        }
    };
    let mut cells = par_map(h_list.len() * nm, opts.jobs, |idx| {
        cell(t, StudyKind::Coupling.as_str(), idx / nm, idx % nm)
    });
    let at = |cells: &[Cell], j: usize, i: usize| cells[j * nm + i].clone();

    let mut report = StudyReport::new(StudyKind::Coupling, p.fingerprint(), label);
    report.h_values = h_list.to_vec();
    report.m_values = m_list.to_vec();
    report.meta("T", t_final);
    report.meta("m_ref", m_list[i_ref]);
    report.meta("floor", floor);

    let failed = cells
        .iter()
        .filter(|c| matches!(c.status, CellStatus::Failed(_)))
        .count();
    report.check("failed-cells", failed as f64, 0.0, failed == 0);
    if failed > 0 {
        report.notes.push("coupling-violation: instability without a step-size restriction in m".into());
    }
    for (j, &h) in h_list.iter().enumerate() {
        let its: Vec<usize> = (0..nm).filter_map(|i| at(&cells, j, i).iterations).collect();
        if let (Some(lo), Some(hi)) = (its.iter().min(), its.iter().max()) {
            let spread = hi - lo;
            report.check(
                format!("iteration-spread h={h:e}"),
                spread as f64,
                opts.iteration_spread as f64,
                spread <= opts.iteration_spread,
            );
        }
    }
    for (i, &m) in m_list.iter().enumerate() {
        let max_it = (0..h_list.len()).filter_map(|j| at(&cells, j, i).iterations).max();
        if let Some(it) = max_it {
            report.meta(&format!("max_iterations m={m}"), it);
        }
    }

    // two-term model from the boundary cells
    let order = t.order() as f64;
    let ok = |c: &Cell| c.status == CellStatus::Ok;
    let j_min = (0..h_list.len())
        .min_by(|&a, &b| h_list[a].total_cmp(&h_list[b]))
        .expect("nonempty");
    let column: Vec<(f64, f64)> = (0..h_list.len())
        .map(|j| at(&cells, j, i_ref))
        .filter(|c| ok(c))
        .map(|c| (c.h, c.error.expect("ok cell")))
        .collect();
    if column.is_empty() {
        report.notes.push("no usable cell in the largest-m column; temporal constant not fitted".into());
    } else {
        let c1 = (column.iter().map(|(h, e)| e.ln() - order * h.ln()).sum::<f64>()
            / column.len() as f64)
            .exp();
        let spatial: Vec<(f64, f64)> = (0..i_ref)
            .map(|i| at(&cells, j_min, i))
            .filter(|c| ok(c))
            .filter_map(|c| {
                let r = c.error.expect("ok cell") - c1 * c.h.powf(order);
                (r > floor).then(|| (c.threshold.ln(), r.ln()))
            })
            .collect();
        let (c2, q) = if spatial.len() >= 2 {
            let n = spatial.len() as f64;
            let mx = spatial.iter().map(|s| s.0).sum::<f64>() / n;
            let my = spatial.iter().map(|s| s.1).sum::<f64>() / n;
            let slope = spatial.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum::<f64>()
                / spatial.iter().map(|s| (s.0 - mx).powi(2)).sum::<f64>();
            ((my - slope * mx).exp(), -slope)
        } else {
            (0.0, 0.0)
        };
        report.meta("model_c1", c1);
        report.meta("model_c2", c2);
        report.meta("model_q", q);
        let mut worst: f64 = 1.0;
        let mut interior = 0;
        for j in (0..h_list.len()).filter(|&j| j != j_min) {
            for i in 0..i_ref {
                let c = at(&cells, j, i);
                if !ok(&c) {
                    continue;
                }
                let predicted = (c1 * c.h.powf(order) + c2 * c.threshold.powf(-q)).max(floor);
                let ratio = c.error.expect("ok cell") / predicted;
                worst = worst.max(ratio.max(1.0 / ratio));
                interior += 1;
            }
        }
        if interior > 0 {
            report.check("interior-model-factor", worst, opts.coupling_factor, worst <= opts.coupling_factor);
        } else {
            report.notes.push("no interior cells to check against the model".into());
        }
    }

    if let Some(ctl) = control {
        let j_max = (0..h_list.len())
            .max_by(|&a, &b| h_list[a].total_cmp(&h_list[b]))
            .expect("nonempty");
        let mut c = cell(ctl, "control", j_max, i_ref);
        let blew_up = match c.status {
            CellStatus::Failed(kind) => {
                c.status = CellStatus::ExpectedFailure(kind);
                true
            }
            _ => false,
        };
        report.check("control-fails", if blew_up { 1.0 } else { 0.0 }, 1.0, blew_up);
        if !blew_up {
            report.notes.push("control tableau integrated stably; the control itself failed".into());
        }
        cells.push(c);
    }
    report.cells = cells;
    report.verdict = if report.checks.iter().any(|c| !c.passed) {
        StudyVerdict::Fail
    } else if column.is_empty() {
        StudyVerdict::Inconclusive
    } else {
        StudyVerdict::Pass
    };
    Ok(report)
}

/// Projection error of the derivative of the numerical one-step map.
///
/// For each cutoff, `D_m = D psi_m^h(u0)[V]` by [`flow_derivative`], and the
/// error is `||D_m - D_{m_ref}||_{Y_0}`. With `semiflow_t` the same is done
/// for the map `u0 -> (psi_m^h)^{T/h}(u0)`. The zeroth-order series
/// `||psi_m^h(u0) - psi_{m_ref}^h(u0)||` is reported alongside, unchecked.
#[allow(clippy::too_many_arguments)]
pub fn derivative_projection_study(
    p: &Problem,
    t: &ButcherTableau,
    u0: &SpectralState,
    direction: &SpectralState,
    m_list: &[usize],
    m_ref: usize,
    h: f64,
    p_target: u32,
    semiflow_t: Option<f64>,
    opts: &StudyOptions,
) -> Result<StudyReport> {
    if !u0.same_grid(direction) {
        return Err(Error::GridMismatch("direction and data live on different grids".into()));
    }
    let mut all = m_list.to_vec();
    all.push(m_ref);
    let thr = thresholds(u0, &all)?;
    let flow_steps = semiflow_t.map(|tf| steps_for(h, tf)).transpose()?;
    let cache = build_resolvent_cache(t, u0.grid(), h)?;
    let fixed = StageOptions {
        fixed_iterations: Some(opts.derivative_iterations),
        ..opts.stage
    };

    type Triple = (Result<SpectralState>, Result<SpectralState>, Option<Result<SpectralState>>);
    let results: Vec<Triple> = par_map(all.len(), opts.jobs, |i| {
        let step = |x: &SpectralState| rk_step(p, &cache, x, thr[i], &fixed).map(|r| r.0);
        let value = step(u0);
        let d_step = flow_derivative(step, u0, direction, None);
        let d_flow = flow_steps.map(|n| {
            let run_opts = IntegrateOptions {
                stage: fixed,
                horizon: f64::INFINITY,
            };
            let flow = |x: &SpectralState| {
                integrate_with_cache(p, &cache, x, thr[i], n, &run_opts).map(|r| r.state)
            };
            flow_derivative(flow, u0, direction, None)
        });
        (value, d_step, d_flow)
    });
    let n = m_list.len();
    let label = tableau_label(t);
    let mut report = StudyReport::new(StudyKind::DerivativeProjection, p.fingerprint(), label.clone());
    report.h_values = vec![h];
    report.m_values = m_list.to_vec();
    report.meta("m_ref", m_ref);
    report.meta("p_target", p_target);
    report.meta("fd_gap_limit", crate::integrator::DERIVATIVE_GAP_LIMIT);
    if let Some(tf) = semiflow_t {
        report.meta("T", tf);
    }
    let window = (f64::NEG_INFINITY, -(p_target as f64) + opts.slack);

    let series = |name: &str, pick: &dyn Fn(&Triple) -> Option<&Result<SpectralState>>, relative_floor: f64| -> Result<Vec<Cell>> {
        let reference = match pick(&results[n]) {
            Some(Ok(r)) => Some(r.clone()),
            Some(Err(Error::DerivativeUnreliable { .. })) => None,
            Some(Err(e)) => return Err(e.clone()),
            None => return Ok(Vec::new()),
        };
        let floor = reference
            .as_ref()
            .map(|r| noise_floor(r.norm()).max(relative_floor * r.norm().max(1.0)))
            .unwrap_or(0.0);
        Ok((0..n)
            .map(|i| {
                let (error, status) = match (pick(&results[i]).expect("series present"), &reference) {
                    (_, None) | (Err(Error::DerivativeUnreliable { .. }), _) => (None, CellStatus::Unreliable),
                    (Err(e), _) => (None, CellStatus::Failed(e.kind())),
                    (Ok(d), Some(r)) => {
                        let e = (d - r).norm();
                        (Some(e), if e <= floor { CellStatus::Floor } else { CellStatus::Ok })
                    }
                };
                Cell {
                    series: name.into(),
                    tableau: label.clone(),
                    h,
                    m: m_list[i],
                    threshold: thr[i],
                    norm_index: 0,
                    error,
                    competing: None,
                    iterations: None,
                    status,
                }
            })
            .collect())
    };
    let grid = &thr[..n];
    let mut cells = Vec::new();
    let step_cells = series("derivative_step", &|r| Some(&r.1), opts.derivative_floor)?;
    let refs: Vec<&Cell> = step_cells.iter().collect();
    report.fits.push(fit_entry("step".into(), "m", &refs, grid, Some(window)));
    cells.extend(step_cells.iter().cloned());
    let flow_cells = series("derivative_flow", &|r| r.2.as_ref(), opts.derivative_floor)?;
    if !flow_cells.is_empty() {
        let refs: Vec<&Cell> = flow_cells.iter().collect();
        report.fits.push(fit_entry("flow".into(), "m", &refs, grid, Some(window)));
        cells.extend(flow_cells.iter().cloned());
    }
    let value_cells = series("derivative_value", &|r| Some(&r.0), 0.0)?;
    let refs: Vec<&Cell> = value_cells.iter().collect();
    report.fits.push(fit_entry("value".into(), "m", &refs, grid, None));
    cells.extend(value_cells.iter().cloned());
    report.cells = cells;
    finish(&mut report, &["value"]);
    if report.verdict == StudyVerdict::Inconclusive
        && report.cells.iter().any(|c| c.status == CellStatus::Unreliable)
    {
        report.notes.push("finite-difference derivatives unreliable on some cells".into());
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
