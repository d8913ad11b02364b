use std::sync::Arc;

use num_complex::Complex64;

use super::resolvent::{build_resolvent_cache, ResolventCache};
use crate::equations::Problem;
use crate::error::{Error, Result};
use crate::spectral::{ModeGrid, SpectralState};
use crate::tableau::ButcherTableau;

/// Stage updates beyond this multiple of the initial term count as divergence.
const DIVERGENCE_FACTOR: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOptions {
    /// Relative `Y_0` tolerance on the stage update.
    pub tol: f64,
    /// Absolute floor on the update below which the iteration stops.
    pub abs_floor: f64,
    pub max_iter: usize,
    /// Run exactly this many iterations without a convergence test. Makes the
    /// discrete step a smooth function of its input, which finite-difference
    /// derivatives need.
    pub fixed_iterations: Option<usize>,
}

impl Default for StageOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            abs_floor: 1e-14,
            max_iter: 100,
            fixed_iterations: None,
        }
    }
}

impl StageOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// The stages `W^1..W^s` of one step and how the fixed-point iteration got
/// there.
#[derive(Debug, Clone, PartialEq)]
pub struct StageVector {
    pub stages: Vec<SpectralState>,
    pub iterations: usize,
    /// Absolute `Y_0` norms of successive updates.
    pub updates: Vec<f64>,
    /// `updates[k] / updates[k-1]`.
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
    /// `||W - (E P_m u + F B_m(W))||` at the returned stages.
    pub residual: f64,
    /// Combined `Y_0` norm of the stages.
    pub stage_norm: f64,
}

impl StageVector {
    /// Geometric mean of the contraction ratios, skipping steps whose update
    /// is already at the rounding level of the stages.
    pub fn observed_ratio(&self) -> Option<f64> {
        let noise = 1e-13 * self.stage_norm.max(1e-300);
        let logs: Vec<f64> = self
            .updates
            .windows(2)
            .filter(|w| w[1] > noise && w[0] > 0.0)
            .map(|w| (w[1] / w[0]).ln())
            .collect();
        (!logs.is_empty()).then(|| (logs.iter().sum::<f64>() / logs.len() as f64).exp())
    }

    pub fn max_ratio(&self) -> f64 {
        self.contraction_ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Flat stage storage `[stage][component][mode]`.
struct Stages {
    data: Vec<Complex64>,
    len: usize,
}

impl Stages {
    fn to_states(&self, grid: &Arc<ModeGrid>) -> Vec<SpectralState> {
        self.data
            .chunks(self.len)
            .map(|c| SpectralState::from_coeffs(Arc::clone(grid), c.to_vec()).expect("stage length"))
            .collect()
    }

    fn norm(&self, grid: &ModeGrid) -> f64 {
        self.data
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let within = idx % self.len;
                let w = grid.weight(within / grid.n_modes(), within % grid.n_modes());
                (w * z.norm()).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    fn distance(&self, other: &Self, grid: &ModeGrid) -> f64 {
        let diff = Stages {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
            len: self.len,
        };
        diff.norm(grid)
    }
}

fn check_cache(cache: &ResolventCache, u: &SpectralState) -> Result<()> {
    if !(Arc::ptr_eq(cache.grid(), u.grid()) || **cache.grid() == **u.grid()) {
        return Err(Error::GridMismatch("state and resolvent cache use different grids".into()));
    }
    Ok(())
}

/// `E P_m u` for all active modes.
fn initial_term(cache: &ResolventCache, pu: &SpectralState, m: f64) -> Stages {
    let grid = cache.grid();
    let (s, d, n) = (cache.tableau().stages(), grid.components(), grid.n_modes());
    let len = grid.len();
    let mut data = vec![Complex64::new(0.0, 0.0); s * len];
    for mode in (0..n).filter(|&i| grid.modulus(i) <= m) {
        let e = cache.e(mode);
        for r in 0..s * d {
            let (j, c) = (r / d, r % d);
            data[j * len + c * n + mode] = (0..d).map(|c2| e[r * d + c2] * pu.coeffs()[c2 * n + mode]).sum();
        }
    }
    Stages { data, len }
}

/// `base + F x` mode-wise, with `x` given per stage.
fn apply_f(cache: &ResolventCache, base: &Stages, x: &[SpectralState], m: f64) -> Stages {
    let grid = cache.grid();
    let (s, d, n) = (cache.tableau().stages(), grid.components(), grid.n_modes());
    let sd = s * d;
    let mut out = Stages {
        data: base.data.clone(),
        len: base.len,
    };
    let mut local = vec![Complex64::new(0.0, 0.0); sd];
    for mode in (0..n).filter(|&i| grid.modulus(i) <= m) {
        for (q, v) in local.iter_mut().enumerate() {
            *v = x[q / d].coeffs()[(q % d) * n + mode];
        }
        let f = cache.f(mode);
        for r in 0..sd {
            let (j, c) = (r / d, r % d);
            let add: Complex64 = (0..sd).map(|q| f[r * sd + q] * local[q]).sum();
            out.data[j * base.len + c * n + mode] += add;
        }
    }
    out
}

/// `S(hA) P_m u + G x` mode-wise.
fn apply_update(cache: &ResolventCache, pu: &SpectralState, x: &[SpectralState], m: f64) -> SpectralState {
    let grid = cache.grid();
    let (s, d, n) = (cache.tableau().stages(), grid.components(), grid.n_modes());
    let sd = s * d;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for mode in (0..n).filter(|&i| grid.modulus(i) <= m) {
        let sm = cache.stability_block(mode);
        let g = cache.g(mode);
        for c in 0..d {
            let mut v: Complex64 = (0..d).map(|c2| sm[c * d + c2] * pu.coeffs()[c2 * n + mode]).sum();
            for q in 0..sd {
                v += g[c * sd + q] * x[q / d].coeffs()[(q % d) * n + mode];
            }
            out[c * n + mode] = v;
        }
    }
    SpectralState::from_coeffs(Arc::clone(grid), out).expect("grid length")
}

fn evaluate_stages(p: &Problem, w: &Stages, grid: &Arc<ModeGrid>, m: f64) -> Result<Vec<SpectralState>> {
    w.to_states(grid)
        .iter()
        .map(|wj| p.evaluate_b_m(wj, m))
        .collect()
}

/// One Runge-Kutta step of the projected system `u' = A u + P_m B(u)` by the
/// fixed-point stage iteration
/// `W <- (id - h alpha A)^{-1} (1 P_m u + h alpha B_m(W))`
/// started from `W^i = P_m u`, followed by the update
/// `U^1 = S(hA) P_m u + h (b^T (x) id) (id - h alpha A)^{-1} B_m(W)`.
pub fn rk_step(
    p: &Problem,
    cache: &ResolventCache,
    u: &SpectralState,
    m: f64,
    opts: &StageOptions,
) -> Result<(SpectralState, StageVector)> {
    check_cache(cache, u)?;
    let grid = Arc::clone(cache.grid());
    let s = cache.tableau().stages();
    let pu = u.project(m);
    let base = initial_term(cache, &pu, m);
    let base_norm = base.norm(&grid);
    let len = grid.len();
    let mut w = Stages {
        data: pu.coeffs().repeat(s),
        len,
    };
    let mut updates = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    let limit = opts.fixed_iterations.unwrap_or(opts.max_iter);
    let mut iterations = 0;
    while iterations < limit {
        let b = evaluate_stages(p, &w, &grid, m)?;
        let next = apply_f(cache, &base, &b, m);
        let update = next.distance(&w, &grid);
        iterations += 1;
        if let Some(&prev) = updates.last() {
            ratios.push(if prev > 0.0 { update / prev } else { 0.0 });
        }
        updates.push(update);
        let scale = next.norm(&grid);
        if !(update <= DIVERGENCE_FACTOR * base_norm.max(1.0)) {
            return Err(Error::ContractionFailure {
                iterations,
                last_ratio: ratios.last().copied().unwrap_or(f64::INFINITY),
            });
        }
        w = next;
        if opts.fixed_iterations.is_none() && update <= (opts.tol * scale).max(opts.abs_floor) {
            converged = true;
            break;
        }
    }
    if opts.fixed_iterations.is_some() {
        converged = true;
    }
    if !converged {
        return Err(Error::ContractionFailure {
            iterations,
            last_ratio: ratios.last().copied().unwrap_or(f64::NAN),
        });
    }
    let b = evaluate_stages(p, &w, &grid, m)?;
    let residual = apply_f(cache, &base, &b, m).distance(&w, &grid);
    let out = apply_update(cache, &pu, &b, m);
    let stage_norm = w.norm(&grid);
    Ok((
        out,
        StageVector {
            stages: w.to_states(&grid),
            iterations,
            updates,
            contraction_ratios: ratios,
            converged,
            residual,
            stage_norm,
        },
    ))
}

/// Exact derivative of [`rk_step`] at `u` in direction `du`: solves the
/// linearized stage system `dW = E P_m du + F DB_m(W)[dW]` by the same
/// fixed-point iteration and returns `S(hA) P_m du + G DB_m(W)[dW]`.
pub fn tangent_step(
    p: &Problem,
    cache: &ResolventCache,
    u: &SpectralState,
    du: &SpectralState,
    m: f64,
    opts: &StageOptions,
) -> Result<SpectralState> {
    check_cache(cache, du)?;
    let (_, stages) = rk_step(p, cache, u, m, opts)?;
    let grid = Arc::clone(cache.grid());
    let s = cache.tableau().stages();
    let pdu = du.project(m);
    let base = initial_term(cache, &pdu, m);
    let mut dw = Stages {
        data: pdu.coeffs().repeat(s),
        len: grid.len(),
    };
    let derivative = |dw: &Stages| -> Result<Vec<SpectralState>> {
        dw.to_states(&grid)
            .iter()
            .zip(&stages.stages)
            .map(|(dwj, wj)| p.evaluate_db_m(wj, dwj, m))
            .collect()
    };
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let next = apply_f(cache, &base, &derivative(&dw)?, m);
        let update = next.distance(&dw, &grid);
        let scale = next.norm(&grid);
        dw = next;
        if update <= (opts.tol * scale).max(opts.abs_floor) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ContractionFailure {
            iterations: opts.max_iter,
            last_ratio: f64::NAN,
        });
    }
    Ok(apply_update(cache, &pdu, &derivative(&dw)?, m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub stage: StageOptions,
    /// Largest admissible `n_steps * h`.
    pub horizon: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            stage: StageOptions::default(),
            horizon: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub iterations: usize,
    /// Largest per-iteration contraction ratio within the step.
    pub contraction_ratio: f64,
    pub invariant: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub state: SpectralState,
    pub initial_invariant: f64,
    pub initial_norm: f64,
    pub records: Vec<StepRecord>,
    pub lambda_obs: f64,
}

impl Run {
    pub fn max_iterations(&self) -> usize {
        self.records.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    pub fn max_contraction_ratio(&self) -> f64 {
        self.records.iter().map(|r| r.contraction_ratio).fold(0.0, f64::max)
    }
}

/// `n_steps` steps of size `h` starting from `P_m u0`.
///
/// The domain `D` is the `Y_0` ball of radius `domain_factor * ||u0||`;
/// leaving it aborts with [`Error::DomainExit`]. Step errors come back wrapped
/// in [`Error::Step`] with the 1-based index of the failing step.
pub fn integrate(
    p: &Problem,
    t: &ButcherTableau,
    u0: &SpectralState,
    m: f64,
    h: f64,
    n_steps: usize,
    opts: &IntegrateOptions,
) -> Result<Run> {
    if n_steps as f64 * h > opts.horizon {
        return Err(Error::invalid(format!(
            "n_steps * h = {} exceeds the horizon {}",
            n_steps as f64 * h,
            opts.horizon
        )));
    }
    let cache = build_resolvent_cache(t, u0.grid(), h)?;
    integrate_with_cache(p, &cache, u0, m, n_steps, opts)
}

pub fn integrate_with_cache(
    p: &Problem,
    cache: &ResolventCache,
    u0: &SpectralState,
    m: f64,
    n_steps: usize,
    opts: &IntegrateOptions,
) -> Result<Run> {
    let mut state = u0.project(m);
    let initial_norm = state.norm();
    let radius = p.domain_factor() * if initial_norm > 0.0 { initial_norm } else { 1.0 };
    let mut records = Vec::with_capacity(n_steps);
    let initial_invariant = p.invariant(&state);
    for step in 1..=n_steps {
        let wrap = |e: Error| Error::Step {
            step,
            source: Box::new(e),
        };
        let (next, stages) = rk_step(p, cache, &state, m, &opts.stage).map_err(wrap)?;
        let norm = next.norm();
        if !(norm <= radius) {
            return Err(wrap(Error::DomainExit { norm, radius }));
        }
        records.push(StepRecord {
            step,
            iterations: stages.iterations,
            contraction_ratio: stages.max_ratio(),
            invariant: p.invariant(&next),
            norm,
        });
        state = next;
    }
    Ok(Run {
        state,
        initial_invariant,
        initial_norm,
        records,
        lambda_obs: cache.lambda_obs(),
    })
}

/// Empirical `h_*`: the largest step in `(0, h_max]` (to relative precision
/// `2^-20`) for which one stage iteration from `u` converges.
pub fn empirical_step_limit(
    p: &Problem,
    t: &ButcherTableau,
    u: &SpectralState,
    m: f64,
    h_max: f64,
    opts: &StageOptions,
) -> Result<f64> {
    let converges = |h: f64| -> Result<bool> {
        let cache = build_resolvent_cache(t, u.grid(), h)?;
        match rk_step(p, &cache, u, m, opts) {
            Ok(_) => Ok(true),
            Err(Error::ContractionFailure { .. } | Error::NonlinearityOverflow) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if converges(h_max)? {
        return Ok(h_max);
    }
    let (mut lo, mut hi) = (0.0, h_max);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
