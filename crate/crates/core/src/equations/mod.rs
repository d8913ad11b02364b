//! The two concrete problems: the periodic semilinear wave equation
//! `u_tt = u_xx - f(u)` and the nonlinear Schrodinger equation
//! `i u_t = -u_xx + dV/d(conj u)`, both on the unit interval.
//!
//! Each problem knows how to build its [`ModeGrid`], evaluate the projected
//! nonlinearity `B_m = P_m B` pseudospectrally, and evaluate its conserved
//! quantity.

mod collocation;
mod data;

pub use data::{finite_scale_index, make_initial_data, DataKind};

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{ModeGrid, SpectralState};
use collocation::{Layout, PlanCache};

pub const MAX_WAVE_DEGREE: usize = 7;
pub const MAX_POTENTIAL_DEGREE: usize = 5;
/// Default radius of the `Y_0` ball standing in for the domain `D`, as a
/// multiple of the initial norm.
pub const DEFAULT_DOMAIN_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DealiasRule {
    TwoThirds,
    ThreeHalvesPadding,
    None,
}

/// One monomial `coeff * u^u_power * conj(u)^conj_power` of `dV/d(conj u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialTerm {
    pub coeff: f64,
    pub u_power: u32,
    pub conj_power: u32,
}

impl PotentialTerm {
    /// `|u|^2 u`, the cubic (defocusing) nonlinearity.
    pub fn cubic() -> Self {
        Self {
            coeff: 1.0,
            u_power: 2,
            conj_power: 1,
        }
    }

    fn degree(&self) -> usize {
        (self.u_power + self.conj_power) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Equation {
    /// `f(u) = sum_j f[j] u^j`.
    Wave { f: Vec<f64> },
    Nls { potential: Vec<PotentialTerm> },
}

#[derive(Debug)]
pub struct Problem {
    name: String,
    equation: Equation,
    dealias: DealiasRule,
    k_declared: u32,
    domain_factor: f64,
    plans: PlanCache,
}

impl Clone for Problem {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            equation: self.equation.clone(),
            dealias: self.dealias,
            k_declared: self.k_declared,
            domain_factor: self.domain_factor,
            plans: PlanCache::default(),
        }
    }
}

impl PartialEq for Problem {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.equation == other.equation
            && self.dealias == other.dealias
            && self.k_declared == other.k_declared
            && self.domain_factor == other.domain_factor
    }
}

/// Semilinear wave equation with polynomial `f`, `f_coeffs[j]` multiplying `u^j`.
///
/// The state is `U = (u, v)` with `A = (1 - P_0) A~`, `A~ = [[0, id], [d_xx, 0]]`.
/// The nilpotent zero-mode part `P_0 A~ U = (mean(v), 0)` is carried by the
/// nonlinearity, so that `A U + B(U) = A~ U + (0, -f(u))`.
pub fn wave_problem(f_coeffs: Vec<f64>) -> Result<Problem> {
    let mut f = f_coeffs;
    while f.last() == Some(&0.0) {
        f.pop();
    }
    if f.len() > MAX_WAVE_DEGREE + 1 {
        return Err(Error::invalid(format!(
            "wave nonlinearity degree {} exceeds {MAX_WAVE_DEGREE}",
            f.len() - 1
        )));
    }
    if f.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("polynomial coefficients must be finite"));
    }
    Ok(Problem::new("wave", Equation::Wave { f }))
}

/// Nonlinear Schrodinger equation with `A = i d_xx` and
/// `B(u) = -i dV/d(conj u)` given as a sum of monomials.
pub fn nls_problem(potential: Vec<PotentialTerm>) -> Result<Problem> {
    if let Some(t) = potential.iter().find(|t| t.degree() > MAX_POTENTIAL_DEGREE) {
        return Err(Error::invalid(format!(
            "potential term of degree {} exceeds {MAX_POTENTIAL_DEGREE}",
            t.degree()
        )));
    }
    if potential.iter().any(|t| !t.coeff.is_finite()) {
        return Err(Error::invalid("potential coefficients must be finite"));
    }
    let potential = potential.into_iter().filter(|t| t.coeff != 0.0).collect();
    Ok(Problem::new("nls", Equation::Nls { potential }))
}

impl Problem {
    fn new(name: &str, equation: Equation) -> Self {
        Self {
            name: name.to_string(),
            equation,
            dealias: DealiasRule::ThreeHalvesPadding,
            // polynomial nonlinearities satisfy the smoothness assumption for any K
            k_declared: crate::spectral::MAX_SCALE_INDEX,
            domain_factor: DEFAULT_DOMAIN_FACTOR,
            plans: PlanCache::default(),
        }
    }

    pub fn with_dealias(mut self, rule: DealiasRule) -> Self {
        self.dealias = rule;
        self
    }

    pub fn with_domain_factor(mut self, factor: f64) -> Self {
        self.domain_factor = factor;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn equation(&self) -> &Equation {
        &self.equation
    }

    pub fn dealias(&self) -> DealiasRule {
        self.dealias
    }

    pub fn k_declared(&self) -> u32 {
        self.k_declared
    }

    pub fn domain_factor(&self) -> f64 {
        self.domain_factor
    }

    pub fn components(&self) -> usize {
        match self.equation {
            Equation::Wave { .. } => 2,
            Equation::Nls { .. } => 1,
        }
    }

    /// Polynomial degree of the pointwise nonlinearity.
    pub fn degree(&self) -> usize {
        match &self.equation {
            Equation::Wave { f } => f.len().saturating_sub(1),
            Equation::Nls { potential } => potential.iter().map(|t| t.degree()).max().unwrap_or(0),
        }
    }

    /// `B` vanishes identically.
    pub fn is_free(&self) -> bool {
        matches!(&self.equation, Equation::Nls { potential } if potential.is_empty())
    }

    /// `B` is linear, so the exact flow is available in closed form.
    pub fn is_linear(&self) -> bool {
        match &self.equation {
            Equation::Wave { f } => f.len() <= 1 && f.first().is_none_or(|c| *c == 0.0),
            Equation::Nls { potential } => potential.is_empty(),
        }
    }

    /// Identifies the problem in cache keys and report columns; never
    /// contains a comma.
    pub fn fingerprint(&self) -> String {
        let body = match &self.equation {
            Equation::Wave { f } => {
                let terms: Vec<String> = f.iter().enumerate().map(|(j, c)| format!("{c:e}*u^{j}")).collect();
                format!("f={}", terms.join("+"))
            }
            Equation::Nls { potential } => {
                let terms: Vec<String> = potential
                    .iter()
                    .map(|t| format!("{:e}*u^{}*ubar^{}", t.coeff, t.u_power, t.conj_power))
                    .collect();
                format!("dV={}", terms.join("+"))
            }
        };
        format!("{}[{body};{:?}]", self.name, self.dealias)
    }

    /// Sobolev translation of the scale index `l`.
    pub fn sobolev_label(&self, level: u32) -> String {
        match self.equation {
            Equation::Wave { .. } => format!("H^{} x H^{}", level + 1, level),
            Equation::Nls { .. } => format!("H^{}", 2 * level + 1),
        }
    }

    /// Mode grid `k = -kmax..=kmax` for this problem.
    ///
    /// NLS: `lambda_k = -i (2 pi k)^2` with base weight `(1 + (2 pi k)^2)^{1/2}`,
    /// so that `Y_l` is `H^{2l+1}`. Wave: blocks `[[0, 1], [-(2 pi k)^2, 0]]`
    /// (zero block at `k = 0`) with weights `(2 pi |k|, 1)` (`(1, 1)` at
    /// `k = 0`), so that `Y_l` is `H^{l+1} x H^l`.
    pub fn build_grid(&self, kmax: usize) -> Arc<ModeGrid> {
        let grid = match self.equation {
            Equation::Nls { .. } => ModeGrid::diagonal(
                kmax,
                |k| Complex64::new(0.0, -(2.0 * PI * k as f64).powi(2)),
                |k| (1.0 + (2.0 * PI * k as f64).powi(2)).sqrt(),
            ),
            Equation::Wave { .. } => ModeGrid::two_component(
                kmax,
                |k| {
                    let w2 = (2.0 * PI * k as f64).powi(2);
                    let zero = Complex64::new(0.0, 0.0);
                    let one = Complex64::new(if k == 0 { 0.0 } else { 1.0 }, 0.0);
                    [zero, one, Complex64::new(-w2, 0.0), zero]
                },
                |k| {
                    let w = if k == 0 { 1.0 } else { 2.0 * PI * (k as f64).abs() };
                    [w, 1.0]
                },
            ),
        };
        Arc::new(grid.expect("problem grids are normal by construction"))
    }

    fn layout(&self, grid: &ModeGrid, degree: usize) -> Layout {
        Layout::new(grid.kmax(), degree, self.dealias)
    }

    /// `B_m(u) = P_m B(u)`.
    pub fn evaluate_b_m(&self, u: &SpectralState, m: f64) -> Result<SpectralState> {
        self.check_grid(u)?;
        let grid = Arc::clone(u.grid());
        let n = grid.n_modes();
        let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
        match &self.equation {
            Equation::Nls { potential } => {
                if !potential.is_empty() {
                    let layout = self.layout(&grid, self.degree());
                    let phys = self.plans.to_physical(&layout, u.component(0));
                    let vals: Vec<Complex64> = phys
                        .iter()
                        .map(|&z| {
                            let s: Complex64 = potential
                                .iter()
                                .map(|t| z.powu(t.u_power) * z.conj().powu(t.conj_power) * t.coeff)
                                .sum();
                            Complex64::new(s.im, -s.re) // -i * s
                        })
                        .collect();
                    check_finite(&vals)?;
                    out.copy_from_slice(&self.plans.to_spectral(&layout, vals));
                }
            }
            Equation::Wave { f } => {
                let zero = grid.mode_index(0).expect("zero mode");
                out[zero] = u.component(1)[zero];
                if !f.is_empty() {
                    let layout = self.layout(&grid, self.degree());
                    let phys = self.plans.to_physical(&layout, u.component(0));
                    let vals: Vec<Complex64> = phys.iter().map(|&z| -horner(f, z)).collect();
                    check_finite(&vals)?;
                    out[n..].copy_from_slice(&self.plans.to_spectral(&layout, vals));
                }
            }
        }
        Ok(SpectralState::from_coeffs(grid, out)?.project(m))
    }

    /// Directional derivative `P_m DB(u)[du]`.
    pub fn evaluate_db_m(
        &self,
        u: &SpectralState,
        du: &SpectralState,
        m: f64,
    ) -> Result<SpectralState> {
        self.check_grid(u)?;
        self.check_grid(du)?;
        let grid = Arc::clone(u.grid());
        let n = grid.n_modes();
        let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
        match &self.equation {
            Equation::Nls { potential } => {
                if !potential.is_empty() {
                    let layout = self.layout(&grid, self.degree());
                    let phys = self.plans.to_physical(&layout, u.component(0));
                    let dphys = self.plans.to_physical(&layout, du.component(0));
                    let vals: Vec<Complex64> = phys
                        .iter()
                        .zip(&dphys)
                        .map(|(&z, &dz)| {
                            let s: Complex64 = potential
                                .iter()
                                .map(|t| {
                                    let (p, q) = (t.u_power, t.conj_power);
                                    let mut acc = Complex64::new(0.0, 0.0);
                                    if p > 0 {
                                        acc += z.powu(p - 1) * z.conj().powu(q) * dz * p as f64;
                                    }
                                    if q > 0 {
                                        acc += z.powu(p)
                                            * z.conj().powu(q - 1)
                                            * dz.conj()
                                            * q as f64;
                                    }
                                    acc * t.coeff
                                })
                                .sum();
                            Complex64::new(s.im, -s.re)
                        })
                        .collect();
                    check_finite(&vals)?;
                    out.copy_from_slice(&self.plans.to_spectral(&layout, vals));
                }
            }
            Equation::Wave { f } => {
                let zero = grid.mode_index(0).expect("zero mode");
                out[zero] = du.component(1)[zero];
                if f.len() > 1 {
                    let df: Vec<f64> = f
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(j, c)| c * j as f64)
                        .collect();
                    let layout = self.layout(&grid, self.degree());
                    let phys = self.plans.to_physical(&layout, u.component(0));
                    let dphys = self.plans.to_physical(&layout, du.component(0));
                    let vals: Vec<Complex64> = phys
                        .iter()
                        .zip(&dphys)
                        .map(|(&z, &dz)| -horner(&df, z) * dz)
                        .collect();
                    check_finite(&vals)?;
                    out[n..].copy_from_slice(&self.plans.to_spectral(&layout, vals));
                }
            }
        }
        Ok(SpectralState::from_coeffs(grid, out)?.project(m))
    }

    /// Exact flow of a linear problem, `None` when `B` is nonlinear.
    pub fn linear_flow(&self, u: &SpectralState, t: f64) -> Option<Result<SpectralState>> {
        if !self.is_linear() {
            return None;
        }
        Some(u.apply_semigroup(t).map(|mut out| {
            if let Equation::Wave { .. } = self.equation {
                // zero mode: u_0' = v_0, v_0' = 0
                let grid = Arc::clone(u.grid());
                let zero = grid.mode_index(0).expect("zero mode");
                let n = grid.n_modes();
                let v0 = u.coeffs()[n + zero];
                out.coeffs_mut()[zero] = u.coeffs()[zero] + v0 * t;
                out.coeffs_mut()[n + zero] = v0;
            }
            out
        }))
    }

    /// The conserved quantity: `L^2` mass for NLS, and for the wave equation
    /// the energy `int v^2/2 + u_x^2/2 + F(u)` with `F' = f`, `F(0) = 0`.
    pub fn invariant(&self, u: &SpectralState) -> f64 {
        match &self.equation {
            Equation::Nls { .. } => u.mass(),
            Equation::Wave { f } => {
                let grid = u.grid();
                let n = grid.n_modes();
                let mut energy = 0.0;
                for i in 0..n {
                    let w = 2.0 * PI * grid.wavenumber(i) as f64;
                    energy += 0.5 * u.component(1)[i].norm_sqr();
                    energy += 0.5 * (w * u.component(0)[i].norm()).powi(2);
                }
                if !f.is_empty() {
                    let antiderivative: Vec<f64> = std::iter::once(0.0)
                        .chain(f.iter().enumerate().map(|(j, c)| c / (j + 1) as f64))
                        .collect();
                    let layout = Layout::new(
                        grid.kmax(),
                        antiderivative.len(),
                        DealiasRule::ThreeHalvesPadding,
                    );
                    let phys = self.plans.to_physical(&layout, u.component(0));
                    let mean: Complex64 = phys.iter().map(|&z| horner(&antiderivative, z)).sum::<Complex64>()
                        / phys.len() as f64;
                    energy += mean.re;
                }
                energy
            }
        }
    }

    /// Largest observed ratio `||B(u) - B(w)||_{Y_0} / ||u - w||_{Y_0}` over
    /// random pairs in the `Y_0` ball of the given radius around `center`.
    pub fn lipschitz_probe(
        &self,
        center: &SpectralState,
        radius: f64,
        pairs: usize,
        seed: u64,
    ) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Arc::clone(center.grid());
        let random_point = |rng: &mut ChaCha8Rng| -> Result<SpectralState> {
            let coeffs = (0..grid.len())
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let dir = SpectralState::from_coeffs(Arc::clone(&grid), coeffs)?;
            let scale = radius * rng.random::<f64>() / dir.norm();
            Ok(center.axpy(Complex64::new(scale, 0.0), &dir))
        };
        let mut best = 0.0_f64;
        for _ in 0..pairs {
            let u = random_point(&mut rng)?;
            let w = random_point(&mut rng)?;
            let num = (&self.evaluate_b_m(&u, f64::INFINITY)?
                - &self.evaluate_b_m(&w, f64::INFINITY)?)
                .norm();
            let den = (&u - &w).norm();
            if den > 0.0 {
                best = best.max(num / den);
            }
        }
        Ok(best)
    }

    fn check_grid(&self, u: &SpectralState) -> Result<()> {
        if u.grid().components() != self.components() {
            return Err(Error::GridMismatch(format!(
                "{} expects {} components, state has {}",
                self.name,
                self.components(),
                u.grid().components()
            )));
        }
        Ok(())
    }
}

/// Convenience wrapper for [`Problem::evaluate_b_m`].
pub fn evaluate_b_m(p: &Problem, u: &SpectralState, m: f64) -> Result<SpectralState> {
    p.evaluate_b_m(u, m)
}

fn horner(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn check_finite(vals: &[Complex64]) -> Result<()> {
    if vals.iter().all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonlinearityOverflow)
    }
}
