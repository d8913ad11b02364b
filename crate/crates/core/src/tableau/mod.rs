//! Butcher tableaus for implicit Runge-Kutta methods.
//!
//! An `s`-stage method is given by its coefficient matrix `alpha`, weights `b`
//! and nodes `c`:
//!
//! ```text
//! c_1 | a_11 ... a_1s
//!  .  |
//! c_s | a_s1 ... a_ss
//! ----|--------------
//!     | b_1  ... b_s
//! ```
//!
//! Besides construction (Gauss-Legendre collocation in particular) this module
//! evaluates the stability function `S(z) = 1 + z b^T (id - z alpha)^{-1} 1`
//! and certifies the two A-stability conditions used throughout the crate:
//! `|S(z)| <= 1` on the closed left half-plane, and invertibility of
//! `id - z alpha` there.

mod format;
mod order;

pub use format::{parse_tableau, write_tableau};
pub use order::{rooted_trees, verify_order_conditions, OrderCheck, RootedTree, TreeResidual};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Largest stage count accepted by [`gauss_legendre`].
pub const MAX_GAUSS_STAGES: usize = 6;

const ROW_SUM_TOL: f64 = 1e-13;
const NODE_TOL: f64 = 1e-14;
/// Condition number beyond which `id - z alpha` counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    stages: usize,
    /// Row-major `s x s` coefficient matrix.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    order: usize,
}

impl ButcherTableau {
    /// Builds a tableau from explicit coefficients.
    ///
    /// Shapes must agree and every entry must be finite. The collocation
    /// consistency `c_i = sum_j a_ij` is *not* enforced here since control
    /// tableaus may violate it; see [`ButcherTableau::row_sum_defect`].
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>, order: usize) -> Result<Self> {
        let s = b.len();
        if s == 0 {
            return Err(Error::invalid("tableau needs at least one stage"));
        }
        if c.len() != s || a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::invalid(format!(
                "inconsistent tableau shapes: b has {s} entries, c has {}, alpha has {} rows",
                c.len(),
                a.len()
            )));
        }
        let flat: Vec<f64> = a.into_iter().flatten().collect();
        if flat.iter().chain(&b).chain(&c).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tableau coefficients must be finite"));
        }
        Ok(Self {
            stages: s,
            a: flat,
            b,
            c,
            order,
        })
    }

    /// Forward Euler, `alpha = [[0]]`, `b = [1]`. Used as the explicit control
    /// method in stability experiments.
    pub fn explicit_euler() -> Self {
        Self::new(vec![vec![0.0]], vec![1.0], vec![0.0], 1).expect("valid tableau")
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn alpha(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.stages, self.stages, &self.a)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.stages).map(|r| r.to_vec()).collect()
    }

    /// `max_i |c_i - sum_j a_ij|`.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.stages)
            .map(|i| {
                let sum: f64 = (0..self.stages).map(|j| self.a(i, j)).sum();
                (self.c[i] - sum).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_row_sum_consistent(&self) -> bool {
        self.row_sum_defect() <= ROW_SUM_TOL
    }

    pub fn alpha_eigenvalues(&self) -> Vec<Complex64> {
        self.alpha().complex_eigenvalues().iter().copied().collect()
    }

    /// Operator infinity norm of `alpha` (maximum absolute row sum), the norm
    /// induced by measuring stage vectors with the maximum over stages.
    pub fn alpha_norm(&self) -> f64 {
        self.a
            .chunks(self.stages)
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub(crate) fn resolvent_matrix(&self, z: Complex64) -> CMatrix {
        let s = self.stages;
        CMatrix::from_fn(s, s, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) - z * self.a(i, j)
        })
    }
}

/// The `s`-stage Gauss-Legendre collocation method, of classical order `2s`.
pub fn gauss_legendre(s: usize) -> Result<ButcherTableau> {
    if !(1..=MAX_GAUSS_STAGES).contains(&s) {
        return Err(Error::invalid(format!(
            "Gauss-Legendre stage count must lie in 1..={MAX_GAUSS_STAGES}, got {s}"
        )));
    }
    let (x, w) = legendre_nodes(s);
    let c: Vec<f64> = x.iter().map(|xi| 0.5 * (xi + 1.0)).collect();
    let b: Vec<f64> = w.iter().map(|wi| 0.5 * wi).collect();

    // a_ij = int_0^{c_i} l_j(t) dt, evaluated with the s-point Gauss rule
    // mapped onto [0, c_i]; exact since l_j has degree s - 1.
    let mut a = vec![vec![0.0; s]; s];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = c[i]
                * (0..s)
                    .map(|q| b[q] * lagrange_basis(&c, j, c[i] * c[q]))
                    .sum::<f64>();
        }
    }
    ButcherTableau::new(a, b, c, 2 * s)
}

fn lagrange_basis(nodes: &[f64], j: usize, t: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(q, _)| q != j)
        .map(|(_, &xq)| (t - xq) / (nodes[j] - xq))
        .product()
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub(crate) fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nodes = newton_nodes(n).unwrap_or_else(|| companion_nodes(n));
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, dp) = legendre(n, x);
            2.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    (nodes, weights)
}

fn newton_nodes(n: usize) -> Option<Vec<f64>> {
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NODE_TOL {
                converged = true;
                break;
            }
        }
        if !converged || !x.is_finite() {
            return None;
        }
        nodes.push(x);
    }
    let distinct = nodes.windows(2).all(|w| w[1] - w[0] > 1e-8);
    distinct.then_some(nodes)
}

/// Fallback: eigenvalues of the companion matrix of the monic Legendre
/// polynomial, polished by a few Newton steps.
fn companion_nodes(n: usize) -> Vec<f64> {
    // Monic recurrence q_{k+1} = x q_k - k^2/(4k^2-1) q_{k-1}, i.e. the
    // symmetric tridiagonal Jacobi matrix with off-diagonals k/sqrt(4k^2-1).
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = legendre(n, *x);
            *x -= p / dp;
        }
    }
    nodes
}

/// `S(z) = 1 + z b^T (id - z alpha)^{-1} 1` by a dense solve.
pub fn stability_function(t: &ButcherTableau, z: Complex64) -> Result<Complex64> {
    let m = t.resolvent_matrix(z);
    if linalg::condition_number(&m) > SINGULAR_CONDITION {
        return Err(Error::SingularResolvent { z });
    }
    let ones = nalgebra::DVector::from_element(t.stages, Complex64::new(1.0, 0.0));
    let x = m.lu().solve(&ones).ok_or(Error::SingularResolvent { z })?;
    let bx: Complex64 = t.b.iter().zip(x.iter()).map(|(bi, xi)| xi * *bi).sum();
    Ok(Complex64::new(1.0, 0.0) + z * bx)
}

/// Finite sample of the closed left half-plane used to certify A-stability.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    /// Largest `|z|` sampled.
    pub radius: f64,
    /// Number of samples on the imaginary axis, spread over `[-radius, radius]`.
    pub axis_samples: usize,
    /// The interior grid is `interior x interior` points, log-spaced in both
    /// `-Re z` and `|Im z|`.
    pub interior: usize,
}

impl Default for StabilityGrid {
    fn default() -> Self {
        Self {
            radius: 1e4,
            axis_samples: 2048,
            interior: 64,
        }
    }
}

impl StabilityGrid {
    fn axis_points(&self) -> Vec<Complex64> {
        // asinh spacing: dense near the origin, reaching +-radius.
        let top = self.radius.asinh();
        let n = self.axis_samples.max(2);
        (0..n)
            .map(|j| {
                let t = -top + 2.0 * top * j as f64 / (n - 1) as f64;
                Complex64::new(0.0, t.sinh())
            })
            .collect()
    }

    fn interior_points(&self) -> Vec<Complex64> {
        let n = self.interior.max(2);
        let lo = -4.0_f64;
        let hi = self.radius.log10();
        let logspace: Vec<f64> = (0..n)
            .map(|j| 10f64.powf(lo + (hi - lo) * j as f64 / (n - 1) as f64))
            .collect();
        let half = n / 2;
        let ys: Vec<f64> = logspace
            .iter()
            .step_by(2)
            .take(half)
            .flat_map(|&y| [y, -y])
            .collect();
        logspace
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| Complex64::new(-x, y)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub max_modulus_on_imaginary_axis: f64,
    pub max_modulus_on_left_half_grid: f64,
    pub min_singular_value: f64,
    /// Smallest real part among the eigenvalues of `alpha`.
    pub min_alpha_eigenvalue_real: f64,
    /// Samples where the resolvent was numerically singular.
    pub singular_samples: Vec<Complex64>,
    /// `(RK1)` from the full sample (axis and interior).
    pub rk1: Verdict,
    /// `(RK1)` from the imaginary axis alone; sound when `(RK2)` holds since
    /// `S` is then analytic in the left half-plane.
    pub rk1_boundary: Verdict,
    /// `(RK2)`: grid invertibility and all eigenvalues of `alpha` in the open
    /// right half-plane.
    pub rk2: Verdict,
    /// Exact equivalent of `(RK2)` alone: every nonzero eigenvalue of `alpha`
    /// has positive real part. Differs from `rk2` only for singular `alpha`.
    pub rk2_exact: Verdict,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.rk1.passed() && self.rk2.passed()
    }
}

const RK1_TOL: f64 = 1e-10;
const RK2_MIN_SV: f64 = 1e-12;

pub fn verify_a_stability(t: &ButcherTableau, grid: &StabilityGrid) -> StabilityReport {
    let mut singular = Vec::new();
    let mut min_sv = f64::INFINITY;
    let mut sweep = |points: Vec<Complex64>| -> f64 {
        let mut max_mod = 0.0_f64;
        for z in points {
            let m = t.resolvent_matrix(z);
            let sv = linalg::singular_values(&m)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            min_sv = min_sv.min(sv);
            match stability_function(t, z) {
                Ok(s) => max_mod = max_mod.max(s.norm()),
                Err(_) => singular.push(z),
            }
        }
        max_mod
    };
    let axis = sweep(grid.axis_points());
    let interior = sweep(grid.interior_points());

    let eigs = t.alpha_eigenvalues();
    let min_re = eigs.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
    let strictly_positive = eigs.iter().all(|e| e.re > 0.0);
    let nonzero_positive = eigs.iter().all(|e| e.norm() <= 1e-14 || e.re > 0.0);
    let grid_invertible = singular.is_empty() && min_sv > RK2_MIN_SV;

    StabilityReport {
        max_modulus_on_imaginary_axis: axis,
        max_modulus_on_left_half_grid: interior,
        min_singular_value: min_sv,
        min_alpha_eigenvalue_real: min_re,
        rk1: Verdict::from_bool(
            singular.is_empty() && axis <= 1.0 + RK1_TOL && interior <= 1.0 + RK1_TOL,
        ),
        rk1_boundary: Verdict::from_bool(singular.is_empty() && axis <= 1.0 + RK1_TOL),
        rk2: Verdict::from_bool(grid_invertible && strictly_positive),
        rk2_exact: Verdict::from_bool(nonzero_positive),
        singular_samples: singular,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Independent oracle: roots of the shifted Legendre polynomial of degree
    // two, 6t^2 - 6t + 1, from the quadratic formula.
    #[test]
    fn gauss_two_stage_nodes() {
        let t = gauss_legendre(2).unwrap();
        let disc = (36.0_f64 - 24.0).sqrt();
        let roots = [(6.0 - disc) / 12.0, (6.0 + disc) / 12.0];
        assert!((t.c()[0] - roots[0]).abs() < 1e-15);
        assert!((t.c()[1] - roots[1]).abs() < 1e-15);
        assert!((t.c()[0] - (0.5 - 3f64.sqrt() / 6.0)).abs() < 1e-15);
        assert!(t.b().iter().all(|b| (b - 0.5).abs() < 1e-15));
        assert_eq!(t.order(), 4);
    }

    #[test]
    fn gauss_one_stage_is_midpoint() {
        let t = gauss_legendre(1).unwrap();
        assert!((t.a(0, 0) - 0.5).abs() < 1e-16);
        assert_eq!(t.b(), &[1.0]);
        assert!((t.c()[0] - 0.5).abs() < 1e-16);
        assert_eq!(t.order(), 2);
    }

    #[test]
    fn gauss_stage_range() {
        assert!(matches!(gauss_legendre(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(gauss_legendre(7), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gauss_weights_and_row_sums() {
        for s in 1..=MAX_GAUSS_STAGES {
            let t = gauss_legendre(s).unwrap();
            let sum: f64 = t.b().iter().sum();
            assert!((sum - 1.0).abs() < 1e-14, "s = {s}");
            assert!(t.is_row_sum_consistent(), "s = {s}: {}", t.row_sum_defect());
        }
    }

    #[test]
    fn companion_fallback_agrees_with_newton() {
        for s in 1..=MAX_GAUSS_STAGES {
            let a = newton_nodes(s).unwrap();
            let b = companion_nodes(s);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-14, "s = {s}");
            }
        }
    }

    #[test]
    fn gauss_alpha_eigenvalues_in_right_half_plane() {
        for s in 1..=MAX_GAUSS_STAGES {
            let t = gauss_legendre(s).unwrap();
            assert!(t.alpha_eigenvalues().iter().all(|e| e.re > 0.0));
        }
    }

    #[test]
    fn stability_function_values() {
        let g1 = gauss_legendre(1).unwrap();
        assert_eq!(stability_function(&g1, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        // (1 + z/2)/(1 - z/2) vanishes at z = -2
        assert!(stability_function(&g1, c(-2.0, 0.0)).unwrap().norm() < 1e-15);

        let g2 = gauss_legendre(2).unwrap();
        for y in [0.1, 1.0, 10.0, 1000.0] {
            let s = stability_function(&g2, c(0.0, y)).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12, "y = {y}");
        }
    }

    #[test]
    fn singular_resolvent_is_reported() {
        // alpha = [[1/2]] is singular at z = 2.
        let g1 = gauss_legendre(1).unwrap();
        let z = c(2.0, 0.0);
        assert_eq!(
            stability_function(&g1, z),
            Err(Error::SingularResolvent { z })
        );
    }

    #[test]
    fn explicit_euler_fails_rk1() {
        let t = ButcherTableau::explicit_euler();
        let s = stability_function(&t, c(-3.0, 0.0)).unwrap();
        assert!((s.norm() - 2.0).abs() < 1e-15);
        let report = verify_a_stability(&t, &StabilityGrid::default());
        assert_eq!(report.rk1, Verdict::Fail);
        assert_eq!(report.rk1_boundary, Verdict::Fail);
        // alpha is singular: strict criterion fails, bare invertibility holds
        assert_eq!(report.rk2, Verdict::Fail);
        assert_eq!(report.rk2_exact, Verdict::Pass);
    }

    #[test]
    fn gauss_methods_are_a_stable() {
        for s in 1..=3 {
            let t = gauss_legendre(s).unwrap();
            let report = verify_a_stability(&t, &StabilityGrid::default());
            assert!(report.passed(), "s = {s}: {report:?}");
            assert!(report.rk1_boundary.passed());
            assert!((report.max_modulus_on_imaginary_axis - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rk2_grid_and_eigenvalue_criteria_agree() {
        let tableaus = [
            gauss_legendre(1).unwrap(),
            gauss_legendre(2).unwrap(),
            gauss_legendre(3).unwrap(),
            ButcherTableau::explicit_euler(),
        ];
        for t in &tableaus {
            let r = verify_a_stability(t, &StabilityGrid::default());
            let grid_ok = r.singular_samples.is_empty() && r.min_singular_value > 1e-12;
            assert_eq!(grid_ok, r.rk2_exact.passed());
        }
    }

    #[test]
    fn shape_validation() {
        assert!(ButcherTableau::new(vec![vec![0.0, 1.0]], vec![1.0], vec![0.0], 1).is_err());
        assert!(ButcherTableau::new(vec![], vec![], vec![], 1).is_err());
        assert!(ButcherTableau::new(vec![vec![f64::NAN]], vec![1.0], vec![0.0], 1).is_err());
    }

    proptest! {
        #[test]
        fn stability_function_commutes_with_conjugation(
            re in -50.0..0.0f64, im in -50.0..50.0f64, s in 1usize..=4
        ) {
            let t = gauss_legendre(s).unwrap();
            let z = c(re, im);
            let lhs = stability_function(&t, z.conj()).unwrap();
            let rhs = stability_function(&t, z).unwrap().conj();
            prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + rhs.norm()));
        }
    }
}
