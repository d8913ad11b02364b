use std::ops::{Add, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use super::grid::{ModeGrid, MAX_SCALE_INDEX};
use crate::error::{Error, Result};
use crate::linalg;

/// Fourier coefficients of a `d`-component field on a [`ModeGrid`].
///
/// Coefficients are stored component-major: entry `c * n_modes + i` belongs
/// to component `c` and wavenumber `k = i - kmax`. The physical field is
/// `u_c(x) = sum_k coeff(c, k) e^{2 pi i k x}` on the unit periodic interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    grid: Arc<ModeGrid>,
    coeffs: Vec<Complex64>,
}

impl SpectralState {
    pub fn zeros(grid: Arc<ModeGrid>) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid, coeffs }
    }

    pub fn from_coeffs(grid: Arc<ModeGrid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients supplied for a grid of {}",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Arc<ModeGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.n_modes();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn coeff(&self, component: usize, k: i64) -> Option<Complex64> {
        let i = self.grid.mode_index(k)?;
        (component < self.grid.components()).then(|| self.coeffs[component * self.grid.n_modes() + i])
    }

    /// Returns a copy with one coefficient replaced. Panics if `(component, k)`
    /// is not on the grid.
    pub fn with_coeff(mut self, component: usize, k: i64, value: Complex64) -> Self {
        let i = self.grid.mode_index(k).expect("wavenumber on grid");
        assert!(component < self.grid.components(), "component on grid");
        let n = self.grid.n_modes();
        self.coeffs[component * n + i] = value;
        self
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    fn assert_same_grid(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.grid, &other.grid)
                || (self.grid.kmax() == other.grid.kmax()
                    && self.grid.components() == other.grid.components()),
            "states live on different grids"
        );
    }

    fn map_modes(&self, mut f: impl FnMut(usize, &mut [Complex64])) -> Self {
        let n = self.grid.n_modes();
        let d = self.grid.components();
        let mut out = self.clone();
        let mut local = vec![Complex64::new(0.0, 0.0); d];
        for i in 0..n {
            for c in 0..d {
                local[c] = self.coeffs[c * n + i];
            }
            f(i, &mut local);
            for c in 0..d {
                out.coeffs[c * n + i] = local[c];
            }
        }
        out
    }

    /// `||u||_{Y_l} = (||P u||^2 + || |A|^l Q u ||^2)^{1/2}` where `P` keeps
    /// modes with `|lambda| <= 1`.
    pub fn scale_norm(&self, level: u32) -> f64 {
        assert!(
            level <= MAX_SCALE_INDEX,
            "scale index {level} exceeds {MAX_SCALE_INDEX}"
        );
        let n = self.grid.n_modes();
        let mut sum = 0.0;
        for c in 0..self.grid.components() {
            for i in 0..n {
                let w = self.grid.weight(c, i) * self.grid.scale_factor(i, level);
                sum += (w * self.coeffs[c * n + i].norm()).powi(2);
            }
        }
        sum.sqrt()
    }

    /// The `Y_0` norm.
    pub fn norm(&self) -> f64 {
        self.scale_norm(0)
    }

    /// `Y_0` inner product, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.assert_same_grid(other);
        let n = self.grid.n_modes();
        let mut sum = Complex64::new(0.0, 0.0);
        for c in 0..self.grid.components() {
            for i in 0..n {
                let w = self.grid.weight(c, i);
                sum += self.coeffs[c * n + i].conj() * other.coeffs[c * n + i] * (w * w);
            }
        }
        sum
    }

    /// `sum_k |u_k|^2` of the first component, i.e. the `L^2` mass of the field.
    pub fn mass(&self) -> f64 {
        self.component(0).iter().map(|z| z.norm_sqr()).sum()
    }

    /// `P_m u`: zero every mode with `|lambda| > m`.
    pub fn project(&self, m: f64) -> Self {
        assert!(m > 0.0, "projector threshold must be positive");
        let mut out = self.clone();
        let n = self.grid.n_modes();
        for i in (0..n).filter(|&i| self.grid.modulus(i) > m) {
            for c in 0..self.grid.components() {
                out.coeffs[c * n + i] = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// `Q_m u = u - P_m u`: keep only the modes with `|lambda| > m`.
    pub fn remainder(&self, m: f64) -> Self {
        assert!(m > 0.0, "projector threshold must be positive");
        let mut out = self.clone();
        let n = self.grid.n_modes();
        for i in (0..n).filter(|&i| self.grid.modulus(i) <= m) {
            for c in 0..self.grid.components() {
                out.coeffs[c * n + i] = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    pub fn apply_a(&self) -> Self {
        let grid = Arc::clone(&self.grid);
        let d = grid.components();
        self.map_modes(|i, x| {
            let b = grid.block(i);
            if d == 1 {
                x[0] *= b[0];
            } else {
                let (x0, x1) = (x[0], x[1]);
                x[0] = b[0] * x0 + b[1] * x1;
                x[1] = b[2] * x0 + b[3] * x1;
            }
        })
    }

    /// `e^{tA} u`, exact per mode. Negative times are accepted only when the
    /// spectrum is purely imaginary (group case).
    pub fn apply_semigroup(&self, t: f64) -> Result<Self> {
        if t == 0.0 {
            return Ok(self.clone());
        }
        if t < 0.0 && !self.grid.has_imaginary_spectrum() {
            return Err(Error::invalid(
                "backward propagation needs a purely imaginary spectrum",
            ));
        }
        let grid = Arc::clone(&self.grid);
        let d = grid.components();
        Ok(self.map_modes(|i, x| {
            let b = grid.block(i);
            if d == 1 {
                x[0] *= (b[0] * t).exp();
            } else {
                let e = linalg::expm2(&[b[0], b[1], b[2], b[3]], t);
                let (x0, x1) = (x[0], x[1]);
                x[0] = e[0] * x0 + e[1] * x1;
                x[1] = e[2] * x0 + e[3] * x1;
            }
        }))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|z| *z *= factor);
        out
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: Complex64, other: &Self) -> Self {
        self.assert_same_grid(other);
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
        out
    }

    /// Largest `|coeff(c, -k) - conj(coeff(c, k))|`; zero for the spectrum of a
    /// real field.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.grid.n_modes();
        let mut worst = 0.0_f64;
        for c in 0..self.grid.components() {
            for i in 0..n {
                let mirror = n - 1 - i;
                let defect = (self.coeffs[c * n + mirror] - self.coeffs[c * n + i].conj()).norm();
                worst = worst.max(defect);
            }
        }
        worst
    }

    /// Copies the coefficients onto another grid with the same component count,
    /// truncating or zero-padding in wavenumber.
    pub fn resample(&self, target: Arc<ModeGrid>) -> Result<Self> {
        if target.components() != self.grid.components() {
            return Err(Error::GridMismatch(
                "cannot resample across component counts".into(),
            ));
        }
        let mut out = Self::zeros(Arc::clone(&target));
        let (n_src, n_dst) = (self.grid.n_modes(), target.n_modes());
        for c in 0..target.components() {
            for i in 0..n_src {
                if let Some(j) = target.mode_index(self.grid.wavenumber(i)) {
                    out.coeffs[c * n_dst + j] = self.coeffs[c * n_src + i];
                }
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.is_finite())
    }
}

impl Add for &SpectralState {
    type Output = SpectralState;

    fn add(self, rhs: &SpectralState) -> SpectralState {
        self.axpy(Complex64::new(1.0, 0.0), rhs)
    }
}

impl Sub for &SpectralState {
    type Output = SpectralState;

    fn sub(self, rhs: &SpectralState) -> SpectralState {
        self.axpy(Complex64::new(-1.0, 0.0), rhs)
    }
}
