use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Highest scale index `l` accepted by the `Y_l` norms.
pub const MAX_SCALE_INDEX: u32 = 8;

const NORMALITY_TOL: f64 = 1e-13;

/// Fourier modes `k = -kmax..=kmax` together with the action of the linear
/// operator `A` on each of them.
///
/// With `d = 1` the operator is a multiplier `lambda_k`. With `d = 2` it is a
/// `2 x 2` block per mode acting on the physical component layout. Each
/// component of each mode carries a base weight `w`, and the `Y_0` inner
/// product is `sum w^2 conj(x) y`; every block must be normal with respect to
/// that weighted product and both of its eigenvalues must share one modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    kmax: usize,
    components: usize,
    /// Row-major `d x d` block per mode.
    blocks: Vec<Complex64>,
    moduli: Vec<f64>,
    /// Component-major: `weights[c * n_modes + i]`.
    weights: Vec<f64>,
    omega: f64,
    imaginary_spectrum: bool,
}

impl ModeGrid {
    /// Grid for a diagonal operator, `eigenvalue(k)` and `weight(k)` per mode.
    pub fn diagonal(
        kmax: usize,
        mut eigenvalue: impl FnMut(i64) -> Complex64,
        mut weight: impl FnMut(i64) -> f64,
    ) -> Result<Self> {
        let n = 2 * kmax + 1;
        let mut blocks = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let k = i as i64 - kmax as i64;
            blocks.push(eigenvalue(k));
            weights.push(weight(k));
        }
        Self::assemble(kmax, 1, blocks, weights)
    }

    /// Grid for a `2 x 2` block operator; `block(k)` is row-major and
    /// `weight(k)` gives the base weights of the two components.
    pub fn two_component(
        kmax: usize,
        mut block: impl FnMut(i64) -> [Complex64; 4],
        mut weight: impl FnMut(i64) -> [f64; 2],
    ) -> Result<Self> {
        let n = 2 * kmax + 1;
        let mut blocks = Vec::with_capacity(4 * n);
        let mut weights = vec![0.0; 2 * n];
        for i in 0..n {
            let k = i as i64 - kmax as i64;
            blocks.extend_from_slice(&block(k));
            let [w0, w1] = weight(k);
            weights[i] = w0;
            weights[n + i] = w1;
        }
        Self::assemble(kmax, 2, blocks, weights)
    }

    fn assemble(
        kmax: usize,
        components: usize,
        blocks: Vec<Complex64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let n = 2 * kmax + 1;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("mode weights must be positive and finite"));
        }
        if blocks.iter().any(|z| !z.is_finite()) {
            return Err(Error::invalid("operator entries must be finite"));
        }
        let mut moduli = Vec::with_capacity(n);
        let mut omega = f64::NEG_INFINITY;
        let mut imaginary = true;
        for i in 0..n {
            let eigs: Vec<Complex64> = if components == 1 {
                vec![blocks[i]]
            } else {
                let b = &blocks[4 * i..4 * i + 4];
                let w = [weights[i], weights[n + i]];
                check_normal(b, w).map_err(|defect| {
                    Error::invalid(format!(
                        "block of mode k = {} is not normal (defect {defect:.3e})",
                        i as i64 - kmax as i64
                    ))
                })?;
                let (l0, l1) = linalg::eig2(&[b[0], b[1], b[2], b[3]]);
                if (l0.norm() - l1.norm()).abs() > 1e-12 * (1.0 + l0.norm()) {
                    return Err(Error::invalid(format!(
                        "block of mode k = {} has eigenvalues of different modulus",
                        i as i64 - kmax as i64
                    )));
                }
                vec![l0, l1]
            };
            let scale = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);
            for e in &eigs {
                omega = omega.max(e.re);
                imaginary &= e.re.abs() <= 1e-14 * (1.0 + scale);
            }
            moduli.push(scale);
        }
        Ok(Self {
            kmax,
            components,
            blocks,
            moduli,
            weights,
            omega,
            imaginary_spectrum: imaginary,
        })
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn n_modes(&self) -> usize {
        2 * self.kmax + 1
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Total number of coefficients, `d * n_modes`.
    pub fn len(&self) -> usize {
        self.components * self.n_modes()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn wavenumber(&self, mode: usize) -> i64 {
        mode as i64 - self.kmax as i64
    }

    pub fn mode_index(&self, k: i64) -> Option<usize> {
        let i = k + self.kmax as i64;
        (0..self.n_modes() as i64).contains(&i).then_some(i as usize)
    }

    /// Row-major `d x d` operator block of a mode.
    pub fn block(&self, mode: usize) -> &[Complex64] {
        let d2 = self.components * self.components;
        &self.blocks[d2 * mode..d2 * (mode + 1)]
    }

    /// Spectral radius of the mode's block, the `|lambda|` used by the
    /// projectors and the scale norms.
    pub fn modulus(&self, mode: usize) -> f64 {
        self.moduli[mode]
    }

    pub fn weight(&self, component: usize, mode: usize) -> f64 {
        self.weights[component * self.n_modes() + mode]
    }

    /// Upper bound on the real part of the spectrum.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Whether the whole spectrum lies on the imaginary axis, so that `e^{tA}`
    /// is a unitary group.
    pub fn has_imaginary_spectrum(&self) -> bool {
        self.imaginary_spectrum
    }

    /// Projector threshold that keeps exactly the modes `|k| <= kcut`.
    pub fn threshold_for_wavenumber(&self, kcut: usize) -> f64 {
        let kcut = kcut.min(self.kmax) as i64;
        (0..self.n_modes())
            .filter(|&i| self.wavenumber(i).abs() <= kcut)
            .map(|i| self.moduli[i])
            .fold(0.0, f64::max)
    }

    /// Number of modes kept by `P_m`.
    pub fn active_modes(&self, m: f64) -> usize {
        self.moduli.iter().filter(|&&l| l <= m).count()
    }

    /// `|A|^l` weight of a mode in the `Y_l` norm.
    pub(crate) fn scale_factor(&self, mode: usize, level: u32) -> f64 {
        let l = self.moduli[mode];
        if l <= 1.0 {
            1.0
        } else {
            l.powi(level as i32)
        }
    }

    /// Largest normality defect `||N N* - N* N||` over all blocks, with
    /// `N = D M D^{-1}` in weighted coordinates.
    pub fn normality_defect(&self) -> f64 {
        if self.components == 1 {
            return 0.0;
        }
        let n = self.n_modes();
        (0..n)
            .map(|i| normal_defect(self.block(i), [self.weights[i], self.weights[n + i]]))
            .fold(0.0, f64::max)
    }
}

fn normal_defect(b: &[Complex64], w: [f64; 2]) -> f64 {
    // N = D B D^{-1}
    let n = [b[0], b[1] * (w[0] / w[1]), b[2] * (w[1] / w[0]), b[3]];
    let adj = [n[0].conj(), n[2].conj(), n[1].conj(), n[3].conj()];
    let mul = |x: &[Complex64; 4], y: &[Complex64; 4]| {
        [
            x[0] * y[0] + x[1] * y[2],
            x[0] * y[1] + x[1] * y[3],
            x[2] * y[0] + x[3] * y[2],
            x[2] * y[1] + x[3] * y[3],
        ]
    };
    let l = mul(&n, &adj);
    let r = mul(&adj, &n);
    let scale = n.iter().map(|z| z.norm_sqr()).sum::<f64>().max(1.0);
    l.iter()
        .zip(&r)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / scale
}

fn check_normal(b: &[Complex64], w: [f64; 2]) -> std::result::Result<(), f64> {
    let defect = normal_defect(b, w);
    if defect <= NORMALITY_TOL {
        Ok(())
    } else {
        Err(defect)
    }
}
