//! Small dense helpers shared by the tableau and integrator modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) type CMatrix = DMatrix<Complex64>;

pub(crate) fn singular_values(m: &CMatrix) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub(crate) fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Operator norm induced by the max-over-blocks convention: the matrix is
/// viewed as `n x n` blocks of size `d`, each block measured in the spectral
/// norm, and the row sums of block norms are maximized.
pub(crate) fn block_inf_norm(m: &CMatrix, d: usize) -> f64 {
    let n = m.nrows() / d;
    let mut best = 0.0_f64;
    for bi in 0..n {
        let mut row = 0.0;
        for bj in 0..n {
            let block = m.view((bi * d, bj * d), (d, d)).into_owned();
            row += spectral_norm(&block);
        }
        best = best.max(row);
    }
    best
}

pub(crate) fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Eigenvalues of a 2x2 complex matrix given row-major.
pub(crate) fn eig2(m: &[Complex64; 4]) -> (Complex64, Complex64) {
    let mu = (m[0] + m[3]) * 0.5;
    let det = m[0] * m[3] - m[1] * m[2];
    let delta = (mu * mu - det).sqrt();
    (mu + delta, mu - delta)
}

/// `exp(t M)` for a 2x2 complex matrix, from the closed form
/// `e^{t mu} (cosh(t delta) I + sinh(t delta)/delta (M - mu I))`.
pub(crate) fn expm2(m: &[Complex64; 4], t: f64) -> [Complex64; 4] {
    let mu = (m[0] + m[3]) * 0.5;
    let det = m[0] * m[3] - m[1] * m[2];
    let delta = (mu * mu - det).sqrt();
    let td = delta * t;
    let cosh = td.cosh();
    // sinh(t delta)/delta, continuous through delta = 0
    let sinhc = if td.norm() < 1e-6 {
        let td2 = td * td;
        (Complex64::new(1.0, 0.0) + td2 / 6.0 + td2 * td2 / 120.0) * t
    } else {
        td.sinh() / delta
    };
    let scale = (mu * t).exp();
    [
        scale * (cosh + sinhc * (m[0] - mu)),
        scale * sinhc * m[1],
        scale * sinhc * m[2],
        scale * (cosh + sinhc * (m[3] - mu)),
    ]
}
