use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::spectral::ModeGrid;
use crate::tableau::{ButcherTableau, SINGULAR_CONDITION};

/// Per-mode factorizations of `id - h (alpha (x) A_k)` for one
/// `(tableau, grid, h)`, stored as the four products the stage map needs.
///
/// With `R = (id - h alpha (x) A_k)^{-1}` and `n = s d`:
///
/// - `E = R (1 (x) id)` (`n x d`) maps `P_m u` to the stage initial term,
/// - `F = h R (alpha (x) id)` (`n x n`) maps stage nonlinearities to stages,
/// - `G = h (b^T (x) id) R` (`d x n`) maps stage nonlinearities to the update,
/// - `S = id + h (b^T (x) A_k) E` (`d x d`) is the stability function `S(h A_k)`.
#[derive(Debug, Clone)]
pub struct ResolventCache {
    tableau: ButcherTableau,
    grid: Arc<ModeGrid>,
    h: f64,
    e: Vec<Complex64>,
    f: Vec<Complex64>,
    g: Vec<Complex64>,
    s_mat: Vec<Complex64>,
    lambda_obs: f64,
    shifted_obs: f64,
    max_condition: f64,
}

pub fn build_resolvent_cache(
    t: &ButcherTableau,
    grid: &Arc<ModeGrid>,
    h: f64,
) -> Result<ResolventCache> {
    if !(h.is_finite() && h >= 0.0) {
        return Err(Error::invalid(format!("step size must be finite and >= 0, got {h}")));
    }
    let s = t.stages();
    let d = grid.components();
    let n = s * d;
    let modes = grid.n_modes();
    let mut cache = ResolventCache {
        tableau: t.clone(),
        grid: Arc::clone(grid),
        h,
        e: Vec::with_capacity(modes * n * d),
        f: Vec::with_capacity(modes * n * n),
        g: Vec::with_capacity(modes * d * n),
        s_mat: Vec::with_capacity(modes * d * d),
        lambda_obs: 0.0,
        shifted_obs: 0.0,
        max_condition: 0.0,
    };
    let one = Complex64::new(1.0, 0.0);
    for mode in 0..modes {
        let block = grid.block(mode);
        let m = CMatrix::from_fn(n, n, |r, q| {
            let (j, c) = (r / d, r % d);
            let (l, c2) = (q / d, q % d);
            let id = if r == q { one } else { Complex64::new(0.0, 0.0) };
            id - block[c * d + c2] * (h * t.a(j, l))
        });
        let inverse = m.clone().try_inverse();
        let cond = match &inverse {
            Some(inv) => inf_norm(&m) * inf_norm(inv),
            None => f64::INFINITY,
        };
        let Some(r) = inverse.filter(|_| cond.is_finite() && cond <= SINGULAR_CONDITION) else {
            let lambda = linalg::eig2(&pad4(block, d)).0;
            return Err(Error::SingularModeResolvent {
                mode: grid.wavenumber(mode),
                h_lambda: lambda * h,
            });
        };
        cache.max_condition = cache.max_condition.max(cond);

        // observed norms in weighted coordinates, max-over-stages convention
        let w: Vec<f64> = (0..n).map(|r| grid.weight(r % d, mode)).collect();
        let weighted = CMatrix::from_fn(n, n, |a, b| r[(a, b)] * (w[a] / w[b]));
        cache.lambda_obs = cache.lambda_obs.max(linalg::block_inf_norm(&weighted, d));
        let shifted = &weighted - CMatrix::identity(n, n);
        cache.shifted_obs = cache.shifted_obs.max(linalg::block_inf_norm(&shifted, d));

        for row in 0..n {
            for c2 in 0..d {
                cache
                    .e
                    .push((0..s).map(|l| r[(row, l * d + c2)]).sum::<Complex64>());
            }
        }
        for row in 0..n {
            for q in 0..n {
                let (l, c2) = (q / d, q % d);
                let v: Complex64 = (0..s).map(|j| r[(row, j * d + c2)] * t.a(j, l)).sum();
                cache.f.push(v * h);
            }
        }
        for c in 0..d {
            for q in 0..n {
                let v: Complex64 = (0..s).map(|j| r[(j * d + c, q)] * t.b()[j]).sum();
                cache.g.push(v * h);
            }
        }
        let base = cache.e.len() - n * d;
        for c in 0..d {
            for c2 in 0..d {
                let mut v = if c == c2 { one } else { Complex64::new(0.0, 0.0) };
                for j in 0..s {
                    for c3 in 0..d {
                        v += block[c * d + c3] * cache.e[base + (j * d + c3) * d + c2] * (h * t.b()[j]);
                    }
                }
                cache.s_mat.push(v);
            }
        }
    }
    Ok(cache)
}

fn inf_norm(m: &CMatrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn pad4(block: &[Complex64], d: usize) -> [Complex64; 4] {
    if d == 1 {
        [block[0], Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), block[0]]
    } else {
        [block[0], block[1], block[2], block[3]]
    }
}

impl ResolventCache {
    pub fn tableau(&self) -> &ButcherTableau {
        &self.tableau
    }

    pub fn grid(&self) -> &Arc<ModeGrid> {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `Lambda_obs`: largest mode-wise `||(id - h alpha A)^{-1}||`.
    pub fn lambda_obs(&self) -> f64 {
        self.lambda_obs
    }

    /// Largest mode-wise `||h alpha A (id - h alpha A)^{-1}||`, computed as
    /// `||R - id||`.
    pub fn shifted_resolvent_obs(&self) -> f64 {
        self.shifted_obs
    }

    /// Whether `||h alpha A R|| <= 1 + Lambda_obs` holds (to 1e-10).
    pub fn shifted_bound_holds(&self) -> bool {
        self.shifted_obs <= 1.0 + self.lambda_obs + 1e-10
    }

    pub fn max_condition(&self) -> f64 {
        self.max_condition
    }

    pub fn matches(&self, t: &ButcherTableau, grid: &Arc<ModeGrid>, h: f64) -> bool {
        self.h == h
            && self.tableau == *t
            && (Arc::ptr_eq(&self.grid, grid) || *self.grid == **grid)
    }

    fn dims(&self) -> (usize, usize) {
        let d = self.grid.components();
        (self.tableau.stages() * d, d)
    }

    pub(crate) fn e(&self, mode: usize) -> &[Complex64] {
        let (n, d) = self.dims();
        &self.e[mode * n * d..(mode + 1) * n * d]
    }

    pub(crate) fn f(&self, mode: usize) -> &[Complex64] {
        let (n, _) = self.dims();
        &self.f[mode * n * n..(mode + 1) * n * n]
    }

    pub(crate) fn g(&self, mode: usize) -> &[Complex64] {
        let (n, d) = self.dims();
        &self.g[mode * d * n..(mode + 1) * d * n]
    }

    /// Row-major `S(h A_k)`.
    pub fn stability_block(&self, mode: usize) -> &[Complex64] {
        let d = self.grid.components();
        &self.s_mat[mode * d * d..(mode + 1) * d * d]
    }
}
