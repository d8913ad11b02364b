use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::equations::Problem;
use crate::error::{Error, Result};
use crate::spectral::SpectralState;
use crate::tableau::ButcherTableau;

const MAX_UNKNOWNS: usize = 4096;
const NEWTON_ITERATIONS: usize = 30;

/// One Runge-Kutta step computed by Newton's method on the full stage system
/// `W_j = P_m u + h sum_l alpha_jl (A W_l + B_m(W_l))` over all active
/// coefficients at once, realified, with the exact Jacobian from
/// `DB_m`. An independent check of [`super::rk_step`] for small grids.
pub fn dense_stage_step(
    p: &Problem,
    t: &ButcherTableau,
    u: &SpectralState,
    m: f64,
    h: f64,
) -> Result<SpectralState> {
    let grid = u.grid().clone();
    let (n, d, s) = (grid.n_modes(), grid.components(), t.stages());
    let active: Vec<usize> = (0..d)
        .flat_map(|c| (0..n).filter(|&i| grid.modulus(i) <= m).map(move |i| c * n + i))
        .collect();
    let na = active.len();
    let dim = 2 * s * na;
    if dim > MAX_UNKNOWNS {
        return Err(Error::invalid(format!(
            "dense stage solve limited to {MAX_UNKNOWNS} real unknowns, needs {dim}"
        )));
    }
    let pu = u.project(m);
    let rhs = |w: &SpectralState| -> Result<SpectralState> {
        Ok(&w.apply_a().project(m) + &p.evaluate_b_m(w, m)?)
    };
    let pack = |states: &[SpectralState]| -> DVector<f64> {
        DVector::from_fn(dim, |r, _| {
            let (j, rest) = (r / (2 * na), r % (2 * na));
            let z = states[j].coeffs()[active[rest / 2]];
            if rest % 2 == 0 {
                z.re
            } else {
                z.im
            }
        })
    };

    let mut w: Vec<SpectralState> = vec![pu.clone(); s];
    let mut converged = false;
    for _ in 0..NEWTON_ITERATIONS {
        let f: Vec<SpectralState> = w.iter().map(&rhs).collect::<Result<_>>()?;
        let residual: Vec<SpectralState> = (0..s)
            .map(|j| {
                let mut g = &w[j] - &pu;
                for l in 0..s {
                    g = g.axpy(Complex64::new(-h * t.a(j, l), 0.0), &f[l]);
                }
                g
            })
            .collect();
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for l in 0..s {
            for (a, &idx) in active.iter().enumerate() {
                for part in 0..2 {
                    let unit = if part == 0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 1.0)
                    };
                    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
                    coeffs[idx] = unit;
                    let e = SpectralState::from_coeffs(grid.clone(), coeffs)?;
                    let de = &e.apply_a().project(m) + &p.evaluate_db_m(&w[l], &e, m)?;
                    let col = l * 2 * na + 2 * a + part;
                    for j in 0..s {
                        for (b, &jdx) in active.iter().enumerate() {
                            let mut z = de.coeffs()[jdx] * (-h * t.a(j, l));
                            if j == l && b == a {
                                z += unit;
                            }
                            jac[(j * 2 * na + 2 * b, col)] = z.re;
                            jac[(j * 2 * na + 2 * b + 1, col)] = z.im;
                        }
                    }
                }
            }
        }
        let g = pack(&residual);
        let delta = jac
            .lu()
            .solve(&(-g))
            .ok_or_else(|| Error::invalid("singular Jacobian in the dense stage solve"))?;
        for (j, wj) in w.iter_mut().enumerate() {
            let mut coeffs = wj.coeffs().to_vec();
            for (a, &idx) in active.iter().enumerate() {
                let r = j * 2 * na + 2 * a;
                coeffs[idx] += Complex64::new(delta[r], delta[r + 1]);
            }
            *wj = SpectralState::from_coeffs(grid.clone(), coeffs)?;
        }
        let size = delta.amax();
        let scale = pack(&w).amax().max(1.0);
        if size <= 1e-15 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ContractionFailure {
            iterations: NEWTON_ITERATIONS,
            last_ratio: f64::NAN,
        });
    }
    let mut out = pu.clone();
    for (j, wj) in w.iter().enumerate() {
        out = out.axpy(Complex64::new(h * t.b()[j], 0.0), &rhs(wj)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{make_initial_data, nls_problem, wave_problem, DataKind, PotentialTerm};
    use crate::integrator::{build_resolvent_cache, rk_step, StageOptions};
    use crate::tableau::gauss_legendre;

    #[test]
    fn matches_fixed_point_step() {
        for p in [
            nls_problem(vec![PotentialTerm::cubic()]).unwrap(),
            wave_problem(vec![0.0, 1.0, 0.0, 1.0]).unwrap(),
        ] {
            let g = p.build_grid(8);
            let u = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 2.0 }, 5).unwrap();
            let m = g.threshold_for_wavenumber(6);
            for s in [1, 2] {
                let t = gauss_legendre(s).unwrap();
                let h = 0.01;
                let dense = dense_stage_step(&p, &t, &u, m, h).unwrap();
                let cache = build_resolvent_cache(&t, &g, h).unwrap();
                let opts = StageOptions::default().with_tol(1e-14);
                let (fixed, _) = rk_step(&p, &cache, &u, m, &opts).unwrap();
                let diff = (&dense - &fixed).norm();
                assert!(diff < 1e-12, "{} s={s}: {diff:e}", p.name());
            }
        }
    }
}
