use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::SpectralState;

/// Largest relative gap between the difference quotients at `eps` and
/// `eps/2` that still counts as reliable.
pub const DERIVATIVE_GAP_LIMIT: f64 = 1e-4;

/// Directional derivative `DF(u0)[v]` of a map `F` (one step, or a whole
/// integration) by central differences.
///
/// `eps` defaults to `1e-5 ||u0||_{Y_0}`. The quotients at `eps` and `eps/2`
/// must agree to [`DERIVATIVE_GAP_LIMIT`]; the returned value is their
/// Richardson combination `(4 D(eps/2) - D(eps)) / 3`.
pub fn flow_derivative<F>(
    map: F,
    u0: &SpectralState,
    direction: &SpectralState,
    eps: Option<f64>,
) -> Result<SpectralState>
where
    F: Fn(&SpectralState) -> Result<SpectralState>,
{
    let eps = eps.unwrap_or_else(|| {
        let n = u0.norm();
        1e-5 * if n > 0.0 { n } else { 1.0 }
    });
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let quotient = |e: f64| -> Result<SpectralState> {
        let plus = map(&u0.axpy(Complex64::new(e, 0.0), direction))?;
        let minus = map(&u0.axpy(Complex64::new(-e, 0.0), direction))?;
        Ok((&plus - &minus).scale(Complex64::new(0.5 / e, 0.0)))
    };
    let coarse = quotient(eps)?;
    let fine = quotient(0.5 * eps)?;
    let gap = (&coarse - &fine).norm();
    let size = fine.norm();
    let relative_gap = if size > 0.0 { gap / size } else { gap };
    if relative_gap > DERIVATIVE_GAP_LIMIT {
        return Err(Error::DerivativeUnreliable { relative_gap });
    }
    Ok(fine
        .scale(Complex64::new(4.0 / 3.0, 0.0))
        .axpy(Complex64::new(-1.0 / 3.0, 0.0), &coarse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{make_initial_data, nls_problem, DataKind, PotentialTerm};
    use crate::integrator::{build_resolvent_cache, rk_step, tangent_step, StageOptions};
    use crate::tableau::gauss_legendre;
    use std::sync::Arc;

    #[test]
    fn linear_maps_differentiate_to_themselves() {
        let p = nls_problem(vec![]).unwrap();
        let g = p.build_grid(8);
        let u = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 2.0 }, 1).unwrap();
        let v = make_initial_data(&p, &g, DataKind::SingleMode { k: 3 }, 0).unwrap();
        let t = gauss_legendre(2).unwrap();
        let cache = build_resolvent_cache(&t, &g, 0.1).unwrap();
        let opts = StageOptions::default();
        let step = |x: &SpectralState| rk_step(&p, &cache, x, f64::INFINITY, &opts).map(|r| r.0);
        let d = flow_derivative(step, &u, &v, None).unwrap();
        let direct = step(&v).unwrap();
        assert!((&d - &direct).norm() < 1e-9);
        // a single mode is scaled by S(h lambda_k)
        let i = g.mode_index(3).unwrap();
        let s = cache.stability_block(i)[0];
        assert!((d.coeff(0, 3).unwrap() - s * v.coeff(0, 3).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn nonlinear_step_matches_tangent_oracle() {
        let p = nls_problem(vec![PotentialTerm::cubic()]).unwrap();
        let g = p.build_grid(16);
        let u = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 1.5 }, 2).unwrap();
        let v = make_initial_data(&p, &g, DataKind::AlgebraicDecay { r: 2.5 }, 3).unwrap();
        let t = gauss_legendre(2).unwrap();
        let cache = build_resolvent_cache(&t, &Arc::clone(&g), 0.02).unwrap();
        let fixed = StageOptions {
            fixed_iterations: Some(40),
            ..StageOptions::default()
        };
        let step = |x: &SpectralState| rk_step(&p, &cache, x, f64::INFINITY, &fixed).map(|r| r.0);
        let d = flow_derivative(step, &u, &v, None).unwrap();
        let exact = tangent_step(&p, &cache, &u, &v, f64::INFINITY, &StageOptions::default().with_tol(1e-14)).unwrap();
        assert!((&d - &exact).norm() < 1e-6 * exact.norm());
    }

    #[test]
    fn noisy_maps_are_flagged() {
        let p = nls_problem(vec![]).unwrap();
        let g = p.build_grid(4);
        let u = make_initial_data(&p, &g, DataKind::SingleMode { k: 1 }, 0).unwrap();
        // |x|-like kink at u: quotients at eps and eps/2 disagree
        let kink = |x: &SpectralState| Ok(x.scale(Complex64::new((x.norm() - 1.0).abs() * 1e6, 0.0)));
        let err = flow_derivative(kink, &u, &u, None).unwrap_err();
        assert_eq!(err.kind(), "derivative-unreliable");
    }
}
