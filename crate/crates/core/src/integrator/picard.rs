use num_complex::Complex64;

use crate::equations::Problem;
use crate::error::{Error, Result};
use crate::spectral::SpectralState;
use crate::tableau::legendre_nodes;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Composite panels on `[0, 1]`.
    pub panels: usize,
    /// Gauss nodes per panel.
    pub nodes: usize,
    pub iterations: usize,
    /// Relative update size at which the iteration stops early.
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            panels: 2,
            nodes: 10,
            iterations: 30,
            tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub state: SpectralState,
    /// Largest nodal `Y_0` change per iteration.
    pub updates: Vec<f64>,
}

/// Fixed point of the mild-solution map
/// `Pi(W)(tau) = e^{tau T A} u0 + T int_0^tau e^{(tau - sigma) T A} B_m(W(sigma)) d sigma`
/// on `tau in [0, 1]`, returning `W(1)`.
///
/// `W` lives on composite Gauss nodes. Integrals over whole panels use the
/// nodes themselves; the partial panel up to a node uses the same rule mapped
/// onto the sub-interval with `B_m(W)` interpolated from the panel nodes. The
/// kernel `e^{(tau - sigma) T A}` is applied exactly.
pub fn picard_oracle(
    p: &Problem,
    u0: &SpectralState,
    t_final: f64,
    m: f64,
    opts: &PicardOptions,
) -> Result<PicardOutcome> {
    if opts.panels == 0 || opts.nodes == 0 || opts.iterations == 0 {
        return Err(Error::invalid("Picard oracle needs panels, nodes and iterations"));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::invalid("Picard horizon must be finite and >= 0"));
    }
    let (x, w) = legendre_nodes(opts.nodes);
    let width = 1.0 / opts.panels as f64;
    let start = |q: usize| q as f64 * width;
    let local: Vec<f64> = x.iter().map(|xi| 0.5 * (xi + 1.0)).collect();
    let weights: Vec<f64> = w.iter().map(|wi| 0.5 * wi).collect();
    let taus: Vec<f64> = (0..opts.panels)
        .flat_map(|q| local.iter().map(move |&s| start(q) + s * width))
        .collect();

    let u0 = u0.project(m);
    let free = |tau: f64| u0.apply_semigroup(tau * t_final);
    let mut nodal: Vec<SpectralState> = taus.iter().map(|&tau| free(tau)).collect::<Result<_>>()?;
    let scale = u0.norm().max(1.0);

    // Duhamel integral up to tau, given B at the nodes
    let integral = |b: &[SpectralState], tau: f64| -> Result<SpectralState> {
        let mut acc = SpectralState::zeros(u0.grid().clone());
        let full = ((tau / width + 1e-12).floor() as usize).min(opts.panels);
        for q in 0..full {
            for i in 0..opts.nodes {
                let sigma = taus[q * opts.nodes + i];
                let kernel = b[q * opts.nodes + i].apply_semigroup((tau - sigma) * t_final)?;
                acc = acc.axpy(Complex64::new(weights[i] * width * t_final, 0.0), &kernel);
            }
        }
        let a = start(full);
        let partial = tau - a;
        if full < opts.panels && partial > 1e-14 {
            let panel_nodes: Vec<f64> = local.iter().map(|s| a + s * width).collect();
            for i in 0..opts.nodes {
                let sigma = a + local[i] * partial;
                let mut value = SpectralState::zeros(u0.grid().clone());
                for j in 0..opts.nodes {
                    let lj = lagrange(&panel_nodes, j, sigma);
                    value = value.axpy(Complex64::new(lj, 0.0), &b[full * opts.nodes + j]);
                }
                let kernel = value.apply_semigroup((tau - sigma) * t_final)?;
                acc = acc.axpy(Complex64::new(weights[i] * partial * t_final, 0.0), &kernel);
            }
        }
        Ok(acc)
    };

    let mut updates: Vec<f64> = Vec::new();
    for iteration in 1..=opts.iterations {
        let b: Vec<SpectralState> = match nodal.iter().map(|wn| p.evaluate_b_m(wn, m)).collect() {
            Ok(b) => b,
            Err(Error::NonlinearityOverflow) => {
                return Err(Error::HorizonExceeded {
                    iteration,
                    update: f64::INFINITY,
                })
            }
            Err(e) => return Err(e),
        };
        let next: Vec<SpectralState> = taus
            .iter()
            .map(|&tau| Ok(&free(tau)? + &integral(&b, tau)?))
            .collect::<Result<_>>()?;
        let update = next
            .iter()
            .zip(&nodal)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let growing = updates.len() >= 2
            && update > updates[updates.len() - 1]
            && updates[updates.len() - 1] > updates[updates.len() - 2];
        if !update.is_finite() || growing {
            return Err(Error::HorizonExceeded { iteration, update });
        }
        updates.push(update);
        nodal = next;
        if update <= opts.tol * scale {
            break;
        }
    }
    let last = *updates.last().expect("at least one iteration");
    if last > 1e-10 * scale {
        return Err(Error::HorizonExceeded {
            iteration: updates.len(),
            update: last,
        });
    }
    let b: Vec<SpectralState> = nodal.iter().map(|wn| p.evaluate_b_m(wn, m)).collect::<Result<_>>()?;
    let state = &free(1.0)? + &integral(&b, 1.0)?;
    Ok(PicardOutcome { state, updates })
}

fn lagrange(nodes: &[f64], j: usize, t: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(q, _)| q != j)
        .map(|(_, &xq)| (t - xq) / (nodes[j] - xq))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{make_initial_data, nls_problem, DataKind, PotentialTerm};
    use crate::integrator::reference_solution;

    #[test]
    fn free_problem_returns_the_semigroup() {
        let p = nls_problem(vec![]).unwrap();
        let g = p.build_grid(8);
        let u0 = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 3.0 }, 1).unwrap();
        let out = picard_oracle(&p, &u0, 0.3, f64::INFINITY, &PicardOptions::default()).unwrap();
        let exact = u0.apply_semigroup(0.3).unwrap();
        assert!((&out.state - &exact).norm() < 1e-13);
    }

    #[test]
    fn agrees_with_reference_at_short_times() {
        let p = nls_problem(vec![PotentialTerm::cubic()]).unwrap();
        let g = p.build_grid(32);
        let u0 = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 2.0 }, 4).unwrap();
        let m = g.threshold_for_wavenumber(32);
        let opts = PicardOptions {
            panels: 2,
            nodes: 10,
            iterations: 30,
            tol: 1e-15,
        };
        let out = picard_oracle(&p, &u0, 0.01, m, &opts).unwrap();
        let r = reference_solution(&p, &u0, 0.01, m).unwrap();
        assert!((&out.state - &r).norm() < 1e-8);
        // geometric contraction of the iterates
        let u = &out.updates;
        assert!(u.len() >= 3);
        assert!(u[2] < u[1] && u[1] < u[0]);
    }

    #[test]
    fn long_horizons_are_rejected() {
        let p = nls_problem(vec![PotentialTerm::cubic()]).unwrap();
        let g = p.build_grid(8);
        let u0 = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 2.0 }, 4)
            .unwrap()
            .scale(Complex64::new(3.0, 0.0));
        let err = picard_oracle(&p, &u0, 10.0, f64::INFINITY, &PicardOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "horizon-exceeded");
    }
}
