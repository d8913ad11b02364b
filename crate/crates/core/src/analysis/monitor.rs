use crate::equations::{Equation, Problem};
use crate::integrator::Run;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftThresholds {
    /// Absolute `Y_0`-norm drift allowed for linear runs.
    pub norm: f64,
    /// Absolute drift allowed for the problem invariant (mass or energy).
    pub invariant: f64,
}

impl Default for DriftThresholds {
    fn default() -> Self {
        Self {
            norm: 1e-12,
            invariant: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSummary {
    pub steps: usize,
    pub norm_drift: f64,
    pub invariant_drift: f64,
    /// `"mass"` or `"energy"`.
    pub invariant_name: &'static str,
    /// The norm is only expected to be conserved by linear problems.
    pub norm_checked: bool,
    pub passed: bool,
}

/// Largest deviation of the norm and the invariant from their initial values
/// over the recorded steps of `run`.
pub fn invariant_monitor(p: &Problem, run: &Run, thresholds: &DriftThresholds) -> DriftSummary {
    let norm_drift = run
        .records
        .iter()
        .map(|r| (r.norm - run.initial_norm).abs())
        .fold(0.0, f64::max);
    let invariant_drift = run
        .records
        .iter()
        .map(|r| (r.invariant - run.initial_invariant).abs())
        .fold(0.0, f64::max);
    let invariant_name = match p.equation() {
        Equation::Nls { .. } => "mass",
        Equation::Wave { .. } => "energy",
    };
    let norm_checked = p.is_linear();
    let passed = invariant_drift <= thresholds.invariant
        && (!norm_checked || norm_drift <= thresholds.norm);
    DriftSummary {
        steps: run.records.len(),
        norm_drift,
        invariant_drift,
        invariant_name,
        norm_checked,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{make_initial_data, nls_problem, wave_problem, DataKind, PotentialTerm};
    use crate::integrator::{integrate, IntegrateOptions};
    use crate::tableau::gauss_legendre;

    #[test]
    fn linear_gauss_run_conserves_norm() {
        let p = wave_problem(vec![]).unwrap();
        let g = p.build_grid(16);
        let u = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 3.0 }, 1).unwrap();
        let run = integrate(&p, &gauss_legendre(2).unwrap(), &u, f64::INFINITY, 0.01, 200, &IntegrateOptions::default()).unwrap();
        let s = invariant_monitor(&p, &run, &DriftThresholds::default());
        assert!(s.norm_checked && s.passed, "{s:?}");
        assert_eq!(s.invariant_name, "energy");
    }

    #[test]
    fn midpoint_mass_drift() {
        let p = nls_problem(vec![PotentialTerm::cubic()]).unwrap();
        let g = p.build_grid(16);
        let u = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 2.0 }, 2).unwrap();
        let run = integrate(&p, &gauss_legendre(1).unwrap(), &u, f64::INFINITY, 0.01, 100, &IntegrateOptions::default()).unwrap();
        let s = invariant_monitor(&p, &run, &DriftThresholds::default());
        assert!(!s.norm_checked);
        assert!(s.invariant_drift <= 1e-9 && s.passed);
    }

    #[test]
    fn zero_steps_zero_drift() {
        let p = nls_problem(vec![PotentialTerm::cubic()]).unwrap();
        let g = p.build_grid(4);
        let u = make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 2.0 }, 2).unwrap();
        let run = integrate(&p, &gauss_legendre(1).unwrap(), &u, f64::INFINITY, 0.01, 0, &IntegrateOptions::default()).unwrap();
        let s = invariant_monitor(&p, &run, &DriftThresholds::default());
        assert_eq!((s.norm_drift, s.invariant_drift, s.steps), (0.0, 0.0, 0));
    }
}
