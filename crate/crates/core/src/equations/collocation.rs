//! Transforms between Fourier coefficients and samples on a (padded)
//! equispaced collocation grid.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::DealiasRule;

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

/// Thread-safe cache of forward/inverse plans keyed by transform length.
#[derive(Default)]
pub(crate) struct PlanCache {
    plans: Mutex<HashMap<usize, PlanPair>>,
}

impl std::fmt::Debug for PlanCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PlanCache")
    }
}

impl PlanCache {
    fn get(&self, n: usize) -> PlanPair {
        let mut plans = self.plans.lock().expect("plan cache poisoned");
        plans
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    }
}

/// Sizing of the physical grid used to evaluate a degree-`degree` polynomial
/// of fields with wavenumbers `|k| <= kmax`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub kmax: usize,
    pub points: usize,
    /// Modes with `|k| > filter` are dropped before and after evaluation.
    pub filter: usize,
}

impl Layout {
    pub fn new(kmax: usize, degree: usize, rule: DealiasRule) -> Self {
        let q = degree.max(1);
        match rule {
            // Products of q factors reach |k| <= q*kmax; aliases of those land
            // outside |k| <= kmax as soon as N > (q+1)*kmax. For q = 2 this is
            // the classic 3/2 padding.
            DealiasRule::ThreeHalvesPadding => Self {
                kmax,
                points: smooth_size((q + 1) * kmax + 1),
                filter: kmax,
            },
            // Unpadded grid, spectrum truncated to |k| < N/(q+1) (the 2/3 rule
            // for q = 2).
            DealiasRule::TwoThirds => {
                let points = smooth_size(2 * kmax + 1);
                Self {
                    kmax,
                    points,
                    filter: ((points - 1) / (q + 1)).min(kmax),
                }
            }
            DealiasRule::None => Self {
                kmax,
                points: smooth_size(2 * kmax + 1),
                filter: kmax,
            },
        }
    }
}

/// Smallest integer `>= n` whose only prime factors are 2, 3 and 5.
pub(crate) fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

impl PlanCache {
    /// Samples `u(x_j) = sum_k c_k e^{2 pi i k x_j}`, `x_j = j / N`, of one
    /// component given in grid order (`k = -kmax..=kmax`).
    pub fn to_physical(&self, layout: &Layout, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = layout.points;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let kmax = layout.kmax as i64;
        for (i, c) in coeffs.iter().enumerate() {
            let k = i as i64 - kmax;
            if k.unsigned_abs() as usize <= layout.filter {
                buf[k.rem_euclid(n as i64) as usize] = *c;
            }
        }
        let (_, inverse) = self.get(n);
        inverse.process(&mut buf);
        buf
    }

    /// Inverse of [`PlanCache::to_physical`] restricted to the grid modes.
    pub fn to_spectral(&self, layout: &Layout, mut samples: Vec<Complex64>) -> Vec<Complex64> {
        let n = layout.points;
        let (forward, _) = self.get(n);
        forward.process(&mut samples);
        let scale = 1.0 / n as f64;
        let kmax = layout.kmax as i64;
        (0..2 * layout.kmax + 1)
            .map(|i| {
                let k = i as i64 - kmax;
                if k.unsigned_abs() as usize <= layout.filter {
                    samples[k.rem_euclid(n as i64) as usize] * scale
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    }
}
