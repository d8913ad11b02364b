//! Seeded initial-data generators.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Equation, Problem};
use crate::error::{Error, Result};
use crate::spectral::{ModeGrid, SpectralState, MAX_SCALE_INDEX};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataKind {
    /// `|c_k| = exp(-(k/k0)^2)`.
    BandLimitedSmooth { k0: f64 },
    /// `|c_k| = (1 + |k|)^{-r}`, in `H^s` exactly for `s < r - 1/2`.
    AlgebraicDecay { r: f64 },
    /// One unit Fourier mode (paired with `-k` for real fields).
    SingleMode { k: i64 },
}

/// Initial data on `grid`, normalized to `||u||_{Y_0} = 1`.
///
/// Phases are drawn mode by mode in order of increasing `|k|`, so data built
/// on a larger grid restricts exactly (before normalization) to the data on a
/// smaller grid with the same seed. For the wave equation the field is real
/// (conjugate-symmetric spectrum), `v` follows the same amplitude law scaled
/// by `2 pi |k|`, and the mean of `v` is zero.
pub fn make_initial_data(
    p: &Problem,
    grid: &Arc<ModeGrid>,
    kind: DataKind,
    seed: u64,
) -> Result<SpectralState> {
    if grid.components() != p.components() {
        return Err(Error::GridMismatch(format!(
            "{} data needs a {}-component grid",
            p.name(),
            p.components()
        )));
    }
    let amplitude: Box<dyn Fn(i64) -> f64> = match kind {
        DataKind::BandLimitedSmooth { k0 } => {
            if !(k0.is_finite() && k0 > 0.0) {
                return Err(Error::invalid("band width k0 must be positive"));
            }
            Box::new(move |k| (-(k as f64 / k0).powi(2)).exp())
        }
        DataKind::AlgebraicDecay { r } => {
            if !(r.is_finite() && r > 0.5) {
                return Err(Error::invalid("algebraic decay rate must satisfy r > 1/2"));
            }
            Box::new(move |k| (1.0 + k.abs() as f64).powf(-r))
        }
        DataKind::SingleMode { k } => {
            if grid.mode_index(k).is_none() {
                return Err(Error::invalid(format!("mode {k} is not on the grid")));
            }
            Box::new(move |j| if j.abs() == k.abs() { 1.0 } else { 0.0 })
        }
    };
    let randomize = !matches!(kind, DataKind::SingleMode { .. });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = |rng: &mut ChaCha8Rng| {
        if randomize {
            Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>())
        } else {
            Complex64::new(1.0, 0.0)
        }
    };

    let n = grid.n_modes();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    let kmax = grid.kmax() as i64;
    for k in 0..=kmax {
        let a = amplitude(k);
        let (ip, im) = (
            grid.mode_index(k).expect("on grid"),
            grid.mode_index(-k).expect("on grid"),
        );
        match p.equation() {
            Equation::Nls { .. } => {
                if let DataKind::SingleMode { k: target } = kind {
                    let i = grid.mode_index(target).expect("checked above");
                    if k == target.abs() {
                        coeffs[i] = Complex64::new(1.0, 0.0);
                    }
                    continue;
                }
                coeffs[ip] = a * phase(&mut rng);
                if k != 0 {
                    coeffs[im] = a * phase(&mut rng);
                }
            }
            Equation::Wave { .. } => {
                let (zu, zv) = (phase(&mut rng), phase(&mut rng));
                if k == 0 {
                    coeffs[ip] = Complex64::new(a * zu.re.signum(), 0.0);
                } else {
                    let av = 2.0 * PI * k as f64 * a;
                    coeffs[ip] = a * zu;
                    coeffs[im] = (a * zu).conj();
                    if randomize {
                        coeffs[n + ip] = av * zv;
                        coeffs[n + im] = (av * zv).conj();
                    }
                }
            }
        }
    }
    let state = SpectralState::from_coeffs(Arc::clone(grid), coeffs)?;
    let norm = state.norm();
    if norm == 0.0 {
        return Err(Error::invalid("generated data vanishes on this grid"));
    }
    Ok(state.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// Largest scale index `l` (capped at [`MAX_SCALE_INDEX`]) for which
/// algebraic-decay data with rate `r` has a finite `Y_l` norm in the limit of
/// infinite resolution, or `None` if not even `Y_0` is reached.
///
/// NLS: `Y_l = H^{2l+1}` needs `r > 2l + 3/2`. Wave: `Y_l = H^{l+1} x H^l`
/// needs `r > l + 3/2`.
pub fn finite_scale_index(p: &Problem, r: f64) -> Option<u32> {
    let (slope, offset) = match p.equation() {
        Equation::Nls { .. } => (2.0, 1.5),
        Equation::Wave { .. } => (1.0, 1.5),
    };
    (0..=MAX_SCALE_INDEX)
        .rev()
        .find(|&l| r > slope * l as f64 + offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equations::{nls_problem, wave_problem, PotentialTerm};

    #[test]
    fn same_seed_is_bit_identical() {
        let p = nls_problem(vec![PotentialTerm::cubic()]).unwrap();
        let g = p.build_grid(32);
        let a = make_initial_data(&p, &g, DataKind::AlgebraicDecay { r: 3.0 }, 7).unwrap();
        let b = make_initial_data(&p, &g, DataKind::AlgebraicDecay { r: 3.0 }, 7).unwrap();
        let c = make_initial_data(&p, &g, DataKind::AlgebraicDecay { r: 3.0 }, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn draws_are_prefix_consistent() {
        let p = nls_problem(vec![PotentialTerm::cubic()]).unwrap();
        let small = p.build_grid(8);
        let large = p.build_grid(64);
        let kind = DataKind::BandLimitedSmooth { k0: 2.0 };
        let a = make_initial_data(&p, &small, kind, 3).unwrap();
        let b = make_initial_data(&p, &large, kind, 3).unwrap();
        let b_small = b.resample(Arc::clone(&small)).unwrap();
        let ratio = a.coeff(0, 1).unwrap() / b_small.coeff(0, 1).unwrap();
        for k in -8..=8 {
            let z = b_small.coeff(0, k).unwrap() * ratio;
            assert!((z - a.coeff(0, k).unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn wave_data_is_real() {
        let p = wave_problem(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let g = p.build_grid(16);
        for kind in [
            DataKind::BandLimitedSmooth { k0: 3.0 },
            DataKind::AlgebraicDecay { r: 2.5 },
            DataKind::SingleMode { k: 2 },
        ] {
            let u = make_initial_data(&p, &g, kind, 11).unwrap();
            assert!(u.conjugate_symmetry_defect() < 1e-15);
            assert_eq!(u.coeff(1, 0).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn algebraic_decay_norm_trends() {
        // r = 4.6 on NLS: Y_1 (H^3) converges, Y_2 (H^5) grows with resolution
        let p = nls_problem(vec![PotentialTerm::cubic()]).unwrap();
        assert_eq!(finite_scale_index(&p, 4.6), Some(1));
        let norms = |level: u32| -> Vec<f64> {
            [64usize, 128, 256, 512]
                .iter()
                .map(|&kmax| {
                    let g = p.build_grid(kmax);
                    let amps = (0..g.len())
                        .map(|i| {
                            Complex64::new((1.0 + g.wavenumber(i).abs() as f64).powf(-4.6), 0.0)
                        })
                        .collect();
                    SpectralState::from_coeffs(g, amps).unwrap().scale_norm(level)
                })
                .collect()
        };
        let y1 = norms(1);
        let y2 = norms(2);
        assert!((y1[3] - y1[2]) / y1[3] < 1e-3);
        assert!(y2[3] / y2[2] > 1.2 && y2[2] / y2[1] > 1.2);
    }

    #[test]
    fn scale_index_for_wave() {
        let p = wave_problem(vec![]).unwrap();
        assert_eq!(finite_scale_index(&p, 2.6), Some(1));
        assert_eq!(finite_scale_index(&p, 1.5), None);
        assert_eq!(finite_scale_index(&p, 100.0), Some(MAX_SCALE_INDEX));
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = nls_problem(vec![]).unwrap();
        let g = p.build_grid(4);
        assert!(make_initial_data(&p, &g, DataKind::AlgebraicDecay { r: 0.5 }, 0).is_err());
        assert!(make_initial_data(&p, &g, DataKind::SingleMode { k: 5 }, 0).is_err());
        assert!(make_initial_data(&p, &g, DataKind::BandLimitedSmooth { k0: 0.0 }, 0).is_err());
    }
}
