use crate::error::{Error, Result};

/// Machine-precision floor of an error measurement: `100 eps max(1, norm)`.
pub fn noise_floor(solution_norm: f64) -> f64 {
    100.0 * f64::EPSILON * solution_norm.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    /// Least-squares slope of `log(error)` against `log(grid)`.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Fits `error ~ C grid^slope` over the points with `error > floor`.
///
/// Non-finite or non-positive errors are excluded along with floor points.
pub fn fit_order(errors: &[f64], grid: &[f64], floor: f64) -> Result<OrderFit> {
    if errors.len() != grid.len() {
        return Err(Error::invalid("errors and grid differ in length"));
    }
    let points: Vec<(f64, f64)> = errors
        .iter()
        .zip(grid)
        .filter(|&(&e, &g)| e.is_finite() && e > floor && e > 0.0 && g.is_finite() && g > 0.0)
        .map(|(e, g)| (g.ln(), e.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData { usable: points.len() });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("grid points coincide"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit {
        slope,
        intercept,
        residual,
        used: points.len(),
        excluded: errors.len() - points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_law() {
        let f = fit_order(&[1.0, 0.25, 1.0 / 16.0], &[1.0, 0.5, 0.25], 0.0).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!(f.residual < 1e-14);
        assert_eq!(f.used, 3);
    }

    #[test]
    fn floor_points_are_dropped() {
        let floor = noise_floor(1.0);
        let f = fit_order(&[8.0, 1.0, 0.125, 1e-15], &[1.0, 0.5, 0.25, 0.125], floor).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert_eq!(f.excluded, 1);
    }

    #[test]
    fn noisy_synthetic_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h: Vec<f64> = (0..6).map(|i| 0.1 / 2f64.powi(i)).collect();
        let e: Vec<f64> = h
            .iter()
            .map(|h| 3.0 * h.powf(3.7) * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
            .collect();
        let f = fit_order(&e, &h, 0.0).unwrap();
        assert!(f.slope > 3.6 && f.slope < 3.8, "{}", f.slope);
    }

    #[test]
    fn two_points_are_not_enough() {
        let err = fit_order(&[1.0, 0.5, 0.0], &[1.0, 0.5, 0.25], 1e-14).unwrap_err();
        assert_eq!(err, Error::InsufficientData { usable: 2 });
    }
}
