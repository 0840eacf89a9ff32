use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::flow::integrate_affine;
use crate::error::{Error, Result};
use crate::generator::GeneratorPair;
use crate::model::StateVec;

/// Errors below this are treated as round-off and left out of the fit.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderPoint {
    pub h: f64,
    pub error: f64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub points: Vec<OrderPoint>,
    /// Least-squares slope of `log error` against `log h`; `None` when fewer
    /// than three points survive the noise-floor filter.
    pub slope: Option<f64>,
}

impl OrderEstimate {
    pub fn is_inconclusive(&self) -> bool {
        self.slope.is_none()
    }
}

fn check_steps(h_list: &[f64]) -> Result<()> {
    let mut sorted: Vec<f64> = h_list.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 4 || sorted.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::invalid("h_list", "need at least 4 distinct positive step sizes"));
    }
    Ok(())
}

/// Observed order of the RK4 state flow against a fine-step reference at
/// `min(h_list) / 16`.
pub fn estimate_order(gen: &GeneratorPair, alpha: f64, s: &StateVec, h_list: &[f64]) -> Result<OrderEstimate> {
    check_steps(h_list)?;
    let h_min = h_list.iter().copied().fold(f64::INFINITY, f64::min);
    let (reference, _) = integrate_affine(&gen.a_x, &gen.c_x, s, alpha, h_min / 16.0, None)?;
    estimate_order_against(gen, alpha, s, h_list, &reference)
}

/// Observed order against a caller-supplied reference `g_α(s)`.
pub fn estimate_order_against(
    gen: &GeneratorPair,
    alpha: f64,
    s: &StateVec,
    h_list: &[f64],
    reference: &DVector<f64>,
) -> Result<OrderEstimate> {
    check_steps(h_list)?;
    let mut points = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let (x, _) = integrate_affine(&gen.a_x, &gen.c_x, s, alpha, h, None)?;
        let error = (x - reference).norm();
        points.push(OrderPoint {
            h,
            error,
            used: error >= NOISE_FLOOR,
        });
    }
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.used)
        .map(|p| (p.h.ln(), p.error.ln()))
        .collect();
    let slope = (fit.len() >= 3).then(|| least_squares_slope(&fit));
    Ok(OrderEstimate { points, slope })
}

fn least_squares_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.1f64, 0.05, 0.025].iter().map(|h| (h.ln(), (3.0 * h.powi(4)).ln())).collect();
        assert!((least_squares_slope(&pts) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_is_inconclusive() {
        let mut g = GeneratorPair::zeros(2, 1);
        g.c_x[1] = 0.5;
        let s = DVector::from_vec(vec![0.0, 0.0]);
        let est = estimate_order(&g, 1.0, &s, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
        assert!(est.is_inconclusive());
        assert!(est.points.iter().all(|p| !p.used));
    }

    #[test]
    fn too_few_steps_rejected() {
        let g = GeneratorPair::rotation(2, 2).unwrap();
        let s = DVector::from_vec(vec![1.0, 0.0]);
        assert!(estimate_order(&g, 1.0, &s, &[0.1, 0.05, 0.05, 0.025]).is_err());
    }
}
