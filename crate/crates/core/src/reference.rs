//! Closed-form Sneddon crack solutions, Richardson extrapolation and
//! convergence-rate fitting.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::Material;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SneddonParams {
    pub pressure: f64,
    /// Crack half-length (2d) or radius (3d).
    pub l0: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub dim: usize,
}

impl SneddonParams {
    pub fn from_material(m: &Material, dim: usize) -> Self {
        Self { pressure: m.pressure, l0: m.l0, youngs_modulus: m.youngs_modulus, poisson_ratio: m.poisson_ratio, dim }
    }

    fn scale(&self) -> f64 {
        self.pressure * (1.0 - self.poisson_ratio * self.poisson_ratio) / self.youngs_modulus
    }
}

/// Total crack volume of the pressurized crack in an infinite medium.
pub fn tcv_exact(s: &SneddonParams) -> f64 {
    if s.dim == 2 {
        2.0 * PI * s.l0 * s.l0 * s.scale()
    } else {
        16.0 * s.l0 * s.l0 * s.l0 * s.scale() / 3.0
    }
}

/// Crack opening at distance `rho` from the centre; zero beyond the tip.
pub fn cod_exact(s: &SneddonParams, rho: f64) -> f64 {
    let t = rho / s.l0;
    if t >= 1.0 {
        return 0.0;
    }
    let c = if s.dim == 2 { 2.0 } else { 4.0 / PI };
    c * s.l0 * s.scale() * (1.0 - t * t).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Observed order with respect to the refinement ratio.
    pub order: f64,
    /// Extrapolated limit.
    pub limit: f64,
    pub ratio: f64,
}

/// Richardson extrapolation from the last three entries of a sequence
/// computed at a constant refinement ratio `r`.
pub fn richardson(values: &[f64], r: f64) -> Result<RateFit> {
    if values.len() < 3 {
        return Err(Error::RateUndefined(format!("need 3 values, got {}", values.len())));
    }
    if !(r > 1.0) {
        return Err(Error::RateUndefined(format!("refinement ratio {r} must exceed 1")));
    }
    let k = values.len() - 1;
    let (a, b, c) = (values[k - 2], values[k - 1], values[k]);
    let (d1, d2) = (a - b, b - c);
    let q_ratio = d1 / d2;
    if !(q_ratio > 0.0) || !q_ratio.is_finite() || q_ratio == 1.0 {
        return Err(Error::RateUndefined(format!("difference ratio {q_ratio} is not a convergent sequence")));
    }
    let order = q_ratio.ln() / r.ln();
    let limit = c + (c - b) / (q_ratio - 1.0);
    Ok(RateFit { order, limit, ratio: r })
}

/// Least-squares slope of `log(error)` against `log(parameter)`. Pairs with
/// a nonpositive entry are ignored.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> =
        pairs.iter().filter(|(h, e)| *h > 0.0 && *e > 0.0).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::RateUndefined(format!("{} usable points", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::RateUndefined("all parameters coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Percentage errors `100 |v - exact| / exact` for each `(K, v)` entry.
pub fn domain_error_table(entries: &[(f64, f64)], exact: f64) -> Vec<(f64, f64)> {
    entries.iter().map(|&(k, v)| (k, 100.0 * (v - exact).abs() / exact)).collect()
}
