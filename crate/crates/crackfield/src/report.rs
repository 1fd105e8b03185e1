//! Pass/fail verdicts for the benchmark targets.

use std::fmt;

use crate::study::{CodStudy, DomainStudy, EpsStudy, LevelSummary, Sneddon3d};

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

/// Agreement to within half a unit in the `digits`-th significant digit of `b`.
pub fn same_digits(a: f64, b: f64, digits: i32) -> bool {
    let unit = 10f64.powi(b.abs().log10().floor() as i32 + 1 - digits);
    (a - b).abs() <= 0.5 * unit
}

/// Published TCV errors of the domain study, in percent.
pub const DOMAIN_TARGETS: [(f64, f64); 3] = [(5.0, 5.6), (10.0, 1.5), (20.0, 0.5)];

pub fn check_domain(s: &DomainStudy, tolerance_pp: f64) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, target) in DOMAIN_TARGETS {
        match s.rows.iter().find(|r| r.half_width == k) {
            Some(r) => {
                ok &= (r.error_pct - target).abs() <= tolerance_pp;
                parts.push(format!("K={k}: {:.2}% (target {target}%)", r.error_pct));
            }
            None => {
                ok = false;
                parts.push(format!("K={k}: missing"));
            }
        }
    }
    Verdict::new("domain study", ok, parts.join(", "))
}

pub fn check_eps(s: &EpsStudy, lo: f64, hi: f64) -> Verdict {
    match s.slope {
        Some(q) => Verdict::new(
            "eps convergence",
            (lo..=hi).contains(&q),
            format!(
                "slope {q:.3} against TCV* = {:.5e}, need [{lo}, {hi}]; slope against exact {}",
                s.tcv_star,
                s.slope_exact.map_or("undefined".into(), |e| format!("{e:.3}"))
            ),
        ),
        None => Verdict::new("eps convergence", false, "slope undefined"),
    }
}

pub fn check_cod(s: &CodStudy, min_rate: f64) -> Verdict {
    match (s.adaptive.rate, s.uniform.rate) {
        (Some(a), Some(u)) => Verdict::new(
            "COD convergence",
            a >= min_rate && u < a,
            format!("adaptive rate {a:.3} (need >= {min_rate}), uniform rate {u:.3} (need < adaptive)"),
        ),
        (a, u) => Verdict::new("COD convergence", false, format!("rates undefined: adaptive {a:?}, uniform {u:?}")),
    }
}

/// Published 3d errors in percent against `10 l0 / h`.
pub const SNEDDON3D_ERRORS: [(f64, f64); 4] = [(16.0, 586.67), (32.0, 292.14), (64.0, 98.22), (128.0, 34.98)];

pub fn check_3d(s: &Sneddon3d, factor: f64) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut last = f64::INFINITY;
    for (res, published) in SNEDDON3D_ERRORS {
        match s.rows.iter().find(|r| (r.resolution - res).abs() < 0.5) {
            Some(r) => {
                let within = r.error_pct <= factor * published && r.error_pct >= published / factor;
                ok &= within && r.error_pct < last;
                last = r.error_pct;
                parts.push(format!("{res}: {:.2}% vs {published}%", r.error_pct));
            }
            None => {
                ok = false;
                parts.push(format!("{res}: missing"));
            }
        }
    }
    Verdict::new("3d benchmark", ok, parts.join(", "))
}

/// Growth of the first-step GMRES count over successive global refinements.
pub fn check_gmres_growth(levels: &[LevelSummary], total: f64, per_level: f64) -> Verdict {
    let counts: Vec<usize> = levels.iter().map(|l| l.first_gmres.first().copied().unwrap_or(0)).collect();
    if counts.len() < 4 || counts.contains(&0) {
        return Verdict::new("solver trend", false, format!("need four levels with linear solves, got {counts:?}"));
    }
    let c: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let overall = c[c.len() - 1] / c[c.len() - 4];
    let worst = c.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    Verdict::new(
        "solver trend",
        overall <= total && worst <= per_level,
        format!("counts {counts:?}: growth {overall:.2} (max {total}), worst step {worst:.2} (max {per_level})"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits() {
        assert!(same_digits(6.03187e-3, 6.0319e-3, 4));
        assert!(same_digits(6.0323e-3, 6.0319e-3, 4));
        assert!(!same_digits(6.0326e-3, 6.0319e-3, 4));
        assert!(same_digits(5.12e-3, 5.1200e-3, 4));
    }

    fn level(first: usize) -> LevelSummary {
        LevelSummary {
            level: 0,
            dofs: 1,
            h_min: 1.0,
            eps: 1.0,
            tcv: 1.0,
            cod0: 1.0,
            newton: 1,
            gmres_mean: 1.0,
            first_gmres: vec![first],
            converged: true,
        }
    }

    #[test]
    fn gmres_growth_limits() {
        let ok: Vec<_> = [20, 25, 31, 38].map(level).into();
        assert!(check_gmres_growth(&ok, 2.5, 1.3).passed);
        let jump: Vec<_> = [20, 21, 30, 31].map(level).into();
        assert!(!check_gmres_growth(&jump, 2.5, 1.3).passed);
        assert!(!check_gmres_growth(&ok[..3], 2.5, 1.3).passed);
    }

    #[test]
    fn verdict_line() {
        let v = Verdict::new("x", true, "fine");
        assert_eq!(v.to_string(), "[PASS] x: fine");
    }
}
