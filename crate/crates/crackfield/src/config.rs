//! Flat `key = value` run configuration.
//!
//! Keys are dotted (`material.nu`), `#` starts a comment and every omitted
//! key keeps its default. Unknown keys and malformed values are rejected
//! with the offending line number.

use std::fmt::Write as _;
use std::str::FromStr;

use crackfield_core::functionals::CodMethod;
use crackfield_core::linsolve::PreconditionerKind;
use crackfield_core::adapt::{CycleOptions, RefinementPolicy};
use crackfield_core::model::{EpsMode, HMeasure, Material, PressureCoupling};
use crackfield_core::solver::SolverOptions;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: cannot parse `{value}` for `{key}`")]
    Value { line: usize, key: String, value: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    /// Half width of the domain `(-K, K)^d`.
    pub half_width: f64,
    /// Root cells per side.
    pub n0: usize,
    pub pre_refinements: usize,
    /// Extra halvings of the crack-region edge beyond the global mesh.
    pub band_refinements: usize,
    pub cycles: usize,
    pub loading_steps: usize,
    pub max_corrections: usize,
    pub material: Material,
    pub solver: SolverOptions,
    pub band_threshold: f64,
    pub theta: f64,
    pub max_level: u8,
    pub estimator: bool,
    pub eps_list: Vec<f64>,
    pub domains: Vec<f64>,
    pub cod_method: CodMethod,
    pub cod_station_step: f64,
    pub output_dir: String,
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: 2,
            half_width: 20.0,
            n0: 20,
            pre_refinements: 0,
            band_refinements: 3,
            cycles: 4,
            loading_steps: 2,
            max_corrections: 4,
            material: Material::default(),
            solver: SolverOptions::default(),
            band_threshold: 0.8,
            theta: 0.3,
            max_level: 20,
            estimator: true,
            eps_list: vec![0.5, 0.25, 0.125, 0.0625],
            domains: vec![5.0, 10.0, 20.0, 40.0],
            cod_method: CodMethod::LineIntegral,
            cod_station_step: 0.05,
            output_dir: "out".into(),
            deterministic: true,
        }
    }
}

impl RunConfig {
    /// Edge of the root cells after global pre-refinement.
    pub fn global_edge(&self) -> f64 {
        2.0 * self.half_width / self.n0 as f64 / (1u64 << self.pre_refinements) as f64
    }

    /// Starting band edge: the global edge halved `band_refinements` times,
    /// or the edge that resolves a fixed `eps`.
    pub fn initial_band_edge(&self) -> f64 {
        match self.material.eps_mode {
            EpsMode::Fixed(eps) => {
                let mut h = self.global_edge();
                let target = self.material.edge_for_eps(self.dimension, eps);
                while h > target * (1.0 + 1e-9) {
                    h *= 0.5;
                }
                h
            }
            EpsMode::Tied { .. } => self.global_edge() / (1u64 << self.band_refinements) as f64,
        }
    }

    pub fn policy(&self) -> RefinementPolicy {
        RefinementPolicy {
            band_threshold: self.band_threshold,
            h_target: self.initial_band_edge(),
            theta: self.theta,
            max_level: self.max_level,
            estimator: self.estimator,
        }
    }

    pub fn cycle_options(&self) -> CycleOptions {
        CycleOptions {
            cycles: self.cycles,
            loading_steps: self.loading_steps,
            halve_band: true,
            max_corrections: self.max_corrections,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key, reason: &str| Err(ConfigError::Invalid { key, reason: reason.into() });
        if self.dimension != 2 && self.dimension != 3 {
            return bad("mesh.dimension", "must be 2 or 3");
        }
        if !(self.half_width > 0.0) {
            return bad("mesh.K", "must be positive");
        }
        if self.n0 == 0 {
            return bad("mesh.n0", "must be at least 1");
        }
        if self.loading_steps == 0 {
            return bad("run.loading_steps", "must be at least 1");
        }
        let m = &self.material;
        if !(m.youngs_modulus > 0.0) {
            return bad("material.E", "must be positive");
        }
        if !(0.0..0.5).contains(&m.poisson_ratio) {
            return bad("material.nu", "must lie in [0, 0.5)");
        }
        if !(m.gc > 0.0) {
            return bad("material.gc", "must be positive");
        }
        if !(m.pressure >= 0.0) {
            return bad("material.p", "must be nonnegative");
        }
        if !(m.l0 > 0.0) || m.l0 >= self.half_width {
            return bad("material.l0", "must be positive and smaller than K");
        }
        if !(m.kappa_factor > 0.0) {
            return bad("material.kappa_factor", "must be positive");
        }
        match m.eps_mode {
            EpsMode::Tied { factor } if !(factor > 0.0) => return bad("eps.factor", "must be positive"),
            EpsMode::Fixed(e) if !(e > 0.0) => return bad("eps.fixed", "must be positive"),
            _ => {}
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || !(s.gmres.rtol > 0.0) {
            return bad("solver.newton_tol", "tolerances must be positive");
        }
        if s.max_iter == 0 || s.gmres.restart == 0 || s.gmres.max_iter == 0 {
            return bad("solver.newton_max_iter", "iteration limits must be positive");
        }
        if !(s.complementarity_factor > 0.0) {
            return bad("solver.active_set_c", "must be positive");
        }
        if s.cycle_window < 2 || s.cycle_window > 64 || s.cycle_toggles == 0 {
            return bad("solver.cycle_window", "window must lie in [2, 64] and toggles be positive");
        }
        if !(self.band_threshold > 0.0 && self.band_threshold < 1.0) {
            return bad("adapt.phi_b", "must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("adapt.theta", "must lie in [0, 1]");
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0)) {
            return bad("study.eps_list", "entries must be positive");
        }
        if self.domains.iter().any(|k| !(*k > m.l0)) {
            return bad("study.domains", "entries must exceed l0");
        }
        if !(self.cod_station_step > 0.0) {
            return bad("postproc.cod_step", "must be positive");
        }
        Ok(())
    }
}

fn parse_list<T: FromStr>(v: &str) -> Option<Vec<T>> {
    v.split(',').map(|s| s.trim().parse().ok()).collect()
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn set(cfg: &mut RunConfig, key: &str, v: &str) -> Result<(), Option<()>> {
    fn p<T: FromStr>(v: &str) -> Result<T, Option<()>> {
        v.parse().map_err(|_| Some(()))
    }
    let m = &mut cfg.material;
    let s = &mut cfg.solver;
    match key {
        "mesh.dimension" => cfg.dimension = p(v)?,
        "mesh.K" => cfg.half_width = p(v)?,
        "mesh.n0" => cfg.n0 = p(v)?,
        "mesh.pre_refinements" => cfg.pre_refinements = p(v)?,
        "mesh.band_refinements" => cfg.band_refinements = p(v)?,
        "run.cycles" => cfg.cycles = p(v)?,
        "run.loading_steps" => cfg.loading_steps = p(v)?,
        "run.max_corrections" => cfg.max_corrections = p(v)?,
        "run.output_dir" => cfg.output_dir = v.to_string(),
        "run.deterministic" => cfg.deterministic = parse_bool(v).ok_or(Some(()))?,
        "eps.mode" => {
            m.eps_mode = match (v, m.eps_mode) {
                ("tied", EpsMode::Tied { factor }) => EpsMode::Tied { factor },
                ("tied", _) => EpsMode::Tied { factor: 2.0 },
                ("fixed", EpsMode::Fixed(e)) => EpsMode::Fixed(e),
                ("fixed", _) => EpsMode::Fixed(0.5),
                _ => return Err(Some(())),
            }
        }
        "eps.factor" => m.eps_mode = EpsMode::Tied { factor: p(v)? },
        "eps.fixed" => m.eps_mode = EpsMode::Fixed(p(v)?),
        "eps.h_measure" => {
            m.h_measure = match v {
                "diameter" => HMeasure::Diameter,
                "edge" => HMeasure::Edge,
                _ => return Err(Some(())),
            }
        }
        "material.E" => m.youngs_modulus = p(v)?,
        "material.nu" => m.poisson_ratio = p(v)?,
        "material.gc" => m.gc = p(v)?,
        "material.p" => m.pressure = p(v)?,
        "material.l0" => m.l0 = p(v)?,
        "material.kappa_factor" => m.kappa_factor = p(v)?,
        "material.pressure_coupling" => {
            m.pressure_coupling = match v {
                "extrapolated" => PressureCoupling::Extrapolated,
                "current" => PressureCoupling::Current,
                _ => return Err(Some(())),
            }
        }
        "solver.newton_tol" => s.tol = p(v)?,
        "solver.newton_abs_floor" => s.abs_floor = p(v)?,
        "solver.newton_max_iter" => s.max_iter = p(v)?,
        "solver.gmres_rtol" => s.gmres.rtol = p(v)?,
        "solver.gmres_restart" => s.gmres.restart = p(v)?,
        "solver.gmres_max_iter" => s.gmres.max_iter = p(v)?,
        "solver.preconditioner" => {
            s.preconditioner = match v {
                "amg" => PreconditionerKind::Amg,
                "exact" => PreconditionerKind::Exact,
                "diagonal" => PreconditionerKind::Diagonal,
                _ => return Err(Some(())),
            }
        }
        "solver.active_set_c" => s.complementarity_factor = p(v)?,
        "solver.cycle_window" => s.cycle_window = p(v)?,
        "solver.cycle_toggles" => s.cycle_toggles = p(v)?,
        "solver.damping" => s.damping = parse_bool(v).ok_or(Some(()))?,
        "solver.freeze_preconditioner" => s.freeze_preconditioner = parse_bool(v).ok_or(Some(()))?,
        "solver.feasibility_tol" => s.feasibility_tol = p(v)?,
        "amg.strength_threshold" => s.amg.strength_threshold = p(v)?,
        "amg.smoother_omega" => s.amg.smoother_omega = p(v)?,
        "amg.coarse_size" => s.amg.coarse_size = p(v)?,
        "amg.max_levels" => s.amg.max_levels = p(v)?,
        "adapt.phi_b" => cfg.band_threshold = p(v)?,
        "adapt.theta" => cfg.theta = p(v)?,
        "adapt.max_level" => cfg.max_level = p(v)?,
        "adapt.estimator" => cfg.estimator = parse_bool(v).ok_or(Some(()))?,
        "study.eps_list" => cfg.eps_list = parse_list(v).ok_or(Some(()))?,
        "study.domains" => cfg.domains = parse_list(v).ok_or(Some(()))?,
        "postproc.cod_method" => {
            cfg.cod_method = match (v, cfg.cod_method) {
                ("line_integral", _) => CodMethod::LineIntegral,
                ("displacement_trace", CodMethod::DisplacementTrace { offset }) => {
                    CodMethod::DisplacementTrace { offset }
                }
                ("displacement_trace", _) => CodMethod::DisplacementTrace { offset: 0.0 },
                _ => return Err(Some(())),
            }
        }
        "postproc.cod_offset" => cfg.cod_method = CodMethod::DisplacementTrace { offset: p(v)? },
        "postproc.cod_step" => cfg.cod_station_step = p(v)?,
        _ => return Err(None),
    }
    Ok(())
}

/// Parse and validate a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_over(RunConfig::default(), text)
}

/// Like [`parse_config`], with omitted keys taken from `base`.
pub fn parse_config_over(base: RunConfig, text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = base;
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
        seen.push(key.into());
        set(&mut cfg, key, value).map_err(|e| match e {
            None => ConfigError::UnknownKey { line, key: key.into() },
            Some(()) => ConfigError::Value { line, key: key.into(), value: value.into() },
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Every key with its current value; `parse_config(&dump_config(c))`
/// reproduces `c`.
pub fn dump_config(c: &RunConfig) -> String {
    let m = &c.material;
    let s = &c.solver;
    let mut o = String::new();
    let mut kv = |k: &str, v: String| writeln!(o, "{k} = {v}").unwrap();
    kv("mesh.dimension", c.dimension.to_string());
    kv("mesh.K", format!("{:?}", c.half_width));
    kv("mesh.n0", c.n0.to_string());
    kv("mesh.pre_refinements", c.pre_refinements.to_string());
    kv("mesh.band_refinements", c.band_refinements.to_string());
    kv("run.cycles", c.cycles.to_string());
    kv("run.loading_steps", c.loading_steps.to_string());
    kv("run.max_corrections", c.max_corrections.to_string());
    kv("run.output_dir", c.output_dir.clone());
    kv("run.deterministic", c.deterministic.to_string());
    match m.eps_mode {
        EpsMode::Tied { factor } => {
            kv("eps.mode", "tied".into());
            kv("eps.factor", format!("{factor:?}"));
        }
        EpsMode::Fixed(e) => {
            kv("eps.mode", "fixed".into());
            kv("eps.fixed", format!("{e:?}"));
        }
    }
    kv("eps.h_measure", if m.h_measure == HMeasure::Diameter { "diameter" } else { "edge" }.into());
    kv("material.E", format!("{:?}", m.youngs_modulus));
    kv("material.nu", format!("{:?}", m.poisson_ratio));
    kv("material.gc", format!("{:?}", m.gc));
    kv("material.p", format!("{:?}", m.pressure));
    kv("material.l0", format!("{:?}", m.l0));
    kv("material.kappa_factor", format!("{:?}", m.kappa_factor));
    let coupling = match m.pressure_coupling {
        PressureCoupling::Extrapolated => "extrapolated",
        PressureCoupling::Current => "current",
    };
    kv("material.pressure_coupling", coupling.into());
    kv("solver.newton_tol", format!("{:?}", s.tol));
    kv("solver.newton_abs_floor", format!("{:?}", s.abs_floor));
    kv("solver.newton_max_iter", s.max_iter.to_string());
    kv("solver.gmres_rtol", format!("{:?}", s.gmres.rtol));
    kv("solver.gmres_restart", s.gmres.restart.to_string());
    kv("solver.gmres_max_iter", s.gmres.max_iter.to_string());
    let prec = match s.preconditioner {
        PreconditionerKind::Amg => "amg",
        PreconditionerKind::Exact => "exact",
        PreconditionerKind::Diagonal => "diagonal",
    };
    kv("solver.preconditioner", prec.into());
    kv("solver.active_set_c", format!("{:?}", s.complementarity_factor));
    kv("solver.cycle_window", s.cycle_window.to_string());
    kv("solver.cycle_toggles", s.cycle_toggles.to_string());
    kv("solver.damping", s.damping.to_string());
    kv("solver.freeze_preconditioner", s.freeze_preconditioner.to_string());
    kv("solver.feasibility_tol", format!("{:?}", s.feasibility_tol));
    kv("amg.strength_threshold", format!("{:?}", s.amg.strength_threshold));
    kv("amg.smoother_omega", format!("{:?}", s.amg.smoother_omega));
    kv("amg.coarse_size", s.amg.coarse_size.to_string());
    kv("amg.max_levels", s.amg.max_levels.to_string());
    kv("adapt.phi_b", format!("{:?}", c.band_threshold));
    kv("adapt.theta", format!("{:?}", c.theta));
    kv("adapt.max_level", c.max_level.to_string());
    kv("adapt.estimator", c.estimator.to_string());
    kv("study.eps_list", list(&c.eps_list));
    kv("study.domains", list(&c.domains));
    match c.cod_method {
        CodMethod::LineIntegral => kv("postproc.cod_method", "line_integral".into()),
        CodMethod::DisplacementTrace { offset } => {
            kv("postproc.cod_method", "displacement_trace".into());
            kv("postproc.cod_offset", format!("{offset:?}"));
        }
    }
    kv("postproc.cod_step", format!("{:?}", c.cod_station_step));
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = parse_config("# nothing\n\n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.dimension, 2);
        assert_eq!(c.half_width, 20.0);
        assert_eq!(c.material.pressure, 1e-3);
    }

    #[test]
    fn rejects_bad_input_with_line() {
        assert_eq!(
            parse_config("mesh.K = 5\nmaterial.nu = 0.7\n").unwrap_err(),
            ConfigError::Invalid { key: "material.nu", reason: "must lie in [0, 0.5)".into() }
        );
        assert_eq!(
            parse_config("\nmesh.colour = red").unwrap_err(),
            ConfigError::UnknownKey { line: 2, key: "mesh.colour".into() }
        );
        assert!(matches!(parse_config("mesh.n0 = two"), Err(ConfigError::Value { line: 1, .. })));
        assert!(matches!(parse_config("mesh.n0 4"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(parse_config("mesh.n0 = 4\nmesh.n0 = 5"), Err(ConfigError::Duplicate { line: 2, .. })));
    }

    #[test]
    fn dump_round_trip() {
        let text = "solver.gmres_rtol = 1e-8\neps.mode = fixed\neps.fixed = 0.125\nstudy.domains = 5, 10\n\
                    postproc.cod_method = displacement_trace\npostproc.cod_offset = 0.01\nmesh.dimension = 3";
        let c = parse_config(text).unwrap();
        assert_eq!(c.solver.gmres.rtol, 1e-8);
        assert_eq!(parse_config(&dump_config(&c)).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(parse_config(&dump_config(&d)).unwrap(), d);
    }
}
