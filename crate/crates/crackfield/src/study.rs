//! The benchmark studies: single solve, epsilon convergence, domain size,
//! crack opening under adaptive and uniform refinement, and the 3d table.

use std::fmt::Write as _;
use std::path::Path;

use crackfield_core::adapt::{adaptive_cycle, refine_crack_region, seed, AdaptiveRun, LevelResult};
use crackfield_core::fem::{ConstraintSet, Dirichlet, DofMap};
use crackfield_core::functionals::{compute_cod, compute_tcv, stations, CodMethod, CodProfile};
use crackfield_core::mesh::{DomainSpec, Mesh};
use crackfield_core::model::{extrapolate_phi, Assembler, EpsMode, FractureState};
use crackfield_core::reference::{domain_error_table, fit_rate, richardson, tcv_exact, RateFit, SneddonParams};
use crackfield_core::solver::{solve_loading_sequence, NewtonReport};

use crate::config::{ConfigError, RunConfig};
use crate::output::{self, LevelRecord, OutputError, VtkExtras};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Core(#[from] crackfield_core::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("level {level} did not converge")]
    NotConverged { level: usize },
}

impl StudyError {
    /// Process exit code: 2 for solver failures, 3 for bad input, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        use crackfield_core::Error as E;
        match self {
            StudyError::NotConverged { .. } => 2,
            StudyError::Core(E::LinearSolver(_) | E::NewtonNotConverged { .. }) => 2,
            StudyError::Core(E::NotPositiveDefinite { .. } | E::Singular(_) | E::TooLargeForDirect(_)) => 2,
            StudyError::Core(_) | StudyError::Config(_) => 3,
            StudyError::Output(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Solve,
    EpsConvergence,
    DomainStudy,
    CodStudy,
    Sneddon3d,
}

impl StudyKind {
    /// Default configuration of the study before the user's file is applied.
    pub fn preset(self) -> RunConfig {
        let mut c = RunConfig::default();
        match self {
            StudyKind::Solve => {}
            StudyKind::EpsConvergence => {
                c.cycles = 3;
            }
            StudyKind::DomainStudy => {
                c.domains = vec![5.0, 10.0, 20.0];
                c.cycles = 6;
            }
            StudyKind::CodStudy => {
                c.half_width = 5.0;
                c.n0 = 5;
                c.cycles = 7;
            }
            StudyKind::Sneddon3d => {
                c.dimension = 3;
                c.half_width = 5.0;
                c.n0 = 1;
                c.pre_refinements = 3;
                c.band_refinements = 1;
                c.cycles = 3;
            }
        }
        c
    }

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Solve => "solve",
            StudyKind::EpsConvergence => "eps-conv",
            StudyKind::DomainStudy => "domain-study",
            StudyKind::CodStudy => "cod-study",
            StudyKind::Sneddon3d => "sneddon3d",
        }
    }
}

pub fn sneddon(cfg: &RunConfig) -> SneddonParams {
    SneddonParams::from_material(&cfg.material, cfg.dimension)
}

/// Global mesh with the crack region refined to the starting band edge.
pub fn initial_mesh(cfg: &RunConfig) -> Result<Mesh, StudyError> {
    let mut m = Mesh::new(DomainSpec::new(cfg.dimension, cfg.half_width, cfg.n0)?)?;
    m.uniform_refine(cfg.pre_refinements)?;
    refine_crack_region(&mut m, cfg.material.l0, cfg.initial_band_edge())?;
    Ok(m)
}

/// Newton iterations with a linear solve and mean GMRES iterations per solve.
pub fn iteration_counts(reports: &[NewtonReport]) -> (usize, f64) {
    let newton: usize = reports.iter().map(NewtonReport::newton_iterations).sum();
    let gmres: usize = reports.iter().map(NewtonReport::gmres_total).sum();
    (newton, if newton == 0 { 0.0 } else { gmres as f64 / newton as f64 })
}

fn first_linear_solve(r: &NewtonReport) -> usize {
    r.iterations.iter().map(|i| i.gmres_iterations).find(|&g| g > 0).unwrap_or(0)
}

/// Solved level with the functionals every study needs.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub dofs: usize,
    pub h_min: f64,
    pub eps: f64,
    pub tcv: f64,
    pub cod0: f64,
    pub newton: usize,
    pub gmres_mean: f64,
    /// GMRES iterations of the first Newton step of each loading step.
    pub first_gmres: Vec<usize>,
    pub converged: bool,
}

impl LevelSummary {
    fn from_level(mesh: &Mesh, dofmap: &DofMap, state: &FractureState, r: &LevelResult) -> Result<Self, StudyError> {
        let cod0 = compute_cod(mesh, dofmap, &state.fields.values, &[0.0], CodMethod::LineIntegral)?.openings[0];
        let (newton, gmres_mean) = iteration_counts(&r.reports);
        Ok(Self {
            level: r.level,
            dofs: r.n_dofs,
            h_min: r.min_edge,
            eps: r.eps,
            tcv: r.tcv,
            cod0,
            newton,
            gmres_mean,
            first_gmres: r.reports.iter().map(first_linear_solve).collect(),
            converged: r.converged,
        })
    }

    pub fn record(&self, exact: f64) -> LevelRecord {
        LevelRecord {
            level: self.level,
            dofs: self.dofs,
            eps: self.eps,
            h_min: self.h_min,
            tcv: self.tcv,
            tcv_rel_err: (self.tcv - exact).abs() / exact,
            newton_iters: self.newton,
            gmres_mean: self.gmres_mean,
        }
    }
}

/// Adaptive run with per-level summaries. Non-converged levels end the run
/// and are reported as an error after the summaries are handed to `sink`.
pub fn run_adaptive(
    cfg: &RunConfig,
    mut sink: impl FnMut(&Mesh, &DofMap, &FractureState, &LevelSummary),
) -> Result<(AdaptiveRun, Vec<LevelSummary>), StudyError> {
    cfg.validate()?;
    let mesh = initial_mesh(cfg)?;
    let mut summaries = Vec::new();
    let mut failure: Option<StudyError> = None;
    let run = adaptive_cycle(mesh, &cfg.material, &cfg.solver, &cfg.policy(), &cfg.cycle_options(), |m, d, s, r| {
        match LevelSummary::from_level(m, d, s, r) {
            Ok(sum) => {
                sink(m, d, s, &sum);
                summaries.push(sum);
            }
            Err(e) => failure = failure.take().or(Some(e)),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(bad) = summaries.iter().find(|s| !s.converged) {
        return Err(StudyError::NotConverged { level: bad.level });
    }
    Ok((run, summaries))
}

/// Globally refined meshes `refinements` times beyond the configured root
/// mesh, each solved from a fresh seed.
pub fn run_uniform(
    cfg: &RunConfig,
    refinements: impl IntoIterator<Item = usize>,
) -> Result<Vec<LevelSummary>, StudyError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (level, r) in refinements.into_iter().enumerate() {
        let mut m = Mesh::new(DomainSpec::new(cfg.dimension, cfg.half_width, cfg.n0)?)?;
        m.uniform_refine(cfg.pre_refinements + r)?;
        let d = DofMap::new(&m);
        let s = seed(&m, &d, cfg.material.l0)?;
        let mut state = FractureState::from_seed(&d, &s);
        let reports = solve_loading_sequence(&d, &cfg.material, &mut state, cfg.loading_steps, &cfg.solver)?;
        let converged = reports.len() == cfg.loading_steps && reports.iter().all(|r| r.converged);
        let lr = LevelResult {
            level,
            n_dofs: d.n_dofs(),
            n_cells: d.n_cells(),
            min_edge: d.min_edge(),
            eps: cfg.material.coefficients(cfg.dimension, d.min_edge()).eps,
            h_target: d.min_edge(),
            tcv: compute_tcv(&d, &state.fields.values),
            corrections: 0,
            converged,
            reports,
        };
        let sum = LevelSummary::from_level(&m, &d, &state, &lr)?;
        log::info!("uniform level {level}: dofs={} cod0={:.6e} tcv={:.6e}", sum.dofs, sum.cod0, sum.tcv);
        out.push(sum);
        if !converged {
            return Err(StudyError::NotConverged { level });
        }
    }
    Ok(out)
}

fn level_table(levels: &[LevelSummary], exact: f64) -> String {
    let mut s = String::from("level      dofs      h_min        eps          TCV     error%  newton  gmres\n");
    for l in levels {
        writeln!(
            s,
            "{:>5} {:>9} {:>10.4e} {:>10.4e} {:>12.5e} {:>9.3} {:>7} {:>6.1}",
            l.level,
            l.dofs,
            l.h_min,
            l.eps,
            l.tcv,
            100.0 * (l.tcv - exact).abs() / exact,
            l.newton,
            l.gmres_mean
        )
        .unwrap();
    }
    s
}

fn write_out(out: Option<&Path>, name: &str, text: &str) -> Result<(), StudyError> {
    if let Some(dir) = out {
        output::write_file(&dir.join(name), text)?;
    }
    Ok(())
}

/// Outcome of `solve`.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub levels: Vec<LevelSummary>,
    pub cod: CodProfile,
    pub summary: String,
}

pub fn solve(cfg: &RunConfig, out: Option<&Path>, dump_matrices: bool) -> Result<SolveOutcome, StudyError> {
    let exact = tcv_exact(&sneddon(cfg));
    let (run, levels) = run_adaptive(cfg, |_, _, _, _| {})?;
    let (mesh, dofmap, state) = (&run.mesh, &run.dofmap, &run.state);
    let kk = cfg.half_width.min(1.5 * cfg.material.l0);
    let cod = compute_cod(mesh, dofmap, &state.fields.values, &stations(-kk, kk, cfg.cod_station_step), cfg.cod_method)?;
    if let Some(dir) = out {
        let extras = VtkExtras { phi_old: Some(&state.phi_old), estimator: None };
        output::write_vtk(&dir.join("solution.vtk"), dofmap, &state.fields.values, extras)?;
        let records: Vec<LevelRecord> = levels.iter().map(|l| l.record(exact)).collect();
        output::write_study_csv(&dir.join("levels.csv"), &records)?;
        let rows: Vec<Vec<f64>> = cod.stations.iter().zip(&cod.openings).map(|(x, w)| vec![*x, *w]).collect();
        output::write_file(&dir.join("cod.csv"), &output::table_csv(&["station", "opening"], &rows))?;
        if dump_matrices {
            dump_system(dir, dofmap, cfg, state)?;
        }
    }
    let mut summary = format!("solve: {}d, K = {}, reference TCV {:.5e}\n", cfg.dimension, cfg.half_width, exact);
    summary.push_str(&level_table(&levels, exact));
    write_out(out, "summary.txt", &summary)?;
    Ok(SolveOutcome { levels, cod, summary })
}

fn matrix_market(m: &crackfield_core::linsolve::CsrMatrix) -> String {
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    writeln!(s, "{} {} {}", m.nrows(), m.ncols(), m.nnz()).unwrap();
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (j, v) in cols.iter().zip(vals) {
            writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v).unwrap();
        }
    }
    s
}

/// Matrix Market dump of the Newton system at the final state.
fn dump_system(dir: &Path, dofmap: &DofMap, cfg: &RunConfig, state: &FractureState) -> Result<(), StudyError> {
    let co = cfg.material.coefficients(cfg.dimension, dofmap.min_edge());
    let asm = Assembler::new(dofmap, co.coupling);
    let cs = ConstraintSet::build(dofmap, Dirichlet::ClampedDisplacement, &[]);
    let sys = asm.system(dofmap, &cs, &co, &state.fields.values, &extrapolate_phi(state));
    output::write_file(&dir.join("m_uu.mtx"), &matrix_market(&sys.m_uu))?;
    output::write_file(&dir.join("m_phiu.mtx"), &matrix_market(&sys.m_phiu))?;
    output::write_file(&dir.join("m_phiphi.mtx"), &matrix_market(&sys.m_phiphi))?;
    if let Some(m) = &sys.m_uphi {
        output::write_file(&dir.join("m_uphi.mtx"), &matrix_market(m))?;
    }
    let mut rhs = format!("%%MatrixMarket matrix array real general\n{} 1\n", sys.rhs.len());
    for v in &sys.rhs {
        writeln!(rhs, "{v:.17e}").unwrap();
    }
    output::write_file(&dir.join("rhs.mtx"), &rhs)?;
    Ok(())
}

/// Extrapolated limit of a level sequence, or its last value when the
/// differences do not form a convergent sequence.
pub fn limit_or_last(values: &[f64]) -> (f64, Option<RateFit>) {
    match richardson(values, 2.0) {
        Ok(f) => (f.limit, Some(f)),
        Err(_) => (*values.last().unwrap_or(&f64::NAN), None),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsRow {
    pub eps: f64,
    pub tcv_finest: f64,
    /// Richardson limit in `h` at this `eps`.
    pub tcv_limit: f64,
    /// `|tcv_limit - tcv_star|`.
    pub error: f64,
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone)]
pub struct EpsStudy {
    /// Closed-form Sneddon volume.
    pub exact: f64,
    /// Limit of the `tcv_limit` column as `eps -> 0`.
    pub tcv_star: f64,
    pub rows: Vec<EpsRow>,
    /// Slope of the error against `eps`.
    pub slope: Option<f64>,
    /// Same slope with the closed-form volume as reference.
    pub slope_exact: Option<f64>,
    pub summary: String,
}

/// Constant ratio of a geometric parameter list.
fn geometric_ratio(list: &[f64]) -> Option<f64> {
    let r = list.first()? / list.get(1)?;
    list.windows(2).all(|w| (w[0] / w[1] - r).abs() <= 1e-9 * r).then_some(r)
}

/// TCV at fixed `eps`, extrapolated in `h`, then in `eps` for the reference.
pub fn eps_convergence(cfg: &RunConfig, out: Option<&Path>) -> Result<EpsStudy, StudyError> {
    let exact = tcv_exact(&sneddon(cfg));
    let ratio = geometric_ratio(&cfg.eps_list).filter(|r| *r > 1.0).ok_or_else(|| ConfigError::Invalid {
        key: "study.eps_list",
        reason: "must be a decreasing geometric sequence".into(),
    })?;
    let mut rows = Vec::new();
    for &eps in &cfg.eps_list {
        let mut c = cfg.clone();
        c.material.eps_mode = EpsMode::Fixed(eps);
        let (_, levels) = run_adaptive(&c, |_, _, _, _| {})?;
        let tcvs: Vec<f64> = levels.iter().map(|l| l.tcv).collect();
        let (tcv_limit, _) = limit_or_last(&tcvs);
        log::info!("eps {eps}: tcv levels {tcvs:?}, limit {tcv_limit:e}");
        rows.push(EpsRow { eps, tcv_finest: *tcvs.last().unwrap(), tcv_limit, error: f64::NAN, levels });
    }
    let limits: Vec<f64> = rows.iter().map(|r| r.tcv_limit).collect();
    let tcv_star = richardson(&limits, ratio)?.limit;
    for r in &mut rows {
        r.error = (r.tcv_limit - tcv_star).abs();
    }
    let slope = fit_rate(&rows.iter().map(|r| (r.eps, r.error)).collect::<Vec<_>>()).ok();
    let slope_exact = fit_rate(&rows.iter().map(|r| (r.eps, (r.tcv_limit - exact).abs())).collect::<Vec<_>>()).ok();
    let mut summary = format!(
        "eps convergence on K = {}, TCV* = {tcv_star:.5e} (eps -> 0), exact {exact:.5e}\n",
        cfg.half_width
    );
    summary.push_str("       eps   TCV(finest)   TCV(h->0)   |TCV - TCV*|  |TCV - exact|\n");
    for r in &rows {
        writeln!(
            summary,
            "{:>10.4e} {:>12.5e} {:>12.5e} {:>13.5e} {:>13.5e}",
            r.eps,
            r.tcv_finest,
            r.tcv_limit,
            r.error,
            (r.tcv_limit - exact).abs()
        )
        .unwrap();
    }
    let show = |q: Option<f64>| q.map_or("undefined".to_string(), |q| format!("{q:.3}"));
    writeln!(summary, "fitted rate in eps: {} (against exact: {})", show(slope), show(slope_exact)).unwrap();
    let csv_rows: Vec<Vec<f64>> =
        rows.iter().map(|r| vec![r.eps, r.tcv_finest, r.tcv_limit, r.error, (r.tcv_limit - exact).abs()]).collect();
    write_out(
        out,
        "eps_convergence.csv",
        &output::table_csv(&["eps", "tcv_finest", "tcv_limit", "error_star", "error_exact"], &csv_rows),
    )?;
    write_out(out, "summary.txt", &summary)?;
    Ok(EpsStudy { exact, tcv_star, rows, slope, slope_exact, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainRow {
    pub half_width: f64,
    pub tcv: Vec<f64>,
    pub limit: f64,
    pub order: Option<f64>,
    pub error_pct: f64,
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone)]
pub struct DomainStudy {
    pub reference: f64,
    pub rows: Vec<DomainRow>,
    pub summary: String,
}

/// Extrapolated TCV for each domain size with the root edge held fixed.
pub fn domain_study(cfg: &RunConfig, out: Option<&Path>) -> Result<DomainStudy, StudyError> {
    let reference = tcv_exact(&sneddon(cfg));
    let root_edge = 2.0 * cfg.half_width / cfg.n0 as f64;
    let mut rows = Vec::new();
    for &k in &cfg.domains {
        let mut c = cfg.clone();
        c.half_width = k;
        c.n0 = ((2.0 * k / root_edge).round() as usize).max(1);
        let (_, levels) = run_adaptive(&c, |_, _, _, _| {})?;
        let tcv: Vec<f64> = levels.iter().map(|l| l.tcv).collect();
        let (limit, fit) = limit_or_last(&tcv);
        let error_pct = domain_error_table(&[(k, limit)], reference)[0].1;
        log::info!("domain K = {k}: limit {limit:e}, error {error_pct:.3}%");
        rows.push(DomainRow { half_width: k, tcv, limit, order: fit.map(|f| f.order), error_pct, levels });
    }
    let mut summary = format!("domain study, reference TCV {reference:.5e}\n");
    summary.push_str("  domain   finest TCV   extrapolated  order   error%\n");
    for r in &rows {
        writeln!(
            summary,
            "{:>5}x{:<3} {:>11.5e} {:>12.5e} {:>6} {:>8.3}",
            2.0 * r.half_width,
            2.0 * r.half_width,
            r.tcv.last().unwrap(),
            r.limit,
            r.order.map_or("-".into(), |q| format!("{q:.2}")),
            r.error_pct
        )
        .unwrap();
    }
    let csv_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.half_width, *r.tcv.last().unwrap(), r.limit, r.order.unwrap_or(f64::NAN), r.error_pct])
        .collect();
    write_out(
        out,
        "domain_study.csv",
        &output::table_csv(&["K", "tcv_finest", "tcv_extrapolated", "order", "error_pct"], &csv_rows),
    )?;
    write_out(out, "summary.txt", &summary)?;
    Ok(DomainStudy { reference, rows, summary })
}

/// Errors of a COD(0) sequence against a reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct CodSequence {
    pub levels: Vec<LevelSummary>,
    pub errors: Vec<f64>,
    /// Slope of the error against `N^(-1/d)` over `fitted`.
    pub rate: Option<f64>,
    pub fitted: std::ops::Range<usize>,
}

impl CodSequence {
    pub fn new(levels: Vec<LevelSummary>, reference: f64, dim: usize, fitted: std::ops::Range<usize>) -> Self {
        let errors: Vec<f64> = levels.iter().map(|l| (l.cod0 - reference).abs()).collect();
        let pairs: Vec<(f64, f64)> = levels[fitted.clone()]
            .iter()
            .zip(&errors[fitted.clone()])
            .map(|(l, e)| ((l.dofs as f64).powf(-1.0 / dim as f64), *e))
            .collect();
        let rate = fit_rate(&pairs).ok();
        Self { levels, errors, rate, fitted }
    }
}

#[derive(Debug, Clone)]
pub struct CodStudy {
    /// Richardson limit of the adaptive COD(0) sequence.
    pub reference: f64,
    pub adaptive: CodSequence,
    pub uniform: CodSequence,
    pub summary: String,
}

/// Number of global refinements of the root mesh whose edge first reaches `h`.
fn refinements_to(cfg: &RunConfig, h: f64) -> usize {
    let mut r = 0;
    while cfg.global_edge() / (1u64 << r) as f64 > h * (1.0 + 1e-9) {
        r += 1;
    }
    r
}

/// COD(0) convergence under adaptive refinement and under uniform
/// refinement from the same starting resolution up to the adaptive DoF
/// budget. Both sequences are measured against the Richardson limit of the
/// adaptive one. The first adaptive level carries the initial corrections
/// and the last one defines the reference, so neither enters the fit.
pub fn cod_study(cfg: &RunConfig, out: Option<&Path>) -> Result<CodStudy, StudyError> {
    let (_, adaptive) = run_adaptive(cfg, |_, _, _, _| {})?;
    let cod: Vec<f64> = adaptive.iter().map(|l| l.cod0).collect();
    let reference = richardson(&cod, 2.0)?.limit;
    let budget = adaptive.iter().map(|l| l.dofs).max().unwrap_or(0);
    let d = cfg.dimension;
    let mut refs = Vec::new();
    for r in refinements_to(cfg, cfg.initial_band_edge()).. {
        let cells_per_side = (cfg.n0 << (cfg.pre_refinements + r)) as f64;
        let dofs = (d + 1) as f64 * (cells_per_side + 1.0).powi(d as i32);
        if dofs > budget as f64 {
            break;
        }
        refs.push(r);
    }
    let uniform = run_uniform(cfg, refs)?;
    let na = adaptive.len();
    let nu = uniform.len();
    let adaptive = CodSequence::new(adaptive, reference, d, 1.min(na)..na.saturating_sub(1));
    let uniform = CodSequence::new(uniform, reference, d, 0..nu);
    let mut summary = format!("COD(0) convergence on K = {}, reference {reference:.6e}\n", cfg.half_width);
    for (name, seq) in [("adaptive", &adaptive), ("uniform", &uniform)] {
        writeln!(summary, "{name}:").unwrap();
        summary.push_str("      dofs      h_min       COD(0)       error\n");
        for (l, e) in seq.levels.iter().zip(&seq.errors) {
            writeln!(summary, "{:>10} {:>10.4e} {:>12.6e} {:>11.4e}", l.dofs, l.h_min, l.cod0, e).unwrap();
        }
        match seq.rate {
            Some(q) => writeln!(summary, "rate in N^(-1/{d}): {q:.3}").unwrap(),
            None => writeln!(summary, "rate in N^(-1/{d}): undefined").unwrap(),
        }
    }
    let mut rows = Vec::new();
    for (kind, seq) in [(0.0, &adaptive), (1.0, &uniform)] {
        for (l, e) in seq.levels.iter().zip(&seq.errors) {
            rows.push(vec![kind, l.dofs as f64, l.h_min, l.cod0, *e]);
        }
    }
    write_out(out, "cod_study.csv", &output::table_csv(&["uniform", "dofs", "h_min", "cod0", "error"], &rows))?;
    write_out(out, "summary.txt", &summary)?;
    Ok(CodStudy { reference, adaptive, uniform, summary })
}

/// First-step GMRES counts on successive global refinements.
pub fn solver_trend(cfg: &RunConfig, refinements: std::ops::RangeInclusive<usize>) -> Result<Vec<LevelSummary>, StudyError> {
    run_uniform(cfg, refinements)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row3d {
    pub resolution: f64,
    pub dofs: usize,
    pub eps: f64,
    pub tcv: f64,
    pub error_pct: f64,
}

#[derive(Debug, Clone)]
pub struct Sneddon3d {
    pub reference: f64,
    pub rows: Vec<Row3d>,
    pub summary: String,
}

/// Tied-epsilon adaptive convergence table for the penny-shaped crack.
pub fn sneddon3d(cfg: &RunConfig, out: Option<&Path>) -> Result<Sneddon3d, StudyError> {
    if cfg.dimension != 3 {
        return Err(ConfigError::Invalid { key: "mesh.dimension", reason: "the 3d study needs dimension 3".into() }.into());
    }
    let reference = tcv_exact(&sneddon(cfg));
    let (_, levels) = run_adaptive(cfg, |_, _, _, l| log::info!("3d level {} done: tcv {:.5e}", l.level, l.tcv))?;
    let rows: Vec<Row3d> = levels
        .iter()
        .map(|l| Row3d {
            resolution: 10.0 * cfg.material.l0 / l.h_min,
            dofs: l.dofs,
            eps: l.eps,
            tcv: l.tcv,
            error_pct: 100.0 * (l.tcv - reference).abs() / reference,
        })
        .collect();
    let mut summary = String::from(" 10l0/h      DoFs         eps          TCV     Error\n");
    for r in &rows {
        writeln!(summary, "{:>7.0} {:>9} {:>11.4e} {:>12.4e} {:>8.2}%", r.resolution, r.dofs, r.eps, r.tcv, r.error_pct)
            .unwrap();
    }
    writeln!(summary, "reference (Sneddon) {reference:.4e}").unwrap();
    let csv_rows: Vec<Vec<f64>> =
        rows.iter().map(|r| vec![r.resolution, r.dofs as f64, r.eps, r.tcv, r.error_pct]).collect();
    write_out(out, "sneddon3d.csv", &output::table_csv(&["resolution", "dofs", "eps", "tcv", "error_pct"], &csv_rows))?;
    let records: Vec<LevelRecord> = levels.iter().map(|l| l.record(reference)).collect();
    if let Some(dir) = out {
        output::write_study_csv(&dir.join("levels.csv"), &records)?;
    }
    write_out(out, "summary.txt", &summary)?;
    Ok(Sneddon3d { reference, rows, summary })
}
