//! Crack-band refinement, the displacement gradient-jump estimator and the
//! adaptive solve-estimate-mark-refine loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::field::{evaluate_in_cell, reference_coords};
use crate::fem::{DofMap, Quadrature, Transfer};
use crate::functionals::compute_tcv;
use crate::mesh::{CellId, FaceKind, Mesh};
use crate::model::{crack_cells, initial_crack, FractureState, Material};
use crate::solver::{newton_active_set_step, NewtonReport, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementPolicy {
    /// Cells with a nodal phase field below this value belong to the band.
    pub band_threshold: f64,
    /// Largest edge allowed in the band.
    pub h_target: f64,
    /// Fraction of the total squared indicator covered by marked cells.
    pub theta: f64,
    pub max_level: u8,
    pub estimator: bool,
}

impl RefinementPolicy {
    pub fn new(h_target: f64) -> Self {
        Self { band_threshold: 0.8, h_target, theta: 0.3, max_level: 20, estimator: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.band_threshold > 0.0 && self.band_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!("band threshold {} not in (0, 1)", self.band_threshold)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!("marking fraction {} not in [0, 1]", self.theta)));
        }
        if !(self.h_target > 0.0) {
            return Err(Error::InvalidParameter(format!("band edge {} must be positive", self.h_target)));
        }
        Ok(())
    }
}

/// Per-cell indicator, indexed by DoF-map cell slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorField {
    pub eta: Vec<f64>,
}

impl EstimatorField {
    pub fn total_squared(&self) -> f64 {
        self.eta.iter().map(|e| e * e).sum()
    }
}

/// Jumps of the normal displacement gradient across interior faces. Each
/// face contributes `h_F / 2 * int_F |[grad u . n]|^2` to both adjacent
/// cells; coarse-fine faces are integrated over the fine subface.
pub fn jump_estimator(mesh: &Mesh, dofmap: &DofMap, values: &[f64]) -> EstimatorField {
    let d = dofmap.dim();
    let fq = Quadrature::face(d);
    let mut eta2 = vec![0.0; dofmap.n_cells()];
    for face in mesh.active_faces() {
        let FaceKind::Interior { neighbor, .. } = face.kind else { continue };
        let (Some(sc), Some(sn)) = (dofmap.slot_of(face.cell), dofmap.slot_of(neighbor)) else { continue };
        let axis = face.face / 2;
        let side = (face.face % 2) as f64;
        let h = dofmap.cell_edge(sc);
        let lo = dofmap.cell_lower(sc);
        let mut integral = 0.0;
        for (q, w) in fq.points.iter().zip(&fq.weights) {
            let mut xi = [0.0; 3];
            let mut k = 0;
            for a in 0..d {
                if a == axis {
                    xi[a] = side;
                } else {
                    xi[a] = q[k];
                    k += 1;
                }
            }
            let mut x = [0.0; 3];
            for a in 0..d {
                x[a] = lo[a] + xi[a] * h;
            }
            let gc = evaluate_in_cell(dofmap, values, sc, &xi).grad_u;
            let gn = evaluate_in_cell(dofmap, values, sn, &reference_coords(dofmap, sn, &x)).grad_u;
            let jump: f64 = (0..d).map(|c| (gc[c][axis] - gn[c][axis]).powi(2)).sum();
            integral += w * jump;
        }
        let area = (0..d - 1).fold(1.0, |acc, _| acc * h);
        let contrib = 0.5 * h * integral * area;
        eta2[sc] += contrib;
        eta2[sn] += contrib;
    }
    EstimatorField { eta: eta2.into_iter().map(f64::sqrt).collect() }
}

/// Smallest nodal value of `phi` (one entry per vertex) on each cell slot.
pub fn cell_min_phi(dofmap: &DofMap, phi: &[f64]) -> Vec<f64> {
    (0..dofmap.n_cells())
        .map(|s| dofmap.cell_vertices(s).iter().map(|&v| phi[v]).fold(f64::INFINITY, f64::min))
        .collect()
}

fn coarser_than(edge: f64, target: f64) -> bool {
    edge > target * (1.0 + 1e-9)
}

/// Band cells that are still too coarse.
pub fn unsaturated_band(mesh: &Mesh, dofmap: &DofMap, phi: &[f64], policy: &RefinementPolicy) -> Vec<CellId> {
    cell_min_phi(dofmap, phi)
        .iter()
        .enumerate()
        .filter(|&(s, &m)| m < policy.band_threshold && coarser_than(dofmap.cell_edge(s), policy.h_target))
        .map(|(s, _)| dofmap.cells()[s])
        .filter(|&c| mesh.level(c) < policy.max_level)
        .collect()
}

/// Band cells plus the cells carrying the largest indicators up to a
/// fraction `theta` of the squared total. Cells already at the band edge or
/// at `max_level` are not marked by the indicator.
pub fn mark_cells(
    mesh: &Mesh,
    dofmap: &DofMap,
    phi: &[f64],
    eta: Option<&EstimatorField>,
    policy: &RefinementPolicy,
) -> Vec<CellId> {
    let mut marked = unsaturated_band(mesh, dofmap, phi, policy);
    if let (Some(est), true) = (eta, policy.estimator) {
        let total = est.total_squared();
        if total > 0.0 && policy.theta > 0.0 {
            let mut order: Vec<usize> = (0..est.eta.len()).collect();
            order.sort_by(|&a, &b| est.eta[b].total_cmp(&est.eta[a]).then(a.cmp(&b)));
            let mut acc = 0.0;
            for s in order {
                if acc >= policy.theta * total || est.eta[s] == 0.0 {
                    break;
                }
                acc += est.eta[s] * est.eta[s];
                let c = dofmap.cells()[s];
                if coarser_than(dofmap.cell_edge(s), policy.h_target) && mesh.level(c) < policy.max_level {
                    marked.push(c);
                }
            }
        }
    }
    marked.sort_unstable();
    marked.dedup();
    marked
}

/// Refine the cells meeting the crack surface until their edge is at most
/// `h_target`.
pub fn refine_crack_region(mesh: &mut Mesh, l0: f64, h_target: f64) -> Result<()> {
    loop {
        let coarse: Vec<CellId> =
            crack_cells(mesh, l0).into_iter().filter(|&c| coarser_than(mesh.edge(c), h_target)).collect();
        if coarse.is_empty() {
            return Ok(());
        }
        mesh.refine(&coarse)?;
    }
}

/// Overwrite hanging-vertex entries of a nodal array by their interpolated
/// values, making it a conforming finite element function.
pub fn conform_nodal(dofmap: &DofMap, nodal: &mut [f64]) {
    for (&v, parents) in dofmap.hanging() {
        nodal[v] = parents.iter().map(|&(p, w)| w * nodal[p]).sum();
    }
}

/// Conforming seed on the current mesh.
pub fn seed(mesh: &Mesh, dofmap: &DofMap, l0: f64) -> Result<Vec<f64>> {
    let mut s = initial_crack(mesh, dofmap, l0)?;
    conform_nodal(dofmap, &mut s);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions {
    /// Refinement cycles after the first solve.
    pub cycles: usize,
    /// Loading steps at constant pressure on every level.
    pub loading_steps: usize,
    /// Halve the band edge after every level.
    pub halve_band: bool,
    /// Re-solves per level after refining a band that the solution widened.
    pub max_corrections: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self { cycles: 0, loading_steps: 2, halve_band: true, max_corrections: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub n_dofs: usize,
    pub n_cells: usize,
    pub min_edge: f64,
    pub eps: f64,
    pub h_target: f64,
    pub tcv: f64,
    /// Band corrections performed before the recorded solve.
    pub corrections: usize,
    pub converged: bool,
    pub reports: Vec<NewtonReport>,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub mesh: Mesh,
    pub dofmap: DofMap,
    pub state: FractureState,
    pub levels: Vec<LevelResult>,
}

fn solve_level(
    dofmap: &DofMap,
    material: &Material,
    state: &mut FractureState,
    solver: &SolverOptions,
    steps: usize,
) -> Result<(Vec<NewtonReport>, bool)> {
    let mut reports = Vec::with_capacity(steps);
    for k in 0..steps {
        if k > 0 {
            state.advance(dofmap);
        }
        let rep = newton_active_set_step(dofmap, material, state, solver)?;
        let ok = rep.converged;
        reports.push(rep);
        if !ok {
            return Ok((reports, false));
        }
    }
    Ok((reports, true))
}

/// Refine `marked`, keep refining until the transferred band is saturated,
/// then start a fresh loading sequence from the seed with the transferred
/// solution as initial guess.
fn refine_and_reseed(
    mesh: &mut Mesh,
    old_map: DofMap,
    state: &FractureState,
    marked: &[CellId],
    policy: &RefinementPolicy,
    l0: f64,
) -> Result<(DofMap, FractureState)> {
    let old_mesh = mesh.clone();
    let old_phi = state.fields.phi(&old_map);
    mesh.refine(marked)?;
    let mut dofmap = loop {
        let map = DofMap::new(mesh);
        let phi = Transfer::new(&old_mesh, &old_map, mesh, &map)?.nodal(old_phi)?;
        let more = unsaturated_band(mesh, &map, &phi, policy);
        if more.is_empty() {
            break map;
        }
        mesh.refine(&more)?;
    };
    refine_crack_region(mesh, l0, policy.h_target)?;
    if mesh.revision() != dofmap.mesh_revision() {
        dofmap = DofMap::new(mesh);
    }
    let fields = Transfer::new(&old_mesh, &old_map, mesh, &dofmap)?.field(&state.fields)?;
    let s = seed(mesh, &dofmap, l0)?;
    let mut next = FractureState::from_seed(&dofmap, &s);
    let nu = dofmap.n_u();
    next.fields.values[..nu].copy_from_slice(&fields.values[..nu]);
    for (v, p) in next.fields.phi_mut(&dofmap).iter_mut().enumerate() {
        *p = fields.values[nu + v].min(s[v]);
    }
    Ok((dofmap, next))
}

/// Solve, then repeat `cycles` times: estimate, mark, refine until the band
/// is saturated, transfer the solution as initial guess, re-seed the crack
/// and solve again. The callback sees every solved level. A level whose
/// Newton iteration fails ends the run with the levels computed so far.
pub fn adaptive_cycle<F>(
    mut mesh: Mesh,
    material: &Material,
    solver: &SolverOptions,
    policy: &RefinementPolicy,
    opts: &CycleOptions,
    mut on_level: F,
) -> Result<AdaptiveRun>
where
    F: FnMut(&Mesh, &DofMap, &FractureState, &LevelResult),
{
    policy.validate()?;
    material.validate()?;
    if opts.loading_steps == 0 {
        return Err(Error::InvalidParameter("need at least one loading step".into()));
    }
    let dim = mesh.dim();
    let mut policy = *policy;
    let mut dofmap = DofMap::new(&mesh);
    let s = seed(&mesh, &dofmap, material.l0)?;
    let mut state = FractureState::from_seed(&dofmap, &s);
    let mut levels = Vec::new();
    for level in 0..=opts.cycles {
        let mut reports = Vec::new();
        let mut corrections = 0;
        let converged = loop {
            let (mut reps, ok) = solve_level(&dofmap, material, &mut state, solver, opts.loading_steps)?;
            reports.append(&mut reps);
            if !ok || corrections == opts.max_corrections {
                break ok;
            }
            let band = unsaturated_band(&mesh, &dofmap, state.fields.phi(&dofmap), &policy);
            if band.is_empty() {
                break ok;
            }
            log::debug!("level {level}: refining {} unsaturated band cells", band.len());
            corrections += 1;
            (dofmap, state) = refine_and_reseed(&mut mesh, dofmap, &state, &band, &policy, material.l0)?;
        };
        let rec = LevelResult {
            level,
            n_dofs: dofmap.n_dofs(),
            n_cells: dofmap.n_cells(),
            min_edge: dofmap.min_edge(),
            eps: material.coefficients(dim, dofmap.min_edge()).eps,
            h_target: policy.h_target,
            tcv: compute_tcv(&dofmap, &state.fields.values),
            corrections,
            converged,
            reports,
        };
        log::info!(
            "level {} dofs={} min_edge={:.4e} eps={:.4e} tcv={:.6e}",
            level,
            rec.n_dofs,
            rec.min_edge,
            rec.eps,
            rec.tcv
        );
        on_level(&mesh, &dofmap, &state, &rec);
        levels.push(rec);
        if !converged || level == opts.cycles {
            break;
        }

        let eta = policy.estimator.then(|| jump_estimator(&mesh, &dofmap, &state.fields.values));
        if opts.halve_band {
            policy.h_target *= 0.5;
        }
        let marked = mark_cells(&mesh, &dofmap, state.fields.phi(&dofmap), eta.as_ref(), &policy);
        (dofmap, state) = refine_and_reseed(&mut mesh, dofmap, &state, &marked, &policy, material.l0)?;
    }
    Ok(AdaptiveRun { mesh, dofmap, state, levels })
}
