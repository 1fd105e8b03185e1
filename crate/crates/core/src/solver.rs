//! Combined semi-smooth Newton / primal-dual active set iteration for one
//! loading step, with detection of alternating active-set indices.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::fem::{ConstraintSet, Dirichlet, DofMap};
use crate::linsolve::{gmres, AmgOptions, BlockPreconditioner, GmresOptions, PreconditionerKind};
use crate::model::{extrapolate_phi, Assembler, FractureState, Material};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual reduction, checked per block.
    pub tol: f64,
    pub abs_floor: f64,
    pub max_iter: usize,
    /// `c = complementarity_factor * G_c / eps`.
    pub complementarity_factor: f64,
    pub cycle_window: usize,
    pub cycle_toggles: usize,
    pub gmres: GmresOptions,
    pub preconditioner: PreconditionerKind,
    pub amg: AmgOptions,
    /// Keep the first preconditioner of a loading step for all iterations.
    pub freeze_preconditioner: bool,
    /// Halve the step (up to 4 times) if the residual grows tenfold.
    pub damping: bool,
    /// Largest allowed `phi - phi_old` at convergence.
    pub feasibility_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            abs_floor: 1e-11,
            max_iter: 50,
            complementarity_factor: 100.0,
            cycle_window: 8,
            cycle_toggles: 3,
            gmres: GmresOptions::default(),
            preconditioner: PreconditionerKind::Amg,
            amg: AmgOptions::default(),
            freeze_preconditioner: false,
            damping: false,
            feasibility_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Residual norm over inactive unconstrained DoFs.
    pub residual: f64,
    pub active: usize,
    pub changed: usize,
    pub gmres_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub step: usize,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// `max(phi - phi_old)` over unconstrained phase-field DoFs.
    pub feasibility_violation: f64,
    /// Vertices whose phase-field DoF is active at exit.
    pub active_set: Vec<usize>,
    /// Vertices fixed by the cycle detector.
    pub permanent: Vec<usize>,
}

impl NewtonReport {
    /// Newton iterations that performed a linear solve.
    pub fn newton_iterations(&self) -> usize {
        self.iterations.iter().filter(|r| r.gmres_iterations > 0).count()
    }

    pub fn gmres_total(&self) -> usize {
        self.iterations.iter().map(|r| r.gmres_iterations).sum()
    }

    pub fn log_lines(&self) -> Vec<String> {
        self.iterations.iter().map(|r| format!("{}", LogLine(self.step, r))).collect()
    }
}

struct LogLine<'a>(usize, &'a IterationRecord);

impl fmt::Display for LogLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.1;
        write!(
            f,
            "newton step={} it={} res={:.6e} active={} changed={} gmres={}",
            self.0, r.iteration, r.residual, r.active, r.changed, r.gmres_iterations
        )
    }
}

/// Per-DoF membership history: bit 0 is the most recent iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSetState {
    pub active: Vec<bool>,
    pub permanent: Vec<bool>,
    pub history: Vec<u64>,
    pub filled: usize,
    pub c: f64,
}

impl ActiveSetState {
    pub fn new(n: usize, c: f64) -> Self {
        Self { active: vec![false; n], permanent: vec![false; n], history: vec![0; n], filled: 0, c }
    }

    fn record(&mut self) {
        for (h, &a) in self.history.iter_mut().zip(&self.active) {
            *h = (*h << 1) | a as u64;
        }
        self.filled += 1;
    }
}

/// DoFs whose membership changed at least `toggles` times within the last
/// `window` recorded iterations.
pub fn detect_cycles(history: &[u64], filled: usize, window: usize, toggles: usize) -> Vec<usize> {
    let n = filled.min(window).min(64);
    if n < 2 {
        return Vec::new();
    }
    let mask = (1u64 << (n - 1)) - 1;
    history
        .iter()
        .enumerate()
        .filter(|(_, &h)| ((h ^ (h >> 1)) & mask).count_ones() as usize >= toggles)
        .map(|(i, _)| i)
        .collect()
}

fn block_norms(r: &[f64], nu: usize, skip: impl Fn(usize) -> bool) -> (f64, f64) {
    let (mut su, mut sp) = (0.0, 0.0);
    for (i, v) in r.iter().enumerate() {
        if skip(i) {
            continue;
        }
        if i < nu {
            su += v * v;
        } else {
            sp += v * v;
        }
    }
    (su.sqrt(), sp.sqrt())
}

/// Solve one loading step in place. A non-converged report is returned as
/// `Ok` with `converged = false`; linear-solver failures are errors.
pub fn newton_active_set_step(
    dofmap: &DofMap,
    material: &Material,
    state: &mut FractureState,
    opts: &SolverOptions,
) -> Result<NewtonReport> {
    let dim = dofmap.dim();
    let nu = dofmap.n_u();
    let nv = dofmap.n_vertices();
    if state.fields.values.len() != dofmap.n_dofs() || state.phi_old.len() != nv {
        return Err(Error::DimensionMismatch { expected: dofmap.n_dofs(), got: state.fields.values.len() });
    }
    let co = material.coefficients(dim, dofmap.min_edge());
    let phi_tilde = extrapolate_phi(state);
    let assembler = Assembler::new(dofmap, co.coupling);
    let base = ConstraintSet::build(dofmap, Dirichlet::ClampedDisplacement, &[]);
    let coords: Vec<[f64; 3]> = (0..nv).map(|v| *dofmap.vertex_coords(v)).collect();
    let mut aset = ActiveSetState::new(nv, opts.complementarity_factor * co.gc / co.eps);
    let x = &mut state.fields.values;
    base.distribute(x);

    let mut records = Vec::new();
    let mut r0: Option<(f64, f64)> = None;
    let mut prev: Vec<bool> = vec![false; nv];
    let mut converged = false;
    let mut frozen: Option<BlockPreconditioner> = None;
    for it in 0..opts.max_iter {
        let r = assembler.residual(dofmap, &base, &co, x, &phi_tilde);
        for v in 0..nv {
            let g = dofmap.phi_dof(v);
            aset.active[v] = !base.is_constrained(g)
                && (aset.permanent[v] || aset.c * (x[g] - state.phi_old[v]) - r[g] > 0.0);
        }
        aset.record();
        for i in detect_cycles(&aset.history, aset.filled, opts.cycle_window, opts.cycle_toggles) {
            if !aset.permanent[i] {
                log::debug!("cycle detected at vertex {i}; fixing it active");
                aset.permanent[i] = true;
            }
            aset.active[i] = true;
        }
        let changed = aset.active.iter().zip(&prev).filter(|(a, b)| a != b).count();
        let n_active = aset.active.iter().filter(|&&a| a).count();
        let (ru, rp) =
            block_norms(&r, nu, |i| base.is_constrained(i) || (i >= nu && aset.active[i - nu]));
        let (r0u, r0p) = *r0.get_or_insert((ru, rp));
        let mut rec =
            IterationRecord { iteration: it, residual: ru.hypot(rp), active: n_active, changed, gmres_iterations: 0 };
        if changed == 0 && ru <= (opts.tol * r0u).max(opts.abs_floor) && rp <= (opts.tol * r0p).max(opts.abs_floor) {
            converged = true;
            log::info!("{}", LogLine(state.step, &rec));
            records.push(rec);
            break;
        }
        prev.clone_from(&aset.active);

        let fixed: Vec<(usize, f64)> = (0..nv)
            .filter(|&v| aset.active[v])
            .map(|v| (dofmap.phi_dof(v), state.phi_old[v]))
            .collect();
        let cs = ConstraintSet::build(dofmap, Dirichlet::ClampedDisplacement, &fixed);
        cs.distribute(x);
        let sys = assembler.system(dofmap, &cs, &co, x, &phi_tilde);
        let built;
        let prec = if opts.freeze_preconditioner {
            if frozen.is_none() {
                frozen = Some(BlockPreconditioner::build(&sys, opts.preconditioner, dim, &coords, &opts.amg)?);
            }
            frozen.as_ref().unwrap()
        } else {
            built = BlockPreconditioner::build(&sys, opts.preconditioner, dim, &coords, &opts.amg)?;
            &built
        };
        let (mut dx, out) = gmres(&sys, prec, &sys.rhs, None, &opts.gmres)?;
        if !out.converged {
            return Err(Error::LinearSolver(format!(
                "GMRES stopped after {} iterations at relative residual {:e}",
                out.iterations,
                out.final_residual / out.rhs_norm
            )));
        }
        cs.distribute_homogeneous(&mut dx);
        rec.gmres_iterations = out.iterations.max(1);
        log::info!("{}", LogLine(state.step, &rec));
        records.push(rec);

        let mut step = 1.0;
        if opts.damping {
            let cur = ru.hypot(rp);
            for _ in 0..4 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
                let rt = assembler.residual(dofmap, &cs, &co, &trial, &phi_tilde);
                let (tu, tp) = block_norms(&rt, nu, |i| cs.is_constrained(i));
                if tu.hypot(tp) <= 10.0 * cur {
                    break;
                }
                step *= 0.5;
            }
        }
        for (a, b) in x.iter_mut().zip(&dx) {
            *a += step * b;
        }
    }
    let mut violation = f64::NEG_INFINITY;
    for v in 0..nv {
        let g = dofmap.phi_dof(v);
        if !base.is_constrained(g) {
            violation = violation.max(x[g] - state.phi_old[v]);
        }
    }
    if converged && violation > opts.feasibility_tol {
        log::warn!("phase field exceeds its bound by {violation:e} after convergence");
    }
    Ok(NewtonReport {
        step: state.step,
        iterations: records,
        converged,
        feasibility_violation: violation,
        active_set: (0..nv).filter(|&v| aset.active[v]).collect(),
        permanent: (0..nv).filter(|&v| aset.permanent[v]).collect(),
    })
}

/// Run loading steps `state.step ..= n_max`, shifting the phase-field
/// history between steps. Stops at the first non-converged step.
pub fn solve_loading_sequence(
    dofmap: &DofMap,
    material: &Material,
    state: &mut FractureState,
    n_max: usize,
    opts: &SolverOptions,
) -> Result<Vec<NewtonReport>> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("need at least one loading step".into()));
    }
    let mut reports = Vec::new();
    loop {
        let rep = newton_active_set_step(dofmap, material, state, opts)?;
        let ok = rep.converged;
        reports.push(rep);
        if !ok || state.step >= n_max {
            break;
        }
        state.advance(dofmap);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_constant_and_alternating() {
        let mut s = ActiveSetState::new(3, 1.0);
        let pattern = [[true, false, true], [true, true, false], [true, false, true], [true, true, false]];
        for p in pattern {
            s.active = p.to_vec();
            s.record();
        }
        assert_eq!(detect_cycles(&s.history, s.filled, 8, 3), vec![1, 2]);
        assert!(detect_cycles(&s.history, s.filled, 8, 4).is_empty());
        assert!(detect_cycles(&[u64::MAX, 0], 8, 8, 1).is_empty());
    }

    #[test]
    fn window_limits_history() {
        // Toggles long ago fall out of a short window.
        let h = [0b0000_0000_0101_0101u64];
        assert_eq!(detect_cycles(&h, 16, 8, 3), vec![0]);
        let h = [0b0101_0101_0000_0000u64];
        assert!(detect_cycles(&h, 16, 8, 3).is_empty());
    }
}
