use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::dofs::DofMap;

/// One affine constraint `x_c = sum(w_j x_j) + b`. Dirichlet and active-set
/// rows have an empty combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub inhomogeneity: f64,
}

impl Constraint {
    pub fn is_fixed(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dirichlet {
    /// `u = 0` on the whole outer boundary.
    ClampedDisplacement,
    None,
}

/// Closed set of affine constraints: no constrained DoF appears on the right
/// hand side of another constraint.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    n_dofs: usize,
    rows: BTreeMap<usize, Constraint>,
    /// DoFs where a Dirichlet row overrode a hanging-node row.
    conflicts: Vec<usize>,
    /// DoFs requested as active but skipped because they are hanging.
    skipped_active: Vec<usize>,
    mask: Vec<u8>,
}

const FREE: u8 = 0;
const HANGING: u8 = 1;
const FIXED: u8 = 2;

impl ConstraintSet {
    /// Hanging-vertex rows for every component, homogeneous displacement
    /// rows on the boundary (taking priority over hanging rows), and the
    /// listed phase-field DoFs fixed to their targets.
    pub fn build(dofmap: &DofMap, dirichlet: Dirichlet, active: &[(usize, f64)]) -> Self {
        let d = dofmap.dim();
        let mut rows: BTreeMap<usize, Constraint> = BTreeMap::new();
        for (&v, parents) in dofmap.hanging() {
            for c in 0..d {
                let terms = parents.iter().map(|&(p, w)| (dofmap.u_dof(p, c), w)).collect();
                rows.insert(dofmap.u_dof(v, c), Constraint { terms, inhomogeneity: 0.0 });
            }
            let terms = parents.iter().map(|&(p, w)| (dofmap.phi_dof(p), w)).collect();
            rows.insert(dofmap.phi_dof(v), Constraint { terms, inhomogeneity: 0.0 });
        }
        let mut conflicts = Vec::new();
        if dirichlet == Dirichlet::ClampedDisplacement {
            for v in 0..dofmap.n_vertices() {
                if !dofmap.is_boundary_vertex(v) {
                    continue;
                }
                for c in 0..d {
                    let dof = dofmap.u_dof(v, c);
                    let fixed = Constraint { terms: Vec::new(), inhomogeneity: 0.0 };
                    if rows.insert(dof, fixed).is_some() {
                        conflicts.push(dof);
                    }
                }
            }
        }
        let mut skipped_active = Vec::new();
        for &(dof, target) in active {
            match rows.get(&dof) {
                Some(c) if !c.is_fixed() => skipped_active.push(dof),
                _ => {
                    rows.insert(dof, Constraint { terms: Vec::new(), inhomogeneity: target });
                }
            }
        }
        let mut set = Self { n_dofs: dofmap.n_dofs(), rows, conflicts, skipped_active, mask: Vec::new() };
        set.close();
        set
    }

    /// Build with an explicit row map (used by tests and by callers that
    /// assemble custom constraints).
    pub fn from_rows(n_dofs: usize, rows: BTreeMap<usize, Constraint>) -> Self {
        let mut set = Self { n_dofs, rows, ..Default::default() };
        set.close();
        set
    }

    fn close(&mut self) {
        let keys: Vec<usize> = self.rows.keys().copied().collect();
        for _ in 0..64 {
            let mut changed = false;
            for &k in &keys {
                let row = &self.rows[&k];
                if row.terms.iter().all(|(j, _)| !self.rows.contains_key(j)) {
                    continue;
                }
                let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                let mut b = row.inhomogeneity;
                for &(j, w) in &row.terms {
                    match self.rows.get(&j) {
                        Some(cj) => {
                            b += w * cj.inhomogeneity;
                            for &(q, wq) in &cj.terms {
                                *acc.entry(q).or_insert(0.0) += w * wq;
                            }
                        }
                        None => *acc.entry(j).or_insert(0.0) += w,
                    }
                }
                let terms = acc.into_iter().filter(|&(_, w)| w != 0.0).collect();
                self.rows.insert(k, Constraint { terms, inhomogeneity: b });
                changed = true;
            }
            if !changed {
                break;
            }
        }
        let mut mask = vec![FREE; self.n_dofs];
        for (&k, c) in &self.rows {
            mask[k] = if c.is_fixed() { FIXED } else { HANGING };
        }
        self.mask = mask;
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, dof: usize) -> Option<&Constraint> {
        self.rows.get(&dof)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&usize, &Constraint)> {
        self.rows.iter()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.mask[dof] != FREE
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.mask[dof] == FIXED
    }

    pub fn is_hanging(&self, dof: usize) -> bool {
        self.mask[dof] == HANGING
    }

    pub fn conflicts(&self) -> &[usize] {
        &self.conflicts
    }

    pub fn skipped_active(&self) -> &[usize] {
        &self.skipped_active
    }

    /// True if every constrained row references only unconstrained DoFs.
    pub fn is_closed(&self) -> bool {
        self.rows.values().all(|c| c.terms.iter().all(|&(j, _)| !self.rows.contains_key(&j)))
    }

    /// Overwrite constrained entries of `x` with their affine values.
    pub fn distribute(&self, x: &mut [f64]) {
        for (&k, c) in &self.rows {
            x[k] = c.terms.iter().map(|&(j, w)| w * x[j]).sum::<f64>() + c.inhomogeneity;
        }
    }

    /// Same as [`distribute`](Self::distribute) with all inhomogeneities
    /// dropped, for Newton increments.
    pub fn distribute_homogeneous(&self, x: &mut [f64]) {
        for (&k, c) in &self.rows {
            x[k] = c.terms.iter().map(|&(j, w)| w * x[j]).sum::<f64>();
        }
    }

    /// Zero every constrained entry (condensed residual layout).
    pub fn zero_constrained(&self, x: &mut [f64]) {
        for &k in self.rows.keys() {
            x[k] = 0.0;
        }
    }
}
