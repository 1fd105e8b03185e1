use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::dofs::DofMap;
use super::quadrature::{shape_gradients, shape_values};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Discrete `(u, phi)` with the revision of the mesh it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub values: Vec<f64>,
    pub revision: u64,
}

impl FieldVector {
    pub fn zeros(dofmap: &DofMap) -> Self {
        Self { values: vec![0.0; dofmap.n_dofs()], revision: dofmap.mesh_revision() }
    }

    pub fn u<'a>(&'a self, dofmap: &DofMap) -> &'a [f64] {
        &self.values[..dofmap.n_u()]
    }

    pub fn phi<'a>(&'a self, dofmap: &DofMap) -> &'a [f64] {
        &self.values[dofmap.n_u()..]
    }

    pub fn phi_mut<'a>(&'a mut self, dofmap: &DofMap) -> &'a mut [f64] {
        let nu = dofmap.n_u();
        &mut self.values[nu..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    U(usize),
    Phi,
}

/// Values of the discrete fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub u: [f64; 3],
    pub phi: f64,
    pub grad_phi: [f64; 3],
    /// `grad_u[i][j] = d u_i / d x_j`
    pub grad_u: [[f64; 3]; 3],
}

/// Nodal interpolation of `f` into one component; other entries untouched.
pub fn interpolate_component<F: Fn(&[f64; 3]) -> f64>(dofmap: &DofMap, comp: Component, f: &F, out: &mut [f64]) {
    for v in 0..dofmap.n_vertices() {
        let val = f(dofmap.vertex_coords(v));
        let dof = match comp {
            Component::U(c) => dofmap.u_dof(v, c),
            Component::Phi => dofmap.phi_dof(v),
        };
        out[dof] = val;
    }
}

/// Nodal interpolation of a vector field `(u, phi)` given as one function
/// returning `[u_x, u_y, u_z, phi]`. Constraints are not applied.
pub fn interpolate<F: Fn(&[f64; 3]) -> [f64; 4]>(dofmap: &DofMap, f: F) -> FieldVector {
    let mut fv = FieldVector::zeros(dofmap);
    let d = dofmap.dim();
    for v in 0..dofmap.n_vertices() {
        let val = f(dofmap.vertex_coords(v));
        for c in 0..d {
            fv.values[dofmap.u_dof(v, c)] = val[c];
        }
        fv.values[dofmap.phi_dof(v)] = val[3];
    }
    fv
}

/// Reference coordinates of `x` inside cell `slot`.
pub(crate) fn reference_coords(dofmap: &DofMap, slot: usize, x: &[f64]) -> [f64; 3] {
    let lo = dofmap.cell_lower(slot);
    let h = dofmap.cell_edge(slot);
    let mut xi = [0.0; 3];
    for a in 0..dofmap.dim() {
        xi[a] = ((x[a] - lo[a]) / h).clamp(0.0, 1.0);
    }
    xi
}

/// Evaluate on a known cell.
pub fn evaluate_in_cell(dofmap: &DofMap, values: &[f64], slot: usize, xi: &[f64; 3]) -> PointValue {
    let d = dofmap.dim();
    let h = dofmap.cell_edge(slot);
    let mut n = [0.0; 8];
    let mut g = [[0.0; 3]; 8];
    shape_values(d, xi, &mut n);
    shape_gradients(d, xi, &mut g);
    let mut pv = PointValue { u: [0.0; 3], phi: 0.0, grad_phi: [0.0; 3], grad_u: [[0.0; 3]; 3] };
    for (k, &v) in dofmap.cell_vertices(slot).iter().enumerate() {
        let ph = values[dofmap.phi_dof(v)];
        pv.phi += n[k] * ph;
        for a in 0..d {
            pv.grad_phi[a] += g[k][a] / h * ph;
        }
        for c in 0..d {
            let uc = values[dofmap.u_dof(v, c)];
            pv.u[c] += n[k] * uc;
            for a in 0..d {
                pv.grad_u[c][a] += g[k][a] / h * uc;
            }
        }
    }
    pv
}

/// Q1 interpolation on the active cell containing `x` (smallest id on ties).
pub fn evaluate(mesh: &Mesh, dofmap: &DofMap, vec: &FieldVector, x: &[f64]) -> Result<PointValue> {
    check_revision(dofmap, vec)?;
    let cell = mesh.locate(x)?;
    let slot = dofmap.slot_of(cell).ok_or(Error::UnknownCell(cell))?;
    let xi = reference_coords(dofmap, slot, x);
    Ok(evaluate_in_cell(dofmap, &vec.values, slot, &xi))
}

fn check_revision(dofmap: &DofMap, vec: &FieldVector) -> Result<()> {
    if vec.values.len() != dofmap.n_dofs() {
        return Err(Error::DimensionMismatch { expected: dofmap.n_dofs(), got: vec.values.len() });
    }
    if vec.revision != dofmap.mesh_revision() {
        return Err(Error::InvalidParameter(format!(
            "field built for mesh revision {} used with revision {}",
            vec.revision,
            dofmap.mesh_revision()
        )));
    }
    Ok(())
}

/// Interpolates nodal vectors of length `n_vertices` (scalar per vertex) or
/// full `(u, phi)` vectors from an old mesh onto a refinement of it.
pub struct Transfer<'a> {
    old_mesh: &'a Mesh,
    old_map: &'a DofMap,
    new_map: &'a DofMap,
    /// For every new vertex: old cell slot and reference coordinates.
    locations: Vec<(usize, [f64; 3])>,
}

impl<'a> Transfer<'a> {
    pub fn new(old_mesh: &'a Mesh, old_map: &'a DofMap, new_mesh: &Mesh, new_map: &'a DofMap) -> Result<Self> {
        if !old_mesh.is_refined_by(new_mesh) {
            return Err(Error::UnrelatedMeshes("new mesh does not refine the old one".into()));
        }
        if old_map.mesh_revision() != old_mesh.revision() || new_map.mesh_revision() != new_mesh.revision() {
            return Err(Error::UnrelatedMeshes("dof map does not match its mesh".into()));
        }
        let mut locations = Vec::with_capacity(new_map.n_vertices());
        for v in 0..new_map.n_vertices() {
            let p = new_map.vertex_lattice(v);
            let cells = old_mesh.cells_containing_lattice(p);
            let cell = *cells.first().ok_or_else(|| Error::UnrelatedMeshes("vertex outside old mesh".into()))?;
            let slot = old_map.slot_of(cell).ok_or(Error::UnknownCell(cell))?;
            let anchor = old_mesh.cell(cell).unwrap().anchor;
            let e = old_mesh.lattice_edge(cell) as f64;
            let mut xi = [0.0; 3];
            for a in 0..old_map.dim() {
                xi[a] = (p[a] - anchor[a]) as f64 / e;
            }
            locations.push((slot, xi));
        }
        Ok(Self { old_mesh, old_map, new_map, locations })
    }

    pub fn old_mesh(&self) -> &Mesh {
        self.old_mesh
    }

    /// Transfer a full `(u, phi)` vector.
    pub fn field(&self, old: &FieldVector) -> Result<FieldVector> {
        check_revision(self.old_map, old)?;
        let mut out = FieldVector::zeros(self.new_map);
        let d = self.new_map.dim();
        for (v, (slot, xi)) in self.locations.iter().enumerate() {
            let pv = evaluate_in_cell(self.old_map, &old.values, *slot, xi);
            for c in 0..d {
                out.values[self.new_map.u_dof(v, c)] = pv.u[c];
            }
            out.values[self.new_map.phi_dof(v)] = pv.phi;
        }
        Ok(out)
    }

    /// Transfer a scalar nodal vector (one entry per vertex).
    pub fn nodal(&self, old: &[f64]) -> Result<Vec<f64>> {
        if old.len() != self.old_map.n_vertices() {
            return Err(Error::DimensionMismatch { expected: self.old_map.n_vertices(), got: old.len() });
        }
        let d = self.old_map.dim();
        let mut n = [0.0; 8];
        Ok(self
            .locations
            .iter()
            .map(|(slot, xi)| {
                shape_values(d, xi, &mut n);
                self.old_map.cell_vertices(*slot).iter().enumerate().map(|(k, &v)| n[k] * old[v]).sum()
            })
            .collect())
    }
}

/// Convenience wrapper matching the single-call transfer of one vector.
pub fn transfer(
    old_mesh: &Mesh,
    old_map: &DofMap,
    old: &FieldVector,
    new_mesh: &Mesh,
    new_map: &DofMap,
) -> Result<FieldVector> {
    Transfer::new(old_mesh, old_map, new_mesh, new_map)?.field(old)
}
