use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::mesh::{CellId, Lattice, Mesh};

/// Vertex-based numbering of the Q1 product space `V_h^d x W_h`.
///
/// Every distinct vertex of an active cell (hanging vertices included)
/// carries `dim` displacement DoFs and one phase-field DoF. The global layout
/// is `[u_0x, u_0y, (u_0z), u_1x, ... | phi_0, phi_1, ...]`, so all
/// displacement DoFs precede all phase-field DoFs.
#[derive(Debug, Clone)]
pub struct DofMap {
    dim: usize,
    mesh_revision: u64,
    lattice: Vec<Lattice>,
    coords: Vec<[f64; 3]>,
    boundary: Vec<bool>,
    cells: Vec<CellId>,
    cell_vertices: Vec<[usize; 8]>,
    cell_lower: Vec<[f64; 3]>,
    cell_edge: Vec<f64>,
    /// Indexed by cell id; `usize::MAX` for inactive cells.
    cell_slot: Vec<usize>,
    /// Closed hanging-vertex constraints: vertex -> (parent vertex, weight).
    hanging: BTreeMap<usize, Vec<(usize, f64)>>,
    vertex_index: HashMap<Lattice, usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let dim = mesh.dim();
        let nv_cell = 1 << dim;
        let ext = mesh.spec().lattice_extent();
        let mut vertex_index: HashMap<Lattice, usize> = HashMap::new();
        let mut lattice = Vec::new();
        let mut cells = Vec::with_capacity(mesh.n_active());
        let mut cell_vertices = Vec::with_capacity(mesh.n_active());
        let mut cell_slot = vec![usize::MAX; mesh.n_cells_total()];
        for &c in mesh.active_cells() {
            let mut vs = [usize::MAX; 8];
            for (k, v) in vs.iter_mut().enumerate().take(nv_cell) {
                let p = mesh.vertex_lattice(c, k);
                *v = *vertex_index.entry(p).or_insert_with(|| {
                    lattice.push(p);
                    lattice.len() - 1
                });
            }
            cell_slot[c] = cells.len();
            cells.push(c);
            cell_vertices.push(vs);
        }
        let coords: Vec<[f64; 3]> = lattice.iter().map(|p| mesh.spec().to_physical(p)).collect();
        let boundary = lattice.iter().map(|p| (0..dim).any(|a| p[a] == 0 || p[a] == ext)).collect();
        let cell_lower = cells.iter().map(|&c| mesh.lower_corner(c)).collect();
        let cell_edge = cells.iter().map(|&c| mesh.edge(c)).collect();

        let raw = find_hanging(mesh, &cells, &cell_vertices, &vertex_index);
        let hanging = close_hanging(raw);

        Self {
            dim,
            mesh_revision: mesh.revision(),
            lattice,
            coords,
            boundary,
            cells,
            cell_vertices,
            cell_lower,
            cell_edge,
            cell_slot,
            hanging,
            vertex_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh_revision(&self) -> u64 {
        self.mesh_revision
    }

    pub fn n_vertices(&self) -> usize {
        self.lattice.len()
    }

    pub fn n_u(&self) -> usize {
        self.dim * self.n_vertices()
    }

    pub fn n_phi(&self) -> usize {
        self.n_vertices()
    }

    pub fn n_dofs(&self) -> usize {
        (self.dim + 1) * self.n_vertices()
    }

    pub fn u_dof(&self, vertex: usize, comp: usize) -> usize {
        self.dim * vertex + comp
    }

    pub fn phi_dof(&self, vertex: usize) -> usize {
        self.n_u() + vertex
    }

    /// Vertex of a phase-field DoF.
    pub fn phi_vertex(&self, dof: usize) -> usize {
        dof - self.n_u()
    }

    pub fn vertex_coords(&self, v: usize) -> &[f64; 3] {
        &self.coords[v]
    }

    pub fn vertex_lattice(&self, v: usize) -> &Lattice {
        &self.lattice[v]
    }

    pub fn vertex_at(&self, p: &Lattice) -> Option<usize> {
        self.vertex_index.get(p).copied()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Active cells in the order used by all per-cell arrays.
    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn cell_vertices(&self, slot: usize) -> &[usize] {
        &self.cell_vertices[slot][..1 << self.dim]
    }

    pub fn cell_lower(&self, slot: usize) -> &[f64; 3] {
        &self.cell_lower[slot]
    }

    pub fn cell_edge(&self, slot: usize) -> f64 {
        self.cell_edge[slot]
    }

    /// Slot of an active cell id.
    pub fn slot_of(&self, cell: CellId) -> Option<usize> {
        self.cell_slot.get(cell).copied().filter(|&s| s != usize::MAX)
    }

    pub fn hanging(&self) -> &BTreeMap<usize, Vec<(usize, f64)>> {
        &self.hanging
    }

    pub fn is_hanging(&self, v: usize) -> bool {
        self.hanging.contains_key(&v)
    }

    /// Vertex expanded through hanging constraints.
    pub fn expand_vertex(&self, v: usize) -> ExpandedVertex<'_> {
        match self.hanging.get(&v) {
            Some(list) => ExpandedVertex::Hanging(list),
            None => ExpandedVertex::Free(v),
        }
    }

    /// Set of (cell slot, vertices) adjacency after hanging expansion: for
    /// every vertex the sorted list of vertices it couples to.
    pub fn vertex_graph(&self) -> Vec<Vec<usize>> {
        let nv = self.n_vertices();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nv];
        let mut local = Vec::with_capacity(32);
        for slot in 0..self.n_cells() {
            local.clear();
            for &v in self.cell_vertices(slot) {
                match self.expand_vertex(v) {
                    ExpandedVertex::Free(v) => local.push(v),
                    ExpandedVertex::Hanging(list) => local.extend(list.iter().map(|&(p, _)| p)),
                }
            }
            local.sort_unstable();
            local.dedup();
            for &a in &local {
                rows[a].extend_from_slice(&local);
            }
        }
        for (v, r) in rows.iter_mut().enumerate() {
            r.push(v);
            r.sort_unstable();
            r.dedup();
        }
        rows
    }

    /// Smallest active edge length.
    pub fn min_edge(&self) -> f64 {
        self.cell_edge.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub enum ExpandedVertex<'a> {
    Free(usize),
    Hanging(&'a [(usize, f64)]),
}

fn find_hanging(
    mesh: &Mesh,
    cells: &[CellId],
    cell_vertices: &[[usize; 8]],
    index: &HashMap<Lattice, usize>,
) -> BTreeMap<usize, Vec<(usize, f64)>> {
    let dim = mesh.dim();
    let nv = 1 << dim;
    let mut out: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (slot, &c) in cells.iter().enumerate() {
        let vs = &cell_vertices[slot];
        // Edges: vertex pairs differing in one bit.
        for a in 0..nv {
            for ax in 0..dim {
                let b = a | (1 << ax);
                if b == a {
                    continue;
                }
                let pa = mesh.vertex_lattice(c, a);
                let pb = mesh.vertex_lattice(c, b);
                let mut mid = pa;
                for i in 0..3 {
                    mid[i] = (pa[i] + pb[i]) / 2;
                }
                if let Some(&m) = index.get(&mid) {
                    out.entry(m).or_insert_with(|| alloc::vec![(vs[a], 0.5), (vs[b], 0.5)]);
                }
            }
        }
        if dim == 3 {
            for ax in 0..3 {
                for side in 0..2 {
                    let corners: Vec<usize> = (0..8).filter(|k| (k >> ax) & 1 == side).collect();
                    let mut center = [0i64; 3];
                    for &k in &corners {
                        let p = mesh.vertex_lattice(c, k);
                        for i in 0..3 {
                            center[i] += p[i];
                        }
                    }
                    for v in center.iter_mut() {
                        *v /= 4;
                    }
                    if let Some(&m) = index.get(&center) {
                        out.entry(m).or_insert_with(|| corners.iter().map(|&k| (vs[k], 0.25)).collect());
                    }
                }
            }
        }
    }
    out
}

/// Substitute hanging parents until no constraint refers to a hanging vertex.
fn close_hanging(raw: BTreeMap<usize, Vec<(usize, f64)>>) -> BTreeMap<usize, Vec<(usize, f64)>> {
    let mut closed: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    fn resolve(
        v: usize,
        raw: &BTreeMap<usize, Vec<(usize, f64)>>,
        closed: &mut BTreeMap<usize, Vec<(usize, f64)>>,
        depth: usize,
    ) -> Vec<(usize, f64)> {
        if let Some(c) = closed.get(&v) {
            return c.clone();
        }
        assert!(depth < 64, "cyclic hanging-node constraints");
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for &(p, w) in &raw[&v] {
            if raw.contains_key(&p) {
                for (q, wq) in resolve(p, raw, closed, depth + 1) {
                    *acc.entry(q).or_insert(0.0) += w * wq;
                }
            } else {
                *acc.entry(p).or_insert(0.0) += w;
            }
        }
        let list: Vec<(usize, f64)> = acc.into_iter().filter(|&(_, w)| w != 0.0).collect();
        closed.insert(v, list.clone());
        list
    }
    for &v in raw.keys() {
        resolve(v, &raw, &mut closed, 0);
    }
    closed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DomainSpec;

    #[test]
    fn single_cell_counts() {
        let m = Mesh::new(DomainSpec::new(2, 1.0, 1).unwrap()).unwrap();
        let d = DofMap::new(&m);
        assert_eq!(d.n_vertices(), 4);
        assert_eq!(d.n_dofs(), 12);
        assert_eq!(d.phi_dof(0), 8);
        assert!(d.hanging().is_empty());
    }

    #[test]
    fn one_hanging_vertex_2d() {
        let mut m = Mesh::new(DomainSpec::new(2, 1.0, 2).unwrap()).unwrap();
        m.refine(&[0]).unwrap();
        let d = DofMap::new(&m);
        // Cell 0 refined: midpoints of its right and top edges hang.
        assert_eq!(d.hanging().len(), 2);
        for list in d.hanging().values() {
            assert_eq!(list.len(), 2);
            assert!(list.iter().all(|&(_, w)| w == 0.5));
        }
    }

    #[test]
    fn hanging_3d_face_center() {
        let mut m = Mesh::new(DomainSpec::new(3, 1.0, 2).unwrap()).unwrap();
        m.refine(&[0]).unwrap();
        let d = DofMap::new(&m);
        let quarter = d.hanging().values().filter(|l| l.len() == 4).count();
        assert_eq!(quarter, 3);
        let halves = d.hanging().values().filter(|l| l.len() == 2).count();
        // Edges of the refined cell not lying in the domain boundary: 9 of 12.
        assert_eq!(halves, 9);
    }
}
