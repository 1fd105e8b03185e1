//! Adaptive forest of axis-aligned squares (d = 2) or cubes (d = 3) covering
//! the hypercube `(-K, K)^d`.
//!
//! Cells live on an integer lattice: a root cell spans `2^MAX_LEVEL` lattice
//! units per side, so every vertex of every cell has exact integer
//! coordinates. Refinement splits a cell into `2^d` children and closes the
//! result so that face neighbours differ by at most one level.

use alloc::format;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::{Error, Result};

/// Deepest level below a root cell that the lattice can represent.
pub const MAX_LEVEL: u8 = 24;

pub type CellId = usize;

/// Lattice point; unused trailing coordinates are zero in 2d.
pub type Lattice = [i64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub dim: usize,
    pub half_width: f64,
    pub cells_per_side: usize,
}

impl DomainSpec {
    pub fn new(dim: usize, half_width: f64, cells_per_side: usize) -> Result<Self> {
        let spec = Self { dim, half_width, cells_per_side };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidDomain(format!("dimension {} not in {{2, 3}}", self.dim)));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidDomain(format!("half width {} must be positive", self.half_width)));
        }
        if self.cells_per_side == 0 {
            return Err(Error::InvalidDomain("need at least one cell per side".into()));
        }
        Ok(())
    }

    /// Edge length of the level-0 cells.
    pub fn root_edge(&self) -> f64 {
        2.0 * self.half_width / self.cells_per_side as f64
    }

    /// Physical length of one lattice unit.
    pub fn lattice_unit(&self) -> f64 {
        self.root_edge() / (1u64 << MAX_LEVEL) as f64
    }

    /// Number of lattice units along one side of the domain.
    pub fn lattice_extent(&self) -> i64 {
        (self.cells_per_side as i64) << MAX_LEVEL
    }

    pub fn to_physical(&self, p: &Lattice) -> [f64; 3] {
        let unit = self.lattice_unit();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = -self.half_width + p[a] as f64 * unit;
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub level: u8,
    pub anchor: Lattice,
    pub parent: Option<CellId>,
    /// Children are stored contiguously starting here.
    pub first_child: Option<CellId>,
    pub active: bool,
}

/// What lies across one face of an active cell.
#[derive(Debug, Clone, PartialEq)]
pub enum FaceNeighbor {
    Boundary,
    Same(CellId),
    Coarser(CellId),
    Finer(Vec<CellId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Same,
    /// The neighbour is one level coarser; the face is a subface of it.
    Coarser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Boundary,
    Interior { neighbor: CellId, relation: Relation },
}

/// A face reported by [`Mesh::active_faces`]. Face index `2 * axis + side`,
/// side 0 is the lower face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub cell: CellId,
    pub face: usize,
    pub kind: FaceKind,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    spec: DomainSpec,
    cells: Vec<Cell>,
    lookup: HashMap<(u8, Lattice), CellId>,
    active: Vec<CellId>,
    revision: u64,
}

impl Mesh {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.cells_per_side as i64;
        let edge = 1i64 << MAX_LEVEL;
        let mut mesh = Self {
            spec,
            cells: Vec::new(),
            lookup: HashMap::new(),
            active: Vec::new(),
            revision: 0,
        };
        let nz = if spec.dim == 3 { n } else { 1 };
        for k in 0..nz {
            for j in 0..n {
                for i in 0..n {
                    let anchor = [i * edge, j * edge, k * edge];
                    mesh.push_cell(Cell { level: 0, anchor, parent: None, first_child: None, active: true });
                }
            }
        }
        mesh.rebuild_active();
        Ok(mesh)
    }

    fn push_cell(&mut self, cell: Cell) -> CellId {
        let id = self.cells.len();
        self.lookup.insert((cell.level, cell.anchor), id);
        self.cells.push(cell);
        id
    }

    fn rebuild_active(&mut self) {
        self.active = (0..self.cells.len()).filter(|&c| self.cells[c].active).collect();
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Incremented by every mutating call.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn n_cells_total(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, id: CellId) -> Option<&Cell> {
        self.cells.get(id)
    }

    pub fn active_cells(&self) -> &[CellId] {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn children_per_cell(&self) -> usize {
        1 << self.spec.dim
    }

    pub fn children(&self, id: CellId) -> Option<core::ops::Range<CellId>> {
        self.cells[id].first_child.map(|f| f..f + self.children_per_cell())
    }

    /// Edge length in lattice units.
    pub fn lattice_edge(&self, id: CellId) -> i64 {
        1i64 << (MAX_LEVEL - self.cells[id].level)
    }

    pub fn edge(&self, id: CellId) -> f64 {
        self.spec.root_edge() / (1u64 << self.cells[id].level) as f64
    }

    pub fn measure(&self, id: CellId) -> f64 {
        let h = self.edge(id);
        (0..self.spec.dim).map(|_| h).product()
    }

    pub fn lower_corner(&self, id: CellId) -> [f64; 3] {
        self.spec.to_physical(&self.cells[id].anchor)
    }

    pub fn min_active_edge(&self) -> f64 {
        self.active.iter().map(|&c| self.edge(c)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_active_level(&self) -> u8 {
        self.active.iter().map(|&c| self.cells[c].level).max().unwrap_or(0)
    }

    /// Lattice coordinates of local vertex `k` (bit `a` of `k` selects the
    /// upper side along axis `a`).
    pub fn vertex_lattice(&self, id: CellId, k: usize) -> Lattice {
        let e = self.lattice_edge(id);
        let mut p = self.cells[id].anchor;
        for a in 0..self.spec.dim {
            if k >> a & 1 == 1 {
                p[a] += e;
            }
        }
        p
    }

    fn contains_lattice(&self, id: CellId, p: &Lattice) -> bool {
        let e = self.lattice_edge(id);
        let c = &self.cells[id];
        (0..self.spec.dim).all(|a| p[a] >= c.anchor[a] && p[a] <= c.anchor[a] + e)
    }

    /// The active cell covering the same-level region at `anchor`, or `None`
    /// if the region is outside the domain. Returns the region's own cell if
    /// it exists (possibly refined) or the nearest existing ancestor.
    fn covering_cell(&self, level: u8, anchor: Lattice) -> Option<CellId> {
        let ext = self.spec.lattice_extent();
        if (0..self.spec.dim).any(|a| anchor[a] < 0 || anchor[a] >= ext) {
            return None;
        }
        let mut lev = level;
        loop {
            let shift = MAX_LEVEL - lev;
            let mut aligned = anchor;
            for a in 0..self.spec.dim {
                aligned[a] = (anchor[a] >> shift) << shift;
            }
            if let Some(&id) = self.lookup.get(&(lev, aligned)) {
                return Some(id);
            }
            if lev == 0 {
                return None;
            }
            lev -= 1;
        }
    }

    /// Neighbour across face `face` (`2 * axis + side`) of cell `id`.
    ///
    /// Works for inactive cells too; for them `Same` means a same-level cell
    /// exists (it may itself be refined only when `Finer` is returned).
    pub fn face_neighbor(&self, id: CellId, face: usize) -> FaceNeighbor {
        let axis = face / 2;
        let upper = face % 2 == 1;
        let cell = &self.cells[id];
        let e = self.lattice_edge(id);
        let mut na = cell.anchor;
        na[axis] += if upper { e } else { -e };
        let Some(n) = self.covering_cell(cell.level, na) else {
            return FaceNeighbor::Boundary;
        };
        let ncell = &self.cells[n];
        if ncell.level < cell.level {
            return FaceNeighbor::Coarser(n);
        }
        if ncell.active {
            return FaceNeighbor::Same(n);
        }
        // Collect active descendants touching the shared face.
        let mut out = Vec::new();
        let mut stack = alloc::vec![n];
        let face_coord = if upper { cell.anchor[axis] + e } else { cell.anchor[axis] };
        while let Some(c) = stack.pop() {
            if self.cells[c].active {
                out.push(c);
                continue;
            }
            for ch in self.children(c).unwrap() {
                let ce = self.lattice_edge(ch);
                let lo = self.cells[ch].anchor[axis];
                let touches = if upper { lo == face_coord } else { lo + ce == face_coord };
                if touches {
                    stack.push(ch);
                }
            }
        }
        out.sort_unstable();
        FaceNeighbor::Finer(out)
    }

    fn split(&mut self, id: CellId) {
        debug_assert!(self.cells[id].active);
        let level = self.cells[id].level + 1;
        let half = self.lattice_edge(id) / 2;
        let anchor = self.cells[id].anchor;
        let first = self.cells.len();
        for k in 0..self.children_per_cell() {
            let mut a = anchor;
            for ax in 0..self.spec.dim {
                if k >> ax & 1 == 1 {
                    a[ax] += half;
                }
            }
            self.push_cell(Cell { level, anchor: a, parent: Some(id), first_child: None, active: true });
        }
        let c = &mut self.cells[id];
        c.active = false;
        c.first_child = Some(first);
    }

    /// Refine the given active cells, then refine further cells until every
    /// pair of face neighbours differs by at most one level.
    pub fn refine(&mut self, marked: &[CellId]) -> Result<()> {
        for &c in marked {
            match self.cells.get(c) {
                Some(cell) if cell.active => {}
                _ => return Err(Error::UnknownCell(c)),
            }
        }
        if marked.is_empty() {
            return Ok(());
        }
        if marked.iter().any(|&c| self.cells[c].level >= MAX_LEVEL) {
            return Err(Error::InvalidParameter(format!("refinement beyond level {MAX_LEVEL}")));
        }
        let mut queue: Vec<CellId> = marked.iter().rev().copied().collect();
        while let Some(c) = queue.pop() {
            if !self.cells[c].active {
                continue;
            }
            self.split(c);
            let level = self.cells[c].level;
            for f in 0..2 * self.spec.dim {
                if let FaceNeighbor::Coarser(n) = self.face_neighbor(c, f) {
                    if self.cells[n].level < level && self.cells[n].active {
                        queue.push(n);
                    }
                }
            }
        }
        self.rebuild_active();
        self.revision += 1;
        Ok(())
    }

    pub fn uniform_refine(&mut self, times: usize) -> Result<()> {
        for _ in 0..times {
            let all = self.active.clone();
            self.refine(&all)?;
        }
        Ok(())
    }

    /// Every interior (sub)face exactly once plus every boundary face.
    /// Same-level faces are reported from the cell with the smaller id;
    /// coarse-fine faces from the finer side.
    pub fn active_faces(&self) -> Vec<Face> {
        let mut faces = Vec::new();
        for &c in &self.active {
            for f in 0..2 * self.spec.dim {
                match self.face_neighbor(c, f) {
                    FaceNeighbor::Boundary => faces.push(Face { cell: c, face: f, kind: FaceKind::Boundary }),
                    FaceNeighbor::Same(n) if c < n => faces.push(Face {
                        cell: c,
                        face: f,
                        kind: FaceKind::Interior { neighbor: n, relation: Relation::Same },
                    }),
                    FaceNeighbor::Coarser(n) => faces.push(Face {
                        cell: c,
                        face: f,
                        kind: FaceKind::Interior { neighbor: n, relation: Relation::Coarser },
                    }),
                    _ => {}
                }
            }
        }
        faces
    }

    /// Largest level jump across any active face pair.
    pub fn max_level_jump(&self) -> u8 {
        let mut worst = 0;
        for &c in &self.active {
            for f in 0..2 * self.spec.dim {
                let l = self.cells[c].level;
                let jump = match self.face_neighbor(c, f) {
                    FaceNeighbor::Boundary => 0,
                    FaceNeighbor::Same(_) => 0,
                    FaceNeighbor::Coarser(n) => l - self.cells[n].level,
                    FaceNeighbor::Finer(v) => v.iter().map(|&n| self.cells[n].level - l).max().unwrap_or(0),
                };
                worst = worst.max(jump);
            }
        }
        worst
    }

    /// Active cells whose closed box contains the lattice point, ascending.
    pub fn cells_containing_lattice(&self, p: &Lattice) -> Vec<CellId> {
        let ext = self.spec.lattice_extent();
        let d = self.spec.dim;
        if (0..d).any(|a| p[a] < 0 || p[a] > ext) {
            return Vec::new();
        }
        let root = 1i64 << MAX_LEVEL;
        let n = self.spec.cells_per_side as i64;
        // Candidate roots: at most two per axis.
        let mut ranges = [(0i64, 0i64); 3];
        for a in 0..d {
            let hi = (p[a] / root).min(n - 1);
            let lo = if p[a] % root == 0 && p[a] > 0 { (p[a] / root - 1).max(0) } else { hi };
            ranges[a] = (lo, hi);
        }
        let mut stack = Vec::new();
        let (zlo, zhi) = if d == 3 { ranges[2] } else { (0, 0) };
        for k in zlo..=zhi {
            for j in ranges[1].0..=ranges[1].1 {
                for i in ranges[0].0..=ranges[0].1 {
                    let id = (i + n * (j + n * k)) as usize;
                    stack.push(id);
                }
            }
        }
        let mut out = Vec::new();
        while let Some(c) = stack.pop() {
            if !self.contains_lattice(c, p) {
                continue;
            }
            match self.children(c) {
                None => out.push(c),
                Some(r) => stack.extend(r),
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The active cell containing `x`; on shared boundaries the smallest id wins.
    pub fn locate(&self, x: &[f64]) -> Result<CellId> {
        let d = self.spec.dim;
        let unit = self.spec.lattice_unit();
        let k = self.spec.half_width;
        let tol = 1e-10 * k;
        let outside = || Error::OutsideDomain {
            x: x[0],
            y: x.get(1).copied().unwrap_or(0.0),
            z: if d == 3 { x.get(2).copied().unwrap_or(0.0) } else { 0.0 },
        };
        if x.len() < d || (0..d).any(|a| !(x[a] >= -k - tol && x[a] <= k + tol)) {
            return Err(outside());
        }
        // Descend over roots and children with a tolerance-aware containment test.
        let n = self.spec.cells_per_side;
        let mut stack: Vec<CellId> = Vec::new();
        let root_edge = self.spec.root_edge();
        let mut ranges = [(0usize, 0usize); 3];
        for a in 0..d {
            let s = (x[a] + k) / root_edge;
            let lo = libm_floor(s - 1e-9).max(0.0) as usize;
            let hi = (libm_floor(s + 1e-9) as usize).min(n - 1);
            ranges[a] = (lo.min(n - 1), hi);
        }
        let (zlo, zhi) = if d == 3 { ranges[2] } else { (0, 0) };
        for kz in zlo..=zhi {
            for j in ranges[1].0..=ranges[1].1 {
                for i in ranges[0].0..=ranges[0].1 {
                    stack.push(i + n * (j + n * kz));
                }
            }
        }
        let mut best: Option<CellId> = None;
        while let Some(c) = stack.pop() {
            let lo = self.lower_corner(c);
            let h = self.edge(c);
            let eps = 1e-9 * h.max(unit);
            if (0..d).any(|a| x[a] < lo[a] - eps || x[a] > lo[a] + h + eps) {
                continue;
            }
            match self.children(c) {
                None => best = Some(best.map_or(c, |b| b.min(c))),
                Some(r) => stack.extend(r),
            }
        }
        best.ok_or_else(outside)
    }

    /// True if `other` refines `self`: same domain and every active cell of
    /// `self` exists in `other` with the same geometry.
    pub fn is_refined_by(&self, other: &Mesh) -> bool {
        if self.spec != other.spec || other.cells.len() < self.cells.len() {
            return false;
        }
        self.active.iter().all(|&c| {
            let a = &self.cells[c];
            let b = &other.cells[c];
            a.level == b.level && a.anchor == b.anchor
        })
    }

    pub fn total_measure(&self) -> f64 {
        self.active.iter().map(|&c| self.measure(c)).sum()
    }

    /// Ids of the level-0 ancestors chain, used by deterministic traversals.
    pub fn level(&self, id: CellId) -> u8 {
        self.cells[id].level
    }
}

fn libm_floor(x: f64) -> f64 {
    num_traits::Float::floor(x)
}
