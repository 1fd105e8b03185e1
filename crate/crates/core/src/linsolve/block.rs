use alloc::vec;
use alloc::vec::Vec;

use super::amg::{build_amg, AmgHierarchy, AmgOptions, NearNullSpace};
use super::csr::CsrMatrix;
use super::dense::{Cholesky, DenseMatrix, Lu};
use super::gmres::{LinearOperator, Preconditioner};
use crate::error::{Error, Result};
use crate::fem::DofMap;

/// Lower block-triangular system
/// `[M_uu 0; M_phiu M_phiphi] [du; dphi] = [F_u; F_phi]`. The optional
/// `m_uphi` block appears only when the pressure term uses the current phase
/// field.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub m_uu: CsrMatrix,
    pub m_phiu: CsrMatrix,
    pub m_phiphi: CsrMatrix,
    pub m_uphi: Option<CsrMatrix>,
    pub rhs: Vec<f64>,
}

impl BlockSystem {
    pub fn n_u(&self) -> usize {
        self.m_uu.nrows()
    }

    pub fn n_phi(&self) -> usize {
        self.m_phiphi.nrows()
    }

    /// Dense copy of the whole operator (small systems only).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let nu = self.n_u();
        let n = nu + self.n_phi();
        let mut d = vec![vec![0.0; n]; n];
        let put = |d: &mut Vec<Vec<f64>>, m: &CsrMatrix, r0: usize, c0: usize| {
            for i in 0..m.nrows() {
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    d[r0 + i][c0 + j] += v;
                }
            }
        };
        put(&mut d, &self.m_uu, 0, 0);
        put(&mut d, &self.m_phiu, nu, 0);
        put(&mut d, &self.m_phiphi, nu, nu);
        if let Some(m) = &self.m_uphi {
            put(&mut d, m, 0, nu);
        }
        d
    }
}

impl LinearOperator for BlockSystem {
    fn dim(&self) -> usize {
        self.n_u() + self.n_phi()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nu = self.n_u();
        let (xu, xp) = x.split_at(nu);
        let (yu, yp) = y.split_at_mut(nu);
        self.m_uu.spmv(xu, yu);
        if let Some(m) = &self.m_uphi {
            m.spmv_add(xp, yu);
        }
        self.m_phiu.spmv(xu, yp);
        self.m_phiphi.spmv_add(xp, yp);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    Exact,
    Amg,
    Diagonal,
}

#[derive(Debug, Clone)]
enum BlockSolve {
    Cholesky(Cholesky),
    Lu(Lu),
    Amg(AmgHierarchy),
    Diagonal(Vec<f64>),
}

impl BlockSolve {
    fn exact(a: &CsrMatrix) -> Result<Self> {
        let d = DenseMatrix::from_csr(a)?;
        match Cholesky::factor(&d) {
            Ok(c) => Ok(Self::Cholesky(c)),
            Err(Error::NotPositiveDefinite { .. }) => Ok(Self::Lu(Lu::factor(&d)?)),
            Err(e) => Err(e),
        }
    }

    fn diagonal(a: &CsrMatrix) -> Self {
        Self::Diagonal(a.diagonal().iter().map(|&v| if v != 0.0 { 1.0 / v } else { 1.0 }).collect())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Self::Cholesky(c) => {
                z.copy_from_slice(r);
                c.solve_in_place(z);
            }
            Self::Lu(lu) => z.copy_from_slice(&lu.solve(r)),
            Self::Amg(h) => h.apply(r, z),
            Self::Diagonal(inv) => {
                for i in 0..r.len() {
                    z[i] = inv[i] * r[i];
                }
            }
        }
    }
}

/// `P^{-1} = diag(M_uu^{-1}, M_phiphi^{-1})` with each block inverse
/// approximated according to `kind`. Frozen at construction.
#[derive(Debug, Clone)]
pub struct BlockPreconditioner {
    kind: PreconditionerKind,
    n_u: usize,
    uu: BlockSolve,
    phiphi: BlockSolve,
}

impl BlockPreconditioner {
    /// `vertex_coords` feeds the rigid-body near-null space of the
    /// displacement block.
    pub fn build(
        sys: &BlockSystem,
        kind: PreconditionerKind,
        dim: usize,
        vertex_coords: &[[f64; 3]],
        amg: &AmgOptions,
    ) -> Result<Self> {
        let (uu, phiphi) = match kind {
            PreconditionerKind::Exact => (BlockSolve::exact(&sys.m_uu)?, BlockSolve::exact(&sys.m_phiphi)?),
            PreconditionerKind::Diagonal => (BlockSolve::diagonal(&sys.m_uu), BlockSolve::diagonal(&sys.m_phiphi)),
            PreconditionerKind::Amg => {
                if dim * vertex_coords.len() != sys.n_u() {
                    return Err(Error::DimensionMismatch { expected: sys.n_u(), got: dim * vertex_coords.len() });
                }
                let hu = build_amg(&sys.m_uu, &NearNullSpace::rigid_body(dim, vertex_coords), amg)?;
                let hp = build_amg(&sys.m_phiphi, &NearNullSpace::constant(sys.n_phi()), amg)?;
                (BlockSolve::Amg(hu), BlockSolve::Amg(hp))
            }
        };
        Ok(Self { kind, n_u: sys.n_u(), uu, phiphi })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    /// AMG level sizes of the two blocks, if AMG is in use.
    pub fn amg_levels(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match (&self.uu, &self.phiphi) {
            (BlockSolve::Amg(a), BlockSolve::Amg(b)) => Some((a.level_sizes(), b.level_sizes())),
            _ => None,
        }
    }
}

impl Preconditioner for BlockPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (ru, rp) = r.split_at(self.n_u);
        let (zu, zp) = z.split_at_mut(self.n_u);
        self.uu.apply(ru, zu);
        self.phiphi.apply(rp, zp);
    }
}

/// Zero-valued block matrices whose patterns cover every element coupling
/// after hanging-vertex expansion.
pub fn assemble_pattern(dofmap: &DofMap) -> (CsrMatrix, CsrMatrix, CsrMatrix) {
    let d = dofmap.dim();
    let graph = dofmap.vertex_graph();
    let nv = dofmap.n_vertices();
    let mut uu = Vec::with_capacity(d * nv);
    for nbrs in &graph {
        for _ in 0..d {
            let row: Vec<usize> = nbrs.iter().flat_map(|&w| (0..d).map(move |c| d * w + c)).collect();
            uu.push(row);
        }
    }
    let phiu: Vec<Vec<usize>> =
        graph.iter().map(|nbrs| nbrs.iter().flat_map(|&w| (0..d).map(move |c| d * w + c)).collect()).collect();
    let pp: Vec<Vec<usize>> = graph.clone();
    (
        CsrMatrix::from_pattern(d * nv, uu),
        CsrMatrix::from_pattern(d * nv, phiu),
        CsrMatrix::from_pattern(nv, pp),
    )
}

/// The `u`-`phi` coupling pattern (used only for the current-field pressure
/// coupling).
pub fn uphi_pattern(dofmap: &DofMap) -> CsrMatrix {
    let d = dofmap.dim();
    let graph = dofmap.vertex_graph();
    let mut rows = Vec::with_capacity(d * graph.len());
    for nbrs in &graph {
        for _ in 0..d {
            rows.push(nbrs.clone());
        }
    }
    CsrMatrix::from_pattern(graph.len(), rows)
}
