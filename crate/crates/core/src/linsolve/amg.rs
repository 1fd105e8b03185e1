//! Smoothed-aggregation algebraic multigrid for symmetric positive definite
//! matrices with a node (block) structure and a near-null space.

use alloc::vec;
use alloc::vec::Vec;


use super::csr::CsrMatrix;
use super::dense::{Cholesky, DenseMatrix, MAX_DENSE};
use super::gmres::Preconditioner;
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmgOptions {
    /// Node pair `(I, J)` is strong if `|A_IJ| >= theta * sqrt(|A_II| |A_JJ|)`
    /// (Frobenius norms of the node blocks).
    pub strength_threshold: f64,
    /// Damping of the Jacobi smoother.
    pub smoother_omega: f64,
    /// Damping of the Jacobi prolongator smoothing.
    pub prolongation_omega: f64,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub max_levels: usize,
    /// Stop coarsening once a level has at most this many unknowns.
    pub coarse_size: usize,
}

impl Default for AmgOptions {
    fn default() -> Self {
        Self {
            strength_threshold: 0.02,
            smoother_omega: 2.0 / 3.0,
            prolongation_omega: 2.0 / 3.0,
            pre_sweeps: 1,
            post_sweeps: 1,
            max_levels: 12,
            coarse_size: 400,
        }
    }
}

/// Vectors the coarse spaces must represent exactly, plus the node layout of
/// the fine unknowns (`block_size` consecutive unknowns per node).
#[derive(Debug, Clone, PartialEq)]
pub struct NearNullSpace {
    pub block_size: usize,
    pub columns: Vec<Vec<f64>>,
}

impl NearNullSpace {
    pub fn constant(n: usize) -> Self {
        Self { block_size: 1, columns: vec![vec![1.0; n]] }
    }

    /// Translations and infinitesimal rotations for a nodal vector field with
    /// `dim` components per node.
    pub fn rigid_body(dim: usize, coords: &[[f64; 3]]) -> Self {
        let n = dim * coords.len();
        let mut centre = [0.0; 3];
        for c in coords {
            for a in 0..dim {
                centre[a] += c[a];
            }
        }
        if !coords.is_empty() {
            for v in centre.iter_mut() {
                *v /= coords.len() as f64;
            }
        }
        let mut cols = Vec::new();
        for c in 0..dim {
            let mut v = vec![0.0; n];
            for i in 0..coords.len() {
                v[dim * i + c] = 1.0;
            }
            cols.push(v);
        }
        // (a, b): rotation in the a-b plane, u_a = -x_b, u_b = x_a.
        let planes: &[(usize, usize)] = if dim == 2 { &[(0, 1)] } else { &[(0, 1), (1, 2), (2, 0)] };
        for &(a, b) in planes {
            let mut v = vec![0.0; n];
            for (i, c) in coords.iter().enumerate() {
                v[dim * i + a] = -(c[b] - centre[b]);
                v[dim * i + b] = c[a] - centre[a];
            }
            cols.push(v);
        }
        Self { block_size: dim, columns: cols }
    }
}

#[derive(Debug, Clone)]
struct Level {
    a: CsrMatrix,
    /// Per-row Jacobi weight `omega / a_ii` (`1 / a_ii` on decoupled rows).
    smoother: Vec<f64>,
    p: CsrMatrix,
    r: CsrMatrix,
}

#[derive(Debug, Clone)]
enum CoarseSolver {
    Diagonal(Vec<f64>),
    Cholesky(Cholesky),
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse_a: CsrMatrix,
    coarse: CoarseSolver,
    opts: AmgOptions,
}

fn node_of(node_ptr: &[usize]) -> Vec<usize> {
    let mut out = vec![0; *node_ptr.last().unwrap_or(&0)];
    for k in 0..node_ptr.len() - 1 {
        for i in node_ptr[k]..node_ptr[k + 1] {
            out[i] = k;
        }
    }
    out
}

/// Strong node graph; isolated nodes (no off-diagonal entries) flagged.
fn strength_graph(a: &CsrMatrix, node_ptr: &[usize], theta: f64) -> (Vec<Vec<usize>>, Vec<bool>) {
    let nn = node_ptr.len() - 1;
    let owner = node_of(node_ptr);
    let mut acc = vec![0.0; nn];
    let mut marker = vec![usize::MAX; nn];
    let mut diag = vec![0.0; nn];
    let mut touched: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nn);
    let mut isolated = vec![true; nn];
    for nd in 0..nn {
        let mut list = Vec::new();
        for i in node_ptr[nd]..node_ptr[nd + 1] {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let nj = owner[j];
                if nj != nd && v != 0.0 {
                    isolated[nd] = false;
                }
                if marker[nj] != nd {
                    marker[nj] = nd;
                    acc[nj] = 0.0;
                    list.push(nj);
                }
                acc[nj] += v * v;
            }
        }
        diag[nd] = acc[nd].sqrt();
        touched.push(list.into_iter().filter(|&nj| nj != nd).map(|nj| (nj, acc[nj].sqrt())).collect());
    }
    let graph = touched
        .into_iter()
        .enumerate()
        .map(|(nd, list)| {
            if isolated[nd] {
                return Vec::new();
            }
            let mut s: Vec<usize> = list
                .into_iter()
                .filter(|&(nj, v)| !isolated[nj] && v > 0.0 && v >= theta * (diag[nd] * diag[nj]).sqrt())
                .map(|(nj, _)| nj)
                .collect();
            s.sort_unstable();
            s
        })
        .collect();
    (graph, isolated)
}

const UNAGG: usize = usize::MAX;
const SKIP: usize = usize::MAX - 1;

/// Three-pass greedy aggregation. Returns the aggregate of every node
/// (`SKIP` for isolated nodes) and the aggregate count.
fn aggregate(graph: &[Vec<usize>], isolated: &[bool]) -> (Vec<usize>, usize) {
    let nn = graph.len();
    let mut agg = vec![UNAGG; nn];
    for i in 0..nn {
        if isolated[i] {
            agg[i] = SKIP;
        }
    }
    let mut count = 0;
    for i in 0..nn {
        if agg[i] != UNAGG || graph[i].is_empty() {
            continue;
        }
        if graph[i].iter().all(|&j| agg[j] == UNAGG) {
            agg[i] = count;
            for &j in &graph[i] {
                agg[j] = count;
            }
            count += 1;
        }
    }
    let snapshot = agg.clone();
    for i in 0..nn {
        if agg[i] != UNAGG {
            continue;
        }
        if let Some(&j) = graph[i].iter().find(|&&j| snapshot[j] < SKIP) {
            agg[i] = snapshot[j];
        }
    }
    for i in 0..nn {
        if agg[i] != UNAGG {
            continue;
        }
        agg[i] = count;
        for &j in &graph[i] {
            if agg[j] == UNAGG {
                agg[j] = count;
            }
        }
        count += 1;
    }
    (agg, count)
}

/// Tentative prolongator by per-aggregate QR of the near-null space.
/// Returns `(P_tent, coarse node_ptr, coarse near-null columns)`.
fn tentative(
    node_ptr: &[usize],
    agg: &[usize],
    n_agg: usize,
    nns: &[Vec<f64>],
) -> (CsrMatrix, Vec<usize>, Vec<Vec<f64>>) {
    let n = *node_ptr.last().unwrap();
    let m = nns.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_agg];
    for (nd, &a) in agg.iter().enumerate() {
        if a < SKIP {
            members[a].push(nd);
        }
    }
    let mut trip = Vec::new();
    let mut coarse_ptr = vec![0];
    let mut coarse_b: Vec<Vec<f64>> = vec![Vec::new(); m];
    for nodes in &members {
        let rows: Vec<usize> = nodes.iter().flat_map(|&nd| node_ptr[nd]..node_ptr[nd + 1]).collect();
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut r: Vec<Vec<f64>> = Vec::new();
        for k in 0..m {
            let orig: Vec<f64> = rows.iter().map(|&i| nns[k][i]).collect();
            let onorm = orig.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut v = orig;
            let mut coeff = vec![0.0; q.len()];
            for _ in 0..2 {
                for (j, qj) in q.iter().enumerate() {
                    let c: f64 = qj.iter().zip(&v).map(|(a, b)| a * b).sum();
                    coeff[j] += c;
                    for (vi, qi) in v.iter_mut().zip(qj) {
                        *vi -= c * qi;
                    }
                }
            }
            for (j, c) in coeff.iter().enumerate() {
                r[j][k] = *c;
            }
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if onorm > 0.0 && vnorm > 1e-10 * onorm {
                q.push(v.iter().map(|x| x / vnorm).collect());
                let mut row = vec![0.0; m];
                row[k] = vnorm;
                r.push(row);
            }
        }
        let base = *coarse_ptr.last().unwrap();
        for (j, qj) in q.iter().enumerate() {
            for (li, &gi) in rows.iter().enumerate() {
                if qj[li] != 0.0 {
                    trip.push((gi, base + j, qj[li]));
                }
            }
            for k in 0..m {
                coarse_b[k].push(r[j][k]);
            }
        }
        coarse_ptr.push(base + q.len());
    }
    let nc = *coarse_ptr.last().unwrap();
    (CsrMatrix::from_triplets(n, nc, &trip), coarse_ptr, coarse_b)
}

fn smoother_weights(a: &CsrMatrix, omega: f64) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let mut d = 0.0;
            let mut coupled = false;
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    d = v;
                } else if v != 0.0 {
                    coupled = true;
                }
            }
            if d == 0.0 {
                0.0
            } else if coupled {
                omega / d
            } else {
                1.0 / d
            }
        })
        .collect()
}

/// `P = (I - omega D^{-1} A) P_tent`.
fn smooth_prolongator(a: &CsrMatrix, p_tent: &CsrMatrix, omega: f64) -> CsrMatrix {
    let ap = a.matmul(p_tent);
    let diag = a.diagonal();
    let mut trip = Vec::with_capacity(ap.nnz() + p_tent.nnz());
    for i in 0..a.nrows() {
        let (cols, vals) = p_tent.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            trip.push((i, j, v));
        }
        if diag[i] != 0.0 {
            let s = -omega / diag[i];
            let (cols, vals) = ap.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push((i, j, s * v));
            }
        }
    }
    CsrMatrix::from_triplets(a.nrows(), p_tent.ncols(), &trip)
}

fn make_coarse(a: &CsrMatrix) -> Result<CoarseSolver> {
    let n = a.nrows();
    if a.nnz() == (0..n).filter(|&i| a.get(i, i) != 0.0).count() && a.nnz() == n {
        let d = a.diagonal();
        return Ok(CoarseSolver::Diagonal(d.iter().map(|v| 1.0 / v).collect()));
    }
    if n > MAX_DENSE {
        return Err(Error::TooLargeForDirect(n));
    }
    Ok(CoarseSolver::Cholesky(Cholesky::factor(&DenseMatrix::from_csr(a)?)?))
}

/// Build a smoothed-aggregation hierarchy for `a`.
pub fn build_amg(a: &CsrMatrix, nns: &NearNullSpace, opts: &AmgOptions) -> Result<AmgHierarchy> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    let bs = nns.block_size.max(1);
    if !n.is_multiple_of(bs) || nns.columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParameter("near-null space does not match the matrix layout".into()));
    }
    let mut levels = Vec::new();
    let mut cur = a.clone();
    let mut node_ptr: Vec<usize> = (0..=n / bs).map(|k| k * bs).collect();
    let mut b = nns.columns.clone();
    while levels.len() + 1 < opts.max_levels && cur.nrows() > opts.coarse_size {
        let (graph, isolated) = strength_graph(&cur, &node_ptr, opts.strength_threshold);
        let (agg, n_agg) = aggregate(&graph, &isolated);
        if n_agg == 0 {
            break;
        }
        let (p_tent, coarse_ptr, coarse_b) = tentative(&node_ptr, &agg, n_agg, &b);
        let nc = p_tent.ncols();
        if nc == 0 || 5 * nc > 4 * cur.nrows() {
            break;
        }
        let p = smooth_prolongator(&cur, &p_tent, opts.prolongation_omega);
        let r = p.transpose();
        let coarse = r.matmul(&cur.matmul(&p));
        let smoother = smoother_weights(&cur, opts.smoother_omega);
        log::trace!("amg level {}: n = {}, coarse = {}", levels.len(), cur.nrows(), nc);
        levels.push(Level { a: cur, smoother, p, r });
        cur = coarse;
        node_ptr = coarse_ptr;
        b = coarse_b;
    }
    let coarse = make_coarse(&cur)?;
    Ok(AmgHierarchy { levels, coarse_a: cur, coarse, opts: *opts })
}

impl AmgHierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.levels.iter().map(|l| l.a.nrows()).collect();
        s.push(self.coarse_a.nrows());
        s
    }

    /// Sum of nonzeros over all levels divided by the fine nonzeros.
    pub fn operator_complexity(&self) -> f64 {
        let fine = self.levels.first().map_or(self.coarse_a.nnz(), |l| l.a.nnz()) as f64;
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum::<usize>() + self.coarse_a.nnz();
        total as f64 / fine
    }

    fn coarse_solve(&self, b: &[f64], x: &mut [f64]) {
        match &self.coarse {
            CoarseSolver::Diagonal(inv) => {
                for i in 0..b.len() {
                    x[i] = inv[i] * b[i];
                }
            }
            CoarseSolver::Cholesky(c) => {
                x.copy_from_slice(b);
                c.solve_in_place(x);
            }
        }
    }

    fn cycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        if k == self.levels.len() {
            self.coarse_solve(b, x);
            return;
        }
        let lv = &self.levels[k];
        let n = b.len();
        let mut r = vec![0.0; n];
        for i in 0..n {
            x[i] = lv.smoother[i] * b[i];
        }
        for _ in 1..self.opts.pre_sweeps {
            jacobi(lv, b, x, &mut r);
        }
        lv.a.spmv(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let nc = lv.p.ncols();
        let mut rc = vec![0.0; nc];
        lv.r.spmv(&r, &mut rc);
        let mut xc = vec![0.0; nc];
        self.cycle(k + 1, &rc, &mut xc);
        lv.p.spmv_add(&xc, x);
        for _ in 0..self.opts.post_sweeps {
            jacobi(lv, b, x, &mut r);
        }
    }
}

fn jacobi(lv: &Level, b: &[f64], x: &mut [f64], r: &mut [f64]) {
    lv.a.spmv(x, r);
    for i in 0..b.len() {
        x[i] += lv.smoother[i] * (b[i] - r[i]);
    }
}

impl Preconditioner for AmgHierarchy {
    /// One V-cycle with zero initial guess.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.cycle(0, r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::gmres::{gmres, GmresOptions};

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn diagonal_is_single_level_exact() {
        let a = CsrMatrix::from_triplets(4, 4, &[(0, 0, 2.0), (1, 1, 4.0), (2, 2, 1.0), (3, 3, 8.0)]);
        let h = build_amg(&a, &NearNullSpace::constant(4), &AmgOptions { coarse_size: 1, ..Default::default() }).unwrap();
        assert_eq!(h.n_levels(), 1);
        let mut z = vec![0.0; 4];
        h.apply(&[2.0, 4.0, 1.0, 8.0], &mut z);
        assert_eq!(z, vec![1.0; 4]);
    }

    #[test]
    fn chain_converges_fast() {
        let n = 64;
        let a = laplace_1d(n);
        let opts = AmgOptions { coarse_size: 4, ..Default::default() };
        let h = build_amg(&a, &NearNullSpace::constant(n), &opts).unwrap();
        assert!(h.n_levels() >= 3);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let (_, out) = gmres(&a, &h, &b, None, &GmresOptions::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 25, "{} iterations", out.iterations);
    }

    #[test]
    fn vcycle_is_linear() {
        let n = 40;
        let a = laplace_1d(n);
        let h = build_amg(&a, &NearNullSpace::constant(n), &AmgOptions { coarse_size: 4, ..Default::default() }).unwrap();
        let r: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let comb: Vec<f64> = r.iter().zip(&s).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let (mut zr, mut zs, mut zc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        h.apply(&r, &mut zr);
        h.apply(&s, &mut zs);
        h.apply(&comb, &mut zc);
        for i in 0..n {
            assert!((zc[i] - (2.0 * zr[i] - 0.5 * zs[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn rigid_body_modes_2d() {
        let coords = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let nns = NearNullSpace::rigid_body(2, &coords);
        assert_eq!(nns.columns.len(), 3);
        assert_eq!(nns.block_size, 2);
        assert_eq!(nns.columns[0], vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }
}
