//! Pressurized phase-field fracture: material law, residual, exact Jacobian,
//! time extrapolation of the phase field and the initial crack.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{ConstraintSet, DofMap, FieldVector, Quadrature, ReferenceElement};
use crate::linsolve::block::{assemble_pattern, uphi_pattern};
use crate::linsolve::{BlockSystem, CsrMatrix};
use crate::mesh::Mesh;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsMode {
    /// `eps = factor * h`
    Tied { factor: f64 },
    Fixed(f64),
}

/// Which phase field multiplies the pressure in the displacement equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureCoupling {
    Extrapolated,
    Current,
}

/// Length used for `h` in `eps = c h` and `kappa = c h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMeasure {
    /// Cell diagonal `sqrt(d) * edge`.
    Diameter,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub gc: f64,
    pub pressure: f64,
    /// Crack half-length.
    pub l0: f64,
    pub kappa_factor: f64,
    pub eps_mode: EpsMode,
    pub h_measure: HMeasure,
    pub pressure_coupling: PressureCoupling,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            youngs_modulus: 1.0,
            poisson_ratio: 0.2,
            gc: 1.0,
            pressure: 1e-3,
            l0: 1.0,
            kappa_factor: 1e-12,
            eps_mode: EpsMode::Tied { factor: 2.0 },
            h_measure: HMeasure::Diameter,
            pressure_coupling: PressureCoupling::Extrapolated,
        }
    }
}

/// Coefficients of one assembly: the material with `eps` and `kappa`
/// resolved for a mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub dim: usize,
    pub mu: f64,
    pub lambda: f64,
    pub gc: f64,
    pub pressure: f64,
    pub eps: f64,
    pub kappa: f64,
    pub coupling: PressureCoupling,
}

impl Material {
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        (e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.youngs_modulus > 0.0) {
            return bad("Young's modulus must be positive");
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return bad("Poisson ratio must lie in (0, 0.5)");
        }
        if !(self.gc > 0.0) || !(self.l0 > 0.0) || !(self.kappa_factor > 0.0) {
            return bad("G_c, l0 and kappa factor must be positive");
        }
        if !self.pressure.is_finite() {
            return bad("pressure must be finite");
        }
        match self.eps_mode {
            EpsMode::Tied { factor } if !(factor > 0.0) => bad("eps factor must be positive"),
            EpsMode::Fixed(e) if !(e > 0.0) => bad("eps must be positive"),
            _ => Ok(()),
        }
    }

    /// The length `h` of a cell with the given edge.
    pub fn h_of_edge(&self, dim: usize, edge: f64) -> f64 {
        match self.h_measure {
            HMeasure::Edge => edge,
            HMeasure::Diameter => edge * (dim as f64).sqrt(),
        }
    }

    /// Edge length at which a tied `eps` equals `eps`.
    pub fn edge_for_eps(&self, dim: usize, eps: f64) -> f64 {
        let factor = match self.eps_mode {
            EpsMode::Tied { factor } => factor,
            EpsMode::Fixed(_) => 2.0,
        };
        let h = eps / factor;
        match self.h_measure {
            HMeasure::Edge => h,
            HMeasure::Diameter => h / (dim as f64).sqrt(),
        }
    }

    /// Resolve `eps` and `kappa` for the smallest active edge `min_edge`.
    pub fn coefficients(&self, dim: usize, min_edge: f64) -> Coefficients {
        let h = self.h_of_edge(dim, min_edge);
        let (mu, lambda) = self.lame();
        let eps = match self.eps_mode {
            EpsMode::Tied { factor } => factor * h,
            EpsMode::Fixed(e) => e,
        };
        Coefficients {
            dim,
            mu,
            lambda,
            gc: self.gc,
            pressure: self.pressure,
            eps,
            kappa: self.kappa_factor * h,
            coupling: self.pressure_coupling,
        }
    }
}

/// `sigma = 2 mu e + lambda tr(e) I` with `e = (grad_u + grad_u^T) / 2`.
pub fn sigma(dim: usize, mu: f64, lambda: f64, grad_u: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut s = [[0.0; 3]; 3];
    let tr: f64 = (0..dim).map(|i| grad_u[i][i]).sum();
    for i in 0..dim {
        for j in 0..dim {
            s[i][j] = mu * (grad_u[i][j] + grad_u[j][i]);
        }
        s[i][i] += lambda * tr;
    }
    s
}

/// Solution history of one loading sequence. Phase-field arrays are nodal
/// (one entry per vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct FractureState {
    pub fields: FieldVector,
    /// Previous loading step: the irreversibility bound.
    pub phi_old: Vec<f64>,
    /// Two loading steps back.
    pub phi_prev2: Vec<f64>,
    /// Index of the loading step being (or last) solved, starting at 1.
    pub step: usize,
}

impl FractureState {
    /// Zero displacement, `phi = phi_old = phi_prev2 = seed`.
    pub fn from_seed(dofmap: &DofMap, seed: &[f64]) -> Self {
        let mut fields = FieldVector::zeros(dofmap);
        fields.phi_mut(dofmap).copy_from_slice(seed);
        Self { fields, phi_old: seed.to_vec(), phi_prev2: seed.to_vec(), step: 1 }
    }

    /// Move to the next loading step: `phi_prev2 <- phi_old <- phi`.
    pub fn advance(&mut self, dofmap: &DofMap) {
        self.phi_prev2 = core::mem::take(&mut self.phi_old);
        self.phi_old = self.fields.phi(dofmap).to_vec();
        self.step += 1;
    }
}

/// `phi_old` for the first two steps, then `2 phi_old - phi_prev2` clipped to
/// `[0, 1]`.
pub fn extrapolate_phi(state: &FractureState) -> Vec<f64> {
    if state.step <= 2 {
        return state.phi_old.clone();
    }
    state.phi_old.iter().zip(&state.phi_prev2).map(|(a, b)| (2.0 * a - b).clamp(0.0, 1.0)).collect()
}

/// Sparsity patterns and reference data reused across assemblies on one
/// mesh.
#[derive(Debug, Clone)]
pub struct Assembler {
    ref_elem: ReferenceElement,
    uu: CsrMatrix,
    phiu: CsrMatrix,
    phiphi: CsrMatrix,
    uphi: Option<CsrMatrix>,
}

const MAX_LU: usize = 24;

/// Element contributions at local DoFs: `u` index `k * d + c`, `phi` index `k`.
struct Element {
    ru: [f64; MAX_LU],
    rp: [f64; 8],
    kuu: [[f64; MAX_LU]; MAX_LU],
    kpu: [[f64; MAX_LU]; 8],
    kpp: [[f64; 8]; 8],
    kup: [[f64; 8]; MAX_LU],
}

impl Element {
    fn zero() -> Self {
        Self {
            ru: [0.0; MAX_LU],
            rp: [0.0; 8],
            kuu: [[0.0; MAX_LU]; MAX_LU],
            kpu: [[0.0; MAX_LU]; 8],
            kpp: [[0.0; 8]; 8],
            kup: [[0.0; 8]; MAX_LU],
        }
    }
}

/// Global DoF expanded through hanging rows; fixed DoFs are dropped.
fn expand<'a>(c: &'a ConstraintSet, g: usize, buf: &'a mut [(usize, f64); 1]) -> &'a [(usize, f64)] {
    if c.is_fixed(g) {
        return &[];
    }
    if c.is_hanging(g) {
        return &c.get(g).unwrap().terms;
    }
    buf[0] = (g, 1.0);
    &buf[..]
}

impl Assembler {
    pub fn new(dofmap: &DofMap, coupling: PressureCoupling) -> Self {
        let (uu, phiu, phiphi) = assemble_pattern(dofmap);
        let uphi = (coupling == PressureCoupling::Current).then(|| uphi_pattern(dofmap));
        let dim = dofmap.dim();
        Self { ref_elem: ReferenceElement::new(dim, Quadrature::cell(dim)), uu, phiu, phiphi, uphi }
    }

    fn element(
        &self,
        dofmap: &DofMap,
        co: &Coefficients,
        values: &[f64],
        phi_tilde: &[f64],
        slot: usize,
        with_matrix: bool,
    ) -> Element {
        let d = dofmap.dim();
        let nv = 1 << d;
        let h = dofmap.cell_edge(slot);
        let vol = cell_measure(h, d);
        let verts = dofmap.cell_vertices(slot);
        let mut el = Element::zero();
        let mut ul = [[0.0; 3]; 8];
        let mut pl = [0.0; 8];
        let mut tl = [0.0; 8];
        for (k, &v) in verts.iter().enumerate().take(nv) {
            for c in 0..d {
                ul[k][c] = values[dofmap.u_dof(v, c)];
            }
            pl[k] = values[dofmap.phi_dof(v)];
            tl[k] = phi_tilde[v];
        }
        let (mu, lam, kap, p) = (co.mu, co.lambda, co.kappa, co.pressure);
        for q in 0..self.ref_elem.quad.len() {
            let w = self.ref_elem.quad.weights[q] * vol;
            let n = &self.ref_elem.values[q];
            let mut g = [[0.0; 3]; 8];
            for k in 0..nv {
                for a in 0..d {
                    g[k][a] = self.ref_elem.grads[q][k][a] / h;
                }
            }
            let mut grad_u = [[0.0; 3]; 3];
            let mut phi = 0.0;
            let mut tphi = 0.0;
            let mut grad_phi = [0.0; 3];
            for k in 0..nv {
                phi += n[k] * pl[k];
                tphi += n[k] * tl[k];
                for a in 0..d {
                    grad_phi[a] += g[k][a] * pl[k];
                    for c in 0..d {
                        grad_u[c][a] += g[k][a] * ul[k][c];
                    }
                }
            }
            let s = sigma(d, mu, lam, &grad_u);
            let mut s_e = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s_e += s[i][j] * 0.5 * (grad_u[i][j] + grad_u[j][i]);
                }
            }
            let div_u: f64 = (0..d).map(|i| grad_u[i][i]).sum();
            let gdeg = (1.0 - kap) * tphi * tphi + kap;
            let pc = match co.coupling {
                PressureCoupling::Extrapolated => tphi * tphi,
                PressureCoupling::Current => phi * phi,
            };
            for a in 0..nv {
                for c in 0..d {
                    let sg: f64 = (0..d).map(|j| s[c][j] * g[a][j]).sum();
                    el.ru[a * d + c] += w * (gdeg * sg + pc * p * g[a][c]);
                }
                let gg: f64 = (0..d).map(|j| grad_phi[j] * g[a][j]).sum();
                el.rp[a] += w
                    * ((1.0 - kap) * phi * s_e * n[a]
                        + 2.0 * phi * p * div_u * n[a]
                        + co.gc * (-(1.0 - phi) / co.eps * n[a] + co.eps * gg));
            }
            if !with_matrix {
                continue;
            }
            for a in 0..nv {
                for b in 0..nv {
                    let gab: f64 = (0..d).map(|j| g[a][j] * g[b][j]).sum();
                    for c in 0..d {
                        for e in 0..d {
                            let mut v = mu * (g[b][c] * g[a][e]) + lam * g[b][e] * g[a][c];
                            if c == e {
                                v += mu * gab;
                            }
                            el.kuu[a * d + c][b * d + e] += w * gdeg * v;
                        }
                    }
                    for e in 0..d {
                        let sg: f64 = (0..d).map(|j| s[e][j] * g[b][j]).sum();
                        el.kpu[a][b * d + e] +=
                            w * (2.0 * (1.0 - kap) * phi * sg * n[a] + 2.0 * phi * p * g[b][e] * n[a]);
                    }
                    el.kpp[a][b] += w
                        * (((1.0 - kap) * s_e + 2.0 * p * div_u) * n[b] * n[a]
                            + co.gc * (n[b] * n[a] / co.eps + co.eps * gab));
                    if co.coupling == PressureCoupling::Current {
                        for c in 0..d {
                            el.kup[a * d + c][b] += w * 2.0 * phi * n[b] * p * g[a][c];
                        }
                    }
                }
            }
        }
        el
    }

    /// Condensed residual: hanging rows distributed to their parents,
    /// constrained entries zero.
    pub fn residual(
        &self,
        dofmap: &DofMap,
        constraints: &ConstraintSet,
        co: &Coefficients,
        values: &[f64],
        phi_tilde: &[f64],
    ) -> Vec<f64> {
        let d = dofmap.dim();
        let nv = 1 << d;
        let mut r = vec![0.0; dofmap.n_dofs()];
        let mut b = [(0, 0.0)];
        for slot in 0..dofmap.n_cells() {
            let el = self.element(dofmap, co, values, phi_tilde, slot, false);
            let verts = dofmap.cell_vertices(slot);
            for k in 0..nv {
                for c in 0..d {
                    for &(g, wt) in expand(constraints, dofmap.u_dof(verts[k], c), &mut b) {
                        r[g] += wt * el.ru[k * d + c];
                    }
                }
                for &(g, wt) in expand(constraints, dofmap.phi_dof(verts[k]), &mut b) {
                    r[g] += wt * el.rp[k];
                }
            }
        }
        r
    }

    /// Condensed Jacobian blocks with `rhs = -R`.
    pub fn system(
        &self,
        dofmap: &DofMap,
        constraints: &ConstraintSet,
        co: &Coefficients,
        values: &[f64],
        phi_tilde: &[f64],
    ) -> BlockSystem {
        let d = dofmap.dim();
        let nv = 1 << d;
        let nu = dofmap.n_u();
        let n = dofmap.n_dofs();
        let mut uu = self.uu.clone();
        let mut pu = self.phiu.clone();
        let mut pp = self.phiphi.clone();
        let mut up = self.uphi.clone();
        let mut r = vec![0.0; n];
        let mut fixed_diag = vec![0.0; n];
        let mut raw_diag = vec![0.0; n];
        let mut gu = [0usize; MAX_LU];
        let mut gp = [0usize; 8];
        let (mut b1, mut b2) = ([(0, 0.0)], [(0, 0.0)]);
        for slot in 0..dofmap.n_cells() {
            let el = self.element(dofmap, co, values, phi_tilde, slot, true);
            let verts = dofmap.cell_vertices(slot);
            for k in 0..nv {
                for c in 0..d {
                    gu[k * d + c] = dofmap.u_dof(verts[k], c);
                }
                gp[k] = dofmap.phi_dof(verts[k]);
            }
            for i in 0..nv * d {
                let gi = gu[i];
                raw_diag[gi] += el.kuu[i][i];
                for &(ti, wi) in expand(constraints, gi, &mut b1) {
                    r[ti] += wi * el.ru[i];
                }
                for j in 0..nv * d {
                    let gj = gu[j];
                    if gi == gj && constraints.is_fixed(gi) {
                        fixed_diag[gi] += el.kuu[i][j];
                    }
                    for &(ti, wi) in expand(constraints, gi, &mut b1) {
                        for &(tj, wj) in expand(constraints, gj, &mut b2) {
                            uu.add(ti, tj, wi * wj * el.kuu[i][j]);
                        }
                    }
                }
                if let Some(up) = up.as_mut() {
                    for j in 0..nv {
                        for &(ti, wi) in expand(constraints, gi, &mut b1) {
                            for &(tj, wj) in expand(constraints, gp[j], &mut b2) {
                                up.add(ti, tj - nu, wi * wj * el.kup[i][j]);
                            }
                        }
                    }
                }
            }
            for i in 0..nv {
                let gi = gp[i];
                raw_diag[gi] += el.kpp[i][i];
                for &(ti, wi) in expand(constraints, gi, &mut b1) {
                    r[ti] += wi * el.rp[i];
                }
                for j in 0..nv * d {
                    for &(ti, wi) in expand(constraints, gi, &mut b1) {
                        for &(tj, wj) in expand(constraints, gu[j], &mut b2) {
                            pu.add(ti - nu, tj, wi * wj * el.kpu[i][j]);
                        }
                    }
                }
                for j in 0..nv {
                    let gj = gp[j];
                    if gi == gj && constraints.is_fixed(gi) {
                        fixed_diag[gi] += el.kpp[i][j];
                    }
                    for &(ti, wi) in expand(constraints, gi, &mut b1) {
                        for &(tj, wj) in expand(constraints, gj, &mut b2) {
                            pp.add(ti - nu, tj - nu, wi * wj * el.kpp[i][j]);
                        }
                    }
                }
            }
        }
        for g in 0..n {
            let diag = if constraints.is_fixed(g) {
                fixed_diag[g]
            } else if constraints.is_hanging(g) {
                raw_diag[g]
            } else {
                continue;
            };
            let diag = if diag.abs() > f64::MIN_POSITIVE * 1e10 { diag } else { 1.0 };
            if g < nu {
                uu.add(g, g, diag);
            } else {
                pp.add(g - nu, g - nu, diag);
            }
        }
        r.iter_mut().for_each(|v| *v = -*v);
        BlockSystem { m_uu: uu, m_phiu: pu, m_phiphi: pp, m_uphi: up, rhs: r }
    }
}

fn cell_measure(h: f64, d: usize) -> f64 {
    (0..d).fold(1.0, |acc, _| acc * h)
}

/// Cells whose closure meets the crack surface: the segment `|x| <= l0,
/// y = 0` in 2d, the disc `rho <= l0, z = 0` in 3d.
pub fn crack_cells(mesh: &Mesh, l0: f64) -> Vec<usize> {
    let d = mesh.dim();
    mesh.active_cells()
        .iter()
        .copied()
        .filter(|&c| {
            let lo = mesh.lower_corner(c);
            let h = mesh.edge(c);
            let tol = 1e-9 * h;
            let n = d - 1;
            if lo[n] > tol || lo[n] + h < -tol {
                return false;
            }
            // Squared distance from the origin to the cell's in-plane box.
            let mut dist2 = 0.0;
            for a in 0..n {
                let hi = lo[a] + h;
                let t = if hi < 0.0 {
                    hi
                } else if lo[a] > 0.0 {
                    lo[a]
                } else {
                    0.0
                };
                dist2 += t * t;
            }
            dist2 <= (l0 + tol) * (l0 + tol)
        })
        .collect()
}

/// Nodal seed: `0` on vertices within `h_band` of the crack surface (and
/// inside the crack radius), `1` elsewhere. `h_band` is the smallest edge of
/// the cells meeting the crack.
pub fn initial_crack(mesh: &Mesh, dofmap: &DofMap, l0: f64) -> Result<Vec<f64>> {
    let d = dofmap.dim();
    let cells = crack_cells(mesh, l0);
    let h_band = cells.iter().map(|&c| mesh.edge(c)).fold(f64::INFINITY, f64::min);
    if !h_band.is_finite() {
        return Err(Error::CrackNotResolved("no cell meets the crack".into()));
    }
    let tol = 1e-9 * h_band;
    let mut zeroed = 0;
    let seed: Vec<f64> = (0..dofmap.n_vertices())
        .map(|v| {
            let x = dofmap.vertex_coords(v);
            let r2: f64 = (0..d - 1).map(|a| x[a] * x[a]).sum();
            if r2 <= (l0 + tol) * (l0 + tol) && x[d - 1].abs() <= h_band + tol {
                zeroed += 1;
                0.0
            } else {
                1.0
            }
        })
        .collect();
    if zeroed == 0 {
        return Err(Error::CrackNotResolved(format!("no vertex within {h_band} of the crack")));
    }
    Ok(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Dirichlet;
    use crate::mesh::DomainSpec;

    #[test]
    fn sigma_examples() {
        let m = Material::default();
        let (mu, lam) = m.lame();
        assert!((mu - 5.0 / 12.0).abs() < 1e-15 && (lam - 5.0 / 18.0).abs() < 1e-15);
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]];
        let s = sigma(2, mu, lam, &id);
        assert!((s[0][0] - 1.388_888_888_888_889).abs() < 1e-14 && s[0][1] == 0.0);
        let rot = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0; 3]];
        assert_eq!(sigma(2, mu, lam, &rot), [[0.0; 3]; 3]);
    }

    #[test]
    fn extrapolation() {
        let mut m = Mesh::new(DomainSpec::new(2, 1.0, 1).unwrap()).unwrap();
        m.uniform_refine(0).unwrap();
        let d = DofMap::new(&m);
        let mut s = FractureState::from_seed(&d, &[1.0; 4]);
        s.phi_old = vec![0.4; 4];
        s.phi_prev2 = vec![0.6; 4];
        assert_eq!(extrapolate_phi(&s), vec![0.4; 4]);
        s.step = 3;
        for v in extrapolate_phi(&s) {
            assert!((v - 0.2).abs() < 1e-15);
        }
        s.phi_prev2 = vec![0.0; 4];
        assert_eq!(extrapolate_phi(&s), vec![0.8; 4]);
    }

    #[test]
    fn intact_material_is_equilibrium() {
        let mut m = Mesh::new(DomainSpec::new(2, 1.0, 2).unwrap()).unwrap();
        m.refine(&[0]).unwrap();
        let d = DofMap::new(&m);
        let mat = Material { pressure: 0.0, ..Default::default() };
        let co = mat.coefficients(2, d.min_edge());
        let c = ConstraintSet::build(&d, Dirichlet::ClampedDisplacement, &[]);
        let mut x = FieldVector::zeros(&d);
        x.phi_mut(&d).iter_mut().for_each(|v| *v = 1.0);
        let a = Assembler::new(&d, mat.pressure_coupling);
        let r = a.residual(&d, &c, &co, &x.values, &vec![1.0; d.n_vertices()]);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn seed_counts() {
        let mut m = Mesh::new(DomainSpec::new(2, 2.0, 4).unwrap()).unwrap();
        m.uniform_refine(1).unwrap();
        let d = DofMap::new(&m);
        let s = initial_crack(&m, &d, 1.0).unwrap();
        // h = 0.5: x in {-1, ..., 1} (5 columns), y in {-0.5, 0, 0.5}.
        assert_eq!(s.iter().filter(|&&v| v == 0.0).count(), 15);
    }
}
