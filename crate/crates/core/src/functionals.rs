//! Crack volume and crack opening functionals of a discrete solution.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::field::{evaluate_in_cell, reference_coords};
use crate::fem::quadrature::gauss_1d;
use crate::fem::{DofMap, Quadrature, ReferenceElement};
use crate::mesh::Mesh;
#[allow(unused_imports)]
use num_traits::Float;

/// Signed `int u . grad(phi) dx` by 2-point Gauss per direction; the crack
/// volume is its absolute value. `cells` restricts the sum to a subset of
/// cell slots.
pub fn compute_tcv_signed(dofmap: &DofMap, values: &[f64], cells: Option<&[usize]>) -> f64 {
    let d = dofmap.dim();
    let re = ReferenceElement::new(d, Quadrature::cell(d));
    let nv = 1 << d;
    let mut total = 0.0;
    let cell_sum = |slot: usize| {
        let h = dofmap.cell_edge(slot);
        let vol: f64 = (0..d).map(|_| h).product();
        let verts = dofmap.cell_vertices(slot);
        let mut s = 0.0;
        for q in 0..re.quad.len() {
            let mut u = [0.0; 3];
            let mut gp = [0.0; 3];
            for k in 0..nv {
                let ph = values[dofmap.phi_dof(verts[k])];
                for a in 0..d {
                    u[a] += re.values[q][k] * values[dofmap.u_dof(verts[k], a)];
                    gp[a] += re.grads[q][k][a] / h * ph;
                }
            }
            s += re.quad.weights[q] * (0..d).map(|a| u[a] * gp[a]).sum::<f64>();
        }
        s * vol
    };
    match cells {
        Some(list) => list.iter().for_each(|&s| total += cell_sum(s)),
        None => (0..dofmap.n_cells()).for_each(|s| total += cell_sum(s)),
    }
    total
}

pub fn compute_tcv(dofmap: &DofMap, values: &[f64]) -> f64 {
    let signed = compute_tcv_signed(dofmap, values, None);
    log::debug!("signed crack volume {signed:e}");
    signed.abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodMethod {
    /// `int u . grad(phi)` along the line normal to the crack.
    LineIntegral,
    /// Jump of the normal displacement between `+offset` and `-offset`.
    DisplacementTrace { offset: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodProfile {
    pub stations: Vec<f64>,
    pub openings: Vec<f64>,
}

/// Weight of a cell for a line through coordinate `x` along one axis: `1`
/// when strictly inside, `1/2` on an interior cell boundary, `0` outside.
fn side_weight(lo: f64, h: f64, x: f64, half_width: f64) -> f64 {
    let tol = 1e-10 * h;
    if x < lo - tol || x > lo + h + tol {
        return 0.0;
    }
    let on_lo = (x - lo).abs() <= tol;
    let on_hi = (x - lo - h).abs() <= tol;
    if (on_lo && (x + half_width).abs() > tol) || (on_hi && (x - half_width).abs() > tol) {
        0.5
    } else {
        1.0
    }
}

/// Opening profile along the crack: in 2d along the line `x = x_s`, in 3d
/// along the line through `(x_s, 0)` normal to the crack plane.
pub fn compute_cod(mesh: &Mesh, dofmap: &DofMap, values: &[f64], stations: &[f64], method: CodMethod) -> Result<CodProfile> {
    let d = dofmap.dim();
    let kk = mesh.spec().half_width;
    let n = d - 1;
    let (gp, gw) = gauss_1d(4);
    let mut openings = Vec::with_capacity(stations.len());
    for &xs in stations {
        if !(xs.abs() <= kk) {
            return Err(Error::OutsideDomain { x: xs, y: 0.0, z: 0.0 });
        }
        let mut line = [0.0; 3];
        line[0] = xs;
        let value = match method {
            CodMethod::LineIntegral => {
                let mut s = 0.0;
                for slot in 0..dofmap.n_cells() {
                    let lo = dofmap.cell_lower(slot);
                    let h = dofmap.cell_edge(slot);
                    let w: f64 = (0..n).map(|a| side_weight(lo[a], h, line[a], kk)).product();
                    if w == 0.0 {
                        continue;
                    }
                    let mut part = 0.0;
                    for (t, wt) in gp.iter().zip(&gw) {
                        let mut x = line;
                        x[n] = lo[n] + t * h;
                        let xi = reference_coords(dofmap, slot, &x);
                        let pv = evaluate_in_cell(dofmap, values, slot, &xi);
                        part += wt * (0..d).map(|a| pv.u[a] * pv.grad_phi[a]).sum::<f64>();
                    }
                    s += w * part * h;
                }
                s
            }
            CodMethod::DisplacementTrace { offset } => {
                let mut up = line;
                up[n] = offset;
                let mut down = line;
                down[n] = -offset;
                let eval = |x: &[f64; 3]| -> Result<f64> {
                    let c = mesh.locate(x)?;
                    let slot = dofmap.slot_of(c).ok_or(Error::UnknownCell(c))?;
                    let xi = reference_coords(dofmap, slot, x);
                    Ok(evaluate_in_cell(dofmap, values, slot, &xi).u[n])
                };
                eval(&up)? - eval(&down)?
            }
        };
        openings.push(value.abs());
    }
    Ok(CodProfile { stations: stations.to_vec(), openings })
}

/// `start, start + step, ..., end` (inclusive up to rounding).
pub fn stations(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::interpolate;
    use crate::mesh::DomainSpec;

    #[test]
    fn manufactured_tcv() {
        // Unit square: u = (x, 0), phi = x gives int x = 1/2.
        let mut m = Mesh::new(DomainSpec::new(2, 0.5, 1).unwrap()).unwrap();
        m.uniform_refine(2).unwrap();
        let d = DofMap::new(&m);
        let f = interpolate(&d, |x| [x[0] + 0.5, 0.0, 0.0, x[0] + 0.5]);
        assert!((compute_tcv(&d, &f.values) - 0.5).abs() < 1e-14);
        let g = interpolate(&d, |x| [x[0], x[1], 0.0, 0.3]);
        assert!(compute_tcv(&d, &g.values) < 1e-15);
    }

    #[test]
    fn station_list() {
        let s = stations(-1.5, 1.5, 0.05);
        assert_eq!(s.len(), 61);
        assert!((s[60] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cod_of_intact_field_is_zero() {
        let mut m = Mesh::new(DomainSpec::new(2, 2.0, 4).unwrap()).unwrap();
        m.uniform_refine(1).unwrap();
        let d = DofMap::new(&m);
        let f = interpolate(&d, |x| [x[0], x[1], 0.0, 1.0]);
        let p = compute_cod(&m, &d, &f.values, &[0.0, 0.3], CodMethod::LineIntegral).unwrap();
        assert_eq!(p.openings, alloc::vec![0.0, 0.0]);
    }
}
