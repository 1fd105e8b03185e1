use alloc::vec;
use alloc::vec::Vec;


use super::csr::CsrMatrix;
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// A fixed linear approximation of `A^{-1}`.
pub trait Preconditioner {
    /// `z = M^{-1} r`
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv(x, y);
    }
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub rtol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, max_iter: 1000, restart: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub converged: bool,
    /// The Hessenberg least-squares problem became singular.
    pub breakdown: bool,
    /// Residual norm estimate after every iteration, starting with the
    /// initial residual.
    pub residual_norms: Vec<f64>,
    /// `||b - A x||` recomputed at exit.
    pub final_residual: f64,
    pub rhs_norm: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES with modified Gram-Schmidt and
/// Givens rotations. Stops when `||b - A x|| <= rtol * ||b||`.
pub fn gmres<A: LinearOperator + ?Sized, P: Preconditioner + ?Sized>(
    op: &A,
    prec: &P,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &GmresOptions,
) -> Result<(Vec<f64>, GmresOutcome)> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    if !(opts.rtol > 0.0 && opts.rtol < 1.0) || opts.restart == 0 {
        return Err(Error::InvalidParameter("GMRES needs rtol in (0, 1) and restart >= 1".into()));
    }
    let mut x = match x0 {
        Some(v) if v.len() == n => v.to_vec(),
        Some(v) => return Err(Error::DimensionMismatch { expected: n, got: v.len() }),
        None => vec![0.0; n],
    };
    let bnorm = norm(rhs);
    let mut outcome = GmresOutcome {
        iterations: 0,
        converged: false,
        breakdown: false,
        residual_norms: Vec::new(),
        final_residual: 0.0,
        rhs_norm: bnorm,
    };
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        outcome.converged = true;
        outcome.residual_norms.push(0.0);
        return Ok((x, outcome));
    }
    let target = opts.rtol * bnorm;
    let m = opts.restart;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];

    loop {
        op.apply(&x, &mut r);
        for i in 0..n {
            r[i] = rhs[i] - r[i];
        }
        let beta = norm(&r);
        if outcome.residual_norms.is_empty() {
            outcome.residual_norms.push(beta);
        }
        if beta <= target {
            outcome.converged = true;
            break;
        }
        if outcome.iterations >= opts.max_iter {
            break;
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        let mut done = false;
        for j in 0..m {
            if outcome.iterations >= opts.max_iter {
                break;
            }
            outcome.iterations += 1;
            prec.apply(&basis[j], &mut z);
            op.apply(&z, &mut w);
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk -= hij * vk;
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (a, b) = (h[j][j], h[j + 1][j]);
            let rr = a.hypot(b);
            if rr == 0.0 {
                outcome.breakdown = true;
                done = true;
                break;
            }
            cs[j] = a / rr;
            sn[j] = b / rr;
            h[j][j] = rr;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;
            let res = g[j + 1].abs();
            outcome.residual_norms.push(res);
            if res <= target {
                done = true;
                break;
            }
            if hnext <= 1e-14 * beta {
                // Lucky breakdown: the Krylov space is invariant.
                done = true;
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        if k_used > 0 {
            let mut y = vec![0.0; k_used];
            for i in (0..k_used).rev() {
                let mut s = g[i];
                for k in i + 1..k_used {
                    s -= h[i][k] * y[k];
                }
                if h[i][i].abs() <= f64::MIN_POSITIVE {
                    outcome.breakdown = true;
                    y[i] = 0.0;
                } else {
                    y[i] = s / h[i][i];
                }
            }
            let mut comb = vec![0.0; n];
            for (k, yk) in y.iter().enumerate() {
                for (c, v) in comb.iter_mut().zip(&basis[k]) {
                    *c += yk * v;
                }
            }
            prec.apply(&comb, &mut z);
            for i in 0..n {
                x[i] += z[i];
            }
        }
        if outcome.breakdown {
            break;
        }
        if done && outcome.residual_norms.last().copied().unwrap_or(f64::INFINITY) <= target {
            // Confirm with the true residual on the next pass.
            op.apply(&x, &mut r);
            for i in 0..n {
                r[i] = rhs[i] - r[i];
            }
            if norm(&r) <= target * 1.0001 {
                outcome.converged = true;
                break;
            }
        }
        if outcome.iterations >= opts.max_iter {
            break;
        }
        if done && k_used == 0 {
            break;
        }
    }
    op.apply(&x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    outcome.final_residual = norm(&r);
    if !outcome.converged && outcome.final_residual <= target {
        outcome.converged = true;
    }
    Ok((x, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        let (x, out) = gmres(&a, &Identity, &b, None, &GmresOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        for i in 0..5 {
            assert!((x[i] - b[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rhs() {
        let a = CsrMatrix::identity(3);
        let (x, out) = gmres(&a, &Identity, &[0.0; 3], None, &GmresOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn nonsymmetric_small_restarted() {
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -2.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &trip);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let opts = GmresOptions { rtol: 1e-10, max_iter: 500, restart: 5 };
        let (x, out) = gmres(&a, &Identity, &b, None, &opts).unwrap();
        assert!(out.converged);
        let mut r = vec![0.0; n];
        a.spmv(&x, &mut r);
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * norm(&b) * 1.01);
        for w in out.residual_norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bad_dimensions() {
        let a = CsrMatrix::identity(3);
        assert!(gmres(&a, &Identity, &[1.0; 2], None, &GmresOptions::default()).is_err());
    }
}
