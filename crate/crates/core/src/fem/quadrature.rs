use alloc::vec::Vec;


/// Gauss-Legendre rule on `[0, 1]` with `n` points (1..=5).
pub fn gauss_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (pts, wts): (&[f64], &[f64]) = match n {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (&[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4], &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]),
        4 => (
            &[-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6],
            &[0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9],
        ),
        5 => (
            &[-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
        _ => panic!("gauss_1d supports 1..=5 points, got {n}"),
    };
    (pts.iter().map(|&x| 0.5 * (x + 1.0)).collect(), wts.iter().map(|&w| 0.5 * w).collect())
}

/// Tensor-product rule on the reference cell `[0, 1]^dim`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn tensor_gauss(dim: usize, n: usize) -> Self {
        let (p1, w1) = gauss_1d(n);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let nz = if dim == 3 { n } else { 1 };
        let ny = if dim >= 2 { n } else { 1 };
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..n {
                    let mut p = [0.0; 3];
                    let mut w = w1[i];
                    p[0] = p1[i];
                    if dim >= 2 {
                        p[1] = p1[j];
                        w *= w1[j];
                    }
                    if dim == 3 {
                        p[2] = p1[k];
                        w *= w1[k];
                    }
                    points.push(p);
                    weights.push(w);
                }
            }
        }
        Self { dim, points, weights }
    }

    /// 2 points per direction, used for every cell integral.
    pub fn cell(dim: usize) -> Self {
        Self::tensor_gauss(dim, 2)
    }

    /// 2 points per direction on a `(dim - 1)`-dimensional face.
    pub fn face(dim: usize) -> Self {
        Self::tensor_gauss(dim - 1, 2)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Q1 shape values on the reference cell. Local vertex `k` sits at the
/// corner whose coordinate along axis `a` is bit `a` of `k`.
pub fn shape_values(dim: usize, xi: &[f64; 3], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate().take(1 << dim) {
        let mut v = 1.0;
        for a in 0..dim {
            v *= if k >> a & 1 == 1 { xi[a] } else { 1.0 - xi[a] };
        }
        *o = v;
    }
}

/// Reference gradients of the Q1 shape functions.
pub fn shape_gradients(dim: usize, xi: &[f64; 3], out: &mut [[f64; 3]]) {
    for (k, g) in out.iter_mut().enumerate().take(1 << dim) {
        for b in 0..3 {
            g[b] = 0.0;
        }
        for b in 0..dim {
            let mut v = 1.0;
            for a in 0..dim {
                let bit = k >> a & 1 == 1;
                v *= if a == b {
                    if bit {
                        1.0
                    } else {
                        -1.0
                    }
                } else if bit {
                    xi[a]
                } else {
                    1.0 - xi[a]
                };
            }
            g[b] = v;
        }
    }
}

/// Shape values and physical gradients of a cube cell with edge `h` at every
/// point of a rule, precomputed once per (dim, rule) and rescaled per cell.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub dim: usize,
    pub n_vertices: usize,
    pub quad: Quadrature,
    /// `values[q][k]`
    pub values: Vec<[f64; 8]>,
    /// Gradients on the reference cell, `grads[q][k]`.
    pub grads: Vec<[[f64; 3]; 8]>,
}

impl ReferenceElement {
    pub fn new(dim: usize, quad: Quadrature) -> Self {
        let n_vertices = 1 << dim;
        let mut values = Vec::with_capacity(quad.len());
        let mut grads = Vec::with_capacity(quad.len());
        for p in &quad.points {
            let mut v = [0.0; 8];
            let mut g = [[0.0; 3]; 8];
            shape_values(dim, p, &mut v);
            shape_gradients(dim, p, &mut g);
            values.push(v);
            grads.push(g);
        }
        Self { dim, n_vertices, quad, values, grads }
    }
}

#[cfg(test)]
fn powi(x: f64, n: i32) -> f64 {
    num_traits::Float::powi(x, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for d in 1..=3 {
            for n in 1..=5 {
                let q = Quadrature::tensor_gauss(d, n);
                let s: f64 = q.weights.iter().sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_point_rule_exact_to_cubic() {
        let q = Quadrature::cell(2);
        for a in 0..=3 {
            for b in 0..=3 {
                let num: f64 = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(p, w)| w * powi(p[0], a) * powi(p[1], b))
                    .sum();
                let exact = 1.0 / ((a + 1) as f64 * (b + 1) as f64);
                assert!((num - exact).abs() < 1e-13, "x^{a} y^{b}");
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for d in 2..=3 {
            let r = ReferenceElement::new(d, Quadrature::cell(d));
            for q in 0..r.quad.len() {
                let s: f64 = r.values[q][..r.n_vertices].iter().sum();
                assert!((s - 1.0).abs() < 1e-14);
                for b in 0..d {
                    let g: f64 = r.grads[q][..r.n_vertices].iter().map(|g| g[b]).sum();
                    assert!(g.abs() < 1e-14);
                }
            }
        }
    }
}
