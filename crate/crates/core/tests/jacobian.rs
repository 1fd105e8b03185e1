//! Assembled Jacobian against central differences of the residual.

use crackfield_core::fem::{ConstraintSet, Dirichlet, DofMap};
use crackfield_core::mesh::{DomainSpec, Mesh};
use crackfield_core::model::{Assembler, Material, PressureCoupling};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(dim: usize, hanging: bool) -> Mesh {
    let mut m = Mesh::new(DomainSpec::new(dim, 1.0, 2).unwrap()).unwrap();
    if hanging {
        m.refine(&[0]).unwrap();
    }
    m
}

/// Frobenius norm of `J - J_fd` over free rows and columns, relative to `J`.
fn jacobian_error(m: &Mesh, coupling: PressureCoupling, dirichlet: Dirichlet, seed: u64) -> f64 {
    let dim = m.dim();
    let d = DofMap::new(m);
    let mat = Material { pressure: 0.3, kappa_factor: 1e-3, pressure_coupling: coupling, ..Default::default() };
    let co = mat.coefficients(dim, d.min_edge());
    let cs = ConstraintSet::build(&d, dirichlet, &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = d.n_u();
    let mut x: Vec<f64> = (0..d.n_dofs()).map(|i| if i < nu { rng.gen_range(-0.3..0.3) } else { rng.gen_range(0.05..0.95) }).collect();
    cs.distribute(&mut x);
    let phi_tilde: Vec<f64> = (0..d.n_vertices()).map(|_| rng.gen_range(0.05..0.95)).collect();
    let asm = Assembler::new(&d, coupling);
    let jac = asm.system(&d, &cs, &co, &x, &phi_tilde).to_dense();
    let free: Vec<usize> = (0..d.n_dofs()).filter(|&i| !cs.is_constrained(i)).collect();
    let h = 1e-6;
    let (mut num, mut den) = (0.0, 0.0);
    for &j in &free {
        let eval = |delta: f64| {
            let mut y = x.clone();
            y[j] += delta;
            cs.distribute(&mut y);
            asm.residual(&d, &cs, &co, &y, &phi_tilde)
        };
        let (rp, rm) = (eval(h), eval(-h));
        for &i in &free {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            num += (jac[i][j] - fd).powi(2);
            den += jac[i][j].powi(2);
        }
    }
    (num / den).sqrt()
}

#[test]
fn jacobian_2d_with_hanging_nodes() {
    let m = mesh(2, true);
    for coupling in [PressureCoupling::Extrapolated, PressureCoupling::Current] {
        for dirichlet in [Dirichlet::None, Dirichlet::ClampedDisplacement] {
            let e = jacobian_error(&m, coupling, dirichlet, 7);
            assert!(e <= 1e-5, "{coupling:?} {dirichlet:?}: {e:e}");
        }
    }
}

#[test]
fn jacobian_3d() {
    for hanging in [false, true] {
        let m = mesh(3, hanging);
        let e = jacobian_error(&m, PressureCoupling::Current, Dirichlet::None, 11);
        assert!(e <= 1e-5, "hanging {hanging}: {e:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn jacobian_random_states(seed in any::<u64>(), hanging in any::<bool>(), current in any::<bool>()) {
        let coupling = if current { PressureCoupling::Current } else { PressureCoupling::Extrapolated };
        let e = jacobian_error(&mesh(2, hanging), coupling, Dirichlet::None, seed);
        prop_assert!(e <= 1e-5, "{e:e}");
    }
}
