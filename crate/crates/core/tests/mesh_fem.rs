use crackfield_core::fem::field::evaluate_in_cell;
use crackfield_core::fem::{evaluate, ConstraintSet, Dirichlet, DofMap, FieldVector, Transfer};
use crackfield_core::mesh::{DomainSpec, Mesh};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mesh(dim: usize, rounds: usize, rng: &mut ChaCha8Rng) -> Mesh {
    let mut m = Mesh::new(DomainSpec::new(dim, 1.5, 2).unwrap()).unwrap();
    for _ in 0..rounds {
        let cells = m.active_cells().to_vec();
        let marked: Vec<_> = cells.into_iter().filter(|_| rng.gen_bool(0.2)).collect();
        m.refine(&marked).unwrap();
    }
    m
}

fn random_field(d: &DofMap, rng: &mut ChaCha8Rng) -> FieldVector {
    let mut f = FieldVector::zeros(d);
    f.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    ConstraintSet::build(d, Dirichlet::None, &[]).distribute(&mut f.values);
    f
}

fn reference_coords(m: &Mesh, cell: usize, p: &[i64; 3]) -> [f64; 3] {
    let anchor = m.cell(cell).unwrap().anchor;
    let e = m.lattice_edge(cell) as f64;
    let mut xi = [0.0; 3];
    for a in 0..m.dim() {
        xi[a] = (p[a] - anchor[a]) as f64 / e;
    }
    xi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_keeps_balance_and_measure(seed in any::<u64>(), dim in 2usize..=3, rounds in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mesh(dim, rounds, &mut rng);
        prop_assert!(m.max_level_jump() <= 1);
        let vol = 3f64.powi(dim as i32);
        prop_assert!((m.total_measure() - vol).abs() <= 1e-12 * vol);
        let d = DofMap::new(&m);
        prop_assert_eq!(d.n_dofs(), (dim + 1) * d.n_vertices());
        prop_assert_eq!(d.n_cells(), m.n_active());
    }

    /// Every cell containing a vertex reproduces the vertex value.
    #[test]
    fn hanging_nodes_are_conforming(seed in any::<u64>(), dim in 2usize..=3, rounds in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_mesh(dim, rounds, &mut rng);
        let d = DofMap::new(&m);
        let f = random_field(&d, &mut rng);
        for v in 0..d.n_vertices() {
            let p = *d.vertex_lattice(v);
            for c in m.cells_containing_lattice(&p) {
                let slot = d.slot_of(c).unwrap();
                let pv = evaluate_in_cell(&d, &f.values, slot, &reference_coords(&m, c, &p));
                prop_assert!((pv.phi - f.values[d.phi_dof(v)]).abs() <= 1e-12);
                for k in 0..dim {
                    prop_assert!((pv.u[k] - f.values[d.u_dof(v, k)]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn nested_transfer_is_exact(seed in any::<u64>(), dim in 2usize..=3, rounds in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coarse = random_mesh(dim, rounds, &mut rng);
        let dc = DofMap::new(&coarse);
        let f = random_field(&dc, &mut rng);
        let mut fine = coarse.clone();
        let marked: Vec<_> = fine.active_cells().iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
        fine.refine(&marked).unwrap();
        let df = DofMap::new(&fine);
        let g = Transfer::new(&coarse, &dc, &fine, &df).unwrap().field(&f).unwrap();
        for _ in 0..40 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let a = evaluate(&coarse, &dc, &f, &x).unwrap();
            let b = evaluate(&fine, &df, &g, &x).unwrap();
            prop_assert!((a.phi - b.phi).abs() <= 1e-12);
            for k in 0..dim {
                prop_assert!((a.u[k] - b.u[k]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn transfer_rejects_unrelated_meshes() {
    let a = Mesh::new(DomainSpec::new(2, 1.0, 2).unwrap()).unwrap();
    let b = Mesh::new(DomainSpec::new(2, 1.0, 3).unwrap()).unwrap();
    let (da, db) = (DofMap::new(&a), DofMap::new(&b));
    assert!(Transfer::new(&a, &da, &b, &db).is_err());
}

#[test]
fn evaluate_outside_domain_fails() {
    let m = Mesh::new(DomainSpec::new(2, 1.0, 2).unwrap()).unwrap();
    let d = DofMap::new(&m);
    let f = FieldVector::zeros(&d);
    assert!(evaluate(&m, &d, &f, &[1.5, 0.0]).is_err());
}
