use crackfield_core::adapt::seed;
use crackfield_core::fem::{ConstraintSet, Dirichlet, DofMap};
use crackfield_core::mesh::{DomainSpec, Mesh};
use crackfield_core::model::{extrapolate_phi, Assembler, FractureState, Material};
use crackfield_core::solver::{detect_cycles, newton_active_set_step, SolverOptions};
use proptest::prelude::*;

fn toggles_brute_force(h: u64, n: usize) -> usize {
    let bit = |i: usize| (h >> i) & 1;
    (0..n.saturating_sub(1)).filter(|&i| bit(i) != bit(i + 1)).count()
}

proptest! {
    #[test]
    fn cycle_detector_matches_brute_force(
        history in prop::collection::vec(any::<u64>(), 1..20),
        filled in 0usize..100,
        window in 2usize..=64,
        toggles in 1usize..8,
    ) {
        let n = filled.min(window);
        let expect: Vec<usize> = history
            .iter()
            .enumerate()
            .filter(|(_, &h)| toggles_brute_force(h, n) >= toggles)
            .map(|(i, _)| i)
            .collect();
        prop_assert_eq!(detect_cycles(&history, filled, window, toggles), expect);
    }
}

fn crack_problem() -> (Mesh, DofMap, Material) {
    let mut m = Mesh::new(DomainSpec::new(2, 4.0, 8).unwrap()).unwrap();
    crackfield_core::adapt::refine_crack_region(&mut m, 1.0, 0.25).unwrap();
    let d = DofMap::new(&m);
    (m, d, Material::default())
}

/// Bound, sign of the multiplier and vanishing residual off the active set.
#[test]
#[allow(clippy::needless_range_loop)]
fn converged_steps_are_feasible_and_complementary() {
    let (m, d, mat) = crack_problem();
    let s = seed(&m, &d, mat.l0).unwrap();
    let mut state = FractureState::from_seed(&d, &s);
    let opts = SolverOptions::default();
    let co = mat.coefficients(2, d.min_edge());
    let asm = Assembler::new(&d, co.coupling);
    let base = ConstraintSet::build(&d, Dirichlet::ClampedDisplacement, &[]);
    for _ in 0..3 {
        let phi_tilde = extrapolate_phi(&state);
        let rep = newton_active_set_step(&d, &mat, &mut state, &opts).unwrap();
        assert!(rep.converged);
        assert!(rep.feasibility_violation <= opts.feasibility_tol, "{:e}", rep.feasibility_violation);
        let r = asm.residual(&d, &base, &co, &state.fields.values, &phi_tilde);
        let scale = r.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut active = vec![false; d.n_vertices()];
        rep.active_set.iter().for_each(|&v| active[v] = true);
        for v in 0..d.n_vertices() {
            let g = d.phi_dof(v);
            if base.is_constrained(g) {
                continue;
            }
            let phi = state.fields.values[g];
            assert!(phi <= state.phi_old[v] + opts.feasibility_tol);
            if active[v] {
                assert!((phi - state.phi_old[v]).abs() <= 1e-12);
                if !rep.permanent.contains(&v) {
                    assert!(-r[g] >= -1e-8 * scale, "negative multiplier {} at {v}", -r[g]);
                }
            } else {
                assert!(r[g].abs() <= 1e-6 * scale, "residual {} off the active set", r[g]);
            }
        }
        state.advance(&d);
    }
}

/// A converged state does not move when the step is solved again.
#[test]
fn converged_state_is_stationary() {
    let (m, d, mat) = crack_problem();
    let s = seed(&m, &d, mat.l0).unwrap();
    let mut state = FractureState::from_seed(&d, &s);
    let opts = SolverOptions::default();
    newton_active_set_step(&d, &mat, &mut state, &opts).unwrap();
    let before = state.fields.values.clone();
    let rep = newton_active_set_step(&d, &mat, &mut state, &opts).unwrap();
    assert!(rep.converged);
    let scale = before.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let moved = before.iter().zip(&state.fields.values).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(moved <= 1e-8 * scale, "moved by {moved:e}");
}

#[test]
fn zero_pressure_keeps_intact_solution() {
    let (m, d, _) = crack_problem();
    let mat = Material { pressure: 0.0, ..Default::default() };
    let s = seed(&m, &d, mat.l0).unwrap();
    let mut state = FractureState::from_seed(&d, &s);
    let rep = newton_active_set_step(&d, &mat, &mut state, &SolverOptions::default()).unwrap();
    assert!(rep.converged);
    let umax = state.fields.values[..d.n_u()].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(umax <= 1e-12, "{umax:e}");
}
