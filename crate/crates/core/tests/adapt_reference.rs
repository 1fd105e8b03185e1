use crackfield_core::adapt::{
    adaptive_cycle, jump_estimator, refine_crack_region, unsaturated_band, CycleOptions, RefinementPolicy,
};
use crackfield_core::fem::{interpolate, DofMap};
use crackfield_core::mesh::{DomainSpec, Mesh};
use crackfield_core::model::Material;
use crackfield_core::reference::{fit_rate, richardson};
use crackfield_core::solver::SolverOptions;
use proptest::prelude::*;

#[test]
fn band_is_saturated_after_every_cycle() {
    let mut m = Mesh::new(DomainSpec::new(2, 4.0, 4).unwrap()).unwrap();
    refine_crack_region(&mut m, 1.0, 0.5).unwrap();
    let mat = Material::default();
    let policy = RefinementPolicy::new(0.5);
    let opts = CycleOptions { cycles: 2, ..Default::default() };
    let mut seen = 0;
    adaptive_cycle(m, &mat, &SolverOptions::default(), &policy, &opts, |mesh, d, s, r| {
        let p = RefinementPolicy { h_target: r.h_target, ..policy };
        assert!(unsaturated_band(mesh, d, s.fields.phi(d), &p).is_empty(), "level {}", r.level);
        let eps = mat.coefficients(2, d.min_edge()).eps;
        assert!((r.eps - eps).abs() <= 1e-14 && (eps - 2.0 * 2f64.sqrt() * r.h_target).abs() <= 1e-12);
        seen += 1;
    })
    .unwrap();
    assert_eq!(seen, 3);
}

fn rotate(x: &[f64; 3]) -> [f64; 3] {
    [-x[1], x[0], x[2]]
}

/// Quarter turns of the field and mesh permute the indicators.
#[test]
fn estimator_is_rotation_invariant() {
    let mut m = Mesh::new(DomainSpec::new(2, 1.0, 4).unwrap()).unwrap();
    let centre: Vec<_> = m
        .active_cells()
        .iter()
        .copied()
        .filter(|&c| {
            let lo = m.lower_corner(c);
            let e = m.edge(c);
            (lo[0] + 0.5 * e).abs() < 0.5 && (lo[1] + 0.5 * e).abs() < 0.5
        })
        .collect();
    m.refine(&centre).unwrap();
    let d = DofMap::new(&m);
    let u = |x: &[f64; 3]| [x[0] * x[0] * x[1] + x[1].sin(), x[0].exp() - x[1] * x[1] * x[1]];
    let f = interpolate(&d, |x| {
        let v = u(x);
        [v[0], v[1], 0.0, 1.0]
    });
    let g = interpolate(&d, |x| {
        let back = [x[1], -x[0], 0.0];
        let v = u(&back);
        let r = rotate(&[v[0], v[1], 0.0]);
        [r[0], r[1], 0.0, 1.0]
    });
    let ef = jump_estimator(&m, &d, &f.values);
    let eg = jump_estimator(&m, &d, &g.values);
    assert!(ef.total_squared() > 0.0);
    for (s, &c) in d.cells().iter().enumerate() {
        let e = m.edge(c);
        let lo = m.lower_corner(c);
        let centre = rotate(&[lo[0] + 0.5 * e, lo[1] + 0.5 * e, 0.0]);
        let image = d.slot_of(m.locate(&centre[..2]).unwrap()).unwrap();
        assert!((ef.eta[s] - eg.eta[image]).abs() <= 1e-10 * (1.0 + ef.eta[s].abs()), "slot {s}");
    }
}

proptest! {
    #[test]
    fn richardson_recovers_power_laws(limit in -10.0f64..10.0, c in 0.1f64..5.0, q in 0.5f64..3.0, h0 in 0.05f64..1.0, extra in 0usize..3) {
        let values: Vec<f64> = (0..3 + extra).map(|k| limit + c * (h0 / 2f64.powi(k as i32)).powf(q)).collect();
        let fit = richardson(&values, 2.0).unwrap();
        prop_assert!((fit.order - q).abs() <= 1e-6 * q);
        prop_assert!((fit.limit - limit).abs() <= 1e-8 * (1.0 + limit.abs()));
    }

    #[test]
    fn fit_rate_recovers_power_laws(c in 0.01f64..100.0, q in -3.0f64..3.0, n in 2usize..8, h0 in 0.01f64..1.0, ratio in 1.1f64..4.0) {
        let pairs: Vec<(f64, f64)> = (0..n).map(|k| {
            let h = h0 / ratio.powi(k as i32);
            (h, c * h.powf(q))
        }).collect();
        prop_assert!((fit_rate(&pairs).unwrap() - q).abs() <= 1e-9);
    }
}

#[test]
fn rate_helpers_reject_degenerate_input() {
    assert!(richardson(&[1.0, 2.0], 2.0).is_err());
    assert!(richardson(&[1.0, 1.0, 1.0], 2.0).is_err());
    assert!(richardson(&[1.0, 2.0, 1.0], 2.0).is_err());
    assert!(richardson(&[3.0, 2.0, 1.5], 1.0).is_err());
    assert!(fit_rate(&[(1.0, 1.0)]).is_err());
    assert!(fit_rate(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
}
