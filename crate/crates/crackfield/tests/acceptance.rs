//! Benchmark acceptance run: one PASS/FAIL line per target, non-zero exit if
//! any target fails.

use std::time::Instant;

use crackfield::report::{self, Verdict};
use crackfield::study::{self, StudyKind};
use crackfield::RunConfig;
use crackfield_core::adapt::{adaptive_cycle, refine_crack_region, seed, unsaturated_band, CycleOptions, RefinementPolicy};
use crackfield_core::fem::{evaluate, ConstraintSet, Dirichlet, DofMap, FieldVector, Transfer};
use crackfield_core::linsolve::{gmres, AmgOptions, BlockPreconditioner, CsrMatrix, DenseMatrix, GmresOptions, Lu, PreconditionerKind};
use crackfield_core::mesh::{DomainSpec, Mesh};
use crackfield_core::model::{extrapolate_phi, Assembler, FractureState, Material, PressureCoupling};
use crackfield_core::reference::{fit_rate, richardson, tcv_exact, SneddonParams};
use crackfield_core::solver::{newton_active_set_step, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exact_references() -> Verdict {
    let t2 = tcv_exact(&SneddonParams::from_material(&Material::default(), 2));
    let t3 = tcv_exact(&SneddonParams::from_material(&Material::default(), 3));
    Verdict::new(
        "1 exact references",
        report::same_digits(t2, 6.0319e-3, 4) && report::same_digits(t3, 5.1200e-3, 4),
        format!("2d {t2:.5e} (6.0319e-3), 3d {t3:.5e} (5.1200e-3)"),
    )
}

fn domain_study() -> Verdict {
    let cfg = StudyKind::DomainStudy.preset();
    let s = study::domain_study(&cfg, None).expect("domain study");
    let finest = s.rows.iter().flat_map(|r| r.levels.iter().map(|l| l.dofs)).max().unwrap_or(0);
    let mut v = report::check_domain(&s, 1.0);
    v.passed &= finest <= 100_000;
    v.name = "2 domain study".into();
    v.detail = format!("{}, finest level {finest} DoFs", v.detail);
    v
}

fn eps_convergence() -> Verdict {
    let cfg = StudyKind::EpsConvergence.preset();
    let s = study::eps_convergence(&cfg, None).expect("eps study");
    let mut v = report::check_eps(&s, 0.7, 1.3);
    let errs: Vec<String> = s.rows.iter().map(|r| format!("{}: {:.3e}", r.eps, r.error)).collect();
    v.name = "3 eps convergence".into();
    v.detail = format!("{} (|TCV - TCV*| {})", v.detail, errs.join(", "));
    v
}

fn cod_convergence() -> Verdict {
    let cfg = StudyKind::CodStudy.preset();
    let s = study::cod_study(&cfg, None).expect("COD study");
    let mut v = report::check_cod(&s, 1.7);
    v.name = "4 COD convergence".into();
    v
}

fn sneddon_3d() -> Verdict {
    let cfg = StudyKind::Sneddon3d.preset();
    let s = study::sneddon3d(&cfg, None).expect("3d study");
    let finest = s.rows.iter().map(|r| r.dofs).max().unwrap_or(0);
    let mut v = report::check_3d(&s, 1.5);
    v.passed &= finest <= 300_000;
    v.name = "5 3d benchmark".into();
    v.detail = format!("{}, finest level {finest} DoFs", v.detail);
    v
}

fn solver_trend() -> Verdict {
    let cfg = RunConfig { half_width: 5.0, n0: 5, ..RunConfig::default() };
    let levels = study::solver_trend(&cfg, 2..=5).expect("uniform runs");
    let mut v = report::check_gmres_growth(&levels, 2.5, 1.3);
    v.name = "6 solver trend".into();
    v
}

fn random_state(d: &DofMap, cs: &ConstraintSet, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let nu = d.n_u();
    let mut x: Vec<f64> =
        (0..d.n_dofs()).map(|i| if i < nu { rng.gen_range(-0.3..0.3) } else { rng.gen_range(0.05..0.95) }).collect();
    cs.distribute(&mut x);
    let pt = (0..d.n_vertices()).map(|_| rng.gen_range(0.05..0.95)).collect();
    (x, pt)
}

fn jacobian_error(dim: usize, coupling: PressureCoupling, rng: &mut ChaCha8Rng) -> f64 {
    let mut m = Mesh::new(DomainSpec::new(dim, 1.0, 2).unwrap()).unwrap();
    m.refine(&[0]).unwrap();
    let d = DofMap::new(&m);
    let mat = Material { pressure: 0.3, kappa_factor: 1e-3, pressure_coupling: coupling, ..Default::default() };
    let co = mat.coefficients(dim, d.min_edge());
    let cs = ConstraintSet::build(&d, Dirichlet::None, &[]);
    let (x, pt) = random_state(&d, &cs, rng);
    let asm = Assembler::new(&d, coupling);
    let jac = asm.system(&d, &cs, &co, &x, &pt).to_dense();
    let free: Vec<usize> = (0..d.n_dofs()).filter(|&i| !cs.is_constrained(i)).collect();
    let h = 1e-6;
    let (mut num, mut den) = (0.0, 0.0);
    for &j in &free {
        let r = |s: f64| {
            let mut y = x.clone();
            y[j] += s;
            cs.distribute(&mut y);
            asm.residual(&d, &cs, &co, &y, &pt)
        };
        let (rp, rm) = (r(h), r(-h));
        for &i in &free {
            num += (jac[i][j] - (rp[i] - rm[i]) / (2.0 * h)).powi(2);
            den += jac[i][j].powi(2);
        }
    }
    (num / den).sqrt()
}

fn feasibility_and_complementarity() -> Result<String, String> {
    let mut m = Mesh::new(DomainSpec::new(2, 4.0, 8).unwrap()).unwrap();
    refine_crack_region(&mut m, 1.0, 0.25).unwrap();
    let d = DofMap::new(&m);
    let mat = Material::default();
    let opts = SolverOptions::default();
    let co = mat.coefficients(2, d.min_edge());
    let asm = Assembler::new(&d, co.coupling);
    let base = ConstraintSet::build(&d, Dirichlet::ClampedDisplacement, &[]);
    let mut state = FractureState::from_seed(&d, &seed(&m, &d, 1.0).unwrap());
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let pt = extrapolate_phi(&state);
        let rep = newton_active_set_step(&d, &mat, &mut state, &opts).map_err(|e| e.to_string())?;
        if !rep.converged || rep.feasibility_violation > opts.feasibility_tol {
            return Err(format!("step {} violation {:e}", rep.step, rep.feasibility_violation));
        }
        let r = asm.residual(&d, &base, &co, &state.fields.values, &pt);
        let scale = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for v in 0..d.n_vertices() {
            let g = d.phi_dof(v);
            if base.is_constrained(g) {
                continue;
            }
            let gap = state.phi_old[v] - state.fields.values[g];
            let active = rep.active_set.contains(&v);
            let bad = if active {
                gap.abs() > 1e-12 || (!rep.permanent.contains(&v) && r[g] > 1e-8 * scale)
            } else {
                gap < -opts.feasibility_tol || r[g].abs() > 1e-6 * scale
            };
            if bad {
                return Err(format!("vertex {v}: gap {gap:e}, residual {:e}", r[g]));
            }
            worst = worst.max(if active { gap.abs() } else { r[g].abs() / scale });
        }
        state.advance(&d);
    }
    Ok(format!("3 steps, worst {worst:.1e}"))
}

fn conformity_and_transfer(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for dim in [2, 3] {
        let mut coarse = Mesh::new(DomainSpec::new(dim, 1.0, 2).unwrap()).unwrap();
        coarse.refine(&[0]).unwrap();
        let dc = DofMap::new(&coarse);
        let mut f = FieldVector::zeros(&dc);
        f.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        ConstraintSet::build(&dc, Dirichlet::None, &[]).distribute(&mut f.values);
        let mut fine = coarse.clone();
        let marked: Vec<_> = fine.active_cells().iter().copied().step_by(3).collect();
        fine.refine(&marked).unwrap();
        let df = DofMap::new(&fine);
        let g = Transfer::new(&coarse, &dc, &fine, &df).unwrap().field(&f).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = evaluate(&coarse, &dc, &f, &x).unwrap();
            let b = evaluate(&fine, &df, &g, &x).unwrap();
            worst = worst.max((a.phi - b.phi).abs());
            for k in 0..dim {
                worst = worst.max((a.u[k] - b.u[k]).abs());
            }
        }
        // Neighbouring cells agree across every coarse/fine face.
        for v in 0..df.n_vertices() {
            let x = df.vertex_coords(v);
            let p = evaluate(&fine, &df, &g, &x[..dim]).unwrap();
            worst = worst.max((p.phi - g.values[df.phi_dof(v)]).abs());
        }
    }
    worst
}

fn gmres_vs_direct() -> f64 {
    let mut m = Mesh::new(DomainSpec::new(2, 2.0, 4).unwrap()).unwrap();
    refine_crack_region(&mut m, 1.0, 0.5).unwrap();
    let d = DofMap::new(&m);
    let mat = Material::default();
    let co = mat.coefficients(2, d.min_edge());
    let s = seed(&m, &d, 1.0).unwrap();
    let fixed: Vec<_> = (0..d.n_vertices()).filter(|&v| s[v] < 0.5).map(|v| (d.phi_dof(v), s[v])).collect();
    let cs = ConstraintSet::build(&d, Dirichlet::ClampedDisplacement, &fixed);
    let mut x = FractureState::from_seed(&d, &s).fields.values;
    cs.distribute(&mut x);
    let sys = Assembler::new(&d, co.coupling).system(&d, &cs, &co, &x, &s);
    assert!(sys.n_u() + sys.n_phi() <= 500);
    let coords: Vec<[f64; 3]> = (0..d.n_vertices()).map(|v| *d.vertex_coords(v)).collect();
    let p = BlockPreconditioner::build(&sys, PreconditionerKind::Exact, 2, &coords, &AmgOptions::default()).unwrap();
    let (sol, _) = gmres(&sys, &p, &sys.rhs, None, &GmresOptions { rtol: 1e-12, ..Default::default() }).unwrap();
    let a = DenseMatrix::from_csr(&CsrMatrix::from_dense(&sys.to_dense())).unwrap();
    let direct = Lu::factor(&a).unwrap().solve(&sys.rhs);
    let scale = direct.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    sol.iter().zip(&direct).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale
}

fn rate_helpers() -> f64 {
    let mut worst = 0.0f64;
    for (limit, c, q) in [(6.0319e-3, 2e-3, 1.0), (1.92e-3, -5e-4, 2.0), (0.0, 1.0, 0.5)] {
        let seq: Vec<f64> = (0..5).map(|k| limit + c * 0.5f64.powi(k).powf(q)).collect();
        let f = richardson(&seq, 2.0).unwrap();
        worst = worst.max((f.order - q).abs()).max((f.limit - limit).abs());
        let pairs: Vec<(f64, f64)> = (0..5).map(|k| (0.5f64.powi(k), c.abs() * 0.5f64.powi(k).powf(q))).collect();
        worst = worst.max((fit_rate(&pairs).unwrap() - q).abs());
    }
    worst
}

fn band_saturation() -> Result<String, String> {
    let mut m = Mesh::new(DomainSpec::new(2, 4.0, 4).unwrap()).unwrap();
    refine_crack_region(&mut m, 1.0, 0.5).unwrap();
    let policy = RefinementPolicy::new(0.5);
    let opts = CycleOptions { cycles: 3, ..Default::default() };
    let mut bad = Vec::new();
    let mut levels = 0;
    adaptive_cycle(m, &Material::default(), &SolverOptions::default(), &policy, &opts, |mesh, d, s, r| {
        let p = RefinementPolicy { h_target: r.h_target, ..policy };
        let open = unsaturated_band(mesh, d, s.fields.phi(d), &p).len();
        let eps_ok = (r.eps - 2.0 * 2f64.sqrt() * r.h_target).abs() <= 1e-12;
        if open > 0 || !eps_ok {
            bad.push((r.level, open, r.eps));
        }
        levels += 1;
    })
    .map_err(|e| e.to_string())?;
    if bad.is_empty() {
        Ok(format!("{levels} levels"))
    } else {
        Err(format!("{bad:?}"))
    }
}

fn property_suites() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ok = true;
    let mut parts = Vec::new();
    let mut jac = 0.0f64;
    for dim in [2, 3] {
        for coupling in [PressureCoupling::Extrapolated, PressureCoupling::Current] {
            for _ in 0..3 {
                jac = jac.max(jacobian_error(dim, coupling, &mut rng));
            }
        }
    }
    ok &= jac <= 1e-5;
    parts.push(format!("jacobian {jac:.1e}"));
    match feasibility_and_complementarity() {
        Ok(s) => parts.push(format!("complementarity ok ({s})")),
        Err(e) => {
            ok = false;
            parts.push(format!("complementarity FAILED ({e})"));
        }
    }
    let conf = conformity_and_transfer(&mut rng);
    ok &= conf <= 1e-12;
    parts.push(format!("conformity/transfer {conf:.1e}"));
    let lin = gmres_vs_direct();
    ok &= lin <= 1e-8;
    parts.push(format!("gmres vs direct {lin:.1e}"));
    let rates = rate_helpers();
    ok &= rates <= 1e-9;
    parts.push(format!("richardson/fit_rate {rates:.1e}"));
    match band_saturation() {
        Ok(s) => parts.push(format!("band saturated ({s})")),
        Err(e) => {
            ok = false;
            parts.push(format!("band FAILED {e}"));
        }
    }
    Verdict::new("7 property suites", ok, parts.join(", "))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).is_test(true).try_init();
    let criteria: [Criterion; 7] = [
        ("1", exact_references),
        ("2", domain_study),
        ("3", eps_convergence),
        ("4", cod_convergence),
        ("5", sneddon_3d),
        ("6", solver_trend),
        ("7", property_suites),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let t = Instant::now();
        let v = run();
        println!("{v} [{:.1} s]", t.elapsed().as_secs_f64());
        failed += usize::from(!v.passed);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
