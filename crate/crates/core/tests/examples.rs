//! Worked instances with known or independently computed answers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sublinpot::conditions::{
    lorentz_audit_exponent, lorentz_weighted_audit, omega_energy, sigma_energy, solution_exponents,
    weighted_norm_audit,
};
use sublinpot::energy::energy_identity_check;
use sublinpot::estimates::{bilateral_bracket, key_lorentz_check, probes_outside_collar};
use sublinpot::fixtures;
use sublinpot::kernels::check_wmp_empirical;
use sublinpot::oracle::{radial_reduction_with, simplex_enumerate_kappa, RadialKind};
use sublinpot::potentials::{
    default_candidates, havin_mazya_extended, intrinsic_potential, kappa_ball, potential_at,
    GridOperator, IntrinsicOptions,
};
use sublinpot::solver::{
    downward_solve, norm_bound_check, residual, solve_minimal, Discretization,
};
use sublinpot::{BoxGrid, GridFunction, KernelSpec, Measure, ProblemSpec, Term};

fn five_cells() -> Measure {
    let g = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![4, 4]).unwrap();
    let mut v = vec![0.0; 16];
    for (i, w) in [(5, 1.0), (6, 0.5), (9, 2.0), (10, 1.5), (11, 0.7)] {
        v[i] = w;
    }
    Measure::from_density(GridFunction::new(g, v).unwrap()).unwrap()
}

#[test]
fn kappa_matches_simplex_enumeration() {
    let k = KernelSpec::riesz(2, 1.0).unwrap();
    let sigma = five_cells();
    let cands = vec![vec![-0.9, 0.0], vec![0.9, 0.4], vec![0.0, -0.9]];
    let fw = kappa_ball(&k, &sigma, 0.5, &cands, 500).unwrap();
    let brute = simplex_enumerate_kappa(&sigma, 0.5, 1.0, k.constant(), &cands, 1e-3).unwrap();
    assert!(
        (fw.value - brute).abs() <= 1e-3 * brute,
        "{} vs {}",
        fw.value,
        brute
    );
    for w in fw.history.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-14));
    }
    let more = [cands.clone(), vec![vec![3.0, 3.0]]].concat();
    assert!(kappa_ball(&k, &sigma, 0.5, &more, 500).unwrap().value >= fw.value * (1.0 - 1e-12));
}

#[test]
fn intrinsic_potential_of_one_cell_is_its_tail() {
    let g = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![4, 4]).unwrap();
    let mut v = vec![0.0; 16];
    v[5] = 2.0;
    let sigma = Measure::from_density(GridFunction::new(g.clone(), v).unwrap()).unwrap();
    let k = KernelSpec::riesz(2, 1.0).unwrap();
    let q = 0.5;
    let x = [3.0, 1.0];
    let res = intrinsic_potential(&k, &sigma, q, &x, &IntrinsicOptions::default()).unwrap();
    let kappa = *res.kappas.iter().rev().find(|v| **v > 0.0).unwrap();
    let d = ((x[0] - g.point(5)[0]).powi(2) + (x[1] - g.point(5)[1]).powi(2)).sqrt();
    // kappa vanishes below d and is constant above it
    let expected = kappa.powf(q / (1.0 - q)) * d.powf(-1.0);
    assert!(
        (res.value - expected).abs() <= 0.01 * expected,
        "{} vs {}",
        res.value,
        expected
    );

    let zero = Measure::from_density(GridFunction::zeros(g)).unwrap();
    assert_eq!(
        intrinsic_potential(&k, &zero, q, &x, &IntrinsicOptions::default())
            .unwrap()
            .value,
        0.0
    );
}

#[test]
fn intrinsic_potential_settles_with_more_radii() {
    let p = fixtures::one_term(16).unwrap();
    let sigma = &p.terms()[0].sigma;
    let at = |count| {
        let opts = IntrinsicOptions {
            r_count: count,
            budget: 30,
            shell: 1,
            ..Default::default()
        };
        intrinsic_potential(p.kernel(), sigma, 0.5, &[0.25, 0.25], &opts)
            .unwrap()
            .value
    };
    let (a, b, c) = (at(16), at(32), at(64));
    assert!((c - b).abs() <= (b - a).abs() + 1e-12 * c, "{a} {b} {c}");
}

#[test]
fn radial_oracle_is_stable_in_its_tolerance() {
    let x = [2.0, 0.0, 0.0];
    let a = radial_reduction_with(1.5, 3, RadialKind::Sphere, 1.0, 1.0, &x, 1e-8).unwrap();
    let b = radial_reduction_with(1.5, 3, RadialKind::Sphere, 1.0, 1.0, &x, 1e-12).unwrap();
    assert!((a - b).abs() <= 1e-8 * b);
    let sphere = Measure::uniform_sphere(&[0.0; 3], 1.0, 1.0, 24).unwrap();
    let k = KernelSpec::riesz_unit(3, 1.5).unwrap();
    assert!((potential_at(&k, &sphere, &x) - b).abs() <= 1e-8 * b);
}

#[test]
fn wmp_counterexample_matrix() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
    let entries = vec![
        vec![1.0, 0.2, 3.0],
        vec![0.2, 1.0, 0.2],
        vec![3.0, 0.2, 1.0],
    ];
    let k = KernelSpec::matrix(pts.clone(), entries, 1.0).unwrap();
    let sigma = Measure::from_atoms(2, vec![(pts[0].clone(), 1.0)]).unwrap();
    let v = check_wmp_empirical(&k, &sigma, &pts).unwrap();
    assert!(!v.holds);
    assert_eq!(v.witness, Some(pts[2].clone()));

    let k = KernelSpec::riesz(3, 2.0).unwrap();
    let sigma = Measure::from_atoms(
        3,
        vec![(vec![0.5, 0.0, 0.0], 1.0), (vec![-0.5, 0.0, 0.0], 2.0)],
    )
    .unwrap();
    let probes: Vec<Vec<f64>> = (0..9 * 9 * 9)
        .map(|i| {
            vec![
                (i % 9) as f64 * 0.25 - 1.0,
                (i / 9 % 9) as f64 * 0.25 - 1.0,
                (i / 81) as f64 * 0.25 - 1.0 + 0.1,
            ]
        })
        .collect();
    let v = check_wmp_empirical(&k, &sigma, &probes).unwrap();
    assert!(v.holds && v.h == 1.0);
}

#[test]
fn havin_mazya_single_cell_by_direct_nesting() {
    let g = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![6, 6]).unwrap();
    let mut v = vec![0.0; 36];
    v[14] = 1.0;
    let f = GridFunction::new(g, v).unwrap();
    let (alpha, p, ext) = (0.5, 3.0, 2);
    let fast = havin_mazya_extended(alpha, p, &f, ext).unwrap();
    let outer = fast.grid().clone();
    let k = KernelSpec::riesz(2, alpha).unwrap();
    let op = GridOperator::direct(&k, &outer);
    let inner = op.apply(f.embed_into(&outer).unwrap().values());
    let powered: Vec<f64> = inner.iter().map(|x| x.powf(1.0 / (p - 1.0))).collect();
    let slow = op.apply(&powered);
    for (a, b) in fast.values().iter().zip(&slow) {
        assert!((a - b).abs() <= 1e-10 * b);
    }
}

#[test]
fn audits_are_stable_under_trial_doubling() {
    let g = BoxGrid::centered(&[0.0, 0.0], 1.0 / 8.0, vec![32, 32]).unwrap();
    let sigma = fixtures::bump(&g, &[0.0, 0.0], 1.2, 1.0).unwrap();
    let k = KernelSpec::riesz(2, 1.0).unwrap();
    let a = weighted_norm_audit(&sigma, 0.5, 1.0, &k, 100, 7)
        .unwrap()
        .max_ratio;
    let b = weighted_norm_audit(&sigma, 0.5, 1.0, &k, 200, 7)
        .unwrap()
        .max_ratio;
    assert!(b >= a && b <= 1.05 * a);

    let k3 = KernelSpec::riesz(3, 2.0).unwrap();
    let g3 = BoxGrid::centered(&[0.0; 3], 0.25, vec![8, 8, 8]).unwrap();
    let s3 = fixtures::bump(&g3, &[0.0; 3], 0.8, 1.0).unwrap();
    let pair = solution_exponents(1.0, 2.0, 3).unwrap();
    assert_eq!(lorentz_audit_exponent(pair.r, 0.5, 2.0, 3), 3.0);
    let a = lorentz_weighted_audit(&s3, 0.5, pair, &k3, 20, 7).unwrap();
    let b = lorentz_weighted_audit(&s3, 0.5, pair, &k3, 40, 7).unwrap();
    assert_eq!(a.s, 3.0);
    assert!(b.max_ratio >= a.max_ratio && b.max_ratio <= 1.05 * a.max_ratio);

    let key_max = |trials: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g16 = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![16, 16]).unwrap();
        (0..trials)
            .map(|_| {
                let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let m = fixtures::bump(&g16, &c, rng.gen_range(0.3..1.0), 1.0).unwrap();
                key_lorentz_check(&m, 1.0, &k).unwrap().ratio
            })
            .fold(0.0, f64::max)
    };
    let (a, b) = (key_max(20), key_max(40));
    assert!(b >= a && b <= 1.05 * a);
}

#[test]
fn sigma_energy_converges_under_refinement() {
    let k = KernelSpec::riesz(2, 1.0).unwrap();
    let vals: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&c| {
            let p = fixtures::one_term(c).unwrap();
            sigma_energy(&p.terms()[0].sigma, 0.5, 1.0, &k).unwrap()
        })
        .collect();
    assert!((vals[2] - vals[1]).abs() < (vals[1] - vals[0]).abs());
}

#[test]
fn omega_energy_of_two_far_cells() {
    let g = BoxGrid::centered(&[0.0, 0.0], 0.5, vec![8, 8]).unwrap();
    let mut v = vec![0.0; 64];
    v[0] = 1.0;
    v[63] = 3.0;
    let omega = Measure::from_density(GridFunction::new(g.clone(), v).unwrap()).unwrap();
    let k = KernelSpec::riesz(2, 1.0).unwrap();
    let vol = g.cell_volume();
    let (a, b) = (g.point(0), g.point(63));
    let cross = k.cell_eval(&a, &b, vol) * vol * vol * 3.0;
    let self_a = k.cell_eval(&a, &a, vol) * vol * vol;
    let self_b = k.cell_eval(&b, &b, vol) * vol * vol * 9.0;
    let expected = self_a + self_b + 2.0 * cross;
    let got = omega_energy(&omega, 1.0, &k).unwrap();
    assert!((got - expected).abs() <= 1e-12 * expected);
}

#[test]
fn scalar_residual_band() {
    let p = fixtures::scalar().unwrap();
    let g = p.grid().clone();
    for delta in [1e-3, 1e-5] {
        let u = GridFunction::constant(g.clone(), 4.0 + delta);
        let r = residual(&p, &u).unwrap();
        // slope of the sublinear part at the fixed point is q u^(q-1) = 1/4
        assert!(
            r >= delta * (1.0 - 0.25) * (1.0 - 1e-3) && r <= delta,
            "{r}"
        );
    }
}

#[test]
fn solution_obeys_norm_bound_and_is_a_fixed_start() {
    let p = fixtures::one_term(32).unwrap();
    let (u, rep) = solve_minimal(&p, 1e-10, 200).unwrap();
    assert!(rep.converged);
    let nb = norm_bound_check(&Discretization::new(&p).unwrap(), &u).unwrap();
    assert!(nb.holds, "{nb:?}");
    let (w, again) = downward_solve(&p, &u, 1e-9, 200).unwrap();
    assert_eq!(again.iterate_count, 1);
    assert!(w.sup_distance(&u) <= 1e-9);
}

#[test]
fn larger_data_gives_larger_solution() {
    let p = fixtures::one_term(32).unwrap();
    let (u, _) = solve_minimal(&p, 1e-10, 200).unwrap();
    let bigger = ProblemSpec::new(
        p.kernel().clone(),
        vec![Term {
            sigma: p.terms()[0].sigma.scaled(1.5).unwrap(),
            q: 0.5,
        }],
        p.omega().clone(),
        1.0,
        p.grid().clone(),
    )
    .unwrap();
    let (v, _) = solve_minimal(&bigger, 1e-10, 200).unwrap();
    for (a, b) in u.values().iter().zip(v.values()) {
        assert!(a <= b);
    }
}

#[test]
fn sigma_only_bracket_respects_the_lower_bound() {
    let base = fixtures::one_term(16).unwrap();
    let sigma = base.terms()[0].sigma.clone();
    let zero = Measure::zero(2);
    let p = ProblemSpec::new(
        base.kernel().clone(),
        vec![Term {
            sigma: sigma.clone(),
            q: 0.5,
        }],
        zero.clone(),
        1.0,
        base.grid().clone(),
    )
    .unwrap();
    let (u, _) = solve_minimal(&p, 1e-10, 200).unwrap();
    let probes = probes_outside_collar(p.grid(), &sigma, 1);
    let opts = IntrinsicOptions {
        r_count: 16,
        budget: 20,
        shell: 1,
        ..Default::default()
    };
    let br = bilateral_bracket(
        &u,
        &sigma,
        &zero,
        0.5,
        p.kernel(),
        &probes[..probes.len().min(12)],
        &opts,
    )
    .unwrap();
    assert!(!br.degenerate);
    assert!(br.c_low >= 0.25, "{br:?}");
    assert!(br.c_up >= br.c_low);

    let omega_only = bilateral_bracket(
        &u,
        &zero,
        base.omega(),
        0.5,
        p.kernel(),
        &probes[..1],
        &opts,
    )
    .unwrap();
    assert!(omega_only.degenerate && omega_only.c_low == 0.0 && omega_only.c_up == 0.0);
}

#[test]
fn energy_identity_without_sublinear_terms() {
    let base = fixtures::one_term(32).unwrap();
    let p = ProblemSpec::new(
        base.kernel().clone(),
        vec![Term {
            sigma: Measure::zero(2),
            q: 0.5,
        }],
        base.omega().clone(),
        1.0,
        base.grid().clone(),
    )
    .unwrap();
    let (u, _) = solve_minimal(&p, 1e-12, 10).unwrap();
    let rep = energy_identity_check(&p, &u, 8).unwrap();
    assert!(rep.relative_gap <= 0.02, "{rep:?}");
}

#[test]
fn candidates_surround_the_support() {
    let sigma = five_cells();
    let c = default_candidates(&sigma, 1);
    assert!(!c.is_empty());
    let support: Vec<Vec<f64>> = sigma
        .point_masses()
        .into_iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(p, _)| p)
        .collect();
    for p in &c {
        assert!(!support.contains(p));
    }
}
