use proptest::prelude::*;

use sublinpot::conditions::{prop36_check, sigma_energy, two_weight_check};
use sublinpot::energy::{fractional_seminorm_sq, gagliardo_seminorm_sq, gamma_curve};
use sublinpot::lorentz::{lorentz_norm, lp_norm, rearrange};
use sublinpot::potentials::{potential_grid_fft, GridOperator};
use sublinpot::solver::iterate_once;
use sublinpot::{BoxGrid, GridFunction, KernelSpec, LorentzPair, Measure, ProblemSpec, Term};

fn grid8() -> BoxGrid {
    BoxGrid::centered(&[0.0, 0.0], 0.25, vec![8, 8]).unwrap()
}

fn density(values: Vec<f64>) -> Measure {
    Measure::from_density(GridFunction::new(grid8(), values).unwrap()).unwrap()
}

/// Nonnegative values on the 8x8 grid, zero on a random subset.
fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..4.0f64], 64)
        .prop_filter("nonzero", |v| v.iter().any(|x| *x > 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn total_mass_is_additive(a in prop::collection::vec(0.0..5.0f64, 1..6), b in prop::collection::vec(0.0..5.0f64, 1..6)) {
        let atoms = |ms: &[f64], shift: f64| -> Vec<(Vec<f64>, f64)> {
            ms.iter().enumerate().map(|(i, m)| (vec![i as f64 + shift, 0.0], *m)).collect()
        };
        let ma = Measure::from_atoms(2, atoms(&a, 0.0)).unwrap();
        let mb = Measure::from_atoms(2, atoms(&b, 100.0)).unwrap();
        let sum = ma.sum(&mb).unwrap();
        let expected = ma.total_mass() + mb.total_mass();
        prop_assert!((sum.total_mass() - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn restriction_is_idempotent(v in values(), cx in -1.0..1.0f64, r in 0.1..1.5f64) {
        let m = density(v);
        let once = m.restrict_to_ball(&[cx, 0.2], r);
        let twice = once.restrict_to_ball(&[cx, 0.2], r);
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.total_mass() <= m.total_mass());
    }

    #[test]
    fn potential_is_linear_and_monotone(a in values(), b in values()) {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let fa = potential_grid_fft(&k, &density(a.clone())).unwrap().values;
        let fb = potential_grid_fft(&k, &density(b.clone())).unwrap().values;
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let fs = potential_grid_fft(&k, &density(sum)).unwrap().values;
        for ((x, y), s) in fa.iter().zip(&fb).zip(&fs) {
            prop_assert!((x + y - s).abs() <= 1e-12 * s.abs().max(1e-300));
            prop_assert!(*s >= *x * (1.0 - 1e-12));
        }
    }

    #[test]
    fn lorentz_diagonal_is_lebesgue(v in values(), p in 0.5..6.0f64) {
        let f = GridFunction::new(grid8(), v).unwrap();
        let a = lorentz_norm(&f, LorentzPair::lebesgue(p).unwrap()).unwrap();
        let b = lp_norm(&f, p);
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn rearrangement_is_equimeasurable(v in values(), lambda in 0.0..4.0f64) {
        let f = GridFunction::new(grid8(), v.clone()).unwrap();
        let step = rearrange(&f).unwrap();
        let brute = v.iter().filter(|x| x.abs() > lambda).count() as f64 * f.grid().cell_volume();
        prop_assert!((step.distribution(lambda) - brute).abs() <= 1e-12);
    }

    #[test]
    fn sigma_energy_scaling_law(v in values(), lambda in 0.2..5.0f64, q in 0.1..0.9f64) {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let gamma = 1.0;
        let m = density(v);
        let base = sigma_energy(&m, q, gamma, &k).unwrap();
        let scaled = sigma_energy(&m.scaled(lambda).unwrap(), q, gamma, &k).unwrap();
        let expected = lambda.powf(1.0 + (gamma + q) / (1.0 - q)) * base;
        prop_assert!((scaled - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn two_weight_ratio_is_scale_invariant(a in values(), b in values(), l in 0.2..5.0f64, m in 0.2..5.0f64) {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let (s, w) = (density(a), density(b));
        let r0 = two_weight_check(&s, &w, 0.5, 1.0, &k).unwrap().ratio;
        let r1 = two_weight_check(&s.scaled(l).unwrap(), &w.scaled(m).unwrap(), 0.5, 1.0, &k).unwrap().ratio;
        prop_assert!((r0 - r1).abs() <= 1e-9 * r0.max(1e-300));
    }

    #[test]
    fn holder_step_holds(v in values(), beta in 0.2..3.0f64) {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let r = prop36_check(&GridFunction::new(grid8(), v).unwrap(), beta, &k).unwrap();
        prop_assert!(r.holds, "{:?}", r);
    }

    #[test]
    fn iteration_is_order_preserving(v in values(), bump in prop::collection::vec(0.0..1.0f64, 64)) {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let p = ProblemSpec::new(
            k,
            vec![Term { sigma: density(v.clone()), q: 0.5 }],
            density(v),
            1.0,
            grid8(),
        ).unwrap();
        let u = GridFunction::constant(grid8(), 0.3);
        let w = GridFunction::new(grid8(), bump.iter().map(|b| 0.3 + b).collect()).unwrap();
        let tu = iterate_once(&p, &u).unwrap();
        let tw = iterate_once(&p, &w).unwrap();
        for (a, b) in tu.values().iter().zip(tw.values()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn gagliardo_symmetry_and_homogeneity(v in values(), lambda in 0.1..10.0f64) {
        let u = GridFunction::new(grid8(), v).unwrap();
        let base = gagliardo_seminorm_sq(&u, 1.0).unwrap();
        prop_assert_eq!(gagliardo_seminorm_sq(&u.scaled(-1.0), 1.0).unwrap(), base);
        let scaled = gagliardo_seminorm_sq(&u.scaled(lambda), 1.0).unwrap();
        prop_assert!((scaled - lambda * lambda * base).abs() <= 1e-12 * scaled);
    }

    #[test]
    fn fourier_seminorm_is_translation_invariant(v in prop::collection::vec(0.0..1.0f64, 16), dx in 0usize..4, dy in 0usize..4) {
        let g = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![8, 8]).unwrap();
        let place = |ox: usize, oy: usize| {
            let mut vals = vec![0.0; 64];
            for i in 0..4 {
                for j in 0..4 {
                    vals[g.ravel(&[i + ox, j + oy])] = v[4 * i + j];
                }
            }
            GridFunction::new(g.clone(), vals).unwrap()
        };
        let a = fractional_seminorm_sq(&place(0, 0), 1.0).unwrap();
        let b = fractional_seminorm_sq(&place(dx, dy), 1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn hidden_convexity_pointwise(ux in 0.0..3.0f64, uy in 0.0..3.0f64, vx in 0.0..3.0f64, vy in 0.0..3.0f64, t in 0.0..1.0f64) {
        let g = BoxGrid::new(vec![0.0, 0.0], 1.0, vec![2, 1]).unwrap();
        let u = GridFunction::new(g.clone(), vec![ux, uy]).unwrap();
        let v = GridFunction::new(g, vec![vx, vy]).unwrap();
        let c = gamma_curve(&u, &v, t).unwrap();
        let lhs = (c.values()[0] - c.values()[1]).powi(2);
        let rhs = (1.0 - t) * (vx - vy).powi(2) + t * (ux - uy).powi(2);
        prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
    }
}

#[test]
fn grid_operator_matches_fft_convolver() {
    let k = KernelSpec::riesz(2, 1.5).unwrap();
    let vals: Vec<f64> = (0..64).map(|i| ((i * 7) % 5) as f64).collect();
    let fft = GridOperator::new(&k, &grid8()).unwrap().apply(&vals);
    let direct = GridOperator::direct(&k, &grid8()).apply(&vals);
    for (a, b) in fft.iter().zip(&direct) {
        assert!((a - b).abs() <= 1e-10 * b);
    }
}
