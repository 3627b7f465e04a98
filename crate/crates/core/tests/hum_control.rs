use std::f64::consts::PI;

use hypoctrl::geometry::{IntervalUnion1D, MovingSupport, Region};
use hypoctrl::hum_control::*;
use hypoctrl::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn strips(duty: f64) -> MovingSupport {
    MovingSupport::Static { region: Region::interval_union(IntervalUnion1D::periodic(PI / 2.0, 0.0, duty * PI / 2.0)) }
}

fn problem(duty: f64, horizon: f64) -> ControlProblem {
    ControlProblem::new(ControlModel::Heat1D { length: 2.0 * PI, modes: 64 }, strips(duty), horizon, 40).unwrap()
}

fn bump(p: &ControlProblem) -> Vec<Complex64> {
    p.sample(|x| (-(x[0] - 0.5).powi(2) / 0.5).exp())
}

fn state(p: &ControlProblem, seed: u64) -> Vec<Complex64> {
    (0..p.state_len())
        .map(|j| {
            let k = (j as u64).wrapping_mul(6364136223846793005).wrapping_add(seed.wrapping_mul(1442695040888963407));
            Complex64::new(((k >> 33) % 1000) as f64 / 500.0 - 1.0, ((k >> 13) % 1000) as f64 / 500.0 - 1.0)
        })
        .collect()
}

#[test]
fn hum_control_steers_to_zero() {
    let p = problem(0.5, 0.3);
    let f0 = bump(&p);
    let r = solve_null_control(&p, &f0, &SolveOptions { tol: 1e-6, ..Default::default() }).unwrap();
    assert!(r.success, "residual {}", r.residual);
    assert!(r.residual < 1e-6);
    assert!(!r.approximate);
    assert!((r.cost - r.dual_cost).abs() <= 1e-6 * r.cost, "{} vs {}", r.cost, r.dual_cost);
    let u: Vec<Vec<Complex64>> = r.control.iter().map(|v| v.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
    let f_t = p.simulate(&f0, &u);
    assert!(p.norm(&f_t) / p.norm(&f0) < 1e-5);
}

#[test]
fn slices_tile_the_horizon() {
    let p = problem(0.5, 0.3);
    let w = p.widths();
    assert_eq!(w.len(), 40);
    assert!((w.iter().sum::<f64>() - 0.3).abs() < 1e-14);
    assert!(w.windows(2).all(|x| x[1] <= x[0] * (1.0 + 1e-12)));
}

#[test]
fn gramian_rejects_bad_input() {
    let p = problem(0.5, 0.3);
    assert!(matches!(p.gramian_apply(&[Complex64::new(1.0, 0.0)]), Err(Error::DimensionMismatch(_))));
    let mut g = bump(&p);
    g[3] = Complex64::new(f64::NAN, 0.0);
    assert!(matches!(p.gramian_apply(&g), Err(Error::NonFinite(_))));
    let zero = vec![Complex64::new(0.0, 0.0); p.state_len()];
    assert!(solve_null_control(&p, &zero, &SolveOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gramian_is_self_adjoint_and_nonnegative(s1 in any::<u64>(), s2 in any::<u64>()) {
        let p = problem(0.5, 0.2);
        let a = state(&p, s1);
        let b = state(&p, s2);
        let ab = p.inner(&b, &p.gramian_apply(&a).unwrap());
        let ba = p.inner(&a, &p.gramian_apply(&b).unwrap());
        prop_assert!((ab - ba.conj()).norm() < 1e-12 * p.norm(&a) * p.norm(&b));
        let aa = p.inner(&a, &p.gramian_apply(&a).unwrap());
        prop_assert!(aa.re >= -1e-14 * p.norm(&a).powi(2));
        prop_assert!(aa.im.abs() < 1e-12 * p.norm(&a).powi(2));
    }

    #[test]
    fn larger_support_observes_more(seed in any::<u64>(), d in 0.1..0.5f64) {
        let small = problem(d, 0.2);
        let big = problem(d + 0.3, 0.2);
        let g = state(&small, seed);
        let qs = small.inner(&g, &small.gramian_apply(&g).unwrap()).re;
        let qb = big.inner(&g, &big.gramian_apply(&g).unwrap()).re;
        prop_assert!(qb >= qs * (1.0 - 1e-10));
    }
}
