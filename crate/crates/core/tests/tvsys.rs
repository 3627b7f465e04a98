use approx::assert_relative_eq;
use hypoctrl::tvsys::*;
use hypoctrl::Error;
use proptest::prelude::*;

fn mat2(v: [f64; 4]) -> Mat {
    Mat::from_row_slice(2, 2, &v)
}

fn entry() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

fn poly2(max_deg: usize) -> impl Strategy<Value = MatrixPoly> {
    prop::collection::vec(prop::array::uniform4(entry()), 1..=max_deg + 1)
        .prop_map(|cs| MatrixPoly::new(2, cs.into_iter().map(mat2).collect()).unwrap())
}

#[test]
fn kolmogorov_kalman_sequence_entries() {
    let a = MatrixPoly::constant(mat2([0.0, 0.0, 0.0, 2f64.sqrt()]));
    let b = MatrixPoly::constant(mat2([0.0, -1.0, 0.0, 0.0]));
    let seq = kalman_sequence(&a, &b, default_k_max(2)).unwrap();
    assert_eq!(seq.len(), default_k_max(2) + 1);
    assert_eq!(seq[1].eval(0.0), mat2([0.0, -(2f64.sqrt()), 0.0, 0.0]));
    assert!(seq[2].is_zero());
    let r = kalman_rank_at(&seq, 3.0, DEFAULT_RANK_TOL).unwrap();
    assert_eq!((r.rank, r.holds), (2, true));
}

#[test]
fn rank_tolerance_must_be_positive() {
    let seq = kalman_sequence(&MatrixPoly::zero(2), &MatrixPoly::zero(2), 1).unwrap();
    assert!(matches!(kalman_rank_at(&seq, 0.0, 0.0), Err(Error::InvalidArgument { .. })));
    assert!(matches!(resolvent(|_| Mat::zeros(2, 2), 0.0, 1.0, 0), Err(Error::InvalidArgument { .. })));
}

#[test]
fn flow_resolvent_time_dependent_scalar() {
    // x' = t x  =>  R(t1,t0) = exp((t1² − t0²)/2)
    let p = MatrixPoly::new(1, vec![Mat::zeros(1, 1), Mat::identity(1, 1)]).unwrap();
    let f = FlowResolvent::from_poly(&p, 0.0, 2.0, 4096).unwrap();
    assert_relative_eq!(f.between(1.5, 0.5)[(0, 0)], (1.0f64).exp(), max_relative = 1e-10);
    assert_relative_eq!(f.phi_at(2.0)[(0, 0)], (2.0f64).exp(), max_relative = 1e-10);
}

#[test]
fn expm_matches_rotation() {
    let r = expm(&mat2([0.0, 0.9, -0.9, 0.0]));
    let (s, c) = 0.9f64.sin_cos();
    assert_relative_eq!(r, mat2([c, s, -s, c]), epsilon = 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kalman_recursion_holds(a in poly2(2), b in poly2(2), t in -1.5..1.5f64) {
        let seq = kalman_sequence(&a, &b, 3).unwrap();
        for k in 0..3 {
            let expect = seq[k].derivative().eval(t) + b.eval(t) * seq[k].eval(t);
            prop_assert!((seq[k + 1].eval(t) - expect).abs().max() < 1e-9);
        }
    }

    #[test]
    fn product_and_sum_evaluate_pointwise(p in poly2(3), q in poly2(3), t in -2.0..2.0f64) {
        let prod = p.mul(&q).unwrap().eval(t);
        prop_assert!((prod - p.eval(t) * q.eval(t)).abs().max() < 1e-9);
        let sum = p.add(&q).unwrap().eval(t);
        prop_assert!((sum - p.eval(t) - q.eval(t)).abs().max() < 1e-12);
    }

    #[test]
    fn resolvent_cocycle(m in poly2(1), t0 in 0.0..0.5f64, t1 in 0.5..1.0f64, t2 in 1.0..1.5f64) {
        let f = |t: f64| m.eval(t);
        let full = resolvent(f, t0, t2, 3000).unwrap();
        let split = resolvent(f, t1, t2, 3000).unwrap() * resolvent(f, t0, t1, 3000).unwrap();
        prop_assert!((&full - &split).abs().max() < 1e-8 * full.abs().max().max(1.0));
    }

    #[test]
    fn liouville_formula(m in poly2(2)) {
        let c = flow_determinant_check(|t| m.eval(t), 0.0, 1.0, 2048).unwrap();
        prop_assert!(c.residual < 1e-8, "{c:?}");
    }

    #[test]
    fn rank_is_invariant_under_scaling_of_a(b in poly2(0), s in 0.1..10.0f64, t in 0.0..2.0f64) {
        let a = MatrixPoly::constant(mat2([0.0, 0.0, 0.0, 1.0]));
        let r1 = kalman_rank_at(&kalman_sequence(&a, &b, 2).unwrap(), t, 1e-10).unwrap().rank;
        let r2 = kalman_rank_at(&kalman_sequence(&a.scale(s), &b, 2).unwrap(), t, 1e-10).unwrap().rank;
        prop_assert_eq!(r1, r2);
    }
}
