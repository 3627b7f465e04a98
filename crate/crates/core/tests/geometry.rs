use std::f64::consts::PI;

use approx::assert_relative_eq;
use hypoctrl::geometry::*;
use hypoctrl::lebeau_robbiano::TimeSet;
use hypoctrl::tvsys::Mat;
use nalgebra::DVector;
use proptest::prelude::*;

fn unit_box(d: usize, half: f64) -> BoxWindow {
    BoxWindow::new(vec![-half; d], vec![half; d]).unwrap()
}

fn measure(r: &Region, bx: &BoxWindow, m: MeasureMethod) -> f64 {
    measure_in_box(r, bx, m).unwrap().value
}

#[test]
fn ball_area_by_grid() {
    let r = Region::ball(vec![0.2, -0.1], 1.0);
    let v = measure(&r, &unit_box(2, 1.5), MeasureMethod::GridCells { cells: 1000 });
    assert_relative_eq!(v, PI, max_relative = 1e-3);
}

#[test]
fn monte_carlo_is_seeded() {
    let r = Region::ball(vec![0.0; 3], 1.0);
    let bx = unit_box(3, 1.0);
    let m = MeasureMethod::MonteCarlo { n: 20_000, seed: 7 };
    let a = measure_in_box(&r, &bx, m).unwrap();
    let b = measure_in_box(&r, &bx, m).unwrap();
    assert_eq!(a, b);
    assert!((a.value - 4.0 / 3.0 * PI).abs() < 5.0 * a.std_error);
}

#[test]
fn periodic_union_is_half_thick() {
    let r = Region::interval_union(IntervalUnion1D::periodic(PI / 2.0, 0.0, PI / 4.0));
    let probes: Vec<Vec<f64>> = (0..50).map(|i| vec![-100.0 + 4.1 * i as f64]).collect();
    let rep = thickness_probe(&r, &[PI / 2.0], &probes, MeasureMethod::Auto).unwrap();
    assert!(rep.is_thick(0.5 - 1e-12));
    assert!(!rep.is_thick(0.51));
}

#[test]
fn square_gaps_are_not_thick() {
    let r = Region::interval_union(IntervalUnion1D::square_gaps());
    for n in [5.0, 10.0, 20.0] {
        let x = n * n + 1.5 * n;
        let rep = thickness_probe(&r, &[1.0], &[vec![x]], MeasureMethod::Auto).unwrap();
        assert_eq!(rep.min_ratio, 0.0);
    }
}

#[test]
fn gated_support_scales_integral_thickness() {
    let region = Region::interval_union(IntervalUnion1D::periodic(1.0, 0.0, 0.5));
    let child = MovingSupport::Static { region };
    let gated = MovingSupport::Gated { child: Box::new(child.clone()), time_set: TimeSet::new(vec![(0.0, 0.25)]).unwrap() };
    let probes = vec![vec![0.3], vec![7.9]];
    let flow = MatrixFlow::Identity { dim: 1 };
    let full = integral_thickness(&child, &flow, 1.0, 2.0, &probes, 400, MeasureMethod::Auto).unwrap();
    let part = integral_thickness(&gated, &flow, 1.0, 2.0, &probes, 400, MeasureMethod::Auto).unwrap();
    assert_relative_eq!(full.min_j, 2.0, max_relative = 1e-12);
    assert_relative_eq!(part.min_j, 0.5, max_relative = 1e-12);
}

#[test]
fn linear_flow_matches_closed_form() {
    let b = Mat::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0]);
    let f = MatrixFlow::linear_exp(&b, -1.0, 1.0);
    // exp((t − 1)B) = [[1, 1 − t], [0, 1]]
    let m = f.at(0.25);
    assert_relative_eq!(m, Mat::from_row_slice(2, 2, &[1.0, 0.75, 0.0, 1.0]), epsilon = 1e-14);
}

#[test]
fn gaussian_mass_of_half_plane_and_strip() {
    let mean = DVector::from_vec(vec![0.5, -1.0]);
    let cov = Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let half = Region::HalfSpace { normal: vec![1.0, 0.0], offset: 0.5 };
    let p = gaussian_mass(&half, &mean, &cov, 400, 1).unwrap();
    assert!((p - 0.5).abs() < 1e-9, "{p}");
    let strip = Region::axis_box(vec![-1.0, -f64::INFINITY], vec![1.0, f64::INFINITY]);
    let p = gaussian_mass(&strip, &mean, &cov, 800, 1).unwrap();
    let expect = normal_interval_mass(-1.0, 1.0, 0.5, 2f64.sqrt());
    // midpoint cells of width 12σ/800 straddle the strip edges
    assert!((p - expect).abs() < 1e-2, "{p} vs {expect}");
}

#[test]
fn json_round_trip_of_moving_support() {
    let s = MovingSupport::Dilation {
        region: Region::union(vec![Region::cone(0.5), Region::ball(vec![1.0, 2.0], 0.5)]),
        scale: ScaleLaw::SqrtLinear { mu: 1.0 },
    };
    let txt = serde_json::to_string(&s).unwrap();
    let back: MovingSupport = serde_json::from_str(&txt).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), txt);
}

fn interval_sets() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, 0.01..2.0f64), 0..8)
        .prop_map(|v| v.into_iter().map(|(a, w)| (a, a + w)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complement_measure_adds_up(iv in interval_sets(), lo in -12.0..0.0f64, w in 0.5..20.0f64) {
        let r = Region::interval_union(IntervalUnion1D::new(iv).unwrap());
        let bx = BoxWindow::new(vec![lo], vec![lo + w]).unwrap();
        let a = measure(&r, &bx, MeasureMethod::Auto);
        let b = measure(&Region::complement(r), &bx, MeasureMethod::Auto);
        prop_assert!((a + b - w).abs() < 1e-9);
    }

    #[test]
    fn exact_and_grid_measures_agree(iv in interval_sets(), lo in -12.0..0.0f64) {
        let r = Region::interval_union(IntervalUnion1D::new(iv).unwrap());
        let bx = BoxWindow::new(vec![lo], vec![lo + 12.0]).unwrap();
        let exact = measure(&r, &bx, MeasureMethod::Auto);
        let grid = measure(&r, &bx, MeasureMethod::Grid { h: 1e-4 });
        prop_assert!((exact - grid).abs() < 2e-3);
    }

    #[test]
    fn union_dominates_and_intersection_is_dominated(
        c1 in prop::array::uniform2(-1.0..1.0f64), c2 in prop::array::uniform2(-1.0..1.0f64),
        r1 in 0.2..1.0f64, r2 in 0.2..1.0f64,
    ) {
        let a = Region::ball(c1.to_vec(), r1);
        let b = Region::ball(c2.to_vec(), r2);
        let bx = unit_box(2, 2.5);
        let m = MeasureMethod::GridCells { cells: 300 };
        let (ma, mb) = (measure(&a, &bx, m), measure(&b, &bx, m));
        let mu = measure(&Region::union(vec![a.clone(), b.clone()]), &bx, m);
        let mi = measure(&Region::intersect(vec![a, b]), &bx, m);
        prop_assert!(mu >= ma.max(mb) - 1e-12);
        prop_assert!(mi <= ma.min(mb) + 1e-12);
        prop_assert!((mu + mi - ma - mb).abs() < 1e-9);
    }

    #[test]
    fn affine_image_membership(x in prop::array::uniform2(-3.0..3.0f64), s in 0.5..2.0f64, sh in prop::array::uniform2(-1.0..1.0f64)) {
        let map = Affine::new(Mat::from_row_slice(2, 2, &[s, 0.3, 0.0, 1.0 / s]), sh.to_vec()).unwrap();
        let base = Region::ball(vec![0.0, 0.0], 1.0);
        let img = Region::affine_image(map.clone(), base.clone());
        let mut y = [0.0; 2];
        map.apply(&x, &mut y);
        prop_assert_eq!(img.contains(&y), base.contains(&x));
    }

    #[test]
    fn static_support_integral_is_horizon_times_measure(t in 0.1..3.0f64, x in -50.0..50.0f64) {
        let region = Region::interval_union(IntervalUnion1D::periodic(PI / 2.0, 0.0, PI / 4.0));
        let s = MovingSupport::Static { region: region.clone() };
        let j = integral_thickness(&s, &MatrixFlow::Identity { dim: 1 }, t, 1.0, &[vec![x]], 16, MeasureMethod::Auto).unwrap();
        let m = measure(&region, &BoxWindow::new(vec![x - 1.0], vec![x + 1.0]).unwrap(), MeasureMethod::Auto);
        prop_assert!((j.min_j - t * m).abs() < 1e-9);
    }

    #[test]
    fn integral_thickness_grows_with_horizon(t in 0.2..2.0f64, x in -100.0..100.0f64) {
        let s = MovingSupport::Dilation {
            region: Region::interval_union(IntervalUnion1D::square_gaps()),
            scale: ScaleLaw::SqrtLinear { mu: 1.0 },
        };
        let flow = MatrixFlow::Identity { dim: 1 };
        let a = integral_thickness(&s, &flow, t, 2.0, &[vec![x]], 200, MeasureMethod::Auto).unwrap().min_j;
        let b = integral_thickness(&s, &flow, t + 0.5, 2.0, &[vec![x]], 200, MeasureMethod::Auto).unwrap().min_j;
        // same time nodes per unit are not shared, so allow quadrature slack
        prop_assert!(b >= a - 0.05 * a.max(1e-3));
    }
}
