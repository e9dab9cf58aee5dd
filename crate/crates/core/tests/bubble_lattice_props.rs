use approx::assert_relative_eq;
use bumpforge::bubble::*;
use bumpforge::lattice::*;
use bumpforge::profile::fd_laplacian;
use bumpforge::quadrature::IntegrationPlan;
use proptest::prelude::*;

// Frozen from independent closed forms and high-order 1-D radial quadrature.
const C4_5: f64 = 4586.977617488941;
const D_5_45: f64 = 1410.537402961;
const C_5_45: f64 = 2.0500607307420196;

#[test]
fn constants_match_frozen_values() {
    let c = compute_constants(5, 4.5, -5.0, &IntegrationPlan::for_constants(5)).unwrap();
    assert_relative_eq!(c.c4, C4_5, max_relative = 1e-6);
    assert_relative_eq!(c.d_n_beta, D_5_45, max_relative = 1e-6);
    assert_relative_eq!(c.c3, 10.0 * D_5_45, max_relative = 1e-6);
    assert_relative_eq!(c.c(), C_5_45, max_relative = 1e-6);
    assert_relative_eq!(c.q(), 3.0);
}

#[test]
fn constants_reject_bad_beta() {
    assert!(compute_constants(5, 3.0, -5.0, &IntegrationPlan::for_constants(5)).is_err());
    assert!(compute_constants(5, 5.0, -5.0, &IntegrationPlan::for_constants(5)).is_err());
}

#[test]
fn unit_spacing_zeta_sum() {
    // Σ_{q≠0} |q|^{-3} over a line of integers, q ∈ [−W, W]
    let lat = build_lattice(&LatticeSpec::orthant(5, 1, 0, 400, 1, 4.5)).unwrap();
    assert_eq!(lat.lambda(), 1.0);
    let s = lat.lattice_sum(&[0.0; 5], 3.0).unwrap();
    let zeta3 = 1.2020569031595943;
    assert!((s.value - (2.0 * zeta3 - 1.0)).abs() <= s.tail_bound + 1e-12);
    assert!(s.tail_bound < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bubble_solves_the_critical_equation(
        x in prop::collection::vec(-2.0f64..2.0, 5),
        c in prop::collection::vec(-1.0f64..1.0, 5),
        scale in 0.5f64..2.0,
    ) {
        let b = Bubble::new(c, scale).unwrap();
        let lap = fd_laplacian(|y| b.value(y), &x, 1e-3);
        let rhs = -b.value(&x).powf(critical_exponent(5));
        prop_assert!(((lap - rhs) / rhs).abs() < 1e-4);
    }

    #[test]
    fn scale_transform_composes(x in prop::collection::vec(-3.0f64..3.0, 5), a in 0.3f64..3.0, b in 0.3f64..3.0) {
        let s = Bubble::standard(5).unwrap();
        let f = |y: &[f64]| s.value(y);
        let ab = scale_transform(f, a * b, 5);
        let inner = scale_transform(f, b, 5);
        let twice = scale_transform(&inner, a, 5);
        prop_assert!((ab(&x) - twice(&x)).abs() <= 1e-12 * ab(&x).abs());
    }

    #[test]
    fn nearest_cell_agrees_with_scan(
        y in prop::collection::vec(-600.0f64..1200.0, 5),
        m in 1usize..6,
    ) {
        let lat = build_lattice(&LatticeSpec::finite(5, 2, m, 3, 4.5)).unwrap();
        prop_assert_eq!(lat.nearest_cell(&y), lat.nearest_cell_scan(&y));
    }

    #[test]
    fn near_region_sum_is_within_constant_of_nearest_term(
        t in 0.0f64..1.0,
        dir in prop::collection::vec(-1.0f64..1.0, 5),
        i in 0usize..9,
    ) {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 8, 2, 4.5)).unwrap();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let r = 0.49 * lat.spacing() * t;
        let y: Vec<f64> = lat.point(i).iter().zip(&dir).map(|(p, d)| p + r * d / norm).collect();
        let s = lat.lattice_sum(&y, 3.0).unwrap();
        prop_assert_eq!(s.region, Region::Near);
        prop_assert!(s.ratio >= 1.0 && s.ratio <= 10.0);
        prop_assert!(s.value >= s.nearest_term);
    }

    #[test]
    fn regions_partition_space(y in prop::collection::vec(-5000.0f64..5000.0, 5)) {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 16, 2, 4.5)).unwrap();
        let c = lat.region_classify(&y);
        let d = c.distance;
        let expected = if d < lat.spacing() {
            Region::Near
        } else if d < lat.outer_radius() {
            Region::Mid
        } else {
            Region::Far
        };
        prop_assert_eq!(c.region, expected);
    }

    #[test]
    fn spacing_law(l in 2u64..40) {
        let lat = build_lattice(&LatticeSpec::finite(5, 1, 1, l, 4.5)).unwrap();
        let lambda = (l as f64).powf(3.0 / 1.5);
        prop_assert!((lat.lambda() / lambda - 1.0).abs() < 1e-12);
        prop_assert!((lat.spacing() / (lambda * l as f64) - 1.0).abs() < 1e-12);
    }
}
