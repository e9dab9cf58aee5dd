use approx::assert_relative_eq;
use bumpforge::ansatz_norms::{Ansatz, AnsatzBounds, SamplingPlan};
use bumpforge::bubble::compute_constants;
use bumpforge::diagnostics::*;
use bumpforge::lattice::{build_lattice, LatticeSpec, Region};
use bumpforge::profile::{ExactExample, ProfileK};
use bumpforge::quadrature::{gauss_legendre, IntegrationPlan};
use bumpforge::Error;
use proptest::prelude::*;

fn geomspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Spherical mean over S⁴ of (1+|z|²)^{−3/4}, z the last four coordinates,
/// reduced to ∫_{−1}^{1}(1+r²(1−t²))^{−3/4}(1−t²)dt / (4/3).
fn exact_example_average(r: f64) -> f64 {
    let (x, w) = gauss_legendre(40);
    let panels = 64;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = -1.0 + 2.0 * p as f64 / panels as f64;
        let b = a + 2.0 / panels as f64;
        for (xi, wi) in x.iter().zip(&w) {
            let t: f64 = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            let s = 1.0 - t * t;
            acc += 0.5 * (b - a) * wi * (1.0 + r * r * s).powf(-0.75) * s;
        }
    }
    acc * 0.75
}

#[test]
fn spherical_average_of_exact_example() {
    let ex = ExactExample::new(5, 1).unwrap();
    for r in [2.0, 10.0] {
        let v = spherical_average(|x| ex.u(x), &[0.0; 5], r, 24).unwrap();
        assert_relative_eq!(v, exact_example_average(r), max_relative = 1e-4);
    }
    for r in [10.0, 100.0, 1000.0, 10000.0] {
        let scaled = exact_example_average(r) * (1.0 + r).powf(1.5);
        assert!(scaled > 0.5 && scaled < 3.0, "r = {r}: {scaled}");
    }
    assert_eq!(spherical_average(|_| 1.0, &[0.0; 5], 7.0, 5).unwrap(), 1.0);
    assert!(spherical_average(|_| 1.0, &[0.0; 5], 0.0, 5).is_err());
}

#[test]
fn exact_example_decays_at_the_upper_threshold() {
    let ex = ExactExample::new(5, 1).unwrap();
    let mode = DecayMode::Directional {
        base: vec![0.3, 0.0, 0.0, 0.0, 0.0],
        direction: vec![0.0, 1.0, 1.0, 0.0, 0.0],
    };
    let d = decay_exponent_fit(|x| ex.u(x), 5, 1, &geomspace(10.0, 1e4, 9), &mode).unwrap();
    assert!((d.exponent - 1.5).abs() < 0.1, "{}", d.exponent);
    assert_eq!(d.verdict, DecayVerdict::BetweenThresholds);
    assert_eq!(d.regime, Regime::Existence);
}

#[test]
fn ansatz_decays_transversally_at_least_at_the_claim() {
    let lat = build_lattice(&LatticeSpec::finite(5, 1, 2, 2, 4.5)).unwrap();
    let ansatz = Ansatz::centered(lat.clone(), &[1.0, 1.2, 1.0], AnsatzBounds::default()).unwrap();
    let mode = DecayMode::Directional {
        base: lat.point(1).to_vec(),
        direction: vec![0.0, 0.0, 1.0, 0.0, 0.0],
    };
    let d = decay_exponent_fit(|x| ansatz.w_plain(x), 5, 1, &geomspace(1e3, 1e6, 9), &mode).unwrap();
    assert!(d.exponent >= 2.0 - EXPONENT_TOLERANCE);
    assert_eq!(d.verdict, DecayVerdict::ReachesClaim);
}

#[test]
fn slow_decay_violates_upper_bound() {
    let mode = DecayMode::Spherical {
        center: vec![0.0; 5],
        order: 3,
    };
    let d = decay_exponent_fit(
        |x| (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()).recip(),
        5,
        2,
        &geomspace(10.0, 1e4, 7),
        &mode,
    )
    .unwrap();
    assert_eq!(d.verdict, DecayVerdict::ViolatesUpperBound);
    assert_eq!(d.regime, Regime::Nonexistence);
}

#[test]
fn green_decay_saturates_at_n_minus_two() {
    let rep = check_green_decay(&GreenDecayConfig::new(5, 10.0)).unwrap();
    assert!(rep.passed);
    assert!((rep.fitted_constant - 3.0).abs() < 0.1);
    assert!(matches!(
        check_green_decay(&GreenDecayConfig::new(5, 0.0)),
        Err(Error::InvalidParameter(_))
    ));
    let mut short = GreenDecayConfig::new(5, 1.0);
    short.radii = vec![100.0, 200.0, 400.0, 800.0];
    assert!(matches!(
        check_green_decay(&short),
        Err(Error::InsufficientRange { .. })
    ));
}

#[test]
fn pairwise_with_zero_tau_always_holds() {
    let xi = [1.0, 2.0, 0.0, 0.0, 0.0];
    let xj = [-3.0, 0.5, 1.0, 0.0, 0.0];
    for y in [[0.0; 5], [1.0, 2.0, 0.0, 0.0, 0.0], [40.0, -3.0, 2.0, 1.0, 0.0]] {
        let (l, r) = pairwise_sides(&xi, &xj, &y, 2.5, 1.5, 0.0);
        assert!(l <= r);
    }
}

#[test]
fn sandwich_reports_empty_mid_region_and_holds() {
    let cfg = SandwichConfig {
        ms: vec![2, 8],
        samples_per_region: 100,
        ..Default::default()
    };
    let rep = check_lattice_sandwich(&cfg).unwrap();
    assert!(rep.passed);
    let regions = rep.details["regions"].as_array().unwrap();
    let mid_m2 = regions
        .iter()
        .find(|r| r["m"] == 2 && r["region"] == serde_json::json!(Region::Mid))
        .unwrap();
    assert_eq!(mid_m2["samples"], 0);
    assert!(check_lattice_sandwich(&SandwichConfig { theta: 1.0, ..cfg }).is_err());
}

#[test]
fn scaling_slope_is_reproducible_across_plans() {
    let consts = compute_constants(5, 4.5, -5.0, &IntegrationPlan::for_constants(5)).unwrap();
    let cfg = |plan: SamplingPlan| ScalingConfig {
        profile: ProfileK::default_instance(),
        m: 2,
        tau: 1.0,
        ls: vec![4, 8, 16],
        plan,
    };
    let coarse = scaling_study(&cfg(SamplingPlan::default().refined()), &consts).unwrap();
    let fine = scaling_study(&cfg(SamplingPlan::default().refined().refined().refined()), &consts).unwrap();
    let (a, b) = (coarse.slope.unwrap(), fine.slope.unwrap());
    assert!((a - b).abs() <= 0.2, "{a} vs {b}");
    assert!(fine.within_band, "{b}");
    // finer plans contain the coarse samples, so the estimate cannot drop
    for (c, f) in coarse.rows.iter().zip(&fine.rows) {
        assert!(f.norm >= c.norm);
    }
}

#[test]
#[ignore = "known failure: b grows with the row sums, and the norm scales like b^(7/3)"]
fn error_norm_within_factor_two_across_m() {
    let consts = compute_constants(5, 4.5, -5.0, &IntegrationPlan::for_constants(5)).unwrap();
    let plan = SamplingPlan::default().refined().refined();
    let prof = ProfileK::default_instance();
    let a = error_norm(&prof, 1, 8, 1.0, &plan, &consts).unwrap().value;
    let b = error_norm(&prof, 4, 8, 1.0, &plan, &consts).unwrap().value;
    assert!(a.max(b) / a.min(b) <= 2.0, "{a} vs {b}");
}

proptest! {
    #[test]
    fn bootstrap_is_increasing_and_bounded(tau0 in 1e-4f64..0.5) {
        let b = bootstrap_exponents(5, 1, tau0).unwrap();
        prop_assert!(b.sequence.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(b.steps as f64 <= b.step_bound + 1e-12);
        if let Some(&last) = b.sequence.last() {
            prop_assert!(1.5 + last >= 2.0 || b.log_step);
        }
    }

    #[test]
    fn bootstrap_in_higher_dimension(tau0 in 1e-3f64..1.0) {
        let b = bootstrap_exponents(9, 2, tau0).unwrap();
        prop_assert_eq!(b.claim_exponent, 5.0);
        prop_assert!(b.steps as f64 <= b.step_bound + 1e-12);
    }
}
