use std::f64::consts::PI;

use proptest::prelude::*;
use qha_lab::gap_criteria::*;
use qha_lab::quad;
use qha_lab::windows::{born_jordan_multiplier, born_jordan_multiplier_closed};

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `γ(d,x) = (d−1)! e^{−x} Σ_{k≥d} x^k/k!` for integer `d`, a sum of positive terms.
fn lower_gamma_oracle(d: u32, x: f64) -> f64 {
    let mut term = x.powi(d as i32) / factorial(d);
    let mut tail = 0.0;
    let mut k = d;
    while term > 1e-18 * tail || k < d + 5 {
        tail += term;
        k += 1;
        term *= x / k as f64;
    }
    factorial(d - 1) * (-x).exp() * tail
}

/// `∫_{B_R ⊂ ℝ^{2d}} (2^d e^{−2π|z|²})^p dz` in polar coordinates.
fn radial_mass(d: u32, p: f64, r: f64) -> f64 {
    let sphere = 2.0 * PI.powi(d as i32) / factorial(d - 1);
    let radial = quad::integrate(
        |t: f64| t.powi(2 * d as i32 - 1) * (-2.0 * PI * p * t * t).exp(),
        0.0,
        r,
        1e-15,
        1e-13,
    )
    .unwrap();
    2.0_f64.powf(d as f64 * p) * sphere * radial
}

#[test]
fn incomplete_gamma_matches_integer_closed_form() {
    for d in 1..=6 {
        for &x in &[
            1e-3,
            0.1,
            0.7,
            1.0,
            2.5,
            d as f64 + 0.9,
            d as f64 + 1.1,
            7.0,
            15.0,
            40.0,
        ] {
            let got = lower_incomplete_gamma(d as f64, x).unwrap();
            let want = lower_gamma_oracle(d, x);
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1e-300) + 1e-15,
                "d={d} x={x}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn cp_quadrature_matches_gamma_ratio() {
    for i in 0..=98 {
        let p = 1.0 + 0.5 * i as f64;
        let closed = cp_power(p);
        let quadrature = cp_power_quadrature(p).unwrap();
        assert!((closed - quadrature).abs() < 1e-10, "p={p}");
    }
    assert!((c_p(2.0).unwrap() - 0.5_f64.sqrt()).abs() < 1e-12);
}

#[test]
fn cp_power_decreases_to_zero() {
    for p in 2..20 {
        assert!(cp_power(p as f64 + 1.0) < cp_power(p as f64));
        let cp = c_p(p as f64).unwrap();
        assert!(cp > 0.0 && cp < 1.0);
    }
    // The decay is only like (2/(πp))^{1/2}: C_50^50 is about 0.1123, far above 1e-3.
    assert!((cp_power(50.0) - 0.112_275_172_659).abs() < 1e-11);
    for &p in &[1e2, 1e4, 1e6] {
        let ratio = cp_power(p) / (2.0 / (PI * p)).sqrt();
        assert!((ratio - 1.0).abs() < 1.0 / p);
    }
    assert!(cp_power(1e6) < 1e-3);
}

#[test]
fn m_d_closed_and_golden_agree() {
    assert!((m_d(1).unwrap() - (1.0 - (-1.0_f64).exp())).abs() < 1e-12);
    let mut previous = 1.0;
    for d in 1..=6 {
        let closed = m_d(d).unwrap();
        let golden = m_d_golden(d).unwrap();
        assert!(
            (closed - golden).abs() < 1e-8,
            "d={d}: {closed} vs {golden}"
        );
        assert!(closed > 0.0 && closed < previous);
        previous = closed;
        let x = crossing_point(d);
        assert!((a_d(d, x).unwrap() - f_d(d, x).unwrap()).abs() < 1e-8);
        assert!((x - factorial(d).powf(1.0 / d as f64)).abs() < 1e-12);
    }
}

#[test]
fn profile_limits() {
    for d in 1..=6 {
        assert!((a_d(d, 1e-6).unwrap() - 1.0).abs() < 1e-5);
        assert_eq!(a_d(d, 0.0).unwrap(), 1.0);
    }
    for d in 1..=4 {
        assert!((f_d(d, 50.0).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn l_pd_matches_radial_integral() {
    for d in 1..=2 {
        for &p in &[2.0, 3.0, 4.0] {
            let integral = radial_mass(d, p, 12.0).powf(1.0 / p);
            assert!((integral - l_pd(p, d)).abs() < 1e-8, "d={d} p={p}");
        }
    }
}

#[test]
fn gaussian_mass_forms_match_radial_integral() {
    for d in 1..=3 {
        for &p in &[2.0, 3.5] {
            for &r in &[0.1, 0.4, 1.0, 2.0] {
                let mass = gaussian_mass(d, p, r).unwrap();
                let oracle = radial_mass(d, p, r);
                assert!((mass.via_a - oracle).abs() < 1e-10 * oracle.max(1.0));
                assert!((mass.via_f - oracle).abs() < 1e-10 * oracle.max(1.0));
            }
        }
    }
}

#[test]
fn wigner_verdict_examples() {
    for &r in &[1e-3, 0.1, 0.5, 1.0, 3.0, 100.0] {
        let v = wigner_ball_verdict(1, 2.0, r).unwrap();
        assert_eq!(v.criterion, Some(Criterion::Cpmd));
    }
    let small = wigner_ball_verdict(3, 2.0, 0.05).unwrap();
    assert_eq!(small.criterion, Some(Criterion::GaussianMass));
    let large = wigner_ball_verdict(3, 2.0, 5.0).unwrap();
    assert_eq!(large.criterion, Some(Criterion::GaussianMass));

    // Around the crossing max{A_3, F_3} ≈ m_3 ≈ 0.27 < C_2^2 = 1/2, so nothing certifies.
    let r_mid = (crossing_point(3) / (4.0 * PI)).sqrt();
    let mid = wigner_ball_verdict(3, 2.0, r_mid).unwrap();
    assert_eq!(mid.verdict(), "uncertified");
    assert!(mid.a_d.max(mid.f_d) <= mid.cp_p);
    assert!(r_mid >= small_set_radius(2.0));
}

#[test]
fn p_threshold_is_finite_and_effective() {
    assert_eq!(p_threshold(1).unwrap(), 2.0);
    for d in 1..=6 {
        let p = p_threshold(d).unwrap();
        assert!(p.is_finite() && p >= 2.0);
        let v = wigner_ball_verdict(d, p + 0.1, 1.0).unwrap();
        assert_eq!(v.criterion, Some(Criterion::Cpmd), "d={d} p={p}");
    }
}

#[test]
fn cpmd_implies_gaussian_mass_everywhere() {
    for d in 1..=3 {
        let p = p_threshold(d).unwrap() + 0.5;
        let cp = cp_power(p);
        for i in 0..200 {
            let r = 10f64.powf(-3.0 + 5.0 * i as f64 / 199.0);
            let x = 2.0 * PI * p * r * r;
            assert!(a_d(d, x).unwrap().max(f_d(d, x).unwrap()) > cp);
        }
    }
}

#[test]
fn born_jordan_multiplier_matches_sech() {
    for i in 0..=40 {
        let lambda = -5.0 + 0.25 * i as f64;
        let q = born_jordan_multiplier(lambda).unwrap();
        assert!(
            (q - born_jordan_multiplier_closed(lambda)).abs() < 1e-8,
            "λ={lambda}"
        );
    }
    assert!((born_jordan_multiplier(0.0).unwrap() - PI).abs() < 1e-8);
}

proptest! {
    #[test]
    fn profiles_are_monotone_and_bounded(d in 1u32..=6, x in 1e-4f64..60.0, dx in 1e-3f64..5.0) {
        let (a0, a1) = (a_d(d, x).unwrap(), a_d(d, x + dx).unwrap());
        let (f0, f1) = (f_d(d, x).unwrap(), f_d(d, x + dx).unwrap());
        prop_assert!(a0 > 0.0 && a0 <= 1.0 && a1 < a0);
        prop_assert!(f0 > 0.0 && f0 <= 1.0 && f1 >= f0);
        prop_assert!(a0.max(f0) >= m_d(d).unwrap() - 1e-12);
    }

    #[test]
    fn gaussian_mass_routes_agree(d in 1u32..=5, p in 2.0f64..20.0, r in 1e-3f64..5.0) {
        let mass = gaussian_mass(d, p, r).unwrap();
        prop_assert!((mass.via_a - mass.via_f).abs() <= 1e-10 * mass.via_f.abs().max(1e-300));
    }
}
