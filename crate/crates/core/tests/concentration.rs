use std::time::Instant;

use num_complex::Complex64;
use proptest::prelude::*;
use qha_lab::concentration::*;
use qha_lab::linalg;
use qha_lab::operator::Operator;
use qha_lab::phase_space::{GridModel, PhasePoint, Region, Signal};
use qha_lab::qha::{self, Exponent};
use qha_lab::windows::{self, OperatorWindow};

fn random_positive_compact(grid: GridModel, seed: u64) -> OperatorWindow {
    let terms: Vec<(f64, Signal)> = (0..3)
        .map(|i| {
            let z = grid.nearest_point(0.3 * i as f64 - 0.3, 0.2 * (seed % 3) as f64);
            let g = Signal::gaussian(grid, 0.8 + 0.1 * i as f64, z).unwrap();
            let r = Signal::random(grid, seed * 10 + i).unwrap();
            (
                1.0 / (1.0 + i as f64),
                g.combine(Complex64::new(1.0, 0.0), &r, Complex64::new(0.3, 0.0))
                    .normalized()
                    .unwrap(),
            )
        })
        .collect();
    windows::finite_rank(&terms).unwrap()
}

fn ascent_only() -> OptimizerBudget {
    OptimizerBudget {
        strategy: Some("projected-ascent".into()),
        eigen_starts: Some(0),
        random_starts: 1,
        gaussian_starts: 1,
        hermite_starts: 0,
        max_iterations: 3000,
        tolerance: 1e-11,
        ..OptimizerBudget::default()
    }
}

#[test]
fn p1_ascent_matches_localization_eigenvalue() {
    let grid = GridModel::continuum(128).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
    let t = Instant::now();
    for seed in 0..3 {
        let problem = ConcentrationProblem::new(
            random_positive_compact(grid, seed),
            region.clone(),
            Exponent::ONE,
        )
        .unwrap();
        let eig = optimize_concentration(&problem, &OptimizerBudget::default()).unwrap();
        assert_eq!(eig.strategy, "eigen-localization");
        let asc = optimize_concentration(&problem, &ascent_only()).unwrap();
        println!(
            "seed {seed}: eig {} ascent {} iters {} ({:?})",
            eig.value,
            asc.value,
            asc.iterations,
            t.elapsed()
        );
        assert!((eig.value - asc.value).abs() < 1e-8);
    }
}

#[test]
fn p_infinity_matches_spectral_radius_for_hermitian_windows() {
    let grid = GridModel::continuum(64).unwrap();
    let region = Region::ball(grid, (0.3, -0.2), 0.8).unwrap();
    for seed in 0..3 {
        let a = Signal::random(grid, seed).unwrap();
        let b = Signal::random(grid, seed + 50).unwrap();
        let m = Operator::rank_one(&a, &b).unwrap().matrix().clone();
        let herm = &m + m.adjoint() - Operator::parity(grid).matrix() * Complex64::new(0.5, 0.0);
        let window = windows::custom(grid, herm.clone()).unwrap();
        assert!(window.flags().hermitian);
        let problem =
            ConcentrationProblem::new(window, region.clone(), Exponent::INFINITY).unwrap();
        let result = optimize_concentration(&problem, &OptimizerBudget::default()).unwrap();
        let eig = linalg::hermitian_eigen(&herm);
        let radius = eig.values[0].abs().max(eig.values.last().unwrap().abs());
        assert_eq!(result.strategy, "numerical-radius");
        assert!(
            (result.value - radius).abs() < 1e-8,
            "{} vs {radius}",
            result.value
        );
    }
}

#[test]
fn p2_rank_one_respects_jensen_bound() {
    let grid = GridModel::continuum(128).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
    let g = Signal::standard_gaussian(grid).unwrap();
    let problem =
        ConcentrationProblem::new(windows::rank_one(&g, &g).unwrap(), region, Exponent::TWO)
            .unwrap();
    let result = optimize_concentration(&problem, &OptimizerBudget::default()).unwrap();
    let jensen = result.upper_bounds.jensen.unwrap();
    assert!(result.value <= jensen + 1e-9);
    assert!(result.value <= result.upper_bounds.universal + 1e-9);
    // The Gaussian is optimal here: J(φ₀)² = ∫_{B_1} e^{-2π|z|²} = (1 − e^{-2π})/2.
    let exact = ((1.0 - (-2.0 * std::f64::consts::PI).exp()) / 2.0).sqrt();
    assert!(
        (result.value - exact).abs() < 1e-3,
        "{} vs {exact}",
        result.value
    );
}

#[test]
fn perturbation_of_identity_matches_eigen_route() {
    let grid = GridModel::continuum(128).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
    let phi = Signal::standard_gaussian(grid).unwrap();
    let s0 = windows::rank_one(&phi, &phi).unwrap();
    let window = windows::identity_plus(Complex64::new(1.0, 0.0), &s0).unwrap();
    let problem = ConcentrationProblem::new(window, region.clone(), Exponent::TWO).unwrap();
    let ascent = optimize_concentration(&problem, &OptimizerBudget::default()).unwrap();
    let rho: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let route = perturbation_eigen_route(1.0, &s0, &region, Exponent::TWO, 3, &rho).unwrap();
    assert!(
        (ascent.value - route).abs() < 1e-4,
        "{} vs {route}",
        ascent.value
    );
}

#[test]
fn localization_operator_trace_and_positivity() {
    let grid = GridModel::continuum(64).unwrap();
    let region = Region::ball(grid, (0.0, 0.4), 1.1).unwrap();
    let window = random_positive_compact(grid, 4);
    let (h, spectrum) = localization_spectrum(&region, &window).unwrap();
    let expected = window.trace() * region.measure();
    assert!((h.trace() - expected).norm() < 1e-10);
    assert!(*spectrum.last().unwrap() >= -1e-10);
    assert!(spectrum.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn p1_functional_is_localization_quadratic_form() {
    let grid = GridModel::exact(16).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.3).unwrap();
    let a = Signal::random(grid, 3).unwrap();
    let window = windows::rank_one(&a, &a).unwrap();
    let problem = ConcentrationProblem::new(window.clone(), region.clone(), Exponent::ONE).unwrap();
    let h = qha::localization_operator(&region, &window).unwrap();
    for seed in 10..15 {
        let f = Signal::random(grid, seed)
            .unwrap()
            .scaled(Complex64::new(1.7, 0.0));
        let form = h.apply(&f).unwrap().inner(&f).re;
        assert!((concentration_functional(&problem, &f).unwrap() - form).abs() < 1e-12);
    }
}

#[test]
fn ascent_trace_is_monotone() {
    let grid = GridModel::continuum(64).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
    let problem =
        ConcentrationProblem::new(windows::wigner(grid), region, Exponent::new(3.0).unwrap())
            .unwrap();
    let result = optimize_concentration(
        &problem,
        &OptimizerBudget {
            eigen_starts: Some(0),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(result
        .trace
        .windows(2)
        .all(|w| w[1].value >= w[0].value - 1e-12));
    assert!(result.value <= result.upper_bounds.universal + 1e-9);
}

#[test]
fn optimum_is_shift_covariant() {
    let grid = GridModel::continuum(64).unwrap();
    let phi = Signal::gaussian(grid, 1.3, PhasePoint::ORIGIN).unwrap();
    let window = windows::rank_one(&phi, &phi).unwrap();
    let w = grid.nearest_point(0.75, -0.5);
    let (wx, wy) = grid.coordinates(w);
    let base = Region::ball(grid, (0.0, 0.0), 0.9).unwrap();
    let moved = Region::ball(grid, (wx, wy), 0.9).unwrap();
    assert_eq!(base.count(), moved.count());
    let budget = OptimizerBudget::default();
    let p = Exponent::new(2.5).unwrap();
    let a = optimize_concentration(
        &ConcentrationProblem::new(window.clone(), base, p).unwrap(),
        &budget,
    )
    .unwrap();
    let moved_problem = ConcentrationProblem::new(window, moved, p).unwrap();
    let b = optimize_concentration(&moved_problem, &budget).unwrap();
    assert!(
        (a.value - b.value).abs() < 1e-8,
        "{} vs {}",
        a.value,
        b.value
    );
    let transported = concentration_functional(&moved_problem, &a.optimizer.tf_shift(w)).unwrap();
    assert!((transported - a.value).abs() < 1e-10);
}

#[test]
fn essential_estimates_for_compact_identity_and_perturbed_windows() {
    let grid = GridModel::continuum(1024).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
    let (families, notes) = default_escape_families(&region).unwrap();
    assert!(notes.is_empty());
    assert_eq!(families.len(), 3);
    let p = Exponent::TWO;
    let root = region.measure().sqrt();

    let phi = Signal::standard_gaussian(grid).unwrap();
    let compact = windows::rank_one(&phi, &phi).unwrap();
    let norm = compact.norm();
    let problem = ConcentrationProblem::new(compact, region.clone(), p).unwrap();
    let est = essential_value_estimate(&problem, &families).unwrap();
    assert!(est.value <= 1e-3 * root * norm, "compact: {}", est.value);

    let id = windows::identity_plus(Complex64::new(0.0, 0.0), &Operator::identity(grid)).unwrap();
    let problem = ConcentrationProblem::new(id, region.clone(), p).unwrap();
    let est = essential_value_estimate(&problem, &families).unwrap();
    assert!((est.value - root).abs() < 1e-12);

    let problem = ConcentrationProblem::new(
        windows::identity_minus_gaussian(grid).unwrap(),
        region.clone(),
        p,
    )
    .unwrap();
    let shifted = [families[0].clone()];
    let est = essential_value_estimate(&problem, &shifted).unwrap();
    assert!(
        (est.value - root).abs() < 0.01 * root,
        "{} vs {root}",
        est.value
    );
}

#[test]
fn shifted_family_needs_headroom() {
    let grid = GridModel::continuum(128).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
    let family = EscapeFamily::Shifted {
        profile: Signal::standard_gaussian(grid).unwrap(),
        direction: (1.0, 1.0),
        magnitudes: vec![2.0, 4.0, 6.0, 7.5],
    };
    let phi = Signal::standard_gaussian(grid).unwrap();
    let problem = ConcentrationProblem::new(
        windows::rank_one(&phi, &phi).unwrap(),
        region.clone(),
        Exponent::TWO,
    )
    .unwrap();
    let err = essential_value_estimate(&problem, &[family]).unwrap_err();
    assert!(err
        .to_string()
        .starts_with("grid too small to emulate escape"));
    let (_, notes) = default_escape_families(&region).unwrap();
    assert_eq!(notes.len(), 1);
}

#[test]
fn mixed_terms_decay_along_shift_family() {
    let grid = GridModel::continuum(1024).unwrap();
    let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
    let window = windows::wigner(grid);
    let f = Signal::standard_gaussian(grid).unwrap();
    let diameter = region.diameter();
    let mut previous = f64::MAX;
    for step in 0..6 {
        let r = 3.0 * diameter + 1.5 * step as f64;
        let z = grid.nearest_point(r / 2f64.sqrt(), r / 2f64.sqrt());
        let shifted = f.tf_shift(z);
        let mixed = qha::cohen_transform_on(&window, &shifted, &f, &region)
            .unwrap()
            .lp_norm(&region, Exponent::TWO);
        assert!(mixed <= previous + 1e-15);
        previous = mixed;
    }
    assert!(previous < 1e-12);
}

#[test]
fn strict_gap_verdicts() {
    let grid = GridModel::continuum(256).unwrap();
    let budget = OptimizerBudget {
        random_starts: 1,
        gaussian_starts: 1,
        hermite_starts: 1,
        eigen_starts: Some(1),
        ..Default::default()
    };
    for radius in [0.5, 1.0] {
        let region = Region::ball(grid, (0.0, 0.0), radius).unwrap();
        let problem =
            ConcentrationProblem::new(windows::wigner(grid), region, Exponent::TWO).unwrap();
        let result = strict_gap_check(&problem, &budget).unwrap();
        assert_eq!(
            result.verdict,
            Some(Verdict::CertifiedGap),
            "radius {radius}: {result:?}"
        );
        assert!(result.ess_lower <= result.value + 1e-9);
    }
    let region = Region::ball(grid, (0.0, 0.0), 1.0).unwrap();
    let window = random_positive_compact(grid, 1);
    let problem = ConcentrationProblem::new(window, region, Exponent::new(3.0).unwrap()).unwrap();
    let result = strict_gap_check(&problem, &budget).unwrap();
    assert_eq!(result.verdict, Some(Verdict::CertifiedGap));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn functional_is_quadratically_homogeneous(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0, p in 1.0f64..6.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let grid = GridModel::exact(16).unwrap();
        let region = Region::ball(grid, (0.0, 0.0), 1.5).unwrap();
        let a = Signal::random(grid, seed).unwrap();
        let b = Signal::random(grid, seed + 1).unwrap();
        let window = windows::rank_one(&a, &b).unwrap();
        let problem = ConcentrationProblem::new(window.clone(), region.clone(), Exponent::new(p).unwrap()).unwrap();
        let f = Signal::random(grid, seed + 2).unwrap();
        let alpha = Complex64::new(re, im);
        let j1 = concentration_functional(&problem, &f).unwrap();
        let j2 = concentration_functional(&problem, &f.scaled(alpha)).unwrap();
        prop_assert!((j2 - alpha.norm_sqr() * j1).abs() <= 1e-10 * j2.max(1.0));
        prop_assert!(j1 <= universal_bound(&problem) * f.norm().powi(2) + 1e-12);
    }

    #[test]
    fn jensen_chain_holds(seed in 0u64..1000, p in 1.0f64..5.0) {
        let grid = GridModel::exact(16).unwrap();
        let region = Region::ball(grid, (0.2, 0.0), 1.2).unwrap();
        let a = Signal::random(grid, seed).unwrap();
        let b = Signal::random(grid, seed + 7).unwrap();
        let window = windows::finite_rank(&[(0.7, a), (0.4, b)]).unwrap();
        let problem = ConcentrationProblem::new(window, region, Exponent::new(p).unwrap()).unwrap();
        let f = Signal::random(grid, seed + 3).unwrap();
        let j = concentration_functional(&problem, &f).unwrap();
        let bound = jensen_bound(&problem).unwrap().unwrap();
        prop_assert!(j <= bound + 1e-10);
    }
}
