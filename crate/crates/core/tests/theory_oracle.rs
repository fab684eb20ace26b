use enns_core::seed;
use enns_core::theory::*;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[test]
fn folded_cdf_closed_forms() {
    for (mu, sigma) in [(0.0, 1.0), (2.0, 0.5), (-1.0, 3.0)] {
        assert_eq!(folded_normal_cdf(0.0, mu, sigma).unwrap(), 0.0);
    }
    let half = folded_normal_cdf(1.0, 0.0, 1.0).unwrap();
    assert!((half - 0.682_689_492_137_085_9).abs() < 1e-12);
    let erf = |z: f64| 2.0 * normal_cdf(z * std::f64::consts::SQRT_2) - 1.0;
    for (x, mu, sigma) in [(0.4, 1.2, 0.7), (3.0, -2.0, 1.5), (10.0, 4.0, 2.0)] {
        let want = 0.5 * (erf((x + mu) / (sigma * 2f64.sqrt())) + erf((x - mu) / (sigma * 2f64.sqrt())));
        assert!((folded_normal_cdf(x, mu, sigma).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn folded_cdf_matches_simulation() {
    let dist = Normal::new(2.0, 1.0).unwrap();
    let mut rng = seed::rng(12);
    let hits = (0..1_000_000).filter(|_| { let v: f64 = dist.sample(&mut rng); v.abs() <= 3.0 }).count();
    let empirical = hits as f64 / 1e6;
    assert!((folded_normal_cdf(3.0, 2.0, 1.0).unwrap() - empirical).abs() < 0.002);
}

#[test]
fn folded_pdf_is_the_cdf_derivative_and_integrates_to_one() {
    assert!((folded_normal_pdf(0.0, 0.0, 1.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-15);
    let h = 1e-5;
    let fd = (folded_normal_cdf(1.3 + h, 0.7, 2.0).unwrap() - folded_normal_cdf(1.3 - h, 0.7, 2.0).unwrap()) / (2.0 * h);
    assert!((fd - folded_normal_pdf(1.3, 0.7, 2.0).unwrap()).abs() < 1e-6);

    let steps = 200_000;
    let upper = 20.0;
    let dx = upper / steps as f64;
    let simpson: f64 = (0..=steps)
        .map(|i| {
            let w = if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * folded_normal_pdf(i as f64 * dx, 1.5, 1.0).unwrap()
        })
        .sum::<f64>()
        * dx
        / 3.0;
    assert!((simpson - 1.0).abs() < 1e-8, "{simpson}");
}

#[test]
fn orthant_identities() {
    assert!((orthant_prob(0.0, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-12);
    for rho in [-0.6, 0.2, FRAC_1_SQRT_2, 0.9] {
        let want = 0.25 + f64::asin(rho) / (2.0 * PI);
        assert!((orthant_prob(0.0, 0.0, rho).unwrap() - want).abs() < 1e-10, "{rho}");
    }
    for b in [-1.0, 0.3, 2.0] {
        assert!((orthant_prob(-10.0, b, 0.5).unwrap() - (1.0 - normal_cdf(b))).abs() < 1e-8);
    }
    let (a, b) = (0.4, -0.9);
    assert!((orthant_prob(a, b, 0.0).unwrap() - (1.0 - normal_cdf(a)) * (1.0 - normal_cdf(b))).abs() < 1e-10);
    assert!((orthant_prob(a, b, 0.3).unwrap() - orthant_prob(b, a, 0.3).unwrap()).abs() < 1e-10);
}

#[test]
fn orthant_matches_simulation() {
    let mut rng = seed::rng(3);
    let n = Normal::new(0.0, 1.0).unwrap();
    let rho = FRAC_1_SQRT_2;
    let reps = 2_000_000;
    let hits = (0..reps)
        .filter(|_| {
            let z1: f64 = n.sample(&mut rng);
            let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * n.sample(&mut rng);
            z1 > 0.0 && z2 > 0.0
        })
        .count();
    assert!((hits as f64 / reps as f64 - 0.375).abs() < 0.002);
}

#[test]
fn select_over_symmetry_complement_and_scale() {
    for b in [0.0, 0.7, 3.0] {
        assert!((prob_select_over(b, b, 1.3).unwrap() - 0.5).abs() < 1e-8);
    }
    let p = prob_select_over(0.5, 2.0, 1.0).unwrap();
    let q = prob_select_over(2.0, 0.5, 1.0).unwrap();
    assert!((p + q - 1.0).abs() < 1e-8);
    let scaled = prob_select_over(1.0, 4.0, 2.0).unwrap();
    assert!((p - scaled).abs() < 1e-10);
    assert!((prob_select_over(-0.5, 2.0, 1.0).unwrap() - p).abs() < 1e-12);
    assert!(prob_select_over(0.0, 5.0, 1.0).unwrap() >= prob_select_over(0.0, 1.0, 1.0).unwrap());
}

#[test]
fn select_over_matches_simulation() {
    let analytic = prob_select_over(0.0, 3.0, 1.0).unwrap();
    let mc = mc_select_over(0.0, 3.0, 1.0, 10, 100_000, 5).unwrap();
    assert!((analytic - mc).abs() < 0.01, "{analytic} vs {mc}");
}

#[test]
fn first_correct_cases() {
    assert_eq!(prob_first_correct(&SignalProfile::new(vec![2.0], 1.0, 1).unwrap()).unwrap(), 1.0);

    let two = SignalProfile::new(vec![3.0, 0.0], 1.0, 1).unwrap();
    let analytic = prob_first_correct(&two).unwrap();
    let mc = mc_first_selection(&two, 10, 100_000, 8).unwrap();
    assert!((analytic - mc).abs() < 0.01);
    assert!((analytic - (1.0 - prob_select_over(3.0, 0.0, 1.0).unwrap())).abs() < 1e-6);

    let three = SignalProfile::equal(2.0, 1.0, 3, 20).unwrap();
    let analytic = prob_first_correct(&three).unwrap();
    let mc = mc_first_selection(&three, 20, 100_000, 9).unwrap();
    assert!((analytic - mc).abs() < 0.02, "{analytic} vs {mc}");
}

#[test]
fn first_correct_is_monotone_in_signal() {
    let mut last = 0.0;
    for beta in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let v = prob_first_correct(&SignalProfile::equal(beta, 1.0, 2, 15).unwrap()).unwrap();
        assert!(v >= last - 1e-12, "{beta}: {v} < {last}");
        last = v;
    }
    let base = prob_first_correct(&SignalProfile::new(vec![1.0, 2.0, 0.0, 0.0, 0.0], 1.0, 2).unwrap()).unwrap();
    let more = prob_first_correct(&SignalProfile::new(vec![1.5, 2.0, 0.0, 0.0, 0.0], 1.0, 2).unwrap()).unwrap();
    assert!(more >= base);
}

#[test]
fn first_selection_simulation_edge_cases() {
    let mut betas = vec![0.0; 6];
    betas[0] = 1e6;
    let strong = SignalProfile::new(betas, 1.0, 1).unwrap();
    assert_eq!(mc_first_selection(&strong, 6, 2_000, 1).unwrap(), 1.0);

    let null = SignalProfile::new(vec![0.0; 10], 1.0, 1).unwrap();
    let freq = mc_first_selection(&null, 10, 20_000, 4).unwrap();
    let se = (0.1f64 * 0.9 / 20_000.0).sqrt();
    assert!((freq - 0.1).abs() < 4.0 * se, "{freq}");
}

#[test]
fn invalid_arguments() {
    assert!(folded_normal_cdf(-0.1, 0.0, 1.0).is_err());
    assert!(folded_normal_cdf(1.0, 0.0, 0.0).is_err());
    assert!(orthant_prob(0.0, 0.0, 1.0).is_err());
    assert!(prob_select_over(1.0, 1.0, -1.0).is_err());
    assert!(SignalProfile::new(vec![1.0, 1.0], 1.0, 1).is_err());
    assert!(SignalProfile::new(vec![1.0], 1.0, 2).is_err());
}
