use approx::assert_relative_eq;
use cogniplan::interference_stats::{
    approx_check, empirical_sum_tail, interference_budget, moment_match, nsp_gaussian, nsp_value,
    sample_weighted_sum, tail_probability, ChiSquareApprox, NspMode, WeightLaw,
};
use cogniplan::channel_model::sample_cross_links;
use cogniplan::rng::{substream, Stream};
use cogniplan::stats::MeanEstimate;
use cogniplan::SystemConfig;
use proptest::prelude::*;

fn rng(i: u64) -> cogniplan::rng::SimRng {
    substream(777, Stream::Oracle, i)
}

// Reference values from 40-digit arithmetic.
#[test]
fn budget_reference_values() {
    let cases = [
        (64, 5.0, 0.15, 2.1697894932439742),
        (64, 5.0, 0.30, 2.497608278516045),
        (16, 5.0, 0.05, 2.0478946556432726),
        (2, 1.0, 0.5, 1.1516892489489766),
        (64, 20.0, 0.001, 4.687838981466868),
    ];
    for (k, ith, eps, want) in cases {
        assert_relative_eq!(interference_budget(k, ith, eps).unwrap(), want, max_relative = 1e-12);
    }
}

#[test]
fn tail_reference_value() {
    let a = ChiSquareApprox { weight: 1.5, dof: 8, noncentrality_sum: 2.0 };
    assert_relative_eq!(tail_probability(&a, 20.0).unwrap(), 0.22131084354439668, max_relative = 1e-12);
}

// One central term is an exact exponential, so the approximation should
// agree with sampling up to Monte-Carlo error.
#[test]
fn single_central_term_matches_sampling() {
    let beta = [2.5];
    let mu = [0.0];
    let a = moment_match(&beta, &mu).unwrap();
    for t in [1.0, 5.0, 12.0] {
        let est = empirical_sum_tail(&beta, &mu, t, 200_000, &mut rng(1)).unwrap();
        let approx = tail_probability(&a, t).unwrap();
        assert!((est.probability - approx).abs() < 4.0 * est.std_error.max(1e-4), "t={t}");
    }
}

#[test]
fn matched_mean_equals_sample_mean() {
    let beta = [0.3, 1.2, 2.0, 0.7, 4.1, 0.05, 1.0, 2.2];
    let mu = [0.0, 1.5, 0.2, 3.0, 0.0, 8.0, 0.4, 1.1];
    let a = moment_match(&beta, &mu).unwrap();
    let draws = sample_weighted_sum(&beta, &mu, 300_000, &mut rng(2)).unwrap();
    let m = MeanEstimate::from_samples(&draws);
    assert!((m.mean - a.mean()).abs() < 4.0 * m.std_error, "{} vs {}", m.mean, a.mean());
}

#[test]
fn gamma_weights_fit_closely() {
    let cfg = SystemConfig { n_subcarriers: 16, ..SystemConfig::default() };
    let res = approx_check(&cfg, WeightLaw::gamma_regime(), 0.5, 200_000, 1.0, &mut rng(3)).unwrap();
    assert!(res.ks_distance < 0.03, "KS {}", res.ks_distance);
}

#[test]
fn halved_weight_is_rejected() {
    let cfg = SystemConfig { n_subcarriers: 16, ..SystemConfig::default() };
    let res = approx_check(&cfg, WeightLaw::gamma_regime(), 1.0, 50_000, 0.5, &mut rng(4)).unwrap();
    assert!(res.ks_distance > 0.5);
}

// The Gaussian model of N^sp against draws of the realized sum.
#[test]
fn nsp_moments_match_sampling() {
    let cfg = SystemConfig { rho: 0.6, var_err: 0.2, ..SystemConfig::default() };
    let g = nsp_gaussian(&cfg, NspMode::MomentDerived);
    let mut r = rng(5);
    let draws: Vec<f64> = (0..50_000).map(|_| nsp_value(&sample_cross_links(&cfg, &mut r).unwrap())).collect();
    let m = MeanEstimate::from_samples(&draws);
    assert!((m.mean - g.mean).abs() < 4.0 * m.std_error, "{} vs {}", m.mean, g.mean);
    let var = draws.iter().map(|x| (x - m.mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    assert!((var / g.var - 1.0).abs() < 0.05, "{var} vs {}", g.var);
}

proptest! {
    #[test]
    fn budget_linear_in_threshold(k in 2usize..512, ith in 0.01f64..100.0, eps in 0.001f64..0.99) {
        let a = interference_budget(k, ith, eps).unwrap();
        let b = interference_budget(k, 2.0 * ith, eps).unwrap();
        prop_assert!(a > 0.0 && a.is_finite());
        prop_assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn budget_grows_with_epsilon(k in 2usize..512, eps in 0.001f64..0.9) {
        let lo = interference_budget(k, 1.0, eps).unwrap();
        let hi = interference_budget(k, 1.0, eps + 0.05).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn tail_is_a_survival_function(
        beta in prop::collection::vec(0.01f64..10.0, 1..32),
        mu_scale in 0.0f64..5.0,
        t in 0.01f64..500.0,
    ) {
        let mu: Vec<f64> = beta.iter().enumerate().map(|(i, _)| mu_scale * (i % 3) as f64).collect();
        let a = moment_match(&beta, &mu).unwrap();
        let p = tail_probability(&a, t).unwrap();
        let q = tail_probability(&a, t * 1.1).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(q <= p + 1e-15);
    }

    #[test]
    fn weight_scales_with_betas(beta in prop::collection::vec(0.01f64..10.0, 1..32), c in 0.1f64..10.0) {
        let mu = vec![0.5; beta.len()];
        let a = moment_match(&beta, &mu).unwrap();
        let scaled: Vec<f64> = beta.iter().map(|b| b * c).collect();
        let b = moment_match(&scaled, &mu).unwrap();
        prop_assert!((b.weight / a.weight - c).abs() < 1e-12 * c);
        prop_assert_eq!(a.dof, b.dof);
    }
}

#[test]
fn nsp_is_close_to_gaussian_at_64_subcarriers() {
    let cfg = SystemConfig::default();
    let g = nsp_gaussian(&cfg, NspMode::MomentDerived);
    let mut r = rng(6);
    let mut z: Vec<f64> = (0..100_000)
        .map(|_| (nsp_value(&sample_cross_links(&cfg, &mut r).unwrap()) - g.mean) / g.std_dev())
        .collect();
    let d = cogniplan::stats::ks_distance(&mut z, |x| 0.5 * cogniplan::special::erfc(-x / std::f64::consts::SQRT_2));
    assert!(d <= 0.02, "KS {d}");
}
