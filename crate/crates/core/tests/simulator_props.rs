use cogniplan::channel_model::sample_cross_links;
use cogniplan::resource_allocator::Allocation;
use cogniplan::rng::{substream, Stream};
use cogniplan::simulator::{collision_oracle, run_scenario, run_sweep};
use cogniplan::validation::budget_checks;
use cogniplan::{SweepSpec, SweepVariable, SystemConfig};

fn small() -> SystemConfig {
    SystemConfig { n_subcarriers: 16, realizations: 300, mc_samples: 0, ..SystemConfig::default() }
}

#[test]
fn collision_event_limits() {
    let cfg = SystemConfig { n_subcarriers: 8, ..SystemConfig::default() };
    let ens = sample_cross_links(&cfg, &mut substream(5, Stream::Oracle, 0)).unwrap();
    let alloc = Allocation::from_owners(1, &[0; 8], &[1.0; 8]);
    let mut r = substream(5, Stream::Collision, 0);
    assert_eq!(collision_oracle(&alloc, &ens, 1e12, 10_000, &mut r).unwrap().probability, 0.0);
    assert_eq!(collision_oracle(&alloc, &ens, 1e-300, 10_000, &mut r).unwrap().probability, 1.0);
    let silent = Allocation::silent(1, 8);
    assert_eq!(collision_oracle(&silent, &ens, 1e-300, 10_000, &mut r).unwrap().probability, 0.0);
    assert!(collision_oracle(&alloc, &ens, 1.0, 9_999, &mut r).is_err());
}

#[test]
fn budget_guarantee_on_a_few_scenarios() {
    for c in budget_checks(6, 31, 20_000).unwrap() {
        assert!(c.passes(), "{c:?}");
    }
}

#[test]
fn scenario_collisions_stay_below_epsilon() {
    let cfg = SystemConfig { realizations: 40, mc_samples: 20_000, epsilon: 0.05, ..small() };
    let res = run_scenario(&cfg).unwrap();
    assert!(res.collision.probability <= cfg.epsilon + 3.0 * res.collision.std_error);
    assert_eq!(res.collision.trials, 40 * 20_000);
}

#[test]
fn zero_power_gives_zero_rate() {
    let cfg = SystemConfig { p_t: 0.0, mc_samples: 10_000, realizations: 20, ..small() };
    let res = run_scenario(&cfg).unwrap();
    assert_eq!(res.rate.mean, 0.0);
    assert_eq!(res.collision.events, 0);
}

#[test]
fn sweeps_are_reproducible() {
    let spec = SweepSpec { variable: SweepVariable::ITh, grid: vec![2.0, 8.0], base: small() };
    assert_eq!(run_sweep(&spec).unwrap().to_csv(), run_sweep(&spec).unwrap().to_csv());
}

fn assert_nondecreasing(variable: SweepVariable, grid: Vec<f64>, base: SystemConfig) {
    let res = run_sweep(&SweepSpec { variable, grid, base }).unwrap();
    for w in res.rows.windows(2) {
        assert!(
            w[1].rate_mean >= w[0].rate_mean - w[0].rate_se,
            "{} {} -> {}: {} < {}",
            variable.name(),
            w[0].value,
            w[1].value,
            w[1].rate_mean,
            w[0].rate_mean
        );
    }
}

#[test]
fn rate_grows_with_power_budget() {
    assert_nondecreasing(SweepVariable::PT, vec![1.0, 2.0, 5.0, 10.0, 25.0], small());
}

#[test]
fn rate_grows_with_threshold() {
    assert_nondecreasing(SweepVariable::ITh, vec![0.5, 1.0, 2.0, 5.0, 20.0], small());
}

#[test]
fn rate_grows_with_epsilon() {
    let base = SystemConfig { p_t: 40.0, ..small() };
    assert_nondecreasing(SweepVariable::Epsilon, vec![0.001, 0.01, 0.05, 0.15, 0.3], base);
}
