//! Verification harness shared by the `validate` command and the
//! acceptance suite: KKT residuals of a solution, the collision oracle on
//! budget-saturating allocations, and the SINR cdf sup-norm.

use std::cell::RefCell;
use std::f64::consts::LN_2;

use rand::Rng;
use serde::Serialize;

use crate::channel_model::{sample_secondary_means, CrossLinkEnsemble};
use crate::config::{SolverConfig, SystemConfig};
use crate::error::Result;
use crate::interference_stats::NspMode;
use crate::resource_allocator::{solve_instance, Allocation, ProblemInstance, Solution};
use crate::rng::{substream, Stream};
use crate::simulator::collision_oracle;
use crate::sinr_model::{sample_normalized_sinr, sample_realization, sinr_cdf, SinrParams};
use crate::stats::{ks_distance, ProbabilityEstimate};

/// Optimality residuals of one solved realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// `max(0, Σ φP / P_t - 1)`.
    pub power_excess: f64,
    /// `max(0, Σ w Σ φP / I_t - 1)`.
    pub intf_excess: f64,
    /// `|μ (P_t - Σ φP)|` relative to the objective.
    pub slackness_power: f64,
    /// `|η (I_t - Σ w Σ φP)|` relative to the objective.
    pub slackness_intf: f64,
    /// Largest `|∂ rate/∂P - (μ + η w_k)|` over assigned pairs with `P > 0`.
    pub stationarity: f64,
    pub objective: f64,
}

pub fn kkt_report(inst: &ProblemInstance, sol: &Solution) -> KktReport {
    let alloc = &sol.allocation;
    let dual = &sol.dual;
    let total = alloc.total_power();
    let interference = alloc.weighted_interference(&inst.weights);
    let objective = inst.rate(alloc);
    let scale = objective.abs().max(f64::MIN_POSITIVE);
    let mut stationarity: f64 = 0.0;
    for n in 0..inst.n_users {
        for k in 0..inst.n_subcarriers {
            let p = alloc.power(n, k);
            if alloc.is_assigned(n, k) && p > 0.0 {
                let slope = inst.gamma(n, k) / inst.floor;
                let derivative = slope / (LN_2 * (1.0 + slope * p));
                let price = dual.mu + dual.eta * inst.weights[k];
                stationarity = stationarity.max((derivative - price).abs());
            }
        }
    }
    KktReport {
        power_excess: (total / inst.p_t - 1.0).max(0.0),
        intf_excess: (interference / inst.i_t - 1.0).max(0.0),
        slackness_power: (dual.mu * (inst.p_t - total)).abs() / scale,
        slackness_intf: (dual.eta * (inst.i_t - interference)).abs() / scale,
        stationarity,
        objective,
    }
}

/// Random scenario for the solver checks: `N` users, `K` subcarriers,
/// parameters drawn around the defaults.
pub fn random_scenario(base: &SystemConfig, index: u64, seed: u64) -> SystemConfig {
    let mut rng = substream(seed, Stream::Oracle, index);
    SystemConfig {
        p_t: rng.random_range(5.0..50.0),
        i_th: rng.random_range(1.0..40.0),
        epsilon: rng.random_range(0.01..0.5),
        rho: rng.random_range(0.0..0.9),
        seed: rng.random(),
        ..base.clone()
    }
}

/// Solves realization `index` of `cfg` with the same draws the scenario
/// runner uses, returning the instance with its solution.
pub fn solve_realization(cfg: &SystemConfig, index: u64) -> Result<(ProblemInstance, CrossLinkEnsemble, Solution)> {
    let means = sample_secondary_means(
        cfg.n_users,
        cfg.n_subcarriers,
        &mut substream(cfg.seed, Stream::ScenarioMeans, 0),
    );
    let mut stream = substream(cfg.seed, Stream::Realization, index);
    let (channels, ens) = sample_realization(cfg, &means, &mut stream)?;
    let inst = ProblemInstance::new(cfg, &channels, &ens)?;
    let sol = solve_instance(&inst, &cfg.solver)?;
    Ok((inst, ens, sol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetCheck {
    pub k: usize,
    pub epsilon: f64,
    pub i_th: f64,
    pub i_t: f64,
    pub collision: ProbabilityEstimate,
}

impl BudgetCheck {
    /// Empirical collision probability within `ε + 3 se`.
    pub fn passes(&self) -> bool {
        self.collision.probability <= self.epsilon + 3.0 * self.collision.std_error
    }
}

/// Rescales every power by one factor so that `Σ w_k Σ_n φP = I_t`.
pub fn saturate_budget(alloc: &Allocation, weights: &[f64], i_t: f64) -> Allocation {
    let used = alloc.weighted_interference(weights);
    let mut out = alloc.clone();
    if used > 0.0 {
        let f = i_t / used;
        out.power.iter_mut().for_each(|p| *p *= f);
    }
    out
}

/// One randomized check of the deterministic budget: a solver allocation
/// under a loose power budget is scaled to consume `I_t` exactly, then the
/// true cross-links are sampled from their posteriors.
pub fn budget_check(k: usize, epsilon: f64, index: u64, seed: u64, samples: usize) -> Result<BudgetCheck> {
    let mut rng = substream(seed, Stream::Oracle, index);
    let cfg = SystemConfig {
        n_subcarriers: k,
        epsilon,
        i_th: rng.random_range(1.0..20.0),
        rho: rng.random_range(0.0..0.9),
        p_t: 1e3,
        seed: rng.random(),
        ..SystemConfig::default()
    };
    let (inst, ens, sol) = solve_realization(&cfg, 0)?;
    let alloc = saturate_budget(&sol.allocation, &inst.weights, inst.i_t);
    let mut orng = substream(cfg.seed, Stream::Collision, index);
    let collision = collision_oracle(&alloc, &ens, cfg.i_th, samples, &mut orng)?;
    Ok(BudgetCheck { k, epsilon, i_th: cfg.i_th, i_t: inst.i_t, collision })
}

/// The randomized budget checks over `K ∈ {16, 64}` and `ε ∈ {0.05, 0.15, 0.30}`.
pub fn budget_checks(count: usize, seed: u64, samples: usize) -> Result<Vec<BudgetCheck>> {
    const KS: [usize; 2] = [16, 64];
    const EPS: [f64; 3] = [0.05, 0.15, 0.30];
    (0..count)
        .map(|i| budget_check(KS[i % 2], EPS[i % 3], i as u64, seed, samples))
        .collect()
}

/// Sup-norm distance between the closed-form cdf and the empirical cdf of
/// `draws` normalized SINRs.
pub fn cdf_sup_norm(cfg: &SystemConfig, mean_gain: f64, draws: usize, mode: NspMode, seed: u64) -> Result<f64> {
    let params = SinrParams::from_config(cfg, mean_gain, mode)?;
    let mut samples = sample_normalized_sinr(cfg, mean_gain, draws, seed)?;
    let failure = RefCell::new(None);
    let d = ks_distance(&mut samples, |g| match sinr_cdf(g, &params) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    });
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(d),
    }
}

/// Classic single-constraint water filling over inverse channel-to-noise
/// ratios `inv`: `P_k = (L - inv_k)⁺` with `Σ P_k = p_t`.
pub fn water_filling_oracle(inv: &[f64], p_t: f64) -> Vec<f64> {
    let mut sorted: Vec<f64> = inv.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut level = f64::INFINITY;
    let mut sum = 0.0;
    for (i, a) in sorted.iter().enumerate() {
        sum += a;
        let candidate = (p_t + sum) / (i + 1) as f64;
        if candidate <= *a {
            break;
        }
        level = candidate;
    }
    inv.iter().map(|a| (level - a).max(0.0)).collect()
}

/// One user, `gains.len()` subcarriers and a slack interference budget.
/// Returns `max_k |P_k - P*_k| / P_t` against [`water_filling_oracle`].
pub fn single_user_check(gains: &[f64], p_t: f64, solver: &SolverConfig) -> Result<f64> {
    let k = gains.len();
    let inst = ProblemInstance {
        n_users: 1,
        n_subcarriers: k,
        p_t,
        i_t: 1e12,
        noise: 1.0,
        nsp: 0.0,
        floor: 1.0,
        weights: vec![1e-6; k],
        gamma: gains.to_vec(),
    };
    let sol = solve_instance(&inst, solver)?;
    let inv: Vec<f64> = gains.iter().map(|g| 1.0 / g).collect();
    let oracle = water_filling_oracle(&inv, p_t);
    Ok((0..k)
        .map(|sc| (sol.allocation.power(0, sc) - oracle[sc]).abs() / p_t)
        .fold(0.0, f64::max))
}
