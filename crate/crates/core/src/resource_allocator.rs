//! Joint power and subcarrier allocation by Lagrangian dual decomposition.
//!
//! For fixed multipliers `(μ, η)` the Lagrangian separates per subcarrier
//! and per user: every candidate user gets its multi-level water-filling
//! power, each subcarrier goes to the user with the largest metric, and
//! the multipliers then follow a projected subgradient step on the
//! average-power and interference-budget residuals.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::channel_model::{CrossLinkEnsemble, SecondaryChannels};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::interference_stats::nsp_value;

/// Binary subcarrier assignment with per-(user, subcarrier) powers,
/// both row-major by user.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub n_users: usize,
    pub n_subcarriers: usize,
    pub assign: Vec<bool>,
    pub power: Vec<f64>,
}

impl Allocation {
    /// Every subcarrier owned by user 0 at zero power.
    pub fn silent(n_users: usize, n_subcarriers: usize) -> Self {
        let owners = vec![0; n_subcarriers];
        Self::from_owners(n_users, &owners, &vec![0.0; n_subcarriers])
    }

    /// Builds an allocation from the owner and power of each subcarrier.
    pub fn from_owners(n_users: usize, owners: &[usize], powers: &[f64]) -> Self {
        let k = owners.len();
        let mut assign = vec![false; n_users * k];
        let mut power = vec![0.0; n_users * k];
        for (sc, (&n, &p)) in owners.iter().zip(powers).enumerate() {
            assign[n * k + sc] = true;
            power[n * k + sc] = p;
        }
        Self { n_users, n_subcarriers: k, assign, power }
    }

    #[inline]
    pub fn is_assigned(&self, n: usize, k: usize) -> bool {
        self.assign[n * self.n_subcarriers + k]
    }

    #[inline]
    pub fn power(&self, n: usize, k: usize) -> f64 {
        self.power[n * self.n_subcarriers + k]
    }

    /// Checks exclusivity, nonnegativity and that unassigned pairs are silent.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_subcarriers;
        if self.assign.len() != self.n_users * k || self.power.len() != self.n_users * k {
            return Err(Error::Contract("allocation matrices have the wrong shape".into()));
        }
        for sc in 0..k {
            let owners = (0..self.n_users).filter(|&n| self.is_assigned(n, sc)).count();
            if owners != 1 {
                return Err(Error::Contract(format!(
                    "subcarrier {sc} is assigned to {owners} users, expected exactly one"
                )));
            }
        }
        for (i, (&a, &p)) in self.assign.iter().zip(&self.power).enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::Contract(format!("power entry {i} is {p}")));
            }
            if !a && p != 0.0 {
                return Err(Error::Contract(format!("unassigned entry {i} carries power {p}")));
            }
        }
        Ok(())
    }

    /// Power placed on each subcarrier, `Σ_n φ_{n,k} P_{n,k}`.
    pub fn subcarrier_powers(&self) -> Vec<f64> {
        let k = self.n_subcarriers;
        (0..k)
            .map(|sc| {
                (0..self.n_users)
                    .filter(|&n| self.is_assigned(n, sc))
                    .map(|n| self.power(n, sc))
                    .sum()
            })
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.subcarrier_powers().iter().sum()
    }

    /// `Σ_k w_k Σ_n φ_{n,k} P_{n,k}`.
    pub fn weighted_interference(&self, weights: &[f64]) -> f64 {
        self.subcarrier_powers().iter().zip(weights).map(|(p, w)| p * w).sum()
    }

    /// Owning user of each subcarrier.
    pub fn owners(&self) -> Vec<usize> {
        (0..self.n_subcarriers)
            .map(|sc| (0..self.n_users).find(|&n| self.is_assigned(n, sc)).unwrap_or(0))
            .collect()
    }
}

/// Everything the allocator needs about one channel realization.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub n_users: usize,
    pub n_subcarriers: usize,
    pub p_t: f64,
    pub i_t: f64,
    pub noise: f64,
    /// Realized `N^sp`.
    pub nsp: f64,
    /// `min(P_t / K, I_t / N^sp)`.
    pub floor: f64,
    /// Interference weights `w_k = δ²(2 + μ_Ξk)`.
    pub weights: Vec<f64>,
    /// Normalized SINR `floor |H^ss|² / σ²`, row-major by user.
    pub gamma: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(cfg: &SystemConfig, channels: &SecondaryChannels, ens: &CrossLinkEnsemble) -> Result<Self> {
        let k = cfg.n_subcarriers;
        if channels.n_subcarriers != k || ens.len() != k || channels.n_users != cfg.n_users {
            return Err(Error::Domain(format!(
                "dimension mismatch: config {}x{}, channels {}x{}, ensemble {}",
                cfg.n_users,
                k,
                channels.n_users,
                channels.n_subcarriers,
                ens.len()
            )));
        }
        let i_t = cfg.interference_budget()?;
        let nsp = nsp_value(ens);
        let floor = if nsp > 0.0 {
            (cfg.p_t / k as f64).min(i_t / nsp)
        } else {
            cfg.p_t / k as f64
        };
        let noise = cfg.noise_power();
        let gamma = channels.gain2.iter().map(|g| floor * g / noise).collect();
        Ok(Self {
            n_users: cfg.n_users,
            n_subcarriers: k,
            p_t: cfg.p_t,
            i_t,
            noise,
            nsp,
            floor,
            weights: ens.interference_weights(),
            gamma,
        })
    }

    #[inline]
    pub fn gamma(&self, n: usize, k: usize) -> f64 {
        self.gamma[n * self.n_subcarriers + k]
    }

    /// Instantaneous sum rate of an allocation, in bits/s/Hz.
    pub fn rate(&self, alloc: &Allocation) -> f64 {
        let k = self.n_subcarriers;
        let mut total = 0.0;
        for n in 0..self.n_users {
            for sc in 0..k {
                if alloc.is_assigned(n, sc) && alloc.power(n, sc) > 0.0 {
                    let x = self.gamma(n, sc) * alloc.power(n, sc) / self.floor;
                    total += x.ln_1p() / LN_2;
                }
            }
        }
        total
    }
}

/// Multi-level water-filling power `[1/(ln2 (μ + η w)) - floor/γ]⁺`.
pub fn water_fill_power(gamma: f64, mu: f64, eta: f64, intf_weight: f64, floor: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !(floor > 0.0) || !(mu >= 0.0) || !(eta >= 0.0) || !(intf_weight >= 0.0) {
        return Err(Error::Domain(format!(
            "water filling needs gamma >= 0, floor > 0 and nonnegative multipliers, got gamma = {gamma}, floor = {floor}, mu = {mu}, eta = {eta}, w = {intf_weight}"
        )));
    }
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let price = mu + eta * intf_weight;
    if price <= 0.0 {
        return Err(Error::UnboundedWaterLevel);
    }
    Ok((1.0 / (LN_2 * price) - floor / gamma).max(0.0))
}

/// Subcarrier selection metric `x/(ln2 (1+x)) + log2(1+x)` with
/// `x = γ P*/floor`.
pub fn subcarrier_metric(gamma: f64, p_star: f64, floor: f64) -> f64 {
    if p_star == 0.0 {
        return 0.0;
    }
    let x = gamma * p_star / floor;
    x / (LN_2 * (1.0 + x)) + x.ln_1p() / LN_2
}

/// Sign-flipped variant `log2(1+x) - x/(ln2 (1+x))` of the metric. Also
/// strictly increasing in `x`, so it selects the same user.
pub fn subcarrier_metric_alt(gamma: f64, p_star: f64, floor: f64) -> f64 {
    if p_star == 0.0 {
        return 0.0;
    }
    let x = gamma * p_star / floor;
    x.ln_1p() / LN_2 - x / (LN_2 * (1.0 + x))
}

/// Owner of each subcarrier: the user with the largest metric, lowest
/// index on ties. `metrics` is row-major by user.
pub fn assign_subcarriers(metrics: &[f64], n_users: usize) -> Result<Vec<usize>> {
    if n_users == 0 || !metrics.len().is_multiple_of(n_users) {
        return Err(Error::Domain("metric matrix does not match the user count".into()));
    }
    let k = metrics.len() / n_users;
    (0..k)
        .map(|sc| {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for n in 0..n_users {
                let v = metrics[n * k + sc];
                if v.is_nan() {
                    return Err(Error::Numerical(format!("metric of user {n} on subcarrier {sc} is NaN")));
                }
                if v > best_val {
                    best = n;
                    best_val = v;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Multipliers with their step-size schedule and last residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualState {
    pub mu: f64,
    pub eta: f64,
    /// Initial steps `τ⁰`; the step at update `i` is `τ⁰ / √i`.
    pub step0_power: f64,
    pub step0_intf: f64,
    /// Steps used by the most recent update.
    pub step_power: f64,
    pub step_intf: f64,
    pub iter: usize,
    /// `P_t - Σ φP` at the last update.
    pub residual_power: f64,
    /// `I_t - Σ_k w_k Σ_n φP` at the last update.
    pub residual_intf: f64,
}

impl DualState {
    pub fn new(mu: f64, eta: f64, step0_power: f64, step0_intf: f64) -> Self {
        Self {
            mu,
            eta,
            step0_power,
            step0_intf,
            step_power: step0_power,
            step_intf: step0_intf,
            iter: 0,
            residual_power: 0.0,
            residual_intf: 0.0,
        }
    }
}

/// One projected subgradient update of `(μ, η)`.
pub fn subgradient_step(dual: &DualState, alloc: &Allocation, p_t: f64, i_t: f64, weights: &[f64]) -> DualState {
    let iter = dual.iter + 1;
    let scale = 1.0 / (iter as f64).sqrt();
    let step_power = dual.step0_power * scale;
    let step_intf = dual.step0_intf * scale;
    let residual_power = p_t - alloc.total_power();
    let residual_intf = i_t - alloc.weighted_interference(weights);
    DualState {
        mu: (dual.mu - step_power * residual_power).max(0.0),
        eta: (dual.eta - step_intf * residual_intf).max(0.0),
        step_power,
        step_intf,
        iter,
        residual_power,
        residual_intf,
        ..*dual
    }
}

/// One row of the solver trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub mu: f64,
    pub eta: f64,
    pub residual_power: f64,
    pub residual_intf: f64,
    pub objective: f64,
}

pub const TRACE_CSV_HEADER: &str = "iter,mu,eta,residual_power,residual_intf,objective";

impl TraceRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.iter, self.mu, self.eta, self.residual_power, self.residual_intf, self.objective
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub total_power: f64,
    pub interference: f64,
    /// Largest relative constraint violation of the returned iterate.
    pub violation: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub allocation: Allocation,
    /// Multipliers that generated `allocation`, with the residuals it leaves.
    pub dual: DualState,
    pub diagnostics: Diagnostics,
}

/// Primal response (water-filling plus assignment) to fixed multipliers.
pub fn primal_response(inst: &ProblemInstance, mu: f64, eta: f64) -> Result<Allocation> {
    let (n_users, k) = (inst.n_users, inst.n_subcarriers);
    let mut p_star = vec![0.0; n_users * k];
    let mut metrics = vec![0.0; n_users * k];
    for n in 0..n_users {
        for sc in 0..k {
            let g = inst.gamma(n, sc);
            let p = water_fill_power(g, mu, eta, inst.weights[sc], inst.floor)?;
            p_star[n * k + sc] = p;
            metrics[n * k + sc] = subcarrier_metric(g, p, inst.floor);
        }
    }
    let owners = assign_subcarriers(&metrics, n_users)?;
    let powers: Vec<f64> = owners.iter().enumerate().map(|(sc, &n)| p_star[n * k + sc]).collect();
    Ok(Allocation::from_owners(n_users, &owners, &powers))
}

fn relative_violation(res_power: f64, res_intf: f64, p_t: f64, i_t: f64) -> f64 {
    let vp = if p_t > 0.0 { (-res_power / p_t).max(0.0) } else { (-res_power).max(0.0) };
    let vi = (-res_intf / i_t).max(0.0);
    vp.max(vi)
}

/// Maximizes the sum rate of one realization under the average-power and
/// interference-budget constraints.
///
/// Returns the first iterate whose residuals are within tolerance (an
/// inactive constraint counts as satisfied once its multiplier is zero).
/// Without convergence the best iterate (smallest violation, then largest
/// rate) is returned if its violation is within
/// `solver.failure_violation`, and `Error::NonConvergence` otherwise.
pub fn solve(cfg: &SystemConfig, channels: &SecondaryChannels, ens: &CrossLinkEnsemble) -> Result<Solution> {
    let inst = ProblemInstance::new(cfg, channels, ens)?;
    solve_instance(&inst, &cfg.solver)
}

pub fn solve_instance(inst: &ProblemInstance, solver: &crate::config::SolverConfig) -> Result<Solution> {
    let k = inst.n_subcarriers as f64;
    if inst.p_t == 0.0 {
        let allocation = Allocation::silent(inst.n_users, inst.n_subcarriers);
        let mut dual = DualState::new(0.0, 0.0, 0.0, 0.0);
        dual.residual_intf = inst.i_t;
        return Ok(Solution {
            allocation,
            dual,
            diagnostics: Diagnostics {
                converged: true,
                iterations: 0,
                objective: 0.0,
                total_power: 0.0,
                interference: 0.0,
                violation: 0.0,
                trace: Vec::new(),
            },
        });
    }

    let tol = solver.tolerance;
    // Reference multipliers: the water level that spreads each budget
    // evenly over all subcarriers. Steps are relative to them, so one unit
    // of relative residual moves a multiplier by its own scale.
    let mu_ref = k / (LN_2 * inst.p_t);
    let eta_ref = k / (LN_2 * inst.i_t);
    let mut dual = DualState::new(
        mu_ref,
        0.0,
        solver.step_power_scale * mu_ref / inst.p_t,
        solver.step_intf_scale * eta_ref / inst.i_t,
    );
    let mut trace = Vec::with_capacity(solver.max_iter.min(4096));
    let mut best: Option<(f64, f64, Solution)> = None;

    for _ in 0..solver.max_iter {
        let alloc = primal_response(inst, dual.mu, dual.eta)?;
        let total = alloc.total_power();
        let interference = alloc.weighted_interference(&inst.weights);
        let res_p = inst.p_t - total;
        let res_i = inst.i_t - interference;
        let objective = inst.rate(&alloc);
        trace.push(TraceRow {
            iter: dual.iter,
            mu: dual.mu,
            eta: dual.eta,
            residual_power: res_p,
            residual_intf: res_i,
            objective,
        });

        let rel_p = res_p / inst.p_t;
        let rel_i = res_i / inst.i_t;
        let power_ok = rel_p >= -tol && (rel_p <= tol || dual.mu == 0.0);
        let intf_ok = rel_i >= -tol && (rel_i <= tol || dual.eta == 0.0);
        let violation = relative_violation(res_p, res_i, inst.p_t, inst.i_t);

        let mut at = dual;
        at.residual_power = res_p;
        at.residual_intf = res_i;
        let diagnostics = Diagnostics {
            converged: power_ok && intf_ok,
            iterations: dual.iter,
            objective,
            total_power: total,
            interference,
            violation,
            trace: Vec::new(),
        };
        if power_ok && intf_ok {
            let mut diagnostics = diagnostics;
            diagnostics.trace = trace;
            return Ok(Solution { allocation: alloc, dual: at, diagnostics });
        }

        let rank = (violation - tol).max(0.0);
        let better = match &best {
            None => true,
            Some((r, obj, _)) => rank < *r || (rank == *r && objective > *obj),
        };
        let next = subgradient_step(&dual, &alloc, inst.p_t, inst.i_t, &inst.weights);
        if better {
            best = Some((rank, objective, Solution { allocation: alloc, dual: at, diagnostics }));
        }
        dual = next;
    }

    let (_, _, mut sol) = best.expect("at least one iteration");
    if sol.diagnostics.violation > solver.failure_violation {
        return Err(Error::NonConvergence {
            iterations: solver.max_iter,
            violation: sol.diagnostics.violation,
            trace,
        });
    }
    sol.diagnostics.iterations = solver.max_iter;
    sol.diagnostics.trace = trace;
    Ok(sol)
}
