//! Scenario configuration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel_model::EstimationModel;
use crate::error::{Error, Result};

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1e3).log10()
}

/// Dual-decomposition solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Relative constraint residual accepted as converged.
    pub tolerance: f64,
    /// Violation (relative) above which a non-converged run is an error.
    pub failure_violation: f64,
    /// Initial power-multiplier step, relative to `K / (ln2 p_t²)`.
    pub step_power_scale: f64,
    /// Initial interference-multiplier step, relative to `K / (ln2 I_t²)`.
    pub step_intf_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tolerance: 1e-3,
            failure_violation: 1e-2,
            step_power_scale: 1.0,
            step_intf_scale: 1.0,
        }
    }
}

/// All scalars of one scenario. Powers are in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_users: usize,
    pub n_subcarriers: usize,
    /// Average transmit power budget `P_t`.
    pub p_t: f64,
    /// Collision threshold `I^th` at the primary receiver.
    pub i_th: f64,
    /// Maximum collision probability.
    pub epsilon: f64,
    pub rho: f64,
    /// Per-component variance of the cross-link estimate.
    pub var_est: f64,
    /// Per-component variance of the estimation error.
    pub var_err: f64,
    /// Mean of the cross-link estimate (real, imaginary).
    pub cross_mean: [f64; 2],
    /// Receiver noise power.
    pub sigma2_n: f64,
    /// Aggregate primary-to-secondary interference power.
    pub sigma2_ps: f64,
    pub seed: u64,
    pub realizations: usize,
    /// Collision-oracle draws per realization.
    pub mc_samples: usize,
    pub solver: SolverConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let n0 = dbm_to_watts(-110.0);
        Self {
            n_users: 3,
            n_subcarriers: 64,
            p_t: 25.0,
            i_th: 5.0,
            epsilon: 0.30,
            rho: 0.25,
            var_est: 0.1,
            var_err: 0.1,
            cross_mean: [0.05, 0.0],
            sigma2_n: n0,
            sigma2_ps: 2500.0 * n0,
            seed: 20_160_601,
            realizations: 2000,
            mc_samples: 100_000,
            solver: SolverConfig::default(),
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_users < 1 {
            return bad("n_users must be at least 1".into());
        }
        if self.n_subcarriers < 2 {
            return bad(format!(
                "n_subcarriers must be at least 2 (the interference budget is undefined for K = 1), got {}",
                self.n_subcarriers
            ));
        }
        if !(self.p_t >= 0.0) || !self.p_t.is_finite() {
            return bad(format!("p_t must be finite and nonnegative, got {}", self.p_t));
        }
        if !(self.i_th > 0.0) || !self.i_th.is_finite() {
            return bad(format!("i_th must be finite and positive, got {}", self.i_th));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.var_est > 0.0) || !self.var_est.is_finite() {
            return bad(format!("var_est must be positive, got {}", self.var_est));
        }
        if !(self.var_err >= 0.0) || !self.var_err.is_finite() {
            return bad(format!("var_err must be nonnegative, got {}", self.var_err));
        }
        if !self.cross_mean.iter().all(|v| v.is_finite()) {
            return bad("cross_mean must be finite".into());
        }
        if !(self.sigma2_n >= 0.0 && self.sigma2_ps >= 0.0) || self.noise_power() <= 0.0 {
            return bad("noise powers must be nonnegative with a positive sum".into());
        }
        if self.realizations < 1 {
            return bad("realizations must be at least 1".into());
        }
        if self.solver.max_iter < 1 || !(self.solver.tolerance > 0.0) {
            return bad("solver needs max_iter >= 1 and a positive tolerance".into());
        }
        Ok(())
    }

    /// `σ²_n + σ²_ps`.
    pub fn noise_power(&self) -> f64 {
        self.sigma2_n + self.sigma2_ps
    }

    pub fn cross_mean(&self) -> Complex64 {
        Complex64::new(self.cross_mean[0], self.cross_mean[1])
    }

    pub fn estimation_model(&self) -> EstimationModel {
        EstimationModel { rho: self.rho, var_est: self.var_est, var_err: self.var_err }
    }

    /// Deterministic interference budget `I_t` for this scenario.
    pub fn interference_budget(&self) -> Result<f64> {
        crate::interference_stats::interference_budget(self.n_subcarriers, self.i_th, self.epsilon)
    }
}
