//! Scenario runs, parameter sweeps and the collision oracle.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_model::{sample_secondary_means, sample_true_cross_link, CrossLinkEnsemble};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::resource_allocator::{solve_instance, Allocation, ProblemInstance};
use crate::rng::{substream, Stream};
use crate::sinr_model::sample_realization;
use crate::stats::{pairwise_sum, MeanEstimate, ProbabilityEstimate};

/// Minimum draws accepted by the stand-alone collision oracle.
pub const MIN_COLLISION_SAMPLES: usize = 10_000;

/// Counts draws of the true cross-links (from their posteriors) for which
/// the received interference `Σ_k (Σ_n φP) |H_k|²` exceeds `i_th`.
pub fn count_collisions<R: Rng + ?Sized>(
    alloc: &Allocation,
    ens: &CrossLinkEnsemble,
    i_th: f64,
    samples: usize,
    rng: &mut R,
) -> Result<u64> {
    if alloc.n_subcarriers != ens.len() {
        return Err(Error::Domain("allocation and ensemble disagree on K".into()));
    }
    let active: Vec<(usize, f64)> = alloc
        .subcarrier_powers()
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 0.0)
        .collect();
    if active.is_empty() {
        return Ok(0);
    }
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut received = 0.0;
        for &(k, p) in &active {
            received += p * sample_true_cross_link(ens, k, rng)?.norm_sqr();
        }
        if received > i_th {
            hits += 1;
        }
    }
    Ok(hits)
}

/// Empirical collision probability of an allocation with its binomial
/// standard error.
pub fn collision_oracle<R: Rng + ?Sized>(
    alloc: &Allocation,
    ens: &CrossLinkEnsemble,
    i_th: f64,
    samples: usize,
    rng: &mut R,
) -> Result<ProbabilityEstimate> {
    if samples < MIN_COLLISION_SAMPLES {
        return Err(Error::Domain(format!(
            "the collision oracle needs at least {MIN_COLLISION_SAMPLES} samples, got {samples}"
        )));
    }
    if !(i_th > 0.0) {
        return Err(Error::Domain(format!("i_th must be positive, got {i_th}")));
    }
    let hits = count_collisions(alloc, ens, i_th, samples, rng)?;
    Ok(ProbabilityEstimate::from_counts(hits, samples as u64))
}

/// Outcome of one channel realization inside a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub rate: f64,
    pub converged: bool,
    /// Solver gave up with a violation above the failure threshold.
    pub failed: bool,
    pub iterations: usize,
    pub total_power: f64,
    pub interference: f64,
    pub nsp: f64,
    pub collisions: u64,
    pub trials: u64,
}

pub const DIAGNOSTICS_CSV_HEADER: &str =
    "realization,rate,converged,failed,iterations,total_power,interference,nsp,collisions,trials";

impl RealizationRecord {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.index,
            self.rate,
            u8::from(self.converged),
            u8::from(self.failed),
            self.iterations,
            self.total_power,
            self.interference,
            self.nsp,
            self.collisions,
            self.trials
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub rate: MeanEstimate,
    pub collision: ProbabilityEstimate,
    pub converged_fraction: f64,
    pub failed: usize,
    /// Cross-realization average of the transmitted power.
    pub mean_power: f64,
    pub mean_iterations: f64,
    pub interference_budget: f64,
    pub realizations: Vec<RealizationRecord>,
}

fn run_realization(cfg: &SystemConfig, means: &[f64], index: usize) -> Result<RealizationRecord> {
    let mut stream = substream(cfg.seed, Stream::Realization, index as u64);
    let (channels, ens) = sample_realization(cfg, means, &mut stream)?;
    let inst = ProblemInstance::new(cfg, &channels, &ens)?;
    let mut record = RealizationRecord {
        index,
        rate: 0.0,
        converged: false,
        failed: false,
        iterations: 0,
        total_power: 0.0,
        interference: 0.0,
        nsp: inst.nsp,
        collisions: 0,
        trials: 0,
    };
    let solution = match solve_instance(&inst, &cfg.solver) {
        Ok(s) => s,
        Err(Error::NonConvergence { iterations, .. }) => {
            record.failed = true;
            record.iterations = iterations;
            return Ok(record);
        }
        Err(e) => return Err(e),
    };
    let d = &solution.diagnostics;
    record.rate = inst.rate(&solution.allocation);
    record.converged = d.converged;
    record.iterations = d.iterations;
    record.total_power = d.total_power;
    record.interference = d.interference;
    if cfg.mc_samples > 0 {
        let mut crng = substream(cfg.seed, Stream::Collision, index as u64);
        record.collisions = count_collisions(&solution.allocation, &ens, cfg.i_th, cfg.mc_samples, &mut crng)?;
        record.trials = cfg.mc_samples as u64;
    }
    Ok(record)
}

/// Runs every realization of a scenario: channel draw, allocation, rate
/// and collision counting. Deterministic for a given `cfg.seed`
/// regardless of the worker count.
pub fn run_scenario(cfg: &SystemConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let i_t = cfg.interference_budget()?;
    let means = sample_secondary_means(
        cfg.n_users,
        cfg.n_subcarriers,
        &mut substream(cfg.seed, Stream::ScenarioMeans, 0),
    );
    let records: Vec<Result<RealizationRecord>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| run_realization(cfg, &means, r))
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;

    let usable: Vec<&RealizationRecord> = records.iter().filter(|r| !r.failed).collect();
    let rates: Vec<f64> = usable.iter().map(|r| r.rate).collect();
    let powers: Vec<f64> = usable.iter().map(|r| r.total_power).collect();
    let iters: Vec<f64> = records.iter().map(|r| r.iterations as f64).collect();
    let events: u64 = usable.iter().map(|r| r.collisions).sum();
    let trials: u64 = usable.iter().map(|r| r.trials).sum();
    let converged = records.iter().filter(|r| r.converged).count();
    let n = records.len() as f64;

    Ok(ScenarioResult {
        rate: MeanEstimate::from_samples(&rates),
        collision: ProbabilityEstimate::from_counts(events, trials),
        converged_fraction: converged as f64 / n,
        failed: records.len() - usable.len(),
        mean_power: if powers.is_empty() { 0.0 } else { pairwise_sum(&powers) / powers.len() as f64 },
        mean_iterations: pairwise_sum(&iters) / n,
        interference_budget: i_t,
        realizations: records,
    })
}

/// Per-scenario diagnostics as CSV (header row included).
pub fn diagnostics_csv(result: &ScenarioResult) -> String {
    let mut out = String::from(DIAGNOSTICS_CSV_HEADER);
    out.push('\n');
    for r in &result.realizations {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Scenario parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    ITh,
    Epsilon,
    Rho,
    PT,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::ITh => "i_th",
            SweepVariable::Epsilon => "epsilon",
            SweepVariable::Rho => "rho",
            SweepVariable::PT => "p_t",
        }
    }

    pub fn apply(&self, cfg: &mut SystemConfig, value: f64) {
        match self {
            SweepVariable::ITh => cfg.i_th = value,
            SweepVariable::Epsilon => cfg.epsilon = value,
            SweepVariable::Rho => cfg.rho = value,
            SweepVariable::PT => cfg.p_t = value,
        }
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i_th" => Ok(SweepVariable::ITh),
            "epsilon" => Ok(SweepVariable::Epsilon),
            "rho" => Ok(SweepVariable::Rho),
            "p_t" => Ok(SweepVariable::PT),
            other => Err(Error::Config(format!(
                "unknown sweep variable '{other}' (expected i_th, epsilon, rho or p_t)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub base: SystemConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep grid values must be finite".into()));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep grid must be strictly increasing".into()));
        }
        for &v in &self.grid {
            let mut cfg = self.base.clone();
            self.variable.apply(&mut cfg, v);
            cfg.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub rate_mean: f64,
    pub rate_se: f64,
    pub collision_prob: f64,
    pub collision_se: f64,
    pub converged_fraction: f64,
    pub mean_power: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_COLUMNS: &str =
    "rate_mean,rate_se,collision_prob,collision_se,converged_fraction,mean_power,mean_iterations";

impl SweepResult {
    /// CSV body: header row named after the swept variable, then one row
    /// per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.variable.name(), SWEEP_CSV_COLUMNS);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.value,
                r.rate_mean,
                r.rate_se,
                r.collision_prob,
                r.collision_se,
                r.converged_fraction,
                r.mean_power,
                r.mean_iterations
            );
        }
        out
    }
}

impl SweepRow {
    pub fn from_scenario(value: f64, res: &ScenarioResult) -> Self {
        SweepRow {
            value,
            rate_mean: res.rate.mean,
            rate_se: res.rate.std_error,
            collision_prob: res.collision.probability,
            collision_se: res.collision.std_error,
            converged_fraction: res.converged_fraction,
            mean_power: res.mean_power,
            mean_iterations: res.mean_iterations,
        }
    }
}

/// Runs one scenario per grid point, all sharing the base seed, and keeps
/// the per-realization records.
pub fn run_sweep_scenarios(spec: &SweepSpec) -> Result<Vec<(f64, ScenarioResult)>> {
    spec.validate()?;
    spec.grid
        .iter()
        .map(|&v| {
            let mut cfg = spec.base.clone();
            spec.variable.apply(&mut cfg, v);
            Ok((v, run_scenario(&cfg)?))
        })
        .collect()
}

/// Runs one scenario per grid point, all sharing the base seed.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let rows = run_sweep_scenarios(spec)?
        .iter()
        .map(|(v, res)| SweepRow::from_scenario(*v, res))
        .collect();
    Ok(SweepResult { variable: spec.variable, rows })
}
