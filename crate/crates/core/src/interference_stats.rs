//! Aggregate interference at the primary receiver.
//!
//! The received interference is a weighted sum `Σ β_k |Ξ_k|²` of
//! two-degree noncentral chi-square variables. It is replaced by a single
//! scaled chi-square `ξ χ²_D(δ')` with the same first moment, whose tail is
//! in turn approximated by a central chi-square with an inflated threshold.
//! The deterministic budget `I_t` bounds the weighted mean interference so
//! that the collision probability stays below `ε`.

use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::channel_model::{sample_cross_links, CrossLinkEnsemble};
use crate::config::SystemConfig;
use crate::error::{ensure_finite, Error, Result};
use crate::rng::std_normal;
use crate::special::gamma_q;
use crate::stats::{ks_distance, ProbabilityEstimate};

/// Minimum number of draws accepted by the Monte-Carlo tail oracle.
pub const MIN_ORACLE_SAMPLES: usize = 10_000;

/// Moment-matched replacement `ξ χ²_D(δ')` of the weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareApprox {
    pub weight: f64,
    pub dof: usize,
    pub noncentrality_sum: f64,
}

impl ChiSquareApprox {
    pub fn n_terms(&self) -> usize {
        self.dof / 2
    }

    /// Mean of `ξ χ²_D(δ')`.
    pub fn mean(&self) -> f64 {
        self.weight * (self.dof as f64 + self.noncentrality_sum)
    }

    /// Approximate cdf `1 - tail_probability`.
    pub fn cdf(&self, threshold: f64) -> Result<f64> {
        if threshold <= 0.0 {
            return Ok(0.0);
        }
        tail_probability(self, threshold).map(|t| 1.0 - t)
    }
}

/// Matches the weighted sum to a single scaled noncentral chi-square.
pub fn moment_match(beta: &[f64], noncentrality: &[f64]) -> Result<ChiSquareApprox> {
    if beta.is_empty() {
        return Err(Error::Domain("need at least one subcarrier".into()));
    }
    if beta.len() != noncentrality.len() {
        return Err(Error::Domain(format!(
            "{} weights but {} noncentralities",
            beta.len(),
            noncentrality.len()
        )));
    }
    for (&b, &mu) in beta.iter().zip(noncentrality) {
        ensure_finite("weight", b)?;
        ensure_finite("noncentrality", mu)?;
        if b < 0.0 || mu < 0.0 {
            return Err(Error::Domain("weights and noncentralities must be nonnegative".into()));
        }
    }
    if beta.iter().all(|&b| b == 0.0) {
        return Err(Error::Degenerate("all interference weights are zero".into()));
    }
    let k = beta.len();
    let delta: f64 = noncentrality.iter().sum();
    let first_moment: f64 = beta.iter().zip(noncentrality).map(|(b, mu)| b * (2.0 + mu)).sum();
    Ok(ChiSquareApprox {
        weight: first_moment / (2.0 * k as f64 + delta),
        dof: 2 * k,
        noncentrality_sum: delta,
    })
}

/// Approximate `P(ξ χ²_D(δ') > threshold)` through the central chi-square
/// with the threshold deflated by `1 + δ'/D`.
pub fn tail_probability(approx: &ChiSquareApprox, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) || threshold.is_nan() {
        return Err(Error::Domain(format!("threshold must be positive, got {threshold}")));
    }
    if !(approx.weight > 0.0) || approx.dof == 0 {
        return Err(Error::Degenerate("approximation has no weight".into()));
    }
    let d = approx.dof as f64;
    let x = (threshold / approx.weight) / (1.0 + approx.noncentrality_sum / d);
    let q = gamma_q(d / 2.0, x / 2.0)?;
    Ok(q.clamp(0.0, 1.0))
}

/// Draws a two-degree noncentral chi-square variable.
#[inline]
pub fn sample_noncentral_chi2_2<R: Rng + ?Sized>(noncentrality: f64, rng: &mut R) -> f64 {
    let a = std_normal(rng) + noncentrality.sqrt();
    let b = std_normal(rng);
    a * a + b * b
}

/// Draws `samples` realizations of `Σ β_k |Ξ_k|²`.
pub fn sample_weighted_sum<R: Rng + ?Sized>(
    beta: &[f64],
    noncentrality: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if beta.len() != noncentrality.len() || beta.is_empty() {
        return Err(Error::Domain("weights and noncentralities must be nonempty and equal length".into()));
    }
    let terms: Vec<(f64, f64)> = beta
        .iter()
        .zip(noncentrality)
        .filter(|(b, _)| **b != 0.0)
        .map(|(&b, &mu)| (b, mu))
        .collect();
    Ok((0..samples)
        .map(|_| terms.iter().map(|&(b, mu)| b * sample_noncentral_chi2_2(mu, rng)).sum())
        .collect())
}

/// Monte-Carlo frequency of `Σ β_k |Ξ_k|² > threshold`.
pub fn empirical_sum_tail<R: Rng + ?Sized>(
    beta: &[f64],
    noncentrality: &[f64],
    threshold: f64,
    samples: usize,
    rng: &mut R,
) -> Result<ProbabilityEstimate> {
    if samples < MIN_ORACLE_SAMPLES {
        return Err(Error::Domain(format!(
            "the tail oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {samples}"
        )));
    }
    let draws = sample_weighted_sum(beta, noncentrality, samples, rng)?;
    let hits = draws.iter().filter(|&&s| s > threshold).count() as u64;
    Ok(ProbabilityEstimate::from_counts(hits, samples as u64))
}

/// Deterministic interference budget
/// `I_t = K I^th / ((K!)^{1/K} |ln(1 - (1-ε)^{1/K})|)`.
pub fn interference_budget(k: usize, i_th: f64, epsilon: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "the interference budget holds only for K != 1 subcarriers (K >= 2), got K = {k}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(i_th > 0.0) || !i_th.is_finite() {
        return Err(Error::Domain(format!("i_th must be positive and finite, got {i_th}")));
    }
    let kf = k as f64;
    let factorial_root = (ln_gamma(kf + 1.0) / kf).exp();
    // 1 - (1-ε)^{1/K}, kept accurate for small ε
    let gap = -((-epsilon).ln_1p() / kf).exp_m1();
    Ok(kf * i_th / (factorial_root * gap.ln().abs()))
}

/// Realized normalizer `N^sp = δ² Σ_k (2 + μ_Ξk)`.
pub fn nsp_value(ens: &CrossLinkEnsemble) -> f64 {
    if ens.post_var > 0.0 {
        let s: f64 = ens.noncentrality.iter().map(|mu| 2.0 + mu).sum();
        ens.post_var * s
    } else {
        ens.post_mean.iter().map(|m| m.norm_sqr()).sum()
    }
}

/// Which moment expressions the Gaussian model of `N^sp` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NspMode {
    /// Error term `2K(1-ρ²)²δ²_ΔH` and zero-mean estimates.
    ZeroMeanEstimates,
    /// Moments of the generative model, including a nonzero estimate mean.
    #[default]
    MomentDerived,
}

/// Gaussian approximation of `N^sp` for large `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NspGaussian {
    pub mean: f64,
    pub var: f64,
    pub mode: NspMode,
}

impl NspGaussian {
    pub fn std_dev(&self) -> f64 {
        self.var.sqrt()
    }
}

pub fn nsp_gaussian(cfg: &SystemConfig, mode: NspMode) -> NspGaussian {
    let k = cfg.n_subcarriers as f64;
    let r2 = cfg.rho * cfg.rho;
    let gain = (1.0 + r2) * (1.0 + r2);
    let v = cfg.var_est;
    match mode {
        NspMode::ZeroMeanEstimates => NspGaussian {
            mean: 2.0 * k * v * gain + 2.0 * k * (1.0 - r2) * (1.0 - r2) * cfg.var_err,
            var: 4.0 * k * v * v * gain * gain,
            mode,
        },
        NspMode::MomentDerived => {
            let m2 = cfg.cross_mean().norm_sqr();
            // |Ĥ|² = v χ²_2(|m|²/v): mean 2v + |m|², variance 4v² + 4v|m|²
            NspGaussian {
                mean: k * gain * (2.0 * v + m2) + 2.0 * k * (1.0 - r2) * cfg.var_err,
                var: k * gain * gain * (4.0 * v * v + 4.0 * v * m2),
                mode,
            }
        }
    }
}

/// Distribution of the interference weights `β_k` in the approximation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum WeightLaw {
    /// Noncentral chi-square with `dof` degrees of freedom, shifted right
    /// by `shift`.
    ChiSquare { dof: usize, noncentrality: f64, shift: f64 },
    /// Gamma with shape and scale, shifted right by `shift`.
    ShiftedGamma { shape: f64, scale: f64, shift: f64 },
}

impl WeightLaw {
    /// Chi-Square(2, 2): two degrees of freedom, location 2, read like
    /// the trailing location of the gamma regime.
    pub fn chi_square_regime() -> Self {
        WeightLaw::ChiSquare { dof: 2, noncentrality: 0.0, shift: 2.0 }
    }

    /// Gamma(2, 0.5, 4): shape 2, scale 0.5, location 4.
    pub fn gamma_regime() -> Self {
        WeightLaw::ShiftedGamma { shape: 2.0, scale: 0.5, shift: 4.0 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match *self {
            WeightLaw::ChiSquare { dof, noncentrality, shift } => {
                if dof == 0 || !(noncentrality >= 0.0) || !(shift >= 0.0) {
                    return Err(Error::Config(
                        "chi-square weights need dof >= 1, noncentrality >= 0 and shift >= 0".into(),
                    ));
                }
                let first = std_normal(rng) + noncentrality.sqrt();
                let rest: f64 = (1..dof).map(|_| std_normal(rng).powi(2)).sum();
                Ok(shift + first * first + rest)
            }
            WeightLaw::ShiftedGamma { shape, scale, shift } => {
                let g = Gamma::new(shape, scale)
                    .map_err(|e| Error::Config(format!("invalid gamma weight law: {e}")))?;
                Ok(shift + rng.sample(g))
            }
        }
    }
}

/// Outcome of comparing the moment-matched cdf with the empirical one.
#[derive(Debug, Clone)]
pub struct ApproxCheck {
    pub beta: Vec<f64>,
    pub noncentrality: Vec<f64>,
    pub approx: ChiSquareApprox,
    /// Sorted Monte-Carlo draws of the weighted sum.
    pub samples: Vec<f64>,
    pub ks_distance: f64,
}

/// Draws weights from `law` and noncentralities from the scenario's
/// cross-link estimates (with posterior variance `post_var`), then measures
/// the KS distance between the empirical and approximate cdfs.
/// `weight_scale` multiplies `ξ` (1 for the real check).
pub fn approx_check<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    law: WeightLaw,
    post_var: f64,
    samples: usize,
    weight_scale: f64,
    rng: &mut R,
) -> Result<ApproxCheck> {
    if !(post_var > 0.0) {
        return Err(Error::Config(format!("post_var must be positive, got {post_var}")));
    }
    let ens = sample_cross_links(cfg, rng)?;
    let noncentrality: Vec<f64> = ens.post_mean.iter().map(|m| m.norm_sqr() / post_var).collect();
    let beta = (0..cfg.n_subcarriers).map(|_| law.sample(rng)).collect::<Result<Vec<_>>>()?;
    let mut approx = moment_match(&beta, &noncentrality)?;
    approx.weight *= weight_scale;
    let mut draws = sample_weighted_sum(&beta, &noncentrality, samples, rng)?;
    let ks = ks_distance(&mut draws, |x| approx.cdf(x).unwrap_or(f64::NAN));
    Ok(ApproxCheck { beta, noncentrality, approx, samples: draws, ks_distance: ks })
}
