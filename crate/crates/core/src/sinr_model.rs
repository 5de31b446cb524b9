//! Distribution of the normalized SINR and the ergodic sum rate.
//!
//! The normalized SINR of user `n` on subcarrier `k` is
//! `γ = min(P_t/K, I_t/N^sp) |H^ss|² / σ²`. With an exponential power gain
//! and a Gaussian model of `N^sp`, its cdf has the closed form evaluated by
//! [`sinr_cdf`].

use std::f64::consts::SQRT_2;

use rand::{Rng, RngCore};
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel_model::{sample_cross_links, sample_secondary_means, CrossLinkEnsemble, SecondaryChannels};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::interference_stats::{nsp_gaussian, nsp_value, NspGaussian, NspMode};
use crate::resource_allocator::{Allocation, ProblemInstance};
use crate::rng::{substream, Stream};
use crate::special::{erfc, exp_times_erfc};
use crate::stats::MeanEstimate;

/// Tolerance outside `[0, 1]` that is clamped silently.
pub const CDF_CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinrParams {
    pub p_t: f64,
    pub i_t: f64,
    pub k: usize,
    /// `σ²_n + σ²_ps`.
    pub sigma2: f64,
    /// Mean secondary power gain `μ_{|H^ss|²}`.
    pub mean_gain: f64,
    pub nsp: NspGaussian,
}

impl SinrParams {
    pub fn from_config(cfg: &SystemConfig, mean_gain: f64, mode: NspMode) -> Result<Self> {
        let p = Self {
            p_t: cfg.p_t,
            i_t: cfg.interference_budget()?,
            k: cfg.n_subcarriers,
            sigma2: cfg.noise_power(),
            mean_gain,
            nsp: nsp_gaussian(cfg, mode),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.p_t, self.i_t, self.sigma2, self.mean_gain];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.k == 0 {
            return Err(Error::Domain(format!("SINR parameters must be positive: {self:?}")));
        }
        if !(self.nsp.var >= 0.0) || !self.nsp.mean.is_finite() {
            return Err(Error::Domain("N^sp model needs a finite mean and nonnegative variance".into()));
        }
        Ok(())
    }

    /// `I_t K / P_t`, the value of `N^sp` at which the two power ceilings meet.
    pub fn crossover(&self) -> f64 {
        self.i_t * self.k as f64 / self.p_t
    }
}

/// Normalized SINR `min(P_t/K, I_t/N^sp) |H^ss|² / σ²`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct NormalizedSinr(pub f64);

impl NormalizedSinr {
    pub fn new(p_t: f64, i_t: f64, k: usize, nsp: f64, gain2: f64, sigma2: f64) -> Self {
        let ceiling = (p_t / k as f64).min(i_t / nsp);
        NormalizedSinr(ceiling * gain2 / sigma2)
    }
}

/// Unclamped closed-form cdf.
pub fn sinr_cdf_raw(gamma: f64, params: &SinrParams) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("SINR threshold must be nonnegative, got {gamma}")));
    }
    if gamma.is_infinite() {
        return Ok(1.0);
    }
    let c = params.crossover();
    let mu_n = params.nsp.mean;
    let sd = params.nsp.std_dev();
    let scaled = gamma * params.sigma2 / params.mean_gain;
    let power_branch = (-(params.k as f64) * scaled / params.p_t).exp();
    // exponent rate of the interference branch: Γσ²/(μ I_t)
    let a = scaled / params.i_t;

    if sd == 0.0 {
        let tail = if mu_n <= c { power_branch } else { (-a * mu_n).exp() };
        return Ok(1.0 - tail);
    }

    // ½ e^{..}[1 + erf(u)] with 1 + erf(u) = erfc(-u)
    let u = (c - mu_n) / (SQRT_2 * sd);
    let first = 0.5 * power_branch * erfc(-u);
    // ½ exp(-a μ_N + a² δ²/2) [1 - erf(z)], z = u + a δ / √2
    let exponent = -a * mu_n + 0.5 * a * a * sd * sd;
    let z = u + a * sd / SQRT_2;
    let second = 0.5 * exp_times_erfc(exponent, z);
    Ok(1.0 - first - second)
}

/// Closed-form cdf of the normalized SINR, clamped to `[0, 1]`.
pub fn sinr_cdf(gamma: f64, params: &SinrParams) -> Result<f64> {
    let raw = sinr_cdf_raw(gamma, params)?;
    if !raw.is_finite() {
        return Err(Error::Numerical(format!("SINR cdf is {raw} at {gamma}")));
    }
    if !(-CDF_CLAMP_TOL..=1.0 + CDF_CLAMP_TOL).contains(&raw) {
        log::warn!("SINR cdf {raw:.3e} at gamma = {gamma:.6e} outside [0, 1] beyond tolerance");
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Density by central difference of [`sinr_cdf`].
pub fn sinr_pdf(gamma: f64, params: &SinrParams) -> Result<f64> {
    if !(gamma > 0.0) || gamma.is_infinite() {
        return Err(Error::Domain(format!("SINR density needs gamma > 0, got {gamma}")));
    }
    let h = (1e-6f64).max(1e-6 * gamma);
    let lo = (gamma - h).max(0.0);
    let hi = gamma + h;
    let d = (sinr_cdf(hi, params)? - sinr_cdf(lo, params)?) / (hi - lo);
    if d < -CDF_CLAMP_TOL {
        log::warn!("negative SINR density {d:.3e} at gamma = {gamma:.6e}");
    }
    Ok(d.max(0.0))
}

/// Draws `samples` normalized SINRs for one user with mean gain
/// `mean_gain`, recomputing `N^sp` from a fresh ensemble each time.
pub fn sample_normalized_sinr(
    cfg: &SystemConfig,
    mean_gain: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let i_t = cfg.interference_budget()?;
    let sigma2 = cfg.noise_power();
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, Stream::Oracle, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let ens = sample_cross_links(cfg, &mut rng)?;
                let nsp = nsp_value(&ens);
                let e: f64 = rng.sample(Exp1);
                let g = NormalizedSinr::new(cfg.p_t, i_t, cfg.n_subcarriers, nsp, mean_gain * e, sigma2);
                out.push(g.0);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(samples);
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// Channel state handed to an allocation policy.
pub struct RealizationView<'a> {
    pub cfg: &'a SystemConfig,
    pub channels: &'a SecondaryChannels,
    pub ensemble: &'a CrossLinkEnsemble,
    pub instance: &'a ProblemInstance,
}

/// Draws one realization of the scenario's channels.
pub fn sample_realization(
    cfg: &SystemConfig,
    means: &[f64],
    rng: &mut dyn RngCore,
) -> Result<(SecondaryChannels, CrossLinkEnsemble)> {
    let ens = sample_cross_links(cfg, rng)?;
    let channels = SecondaryChannels::draw(cfg.n_users, cfg.n_subcarriers, means.to_vec(), rng)?;
    Ok((channels, ens))
}

/// Monte-Carlo ergodic sum rate of an allocation policy.
///
/// Mean gains are drawn once from `rng`; every realization then uses its
/// own substream, so the estimate is independent of thread count.
pub fn ergodic_rate_mc<R, F>(alloc_fn: F, cfg: &SystemConfig, realizations: usize, rng: &mut R) -> Result<MeanEstimate>
where
    R: Rng + ?Sized,
    F: Fn(&RealizationView<'_>) -> Result<Allocation> + Sync,
{
    if realizations < 100 {
        return Err(Error::Domain(format!("need at least 100 realizations, got {realizations}")));
    }
    cfg.validate()?;
    let means = sample_secondary_means(cfg.n_users, cfg.n_subcarriers, rng);
    let seed: u64 = rng.random();
    let rates: Vec<Result<f64>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let mut stream = substream(seed, Stream::Realization, r as u64);
            let (channels, ensemble) = sample_realization(cfg, &means, &mut stream)?;
            let instance = ProblemInstance::new(cfg, &channels, &ensemble)?;
            let view = RealizationView { cfg, channels: &channels, ensemble: &ensemble, instance: &instance };
            let alloc = alloc_fn(&view)?;
            alloc.validate()?;
            Ok(instance.rate(&alloc))
        })
        .collect();
    let rates = rates.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MeanEstimate::from_samples(&rates))
}
