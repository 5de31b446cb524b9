//! Channel generation and posterior cross-link statistics.
//!
//! A complex Gaussian with "variance" `σ²` has independent real and
//! imaginary parts of variance `σ²` each, so `E|X - m|² = 2σ²`. The
//! estimate `Ĥ` is the primitive random quantity; the estimation error and
//! the true cross-link are generated from their posteriors given `Ĥ`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, Uniform};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{ensure_finite, Error, Result};
use crate::rng::std_normal;

/// Upper end of the uniform law of secondary-link mean power gains.
pub const SECONDARY_MEAN_MAX: f64 = 2.0;

/// Statistics of the cross-link estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationModel {
    /// Correlation between estimate and error, in `[0, 1)`.
    pub rho: f64,
    pub var_est: f64,
    pub var_err: f64,
}

impl EstimationModel {
    pub fn new(rho: f64, var_est: f64, var_err: f64) -> Result<Self> {
        let m = Self { rho, var_est, var_err };
        m.validate()?;
        Ok(m)
    }

    /// Checks the invariants. `rho = 1` is accepted as the perfect-correlation
    /// limit, where the posterior collapses to a point.
    pub fn validate(&self) -> Result<()> {
        ensure_finite("rho", self.rho)?;
        ensure_finite("var_est", self.var_est)?;
        ensure_finite("var_err", self.var_err)?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Domain(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if self.var_est <= 0.0 {
            return Err(Error::Domain(format!("var_est must be positive, got {}", self.var_est)));
        }
        if self.var_err < 0.0 {
            return Err(Error::Domain(format!("var_err must be nonnegative, got {}", self.var_err)));
        }
        Ok(())
    }

    fn rho2(&self) -> f64 {
        self.rho * self.rho
    }

    /// Posterior variance shared by the error and the true link.
    pub fn posterior_variance(&self) -> f64 {
        (1.0 - self.rho2()).max(0.0) * self.var_err
    }
}

/// Correlation factor from the error variance and the true-link variance.
pub fn correlation_factor(var_err: f64, var_true: f64) -> Result<f64> {
    ensure_finite("var_err", var_err)?;
    ensure_finite("var_true", var_true)?;
    if var_err < 0.0 || var_true <= 0.0 {
        return Err(Error::Domain(format!(
            "need var_err >= 0 and var_true > 0, got {var_err} and {var_true}"
        )));
    }
    Ok((var_err / (var_err + var_true)).sqrt())
}

/// Posterior mean and variance of the estimation error given the estimate.
pub fn posterior_error_stats(est: Complex64, model: &EstimationModel) -> Result<(Complex64, f64)> {
    model.validate()?;
    check_gain(est)?;
    Ok((est * model.rho2(), model.posterior_variance()))
}

/// Posterior mean and variance of the true cross-link given the estimate.
pub fn posterior_true_link_stats(
    est: Complex64,
    model: &EstimationModel,
) -> Result<(Complex64, f64)> {
    model.validate()?;
    check_gain(est)?;
    Ok((est * (1.0 + model.rho2()), model.posterior_variance()))
}

fn check_gain(g: Complex64) -> Result<()> {
    if g.re.is_finite() && g.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("channel gain must be finite, got {g}")))
    }
}

/// Estimated cross-links of one channel realization with their posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLinkEnsemble {
    pub est_gain: Vec<Complex64>,
    pub post_mean: Vec<Complex64>,
    pub post_var: f64,
    /// `|post_mean|² / post_var`; zero where the estimate is zero.
    pub noncentrality: Vec<f64>,
}

impl CrossLinkEnsemble {
    pub fn from_estimates(est_gain: Vec<Complex64>, model: &EstimationModel) -> Result<Self> {
        if est_gain.is_empty() {
            return Err(Error::Domain("an ensemble needs at least one subcarrier".into()));
        }
        let mut post_mean = Vec::with_capacity(est_gain.len());
        let mut post_var = model.posterior_variance();
        for &est in &est_gain {
            let (mean, var) = posterior_true_link_stats(est, model)?;
            post_mean.push(mean);
            post_var = var;
        }
        let noncentrality = post_mean
            .iter()
            .map(|m| {
                let m2 = m.norm_sqr();
                if m2 == 0.0 {
                    0.0
                } else {
                    m2 / post_var
                }
            })
            .collect();
        Ok(Self { est_gain, post_mean, post_var, noncentrality })
    }

    pub fn len(&self) -> usize {
        self.est_gain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.est_gain.is_empty()
    }

    /// Per-subcarrier interference weights `δ²(2 + μ_Ξk) = 2δ² + |μ_k|²`,
    /// i.e. the mean received power per unit transmit power.
    pub fn interference_weights(&self) -> Vec<f64> {
        self.post_mean
            .iter()
            .map(|m| 2.0 * self.post_var + m.norm_sqr())
            .collect()
    }
}

/// Draws one ensemble of cross-link estimates for the scenario.
pub fn sample_cross_links<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<CrossLinkEnsemble> {
    if cfg.n_subcarriers == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let model = cfg.estimation_model();
    model.validate()?;
    let mean = cfg.cross_mean();
    let sd = cfg.var_est.sqrt();
    let est = (0..cfg.n_subcarriers)
        .map(|_| {
            let re = std_normal(rng);
            let im = std_normal(rng);
            mean + Complex64::new(re, im) * sd
        })
        .collect();
    CrossLinkEnsemble::from_estimates(est, &model)
}

/// Draws the true cross-link on subcarrier `k` from its posterior.
pub fn sample_true_cross_link<R: Rng + ?Sized>(
    ens: &CrossLinkEnsemble,
    k: usize,
    rng: &mut R,
) -> Result<Complex64> {
    let mean = *ens
        .post_mean
        .get(k)
        .ok_or(Error::IndexOutOfRange { index: k, len: ens.len() })?;
    if ens.post_var == 0.0 {
        return Ok(mean);
    }
    let sd = ens.post_var.sqrt();
    let re = std_normal(rng);
    let im = std_normal(rng);
    Ok(mean + Complex64::new(re, im) * sd)
}

/// Secondary-secondary power gains, stored row-major by user.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryChannels {
    pub n_users: usize,
    pub n_subcarriers: usize,
    pub gain2: Vec<f64>,
    pub mean2: Vec<f64>,
}

impl SecondaryChannels {
    /// Draws exponential power gains (Rayleigh magnitudes) around fixed means.
    pub fn draw<R: Rng + ?Sized>(
        n_users: usize,
        n_subcarriers: usize,
        mean2: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        if n_users == 0 || n_subcarriers == 0 {
            return Err(Error::Domain("need at least one user and one subcarrier".into()));
        }
        if mean2.len() != n_users * n_subcarriers {
            return Err(Error::Domain(format!(
                "expected {} mean gains, got {}",
                n_users * n_subcarriers,
                mean2.len()
            )));
        }
        if mean2.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::Domain("mean gains must be positive and finite".into()));
        }
        let gain2 = mean2
            .iter()
            .map(|&m| {
                let e: f64 = rng.sample(Exp1);
                m * e
            })
            .collect();
        Ok(Self { n_users, n_subcarriers, gain2, mean2 })
    }

    #[inline]
    pub fn gain2(&self, n: usize, k: usize) -> f64 {
        self.gain2[n * self.n_subcarriers + k]
    }

    #[inline]
    pub fn mean2(&self, n: usize, k: usize) -> f64 {
        self.mean2[n * self.n_subcarriers + k]
    }

    /// Same channel with every power gain scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.gain2.iter_mut().for_each(|g| *g *= factor);
        out
    }
}

/// Per-scenario mean power gains, uniform on `(0, 2)`.
pub fn sample_secondary_means<R: Rng + ?Sized>(
    n_users: usize,
    n_subcarriers: usize,
    rng: &mut R,
) -> Vec<f64> {
    let law = Uniform::new(0.0, SECONDARY_MEAN_MAX).expect("valid range");
    (0..n_users * n_subcarriers)
        .map(|_| loop {
            let m: f64 = rng.sample(law);
            if m > 0.0 {
                break m;
            }
        })
        .collect()
}

/// Draws means and one realization of gains for the scenario.
pub fn sample_secondary_gains<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SecondaryChannels> {
    if cfg.n_users == 0 || cfg.n_subcarriers == 0 {
        return Err(Error::Domain("need N >= 1 and K >= 1".into()));
    }
    let means = sample_secondary_means(cfg.n_users, cfg.n_subcarriers, rng);
    SecondaryChannels::draw(cfg.n_users, cfg.n_subcarriers, means, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn correlation_factor_examples() {
        assert_eq!(correlation_factor(0.0, 0.1).unwrap(), 0.0);
        assert_relative_eq!(correlation_factor(0.1, 0.1).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        let rho = correlation_factor(0.03, 0.1).unwrap();
        assert_relative_eq!(rho, (3.0f64 / 13.0).sqrt(), epsilon = 1e-15);
        // inverting: var_err = rho² var_true / (1 - rho²)
        let back = rho * rho * 0.1 / (1.0 - rho * rho);
        assert_relative_eq!(back, 0.03, epsilon = 1e-15);
        assert!((0.0..1.0).contains(&rho));
    }

    #[test]
    fn correlation_factor_rejects_bad_input() {
        assert!(correlation_factor(-0.1, 0.1).is_err());
        assert!(correlation_factor(0.1, 0.0).is_err());
        assert!(correlation_factor(f64::NAN, 0.1).is_err());
        assert!(correlation_factor(0.1, f64::INFINITY).is_err());
    }

    #[test]
    fn posterior_error_examples() {
        let m = EstimationModel::new(0.0, 0.1, 0.2).unwrap();
        assert_eq!(posterior_error_stats(c(1.0, 0.0), &m).unwrap(), (c(0.0, 0.0), 0.2));
        let m = EstimationModel::new(1.0, 0.1, 0.2).unwrap();
        assert_eq!(posterior_error_stats(c(2.0, 0.0), &m).unwrap(), (c(2.0, 0.0), 0.0));
        let m = EstimationModel::new(0.5, 0.1, 0.4).unwrap();
        let (mean, var) = posterior_error_stats(c(1.0, 1.0), &m).unwrap();
        assert_relative_eq!(mean.re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(mean.im, 0.25, epsilon = 1e-15);
        assert_relative_eq!(var, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn posterior_true_link_examples() {
        let m = EstimationModel::new(0.0, 0.1, 0.2).unwrap();
        assert_eq!(posterior_true_link_stats(c(1.0, 0.0), &m).unwrap(), (c(1.0, 0.0), 0.2));
        let m = EstimationModel::new(1.0, 0.1, 0.2).unwrap();
        assert_eq!(posterior_true_link_stats(c(1.0, 0.0), &m).unwrap(), (c(2.0, 0.0), 0.0));
        let m = EstimationModel::new(0.25, 0.1, 0.1).unwrap();
        let (mean, var) = posterior_true_link_stats(c(0.5, -0.5), &m).unwrap();
        assert_relative_eq!(mean.re, 0.53125, epsilon = 1e-15);
        assert_relative_eq!(mean.im, -0.53125, epsilon = 1e-15);
        assert_relative_eq!(var, 0.09375, epsilon = 1e-15);
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(EstimationModel::new(1.5, 0.1, 0.1).is_err());
        assert!(EstimationModel::new(0.5, 0.0, 0.1).is_err());
        assert!(EstimationModel::new(0.5, 0.1, -0.1).is_err());
        let m = EstimationModel { rho: -0.1, var_est: 0.1, var_err: 0.1 };
        assert!(posterior_error_stats(c(1.0, 0.0), &m).is_err());
    }

    #[test]
    fn zero_rho_ensemble_noncentrality() {
        let cfg = SystemConfig { rho: 0.0, ..SystemConfig::default() };
        let mut rng = substream(1, Stream::Oracle, 0);
        let ens = sample_cross_links(&cfg, &mut rng).unwrap();
        assert_eq!(ens.len(), cfg.n_subcarriers);
        for (est, mu) in ens.est_gain.iter().zip(&ens.noncentrality) {
            assert_relative_eq!(*mu, est.norm_sqr() / cfg.var_err, max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_estimate_has_zero_noncentrality() {
        let m = EstimationModel::new(0.4, 0.1, 0.1).unwrap();
        let ens = CrossLinkEnsemble::from_estimates(vec![c(0.0, 0.0), c(0.1, 0.0)], &m).unwrap();
        assert_eq!(ens.noncentrality[0], 0.0);
        assert!(ens.noncentrality[1] > 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = SystemConfig::default();
        let a = sample_cross_links(&cfg, &mut substream(9, Stream::Realization, 2)).unwrap();
        let b = sample_cross_links(&cfg, &mut substream(9, Stream::Realization, 2)).unwrap();
        assert_eq!(a, b);
        let g1 = sample_secondary_gains(&cfg, &mut substream(9, Stream::Realization, 2)).unwrap();
        let g2 = sample_secondary_gains(&cfg, &mut substream(9, Stream::Realization, 2)).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn zero_dimensions_rejected() {
        let cfg = SystemConfig { n_subcarriers: 0, ..SystemConfig::default() };
        let mut rng = substream(1, Stream::Oracle, 0);
        assert!(sample_cross_links(&cfg, &mut rng).is_err());
        assert!(sample_secondary_gains(&cfg, &mut rng).is_err());
    }

    #[test]
    fn degenerate_posterior_returns_mean() {
        let m = EstimationModel::new(0.3, 0.1, 0.0).unwrap();
        let ens = CrossLinkEnsemble::from_estimates(vec![c(0.2, -0.1)], &m).unwrap();
        let mut rng = substream(3, Stream::Oracle, 0);
        assert_eq!(sample_true_cross_link(&ens, 0, &mut rng).unwrap(), ens.post_mean[0]);
        assert!(matches!(
            sample_true_cross_link(&ens, 1, &mut rng),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        ));
    }

    #[test]
    fn secondary_gains_nonnegative() {
        let cfg = SystemConfig::default();
        let ch = sample_secondary_gains(&cfg, &mut substream(5, Stream::Oracle, 0)).unwrap();
        assert!(ch.gain2.iter().all(|&g| g >= 0.0));
        assert!(ch.mean2.iter().all(|&m| m > 0.0 && m < SECONDARY_MEAN_MAX));
    }
}
