//! Layered run configuration: built-in preset or TOML file, then `--set`
//! overrides, then `--seed`.

use std::fs;
use std::path::Path;

use cogniplan::config::dbm_to_watts;
use cogniplan::interference_stats::{NspMode, WeightLaw};
use cogniplan::{SolverConfig, SweepVariable, SystemConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::CliError;

const PRESETS: &[(&str, &str)] = &[
    ("default", include_str!("../presets/default.toml")),
    ("fig2a", include_str!("../presets/fig2a.toml")),
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub system: SystemSection,
    pub noise: NoiseSection,
    pub solver: SolverConfig,
    pub approx: ApproxSection,
    pub cdf: CdfSection,
    pub allocate: AllocateSection,
    pub sweep: SweepSection,
    pub validate: ValidateSection,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub n_users: usize,
    pub n_subcarriers: usize,
    pub p_t: f64,
    pub i_th: f64,
    pub epsilon: f64,
    pub rho: f64,
    pub var_est: f64,
    pub var_err: f64,
    pub cross_mean: [f64; 2],
    pub seed: u64,
    pub realizations: usize,
    pub mc_samples: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        let d = SystemConfig::default();
        Self {
            n_users: d.n_users,
            n_subcarriers: d.n_subcarriers,
            p_t: d.p_t,
            i_th: d.i_th,
            epsilon: d.epsilon,
            rho: d.rho,
            var_est: d.var_est,
            var_err: d.var_err,
            cross_mean: d.cross_mean,
            seed: d.seed,
            realizations: d.realizations,
            mc_samples: d.mc_samples,
        }
    }
}

/// Noise floor in dBm; primary interference as a multiple of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub n0_dbm: f64,
    pub ps_over_n0: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { n0_dbm: -110.0, ps_over_n0: 2500.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ChiSquare,
    Gamma,
}

impl Regime {
    pub fn law(self) -> WeightLaw {
        match self {
            Regime::ChiSquare => WeightLaw::chi_square_regime(),
            Regime::Gamma => WeightLaw::gamma_regime(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxSection {
    pub regime: Regime,
    /// Posterior variance of the cross-links.
    pub post_var: f64,
    pub draws: usize,
    /// Number of cdf rows written.
    pub points: usize,
    pub ks_bound: f64,
}

impl Default for ApproxSection {
    fn default() -> Self {
        Self { regime: Regime::ChiSquare, post_var: 1.0, draws: 1_000_000, points: 101, ks_bound: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdfSection {
    pub mean_gain: f64,
    pub draws: usize,
    pub points: usize,
    pub nsp_mode: NspMode,
}

impl Default for CdfSection {
    fn default() -> Self {
        Self { mean_gain: 1.0, draws: 1_000_000, points: 101, nsp_mode: NspMode::MomentDerived }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocateSection {
    pub realization: u64,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { variable: SweepVariable::ITh, grid: vec![5.0, 10.0, 20.0, 40.0, 80.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub budget_scenarios: usize,
    pub budget_samples: usize,
    pub cdf_draws: usize,
    pub cdf_bound: f64,
    pub kkt_scenarios: usize,
    pub stationarity_bound: f64,
    pub slackness_bound: f64,
    pub feasibility_bound: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            budget_scenarios: 20,
            budget_samples: 100_000,
            cdf_draws: 1_000_000,
            cdf_bound: 0.05,
            kkt_scenarios: 20,
            stationarity_bound: 1e-4,
            slackness_bound: 1e-2,
            feasibility_bound: 1e-3,
        }
    }
}

impl Settings {
    pub fn system_config(&self) -> SystemConfig {
        let s = &self.system;
        let n0 = dbm_to_watts(self.noise.n0_dbm);
        SystemConfig {
            n_users: s.n_users,
            n_subcarriers: s.n_subcarriers,
            p_t: s.p_t,
            i_th: s.i_th,
            epsilon: s.epsilon,
            rho: s.rho,
            var_est: s.var_est,
            var_err: s.var_err,
            cross_mean: s.cross_mean,
            sigma2_n: n0,
            sigma2_ps: self.noise.ps_over_n0 * n0,
            seed: s.seed,
            realizations: s.realizations,
            mc_samples: s.mc_samples,
            solver: self.solver.clone(),
        }
    }

    /// Canonical TOML of the resolved settings.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }

    pub fn sha256(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Reads `source` as a file path, or as a preset name when no such file
/// exists, then applies the overrides in order.
pub fn resolve(source: Option<&str>, overrides: &[String], seed: Option<u64>) -> Result<Settings, CliError> {
    let base = toml::Table::try_from(Settings::default()).expect("defaults serialize");
    let mut table = base.clone();
    let text = match source {
        None => None,
        Some(src) if Path::new(src).is_file() => Some(
            fs::read_to_string(src).map_err(|e| CliError::Config(format!("cannot read config {src}: {e}")))?,
        ),
        Some(src) => match PRESETS.iter().find(|(n, _)| *n == src) {
            Some((_, body)) => Some(body.to_string()),
            None => {
                let names: Vec<_> = preset_names().collect();
                return Err(CliError::Config(format!(
                    "config {src:?} is neither a file nor a preset ({})",
                    names.join(", ")
                )));
            }
        },
    };
    if let Some(text) = text {
        let file: Table = text.parse().map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
        merge(&mut table, file);
    }
    for o in overrides {
        apply_override(&mut table, &base, o)?;
    }
    let mut settings: Settings = Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    if let Some(seed) = seed {
        settings.system.seed = seed;
    }
    Ok(settings)
}

fn merge(dst: &mut Table, src: Table) {
    for (k, v) in src {
        match (dst.get_mut(&k), v) {
            (Some(Value::Table(d)), Value::Table(s)) => merge(d, s),
            (_, v) => {
                dst.insert(k, v);
            }
        }
    }
}

/// Full dotted paths of every leaf key in `table`.
fn leaf_paths(table: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => leaf_paths(t, &path, out),
            _ => out.push(path),
        }
    }
}

fn apply_override(table: &mut Table, base: &Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    let path = if key.contains('.') {
        key.to_string()
    } else {
        let mut all = Vec::new();
        leaf_paths(base, "", &mut all);
        let hits: Vec<_> = all.into_iter().filter(|p| p.rsplit('.').next() == Some(key)).collect();
        match hits.len() {
            1 => hits.into_iter().next().unwrap(),
            0 => return Err(CliError::Config(format!("unknown config key {key:?}"))),
            _ => {
                return Err(CliError::Config(format!(
                    "key {key:?} is ambiguous, use one of: {}",
                    hits.join(", ")
                )))
            }
        }
    };
    let value = parse_value(raw.trim());
    let mut parts: Vec<&str> = path.split('.').collect();
    let leaf = parts.pop().unwrap();
    let mut cur = table;
    for p in parts {
        let next = cur.entry(p).or_insert_with(|| Value::Table(Table::new()));
        cur = match next {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("{path:?} does not name a config key"))),
        };
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for name in preset_names() {
            let s = resolve(Some(name), &[], None).unwrap();
            s.system_config().validate().unwrap();
        }
    }

    #[test]
    fn bare_and_dotted_overrides() {
        let s = resolve(
            Some("fig4"),
            &["rho=0.5".into(), "system.epsilon=0.15".into(), "sweep.grid=[1.0, 2.0]".into()],
            Some(9),
        )
        .unwrap();
        assert_eq!(s.system.rho, 0.5);
        assert_eq!(s.system.epsilon, 0.15);
        assert_eq!(s.sweep.grid, vec![1.0, 2.0]);
        assert_eq!(s.system.seed, 9);
    }

    #[test]
    fn ambiguous_and_unknown_keys() {
        assert!(matches!(resolve(None, &["draws=10".into()], None), Err(CliError::Config(_))));
        assert!(matches!(resolve(None, &["nope=1".into()], None), Err(CliError::Config(_))));
        assert!(matches!(resolve(None, &["system.nope=1".into()], None), Err(CliError::Config(_))));
        assert!(matches!(resolve(Some("no-such-preset"), &[], None), Err(CliError::Config(_))));
    }

    #[test]
    fn string_values() {
        let s = resolve(None, &["regime=gamma".into(), "sweep.variable=rho".into()], None).unwrap();
        assert_eq!(s.approx.regime, Regime::Gamma);
        assert_eq!(s.sweep.variable, SweepVariable::Rho);
    }

    #[test]
    fn noise_converted_from_dbm() {
        let cfg = resolve(None, &[], None).unwrap().system_config();
        assert_eq!(cfg, SystemConfig::default());
    }

    #[test]
    fn hash_tracks_content() {
        let a = resolve(None, &[], None).unwrap();
        let b = resolve(None, &["p_t=20".into()], None).unwrap();
        assert_eq!(a.sha256(), resolve(None, &[], None).unwrap().sha256());
        assert_ne!(a.sha256(), b.sha256());
    }
}
