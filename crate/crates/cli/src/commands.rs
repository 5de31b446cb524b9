use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use cogniplan::interference_stats::{approx_check as run_approx_check, interference_budget};
use cogniplan::resource_allocator::TRACE_CSV_HEADER;
use cogniplan::rng::{substream, Stream};
use cogniplan::simulator::{diagnostics_csv, run_sweep_scenarios, SweepRow};
use cogniplan::sinr_model::{sample_normalized_sinr, sinr_cdf};
use cogniplan::stats::{empirical_cdf, quantile};
use cogniplan::validation::{
    budget_checks, cdf_sup_norm, kkt_report, random_scenario, single_user_check, solve_realization,
};
use cogniplan::{SinrParams, SweepResult, SweepSpec};

use crate::settings::Settings;
use crate::CliError;

fn header(command: &str, s: &Settings) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# cogniplan {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(h, "# command: {command}");
    let _ = writeln!(h, "# config_sha256: {}", s.sha256());
    let _ = writeln!(h, "# seed: {}", s.system.seed);
    let _ = writeln!(h, "# resolved config:");
    for line in s.to_toml().lines() {
        let _ = writeln!(h, "#   {line}");
    }
    h
}

fn emit(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

/// Evenly spaced probability levels `(i + ½)/n`.
fn levels(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| (i as f64 + 0.5) / n as f64)
}

pub fn approx_check(s: &Settings, halve_xi: bool, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = s.system_config();
    let a = &s.approx;
    if a.draws < 1 || a.points < 1 {
        return Err(CliError::Config("approx.draws and approx.points must be positive".into()));
    }
    let mut rng = substream(cfg.seed, Stream::Oracle, 0);
    let scale = if halve_xi { 0.5 } else { 1.0 };
    let res = run_approx_check(&cfg, a.regime.law(), a.post_var, a.draws, scale, &mut rng)?;

    let mut body = header("approx-check", s);
    body.push_str("threshold,empirical_cdf,approx_cdf\n");
    for q in levels(a.points) {
        let t = quantile(&res.samples, q);
        let _ = writeln!(body, "{t},{},{}", empirical_cdf(&res.samples, t), res.approx.cdf(t)?);
    }
    let pass = res.ks_distance <= a.ks_bound;
    let _ = writeln!(
        body,
        "# ks_distance={} ks_bound={} xi={} dof={} result={}",
        res.ks_distance,
        a.ks_bound,
        res.approx.weight,
        res.approx.dof,
        if pass { "pass" } else { "fail" }
    );
    emit(out, &body)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Check(format!("KS distance {:.4} exceeds {}", res.ks_distance, a.ks_bound)))
    }
}

pub fn budget(s: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    let sys = &s.system;
    let i_t = interference_budget(sys.n_subcarriers, sys.i_th, sys.epsilon)?;
    let line = format!("I_t={i_t}\n");
    if let Some(p) = out {
        fs::write(p, header("budget", s) + &line)?;
    }
    print!("{line}");
    Ok(())
}

pub fn cdf(s: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = s.system_config();
    cfg.validate()?;
    let c = &s.cdf;
    if c.draws < 1 || c.points < 1 {
        return Err(CliError::Config("cdf.draws and cdf.points must be positive".into()));
    }
    let params = SinrParams::from_config(&cfg, c.mean_gain, c.nsp_mode)?;
    let mut samples = sample_normalized_sinr(&cfg, c.mean_gain, c.draws, cfg.seed)?;
    samples.sort_by(f64::total_cmp);
    let mut body = header("cdf", s);
    body.push_str("gamma,f_analytic,f_empirical\n");
    for q in levels(c.points) {
        let g = quantile(&samples, q);
        let _ = writeln!(body, "{g},{},{}", sinr_cdf(g, &params)?, empirical_cdf(&samples, g));
    }
    let sup = cdf_sup_norm(&cfg, c.mean_gain, c.draws, c.nsp_mode, cfg.seed)?;
    let _ = writeln!(body, "# sup_norm={sup}");
    emit(out, &body)
}

pub fn allocate(s: &Settings, out: Option<&Path>, trace: Option<&Path>) -> Result<(), CliError> {
    let cfg = s.system_config();
    cfg.validate()?;
    let (inst, _, sol) = solve_realization(&cfg, s.allocate.realization)?;
    let alloc = &sol.allocation;
    let d = &sol.diagnostics;
    let mut body = header("allocate", s);
    body.push_str("subcarrier,user,power,gamma,interference_weight\n");
    for (k, n) in alloc.owners().into_iter().enumerate() {
        let _ = writeln!(body, "{k},{n},{},{},{}", alloc.power(n, k), inst.gamma(n, k), inst.weights[k]);
    }
    let _ = writeln!(
        body,
        "# rate={} mu={} eta={} converged={} iterations={} total_power={} interference={} p_t={} i_t={}",
        d.objective, sol.dual.mu, sol.dual.eta, d.converged, d.iterations, d.total_power, d.interference, inst.p_t, inst.i_t
    );
    emit(out, &body)?;
    if let Some(p) = trace {
        let mut t = header("allocate trace", s);
        t.push_str(TRACE_CSV_HEADER);
        t.push('\n');
        for row in &d.trace {
            t.push_str(&row.to_csv());
            t.push('\n');
        }
        fs::write(p, t)?;
    }
    Ok(())
}

pub fn sweep(s: &Settings, out: Option<&Path>, diagnostics: Option<&Path>) -> Result<(), CliError> {
    let spec = SweepSpec { variable: s.sweep.variable, grid: s.sweep.grid.clone(), base: s.system_config() };
    let scenarios = run_sweep_scenarios(&spec)?;
    let result = SweepResult {
        variable: spec.variable,
        rows: scenarios.iter().map(|(v, r)| SweepRow::from_scenario(*v, r)).collect(),
    };
    emit(out, &(header("sweep", s) + &result.to_csv()))?;
    if let Some(p) = diagnostics {
        let mut body = header("sweep diagnostics", s);
        for (i, (v, r)) in scenarios.iter().enumerate() {
            let csv = diagnostics_csv(r);
            for (j, line) in csv.lines().enumerate() {
                if j == 0 {
                    if i == 0 {
                        let _ = writeln!(body, "{},{line}", spec.variable.name());
                    }
                } else {
                    let _ = writeln!(body, "{v},{line}");
                }
            }
        }
        fs::write(p, body)?;
    }
    Ok(())
}

pub fn validate(s: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = s.system_config();
    cfg.validate()?;
    let v = &s.validate;
    let mut body = header("validate", s);
    body.push_str("check,case,value,bound,result\n");
    let mut failures = 0usize;
    let mut record = |body: &mut String, check: &str, case: String, value: f64, bound: f64| {
        let ok = value <= bound;
        if !ok {
            failures += 1;
        }
        let _ = writeln!(body, "{check},{case},{value},{bound},{}", if ok { "pass" } else { "fail" });
    };

    for c in budget_checks(v.budget_scenarios, cfg.seed, v.budget_samples)? {
        let bound = c.epsilon + 3.0 * c.collision.std_error;
        let case = format!("K={} eps={} i_th={:.4}", c.k, c.epsilon, c.i_th);
        record(&mut body, "collision", case, c.collision.probability, bound);
    }

    let sup = cdf_sup_norm(&cfg, s.cdf.mean_gain, v.cdf_draws, s.cdf.nsp_mode, cfg.seed)?;
    record(&mut body, "cdf_sup_norm", format!("K={}", cfg.n_subcarriers), sup, v.cdf_bound);

    for i in 0..v.kkt_scenarios {
        let scen = random_scenario(&cfg, i as u64, cfg.seed);
        let (inst, _, sol) = solve_realization(&scen, 0)?;
        if !sol.diagnostics.converged {
            let _ = writeln!(body, "kkt,scenario {i},nan,nan,skipped");
            continue;
        }
        let r = kkt_report(&inst, &sol);
        // residual tolerance equals the solver tolerance; allow rounding
        let feas = v.feasibility_bound * (1.0 + 1e-9);
        record(&mut body, "feasibility", format!("scenario {i}"), r.power_excess.max(r.intf_excess), feas);
        record(&mut body, "slackness", format!("scenario {i}"), r.slackness_power.max(r.slackness_intf), v.slackness_bound);
        record(&mut body, "stationarity", format!("scenario {i}"), r.stationarity, v.stationarity_bound);
    }

    let wf = single_user_check(&[2.0, 0.5], 3.0, &cfg.solver)?;
    record(&mut body, "water_filling", "N=1 K=2".into(), wf, 1e-3);

    let _ = writeln!(body, "# failures={failures}");
    emit(out, &body)?;
    if failures == 0 {
        Ok(())
    } else {
        Err(CliError::Check(format!("{failures} invariant check(s) failed")))
    }
}
