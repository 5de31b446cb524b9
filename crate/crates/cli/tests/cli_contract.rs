use std::path::Path;
use std::process::{Command, Output};

fn cogniplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogniplan")).args(args).output().expect("run cogniplan")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn budget_value(args: &[&str]) -> f64 {
    let o = cogniplan(args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    out.trim().strip_prefix("I_t=").expect("I_t= prefix").parse().unwrap()
}

/// Data rows of a CSV output: drops `#` comments and the header row.
fn rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn budget_prints_one_line() {
    let args = ["budget", "--set", "n_subcarriers=64", "--set", "i_th=5", "--set", "epsilon=0.15"];
    let low = budget_value(&args);
    assert!(low > 0.0 && low.is_finite());
    let high = budget_value(&["budget", "--set", "i_th=5", "--set", "epsilon=0.30"]);
    assert!(high > low);
}

#[test]
fn budget_rejects_single_subcarrier() {
    let o = cogniplan(&["budget", "--set", "n_subcarriers=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("K != 1"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let o = cogniplan(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(cogniplan(&["budget", "--config", "/no/such/file.toml"]).status.code(), Some(2));
    assert_eq!(cogniplan(&["budget", "--set", "no_such_key=1"]).status.code(), Some(2));
    assert_eq!(cogniplan(&["budget", "--set", "draws=5"]).status.code(), Some(2));
    assert_eq!(cogniplan(&["budget", "--set", "epsilon=1.5"]).status.code(), Some(2));
    assert_eq!(cogniplan(&["allocate", "--set", "rho=1.0"]).status.code(), Some(2));
}

#[test]
fn approx_check_passes_and_negative_control_fails() {
    let o = cogniplan(&["approx-check", "--config", "fig2b", "--set", "approx.draws=100000", "--set", "n_subcarriers=16"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("# cogniplan "));
    assert!(out.lines().next_back().unwrap().contains("result=pass"));
    assert_eq!(rows(&out).len(), 101);

    let o = cogniplan(&["approx-check", "--config", "fig2b", "--set", "approx.draws=100000", "--halve-xi"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("result=fail"));
}

#[test]
fn headers_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alloc.csv");
    let o = cogniplan(&["allocate", "--seed", "99", "--set", "p_t=20", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let head: Vec<&str> = text.lines().take(4).collect();
    assert!(head[0].starts_with("# cogniplan "));
    assert!(head[2].starts_with("# config_sha256: ") && head[2].len() == "# config_sha256: ".len() + 64);
    assert_eq!(head[3], "# seed: 99");
    assert!(text.contains("#   p_t = 20.0"));
    assert_eq!(rows(&text).len(), 64);
}

#[test]
fn allocate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let t = dir.path().join(format!("trace-{name}"));
        let o = cogniplan(&["allocate", "--seed", "5", "-o", p.to_str().unwrap(), "--trace", t.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(std::fs::read_to_string(&t).unwrap().contains("iter,mu,eta"));
        std::fs::read(p).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn fig4_sweep_axes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let diag = dir.path().join("diag.csv");
    let o = cogniplan(&[
        "sweep", "--config", "fig4", "--set", "rho=0.5", "--set", "epsilon=0.15",
        "--set", "realizations=20", "--set", "mc_samples=1000",
        "-o", out.to_str().unwrap(), "--diagnostics", diag.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("i_th,rate_mean,rate_se,collision_prob"));
    let values: Vec<f64> = rows(&text).iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values, vec![5.0, 10.0, 20.0, 40.0, 80.0]);
    assert_eq!(rows(&std::fs::read_to_string(&diag).unwrap()).len(), 5 * 20);
}

#[test]
fn threads_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_cogniplan"))
            .args(["sweep", "--config", "fig6", "--set", "realizations=30", "--set", "mc_samples=0"])
            .env("COGNIPLAN_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(run("0").status.code(), Some(2));
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[system]\nn_subcarriers = 16\ni_th = 5.0\nepsilon = 0.15\n").unwrap();
    let from_file = budget_value(&["budget", "--config", cfg.to_str().unwrap()]);
    let inline = budget_value(&["budget", "--set", "n_subcarriers=16", "--set", "epsilon=0.15"]);
    assert_eq!(from_file, inline);

    std::fs::write(&cfg, "[system]\nbogus = 1\n").unwrap();
    assert_eq!(cogniplan(&["budget", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert!(!Path::new("/no/such").exists());
}

#[test]
fn cdf_rows_and_validate_suite() {
    let o = cogniplan(&["cdf", "--config", "fig3", "--set", "cdf.draws=50000", "--set", "cdf.points=20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(rows(&out).len(), 20);
    assert!(out.contains("gamma,f_analytic,f_empirical"));

    let o = cogniplan(&[
        "validate", "--set", "budget_scenarios=4", "--set", "budget_samples=10000",
        "--set", "cdf_draws=50000", "--set", "kkt_scenarios=4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("# failures=0"));

    // an impossible stationarity bound makes the suite fail
    let o = cogniplan(&[
        "validate", "--set", "budget_scenarios=1", "--set", "budget_samples=10000",
        "--set", "cdf_draws=10000", "--set", "kkt_scenarios=2", "--set", "stationarity_bound=-1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
