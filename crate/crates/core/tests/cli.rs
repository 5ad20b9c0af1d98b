use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use longrun::allocate::{AllocationDecision, CaseLabel};
use longrun::cli::{parse_config, run_with};
use longrun::growth::lambda_heston;
use longrun::params::ModelSpec;
use serde_json::Value;

const GBM: &str = "model.kind = gbm\nmodel.mu = 0.08\nmodel.sigma = 0.2\nmodel.r = 0.03\nutility.theta = 0.5\n";
const GBM_FLAT: &str = "model.kind = gbm\nmodel.mu = 0.03\nmodel.sigma = 0.2\nmodel.r = 0.03\nutility.theta = 0.5\n";
const HESTON: &str = "model.kind = heston\nmodel.mu = 0.08\nmodel.kappa = 2\nmodel.gamma_level = 0.04\n\
model.delta = 0.3\nmodel.rho = -0.5\nmodel.r = 0.03\nmodel.nu0 = 0.04\nutility.theta = 0.5\n";
const THREE_HALVES: &str = "model.kind = three_halves\nmodel.mu = 0.08\nmodel.kappa = 2\n\
model.gamma_level = 0.04\nmodel.delta = 0.5\nmodel.r = 0.03\nmodel.nu0 = 0.04\nutility.gamma_rra = 0.5\n";

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longrun"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&o.stdout)
        )
    })
}

#[test]
fn optimal_bond_only_when_no_premium() {
    let sb = Sandbox::new();
    let cfg = sb.file("gbm.cfg", GBM_FLAT);
    let o = bin(&["optimal", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["alpha_star"], 0.0);
    assert_eq!(v["case_label"], "BondOnly");
    assert!(v.get("alpha_dagger").is_some());
    assert!(!o.stderr.is_empty(), "a one-line summary goes to stderr");
}

#[test]
fn optimal_dagger_is_null_when_absent() {
    let sb = Sandbox::new();
    let cfg = sb.file("h.cfg", &HESTON.replace("model.mu = 0.08", "model.mu = 0.0"));
    let v = stdout_json(&bin(&["optimal", "--config", s(&cfg)]));
    assert_eq!(v["case_label"], "BondOnly");
    assert!(v["alpha_dagger"].is_null());
}

#[test]
fn curve_three_points() {
    let sb = Sandbox::new();
    let cfg = sb.file("heston.cfg", HESTON);
    let o = bin(&["curve", "--config", s(&cfg), "--points", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,lambda");
    assert_eq!(lines.len(), 4);
    let rows: Vec<(f64, f64)> = lines[1..]
        .iter()
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    assert_eq!(rows[0].1, 0.5 * 0.03);
    // 17 significant digits, '.' decimal point, no grouping
    for l in &lines[1..] {
        for field in l.split(',') {
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{field}");
            assert!(!field.contains(' '));
        }
    }
}

#[test]
fn curve_values_round_trip_exactly() {
    let sb = Sandbox::new();
    let cfg = sb.file("heston.cfg", HESTON);
    let o = bin(&["curve", "--config", s(&cfg), "--points", "11"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let ModelSpec::Heston(p) = parse_config(HESTON).unwrap().model else {
        unreachable!()
    };
    let theta = longrun::params::Utility::new(0.5).unwrap();
    for l in text.lines().skip(1) {
        let (a, v) = l.split_once(',').unwrap();
        let (a, v): (f64, f64) = (a.parse().unwrap(), v.parse().unwrap());
        assert_eq!(v.to_bits(), lambda_heston(&p, theta, a).to_bits());
    }
}

#[test]
fn curve_json_and_out_file() {
    let sb = Sandbox::new();
    let cfg = sb.file("gbm.cfg", GBM);
    let out = sb.path("curve.json");
    let o = bin(&["curve", "--config", s(&cfg), "--format", "json", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["samples"].as_array().unwrap().len(), 101);
    assert_eq!(v["model"]["kind"], "gbm");
}

#[test]
fn decision_json_round_trips_bit_for_bit() {
    let sb = Sandbox::new();
    for (name, body) in [("gbm.cfg", GBM), ("heston.cfg", HESTON), ("th.cfg", THREE_HALVES)] {
        let cfg = sb.file(name, body);
        let o = bin(&["optimal", "--config", s(&cfg)]);
        let d: AllocationDecision = serde_json::from_slice(&o.stdout).unwrap();
        let c = parse_config(body).unwrap();
        let direct = longrun::allocate::optimal(&c.model, c.utility).unwrap();
        assert_eq!(d.alpha_star.to_bits(), direct.alpha_star.to_bits());
        assert_eq!(d.lambda_at_star.to_bits(), direct.lambda_at_star.to_bits());
        assert_eq!(d.alpha_dagger.map(f64::to_bits), direct.alpha_dagger.map(f64::to_bits));
        assert_eq!(d.case_label, direct.case_label);
    }
}

#[test]
fn curve_never_beats_optimal() {
    let sb = Sandbox::new();
    for (name, body) in [("gbm.cfg", GBM), ("heston.cfg", HESTON), ("th.cfg", THREE_HALVES)] {
        let cfg = sb.file(name, body);
        let d: AllocationDecision =
            serde_json::from_slice(&bin(&["optimal", "--config", s(&cfg)]).stdout).unwrap();
        let text = String::from_utf8(bin(&["curve", "--config", s(&cfg)]).stdout).unwrap();
        let values: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
            .collect();
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(best <= d.lambda_at_star + 1e-15, "{name}");
    }
}

#[test]
fn verify_mc_gbm_example() {
    let sb = Sandbox::new();
    let cfg = sb.file("gbm.cfg", GBM);
    let o = bin(&[
        "verify-mc", "--config", s(&cfg), "--t", "20", "--paths", "200000", "--seed", "7",
    ]);
    let v = stdout_json(&o);
    assert_eq!(v["pass"], true, "{v}");
    assert_eq!(o.status.code(), Some(0));
    assert!(v["z_score"].as_f64().unwrap().abs() < 3.0);
    assert_eq!(v["allowance"], 0.0);
    for key in ["lambda_hat", "std_error", "lambda_closed_form", "z_score", "pass"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn verify_mc_bond_only_is_exact() {
    let sb = Sandbox::new();
    let cfg = sb.file("heston.cfg", HESTON);
    let v = stdout_json(&bin(&["verify-mc", "--config", s(&cfg), "--alpha", "0", "--paths", "10"]));
    assert_eq!(v["lambda_hat"], 0.015);
    assert_eq!(v["std_error"], 0.0);
    assert_eq!(v["z_score"], 0.0);
}

#[test]
fn verify_ode_writes_trace_and_verdict() {
    let sb = Sandbox::new();
    let cfg = sb.file("heston.cfg", HESTON);
    let trace = sb.path("trace.csv");
    let o = bin(&["verify-ode", "--config", s(&cfg), "--out", s(&trace)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["pass"], true);
    assert!(v["b_gap"].as_f64().unwrap() <= 1e-8);
    assert!(v["a_slope_gap"].as_f64().unwrap() <= 1e-3);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,A,B"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], 0.0);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 500.0);
}

#[test]
fn verify_ode_short_horizon_fails_verification() {
    let sb = Sandbox::new();
    let cfg = sb.file("heston.cfg", HESTON);
    let o = bin(&["verify-ode", "--config", s(&cfg), "--t-end", "1", "--dt", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout_json(&o)["pass"], false);
}

#[test]
fn verify_ode_rejects_other_models() {
    let sb = Sandbox::new();
    let cfg = sb.file("gbm.cfg", GBM);
    let o = bin(&["verify-ode", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn transform_small_run() {
    let sb = Sandbox::new();
    let cfg = sb.file("th.cfg", THREE_HALVES);
    let o = bin(&[
        "transform-3-2", "--config", s(&cfg), "--t", "1", "--paths", "20000", "--steps", "1000",
        "--lambda", "0.125",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    let closed = v["closed_form"].as_f64().unwrap();
    assert!((closed - 0.995_013_147_627_076_7).abs() < 1e-12);
    for key in ["closed_form", "mc_mean", "mc_se", "pass"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn validation_errors_are_enumerated() {
    let sb = Sandbox::new();
    let body = HESTON
        .replace("model.delta = 0.3", "model.delta = 0.5")
        .replace("model.rho = -0.5", "model.rho = -1.5")
        .replace("model.nu0 = 0.04", "model.nu0 = -1");
    let cfg = sb.file("bad.cfg", &body);
    let o = bin(&["optimal", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("Feller"), "{err}");
    assert!(err.contains("rho"), "{err}");
    assert!(err.contains("nu0"), "{err}");
}

#[test]
fn config_errors_exit_two() {
    let sb = Sandbox::new();
    let cfg = sb.file("dup.cfg", &format!("{GBM}utility.gamma_rra = 0.5\n"));
    assert_eq!(bin(&["optimal", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn usage_errors_name_the_flag() {
    let sb = Sandbox::new();
    let cfg = sb.file("gbm.cfg", GBM);
    let o = bin(&["curve", "--config", s(&cfg), "--pionts", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("--pionts"), "{err}");
    assert!(err.contains("Usage"), "{err}");

    let o = bin(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["curve", "--config", s(&cfg), "--points", "many"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn io_errors_exit_three() {
    let sb = Sandbox::new();
    let o = bin(&["curve", "--config", s(&sb.path("missing.cfg"))]);
    assert_eq!(o.status.code(), Some(3));
    let cfg = sb.file("gbm.cfg", GBM);
    let out = sb.path("no/such/dir/out.csv");
    let o = bin(&["curve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn run_section_supplies_defaults_and_flags_override() {
    let sb = Sandbox::new();
    let cfg = sb.file("gbm.cfg", &format!("{GBM}run.points = 5\n"));
    let argv = |extra: &[&str]| -> Vec<String> {
        let mut v = vec!["longrun", "curve", "--config", s(&cfg)];
        v.extend_from_slice(extra);
        v.into_iter().map(String::from).collect()
    };
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(run_with(&argv(&[]), &mut out, &mut err), 0);
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 6);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(run_with(&argv(&["--points", "2"]), &mut out, &mut err), 0);
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
}

#[test]
fn help_exits_zero() {
    let o = bin(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in ["curve", "optimal", "verify-ode", "verify-mc", "transform-3-2"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}

#[test]
fn stock_only_label_in_json() {
    let sb = Sandbox::new();
    let cfg = sb.file("gbm.cfg", GBM);
    let d: AllocationDecision =
        serde_json::from_slice(&bin(&["optimal", "--config", s(&cfg)]).stdout).unwrap();
    assert_eq!(d.case_label, CaseLabel::StockOnly);
    assert_eq!(d.alpha_star, 1.0);
}
