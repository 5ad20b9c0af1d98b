//! Command-line front end: config parsing, subcommand dispatch, CSV/JSON output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::allocate::{self, AllocationDecision};
use crate::growth::{self, GrowthError};
use crate::params::{
    validate, GbmParams, HestonParams, JumpDiffusionParams, JumpLaw, ModelKind, ModelSpec,
    ThreeHalvesParams, Utility, ValidationError, VasicekParams,
};
use crate::verify::{self, McConfig, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const DEFAULT_POINTS: usize = 101;
pub const DEFAULT_T: f64 = 10.0;
pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_STEPS_PER_UNIT_TIME: f64 = 100.0;
pub const DEFAULT_T_END: f64 = 500.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Trace CSVs are thinned to about this many rows.
pub const MAX_TRACE_ROWS: usize = 10_000;

/// verify-ode passes when B(t_end) is this close to its limit...
pub const ODE_B_TOL: f64 = 1e-8;
/// ...and A(t_end)/t_end this close to its limiting slope.
pub const ODE_SLOPE_TOL: f64 = 1e-3;

/// Additive allowance for time-discretization and finite-horizon bias in verify-mc.
pub fn discretization_allowance(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::Gbm => 0.0,
        ModelKind::Heston | ModelKind::ThreeHalves | ModelKind::Vasicek => 2e-3,
        ModelKind::Jump => 1e-3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Options that may come from the `run.` section of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub points: Option<usize>,
    pub t: Option<f64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub alpha: Option<f64>,
    pub lambda_l: Option<f64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub utility: Utility,
    pub run: RunOptions,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    TypeMismatch {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("line {line}: key `{key}` already set on line {first}")]
    DuplicateKey {
        line: usize,
        key: String,
        first: usize,
    },
    #[error("utility.theta and utility.gamma_rra are mutually exclusive")]
    DuplicateUtility,
    #[error("one of utility.theta or utility.gamma_rra is required")]
    MissingUtility,
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

struct Entry {
    line: usize,
    value: String,
}

const RUN_KEYS: [&str; 12] = [
    "points", "t", "paths", "steps", "seed", "t_end", "dt", "out", "format", "alpha", "lambda_l",
    "workers",
];

fn model_keys(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Gbm => &["mu", "sigma", "r"],
        ModelKind::Heston => &["mu", "kappa", "gamma_level", "delta", "rho", "r", "nu0"],
        ModelKind::ThreeHalves => &["mu", "kappa", "gamma_level", "delta", "r", "nu0"],
        ModelKind::Jump => &["mu", "sigma", "r", "lambda_j", "jump", "jump_y", "jump_rate"],
        ModelKind::Vasicek => &["mu", "sigma", "kappa", "gamma_level", "delta", "rho", "r0"],
    }
}

struct Table(HashMap<String, Entry>);

impl Table {
    fn raw(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.0
            .get(key)
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn parsed<T>(
        &self,
        key: &str,
        expected: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).ok_or_else(|| ConfigError::TypeMismatch {
                line: e.line,
                key: key.to_string(),
                value: e.value.clone(),
                expected,
            }),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parsed(key, "a real number", |s| s.parse::<f64>().ok())
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parsed(key, "a non-negative integer", |s| s.parse::<usize>().ok())
    }

    fn required_real(&self, key: &str) -> Result<f64, ConfigError> {
        self.raw(key)?;
        Ok(self.real(key)?.expect("presence checked"))
    }
}

fn parse_u64(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

fn parse_kind(s: &str) -> Option<ModelKind> {
    Some(match s {
        "gbm" => ModelKind::Gbm,
        "heston" => ModelKind::Heston,
        "three_halves" => ModelKind::ThreeHalves,
        "jump" => ModelKind::Jump,
        "vasicek" => ModelKind::Vasicek,
        _ => return None,
    })
}

/// Parses and validates a flat `key = value` config with `#` comments.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut table = HashMap::<String, Entry>::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.trim().to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: raw.trim().to_string(),
            });
        }
        if let Some(prev) = table.get(key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
                first: prev.line,
            });
        }
        table.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }
    let table = Table(table);

    let kind = table
        .parsed(
            "model.kind",
            "one of gbm, heston, three_halves, jump, vasicek",
            parse_kind,
        )?
        .ok_or_else(|| ConfigError::MissingKey("model.kind".into()))?;

    // reject anything not understood before reporting what is missing
    let allowed = model_keys(kind);
    let mut keys: Vec<(&String, &Entry)> = table.0.iter().collect();
    keys.sort_by_key(|(_, e)| e.line);
    for (key, entry) in keys {
        let known = match key.split_once('.') {
            Some(("model", rest)) => rest == "kind" || allowed.contains(&rest),
            Some(("utility", rest)) => rest == "theta" || rest == "gamma_rra",
            Some(("run", rest)) => RUN_KEYS.contains(&rest),
            _ => false,
        };
        if !known {
            return Err(ConfigError::UnknownKey {
                line: entry.line,
                key: key.clone(),
            });
        }
    }

    let m = |name: &str| table.required_real(&format!("model.{name}"));
    let model = match kind {
        ModelKind::Gbm => ModelSpec::Gbm(GbmParams {
            mu: m("mu")?,
            sigma: m("sigma")?,
            r: m("r")?,
        }),
        ModelKind::Heston => ModelSpec::Heston(HestonParams {
            mu: m("mu")?,
            kappa: m("kappa")?,
            gamma_level: m("gamma_level")?,
            delta: m("delta")?,
            rho: m("rho")?,
            r: m("r")?,
            nu0: m("nu0")?,
        }),
        ModelKind::ThreeHalves => ModelSpec::ThreeHalves(ThreeHalvesParams {
            mu: m("mu")?,
            kappa: m("kappa")?,
            gamma_level: m("gamma_level")?,
            delta: m("delta")?,
            r: m("r")?,
            nu0: m("nu0")?,
        }),
        ModelKind::Jump => ModelSpec::Jump(JumpDiffusionParams {
            mu: m("mu")?,
            sigma: m("sigma")?,
            lambda_j: m("lambda_j")?,
            jump: parse_jump_law(&table)?,
            r: m("r")?,
        }),
        ModelKind::Vasicek => ModelSpec::Vasicek(VasicekParams {
            mu: m("mu")?,
            sigma: m("sigma")?,
            kappa: m("kappa")?,
            gamma_level: m("gamma_level")?,
            delta: m("delta")?,
            rho: m("rho")?,
            r0: m("r0")?,
        }),
    };

    let utility = match (table.real("utility.theta")?, table.real("utility.gamma_rra")?) {
        (Some(_), Some(_)) => return Err(ConfigError::DuplicateUtility),
        (None, None) => return Err(ConfigError::MissingUtility),
        (Some(theta), None) => Utility::new(theta),
        (None, Some(g)) => Utility::from_risk_aversion(g),
    };

    let run = RunOptions {
        points: table.count("run.points")?,
        t: table.real("run.t")?,
        paths: table.count("run.paths")?,
        steps: table.count("run.steps")?,
        seed: table.parsed("run.seed", "an unsigned 64-bit integer", parse_u64)?,
        t_end: table.real("run.t_end")?,
        dt: table.real("run.dt")?,
        out: table.parsed("run.out", "a path", |s| Some(PathBuf::from(s)))?,
        format: table.parsed("run.format", "csv or json", |s| {
            OutputFormat::from_str(s, false).ok()
        })?,
        alpha: table.real("run.alpha")?,
        lambda_l: table.real("run.lambda_l")?,
        workers: table.count("run.workers")?,
    };

    // every violated invariant is reported together
    let mut violations = Vec::new();
    let utility = utility.map_err(|e| violations.push(e)).ok();
    let model = match validate(model) {
        Ok(m) => Some(m),
        Err(e) => {
            violations.extend(e.violations);
            None
        }
    };
    match (model, utility) {
        (Some(model), Some(utility)) => Ok(RunConfig {
            model,
            utility,
            run,
        }),
        _ => Err(ValidationError { violations }.into()),
    }
}

fn parse_jump_law(table: &Table) -> Result<JumpLaw, ConfigError> {
    let law = table.raw("model.jump")?;
    match law.value.as_str() {
        "constant" => {
            if let Some(e) = table.0.get("model.jump_rate") {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    key: "model.jump_rate".into(),
                });
            }
            Ok(JumpLaw::Constant {
                y: table.required_real("model.jump_y")?,
            })
        }
        "exponential" => {
            if let Some(e) = table.0.get("model.jump_y") {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    key: "model.jump_y".into(),
                });
            }
            Ok(JumpLaw::Exponential {
                rate: table.required_real("model.jump_rate")?,
            })
        }
        other => Err(ConfigError::TypeMismatch {
            line: law.line,
            key: "model.jump".into(),
            value: other.to_string(),
            expected: "constant or exponential",
        }),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "longrun",
    version,
    about = "Long-term CRRA growth rates and optimal constant stock/bond allocations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Λ(α) on a uniform α grid
    Curve(Flags),
    /// Optimal constant allocation α*
    Optimal(Flags),
    /// Integrate the Heston or Vasicek ODE system and compare with its limits
    VerifyOde(Flags),
    /// Monte Carlo estimate of the growth rate against the closed form
    VerifyMc(Flags),
    /// 3/2 integrated-variance transform: closed form against Monte Carlo
    #[command(name = "transform-3-2")]
    Transform32(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// Model config file (`key = value` lines)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Number of α grid points
    #[arg(long, value_name = "N")]
    points: Option<usize>,
    /// Simulation horizon
    #[arg(long, value_name = "REAL")]
    t: Option<f64>,
    /// Number of simulated paths
    #[arg(long, value_name = "N")]
    paths: Option<usize>,
    /// Time steps per path over the whole horizon
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Master seed (decimal or 0x-prefixed hex)
    #[arg(long, value_name = "U64", value_parser = parse_seed)]
    seed: Option<u64>,
    /// ODE integration horizon
    #[arg(long, value_name = "REAL")]
    t_end: Option<f64>,
    /// ODE step size
    #[arg(long, value_name = "REAL")]
    dt: Option<f64>,
    /// Output file (stdout when absent)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Stock fraction used by the verify commands
    #[arg(long, value_name = "REAL")]
    alpha: Option<f64>,
    /// Laplace variable for transform-3-2 (default ½α²(θ − θ²))
    #[arg(long, value_name = "REAL")]
    lambda: Option<f64>,
    /// Worker threads for simulation
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    parse_u64(s).ok_or_else(|| format!("`{s}` is not an unsigned 64-bit integer"))
}

/// Settings after merging flags over `run.` keys over defaults.
struct Settings {
    points: usize,
    t: f64,
    paths: usize,
    steps: Option<usize>,
    seed: u64,
    t_end: f64,
    dt: f64,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    alpha: f64,
    lambda_l: Option<f64>,
    workers: Option<usize>,
}

impl Settings {
    fn merge(flags: Flags, run: RunOptions) -> Self {
        Self {
            points: flags.points.or(run.points).unwrap_or(DEFAULT_POINTS),
            t: flags.t.or(run.t).unwrap_or(DEFAULT_T),
            paths: flags.paths.or(run.paths).unwrap_or(DEFAULT_PATHS),
            steps: flags.steps.or(run.steps),
            seed: flags.seed.or(run.seed).unwrap_or(verify::DEFAULT_SEED),
            t_end: flags.t_end.or(run.t_end).unwrap_or(DEFAULT_T_END),
            dt: flags.dt.or(run.dt).unwrap_or(DEFAULT_DT),
            out: flags.out.or(run.out),
            format: flags.format.or(run.format),
            alpha: flags.alpha.or(run.alpha).unwrap_or(DEFAULT_ALPHA),
            lambda_l: flags.lambda.or(run.lambda_l),
            workers: flags.workers.or(run.workers),
        }
    }

    fn mc_config(&self) -> McConfig {
        let steps = self
            .steps
            .unwrap_or_else(|| (DEFAULT_STEPS_PER_UNIT_TIME * self.t).ceil().max(1.0) as usize);
        McConfig {
            t: self.t,
            n_paths: self.paths,
            n_steps: steps,
            seed: self.seed,
            workers: self.workers,
        }
    }
}

/// Everything that can stop a subcommand, with its exit code.
#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error(transparent)]
    Verify(VerifyError),
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::InvalidArgument(_)
            | VerifyError::InsufficientSteps { .. }
            | VerifyError::StepSizeTooLarge { .. } => Failure::Usage(e.to_string()),
            VerifyError::Growth(GrowthError::AlphaOutOfRange(_)) => Failure::Usage(e.to_string()),
            other => Failure::Verify(other),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Config(_) => EXIT_INVALID,
            Failure::Growth(GrowthError::AlphaOutOfRange(_))
            | Failure::Growth(GrowthError::InvalidArgument(_)) => EXIT_INVALID,
            Failure::Io(_) => EXIT_IO,
            Failure::Growth(_) | Failure::Verify(_) => EXIT_VERIFY_FAILED,
        }
    }
}

/// Runs the CLI on `argv` (program name first) against the process streams.
pub fn run(argv: &[String]) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`run`], with explicit output streams.
pub fn run_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_INVALID
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.exit_code()
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read config {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn emit(out: &mut dyn Write, path: Option<&Path>, body: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, body)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display()))),
        None => out
            .write_all(body.as_bytes())
            .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("output records serialize");
    s.push('\n');
    s
}

fn verdict_code(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Curve(f) => {
            let cfg = load(&f.config)?;
            let s = Settings::merge(f, cfg.run);
            curve(&cfg.model, cfg.utility, &s, out)
        }
        Command::Optimal(f) => {
            let cfg = load(&f.config)?;
            let s = Settings::merge(f, cfg.run);
            optimal(&cfg.model, cfg.utility, &s, out, err)
        }
        Command::VerifyOde(f) => {
            let cfg = load(&f.config)?;
            let s = Settings::merge(f, cfg.run);
            verify_ode(&cfg.model, cfg.utility, &s, out)
        }
        Command::VerifyMc(f) => {
            let cfg = load(&f.config)?;
            let s = Settings::merge(f, cfg.run);
            verify_mc(&cfg.model, cfg.utility, &s, out)
        }
        Command::Transform32(f) => {
            let cfg = load(&f.config)?;
            let s = Settings::merge(f, cfg.run);
            transform(&cfg.model, cfg.utility, &s, out)
        }
    }
}

/// Formats a real with 17 significant digits, independent of locale.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn curve(model: &ModelSpec, u: Utility, s: &Settings, out: &mut dyn Write) -> Result<i32, Failure> {
    let c = growth::growth_curve(model, u, s.points)?;
    let body = match s.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let mut b = String::from("alpha,lambda\n");
            for p in &c.samples {
                let _ = writeln!(b, "{},{}", format_real(p.alpha), format_real(p.lambda));
            }
            b
        }
        OutputFormat::Json => json_line(&c),
    };
    emit(out, s.out.as_deref(), &body)?;
    Ok(EXIT_OK)
}

fn optimal(
    model: &ModelSpec,
    u: Utility,
    s: &Settings,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    if s.format == Some(OutputFormat::Csv) {
        return Err(Failure::Usage("optimal writes JSON only".into()));
    }
    let d: AllocationDecision = allocate::optimal(model, u)?;
    emit(out, s.out.as_deref(), &json_line(&d))?;
    let _ = writeln!(
        err,
        "{} model: alpha* = {} ({:?}), Lambda(alpha*) = {}",
        model.kind(),
        d.alpha_star,
        d.case_label,
        d.lambda_at_star
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct OdeVerdict {
    model: ModelKind,
    alpha: f64,
    t_end: f64,
    dt: f64,
    b_end: f64,
    b_limit_closed_form: f64,
    b_gap: f64,
    a_slope: f64,
    a_slope_closed_form: f64,
    a_slope_gap: f64,
    lambda_ode: f64,
    lambda_closed_form: f64,
    pass: bool,
}

fn verify_ode(
    model: &ModelSpec,
    u: Utility,
    s: &Settings,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    if s.format == Some(OutputFormat::Csv) && s.out.is_none() {
        return Err(Failure::Usage(
            "verify-ode writes its trace CSV to --out and the JSON verdict to stdout".into(),
        ));
    }
    let (trace, lambda_ode, lambda_closed) = match model {
        ModelSpec::Heston(p) => {
            let tr = verify::integrate_heston_riccati(p, u, s.alpha, s.t_end, s.dt)?;
            let rebuilt = verify::heston_lambda_from_trace(&tr, p, u, s.alpha);
            (tr, rebuilt, growth::lambda_heston(p, u, s.alpha))
        }
        ModelSpec::Vasicek(p) => {
            let tr = verify::integrate_vasicek_ode(p, u, s.alpha, s.t_end, s.dt)?;
            let rebuilt = verify::vasicek_lambda_from_trace(&tr, p, u, s.alpha);
            (tr, rebuilt, growth::lambda_vasicek(p, u, s.alpha))
        }
        other => {
            return Err(Failure::Usage(format!(
                "verify-ode applies to heston and vasicek models, not {}",
                other.kind()
            )))
        }
    };
    if let Some(path) = &s.out {
        let n = trace.times.len();
        let stride = n.div_ceil(MAX_TRACE_ROWS).max(1);
        let mut b = String::from("t,A,B\n");
        for i in (0..n).filter(|&i| i % stride == 0 || i == n - 1) {
            let _ = writeln!(
                b,
                "{},{},{}",
                format_real(trace.times[i]),
                format_real(trace.a_values[i]),
                format_real(trace.b_values[i])
            );
        }
        emit(out, Some(path), &b)?;
    }
    let b_gap = trace.b_gap();
    let a_slope_gap = trace.a_slope_gap();
    let pass = b_gap <= ODE_B_TOL && a_slope_gap <= ODE_SLOPE_TOL;
    let verdict = OdeVerdict {
        model: model.kind(),
        alpha: s.alpha,
        t_end: trace.t_end(),
        dt: s.dt,
        b_end: trace.b_end(),
        b_limit_closed_form: trace.b_limit_closed_form,
        b_gap,
        a_slope: trace.a_end() / trace.t_end(),
        a_slope_closed_form: trace.a_slope_closed_form,
        a_slope_gap,
        lambda_ode,
        lambda_closed_form: lambda_closed,
        pass,
    };
    emit(out, None, &json_line(&verdict))?;
    Ok(verdict_code(pass))
}

#[derive(Debug, Serialize)]
struct McVerdict {
    model: ModelKind,
    theta: f64,
    alpha: f64,
    lambda_hat: f64,
    std_error: f64,
    lambda_closed_form: f64,
    /// Null when the standard error is zero.
    z_score: Option<f64>,
    allowance: f64,
    horizon_t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    pass: bool,
}

fn z_score(diff: f64, se: f64) -> Option<f64> {
    if se > 0.0 {
        Some(diff / se)
    } else if diff == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

fn verify_mc(
    model: &ModelSpec,
    u: Utility,
    s: &Settings,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    if s.format == Some(OutputFormat::Csv) {
        return Err(Failure::Usage("verify-mc writes JSON only".into()));
    }
    let cfg = s.mc_config();
    let closed = growth::lambda(model, u, s.alpha)?;
    let est = verify::mc_growth_estimate(model, u, s.alpha, &cfg)?;
    let allowance = discretization_allowance(model.kind());
    let diff = est.lambda_hat - closed;
    let pass = diff.abs() <= 3.0 * est.std_error + allowance;
    let verdict = McVerdict {
        model: model.kind(),
        theta: u.theta(),
        alpha: s.alpha,
        lambda_hat: est.lambda_hat,
        std_error: est.std_error,
        lambda_closed_form: closed,
        z_score: z_score(diff, est.std_error),
        allowance,
        horizon_t: est.horizon_t,
        n_paths: est.n_paths,
        n_steps: est.n_steps,
        seed: est.seed,
        pass,
    };
    emit(out, s.out.as_deref(), &json_line(&verdict))?;
    Ok(verdict_code(pass))
}

#[derive(Debug, Serialize)]
struct TransformVerdict {
    lambda_l: f64,
    horizon_t: f64,
    closed_form: f64,
    mc_mean: f64,
    mc_se: f64,
    z_score: Option<f64>,
    allowance: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    pass: bool,
}

fn transform(
    model: &ModelSpec,
    u: Utility,
    s: &Settings,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let ModelSpec::ThreeHalves(p) = model else {
        return Err(Failure::Usage(format!(
            "transform-3-2 needs a three_halves model, not {}",
            model.kind()
        )));
    };
    if s.format == Some(OutputFormat::Csv) {
        return Err(Failure::Usage("transform-3-2 writes JSON only".into()));
    }
    let alpha = growth::admissible_alpha(s.alpha)?;
    let lambda_l = s
        .lambda_l
        .unwrap_or_else(|| 0.5 * alpha * alpha * u.risk_term());
    let cfg = s.mc_config();
    let closed = growth::laplace_three_halves_finite_t(p, lambda_l, cfg.t)?;
    let est = verify::mc_laplace_three_halves(p, lambda_l, &cfg)?;
    let allowance = discretization_allowance(ModelKind::ThreeHalves);
    let diff = est.mean - closed;
    let pass = diff.abs() <= 3.0 * est.std_error + allowance;
    let verdict = TransformVerdict {
        lambda_l,
        horizon_t: cfg.t,
        closed_form: closed,
        mc_mean: est.mean,
        mc_se: est.std_error,
        z_score: z_score(diff, est.std_error),
        allowance,
        n_paths: est.n_paths,
        n_steps: est.n_steps,
        seed: est.seed,
        pass,
    };
    emit(out, s.out.as_deref(), &json_line(&verdict))?;
    Ok(verdict_code(pass))
}
