//! Monte Carlo estimates of finite-horizon growth rates and of the 3/2
//! integrated-variance transform.
//!
//! Every path draws from its own ChaCha8 stream (stream number = path index),
//! and per-path results are reduced in path order, so estimates do not depend
//! on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::VerifyError;
use crate::growth::admissible_alpha;
use crate::params::{
    GbmParams, GenericDensity, HestonParams, JumpDiffusionParams, JumpLaw, ModelSpec,
    ThreeHalvesParams, Utility, VasicekParams,
};

/// Default master seed.
pub const DEFAULT_SEED: u64 = 0x5EED;
/// Discretized models need at least this many steps per unit time.
pub const MIN_STEPS_PER_UNIT_TIME: f64 = 10.0;
/// Cells of the inverse-CDF table used to sample generic jump densities.
pub const INVERSE_CDF_CELLS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub t: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Worker threads; `None` lets the pool pick.
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(t: f64, n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            t,
            n_paths,
            n_steps,
            seed,
            workers: None,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self {
            workers: Some(workers),
            ..self
        }
    }

    fn dt(&self) -> f64 {
        self.t / self.n_steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub lambda_hat: f64,
    pub std_error: f64,
    pub horizon_t: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

/// Sample mean of exp(−λ ∫₀ᵗ ν ds) with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub horizon_t: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn check_config(cfg: &McConfig, discretized: bool) -> Result<(), VerifyError> {
    if !(cfg.t > 0.0 && cfg.t.is_finite()) {
        return Err(VerifyError::InvalidArgument(format!(
            "horizon must be positive, got {}",
            cfg.t
        )));
    }
    if cfg.n_paths < 2 {
        return Err(VerifyError::InvalidArgument(format!(
            "need at least 2 paths for a standard error, got {}",
            cfg.n_paths
        )));
    }
    if cfg.n_steps == 0 {
        return Err(VerifyError::InvalidArgument("n_steps must be positive".into()));
    }
    let required = (MIN_STEPS_PER_UNIT_TIME * cfg.t).ceil();
    if discretized && (cfg.n_steps as f64) < required {
        return Err(VerifyError::InsufficientSteps {
            n_steps: cfg.n_steps,
            t: cfg.t,
            required: required as usize,
        });
    }
    if cfg.workers == Some(0) {
        return Err(VerifyError::InvalidArgument("workers must be positive".into()));
    }
    Ok(())
}

/// Runs `path` for every path index on the worker pool and returns the
/// results in path order.
fn run_paths<F>(cfg: &McConfig, path: F) -> Result<Vec<f64>, VerifyError>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| VerifyError::InvalidArgument(format!("worker pool: {e}")))?;
    let seed = cfg.seed;
    pool.install(|| {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let v = path(&mut path_rng(seed, i));
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(VerifyError::NonFinitePath { path: i, seed })
                }
            })
            .collect()
    })
}

/// (1/t) log mean exp(xᵢ) and its delta-method standard error.
fn log_mean_exp_rate(logs: &[f64], t: f64) -> Result<(f64, f64), VerifyError> {
    let (lo, hi) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if lo == hi {
        return Err(VerifyError::DegenerateVariance);
    }
    let n = logs.len() as f64;
    let scaled: Vec<f64> = logs.iter().map(|&x| (x - hi).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / n;
    let var = scaled.iter().map(|&w| (w - mean) * (w - mean)).sum::<f64>() / (n - 1.0);
    let lambda_hat = (hi + mean.ln()) / t;
    let se = (var / n).sqrt() / mean / t;
    Ok((lambda_hat, se))
}

/// Draws from a density on (0, T] by inverting a tabulated CDF.
struct InverseCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(d: &GenericDensity) -> Self {
        let n = INVERSE_CDF_CELLS;
        let h = d.support_bound() / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in nodes.windows(2) {
            acc += 0.5 * h * (d.pdf(w[0]) + d.pdf(w[1]));
            cdf.push(acc);
        }
        Self { nodes, cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let target = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let i = self.cdf.partition_point(|&c| c < target).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        self.nodes[i - 1] + frac * (self.nodes[i] - self.nodes[i - 1])
    }
}

enum JumpSampler {
    Constant(f64),
    Exponential(Exp<f64>),
    Table(InverseCdf),
}

impl JumpSampler {
    fn new(law: &JumpLaw) -> Result<Self, VerifyError> {
        Ok(match law {
            JumpLaw::Constant { y } => JumpSampler::Constant(*y),
            JumpLaw::Exponential { rate } => JumpSampler::Exponential(
                Exp::new(*rate).map_err(|e| VerifyError::InvalidArgument(e.to_string()))?,
            ),
            JumpLaw::GenericDensity(d) => JumpSampler::Table(InverseCdf::new(d)),
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            JumpSampler::Constant(y) => *y,
            JumpSampler::Exponential(e) => e.sample(rng),
            JumpSampler::Table(t) => t.sample(rng),
        }
    }
}

/// log(V_t/V₀) for GBM, sampled exactly.
fn gbm_log_wealth(p: &GbmParams, alpha: f64, t: f64, rng: &mut ChaCha8Rng) -> f64 {
    let drift = alpha * p.mu + (1.0 - alpha) * p.r - 0.5 * alpha * alpha * p.sigma * p.sigma;
    drift * t + alpha * p.sigma * t.sqrt() * normal(rng)
}

fn jump_log_wealth(
    p: &JumpDiffusionParams,
    jumps: &JumpSampler,
    count: &Poisson<f64>,
    alpha: f64,
    t: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let diffusion = GbmParams {
        mu: p.mu,
        sigma: p.sigma,
        r: p.r,
    };
    let mut x = gbm_log_wealth(&diffusion, alpha, t, rng);
    // the terminal value does not depend on when the jumps happen
    let n = count.sample(rng) as u64;
    for _ in 0..n {
        let y = jumps.sample(rng);
        x += (alpha * (y - 1.0) + 1.0).ln();
    }
    x
}

/// Full-truncation Euler for (log V, ν).
fn heston_log_wealth(p: &HestonParams, alpha: f64, cfg: &McConfig, rng: &mut ChaCha8Rng) -> f64 {
    let dt = cfg.dt();
    let sq_dt = dt.sqrt();
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    let carry = alpha * p.mu + (1.0 - alpha) * p.r;
    let (mut x, mut nu) = (0.0_f64, p.nu0);
    for _ in 0..cfg.n_steps {
        let dw = sq_dt * normal(rng);
        let db = p.rho * dw + rho_c * sq_dt * normal(rng);
        let nu_pos = nu.max(0.0);
        debug_assert!(nu_pos >= 0.0);
        let vol = nu_pos.sqrt();
        x += (carry - 0.5 * alpha * alpha * nu_pos) * dt + alpha * vol * db;
        nu += p.kappa * (p.gamma_level - nu_pos) * dt + p.delta * vol * dw;
    }
    x
}

/// ∫₀ᵗ ν ds for the 3/2 variance, simulated through X = 1/ν, which is the CIR
/// process dX = (κ + δ² − κγX)dt − δ√X dW. Returns NaN if X leaves (0, ∞).
fn three_halves_integrated_variance(
    p: &ThreeHalvesParams,
    cfg: &McConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let dt = cfg.dt();
    let sq_dt = dt.sqrt();
    let pull = p.kappa + p.delta * p.delta;
    let kg = p.kappa * p.gamma_level;
    let mut x = 1.0 / p.nu0;
    let mut nu = p.nu0;
    let mut integral = 0.0;
    for _ in 0..cfg.n_steps {
        let x_pos = x.max(0.0);
        debug_assert!(x_pos >= 0.0);
        x += (pull - kg * x_pos) * dt - p.delta * x_pos.sqrt() * sq_dt * normal(rng);
        if x <= 0.0 {
            return f64::NAN;
        }
        let next = 1.0 / x;
        integral += 0.5 * (nu + next) * dt;
        nu = next;
    }
    integral
}

fn three_halves_log_wealth(
    p: &ThreeHalvesParams,
    alpha: f64,
    cfg: &McConfig,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let integral = three_halves_integrated_variance(p, cfg, rng);
    // the stock noise is independent of ν, so ∫√ν dB is N(0, ∫ν) given the path
    let carry = (alpha * p.mu + (1.0 - alpha) * p.r) * cfg.t;
    carry - 0.5 * alpha * alpha * integral + alpha * integral.sqrt() * normal(rng)
}

/// Exact Gaussian transition of r over each step, trapezoidal ∫r.
fn vasicek_log_wealth(p: &VasicekParams, alpha: f64, cfg: &McConfig, rng: &mut ChaCha8Rng) -> f64 {
    let dt = cfg.dt();
    let sq_dt = dt.sqrt();
    let k = p.kappa;
    let decay = (-k * dt).exp();
    // Var of the rate shock δ∫e^{−κ(Δ−s)}dW and its covariance with ΔW
    let shock_var = p.delta * p.delta * (-(-2.0 * k * dt).exp_m1()) / (2.0 * k);
    let shock_cov = p.delta * (-(-k * dt).exp_m1()) / k;
    let beta = shock_cov / dt;
    let resid = (shock_var - beta * shock_cov).max(0.0).sqrt();
    let rho_c = (1.0 - p.rho * p.rho).sqrt();
    let stock = alpha * p.mu - 0.5 * alpha * alpha * p.sigma * p.sigma;

    let (mut x, mut r) = (0.0_f64, p.r0);
    for _ in 0..cfg.n_steps {
        let dw = sq_dt * normal(rng);
        let db = p.rho * dw + rho_c * sq_dt * normal(rng);
        let next = p.gamma_level + (r - p.gamma_level) * decay + beta * dw + resid * normal(rng);
        x += stock * dt + alpha * p.sigma * db + (1.0 - alpha) * 0.5 * (r + next) * dt;
        r = next;
    }
    x
}

/// Estimates (1/t) log E[(V_t/V₀)^θ] from `cfg.n_paths` simulated paths.
pub fn mc_growth_estimate(
    model: &ModelSpec,
    u: Utility,
    alpha: f64,
    cfg: &McConfig,
) -> Result<SimEstimate, VerifyError> {
    let alpha = admissible_alpha(alpha)?;
    let discretized = matches!(
        model,
        ModelSpec::Heston(_) | ModelSpec::ThreeHalves(_) | ModelSpec::Vasicek(_)
    );
    check_config(cfg, discretized)?;
    let th = u.theta();
    let estimate = |lambda_hat: f64, std_error: f64| SimEstimate {
        lambda_hat,
        std_error,
        horizon_t: cfg.t,
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
    };
    if alpha == 0.0 {
        if let Some(r) = model.constant_rate() {
            // all wealth in the bond: V_t/V₀ = e^{rt}
            return Ok(estimate(th * r, 0.0));
        }
    }

    let logs = match model {
        ModelSpec::Gbm(p) => run_paths(cfg, |rng| th * gbm_log_wealth(p, alpha, cfg.t, rng))?,
        ModelSpec::Heston(p) => run_paths(cfg, |rng| th * heston_log_wealth(p, alpha, cfg, rng))?,
        ModelSpec::ThreeHalves(p) => {
            run_paths(cfg, |rng| th * three_halves_log_wealth(p, alpha, cfg, rng))?
        }
        ModelSpec::Jump(p) => {
            let jumps = JumpSampler::new(&p.jump)?;
            let count = Poisson::new(p.lambda_j * cfg.t)
                .map_err(|e| VerifyError::InvalidArgument(e.to_string()))?;
            run_paths(cfg, |rng| {
                th * jump_log_wealth(p, &jumps, &count, alpha, cfg.t, rng)
            })?
        }
        ModelSpec::Vasicek(p) => {
            run_paths(cfg, |rng| th * vasicek_log_wealth(p, alpha, cfg, rng))?
        }
    };
    let (lambda_hat, std_error) = log_mean_exp_rate(&logs, cfg.t)?;
    Ok(estimate(lambda_hat, std_error))
}

/// Estimates E[exp(−λ ∫₀ᵗ ν ds)] for the 3/2 variance.
pub fn mc_laplace_three_halves(
    p: &ThreeHalvesParams,
    lambda_l: f64,
    cfg: &McConfig,
) -> Result<LaplaceEstimate, VerifyError> {
    if !(lambda_l >= 0.0 && lambda_l.is_finite()) {
        return Err(VerifyError::InvalidArgument(format!(
            "Laplace variable must be >= 0, got {lambda_l}"
        )));
    }
    check_config(cfg, true)?;
    let estimate = |mean: f64, std_error: f64| LaplaceEstimate {
        mean,
        std_error,
        horizon_t: cfg.t,
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
    };
    if lambda_l == 0.0 {
        return Ok(estimate(1.0, 0.0));
    }
    let values = run_paths(cfg, |rng| {
        (-lambda_l * three_halves_integrated_variance(p, cfg, rng)).exp()
    })?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(VerifyError::DegenerateVariance);
    }
    Ok(estimate(mean, (var / n).sqrt()))
}
