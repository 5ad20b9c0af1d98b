//! Closed-form long-term growth rates Λ(α) = lim (1/t) log E[(V_t/V_0)^θ]
//! for a constant fraction α of wealth held in the stock.
//!
//! The Heston and 3/2 rates contain a difference of two large square roots.
//! Both are evaluated in rationalized form so that Λ(0) = θr holds exactly
//! and small vol-of-vol does not cost digits.

use serde::Serialize;
use thiserror::Error;

use crate::params::{
    GbmParams, HestonParams, JumpDiffusionParams, JumpLaw, ModelSpec, ThreeHalvesParams, Utility,
    VasicekParams,
};
use crate::quad::{self, QuadError, QuadOptions};
use crate::specfun::{self, SpecFunError};

/// Slack accepted outside [0, 1] before α is rejected; values inside the
/// slack are clamped.
pub const ALPHA_SLACK: f64 = 1e-9;

/// Relative tolerance on the Heston identity C₁C₃ − C₂² = κ⁶γ⁴(θ − θ²)/δ⁶.
pub const HESTON_IDENTITY_TOL: f64 = 1e-12;

const MOMENT_QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-12,
    max_panels: quad::DEFAULT_MAX_PANELS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrowthError {
    #[error("alpha = {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),
    #[error("jump moment quadrature failed: {0}")]
    QuadratureFailure(#[from] QuadError),
    #[error(transparent)]
    SpecialFunction(#[from] SpecFunError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Maps α into [0, 1], tolerating round-off of up to [`ALPHA_SLACK`].
pub fn admissible_alpha(alpha: f64) -> Result<f64, GrowthError> {
    if (-ALPHA_SLACK..=1.0 + ALPHA_SLACK).contains(&alpha) {
        Ok(alpha.clamp(0.0, 1.0))
    } else {
        Err(GrowthError::AlphaOutOfRange(alpha))
    }
}

fn clamp_alpha(alpha: f64) -> f64 {
    match admissible_alpha(alpha) {
        Ok(a) => a,
        Err(e) => panic!("{e}"),
    }
}

/// Λ(α) = θ[αμ + (1 − α)r − ½α²σ²] + ½θ²α²σ².
///
/// Panics if α is outside [0, 1] by more than [`ALPHA_SLACK`].
pub fn lambda_gbm(p: &GbmParams, u: Utility, alpha: f64) -> f64 {
    let a = clamp_alpha(alpha);
    let th = u.theta();
    let var = a * a * p.sigma * p.sigma;
    th * (a * p.mu + (1.0 - a) * p.r - 0.5 * var) + 0.5 * th * th * var
}

/// The constants of the Heston growth rate
/// Λ(α) = −√(C₁α² − 2C₂α + C₃) + C₄α + C₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HestonCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// C₁C₃ − C₂² evaluated without cancellation as κ⁶γ⁴(θ − θ²)/δ⁶.
    pub discriminant: f64,
}

/// Computes C₀…C₄ and checks C₁C₃ − C₂² against its closed form.
pub fn heston_coefficients(
    p: &HestonParams,
    u: Utility,
) -> Result<HestonCoefficients, GrowthError> {
    let c = heston_coefficients_unchecked(p, u);
    let product = c.c1 * c.c3;
    let square = c.c2 * c.c2;
    let gap = ((product - square) - c.discriminant).abs();
    let scale = product.max(square);
    if !(c.c1 > 0.0 && c.c3 > 0.0 && c.discriminant > 0.0) || gap > HESTON_IDENTITY_TOL * scale {
        return Err(GrowthError::InternalInvariantViolation(format!(
            "Heston C1*C3 - C2^2 = {} but kappa^6 gamma^4 (theta - theta^2)/delta^6 = {} (c1 = {}, c3 = {})",
            product - square,
            c.discriminant,
            c.c1,
            c.c3
        )));
    }
    Ok(c)
}

fn heston_coefficients_unchecked(p: &HestonParams, u: Utility) -> HestonCoefficients {
    let th = u.theta();
    let (k, g, d, rho) = (p.kappa, p.gamma_level, p.delta, p.rho);
    let d2 = d * d;
    let kg_d2 = k * g / d2;
    // κ²γ²/δ⁴
    let kg_d2_sq = kg_d2 * kg_d2;
    HestonCoefficients {
        c0: k * kg_d2 + th * p.r,
        c1: kg_d2_sq * (d2 * th - d2 * th * th * (1.0 - rho * rho)),
        c2: d * k * rho * th * kg_d2_sq,
        c3: k * k * kg_d2_sq,
        c4: -th * rho * k * g / d + th * (p.mu - p.r),
        discriminant: k.powi(6) * g.powi(4) * u.risk_term() / d2.powi(3),
    }
}

/// Heston Λ(α); independent of the initial variance.
///
/// Panics if α is outside [0, 1] by more than [`ALPHA_SLACK`].
pub fn lambda_heston(p: &HestonParams, u: Utility, alpha: f64) -> f64 {
    let a = clamp_alpha(alpha);
    let c = heston_coefficients_unchecked(p, u);
    heston_lambda_from(&c, u.theta() * p.r, a)
}

pub(crate) fn heston_lambda_from(c: &HestonCoefficients, theta_r: f64, a: f64) -> f64 {
    // C₀ − √C₃ = θr, and √R − √C₃ = (C₁α² − 2C₂α)/(√R + √C₃)
    let shift = a * (c.c1 * a - 2.0 * c.c2);
    let radicand = c.c3 + shift;
    theta_r - shift / (radicand.sqrt() + c.c3.sqrt()) + c.c4 * a
}

/// Heston Λ′(α) = C₄ − (C₁α − C₂)/√(C₁α² − 2C₂α + C₃).
pub fn heston_lambda_prime(c: &HestonCoefficients, alpha: f64) -> f64 {
    let x = c.c1 * alpha - c.c2;
    c.c4 - x / (c.c3 + alpha * (c.c1 * alpha - 2.0 * c.c2)).sqrt()
}

/// (½ + κ/δ²), the recurring 3/2 constant.
pub fn three_halves_shift(p: &ThreeHalvesParams) -> f64 {
    0.5 + p.kappa / (p.delta * p.delta)
}

/// 3/2 Λ(α) = θαμ + θ(1 − α)r + κγ(k − √(k² + α²(θ − θ²)/δ²)), k = ½ + κ/δ².
///
/// Panics if α is outside [0, 1] by more than [`ALPHA_SLACK`].
pub fn lambda_three_halves(p: &ThreeHalvesParams, u: Utility, alpha: f64) -> f64 {
    let a = clamp_alpha(alpha);
    let th = u.theta();
    let k = three_halves_shift(p);
    let q = a * a * u.risk_term() / (p.delta * p.delta);
    th * (a * p.mu + (1.0 - a) * p.r) - p.kappa * p.gamma_level * q / (k + (k * k + q).sqrt())
}

/// Exponent pair (a, b) of the integrated-variance transform at Laplace
/// variable `lambda_l`.
pub fn three_halves_exponents(p: &ThreeHalvesParams, lambda_l: f64) -> (f64, f64) {
    let k = three_halves_shift(p);
    let extra = 2.0 * lambda_l / (p.delta * p.delta);
    let root = (k * k + extra).sqrt();
    (extra / (root + k), 1.0 + 2.0 * root)
}

/// ln E[exp(−λ ∫₀ᵗ ν_s ds)] for the 3/2 variance started at ν₀.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
pub fn log_laplace_three_halves_finite_t(
    p: &ThreeHalvesParams,
    lambda_l: f64,
    t: f64,
) -> Result<f64, GrowthError> {
    if !(lambda_l >= 0.0 && lambda_l.is_finite()) {
        return Err(GrowthError::InvalidArgument(format!(
            "Laplace variable must be >= 0, got {lambda_l}"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(GrowthError::InvalidArgument(format!(
            "horizon must be > 0, got {t}"
        )));
    }
    let (a, b) = three_halves_exponents(p, lambda_l);
    if a == 0.0 {
        return Ok(0.0);
    }
    let kg = p.kappa * p.gamma_level;
    let zeta = 2.0 * kg / (p.delta * p.delta * p.nu0 * (kg * t).exp_m1());
    let m = specfun::kummer_m(a, b, -zeta)?;
    if !(m.value > 0.0) {
        return Err(GrowthError::InternalInvariantViolation(format!(
            "Kummer M({a}, {b}, {}) = {} is not positive",
            -zeta, m.value
        )));
    }
    Ok(specfun::log_gamma(b - a)? - specfun::log_gamma(b)? + a * zeta.ln() + m.value.ln())
}

/// E[exp(−λ ∫₀ᵗ ν_s ds)] for the 3/2 variance, via Kummer's function.
pub fn laplace_three_halves_finite_t(
    p: &ThreeHalvesParams,
    lambda_l: f64,
    t: f64,
) -> Result<f64, GrowthError> {
    log_laplace_three_halves_finite_t(p, lambda_l, t).map(f64::exp)
}

/// Which power of Z = α(Y − 1) + 1 a jump moment integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Moment {
    /// Z^θ
    Utility,
    /// Z^{θ−1}(Y − 1)
    Slope,
}

/// E[(α(Y₁ − 1) + 1)^θ].
pub fn jump_utility_moment(law: &JumpLaw, u: Utility, alpha: f64) -> Result<f64, GrowthError> {
    let a = admissible_alpha(alpha)?;
    if a == 0.0 {
        return Ok(1.0);
    }
    let th = u.theta();
    match law {
        JumpLaw::Constant { y } => Ok((a * (y - 1.0) + 1.0).powf(th)),
        JumpLaw::Exponential { rate } => {
            // e^{x}(α/ρ)^θ Γ(θ + 1, x), x = ρ(1/α − 1)
            let x = rate * (1.0 / a - 1.0);
            let scaled = specfun::upper_incomplete_gamma_scaled(th + 1.0, x)?;
            Ok((a / rate).powf(th) * scaled.value)
        }
        JumpLaw::GenericDensity(d) => {
            density_moment(&|y| d.pdf(y), Some(d.support_bound()), a, th, Moment::Utility)
        }
    }
}

/// E[(α(Y₁ − 1) + 1)^{θ−1}(Y₁ − 1)], the jump part of Λ′(α)/(λθ).
pub fn jump_slope_moment(law: &JumpLaw, u: Utility, alpha: f64) -> Result<f64, GrowthError> {
    let a = admissible_alpha(alpha)?;
    let th = u.theta();
    match law {
        JumpLaw::Constant { y } => Ok((a * (y - 1.0) + 1.0).powf(th - 1.0) * (y - 1.0)),
        _ if a == 0.0 => Ok(law.mean()? - 1.0),
        JumpLaw::Exponential { rate } => {
            let rate = *rate;
            let pdf = move |y: f64| if y > 0.0 { rate * (-rate * y).exp() } else { 0.0 };
            density_moment(&pdf, None, a, th, Moment::Slope)
        }
        JumpLaw::GenericDensity(d) => {
            density_moment(&|y| d.pdf(y), Some(d.support_bound()), a, th, Moment::Slope)
        }
    }
}

/// Quadrature of a jump moment against `pdf` on (0, upper] (or (0, ∞)).
///
/// The range is split at y = 1. For the slope moment with α ≥ ½ the lower
/// piece is integrated in w = Z^θ, where Z^{θ−1} dZ = dw/θ: this removes the
/// Z^{θ−1} singularity that appears at y = 0 when α = 1.
fn density_moment(
    pdf: &dyn Fn(f64) -> f64,
    upper: Option<f64>,
    alpha: f64,
    theta: f64,
    moment: Moment,
) -> Result<f64, GrowthError> {
    let z_of = |y: f64| alpha * (y - 1.0) + 1.0;
    let integrand = |y: f64| {
        let p = pdf(y);
        if p == 0.0 {
            return 0.0;
        }
        match moment {
            Moment::Utility => z_of(y).powf(theta) * p,
            Moment::Slope => z_of(y).powf(theta - 1.0) * (y - 1.0) * p,
        }
    };
    let split = upper.map_or(1.0, |u| u.min(1.0));

    let head = if moment == Moment::Slope && alpha >= 0.5 {
        let w_lo = (1.0 - alpha).powf(theta);
        let w_hi = z_of(split).powf(theta);
        let inv_theta = 1.0 / theta;
        let scale = 1.0 / (alpha * theta);
        let mapped = |w: f64| {
            let y = ((w.powf(inv_theta) - (1.0 - alpha)) / alpha).max(0.0);
            (y - 1.0) * pdf(y) * scale
        };
        quad::integrate(&mapped, w_lo, w_hi, MOMENT_QUAD)?.value
    } else {
        quad::integrate(&integrand, 0.0, split, MOMENT_QUAD)?.value
    };

    let tail = match upper {
        Some(u) if u <= split => 0.0,
        Some(u) => quad::integrate(&integrand, split, u, MOMENT_QUAD)?.value,
        None => quad::integrate_to_infinity(&integrand, split, MOMENT_QUAD)?.value,
    };
    Ok(head + tail)
}

/// Jump-diffusion Λ(α) = θ[αμ + (1 − α)r] + ½(θ² − θ)α²σ² + λ(E[Z^θ] − 1).
pub fn lambda_jump(p: &JumpDiffusionParams, u: Utility, alpha: f64) -> Result<f64, GrowthError> {
    let a = admissible_alpha(alpha)?;
    let diffusion = lambda_gbm(&diffusion_part(p), u, a);
    let moment = jump_utility_moment(&p.jump, u, a)?;
    Ok(diffusion + p.lambda_j * (moment - 1.0))
}

/// Jump-diffusion Λ′(α).
pub fn jump_lambda_prime(
    p: &JumpDiffusionParams,
    u: Utility,
    alpha: f64,
) -> Result<f64, GrowthError> {
    let a = admissible_alpha(alpha)?;
    let th = u.theta();
    let slope = jump_slope_moment(&p.jump, u, a)?;
    Ok(th * (p.mu - p.r) + (th * th - th) * p.sigma * p.sigma * a + p.lambda_j * th * slope)
}

pub(crate) fn diffusion_part(p: &JumpDiffusionParams) -> GbmParams {
    GbmParams {
        mu: p.mu,
        sigma: p.sigma,
        r: p.r,
    }
}

/// Vasicek Λ(α) written as constant + linear·α + quadratic·α².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VasicekQuadratic {
    pub constant: f64,
    pub linear: f64,
    pub quadratic: f64,
}

impl VasicekQuadratic {
    pub fn eval(&self, a: f64) -> f64 {
        self.constant + a * (self.linear + a * self.quadratic)
    }
}

/// δ²θ/(2κ²) − δθσρ/κ + σ²θ/2 − σ²/2, the α² coefficient divided by θ.
pub fn vasicek_curvature(p: &VasicekParams, u: Utility) -> f64 {
    let th = u.theta();
    let (k, d, s, rho) = (p.kappa, p.delta, p.sigma, p.rho);
    d * d * th / (2.0 * k * k) - d * th * s * rho / k + s * s * th / 2.0 - s * s / 2.0
}

pub fn vasicek_quadratic(p: &VasicekParams, u: Utility) -> VasicekQuadratic {
    let th = u.theta();
    let (k, g, d, s, rho) = (p.kappa, p.gamma_level, p.delta, p.sigma, p.rho);
    VasicekQuadratic {
        constant: g * th + d * d * th * th / (2.0 * k * k),
        linear: -g * th + th * p.mu + d * th * th * s * rho / k - d * d * th * th / (k * k),
        quadratic: th * vasicek_curvature(p, u),
    }
}

/// Vasicek Λ(α); independent of the initial rate.
///
/// Panics if α is outside [0, 1] by more than [`ALPHA_SLACK`].
pub fn lambda_vasicek(p: &VasicekParams, u: Utility, alpha: f64) -> f64 {
    vasicek_quadratic(p, u).eval(clamp_alpha(alpha))
}

/// Λ(α) for any model.
pub fn lambda(model: &ModelSpec, u: Utility, alpha: f64) -> Result<f64, GrowthError> {
    let a = admissible_alpha(alpha)?;
    Ok(match model {
        ModelSpec::Gbm(p) => lambda_gbm(p, u, a),
        ModelSpec::Heston(p) => lambda_heston(p, u, a),
        ModelSpec::ThreeHalves(p) => lambda_three_halves(p, u, a),
        ModelSpec::Jump(p) => lambda_jump(p, u, a)?,
        ModelSpec::Vasicek(p) => lambda_vasicek(p, u, a),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthSample {
    pub alpha: f64,
    pub lambda: f64,
}

/// Λ sampled on a uniform α grid covering [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCurve {
    pub model: ModelSpec,
    pub theta: Utility,
    pub samples: Vec<GrowthSample>,
}

impl GrowthCurve {
    /// The sample with the largest Λ.
    pub fn best(&self) -> GrowthSample {
        *self
            .samples
            .iter()
            .max_by(|a, b| a.lambda.total_cmp(&b.lambda))
            .expect("a curve has at least two samples")
    }
}

pub fn growth_curve(
    model: &ModelSpec,
    u: Utility,
    n_points: usize,
) -> Result<GrowthCurve, GrowthError> {
    if n_points < 2 {
        return Err(GrowthError::InvalidArgument(format!(
            "a growth curve needs at least 2 points, got {n_points}"
        )));
    }
    let last = (n_points - 1) as f64;
    let samples = (0..n_points)
        .map(|i| {
            let alpha = i as f64 / last;
            lambda(model, u, alpha).map(|lambda| GrowthSample { alpha, lambda })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GrowthCurve {
        model: model.clone(),
        theta: u,
        samples,
    })
}
