//! Model parameter records, the utility exponent, and their validation.
//!
//! Every record here is a plain value type. `validate` checks the invariants
//! of a [`ModelSpec`] and reports every violation at once, so callers can
//! surface a complete list to the user instead of failing on the first one.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad;

/// Required agreement between a generic jump density's integral and 1.
pub const DENSITY_NORMALIZATION_TOL: f64 = 1e-8;
/// Mass a generic jump density may leave beyond its truncation bound.
pub const DENSITY_TAIL_MASS: f64 = 1e-10;

/// CRRA utility exponent θ = 1 − γ, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Utility {
    theta: f64,
}

impl Utility {
    pub fn new(theta: f64) -> Result<Self, ParamError> {
        if theta > 0.0 && theta < 1.0 {
            Ok(Self { theta })
        } else {
            Err(ParamError::OutOfRange {
                field: "theta",
                value: theta,
                constraint: "0 < theta < 1",
            })
        }
    }

    /// Builds the exponent from the relative risk aversion γ ∈ (0, 1).
    pub fn from_risk_aversion(gamma_rra: f64) -> Result<Self, ParamError> {
        if gamma_rra > 0.0 && gamma_rra < 1.0 {
            Ok(Self {
                theta: 1.0 - gamma_rra,
            })
        } else {
            Err(ParamError::OutOfRange {
                field: "gamma_rra",
                value: gamma_rra,
                constraint: "0 < gamma_rra < 1",
            })
        }
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// θ − θ², the variance penalty that appears in every model.
    #[inline]
    pub fn risk_term(&self) -> f64 {
        self.theta - self.theta * self.theta
    }
}

impl<'de> Deserialize<'de> for Utility {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            theta: f64,
        }
        let raw = Raw::deserialize(d)?;
        Utility::new(raw.theta).map_err(serde::de::Error::custom)
    }
}

/// Shorthand for [`Utility::from_risk_aversion`].
pub fn theta_from_gamma(gamma_rra: f64) -> Result<Utility, ParamError> {
    Utility::from_risk_aversion(gamma_rra)
}

/// Geometric Brownian motion stock with a constant short rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
}

/// Heston stock: CIR variance correlated with the stock driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub mu: f64,
    pub kappa: f64,
    /// Long-run variance level.
    pub gamma_level: f64,
    /// Volatility of variance.
    pub delta: f64,
    pub rho: f64,
    pub r: f64,
    pub nu0: f64,
}

impl HestonParams {
    /// 2κγ − δ², positive exactly when the Feller condition holds.
    pub fn feller_margin(&self) -> f64 {
        2.0 * self.kappa * self.gamma_level - self.delta * self.delta
    }
}

/// 3/2 stock with variance dν = κν(γ − ν)dt + δν^{3/2}dW, independent of the
/// stock driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeHalvesParams {
    pub mu: f64,
    pub kappa: f64,
    pub gamma_level: f64,
    pub delta: f64,
    pub r: f64,
    pub nu0: f64,
}

/// A probability density on (0, ∞) truncated to `[0, support_bound]`.
#[derive(Clone)]
pub struct GenericDensity {
    name: String,
    pdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support_bound: f64,
}

impl GenericDensity {
    pub fn new<F>(name: impl Into<String>, support_bound: f64, pdf: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            pdf: Arc::new(pdf),
            support_bound,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    #[inline]
    pub fn pdf(&self, y: f64) -> f64 {
        if y <= 0.0 || y > self.support_bound {
            0.0
        } else {
            (self.pdf)(y)
        }
    }

    /// ∫₀^T p(y) dy.
    pub fn total_mass(&self) -> Result<f64, quad::QuadError> {
        self.integrate(|y| self.pdf(y))
    }

    /// E[Y] over the truncated support.
    pub fn mean(&self) -> Result<f64, quad::QuadError> {
        self.integrate(|y| y * self.pdf(y))
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64, quad::QuadError> {
        let opts = quad::QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_panels: quad::DEFAULT_MAX_PANELS,
        };
        quad::integrate(&f, 0.0, self.support_bound, opts).map(|q| q.value)
    }
}

impl fmt::Debug for GenericDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericDensity")
            .field("name", &self.name)
            .field("support_bound", &self.support_bound)
            .finish_non_exhaustive()
    }
}

impl PartialEq for GenericDensity {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.pdf, &other.pdf)
            && self.support_bound == other.support_bound
            && self.name == other.name
    }
}

/// Law of the multiplicative jump size Y₁.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    /// Y₁ ≡ y.
    Constant { y: f64 },
    /// Y₁ ~ Exp(rate).
    Exponential { rate: f64 },
    GenericDensity(GenericDensity),
}

impl JumpLaw {
    /// E[Y₁].
    pub fn mean(&self) -> Result<f64, quad::QuadError> {
        match self {
            JumpLaw::Constant { y } => Ok(*y),
            JumpLaw::Exponential { rate } => Ok(1.0 / rate),
            JumpLaw::GenericDensity(d) => d.mean(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            JumpLaw::Constant { .. } => "constant",
            JumpLaw::Exponential { .. } => "exponential",
            JumpLaw::GenericDensity(_) => "generic",
        }
    }
}

impl Serialize for JumpLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        match self {
            JumpLaw::Constant { y } => {
                let mut st = s.serialize_struct("JumpLaw", 2)?;
                st.serialize_field("kind", "constant")?;
                st.serialize_field("y", y)?;
                st.end()
            }
            JumpLaw::Exponential { rate } => {
                let mut st = s.serialize_struct("JumpLaw", 2)?;
                st.serialize_field("kind", "exponential")?;
                st.serialize_field("rate", rate)?;
                st.end()
            }
            JumpLaw::GenericDensity(d) => {
                let mut st = s.serialize_struct("JumpLaw", 3)?;
                st.serialize_field("kind", "generic")?;
                st.serialize_field("name", d.name())?;
                st.serialize_field("support_bound", &d.support_bound())?;
                st.end()
            }
        }
    }
}

/// GBM diffusion plus compound Poisson multiplicative jumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpDiffusionParams {
    pub mu: f64,
    pub sigma: f64,
    /// Poisson intensity of the jumps.
    pub lambda_j: f64,
    pub jump: JumpLaw,
    pub r: f64,
}

/// Black–Scholes stock with a Vasicek short rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VasicekParams {
    pub mu: f64,
    pub sigma: f64,
    pub kappa: f64,
    /// Long-run rate level.
    pub gamma_level: f64,
    pub delta: f64,
    pub rho: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Gbm(GbmParams),
    Heston(HestonParams),
    ThreeHalves(ThreeHalvesParams),
    Jump(JumpDiffusionParams),
    Vasicek(VasicekParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Gbm(_) => ModelKind::Gbm,
            ModelSpec::Heston(_) => ModelKind::Heston,
            ModelSpec::ThreeHalves(_) => ModelKind::ThreeHalves,
            ModelSpec::Jump(_) => ModelKind::Jump,
            ModelSpec::Vasicek(_) => ModelKind::Vasicek,
        }
    }

    /// The constant short rate, or `None` for the stochastic-rate model.
    pub fn constant_rate(&self) -> Option<f64> {
        match self {
            ModelSpec::Gbm(p) => Some(p.r),
            ModelSpec::Heston(p) => Some(p.r),
            ModelSpec::ThreeHalves(p) => Some(p.r),
            ModelSpec::Jump(p) => Some(p.r),
            ModelSpec::Vasicek(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbm,
    Heston,
    ThreeHalves,
    Jump,
    Vasicek,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gbm => "gbm",
            ModelKind::Heston => "heston",
            ModelKind::ThreeHalves => "three_halves",
            ModelKind::Jump => "jump",
            ModelKind::Vasicek => "vasicek",
        })
    }
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("Feller condition violated: 2*kappa*gamma_level = {two_kappa_gamma} <= delta^2 = {delta_sq}")]
    FellerViolation { two_kappa_gamma: f64, delta_sq: f64 },
    #[error("{field} = {value} is out of range ({constraint})")]
    OutOfRange {
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("generic jump density '{name}' is not a valid density: {reason}")]
    BadDensity { name: String, reason: String },
}

/// Every invariant violated by a parameter record.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} invalid parameter(s): {}", .violations.len(), join(.violations))]
pub struct ValidationError {
    pub violations: Vec<ParamError>,
}

fn join(v: &[ParamError]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

struct Checker(Vec<ParamError>);

impl Checker {
    fn positive(&mut self, field: &'static str, value: f64) {
        if !(value > 0.0 && value.is_finite()) {
            self.0.push(ParamError::OutOfRange {
                field,
                value,
                constraint: "must be finite and > 0",
            });
        }
    }

    fn finite(&mut self, field: &'static str, value: f64) {
        if !value.is_finite() {
            self.0.push(ParamError::OutOfRange {
                field,
                value,
                constraint: "must be finite",
            });
        }
    }

    fn correlation(&mut self, field: &'static str, value: f64) {
        if !(-1.0..=1.0).contains(&value) {
            self.0.push(ParamError::OutOfRange {
                field,
                value,
                constraint: "-1 <= rho <= 1",
            });
        }
    }
}

/// Checks every invariant of `spec`, returning it unchanged when all hold.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
pub fn validate(spec: ModelSpec) -> Result<ModelSpec, ValidationError> {
    let mut c = Checker(Vec::new());
    match &spec {
        ModelSpec::Gbm(p) => {
            c.finite("mu", p.mu);
            c.positive("sigma", p.sigma);
            c.finite("r", p.r);
        }
        ModelSpec::Heston(p) => {
            c.finite("mu", p.mu);
            c.positive("kappa", p.kappa);
            c.positive("gamma_level", p.gamma_level);
            c.positive("delta", p.delta);
            c.correlation("rho", p.rho);
            c.finite("r", p.r);
            c.positive("nu0", p.nu0);
            // no tolerance: the stored values must satisfy the strict inequality
            if !(p.feller_margin() > 0.0) {
                c.0.push(ParamError::FellerViolation {
                    two_kappa_gamma: 2.0 * p.kappa * p.gamma_level,
                    delta_sq: p.delta * p.delta,
                });
            }
        }
        ModelSpec::ThreeHalves(p) => {
            c.finite("mu", p.mu);
            c.positive("kappa", p.kappa);
            c.positive("gamma_level", p.gamma_level);
            c.positive("delta", p.delta);
            c.finite("r", p.r);
            c.positive("nu0", p.nu0);
        }
        ModelSpec::Jump(p) => {
            c.finite("mu", p.mu);
            c.positive("sigma", p.sigma);
            c.positive("lambda_j", p.lambda_j);
            c.finite("r", p.r);
            match &p.jump {
                JumpLaw::Constant { y } => c.positive("jump.y", *y),
                JumpLaw::Exponential { rate } => c.positive("jump.rate", *rate),
                JumpLaw::GenericDensity(d) => check_density(&mut c, d),
            }
        }
        ModelSpec::Vasicek(p) => {
            c.finite("mu", p.mu);
            c.positive("sigma", p.sigma);
            c.positive("kappa", p.kappa);
            c.finite("gamma_level", p.gamma_level);
            c.positive("delta", p.delta);
            c.correlation("rho", p.rho);
            c.finite("r0", p.r0);
        }
    }
    if c.0.is_empty() {
        Ok(spec)
    } else {
        Err(ValidationError { violations: c.0 })
    }
}

fn check_density(c: &mut Checker, d: &GenericDensity) {
    let bad = |reason: String| ParamError::BadDensity {
        name: d.name().to_string(),
        reason,
    };
    let bound = d.support_bound();
    if !(bound > 0.0 && bound.is_finite()) {
        c.0.push(bad(format!("truncation bound {bound} must be finite and > 0")));
        return;
    }
    const PROBES: usize = 4096;
    for i in 1..=PROBES {
        let y = bound * i as f64 / PROBES as f64;
        let p = d.pdf(y);
        if !(p >= 0.0 && p.is_finite()) {
            c.0.push(bad(format!("density is {p} at y = {y}")));
            return;
        }
    }
    match d.total_mass() {
        Ok(mass) => {
            if (mass - 1.0).abs() > DENSITY_NORMALIZATION_TOL {
                c.0.push(bad(format!("integrates to {mass}, not 1")));
            } else if mass < 1.0 - DENSITY_TAIL_MASS {
                c.0.push(bad(format!(
                    "mass {mass} on [0, {bound}] leaves more than {DENSITY_TAIL_MASS} beyond the bound"
                )));
            }
        }
        Err(e) => c.0.push(bad(format!("normalization quadrature failed: {e}"))),
    }
    match d.mean() {
        Ok(m) if m.is_finite() => {}
        Ok(m) => c.0.push(bad(format!("mean is {m}"))),
        Err(e) => c.0.push(bad(format!("mean quadrature failed: {e}"))),
    }
}
