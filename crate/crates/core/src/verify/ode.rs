//! Fixed-step RK4 integration of the (A, B) systems whose large-time limits
//! give the Heston and Vasicek growth rates.

use serde::Serialize;

use super::VerifyError;
use crate::params::{HestonParams, Utility, VasicekParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeTrace {
    pub times: Vec<f64>,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub b_limit_closed_form: f64,
    /// Closed-form limit of A(t)/t.
    pub a_slope_closed_form: f64,
}

impl OdeTrace {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trace holds t = 0")
    }

    pub fn a_end(&self) -> f64 {
        *self.a_values.last().expect("trace holds t = 0")
    }

    pub fn b_end(&self) -> f64 {
        *self.b_values.last().expect("trace holds t = 0")
    }

    /// |B(t_end) − B_∞|.
    pub fn b_gap(&self) -> f64 {
        (self.b_end() - self.b_limit_closed_form).abs()
    }

    /// |A(t_end)/t_end − a_slope|.
    pub fn a_slope_gap(&self) -> f64 {
        (self.a_end() / self.t_end() - self.a_slope_closed_form).abs()
    }
}

fn step_count(t_end: f64, dt: f64) -> Result<usize, VerifyError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(VerifyError::InvalidArgument(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if !(dt > 0.0 && dt <= t_end) {
        return Err(VerifyError::InvalidArgument(format!(
            "dt must lie in (0, t_end = {t_end}], got {dt}"
        )));
    }
    Ok((t_end / dt - 1e-9).ceil().max(1.0) as usize)
}

/// Integrates A′ = κγB, B′ = f(B) with B(0) = `b0`, checking each step for
/// instability and, when `upper_root` is given, for the Riccati sign structure.
#[allow(clippy::too_many_arguments)]
fn integrate(
    f: impl Fn(f64) -> f64,
    kappa_gamma: f64,
    b0: f64,
    b_limit: f64,
    a_slope: f64,
    upper_root: Option<f64>,
    t_end: f64,
    dt: f64,
) -> Result<OdeTrace, VerifyError> {
    let n = step_count(t_end, dt)?;
    let h = t_end / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut a_values = Vec::with_capacity(n + 1);
    let mut b_values = Vec::with_capacity(n + 1);
    let (mut a, mut b) = (0.0_f64, b0);
    times.push(0.0);
    a_values.push(a);
    b_values.push(b);
    for i in 1..=n {
        let k1 = f(b);
        let k2 = f(b + 0.5 * h * k1);
        let k3 = f(b + 0.5 * h * k2);
        let k4 = f(b + h * k3);
        let db = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        // A′ depends on B only, so its RK4 stages reuse the B stages
        let da = h / 6.0
            * kappa_gamma
            * (b + 2.0 * (b + 0.5 * h * k1) + 2.0 * (b + 0.5 * h * k2) + (b + h * k3));
        let t = if i == n { t_end } else { i as f64 * h };

        let gap = (b - b_limit).abs();
        let noise = 64.0 * f64::EPSILON * b.abs().max(1.0);
        if db.abs() > 0.5 * gap && db.abs() > noise {
            return Err(VerifyError::StepSizeTooLarge {
                t,
                b,
                delta_b: db,
                b_limit,
            });
        }
        if let Some(upper) = upper_root {
            // below the smaller root B rises, between the roots it falls
            let expect_up = b < b_limit || b > upper;
            let expect_down = b > b_limit && b < upper;
            if gap > noise && ((expect_up && db < -noise) || (expect_down && db > noise)) {
                return Err(VerifyError::SignStructure { t, b, delta_b: db });
            }
        }

        b += db;
        a += da;
        if !(a.is_finite() && b.is_finite()) {
            return Err(VerifyError::InvalidArgument(format!(
                "ODE state left the finite range at t = {t}"
            )));
        }
        times.push(t);
        a_values.push(a);
        b_values.push(b);
    }
    Ok(OdeTrace {
        times,
        a_values,
        b_values,
        b_limit_closed_form: b_limit,
        a_slope_closed_form: a_slope,
    })
}

/// The discriminant Δ = (κ − δθαρ)² + δ²α²(θ − θ²) of the Riccati fixed-point equation.
pub fn heston_riccati_discriminant(p: &HestonParams, u: Utility, alpha: f64) -> f64 {
    let th = u.theta();
    let lead = p.kappa - p.delta * th * alpha * p.rho;
    lead * lead + p.delta * p.delta * alpha * alpha * u.risk_term()
}

/// Integrates B′ = −κB + ½δ²B² + c, A′ = κγB with B(0) = θαρ/δ, where
/// c = ½(θ²α²(1 − ρ²) − θα²) + καρθ/δ.
pub fn integrate_heston_riccati(
    p: &HestonParams,
    u: Utility,
    alpha: f64,
    t_end: f64,
    dt: f64,
) -> Result<OdeTrace, VerifyError> {
    let a = crate::growth::admissible_alpha(alpha)?;
    let th = u.theta();
    let (k, d, rho) = (p.kappa, p.delta, p.rho);
    let forcing = 0.5 * (th * th * a * a * (1.0 - rho * rho) - th * a * a) + k * a * rho * th / d;
    let half_d2 = 0.5 * d * d;
    let f = move |b: f64| -k * b + half_d2 * b * b + forcing;

    let root = heston_riccati_discriminant(p, u, a).sqrt();
    let d2 = d * d;
    let b_limit = k / d2 - root / d2;
    let upper = k / d2 + root / d2;
    let kg = k * p.gamma_level;
    let a_slope = k * kg / d2 - kg / d2 * root;
    integrate(f, kg, th * a * rho / d, b_limit, a_slope, Some(upper), t_end, dt)
}

/// Heston Λ rebuilt from the Riccati limit: a_slope − θαρκγ/δ + θαμ + θ(1 − α)r,
/// with a_slope read off the trace as A(t_end)/t_end.
pub fn heston_lambda_from_trace(
    trace: &OdeTrace,
    p: &HestonParams,
    u: Utility,
    alpha: f64,
) -> f64 {
    let th = u.theta();
    trace.a_end() / trace.t_end() - th * alpha * p.rho * p.kappa * p.gamma_level / p.delta
        + th * alpha * p.mu
        + th * (1.0 - alpha) * p.r
}

/// Integrates B′ = −κB + θ(1 − α) + θασκρ/δ, A′ = κγB + ½δ²B² with
/// B(0) = θασρ/δ.
pub fn integrate_vasicek_ode(
    p: &VasicekParams,
    u: Utility,
    alpha: f64,
    t_end: f64,
    dt: f64,
) -> Result<OdeTrace, VerifyError> {
    let a = crate::growth::admissible_alpha(alpha)?;
    let th = u.theta();
    let (k, d, s, rho) = (p.kappa, p.delta, p.sigma, p.rho);
    let forcing = th * (1.0 - a) + th * a * s * k * rho / d;
    let f = move |b: f64| -k * b + forcing;
    let b_limit = th * (1.0 - a) / k + th * a * s * rho / d;
    let kg = k * p.gamma_level;
    let a_slope = kg * b_limit + 0.5 * d * d * b_limit * b_limit;

    // A′ has a ½δ²B² term here, so A is accumulated in a second pass
    let mut trace = integrate(f, 0.0, th * a * s * rho / d, b_limit, a_slope, None, t_end, dt)?;
    let g = |b: f64| kg * b + 0.5 * d * d * b * b;
    let mut acc = 0.0;
    for i in 1..trace.times.len() {
        let h = trace.times[i] - trace.times[i - 1];
        let b = trace.b_values[i - 1];
        let k1 = f(b);
        let k2 = f(b + 0.5 * h * k1);
        let k3 = f(b + 0.5 * h * k2);
        acc += h / 6.0
            * (g(b) + 2.0 * g(b + 0.5 * h * k1) + 2.0 * g(b + 0.5 * h * k2) + g(b + h * k3));
        trace.a_values[i] = acc;
    }
    Ok(trace)
}

/// Vasicek Λ rebuilt from the ODE limit:
/// a_slope − θασκγρ/δ + ½θ²α²σ²(1 − ρ²) + θαμ − ½θα²σ².
pub fn vasicek_lambda_from_trace(
    trace: &OdeTrace,
    p: &VasicekParams,
    u: Utility,
    alpha: f64,
) -> f64 {
    let th = u.theta();
    let (s, rho) = (p.sigma, p.rho);
    trace.a_end() / trace.t_end()
        - th * alpha * s * p.kappa * p.gamma_level * rho / p.delta
        + 0.5 * th * th * alpha * alpha * s * s * (1.0 - rho * rho)
        + th * alpha * p.mu
        - 0.5 * th * alpha * alpha * s * s
}
