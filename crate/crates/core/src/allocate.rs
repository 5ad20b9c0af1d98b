//! Optimal constant stock fraction α* ∈ [0, 1] maximizing Λ(α).

use serde::{Deserialize, Serialize};

use crate::growth::{
    self, GrowthError, heston_coefficients, jump_lambda_prime, lambda, lambda_gbm,
    three_halves_shift, vasicek_curvature, vasicek_quadratic,
};
use crate::params::{
    GbmParams, HestonParams, JumpDiffusionParams, JumpLaw, ModelSpec, ThreeHalvesParams, Utility,
    VasicekParams,
};

/// Bisection on Λ′ stops once |Λ′| is below this.
pub const SLOPE_TOL: f64 = 1e-12;
/// ...or once the bracket is narrower than this.
pub const BRACKET_TOL: f64 = 1e-14;
/// Final bracket width of the golden-section search.
pub const GOLDEN_TOL: f64 = 1e-10;
/// Points of the concavity probe used by [`numeric_argmax`].
pub const CONCAVITY_PROBE: usize = 64;
/// Grid size used by [`numeric_argmax`] when Λ is not certified concave.
pub const DENSE_GRID: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    BondOnly,
    StockOnly,
    Interior,
    ClampedToOne,
    ClampedToZero,
    ConvexBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    pub alpha_star: f64,
    pub case_label: CaseLabel,
    pub lambda_at_star: f64,
    /// Unconstrained stationary point, when the case analysis computes one.
    pub alpha_dagger: Option<f64>,
}

fn decision(
    alpha_star: f64,
    case_label: CaseLabel,
    lambda_at_star: f64,
    alpha_dagger: Option<f64>,
) -> AllocationDecision {
    AllocationDecision {
        alpha_star,
        case_label,
        lambda_at_star,
        alpha_dagger,
    }
}

/// Maps an unconstrained candidate in (0, ∞) or (−∞, ∞) onto [0, 1].
fn place(candidate: f64) -> (f64, CaseLabel) {
    if candidate >= 1.0 {
        (1.0, CaseLabel::ClampedToOne)
    } else if candidate <= 0.0 {
        (0.0, CaseLabel::ClampedToZero)
    } else {
        (candidate, CaseLabel::Interior)
    }
}

pub fn optimal_gbm(p: &GbmParams, u: Utility) -> AllocationDecision {
    let th = u.theta();
    let excess = p.mu - p.r;
    let curvature = (1.0 - th) * p.sigma * p.sigma;
    let dagger = excess / curvature;
    if excess <= 0.0 {
        decision(0.0, CaseLabel::BondOnly, lambda_gbm(p, u, 0.0), Some(dagger))
    } else if excess >= curvature {
        decision(1.0, CaseLabel::StockOnly, lambda_gbm(p, u, 1.0), Some(dagger))
    } else {
        decision(dagger, CaseLabel::Interior, lambda_gbm(p, u, dagger), Some(dagger))
    }
}

pub fn optimal_heston(p: &HestonParams, u: Utility) -> Result<AllocationDecision, GrowthError> {
    let c = heston_coefficients(p, u)?;
    let theta_r = u.theta() * p.r;
    let at = |a: f64| growth::heston_lambda_from(&c, theta_r, a);
    // Λ′(0) = C₄ + C₂/√C₃
    if c.c4 + c.c2 / c.c3.sqrt() <= 0.0 {
        return Ok(decision(0.0, CaseLabel::BondOnly, at(0.0), None));
    }
    if c.c4 >= c.c1.sqrt() {
        return Ok(decision(1.0, CaseLabel::StockOnly, at(1.0), None));
    }
    let c4_sq = c.c4 * c.c4;
    let dagger = (c.c2 + c.c4 * (c.discriminant / (c.c1 - c4_sq)).sqrt()) / c.c1;
    let (a, label) = place(dagger);
    Ok(decision(a, label, at(a), Some(dagger)))
}

pub fn optimal_three_halves(
    p: &ThreeHalvesParams,
    u: Utility,
) -> Result<AllocationDecision, GrowthError> {
    let th = u.theta();
    let q = u.risk_term();
    let excess = p.mu - p.r;
    let at = |a: f64| growth::lambda_three_halves(p, u, a);
    if excess <= 0.0 {
        return Ok(decision(0.0, CaseLabel::BondOnly, at(0.0), None));
    }
    let kg = p.kappa * p.gamma_level;
    // Λ′(α) → θ(μ − r) − (κγ/δ)√(θ − θ²) as α → ∞
    let premium = th * excess;
    let drag = (kg / p.delta) * q.sqrt();
    let slope_at_infinity = premium - drag;
    if slope_at_infinity >= 0.0 {
        return Ok(decision(1.0, CaseLabel::StockOnly, at(1.0), None));
    }
    let d2 = p.delta * p.delta;
    let radicand = kg * kg * q - premium * premium * d2;
    if radicand <= 0.0 {
        if -slope_at_infinity <= 64.0 * f64::EPSILON * premium {
            // rounding on the boundary between the two cases
            return Ok(decision(1.0, CaseLabel::StockOnly, at(1.0), None));
        }
        return Err(GrowthError::InternalInvariantViolation(format!(
            "3/2 stationary point radicand {radicand} <= 0 while the slope at infinity is {slope_at_infinity}"
        )));
    }
    let k = three_halves_shift(p);
    let dagger = premium * d2 * k / (radicand.sqrt() * q.sqrt());
    let (a, label) = place(dagger);
    Ok(decision(a, label, at(a), Some(dagger)))
}

pub fn optimal_jump(
    p: &JumpDiffusionParams,
    u: Utility,
) -> Result<AllocationDecision, GrowthError> {
    if p.jump == (JumpLaw::Constant { y: 1.0 }) {
        // jumps of size one leave wealth unchanged
        return Ok(optimal_gbm(&growth::diffusion_part(p), u));
    }
    let at = |a: f64| growth::lambda_jump(p, u, a);
    let slope = |a: f64| jump_lambda_prime(p, u, a);
    if slope(0.0)? <= 0.0 {
        return Ok(decision(0.0, CaseLabel::BondOnly, at(0.0)?, None));
    }
    if slope(1.0)? >= 0.0 {
        return Ok(decision(1.0, CaseLabel::ClampedToOne, at(1.0)?, None));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let dagger = loop {
        let mid = 0.5 * (lo + hi);
        let s = slope(mid)?;
        if s.abs() <= SLOPE_TOL || hi - lo <= BRACKET_TOL {
            break mid;
        }
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    };
    Ok(decision(dagger, CaseLabel::Interior, at(dagger)?, Some(dagger)))
}

pub fn optimal_vasicek(p: &VasicekParams, u: Utility) -> AllocationDecision {
    let th = u.theta();
    let quad = vasicek_quadratic(p, u);
    let curvature = vasicek_curvature(p, u);
    if curvature >= 0.0 {
        // Λ is convex: compare the two endpoints, ties go to the bond
        let bond = p.gamma_level + p.delta * p.delta * th / (2.0 * p.kappa * p.kappa);
        let stock = 0.5 * (th - 1.0) * p.sigma * p.sigma + p.mu;
        return if bond >= stock {
            decision(0.0, CaseLabel::ConvexBoundary, quad.eval(0.0), None)
        } else {
            decision(1.0, CaseLabel::ConvexBoundary, quad.eval(1.0), None)
        };
    }
    let dagger = quad.linear / (2.0 * th * -curvature);
    let (a, label) = place(dagger);
    decision(a, label, quad.eval(a), Some(dagger))
}

pub fn optimal(model: &ModelSpec, u: Utility) -> Result<AllocationDecision, GrowthError> {
    match model {
        ModelSpec::Gbm(p) => Ok(optimal_gbm(p, u)),
        ModelSpec::Heston(p) => optimal_heston(p, u),
        ModelSpec::ThreeHalves(p) => optimal_three_halves(p, u),
        ModelSpec::Jump(p) => optimal_jump(p, u),
        ModelSpec::Vasicek(p) => Ok(optimal_vasicek(p, u)),
    }
}

/// Golden-section search for the maximum of a unimodal `f` on [lo, hi].
///
/// Returns the best point evaluated and its value.
pub fn golden_section_max<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64), E> {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Maximizer of Λ on [0, 1] found without any closed form.
///
/// If second differences on a coarse probe certify concavity a golden-section
/// search is used; otherwise a dense grid is scanned and its best cell refined.
/// The endpoints are always compared explicitly.
pub fn numeric_argmax(model: &ModelSpec, u: Utility) -> Result<f64, GrowthError> {
    let f = |a: f64| lambda(model, u, a);
    let last = (CONCAVITY_PROBE - 1) as f64;
    let probe = (0..CONCAVITY_PROBE)
        .map(|i| f(i as f64 / last))
        .collect::<Result<Vec<_>, _>>()?;
    let concave = probe.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] < 0.0);

    let mut best = (0.0, probe[0]);
    let mut consider = |x: f64, v: f64| {
        if v > best.1 {
            best = (x, v);
        }
    };
    consider(1.0, probe[CONCAVITY_PROBE - 1]);

    if concave {
        let (x, v) = golden_section_max(f, 0.0, 1.0, GOLDEN_TOL)?;
        consider(x, v);
    } else {
        let n = DENSE_GRID;
        let (mut grid_best, mut grid_val) = (0usize, f64::NEG_INFINITY);
        for i in 0..=n {
            let v = f(i as f64 / n as f64)?;
            if v > grid_val {
                grid_best = i;
                grid_val = v;
            }
        }
        let xb = grid_best as f64 / n as f64;
        consider(xb, grid_val);
        let lo = grid_best.saturating_sub(1) as f64 / n as f64;
        let hi = (grid_best + 1).min(n) as f64 / n as f64;
        let (x, v) = golden_section_max(f, lo, hi, GOLDEN_TOL)?;
        consider(x, v);
    }
    Ok(best.0)
}
