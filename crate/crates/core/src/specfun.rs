//! Special functions: Kummer's confluent hypergeometric M(a, b, z), the
//! upper incomplete gamma Γ(s, x), and ln Γ(x).
//!
//! The Kummer series is summed directly. For z < 0 with b − a > 0 it is
//! summed through Kummer's transformation
//!
//! ```text
//! M(a, b, z) = e^z · M(b − a, b, −z)
//! ```
//!
//! whose terms are all positive, so no cancellation occurs even for large |z|.
//! The partial sums are rescaled on the fly, which keeps e^{|z|}-sized
//! intermediate values representable.

use std::sync::OnceLock;

use thiserror::Error;

/// Largest |z| accepted by [`kummer_m`].
pub const KUMMER_MAX_ABS_Z: f64 = 1000.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_741_780_329_736_405_617_6;
const MAX_SERIES_TERMS: usize = 20_000;
const MAX_CF_ITERS: usize = 10_000;
const RESCALE_AT: f64 = 1e250;

/// A function value with an error bound from the truncation criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecFunResult {
    pub value: f64,
    pub est_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("M(a, b, z) has a pole: b = {b} is zero or a negative integer")]
    PoleAtB { b: f64 },
    #[error("|z| = {z} exceeds the supported domain |z| <= {max}")]
    DomainExceeded { z: f64, max: f64 },
    #[error("argument {name} = {value} is out of range ({constraint})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("{function} did not converge after {iterations} iterations")]
    NoConvergence {
        function: &'static str,
        iterations: usize,
    },
}

/// ζ(k) − 1 for k = 0..ZETA_TERMS (entries 0 and 1 unused).
const ZETA_TERMS: usize = 48;

fn zeta_minus_one() -> &'static [f64; ZETA_TERMS] {
    static TABLE: OnceLock<[f64; ZETA_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Euler–Maclaurin with cut N = 30 and Bernoulli corrections up to B8.
        const N: f64 = 30.0;
        const BERNOULLI: [f64; 4] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0];
        let mut table = [0.0; ZETA_TERMS];
        for (k, slot) in table.iter_mut().enumerate().skip(2) {
            let s = k as f64;
            let mut head = 0.0;
            for n in (2..30).rev() {
                head += (n as f64).powf(-s);
            }
            let mut tail = N.powf(1.0 - s) / (s - 1.0) + 0.5 * N.powf(-s);
            // B_{2j}/(2j)! · s(s+1)…(s+2j−2) · N^{−s−2j+1}
            let mut rising = s;
            let mut fact = 2.0;
            for (j, b) in BERNOULLI.iter().enumerate() {
                let order = 2 * j + 1;
                tail += b / fact * rising * N.powf(-s - order as f64);
                rising *= (s + order as f64) * (s + order as f64 + 1.0);
                fact *= ((order + 2) * (order + 3)) as f64;
            }
            *slot = head + tail;
        }
        table
    })
}

/// Σ_{k≥2} (−1)^k (ζ(k) − 1) z^k / k for |z| ≤ 1/2.
fn log_gamma_tail(z: f64) -> f64 {
    let zeta = zeta_minus_one();
    let mut sum = 0.0;
    // summed from the smallest term up
    for k in (2..ZETA_TERMS).rev() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * zeta[k] * z.powi(k as i32) / k as f64;
    }
    sum
}

fn stirling(x: f64) -> f64 {
    const COEF: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut corr = 0.0;
    let mut p = inv;
    for c in COEF {
        corr += c * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + corr
}

/// ln Γ(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64, SpecFunError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(SpecFunError::OutOfRange {
            name: "x",
            value: x,
            constraint: "finite and > 0",
        });
    }
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1)/x
        return log_gamma_unchecked(x + 1.0) - x.ln();
    }
    if x < 1.5 {
        let z = x - 1.0;
        return -z.ln_1p() + z * (1.0 - EULER_GAMMA) + log_gamma_tail(z);
    }
    if x < 2.5 {
        let z = x - 2.0;
        return z * (1.0 - EULER_GAMMA) + log_gamma_tail(z);
    }
    if x >= 10.0 {
        return stirling(x);
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < 10.0 {
        prod *= shifted;
        shifted += 1.0;
    }
    stirling(shifted) - prod.ln()
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> Result<f64, SpecFunError> {
    log_gamma(x).map(f64::exp)
}

/// Series part of the lower incomplete gamma:
/// Σ_{n≥0} xⁿ / (s(s+1)…(s+n)), with the truncation bound on its tail.
fn lower_gamma_series(s: f64, x: f64) -> Result<(f64, f64), SpecFunError> {
    let mut term = 1.0 / s;
    let mut sum = term;
    for n in 1..MAX_SERIES_TERMS {
        let denom = s + n as f64;
        term *= x / denom;
        sum += term;
        let ratio = x / (denom + 1.0);
        if ratio < 1.0 && term <= sum * 1e-17 {
            let tail = term * ratio / (1.0 - ratio);
            let err = tail + (n as f64 + 1.0) * f64::EPSILON * sum;
            return Ok((sum, err));
        }
    }
    Err(SpecFunError::NoConvergence {
        function: "incomplete gamma series",
        iterations: MAX_SERIES_TERMS,
    })
}

/// Continued fraction h with Γ(s, x) = e^{−x} x^s h, valid for x ≥ s + 1.
fn upper_gamma_cf(s: f64, x: f64) -> Result<(f64, f64), SpecFunError> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_CF_ITERS {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= f64::EPSILON {
            let err = (del - 1.0).abs() * h.abs() + (i as f64 + 1.0) * f64::EPSILON * h.abs();
            return Ok((h, err));
        }
    }
    Err(SpecFunError::NoConvergence {
        function: "incomplete gamma continued fraction",
        iterations: MAX_CF_ITERS,
    })
}

fn check_gamma_args(s: f64, x: f64) -> Result<(), SpecFunError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(SpecFunError::OutOfRange {
            name: "s",
            value: s,
            constraint: "finite and > 0",
        });
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(SpecFunError::OutOfRange {
            name: "x",
            value: x,
            constraint: "finite and >= 0",
        });
    }
    Ok(())
}

/// Γ(s, x) = ∫ₓ^∞ t^{s−1} e^{−t} dt for s > 0, x ≥ 0.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> Result<SpecFunResult, SpecFunError> {
    check_gamma_args(s, x)?;
    if x == 0.0 {
        let value = log_gamma_unchecked(s).exp();
        return Ok(SpecFunResult {
            value,
            est_abs_error: 4.0 * f64::EPSILON * value,
        });
    }
    if x < s + 1.0 {
        let (series, err) = lower_gamma_series(s, x)?;
        let prefactor = (s * x.ln() - x).exp();
        let complete = log_gamma_unchecked(s).exp();
        let value = complete - prefactor * series;
        let est_abs_error = prefactor * err + 4.0 * f64::EPSILON * complete;
        Ok(SpecFunResult {
            value,
            est_abs_error,
        })
    } else {
        let (h, err) = upper_gamma_cf(s, x)?;
        let prefactor = (s * x.ln() - x).exp();
        Ok(SpecFunResult {
            value: prefactor * h,
            est_abs_error: prefactor * err + 4.0 * f64::EPSILON * prefactor * h,
        })
    }
}

/// e^x Γ(s, x); finite for arguments where Γ(s, x) itself would underflow.
pub fn upper_incomplete_gamma_scaled(s: f64, x: f64) -> Result<SpecFunResult, SpecFunError> {
    check_gamma_args(s, x)?;
    if x < s + 1.0 {
        let (series, err) = lower_gamma_series(s, x)?;
        let xs = (s * x.ln()).exp();
        let complete = (log_gamma_unchecked(s) + x).exp();
        let value = if x == 0.0 {
            complete
        } else {
            complete - xs * series
        };
        Ok(SpecFunResult {
            value,
            est_abs_error: xs * err + 4.0 * f64::EPSILON * complete,
        })
    } else {
        let (h, err) = upper_gamma_cf(s, x)?;
        let xs = (s * x.ln()).exp();
        Ok(SpecFunResult {
            value: xs * h,
            est_abs_error: xs * err + 4.0 * f64::EPSILON * xs * h,
        })
    }
}

/// Σ (a)ₙ/(b)ₙ zⁿ/n! as `(sum, abs_sum, terms)` in units of e^{log_scale}.
struct ScaledSeries {
    sum: f64,
    abs_sum: f64,
    tail_bound: f64,
    log_scale: f64,
    terms: usize,
}

fn kummer_series(a: f64, b: f64, z: f64) -> Result<ScaledSeries, SpecFunError> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut abs_sum = 1.0;
    let mut log_scale = 0.0;
    for n in 0..MAX_SERIES_TERMS {
        let nf = n as f64;
        term *= (a + nf) / (b + nf) * z / (nf + 1.0);
        if term == 0.0 {
            // a is a nonpositive integer: the series is a polynomial
            return Ok(ScaledSeries {
                sum,
                abs_sum,
                tail_bound: 0.0,
                log_scale,
                terms: n + 1,
            });
        }
        sum += term;
        abs_sum += term.abs();
        if abs_sum > RESCALE_AT {
            term /= RESCALE_AT;
            sum /= RESCALE_AT;
            abs_sum /= RESCALE_AT;
            log_scale += RESCALE_AT.ln();
        }
        // bound on every later term ratio once n + 1 is past |z|, -a and -b
        let m = nf + 2.0;
        if m > z.abs() && m > -a && m > -b {
            let q = z.abs() / m * ((a + m - 1.0).abs() / (b + m - 1.0).abs()).max(1.0);
            if q < 1.0 {
                let tail_bound = term.abs() * q / (1.0 - q);
                if tail_bound <= 1e-17 * sum.abs() || tail_bound == 0.0 {
                    return Ok(ScaledSeries {
                        sum,
                        abs_sum,
                        tail_bound,
                        log_scale,
                        terms: n + 2,
                    });
                }
            }
        }
    }
    Err(SpecFunError::NoConvergence {
        function: "Kummer series",
        iterations: MAX_SERIES_TERMS,
    })
}

/// Kummer's function M(a, b, z) = Σ (a)ₙ/(b)ₙ · zⁿ/n! for |z| ≤ 1000.
pub fn kummer_m(a: f64, b: f64, z: f64) -> Result<SpecFunResult, SpecFunError> {
    for (name, v) in [("a", a), ("b", b), ("z", z)] {
        if !v.is_finite() {
            return Err(SpecFunError::OutOfRange {
                name,
                value: v,
                constraint: "finite",
            });
        }
    }
    if b <= 0.0 && b == b.round() {
        return Err(SpecFunError::PoleAtB { b });
    }
    if z.abs() > KUMMER_MAX_ABS_Z {
        return Err(SpecFunError::DomainExceeded {
            z,
            max: KUMMER_MAX_ABS_Z,
        });
    }
    if z == 0.0 {
        return Ok(SpecFunResult {
            value: 1.0,
            est_abs_error: 0.0,
        });
    }
    let transformed = z < 0.0;
    let (series, exp_shift) = if transformed {
        (kummer_series(b - a, b, -z)?, z)
    } else {
        (kummer_series(a, b, z)?, 0.0)
    };
    let scale = (series.log_scale + exp_shift).exp();
    let value = series.sum * scale;
    let rounding = (series.terms as f64 + 4.0) * f64::EPSILON * series.abs_sum * scale;
    // e^z is rounded once; its relative error grows with |z| through the argument
    let exp_err = if transformed {
        f64::EPSILON * (1.0 + z.abs()) * value.abs()
    } else {
        0.0
    };
    Ok(SpecFunResult {
        value,
        est_abs_error: series.tail_bound * scale + rounding + exp_err,
    })
}
