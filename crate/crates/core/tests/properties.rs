mod common;

use longrun::allocate::{optimal, AllocationDecision, CaseLabel};
use longrun::growth::{self, lambda, vasicek_curvature};
use longrun::params::{validate, HestonParams, ModelSpec, Utility};
use longrun::quad::{integrate, QuadOptions};
use longrun::specfun::{gamma, kummer_m, log_gamma, upper_incomplete_gamma};
use proptest::prelude::*;

fn draw(seed: u64, kind: usize) -> (ModelSpec, Utility) {
    let mut rng = common::rng(seed);
    let u = common::utility(&mut rng);
    (common::model(&mut rng, kind), u)
}

fn curve(m: &ModelSpec, u: Utility, n: usize) -> Vec<f64> {
    common::grid(n).map(|a| lambda(m, u, a).unwrap()).collect()
}

fn with_mu(m: &ModelSpec, mu: f64) -> ModelSpec {
    let mut m = m.clone();
    match &mut m {
        ModelSpec::Gbm(p) => p.mu = mu,
        ModelSpec::Heston(p) => p.mu = mu,
        ModelSpec::ThreeHalves(p) => p.mu = mu,
        ModelSpec::Jump(p) => p.mu = mu,
        ModelSpec::Vasicek(p) => p.mu = mu,
    }
    m
}

fn mu_of(m: &ModelSpec) -> f64 {
    match m {
        ModelSpec::Gbm(p) => p.mu,
        ModelSpec::Heston(p) => p.mu,
        ModelSpec::ThreeHalves(p) => p.mu,
        ModelSpec::Jump(p) => p.mu,
        ModelSpec::Vasicek(p) => p.mu,
    }
}

fn central_slope(m: &ModelSpec, u: Utility, a: f64) -> f64 {
    let h = 1e-5;
    let (lo, hi) = ((a - h).max(0.0), (a + h).min(1.0));
    (lambda(m, u, hi).unwrap() - lambda(m, u, lo).unwrap()) / (hi - lo)
}

proptest! {
    #[test]
    fn all_bonds_earn_theta_r(seed in any::<u64>(), kind in 0usize..4) {
        let (m, u) = draw(seed, kind);
        let r = m.constant_rate().unwrap();
        let got = lambda(&m, u, 0.0).unwrap();
        prop_assert!((got - u.theta() * r).abs() <= 1e-15, "{got} vs {}", u.theta() * r);
    }

    #[test]
    fn validate_is_idempotent(seed in any::<u64>(), kind in 0usize..5) {
        let (m, _) = draw(seed, kind);
        prop_assert_eq!(validate(m.clone()).unwrap(), m);
    }

    #[test]
    fn feller_is_strict(seed in any::<u64>(), scale in 0.98f64..1.02) {
        let mut rng = common::rng(seed);
        let base = common::heston(&mut rng);
        let p = HestonParams { delta: scale * (2.0 * base.kappa * base.gamma_level).sqrt(), ..base };
        let accepted = validate(ModelSpec::Heston(p)).is_ok();
        prop_assert_eq!(accepted, 2.0 * p.kappa * p.gamma_level > p.delta * p.delta);
    }

    #[test]
    fn growth_is_concave_for_constant_rate_models(seed in any::<u64>(), kind in 0usize..4) {
        let (m, u) = draw(seed, kind);
        let v = curve(&m, u, 201);
        for w in v.windows(3) {
            let second = w[0] - 2.0 * w[1] + w[2];
            prop_assert!(second <= 1e-13, "second difference {second}");
        }
    }

    #[test]
    fn vasicek_growth_is_quadratic(seed in any::<u64>()) {
        let (m, u) = draw(seed, 4);
        let v = curve(&m, u, 41);
        let scale = v.iter().fold(1e-3f64, |s, x| s.max(x.abs()));
        for w in v.windows(4) {
            let third = w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0];
            prop_assert!(third.abs() <= 1e-13 * scale, "third difference {third}");
        }
        let ModelSpec::Vasicek(p) = &m else { unreachable!() };
        let second = v[0] - 2.0 * v[20] + v[40];
        let c = vasicek_curvature(p, u);
        prop_assert!(second * c >= 0.0 || second.abs() < 1e-14);
    }

    #[test]
    fn initial_variance_does_not_matter(seed in any::<u64>(), kind in 1usize..3, nu0 in 0.001f64..1.0) {
        let (m, u) = draw(seed, kind);
        let mut other = m.clone();
        match &mut other {
            ModelSpec::Heston(p) => p.nu0 = nu0,
            ModelSpec::ThreeHalves(p) => p.nu0 = nu0,
            _ => unreachable!(),
        }
        for a in common::grid(21) {
            prop_assert_eq!(lambda(&m, u, a).unwrap().to_bits(), lambda(&other, u, a).unwrap().to_bits());
        }
    }

    #[test]
    fn optimum_beats_the_grid(seed in any::<u64>(), kind in 0usize..5) {
        let (m, u) = draw(seed, kind);
        let d = optimal(&m, u).unwrap();
        prop_assert!((0.0..=1.0).contains(&d.alpha_star));
        prop_assert_eq!(d.lambda_at_star.to_bits(), lambda(&m, u, d.alpha_star).unwrap().to_bits());
        let best = curve(&m, u, 1001).into_iter().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(d.lambda_at_star >= best - 1e-12, "{} < {best}", d.lambda_at_star);
    }

    #[test]
    fn more_drift_means_more_stock(seed in any::<u64>(), kind in 0usize..5, bump in 0.0f64..0.05) {
        let (m, u) = draw(seed, kind);
        let lo = optimal(&m, u).unwrap();
        let hi = optimal(&with_mu(&m, mu_of(&m) + bump), u).unwrap();
        prop_assert!(hi.alpha_star >= lo.alpha_star - 1e-9, "{} -> {}", lo.alpha_star, hi.alpha_star);
    }

    #[test]
    fn case_labels_agree_with_slopes(seed in any::<u64>(), kind in 0usize..5) {
        let (m, u) = draw(seed, kind);
        let d = optimal(&m, u).unwrap();
        match d.case_label {
            CaseLabel::BondOnly | CaseLabel::ClampedToZero => {
                prop_assert_eq!(d.alpha_star, 0.0);
                prop_assert!(central_slope(&m, u, 0.0) <= 1e-10);
            }
            CaseLabel::StockOnly | CaseLabel::ClampedToOne => {
                prop_assert_eq!(d.alpha_star, 1.0);
                prop_assert!(central_slope(&m, u, 1.0) >= -1e-10);
            }
            CaseLabel::Interior => {
                prop_assert!(d.alpha_star > 0.0 && d.alpha_star < 1.0);
                prop_assert!(d.alpha_dagger.is_some() || kind == 3);
                prop_assert!(central_slope(&m, u, d.alpha_star).abs() <= 1e-6);
            }
            CaseLabel::ConvexBoundary => {
                prop_assert_eq!(kind, 4);
                let ends = (lambda(&m, u, 0.0).unwrap(), lambda(&m, u, 1.0).unwrap());
                prop_assert_eq!(d.lambda_at_star, ends.0.max(ends.1));
            }
        }
    }

    #[test]
    fn jump_interior_is_bracketed(seed in any::<u64>()) {
        let (m, u) = draw(seed, 3);
        let ModelSpec::Jump(p) = &m else { unreachable!() };
        let d = optimal(&m, u).unwrap();
        if d.case_label == CaseLabel::Interior {
            prop_assert!(growth::jump_lambda_prime(p, u, 0.0).unwrap() > 0.0);
            prop_assert!(growth::jump_lambda_prime(p, u, 1.0).unwrap() < 0.0);
            prop_assert!(growth::jump_lambda_prime(p, u, d.alpha_star).unwrap().abs() <= 1e-9);
        }
    }

    #[test]
    fn decisions_survive_json(seed in any::<u64>(), kind in 0usize..5) {
        let (m, u) = draw(seed, kind);
        let d = optimal(&m, u).unwrap();
        let back: AllocationDecision = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        prop_assert_eq!(back.alpha_star.to_bits(), d.alpha_star.to_bits());
        prop_assert_eq!(back.lambda_at_star.to_bits(), d.lambda_at_star.to_bits());
        prop_assert_eq!(back.alpha_dagger.map(f64::to_bits), d.alpha_dagger.map(f64::to_bits));
        prop_assert_eq!(back.case_label, d.case_label);
    }

    #[test]
    fn curve_sampling_never_exceeds_optimum(seed in any::<u64>(), kind in 0usize..5, n in 2usize..300) {
        let (m, u) = draw(seed, kind);
        let c = growth::growth_curve(&m, u, n).unwrap();
        let d = optimal(&m, u).unwrap();
        prop_assert!(c.best().lambda <= d.lambda_at_star + 1e-13);
    }
}

proptest! {
    #[test]
    fn kummer_derivative_identity(a in -3.0f64..5.0, b in 0.5f64..6.0, z in -30.0f64..30.0) {
        let h = 1e-5 * z.abs().max(1.0);
        let fd = (kummer_m(a, b, z + h).unwrap().value - kummer_m(a, b, z - h).unwrap().value) / (2.0 * h);
        let exact = a / b * kummer_m(a + 1.0, b + 1.0, z).unwrap().value;
        let scale = exact.abs().max(kummer_m(a, b, z).unwrap().value.abs()).max(1e-300);
        prop_assert!((fd - exact).abs() <= 1e-6 * scale.max(exact.abs()), "fd {fd} exact {exact}");
    }

    #[test]
    fn incomplete_gamma_complements_the_lower_integral(s in 0.5f64..5.0, x in 0.0f64..10.0) {
        // ∫₀ˣ t^{s−1}e^{−t} dt with t = v^{1/s}, which removes the endpoint singularity
        let f = |v: f64| (-v.powf(1.0 / s)).exp() / s;
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-13, ..QuadOptions::default() };
        let lower = integrate(&f, 0.0, x.powf(s), opts).unwrap().value;
        let upper = upper_incomplete_gamma(s, x).unwrap().value;
        let g = gamma(s).unwrap();
        prop_assert!((upper + lower - g).abs() <= 1e-10 * g.max(1.0), "{upper} + {lower} vs {g}");
    }

    #[test]
    fn incomplete_gamma_decreases(s in 0.1f64..8.0, x in 0.0f64..40.0, dx in 1e-3f64..5.0) {
        let a = upper_incomplete_gamma(s, x).unwrap().value;
        let b = upper_incomplete_gamma(s, x + dx).unwrap().value;
        prop_assert!(b < a, "Γ({s}, {x}) = {a}, Γ({s}, {}) = {b}", x + dx);
    }

    #[test]
    fn log_gamma_recurrence(x in 0.05f64..150.0) {
        let lhs = log_gamma(x + 1.0).unwrap();
        let rhs = log_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
