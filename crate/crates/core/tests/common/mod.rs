//! Random valid parameter draws shared by the integration tests.
#![allow(dead_code)]

use longrun::params::{
    validate, GbmParams, HestonParams, JumpDiffusionParams, JumpLaw, ModelSpec, ThreeHalvesParams,
    Utility, VasicekParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn utility(rng: &mut ChaCha8Rng) -> Utility {
    Utility::new(uniform(rng, 0.1, 0.9)).unwrap()
}

pub fn gbm(rng: &mut ChaCha8Rng) -> GbmParams {
    GbmParams {
        mu: uniform(rng, 0.0, 0.15),
        sigma: uniform(rng, 0.1, 0.5),
        r: uniform(rng, 0.0, 0.06),
    }
}

pub fn heston(rng: &mut ChaCha8Rng) -> HestonParams {
    let kappa = uniform(rng, 0.5, 4.0);
    let gamma_level = uniform(rng, 0.01, 0.09);
    // δ is a fraction of the Feller bound √(2κγ)
    let delta = uniform(rng, 0.1, 0.95) * (2.0 * kappa * gamma_level).sqrt();
    HestonParams {
        mu: uniform(rng, 0.0, 0.15),
        kappa,
        gamma_level,
        delta,
        rho: uniform(rng, -0.9, 0.9),
        r: uniform(rng, 0.0, 0.06),
        nu0: uniform(rng, 0.01, 0.1),
    }
}

pub fn three_halves(rng: &mut ChaCha8Rng) -> ThreeHalvesParams {
    ThreeHalvesParams {
        mu: uniform(rng, 0.0, 0.15),
        kappa: uniform(rng, 0.5, 4.0),
        gamma_level: uniform(rng, 0.01, 0.09),
        delta: uniform(rng, 0.1, 1.0),
        r: uniform(rng, 0.0, 0.06),
        nu0: uniform(rng, 0.01, 0.1),
    }
}

pub fn jump_law(rng: &mut ChaCha8Rng) -> JumpLaw {
    if rng.random::<bool>() {
        JumpLaw::Exponential {
            rate: uniform(rng, 0.5, 5.0),
        }
    } else {
        JumpLaw::Constant {
            y: uniform(rng, 0.5, 1.5),
        }
    }
}

pub fn jump(rng: &mut ChaCha8Rng) -> JumpDiffusionParams {
    JumpDiffusionParams {
        mu: uniform(rng, 0.0, 0.15),
        sigma: uniform(rng, 0.1, 0.5),
        lambda_j: uniform(rng, 0.05, 2.0),
        jump: jump_law(rng),
        r: uniform(rng, 0.0, 0.06),
    }
}

pub fn vasicek(rng: &mut ChaCha8Rng) -> VasicekParams {
    VasicekParams {
        mu: uniform(rng, 0.0, 0.15),
        sigma: uniform(rng, 0.1, 0.5),
        kappa: uniform(rng, 0.2, 3.0),
        gamma_level: uniform(rng, 0.0, 0.06),
        delta: uniform(rng, 0.005, 0.05),
        rho: uniform(rng, -0.9, 0.9),
        r0: uniform(rng, 0.0, 0.06),
    }
}

/// Draws a model of the given kind index (0 GBM, 1 Heston, 2 3/2, 3 jump, 4 Vasicek)
/// and checks that it validates.
pub fn model(rng: &mut ChaCha8Rng, kind: usize) -> ModelSpec {
    let m = match kind {
        0 => ModelSpec::Gbm(gbm(rng)),
        1 => ModelSpec::Heston(heston(rng)),
        2 => ModelSpec::ThreeHalves(three_halves(rng)),
        3 => ModelSpec::Jump(jump(rng)),
        4 => ModelSpec::Vasicek(vasicek(rng)),
        _ => unreachable!("five model kinds"),
    };
    validate(m).expect("draws are valid by construction")
}

pub fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| i as f64 / (n - 1) as f64)
}
