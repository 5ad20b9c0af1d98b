//! Long-term growth rates of CRRA utility for a constant stock/bond mix, and
//! the optimal mix, under GBM, Heston, 3/2, jump-diffusion and Vasicek models.
//!
//! [`growth`] evaluates Λ(α) = lim (1/t) log E[(V_t/V₀)^θ] in closed form,
//! [`allocate`] maximizes it over α ∈ [0, 1], and [`verify`] checks both
//! against ODE integration and Monte Carlo.

pub mod allocate;
pub mod cli;
pub mod growth;
pub mod params;
pub mod quad;
pub mod specfun;
pub mod verify;
