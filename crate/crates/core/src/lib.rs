//! Finite-difference pricing of European calls under the Heston-CIR hybrid
//! with proportional transaction costs.
//!
//! The state is `(S, V, R)`: asset price, variance and short rate. Prices are
//! marched in reversed time by a Douglas ADI scheme ([`adi`]), with a
//! forward-Euler reference ([`explicit`]), a closed-form CIR bond ([`bond`])
//! and a Monte Carlo oracle ([`mc`]) for cross-checks.

pub mod adi;
pub mod bond;
pub mod costs;
pub mod error;
pub mod explicit;
pub mod mc;
pub mod model;
pub mod operators;
pub mod tridiag;

pub use adi::{douglas_step, solve, DouglasConfig, QueryPoint, QueryPrice, SolveReport};
pub use bond::{bond_price, bond_price_crank_nicolson};
pub use costs::assemble_phi;
pub use error::{Error, Result, ValidationError};
pub use explicit::{solve_explicit, stable_dt_estimate};
pub use mc::{simulate_bond, simulate_price, DriftMode, McConfig, McEstimate, PositivityScheme};
pub use model::{build_grid, payoff, sample_field, CostParams, Grid3D, GridSpec, ModelParams, OptionSpec, PriceField};
pub use operators::SpatialOperators;
