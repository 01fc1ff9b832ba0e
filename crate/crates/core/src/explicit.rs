//! Forward-Euler reference scheme on the same stencils as the ADI solver.

use ndarray::Array3;

use crate::adi::{check_finite, march, predictor, QueryPoint, Scheme, SolveReport};
use crate::error::Result;
use crate::model::{CostParams, Grid3D, GridSpec, ModelParams, OptionSpec};
use crate::operators::SpatialOperators;

/// Safety factor applied to the parabolic step limit.
pub const CFL_FACTOR: f64 = 0.4;

/// `C_next = C + Δτ (A C + φ)` with boundary planes re-imposed. Fails with
/// `NonFinite` (tagged with `step`) on blow-up.
pub fn explicit_step(
    c_prev: &Array3<f64>,
    ops: &SpatialOperators,
    phi: Option<&Array3<f64>>,
    dt: f64,
    step: usize,
) -> Result<Array3<f64>> {
    let next = predictor(c_prev, ops, phi, dt);
    check_finite(&next, step)?;
    Ok(next)
}

/// Parabolic step heuristic
/// `Δτ ≤ c · min 1/(VS²/ΔS² + σ²V/ΔV² + η²R/ΔR²)`, capped at the grid's own
/// `T/N`.
pub fn stable_dt_estimate(grid: &Grid3D, params: &ModelParams) -> f64 {
    let eta2 = params.eta * params.eta;
    let sig2 = params.sigma * params.sigma;
    // The S/V part and the R part depend on disjoint coordinates.
    let mut sv: f64 = 0.0;
    for &s in &grid.s {
        for &v in &grid.v {
            sv = sv.max(v * s * s / (grid.ds * grid.ds) + sig2 * v / (grid.dv * grid.dv));
        }
    }
    let rr = grid.r.iter().map(|&r| eta2 * r / (grid.dr * grid.dr)).fold(0.0, f64::max);
    cfl_step(sv + rr, grid.dt)
}

/// `CFL_FACTOR / max_rate`, capped at `cap`; an all-zero diffusivity gives
/// the cap.
pub fn cfl_step(max_rate: f64, cap: f64) -> f64 {
    if max_rate > 0.0 {
        (CFL_FACTOR / max_rate).min(cap)
    } else {
        cap
    }
}

/// Steps needed to cover the maturity at the stable step size.
pub fn stable_step_count(grid: &Grid3D, params: &ModelParams) -> usize {
    let dt = stable_dt_estimate(grid, params);
    (grid.maturity / dt).ceil().max(1.0) as usize
}

/// Explicit solve over `spec`'s spatial grid. `n_steps = None` picks the
/// count from [`stable_dt_estimate`]. The cost rebalancing interval still
/// defaults to the grid's `T/N`, not the explicit step.
pub fn solve_explicit(
    params: &ModelParams,
    option: &OptionSpec,
    costs: Option<&CostParams>,
    spec: GridSpec,
    n_steps: Option<usize>,
    clamp_negative: bool,
    queries: &[QueryPoint],
) -> Result<SolveReport> {
    let spec = spec.validate()?;
    let option = option.validate()?;
    let n = match n_steps {
        Some(n) => n.max(1),
        None => stable_step_count(&Grid3D::new(spec, option.maturity), params),
    };
    march(params, &option, costs, spec, n, Scheme::Explicit { clamp_negative }, queries)
}
