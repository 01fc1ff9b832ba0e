//! Douglas ADI time-stepping in reversed time `τ = T − t`.
//!
//! One step from `C⁰ = C^{n−1}` to `C^n`:
//!
//! ```text
//! G₀ = C⁰ + Δτ (A C⁰ + φ⁰)
//! (I − θΔτ A_S) G₁ = G₀ − θΔτ A_S C⁰
//! (I − θΔτ A_V) G₂ = G₁ − θΔτ A_V C⁰
//! (I − θΔτ A_R) G₃ = G₂ − θΔτ A_R C⁰
//! C^n = G₃
//! ```
//!
//! The mixed derivative and the cost source `φ` are treated explicitly.
//! Affine row constants (the `S_max` gradient condition) cancel out of the
//! corrections and only enter through `G₀`.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use ndarray::{Array3, Zip};

use crate::costs::assemble_phi;
use crate::error::{Error, Result, ValidationError};
use crate::model::{build_grid, sample_field, CostParams, Grid3D, GridSpec, ModelParams, OptionSpec, PriceField};
use crate::operators::{impose_dirichlet, map_nodes, DirectionalOperator, SpatialOperators};
use crate::tridiag::{solve_in_place, DEFAULT_PIVOT_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DouglasConfig {
    /// Implicitness of the directional corrections; 2/3 by default.
    pub theta1: f64,
    /// Clamp negative values to zero after every step.
    pub clamp_negative: bool,
    pub pivot_tol: f64,
}

impl Default for DouglasConfig {
    fn default() -> Self {
        DouglasConfig {
            theta1: 2.0 / 3.0,
            clamp_negative: false,
            pivot_tol: DEFAULT_PIVOT_TOL,
        }
    }
}

impl DouglasConfig {
    pub fn validate(self) -> std::result::Result<Self, ValidationError> {
        if !(self.theta1 > 0.0 && self.theta1 <= 1.0) {
            return Err(ValidationError::ThetaOutOfRange(self.theta1));
        }
        if !(self.pivot_tol > 0.0) {
            return Err(ValidationError::NonPositiveParameter {
                name: "pivot_tol",
                value: self.pivot_tol,
            });
        }
        Ok(self)
    }
}

/// A price request at `(S, V, R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryPoint {
    pub s: f64,
    pub v: f64,
    pub r: f64,
}

impl QueryPoint {
    pub fn new(s: f64, v: f64, r: f64) -> Self {
        QueryPoint { s, v, r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryPrice {
    pub point: QueryPoint,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub min_value: f64,
    pub max_value: f64,
    /// Nodes clamped from negative to zero.
    pub clamped: usize,
    /// Cost-term radicands clamped at zero.
    pub radicand_clamps: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub grid: Grid3D,
    pub field: PriceField,
    pub steps: Vec<StepDiagnostics>,
    pub prices: Vec<QueryPrice>,
    pub wall: Duration,
}

impl SolveReport {
    pub fn price_at(&self, s: f64, v: f64, r: f64) -> Result<f64> {
        sample_field(&self.field.values, &self.grid, s, v, r)
    }
}

/// Result of one time step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub values: Array3<f64>,
    pub clamped: usize,
}

/// Explicit predictor `G₀ = C + Δτ (A C + φ)` with boundary planes imposed.
pub(crate) fn predictor(c_prev: &Array3<f64>, ops: &SpatialOperators, phi: Option<&Array3<f64>>, dt: f64) -> Array3<f64> {
    let grid = ops.grid();
    let phi = phi.map(|p| p.as_standard_layout());
    let phi_slice = phi.as_ref().map(|p| p.as_slice().expect("standard layout"));
    let mut g0 = map_nodes(grid, c_prev, |c, st, i, j, k| {
        let idx = st.index(i, j, k);
        let mut rate = ops.apply_at(c, st, i, j, k);
        if let Some(p) = phi_slice {
            rate += p[idx];
        }
        c[idx] + dt * rate
    });
    impose_dirichlet(&mut g0, grid);
    g0
}

/// Solves `(I − w A_d) G_new = G − w A_d C⁰` line by line along `op`'s
/// direction, overwriting `g`. Affine constants cancel and are omitted.
fn implicit_sweep(op: &DirectionalOperator, g: &mut Array3<f64>, c_prev: &Array3<f64>, w: f64, pivot_tol: f64) -> Result<()> {
    let axis = op.direction.axis();
    let n = op.len();
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    Zip::indexed(g.lanes_mut(axis))
        .and(c_prev.lanes(axis))
        .par_for_each(|(t1, t2), mut g_lane, c_lane| {
            let mut lower = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut upper = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut scratch = vec![0.0; n];
            for m in 0..n {
                let (i, j, k) = op.node(m, t1, t2);
                let row = op.row(i, j, k);
                lower[m] = -w * row.lower;
                diag[m] = 1.0 - w * row.diag;
                upper[m] = -w * row.upper;
                let mut ac = row.diag * c_lane[m];
                if m > 0 {
                    ac += row.lower * c_lane[m - 1];
                }
                if m + 1 < n {
                    ac += row.upper * c_lane[m + 1];
                }
                rhs[m] = g_lane[m] - w * ac;
            }
            match solve_in_place(&lower, &diag, &upper, &mut rhs, &mut scratch, pivot_tol) {
                Ok(()) => {
                    for (dst, src) in g_lane.iter_mut().zip(rhs.iter()) {
                        *dst = *src;
                    }
                }
                Err(e) => {
                    failure.lock().expect("poisoned").get_or_insert(e);
                }
            }
        });
    match failure.into_inner().expect("poisoned") {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// One Douglas step with sweep order S, V, R.
pub fn douglas_step(
    c_prev: &Array3<f64>,
    ops: &SpatialOperators,
    phi: Option<&Array3<f64>>,
    dt: f64,
    cfg: &DouglasConfig,
) -> Result<StepOutput> {
    let mut g = predictor(c_prev, ops, phi, dt);
    if cfg.theta1 != 0.0 {
        let w = cfg.theta1 * dt;
        for op in ops.directional() {
            implicit_sweep(op, &mut g, c_prev, w, cfg.pivot_tol)?;
        }
    }
    impose_dirichlet(&mut g, ops.grid());
    let clamped = if cfg.clamp_negative { clamp_negative(&mut g) } else { 0 };
    Ok(StepOutput { values: g, clamped })
}

pub(crate) fn clamp_negative(values: &mut Array3<f64>) -> usize {
    let mut count = 0;
    values.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0;
            count += 1;
        }
    });
    count
}

pub(crate) fn check_finite(values: &Array3<f64>, step: usize) -> Result<()> {
    match values.indexed_iter().find(|(_, x)| !x.is_finite()) {
        Some(((i, j, k), _)) => Err(Error::NonFinite { step, node: [i, j, k] }),
        None => Ok(()),
    }
}

/// Calendar time at which step `n` (1-based) evaluates the cost source:
/// the previous level `t_{n−1}`, held at least one step `dt` before maturity
/// so the bond delta stays away from zero.
pub fn cost_eval_time(maturity: f64, step: usize, dt: f64) -> f64 {
    let horizon = ((step - 1) as f64 * dt).max(dt);
    maturity - horizon
}

/// Time-marching scheme used by [`march`].
pub(crate) enum Scheme<'a> {
    Douglas(&'a DouglasConfig),
    Explicit { clamp_negative: bool },
}

/// Shared time loop: payoff slice to `τ = T` in `n_steps` steps.
pub(crate) fn march(
    params: &ModelParams,
    option: &OptionSpec,
    costs: Option<&CostParams>,
    spec: GridSpec,
    n_steps: usize,
    scheme: Scheme<'_>,
    queries: &[QueryPoint],
) -> Result<SolveReport> {
    let started = Instant::now();
    let params = params.validate()?;
    let costs = costs.map(|c| c.validate()).transpose()?;
    let (grid, initial) = build_grid(spec, option)?;
    for q in queries {
        if !grid.contains(q.s, q.v, q.r) {
            return Err(Error::OutOfDomain { s: q.s, v: q.v, r: q.r });
        }
    }
    let ops = SpatialOperators::new(&grid, &params);
    let dt = option.maturity / n_steps as f64;
    let mut values = initial.values;
    let mut steps = Vec::with_capacity(n_steps);
    for step in 1..=n_steps {
        let t0 = Instant::now();
        let (phi, radicand_clamps) = match costs.as_ref() {
            Some(c) => {
                let src = assemble_phi(&values, &grid, &params, c, cost_eval_time(option.maturity, step, dt), false)?;
                (Some(src.phi), src.clamp_count)
            }
            None => (None, 0),
        };
        let out = match scheme {
            Scheme::Douglas(cfg) => douglas_step(&values, &ops, phi.as_ref(), dt, cfg)?,
            Scheme::Explicit { clamp_negative: clamp } => {
                let mut next = predictor(&values, &ops, phi.as_ref(), dt);
                let clamped = if clamp { clamp_negative(&mut next) } else { 0 };
                StepOutput { values: next, clamped }
            }
        };
        check_finite(&out.values, step)?;
        values = out.values;
        let (min_value, max_value) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        steps.push(StepDiagnostics {
            step,
            min_value,
            max_value,
            clamped: out.clamped,
            radicand_clamps,
            wall: t0.elapsed(),
        });
    }
    let field = PriceField {
        values,
        tau: option.maturity,
    };
    let prices = queries
        .iter()
        .map(|&point| {
            sample_field(&field.values, &grid, point.s, point.v, point.r).map(|price| QueryPrice { point, price })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolveReport {
        grid,
        field,
        steps,
        prices,
        wall: started.elapsed(),
    })
}

/// Prices the call by `spec.n` Douglas steps from the payoff.
///
/// `costs = None` runs the linear pricing equation; `Some` adds the
/// nonlinear cost source, even when all rates are zero.
pub fn solve(
    params: &ModelParams,
    option: &OptionSpec,
    costs: Option<&CostParams>,
    spec: GridSpec,
    cfg: &DouglasConfig,
    queries: &[QueryPoint],
) -> Result<SolveReport> {
    let cfg = cfg.validate()?;
    march(params, option, costs, spec, spec.n, Scheme::Douglas(&cfg), queries)
}
