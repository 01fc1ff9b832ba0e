//! Domain records shared by every solver: model coefficients, the option
//! contract, transaction-cost rates, and the uniform (S, V, R) grid.

use ndarray::Array3;

use crate::error::{Error, Result, ValidationError};

/// Coefficients of the Heston-CIR hybrid.
///
/// `sigma`, `eta`, `rho`, `alpha`, `beta` drive the pricing PDE. The pairs
/// `(a, b)` and `(k, zeta)` are the rate and variance drifts of the
/// stochastic-differential form and are only read by the Monte Carlo oracle
/// in its `SdePaper` drift mode. `lambda` is the market price of rate risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Volatility of variance.
    pub sigma: f64,
    /// Volatility of the short rate.
    pub eta: f64,
    /// Correlation between asset and variance shocks.
    pub rho: f64,
    /// Rate mean-reversion speed used by the PDE and the bond closed form.
    pub alpha: f64,
    /// Rate long-run level used by the PDE and the bond closed form.
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub zeta: f64,
    pub lambda: f64,
}

impl Default for ModelParams {
    /// The reference parameter set used throughout the experiments.
    fn default() -> Self {
        ModelParams {
            sigma: 0.05,
            eta: 0.2,
            rho: 0.8,
            alpha: 0.5,
            beta: 0.1,
            a: 0.5,
            b: 0.05,
            k: 0.0,
            zeta: 0.0,
            lambda: 0.0,
        }
    }
}

fn check_finite(name: &'static str, value: f64) -> std::result::Result<(), ValidationError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::NotFinite { name })
    }
}

fn check_positive(name: &'static str, value: f64) -> std::result::Result<(), ValidationError> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ValidationError::NonPositiveParameter { name, value })
    }
}

fn check_non_negative(name: &'static str, value: f64) -> std::result::Result<(), ValidationError> {
    check_finite(name, value)?;
    if value >= 0.0 {
        Ok(())
    } else {
        Err(ValidationError::NegativeParameter { name, value })
    }
}

/// Returns `params` unchanged when every invariant holds.
pub fn validate_params(params: ModelParams) -> std::result::Result<ModelParams, ValidationError> {
    check_positive("sigma", params.sigma)?;
    check_positive("eta", params.eta)?;
    check_finite("rho", params.rho)?;
    if params.rho.abs() > 1.0 {
        return Err(ValidationError::RhoOutOfRange(params.rho));
    }
    check_positive("alpha", params.alpha)?;
    check_positive("beta", params.beta)?;
    check_non_negative("a", params.a)?;
    check_non_negative("b", params.b)?;
    check_non_negative("k", params.k)?;
    check_non_negative("zeta", params.zeta)?;
    check_finite("lambda", params.lambda)?;
    Ok(params)
}

impl ModelParams {
    pub fn validate(self) -> std::result::Result<Self, ValidationError> {
        validate_params(self)
    }
}

/// European call contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub strike: f64,
    pub maturity: f64,
}

impl Default for OptionSpec {
    fn default() -> Self {
        OptionSpec {
            strike: 100.0,
            maturity: 1.0,
        }
    }
}

impl OptionSpec {
    pub fn validate(self) -> std::result::Result<Self, ValidationError> {
        check_positive("strike", self.strike)?;
        check_positive("maturity", self.maturity)?;
        Ok(self)
    }
}

/// Call payoff `max(S - E, 0)`.
pub fn payoff(s: f64, spec: &OptionSpec) -> f64 {
    (s - spec.strike).max(0.0)
}

/// Proportional transaction-cost rates on the asset (`k0`), the variance
/// instrument (`k1`) and the bond (`k2`), with rebalancing interval
/// `delta_t`. A `delta_t` of `None` means "rebalance once per time step".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostParams {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub delta_t: Option<f64>,
}

impl CostParams {
    pub fn uniform(rate: f64) -> Self {
        CostParams {
            k0: rate,
            k1: rate,
            k2: rate,
            delta_t: None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.k0 == 0.0 && self.k1 == 0.0 && self.k2 == 0.0
    }

    pub fn validate(self) -> std::result::Result<Self, ValidationError> {
        check_non_negative("k0", self.k0)?;
        check_non_negative("k1", self.k1)?;
        check_non_negative("k2", self.k2)?;
        if let Some(dt) = self.delta_t {
            check_positive("delta_t", dt)?;
        }
        Ok(self)
    }

    /// Rebalancing interval, falling back to the solver step.
    pub fn rebalance_interval(&self, step: f64) -> f64 {
        self.delta_t.unwrap_or(step)
    }
}

/// Domain bounds and step counts of the uniform grid.
///
/// `m`, `j`, `k` count intervals, so the field has `(m+1)(j+1)(k+1)` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub s_max: f64,
    pub v_max: f64,
    pub r_max: f64,
    pub m: usize,
    pub j: usize,
    pub k: usize,
    pub n: usize,
}

impl GridSpec {
    /// Default bounds `S_max = 5E`, `V_max = R_max = 1`.
    pub fn for_strike(strike: f64, m: usize, j: usize, k: usize, n: usize) -> Self {
        GridSpec {
            s_max: 5.0 * strike,
            v_max: 1.0,
            r_max: 1.0,
            m,
            j,
            k,
            n,
        }
    }

    pub fn validate(self) -> std::result::Result<Self, ValidationError> {
        check_positive("s_max", self.s_max)?;
        check_positive("v_max", self.v_max)?;
        check_positive("r_max", self.r_max)?;
        for (name, value) in [("m", self.m), ("j", self.j), ("k", self.k)] {
            if value < 2 {
                return Err(ValidationError::TooFewSteps { name, value, min: 2 });
            }
        }
        if self.n < 1 {
            return Err(ValidationError::TooFewSteps {
                name: "n",
                value: self.n,
                min: 1,
            });
        }
        Ok(self)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.m + 1, self.j + 1, self.k + 1)
    }
}

/// Uniform grid with coordinate arrays and time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3D {
    pub spec: GridSpec,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub ds: f64,
    pub dv: f64,
    pub dr: f64,
    /// Time step in reversed time `tau = T - t`.
    pub dt: f64,
    pub maturity: f64,
}

fn axis(max: f64, steps: usize) -> (Vec<f64>, f64) {
    let h = max / steps as f64;
    let mut pts: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    pts[steps] = max;
    (pts, h)
}

impl Grid3D {
    pub fn new(spec: GridSpec, maturity: f64) -> Self {
        let (s, ds) = axis(spec.s_max, spec.m);
        let (v, dv) = axis(spec.v_max, spec.j);
        let (r, dr) = axis(spec.r_max, spec.k);
        Grid3D {
            spec,
            s,
            v,
            r,
            ds,
            dv,
            dr,
            dt: maturity / spec.n as f64,
            maturity,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.spec.shape()
    }

    pub fn node_count(&self) -> usize {
        let (a, b, c) = self.shape();
        a * b * c
    }

    /// Nodes carrying a Dirichlet value: `S = 0` and `V = V_max`.
    #[inline]
    pub fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        i == 0 || j == self.spec.j
    }

    /// Dirichlet value at `(i, j)`: zero on `S = 0`, `S` on `V = V_max`.
    /// The `S = 0` plane wins at the shared edge, where both give zero.
    #[inline]
    pub fn dirichlet_value(&self, i: usize) -> f64 {
        self.s[i]
    }

    pub fn contains(&self, s: f64, v: f64, r: f64) -> bool {
        (0.0..=self.spec.s_max).contains(&s)
            && (0.0..=self.spec.v_max).contains(&v)
            && (0.0..=self.spec.r_max).contains(&r)
    }
}

/// One time level of the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceField {
    pub values: Array3<f64>,
    /// Years elapsed in reversed time since maturity.
    pub tau: f64,
}

impl PriceField {
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// Builds the grid and the payoff slice at `tau = 0`.
pub fn build_grid(spec: GridSpec, option: &OptionSpec) -> Result<(Grid3D, PriceField)> {
    let spec = spec.validate()?;
    let option = option.validate()?;
    let grid = Grid3D::new(spec, option.maturity);
    let values = Array3::from_shape_fn(grid.shape(), |(i, _, _)| payoff(grid.s[i], &option));
    Ok((grid, PriceField { values, tau: 0.0 }))
}

/// Locates `x` on a uniform axis: lower node index and weight of the upper
/// node.
fn bracket(x: f64, h: f64, steps: usize) -> (usize, f64) {
    let pos = x / h;
    let lo = (pos.floor() as usize).min(steps - 1);
    let w = (pos - lo as f64).clamp(0.0, 1.0);
    (lo, w)
}

/// Trilinear interpolation of `field` at `(s, v, r)`; exact at nodes.
pub fn sample_field(values: &Array3<f64>, grid: &Grid3D, s: f64, v: f64, r: f64) -> Result<f64> {
    if !grid.contains(s, v, r) {
        return Err(Error::OutOfDomain { s, v, r });
    }
    let (i0, ws) = bracket(s, grid.ds, grid.spec.m);
    let (j0, wv) = bracket(v, grid.dv, grid.spec.j);
    let (k0, wr) = bracket(r, grid.dr, grid.spec.k);
    let mut acc = 0.0;
    for (di, fs) in [(0, 1.0 - ws), (1, ws)] {
        for (dj, fv) in [(0, 1.0 - wv), (1, wv)] {
            for (dk, fr) in [(0, 1.0 - wr), (1, wr)] {
                let w = fs * fv * fr;
                if w != 0.0 {
                    acc += w * values[[i0 + di, j0 + dj, k0 + dk]];
                }
            }
        }
    }
    Ok(acc)
}
