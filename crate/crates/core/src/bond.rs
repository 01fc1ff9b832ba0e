//! CIR zero-coupon bond: closed form, rate sensitivity, and a
//! Crank-Nicolson reference solve of the bond pricing equation
//!
//! ```text
//! Z_t + ½η²R Z_RR + α(β − R) Z_R − R Z = 0,    Z(R, T; T) = 1
//! ```
//!
//! whose solution is `ln Z = log_A − B·R` with `γ = √(α² + 2η²)`.

use crate::model::ModelParams;
use crate::tridiag::{solve_in_place, DEFAULT_PIVOT_TOL};

/// Time-dependent coefficients of the affine bond price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondCoefficients {
    pub gamma: f64,
    pub log_a: f64,
    pub b: f64,
}

/// `γ = √(α² + 2η²)`.
pub fn bond_gamma(params: &ModelParams) -> f64 {
    (params.alpha * params.alpha + 2.0 * params.eta * params.eta).sqrt()
}

/// Coefficients at calendar time `t` for a bond maturing at `maturity`.
pub fn bond_coeffs(params: &ModelParams, t: f64, maturity: f64) -> BondCoefficients {
    coeffs_for_horizon(params, (maturity - t).max(0.0))
}

/// Coefficients for time-to-maturity `tau_b`.
pub fn coeffs_for_horizon(params: &ModelParams, tau_b: f64) -> BondCoefficients {
    let alpha = params.alpha;
    let eta2 = params.eta * params.eta;
    let gamma = bond_gamma(params);
    let growth = (gamma * tau_b).exp_m1();
    let denom = (alpha + gamma) * growth + 2.0 * gamma;
    let b = 2.0 * growth / denom;
    // log_A = (2αβ/η²)·[(α+γ)τ/2 − ln(1 + (α+γ)x/(2γ))]. Using γ − α = 2η²/(α+γ)
    // the bracket becomes η²·[−τ/s + (2/s²)(h(q) − e^{−γτ}h(q e^{−γτ}))] with
    // s = α+γ, q = 2η²/s², h(q) = ln(1+q)/q, so the 1/η² cancels analytically
    // and the η → 0 limit is exact.
    let ab = alpha * params.beta;
    let log_a = if ab == 0.0 || tau_b == 0.0 {
        0.0
    } else {
        let s = alpha + gamma;
        let q = 2.0 * eta2 / (s * s);
        let decay = (-gamma * tau_b).exp();
        2.0 * ab * (-tau_b / s + 2.0 / (s * s) * (ln1p_ratio(q) - decay * ln1p_ratio(q * decay)))
    };
    BondCoefficients { gamma, log_a, b }
}

/// `ln(1 + q)/q`, continuous at `q = 0`.
fn ln1p_ratio(q: f64) -> f64 {
    if q == 0.0 {
        1.0
    } else {
        q.ln_1p() / q
    }
}

/// Closed-form bond price `Z(R, t; T) = exp(log_A − B·R)`.
pub fn bond_price(rate: f64, t: f64, maturity: f64, params: &ModelParams) -> f64 {
    let c = bond_coeffs(params, t, maturity);
    (c.log_a - c.b * rate).exp()
}

/// Bond delta `θ = ∂Z/∂R = −B·Z`.
pub fn bond_dzdr(rate: f64, t: f64, maturity: f64, params: &ModelParams) -> f64 {
    let c = bond_coeffs(params, t, maturity);
    -c.b * (c.log_a - c.b * rate).exp()
}

/// Maximum residuals of the bond equation under the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondResidual {
    /// Max |residual| of the centrally differenced PDE over interior nodes.
    pub pde: f64,
    /// Max |Z(R, T; T) − 1| over the rate grid.
    pub terminal: f64,
}

/// Plugs the closed form into the discretized bond equation.
///
/// Rate and time derivatives use second-order central differences at
/// interior nodes of `rates` × `times` (both uniform and increasing). The
/// market price of risk is taken as zero.
pub fn bond_pde_residual(
    params: &ModelParams,
    rates: &[f64],
    times: &[f64],
    maturity: f64,
) -> BondResidual {
    residual_with(params, rates, times, maturity, |r, t| bond_price(r, t, maturity, params))
}

pub(crate) fn residual_with(
    params: &ModelParams,
    rates: &[f64],
    times: &[f64],
    maturity: f64,
    z: impl Fn(f64, f64) -> f64,
) -> BondResidual {
    let terminal = rates
        .iter()
        .map(|&r| (z(r, maturity) - 1.0).abs())
        .fold(0.0, f64::max);
    let mut pde: f64 = 0.0;
    if rates.len() >= 3 && times.len() >= 3 {
        let hr = rates[1] - rates[0];
        let ht = times[1] - times[0];
        for w_t in times.windows(3) {
            let t = w_t[1];
            for w_r in rates.windows(3) {
                let r = w_r[1];
                let zc = z(r, t);
                let z_t = (z(r, w_t[2]) - z(r, w_t[0])) / (2.0 * ht);
                let (zu, zd) = (z(w_r[2], t), z(w_r[0], t));
                let z_r = (zu - zd) / (2.0 * hr);
                let z_rr = (zu - 2.0 * zc + zd) / (hr * hr);
                let res = z_t + 0.5 * params.eta * params.eta * r * z_rr
                    + params.alpha * (params.beta - r) * z_r
                    - r * zc;
                pde = pde.max(res.abs());
            }
        }
    }
    BondResidual { pde, terminal }
}

/// Reference bond price from a Crank-Nicolson solve of the bond equation
/// on `[0, r_max]` with `n_rate` intervals and `n_time` steps over
/// `horizon` years, linearly interpolated at `rate`.
///
/// At `R = 0` the diffusion vanishes and the drift `αβ` points inward, so
/// the row is a one-sided upwind transport. At `R = r_max` the curvature is
/// dropped and the (inward) drift is upwinded.
pub fn bond_price_crank_nicolson(
    params: &ModelParams,
    rate: f64,
    horizon: f64,
    r_max: f64,
    n_rate: usize,
    n_time: usize,
) -> f64 {
    let n = n_rate + 1;
    let h = r_max / n_rate as f64;
    let dt = horizon / n_time as f64;
    let eta2 = params.eta * params.eta;

    // Spatial operator L Z = ½η²R Z_RR + α(β−R) Z_R − R Z as tridiagonal rows.
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    for m in 0..n {
        let r = m as f64 * h;
        let diff = 0.5 * eta2 * r / (h * h);
        let drift = params.alpha * (params.beta - r);
        if m == 0 {
            di[m] = -drift / h - r;
            up[m] = drift / h;
        } else if m == n - 1 {
            // Z_RR(R_max) taken as zero; drift is inward so upwind backward.
            lo[m] = -drift / h;
            di[m] = drift / h - r;
        } else {
            lo[m] = diff - drift / (2.0 * h);
            di[m] = -2.0 * diff - r;
            up[m] = diff + drift / (2.0 * h);
        }
    }

    let mut z = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let a_lo: Vec<f64> = lo.iter().map(|x| -0.5 * dt * x).collect();
    let a_di: Vec<f64> = di.iter().map(|x| 1.0 - 0.5 * dt * x).collect();
    let a_up: Vec<f64> = up.iter().map(|x| -0.5 * dt * x).collect();
    for _ in 0..n_time {
        for m in 0..n {
            let mut lz = di[m] * z[m];
            if m > 0 {
                lz += lo[m] * z[m - 1];
            }
            if m + 1 < n {
                lz += up[m] * z[m + 1];
            }
            rhs[m] = z[m] + 0.5 * dt * lz;
        }
        solve_in_place(&a_lo, &a_di, &a_up, &mut rhs, &mut scratch, DEFAULT_PIVOT_TOL)
            .expect("bond Crank-Nicolson system is diagonally dominant");
        std::mem::swap(&mut z, &mut rhs);
    }
    let pos = rate / h;
    let lo_idx = (pos.floor() as usize).min(n - 2);
    let w = pos - lo_idx as f64;
    (1.0 - w) * z[lo_idx] + w * z[lo_idx + 1]
}
