//! Nonlinear transaction-cost sources.
//!
//! With rebalancing interval `δt` and `L = √(2/(π δt))`:
//!
//! ```text
//! F1 = k0 S L √(V S² C_SS² + σ²V C_SV² + 2ρVσS C_SS C_SV)
//! F2 = k1 V L √(σ²V C_VV² + V S² C_SV² + 2ρVσS C_VV C_SV)
//! F3 = k2 √R L (Z/|θ|) η |C_RR|,    θ = ∂Z/∂R
//! ```
//!
//! In reversed time the pricing equation reads `C_τ = A C − (F1 + F2 + F3)`,
//! so the explicit source handed to the time-stepper is `φ = −ΣF`.

use ndarray::Array3;
use rayon::prelude::*;

use crate::bond::{bond_dzdr, bond_price};
use crate::error::{Error, Result};
use crate::model::{CostParams, Grid3D, ModelParams};
use crate::operators::Strides;

/// Floor on `|θ|` below which the bond hedge ratio is treated as undefined.
pub const THETA_FLOOR: f64 = 1e-12;

/// Explicit cost source for one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSourceField {
    pub phi: Array3<f64>,
    /// `[F1, F2, F3]`, kept only when requested.
    pub components: Option<[Array3<f64>; 3]>,
    /// Radicands that came out negative and were clamped to zero.
    pub clamp_count: usize,
    /// Largest `|radicand| / Σ|terms|` among clamped radicands.
    pub worst_clamp_ratio: f64,
}

/// Central second differences reused by every cost component, with the
/// same ghost values the directional operators use.
pub(crate) struct Curvatures<'a> {
    c: &'a [f64],
    grid: &'a Grid3D,
    st: Strides,
}

impl<'a> Curvatures<'a> {
    pub fn new(c: &'a [f64], grid: &'a Grid3D) -> Self {
        Curvatures {
            c,
            grid,
            st: Strides::of(grid),
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[self.st.index(i, j, k)]
    }

    /// `C_SS`; the `S_max` row uses the unit-gradient ghost.
    pub fn ss(&self, i: usize, j: usize, k: usize) -> f64 {
        let h = self.grid.ds;
        let m = self.grid.spec.m;
        if i == 0 {
            0.0
        } else if i == m {
            2.0 * (self.at(m - 1, j, k) - self.at(m, j, k) + h) / (h * h)
        } else {
            (self.at(i + 1, j, k) - 2.0 * self.at(i, j, k) + self.at(i - 1, j, k)) / (h * h)
        }
    }

    /// `C_VV`; zero on the edge planes, where every consumer carries a
    /// vanishing `V` prefactor or a Dirichlet value.
    pub fn vv(&self, i: usize, j: usize, k: usize) -> f64 {
        let h = self.grid.dv;
        if j == 0 || j == self.grid.spec.j {
            0.0
        } else {
            (self.at(i, j + 1, k) - 2.0 * self.at(i, j, k) + self.at(i, j - 1, k)) / (h * h)
        }
    }

    /// `C_SV` by the 4-point stencil. The ghost reflection at `S_max`
    /// cancels the cross difference, so that row is zero.
    pub fn sv(&self, i: usize, j: usize, k: usize) -> f64 {
        let g = self.grid;
        if i == 0 || i == g.spec.m || j == 0 || j == g.spec.j {
            return 0.0;
        }
        (self.at(i + 1, j + 1, k) + self.at(i - 1, j - 1, k)
            - self.at(i + 1, j - 1, k)
            - self.at(i - 1, j + 1, k))
            / (4.0 * g.ds * g.dv)
    }

    /// `C_RR` with the zero-gradient ghosts at both rate ends.
    pub fn rr(&self, i: usize, j: usize, k: usize) -> f64 {
        let h = self.grid.dr;
        let kmax = self.grid.spec.k;
        if k == 0 {
            2.0 * (self.at(i, j, 1) - self.at(i, j, 0)) / (h * h)
        } else if k == kmax {
            2.0 * (self.at(i, j, kmax - 1) - self.at(i, j, kmax)) / (h * h)
        } else {
            (self.at(i, j, k + 1) - 2.0 * self.at(i, j, k) + self.at(i, j, k - 1)) / (h * h)
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ClampStats {
    count: usize,
    worst: f64,
}

impl ClampStats {
    fn merge(self, other: ClampStats) -> ClampStats {
        ClampStats {
            count: self.count + other.count,
            worst: self.worst.max(other.worst),
        }
    }
}

/// `√(q)` of a radicand `q = t1 + t2 + t3`, clamping negative round-off.
#[inline]
fn clamped_root(terms: [f64; 3], stats: &mut ClampStats) -> f64 {
    let q = terms[0] + terms[1] + terms[2];
    if q >= 0.0 {
        q.sqrt()
    } else {
        let scale = terms[0].abs() + terms[1].abs() + terms[2].abs();
        stats.count += 1;
        stats.worst = stats.worst.max(if scale > 0.0 { -q / scale } else { 0.0 });
        0.0
    }
}

/// `√(2/(π δt))`.
#[inline]
pub fn leland_factor(delta_t: f64) -> f64 {
    (2.0 / (std::f64::consts::PI * delta_t)).sqrt()
}

#[inline]
fn f1_at(s: f64, v: f64, c_ss: f64, c_sv: f64, p: &ModelParams, k0: f64, lf: f64, st: &mut ClampStats) -> f64 {
    if k0 == 0.0 {
        return 0.0;
    }
    let root = clamped_root(
        [
            v * s * s * c_ss * c_ss,
            p.sigma * p.sigma * v * c_sv * c_sv,
            2.0 * p.rho * v * p.sigma * s * c_ss * c_sv,
        ],
        st,
    );
    k0 * s * lf * root
}

#[inline]
fn f2_at(s: f64, v: f64, c_vv: f64, c_sv: f64, p: &ModelParams, k1: f64, lf: f64, st: &mut ClampStats) -> f64 {
    if k1 == 0.0 {
        return 0.0;
    }
    let root = clamped_root(
        [
            p.sigma * p.sigma * v * c_vv * c_vv,
            v * s * s * c_sv * c_sv,
            2.0 * p.rho * v * p.sigma * s * c_vv * c_sv,
        ],
        st,
    );
    k1 * v * lf * root
}

/// Per-rate factor `k2 √R L η Z/|θ|` of F3 at calendar time `t_eval`.
fn f3_rate_factors(grid: &Grid3D, params: &ModelParams, k2: f64, lf: f64, t_eval: f64) -> Result<Vec<f64>> {
    grid.r
        .iter()
        .map(|&r| {
            if k2 == 0.0 || r == 0.0 {
                return Ok(0.0);
            }
            let z = bond_price(r, t_eval, grid.maturity, params);
            let theta = bond_dzdr(r, t_eval, grid.maturity, params);
            if theta.abs() < THETA_FLOOR {
                return Err(Error::DegenerateTheta {
                    rate: r,
                    tau: grid.maturity - t_eval,
                    theta,
                });
            }
            Ok(k2 * r.sqrt() * lf * params.eta * z / theta.abs())
        })
        .collect()
}

fn standard(values: &Array3<f64>) -> std::borrow::Cow<'_, [f64]> {
    match values.as_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(values.iter().copied().collect()),
    }
}

fn per_node<F>(grid: &Grid3D, f: F) -> (Array3<f64>, ClampStats)
where
    F: Fn(usize, usize, usize, &mut ClampStats) -> f64 + Sync,
{
    let (ni, nj, nk) = grid.shape();
    let mut out = vec![0.0; ni * nj * nk];
    let stats = out
        .par_chunks_mut(nj * nk)
        .enumerate()
        .map(|(i, slab)| {
            let mut st = ClampStats::default();
            for j in 0..nj {
                for k in 0..nk {
                    if !grid.is_dirichlet(i, j) {
                        slab[j * nk + k] = f(i, j, k, &mut st);
                    }
                }
            }
            st
        })
        .reduce(ClampStats::default, ClampStats::merge);
    (Array3::from_shape_vec((ni, nj, nk), out).expect("shape"), stats)
}

/// Asset-hedging cost `F1` at every non-Dirichlet node.
pub fn eval_f1(values: &Array3<f64>, grid: &Grid3D, params: &ModelParams, costs: &CostParams) -> Array3<f64> {
    let c = standard(values);
    let cv = Curvatures::new(&c, grid);
    let lf = leland_factor(costs.rebalance_interval(grid.dt));
    per_node(grid, |i, j, k, st| {
        f1_at(grid.s[i], grid.v[j], cv.ss(i, j, k), cv.sv(i, j, k), params, costs.k0, lf, st)
    })
    .0
}

/// Variance-hedging cost `F2` at every non-Dirichlet node.
pub fn eval_f2(values: &Array3<f64>, grid: &Grid3D, params: &ModelParams, costs: &CostParams) -> Array3<f64> {
    let c = standard(values);
    let cv = Curvatures::new(&c, grid);
    let lf = leland_factor(costs.rebalance_interval(grid.dt));
    per_node(grid, |i, j, k, st| {
        f2_at(grid.s[i], grid.v[j], cv.vv(i, j, k), cv.sv(i, j, k), params, costs.k1, lf, st)
    })
    .0
}

/// Bond-hedging cost `F3` with the bond evaluated at calendar time
/// `t_eval < T`.
pub fn eval_f3(
    values: &Array3<f64>,
    grid: &Grid3D,
    params: &ModelParams,
    costs: &CostParams,
    t_eval: f64,
) -> Result<Array3<f64>> {
    let c = standard(values);
    let cv = Curvatures::new(&c, grid);
    let lf = leland_factor(costs.rebalance_interval(grid.dt));
    let factors = f3_rate_factors(grid, params, costs.k2, lf, t_eval)?;
    Ok(per_node(grid, |i, j, k, _| {
        if factors[k] == 0.0 {
            0.0
        } else {
            factors[k] * cv.rr(i, j, k).abs()
        }
    })
    .0)
}

/// `φ = −(F1 + F2 + F3)` for the field at calendar time `t_eval`.
/// Dirichlet nodes carry no source.
pub fn assemble_phi(
    values: &Array3<f64>,
    grid: &Grid3D,
    params: &ModelParams,
    costs: &CostParams,
    t_eval: f64,
    keep_components: bool,
) -> Result<CostSourceField> {
    let c = standard(values);
    let cv = Curvatures::new(&c, grid);
    let lf = leland_factor(costs.rebalance_interval(grid.dt));
    let factors = f3_rate_factors(grid, params, costs.k2, lf, t_eval)?;
    let (phi, stats) = per_node(grid, |i, j, k, st| {
        let (s, v) = (grid.s[i], grid.v[j]);
        let c_sv = cv.sv(i, j, k);
        let f1 = f1_at(s, v, cv.ss(i, j, k), c_sv, params, costs.k0, lf, st);
        let f2 = f2_at(s, v, cv.vv(i, j, k), c_sv, params, costs.k1, lf, st);
        let f3 = if factors[k] == 0.0 {
            0.0
        } else {
            factors[k] * cv.rr(i, j, k).abs()
        };
        -(f1 + f2 + f3)
    });
    let components = if keep_components {
        Some([
            eval_f1(values, grid, params, costs),
            eval_f2(values, grid, params, costs),
            eval_f3(values, grid, params, costs, t_eval)?,
        ])
    } else {
        None
    };
    Ok(CostSourceField {
        phi,
        components,
        clamp_count: stats.count,
        worst_clamp_ratio: stats.worst,
    })
}
