//! Directional operators of the split pricing PDE
//!
//! ```text
//! A_S C  = ½VS² C_SS + RS C_S − (R/3) C
//! A_V C  = ½σ²V C_VV + RV C_V − (R/3) C
//! A_R C  = ½η²R C_RR + α(β − R) C_R − (R/3) C
//! A_SV C = ρσVS C_SV
//! ```
//!
//! discretized with second-order central differences on the uniform grid.
//!
//! Boundary handling lives in the operator rows:
//! - Dirichlet nodes (`S = 0`, `V = V_max`) have all-zero rows, so every
//!   implicit sweep leaves them untouched.
//! - `∂C/∂S = 1` at `S_max` eliminates the ghost `C_{M+1} = C_{M−1} + 2ΔS`,
//!   which leaves an affine row constant `2a/ΔS + b`.
//! - `∂C/∂R = 0` at both rate ends eliminates `C_{−1} = C_1`, `C_{K+1} = C_{K−1}`.
//! - On `V = 0` the V-coefficients vanish and the row degenerates to the
//!   reaction share alone.

use ndarray::{Array3, Axis};
use rayon::prelude::*;

use crate::model::{Grid3D, ModelParams, OptionSpec, PriceField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    S,
    V,
    R,
}

impl Direction {
    pub fn axis(self) -> Axis {
        match self {
            Direction::S => Axis(0),
            Direction::V => Axis(1),
            Direction::R => Axis(2),
        }
    }
}

/// One row of a directional operator: `lower·C[m−1] + diag·C[m] +
/// upper·C[m+1] + constant`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StencilRow {
    pub lower: f64,
    pub diag: f64,
    pub upper: f64,
    pub constant: f64,
}

/// Coefficients of one grid line, all of the direction's node count.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalLine {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub constant: Vec<f64>,
}

/// Strides of a C-ordered `(M+1, J+1, K+1)` field.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Strides {
    pub s: usize,
    pub v: usize,
}

impl Strides {
    pub fn of(grid: &Grid3D) -> Self {
        let (_, nj, nk) = grid.shape();
        Strides { s: nj * nk, v: nk }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i * self.s + j * self.v + k
    }
}

/// Tridiagonal representation of `A_S`, `A_V` or `A_R`, one line per pair of
/// transverse indices. Rows are generated on demand from the grid
/// coordinates.
#[derive(Debug, Clone)]
pub struct DirectionalOperator {
    pub direction: Direction,
    grid: Grid3D,
    params: ModelParams,
}

impl DirectionalOperator {
    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    /// Node count along the operator's direction.
    pub fn len(&self) -> usize {
        let (a, b, c) = self.grid.shape();
        match self.direction {
            Direction::S => a,
            Direction::V => b,
            Direction::R => c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row at node `(i, j, k)`.
    #[inline]
    pub fn row(&self, i: usize, j: usize, k: usize) -> StencilRow {
        let g = &self.grid;
        if g.is_dirichlet(i, j) {
            return StencilRow::default();
        }
        let (s, v, r) = (g.s[i], g.v[j], g.r[k]);
        let reaction = r / 3.0;
        match self.direction {
            Direction::S => {
                let h = g.ds;
                let a = 0.5 * v * s * s;
                let b = r * s;
                if i == g.spec.m {
                    StencilRow {
                        lower: 2.0 * a / (h * h),
                        diag: -2.0 * a / (h * h) - reaction,
                        upper: 0.0,
                        constant: 2.0 * a / h + b,
                    }
                } else {
                    interior_row(a, b, h, reaction)
                }
            }
            Direction::V => {
                if j == 0 {
                    StencilRow {
                        diag: -reaction,
                        ..Default::default()
                    }
                } else {
                    let a = 0.5 * self.params.sigma * self.params.sigma * v;
                    interior_row(a, r * v, g.dv, reaction)
                }
            }
            Direction::R => {
                let h = g.dr;
                let a = 0.5 * self.params.eta * self.params.eta * r;
                let b = self.params.alpha * (self.params.beta - r);
                if k == 0 {
                    StencilRow {
                        lower: 0.0,
                        diag: -2.0 * a / (h * h) - reaction,
                        upper: 2.0 * a / (h * h),
                        constant: 0.0,
                    }
                } else if k == g.spec.k {
                    StencilRow {
                        lower: 2.0 * a / (h * h),
                        diag: -2.0 * a / (h * h) - reaction,
                        upper: 0.0,
                        constant: 0.0,
                    }
                } else {
                    interior_row(a, b, h, reaction)
                }
            }
        }
    }

    /// Node `(i, j, k)` for position `m` on the line with transverse indices
    /// `(t1, t2)` (in axis order).
    #[inline]
    pub fn node(&self, m: usize, t1: usize, t2: usize) -> (usize, usize, usize) {
        match self.direction {
            Direction::S => (m, t1, t2),
            Direction::V => (t1, m, t2),
            Direction::R => (t1, t2, m),
        }
    }

    /// All rows of one line.
    pub fn line(&self, t1: usize, t2: usize) -> TridiagonalLine {
        let n = self.len();
        let mut out = TridiagonalLine {
            lower: Vec::with_capacity(n),
            diag: Vec::with_capacity(n),
            upper: Vec::with_capacity(n),
            constant: Vec::with_capacity(n),
        };
        for m in 0..n {
            let (i, j, k) = self.node(m, t1, t2);
            let row = self.row(i, j, k);
            out.lower.push(row.lower);
            out.diag.push(row.diag);
            out.upper.push(row.upper);
            out.constant.push(row.constant);
        }
        out
    }

    /// `A_d C` at one node, affine constant included.
    #[inline]
    pub(crate) fn apply_at(&self, c: &[f64], st: Strides, i: usize, j: usize, k: usize) -> f64 {
        let row = self.row(i, j, k);
        let idx = st.index(i, j, k);
        let step = match self.direction {
            Direction::S => st.s,
            Direction::V => st.v,
            Direction::R => 1,
        };
        let mut acc = row.diag * c[idx] + row.constant;
        if row.lower != 0.0 {
            acc += row.lower * c[idx - step];
        }
        if row.upper != 0.0 {
            acc += row.upper * c[idx + step];
        }
        acc
    }

    /// `A_d C` over the whole field.
    pub fn apply(&self, c: &Array3<f64>) -> Array3<f64> {
        map_nodes(&self.grid, c, |slice, st, i, j, k| self.apply_at(slice, st, i, j, k))
    }
}

#[inline]
fn interior_row(a: f64, b: f64, h: f64, reaction: f64) -> StencilRow {
    let diff = a / (h * h);
    let conv = b / (2.0 * h);
    StencilRow {
        lower: diff - conv,
        diag: -2.0 * diff - reaction,
        upper: diff + conv,
        constant: 0.0,
    }
}

/// Cross-derivative term `ρσVS C_SV` with the 4-point stencil, active on
/// `1 ≤ i ≤ M−1`, `1 ≤ j ≤ J−1` and zero elsewhere.
#[derive(Debug, Clone)]
pub struct MixedOperator {
    grid: Grid3D,
    params: ModelParams,
}

impl MixedOperator {
    #[inline]
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        if i == 0 || i >= g.spec.m || j == 0 || j >= g.spec.j {
            return 0.0;
        }
        self.params.rho * self.params.sigma * g.v[j] * g.s[i]
    }

    #[inline]
    pub(crate) fn apply_at(&self, c: &[f64], st: Strides, i: usize, j: usize, k: usize) -> f64 {
        let coef = self.coefficient(i, j);
        if coef == 0.0 {
            return 0.0;
        }
        let idx = st.index(i, j, k);
        let cross = c[idx + st.s + st.v] + c[idx - st.s - st.v] - c[idx + st.s - st.v] - c[idx - st.s + st.v];
        coef * cross / (4.0 * self.grid.ds * self.grid.dv)
    }

    pub fn apply(&self, c: &Array3<f64>) -> Array3<f64> {
        map_nodes(&self.grid, c, |slice, st, i, j, k| self.apply_at(slice, st, i, j, k))
    }
}

/// The full set `{A_S, A_V, A_R, A_SV}` for one grid and parameter set.
#[derive(Debug, Clone)]
pub struct SpatialOperators {
    pub s: DirectionalOperator,
    pub v: DirectionalOperator,
    pub r: DirectionalOperator,
    pub mixed: MixedOperator,
}

impl SpatialOperators {
    pub fn new(grid: &Grid3D, params: &ModelParams) -> Self {
        SpatialOperators {
            s: build_op_s(grid, params),
            v: build_op_v(grid, params),
            r: build_op_r(grid, params),
            mixed: build_op_mixed(grid, params),
        }
    }

    pub fn grid(&self) -> &Grid3D {
        &self.s.grid
    }

    pub fn directional(&self) -> [&DirectionalOperator; 3] {
        [&self.s, &self.v, &self.r]
    }

    /// `A C = (A_SV + A_S + A_V + A_R) C` at one node.
    #[inline]
    pub(crate) fn apply_at(&self, c: &[f64], st: Strides, i: usize, j: usize, k: usize) -> f64 {
        self.mixed.apply_at(c, st, i, j, k)
            + self.s.apply_at(c, st, i, j, k)
            + self.v.apply_at(c, st, i, j, k)
            + self.r.apply_at(c, st, i, j, k)
    }

    pub fn apply(&self, c: &Array3<f64>) -> Array3<f64> {
        map_nodes(self.grid(), c, |slice, st, i, j, k| self.apply_at(slice, st, i, j, k))
    }
}

pub fn build_op_s(grid: &Grid3D, params: &ModelParams) -> DirectionalOperator {
    DirectionalOperator {
        direction: Direction::S,
        grid: grid.clone(),
        params: *params,
    }
}

pub fn build_op_v(grid: &Grid3D, params: &ModelParams) -> DirectionalOperator {
    DirectionalOperator {
        direction: Direction::V,
        grid: grid.clone(),
        params: *params,
    }
}

pub fn build_op_r(grid: &Grid3D, params: &ModelParams) -> DirectionalOperator {
    DirectionalOperator {
        direction: Direction::R,
        grid: grid.clone(),
        params: *params,
    }
}

pub fn build_op_mixed(grid: &Grid3D, params: &ModelParams) -> MixedOperator {
    MixedOperator {
        grid: grid.clone(),
        params: *params,
    }
}

/// `ρσVS C_SV` over the whole field.
pub fn apply_mixed(c: &Array3<f64>, grid: &Grid3D, params: &ModelParams) -> Array3<f64> {
    build_op_mixed(grid, params).apply(c)
}

/// Evaluates `f` at every node, slab-parallel over `S`.
pub(crate) fn map_nodes<F>(grid: &Grid3D, c: &Array3<f64>, f: F) -> Array3<f64>
where
    F: Fn(&[f64], Strides, usize, usize, usize) -> f64 + Sync,
{
    let st = Strides::of(grid);
    let (ni, nj, nk) = grid.shape();
    assert_eq!(c.dim(), (ni, nj, nk), "field shape does not match grid");
    let src = c.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let mut out = vec![0.0; ni * nj * nk];
    out.par_chunks_mut(st.s).enumerate().for_each(|(i, slab)| {
        for j in 0..nj {
            for k in 0..nk {
                slab[j * nk + k] = f(src, st, i, j, k);
            }
        }
    });
    Array3::from_shape_vec((ni, nj, nk), out).expect("shape")
}

/// Imposes `C = 0` on `S = 0` and `C = S` on `V = V_max`.
pub fn impose_dirichlet(c: &mut Array3<f64>, grid: &Grid3D) {
    let jmax = grid.spec.j;
    for (i, mut plane) in c.axis_iter_mut(Axis(0)).enumerate() {
        if i == 0 {
            plane.fill(0.0);
        } else {
            plane.index_axis_mut(Axis(0), jmax).fill(grid.dirichlet_value(i));
        }
    }
}

/// Imposes the boundary planes, plus the payoff when `field` sits at
/// `tau = 0`. At maturity the payoff wins everywhere; it already matches
/// the `S = 0` plane.
pub fn apply_dirichlet_and_terminal(field: &mut PriceField, grid: &Grid3D, option: &OptionSpec) {
    if field.tau == 0.0 {
        for (i, mut plane) in field.values.axis_iter_mut(Axis(0)).enumerate() {
            plane.fill(crate::model::payoff(grid.s[i], option));
        }
    } else {
        impose_dirichlet(&mut field.values, grid);
    }
}
