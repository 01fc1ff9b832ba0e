//! Dense-matrix evaluation of one Douglas step, assembled straight from the
//! stencil formulas rather than from the library's row builders.

#![allow(dead_code)]

use hcir_core::adi::{douglas_step, DouglasConfig};
use hcir_core::model::{Grid3D, GridSpec, ModelParams};
use hcir_core::operators::SpatialOperators;
use nalgebra::{DMatrix, DVector};
use ndarray::Array3;

pub struct Dense {
    pub a: [DMatrix<f64>; 3],
    pub mixed: DMatrix<f64>,
    /// Affine part of `A_S` from the `S_max` gradient condition.
    pub b_s: DVector<f64>,
}

pub fn idx(g: &Grid3D, i: usize, j: usize, k: usize) -> usize {
    (i * (g.spec.j + 1) + j) * (g.spec.k + 1) + k
}

pub fn assemble(g: &Grid3D, p: &ModelParams) -> Dense {
    let n = g.node_count();
    let (m_max, j_max, k_max) = (g.spec.m, g.spec.j, g.spec.k);
    let mut a_s = DMatrix::zeros(n, n);
    let mut a_v = DMatrix::zeros(n, n);
    let mut a_r = DMatrix::zeros(n, n);
    let mut mixed = DMatrix::zeros(n, n);
    let mut b_s = DVector::zeros(n);
    let (hs, hv, hr) = (g.ds, g.dv, g.dr);
    for i in 0..=m_max {
        for j in 0..=j_max {
            for k in 0..=k_max {
                if i == 0 || j == j_max {
                    continue;
                }
                let (s, v, r) = (g.s[i], g.v[j], g.r[k]);
                let row = idx(g, i, j, k);
                let q = r / 3.0;

                // S: ½VS² C_SS + RS C_S − q C, ghost C_{M+1} = C_{M−1} + 2h at S_max.
                let (d, c) = (0.5 * v * s * s, r * s);
                if i < m_max {
                    a_s[(row, idx(g, i - 1, j, k))] += d / (hs * hs) - c / (2.0 * hs);
                    a_s[(row, idx(g, i + 1, j, k))] += d / (hs * hs) + c / (2.0 * hs);
                    a_s[(row, row)] += -2.0 * d / (hs * hs) - q;
                } else {
                    a_s[(row, idx(g, i - 1, j, k))] += 2.0 * d / (hs * hs);
                    a_s[(row, row)] += -2.0 * d / (hs * hs) - q;
                    b_s[row] = 2.0 * d * hs / (hs * hs) + c;
                }

                // V: ½σ²V C_VV + RV C_V − q C; both coefficients vanish at V = 0.
                if j == 0 {
                    a_v[(row, row)] = -q;
                } else {
                    let (d, c) = (0.5 * p.sigma * p.sigma * v, r * v);
                    a_v[(row, idx(g, i, j - 1, k))] += d / (hv * hv) - c / (2.0 * hv);
                    a_v[(row, idx(g, i, j + 1, k))] += d / (hv * hv) + c / (2.0 * hv);
                    a_v[(row, row)] += -2.0 * d / (hv * hv) - q;
                }

                // R: ½η²R C_RR + α(β−R) C_R − q C, zero slope at both ends.
                let (d, c) = (0.5 * p.eta * p.eta * r, p.alpha * (p.beta - r));
                let lo = if k == 0 { k + 1 } else { k - 1 };
                let hi = if k == k_max { k - 1 } else { k + 1 };
                let (w_lo, w_hi) = if k == 0 || k == k_max {
                    (d / (hr * hr), d / (hr * hr))
                } else {
                    (d / (hr * hr) - c / (2.0 * hr), d / (hr * hr) + c / (2.0 * hr))
                };
                a_r[(row, idx(g, i, j, lo))] += w_lo;
                a_r[(row, idx(g, i, j, hi))] += w_hi;
                a_r[(row, row)] += -2.0 * d / (hr * hr) - q;

                // SV: ρσVS C_SV on the interior of the (S, V) plane.
                if i < m_max && j > 0 {
                    let w = p.rho * p.sigma * v * s / (4.0 * hs * hv);
                    mixed[(row, idx(g, i + 1, j + 1, k))] += w;
                    mixed[(row, idx(g, i - 1, j - 1, k))] += w;
                    mixed[(row, idx(g, i + 1, j - 1, k))] -= w;
                    mixed[(row, idx(g, i - 1, j + 1, k))] -= w;
                }
            }
        }
    }
    Dense {
        a: [a_s, a_v, a_r],
        mixed,
        b_s,
    }
}

pub fn impose(g: &Grid3D, x: &mut DVector<f64>) {
    for i in 0..=g.spec.m {
        for j in 0..=g.spec.j {
            for k in 0..=g.spec.k {
                if i == 0 {
                    x[idx(g, i, j, k)] = 0.0;
                } else if j == g.spec.j {
                    x[idx(g, i, j, k)] = g.s[i];
                }
            }
        }
    }
}

pub fn dense_step(g: &Grid3D, d: &Dense, c: &DVector<f64>, phi: &DVector<f64>, dt: f64, theta: f64) -> DVector<f64> {
    let n = g.node_count();
    let full = &d.a[0] + &d.a[1] + &d.a[2] + &d.mixed;
    let mut y = c + (&full * c + &d.b_s + phi) * dt;
    impose(g, &mut y);
    for a in &d.a {
        let lhs = DMatrix::identity(n, n) - a * (theta * dt);
        let rhs = &y - a * c * (theta * dt);
        y = lhs.lu().solve(&rhs).expect("nonsingular");
    }
    impose(g, &mut y);
    y
}

pub fn setup() -> (Grid3D, ModelParams, Array3<f64>, Array3<f64>) {
    let spec = GridSpec {
        s_max: 150.0,
        v_max: 0.6,
        r_max: 0.6,
        m: 3,
        j: 3,
        k: 3,
        n: 4,
    };
    let g = Grid3D::new(spec, 1.0);
    let p = ModelParams::default();
    let c = Array3::from_shape_fn(g.shape(), |(i, j, k)| {
        let (s, v, r) = (g.s[i], g.v[j], g.r[k]);
        (s - 60.0).max(0.0) + 3.0 * (1.3 * s / 50.0 + 7.0 * v - 2.0 * r).sin() + 10.0 * v * r
    });
    let phi = Array3::from_shape_fn(g.shape(), |(i, j, k)| -0.1 * ((i + 2 * j + 3 * k) as f64).cos().abs());
    (g, p, c, phi)
}

pub fn to_vec(a: &Array3<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().copied())
}

/// Max |library − dense| for one step of size 0.25 on the 4×4×4 grid.
pub fn step_mismatch(theta: f64, with_phi: bool) -> f64 {
    let (g, p, c, phi) = setup();
    let dt = 0.25;
    let ops = SpatialOperators::new(&g, &p);
    let cfg = DouglasConfig {
        theta1: theta,
        ..Default::default()
    };
    let got = douglas_step(&c, &ops, with_phi.then_some(&phi), dt, &cfg).unwrap().values;
    let dense = assemble(&g, &p);
    let phi_v = if with_phi {
        to_vec(&phi)
    } else {
        DVector::zeros(g.node_count())
    };
    let want = dense_step(&g, &dense, &to_vec(&c), &phi_v, dt, theta);
    got.iter().zip(want.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
