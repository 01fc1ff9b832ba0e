//! Monte Carlo oracle: Euler paths for (S, V, R) with pathwise discounting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::ValidationError;
use crate::model::{payoff, ModelParams, OptionSpec};

/// Samples (paths or antithetic pairs) per RNG stream.
const BATCH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositivityScheme {
    /// Negative parts are zeroed inside drift and diffusion; the state itself
    /// may go negative.
    #[default]
    FullTruncation,
    /// The state is replaced by its absolute value after each step.
    Reflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftMode {
    /// Variance drift `k(ζ−V)`, rate drift `a(b−R)`.
    SdePaper,
    /// Variance drift `R·V`, rate drift `α(β−R)`: the diffusion whose
    /// generator is the pricing PDE.
    #[default]
    PdeConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: PositivityScheme,
    pub drift_mode: DriftMode,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 100,
            seed: 42,
            scheme: PositivityScheme::default(),
            drift_mode: DriftMode::default(),
            antithetic: true,
        }
    }
}

impl McConfig {
    pub fn validate(self) -> Result<Self, ValidationError> {
        for (name, value) in [("n_paths", self.n_paths), ("n_steps", self.n_steps)] {
            if value < 1 {
                return Err(ValidationError::TooFewSteps { name, value, min: 1 });
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    /// Share of (path, step) updates where V or R came out negative.
    pub clamp_fraction: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    sum: f64,
    sum_sq: f64,
    count: usize,
    clamps: usize,
    updates: usize,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.count += 1;
    }

    fn merge(mut self, o: Acc) -> Acc {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.count += o.count;
        self.clamps += o.clamps;
        self.updates += o.updates;
        self
    }

    fn estimate(self) -> McEstimate {
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = if self.count > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        McEstimate {
            price: mean,
            std_error: (var / n).sqrt(),
            clamp_fraction: if self.updates > 0 {
                self.clamps as f64 / self.updates as f64
            } else {
                0.0
            },
        }
    }
}

/// One square-root diffusion step `x + drift(x⁺)·dt + vol·√x⁺·dW` with the
/// chosen positivity fix. Returns the new state and whether it went negative.
#[inline]
fn sqrt_step(x: f64, drift: f64, vol: f64, dw: f64, scheme: PositivityScheme) -> (f64, bool) {
    let xp = x.max(0.0);
    let next = x + drift + vol * xp.sqrt() * dw;
    let neg = next < 0.0;
    match scheme {
        PositivityScheme::FullTruncation => (next, neg),
        PositivityScheme::Reflection => (next.abs(), neg),
    }
}

struct PathSpec<'a> {
    params: &'a ModelParams,
    cfg: &'a McConfig,
    dt: f64,
}

impl PathSpec<'_> {
    fn v_drift(&self, v: f64, r: f64) -> f64 {
        let p = self.params;
        match self.cfg.drift_mode {
            DriftMode::SdePaper => p.k * (p.zeta - v),
            DriftMode::PdeConsistent => r * v,
        }
    }

    fn r_drift(&self, r: f64) -> f64 {
        let p = self.params;
        match self.cfg.drift_mode {
            DriftMode::SdePaper => p.a * (p.b - r),
            DriftMode::PdeConsistent => p.alpha * (p.beta - r),
        }
    }

    /// Runs one path driven by `sign · z`, where `z` holds three standard
    /// normals per step. Returns (S_T, ∫R dt, negative-state count).
    fn run(&self, s0: f64, v0: f64, r0: f64, z: &[f64], sign: f64) -> (f64, f64, usize) {
        let p = self.params;
        let dt = self.dt;
        let sdt = dt.sqrt();
        let rho_c = (1.0 - p.rho * p.rho).max(0.0).sqrt();
        let (mut ln_s, mut v, mut r) = (s0.ln(), v0, r0);
        let mut integral = 0.0;
        let mut clamps = 0;
        for zs in z.chunks_exact(3) {
            let dw1 = sign * zs[0] * sdt;
            let dw2 = sign * (p.rho * zs[0] + rho_c * zs[1]) * sdt;
            let dw3 = sign * zs[2] * sdt;
            let vp = v.max(0.0);
            let rp = r.max(0.0);
            ln_s += (rp - 0.5 * vp) * dt + vp.sqrt() * dw1;
            let (v_next, nv) = sqrt_step(v, self.v_drift(vp, rp) * dt, p.sigma, dw2, self.cfg.scheme);
            let (r_next, nr) = sqrt_step(r, self.r_drift(rp) * dt, p.eta, dw3, self.cfg.scheme);
            integral += 0.5 * (rp + r_next.max(0.0)) * dt;
            clamps += nv as usize + nr as usize;
            v = v_next;
            r = r_next;
        }
        (ln_s.exp(), integral, clamps)
    }
}

/// Runs `n_samples` samples in fixed batches, one ChaCha stream per batch,
/// and reduces the batch accumulators in batch order so thread scheduling
/// cannot change the result. `sample` maps a normal buffer to (value,
/// clamps, updates).
fn run_batches<F>(n_samples: usize, z_len: usize, seed: u64, sample: F) -> McEstimate
where
    F: Fn(&[f64]) -> (f64, usize, usize) + Sync,
{
    let n_batches = n_samples.div_ceil(BATCH);
    let accs: Vec<Acc> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(n_samples - b * BATCH);
            let mut z = vec![0.0; z_len];
            let mut acc = Acc::default();
            for _ in 0..count {
                for x in z.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
                let (value, clamps, updates) = sample(&z);
                acc.push(value);
                acc.clamps += clamps;
                acc.updates += updates;
            }
            acc
        })
        .collect();
    accs.into_iter().fold(Acc::default(), Acc::merge).estimate()
}

/// Discounted call price `E[e^{−∫R} (S_T − E)⁺]`. With antithetics on,
/// `n_paths` is rounded up to an even count and the standard error is taken
/// over pair means.
pub fn simulate_price(
    params: &ModelParams,
    option: &OptionSpec,
    s0: f64,
    v0: f64,
    r0: f64,
    cfg: &McConfig,
) -> McEstimate {
    let n_steps = cfg.n_steps.max(1);
    let spec = PathSpec {
        params,
        cfg,
        dt: option.maturity / n_steps as f64,
    };
    let value = |z: &[f64], sign: f64| {
        let (s_t, int_r, clamps) = spec.run(s0, v0, r0, z, sign);
        ((-int_r).exp() * payoff(s_t, option), clamps)
    };
    let updates = 2 * n_steps;
    if cfg.antithetic {
        let pairs = cfg.n_paths.max(1).div_ceil(2);
        run_batches(pairs, 3 * n_steps, cfg.seed, |z| {
            let (a, ca) = value(z, 1.0);
            let (b, cb) = value(z, -1.0);
            (0.5 * (a + b), ca + cb, 2 * updates)
        })
    } else {
        run_batches(cfg.n_paths.max(1), 3 * n_steps, cfg.seed, |z| {
            let (a, ca) = value(z, 1.0);
            (a, ca, updates)
        })
    }
}

/// Zero-coupon bond `E[e^{−∫₀ᵀ R dt}]` along rate paths only. Uses the same
/// rate drift as [`simulate_price`] under `cfg.drift_mode`.
pub fn simulate_bond(params: &ModelParams, r0: f64, maturity: f64, cfg: &McConfig) -> McEstimate {
    if maturity <= 0.0 {
        return McEstimate {
            price: 1.0,
            std_error: 0.0,
            clamp_fraction: 0.0,
        };
    }
    let n_steps = cfg.n_steps.max(1);
    let spec = PathSpec {
        params,
        cfg,
        dt: maturity / n_steps as f64,
    };
    let path = |z: &[f64], sign: f64| {
        let mut r = r0;
        let mut integral = 0.0;
        let mut clamps = 0;
        let sdt = spec.dt.sqrt();
        for &zi in z {
            let rp = r.max(0.0);
            let (next, neg) = sqrt_step(r, spec.r_drift(rp) * spec.dt, params.eta, sign * zi * sdt, cfg.scheme);
            integral += 0.5 * (rp + next.max(0.0)) * spec.dt;
            clamps += neg as usize;
            r = next;
        }
        ((-integral).exp(), clamps)
    };
    if cfg.antithetic {
        let pairs = cfg.n_paths.max(1).div_ceil(2);
        run_batches(pairs, n_steps, cfg.seed, |z| {
            let (a, ca) = path(z, 1.0);
            let (b, cb) = path(z, -1.0);
            (0.5 * (a + b), ca + cb, 2 * n_steps)
        })
    } else {
        run_batches(cfg.n_paths.max(1), n_steps, cfg.seed, |z| {
            let (a, ca) = path(z, 1.0);
            (a, ca, n_steps)
        })
    }
}
