//! Acceptance gate. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Run with `--nocapture` to see the lines on success.

#[path = "../../core/tests/support/dense.rs"]
mod dense;

use std::path::Path;
use std::time::{Duration, Instant};

use hcir_cli::commands::max_relative_error;
use hcir_cli::config::{Anchor, Rung};
use hcir_cli::{cmd_converge, cmd_price, parse_config, RunConfig};
use hcir_core::adi::{solve, DouglasConfig, QueryPoint, SolveReport};
use hcir_core::bond::{bond_price, bond_price_crank_nicolson};
use hcir_core::costs::{eval_f1, eval_f2, eval_f3};
use hcir_core::explicit::solve_explicit;
use hcir_core::mc::{simulate_bond, simulate_price, DriftMode, McConfig};
use hcir_core::model::{payoff, CostParams, Grid3D, GridSpec, ModelParams, OptionSpec};
use hcir_core::operators::{build_op_r, build_op_s, build_op_v};
use ndarray::Array3;

const ANCHOR_BAND: f64 = 0.01;
const LADDER_FINEST_R020: f64 = 1e-3;
const LADDER_FINEST_R040: f64 = 3e-3;
const DENSE_TOL: f64 = 1e-12;
const BOND_CN_TOL: f64 = 1e-4;
const MC_REL_FLOOR: f64 = 0.005;
const EXPLICIT_REL: f64 = 0.01;
const COST_GRID_BUDGET: Duration = Duration::from_secs(30 * 60);

struct Gate {
    lines: Vec<(bool, String)>,
}

impl Gate {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        let line = format!("[{}] {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((pass, line));
    }
}

fn anchors(rate: f64) -> Vec<Anchor> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/anchors.txt");
    let cfg = parse_config(&std::fs::read_to_string(path).unwrap()).unwrap();
    cfg.anchors.into_iter().filter(|a| a.point.r == rate).collect()
}

fn six_points() -> Vec<QueryPoint> {
    [0.2, 0.4]
        .iter()
        .flat_map(|&r| [120.0, 350.0, 450.0].map(|s| QueryPoint::new(s, 0.2, r)))
        .collect()
}

fn fmt_prices(p: &[f64]) -> String {
    p.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(", ")
}

fn solve_on(m: usize, j: usize, k: usize, n: usize, costs: Option<&CostParams>, q: &[QueryPoint]) -> SolveReport {
    solve(
        &ModelParams::default(),
        &OptionSpec::default(),
        costs,
        GridSpec::for_strike(100.0, m, j, k, n),
        &DouglasConfig::default(),
        q,
    )
    .unwrap()
}

fn ladder_config(rate: f64, ladder: &[Rung]) -> RunConfig {
    RunConfig {
        anchors: anchors(rate),
        ladder: ladder.to_vec(),
        ..RunConfig::default()
    }
}

fn table2_ladder() -> Vec<Rung> {
    [(50, 5, 5, 5), (100, 10, 10, 10), (200, 20, 20, 10), (800, 40, 40, 15)]
        .iter()
        .map(|&(m, j, k, n)| Rung { m, j, k, n })
        .collect()
}

fn criterion_1(gate: &mut Gate) -> f64 {
    let a = anchors(0.2);
    let cfg = RunConfig::default();
    let t0 = Instant::now();
    let rows = cmd_price(&cfg).unwrap();
    let prices: Vec<f64> = rows.iter().map(|r| r.price).collect();
    let err = max_relative_error(&prices, &a);
    gate.record(
        "C1 anchors 200x20x20x10",
        err <= ANCHOR_BAND,
        format!(
            "prices [{}], max rel err {err:.3e} <= {ANCHOR_BAND} ({:.2?})",
            fmt_prices(&prices),
            t0.elapsed()
        ),
    );
    prices[0]
}

fn criterion_2(gate: &mut Gate) {
    let t0 = Instant::now();
    let rows = cmd_converge(&ladder_config(0.2, &table2_ladder())).unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| r.max_rel_err).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let finest = *errs.last().unwrap();
    gate.record(
        "C2 ladder R=0.2",
        decreasing && finest <= LADDER_FINEST_R020,
        format!(
            "errors [{}], strictly decreasing {decreasing}, finest {finest:.3e} <= {LADDER_FINEST_R020:e} ({:.2?})",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
            t0.elapsed()
        ),
    );
}

fn criterion_3(gate: &mut Gate, finest_prices_r040: &[f64], finest_label: &str) {
    let t0 = Instant::now();
    let a = anchors(0.4);
    let rows = cmd_converge(&ladder_config(0.4, &table2_ladder())).unwrap();
    let mut errs: Vec<f64> = rows.iter().map(|r| r.max_rel_err).collect();
    let finest = max_relative_error(finest_prices_r040, &a);
    errs.push(finest);
    gate.record(
        "C3 ladder R=0.4",
        finest <= LADDER_FINEST_R040,
        format!(
            "errors [{}], finest {finest_label} prices [{}], finest err {finest:.3e} <= {LADDER_FINEST_R040:e} ({:.2?} + shared solve)",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
            fmt_prices(finest_prices_r040),
            t0.elapsed()
        ),
    );
}

fn criterion_4(gate: &mut Gate, points: &[QueryPoint], zero: &[f64], with: &[f64], label: &str, wall: Duration) {
    let all_lower = zero.iter().zip(with).all(|(z, w)| w < z);
    // A call is worth between 0 and the spot. A blown-up field can sit below
    // the zero-cost price without being a price at all.
    let bounded = points
        .iter()
        .zip(with)
        .all(|(q, &w)| w.is_finite() && (0.0..=q.s).contains(&w));
    gate.record(
        "C4 cost ordering",
        all_lower && bounded && wall <= COST_GRID_BUDGET,
        format!(
            "grid {label}, zero-cost [{}], with-cost [{}], all lower {all_lower}, within [0, S] {bounded} (with-cost solve {wall:.2?})",
            fmt_prices(zero),
            fmt_prices(with)
        ),
    );
}

fn criterion_5(gate: &mut Gate) {
    let mut identical = true;
    for (m, j, k, n) in [(50, 5, 5, 5), (200, 20, 20, 10)] {
        let linear = solve_on(m, j, k, n, None, &[]);
        let nonlinear = solve_on(m, j, k, n, Some(&CostParams::uniform(0.0)), &[]);
        identical &= linear
            .field
            .values
            .iter()
            .zip(nonlinear.field.values.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
    }
    gate.record(
        "C5 zero-cost bit identity",
        identical,
        format!("linear vs nonlinear path with k = 0 on 50x5x5x5 and 200x20x20x10: identical {identical}"),
    );
}

fn criterion_6(gate: &mut Gate) {
    let t0 = Instant::now();
    let errs = [
        dense::step_mismatch(2.0 / 3.0, false),
        dense::step_mismatch(2.0 / 3.0, true),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    gate.record(
        "C6 dense Douglas oracle",
        worst <= DENSE_TOL,
        format!("4x4x4 grid, max |lib - dense| {worst:.3e} <= {DENSE_TOL:e} ({:.2?})", t0.elapsed()),
    );
}

fn criterion_7(gate: &mut Gate) {
    let p = ModelParams::default();
    let terminal_exact = (0..=20).all(|i| bond_price(i as f64 * 0.05, 1.0, 1.0, &p) == 1.0);
    let cn_err = (0..=20)
        .map(|i| {
            let r = i as f64 * 0.05;
            (bond_price_crank_nicolson(&p, r, 1.0, 2.0, 4000, 4000) - bond_price(r, 0.0, 1.0, &p)).abs()
        })
        .fold(0.0, f64::max);
    let cfg = McConfig {
        n_paths: 100_000,
        n_steps: 200,
        seed: 11,
        ..Default::default()
    };
    let est = simulate_bond(&p, 0.2, 1.0, &cfg);
    let closed = bond_price(0.2, 0.0, 1.0, &p);
    let mc_ok = (est.price - closed).abs() <= 3.0 * est.std_error;
    gate.record(
        "C7 bond",
        terminal_exact && cn_err <= BOND_CN_TOL && mc_ok,
        format!(
            "Z(R,T,T)=1 exact {terminal_exact}; CN 4000x4000 max err on [0,1] {cn_err:.3e} <= {BOND_CN_TOL:e}; \
             MC {:.6} vs {closed:.6}, |diff| {:.2e} <= 3 SE {:.2e}",
            est.price,
            (est.price - closed).abs(),
            3.0 * est.std_error
        ),
    );
}

fn criterion_8(gate: &mut Gate, adi_120: f64) {
    let p = ModelParams::default();
    let option = OptionSpec::default();
    let t0 = Instant::now();
    let cfg = McConfig {
        n_paths: 1_000_000,
        n_steps: 100,
        seed: 2024,
        drift_mode: DriftMode::PdeConsistent,
        ..Default::default()
    };
    let est = simulate_price(&p, &option, 120.0, 0.2, 0.2, &cfg);
    let tol = (MC_REL_FLOOR * adi_120).max(3.0 * est.std_error);
    let mc_ok = (est.price - adi_120).abs() <= tol;
    let mc_wall = t0.elapsed();

    // Explicit and ADI on the same 100x10x10 spatial grid.
    let t1 = Instant::now();
    let q = [QueryPoint::new(120.0, 0.2, 0.2)];
    let spec = GridSpec::for_strike(100.0, 100, 10, 10, 10);
    let expl = solve_explicit(&p, &option, None, spec, None, false, &q).unwrap();
    let adi = solve_on(100, 10, 10, 10, None, &q);
    let (e, a) = (expl.prices[0].price, adi.prices[0].price);
    let rel = ((e - a) / a).abs();
    gate.record(
        "C8 cross-scheme",
        mc_ok && rel <= EXPLICIT_REL,
        format!(
            "MC {:.5} +- {:.5} vs ADI {adi_120:.5}, |diff| {:.4} <= {tol:.4} ({mc_wall:.2?}); \
             explicit {e:.5} ({} steps) vs ADI {a:.5} on 100x10x10, rel {rel:.3e} <= {EXPLICIT_REL} ({:.2?})",
            est.price,
            est.std_error,
            (est.price - adi_120).abs(),
            expl.steps.len(),
            t1.elapsed()
        ),
    );
}

fn criterion_9(gate: &mut Gate) {
    let mut notes = Vec::new();
    let p = ModelParams::default();
    let g = Grid3D::new(GridSpec::for_strike(100.0, 10, 8, 8, 4), 1.0);

    // Directional operators on a quadratic.
    let (c0, c1, c2) = (0.3, -1.7, 2.2);
    let field = Array3::from_shape_fn(g.shape(), |(i, j, k)| {
        let (s, v, r) = (g.s[i], g.v[j], g.r[k]);
        c0 * s * s + c1 * v * v + c2 * r * r
    });
    let ops = [build_op_s(&g, &p), build_op_v(&g, &p), build_op_r(&g, &p)];
    let outs: Vec<_> = ops.iter().map(|o| o.apply(&field)).collect();
    let mut worst: f64 = 0.0;
    for i in 1..g.spec.m {
        for j in 1..g.spec.j {
            for k in 1..g.spec.k {
                let (s, v, r) = (g.s[i], g.v[j], g.r[k]);
                let c = field[[i, j, k]];
                let want = [
                    v * s * s * c0 + r * s * 2.0 * c0 * s - r / 3.0 * c,
                    p.sigma * p.sigma * v * c1 + r * v * 2.0 * c1 * v - r / 3.0 * c,
                    p.eta * p.eta * r * c2 + p.alpha * (p.beta - r) * 2.0 * c2 * r - r / 3.0 * c,
                ];
                for (o, w) in outs.iter().zip(want) {
                    worst = worst.max((o[[i, j, k]] - w).abs() / (1.0 + w.abs()));
                }
            }
        }
    }
    let exact = worst < 1e-12;
    notes.push(format!("quadratic exactness {worst:.1e}"));

    // Payoff dominance and S-monotonicity of the zero-cost solve.
    let report = solve_on(200, 20, 20, 10, None, &[]);
    let (rg, c) = (&report.grid, &report.field.values);
    let option = OptionSpec::default();
    let mut dominance = true;
    let mut monotone = true;
    for i in 0..=rg.spec.m {
        for j in 0..=rg.spec.j {
            for k in 0..=rg.spec.k {
                let interior = i > 0 && i < rg.spec.m && j > 0 && j < rg.spec.j;
                if interior && c[[i, j, k]] < payoff(rg.s[i], &option) - 0.5 {
                    dominance = false;
                }
                if i > 0 && c[[i, j, k]] < c[[i - 1, j, k]] {
                    monotone = false;
                }
            }
        }
    }
    notes.push(format!("payoff dominance {dominance}, S-monotone {monotone}"));

    // Cost components: nonnegative and F(cC) = |c| F(C) away from S_max.
    let costs = CostParams::uniform(0.02);
    let smooth = Array3::from_shape_fn(g.shape(), |(i, j, k)| {
        let (s, v, r) = (g.s[i], g.v[j], g.r[k]);
        (s - 100.0).max(0.0) + 0.3 * s * v + (2.0 * v).sin() * s + r * r * s
    });
    let mut nonneg = true;
    let mut homogeneous = true;
    for scale in [-2.5, 0.5, 3.0] {
        let scaled = smooth.mapv(|x| x * scale);
        let pairs = [
            (eval_f1(&smooth, &g, &p, &costs), eval_f1(&scaled, &g, &p, &costs)),
            (eval_f2(&smooth, &g, &p, &costs), eval_f2(&scaled, &g, &p, &costs)),
            (
                eval_f3(&smooth, &g, &p, &costs, 0.5).unwrap(),
                eval_f3(&scaled, &g, &p, &costs, 0.5).unwrap(),
            ),
        ];
        for (base, sc) in &pairs {
            for (((i, _, _), &x), &y) in base.indexed_iter().zip(sc.iter()) {
                nonneg &= x >= 0.0 && y >= 0.0;
                if i < g.spec.m {
                    homogeneous &= (y - f64::abs(scale) * x).abs() <= 1e-10 * (1.0 + y.abs());
                }
            }
        }
    }
    notes.push(format!("F nonnegative {nonneg}, homogeneous {homogeneous}"));

    // Fixed-seed determinism.
    let cfg = McConfig {
        n_paths: 20_000,
        n_steps: 20,
        seed: 5,
        ..Default::default()
    };
    let a = simulate_price(&p, &option, 120.0, 0.2, 0.2, &cfg);
    let b = simulate_price(&p, &option, 120.0, 0.2, 0.2, &cfg);
    let deterministic = a.price.to_bits() == b.price.to_bits() && a.std_error.to_bits() == b.std_error.to_bits();
    notes.push(format!("seed determinism {deterministic}"));

    gate.record(
        "C9 properties",
        exact && dominance && monotone && nonneg && homogeneous && deterministic,
        notes.join("; "),
    );
}

#[test]
fn acceptance() {
    let mut gate = Gate { lines: Vec::new() };
    let adi_120 = criterion_1(&mut gate);
    criterion_2(&mut gate);

    // The finest grid is shared by the R = 0.4 ladder and the cost ordering.
    let (m, j, k, n) = (1200, 80, 80, 30);
    let label = format!("{m}x{j}x{k}x{n}");
    let q = six_points();
    let zero = solve_on(m, j, k, n, None, &q);
    let zero_prices: Vec<f64> = zero.prices.iter().map(|p| p.price).collect();
    println!("zero-cost {label} solve took {:.2?}", zero.wall);
    drop(zero);
    criterion_3(&mut gate, &zero_prices[3..], &label);

    let with = solve_on(m, j, k, n, Some(&CostParams::uniform(0.02)), &q);
    let with_prices: Vec<f64> = with.prices.iter().map(|p| p.price).collect();
    let wall = with.wall;
    drop(with);
    criterion_4(&mut gate, &q, &zero_prices, &with_prices, &label, wall);

    criterion_5(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate);
    criterion_8(&mut gate, adi_120);
    criterion_9(&mut gate);

    println!("---- acceptance summary ----");
    for (_, line) in &gate.lines {
        println!("{line}");
    }
    let failed: Vec<&String> = gate.lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    assert!(failed.is_empty(), "{} criteria failed:\n{}", failed.len(), failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"));
}
