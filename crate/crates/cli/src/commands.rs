//! The four experiment commands. Each returns typed rows plus a [`Table`]
//! rendering with a fixed header.

use std::io::Write;
use std::time::Instant;

use hcir_core::adi::{solve, QueryPoint, SolveReport};
use hcir_core::explicit::solve_explicit;
use hcir_core::mc::simulate_price;
use hcir_core::model::{payoff, sample_field, CostParams, GridSpec};

use crate::config::{Anchor, Rung, RunConfig, SolverKind};
use crate::error::{CliError, Result};

/// Header plus string rows, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Shortest round-trip decimal form, so no digits are lost.
fn fmt(x: f64) -> String {
    format!("{x}")
}

fn run_grid(cfg: &RunConfig, spec: GridSpec, costs: Option<&CostParams>, queries: &[QueryPoint]) -> Result<SolveReport> {
    let report = match cfg.solver {
        SolverKind::Adi => solve(&cfg.model, &cfg.option, costs, spec, &cfg.douglas, queries)?,
        SolverKind::Explicit => solve_explicit(
            &cfg.model,
            &cfg.option,
            costs,
            spec,
            cfg.explicit_steps,
            cfg.douglas.clamp_negative,
            queries,
        )?,
        SolverKind::Mc => {
            return Err(CliError::validation("solver", "this command needs a grid solver (adi or explicit)"));
        }
    };
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRow {
    pub point: QueryPoint,
    pub price: f64,
    pub std_error: Option<f64>,
    pub solver: SolverKind,
    pub wall_ms: f64,
}

/// One row per query point with the configured solver. At zero maturity the
/// rows are the payoff.
pub fn cmd_price(cfg: &RunConfig) -> Result<Vec<PriceRow>> {
    if cfg.option.maturity == 0.0 {
        return Ok(cfg
            .queries
            .iter()
            .map(|&point| PriceRow {
                point,
                price: payoff(point.s, &cfg.option),
                std_error: None,
                solver: cfg.solver,
                wall_ms: 0.0,
            })
            .collect());
    }
    match cfg.solver {
        SolverKind::Adi | SolverKind::Explicit => {
            let report = run_grid(cfg, cfg.grid, cfg.costs.as_ref(), &cfg.queries)?;
            let wall_ms = report.wall.as_secs_f64() * 1e3;
            Ok(report
                .prices
                .iter()
                .map(|q| PriceRow {
                    point: q.point,
                    price: q.price,
                    std_error: None,
                    solver: cfg.solver,
                    wall_ms,
                })
                .collect())
        }
        SolverKind::Mc => {
            if cfg.costs.is_some_and(|c| !c.is_zero()) {
                return Err(CliError::validation("costs", "the mc solver prices the zero-cost equation only"));
            }
            Ok(cfg
                .queries
                .iter()
                .map(|&point| {
                    let t0 = Instant::now();
                    let est = simulate_price(&cfg.model, &cfg.option, point.s, point.v, point.r, &cfg.mc);
                    PriceRow {
                        point,
                        price: est.price,
                        std_error: Some(est.std_error),
                        solver: SolverKind::Mc,
                        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                    }
                })
                .collect())
        }
    }
}

/// `S,V,R,price,solver,wall_ms`. With timing off the last column is empty.
pub fn price_table(rows: &[PriceRow], timing: bool) -> Table {
    Table {
        header: ["S", "V", "R", "price", "solver", "wall_ms"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    fmt(r.point.s),
                    fmt(r.point.v),
                    fmt(r.point.r),
                    fmt(r.price),
                    r.solver.name().to_string(),
                    if timing { format!("{:.3}", r.wall_ms) } else { String::new() },
                ]
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeRow {
    pub rung: Rung,
    pub prices: Vec<f64>,
    pub max_rel_err: f64,
}

/// Max of `|price − anchor| / anchor` over the anchors.
pub fn max_relative_error(prices: &[f64], anchors: &[Anchor]) -> f64 {
    prices
        .iter()
        .zip(anchors)
        .map(|(p, a)| ((p - a.price) / a.price).abs())
        .fold(0.0, f64::max)
}

/// One solve per ladder rung, priced at the anchor points.
pub fn cmd_converge(cfg: &RunConfig) -> Result<Vec<ConvergeRow>> {
    if cfg.anchors.is_empty() {
        return Err(CliError::validation("anchors", "converge needs at least one anchor"));
    }
    let points: Vec<QueryPoint> = cfg.anchors.iter().map(|a| a.point).collect();
    cfg.ladder
        .iter()
        .map(|rung| {
            let report = run_grid(cfg, cfg.rung_grid(rung), cfg.costs.as_ref(), &points)?;
            let prices: Vec<f64> = report.prices.iter().map(|q| q.price).collect();
            Ok(ConvergeRow {
                rung: *rung,
                max_rel_err: max_relative_error(&prices, &cfg.anchors),
                prices,
            })
        })
        .collect()
}

/// `grid,price@S=…,…,max_rel_err`. Columns name only S when all anchors
/// share V and R.
pub fn converge_table(rows: &[ConvergeRow], anchors: &[Anchor]) -> Table {
    let shared = anchors
        .windows(2)
        .all(|w| w[0].point.v == w[1].point.v && w[0].point.r == w[1].point.r);
    let mut header = vec!["grid".to_string()];
    header.extend(anchors.iter().map(|a| {
        if shared {
            format!("price@S={}", a.point.s)
        } else {
            format!("price@S={};V={};R={}", a.point.s, a.point.v, a.point.r)
        }
    }));
    header.push("max_rel_err".into());
    Table {
        header,
        rows: rows
            .iter()
            .map(|r| {
                let mut row = vec![r.rung.label()];
                row.extend(r.prices.iter().map(|&p| fmt(p)));
                row.push(format!("{:e}", r.max_rel_err));
                row
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub point: QueryPoint,
    pub zero_cost: f64,
    pub with_cost: f64,
}

impl CompareRow {
    pub fn delta(&self) -> f64 {
        self.with_cost - self.zero_cost
    }
}

/// Zero-cost (linear path) against with-cost prices on the configured grid.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<CompareRow>> {
    let costs = cfg
        .costs
        .ok_or_else(|| CliError::validation("costs", "compare needs a [costs] section"))?;
    let zero = run_grid(cfg, cfg.grid, None, &cfg.queries)?;
    let with = run_grid(cfg, cfg.grid, Some(&costs), &cfg.queries)?;
    Ok(zero
        .prices
        .iter()
        .zip(&with.prices)
        .map(|(z, w)| CompareRow {
            point: z.point,
            zero_cost: z.price,
            with_cost: w.price,
        })
        .collect())
}

/// `S,V,R,zero_cost,with_cost,delta,sign` with sign in `{-, 0, +}`.
pub fn compare_table(rows: &[CompareRow]) -> Table {
    Table {
        header: ["S", "V", "R", "zero_cost", "with_cost", "delta", "sign"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                let d = r.delta();
                let sign = if d < 0.0 {
                    "-"
                } else if d > 0.0 {
                    "+"
                } else {
                    "0"
                };
                vec![
                    fmt(r.point.s),
                    fmt(r.point.v),
                    fmt(r.point.r),
                    fmt(r.zero_cost),
                    fmt(r.with_cost),
                    fmt(d),
                    sign.to_string(),
                ]
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRow {
    pub s: f64,
    /// `None` on a curve (V fixed).
    pub v: Option<f64>,
    pub price: f64,
    pub payoff: f64,
}

/// Slices the final field at `R = surface.r` (and `V = surface.v` when set),
/// in grid order: S outer, V inner.
pub fn cmd_surface(cfg: &RunConfig) -> Result<Vec<SurfaceRow>> {
    let report = run_grid(cfg, cfg.grid, cfg.costs.as_ref(), &[])?;
    let g = &report.grid;
    let sf = cfg.surface;
    let vs: Vec<Option<f64>> = match sf.v {
        Some(v) => vec![Some(v)],
        None => g.v.iter().map(|&v| Some(v)).collect(),
    };
    let mut rows = Vec::with_capacity(g.s.len() * vs.len());
    for &s in &g.s {
        for &v in &vs {
            let v = v.expect("filled above");
            rows.push(SurfaceRow {
                s,
                v: if sf.v.is_some() { None } else { Some(v) },
                price: sample_field(&report.field.values, g, s, v, sf.r)?,
                payoff: payoff(s, &cfg.option),
            });
        }
    }
    Ok(rows)
}

/// `S,V,price[,payoff]` for a surface, `S,price[,payoff]` for a curve.
pub fn surface_table(rows: &[SurfaceRow], with_payoff: bool) -> Table {
    let curve = rows.first().is_some_and(|r| r.v.is_none());
    let mut header = vec!["S".to_string()];
    if !curve {
        header.push("V".into());
    }
    header.push("price".into());
    if with_payoff {
        header.push("payoff".into());
    }
    Table {
        header,
        rows: rows
            .iter()
            .map(|r| {
                let mut row = vec![fmt(r.s)];
                if let Some(v) = r.v {
                    row.push(fmt(v));
                }
                row.push(fmt(r.price));
                if with_payoff {
                    row.push(fmt(r.payoff));
                }
                row
            })
            .collect(),
    }
}
