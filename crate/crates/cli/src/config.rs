//! Run configuration: `key = value` lines grouped under `[section]` headers,
//! `#` starts a comment. Every key is optional.
//!
//! ```text
//! [model]    sigma eta rho alpha beta a b k zeta lambda
//! [option]   strike maturity
//! [costs]    k0 k1 k2 delta_t          (section presence enables costs)
//! [grid]     s_max v_max r_max m j k n
//! [solver]   kind theta1 clamp_negative explicit_steps
//! [mc]       paths steps seed scheme drift antithetic
//! [queries]  point = S, V, R           (repeatable)
//! [output]   path timing
//! [anchors]  point = S, V, R, price    (repeatable), file, rate
//! [ladder]   rung = M, J, K, N         (repeatable)
//! [surface]  r v payoff
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hcir_core::adi::{DouglasConfig, QueryPoint};
use hcir_core::mc::{DriftMode, McConfig, PositivityScheme};
use hcir_core::model::{CostParams, GridSpec, ModelParams, OptionSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Adi,
    Explicit,
    Mc,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Adi => "adi",
            SolverKind::Explicit => "explicit",
            SolverKind::Mc => "mc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adi" => Some(SolverKind::Adi),
            "explicit" => Some(SolverKind::Explicit),
            "mc" => Some(SolverKind::Mc),
            _ => None,
        }
    }
}

/// Reference price at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub point: QueryPoint,
    pub price: f64,
}

/// Grid resolution of one convergence-ladder rung.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rung {
    pub m: usize,
    pub j: usize,
    pub k: usize,
    pub n: usize,
}

impl Rung {
    pub fn label(&self) -> String {
        format!("{}x{}x{}x{}", self.m, self.j, self.k, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSpec {
    pub r: f64,
    /// Fix V too and emit a curve in S.
    pub v: Option<f64>,
    pub payoff: bool,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        SurfaceSpec {
            r: 0.2,
            v: None,
            payoff: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    /// Emit wall-clock columns; turn off for byte-stable output.
    pub timing: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { path: None, timing: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub option: OptionSpec,
    pub costs: Option<CostParams>,
    pub grid: GridSpec,
    pub solver: SolverKind,
    pub douglas: DouglasConfig,
    /// Explicit-scheme step count; `None` picks a stable one.
    pub explicit_steps: Option<usize>,
    pub mc: McConfig,
    pub queries: Vec<QueryPoint>,
    pub output: OutputSpec,
    pub anchors: Vec<Anchor>,
    /// Keep only anchors at this rate (applied when anchors are loaded).
    pub anchor_rate: Option<f64>,
    pub anchor_file: Option<PathBuf>,
    pub ladder: Vec<Rung>,
    pub surface: SurfaceSpec,
}

pub fn default_queries() -> Vec<QueryPoint> {
    [120.0, 350.0, 450.0].iter().map(|&s| QueryPoint::new(s, 0.2, 0.2)).collect()
}

pub fn default_ladder() -> Vec<Rung> {
    [(50, 5, 5, 5), (100, 10, 10, 10), (200, 20, 20, 10), (800, 40, 40, 15)]
        .iter()
        .map(|&(m, j, k, n)| Rung { m, j, k, n })
        .collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        let option = OptionSpec::default();
        RunConfig {
            model: ModelParams::default(),
            option,
            costs: None,
            grid: GridSpec::for_strike(option.strike, 200, 20, 20, 10),
            solver: SolverKind::Adi,
            douglas: DouglasConfig::default(),
            explicit_steps: None,
            mc: McConfig::default(),
            queries: default_queries(),
            output: OutputSpec::default(),
            anchors: Vec::new(),
            anchor_rate: None,
            anchor_file: None,
            ladder: default_ladder(),
            surface: SurfaceSpec::default(),
        }
    }
}

impl RunConfig {
    /// Grid for one ladder rung, keeping the configured domain bounds.
    pub fn rung_grid(&self, rung: &Rung) -> GridSpec {
        GridSpec {
            m: rung.m,
            j: rung.j,
            k: rung.k,
            n: rung.n,
            ..self.grid
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.option.strike > 0.0 && self.option.strike.is_finite()) {
            return Err(CliError::validation("strike", format!("must be > 0 (got {})", self.option.strike)));
        }
        // Zero maturity is allowed here; the price command answers with the payoff.
        if !(self.option.maturity >= 0.0 && self.option.maturity.is_finite()) {
            return Err(CliError::validation(
                "maturity",
                format!("must be >= 0 (got {})", self.option.maturity),
            ));
        }
        if let Some(c) = self.costs {
            c.validate()?;
        }
        self.grid.validate()?;
        self.douglas.validate()?;
        self.mc.validate()?;
        if self.explicit_steps == Some(0) {
            return Err(CliError::validation("explicit_steps", "must be >= 1"));
        }
        for q in &self.queries {
            let inside = (0.0..=self.grid.s_max).contains(&q.s)
                && (0.0..=self.grid.v_max).contains(&q.v)
                && (0.0..=self.grid.r_max).contains(&q.r);
            if !inside {
                return Err(CliError::validation(
                    "queries",
                    format!("point ({}, {}, {}) lies outside the grid domain", q.s, q.v, q.r),
                ));
            }
        }
        for r in &self.ladder {
            self.rung_grid(r).validate()?;
        }
        if self.anchors.iter().any(|a| !(a.price > 0.0 && a.price.is_finite())) {
            return Err(CliError::validation("anchors", "prices must be positive"));
        }
        Ok(())
    }
}

/// Section/key/value triples with line numbers.
fn lex(text: &str) -> Result<Vec<(usize, String, String, String)>> {
    let mut out = Vec::new();
    let mut section = String::new();
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| CliError::Parse {
                line: line_no,
                message: format!("unterminated section header `{line}`"),
            })?;
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        if section.is_empty() {
            return Err(CliError::Parse {
                line: line_no,
                message: format!("`{}` appears before any [section]", key.trim()),
            });
        }
        out.push((line_no, section.clone(), key.trim().to_ascii_lowercase(), value.trim().to_string()));
    }
    Ok(out)
}

fn num(line: usize, key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| CliError::Parse {
        line,
        message: format!("{key}: `{value}` is not a number"),
    })
}

fn count(line: usize, key: &str, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| CliError::Parse {
        line,
        message: format!("{key}: `{value}` is not a non-negative integer"),
    })
}

fn flag(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Parse {
            line,
            message: format!("{key}: `{value}` is not a boolean"),
        }),
    }
}

fn tuple(line: usize, key: &str, value: &str, len: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != len {
        return Err(CliError::Parse {
            line,
            message: format!("{key}: expected {len} comma-separated values, got {}", parts.len()),
        });
    }
    parts.iter().map(|p| num(line, key, p)).collect()
}

/// Parses and validates a config. `anchors.file` is recorded but not read;
/// [`load_config`] resolves it.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg = parse_unvalidated(text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_unvalidated(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut grid: [Option<f64>; 3] = [None; 3];
    let mut counts: [Option<usize>; 4] = [None; 4];
    let mut queries = Vec::new();
    let mut ladder = Vec::new();
    for (line, section, key, value) in lex(text)? {
        let v = value.as_str();
        let unknown = || CliError::Parse {
            line,
            message: format!("unknown key `{key}` in [{section}]"),
        };
        match section.as_str() {
            "model" => {
                let x = num(line, &key, v)?;
                let m = &mut cfg.model;
                match key.as_str() {
                    "sigma" => m.sigma = x,
                    "eta" => m.eta = x,
                    "rho" => m.rho = x,
                    "alpha" => m.alpha = x,
                    "beta" => m.beta = x,
                    "a" => m.a = x,
                    "b" => m.b = x,
                    "k" => m.k = x,
                    "zeta" => m.zeta = x,
                    "lambda" => m.lambda = x,
                    _ => return Err(unknown()),
                }
            }
            "option" => match key.as_str() {
                "strike" => cfg.option.strike = num(line, &key, v)?,
                "maturity" => cfg.option.maturity = num(line, &key, v)?,
                _ => return Err(unknown()),
            },
            "costs" => {
                let c = cfg.costs.get_or_insert_with(CostParams::default);
                match key.as_str() {
                    "k0" => c.k0 = num(line, &key, v)?,
                    "k1" => c.k1 = num(line, &key, v)?,
                    "k2" => c.k2 = num(line, &key, v)?,
                    "rate" => {
                        let x = num(line, &key, v)?;
                        (c.k0, c.k1, c.k2) = (x, x, x);
                    }
                    "delta_t" => c.delta_t = Some(num(line, &key, v)?),
                    _ => return Err(unknown()),
                }
            }
            "grid" => match key.as_str() {
                "s_max" => grid[0] = Some(num(line, &key, v)?),
                "v_max" => grid[1] = Some(num(line, &key, v)?),
                "r_max" => grid[2] = Some(num(line, &key, v)?),
                "m" => counts[0] = Some(count(line, &key, v)?),
                "j" => counts[1] = Some(count(line, &key, v)?),
                "k" => counts[2] = Some(count(line, &key, v)?),
                "n" => counts[3] = Some(count(line, &key, v)?),
                _ => return Err(unknown()),
            },
            "solver" => match key.as_str() {
                "kind" => {
                    cfg.solver = SolverKind::parse(v).ok_or_else(|| CliError::Parse {
                        line,
                        message: format!("solver kind `{v}` is not one of adi, explicit, mc"),
                    })?
                }
                "theta1" => cfg.douglas.theta1 = num(line, &key, v)?,
                "clamp_negative" => cfg.douglas.clamp_negative = flag(line, &key, v)?,
                "explicit_steps" => cfg.explicit_steps = Some(count(line, &key, v)?),
                _ => return Err(unknown()),
            },
            "mc" => match key.as_str() {
                "paths" => cfg.mc.n_paths = count(line, &key, v)?,
                "steps" => cfg.mc.n_steps = count(line, &key, v)?,
                "seed" => {
                    cfg.mc.seed = v.parse().map_err(|_| CliError::Parse {
                        line,
                        message: format!("seed: `{v}` is not an unsigned integer"),
                    })?
                }
                "scheme" => {
                    cfg.mc.scheme = match v {
                        "full_truncation" => PositivityScheme::FullTruncation,
                        "reflection" => PositivityScheme::Reflection,
                        _ => {
                            return Err(CliError::Parse {
                                line,
                                message: format!("scheme `{v}` is not full_truncation or reflection"),
                            })
                        }
                    }
                }
                "drift" => {
                    cfg.mc.drift_mode = match v {
                        "pde_consistent" => DriftMode::PdeConsistent,
                        "sde_paper" => DriftMode::SdePaper,
                        _ => {
                            return Err(CliError::Parse {
                                line,
                                message: format!("drift `{v}` is not pde_consistent or sde_paper"),
                            })
                        }
                    }
                }
                "antithetic" => cfg.mc.antithetic = flag(line, &key, v)?,
                _ => return Err(unknown()),
            },
            "queries" => match key.as_str() {
                "point" => {
                    let t = tuple(line, &key, v, 3)?;
                    queries.push(QueryPoint::new(t[0], t[1], t[2]));
                }
                _ => return Err(unknown()),
            },
            "output" => match key.as_str() {
                "path" => cfg.output.path = Some(PathBuf::from(v)),
                "timing" => cfg.output.timing = flag(line, &key, v)?,
                _ => return Err(unknown()),
            },
            "anchors" => match key.as_str() {
                "point" => {
                    let t = tuple(line, &key, v, 4)?;
                    cfg.anchors.push(Anchor {
                        point: QueryPoint::new(t[0], t[1], t[2]),
                        price: t[3],
                    });
                }
                "file" => cfg.anchor_file = Some(PathBuf::from(v)),
                "rate" => cfg.anchor_rate = Some(num(line, &key, v)?),
                _ => return Err(unknown()),
            },
            "ladder" => match key.as_str() {
                "rung" => {
                    let parts: Vec<usize> = v
                        .split(',')
                        .map(|p| count(line, &key, p.trim()))
                        .collect::<Result<_>>()?;
                    if parts.len() != 4 {
                        return Err(CliError::Parse {
                            line,
                            message: "rung: expected M, J, K, N".into(),
                        });
                    }
                    ladder.push(Rung {
                        m: parts[0],
                        j: parts[1],
                        k: parts[2],
                        n: parts[3],
                    });
                }
                _ => return Err(unknown()),
            },
            "surface" => match key.as_str() {
                "r" => cfg.surface.r = num(line, &key, v)?,
                "v" => cfg.surface.v = Some(num(line, &key, v)?),
                "payoff" => cfg.surface.payoff = flag(line, &key, v)?,
                _ => return Err(unknown()),
            },
            _ => {
                return Err(CliError::Parse {
                    line,
                    message: format!("unknown section [{section}]"),
                })
            }
        }
    }
    let base = GridSpec::for_strike(cfg.option.strike, 200, 20, 20, 10);
    cfg.grid = GridSpec {
        s_max: grid[0].unwrap_or(base.s_max),
        v_max: grid[1].unwrap_or(base.v_max),
        r_max: grid[2].unwrap_or(base.r_max),
        m: counts[0].unwrap_or(base.m),
        j: counts[1].unwrap_or(base.j),
        k: counts[2].unwrap_or(base.k),
        n: counts[3].unwrap_or(base.n),
    };
    if !queries.is_empty() {
        cfg.queries = queries;
    }
    if !ladder.is_empty() {
        cfg.ladder = ladder;
    }
    if let Some(rate) = cfg.anchor_rate {
        cfg.anchors.retain(|a| a.point.r == rate);
    }
    Ok(cfg)
}

/// Reads a config file and resolves `anchors.file` relative to it. Anchors
/// from the file come after any listed inline.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_unvalidated(&text)?;
    if let Some(file) = cfg.anchor_file.take() {
        let file = match path.parent() {
            Some(dir) if file.is_relative() => dir.join(file),
            _ => file,
        };
        let extra = parse_unvalidated(&std::fs::read_to_string(&file)?)?;
        cfg.anchors.extend(extra.anchors);
        if let Some(rate) = cfg.anchor_rate {
            cfg.anchors.retain(|a| a.point.r == rate);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Renders `cfg` back to config text; `parse_config(serialize(c)) == c`
/// for configs with resolved anchors.
pub fn serialize(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let m = &cfg.model;
    let _ = writeln!(s, "[model]");
    for (k, v) in [
        ("sigma", m.sigma),
        ("eta", m.eta),
        ("rho", m.rho),
        ("alpha", m.alpha),
        ("beta", m.beta),
        ("a", m.a),
        ("b", m.b),
        ("k", m.k),
        ("zeta", m.zeta),
        ("lambda", m.lambda),
    ] {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "\n[option]\nstrike = {}\nmaturity = {}", cfg.option.strike, cfg.option.maturity);
    if let Some(c) = &cfg.costs {
        let _ = writeln!(s, "\n[costs]\nk0 = {}\nk1 = {}\nk2 = {}", c.k0, c.k1, c.k2);
        if let Some(dt) = c.delta_t {
            let _ = writeln!(s, "delta_t = {dt}");
        }
    }
    let g = &cfg.grid;
    let _ = writeln!(
        s,
        "\n[grid]\ns_max = {}\nv_max = {}\nr_max = {}\nm = {}\nj = {}\nk = {}\nn = {}",
        g.s_max, g.v_max, g.r_max, g.m, g.j, g.k, g.n
    );
    let _ = writeln!(
        s,
        "\n[solver]\nkind = {}\ntheta1 = {}\nclamp_negative = {}",
        cfg.solver.name(),
        cfg.douglas.theta1,
        cfg.douglas.clamp_negative
    );
    if let Some(n) = cfg.explicit_steps {
        let _ = writeln!(s, "explicit_steps = {n}");
    }
    let mc = &cfg.mc;
    let _ = writeln!(
        s,
        "\n[mc]\npaths = {}\nsteps = {}\nseed = {}\nscheme = {}\ndrift = {}\nantithetic = {}",
        mc.n_paths,
        mc.n_steps,
        mc.seed,
        match mc.scheme {
            PositivityScheme::FullTruncation => "full_truncation",
            PositivityScheme::Reflection => "reflection",
        },
        match mc.drift_mode {
            DriftMode::PdeConsistent => "pde_consistent",
            DriftMode::SdePaper => "sde_paper",
        },
        mc.antithetic
    );
    let _ = writeln!(s, "\n[queries]");
    for q in &cfg.queries {
        let _ = writeln!(s, "point = {}, {}, {}", q.s, q.v, q.r);
    }
    let _ = writeln!(s, "\n[output]\ntiming = {}", cfg.output.timing);
    if let Some(p) = &cfg.output.path {
        let _ = writeln!(s, "path = {}", p.display());
    }
    if !cfg.anchors.is_empty() || cfg.anchor_rate.is_some() {
        let _ = writeln!(s, "\n[anchors]");
        for a in &cfg.anchors {
            let _ = writeln!(s, "point = {}, {}, {}, {}", a.point.s, a.point.v, a.point.r, a.price);
        }
        if let Some(r) = cfg.anchor_rate {
            let _ = writeln!(s, "rate = {r}");
        }
    }
    let _ = writeln!(s, "\n[ladder]");
    for r in &cfg.ladder {
        let _ = writeln!(s, "rung = {}, {}, {}, {}", r.m, r.j, r.k, r.n);
    }
    let _ = writeln!(s, "\n[surface]\nr = {}\npayoff = {}", cfg.surface.r, cfg.surface.payoff);
    if let Some(v) = cfg.surface.v {
        let _ = writeln!(s, "v = {v}");
    }
    s
}
