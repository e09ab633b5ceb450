//! Run configuration: a small sectioned key=value format.
//!
//! Four sections — [grid], [time], [family], [experiment] — with '#'
//! comments and scientific-notation reals. Parsing is two-phase: read all
//! lines, locate the scenario, start from that scenario's defaults, then
//! apply every key with line-precise errors. Emission uses a fixed key
//! order and shortest round-trip float formatting so emit-then-parse is
//! the identity.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::model::MuRule;
use crate::scenarios;

/// Which experiment(s) a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    EnergyAudit,
    Gronwall,
    Absorbing,
    Conditions,
    Attractor,
    Robustness,
    FiniteTime,
    Noncommutation,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::EnergyAudit,
        ExperimentKind::Gronwall,
        ExperimentKind::Absorbing,
        ExperimentKind::Conditions,
        ExperimentKind::Attractor,
        ExperimentKind::Robustness,
        ExperimentKind::FiniteTime,
        ExperimentKind::Noncommutation,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::EnergyAudit => "energy-audit",
            ExperimentKind::Gronwall => "gronwall",
            ExperimentKind::Absorbing => "absorbing",
            ExperimentKind::Conditions => "conditions",
            ExperimentKind::Attractor => "attractor",
            ExperimentKind::Robustness => "robustness",
            ExperimentKind::FiniteTime => "finite-time",
            ExperimentKind::Noncommutation => "noncommutation",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }
}

/// Everything a run needs. Optional fields fall back to the scenario's
/// built-in defaults when absent.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid_length: f64,
    pub grid_n: usize,
    pub dt: f64,
    pub blow_up_ceiling: f64,
    pub max_retries: usize,
    pub scenario: String,
    /// Depth of the default halving schedule; ignored when `eta_schedule`
    /// is given explicitly.
    pub eta_levels: usize,
    pub eta_schedule: Option<Vec<f64>>,
    pub mu: Option<MuRule>,
    pub mu_zero: Option<f64>,
    pub experiments: Vec<ExperimentKind>,
    /// The time at which sections/clouds are evaluated.
    pub t_target: f64,
    pub cloud_size: usize,
    pub n_modes: usize,
    pub max_pullbacks: usize,
    pub seed: u64,
    pub tol_conditions: f64,
    pub tol_stabilization: f64,
    pub accept_factor: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// The effective eta schedule: the explicit list if given, otherwise
    /// halving to the configured depth.
    pub fn schedule(&self) -> Vec<f64> {
        match &self.eta_schedule {
            Some(s) => s.clone(),
            None => scenarios::halving_schedule(self.eta_levels),
        }
    }

    /// Check every structural constraint that does not need a file system:
    /// positive tolerances, a sane grid, and a family that actually builds
    /// (which enforces the open-interval constraint on every exponent).
    pub fn validate(&self) -> Result<()> {
        let positives: [(&str, f64); 6] = [
            ("time.dt", self.dt),
            ("time.blow_up_ceiling", self.blow_up_ceiling),
            ("experiment.tol_conditions", self.tol_conditions),
            ("experiment.tol_stabilization", self.tol_stabilization),
            ("experiment.accept_factor", self.accept_factor),
            ("grid.length", self.grid_length),
        ];
        for (key, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation {
                    key: key.into(),
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if !self.t_target.is_finite() {
            return Err(Error::Validation {
                key: "experiment.t".into(),
                reason: "must be finite".into(),
            });
        }
        for (key, v) in [
            ("experiment.cloud_size", self.cloud_size),
            ("experiment.n_modes", self.n_modes),
            ("experiment.max_pullbacks", self.max_pullbacks),
        ] {
            if v == 0 {
                return Err(Error::Validation {
                    key: key.into(),
                    reason: "must be at least 1".into(),
                });
            }
        }
        if self.experiments.is_empty() {
            return Err(Error::Validation {
                key: "experiment.kinds".into(),
                reason: "at least one experiment must be selected".into(),
            });
        }
        if self.eta_schedule.is_none() && self.eta_levels == 0 {
            return Err(Error::Validation {
                key: "family.eta_levels".into(),
                reason: "must be at least 1".into(),
            });
        }
        let grid = Grid1D::new(self.grid_length, self.grid_n).map_err(|e| Error::Validation {
            key: "grid.n".into(),
            reason: e.to_string(),
        })?;
        scenarios::find(&self.scenario).map_err(|e| Error::Validation {
            key: "family.scenario".into(),
            reason: e.to_string(),
        })?;
        // Building the family enforces the decreasing schedule and keeps
        // every decay exponent strictly inside (0, 2 m lambda1).
        scenarios::build_family(
            &self.scenario,
            grid,
            self.schedule(),
            self.mu,
            self.mu_zero,
        )
        .map_err(|e| match e {
            Error::InvalidMu { .. } => Error::Validation {
                key: "family.mu".into(),
                reason: e.to_string(),
            },
            other => Error::Validation {
                key: "family".into(),
                reason: other.to_string(),
            },
        })?;
        Ok(())
    }
}

/// The built-in defaults for a named scenario.
pub fn default_config(scenario: &str) -> Result<RunConfig> {
    let def = scenarios::find(scenario)?;
    let experiments = def
        .default_experiments
        .iter()
        .map(|id| ExperimentKind::from_id(id).expect("registry ids are canonical"))
        .collect();
    Ok(RunConfig {
        grid_length: 1.0,
        grid_n: 128,
        dt: 1e-3,
        blow_up_ceiling: 1e8,
        max_retries: 6,
        scenario: scenario.to_string(),
        eta_levels: def.default_eta_levels,
        eta_schedule: None,
        mu: None,
        mu_zero: None,
        experiments,
        t_target: 0.0,
        cloud_size: 12,
        n_modes: 8,
        max_pullbacks: 10,
        seed: 7,
        tol_conditions: 1e-6,
        tol_stabilization: 1e-5,
        accept_factor: 0.05,
        output_dir: PathBuf::from("out"),
    })
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("{key}: expected a real number, got '{value}'")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("{key}: expected a nonnegative integer, got '{value}'")))
}

fn parse_mu(line: usize, value: &str) -> Result<MuRule> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    let need = |n: usize| -> Result<Vec<f64>> {
        if parts.len() != n + 1 {
            return Err(parse_err(
                line,
                format!("mu: '{}' takes {n} number(s)", parts[0]),
            ));
        }
        parts[1..]
            .iter()
            .map(|p| parse_f64(line, "mu", p))
            .collect()
    };
    match parts.first() {
        Some(&"constant") => Ok(MuRule::Constant { value: need(1)?[0] }),
        Some(&"affine") => {
            let v = need(2)?;
            Ok(MuRule::Affine {
                base: v[0],
                slope: v[1],
            })
        }
        Some(&"alternating") => {
            let v = need(2)?;
            Ok(MuRule::Alternating { lo: v[0], hi: v[1] })
        }
        _ => Err(parse_err(
            line,
            format!("mu: expected 'constant v', 'affine base slope' or 'alternating lo hi', got '{value}'"),
        )),
    }
}

fn format_mu(rule: &MuRule) -> String {
    match rule {
        MuRule::Constant { value } => format!("constant {value}"),
        MuRule::Affine { base, slope } => format!("affine {base} {slope}"),
        MuRule::Alternating { lo, hi } => format!("alternating {lo} {hi}"),
    }
}

/// Parse the sectioned key=value format. The first error is returned with
/// its line number; validation errors carry the offending key instead.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    const SECTIONS: [&str; 4] = ["grid", "time", "family", "experiment"];
    let mut entries: Vec<(String, String, String, usize)> = Vec::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(parse_err(line, format!("unknown section '[{name}]'")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected 'key = value'"))?;
        let sec = section
            .clone()
            .ok_or_else(|| parse_err(line, "key outside any [section]"))?;
        entries.push((sec, key.trim().to_string(), value.trim().to_string(), line));
    }

    let scenario = entries
        .iter()
        .find(|(s, k, _, _)| s == "family" && k == "scenario")
        .map(|(_, _, v, _)| v.clone())
        .ok_or_else(|| Error::Validation {
            key: "family.scenario".into(),
            reason: "missing (every config names a scenario)".into(),
        })?;
    let mut cfg = default_config(&scenario).map_err(|e| Error::Validation {
        key: "family.scenario".into(),
        reason: e.to_string(),
    })?;

    for (sec, key, value, line) in &entries {
        let (sec, key, value, line) = (sec.as_str(), key.as_str(), value.as_str(), *line);
        match (sec, key) {
            ("grid", "length") => cfg.grid_length = parse_f64(line, key, value)?,
            ("grid", "n") => cfg.grid_n = parse_usize(line, key, value)?,
            ("time", "dt") => cfg.dt = parse_f64(line, key, value)?,
            ("time", "blow_up_ceiling") => cfg.blow_up_ceiling = parse_f64(line, key, value)?,
            ("time", "max_retries") => cfg.max_retries = parse_usize(line, key, value)?,
            ("family", "scenario") => cfg.scenario = value.to_string(),
            ("family", "eta_levels") => cfg.eta_levels = parse_usize(line, key, value)?,
            ("family", "eta_schedule") => {
                let levels: Result<Vec<f64>> = value
                    .split(',')
                    .map(|p| parse_f64(line, key, p.trim()))
                    .collect();
                cfg.eta_schedule = Some(levels?);
            }
            ("family", "mu") => cfg.mu = Some(parse_mu(line, value)?),
            ("family", "mu_zero") => cfg.mu_zero = Some(parse_f64(line, key, value)?),
            ("experiment", "kinds") => {
                let kinds: Result<Vec<ExperimentKind>> = value
                    .split(',')
                    .map(|p| {
                        let id = p.trim();
                        ExperimentKind::from_id(id)
                            .ok_or_else(|| parse_err(line, format!("unknown experiment '{id}'")))
                    })
                    .collect();
                cfg.experiments = kinds?;
            }
            ("experiment", "t") => cfg.t_target = parse_f64(line, key, value)?,
            ("experiment", "cloud_size") => cfg.cloud_size = parse_usize(line, key, value)?,
            ("experiment", "n_modes") => cfg.n_modes = parse_usize(line, key, value)?,
            ("experiment", "max_pullbacks") => cfg.max_pullbacks = parse_usize(line, key, value)?,
            ("experiment", "seed") => {
                cfg.seed = value.parse::<u64>().map_err(|_| {
                    parse_err(line, format!("seed: expected an unsigned integer, got '{value}'"))
                })?
            }
            ("experiment", "tol_conditions") => cfg.tol_conditions = parse_f64(line, key, value)?,
            ("experiment", "tol_stabilization") => {
                cfg.tol_stabilization = parse_f64(line, key, value)?
            }
            ("experiment", "accept_factor") => cfg.accept_factor = parse_f64(line, key, value)?,
            ("experiment", "output_dir") => cfg.output_dir = PathBuf::from(value),
            _ => return Err(parse_err(line, format!("unknown key '{key}' in [{sec}]"))),
        }
    }

    cfg.validate()?;
    Ok(cfg)
}

/// Emit a config in the canonical layout. `parse_config(emit(&c)) == c` for
/// every valid config.
pub fn emit(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let kinds: Vec<&str> = cfg.experiments.iter().map(|k| k.id()).collect();
    let _ = writeln!(s, "[grid]");
    let _ = writeln!(s, "length = {}", cfg.grid_length);
    let _ = writeln!(s, "n = {}", cfg.grid_n);
    let _ = writeln!(s, "\n[time]");
    let _ = writeln!(s, "dt = {}", cfg.dt);
    let _ = writeln!(s, "blow_up_ceiling = {}", cfg.blow_up_ceiling);
    let _ = writeln!(s, "max_retries = {}", cfg.max_retries);
    let _ = writeln!(s, "\n[family]");
    let _ = writeln!(s, "scenario = {}", cfg.scenario);
    let _ = writeln!(s, "eta_levels = {}", cfg.eta_levels);
    if let Some(schedule) = &cfg.eta_schedule {
        let parts: Vec<String> = schedule.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(s, "eta_schedule = {}", parts.join(","));
    }
    if let Some(mu) = &cfg.mu {
        let _ = writeln!(s, "mu = {}", format_mu(mu));
    }
    if let Some(mu_zero) = cfg.mu_zero {
        let _ = writeln!(s, "mu_zero = {mu_zero}");
    }
    let _ = writeln!(s, "\n[experiment]");
    let _ = writeln!(s, "kinds = {}", kinds.join(","));
    let _ = writeln!(s, "t = {}", cfg.t_target);
    let _ = writeln!(s, "cloud_size = {}", cfg.cloud_size);
    let _ = writeln!(s, "n_modes = {}", cfg.n_modes);
    let _ = writeln!(s, "max_pullbacks = {}", cfg.max_pullbacks);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "tol_conditions = {}", cfg.tol_conditions);
    let _ = writeln!(s, "tol_stabilization = {}", cfg.tol_stabilization);
    let _ = writeln!(s, "accept_factor = {}", cfg.accept_factor);
    let _ = writeln!(s, "output_dir = {}", cfg.output_dir.display());
    s
}
