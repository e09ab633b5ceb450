//! Experiment orchestration: build the configured family on its grid, run
//! each selected experiment, write CSV artifacts, and collect one pass/fail
//! gate per experiment.
//!
//! Artifacts are deterministic by construction — no timestamps, no absolute
//! paths, all reals at 17 significant digits — so identical configs produce
//! identical bytes.

use std::path::{Path, PathBuf};

use crate::attractor::{
    default_pullback_schedule, finite_time_convergence_experiment, omega_limit,
    robustness_experiment, AttractorCloud, CloudSettings, FiniteTimeSettings,
    RobustnessSettings,
};
use crate::conditions::{
    audit_all, noncommutation_demo, sufficient_condition_report, ConditionSettings,
};
use crate::config::{ExperimentKind, RunConfig};
use crate::error::Result;
use crate::estimates::{gronwall_bound, EnergyParams, FamilyAnalysis};
use crate::grid::{EigenvalueMode, Field, Grid1D};
use crate::model::{PerturbedFamily, SpatialProfile};
use crate::report::{fnum, write_table, write_text};
use crate::scenarios;
use crate::solver::{integrate, SolverOptions};
use crate::verdict::ConditionVerdict;

/// One acceptance gate: the named check an experiment either passed or
/// failed, with a human-readable observation.
#[derive(Debug, Clone)]
pub struct GateResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: String,
    pub out_dir: PathBuf,
    pub gates: Vec<GateResult>,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn all_passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

/// Slack for the absorbing-radius inclusion check: pure rounding.
const INCLUSION_SLACK: f64 = 1e-9;
/// Per-step energy-identity budget, relative to max(1, |u|^2).
const ENERGY_TOL: f64 = 1e-10;
/// Per-step Gronwall slack, relative to 1 + bound.
const GRONWALL_TOL: f64 = 1e-8;

/// A fixed nontrivial initial state for trajectory experiments: the first
/// two modes, so both the diffusion and the nonlinearity act.
fn initial_field(grid: Grid1D) -> Field {
    let mut u = SpatialProfile::SineMode { k: 1, amplitude: 1.0 }.sample(grid);
    let second = SpatialProfile::SineMode { k: 2, amplitude: 0.3 }.sample(grid);
    for (a, b) in u.values_mut().iter_mut().zip(second.values()) {
        *a += *b;
    }
    u
}

fn eta_label(eta: f64) -> String {
    format!("{eta}")
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    grid: Grid1D,
    family: PerturbedFamily,
    analysis: FamilyAnalysis,
    solver: SolverOptions,
    conditions: ConditionSettings,
    out_dir: PathBuf,
    artifacts: Vec<PathBuf>,
    gates: Vec<GateResult>,
}

impl Ctx<'_> {
    fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.out_dir.join(name);
        write_table(&path, header, rows)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        write_text(&path, content)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn gate(&mut self, name: &str, passed: bool, detail: String) {
        self.gates.push(GateResult {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    /// (eta label, instantiated spec) for every level plus the limit.
    fn specs(&self) -> Result<Vec<(String, crate::model::ProblemSpec, f64)>> {
        let mut out = Vec::new();
        for &eta in self.family.eta_schedule() {
            out.push((eta_label(eta), self.family.instantiate(eta)?, eta));
        }
        out.push(("0".to_string(), self.family.limit_spec(), 0.0));
        Ok(out)
    }
}

/// Execute every selected experiment. `output_root`, when given, replaces
/// the configured output directory (the CLI wires an environment variable
/// here). Artifacts land under `<root>/<scenario>/`.
pub fn run(cfg: &RunConfig, output_root: Option<&Path>) -> Result<RunOutcome> {
    cfg.validate()?;
    let grid = Grid1D::new(cfg.grid_length, cfg.grid_n)?;
    let family = scenarios::build_family(&cfg.scenario, grid, cfg.schedule(), cfg.mu, cfg.mu_zero)?;
    let analysis = FamilyAnalysis::new(&family, grid)?;
    let root = output_root.unwrap_or(&cfg.output_dir);
    let mut ctx = Ctx {
        cfg,
        grid,
        family,
        analysis,
        solver: SolverOptions {
            blow_up_ceiling: cfg.blow_up_ceiling,
            max_retries: cfg.max_retries as u32,
        },
        conditions: ConditionSettings {
            tol: cfg.tol_conditions,
            ..ConditionSettings::default()
        },
        out_dir: root.join(&cfg.scenario),
        artifacts: Vec::new(),
        gates: Vec::new(),
    };

    for kind in &cfg.experiments {
        match kind {
            ExperimentKind::EnergyAudit => energy_audit(&mut ctx)?,
            ExperimentKind::Gronwall => gronwall(&mut ctx)?,
            ExperimentKind::Absorbing => absorbing(&mut ctx)?,
            ExperimentKind::Conditions => conditions(&mut ctx)?,
            ExperimentKind::Attractor => attractor(&mut ctx)?,
            ExperimentKind::Robustness => robustness(&mut ctx)?,
            ExperimentKind::FiniteTime => finite_time(&mut ctx)?,
            ExperimentKind::Noncommutation => noncommutation(&mut ctx)?,
        }
    }

    let summary: Vec<Vec<String>> = ctx
        .gates
        .iter()
        .map(|g| {
            vec![
                g.name.clone(),
                if g.passed { "pass" } else { "fail" }.to_string(),
                sanitize(&g.detail),
            ]
        })
        .collect();
    ctx.table("gates.csv", &["gate", "status", "detail"], &summary)?;

    Ok(RunOutcome {
        scenario: cfg.scenario.clone(),
        out_dir: ctx.out_dir,
        gates: ctx.gates,
        artifacts: ctx.artifacts,
    })
}

/// CSV cells must not contain the separator; free-form notes trade commas
/// for semicolons.
fn sanitize(s: &str) -> String {
    s.replace(',', ";")
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Per-step discrete energy identity on every level of the scenario.
fn energy_audit(ctx: &mut Ctx) -> Result<()> {
    let tau = ctx.cfg.t_target - 1.0;
    let u0 = initial_field(ctx.grid);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (label, spec, _) in ctx.specs()? {
        let traj = integrate(&spec, &u0, tau, ctx.cfg.t_target, ctx.cfg.dt, ctx.solver)?;
        for i in 0..traj.residuals.len() {
            let norm_sq = traj.fields[i + 1].l2_norm().powi(2);
            let ratio = traj.residuals[i].abs() / norm_sq.max(1.0);
            worst = worst.max(ratio);
            rows.push(vec![
                label.clone(),
                fnum(traj.times[i + 1]),
                fnum(norm_sq),
                fnum(traj.viscosities[i]),
                fnum(traj.residuals[i]),
            ]);
        }
    }
    ctx.table(
        "energy_audit.csv",
        &["eta", "t", "norm_sq", "viscosity", "residual"],
        &rows,
    )?;
    ctx.gate(
        "energy-audit",
        worst < ENERGY_TOL,
        format!("worst |residual| / max(1, |u|^2) = {worst:.3e} (budget {ENERGY_TOL:.1e})"),
    );
    Ok(())
}

/// Pullback Gronwall bound with the scheme's own eigenvalue and the
/// canonical exponent mu = m lambda1.
fn gronwall(ctx: &mut Ctx) -> Result<()> {
    let tau = ctx.cfg.t_target - 1.0;
    let u0 = initial_field(ctx.grid);
    let u0_sq = u0.l2_norm().powi(2);
    let lambda1 = ctx.grid.first_eigenvalue(EigenvalueMode::Discrete);
    let params = EnergyParams {
        mu: ctx.analysis.m * lambda1,
        m: ctx.analysis.m,
        lambda1,
        kappa: ctx.analysis.kappa,
        omega: ctx.analysis.omega,
    };
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut levels = Vec::new();
    for level in &ctx.analysis.levels {
        levels.push((eta_label(level.eta), level.eta, &level.analysis));
    }
    levels.push(("0".to_string(), 0.0, &ctx.analysis.limit.analysis));
    for (label, eta, forcing) in levels {
        let spec = if eta > 0.0 {
            ctx.family.instantiate(eta)?
        } else {
            ctx.family.limit_spec()
        };
        let traj = integrate(&spec, &u0, tau, ctx.cfg.t_target, ctx.cfg.dt, ctx.solver)?;
        for i in 0..traj.times.len() {
            let t = traj.times[i];
            let norm_sq = traj.fields[i].l2_norm().powi(2);
            let bound = gronwall_bound(forcing, &params, u0_sq, tau, t)?;
            worst = worst.max((norm_sq - bound) / (1.0 + bound));
            rows.push(vec![label.clone(), fnum(t), fnum(norm_sq), fnum(bound)]);
        }
    }
    ctx.table(
        "gronwall.csv",
        &["eta", "t", "norm_sq", "bound"],
        &rows,
    )?;
    ctx.gate(
        "gronwall",
        worst <= GRONWALL_TOL,
        format!("worst (|u|^2 - bound) / (1 + bound) = {worst:.3e} (slack {GRONWALL_TOL:.1e})"),
    );
    Ok(())
}

/// Per-level absorbing radii against the envelope over a backward window.
fn absorbing(ctx: &mut Ctx) -> Result<()> {
    let c0 = ctx.analysis.c_floor();
    let probes = ctx.conditions.eta_probes;
    let times: Vec<f64> = (0..=10)
        .map(|k| ctx.cfg.t_target - 5.0 + 0.5 * k as f64)
        .collect();
    let mut rows = Vec::new();
    let mut worst_gap = f64::NEG_INFINITY;
    let tail_start = ctx.analysis.levels.len() / 2;
    for &t in &times {
        let psi = ctx.analysis.psi_sq(t, c0, probes)?;
        for (idx, level) in ctx.analysis.levels.iter().enumerate() {
            let r = ctx.analysis.radius_sq(level, t)?;
            // Envelope domination is an eta -> 0 statement; judge it on the
            // schedule tail.
            if idx >= tail_start {
                worst_gap = worst_gap.max(r - psi);
            }
            rows.push(vec![
                eta_label(level.eta),
                fnum(t),
                fnum(r),
                fnum(psi),
            ]);
        }
    }
    ctx.table(
        "absorbing.csv",
        &["eta", "t", "radius_sq", "envelope_sq"],
        &rows,
    )?;
    ctx.gate(
        "absorbing",
        worst_gap <= 1e-12,
        format!("worst R^2 - Psi^2 over the schedule tail = {worst_gap:.3e}"),
    );
    Ok(())
}

fn verdict_rows(verdicts: &[ConditionVerdict]) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut summary = Vec::new();
    let mut evidence = Vec::new();
    for v in verdicts {
        summary.push(vec![
            v.condition.clone(),
            format!("{:?}", v.verdict),
            sanitize(&v.notes.join("; ")),
        ]);
        for row in &v.evidence {
            evidence.push(vec![
                v.condition.clone(),
                sanitize(&row.label),
                fnum(row.index),
                fnum(row.value),
            ]);
        }
        for (name, value) in &v.thresholds {
            evidence.push(vec![
                v.condition.clone(),
                format!("threshold: {}", sanitize(name)),
                fnum(f64::NAN),
                fnum(*value),
            ]);
        }
    }
    (summary, evidence)
}

/// Full assumption audit plus the sufficient-condition report.
fn conditions(ctx: &mut Ctx) -> Result<()> {
    let mut verdicts = audit_all(&ctx.family, ctx.grid, &ctx.conditions)?;
    verdicts.push(sufficient_condition_report(
        &ctx.family,
        ctx.grid,
        &ctx.conditions,
    )?);
    let all_pass = verdicts.iter().all(ConditionVerdict::passed);
    let (summary, evidence) = verdict_rows(&verdicts);
    ctx.table(
        "conditions.csv",
        &["condition", "verdict", "notes"],
        &summary,
    )?;
    ctx.table(
        "conditions_evidence.csv",
        &["condition", "label", "index", "value"],
        &evidence,
    )?;
    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.passed())
        .map(|v| v.condition.as_str())
        .collect();
    ctx.gate(
        "conditions",
        all_pass,
        if all_pass {
            format!("{} audits pass (sufficient route certified)", verdicts.len())
        } else {
            format!("failed: {}", failed.join("; "))
        },
    );
    Ok(())
}

fn cloud_settings(ctx: &Ctx) -> CloudSettings {
    CloudSettings {
        n_modes: ctx.cfg.n_modes,
        cloud_size: ctx.cfg.cloud_size,
        seed: ctx.cfg.seed,
        dt: ctx.cfg.dt,
        tol: ctx.cfg.tol_stabilization,
        solver: ctx.solver,
    }
}

/// Serialize one cloud: metadata comments, then one field per row.
fn write_cloud(ctx: &mut Ctx, name: &str, label: &str, cloud: &AttractorCloud) -> Result<()> {
    let mut out = String::new();
    out.push_str("# attractor section\n");
    out.push_str(&format!("# eta = {label}\n"));
    out.push_str(&format!("# t = {}\n", fnum(cloud.t)));
    out.push_str(&format!("# dt = {}\n", fnum(cloud.dt)));
    out.push_str(&format!("# stabilization = {}\n", fnum(cloud.stabilization)));
    out.push_str(&format!("# pullbacks = {}\n", cloud.pullback_starts.len()));
    out.push_str(&format!("# initial_set = {}\n", sanitize(&cloud.initial_set)));
    out.push_str(&format!("# n = {}\n", cloud.grid.n()));
    let mut header = vec!["point".to_string()];
    header.extend((0..cloud.grid.n()).map(|i| format!("v{i}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, p) in cloud.points.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.values().iter().map(|v| fnum(*v)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    ctx.text(name, &out)
}

/// Inclusion check shared by the cloud experiments: every point of every
/// cloud inside its absorbing radius, with rounding slack only.
fn inclusion_gate(ctx: &mut Ctx, checks: &[(String, f64, f64)]) {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_label = String::new();
    for (label, max_norm, radius) in checks {
        let gap = max_norm - radius;
        if gap > worst {
            worst = gap;
            worst_label = label.clone();
        }
    }
    ctx.gate(
        "absorbing-inclusion",
        worst <= INCLUSION_SLACK,
        format!("worst max|u| - R over clouds = {worst:.3e} (at eta = {worst_label})"),
    );
}

/// Approximate the attractor section of every level and the limit problem;
/// serialize the clouds and check the absorbing inclusion.
fn attractor(ctx: &mut Ctx) -> Result<()> {
    let t = ctx.cfg.t_target;
    let schedule = default_pullback_schedule(
        t,
        ctx.analysis.m,
        ctx.analysis.lambda1,
        ctx.cfg.max_pullbacks,
    );
    let settings = cloud_settings(ctx);
    let c0 = ctx.analysis.c_floor();
    let probes = ctx.conditions.eta_probes;
    let mut rows = Vec::new();
    let mut checks = Vec::new();

    let analysis = ctx.analysis.clone();
    for level in &analysis.levels {
        let spec = ctx.family.instantiate(level.eta)?;
        let cloud = omega_limit(
            &spec,
            ctx.grid,
            |tau| Ok(analysis.radius_sq(level, tau)?.max(0.0).sqrt()),
            t,
            &schedule,
            &settings,
        )?;
        let radius = analysis.radius_sq(level, t)?.max(0.0).sqrt();
        let label = eta_label(level.eta);
        write_cloud(ctx, &format!("cloud_eta_{label}.csv"), &label, &cloud)?;
        rows.push(vec![
            label.clone(),
            fnum(cloud.max_norm()),
            fnum(radius),
            fnum(cloud.stabilization),
        ]);
        checks.push((label, cloud.max_norm(), radius));
    }
    let limit_cloud = omega_limit(
        &ctx.family.limit_spec(),
        ctx.grid,
        |tau| Ok(analysis.psi_sq(tau, c0, probes)?.max(0.0).sqrt()),
        t,
        &schedule,
        &settings,
    )?;
    let limit_radius = analysis.psi_sq(t, c0, probes)?.max(0.0).sqrt();
    write_cloud(ctx, "cloud_eta_0.csv", "0", &limit_cloud)?;
    rows.push(vec![
        "0".to_string(),
        fnum(limit_cloud.max_norm()),
        fnum(limit_radius),
        fnum(limit_cloud.stabilization),
    ]);
    checks.push(("0".to_string(), limit_cloud.max_norm(), limit_radius));

    ctx.table(
        "attractor.csv",
        &["eta", "max_norm", "radius", "stabilization"],
        &rows,
    )?;
    inclusion_gate(ctx, &checks);
    Ok(())
}

/// Upper-semicontinuity of the attractor sections as eta -> 0.
fn robustness(ctx: &mut Ctx) -> Result<()> {
    let settings = RobustnessSettings {
        cloud: cloud_settings(ctx),
        conditions: ctx.conditions.clone(),
        max_pullbacks: ctx.cfg.max_pullbacks,
        override_gate: false,
        accept_factor: ctx.cfg.accept_factor,
    };
    let report = robustness_experiment(&ctx.family, ctx.grid, ctx.cfg.t_target, &settings)?;

    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for level in &report.levels {
        let label = eta_label(level.eta);
        rows.push(vec![
            label.clone(),
            level
                .distance
                .map(fnum)
                .unwrap_or_else(|| "unresolved".to_string()),
            fnum(level.radius_at_t),
            fnum(level.stabilization),
        ]);
        if let Some(cloud) = &level.cloud {
            write_cloud(ctx, &format!("cloud_eta_{label}.csv"), &label, cloud)?;
            checks.push((label, cloud.max_norm(), level.radius_at_t));
        }
    }
    if let Some(cloud) = &report.limit_cloud {
        write_cloud(ctx, "cloud_eta_0.csv", "0", cloud)?;
        checks.push(("0".to_string(), cloud.max_norm(), report.limit_radius_at_t));
    }
    ctx.table(
        "robustness.csv",
        &["eta", "distance", "radius_at_t", "stabilization"],
        &rows,
    )?;

    let mut text = format!("verdict: {:?}\n", report.verdict);
    for v in &report.gate {
        text.push_str(&format!("gate {}: {:?}\n", v.condition, v.verdict));
    }
    for n in &report.notes {
        text.push_str(&format!("note: {n}\n"));
    }
    ctx.text("robustness_report.txt", &text)?;

    let detail = match report.distances().as_slice() {
        [] => "no level resolved".to_string(),
        ds => format!(
            "d: {:.3e} -> {:.3e} over {} levels",
            ds[0].1,
            ds.last().unwrap().1,
            ds.len()
        ),
    };
    ctx.gate("robustness", report.passed(), detail);
    if !checks.is_empty() {
        inclusion_gate(ctx, &checks);
    }
    Ok(())
}

/// Finite-time convergence u_eta -> u_0 from a shared initial state.
fn finite_time(ctx: &mut Ctx) -> Result<()> {
    let tau = ctx.cfg.t_target - 1.0;
    let u_tau = initial_field(ctx.grid);
    let checkpoints = [tau + 0.25, tau + 0.5, tau + 1.0];
    let settings = FiniteTimeSettings {
        dt: ctx.cfg.dt,
        solver: ctx.solver,
        refine_check: true,
    };
    let schedule = ctx.family.eta_schedule().to_vec();
    let report = finite_time_convergence_experiment(
        &ctx.family,
        ctx.grid,
        tau,
        &u_tau,
        &checkpoints,
        &schedule,
        &settings,
    )?;

    let rows: Vec<Vec<String>> = report
        .errors_by_eta()
        .into_iter()
        .map(|(eta, e)| vec![eta_label(eta), fnum(e)])
        .collect();
    ctx.table("finite_time.csv", &["eta", "state_gap"], &rows)?;
    let norm_rows: Vec<Vec<String>> = report
        .norm_gaps
        .iter()
        .map(|r| vec![sanitize(&r.label), fnum(r.index), fnum(r.value)])
        .collect();
    ctx.table(
        "finite_time_norms.csv",
        &["series", "checkpoint", "norm_gap"],
        &norm_rows,
    )?;
    let mut text = format!(
        "verdict: {:?}\nfitted order: {}\n",
        report.verdict, report.fitted_order
    );
    if let Some(shift) = report.dt_shift {
        text.push_str(&format!("dt shift: {shift}\n"));
    }
    for n in &report.notes {
        text.push_str(&format!("note: {n}\n"));
    }
    ctx.text("finite_time_report.txt", &text)?;

    ctx.gate(
        "finite-time",
        report.passed(),
        format!("fitted order {:.3}", report.fitted_order),
    );
    Ok(())
}

/// The iterated-limit counterexample table for the family's own exponent.
fn noncommutation(ctx: &mut Ctx) -> Result<()> {
    let demo = noncommutation_demo(
        ctx.family.mu_zero(),
        ctx.conditions.eta_probes,
        &ctx.conditions.t_grid,
    )?;
    let mut rows = Vec::new();
    for r in demo
        .table
        .iter()
        .chain(demo.sup_rows.iter())
        .chain(demo.limit_rows.iter())
    {
        rows.push(vec![sanitize(&r.label), fnum(r.index), fnum(r.value)]);
    }
    rows.push(vec![
        "deep time of level sup".to_string(),
        fnum(f64::NAN),
        fnum(demo.deep_time_of_level_sup),
    ]);
    rows.push(vec![
        "level sup of deep time".to_string(),
        fnum(f64::NAN),
        fnum(demo.level_sup_of_deep_time),
    ]);
    ctx.table(
        "noncommutation.csv",
        &["series", "index", "value"],
        &rows,
    )?;
    let tol = ctx.cfg.tol_conditions;
    ctx.gate(
        "noncommutation",
        demo.passes(tol),
        format!(
            "iterated limits {:.6} and {:.6} (targets 1 and 0, tol {tol:.1e})",
            demo.deep_time_of_level_sup, demo.level_sup_of_deep_time
        ),
    );
    Ok(())
}
