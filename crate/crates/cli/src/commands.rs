//! The five verbs. Each returns a JSON document for stdout or a [`CliError`]
//! carrying its exit code.

use std::path::{Path, PathBuf};
use std::time::Instant;

use pmc_core::geometry::{barrier_margins, BarrierReport};
use pmc_core::iteration::{
    curvature_residual, minimality_probe, run_traced, IterationOutcome, MinimalityProbeReport,
    MinimalitySetup,
};
use pmc_core::penalized::{select_parameters, slab_monotonicity, PenaltyParams};
use pmc_core::scenarios::{Instance, Scenario};
use pmc_core::study::{convergence_study, dyadic_levels, StudyReport};
use pmc_core::{build_grid, Grid, PmcError, RadialGraph};
use serde::Serialize;

use crate::config::{ConfigError, FieldError, OutputFormat, RunConfig, Setting};
use crate::export::{field_rows, read_fields, write_fields, write_mesh, write_trace, ExportError};
use crate::summary::{PenaltyReport, PenaltySource, RunSummary, Timings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BARRIER: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("barrier check failed: {message}")]
    Barrier {
        report: Option<Box<BarrierReport>>,
        message: String,
    },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("minimality probe found {0} violations")]
    ProbeViolations(usize),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Core(PmcError),
}

impl From<PmcError> for CliError {
    fn from(e: PmcError) -> Self {
        match e {
            PmcError::BarrierCheckFailed(report) => CliError::Barrier {
                message: format!(
                    "lower margin {:.3e}, upper margin {:.3e}",
                    report.lower_margin, report.upper_margin
                ),
                report: Some(report),
            },
            PmcError::BarriersNotOrdered { .. } | PmcError::NotSupersolution(_) => CliError::Barrier {
                report: None,
                message: e.to_string(),
            },
            PmcError::Stagnation { .. }
            | PmcError::NewtonDidNotConverge(_)
            | PmcError::ContinuationFailed { .. }
            | PmcError::SingularMatrix(_) => CliError::NoConvergence(e.to_string()),
            PmcError::InvalidParameter(_)
            | PmcError::UnsupportedDimension(_)
            | PmcError::ResolutionTooSmall(_) => CliError::Config(ConfigError::Invalid(vec![FieldError {
                field: "<derived>".into(),
                message: e.to_string(),
            }])),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Barrier { .. } => EXIT_BARRIER,
            CliError::NoConvergence(_) => EXIT_NO_CONVERGENCE,
            CliError::ProbeViolations(_) | CliError::Export(_) | CliError::Core(_) => EXIT_FAILURE,
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| {
        CliError::Export(ExportError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(io(path))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io(dir))
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// A config resolved against its scenario and grid.
pub struct Context {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub grid: Grid,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, level: u32, out: Option<PathBuf>) -> Result<Self, CliError> {
        config.validate()?;
        let scenario = config.scenario()?;
        let resolution = config.resolution(&scenario, level);
        let grid = build_grid(scenario.dim, &resolution).map_err(|e| {
            ConfigError::Invalid(vec![FieldError {
                field: "grid.resolution".into(),
                message: e.to_string(),
            }])
        })?;
        let out_dir = out.unwrap_or_else(|| config.output.directory.clone());
        Ok(Self {
            config,
            scenario,
            grid,
            out_dir,
        })
    }

    /// Sample the scenario; failing or unordered barriers become a
    /// [`CliError::Barrier`] with the margins attached.
    pub fn instance(&self) -> Result<Instance, CliError> {
        match self.scenario.instantiate_unchecked(&self.grid) {
            Ok(inst) if inst.report.pass => Ok(inst),
            Ok(inst) => Err(CliError::Barrier {
                message: barrier_message(&inst.report),
                report: Some(Box::new(inst.report)),
            }),
            Err(PmcError::BarriersNotOrdered { .. }) => {
                let report = self.unordered_report()?;
                Err(CliError::Barrier {
                    message: barrier_message(&report),
                    report: Some(Box::new(report)),
                })
            }
            Err(e) => Err(e.into()),
        }
    }

    fn unordered_report(&self) -> Result<BarrierReport, CliError> {
        let s = &self.scenario;
        let lower = s.lower.graph(&self.grid)?;
        let upper = s.upper.graph(&self.grid)?;
        let f = s.f.build(s.dim);
        let psi = s.psi.build(s.dim);
        Ok(barrier_margins(&lower, &upper, f.as_ref(), psi.as_ref(), &self.grid)?)
    }

    pub fn penalty(&self, inst: &Instance) -> Result<(PenaltyParams, PenaltyReport), CliError> {
        let p = self.config.penalty;
        let auto = matches!(p.gamma, Some(Setting::Auto)) || matches!(p.mu, Some(Setting::Auto));
        let heuristic = if auto {
            Some(select_parameters(
                inst.f.as_ref(),
                inst.psi.as_ref(),
                &inst.barriers,
                &self.grid,
            )?)
        } else {
            None
        };
        let pick = |setting: Option<Setting>, tuned: f64, auto: Option<f64>| match setting {
            None => (tuned, PenaltySource::Scenario),
            Some(Setting::Value(v)) => (v, PenaltySource::Config),
            Some(Setting::Auto) => (auto.expect("heuristic ran"), PenaltySource::Auto),
        };
        let (gamma, gamma_source) = pick(p.gamma, self.scenario.gamma, heuristic.as_ref().map(|h| h.params.gamma));
        let (mu, mu_source) = pick(p.mu, self.scenario.mu, heuristic.as_ref().map(|h| h.params.mu));
        let params = PenaltyParams::new(gamma, mu, inst.barriers.upper().u().max())?;
        let realized = slab_monotonicity(
            inst.f.as_ref(),
            inst.psi.as_ref(),
            &inst.barriers,
            params,
            &self.grid,
        )?;
        Ok((
            params,
            PenaltyReport {
                gamma,
                mu,
                eps0_floor: params.eps0_floor,
                gamma_source,
                mu_source,
                realized_eps0: realized,
            },
        ))
    }
}

fn barrier_message(r: &BarrierReport) -> String {
    let mut parts = Vec::new();
    if !r.ordered {
        parts.push("barriers are not ordered (lower exceeds upper)".to_string());
    }
    parts.push(format!(
        "lower margin max(H - f) = {:.6e} ({})",
        r.lower_margin,
        if r.lower_pass { "ok" } else { "fails" }
    ));
    parts.push(format!(
        "upper margin min(H - f) = {:.6e} ({})",
        r.upper_margin,
        if r.upper_pass { "ok" } else { "fails" }
    ));
    parts.join("; ")
}

pub struct Solved {
    pub instance: Instance,
    pub params: PenaltyParams,
    pub outcome: IterationOutcome,
    pub summary: RunSummary,
}

/// Barrier check, parameter choice and the monotone iteration. Returns the
/// outcome even when the iteration did not converge.
pub fn solve_only(ctx: &Context) -> Result<Solved, CliError> {
    let start = Instant::now();
    let inst = ctx.instance()?;
    let (params, penalty) = ctx.penalty(&inst)?;
    let setup_ms = ms(start);
    let solve_start = Instant::now();
    let iteration = ctx.config.iteration(&ctx.scenario);
    let mut problem = inst.problem();
    problem.params = params;
    let outcome = run_traced(&problem, &iteration, &ctx.grid)?;
    let solve_ms = ms(solve_start);
    let exact_error_sup = inst.exact.as_ref().map(|e| {
        e.u()
            .iter()
            .zip(outcome.u_final.u().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    });
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: ctx.scenario.name.clone(),
        dim: ctx.grid.dim(),
        resolution: ctx.grid.resolution(),
        converged: outcome.converged,
        outer_steps: outcome.trace.steps.len(),
        newton_iters_total: outcome.trace.steps.iter().map(|s| s.newton_iters).sum(),
        residual_sup: outcome.residual.sup,
        residual_l2: outcome.residual.l2,
        curvature_tol: iteration.curvature_tol,
        penalty,
        sup_v: outcome.trace.sup_v(),
        worst_monotonicity: outcome.trace.worst_monotonicity(),
        worst_supersolution_margin: outcome.trace.worst_supersolution_margin(),
        exact_error_sup,
        barrier: outcome.barrier_report.clone(),
        timings: Timings {
            setup_ms,
            solve_ms,
            output_ms: 0.0,
            total_ms: ms(start),
        },
    };
    Ok(Solved {
        instance: inst,
        params,
        outcome,
        summary,
    })
}

fn write_barrier_report(ctx: &Context, err: &CliError) {
    if let CliError::Barrier {
        report: Some(report),
        ..
    } = err
    {
        if ensure_dir(&ctx.out_dir).is_ok() {
            let _ = write_json(&ctx.out_dir.join("barriers.json"), report);
        }
    }
}

/// `solve`: run and write the requested outputs.
pub fn cmd_solve(ctx: &Context) -> Result<RunSummary, CliError> {
    let solved = match solve_only(ctx) {
        Ok(s) => s,
        Err(e) => {
            write_barrier_report(ctx, &e);
            return Err(e);
        }
    };
    let out_start = Instant::now();
    ensure_dir(&ctx.out_dir)?;
    let Solved {
        instance,
        outcome,
        mut summary,
        ..
    } = solved;
    let cfg = &ctx.config;
    if cfg.wants(OutputFormat::Trace) {
        write_trace(&ctx.out_dir.join("trace.csv"), &outcome.trace)?;
    }
    if cfg.wants(OutputFormat::Fields) {
        let rows = field_rows(&outcome.u_final, instance.f.as_ref(), instance.psi.as_ref(), &ctx.grid)?;
        write_fields(&ctx.out_dir.join("fields.csv"), &rows)?;
    }
    if cfg.wants(OutputFormat::Mesh) && ctx.grid.dim() == 2 {
        write_mesh(&ctx.out_dir.join("mesh.obj"), &outcome.u_final, &ctx.grid)?;
    }
    summary.timings.output_ms = ms(out_start);
    summary.timings.total_ms += summary.timings.output_ms;
    if cfg.wants(OutputFormat::Summary) {
        write_json(&ctx.out_dir.join("summary.json"), &summary)?;
    }
    if !summary.converged {
        return Err(CliError::NoConvergence(format!(
            "curvature residual {:.3e} above tolerance {:.3e} after {} outer steps",
            summary.residual_sup, summary.curvature_tol, summary.outer_steps
        )));
    }
    Ok(summary)
}

pub fn cmd_check_barriers(ctx: &Context) -> Result<BarrierReport, CliError> {
    let inst = ctx.instance()?;
    Ok(inst.report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub nodes: usize,
    /// max |H recomputed - H stored|.
    pub max_h_deviation: f64,
    pub residual_sup: f64,
    pub residual_l2: f64,
}

/// `curvature`: recompute H and the other columns of a stored fields.csv.
pub fn cmd_curvature(ctx: &Context, fields: &Path) -> Result<CurvatureReport, CliError> {
    let stored = read_fields(fields)?;
    let bad = |message: String| {
        CliError::Config(ConfigError::Invalid(vec![FieldError {
            field: "--fields".into(),
            message,
        }]))
    };
    if stored.len() != ctx.grid.len() {
        return Err(bad(format!(
            "{} rows but the grid has {} nodes",
            stored.len(),
            ctx.grid.len()
        )));
    }
    for (i, row) in stored.iter().enumerate() {
        let p = ctx.grid.point(i);
        if row.node != i || (row.theta - p.theta).abs() > 1e-12 || (row.lambda - p.lambda).abs() > 1e-12 {
            return Err(bad(format!("row {i} does not sit on grid node {i}")));
        }
    }
    let graph = RadialGraph::from_u(stored.iter().map(|r| r.u).collect())?;
    let f = ctx.scenario.f.build(ctx.scenario.dim);
    let psi = ctx.scenario.psi.build(ctx.scenario.dim);
    let rows = field_rows(&graph, f.as_ref(), psi.as_ref(), &ctx.grid)?;
    ensure_dir(&ctx.out_dir)?;
    write_fields(&ctx.out_dir.join("curvature.csv"), &rows)?;
    let residual = curvature_residual(&graph, f.as_ref(), psi.as_ref(), &ctx.grid)?;
    Ok(CurvatureReport {
        nodes: rows.len(),
        max_h_deviation: rows
            .iter()
            .zip(&stored)
            .fold(0.0, |m: f64, (a, b)| m.max((a.h - b.h).abs())),
        residual_sup: residual.sup,
        residual_l2: residual.l2,
    })
}

/// `probe-minimality`: solve, then test J against random feasible competitors.
pub fn cmd_probe(ctx: &Context) -> Result<MinimalityProbeReport, CliError> {
    let solved = solve_only(ctx)?;
    if !solved.outcome.converged {
        return Err(CliError::NoConvergence(format!(
            "curvature residual {:.3e} above tolerance",
            solved.outcome.residual.sup
        )));
    }
    let mut problem = solved.instance.problem();
    problem.params = solved.params;
    let setup = MinimalitySetup::from_outcome(&solved.outcome, &problem, &ctx.grid)?;
    let p = ctx.config.probe;
    let report = minimality_probe(&setup, p.trials, p.amplitude, p.seed, &ctx.grid)?;
    ensure_dir(&ctx.out_dir)?;
    write_json(&ctx.out_dir.join("probe.json"), &report)?;
    if report.violations > 0 {
        return Err(CliError::ProbeViolations(report.violations));
    }
    Ok(report)
}

/// `convergence-study`: dyadic refinement against the exact solution.
pub fn cmd_study(ctx: &Context) -> Result<StudyReport, CliError> {
    let mut scenario = ctx.scenario.clone();
    if scenario.exact.is_none() {
        return Err(ConfigError::Invalid(vec![FieldError {
            field: "scenario".into(),
            message: format!("{} has no exact solution to compare against", scenario.name),
        }])
        .into());
    }
    for (field, setting, slot) in [
        ("penalty.gamma", ctx.config.penalty.gamma, &mut scenario.gamma),
        ("penalty.mu", ctx.config.penalty.mu, &mut scenario.mu),
    ] {
        match setting {
            Some(Setting::Value(v)) => *slot = v,
            Some(Setting::Auto) => {
                return Err(ConfigError::Invalid(vec![FieldError {
                    field: field.into(),
                    message: "\"auto\" is not supported by convergence-study".into(),
                }])
                .into())
            }
            None => {}
        }
    }
    let levels = dyadic_levels(&ctx.grid.resolution(), ctx.config.study.levels);
    let report = convergence_study(&scenario, &levels, &ctx.config.iteration(&scenario))?;
    ensure_dir(&ctx.out_dir)?;
    write_json(&ctx.out_dir.join("study.json"), &report)?;
    Ok(report)
}
