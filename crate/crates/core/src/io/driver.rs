use std::time::Instant;

use crate::dsgeom::CutoffSpec;
use crate::experiments::{barrier_run, convergence_table, flatness_from_trajectory, flatness_run};
use crate::flow::{advance_window, run, stable_dt, BcKind, GraphState, Trajectory};
use crate::io::config::{ExperimentKind, RunConfig};
use crate::io::report::{ExperimentOutput, Report};
use crate::io::snapshot::load_state;
use crate::oracles::{
    check_a2_evolution, check_coordinate_laplacians, check_cutoff_evolution, check_gradient_identities,
    check_identities_on_jets, check_v2_evolution, check_v2_inequalities, check_v_gradient_identity,
    InequalityReport, ResidualReport,
};
use crate::{discrete::GridMode, Error, Result};

const SLICING_NOTE: &str =
    "slicing boundary data (u = u0 + n s on the boundary) stand in for the unspecified far field";

pub struct Outcome {
    pub report: Report,
    pub trajectory: Option<Trajectory>,
}

/// Initial state from the saved snapshot, if configured, or the profile.
pub fn initial_state(cfg: &RunConfig) -> Result<GraphState> {
    match &cfg.initial.snapshot {
        Some(path) => load_state(path),
        None => {
            let grid = cfg.grid.grid()?;
            GraphState::initial(cfg.initial.field(grid)?, cfg.initial.bc)
        }
    }
}

fn profile_pair(cfg: &RunConfig) -> Result<(GraphState, GraphState)> {
    if cfg.initial.snapshot.is_some() {
        return Err(Error::Validation(
            "refinement studies need the analytic profile, not a snapshot".into(),
        ));
    }
    let grid = cfg.grid.grid()?;
    let coarse = GraphState::initial(cfg.initial.field(grid)?, cfg.initial.bc)?;
    let fine = GraphState::initial(cfg.initial.field(grid.refined())?, cfg.initial.bc)?;
    Ok((coarse, fine))
}

fn suffixed(mut r: InequalityReport, key: &str, value: f64) -> InequalityReport {
    r.name = format!("{}({key}={value:.4})", r.name);
    r
}

fn residuals(report: &mut Report, rs: Vec<ResidualReport>) -> Result<()> {
    rs.into_iter().try_for_each(|r| report.residual(r))
}

fn verify_suite(state: &GraphState, cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let o = &cfg.oracles;
    let n = state.grid().dimension;
    if o.jets > 0 {
        let suite = check_identities_on_jets(o.jets, n, cfg.seed)?;
        residuals(report, suite.reports)?;
        report.inequality(suite.bartnik)?;
    }
    if o.identities {
        report.residual(check_gradient_identities(state)?)?;
        residuals(report, check_v_gradient_identity(state, None)?)?;
    }
    if !(o.evolution || o.inequalities || o.cutoff) {
        return Ok(());
    }
    let dt = o.window_dt.unwrap_or_else(|| stable_dt(state, cfg.flow.cfl_safety));
    let window = advance_window(state, &cfg.flow, dt)?;
    if o.evolution {
        report.residual(check_v2_evolution(&window)?)?;
        if state.grid().mode == GridMode::Radial {
            let (a2, traceless) = check_a2_evolution(&window)?;
            report.residual(a2)?;
            report.inequality(traceless)?;
        }
    }
    if o.inequalities {
        for (j, &delta) in o.deltas.iter().enumerate() {
            for r in check_v2_inequalities(&window, delta)? {
                if r.name == "v2_inequality_gradient" {
                    report.inequality(suffixed(r, "delta", delta))?;
                } else if j == 0 {
                    report.inequality(r)?;
                }
            }
        }
    }
    if o.cutoff {
        for &alpha in &o.alphas {
            let spec = CutoffSpec::new(alpha, o.cutoff_radius, o.epsilon, o.t_min)?;
            match check_cutoff_evolution(&window, &spec) {
                Ok(rs) => {
                    for r in rs {
                        report.inequality(suffixed(r, "alpha", alpha))?;
                    }
                }
                Err(e @ Error::BelowThreshold { .. }) => {
                    report.flag(&format!("cutoff(alpha={alpha:.4})"), false, e.to_string())?;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

fn record_run(report: &mut Report, traj: &Trajectory) -> Result<()> {
    report.steps += traj.total_steps();
    let detail = match &traj.failure {
        Some(e) => format!("stopped at s = {}: {e}", traj.last().s),
        None => format!("reached s = {}", traj.last().s),
    };
    report.flag("flow_completed", traj.failure.is_none(), detail)?;
    let violations: usize = traj.diagnostics.iter().map(|d| d.mean_convexity_violations).sum();
    if violations > 0 {
        report.notes.push(format!(
            "mean convexity violated at {violations} node-snapshots (diagnostic only)"
        ));
    }
    Ok(())
}

/// Runs the configured experiment and assembles its report.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut report = Report::new(cfg.clone());
    let mut trajectory = None;
    match cfg.kind {
        ExperimentKind::Simulate => {
            let state = initial_state(cfg)?;
            let traj = run(&state, &cfg.flow)?;
            record_run(&mut report, &traj)?;
            if cfg.oracles.identities {
                report.residual(check_gradient_identities(traj.last())?)?;
            }
            trajectory = Some(traj);
        }
        ExperimentKind::Verify => {
            let state = initial_state(cfg)?;
            verify_suite(&state, cfg, &mut report)?;
        }
        ExperimentKind::Refine => {
            let (coarse, fine) = profile_pair(cfg)?;
            residuals(&mut report, check_coordinate_laplacians(&coarse, &fine)?)?;
            residuals(&mut report, check_v_gradient_identity(&coarse, Some(&fine))?)?;
        }
        ExperimentKind::Barrier => {
            let b = barrier_run(&cfg.grid.grid()?, &cfg.flow)?;
            report.steps = b.steps;
            report.flag("barrier_monotone", b.monotone, "w(0,s) strictly increasing")?;
            report.flag(
                "barrier_upper_bound",
                b.within_bounds,
                format!("max w - n s = {:e}, tolerance {:e}", b.max_bound_excess, b.tolerance),
            )?;
            report.flag(
                "barrier_crossing",
                b.crossing.is_some(),
                format!("first s with w(0,s) > 1: {:?}", b.crossing),
            )?;
            let detail = match (b.c, b.min_translation_slack) {
                (Some(c), Some(m)) => format!("c = {c}, worst slack {m:e}"),
                _ => format!("run ended at s = {} before c = w(0,1) could be measured", b.end_s),
            };
            report.flag("barrier_translation", b.translation_ok(), detail)?;
            if let Some(f) = &b.failure {
                report.notes.push(format!("barrier run stopped early: {f}"));
            }
            report.experiment = Some(ExperimentOutput::Barrier(b));
        }
        ExperimentKind::Flatness => {
            let state = initial_state(cfg)?;
            let f = flatness_run(&state, cfg.experiment.theta, &cfg.flow)?;
            report.steps = f.steps;
            report.notes.push(SLICING_NOTE.into());
            report.flag(
                "flatness_reached",
                f.reached(),
                format!("first s with sup(v-1) <= {}: {:?}", f.theta, f.flat_at),
            )?;
            report.flag("flatness_eventually_decreasing", f.eventually_decreasing, "final third")?;
            report.experiment = Some(ExperimentOutput::Flatness(f));
        }
        ExperimentKind::Rescale => {
            let state = initial_state(cfg)?;
            if state.bc.kind() != BcKind::Slicing {
                return Err(Error::Validation("rescale runs need the slicing boundary condition".into()));
            }
            let traj = run(&state, &cfg.flow)?;
            record_run(&mut report, &traj)?;
            report.notes.push(SLICING_NOTE.into());
            let e = &cfg.experiment;
            let flatness = flatness_from_trajectory(&traj, e.theta);
            let table = convergence_table(&traj, &e.lambdas, e.rho)?;
            report.flag(
                "rescale_decreasing",
                table.decreasing,
                "sup |u^λ - n s| and sup (v - 1) strictly decreasing in λ",
            )?;
            report.experiment = Some(ExperimentOutput::Rescale { flatness, table });
            trajectory = Some(traj);
        }
    }
    report.wall_clock_seconds = clock.elapsed().as_secs_f64();
    Ok(Outcome { report, trajectory })
}

/// Whether an error comes from the configuration rather than from a run.
pub fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Parse { .. } | Error::Validation(_))
}
