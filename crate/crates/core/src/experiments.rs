//! Scripted experiments: barrier growth of a pinned disk, gradient bounds on an
//! expanding region, flattening of a perturbed slice, rescaled convergence to the
//! flat slicing and ordering of two solutions.

use serde::Serialize;

use crate::discrete::{interpolate, Field, Grid, GridMode};
use crate::flow::{margins, run, BcKind, FlowConfig, GraphState, Trajectory};
use crate::oracles::tol_grid;
use crate::{Error, Result};

/// Level that `w(0,s)` has to exceed in the barrier run.
pub const CROSSING_LEVEL: f64 = 1.0;

/// Samples per unit of `ρ/n` in the time window of a rescaled box.
const WINDOW_SAMPLES: usize = 8;

fn failure_text(traj: &Trajectory) -> Option<String> {
    traj.failure.as_ref().map(|e| e.to_string())
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, f64::max)
}

/// `v` at every node from one-sided/central first differences.
pub fn v_values(u: &Field) -> Vec<f64> {
    margins(u).into_iter().map(|m| 1.0 / m.max(0.0).sqrt()).collect()
}

/// Least-squares slope of `ys` against `xs`; zero for fewer than two points.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslationSlack {
    pub s: f64,
    /// `min_x w(x,1+s) - w(e^c x, s) - c` over `|x| ≤ e^{-c}(R_2 - 1)`.
    pub slack: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarrierResult {
    pub radius: f64,
    pub dimension: usize,
    pub spacing: f64,
    pub tolerance: f64,
    pub s: Vec<f64>,
    pub w0: Vec<f64>,
    /// `n s`, the flat-slice upper barrier started at height zero.
    pub bound: Vec<f64>,
    pub monotone: bool,
    /// Largest `w(x,s) - n s` over all snapshots and nodes.
    pub max_bound_excess: f64,
    pub min_height: f64,
    pub within_bounds: bool,
    /// First snapshot time with `w(0,s) > CROSSING_LEVEL`.
    pub crossing: Option<f64>,
    /// `w(0,1)`, when the run reaches `s = 1`.
    pub c: Option<f64>,
    /// Whether `e^c (R_2 - 1) ≥ R_2`, the size condition for the translation step.
    pub translation_condition: Option<bool>,
    pub translation: Vec<TranslationSlack>,
    pub min_translation_slack: Option<f64>,
    pub end_s: f64,
    pub steps: usize,
    pub failure: Option<String>,
}

impl BarrierResult {
    pub fn translation_ok(&self) -> bool {
        matches!(self.min_translation_slack, Some(m) if m >= -self.tolerance)
    }

    pub fn pass(&self) -> bool {
        self.monotone && self.within_bounds && self.crossing.is_some() && self.translation_ok()
    }
}

/// Pinned disk `u ≡ 0` on a radial grid of radius `R_2 = grid.extent`.
///
/// Snapshot times should include `s = 1` and the shifted times `1 + s` for the
/// translation check to avoid interpolation in time; `snapshot_interval = 1/k` does
/// that.
pub fn barrier_run(grid: &Grid, config: &FlowConfig) -> Result<BarrierResult> {
    if grid.mode != GridMode::Radial {
        return Err(Error::ModeUnsupported("the barrier run needs a radial grid".into()));
    }
    let n = grid.dimension as f64;
    let r2 = grid.extent;
    let h = grid.spacing();
    let tol = tol_grid(h, 1.0);
    let state = GraphState::initial(Field::constant(*grid, 0.0), BcKind::Pinned)?;
    let traj = run(&state, config)?;

    let s: Vec<f64> = traj.snapshots.iter().map(|st| st.s).collect();
    let w0: Vec<f64> = traj.snapshots.iter().map(|st| st.u.values()[0]).collect();
    let bound: Vec<f64> = s.iter().map(|s| n * s).collect();
    let monotone = w0.windows(2).all(|w| w[1] > w[0]);
    let mut max_excess = f64::NEG_INFINITY;
    let mut min_height = f64::INFINITY;
    for st in &traj.snapshots {
        for &val in st.u.values() {
            max_excess = max_excess.max(val - n * st.s);
            min_height = min_height.min(val);
        }
    }
    let within_bounds = max_excess <= tol && min_height >= -tol;
    let crossing = s
        .iter()
        .zip(&w0)
        .find(|(_, &w)| w > CROSSING_LEVEL)
        .map(|(&s, _)| s);

    let (_, end) = traj.span();
    let eps = 1e-12 * (1.0 + end);
    let c = traj.values_at(1.0).map(|v| v[0]);
    let mut translation = Vec::new();
    if let Some(c) = c {
        let shrink = (-c).exp() * (r2 - 1.0);
        let grow = c.exp();
        for st in &traj.snapshots {
            if st.s + 1.0 > end + eps {
                break;
            }
            let later = traj.values_at(st.s + 1.0).expect("inside span");
            let mut worst = f64::INFINITY;
            let mut count = 0;
            for j in 0..grid.resolution {
                let rho = j as f64 * h;
                if rho > shrink {
                    break;
                }
                let mut target = vec![0.0; grid.dimension];
                target[0] = (grow * rho).min(r2);
                let earlier = interpolate(&st.u, &target)?;
                worst = worst.min(later[j] - earlier - c);
                count += 1;
            }
            translation.push(TranslationSlack {
                s: st.s,
                slack: worst,
                nodes: count,
            });
        }
    }
    let min_translation_slack = translation
        .iter()
        .map(|t| t.slack)
        .reduce(f64::min);
    Ok(BarrierResult {
        radius: r2,
        dimension: grid.dimension,
        spacing: h,
        tolerance: tol,
        s,
        w0,
        bound,
        monotone,
        max_bound_excess: max_excess,
        min_height,
        within_bounds,
        crossing,
        c,
        translation_condition: c.map(|c| c.exp() * (r2 - 1.0) >= r2),
        translation,
        min_translation_slack,
        end_s: end,
        steps: traj.total_steps(),
        failure: failure_text(&traj),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientBoundResult {
    pub alpha: f64,
    pub radius: f64,
    pub s: Vec<f64>,
    /// `sup v` over nodes of `D_{α,R/2}`; `None` when the region holds no node.
    pub sup_v: Vec<Option<f64>>,
    pub region_nodes: Vec<usize>,
    /// Least-squares slope of `sup v` over the final third of the run.
    pub final_slope: f64,
    pub bounded: bool,
    pub steps: usize,
    pub failure: Option<String>,
}

/// Whether the graph point over node `k` lies in `D_{α,R} = {e^{αt}|x|^2 ≤ R}`.
pub fn in_cutoff_region(grid: &Grid, k: usize, u: f64, alpha: f64, r: f64) -> bool {
    let rho = grid.node_radius(k);
    (alpha * u).exp() * rho * rho <= r
}

/// Tracks `sup v` over the moving region `D_{α,R/2}` along the flow.
pub fn gradient_bound_run(
    state: &GraphState,
    alpha: f64,
    r: f64,
    config: &FlowConfig,
) -> Result<GradientBoundResult> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Validation(format!("alpha ∈ (0,2) violated: {alpha}")));
    }
    if !(r > 0.0) {
        return Err(Error::Validation(format!("R > 0 violated: {r}")));
    }
    let traj = run(state, config)?;
    let grid = *traj.grid();
    let mut s = Vec::new();
    let mut sup_v = Vec::new();
    let mut region_nodes = Vec::new();
    for st in &traj.snapshots {
        let v = v_values(&st.u);
        let vals = st.u.values();
        let nodes: Vec<usize> = grid
            .interior_nodes()
            .filter(|&k| in_cutoff_region(&grid, k, vals[k], alpha, r / 2.0))
            .collect();
        s.push(st.s);
        region_nodes.push(nodes.len());
        sup_v.push(if nodes.is_empty() {
            None
        } else {
            Some(max_of(nodes.iter().map(|&k| v[k])))
        });
    }
    let start = s.len() - s.len().div_ceil(3);
    let (xs, ys): (Vec<f64>, Vec<f64>) = s[start..]
        .iter()
        .zip(&sup_v[start..])
        .filter_map(|(&s, v)| v.map(|v| (s, v)))
        .unzip();
    let final_slope = slope(&xs, &ys);
    Ok(GradientBoundResult {
        alpha,
        radius: r,
        s,
        sup_v,
        region_nodes,
        final_slope,
        bounded: final_slope <= 1e-9,
        steps: traj.total_steps(),
        failure: failure_text(&traj),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlatnessResult {
    pub theta: f64,
    pub s: Vec<f64>,
    /// `sup (v - 1)` over the inner half-region.
    pub sup_v_minus_one: Vec<f64>,
    /// `sup |u - mean u|` over the inner half-region.
    pub sup_deviation: Vec<f64>,
    /// First time with `sup (v - 1) ≤ θ`, linearly interpolated between snapshots;
    /// `None` when the run ends first.
    pub flat_at: Option<f64>,
    pub eventually_decreasing: bool,
    pub steps: usize,
    pub failure: Option<String>,
}

impl FlatnessResult {
    pub fn reached(&self) -> bool {
        self.flat_at.is_some()
    }
}

/// Nodes with `|x| ≤ extent / 2`.
pub fn inner_half_nodes(grid: &Grid) -> Vec<usize> {
    (0..grid.node_count())
        .filter(|&k| grid.node_radius(k) <= 0.5 * grid.extent + 1e-12)
        .collect()
}

/// Flow with slicing boundary data until `sup (v - 1) ≤ θ` on the inner half-region.
/// The run continues to `s_end` so the tail of the series can be inspected.
pub fn flatness_run(state: &GraphState, theta: f64, config: &FlowConfig) -> Result<FlatnessResult> {
    if state.bc.kind() != BcKind::Slicing {
        return Err(Error::Validation("flatness runs need the slicing boundary condition".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::Validation(format!("theta > 0 violated: {theta}")));
    }
    let traj = run(state, config)?;
    Ok(flatness_from_trajectory(&traj, theta))
}

pub fn flatness_from_trajectory(traj: &Trajectory, theta: f64) -> FlatnessResult {
    let inner = inner_half_nodes(traj.grid());
    let mut s = Vec::new();
    let mut sup_v1 = Vec::new();
    let mut sup_dev = Vec::new();
    for st in &traj.snapshots {
        let v = v_values(&st.u);
        let vals = st.u.values();
        let mean = inner.iter().map(|&k| vals[k]).sum::<f64>() / inner.len() as f64;
        s.push(st.s);
        sup_v1.push(max_of(inner.iter().map(|&k| v[k] - 1.0)).max(0.0));
        sup_dev.push(max_of(inner.iter().map(|&k| (vals[k] - mean).abs())));
    }
    let flat_at = match sup_v1.iter().position(|&x| x <= theta) {
        Some(0) => Some(s[0]),
        Some(j) => {
            let (a, b) = (sup_v1[j - 1], sup_v1[j]);
            let w = (a - theta) / (a - b);
            Some(s[j - 1] + w * (s[j] - s[j - 1]))
        }
        None => None,
    };
    let start = s.len() - s.len().div_ceil(3);
    let eventually_decreasing = sup_v1[start..].windows(2).all(|w| w[1] <= w[0] + 1e-14);
    FlatnessResult {
        theta,
        s,
        sup_v_minus_one: sup_v1,
        sup_deviation: sup_dev,
        flat_at,
        eventually_decreasing,
        steps: traj.total_steps(),
        failure: failure_text(traj),
    }
}

/// `u^λ(y,s) = u(e^{-a} y, s + λ) - a` with `a = u(0,λ)`, sampled on a grid of
/// radius `ρ` at times `s ∈ [-ρ/n, ρ/n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaledFlow {
    pub lambda: f64,
    pub shift: f64,
    pub rho: f64,
    pub times: Vec<f64>,
    pub u: Vec<Field>,
    /// `v` at the pulled-back points, which the isometry leaves unchanged.
    pub v: Vec<Field>,
}

fn origin_value(u: &Field) -> Result<f64> {
    interpolate(u, &vec![0.0; u.grid().dimension])
}

pub fn rescale_trajectory(traj: &Trajectory, lambda: f64, rho: f64) -> Result<RescaledFlow> {
    if !(rho > 0.0) {
        return Err(Error::Validation(format!("rho > 0 violated: {rho}")));
    }
    let grid = *traj.grid();
    let n = grid.dimension as f64;
    let half = rho / n;
    let (lo, hi) = traj.span();
    let eps = 1e-12 * (1.0 + hi.abs());
    if lambda - half < lo - eps || lambda + half > hi + eps {
        return Err(Error::SpanTooShort {
            needed_lo: lambda - half,
            needed_hi: lambda + half,
            have_lo: lo,
            have_hi: hi,
        });
    }
    let at = |s: f64| -> Field {
        let vals = traj.values_at(s.clamp(lo, hi)).expect("inside span");
        Field::new(grid, vals).expect("trajectory grid")
    };
    let shift = origin_value(&at(lambda))?;
    let k = (-shift).exp();
    if k * rho > grid.extent * (1.0 + 1e-12) {
        return Err(Error::RescaleOutOfDomain { lambda });
    }
    let target = Grid::new(grid.dimension, grid.mode, rho, grid.resolution)?;
    let count = 2 * WINDOW_SAMPLES + 1;
    let mut times = Vec::with_capacity(count);
    let mut us = Vec::with_capacity(count);
    let mut vs = Vec::with_capacity(count);
    for j in 0..count {
        let ds = half * (j as f64 - WINDOW_SAMPLES as f64) / WINDOW_SAMPLES as f64;
        let src = at(lambda + ds);
        let vsrc = Field::new(grid, v_values(&src))?;
        let mut uvals = Vec::with_capacity(target.node_count());
        let mut vvals = Vec::with_capacity(target.node_count());
        for idx in 0..target.node_count() {
            let y = target.node_coords(idx);
            let pulled: Vec<f64> = y.iter().map(|c| c * k).collect();
            uvals.push(interpolate(&src, &pulled)? - shift);
            vvals.push(interpolate(&vsrc, &pulled)?);
        }
        times.push(ds);
        us.push(Field::new(target, uvals)?);
        vs.push(Field::new(target, vvals)?);
    }
    Ok(RescaledFlow {
        lambda,
        shift,
        rho,
        times,
        u: us,
        v: vs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescaleRow {
    pub lambda: f64,
    /// `sup |u^λ - n s|` over sample points inside `E_ρ`.
    pub sup_u_err: f64,
    /// `sup (v - 1)` over the same points.
    pub sup_v_err: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescaleTable {
    pub rho: f64,
    pub rows: Vec<RescaleRow>,
    pub decreasing: bool,
}

/// Sup norms of `u^λ - n s` and `v - 1` on `E_ρ = {|x| ≤ ρ, |t| ≤ ρ}`.
pub fn rescale_row(flow: &RescaledFlow) -> RescaleRow {
    let n = flow.u[0].grid().dimension as f64;
    let (mut su, mut sv, mut points) = (0.0f64, 0.0f64, 0);
    for ((s, u), v) in flow.times.iter().zip(&flow.u).zip(&flow.v) {
        for (uk, vk) in u.values().iter().zip(v.values()) {
            if uk.abs() > flow.rho {
                continue;
            }
            su = su.max((uk - n * s).abs());
            sv = sv.max(vk - 1.0);
            points += 1;
        }
    }
    RescaleRow {
        lambda: flow.lambda,
        sup_u_err: su,
        sup_v_err: sv,
        points,
    }
}

pub fn convergence_table(traj: &Trajectory, lambdas: &[f64], rho: f64) -> Result<RescaleTable> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("lambdas must be non-empty and strictly increasing".into()));
    }
    let rows = lambdas
        .iter()
        .map(|&l| rescale_trajectory(traj, l, rho).map(|f| rescale_row(&f)))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = rows
        .windows(2)
        .all(|w| w[1].sup_u_err < w[0].sup_u_err && w[1].sup_v_err < w[0].sup_v_err);
    Ok(RescaleTable { rho, rows, decreasing })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonResult {
    pub tolerance: f64,
    pub s: Vec<f64>,
    /// `max_x (u - ũ)` at each matched time; ordering holds while this is `≤ tolerance`.
    pub max_excess: Vec<f64>,
    pub ordered: bool,
    pub steps: [usize; 2],
    pub failure: Option<String>,
}

/// Runs both data with the same configuration and compares them at the snapshot
/// times of the lower run.
pub fn comparison_run(lower: &GraphState, upper: &GraphState, config: &FlowConfig) -> Result<ComparisonResult> {
    if lower.grid() != upper.grid() {
        return Err(Error::InvalidGrid("compared states live on different grids".into()));
    }
    if lower.bc.kind() != upper.bc.kind() {
        return Err(Error::Validation("compared states need the same boundary condition kind".into()));
    }
    if lower
        .u
        .values()
        .iter()
        .zip(upper.u.values())
        .any(|(a, b)| a > b)
    {
        return Err(Error::Validation("initial data are not ordered".into()));
    }
    let grid = *lower.grid();
    let tol = tol_grid(grid.spacing(), 1.0);
    let a = run(lower, config)?;
    let b = run(upper, config)?;
    let (lo, hi) = b.span();
    let mut s = Vec::new();
    let mut excess = Vec::new();
    for st in &a.snapshots {
        if st.s < lo || st.s > hi {
            continue;
        }
        let other = b.values_at(st.s).expect("inside span");
        s.push(st.s);
        excess.push(max_of(st.u.values().iter().zip(&other).map(|(x, y)| x - y)));
    }
    let failure = match (failure_text(&a), failure_text(&b)) {
        (None, None) => None,
        (x, y) => Some(format!("lower: {x:?}; upper: {y:?}")),
    };
    Ok(ComparisonResult {
        tolerance: tol,
        ordered: excess.iter().all(|&e| e <= tol),
        s,
        max_excess: excess,
        steps: [a.total_steps(), b.total_steps()],
        failure,
    })
}
