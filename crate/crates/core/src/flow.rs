//! Explicit time stepping of the graphical flow.
//!
//! A graph `t = u(x, s)` moving by mean curvature satisfies `∂_s u = H / v` at fixed
//! `x`; following a point along the normal the height grows at rate `H v`. The
//! right-hand side is evaluated with [`flow_speed`] from central-difference jets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{first_derivative, Field, Grid, GridMode};
use crate::dsgeom::{flow_speed, MARGIN_FLOOR};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcKind {
    Pinned,
    Slicing,
    Frozen,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// `u = value` on the boundary for all `s`.
    Pinned { value: f64 },
    /// `u = u_0 + n s` on the boundary; `base` lists `u_0` over `grid.boundary_nodes()`.
    Slicing { base: Vec<f64> },
    /// Boundary held at its initial values.
    Frozen { base: Vec<f64> },
}

impl BoundaryCondition {
    pub fn kind(&self) -> BcKind {
        match self {
            Self::Pinned { .. } => BcKind::Pinned,
            Self::Slicing { .. } => BcKind::Slicing,
            Self::Frozen { .. } => BcKind::Frozen,
        }
    }

    /// Builds the condition from the initial field's boundary values.
    pub fn from_initial(kind: BcKind, u: &Field) -> Result<Self> {
        let base: Vec<f64> = u
            .grid()
            .boundary_nodes()
            .into_iter()
            .map(|k| u.values()[k])
            .collect();
        match kind {
            BcKind::Pinned => {
                let value = base[0];
                if base.iter().any(|b| (b - value).abs() > 1e-12 * (1.0 + value.abs())) {
                    return Err(Error::Validation(
                        "pinned boundary requires constant initial boundary values".into(),
                    ));
                }
                Ok(Self::Pinned { value })
            }
            BcKind::Slicing => Ok(Self::Slicing { base }),
            BcKind::Frozen => Ok(Self::Frozen { base }),
        }
    }

    pub fn apply(&self, grid: &Grid, values: &mut [f64], s: f64) {
        let nodes = grid.boundary_nodes();
        let n = grid.dimension as f64;
        match self {
            Self::Pinned { value } => nodes.iter().for_each(|&k| values[k] = *value),
            Self::Slicing { base } => nodes
                .iter()
                .zip(base)
                .for_each(|(&k, b)| values[k] = b + n * s),
            Self::Frozen { base } => nodes.iter().zip(base).for_each(|(&k, b)| values[k] = *b),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphState {
    pub u: Field,
    pub s: f64,
    pub bc: BoundaryCondition,
}

impl GraphState {
    /// Validates that every interior node is spacelike beyond `MARGIN_FLOOR`.
    pub fn new(u: Field, s: f64, bc: BoundaryCondition) -> Result<Self> {
        let state = Self { u, s, bc };
        let m = margins(&state.u);
        let grid = *state.u.grid();
        if let Some(k) = grid.interior_nodes().find(|&k| !(m[k] > MARGIN_FLOOR)) {
            return Err(Error::NonSpacelike {
                node: Some(k),
                margin: m[k],
                floor: MARGIN_FLOOR,
            });
        }
        Ok(state)
    }

    /// Initial state with the boundary condition read off the field itself.
    pub fn initial(u: Field, kind: BcKind) -> Result<Self> {
        let bc = BoundaryCondition::from_initial(kind, &u)?;
        Self::new(u, 0.0, bc)
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk2,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub integrator: Integrator,
    pub cfl_safety: f64,
    pub s_end: f64,
    pub max_steps: usize,
    pub snapshot_stride: usize,
    pub margin_floor: f64,
    pub u_cap: f64,
    /// Uniform step instead of the adaptive one; must respect the stability limit.
    pub fixed_dt: Option<f64>,
    /// Record snapshots at multiples of this interval (steps are shortened to land on
    /// them) instead of every `snapshot_stride` steps.
    pub snapshot_interval: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::Rk2,
            cfl_safety: 0.25,
            s_end: 1.0,
            max_steps: 10_000_000,
            snapshot_stride: 100,
            margin_floor: MARGIN_FLOOR,
            u_cap: 1e3,
            fixed_dt: None,
            snapshot_interval: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_end > 0.0) {
            return Err(Error::Validation(format!("s_end > 0 violated: {}", self.s_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Validation(format!(
                "cfl_safety ∈ (0,1] violated: {}",
                self.cfl_safety
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Validation("snapshot_stride >= 1 violated".into()));
        }
        if !(self.margin_floor > 0.0 && self.margin_floor < 1.0) {
            return Err(Error::Validation("margin_floor ∈ (0,1) violated".into()));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) {
                return Err(Error::Validation("fixed_dt > 0 violated".into()));
            }
        }
        if let Some(iv) = self.snapshot_interval {
            if !(iv > 0.0) {
                return Err(Error::Validation("snapshot_interval > 0 violated".into()));
            }
        }
        Ok(())
    }
}

/// Spacelike margin `1 - e^{-2u}|Du|^2` at every node.
pub fn margins(u: &Field) -> Vec<f64> {
    let grid = u.grid();
    let grads: Vec<Vec<f64>> = (0..grid.axes())
        .map(|a| first_derivative(grid, u.values(), a))
        .collect();
    u.values()
        .iter()
        .enumerate()
        .map(|(k, &uk)| {
            let q: f64 = grads.iter().map(|g| g[k] * g[k]).sum();
            1.0 - (-2.0 * uk).exp() * q
        })
        .collect()
}

/// `cfl · h^2 · min_nodes e^{2u} / (2 n v^2)`.
pub fn stable_dt(state: &GraphState, cfl_safety: f64) -> f64 {
    let grid = state.grid();
    let h = grid.spacing();
    // e^{2u} m = e^{2u} - |Du|^2
    let min = match grid.mode {
        GridMode::Radial => {
            let u = state.u.values();
            let nn = u.len();
            (0..nn)
                .map(|k| {
                    let d1 = match k {
                        0 => 0.0,
                        k if k == nn - 1 => (3.0 * u[k] - 4.0 * u[k - 1] + u[k - 2]) / (2.0 * h),
                        k => (u[k + 1] - u[k - 1]) / (2.0 * h),
                    };
                    ((2.0 * u[k]).exp() - d1 * d1).max(0.0)
                })
                .fold(f64::INFINITY, f64::min)
        }
        GridMode::Cartesian => {
            let m = margins(&state.u);
            state
                .u
                .values()
                .iter()
                .zip(&m)
                .map(|(&uk, &mk)| (2.0 * uk).exp() * mk.max(0.0))
                .fold(f64::INFINITY, f64::min)
        }
    };
    cfl_safety * h * h * min / (2.0 * grid.dimension as f64)
}

/// `∂_s u = H / v` at interior nodes; boundary entries are zero.
pub fn speed(u: &Field, floor: f64) -> Result<Vec<f64>> {
    let grid = *u.grid();
    match grid.mode {
        GridMode::Radial => speed_radial(&grid, u.values(), floor),
        GridMode::Cartesian => speed_cartesian(&grid, u.values(), floor),
    }
}

fn non_spacelike(node: usize, u: f64, du2: f64, floor: f64) -> Error {
    Error::NonSpacelike {
        node: Some(node),
        margin: 1.0 - (-2.0 * u).exp() * du2,
        floor,
    }
}

fn speed_radial(grid: &Grid, u: &[f64], floor: f64) -> Result<Vec<f64>> {
    speed_radial_bounded(grid, u, floor).map(|(out, _)| out)
}

/// Radial speed together with `min e^{2u} m` over all nodes, sharing the exponentials.
fn speed_radial_bounded(grid: &Grid, u: &[f64], floor: f64) -> Result<(Vec<f64>, f64)> {
    // same expression as `flow_speed` with the radial Hessian diag(u'', u'/ρ, …)
    let n = grid.dimension as f64;
    let h = grid.spacing();
    let nn = grid.resolution;
    let mut out = vec![0.0; nn];
    let mut bound = f64::INFINITY;
    for k in 0..nn - 1 {
        let (d1, d2, tang) = if k == 0 {
            let d2 = 2.0 * (u[1] - u[0]) / (h * h);
            (0.0, d2, d2)
        } else {
            let d1 = (u[k + 1] - u[k - 1]) / (2.0 * h);
            let d2 = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (h * h);
            (d1, d2, d1 / (k as f64 * h))
        };
        let e = (-2.0 * u[k]).exp();
        let q = d1 * d1;
        let p = e * q;
        let m = 1.0 - p;
        if !(m > floor) {
            return Err(non_spacelike(k, u[k], q, floor));
        }
        bound = bound.min(m / e);
        let lap = d2 + (n - 1.0) * tang;
        out[k] = n + e * lap + (e * e * q * d2 - p) / m;
    }
    let k = nn - 1;
    let d1 = (3.0 * u[k] - 4.0 * u[k - 1] + u[k - 2]) / (2.0 * h);
    bound = bound.min(((2.0 * u[k]).exp() - d1 * d1).max(0.0));
    Ok((out, bound))
}

fn speed_cartesian(grid: &Grid, u: &[f64], floor: f64) -> Result<Vec<f64>> {
    let n = grid.dimension;
    let h = grid.spacing();
    let strides: Vec<usize> = (0..n).map(|a| grid.stride(a)).collect();
    let count = grid.node_count();
    let eval = |k: usize| -> Result<f64> {
        if grid.is_boundary(k) {
            return Ok(0.0);
        }
        let mut du = [0.0; 8];
        let mut d2 = [[0.0; 8]; 8];
        for i in 0..n {
            let si = strides[i];
            du[i] = (u[k + si] - u[k - si]) / (2.0 * h);
            d2[i][i] = (u[k + si] - 2.0 * u[k] + u[k - si]) / (h * h);
            for j in (i + 1)..n {
                let sj = strides[j];
                let m = (u[k + si + sj] - u[k + si - sj] - u[k - si + sj] + u[k - si - sj])
                    / (4.0 * h * h);
                d2[i][j] = m;
                d2[j][i] = m;
            }
        }
        flow_speed(u[k], &du[..n], |i, j| d2[i][j], floor).ok_or_else(|| {
            let q: f64 = du[..n].iter().map(|d| d * d).sum();
            non_spacelike(k, u[k], q, floor)
        })
    };
    if count >= 4096 {
        (0..count).into_par_iter().map(eval).collect()
    } else {
        (0..count).map(eval).collect()
    }
}

fn check_cap(values: &[f64], cap: f64) -> Result<()> {
    if let Some((node, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.abs() <= cap))
    {
        return Err(Error::Blowup {
            value: v.abs(),
            cap,
            node,
        });
    }
    Ok(())
}

fn axpy(base: &[f64], dt: f64, k: &[f64]) -> Vec<f64> {
    base.iter().zip(k).map(|(b, d)| b + dt * d).collect()
}

/// One step of length `dt` with boundary values re-imposed after every stage.
pub fn step_with_dt(state: &GraphState, config: &FlowConfig, dt: f64) -> Result<GraphState> {
    let k1 = speed(&state.u, config.margin_floor)?;
    step_from(state, config, dt, k1)
}

fn step_from(state: &GraphState, config: &FlowConfig, dt: f64, k1: Vec<f64>) -> Result<GraphState> {
    let grid = *state.grid();
    let floor = config.margin_floor;
    let s0 = state.s;
    let u0 = state.u.values();
    let stage = |vals: Vec<f64>, s: f64| -> Result<Field> {
        let mut vals = vals;
        state.bc.apply(&grid, &mut vals, s);
        check_cap(&vals, config.u_cap)?;
        Ok(Field::from_raw(grid, vals))
    };
    let f = |u: &Field| speed(u, floor);
    let new = match config.integrator {
        Integrator::Euler => stage(axpy(u0, dt, &k1), s0 + dt)?,
        Integrator::Rk2 => {
            let u1 = stage(axpy(u0, dt, &k1), s0 + dt)?;
            let k2 = f(&u1)?;
            let vals = u0
                .iter()
                .zip(k1.iter().zip(&k2))
                .map(|(u, (a, b))| u + 0.5 * dt * (a + b))
                .collect();
            stage(vals, s0 + dt)?
        }
        Integrator::Rk4 => {
            let u2 = stage(axpy(u0, 0.5 * dt, &k1), s0 + 0.5 * dt)?;
            let k2 = f(&u2)?;
            let u3 = stage(axpy(u0, 0.5 * dt, &k2), s0 + 0.5 * dt)?;
            let k3 = f(&u3)?;
            let u4 = stage(axpy(u0, dt, &k3), s0 + dt)?;
            let k4 = f(&u4)?;
            let vals = (0..u0.len())
                .map(|i| u0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
            stage(vals, s0 + dt)?
        }
    };
    Ok(GraphState {
        u: new,
        s: s0 + dt,
        bc: state.bc.clone(),
    })
}

/// Step length for the next step: the fixed step when configured (checked against
/// the unsafe stability limit) or the adaptive `stable_dt`.
pub fn next_dt(state: &GraphState, config: &FlowConfig) -> Result<f64> {
    match config.fixed_dt {
        Some(dt) => {
            let limit = stable_dt(state, 1.0);
            if dt > limit {
                return Err(Error::UnstableStep { dt, limit });
            }
            Ok(dt)
        }
        None => Ok(stable_dt(state, config.cfl_safety)),
    }
}

pub fn step(state: &GraphState, config: &FlowConfig) -> Result<GraphState> {
    let dt = next_dt(state, config)?;
    step_with_dt(state, config, dt)
}

/// Adaptive step and first-stage speed; on radial grids both come from one pass.
fn dt_and_speed(state: &GraphState, config: &FlowConfig) -> Result<(f64, Vec<f64>)> {
    let grid = state.grid();
    if grid.mode == GridMode::Radial && config.fixed_dt.is_none() {
        let (k1, bound) = speed_radial_bounded(grid, state.u.values(), config.margin_floor)?;
        let h = grid.spacing();
        let dt = config.cfl_safety * h * h * bound / (2.0 * grid.dimension as f64);
        return Ok((dt, k1));
    }
    let dt = next_dt(state, config)?;
    Ok((dt, speed(&state.u, config.margin_floor)?))
}

/// Three states `s, s + dt, s + 2 dt` separated by uniform steps.
pub fn advance_window(state: &GraphState, config: &FlowConfig, dt: f64) -> Result<[GraphState; 3]> {
    let limit = stable_dt(state, 1.0);
    if dt > limit {
        return Err(Error::UnstableStep { dt, limit });
    }
    let b = step_with_dt(state, config, dt)?;
    let c = step_with_dt(&b, config, dt)?;
    Ok([state.clone(), b, c])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDiagnostics {
    pub min_margin: f64,
    pub max_v: f64,
    pub min_h: f64,
    pub max_h: f64,
    pub mean_convexity_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanConvexityReport {
    pub tolerance: f64,
    pub count: usize,
    pub locations: Vec<usize>,
    pub min_h: f64,
}

pub const MEAN_CONVEXITY_TOL: f64 = 1e-8;

/// Interior nodes with `H < -1e-8`. Diagnostic only.
pub fn mean_convexity_report(state: &GraphState) -> Result<MeanConvexityReport> {
    let (_, h) = interior_v_and_h(state)?;
    let grid = state.grid();
    let mut locations = Vec::new();
    let mut min_h = f64::INFINITY;
    for k in grid.interior_nodes() {
        min_h = min_h.min(h[k]);
        if h[k] < -MEAN_CONVEXITY_TOL {
            locations.push(k);
        }
    }
    Ok(MeanConvexityReport {
        tolerance: MEAN_CONVEXITY_TOL,
        count: locations.len(),
        locations,
        min_h,
    })
}

fn interior_v_and_h(state: &GraphState) -> Result<(Vec<f64>, Vec<f64>)> {
    let sp = speed(&state.u, 0.0)?;
    let m = margins(&state.u);
    let v: Vec<f64> = m.iter().map(|mk| 1.0 / mk.max(f64::MIN_POSITIVE).sqrt()).collect();
    let h = sp.iter().zip(&v).map(|(a, b)| a * b).collect();
    Ok((v, h))
}

pub fn diagnostics(state: &GraphState) -> Result<SnapshotDiagnostics> {
    let (v, h) = interior_v_and_h(state)?;
    let m = margins(&state.u);
    let grid = state.grid();
    let mut d = SnapshotDiagnostics {
        min_margin: f64::INFINITY,
        max_v: 0.0,
        min_h: f64::INFINITY,
        max_h: f64::NEG_INFINITY,
        mean_convexity_violations: 0,
    };
    for k in grid.interior_nodes() {
        d.min_margin = d.min_margin.min(m[k]);
        d.max_v = d.max_v.max(v[k]);
        d.min_h = d.min_h.min(h[k]);
        d.max_h = d.max_h.max(h[k]);
        if h[k] < -MEAN_CONVEXITY_TOL {
            d.mean_convexity_violations += 1;
        }
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<GraphState>,
    /// Step index of each snapshot.
    pub steps: Vec<usize>,
    pub diagnostics: Vec<SnapshotDiagnostics>,
    pub dt_history: Vec<f64>,
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn last(&self) -> &GraphState {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn span(&self) -> (f64, f64) {
        (self.snapshots[0].s, self.last().s)
    }

    pub fn total_steps(&self) -> usize {
        self.dt_history.len()
    }

    fn push(&mut self, state: GraphState, step: usize) -> Result<()> {
        self.diagnostics.push(diagnostics(&state)?);
        self.snapshots.push(state);
        self.steps.push(step);
        Ok(())
    }

    /// Linear interpolation in `s` of the node values; `None` outside the span.
    pub fn values_at(&self, s: f64) -> Option<Vec<f64>> {
        let (lo, hi) = self.span();
        let tol = 1e-12 * (1.0 + hi.abs());
        if s < lo - tol || s > hi + tol {
            return None;
        }
        let s = s.clamp(lo, hi);
        let j = self.snapshots.partition_point(|st| st.s <= s);
        if j == 0 {
            return Some(self.snapshots[0].u.values().to_vec());
        }
        if j >= self.snapshots.len() {
            return Some(self.last().u.values().to_vec());
        }
        let (a, b) = (&self.snapshots[j - 1], &self.snapshots[j]);
        let w = (s - a.s) / (b.s - a.s);
        Some(
            a.u.values()
                .iter()
                .zip(b.u.values())
                .map(|(x, y)| (1.0 - w) * x + w * y)
                .collect(),
        )
    }
}

/// Steps until `s_end` or `max_steps`, recording snapshots per `snapshot_interval`
/// (or every `snapshot_stride`-th step) and the final state. A failing step ends the
/// run with the partial trajectory and the error recorded in `failure`.
pub fn run(state: &GraphState, config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut traj = Trajectory {
        snapshots: Vec::new(),
        steps: Vec::new(),
        diagnostics: Vec::new(),
        dt_history: Vec::new(),
        failure: None,
    };
    traj.push(state.clone(), 0)?;
    let mut current = state.clone();
    let mut count = 0;
    let end = config.s_end;
    let start = state.s;
    let mut mark = 1usize;
    let eps = 1e-12 * (1.0 + end.abs());
    while current.s < end - eps && count < config.max_steps {
        let target = match config.snapshot_interval {
            Some(iv) => (start + mark as f64 * iv).min(end),
            None => end,
        };
        let (dt, k1) = match dt_and_speed(&current, config) {
            Ok((dt, k1)) => (dt.min(target - current.s), k1),
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        };
        match step_from(&current, config, dt, k1) {
            Ok(mut next) => {
                if (next.s - target).abs() <= eps {
                    next.s = target;
                }
                current = next;
                count += 1;
                traj.dt_history.push(dt);
                let record = match config.snapshot_interval {
                    Some(_) => {
                        let hit = current.s == target;
                        if hit {
                            mark += 1;
                        }
                        hit
                    }
                    None => count % config.snapshot_stride == 0,
                };
                if record {
                    traj.push(current.clone(), count)?;
                }
            }
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        }
    }
    if *traj.steps.last().unwrap() != count {
        traj.push(current, count)?;
    }
    Ok(traj)
}
