//! Runtime checks of the geometric identities and inequalities satisfied by the flow.
//!
//! Pointwise identities are evaluated on exact 2-jets (random or taken from a state)
//! and must hold to `1e-10` relative error. Identities that involve discrete operators
//! are reported with residual norms and, given a coarse/fine pair, an observed
//! refinement order. Inequalities report the worst signed slack against
//! `tol_grid = 10 h^2 · scale`, where `scale` is the largest magnitude among the
//! terms being compared.
//!
//! Time derivatives come from three consecutive states with a uniform step. The
//! solver moves the graph vertically, while the evolution equations differentiate
//! along the normal trajectory. A point following the normal moves horizontally with
//! velocity `H ν^x = H v e^{-2u} Du`, so for a field `f` on the graph
//!
//! ```text
//! d/ds f = ∂_s f|_x + H v e^{-2u} Du · Df.
//! ```
//!
//! The correction vanishes on slices, where `Du = 0`.
//!
//! Grid reports cover the nodes at least two cells from the boundary: closer in,
//! divergence-form stencils read metric coefficients built from one-sided differences
//! and lose an order.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::discrete::{
    first_derivative, geometry_field, intrinsic_grad_sq, laplace_beltrami, laplace_beltrami_coordinate,
    refinement_order, Field, GeometryField, Grid, GridMode,
};
use crate::dsgeom::{
    bartnik_slack, coordinate_laplacians_closed_form, cutoff_value_and_bounds, grad_v_sq_closed_form,
    laplacian_via_wave_operator, surface_geometry, v_gradient_closed_form, v_gradient_from_jet,
    AmbientJet, CutoffSpec, GraphSample, SurfaceGeometry, MARGIN_FLOOR,
};
use crate::error::{Error, Result};
use crate::flow::GraphState;

/// Relative tolerance for identities evaluated on exact jets.
pub const ANALYTIC_TOL: f64 = 1e-10;

/// Accepted observed order for second-order discrete operators.
pub const ORDER_WINDOW: (f64, f64) = (1.7, 2.3);

/// At most this many violating locations are kept in a report.
pub const MAX_LOCATIONS: usize = 32;

pub fn tol_grid(h: f64, scale: f64) -> f64 {
    10.0 * h * h * scale
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub name: String,
    pub linf: f64,
    pub l2: f64,
    pub nodes: usize,
    pub spacing: Option<f64>,
    pub order: Option<f64>,
    pub order_window: Option<(f64, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

impl ResidualReport {
    /// Report over a list of nonnegative residuals; passes when `linf <= tolerance`.
    pub fn from_residuals(name: &str, residuals: &[f64], tolerance: f64) -> Self {
        let linf = residuals.iter().fold(0.0, |a: f64, r| a.max(r.abs()));
        let l2 = if residuals.is_empty() {
            0.0
        } else {
            (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
        };
        Self {
            name: name.to_string(),
            linf,
            l2,
            nodes: residuals.len(),
            spacing: None,
            order: None,
            order_window: None,
            tolerance,
            pass: linf <= tolerance,
        }
    }

    fn on_grid(name: &str, grid: &Grid, residual: &[f64], tolerance: f64) -> Self {
        let interior: Vec<f64> = grid.deep_interior_nodes().map(|k| residual[k]).collect();
        let mut r = Self::from_residuals(name, &interior, tolerance);
        r.spacing = Some(grid.spacing());
        r
    }

    /// Combines a coarse/fine pair into the fine report with the observed order.
    ///
    /// Passes when the order lies in `window`, or when both residuals are below
    /// `ANALYTIC_TOL` (the exact case, where no order exists).
    pub fn refined(coarse: &Self, fine: &Self, window: (f64, f64)) -> Self {
        let mut out = fine.clone();
        out.order_window = Some(window);
        match refinement_order(coarse.linf, fine.linf) {
            Ok(p) => {
                out.order = Some(p);
                out.pass = p >= window.0 && p <= window.1;
            }
            Err(_) => {
                out.order = None;
                out.pass = coarse.linf <= ANALYTIC_TOL && fine.linf <= ANALYTIC_TOL;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    /// Minimum over nodes of the signed slack (`>= 0` when the inequality holds).
    pub worst_slack: f64,
    pub violations: usize,
    pub nodes: usize,
    /// Coordinates of up to `MAX_LOCATIONS` violating nodes.
    pub locations: Vec<Vec<f64>>,
    pub params: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityReport {
    fn on_grid(
        name: &str,
        grid: &Grid,
        slack: &[f64],
        tolerance: f64,
        params: BTreeMap<String, f64>,
    ) -> Self {
        let mut worst = f64::INFINITY;
        let mut violations = 0;
        let mut locations = Vec::new();
        let mut nodes = 0;
        for k in grid.deep_interior_nodes() {
            nodes += 1;
            let s = slack[k];
            worst = worst.min(s);
            if !(s >= -tolerance) {
                violations += 1;
                if locations.len() < MAX_LOCATIONS {
                    locations.push(grid.node_coords(k));
                }
            }
        }
        Self {
            name: name.to_string(),
            worst_slack: worst,
            violations,
            nodes,
            locations,
            params,
            tolerance,
            pass: violations == 0,
        }
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn n_of(g: &SurfaceGeometry) -> f64 {
    g.dimension() as f64
}

/// Gradient of a node-indexed field in the Cartesian components used by
/// `SurfaceGeometry::du` (radial grids yield the `ρ` component only).
fn coordinate_gradient(grid: &Grid, values: &[f64], n: usize) -> Vec<DVector<f64>> {
    let grads: Vec<Vec<f64>> = (0..grid.axes())
        .map(|a| first_derivative(grid, values, a))
        .collect();
    (0..values.len())
        .map(|k| DVector::from_fn(n, |i, _| if i < grads.len() { grads[i][k] } else { 0.0 }))
        .collect()
}

/// Pointwise residuals of `|∇t|^2 = v^2 - 1`, `|∇x_i|^2 = e^{-2t} + e^{-4t} g(ν,∂_i)^2`
/// and `g(∇x_i, ∇t) = e^{-2t} v g(∂_i, ν)` from a node's geometry.
fn gradient_identity_residual(g: &SurfaceGeometry) -> f64 {
    let n = g.dimension();
    let e = (-2.0 * g.point.t).exp();
    let gdu = &g.gamma_inv * &g.du;
    let mut worst = rel(g.du.dot(&gdu), g.v * g.v - 1.0);
    for i in 0..n {
        let c = g.nu_dot_coord(i);
        worst = worst.max(rel(g.gamma_inv[(i, i)], e + e * e * c * c));
        worst = worst.max(rel(gdu[i], e * g.v * c));
    }
    worst
}

pub fn check_gradient_identities(state: &GraphState) -> Result<ResidualReport> {
    let geom = geometry_field(&state.u, MARGIN_FLOOR)?;
    let res: Vec<f64> = geom.nodes.iter().map(gradient_identity_residual).collect();
    Ok(ResidualReport::on_grid(
        "gradient_identities",
        &geom.grid,
        &res,
        ANALYTIC_TOL,
    ))
}

/// Per-node residuals of the discrete coordinate Laplacians against the closed forms
/// and against the wave-operator route.
fn laplacian_residuals(state: &GraphState) -> Result<(Grid, Vec<f64>, Vec<f64>)> {
    let geom = geometry_field(&state.u, MARGIN_FLOOR)?;
    let grid = geom.grid;
    let n = grid.dimension;
    let axes: Vec<usize> = match grid.mode {
        GridMode::Cartesian => (0..n).collect(),
        GridMode::Radial => vec![0],
    };
    let lx: Vec<Field> = axes
        .iter()
        .map(|&a| laplace_beltrami_coordinate(&geom, a))
        .collect::<Result<_>>()?;
    let lt = laplace_beltrami(&state.u, &geom)?;
    let mut closed_res = vec![0.0; grid.node_count()];
    let mut wave_res = vec![0.0; grid.node_count()];
    for k in grid.interior_nodes() {
        let g = &geom.nodes[k];
        let (dx, dt) = coordinate_laplacians_closed_form(g);
        let mut c: f64 = (lt.values()[k] - dt).abs();
        let mut w: f64 = (lt.values()[k] - laplacian_via_wave_operator(g, &AmbientJet::time(&g.point))).abs();
        for (j, &a) in axes.iter().enumerate() {
            let d = lx[j].values()[k];
            c = c.max((d - dx[a]).abs());
            w = w.max((d - laplacian_via_wave_operator(g, &AmbientJet::coordinate(a, &g.point))).abs());
        }
        closed_res[k] = c;
        wave_res[k] = w;
    }
    Ok((grid, closed_res, wave_res))
}

/// Discrete `Δx_i` and `Δt` against the closed forms, and against the wave-operator
/// route, on a state and the same surface sampled at half the spacing.
pub fn check_coordinate_laplacians(state: &GraphState, fine: &GraphState) -> Result<Vec<ResidualReport>> {
    if *fine.grid() != state.grid().refined() {
        return Err(Error::InvalidGrid(
            "fine state must live on the refined grid".into(),
        ));
    }
    let (gc, cc, wc) = laplacian_residuals(state)?;
    let (gf, cf, wf) = laplacian_residuals(fine)?;
    let mk = |name: &str, g: &Grid, r: &[f64]| {
        let scale = 1.0;
        ResidualReport::on_grid(name, g, r, tol_grid(g.spacing(), scale))
    };
    Ok(vec![
        ResidualReport::refined(
            &mk("coordinate_laplacians", &gc, &cc),
            &mk("coordinate_laplacians", &gf, &cf),
            ORDER_WINDOW,
        ),
        ResidualReport::refined(
            &mk("coordinate_laplacians_wave_route", &gc, &wc),
            &mk("coordinate_laplacians_wave_route", &gf, &wf),
            ORDER_WINDOW,
        ),
    ])
}

fn v_gradient_residuals(state: &GraphState) -> Result<(Grid, Vec<f64>, Vec<f64>, f64)> {
    let geom = geometry_field(&state.u, MARGIN_FLOOR)?;
    let grid = geom.grid;
    let n = grid.dimension;
    let v = geom.v();
    let dv = coordinate_gradient(&grid, v.values(), n);
    let dv_sq = intrinsic_grad_sq(&v, &geom)?;
    let mut r32 = vec![0.0; grid.node_count()];
    let mut r33 = vec![0.0; grid.node_count()];
    let mut scale: f64 = 0.0;
    for k in grid.interior_nodes() {
        let g = &geom.nodes[k];
        let closed = v_gradient_closed_form(g);
        r32[k] = (&dv[k] - &closed).amax();
        let sq = grad_v_sq_closed_form(g);
        r33[k] = (dv_sq.values()[k] - sq).abs();
        scale = scale.max(closed.amax()).max(sq.abs());
    }
    Ok((grid, r32, r33, scale.max(1.0)))
}

/// Discrete `∇v` and `|∇v|^2` against their closed forms. With a refined companion
/// state the reports carry the observed order.
pub fn check_v_gradient_identity(
    state: &GraphState,
    fine: Option<&GraphState>,
) -> Result<Vec<ResidualReport>> {
    let (g, r32, r33, scale) = v_gradient_residuals(state)?;
    let tol = tol_grid(g.spacing(), scale);
    let coarse = vec![
        ResidualReport::on_grid("v_gradient", &g, &r32, tol),
        ResidualReport::on_grid("v_gradient_norm", &g, &r33, tol),
    ];
    let Some(fine) = fine else {
        return Ok(coarse);
    };
    if *fine.grid() != state.grid().refined() {
        return Err(Error::InvalidGrid(
            "fine state must live on the refined grid".into(),
        ));
    }
    let (gf, f32_, f33, scale_f) = v_gradient_residuals(fine)?;
    let tol_f = tol_grid(gf.spacing(), scale_f);
    let fine_reports = [
        ResidualReport::on_grid("v_gradient", &gf, &f32_, tol_f),
        ResidualReport::on_grid("v_gradient_norm", &gf, &f33, tol_f),
    ];
    Ok(coarse
        .iter()
        .zip(&fine_reports)
        .map(|(c, f)| ResidualReport::refined(c, f, ORDER_WINDOW))
        .collect())
}

/// Geometry of three consecutive states separated by a uniform step.
pub struct WindowGeometry {
    pub dt: f64,
    pub s: f64,
    pub geoms: [GeometryField; 3],
}

pub fn window_geometry(window: &[GraphState]) -> Result<WindowGeometry> {
    if window.len() < 3 {
        return Err(Error::WindowTooShort(format!(
            "need 3 consecutive states, got {}",
            window.len()
        )));
    }
    let w = &window[..3];
    if w.iter().any(|st| st.grid() != w[0].grid()) {
        return Err(Error::InvalidGrid("window states live on different grids".into()));
    }
    let d1 = w[1].s - w[0].s;
    let d2 = w[2].s - w[1].s;
    if !(d1 > 0.0 && d2 > 0.0) || (d1 - d2).abs() > 1e-9 * d1 {
        return Err(Error::WindowTooShort(format!(
            "window steps must be positive and uniform, got {d1:e} and {d2:e}"
        )));
    }
    let g0 = geometry_field(&w[0].u, MARGIN_FLOOR)?;
    let g1 = geometry_field(&w[1].u, MARGIN_FLOOR)?;
    let g2 = geometry_field(&w[2].u, MARGIN_FLOOR)?;
    Ok(WindowGeometry {
        dt: 0.5 * (w[2].s - w[0].s),
        s: w[1].s,
        geoms: [g0, g1, g2],
    })
}

impl WindowGeometry {
    pub fn grid(&self) -> &Grid {
        &self.geoms[1].grid
    }

    pub fn mid(&self) -> &GeometryField {
        &self.geoms[1]
    }

    /// Field of `f` at the middle state and `(d/ds - Δ) f` there, with the time
    /// derivative taken along the normal trajectory.
    pub fn heat_operator(&self, f: impl Fn(&SurfaceGeometry) -> f64) -> Result<(Field, Vec<f64>)> {
        let vals: Vec<Vec<f64>> = self
            .geoms
            .iter()
            .map(|g| g.nodes.iter().map(&f).collect())
            .collect();
        let grid = *self.grid();
        let mid = Field::from_raw(grid, vals[1].clone());
        let n = grid.dimension;
        let df = coordinate_gradient(&grid, &vals[1], n);
        let lap = laplace_beltrami(&mid, self.mid())?;
        let out = (0..grid.node_count())
            .map(|k| {
                let g = &self.mid().nodes[k];
                let e = (-2.0 * g.point.t).exp();
                let partial = (vals[2][k] - vals[0][k]) / (2.0 * self.dt);
                partial + g.mean_curvature * g.v * e * g.du.dot(&df[k]) - lap.values()[k]
            })
            .collect();
        Ok((mid, out))
    }
}

/// Right side of the `v^2` evolution in dimension `n`:
/// `4Hv - 2v^4 - 2(n-1)v^2 - 2|A|^2 v^2 + 2 Σ A(e_i,∂_t^⊤)^2 - 4|∇v|^2`.
pub fn v2_evolution_rhs(g: &SurfaceGeometry) -> f64 {
    let (v, hm) = (g.v, g.mean_curvature);
    let v2 = v * v;
    4.0 * hm * v - 2.0 * v2 * v2 - 2.0 * (n_of(g) - 1.0) * v2 - 2.0 * g.a2 * v2 + 2.0 * g.a_et_sq()
        - 4.0 * grad_v_sq_closed_form(g)
}

pub fn check_v2_evolution(window: &[GraphState]) -> Result<ResidualReport> {
    let wg = window_geometry(window)?;
    let (_, heat) = wg.heat_operator(|g| g.v * g.v)?;
    let grid = *wg.grid();
    let mut res = vec![0.0; grid.node_count()];
    let mut scale: f64 = 1.0;
    for k in grid.interior_nodes() {
        let g = &wg.mid().nodes[k];
        let rhs = v2_evolution_rhs(g);
        res[k] = (heat[k] - rhs).abs();
        scale = scale.max(rhs.abs()).max(4.0 * g.mean_curvature.abs() * g.v).max(heat[k].abs());
    }
    Ok(ResidualReport::on_grid(
        "v2_evolution",
        &grid,
        &res,
        tol_grid(grid.spacing(), scale),
    ))
}

/// Signed slacks of the two `v^2` inequalities and of the pointwise bound
/// `|A|^2 >= ((n+1)/n) λ_1^2 - H^2`.
///
/// The first inequality, `(∂_s-Δ)v^2 <= -(4+δ)|∇v|^2 - 2(1-δ)v^4 + 2H^2v^2 + 4Hv`,
/// holds for `δ ∈ [0, 1/n]`.
pub fn check_v2_inequalities(window: &[GraphState], delta: f64) -> Result<Vec<InequalityReport>> {
    let wg = window_geometry(window)?;
    let grid = *wg.grid();
    let n = grid.dimension as f64;
    if !(delta >= 0.0 && delta <= 1.0 / n) {
        return Err(Error::Validation(format!(
            "delta ∈ [0, 1/{n}] violated: delta = {delta}"
        )));
    }
    let (_, heat) = wg.heat_operator(|g| g.v * g.v)?;
    let count = grid.node_count();
    let (mut s1, mut s2, mut sb) = (vec![0.0; count], vec![0.0; count], vec![0.0; count]);
    let mut scale: f64 = 1.0;
    for k in grid.interior_nodes() {
        let g = &wg.mid().nodes[k];
        let (v, hm) = (g.v, g.mean_curvature);
        let v2 = v * v;
        let gv = grad_v_sq_closed_form(g);
        let rhs1 = -(4.0 + delta) * gv - 2.0 * (1.0 - delta) * v2 * v2 + 2.0 * hm * hm * v2 + 4.0 * hm * v;
        let rhs2 = -4.0 * gv - 2.0 * (v2 - 1.0);
        s1[k] = rhs1 - heat[k];
        s2[k] = rhs2 - heat[k];
        sb[k] = bartnik_slack(g) / (1.0 + g.a2 + hm * hm);
        scale = scale
            .max(heat[k].abs())
            .max(4.0 * hm.abs() * v)
            .max(2.0 * v2 * v2)
            .max(2.0 * hm * hm * v2);
    }
    let tol = tol_grid(grid.spacing(), scale);
    let p = params(&[("delta", delta), ("s", wg.s)]);
    Ok(vec![
        InequalityReport::on_grid("v2_inequality_gradient", &grid, &s1, tol, p.clone()),
        InequalityReport::on_grid("v2_inequality_flatness", &grid, &s2, tol, p.clone()),
        InequalityReport::on_grid("bartnik_bound", &grid, &sb, ANALYTIC_TOL, p),
    ])
}

/// Measured `(d/ds - Δ) r_α` and `|∇r_α|^2` against the cutoff bounds.
///
/// Returns the heat-operator lower bound, then the lower and upper gradient bounds.
/// `ε` and `t_min` are taken from `spec` as given.
pub fn check_cutoff_evolution(window: &[GraphState], spec: &CutoffSpec) -> Result<Vec<InequalityReport>> {
    spec.validate()?;
    for st in window.iter().take(3) {
        let grid = st.grid();
        if let Some((k, &t)) = st
            .u
            .values()
            .iter()
            .enumerate()
            .find(|(_, &t)| t < spec.t_min)
        {
            let _ = (grid, k);
            return Err(Error::BelowThreshold {
                t,
                t_min: spec.t_min,
            });
        }
    }
    let wg = window_geometry(window)?;
    let grid = *wg.grid();
    let (r, heat) = wg.heat_operator(|g| spec.value(&g.point))?;
    let grad_sq = intrinsic_grad_sq(&r, wg.mid())?;
    let count = grid.node_count();
    let (mut sh, mut sl, mut su) = (vec![0.0; count], vec![0.0; count], vec![0.0; count]);
    let (mut heat_scale, mut grad_scale): (f64, f64) = (1.0, 1.0);
    for k in grid.interior_nodes() {
        let g = &wg.mid().nodes[k];
        let b = cutoff_value_and_bounds(&g.point, spec, g)?;
        let gs = grad_sq.values()[k];
        sh[k] = heat[k] - b.heat_lower;
        sl[k] = gs - b.grad_sq_lower;
        su[k] = b.grad_sq_upper - gs;
        heat_scale = heat_scale.max(heat[k].abs()).max(b.heat_lower.abs());
        grad_scale = grad_scale
            .max(gs.abs())
            .max(b.grad_sq_lower.abs())
            .max(b.grad_sq_upper.abs());
    }
    let h = grid.spacing();
    let p = params(&[
        ("alpha", spec.alpha),
        ("epsilon", spec.epsilon),
        ("t_min", spec.t_min),
        ("radius", spec.radius),
        ("s", wg.s),
    ]);
    Ok(vec![
        InequalityReport::on_grid("cutoff_heat", &grid, &sh, tol_grid(h, heat_scale), p.clone()),
        InequalityReport::on_grid(
            "cutoff_gradient_lower",
            &grid,
            &sl,
            tol_grid(h, grad_scale),
            p.clone(),
        ),
        InequalityReport::on_grid("cutoff_gradient_upper", &grid, &su, tol_grid(h, grad_scale), p),
    ])
}

/// `|∇A|^2` on a rotationally symmetric graph, node by node.
///
/// With arclength `σ` along the profile, warping `f = e^u ρ` and principal curvatures
/// `κ_r` (radial) and `κ_θ` (multiplicity `n-1`):
/// `|∇A|^2 = κ_r'^2 + (n-1) κ_θ'^2 + 2(n-1) ((f'/f)(κ_r - κ_θ))^2`.
pub fn radial_grad_a_sq(geom: &GeometryField) -> Result<Vec<f64>> {
    let grid = geom.grid;
    if grid.mode != GridMode::Radial {
        return Err(Error::ModeUnsupported(
            "|∇A|^2 is assembled from radial derivatives only".into(),
        ));
    }
    let n = grid.dimension as f64;
    let h = grid.spacing();
    let kr: Vec<f64> = geom.nodes.iter().map(|g| g.h[(0, 0)] / g.gamma[(0, 0)]).collect();
    let kt: Vec<f64> = geom.nodes.iter().map(|g| g.h[(1, 1)] / g.gamma[(1, 1)]).collect();
    let dkr = first_derivative(&grid, &kr, 0);
    let dkt = first_derivative(&grid, &kt, 0);
    Ok((0..grid.node_count())
        .map(|k| {
            let g = &geom.nodes[k];
            let ds = g.gamma[(0, 0)].sqrt();
            let a = dkr[k] / ds;
            let b = dkt[k] / ds;
            let c = if k == 0 {
                0.0
            } else {
                let rho = k as f64 * h;
                (g.du[0] + 1.0 / rho) / ds * (kr[k] - kt[k])
            };
            a * a + (n - 1.0) * b * b + 2.0 * (n - 1.0) * c * c
        })
        .collect())
}

/// Residual of the curvature evolution and slack of the traceless inequality.
///
/// Normal motion with speed `H` in de Sitter space (sectional curvature 1) gives
/// `d/ds h_ij = ∇_i∇_j H + H h_ik h_jk + H g_ij`; with Simons' identity for spacelike
/// hypersurfaces,
///
/// ```text
/// (d/ds - Δ) h_ij  = 2H h_ik h_jk - (|A|^2 + n) h_ij + 2H g_ij
/// (d/ds - Δ) |A|^2 = -2|∇A|^2 + 4H^2 - 2|A|^2 (|A|^2 + n)
/// (d/ds - Δ) Q     = -2|∇Å|^2 - 2(|A|^2 + n) Q,      Q = |A|^2 - H^2/n.
/// ```
///
/// The checked inequality is `(d/ds - Δ) Q <= 6n Q - (2H^2/n) Q`, implied by the last
/// line since `Q >= 0`. The variant `-2|∇A|^2 - 4H^2 + 2|A|^2(3n - |A|^2)` agrees on
/// umbilic points but differs by `8nQ` elsewhere, which the residual detects.
pub fn check_a2_evolution(window: &[GraphState]) -> Result<(ResidualReport, InequalityReport)> {
    if let Some(st) = window.first() {
        if st.grid().mode != GridMode::Radial {
            return Err(Error::ModeUnsupported(
                "curvature evolution is checked on radial grids only".into(),
            ));
        }
    }
    let wg = window_geometry(window)?;
    let grid = *wg.grid();
    let n = grid.dimension as f64;
    let (_, heat_a2) = wg.heat_operator(|g| g.a2)?;
    let (_, heat_q) = wg.heat_operator(|g| g.a2_traceless)?;
    let grad_a = radial_grad_a_sq(wg.mid())?;
    let count = grid.node_count();
    let (mut res, mut slack) = (vec![0.0; count], vec![0.0; count]);
    let (mut scale, mut qscale): (f64, f64) = (1.0, 1.0);
    for k in grid.interior_nodes() {
        let g = &wg.mid().nodes[k];
        let (a2, hm, q) = (g.a2, g.mean_curvature, g.a2_traceless);
        let rhs = -2.0 * grad_a[k] + 4.0 * hm * hm - 2.0 * a2 * (a2 + n);
        res[k] = (heat_a2[k] - rhs).abs();
        slack[k] = 6.0 * n * q - 2.0 * hm * hm / n * q - heat_q[k];
        scale = scale.max(4.0 * hm * hm).max(heat_a2[k].abs()).max(rhs.abs());
        qscale = qscale.max(heat_q[k].abs()).max(6.0 * n * q.abs());
    }
    let h = grid.spacing();
    Ok((
        ResidualReport::on_grid("a2_evolution", &grid, &res, tol_grid(h, scale)),
        InequalityReport::on_grid(
            "traceless_inequality",
            &grid,
            &slack,
            tol_grid(h, qscale),
            params(&[("s", wg.s)]),
        ),
    ))
}

/// Random spacelike 2-jet: `x ∈ [-2,2]^n`, `u ∈ [-1,1]`, `e^{-2u}|Du|^2 ∈ [0, 0.95)`,
/// Hessian entries in `[-2, 2]`.
pub fn random_spacelike_jet(rng: &mut impl Rng, n: usize) -> GraphSample {
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let u: f64 = rng.gen_range(-1.0..1.0);
    let dir: Vec<f64> = loop {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = d.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            break d.iter().map(|c| c / norm).collect();
        }
    };
    let p: f64 = rng.gen_range(0.0..0.95);
    let mag = u.exp() * p.sqrt();
    let du: Vec<f64> = dir.iter().map(|c| c * mag).collect();
    let mut d2u = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let a = rng.gen_range(-2.0..2.0);
            d2u[(i, j)] = a;
            d2u[(j, i)] = a;
        }
    }
    GraphSample::new(x, u, du, d2u).expect("sampled jets are spacelike by construction")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JetSuite {
    pub reports: Vec<ResidualReport>,
    pub bartnik: InequalityReport,
}

/// Pointwise identities on `count` random spacelike jets in dimension `n`.
pub fn check_identities_on_jets(count: usize, n: usize, seed: u64) -> Result<JetSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jets: Vec<GraphSample> = (0..count).map(|_| random_spacelike_jet(&mut rng, n)).collect();
    let rows: Vec<[f64; 5]> = jets
        .par_iter()
        .map(|s| -> Result<[f64; 5]> {
            let g = surface_geometry(s)?;
            let grad_ids = gradient_identity_residual(&g);
            let dv = v_gradient_from_jet(s);
            let closed = v_gradient_closed_form(&g);
            let dv_scale = 1f64.max(dv.amax()).max(closed.amax());
            let r32 = (&dv - &closed).amax() / dv_scale;
            let r33 = rel(dv.dot(&(&g.gamma_inv * &dv)), grad_v_sq_closed_form(&g));
            let (dx, dt) = coordinate_laplacians_closed_form(&g);
            let mut lap = rel(laplacian_via_wave_operator(&g, &AmbientJet::time(&g.point)), dt);
            for (i, dxi) in dx.iter().enumerate() {
                lap = lap.max(rel(
                    laplacian_via_wave_operator(&g, &AmbientJet::coordinate(i, &g.point)),
                    *dxi,
                ));
            }
            let hm = g.mean_curvature;
            let bart = bartnik_slack(&g) / (1.0 + g.a2 + hm * hm);
            Ok([grad_ids, r32, r33, lap, bart])
        })
        .collect::<Result<_>>()?;
    let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let names = [
        "jet_gradient_identities",
        "jet_v_gradient",
        "jet_v_gradient_norm",
        "jet_coordinate_laplacians_wave_route",
    ];
    let reports = names
        .iter()
        .enumerate()
        .map(|(j, name)| ResidualReport::from_residuals(name, &col(j), ANALYTIC_TOL))
        .collect();
    let bart = col(4);
    let worst = bart.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut locations = Vec::new();
    let mut violations = 0;
    for (s, b) in jets.iter().zip(&bart) {
        if *b < -ANALYTIC_TOL {
            violations += 1;
            if locations.len() < MAX_LOCATIONS {
                locations.push(s.point.x.clone());
            }
        }
    }
    Ok(JetSuite {
        reports,
        bartnik: InequalityReport {
            name: "jet_bartnik_bound".into(),
            worst_slack: worst,
            violations,
            nodes: count,
            locations,
            params: params(&[("samples", count as f64), ("seed", seed as f64)]),
            tolerance: ANALYTIC_TOL,
            pass: violations == 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{advance_window, BcKind, FlowConfig};
    use approx::assert_abs_diff_eq;

    fn state(grid: Grid, f: impl Fn(&[f64]) -> f64, kind: BcKind) -> GraphState {
        GraphState::initial(Field::from_fn(grid, f).unwrap(), kind).unwrap()
    }

    #[test]
    fn flat_slice_identities_are_exact() {
        for grid in [Grid::cartesian(3, 1.0, 9).unwrap(), Grid::radial(3, 1.0, 17).unwrap()] {
            let st = state(grid, |_| 0.4, BcKind::Slicing);
            let r = check_gradient_identities(&st).unwrap();
            assert!(r.pass && r.linf < 1e-12);
            let fine = state(grid.refined(), |_| 0.4, BcKind::Slicing);
            for r in check_coordinate_laplacians(&st, &fine).unwrap() {
                assert!(r.linf < 1e-12, "{r:?}");
                assert!(r.pass);
            }
            for r in check_v_gradient_identity(&st, None).unwrap() {
                assert!(r.linf < 1e-12);
            }
        }
    }

    #[test]
    fn linear_graph_identities_on_grid() {
        let grid = Grid::cartesian(2, 1.0, 21).unwrap();
        let st = state(grid, |x| 0.5 * x[0], BcKind::Frozen);
        assert!(check_gradient_identities(&st).unwrap().linf < 1e-10);
    }

    #[test]
    fn constant_v_jet_has_vanishing_v_gradient() {
        // u = -ln(b - k x_1): e^{-2u} u_1^2 = k^2 everywhere
        let (b, k, x1) = (2.0, 0.6, 0.3);
        let w = b - k * x1;
        let mut d2u = DMatrix::zeros(3, 3);
        d2u[(0, 0)] = k * k / (w * w);
        let s = GraphSample::new(vec![x1, 0.0, 0.0], -w.ln(), vec![k / w, 0.0, 0.0], d2u).unwrap();
        let g = surface_geometry(&s).unwrap();
        assert!(v_gradient_from_jet(&s).amax() < 1e-12);
        assert!(v_gradient_closed_form(&g).amax() < 1e-9);
        assert_abs_diff_eq!(g.v, 1.0 / (1.0 - k * k).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn jet_suite_passes() {
        for n in [2, 3, 4] {
            let suite = check_identities_on_jets(2000, n, 7).unwrap();
            for r in &suite.reports {
                assert!(r.pass, "{r:?}");
            }
            assert!(suite.bartnik.pass, "{:?}", suite.bartnik);
        }
    }

    #[test]
    fn sinusoid_laplacians_converge_at_second_order() {
        let f = |x: &[f64]| 0.1 * x[0].sin() * x[1].cos();
        let grid = Grid::cartesian(2, 1.5, 21).unwrap();
        let st = state(grid, f, BcKind::Frozen);
        let fine = state(grid.refined(), f, BcKind::Frozen);
        for r in check_coordinate_laplacians(&st, &fine).unwrap() {
            assert!(r.pass, "{r:?}");
        }
        for r in check_v_gradient_identity(&st, Some(&fine)).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn flat_window_checks() {
        let grid = Grid::radial(3, 1.0, 41).unwrap();
        let st = state(grid, |_| 0.0, BcKind::Slicing);
        let cfg = FlowConfig::default();
        let w = advance_window(&st, &cfg, 1e-4).unwrap();
        let r = check_v2_evolution(&w).unwrap();
        assert!(r.linf < 1e-10, "{r:?}");
        let ineq = check_v2_inequalities(&w, 1.0 / 3.0).unwrap();
        assert!(ineq.iter().all(|r| r.pass));
        assert!(ineq[0].worst_slack > 28.0 && ineq[0].worst_slack < 28.7);
        assert!(ineq[1].worst_slack.abs() < 1e-9);
        let (a2, tr) = check_a2_evolution(&w).unwrap();
        assert!(a2.linf < 1e-9, "{a2:?}");
        assert!(tr.pass);
    }

    #[test]
    fn window_errors() {
        let grid = Grid::cartesian(2, 1.0, 9).unwrap();
        let st = state(grid, |_| 0.0, BcKind::Slicing);
        assert!(matches!(
            check_v2_evolution(&[st.clone(), st.clone()]),
            Err(Error::WindowTooShort(_))
        ));
        let w = advance_window(&st, &FlowConfig::default(), 1e-4).unwrap();
        assert!(matches!(check_a2_evolution(&w), Err(Error::ModeUnsupported(_))));
        assert!(matches!(
            check_v2_inequalities(&w, 0.6),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn cutoff_on_flat_slicing() {
        let grid = Grid::radial(3, 1.0, 101).unwrap();
        let st = state(grid, |_| 10.0, BcKind::Slicing);
        let w = advance_window(&st, &FlowConfig::default(), 1e-4).unwrap();
        let spec = CutoffSpec::new(1.0, 1.0, 0.1, 10.0).unwrap();
        let reps = check_cutoff_evolution(&w, &spec).unwrap();
        assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        // negative control: α near 2 at t = 1
        let st = state(grid, |_| 1.0, BcKind::Slicing);
        let w = advance_window(&st, &FlowConfig::default(), 1e-4).unwrap();
        let spec = CutoffSpec::new(1.9, 1.0, 0.1, 1.0).unwrap();
        let reps = check_cutoff_evolution(&w, &spec).unwrap();
        assert!(reps[0].violations > 0);
        assert!((reps[0].worst_slack - (-6.0 * (-0.1f64).exp() + 0.1)).abs() < 1e-2);
        let low = CutoffSpec::new(1.0, 1.0, 0.1, 10.0).unwrap();
        assert!(matches!(
            check_cutoff_evolution(&w, &low),
            Err(Error::BelowThreshold { .. })
        ));
    }

    #[test]
    fn radial_laplacians_converge_at_second_order() {
        let f = |x: &[f64]| 0.1 * x[0].cos();
        let grid = Grid::radial(3, 3.0, 41).unwrap();
        let st = state(grid, f, BcKind::Frozen);
        let fine = state(grid.refined(), f, BcKind::Frozen);
        for r in check_coordinate_laplacians(&st, &fine).unwrap() {
            assert!(r.pass, "{r:?}");
        }
        for r in check_v_gradient_identity(&st, Some(&fine)).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    fn bump_window(n: usize, res: usize) -> [GraphState; 3] {
        use crate::flow::{run, Integrator};
        let grid = Grid::radial(n, 4.0, res).unwrap();
        let st = state(grid, |x| 0.3 * (-x[0] * x[0]).exp(), BcKind::Slicing);
        let h = grid.spacing();
        let dt = 0.02 * h * h;
        let cfg = FlowConfig {
            integrator: Integrator::Rk4,
            fixed_dt: Some(dt),
            s_end: 0.05,
            snapshot_stride: usize::MAX,
            ..Default::default()
        };
        let tr = run(&st, &cfg).unwrap();
        advance_window(tr.last(), &cfg, dt).unwrap()
    }

    #[test]
    fn evolution_residuals_converge_on_radial_bump() {
        for n in [2, 3] {
            let (c, f) = (bump_window(n, 81), bump_window(n, 161));
            let v2 = ResidualReport::refined(
                &check_v2_evolution(&c).unwrap(),
                &check_v2_evolution(&f).unwrap(),
                ORDER_WINDOW,
            );
            assert!(v2.pass, "{v2:?}");
            let (ac, qc) = check_a2_evolution(&c).unwrap();
            let (af, qf) = check_a2_evolution(&f).unwrap();
            let a2 = ResidualReport::refined(&ac, &af, ORDER_WINDOW);
            assert!(a2.pass, "{a2:?}");
            assert!(qc.pass && qf.pass);
            for r in check_v2_inequalities(&f, 1.0 / n as f64).unwrap() {
                assert!(r.pass, "{r:?}");
            }
        }
    }
}
