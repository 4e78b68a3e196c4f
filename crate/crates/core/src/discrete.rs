//! Finite-difference kernels on Cartesian and radially symmetric grids.
//!
//! Cartesian grids cover `[-R, R]^n` with `N` nodes per axis, stored row-major with
//! axis 0 slowest. Radial grids cover `ρ ∈ [0, R]` with `N` nodes; a radial field is a
//! rotationally symmetric function on `R^n`, and pointwise quantities are reported at
//! `x = ρ e_1` on the positive first axis.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsgeom::{surface_geometry_with_floor, GraphSample, SurfaceGeometry};
use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 5;
const MAX_NODES: usize = 64_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Cartesian,
    Radial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dimension: usize,
    pub mode: GridMode,
    /// Half-width per axis (Cartesian) or outer radius (radial).
    pub extent: f64,
    /// Nodes per axis.
    pub resolution: usize,
}

impl Grid {
    pub fn new(dimension: usize, mode: GridMode, extent: f64, resolution: usize) -> Result<Self> {
        let g = Self {
            dimension,
            mode,
            extent,
            resolution,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn cartesian(dimension: usize, extent: f64, resolution: usize) -> Result<Self> {
        Self::new(dimension, GridMode::Cartesian, extent, resolution)
    }

    pub fn radial(dimension: usize, extent: f64, resolution: usize) -> Result<Self> {
        Self::new(dimension, GridMode::Radial, extent, resolution)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::ResolutionTooLow {
                resolution: self.resolution,
                minimum: MIN_RESOLUTION,
            });
        }
        if self.dimension == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::InvalidGrid(format!("extent {} must be positive", self.extent)));
        }
        if self.mode == GridMode::Radial && self.dimension < 2 {
            return Err(Error::InvalidGrid("radial mode requires dimension >= 2".into()));
        }
        if self.mode == GridMode::Cartesian {
            let mut count: usize = 1;
            for _ in 0..self.dimension {
                count = count.saturating_mul(self.resolution);
            }
            if count > MAX_NODES {
                return Err(Error::InvalidGrid(format!("{count} nodes exceeds {MAX_NODES}")));
            }
        }
        Ok(())
    }

    /// Same layout with node spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            resolution: 2 * self.resolution - 1,
            ..*self
        }
    }

    pub fn spacing(&self) -> f64 {
        match self.mode {
            GridMode::Cartesian => 2.0 * self.extent / (self.resolution - 1) as f64,
            GridMode::Radial => self.extent / (self.resolution - 1) as f64,
        }
    }

    pub fn node_count(&self) -> usize {
        match self.mode {
            GridMode::Cartesian => self.resolution.pow(self.dimension as u32),
            GridMode::Radial => self.resolution,
        }
    }

    /// Number of array axes (`n` for Cartesian, 1 for radial).
    pub fn axes(&self) -> usize {
        match self.mode {
            GridMode::Cartesian => self.dimension,
            GridMode::Radial => 1,
        }
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.resolution.pow((self.axes() - 1 - axis) as u32)
    }

    /// Position of node `idx` along array axis `axis`.
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.resolution
    }

    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        match self.mode {
            GridMode::Cartesian => (0..self.dimension)
                .map(|a| -self.extent + self.axis_index(idx, a) as f64 * h)
                .collect(),
            GridMode::Radial => {
                let mut x = vec![0.0; self.dimension];
                x[0] = idx as f64 * h;
                x
            }
        }
    }

    /// Radius of node `idx` (radial mode) or Euclidean norm of its coordinates.
    pub fn node_radius(&self, idx: usize) -> f64 {
        match self.mode {
            GridMode::Radial => idx as f64 * self.spacing(),
            GridMode::Cartesian => self.node_coords(idx).iter().map(|c| c * c).sum::<f64>().sqrt(),
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        match self.mode {
            GridMode::Radial => idx == self.resolution - 1,
            GridMode::Cartesian => (0..self.dimension).any(|a| {
                let i = self.axis_index(idx, a);
                i == 0 || i == self.resolution - 1
            }),
        }
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&i| !self.is_boundary(i))
    }

    /// Nodes at least two cells from the boundary, whose second-difference stencils
    /// only read coefficients computed with central differences.
    pub fn is_deep_interior(&self, idx: usize) -> bool {
        let n = self.resolution;
        match self.mode {
            GridMode::Radial => idx + 2 < n,
            GridMode::Cartesian => (0..self.dimension).all(|a| {
                let i = self.axis_index(idx, a);
                i >= 2 && i + 2 < n
            }),
        }
    }

    pub fn deep_interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&i| self.is_deep_interior(i))
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.is_boundary(i)).collect()
    }

    /// Whether `point` lies in the grid hull, with relative slack `1e-12`.
    pub fn contains(&self, point: &[f64]) -> bool {
        let tol = 1e-12 * self.extent;
        match self.mode {
            GridMode::Cartesian => point.iter().all(|c| c.abs() <= self.extent + tol),
            GridMode::Radial => point.iter().map(|c| c * c).sum::<f64>().sqrt() <= self.extent + tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.node_count()).map(|i| f(&grid.node_coords(i))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.node_count()],
        }
    }

    /// Coordinate function `x_axis` sampled on the grid.
    pub fn coordinate(grid: Grid, axis: usize) -> Self {
        let values = (0..grid.node_count()).map(|i| grid.node_coords(i)[axis]).collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// First derivative along array axis `axis`: central inside, second-order one-sided at
/// the ends. In radial mode the axis value is forced to zero (even symmetry).
pub fn first_derivative(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.resolution;
    let h = grid.spacing();
    let st = grid.stride(axis);
    let mut out = vec![0.0; values.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = grid.axis_index(idx, axis);
        *o = if i == 0 {
            if grid.mode == GridMode::Radial {
                0.0
            } else {
                (-3.0 * values[idx] + 4.0 * values[idx + st] - values[idx + 2 * st]) / (2.0 * h)
            }
        } else if i == n - 1 {
            (3.0 * values[idx] - 4.0 * values[idx - st] + values[idx - 2 * st]) / (2.0 * h)
        } else {
            (values[idx + st] - values[idx - st]) / (2.0 * h)
        };
    }
    out
}

/// Pure second derivative along array axis `axis`.
pub fn second_derivative(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.resolution;
    let h2 = grid.spacing().powi(2);
    let st = grid.stride(axis);
    let mut out = vec![0.0; values.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = grid.axis_index(idx, axis);
        *o = if i == 0 {
            if grid.mode == GridMode::Radial {
                2.0 * (values[idx + st] - values[idx]) / h2
            } else {
                (2.0 * values[idx] - 5.0 * values[idx + st] + 4.0 * values[idx + 2 * st]
                    - values[idx + 3 * st])
                    / h2
            }
        } else if i == n - 1 {
            (2.0 * values[idx] - 5.0 * values[idx - st] + 4.0 * values[idx - 2 * st]
                - values[idx - 3 * st])
                / h2
        } else {
            (values[idx + st] - 2.0 * values[idx] + values[idx - st]) / h2
        };
    }
    out
}

/// Spatial derivatives of a field, in Cartesian components.
///
/// For radial grids the components are those at `x = ρ e_1`:
/// `u_1 = u'`, `u_11 = u''`, `u_jj = u'/ρ` for `j > 1` (limit `u''(0)` on the axis).
#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub dimension: usize,
    pub grad: Vec<Vec<f64>>,
    /// Packed upper triangle, `(i, j)` with `i <= j`.
    pub hess: Vec<Vec<f64>>,
}

impl Derivatives {
    pub fn hess_index(n: usize, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * n - a * (a + 1) / 2 + b
    }

    pub fn hessian(&self, i: usize, j: usize) -> &[f64] {
        &self.hess[Self::hess_index(self.dimension, i, j)]
    }

    pub fn du_at(&self, node: usize) -> Vec<f64> {
        self.grad.iter().map(|g| g[node]).collect()
    }

    pub fn d2u_at(&self, node: usize) -> DMatrix<f64> {
        let n = self.dimension;
        DMatrix::from_fn(n, n, |i, j| self.hessian(i, j)[node])
    }
}

pub fn differentiate(field: &Field) -> Result<Derivatives> {
    let grid = field.grid();
    grid.validate()?;
    let n = grid.dimension;
    let vals = field.values();
    let npack = n * (n + 1) / 2;
    match grid.mode {
        GridMode::Cartesian => {
            let grad: Vec<Vec<f64>> = (0..n).map(|a| first_derivative(grid, vals, a)).collect();
            let mut hess = vec![Vec::new(); npack];
            for i in 0..n {
                for j in i..n {
                    hess[Derivatives::hess_index(n, i, j)] = if i == j {
                        second_derivative(grid, vals, i)
                    } else {
                        first_derivative(grid, &grad[j], i)
                    };
                }
            }
            Ok(Derivatives {
                dimension: n,
                grad,
                hess,
            })
        }
        GridMode::Radial => {
            let d1 = first_derivative(grid, vals, 0);
            let d2 = second_derivative(grid, vals, 0);
            let h = grid.spacing();
            let tangential: Vec<f64> = (0..vals.len())
                .map(|k| if k == 0 { d2[0] } else { d1[k] / (k as f64 * h) })
                .collect();
            let zeros = vec![0.0; vals.len()];
            let mut grad = vec![zeros.clone(); n];
            grad[0] = d1;
            let mut hess = vec![zeros; npack];
            hess[0] = d2;
            for j in 1..n {
                hess[Derivatives::hess_index(n, j, j)] = tangential.clone();
            }
            Ok(Derivatives {
                dimension: n,
                grad,
                hess,
            })
        }
    }
}

/// Graph sample at a node from the field value and its derivatives.
pub fn sample_at(field: &Field, d: &Derivatives, node: usize, floor: f64) -> Result<GraphSample> {
    GraphSample::with_floor(
        field.grid().node_coords(node),
        field.values()[node],
        d.du_at(node),
        d.d2u_at(node),
        floor,
    )
    .map_err(|e| match e {
        Error::NonSpacelike { margin, floor, .. } => Error::NonSpacelike {
            node: Some(node),
            margin,
            floor,
        },
        other => other,
    })
}

/// Surface geometry at every node of a graph field.
#[derive(Clone, Debug)]
pub struct GeometryField {
    pub grid: Grid,
    pub nodes: Vec<SurfaceGeometry>,
}

impl GeometryField {
    pub fn scalar(&self, f: impl Fn(&SurfaceGeometry) -> f64) -> Field {
        Field::from_raw(self.grid, self.nodes.iter().map(f).collect())
    }

    pub fn v(&self) -> Field {
        self.scalar(|g| g.v)
    }

    pub fn mean_curvature(&self) -> Field {
        self.scalar(|g| g.mean_curvature)
    }
}

pub fn geometry_field(u: &Field, floor: f64) -> Result<GeometryField> {
    let d = differentiate(u)?;
    let nodes: Result<Vec<SurfaceGeometry>> = (0..u.grid().node_count())
        .into_par_iter()
        .map(|k| {
            let s = sample_at(u, &d, k, floor)?;
            surface_geometry_with_floor(&s, floor).map_err(|e| match e {
                Error::NonSpacelike { margin, floor, .. } => Error::NonSpacelike {
                    node: Some(k),
                    margin,
                    floor,
                },
                other => other,
            })
        })
        .collect();
    Ok(GeometryField {
        grid: *u.grid(),
        nodes: nodes?,
    })
}

fn check_same_grid(f: &Field, geom: &GeometryField) -> Result<()> {
    if *f.grid() != geom.grid {
        return Err(Error::InvalidGrid("field and geometry live on different grids".into()));
    }
    Ok(())
}

/// Divergence-form Laplace–Beltrami operator
/// `Δ_M f = (1/√det γ) ∂_i(√det γ γ^{ij} ∂_j f)`.
///
/// Diagonal terms use the compact three-point stencil with midpoint-averaged
/// coefficients; mixed terms use nested central differences. In radial mode `f` is
/// treated as rotationally symmetric. Boundary entries of the result are not computed
/// and hold zero.
pub fn laplace_beltrami(f: &Field, geom: &GeometryField) -> Result<Field> {
    check_same_grid(f, geom)?;
    match geom.grid.mode {
        GridMode::Cartesian => Ok(laplace_beltrami_cartesian(f, geom)),
        GridMode::Radial => Ok(radial_operator(f.values(), geom)),
    }
}

fn laplace_beltrami_cartesian(f: &Field, geom: &GeometryField) -> Field {
    let grid = geom.grid;
    let n = grid.dimension;
    let h = grid.spacing();
    let vals = f.values();
    let count = grid.node_count();
    let coef = |i: usize, j: usize| -> Vec<f64> {
        geom.nodes
            .iter()
            .map(|g| g.sqrt_det_gamma * g.gamma_inv[(i, j)])
            .collect()
    };
    let diag: Vec<Vec<f64>> = (0..n).map(|i| coef(i, i)).collect();
    let grads: Vec<Vec<f64>> = (0..n).map(|a| first_derivative(&grid, vals, a)).collect();
    // flux_ij = √det γ γ^{ij} ∂_j f for i != j
    let mut mixed: Vec<(usize, Vec<f64>)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let c = coef(i, j);
                let flux: Vec<f64> = (0..count).map(|k| c[k] * grads[j][k]).collect();
                mixed.push((i, flux));
            }
        }
    }
    let out: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|k| {
            if grid.is_boundary(k) {
                return 0.0;
            }
            let mut acc = 0.0;
            for i in 0..n {
                let st = grid.stride(i);
                let cp = 0.5 * (diag[i][k] + diag[i][k + st]);
                let cm = 0.5 * (diag[i][k] + diag[i][k - st]);
                acc += (cp * (vals[k + st] - vals[k]) - cm * (vals[k] - vals[k - st])) / (h * h);
            }
            for (i, flux) in &mixed {
                let st = grid.stride(*i);
                acc += (flux[k + st] - flux[k - st]) / (2.0 * h);
            }
            acc / geom.nodes[k].sqrt_det_gamma
        })
        .collect();
    Field::from_raw(grid, out)
}

/// Radial weights `w = √γ_ρρ e^{(n-1)u}` (volume density without `ρ^{n-1}`) and flux
/// coefficients `s = w / γ_ρρ`.
fn radial_weights(geom: &GeometryField) -> (Vec<f64>, Vec<f64>) {
    let n = geom.grid.dimension;
    let w: Vec<f64> = geom
        .nodes
        .iter()
        .map(|g| g.gamma[(0, 0)].sqrt() * ((n - 1) as f64 * g.point.t).exp())
        .collect();
    let s = geom
        .nodes
        .iter()
        .zip(&w)
        .map(|(g, wk)| wk / g.gamma[(0, 0)])
        .collect();
    (w, s)
}

/// Radial Laplace–Beltrami on rotationally symmetric `φ(ρ)`:
/// `(1/(ρ^{n-1} w)) (ρ^{n-1} s φ')'` in flux form. Node volumes are the exact cell
/// volumes `((ρ+h/2)^n - (ρ-h/2)^n) / n`, which makes the flat operator exact on
/// quadratics, including next to the axis.
fn radial_operator(phi: &[f64], geom: &GeometryField) -> Field {
    let grid = geom.grid;
    let n = grid.dimension;
    let h = grid.spacing();
    let nn = grid.resolution;
    let nm1 = (n - 1) as i32;
    let (w, s) = radial_weights(geom);
    let mut out = vec![0.0; nn];
    out[0] = n as f64 * 2.0 * (phi[1] - phi[0]) / (h * h) / geom.nodes[0].gamma[(0, 0)];
    for k in 1..nn - 1 {
        let kf = k as f64;
        let cp = (kf + 0.5).powi(nm1) * 0.5 * (s[k] + s[k + 1]);
        let cm = (kf - 0.5).powi(nm1) * 0.5 * (s[k] + s[k - 1]);
        let vol = ((kf + 0.5).powi(n as i32) - (kf - 0.5).powi(n as i32)) / n as f64;
        out[k] = (cp * (phi[k + 1] - phi[k]) - cm * (phi[k] - phi[k - 1])) / (h * h * vol * w[k]);
    }
    Field::from_raw(grid, out)
}

/// Radial `Δ_M x_1` at `x = ρ e_1`.
///
/// On `φ(ρ) Y` with `Y` of degree one the operator is
/// `(1/(ρ^{n-1} w)) (ρ^{n-1} s φ')' - (n-1) φ / (e^{2u} ρ^2)`; for `φ = ρ` it reduces to
/// `ρ [ (n-1) (u'/ρ)^2 / (γ_ρρ e^{2u}) + (s'/ρ) / w ]`, whose factors are smooth at the
/// axis. `u'/ρ` and `s'/ρ` are central differences divided by `ρ`.
fn radial_coordinate_laplacian(geom: &GeometryField) -> Field {
    let grid = geom.grid;
    let n = grid.dimension;
    let h = grid.spacing();
    let nn = grid.resolution;
    let (w, s) = radial_weights(geom);
    let mut out = vec![0.0; nn];
    for k in 1..nn - 1 {
        let rho = k as f64 * h;
        let g = &geom.nodes[k];
        let up = g.du[0] / rho;
        let sp = (s[k + 1] - s[k - 1]) / (2.0 * h) / rho;
        let e2u = (2.0 * g.point.t).exp();
        out[k] = rho * ((n - 1) as f64 * up * up / (g.gamma[(0, 0)] * e2u) + sp / w[k]);
    }
    Field::from_raw(grid, out)
}

/// Discrete `Δ_M x_axis`. In radial mode values are reported at `x = ρ e_1`, where
/// the other coordinates vanish identically along with their Laplacians.
pub fn laplace_beltrami_coordinate(geom: &GeometryField, axis: usize) -> Result<Field> {
    match geom.grid.mode {
        GridMode::Cartesian => laplace_beltrami(&Field::coordinate(geom.grid, axis), geom),
        GridMode::Radial => {
            if axis == 0 {
                Ok(radial_coordinate_laplacian(geom))
            } else {
                Ok(Field::constant(geom.grid, 0.0))
            }
        }
    }
}

/// Intrinsic squared gradient `γ^{ij} ∂_i f ∂_j f` with discrete derivatives.
pub fn intrinsic_grad_sq(f: &Field, geom: &GeometryField) -> Result<Field> {
    check_same_grid(f, geom)?;
    let grid = geom.grid;
    let grads: Vec<Vec<f64>> = (0..grid.axes())
        .map(|a| first_derivative(&grid, f.values(), a))
        .collect();
    let out = (0..grid.node_count())
        .map(|k| {
            let gi = &geom.nodes[k].gamma_inv;
            let mut acc = 0.0;
            for i in 0..grid.axes() {
                for j in 0..grid.axes() {
                    acc += gi[(i, j)] * grads[i][k] * grads[j][k];
                }
            }
            acc
        })
        .collect();
    Ok(Field::from_raw(grid, out))
}

/// Multilinear (Cartesian) or linear-in-ρ (radial) interpolation.
pub fn interpolate(f: &Field, point: &[f64]) -> Result<f64> {
    let grid = f.grid();
    if point.len() != grid.dimension || !grid.contains(point) || point.iter().any(|c| !c.is_finite()) {
        return Err(Error::OutOfDomain {
            point: point.to_vec(),
        });
    }
    let h = grid.spacing();
    let nn = grid.resolution;
    let locate = |coord: f64| -> (usize, f64) {
        let pos = (coord / h).clamp(0.0, (nn - 1) as f64);
        let i = (pos.floor() as usize).min(nn - 2);
        (i, pos - i as f64)
    };
    let vals = f.values();
    match grid.mode {
        GridMode::Radial => {
            let rho = point.iter().map(|c| c * c).sum::<f64>().sqrt();
            let (i, w) = locate(rho);
            Ok((1.0 - w) * vals[i] + w * vals[i + 1])
        }
        GridMode::Cartesian => {
            let n = grid.dimension;
            let cells: Vec<(usize, f64)> = point.iter().map(|&c| locate(c + grid.extent)).collect();
            let mut acc = 0.0;
            for corner in 0..(1usize << n) {
                let mut weight = 1.0;
                let mut idx = 0;
                for (a, &(i, w)) in cells.iter().enumerate() {
                    let bit = (corner >> a) & 1;
                    weight *= if bit == 1 { w } else { 1.0 - w };
                    idx += (i + bit) * grid.stride(a);
                }
                if weight != 0.0 {
                    acc += weight * vals[idx];
                }
            }
            Ok(acc)
        }
    }
}

/// Observed order `log2(e_h / e_{h/2})`.
pub fn refinement_order(e_coarse: f64, e_fine: f64) -> Result<f64> {
    const FLOOR: f64 = 1e-14;
    for e in [e_coarse, e_fine] {
        if !(e >= FLOOR) {
            return Err(Error::DegenerateError(e));
        }
    }
    Ok((e_coarse / e_fine).log2())
}

/// Max of `|values|` over interior nodes.
pub fn interior_linf(grid: &Grid, values: &[f64]) -> f64 {
    grid.interior_nodes().map(|k| values[k].abs()).fold(0.0, f64::max)
}

/// Root-mean-square of `values` over interior nodes.
pub fn interior_rms(grid: &Grid, values: &[f64]) -> f64 {
    let (sum, count) = grid
        .interior_nodes()
        .fold((0.0, 0usize), |(s, c), k| (s + values[k] * values[k], c + 1));
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}
