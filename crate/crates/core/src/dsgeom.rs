//! Closed-form geometry of the flat de Sitter chart and of spacelike graphs in it.
//!
//! The ambient metric is `g = e^{2t} |dx|^2 - dt^2` on `R^n x R`. A graph `t = u(x)`
//! has tangent frame `e_i = ∂_i + u_i ∂_t` and induced metric
//! `γ_ij = e^{2u} δ_ij - u_i u_j`. The only nonvanishing ambient connection terms are
//!
//! ```text
//! ∇̄_{∂_i} ∂_j = δ_ij e^{2t} ∂_t,    ∇̄_{∂_i} ∂_t = ∇̄_{∂_t} ∂_i = ∂_i,    ∇̄_{∂_t} ∂_t = 0,
//! ```
//!
//! from which `∇̄_{e_i} e_j = (u_ij + δ_ij e^{2u}) ∂_t + u_j ∂_i + u_i ∂_j`. Writing
//! `E = e^{-2u}`, `p = E |Du|^2` and the spacelike margin `m = 1 - p`:
//!
//! ```text
//! ν   = v (E Du, 1)                         future unit normal, g(ν, ν) = -1
//! v   = -g(∂_t, ν) = m^{-1/2}
//! h_ij = -g(∇̄_{e_i} e_j, ν) = v (u_ij + δ_ij e^{2u} - 2 u_i u_j)
//! ```
//!
//! These were derived symbolically from the connection above and are cross-checked at
//! runtime against the independent wave-operator route ([`laplacian_via_wave_operator`])
//! and the intrinsic gradient identities in [`crate::oracles`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::discrete::{interpolate, Field, Grid};
use crate::error::{Error, Result};

/// Samples with spacelike margin at or below this value are rejected.
pub const MARGIN_FLOOR: f64 = 1e-10;

/// Condition-number ceiling for the induced metric.
pub const CONDITION_CEILING: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct AmbientPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl AmbientPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|c| c.is_finite())
    }
}

/// Diagonal of the ambient metric in the `(∂_1, …, ∂_n, ∂_t)` basis.
pub fn ambient_metric(t: f64, n: usize) -> Vec<f64> {
    let s = (2.0 * t).exp();
    let mut d = vec![s; n];
    d.push(-1.0);
    d
}

pub fn ambient_metric_determinant(t: f64, n: usize) -> f64 {
    -((2 * n) as f64 * t).exp()
}

/// `g(X, Y)` at time `t` for ambient vectors with `n + 1` components.
pub fn ambient_inner(t: f64, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = x.len() - 1;
    let s = (2.0 * t).exp();
    let spatial: f64 = (0..n).map(|i| x[i] * y[i]).sum();
    s * spatial - x[n] * y[n]
}

/// Image of a point under the isometry `O_a(x, t) = (e^a x, t - a)`.
pub fn isometry_point(p: &AmbientPoint, a: f64) -> AmbientPoint {
    let k = a.exp();
    AmbientPoint {
        x: p.x.iter().map(|c| k * c).collect(),
        t: p.t - a,
    }
}

/// Pullback `O_a^* g` evaluated on the coordinate basis at `p`, returned as a
/// diagonal. Equal to `ambient_metric(p.t, n)` because `O_a` is an isometry.
pub fn isometry_pullback_metric(p: &AmbientPoint, a: f64) -> Vec<f64> {
    let n = p.dimension();
    let image = isometry_point(p, a);
    let target = ambient_metric(image.t, n);
    // dO_a = diag(e^a, ..., e^a, 1)
    let k2 = (2.0 * a).exp();
    let mut d: Vec<f64> = target[..n].iter().map(|g| g * k2).collect();
    d.push(target[n]);
    d
}

/// Maps a graph field by `O_a`: `u'(y) = u(e^{-a} y) - a`, resampled onto `target`.
pub fn isometry_field(u: &Field, a: f64, target: &Grid) -> Result<Field> {
    if target.dimension != u.grid().dimension || target.mode != u.grid().mode {
        return Err(Error::InvalidGrid(
            "isometry target must share dimension and mode with the source".into(),
        ));
    }
    let k = (-a).exp();
    let mut values = Vec::with_capacity(target.node_count());
    for idx in 0..target.node_count() {
        let y = target.node_coords(idx);
        let pulled: Vec<f64> = y.iter().map(|c| c * k).collect();
        values.push(interpolate(u, &pulled)? - a);
    }
    Field::new(*target, values)
}

/// Pointwise 2-jet of a height function.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSample {
    pub point: AmbientPoint,
    pub du: DVector<f64>,
    pub d2u: DMatrix<f64>,
}

impl GraphSample {
    pub fn new(x: Vec<f64>, u: f64, du: Vec<f64>, d2u: DMatrix<f64>) -> Result<Self> {
        Self::with_floor(x, u, du, d2u, MARGIN_FLOOR)
    }

    pub fn with_floor(
        x: Vec<f64>,
        u: f64,
        du: Vec<f64>,
        d2u: DMatrix<f64>,
        floor: f64,
    ) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::InvalidSample("dimension must be positive".into()));
        }
        if du.len() != n || d2u.nrows() != n || d2u.ncols() != n {
            return Err(Error::InvalidSample(format!(
                "jet shapes do not match dimension {n}"
            )));
        }
        if !u.is_finite()
            || x.iter().any(|c| !c.is_finite())
            || du.iter().any(|c| !c.is_finite())
            || d2u.iter().any(|c| !c.is_finite())
        {
            return Err(Error::InvalidSample("non-finite entry".into()));
        }
        let scale = d2u.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (d2u[(i, j)] - d2u[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidSample("Hessian is not symmetric".into()));
                }
            }
        }
        let sample = Self {
            point: AmbientPoint { x, t: u },
            du: DVector::from_vec(du),
            d2u,
        };
        let margin = sample.margin();
        if !(margin > floor) {
            return Err(Error::NonSpacelike {
                node: None,
                margin,
                floor,
            });
        }
        Ok(sample)
    }

    /// Flat-slice sample `u ≡ c` at `x`.
    pub fn slice(x: Vec<f64>, c: f64) -> Self {
        let n = x.len();
        Self {
            point: AmbientPoint { x, t: c },
            du: DVector::zeros(n),
            d2u: DMatrix::zeros(n, n),
        }
    }

    pub fn dimension(&self) -> usize {
        self.du.len()
    }

    pub fn u(&self) -> f64 {
        self.point.t
    }

    /// `m = 1 - e^{-2u} |Du|^2`.
    pub fn margin(&self) -> f64 {
        1.0 - (-2.0 * self.u()).exp() * self.du.norm_squared()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceGeometry {
    pub point: AmbientPoint,
    pub du: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub gamma_inv: DMatrix<f64>,
    pub sqrt_det_gamma: f64,
    /// Future unit normal in the `(∂_1, …, ∂_n, ∂_t)` basis.
    pub nu: DVector<f64>,
    pub v: f64,
    pub h: DMatrix<f64>,
    pub mean_curvature: f64,
    pub a2: f64,
    pub a2_traceless: f64,
    /// Principal curvatures (eigenvalues of `γ^{-1} h`), ascending.
    pub principal: DVector<f64>,
    pub lambda1: f64,
    pub margin: f64,
}

impl SurfaceGeometry {
    pub fn dimension(&self) -> usize {
        self.du.len()
    }

    /// `g(ν, ∂_i) = e^{2t} ν^i`.
    pub fn nu_dot_coord(&self, i: usize) -> f64 {
        (2.0 * self.point.t).exp() * self.nu[i]
    }

    /// Tangent coordinates `T^k` of `∂_t^⊤ = T^k e_k`, i.e. `-γ^{kl} u_l`.
    pub fn dt_tangent(&self) -> DVector<f64> {
        -(&self.gamma_inv * &self.du)
    }

    /// `A(∂_t^⊤, ∂_t^⊤)`.
    pub fn a_tt(&self) -> f64 {
        let t = self.dt_tangent();
        t.dot(&(&self.h * &t))
    }

    /// `Σ_i A(e_i, ∂_t^⊤)^2` over an orthonormal frame, i.e. `γ^{ij} (hT)_i (hT)_j`.
    pub fn a_et_sq(&self) -> f64 {
        let ht = &self.h * self.dt_tangent();
        ht.dot(&(&self.gamma_inv * &ht))
    }

    /// Embeds a tangent vector given in `e_k` coordinates into the ambient basis.
    pub fn tangent_to_ambient(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        let n = self.dimension();
        let mut out = DVector::zeros(n + 1);
        for k in 0..n {
            out[k] = coeffs[k];
        }
        out[n] = coeffs.dot(&self.du);
        out
    }
}

pub fn surface_geometry(sample: &GraphSample) -> Result<SurfaceGeometry> {
    surface_geometry_with_floor(sample, MARGIN_FLOOR)
}

pub fn surface_geometry_with_floor(sample: &GraphSample, floor: f64) -> Result<SurfaceGeometry> {
    let n = sample.dimension();
    let u = sample.u();
    let du = &sample.du;
    let margin = sample.margin();
    if !(margin > floor) {
        return Err(Error::NonSpacelike {
            node: None,
            margin,
            floor,
        });
    }
    let e2u = (2.0 * u).exp();
    let emu2 = 1.0 / e2u;
    let v = 1.0 / margin.sqrt();

    let outer = du * du.transpose();
    let gamma = DMatrix::identity(n, n) * e2u - &outer;
    let chol = nalgebra::Cholesky::new(gamma.clone()).ok_or(Error::SingularMetric {
        condition: f64::INFINITY,
    })?;
    let l = chol.l();
    let diag: Vec<f64> = (0..n).map(|i| l[(i, i)]).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = (dmax / dmin).powi(2);
    if !(condition < CONDITION_CEILING) {
        return Err(Error::SingularMetric { condition });
    }
    let sqrt_det_gamma: f64 = diag.iter().product();
    let gamma_inv = chol.inverse();

    let mut nu = DVector::zeros(n + 1);
    for i in 0..n {
        nu[i] = emu2 * du[i] * v;
    }
    nu[n] = v;

    let h = (&sample.d2u + DMatrix::identity(n, n) * e2u - outer * 2.0) * v;
    let h = (&h + h.transpose()) * 0.5;

    let shape = &gamma_inv * &h;
    let mean_curvature = shape.trace();
    let a2 = (&shape * &shape).trace();

    // Symmetric pencil h w = κ γ w reduced to L^{-1} h L^{-T}.
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMetric { condition })?;
    let sym = &linv * &h * linv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut principal: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    principal.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lambda1 = principal.iter().fold(0.0_f64, |acc, k| acc.max(k.abs()));

    Ok(SurfaceGeometry {
        point: sample.point.clone(),
        du: du.clone(),
        gamma,
        gamma_inv,
        sqrt_det_gamma,
        nu,
        v,
        h,
        mean_curvature,
        a2,
        a2_traceless: a2 - mean_curvature * mean_curvature / n as f64,
        principal: DVector::from_vec(principal),
        lambda1,
        margin,
    })
}

/// Vertical velocity `∂_s u` at fixed `x` of the graphical flow, equal to `H / v`.
///
/// Following a point along the normal the height changes at rate `H v`; at fixed `x`
/// the same motion reads `H / v`. Uses the closed form
/// `H/v = n + E Δu + (E^2 Du·D²u·Du - p) / m`, which needs no matrix inverse.
/// Returns `None` when the sample is not spacelike beyond `floor`.
#[inline]
pub fn flow_speed(u: f64, du: &[f64], d2u: impl Fn(usize, usize) -> f64, floor: f64) -> Option<f64> {
    let n = du.len();
    let e = (-2.0 * u).exp();
    let q: f64 = du.iter().map(|d| d * d).sum();
    let p = e * q;
    let m = 1.0 - p;
    if !(m > floor) {
        return None;
    }
    let mut lap = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        lap += d2u(i, i);
        if du[i] != 0.0 {
            for j in 0..n {
                quad += du[i] * d2u(i, j) * du[j];
            }
        }
    }
    Some(n as f64 + e * lap + (e * e * quad - p) / m)
}

/// `X^⊤ = X + g(X, ν) ν`, the tangential part of an ambient vector.
pub fn tangential_projection(x: &DVector<f64>, geom: &SurfaceGeometry) -> DVector<f64> {
    let c = ambient_inner(geom.point.t, x, &geom.nu);
    x + &geom.nu * c
}

/// Closed-form `(Δx_1, …, Δx_n, Δt)` on the surface:
/// `Δx_i = (H - 2v) e^{-2t} g(ν, ∂_i)` and `Δt = -n + Hv - (v^2 - 1)`.
pub fn coordinate_laplacians_closed_form(geom: &SurfaceGeometry) -> (Vec<f64>, f64) {
    let n = geom.dimension();
    let t = geom.point.t;
    let e = (-2.0 * t).exp();
    let h = geom.mean_curvature;
    let v = geom.v;
    let dx = (0..n)
        .map(|i| h * e * geom.nu_dot_coord(i) - 2.0 * e * v * geom.nu_dot_coord(i))
        .collect();
    let dt = -(n as f64) + h * v - (v * v - 1.0);
    (dx, dt)
}

/// Second-order Taylor data of an ambient function `f(x, t)` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientJet {
    pub value: f64,
    /// Partial derivatives `(∂_1 f, …, ∂_n f, ∂_t f)`.
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl AmbientJet {
    pub fn coordinate(i: usize, p: &AmbientPoint) -> Self {
        let n = p.dimension();
        let mut grad = DVector::zeros(n + 1);
        grad[i] = 1.0;
        Self {
            value: p.x[i],
            grad,
            hess: DMatrix::zeros(n + 1, n + 1),
        }
    }

    pub fn time(p: &AmbientPoint) -> Self {
        let n = p.dimension();
        let mut grad = DVector::zeros(n + 1);
        grad[n] = 1.0;
        Self {
            value: p.t,
            grad,
            hess: DMatrix::zeros(n + 1, n + 1),
        }
    }

    /// Jet of `r_α = e^{αt} |x|^2`.
    pub fn cutoff(p: &AmbientPoint, alpha: f64) -> Self {
        let n = p.dimension();
        let ea = (alpha * p.t).exp();
        let x2: f64 = p.x.iter().map(|c| c * c).sum();
        let r = ea * x2;
        let mut grad = DVector::zeros(n + 1);
        let mut hess = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            grad[i] = 2.0 * p.x[i] * ea;
            hess[(i, i)] = 2.0 * ea;
            hess[(i, n)] = 2.0 * alpha * p.x[i] * ea;
            hess[(n, i)] = hess[(i, n)];
        }
        grad[n] = alpha * r;
        hess[(n, n)] = alpha * alpha * r;
        Self { value: r, grad, hess }
    }
}

/// Ambient Hessian `Hess f(∂_a, ∂_b) = ∂_a∂_b f - Γ^c_ab ∂_c f`.
pub fn ambient_hessian(t: f64, jet: &AmbientJet) -> DMatrix<f64> {
    let n = jet.grad.len() - 1;
    let e2t = (2.0 * t).exp();
    let mut out = jet.hess.clone();
    for i in 0..n {
        // Γ^t_ii = e^{2t}
        out[(i, i)] -= e2t * jet.grad[n];
        // Γ^i_it = Γ^i_ti = 1
        out[(i, n)] -= jet.grad[i];
        out[(n, i)] -= jet.grad[i];
    }
    out
}

/// Wave operator `□̄ f = g^{ab} Hess f(∂_a, ∂_b)`.
pub fn wave_operator(t: f64, jet: &AmbientJet) -> f64 {
    let n = jet.grad.len() - 1;
    let hess = ambient_hessian(t, jet);
    let e = (-2.0 * t).exp();
    (0..n).map(|i| e * hess[(i, i)]).sum::<f64>() - hess[(n, n)]
}

/// Surface Laplacian through the ambient route `Δf = □̄f + H ν(f) + Hess f(ν, ν)`.
pub fn laplacian_via_wave_operator(geom: &SurfaceGeometry, jet: &AmbientJet) -> f64 {
    let t = geom.point.t;
    let hess = ambient_hessian(t, jet);
    let nu_f = geom.nu.dot(&jet.grad);
    let hnn = geom.nu.dot(&(&hess * &geom.nu));
    wave_operator(t, jet) + geom.mean_curvature * nu_f + hnn
}

/// Ambient gradient vector `∇̄f = g^{ab} ∂_b f ∂_a`.
pub fn ambient_gradient(t: f64, jet: &AmbientJet) -> DVector<f64> {
    let n = jet.grad.len() - 1;
    let e = (-2.0 * t).exp();
    let mut out = DVector::zeros(n + 1);
    for i in 0..n {
        out[i] = e * jet.grad[i];
    }
    out[n] = -jet.grad[n];
    out
}

/// `|∇f|^2` on the surface from ambient data: `g(∇̄f, ∇̄f) + ν(f)^2`.
pub fn surface_grad_sq_via_ambient(geom: &SurfaceGeometry, jet: &AmbientJet) -> f64 {
    let t = geom.point.t;
    let g = ambient_gradient(t, jet);
    let nu_f = geom.nu.dot(&jet.grad);
    ambient_inner(t, &g, &g) + nu_f * nu_f
}

/// Coordinate derivative `∂_i v` by the chain rule on the 2-jet.
pub fn v_gradient_from_jet(sample: &GraphSample) -> DVector<f64> {
    let e = (-2.0 * sample.u()).exp();
    let m = sample.margin();
    let v3 = m.powf(-1.5);
    let q = sample.du.norm_squared();
    let hdu = &sample.d2u * &sample.du;
    // ∂_i v = ½ v^3 ∂_i(E |Du|^2),  ∂_i(E |Du|^2) = E(-2 u_i |Du|^2 + 2 u_k u_ki)
    DVector::from_fn(sample.dimension(), |i, _| {
        0.5 * v3 * e * (-2.0 * sample.du[i] * q + 2.0 * hdu[i])
    })
}

/// Right side of `∇_i v = g(e_i, ∂_t) v - g(∂_t, h_ij e_j)` in coordinates:
/// `-u_i v + h_il γ^{lk} u_k`.
pub fn v_gradient_closed_form(geom: &SurfaceGeometry) -> DVector<f64> {
    let gdu = &geom.gamma_inv * &geom.du;
    -&geom.du * geom.v + &geom.h * gdu
}

/// Right side of `|∇v|^2 = v^2(v^2-1) - 2A(∂_t^⊤,∂_t^⊤) v + Σ A(e_i,∂_t^⊤)^2`.
pub fn grad_v_sq_closed_form(geom: &SurfaceGeometry) -> f64 {
    let v = geom.v;
    v * v * (v * v - 1.0) - 2.0 * geom.a_tt() * v + geom.a_et_sq()
}

/// `|A|^2 - ((n+1)/n) λ_1^2 + H^2`; nonnegative on every spacelike hypersurface.
pub fn bartnik_slack(geom: &SurfaceGeometry) -> f64 {
    let n = geom.dimension() as f64;
    geom.a2 - (n + 1.0) / n * geom.lambda1 * geom.lambda1 + geom.mean_curvature.powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CutoffSpec {
    pub alpha: f64,
    pub radius: f64,
    pub epsilon: f64,
    pub t_min: f64,
}

impl CutoffSpec {
    pub fn new(alpha: f64, radius: f64, epsilon: f64, t_min: f64) -> Result<Self> {
        let spec = Self {
            alpha,
            radius,
            epsilon,
            t_min,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::Validation(format!(
                "alpha ∈ (0,2) violated: alpha = {}",
                self.alpha
            )));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Validation(format!(
                "radius > 0 violated: radius = {}",
                self.radius
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Validation(format!(
                "epsilon > 0 violated: epsilon = {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn value(&self, p: &AmbientPoint) -> f64 {
        (self.alpha * p.t).exp() * p.x.iter().map(|c| c * c).sum::<f64>()
    }

    /// Membership in `D_{α,R} = {e^{αt}|x|^2 ≤ R}`.
    pub fn contains(&self, p: &AmbientPoint) -> bool {
        self.value(p) <= self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CutoffBounds {
    pub r: f64,
    /// `α^2 (1-ε) r^2 (v^2-1) - ε r v^2`
    pub grad_sq_lower: f64,
    /// `2 α^2 r^2 (v^2-1) + ε r v^2`
    pub grad_sq_upper: f64,
    /// `(-α^2 r - ε) v^2`
    pub heat_lower: f64,
    /// Exact `|∇r|^2` from ambient data.
    pub grad_sq_exact: f64,
    /// Exact `(∂_s - Δ) r` along the normal flow, `-□̄r - Hess r(ν, ν)`.
    pub heat_exact: f64,
}

pub fn cutoff_value_and_bounds(
    point: &AmbientPoint,
    spec: &CutoffSpec,
    geom: &SurfaceGeometry,
) -> Result<CutoffBounds> {
    if point.t < spec.t_min {
        return Err(Error::BelowThreshold {
            t: point.t,
            t_min: spec.t_min,
        });
    }
    let r = spec.value(point);
    let (a, eps, v2) = (spec.alpha, spec.epsilon, geom.v * geom.v);
    let jet = AmbientJet::cutoff(point, a);
    let hess = ambient_hessian(point.t, &jet);
    let heat_exact = -wave_operator(point.t, &jet) - geom.nu.dot(&(&hess * &geom.nu));
    Ok(CutoffBounds {
        r,
        grad_sq_lower: a * a * (1.0 - eps) * r * r * (v2 - 1.0) - eps * r * v2,
        grad_sq_upper: 2.0 * a * a * r * r * (v2 - 1.0) + eps * r * v2,
        heat_lower: (-a * a * r - eps) * v2,
        grad_sq_exact: surface_grad_sq_via_ambient(geom, &jet),
        heat_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample(x: Vec<f64>, u: f64, du: Vec<f64>) -> GraphSample {
        let n = x.len();
        GraphSample::new(x, u, du, DMatrix::zeros(n, n)).unwrap()
    }

    #[test]
    fn metric_values() {
        assert_eq!(ambient_metric(0.0, 3), vec![1.0, 1.0, 1.0, -1.0]);
        let m = ambient_metric(2f64.ln(), 3);
        for g in &m[..3] {
            assert_abs_diff_eq!(*g, 4.0, epsilon = 1e-14);
        }
        assert_eq!(m[3], -1.0);
        assert_abs_diff_eq!(ambient_metric_determinant(2f64.ln(), 3), -64.0, epsilon = 1e-12);
    }

    #[test]
    fn isometry_maps_points() {
        let p = AmbientPoint::new(vec![1.0, 0.0, 0.0], 1.0);
        let q = isometry_point(&p, 2f64.ln());
        assert_abs_diff_eq!(q.x[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.t, 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert_eq!(isometry_point(&p, 0.0), p);
    }

    #[test]
    fn slice_geometry() {
        let c = 0.7;
        let g = surface_geometry(&GraphSample::slice(vec![0.3, -0.1, 2.0], c)).unwrap();
        let e2c = (2.0 * c).exp();
        assert_abs_diff_eq!(g.v, 1.0);
        assert_abs_diff_eq!(g.mean_curvature, 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(g.a2, 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(g.lambda1, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(g.a2_traceless, 0.0, epsilon = 1e-13);
        for i in 0..3 {
            assert_abs_diff_eq!(g.gamma[(i, i)], e2c, epsilon = 1e-12);
            assert_abs_diff_eq!(g.h[(i, i)], e2c, epsilon = 1e-12);
        }
    }

    #[test]
    fn tilted_samples_give_v_five_quarters() {
        let g = surface_geometry(&sample(vec![0.0; 3], 0.0, vec![0.6, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(g.margin, 0.64, epsilon = 1e-15);
        assert_abs_diff_eq!(g.v, 1.25, epsilon = 1e-14);
        let g = surface_geometry(&sample(vec![0.0; 3], 2f64.ln(), vec![1.2, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(1.0 - g.margin, 0.36, epsilon = 1e-14);
        assert_abs_diff_eq!(g.v, 1.25, epsilon = 1e-14);
    }

    #[test]
    fn normal_is_unit_future_and_orthogonal() {
        let d2u = DMatrix::from_row_slice(3, 3, &[0.3, 0.1, 0.0, 0.1, -0.2, 0.05, 0.0, 0.05, 0.4]);
        let s = GraphSample::new(vec![0.2, 0.1, -0.3], 0.4, vec![0.5, -0.3, 0.2], d2u).unwrap();
        let g = surface_geometry(&s).unwrap();
        let t = g.point.t;
        assert_abs_diff_eq!(ambient_inner(t, &g.nu, &g.nu), -1.0, epsilon = 1e-12);
        assert!(g.nu[3] > 0.0);
        let mut dt = DVector::zeros(4);
        dt[3] = 1.0;
        assert_abs_diff_eq!(-ambient_inner(t, &dt, &g.nu), g.v, epsilon = 1e-12);
        for i in 0..3 {
            let mut e = DVector::zeros(4);
            e[i] = 1.0;
            e[3] = s.du[i];
            assert_abs_diff_eq!(ambient_inner(t, &g.nu, &e), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_non_spacelike_and_bad_shapes() {
        let err = GraphSample::new(vec![0.0], 0.0, vec![1.0], DMatrix::zeros(1, 1)).unwrap_err();
        assert!(matches!(err, Error::NonSpacelike { .. }));
        let err = GraphSample::new(vec![0.0, 0.0], 0.0, vec![0.1], DMatrix::zeros(2, 2));
        assert!(matches!(err, Err(Error::InvalidSample(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let err = GraphSample::new(vec![0.0, 0.0], 0.0, vec![0.1, 0.0], asym);
        assert!(matches!(err, Err(Error::InvalidSample(_))));
    }

    #[test]
    fn tangential_projection_cases() {
        let n = 3;
        let mut dt = DVector::zeros(n + 1);
        dt[n] = 1.0;
        let flat = surface_geometry(&GraphSample::slice(vec![0.0; 3], 0.0)).unwrap();
        assert!(tangential_projection(&dt, &flat).norm() < 1e-15);

        let g = surface_geometry(&sample(vec![0.0; 3], 0.0, vec![0.6, 0.0, 0.0])).unwrap();
        let p = tangential_projection(&dt, &g);
        assert_abs_diff_eq!(ambient_inner(0.0, &p, &g.nu), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ambient_inner(0.0, &p, &p), 0.5625, epsilon = 1e-12);

        let mut e1 = DVector::zeros(n + 1);
        e1[0] = 1.0;
        e1[n] = 0.6;
        let p = tangential_projection(&e1, &g);
        assert!((p - e1).norm() < 1e-14);
    }

    #[test]
    fn coordinate_laplacian_cases() {
        let flat = surface_geometry(&GraphSample::slice(vec![0.0; 3], 0.0)).unwrap();
        let (dx, dt) = coordinate_laplacians_closed_form(&flat);
        assert!(dx.iter().all(|d| d.abs() < 1e-14));
        assert_abs_diff_eq!(dt, 0.0, epsilon = 1e-13);

        // H = 0, v = 2, t = 0, g(ν, ∂_1) = q
        let mut g = flat.clone();
        g.mean_curvature = 0.0;
        g.v = 2.0;
        let q = 0.37;
        g.nu[0] = q;
        let (dx, dt) = coordinate_laplacians_closed_form(&g);
        assert_abs_diff_eq!(dx[0], -4.0 * q, epsilon = 1e-15);
        assert_abs_diff_eq!(dt, -6.0, epsilon = 1e-15);
    }

    #[test]
    fn wave_operator_of_coordinates() {
        let p = AmbientPoint::new(vec![0.4, -1.0, 0.3], 0.8);
        for i in 0..3 {
            assert_abs_diff_eq!(wave_operator(p.t, &AmbientJet::coordinate(i, &p)), 0.0, epsilon = 1e-14);
            let h = ambient_hessian(p.t, &AmbientJet::coordinate(i, &p));
            assert_abs_diff_eq!(h[(i, 3)], -1.0);
        }
        assert_abs_diff_eq!(wave_operator(p.t, &AmbientJet::time(&p)), -3.0, epsilon = 1e-14);
        let h = ambient_hessian(p.t, &AmbientJet::time(&p));
        assert_abs_diff_eq!(h[(1, 1)], -(1.6f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn wave_route_matches_closed_forms() {
        let d2u = DMatrix::from_row_slice(3, 3, &[0.3, 0.1, 0.0, 0.1, -0.2, 0.05, 0.0, 0.05, 0.4]);
        let s = GraphSample::new(vec![0.2, 0.1, -0.3], 0.4, vec![0.5, -0.3, 0.2], d2u).unwrap();
        let g = surface_geometry(&s).unwrap();
        let (dx, dt) = coordinate_laplacians_closed_form(&g);
        for i in 0..3 {
            let w = laplacian_via_wave_operator(&g, &AmbientJet::coordinate(i, &g.point));
            assert_abs_diff_eq!(w, dx[i], epsilon = 1e-12);
        }
        let w = laplacian_via_wave_operator(&g, &AmbientJet::time(&g.point));
        assert_abs_diff_eq!(w, dt, epsilon = 1e-12);
    }

    #[test]
    fn cutoff_examples() {
        let spec = CutoffSpec::new(1.0, 2.0, 0.1, -10.0).unwrap();
        let p = AmbientPoint::new(vec![1.0, 0.0, 0.0], 0.0);
        let g = surface_geometry(&GraphSample::slice(p.x.clone(), 0.0)).unwrap();
        let b = cutoff_value_and_bounds(&p, &spec, &g).unwrap();
        assert_abs_diff_eq!(b.r, 1.0);

        // flat slice at t = 10 with r = 1
        let t = 10.0;
        let x1 = (-t / 2.0f64).exp();
        let p = AmbientPoint::new(vec![x1, 0.0, 0.0], t);
        let g = surface_geometry(&GraphSample::slice(p.x.clone(), t)).unwrap();
        let b = cutoff_value_and_bounds(&p, &spec, &g).unwrap();
        assert_abs_diff_eq!(b.r, 1.0, epsilon = 1e-12);
        let expected = 3.0 - 6.0 * (-10.0f64).exp();
        assert_abs_diff_eq!(b.heat_exact, expected, epsilon = 1e-10);
        assert!((b.heat_exact - 2.9997).abs() < 1e-4);
        assert!(b.heat_exact >= b.heat_lower);

        // x = 0 on a slice: |∇r|^2 = 0 and both bounds hold
        let p = AmbientPoint::new(vec![0.0; 3], 1.0);
        let g = surface_geometry(&GraphSample::slice(p.x.clone(), 1.0)).unwrap();
        let b = cutoff_value_and_bounds(&p, &spec, &g).unwrap();
        assert_eq!(b.grad_sq_exact, 0.0);
        assert!(b.grad_sq_lower <= 0.0 && b.grad_sq_upper >= 0.0);

        let strict = CutoffSpec::new(1.0, 2.0, 0.1, 5.0).unwrap();
        assert!(matches!(
            cutoff_value_and_bounds(&p, &strict, &g),
            Err(Error::BelowThreshold { .. })
        ));
        assert!(CutoffSpec::new(2.5, 1.0, 0.1, 0.0).is_err());
        assert!(CutoffSpec::new(1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn flow_speed_matches_full_geometry() {
        let d2u = DMatrix::from_row_slice(3, 3, &[0.3, 0.1, 0.0, 0.1, -0.2, 0.05, 0.0, 0.05, 0.4]);
        let s = GraphSample::new(vec![0.2, 0.1, -0.3], -0.4, vec![0.3, -0.2, 0.1], d2u.clone()).unwrap();
        let g = surface_geometry(&s).unwrap();
        let du: Vec<f64> = s.du.iter().cloned().collect();
        let fast = flow_speed(s.u(), &du, |i, j| d2u[(i, j)], MARGIN_FLOOR).unwrap();
        assert_abs_diff_eq!(fast, g.mean_curvature / g.v, epsilon = 1e-12);
    }
}
