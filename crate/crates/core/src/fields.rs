//! Lie-valued fields on finite cylinders over `S^3`.
//!
//! Fields are closure-backed evaluators `(t, omega) -> value`; grids only
//! enter at quadrature and sampling time. Derivatives in `t` use 4th-order
//! central stencils; sphere derivatives use geodesic stencils along the
//! `X_-` frame (whose orbits are great circles).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    frame_deriv, omega, phi_comps, psi, GeomError, GridConfig, S3Point, Sign, SphereGrid,
};
use crate::lie::LieMatrix;
use crate::S3_VOLUME;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("invalid neck scales: need 0 < lambda < delta^2 < 1, got lambda = {lambda}, delta = {delta}")]
    InvalidScales { lambda: f64, delta: f64 },
    #[error("too few slices: got {got}, need at least {need}")]
    TooFewSlices { got: usize, need: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Step for 4th-order stencils in `t`.
pub const FD_T_STEP: f64 = 5e-3;

/// Step for geodesic stencils on the sphere.
pub const FD_SPHERE_STEP: f64 = 5e-3;

/// Geometry of a neck cylinder `[log(lambda) - log(delta), log(delta)] x S^3`.
///
/// The body end (`Omega_L`) sits at `t = log(delta)`, the bubble end
/// (`Omega_R`) at `t = log(lambda) - log(delta)`, and the center at
/// `t = log(lambda) / 2`, where the weight `eta(t) = e^t + lambda e^{-t}`
/// attains its minimum `2 sqrt(lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckGeometry {
    pub lambda: f64,
    pub delta: f64,
}

impl NeckGeometry {
    pub fn new(lambda: f64, delta: f64) -> Result<Self, FieldError> {
        if !(lambda > 0.0 && delta > 0.0 && delta < 1.0 && lambda < delta * delta) {
            return Err(FieldError::InvalidScales { lambda, delta });
        }
        Ok(NeckGeometry { lambda, delta })
    }

    /// Body end, `t = log(delta)`.
    pub fn t_left(&self) -> f64 {
        self.delta.ln()
    }

    /// Bubble end, `t = log(lambda) - log(delta)`.
    pub fn t_right(&self) -> f64 {
        self.lambda.ln() - self.delta.ln()
    }

    /// Center slice, `t = log(lambda) / 2`.
    pub fn t_center(&self) -> f64 {
        0.5 * self.lambda.ln()
    }

    /// Two-sided decay weight `eta(t) = e^t + lambda e^{-t}`.
    pub fn eta(&self, t: f64) -> f64 {
        t.exp() + self.lambda * (-t).exp()
    }

    pub fn len(&self) -> f64 {
        self.t_left() - self.t_right()
    }
}

/// Slice positions plus a sphere quadrature grid.
#[derive(Debug, Clone)]
pub struct CylGrid {
    pub ts: Vec<f64>,
    pub sphere: SphereGrid,
}

impl CylGrid {
    /// Evenly spaced slices over a neck, with the endpoints and the exact
    /// center slice always present.
    pub fn neck(geom: &NeckGeometry, n_slices: usize, cfg: GridConfig) -> Result<Self, FieldError> {
        if n_slices < 3 {
            return Err(FieldError::TooFewSlices {
                got: n_slices,
                need: 3,
            });
        }
        let (a, b) = (geom.t_right(), geom.t_left());
        let mut ts: Vec<f64> = (0..n_slices)
            .map(|i| a + (b - a) * i as f64 / (n_slices - 1) as f64)
            .collect();
        let c = geom.t_center();
        if !ts.iter().any(|t| (t - c).abs() < 1e-12) {
            ts.push(c);
            ts.sort_by(f64::total_cmp);
        }
        Ok(CylGrid {
            ts,
            sphere: SphereGrid::product(cfg)?,
        })
    }

    /// Evenly spaced slices on `[-m, m]`.
    pub fn symmetric(m: f64, n_slices: usize, cfg: GridConfig) -> Result<Self, FieldError> {
        if n_slices < 3 {
            return Err(FieldError::TooFewSlices {
                got: n_slices,
                need: 3,
            });
        }
        let ts = (0..n_slices)
            .map(|i| -m + 2.0 * m * i as f64 / (n_slices - 1) as f64)
            .collect();
        Ok(CylGrid {
            ts,
            sphere: SphereGrid::product(cfg)?,
        })
    }
}

/// Value of a Lie-algebra-valued one-form at a cylinder point, in the frame
/// `{dt, phi_{-,j}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieOneForm {
    pub dt: LieMatrix,
    pub comps: [LieMatrix; 3],
}

impl LieOneForm {
    pub fn zero(dim: usize) -> Self {
        LieOneForm {
            dt: LieMatrix::zeros(dim),
            comps: [
                LieMatrix::zeros(dim),
                LieMatrix::zeros(dim),
                LieMatrix::zeros(dim),
            ],
        }
    }

    pub fn norm(&self) -> f64 {
        (self.dt.inner(&self.dt) + self.comps.iter().map(|c| c.inner(c)).sum::<f64>()).sqrt()
    }
}

impl std::ops::Add for LieOneForm {
    type Output = LieOneForm;
    fn add(self, rhs: LieOneForm) -> LieOneForm {
        let [a1, a2, a3] = self.comps;
        let [b1, b2, b3] = rhs.comps;
        LieOneForm {
            dt: self.dt + rhs.dt,
            comps: [a1 + b1, a2 + b2, a3 + b3],
        }
    }
}

impl std::ops::Sub for LieOneForm {
    type Output = LieOneForm;
    fn sub(self, rhs: LieOneForm) -> LieOneForm {
        let [a1, a2, a3] = self.comps;
        let [b1, b2, b3] = rhs.comps;
        LieOneForm {
            dt: self.dt - rhs.dt,
            comps: [a1 - b1, a2 - b2, a3 - b3],
        }
    }
}

impl std::ops::Mul<f64> for LieOneForm {
    type Output = LieOneForm;
    fn mul(self, rhs: f64) -> LieOneForm {
        let [a1, a2, a3] = self.comps;
        LieOneForm {
            dt: self.dt * rhs,
            comps: [a1 * rhs, a2 * rhs, a3 * rhs],
        }
    }
}

/// Lie-valued two-form value in the frame `{dt, phi_{-,j}}`, antisymmetric
/// 4x4 array of matrices.
#[derive(Debug, Clone)]
pub struct LieTwoForm {
    pub c: [[LieMatrix; 4]; 4],
}

impl LieTwoForm {
    pub fn zero(dim: usize) -> Self {
        LieTwoForm {
            c: std::array::from_fn(|_| std::array::from_fn(|_| LieMatrix::zeros(dim))),
        }
    }

    /// `<F, G> = sum_mn <F_mn, G_mn>` (full contraction over form indices).
    pub fn inner(&self, other: &LieTwoForm) -> f64 {
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                acc += self.c[a][b].inner(&other.c[a][b]);
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Interior product with a frame vector given by components `v` against
    /// `{dt, X_{-,j}}`: `(iota_v F)_b = sum_a v_a F_ab`.
    pub fn contract_frame(&self, v: &[f64; 4]) -> LieOneForm {
        let dim = self.c[0][0].dim();
        let mut out = LieOneForm::zero(dim);
        for b in 0..4 {
            let mut acc = LieMatrix::zeros(dim);
            for a in 0..4 {
                if v[a] != 0.0 {
                    acc = acc + &self.c[a][b] * v[a];
                }
            }
            if b == 0 {
                out.dt = acc;
            } else {
                out.comps[b - 1] = acc;
            }
        }
        out
    }

    /// Scales every component.
    pub fn scale(&self, s: f64) -> LieTwoForm {
        LieTwoForm {
            c: std::array::from_fn(|a| std::array::from_fn(|b| &self.c[a][b] * s)),
        }
    }
}

type ScalarEval = Arc<dyn Fn(f64, &S3Point) -> LieMatrix + Send + Sync>;
type OneFormEval = Arc<dyn Fn(f64, &S3Point) -> LieOneForm + Send + Sync>;

/// Closure-backed Lie-valued scalar field on the cylinder.
#[derive(Clone)]
pub struct ScalarLieField {
    pub dim: usize,
    eval: ScalarEval,
}

impl ScalarLieField {
    pub fn new(dim: usize, eval: impl Fn(f64, &S3Point) -> LieMatrix + Send + Sync + 'static) -> Self {
        ScalarLieField {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_, _| LieMatrix::zeros(dim))
    }

    pub fn at(&self, t: f64, p: &S3Point) -> LieMatrix {
        (self.eval)(t, p)
    }

    /// 4th-order `d/dt`.
    pub fn dt(&self, t: f64, p: &S3Point) -> LieMatrix {
        let h = FD_T_STEP;
        (self.at(t + h, p) - self.at(t - h, p)) * (8.0 / (12.0 * h))
            + (self.at(t - 2.0 * h, p) - self.at(t + 2.0 * h, p)) * (1.0 / (12.0 * h))
    }

    /// 4th-order `d^2/dt^2`.
    pub fn dtt(&self, t: f64, p: &S3Point) -> LieMatrix {
        let h = FD_T_STEP;
        (self.at(t + h, p) + self.at(t - h, p)) * (16.0 / (12.0 * h * h))
            + (self.at(t + 2.0 * h, p) + self.at(t - 2.0 * h, p)) * (-1.0 / (12.0 * h * h))
            + self.at(t, p) * (-30.0 / (12.0 * h * h))
    }

    /// Sphere gradient components `X_j f` at fixed `t`.
    pub fn sphere_grad(&self, t: f64, p: &S3Point) -> [LieMatrix; 3] {
        std::array::from_fn(|j| frame_deriv(j, p, |q| self.at(t, q), FD_SPHERE_STEP))
    }

    /// Laplace-Beltrami on the slice by geodesic stencils.
    pub fn sphere_laplacian(&self, t: f64, p: &S3Point) -> LieMatrix {
        let mut acc = LieMatrix::zeros(self.dim);
        for j in 0..3 {
            let v = crate::geometry::x_frame_vec(Sign::Minus, j, p);
            acc = acc
                + crate::geometry::geodesic_deriv2(p, &v, |q| self.at(t, q), FD_SPHERE_STEP);
        }
        acc
    }
}

/// Closure-backed Lie-valued one-form field on the cylinder.
#[derive(Clone)]
pub struct OneFormLieField {
    pub dim: usize,
    eval: OneFormEval,
}

impl OneFormLieField {
    pub fn new(dim: usize, eval: impl Fn(f64, &S3Point) -> LieOneForm + Send + Sync + 'static) -> Self {
        OneFormLieField {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_, _| LieOneForm::zero(dim))
    }

    pub fn at(&self, t: f64, p: &S3Point) -> LieOneForm {
        (self.eval)(t, p)
    }

    pub fn add(&self, other: &OneFormLieField) -> OneFormLieField {
        assert_eq!(self.dim, other.dim);
        let (a, b) = (self.clone(), other.clone());
        OneFormLieField::new(self.dim, move |t, p| a.at(t, p) + b.at(t, p))
    }

    /// `d/dt` of the whole one-form value.
    pub fn dt(&self, t: f64, p: &S3Point) -> LieOneForm {
        let h = FD_T_STEP;
        (self.at(t + h, p) - self.at(t - h, p)) * (8.0 / (12.0 * h))
            + (self.at(t - 2.0 * h, p) - self.at(t + 2.0 * h, p)) * (1.0 / (12.0 * h))
    }

    /// Codifferential `d^* A = -d_t f - sum_j X_j xi_j` on the cylinder.
    pub fn dstar(&self, t: f64, p: &S3Point) -> LieMatrix {
        let ddt = self.dt(t, p).dt;
        let mut div = LieMatrix::zeros(self.dim);
        for j in 0..3 {
            div = div + frame_deriv(j, p, |q| self.at(t, q).comps[j].clone(), FD_SPHERE_STEP);
        }
        &(-&ddt) - &div
    }

    /// Exterior derivative `dA` in frame components:
    /// `(dA)_{0b} = d_t xi_b - X_b f`,
    /// `(dA)_{ab} = X_a xi_b - X_b xi_a - 2 eps_abj xi_j`.
    pub fn exterior_d(&self, t: f64, p: &S3Point) -> LieTwoForm {
        let dim = self.dim;
        let mut out = LieTwoForm::zero(dim);
        let dt_xi = self.dt(t, p);
        let val = self.at(t, p);
        for b in 0..3 {
            let grad_f_b = frame_deriv(b, p, |q| self.at(t, q).dt.clone(), FD_SPHERE_STEP);
            let entry = &dt_xi.comps[b] - &grad_f_b;
            out.c[0][b + 1] = entry.clone();
            out.c[b + 1][0] = -&entry;
        }
        for a in 0..3 {
            for b in (a + 1)..3 {
                let xa = frame_deriv(a, p, |q| self.at(t, q).comps[b].clone(), FD_SPHERE_STEP);
                let xb = frame_deriv(b, p, |q| self.at(t, q).comps[a].clone(), FD_SPHERE_STEP);
                // eps_abj with (a,b) ascending pairs: (0,1)->j=2 (+), (0,2)->j=1 (-), (1,2)->j=0 (+)
                let (j, sgn) = match (a, b) {
                    (0, 1) => (2usize, 1.0),
                    (0, 2) => (1, -1.0),
                    _ => (0, 1.0),
                };
                let entry = &(&xa - &xb) - &(&val.comps[j] * (2.0 * sgn));
                out.c[a + 1][b + 1] = entry.clone();
                out.c[b + 1][a + 1] = -&entry;
            }
        }
        out
    }

    /// Curvature `F = dA + A ^ A` (commutator wedge).
    pub fn curvature_at(&self, t: f64, p: &S3Point) -> LieTwoForm {
        let mut f = self.exterior_d(t, p);
        let val = self.at(t, p);
        let comp = |idx: usize| -> &LieMatrix {
            if idx == 0 {
                &val.dt
            } else {
                &val.comps[idx - 1]
            }
        };
        for a in 0..4 {
            for b in (a + 1)..4 {
                let comm = comp(a).commutator(comp(b));
                f.c[a][b] = &f.c[a][b] + &comm;
                f.c[b][a] = -&f.c[a][b];
            }
        }
        f
    }
}

/// Per-slice amplitudes of a one-form field against the low-mode table,
/// plus the `L^2` norm of what is left on the slice.
#[derive(Debug, Clone)]
pub struct SliceModes {
    /// Projection of `f = A(d_t)` on the constant.
    pub f_const: LieMatrix,
    /// Projection of `f` on `omega_i`, `i = 1..4`.
    pub f_omega: [LieMatrix; 4],
    /// Projection of `xi` on `psi_i`, `i = 1..4`.
    pub xi_psi: [LieMatrix; 4],
    /// Projection of `xi` on `phi_{+,i}`, `i = 1..3`.
    pub xi_phi_plus: [LieMatrix; 3],
    /// Projection of `xi` on `phi_{-,i}`, `i = 1..3`.
    pub xi_phi_minus: [LieMatrix; 3],
    /// Slice `L^2` norm of the out-of-table content of `f`.
    pub residual_f: f64,
    /// Slice `L^2` norm of the out-of-table content of `xi`.
    pub residual_xi: f64,
}

/// Projects one slice of `a` onto the mode table. The table is `L^2`
/// orthogonal, so the projection is a diagonal solve with norms
/// `|1|^2 = |S^3|`, `|omega_i|^2 = |S^3|/4`, `|psi_i|^2 = 3|S^3|/4`,
/// `|phi_{s,i}|^2 = |S^3|`.
pub fn project_slice(a: &OneFormLieField, t: f64, sphere: &SphereGrid) -> SliceModes {
    let dim = a.dim;
    let zero = || LieMatrix::zeros(dim);
    let mut f_const = zero();
    let mut f_omega: [LieMatrix; 4] = std::array::from_fn(|_| zero());
    let mut xi_psi: [LieMatrix; 4] = std::array::from_fn(|_| zero());
    let mut xi_phi_plus: [LieMatrix; 3] = std::array::from_fn(|_| zero());
    let mut xi_phi_minus: [LieMatrix; 3] = std::array::from_fn(|_| zero());

    let vals: Vec<LieOneForm> = sphere.nodes.iter().map(|p| a.at(t, p)).collect();

    for ((p, w), v) in sphere.nodes.iter().zip(sphere.weights.iter()).zip(&vals) {
        f_const = f_const + &v.dt * *w;
        for i in 0..4 {
            f_omega[i] = f_omega[i].clone() + &v.dt * (*w * omega(i + 1, p).unwrap());
        }
        for i in 0..4 {
            let c = psi(i + 1, p).unwrap().comps;
            let mut acc = zero();
            for j in 0..3 {
                acc = acc + &v.comps[j] * c[j];
            }
            xi_psi[i] = xi_psi[i].clone() + acc * *w;
        }
        for i in 0..3 {
            let cp = phi_comps(Sign::Plus, i, p);
            let cm = phi_comps(Sign::Minus, i, p);
            let mut accp = zero();
            let mut accm = zero();
            for j in 0..3 {
                accp = accp + &v.comps[j] * cp[j];
                accm = accm + &v.comps[j] * cm[j];
            }
            xi_phi_plus[i] = xi_phi_plus[i].clone() + accp * *w;
            xi_phi_minus[i] = xi_phi_minus[i].clone() + accm * *w;
        }
    }

    f_const = f_const * (1.0 / S3_VOLUME);
    for v in f_omega.iter_mut() {
        *v = v.clone() * (4.0 / S3_VOLUME);
    }
    for v in xi_psi.iter_mut() {
        *v = v.clone() * (4.0 / (3.0 * S3_VOLUME));
    }
    for v in xi_phi_plus.iter_mut() {
        *v = v.clone() * (1.0 / S3_VOLUME);
    }
    for v in xi_phi_minus.iter_mut() {
        *v = v.clone() * (1.0 / S3_VOLUME);
    }

    // residuals: L^2 of field minus table content
    let mut res_f = 0.0;
    let mut res_xi = 0.0;
    for ((p, w), v) in sphere.nodes.iter().zip(sphere.weights.iter()).zip(&vals) {
        let mut f_fit = f_const.clone();
        for i in 0..4 {
            f_fit = f_fit + &f_omega[i] * omega(i + 1, p).unwrap();
        }
        let df = &v.dt - &f_fit;
        res_f += w * df.inner(&df);

        for j in 0..3 {
            let mut xj = zero();
            for i in 0..4 {
                xj = xj + &xi_psi[i] * psi(i + 1, p).unwrap().comps[j];
            }
            for i in 0..3 {
                xj = xj + &xi_phi_plus[i] * phi_comps(Sign::Plus, i, p)[j];
                xj = xj + &xi_phi_minus[i] * phi_comps(Sign::Minus, i, p)[j];
            }
            let dx = &v.comps[j] - &xj;
            res_xi += w * dx.inner(&dx);
        }
    }

    SliceModes {
        f_const,
        f_omega,
        xi_psi,
        xi_phi_plus,
        xi_phi_minus,
        residual_f: res_f.max(0.0).sqrt(),
        residual_xi: res_xi.max(0.0).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::su2_basis;

    fn neck() -> NeckGeometry {
        NeckGeometry::new(1e-3, 0.3).unwrap()
    }

    #[test]
    fn neck_geometry_validation_and_eta() {
        assert!(NeckGeometry::new(0.1, 0.3).is_err(), "lambda >= delta^2");
        assert!(NeckGeometry::new(-1.0, 0.3).is_err());
        let g = neck();
        assert!(g.t_right() < g.t_center() && g.t_center() < g.t_left());
        let tc = g.t_center();
        assert!((g.eta(tc) - 2.0 * g.lambda.sqrt()).abs() < 1e-15);
        assert!(g.eta(tc) <= g.eta(tc + 0.5) && g.eta(tc) <= g.eta(tc - 0.5));
    }

    #[test]
    fn neck_grid_contains_center_and_endpoints() {
        let g = neck();
        let grid = CylGrid::neck(&g, 9, GridConfig::field_default()).unwrap();
        assert!(grid.ts.iter().any(|t| (t - g.t_center()).abs() < 1e-12));
        assert!((grid.ts[0] - g.t_right()).abs() < 1e-12);
        assert!((grid.ts.last().unwrap() - g.t_left()).abs() < 1e-12);
    }

    #[test]
    fn fd_derivatives_on_exponential_mode() {
        let [i_hat, _, _] = su2_basis();
        let ih = i_hat.clone();
        let f = ScalarLieField::new(4, move |t, p| &ih * ((3f64.sqrt() * t).exp() * p.coords()[0]));
        let p = S3Point::new([0.3, -0.5, 0.7, 0.1]).unwrap();
        let d = f.dt(0.2, &p);
        let want = &i_hat * (3f64.sqrt() * (3f64.sqrt() * 0.2).exp() * p.coords()[0]);
        assert!((&d - &want).norm() < 1e-9);
        let dd = f.dtt(0.2, &p);
        let want = &i_hat * (3.0 * (3f64.sqrt() * 0.2).exp() * p.coords()[0]);
        assert!((&dd - &want).norm() < 1e-9);
        // sphere laplacian of omega_1 factor: -3 f
        let lap = f.sphere_laplacian(0.2, &p);
        let want = &i_hat * (-3.0 * (3f64.sqrt() * 0.2).exp() * p.coords()[0]);
        assert!((&lap - &want).norm() < 1e-7);
    }

    #[test]
    fn dstar_identities_on_modes() {
        let [i_hat, _, _] = su2_basis();
        // e^{2t} phi_{-,1} is coclosed
        let ih = i_hat.clone();
        let a = OneFormLieField::new(4, move |t, p| {
            let c = phi_comps(Sign::Minus, 0, p);
            LieOneForm {
                dt: LieMatrix::zeros(4),
                comps: std::array::from_fn(|j| &ih * ((2.0 * t).exp() * c[j])),
            }
        });
        let p = S3Point::new([0.2, 0.9, -0.1, 0.4]).unwrap();
        assert!(a.dstar(0.1, &p).norm() < 1e-8);

        // d*(e^{sqrt3 t} psi_2) = 3 e^{sqrt3 t} omega_2
        let ih = i_hat.clone();
        let a = OneFormLieField::new(4, move |t, p| {
            let c = psi(2, p).unwrap().comps;
            LieOneForm {
                dt: LieMatrix::zeros(4),
                comps: std::array::from_fn(|j| &ih * ((3f64.sqrt() * t).exp() * c[j])),
            }
        });
        let got = a.dstar(0.3, &p);
        let want = &i_hat * (3.0 * (3f64.sqrt() * 0.3).exp() * p.coords()[1]);
        assert!((&got - &want).norm() < 1e-7, "{}", (&got - &want).norm());

        // and the lambda-decorated variant e^{-sqrt3 (t - log lambda)} psi_2
        let lam: f64 = 1e-2;
        let ih = i_hat.clone();
        let a = OneFormLieField::new(4, move |t, p| {
            let c = psi(2, p).unwrap().comps;
            let amp = (-3f64.sqrt() * (t - lam.ln())).exp();
            LieOneForm {
                dt: LieMatrix::zeros(4),
                comps: std::array::from_fn(|j| &ih * (amp * c[j])),
            }
        });
        let t0 = 0.5 * lam.ln();
        let got = a.dstar(t0, &p);
        let want = &i_hat * (3.0 * (-3f64.sqrt() * (t0 - lam.ln())).exp() * p.coords()[1]);
        assert!((&got - &want).norm() < 1e-6);
    }

    #[test]
    fn exterior_d_matches_p_form_on_growing_mode() {
        // d(e^{2t} phi_{-,1} G) = e^{2t} P_{-,1} G
        let [_, j_hat, _] = su2_basis();
        let g = j_hat.clone();
        let a = OneFormLieField::new(4, move |t, p| {
            let c = phi_comps(Sign::Minus, 0, p);
            LieOneForm {
                dt: LieMatrix::zeros(4),
                comps: std::array::from_fn(|j| &g * ((2.0 * t).exp() * c[j])),
            }
        });
        let p = S3Point::new([-0.4, 0.2, 0.8, 0.5]).unwrap();
        let t = 0.25;
        let da = a.exterior_d(t, &p);
        let pf = crate::forms::p_form(Sign::Minus, 1, &crate::forms::CylPoint { t, omega: p })
            .unwrap();
        let scale = (2.0 * t).exp();
        for m in 0..4 {
            for n in 0..4 {
                let want = &j_hat * (scale * pf.m[(m, n)]);
                assert!(
                    (&da.c[m][n] - &want).norm() < 1e-7,
                    "component ({m},{n}): {} vs {}",
                    da.c[m][n].norm(),
                    want.norm()
                );
            }
        }
    }

    #[test]
    fn slice_projection_recovers_modes_exactly() {
        let [i_hat, j_hat, k_hat] = su2_basis();
        let (a1, a2, a3) = (i_hat.clone(), j_hat.clone(), k_hat.clone());
        let field = OneFormLieField::new(4, move |_t, p| {
            // f = 2.5 i^ + omega_3 j^ ; xi = psi_1 k^ + phi_{+,2} i^ + phi_{-,3} j^
            let dt = &(&a1 * 2.5) + &(&a2 * p.coords()[2]);
            let ps = psi(1, p).unwrap().comps;
            let cp = phi_comps(Sign::Plus, 1, p);
            let cm = phi_comps(Sign::Minus, 2, p);
            let comps = std::array::from_fn(|j| {
                &(&(&a3 * ps[j]) + &(&a1 * cp[j])) + &(&a2 * cm[j])
            });
            LieOneForm { dt, comps }
        });
        let sphere = SphereGrid::product(GridConfig::default()).unwrap();
        let modes = project_slice(&field, 0.0, &sphere);
        assert!((&modes.f_const - &(&i_hat * 2.5)).norm() < 1e-12);
        assert!((&modes.f_omega[2] - &j_hat).norm() < 1e-12);
        assert!((&modes.f_omega[0]).norm() < 1e-12);
        assert!((&modes.xi_psi[0] - &k_hat).norm() < 1e-12);
        assert!((&modes.xi_phi_plus[1] - &i_hat).norm() < 1e-12);
        assert!((&modes.xi_phi_minus[2] - &j_hat).norm() < 1e-12);
        assert!(modes.residual_f < 1e-12 && modes.residual_xi < 1e-12);
    }

    #[test]
    fn slice_projection_flags_out_of_table_content() {
        // x1 x2 is a second-order harmonic, orthogonal to the table
        let [i_hat, _, _] = su2_basis();
        let field = OneFormLieField::new(4, move |_t, p| LieOneForm {
            dt: &i_hat * (p.coords()[0] * p.coords()[1]),
            comps: std::array::from_fn(|_| LieMatrix::zeros(4)),
        });
        let sphere = SphereGrid::product(GridConfig::default()).unwrap();
        let modes = project_slice(&field, 0.0, &sphere);
        assert!((&modes.f_const).norm() < 1e-12);
        for i in 0..4 {
            assert!((&modes.f_omega[i]).norm() < 1e-12);
        }
        // |x1 x2|_{L2}^2 = |S^3| / 24
        let want = (S3_VOLUME / 24.0f64).sqrt();
        assert!((modes.residual_f - want).abs() < 1e-10);
    }
}
