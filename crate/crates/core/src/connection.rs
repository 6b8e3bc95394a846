//! Matrix-valued connections: the charge-one instanton family, curvature,
//! gauge transformations, pullback to neck cylinders, decay fitting, and
//! extraction of the harmonic neck-mode coefficients.
//!
//! `su(2)` values are written against the orthonormal triple of
//! [`crate::lie::su2_basis`]. With that normalization the instanton curvature
//! at its center is `2 sum_m Phi_{∓,m} (i^, j^, k^)` for scale 1, squared
//! norm 48. The corresponding potential is the quaternionic one-form
//! `Im(x-bar dx) / (s^2 + |x|^2)` carried through the same basis
//! identification, which pairs with the curvature under every linear
//! operation used here (pullbacks, slice projections, mode extraction,
//! boundary decomposition).

use nalgebra::{DMatrix, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{CylGrid, FieldError, LieOneForm, LieTwoForm, NeckGeometry, OneFormLieField};
use crate::forms::{phi_r4, Chart};
use crate::geometry::{phi_comps, x_frame_vec, GeomError, S3Point, Sign, SphereGrid};
use crate::lie::{su2_basis, LieMatrix};
use crate::report::fmt_f64_full;

pub use crate::fields::NeckGeometry as Geometry;

#[derive(Debug, Error)]
pub enum ConnectionError {
    #[error("instanton scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("chart of radius {have} does not cover the annulus up to {need}")]
    AnnulusNotCovered { have: f64, need: f64 },
    #[error("gauge field values are not orthogonal (defect {0})")]
    NonOrthogonalGauge(f64),
    #[error("too few slices for extraction: got {got}, need {need}")]
    TooFewSlices { got: usize, need: usize },
    #[error("regression slices too close (spacing {0})")]
    IllConditioned(f64),
    #[error("degenerate fit: field is identically zero")]
    DegenerateFit,
    #[error("input is not harmonic: relative Laplacian residual {residual} above {threshold}")]
    NotHarmonic { residual: f64, threshold: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Duality orientation of an instanton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    SelfDual,
    AntiSelfDual,
}

impl Orientation {
    /// Sign family of the curvature two-forms (`Phi_{-}` for ASD).
    pub fn form_sign(&self) -> Sign {
        match self {
            Orientation::SelfDual => Sign::Plus,
            Orientation::AntiSelfDual => Sign::Minus,
        }
    }
}

/// Lie-valued two-form on an `R^4` chart, antisymmetric coefficient array.
#[derive(Debug, Clone)]
pub struct LieTwoFormR4 {
    pub c: [[LieMatrix; 4]; 4],
    pub chart: Chart,
}

impl LieTwoFormR4 {
    pub fn zero(dim: usize, chart: Chart) -> Self {
        LieTwoFormR4 {
            c: std::array::from_fn(|_| std::array::from_fn(|_| LieMatrix::zeros(dim))),
            chart,
        }
    }

    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for row in &self.c {
            for v in row {
                acc += v.inner(v);
            }
        }
        acc.sqrt()
    }
}

/// Lie-valued potential on an `R^4` chart, components against `dx_mu`.
#[derive(Clone)]
pub struct R4Potential {
    pub dim: usize,
    /// Radius up to which the evaluator is valid (`None` = everywhere).
    pub max_radius: Option<f64>,
    eval: std::sync::Arc<dyn Fn(&Vector4<f64>) -> [LieMatrix; 4] + Send + Sync>,
}

impl R4Potential {
    pub fn new(
        dim: usize,
        max_radius: Option<f64>,
        eval: impl Fn(&Vector4<f64>) -> [LieMatrix; 4] + Send + Sync + 'static,
    ) -> Self {
        R4Potential {
            dim,
            max_radius,
            eval: std::sync::Arc::new(eval),
        }
    }

    pub fn at(&self, x: &Vector4<f64>) -> [LieMatrix; 4] {
        (self.eval)(x)
    }
}

/// The quaternionic one-forms `sigma_{s,m}` with `d sigma_{s,m} = 2 Phi_{s,m}`;
/// returns ambient covector components.
fn sigma_form(sign: Sign, m: usize, x: &Vector4<f64>) -> Vector4<f64> {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    match (sign, m) {
        (Sign::Minus, 0) => Vector4::new(-x2, x1, x4, -x3),
        (Sign::Minus, 1) => Vector4::new(-x3, -x4, x1, x2),
        (Sign::Minus, 2) => Vector4::new(-x4, x3, -x2, x1),
        (Sign::Plus, 0) => Vector4::new(-x2, x1, -x4, x3),
        (Sign::Plus, 1) => Vector4::new(-x3, x4, x1, -x2),
        (Sign::Plus, 2) => Vector4::new(-x4, -x3, x2, x1),
        _ => panic!("sigma index {m}"),
    }
}

/// A charge-one instanton on `R^4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instanton {
    pub center: Vector4<f64>,
    pub scale: f64,
    pub orientation: Orientation,
}

impl Instanton {
    /// Instanton centered at the cone point.
    pub fn centered(scale: f64, orientation: Orientation) -> Result<Self, ConnectionError> {
        Self::new(Vector4::zeros(), scale, orientation)
    }

    pub fn new(
        center: Vector4<f64>,
        scale: f64,
        orientation: Orientation,
    ) -> Result<Self, ConnectionError> {
        if !(scale > 0.0) {
            return Err(ConnectionError::InvalidScale(scale));
        }
        Ok(Instanton {
            center,
            scale,
            orientation,
        })
    }

    /// Curvature at `x`: `(2 s^2 / (s^2 + |x-c|^2)^2) sum_m Phi_{∓,m} e_m`
    /// with the orthonormal `su(2)` triple `e_m`.
    pub fn curvature_at(&self, x: &Vector4<f64>) -> LieTwoFormR4 {
        let basis = su2_basis();
        let d = x - self.center;
        let s2 = self.scale * self.scale;
        let amp = 2.0 * s2 / (s2 + d.norm_squared()).powi(2);
        let sign = self.orientation.form_sign();
        let mut out = LieTwoFormR4::zero(4, Chart::X);
        for m in 0..3 {
            let phi = phi_r4(sign, m + 1, Chart::X).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    out.c[a][b] = &out.c[a][b] + &(&basis[m] * (amp * phi.m[(a, b)]));
                }
            }
        }
        out
    }

    /// Scalar curvature magnitude `|F|(x) = 4 sqrt(3) s^2 / (s^2 + |x-c|^2)^2`.
    pub fn curvature_norm_at(&self, x: &Vector4<f64>) -> f64 {
        let d = x - self.center;
        let s2 = self.scale * self.scale;
        4.0 * 3f64.sqrt() * s2 / (s2 + d.norm_squared()).powi(2)
    }

    /// The potential `sum_m sigma_{∓,m}(x - c) / (s^2 + |x-c|^2) e_m`.
    pub fn potential(&self) -> R4Potential {
        let basis = su2_basis();
        let me = *self;
        let sign = self.orientation.form_sign();
        R4Potential::new(4, None, move |x| {
            let d = x - me.center;
            let u = 1.0 / (me.scale * me.scale + d.norm_squared());
            std::array::from_fn(|mu| {
                let mut acc = LieMatrix::zeros(4);
                for m in 0..3 {
                    acc = acc + &basis[m] * (u * sigma_form(sign, m, &d)[mu]);
                }
                acc
            })
        })
    }

    /// The curvature pulled to the cylinder through the cone map (conformal
    /// round metric), as a frame-component field.
    pub fn curvature_cylinder(&self) -> CurvatureField {
        let me = *self;
        CurvatureField::new(4, move |t, p| {
            let scale = (2.0 * t).exp();
            let x = p.vec() * t.exp();
            let amb = me.curvature_at(&x);
            frame_pull(&amb, p, scale)
        })
    }
}

/// Contracts an ambient Lie two-form against the cylinder frame
/// `{w, X_{-,j}(w)}`, times a conformal factor.
fn frame_pull(amb: &LieTwoFormR4, p: &S3Point, scale: f64) -> LieTwoForm {
    let mut frame = [p.vec(), Vector4::zeros(), Vector4::zeros(), Vector4::zeros()];
    for (j, slot) in frame.iter_mut().skip(1).enumerate() {
        *slot = x_frame_vec(Sign::Minus, j, p);
    }
    let dim = amb.c[0][0].dim();
    let mut out = LieTwoForm::zero(dim);
    for a in 0..4 {
        for b in 0..4 {
            let mut acc = LieMatrix::zeros(dim);
            for m in 0..4 {
                for n in 0..4 {
                    let w = frame[a][m] * frame[b][n];
                    if w != 0.0 {
                        acc = acc + &amb.c[m][n] * w;
                    }
                }
            }
            out.c[a][b] = &acc * scale;
        }
    }
    out
}

/// Connection one-form on a neck cylinder.
#[derive(Clone)]
pub struct GaugeField {
    pub geom: NeckGeometry,
    pub field: OneFormLieField,
}

impl GaugeField {
    pub fn new(geom: NeckGeometry, field: OneFormLieField) -> Self {
        GaugeField { geom, field }
    }

    pub fn dim(&self) -> usize {
        self.field.dim
    }

    /// Serializes slice samples to the documented JSON schema.
    pub fn to_json(&self, grid: &CylGrid) -> String {
        let mut out = String::from("{");
        out.push_str(&format!(
            "\"algebra_dim\":{},\"lambda\":{},\"delta\":{},\"slices\":[",
            self.dim(),
            fmt_f64_full(self.geom.lambda),
            fmt_f64_full(self.geom.delta)
        ));
        for (i, &t) in grid.ts.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{{\"t\":{},\"f\":[", fmt_f64_full(t)));
            for (k, p) in grid.sphere.nodes.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                push_matrix(&mut out, &self.field.at(t, p).dt);
            }
            out.push_str("],\"xi\":[");
            for (k, p) in grid.sphere.nodes.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let v = self.field.at(t, p);
                out.push('[');
                for (j, c) in v.comps.iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    push_matrix(&mut out, c);
                }
                out.push(']');
            }
            out.push_str("]}");
        }
        out.push_str("]}");
        out
    }
}

fn push_matrix(out: &mut String, m: &LieMatrix) {
    out.push('[');
    for (i, row) in m.to_rows().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64_full(*v));
        }
        out.push(']');
    }
    out.push(']');
}

/// Curvature two-form field on a cylinder.
#[derive(Clone)]
pub struct CurvatureField {
    pub dim: usize,
    eval: std::sync::Arc<dyn Fn(f64, &S3Point) -> LieTwoForm + Send + Sync>,
}

impl CurvatureField {
    pub fn new(
        dim: usize,
        eval: impl Fn(f64, &S3Point) -> LieTwoForm + Send + Sync + 'static,
    ) -> Self {
        CurvatureField {
            dim,
            eval: std::sync::Arc::new(eval),
        }
    }

    pub fn at(&self, t: f64, p: &S3Point) -> LieTwoForm {
        (self.eval)(t, p)
    }

    /// Per-slice sup of the pointwise norm over grid nodes.
    pub fn slice_sup(&self, t: f64, sphere: &SphereGrid) -> f64 {
        sphere
            .nodes
            .iter()
            .map(|p| self.at(t, p).norm())
            .fold(0.0, f64::max)
    }
}

/// `F = dA + A ^ A` of a gauge field, by stencils on the evaluator.
pub fn curvature(a: &GaugeField) -> CurvatureField {
    let f = a.field.clone();
    CurvatureField::new(a.dim(), move |t, p| f.curvature_at(t, p))
}

/// `A' = s^{-1} ds + s^{-1} A s` for an orthogonal-valued field `s`.
///
/// Orthogonality of `s` is spot-checked on a few cylinder points.
pub fn gauge_transform(
    a: &GaugeField,
    s: impl Fn(f64, &S3Point) -> DMatrix<f64> + Send + Sync + 'static,
) -> Result<GaugeField, ConnectionError> {
    let s = std::sync::Arc::new(s);
    let geom = a.geom;
    let dim = a.dim();
    // spot-check orthogonality
    let probes = [
        (geom.t_center(), S3Point::pole()),
        (geom.t_left(), S3Point::new([0.5, 0.5, 0.5, 0.5]).unwrap()),
        (geom.t_right(), S3Point::new([0.0, 0.6, -0.8, 0.0]).unwrap()),
    ];
    for (t, p) in &probes {
        let m = s(*t, p);
        let defect = (&m * m.transpose() - DMatrix::identity(dim, dim)).abs().max();
        if defect > 1e-8 {
            return Err(ConnectionError::NonOrthogonalGauge(defect));
        }
    }
    let field = a.field.clone();
    let out = OneFormLieField::new(dim, move |t, p| {
        let sv = s(t, p);
        let sinv = sv.transpose();
        let h = crate::fields::FD_T_STEP;
        let ds_dt = (s(t + h, p) - s(t - h, p)) * (8.0 / (12.0 * h))
            + (s(t - 2.0 * h, p) - s(t + 2.0 * h, p)) * (1.0 / (12.0 * h));
        let av = field.at(t, p);
        let dt = LieMatrix::skew_part(&sinv * ds_dt + &sinv * av.dt.as_matrix() * &sv);
        let comps = std::array::from_fn(|j| {
            let v = x_frame_vec(Sign::Minus, j, p);
            let ds = crate::geometry::geodesic_deriv(
                p,
                &v,
                |q| s(t, q),
                crate::fields::FD_SPHERE_STEP,
            );
            LieMatrix::skew_part(&sinv * ds + &sinv * av.comps[j].as_matrix() * &sv)
        });
        LieOneForm { dt, comps }
    });
    Ok(GaugeField::new(geom, out))
}

/// Pullback of a chart potential under the cone map `pi(t, w) = e^t w`.
pub fn to_cylinder(a: &R4Potential, geom: &NeckGeometry) -> Result<GaugeField, ConnectionError> {
    if let Some(r) = a.max_radius {
        if r < geom.delta {
            return Err(ConnectionError::AnnulusNotCovered {
                have: r,
                need: geom.delta,
            });
        }
    }
    let dim = a.dim;
    let a = a.clone();
    let field = OneFormLieField::new(dim, move |t, p| {
        let x = p.vec() * t.exp();
        let comps_amb = a.at(&x);
        let et = t.exp();
        let radial = p.vec();
        let mut dt = LieMatrix::zeros(dim);
        for mu in 0..4 {
            dt = dt + &comps_amb[mu] * (et * radial[mu]);
        }
        let comps = std::array::from_fn(|j| {
            let xj = x_frame_vec(Sign::Minus, j, p);
            let mut acc = LieMatrix::zeros(dim);
            for mu in 0..4 {
                acc = acc + &comps_amb[mu] * (et * xj[mu]);
            }
            acc
        });
        LieOneForm { dt, comps }
    });
    Ok(GaugeField::new(*geom, field))
}

/// The scale-`sqrt(lambda)`-free neck picture: the scale-`lambda` instanton
/// centered at the cone point, written in the gauge that is regular across
/// the neck. For the ASD orientation the connection is the pure decaying
/// mode family
/// `A = -lambda^2 / (lambda^2 + e^{2t}) sum_m phi_{+,m} e_m`
/// (mirror signs for SD).
pub fn neck_instanton(geom: &NeckGeometry, orientation: Orientation) -> GaugeField {
    let basis = su2_basis();
    let lam2 = geom.lambda * geom.lambda;
    let sign = match orientation {
        Orientation::AntiSelfDual => Sign::Plus,
        Orientation::SelfDual => Sign::Minus,
    };
    let field = OneFormLieField::new(4, move |t, p| {
        let amp = -lam2 / (lam2 + (2.0 * t).exp());
        let comps = std::array::from_fn(|j| {
            let mut acc = LieMatrix::zeros(4);
            for m in 0..3 {
                acc = acc + &basis[m] * (amp * phi_comps(sign, m, p)[j]);
            }
            acc
        });
        LieOneForm {
            dt: LieMatrix::zeros(4),
            comps,
        }
    });
    GaugeField::new(*geom, field)
}

// ---------------------------------------------------------------------------
// Decay fitting.
// ---------------------------------------------------------------------------

/// Two-exponential envelope fit of per-slice curvature sups.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayProfile {
    pub ts: Vec<f64>,
    pub sups: Vec<f64>,
    /// Coefficient of `e^{2t}`.
    pub c1: f64,
    /// Coefficient of `lambda^2 e^{-2t}`.
    pub c2: f64,
    /// Per-slice relative residuals of the fit.
    pub rel_residuals: Vec<f64>,
    pub max_rel_residual: f64,
}

/// Fits `sup|F|(t) ~ C1 e^{2t} + C2 lambda^2 e^{-2t}` by least squares on the
/// relative misfit (each slice weighted by its own sup), so faint slices
/// count as much as bright ones.
pub fn decay_profile(
    f: &CurvatureField,
    geom: &NeckGeometry,
    grid: &CylGrid,
) -> Result<DecayProfile, ConnectionError> {
    let sups: Vec<f64> = grid
        .ts
        .iter()
        .map(|&t| f.slice_sup(t, &grid.sphere))
        .collect();
    if sups.iter().all(|&s| s == 0.0) {
        return Err(ConnectionError::DegenerateFit);
    }
    let lam2 = geom.lambda * geom.lambda;
    let basis = |t: f64| [(2.0 * t).exp(), lam2 * (-2.0 * t).exp()];
    let (mut g11, mut g12, mut g22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &s) in grid.ts.iter().zip(sups.iter()) {
        if s <= 0.0 {
            continue;
        }
        let w = 1.0 / (s * s);
        let [b1, b2] = basis(t);
        g11 += w * b1 * b1;
        g12 += w * b1 * b2;
        g22 += w * b2 * b2;
        r1 += w * b1 * s;
        r2 += w * b2 * s;
    }
    let det = g11 * g22 - g12 * g12;
    if det.abs() < 1e-300 {
        return Err(ConnectionError::DegenerateFit);
    }
    let c1 = (g22 * r1 - g12 * r2) / det;
    let c2 = (g11 * r2 - g12 * r1) / det;
    let rel_residuals: Vec<f64> = grid
        .ts
        .iter()
        .zip(sups.iter())
        .map(|(&t, &s)| {
            let [b1, b2] = basis(t);
            let model = c1 * b1 + c2 * b2;
            (s - model).abs() / s.max(1e-300)
        })
        .collect();
    let max_rel_residual = rel_residuals.iter().cloned().fold(0.0, f64::max);
    Ok(DecayProfile {
        ts: grid.ts.clone(),
        sups,
        c1,
        c2,
        rel_residuals,
        max_rel_residual,
    })
}

// ---------------------------------------------------------------------------
// Neck-mode extraction.
// ---------------------------------------------------------------------------

/// The harmonic-mode coefficient set of a neck connection:
/// `f dt`-part `a + b t + sum_i (a~_i e^{sqrt3 t} + b~_i e^{-sqrt3 (t - log lambda)}) omega_i`,
/// tangential part `sum_i (a_i e^{sqrt3 t} + b_i e^{-sqrt3(t-log lambda)}) psi_i
/// + sum_i (c_{±,i} e^{2t} + d_{±,i} e^{-2(t-log lambda)}) phi_{±,i}`.
#[derive(Debug, Clone)]
pub struct NeckExpansion {
    pub lambda: f64,
    pub a_const: LieMatrix,
    pub b_linear: LieMatrix,
    pub a_omega: [LieMatrix; 4],
    pub b_omega: [LieMatrix; 4],
    pub a_psi: [LieMatrix; 4],
    pub b_psi: [LieMatrix; 4],
    pub c_plus: [LieMatrix; 3],
    pub c_minus: [LieMatrix; 3],
    pub d_plus: [LieMatrix; 3],
    pub d_minus: [LieMatrix; 3],
    /// Per-slice `L^2` norm of `A` minus the reconstruction.
    pub remainder_norm: Vec<(f64, f64)>,
}

impl NeckExpansion {
    pub fn dim(&self) -> usize {
        self.a_const.dim()
    }

    /// Evaluates the mode part as a field.
    pub fn reconstruct(&self) -> OneFormLieField {
        let me = self.clone();
        let dim = self.dim();
        OneFormLieField::new(dim, move |t, p| {
            let lam = me.lambda;
            let sq3 = 3f64.sqrt();
            let e_g3 = (sq3 * t).exp();
            let e_d3 = (-sq3 * (t - lam.ln())).exp();
            let e_g2 = (2.0 * t).exp();
            let e_d2 = (-2.0 * (t - lam.ln())).exp();
            let mut f = &me.a_const + &(&me.b_linear * t);
            for i in 0..4 {
                let amp = &(&me.a_omega[i] * e_g3) + &(&me.b_omega[i] * e_d3);
                f = &f + &(&amp * p.coords()[i]);
            }
            let mut comps: [LieMatrix; 3] = std::array::from_fn(|_| LieMatrix::zeros(dim));
            for i in 0..4 {
                let amp = &(&me.a_psi[i] * e_g3) + &(&me.b_psi[i] * e_d3);
                let c = crate::geometry::psi(i + 1, p).unwrap().comps;
                for k in 0..3 {
                    comps[k] = &comps[k] + &(&amp * c[k]);
                }
            }
            for i in 0..3 {
                let amp_p = &(&me.c_plus[i] * e_g2) + &(&me.d_plus[i] * e_d2);
                let amp_m = &(&me.c_minus[i] * e_g2) + &(&me.d_minus[i] * e_d2);
                let cp = phi_comps(Sign::Plus, i, p);
                let cm = phi_comps(Sign::Minus, i, p);
                for k in 0..3 {
                    comps[k] = &comps[k] + &(&amp_p * cp[k]);
                    comps[k] = &comps[k] + &(&amp_m * cm[k]);
                }
            }
            LieOneForm { dt: f, comps }
        })
    }

    /// Largest coefficient among the `e^{2t}` families (body side).
    pub fn c_sup(&self) -> f64 {
        self.c_plus
            .iter()
            .chain(self.c_minus.iter())
            .map(LieMatrix::norm)
            .fold(0.0, f64::max)
    }

    /// JSON with every coefficient listed by name.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        out.push_str(&format!("\"lambda\":{},", fmt_f64_full(self.lambda)));
        let named: Vec<(&str, Vec<&LieMatrix>)> = vec![
            ("a", vec![&self.a_const]),
            ("b", vec![&self.b_linear]),
            ("a_tilde", self.a_omega.iter().collect()),
            ("b_tilde", self.b_omega.iter().collect()),
            ("a_psi", self.a_psi.iter().collect()),
            ("b_psi", self.b_psi.iter().collect()),
            ("c_plus", self.c_plus.iter().collect()),
            ("c_minus", self.c_minus.iter().collect()),
            ("d_plus", self.d_plus.iter().collect()),
            ("d_minus", self.d_minus.iter().collect()),
        ];
        for (name, mats) in named {
            out.push_str(&format!("\"{name}\":["));
            for (i, m) in mats.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                push_matrix(&mut out, m);
            }
            out.push_str("],");
        }
        out.push_str("\"remainder_norm\":[");
        for (i, (t, n)) in self.remainder_norm.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("[{},{}]", fmt_f64_full(*t), fmt_f64_full(*n)));
        }
        out.push_str("]}");
        out
    }
}

/// Splits per-slice mode amplitudes into growing/decaying parts by a
/// two-point regression across the neck center and reports per-slice
/// remainders.
///
/// The regression slices sit at `t_center ± spacing/2`; the spacing is at
/// least 1 unless the neck itself is shorter.
pub fn extract_neck_modes(
    a: &GaugeField,
    grid: &CylGrid,
) -> Result<NeckExpansion, ConnectionError> {
    if grid.ts.len() < 8 {
        return Err(ConnectionError::TooFewSlices {
            got: grid.ts.len(),
            need: 8,
        });
    }
    let geom = &a.geom;
    let len = geom.len();
    let spacing = (0.9 * len).min(2.0).max(1.0_f64.min(0.9 * len));
    if spacing < 0.5 {
        return Err(ConnectionError::IllConditioned(spacing));
    }
    let tc = geom.t_center();
    let (t1, t2) = (tc - 0.5 * spacing, tc + 0.5 * spacing);
    let m1 = crate::fields::project_slice(&a.field, t1, &grid.sphere);
    let m2 = crate::fields::project_slice(&a.field, t2, &grid.sphere);
    let lam = geom.lambda;

    // a + b t through two points
    let b_linear = (&m2.f_const - &m1.f_const) * (1.0 / (t2 - t1));
    let a_const = &m1.f_const - &(&b_linear * t1);

    let split = |v1: &LieMatrix, v2: &LieMatrix, mu: f64| -> (LieMatrix, LieMatrix) {
        // solve c e^{mu t} + d e^{-mu (t - ln lam)} through (t1, v1), (t2, v2)
        let b1 = |t: f64| (mu * t).exp();
        let b2 = |t: f64| (-mu * (t - lam.ln())).exp();
        let det = b1(t1) * b2(t2) - b1(t2) * b2(t1);
        let c = &(v1 * b2(t2)) - &(v2 * b2(t1));
        let d = &(v2 * b1(t1)) - &(v1 * b1(t2));
        (&c * (1.0 / det), &d * (1.0 / det))
    };

    let sq3 = 3f64.sqrt();
    let mut a_omega: [LieMatrix; 4] = std::array::from_fn(|_| LieMatrix::zeros(a.dim()));
    let mut b_omega: [LieMatrix; 4] = std::array::from_fn(|_| LieMatrix::zeros(a.dim()));
    let mut a_psi: [LieMatrix; 4] = std::array::from_fn(|_| LieMatrix::zeros(a.dim()));
    let mut b_psi: [LieMatrix; 4] = std::array::from_fn(|_| LieMatrix::zeros(a.dim()));
    for i in 0..4 {
        let (c, d) = split(&m1.f_omega[i], &m2.f_omega[i], sq3);
        a_omega[i] = c;
        b_omega[i] = d;
        let (c, d) = split(&m1.xi_psi[i], &m2.xi_psi[i], sq3);
        a_psi[i] = c;
        b_psi[i] = d;
    }
    let mut c_plus: [LieMatrix; 3] = std::array::from_fn(|_| LieMatrix::zeros(a.dim()));
    let mut d_plus: [LieMatrix; 3] = std::array::from_fn(|_| LieMatrix::zeros(a.dim()));
    let mut c_minus: [LieMatrix; 3] = std::array::from_fn(|_| LieMatrix::zeros(a.dim()));
    let mut d_minus: [LieMatrix; 3] = std::array::from_fn(|_| LieMatrix::zeros(a.dim()));
    for i in 0..3 {
        let (c, d) = split(&m1.xi_phi_plus[i], &m2.xi_phi_plus[i], 2.0);
        c_plus[i] = c;
        d_plus[i] = d;
        let (c, d) = split(&m1.xi_phi_minus[i], &m2.xi_phi_minus[i], 2.0);
        c_minus[i] = c;
        d_minus[i] = d;
    }

    let mut expansion = NeckExpansion {
        lambda: lam,
        a_const,
        b_linear,
        a_omega,
        b_omega,
        a_psi,
        b_psi,
        c_plus,
        c_minus,
        d_plus,
        d_minus,
        remainder_norm: Vec::new(),
    };

    // per-slice remainder: in-table amplitude mismatch plus out-of-table mass
    let recon = expansion.reconstruct();
    for &t in &grid.ts {
        let sm = crate::fields::project_slice(&a.field, t, &grid.sphere);
        let rm = crate::fields::project_slice(&recon, t, &grid.sphere);
        let mut acc = sm.residual_f.powi(2) + sm.residual_xi.powi(2);
        let n_const = crate::S3_VOLUME;
        let n_omega = crate::S3_VOLUME / 4.0;
        let n_psi = 0.75 * crate::S3_VOLUME;
        let n_phi = crate::S3_VOLUME;
        acc += (&sm.f_const - &rm.f_const).inner(&(&sm.f_const - &rm.f_const)) * n_const;
        for i in 0..4 {
            let df = &sm.f_omega[i] - &rm.f_omega[i];
            acc += df.inner(&df) * n_omega;
            let dx = &sm.xi_psi[i] - &rm.xi_psi[i];
            acc += dx.inner(&dx) * n_psi;
        }
        for i in 0..3 {
            let dp = &sm.xi_phi_plus[i] - &rm.xi_phi_plus[i];
            acc += dp.inner(&dp) * n_phi;
            let dm = &sm.xi_phi_minus[i] - &rm.xi_phi_minus[i];
            acc += dm.inner(&dm) * n_phi;
        }
        expansion.remainder_norm.push((t, acc.max(0.0).sqrt()));
    }
    Ok(expansion)
}

/// The standard charge-one instanton potential on the `x` chart, ready for
/// [`to_cylinder`].
pub fn bpst_connection(
    center: Vector4<f64>,
    scale: f64,
    orientation: Orientation,
) -> Result<R4Potential, ConnectionError> {
    Ok(Instanton::new(center, scale, orientation)?.potential())
}

/// Threshold for accepting a field as harmonic, relative to its local scale.
pub const HARMONIC_THRESHOLD: f64 = 1e-6;

/// Mode extraction gated on harmonicity: rejects inputs whose cylinder Hodge
/// Laplacian is not small relative to the field size at probe points.
pub fn harmonic_expansion(
    h: &GaugeField,
    grid: &CylGrid,
    threshold: f64,
) -> Result<NeckExpansion, ConnectionError> {
    let geom = &h.geom;
    let probes = [
        (geom.t_center(), S3Point::pole()),
        (
            0.5 * (geom.t_center() + geom.t_left()),
            S3Point::new([0.3, -0.5, 0.7, 0.1]).unwrap(),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (t, p) in &probes {
        let lap = crate::spectral::hodge_laplacian(&h.field, *t, p, &grid.sphere);
        let scale = h.field.at(*t, p).norm().max(1e-30);
        worst = worst.max(lap.norm() / scale.max(1.0));
    }
    if worst > threshold {
        return Err(ConnectionError::NotHarmonic {
            residual: worst,
            threshold,
        });
    }
    extract_neck_modes(h, grid)
}

/// Decomposes a chart-origin curvature value against the flat SD/ASD basis
/// with the factor-2 display convention: returned triples satisfy
/// `F(0) = sum_i 2 (out_plus_i Phi_{+,i} + out_minus_i Phi_{-,i})`.
pub fn curvature_boundary_matrices(f: &LieTwoFormR4) -> ([LieMatrix; 3], [LieMatrix; 3]) {
    let dim = f.c[0][0].dim();
    let project = |sign: Sign| -> [LieMatrix; 3] {
        std::array::from_fn(|i| {
            let phi = phi_r4(sign, i + 1, Chart::X).unwrap();
            let mut acc = LieMatrix::zeros(dim);
            for a in 0..4 {
                for b in 0..4 {
                    if phi.m[(a, b)] != 0.0 {
                        acc = acc + &f.c[a][b] * phi.m[(a, b)];
                    }
                }
            }
            // <F, Phi> / (2 |Phi|^2) with |Phi|^2 = 4
            &acc * (1.0 / 8.0)
        })
    };
    (project(Sign::Plus), project(Sign::Minus))
}
