//! Stress-energy tensor, conserved slice integrals, the seven balancing
//! residuals between limit and bubble boundary data, and the `su(2)`
//! one-instanton no-go certificate.
//!
//! Boundary data consists of four matrix triples pairing the body end
//! (`FL`) with the bubble end (`FR`). The seven residuals are the six
//! antisymmetry combinations over the index pairs `(2,3), (3,1), (1,2)` in
//! the two sign patterns `P1 = (L+, R-)` and `P2 = (L-, R+)`, plus the trace
//! `sum_i <FL+_i, FR-_i> + <FL-_i, FR+_i>`.

use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connection::CurvatureField;
use crate::fields::LieTwoForm;
use crate::forms::{p_form, q_form, CylPoint, CylVector};
use crate::geometry::{S3Point, Sign, SphereGrid};
use crate::lie::LieMatrix;

#[derive(Debug, Error)]
pub enum BalanceError {
    #[error("matrix dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no-go certificate requires a 3-dimensional algebra pairing")]
    WrongAlgebra,
    #[error("malformed boundary data: {0}")]
    Malformed(String),
    #[error("slice t = {t} outside the field range [{lo}, {hi}]")]
    SliceOutOfRange { t: f64, lo: f64, hi: f64 },
}

/// The four boundary matrix triples.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub fl_plus: [LieMatrix; 3],
    pub fl_minus: [LieMatrix; 3],
    pub fr_plus: [LieMatrix; 3],
    pub fr_minus: [LieMatrix; 3],
}

impl BoundaryData {
    pub fn zeros(dim: usize) -> Self {
        BoundaryData {
            fl_plus: std::array::from_fn(|_| LieMatrix::zeros(dim)),
            fl_minus: std::array::from_fn(|_| LieMatrix::zeros(dim)),
            fr_plus: std::array::from_fn(|_| LieMatrix::zeros(dim)),
            fr_minus: std::array::from_fn(|_| LieMatrix::zeros(dim)),
        }
    }

    pub fn dim(&self) -> Result<usize, BalanceError> {
        let d = self.fl_plus[0].dim();
        for m in self.iter_all() {
            if m.dim() != d {
                return Err(BalanceError::DimensionMismatch(d, m.dim()));
            }
        }
        Ok(d)
    }

    fn iter_all(&self) -> impl Iterator<Item = &LieMatrix> {
        self.fl_plus
            .iter()
            .chain(self.fl_minus.iter())
            .chain(self.fr_plus.iter())
            .chain(self.fr_minus.iter())
    }

    /// Frobenius sup over the `FL` (respectively `FR`) triples.
    pub fn scale(&self) -> (f64, f64) {
        let l = self
            .fl_plus
            .iter()
            .chain(self.fl_minus.iter())
            .map(LieMatrix::norm)
            .fold(0.0, f64::max);
        let r = self
            .fr_plus
            .iter()
            .chain(self.fr_minus.iter())
            .map(LieMatrix::norm)
            .fold(0.0, f64::max);
        (l, r)
    }

    pub fn to_json(&self) -> String {
        let triple = |ms: &[LieMatrix; 3]| -> serde_json::Value {
            serde_json::Value::Array(
                ms.iter()
                    .map(|m| serde_json::to_value(m.to_rows()).unwrap())
                    .collect(),
            )
        };
        let mut obj = serde_json::Map::new();
        obj.insert(
            "algebra".into(),
            serde_json::Value::String(if self.fl_plus[0].dim() == 4 {
                "su2".into()
            } else {
                format!("so{}", self.fl_plus[0].dim())
            }),
        );
        obj.insert("FL_plus".into(), triple(&self.fl_plus));
        obj.insert("FL_minus".into(), triple(&self.fl_minus));
        obj.insert("FR_plus".into(), triple(&self.fr_plus));
        obj.insert("FR_minus".into(), triple(&self.fr_minus));
        crate::report::to_json_full(&serde_json::Value::Object(obj))
    }

    pub fn from_json(text: &str) -> Result<Self, BalanceError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BalanceError::Malformed(e.to_string()))?;
        let triple = |name: &str| -> Result<[LieMatrix; 3], BalanceError> {
            let arr = v
                .get(name)
                .and_then(|x| x.as_array())
                .ok_or_else(|| BalanceError::Malformed(format!("missing {name}")))?;
            if arr.len() != 3 {
                return Err(BalanceError::Malformed(format!(
                    "{name} must have 3 matrices"
                )));
            }
            let mut out = Vec::new();
            for m in arr {
                let rows: Vec<Vec<f64>> = serde_json::from_value(m.clone())
                    .map_err(|e| BalanceError::Malformed(e.to_string()))?;
                out.push(
                    LieMatrix::from_rows(&rows)
                        .map_err(|e| BalanceError::Malformed(e.to_string()))?,
                );
            }
            Ok([out[0].clone(), out[1].clone(), out[2].clone()])
        };
        let data = BoundaryData {
            fl_plus: triple("FL_plus")?,
            fl_minus: triple("FL_minus")?,
            fr_plus: triple("FR_plus")?,
            fr_minus: triple("FR_minus")?,
        };
        data.dim()?;
        Ok(data)
    }
}

/// One antisymmetry residual entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AntisymResidual {
    /// Index pair `(i, j)` from `(2,3), (3,1), (1,2)`.
    pub pair: (usize, usize),
    /// `"P1"` for `(L+, R-)`, `"P2"` for `(L-, R+)`.
    pub pattern: String,
    pub residual: f64,
    /// Residual divided by `1 + |FL| |FR|`.
    pub normalized: f64,
}

/// The seven balancing residuals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalanceReport {
    pub antisym: Vec<AntisymResidual>,
    pub trace_residual: f64,
    pub trace_normalized: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl BalanceReport {
    pub fn to_json(&self) -> String {
        crate::report::to_json_full(self)
    }
}

/// Default tolerance for exact (algebraic) boundary data.
pub const BALANCE_TOL_EXACT: f64 = 1e-9;
/// Default tolerance for quadrature-derived boundary data.
pub const BALANCE_TOL_SAMPLED: f64 = 1e-5;

/// Computes the six antisymmetry residuals and the trace residual exactly.
pub fn balance_residuals(data: &BoundaryData, tol: f64) -> Result<BalanceReport, BalanceError> {
    data.dim()?;
    let (l_scale, r_scale) = data.scale();
    let denom = 1.0 + l_scale * r_scale;
    let pairs = [(2usize, 3usize), (3, 1), (1, 2)];
    let mut antisym = Vec::with_capacity(6);
    for (pattern, left, right) in [
        ("P1", &data.fl_plus, &data.fr_minus),
        ("P2", &data.fl_minus, &data.fr_plus),
    ] {
        for (i, j) in pairs {
            let r = left[i - 1].inner(&right[j - 1]) - left[j - 1].inner(&right[i - 1]);
            antisym.push(AntisymResidual {
                pair: (i, j),
                pattern: pattern.to_string(),
                residual: r,
                normalized: r / denom,
            });
        }
    }
    let trace: f64 = (0..3)
        .map(|i| {
            data.fl_plus[i].inner(&data.fr_minus[i]) + data.fl_minus[i].inner(&data.fr_plus[i])
        })
        .sum();
    let pass = antisym.iter().all(|a| a.normalized.abs() <= tol) && (trace / denom).abs() <= tol;
    Ok(BalanceReport {
        antisym,
        trace_residual: trace,
        trace_normalized: trace / denom,
        tolerance: tol,
        pass,
    })
}

/// Verdict of the one-instanton pairing analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NogoStatus {
    /// The pairing matrix is (numerically) a nonzero multiple of a symmetric
    /// orthogonal matrix; its eigenvalues are `±c`, so the trace cannot
    /// vanish and the balancing equations are unsatisfiable.
    Infeasible,
    /// Zero pairing: no constraint from this data.
    NoObstruction,
    /// The pairing is not a scalar multiple of a symmetric orthogonal
    /// matrix; the parity argument does not apply.
    NotApplicable,
}

/// Certificate for the pairing matrix `M_ij = <FL-_i, FR+_j>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NogoCertificate {
    pub m: Vec<Vec<f64>>,
    /// Operator norm of `M`, the candidate scalar `|c|`.
    pub scale: f64,
    /// `|M - M^t|` (max entry).
    pub symmetry_defect: f64,
    /// `|(M/c)^t (M/c) - I|` (max entry).
    pub orthogonality_defect: f64,
    pub trace: f64,
    /// Eigenvalues of the symmetrized `M / c`.
    pub unit_eigenvalues: Vec<f64>,
    pub status: NogoStatus,
}

impl NogoCertificate {
    pub fn to_json(&self) -> String {
        crate::report::to_json_full(self)
    }
}

/// Runs the parity argument on `M_ij = <FL-_i, FR+_j>`: a symmetric
/// orthogonal 3x3 matrix has eigenvalues `±1`, whose sum is odd and never
/// zero, so `c Q` with `c != 0` cannot be traceless.
pub fn nogo_su2(data: &BoundaryData, tol: f64) -> Result<NogoCertificate, BalanceError> {
    let dim = data.dim()?;
    if dim != 4 && dim != 3 {
        return Err(BalanceError::WrongAlgebra);
    }
    let m = Matrix3::from_fn(|i, j| data.fl_minus[i].inner(&data.fr_plus[j]));
    let svd = m.svd(false, false);
    let scale = svd.singular_values.max();
    let trace = m.trace();
    let symmetry_defect = (m - m.transpose()).abs().max();
    if scale <= tol {
        return Ok(NogoCertificate {
            m: (0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect()).collect(),
            scale,
            symmetry_defect,
            orthogonality_defect: 0.0,
            trace,
            unit_eigenvalues: vec![],
            status: NogoStatus::NoObstruction,
        });
    }
    let q = m / scale;
    let orthogonality_defect = (q.transpose() * q - Matrix3::identity()).abs().max();
    let sym = (q + q.transpose()) * 0.5;
    let eigen = sym.symmetric_eigen();
    let unit_eigenvalues: Vec<f64> = eigen.eigenvalues.iter().cloned().collect();
    let is_multiple_of_orthogonal = orthogonality_defect <= tol.max(1e-9) * 10.0;
    let is_symmetric = symmetry_defect <= tol.max(1e-9).max(tol * scale) * 10.0;
    let status = if is_multiple_of_orthogonal && is_symmetric {
        // eigenvalues of a symmetric orthogonal matrix are +-1; their sum has
        // the parity of the dimension
        NogoStatus::Infeasible
    } else {
        NogoStatus::NotApplicable
    };
    Ok(NogoCertificate {
        m: (0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect()).collect(),
        scale,
        symmetry_defect,
        orthogonality_defect,
        trace,
        unit_eigenvalues,
        status,
    })
}

// ---------------------------------------------------------------------------
// Stress-energy tensor and conserved slice integrals.
// ---------------------------------------------------------------------------

/// Pointwise stress-energy of a frame curvature value:
/// `S_ab = sum_c <F_ac, F_bc> - (1/4) |F|^2 delta_ab`.
pub fn stress_at(f: &LieTwoForm) -> Matrix4<f64> {
    let norm_sq = f.inner(f);
    let mut s = Matrix4::zeros();
    for a in 0..4 {
        for b in a..4 {
            let mut acc = 0.0;
            for c in 0..4 {
                acc += f.c[a][c].inner(&f.c[b][c]);
            }
            // norm_sq double counts the component pairs, exactly matching the
            // single-counted frame sum twice over: the quarter subtraction of
            // norm_sq makes the trace vanish in dimension four
            let v = acc - 0.25 * norm_sq * if a == b { 1.0 } else { 0.0 };
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

/// Stress-energy field of a curvature field.
pub struct StressField {
    eval: std::sync::Arc<dyn Fn(f64, &S3Point) -> Matrix4<f64> + Send + Sync>,
}

impl StressField {
    pub fn from_curvature(f: &CurvatureField) -> Self {
        let f = f.clone();
        StressField {
            eval: std::sync::Arc::new(move |t, p| stress_at(&f.at(t, p))),
        }
    }

    pub fn new(eval: impl Fn(f64, &S3Point) -> Matrix4<f64> + Send + Sync + 'static) -> Self {
        StressField {
            eval: std::sync::Arc::new(eval),
        }
    }

    pub fn at(&self, t: f64, p: &S3Point) -> Matrix4<f64> {
        (self.eval)(t, p)
    }
}

/// Covariant divergence of a symmetric tensor field on the round cylinder,
/// `(div S)_b = d_t S_0b + sum_j X_j S_jb` (the frame fields are geodesic and
/// divergence-free).
pub fn divergence_stress(s: &StressField, t: f64, p: &S3Point) -> [f64; 4] {
    let h = crate::fields::FD_T_STEP;
    let dt_row = (s.at(t + h, p) - s.at(t - h, p)) * (8.0 / (12.0 * h))
        + (s.at(t - 2.0 * h, p) - s.at(t + 2.0 * h, p)) * (1.0 / (12.0 * h));
    let mut out = [0.0; 4];
    for b in 0..4 {
        out[b] = dt_row[(0, b)];
        for j in 0..3 {
            let d = crate::geometry::frame_deriv(
                j,
                p,
                |q| s.at(t, q)[(j + 1, b)],
                crate::fields::FD_SPHERE_STEP,
            );
            out[b] += d;
        }
    }
    out
}

/// Slice integral `int_{t x S^3} <iota_X F, iota_dt F> - (1/4)|F|^2 <X, dt>`.
///
/// The inner product of Lie-valued one-forms contracts both the frame and
/// the Lie indices.
pub fn pohozaev_integral(
    f: &CurvatureField,
    x: CylVector,
    t: f64,
    sphere: &SphereGrid,
    range: Option<(f64, f64)>,
) -> Result<f64, BalanceError> {
    if let Some((lo, hi)) = range {
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return Err(BalanceError::SliceOutOfRange { t, lo, hi });
        }
    }
    let mut acc = 0.0;
    for (p, w) in sphere.nodes.iter().zip(sphere.weights.iter()) {
        let fv = f.at(t, p);
        let xv = x.frame_comps(p);
        let ix = fv.contract_frame(&[xv[0], xv[1], xv[2], xv[3]]);
        let idt = fv.contract_frame(&[1.0, 0.0, 0.0, 0.0]);
        let mut pair = ix.dt.inner(&idt.dt);
        for k in 0..3 {
            pair += ix.comps[k].inner(&idt.comps[k]);
        }
        // <X, dt> is 1 for X = dt and 0 for the rotation fields
        let x_dot_dt = xv[0];
        acc += w * (pair - 0.25 * fv.inner(&fv) * x_dot_dt);
    }
    Ok(acc)
}

/// The model neck curvature assembled from boundary data at the center slice:
/// `F = lambda sum_i (FL+_i P_{+,i} + FL-_i P_{-,i} + FR-_i Q_{+,i} + FR+_i Q_{-,i})`,
/// a `t`-independent frame-coefficient field.
pub fn synthetic_neck_curvature(data: &BoundaryData, lambda: f64) -> CurvatureField {
    let data = data.clone();
    let dim = data.fl_plus[0].dim();
    CurvatureField::new(dim, move |_t, p| {
        let at = CylPoint { t: 0.0, omega: *p };
        let mut out = LieTwoForm::zero(dim);
        for i in 0..3 {
            let terms: [(&LieMatrix, crate::forms::CylTwoForm); 4] = [
                (&data.fl_plus[i], p_form(Sign::Plus, i + 1, &at).unwrap()),
                (&data.fl_minus[i], p_form(Sign::Minus, i + 1, &at).unwrap()),
                (&data.fr_minus[i], q_form(Sign::Plus, i + 1, &at).unwrap()),
                (&data.fr_plus[i], q_form(Sign::Minus, i + 1, &at).unwrap()),
            ];
            for (mat, form) in terms {
                for a in 0..4 {
                    for b in 0..4 {
                        if form.m[(a, b)] != 0.0 {
                            out.c[a][b] = &out.c[a][b] + &(mat * (lambda * form.m[(a, b)]));
                        }
                    }
                }
            }
        }
        out
    })
}

/// Convenience: an orthonormal `su(2)` triple as boundary data for the
/// one-instanton scenarios.
pub fn instanton_boundary_data(asd_limit: bool, sd_bubble: bool) -> BoundaryData {
    let basis = crate::lie::su2_basis();
    let mut data = BoundaryData::zeros(4);
    if asd_limit {
        data.fl_minus = basis.clone();
    } else {
        data.fl_plus = basis.clone();
    }
    if sd_bubble {
        data.fr_plus = basis;
    } else {
        data.fr_minus = basis;
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{Instanton, Orientation};
    use crate::fields::{CylGrid, NeckGeometry, OneFormLieField};
    use crate::geometry::GridConfig;
    use crate::lie::su2_basis;
    use crate::S3_VOLUME;
    use nalgebra::{DMatrix, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_skew(rng: &mut impl Rng, scale: f64) -> LieMatrix {
        LieMatrix::skew_part(DMatrix::from_fn(4, 4, |_, _| {
            rng.gen_range(-1.0..1.0) * scale
        }))
    }

    fn random_data(rng: &mut impl Rng) -> BoundaryData {
        BoundaryData {
            fl_plus: std::array::from_fn(|_| random_skew(rng, 1.0)),
            fl_minus: std::array::from_fn(|_| random_skew(rng, 1.0)),
            fr_plus: std::array::from_fn(|_| random_skew(rng, 1.0)),
            fr_minus: std::array::from_fn(|_| random_skew(rng, 1.0)),
        }
    }

    #[test]
    fn asd_asd_balances_exactly() {
        // both sides ASD: FL+ = 0, FR+ = 0
        let data = instanton_boundary_data(true, false);
        let report = balance_residuals(&data, BALANCE_TOL_EXACT).unwrap();
        assert!(report.pass);
        for a in &report.antisym {
            assert_eq!(a.residual, 0.0);
        }
        assert_eq!(report.trace_residual, 0.0);
    }

    #[test]
    fn asd_limit_sd_bubble_is_obstructed() {
        let data = instanton_boundary_data(true, true);
        let report = balance_residuals(&data, BALANCE_TOL_EXACT).unwrap();
        assert!(!report.pass);
        assert!((report.trace_residual - 3.0).abs() < 1e-14);
        // antisymmetry residuals still vanish (the pairing is symmetric)
        for a in &report.antisym {
            assert!(a.residual.abs() < 1e-14);
        }
    }

    #[test]
    fn single_entry_antisym_residual() {
        let basis = su2_basis();
        let mut data = BoundaryData::zeros(4);
        data.fl_plus[0] = basis[0].clone();
        data.fr_minus[1] = basis[0].clone();
        let report = balance_residuals(&data, BALANCE_TOL_EXACT).unwrap();
        for a in &report.antisym {
            if a.pattern == "P1" && a.pair == (1, 2) {
                assert!((a.residual - 1.0).abs() < 1e-15);
            } else {
                assert!(a.residual.abs() < 1e-15, "{a:?}");
            }
        }
    }

    #[test]
    fn residuals_bilinear_and_conjugation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let data = random_data(&mut rng);
        let base = balance_residuals(&data, 1.0).unwrap();
        // scaling all FR by c scales every residual by c exactly
        let c = 2.375;
        let mut scaled = data.clone();
        for m in scaled.fr_plus.iter_mut().chain(scaled.fr_minus.iter_mut()) {
            *m = &*m * c;
        }
        let rep = balance_residuals(&scaled, 1.0).unwrap();
        for (a, b) in rep.antisym.iter().zip(base.antisym.iter()) {
            assert!((a.residual - c * b.residual).abs() < 1e-12);
        }
        assert!((rep.trace_residual - c * base.trace_residual).abs() < 1e-12);

        // conjugating every matrix by the same orthogonal s changes nothing
        let s = random_skew(&mut rng, 0.8).exp();
        let conj = BoundaryData {
            fl_plus: std::array::from_fn(|i| data.fl_plus[i].conjugate(&s)),
            fl_minus: std::array::from_fn(|i| data.fl_minus[i].conjugate(&s)),
            fr_plus: std::array::from_fn(|i| data.fr_plus[i].conjugate(&s)),
            fr_minus: std::array::from_fn(|i| data.fr_minus[i].conjugate(&s)),
        };
        let rep = balance_residuals(&conj, 1.0).unwrap();
        for (a, b) in rep.antisym.iter().zip(base.antisym.iter()) {
            assert!((a.residual - b.residual).abs() < 1e-12);
        }
        assert!((rep.trace_residual - base.trace_residual).abs() < 1e-12);
    }

    #[test]
    fn nogo_instanton_pairing_infeasible() {
        let data = instanton_boundary_data(true, true);
        let cert = nogo_su2(&data, 1e-9).unwrap();
        assert_eq!(cert.status, NogoStatus::Infeasible);
        assert!((cert.trace - 3.0).abs() < 1e-12);
        assert!(cert.symmetry_defect < 1e-12);
        assert!(cert.orthogonality_defect < 1e-12);
        for ev in &cert.unit_eigenvalues {
            assert!((ev.abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn nogo_reflection_multiple_infeasible() {
        // pairing c * diag(1, 1, -1)
        let basis = su2_basis();
        let c = 0.7;
        let mut data = BoundaryData::zeros(4);
        data.fl_minus = basis.clone();
        data.fr_plus = [
            &basis[0] * c,
            &basis[1] * c,
            &basis[2] * (-c),
        ];
        let cert = nogo_su2(&data, 1e-9).unwrap();
        assert_eq!(cert.status, NogoStatus::Infeasible);
        assert!((cert.trace - c).abs() < 1e-12);
    }

    #[test]
    fn nogo_zero_and_generic() {
        let data = BoundaryData::zeros(4);
        let cert = nogo_su2(&data, 1e-9).unwrap();
        assert_eq!(cert.status, NogoStatus::NoObstruction);

        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let data = random_data(&mut rng);
        let cert = nogo_su2(&data, 1e-9).unwrap();
        assert_eq!(cert.status, NogoStatus::NotApplicable);
    }

    #[test]
    fn boundary_data_json_roundtrip() {
        let data = instanton_boundary_data(true, true);
        let json = data.to_json();
        let back = BoundaryData::from_json(&json).unwrap();
        for (a, b) in data.iter_all().zip(back.iter_all()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(BoundaryData::from_json("{\"algebra\":\"su2\"}").is_err());
        assert!(BoundaryData::from_json("not json").is_err());
    }

    #[test]
    fn stress_of_asd_field_vanishes_pointwise() {
        let inst = Instanton::new(Vector4::zeros(), 1.0, Orientation::AntiSelfDual).unwrap();
        let f = inst.curvature_cylinder();
        let s = StressField::from_curvature(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..6 {
            let p = S3Point::new([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ])
            .unwrap();
            let t = rng.gen_range(-2.0..1.0);
            assert!(s.at(t, &p).abs().max() < 1e-8, "ASD stress not zero");
        }
    }

    #[test]
    fn stress_trace_free_for_generic_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let g = random_skew(&mut rng, 1.0);
        let f = CurvatureField::new(4, move |_t, p| {
            let at = CylPoint { t: 0.0, omega: *p };
            let form = p_form(Sign::Minus, 1, &at).unwrap();
            let mut out = LieTwoForm::zero(4);
            for a in 0..4 {
                for b in 0..4 {
                    out.c[a][b] = &g * form.m[(a, b)];
                }
            }
            out
        });
        let s = StressField::from_curvature(&f);
        let p = S3Point::new([0.4, 0.2, -0.8, 0.1]).unwrap();
        let m = s.at(0.0, &p);
        assert!(m.trace().abs() < 1e-12, "trace {}", m.trace());
        assert!((m - m.transpose()).abs().max() < 1e-14);
        // and zero field
        let z = CurvatureField::new(4, |_, _| LieTwoForm::zero(4));
        assert!(StressField::from_curvature(&z).at(0.0, &p).abs().max() == 0.0);
    }

    #[test]
    fn divergence_of_instanton_stress_vanishes() {
        let inst = Instanton::new(Vector4::zeros(), 1.0, Orientation::AntiSelfDual).unwrap();
        let s = StressField::from_curvature(&inst.curvature_cylinder());
        let p = S3Point::new([0.4, -0.6, 0.1, 0.7]).unwrap();
        let div = divergence_stress(&s, 0.2, &p);
        for v in div {
            assert!(v.abs() < 1e-8);
        }
        // sanity: a generic non-conserved field has nonzero divergence
        let bad = StressField::new(|t, p| {
            Matrix4::identity() * (t.sin() + p.coords()[0]).powi(2)
        });
        let div = divergence_stress(&bad, 0.3, &p);
        assert!(div.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn pohozaev_zero_and_instanton() {
        let sphere = SphereGrid::product(GridConfig::field_default()).unwrap();
        let z = CurvatureField::new(4, |_, _| LieTwoForm::zero(4));
        assert_eq!(
            pohozaev_integral(&z, CylVector::Dt, 0.0, &sphere, None).unwrap(),
            0.0
        );
        let inst = Instanton::new(Vector4::zeros(), 1e-2, Orientation::AntiSelfDual).unwrap();
        let f = inst.curvature_cylinder();
        for x in CylVector::all() {
            for t in [-3.0, -2.3, -1.6] {
                let v = pohozaev_integral(&f, x, t, &sphere, None).unwrap();
                assert!(v.abs() < 1e-7, "{x:?} at {t}: {v}");
            }
        }
        // range guard
        assert!(pohozaev_integral(&z, CylVector::Dt, 5.0, &sphere, Some((-1.0, 1.0))).is_err());
    }

    #[test]
    fn pohozaev_synthetic_matches_trace_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let data = random_data(&mut rng);
        let lambda = 1e-3;
        let f = synthetic_neck_curvature(&data, lambda);
        let sphere = SphereGrid::product(GridConfig::default()).unwrap();
        let got = pohozaev_integral(&f, CylVector::Dt, 0.5 * lambda.ln(), &sphere, None).unwrap();
        let mut trace = 0.0;
        for i in 0..3 {
            trace += data.fl_plus[i].inner(&data.fr_minus[i])
                + data.fl_minus[i].inner(&data.fr_plus[i]);
        }
        let want = -8.0 * lambda * lambda * S3_VOLUME * trace;
        assert!(
            (got - want).abs() < 1e-6 * want.abs().max(lambda * lambda),
            "case 2: {got} vs {want}"
        );
    }

    #[test]
    fn pohozaev_synthetic_matches_antisym_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let data = random_data(&mut rng);
        let lambda = 1e-3;
        let f = synthetic_neck_curvature(&data, lambda);
        let sphere = SphereGrid::product(GridConfig::default()).unwrap();
        let tc = 0.5 * lambda.ln();
        // X_{+,j}: 8 lambda^2 |S^3| (<FL+_{j+1}, FR-_{j+2}> - <FL+_{j+2}, FR-_{j+1}>)
        for j in 0..3 {
            let (j2, j3) = ((j + 1) % 3, (j + 2) % 3);
            let got =
                pohozaev_integral(&f, CylVector::X(Sign::Plus, j + 1), tc, &sphere, None).unwrap();
            let want = 8.0
                * lambda
                * lambda
                * S3_VOLUME
                * (data.fl_plus[j2].inner(&data.fr_minus[j3])
                    - data.fl_plus[j3].inner(&data.fr_minus[j2]));
            assert!(
                (got - want).abs() < 1e-6 * want.abs().max(lambda * lambda),
                "X+{j}: {got} vs {want}"
            );
            // the X_- rows of the contraction table carry the opposite
            // cyclic sign, flipping the orientation of the pairing
            let got =
                pohozaev_integral(&f, CylVector::X(Sign::Minus, j + 1), tc, &sphere, None).unwrap();
            let want = 8.0
                * lambda
                * lambda
                * S3_VOLUME
                * (data.fl_minus[j3].inner(&data.fr_plus[j2])
                    - data.fl_minus[j2].inner(&data.fr_plus[j3]));
            assert!(
                (got - want).abs() < 1e-6 * want.abs().max(lambda * lambda),
                "X-{j}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn pohozaev_conserved_for_abelian_harmonic_field() {
        // F = d of a harmonic mode connection: a genuine (abelian) critical
        // field whose slice integrals are t-independent and nonzero.
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let cs: [LieMatrix; 3] = std::array::from_fn(|_| random_skew(&mut rng, 1.0));
        let ds: [LieMatrix; 3] = std::array::from_fn(|_| random_skew(&mut rng, 1.0));
        let geom = NeckGeometry::new(1e-3, 0.3).unwrap();
        let lam = geom.lambda;
        let (csc, dsc) = (cs.clone(), ds.clone());
        let f = CurvatureField::new(4, move |t, p| {
            let at = CylPoint { t: 0.0, omega: *p };
            let mut out = LieTwoForm::zero(4);
            for i in 0..3 {
                let pf = p_form(Sign::Plus, i + 1, &at).unwrap();
                let qf = q_form(Sign::Plus, i + 1, &at).unwrap();
                let grow = (2.0 * t).exp();
                let decay = lam * lam * (-2.0 * t).exp();
                for a in 0..4 {
                    for b in 0..4 {
                        out.c[a][b] = &out.c[a][b] + &(&csc[i] * (grow * pf.m[(a, b)]));
                        out.c[a][b] = &out.c[a][b] + &(&dsc[i] * (decay * qf.m[(a, b)]));
                    }
                }
            }
            out
        });
        let sphere = SphereGrid::product(GridConfig::default()).unwrap();
        let grid = CylGrid::neck(&geom, 7, GridConfig::default()).unwrap();
        let mut trace = 0.0;
        for i in 0..3 {
            trace += cs[i].inner(&ds[i]);
        }
        let want = -8.0 * lam * lam * S3_VOLUME * trace;
        for &t in &grid.ts {
            let v = pohozaev_integral(&f, CylVector::Dt, t, &sphere, None).unwrap();
            assert!(
                (v - want).abs() < 1e-6 * want.abs().max(1e-12),
                "t = {t}: {v} vs {want}"
            );
        }
        let _ = OneFormLieField::zero(4);
    }
}
