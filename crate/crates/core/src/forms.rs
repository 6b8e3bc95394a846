//! Constant two-forms on `R^4` and the cylinder two-form families `P`, `Q`.
//!
//! Coefficient convention: a two-form is `F = (1/2) sum F_mn e^m ^ e^n` with
//! antisymmetric `F_mn`, evaluated as `F(u, v) = sum F_mn u_m v_n`, and the
//! inner product is the full contraction `<F, G> = sum_mn F_mn G_mn`. This
//! gives the flat SD/ASD basis norm 2 and `|P| = |Q| = 4`.
//!
//! Cylinder forms are stored against the orthonormal frame
//! `{dt, phi_{-,1}, phi_{-,2}, phi_{-,3}}`; the `X_+` representation is
//! obtained through the transition matrix on demand. The closed-form sphere
//! differentials are `d phi_{-,i} = -2 phi_{-,j} ^ phi_{-,k}` and
//! `d phi_{+,i} = +2 phi_{+,j} ^ phi_{+,k}` (cyclic), which make
//! `P_{±,i} = 2 dt ^ phi_{±,i} + d phi_{±,i}` and
//! `Q_{±,i} = -2 dt ^ phi_{±,i} + d phi_{±,i}` exact coefficient arrays,
//! independent of `t`.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{phi_comps, transition, GeomError, S3Point, Sign, SphereGrid};
use crate::report::CheckResult;

#[derive(Debug, Error, PartialEq)]
pub enum FormError {
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("expected an x-chart form")]
    WrongChart,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Coordinate chart tag for flat two-forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    X,
    /// Inverted coordinates `y = x / |x|^2`; orientation-reversing.
    Y,
}

/// Constant-coefficient two-form on an `R^4` chart.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormR4 {
    pub m: Matrix4<f64>,
    pub chart: Chart,
}

impl TwoFormR4 {
    pub fn new(m: Matrix4<f64>, chart: Chart) -> Self {
        let skew = (m - m.transpose()) * 0.5;
        TwoFormR4 { m: skew, chart }
    }

    pub fn zero(chart: Chart) -> Self {
        TwoFormR4 {
            m: Matrix4::zeros(),
            chart,
        }
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Hodge star with respect to the ambient `x`-orientation.
    ///
    /// In the `y` chart the coordinate star is reversed.
    pub fn hodge_star(&self) -> Self {
        let s = star4(&self.m);
        let signed = match self.chart {
            Chart::X => s,
            Chart::Y => -s,
        };
        TwoFormR4 {
            m: signed,
            chart: self.chart,
        }
    }

    /// Self-dual part `(F + *F)/2` (ambient orientation).
    pub fn sd_part(&self) -> Self {
        TwoFormR4 {
            m: (self.m + self.hodge_star().m) * 0.5,
            chart: self.chart,
        }
    }

    /// Anti-self-dual part `(F - *F)/2`.
    pub fn asd_part(&self) -> Self {
        TwoFormR4 {
            m: (self.m - self.hodge_star().m) * 0.5,
            chart: self.chart,
        }
    }
}

/// `a ^ b` of two covectors as a coefficient matrix.
pub fn wedge(a: &Vector4<f64>, b: &Vector4<f64>) -> Matrix4<f64> {
    a * b.transpose() - b * a.transpose()
}

/// Star on antisymmetric 4x4 coefficient arrays, standard orientation:
/// `(*F)_mn = (1/2) eps_mnab F_ab`.
pub fn star4(f: &Matrix4<f64>) -> Matrix4<f64> {
    let mut s = Matrix4::zeros();
    s[(0, 1)] = f[(2, 3)];
    s[(0, 2)] = f[(3, 1)];
    s[(0, 3)] = f[(1, 2)];
    s[(2, 3)] = f[(0, 1)];
    s[(3, 1)] = f[(0, 2)];
    s[(1, 2)] = f[(0, 3)];
    s[(1, 0)] = -s[(0, 1)];
    s[(2, 0)] = -s[(0, 2)];
    s[(3, 0)] = -s[(0, 3)];
    s[(3, 2)] = -s[(2, 3)];
    s[(1, 3)] = -s[(3, 1)];
    s[(2, 1)] = -s[(1, 2)];
    s
}

fn unit(i: usize) -> Vector4<f64> {
    let mut v = Vector4::zeros();
    v[i] = 1.0;
    v
}

/// The flat SD (`sign = Plus`) / ASD (`sign = Minus`) basis two-forms.
pub fn phi_r4(sign: Sign, i: usize, chart: Chart) -> Result<TwoFormR4, FormError> {
    if !(1..=3).contains(&i) {
        return Err(FormError::IndexOutOfRange(i));
    }
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let m = match i {
        1 => wedge(&unit(0), &unit(1)) + wedge(&unit(2), &unit(3)) * s,
        2 => wedge(&unit(0), &unit(2)) - wedge(&unit(1), &unit(3)) * s,
        _ => wedge(&unit(0), &unit(3)) + wedge(&unit(1), &unit(2)) * s,
    };
    Ok(TwoFormR4 { m, chart })
}

/// A point `(t, omega)` on the cylinder `R x S^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylPoint {
    pub t: f64,
    pub omega: S3Point,
}

/// One-form on the cylinder in the frame `{dt, phi_{-,j}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylOneForm {
    pub dt: f64,
    pub comps: [f64; 3],
}

impl CylOneForm {
    pub fn zero() -> Self {
        CylOneForm {
            dt: 0.0,
            comps: [0.0; 3],
        }
    }

    pub fn norm(&self) -> f64 {
        (self.dt * self.dt + self.comps.iter().map(|c| c * c).sum::<f64>()).sqrt()
    }

    pub fn tangential(&self) -> Self {
        CylOneForm {
            dt: 0.0,
            comps: self.comps,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        CylOneForm {
            dt: c * self.dt,
            comps: [c * self.comps[0], c * self.comps[1], c * self.comps[2]],
        }
    }
}

/// Two-form on the cylinder in the frame `{dt, phi_{-,j}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylTwoForm {
    pub m: Matrix4<f64>,
    pub at: CylPoint,
}

impl CylTwoForm {
    pub fn inner(&self, other: &Self) -> f64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Star with the cylinder orientation `dt ^ phi_1 ^ phi_2 ^ phi_3`.
    pub fn hodge_star(&self) -> Self {
        CylTwoForm {
            m: star4(&self.m),
            at: self.at,
        }
    }
}

/// One of the seven canonical vector fields on the cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylVector {
    Dt,
    /// `X_{s,i}`, one-based index.
    X(Sign, usize),
}

impl CylVector {
    /// All seven, in the order `dt, X_{-,1..3}, X_{+,1..3}`.
    pub fn all() -> [CylVector; 7] {
        [
            CylVector::Dt,
            CylVector::X(Sign::Minus, 1),
            CylVector::X(Sign::Minus, 2),
            CylVector::X(Sign::Minus, 3),
            CylVector::X(Sign::Plus, 1),
            CylVector::X(Sign::Plus, 2),
            CylVector::X(Sign::Plus, 3),
        ]
    }

    /// Frame components against `{dt, X_{-,j}}` at a sphere point.
    pub fn frame_comps(&self, p: &S3Point) -> Vector4<f64> {
        match self {
            CylVector::Dt => unit(0),
            CylVector::X(Sign::Minus, i) => unit(*i),
            CylVector::X(Sign::Plus, i) => {
                let t = transition(p);
                let mut v = Vector4::zeros();
                for j in 0..3 {
                    v[j + 1] = -t[(*i - 1, j)];
                }
                v
            }
        }
    }
}

/// Coframe components of `phi_{s,i}` (one-based) lifted to the cylinder frame.
fn phi_cyl(sign: Sign, i: usize, p: &S3Point) -> Vector4<f64> {
    let c = phi_comps(sign, i - 1, p);
    Vector4::new(0.0, c[0], c[1], c[2])
}

/// Closed-form `d phi_{s,i}` as a cylinder coefficient array.
fn dphi(sign: Sign, i: usize, p: &S3Point) -> Matrix4<f64> {
    let j = i % 3 + 1;
    let k = j % 3 + 1;
    let s = match sign {
        Sign::Minus => -2.0,
        Sign::Plus => 2.0,
    };
    wedge(&phi_cyl(sign, j, p), &phi_cyl(sign, k, p)) * s
}

/// `P_{s,i} = e^{-2t} d(e^{2t} phi_{s,i}) = 2 dt ^ phi + d phi`.
pub fn p_form(sign: Sign, i: usize, at: &CylPoint) -> Result<CylTwoForm, FormError> {
    if !(1..=3).contains(&i) {
        return Err(FormError::IndexOutOfRange(i));
    }
    let m = wedge(&unit(0), &phi_cyl(sign, i, &at.omega)) * 2.0 + dphi(sign, i, &at.omega);
    Ok(CylTwoForm { m, at: *at })
}

/// `Q_{s,i} = e^{2t} d(e^{-2t} phi_{s,i}) = -2 dt ^ phi + d phi`.
pub fn q_form(sign: Sign, i: usize, at: &CylPoint) -> Result<CylTwoForm, FormError> {
    if !(1..=3).contains(&i) {
        return Err(FormError::IndexOutOfRange(i));
    }
    let m = wedge(&unit(0), &phi_cyl(sign, i, &at.omega)) * -2.0 + dphi(sign, i, &at.omega);
    Ok(CylTwoForm { m, at: *at })
}

/// Full interior product `iota_V W`.
pub fn contract(v: CylVector, w: &CylTwoForm) -> CylOneForm {
    let vc = v.frame_comps(&w.at.omega);
    let row = w.m.transpose() * vc; // (iota_V W)_n = sum_m V_m W_mn
    CylOneForm {
        dt: row[0],
        comps: [row[1], row[2], row[3]],
    }
}

/// Tangential part of the interior product (`mod dt`).
pub fn contract_mod_dt(v: CylVector, w: &CylTwoForm) -> CylOneForm {
    contract(v, w).tangential()
}

/// Pullback of an x-chart two-form under the cone map `pi(t, w) = e^t w`,
/// expressed in the cylinder frame.
pub fn pullback_pi(f: &TwoFormR4, at: &CylPoint) -> Result<CylTwoForm, FormError> {
    if f.chart != Chart::X {
        return Err(FormError::WrongChart);
    }
    // d pi maps dt -> e^t w (ambient) and X_j -> e^t X_j(w).
    let scale = (2.0 * at.t).exp();
    let w = at.omega.vec();
    let mut frame = [w, Vector4::zeros(), Vector4::zeros(), Vector4::zeros()];
    for (j, slot) in frame.iter_mut().skip(1).enumerate() {
        *slot = crate::geometry::x_frame_vec(Sign::Minus, j, &at.omega);
    }
    let mut m = Matrix4::zeros();
    for a in 0..4 {
        for b in 0..4 {
            m[(a, b)] = scale * (frame[a].transpose() * f.m * frame[b])[(0, 0)];
        }
    }
    Ok(CylTwoForm { m, at: *at })
}

/// Pullback of a constant two-form under the inversion `r(x) = x / |x|^2`,
/// evaluated at `x` (coefficients in the chart of `f`).
pub fn pullback_inversion(f: &TwoFormR4, x: &Vector4<f64>) -> TwoFormR4 {
    let r2 = x.norm_squared();
    let j = (Matrix4::identity() - (x * x.transpose()) * (2.0 / r2)) / r2;
    TwoFormR4 {
        m: j.transpose() * f.m * j,
        chart: f.chart,
    }
}

/// Checks `r^* Phi_{+,i} = |x|^{-4} T_ij Phi_{-,j}` and the transposed
/// relation for `Phi_{-,i}` over the grid directions at several radii.
pub fn verify_inversion(grid: &SphereGrid) -> CheckResult {
    let mut max_res: f64 = 0.0;
    for p in grid.nodes.iter().step_by(7) {
        let t = transition(p);
        for radius in [0.35, 1.0, 2.6] {
            let x = p.vec() * radius;
            let r4 = x.norm_squared().powi(2);
            for i in 1..=3 {
                let lhs = pullback_inversion(&phi_r4(Sign::Plus, i, Chart::X).unwrap(), &x);
                let mut rhs = Matrix4::zeros();
                for jj in 1..=3 {
                    rhs +=
                        phi_r4(Sign::Minus, jj, Chart::X).unwrap().m * (t[(i - 1, jj - 1)] / r4);
                }
                max_res = max_res.max((lhs.m - rhs).abs().max());

                let lhs = pullback_inversion(&phi_r4(Sign::Minus, i, Chart::X).unwrap(), &x);
                let mut rhs = Matrix4::zeros();
                for jj in 1..=3 {
                    rhs += phi_r4(Sign::Plus, jj, Chart::X).unwrap().m * (t[(jj - 1, i - 1)] / r4);
                }
                max_res = max_res.max((lhs.m - rhs).abs().max());
            }
        }
    }
    CheckResult::new("inversion_pullback_transition", max_res, 1e-10)
}

/// `Q_{+,i}` as the `T`-combination of `P_{-,j}`, and the transposed relation;
/// max residual over all grid nodes.
pub fn verify_pq_transition(grid: &SphereGrid) -> CheckResult {
    let mut max_res: f64 = 0.0;
    for p in grid.nodes.iter() {
        let at = CylPoint { t: 0.0, omega: *p };
        let t = transition(p);
        for i in 1..=3 {
            let q_plus = q_form(Sign::Plus, i, &at).unwrap();
            let mut comb = Matrix4::zeros();
            for j in 1..=3 {
                comb += p_form(Sign::Minus, j, &at).unwrap().m * t[(i - 1, j - 1)];
            }
            max_res = max_res.max((q_plus.m - comb).abs().max());

            let q_minus = q_form(Sign::Minus, i, &at).unwrap();
            let mut comb = Matrix4::zeros();
            for j in 1..=3 {
                comb += p_form(Sign::Plus, j, &at).unwrap().m * t[(j - 1, i - 1)];
            }
            max_res = max_res.max((q_minus.m - comb).abs().max());
        }
    }
    CheckResult::new("pq_transition", max_res, 1e-12)
}
