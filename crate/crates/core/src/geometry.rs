//! Round `S^3`: low eigenmodes, rotation frames, transition matrix, quadrature.
//!
//! Everything here is closed-form. The scalar eigenfunctions `omega_i = x_i`
//! have Laplace eigenvalue 3 (next is 8); the one-form eigenmodes are
//! `psi_i = iota^*(dx_i)` with Hodge eigenvalue 3 and the six `phi_{±,i}`
//! with eigenvalue 4 (next is 8). The two frames `X_{-,i}`, `X_{+,i}` are the
//! right- and left-translation Killing fields; their pointwise pairing is
//! carried by the transition matrix `T`.
//!
//! One-form and two-form values are stored against the `X_-` coframe
//! `{phi_{-,1}, phi_{-,2}, phi_{-,3}}`; sphere two-forms are kept as their
//! Hodge duals (volume `phi_{-,1} ^ phi_{-,2} ^ phi_{-,3}`).

use nalgebra::{Matrix3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("index {got} out of range for {what}")]
    IndexOutOfRange { what: &'static str, got: usize },
    #[error("point is not on the unit sphere (|x| = {norm})")]
    NonUnit { norm: f64 },
    #[error("fields sampled on different grids ({left} vs {right} nodes)")]
    GridMismatch { left: usize, right: usize },
    #[error("form degree mismatch")]
    DegreeMismatch,
    #[error("grid resolution below threshold: {0}")]
    ResolutionTooLow(String),
}

/// Unit-norm check tolerance for sphere points.
pub const UNIT_TOL: f64 = 1e-12;

/// Sign label for the two frames / form families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// A point on the unit sphere in `R^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S3Point {
    x: [f64; 4],
}

impl S3Point {
    /// Builds from ambient coordinates, renormalizing. Errors on near-zero input.
    pub fn new(x: [f64; 4]) -> Result<Self, GeomError> {
        let norm = (x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        if norm < 1e-14 {
            return Err(GeomError::NonUnit { norm });
        }
        Ok(Self {
            x: [x[0] / norm, x[1] / norm, x[2] / norm, x[3] / norm],
        })
    }

    /// Builds without renormalizing; errors if `| |x| - 1 |` exceeds [`UNIT_TOL`].
    pub fn new_strict(x: [f64; 4]) -> Result<Self, GeomError> {
        let norm = (x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(GeomError::NonUnit { norm });
        }
        Ok(Self { x })
    }

    pub fn pole() -> Self {
        Self {
            x: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn coords(&self) -> [f64; 4] {
        self.x
    }

    pub fn vec(&self) -> Vector4<f64> {
        Vector4::from(self.x)
    }

    /// Geodesic step `cos(s) p + sin(s) v` for a unit tangent `v`.
    pub fn geodesic_step(&self, v: &Vector4<f64>, s: f64) -> S3Point {
        let q = self.vec() * s.cos() + v * s.sin();
        S3Point {
            x: [q[0], q[1], q[2], q[3]],
        }
    }
}

/// A tangent vector at a sphere point, stored in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec {
    pub base: S3Point,
    pub v: Vector4<f64>,
}

impl TangentVec {
    pub fn new(base: S3Point, v: Vector4<f64>) -> Result<Self, GeomError> {
        let t = v.dot(&base.vec()).abs();
        if t > UNIT_TOL * v.norm().max(1.0) {
            return Err(GeomError::NonUnit { norm: t });
        }
        Ok(Self { base, v })
    }
}

/// A covector at a sphere point, components against the `X_-` coframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CotangentVec {
    pub base: S3Point,
    pub comps: [f64; 3],
}

impl CotangentVec {
    pub fn norm(&self) -> f64 {
        self.comps.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Evaluates the covector on a tangent vector.
    pub fn apply(&self, v: &TangentVec) -> f64 {
        (0..3)
            .map(|j| self.comps[j] * x_frame_vec(Sign::Minus, j, &self.base).dot(&v.v))
            .sum()
    }
}

/// Ambient components of `X_{s,i}` at `p` (zero-based `i`).
pub fn x_frame_vec(sign: Sign, i: usize, p: &S3Point) -> Vector4<f64> {
    let [x1, x2, x3, x4] = p.coords();
    match (sign, i) {
        (Sign::Minus, 0) => Vector4::new(-x2, x1, x4, -x3),
        (Sign::Minus, 1) => Vector4::new(-x3, -x4, x1, x2),
        (Sign::Minus, 2) => Vector4::new(-x4, x3, -x2, x1),
        (Sign::Plus, 0) => Vector4::new(-x2, x1, -x4, x3),
        (Sign::Plus, 1) => Vector4::new(-x3, x4, x1, -x2),
        (Sign::Plus, 2) => Vector4::new(-x4, -x3, x2, x1),
        _ => panic!("frame index {i} out of range"),
    }
}

/// The scalar eigenfunction `omega_i = x_i|_{S^3}` (one-based `i`), eigenvalue 3.
pub fn omega(i: usize, p: &S3Point) -> Result<f64, GeomError> {
    if !(1..=4).contains(&i) {
        return Err(GeomError::IndexOutOfRange {
            what: "omega",
            got: i,
        });
    }
    Ok(p.coords()[i - 1])
}

/// The one-form eigenmode `psi_i = iota^*(dx_i)` (one-based `i`), Hodge eigenvalue 3.
pub fn psi(i: usize, p: &S3Point) -> Result<CotangentVec, GeomError> {
    if !(1..=4).contains(&i) {
        return Err(GeomError::IndexOutOfRange {
            what: "psi",
            got: i,
        });
    }
    let mut comps = [0.0; 3];
    for (j, c) in comps.iter_mut().enumerate() {
        *c = x_frame_vec(Sign::Minus, j, p)[i - 1];
    }
    Ok(CotangentVec { base: *p, comps })
}

/// The one-form eigenmode `phi_{s,i}` (one-based `i`), Hodge eigenvalue 4, unit norm.
pub fn phi(sign: Sign, i: usize, p: &S3Point) -> Result<CotangentVec, GeomError> {
    if !(1..=3).contains(&i) {
        return Err(GeomError::IndexOutOfRange {
            what: "phi",
            got: i,
        });
    }
    Ok(CotangentVec {
        base: *p,
        comps: phi_comps(sign, i - 1, p),
    })
}

/// Coframe components of `phi_{s,i}` (zero-based `i`) against the `X_-` coframe.
pub fn phi_comps(sign: Sign, i: usize, p: &S3Point) -> [f64; 3] {
    match sign {
        Sign::Minus => {
            let mut c = [0.0; 3];
            c[i] = 1.0;
            c
        }
        // phi_{+,i} = -T_ij phi_{-,j}
        Sign::Plus => {
            let t = transition(p);
            [-t[(i, 0)], -t[(i, 1)], -t[(i, 2)]]
        }
    }
}

/// The vector field `X_{s,i}` dual to `phi_{s,i}` (one-based `i`).
pub fn x_field(sign: Sign, i: usize, p: &S3Point) -> Result<TangentVec, GeomError> {
    if !(1..=3).contains(&i) {
        return Err(GeomError::IndexOutOfRange {
            what: "x_field",
            got: i,
        });
    }
    Ok(TangentVec {
        base: *p,
        v: x_frame_vec(sign, i - 1, p),
    })
}

/// The pairing matrix `((X_{-,i}, X_{+,j}))_{ij}` in closed form.
pub fn frame_pairing(p: &S3Point) -> Matrix3<f64> {
    let [x1, x2, x3, x4] = p.coords();
    Matrix3::new(
        x1 * x1 + x2 * x2 - x3 * x3 - x4 * x4,
        2.0 * (x1 * x4 + x2 * x3),
        2.0 * (x2 * x4 - x1 * x3),
        2.0 * (x2 * x3 - x1 * x4),
        x1 * x1 + x3 * x3 - x2 * x2 - x4 * x4,
        2.0 * (x1 * x2 + x3 * x4),
        2.0 * (x1 * x3 + x2 * x4),
        2.0 * (x3 * x4 - x1 * x2),
        x1 * x1 + x4 * x4 - x2 * x2 - x3 * x3,
    )
}

/// `T(p)`, defined by `((X_{-,i}, X_{+,j})) = -T^t`.
pub fn transition(p: &S3Point) -> Matrix3<f64> {
    -frame_pairing(p).transpose()
}

/// The frame transition matrix at a base point.
///
/// `T` is orthogonal with `det T = -1`; it satisfies
/// `X_{-,i} = -T_ji X_{+,j}`, `X_{+,i} = -T_ij X_{-,j}` and the same
/// relations for the dual coframes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub base: S3Point,
    pub t: Matrix3<f64>,
}

/// Builds `T` at `p`, rejecting non-unit input.
pub fn t_matrix(p: &S3Point) -> Result<TransitionMatrix, GeomError> {
    let norm = p.vec().norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(GeomError::NonUnit { norm });
    }
    Ok(TransitionMatrix {
        base: *p,
        t: transition(p),
    })
}

impl TransitionMatrix {
    pub fn orthogonality_defect(&self) -> f64 {
        (self.t.transpose() * self.t - Matrix3::identity()).abs().max()
    }

    pub fn det(&self) -> f64 {
        self.t.determinant()
    }
}

/// Quadrature resolution for the product rule on `S^3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Gauss-Legendre nodes in the radial Hopf angle.
    pub n_radial: usize,
    /// Equispaced nodes in each of the two circle angles.
    pub n_angle: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_radial: 8,
            n_angle: 16,
        }
    }
}

impl GridConfig {
    /// Coarser grid for field-heavy loops; still exact through degree 11.
    pub fn field_default() -> Self {
        GridConfig {
            n_radial: 6,
            n_angle: 12,
        }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if self.n_radial < 4 || self.n_angle < 8 {
            return Err(GeomError::ResolutionTooLow(format!(
                "need n_radial >= 4 and n_angle >= 8, got {} / {}",
                self.n_radial, self.n_angle
            )));
        }
        Ok(())
    }
}

/// Quadrature nodes and weights on `S^3`; weights sum to `2 pi^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    pub nodes: Vec<S3Point>,
    pub weights: Vec<f64>,
}

impl SphereGrid {
    /// Product rule in Hopf coordinates
    /// `x = (sqrt(1-u) cos a, sqrt(1-u) sin a, sqrt(u) cos b, sqrt(u) sin b)`:
    /// Gauss-Legendre in `u`, trapezoid in the two angles. Exact for
    /// polynomials in `x` of total degree `< 2 n_radial` and `< n_angle`.
    pub fn product(config: GridConfig) -> Result<Self, GeomError> {
        config.validate()?;
        let (gu, gw) = gauss_legendre_01(config.n_radial);
        let na = config.n_angle;
        let dphi = 2.0 * std::f64::consts::PI / na as f64;
        let mut nodes = Vec::with_capacity(config.n_radial * na * na);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (u, wu) in gu.iter().zip(gw.iter()) {
            let (cu, su) = ((1.0 - u).sqrt(), u.sqrt());
            for ia in 0..na {
                let a = dphi * ia as f64;
                for ib in 0..na {
                    let b = dphi * ib as f64;
                    nodes.push(S3Point {
                        x: [cu * a.cos(), cu * a.sin(), su * b.cos(), su * b.sin()],
                    });
                    weights.push(0.5 * wu * dphi * dphi);
                }
            }
        }
        Ok(SphereGrid { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Quadrature of a scalar function.
    pub fn integrate(&self, f: impl Fn(&S3Point) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Columnar text serialization, one `x1 x2 x3 x4 weight` line per node.
    pub fn to_columnar(&self) -> String {
        let mut out = String::new();
        for (p, w) in self.nodes.iter().zip(self.weights.iter()) {
            let [x1, x2, x3, x4] = p.coords();
            out.push_str(&format!("{x1:.17e} {x2:.17e} {x3:.17e} {x4:.17e} {w:.17e}\n"));
        }
        out
    }

    pub fn from_columnar(text: &str) -> Result<Self, GeomError> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| GeomError::ResolutionTooLow(format!("bad grid line: {e}")))?;
            if vals.len() != 5 {
                return Err(GeomError::ResolutionTooLow(format!(
                    "grid line has {} columns, want 5",
                    vals.len()
                )));
            }
            nodes.push(S3Point::new_strict([vals[0], vals[1], vals[2], vals[3]])?);
            weights.push(vals[4]);
        }
        Ok(SphereGrid { nodes, weights })
    }
}

/// Sampled field on a sphere slice, for quadrature pairings.
#[derive(Debug, Clone, PartialEq)]
pub enum SliceField {
    Scalar(Vec<f64>),
    /// Coframe components against `{phi_{-,j}}` per node.
    OneForm(Vec<[f64; 3]>),
}

impl SliceField {
    fn len(&self) -> usize {
        match self {
            SliceField::Scalar(v) => v.len(),
            SliceField::OneForm(v) => v.len(),
        }
    }
}

/// `L^2` pairing of two sampled slice fields over a grid.
pub fn l2_inner(f: &SliceField, g: &SliceField, grid: &SphereGrid) -> Result<f64, GeomError> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(GeomError::GridMismatch {
            left: f.len(),
            right: g.len(),
        });
    }
    match (f, g) {
        (SliceField::Scalar(a), SliceField::Scalar(b)) => Ok(grid
            .weights
            .iter()
            .zip(a.iter().zip(b.iter()))
            .map(|(w, (x, y))| w * x * y)
            .sum()),
        (SliceField::OneForm(a), SliceField::OneForm(b)) => Ok(grid
            .weights
            .iter()
            .zip(a.iter().zip(b.iter()))
            .map(|(w, (x, y))| w * (x[0] * y[0] + x[1] * y[1] + x[2] * y[2]))
            .sum()),
        _ => Err(GeomError::DegreeMismatch),
    }
}

/// Gauss-Legendre nodes/weights on `[0, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 0..n {
        // initial guess (Chebyshev-like)
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs.push(0.5 * (1.0 - x));
        ws.push(0.5 * w);
    }
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

// ---------------------------------------------------------------------------
// Finite differences along sphere geodesics.
//
// The frame orbits are great circles, so second derivatives along the flow
// are plain geodesic stencils and the Laplace-Beltrami operator of a scalar
// is the sum of the three second derivatives.
// ---------------------------------------------------------------------------

/// Default step for geodesic stencils.
pub const GEO_FD_STEP: f64 = 5e-3;

/// 4th-order first derivative of `g` along the geodesic through `p` with unit
/// tangent `v`.
pub fn geodesic_deriv<T, F>(p: &S3Point, v: &Vector4<f64>, g: F, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(&S3Point) -> T,
{
    let gp2 = g(&p.geodesic_step(v, 2.0 * h));
    let gp1 = g(&p.geodesic_step(v, h));
    let gm1 = g(&p.geodesic_step(v, -h));
    let gm2 = g(&p.geodesic_step(v, -2.0 * h));
    (gp1 - gm1) * (8.0 / (12.0 * h)) + (gm2 - gp2) * (1.0 / (12.0 * h))
}

/// 4th-order second derivative along the geodesic (5-point stencil).
pub fn geodesic_deriv2<T, F>(p: &S3Point, v: &Vector4<f64>, g: F, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(&S3Point) -> T,
{
    let gp2 = g(&p.geodesic_step(v, 2.0 * h));
    let gp1 = g(&p.geodesic_step(v, h));
    let g0 = g(p);
    let gm1 = g(&p.geodesic_step(v, -h));
    let gm2 = g(&p.geodesic_step(v, -2.0 * h));
    (gp1 + gm1) * (16.0 / (12.0 * h * h)) + (gp2 + gm2) * (-1.0 / (12.0 * h * h))
        + g0 * (-30.0 / (12.0 * h * h))
}

/// Directional derivative `X_{-,j} g` by geodesic stencil (zero-based `j`).
pub fn frame_deriv<T, F>(j: usize, p: &S3Point, g: F, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(&S3Point) -> T,
{
    let v = x_frame_vec(Sign::Minus, j, p);
    geodesic_deriv(p, &v, g, h)
}

/// Laplace-Beltrami of a scalar by summed geodesic stencils.
pub fn laplace_beltrami_fd(p: &S3Point, g: impl Fn(&S3Point) -> f64, h: f64) -> f64 {
    (0..3)
        .map(|j| {
            let v = x_frame_vec(Sign::Minus, j, p);
            geodesic_deriv2(p, &v, &g, h)
        })
        .sum()
}

// Sphere exterior calculus in the X_- frame. One-forms are component triples
// xi_j = xi(X_{-,j}); two-forms are stored as Hodge duals w_c = eps_cab W_ab / 2.

/// `d` of a scalar: components `X_j f`.
pub fn d_scalar(p: &S3Point, f: &dyn Fn(&S3Point) -> f64, h: f64) -> [f64; 3] {
    [
        frame_deriv(0, p, f, h),
        frame_deriv(1, p, f, h),
        frame_deriv(2, p, f, h),
    ]
}

/// `d^*` of a one-form: `-sum_j X_j xi_j` (the frame fields are divergence free).
pub fn dstar_oneform(p: &S3Point, xi: &dyn Fn(&S3Point) -> [f64; 3], h: f64) -> f64 {
    -(0..3)
        .map(|j| frame_deriv(j, p, |q| xi(q)[j], h))
        .sum::<f64>()
}

/// `d` of a one-form, returned as the Hodge dual triple:
/// `(*d xi)_c = eps_cab X_a xi_b - 2 xi_c`.
pub fn curl_oneform(p: &S3Point, xi: &dyn Fn(&S3Point) -> [f64; 3], h: f64) -> [f64; 3] {
    let x0 = xi(p);
    let mut out = [0.0; 3];
    for c in 0..3 {
        let a = (c + 1) % 3;
        let b = (c + 2) % 3;
        let da = frame_deriv(a, p, |q| xi(q)[b], h);
        let db = frame_deriv(b, p, |q| xi(q)[a], h);
        out[c] = da - db - 2.0 * x0[c];
    }
    out
}

/// Hodge Laplacian `(d d^* + d^* d)` of a one-form by nested stencils.
pub fn hodge_laplacian_oneform(
    p: &S3Point,
    xi: &(dyn Fn(&S3Point) -> [f64; 3] + Sync),
    h: f64,
) -> [f64; 3] {
    // d d* xi
    let ddstar = d_scalar(p, &|q| dstar_oneform(q, &|r| xi(r), h), h);
    // d* d xi = curl of the dual of d xi (on a 3-manifold, d* on 2-forms is
    // star d star, which in dual components is another curl).
    let dstard = {
        let w = |q: &S3Point| curl_oneform(q, &|r| xi(r), h);
        let mut out = [0.0; 3];
        let w0 = w(p);
        for c in 0..3 {
            let a = (c + 1) % 3;
            let b = (c + 2) % 3;
            let da = frame_deriv(a, p, |q| w(q)[b], h);
            let db = frame_deriv(b, p, |q| w(q)[a], h);
            out[c] = da - db - 2.0 * w0[c];
        }
        out
    };
    [
        ddstar[0] + dstard[0],
        ddstar[1] + dstard[1],
        ddstar[2] + dstard[2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::S3_VOLUME;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut impl Rng) -> S3Point {
        loop {
            let x = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            if let Ok(p) = S3Point::new(x) {
                return p;
            }
        }
    }

    #[test]
    fn omega_is_coordinate_restriction() {
        let p = S3Point::pole();
        assert_eq!(omega(1, &p).unwrap(), 1.0);
        assert_eq!(omega(2, &p).unwrap(), 0.0);
        assert!(omega(5, &p).is_err());
        assert!(omega(0, &p).is_err());
    }

    #[test]
    fn omega_squared_quadrature_is_quarter_volume() {
        let grid = SphereGrid::product(GridConfig::default()).unwrap();
        let val = grid.integrate(|p| omega(1, p).unwrap().powi(2));
        assert!(
            (val - S3_VOLUME / 4.0).abs() < 1e-10,
            "int omega_1^2 = {val}, want {}",
            S3_VOLUME / 4.0
        );
    }

    #[test]
    fn quadrature_weight_sum_and_mean_free_modes() {
        let grid = SphereGrid::product(GridConfig::default()).unwrap();
        assert!((grid.total_weight() - S3_VOLUME).abs() < 1e-10);
        for i in 1..=4 {
            let m = grid.integrate(|p| omega(i, p).unwrap());
            assert!(m.abs() < 1e-12, "omega_{i} mean {m}");
        }
        // moment table: int x_i^2 x_j^2 and int x_i^4
        let v22 = grid.integrate(|p| {
            let c = p.coords();
            c[0] * c[0] * c[1] * c[1]
        });
        assert!((v22 - S3_VOLUME / 24.0).abs() < 1e-12);
        let v4 = grid.integrate(|p| p.coords()[2].powi(4));
        assert!((v4 - S3_VOLUME / 8.0).abs() < 1e-12);
    }

    #[test]
    fn omega_pairs_orthogonal() {
        let grid = SphereGrid::product(GridConfig::default()).unwrap();
        for i in 1..=4 {
            for j in 1..=4 {
                let v = grid.integrate(|p| omega(i, p).unwrap() * omega(j, p).unwrap());
                let want = if i == j { S3_VOLUME / 4.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-10, "({i},{j}) -> {v}");
            }
        }
    }

    #[test]
    fn psi_at_pole_vanishes_and_norm_identity() {
        let p = S3Point::pole();
        assert!(psi(1, &p).unwrap().norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let q = random_point(&mut rng);
            let n2 = psi(1, &q).unwrap().comps.iter().map(|c| c * c).sum::<f64>();
            let want = 1.0 - q.coords()[0].powi(2);
            assert!((n2 - want).abs() < 1e-13);
        }
    }

    #[test]
    fn frames_orthonormal_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let p = random_point(&mut rng);
            for sign in [Sign::Minus, Sign::Plus] {
                for i in 0..3 {
                    let vi = x_frame_vec(sign, i, &p);
                    assert!(vi.dot(&p.vec()).abs() < 1e-14, "not tangent");
                    for j in 0..3 {
                        let vj = x_frame_vec(sign, j, &p);
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((vi.dot(&vj) - want).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn x_minus_1_at_pole() {
        let v = x_field(Sign::Minus, 1, &S3Point::pole()).unwrap().v;
        assert!((v - Vector4::new(0.0, 1.0, 0.0, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn transition_is_orthogonal_det_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let p = random_point(&mut rng);
            let tm = t_matrix(&p).unwrap();
            assert!(tm.orthogonality_defect() < 1e-12);
            assert!((tm.det() + 1.0).abs() < 1e-10, "det {}", tm.det());
        }
        let tm = t_matrix(&S3Point::pole()).unwrap();
        assert!((tm.t + Matrix3::identity()).abs().max() < 1e-15, "T(pole) = -I");
    }

    #[test]
    fn t_matrix_rejects_nonunit() {
        let p = S3Point { x: [1.1, 0.0, 0.0, 0.0] };
        assert!(t_matrix(&p).is_err());
    }

    #[test]
    fn frame_transition_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_point(&mut rng);
            let t = transition(&p);
            for i in 0..3 {
                // X_{-,i} = -T_ji X_{+,j}
                let mut acc = Vector4::zeros();
                for j in 0..3 {
                    acc += x_frame_vec(Sign::Plus, j, &p) * (-t[(j, i)]);
                }
                assert!((acc - x_frame_vec(Sign::Minus, i, &p)).amax() < 1e-13);
                // X_{+,i} = -T_ij X_{-,j}
                let mut acc = Vector4::zeros();
                for j in 0..3 {
                    acc += x_frame_vec(Sign::Minus, j, &p) * (-t[(i, j)]);
                }
                assert!((acc - x_frame_vec(Sign::Plus, i, &p)).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn phi_relations_and_pointwise_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let p = random_point(&mut rng);
            let t = transition(&p);
            for i in 1..=3 {
                assert!((phi(Sign::Plus, i, &p).unwrap().norm() - 1.0).abs() < 1e-13);
                assert!((phi(Sign::Minus, i, &p).unwrap().norm() - 1.0).abs() < 1e-13);
                // phi_{-,i} = -T_ji phi_{+,j}
                let mut acc = [0.0; 3];
                for j in 1..=3 {
                    let cp = phi_comps(Sign::Plus, j - 1, &p);
                    for (a, c) in acc.iter_mut().zip(cp.iter()) {
                        *a += -t[(j - 1, i - 1)] * c;
                    }
                }
                let cm = phi_comps(Sign::Minus, i - 1, &p);
                for k in 0..3 {
                    assert!((acc[k] - cm[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn phi_minus_equals_phi_plus_at_pole() {
        let p = S3Point::pole();
        for i in 1..=3 {
            let a = phi(Sign::Minus, i, &p).unwrap().comps;
            let b = phi(Sign::Plus, i, &p).unwrap().comps;
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn phi_l2_orthogonality() {
        let grid = SphereGrid::product(GridConfig::default()).unwrap();
        for s in [Sign::Plus, Sign::Minus] {
            for i in 1..=3 {
                for j in 1..=3 {
                    let f = SliceField::OneForm(
                        grid.nodes.iter().map(|p| phi_comps(s, i - 1, p)).collect(),
                    );
                    let g = SliceField::OneForm(
                        grid.nodes.iter().map(|p| phi_comps(s, j - 1, p)).collect(),
                    );
                    let v = l2_inner(&f, &g, &grid).unwrap();
                    let want = if i == j { S3_VOLUME } else { 0.0 };
                    assert!((v - want).abs() < 1e-10, "{s:?} ({i},{j}) -> {v}");
                }
            }
        }
        // across families: <phi_+, phi_-> = -int T = 0
        for i in 1..=3 {
            for j in 1..=3 {
                let f = SliceField::OneForm(
                    grid.nodes
                        .iter()
                        .map(|p| phi_comps(Sign::Plus, i - 1, p))
                        .collect(),
                );
                let g = SliceField::OneForm(
                    grid.nodes
                        .iter()
                        .map(|p| phi_comps(Sign::Minus, j - 1, p))
                        .collect(),
                );
                let v = l2_inner(&f, &g, &grid).unwrap();
                assert!(v.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn l2_inner_error_paths() {
        let grid = SphereGrid::product(GridConfig::default()).unwrap();
        let f = SliceField::Scalar(vec![0.0; grid.len()]);
        let bad = SliceField::Scalar(vec![0.0; 3]);
        assert!(matches!(
            l2_inner(&f, &bad, &grid),
            Err(GeomError::GridMismatch { .. })
        ));
        let g = SliceField::OneForm(vec![[0.0; 3]; grid.len()]);
        assert!(matches!(
            l2_inner(&f, &g, &grid),
            Err(GeomError::DegreeMismatch)
        ));
        let z = SliceField::Scalar(vec![0.0; grid.len()]);
        let ones = SliceField::Scalar(vec![1.0; grid.len()]);
        assert_eq!(l2_inner(&ones, &z, &grid).unwrap(), 0.0);
    }

    #[test]
    fn tfact_integrals_vanish() {
        let grid = SphereGrid::product(GridConfig::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v = grid.integrate(|p| transition(p)[(i, j)]);
                assert!(v.abs() < 1e-10, "int T_{i}{j} = {v}");
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let v = grid.integrate(|p| {
                            let t = transition(p);
                            t[(i, j)] * t[(k, l)]
                        });
                        if (i, j) == (k, l) {
                            assert!((v - S3_VOLUME / 3.0).abs() < 1e-10);
                        } else {
                            assert!(v.abs() < 1e-10, "int T_{i}{j} T_{k}{l} = {v}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn laplacian_of_omega_is_minus_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let p = random_point(&mut rng);
            for i in 1..=4 {
                let lap = laplace_beltrami_fd(&p, |q| omega(i, q).unwrap(), GEO_FD_STEP);
                let want = -3.0 * omega(i, &p).unwrap();
                assert!((lap - want).abs() < 1e-6, "Delta omega_{i}: {lap} vs {want}");
            }
        }
    }

    #[test]
    fn degree_eight_harmonic_has_eigenvalue_eight() {
        // x_1 x_2 restricted to S^3 is a second-order harmonic polynomial.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let p = random_point(&mut rng);
            let f = |q: &S3Point| q.coords()[0] * q.coords()[1];
            let lap = laplace_beltrami_fd(&p, f, GEO_FD_STEP);
            assert!((lap + 8.0 * f(&p)).abs() < 1e-6);
        }
    }

    #[test]
    fn hodge_eigenvalues_by_stencils() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..4 {
            let p = random_point(&mut rng);
            // psi_2: eigenvalue 3
            let xi = |q: &S3Point| psi(2, q).unwrap().comps;
            let lap = hodge_laplacian_oneform(&p, &xi, GEO_FD_STEP);
            let want = xi(&p);
            for k in 0..3 {
                assert!(
                    (lap[k] - 3.0 * want[k]).abs() < 1e-6,
                    "Hodge psi_2 comp {k}: {} vs {}",
                    lap[k],
                    3.0 * want[k]
                );
            }
            // phi_{+,1}: eigenvalue 4
            let xi = |q: &S3Point| phi_comps(Sign::Plus, 0, q);
            let lap = hodge_laplacian_oneform(&p, &xi, GEO_FD_STEP);
            let want = xi(&p);
            for k in 0..3 {
                assert!((lap[k] - 4.0 * want[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn coclosedness_and_dstar_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let p = random_point(&mut rng);
            for s in [Sign::Plus, Sign::Minus] {
                for i in 0..3 {
                    let v = dstar_oneform(&p, &|q| phi_comps(s, i, q), GEO_FD_STEP);
                    assert!(v.abs() < 1e-8, "d* phi != 0: {v}");
                }
            }
            for i in 1..=4 {
                let v = dstar_oneform(&p, &|q| psi(i, q).unwrap().comps, GEO_FD_STEP);
                let want = 3.0 * omega(i, &p).unwrap();
                assert!((v - want).abs() < 1e-8, "d* psi_{i}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn d_and_dstar_are_adjoint() {
        let grid = SphereGrid::product(GridConfig::field_default()).unwrap();
        let f = |p: &S3Point| p.coords()[0] * p.coords()[3] + 0.5 * p.coords()[1];
        let xi = |p: &S3Point| {
            let mut c = phi_comps(Sign::Plus, 1, p);
            let ps = psi(3, p).unwrap().comps;
            for k in 0..3 {
                c[k] = 0.7 * c[k] + 1.3 * ps[k];
            }
            c
        };
        let lhs = grid.integrate(|p| {
            let df = d_scalar(p, &f, GEO_FD_STEP);
            let x = xi(p);
            df[0] * x[0] + df[1] * x[1] + df[2] * x[2]
        });
        let rhs = grid.integrate(|p| f(p) * dstar_oneform(p, &xi, GEO_FD_STEP));
        assert!((lhs - rhs).abs() < 1e-7, "<d f, xi> = {lhs} vs <f, d* xi> = {rhs}");
    }

    #[test]
    fn grid_columnar_roundtrip() {
        let grid = SphereGrid::product(GridConfig {
            n_radial: 4,
            n_angle: 8,
        })
        .unwrap();
        let text = grid.to_columnar();
        let back = SphereGrid::from_columnar(&text).unwrap();
        assert_eq!(grid.len(), back.len());
        assert!((grid.total_weight() - back.total_weight()).abs() < 1e-12);
    }

    #[test]
    fn resolution_guard() {
        assert!(SphereGrid::product(GridConfig {
            n_radial: 2,
            n_angle: 8
        })
        .is_err());
    }
}
