//! Batch verification of the algebraic and quadrature identities.
//!
//! Each check returns a named residual with its tolerance; the CLI turns the
//! suite into reports and exit codes. Algebraic identities are held to 1e-10,
//! quadrature identities to 1e-7, stencil-based spot checks to 1e-6.

use nalgebra::Matrix3;

use crate::forms::{
    contract, contract_mod_dt, p_form, phi_r4, pullback_pi, q_form, verify_inversion,
    verify_pq_transition, Chart, CylPoint, CylVector,
};
use crate::geometry::{
    self, dstar_oneform, frame_pairing, laplace_beltrami_fd, omega, phi_comps, psi, transition,
    x_frame_vec, GridConfig, S3Point, Sign, SphereGrid, GEO_FD_STEP,
};
use crate::report::{CheckResult, CheckSuite};
use crate::S3_VOLUME;

/// Tolerance classes.
pub const TOL_ALGEBRAIC: f64 = 1e-10;
pub const TOL_QUADRATURE: f64 = 1e-7;
pub const TOL_STENCIL: f64 = 1e-6;

/// Runs every identity check on a fresh grid of the given resolution.
pub fn run_all(config: GridConfig) -> Result<CheckSuite, geometry::GeomError> {
    config.validate()?;
    let grid = SphereGrid::product(config)?;
    let mut suite = CheckSuite::default();

    suite.push(CheckResult::new(
        "quadrature_total_weight",
        (grid.total_weight() - S3_VOLUME).abs(),
        TOL_ALGEBRAIC,
    ));

    // int omega_i omega_j = delta_ij |S^3| / 4
    let mut res: f64 = 0.0;
    for i in 1..=4 {
        for j in 1..=4 {
            let v = grid.integrate(|p| omega(i, p).unwrap() * omega(j, p).unwrap());
            let want = if i == j { S3_VOLUME / 4.0 } else { 0.0 };
            res = res.max((v - want).abs());
        }
    }
    suite.push(CheckResult::new("omega_orthogonality", res, TOL_QUADRATURE));

    // frame Gram matrices and tangency
    let mut res: f64 = 0.0;
    for p in &grid.nodes {
        for sign in [Sign::Minus, Sign::Plus] {
            for i in 0..3 {
                let vi = x_frame_vec(sign, i, p);
                res = res.max(vi.dot(&p.vec()).abs());
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    res = res.max((vi.dot(&x_frame_vec(sign, j, p)) - want).abs());
                }
            }
        }
    }
    suite.push(CheckResult::new("frame_orthonormality", res, TOL_ALGEBRAIC));

    // transition matrix: orthogonality, |det| = 1 (det = -1), pairing display
    let mut res_orth: f64 = 0.0;
    let mut res_det: f64 = 0.0;
    let mut res_rel: f64 = 0.0;
    for p in &grid.nodes {
        let t = transition(p);
        res_orth = res_orth.max((t.transpose() * t - Matrix3::identity()).abs().max());
        res_det = res_det.max((t.determinant() + 1.0).abs());
        // X_{+,i} = -T_ij X_{-,j} and phi_{-,i} = -T_ji phi_{+,j}
        for i in 0..3 {
            let mut acc = nalgebra::Vector4::zeros();
            for j in 0..3 {
                acc += x_frame_vec(Sign::Minus, j, p) * (-t[(i, j)]);
            }
            res_rel = res_rel.max((acc - x_frame_vec(Sign::Plus, i, p)).amax());
            let mut comps = [0.0; 3];
            for j in 0..3 {
                let cp = phi_comps(Sign::Plus, j, p);
                for (a, c) in comps.iter_mut().zip(cp.iter()) {
                    *a += -t[(j, i)] * c;
                }
            }
            let cm = phi_comps(Sign::Minus, i, p);
            for k in 0..3 {
                res_rel = res_rel.max((comps[k] - cm[k]).abs());
            }
        }
        res_rel = res_rel.max((frame_pairing(p) + t.transpose()).abs().max());
    }
    suite.push(CheckResult::new("t_orthogonality", res_orth, TOL_ALGEBRAIC));
    suite.push(CheckResult::new("t_det_is_minus_one", res_det, TOL_ALGEBRAIC));
    suite.push(CheckResult::new("t_frame_transitions", res_rel, TOL_ALGEBRAIC));

    // flat basis norms and duality
    let mut res: f64 = 0.0;
    for s in [Sign::Plus, Sign::Minus] {
        for i in 1..=3 {
            let f = phi_r4(s, i, Chart::X).unwrap();
            res = res.max((f.norm() - 2.0).abs());
            let star = f.hodge_star();
            let sgn = if s == Sign::Plus { 1.0 } else { -1.0 };
            res = res.max((star.m - f.m * sgn).abs().max());
        }
    }
    suite.push(CheckResult::new("flat_basis_norm_and_duality", res, TOL_ALGEBRAIC));

    // cylinder families: norms, Gram, duality classes
    let mut res_norm: f64 = 0.0;
    let mut res_gram: f64 = 0.0;
    let mut res_dual: f64 = 0.0;
    for p in grid.nodes.iter().step_by(3) {
        let at = CylPoint { t: 0.0, omega: *p };
        for s in [Sign::Plus, Sign::Minus] {
            for i in 1..=3 {
                let pf = p_form(s, i, &at).unwrap();
                let qf = q_form(s, i, &at).unwrap();
                res_norm = res_norm.max((pf.norm() - 4.0).abs());
                res_norm = res_norm.max((qf.norm() - 4.0).abs());
                let sgn = if s == Sign::Plus { 1.0 } else { -1.0 };
                res_dual = res_dual.max((pf.hodge_star().m - pf.m * sgn).abs().max());
                res_dual = res_dual.max((qf.hodge_star().m + qf.m * sgn).abs().max());
                for j in 1..=3 {
                    let want = if i == j { 16.0 } else { 0.0 };
                    res_gram = res_gram
                        .max((pf.inner(&p_form(s, j, &at).unwrap()) - want).abs())
                        .max((qf.inner(&q_form(s, j, &at).unwrap()) - want).abs());
                }
            }
        }
    }
    suite.push(CheckResult::new("pq_norms", res_norm, TOL_ALGEBRAIC));
    suite.push(CheckResult::new("pq_gram", res_gram, TOL_ALGEBRAIC));
    suite.push(CheckResult::new("pq_duality_classes", res_dual, TOL_ALGEBRAIC));
    suite.push(verify_pq_transition(&grid));

    // contraction table: every (V, W) entry against the transition expansion
    let mut res: f64 = 0.0;
    for p in grid.nodes.iter().step_by(5) {
        let at = CylPoint { t: 0.0, omega: *p };
        let t = transition(p);
        for s in [Sign::Plus, Sign::Minus] {
            for j in 1..=3 {
                let w = p_form(s, j, &at).unwrap();
                // dt row: iota_dt P = 2 phi
                let got = contract(CylVector::Dt, &w);
                let c = phi_comps(s, j - 1, p);
                res = res.max(got.dt.abs());
                for k in 0..3 {
                    res = res.max((got.comps[k] - 2.0 * c[k]).abs());
                }
                // same-sign rows: diagonal -2 dt, cyclic off-diagonal
                let cyc = if s == Sign::Minus { 2.0 } else { -2.0 };
                for i in 1..=3 {
                    let got = contract(CylVector::X(s, i), &w);
                    if i == j {
                        res = res.max((got.dt + 2.0).abs());
                        for k in 0..3 {
                            res = res.max(got.comps[k].abs());
                        }
                    } else {
                        let k = 6 - i - j;
                        let sgn = if matches!((i, j), (1, 2) | (2, 3) | (3, 1)) {
                            cyc
                        } else {
                            -cyc
                        };
                        let c = phi_comps(s, k - 1, p);
                        res = res.max(got.dt.abs());
                        for m in 0..3 {
                            res = res.max((got.comps[m] - sgn * c[m]).abs());
                        }
                    }
                }
                // cross rows via the transition matrix
                for i in 1..=3 {
                    let got = contract(CylVector::X(s.flip(), i), &w);
                    let mut want_dt = 0.0;
                    let mut want = [0.0; 3];
                    for m in 1..=3 {
                        let coeff = match s.flip() {
                            Sign::Minus => -t[(m - 1, i - 1)],
                            Sign::Plus => -t[(i - 1, m - 1)],
                        };
                        let base = contract(CylVector::X(s, m), &w);
                        want_dt += coeff * base.dt;
                        for k in 0..3 {
                            want[k] += coeff * base.comps[k];
                        }
                    }
                    res = res.max((got.dt - want_dt).abs());
                    for k in 0..3 {
                        res = res.max((got.comps[k] - want[k]).abs());
                    }
                }
            }
        }
    }
    suite.push(CheckResult::new("contraction_table", res, TOL_ALGEBRAIC));

    // mod-dt equality of P and Q contractions
    let mut res: f64 = 0.0;
    for p in grid.nodes.iter().step_by(5) {
        let at = CylPoint { t: 0.4, omega: *p };
        for v in CylVector::all().into_iter().skip(1) {
            for s in [Sign::Plus, Sign::Minus] {
                for j in 1..=3 {
                    let a = contract_mod_dt(v, &p_form(s, j, &at).unwrap());
                    let b = contract_mod_dt(v, &q_form(s, j, &at).unwrap());
                    for k in 0..3 {
                        res = res.max((a.comps[k] - b.comps[k]).abs());
                    }
                }
            }
        }
    }
    suite.push(CheckResult::new("mod_dt_pq_equality", res, TOL_ALGEBRAIC));

    // cone-map pullback: pi^* Phi = (e^{2t}/2) P
    let mut res: f64 = 0.0;
    for p in grid.nodes.iter().step_by(7) {
        for t in [-0.8, 0.0, 0.9] {
            let at = CylPoint { t, omega: *p };
            for s in [Sign::Plus, Sign::Minus] {
                for i in 1..=3 {
                    let pulled = pullback_pi(&phi_r4(s, i, Chart::X).unwrap(), &at).unwrap();
                    let want = p_form(s, i, &at).unwrap().m * (0.5 * (2.0 * t).exp());
                    res = res.max((pulled.m - want).abs().max());
                }
            }
        }
    }
    suite.push(CheckResult::new("cone_pullback", res, TOL_ALGEBRAIC));

    suite.push(verify_inversion(&grid));

    // transition-matrix integrals
    let mut res1: f64 = 0.0;
    let mut res2: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            res1 = res1.max(grid.integrate(|p| transition(p)[(i, j)]).abs());
            for k in 0..3 {
                for l in 0..3 {
                    let v = grid.integrate(|p| {
                        let t = transition(p);
                        t[(i, j)] * t[(k, l)]
                    });
                    let want = if (i, j) == (k, l) { S3_VOLUME / 3.0 } else { 0.0 };
                    res2 = res2.max((v - want).abs());
                }
            }
        }
    }
    suite.push(CheckResult::new("t_first_moments", res1, TOL_QUADRATURE));
    suite.push(CheckResult::new("t_second_moments", res2, TOL_QUADRATURE));

    // codifferential identities on the cylinder: the phi modes are coclosed,
    // the psi modes divide onto omega
    let probes: Vec<&S3Point> = grid.nodes.iter().step_by(97).collect();
    let mut res_phi: f64 = 0.0;
    let mut res_psi: f64 = 0.0;
    for p in &probes {
        for s in [Sign::Plus, Sign::Minus] {
            for i in 0..3 {
                res_phi =
                    res_phi.max(dstar_oneform(p, &|q| phi_comps(s, i, q), GEO_FD_STEP).abs());
            }
        }
        for i in 1..=4 {
            let v = dstar_oneform(p, &|q| psi(i, q).unwrap().comps, GEO_FD_STEP);
            res_psi = res_psi.max((v - 3.0 * omega(i, p).unwrap()).abs());
        }
    }
    suite.push(CheckResult::new("dstar_phi_coclosed", res_phi, TOL_QUADRATURE));
    suite.push(CheckResult::new("dstar_psi_is_3_omega", res_psi, TOL_QUADRATURE));

    // eigenvalue spot checks by geodesic stencils
    let mut res_scalar: f64 = 0.0;
    let mut res_oneform: f64 = 0.0;
    for p in &probes {
        for i in 1..=4 {
            let lap = laplace_beltrami_fd(p, |q| omega(i, q).unwrap(), GEO_FD_STEP);
            res_scalar = res_scalar.max((lap + 3.0 * omega(i, p).unwrap()).abs());
        }
        let xi = |q: &S3Point| psi(2, q).unwrap().comps;
        let lap = geometry::hodge_laplacian_oneform(p, &xi, GEO_FD_STEP);
        let want = xi(p);
        for k in 0..3 {
            res_oneform = res_oneform.max((lap[k] - 3.0 * want[k]).abs());
        }
        let xi = |q: &S3Point| phi_comps(Sign::Plus, 0, q);
        let lap = geometry::hodge_laplacian_oneform(p, &xi, GEO_FD_STEP);
        let want = xi(p);
        for k in 0..3 {
            res_oneform = res_oneform.max((lap[k] - 4.0 * want[k]).abs());
        }
    }
    suite.push(CheckResult::new("laplace_omega_eigen", res_scalar, TOL_STENCIL));
    suite.push(CheckResult::new("hodge_eigen_spot", res_oneform, TOL_STENCIL));

    // Hodge split of the cylinder Laplacian annihilates the harmonic modes
    let sphere_small = SphereGrid::product(GridConfig::field_default())?;
    let mut res: f64 = 0.0;
    {
        use crate::fields::{LieOneForm, OneFormLieField};
        use crate::lie::{su2_basis, LieMatrix};
        let [i_hat, _, _] = su2_basis();
        let lam: f64 = 1e-2;
        let p = S3Point::new([0.4, -0.2, 0.8, 0.3]).unwrap();
        let mode_fields: Vec<OneFormLieField> = vec![
            {
                let g = i_hat.clone();
                OneFormLieField::new(4, move |t, q| LieOneForm {
                    dt: &g * ((3f64.sqrt() * t).exp() * q.coords()[1]),
                    comps: std::array::from_fn(|_| LieMatrix::zeros(4)),
                })
            },
            {
                let g = i_hat.clone();
                OneFormLieField::new(4, move |t, _| LieOneForm {
                    dt: &g * (1.5 - 0.3 * t),
                    comps: std::array::from_fn(|_| LieMatrix::zeros(4)),
                })
            },
            {
                let g = i_hat.clone();
                OneFormLieField::new(4, move |t, q| {
                    let c = phi_comps(Sign::Minus, 0, q);
                    LieOneForm {
                        dt: LieMatrix::zeros(4),
                        comps: std::array::from_fn(|j| &g * ((2.0 * t).exp() * c[j])),
                    }
                })
            },
            {
                let g = i_hat.clone();
                OneFormLieField::new(4, move |t, q| {
                    let amp = (-3f64.sqrt() * (t - lam.ln())).exp();
                    let c = psi(3, q).unwrap().comps;
                    LieOneForm {
                        dt: LieMatrix::zeros(4),
                        comps: std::array::from_fn(|j| &g * (amp * c[j])),
                    }
                })
            },
        ];
        for (k, a) in mode_fields.iter().enumerate() {
            let t0 = if k == 3 { 0.5 * lam.ln() } else { 0.2 };
            let lap = crate::spectral::hodge_laplacian(a, t0, &p, &sphere_small);
            let scale = a.at(t0, &p).norm().max(1.0);
            res = res.max(lap.norm() / scale);
        }
    }
    suite.push(CheckResult::new("hodge_split_harmonic_modes", res, TOL_ALGEBRAIC));

    // solver residual contract
    suite.push(crate::spectral::verify_solver_residual(1.9));

    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_passes_at_default_resolution() {
        let suite = run_all(GridConfig::default()).unwrap();
        for c in &suite.checks {
            assert!(c.pass, "{}: residual {} > {}", c.name, c.residual, c.tolerance);
        }
        assert!(suite.checks.len() >= 18);
    }

    #[test]
    fn resolution_guard_propagates() {
        assert!(run_all(GridConfig {
            n_radial: 2,
            n_angle: 4
        })
        .is_err());
    }
}
