//! Non-coordinated benchmark precoder.
//!
//! Each AP steers toward the voxel on its own, projecting the steering
//! vector off `U_j = [h_{0,j,d}/√M, f_q^*]`, and the only inter-AP relation
//! is the path-length phase `φ_j = (l_j − l_1)/λ` relative to AP_1.

use std::f64::consts::PI;

use nalgebra::SVD;
use num_complex::Complex64;

use super::{check_inputs, MaskMode, Method, PrecoderSolution, Residuals};
use crate::channel::ChannelSet;
use crate::linalg::c;
use crate::metrics::{combining_vector, sensing_sinr_from_gain};
use crate::scene::Scene;
use crate::{CMatrix, CVector, Error, Result};

/// Condition number of `U^H U` above which the pseudo-inverse is used.
const GRAM_COND_LIMIT: f64 = 1e12;

/// Extra information about how the benchmark was formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoncoordDiagnostics {
    /// Per AP: `‖w̃_exact − w̃_reduced‖ / ‖h‖`, comparing the exact
    /// projector with the orthonormal-columns shortcut. Normalised by the
    /// steering vector so that nearly nulled APs stay finite.
    pub reduced_form_gap: Vec<f64>,
    /// Per AP: largest off-diagonal magnitude of `U^H U`.
    pub column_coherence: Vec<f64>,
    /// APs whose `U` was rank deficient.
    pub pinv_fallback: Vec<usize>,
}

/// `e^{j2π(l_j − l_1)/λ}`.
pub fn noncoordinated_phase(l_j: f64, l_1: f64, wavelength: f64) -> Complex64 {
    let cycles = ((l_j - l_1) / wavelength).fract();
    Complex64::from_polar(1.0, 2.0 * PI * cycles)
}

/// Builds `w_j = e^{j2πφ_j} √ρ̃_j w̃_j/‖w̃_j‖` with `ρ̃_j = P_max − ρ_j`.
///
/// In DL-masked mode `U_j = [h_{0,j,d}/√M, f_q^*]`; otherwise only `f_q^*`
/// is projected out.
pub fn noncoordinated_precoder(
    scene: &Scene,
    channels: &ChannelSet,
    q: usize,
    rho: &[f64],
    p_max: f64,
    mode: MaskMode,
) -> Result<(PrecoderSolution, NoncoordDiagnostics)> {
    check_inputs(scene, channels, q, rho, p_max)?;
    let m = scene.m();
    let f = scene.ssb_column(q);
    let lambda = channels.wavelength();
    let l_1 = channels.sensing[q][0].angles.l_tx;
    let mut diag = NoncoordDiagnostics::default();
    let mut w = Vec::with_capacity(scene.j());
    let mut idle_aps = Vec::new();
    let mut warnings = Vec::new();
    for (j, h) in channels.sensing[q].iter().enumerate() {
        let mut cols = Vec::with_capacity(2);
        if mode.is_masked() {
            cols.push(channels.direct[j].h_dep.unscale((m as f64).sqrt()));
        }
        cols.push(f.conjugate());
        let u = CMatrix::from_columns(&cols);
        let gram = u.adjoint() * &u;
        let coherence = (0..gram.nrows())
            .flat_map(|r| {
                (0..gram.ncols())
                    .filter(move |&k| k != r)
                    .map(move |k| (r, k))
            })
            .map(|(r, k)| gram[(r, k)].norm())
            .fold(0.0, f64::max);
        diag.column_coherence.push(coherence);

        let coeffs = match solve_gram(&gram, &(u.adjoint() * &h.h_tx)) {
            Some(x) => x,
            None => {
                diag.pinv_fallback.push(j);
                warnings.push(format!(
                    "AP {}: projection matrix is rank deficient, using the pseudo-inverse",
                    j + 1
                ));
                pinv_apply(&u, &h.h_tx)?
            }
        };
        let exact = &h.h_tx - &u * coeffs;
        let reduced = &h.h_tx - &u * (u.adjoint() * &h.h_tx);
        let norm = exact.norm();
        diag.reduced_form_gap
            .push((&exact - &reduced).norm() / h.h_tx.norm());

        if norm <= super::closed_form::DEGENERATE_REL_TOL * h.h_tx.norm() {
            idle_aps.push(j);
            w.push(CVector::zeros(m));
            continue;
        }
        let phase = noncoordinated_phase(h.angles.l_tx, l_1, lambda);
        w.push(exact * (phase * c((p_max - rho[j]).sqrt() / norm)));
    }
    if idle_aps.len() == scene.j() {
        return Err(Error::DegenerateVoxel { voxel: q });
    }
    for j in &idle_aps {
        warnings.push(format!(
            "AP {} idle: steering vector lies in span(U)",
            j + 1
        ));
    }
    let v = combining_vector(channels, q);
    let sol = PrecoderSolution {
        objective: sensing_sinr_from_gain(channels, &v, q, &w, rho),
        residuals: Residuals::evaluate(&w, rho, p_max, &f, channels),
        w,
        rho: rho.to_vec(),
        p_max,
        mode,
        method: Method::NonCoordinated,
        voxel: q,
        idle_aps,
        warnings,
    };
    Ok((sol, diag))
}

/// Solves `G x = b` for the small Hermitian Gram matrix, or `None` when it
/// is too ill-conditioned.
fn solve_gram(gram: &CMatrix, b: &CVector) -> Option<CVector> {
    let sv = gram.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(min > 0.0) || max / min > GRAM_COND_LIMIT {
        return None;
    }
    gram.clone().lu().solve(b)
}

/// `U⁺ h` through the SVD.
fn pinv_apply(u: &CMatrix, h: &CVector) -> Result<CVector> {
    let svd = SVD::new(u.clone(), true, true);
    let tol = 1e-10 * svd.singular_values.max();
    svd.solve(h, tol)
        .map_err(|e| Error::Solver(format!("pseudo-inverse failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{RcsCoupling, RcsModel, StochasticParams};
    use crate::linalg::inner;
    use crate::scene::{build_codebook, hex_layout, voxel_grid, ArrayGeometry};
    use crate::Point3;

    fn setup() -> (Scene, ChannelSet) {
        let geom = ArrayGeometry::square(12).unwrap();
        let layout = hex_layout(250.0, 3, 10.0, geom).unwrap();
        let grid = voxel_grid(Point3::new(-250.0, -144.0, 10.0), [6.0, 2.0, 2.0], 2.0).unwrap();
        let scene = Scene::new(layout, grid, build_codebook(&geom).unwrap()).unwrap();
        let params = StochasticParams {
            clutter_var: 1e-9,
            noise_var: 1e-6,
        };
        let ch = ChannelSet::build(
            &scene,
            15e9,
            params,
            RcsModel::Swerling2 { variance: 0.1 },
            RcsCoupling::Common,
        )
        .unwrap();
        (scene, ch)
    }

    #[test]
    fn phase_examples() {
        let lambda = 2.998e8 / 15e9;
        assert_eq!(
            noncoordinated_phase(100.0, 100.0, lambda),
            Complex64::new(1.0, 0.0)
        );
        let half = noncoordinated_phase(100.0 + lambda / 2.0, 100.0, lambda);
        assert!((half - Complex64::new(-1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn annihilates_projection_columns() {
        let (scene, ch) = setup();
        let p = 1000.0;
        let m = scene.m() as f64;
        let rho = [70.0; 3];
        for q in 0..scene.voxel_count() {
            let (sol, diag) =
                noncoordinated_precoder(&scene, &ch, q, &rho, p, MaskMode::DlMasked).unwrap();
            assert!(diag.pinv_fallback.is_empty());
            assert!(sol.residuals.max_ssb_leak() < 1e-9 * (m * p).sqrt());
            for (j, (w, d)) in sol.w.iter().zip(&ch.direct).enumerate() {
                assert!(inner(w, &d.h_dep).norm() < 1e-9 * m * p.sqrt());
                let expected = if sol.idle_aps.contains(&j) {
                    0.0
                } else {
                    p - 70.0
                };
                assert!((w.norm_squared() - expected).abs() < 1e-9 * p);
            }
        }
    }

    #[test]
    fn reduced_form_agrees_when_columns_are_orthonormal() {
        let (scene, ch) = setup();
        let (_, diag) =
            noncoordinated_precoder(&scene, &ch, 1, &[70.0; 3], 1000.0, MaskMode::DlMasked)
                .unwrap();
        for (gap, coh) in diag.reduced_form_gap.iter().zip(&diag.column_coherence) {
            // The shortcut error is first order in the column coherence.
            assert!(*gap <= 4.0 * coh + 1e-12, "gap {gap} coherence {coh}");
        }
    }

    #[test]
    fn pinv_fallback_on_dependent_columns() {
        let u = CMatrix::from_columns(&[
            CVector::from_element(4, c(0.5)),
            CVector::from_element(4, c(0.5)),
        ]);
        let gram = u.adjoint() * &u;
        assert!(solve_gram(&gram, &CVector::zeros(2)).is_none());
        let h = CVector::from_fn(4, |i, _| c(i as f64));
        let x = pinv_apply(&u, &h).unwrap();
        let residual = &h - &u * x;
        assert!(inner(&CVector::from_element(4, c(0.5)), &residual).norm() < 1e-12);
    }
}
