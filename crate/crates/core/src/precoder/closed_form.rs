//! Closed-form coordinated precoder.
//!
//! `A = H_q^H v v^H H_q` has rank one, so the relaxed problem is solved by
//! projecting each block `a_j = H_{j,q}^H v` away from the nulled
//! directions and spending the whole remaining budget on it.

use super::{check_inputs, nulled_basis, MaskMode, Method, PrecoderSolution, Residuals};
use crate::channel::ChannelSet;
use crate::linalg::{c, project_out};
use crate::metrics::{combining_vector, sensing_sinr_from_gain};
use crate::scene::Scene;
use crate::{CVector, Error, Result};

/// Relative size of `P^⊥ a_j` below which AP_j is treated as unable to
/// illuminate the voxel.
pub(crate) const DEGENERATE_REL_TOL: f64 = 1e-9;

pub fn coordinated_precoder(
    scene: &Scene,
    channels: &ChannelSet,
    q: usize,
    rho: &[f64],
    p_max: f64,
    mode: MaskMode,
) -> Result<PrecoderSolution> {
    check_inputs(scene, channels, q, rho, p_max)?;
    let v = combining_vector(channels, q);
    let mut w = Vec::with_capacity(scene.j());
    let mut idle_aps = Vec::new();
    for (j, h) in channels.sensing[q].iter().enumerate() {
        // a_j = H_j^H v = conj(scale) · (h_rx^H v) · conj(h_tx)
        let a = h.h_tx.conjugate() * (h.scale().conj() * v.dotc(&h.h_rx).conj());
        let pa = project_out(&a, &nulled_basis(scene, channels, q, j, mode));
        let norm = pa.norm();
        if norm <= DEGENERATE_REL_TOL * a.norm() || norm == 0.0 {
            idle_aps.push(j);
            w.push(CVector::zeros(a.len()));
        } else {
            w.push(pa * c((p_max - rho[j]).sqrt() / norm));
        }
    }
    if idle_aps.len() == scene.j() {
        return Err(Error::DegenerateVoxel { voxel: q });
    }
    let f = scene.ssb_column(q);
    let warnings = idle_aps
        .iter()
        .map(|j| {
            format!(
                "AP {} idle: voxel direction lies in its nulled subspace",
                j + 1
            )
        })
        .collect();
    Ok(PrecoderSolution {
        objective: sensing_sinr_from_gain(channels, &v, q, &w, rho),
        residuals: Residuals::evaluate(&w, rho, p_max, &f, channels),
        w,
        rho: rho.to_vec(),
        p_max,
        mode,
        method: Method::ClosedForm,
        voxel: q,
        idle_aps,
        warnings,
    })
}
