//! Sensing precoders and SSB power allocation.
//!
//! All precoders for voxel `q` keep each sensing beam orthogonal to the SSB
//! beam (`w_j^H f_q^* = 0`) and, in DL-masked mode, to the direct link
//! toward the receiver (`w_j^H h_{0,j,d}^* = 0`).

mod closed_form;
mod noncoord;
mod power;
mod sdr;

pub use closed_form::coordinated_precoder;
pub use noncoord::{noncoordinated_phase, noncoordinated_precoder, NoncoordDiagnostics};
pub use power::{onset_power, solve_power_allocation, UeScenario};
pub use sdr::{extract_rank1, sdr_bisection_solver, SdrDiagnostics, SdrOptions};

use crate::channel::ChannelSet;
use crate::linalg::{inner, orthonormal_basis};
use crate::scene::Scene;
use crate::{CVector, Error, Result};

/// Whether the direct-link null constraint is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MaskMode {
    DlMasked,
    NonDlMasked,
}

impl MaskMode {
    pub fn from_flag(on: bool) -> Self {
        if on {
            MaskMode::DlMasked
        } else {
            MaskMode::NonDlMasked
        }
    }

    pub fn is_masked(self) -> bool {
        self == MaskMode::DlMasked
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ClosedForm,
    Sdr,
    NonCoordinated,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedForm => "proposed",
            Method::Sdr => "sdr",
            Method::NonCoordinated => "noncoord",
        }
    }
}

/// Constraint residuals of a solution, one entry per AP.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `P_max − ‖w_j‖² − ρ_j` (negative means over budget).
    pub power_slack: Vec<f64>,
    /// `|w_j^H f_q^*|`.
    pub ssb_leak: Vec<f64>,
    /// `|w_j^H h_{0,j,d}^*|`.
    pub direct_leak: Vec<f64>,
}

impl Residuals {
    pub fn evaluate(
        w: &[CVector],
        rho: &[f64],
        p_max: f64,
        f: &CVector,
        channels: &ChannelSet,
    ) -> Self {
        let f_conj = f.conjugate();
        Self {
            power_slack: w
                .iter()
                .zip(rho)
                .map(|(wj, r)| p_max - wj.norm_squared() - r)
                .collect(),
            ssb_leak: w.iter().map(|wj| inner(wj, &f_conj).norm()).collect(),
            direct_leak: w
                .iter()
                .zip(&channels.direct)
                .map(|(wj, d)| inner(wj, &d.h_dep.conjugate()).norm())
                .collect(),
        }
    }

    pub fn max_ssb_leak(&self) -> f64 {
        self.ssb_leak.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_direct_leak(&self) -> f64 {
        self.direct_leak.iter().copied().fold(0.0, f64::max)
    }

    /// Largest budget overshoot (0 when every AP is within budget).
    pub fn max_power_excess(&self) -> f64 {
        self.power_slack
            .iter()
            .map(|s| (-s).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Sensing precoders and SSB powers for one voxel.
#[derive(Debug, Clone)]
pub struct PrecoderSolution {
    /// `w_{j,q}`, one per illuminator.
    pub w: Vec<CVector>,
    /// `ρ_{j,q}` in mW.
    pub rho: Vec<f64>,
    pub p_max: f64,
    /// Sensing SINR without the direct link achieved by the solution
    /// (for the SDR oracle: the best feasible bisection level).
    pub objective: f64,
    pub residuals: Residuals,
    pub mode: MaskMode,
    pub method: Method,
    pub voxel: usize,
    /// Illuminators whose voxel direction lies inside their nulled subspace;
    /// they transmit no sensing power.
    pub idle_aps: Vec<usize>,
    pub warnings: Vec<String>,
}

impl PrecoderSolution {
    pub fn j(&self) -> usize {
        self.w.len()
    }

    /// Stacked `w_q = [w_1; …; w_J]`.
    pub fn stacked(&self) -> CVector {
        let m = self.w.first().map_or(0, |w| w.len());
        let mut out = CVector::zeros(m * self.w.len());
        for (j, wj) in self.w.iter().enumerate() {
            out.rows_mut(j * m, m).copy_from(wj);
        }
        out
    }

    /// Scales every sensing vector by `factor` (power by `factor²`).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for w in &mut out.w {
            *w *= crate::linalg::c(factor);
        }
        out
    }
}

/// Orthonormal basis of the directions AP_j must not excite for voxel `q`:
/// `f_q^*` and, when masked, `h_{0,j,d}^*`.
pub(crate) fn nulled_basis(
    scene: &Scene,
    channels: &ChannelSet,
    q: usize,
    j: usize,
    mode: MaskMode,
) -> Vec<CVector> {
    let mut dirs = vec![scene.ssb_column(q).conjugate()];
    if mode.is_masked() {
        dirs.push(channels.direct[j].h_dep.conjugate());
    }
    orthonormal_basis(&dirs, 1e-10)
}

pub(crate) fn check_inputs(
    scene: &Scene,
    channels: &ChannelSet,
    q: usize,
    rho: &[f64],
    p_max: f64,
) -> Result<()> {
    if q >= scene.voxel_count() || q >= channels.sensing.len() {
        return Err(Error::Contract(format!("voxel index {q} out of range")));
    }
    if rho.len() != scene.j() {
        return Err(Error::Contract(format!(
            "expected {} SSB powers, got {}",
            scene.j(),
            rho.len()
        )));
    }
    if rho.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Contract("SSB powers must be non-negative".into()));
    }
    if rho.iter().any(|r| *r > p_max) {
        return Err(Error::Infeasible(
            crate::error::InfeasibleKind::PowerLimited,
        ));
    }
    Ok(())
}
