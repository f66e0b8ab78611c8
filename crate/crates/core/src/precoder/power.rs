//! SSB power allocation against the cell-edge user SINR requirement.

use crate::error::InfeasibleKind;
use crate::{Error, Result};

/// Cell-edge user served by one AP and interfered by the APs in `𝒰`.
#[derive(Debug, Clone, PartialEq)]
pub struct UeScenario {
    /// Distance from the serving AP, m.
    pub serving_distance: f64,
    /// Distances from the interfering APs, m.
    pub interferer_distances: Vec<f64>,
    /// Required SINR, linear.
    pub gamma_req: f64,
    /// Noise variance at the UE, mW.
    pub noise_var: f64,
}

impl UeScenario {
    /// User at the cell-edge circumradius `2r/√3`, interfered by the two
    /// neighbouring APs at `4r/√3`.
    pub fn hex_cell_edge(r: f64, gamma_req: f64, noise_var: f64) -> Self {
        let edge = 2.0 * r / 3f64.sqrt();
        Self {
            serving_distance: edge,
            interferer_distances: vec![2.0 * edge; 2],
            gamma_req,
            noise_var,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.serving_distance > 0.0) {
            return Err(Error::config("ue_serving_distance_m", "must be positive"));
        }
        if self.interferer_distances.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::config(
                "ue_interferer_distances_m",
                "must be positive",
            ));
        }
        if !(self.gamma_req >= 0.0) || !(self.noise_var >= 0.0) {
            return Err(Error::config("gamma_req_db", "must be non-negative"));
        }
        Ok(())
    }

    /// Large-scale gain `β = 1/l²` of the serving link.
    pub fn serving_gain(&self) -> f64 {
        self.serving_distance.powi(-2)
    }

    pub fn interferer_gains(&self) -> Vec<f64> {
        self.interferer_distances
            .iter()
            .map(|d| d.powi(-2))
            .collect()
    }

    pub fn interference_gain(&self) -> f64 {
        self.interferer_gains().iter().sum()
    }

    /// `β_{k,ue}` for every illuminator: the serving AP first, then the
    /// interferer gains in order; APs beyond `𝒰` get the weakest
    /// interferer gain (zero when `𝒰` is empty).
    pub fn illuminator_gains(&self, j: usize) -> Vec<f64> {
        let inter = self.interferer_gains();
        let weakest = inter.iter().copied().fold(f64::INFINITY, f64::min);
        let weakest = if weakest.is_finite() { weakest } else { 0.0 };
        (0..j)
            .map(|k| match k {
                0 => self.serving_gain(),
                k => inter.get(k - 1).copied().unwrap_or(weakest),
            })
            .collect()
    }
}

/// Minimum common SSB power meeting `γ_req` with equality:
/// `ρ = γ σ² / (β_s − γ Σ β_i)`.
pub fn solve_power_allocation(ue: &UeScenario, p_max: f64) -> Result<f64> {
    let denom = ue.serving_gain() - ue.gamma_req * ue.interference_gain();
    if denom <= 0.0 {
        return Err(Error::Infeasible(InfeasibleKind::InterferenceLimited));
    }
    let rho = ue.gamma_req * ue.noise_var / denom;
    if rho > p_max {
        return Err(Error::Infeasible(InfeasibleKind::PowerLimited));
    }
    Ok(rho)
}

/// Required SSB power regardless of the budget (the onset power).
pub fn onset_power(ue: &UeScenario) -> Result<f64> {
    solve_power_allocation(ue, f64::INFINITY)
}
