//! Scenario configuration.
//!
//! Configuration files are TOML with flat keys. Every key defaults to the
//! baseline parameter set and unknown keys are rejected. The resolved
//! configuration is written back out for the run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{RcsCoupling, RcsModel, StochasticParams};
use crate::metrics::AverageDomain;
use crate::precoder::{MaskMode, Method, UeScenario};
use crate::scene::{build_codebook_with, hex_layout, voxel_grid, ArrayGeometry, Layout, Scene};
use crate::units::{db_to_lin, dbm_to_mw};
use crate::{Error, Point3, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RcsKind {
    Sw2,
    Weibull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Common,
    Independent,
}

/// Which precoders a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderChoice {
    Proposed,
    Noncoord,
    Both,
}

impl PrecoderChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            PrecoderChoice::Proposed => vec![Method::ClosedForm],
            PrecoderChoice::Noncoord => vec![Method::NonCoordinated],
            PrecoderChoice::Both => vec![Method::ClosedForm, Method::NonCoordinated],
        }
    }
}

/// Which direct-link modes a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskChoice {
    On,
    Off,
    Both,
}

impl MaskChoice {
    pub fn modes(self) -> Vec<MaskMode> {
        match self {
            MaskChoice::On => vec![MaskMode::DlMasked],
            MaskChoice::Off => vec![MaskMode::NonDlMasked],
            MaskChoice::Both => vec![MaskMode::DlMasked, MaskMode::NonDlMasked],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Antennas per column and per row of every panel.
    pub m_v: usize,
    pub m_h: usize,
    pub fc_hz: f64,
    /// Ground clutter variance `β_g`, dB.
    pub beta_g_db: f64,
    /// Budget for single-point runs (`solve`, `cdf`), dBm.
    pub p_max_dbm: f64,
    pub sweep_start_dbm: f64,
    pub sweep_stop_dbm: f64,
    pub sweep_step_db: f64,
    /// Requirement for single-point runs, dB.
    pub gamma_req_db: f64,
    /// Requirements swept by `sweep-power`, dB.
    pub gamma_sweep_db: Vec<f64>,
    /// Hexagon inner radius, m.
    pub r_m: f64,
    pub sigma_rcs_dbsm: f64,
    /// Volume altitude, m.
    pub z_m: f64,
    /// Altitudes compared by `sweep-altitude`, m.
    pub altitudes_m: Vec<f64>,
    pub noise_dbm: f64,
    /// Voxel spacing, m.
    pub d_m: f64,
    /// Volume extent (x, y, z), m.
    pub volume_m: [f64; 3],
    pub ap_height_m: f64,
    /// Horizontal volume center (x, y), m. Defaults to the hexagon vertex
    /// equidistant from the receiver and the first two APs.
    pub volume_center_m: Option<[f64; 2]>,
    /// Number of illuminators on the hexagonal ring.
    pub illuminators: usize,
    /// Explicit illuminator positions, replacing the hexagonal ring.
    pub ap_positions_m: Option<Vec<[f64; 3]>>,
    pub receiver_position_m: Option<[f64; 3]>,
    /// Defaults to the cell-edge circumradius `2r/√3`.
    pub ue_serving_distance_m: Option<f64>,
    /// Defaults to two interferers at `4r/√3`.
    pub ue_interferer_distances_m: Option<Vec<f64>>,
    pub rcs: RcsKind,
    pub weibull_shape: f64,
    /// Defaults to the scale matching the Swerling mean power.
    pub weibull_scale: Option<f64>,
    pub rcs_coupling: Coupling,
    pub dl_mask: MaskChoice,
    pub precoder: PrecoderChoice,
    /// Monte Carlo trials for the sensing SINR and CDFs.
    pub trials: usize,
    pub roc_trials: usize,
    pub roc_pmax_dbm: Vec<f64>,
    pub roc_pfa: Vec<f64>,
    /// Voxel used by the single-voxel commands.
    pub voxel: usize,
    pub seed: u64,
    pub exclude_endfire: bool,
    pub average_domain: AverageDomain,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m_v: 12,
            m_h: 12,
            fc_hz: 15e9,
            beta_g_db: -90.0,
            p_max_dbm: 30.0,
            sweep_start_dbm: -5.0,
            sweep_stop_dbm: 30.0,
            sweep_step_db: 0.5,
            gamma_req_db: 3.0,
            gamma_sweep_db: vec![2.0, 3.0],
            r_m: 250.0,
            sigma_rcs_dbsm: -10.0,
            z_m: 10.0,
            altitudes_m: vec![1.0, 10.0],
            noise_dbm: -60.0,
            d_m: 2.0,
            volume_m: [6.0, 2.0, 2.0],
            ap_height_m: 10.0,
            volume_center_m: None,
            illuminators: 3,
            ap_positions_m: None,
            receiver_position_m: None,
            ue_serving_distance_m: None,
            ue_interferer_distances_m: None,
            rcs: RcsKind::Sw2,
            weibull_shape: 2.0,
            weibull_scale: None,
            rcs_coupling: Coupling::Common,
            dl_mask: MaskChoice::On,
            precoder: PrecoderChoice::Both,
            trials: 100_000,
            roc_trials: 1_000_000,
            roc_pmax_dbm: vec![20.0, 25.0, 30.0],
            roc_pfa: vec![1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0],
            voxel: 0,
            seed: 1,
            exclude_endfire: false,
            average_domain: AverageDomain::Linear,
        }
    }
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be positive"))
            }
        };
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be finite"))
            }
        };
        if self.m_v == 0 {
            return Err(Error::config("m_v", "must be at least 1"));
        }
        if self.m_h != self.m_v {
            return Err(Error::config("m_h", "panels must be square (m_h = m_v)"));
        }
        positive("fc_hz", self.fc_hz)?;
        for (k, v) in [
            ("beta_g_db", self.beta_g_db),
            ("p_max_dbm", self.p_max_dbm),
            ("gamma_req_db", self.gamma_req_db),
            ("sigma_rcs_dbsm", self.sigma_rcs_dbsm),
            ("noise_dbm", self.noise_dbm),
            ("sweep_start_dbm", self.sweep_start_dbm),
            ("sweep_stop_dbm", self.sweep_stop_dbm),
        ] {
            finite(k, v)?;
        }
        positive("sweep_step_db", self.sweep_step_db)?;
        if self.sweep_stop_dbm < self.sweep_start_dbm {
            return Err(Error::config(
                "sweep_stop_dbm",
                "must not precede sweep_start_dbm",
            ));
        }
        if self.gamma_sweep_db.is_empty() || self.gamma_sweep_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::config("gamma_sweep_db", "needs finite values"));
        }
        positive("r_m", self.r_m)?;
        positive("d_m", self.d_m)?;
        for v in self.volume_m {
            positive("volume_m", v)?;
        }
        if !(self.z_m >= 0.0) {
            return Err(Error::config("z_m", "must be non-negative"));
        }
        if self.altitudes_m.is_empty() || self.altitudes_m.iter().any(|z| !(*z >= 0.0)) {
            return Err(Error::config("altitudes_m", "needs non-negative altitudes"));
        }
        finite("ap_height_m", self.ap_height_m)?;
        if self.ap_positions_m.is_none() && !(1..=6).contains(&self.illuminators) {
            return Err(Error::config("illuminators", "hexagonal ring holds 1..=6"));
        }
        if let Some(p) = &self.ap_positions_m {
            if p.is_empty() {
                return Err(Error::config(
                    "ap_positions_m",
                    "needs at least one position",
                ));
            }
        }
        if let Some(d) = self.ue_serving_distance_m {
            positive("ue_serving_distance_m", d)?;
        }
        if let Some(ds) = &self.ue_interferer_distances_m {
            for d in ds {
                positive("ue_interferer_distances_m", *d)?;
            }
            if ds.len() + 1 > self.j() {
                return Err(Error::config(
                    "ue_interferer_distances_m",
                    "at most J - 1 interfering APs",
                ));
            }
        }
        positive("weibull_shape", self.weibull_shape)?;
        if let Some(s) = self.weibull_scale {
            positive("weibull_scale", s)?;
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.roc_trials == 0 {
            return Err(Error::config("roc_trials", "must be at least 1"));
        }
        if self.roc_pmax_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("roc_pmax_dbm", "must be finite"));
        }
        if self.roc_pfa.is_empty() || self.roc_pfa.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::config("roc_pfa", "probabilities must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn j(&self) -> usize {
        self.ap_positions_m
            .as_ref()
            .map_or(self.illuminators, |p| p.len())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.m_v, self.m_h)
    }

    pub fn layout(&self) -> Result<Layout> {
        let geom = self.geometry()?;
        match &self.ap_positions_m {
            None => {
                let mut layout = hex_layout(self.r_m, self.illuminators, self.ap_height_m, geom)?;
                if let Some(rx) = self.receiver_position_m {
                    layout.receiver.position = Point3::from(rx);
                }
                Ok(layout)
            }
            Some(ps) => {
                let rx = self
                    .receiver_position_m
                    .map_or(Point3::new(0.0, 0.0, self.ap_height_m), Point3::from);
                let pts: Vec<Point3> = ps.iter().map(|p| Point3::from(*p)).collect();
                Layout::from_positions(geom, rx, &pts)
            }
        }
    }

    /// Horizontal volume center.
    pub fn volume_center(&self) -> [f64; 2] {
        self.volume_center_m
            .unwrap_or([-self.r_m, -self.r_m / 3f64.sqrt()])
    }

    /// Scene with the volume at altitude `z`.
    pub fn scene_at(&self, z: f64) -> Result<Scene> {
        let geom = self.geometry()?;
        let [x, y] = self.volume_center();
        let grid = voxel_grid(Point3::new(x, y, z), self.volume_m, self.d_m)?;
        let book = build_codebook_with(&geom, self.exclude_endfire)?;
        Scene::new(self.layout()?, grid, book)
    }

    pub fn sigma_rcs2(&self) -> f64 {
        db_to_lin(self.sigma_rcs_dbsm)
    }

    pub fn rcs_model(&self, kind: RcsKind) -> Result<RcsModel> {
        match kind {
            RcsKind::Sw2 => Ok(RcsModel::Swerling2 {
                variance: self.sigma_rcs2(),
            }),
            RcsKind::Weibull => match self.weibull_scale {
                Some(scale) => Ok(RcsModel::Weibull {
                    shape: self.weibull_shape,
                    scale,
                }),
                None => RcsModel::weibull_matched(self.weibull_shape, self.sigma_rcs2()),
            },
        }
    }

    pub fn coupling(&self) -> RcsCoupling {
        match self.rcs_coupling {
            Coupling::Common => RcsCoupling::Common,
            Coupling::Independent => RcsCoupling::Independent,
        }
    }

    pub fn stochastic(&self) -> StochasticParams {
        StochasticParams {
            clutter_var: db_to_lin(self.beta_g_db),
            noise_var: dbm_to_mw(self.noise_dbm),
        }
    }

    pub fn ue(&self, gamma_req_db: f64) -> UeScenario {
        let mut ue =
            UeScenario::hex_cell_edge(self.r_m, db_to_lin(gamma_req_db), dbm_to_mw(self.noise_dbm));
        if let Some(d) = self.ue_serving_distance_m {
            ue.serving_distance = d;
        }
        if let Some(ds) = &self.ue_interferer_distances_m {
            ue.interferer_distances = ds.clone();
        }
        ue
    }

    /// Power sweep grid in dBm, inclusive of both ends.
    pub fn sweep_points(&self) -> Vec<f64> {
        let n = ((self.sweep_stop_dbm - self.sweep_start_dbm) / self.sweep_step_db + 1e-9).floor()
            as usize;
        (0..=n)
            .map(|k| self.sweep_start_dbm + k as f64 * self.sweep_step_db)
            .collect()
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::parse(&text)
}
