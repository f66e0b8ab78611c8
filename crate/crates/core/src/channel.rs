//! Bistatic sensing channels and AP-to-receiver direct links, plus the
//! random draws of the received-signal model.
//!
//! Channel matrices are rank one and kept in factored form
//! `gain · phase · u v^T`; [`BistaticChannel::matrix`] and
//! [`DirectChannel::matrix`] build the dense matrices on demand.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Weibull};
use statrs::function::gamma::gamma;

use crate::linalg::{bilinear, inner};
use crate::rng::{complex_normal, unit_symbol};
use crate::scene::{bistatic_angles, steering, ApNode, BistaticAngles, Scene};
use crate::{CMatrix, CVector, Error, Point3, Result, SPEED_OF_LIGHT};

/// Two-hop AP_j → voxel → receiver channel `√β e^{-j2πf_cτ} h_rx h_tx^T`.
#[derive(Debug, Clone)]
pub struct BistaticChannel {
    /// Steering vector toward the voxel from AP_j.
    pub h_tx: CVector,
    /// Steering vector from the voxel into the receiver.
    pub h_rx: CVector,
    /// `1 / (l_tx² l_rx²)`.
    pub gain: f64,
    /// Propagation delay in seconds.
    pub delay: f64,
    /// `e^{-j2πf_cτ}`.
    pub phase: Complex64,
    pub angles: BistaticAngles,
}

impl BistaticChannel {
    /// Complex scale `√β e^{-j2πf_cτ}`.
    pub fn scale(&self) -> Complex64 {
        self.phase * self.gain.sqrt()
    }

    pub fn matrix(&self) -> CMatrix {
        &self.h_rx * self.h_tx.transpose() * self.scale()
    }

    /// `H x` without forming the matrix.
    pub fn apply(&self, x: &CVector) -> CVector {
        &self.h_rx * (self.scale() * bilinear(&self.h_tx, x))
    }

    /// `v^H H x`.
    pub fn combined(&self, v: &CVector, x: &CVector) -> Complex64 {
        inner(v, &self.h_rx) * self.scale() * bilinear(&self.h_tx, x)
    }
}

pub fn sensing_channel(
    ap: &ApNode,
    voxel: &Point3,
    rx: &ApNode,
    fc: f64,
    scene_geom: &crate::scene::ArrayGeometry,
) -> Result<BistaticChannel> {
    let angles = bistatic_angles(&ap.position, voxel, &rx.position)?;
    let delay = (angles.l_tx + angles.l_rx) / SPEED_OF_LIGHT;
    Ok(BistaticChannel {
        h_tx: steering(angles.theta_tx, angles.phi_tx, scene_geom),
        h_rx: steering(angles.theta_rx, angles.phi_rx, scene_geom),
        gain: 1.0 / (angles.l_tx.powi(2) * angles.l_rx.powi(2)),
        delay,
        phase: delay_phase(fc, delay),
        angles,
    })
}

fn delay_phase(fc: f64, delay: f64) -> Complex64 {
    // Reduce the cycle count first; f_c τ is ~10^4 cycles.
    let cycles = (fc * delay).fract();
    Complex64::from_polar(1.0, -2.0 * PI * cycles)
}

/// Line-of-sight AP_j → receiver channel `√β₀ e^{-j2πf_cτ₀} h_a h_d^T`.
#[derive(Debug, Clone)]
pub struct DirectChannel {
    /// Arrival steering vector `a(θ_a, 0)`.
    pub h_arr: CVector,
    /// Departure steering vector `a(θ_d, 0)`.
    pub h_dep: CVector,
    pub gain: f64,
    pub delay: f64,
    pub phase: Complex64,
    pub theta_dep: f64,
    pub theta_arr: f64,
    pub distance: f64,
}

impl DirectChannel {
    pub fn scale(&self) -> Complex64 {
        self.phase * self.gain.sqrt()
    }

    pub fn matrix(&self) -> CMatrix {
        &self.h_arr * self.h_dep.transpose() * self.scale()
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        &self.h_arr * (self.scale() * bilinear(&self.h_dep, x))
    }

    pub fn combined(&self, v: &CVector, x: &CVector) -> Complex64 {
        inner(v, &self.h_arr) * self.scale() * bilinear(&self.h_dep, x)
    }
}

pub fn direct_channel(
    ap: &ApNode,
    rx: &ApNode,
    fc: f64,
    geom: &crate::scene::ArrayGeometry,
) -> Result<DirectChannel> {
    let d = rx.position - ap.position;
    let distance = d.norm();
    if distance == 0.0 {
        return Err(Error::Geometry(
            "illuminator coincides with the receiver".into(),
        ));
    }
    let theta_dep = d.y.atan2(d.x);
    let theta_arr = theta_dep + PI;
    let delay = distance / SPEED_OF_LIGHT;
    Ok(DirectChannel {
        h_arr: steering(theta_arr, 0.0, geom),
        h_dep: steering(theta_dep, 0.0, geom),
        gain: 1.0 / (distance * distance),
        delay,
        phase: delay_phase(fc, delay),
        theta_dep,
        theta_arr,
        distance,
    })
}

/// Target RCS fluctuation law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RcsModel {
    /// `α ~ CN(0, variance)`, m².
    Swerling2 { variance: f64 },
    /// `|α|² ~ Weibull(shape, scale)` with uniform phase.
    Weibull { shape: f64, scale: f64 },
}

impl RcsModel {
    /// Weibull law with shape `k` whose mean power equals `mean_power`.
    pub fn weibull_matched(shape: f64, mean_power: f64) -> Result<Self> {
        if !(shape > 0.0) || !(mean_power > 0.0) {
            return Err(Error::config(
                "weibull_shape",
                "shape and mean power must be positive",
            ));
        }
        Ok(RcsModel::Weibull {
            shape,
            scale: mean_power / gamma(1.0 + 1.0 / shape),
        })
    }

    /// `E|α|²`.
    pub fn mean_power(&self) -> f64 {
        match *self {
            RcsModel::Swerling2 { variance } => variance,
            RcsModel::Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RcsModel::Swerling2 { variance } if variance >= 0.0 => Ok(()),
            RcsModel::Swerling2 { .. } => Err(Error::config(
                "sigma_rcs_dbsm",
                "variance must be non-negative",
            )),
            RcsModel::Weibull { shape, scale } if shape > 0.0 && scale > 0.0 => Ok(()),
            RcsModel::Weibull { .. } => Err(Error::config(
                "weibull_shape",
                "shape and scale must be positive",
            )),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            RcsModel::Swerling2 { variance } => complex_normal(rng, variance),
            RcsModel::Weibull { shape, scale } => {
                let power: f64 = Weibull::new(scale, shape)
                    .expect("validated Weibull parameters")
                    .sample(rng);
                Complex64::from_polar(power.sqrt(), 2.0 * PI * rng.random::<f64>())
            }
        }
    }
}

/// I.i.d. RCS amplitudes, one per illuminator.
pub fn draw_rcs<R: Rng + ?Sized>(model: &RcsModel, j: usize, rng: &mut R) -> Vec<Complex64> {
    (0..j).map(|_| model.draw(rng)).collect()
}

/// How the target's scattering amplitude relates across illuminators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcsCoupling {
    /// One amplitude shared by every bistatic path. This is the model under
    /// which the coherent sensing SINR `σ²|v^H H w|²/ξ` is the exact mean.
    Common,
    /// Independent amplitude per illuminator.
    Independent,
}

pub fn draw_rcs_coupled<R: Rng + ?Sized>(
    model: &RcsModel,
    j: usize,
    coupling: RcsCoupling,
    rng: &mut R,
) -> Vec<Complex64> {
    match coupling {
        RcsCoupling::Independent => draw_rcs(model, j, rng),
        RcsCoupling::Common => vec![model.draw(rng); j],
    }
}

/// Second-order statistics of clutter and noise, linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticParams {
    /// Ground clutter variance `β_g`.
    pub clutter_var: f64,
    /// Receiver noise variance in mW.
    pub noise_var: f64,
}

/// Channels of every (voxel, illuminator) pair plus the direct links.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// `sensing[q][j]`.
    pub sensing: Vec<Vec<BistaticChannel>>,
    /// `direct[j]`.
    pub direct: Vec<DirectChannel>,
    pub params: StochasticParams,
    pub rcs: RcsModel,
    pub coupling: RcsCoupling,
    pub fc: f64,
}

impl ChannelSet {
    pub fn build(
        scene: &Scene,
        fc: f64,
        params: StochasticParams,
        rcs: RcsModel,
        coupling: RcsCoupling,
    ) -> Result<Self> {
        if !(params.clutter_var >= 0.0) || !(params.noise_var >= 0.0) {
            return Err(Error::config("noise_dbm", "variances must be non-negative"));
        }
        rcs.validate()?;
        let geom = scene.geometry();
        let rx = &scene.layout.receiver;
        let sensing = scene
            .grid
            .centers()
            .iter()
            .map(|p| {
                scene
                    .layout
                    .illuminators
                    .iter()
                    .map(|ap| sensing_channel(ap, p, rx, fc, geom))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let direct = scene
            .layout
            .illuminators
            .iter()
            .map(|ap| direct_channel(ap, rx, fc, geom))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sensing,
            direct,
            params,
            rcs,
            coupling,
            fc,
        })
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc
    }

    /// `σ²_rcs = E|α|²`.
    pub fn sigma_rcs2(&self) -> f64 {
        self.rcs.mean_power()
    }

    pub fn m(&self) -> usize {
        self.direct[0].h_dep.len()
    }

    pub fn j(&self) -> usize {
        self.direct.len()
    }
}

/// Per-AP transmit inputs for one symbol.
#[derive(Debug, Clone, Copy)]
pub struct TxInputs<'a> {
    /// Shared sensing symbol `s[q]`.
    pub s: Complex64,
    /// SSB symbols `c_j[q]`.
    pub c: &'a [Complex64],
    /// Sensing precoders `w_{j,q}`.
    pub w: &'a [CVector],
    /// SSB column `f_q`.
    pub f: &'a CVector,
    /// SSB powers `ρ_{j,q}` in mW.
    pub rho: &'a [f64],
    pub p_max: f64,
}

/// `x_j = s w_j + √ρ_j c_j f*`, checking the per-AP power budget.
pub fn assemble_tx(tx: &TxInputs<'_>) -> Result<Vec<CVector>> {
    let j = tx.w.len();
    if tx.c.len() != j || tx.rho.len() != j {
        return Err(Error::Contract("mismatched per-AP input lengths".into()));
    }
    let tol = 1e-9 * tx.p_max.max(1.0);
    let f_conj = tx.f.conjugate();
    tx.w.iter()
        .zip(tx.c)
        .zip(tx.rho)
        .enumerate()
        .map(|(idx, ((w, &cj), &rho))| {
            let used = w.norm_squared() + rho;
            if rho < 0.0 || used > tx.p_max + tol {
                return Err(Error::Contract(format!(
                    "AP {} uses {used} mW of a {} mW budget",
                    idx + 1,
                    tx.p_max
                )));
            }
            Ok(w * tx.s + &f_conj * (cj * rho.sqrt()))
        })
        .collect()
}

/// The four labeled parts of the received vector for one symbol.
#[derive(Debug, Clone)]
pub struct ReceivedSignal {
    pub echo: CVector,
    pub clutter: CVector,
    pub direct: CVector,
    pub noise: CVector,
}

impl ReceivedSignal {
    pub fn total(&self) -> CVector {
        &self.echo + &self.clutter + &self.direct + &self.noise
    }
}

/// Draws one received vector at the sensing receiver for symbol `q`.
///
/// The target echo carries only the sensing part of each transmit signal.
/// SSB energy reaches the receiver through ground clutter and through the
/// direct link, which carries the full transmit signal. Clutter `G_{j,q} f*` is drawn
/// directly as a `CN(0, β_g‖f‖² I)` vector, which has the same law as
/// drawing the full clutter matrix.
pub fn simulate_rx<R: Rng + ?Sized>(
    channels: &ChannelSet,
    q: usize,
    tx: &TxInputs<'_>,
    target_present: bool,
    include_direct: bool,
    rng: &mut R,
) -> Result<ReceivedSignal> {
    let x = assemble_tx(tx)?;
    let m = channels.m();
    let j = channels.j();
    let mut echo = CVector::zeros(m);
    if target_present {
        let alpha = draw_rcs_coupled(&channels.rcs, j, channels.coupling, rng);
        for ((h, w), a) in channels.sensing[q].iter().zip(tx.w).zip(alpha) {
            echo += h.apply(w) * (a * tx.s);
        }
    }
    let f_norm2 = tx.f.norm_squared();
    let mut clutter = CVector::zeros(m);
    for (&cj, &rho) in tx.c.iter().zip(tx.rho) {
        if rho == 0.0 || channels.params.clutter_var == 0.0 {
            continue;
        }
        let gf = CVector::from_fn(m, |_, _| {
            complex_normal(rng, channels.params.clutter_var * f_norm2)
        });
        clutter += gf * (cj * rho.sqrt());
    }
    let mut direct = CVector::zeros(m);
    if include_direct {
        for (h0, xj) in channels.direct.iter().zip(&x) {
            direct += h0.apply(xj);
        }
    }
    let noise = if channels.params.noise_var > 0.0 {
        CVector::from_fn(m, |_, _| complex_normal(rng, channels.params.noise_var))
    } else {
        CVector::zeros(m)
    };
    Ok(ReceivedSignal {
        echo,
        clutter,
        direct,
        noise,
    })
}

/// Unit-power uncorrelated symbols for one transmission.
pub fn draw_symbols<R: Rng + ?Sized>(j: usize, rng: &mut R) -> (Complex64, Vec<Complex64>) {
    let s = unit_symbol(rng);
    let cs = (0..j).map(|_| unit_symbol(rng)).collect();
    (s, cs)
}
