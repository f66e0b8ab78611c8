//! Sensing and user SINR, analytic and Monte Carlo.
//!
//! Monte Carlo receivers work in the combined domain: with unit-norm `v`
//! and `f`, the clutter term `v^H G_j f^*` is a scalar `CN(0, β_g)` draw and
//! the noise term `v^H n` is `CN(0, σ²_n)`, so no M-vectors are formed.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{draw_rcs_coupled, ChannelSet, RcsModel};
use crate::linalg::bilinear;
use crate::precoder::{PrecoderSolution, UeScenario};
use crate::rng::{complex_normal, trial_blocks, unit_symbol, StreamSeed};
use crate::scene::Scene;
use crate::units::lin_to_db;
use crate::{CVector, Error, Result};

/// `v_q = h_{q,rx}/√M`.
pub fn combining_vector(channels: &ChannelSet, q: usize) -> CVector {
    let h = &channels.sensing[q][0].h_rx;
    h.unscale((h.len() as f64).sqrt())
}

/// Per-AP echo amplitudes `g_j = v^H H_{j,q} w_j`.
pub fn echo_gains(channels: &ChannelSet, v: &CVector, q: usize, w: &[CVector]) -> Vec<Complex64> {
    channels.sensing[q]
        .iter()
        .zip(w)
        .map(|(h, wj)| h.combined(v, wj))
        .collect()
}

/// `ξ(ρ) = β_g Σ ρ_j + σ²_n`.
pub fn interference_power(channels: &ChannelSet, rho: &[f64]) -> f64 {
    channels.params.clutter_var * rho.iter().sum::<f64>() + channels.params.noise_var
}

/// Sensing SINR without the direct link for explicit precoders.
pub fn sensing_sinr_from_gain(
    channels: &ChannelSet,
    v: &CVector,
    q: usize,
    w: &[CVector],
    rho: &[f64],
) -> f64 {
    let g: Complex64 = echo_gains(channels, v, q, w).into_iter().sum();
    channels.sigma_rcs2() * g.norm_sqr() / interference_power(channels, rho)
}

/// `γ'_sen = σ²_rcs |v^H H_q w_q|² / (β_g Σ ρ + σ²_n)`.
pub fn sensing_sinr_analytic(solution: &PrecoderSolution, channels: &ChannelSet) -> f64 {
    let q = solution.voxel;
    let v = combining_vector(channels, q);
    sensing_sinr_from_gain(channels, &v, q, &solution.w, &solution.rho)
}

/// Ratio-of-means Monte Carlo estimate with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_error: f64,
    pub numerator_mean: f64,
    pub denominator_mean: f64,
    pub trials: usize,
}

impl MonteCarloEstimate {
    pub fn db(&self) -> f64 {
        lin_to_db(self.value)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    d: f64,
    nn: f64,
    dd: f64,
    nd: f64,
}

impl Moments {
    fn push(&mut self, n: f64, d: f64) {
        self.n += n;
        self.d += d;
        self.nn += n * n;
        self.dd += d * d;
        self.nd += n * d;
    }

    fn add(mut self, o: &Moments) -> Moments {
        self.n += o.n;
        self.d += o.d;
        self.nn += o.nn;
        self.dd += o.dd;
        self.nd += o.nd;
        self
    }
}

/// Stream tag for the sensing-SINR Monte Carlo.
const SINR_STREAM: u64 = 0x5e45;
/// Stream tag for CDF samples.
const CDF_STREAM: u64 = 0xcdf0;

/// Monte Carlo estimate of the average sensing SINR, optionally with the
/// direct link in the denominator.
///
/// Each trial draws the symbols, the RCS, the combined clutter and the
/// combined noise; the estimate is `mean(|signal|²) / mean(|interference|²)`.
/// Trials run in fixed blocks with per-block streams, so the result does not
/// depend on the number of worker threads.
pub fn sensing_sinr_mc(
    solution: &PrecoderSolution,
    scene: &Scene,
    channels: &ChannelSet,
    include_direct: bool,
    trials: usize,
    seed: StreamSeed,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(Error::Contract(
            "Monte Carlo needs at least one trial".into(),
        ));
    }
    let q = solution.voxel;
    let v = combining_vector(channels, q);
    let j = channels.j();
    let gains = echo_gains(channels, &v, q, &solution.w);
    let f_conj = scene.ssb_column(q).conjugate();
    // Direct link through the combiner: d' = Σ_j κ_j (h_d^T (s w_j + √ρ_j c_j f*)).
    let (dl_sense, dl_ssb): (Vec<Complex64>, Vec<Complex64>) = if include_direct {
        channels
            .direct
            .iter()
            .zip(&solution.w)
            .zip(&solution.rho)
            .map(|((d, w), r)| {
                let k = d.scale() * v.dotc(&d.h_arr);
                (
                    k * bilinear(&d.h_dep, w),
                    k * r.sqrt() * bilinear(&d.h_dep, &f_conj),
                )
            })
            .unzip()
    } else {
        (vec![Complex64::default(); j], vec![Complex64::default(); j])
    };
    let sqrt_rho: Vec<f64> = solution.rho.iter().map(|r| r.sqrt()).collect();
    let beta_g = channels.params.clutter_var;
    let noise = channels.params.noise_var;
    let stream = seed.derive(&[SINR_STREAM, q as u64, include_direct as u64]);

    let blocks: Vec<(u64, usize)> = trial_blocks(trials).collect();
    let parts: Vec<Moments> = blocks
        .par_iter()
        .map(|&(b, len)| {
            let mut rng = stream.child(b).rng();
            let mut m = Moments::default();
            let mut c = vec![Complex64::default(); j];
            for _ in 0..len {
                let s = unit_symbol(&mut rng);
                for cj in c.iter_mut() {
                    *cj = unit_symbol(&mut rng);
                }
                let alpha = draw_rcs_coupled(&channels.rcs, j, channels.coupling, &mut rng);
                let echo: Complex64 = s * gains
                    .iter()
                    .zip(&alpha)
                    .map(|(g, a)| g * a)
                    .sum::<Complex64>();
                let mut interf = complex_normal(&mut rng, noise);
                for k in 0..j {
                    interf += c[k] * sqrt_rho[k] * complex_normal(&mut rng, beta_g);
                    interf += s * dl_sense[k] + c[k] * dl_ssb[k];
                }
                m.push(echo.norm_sqr(), interf.norm_sqr());
            }
            m
        })
        .collect();
    let total = parts.iter().fold(Moments::default(), |acc, p| acc.add(p));
    let n = trials as f64;
    let (nm, dm) = (total.n / n, total.d / n);
    if dm <= 0.0 {
        return Err(Error::Contract("interference power is zero".into()));
    }
    let r = nm / dm;
    let var_n = (total.nn / n - nm * nm).max(0.0);
    let var_d = (total.dd / n - dm * dm).max(0.0);
    let cov = total.nd / n - nm * dm;
    let var_r = ((var_n - 2.0 * r * cov + r * r * var_d) / (dm * dm)).max(0.0) / n;
    Ok(MonteCarloEstimate {
        value: r,
        std_error: var_r.sqrt(),
        numerator_mean: nm,
        denominator_mean: dm,
        trials,
    })
}

/// User SINR with the sensing leakage neglected:
/// `γ_ue = ρ β_s / (ρ Σ_{i∈𝒰} β_i + σ²_n)`.
pub fn user_sinr(ue: &UeScenario, rho: f64) -> Result<f64> {
    user_sinr_with_leakage(ue, rho, 0.0)
}

/// User SINR including the sensing power `Σ_k β_{k,ue}‖w_k‖²` at the user.
///
/// AP_1 is taken as the serving AP; the remaining APs use the gains of
/// [`UeScenario::illuminator_gains`].
pub fn user_sinr_full(ue: &UeScenario, rho: f64, solution: &PrecoderSolution) -> Result<f64> {
    user_sinr_with_leakage(ue, rho, sensing_leakage(ue, solution))
}

/// `Σ_k β_{k,ue}‖w_k‖²`.
pub fn sensing_leakage(ue: &UeScenario, solution: &PrecoderSolution) -> f64 {
    ue.illuminator_gains(solution.j())
        .iter()
        .zip(&solution.w)
        .map(|(b, w)| b * w.norm_squared())
        .sum()
}

fn user_sinr_with_leakage(ue: &UeScenario, rho: f64, leakage: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Contract("SSB power must be non-negative".into()));
    }
    let denom = rho * ue.interference_gain() + leakage + ue.noise_var;
    if denom <= 0.0 {
        return Err(Error::NotApplicable(
            "user SINR is unbounded without interference or noise".into(),
        ));
    }
    Ok(rho * ue.serving_gain() / denom)
}

/// How per-voxel SINRs are averaged over the volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageDomain {
    #[default]
    Linear,
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeAverage {
    /// Average, linear scale.
    pub value: f64,
    pub used: usize,
    /// Voxels excluded because no precoder exists for them.
    pub skipped: usize,
}

/// Averages per-voxel values; `None` entries mark degenerate voxels.
pub fn volume_average(values: &[Option<f64>], domain: AverageDomain) -> Result<VolumeAverage> {
    let valid: Vec<f64> = values.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::DegenerateSolution(
            "every voxel is degenerate".into(),
        ));
    }
    let n = valid.len() as f64;
    let value = match domain {
        AverageDomain::Linear => valid.iter().sum::<f64>() / n,
        AverageDomain::Db => {
            crate::units::db_to_lin(valid.iter().map(|x| lin_to_db(*x)).sum::<f64>() / n)
        }
    };
    Ok(VolumeAverage {
        value,
        used: valid.len(),
        skipped: values.len() - valid.len(),
    })
}

/// Per-realisation SINR `|Σ_j α_j g_j|² / ξ(ρ)` over RCS draws only, with
/// clutter and noise at their expected power.
pub fn sinr_cdf_samples(
    solution: &PrecoderSolution,
    channels: &ChannelSet,
    rcs: &RcsModel,
    trials: usize,
    seed: StreamSeed,
) -> Vec<f64> {
    let q = solution.voxel;
    let v = combining_vector(channels, q);
    let gains = echo_gains(channels, &v, q, &solution.w);
    let xi = interference_power(channels, &solution.rho);
    let j = gains.len();
    let stream = seed.derive(&[CDF_STREAM, q as u64]);
    let blocks: Vec<(u64, usize)> = trial_blocks(trials).collect();
    blocks
        .par_iter()
        .flat_map_iter(|&(b, len)| {
            let mut rng = stream.child(b).rng();
            (0..len)
                .map(|_| {
                    let alpha = draw_rcs_coupled(rcs, j, channels.coupling, &mut rng);
                    let y: Complex64 = gains.iter().zip(&alpha).map(|(g, a)| g * a).sum();
                    y.norm_sqr() / xi
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Sensing and user SINR summary for a set of voxels.
#[derive(Debug, Clone)]
pub struct SinrReport {
    /// Per-voxel `γ'_sen` (no direct link), `None` for degenerate voxels.
    pub analytic: Vec<Option<f64>>,
    /// Per-voxel Monte Carlo `γ_sen` with the direct link.
    pub monte_carlo: Vec<Option<MonteCarloEstimate>>,
    pub analytic_average: VolumeAverage,
    pub monte_carlo_average: VolumeAverage,
    /// Standard error of the Monte Carlo volume average.
    pub monte_carlo_std_error: f64,
    /// `γ_ue` with the sensing leakage neglected.
    pub user: f64,
    /// `γ_ue` including the sensing leakage of the first valid voxel.
    pub user_with_leakage: Option<f64>,
}

impl SinrReport {
    /// Builds a report from per-voxel solutions (`None` = degenerate voxel).
    pub fn build(
        solutions: &[Option<PrecoderSolution>],
        scene: &Scene,
        channels: &ChannelSet,
        ue: &UeScenario,
        rho: f64,
        trials: usize,
        seed: StreamSeed,
        domain: AverageDomain,
    ) -> Result<Self> {
        let analytic: Vec<Option<f64>> = solutions
            .iter()
            .map(|s| s.as_ref().map(|s| sensing_sinr_analytic(s, channels)))
            .collect();
        let monte_carlo = solutions
            .iter()
            .map(|s| {
                s.as_ref()
                    .map(|s| sensing_sinr_mc(s, scene, channels, true, trials, seed))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let mc_values: Vec<Option<f64>> = monte_carlo.iter().map(|e| e.map(|e| e.value)).collect();
        let monte_carlo_average = volume_average(&mc_values, domain)?;
        let used = monte_carlo_average.used as f64;
        let monte_carlo_std_error = monte_carlo
            .iter()
            .flatten()
            .map(|e| e.std_error.powi(2))
            .sum::<f64>()
            .sqrt()
            / used;
        let first = solutions.iter().flatten().next();
        Ok(Self {
            analytic_average: volume_average(&analytic, domain)?,
            analytic,
            monte_carlo,
            monte_carlo_average,
            monte_carlo_std_error,
            user: user_sinr(ue, rho)?,
            user_with_leakage: first.map(|s| user_sinr_full(ue, rho, s)).transpose()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{db_to_lin, dbm_to_mw};

    fn ue(gamma_db: f64) -> UeScenario {
        UeScenario::hex_cell_edge(250.0, db_to_lin(gamma_db), dbm_to_mw(-60.0))
    }

    #[test]
    fn user_sinr_inverts_power_allocation() {
        let u = ue(3.0);
        let rho = crate::precoder::onset_power(&u).unwrap();
        let g = user_sinr(&u, rho).unwrap();
        assert!((g - u.gamma_req).abs() < 1e-9 * u.gamma_req);
    }

    #[test]
    fn user_sinr_ceiling_and_guard() {
        let u = ue(2.0);
        let rho = crate::precoder::onset_power(&u).unwrap() * 1e6;
        let g = user_sinr(&u, rho).unwrap();
        let ceiling = u.serving_gain() / u.interference_gain();
        assert!((g - ceiling).abs() < 1e-5 * ceiling);
        let lone = UeScenario {
            interferer_distances: vec![],
            noise_var: 0.0,
            ..u
        };
        assert!(matches!(
            user_sinr(&lone, 1.0),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn averages() {
        let one = volume_average(&[Some(1.0), Some(3.0)], AverageDomain::Linear).unwrap();
        assert_eq!(one.value, 2.0);
        let same = volume_average(&[Some(5.0); 3], AverageDomain::Linear).unwrap();
        assert!((same.value - 5.0).abs() < 1e-15);
        let db = volume_average(&[Some(1.0), Some(100.0)], AverageDomain::Db).unwrap();
        assert!((db.value - 10.0).abs() < 1e-12);
        let skip = volume_average(&[None, Some(4.0)], AverageDomain::Linear).unwrap();
        assert_eq!((skip.used, skip.skipped, skip.value), (1, 1, 4.0));
        assert!(volume_average(&[None, None], AverageDomain::Linear).is_err());
    }
}
