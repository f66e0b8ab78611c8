//! Per-voxel Neyman-Pearson detector.
//!
//! Under `𝓗₀` the combined observation is `y ~ CN(0, σ² I)`; under `𝓗₁`
//! it is `y ~ CN(0, σ² I + σ²_rcs Φ)`. Every bistatic echo arrives along
//! the same receive steering vector, so `Φ = φ u u^H` with `u = h_{q,rx}/√M`
//! and the optimal statistic is a scaled `|u^H y|²`.

use rayon::prelude::*;

use crate::channel::ChannelSet;
use crate::linalg::{c, hermitian_cholesky, hermitian_eigen};
use crate::metrics::{combining_vector, interference_power};
use crate::precoder::PrecoderSolution;
use crate::rng::{complex_normal, trial_blocks, StreamSeed};
use crate::{CMatrix, CVector, Error, Result};

/// `λ₂/λ₁` below which `Φ` is treated as rank one.
const RANK1_TOL: f64 = 1e-8;

/// `Φ_q = Σ_j H_{j,q} w_j w_j^H H_{j,q}^H`.
pub fn sensing_covariance(solution: &PrecoderSolution, channels: &ChannelSet) -> CMatrix {
    let q = solution.voxel;
    let m = channels.m();
    let mut phi = CMatrix::zeros(m, m);
    for (h, w) in channels.sensing[q].iter().zip(&solution.w) {
        let e = h.apply(w);
        phi.gerc(c(1.0), &e, &e, c(1.0));
    }
    phi
}

/// Second-order model of both hypotheses for one voxel.
#[derive(Debug, Clone)]
pub struct HypothesisModel {
    /// Clutter plus noise variance `σ² = σ²_n + β_g Σ ρ_j`, mW.
    pub sigma2: f64,
    pub sigma_rcs2: f64,
    /// `Tr Φ`.
    pub phi: f64,
    /// Unit direction of `Φ` (`None` when `Φ = 0`).
    pub direction: Option<CVector>,
    /// Whether `Φ` is rank one (always true for models built from a
    /// solution).
    pub rank_one: bool,
    /// Dense `Φ`, kept for small arrays and general covariances.
    pub dense: Option<CMatrix>,
}

impl HypothesisModel {
    /// Rank-one model built from a precoder solution without forming `Φ`.
    pub fn from_solution(solution: &PrecoderSolution, channels: &ChannelSet) -> Self {
        let q = solution.voxel;
        let m = channels.m() as f64;
        // H_j w_j = h_rx · (scale_j h_tx^T w_j), ‖h_rx‖² = M.
        let phi: f64 = channels.sensing[q]
            .iter()
            .zip(&solution.w)
            .map(|(h, w)| h.gain * h.h_tx.dot(w).norm_sqr() * m)
            .sum();
        Self {
            sigma2: interference_power(channels, &solution.rho),
            sigma_rcs2: channels.sigma_rcs2(),
            phi,
            direction: (phi > 0.0).then(|| combining_vector(channels, q)),
            rank_one: true,
            dense: None,
        }
    }

    /// Model from an explicit covariance shape `Φ`.
    pub fn from_covariance(phi: CMatrix, sigma2: f64, sigma_rcs2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !(sigma_rcs2 >= 0.0) || phi.nrows() != phi.ncols() {
            return Err(Error::Contract("invalid hypothesis model".into()));
        }
        let (vals, vecs) = hermitian_eigen(&phi);
        let top = vals[0].max(0.0);
        if vals
            .iter()
            .any(|v| *v < -1e-10 * top.max(f64::MIN_POSITIVE))
        {
            return Err(Error::Contract("Φ must be positive semidefinite".into()));
        }
        let second = vals.get(1).copied().unwrap_or(0.0).max(0.0);
        Ok(Self {
            sigma2,
            sigma_rcs2,
            phi: vals.iter().map(|v| v.max(0.0)).sum(),
            direction: (top > 0.0).then(|| vecs.column(0).into_owned()),
            rank_one: top == 0.0 || second <= RANK1_TOL * top,
            dense: Some(phi),
        })
    }

    /// Effective SNR `ρ̄ = σ²_rcs φ / σ²`.
    pub fn effective_snr(&self) -> f64 {
        self.sigma_rcs2 * self.phi / self.sigma2
    }

    /// Weight `k` of the rank-one statistic `T = k |u^H y|²`.
    fn weight(&self) -> f64 {
        let s = self.sigma_rcs2 * self.phi;
        s / (self.sigma2 * (self.sigma2 + s))
    }

    /// `C = σ² I + σ²_rcs Φ`.
    pub fn covariance(&self, m: usize) -> CMatrix {
        let mut cov = CMatrix::identity(m, m) * c(self.sigma2);
        if let Some(d) = &self.dense {
            cov += d * c(self.sigma_rcs2);
        } else if let Some(u) = &self.direction {
            cov.gerc(c(self.sigma_rcs2 * self.phi), u, u, c(1.0));
        }
        cov
    }
}

/// `T(y) = y^H(σ^{-2} I − C^{-1}) y`.
///
/// For rank-one models this uses `C^{-1} = σ^{-2}(I − s/(σ²+s) u u^H)` with
/// `s = σ²_rcs φ`; otherwise it falls back to the dense evaluation.
pub fn test_statistic(y: &CVector, model: &HypothesisModel) -> Result<f64> {
    if !model.rank_one {
        return test_statistic_dense(y, model);
    }
    Ok(match &model.direction {
        Some(u) => model.weight() * u.dotc(y).norm_sqr(),
        None => 0.0,
    })
}

/// Dense evaluation of `T(y)` through a Cholesky solve with `C`.
pub fn test_statistic_dense(y: &CVector, model: &HypothesisModel) -> Result<f64> {
    let cov = model.covariance(y.len());
    let chol = hermitian_cholesky(&cov)
        .ok_or_else(|| Error::Solver("covariance is not positive definite".into()))?;
    let cinv_y = chol.solve(y);
    Ok(y.norm_squared() / model.sigma2 - y.dotc(&cinv_y).re)
}

/// `ln(σ^{2M}/det C) + T(y)`.
pub fn llr(y: &CVector, model: &HypothesisModel) -> Result<f64> {
    let offset = if model.rank_one {
        -model.effective_snr().ln_1p()
    } else {
        let cov = model.covariance(y.len());
        let chol = hermitian_cholesky(&cov)
            .ok_or_else(|| Error::Solver("covariance is not positive definite".into()))?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum();
        y.len() as f64 * model.sigma2.ln() - log_det
    };
    Ok(offset + test_statistic(y, model)?)
}

/// Closed-form ROC of the rank-one detector: `P_d = P_fa^{1/(1+ρ̄)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticRoc {
    pub effective_snr: f64,
    /// `σ² k` where `T = k|u^H y|²`; thresholds scale with it.
    threshold_scale: f64,
}

impl AnalyticRoc {
    pub fn pd(&self, pfa: f64) -> f64 {
        pfa.powf(1.0 / (1.0 + self.effective_snr))
    }

    /// Threshold on `T` achieving `pfa`: `γ = −σ² k ln P_fa`.
    pub fn threshold(&self, pfa: f64) -> f64 {
        -self.threshold_scale * pfa.ln()
    }

    /// Effective SNR needed for `pd` at `pfa`.
    pub fn implied_snr(pfa: f64, pd: f64) -> f64 {
        pfa.ln() / pd.ln() - 1.0
    }
}

pub fn roc_analytic(model: &HypothesisModel) -> Result<AnalyticRoc> {
    if !model.rank_one {
        return Err(Error::NotApplicable(
            "closed-form ROC needs a rank-one sensing covariance".into(),
        ));
    }
    Ok(AnalyticRoc {
        effective_snr: model.effective_snr(),
        threshold_scale: model.sigma2 * model.weight(),
    })
}

/// Thresholds on `T` for the requested false-alarm probabilities.
pub fn thresholds_for_pfa(model: &HypothesisModel, pfas: &[f64]) -> Result<Vec<f64>> {
    let roc = roc_analytic(model)?;
    Ok(pfas.iter().map(|p| roc.threshold(*p)).collect())
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One operating point of a Monte Carlo ROC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Target false-alarm probability that set the threshold.
    pub target_pfa: f64,
    pub threshold: f64,
    pub pfa: f64,
    pub pd: f64,
    /// 95 % Wilson intervals.
    pub pfa_ci: (f64, f64),
    pub pd_ci: (f64, f64),
}

const ROC_STREAM: u64 = 0x40c0;
const Z_95: f64 = 1.959_963_984_540_054;

/// Monte Carlo ROC: draws `y` under both hypotheses as full M-vectors
/// (`x_s ~ CN(0, σ²_rcs Φ)`, clutter plus noise `CN(0, σ² I)`) and counts
/// how often `T` exceeds the thresholds set by `pfas`.
/// The direct link is not part of the detection model.
pub fn roc_mc(
    model: &HypothesisModel,
    m: usize,
    trials: usize,
    pfas: &[f64],
    seed: StreamSeed,
) -> Result<Vec<RocPoint>> {
    let thresholds = thresholds_for_pfa(model, pfas)?;
    let sig = model.sigma_rcs2 * model.phi;
    let stream = seed.derive(&[ROC_STREAM]);
    let blocks: Vec<(u64, usize)> = trial_blocks(trials).collect();
    let counts: Vec<(Vec<u64>, Vec<u64>)> = blocks
        .par_iter()
        .map(|&(b, len)| {
            let mut rng = stream.child(b).rng();
            let mut fa = vec![0u64; thresholds.len()];
            let mut det = vec![0u64; thresholds.len()];
            for _ in 0..len {
                for present in [false, true] {
                    let mut y = CVector::from_fn(m, |_, _| complex_normal(&mut rng, model.sigma2));
                    if present {
                        if let Some(u) = &model.direction {
                            y.axpy(complex_normal(&mut rng, sig), u, c(1.0));
                        }
                    }
                    let t = test_statistic(&y, model).unwrap_or(0.0);
                    let hits = if present { &mut det } else { &mut fa };
                    for (k, th) in thresholds.iter().enumerate() {
                        if t > *th {
                            hits[k] += 1;
                        }
                    }
                }
            }
            (fa, det)
        })
        .collect();
    let n = trials as u64;
    Ok(pfas
        .iter()
        .zip(&thresholds)
        .enumerate()
        .map(|(k, (&target, &threshold))| {
            let fa: u64 = counts.iter().map(|c| c.0[k]).sum();
            let det: u64 = counts.iter().map(|c| c.1[k]).sum();
            RocPoint {
                target_pfa: target,
                threshold,
                pfa: fa as f64 / n as f64,
                pd: det as f64 / n as f64,
                pfa_ci: wilson_interval(fa, n, Z_95),
                pd_ci: wilson_interval(det, n, Z_95),
            }
        })
        .collect())
}
