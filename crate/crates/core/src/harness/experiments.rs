//! Experiment drivers: power and altitude sweeps, SINR CDFs, ROC curves and
//! single-voxel solves.

use rayon::prelude::*;

use super::config::{RcsKind, ScenarioConfig};
use super::records::{CurveMeta, CurveRecord};
use crate::channel::ChannelSet;
use crate::detector::{roc_analytic, roc_mc, HypothesisModel};
use crate::error::InfeasibleKind;
use crate::metrics::{sensing_leakage, sinr_cdf_samples, SinrReport};
use crate::precoder::{
    coordinated_precoder, noncoordinated_precoder, solve_power_allocation, MaskMode, Method,
    PrecoderSolution,
};
use crate::rng::StreamSeed;
use crate::scene::Scene;
use crate::units::{dbm_to_mw, mw_to_dbm};
use crate::{Error, Result};

/// Records of one experiment plus how many sweep points were feasible.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub records: Vec<CurveRecord>,
    pub feasible_points: usize,
    pub total_points: usize,
    /// Non-fatal per-point problems (solver errors, degenerate voxels).
    pub notes: Vec<String>,
}

impl ExperimentOutput {
    fn extend(&mut self, other: ExperimentOutput) {
        self.records.extend(other.records);
        self.feasible_points += other.feasible_points;
        self.total_points += other.total_points;
        self.notes.extend(other.notes);
    }

    /// True when points were evaluated and none was feasible.
    pub fn infeasible_only(&self) -> bool {
        self.total_points > 0 && self.feasible_points == 0
    }
}

/// Scene and channels of the configured layout at altitude `z`.
pub fn build_world(cfg: &ScenarioConfig, z: f64, rcs: RcsKind) -> Result<(Scene, ChannelSet)> {
    let scene = cfg.scene_at(z)?;
    let channels = ChannelSet::build(
        &scene,
        cfg.fc_hz,
        cfg.stochastic(),
        cfg.rcs_model(rcs)?,
        cfg.coupling(),
    )?;
    Ok((scene, channels))
}

/// Solves one precoder per voxel with a common SSB power; degenerate
/// voxels yield `None`.
pub fn solve_volume(
    scene: &Scene,
    channels: &ChannelSet,
    rho: f64,
    p_max: f64,
    method: Method,
    mode: MaskMode,
) -> Result<Vec<Option<PrecoderSolution>>> {
    let rhos = vec![rho; scene.j()];
    (0..scene.voxel_count())
        .map(|q| {
            let sol = match method {
                Method::ClosedForm | Method::Sdr => {
                    coordinated_precoder(scene, channels, q, &rhos, p_max, mode)
                }
                Method::NonCoordinated => {
                    noncoordinated_precoder(scene, channels, q, &rhos, p_max, mode).map(|s| s.0)
                }
            };
            match sol {
                Ok(s) => Ok(Some(s)),
                Err(Error::DegenerateVoxel { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn method_tag(m: Method) -> u64 {
    match m {
        Method::ClosedForm => 1,
        Method::Sdr => 2,
        Method::NonCoordinated => 3,
    }
}

fn mode_tag(m: MaskMode) -> u64 {
    match m {
        MaskMode::DlMasked => 1,
        MaskMode::NonDlMasked => 2,
    }
}

/// Evaluates one sweep point; infeasible points yield zero-valued records.
#[allow(clippy::too_many_arguments)]
fn sweep_point(
    cfg: &ScenarioConfig,
    scene: &Scene,
    channels: &ChannelSet,
    meta: &CurveMeta,
    gamma_db: f64,
    p_dbm: f64,
    method: Method,
    mode: MaskMode,
    seed: StreamSeed,
) -> ExperimentOutput {
    let mut out = ExperimentOutput {
        total_points: 1,
        ..Default::default()
    };
    let ue = cfg.ue(gamma_db);
    let p_max = dbm_to_mw(p_dbm);
    let zero = |out: &mut ExperimentOutput| {
        out.records.push(meta.record(p_dbm, "feasible", 0.0, None));
        out.records
            .push(meta.record(p_dbm, "gamma_sen_analytic", 0.0, None));
        out.records
            .push(meta.record(p_dbm, "gamma_sen_mc", 0.0, None));
    };
    let rho = match solve_power_allocation(&ue, p_max) {
        Ok(r) if r < p_max => r,
        Ok(_) | Err(Error::Infeasible(_)) => {
            zero(&mut out);
            return out;
        }
        Err(e) => {
            out.notes
                .push(format!("{} @ {p_dbm} dBm: {e}", meta.experiment));
            zero(&mut out);
            return out;
        }
    };
    let result = solve_volume(scene, channels, rho, p_max, method, mode).and_then(|sols| {
        let report = SinrReport::build(
            &sols,
            scene,
            channels,
            &ue,
            rho,
            cfg.trials,
            seed,
            cfg.average_domain,
        )?;
        Ok((sols, report))
    });
    match result {
        Ok((sols, report)) => {
            out.feasible_points = 1;
            out.records.push(meta.record(p_dbm, "feasible", 1.0, None));
            out.records.push(meta.record(
                p_dbm,
                "gamma_sen_analytic",
                report.analytic_average.value,
                None,
            ));
            out.records.push(meta.record(
                p_dbm,
                "gamma_sen_mc",
                report.monte_carlo_average.value,
                Some(report.monte_carlo_std_error),
            ));
            out.records.push(meta.record(p_dbm, "rho_mw", rho, None));
            out.records
                .push(meta.record(p_dbm, "user_sinr", report.user, None));
            if let Some(u) = report.user_with_leakage {
                out.records
                    .push(meta.record(p_dbm, "user_sinr_with_leakage", u, None));
            }
            if let Some(s) = sols.iter().flatten().next() {
                out.records.push(meta.record(
                    p_dbm,
                    "sensing_leakage_mw",
                    sensing_leakage(&ue, s),
                    None,
                ));
            }
            out.records.push(meta.record(
                p_dbm,
                "degenerate_voxels",
                report.analytic_average.skipped as f64,
                None,
            ));
            let idle: usize = sols.iter().flatten().map(|s| s.idle_aps.len()).sum();
            out.records
                .push(meta.record(p_dbm, "idle_ap_voxels", idle as f64, None));
        }
        Err(e) => {
            out.notes
                .push(format!("{} @ {p_dbm} dBm: {e}", meta.experiment));
            zero(&mut out);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn sweep_curve(
    cfg: &ScenarioConfig,
    scene: &Scene,
    channels: &ChannelSet,
    experiment: &str,
    z: f64,
    gamma_db: f64,
    method: Method,
    mode: MaskMode,
) -> ExperimentOutput {
    let meta = CurveMeta {
        experiment: experiment.to_string(),
        sweep_key: "p_max_dbm".into(),
        method: Some(method),
        mode: Some(mode),
        gamma_req_db: Some(gamma_db),
        seed: cfg.seed,
    };
    let parts: Vec<ExperimentOutput> = cfg
        .sweep_points()
        .par_iter()
        .map(|&p| {
            let seed = StreamSeed(cfg.seed).derive(&[
                z.to_bits(),
                gamma_db.to_bits(),
                p.to_bits(),
                method_tag(method),
                mode_tag(mode),
            ]);
            sweep_point(cfg, scene, channels, &meta, gamma_db, p, method, mode, seed)
        })
        .collect();
    let mut out = ExperimentOutput::default();
    for p in parts {
        out.extend(p);
    }
    out
}

/// Volume-averaged sensing SINR versus `P_max` for every requirement in
/// `gamma_sweep_db` and every requested method and mode.
pub fn run_power_sweep(
    cfg: &ScenarioConfig,
    methods: &[Method],
    modes: &[MaskMode],
) -> Result<ExperimentOutput> {
    let (scene, channels) = build_world(cfg, cfg.z_m, RcsKind::Sw2)?;
    let mut out = ExperimentOutput::default();
    for &gamma in &cfg.gamma_sweep_db {
        for &method in methods {
            for &mode in modes {
                out.extend(sweep_curve(
                    cfg,
                    &scene,
                    &channels,
                    "sweep-power",
                    cfg.z_m,
                    gamma,
                    method,
                    mode,
                ));
            }
        }
    }
    Ok(out)
}

/// Power sweeps at each altitude in `altitudes_m` for `gamma_req_db`.
pub fn run_altitude_sweep(
    cfg: &ScenarioConfig,
    methods: &[Method],
    modes: &[MaskMode],
) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    for &z in &cfg.altitudes_m {
        let (scene, channels) = build_world(cfg, z, RcsKind::Sw2)?;
        let experiment = format!("sweep-altitude/z_m={z}");
        for &method in methods {
            for &mode in modes {
                out.extend(sweep_curve(
                    cfg,
                    &scene,
                    &channels,
                    &experiment,
                    z,
                    cfg.gamma_req_db,
                    method,
                    mode,
                ));
            }
        }
    }
    Ok(out)
}

/// Solution for the configured single voxel at `p_dbm`.
pub fn single_voxel_solution(
    cfg: &ScenarioConfig,
    scene: &Scene,
    channels: &ChannelSet,
    p_dbm: f64,
    method: Method,
    mode: MaskMode,
) -> Result<PrecoderSolution> {
    if cfg.voxel >= scene.voxel_count() {
        return Err(Error::config(
            "voxel",
            format!(
                "index {} outside the {}-voxel grid",
                cfg.voxel,
                scene.voxel_count()
            ),
        ));
    }
    let p_max = dbm_to_mw(p_dbm);
    let rho = solve_power_allocation(&cfg.ue(cfg.gamma_req_db), p_max)?;
    if rho >= p_max {
        return Err(Error::Infeasible(InfeasibleKind::PowerLimited));
    }
    let rhos = vec![rho; scene.j()];
    match method {
        Method::NonCoordinated => {
            noncoordinated_precoder(scene, channels, cfg.voxel, &rhos, p_max, mode).map(|s| s.0)
        }
        _ => coordinated_precoder(scene, channels, cfg.voxel, &rhos, p_max, mode),
    }
}

/// Probabilities at which CDF curves are sampled.
const CDF_POINTS: usize = 200;

/// Empirical CDFs of the per-realisation SINR for Swerling-2 and
/// mean-matched Weibull RCS.
pub fn run_cdf(cfg: &ScenarioConfig, method: Method, mode: MaskMode) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput {
        total_points: 1,
        feasible_points: 1,
        ..Default::default()
    };
    let (scene, channels) = build_world(cfg, cfg.z_m, RcsKind::Sw2)?;
    let sol = single_voxel_solution(cfg, &scene, &channels, cfg.p_max_dbm, method, mode)?;
    for (kind, name) in [(RcsKind::Sw2, "sw2"), (RcsKind::Weibull, "weibull")] {
        let model = cfg.rcs_model(kind)?;
        let seed = StreamSeed(cfg.seed).derive(&[0xcd, cfg.voxel as u64]);
        let mut samples = sinr_cdf_samples(&sol, &channels, &model, cfg.trials, seed);
        samples.sort_by(f64::total_cmp);
        let meta = CurveMeta {
            experiment: "cdf".into(),
            sweep_key: "gamma_inst".into(),
            method: Some(method),
            mode: Some(mode),
            gamma_req_db: Some(cfg.gamma_req_db),
            seed: cfg.seed,
        };
        let n = samples.len();
        let step = (n / CDF_POINTS).max(1);
        let mut idx: Vec<usize> = (step - 1..n).step_by(step).collect();
        if idx.last() != Some(&(n - 1)) {
            idx.push(n - 1);
        }
        for i in idx {
            out.records.push(meta.record(
                samples[i],
                &format!("cdf_{name}"),
                (i + 1) as f64 / n as f64,
                None,
            ));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        let quantile = |p: f64| samples[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        let summary = CurveMeta {
            sweep_key: "p_max_dbm".into(),
            ..meta
        };
        let p = cfg.p_max_dbm;
        out.records.push(summary.record(
            p,
            &format!("mean_{name}"),
            mean,
            Some((var / n as f64).sqrt()),
        ));
        out.records
            .push(summary.record(p, &format!("median_{name}"), quantile(0.5), None));
        out.records.push(summary.record(
            p,
            &format!("iqr_{name}"),
            quantile(0.75) - quantile(0.25),
            None,
        ));
    }
    let analytic = crate::metrics::sensing_sinr_analytic(&sol, &channels);
    out.records.push(
        CurveMeta {
            experiment: "cdf".into(),
            sweep_key: "p_max_dbm".into(),
            method: Some(method),
            mode: Some(mode),
            gamma_req_db: Some(cfg.gamma_req_db),
            seed: cfg.seed,
        }
        .record(cfg.p_max_dbm, "gamma_sen_analytic", analytic, None),
    );
    Ok(out)
}

/// False-alarm probability of the published operating point, reported through
/// the analytic ROC only.
pub const PFA_ANCHOR: f64 = 2e-5;

/// Monte Carlo and analytic ROC curves for each `P_max` in `roc_pmax_dbm`.
pub fn run_roc(cfg: &ScenarioConfig, method: Method, mode: MaskMode) -> Result<ExperimentOutput> {
    let (scene, channels) = build_world(cfg, cfg.z_m, RcsKind::Sw2)?;
    let mut out = ExperimentOutput::default();
    for &p in &cfg.roc_pmax_dbm {
        out.total_points += 1;
        let meta = CurveMeta {
            experiment: format!("roc/p_max_dbm={p}"),
            sweep_key: "pfa".into(),
            method: Some(method),
            mode: Some(mode),
            gamma_req_db: Some(cfg.gamma_req_db),
            seed: cfg.seed,
        };
        let sol = match single_voxel_solution(cfg, &scene, &channels, p, method, mode) {
            Ok(s) => s,
            Err(Error::Infeasible(k)) => {
                out.notes.push(format!("P_max = {p} dBm infeasible ({k})"));
                continue;
            }
            Err(e) => return Err(e),
        };
        out.feasible_points += 1;
        let model = HypothesisModel::from_solution(&sol, &channels);
        let analytic = roc_analytic(&model)?;
        let seed = StreamSeed(cfg.seed).derive(&[0x0c, p.to_bits()]);
        let points = roc_mc(&model, scene.m(), cfg.roc_trials, &cfg.roc_pfa, seed)?;
        for pt in &points {
            let half = (pt.pd_ci.1 - pt.pd_ci.0) / 2.0;
            out.records.push(meta.record(
                pt.target_pfa,
                "pd_analytic",
                analytic.pd(pt.target_pfa),
                None,
            ));
            out.records
                .push(meta.record(pt.target_pfa, "pd_mc", pt.pd, Some(half)));
            out.records.push(meta.record(
                pt.target_pfa,
                "pfa_mc",
                pt.pfa,
                Some((pt.pfa_ci.1 - pt.pfa_ci.0) / 2.0),
            ));
        }
        out.records.push(meta.record(
            PFA_ANCHOR,
            "pd_analytic_anchor",
            analytic.pd(PFA_ANCHOR),
            None,
        ));
        out.records
            .push(meta.record(PFA_ANCHOR, "effective_snr", analytic.effective_snr, None));
    }
    Ok(out)
}

/// Human-readable summary of one voxel's solution.
pub fn solve_report(cfg: &ScenarioConfig, method: Method, mode: MaskMode) -> Result<String> {
    use std::fmt::Write;
    let (scene, channels) = build_world(cfg, cfg.z_m, cfg.rcs)?;
    let sol = single_voxel_solution(cfg, &scene, &channels, cfg.p_max_dbm, method, mode)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "voxel {} at P_max = {} dBm ({}, {:?})",
        sol.voxel,
        cfg.p_max_dbm,
        method.name(),
        mode
    );
    let _ = writeln!(s, "rho = {:.6} dBm per AP", mw_to_dbm(sol.rho[0]));
    let _ = writeln!(
        s,
        "gamma'_sen = {:.6} ({:.3} dB)",
        sol.objective,
        crate::units::lin_to_db(sol.objective)
    );
    for j in 0..sol.j() {
        let _ = writeln!(
            s,
            "AP {}: |w|^2 = {:.6e} mW, power slack = {:.3e}, |w^H f*| = {:.3e}, |w^H h0d*| = {:.3e}",
            j + 1,
            sol.w[j].norm_squared(),
            sol.residuals.power_slack[j],
            sol.residuals.ssb_leak[j],
            sol.residuals.direct_leak[j]
        );
    }
    for w in &sol.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    Ok(s)
}
