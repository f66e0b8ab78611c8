//! Configuration, experiment orchestration, CSV output and validation.

mod config;
mod experiments;
mod oracle;
mod records;

use std::path::Path;

pub use config::{load_config, Coupling, MaskChoice, PrecoderChoice, RcsKind, ScenarioConfig};
pub use experiments::{
    build_world, run_altitude_sweep, run_cdf, run_power_sweep, run_roc, single_voxel_solution,
    solve_report, solve_volume, ExperimentOutput, PFA_ANCHOR,
};
pub use oracle::{
    compare_with_sdr, random_instance, run_validate, CheckResult, OracleInstance, SdrComparison,
    ValidationReport, ONSET_ANCHORS_DBM,
};
pub use records::{write_csv, CurveMeta, CurveRecord};

use crate::Result;

/// Writes `<experiment>.csv` and a manifest with the resolved configuration.
pub fn write_outputs(
    out_dir: &Path,
    experiment: &str,
    cfg: &ScenarioConfig,
    output: &ExperimentOutput,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join(format!("{experiment}.csv")), &output.records)?;
    write_manifest(out_dir, experiment, cfg, &output.notes)
}

/// `<experiment>.manifest.toml`: code version, experiment, notes and the
/// fully resolved configuration.
pub fn write_manifest(
    out_dir: &Path,
    experiment: &str,
    cfg: &ScenarioConfig,
    notes: &[String],
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut text = format!(
        "# run manifest\n# code_version = \"{} {}\"\n# experiment = \"{}\"\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        experiment
    );
    for n in notes {
        text += &format!("# note: {n}\n");
    }
    text += &cfg.to_toml();
    std::fs::write(out_dir.join(format!("{experiment}.manifest.toml")), text)?;
    std::fs::write(out_dir.join("resolved_config.toml"), cfg.to_toml())?;
    Ok(())
}
