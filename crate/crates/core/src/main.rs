use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ssb_isac::harness::{
    load_config, run_altitude_sweep, run_cdf, run_power_sweep, run_roc, run_validate, solve_report,
    write_manifest, write_outputs, ExperimentOutput, RcsKind, ScenarioConfig,
};
use ssb_isac::precoder::{MaskMode, Method};
use ssb_isac::Error;

#[derive(Parser, Debug)]
#[command(
    name = "ssb-isac",
    version,
    about = "Coordinated SSB beam-sweeping drone surveillance simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML scenario file; missing keys take baseline defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV files and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo trials (ROC trials for `roc`).
    #[arg(long, global = true)]
    trials: Option<usize>,

    #[arg(long, global = true, value_enum)]
    precoder: Option<PrecoderArg>,

    #[arg(long = "dl-mask", global = true, value_enum)]
    dl_mask: Option<OnOff>,

    #[arg(long, global = true, value_enum)]
    rcs: Option<RcsArg>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Volume-averaged sensing SINR versus P_max.
    SweepPower,
    /// Power sweeps at each configured altitude.
    SweepAltitude,
    /// Per-realisation SINR CDFs for Swerling-2 and Weibull RCS.
    Cdf,
    /// Detection ROC curves.
    Roc,
    /// Solve one voxel and print the constraint residuals.
    Solve,
    /// Run the oracle cross-checks.
    Validate,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PrecoderArg {
    Proposed,
    Noncoord,
}

impl PrecoderArg {
    fn method(self) -> Method {
        match self {
            PrecoderArg::Proposed => Method::ClosedForm,
            PrecoderArg::Noncoord => Method::NonCoordinated,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn mode(self) -> MaskMode {
        MaskMode::from_flag(matches!(self, OnOff::On))
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum RcsArg {
    Sw2,
    Weibull,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse { .. } | Error::Io(_) => 1,
        Error::Infeasible(_) => 2,
        _ => 3,
    }
}

fn finish(output: &ExperimentOutput) -> ExitCode {
    for n in &output.notes {
        eprintln!("note: {n}");
    }
    if output.infeasible_only() {
        eprintln!("no feasible sweep point");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        match cli.command {
            Command::Roc => cfg.roc_trials = t,
            _ => cfg.trials = t,
        }
    }
    if let Some(r) = cli.rcs {
        cfg.rcs = match r {
            RcsArg::Sw2 => RcsKind::Sw2,
            RcsArg::Weibull => RcsKind::Weibull,
        };
    }
    cfg.validate()?;
    let flag_method = cli.precoder.map(PrecoderArg::method);
    let flag_mode = cli.dl_mask.map(OnOff::mode);
    let single_method = flag_method.unwrap_or(Method::ClosedForm);
    let single_mode = flag_mode.unwrap_or_else(|| cfg.dl_mask.modes()[0]);

    match cli.command {
        Command::SweepPower => {
            let methods = flag_method.map_or_else(|| cfg.precoder.methods(), |m| vec![m]);
            let modes = flag_mode.map_or_else(|| cfg.dl_mask.modes(), |m| vec![m]);
            let out = run_power_sweep(&cfg, &methods, &modes)?;
            write_outputs(&cli.out, "sweep-power", &cfg, &out)?;
            Ok(finish(&out))
        }
        Command::SweepAltitude => {
            let methods = flag_method.map_or_else(|| vec![Method::ClosedForm], |m| vec![m]);
            let modes = flag_mode.map_or_else(
                || vec![MaskMode::DlMasked, MaskMode::NonDlMasked],
                |m| vec![m],
            );
            let out = run_altitude_sweep(&cfg, &methods, &modes)?;
            write_outputs(&cli.out, "sweep-altitude", &cfg, &out)?;
            Ok(finish(&out))
        }
        Command::Cdf => {
            let out = run_cdf(&cfg, single_method, single_mode)?;
            write_outputs(&cli.out, "cdf", &cfg, &out)?;
            Ok(finish(&out))
        }
        Command::Roc => {
            let out = run_roc(&cfg, single_method, single_mode)?;
            write_outputs(&cli.out, "roc", &cfg, &out)?;
            Ok(finish(&out))
        }
        Command::Solve => {
            print!("{}", solve_report(&cfg, single_method, single_mode)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate => {
            let report = run_validate(&cfg)?;
            print!("{}", report.render());
            let text: Vec<String> = report.render().lines().map(str::to_string).collect();
            write_manifest(&cli.out, "validate", &cfg, &text)?;
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
