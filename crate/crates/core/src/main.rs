use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nv_readout::shell::{exit_code, run_pipeline, Command, Report, ReportFormat, RunConfig};
use nv_readout::Error;

#[derive(Parser)]
#[command(name = "nvreadout", version, about = "NV spin-readout simulation, fitting and SNR analysis")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for the report and any generated CSV files.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Random seed, overriding `[run] seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Clone, Copy, Subcommand)]
enum Sub {
    /// Rate-model fluorescence traces and contrast.
    Simulate,
    /// Fit a curve model to a data file.
    Fit,
    /// Fit K_0, K_s and K_m to two readout traces.
    Rates,
    /// Q, beta and Purcell factor from a mode spectrum.
    Spectrum,
    /// Purcell prediction from cavity parameters.
    Purcell,
    /// Emission fractions and collection efficiency.
    Collect,
    /// SNR enhancement for ZPL-only and broadband detection.
    Snr,
    /// Monte Carlo photon statistics.
    Mc,
    /// Cavity tuning plan.
    Tune,
}

impl Sub {
    fn command(self) -> Command {
        match self {
            Sub::Simulate => Command::Simulate,
            Sub::Fit => Command::Fit,
            Sub::Rates => Command::Rates,
            Sub::Spectrum => Command::Spectrum,
            Sub::Purcell => Command::Purcell,
            Sub::Collect => Command::Collect,
            Sub::Snr => Command::Snr,
            Sub::Mc => Command::Mc,
            Sub::Tune => Command::Tune,
        }
    }
}

fn write(path: &Path, text: &str) -> nv_readout::Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn save(report: &Report, dir: &Path, format: ReportFormat) -> nv_readout::Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let name = format!("{}_report.{}", report.command, format.extension());
    write(&dir.join(name), &report.render(format))?;
    for (name, doc) in &report.artifacts {
        write(&dir.join(name), &doc.render())?;
    }
    Ok(())
}

fn run(cli: &Cli) -> nv_readout::Result<()> {
    let Some(path) = &cli.config else {
        return Err(Error::Config(vec!["--config: required".into()]));
    };
    let cfg = RunConfig::load(path)?;
    let report = run_pipeline(&cfg, cli.command.command(), cli.seed)?;
    let format = match cli.format {
        Format::Csv => ReportFormat::Csv,
        Format::Text => ReportFormat::Text,
    };
    print!("{}", report.render(format));
    if let Some(dir) = &cli.output {
        save(&report, dir, format)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
