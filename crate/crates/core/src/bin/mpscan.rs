//! Detuning-scan CLI: solves the driven Jaynes–Cummings steady state over a
//! δ/g grid and writes the correlation spectrum as CSV.
//!
//! Exit code 0 on full success, 2 if any grid row failed.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use multiphoton::scan::{figure_preset, run_scan, GridSpec, ScanConfig};

#[derive(Debug, Parser)]
#[command(name = "mpscan", version, about = "Multiphoton-correlation detuning scans")]
struct Cli {
    /// Built-in parameter set: fig1c, fig2 or fig3.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,

    /// TOML config file mirroring the ScanConfig field names.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads; 0 uses all available cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,

    /// Grid override as min:max:count, in units of g.
    #[arg(long)]
    grid: Option<String>,
}

fn load_config(cli: &Cli) -> multiphoton::Result<ScanConfig> {
    let mut config = match (&cli.preset, &cli.config) {
        (Some(name), None) => figure_preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            ScanConfig::from_toml(&text)?
        }
        _ => {
            return Err(multiphoton::Error::Argument(
                "exactly one of --preset or --config is required".into(),
            ))
        }
    };
    if let Some(grid) = &cli.grid {
        config.delta_over_g = GridSpec::parse(grid)?;
        config.validate()?;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(any_failed) => {
            if any_failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("mpscan: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> multiphoton::Result<bool> {
    let config = load_config(cli)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| multiphoton::Error::Argument(format!("thread pool: {e}")))?;
    let table = pool.install(|| run_scan(&config))?;

    match &cli.out {
        Some(path) => {
            let mut writer = BufWriter::new(File::create(path)?);
            table.write_csv(&mut writer)?;
            writer.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut writer = BufWriter::new(stdout.lock());
            table.write_csv(&mut writer)?;
            writer.flush()?;
        }
    }

    if table.any_failed() {
        let failed = table.rows.iter().filter(|r| r.data.is_none()).count();
        eprintln!("mpscan: {failed} of {} rows failed", table.rows.len());
    }
    Ok(table.any_failed())
}
