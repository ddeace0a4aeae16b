//! Quantum-trajectory CLI: simulates a click record at one detuning, writes
//! it in the line-oriented text format, and optionally prints
//! factorial-moment ratio estimates (with bootstrap errors) to stderr-free
//! stdout when no record path is given.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use multiphoton::hilbert::SpaceConfig;
use multiphoton::scan::{figure_preset, ScanConfig};
use multiphoton::trajectories::{
    estimate_ratios, factorial_moments, mcwf_ensemble, thin_record, ClickRecord,
};

#[derive(Debug, Parser)]
#[command(name = "mptraj", version, about = "Quantum-jump click-record simulation")]
struct Cli {
    /// Parameter set: fig1c, fig2 or fig3.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,

    /// TOML scan config supplying the rate ratios.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Detuning δ/g.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,

    /// Post-transient duration per trajectory, units of 1/g.
    #[arg(long, default_value_t = 1.0e6)]
    duration: f64,

    /// Number of trajectories.
    #[arg(long, default_value_t = 500)]
    n_traj: usize,

    /// Ensemble seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Fock truncation for the trajectory state (defaults to the config's).
    #[arg(long)]
    n_photon_max: Option<usize>,

    /// Detector efficiency; when set, the cavity channel is thinned.
    #[arg(long)]
    efficiency: Option<f64>,

    /// Seed of the thinning draws.
    #[arg(long, default_value_t = 7)]
    thin_seed: u64,

    /// Click-record output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also print factorial moments and ratio estimates.
    #[arg(long)]
    estimate: bool,

    /// Counting bin width; default 0.05/(2κ).
    #[arg(long)]
    bin_width: Option<f64>,

    /// Highest ratio order for --estimate.
    #[arg(long, default_value_t = 3)]
    k_max: usize,

    /// Bootstrap replicates for --estimate.
    #[arg(long, default_value_t = 200)]
    n_bootstrap: usize,

    /// Worker threads; 0 uses all available cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("mptraj: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> multiphoton::Result<()> {
    let config: ScanConfig = match (&cli.preset, &cli.config) {
        (Some(name), None) => figure_preset(name)?,
        (None, Some(path)) => ScanConfig::from_toml(&std::fs::read_to_string(path)?)?,
        _ => {
            return Err(multiphoton::Error::Argument(
                "exactly one of --preset or --config is required".into(),
            ))
        }
    };
    let params = config.params_at(cli.delta);
    let space = SpaceConfig::new(cli.n_photon_max.unwrap_or(config.n_photon_max))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| multiphoton::Error::Argument(format!("thread pool: {e}")))?;
    let mut record =
        pool.install(|| mcwf_ensemble(&params, &space, cli.duration, cli.n_traj, cli.seed))?;
    if let Some(efficiency) = cli.efficiency {
        record = thin_record(&record, efficiency, cli.thin_seed)?;
    }

    match &cli.out {
        Some(path) => {
            let mut writer = BufWriter::new(File::create(path)?);
            record.write_to(&mut writer)?;
            writer.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut writer = BufWriter::new(stdout.lock());
            record.write_to(&mut writer)?;
            writer.flush()?;
        }
    }

    if cli.estimate {
        print_estimates(&record, cli, params.kappa)?;
    }
    Ok(())
}

fn print_estimates(record: &ClickRecord, cli: &Cli, kappa: f64) -> multiphoton::Result<()> {
    let bin_width = cli.bin_width.unwrap_or(0.05 / (2.0 * kappa));
    let moments = factorial_moments(record, bin_width, cli.k_max)?;
    eprintln!("# bin_width = {bin_width:.6e}");
    for (k, f) in moments.iter().enumerate().skip(1) {
        eprintln!("# F{k} = {f:.6e}");
    }
    for estimate in estimate_ratios(record, bin_width, cli.k_max, cli.n_bootstrap)? {
        eprintln!(
            "# R{}{} = {:.6e} +- {:.3e}{}",
            estimate.k,
            estimate.k - 1,
            estimate.value,
            estimate.std_error,
            if estimate.valid { "" } else { " (degenerate)" }
        );
    }
    Ok(())
}
