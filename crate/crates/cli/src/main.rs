use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use triband_cli::{
    count, matrix, optimize_cmd, simulate_cmd, table_cmd, AllocationChoice, CliError, Overrides,
    RunConfig,
};

/// Wavelength allocation design for multi-camera multispectral systems.
#[derive(Parser)]
#[command(name = "triband", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact number of feasible allocations.
    Count(Common),
    /// Evaluate every feasible allocation and write the ranking report.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Also write the kappa of every allocation to kappas.csv.
        #[arg(long)]
        kappa_csv: bool,
    },
    /// Simulate acquisition and reconstruction for one allocation.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// `best`, `worst`, or 1-based indices such as `1,8,11;2,5,10;3,6,9;4,7,12`.
        #[arg(long, default_value = "best")]
        allocation: String,
    },
    /// Write (or validate) the index table of all feasible allocations.
    Table {
        #[command(flatten)]
        common: Common,
        /// Table file.
        path: PathBuf,
        /// Validate an existing table instead of writing one.
        #[arg(long)]
        validate: bool,
    },
    /// Print the design matrix as CSV.
    Matrix {
        #[command(flatten)]
        common: Common,
        /// Write to a file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    config: PathBuf,
    #[arg(long)]
    fwhm_nm: Option<f64>,
    #[arg(long)]
    peak_transmittance: Option<f64>,
    #[arg(long)]
    n_cam: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    top_m: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory; defaults to the config value, then $TRIBAND_OUTPUT_DIR.
    #[arg(long)]
    output_dir: Option<String>,
    /// Worker threads for the search (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            fwhm_nm: self.fwhm_nm,
            peak_transmittance: self.peak_transmittance,
            n_cam: self.n_cam,
            k: self.k,
            top_m: self.top_m,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            trials: self.trials,
        });
        cfg.resolve_output_dir();
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Count(common) => {
            let cfg = common.load()?;
            println!("{}", count(&cfg)?);
        }
        Command::Optimize { common, kappa_csv } => {
            let cfg = common.load()?;
            let out = optimize_cmd(&cfg, common.threads, kappa_csv)?;
            for w in &out.report.truncated_targets_nm {
                eprintln!("warning: band at {w} nm extends more than 1% past the sensor range");
            }
            let best = &out.report.best;
            println!(
                "best of {} allocations ({} rank deficient): kappa = {:.4}",
                out.report.evaluated_count, out.report.infeasible_rank_count, best.kappa
            );
            println!("  wavelengths (nm): {:?}", best.wavelengths_nm);
            println!("  report: {}", out.json_path.display());
            if let Some(p) = out.csv_path {
                println!("  kappas: {}", p.display());
            }
        }
        Command::Simulate { common, allocation } => {
            let cfg = common.load()?;
            let choice: AllocationChoice = allocation.parse()?;
            let out = simulate_cmd(&cfg, &choice, common.threads)?;
            let r = &out.report;
            println!(
                "kappa = {:.4}, worst-case factor = {:.3e}, min output SNR = {:.4e} over {} trials",
                r.system.conditioning.kappa,
                r.snr.worst_case_factor,
                r.snr.min_output_snr,
                r.snr.trials
            );
            println!("  report: {}", out.json_path.display());
        }
        Command::Table {
            common,
            path,
            validate,
        } => {
            let cfg = common.load()?;
            let rows = table_cmd(&cfg, &path, validate)?;
            if validate {
                println!("{}: {rows} rows, valid", path.display());
            } else {
                println!("wrote {rows} rows to {}", path.display());
            }
        }
        Command::Matrix { common, output } => {
            let cfg = common.load()?;
            let csv = matrix(&cfg)?;
            match output {
                Some(p) => std::fs::write(&p, csv)
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("triband: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
