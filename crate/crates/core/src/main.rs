use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subband_dpd::error::DpdError;
use subband_dpd::scenario::{
    run, sweep, sweep_csv, sweep_values, write_artifacts, Scenario, SweepVar,
};

/// Sub-band DPD simulator for dual-carrier transmitters.
#[derive(Parser)]
#[command(name = "sbdpd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or `preset:<name>` for a shipped scenario.
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Runs one scenario and writes its summary, spectra and histories.
    Run(Common),
    /// Repeats a scenario over a range of one variable.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// tx_power_db or dpd_order.
        #[arg(long)]
        var: SweepVar,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
}

fn load(c: &Common) -> Result<Scenario, DpdError> {
    let mut sc = Scenario::load(&c.config)?;
    if let Some(s) = c.seed {
        sc.seed = s;
    }
    if let Some(o) = &c.out {
        sc.output_dir = o.clone();
    }
    Ok(sc)
}

fn execute(cli: Cli) -> Result<(), DpdError> {
    match cli.command {
        Command::Run(c) => {
            let sc = load(&c)?;
            let report = run(&sc)?;
            let files = write_artifacts(&report, &sc.output_dir)?;
            if !c.quiet {
                for b in &report.summary.sub_bands {
                    println!(
                        "IM{}: {:.1} dBc -> {:.1} dBc, spur {:.1} dBm -> {:.1} dBm",
                        b.sub_band,
                        b.imr_before_dbc,
                        b.imr_after_dbc,
                        b.spur_before_dbm,
                        b.spur_after_dbm
                    );
                }
                let s = &report.summary;
                println!(
                    "EVM: {:.4}% / {:.4}% -> {:.4}% / {:.4}%",
                    s.evm_before_pct[0],
                    s.evm_before_pct[1],
                    s.evm_after_pct[0],
                    s.evm_after_pct[1]
                );
                for f in files {
                    println!("wrote {}", f.display());
                }
            }
        }
        Command::Sweep {
            common,
            var,
            from,
            to,
            steps,
        } => {
            let sc = load(&common)?;
            let values = sweep_values(from, to, steps)?;
            let rows = sweep(&sc, var, &values)?;
            let text = sweep_csv(&sc, var, &rows);
            std::fs::create_dir_all(&sc.output_dir)?;
            let path = sc.output_dir.join("sweep.csv");
            std::fs::write(&path, &text)?;
            if !common.quiet {
                print!("{}", text);
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DpdError::Config { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
