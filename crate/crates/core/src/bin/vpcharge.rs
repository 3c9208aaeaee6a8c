use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vpcharge::constants::{build_table, TableInputs};
use vpcharge::io::{parse_config, report_dir, simulate_to_dir, verify_dir, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "vpcharge", version, about = "Vlasov-Poisson with a point charge: particle runs and estimate checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a config and write series, snapshots and plots.
    ///
    /// The output directory comes from the environment, then the config.
    Simulate { config: PathBuf },
    /// Run the check suite on a stored run and write report.json.
    Verify { run: PathBuf },
    /// Print the constants table as JSON.
    Constants {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        m0: f64,
        #[arg(long = "T")]
        t_final: f64,
        #[arg(long = "K0", default_value_t = 100.0)]
        k0: f64,
        /// ‖f0‖₁.
        #[arg(long, default_value_t = 1.0)]
        f0_l1: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// H_m(0), used for t0.
        #[arg(long, default_value_t = 1.0)]
        h_m: f64,
    },
    /// Re-render plots of a stored run and write summary.json.
    Report { run: PathBuf },
}

fn run(cli: Cli) -> vpcharge::Result<bool> {
    match cli.cmd {
        Cmd::Simulate { config } => {
            let cfg = parse_config(&config)?;
            let (dir, m) = simulate_to_dir(&cfg)?;
            println!(
                "wrote {} ({} records, {} snapshots, config_hash={})",
                dir.display(),
                m.records,
                m.snapshots.len(),
                m.config_hash
            );
            Ok(true)
        }
        Cmd::Verify { run } => {
            let report = verify_dir(&run)?;
            for e in &report.entries {
                let status = match (e.skipped, e.pass) {
                    (true, _) => "SKIP",
                    (false, true) => "PASS",
                    (false, false) => "FAIL",
                };
                let worst = e.worst_ratio.map(|w| format!(" worst={w:.4e}")).unwrap_or_default();
                let reason = e.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default();
                println!("{status} {}{worst}{reason}", e.name);
            }
            println!("{} config_hash={}", if report.pass { "pass" } else { "FAIL" }, report.config_hash);
            Ok(report.pass)
        }
        Cmd::Constants { m, m0, t_final, k0, f0_l1, lambda, h_m } => {
            let table = build_table(&TableInputs { m, m0, t_final, k0, f0_l1, lambda, h_m })?;
            println!("{}", serde_json::to_string_pretty(&table)?);
            Ok(true)
        }
        Cmd::Report { run } => {
            let s = report_dir(&run)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, vpcharge::Error::Io { .. }) {
                eprintln!("(output directory can be set with {OUTPUT_DIR_ENV})");
            }
            ExitCode::from(2)
        }
    }
}
