use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use viscowave_lab::{
    continuous_dependence, convergence_study, run_scenario, sweep, write_sweep_csv, LabResult, Outcome,
    Scenario, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "viscowave", version, about = "Damped viscoelastic wave simulations and their checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario: ledger.csv, summary.txt, history.bin
    Run(Common),
    /// Continuous-dependence table over the perturbation sizes in depend.deltas
    Depend(Common),
    /// Bounded vs blow-up-indicator classification over the sweep.* grid
    Sweep(Common),
    /// Residual and oracle convergence under repeated halving of the time step
    Converge(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run even when the model fails its structural checks
    #[arg(long)]
    allow_invalid: bool,
}

fn create(dir: &Path, name: &str) -> LabResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn execute(command: Command) -> LabResult<i32> {
    match command {
        Command::Run(c) => {
            let cfg = ScenarioConfig::from_path(&c.config)?;
            let summary = run_scenario(&cfg, &c.out, c.seed, c.allow_invalid)?;
            for (k, v) in summary.lines() {
                println!("{k}: {v}");
            }
            Ok(if summary.blow_up.is_some() { 3 } else { 0 })
        }
        Command::Depend(c) => {
            let cfg = ScenarioConfig::from_path(&c.config)?;
            let sc = Scenario::from_config(&cfg, c.allow_invalid)?;
            let direction = cfg.depend.perturbation.clone().unwrap_or_else(|| cfg.past.clone());
            let table = continuous_dependence(&sc, &cfg.depend.deltas, &direction)?;
            fs::create_dir_all(&c.out)?;
            table.write_csv(create(&c.out, "depend.csv")?)?;
            table.write_csv(std::io::stdout().lock())?;
            match table.spread(4) {
                Some(s) => println!("ratio spread over the last 4 perturbations: {s:.6}"),
                None => println!("ratio spread: fewer than 4 nonzero perturbations"),
            }
            Ok(0)
        }
        Command::Sweep(c) => {
            let cfg = ScenarioConfig::from_path(&c.config)?;
            let rows = sweep(&cfg, c.allow_invalid, true)?;
            fs::create_dir_all(&c.out)?;
            write_sweep_csv(&rows, create(&c.out, "sweep.csv")?)?;
            write_sweep_csv(&rows, std::io::stdout().lock())?;
            let rejected = rows.iter().filter(|r| r.outcome == Outcome::Rejected).count();
            if rejected > 0 {
                eprintln!("{rejected} cell(s) rejected by validation; pass --allow-invalid to run them");
            }
            Ok(0)
        }
        Command::Converge(c) => {
            let cfg = ScenarioConfig::from_path(&c.config)?;
            let sc = Scenario::from_config(&cfg, c.allow_invalid)?;
            let study = convergence_study(
                &sc,
                cfg.converge.levels,
                &cfg.converge.test_modes,
                cfg.converge.test_omega,
            )?;
            fs::create_dir_all(&c.out)?;
            study.write_csv(create(&c.out, "converge.csv")?)?;
            study.write_summary(create(&c.out, "converge_summary.txt")?)?;
            study.write_csv(std::io::stdout().lock())?;
            study.write_summary(std::io::stdout().lock())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
