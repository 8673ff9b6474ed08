use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use symvqe_harness::{config::Purpose, ExperimentConfig, HarnessError, ModelSpec, Result};

#[derive(Parser)]
#[command(name = "symvqe", version, about = "Symmetry-aware variational eigensolver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (single layer count).
    Run {
        config: PathBuf,
        /// Allow restart counts above the desk limit.
        #[arg(long)]
        long_run: bool,
    },
    /// Run every layer count of the config's sweep list.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        long_run: bool,
    },
    /// Write the labelled low-energy spectrum as JSON.
    Diagonalize {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Heisenberg coupling.
        #[arg(long, default_value_t = 1.0)]
        j: f64,
        /// Ising ZZ coupling.
        #[arg(long, default_value_t = 1.0)]
        jz: f64,
        /// Ising transverse field.
        #[arg(long, default_value_t = 1.0)]
        hx: f64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entangling power for each layer count of the config.
    Entpower { config: PathBuf },
    /// Tables and per-iteration series from a run directory.
    Report { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Heisenberg,
    Ising,
}

fn load(path: &Path, long_run: bool, purpose: Purpose) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.long_run |= long_run;
    cfg.validate(purpose)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    symvqe_harness::init_thread_pool()?;
    match cli.command {
        Command::Run { config, long_run } => {
            let cfg = load(&config, long_run, Purpose::Optimize)?;
            let rec = symvqe_harness::run_experiment(&cfg)?;
            let s = &rec.summary;
            println!(
                "layers {}: {} restarts, {} failed, {} reached fidelity {}, median n_I {}, median C_R {}",
                rec.layers,
                s.restarts,
                s.failed,
                s.reached_fidelity,
                cfg.thresholds.fidelity,
                s.median_n_i.map_or("-".into(), |v| v.to_string()),
                s.median_c_r.map_or("-".into(), |v| v.to_string()),
            );
            println!("outputs in {}", cfg.output_dir.display());
        }
        Command::Sweep { config, long_run } => {
            let cfg = load(&config, long_run, Purpose::Optimize)?;
            let res = symvqe_harness::layer_sweep(&cfg)?;
            for row in &res.table {
                println!(
                    "layer {:>3}  CNOT {:>4}  L {:>5}  n_I {:>6}  C_R {:>9}",
                    row.layer,
                    row.cnot,
                    row.n_params,
                    row.n_i.map_or("-".into(), |v| v.to_string()),
                    row.c_r.map_or("-".into(), |v| v.to_string()),
                );
            }
            match res.min_layer_meeting_threshold {
                Some(l) => println!("smallest layer meeting the energy threshold: {l}"),
                None => println!("no layer met the energy threshold"),
            }
            println!("outputs in {}", cfg.output_dir.display());
        }
        Command::Diagonalize { model, n, k, j, jz, hx, out } => {
            let model = match model {
                ModelArg::Heisenberg => ModelSpec::Heisenberg { j },
                ModelArg::Ising => ModelSpec::Ising { jz, hx },
            };
            let entries = symvqe_harness::diagonalize(&model, n, k)?;
            let text = serde_json::to_string_pretty(&entries).map_err(|e| HarnessError::runtime(e.to_string()))?;
            match out {
                Some(p) => std::fs::write(&p, text + "\n")?,
                None => {
                    let mut out = std::io::stdout().lock();
                    match writeln!(out, "{text}") {
                        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                        r => r?,
                    }
                }
            }
        }
        Command::Entpower { config } => {
            let cfg = load(&config, false, Purpose::Entpower)?;
            for r in symvqe_harness::entpower(&cfg)? {
                println!("layers {:>3}  CNOT {:>4}  L {:>5}  S_V {:.6} +- {:.6}", r.layers, r.cnot_body, r.n_params, r.mean, r.std_err);
            }
            println!("outputs in {}", cfg.output_dir.display());
        }
        Command::Report { dir } => {
            let rep = symvqe_harness::report(&dir)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            for d in &rep.diagnostics {
                eprintln!("error: {d}");
            }
            println!("{} runs reported into {}", rep.runs.len(), rep.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
