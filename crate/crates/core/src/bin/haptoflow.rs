use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use haptoflow::config::{Config, LiquidSpec};
use haptoflow::harness::{load_scenario, replay, run_stability, ReplayError, StabilityError};
use haptoflow::vibration::{render_burst, VibrationBurst};

const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(
    name = "haptoflow",
    version,
    about = "Fluid weight-and-balance haptic device simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario through the simulated device.
    Replay {
        scenario: PathBuf,
        /// water or galinstan
        #[arg(long)]
        liquid: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Repeatability benchmark: fill each target weight `reps` times.
    Stability {
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        targets: Vec<f64>,
        #[arg(long, default_value_t = 60)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        liquid: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write stability.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Dump one sampled damped-sine burst as CSV.
    Waveform {
        #[arg(long = "A", default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = VibrationBurst::default().decay)]
        lambda: f64,
        #[arg(long, default_value_t = VibrationBurst::default().angular_frequency)]
        omega: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, default_value_t = VibrationBurst::default().duration)]
        duration: f64,
        #[arg(long, default_value_t = 1000.0)]
        rate: f64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure::Runtime(format!("{}: {e}", path.display()))
    }
}

fn load_config(path: Option<&Path>, liquid: Option<&str>) -> Result<Config, Failure> {
    let mut config = match path {
        Some(p) => Config::load(p).map_err(|e| Failure::Validation(e.to_string()))?,
        None => Config::default(),
    };
    if let Some(name) = liquid {
        config.liquid = LiquidSpec::Named(name.to_string());
        config.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    }
    Ok(config)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
    Ok(path)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Replay {
            scenario,
            liquid,
            seed,
            config,
            out,
        } => {
            let config = load_config(config.as_deref(), liquid.as_deref())?;
            let catalog = config.catalog().map_err(|e| Failure::Validation(e.to_string()))?;
            let scenario = load_scenario(&scenario, &catalog).map_err(|e| Failure::Validation(e.to_string()))?;
            let report = replay(&scenario, &catalog, &config, seed).map_err(|e| match e {
                ReplayError::Trace { .. } | ReplayError::Event { .. } | ReplayError::Protocol { .. } => {
                    Failure::Validation(e.to_string())
                }
                _ => Failure::Runtime(e.to_string()),
            })?;
            let csv = write_file(&out, "report.csv", &report.to_csv_string())?;
            let log = write_file(&out, "events.log", &report.log.to_csv_string())?;
            for p in &report.pickups {
                println!(
                    "{:<14} target {:>7.1} g  achieved {:>7}  latency {:>9}  bursts {}",
                    p.object_id,
                    p.target_mass,
                    p.achieved_mass.map_or("-".into(), |m| format!("{m:.1} g")),
                    p.fill_latency.map_or("-".into(), |l| format!("{l:.3} s")),
                    p.bursts
                );
            }
            println!(
                "{} burst(s), {} retransmission(s), {} dropped line(s)",
                report.bursts, report.retransmissions, report.dropped_lines
            );
            println!("wrote {} and {}", csv.display(), log.display());
        }
        Command::Stability {
            targets,
            reps,
            seed,
            liquid,
            config,
            out,
            svg,
        } => {
            let config = load_config(config.as_deref(), liquid.as_deref())?;
            let report = run_stability(&targets, reps, &config, seed).map_err(|e| match e {
                StabilityError::NoSettle(_) => Failure::Runtime(e.to_string()),
                _ => Failure::Validation(e.to_string()),
            })?;
            let table = report.to_csv_string();
            print!("{table}");
            write_file(&out, "stability.csv", &table)?;
            write_file(&out, "stability_raw.csv", &report.to_raw_csv_string())?;
            if svg {
                write_file(&out, "stability.svg", &report.to_svg())?;
            }
        }
        Command::Waveform {
            amplitude,
            lambda,
            omega,
            phi,
            duration,
            rate,
            out,
        } => {
            let burst = VibrationBurst {
                amplitude,
                decay: lambda,
                angular_frequency: omega,
                phase: phi,
                duration,
            };
            let samples = render_burst(&burst, rate).map_err(|e| Failure::Validation(e.to_string()))?;
            let mut text = String::from("t_s,drive\n");
            for (k, v) in samples.iter().enumerate() {
                let t = (k as f64 / rate).min(duration);
                text.push_str(&format!("{t:.6},{v:.9}\n"));
            }
            match out {
                Some(path) => {
                    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
                    }
                    fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
                }
                None => io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| Failure::Runtime(e.to_string()))?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("fault: {msg}");
            ExitCode::from(2)
        }
    }
}
