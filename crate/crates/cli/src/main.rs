use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use cxsplit::experiments::{emit_csv, write_csv, ConvergenceRecord, ExperimentConfig, RunFailure};
use cxsplit::{oracle, run_convergence, run_robustness, run_truncation};

#[derive(Parser, Debug)]
#[command(name = "cxsplit", version, about = "CIR2 bond pricing by complex-timestep operator splitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment configuration; omitted keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV output file (stdout when neither this nor run.output is set).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Splitting scheme: cdv4, strang or lie.
    #[arg(long, global = true)]
    scheme: Option<String>,

    /// Diffusion scale; a comma-separated list for `robustness`.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,

    /// Comma-separated timestep counts, strictly increasing.
    #[arg(long = "n-list", global = true, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,

    /// Domain cutoff X = Y; the element width of the configured mesh is kept.
    #[arg(long, global = true, value_delimiter = ',')]
    cutoff: Option<Vec<f64>>,

    /// Number of concurrent runs.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Write zero wall times so repeated runs produce identical files.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Error against the closed-form price for each timestep count.
    Convergence,
    /// The convergence study for each diffusion scale.
    Robustness,
    /// Fixed element width and timestep count, growing domain cutoff.
    Truncation,
    /// Cross-check all building blocks against independent references.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Convergence => "convergence",
            Command::Robustness => "robustness",
            Command::Truncation => "truncation",
            Command::Selftest => "selftest",
        }
    }
}

fn build_config(cli: &Cli) -> cxsplit::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &cli.scheme {
        cfg.run.scheme = s.clone();
    }
    if let Some(ns) = &cli.n_list {
        cfg.run.n_list = ns.clone();
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if cli.no_timing {
        cfg.run.timing = false;
    }
    if let Some(out) = &cli.out {
        cfg.run.output = Some(out.clone());
    }
    if let Some(eps) = &cli.eps {
        if cli.command == Command::Robustness {
            cfg.robustness.epsilons = eps.clone();
        } else {
            match eps.as_slice() {
                [e] => cfg.model.epsilon = *e,
                _ => return Err(cxsplit::Error::Config("--eps takes a single value here".into())),
            }
        }
    }
    if let Some(cuts) = &cli.cutoff {
        if cli.command == Command::Truncation {
            cfg.truncation.cutoffs = cuts.clone();
        } else {
            match cuts.as_slice() {
                [c] => {
                    let width = cfg.element_width();
                    cfg.mesh.elements = (c / width).round().max(1.0) as usize;
                    cfg.mesh.x_max = *c;
                    cfg.mesh.y_max = *c;
                }
                _ => return Err(cxsplit::Error::Config("--cutoff takes a single value here".into())),
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(cfg: &ExperimentConfig, records: &[ConvergenceRecord]) -> cxsplit::Result<()> {
    match &cfg.run.output {
        Some(path) => emit_csv(records, path),
        None => {
            let stdout = std::io::stdout();
            write_csv(records, stdout.lock())
        }
    }
}

fn fail(command: &str, error: &str, failures: &[RunFailure]) -> ExitCode {
    let summary = json!({
        "status": "failed",
        "command": command,
        "error": error,
        "failures": failures,
    });
    eprintln!("{summary}");
    ExitCode::from(1)
}

fn fmt_slope(s: Option<f64>) -> String {
    s.map_or_else(|| "n/a".into(), |s| format!("{s:.3}"))
}

fn run(cli: &Cli) -> ExitCode {
    let command = cli.command.name();
    if cli.command == Command::Selftest {
        let checks = oracle::run_all();
        let mut stdout = std::io::stdout().lock();
        for c in &checks {
            let _ = writeln!(
                stdout,
                "{} {} (error {:.3e}, tolerance {:.1e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.error,
                c.tolerance
            );
        }
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
        if failed.is_empty() {
            return ExitCode::SUCCESS;
        }
        eprintln!("{}", json!({ "status": "failed", "command": command, "checks": failed }));
        return ExitCode::from(1);
    }
    let cfg = match build_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", json!({ "status": "invalid", "command": command, "error": e.to_string() }));
            return ExitCode::from(2);
        }
    };
    let (records, failures, summary) = match cli.command {
        Command::Convergence => match run_convergence(&cfg) {
            Ok(r) => {
                let s = format!("{} slope {}", cfg.run.scheme, fmt_slope(r.slope));
                (r.records, r.failures, s)
            }
            Err(e) => return fail(command, &e.to_string(), &[]),
        },
        Command::Robustness => match run_robustness(&cfg) {
            Ok(r) => {
                let s = r
                    .runs
                    .iter()
                    .map(|(eps, c)| format!("eps {eps}: slope {}", fmt_slope(c.slope)))
                    .collect::<Vec<_>>()
                    .join("; ");
                (r.records(), r.failures(), s)
            }
            Err(e) => return fail(command, &e.to_string(), &[]),
        },
        Command::Truncation => match run_truncation(&cfg) {
            Ok(r) => {
                let s = format!("blow-up detected: {}", r.blow_up);
                (r.records, r.failures, s)
            }
            Err(e) => return fail(command, &e.to_string(), &[]),
        },
        Command::Selftest => unreachable!(),
    };
    if let Err(e) = output(&cfg, &records) {
        return fail(command, &e.to_string(), &failures);
    }
    if !failures.is_empty() {
        return fail(command, "one or more runs failed", &failures);
    }
    eprintln!("{command}: {summary}");
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    run(&cli)
}
