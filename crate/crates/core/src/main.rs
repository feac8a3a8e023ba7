use clap::{Parser, Subcommand};
use fraclab::config::{load_config, validate_config, ExperimentConfig, Suite};
use fraclab::report::{Reporter, Status, SuiteOutput, SuiteTiming, Tally};
use fraclab::suites::run_suite;
use rayon::prelude::*;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SKIPPED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "fraclab",
    version,
    about = "Verification suites for multi-bump fractional critical problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite and write summary.csv, data tables and manifest.json.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a configuration file and report every problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the available suites.
    ListSuites,
}

fn print_issues(issues: &[fraclab::config::ConfigIssue]) {
    for i in issues {
        eprintln!("error: {i}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListSuites => {
            for s in Suite::CONCRETE.iter().chain(std::iter::once(&Suite::All)) {
                println!("{:<13} {}", s.name(), s.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(_) => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(issues) => {
                print_issues(&issues);
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Run {
            config,
            suite,
            out,
            seed,
            threads,
        } => {
            let mut cfg = match config {
                Some(path) => match load_config(&path) {
                    Ok(c) => c,
                    Err(issues) => {
                        print_issues(&issues);
                        return ExitCode::from(EXIT_CONFIG);
                    }
                },
                None => ExperimentConfig::default(),
            };
            if let Some(s) = suite {
                cfg.suite = s;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            // overrides can also be invalid, so check the merged result
            if let Err(issues) = validate_config(&cfg.to_toml()) {
                print_issues(&issues);
                return ExitCode::from(EXIT_CONFIG);
            }
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("error: thread pool: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
            run(&cfg)
        }
    }
}

fn run(cfg: &ExperimentConfig) -> ExitCode {
    let mut reporter = match Reporter::create(&cfg.output) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: output directory {}: {e}", cfg.output.display());
            return ExitCode::from(EXIT_IO);
        }
    };
    let suites = cfg.suite.expand();
    let results: Vec<(SuiteOutput, f64)> = suites
        .par_iter()
        .map(|&s| {
            let t0 = Instant::now();
            let out = run_suite(s, cfg);
            (out, t0.elapsed().as_secs_f64())
        })
        .collect();
    let mut all = SuiteOutput::default();
    let mut timings = Vec::new();
    for (s, (out, secs)) in suites.iter().zip(results) {
        for c in &out.checks {
            let mark = match c.status {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
                Status::Info => "info",
            };
            println!(
                "{mark:<4} {:<13} {:<36} {:>13.6e}  {}",
                c.suite, c.name, c.measured, c.note
            );
        }
        timings.push(SuiteTiming {
            suite: s.name().to_string(),
            seconds: secs,
        });
        all.extend(out);
    }
    let threads = rayon::current_num_threads();
    let written = reporter
        .write_outputs(&all)
        .and_then(|_| reporter.finish(cfg, threads, &all, timings));
    if let Err(e) = written {
        eprintln!("error: writing outputs: {e}");
        return ExitCode::from(EXIT_IO);
    }
    let tally = Tally::of(&all.checks);
    println!(
        "{} passed, {} failed, {} skipped; outputs in {}",
        tally.passed,
        tally.failed,
        tally.skipped,
        cfg.output.display()
    );
    if tally.failed > 0 {
        ExitCode::from(EXIT_FAILED)
    } else if tally.skipped > 0 {
        ExitCode::from(EXIT_SKIPPED)
    } else {
        ExitCode::SUCCESS
    }
}
