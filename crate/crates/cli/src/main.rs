//! Command-line front end: estimate a model on user data, run a simulation
//! design, or run the fast self-check suite.
//!
//! Exit codes: 0 success, 2 usage/input problems, 3 numeric failures.

mod io;

use clap::{Parser, Subcommand, ValueEnum};
use mile_core::montecarlo::{render_table, run_design, McDesign, TableFormat};
use mile_core::{dyn_panel, iv_model, rank_transform, selfcheck, static_panel};
use mile_core::{EstimateReport, Error as CoreError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

const EXIT_INPUT: i32 = 2;
const EXIT_NUMERIC: i32 = 3;

#[derive(Parser)]
#[command(
    name = "mile",
    about = "Invariant-likelihood estimators for panel, rank, IV and dynamic panel models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Model {
    Static,
    Rank,
    Iv,
    Dyn,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a model from a CSV file and write the report as JSON.
    Estimate {
        #[arg(long, value_enum)]
        model: Model,
        /// Long CSV (i,t,y[,x_1..x_K]) for panel models; wide CSV
        /// (y1,y2,z_1..z_K) for the IV model.
        #[arg(long)]
        input: PathBuf,
        /// JSON sidecar: {"sigma": [[..],[..]], "rank_draws": 2000}.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output path for the JSON report (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Seed for the rank model's common random numbers.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run a Monte Carlo design and write the table.
    Simulate {
        /// Design JSON (see designs/table1.json .. table5.json).
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// csv or markdown.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Worker-thread cap for the replication loop.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the fast invariant suite and print one pass/fail line per item.
    Check,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Estimate {
            model,
            input,
            config,
            output,
            seed,
        } => cmd_estimate(model, &input, config.as_deref(), output.as_deref(), seed),
        Command::Simulate {
            design,
            output,
            format,
            threads,
        } => cmd_simulate(&design, output.as_deref(), &format, threads),
        Command::Check => cmd_check(),
    };
    std::process::exit(code);
}

fn fail(code: i32, msg: &str) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Domain(_) | CoreError::Invalid(_) | CoreError::Ties(_) => EXIT_INPUT,
        CoreError::Optimization(_) | CoreError::Estimation(_) | CoreError::Numeric(_) => {
            EXIT_NUMERIC
        }
    }
}

fn write_out(output: Option<&Path>, text: &str) -> Result<(), String> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_estimate(
    model: Model,
    input: &Path,
    config: Option<&Path>,
    output: Option<&Path>,
    seed: u64,
) -> i32 {
    let cfg = match io::read_side_config(config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_INPUT, &e.to_string()),
    };
    let report: Result<EstimateReport, CoreError> = match model {
        Model::Static => io::read_long_panel(input)
            .map_err(|e| CoreError::Invalid(e.to_string()))
            .and_then(|p| static_panel::StaticPanelData::new(p.y, p.x))
            .and_then(|d| static_panel::estimate_static(&d)),
        Model::Rank => io::read_long_panel(input)
            .map_err(|e| CoreError::Invalid(e.to_string()))
            .and_then(|p| rank_transform::RankData::new(p.y, p.x))
            .and_then(|d| {
                let draws = cfg.rank_draws.unwrap_or(2000);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rank_transform::estimate_rank(&d, draws, &mut rng)
            }),
        Model::Iv => {
            let sigma = match io::sigma_from_config(&cfg) {
                Ok(s) => s,
                Err(e) => return fail(EXIT_INPUT, &e.to_string()),
            };
            io::read_iv_csv(input)
                .map_err(|e| CoreError::Invalid(e.to_string()))
                .and_then(|d| iv_model::IVData::new(d.y1, d.y2, d.z, sigma))
                .and_then(|d| {
                    let ws = iv_model::wishart_stat_iv(&d)?;
                    iv_model::mile_iv(&ws, &d.sigma)
                })
        }
        Model::Dyn => io::read_long_panel(input)
            .map_err(|e| CoreError::Invalid(e.to_string()))
            .and_then(|p| {
                if p.x.dim().2 != 0 {
                    return Err(CoreError::Invalid(
                        "the dynamic panel model takes no regressor columns".into(),
                    ));
                }
                dyn_panel::mile_dyn_from_y(&p.y)
            }),
    };
    match report {
        Ok(rep) => {
            let text = serde_json::to_string_pretty(&rep).expect("report serializes");
            match write_out(output, &text) {
                Ok(()) => 0,
                Err(e) => fail(EXIT_INPUT, &e),
            }
        }
        Err(e) => fail(core_exit_code(&e), &e.to_string()),
    }
}

fn cmd_simulate(design: &Path, output: Option<&Path>, format: &str, threads: Option<usize>) -> i32 {
    let format: TableFormat = match format.parse() {
        Ok(f) => f,
        Err(e) => return fail(EXIT_INPUT, &format!("{e}")),
    };
    if let Some(n) = threads {
        if n == 0 {
            return fail(EXIT_INPUT, "--threads must be >= 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(EXIT_INPUT, &format!("thread pool: {e}"));
        }
    }
    let text = match std::fs::read_to_string(design) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_INPUT, &format!("cannot read {}: {e}", design.display())),
    };
    let design = match McDesign::from_json(&text) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_INPUT, &e.to_string()),
    };
    match run_design(&design) {
        Ok(results) => {
            let table = render_table(&results, format);
            match write_out(output, &table) {
                Ok(()) => 0,
                Err(e) => fail(EXIT_INPUT, &e),
            }
        }
        Err(e) => fail(core_exit_code(&e), &e.to_string()),
    }
}

fn cmd_check() -> i32 {
    let items = selfcheck::run_all();
    let mut all_ok = true;
    for it in &items {
        let status = if it.passed { "PASS" } else { "FAIL" };
        println!("{status} {} — {}", it.name, it.detail);
        all_ok &= it.passed;
    }
    if all_ok {
        0
    } else {
        EXIT_NUMERIC
    }
}
