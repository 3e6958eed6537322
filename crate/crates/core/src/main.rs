use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use homesim::config::RunConfig;
use homesim::engine::{dump_trajectories, run_grid_with, run_strategy_comparison, write_comparison, write_tables, RunInputs};
use homesim::error::SimError;
use homesim::synthetic;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Grid,
    Comparison,
}

#[derive(Debug, Parser)]
#[command(name = "homesim", version, about = "Life-cycle homeownership vs renting simulator")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with macro_panel.csv, life_table_ssa.csv and plf_hecm.csv.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Comma-separated: world, us, uk, europe, or ISO country codes.
    #[arg(long, value_delimiter = ',')]
    countries: Option<Vec<String>>,
    #[arg(long)]
    households: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "grid")]
    mode: Mode,
    /// Write base-cell yearly records of the first N households.
    #[arg(long, value_name = "N")]
    dump_trajectories: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the bundled synthetic macro panel to a CSV file.
    GenPanel {
        #[arg(long, default_value_t = synthetic::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "macro_panel.csv")]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Data(String),
    Runtime(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => Failure::Config(e.to_string()),
            e if e.is_data_error() => Failure::Data(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.data_dir {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(c) = &cli.countries {
        cfg.countries = c.clone();
    }
    if let Some(n) = cli.households {
        cfg.households = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = cli.dump_trajectories {
        cfg.dump_trajectories = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(Command::GenPanel { seed, out }) = &cli.command {
        std::fs::write(out, synthetic::generate_panel_csv(*seed))
            .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
        eprintln!("wrote {}", out.display());
        return Ok(());
    }
    let cfg = build_config(&cli)?;
    let inputs = RunInputs::load(&cfg)?;
    eprintln!(
        "panel: {} countries, {} country-years",
        inputs.panel.countries.len(),
        inputs.panel.country_years()
    );
    let started = Instant::now();
    match cli.mode {
        Mode::Grid => {
            let results = run_grid_with(&cfg, &inputs)?;
            write_tables(&results, &cfg.output_dir)?;
            if cfg.dump_trajectories > 0 {
                let path = cfg.output_dir.join("trajectories.csv");
                dump_trajectories(&cfg, &inputs, cfg.dump_trajectories, &path)?;
            }
        }
        Mode::Comparison => {
            let result = run_strategy_comparison(&cfg, &inputs.panel, cfg.comparison_paths)?;
            write_comparison(&result, &cfg.output_dir)?;
        }
    }
    eprintln!(
        "done in {:.1}s, results in {}",
        started.elapsed().as_secs_f64(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("data error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
