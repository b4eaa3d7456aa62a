use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cmsw_core::calibration::{nested_calibrate, CalibrationSpec};
use cmsw_core::data::{default_hubs, load_manifest, read_eta, BaseData, PreparedInputs};
use cmsw_core::par::Parallelism;
use cmsw_core::scenario::{run_counterfactual_pair, Scenario};
use cmsw_core::config::OilPrices;
use cmsw_core::{build_world, report, GlobalConfig};

/// Wheat spot-market simulator.
#[derive(Parser)]
#[command(name = "cmsw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn balance CSVs into prepared simulation inputs.
    Prepare {
        /// Manifest binding balance components to CSV files.
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Yearly demand deviations (`year,eta_d`); zero when omitted.
        #[arg(long)]
        eta: Option<PathBuf>,
    },
    /// Simulate prepared inputs.
    Run {
        #[command(flatten)]
        common: Common,
        /// Months to simulate; defaults to every input year.
        #[arg(long)]
        months: Option<usize>,
    },
    /// Fit structural parameters and demand deviations to observed prices.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Calibration spec (bounds, observed prices, search settings).
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run a baseline and a policy counterfactual.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Regenerate reports from a run's session log.
    Report {
        /// Prepared inputs the run used.
        #[arg(long)]
        inputs: PathBuf,
        /// Run directory; reports are written next to its session log.
        #[arg(long)]
        out: PathBuf,
        /// Session log to read instead of `<out>/sessions.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML parameter file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Prepared-input directory.
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(GlobalConfig, PreparedInputs)> {
        let mut config = match &self.config {
            Some(path) => GlobalConfig::from_file(path)?,
            None => GlobalConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let inputs = PreparedInputs::read_dir(&self.inputs)
            .with_context(|| format!("reading prepared inputs from {}", self.inputs.display()))?;
        // an oil series shipped with the prepared inputs applies unless the
        // config names its own
        let oil = self.inputs.join("oil.csv");
        if config.oil_series.is_none() && oil.is_file() {
            config.oil_series = Some(OilPrices::from_csv(&oil)?);
        }
        Ok((config, inputs))
    }
}

fn prepare(manifest: &Path, out: &Path, eta: Option<&Path>) -> Result<()> {
    let source = load_manifest(manifest)?;
    let hubs = source.hubs.unwrap_or_else(default_hubs);
    let base = BaseData::from_table(&source.table, &hubs)?;
    let eta = match eta {
        Some(path) => read_eta(path, &base.years)?,
        None => vec![0.0; base.years.len()],
    };
    let inputs = base.prepare(&eta)?;
    inputs.write_dir(out)?;
    if let Some(oil) = source.oil {
        oil.write_csv(&out.join("oil.csv"))?;
    }
    println!(
        "prepared {} regions ({} suppliers) over {} years into {}",
        inputs.regions.len(),
        inputs.supplier_count(),
        inputs.years.len(),
        out.display()
    );
    println!("top-5 production share: {:.3}", source.table.top_share(5));
    Ok(())
}

fn run(common: &Common, months: Option<usize>) -> Result<()> {
    let (config, inputs) = common.load()?;
    let months = months.unwrap_or(inputs.years.len() * config.production_cycle as usize);
    if months == 0 {
        bail!(cmsw_core::Error::Config("--months must be at least 1".into()));
    }
    let mut world = build_world(&inputs, &config)?;
    let log = world.run(months)?;
    report::write_run(&log, Some(&inputs), &common.out)?;
    println!("simulated {months} months into {}", common.out.display());
    Ok(())
}

fn calibrate(common: &Common, spec: &Path) -> Result<()> {
    let (config, inputs) = common.load()?;
    let mut spec = CalibrationSpec::from_file(spec)?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    let base = BaseData::from_prepared(&inputs);
    let result = nested_calibrate(&spec, &base, &config, Parallelism::default())?;
    result.write_dir(&common.out)?;
    println!("calibration loss {:.6e}; outputs in {}", result.loss, common.out.display());
    Ok(())
}

fn scenario(common: &Common, path: &Path) -> Result<()> {
    let (config, inputs) = common.load()?;
    let scenario = Scenario::from_file(path)?;
    let resolved = scenario.resolve(&inputs)?;
    let pair = run_counterfactual_pair(&inputs, &config, &resolved, Parallelism::default())?;
    report::write_run(&pair.baseline, Some(&inputs), &common.out.join("baseline"))?;
    report::write_run(&pair.counterfactual, Some(&inputs), &common.out.join("counterfactual"))?;
    pair.write_gaps(&common.out.join("price_gaps.csv"))?;
    if let Some(last) = pair.gaps.last() {
        println!("{}: gap in {} is {:+.2}%", scenario.name, last.year, last.gap_percent);
    }
    Ok(())
}

fn regenerate(inputs: &Path, out: &Path, log: Option<&Path>) -> Result<()> {
    let inputs = PreparedInputs::read_dir(inputs)?;
    let log_path = log.map(Path::to_path_buf).unwrap_or_else(|| out.join("sessions.csv"));
    let log = report::read_sessions(&log_path, &inputs)?;
    report::write_reports(&log, Some(&inputs), out)?;
    println!("reports written to {}", out.display());
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("CMSW_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("CMSW_THREADS must be a positive integer, got `{value}`"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Prepare { inputs, out, eta } => prepare(&inputs, &out, eta.as_deref()),
        Command::Run { common, months } => run(&common, months),
        Command::Calibrate { common, spec } => calibrate(&common, &spec),
        Command::Scenario { common, scenario: path } => scenario(&common, &path),
        Command::Report { inputs, out, log } => regenerate(&inputs, &out, log.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .chain()
                .find_map(|c| c.downcast_ref::<cmsw_core::Error>())
                .is_some_and(cmsw_core::Error::is_validation);
            if validation || is_usage(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.to_string().starts_with("CMSW_THREADS")
}
