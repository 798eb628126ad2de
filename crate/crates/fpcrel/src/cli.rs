//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analyze::{analyze, write_table};
use crate::cache::{default_cache_dir, CacheStatus, NullCache};
use crate::commands::{self, null_table, null_view, Context};
use crate::config::{
    self, phases_for, AnalyzeSettings, AnnualSettings, Correction, FileConfig, NullSettings, PowerSettings, Statistic,
    TestSettings,
};
use crate::curves::write_curves_named;
use crate::error::{Error, Result};
use crate::ingest::write_annual_csv;

#[derive(Debug, Parser)]
#[command(name = "fpcrel", version, about = "Relevant-difference tests for eigenfunctions of functional time series")]
pub struct Cli {
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Null-table cache directory (default: $FPCREL_CACHE_DIR or the user cache dir).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Suppress notices on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate (or load) the null table and print upper quantiles.
    SimulateNull(NullArgs),
    /// Test two curve files; JSON result on stdout.
    Test(TestArgs),
    /// Pairwise tests across station CSV files.
    Analyze(AnalyzeArgs),
    /// Monte Carlo power study; CSV output.
    Power(PowerArgs),
    /// Convert a daily station CSV into annual curves.
    Ingest(IngestArgs),
}

#[derive(Debug, Args, Default)]
pub struct NullArgs {
    /// Lower end of the uniform lambda grid.
    #[arg(long)]
    pub nu_lower: Option<f64>,
    /// Number of lambda grid points.
    #[arg(long)]
    pub nu_points: Option<usize>,
    /// Steps of each simulated Brownian path.
    #[arg(long)]
    pub path_steps: Option<usize>,
    /// Number of simulated draws.
    #[arg(long)]
    pub null_replicates: Option<usize>,
    #[arg(long)]
    pub null_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    pub x: PathBuf,
    pub y: PathBuf,
    /// Eigen order j.
    #[arg(long, short)]
    pub order: Option<usize>,
    /// Relevance threshold.
    #[arg(long, short)]
    pub delta: Option<f64>,
    #[arg(long, short)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub statistic: Option<Statistic>,
    /// Shorthand for `--statistic eigenvalue`.
    #[arg(long, conflicts_with = "statistic")]
    pub eigenvalue: bool,
    /// Plug-in test: number of eigenfunctions in the score kernel.
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Plug-in test: Bartlett bandwidth.
    #[arg(long)]
    pub bandwidth: Option<usize>,
    #[command(flatten)]
    pub null: NullArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Station CSV files (at least two).
    #[arg(required = true)]
    pub stations: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<usize>>,
    /// One threshold for all orders or one per order.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long, short)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub correction: Option<Correction>,
    /// JSON report path (default stdout).
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// CSV table path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub null: NullArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Scenario 1 varies the first phase, scenario 2 the second.
    #[arg(long)]
    pub scenario: Option<u8>,
    /// Phases of the varied parameter.
    #[arg(long, value_delimiter = ',', conflicts_with = "distances")]
    pub phases: Option<Vec<f64>>,
    /// Population distances, converted to phases.
    #[arg(long, value_delimiter = ',')]
    pub distances: Option<Vec<f64>>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, short)]
    pub m: Option<usize>,
    #[arg(long, short)]
    pub n: Option<usize>,
    #[arg(long, short)]
    pub replicates: Option<usize>,
    #[arg(long, short)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, short)]
    pub delta: Option<f64>,
    #[arg(long, short)]
    pub alpha: Option<f64>,
    /// Output CSV (default stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub null: NullArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IngestFormat {
    /// Wide curve file readable by `test`.
    Curves,
    /// Long table `year,index,t,value`.
    Long,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub input: PathBuf,
    /// Output path (default: `<input stem>.curves.csv`).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "curves")]
    pub format: IngestFormat,
    /// Skip the linear trend removal.
    #[arg(long)]
    pub no_detrend: bool,
    /// Center the curves after detrending.
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub max_missing: Option<usize>,
}

impl NullArgs {
    pub fn settings(&self, file: &FileConfig) -> NullSettings {
        let mut s = NullSettings::merged(&file.null);
        if let Some(v) = self.nu_lower {
            s.lower = v;
        }
        if let Some(v) = self.nu_points {
            s.points = v;
        }
        if let Some(v) = self.path_steps {
            s.path_steps = v;
        }
        if let Some(v) = self.null_replicates {
            s.replicates = v;
        }
        if let Some(v) = self.null_seed {
            s.seed = v;
        }
        s
    }
}

impl TestArgs {
    pub fn settings(&self, file: &FileConfig) -> TestSettings {
        let mut s = TestSettings::merged(&file.test);
        s.order = self.order.unwrap_or(s.order);
        s.delta = self.delta.unwrap_or(s.delta);
        s.alpha = self.alpha.unwrap_or(s.alpha);
        if self.eigenvalue {
            s.statistic = Statistic::Eigenvalue;
        } else if let Some(st) = self.statistic {
            s.statistic = st;
        }
        s.truncation = self.truncation;
        s.bandwidth = self.bandwidth;
        s
    }
}

impl AnalyzeArgs {
    pub fn settings(&self, file: &FileConfig) -> AnalyzeSettings {
        let mut s = AnalyzeSettings::merged(file);
        if let Some(o) = &self.orders {
            s.orders = o.clone();
        }
        if let Some(d) = &self.deltas {
            s.deltas = d.clone();
        }
        s.alpha = self.alpha.unwrap_or(s.alpha);
        s.correction = self.correction.unwrap_or(s.correction);
        s
    }
}

impl PowerArgs {
    pub fn settings(&self, file: &FileConfig) -> Result<PowerSettings> {
        let mut f = file.power.clone();
        if self.phases.is_some() || self.distances.is_some() {
            f.phases = None;
            f.distances = None;
        }
        f.scenario = self.scenario.or(f.scenario);
        f.order = self.order.or(f.order);
        let mut s = PowerSettings::merged(&f)?;
        if let Some(p) = &self.phases {
            s.phases = p.clone();
        }
        if let Some(d) = &self.distances {
            s.phases = phases_for(d)?;
        }
        s.m = self.m.unwrap_or(s.m);
        s.n = self.n.unwrap_or(s.n);
        s.replicates = self.replicates.unwrap_or(s.replicates);
        s.seed = self.seed.unwrap_or(s.seed);
        s.grid_points = self.grid_points.unwrap_or(s.grid_points);
        s.delta = self.delta.unwrap_or(s.delta);
        s.alpha = self.alpha.unwrap_or(s.alpha);
        Ok(s)
    }
}

fn context(cli: &Cli, file: &FileConfig) -> Context {
    let dir = cli.cache_dir.clone().or_else(|| file.cache_dir.clone()).unwrap_or_else(default_cache_dir);
    Context { cache: NullCache::new(dir), threads: cli.threads.or(file.threads).unwrap_or(0), quiet: cli.quiet }
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = std::io::BufWriter::new(std::fs::File::create(p).map_err(|e| Error::io(p, e))?);
            f(&mut file).and_then(|_| file.flush()).map_err(|e| Error::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => config::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = context(&cli, &file);
    match &cli.command {
        Command::SimulateNull(args) => {
            let s = args.settings(&file);
            let start = std::time::Instant::now();
            let (table, status) = null_table(&ctx, &s)?;
            let path = ctx.cache.path_for(&s.spec()?);
            match status {
                CacheStatus::Hit => println!("cache hit: {}", path.display()),
                CacheStatus::Simulated => {
                    println!("simulated {} draws in {:.1?}: {}", table.replicates(), start.elapsed(), path.display())
                }
            }
            for p in [0.90, 0.95, 0.99] {
                println!("q({p:.2}) = {:.6}", table.quantile(p)?);
            }
            Ok(0)
        }
        Command::Test(args) => {
            let test = args.settings(&file);
            let null = args.null.settings(&file);
            let (report, result) = commands::cmd_test(&ctx, &args.x, &args.y, &test, &null)?;
            write_json(None, &report)?;
            Ok(if result.w_hat.is_nan() { 3 } else { 0 })
        }
        Command::Analyze(args) => {
            let settings = args.settings(&file);
            settings.validate()?;
            let null = args.null.settings(&file);
            let (table, status) = null_table(&ctx, &null)?;
            let report = analyze(&args.stations, &settings, &table, null_view(&null, status), ctx.threads)?;
            for f in &report.failures {
                eprintln!("station {} skipped: {}", f.path, f.error);
            }
            write_json(args.json.as_deref(), &report)?;
            if let Some(p) = &args.csv {
                write_output(Some(p), |w| write_table(w, &report))?;
            }
            Ok(0)
        }
        Command::Power(args) => {
            let s = args.settings(&file)?;
            let null = args.null.settings(&file);
            let points = commands::cmd_power(&ctx, &s, &null)?;
            write_output(args.output.as_deref(), |w| commands::write_power_csv(w, &points))?;
            Ok(0)
        }
        Command::Ingest(args) => {
            let schema = file.schema.clone().unwrap_or_default();
            let mut annual = AnnualSettings::merged(&file.annual);
            annual.max_missing = args.max_missing.unwrap_or(annual.max_missing);
            let mut set = commands::annual_curves(&args.input, &schema, &annual, !args.no_detrend)?;
            if args.center {
                set.curves = fpcrel_core::center(&set.curves);
            }
            for d in &set.dropped {
                ctx.notice(&format!("year {} dropped: {}", d.year, d.reason));
            }
            let out = args.output.clone().unwrap_or_else(|| {
                commands::default_output(&args.input, if args.format == IngestFormat::Curves { ".curves.csv" } else { ".annual.csv" })
            });
            match args.format {
                IngestFormat::Curves => write_curves_named(&out, &set.curves, |i| format!("y{}", set.years[i]))?,
                IngestFormat::Long => write_annual_csv(&out, &set)?,
            }
            ctx.notice(&format!("{} curves written to {}", set.years.len(), out.display()));
            Ok(0)
        }
    }
}

/// Parses `std::env::args`, runs, reports errors and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
