use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ppgof::estimate::{fit_mle, FitOptions};
use ppgof::gof::{path_test_with_grid, rtc_test, Procedure, DEFAULT_TAU};
use ppgof::harness::{qq_data, run_experiment, write_qq_csv, CountBasis, ExperimentConfig, NRule, QqReference};
use ppgof::ingest::{jitter, load_events, CatalogSchema};
use ppgof::io::{read_realization_file, write_realization};
use ppgof::model::{ModelKind, ModelSpec, Realization, DEFAULT_MARK_CUTOFF};
use ppgof::simulate::{simulate_with, SeedSpec, SimOptions};
use ppgof::stattests::GofTest;
use ppgof::{Error, Result};

#[derive(Parser)]
#[command(name = "ppgof", version, about = "Goodness-of-fit tests for temporal point processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a model and write its events as CSV.
    Simulate {
        #[arg(long)]
        model: ModelKind,
        /// Comma-separated parameter vector.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        replication: u64,
        /// Simulate even if the stability check fails.
        #[arg(long)]
        allow_unstable: bool,
        #[arg(long, default_value_t = DEFAULT_MARK_CUTOFF)]
        mark_cutoff: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model family to an event file and print the estimate as JSON.
    Fit {
        #[command(flatten)]
        input: EventInput,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit, then run one goodness-of-fit procedure; prints a JSON report.
    Test {
        #[command(flatten)]
        input: EventInput,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value = "transform")]
        procedure: Procedure,
        #[arg(long, default_value = "ad")]
        test: GofTest,
        /// Constant `c` in `n = max(ceil(c sqrt(basis)), floor)`.
        #[arg(long, default_value_t = 0.25)]
        n_c: f64,
        #[arg(long, default_value_t = 1)]
        n_floor: usize,
        /// What `n` is computed from: `horizon` or `count` (number of events).
        #[arg(long, default_value = "horizon", value_parser = parse_basis)]
        n_basis: CountBasis,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        /// Grid size; `max(4096, 64 n)` by default.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment from a TOML config.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        /// Rejection table CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-replication p-value log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Pair sorted statistics with reference quantiles.
    Qq {
        /// CSV with a statistics column (a p-value log works).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "statistic")]
        column: String,
        /// kolmogorov, std-normal or std-exponential.
        #[arg(long, default_value = "kolmogorov")]
        reference: QqReference,
        /// Keep rows whose `procedure` column equals this.
        #[arg(long)]
        procedure: Option<Procedure>,
        /// Keep rows whose `test` column equals this.
        #[arg(long)]
        test: Option<GofTest>,
        /// Multiply each value by the square root of its `n_effective` column.
        #[arg(long)]
        scale_sqrt_n: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EventInput {
    /// Event CSV as written by `simulate`.
    #[arg(long, conflicts_with = "catalog", required_unless_present = "catalog")]
    events: Option<PathBuf>,
    /// Observation horizon; overrides the event file's header.
    #[arg(long)]
    horizon: Option<f64>,
    /// Raw catalog CSV, jittered within its time buckets.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Catalog layout: `earthquakes`, `weekly-cases`, or a TOML schema file.
    #[arg(long, requires = "catalog")]
    schema: Option<String>,
    #[arg(long, default_value_t = 0)]
    jitter_seed: u64,
}

#[derive(Args)]
struct FitArgs {
    /// Null model family.
    #[arg(long)]
    null: ModelKind,
    #[arg(long, default_value_t = 5)]
    n_starts: usize,
    #[arg(long, default_value_t = 0)]
    fit_seed: u64,
    #[arg(long, default_value_t = DEFAULT_MARK_CUTOFF)]
    mark_cutoff: f64,
}

fn parse_basis(s: &str) -> std::result::Result<CountBasis, String> {
    match s {
        "horizon" => Ok(CountBasis::Horizon),
        "count" => Ok(CountBasis::Count),
        _ => Err(format!("expected 'horizon' or 'count', got '{s}'")),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn schema_from(spec: Option<&str>) -> Result<CatalogSchema> {
    match spec {
        None | Some("earthquakes") => Ok(CatalogSchema::earthquakes()),
        Some("weekly-cases") => Ok(CatalogSchema::weekly_cases()),
        Some(path) => {
            let text = std::fs::read_to_string(Path::new(path))?;
            let schema: CatalogSchema =
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            schema.validate()?;
            Ok(schema)
        }
    }
}

fn load_input(input: &EventInput) -> Result<Realization> {
    if let Some(path) = &input.catalog {
        let schema = schema_from(input.schema.as_deref())?;
        let raw = load_events(path, &schema)?;
        return jitter(&raw, schema.resolution, input.jitter_seed);
    }
    let path = input.events.as_ref().expect("clap enforces events or catalog");
    read_realization_file(path, input.horizon)
}

fn fit_opts(args: &FitArgs) -> FitOptions {
    FitOptions {
        n_starts: args.n_starts,
        seed: args.fit_seed,
        mark_cutoff: args.mark_cutoff,
        ..FitOptions::default()
    }
}

fn write_json<T: serde::Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            model,
            params,
            horizon,
            seed,
            replication,
            allow_unstable,
            mark_cutoff,
            out,
        } => {
            let spec = ModelSpec::new(model, &params)?.with_mark_cutoff(mark_cutoff);
            let opts = SimOptions {
                allow_unstable,
                ..SimOptions::default()
            };
            let r = simulate_with(&spec, horizon, SeedSpec::new(seed, replication), &opts)?;
            let mut w = output(&out)?;
            write_realization(&r, &mut w)?;
            w.flush()?;
        }
        Command::Fit { input, fit, out } => {
            let r = load_input(&input)?;
            let result = fit_mle(fit.null, &r, None, &fit_opts(&fit))?;
            write_json(&result, &out)?;
        }
        Command::Test {
            input,
            fit,
            procedure,
            test,
            n_c,
            n_floor,
            n_basis,
            tau,
            grid,
            out,
        } => {
            let r = load_input(&input)?;
            let result = fit_mle(fit.null, &r, None, &fit_opts(&fit))?;
            let rule = NRule {
                c: n_c,
                floor: n_floor,
                basis: n_basis,
            };
            let n = rule.n_for(r.horizon(), r.len())?;
            let m = grid.unwrap_or_else(|| ppgof::gof::default_grid(n));
            let report = match procedure {
                Procedure::Rtc => rtc_test(&r, &result, test)?,
                p => path_test_with_grid(p, &r, &result, n, tau, test, m)?,
            };
            write_json(&report, &out)?;
        }
        Command::Montecarlo { config, out, log } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let table = run_experiment(&cfg)?;
            if table.failures > 0 {
                eprintln!("{} failed attempts were redrawn", table.failures);
            }
            let mut w = output(&out)?;
            table.write_csv(&mut w)?;
            w.flush()?;
            if let Some(path) = log {
                table.write_log_csv(BufWriter::new(File::create(path)?))?;
            }
        }
        Command::Qq {
            input,
            column,
            reference,
            procedure,
            test,
            scale_sqrt_n,
            out,
        } => {
            let values = read_statistics(&input, &column, procedure, test, scale_sqrt_n)?;
            let pairs = qq_data(&values, reference)?;
            let mut w = output(&out)?;
            write_qq_csv(&pairs, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn read_statistics(
    path: &Path,
    column: &str,
    procedure: Option<Procedure>,
    test: Option<GofTest>,
    scale_sqrt_n: bool,
) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let col = find(column).ok_or_else(|| Error::Parse(format!("no column '{column}'")))?;
    let need = |name: &str| find(name).ok_or_else(|| Error::Parse(format!("no column '{name}'")));
    let proc_col = procedure.map(|_| need("procedure")).transpose()?;
    let test_col = test.map(|_| need("test")).transpose()?;
    let n_col = scale_sqrt_n.then(|| need("n_effective")).transpose()?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if let (Some(c), Some(p)) = (proc_col, procedure) {
            if rec.get(c).map(str::parse::<Procedure>).transpose()? != Some(p) {
                continue;
            }
        }
        if let (Some(c), Some(t)) = (test_col, test) {
            if rec.get(c).map(str::parse::<GofTest>).transpose()? != Some(t) {
                continue;
            }
        }
        let parse = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {row}: not a number")))
        };
        let mut v = parse(col)?;
        if let Some(c) = n_col {
            v *= parse(c)?.sqrt();
        }
        out.push(v);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
