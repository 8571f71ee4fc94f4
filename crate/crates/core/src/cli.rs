//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use faer::Par;
use serde_json::json;

use crate::bench::{self, CellSummary, SweepConfig, SweepReport};
use crate::error::{EqptError, Result};
use crate::estimators::Method;
use crate::io::{self, RunManifest};
use crate::linalg;
use crate::svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Exit status for an error.
pub fn exit_code(e: &EqptError) -> i32 {
    match e {
        EqptError::Dimension(_) | EqptError::Argument(_) => EXIT_USAGE,
        EqptError::Parse { .. } => EXIT_PARSE,
        EqptError::Numerical(_) => EXIT_NUMERICAL,
        EqptError::Io { .. } => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "eqpt",
    version,
    about = "Eigenanalysis-based estimation of unitary quantum processes"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Worker threads.
    #[arg(long, default_value_t = 1, global = true, value_parser = clap::value_parser!(u64).range(1..=1024))]
    jobs: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate one process from simulated noisy state estimates.
    Estimate(EstimateArgs),
    /// Run a sweep over methods, qubit counts and noise widths.
    Bench(BenchArgs),
    /// Run a small fixed sweep and print a comparison table.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    method: Method,

    /// Qubit count of a random process (required without --matrix).
    #[arg(long, required_unless_present = "matrix")]
    qubits: Option<u32>,

    /// Read the process from a matrix file instead of drawing it.
    #[arg(long, conflicts_with = "qubits")]
    matrix: Option<PathBuf>,

    /// Noise width of the simulated state estimates.
    #[arg(long, default_value_t = 0.0)]
    width: f64,

    /// Seed of the process and of the noise.
    #[arg(long, env = "EQPT_SEED", default_value_t = 1)]
    seed: u64,

    /// Where to write the estimated matrix; a manifest is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Sweep configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,

    #[arg(long, value_delimiter = ',')]
    qubits: Option<Vec<u32>>,

    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<f64>>,

    /// Trials per cell.
    #[arg(long)]
    trials: Option<usize>,

    /// Base seed of the sweep.
    #[arg(long, env = "EQPT_SEED")]
    seed: Option<u64>,

    #[arg(long)]
    eqpt5_max_qubits: Option<u32>,

    /// Leave timings out of the table (they go to the manifest instead).
    #[arg(long)]
    no_timing: bool,

    #[arg(long)]
    csv: PathBuf,

    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    /// Trials per cell (at most 20).
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..=20))]
    trials: u64,

    #[arg(long, env = "EQPT_SEED", default_value_t = 1)]
    seed: u64,

    #[arg(long)]
    csv: Option<PathBuf>,

    #[arg(long)]
    svg: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Reports go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let command: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let jobs = cli.jobs as usize;
    let outcome = match cli.command {
        Command::Estimate(a) => estimate(a, jobs, command),
        Command::Bench(a) => bench_cmd(a, jobs, command),
        Command::Demo(a) => demo(a, jobs, command),
    };
    match outcome {
        Ok(report) => {
            print!("{report}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn par_for(jobs: usize) -> Par {
    if jobs > 1 {
        Par::rayon(jobs)
    } else {
        Par::Seq
    }
}

fn estimate(a: EstimateArgs, jobs: usize, command: Vec<String>) -> Result<String> {
    let outcome = linalg::with_parallelism(par_for(jobs), || match (&a.matrix, a.qubits) {
        (Some(path), _) => bench::simulate(a.method, io::read_matrix(path)?, a.width, a.seed),
        (None, Some(q)) => bench::run_trial_detailed(a.method, q, a.width, a.seed),
        (None, None) => Err(EqptError::argument(
            "either --qubits or --matrix is required",
        )),
    })?;
    let r = &outcome.record;

    let mut report = String::new();
    let _ = writeln!(report, "method      {}", r.method);
    let _ = writeln!(report, "qubits      {}", r.qubits);
    let _ = writeln!(report, "dimension   {}", r.dimension);
    let _ = writeln!(report, "width       {:e}", r.width);
    let _ = writeln!(report, "seed        {}", r.seed);
    let _ = writeln!(report, "nrmse       {:.6e}", r.nrmse);
    let _ = writeln!(report, "unitarity   {:.3e}", r.diagnostics.unitarity_defect);
    let _ = writeln!(report, "estimator   {:.6} s", r.wall_time_s);
    let _ = writeln!(report, "total       {:.6} s", r.total_time_s);

    if let Some(path) = &a.output {
        io::write_matrix(path, outcome.estimate.matrix.as_ref())?;
        let mut manifest = RunManifest::new(
            command,
            a.seed,
            json!({
                "method": a.method,
                "qubits": r.qubits,
                "matrix": a.matrix,
                "width": a.width,
                "seed": a.seed,
                "jobs": jobs,
            }),
        );
        manifest.results = Some(json!({ "trial": r }));
        let manifest_path = io::manifest_path(path);
        manifest.write(&manifest_path)?;
        let _ = writeln!(
            report,
            "wrote       {} ({})",
            path.display(),
            manifest_path.display()
        );
    }
    Ok(report)
}

fn resolve_config(a: &BenchArgs, jobs: usize) -> Result<SweepConfig> {
    let mut config = match &a.config {
        Some(path) => io::read_config(path)?,
        None => SweepConfig::default(),
    };
    if let Some(m) = &a.methods {
        config.methods = m.clone();
    }
    if let Some(q) = &a.qubits {
        config.qubits = q.clone();
    }
    if let Some(w) = &a.widths {
        config.widths = w.clone();
    }
    if let Some(t) = a.trials {
        config.trials = t;
    }
    if let Some(s) = a.seed {
        config.base_seed = s;
    }
    if let Some(cap) = a.eqpt5_max_qubits {
        config.eqpt5_max_qubits = cap;
    }
    if a.no_timing {
        config.record_timing = false;
    }
    config.parallelism = jobs;
    config.validate()?;
    Ok(config)
}

fn table(cells: &[CellSummary], timing: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>6} {:>10} {:>6} {:>13} {:>13} {:>11}",
        "method", "qubits", "width", "trials", "mean_nrmse", "std_nrmse", "mean_time_s"
    );
    for c in cells {
        let time = if timing {
            format!("{:.4e}", c.mean_time_s)
        } else {
            "-".to_owned()
        };
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>10.1e} {:>6} {:>13.4e} {:>13.4e} {:>11}",
            c.method.id(),
            c.qubits,
            c.width,
            c.trials,
            c.mean_nrmse,
            c.std_nrmse,
            time
        );
    }
    out
}

fn sweep_results(report: &SweepReport) -> serde_json::Value {
    let times: Vec<_> = report
        .cells
        .iter()
        .map(|c| {
            json!({
                "method": c.method,
                "qubits": c.qubits,
                "width": c.width,
                "mean_time_s": c.mean_time_s,
                "median_time_s": c.median_time_s,
                "p90_time_s": c.p90_time_s,
            })
        })
        .collect();
    json!({
        "cell_times": times,
        "skipped": report.skipped,
        "total_time_s": report.total_time_s,
    })
}

fn write_sweep(
    report: &SweepReport,
    config: &SweepConfig,
    csv: &std::path::Path,
    svg_path: Option<&std::path::Path>,
    command: Vec<String>,
) -> Result<String> {
    io::write_text(csv, &io::format_csv(&report.cells, config.record_timing))?;
    let mut written = vec![csv.display().to_string()];
    if let Some(path) = svg_path {
        io::write_text(path, &svg::render(&report.cells))?;
        written.push(path.display().to_string());
    }
    let config_json = serde_json::to_value(config).unwrap_or_default();
    let mut manifest = RunManifest::new(command, config.base_seed, config_json);
    manifest.results = Some(sweep_results(report));
    let manifest_path = io::manifest_path(csv);
    manifest.write(&manifest_path)?;
    written.push(manifest_path.display().to_string());
    Ok(format!("wrote {}\n", written.join(", ")))
}

fn bench_cmd(a: BenchArgs, jobs: usize, command: Vec<String>) -> Result<String> {
    let config = resolve_config(&a, jobs)?;
    let report = bench::sweep(&config)?;
    let mut out = table(&report.cells, config.record_timing);
    for s in &report.skipped {
        let _ = writeln!(
            out,
            "skipped {} at {} qubits: {}",
            s.method, s.qubits, s.reason
        );
    }
    out += &write_sweep(&report, &config, &a.csv, a.svg.as_deref(), command)?;
    Ok(out)
}

/// The fixed sweep run by `demo`.
pub fn demo_config(trials: usize, base_seed: u64, jobs: usize) -> SweepConfig {
    SweepConfig {
        methods: vec![
            Method::Eqpt1,
            Method::Eqpt2,
            Method::Eqpt3,
            Method::Eqpt4,
            Method::Eqpt5,
        ],
        qubits: vec![4, 6, 8],
        widths: vec![0.0, 1e-4, 1e-3, 1e-2],
        trials,
        base_seed,
        parallelism: jobs,
        record_timing: true,
        eqpt5_max_qubits: 8,
    }
}

fn mean_of(cells: &[CellSummary], method: Method, qubits: u32, width: f64) -> Option<f64> {
    cells
        .iter()
        .find(|c| c.method == method && c.qubits == qubits && c.width == width)
        .map(|c| c.mean_nrmse)
}

fn demo(a: DemoArgs, jobs: usize, command: Vec<String>) -> Result<String> {
    let config = demo_config(a.trials as usize, a.seed, jobs);
    let report = bench::sweep(&config)?;
    let mut out = table(&report.cells, true);

    let _ = writeln!(out, "\nmean NRMSE relative to eqpt1:");
    for &q in &config.qubits {
        for &w in config.widths.iter().filter(|w| **w > 0.0) {
            let Some(base) = mean_of(&report.cells, Method::Eqpt1, q, w) else {
                continue;
            };
            let ratios: Vec<String> = config.methods[1..]
                .iter()
                .filter_map(|&m| {
                    mean_of(&report.cells, m, q, w).map(|v| format!("{m} {:.3}", v / base))
                })
                .collect();
            let _ = writeln!(out, "  q={q} w={w:e}: {}", ratios.join(", "));
        }
    }

    if let Some(path) = &a.csv {
        out += &write_sweep(&report, &config, path, a.svg.as_deref(), command)?;
    } else if let Some(path) = &a.svg {
        io::write_text(path, &svg::render(&report.cells))?;
    }

    let worst = report
        .records
        .iter()
        .filter(|r| r.width == 0.0)
        .max_by(|x, y| x.nrmse.total_cmp(&y.nrmse));
    if let Some(r) = worst {
        if !(r.nrmse < 1e-8) {
            print!("{out}");
            return Err(EqptError::numerical(format!(
                "noiseless {} at {} qubits reached nrmse {:.3e} (seed {})",
                r.method, r.qubits, r.nrmse, r.seed
            )));
        }
        let _ = writeln!(out, "noiseless check passed (worst nrmse {:.3e})", r.nrmse);
    }
    Ok(out)
}
