//! `mixavg`: sweep Gaussian parsimonious mixtures over a grid, average the
//! models in Occam's window, simulate labeled data, and compare partitions.
//!
//! Exit codes: 0 on success, 2 on invalid input or arguments, 3 when no
//! model in the grid could be fitted.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mixavg::ari::{adjusted_rand_index, rand_index};
use mixavg::gpcm::{CovStructure, EmConfig};
use mixavg::occam::DEFAULT_WINDOW_C;
use mixavg::report::{average_sweep, read_json, ClusteringReport, RunReport, SweepReport};
use mixavg::simgen::{self, generate, separated_clusters_spec, with_noise_column};
use mixavg::sweep::{run_sweep, SweepConfig};
use mixavg::{Dataset, Error, Partition};

/// Environment variable holding the number of worker threads.
const WORKERS_ENV: &str = "MIXAVG_WORKERS";

const EXIT_INVALID: u8 = 2;
const EXIT_NO_FIT: u8 = 3;

#[derive(Parser)]
#[command(name = "mixavg", version, about = "Occam's-window averaging of Gaussian mixture clusterings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every (structure, G) cell and print the BIC table.
    Sweep(SweepCmd),
    /// Sweep (or load a saved sweep), then average the models in Occam's window.
    Average(AverageCmd),
    /// Write a simulated labeled dataset and its metadata sidecar.
    Simulate(SimulateCmd),
    /// Adjusted Rand index between two label columns.
    Ari(AriCmd),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column holding known labels; excluded from the features.
    #[arg(long)]
    labels: Option<String>,
    /// Center and scale every feature to unit sample variance first.
    #[arg(long)]
    standardize: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Component range, `lo:hi` or a single value.
    #[arg(long, default_value = "1:9")]
    g: String,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated structure names; all fittable structures by default.
    #[arg(long, value_delimiter = ',')]
    structures: Vec<String>,
    /// EM convergence tolerance on the Aitken-extrapolated log-likelihood.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AverageCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Resume from a report written by `sweep` instead of refitting.
    #[arg(long)]
    from_sweep: Option<PathBuf>,
    /// Occam's window constant; models within 2 log c of the best BIC are kept.
    #[arg(long, default_value_t = DEFAULT_WINDOW_C)]
    c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-clustering CSV exports.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    /// Two triangles and two Gaussians in the plane (500 points).
    Scenario3,
    /// Spherical Gaussian clusters spaced along the first axis.
    Separated,
    /// `separated` plus one uniform noise column (an analogue, not a
    /// separation-index construction).
    SeparatedNoise,
}

#[derive(Args)]
struct SimulateCmd {
    #[arg(value_enum)]
    scenario: Scenario,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Number of clusters (separated scenarios).
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Dimension (separated scenarios).
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Points per cluster (separated scenarios).
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Distance between consecutive cluster means, in standard deviations.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
}

#[derive(Args)]
struct AriCmd {
    a: PathBuf,
    b: PathBuf,
    /// Label column in the first file (default `label`, or the only column).
    #[arg(long)]
    column_a: Option<String>,
    #[arg(long)]
    column_b: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| match cli.command {
        Command::Sweep(cmd) => cmd_sweep(cmd),
        Command::Average(cmd) => cmd_average(cmd),
        Command::Simulate(cmd) => cmd_simulate(cmd),
        Command::Ari(cmd) => cmd_ari(cmd),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::AllCellsFailed => EXIT_NO_FIT,
        _ => EXIT_INVALID,
    }
}

fn configure_workers() -> Result<(), Error> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))
}

fn parse_range(s: &str) -> Result<(usize, usize), Error> {
    let bad = || Error::InvalidArgument(format!("component range must look like 1:9 or 3, got {s:?}"));
    let (lo, hi) = match s.split_once(':') {
        Some((lo, hi)) => (lo, hi),
        None => (s, s),
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

impl GridArgs {
    fn config(&self) -> Result<SweepConfig, Error> {
        let (g_min, g_max) = parse_range(&self.g)?;
        let structures = if self.structures.is_empty() {
            CovStructure::FITTABLE.to_vec()
        } else {
            self.structures
                .iter()
                .map(|s| s.parse::<CovStructure>())
                .collect::<Result<Vec<_>, _>>()?
        };
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(SweepConfig {
            structures,
            g_min,
            g_max,
            restarts: self.restarts,
            base_seed: self.seed,
            em: EmConfig {
                tol: self.tol,
                max_iter: self.max_iter,
            },
        })
    }
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Error> {
        let data = Dataset::load_csv(&self.input, self.labels.as_deref())?;
        if self.standardize {
            data.standardize()
        } else {
            Ok(data)
        }
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => mixavg::report::write_json(value, path),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn cmd_sweep(cmd: SweepCmd) -> Result<(), Error> {
    let cfg = cmd.grid.config()?;
    let data = cmd.data.load()?;
    let sweep = run_sweep(&data, &cfg)?;
    let report = SweepReport::new(&data, sweep)?;
    emit(&report, cmd.out.as_deref())
}

fn cmd_average(cmd: AverageCmd) -> Result<(), Error> {
    let data = cmd.data.load()?;
    let sweep = match &cmd.from_sweep {
        Some(path) => {
            let saved: SweepReport = read_json(path)?;
            if saved.n != data.n() || saved.p != data.p() {
                return Err(Error::InvalidArgument(format!(
                    "saved sweep is for {}×{} data, input is {}×{}",
                    saved.n,
                    saved.p,
                    data.n(),
                    data.p()
                )));
            }
            saved.sweep
        }
        None => run_sweep(&data, &cmd.grid.config()?)?,
    };
    if sweep.entries.is_empty() {
        return Err(Error::AllCellsFailed);
    }
    let report = average_sweep(&data, &sweep, cmd.c)?;
    if let Some(dir) = &cmd.export_dir {
        export(&report, dir)?;
    }
    emit(&report, cmd.out.as_deref())
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `partitions.csv` (one-based MAP labels of every clustering) and
/// one `soft_<name>.csv` of membership probabilities per clustering.
fn export(report: &RunReport, dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let c = &report.clusterings;
    let named: [(&str, &ClusteringReport); 4] = [
        ("best", &c.best),
        ("aap_case_i", &c.aap_case_i),
        ("aap_case_ii", &c.aap_case_ii),
        ("model_average", &c.model_average),
    ];
    let path = dir.join("partitions.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["observation".to_string()];
    header.extend(named.iter().map(|(name, _)| name.to_string()));
    w.write_record(&header)?;
    for i in 0..report.n {
        let mut row = vec![(i + 1).to_string()];
        row.extend(named.iter().map(|(_, r)| r.hard[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_error(&path))?;

    for (name, r) in named {
        let path = dir.join(format!("soft_{name}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        let header: Vec<String> = (1..=r.g).map(|g| format!("z{g}")).collect();
        w.write_record(&header)?;
        for row in &r.soft {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush().map_err(io_error(&path))?;
    }
    Ok(())
}

fn cmd_simulate(cmd: SimulateCmd) -> Result<(), Error> {
    let spec = match cmd.scenario {
        Scenario::Scenario3 => simgen::scenario3_spec(),
        Scenario::Separated | Scenario::SeparatedNoise => {
            if cmd.k == 0 || cmd.p == 0 {
                return Err(Error::InvalidArgument("need at least one cluster and one dimension".into()));
            }
            let spec = separated_clusters_spec(cmd.k, cmd.p, cmd.n, cmd.separation);
            match cmd.scenario {
                Scenario::SeparatedNoise => {
                    // span the informative axis with a margin of three sd
                    let high = cmd.separation * (cmd.k - 1) as f64 + 3.0;
                    with_noise_column(spec, -3.0, high)
                }
                _ => spec,
            }
        }
    };
    let sim = generate(&spec, cmd.seed)?;
    let meta = sim.save(&cmd.out)?;
    eprintln!(
        "wrote {} rows to {} (metadata {})",
        sim.dataset.n(),
        cmd.out.display(),
        meta.display()
    );
    Ok(())
}

fn read_label_column(path: &Path, column: Option<&str>) -> Result<Vec<String>, Error> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    })?;
    let headers = rdr.headers()?.clone();
    let wanted = column.unwrap_or(simgen::LABEL_COLUMN);
    let idx = match headers.iter().position(|h| h == wanted) {
        Some(i) => i,
        None if column.is_none() && headers.len() == 1 => 0,
        None => return Err(Error::LabelColumnNotFound(wanted.to_string())),
    };
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let value = record.get(idx).ok_or_else(|| {
            Error::InvalidArgument(format!("{}: row {} has no column {}", path.display(), labels.len() + 1, idx + 1))
        })?;
        labels.push(value.trim().to_string());
    }
    Ok(labels)
}

#[derive(Serialize)]
struct AriReport {
    n: usize,
    clusters_a: usize,
    clusters_b: usize,
    ari: f64,
    rand_index: f64,
}

fn cmd_ari(cmd: AriCmd) -> Result<(), Error> {
    let a = Partition::from_labels(&read_label_column(&cmd.a, cmd.column_a.as_deref())?);
    let b = Partition::from_labels(&read_label_column(&cmd.b, cmd.column_b.as_deref())?);
    let report = AriReport {
        n: a.len(),
        clusters_a: a.k(),
        clusters_b: b.k(),
        ari: adjusted_rand_index(&a, &b)?,
        rand_index: rand_index(&a, &b)?,
    };
    emit(&report, None)
}
