use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fibersim_core::metrics::{attach_multipliers, CsvRow};
use fibersim_core::sweep::SweepError;
use fibersim_core::{
    bandwidth_ablation, delta_eta, emit_csv, emit_plots, parse_config, read_sweep_csv, run_sweep, ConfigError,
    JobConfig, Quantum, SweepRow, SweepSpec,
};

const RESULTS_FILE: &str = "results.csv";
const DELTA_FILE: &str = "delta.csv";
const ABLATION_FILE: &str = "ablation.csv";

/// Two-datacenter training simulator: fiber latency vs compute-communication overlap.
#[derive(Parser)]
#[command(name = "fibersim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for batch runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the simulation time quantum in picoseconds.
    #[arg(long = "quantum-ps", global = true)]
    quantum_ps: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and print its result row.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the trace dump.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the event trace as `trace.tsv`.
        #[arg(long)]
        trace: bool,
    },
    /// Expand a grid, simulate every point and write CSV tables.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        /// Also write SVG figures.
        #[arg(long)]
        plots: bool,
        /// Write one event trace per scenario under `traces/`.
        #[arg(long)]
        trace: bool,
    },
    /// Compare each grid point at its inter-DC bandwidth and at twice that.
    AblateBandwidth {
        /// Grid to ablate (default: the 256-GPU grid).
        #[arg(long)]
        grid: Option<PathBuf>,
        #[command(flatten)]
        output: OptionalOutputArgs,
    },
    /// Regenerate figures from an existing results table.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Results table to read (default: OUT/results.csv).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: PathBuf,
    /// Replace existing output files.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct OptionalOutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Debug)]
enum Failure {
    Io(PathBuf, io::Error),
    Config(String),
    Simulation(String),
    Exists(PathBuf),
    Output(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(..) => 3,
            Failure::Config(_) => 4,
            Failure::Simulation(_) => 5,
            Failure::Exists(_) => 6,
            Failure::Output(_) => 7,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Simulation(m) => write!(f, "simulation failed: {m}"),
            Failure::Exists(p) => write!(f, "{} already exists (pass --overwrite to replace it)", p.display()),
            Failure::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Simulation { .. } => Failure::Simulation(e.to_string()),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))
}

fn guard(path: &Path, overwrite: bool) -> Result<(), Failure> {
    if path.exists() && !overwrite {
        return Err(Failure::Exists(path.to_path_buf()));
    }
    Ok(())
}

struct Settings {
    jobs: usize,
    quantum: Option<Quantum>,
}

impl Settings {
    fn apply(&self, configs: &mut [JobConfig]) {
        if let Some(q) = self.quantum {
            for c in configs {
                c.quantum = q;
            }
        }
    }
}

fn csv_bytes<R: CsvRow>(rows: &[R]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    emit_csv(rows, &mut buf).map_err(|e| Failure::Output(e.to_string()))?;
    Ok(buf)
}

fn trace_name(index: usize, c: &JobConfig) -> String {
    format!(
        "{index:04}_{}_{}_{}_{}gpu_{}m.tsv",
        c.model.name,
        c.gpu.name,
        c.topology.fiber.kind,
        c.topology.total_gpus(),
        c.topology.inter_distance.meters()
    )
}

fn cmd_run(settings: &Settings, config: &Path, out: Option<&Path>, trace: bool) -> Result<(), Failure> {
    let mut configs = vec![parse_config(&read(config)?)?];
    settings.apply(&mut configs);
    let (rows, traces) = run_sweep(&configs, 1)?;
    let mut stdout = io::stdout().lock();
    stdout.write_all(&csv_bytes(&rows)?).map_err(|e| Failure::Io("<stdout>".into(), e))?;
    if trace {
        let dir = out.unwrap_or(Path::new("."));
        create_dir(dir)?;
        write_file(&dir.join("trace.tsv"), &traces[0].to_tsv())?;
    }
    Ok(())
}

fn cmd_sweep(settings: &Settings, grid: &Path, output: &OutputArgs, plots: bool, trace: bool) -> Result<(), Failure> {
    let spec = SweepSpec::parse(&read(grid)?)?;
    let mut configs = spec.expand()?;
    settings.apply(&mut configs);
    let results = output.out.join(RESULTS_FILE);
    guard(&results, output.overwrite)?;
    let (rows, traces) = run_sweep(&configs, settings.jobs)?;

    create_dir(&output.out)?;
    write_file(&results, &csv_bytes(&rows)?)?;
    let (deltas, unpaired) = delta_eta(&rows);
    if !unpaired.is_empty() {
        eprintln!("warning: {} rows have no other-fiber partner", unpaired.len());
    }
    write_file(&output.out.join(DELTA_FILE), &csv_bytes(&deltas)?)?;

    if trace {
        let dir = output.out.join("traces");
        create_dir(&dir)?;
        for (i, (c, t)) in configs.iter().zip(&traces).enumerate() {
            write_file(&dir.join(trace_name(i, c)), &t.to_tsv())?;
        }
    }
    if plots {
        let made = emit_plots(&rows, &output.out).map_err(|e| Failure::Output(e.to_string()))?;
        for w in made.warnings {
            eprintln!("warning: {w}");
        }
    }
    println!("{} scenarios -> {}", rows.len(), results.display());
    Ok(())
}

fn cmd_ablate(settings: &Settings, grid: Option<&Path>, output: &OptionalOutputArgs) -> Result<(), Failure> {
    let spec = match grid {
        Some(p) => SweepSpec::parse(&read(p)?)?,
        None => SweepSpec::table1(256),
    };
    let mut configs = spec.expand()?;
    settings.apply(&mut configs);
    if let Some(dir) = &output.out {
        guard(&dir.join(ABLATION_FILE), output.overwrite)?;
    }
    let report = bandwidth_ablation(&configs, settings.jobs)?;
    println!("points: {}", report.points.len());
    if let Some(p) = report.argmax() {
        println!(
            "max η improvement: {:.6} ({} {} {} {} km)",
            report.max_improvement(),
            p.base.model,
            p.base.gpu,
            p.base.fiber,
            p.base.distance.km()
        );
        println!("max serialization share: {:.6}", report.max_serialization_share());
    }
    if let Some(dir) = &output.out {
        create_dir(dir)?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf).map_err(|e| Failure::Output(e.to_string()))?;
        write_file(&dir.join(ABLATION_FILE), &buf)?;
    }
    Ok(())
}

fn cmd_report(out: &Path, csv: Option<&Path>) -> Result<(), Failure> {
    let path = csv.map(Path::to_path_buf).unwrap_or_else(|| out.join(RESULTS_FILE));
    let text = read(&path)?;
    let mut rows: Vec<SweepRow> =
        read_sweep_csv(text.as_bytes()).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if rows.iter().any(|r| r.multiplier.is_none()) && attach_multipliers(&mut rows).is_err() {
        eprintln!("warning: no 0.3 km baseline rows; multipliers unavailable");
    }
    create_dir(out)?;
    let made = emit_plots(&rows, out).map_err(|e| Failure::Output(e.to_string()))?;
    for w in &made.warnings {
        eprintln!("warning: {w}");
    }
    for f in &made.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quantum = match cli.quantum_ps.map(Quantum::new) {
        Some(None) => {
            eprintln!("error: --quantum-ps must be at least 1");
            return ExitCode::from(2);
        }
        Some(q) => q,
        None => None,
    };
    let settings = Settings { jobs: cli.jobs.unwrap_or(0), quantum };
    let result = match &cli.command {
        Command::Run { config, out, trace } => cmd_run(&settings, config, out.as_deref(), *trace),
        Command::Sweep { grid, output, plots, trace } => cmd_sweep(&settings, grid, output, *plots, *trace),
        Command::AblateBandwidth { grid, output } => cmd_ablate(&settings, grid.as_deref(), output),
        Command::Report { out, csv } => cmd_report(out, csv.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
