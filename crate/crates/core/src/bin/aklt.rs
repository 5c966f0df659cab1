//! Command-line front end: run presets or scenario files, sweep a parameter,
//! list presets, re-fit a stored time series.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aklt_stabilizer::analysis::{fit_exponential, FitWindow, AKLT_POPULATION, DEFAULT_FIT_START_NS};
use aklt_stabilizer::scenario::{
    preset, read_timeseries, run_scenario, sweep, sweep_preset, sweep_presets, write_outputs, Overrides, PresetInfo,
    ScenarioFile, SweepParam,
};
use aklt_stabilizer::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "aklt", version, about = "Driven-dissipative AKLT stabilization on qutrit chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series and summary.
    Run(RunArgs),
    /// Run a scenario once per parameter value and tabulate the fits.
    Sweep(SweepArgs),
    /// Compiled-in scenarios and sweeps.
    Presets {
        #[command(subcommand)]
        what: PresetsCommand,
    },
    /// Fit y = A exp(-b t) + C to a column of an existing timeseries.csv.
    Fit(FitArgs),
}

#[derive(Subcommand)]
enum PresetsCommand {
    List,
}

#[derive(Args)]
struct Source {
    /// Name of a compiled-in preset (see `presets list`).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Scenario file in TOML.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// Output directory; each run goes to a subdirectory named after it.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Master seed for trajectory runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the trajectory solver with this many trajectories.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trajectories: Option<u64>,
    /// Photon-number cutoff of every cavity.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Start of the fit window in ns.
    #[arg(long)]
    fit_start_ns: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trajectories: self.trajectories.map(|n| n as usize),
            photon_cutoff: self.cutoff,
            fit_start_ns: self.fit_start_ns,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    common: Common,
    /// Swept parameter: chi_scale, mismatch_percent, t1_us, tphi_us, n_sites,
    /// photon_cutoff or drive_variant. Optional for named sweeps.
    #[arg(long)]
    param: Option<String>,
    /// Comma-separated values; optional for named sweeps.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Option<Vec<String>>,
}

#[derive(Args)]
struct FitArgs {
    /// A timeseries.csv written by `run`.
    file: PathBuf,
    #[arg(long, default_value = AKLT_POPULATION)]
    column: String,
    #[arg(long, default_value_t = DEFAULT_FIT_START_NS)]
    fit_start_ns: f64,
    #[arg(long)]
    fit_end_ns: Option<f64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::UnknownPreset(_) | Error::SolverRefused(_) => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        // Integrator, trajectory and fit failures.
        _ => EXIT_SOLVER,
    }
}

fn load(source: &Source, common: &Common) -> Result<ScenarioFile, Error> {
    let mut file = match (&source.preset, &source.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => ScenarioFile::load(path)?,
        (None, None) => unreachable!("clap enforces a source"),
    };
    file.apply(&common.overrides());
    Ok(file)
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let file = load(&args.source, &args.common)?;
    eprintln!("running {} ...", file.name);
    let out = run_scenario(&file)?;
    let dir = args.common.out.join(&file.name);
    write_outputs(&out, &dir)?;
    match out.fit.as_ref().map(|f| &f.result) {
        Some(Ok(r)) => {
            let [_, eb, ec] = r.std_errors();
            println!(
                "{}: C = {:.4} ± {:.4}, b = {:.4e} ± {:.1e} /ns, 1/b = {:.1} ns ({:.1} s) -> {}",
                file.name,
                r.c,
                ec,
                r.b,
                eb,
                r.convergence_time_ns(),
                out.metadata.wall_clock_s,
                dir.display()
            );
        }
        Some(Err(e)) => println!("{}: fit failed: {e} ({:.1} s) -> {}", file.name, out.metadata.wall_clock_s, dir.display()),
        None => println!("{}: done ({:.1} s) -> {}", file.name, out.metadata.wall_clock_s, dir.display()),
    }
    Ok(())
}

fn do_sweep(args: &SweepArgs) -> Result<(), Error> {
    let named = args.source.preset.as_deref().and_then(sweep_preset);
    let (base, label) = match &named {
        Some(s) => {
            let mut f = preset(s.base)?;
            f.apply(&args.common.overrides());
            (f, s.name.to_string())
        }
        None => {
            let f = load(&args.source, &args.common)?;
            let label = f.name.clone();
            (f, label)
        }
    };
    let param: SweepParam = match (&args.param, &named) {
        (Some(p), _) => p.parse()?,
        (None, Some(s)) => s.param,
        (None, None) => return Err(Error::Config("--param is required unless --preset names a sweep".into())),
    };
    let values: Vec<String> = match (&args.values, &named) {
        (Some(v), _) => v.iter().filter(|s| !s.trim().is_empty()).cloned().collect(),
        (None, Some(s)) => s.values.clone(),
        (None, None) => return Err(Error::Config("--values is required unless --preset names a sweep".into())),
    };
    let dir = args.common.out.join(format!("{label}_{}", param.name()));
    let rows = sweep(&base, param, &values, Some(&dir), |row| match &row.outcome {
        Ok(r) => eprintln!("  {} = {}: C = {:.4}, 1/b = {:.1} ns", param.name(), row.value, r.c, r.convergence_time_ns()),
        Err(e) => eprintln!("  {} = {}: {e}", param.name(), row.value),
    })?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    println!("{} runs ({failed} failed) -> {}", rows.len(), dir.join("sweep.csv").display());
    Ok(())
}

fn fit(args: &FitArgs) -> Result<(), Error> {
    let (names, times, cols) = read_timeseries(Path::new(&args.file))?;
    let k = names.iter().position(|n| n == &args.column).ok_or_else(|| {
        Error::Config(format!("no column `{}` in {}; columns: {}", args.column, args.file.display(), names.join(", ")))
    })?;
    let window = FitWindow { start_ns: args.fit_start_ns, end_ns: args.fit_end_ns };
    let r = fit_exponential(&times, &cols[k], window)?;
    let [ea, eb, ec] = r.std_errors();
    let doc = serde_json::json!({
        "column": args.column,
        "A": r.a, "A_err": ea,
        "b_per_ns": r.b, "b_err": eb,
        "C": r.c, "C_err": ec,
        "convergence_time_ns": r.convergence_time_ns(),
        "convergence_time_err_ns": r.convergence_time_err_ns(),
        "window_ns": [r.fit_window.0, r.fit_window.1],
        "residual_rms": r.residual_rms,
        "n_points": r.n_points,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("plain JSON"));
    Ok(())
}

fn list() {
    println!("scenarios:");
    for p in PresetInfo::list() {
        println!("  {:<22} {}", p.name, p.description);
    }
    println!("sweeps (use with `sweep --preset`):");
    for s in sweep_presets() {
        println!("  {:<22} {} over {} = {}", s.name, s.description, s.param.name(), s.values.join(","));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => do_sweep(a),
        Command::Presets { what: PresetsCommand::List } => {
            list();
            Ok(())
        }
        Command::Fit(a) => fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
