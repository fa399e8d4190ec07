use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use riscbc::channel::MomentSet;
use riscbc::constellation::{
    active_na_alphabet, passive_na_alphabet, ApskConstellation, ConstellationExport, RingSchedule, SurfaceMode,
};
use riscbc::harness::{analytic_bounds, emit_results, run_sweep, DetectorKind, ExperimentSpec, HarnessError, SerPoint};
use riscbc::miso::{alternating_optimize, backscatter_stats, BeamformingReport, MisoChannel};

/// `println!` that exits quietly when stdout is a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            return Err(HarnessError::Io { path: "<stdout>".into(), source: e });
        }
    }};
}

#[derive(Parser)]
#[command(name = "riscbc", version, about = "RIS backscatter with APSK: constellation design, SER bounds and Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search ring radius ratios maximizing the minimum distance.
    Optimize(OptimizeArgs),
    /// Print the element-count alphabet and bit map.
    Alphabet(SpecArgs),
    /// Monte Carlo SER sweep with analytic bounds.
    Simulate(RunArgs),
    /// Analytic union bounds only.
    Analyze(RunArgs),
    /// Beamform a multi-antenna transmitter, then sweep.
    Miso(MisoArgs),
    /// Dump the cascade and direct-link envelope moments.
    Moments(SpecArgs),
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long, default_value = "4+12")]
    schedule: String,
    /// Active PSK order.
    #[arg(long = "A", default_value_t = 4)]
    active_order: usize,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Emit the full constellation as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SpecArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<SurfaceMode>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long = "A")]
    active_order: Option<usize>,
    /// Number of surface elements.
    #[arg(long = "N")]
    n_elements: Option<usize>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Comma-separated transmit powers in dBm.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pt: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_parser = parse_detector)]
    detector: Option<DetectorKind>,
    /// Candidates kept by the low-complexity detector.
    #[arg(long = "I")]
    keep: Option<usize>,
    #[arg(long, env = "RISCBC_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "RISCBC_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// File stem for the CSV/JSON/plot outputs (defaults to the run id).
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Args)]
struct MisoArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Transmit antennas.
    #[arg(long = "Nt")]
    n_t: Option<usize>,
    #[arg(long)]
    symbols_per_channel: Option<u64>,
    /// Only run the beamforming for one channel and print it as JSON.
    #[arg(long)]
    beam_only: bool,
}

fn parse_detector(s: &str) -> Result<DetectorKind, String> {
    match s {
        "ml" => Ok(DetectorKind::Ml),
        "lc" => Ok(DetectorKind::Lc),
        _ => Err(format!("unknown detector `{s}` (ml | lc)")),
    }
}

fn load(args: &SpecArgs) -> Result<ExperimentSpec, HarnessError> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            ExperimentSpec::from_toml(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(v) = args.mode {
        spec.mode = v;
    }
    if let Some(v) = &args.schedule {
        spec.schedule = v.clone();
    }
    if let Some(v) = args.active_order {
        spec.active_order = v;
    }
    if let Some(v) = args.n_elements {
        spec.n_elements = v;
    }
    if let Some(v) = args.xi {
        spec.xi = v;
    }
    if let Some(v) = args.step {
        spec.grid_step = v;
    }
    Ok(spec)
}

fn load_run(args: &RunArgs) -> Result<(ExperimentSpec, usize), HarnessError> {
    let mut spec = load(&args.spec)?;
    if let Some(v) = &args.pt {
        spec.p_t_dbm = v.clone();
    }
    if let Some(v) = args.trials {
        spec.trials = v;
    }
    if let Some(v) = args.detector {
        spec.detector = v;
    }
    if let Some(v) = args.keep {
        spec.lc_keep = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok((spec, workers))
}

fn print_points(points: &[SerPoint]) -> Result<(), HarnessError> {
    out!(
        "{:>8} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "Pt_dBm", "ser_act", "ser_bsc", "ser_all", "bnd_act", "bnd_bsc", "bnd_all"
    );
    for p in points {
        out!(
            "{:>8.2} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            p.p_t_dbm, p.ser_active, p.ser_backscatter, p.ser_overall, p.bound_active, p.bound_backscatter, p.bound_overall
        );
    }
    Ok(())
}

fn write(points: &[SerPoint], spec: &ExperimentSpec, args: &RunArgs) -> Result<(), HarnessError> {
    let stem = args.stem.clone().unwrap_or_else(|| riscbc::harness::run_id(spec));
    let files = emit_results(points, spec, &args.out, &stem)?;
    eprintln!("wrote {}, {}, {}", files.csv.display(), files.json.display(), files.plot.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Optimize(a) => {
            let schedule = RingSchedule::parse(&a.schedule, a.active_order)?;
            let c = ApskConstellation::<f64>::optimize(schedule, a.step)?;
            if a.json {
                let export = ConstellationExport::new(&c, None);
                out!("{}", serde_json::to_string_pretty(&export).expect("serializes"));
            } else {
                out!("{}", c.schedule());
                for (i, g) in c.radius_ratios().iter().enumerate() {
                    out!("gamma_{} = {g:.2}", i + 1);
                }
                out!("min_sq_distance = {:.12}", c.min_sq_distance());
            }
        }
        Command::Alphabet(a) => {
            let spec = load(&a)?;
            let c = spec.constellation()?;
            let alphabet = match spec.mode {
                SurfaceMode::Passive => passive_na_alphabet(&c, spec.n_elements)?,
                _ => active_na_alphabet(&c, spec.n_elements, spec.xi)?,
            };
            out!("mode = {}, N = {}, counts = {:?}", alphabet.mode, alphabet.n_elements, alphabet.counts);
            let system = spec.system()?;
            for e in system.bit_map.entries() {
                out!(
                    "{}  x = {:+.4}{:+.4}j  N_a = {:>4}  psi = {:.6}",
                    system.bit_map.format_label(e.label),
                    e.x.re,
                    e.x.im,
                    e.n_a,
                    e.psi
                );
            }
        }
        Command::Simulate(a) => {
            let (spec, workers) = load_run(&a)?;
            let points = run_sweep(&spec, workers)?;
            print_points(&points)?;
            write(&points, &spec, &a)?;
        }
        Command::Analyze(a) => {
            let (spec, _) = load_run(&a)?;
            if spec.miso.is_some() {
                return Err(HarnessError::Config("no analytic bound for the multi-antenna link".into()));
            }
            let mut points = Vec::new();
            for (&p, raw) in spec.p_t_dbm.iter().zip(analytic_bounds(&spec)?) {
                let b = raw.expect("single-antenna bounds").clamped();
                let mut pt = SerPoint::from_counts(p, [0; 3], 1, [b.active, b.backscatter, b.overall]);
                pt.ser_active = f64::NAN;
                pt.ser_backscatter = f64::NAN;
                pt.ser_overall = f64::NAN;
                pt.trials = 0;
                points.push(pt);
            }
            print_points(&points)?;
            write(&points, &spec, &a)?;
        }
        Command::Miso(a) => {
            let (mut spec, workers) = load_run(&a.run)?;
            let mut m = spec.miso.clone().unwrap_or_default();
            if let Some(v) = a.n_t {
                m.n_t = v;
            }
            if let Some(v) = a.symbols_per_channel {
                m.symbols_per_channel = v;
            }
            spec.miso = Some(m);
            spec.validate()?;
            if a.beam_only {
                let system = spec.system()?;
                let stats = backscatter_stats(&system.bit_map);
                let mspec = spec.miso.as_ref().expect("set above");
                let ch = MisoChannel::sample(&system.channel, mspec.n_t, spec.seed, 0)?;
                let out = alternating_optimize(&ch, &stats, &mspec.ao_options())?;
                out!("{}", serde_json::to_string_pretty(&BeamformingReport::new(&out)).expect("serializes"));
                return Ok(());
            }
            let points = run_sweep(&spec, workers)?;
            print_points(&points)?;
            write(&points, &spec, &a.run)?;
        }
        Command::Moments(a) => {
            let spec = load(&a)?;
            let m = MomentSet::from_params(&spec.channel_params())?;
            out!("{}", serde_json::to_string_pretty(&m).expect("serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
