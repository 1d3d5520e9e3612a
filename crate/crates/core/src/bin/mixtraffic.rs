#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use mixtraffic::analysis::{self, LATERAL_BIN};
use mixtraffic::config;
use mixtraffic::engine::{run, SimulationConfig, SimulationError};
use mixtraffic::navigation::NavigationTerms;
use mixtraffic::segmentation::{segment_record, SegmentationConfig, MANEUVER_THRESHOLD};
use mixtraffic::speed::{FreeDistance, SpeedTerms};
use mixtraffic::{ModeClass, TrajectoryRecord};

#[derive(Parser)]
#[command(
    name = "mixtraffic",
    version,
    about = "Mixed car/motorcycle traffic simulation and trajectory analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its trajectory and manifest.
    Simulate(SimulateArgs),
    /// Detect steering events and lateral maneuvers in a trajectory file.
    Segment(SegmentArgs),
    /// Compute histograms, speed/spacing fits and observer speeds.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// key = value file; a manifest from a previous run works too.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set seed=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Road azimuth in radians, used when the input has no theta_road column.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    road_azimuth: f64,
    /// Road period for unwrapping positions of periodic simulations.
    #[arg(long)]
    period: Option<f64>,
    /// Lateral shift in metres above which a maneuver is reported.
    #[arg(long, default_value_t = MANEUVER_THRESHOLD)]
    threshold: f64,
    #[arg(long, short)]
    out: PathBuf,
}

const METRICS: &[&str] = &["histogram", "fd", "observer", "snapshots", "lanes"];

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Manifest or config file providing the road geometry.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lateral histogram of one mode (`car` or `moto`).
    #[arg(long, value_name = "MODE")]
    histogram: Option<String>,
    /// Only samples at or after this time enter the histogram and lane statistic.
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    #[arg(long, default_value_t = LATERAL_BIN)]
    bin: f64,
    /// Speed/spacing fit over periodic snapshots.
    #[arg(long)]
    fd: bool,
    /// Follower mode used by the fit (`car`, `moto` or `all`).
    #[arg(long, default_value = "car")]
    fd_mode: String,
    #[arg(long, default_value_t = 90.0)]
    period: f64,
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    /// Moving-observer window: total extent in metres and seconds.
    #[arg(long, num_args = 2, value_names = ["METRES", "SECONDS"])]
    observer: Option<Vec<f64>>,
    /// Write the snapshot rows used by the fit.
    #[arg(long)]
    snapshots: bool,
    /// Motorcycle samples near lane boundaries versus lane centers.
    #[arg(long)]
    lanes: bool,
    /// Request a metric by name. Repeatable.
    #[arg(long = "metric", value_name = "NAME")]
    metrics: Vec<String>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_error(path, e))
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<SimulationConfig, CliError> {
    let mut cfg = match path {
        Some(p) => config::parse(&read_to_string(p)?)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?,
        None => SimulationConfig::default(),
    };
    for o in overrides {
        let (k, v) = config::split_assignment(o)
            .ok_or_else(|| CliError::Invalid(format!("override `{o}` is not KEY=VALUE")))?;
        config::apply(&mut cfg, k, v).map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    Ok(cfg)
}

fn free_str(d: FreeDistance) -> String {
    d.value().map_or("inf".to_string(), |v| v.to_string())
}

fn write_navigation(w: &mut impl Write, terms: &[(u64, NavigationTerms)]) -> io::Result<()> {
    writeln!(w, "step,agent,term,other,spacing,magnitude,x,y")?;
    for (step, t) in terms {
        let a = t.agent;
        writeln!(w, "{step},{a},target,,,,{},{}", t.target.x, t.target.y)?;
        for n in &t.neighbours {
            writeln!(
                w,
                "{step},{a},agent,{},{},{},{},{}",
                n.other, n.anticipated_spacing, n.magnitude, n.normal.x, n.normal.y
            )?;
        }
        for c in &t.curbs {
            writeln!(
                w,
                "{step},{a},curb,{},,{},{},{}",
                c.curb.as_str(),
                c.magnitude,
                c.normal.x,
                c.normal.y
            )?;
        }
        writeln!(w, "{step},{a},desired,,,,{},{}", t.desired.x, t.desired.y)?;
    }
    Ok(())
}

fn write_speed(w: &mut impl Write, terms: &[(u64, SpeedTerms)]) -> io::Result<()> {
    writeln!(w, "step,agent,leaders,curbs,free,free_curb,speed")?;
    for (step, t) in terms {
        let leaders: Vec<String> = t.leaders.iter().map(u32::to_string).collect();
        let curbs: Vec<&str> = t.curbs.iter().map(|c| c.as_str()).collect();
        writeln!(
            w,
            "{step},{},{},{},{},{},{}",
            t.agent,
            leaders.join(" "),
            curbs.join(" "),
            free_str(t.free),
            free_str(t.free_curb),
            t.speed
        )?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(args.config.as_deref(), &args.overrides)?;
    cfg.validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    ensure_dir(&args.out)?;
    let out = run(&cfg).map_err(|e| match e {
        SimulationError::Config(c) => CliError::Invalid(c.to_string()),
        SimulationError::Collision(a) => CliError::Runtime(format!("collision audit failed: {a}")),
        other => CliError::Runtime(other.to_string()),
    })?;

    write_file(&args.out.join("trajectory.csv"), |w| {
        out.record.write_csv(w)
    })?;
    write_file(&args.out.join("manifest.txt"), |w| {
        w.write_all(config::to_manifest(&cfg).as_bytes())?;
        writeln!(w, "# agents = {}", out.final_state.len())?;
        writeln!(w, "# placement_attempt = {}", out.placement_attempt)
    })?;
    if cfg.debug_navigation {
        write_file(&args.out.join("nav_terms.csv"), |w| {
            write_navigation(w, &out.navigation)
        })?;
    }
    if cfg.debug_speed {
        write_file(&args.out.join("speed_terms.csv"), |w| {
            write_speed(w, &out.speed)
        })?;
    }
    Ok(())
}

fn read_record(path: &Path) -> Result<TrajectoryRecord, CliError> {
    let text = read_to_string(path)?;
    if text.trim().is_empty() {
        eprintln!("warning: {} is empty", path.display());
        return Ok(TrajectoryRecord::default());
    }
    TrajectoryRecord::read_csv(text.as_bytes())
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn segment(args: SegmentArgs) -> Result<(), CliError> {
    if !(args.threshold > 0.0) {
        return Err(CliError::Invalid("threshold must be positive".into()));
    }
    if args.period.is_some_and(|p| !(p > 0.0 && p.is_finite())) {
        return Err(CliError::Invalid("period must be positive".into()));
    }
    let record = read_record(&args.input)?;
    let cfg = SegmentationConfig {
        maneuver_threshold: args.threshold,
        period: args.period,
        ..Default::default()
    };
    let results = segment_record(&record, args.road_azimuth, &cfg);
    ensure_dir(&args.out)?;
    write_file(&args.out.join("events.csv"), |w| {
        writeln!(w, "id,s,t")?;
        for r in &results {
            for e in &r.events {
                writeln!(w, "{},{},{}", r.id, e.s, e.t)?;
            }
        }
        Ok(())
    })?;
    write_file(&args.out.join("segments.csv"), |w| {
        writeln!(w, "id,s_start,s_end,convexity,label,shift")?;
        for r in &results {
            for s in &r.segments {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.id,
                    s.s_start,
                    s.s_end,
                    s.convexity.map_or("none", |c| c.as_str()),
                    s.classification,
                    s.shift
                )?;
            }
        }
        Ok(())
    })?;
    write_file(&args.out.join("status.csv"), |w| {
        writeln!(w, "id,status,events,segments,maneuvers,flagged")?;
        for r in &results {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.id,
                r.status.as_str(),
                r.events.len(),
                r.segments.len(),
                r.maneuvers(),
                r.flagged()
            )?;
        }
        Ok(())
    })?;
    if results.is_empty() {
        eprintln!("warning: no trajectories in {}", args.input.display());
    }
    Ok(())
}

fn parse_mode(text: &str) -> Result<ModeClass, CliError> {
    text.parse().map_err(CliError::Invalid)
}

fn analyze(mut args: AnalyzeArgs) -> Result<(), CliError> {
    for m in &args.metrics {
        match m.as_str() {
            "histogram" => {
                args.histogram.get_or_insert_with(|| "moto".to_string());
            }
            "fd" => args.fd = true,
            "observer" => {
                args.observer.get_or_insert_with(|| vec![60.0, 2.0]);
            }
            "snapshots" => args.snapshots = true,
            "lanes" => args.lanes = true,
            other => {
                return Err(CliError::Invalid(format!(
                    "unknown metric `{other}`; valid metrics: {}",
                    METRICS.join(", ")
                )))
            }
        }
    }
    let fd_mode = match args.fd_mode.as_str() {
        "all" => None,
        m => Some(parse_mode(m)?),
    };
    let histogram_mode = args.histogram.as_deref().map(parse_mode).transpose()?;
    let road = load_config(args.config.as_deref(), &[])?.road;
    let period = Some(road.length);
    let record = read_record(&args.input)?;
    ensure_dir(&args.out)?;
    let invalid = |e: analysis::AnalysisError| CliError::Invalid(e.to_string());

    if let Some(mode) = histogram_mode {
        let h = analysis::lateral_histogram(&record, mode, args.from, args.bin, road.width())
            .map_err(invalid)?;
        write_file(&args.out.join("histogram.csv"), |w| {
            writeln!(w, "bin_start,bin_end,count,density")?;
            for (a, b, c, d) in h.rows() {
                writeln!(w, "{a},{b},{c},{d}")?;
            }
            Ok(())
        })?;
    }

    if args.fd || args.snapshots {
        let snaps =
            analysis::extract_snapshots(&record, args.period, args.offset).map_err(invalid)?;
        if args.snapshots {
            let rows = snaps.iter().flat_map(|s| s.rows.iter().cloned()).collect();
            let rec = TrajectoryRecord::from_rows(rows);
            write_file(&args.out.join("snapshots.csv"), |w| rec.write_csv(w))?;
        }
        if args.fd {
            let points: Vec<(f64, analysis::SpacingPoint)> = snaps
                .iter()
                .flat_map(|s| {
                    analysis::pairwise_spacing(&s.rows, period)
                        .into_iter()
                        .map(move |p| (s.t, p))
                })
                .collect();
            write_file(&args.out.join("fd_points.csv"), |w| {
                writeln!(w, "t,id,mode,leader,leader_mode,spacing,v")?;
                for (t, p) in &points {
                    writeln!(
                        w,
                        "{t},{},{},{},{},{},{}",
                        p.id, p.mode, p.leader, p.leader_mode, p.spacing, p.v
                    )?;
                }
                Ok(())
            })?;
            let selected: Vec<(f64, f64)> = points
                .iter()
                .map(|(_, p)| p)
                .filter(|p| fd_mode.is_none_or(|m| p.mode == m && p.leader_mode == m))
                .map(|p| (p.spacing, p.v))
                .collect();
            let fit = analysis::fit_speed_spacing(&selected).map_err(invalid)?;
            write_file(&args.out.join("fd_fit.csv"), |w| {
                writeln!(
                    w,
                    "breakpoint,time_gap,v_free,jam_spacing,rms,points,degenerate"
                )?;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    fit.breakpoint,
                    fit.time_gap,
                    fit.v_free,
                    fit.jam_spacing,
                    fit.rms,
                    selected.len(),
                    fit.degenerate
                )
            })?;
        }
    }

    if let Some(window) = &args.observer {
        let obs = analysis::moving_observer_speeds(&record, window[0], window[1], period)
            .map_err(invalid)?;
        let modes = [ModeClass::Car, ModeClass::Motorcycle];
        write_file(&args.out.join("observer_cdf.csv"), |w| {
            writeln!(w, "mode,difference,cdf")?;
            for m in modes {
                for (x, p) in obs.cdf(m) {
                    writeln!(w, "{m},{x},{p}")?;
                }
            }
            Ok(())
        })?;
        write_file(&args.out.join("observer_pdf.csv"), |w| {
            writeln!(w, "mode,bin_start,density")?;
            for m in modes {
                for (x, d) in obs.pdf(m, 0.25) {
                    writeln!(w, "{m},{x},{d}")?;
                }
            }
            Ok(())
        })?;
        write_file(&args.out.join("observer_summary.csv"), |w| {
            writeln!(w, "mode,samples,fraction_slower")?;
            for m in modes {
                let n = obs.differences.get(&m).map_or(0, Vec::len);
                let f = obs
                    .fraction_slower(m)
                    .map_or(String::new(), |f| f.to_string());
                writeln!(w, "{m},{n},{f}")?;
            }
            Ok(())
        })?;
    }

    if args.lanes {
        let lf = analysis::lane_formation(&record, &road, args.from, 1.0);
        write_file(&args.out.join("lane_formation.csv"), |w| {
            writeln!(w, "boundary,center,total,ratio")?;
            writeln!(
                w,
                "{},{},{},{}",
                lf.boundary,
                lf.center,
                lf.total,
                lf.ratio()
            )
        })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Segment(a) => segment(a),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
