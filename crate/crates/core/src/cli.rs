//! `cv2x` command line: `run`, `sweep`, `channel-table`, `validate-trace`.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::channel::{breakpoint_distance, pathloss_los_db, pathloss_nlos_db, ChannelParams};
use crate::config::{load_config, ConfigFile};
use crate::engine::{run, SimConfig, SimResult};
use crate::error::{Error, Result};
use crate::metrics::STANDARD_QUANTILES;
use crate::mobility::load_trace;
use crate::sweep::{expand, run_cells, Axis, Preset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_OUTPUT: i32 = 4;
pub const EXIT_TRACE: i32 = 5;

pub const PRR_HEADER: [&str; 9] = [
    "scenario",
    "bandwidth_mhz",
    "n_ues",
    "rri_ms",
    "resel_prob",
    "seed",
    "prr",
    "x",
    "y",
];
pub const PIR_HEADER: [&str; 11] = [
    "scenario",
    "bandwidth_mhz",
    "n_ues",
    "seed",
    "q001",
    "q25",
    "q50",
    "q75",
    "q99",
    "q999",
    "n_samples",
];

#[derive(Debug, Parser)]
#[command(name = "cv2x", version, about = "C-V2X mode 4 sidelink simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration.
    Run(RunArgs),
    /// Simulate a preset or an explicit parameter grid over a seed range.
    Sweep(SweepArgs),
    /// Print WINNER+ B1 path loss over a distance range as CSV.
    ChannelTable(ChannelTableArgs),
    /// Check a mobility trace file.
    ValidateTrace(ValidateTraceArgs),
}

/// Flags that override config file keys.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Flat TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mobility scenario.
    #[arg(long, value_parser = ["static", "manhattan", "trace"])]
    pub scenario: Option<String>,
    /// Trace file for `--scenario trace`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Number of V-UEs.
    #[arg(long)]
    pub n_ues: Option<usize>,
    /// Simulated time in ms, warm-up included.
    #[arg(long)]
    pub duration_ms: Option<u64>,
    /// Leading ms excluded from the metrics.
    #[arg(long)]
    pub warmup_ms: Option<u64>,
    /// Cellular bandwidth, 10 or 20 MHz.
    #[arg(long)]
    pub bandwidth_mhz: Option<u32>,
    /// Resource reservation period in ms.
    #[arg(long)]
    pub rri_ms: Option<u64>,
    /// Resource reselection probability in [0.2, 1].
    #[arg(long)]
    pub resel_prob: Option<f64>,
    /// Building blockage on Manhattan links, or every link LOS.
    #[arg(long, value_parser = ["geometric", "all_los"])]
    pub los_mode: Option<String>,
    /// Exclude resources in subframes the UE itself transmitted in.
    #[arg(long)]
    pub exclude_unmonitored: Option<bool>,
}

impl Overrides {
    fn to_config_file(&self) -> ConfigFile {
        ConfigFile {
            scenario: self.scenario.clone(),
            trace_path: self.trace.clone(),
            number_of_v_ues: self.n_ues,
            simulation_time_ms: self.duration_ms,
            warmup_ms: self.warmup_ms,
            channel_bandwidth_mhz: self.bandwidth_mhz,
            resource_reservation_period_ms: self.rri_ms,
            resource_reselection_probability: self.resel_prob,
            los_mode: self.los_mode.clone(),
            exclude_unmonitored: self.exclude_unmonitored,
            ..ConfigFile::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory; nothing is written outside it.
    #[arg(long, env = "CV2X_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
    /// Also write every PIR sample to pir_samples.csv.
    #[arg(long)]
    pub pir_samples: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Write every reception outcome to outcomes.csv (large).
    #[arg(long)]
    pub log_outcomes: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(
        long,
        value_enum,
        conflicts_with = "axis",
        required_unless_present = "axis"
    )]
    pub preset: Option<Preset>,
    /// `key=v1,v2,...`; repeat for a grid. Keys: n_ues, bandwidth_mhz,
    /// scenario, rri_ms, resel_prob.
    #[arg(long)]
    pub axis: Vec<Axis>,
    /// Inclusive range `a..b`, a single seed or a comma list.
    #[arg(long, default_value = "1", value_parser = parse_seeds)]
    pub seeds: SeedList,
    /// Worker threads (0 = one per CPU).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ChannelTableArgs {
    /// Inclusive distance range in metres, `a..b`.
    #[arg(long = "d", default_value = "1..500", value_parser = parse_range)]
    pub range: (f64, f64),
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value_t = 5.9)]
    pub fc_ghz: f64,
    #[arg(long, default_value_t = 1.5)]
    pub antenna_height_m: f64,
    /// Write channel_table.csv into this directory instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateTraceArgs {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

pub fn parse_seeds(s: &str) -> std::result::Result<SeedList, String> {
    let s = s.trim();
    let seeds = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed `{a}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed `{b}`"))?;
        if b < a {
            return Err(format!("empty seed range {a}..{b}"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| format!("bad seed `{v}`")))
            .collect::<std::result::Result<Vec<u64>, _>>()?
    };
    Ok(SeedList(seeds))
}

pub fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad bound `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad bound `{b}`"))?;
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(format!("invalid range `{s}`"));
    }
    Ok((a, b))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig { .. } | Error::ConfigParse { .. } => EXIT_CONFIG,
        Error::Io { .. } | Error::Csv(_) => EXIT_OUTPUT,
        Error::TraceParse { .. } | Error::TraceValidation(_) => EXIT_TRACE,
        Error::Sweep { source, .. } => exit_code(source),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::ChannelTable(args) => cmd_channel_table(args),
        Command::ValidateTrace(args) => cmd_validate_trace(args),
    }
}

fn base_config(overrides: &Overrides, seed: Option<u64>) -> Result<SimConfig> {
    let mut over = overrides.to_config_file();
    over.seed = seed;
    load_config(overrides.config.as_deref(), &over)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = base_config(&args.overrides, args.seed)?;
    cfg.record.pir_samples = args.output.pir_samples;
    cfg.record.outcomes = args.log_outcomes;
    let out = prepare_out_dir(&args.output.out)?;
    let result = run(&cfg)?;
    info!("run finished in {:.2} s", result.wall_time_s);
    let rows = vec![(cfg, result)];
    write_outputs(&out, &rows, args.output.pir_samples)?;
    if args.log_outcomes {
        write_outcomes(&out, &rows[0].1)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let base = base_config(&args.overrides, None)?;
    let (base, axes) = match args.preset {
        Some(preset) => (preset.base(base), preset.axes()),
        None => (base, args.axis),
    };
    let mut cells = expand(&base, &axes, &args.seeds.0);
    for c in &mut cells {
        c.record.pir_samples = args.output.pir_samples;
    }
    let out = prepare_out_dir(&args.output.out)?;
    info!("sweep of {} runs", cells.len());
    let results = run_cells(&cells, args.jobs)?;
    let rows: Vec<(SimConfig, SimResult)> = cells.into_iter().zip(results).collect();
    write_outputs(&out, &rows, args.output.pir_samples)
}

fn cmd_channel_table(args: ChannelTableArgs) -> Result<()> {
    if !(args.step > 0.0) {
        return Err(Error::config("step", "must be positive"));
    }
    let params = ChannelParams {
        fc_ghz: args.fc_ghz,
        ..ChannelParams::with_antenna_height(args.antenna_height_m)
    };
    params.validate()?;
    let (a, b) = args.range;
    let sink: Box<dyn Write> = match &args.out {
        Some(dir) => {
            let dir = prepare_out_dir(dir)?;
            let path = dir.join("channel_table.csv");
            Box::new(
                fs::File::create(&path)
                    .map_err(|e| Error::io(format!("cannot create {}", path.display()), e))?,
            )
        }
        None => Box::new(io::stdout().lock()),
    };
    write_channel_table(sink, a, b, args.step, &params)
}

/// Rows at `a, a + step, ...` up to and including `b`.
pub fn write_channel_table<W: Write>(
    sink: W,
    a: f64,
    b: f64,
    step: f64,
    params: &ChannelParams,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["distance_m", "los_db", "nlos_db", "breakpoint_m"])?;
    let bp = breakpoint_distance(params);
    let n = ((b - a) / step + 1e-9).floor() as u64;
    for i in 0..=n {
        let d = a + i as f64 * step;
        w.write_record([
            d.to_string(),
            format!("{:.4}", pathloss_los_db(d, params)),
            format!("{:.4}", pathloss_nlos_db(d, params)),
            format!("{bp:.4}"),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io("cannot write channel table", e))?;
    Ok(())
}

fn cmd_validate_trace(args: ValidateTraceArgs) -> Result<()> {
    let trace = load_trace(&args.path)?;
    let samples: usize = trace.tracks.iter().map(|t| t.samples.len()).sum();
    let (t0, t1) = trace
        .tracks
        .iter()
        .flat_map(|t| &t.samples)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.time_ms), hi.max(s.time_ms))
        });
    let bb = trace.bounding_box();
    println!(
        "{}: {} nodes, {} samples, t = {} .. {} ms, extent {:.1} x {:.1} m",
        args.path.display(),
        trace.len(),
        samples,
        t0,
        t1,
        bb.width(),
        bb.height()
    );
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::io(
            format!("cannot create output directory {}", dir.display()),
            e,
        )
    })?;
    let probe = dir.join(".cv2x-write-test");
    fs::write(&probe, b"")
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| {
            Error::io(
                format!("output directory {} is not writable", dir.display()),
                e,
            )
        })?;
    Ok(dir.to_path_buf())
}

fn sorted(rows: &[(SimConfig, SimResult)]) -> Vec<&(SimConfig, SimResult)> {
    let mut refs: Vec<_> = rows.iter().collect();
    refs.sort_by(|(a, _), (b, _)| {
        a.scenario
            .label()
            .cmp(b.scenario.label())
            .then(a.pool.bandwidth.cmp(&b.pool.bandwidth))
            .then(a.n_ues.cmp(&b.n_ues))
            .then(a.radio.rri_ms.cmp(&b.radio.rri_ms))
            .then(a.radio.resel_prob.total_cmp(&b.radio.resel_prob))
            .then(a.seed.cmp(&b.seed))
    });
    refs
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(format!("cannot create {}", path.display()), io),
        other => Error::io(
            format!("cannot create {}", path.display()),
            io::Error::other(format!("{other:?}")),
        ),
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes prr.csv, pir.csv, runs.csv and configs/<hash>.toml (plus
/// pir_samples.csv on request), rows sorted by their parameters.
pub fn write_outputs(out: &Path, rows: &[(SimConfig, SimResult)], pir_samples: bool) -> Result<()> {
    let rows = sorted(rows);

    let mut prr = csv_writer(&out.join("prr.csv"))?;
    prr.write_record(PRR_HEADER)?;
    let mut pir = csv_writer(&out.join("pir.csv"))?;
    pir.write_record(PIR_HEADER)?;
    let mut runs = csv_writer(&out.join("runs.csv"))?;
    runs.write_record([
        "scenario",
        "bandwidth_mhz",
        "n_ues",
        "rri_ms",
        "resel_prob",
        "seed",
        "config_hash",
        "transmissions",
    ])?;
    let configs = out.join("configs");
    fs::create_dir_all(&configs)
        .map_err(|e| Error::io(format!("cannot create {}", configs.display()), e))?;

    for (cfg, res) in &rows {
        let scenario = cfg.scenario.label().to_string();
        let bw = cfg.pool.bandwidth.mhz().to_string();
        let n = res.n_ues.to_string();
        let seed = cfg.seed.to_string();
        let m = &res.metrics;
        prr.write_record([
            scenario.clone(),
            bw.clone(),
            n.clone(),
            cfg.radio.rri_ms.to_string(),
            cfg.radio.resel_prob.to_string(),
            seed.clone(),
            opt(m.prr.prr()),
            m.prr.x.to_string(),
            m.prr.y.to_string(),
        ])?;
        let q = m.pir.quantiles(&STANDARD_QUANTILES);
        let mut record = vec![scenario.clone(), bw.clone(), n.clone(), seed.clone()];
        record.extend((0..STANDARD_QUANTILES.len()).map(|i| opt(q.as_ref().map(|q| q[i]))));
        record.push(m.pir.n_samples().to_string());
        pir.write_record(&record)?;
        runs.write_record([
            scenario,
            bw,
            n,
            cfg.radio.rri_ms.to_string(),
            cfg.radio.resel_prob.to_string(),
            seed,
            res.config_hash.clone(),
            res.total_transmissions.to_string(),
        ])?;

        let path = configs.join(format!("{}.toml", res.config_hash));
        if !path.exists() {
            let mut flat = ConfigFile::from_sim(cfg);
            flat.seed = None;
            fs::write(&path, flat.to_toml())
                .map_err(|e| Error::io(format!("cannot write {}", path.display()), e))?;
        }
    }
    for w in [&mut prr, &mut pir, &mut runs] {
        w.flush().map_err(|e| Error::io("cannot write output", e))?;
    }

    if pir_samples {
        let mut w = csv_writer(&out.join("pir_samples.csv"))?;
        w.write_record([
            "scenario",
            "bandwidth_mhz",
            "n_ues",
            "rri_ms",
            "resel_prob",
            "seed",
            "sender",
            "receiver",
            "subframe",
            "pir_ms",
        ])?;
        for (cfg, res) in &rows {
            for s in res.metrics.pir.raw_samples().unwrap_or_default() {
                w.write_record([
                    cfg.scenario.label().to_string(),
                    cfg.pool.bandwidth.mhz().to_string(),
                    res.n_ues.to_string(),
                    cfg.radio.rri_ms.to_string(),
                    cfg.radio.resel_prob.to_string(),
                    cfg.seed.to_string(),
                    s.sender.to_string(),
                    s.receiver.to_string(),
                    s.subframe.to_string(),
                    s.pir_ms.to_string(),
                ])?;
            }
        }
        w.flush()
            .map_err(|e| Error::io("cannot write pir_samples.csv", e))?;
    }
    Ok(())
}

fn write_outcomes(out: &Path, result: &SimResult) -> Result<()> {
    let mut w = csv_writer(&out.join("outcomes.csv"))?;
    w.write_record([
        "subframe",
        "sender",
        "receiver",
        "packet_id",
        "distance_m",
        "status",
        "sinr_db",
    ])?;
    for o in &result.log.outcomes {
        w.write_record([
            o.subframe.to_string(),
            o.sender.to_string(),
            o.receiver.to_string(),
            o.packet_id.to_string(),
            format!("{:.3}", o.distance_m),
            o.status.as_str().to_string(),
            if o.sinr_db.is_nan() {
                String::new()
            } else {
                format!("{:.3}", o.sinr_db)
            },
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io("cannot write outcomes.csv", e))?;
    Ok(())
}
