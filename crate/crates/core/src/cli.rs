//! The `satlink` command line.
//!
//! Every subcommand writes CSV files into `--output-dir`:
//! - `run`: `summary.csv` (sweep schema), `sessions.csv`, `frames.csv`,
//!   `trace.csv`, `scenario.cfg` and, with `--dump-btp`, `btp.csv`.
//! - `sweep`: `sweep.csv`, plus `sweep_spread.csv` when replicated.
//! - `trace`: `trace.csv` and `time_to_n.csv`.
//! - `oracle`: `oracle.csv`.
//! - `table`: `table.csv`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::AccessMethod;
use crate::error::{Error, Result};
use crate::mac::LossMode;
use crate::metrics::{self, SessionStats, SweepRow, TableRow};
use crate::phy::estimate_plr_curve;
use crate::rng::Rng;
use crate::scenario::{Policy, Scenario, SeqThreshold};
use crate::time::SimTime;
use crate::{run_scenario, RunResult};

/// Exit status for a scenario or flag the simulator rejects.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for failures while running or writing output.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "satlink", version, about = "Satellite return-link access simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one scenario.
    Run(ScenarioArgs),
    /// Aggregate throughput and loss against the number of sessions.
    Sweep(ScenarioArgs),
    /// Per-flow reception times.
    Trace(ScenarioArgs),
    /// Monte Carlo packet loss ratio against RA block load.
    Oracle(OracleArgs),
    /// Delivered datagrams per session for several access methods.
    Table(ScenarioArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ScenarioArgs {
    /// Scenario file; defaults apply when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Access method, or a comma-separated list for `sweep` and `table`.
    #[arg(long, value_delimiter = ',')]
    pub access: Vec<AccessMethod>,
    /// Session count, or a comma-separated list for `sweep` and `table`.
    #[arg(long, value_delimiter = ',')]
    pub sessions: Vec<u32>,
    #[arg(long)]
    pub loss_model: Option<LossMode>,
    #[arg(long)]
    pub plr_table: Option<PathBuf>,
    /// Also write the burst time plan of every frame.
    #[arg(long)]
    pub dump_btp: bool,
    #[arg(long)]
    pub policy: Option<Policy>,
    /// A count, `inf`, or `auto`.
    #[arg(long)]
    pub seq_threshold: Option<SeqThreshold>,
    /// Independent seeds per point (`sweep` and `table`).
    #[arg(long, default_value_t = 1)]
    pub replications: u32,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[arg(long, default_value = "crdsa3")]
    pub method: AccessMethod,
    /// `a..b` (inclusive) or a comma-separated list.
    #[arg(long, default_value = "1..100", value_parser = parse_loads)]
    pub loads: Loads,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loads(pub Vec<u32>);

pub fn parse_loads(s: &str) -> std::result::Result<Loads, String> {
    let bad = || format!("bad load list '{s}'");
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        if a == 0 || a > b {
            return Err(bad());
        }
        return Ok(Loads((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse::<u32>().map_err(|_| bad()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Loads)
}

const SWEEP_SESSIONS: [u32; 8] = [50, 100, 150, 200, 250, 300, 350, 400];
const TABLE_SESSIONS: [u32; 4] = [100, 200, 300, 400];
const TABLE_ACCESS: [AccessMethod; 3] = [AccessMethod::Dedicated, AccessMethod::CRDSA3, AccessMethod::MUSCA3];

impl ScenarioArgs {
    /// The scenario described by the file, the environment and the flags,
    /// in increasing order of precedence. Not validated.
    pub fn base_scenario(&self) -> Result<Scenario> {
        let mut sc = match &self.scenario {
            Some(path) => Scenario::from_path(path)?,
            None => Scenario::default(),
        };
        sc.apply_env()?;
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        if let Some(d) = self.duration_s {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Configuration(format!("--duration-s must be positive, found {d}")));
            }
            sc.duration = SimTime::from_secs_f64(d);
        }
        if let Some(m) = self.loss_model {
            sc.loss_model = m;
        }
        if let Some(p) = &self.plr_table {
            sc.plr_table = Some(p.clone());
            sc.plr_curve = None;
        }
        if let Some(t) = self.seq_threshold {
            sc.seq_threshold = t;
        }
        sc.record_btp |= self.dump_btp;
        Ok(sc)
    }

    /// One scenario per (access, sessions) pair, in that order.
    fn grid(&self, default_access: &[AccessMethod], default_sessions: &[u32]) -> Result<Vec<Scenario>> {
        let base = self.base_scenario()?;
        let access = match (self.access.is_empty(), default_access.is_empty()) {
            (false, _) => self.access.clone(),
            (true, false) => default_access.to_vec(),
            (true, true) => vec![base.access],
        };
        let sessions = match (self.sessions.is_empty(), default_sessions.is_empty()) {
            (false, _) => self.sessions.clone(),
            (true, false) => default_sessions.to_vec(),
            (true, true) => vec![base.num_sessions],
        };
        let mut out = Vec::with_capacity(access.len() * sessions.len());
        for &a in &access {
            for &n in &sessions {
                let mut sc = base.clone();
                if a != base.access || !self.access.is_empty() {
                    sc = sc.with_access(a);
                }
                sc.num_sessions = n;
                if let Some(p) = self.policy {
                    sc.policy = p;
                }
                sc.load_curve()?;
                sc.validate()?;
                out.push(sc);
            }
        }
        Ok(out)
    }

    fn single(&self) -> Result<Scenario> {
        if self.access.len() > 1 || self.sessions.len() > 1 {
            return Err(Error::Configuration(
                "this subcommand takes a single --access and --sessions value".into(),
            ));
        }
        Ok(self.grid(&[], &[])?.remove(0))
    }

    fn replications(&self) -> Result<u32> {
        if self.replications == 0 {
            return Err(Error::Configuration("--replications must be at least 1".into()));
        }
        Ok(self.replications)
    }
}

/// Runs every scenario `reps` times with seeds `seed, seed + 1, ...`.
/// Results keep the input order.
fn run_all(scenarios: &[Scenario], reps: u32) -> Result<Vec<Vec<RunResult>>> {
    scenarios
        .par_iter()
        .map(|sc| {
            (0..reps as u64)
                .map(|r| {
                    let mut s = sc.clone();
                    s.seed = sc.seed.wrapping_add(r);
                    run_scenario(&s)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_run(args: &ScenarioArgs) -> Result<()> {
    let sc = args.single()?;
    let r = run_scenario(&sc)?;
    let dir = &args.output_dir;
    prepare(dir)?;
    metrics::write_file(&dir.join("summary.csv"), |w| {
        metrics::write_sweep(&[SweepRow::from_result(&r)], w)
    })?;
    metrics::write_file(&dir.join("sessions.csv"), |w| metrics::write_sessions(&r, w))?;
    metrics::write_file(&dir.join("frames.csv"), |w| metrics::write_frames(&r, w))?;
    metrics::write_file(&dir.join("trace.csv"), |w| metrics::write_trace(&r.trace, w))?;
    metrics::write_file(&dir.join("scenario.cfg"), |w| {
        w.write_all(sc.to_text().as_bytes())
            .map_err(|e| Error::io(dir.join("scenario.cfg"), e))
    })?;
    if sc.record_btp {
        metrics::write_file(&dir.join("btp.csv"), |w| metrics::write_btp(&r.btp, w))?;
    }
    let st = metrics::session_stats(&r);
    println!(
        "{} {} sessions: {:.0} bit/s, loss {:.4}, delivered min/med/max {}/{}/{}",
        sc.access_label(),
        sc.num_sessions,
        metrics::throughput(&r),
        r.loss_ratio(),
        st.min,
        st.median,
        st.max
    );
    Ok(())
}

fn cmd_sweep(args: &ScenarioArgs) -> Result<()> {
    let reps = args.replications()?;
    let scenarios = args.grid(&[], &SWEEP_SESSIONS)?;
    let results = run_all(&scenarios, reps)?;
    let mut rows = Vec::new();
    let mut spread = Vec::new();
    for runs in &results {
        let per: Vec<SweepRow> = runs.iter().map(SweepRow::from_result).collect();
        let n = per.len() as f64;
        let mut row = per[0].clone();
        row.throughput_bps = per.iter().map(|r| r.throughput_bps).sum::<f64>() / n;
        row.loss_ratio = per.iter().map(|r| r.loss_ratio).sum::<f64>() / n;
        let lo = per.iter().map(|r| r.throughput_bps).fold(f64::INFINITY, f64::min);
        let hi = per.iter().map(|r| r.throughput_bps).fold(f64::NEG_INFINITY, f64::max);
        spread.push((row.access.clone(), row.num_sessions, per.len(), lo, row.throughput_bps, hi));
        rows.push(row);
    }
    let dir = &args.output_dir;
    prepare(dir)?;
    metrics::write_file(&dir.join("sweep.csv"), |w| metrics::write_sweep(&rows, w))?;
    if reps > 1 {
        metrics::write_file(&dir.join("sweep_spread.csv"), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record([
                "access",
                "num_sessions",
                "replications",
                "throughput_min",
                "throughput_mean",
                "throughput_max",
            ])?;
            for (a, n, k, lo, mean, hi) in &spread {
                c.write_record([
                    a.clone(),
                    n.to_string(),
                    k.to_string(),
                    lo.to_string(),
                    mean.to_string(),
                    hi.to_string(),
                ])?;
            }
            c.flush().map_err(|e| Error::io("sweep_spread.csv", e))
        })?;
    }
    for r in &rows {
        println!("{} {}: {:.0} bit/s, loss {:.4}", r.access, r.num_sessions, r.throughput_bps, r.loss_ratio);
    }
    Ok(())
}

/// Mean reception time of the `n`-th in-order datagram over the flows that
/// received it: `(n, flows, mean_time_s)`.
pub fn time_to_n_rows(result: &RunResult) -> Vec<(usize, usize, SimTime)> {
    let longest = result.in_order_times.iter().map(Vec::len).max().unwrap_or(0);
    (1..=longest)
        .map(|n| {
            let times: Vec<SimTime> = result
                .in_order_times
                .iter()
                .filter_map(|t| metrics::time_to_n_datagrams(t, n))
                .collect();
            let sum: u64 = times.iter().map(|t| t.as_micros()).sum();
            (n, times.len(), SimTime::from_micros(sum / times.len() as u64))
        })
        .collect()
}

fn cmd_trace(args: &ScenarioArgs) -> Result<()> {
    let sc = args.single()?;
    let r = run_scenario(&sc)?;
    let dir = &args.output_dir;
    prepare(dir)?;
    metrics::write_file(&dir.join("trace.csv"), |w| metrics::write_trace(&r.trace, w))?;
    metrics::write_file(&dir.join("time_to_n.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["n", "flows", "mean_time_s"])?;
        for (n, flows, t) in time_to_n_rows(&r) {
            c.write_record([n.to_string(), flows.to_string(), t.to_string()])?;
        }
        c.flush().map_err(|e| Error::io("time_to_n.csv", e))
    })?;
    println!("{} records for {} flows", r.trace.len(), sc.num_sessions);
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let curve = estimate_plr_curve(args.method, &args.loads.0, args.trials, &Rng::new(args.seed))?;
    prepare(&args.output_dir)?;
    metrics::write_file(&args.output_dir.join("oracle.csv"), |w| curve.write_csv(w))?;
    println!("{} loads for {}", curve.points().len(), args.method);
    Ok(())
}

fn cmd_table(args: &ScenarioArgs) -> Result<()> {
    let reps = args.replications()?;
    let scenarios = args.grid(&TABLE_ACCESS, &TABLE_SESSIONS)?;
    let results = run_all(&scenarios, reps)?;
    let rows: Vec<TableRow> = scenarios
        .iter()
        .zip(&results)
        .map(|(sc, runs)| {
            // Replications pool their sessions.
            let counts: Vec<u64> = runs.iter().flat_map(|r| r.delivered.iter().copied()).collect();
            TableRow {
                access: sc.access_label(),
                num_sessions: sc.num_sessions,
                stats: SessionStats::from_counts(&counts).expect("at least one session"),
            }
        })
        .collect();
    prepare(&args.output_dir)?;
    metrics::write_file(&args.output_dir.join("table.csv"), |w| metrics::write_table(&rows, w))?;
    for r in &rows {
        println!(
            "{} {}: {} {} {}",
            r.access, r.num_sessions, r.stats.min, r.stats.median, r.stats.max
        );
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Table(a) => cmd_table(a),
    }
}

fn report(e: &Error) {
    let mut err = std::io::stderr().lock();
    match e {
        Error::InvalidConfig(violations) => {
            let _ = writeln!(err, "error: invalid scenario");
            for v in violations {
                let _ = writeln!(err, "  {v}");
            }
        }
        other => {
            let _ = writeln!(err, "error: {other}");
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report(&e);
            match e {
                Error::InvalidConfig(_)
                | Error::Scenario { .. }
                | Error::Configuration(_)
                | Error::UnsupportedMethod(_)
                | Error::InvalidCurve(_) => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
