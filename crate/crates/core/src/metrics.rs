//! Run results, summary statistics and the CSV files built from them.
//!
//! Schemas (headers always written):
//! - sweep: `access,num_sessions,throughput_bps,loss_ratio`
//! - trace: `time_s,flow_id,seq_no`
//! - table: `access,num_sessions,min,med,max`
//! - btp: `frame,flow_id,slots`
//! - frames: `frame,time_s,throughput_bps`
//!
//! Times are seconds with six decimals; other floats use the shortest
//! representation that parses back to the same value.

use std::io::{Read, Write};
use std::path::Path;

use crate::config::FlowId;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::time::SimTime;
use crate::transport::TcpStats;

/// A datagram reaching the receiver for the first time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TraceRecord {
    pub time: SimTime,
    pub flow_id: FlowId,
    pub seq_no: u64,
}

/// Slots granted to one flow in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BtpRecord {
    pub frame: u64,
    pub flow_id: FlowId,
    pub slots: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// The scenario that produced this result.
    pub scenario: Scenario,
    pub seed: u64,
    /// Received bits per second, one sample per frame.
    pub frame_throughput_bps: Vec<f64>,
    /// Distinct datagrams received per flow, indexed by flow id.
    pub delivered: Vec<u64>,
    /// Per flow, the time at which `n` datagrams had arrived in order is
    /// entry `n - 1`.
    pub in_order_times: Vec<Vec<SimTime>>,
    pub trace: Vec<TraceRecord>,
    /// Datagrams discarded at the gateway because a packet was lost.
    pub dropped: u64,
    /// Datagrams that reached the gateway intact.
    pub transmitted: u64,
    /// Burst time plans, when the scenario asks for them.
    pub btp: Vec<BtpRecord>,
    /// Loss-recovery events summed over all senders.
    pub tcp: TcpStats,
}

impl RunResult {
    pub fn duration(&self) -> SimTime {
        self.scenario.duration
    }

    pub fn loss_ratio(&self) -> f64 {
        let total = self.dropped + self.transmitted;
        if total == 0 {
            0.0
        } else {
            self.dropped as f64 / total as f64
        }
    }

    pub fn total_delivered(&self) -> u64 {
        self.delivered.iter().sum()
    }
}

/// Aggregate goodput: received bytes over the run duration, in bit/s.
pub fn throughput(result: &RunResult) -> f64 {
    let secs = result.duration().as_secs_f64();
    if secs <= 0.0 {
        return 0.0;
    }
    (result.total_delivered() * result.scenario.datagram_bytes as u64 * 8) as f64 / secs
}

/// Aggregate goodput rebuilt from the per-frame samples.
pub fn throughput_from_frames(result: &RunResult) -> f64 {
    let secs = result.duration().as_secs_f64();
    if secs <= 0.0 {
        return 0.0;
    }
    let frame = result.scenario.link.frame_duration.as_secs_f64();
    result.frame_throughput_bps.iter().sum::<f64>() * frame / secs
}

/// Order statistics of per-session delivered datagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionStats {
    pub min: u64,
    pub median: u64,
    pub max: u64,
}

impl SessionStats {
    /// `None` for an empty slice. The median of an even count is the lower
    /// of the two middle values.
    pub fn from_counts(counts: &[u64]) -> Option<Self> {
        if counts.is_empty() {
            return None;
        }
        let mut v = counts.to_vec();
        v.sort_unstable();
        Some(SessionStats {
            min: v[0],
            median: v[(v.len() - 1) / 2],
            max: v[v.len() - 1],
        })
    }
}

pub fn session_stats(result: &RunResult) -> SessionStats {
    SessionStats::from_counts(&result.delivered).unwrap_or(SessionStats {
        min: 0,
        median: 0,
        max: 0,
    })
}

/// Time at which the `n`-th datagram arrived in order; `None` if it never did.
pub fn time_to_n_datagrams(in_order_times: &[SimTime], n: usize) -> Option<SimTime> {
    match n {
        0 => Some(SimTime::ZERO),
        n => in_order_times.get(n - 1).copied(),
    }
}

/// Mean over flows of [`time_to_n_datagrams`], in seconds; `None` unless
/// every flow reached `n`.
pub fn mean_time_to_n(result: &RunResult, n: usize) -> Option<f64> {
    let flows = result.in_order_times.len();
    if flows == 0 {
        return None;
    }
    let mut sum = 0.0;
    for times in &result.in_order_times {
        sum += time_to_n_datagrams(times, n)?.as_secs_f64();
    }
    Some(sum / flows as f64)
}

/// Mean over flows of the datagrams received in order by time `t`.
pub fn mean_in_order_by(result: &RunResult, t: SimTime) -> f64 {
    let flows = result.in_order_times.len();
    if flows == 0 {
        return 0.0;
    }
    let total: usize = result
        .in_order_times
        .iter()
        .map(|times| times.partition_point(|&x| x <= t))
        .sum();
    total as f64 / flows as f64
}

/// Parses `S.UUUUUU` (or fewer decimals) without going through floating point.
pub fn parse_time(s: &str) -> Result<SimTime> {
    let bad = || Error::Configuration(format!("bad time value '{s}'"));
    let (whole, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
    if frac.len() > 6 || whole.is_empty() {
        return Err(bad());
    }
    let secs: u64 = whole.parse().map_err(|_| bad())?;
    let mut micros = 0u64;
    if !frac.is_empty() {
        let digits: u64 = frac.parse().map_err(|_| bad())?;
        micros = digits * 10u64.pow(6 - frac.len() as u32);
    }
    secs.checked_mul(1_000_000)
        .and_then(|x| x.checked_add(micros))
        .map(SimTime::from_micros)
        .ok_or_else(bad)
}

/// One line of the sweep file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub access: String,
    pub num_sessions: u32,
    pub throughput_bps: f64,
    pub loss_ratio: f64,
}

impl SweepRow {
    pub fn from_result(result: &RunResult) -> Self {
        SweepRow {
            access: result.scenario.access_label(),
            num_sessions: result.scenario.num_sessions,
            throughput_bps: throughput(result),
            loss_ratio: result.loss_ratio(),
        }
    }
}

/// One line of the table file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub access: String,
    pub num_sessions: u32,
    pub stats: SessionStats,
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv>", e))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["access", "num_sessions", "throughput_bps", "loss_ratio"])?;
    for r in rows {
        w.write_record([
            r.access.clone(),
            r.num_sessions.to_string(),
            r.throughput_bps.to_string(),
            r.loss_ratio.to_string(),
        ])?;
    }
    finish(w)
}

pub fn read_sweep<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    reader(r)
        .deserialize::<(String, u32, f64, f64)>()
        .map(|row| {
            let (access, num_sessions, throughput_bps, loss_ratio) = row?;
            Ok(SweepRow {
                access,
                num_sessions,
                throughput_bps,
                loss_ratio,
            })
        })
        .collect()
}

pub fn write_table<W: Write>(rows: &[TableRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["access", "num_sessions", "min", "med", "max"])?;
    for r in rows {
        w.write_record([
            r.access.clone(),
            r.num_sessions.to_string(),
            r.stats.min.to_string(),
            r.stats.median.to_string(),
            r.stats.max.to_string(),
        ])?;
    }
    finish(w)
}

pub fn read_table<R: Read>(r: R) -> Result<Vec<TableRow>> {
    reader(r)
        .deserialize::<(String, u32, u64, u64, u64)>()
        .map(|row| {
            let (access, num_sessions, min, median, max) = row?;
            Ok(TableRow {
                access,
                num_sessions,
                stats: SessionStats { min, median, max },
            })
        })
        .collect()
}

pub fn write_trace<W: Write>(records: &[TraceRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time_s", "flow_id", "seq_no"])?;
    for r in records {
        w.write_record([r.time.to_string(), r.flow_id.to_string(), r.seq_no.to_string()])?;
    }
    finish(w)
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRecord>> {
    reader(r)
        .deserialize::<(String, FlowId, u64)>()
        .map(|row| {
            let (time, flow_id, seq_no) = row?;
            Ok(TraceRecord {
                time: parse_time(&time)?,
                flow_id,
                seq_no,
            })
        })
        .collect()
}

pub fn write_btp<W: Write>(records: &[BtpRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["frame", "flow_id", "slots"])?;
    for r in records {
        w.write_record([r.frame.to_string(), r.flow_id.to_string(), r.slots.to_string()])?;
    }
    finish(w)
}

pub fn read_btp<R: Read>(r: R) -> Result<Vec<BtpRecord>> {
    reader(r)
        .deserialize::<(u64, FlowId, u32)>()
        .map(|row| {
            let (frame, flow_id, slots) = row?;
            Ok(BtpRecord { frame, flow_id, slots })
        })
        .collect()
}

/// Per-frame throughput samples with the frame start time.
pub fn write_frames<W: Write>(result: &RunResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["frame", "time_s", "throughput_bps"])?;
    let link = &result.scenario.link;
    for (k, bps) in result.frame_throughput_bps.iter().enumerate() {
        w.write_record([
            k.to_string(),
            link.frame_start(k as u64).to_string(),
            bps.to_string(),
        ])?;
    }
    finish(w)
}

/// Delivered datagrams per flow: `flow_id,delivered`.
pub fn write_sessions<W: Write>(result: &RunResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["flow_id", "delivered"])?;
    for (id, n) in result.delivered.iter().enumerate() {
        w.write_record([id.to_string(), n.to_string()])?;
    }
    finish(w)
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}
