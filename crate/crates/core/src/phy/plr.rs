//! Packet-loss-rate curves: Monte Carlo estimation over random placements,
//! CSV persistence (`load,plr`) and interpolated lookup.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::sic::{cancel, DecodeRule, DEFAULT_MAX_SIC_ITERATIONS};
use crate::config::AccessMethod;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Trials simulated per independent random stream.
const TRIALS_PER_CHUNK: u64 = 4_096;

/// PLR as a function of packets per RA block.
#[derive(Debug, Clone, PartialEq)]
pub struct PlrCurve {
    method: Option<AccessMethod>,
    points: Vec<(f64, f64)>,
}

impl PlrCurve {
    /// Builds a curve after checking that loads strictly increase and PLR
    /// values lie in `[0, 1]` without decreasing.
    pub fn new(points: Vec<(f64, f64)>, method: Option<AccessMethod>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCurve("curve has no points".into()));
        }
        for (load, plr) in &points {
            if !load.is_finite() || !plr.is_finite() || !(0.0..=1.0).contains(plr) {
                return Err(Error::InvalidCurve(format!("bad point ({load}, {plr})")));
            }
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidCurve(format!(
                    "loads must strictly increase ({} then {})",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidCurve(format!(
                    "plr decreases from {} to {} between loads {} and {}",
                    w[0].1, w[1].1, w[0].0, w[1].0
                )));
            }
        }
        Ok(PlrCurve { method, points })
    }

    pub fn method(&self) -> Option<AccessMethod> {
        self.method
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn read_csv<R: Read>(reader: R, method: Option<AccessMethod>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for row in rdr.deserialize::<(f64, f64)>() {
            points.push(row?);
        }
        PlrCurve::new(points, method)
    }

    pub fn from_path(path: &Path, method: Option<AccessMethod>) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, method)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["load", "plr"])?;
        for (load, plr) in &self.points {
            w.write_record([load.to_string(), plr.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Linear interpolation between the bracketing points, clamped to the end
/// values outside the tabulated range.
pub fn plr_lookup(curve: &PlrCurve, load: f64) -> f64 {
    let pts = &curve.points;
    let first = pts[0];
    let last = pts[pts.len() - 1];
    if load <= first.0 {
        return first.1;
    }
    if load >= last.0 {
        return last.1;
    }
    let i = pts.partition_point(|(l, _)| *l <= load);
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    y0 + (y1 - y0) * (load - x0) / (x1 - x0)
}

/// Raw Monte Carlo counts for one load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlrPoint {
    pub load: u32,
    pub sent: u64,
    pub lost: u64,
}

impl PlrPoint {
    pub fn plr(&self) -> f64 {
        if self.sent == 0 {
            0.0
        } else {
            self.lost as f64 / self.sent as f64
        }
    }

    /// Binomial standard error of [`PlrPoint::plr`].
    pub fn std_error(&self) -> f64 {
        if self.sent == 0 {
            return 0.0;
        }
        let p = self.plr();
        (p * (1.0 - p) / self.sent as f64).sqrt()
    }
}

/// Monte Carlo PLR estimator for one random-access scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlrEstimator {
    pub rule: DecodeRule,
    pub bursts_per_packet: u32,
    pub slot_count: u32,
    pub max_iterations: u32,
}

impl PlrEstimator {
    pub fn for_method(method: AccessMethod, slot_count: u32) -> Result<Self> {
        Ok(PlrEstimator {
            rule: DecodeRule::for_method(method)?,
            bursts_per_packet: method.bursts_per_packet(),
            slot_count,
            max_iterations: DEFAULT_MAX_SIC_ITERATIONS,
        })
    }

    /// Estimates the PLR of `load` packets per block over `trials` blocks.
    pub fn point(&self, load: u32, trials: u64, rng: &Rng) -> PlrPoint {
        let stream = rng.split(load as u64);
        let chunks = trials.div_ceil(TRIALS_PER_CHUNK);
        let lost = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let n = TRIALS_PER_CHUNK.min(trials - c * TRIALS_PER_CHUNK);
                self.run_chunk(load, n, stream.split(c))
            })
            .sum();
        PlrPoint {
            load,
            sent: load as u64 * trials,
            lost,
        }
    }

    fn run_chunk(&self, load: u32, trials: u64, mut rng: Rng) -> u64 {
        let n_b = self.bursts_per_packet as usize;
        let mut slots = vec![0u32; load as usize * n_b];
        let mut occupancy = vec![0u32; self.slot_count as usize];
        let mut decoded = vec![false; load as usize];
        let mut draw = Vec::with_capacity(n_b);
        let mut lost = 0u64;
        for _ in 0..trials {
            occupancy.iter_mut().for_each(|o| *o = 0);
            decoded.iter_mut().for_each(|d| *d = false);
            for packet in slots.chunks_exact_mut(n_b) {
                rng.distinct_below(self.slot_count, self.bursts_per_packet, &mut draw);
                packet.copy_from_slice(&draw);
                for &s in &draw {
                    occupancy[s as usize] += 1;
                }
            }
            cancel(
                &mut occupancy,
                &mut decoded,
                |i| &slots[i * n_b..(i + 1) * n_b],
                self.rule,
                self.max_iterations,
            );
            lost += decoded.iter().filter(|d| !**d).count() as u64;
        }
        lost
    }

    /// Estimates every load and returns a curve. Monte Carlo noise can make
    /// neighbouring estimates dip; the curve keeps the running maximum so it
    /// stays non-decreasing.
    pub fn curve(&self, method: Option<AccessMethod>, loads: &[u32], trials: u64, rng: &Rng) -> Result<PlrCurve> {
        let mut loads = loads.to_vec();
        loads.sort_unstable();
        loads.dedup();
        let points: Vec<PlrPoint> = loads.par_iter().map(|&l| self.point(l, trials, rng)).collect();
        let mut running = 0.0f64;
        let pts = points
            .iter()
            .map(|p| {
                running = running.max(p.plr());
                (p.load as f64, running)
            })
            .collect();
        PlrCurve::new(pts, method)
    }
}

/// PLR of `load` packets per 100-slot block under `method`'s default rule.
pub fn estimate_plr(method: AccessMethod, load: u32, trials: u64, rng: &Rng) -> Result<PlrPoint> {
    Ok(PlrEstimator::for_method(method, 100)?.point(load, trials, rng))
}

/// Monte Carlo PLR curve over 100-slot blocks.
pub fn estimate_plr_curve(method: AccessMethod, loads: &[u32], trials: u64, rng: &Rng) -> Result<PlrCurve> {
    if trials == 0 {
        return Err(Error::Configuration("at least one trial is required".into()));
    }
    let est = PlrEstimator::for_method(method, 100)?;
    if let Some(&bad) = loads.iter().find(|&&l| l == 0) {
        return Err(Error::Configuration(format!("load {bad} is not a packet count")));
    }
    est.curve(Some(method), loads, trials, rng)
}
