//! Scenario files: line-oriented `key = value` text with `#` comments.
//!
//! ```text
//! # 200 MuSCA sessions for 20 s
//! access_method = musca3
//! num_sessions = 200
//! duration_s = 20
//! ```

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::{validate, AccessMethod, ConfigViolation, LinkConfig};
use crate::error::{Error, Result};
use crate::mac::LossMode;
use crate::phy::{PlrCurve, DEFAULT_MAX_SIC_ITERATIONS};
use crate::time::SimTime;

/// Environment variable that overrides the scenario seed.
pub const SEED_ENV: &str = "SATLINK_SEED";

/// Initial congestion window, in segments.
pub const DEFAULT_INITIAL_CWND: u32 = 8;

/// Which access scheme flows use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Dedicated,
    Random,
    /// Random access for the first segments of a flow, dedicated after.
    Hybrid,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dedicated" => Ok(Policy::Dedicated),
            "random" => Ok(Policy::Random),
            "hybrid" => Ok(Policy::Hybrid),
            other => Err(Error::Configuration(format!(
                "unknown policy '{other}' (expected dedicated, random or hybrid)"
            ))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Dedicated => "dedicated",
            Policy::Random => "random",
            Policy::Hybrid => "hybrid",
        })
    }
}

/// Sequence number up to which a hybrid flow stays on random access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqThreshold {
    /// Derived each frame from the estimated number of active flows.
    Auto,
    Fixed(u64),
}

impl SeqThreshold {
    pub const INFINITE: SeqThreshold = SeqThreshold::Fixed(u64::MAX);
}

impl FromStr for SeqThreshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SeqThreshold::Auto),
            "inf" | "infinity" => Ok(SeqThreshold::INFINITE),
            n => n
                .parse()
                .map(SeqThreshold::Fixed)
                .map_err(|_| Error::Configuration(format!("bad seq_threshold '{n}'"))),
        }
    }
}

impl fmt::Display for SeqThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeqThreshold::Auto => f.write_str("auto"),
            SeqThreshold::Fixed(u64::MAX) => f.write_str("inf"),
            SeqThreshold::Fixed(n) => write!(f, "{n}"),
        }
    }
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub link: LinkConfig,
    pub duration: SimTime,
    pub num_sessions: u32,
    pub datagram_bytes: u32,
    pub seed: u64,
    /// Dedicated, or the random-access scheme used by random and hybrid flows.
    pub access: AccessMethod,
    pub policy: Policy,
    pub loss_model: LossMode,
    pub plr_table: Option<PathBuf>,
    /// Curve used by the table loss model; loaded from `plr_table` if unset.
    pub plr_curve: Option<PlrCurve>,
    pub seq_threshold: SeqThreshold,
    /// RA blocks reserved for hybrid flows; the rest of the frame is dedicated.
    pub ra_block_budget: Option<u32>,
    /// Bytes each session transfers; `None` for an unbounded transfer.
    pub flow_bytes: Option<u64>,
    pub initial_cwnd: u32,
    pub idle_timeout: SimTime,
    /// Overrides the information bits carried by one random-access packet.
    pub random_info_bits: Option<u32>,
    pub max_sic_iterations: u32,
    /// Keep every burst time plan in the run result.
    pub record_btp: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            link: LinkConfig::default(),
            duration: SimTime::from_secs(20),
            num_sessions: 100,
            datagram_bytes: 1500,
            seed: 1,
            access: AccessMethod::Dedicated,
            policy: Policy::Dedicated,
            loss_model: LossMode::Sic,
            plr_table: None,
            plr_curve: None,
            seq_threshold: SeqThreshold::Auto,
            ra_block_budget: None,
            flow_bytes: None,
            initial_cwnd: DEFAULT_INITIAL_CWND,
            idle_timeout: SimTime::from_secs(3),
            random_info_bits: None,
            max_sic_iterations: DEFAULT_MAX_SIC_ITERATIONS,
            record_btp: false,
        }
    }
}

fn policy_for(access: AccessMethod) -> Policy {
    if access.is_random() {
        Policy::Random
    } else {
        Policy::Dedicated
    }
}

impl Scenario {
    /// Default scenario with `num_sessions` flows on `access`.
    pub fn new(access: AccessMethod, num_sessions: u32) -> Self {
        Scenario {
            access,
            policy: policy_for(access),
            num_sessions,
            ..Default::default()
        }
    }

    pub fn with_access(mut self, access: AccessMethod) -> Self {
        self.access = access;
        self.policy = policy_for(access);
        self
    }

    /// Label used in output files: the access method, or `hybrid`.
    pub fn access_label(&self) -> String {
        match self.policy {
            Policy::Hybrid => "hybrid".into(),
            _ => self.access.to_string(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses scenario text. `origin` names the source in error messages and
    /// anchors a relative `plr_table` path.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut sc = Scenario::default();
        let mut policy = None;
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| Error::Scenario {
                path: origin.to_path_buf(),
                line,
                message,
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("'{key}' is set twice")));
            }
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(format!("'{key}' expects a number, found '{v}'")))
            };
            let int = |v: &str| -> Result<u64> {
                v.parse::<u64>()
                    .map_err(|_| err(format!("'{key}' expects a non-negative integer, found '{v}'")))
            };
            let small = |v: &str| -> Result<u32> {
                u32::try_from(int(v)?).map_err(|_| err(format!("'{key}' is out of range: {v}")))
            };
            let time = |v: &str, scale: f64| -> Result<SimTime> {
                let x = num(v)?;
                if x < 0.0 {
                    return Err(err(format!("'{key}' must not be negative")));
                }
                Ok(SimTime::from_secs_f64(x * scale))
            };
            let wrap = |e: Error| err(e.to_string());
            match key {
                "duration_s" => sc.duration = time(value, 1.0)?,
                "frame_ms" => sc.link.frame_duration = time(value, 1e-3)?,
                "slot_ms" => sc.link.slot_duration = time(value, 1e-3)?,
                "carriers" => sc.link.carriers = small(value)?,
                "slots_per_carrier" => sc.link.slots_per_carrier = small(value)?,
                "symbols_per_slot" => sc.link.symbols_per_slot = small(value)?,
                "esn0_db" => sc.link.dedicated_esn0_db = num(value)?,
                "margin_db" => sc.link.random_margin_db = num(value)?,
                "one_way_delay_ms" => sc.link.one_way_delay = time(value, 1e-3)?,
                "ra_block_slots" => sc.link.ra_block_slots = small(value)?,
                "per_st_cap" => sc.link.per_st_cap = small(value)?,
                "access_method" => sc.access = value.parse().map_err(wrap)?,
                "num_sessions" => sc.num_sessions = small(value)?,
                "datagram_bytes" => sc.datagram_bytes = small(value)?,
                "seed" => sc.seed = int(value)?,
                "loss_model" => sc.loss_model = value.parse().map_err(wrap)?,
                "plr_table" => {
                    let p = PathBuf::from(value);
                    sc.plr_table = Some(match origin.parent() {
                        Some(dir) if p.is_relative() => dir.join(p),
                        _ => p,
                    });
                }
                "policy" => policy = Some(value.parse().map_err(wrap)?),
                "seq_threshold" => sc.seq_threshold = value.parse().map_err(wrap)?,
                "ra_block_budget" => sc.ra_block_budget = Some(small(value)?),
                "flow_bytes" => sc.flow_bytes = Some(int(value)?),
                "initial_cwnd" => sc.initial_cwnd = small(value)?,
                "idle_timeout_s" => sc.idle_timeout = time(value, 1.0)?,
                "random_info_bits" => sc.random_info_bits = Some(small(value)?),
                "max_sic_iterations" => sc.max_sic_iterations = small(value)?,
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        sc.policy = policy.unwrap_or_else(|| policy_for(sc.access));
        Ok(sc)
    }

    /// Applies `SATLINK_SEED` if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Configuration(format!("{SEED_ENV} must be an integer, found '{v}'")))?;
        }
        Ok(())
    }

    /// Loads the PLR curve named by `plr_table` unless one is already set.
    pub fn load_curve(&mut self) -> Result<()> {
        if self.plr_curve.is_none() {
            if let Some(path) = &self.plr_table {
                let method = self.access.is_random().then_some(self.access);
                self.plr_curve = Some(PlrCurve::from_path(path, method)?);
            }
        }
        Ok(())
    }

    /// Reports every problem with the scenario at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = validate(&self.link).err().unwrap_or_default();
        let mut push = |field: &'static str, message: String| v.push(ConfigViolation { field, message });
        if self.duration == SimTime::ZERO {
            push("duration_s", "duration_s must be positive".into());
        }
        if self.num_sessions == 0 {
            push("num_sessions", "num_sessions must be positive".into());
        }
        if self.datagram_bytes == 0 {
            push("datagram_bytes", "datagram_bytes must be positive".into());
        }
        if self.initial_cwnd == 0 {
            push("initial_cwnd", "initial_cwnd must be positive".into());
        }
        if self.flow_bytes == Some(0) {
            push("flow_bytes", "flow_bytes must be positive".into());
        }
        if self.random_info_bits == Some(0) {
            push("random_info_bits", "random_info_bits must be positive".into());
        }
        if self.link.ra_block_slots > 0 {
            if let Err(e) = self.access.validate_for(&self.link) {
                push("access_method", e.to_string());
            }
        }
        match (self.policy, self.access.is_random()) {
            (Policy::Dedicated, true) => push("policy", format!("policy dedicated conflicts with {}", self.access)),
            (Policy::Random, false) => push("policy", "policy random needs crdsa3 or musca3".into()),
            (Policy::Hybrid, false) => push("policy", "policy hybrid needs crdsa3 or musca3".into()),
            _ => {}
        }
        if self.access.is_random() && self.access.bursts_per_packet() != 3 {
            push(
                "access_method",
                format!("{} has no waveform; only three-burst schemes are tabulated", self.access),
            );
        }
        if let Some(b) = self.ra_block_budget {
            let blocks = self.link.total_slots().checked_div(self.link.ra_block_slots).unwrap_or(0);
            if b > blocks {
                push("ra_block_budget", format!("{b} exceeds the {blocks} RA blocks per frame"));
            }
        }
        if self.loss_model == LossMode::Table
            && self.policy != Policy::Dedicated
            && self.plr_curve.is_none()
            && self.plr_table.is_none()
        {
            push("plr_table", "the table loss model needs plr_table".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Renders the scenario in file syntax; parsing the text reproduces it
    /// (apart from an in-memory curve and `record_btp`).
    pub fn to_text(&self) -> String {
        let l = &self.link;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("duration_s", self.duration.as_secs_f64().to_string());
        kv("frame_ms", l.frame_duration.as_millis_f64().to_string());
        kv("slot_ms", l.slot_duration.as_millis_f64().to_string());
        kv("carriers", l.carriers.to_string());
        kv("slots_per_carrier", l.slots_per_carrier.to_string());
        kv("symbols_per_slot", l.symbols_per_slot.to_string());
        kv("esn0_db", l.dedicated_esn0_db.to_string());
        kv("margin_db", l.random_margin_db.to_string());
        kv("one_way_delay_ms", l.one_way_delay.as_millis_f64().to_string());
        kv("ra_block_slots", l.ra_block_slots.to_string());
        kv("per_st_cap", l.per_st_cap.to_string());
        kv("access_method", self.access.to_string());
        kv("policy", self.policy.to_string());
        kv("num_sessions", self.num_sessions.to_string());
        kv("datagram_bytes", self.datagram_bytes.to_string());
        kv("seed", self.seed.to_string());
        kv("loss_model", self.loss_model.to_string());
        if let Some(p) = &self.plr_table {
            kv("plr_table", p.display().to_string());
        }
        kv("seq_threshold", self.seq_threshold.to_string());
        if let Some(b) = self.ra_block_budget {
            kv("ra_block_budget", b.to_string());
        }
        if let Some(b) = self.flow_bytes {
            kv("flow_bytes", b.to_string());
        }
        kv("initial_cwnd", self.initial_cwnd.to_string());
        kv("idle_timeout_s", self.idle_timeout.as_secs_f64().to_string());
        if let Some(b) = self.random_info_bits {
            kv("random_info_bits", b.to_string());
        }
        kv("max_sic_iterations", self.max_sic_iterations.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        Scenario::parse(text, Path::new("/tmp/s.cfg"))
    }

    #[test]
    fn defaults_and_keys() {
        let sc = parse(
            "# comment\n\naccess_method = musca3  # trailing\nnum_sessions=200\nduration_s = 2.5\n\
             one_way_delay_ms = 300\nplr_table = curve.csv\nseq_threshold = inf\n",
        )
        .unwrap();
        assert_eq!(sc.access, AccessMethod::MUSCA3);
        assert_eq!(sc.policy, Policy::Random);
        assert_eq!(sc.num_sessions, 200);
        assert_eq!(sc.duration, SimTime::from_millis(2500));
        assert_eq!(sc.link.rtt(), SimTime::from_millis(600));
        assert_eq!(sc.plr_table, Some(PathBuf::from("/tmp/curve.csv")));
        assert_eq!(sc.seq_threshold, SeqThreshold::INFINITE);
        assert!(sc.validate().is_ok());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("seed = 1\nbogus = 3\n").unwrap_err();
        assert!(matches!(e, Error::Scenario { line: 2, .. }), "{e}");
        assert!(parse("seed\n").is_err());
        assert!(parse("seed = -1\n").is_err());
        assert!(parse("seed = 1\nseed = 2\n").is_err());
        assert!(parse("access_method = aloha\n").is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let sc = parse("carriers = 0\nnum_sessions = 0\npolicy = random\n").unwrap();
        match sc.validate() {
            Err(Error::InvalidConfig(v)) => {
                let fields: Vec<_> = v.iter().map(|x| x.field).collect();
                assert!(fields.contains(&"carriers"));
                assert!(fields.contains(&"num_sessions"));
                assert!(fields.contains(&"policy"));
            }
            other => panic!("{other:?}"),
        }
        let sc = parse("access_method = crdsa3\nloss_model = table\n").unwrap();
        assert!(sc.validate().is_err());
        let sc = parse("access_method = crdsa3\npolicy = hybrid\nra_block_budget = 41\n").unwrap();
        assert!(sc.validate().is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut sc = Scenario::new(AccessMethod::CRDSA3, 300);
        sc.policy = Policy::Hybrid;
        sc.seq_threshold = SeqThreshold::Fixed(42);
        sc.ra_block_budget = Some(12);
        sc.flow_bytes = Some(90_000);
        sc.link.one_way_delay = SimTime::from_micros(123_457);
        sc.random_info_bits = Some(594);
        let back = Scenario::parse(&sc.to_text(), Path::new("x.cfg")).unwrap();
        assert_eq!(back, sc);
    }
}
