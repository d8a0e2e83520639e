//! Link configuration and the domain types shared by every layer.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::time::SimTime;

pub type FlowId = u32;

/// Return-link frame geometry and operating points.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    /// Frame period `T_F`; one burst time plan is issued per frame.
    pub frame_duration: SimTime,
    pub carriers: u32,
    pub slots_per_carrier: u32,
    pub symbols_per_slot: u32,
    pub slot_duration: SimTime,
    /// Clear-sky Es/N0 of dedicated access, in dB.
    pub dedicated_esn0_db: f64,
    /// Back-off applied to random access relative to dedicated access, in dB.
    pub random_margin_db: f64,
    pub one_way_delay: SimTime,
    pub ra_block_slots: u32,
    /// Most slots a single terminal may use in one frame (one carrier at a time).
    pub per_st_cap: u32,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            frame_duration: SimTime::from_millis(45),
            carriers: 100,
            slots_per_carrier: 40,
            symbols_per_slot: 536,
            slot_duration: SimTime::from_micros(1_090),
            dedicated_esn0_db: 8.6,
            random_margin_db: 3.5,
            one_way_delay: SimTime::from_millis(250),
            ra_block_slots: 100,
            per_st_cap: 40,
        }
    }
}

impl LinkConfig {
    pub fn total_slots(&self) -> u32 {
        self.carriers.saturating_mul(self.slots_per_carrier)
    }

    pub fn rtt(&self) -> SimTime {
        self.one_way_delay + self.one_way_delay
    }

    /// Index of the frame that contains `t`.
    pub fn frame_of(&self, t: SimTime) -> u64 {
        t.as_micros() / self.frame_duration.as_micros().max(1)
    }

    pub fn frame_start(&self, frame: u64) -> SimTime {
        self.frame_duration.times(frame)
    }
}

/// The clear-sky configuration: 100 carriers x 40 slots in a 45 ms frame.
pub fn default_config() -> LinkConfig {
    LinkConfig::default()
}

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every invariant of `config` and reports all violations at once.
pub fn validate(config: &LinkConfig) -> Result<(), Vec<ConfigViolation>> {
    let mut out = Vec::new();
    let mut push = |field: &'static str, message: String| out.push(ConfigViolation { field, message });

    let counts = [
        ("carriers", config.carriers),
        ("slots_per_carrier", config.slots_per_carrier),
        ("symbols_per_slot", config.symbols_per_slot),
        ("ra_block_slots", config.ra_block_slots),
        ("per_st_cap", config.per_st_cap),
    ];
    for (field, v) in counts {
        if v == 0 {
            push(field, format!("{field} must be positive"));
        }
    }
    let times = [
        ("frame_duration", config.frame_duration),
        ("slot_duration", config.slot_duration),
        ("one_way_delay", config.one_way_delay),
    ];
    for (field, v) in times {
        if v == SimTime::ZERO {
            push(field, format!("{field} must be positive"));
        }
    }
    if !config.dedicated_esn0_db.is_finite() {
        push("dedicated_esn0_db", "must be finite".into());
    }
    if !config.random_margin_db.is_finite() || config.random_margin_db < 0.0 {
        push("random_margin_db", "must be finite and non-negative".into());
    }

    let total = config.total_slots();
    if total > 0 && config.ra_block_slots > 0 && !total.is_multiple_of(config.ra_block_slots) {
        push(
            "ra_block_slots",
            format!(
                "{} is not a divisor of the {} slots per frame",
                config.ra_block_slots, total
            ),
        );
    }
    if config.slots_per_carrier > 0 && config.slot_duration > SimTime::ZERO {
        let busy = config.slot_duration.times(config.slots_per_carrier as u64);
        if busy > config.frame_duration {
            push(
                "slot_duration",
                format!(
                    "{} slots of {} ms do not fit in a {} ms frame",
                    config.slots_per_carrier,
                    config.slot_duration.as_millis_f64(),
                    config.frame_duration.as_millis_f64()
                ),
            );
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// How a flow reaches the gateway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AccessMethod {
    /// Demand-assigned slots from the burst time plan.
    Dedicated,
    /// CRDSA with `replicas` identical bursts per packet.
    Crdsa { replicas: u32 },
    /// MuSCA with one codeword split into `bursts` parts.
    Musca { bursts: u32 },
}

impl AccessMethod {
    pub const CRDSA3: AccessMethod = AccessMethod::Crdsa { replicas: 3 };
    pub const MUSCA3: AccessMethod = AccessMethod::Musca { bursts: 3 };

    pub fn is_random(self) -> bool {
        !matches!(self, AccessMethod::Dedicated)
    }

    /// Bursts per packet; 1 for dedicated access.
    pub fn bursts_per_packet(self) -> u32 {
        match self {
            AccessMethod::Dedicated => 1,
            AccessMethod::Crdsa { replicas } => replicas,
            AccessMethod::Musca { bursts } => bursts,
        }
    }

    pub fn validate_for(self, config: &LinkConfig) -> Result<(), Error> {
        let n_b = self.bursts_per_packet();
        if self.is_random() && (n_b < 2 || n_b > config.ra_block_slots) {
            return Err(Error::Configuration(format!(
                "{self}: bursts per packet must lie in [2, {}]",
                config.ra_block_slots
            )));
        }
        Ok(())
    }
}

impl fmt::Display for AccessMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessMethod::Dedicated => f.write_str("dedicated"),
            AccessMethod::Crdsa { replicas } => write!(f, "crdsa{replicas}"),
            AccessMethod::Musca { bursts } => write!(f, "musca{bursts}"),
        }
    }
}

impl FromStr for AccessMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let count = |rest: &str| -> Result<u32, Error> {
            rest.parse::<u32>()
                .map_err(|_| Error::UnsupportedMethod(s.clone()))
        };
        if s == "dedicated" {
            Ok(AccessMethod::Dedicated)
        } else if let Some(rest) = s.strip_prefix("crdsa") {
            Ok(AccessMethod::Crdsa { replicas: count(rest)? })
        } else if let Some(rest) = s.strip_prefix("musca") {
            Ok(AccessMethod::Musca { bursts: count(rest)? })
        } else {
            Err(Error::UnsupportedMethod(s))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Psk8,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Psk8 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeRate {
    pub num: u32,
    pub den: u32,
}

impl CodeRate {
    pub const fn new(num: u32, den: u32) -> Self {
        CodeRate { num, den }
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Modulation/coding pair and the packet it carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Waveform {
    pub modulation: Modulation,
    pub code_rate: CodeRate,
    pub info_bits_per_packet: u32,
    pub bursts_per_packet: u32,
    pub symbols_per_burst: u32,
}

impl Waveform {
    /// Coded capacity in bits across all bursts, rounded down.
    pub fn codeword_capacity_bits(&self) -> u64 {
        let raw = self.modulation.bits_per_symbol() as u64
            * self.bursts_per_packet as u64
            * self.symbols_per_burst as u64
            * self.code_rate.num as u64;
        raw / self.code_rate.den as u64
    }

    pub fn payload_fits(&self) -> bool {
        self.info_bits_per_packet as u64 <= self.codeword_capacity_bits()
    }
}

/// One IP datagram waiting in a terminal's MAC queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub flow_id: FlowId,
    pub seq_no: u64,
    pub size_bytes: u32,
    /// Bits still to be carried over the return link.
    pub remaining_bits: u64,
    pub enqueue_time: SimTime,
}

impl Datagram {
    pub fn new(flow_id: FlowId, seq_no: u64, size_bytes: u32, enqueue_time: SimTime) -> Self {
        Datagram {
            flow_id,
            seq_no,
            size_bytes,
            remaining_bits: size_bytes as u64 * 8,
            enqueue_time,
        }
    }

    pub fn size_bits(&self) -> u64 {
        self.size_bytes as u64 * 8
    }

    /// Packets still needed when each packet carries `bits_per_packet`; the
    /// final fragment occupies a whole packet.
    pub fn packets_needed(&self, bits_per_packet: u32) -> u64 {
        self.remaining_bits.div_ceil(bits_per_packet as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_clear_sky_link() {
        let c = default_config();
        assert_eq!(c.frame_duration, SimTime::from_millis(45));
        assert_eq!(c.total_slots(), 4000);
        assert_eq!(c.symbols_per_slot, 536);
        assert_eq!(c.dedicated_esn0_db, 8.6);
        assert_eq!(c.total_slots() % c.ra_block_slots, 0);
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn zero_carriers_is_reported() {
        let c = LinkConfig {
            carriers: 0,
            ..default_config()
        };
        let errs = validate(&c).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.field == "carriers" && e.message == "carriers must be positive"));
    }

    #[test]
    fn non_divisor_block_size_is_reported() {
        let c = LinkConfig {
            ra_block_slots: 3000,
            ..default_config()
        };
        let errs = validate(&c).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("not a divisor"));
    }

    #[test]
    fn every_violation_is_listed() {
        let c = LinkConfig {
            carriers: 0,
            symbols_per_slot: 0,
            one_way_delay: SimTime::ZERO,
            ..default_config()
        };
        assert_eq!(validate(&c).unwrap_err().len(), 3);
    }

    #[test]
    fn access_method_names_round_trip() {
        for m in [AccessMethod::Dedicated, AccessMethod::CRDSA3, AccessMethod::MUSCA3] {
            assert_eq!(m.to_string().parse::<AccessMethod>().unwrap(), m);
        }
        assert!("aloha".parse::<AccessMethod>().is_err());
        assert!("crdsa".parse::<AccessMethod>().is_err());
    }

    #[test]
    fn random_methods_need_two_bursts() {
        let c = default_config();
        assert!(AccessMethod::Crdsa { replicas: 1 }.validate_for(&c).is_err());
        assert!(AccessMethod::Musca { bursts: 101 }.validate_for(&c).is_err());
        assert!(AccessMethod::MUSCA3.validate_for(&c).is_ok());
    }

    #[test]
    fn final_fragment_pads_a_packet() {
        let d = Datagram::new(0, 1, 1500, SimTime::ZERO);
        assert_eq!(d.packets_needed(920), 14);
        assert_eq!(d.packets_needed(680), 18);
        assert_eq!(d.packets_needed(613), 20);
    }
}
