//! Random access for the head of a flow, dedicated access for the rest.
//!
//! Each frame the policy (1) updates its estimate of the number of active
//! flows, (2) reserves its RA block budget, and (3) moves every flow whose
//! next datagram lies beyond `SEQ(N)` to dedicated access. The switch is
//! one-way.

use crate::config::LinkConfig;
use crate::mac::{connection_frames, max_packets_per_frame};
use crate::config::AccessMethod;
use crate::scenario::SeqThreshold;

/// Weight of the newest sample in the active-flow estimate.
pub const LOAD_EWMA_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct HybridPolicy {
    pub seq_threshold: SeqThreshold,
    pub ra_block_budget: u32,
    /// Smoothed number of flows with queued data.
    pub load_estimate: f64,
    model: CrossoverModel,
}

impl HybridPolicy {
    pub fn new(
        seq_threshold: SeqThreshold,
        ra_block_budget: u32,
        initial_flows: u32,
        model: CrossoverModel,
    ) -> Self {
        HybridPolicy {
            seq_threshold,
            ra_block_budget,
            load_estimate: initial_flows as f64,
            model,
        }
    }

    pub fn observe(&mut self, active_flows: usize) {
        self.load_estimate = LOAD_EWMA_ALPHA * active_flows as f64 + (1.0 - LOAD_EWMA_ALPHA) * self.load_estimate;
    }

    /// `SEQ(N)` for the current load estimate.
    pub fn threshold(&self) -> u64 {
        match self.seq_threshold {
            SeqThreshold::Fixed(n) => n,
            SeqThreshold::Auto => self.model.crossover(self.load_estimate.round().max(1.0) as u64),
        }
    }

    /// Whether a flow whose next datagram is `next_seq` stays on random access.
    pub fn stays_random(&self, next_seq: u64) -> bool {
        next_seq <= self.threshold()
    }
}

/// Single-flow estimate of when dedicated access overtakes random access.
///
/// Both schemes are modelled as a connection delay followed by a constant
/// per-frame rate: the fair dedicated share of `dedicated_slots`, or the
/// per-frame packet cap of random access.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverModel {
    pub dedicated_slots: u32,
    pub per_st_cap: u32,
    pub slots_per_datagram: u32,
    pub packets_per_frame: u32,
    pub packets_per_datagram: u32,
    pub dedicated_connection: u64,
    pub random_connection: u64,
}

impl CrossoverModel {
    pub fn new(
        link: &LinkConfig,
        access: AccessMethod,
        dedicated_slots: u32,
        ra_blocks: u32,
        dedicated_bits: u32,
        random_bits: u32,
        datagram_bytes: u32,
    ) -> Self {
        let bits = datagram_bytes as u64 * 8;
        CrossoverModel {
            dedicated_slots,
            per_st_cap: link.per_st_cap,
            slots_per_datagram: bits.div_ceil(dedicated_bits as u64) as u32,
            packets_per_frame: max_packets_per_frame(access.bursts_per_packet(), link.slots_per_carrier).min(ra_blocks),
            packets_per_datagram: bits.div_ceil(random_bits as u64) as u32,
            dedicated_connection: connection_frames(AccessMethod::Dedicated, link.rtt(), link.frame_duration),
            random_connection: connection_frames(access, link.rtt(), link.frame_duration),
        }
    }

    /// Smallest datagram count `n` for which dedicated access delivers the
    /// first `n` datagrams no later than random access, given `flows` flows
    /// sharing the dedicated capacity. `u64::MAX` when it never does.
    pub fn crossover(&self, flows: u64) -> u64 {
        let share = (self.dedicated_slots as u64 / flows.max(1)).min(self.per_st_cap as u64);
        let ded_rate = share as f64 / self.slots_per_datagram as f64;
        let ra_rate = self.packets_per_frame as f64 / self.packets_per_datagram as f64;
        if ded_rate <= ra_rate || ra_rate == 0.0 {
            return if ra_rate == 0.0 { 0 } else { u64::MAX };
        }
        let head_start = self.dedicated_connection.saturating_sub(self.random_connection) as f64;
        // c_d + n / r_d <= c_r + n / r_r
        let n = head_start / (1.0 / ra_rate - 1.0 / ded_rate);
        (n.ceil() as u64).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> CrossoverModel {
        CrossoverModel::new(&LinkConfig::default(), AccessMethod::MUSCA3, 4000, 40, 920, 680, 1500)
    }

    #[test]
    fn model_geometry() {
        let m = model();
        assert_eq!(m.slots_per_datagram, 14);
        assert_eq!(m.packets_per_datagram, 18);
        assert_eq!(m.packets_per_frame, 13);
        assert_eq!(m.dedicated_connection, 13);
        assert_eq!(m.random_connection, 1);
    }

    #[test]
    fn crossover_oracle() {
        // 200 flows: 20 slots each, 20/14 datagrams per frame against 13/18.
        // 12 frames of head start: n >= 12 / (18/13 - 14/20) = 17.5...
        assert_eq!(model().crossover(200), 18);
        // At 400 flows 10 slots give 10/14 < 13/18 datagrams per frame.
        assert_eq!(model().crossover(400), u64::MAX);
    }

    #[test]
    fn threshold_examples() {
        let p = HybridPolicy::new(SeqThreshold::Fixed(10), 10, 100, model());
        assert!(p.stays_random(3));
        assert!(!p.stays_random(42));
        let p = HybridPolicy::new(SeqThreshold::Fixed(0), 0, 100, model());
        assert!(!p.stays_random(1));
        let p = HybridPolicy::new(SeqThreshold::INFINITE, 40, 100, model());
        assert!(p.stays_random(u64::MAX - 1));
    }

    #[test]
    fn estimate_is_smoothed() {
        let mut p = HybridPolicy::new(SeqThreshold::Auto, 10, 100, model());
        p.observe(200);
        assert!((p.load_estimate - 130.0).abs() < 1e-9);
        assert_eq!(p.threshold(), model().crossover(130));
    }
}
