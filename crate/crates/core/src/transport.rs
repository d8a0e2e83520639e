//! A TCP NewReno sender with SACK-based loss recovery, and its receiver.
//!
//! One segment is one IP datagram. Sequence numbers count segments from 1
//! and an ACK carries the next expected segment. The sender never blocks on
//! the receive window; it is limited by `cwnd` alone.
//!
//! Recovery follows the conservative pipe algorithm: a segment counts as
//! lost once three segments above it are SACKed, and in fast recovery the
//! sender fills `cwnd - pipe` with retransmissions of lost segments before
//! new data.

use std::collections::{BTreeSet, VecDeque};

use crate::config::FlowId;
use crate::time::SimTime;

/// SACKed segments above a hole that mark it lost.
pub const DUP_THRESH: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpConfig {
    pub initial_cwnd: f64,
    pub initial_rto: SimTime,
    pub min_rto: SimTime,
    pub max_rto: SimTime,
    pub segment_bytes: u32,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            initial_cwnd: 3.0,
            initial_rto: SimTime::from_secs(3),
            min_rto: SimTime::from_secs(1),
            max_rto: SimTime::from_secs(60),
            segment_bytes: 1500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    SlowStart,
    CongestionAvoidance,
    FastRecovery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Segment {
    pub flow_id: FlowId,
    pub seq_no: u64,
    pub size_bytes: u32,
    pub retransmission: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Outstanding {
    sent_at: SimTime,
    sacked: bool,
    lost: bool,
    retransmitted: bool,
}

/// Congestion-control state of one sender.
#[derive(Debug, Clone, PartialEq)]
pub struct TcpState {
    pub cwnd: f64,
    pub ssthresh: f64,
    /// Highest sequence number sent so far (0 before the first send).
    pub highest_sent: u64,
    /// Highest cumulatively acknowledged sequence number.
    pub highest_acked: u64,
    pub sacked: BTreeSet<u64>,
    pub rto: SimTime,
    pub srtt: Option<SimTime>,
    pub rttvar: SimTime,
    pub dup_acks: u32,
    pub phase: Phase,
    /// Fast recovery ends once this segment is cumulatively acknowledged.
    pub recover: u64,
}

/// Loss-recovery events seen by one sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TcpStats {
    pub timeouts: u64,
    pub fast_recoveries: u64,
    pub retransmissions: u64,
}

#[derive(Debug, Clone)]
pub struct TcpSender {
    pub flow_id: FlowId,
    pub config: TcpConfig,
    pub state: TcpState,
    /// Segments the application will ever send; `None` for a bulk transfer.
    pub limit: Option<u64>,
    pub stats: TcpStats,
    /// Per-segment records for `highest_acked + 1 ..= highest_sent`.
    window: VecDeque<Outstanding>,
    timer: Option<SimTime>,
    timer_generation: u64,
    /// The fast retransmit goes out even when pipe exceeds cwnd.
    fast_retransmit_due: bool,
    /// Records in `window` currently marked lost.
    lost_marks: usize,
}

impl TcpSender {
    pub fn new(flow_id: FlowId, config: TcpConfig, limit: Option<u64>) -> Self {
        TcpSender {
            flow_id,
            state: TcpState {
                cwnd: config.initial_cwnd.max(1.0),
                ssthresh: f64::INFINITY,
                highest_sent: 0,
                highest_acked: 0,
                sacked: BTreeSet::new(),
                rto: config.initial_rto,
                srtt: None,
                rttvar: SimTime::ZERO,
                dup_acks: 0,
                phase: Phase::SlowStart,
                recover: 0,
            },
            config,
            limit,
            stats: TcpStats::default(),
            window: VecDeque::new(),
            timer: None,
            timer_generation: 0,
            fast_retransmit_due: false,
            lost_marks: 0,
        }
    }

    pub fn flightsize(&self) -> u64 {
        self.state.highest_sent - self.state.highest_acked
    }

    /// Segments believed to be in the network.
    pub fn pipe(&self) -> u64 {
        if self.lost_marks == 0 && self.state.sacked.is_empty() {
            return self.window.len() as u64;
        }
        self.window
            .iter()
            .filter(|o| !o.sacked && (!o.lost || o.retransmitted))
            .count() as u64
    }

    /// The next sequence number that has never been sent.
    pub fn next_new_seq(&self) -> u64 {
        self.state.highest_sent + 1
    }

    /// All data acknowledged and nothing left to send.
    pub fn finished(&self) -> bool {
        self.limit.is_some_and(|l| self.state.highest_acked >= l)
    }

    /// Retransmission deadline and the generation that identifies it.
    pub fn timer(&self) -> Option<(SimTime, u64)> {
        self.timer.map(|t| (t, self.timer_generation))
    }

    fn arm_timer(&mut self, now: SimTime) {
        self.timer = Some(now + self.state.rto);
        self.timer_generation += 1;
    }

    fn record(&self, seq: u64) -> Option<&Outstanding> {
        let una = self.state.highest_acked + 1;
        seq.checked_sub(una).and_then(|i| self.window.get(i as usize))
    }

    /// Emits what the window allows: lost segments first, then new data.
    pub fn on_send_opportunity(&mut self, now: SimTime) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut pipe = self.pipe();
        let cwnd = self.state.cwnd.floor().max(1.0) as u64;
        let una = self.state.highest_acked + 1;
        let mut cursor = 0usize;
        loop {
            let forced = std::mem::take(&mut self.fast_retransmit_due);
            if pipe >= cwnd && !forced {
                break;
            }
            if self.lost_marks == 0 {
                cursor = self.window.len();
            }
            let hole = (cursor..self.window.len()).find(|&i| {
                let o = &self.window[i];
                o.lost && !o.retransmitted && !o.sacked
            });
            let seg = if let Some(i) = hole {
                cursor = i + 1;
                let o = &mut self.window[i];
                o.retransmitted = true;
                o.sent_at = now;
                self.stats.retransmissions += 1;
                if i == 0 {
                    // The retransmitted head gets a full timeout of its own.
                    self.arm_timer(now);
                }
                Segment {
                    flow_id: self.flow_id,
                    seq_no: una + i as u64,
                    size_bytes: self.config.segment_bytes,
                    retransmission: true,
                }
            } else {
                cursor = self.window.len();
                let seq = self.state.highest_sent + 1;
                if self.limit.is_some_and(|l| seq > l) {
                    break;
                }
                self.state.highest_sent = seq;
                self.window.push_back(Outstanding {
                    sent_at: now,
                    sacked: false,
                    lost: false,
                    retransmitted: false,
                });
                Segment {
                    flow_id: self.flow_id,
                    seq_no: seq,
                    size_bytes: self.config.segment_bytes,
                    retransmission: false,
                }
            };
            out.push(seg);
            pipe += 1;
        }
        if !out.is_empty() && self.timer.is_none() {
            self.arm_timer(now);
        }
        out
    }

    /// Processes a cumulative ACK with SACK ranges `[start, end)`.
    pub fn on_ack(&mut self, ack_no: u64, sack_blocks: &[(u64, u64)], now: SimTime) {
        let una = self.state.highest_acked + 1;
        if ack_no > self.state.highest_sent + 1 {
            return;
        }
        for &(start, end) in sack_blocks {
            for seq in start.max(ack_no)..end.min(self.state.highest_sent + 1) {
                let i = (seq - una) as usize;
                if !self.window[i].sacked {
                    self.window[i].sacked = true;
                    self.state.sacked.insert(seq);
                }
            }
        }

        if ack_no > una {
            let newest = ack_no - 1;
            if let Some(o) = self.record(newest) {
                if !o.retransmitted {
                    self.rtt_sample(now.saturating_sub(o.sent_at));
                }
            }
            let advanced = ack_no - una;
            let cleared = self.window.drain(..advanced as usize).filter(|o| o.lost).count();
            self.lost_marks -= cleared;
            self.state.highest_acked = newest;
            self.state.sacked = self.state.sacked.split_off(&ack_no);
            self.state.dup_acks = 0;

            if self.state.phase == Phase::FastRecovery {
                if newest >= self.state.recover {
                    self.state.cwnd = self.state.ssthresh;
                    self.state.phase = Phase::CongestionAvoidance;
                } else {
                    // Partial ACK: the new left edge is the next hole.
                    self.mark_head_lost();
                }
            } else if self.state.cwnd < self.state.ssthresh {
                self.state.cwnd += 1.0;
                if self.state.cwnd >= self.state.ssthresh {
                    self.state.phase = Phase::CongestionAvoidance;
                }
            } else {
                self.state.cwnd += 1.0 / self.state.cwnd;
                self.state.phase = Phase::CongestionAvoidance;
            }

            if self.window.is_empty() {
                self.timer = None;
                self.timer_generation += 1;
            } else {
                self.arm_timer(now);
            }
        } else if ack_no == una && !self.window.is_empty() {
            self.state.dup_acks += 1;
        }

        let newly_lost = self.mark_lost();
        if self.state.phase != Phase::FastRecovery
            && !self.window.is_empty()
            && (self.state.dup_acks >= DUP_THRESH || newly_lost)
        {
            self.enter_recovery();
        }
    }

    /// Marks holes with at least `DUP_THRESH` SACKed segments above them.
    fn mark_lost(&mut self) -> bool {
        if self.state.sacked.len() < DUP_THRESH as usize {
            return false;
        }
        let mut above = 0u32;
        let mut marked = 0;
        for o in self.window.iter_mut().rev() {
            if o.sacked {
                above += 1;
            } else if above >= DUP_THRESH && !o.lost {
                o.lost = true;
                marked += 1;
            }
        }
        self.lost_marks += marked;
        marked > 0
    }

    /// Marks the first unacknowledged segment lost; true if it was not
    /// SACKed and had not been marked before.
    fn mark_head_lost(&mut self) -> bool {
        match self.window.front_mut() {
            Some(head) if !head.sacked => {
                if !head.lost {
                    head.lost = true;
                    self.lost_marks += 1;
                }
                true
            }
            _ => false,
        }
    }

    fn enter_recovery(&mut self) {
        let flight = self.flightsize() as f64;
        self.state.ssthresh = (flight / 2.0).floor().max(2.0);
        self.state.cwnd = self.state.ssthresh;
        self.state.phase = Phase::FastRecovery;
        self.state.recover = self.state.highest_sent;
        self.stats.fast_recoveries += 1;
        self.fast_retransmit_due = self.mark_head_lost();
    }

    /// Retransmission timeout: collapse the window and treat every
    /// unSACKed segment as lost.
    pub fn on_timeout(&mut self, now: SimTime) {
        self.timer = None;
        self.timer_generation += 1;
        if self.window.is_empty() {
            return;
        }
        self.stats.timeouts += 1;
        let flight = self.flightsize() as f64;
        self.state.ssthresh = (flight / 2.0).floor().max(2.0);
        self.state.cwnd = 1.0;
        self.state.phase = Phase::SlowStart;
        self.state.dup_acks = 0;
        self.state.recover = self.state.highest_sent;
        self.fast_retransmit_due = false;
        for o in self.window.iter_mut().filter(|o| !o.sacked) {
            o.lost = true;
            o.retransmitted = false;
        }
        self.lost_marks = self.window.iter().filter(|o| o.lost).count();
        self.state.rto = (self.state.rto.times(2)).min(self.config.max_rto);
        let _ = now;
    }

    fn rtt_sample(&mut self, r: SimTime) {
        let s = &mut self.state;
        match s.srtt {
            None => {
                s.srtt = Some(r);
                s.rttvar = SimTime::from_micros(r.as_micros() / 2);
            }
            Some(srtt) => {
                let diff = srtt.as_micros().abs_diff(r.as_micros());
                s.rttvar = SimTime::from_micros((3 * s.rttvar.as_micros() + diff) / 4);
                s.srtt = Some(SimTime::from_micros((7 * srtt.as_micros() + r.as_micros()) / 8));
            }
        }
        let rto = s.srtt.unwrap() + s.rttvar.times(4);
        s.rto = rto.max(self.config.min_rto).min(self.config.max_rto);
    }
}

/// What the receiver sends back for each arriving segment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Ack {
    pub flow_id: FlowId,
    pub ack_no: u64,
    /// Out-of-order data held by the receiver, as `[start, end)` ranges.
    pub sack: Vec<(u64, u64)>,
}

#[derive(Debug, Clone)]
pub struct TcpReceiver {
    pub flow_id: FlowId,
    next_expected: u64,
    out_of_order: BTreeSet<u64>,
    /// Arrival time of each in-order segment: entry `n - 1` is when `n`
    /// segments had been received contiguously.
    in_order_times: Vec<SimTime>,
}

impl TcpReceiver {
    pub fn new(flow_id: FlowId) -> Self {
        TcpReceiver {
            flow_id,
            next_expected: 1,
            out_of_order: BTreeSet::new(),
            in_order_times: Vec::new(),
        }
    }

    /// Accepts a segment; returns the ACK and whether the data was new.
    pub fn on_segment(&mut self, seq_no: u64, now: SimTime) -> (Ack, bool) {
        let fresh = seq_no >= self.next_expected && !self.out_of_order.contains(&seq_no);
        if seq_no == self.next_expected {
            self.next_expected += 1;
            self.in_order_times.push(now);
            while self.out_of_order.remove(&self.next_expected) {
                self.next_expected += 1;
                self.in_order_times.push(now);
            }
        } else if fresh {
            self.out_of_order.insert(seq_no);
        }
        (self.ack(), fresh)
    }

    pub fn ack(&self) -> Ack {
        let mut sack: Vec<(u64, u64)> = Vec::new();
        for &s in &self.out_of_order {
            match sack.last_mut() {
                Some(last) if last.1 == s => last.1 = s + 1,
                _ => sack.push((s, s + 1)),
            }
        }
        Ack {
            flow_id: self.flow_id,
            ack_no: self.next_expected,
            sack,
        }
    }

    pub fn next_expected(&self) -> u64 {
        self.next_expected
    }

    /// Distinct segments received, in order or not.
    pub fn received(&self) -> u64 {
        self.next_expected - 1 + self.out_of_order.len() as u64
    }

    pub fn in_order_times(&self) -> &[SimTime] {
        &self.in_order_times
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sender(iw: f64) -> TcpSender {
        TcpSender::new(
            0,
            TcpConfig {
                initial_cwnd: iw,
                ..Default::default()
            },
            None,
        )
    }

    fn t(ms: u64) -> SimTime {
        SimTime::from_millis(ms)
    }

    #[test]
    fn window_arithmetic() {
        let mut s = sender(3.0);
        let segs = s.on_send_opportunity(t(0));
        assert_eq!(segs.iter().map(|s| s.seq_no).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(s.on_send_opportunity(t(1)).is_empty());
        assert_eq!(s.flightsize(), 3);
    }

    #[test]
    fn slow_start_adds_one_per_ack() {
        let mut s = sender(3.0);
        s.on_send_opportunity(t(0));
        s.on_ack(2, &[], t(500));
        assert_eq!(s.state.cwnd, 4.0);
        assert_eq!(s.state.phase, Phase::SlowStart);
        assert_eq!(s.on_send_opportunity(t(500)).len(), 2);
    }

    #[test]
    fn congestion_avoidance_adds_inverse_cwnd() {
        let mut s = sender(4.0);
        s.state.ssthresh = 4.0;
        s.on_send_opportunity(t(0));
        s.on_ack(2, &[], t(500));
        assert!((s.state.cwnd - 4.25).abs() < 1e-12);
        assert_eq!(s.state.phase, Phase::CongestionAvoidance);
    }

    #[test]
    fn third_dup_ack_halves_and_retransmits() {
        let mut s = sender(16.0);
        s.on_send_opportunity(t(0));
        for k in 0..3 {
            assert_ne!(s.state.phase, Phase::FastRecovery);
            s.on_ack(1, &[(2, 3 + k)], t(500));
        }
        assert_eq!(s.state.phase, Phase::FastRecovery);
        assert_eq!(s.state.ssthresh, 8.0);
        assert_eq!(s.state.cwnd, 8.0);
        let segs = s.on_send_opportunity(t(500));
        assert_eq!(segs[0].seq_no, 1);
        assert!(segs[0].retransmission);
        // Pipe is 12 (16 sent, 3 SACKed, 1 lost): only the fast retransmit goes.
        assert_eq!(segs.len(), 1);
    }

    #[test]
    fn recovery_ends_at_the_recovery_point() {
        let mut s = sender(8.0);
        s.on_send_opportunity(t(0));
        for k in 0..3 {
            s.on_ack(1, &[(2, 3 + k)], t(500));
        }
        s.on_send_opportunity(t(500));
        s.on_ack(9, &[], t(1000));
        assert_eq!(s.state.phase, Phase::CongestionAvoidance);
        assert_eq!(s.state.cwnd, s.state.ssthresh);
        assert_eq!(s.state.ssthresh, 4.0);
    }

    #[test]
    fn partial_ack_exposes_the_next_hole() {
        let mut s = sender(10.0);
        s.on_send_opportunity(t(0));
        // 1 and 5 lost; 2..5 and 6..11 SACKed.
        s.on_ack(1, &[(2, 5), (6, 11)], t(500));
        assert_eq!(s.state.phase, Phase::FastRecovery);
        let segs = s.on_send_opportunity(t(500));
        assert_eq!(segs.iter().filter(|x| x.retransmission).map(|x| x.seq_no).collect::<Vec<_>>(), vec![1, 5]);
        s.on_ack(5, &[(6, 11)], t(1000));
        assert_eq!(s.state.phase, Phase::FastRecovery);
        s.on_ack(11, &[], t(1000));
        assert_eq!(s.state.phase, Phase::CongestionAvoidance);
    }

    #[test]
    fn timeout_resets_to_one_segment() {
        let mut s = sender(20.0);
        s.on_send_opportunity(t(0));
        s.state.rto = SimTime::from_secs(1);
        s.on_timeout(t(3000));
        assert_eq!(s.state.cwnd, 1.0);
        assert_eq!(s.state.ssthresh, 10.0);
        assert_eq!(s.state.phase, Phase::SlowStart);
        assert_eq!(s.state.rto, SimTime::from_secs(2));
        let segs = s.on_send_opportunity(t(3000));
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].seq_no, 1);
        assert!(segs[0].retransmission);
    }

    #[test]
    fn rto_backoff_is_capped() {
        let mut s = sender(3.0);
        s.on_send_opportunity(t(0));
        s.state.rto = SimTime::from_secs(60);
        s.on_timeout(t(60_000));
        assert_eq!(s.state.rto, SimTime::from_secs(60));
    }

    #[test]
    fn rtt_estimation_follows_the_standard_filter() {
        let mut s = sender(3.0);
        s.on_send_opportunity(t(0));
        s.on_ack(2, &[], t(600));
        assert_eq!(s.state.srtt, Some(t(600)));
        assert_eq!(s.state.rttvar, t(300));
        assert_eq!(s.state.rto, t(1800));
        s.on_ack(3, &[], t(1000));
        // srtt = 7/8 * 600 + 1/8 * 1000; rttvar = 3/4 * 300 + 1/4 * 400.
        assert_eq!(s.state.srtt, Some(t(650)));
        assert_eq!(s.state.rttvar, t(325));
        assert_eq!(s.state.rto, t(1950));
    }

    #[test]
    fn timer_is_armed_and_cleared() {
        let mut s = sender(2.0);
        assert!(s.timer().is_none());
        s.on_send_opportunity(t(0));
        let (deadline, g) = s.timer().unwrap();
        assert_eq!(deadline, t(3000));
        s.on_ack(2, &[], t(500));
        let (_, g2) = s.timer().unwrap();
        assert!(g2 > g);
        s.on_ack(3, &[], t(600));
        assert!(s.timer().is_none());
    }

    #[test]
    fn limited_flow_stops() {
        let mut s = TcpSender::new(0, TcpConfig::default(), Some(2));
        assert_eq!(s.on_send_opportunity(t(0)).len(), 2);
        s.on_ack(3, &[], t(500));
        assert!(s.finished());
        assert!(s.on_send_opportunity(t(500)).is_empty());
    }

    #[test]
    fn receiver_acks_and_sacks() {
        let mut r = TcpReceiver::new(4);
        assert_eq!(r.on_segment(1, t(0)).0.ack_no, 2);
        let (a, fresh) = r.on_segment(3, t(1));
        assert!(fresh);
        assert_eq!((a.ack_no, a.sack.clone()), (2, vec![(3, 4)]));
        r.on_segment(4, t(2));
        r.on_segment(6, t(3));
        assert_eq!(r.ack().sack, vec![(3, 5), (6, 7)]);
        let (a, _) = r.on_segment(2, t(4));
        assert_eq!((a.ack_no, a.sack), (5, vec![(6, 7)]));
        assert!(!r.on_segment(3, t(5)).1);
        assert_eq!(r.received(), 5);
        assert_eq!(r.in_order_times(), &[t(0), t(4), t(4), t(4)]);
    }

    /// Loss-free slow start over a fixed RTT: after k round trips the sender
    /// has sent `iw * 2^k` segments in that round.
    #[test]
    fn slow_start_doubles_per_round_trip() {
        let iw = 3u64;
        let mut s = sender(iw as f64);
        let mut r = TcpReceiver::new(0);
        let mut round = s.on_send_opportunity(t(0));
        for k in 0..6u64 {
            assert_eq!(round.len() as u64, iw << k, "round {k}");
            let now = t(500 * (k + 1));
            let mut next = Vec::new();
            for seg in round {
                let (ack, _) = r.on_segment(seg.seq_no, now);
                s.on_ack(ack.ack_no, &ack.sack, now);
                next.extend(s.on_send_opportunity(now));
            }
            round = next;
        }
    }

    proptest! {
        /// Random segment losses with retransmissions: every segment is
        /// eventually delivered once and the receiver sees no gaps.
        #[test]
        fn lossy_transfer_completes(losses in prop::collection::vec(any::<bool>(), 200), iw in 1u32..12) {
            let total = 60u64;
            let mut s = TcpSender::new(0, TcpConfig { initial_cwnd: iw as f64, ..Default::default() }, Some(total));
            let mut r = TcpReceiver::new(0);
            let mut pending: Vec<Segment> = s.on_send_opportunity(t(0));
            let mut draw = losses.iter().cycle();
            let mut now = t(0);
            for _ in 0..10_000 {
                if s.finished() { break; }
                now += t(100);
                if pending.is_empty() {
                    s.on_timeout(now);
                    pending = s.on_send_opportunity(now);
                    continue;
                }
                let batch = std::mem::take(&mut pending);
                for seg in batch {
                    prop_assert!(s.flightsize() >= s.pipe());
                    if *draw.next().unwrap() && seg.seq_no % 3 == 0 {
                        continue;
                    }
                    let (ack, _) = r.on_segment(seg.seq_no, now);
                    s.on_ack(ack.ack_no, &ack.sack, now);
                    pending.extend(s.on_send_opportunity(now));
                }
            }
            prop_assert!(s.finished());
            prop_assert_eq!(r.next_expected(), total + 1);
            prop_assert_eq!(r.in_order_times().len() as u64, total);
            prop_assert!(s.state.cwnd >= 1.0 && s.state.ssthresh >= 2.0);
        }
    }
}
