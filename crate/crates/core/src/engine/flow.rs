//! MAC-side state of one TCP session.

use std::collections::VecDeque;

use crate::config::{AccessMethod, Datagram, FlowId};
use crate::time::SimTime;
use crate::transport::{TcpReceiver, TcpSender};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnState {
    Idle,
    /// Waiting for capacity; transmission starts in frame `until_frame`.
    Connecting { until_frame: u64 },
    Active,
}

/// A datagram waiting at the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuedDatagram {
    pub datagram: Datagram,
    /// One of its packets was lost; the gateway will discard it.
    pub corrupted: bool,
}

#[derive(Debug, Clone)]
pub struct FlowRuntime {
    pub flow_id: FlowId,
    pub access: AccessMethod,
    pub state: ConnState,
    pub idle_deadline: SimTime,
    pub tcp: TcpSender,
    pub receiver: TcpReceiver,
    pub mac_queue: VecDeque<QueuedDatagram>,
    pub active_last_frame: bool,
    /// Became active in the current frame.
    pub new_flow: bool,
    /// Has paid for a dedicated connection at least once.
    pub dedicated_connected: bool,
    /// Generation of the retransmission timer already scheduled.
    pub(crate) scheduled_timer: Option<u64>,
}

impl FlowRuntime {
    pub fn new(flow_id: FlowId, access: AccessMethod, tcp: TcpSender) -> Self {
        FlowRuntime {
            flow_id,
            access,
            state: ConnState::Idle,
            idle_deadline: SimTime::ZERO,
            tcp,
            receiver: TcpReceiver::new(flow_id),
            mac_queue: VecDeque::new(),
            active_last_frame: false,
            new_flow: false,
            dedicated_connected: false,
            scheduled_timer: None,
        }
    }

    /// Hands a datagram to the MAC in frame `frame`.
    ///
    /// An idle flow, or one silent for the whole idle timeout, first has to
    /// (re)connect, which takes `connection_frames` frames. Otherwise the
    /// datagram can leave in the next frame.
    pub fn enqueue_datagram(
        &mut self,
        datagram: Datagram,
        now: SimTime,
        frame: u64,
        connection_frames: u64,
        idle_timeout: SimTime,
    ) {
        debug_assert_eq!(datagram.flow_id, self.flow_id);
        let expired = self.state == ConnState::Active && self.mac_queue.is_empty() && now >= self.idle_deadline;
        if self.state == ConnState::Idle || expired {
            self.state = ConnState::Connecting {
                until_frame: frame + connection_frames.max(1),
            };
            self.active_last_frame = false;
            if self.access == AccessMethod::Dedicated {
                self.dedicated_connected = true;
            }
        }
        self.idle_deadline = now + idle_timeout;
        self.mac_queue.push_back(QueuedDatagram {
            datagram,
            corrupted: false,
        });
    }

    /// Marks the flow as having sent something at `now`.
    pub fn touch(&mut self, now: SimTime, idle_timeout: SimTime) {
        self.idle_deadline = now + idle_timeout;
    }

    pub fn can_transmit(&self, frame: u64) -> bool {
        match self.state {
            ConnState::Active => true,
            ConnState::Connecting { until_frame } => until_frame <= frame,
            ConnState::Idle => false,
        }
    }

    /// Datagrams that may be sent in `frame`: those queued in earlier frames.
    pub fn eligible(&self, frame: u64, frame_duration: SimTime) -> impl Iterator<Item = &QueuedDatagram> {
        let frame_start = frame_duration.times(frame);
        self.mac_queue
            .iter()
            .take_while(move |q| q.datagram.enqueue_time < frame_start)
    }

    /// Units of `bits_per_unit` needed by the eligible queue, counting each
    /// datagram's last unit in full, and stopping once `cap` is reached.
    pub fn units_needed(&self, frame: u64, frame_duration: SimTime, bits_per_unit: u32, cap: u32) -> u32 {
        let mut units = 0u64;
        for q in self.eligible(frame, frame_duration) {
            units += q.datagram.remaining_bits.div_ceil(bits_per_unit as u64);
            if units >= cap as u64 {
                return cap;
            }
        }
        units as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::TcpConfig;

    fn flow(access: AccessMethod) -> FlowRuntime {
        FlowRuntime::new(0, access, TcpSender::new(0, TcpConfig::default(), None))
    }

    fn dgm(seq: u64, at: SimTime) -> Datagram {
        Datagram::new(0, seq, 1500, at)
    }

    const T: SimTime = SimTime::from_millis(45);
    const IDLE: SimTime = SimTime::from_secs(3);

    #[test]
    fn new_random_flow_is_eligible_next_frame() {
        let mut f = flow(AccessMethod::MUSCA3);
        f.enqueue_datagram(dgm(1, SimTime::ZERO), SimTime::ZERO, 0, 1, IDLE);
        assert_eq!(f.state, ConnState::Connecting { until_frame: 1 });
        assert!(!f.can_transmit(0));
        assert!(f.can_transmit(1));
        assert_eq!(f.eligible(0, T).count(), 0);
        assert_eq!(f.eligible(1, T).count(), 1);
    }

    #[test]
    fn idle_timer_decides_reconnection() {
        let mut f = flow(AccessMethod::Dedicated);
        f.state = ConnState::Active;
        f.touch(SimTime::ZERO, IDLE);
        let t = SimTime::from_millis(2900);
        f.enqueue_datagram(dgm(1, t), t, 64, 13, IDLE);
        assert_eq!(f.state, ConnState::Active);

        f.mac_queue.clear();
        let t2 = t + SimTime::from_millis(3100);
        f.enqueue_datagram(dgm(2, t2), t2, 133, 13, IDLE);
        assert_eq!(f.state, ConnState::Connecting { until_frame: 146 });
    }

    #[test]
    fn units_are_capped_and_padded() {
        let mut f = flow(AccessMethod::Dedicated);
        for s in 1..=5 {
            f.enqueue_datagram(dgm(s, SimTime::ZERO), SimTime::ZERO, 0, 13, IDLE);
        }
        assert_eq!(f.units_needed(1, T, 920, 1000), 70);
        assert_eq!(f.units_needed(1, T, 920, 40), 40);
        assert_eq!(f.units_needed(1, T, 680, 13), 13);
        assert_eq!(f.units_needed(0, T, 920, 40), 0);
    }
}
