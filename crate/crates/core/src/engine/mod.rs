//! The discrete-event loop.
//!
//! Every `T_F` a frame event plans and transmits one frame: dedicated flows
//! share the burst time plan, random-access flows contend in RA blocks. A
//! datagram whose last bit leaves in frame `k` reaches the far end at the end
//! of frame `k` plus the one-way delay; the ACK takes the one-way delay back.
//! All sessions start at time zero with an unbounded backlog unless the
//! scenario limits their size.

mod flow;
mod hybrid;

pub use flow::{ConnState, FlowRuntime, QueuedDatagram};
pub use hybrid::{CrossoverModel, HybridPolicy, LOAD_EWMA_ALPHA};
pub use crate::metrics::RunResult;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::config::{AccessMethod, Datagram, FlowId};
use crate::error::{Error, Result};
use crate::mac::{
    blocks_per_frame, connection_frames, max_packets_per_frame, resolve_frame, BurstTimePlan, DemandSnapshot,
    LossMode, RaFramePlan, RaRequest, SlotAllocator,
};
use crate::metrics::{BtpRecord, TraceRecord};
use crate::phy::{waveform_for, DecodeRule, PlrCurve};
use crate::rng::Rng;
use crate::scenario::{Policy, Scenario};
use crate::time::SimTime;
use crate::transport::{TcpConfig, TcpSender, TcpStats};

/// RA blocks a hybrid policy reserves when the scenario does not say.
pub fn default_ra_block_budget(blocks: u32) -> u32 {
    blocks / 4
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Frame(u64),
    Deliver { flow: FlowId, seq: u64 },
    Ack { flow: FlowId, ack_no: u64, sack: Vec<(u64, u64)> },
    Rto { flow: FlowId, generation: u64 },
}

/// Simulation state between events.
pub struct World {
    pub scenario: Scenario,
    pub flows: Vec<FlowRuntime>,
    pub hybrid: Option<HybridPolicy>,
    allocator: SlotAllocator,
    queue: BinaryHeap<Reverse<(SimTime, u64, Event)>>,
    inserted: u64,
    rng: Rng,
    curve: Option<PlrCurve>,
    random_bits: u32,
    dedicated_bits: u32,
    dedicated_slots: u32,
    ra_blocks: u32,
    ra_cap: u32,
    rule: Option<DecodeRule>,
    frame_bits: Vec<u64>,
    trace: Vec<TraceRecord>,
    btp: Vec<BtpRecord>,
    dropped: u64,
    transmitted: u64,
}

impl World {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let mut scenario = scenario.clone();
        scenario.load_curve()?;
        scenario.validate()?;
        let link = &scenario.link;

        let dedicated_bits = waveform_for(AccessMethod::Dedicated, link)?.info_bits_per_packet;
        let random_method = if scenario.access.is_random() {
            scenario.access
        } else {
            AccessMethod::MUSCA3
        };
        let random_bits = match scenario.random_info_bits {
            Some(b) => b,
            None => waveform_for(random_method, link)?.info_bits_per_packet,
        };
        let blocks = blocks_per_frame(link);
        let (ra_blocks, hybrid) = match scenario.policy {
            Policy::Dedicated => (0, None),
            Policy::Random => (blocks, None),
            Policy::Hybrid => {
                let budget = scenario.ra_block_budget.unwrap_or_else(|| default_ra_block_budget(blocks));
                (budget, Some(budget))
            }
        };
        let dedicated_slots = link.total_slots() - ra_blocks * link.ra_block_slots;
        let hybrid = hybrid.map(|budget| {
            let model = CrossoverModel::new(
                link,
                random_method,
                dedicated_slots,
                budget,
                dedicated_bits,
                random_bits,
                scenario.datagram_bytes,
            );
            HybridPolicy::new(scenario.seq_threshold, budget, scenario.num_sessions, model)
        });
        let rule = if scenario.access.is_random() {
            Some(DecodeRule::for_method(scenario.access)?)
        } else {
            None
        };
        let curve = match (scenario.loss_model, scenario.policy) {
            (LossMode::Table, Policy::Random | Policy::Hybrid) => Some(
                scenario
                    .plr_curve
                    .clone()
                    .ok_or_else(|| Error::Configuration("the table loss model needs a PLR curve".into()))?,
            ),
            _ => None,
        };

        let tcp = TcpConfig {
            initial_cwnd: scenario.initial_cwnd as f64,
            segment_bytes: scenario.datagram_bytes,
            ..TcpConfig::default()
        };
        let limit = scenario
            .flow_bytes
            .map(|b| b.div_ceil(scenario.datagram_bytes as u64));
        let flows = (0..scenario.num_sessions)
            .map(|id| {
                let access = match scenario.policy {
                    Policy::Dedicated => AccessMethod::Dedicated,
                    _ => scenario.access,
                };
                FlowRuntime::new(id, access, TcpSender::new(id, tcp, limit))
            })
            .collect();

        let ra_cap = max_packets_per_frame(random_method.bursts_per_packet(), link.slots_per_carrier);
        let frames = scenario.duration.as_micros().div_ceil(link.frame_duration.as_micros()) as usize;
        Ok(World {
            allocator: SlotAllocator::new(link.per_st_cap, dedicated_bits),
            rng: Rng::new(scenario.seed),
            flows,
            hybrid,
            queue: BinaryHeap::new(),
            inserted: 0,
            curve,
            random_bits,
            dedicated_bits,
            dedicated_slots,
            ra_blocks,
            ra_cap,
            rule,
            frame_bits: vec![0; frames.max(1)],
            trace: Vec::new(),
            btp: Vec::new(),
            dropped: 0,
            transmitted: 0,
            scenario,
        })
    }

    fn schedule(&mut self, at: SimTime, event: Event) {
        self.inserted += 1;
        self.queue.push(Reverse((at, self.inserted, event)));
    }

    fn frame_time(&self, frame: u64) -> SimTime {
        self.scenario.link.frame_start(frame)
    }

    /// Runs the simulation to the end of the scenario.
    pub fn run(mut self) -> RunResult {
        for id in 0..self.flows.len() {
            self.send_opportunity(id, SimTime::ZERO);
        }
        self.schedule(SimTime::ZERO, Event::Frame(0));
        let end = self.scenario.duration;
        while let Some(Reverse((now, _, event))) = self.queue.pop() {
            if now > end {
                break;
            }
            match event {
                Event::Frame(k) => {
                    self.step_frame(k);
                    let next = self.frame_time(k + 1);
                    if next < end {
                        self.schedule(next, Event::Frame(k + 1));
                    }
                }
                Event::Deliver { flow, seq } => self.deliver(flow, seq, now),
                Event::Ack { flow, ack_no, sack } => {
                    self.flows[flow as usize].tcp.on_ack(ack_no, &sack, now);
                    self.send_opportunity(flow as usize, now);
                }
                Event::Rto { flow, generation } => {
                    let f = &mut self.flows[flow as usize];
                    if f.tcp.timer() == Some((now, generation)) {
                        f.tcp.on_timeout(now);
                        f.scheduled_timer = None;
                        self.send_opportunity(flow as usize, now);
                    }
                }
            }
        }
        self.finish()
    }

    fn finish(self) -> RunResult {
        let frame_secs = self.scenario.link.frame_duration.as_secs_f64();
        RunResult {
            seed: self.scenario.seed,
            frame_throughput_bps: self.frame_bits.iter().map(|&b| b as f64 / frame_secs).collect(),
            delivered: self.flows.iter().map(|f| f.receiver.received()).collect(),
            in_order_times: self.flows.iter().map(|f| f.receiver.in_order_times().to_vec()).collect(),
            trace: self.trace,
            dropped: self.dropped,
            transmitted: self.transmitted,
            btp: self.btp,
            tcp: self.flows.iter().fold(TcpStats::default(), |acc, f| TcpStats {
                timeouts: acc.timeouts + f.tcp.stats.timeouts,
                fast_recoveries: acc.fast_recoveries + f.tcp.stats.fast_recoveries,
                retransmissions: acc.retransmissions + f.tcp.stats.retransmissions,
            }),
            scenario: self.scenario,
        }
    }

    /// Lets TCP emit what its window allows and queues it at the MAC.
    fn send_opportunity(&mut self, id: usize, now: SimTime) {
        let link = &self.scenario.link;
        let frame = link.frame_of(now);
        let f = &mut self.flows[id];
        let segments = f.tcp.on_send_opportunity(now);
        for seg in segments {
            let c = connection_frames(f.access, link.rtt(), link.frame_duration);
            let d = Datagram::new(f.flow_id, seg.seq_no, seg.size_bytes, now);
            f.enqueue_datagram(d, now, frame, c, self.scenario.idle_timeout);
        }
        if let Some((deadline, generation)) = f.tcp.timer() {
            if f.scheduled_timer != Some(generation) {
                f.scheduled_timer = Some(generation);
                let flow = f.flow_id;
                self.schedule(deadline, Event::Rto { flow, generation });
            }
        }
    }

    fn deliver(&mut self, flow: FlowId, seq: u64, now: SimTime) {
        let f = &mut self.flows[flow as usize];
        let (ack, fresh) = f.receiver.on_segment(seq, now);
        if fresh {
            self.trace.push(TraceRecord {
                time: now,
                flow_id: flow,
                seq_no: seq,
            });
            let k = (self.scenario.link.frame_of(now) as usize).min(self.frame_bits.len() - 1);
            self.frame_bits[k] += self.scenario.datagram_bytes as u64 * 8;
        }
        let at = now + self.scenario.link.one_way_delay;
        self.schedule(
            at,
            Event::Ack {
                flow,
                ack_no: ack.ack_no,
                sack: ack.sack,
            },
        );
    }

    /// Plans and transmits frame `k`.
    pub fn step_frame(&mut self, k: u64) {
        let now = self.frame_time(k);
        let idle = self.scenario.idle_timeout;
        let frame_duration = self.scenario.link.frame_duration;

        for f in &mut self.flows {
            f.new_flow = false;
            match f.state {
                ConnState::Active if f.mac_queue.is_empty() && now >= f.idle_deadline => {
                    f.state = ConnState::Idle;
                    f.active_last_frame = false;
                }
                ConnState::Connecting { until_frame } if until_frame <= k => {
                    f.state = ConnState::Active;
                    f.new_flow = true;
                }
                _ => {}
            }
        }

        if self.hybrid.is_some() {
            self.hybrid_assign(k);
        }

        let arrival = self.frame_time(k + 1) + self.scenario.link.one_way_delay;
        if self.dedicated_slots > 0 {
            let plan = self.plan_dedicated(k);
            for (&flow, &slots) in &plan.allocations {
                self.transmit(flow as usize, slots as u64 * self.dedicated_bits as u64, arrival);
            }
            for f in &mut self.flows {
                f.active_last_frame = plan.slots_for(f.flow_id) > 0;
                if f.active_last_frame {
                    f.touch(now, idle);
                }
            }
            if self.scenario.record_btp {
                self.btp.extend(plan.allocations.iter().map(|(&flow_id, &slots)| BtpRecord {
                    frame: k,
                    flow_id,
                    slots,
                }));
            }
        }

        if self.ra_blocks > 0 {
            let requests: Vec<RaRequest> = self
                .flows
                .iter()
                .filter(|f| f.access.is_random() && f.can_transmit(k))
                .map(|f| RaRequest {
                    flow_id: f.flow_id,
                    packets: f.units_needed(k, frame_duration, self.random_bits, self.ra_cap),
                })
                .filter(|r| r.packets > 0)
                .collect();
            if !requests.is_empty() {
                self.transmit_random(k, &requests, arrival);
            }
        }
    }

    fn hybrid_assign(&mut self, k: u64) {
        let policy = self.hybrid.as_mut().expect("hybrid policy");
        let busy = self.flows.iter().filter(|f| !f.mac_queue.is_empty()).count();
        policy.observe(busy);
        let link = &self.scenario.link;
        let c = connection_frames(AccessMethod::Dedicated, link.rtt(), link.frame_duration);
        for f in &mut self.flows {
            if !f.access.is_random() {
                continue;
            }
            let Some(head) = f.mac_queue.front() else { continue };
            if policy.stays_random(head.datagram.seq_no) {
                continue;
            }
            f.access = AccessMethod::Dedicated;
            if !f.dedicated_connected {
                f.dedicated_connected = true;
                f.state = ConnState::Connecting { until_frame: k + c };
                f.active_last_frame = false;
            }
        }
    }

    fn plan_dedicated(&mut self, k: u64) -> BurstTimePlan {
        let frame_duration = self.scenario.link.frame_duration;
        let cap = self.scenario.link.per_st_cap;
        let bits = self.dedicated_bits;
        let demands: Vec<DemandSnapshot> = self
            .flows
            .iter()
            .filter(|f| f.access == AccessMethod::Dedicated && f.can_transmit(k))
            .filter_map(|f| {
                let slots = f.units_needed(k, frame_duration, bits, cap);
                (slots > 0).then(|| DemandSnapshot {
                    flow_id: f.flow_id,
                    active_last_frame: f.active_last_frame,
                    is_new_flow: f.new_flow,
                    queued_bytes: (slots as u64 * bits as u64).div_ceil(8),
                })
            })
            .collect();
        self.allocator.plan(k, &demands, self.dedicated_slots)
    }

    fn transmit_random(&mut self, k: u64, requests: &[RaRequest], arrival: SimTime) {
        let link = &self.scenario.link;
        let rng = self.rng.split(k);
        let plan = RaFramePlan::build(
            requests,
            self.scenario.access,
            self.ra_blocks,
            link.ra_block_slots,
            self.ra_cap,
            &rng,
        )
        .expect("validated geometry")
        .with_rule(self.rule.expect("random access rule"), self.scenario.max_sic_iterations);
        let verdicts =
            resolve_frame(&plan, self.scenario.loss_model, self.curve.as_ref(), &rng).expect("validated loss model");

        let now = self.frame_time(k);
        let idle = self.scenario.idle_timeout;
        let mut i = 0;
        while i < plan.packets.len() {
            let flow = plan.packets[i].flow_id;
            let n = plan.packets[i..].iter().take_while(|p| p.flow_id == flow).count();
            let fates = verdicts[i..i + n].to_vec();
            self.transmit_packets(flow as usize, &fates, arrival);
            self.flows[flow as usize].touch(now, idle);
            i += n;
        }
    }

    /// Sends `bits` of dedicated capacity from the head of the queue.
    fn transmit(&mut self, id: usize, mut bits: u64, arrival: SimTime) {
        let unit = self.dedicated_bits as u64;
        while bits > 0 {
            let f = &mut self.flows[id];
            let Some(head) = f.mac_queue.front_mut() else { break };
            let need = head.datagram.remaining_bits.div_ceil(unit) * unit;
            if bits >= need {
                bits -= need;
                head.datagram.remaining_bits = 0;
                self.complete_head(id, arrival);
            } else {
                head.datagram.remaining_bits -= bits;
                bits = 0;
            }
        }
    }

    /// Sends one random-access packet per entry of `fates` from the head of
    /// the queue; a lost packet corrupts its datagram.
    fn transmit_packets(&mut self, id: usize, fates: &[bool], arrival: SimTime) {
        let unit = self.random_bits as u64;
        for &ok in fates {
            let f = &mut self.flows[id];
            let Some(head) = f.mac_queue.front_mut() else { break };
            head.datagram.remaining_bits = head.datagram.remaining_bits.saturating_sub(unit);
            head.corrupted |= !ok;
            if head.datagram.remaining_bits == 0 {
                self.complete_head(id, arrival);
            }
        }
    }

    fn complete_head(&mut self, id: usize, arrival: SimTime) {
        let q = self.flows[id].mac_queue.pop_front().expect("head datagram");
        if q.corrupted {
            self.dropped += 1;
        } else {
            self.transmitted += 1;
            self.schedule(
                arrival,
                Event::Deliver {
                    flow: q.datagram.flow_id,
                    seq: q.datagram.seq_no,
                },
            );
        }
    }
}

/// Runs one scenario from start to finish.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult> {
    Ok(World::new(scenario)?.run())
}
