//! Burst time plan construction for dedicated access.
//!
//! Each frame the NCC hands out slots in three passes:
//! 1. one slot to every flow that transmitted in the previous frame,
//! 2. one slot to every newly connected flow while slots remain,
//! 3. the rest one slot at a time, round-robin, until every flow reaches its
//!    per-terminal cap or has nothing left to send.
//!
//! The round-robin pass resumes after the flow served last in the previous
//! frame, so a remainder that cannot be split evenly rotates across flows.

use std::collections::BTreeMap;

use crate::config::{AccessMethod, FlowId};
use crate::time::SimTime;

/// What the NCC knows about one flow when planning a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemandSnapshot {
    pub flow_id: FlowId,
    pub active_last_frame: bool,
    pub is_new_flow: bool,
    /// Bytes the flow could put into slots this frame. A datagram's last,
    /// partly filled slot counts as a whole slot.
    pub queued_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BurstTimePlan {
    pub frame_index: u64,
    pub allocations: BTreeMap<FlowId, u32>,
    pub total_slots: u32,
}

impl BurstTimePlan {
    pub fn allocated(&self) -> u32 {
        self.allocations.values().sum()
    }

    pub fn slots_for(&self, flow: FlowId) -> u32 {
        self.allocations.get(&flow).copied().unwrap_or(0)
    }
}

/// Stateful allocator that remembers where the round-robin pass stopped.
#[derive(Debug, Clone)]
pub struct SlotAllocator {
    pub per_st_cap: u32,
    pub bits_per_slot: u32,
    cursor: Option<FlowId>,
}

impl SlotAllocator {
    pub fn new(per_st_cap: u32, bits_per_slot: u32) -> Self {
        SlotAllocator {
            per_st_cap,
            bits_per_slot,
            cursor: None,
        }
    }

    pub fn plan(&mut self, frame_index: u64, demands: &[DemandSnapshot], total_slots: u32) -> BurstTimePlan {
        let (mut plan, last) = allocate_from(demands, total_slots, self.per_st_cap, self.bits_per_slot, self.cursor);
        plan.frame_index = frame_index;
        if last.is_some() {
            self.cursor = last;
        }
        plan
    }
}

/// Plans one frame with the round-robin pass starting at the lowest flow id.
pub fn allocate(demands: &[DemandSnapshot], total_slots: u32, per_st_cap: u32, bits_per_slot: u32) -> BurstTimePlan {
    allocate_from(demands, total_slots, per_st_cap, bits_per_slot, None).0
}

/// Plans one frame; passes visit flows in ascending id order starting after
/// `start_after`. Also returns the last flow served by the round-robin pass.
pub fn allocate_from(
    demands: &[DemandSnapshot],
    total_slots: u32,
    per_st_cap: u32,
    bits_per_slot: u32,
    start_after: Option<FlowId>,
) -> (BurstTimePlan, Option<FlowId>) {
    let mut order: Vec<&DemandSnapshot> = demands.iter().filter(|d| d.queued_bytes > 0).collect();
    order.sort_by_key(|d| d.flow_id);
    if let Some(after) = start_after {
        let pivot = order.partition_point(|d| d.flow_id <= after);
        order.rotate_left(pivot);
    }

    let limits: Vec<u32> = order
        .iter()
        .map(|d| {
            let need = (d.queued_bytes * 8).div_ceil(bits_per_slot.max(1) as u64);
            need.min(per_st_cap as u64) as u32
        })
        .collect();
    let mut given = vec![0u32; order.len()];
    let mut free = total_slots;

    let passes: [&dyn Fn(&DemandSnapshot) -> bool; 2] = [&|d| d.active_last_frame, &|d| d.is_new_flow];
    for wants in passes {
        for (i, d) in order.iter().enumerate() {
            if free == 0 {
                break;
            }
            if given[i] == 0 && given[i] < limits[i] && wants(d) {
                given[i] = 1;
                free -= 1;
            }
        }
    }

    let mut last = None;
    while free > 0 {
        let mut progressed = false;
        for i in 0..order.len() {
            if free == 0 {
                break;
            }
            if given[i] < limits[i] {
                given[i] += 1;
                free -= 1;
                last = Some(order[i].flow_id);
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    let allocations = order
        .iter()
        .zip(&given)
        .filter(|(_, g)| **g > 0)
        .map(|(d, g)| (d.flow_id, *g))
        .collect();
    (
        BurstTimePlan {
            frame_index: 0,
            allocations,
            total_slots,
        },
        last,
    )
}

/// Frames between a flow's first datagram and its first transmission.
///
/// Dedicated access waits for the capacity request to make a round trip:
/// `ceil(rtt / frame) + 1` frames. Random access transmits in the next frame.
pub fn connection_frames(access: AccessMethod, rtt: SimTime, frame_duration: SimTime) -> u64 {
    match access {
        AccessMethod::Dedicated => {
            rtt.as_micros().div_ceil(frame_duration.as_micros().max(1)) + 1
        }
        _ => 1,
    }
}
