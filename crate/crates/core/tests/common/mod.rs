//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use satlink::mac::{BurstTimePlan, DemandSnapshot};
use satlink::phy::Placement;
use satlink::AccessMethod;

pub const SLOTS: usize = 100;
pub const N_B: usize = 3;

pub fn random_block<R: Rng>(rng: &mut R, load: usize) -> Vec<Placement> {
    (0..load)
        .map(|p| {
            let slots = sample(rng, SLOTS, N_B).into_iter().map(|s| s as u32).collect();
            Placement::new(p as u32, slots)
        })
        .collect()
}

/// Clean-burst count and summed interference of `packet` among `alive`.
fn burst_view(block: &[Placement], alive: &BTreeSet<usize>, packet: usize) -> (u32, u32) {
    let mut clean = 0;
    let mut interference = 0;
    for s in &block[packet].slots {
        let others = alive
            .iter()
            .filter(|&&q| q != packet && block[q].slots.contains(s))
            .count() as u32;
        if others == 0 {
            clean += 1;
        }
        interference += others;
    }
    (clean, interference)
}

fn ok(method: AccessMethod, clean: u32, interference: u32) -> bool {
    match method {
        AccessMethod::Crdsa { .. } => clean >= 1,
        _ => clean >= 1 || interference <= 6,
    }
}

/// Every round tests all remaining packets against the same snapshot, then
/// cancels the winners together.
pub fn brute_rounds(block: &[Placement], method: AccessMethod, rounds: u32) -> BTreeSet<u32> {
    let mut alive: BTreeSet<usize> = (0..block.len()).collect();
    let mut done = BTreeSet::new();
    for _ in 0..rounds {
        let winners: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&p| {
                let (c, i) = burst_view(block, &alive, p);
                ok(method, c, i)
            })
            .collect();
        if winners.is_empty() {
            break;
        }
        for p in winners {
            alive.remove(&p);
            done.insert(block[p].packet);
        }
    }
    done
}

/// Cancels one decodable packet at a time until none is left.
pub fn peel(block: &[Placement], method: AccessMethod) -> BTreeSet<u32> {
    let mut alive: BTreeSet<usize> = (0..block.len()).collect();
    let mut done = BTreeSet::new();
    while let Some(p) = alive.iter().copied().find(|&p| {
        let (c, i) = burst_view(block, &alive, p);
        ok(method, c, i)
    }) {
        alive.remove(&p);
        done.insert(block[p].packet);
    }
    done
}

pub const TOTAL: u32 = 4000;
pub const CAP: u32 = 40;
pub const BITS: u32 = 920;

pub fn demand_limit(d: &DemandSnapshot) -> u32 {
    let slots = (d.queued_bytes * 8).div_ceil(BITS as u64);
    slots.min(CAP as u64) as u32
}

pub fn random_demands<R: Rng>(rng: &mut R) -> Vec<DemandSnapshot> {
    let n = rng.gen_range(1..=500);
    (0..n)
        .map(|i| DemandSnapshot {
            flow_id: i,
            active_last_frame: rng.gen_bool(0.5),
            is_new_flow: rng.gen_bool(0.2),
            queued_bytes: match rng.gen_range(0..4) {
                0 => 0,
                1 => rng.gen_range(1..2_000),
                _ => rng.gen_range(1..200_000),
            },
        })
        .collect()
}

/// Checks one plan against the allocator invariants.
pub fn check_plan(demands: &[DemandSnapshot], plan: &BurstTimePlan) -> Result<(), String> {
    if plan.allocated() > TOTAL {
        return Err(format!("{} slots allocated", plan.allocated()));
    }
    for d in demands {
        let got = plan.slots_for(d.flow_id);
        if got > CAP {
            return Err(format!("flow {} got {got} slots", d.flow_id));
        }
        if got > demand_limit(d) {
            return Err(format!("flow {} got {got} for {} bytes", d.flow_id, d.queued_bytes));
        }
    }
    // Step 1: every previously active flow with data gets a slot when there
    // are enough slots for all of them.
    let active: Vec<_> = demands
        .iter()
        .filter(|d| d.active_last_frame && d.queued_bytes > 0)
        .collect();
    if active.len() as u32 <= TOTAL {
        if let Some(d) = active.iter().find(|d| plan.slots_for(d.flow_id) == 0) {
            return Err(format!("active flow {} starved", d.flow_id));
        }
    }
    // Work conserving: slots stay unused only when all demand is met.
    let wanted: u32 = demands.iter().map(demand_limit).sum();
    if plan.allocated() != wanted.min(TOTAL) {
        return Err(format!("{} allocated, {} wanted", plan.allocated(), wanted));
    }
    Ok(())
}

/// Largest minus smallest grant among `n` flows with identical deep demand.
pub fn deep_demand_gap(n: u32, active: bool, new: bool) -> u32 {
    let demands: Vec<_> = (0..n)
        .map(|i| DemandSnapshot {
            flow_id: i,
            active_last_frame: active,
            is_new_flow: new,
            queued_bytes: 1_000_000,
        })
        .collect();
    let plan = satlink::mac::allocate(&demands, TOTAL, CAP, BITS);
    let counts: Vec<u32> = demands.iter().map(|d| plan.slots_for(d.flow_id)).collect();
    counts.iter().max().unwrap() - counts.iter().min().unwrap()
}
