//! Iterative successive interference cancellation over one RA block.
//!
//! The channel is a collision channel: a burst is clean when no other
//! uncancelled burst shares its slot. Each round decodes every packet that
//! satisfies the [`DecodeRule`] against the current slot occupancy, then
//! removes all bursts of those packets from the block.

use std::collections::BTreeSet;

use crate::config::AccessMethod;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_SIC_ITERATIONS: u32 = 20;

/// Largest summed interferer count at which a MuSCA codeword still decodes
/// without a clean part: three parts each overlapped by two other bursts
/// decode, anything heavier does not.
pub const MUSCA_MAX_TOTAL_INTERFERENCE: u32 = 6;

/// When a packet can be decoded from its bursts.
///
/// A packet decodes if at least `min_clean_bursts` of its bursts are clean,
/// or, when `max_total_interference` is set, if the number of other bursts
/// overlapping its parts, summed over all parts, does not exceed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeRule {
    pub min_clean_bursts: u32,
    pub max_total_interference: Option<u32>,
}

impl DecodeRule {
    /// One clean replica suffices.
    pub const fn crdsa() -> Self {
        DecodeRule {
            min_clean_bursts: 1,
            max_total_interference: None,
        }
    }

    /// One clean part suffices; otherwise the low-rate codeword survives
    /// light collisions on all of its parts.
    pub const fn musca() -> Self {
        DecodeRule {
            min_clean_bursts: 1,
            max_total_interference: Some(MUSCA_MAX_TOTAL_INTERFERENCE),
        }
    }

    pub fn for_method(method: AccessMethod) -> Result<Self> {
        match method {
            AccessMethod::Crdsa { .. } => Ok(Self::crdsa()),
            AccessMethod::Musca { .. } => Ok(Self::musca()),
            AccessMethod::Dedicated => Err(Error::UnsupportedMethod(
                "dedicated access has no contention decoding".into(),
            )),
        }
    }

    #[inline]
    pub fn decodable(&self, clean: u32, interference: u32) -> bool {
        clean >= self.min_clean_bursts
            || self
                .max_total_interference
                .is_some_and(|max| interference <= max)
    }
}

/// The slots occupied by one packet's bursts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub packet: u32,
    pub slots: Vec<u32>,
}

impl Placement {
    pub fn new(packet: u32, slots: Vec<u32>) -> Self {
        Placement { packet, slots }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SicOutcome {
    pub decoded: BTreeSet<u32>,
    pub undecoded: BTreeSet<u32>,
    /// Rounds that decoded at least one packet.
    pub iterations_used: u32,
}

/// Decodes a block with the default rule of `method`. Every packet must
/// occupy exactly the method's number of distinct slots.
pub fn sic_decode(placements: &[Placement], method: AccessMethod, max_iterations: u32) -> Result<SicOutcome> {
    let n_b = method.bursts_per_packet() as usize;
    if let Some(p) = placements.iter().find(|p| p.slots.len() != n_b) {
        return Err(Error::InvalidPlacement(format!(
            "packet {} has {} bursts, {method} sends {n_b}",
            p.packet,
            p.slots.len()
        )));
    }
    sic_decode_with(placements, DecodeRule::for_method(method)?, max_iterations)
}

/// Decodes a block under an explicit rule.
pub fn sic_decode_with(placements: &[Placement], rule: DecodeRule, max_iterations: u32) -> Result<SicOutcome> {
    let mut seen = BTreeSet::new();
    for p in placements {
        if !seen.insert(p.packet) {
            return Err(Error::InvalidPlacement(format!("packet {} listed twice", p.packet)));
        }
        let distinct: BTreeSet<_> = p.slots.iter().collect();
        if distinct.len() != p.slots.len() {
            return Err(Error::InvalidPlacement(format!(
                "packet {} uses a slot more than once",
                p.packet
            )));
        }
        if p.slots.is_empty() {
            return Err(Error::InvalidPlacement(format!("packet {} has no bursts", p.packet)));
        }
    }

    let slot_count = placements
        .iter()
        .flat_map(|p| p.slots.iter())
        .max()
        .map_or(0, |&m| m as usize + 1);
    let mut occupancy = vec![0u32; slot_count];
    for s in placements.iter().flat_map(|p| p.slots.iter()) {
        occupancy[*s as usize] += 1;
    }
    let mut decoded = vec![false; placements.len()];
    let iterations_used = cancel(
        &mut occupancy,
        &mut decoded,
        |i| &placements[i].slots,
        rule,
        max_iterations,
    );

    let mut out = SicOutcome {
        iterations_used,
        ..Default::default()
    };
    for (p, ok) in placements.iter().zip(&decoded) {
        if *ok {
            out.decoded.insert(p.packet);
        } else {
            out.undecoded.insert(p.packet);
        }
    }
    Ok(out)
}

/// The cancellation loop shared by the public decoder and the Monte Carlo
/// fast path. `occupancy` must hold the burst count of every slot; on return
/// `decoded[i]` tells whether packet `i` was recovered.
pub(crate) fn cancel<'a, F>(
    occupancy: &mut [u32],
    decoded: &mut [bool],
    slots_of: F,
    rule: DecodeRule,
    max_iterations: u32,
) -> u32
where
    F: Fn(usize) -> &'a [u32],
{
    let mut pending: Vec<usize> = (0..decoded.len()).collect();
    let mut newly = Vec::new();
    let mut rounds = 0;
    while rounds < max_iterations && !pending.is_empty() {
        newly.clear();
        pending.retain(|&i| {
            let (mut clean, mut interference) = (0u32, 0u32);
            for &s in slots_of(i) {
                let others = occupancy[s as usize] - 1;
                if others == 0 {
                    clean += 1;
                }
                interference += others;
            }
            if rule.decodable(clean, interference) {
                newly.push(i);
                false
            } else {
                true
            }
        });
        if newly.is_empty() {
            break;
        }
        for &i in &newly {
            decoded[i] = true;
            for &s in slots_of(i) {
                occupancy[s as usize] -= 1;
            }
        }
        rounds += 1;
    }
    rounds
}
