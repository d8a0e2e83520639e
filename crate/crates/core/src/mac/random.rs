//! Random-access transmission over the RA blocks of one frame.
//!
//! A terminal sends at most one packet per RA block and, since it cannot
//! transmit on two carriers at once, at most `⌊slots_per_carrier / n_b⌋`
//! packets per frame. Packets are spread over the least loaded blocks and
//! their bursts placed uniformly at random within the block.

use crate::config::{AccessMethod, FlowId, LinkConfig};
use crate::error::{Error, Result};
use crate::phy::{plr_lookup, sic_decode_with, DecodeRule, Placement, PlrCurve, DEFAULT_MAX_SIC_ITERATIONS};
use crate::rng::Rng;

const PLACEMENT_STREAM: u64 = 1;
const ERASURE_STREAM: u64 = 2;

pub fn max_packets_per_frame(n_b: u32, slots_per_carrier: u32) -> u32 {
    slots_per_carrier / n_b.max(1)
}

pub fn blocks_per_frame(config: &LinkConfig) -> u32 {
    config.total_slots() / config.ra_block_slots
}

/// Draws `n_b` distinct slots of a block, in ascending order.
pub fn place_packet(rng: &mut Rng, n_b: u32, slot_count: u32) -> Result<Vec<u32>> {
    if n_b == 0 || n_b > slot_count {
        return Err(Error::InvalidPlacement(format!(
            "cannot place {n_b} bursts in {slot_count} slots"
        )));
    }
    let mut out = Vec::with_capacity(n_b as usize);
    rng.distinct_below(slot_count, n_b, &mut out);
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaBlock {
    pub block_id: u32,
    pub slot_count: u32,
    /// Packet ids are indices into [`RaFramePlan::packets`].
    pub placements: Vec<Placement>,
}

impl RaBlock {
    pub fn load(&self) -> usize {
        self.placements.len()
    }
}

/// Packets a flow wants to send in this frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaRequest {
    pub flow_id: FlowId,
    pub packets: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaPacket {
    pub flow_id: FlowId,
    pub block_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaFramePlan {
    pub blocks: Vec<RaBlock>,
    /// Every packet sent this frame, grouped by flow in request order.
    pub packets: Vec<RaPacket>,
    pub bursts_per_packet: u32,
    pub rule: DecodeRule,
    pub max_iterations: u32,
}

/// How the erasure state of random-access packets is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Decode the realized placements with SIC.
    Sic,
    /// Draw each packet's fate from a PLR curve at its block's load.
    Table,
}

impl std::str::FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sic" => Ok(LossMode::Sic),
            "table" => Ok(LossMode::Table),
            other => Err(Error::Configuration(format!("unknown loss model '{other}' (expected sic or table)"))),
        }
    }
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossMode::Sic => "sic",
            LossMode::Table => "table",
        })
    }
}

impl RaFramePlan {
    /// Assigns the requested packets to blocks and places their bursts.
    ///
    /// Requests are served in order; each packet goes to the least loaded
    /// block the flow has not used yet, ties broken by scanning from the
    /// block after the previous pick. Requests beyond the per-frame cap or
    /// the number of blocks are truncated.
    pub fn build(
        requests: &[RaRequest],
        method: AccessMethod,
        block_count: u32,
        slot_count: u32,
        per_flow_cap: u32,
        rng: &Rng,
    ) -> Result<Self> {
        let n_b = method.bursts_per_packet();
        if n_b == 0 || n_b > slot_count {
            return Err(Error::InvalidPlacement(format!(
                "cannot place {n_b} bursts in {slot_count} slots"
            )));
        }
        let mut blocks: Vec<RaBlock> = (0..block_count)
            .map(|block_id| RaBlock {
                block_id,
                slot_count,
                placements: Vec::new(),
            })
            .collect();
        let mut packets = Vec::new();
        let mut used = vec![false; block_count as usize];
        let mut scan = 0usize;
        for req in requests {
            let n = req.packets.min(per_flow_cap).min(block_count);
            used.iter_mut().for_each(|u| *u = false);
            for _ in 0..n {
                let mut best: Option<usize> = None;
                for k in 0..block_count as usize {
                    let b = (scan + k) % block_count as usize;
                    if !used[b] && best.is_none_or(|x| blocks[b].load() < blocks[x].load()) {
                        best = Some(b);
                    }
                }
                let b = best.expect("n never exceeds the block count");
                used[b] = true;
                scan = (b + 1) % block_count as usize;
                let id = packets.len() as u32;
                blocks[b].placements.push(Placement::new(id, Vec::new()));
                packets.push(RaPacket {
                    flow_id: req.flow_id,
                    block_id: b as u32,
                });
            }
        }

        let placement_rng = rng.split(PLACEMENT_STREAM);
        for block in &mut blocks {
            let mut r = placement_rng.split(block.block_id as u64);
            for p in &mut block.placements {
                p.slots = place_packet(&mut r, n_b, slot_count)?;
            }
        }

        let rule = match method {
            AccessMethod::Dedicated => DecodeRule::crdsa(),
            m => DecodeRule::for_method(m)?,
        };
        Ok(RaFramePlan {
            blocks,
            packets,
            bursts_per_packet: n_b,
            rule,
            max_iterations: DEFAULT_MAX_SIC_ITERATIONS,
        })
    }

    pub fn with_rule(mut self, rule: DecodeRule, max_iterations: u32) -> Self {
        self.rule = rule;
        self.max_iterations = max_iterations;
        self
    }

    pub fn packets_of(&self, flow: FlowId) -> usize {
        self.packets.iter().filter(|p| p.flow_id == flow).count()
    }
}

/// Decides, for every packet of `plan`, whether it reaches the gateway.
/// The result is indexed like [`RaFramePlan::packets`].
pub fn resolve_frame(plan: &RaFramePlan, mode: LossMode, curve: Option<&PlrCurve>, rng: &Rng) -> Result<Vec<bool>> {
    let mut verdicts = vec![false; plan.packets.len()];
    match mode {
        LossMode::Sic => {
            for block in &plan.blocks {
                let out = sic_decode_with(&block.placements, plan.rule, plan.max_iterations)?;
                for id in out.decoded {
                    verdicts[id as usize] = true;
                }
            }
        }
        LossMode::Table => {
            let curve = curve.ok_or_else(|| {
                Error::Configuration("the table loss model needs a PLR curve".into())
            })?;
            let erasures = rng.split(ERASURE_STREAM);
            for block in &plan.blocks {
                if block.placements.is_empty() {
                    continue;
                }
                let plr = plr_lookup(curve, block.load() as f64);
                let mut r = erasures.split(block.block_id as u64);
                for p in &block.placements {
                    verdicts[p.packet as usize] = !r.bernoulli(plr);
                }
            }
        }
    }
    Ok(verdicts)
}
