//! Medium access: the NCC's dedicated slot allocator and random-access
//! frame planning over RA blocks.

pub mod dedicated;
pub mod random;

pub use dedicated::{allocate, allocate_from, connection_frames, BurstTimePlan, DemandSnapshot, SlotAllocator};
pub use random::{
    blocks_per_frame, max_packets_per_frame, place_packet, resolve_frame, LossMode, RaBlock, RaFramePlan, RaPacket,
    RaRequest,
};
