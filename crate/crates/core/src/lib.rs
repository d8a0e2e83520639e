//! Frame-level simulator of a DVB-RCS2 satellite return link.
//!
//! The crate models an MF-TDMA return link where TCP sessions reach the
//! gateway either through dedicated (demand-assigned) slots or through
//! random-access RA blocks (CRDSA-3, MuSCA-3) resolved by successive
//! interference cancellation. It measures cumulated throughput, datagram
//! loss and per-session transmission times.
//!
//! Layout:
//! - [`config`]: link geometry, access methods, waveforms, datagrams.
//! - [`rng`]: seeded, splittable random streams.
//! - [`phy`]: modcod table, SIC decoding and packet-loss curves.
//! - [`mac`]: dedicated slot allocator and random-access frame planning.
//! - [`transport`]: NewReno/SACK sender and receiver.
//! - [`engine`]: the event loop, flow lifecycle and hybrid access policy.
//! - [`scenario`]: the `key = value` scenario file format.
//! - [`metrics`]: run results, statistics and CSV output.
//! - [`cli`]: the `satlink` command line.

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod phy;
pub mod rng;
pub mod scenario;
pub mod time;
pub mod transport;

pub use config::{default_config, validate, AccessMethod, Datagram, FlowId, LinkConfig, Waveform};
pub use engine::{run_scenario, RunResult};
pub use error::{Error, Result};
pub use rng::Rng;
pub use scenario::Scenario;
pub use time::SimTime;
