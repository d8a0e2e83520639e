//! Physical-layer abstractions: the modcod table, SIC decoding of RA blocks
//! and packet-loss-rate curves.

mod plr;
mod sic;

pub use plr::{estimate_plr, estimate_plr_curve, plr_lookup, PlrCurve, PlrEstimator, PlrPoint};
pub use sic::{sic_decode, sic_decode_with, DecodeRule, Placement, SicOutcome, DEFAULT_MAX_SIC_ITERATIONS};

use crate::config::{AccessMethod, CodeRate, LinkConfig, Modulation, Waveform};
use crate::error::{Error, Result};

/// Payload symbols of one burst before physical-layer encapsulation.
pub const PAYLOAD_SYMBOLS_PER_BURST: u32 = 460;

const DEDICATED: Waveform = Waveform {
    modulation: Modulation::Psk8,
    code_rate: CodeRate::new(2, 3),
    info_bits_per_packet: 920,
    bursts_per_packet: 1,
    symbols_per_burst: PAYLOAD_SYMBOLS_PER_BURST,
};

const CRDSA3: Waveform = Waveform {
    modulation: Modulation::Qpsk,
    code_rate: CodeRate::new(2, 3),
    info_bits_per_packet: 613,
    bursts_per_packet: 3,
    symbols_per_burst: PAYLOAD_SYMBOLS_PER_BURST,
};

// 680 bits at rate 1/4 give 1360 QPSK symbols, carried as three one-slot parts.
const MUSCA3: Waveform = Waveform {
    modulation: Modulation::Qpsk,
    code_rate: CodeRate::new(1, 4),
    info_bits_per_packet: 680,
    bursts_per_packet: 3,
    symbols_per_burst: PAYLOAD_SYMBOLS_PER_BURST,
};

/// Waveform per access method at the clear-sky operating points.
#[derive(Debug, Clone, PartialEq)]
pub struct ModcodTable {
    pub dedicated: Waveform,
    pub crdsa3: Waveform,
    pub musca3: Waveform,
}

impl Default for ModcodTable {
    fn default() -> Self {
        ModcodTable {
            dedicated: DEDICATED,
            crdsa3: CRDSA3,
            musca3: MUSCA3,
        }
    }
}

impl ModcodTable {
    pub fn get(&self, method: AccessMethod) -> Result<&Waveform> {
        match method {
            AccessMethod::Dedicated => Ok(&self.dedicated),
            AccessMethod::Crdsa { replicas: 3 } => Ok(&self.crdsa3),
            AccessMethod::Musca { bursts: 3 } => Ok(&self.musca3),
            other => Err(Error::UnsupportedMethod(other.to_string())),
        }
    }

    /// Overrides the information bits carried per packet, e.g. 594 bits for
    /// MuSCA once link-layer headers are removed.
    pub fn with_info_bits(mut self, method: AccessMethod, bits: u32) -> Result<Self> {
        let w = match method {
            AccessMethod::Dedicated => &mut self.dedicated,
            AccessMethod::Crdsa { replicas: 3 } => &mut self.crdsa3,
            AccessMethod::Musca { bursts: 3 } => &mut self.musca3,
            other => return Err(Error::UnsupportedMethod(other.to_string())),
        };
        w.info_bits_per_packet = bits;
        Ok(self)
    }

    pub fn entries(&self) -> [(AccessMethod, &Waveform); 3] {
        [
            (AccessMethod::Dedicated, &self.dedicated),
            (AccessMethod::CRDSA3, &self.crdsa3),
            (AccessMethod::MUSCA3, &self.musca3),
        ]
    }
}

/// Waveform used by `method` on a link configured as `config`.
pub fn waveform_for(method: AccessMethod, config: &LinkConfig) -> Result<Waveform> {
    let w = *ModcodTable::default().get(method)?;
    if w.symbols_per_burst > config.symbols_per_slot {
        return Err(Error::Configuration(format!(
            "{method}: a {}-symbol burst does not fit a {}-symbol slot",
            w.symbols_per_burst, config.symbols_per_slot
        )));
    }
    Ok(w)
}

/// Es/N0 at which random-access terminals operate, in dB.
pub fn random_operating_point(config: &LinkConfig) -> f64 {
    config.dedicated_esn0_db - config.random_margin_db
}
