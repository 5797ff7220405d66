use serde::{Deserialize, Serialize};

use crate::raster::EncodingKind;

pub const DEFAULT_RHO: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    Overview,
    Region,
}

/// One transmitted image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub kind: RequestKind,
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub encoding: EncodingKind,
    /// `width × height` of the transmitted image.
    pub pixels_sent: u64,
    pub payload_bytes: u64,
    /// Whole IMAGE_DATA frame: length prefix, header and payload.
    pub wire_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// `ρ · Σ pixels`, protocol overhead excluded.
    PixelsEq1,
    /// Every byte of every image frame.
    WireBytes,
}

/// Per-session record of everything the provider transmitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLedger {
    /// Bytes per pixel.
    pub rho: f64,
    pub entries: Vec<LedgerEntry>,
}

impl Default for SessionLedger {
    fn default() -> Self {
        Self::new(DEFAULT_RHO)
    }
}

impl SessionLedger {
    pub fn new(rho: f64) -> Self {
        Self {
            rho,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, e: LedgerEntry) {
        self.entries.push(e);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_pixels(&self) -> u64 {
        self.entries.iter().map(|e| e.pixels_sent).sum()
    }

    pub fn total_wire_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.wire_bytes).sum()
    }

    pub fn total_payload_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.payload_bytes).sum()
    }

    pub fn cost(&self, mode: CostMode) -> f64 {
        match mode {
            CostMode::PixelsEq1 => self.rho * self.total_pixels() as f64,
            CostMode::WireBytes => self.total_wire_bytes() as f64,
        }
    }

    /// Entries from index `start` on, keeping `rho`.
    pub fn since(&self, start: usize) -> SessionLedger {
        SessionLedger {
            rho: self.rho,
            entries: self.entries.get(start..).unwrap_or_default().to_vec(),
        }
    }

    /// Entries with the given stage tag.
    pub fn stage<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a LedgerEntry> + 'a {
        self.entries.iter().filter(move |e| e.stage == tag)
    }
}

/// Cost of a cascade whose level `i` sends `count` images of `w × h` pixels
/// each: `ρ Σ N_i n_i m_i`.
pub fn level_cost(rho: f64, levels: &[(u64, u64, u64)]) -> f64 {
    rho * levels
        .iter()
        .map(|&(n, w, h)| (n * w * h) as f64)
        .sum::<f64>()
}
