//! Camera side: image stores, the framed wire protocol, per-session metering
//! and the TCP server, plus the matching client.

mod client;
mod ledger;
mod server;
mod session;
mod store;
pub mod wire;

pub use client::{Client, Counted, Received};
pub use ledger::{level_cost, CostMode, LedgerEntry, RequestKind, SessionLedger, DEFAULT_RHO};
pub use server::{serve, spawn, ServerConfig, ServerHandle};
pub use session::{error_code, Session};
pub use store::{DirStore, ImageStore, MemStore, SynthStore};
