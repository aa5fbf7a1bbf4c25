//! Live sessions in which a human supplies the action suggestions.
//!
//! The server owns one environment and policy. Each session runs a single
//! episode step by step through the same step protocol the harness uses, so a
//! scripted session reproduces a harness episode exactly.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, Descriptor, Frame, Mode, ServerMessage, SessionScenario, TraceView};
pub use server::{router, serve, AppState};
pub use session::{ServiceError, SessionManager};
