//! Session service for piloting the simulated blimp over WebSocket, with
//! run recording, log download and replay.

pub mod protocol;
pub mod replay;
pub mod server;
pub mod session;
pub mod source;

pub use protocol::{parse_command, Command, Inbound, SensorKind, Telemetry, TelemetryKind, PROTOCOL_VERSION};
pub use replay::{replay, replay_paced};
pub use server::{router, serve, AppState, ServiceConfig};
pub use session::{telemetry_for, Session, SessionConfig, Toggles, SLOW_SENSOR_TICKS, TICK_S};
pub use source::SceneSource;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("replay refused: {0}")]
    Replay(String),
    #[error("session error: {0}")]
    Session(String),
}
