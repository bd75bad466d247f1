//! Wire messages. Every object carries a top-level `"v"`.

use csa_core::blimp::{BurstDirection, CommandBurst, NOMINAL_BURST_MS};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::source::SceneSource;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Camera,
    Thermal,
    Lidar,
}

impl SensorKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "camera" => Some(SensorKind::Camera),
            "thermal" => Some(SensorKind::Thermal),
            "lidar" => Some(SensorKind::Lidar),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Burst(CommandBurst),
    Sensor { sensor: SensorKind, on: bool },
    Record { on: bool },
    Reset,
    LoadScene(SceneSource),
    /// Advances the clock by `steps` ticks; the only clock in manual sessions.
    Tick { steps: u32 },
}

/// Inbound frame after parsing: the client's request id (echoed verbatim,
/// `null` when absent) and the command or the reason it was rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Inbound {
    pub request_id: Value,
    pub command: Result<Command, String>,
}

pub const MAX_TICKS_PER_COMMAND: u32 = 36_000;

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, String> {
    obj.get(key).ok_or_else(|| format!("missing field `{key}`"))
}

fn bool_field(obj: &Map<String, Value>, key: &str) -> Result<bool, String> {
    field(obj, key)?.as_bool().ok_or_else(|| format!("`{key}` must be a boolean"))
}

pub fn parse_command(text: &str) -> Inbound {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return Inbound { request_id: Value::Null, command: Err(format!("malformed JSON: {e}")) },
    };
    let request_id = value.get("request_id").cloned().unwrap_or(Value::Null);
    Inbound { request_id, command: command_from_value(&value) }
}

fn command_from_value(value: &Value) -> Result<Command, String> {
    let obj = value.as_object().ok_or("command must be a JSON object")?;
    if let Some(v) = obj.get("v") {
        if v.as_u64() != Some(PROTOCOL_VERSION as u64) {
            return Err(format!("unsupported protocol version {v}"));
        }
    }
    let kind = field(obj, "type")?.as_str().ok_or("`type` must be a string")?;
    match kind {
        "burst" => {
            let dir = field(obj, "dir")?.as_str().ok_or("`dir` must be a string")?;
            let direction: BurstDirection = dir.parse()?;
            let duration_ms = match obj.get("duration_ms") {
                None => NOMINAL_BURST_MS,
                Some(d) => d
                    .as_u64()
                    .and_then(|d| u32::try_from(d).ok())
                    .ok_or("`duration_ms` must be a non-negative integer")?,
            };
            let burst = CommandBurst::new(direction, duration_ms);
            burst.validate().map_err(|e| e.to_string())?;
            Ok(Command::Burst(burst))
        }
        "sensor" => {
            let name = field(obj, "sensor")?.as_str().ok_or("`sensor` must be a string")?;
            let sensor = SensorKind::parse(name).ok_or_else(|| format!("unknown sensor `{name}`"))?;
            Ok(Command::Sensor { sensor, on: bool_field(obj, "on")? })
        }
        "record" => Ok(Command::Record { on: bool_field(obj, "on")? }),
        "reset" => Ok(Command::Reset),
        "load_scene" => {
            let src = serde_json::from_value(field(obj, "scene")?.clone()).map_err(|e| format!("bad scene: {e}"))?;
            Ok(Command::LoadScene(src))
        }
        "tick" => {
            let steps = match obj.get("steps") {
                None => 1,
                Some(s) => s.as_u64().and_then(|s| u32::try_from(s).ok()).ok_or("`steps` must be a positive integer")?,
            };
            if steps == 0 || steps > MAX_TICKS_PER_COMMAND {
                return Err(format!("`steps` must be in 1..={MAX_TICKS_PER_COMMAND}"));
            }
            Ok(Command::Tick { steps })
        }
        other => Err(format!("unknown command type `{other}`")),
    }
}

pub fn ack(request_id: &Value) -> String {
    json!({"v": PROTOCOL_VERSION, "type": "ack", "request_id": request_id}).to_string()
}

pub fn error_reply(request_id: &Value, reason: &str) -> String {
    json!({"v": PROTOCOL_VERSION, "type": "error", "request_id": request_id, "reason": reason}).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TelemetryKind {
    State,
    Camera,
    Thermal,
    Lidar,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub v: u32,
    #[serde(rename = "type")]
    pub kind: TelemetryKind,
    pub time_s: f64,
    pub payload: Value,
}

impl Telemetry {
    pub fn new(kind: TelemetryKind, time_s: f64, payload: Value) -> Self {
        Self { v: PROTOCOL_VERSION, kind, time_s, payload }
    }

    /// Whether this message may be dropped for a slow client.
    pub fn is_raster(&self) -> bool {
        self.kind == TelemetryKind::Camera && self.payload.get("raster_png_b64").is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("telemetry serializes")
    }
}
