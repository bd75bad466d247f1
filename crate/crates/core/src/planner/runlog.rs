use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{compute_metrics, PlanMetrics, PlannerError};
use crate::blimp::{BlimpConfig, BlimpState, CommandBurst, DriftModel};
use crate::geometry::Vec2;
use crate::sensors::{CameraFrame, CameraModel, LidarSample, ThermalFrame};
use crate::world::{scene_hash, Scene};

pub const RUNLOG_SCHEMA_VERSION: u32 = 1;

fn version() -> u32 {
    RUNLOG_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    WaypointReached { index: usize },
    WaypointSkipped { index: usize, reason: String },
    Captured { waypoint: usize },
    Displaced { id: u32, position_m: Vec2, orientation_rad: f64 },
    CornerTurn { count: u32 },
    BatteryExhausted,
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    #[serde(default = "version")]
    pub v: u32,
    pub scene_hash: String,
    /// Planner name, or `manual` for piloted sessions.
    pub source: String,
    pub seed: u64,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub blimp: BlimpConfig,
    pub drift: DriftModel,
    pub camera: CameraModel,
    pub dt_s: f64,
    pub scene: Scene,
}

impl RunHeader {
    pub fn new(scene: &Scene, source: &str, seed: u64, blimp: &BlimpConfig, drift: &DriftModel, camera: &CameraModel, dt_s: f64) -> Self {
        Self {
            v: RUNLOG_SCHEMA_VERSION,
            scene_hash: scene_hash(scene),
            source: source.to_string(),
            seed,
            params: BTreeMap::new(),
            blimp: blimp.clone(),
            drift: *drift,
            camera: camera.clone(),
            dt_s,
            scene: scene.clone(),
        }
    }
}

/// State at `time_s`, the sensor data sampled there, and the bursts issued
/// before the next step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(default = "version")]
    pub v: u32,
    pub time_s: f64,
    pub state: BlimpState,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub commands: Vec<CommandBurst>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalFrame>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lidar: Vec<LidarSample>,
    pub wind_at_ground_mps: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<RunEvent>,
}

impl RunRecord {
    pub fn new(state: BlimpState) -> Self {
        Self {
            v: RUNLOG_SCHEMA_VERSION,
            time_s: state.time_s,
            state,
            commands: Vec::new(),
            camera: None,
            thermal: None,
            lidar: Vec::new(),
            wind_at_ground_mps: 0.0,
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunTrailer {
    #[serde(default = "version")]
    v: u32,
    truncated: bool,
    #[serde(default)]
    aborted: Option<String>,
    #[serde(default)]
    metrics: Option<PlanMetrics>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(RunHeader),
    Record(RunRecord),
    Trailer(RunTrailer),
}

/// Timestamped trace of one flight.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub records: Vec<RunRecord>,
    /// Set when the battery or the time budget ended the run early.
    pub truncated: bool,
    pub aborted: Option<String>,
    /// Metrics computed when the run finished, if any.
    pub metrics: Option<PlanMetrics>,
}

impl RunLog {
    pub fn new(header: RunHeader) -> Self {
        Self { header, records: Vec::new(), truncated: false, aborted: None, metrics: None }
    }

    /// Appends a record, refusing non-increasing timestamps.
    pub fn push(&mut self, record: RunRecord) -> Result<(), PlannerError> {
        if let Some(last) = self.records.last() {
            if !(record.time_s > last.time_s) {
                return Err(PlannerError::Log {
                    line: self.records.len() + 2,
                    reason: format!("time {} does not follow {}", record.time_s, last.time_s),
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Computes and stores the metrics trailer.
    pub fn finish(&mut self) -> &PlanMetrics {
        let m = compute_metrics(self, &self.header.scene);
        self.metrics.insert(m)
    }

    pub fn duration_s(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.time_s - a.time_s,
            _ => 0.0,
        }
    }

    /// Line-delimited JSON: header, one line per record, trailer.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |l: &Line| {
            out.push_str(&serde_json::to_string(l).expect("run log lines serialize"));
            out.push('\n');
        };
        line(&Line::Header(self.header.clone()));
        for r in &self.records {
            line(&Line::Record(r.clone()));
        }
        line(&Line::Trailer(RunTrailer {
            v: RUNLOG_SCHEMA_VERSION,
            truncated: self.truncated,
            aborted: self.aborted.clone(),
            metrics: self.metrics.clone(),
        }));
        out
    }

    /// Parses and validates a JSONL log. Errors carry 1-based line numbers.
    pub fn from_jsonl(text: &str) -> Result<Self, PlannerError> {
        let err = |line: usize, reason: String| PlannerError::Log { line, reason };
        let mut log: Option<RunLog> = None;
        let mut trailer_seen = false;
        for (k, raw) in text.lines().enumerate() {
            let n = k + 1;
            if raw.trim().is_empty() {
                continue;
            }
            if trailer_seen {
                return Err(err(n, "content after the trailer".into()));
            }
            let parsed: Line = serde_json::from_str(raw).map_err(|e| err(n, e.to_string()))?;
            let v = match &parsed {
                Line::Header(h) => h.v,
                Line::Record(r) => r.v,
                Line::Trailer(t) => t.v,
            };
            if v != RUNLOG_SCHEMA_VERSION {
                return Err(err(n, format!("unsupported schema version {v}")));
            }
            match (parsed, log.as_mut()) {
                (Line::Header(h), None) => log = Some(RunLog::new(h)),
                (Line::Header(_), Some(_)) => return Err(err(n, "second header".into())),
                (_, None) => return Err(err(n, "first line must be the header".into())),
                (Line::Record(r), Some(l)) => {
                    if (r.time_s - r.state.time_s).abs() > 0.0 {
                        return Err(err(n, "record time disagrees with its state".into()));
                    }
                    l.push(r).map_err(|e| match e {
                        PlannerError::Log { reason, .. } => err(n, reason),
                        other => other,
                    })?;
                }
                (Line::Trailer(t), Some(l)) => {
                    l.truncated = t.truncated;
                    l.aborted = t.aborted;
                    l.metrics = t.metrics;
                    trailer_seen = true;
                }
            }
        }
        log.ok_or_else(|| err(1, "empty log".into()))
    }
}

/// Metrics recomputed from the recorded frames and commands alone.
pub fn replay_metrics(log: &RunLog) -> PlanMetrics {
    compute_metrics(log, &log.header.scene)
}

/// Checks the embedded scene against its hash and the stored metrics
/// against a recomputation; both must match exactly.
pub fn verify_log(log: &RunLog) -> Result<PlanMetrics, PlannerError> {
    let hash = scene_hash(&log.header.scene);
    if hash != log.header.scene_hash {
        return Err(PlannerError::Mismatch(format!(
            "scene hash {} does not match header {}",
            hash, log.header.scene_hash
        )));
    }
    let again = replay_metrics(log);
    match &log.metrics {
        Some(stored) if *stored != again => Err(PlannerError::Mismatch(format!(
            "stored metrics differ from recomputation: stored {}, recomputed {}",
            serde_json::to_string(stored).unwrap_or_default(),
            serde_json::to_string(&again).unwrap_or_default()
        ))),
        Some(_) => Ok(again),
        None => Err(PlannerError::Mismatch("log has no stored metrics".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blimp::BurstDirection;
    use crate::geometry::Vec3;
    use crate::sensors::{LidarMount, LidarReading};
    use crate::world::preset;

    fn sample_log() -> RunLog {
        let scene = Scene::empty(preset("lab-4x3").unwrap());
        let cfg = BlimpConfig::default();
        let header = RunHeader::new(&scene, "manual", 5, &cfg, &DriftModel::default(), &CameraModel::default(), 0.1);
        let mut log = RunLog::new(header);
        for k in 0..3 {
            let mut s = BlimpState::at_rest(Vec3::new(1.0 + 0.1 * k as f64, 1.0, 1.5), 0.0, &cfg);
            s.time_s = 0.1 * k as f64;
            let mut r = RunRecord::new(s);
            r.commands.push(CommandBurst::nominal(BurstDirection::Forward));
            r.lidar.push(LidarSample { mount: LidarMount::Down, reading: LidarReading::Distance(1.5) });
            r.events.push(RunEvent::WaypointReached { index: k });
            log.push(r).unwrap();
        }
        log.finish();
        log
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let log = sample_log();
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().all(|l| l.starts_with(r#"{"kind":"#) && l.contains(r#""v":1"#)));
        let back = RunLog::from_jsonl(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_jsonl(), text);
        verify_log(&back).unwrap();
    }

    #[test]
    fn timestamps_must_increase() {
        let mut log = sample_log();
        let r = log.records[1].clone();
        assert!(log.push(r).is_err());
    }

    #[test]
    fn tampered_line_is_reported_by_number() {
        let text = sample_log().to_jsonl();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].replace(r#""time_s":0.1"#, r#""time_s":"soon""#);
        match RunLog::from_jsonl(&lines.join("\n")) {
            Err(PlannerError::Log { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines.swap(2, 3);
        match RunLog::from_jsonl(&lines.join("\n")) {
            Err(PlannerError::Log { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunLog::from_jsonl(&lines[1..].join("\n")), Err(PlannerError::Log { line: 1, .. })));
    }

    #[test]
    fn verify_catches_scene_and_metric_edits() {
        let mut log = sample_log();
        log.header.scene.ambient_temp_c = 30.0;
        assert!(matches!(verify_log(&log), Err(PlannerError::Mismatch(_))));
        let mut log = sample_log();
        log.metrics.as_mut().unwrap().turn_count += 1;
        assert!(matches!(verify_log(&log), Err(PlannerError::Mismatch(_))));
    }

    #[test]
    fn wrong_version_rejected() {
        let text = sample_log().to_jsonl().replacen(r#""v":1"#, r#""v":2"#, 1);
        assert!(matches!(RunLog::from_jsonl(&text), Err(PlannerError::Log { line: 1, .. })));
    }
}
