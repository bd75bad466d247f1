use base64::Engine as _;
use csa_core::blimp::{BlimpConfig, BlimpState, CommandBurst, DriftModel};
use csa_core::geometry::Vec3;
use csa_core::planner::{RunEvent, RunHeader, RunLog, RunRecord, Sim};
use csa_core::sensors::{render_footprint_png, CameraModel, LidarMount, ThermalFrame, ThermalModel};
use csa_core::world::Scene;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::protocol::{Command, SensorKind, Telemetry, TelemetryKind};
use crate::source::SceneSource;

pub const TICK_S: f64 = 0.1;
/// Thermal frames and camera rasters go out every this many ticks (2 Hz).
pub const SLOW_SENSOR_TICKS: u64 = 5;
const RASTER_PX_PER_M: f64 = 50.0;
const SPAWN_CLEARANCE_M: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub blimp: BlimpConfig,
    pub drift: DriftModel,
    /// Seeds sensor noise.
    pub seed: u64,
    pub camera: CameraModel,
    pub thermal: ThermalModel,
    pub spawn_altitude_m: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            blimp: BlimpConfig::default(),
            drift: DriftModel::default(),
            seed: 0,
            camera: CameraModel::default(),
            thermal: ThermalModel::default(),
            spawn_altitude_m: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub camera: bool,
    pub thermal: bool,
    pub lidar: bool,
}

/// One piloted flight. Owned by a single task; all mutation goes through
/// [`Session::handle`].
#[derive(Debug)]
pub struct Session {
    pub id: String,
    config: SessionConfig,
    pristine: Scene,
    sim: Sim,
    toggles: Toggles,
    pending: Vec<CommandBurst>,
    recording: Option<RunLog>,
    last_log: Option<RunLog>,
    started: bool,
}

fn spawn(scene: &Scene, config: &SessionConfig) -> Result<Sim, String> {
    config.blimp.validate().map_err(|e| e.to_string())?;
    config.camera.validate().map_err(|e| e.to_string())?;
    config.thermal.validate().map_err(|e| e.to_string())?;
    let plan = &scene.floor_plan;
    let p = plan.spawn_point(SPAWN_CLEARANCE_M).ok_or("scene has no collision-free spawn point")?;
    let z = config.spawn_altitude_m.min(plan.ceiling_height_m - 0.3);
    if !(z > 0.0) || plan.is_solid(p, z) {
        return Err(format!("spawn altitude {z} m is not free"));
    }
    let state = BlimpState::at_rest(Vec3::new(p.x, p.y, z), 0.0, &config.blimp);
    let mut sim = Sim::new(scene.clone(), state, config.blimp.clone(), config.drift, config.seed);
    sim.dt_s = TICK_S;
    sim.camera = config.camera.clone();
    sim.thermal = config.thermal.clone();
    sim.last_thermal = ThermalFrame::uniform(&config.thermal, scene.ambient_temp_c);
    Ok(sim)
}

impl Session {
    pub fn new(id: &str, source: &SceneSource, config: SessionConfig) -> Result<Self, String> {
        let scene = source.resolve()?;
        let sim = spawn(&scene, &config)?;
        Ok(Self {
            id: id.to_string(),
            config,
            pristine: scene,
            sim,
            toggles: Toggles::default(),
            pending: Vec::new(),
            recording: None,
            last_log: None,
            started: false,
        })
    }

    pub fn state(&self) -> &BlimpState {
        &self.sim.state
    }

    pub fn scene(&self) -> &Scene {
        &self.sim.scene
    }

    pub fn toggles(&self) -> Toggles {
        self.toggles
    }

    pub fn is_recording(&self) -> bool {
        self.recording.is_some()
    }

    /// False until the first command arrives; the clock does not run before.
    pub fn started(&self) -> bool {
        self.started
    }

    /// Applies one command. Tick commands return the telemetry they produced.
    pub fn handle(&mut self, cmd: Command) -> Result<Vec<Telemetry>, String> {
        self.started = true;
        match cmd {
            Command::Burst(b) => {
                if self.sim.state.battery.is_exhausted() {
                    return Err("battery: battery exhausted, command rejected".into());
                }
                self.pending.push(b);
                Ok(Vec::new())
            }
            Command::Sensor { sensor, on } => {
                match sensor {
                    SensorKind::Camera => self.toggles.camera = on,
                    SensorKind::Thermal => self.toggles.thermal = on,
                    SensorKind::Lidar => self.toggles.lidar = on,
                }
                Ok(Vec::new())
            }
            Command::Record { on } => {
                if on && self.recording.is_none() {
                    let c = &self.config;
                    let header = RunHeader::new(&self.sim.scene, "manual", c.seed, &c.blimp, &c.drift, &c.camera, TICK_S);
                    self.recording = Some(RunLog::new(header));
                } else if !on {
                    self.stop_recording();
                }
                Ok(Vec::new())
            }
            Command::Reset => {
                self.reset()?;
                Ok(Vec::new())
            }
            Command::LoadScene(src) => {
                let scene = src.resolve()?;
                let sim = spawn(&scene, &self.config)?;
                self.stop_recording();
                self.pristine = scene;
                self.sim = sim;
                self.pending.clear();
                Ok(Vec::new())
            }
            Command::Tick { steps } => {
                let mut out = Vec::new();
                for _ in 0..steps {
                    out.extend(self.tick());
                }
                Ok(out)
            }
        }
    }

    fn reset(&mut self) -> Result<(), String> {
        self.stop_recording();
        self.sim = spawn(&self.pristine, &self.config)?;
        self.pending.clear();
        Ok(())
    }

    fn stop_recording(&mut self) {
        if let Some(mut log) = self.recording.take() {
            log.finish();
            self.last_log = Some(log);
        }
    }

    /// One fixed step: sample the enabled sensors, apply queued bursts,
    /// integrate, and report.
    pub fn tick(&mut self) -> Vec<Telemetry> {
        let sim = &mut self.sim;
        let mut rec = RunRecord::new(sim.state);
        if self.toggles.lidar {
            rec.lidar = [LidarMount::Forward, LidarMount::Side, LidarMount::Down].map(|m| sim.lidar(m)).to_vec();
        }
        let slow = sim.tick % SLOW_SENSOR_TICKS == 0;
        if self.toggles.camera {
            rec.camera = Some(sim.camera_frame());
        }
        if self.toggles.thermal && slow {
            match sim.thermal_frame() {
                Ok(f) => rec.thermal = Some(f),
                Err(e) => tracing::warn!(session = %self.id, "thermal frame failed: {e}"),
            }
        }
        let raster = if slow { raster_for(&sim.scene, &rec) } else { None };

        let was_exhausted = sim.state.battery.is_exhausted();
        let mut cmds = std::mem::take(&mut self.pending);
        match sim.advance(&mut cmds) {
            Ok((wind, events)) => {
                rec.wind_at_ground_mps = wind;
                rec.events = events;
            }
            Err(e) => tracing::warn!(session = %self.id, "step failed: {e}"),
        }
        rec.commands = cmds;
        if !was_exhausted && sim.state.battery.is_exhausted() {
            rec.events.push(RunEvent::BatteryExhausted);
        }

        let out = telemetry_for(&rec, raster);
        if let Some(log) = self.recording.as_mut() {
            // the clock only moves forward between resets, and resets stop recording
            log.push(rec).expect("session time increases");
        }
        out
    }

    /// The current recording (finished on a copy) or the last finished one.
    pub fn log(&self) -> Option<RunLog> {
        match &self.recording {
            Some(log) => {
                let mut copy = log.clone();
                copy.finish();
                Some(copy)
            }
            None => self.last_log.clone(),
        }
    }

    pub fn snapshot(&self) -> serde_json::Value {
        json!({
            "v": crate::protocol::PROTOCOL_VERSION,
            "id": self.id,
            "state": self.sim.state,
            "toggles": self.toggles,
            "recording": self.is_recording(),
            "scene_hash": csa_core::world::scene_hash(&self.sim.scene),
        })
    }
}

/// Base64 PNG of the camera footprint, when the record has a camera frame.
pub(crate) fn raster_for(scene: &Scene, rec: &RunRecord) -> Option<String> {
    let frame = rec.camera.as_ref()?;
    let png = render_footprint_png(scene, &frame.footprint_m, RASTER_PX_PER_M).ok()?;
    Some(base64::engine::general_purpose::STANDARD.encode(png))
}

/// Telemetry a record produces: state always, then each sensor present,
/// then one message per event.
pub fn telemetry_for(rec: &RunRecord, raster: Option<String>) -> Vec<Telemetry> {
    let t = rec.time_s;
    let mut out = vec![Telemetry::new(
        TelemetryKind::State,
        t,
        json!({
            "state": rec.state,
            "battery_remaining_mah": rec.state.battery.remaining_mah(),
            "commands": rec.commands,
            "wind_at_ground_mps": rec.wind_at_ground_mps,
        }),
    )];
    if let Some(f) = &rec.camera {
        let mut payload = json!({"footprint_m": f.footprint_m, "captured_ids": f.captured_ids});
        if let Some(r) = raster {
            payload["raster_png_b64"] = json!(r);
        }
        out.push(Telemetry::new(TelemetryKind::Camera, t, payload));
    }
    if let Some(f) = &rec.thermal {
        out.push(Telemetry::new(TelemetryKind::Thermal, t, json!(f)));
    }
    if !rec.lidar.is_empty() {
        out.push(Telemetry::new(TelemetryKind::Lidar, t, json!({"samples": rec.lidar})));
    }
    for e in &rec.events {
        out.push(Telemetry::new(TelemetryKind::Event, t, json!(e)));
    }
    out
}
