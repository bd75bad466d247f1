use serde::{Deserialize, Serialize};

use super::sim::{brake, rotate, thrust, AltitudeHold, Sim, DEFAULT_DT_S};
use super::route::{Occupancy, CRAFT_RADIUS_M};
use super::{PlannerError, RunEvent, RunHeader, RunLog, RunRecord};
use crate::blimp::{BlimpConfig, BlimpState, CommandBurst, DriftModel};
use crate::geometry::{wrap_angle, Vec2, Vec3};
use crate::sensors::{CameraModel, LidarMount, LidarReading};
use crate::world::{FloorPlan, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallSide {
    Left,
    Right,
}

impl WallSide {
    fn mount(self) -> LidarMount {
        match self {
            WallSide::Left => LidarMount::Side,
            WallSide::Right => LidarMount::SideRight,
        }
    }

    /// +1 when the wall is to the left, so positive angles turn toward it.
    fn sign(self) -> f64 {
        match self {
            WallSide::Left => 1.0,
            WallSide::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WallFollowConfig {
    pub side: WallSide,
    pub budget_s: f64,
    pub altitude_m: f64,
    /// Acceptable wall distance band.
    pub band_m: [f64; 2],
    pub target_m: f64,
    /// Forward reading that triggers a corner turn.
    pub corner_trigger_m: f64,
    pub cruise_mps: f64,
    /// Abort once the side LiDAR has seen nothing for this long.
    pub lost_timeout_s: f64,
    /// Heading offset per metre of distance error.
    pub gain_rad_per_m: f64,
    pub max_offset_deg: f64,
    pub capture_interval_s: f64,
    pub camera: CameraModel,
}

impl Default for WallFollowConfig {
    fn default() -> Self {
        Self {
            side: WallSide::Left,
            budget_s: 300.0,
            altitude_m: 1.2,
            band_m: [0.4, 0.8],
            target_m: 0.6,
            corner_trigger_m: 0.75,
            cruise_mps: 0.2,
            lost_timeout_s: 10.0,
            gain_rad_per_m: 1.0,
            max_offset_deg: 15.0,
            capture_interval_s: 1.0,
            camera: CameraModel::default(),
        }
    }
}

impl WallFollowConfig {
    fn validate(&self) -> Result<(), PlannerError> {
        if !(self.band_m[0] > 0.0 && self.band_m[0] <= self.target_m && self.target_m <= self.band_m[1]) {
            return Err(PlannerError::Config("target must lie inside a positive band".into()));
        }
        for (name, v) in [
            ("budget_s", self.budget_s),
            ("altitude_m", self.altitude_m),
            ("corner_trigger_m", self.corner_trigger_m),
            ("cruise_mps", self.cruise_mps),
            ("lost_timeout_s", self.lost_timeout_s),
            ("capture_interval_s", self.capture_interval_s),
        ] {
            if !(v > 0.0) {
                return Err(PlannerError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.gain_rad_per_m >= 0.0 && self.max_offset_deg >= 0.0 && self.max_offset_deg < 90.0) {
            return Err(PlannerError::Config("gain and offset limit out of range".into()));
        }
        self.camera.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallFollowOutcome {
    pub log: RunLog,
    pub corner_turns: u32,
    /// Share of valid side readings inside the band.
    pub in_band_fraction: f64,
    /// Completed laps, assuming four corners per lap.
    pub laps: u32,
}

/// Start pose beside the south wall of the interior, `target_m` from it,
/// heading so the wall is on `side`. Slides along the wall past furniture
/// when the preferred spot, 1 m from the corner, is blocked.
pub fn wall_start(plan: &FloorPlan, side: WallSide, altitude_m: f64, target_m: f64) -> Result<(Vec3, f64), PlannerError> {
    let b = plan
        .interior_bounds()
        .ok_or_else(|| PlannerError::Infeasible("floor plan has no interior".into()))?;
    let y = b.min.y + target_m;
    let grid = Occupancy::new(plan, altitude_m, CRAFT_RADIUS_M);
    let (x0, step, heading) = match side {
        WallSide::Right => (b.min.x + 1.0, 0.1, 0.0),
        WallSide::Left => (b.max.x - 1.0, -0.1, std::f64::consts::PI),
    };
    let steps = ((b.max.x - b.min.x) / 0.1).ceil() as i64;
    (0..steps)
        .map(|k| Vec2::new(x0 + step * k as f64, y))
        .take_while(|p| p.x >= b.min.x && p.x <= b.max.x)
        .find(|p| grid.is_free(*p))
        .map(|p| (Vec3::new(p.x, p.y, altitude_m), heading))
        .ok_or_else(|| PlannerError::Infeasible("no free start along the south wall".into()))
}

/// Reactive wall following: hold the side distance in band by offsetting the
/// heading from the current wall direction, and turn 90 degrees away from
/// the wall when the forward LiDAR sees a corner.
pub fn plan_wall_follow(
    scene: &Scene,
    blimp: &BlimpConfig,
    drift: &DriftModel,
    cfg: &WallFollowConfig,
    start: (Vec3, f64),
    seed: u64,
) -> Result<WallFollowOutcome, PlannerError> {
    cfg.validate()?;
    blimp.validate()?;
    let (p0, h0) = start;
    if !(p0.z > 0.0 && p0.z < scene.floor_plan.ceiling_height_m) {
        return Err(PlannerError::Infeasible("start altitude outside the room".into()));
    }
    let state = BlimpState::at_rest(p0, h0, blimp);
    let mut sim = Sim::new(scene.clone(), state, blimp.clone(), *drift, seed);
    sim.camera = cfg.camera.clone();
    let mut header = RunHeader::new(scene, "wall-follow", seed, blimp, drift, &cfg.camera, DEFAULT_DT_S);
    header.params.insert("side_left".into(), if cfg.side == WallSide::Left { 1.0 } else { 0.0 });
    header.params.insert("altitude_m".into(), cfg.altitude_m);
    header.params.insert("target_m".into(), cfg.target_m);
    header.params.insert("budget_s".into(), cfg.budget_s);
    let mut log = RunLog::new(header);

    let mut hold = AltitudeHold::default();
    let mut track = h0;
    let mut corners = 0u32;
    let mut lost_s = 0.0;
    let (mut valid, mut in_band) = (0u32, 0u32);
    let capture_every = (cfg.capture_interval_s / sim.dt_s).round().max(1.0) as u64;
    let max_offset = cfg.max_offset_deg.to_radians();
    // a corner turn is one brake tick followed by the rotation
    let mut turning = false;

    loop {
        let mut rec = RunRecord::new(sim.state);
        let down = sim.lidar(LidarMount::Down);
        let fwd = sim.lidar(LidarMount::Forward);
        let side = sim.lidar(cfg.side.mount());
        rec.lidar = vec![down, fwd, side];
        if sim.tick % capture_every == 0 {
            rec.camera = Some(sim.camera_frame());
        }
        if sim.state.battery.is_exhausted() {
            rec.events.push(RunEvent::BatteryExhausted);
            log.truncated = true;
            log.push(rec)?;
            break;
        }
        if sim.state.time_s >= cfg.budget_s - 1e-9 {
            log.push(rec)?;
            break;
        }

        match side.reading {
            LidarReading::Distance(d) => {
                lost_s = 0.0;
                valid += 1;
                if d >= cfg.band_m[0] && d <= cfg.band_m[1] {
                    in_band += 1;
                }
            }
            LidarReading::TooClose => lost_s = 0.0,
            LidarReading::OutOfRange => lost_s += sim.dt_s,
        }
        if lost_s > cfg.lost_timeout_s {
            let reason = format!("wall lost for more than {} s", cfg.lost_timeout_s);
            rec.events.push(RunEvent::Aborted { reason: reason.clone() });
            log.aborted = Some(reason);
            log.push(rec)?;
            break;
        }

        let s = sim.state;
        let ground = sim.ground_height(s.position_m.xy());
        hold.observe(down.reading, ground);
        let mut cmds: Vec<CommandBurst> = Vec::new();
        let corner_ahead = match fwd.reading {
            LidarReading::Distance(d) => d <= cfg.corner_trigger_m,
            LidarReading::TooClose => true,
            LidarReading::OutOfRange => false,
        };
        if turning || corner_ahead {
            if !turning && s.forward_speed().abs() > 0.03 {
                cmds.extend(brake(&s, blimp));
                turning = true;
            } else {
                track = wrap_angle(track - cfg.side.sign() * std::f64::consts::FRAC_PI_2);
                cmds.extend(rotate(wrap_angle(track - s.heading_rad), blimp));
                corners += 1;
                rec.events.push(RunEvent::CornerTurn { count: corners });
                turning = false;
            }
        } else {
            let offset = match side.reading {
                LidarReading::Distance(d) => (cfg.gain_rad_per_m * (d - cfg.target_m)).clamp(-max_offset, max_offset),
                LidarReading::TooClose => -max_offset,
                LidarReading::OutOfRange => 0.0,
            };
            let want = wrap_angle(track + cfg.side.sign() * offset);
            cmds.extend(rotate(0.8 * wrap_angle(want - s.heading_rad), blimp));
            cmds.extend(thrust(cfg.cruise_mps - s.forward_speed(), blimp));
        }
        cmds.extend(hold.command(cfg.altitude_m, &s, blimp));

        let (wind, events) = sim.advance(&mut cmds)?;
        rec.commands = cmds;
        rec.wind_at_ground_mps = wind;
        rec.events.extend(events);
        log.push(rec)?;
    }
    log.finish();
    let in_band_fraction = if valid == 0 { 0.0 } else { in_band as f64 / valid as f64 };
    Ok(WallFollowOutcome { log, corner_turns: corners, in_band_fraction, laps: corners / 4 })
}
