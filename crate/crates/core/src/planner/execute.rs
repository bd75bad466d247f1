use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::route::Occupancy;
use super::sim::{brake, rotate, thrust, AltitudeHold, Sim, DEFAULT_DT_S};
use super::{Action, Path, PlannerError, RunEvent, RunHeader, RunLog, RunRecord};
use crate::blimp::{BlimpConfig, BlimpState, CommandBurst, DriftModel};
use crate::geometry::{wrap_angle, Vec2};
use crate::sensors::{CameraModel, LidarMount, ThermalModel};
use crate::world::Scene;

/// Heading error beyond which the craft stops and turns in place.
const TURN_IN_PLACE_RAD: f64 = 30.0 * std::f64::consts::PI / 180.0;
/// Heading error tolerated at a capture before aligning.
const CAPTURE_HEADING_TOL_RAD: f64 = 10.0 * std::f64::consts::PI / 180.0;
const ALTITUDE_TOL_M: f64 = 0.15;
const MIN_APPROACH_MPS: f64 = 0.06;
const STOPPED_MPS: f64 = 0.03;
pub const DETECTION_MERGE_M: f64 = 0.5;
const LOOKAHEAD_M: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    /// When false the craft replays the burst schedule of a calm-air run
    /// without feedback.
    pub closed_loop: bool,
    pub dt_s: f64,
    pub waypoint_tolerance_m: f64,
    pub heading_gain: f64,
    pub cruise_mps: f64,
    pub max_duration_s: f64,
    /// A waypoint not reached within this long is skipped.
    pub stall_timeout_s: f64,
    pub camera: CameraModel,
    /// Thermal passes at the model's frame rate when set.
    pub thermal: Option<ThermalModel>,
    pub apply_scatter: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            closed_loop: true,
            dt_s: DEFAULT_DT_S,
            waypoint_tolerance_m: 0.1,
            heading_gain: 0.8,
            cruise_mps: 0.3,
            max_duration_s: 3600.0,
            stall_timeout_s: 120.0,
            camera: CameraModel::default(),
            thermal: None,
            apply_scatter: true,
        }
    }
}

impl ExecConfig {
    fn validate(&self) -> Result<(), PlannerError> {
        let positive = [
            ("dt_s", self.dt_s),
            ("waypoint_tolerance_m", self.waypoint_tolerance_m),
            ("heading_gain", self.heading_gain),
            ("cruise_mps", self.cruise_mps),
            ("max_duration_s", self.max_duration_s),
            ("stall_timeout_s", self.stall_timeout_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(PlannerError::Config(format!("{name} must be positive")));
            }
        }
        if self.dt_s > 0.5 {
            return Err(PlannerError::Config("dt_s must not exceed 0.5 s".into()));
        }
        self.camera.validate()?;
        if let Some(t) = &self.thermal {
            t.validate()?;
        }
        Ok(())
    }
}

/// Flies `path` closed-loop with the default executor settings.
pub fn execute_path(
    scene: &Scene,
    path: &Path,
    blimp: &BlimpConfig,
    drift: &DriftModel,
    seed: u64,
) -> Result<RunLog, PlannerError> {
    execute_path_with(scene, path, blimp, drift, seed, &ExecConfig::default())
}

pub fn execute_path_with(
    scene: &Scene,
    path: &Path,
    blimp: &BlimpConfig,
    drift: &DriftModel,
    seed: u64,
    exec: &ExecConfig,
) -> Result<RunLog, PlannerError> {
    exec.validate()?;
    blimp.validate()?;
    let first = path
        .waypoints
        .first()
        .ok_or_else(|| PlannerError::Infeasible("path has no waypoints".into()))?;
    let z = first.position_m.z;
    if !(z > 0.0 && z < scene.floor_plan.ceiling_height_m)
        || !Occupancy::new(&scene.floor_plan, z, 0.0).is_free(first.position_m.xy())
    {
        return Err(PlannerError::Infeasible("first waypoint is not in free space".into()));
    }
    if exec.closed_loop {
        Ok(closed_loop(scene, path, blimp, drift, seed, exec)?.0)
    } else {
        let (_, schedule) = closed_loop(scene, path, blimp, &DriftModel { seed: drift.seed, ..DriftModel::calm() }, seed, exec)?;
        open_loop(scene, path, blimp, drift, seed, exec, &schedule)
    }
}

/// What the calm-air run did at each tick, replayed blind in open loop.
struct Tick {
    commands: Vec<CommandBurst>,
    capture: Option<usize>,
}

fn start(scene: &Scene, path: &Path, blimp: &BlimpConfig, drift: &DriftModel, seed: u64, exec: &ExecConfig) -> (Sim, RunLog) {
    let w0 = path.waypoints[0];
    let state = BlimpState::at_rest(w0.position_m, w0.heading_rad, blimp);
    let mut sim = Sim::new(scene.clone(), state, blimp.clone(), *drift, seed);
    sim.dt_s = exec.dt_s;
    sim.camera = exec.camera.clone();
    sim.apply_scatter = exec.apply_scatter;
    if let Some(t) = &exec.thermal {
        sim.thermal = t.clone();
        sim.last_thermal = crate::sensors::ThermalFrame::uniform(t, scene.ambient_temp_c);
    }
    let source = if exec.closed_loop { path.planner.clone() } else { format!("{}/open-loop", path.planner) };
    let mut header = RunHeader::new(scene, &source, seed, blimp, drift, &exec.camera, exec.dt_s);
    header.params = path.params.clone();
    header.params.insert("closed_loop".into(), if exec.closed_loop { 1.0 } else { 0.0 });
    header.params.insert("waypoints".into(), path.waypoints.len() as f64);
    (sim, RunLog::new(header))
}

/// Samples the sensors every tick records: down and forward LiDAR, plus a
/// thermal pass when one is due.
fn observe(sim: &mut Sim, exec: &ExecConfig, rec: &mut RunRecord) -> Result<(), PlannerError> {
    rec.lidar.push(sim.lidar(LidarMount::Down));
    rec.lidar.push(sim.lidar(LidarMount::Forward));
    if let Some(t) = &exec.thermal {
        let every = ((1.0 / t.frame_rate_hz) / sim.dt_s).round().max(1.0) as u64;
        if sim.tick % every == 0 {
            rec.thermal = Some(sim.thermal_frame()?);
        }
    }
    Ok(())
}

/// Ends the run when the battery or the time budget is spent.
fn out_of_budget(sim: &Sim, exec: &ExecConfig, log: &mut RunLog, rec: &mut RunRecord) -> bool {
    if sim.state.battery.is_exhausted() {
        rec.events.push(RunEvent::BatteryExhausted);
        log.truncated = true;
        return true;
    }
    if sim.state.time_s >= exec.max_duration_s - 1e-9 {
        log.truncated = true;
        return true;
    }
    false
}

fn closed_loop(
    scene: &Scene,
    path: &Path,
    blimp: &BlimpConfig,
    drift: &DriftModel,
    seed: u64,
    exec: &ExecConfig,
) -> Result<(RunLog, Vec<Tick>), PlannerError> {
    let (mut sim, mut log) = start(scene, path, blimp, drift, seed, exec);
    let mut schedule = Vec::new();
    let mut hold = AltitudeHold::default();
    let mut idx = 0usize;
    let mut dwell_left: Option<f64> = None;
    let mut since_progress = 0.0;
    let mut leg_start = path.waypoints[0].position_m.xy();

    loop {
        let mut rec = RunRecord::new(sim.state);
        observe(&mut sim, exec, &mut rec)?;
        if idx >= path.waypoints.len() || out_of_budget(&sim, exec, &mut log, &mut rec) {
            log.push(rec)?;
            break;
        }
        let ground = sim.ground_height(sim.state.position_m.xy());
        hold.observe(rec.lidar[0].reading, ground);

        let wp = path.waypoints[idx];
        let s = sim.state;
        let to = wp.position_m.xy() - s.position_m.xy();
        let dist = to.norm();
        let z_est = hold.estimate().unwrap_or(s.position_m.z);
        let mut cmds: Vec<CommandBurst> = Vec::new();
        let mut capture = None;

        if dist <= exec.waypoint_tolerance_m && (wp.position_m.z - z_est).abs() <= ALTITUDE_TOL_M {
            let aligned = wp.action == Action::Transit
                || wrap_angle(wp.heading_rad - s.heading_rad).abs() <= CAPTURE_HEADING_TOL_RAD;
            if !aligned {
                turn_in_place(&s, wrap_angle(wp.heading_rad - s.heading_rad), exec, blimp, &mut cmds);
            } else if wp.dwell_s > 0.0 && dwell_left.get_or_insert(wp.dwell_s).max(0.0) > 1e-9 {
                *dwell_left.as_mut().expect("set above") -= exec.dt_s;
                cmds.extend(brake(&s, blimp));
            } else {
                if wp.action != Action::Transit {
                    rec.camera = Some(sim.camera_frame());
                    rec.events.push(RunEvent::Captured { waypoint: idx });
                    capture = Some(idx);
                }
                rec.events.push(RunEvent::WaypointReached { index: idx });
                leg_start = wp.position_m.xy();
                idx += 1;
                dwell_left = None;
                since_progress = 0.0;
            }
        } else if dist > exec.waypoint_tolerance_m {
            let aim = pursuit_point(leg_start, wp.position_m.xy(), s.position_m.xy());
            let to_aim = aim - s.position_m.xy();
            let bearing = to_aim.y.atan2(to_aim.x);
            let err = wrap_angle(bearing - s.heading_rad);
            if err.abs() > TURN_IN_PLACE_RAD {
                turn_in_place(&s, err, exec, blimp, &mut cmds);
            } else {
                cmds.extend(rotate(exec.heading_gain * err, blimp));
                let want = (exec.heading_gain * dist).clamp(MIN_APPROACH_MPS, exec.cruise_mps);
                cmds.extend(thrust(want - s.forward_speed(), blimp));
            }
        } else {
            // over the waypoint, waiting for the altitude to settle
            cmds.extend(brake(&s, blimp));
        }
        if let Some(wp) = path.waypoints.get(idx) {
            cmds.extend(hold.command(wp.position_m.z, &s, blimp));
        }

        since_progress += exec.dt_s;
        if since_progress > exec.stall_timeout_s && idx < path.waypoints.len() {
            rec.events.push(RunEvent::WaypointSkipped { index: idx, reason: "not reached in time".into() });
            leg_start = sim.state.position_m.xy();
            idx += 1;
            since_progress = 0.0;
            dwell_left = None;
        }

        let (wind, events) = sim.advance(&mut cmds)?;
        rec.commands = cmds.clone();
        rec.wind_at_ground_mps = wind;
        rec.events.extend(events);
        log.push(rec)?;
        schedule.push(Tick { commands: cmds, capture });
    }
    log.finish();
    Ok((log, schedule))
}

/// Point `LOOKAHEAD_M` further along the leg `a -> b` than the craft's
/// projection onto it, or `b` itself once the craft is that close.
fn pursuit_point(a: Vec2, b: Vec2, p: Vec2) -> Vec2 {
    let leg = b - a;
    let len = leg.norm();
    if len < 1e-9 || p.distance(b) <= LOOKAHEAD_M {
        return b;
    }
    let u = leg * (1.0 / len);
    let t = (p - a).dot(u).clamp(0.0, len);
    a + u * (t + LOOKAHEAD_M).min(len)
}

/// Brake first, then rotate toward `err` with the heading gain.
fn turn_in_place(s: &BlimpState, err: f64, exec: &ExecConfig, blimp: &BlimpConfig, cmds: &mut Vec<CommandBurst>) {
    if s.forward_speed().abs() > STOPPED_MPS {
        cmds.extend(brake(s, blimp));
    } else {
        let step = if err.abs() * exec.heading_gain < 3f64.to_radians() { err } else { exec.heading_gain * err };
        cmds.extend(rotate(step, blimp));
    }
}

fn open_loop(
    scene: &Scene,
    path: &Path,
    blimp: &BlimpConfig,
    drift: &DriftModel,
    seed: u64,
    exec: &ExecConfig,
    schedule: &[Tick],
) -> Result<RunLog, PlannerError> {
    let (mut sim, mut log) = start(scene, path, blimp, drift, seed, exec);
    for tick in schedule {
        let mut rec = RunRecord::new(sim.state);
        observe(&mut sim, exec, &mut rec)?;
        if out_of_budget(&sim, exec, &mut log, &mut rec) {
            log.push(rec)?;
            log.finish();
            return Ok(log);
        }
        if let Some(k) = tick.capture {
            rec.camera = Some(sim.camera_frame());
            rec.events.push(RunEvent::Captured { waypoint: k });
        }
        let mut cmds = tick.commands.clone();
        let (wind, events) = sim.advance(&mut cmds)?;
        rec.commands = cmds;
        rec.wind_at_ground_mps = wind;
        rec.events.extend(events);
        log.push(rec)?;
    }
    let mut rec = RunRecord::new(sim.state);
    observe(&mut sim, exec, &mut rec)?;
    log.push(rec)?;
    log.finish();
    Ok(log)
}

/// Places worth a low revisit after a survey flight: items the camera
/// captured, plus thermal hotspots projected to the floor. Hotspot
/// observations are clustered within `DETECTION_MERGE_M` and a cluster must
/// appear in at least two thermal frames, which drops the ghosts that stale
/// interlaced rows leave behind while the craft moves.
pub fn detections_from(log: &RunLog, thermal: &ThermalModel, threshold_c: f64) -> Vec<Vec2> {
    let mut ids = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    let positions: BTreeMap<u32, Vec2> = log.header.scene.evidence.iter().map(|e| (e.id, e.position_m)).collect();
    // (sum of points, observation count, frames seen in)
    let mut clusters: Vec<(Vec2, f64, Vec<usize>)> = Vec::new();
    for (k, r) in log.records.iter().enumerate() {
        if let Some(f) = &r.camera {
            for id in &f.captured_ids {
                if ids.insert(*id) {
                    if let Some(p) = positions.get(id) {
                        out.push(*p);
                    }
                }
            }
        }
        let Some(t) = &r.thermal else { continue };
        for h in crate::sensors::hotspot_detect(t, log.header.scene.ambient_temp_c, threshold_c) {
            let p = thermal.ground_point(&r.state, h.centroid.0 + 0.5, h.centroid.1 + 0.5);
            let near = clusters.iter_mut().find(|(sum, n, _)| (*sum * (1.0 / *n)).distance(p) <= DETECTION_MERGE_M);
            match near {
                Some((sum, n, frames)) => {
                    *sum = *sum + p;
                    *n += 1.0;
                    if frames.last() != Some(&k) {
                        frames.push(k);
                    }
                }
                None => clusters.push((p, 1.0, vec![k])),
            }
        }
    }
    for (sum, n, frames) in clusters {
        let c = sum * (1.0 / n);
        if frames.len() >= 2 && out.iter().all(|q: &Vec2| q.distance(c) > DETECTION_MERGE_M) {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{compute_metrics, plan_snake};
    use crate::world::{preset, FloorPlan};

    fn lab() -> Scene {
        Scene::empty(preset("lab-4x3").unwrap())
    }

    #[test]
    fn calm_snake_reaches_every_capture_within_tolerance() {
        let scene = lab();
        let path = plan_snake(&scene.floor_plan, &CameraModel::default(), 1.5, 0.25).unwrap();
        let log = execute_path(&scene, &path, &BlimpConfig::default(), &DriftModel::calm(), 1).unwrap();
        assert!(!log.truncated);
        let mut reached = 0;
        for r in &log.records {
            for e in &r.events {
                if let RunEvent::Captured { waypoint } = e {
                    let wp = path.waypoints[*waypoint].position_m.xy();
                    assert!(r.state.position_m.xy().distance(wp) <= 0.1 + 1e-12);
                    reached += 1;
                }
                assert!(!matches!(e, RunEvent::WaypointSkipped { .. }), "{e:?}");
            }
        }
        assert_eq!(reached, path.count(Action::Capture));
        let m = compute_metrics(&log, &scene);
        assert_eq!(m.turn_count, 6);
        assert!(m.floor_coverage_fraction >= 0.99, "{}", m.floor_coverage_fraction);
        assert!(m.mean_consecutive_overlap_fraction >= 0.25);
    }

    #[test]
    fn tiny_battery_truncates() {
        let scene = lab();
        let path = plan_snake(&scene.floor_plan, &CameraModel::default(), 1.5, 0.25).unwrap();
        let mut cfg = BlimpConfig::default();
        cfg.power.capacity_mah = 1.0;
        let log = execute_path(&scene, &path, &cfg, &DriftModel::calm(), 1).unwrap();
        assert!(log.truncated);
        assert!(log.metrics.as_ref().unwrap().truncated);
        assert!(log.records.last().unwrap().events.contains(&RunEvent::BatteryExhausted));
    }

    #[test]
    fn first_waypoint_must_be_free() {
        let scene = lab();
        let mut path = plan_snake(&scene.floor_plan, &CameraModel::default(), 1.5, 0.25).unwrap();
        path.waypoints[0].position_m.x = 0.01;
        assert!(matches!(
            execute_path(&scene, &path, &BlimpConfig::default(), &DriftModel::calm(), 1),
            Err(PlannerError::Infeasible(_))
        ));
        path.waypoints.clear();
        assert!(execute_path(&scene, &path, &BlimpConfig::default(), &DriftModel::calm(), 1).is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        let scene = lab();
        let path = plan_snake(&scene.floor_plan, &CameraModel::default(), 1.5, 0.25).unwrap();
        let drift = DriftModel::with_seed(4);
        let a = execute_path(&scene, &path, &BlimpConfig::default(), &drift, 4).unwrap();
        let b = execute_path(&scene, &path, &BlimpConfig::default(), &drift, 4).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
    }

    #[test]
    fn open_loop_replays_calm_schedule() {
        let scene = lab();
        let path = plan_snake(&scene.floor_plan, &CameraModel::default(), 1.5, 0.25).unwrap();
        let open = ExecConfig { closed_loop: false, ..Default::default() };
        let calm = DriftModel::calm();
        let a = execute_path_with(&scene, &path, &BlimpConfig::default(), &calm, 2, &open).unwrap();
        let b = execute_path(&scene, &path, &BlimpConfig::default(), &calm, 2).unwrap();
        // no disturbance: blind replay flies the same trajectory
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.state, y.state);
            assert_eq!(x.commands, y.commands);
        }
    }

    #[test]
    fn obstacles_are_routed_around() {
        let mut plan = FloorPlan::rectangle("blocked", 6.0, 4.0, 2.5, 0.05);
        plan.fill_rect(crate::geometry::Rect::new(2.8, 0.05, 3.2, 3.0), crate::world::Cell::Wall);
        let scene = Scene::empty(plan);
        let path = plan_snake(&scene.floor_plan, &CameraModel::default(), 1.5, 0.25).unwrap();
        path.validate(&scene.floor_plan).unwrap();
        let log = execute_path(&scene, &path, &BlimpConfig::default(), &DriftModel::calm(), 3).unwrap();
        let skipped = log.records.iter().flat_map(|r| &r.events).filter(|e| matches!(e, RunEvent::WaypointSkipped { .. })).count();
        assert_eq!(skipped, 0);
    }
}
