use super::{PlannerError, RunEvent};
use crate::blimp::{
    apply_burst_disturbed, downwash_at_ground, step, BlimpConfig, BlimpState, BurstDirection, CommandBurst, DriftModel,
    MAX_BURST_MS, MIN_BURST_MS, NOMINAL_BURST_MS,
};
use crate::geometry::{Rect, Vec2};
use crate::sensors::{
    camera_capture, lidar_read, thermal_capture, CameraFrame, CameraModel, LidarModel, LidarMount, LidarReading,
    LidarSample, ThermalFrame, ThermalModel,
};
use crate::world::{scatter_evidence, Cell, Scene};

/// Half-width of the square under the craft where downwash can move evidence.
const SCATTER_HALF_WIDTH_M: f64 = 1.0;
pub(crate) const DEFAULT_DT_S: f64 = 0.1;

/// splitmix64 finalizer over `a ^ golden * b`.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mount_index(m: LidarMount) -> u64 {
    match m {
        LidarMount::Forward => 1,
        LidarMount::Side => 2,
        LidarMount::Down => 3,
        LidarMount::SideRight => 4,
    }
}

/// One simulated flight: world, craft and sensors advanced in fixed ticks.
/// All sensor noise is seeded by `(seed, tick)`, so a run is reproducible.
#[derive(Debug, Clone)]
pub struct Sim {
    pub scene: Scene,
    pub state: BlimpState,
    pub config: BlimpConfig,
    pub drift: DriftModel,
    pub camera: CameraModel,
    pub thermal: ThermalModel,
    pub seed: u64,
    pub dt_s: f64,
    pub tick: u64,
    pub last_thermal: ThermalFrame,
    pub apply_scatter: bool,
}

impl Sim {
    pub fn new(scene: Scene, state: BlimpState, config: BlimpConfig, drift: DriftModel, seed: u64) -> Self {
        let thermal = ThermalModel::default();
        let last_thermal = ThermalFrame::uniform(&thermal, scene.ambient_temp_c);
        Self {
            scene,
            state,
            config,
            drift,
            camera: CameraModel::default(),
            thermal,
            seed,
            dt_s: DEFAULT_DT_S,
            tick: 0,
            last_thermal,
            apply_scatter: true,
        }
    }

    pub fn lidar(&self, mount: LidarMount) -> LidarSample {
        let model = LidarModel::new(mount);
        let seed = mix_seed(mix_seed(self.seed, self.tick), mount_index(mount));
        LidarSample { mount, reading: lidar_read(&self.scene, &self.state, &model, seed) }
    }

    pub fn camera_frame(&self) -> CameraFrame {
        camera_capture(&self.scene, &self.state, &self.camera)
    }

    /// Next interlaced thermal pass; also becomes the reference for the one after.
    pub fn thermal_frame(&mut self) -> Result<ThermalFrame, PlannerError> {
        let seed = mix_seed(mix_seed(self.seed, self.tick), 99);
        let frame = thermal_capture(&self.scene, &self.state, &self.thermal, &self.last_thermal, seed)?;
        self.last_thermal = frame.clone();
        Ok(frame)
    }

    /// Floor or obstacle-top height under `p`.
    pub fn ground_height(&self, p: Vec2) -> f64 {
        match self.scene.floor_plan.cell_at(p) {
            Some(Cell::Obstacle { height_m }) => height_m,
            _ => 0.0,
        }
    }

    /// Applies `commands` in order, moves evidence under strong downwash,
    /// then integrates one tick. Bursts the battery can no longer pay for
    /// are dropped from `commands`. Returns the ground wind and any
    /// displacement events.
    pub fn advance(&mut self, commands: &mut Vec<CommandBurst>) -> Result<(f64, Vec<RunEvent>), PlannerError> {
        let mut applied = 0;
        for cmd in commands.iter() {
            if self.state.battery.is_exhausted() {
                break;
            }
            self.state = apply_burst_disturbed(&self.state, *cmd, &self.config, &self.drift)?;
            applied += 1;
        }
        commands.truncate(applied);
        let thrust = !commands.is_empty();
        let h = self.state.position_m.z - self.ground_height(self.state.position_m.xy());
        let wind = if h > 0.0 { downwash_at_ground(&self.config, h, thrust)? } else { 0.0 };
        let mut events = Vec::new();
        if self.apply_scatter {
            let c = self.state.position_m.xy();
            let area = Rect::new(
                c.x - SCATTER_HALF_WIDTH_M,
                c.y - SCATTER_HALF_WIDTH_M,
                c.x + SCATTER_HALF_WIDTH_M,
                c.y + SCATTER_HALF_WIDTH_M,
            );
            let moved = scatter_evidence(&self.scene, wind, area);
            // each item is blown away at most once
            for (item, after) in self.scene.evidence.iter_mut().zip(moved.evidence) {
                if !item.displaced && after.displaced {
                    *item = after;
                    events.push(RunEvent::Displaced {
                        id: item.id,
                        position_m: item.position_m,
                        orientation_rad: item.orientation_rad,
                    });
                }
            }
        }
        self.state = step(&self.state, self.dt_s, &self.drift, &self.scene, &self.config);
        self.tick += 1;
        Ok((wind, events))
    }
}

/// Burst of the given direction worth `amount` nominal bursts, or `None`
/// when it would be shorter than the minimum burst.
pub(crate) fn burst(direction: BurstDirection, amount: f64) -> Option<CommandBurst> {
    let ms = (amount * NOMINAL_BURST_MS as f64).round();
    if ms < MIN_BURST_MS as f64 {
        return None;
    }
    Some(CommandBurst::new(direction, ms.min(MAX_BURST_MS as f64) as u32))
}

/// Rotation burst turning by `angle_rad` (positive = left).
pub(crate) fn rotate(angle_rad: f64, config: &BlimpConfig) -> Option<CommandBurst> {
    let per = config.rotation_per_burst_deg.to_radians();
    if !(per > 0.0) {
        return None;
    }
    let dir = if angle_rad >= 0.0 { BurstDirection::RotateLeft } else { BurstDirection::RotateRight };
    burst(dir, angle_rad.abs() / per)
}

/// Translation burst changing the forward speed by `dv`.
pub(crate) fn thrust(dv: f64, config: &BlimpConfig) -> Option<CommandBurst> {
    if !(config.burst_impulse_mps > 0.0) {
        return None;
    }
    let dir = if dv >= 0.0 { BurstDirection::Forward } else { BurstDirection::Backward };
    burst(dir, dv.abs() / config.burst_impulse_mps)
}

/// Cancels forward motion.
pub(crate) fn brake(state: &BlimpState, config: &BlimpConfig) -> Option<CommandBurst> {
    thrust(-state.forward_speed(), config)
}

/// Altitude hold on the down LiDAR: a smoothed height estimate drives a
/// bounded climb-rate target, tracked with up/down bursts.
#[derive(Debug, Clone, Default)]
pub(crate) struct AltitudeHold {
    estimate: Option<f64>,
}

impl AltitudeHold {
    const SMOOTHING: f64 = 0.3;
    const GAIN: f64 = 0.8;
    const MAX_RATE_MPS: f64 = 0.15;
    const DEADBAND_M: f64 = 0.04;

    /// Updates the estimate from a down reading over ground at `ground_m`.
    pub fn observe(&mut self, reading: LidarReading, ground_m: f64) -> Option<f64> {
        if let Some(d) = reading.distance() {
            let z = d + ground_m;
            self.estimate = Some(match self.estimate {
                Some(e) => e + Self::SMOOTHING * (z - e),
                None => z,
            });
        }
        self.estimate
    }

    pub fn estimate(&self) -> Option<f64> {
        self.estimate
    }

    pub fn command(&self, target_m: f64, state: &BlimpState, config: &BlimpConfig) -> Option<CommandBurst> {
        let z = self.estimate?;
        let err = target_m - z;
        let want = if err.abs() < Self::DEADBAND_M {
            0.0
        } else {
            (Self::GAIN * err).clamp(-Self::MAX_RATE_MPS, Self::MAX_RATE_MPS)
        };
        let dv = want - state.velocity_mps.z;
        if !(config.burst_impulse_mps > 0.0) {
            return None;
        }
        let dir = if dv >= 0.0 { BurstDirection::Up } else { BurstDirection::Down };
        burst(dir, dv.abs() / config.burst_impulse_mps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blimp::CraftKind;
    use crate::geometry::Vec3;
    use crate::world::{default7, generate_heap, preset};

    fn sim(scene: Scene, cfg: BlimpConfig) -> Sim {
        let state = BlimpState::at_rest(Vec3::new(0.5, 0.5, 1.2), 0.0, &cfg);
        Sim::new(scene, state, cfg, DriftModel::calm(), 3)
    }

    #[test]
    fn seeds_differ_per_tick_and_mount() {
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
    }

    #[test]
    fn burst_quantization() {
        let cfg = BlimpConfig::default();
        assert_eq!(rotate(90f64.to_radians(), &cfg), Some(CommandBurst::new(BurstDirection::RotateLeft, 1800)));
        assert_eq!(rotate(-1f64.to_radians(), &cfg), None);
        assert_eq!(thrust(-0.15, &cfg), Some(CommandBurst::nominal(BurstDirection::Backward)));
        assert_eq!(thrust(5.0, &cfg).unwrap().duration_ms, MAX_BURST_MS);
    }

    #[test]
    fn rotor_scatters_heap_but_blimp_does_not() {
        let heap = generate_heap(&default7(), (6, 6), 0.15).unwrap();
        let rotor = BlimpConfig { craft_kind: CraftKind::Rotor, ..Default::default() };
        let n = heap.evidence.len() as f64;
        let cx = heap.evidence.iter().map(|e| e.position_m.x).sum::<f64>() / n;
        let cy = heap.evidence.iter().map(|e| e.position_m.y).sum::<f64>() / n;
        let mut s = sim(heap.clone(), rotor);
        s.state.position_m = Vec3::new(cx, cy, 1.2);
        let (wind, events) = s.advance(&mut vec![]).unwrap();
        assert!((wind - 0.7).abs() < 1e-12);
        assert!(!events.is_empty());
        // a second pass does not move them again
        let (_, again) = s.advance(&mut vec![]).unwrap();
        assert!(again.is_empty());

        let mut b = sim(heap, BlimpConfig::default());
        let (wind, events) = b.advance(&mut vec![CommandBurst::nominal(BurstDirection::Forward)]).unwrap();
        assert!(wind < 0.5);
        assert!(events.is_empty());
    }

    #[test]
    fn altitude_hold_climbs_toward_target() {
        let scene = Scene::empty(preset("hint-empty").unwrap());
        let mut s = sim(scene, BlimpConfig::default());
        s.state.position_m = Vec3::new(5.0, 2.5, 0.8);
        let mut hold = AltitudeHold::default();
        for _ in 0..300 {
            let r = s.lidar(LidarMount::Down).reading;
            hold.observe(r, 0.0);
            let mut cmd: Vec<_> = hold.command(1.5, &s.state, &s.config).into_iter().collect();
            s.advance(&mut cmd).unwrap();
        }
        assert!((s.state.position_m.z - 1.5).abs() < 0.1, "{}", s.state.position_m.z);
    }
}
