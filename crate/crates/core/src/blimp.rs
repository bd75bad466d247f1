//! Craft physics: buoyancy arithmetic, burst actuation, drift, battery
//! endurance and the ground airflow model.
//!
//! The craft is a point mass moving in the world frame. Translation bursts
//! add an instantaneous velocity increment along the heading (or vertically),
//! rotation bursts turn the heading, and between bursts the velocity decays
//! exponentially with the drag coefficient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::geometry::{Vec2, Vec3};
use crate::world::{Cell, FloorPlan, Scene};

/// Nominal burst length; burst effects scale with `duration / 300 ms`.
pub const NOMINAL_BURST_MS: u32 = 300;
pub const MIN_BURST_MS: u32 = 50;
pub const MAX_BURST_MS: u32 = 2000;
/// Continuous current the power regulator can deliver.
pub const REGULATOR_LIMIT_MA: f64 = 1500.0;

/// Reference rotor downwash measurement: 0.7 m/s at 1.2 m.
const ROTOR_WIND_REF_MPS: f64 = 0.7;
const ROTOR_HEIGHT_REF_M: f64 = 1.2;
const ROTOR_WIND_MAX_MPS: f64 = 3.0;
/// Small propeller wash of a buoyant craft mid-burst, referenced at 0.2 m.
const BUOYANT_BURST_WIND_MPS: f64 = 0.05;
const BUOYANT_BURST_HEIGHT_REF_M: f64 = 0.2;

const COLLISION_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlimpError {
    #[error("battery exhausted")]
    BatteryExhausted,
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CraftKind {
    Buoyant,
    Rotor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerComponent {
    pub name: String,
    pub current_ma: f64,
}

/// Battery capacity plus the continuous loads that drain it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub capacity_mah: f64,
    /// Usable fraction of the nominal capacity (empirical).
    pub derating: f64,
    pub components: Vec<PowerComponent>,
}

impl Default for PowerBudget {
    fn default() -> Self {
        let c = |name: &str, current_ma: f64| PowerComponent { name: name.into(), current_ma };
        Self {
            capacity_mah: 1000.0,
            derating: 0.29,
            components: vec![
                c("minicomputer", 460.0),
                c("camera", 310.0),
                c("lidar x3", 210.0),
                c("thermal", 20.0),
            ],
        }
    }
}

impl PowerBudget {
    pub fn total_current_ma(&self) -> f64 {
        self.components.iter().map(|c| c.current_ma).sum()
    }

    pub fn validate(&self) -> Result<(), BlimpError> {
        if !(self.capacity_mah >= 0.0) {
            return Err(BlimpError::Config("battery capacity must be non-negative".into()));
        }
        if !(self.derating > 0.0 && self.derating <= 1.0) {
            return Err(BlimpError::Config("derating must lie in (0, 1]".into()));
        }
        if self.components.iter().any(|c| !(c.current_ma >= 0.0)) {
            return Err(BlimpError::Config("component currents must be non-negative".into()));
        }
        if self.total_current_ma() > REGULATOR_LIMIT_MA {
            return Err(BlimpError::Config(format!(
                "total current {} mA exceeds the {} mA regulator limit",
                self.total_current_ma(),
                REGULATOR_LIMIT_MA
            )));
        }
        Ok(())
    }

    pub fn fresh_battery(&self) -> BatteryState {
        BatteryState {
            capacity_mah: self.capacity_mah,
            derating: self.derating,
            drawn_mah: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub capacity_mah: f64,
    pub derating: f64,
    pub drawn_mah: f64,
}

impl BatteryState {
    pub fn usable_mah(&self) -> f64 {
        self.capacity_mah * self.derating
    }

    pub fn remaining_mah(&self) -> f64 {
        (self.usable_mah() - self.drawn_mah).max(0.0)
    }

    pub fn is_exhausted(&self) -> bool {
        self.drawn_mah >= self.usable_mah()
    }

    /// Draws charge, saturating at the usable capacity.
    pub fn draw(&mut self, mah: f64) {
        self.drawn_mah = (self.drawn_mah + mah.max(0.0)).min(self.usable_mah());
    }
}

/// Minutes of operation: usable capacity over total current.
pub fn endurance_minutes(budget: &PowerBudget) -> Result<f64, BlimpError> {
    let current = budget.total_current_ma();
    if !(current > 0.0) {
        return Err(BlimpError::Domain("total current must be positive".into()));
    }
    Ok(budget.capacity_mah * budget.derating / current * 60.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlimpConfig {
    pub helium_density_kgm3: f64,
    pub air_density_kgm3: f64,
    pub lift_per_m3_kg: f64,
    pub envelope_volume_m3: f64,
    pub payload_mass_kg: f64,
    pub burst_impulse_mps: f64,
    pub rotation_per_burst_deg: f64,
    pub drag_coefficient_per_s: f64,
    pub max_speed_mps: f64,
    pub craft_kind: CraftKind,
    /// Actuator charge per nominal burst (150 mAh per 1000 bursts).
    pub burst_charge_mah: f64,
    pub power: PowerBudget,
}

impl Default for BlimpConfig {
    fn default() -> Self {
        // three ~0.072 m^3 balloons, trimmed to neutral buoyancy
        let volume = 3.0 * 0.072;
        Self {
            helium_density_kgm3: 0.18,
            air_density_kgm3: 1.29,
            lift_per_m3_kg: 1.11,
            envelope_volume_m3: volume,
            payload_mass_kg: volume * 1.11,
            burst_impulse_mps: 0.15,
            rotation_per_burst_deg: 15.0,
            drag_coefficient_per_s: 0.8,
            max_speed_mps: 0.5,
            craft_kind: CraftKind::Buoyant,
            burst_charge_mah: 0.15,
            power: PowerBudget::default(),
        }
    }
}

impl BlimpConfig {
    pub fn validate(&self) -> Result<(), BlimpError> {
        let non_neg = [
            ("helium_density_kgm3", self.helium_density_kgm3),
            ("air_density_kgm3", self.air_density_kgm3),
            ("lift_per_m3_kg", self.lift_per_m3_kg),
            ("envelope_volume_m3", self.envelope_volume_m3),
            ("payload_mass_kg", self.payload_mass_kg),
            ("burst_impulse_mps", self.burst_impulse_mps),
            ("drag_coefficient_per_s", self.drag_coefficient_per_s),
            ("burst_charge_mah", self.burst_charge_mah),
        ];
        for (name, v) in non_neg {
            if !(v >= 0.0) {
                return Err(BlimpError::Config(format!("{name} must be non-negative")));
            }
        }
        if !(self.max_speed_mps > 0.0) {
            return Err(BlimpError::Config("max_speed_mps must be positive".into()));
        }
        if (self.lift_per_m3_kg - (self.air_density_kgm3 - self.helium_density_kgm3)).abs() > 0.05 {
            return Err(BlimpError::Config(
                "lift_per_m3_kg must match air minus helium density within 0.05".into(),
            ));
        }
        self.power.validate()
    }
}

/// Net lift in kilograms: positive climbs, negative sinks.
pub fn net_lift(config: &BlimpConfig) -> f64 {
    config.envelope_volume_m3 * config.lift_per_m3_kg - config.payload_mass_kg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlimpState {
    pub position_m: Vec3,
    pub heading_rad: f64,
    pub velocity_mps: Vec3,
    pub time_s: f64,
    pub battery: BatteryState,
}

impl BlimpState {
    pub fn at_rest(position_m: Vec3, heading_rad: f64, config: &BlimpConfig) -> Self {
        Self {
            position_m,
            heading_rad,
            velocity_mps: Vec3::default(),
            time_s: 0.0,
            battery: config.power.fresh_battery(),
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity_mps.norm()
    }

    /// Velocity component along the heading.
    pub fn forward_speed(&self) -> f64 {
        Vec2::from_angle(self.heading_rad).dot(self.velocity_mps.xy())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurstDirection {
    Forward,
    Backward,
    Up,
    Down,
    RotateLeft,
    RotateRight,
}

impl BurstDirection {
    pub const ALL: [BurstDirection; 6] = [
        BurstDirection::Forward,
        BurstDirection::Backward,
        BurstDirection::Up,
        BurstDirection::Down,
        BurstDirection::RotateLeft,
        BurstDirection::RotateRight,
    ];

    pub fn is_rotation(self) -> bool {
        matches!(self, BurstDirection::RotateLeft | BurstDirection::RotateRight)
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, BurstDirection::Up | BurstDirection::Down)
    }
}

impl fmt::Display for BurstDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BurstDirection::Forward => "forward",
            BurstDirection::Backward => "backward",
            BurstDirection::Up => "up",
            BurstDirection::Down => "down",
            BurstDirection::RotateLeft => "rotate_left",
            BurstDirection::RotateRight => "rotate_right",
        })
    }
}

impl FromStr for BurstDirection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        BurstDirection::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .ok_or_else(|| "unknown direction".to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandBurst {
    pub direction: BurstDirection,
    pub duration_ms: u32,
}

impl CommandBurst {
    pub fn new(direction: BurstDirection, duration_ms: u32) -> Self {
        Self { direction, duration_ms }
    }

    pub fn nominal(direction: BurstDirection) -> Self {
        Self::new(direction, NOMINAL_BURST_MS)
    }

    pub fn validate(&self) -> Result<(), BlimpError> {
        if !(MIN_BURST_MS..=MAX_BURST_MS).contains(&self.duration_ms) {
            return Err(BlimpError::InvalidCommand(format!(
                "burst duration {} ms outside [{MIN_BURST_MS}, {MAX_BURST_MS}]",
                self.duration_ms
            )));
        }
        Ok(())
    }

    /// Strength relative to a nominal burst.
    pub fn scale(&self) -> f64 {
        self.duration_ms as f64 / NOMINAL_BURST_MS as f64
    }
}

/// Applies one burst instantaneously.
pub fn apply_burst(state: &BlimpState, cmd: CommandBurst, config: &BlimpConfig) -> Result<BlimpState, BlimpError> {
    cmd.validate()?;
    if state.battery.is_exhausted() {
        return Err(BlimpError::BatteryExhausted);
    }
    let mut next = *state;
    let dv = config.burst_impulse_mps * cmd.scale();
    let dtheta = config.rotation_per_burst_deg.to_radians() * cmd.scale();
    let ahead = Vec2::from_angle(state.heading_rad);
    let v = &mut next.velocity_mps;
    match cmd.direction {
        BurstDirection::Forward => {
            v.x += ahead.x * dv;
            v.y += ahead.y * dv;
        }
        BurstDirection::Backward => {
            v.x -= ahead.x * dv;
            v.y -= ahead.y * dv;
        }
        BurstDirection::Up => v.z += dv,
        BurstDirection::Down => v.z -= dv,
        BurstDirection::RotateLeft => next.heading_rad += dtheta,
        BurstDirection::RotateRight => next.heading_rad -= dtheta,
    }
    next.heading_rad = crate::geometry::wrap_angle(next.heading_rad);
    next.velocity_mps = cap_speed(next.velocity_mps, config.max_speed_mps);
    next.battery.draw(config.burst_charge_mah * cmd.scale());
    Ok(next)
}

fn cap_speed(v: Vec3, max: f64) -> Vec3 {
    let s = v.norm();
    if s > max {
        v.scale(max / s)
    } else {
        v
    }
}

/// Seeded horizontal gusts ("drafts") injected at a fixed interval, plus a
/// per-flight thrust imbalance that yaws the craft on every translation burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    pub seed: u64,
    pub gust_sigma_mps: f64,
    pub gust_interval_s: f64,
    /// Spread of the per-flight yaw per nominal translation burst.
    #[serde(default)]
    pub imbalance_sigma_deg: f64,
}

impl Default for DriftModel {
    fn default() -> Self {
        Self { seed: 0, gust_sigma_mps: 0.05, gust_interval_s: 2.0, imbalance_sigma_deg: DEFAULT_IMBALANCE_SIGMA_DEG }
    }
}

/// Yaw spread giving open-loop runs a veer of a few degrees per burst.
pub const DEFAULT_IMBALANCE_SIGMA_DEG: f64 = 2.0;

impl DriftModel {
    pub fn calm() -> Self {
        Self { gust_sigma_mps: 0.0, imbalance_sigma_deg: 0.0, ..Self::default() }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    /// Velocity kick of gust number `k`; a pure function of `(seed, k)`.
    pub fn gust(&self, k: u64) -> Vec3 {
        if !(self.gust_sigma_mps > 0.0) {
            return Vec3::default();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0xA24B_AED4_963E_E407) ^ k);
        let n = Normal::new(0.0, self.gust_sigma_mps).expect("sigma checked positive");
        Vec3::new(n.sample(&mut rng), n.sample(&mut rng), 0.25 * n.sample(&mut rng))
    }

    /// Heading change (rad, positive = left) caused by one nominal
    /// translation burst. Fixed for a given seed.
    pub fn imbalance_yaw_rad(&self) -> f64 {
        if !(self.imbalance_sigma_deg > 0.0) {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5EED_1B1A_CE00_0001);
        let n = Normal::new(0.0, self.imbalance_sigma_deg).expect("sigma checked positive");
        n.sample(&mut rng).to_radians()
    }
}

/// [`apply_burst`] followed by the imbalance yaw of translation bursts.
pub fn apply_burst_disturbed(
    state: &BlimpState,
    cmd: CommandBurst,
    config: &BlimpConfig,
    drift: &DriftModel,
) -> Result<BlimpState, BlimpError> {
    let mut next = apply_burst(state, cmd, config)?;
    if matches!(cmd.direction, BurstDirection::Forward | BurstDirection::Backward) {
        next.heading_rad = crate::geometry::wrap_angle(next.heading_rad + drift.imbalance_yaw_rad() * cmd.scale());
    }
    Ok(next)
}

/// Advances the craft by `dt_s`: gusts due in `(t, t + dt]`, explicit
/// position update with collision clamping, exponential velocity decay, and
/// continuous battery draw for the powered components.
pub fn step(state: &BlimpState, dt_s: f64, drift: &DriftModel, scene: &Scene, config: &BlimpConfig) -> BlimpState {
    let dt = dt_s.clamp(1e-6, 0.5);
    let mut next = *state;
    let t0 = state.time_s;
    let t1 = t0 + dt;

    if drift.gust_interval_s > 0.0 {
        let k0 = (t0 / drift.gust_interval_s).floor() as u64;
        let k1 = (t1 / drift.gust_interval_s).floor() as u64;
        for k in k0 + 1..=k1 {
            let g = drift.gust(k);
            next.velocity_mps.x += g.x;
            next.velocity_mps.y += g.y;
            next.velocity_mps.z += g.z;
        }
        next.velocity_mps = cap_speed(next.velocity_mps, config.max_speed_mps);
    }

    move_with_collisions(&mut next, dt, &scene.floor_plan);

    next.velocity_mps = next.velocity_mps.scale((-config.drag_coefficient_per_s * dt).exp());
    next.velocity_mps = cap_speed(next.velocity_mps, config.max_speed_mps);
    next.time_s = t1;
    next.battery.draw(config.power.total_current_ma() * dt / 3600.0);
    next
}

fn move_with_collisions(s: &mut BlimpState, dt: f64, plan: &FloorPlan) {
    let c = plan.cell_size_m;
    let ceiling = plan.ceiling_height_m;

    // x then y: sweep cell boundaries between the old and new coordinate
    for axis in 0..2 {
        let (pos, vel) = if axis == 0 {
            (s.position_m.x, s.velocity_mps.x)
        } else {
            (s.position_m.y, s.velocity_mps.y)
        };
        let target = pos + vel * dt;
        let probe = |coord: f64| {
            let p = if axis == 0 {
                Vec2::new(coord, s.position_m.y)
            } else {
                Vec2::new(s.position_m.x, coord)
            };
            plan.is_solid(p, s.position_m.z)
        };
        let mut resolved = target;
        let mut hit = false;
        if vel > 0.0 {
            let mut edge = ((pos / c).floor() + 1.0) * c;
            while edge <= target {
                if probe(edge + 0.5 * COLLISION_EPS) {
                    resolved = edge - COLLISION_EPS;
                    hit = true;
                    break;
                }
                edge += c;
            }
        } else if vel < 0.0 {
            let mut edge = (pos / c).floor() * c;
            while edge >= target {
                if probe(edge - 0.5 * COLLISION_EPS) {
                    resolved = edge + COLLISION_EPS;
                    hit = true;
                    break;
                }
                edge -= c;
            }
        }
        if axis == 0 {
            s.position_m.x = resolved;
            if hit {
                s.velocity_mps.x = 0.0;
            }
        } else {
            s.position_m.y = resolved;
            if hit {
                s.velocity_mps.y = 0.0;
            }
        }
    }

    let floor = match plan.cell_at(s.position_m.xy()) {
        Some(Cell::Obstacle { height_m }) => height_m,
        _ => 0.0,
    };
    let z = s.position_m.z + s.velocity_mps.z * dt;
    if z < floor {
        s.position_m.z = floor;
        s.velocity_mps.z = 0.0;
    } else if z > ceiling {
        s.position_m.z = ceiling;
        s.velocity_mps.z = 0.0;
    } else {
        s.position_m.z = z;
    }
}

/// Ground-level wind speed under the craft.
///
/// Rotor craft follow a 1/h law anchored at 0.7 m/s at 1.2 m. A buoyant
/// craft coasting with its propellers off produces none; mid-burst its
/// small propellers give a negligible 0.05 m/s referenced at 0.2 m.
pub fn downwash_at_ground(config: &BlimpConfig, height_m: f64, thrust_active: bool) -> Result<f64, BlimpError> {
    if !(height_m > 0.0) {
        return Err(BlimpError::Domain(format!("height must be positive, got {height_m}")));
    }
    Ok(match config.craft_kind {
        CraftKind::Rotor => {
            (ROTOR_WIND_REF_MPS * ROTOR_HEIGHT_REF_M / height_m).clamp(0.0, ROTOR_WIND_MAX_MPS)
        }
        CraftKind::Buoyant if thrust_active => {
            (BUOYANT_BURST_WIND_MPS * BUOYANT_BURST_HEIGHT_REF_M / height_m).clamp(0.0, ROTOR_WIND_MAX_MPS)
        }
        CraftKind::Buoyant => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::preset;
    use proptest::prelude::*;

    fn room() -> Scene {
        Scene::empty(preset("hint-empty").unwrap())
    }

    #[test]
    fn lift_of_one_cubic_meter() {
        let cfg = BlimpConfig { envelope_volume_m3: 1.0, payload_mass_kg: 0.0, ..Default::default() };
        assert_eq!(net_lift(&cfg), 1.11);
        let empty = BlimpConfig { envelope_volume_m3: 0.0, payload_mass_kg: 0.0, ..Default::default() };
        assert_eq!(net_lift(&empty), 0.0);
        let balloon = BlimpConfig { envelope_volume_m3: 0.072, payload_mass_kg: 0.0, ..Default::default() };
        assert!((net_lift(&balloon) - 0.07992).abs() < 1e-12);
    }

    #[test]
    fn default_config_is_neutral_and_valid() {
        let cfg = BlimpConfig::default();
        cfg.validate().unwrap();
        assert!(net_lift(&cfg).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_densities_rejected() {
        let cfg = BlimpConfig { lift_per_m3_kg: 2.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn endurance_arithmetic() {
        let mut b = PowerBudget::default();
        assert_eq!(b.total_current_ma(), 1000.0);
        assert!((endurance_minutes(&b).unwrap() - 17.4).abs() < 1e-9);
        b.derating = 1.0;
        assert!((endurance_minutes(&b).unwrap() - 60.0).abs() < 1e-9);
        let full = endurance_minutes(&b).unwrap();
        b.capacity_mah = 700.0;
        assert!((endurance_minutes(&b).unwrap() - 0.7 * full).abs() < 1e-9);
        b.components.clear();
        assert!(endurance_minutes(&b).is_err());
    }

    #[test]
    fn regulator_limit_enforced() {
        let mut b = PowerBudget::default();
        b.components.push(PowerComponent { name: "heater".into(), current_ma: 600.0 });
        assert!(b.validate().is_err());
    }

    #[test]
    fn forward_burst_from_rest() {
        let cfg = BlimpConfig::default();
        let s = BlimpState::at_rest(Vec3::new(1.0, 1.0, 1.5), 0.0, &cfg);
        let n = apply_burst(&s, CommandBurst::nominal(BurstDirection::Forward), &cfg).unwrap();
        assert!((n.velocity_mps.x - 0.15).abs() < 1e-12);
        assert!(n.velocity_mps.y.abs() < 1e-12 && n.velocity_mps.z == 0.0);
        assert!(n.battery.drawn_mah > s.battery.drawn_mah);
    }

    #[test]
    fn rotate_left_fifteen_degrees() {
        let cfg = BlimpConfig::default();
        let mut s = BlimpState::at_rest(Vec3::new(1.0, 1.0, 1.5), 0.0, &cfg);
        s.velocity_mps = Vec3::new(0.1, 0.0, 0.0);
        let n = apply_burst(&s, CommandBurst::nominal(BurstDirection::RotateLeft), &cfg).unwrap();
        assert!((n.heading_rad - 15f64.to_radians()).abs() < 1e-12);
        assert_eq!(n.velocity_mps, s.velocity_mps);
    }

    #[test]
    fn exhausted_battery_rejects_burst() {
        let cfg = BlimpConfig::default();
        let mut s = BlimpState::at_rest(Vec3::new(1.0, 1.0, 1.5), 0.0, &cfg);
        s.battery.drawn_mah = s.battery.usable_mah();
        assert_eq!(
            apply_burst(&s, CommandBurst::nominal(BurstDirection::Up), &cfg),
            Err(BlimpError::BatteryExhausted)
        );
    }

    #[test]
    fn burst_duration_bounds() {
        let cfg = BlimpConfig::default();
        let s = BlimpState::at_rest(Vec3::new(1.0, 1.0, 1.5), 0.0, &cfg);
        assert!(apply_burst(&s, CommandBurst::new(BurstDirection::Up, 10), &cfg).is_err());
        assert!(apply_burst(&s, CommandBurst::new(BurstDirection::Up, 5000), &cfg).is_err());
    }

    #[test]
    fn direction_names() {
        assert_eq!("rotate_left".parse::<BurstDirection>(), Ok(BurstDirection::RotateLeft));
        assert_eq!("sideways".parse::<BurstDirection>(), Err("unknown direction".into()));
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let cfg = BlimpConfig::default();
        let s = BlimpState::at_rest(Vec3::new(2.0, 2.0, 1.5), 0.3, &cfg);
        let n = step(&s, 0.5, &DriftModel::calm(), &room(), &cfg);
        assert_eq!(n.position_m, s.position_m);
        assert_eq!(n.velocity_mps, s.velocity_mps);
    }

    #[test]
    fn exponential_decay_over_one_second() {
        let cfg = BlimpConfig::default();
        let mut s = BlimpState::at_rest(Vec3::new(2.0, 2.0, 1.5), 0.0, &cfg);
        s.velocity_mps = Vec3::new(0.15, 0.0, 0.0);
        // two half-second steps compose to exp(-0.8)
        let n = step(&step(&s, 0.5, &DriftModel::calm(), &room(), &cfg), 0.5, &DriftModel::calm(), &room(), &cfg);
        assert!((n.speed() - 0.15 * (-0.8f64).exp()).abs() < 1e-12);
        assert!((0.15 * (-0.8f64).exp() - 0.0674).abs() < 1e-4);
    }

    #[test]
    fn wall_stops_the_craft() {
        let cfg = BlimpConfig::default();
        // east wall face at x = 10.05
        let mut s = BlimpState::at_rest(Vec3::new(9.95, 2.0, 1.5), 0.0, &cfg);
        s.velocity_mps = Vec3::new(0.15, 0.0, 0.0);
        let mut t = s;
        for _ in 0..2 {
            t = step(&t, 0.5, &DriftModel::calm(), &room(), &cfg);
        }
        assert!(t.position_m.x < 10.05 && t.position_m.x > 10.05 - 1e-3);
        assert_eq!(t.velocity_mps.x, 0.0);
    }

    #[test]
    fn floor_and_ceiling_clamp() {
        let cfg = BlimpConfig::default();
        let mut s = BlimpState::at_rest(Vec3::new(2.0, 2.0, 0.05), 0.0, &cfg);
        s.velocity_mps = Vec3::new(0.0, 0.0, -0.4);
        let n = step(&s, 0.5, &DriftModel::calm(), &room(), &cfg);
        assert_eq!(n.position_m.z, 0.0);
        s.position_m.z = 2.45;
        s.velocity_mps.z = 0.4;
        let n = step(&s, 0.5, &DriftModel::calm(), &room(), &cfg);
        assert_eq!(n.position_m.z, 2.5);
    }

    #[test]
    fn downwash_reference_points() {
        let blimp = BlimpConfig::default();
        let drone = BlimpConfig { craft_kind: CraftKind::Rotor, ..Default::default() };
        assert_eq!(downwash_at_ground(&blimp, 0.2, false).unwrap(), 0.0);
        assert!((downwash_at_ground(&drone, 1.2, true).unwrap() - 0.7).abs() < 1e-12);
        assert!((downwash_at_ground(&blimp, 0.2, true).unwrap() - 0.05).abs() < 1e-12);
        assert!(downwash_at_ground(&blimp, 0.0, false).is_err());
        assert_eq!(downwash_at_ground(&drone, 0.01, true).unwrap(), 3.0);
    }

    #[test]
    fn gusts_are_deterministic() {
        let d = DriftModel::with_seed(11);
        assert_eq!(d.gust(3), d.gust(3));
        assert_ne!(d.gust(3), d.gust(4));
        assert_eq!(DriftModel::calm().gust(3), Vec3::default());
    }

    proptest! {
        #[test]
        fn rotor_downwash_decreases_with_height(h in 0.3f64..10.0, dh in 0.01f64..2.0) {
            let drone = BlimpConfig { craft_kind: CraftKind::Rotor, ..Default::default() };
            let lo = downwash_at_ground(&drone, h, true).unwrap();
            let hi = downwash_at_ground(&drone, h + dh, true).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn lift_is_affine(v in 0.0f64..5.0, m in 0.0f64..3.0, k in 0.0f64..4.0) {
            let base = BlimpConfig { envelope_volume_m3: v, payload_mass_kg: m, ..Default::default() };
            let scaled = BlimpConfig { envelope_volume_m3: k * v, payload_mass_kg: m, ..Default::default() };
            prop_assert!((net_lift(&scaled) + m - k * (net_lift(&base) + m)).abs() < 1e-9);
        }

        #[test]
        fn endurance_scales(cap in 1.0f64..5000.0, cur in 1.0f64..700.0) {
            let b = PowerBudget {
                capacity_mah: cap,
                derating: 0.5,
                components: vec![PowerComponent { name: "x".into(), current_ma: cur }],
            };
            let e = endurance_minutes(&b).unwrap();
            let mut b2 = b.clone();
            b2.capacity_mah *= 2.0;
            prop_assert!((endurance_minutes(&b2).unwrap() - 2.0 * e).abs() < 1e-9 * e.max(1.0));
            let mut b3 = b.clone();
            b3.components[0].current_ma *= 2.0;
            prop_assert!((endurance_minutes(&b3).unwrap() - 0.5 * e).abs() < 1e-9 * e.max(1.0));
        }

        #[test]
        fn speed_cap_and_battery_monotone(
            seed in 0u64..1000,
            cmds in proptest::collection::vec((0usize..6, 50u32..2000), 1..40),
        ) {
            let cfg = BlimpConfig::default();
            let scene = room();
            let drift = DriftModel { seed, gust_sigma_mps: 0.2, gust_interval_s: 0.5, imbalance_sigma_deg: 0.0 };
            let mut s = BlimpState::at_rest(Vec3::new(5.0, 2.5, 1.2), 0.0, &cfg);
            let mut drawn = s.battery.drawn_mah;
            for (d, ms) in cmds {
                if let Ok(n) = apply_burst(&s, CommandBurst::new(BurstDirection::ALL[d], ms), &cfg) {
                    s = n;
                }
                prop_assert!(s.speed() <= cfg.max_speed_mps + 1e-12);
                s = step(&s, 0.3, &drift, &scene, &cfg);
                prop_assert!(s.speed() <= cfg.max_speed_mps + 1e-12);
                prop_assert!(s.battery.drawn_mah >= drawn);
                prop_assert!(s.battery.drawn_mah <= s.battery.capacity_mah);
                drawn = s.battery.drawn_mah;
                prop_assert!(!scene.floor_plan.is_solid(s.position_m.xy(), s.position_m.z));
            }
        }

        #[test]
        fn drift_trajectories_repeat(seed in 0u64..1000) {
            let cfg = BlimpConfig::default();
            let scene = room();
            let drift = DriftModel::with_seed(seed);
            let run = || {
                let mut s = BlimpState::at_rest(Vec3::new(5.0, 2.5, 1.2), 0.0, &cfg);
                for _ in 0..100 {
                    s = step(&s, 0.1, &drift, &scene, &cfg);
                }
                s
            };
            prop_assert_eq!(run(), run());
        }
    }
}
