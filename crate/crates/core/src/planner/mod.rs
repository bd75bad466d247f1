//! Coverage planners, the burst-level executor that flies them, and the
//! metrics computed from the resulting run logs.

mod coverage;
mod execute;
mod metrics;
mod route;
mod runlog;
mod sim;
mod wallfollow;

pub use coverage::{
    nearest_neighbor_order, plan_random_walk, plan_snake, plan_spiral, plan_two_phase, tour_length,
    DEFAULT_EDGE_MARGIN_M,
};
pub use execute::{detections_from, execute_path, execute_path_with, ExecConfig, DETECTION_MERGE_M};
pub use metrics::{
    aggregate, compute_metrics, format_comparison_table, AggregateMetrics, CoverageMap, FieldStats, PlanMetrics,
    TURN_MIN_NET_DEG,
};
pub use route::{Occupancy, CRAFT_RADIUS_M, OBSTACLE_CLEARANCE_M};
pub use runlog::{
    replay_metrics, verify_log, RunEvent, RunHeader, RunLog, RunRecord, RUNLOG_SCHEMA_VERSION,
};
pub use sim::{mix_seed, Sim};
pub use wallfollow::{plan_wall_follow, wall_start, WallFollowConfig, WallFollowOutcome, WallSide};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::blimp::BlimpError;
use crate::geometry::{Vec2, Vec3};
use crate::sensors::SensorError;
use crate::world::FloorPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("infeasible plan: {0}")]
    Infeasible(String),
    #[error("invalid planner parameter: {0}")]
    Config(String),
    #[error(transparent)]
    Blimp(#[from] BlimpError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("run log line {line}: {reason}")]
    Log { line: usize, reason: String },
    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Transit,
    Capture,
    Revisit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position_m: Vec3,
    pub heading_rad: f64,
    #[serde(default)]
    pub dwell_s: f64,
    pub action: Action,
}

impl Waypoint {
    pub fn new(xy: Vec2, z: f64, heading_rad: f64, action: Action) -> Self {
        Self { position_m: Vec3::new(xy.x, xy.y, z), heading_rad, dwell_s: 0.0, action }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub planner: String,
    pub params: BTreeMap<String, f64>,
    pub waypoints: Vec<Waypoint>,
}

impl Path {
    pub fn new(planner: &str) -> Self {
        Self { planner: planner.to_string(), params: BTreeMap::new(), waypoints: Vec::new() }
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    /// Total 3-D polyline length.
    pub fn length_m(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].position_m, w[1].position_m);
                Vec3::new(b.x - a.x, b.y - a.y, b.z - a.z).norm()
            })
            .sum()
    }

    pub fn count(&self, action: Action) -> usize {
        self.waypoints.iter().filter(|w| w.action == action).count()
    }

    /// Every waypoint lies in free space at its altitude and consecutive
    /// waypoints see each other along a straight segment.
    pub fn validate(&self, plan: &FloorPlan) -> Result<(), PlannerError> {
        let mut grids: Vec<(u64, Occupancy)> = Vec::new();
        let mut grid_at = |z: f64| -> Occupancy {
            if let Some((_, g)) = grids.iter().find(|(bits, _)| *bits == z.to_bits()) {
                return g.clone();
            }
            let g = Occupancy::new(plan, z, 0.0);
            grids.push((z.to_bits(), g.clone()));
            g
        };
        for (k, w) in self.waypoints.iter().enumerate() {
            let z = w.position_m.z;
            if !(z > 0.0 && z < plan.ceiling_height_m) {
                return Err(PlannerError::Infeasible(format!("waypoint {k} altitude {z} outside (0, ceiling)")));
            }
            if !grid_at(z).is_free(w.position_m.xy()) {
                return Err(PlannerError::Infeasible(format!("waypoint {k} is not in free space")));
            }
        }
        for (k, pair) in self.waypoints.windows(2).enumerate() {
            let z = pair[0].position_m.z.min(pair[1].position_m.z);
            if !grid_at(z).line_of_sight(pair[0].position_m.xy(), pair[1].position_m.xy()) {
                return Err(PlannerError::Infeasible(format!("segment {k} -> {} is obstructed", k + 1)));
            }
        }
        Ok(())
    }
}
