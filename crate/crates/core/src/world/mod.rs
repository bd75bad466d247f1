//! Floor plans, procedural crime scenes, evidence state and ray casting.

mod evidence;
mod generate;
mod heap;
mod io;
mod plan;
mod raycast;
mod scatter;

pub use evidence::{default7, EvidenceItem, EvidenceKind, KindName, MassClass};
pub use generate::{generate_scene, lab_trial_spec, CrimeSceneSpec, CrimeType, MAX_PLACEMENT_REJECTIONS};
pub use heap::{generate_heap, heap_block_cells};
pub use io::{load_scene, save_scene, scene_hash, SCENE_SCHEMA_VERSION};
pub use plan::{preset, Cell, FloorPlan, Room, DEFAULT_CEILING_M, DEFAULT_CELL_SIZE_M, PRESET_NAMES};
pub use raycast::{raycast, raycast_plan, RayHit, Surface};
pub use scatter::{scatter_evidence, DEFAULT_SCATTER_THRESHOLD_MPS, MAX_SCATTER_OFFSET_M};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

pub const DEFAULT_AMBIENT_C: f64 = 21.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("scene generation failed: {0}")]
    Generation(String),
    #[error("cannot place `{item}`: {reason}")]
    Placement { item: String, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("malformed scene document: {0}")]
    Parse(String),
    #[error("unsupported scene schema version {0}")]
    UnsupportedSchema(u32),
    #[error("invalid scene{}: {reason}", item.map(|i| format!(" (evidence id {i})")).unwrap_or_default())]
    Validation { item: Option<u32>, reason: String },
    #[error("unknown floor plan preset `{0}`")]
    UnknownPreset(String),
}

/// A floor plan with placed evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub floor_plan: FloorPlan,
    pub evidence: Vec<EvidenceItem>,
    pub ambient_temp_c: f64,
    pub seed: u64,
}

impl Scene {
    pub fn empty(floor_plan: FloorPlan) -> Self {
        Self {
            floor_plan,
            evidence: Vec::new(),
            ambient_temp_c: DEFAULT_AMBIENT_C,
            seed: 0,
        }
    }

    pub fn item(&self, id: u32) -> Option<&EvidenceItem> {
        self.evidence.iter().find(|e| e.id == id)
    }

    /// Cells covered by the axis-aligned bounding box of an item's footprint.
    pub fn footprint_block(&self, item: &EvidenceItem) -> Option<(usize, usize, usize, usize)> {
        footprint_block(&self.floor_plan, item.position_m, item.orientation_rad, item.kind.footprint_m)
    }

    /// Checks the scene invariants. Evidence may rest under an obstacle
    /// (e.g. a table) but never inside a wall or outside the plan.
    pub fn validate(&self) -> Result<(), WorldError> {
        self.floor_plan.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.evidence {
            let bad = |reason: String| WorldError::Validation { item: Some(e.id), reason };
            if !seen.insert(e.id) {
                return Err(bad("duplicate evidence id".into()));
            }
            e.kind.validate().map_err(bad)?;
            if !self.floor_plan.extent().contains(e.position_m) {
                return Err(bad("position outside floor bounds".into()));
            }
            if self.floor_plan.is_wall(e.position_m) {
                return Err(bad("position inside a wall".into()));
            }
        }
        Ok(())
    }
}

/// Inclusive cell range `(i0, j0, i1, j1)` covering a rotated footprint.
pub(crate) fn footprint_block(
    plan: &FloorPlan,
    center: Vec2,
    orientation: f64,
    footprint: [f64; 2],
) -> Option<(usize, usize, usize, usize)> {
    let corners = crate::geometry::oriented_rect(center, orientation, footprint[0], footprint[1]);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for c in &corners {
        x0 = x0.min(c.x);
        y0 = y0.min(c.y);
        x1 = x1.max(c.x);
        y1 = y1.max(c.y);
    }
    let cs = plan.cell_size_m;
    let eps = 1e-9;
    if x0 < 0.0 || y0 < 0.0 {
        return None;
    }
    let i0 = (x0 / cs + eps).floor() as usize;
    let j0 = (y0 / cs + eps).floor() as usize;
    let i1 = ((x1 / cs - eps).floor().max(i0 as f64)) as usize;
    let j1 = ((y1 / cs - eps).floor().max(j0 as f64)) as usize;
    (i1 < plan.width_cells && j1 < plan.height_cells).then_some((i0, j0, i1, j1))
}
