use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::{footprint_block, Cell, EvidenceItem, EvidenceKind, FloorPlan, KindName, Scene, WorldError, DEFAULT_AMBIENT_C};
use crate::geometry::Vec2;

/// Rejected placements allowed per item before the item is skipped.
pub const MAX_PLACEMENT_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrimeType {
    Homicide,
    Assault,
    Burglary,
    Arson,
}

impl fmt::Display for CrimeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CrimeType::Homicide => "homicide",
            CrimeType::Assault => "assault",
            CrimeType::Burglary => "burglary",
            CrimeType::Arson => "arson",
        })
    }
}

impl FromStr for CrimeType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "homicide" => Ok(CrimeType::Homicide),
            "assault" => Ok(CrimeType::Assault),
            "burglary" => Ok(CrimeType::Burglary),
            "arson" => Ok(CrimeType::Arson),
            other => Err(format!("unknown crime type `{other}`")),
        }
    }
}

impl CrimeType {
    /// Default inclusion probabilities. These are placeholders that only
    /// need to be plausible; every entry can be overridden.
    pub fn default_probabilities(self) -> BTreeMap<KindName, f64> {
        use KindName::*;
        let sheets = |p: f64| {
            [(BloodSheetPassive, p), (BloodSheetActive, p), (BloodSheetTransfer, p)]
        };
        let mut m = BTreeMap::new();
        match self {
            CrimeType::Homicide => {
                m.insert(Body, 1.0);
                m.extend(sheets(0.9));
                m.insert(FirearmPhoto, 0.5);
                m.insert(KnifeLarge, 0.5);
                m.insert(KnifeSmall, 0.5);
            }
            CrimeType::Burglary => {
                m.insert(Tool, 0.8);
                m.insert(Shoes, 0.6);
                m.extend(sheets(0.1));
            }
            CrimeType::Arson => {
                m.insert(Accelerant, 0.9);
            }
            CrimeType::Assault => {
                m.extend(sheets(0.7));
                m.insert(KnifeLarge, 0.4);
                m.insert(KnifeSmall, 0.4);
            }
        }
        m
    }
}

/// Inputs of the random crime-scene generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrimeSceneSpec {
    pub crime_type: CrimeType,
    pub floor_plan: FloorPlan,
    pub probability_table: BTreeMap<KindName, f64>,
    /// Inclusive `[min, max]` item counts; kinds without an entry get `[1, 1]`.
    #[serde(default)]
    pub count_ranges: BTreeMap<KindName, (u32, u32)>,
    /// Kinds marked as handled (warm) at t = 0.
    #[serde(default)]
    pub touched: BTreeSet<KindName>,
    pub seed: u64,
}

impl CrimeSceneSpec {
    pub fn with_defaults(crime_type: CrimeType, floor_plan: FloorPlan, seed: u64) -> Self {
        Self {
            crime_type,
            floor_plan,
            probability_table: crime_type.default_probabilities(),
            count_ranges: BTreeMap::new(),
            touched: [KindName::KnifeLarge, KindName::KnifeSmall, KindName::Shoes]
                .into_iter()
                .collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        for (k, p) in &self.probability_table {
            if !(0.0..=1.0).contains(p) {
                return Err(WorldError::Generation(format!(
                    "probability for {k} is {p}, outside [0, 1]"
                )));
            }
        }
        for (k, (lo, hi)) in &self.count_ranges {
            if lo > hi {
                return Err(WorldError::Generation(format!("count range for {k} has min > max")));
            }
        }
        Ok(())
    }
}

/// The seven lab-trial objects, each present once, in the 4 m x 3 m lab.
pub fn lab_trial_spec(seed: u64) -> Result<CrimeSceneSpec, WorldError> {
    let mut spec = CrimeSceneSpec::with_defaults(CrimeType::Assault, super::preset("lab-4x3")?, seed);
    spec.probability_table = super::default7().into_iter().map(|k| (k.name, 1.0)).collect();
    Ok(spec)
}

/// Random crime scene: each kind is included with its probability, its count
/// is drawn from its range, and each item is dropped uniformly on the free
/// floor, retrying on overlap up to [`MAX_PLACEMENT_REJECTIONS`] times.
pub fn generate_scene(spec: &CrimeSceneSpec) -> Result<Scene, WorldError> {
    spec.validate()?;
    spec.floor_plan.validate()?;
    let plan = &spec.floor_plan;
    let free = plan.free_cells();
    if free.is_empty() {
        return Err(WorldError::Generation("floor plan has no free cells".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut occupied = vec![false; plan.width_cells * plan.height_cells];
    let mut evidence = Vec::new();
    let mut next_id = 0u32;

    for (name, &p) in &spec.probability_table {
        // always consume the draw so tables differing in one entry stay aligned
        let roll: f64 = rng.random();
        if roll >= p {
            continue;
        }
        let (lo, hi) = spec.count_ranges.get(name).copied().unwrap_or((1, 1));
        let count = rng.random_range(lo..=hi);
        let kind = EvidenceKind::standard(name.clone());
        for _ in 0..count {
            if let Some((pos, theta, block)) = place(plan, &free, &occupied, &kind, &mut rng) {
                mark(&mut occupied, plan, block);
                evidence.push(EvidenceItem {
                    id: next_id,
                    kind: kind.clone(),
                    position_m: pos,
                    orientation_rad: theta,
                    touched_at_s: spec.touched.contains(name).then_some(0.0),
                    displaced: false,
                });
                next_id += 1;
            }
        }
    }

    Ok(Scene {
        floor_plan: plan.clone(),
        evidence,
        ambient_temp_c: DEFAULT_AMBIENT_C,
        seed: spec.seed,
    })
}

type Block = (usize, usize, usize, usize);

fn place(
    plan: &FloorPlan,
    free: &[(usize, usize)],
    occupied: &[bool],
    kind: &EvidenceKind,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec2, f64, Block)> {
    let c = plan.cell_size_m;
    for _ in 0..MAX_PLACEMENT_REJECTIONS {
        let (i, j) = free[rng.random_range(0..free.len())];
        let pos = Vec2::new(
            (i as f64 + rng.random::<f64>()) * c,
            (j as f64 + rng.random::<f64>()) * c,
        );
        let theta = rng.random_range(0.0..2.0 * PI);
        let Some(block) = footprint_block(plan, pos, theta, kind.footprint_m) else {
            continue;
        };
        if block_is_clear(plan, occupied, block) {
            return Some((pos, theta, block));
        }
    }
    None
}

fn block_is_clear(plan: &FloorPlan, occupied: &[bool], (i0, j0, i1, j1): Block) -> bool {
    for j in j0..=j1 {
        for i in i0..=i1 {
            if plan.cell(i, j) != Cell::Free || occupied[plan.index(i, j)] {
                return false;
            }
        }
    }
    true
}

fn mark(occupied: &mut [bool], plan: &FloorPlan, (i0, j0, i1, j1): Block) {
    for j in j0..=j1 {
        for i in i0..=i1 {
            occupied[plan.index(i, j)] = true;
        }
    }
}
