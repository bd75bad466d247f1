use std::collections::BTreeMap;

use csa_core::world::{
    default7, generate_heap, generate_scene, load_scene, preset, CrimeSceneSpec, CrimeType, KindName, Scene,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn default_grid() -> [usize; 2] {
    [6, 6]
}

fn default_heap_cell() -> f64 {
    0.15
}

/// Where a session's scene comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSource {
    Preset {
        name: String,
    },
    /// Random scene on a preset plan.
    Generate {
        crime: CrimeType,
        plan: String,
        #[serde(default)]
        seed: u64,
        /// Overrides the crime type's inclusion probabilities when present.
        #[serde(default)]
        probabilities: Option<BTreeMap<KindName, f64>>,
    },
    /// The seven lab-trial objects packed into one heap.
    Heap {
        #[serde(default = "default_grid")]
        grid: [usize; 2],
        #[serde(default = "default_heap_cell")]
        cell_m: f64,
    },
    /// A full scene document as written by `save_scene`.
    Inline {
        scene: Value,
    },
}

impl SceneSource {
    pub fn resolve(&self) -> Result<Scene, String> {
        match self {
            SceneSource::Preset { name } => preset(name).map(Scene::empty).map_err(|e| e.to_string()),
            SceneSource::Generate { crime, plan, seed, probabilities } => {
                let plan = preset(plan).map_err(|e| e.to_string())?;
                let mut spec = CrimeSceneSpec::with_defaults(*crime, plan, *seed);
                if let Some(p) = probabilities {
                    spec.probability_table = p.clone();
                }
                generate_scene(&spec).map_err(|e| e.to_string())
            }
            SceneSource::Heap { grid, cell_m } => {
                generate_heap(&default7(), (grid[0], grid[1]), *cell_m).map_err(|e| e.to_string())
            }
            SceneSource::Inline { scene } => load_scene(&scene.to_string()).map_err(|e| e.to_string()),
        }
    }
}
