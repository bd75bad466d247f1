use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EvidenceItem, FloorPlan, Scene, WorldError};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct SceneDocRef<'a> {
    schema_version: u32,
    floor_plan: &'a FloorPlan,
    evidence: &'a [EvidenceItem],
    ambient_temp_c: f64,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    #[allow(dead_code)]
    schema_version: u32,
    floor_plan: serde_json::Value,
    evidence: Vec<EvidenceItem>,
    ambient_temp_c: f64,
    seed: u64,
}

/// Serializes a scene as a versioned JSON document.
pub fn save_scene(scene: &Scene) -> String {
    let doc = SceneDocRef {
        schema_version: SCENE_SCHEMA_VERSION,
        floor_plan: &scene.floor_plan,
        evidence: &scene.evidence,
        ambient_temp_c: scene.ambient_temp_c,
        seed: scene.seed,
    };
    serde_json::to_string(&doc).expect("scene serialization is infallible")
}

/// Parses and validates a scene document.
pub fn load_scene(text: &str) -> Result<Scene, WorldError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| WorldError::Parse("missing schema_version".into()))?;
    if version != SCENE_SCHEMA_VERSION as u64 {
        return Err(WorldError::UnsupportedSchema(version as u32));
    }
    let doc: SceneDoc = serde_json::from_value(value).map_err(|e| WorldError::Parse(e.to_string()))?;
    let plan_doc = serde_json::from_value(doc.floor_plan).map_err(|e| WorldError::Parse(e.to_string()))?;
    let floor_plan = FloorPlan::from_doc(plan_doc)?;
    let scene = Scene {
        floor_plan,
        evidence: doc.evidence,
        ambient_temp_c: doc.ambient_temp_c,
        seed: doc.seed,
    };
    scene.validate()?;
    Ok(scene)
}

/// Hex SHA-256 of the canonical scene document.
pub fn scene_hash(scene: &Scene) -> String {
    let digest = Sha256::digest(save_scene(scene).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_scene, preset, CrimeSceneSpec, CrimeType};
    use proptest::prelude::*;

    fn scene(seed: u64) -> Scene {
        generate_scene(&CrimeSceneSpec::with_defaults(CrimeType::Homicide, preset("nfc-villa").unwrap(), seed))
            .unwrap()
    }

    #[test]
    fn identical_seeds_serialize_identically() {
        assert_eq!(save_scene(&scene(42)), save_scene(&scene(42)));
        assert_eq!(scene_hash(&scene(42)), scene_hash(&scene(42)));
        assert_ne!(scene_hash(&scene(42)), scene_hash(&scene(43)));
    }

    #[test]
    fn evidence_outside_bounds_names_item() {
        let mut s = scene(1);
        let id = s.evidence[0].id;
        s.evidence[0].position_m.x = 500.0;
        let text = save_scene(&s);
        match load_scene(&text) {
            Err(WorldError::Validation { item, .. }) => assert_eq!(item, Some(id)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_document_is_parse_error() {
        let text = save_scene(&scene(1));
        let cut = &text[..text.len() / 2];
        assert!(matches!(load_scene(cut), Err(WorldError::Parse(_))));
        assert!(matches!(load_scene(""), Err(WorldError::Parse(_))));
    }

    #[test]
    fn unknown_version_rejected() {
        let text = save_scene(&scene(1)).replacen("\"schema_version\":1", "\"schema_version\":7", 1);
        assert_eq!(load_scene(&text), Err(WorldError::UnsupportedSchema(7)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip_identity(seed in 0u64..10_000) {
            let s = scene(seed);
            prop_assert_eq!(load_scene(&save_scene(&s)).unwrap(), s);
        }
    }
}
