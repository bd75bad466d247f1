use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use super::{MassClass, Scene};
use crate::geometry::{Rect, Vec2};

/// Ground wind above which light paper evidence moves.
pub const DEFAULT_SCATTER_THRESHOLD_MPS: f64 = 0.5;
pub const MAX_SCATTER_OFFSET_M: f64 = 0.5;

/// Displaces every light, scatterable item inside `area` when the ground
/// wind exceeds [`DEFAULT_SCATTER_THRESHOLD_MPS`]. Offsets are seeded by the
/// scene seed, the item id and its current position, so the result is a
/// pure function of the inputs.
pub fn scatter_evidence(scene: &Scene, wind_speed_mps: f64, area: Rect) -> Scene {
    scatter_with_threshold(scene, wind_speed_mps, area, DEFAULT_SCATTER_THRESHOLD_MPS)
}

pub(crate) fn scatter_with_threshold(scene: &Scene, wind_speed_mps: f64, area: Rect, threshold: f64) -> Scene {
    let mut out = scene.clone();
    if !(wind_speed_mps > threshold) {
        return out;
    }
    let plan = &scene.floor_plan;
    for item in out.evidence.iter_mut() {
        if !(item.kind.scatterable && item.kind.mass_class == MassClass::Light) {
            continue;
        }
        if !area.contains(item.position_m) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(
            scene.seed
                ^ (item.id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
                ^ item.position_m.x.to_bits().rotate_left(17)
                ^ item.position_m.y.to_bits().rotate_left(41),
        );
        item.displaced = true;
        for _ in 0..8 {
            let r = MAX_SCATTER_OFFSET_M * rng.random::<f64>();
            let theta = rng.random_range(0.0..2.0 * PI);
            let p = item.position_m + Vec2::from_angle(theta) * r;
            if plan.extent().contains(p) && !plan.is_wall(p) {
                item.position_m = p;
                break;
            }
        }
        item.orientation_rad = rng.random_range(0.0..2.0 * PI);
    }
    out
}
