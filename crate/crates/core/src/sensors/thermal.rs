use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SensorError;
use crate::blimp::BlimpState;
use crate::geometry::{point_in_polygon, Vec2};
use crate::world::{Cell, Scene};

pub const THERMAL_ROWS: usize = 24;
pub const THERMAL_COLS: usize = 32;
pub const TOUCH_DELTA_C: f64 = 12.0;
pub const TAU_METAL_S: f64 = 300.0;
pub const TAU_FABRIC_S: f64 = 900.0;

/// Sub-samples per pixel edge when integrating the ground field.
const PIXEL_SUBSAMPLES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalModel {
    pub rows: usize,
    pub cols: usize,
    /// Across-heading (columns) and along-heading (rows) field of view.
    pub fov_deg: [f64; 2],
    pub frame_rate_hz: f64,
    pub noise_c: f64,
    pub range_c: [f64; 2],
}

impl Default for ThermalModel {
    fn default() -> Self {
        Self {
            rows: THERMAL_ROWS,
            cols: THERMAL_COLS,
            fov_deg: [110.0, 70.0],
            frame_rate_hz: 2.0,
            noise_c: 2.0,
            range_c: [-40.0, 300.0],
        }
    }
}

impl ThermalModel {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.rows != THERMAL_ROWS || self.cols != THERMAL_COLS {
            return Err(SensorError::Contract(format!("thermal array must be {THERMAL_ROWS}x{THERMAL_COLS}")));
        }
        if self.fov_deg.iter().any(|f| !(*f > 0.0 && *f < 180.0)) || !(self.frame_rate_hz > 0.0) {
            return Err(SensorError::Contract("invalid thermal field of view or frame rate".into()));
        }
        if !(self.noise_c >= 0.0) {
            return Err(SensorError::Contract("noise must be non-negative".into()));
        }
        Ok(())
    }

    pub fn frame_period_s(&self) -> f64 {
        1.0 / self.frame_rate_hz
    }

    /// Ground point seen at fractional pixel coordinates `(r, c)` from `state`.
    /// Row 0 looks ahead, column 0 looks left.
    pub fn ground_point(&self, state: &BlimpState, r: f64, c: f64) -> Vec2 {
        let z = state.position_m.z;
        let u = 1.0 - 2.0 * c / self.cols as f64;
        let v = 1.0 - 2.0 * r / self.rows as f64;
        let across = z * (0.5 * self.fov_deg[0].to_radians()).tan() * u;
        let along = z * (0.5 * self.fov_deg[1].to_radians()).tan() * v;
        let ahead = Vec2::from_angle(state.heading_rad);
        let left = Vec2::new(-ahead.y, ahead.x);
        state.position_m.xy() + ahead * along + left * across
    }

    /// Ground size of one pixel (across, along) at height `z`.
    pub fn pixel_size(&self, z: f64) -> (f64, f64) {
        (
            2.0 * z * (0.5 * self.fov_deg[0].to_radians()).tan() / self.cols as f64,
            2.0 * z * (0.5 * self.fov_deg[1].to_radians()).tan() / self.rows as f64,
        )
    }
}

/// A 24x32 frame in centi-degrees Celsius, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFrame {
    pub time_s: f64,
    pub rows: usize,
    pub cols: usize,
    pub frame_cc: Vec<i32>,
    /// Checkerboard half refreshed by the latest pass: pixels with
    /// `(r + c) % 2 == pass_parity`.
    pub pass_parity: u8,
}

impl ThermalFrame {
    /// Uniform frame; its parity is set so the next pass refreshes parity 0.
    pub fn uniform(model: &ThermalModel, temp_c: f64) -> Self {
        Self {
            time_s: 0.0,
            rows: model.rows,
            cols: model.cols,
            frame_cc: vec![to_cc(temp_c); model.rows * model.cols],
            pass_parity: 1,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.frame_cc[r * self.cols + c] as f64 / 100.0
    }
}

fn to_cc(t: f64) -> i32 {
    (t * 100.0).round() as i32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatSource {
    pub evidence_id: u32,
    pub initial_delta_c: f64,
    pub touched_at_s: f64,
    pub cooling_tau_s: f64,
}

/// Heat sources for every touched evidence item.
pub fn heat_sources(scene: &Scene) -> Vec<HeatSource> {
    scene
        .evidence
        .iter()
        .filter_map(|e| {
            e.touched_at_s.map(|t| HeatSource {
                evidence_id: e.id,
                initial_delta_c: TOUCH_DELTA_C,
                touched_at_s: t,
                cooling_tau_s: if e.kind.is_metallic() { TAU_METAL_S } else { TAU_FABRIC_S },
            })
        })
        .collect()
}

pub fn heat_source_temperature(src: &HeatSource, ambient_c: f64, t_s: f64) -> Result<f64, SensorError> {
    if t_s < src.touched_at_s {
        return Err(SensorError::Domain(format!(
            "time {t_s} s precedes the touch at {} s",
            src.touched_at_s
        )));
    }
    if !(src.cooling_tau_s > 0.0 && src.initial_delta_c >= 0.0) {
        return Err(SensorError::Domain("heat source needs tau > 0 and delta >= 0".into()));
    }
    Ok(ambient_c + src.initial_delta_c * (-(t_s - src.touched_at_s) / src.cooling_tau_s).exp())
}

struct Field<'a> {
    scene: &'a Scene,
    warm: Vec<(Vec<Vec2>, f64)>,
}

impl<'a> Field<'a> {
    fn new(scene: &'a Scene, t: f64) -> Self {
        let warm = heat_sources(scene)
            .into_iter()
            .filter_map(|src| {
                let item = scene.item(src.evidence_id)?;
                let temp = heat_source_temperature(&src, scene.ambient_temp_c, t).ok()?;
                Some((item.footprint_polygon(), temp - scene.ambient_temp_c))
            })
            .collect();
        Self { scene, warm }
    }

    fn at(&self, p: Vec2) -> f64 {
        let ambient = self.scene.ambient_temp_c;
        if !matches!(self.scene.floor_plan.cell_at(p), Some(Cell::Free)) {
            return ambient;
        }
        let delta = self
            .warm
            .iter()
            .filter(|(poly, _)| point_in_polygon(p, poly))
            .map(|(_, d)| *d)
            .fold(0.0, f64::max);
        ambient + delta
    }
}

/// Noise-free pixel temperatures for the whole array: each pixel averages
/// the ground field over its own footprint (no spill into neighbours).
pub fn true_thermal_field(scene: &Scene, state: &BlimpState, model: &ThermalModel) -> Vec<f64> {
    let field = Field::new(scene, state.time_s);
    let n = PIXEL_SUBSAMPLES;
    let mut out = Vec::with_capacity(model.rows * model.cols);
    for r in 0..model.rows {
        for c in 0..model.cols {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let rr = r as f64 + (a as f64 + 0.5) / n as f64;
                    let cc = c as f64 + (b as f64 + 0.5) / n as f64;
                    acc += field.at(model.ground_point(state, rr, cc));
                }
            }
            out.push(acc / (n * n) as f64);
        }
    }
    out
}

/// One interlaced pass: refreshes the checkerboard half opposite to
/// `prev.pass_parity` and keeps the other half bit-identical.
pub fn thermal_capture(
    scene: &Scene,
    state: &BlimpState,
    model: &ThermalModel,
    prev: &ThermalFrame,
    seed: u64,
) -> Result<ThermalFrame, SensorError> {
    if prev.rows != model.rows || prev.cols != model.cols || prev.frame_cc.len() != model.rows * model.cols {
        return Err(SensorError::Contract(format!(
            "previous frame is {}x{}, expected {}x{}",
            prev.rows, prev.cols, model.rows, model.cols
        )));
    }
    if !(state.position_m.z > 0.0) {
        return Err(SensorError::Domain("thermal capture needs positive altitude".into()));
    }
    let parity = 1 - (prev.pass_parity & 1);
    let truth = true_thermal_field(scene, state, model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frame = prev.frame_cc.clone();
    for r in 0..model.rows {
        for c in 0..model.cols {
            if (r + c) % 2 != parity as usize {
                continue;
            }
            let noise = if model.noise_c > 0.0 { rng.random_range(-model.noise_c..=model.noise_c) } else { 0.0 };
            let t = (truth[r * model.cols + c] + noise).clamp(model.range_c[0], model.range_c[1]);
            frame[r * model.cols + c] = to_cc(t);
        }
    }
    Ok(ThermalFrame { time_s: state.time_s, rows: model.rows, cols: model.cols, frame_cc: frame, pass_parity: parity })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub pixels: Vec<(usize, usize)>,
    /// (row, col) mean of member pixels.
    pub centroid: (f64, f64),
    pub count: usize,
}

/// 4-connected clusters of pixels warmer than `ambient + threshold`.
pub fn hotspot_detect(frame: &ThermalFrame, ambient_c: f64, threshold_c: f64) -> Vec<Hotspot> {
    let (rows, cols) = (frame.rows, frame.cols);
    let hot: Vec<bool> = (0..rows * cols)
        .map(|k| frame.frame_cc[k] as f64 / 100.0 > ambient_c + threshold_c)
        .collect();
    let mut seen = vec![false; rows * cols];
    let mut spots = Vec::new();
    for start in 0..rows * cols {
        if !hot[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut pixels = Vec::new();
        while let Some(k) = stack.pop() {
            let (r, c) = (k / cols, k % cols);
            pixels.push((r, c));
            let mut visit = |rr: usize, cc: usize| {
                let n = rr * cols + cc;
                if hot[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < rows {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < cols {
                visit(r, c + 1);
            }
        }
        pixels.sort_unstable();
        let count = pixels.len();
        let centroid = (
            pixels.iter().map(|p| p.0 as f64).sum::<f64>() / count as f64,
            pixels.iter().map(|p| p.1 as f64).sum::<f64>() / count as f64,
        );
        spots.push(Hotspot { pixels, centroid, count });
    }
    spots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blimp::BlimpConfig;
    use crate::geometry::Vec3;
    use crate::world::{preset, EvidenceItem, EvidenceKind, KindName};
    use proptest::prelude::*;
    use rand::Rng;

    fn at(x: f64, y: f64, z: f64, heading: f64) -> BlimpState {
        BlimpState::at_rest(Vec3::new(x, y, z), heading, &BlimpConfig::default())
    }

    fn scene_with(name: KindName, x: f64, y: f64, orientation: f64) -> Scene {
        let mut s = Scene::empty(preset("hint-empty").unwrap());
        s.evidence.push(EvidenceItem {
            id: 1,
            kind: EvidenceKind::standard(name),
            position_m: Vec2::new(x, y),
            orientation_rad: orientation,
            touched_at_s: Some(0.0),
            displaced: false,
        });
        s
    }

    fn full_frame(scene: &Scene, state: &BlimpState, model: &ThermalModel, seed: u64) -> ThermalFrame {
        let f0 = ThermalFrame::uniform(model, scene.ambient_temp_c);
        let f1 = thermal_capture(scene, state, model, &f0, seed).unwrap();
        thermal_capture(scene, state, model, &f1, seed + 1).unwrap()
    }

    #[test]
    fn decay_reference_points() {
        let src = HeatSource { evidence_id: 1, initial_delta_c: 12.0, touched_at_s: 10.0, cooling_tau_s: 300.0 };
        assert_eq!(heat_source_temperature(&src, 21.0, 10.0).unwrap(), 33.0);
        let at_tau = heat_source_temperature(&src, 21.0, 310.0).unwrap();
        assert!((at_tau - (21.0 + 12.0 / std::f64::consts::E)).abs() < 1e-9);
        assert!((at_tau - 25.414).abs() < 1e-3);
        assert!((heat_source_temperature(&src, 21.0, 1e9).unwrap() - 21.0).abs() < 1e-12);
        assert!(heat_source_temperature(&src, 21.0, 5.0).is_err());
    }

    #[test]
    fn static_ambient_scene_is_flat() {
        let scene = Scene::empty(preset("hint-empty").unwrap());
        let model = ThermalModel::default();
        let f = full_frame(&scene, &at(5.0, 2.5, 1.5, 0.0), &model, 9);
        assert_eq!(f.frame_cc.len(), 24 * 32);
        for r in 0..24 {
            for c in 0..32 {
                assert!((f.get(r, c) - 21.0).abs() <= 2.0 + 1e-9);
            }
        }
        assert!(hotspot_detect(&f, 21.0, 4.0).is_empty());
    }

    #[test]
    fn wrong_previous_dimensions_rejected() {
        let scene = Scene::empty(preset("hint-empty").unwrap());
        let model = ThermalModel::default();
        let mut prev = ThermalFrame::uniform(&model, 21.0);
        prev.rows = 8;
        assert!(matches!(
            thermal_capture(&scene, &at(5.0, 2.5, 1.5, 0.0), &model, &prev, 0),
            Err(SensorError::Contract(_))
        ));
    }

    #[test]
    fn interlace_keeps_other_parity() {
        let scene = scene_with(KindName::Shoes, 5.0, 2.5, 0.0);
        let model = ThermalModel::default();
        let prev = full_frame(&scene, &at(5.0, 2.5, 1.5, 0.0), &model, 1);
        let next = thermal_capture(&scene, &at(5.3, 2.4, 1.4, 0.2), &model, &prev, 2).unwrap();
        assert_ne!(next.pass_parity, prev.pass_parity);
        for r in 0..24 {
            for c in 0..32 {
                if (r + c) % 2 != next.pass_parity as usize {
                    assert_eq!(next.frame_cc[r * 32 + c], prev.frame_cc[r * 32 + c]);
                }
            }
        }
    }

    #[test]
    fn shoe_cluster_matches_projection() {
        // 0.30 x 0.25 m shoe at 3 m: pixels are ~0.134 x ~0.175 m
        let model = ThermalModel { noise_c: 0.0, ..Default::default() };
        let mut scene = scene_with(KindName::Shoes, 5.03, 2.46, 0.0);
        // +8 degrees at capture time
        let t = TAU_FABRIC_S * (12.0f64 / 8.0).ln();
        let mut state = at(5.0, 2.5, 2.4, 0.0);
        state.time_s = t;
        scene.floor_plan.ceiling_height_m = 2.5;
        let truth = true_thermal_field(&scene, &state, &model);
        // oracle: pixels whose covered fraction exceeds threshold/delta
        let expect = truth.iter().filter(|v| **v - 21.0 > 4.0).count();
        let f = full_frame(&scene, &state, &model, 5);
        let spots = hotspot_detect(&f, 21.0, 4.0);
        assert_eq!(spots.len(), 1);
        assert_eq!(spots[0].count, expect);
        assert!((2..=6).contains(&expect), "{expect}");
    }

    #[test]
    fn small_knife_mostly_missed_at_one_and_a_half_meters() {
        let model = ThermalModel::default();
        let mut detected = 0;
        let trials = 100;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = 5.0 + rng.random_range(-0.3..0.3);
            let y = 2.5 + rng.random_range(-0.3..0.3);
            let scene = scene_with(KindName::KnifeSmall, x, y, rng.random_range(0.0..std::f64::consts::PI));
            let f = full_frame(&scene, &at(5.0, 2.5, 1.5, 0.0), &model, seed * 7);
            if !hotspot_detect(&f, 21.0, 4.0).is_empty() {
                detected += 1;
            }
        }
        assert!(detected * 2 < trials, "{detected}/{trials}");
    }

    #[test]
    fn motion_between_passes_leaves_checkerboard() {
        let model = ThermalModel { noise_c: 0.0, ..Default::default() };
        let scene = scene_with(KindName::Shoes, 5.0, 2.5, 0.0);
        let a = at(5.0, 2.5, 1.5, 0.0);
        let prev = full_frame(&scene, &a, &model, 1);
        let (px, _) = model.pixel_size(1.5);
        // one pixel width across the heading
        let b = at(5.0, 2.5 + px, 1.5, 0.0);
        let next = thermal_capture(&scene, &b, &model, &prev, 3).unwrap();
        let truth = true_thermal_field(&scene, &b, &model);
        let (mut fresh, mut stale) = (0.0f64, 0.0f64);
        for k in 0..24 * 32 {
            let err = (next.frame_cc[k] as f64 / 100.0 - truth[k]).abs();
            if (k / 32 + k % 32) % 2 == next.pass_parity as usize {
                fresh = fresh.max(err);
            } else {
                stale = stale.max(err);
            }
        }
        assert!(fresh < 0.01);
        assert!(stale > 2.0, "{stale}");
    }

    #[test]
    fn frame_serializes_as_centidegrees() {
        let model = ThermalModel::default();
        let f = ThermalFrame::uniform(&model, 21.5);
        let v = serde_json::to_value(&f).unwrap();
        assert_eq!(v["frame_cc"][0], 2150);
        assert_eq!(serde_json::from_value::<ThermalFrame>(v).unwrap(), f);
    }

    proptest! {
        #[test]
        fn decay_is_monotone_and_bounded(t in 0.0f64..5000.0, dt in 0.001f64..100.0, tau in 1.0f64..2000.0) {
            let src = HeatSource { evidence_id: 1, initial_delta_c: 12.0, touched_at_s: 0.0, cooling_tau_s: tau };
            let a = heat_source_temperature(&src, 21.0, t).unwrap();
            let b = heat_source_temperature(&src, 21.0, t + dt).unwrap();
            prop_assert!(b <= a && b >= 21.0);
        }

        #[test]
        fn frames_always_full_size(seed in 0u64..1000, z in 0.3f64..2.4, h in -3.0f64..3.0) {
            let scene = scene_with(KindName::Shoes, 5.0, 2.5, 0.0);
            let model = ThermalModel::default();
            let f = full_frame(&scene, &at(5.0, 2.5, z, h), &model, seed);
            prop_assert_eq!(f.frame_cc.len(), 24 * 32);
            prop_assert!(f.frame_cc.iter().all(|v| (-4000..=30000).contains(v)));
        }
    }
}
