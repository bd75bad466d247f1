use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use std::io::Cursor;

use super::SensorError;
use crate::blimp::BlimpState;
use crate::geometry::{clip_convex, oriented_rect, point_in_polygon, Vec2};
use crate::world::{Cell, FloorPlan, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    /// Horizontal (across-heading) and vertical (along-heading) field of view.
    pub fov_deg: [f64; 2],
    pub resolution_px: [u32; 2],
    pub frame_rate_hz: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self { fov_deg: [60.0, 45.0], resolution_px: [800, 600], frame_rate_hz: 30.0 }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.fov_deg.iter().any(|f| !(*f > 0.0 && *f < 180.0)) {
            return Err(SensorError::Contract("field of view must lie in (0, 180) degrees".into()));
        }
        if self.resolution_px.contains(&0) || !(self.frame_rate_hz > 0.0) {
            return Err(SensorError::Contract("resolution and frame rate must be positive".into()));
        }
        Ok(())
    }

    /// Ground footprint (width across heading, depth along it) at height `z`.
    pub fn footprint_size(&self, z: f64) -> (f64, f64) {
        (
            2.0 * z * (0.5 * self.fov_deg[0].to_radians()).tan(),
            2.0 * z * (0.5 * self.fov_deg[1].to_radians()).tan(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub time_s: f64,
    pub footprint_m: Vec<Vec2>,
    pub captured_ids: Vec<u32>,
    /// Optional top-down PNG of the footprint; never serialized.
    #[serde(skip)]
    pub raster_png: Option<Vec<u8>>,
}

/// Footprint rectangle under the craft, not clipped to the floor.
pub fn footprint_unclipped(state: &BlimpState, cam: &CameraModel) -> Result<Vec<Vec2>, SensorError> {
    let z = state.position_m.z;
    if !(z > 0.0) {
        return Err(SensorError::DegenerateFootprint(z));
    }
    let (w, d) = cam.footprint_size(z);
    Ok(oriented_rect(state.position_m.xy(), state.heading_rad, d, w))
}

/// Footprint clipped to the floor bounds of `plan`.
pub fn camera_footprint(state: &BlimpState, cam: &CameraModel, plan: &FloorPlan) -> Result<Vec<Vec2>, SensorError> {
    let raw = footprint_unclipped(state, cam)?;
    let bounds = plan.interior_bounds().unwrap_or_else(|| plan.extent());
    Ok(clip_convex(&raw, &bounds.corners()))
}

/// Evidence ids whose position lies in `footprint` with a clear vertical
/// line of sight (no obstacle above the item).
pub fn captured_in(scene: &Scene, footprint: &[Vec2]) -> Vec<u32> {
    let mut ids: Vec<u32> = scene
        .evidence
        .iter()
        .filter(|e| point_in_polygon(e.position_m, footprint))
        .filter(|e| !matches!(scene.floor_plan.cell_at(e.position_m), Some(Cell::Obstacle { .. })))
        .map(|e| e.id)
        .collect();
    ids.sort_unstable();
    ids
}

pub fn camera_capture(scene: &Scene, state: &BlimpState, cam: &CameraModel) -> CameraFrame {
    let footprint = camera_footprint(state, cam, &scene.floor_plan).unwrap_or_default();
    let captured_ids = captured_in(scene, &footprint);
    CameraFrame { time_s: state.time_s, footprint_m: footprint, captured_ids, raster_png: None }
}

/// Renders the footprint's bounding box top-down: floor white, walls dark,
/// obstacles grey, evidence footprints colored by kind.
pub fn render_footprint_png(scene: &Scene, footprint: &[Vec2], px_per_m: f64) -> Result<Vec<u8>, SensorError> {
    if footprint.len() < 3 || !(px_per_m > 0.0) {
        return Err(SensorError::Domain("cannot render an empty footprint".into()));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in footprint {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let w = (((x1 - x0) * px_per_m).ceil() as u32).clamp(1, 2048);
    let h = (((y1 - y0) * px_per_m).ceil() as u32).clamp(1, 2048);
    let polys: Vec<_> = scene.evidence.iter().map(|e| (e, e.footprint_polygon())).collect();
    let mut img = RgbImage::new(w, h);
    for py in 0..h {
        for px in 0..w {
            // image rows grow downward, world y upward
            let p = Vec2::new(x0 + (px as f64 + 0.5) / px_per_m, y1 - (py as f64 + 0.5) / px_per_m);
            let mut color = if !point_in_polygon(p, footprint) {
                Rgb([0, 0, 0])
            } else {
                match scene.floor_plan.cell_at(p) {
                    Some(Cell::Free) => Rgb([235, 235, 230]),
                    Some(Cell::Obstacle { .. }) => Rgb([140, 120, 100]),
                    _ => Rgb([40, 40, 40]),
                }
            };
            if color == Rgb([235, 235, 230]) {
                if let Some((e, _)) = polys.iter().find(|(_, poly)| point_in_polygon(p, poly)) {
                    color = if e.kind.name.is_blood_sheet() { Rgb([150, 10, 10]) } else { Rgb([30, 60, 160]) };
                }
            }
            img.put_pixel(px, py, color);
        }
    }
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| SensorError::Domain(e.to_string()))?;
    Ok(out.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blimp::BlimpConfig;
    use crate::geometry::{polygon_area, Rect, Vec3};
    use crate::world::{preset, EvidenceItem, EvidenceKind, KindName};
    use proptest::prelude::*;

    fn at(x: f64, y: f64, z: f64, heading: f64) -> BlimpState {
        BlimpState::at_rest(Vec3::new(x, y, z), heading, &BlimpConfig::default())
    }

    fn item(id: u32, name: KindName, x: f64, y: f64) -> EvidenceItem {
        EvidenceItem {
            id,
            kind: EvidenceKind::standard(name),
            position_m: Vec2::new(x, y),
            orientation_rad: 0.0,
            touched_at_s: None,
            displaced: false,
        }
    }

    #[test]
    fn footprint_width_at_one_and_a_half_meters() {
        let (w, _) = CameraModel::default().footprint_size(1.5);
        assert!((w - 1.732).abs() < 1e-3);
        let wide = CameraModel { fov_deg: [90.0, 45.0], ..Default::default() };
        assert!((wide.footprint_size(1.0).0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn footprint_is_oriented_across_heading() {
        let cam = CameraModel::default();
        let fp = footprint_unclipped(&at(5.0, 2.5, 1.5, 0.0), &cam).unwrap();
        let ys: Vec<f64> = fp.iter().map(|p| p.y).collect();
        let span = ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
        assert!((span - 1.732).abs() < 1e-3);
    }

    #[test]
    fn grounded_craft_has_no_footprint() {
        let cam = CameraModel::default();
        assert!(matches!(
            footprint_unclipped(&at(1.0, 1.0, 0.0, 0.0), &cam),
            Err(SensorError::DegenerateFootprint(_))
        ));
        let tiny = footprint_unclipped(&at(1.0, 1.0, 1e-6, 0.0), &cam).unwrap();
        assert!(polygon_area(&tiny) < 1e-10);
    }

    #[test]
    fn footprint_clipped_to_floor() {
        let plan = preset("hint-empty").unwrap();
        let fp = camera_footprint(&at(0.3, 0.3, 2.0, 0.0), &CameraModel::default(), &plan).unwrap();
        for p in &fp {
            assert!(p.x >= 0.05 - 1e-9 && p.y >= 0.05 - 1e-9);
        }
    }

    #[test]
    fn capture_directly_above_and_under_table() {
        let mut plan = preset("hint-empty").unwrap();
        plan.fill_rect(Rect::new(6.0, 1.0, 7.0, 2.0), Cell::Obstacle { height_m: 0.7 });
        let mut scene = Scene::empty(plan);
        scene.evidence.push(item(1, KindName::KnifeLarge, 3.0, 2.0));
        scene.evidence.push(item(2, KindName::Shoes, 6.5, 1.5));
        let cam = CameraModel::default();
        assert_eq!(camera_capture(&scene, &at(3.0, 2.0, 1.5, 0.0), &cam).captured_ids, vec![1]);
        assert!(camera_capture(&scene, &at(6.5, 1.5, 1.5, 0.0), &cam).captured_ids.is_empty());
        let empty = Scene::empty(preset("hint-empty").unwrap());
        assert!(camera_capture(&empty, &at(3.0, 2.0, 1.5, 0.0), &cam).captured_ids.is_empty());
    }

    #[test]
    fn raster_is_png() {
        let mut scene = Scene::empty(preset("lab-4x3").unwrap());
        scene.evidence.push(item(1, KindName::BloodSheetActive, 2.0, 1.5));
        let fp = camera_footprint(&at(2.0, 1.5, 1.0, 0.3), &CameraModel::default(), &scene.floor_plan).unwrap();
        let png = render_footprint_png(&scene, &fp, 50.0).unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }

    proptest! {
        #[test]
        fn footprint_area_grows_with_altitude(z in 0.05f64..2.0, dz in 0.01f64..0.5) {
            let cam = CameraModel::default();
            let a = polygon_area(&footprint_unclipped(&at(5.0, 2.5, z, 0.4), &cam).unwrap());
            let b = polygon_area(&footprint_unclipped(&at(5.0, 2.5, z + dz, 0.4), &cam).unwrap());
            prop_assert!(b > a);
        }

        #[test]
        fn capture_matches_brute_force(
            seed in 0u64..500, x in 0.5f64..9.5, y in 0.5f64..4.5, z in 0.3f64..2.4, h in -3.1f64..3.1,
        ) {
            use crate::world::{generate_scene, CrimeSceneSpec, CrimeType};
            let scene = generate_scene(&CrimeSceneSpec::with_defaults(CrimeType::Homicide, preset("hint").unwrap(), seed)).unwrap();
            let cam = CameraModel::default();
            let state = at(x, y, z, h);
            let frame = camera_capture(&scene, &state, &cam);
            // oracle: rotate each item into the craft frame and compare to the half extents
            let (w, d) = cam.footprint_size(z);
            let bounds = scene.floor_plan.interior_bounds().unwrap();
            let mut expect = Vec::new();
            for e in &scene.evidence {
                let rel = (e.position_m - state.position_m.xy()).rotate(-h);
                let inside = rel.x.abs() < 0.5 * d && rel.y.abs() < 0.5 * w && bounds.contains(e.position_m);
                let hidden = matches!(scene.floor_plan.cell_at(e.position_m), Some(Cell::Obstacle { .. }));
                if inside && !hidden {
                    expect.push(e.id);
                }
            }
            expect.sort_unstable();
            prop_assert_eq!(frame.captured_ids, expect);
        }
    }
}
