use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::extract::fit_pixels;
use super::{StainClass, StainError, StainGroundTruth, StainRaster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StainShape {
    Ellipse,
    Blob,
    Hand,
    Shoe,
    Tag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SheetParams {
    pub width_px: u32,
    pub height_px: u32,
    pub passive: usize,
    pub active: usize,
    pub transfer: usize,
    /// Red non-blood tags that enter the pipeline as false positives.
    pub distractors: usize,
    /// 0 keeps every stain well clear of the decision thresholds (passive
    /// e <= 0.4, active e >= 0.9, transfer area >= 2x threshold); 1 spreads
    /// them across the thresholds. Same seed, same random draws.
    pub margin_shrink: f64,
    pub transfer_area_px: f64,
    pub eccentricity_threshold: f64,
    /// Active stains share a direction within groups of this size.
    pub active_group_size: usize,
    pub allow_overlap: bool,
}

impl Default for SheetParams {
    fn default() -> Self {
        Self {
            width_px: 1200,
            height_px: 900,
            passive: 0,
            active: 0,
            transfer: 0,
            distractors: 0,
            margin_shrink: 0.0,
            transfer_area_px: 5000.0,
            eccentricity_threshold: 0.85,
            active_group_size: 5,
            allow_overlap: false,
        }
    }
}

impl SheetParams {
    pub fn counts(passive: usize, active: usize, transfer: usize) -> Self {
        Self { passive, active, transfer, ..Self::default() }
    }
}

const TAG_COLOR: [u8; 3] = [236, 28, 36];
const GAP_PX: f64 = 3.0;
const MAX_CANDIDATES: usize = 500;

/// One drawable primitive in stain-local units.
#[derive(Clone, Copy)]
struct Part {
    offset: [f64; 2],
    a: f64,
    b: f64,
    theta: f64,
    rect: bool,
}

fn ellipse_part(a: f64, b: f64) -> Part {
    Part { offset: [0.0, 0.0], a, b, theta: 0.0, rect: false }
}

fn hand_parts() -> Vec<Part> {
    let mut parts = vec![Part { offset: [0.0, 0.0], a: 1.0, b: 0.85, theta: 0.0, rect: false }];
    for (k, len) in [0.55, 0.65, 0.62, 0.48].into_iter().enumerate() {
        let y = -0.55 + 0.37 * k as f64;
        parts.push(Part { offset: [0.85 + 0.5 * len, y], a: len, b: 0.14, theta: 0.0, rect: false });
    }
    parts.push(Part { offset: [0.2, -1.0], a: 0.45, b: 0.15, theta: -0.9, rect: false });
    parts
}

fn shoe_parts() -> Vec<Part> {
    vec![
        Part { offset: [0.35, 0.0], a: 1.4, b: 0.5, theta: 0.0, rect: false },
        Part { offset: [-1.2, 0.0], a: 0.55, b: 0.42, theta: 0.0, rect: false },
    ]
}

fn extent(parts: &[Part]) -> f64 {
    parts
        .iter()
        .map(|p| (p.offset[0].powi(2) + p.offset[1].powi(2)).sqrt() + p.a.max(p.b) * if p.rect { 1.5 } else { 1.0 })
        .fold(0.0, f64::max)
}

fn inside(part: &Part, scale: f64, theta: f64, center: [f64; 2], x: f64, y: f64) -> bool {
    // undo placement, then test against the part in local units
    let (s, c) = theta.sin_cos();
    let (dx, dy) = ((x - center[0]) / scale, (y - center[1]) / scale);
    let (lx, ly) = (c * dx + s * dy - part.offset[0], -s * dx + c * dy - part.offset[1]);
    let (ps, pc) = part.theta.sin_cos();
    let (u, v) = (pc * lx + ps * ly, -ps * lx + pc * ly);
    if part.rect {
        u.abs() <= part.a && v.abs() <= part.b
    } else {
        (u / part.a).powi(2) + (v / part.b).powi(2) <= 1.0
    }
}

/// Pixels (centers at integer coordinates) covered by the shape.
fn rasterize(parts: &[Part], scale: f64, theta: f64, center: [f64; 2], w: u32, h: u32) -> Vec<(u32, u32)> {
    let r = extent(parts) * scale + 1.0;
    let x0 = (center[0] - r).floor().max(0.0) as u32;
    let y0 = (center[1] - r).floor().max(0.0) as u32;
    let x1 = ((center[0] + r).ceil() as u32).min(w.saturating_sub(1));
    let y1 = ((center[1] + r).ceil() as u32).min(h.saturating_sub(1));
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            if parts.iter().any(|p| inside(p, scale, theta, center, x as f64, y as f64)) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Fills an ellipse; returns the number of pixels set.
pub fn fill_ellipse(raster: &mut StainRaster, center: [f64; 2], a: f64, b: f64, theta: f64, color: [u8; 3]) -> usize {
    let px = rasterize(&[ellipse_part(a, b)], 1.0, theta, center, raster.width_px, raster.height_px);
    for &(x, y) in &px {
        raster.set(x, y, color);
    }
    px.len()
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

struct Planned {
    class: StainClass,
    shape: StainShape,
    parts: Vec<Part>,
    scale: f64,
    theta: f64,
    color: [u8; 3],
    /// Nominal axes for single-ellipse stains.
    axes: Option<[f64; 2]>,
}

/// Draws a sheet of synthetic stains with ground truth. Every stain owns a
/// random stream seeded by `(seed, index)`, so changing one stain's size
/// does not perturb the others' draws.
pub fn synthesize_stain_sheet(params: &SheetParams, seed: u64) -> Result<StainRaster, StainError> {
    if params.width_px == 0 || params.height_px == 0 {
        return Err(StainError::Generation("sheet must have positive size".into()));
    }
    if !(0.0..=1.0).contains(&params.margin_shrink) {
        return Err(StainError::Generation("margin_shrink must lie in [0, 1]".into()));
    }
    let m = params.margin_shrink;
    let thr_e = params.eccentricity_threshold;
    let group = params.active_group_size.max(1);
    let mut raster = StainRaster::blank(params.width_px, params.height_px, seed);
    let total = params.passive + params.active + params.transfer + params.distractors;
    let mut planned = Vec::with_capacity(total);

    for k in 0..total {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (u_shape, u_size, u_theta, u_color) =
            (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let blood = [110 + (40.0 * u_color) as u8, 6 + (10.0 * u_color) as u8, 8 + (12.0 * u_color) as u8];
        let plan = if k < params.passive {
            let a = 7.0 + 7.0 * u_size;
            let e = lerp(0.4 * u_shape, thr_e - 0.1 + 0.2 * u_shape, m);
            let b = a * (1.0 - e * e).sqrt();
            Planned {
                class: StainClass::PassiveDrip,
                shape: StainShape::Ellipse,
                parts: vec![ellipse_part(a, b)],
                scale: 1.0,
                theta: u_theta * PI,
                color: blood,
                axes: Some([a, b]),
            }
        } else if k < params.passive + params.active {
            let a = 12.0 + 14.0 * u_size;
            let e = lerp(0.9 + 0.07 * u_shape, thr_e - 0.1 + 0.2 * u_shape, m);
            let b = a * (1.0 - e * e).sqrt();
            let g = ((k - params.passive) / group) as u64;
            let mut grng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0000 ^ g);
            let direction = grng.random::<f64>() * PI;
            Planned {
                class: StainClass::ActiveSpatter,
                shape: StainShape::Ellipse,
                parts: vec![ellipse_part(a, b)],
                scale: 1.0,
                theta: direction + 0.3 * (u_theta - 0.5),
                color: blood,
                axes: Some([a, b]),
            }
        } else if k < params.passive + params.active + params.transfer {
            let factor = lerp(2.0 + u_size, 0.5 + u_size, m);
            let target = factor * params.transfer_area_px;
            let (shape, parts) = if u_shape < 1.0 / 3.0 {
                (StainShape::Blob, vec![ellipse_part(1.0, 0.6 + 0.3 * u_size)])
            } else if u_shape < 2.0 / 3.0 {
                (StainShape::Hand, hand_parts())
            } else {
                (StainShape::Shoe, shoe_parts())
            };
            // size by measuring a trial rendering
            let s0 = 40.0;
            let r0 = extent(&parts) * s0 + 2.0;
            let n0 = rasterize(&parts, s0, 0.0, [r0, r0], u32::MAX, u32::MAX).len().max(1);
            let scale = s0 * (target / n0 as f64).sqrt();
            Planned {
                class: StainClass::TransferSmear,
                shape,
                parts,
                scale,
                theta: u_theta * 2.0 * PI,
                color: blood,
                axes: None,
            }
        } else {
            let a = 9.0 + 4.0 * u_size;
            let b = 4.0 + 2.0 * u_shape;
            Planned {
                class: StainClass::NotBlood,
                shape: StainShape::Tag,
                parts: vec![Part { offset: [0.0, 0.0], a, b, theta: 0.0, rect: true }],
                scale: 1.0,
                theta: u_theta * PI,
                color: TAG_COLOR,
                axes: Some([a, b]),
            }
        };
        planned.push((k, plan, rng));
    }

    // biggest first, so large smears are not squeezed out by small drops
    planned.sort_by(|a, b| (extent(&b.1.parts) * b.1.scale).total_cmp(&(extent(&a.1.parts) * a.1.scale)));
    let mut placed: Vec<([f64; 2], f64)> = Vec::new();
    for (k, plan, mut rng) in planned {
        let radius = extent(&plan.parts) * plan.scale + 1.0;
        let (w, h) = (params.width_px as f64, params.height_px as f64);
        if 2.0 * (radius + GAP_PX) >= w.min(h) {
            return Err(StainError::Generation(format!(
                "{} stain {} of radius {radius:.0} px does not fit a {}x{} sheet",
                plan.class, k, params.width_px, params.height_px
            )));
        }
        let mut chosen = None;
        for _ in 0..MAX_CANDIDATES {
            let c = [
                rng.random_range(radius + GAP_PX..w - radius - GAP_PX),
                rng.random_range(radius + GAP_PX..h - radius - GAP_PX),
            ];
            let clear = placed.iter().all(|(p, r)| {
                let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
                d > r + radius + GAP_PX
            });
            if clear || params.allow_overlap {
                chosen = Some(c);
                break;
            }
        }
        let Some(center) = chosen else {
            return Err(StainError::Generation(format!(
                "no free space left for {} stain {k} after {MAX_CANDIDATES} attempts",
                plan.class
            )));
        };
        let pixels = rasterize(&plan.parts, plan.scale, plan.theta, center, params.width_px, params.height_px);
        for &(x, y) in &pixels {
            raster.set(x, y, plan.color);
        }
        let (center_px, semi_axes_px) = match plan.axes {
            Some(ax) => (center, ax),
            None => {
                let f = fit_pixels(&pixels);
                (f.centroid_px, f.semi_axes_px)
            }
        };
        let mut overlaps = false;
        for (i, (p, r)) in placed.iter().enumerate() {
            let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
            if d <= r + radius {
                overlaps = true;
                raster.truths[i].overlaps = true;
            }
        }
        placed.push((center, radius));
        raster.truths.push(StainGroundTruth {
            id: k as u32,
            class: plan.class,
            shape: plan.shape,
            center_px,
            semi_axes_px,
            orientation_rad: plan.theta.rem_euclid(PI),
            color: plan.color,
            overlaps,
        });
    }
    raster.truths.sort_by_key(|t| t.id);
    Ok(raster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stains::{evaluate_sheet, ClassifierConfig};

    #[test]
    fn blank_when_no_stains() {
        let s = synthesize_stain_sheet(&SheetParams::default(), 3).unwrap();
        assert!(s.truths.is_empty());
        assert!(s.pixels.iter().all(|p| *p == crate::stains::SHEET_BACKGROUND));
    }

    #[test]
    fn requested_counts_and_margins() {
        let s = synthesize_stain_sheet(&SheetParams::counts(10, 10, 2), 7).unwrap();
        assert_eq!(s.truths.len(), 22);
        let count = |c| s.truths.iter().filter(|t| t.class == c).count();
        assert_eq!(count(StainClass::PassiveDrip), 10);
        assert_eq!(count(StainClass::ActiveSpatter), 10);
        assert_eq!(count(StainClass::TransferSmear), 2);
        let e = |t: &StainGroundTruth| (1.0 - (t.semi_axes_px[1] / t.semi_axes_px[0]).powi(2)).sqrt();
        for t in &s.truths {
            match t.class {
                StainClass::PassiveDrip => assert!(e(t) <= 0.4 + 1e-12),
                StainClass::ActiveSpatter => assert!(e(t) >= 0.9),
                _ => {}
            }
            assert!(!t.overlaps);
        }
        let cs = crate::stains::extract_red_clusters(&s, &ClassifierConfig::default());
        let big: Vec<usize> = cs.iter().map(|c| c.area_px()).filter(|a| *a > 5000).collect();
        assert_eq!(big.len(), 2);
        assert!(big.iter().all(|a| *a as f64 >= 2.0 * 5000.0 * 0.99), "{big:?}");
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SheetParams { distractors: 2, ..SheetParams::counts(5, 5, 1) };
        assert_eq!(synthesize_stain_sheet(&p, 11).unwrap(), synthesize_stain_sheet(&p, 11).unwrap());
        assert_ne!(synthesize_stain_sheet(&p, 11).unwrap().pixels, synthesize_stain_sheet(&p, 12).unwrap().pixels);
    }

    #[test]
    fn oversized_request_fails() {
        let p = SheetParams { width_px: 60, height_px: 60, ..SheetParams::counts(0, 0, 1) };
        assert!(matches!(synthesize_stain_sheet(&p, 1), Err(StainError::Generation(_))));
        let crowded = SheetParams { width_px: 100, height_px: 100, ..SheetParams::counts(200, 0, 0) };
        assert!(synthesize_stain_sheet(&crowded, 1).is_err());
    }

    #[test]
    fn margin_sheet_classifies_perfectly() {
        let cfg = ClassifierConfig::default();
        for seed in 0..5 {
            let s = synthesize_stain_sheet(&SheetParams::counts(10, 10, 2), seed).unwrap();
            let r = evaluate_sheet(&s, &cfg, 20.0);
            assert_eq!(r.accuracy_on_true_blood, 1.0, "seed {seed}: {:?}", r.confusion);
            assert_eq!(r.false_positives, 0);
        }
    }

    #[test]
    fn overlaps_flagged_when_allowed() {
        let p = SheetParams { width_px: 200, height_px: 200, allow_overlap: true, ..SheetParams::counts(40, 0, 0) };
        let s = synthesize_stain_sheet(&p, 2).unwrap();
        assert!(s.truths.iter().any(|t| t.overlaps));
    }
}
