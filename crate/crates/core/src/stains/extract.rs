use serde::{Deserialize, Serialize};

use super::{ClassifierConfig, StainClass, StainRaster};

/// An 8-connected cluster: every member pixel plus the ordered outer
/// boundary (Moore neighbour trace, clockwise in image coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub pixels: Vec<(u32, u32)>,
    pub boundary: Vec<(u32, u32)>,
}

impl Contour {
    pub fn area_px(&self) -> usize {
        self.pixels.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub centroid_px: [f64; 2],
    /// `[a, b]` with `a >= b`.
    pub semi_axes_px: [f64; 2],
    pub orientation_rad: f64,
    pub area_px: f64,
    pub eccentricity: f64,
    pub degenerate: bool,
}

/// Semi-minor axes below this are treated as collinear pixel sets.
const MIN_SEMI_AXIS_PX: f64 = 0.5;

/// Hue/saturation/value red test.
pub fn is_red(rgb: [u8; 3], cfg: &ClassifierConfig) -> bool {
    let [r, g, b] = rgb.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    if max < cfg.min_value || max <= 0.0 || chroma / max < cfg.min_saturation {
        return false;
    }
    let hue = if max == r {
        60.0 * (((g - b) / chroma) % 6.0)
    } else if max == g {
        60.0 * ((b - r) / chroma + 2.0)
    } else {
        60.0 * ((r - g) / chroma + 4.0)
    };
    let hue = hue.rem_euclid(360.0);
    hue.min(360.0 - hue) <= cfg.hue_half_width_deg
}

const NEIGHBOURS: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

/// Connected red clusters of at least `min_area_px` pixels, in raster order
/// of their first pixel.
pub fn extract_red_clusters(raster: &StainRaster, cfg: &ClassifierConfig) -> Vec<Contour> {
    let (w, h) = (raster.width_px as usize, raster.height_px as usize);
    let red: Vec<bool> = raster.pixels.iter().map(|p| is_red(*p, cfg)).collect();
    let mut label = vec![u32::MAX; w * h];
    let mut out = Vec::new();
    let mut next = 0u32;
    for start in 0..w * h {
        if !red[start] || label[start] != u32::MAX {
            continue;
        }
        let id = next;
        next += 1;
        label[start] = id;
        let mut stack = vec![start];
        let mut pixels = Vec::new();
        while let Some(k) = stack.pop() {
            let (x, y) = ((k % w) as i64, (k / w) as i64);
            pixels.push((x as u32, y as u32));
            for (dx, dy) in NEIGHBOURS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if red[n] && label[n] == u32::MAX {
                    label[n] = id;
                    stack.push(n);
                }
            }
        }
        if pixels.len() < cfg.min_area_px {
            continue;
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        let member = |x: i64, y: i64| {
            x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && label[y as usize * w + x as usize] == id
        };
        let boundary = trace_boundary(pixels[0], member, pixels.len());
        out.push(Contour { pixels, boundary });
    }
    out
}

/// Moore neighbour tracing from the top-left pixel of a component.
fn trace_boundary(start: (u32, u32), member: impl Fn(i64, i64) -> bool, n: usize) -> Vec<(u32, u32)> {
    let s = (start.0 as i64, start.1 as i64);
    let mut boundary = vec![start];
    let mut p = s;
    // entered from the west, which is background for a top-left pixel
    let mut back = 0usize;
    let mut second: Option<(i64, i64)> = None;
    for _ in 0..4 * n + 8 {
        let mut found = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let q = (p.0 + NEIGHBOURS[d].0, p.1 + NEIGHBOURS[d].1);
            if member(q.0, q.1) {
                found = Some((q, d));
                break;
            }
        }
        let Some((q, d)) = found else {
            // isolated pixel
            break;
        };
        let prev = (p.0 + NEIGHBOURS[(d + 7) % 8].0, p.1 + NEIGHBOURS[(d + 7) % 8].1);
        let rel = (prev.0 - q.0, prev.1 - q.1);
        back = NEIGHBOURS.iter().position(|&o| o == rel).unwrap_or(0);
        if p == s {
            match second {
                None => second = Some(q),
                Some(sec) if sec == q => break,
                _ => {}
            }
        }
        if q == s && second.is_some() {
            // next iteration decides whether the loop is closed
            p = q;
            continue;
        }
        boundary.push((q.0 as u32, q.1 as u32));
        p = q;
    }
    boundary
}

/// Moment fit: centroid from first moments, axes and orientation from the
/// eigen-decomposition of the second central moments. A uniform ellipse of
/// semi-axis `a` has variance `a^2 / 4` along that axis, so `a = 2 sqrt(l1)`.
pub fn fit_ellipse(contour: &Contour) -> EllipseFit {
    fit_pixels(&contour.pixels)
}

pub(crate) fn fit_pixels(pixels: &[(u32, u32)]) -> EllipseFit {
    let n = pixels.len() as f64;
    if pixels.is_empty() {
        return EllipseFit {
            centroid_px: [0.0, 0.0],
            semi_axes_px: [MIN_SEMI_AXIS_PX, MIN_SEMI_AXIS_PX],
            orientation_rad: 0.0,
            area_px: 0.0,
            eccentricity: 0.0,
            degenerate: true,
        };
    }
    let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        mu20 += dx * dx;
        mu02 += dy * dy;
        mu11 += dx * dy;
    }
    mu20 /= n;
    mu02 /= n;
    mu11 /= n;
    let mean = 0.5 * (mu20 + mu02);
    let root = (0.25 * (mu20 - mu02).powi(2) + mu11 * mu11).sqrt();
    let l1 = mean + root;
    let l2 = (mean - root).max(0.0);
    let mut a = 2.0 * l1.sqrt();
    let mut b = 2.0 * l2.sqrt();
    let degenerate = b < MIN_SEMI_AXIS_PX;
    if degenerate {
        b = MIN_SEMI_AXIS_PX;
        a = a.max(MIN_SEMI_AXIS_PX);
    }
    EllipseFit {
        centroid_px: [cx, cy],
        semi_axes_px: [a, b],
        orientation_rad: 0.5 * (2.0 * mu11).atan2(mu20 - mu02),
        area_px: n,
        eccentricity: (1.0 - (b / a).powi(2)).max(0.0).sqrt(),
        degenerate,
    }
}

/// Size first, then shape.
pub fn classify_stain(fit: &EllipseFit, cfg: &ClassifierConfig) -> StainClass {
    if fit.area_px > cfg.transfer_area_px {
        StainClass::TransferSmear
    } else if fit.eccentricity > cfg.eccentricity_threshold {
        StainClass::ActiveSpatter
    } else {
        StainClass::PassiveDrip
    }
}
