//! Synthetic bloodstain sheets and a geometric stain classifier: red-pixel
//! clusters, moment-fitted ellipses, and area/eccentricity rules.

mod eval;
mod extract;
mod synth;

pub use eval::{evaluate_classification, ClassificationReport, Prediction, PredictionRecord};
pub use extract::{classify_stain, extract_red_clusters, fit_ellipse, is_red, Contour, EllipseFit};
pub use synth::{fill_ellipse, synthesize_stain_sheet, SheetParams, StainShape};

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Cursor;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StainError {
    #[error("stain sheet generation failed: {0}")]
    Generation(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StainClass {
    PassiveDrip,
    ActiveSpatter,
    TransferSmear,
    NotBlood,
}

impl StainClass {
    pub const ALL: [StainClass; 4] = [
        StainClass::PassiveDrip,
        StainClass::ActiveSpatter,
        StainClass::TransferSmear,
        StainClass::NotBlood,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_blood(self) -> bool {
        self != StainClass::NotBlood
    }

    /// Contour color used in annotated rasters.
    pub fn color(self) -> [u8; 3] {
        match self {
            StainClass::PassiveDrip => [20, 90, 230],
            StainClass::ActiveSpatter => [10, 170, 40],
            StainClass::TransferSmear => [240, 150, 0],
            StainClass::NotBlood => [160, 0, 200],
        }
    }
}

impl fmt::Display for StainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StainClass::PassiveDrip => "passive_drip",
            StainClass::ActiveSpatter => "active_spatter",
            StainClass::TransferSmear => "transfer_smear",
            StainClass::NotBlood => "not_blood",
        })
    }
}

impl FromStr for StainClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        StainClass::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| format!("unknown stain class `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StainGroundTruth {
    pub id: u32,
    pub class: StainClass,
    pub shape: StainShape,
    /// Centroid of the rendered stain.
    pub center_px: [f64; 2],
    /// Semi-axes `[a, b]` with `a >= b`; for composite shapes, of the
    /// bounding ellipse.
    pub semi_axes_px: [f64; 2],
    pub orientation_rad: f64,
    pub color: [u8; 3],
    /// Set when the stain touches another one on the sheet.
    #[serde(default)]
    pub overlaps: bool,
}

/// RGB sheet with the stains that were drawn on it.
#[derive(Debug, Clone, PartialEq)]
pub struct StainRaster {
    pub width_px: u32,
    pub height_px: u32,
    /// Row-major RGB triples.
    pub pixels: Vec<[u8; 3]>,
    pub truths: Vec<StainGroundTruth>,
    pub seed: u64,
}

pub const SHEET_BACKGROUND: [u8; 3] = [250, 250, 246];

impl StainRaster {
    pub fn blank(width_px: u32, height_px: u32, seed: u64) -> Self {
        Self {
            width_px,
            height_px,
            pixels: vec![SHEET_BACKGROUND; width_px as usize * height_px as usize],
            truths: Vec::new(),
            seed,
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[y as usize * self.width_px as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, c: [u8; 3]) {
        self.pixels[y as usize * self.width_px as usize + x as usize] = c;
    }

    pub fn to_image(&self) -> RgbImage {
        RgbImage::from_fn(self.width_px, self.height_px, |x, y| Rgb(self.get(x, y)))
    }

    pub fn to_png(&self) -> Result<Vec<u8>, StainError> {
        encode_png(&self.to_image())
    }

    /// Loads pixels from an encoded image; ground truth is not stored in
    /// the image and comes back empty.
    pub fn from_image_bytes(bytes: &[u8]) -> Result<Self, StainError> {
        let img = image::load_from_memory(bytes).map_err(|e| StainError::Image(e.to_string()))?.to_rgb8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width_px: w,
            height_px: h,
            pixels: img.pixels().map(|p| p.0).collect(),
            truths: Vec::new(),
            seed: 0,
        })
    }
}

fn encode_png(img: &RgbImage) -> Result<Vec<u8>, StainError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).map_err(|e| StainError::Image(e.to_string()))?;
    Ok(out.into_inner())
}

/// Draws each contour boundary in its predicted-class color and each truth
/// as a black bounding rectangle.
pub fn annotate(raster: &StainRaster, contours: &[Contour], predicted: &[StainClass]) -> Result<Vec<u8>, StainError> {
    let mut img = raster.to_image();
    for (contour, class) in contours.iter().zip(predicted) {
        for &(x, y) in &contour.boundary {
            img.put_pixel(x, y, Rgb(class.color()));
        }
    }
    let (w, h) = (raster.width_px as i64, raster.height_px as i64);
    for t in &raster.truths {
        let r = t.semi_axes_px[0] + 3.0;
        let x0 = ((t.center_px[0] - r).floor() as i64).clamp(0, w - 1);
        let x1 = ((t.center_px[0] + r).ceil() as i64).clamp(0, w - 1);
        let y0 = ((t.center_px[1] - r).floor() as i64).clamp(0, h - 1);
        let y1 = ((t.center_px[1] + r).ceil() as i64).clamp(0, h - 1);
        for x in x0..=x1 {
            img.put_pixel(x as u32, y0 as u32, Rgb([0, 0, 0]));
            img.put_pixel(x as u32, y1 as u32, Rgb([0, 0, 0]));
        }
        for y in y0..=y1 {
            img.put_pixel(x0 as u32, y as u32, Rgb([0, 0, 0]));
            img.put_pixel(x1 as u32, y as u32, Rgb([0, 0, 0]));
        }
    }
    encode_png(&img)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Red window: hue within `hue_half_width_deg` of 0 degrees.
    pub hue_half_width_deg: f64,
    pub min_saturation: f64,
    pub min_value: f64,
    pub min_area_px: usize,
    pub transfer_area_px: f64,
    pub eccentricity_threshold: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hue_half_width_deg: 20.0,
            min_saturation: 0.5,
            min_value: 0.2,
            min_area_px: 30,
            transfer_area_px: 5000.0,
            eccentricity_threshold: 0.85,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), StainError> {
        if !(self.hue_half_width_deg > 0.0 && self.hue_half_width_deg < 180.0) {
            return Err(StainError::Config("hue window must lie in (0, 180) degrees".into()));
        }
        if !(self.transfer_area_px > 0.0 && self.min_area_px > 0) {
            return Err(StainError::Config("area thresholds must be positive".into()));
        }
        if !(self.eccentricity_threshold > 0.0 && self.eccentricity_threshold < 1.0) {
            return Err(StainError::Config("eccentricity threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Extract, fit and classify every red cluster on the sheet.
pub fn classify_sheet(raster: &StainRaster, cfg: &ClassifierConfig) -> (Vec<Contour>, Vec<EllipseFit>, Vec<StainClass>) {
    let contours = extract_red_clusters(raster, cfg);
    let fits: Vec<EllipseFit> = contours.iter().map(fit_ellipse).collect();
    let classes = fits.iter().map(|f| classify_stain(f, cfg)).collect();
    (contours, fits, classes)
}

/// Full pipeline against the sheet's own ground truth.
pub fn evaluate_sheet(raster: &StainRaster, cfg: &ClassifierConfig, match_radius_px: f64) -> ClassificationReport {
    let (_, fits, classes) = classify_sheet(raster, cfg);
    let preds: Vec<Prediction> = fits
        .iter()
        .zip(&classes)
        .map(|(f, c)| Prediction { centroid_px: f.centroid_px, class: *c })
        .collect();
    let mut report = evaluate_classification(&preds, &raster.truths, match_radius_px);
    report.transfer_area_px = cfg.transfer_area_px;
    report.eccentricity_threshold = cfg.eccentricity_threshold;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_names_round_trip() {
        for c in StainClass::ALL {
            assert_eq!(c.to_string().parse::<StainClass>(), Ok(c));
            assert_eq!(serde_json::to_value(c).unwrap(), serde_json::Value::String(c.to_string()));
        }
    }

    #[test]
    fn png_round_trip_preserves_pixels() {
        let sheet = synthesize_stain_sheet(&SheetParams { passive: 3, active: 2, transfer: 1, ..Default::default() }, 4)
            .unwrap();
        let back = StainRaster::from_image_bytes(&sheet.to_png().unwrap()).unwrap();
        assert_eq!(back.pixels, sheet.pixels);
        assert!(StainRaster::from_image_bytes(b"not an image").is_err());
    }

    #[test]
    fn annotation_marks_contours() {
        let sheet = synthesize_stain_sheet(&SheetParams { passive: 2, ..Default::default() }, 1).unwrap();
        let cfg = ClassifierConfig::default();
        let (contours, _, classes) = classify_sheet(&sheet, &cfg);
        let png = annotate(&sheet, &contours, &classes).unwrap();
        let img = image::load_from_memory(&png).unwrap().to_rgb8();
        let (x, y) = contours[0].boundary[0];
        assert_eq!(img.get_pixel(x, y).0, StainClass::PassiveDrip.color());
    }
}
