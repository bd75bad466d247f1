use std::path::PathBuf;

use clap::Args;
use csa_core::stains::{
    annotate, classify_sheet, evaluate_classification, synthesize_stain_sheet, ClassificationReport, ClassifierConfig,
    Prediction, SheetParams, StainClass, StainGroundTruth, StainRaster,
};
use serde_json::json;

use crate::{read_file, table, to_json, write_file, CliError, CliResult, Format, Global, Output};

#[derive(Debug, Args)]
pub struct StainArgs {
    /// Image to classify (PNG or JPEG).
    #[arg(long, conflicts_with = "synthesize")]
    pub input: Option<PathBuf>,
    /// Ground truth for --input, as written by --synthesize.
    #[arg(long, requires = "input")]
    pub truth: Option<PathBuf>,
    /// Draw a sheet instead of reading one.
    #[arg(long)]
    pub synthesize: bool,
    #[arg(long, default_value_t = 6)]
    pub passive: usize,
    #[arg(long, default_value_t = 14)]
    pub active: usize,
    #[arg(long, default_value_t = 7)]
    pub transfer: usize,
    #[arg(long, default_value_t = 2)]
    pub distractors: usize,
    /// 0 keeps stains clear of the thresholds, 1 spreads them across.
    #[arg(long, default_value_t = 0.0)]
    pub margin_shrink: f64,
    #[arg(long)]
    pub eccentricity_threshold: Option<f64>,
    #[arg(long)]
    pub transfer_area: Option<f64>,
    #[arg(long, default_value_t = 15.0)]
    pub match_radius: f64,
}

pub fn run(g: &Global, a: &StainArgs) -> CliResult<Output> {
    let mut out = Output::default();
    let mut cfg = ClassifierConfig::default();
    if let Some(e) = a.eccentricity_threshold {
        cfg.eccentricity_threshold = e;
    }
    if let Some(t) = a.transfer_area {
        cfg.transfer_area_px = t;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let raster = if a.synthesize {
        let (seed, defaulted) = g.seed_or_default();
        if defaulted {
            out.notes.push("no --seed given, using seed 0".into());
        }
        let params = SheetParams {
            passive: a.passive,
            active: a.active,
            transfer: a.transfer,
            distractors: a.distractors,
            margin_shrink: a.margin_shrink,
            // drawn around the default thresholds so that changing the
            // classifier's thresholds reclassifies the same sheet
            ..SheetParams::default()
        };
        synthesize_stain_sheet(&params, seed).map_err(|e| CliError::Usage(e.to_string()))?
    } else if let Some(path) = &a.input {
        let mut r = StainRaster::from_image_bytes(&read_file(path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if let Some(tp) = &a.truth {
            r.truths = serde_json::from_slice::<Vec<StainGroundTruth>>(&read_file(tp)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", tp.display())))?;
        }
        r
    } else {
        return Err(CliError::Usage("one of --input or --synthesize is required".into()));
    };

    let (contours, fits, classes) = classify_sheet(&raster, &cfg);
    let preds: Vec<Prediction> =
        fits.iter().zip(&classes).map(|(f, c)| Prediction { centroid_px: f.centroid_px, class: *c }).collect();
    let mut report = evaluate_classification(&preds, &raster.truths, a.match_radius);
    report.transfer_area_px = cfg.transfer_area_px;
    report.eccentricity_threshold = cfg.eccentricity_threshold;
    let has_truth = !raster.truths.is_empty();

    if let Some(dir) = &g.out {
        let annotated = annotate(&raster, &contours, &classes).map_err(|e| CliError::Internal(e.to_string()))?;
        write_file(&dir.join("annotated.png"), &annotated)?;
        write_file(&dir.join("report.json"), to_json(&report)?.as_bytes())?;
        if a.synthesize {
            let png = raster.to_png().map_err(|e| CliError::Internal(e.to_string()))?;
            write_file(&dir.join("sheet.png"), &png)?;
            write_file(&dir.join("truth.json"), to_json(&raster.truths)?.as_bytes())?;
        }
    }
    out.stdout = match g.format {
        Format::Json => to_json(&json!({
            "predicted": count_by_class(&classes),
            "has_truth": has_truth,
            "report": report,
        }))?,
        Format::Table => render(&report, &classes, has_truth),
    };
    Ok(out)
}

fn count_by_class(classes: &[StainClass]) -> serde_json::Map<String, serde_json::Value> {
    StainClass::ALL
        .iter()
        .map(|c| (c.to_string(), json!(classes.iter().filter(|x| *x == c).count())))
        .collect()
}

fn render(report: &ClassificationReport, classes: &[StainClass], has_truth: bool) -> String {
    let mut text = String::new();
    let counts: Vec<String> =
        StainClass::ALL.iter().map(|c| format!("{c} {}", classes.iter().filter(|x| *x == c).count())).collect();
    text.push_str(&format!("{} clusters: {}\n", classes.len(), counts.join(", ")));
    if !has_truth {
        text.push_str("no ground truth, accuracy not computed\n");
        return text;
    }
    let mut rows = vec![{
        let mut h = vec!["truth \\ predicted".to_string()];
        h.extend(StainClass::ALL.iter().map(|c| c.to_string()));
        h
    }];
    for (t, c) in StainClass::ALL.iter().enumerate() {
        let mut row = vec![c.to_string()];
        row.extend(report.confusion[t].iter().map(|n| n.to_string()));
        rows.push(row);
    }
    text.push_str(&table(&rows));
    text.push_str(&format!(
        "accuracy on true blood: {}/{} = {:.1}%\n",
        report.correct,
        report.matched_blood + report.missed,
        100.0 * report.accuracy_on_true_blood
    ));
    text.push_str(&format!(
        "accuracy including false positives: {}/{} = {:.1}%\n",
        report.correct,
        report.matched_blood + report.missed + report.false_positives,
        100.0 * report.accuracy_including_false_positives
    ));
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_cover_every_class() {
        let c = count_by_class(&[StainClass::ActiveSpatter, StainClass::ActiveSpatter, StainClass::NotBlood]);
        assert_eq!(c.len(), 4);
        assert_eq!(c["active_spatter"], 2);
        assert_eq!(c["passive_drip"], 0);
    }
}
