use serde::{Deserialize, Serialize};

use super::{StainClass, StainGroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub centroid_px: [f64; 2],
    pub class: StainClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub index: usize,
    pub centroid_px: [f64; 2],
    pub predicted: StainClass,
    pub matched_truth: Option<u32>,
    /// `not_blood` for unmatched predictions and distractor matches.
    pub truth_class: StainClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub predictions: Vec<PredictionRecord>,
    /// `confusion[truth][predicted]`, indexed in `StainClass::ALL` order.
    pub confusion: [[u32; 4]; 4],
    pub matched_blood: u32,
    pub correct: u32,
    pub false_positives: u32,
    /// Blood truths no prediction was matched to.
    pub missed: u32,
    pub accuracy_on_true_blood: f64,
    pub accuracy_including_false_positives: f64,
    pub transfer_area_px: f64,
    pub eccentricity_threshold: f64,
}

impl ClassificationReport {
    /// Aligned text table of the confusion matrix.
    pub fn confusion_table(&self) -> String {
        let names: Vec<String> = StainClass::ALL.iter().map(|c| c.to_string()).collect();
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:>width$} |", "truth \\ pred");
        for n in &names {
            out.push_str(&format!(" {n:>width$}"));
        }
        out.push('\n');
        out.push_str(&"-".repeat(out.len() - 1));
        out.push('\n');
        for (t, n) in names.iter().enumerate() {
            out.push_str(&format!("{n:>width$} |"));
            for p in 0..4 {
                out.push_str(&format!(" {:>width$}", self.confusion[t][p]));
            }
            out.push('\n');
        }
        out
    }
}

/// Greedy one-to-one matching by ascending centroid distance within
/// `match_radius_px`. Unmatched predictions and predictions matched to
/// non-blood truths are false positives.
pub fn evaluate_classification(
    predictions: &[Prediction],
    truths: &[StainGroundTruth],
    match_radius_px: f64,
) -> ClassificationReport {
    let mut pairs = Vec::new();
    for (pi, p) in predictions.iter().enumerate() {
        for (ti, t) in truths.iter().enumerate() {
            let d = ((p.centroid_px[0] - t.center_px[0]).powi(2) + (p.centroid_px[1] - t.center_px[1]).powi(2)).sqrt();
            if d <= match_radius_px {
                pairs.push((d, pi, ti));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_match = vec![None; predictions.len()];
    let mut truth_used = vec![false; truths.len()];
    for (_, pi, ti) in pairs {
        if pred_match[pi].is_none() && !truth_used[ti] {
            pred_match[pi] = Some(ti);
            truth_used[ti] = true;
        }
    }

    let mut confusion = [[0u32; 4]; 4];
    let (mut matched_blood, mut correct, mut false_positives) = (0u32, 0u32, 0u32);
    let mut records = Vec::with_capacity(predictions.len());
    for (pi, p) in predictions.iter().enumerate() {
        let truth = pred_match[pi].map(|ti| &truths[ti]);
        let truth_class = truth.map(|t| t.class).unwrap_or(StainClass::NotBlood);
        confusion[truth_class.index()][p.class.index()] += 1;
        if truth_class.is_blood() {
            matched_blood += 1;
            if truth_class == p.class {
                correct += 1;
            }
        } else {
            false_positives += 1;
        }
        records.push(PredictionRecord {
            index: pi,
            centroid_px: p.centroid_px,
            predicted: p.class,
            matched_truth: truth.map(|t| t.id),
            truth_class,
        });
    }
    let missed = truths
        .iter()
        .zip(&truth_used)
        .filter(|(t, used)| t.class.is_blood() && !**used)
        .count() as u32;
    // nothing to get wrong counts as perfect
    let ratio = |num: u32, den: u32| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    ClassificationReport {
        predictions: records,
        confusion,
        matched_blood,
        correct,
        false_positives,
        missed,
        accuracy_on_true_blood: ratio(correct, matched_blood),
        accuracy_including_false_positives: if matched_blood + false_positives == 0 {
            1.0
        } else {
            correct as f64 / (matched_blood + false_positives) as f64
        },
        transfer_area_px: 0.0,
        eccentricity_threshold: 0.0,
    }
}
