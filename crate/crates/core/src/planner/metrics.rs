use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::RunLog;
use crate::blimp::BurstDirection;
use crate::geometry::{convex_intersection_area, point_in_polygon, polygon_area, Vec2};
use crate::world::{Cell, FloorPlan, Scene};

/// A run of rotation bursts counts as a turn when its net angle reaches this.
pub const TURN_MIN_NET_DEG: f64 = 45.0;

/// Per-cell tally of how often the camera saw each floor cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub width_cells: usize,
    pub height_cells: usize,
    pub times_seen: Vec<u32>,
    pub first_seen_s: Vec<Option<f64>>,
}

impl CoverageMap {
    pub fn new(plan: &FloorPlan) -> Self {
        let n = plan.width_cells * plan.height_cells;
        Self {
            width_cells: plan.width_cells,
            height_cells: plan.height_cells,
            times_seen: vec![0; n],
            first_seen_s: vec![None; n],
        }
    }

    /// Marks every cell whose center lies inside `footprint`.
    pub fn integrate(&mut self, plan: &FloorPlan, footprint: &[Vec2], time_s: f64) {
        if footprint.len() < 3 {
            return;
        }
        let c = plan.cell_size_m;
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in footprint {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let clamp_i = |v: f64, n: usize| (v.max(0.0) as usize).min(n.saturating_sub(1));
        let (i0, i1) = (clamp_i((x0 / c).floor(), self.width_cells), clamp_i((x1 / c).floor(), self.width_cells));
        let (j0, j1) = (clamp_i((y0 / c).floor(), self.height_cells), clamp_i((y1 / c).floor(), self.height_cells));
        for j in j0..=j1 {
            for i in i0..=i1 {
                if point_in_polygon(plan.cell_center(i, j), footprint) {
                    let k = j * self.width_cells + i;
                    self.times_seen[k] += 1;
                    self.first_seen_s[k].get_or_insert(time_s);
                }
            }
        }
    }

    /// Seen fraction of the free floor cells.
    pub fn covered_fraction(&self, plan: &FloorPlan) -> f64 {
        let (seen, total) = self.free_tally(plan);
        if total == 0 {
            0.0
        } else {
            seen.len() as f64 / total as f64
        }
    }

    /// Mean times_seen over covered free cells.
    pub fn redundancy(&self, plan: &FloorPlan) -> f64 {
        let (seen, _) = self.free_tally(plan);
        if seen.is_empty() {
            0.0
        } else {
            seen.iter().map(|&k| self.times_seen[k] as f64).sum::<f64>() / seen.len() as f64
        }
    }

    fn free_tally(&self, plan: &FloorPlan) -> (Vec<usize>, usize) {
        let mut seen = Vec::new();
        let mut total = 0;
        for (k, cell) in plan.cells().iter().enumerate() {
            if *cell == Cell::Free {
                total += 1;
                if self.times_seen[k] > 0 {
                    seen.push(k);
                }
            }
        }
        (seen, total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub floor_coverage_fraction: f64,
    pub evidence_capture_fraction: f64,
    pub mean_consecutive_overlap_fraction: f64,
    pub turn_count: u32,
    pub vertical_travel_m: f64,
    pub duration_s: f64,
    pub energy_mah: f64,
    pub redundancy: f64,
    pub evidence_captured: u32,
    pub evidence_total: u32,
    pub frames: u32,
    pub truncated: bool,
}

impl PlanMetrics {
    /// Numeric fields by name, in a fixed order.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("floor_coverage_fraction", self.floor_coverage_fraction),
            ("evidence_capture_fraction", self.evidence_capture_fraction),
            ("mean_consecutive_overlap_fraction", self.mean_consecutive_overlap_fraction),
            ("turn_count", self.turn_count as f64),
            ("vertical_travel_m", self.vertical_travel_m),
            ("duration_s", self.duration_s),
            ("energy_mah", self.energy_mah),
            ("redundancy", self.redundancy),
            ("evidence_captured", self.evidence_captured as f64),
        ]
    }
}

/// Turns are maximal runs of rotation bursts not interrupted by a
/// forward/backward burst; small heading trims do not count.
fn count_turns(log: &RunLog) -> u32 {
    let per_deg = log.header.blimp.rotation_per_burst_deg;
    let mut net = 0.0f64;
    let mut turns = 0u32;
    let mut close = |net: &mut f64| {
        if net.abs() >= TURN_MIN_NET_DEG - 1e-9 {
            turns += 1;
        }
        *net = 0.0;
    };
    for cmd in log.records.iter().flat_map(|r| &r.commands) {
        match cmd.direction {
            BurstDirection::RotateLeft => net += per_deg * cmd.scale(),
            BurstDirection::RotateRight => net -= per_deg * cmd.scale(),
            BurstDirection::Forward | BurstDirection::Backward => close(&mut net),
            BurstDirection::Up | BurstDirection::Down => {}
        }
    }
    close(&mut net);
    turns
}

/// Scores a run. Coverage integrates every camera frame in the log;
/// evidence counts distinct captured ids against the scene's items (an
/// empty scene scores 1).
pub fn compute_metrics(log: &RunLog, scene: &Scene) -> PlanMetrics {
    let plan = &scene.floor_plan;
    let mut map = CoverageMap::new(plan);
    let mut captured = BTreeSet::new();
    let mut feet: Vec<&[Vec2]> = Vec::new();
    for r in &log.records {
        if let Some(f) = &r.camera {
            map.integrate(plan, &f.footprint_m, f.time_s);
            captured.extend(f.captured_ids.iter().copied());
            feet.push(&f.footprint_m);
        }
    }
    let known: BTreeSet<u32> = scene.evidence.iter().map(|e| e.id).collect();
    let hit = captured.intersection(&known).count() as u32;
    let total = known.len() as u32;

    let overlaps: Vec<f64> = feet
        .windows(2)
        .map(|w| {
            let smaller = polygon_area(w[0]).min(polygon_area(w[1]));
            if smaller > 0.0 {
                (convex_intersection_area(w[0], w[1]) / smaller).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    let overlap = if overlaps.is_empty() { 0.0 } else { overlaps.iter().sum::<f64>() / overlaps.len() as f64 };

    let vertical = log
        .records
        .windows(2)
        .map(|w| (w[1].state.position_m.z - w[0].state.position_m.z).abs())
        .sum();
    let energy = match (log.records.first(), log.records.last()) {
        (Some(a), Some(b)) => b.state.battery.drawn_mah - a.state.battery.drawn_mah,
        _ => 0.0,
    };

    PlanMetrics {
        floor_coverage_fraction: map.covered_fraction(plan),
        evidence_capture_fraction: if total == 0 { 1.0 } else { hit as f64 / total as f64 },
        mean_consecutive_overlap_fraction: overlap,
        turn_count: count_turns(log),
        vertical_travel_m: vertical,
        duration_s: log.duration_s(),
        energy_mah: energy,
        redundancy: map.redundancy(plan),
        evidence_captured: hit,
        evidence_total: total,
        frames: feet.len() as u32,
        truncated: log.truncated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub runs: usize,
    pub fields: BTreeMap<String, FieldStats>,
    /// Captured items over all runs divided by items over all runs.
    pub pooled_evidence_capture_fraction: f64,
}

impl AggregateMetrics {
    pub fn mean(&self, field: &str) -> Option<f64> {
        self.fields.get(field).map(|s| s.mean)
    }
}

pub fn aggregate(runs: &[PlanMetrics]) -> AggregateMetrics {
    let mut fields = BTreeMap::new();
    if let Some(first) = runs.first() {
        for (k, (name, _)) in first.fields().into_iter().enumerate() {
            let xs: Vec<f64> = runs.iter().map(|m| m.fields()[k].1).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            fields.insert(name.to_string(), FieldStats { mean, sd, min, max });
        }
    }
    let hit: u64 = runs.iter().map(|m| m.evidence_captured as u64).sum();
    let total: u64 = runs.iter().map(|m| m.evidence_total as u64).sum();
    AggregateMetrics {
        runs: runs.len(),
        fields,
        pooled_evidence_capture_fraction: if total == 0 { 1.0 } else { hit as f64 / total as f64 },
    }
}

/// Aligned `mean ± sd` table, one row per labelled aggregate.
pub fn format_comparison_table(rows: &[(String, AggregateMetrics)]) -> String {
    let cols = [
        ("coverage", "floor_coverage_fraction", 3),
        ("evidence", "evidence_capture_fraction", 3),
        ("overlap", "mean_consecutive_overlap_fraction", 3),
        ("turns", "turn_count", 1),
        ("vert_m", "vertical_travel_m", 2),
        ("time_s", "duration_s", 1),
        ("mAh", "energy_mah", 1),
    ];
    let mut table: Vec<Vec<String>> = Vec::new();
    let mut head = vec!["planner".to_string(), "runs".to_string()];
    head.extend(cols.iter().map(|c| c.0.to_string()));
    table.push(head);
    for (label, agg) in rows {
        let mut row = vec![label.clone(), agg.runs.to_string()];
        for (_, field, prec) in cols {
            row.push(match agg.fields.get(field) {
                Some(s) => format!("{:.p$} ± {:.p$}", s.mean, s.sd, p = prec),
                None => "-".into(),
            });
        }
        table.push(row);
    }
    let widths: Vec<usize> =
        (0..table[0].len()).map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (k, row) in table.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| {
                let pad = w - s.chars().count();
                if c == 0 { format!("{s}{}", " ".repeat(pad)) } else { format!("{}{s}", " ".repeat(pad)) }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if k == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blimp::{BlimpConfig, BlimpState, CommandBurst, DriftModel};
    use crate::geometry::Vec3;
    use crate::planner::{RunHeader, RunRecord};
    use crate::sensors::{camera_capture, CameraModel};
    use crate::world::{default7, generate_heap, preset};

    fn log_for(scene: &Scene) -> RunLog {
        let h = RunHeader::new(scene, "test", 0, &BlimpConfig::default(), &DriftModel::calm(), &CameraModel::default(), 0.1);
        RunLog::new(h)
    }

    fn rec(t: f64, pos: Vec3, heading: f64) -> RunRecord {
        let mut s = BlimpState::at_rest(pos, heading, &BlimpConfig::default());
        s.time_s = t;
        RunRecord::new(s)
    }

    #[test]
    fn stationary_frame_covers_its_area() {
        let scene = Scene::empty(preset("hint-empty").unwrap());
        let mut log = log_for(&scene);
        let mut r = rec(0.0, Vec3::new(5.0, 2.5, 1.5), 0.0);
        r.camera = Some(camera_capture(&scene, &r.state, &CameraModel::default()));
        log.push(r).unwrap();
        let m = compute_metrics(&log, &scene);
        let (w, d) = CameraModel::default().footprint_size(1.5);
        assert!((m.floor_coverage_fraction - w * d / 50.0).abs() < 0.005, "{}", m.floor_coverage_fraction);
        assert_eq!(m.redundancy, 1.0);
        assert_eq!(m.mean_consecutive_overlap_fraction, 0.0);
        assert_eq!(m.evidence_capture_fraction, 1.0);
    }

    #[test]
    fn no_frames_zero_coverage() {
        let scene = generate_heap(&default7(), (6, 6), 0.15).unwrap();
        let mut log = log_for(&scene);
        log.push(rec(0.0, Vec3::new(1.0, 1.0, 1.0), 0.0)).unwrap();
        let m = compute_metrics(&log, &scene);
        assert_eq!(m.floor_coverage_fraction, 0.0);
        assert_eq!(m.evidence_capture_fraction, 0.0);
        assert_eq!(m.frames, 0);
    }

    #[test]
    fn turns_need_net_rotation() {
        let scene = Scene::empty(preset("lab-4x3").unwrap());
        let mut log = log_for(&scene);
        let seq: [&[(BurstDirection, u32)]; 5] = [
            &[(BurstDirection::RotateLeft, 1200), (BurstDirection::RotateLeft, 600)],
            &[(BurstDirection::Forward, 300)],
            // trims that cancel
            &[(BurstDirection::RotateLeft, 600), (BurstDirection::RotateRight, 600)],
            &[(BurstDirection::Backward, 300), (BurstDirection::RotateRight, 900)],
            &[(BurstDirection::Up, 300), (BurstDirection::RotateRight, 300)],
        ];
        for (k, cmds) in seq.iter().enumerate() {
            let mut r = rec(k as f64, Vec3::new(1.0, 1.0, 1.0), 0.0);
            r.commands = cmds.iter().map(|(d, ms)| CommandBurst::new(*d, *ms)).collect();
            log.push(r).unwrap();
        }
        // 90 left, then 0, then 45 + 15 right across an up burst
        assert_eq!(count_turns(&log), 2);
    }

    #[test]
    fn overlap_of_identical_frames_is_one() {
        let scene = Scene::empty(preset("hint-empty").unwrap());
        let mut log = log_for(&scene);
        for k in 0..3 {
            let mut r = rec(k as f64, Vec3::new(5.0, 2.5, 1.5), 0.0);
            r.camera = Some(camera_capture(&scene, &r.state, &CameraModel::default()));
            log.push(r).unwrap();
        }
        let m = compute_metrics(&log, &scene);
        assert!((m.mean_consecutive_overlap_fraction - 1.0).abs() < 1e-12);
        assert_eq!(m.redundancy, 3.0);
    }

    fn with_captures(captured: u32, total: u32) -> PlanMetrics {
        PlanMetrics {
            floor_coverage_fraction: 0.5,
            evidence_capture_fraction: captured as f64 / total as f64,
            mean_consecutive_overlap_fraction: 0.3,
            turn_count: 4,
            vertical_travel_m: 0.0,
            duration_s: 10.0,
            energy_mah: 1.0,
            redundancy: 1.0,
            evidence_captured: captured,
            evidence_total: total,
            frames: 3,
            truncated: false,
        }
    }

    #[test]
    fn mean_of_five_point_two_of_seven() {
        let runs: Vec<_> = [5, 5, 6, 5, 5].into_iter().map(|c| with_captures(c, 7)).collect();
        let agg = aggregate(&runs);
        let mean = agg.mean("evidence_capture_fraction").unwrap();
        assert!((mean - 26.0 / 35.0).abs() < 1e-12);
        assert!((100.0 * mean - 74.3).abs() < 0.1);
        assert!((100.0 * agg.pooled_evidence_capture_fraction - 74.3).abs() < 0.1);
        assert!((agg.mean("evidence_captured").unwrap() - 5.2).abs() < 1e-12);
        let s = agg.fields["evidence_captured"];
        assert_eq!((s.min, s.max), (5.0, 6.0));
        // sample sd of [5,5,6,5,5]
        assert!((s.sd - (0.8f64 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pooled_and_per_run_differ_with_unequal_totals() {
        let agg = aggregate(&[with_captures(1, 1), with_captures(0, 3)]);
        assert_eq!(agg.mean("evidence_capture_fraction"), Some(0.5));
        assert_eq!(agg.pooled_evidence_capture_fraction, 0.25);
    }

    #[test]
    fn table_is_aligned() {
        let t = format_comparison_table(&[
            ("snake".into(), aggregate(&[with_captures(5, 7)])),
            ("random-walk".into(), aggregate(&[with_captures(3, 7), with_captures(4, 7)])),
        ]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("planner"));
        assert!(lines[3].starts_with("random-walk"));
        assert!(t.contains("±"));
    }
}
