use csa_core::blimp::{BlimpConfig, DriftModel};
use csa_core::planner::*;
use csa_core::sensors::{CameraModel, ThermalModel};
use csa_core::world::*;

fn cam() -> CameraModel {
    CameraModel::default()
}

fn open_loop() -> ExecConfig {
    ExecConfig { closed_loop: false, ..Default::default() }
}

fn skipped(log: &RunLog) -> usize {
    log.records
        .iter()
        .flat_map(|r| &r.events)
        .filter(|e| matches!(e, RunEvent::WaypointSkipped { .. }))
        .count()
}

#[test]
fn open_loop_misses_evidence_that_closed_loop_finds() {
    let mut open_total = 0.0;
    let mut closed_total = 0.0;
    let mut any_miss = false;
    for seed in 0..10 {
        let scene = generate_scene(&lab_trial_spec(seed).unwrap()).unwrap();
        assert_eq!(scene.evidence.len(), 7);
        let path = plan_snake(&scene.floor_plan, &cam(), 1.5, 0.25).unwrap();
        let drift = DriftModel::with_seed(seed);
        let cfg = BlimpConfig::default();
        let closed = execute_path(&scene, &path, &cfg, &drift, seed).unwrap();
        let open = execute_path_with(&scene, &path, &cfg, &drift, seed, &open_loop()).unwrap();
        let c = closed.metrics.unwrap().evidence_capture_fraction;
        let o = open.metrics.unwrap().evidence_capture_fraction;
        assert!(c >= o, "seed {seed}: closed {c} < open {o}");
        any_miss |= o < 1.0;
        open_total += o;
        closed_total += c;
    }
    assert!(any_miss);
    assert!(closed_total >= open_total);
}

#[test]
fn spiral_covers_nearly_as_much_as_snake() {
    for name in ["lab-4x3", "hint-empty"] {
        let scene = Scene::empty(preset(name).unwrap());
        let drift = DriftModel::calm();
        let cfg = BlimpConfig::default();
        let snake = execute_path(&scene, &plan_snake(&scene.floor_plan, &cam(), 1.5, 0.25).unwrap(), &cfg, &drift, 1)
            .unwrap()
            .metrics
            .unwrap();
        let spiral = execute_path(&scene, &plan_spiral(&scene.floor_plan, &cam(), 1.5, 0.25).unwrap(), &cfg, &drift, 1)
            .unwrap()
            .metrics
            .unwrap();
        assert!(
            spiral.floor_coverage_fraction >= snake.floor_coverage_fraction - 0.05,
            "{name}: spiral {} snake {}",
            spiral.floor_coverage_fraction,
            snake.floor_coverage_fraction
        );
    }
}

#[test]
fn random_walk_covers_less_than_snake_on_hint() {
    let scene = Scene::empty(preset("hint").unwrap());
    let cfg = BlimpConfig::default();
    let snake_path = plan_snake(&scene.floor_plan, &cam(), 1.5, 0.25).unwrap();
    let mut snake = Vec::new();
    let mut random = Vec::new();
    for seed in 0..20 {
        let drift = DriftModel::with_seed(seed);
        let s = execute_path(&scene, &snake_path, &cfg, &drift, seed).unwrap().metrics.unwrap();
        let walk = plan_random_walk(&scene.floor_plan, &cam(), 1.5, 1200.0, seed).unwrap();
        let r = execute_path(&scene, &walk, &cfg, &drift, seed).unwrap().metrics.unwrap();
        snake.push(s);
        random.push(r);
    }
    let s = aggregate(&snake);
    let r = aggregate(&random);
    assert!(r.mean("floor_coverage_fraction").unwrap() < s.mean("floor_coverage_fraction").unwrap());
    assert!(r.mean("turn_count").unwrap() > s.mean("turn_count").unwrap());
}

#[test]
fn every_default_planner_finishes_within_an_hour() {
    for name in PRESET_NAMES {
        let scene = Scene::empty(preset(name).unwrap());
        let plan = &scene.floor_plan;
        let paths = [
            plan_snake(plan, &cam(), 1.5, 0.25).unwrap(),
            plan_spiral(plan, &cam(), 1.5, 0.25).unwrap(),
            plan_random_walk(plan, &cam(), 1.5, 3600.0, 7).unwrap(),
        ];
        for path in &paths {
            path.validate(plan).unwrap();
            let m = execute_path(&scene, path, &BlimpConfig::default(), &DriftModel::with_seed(7), 7)
                .unwrap()
                .metrics
                .unwrap();
            assert!(m.duration_s <= 3600.0, "{name} {}: {}", path.planner, m.duration_s);
        }
    }
}

#[test]
fn two_phase_revisits_what_the_high_pass_saw() {
    let spec = CrimeSceneSpec::with_defaults(CrimeType::Burglary, preset("hint").unwrap(), 11);
    let scene = generate_scene(&spec).unwrap();
    let cfg = BlimpConfig::default();
    let exec = ExecConfig { thermal: Some(ThermalModel::default()), ..Default::default() };
    let high = plan_snake(&scene.floor_plan, &cam(), 1.8, 0.25).unwrap();
    let first = execute_path_with(&scene, &high, &cfg, &DriftModel::calm(), 11, &exec).unwrap();
    let seen = detections_from(&first, &ThermalModel::default(), 5.0);
    assert!(!seen.is_empty());

    let path = plan_two_phase(&scene, &cam(), 1.8, 1.0, 0.25, &seen).unwrap();
    path.validate(&scene.floor_plan).unwrap();
    let revisits = path.count(Action::Revisit);
    assert!(revisits >= 1 && revisits <= seen.len());
    let log = execute_path(&scene, &path, &cfg, &DriftModel::calm(), 11).unwrap();
    assert_eq!(skipped(&log), 0);
    let m = log.metrics.unwrap();
    assert!(m.vertical_travel_m >= 0.8 - 0.1);
}

#[test]
fn wall_following_laps_the_empty_hint_room() {
    let scene = Scene::empty(preset("hint-empty").unwrap());
    let cfg = WallFollowConfig::default();
    let start = wall_start(&scene.floor_plan, cfg.side, cfg.altitude_m, cfg.target_m).unwrap();
    let out = plan_wall_follow(&scene, &BlimpConfig::default(), &DriftModel::with_seed(3), &cfg, start, 3).unwrap();
    assert!(out.log.aborted.is_none());
    assert!(out.laps >= 1);
    assert!(out.in_band_fraction >= 0.9, "{}", out.in_band_fraction);
    assert!(out.log.duration_s() <= cfg.budget_s + 0.1);
    verify_log(&out.log).unwrap();
}

#[test]
fn comparison_table_has_a_row_per_planner() {
    let scene = Scene::empty(preset("lab-4x3").unwrap());
    let mut rows = Vec::new();
    for (name, path) in [
        ("snake", plan_snake(&scene.floor_plan, &cam(), 1.5, 0.25).unwrap()),
        ("spiral", plan_spiral(&scene.floor_plan, &cam(), 1.5, 0.25).unwrap()),
    ] {
        let runs: Vec<_> = (0..3)
            .map(|s| {
                execute_path(&scene, &path, &BlimpConfig::default(), &DriftModel::with_seed(s), s)
                    .unwrap()
                    .metrics
                    .unwrap()
            })
            .collect();
        rows.push((name.to_string(), aggregate(&runs)));
    }
    let table = format_comparison_table(&rows);
    // header, rule, two rows
    assert_eq!(table.lines().count(), 4);
    assert!(table.contains("snake") && table.contains("spiral"));
}
