use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use csa_core::blimp::{BlimpConfig, DriftModel};
use csa_core::geometry::Vec2;
use csa_core::planner::{
    aggregate, detections_from, execute_path_with, format_comparison_table, plan_random_walk, plan_snake,
    plan_spiral, plan_two_phase, plan_wall_follow, wall_start, Action, AggregateMetrics, ExecConfig, PlanMetrics,
    PlannerError, RunLog, WallFollowConfig, WallSide,
};
use csa_core::sensors::{CameraModel, ThermalModel};
use csa_core::world::{generate_scene, lab_trial_spec, load_scene, preset, CrimeSceneSpec, CrimeType, Scene};
use rayon::prelude::*;
use serde::Serialize;

use crate::{read_file, to_json, write_file, CliError, CliResult, Format, Global, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Snake,
    Spiral,
    RandomWalk,
    WallFollow,
    TwoPhase,
}

impl PlannerKind {
    fn name(self) -> &'static str {
        match self {
            PlannerKind::Snake => "snake",
            PlannerKind::Spiral => "spiral",
            PlannerKind::RandomWalk => "random-walk",
            PlannerKind::WallFollow => "wall-follow",
            PlannerKind::TwoPhase => "two-phase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Args)]
pub struct FlyArgs {
    /// Planners to compare, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub planner: Vec<PlannerKind>,
    /// Scene file; the same scene is flown for every seed.
    #[arg(long, conflicts_with_all = ["plan", "lab_trial"])]
    pub scene: Option<PathBuf>,
    /// Preset floor plan; empty unless --crime is given.
    #[arg(long, conflicts_with = "lab_trial")]
    pub plan: Option<String>,
    /// Generate a scene per seed for this crime type on --plan.
    #[arg(long, requires = "plan")]
    pub crime: Option<CrimeType>,
    /// The seven-item set scattered over the 4 m x 3 m lab, one layout per seed.
    #[arg(long)]
    pub lab_trial: bool,
    /// Seeds as `A..B` (half open) or a comma list; defaults to --seed.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, default_value_t = 1.5)]
    pub altitude: f64,
    #[arg(long, default_value_t = 0.25)]
    pub overlap: f64,
    /// Flight budget for random-walk (default 1200 s) and wall-follow (300 s).
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long, default_value_t = 1.8)]
    pub high_altitude: f64,
    #[arg(long, default_value_t = 1.0)]
    pub low_altitude: f64,
    /// Two-phase revisit targets: `auto`, `none` or `x,y;x,y;...` in meters.
    #[arg(long, default_value = "auto")]
    pub detections: String,
    /// Hotspot threshold above ambient for `--detections auto`, deg C.
    #[arg(long, default_value_t = 5.0)]
    pub hotspot_threshold: f64,
    /// Replay the bursts computed for calm air instead of correcting.
    #[arg(long)]
    pub open_loop: bool,
    /// No gusts and no thrust imbalance.
    #[arg(long)]
    pub calm: bool,
    #[arg(long, value_enum, default_value_t = Side::Left)]
    pub wall_side: Side,
}

pub(crate) fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        (a..b).collect()
    } else if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| format!("bad seed `{x}`"))).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err("at least one seed is required".into());
    }
    Ok(seeds)
}

fn parse_points(s: &str) -> Result<Vec<Vec2>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (x, y) = p.split_once(',').ok_or_else(|| format!("bad point `{p}`"))?;
            let x = x.trim().parse().map_err(|_| format!("bad x in `{p}`"))?;
            let y = y.trim().parse().map_err(|_| format!("bad y in `{p}`"))?;
            Ok(Vec2::new(x, y))
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Detections {
    Auto,
    Fixed(Vec<Vec2>),
}

enum SceneSource {
    Fixed(Scene),
    Generated(CrimeType, String),
    Empty(Scene),
    LabTrial,
}

impl SceneSource {
    fn for_seed(&self, seed: u64) -> Result<Scene, String> {
        match self {
            SceneSource::Fixed(s) | SceneSource::Empty(s) => Ok(s.clone()),
            SceneSource::Generated(crime, plan) => {
                let plan = preset(plan).map_err(|e| e.to_string())?;
                generate_scene(&CrimeSceneSpec::with_defaults(*crime, plan, seed)).map_err(|e| e.to_string())
            }
            SceneSource::LabTrial => {
                lab_trial_spec(seed).and_then(|s| generate_scene(&s)).map_err(|e| e.to_string())
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            SceneSource::Fixed(s) => format!("file ({})", s.floor_plan.name),
            SceneSource::Generated(c, p) => format!("{c} on {p}, generated per seed"),
            SceneSource::Empty(s) => format!("empty {}", s.floor_plan.name),
            SceneSource::LabTrial => "lab trial, generated per seed".into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SeedRun {
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<PlanMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    extra: BTreeMap<String, f64>,
    #[serde(skip)]
    logs: Vec<(String, RunLog)>,
}

#[derive(Debug, Serialize)]
struct PlannerReport {
    planner: PlannerKind,
    runs: Vec<SeedRun>,
    failed: usize,
    aggregate: Option<AggregateMetrics>,
}

#[derive(Debug, Serialize)]
struct FlyReport {
    scene: String,
    seeds: Vec<u64>,
    closed_loop: bool,
    calm: bool,
    planners: Vec<PlannerReport>,
}

struct Ctx<'a> {
    a: &'a FlyArgs,
    cam: CameraModel,
    blimp: BlimpConfig,
    exec: ExecConfig,
    detections: Detections,
}

pub fn run(g: &Global, a: &FlyArgs) -> CliResult<Output> {
    let mut out = Output::default();
    let seeds = match (&a.seeds, g.seed) {
        (Some(s), _) => parse_seeds(s).map_err(CliError::Usage)?,
        (None, Some(s)) => vec![s],
        (None, None) => {
            out.notes.push("no --seed or --seeds given, using seed 0".into());
            vec![0]
        }
    };
    if !(a.overlap >= 0.0 && a.overlap < 1.0) {
        return Err(CliError::Usage(format!("--overlap must lie in [0, 1), got {}", a.overlap)));
    }
    if !(a.altitude > 0.0 && a.high_altitude > 0.0 && a.low_altitude > 0.0) {
        return Err(CliError::Usage("altitudes must be positive".into()));
    }
    if a.budget.is_some_and(|b| !(b > 0.0)) {
        return Err(CliError::Usage("--budget must be positive".into()));
    }
    let detections = match a.detections.as_str() {
        "auto" => Detections::Auto,
        "none" => Detections::Fixed(Vec::new()),
        pts => Detections::Fixed(parse_points(pts).map_err(CliError::Usage)?),
    };
    let source = if let Some(path) = &a.scene {
        let text = String::from_utf8(read_file(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        SceneSource::Fixed(load_scene(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?)
    } else if let Some(plan) = &a.plan {
        match a.crime {
            Some(c) => SceneSource::Generated(c, plan.clone()),
            None => SceneSource::Empty(Scene::empty(preset(plan).map_err(|e| CliError::Usage(e.to_string()))?)),
        }
    } else if a.lab_trial {
        SceneSource::LabTrial
    } else {
        return Err(CliError::Usage("one of --scene, --plan or --lab-trial is required".into()));
    };

    let ctx = Ctx {
        a,
        cam: CameraModel::default(),
        blimp: BlimpConfig::default(),
        exec: ExecConfig { closed_loop: !a.open_loop, ..ExecConfig::default() },
        detections,
    };
    let mut planners = Vec::new();
    for &kind in &a.planner {
        let runs: Vec<SeedRun> = seeds.par_iter().map(|&seed| fly_one(&ctx, &source, kind, seed)).collect();
        let ok: Vec<PlanMetrics> = runs.iter().filter_map(|r| r.metrics.clone()).collect();
        let failed = runs.len() - ok.len();
        let aggregate = (!ok.is_empty()).then(|| aggregate(&ok));
        planners.push(PlannerReport { planner: kind, runs, failed, aggregate });
    }
    let report = FlyReport {
        scene: source.describe(),
        seeds: seeds.clone(),
        closed_loop: !a.open_loop,
        calm: a.calm,
        planners,
    };

    let json = to_json(&report)?;
    let text = render_table(&report);
    if let Some(dir) = &g.out {
        for p in &report.planners {
            for r in &p.runs {
                for (suffix, log) in &r.logs {
                    let file = dir.join(format!("{}-seed{}{suffix}.jsonl", p.planner.name(), r.seed));
                    write_file(&file, log.to_jsonl().as_bytes())?;
                }
            }
        }
        write_file(&dir.join("metrics.json"), json.as_bytes())?;
        write_file(&dir.join("metrics.txt"), text.as_bytes())?;
    }
    if report.planners.iter().all(|p| p.aggregate.is_none()) {
        return Err(CliError::Data(format!("every run failed\n{text}")));
    }
    out.stdout = match g.format {
        Format::Json => json,
        Format::Table => text,
    };
    Ok(out)
}

fn render_table(report: &FlyReport) -> String {
    let rows: Vec<(String, AggregateMetrics)> = report
        .planners
        .iter()
        .filter_map(|p| p.aggregate.clone().map(|a| (p.planner.name().to_string(), a)))
        .collect();
    let mut text = format!(
        "scene: {}; seeds: {}; {}\n",
        report.scene,
        report.seeds.len(),
        if report.closed_loop { "closed loop" } else { "open loop" }
    );
    if !rows.is_empty() {
        text.push_str(&format_comparison_table(&rows));
    }
    for p in &report.planners {
        for r in &p.runs {
            if let Some(e) = &r.error {
                text.push_str(&format!("{} seed {}: {e}\n", p.planner.name(), r.seed));
            }
        }
    }
    text
}

fn fly_one(ctx: &Ctx, source: &SceneSource, kind: PlannerKind, seed: u64) -> SeedRun {
    let mut run = SeedRun { seed, metrics: None, error: None, extra: BTreeMap::new(), logs: Vec::new() };
    match source.for_seed(seed).map_err(|e| format!("scene: {e}")).and_then(|scene| {
        fly_scene(ctx, &scene, kind, seed, &mut run).map_err(|e| e.to_string())
    }) {
        Ok(log) => {
            run.metrics = log.metrics.clone();
            run.logs.push((String::new(), log));
        }
        Err(e) => run.error = Some(e),
    }
    run
}

fn fly_scene(ctx: &Ctx, scene: &Scene, kind: PlannerKind, seed: u64, run: &mut SeedRun) -> Result<RunLog, PlannerError> {
    let a = ctx.a;
    let plan = &scene.floor_plan;
    let drift = if a.calm { DriftModel { seed, ..DriftModel::calm() } } else { DriftModel::with_seed(seed) };
    let path = match kind {
        PlannerKind::Snake => plan_snake(plan, &ctx.cam, a.altitude, a.overlap)?,
        PlannerKind::Spiral => plan_spiral(plan, &ctx.cam, a.altitude, a.overlap)?,
        PlannerKind::RandomWalk => plan_random_walk(plan, &ctx.cam, a.altitude, a.budget.unwrap_or(1200.0), seed)?,
        PlannerKind::WallFollow => {
            let defaults = WallFollowConfig::default();
            let cfg = WallFollowConfig {
                side: if a.wall_side == Side::Left { WallSide::Left } else { WallSide::Right },
                budget_s: a.budget.unwrap_or(defaults.budget_s),
                ..defaults
            };
            let start = wall_start(plan, cfg.side, cfg.altitude_m, cfg.target_m)?;
            let outcome = plan_wall_follow(scene, &ctx.blimp, &drift, &cfg, start, seed)?;
            run.extra.insert("corner_turns".into(), outcome.corner_turns as f64);
            run.extra.insert("laps".into(), outcome.laps as f64);
            run.extra.insert("in_band_fraction".into(), outcome.in_band_fraction);
            return Ok(outcome.log);
        }
        PlannerKind::TwoPhase => {
            let targets = match &ctx.detections {
                Detections::Fixed(p) => p.clone(),
                Detections::Auto => {
                    let thermal = ThermalModel::default();
                    let survey = plan_snake(plan, &ctx.cam, a.high_altitude, a.overlap)?;
                    let exec = ExecConfig { thermal: Some(thermal.clone()), ..ctx.exec.clone() };
                    let log = execute_path_with(scene, &survey, &ctx.blimp, &drift, seed, &exec)?;
                    let found = detections_from(&log, &thermal, a.hotspot_threshold);
                    run.logs.push((".survey".into(), log));
                    found
                }
            };
            run.extra.insert("detections".into(), targets.len() as f64);
            let path = plan_two_phase(scene, &ctx.cam, a.high_altitude, a.low_altitude, a.overlap, &targets)?;
            run.extra.insert("revisits".into(), path.count(Action::Revisit) as f64);
            path
        }
    };
    execute_path_with(scene, &path, &ctx.blimp, &drift, seed, &ctx.exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("a,b").is_err());
    }

    #[test]
    fn point_lists() {
        let p = parse_points("1,2; 3.5,0.25").unwrap();
        assert_eq!(p, vec![Vec2::new(1.0, 2.0), Vec2::new(3.5, 0.25)]);
        assert!(parse_points("1;2").is_err());
    }
}
