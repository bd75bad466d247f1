use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

use super::route::{Occupancy, CRAFT_RADIUS_M};
use super::{Action, Path, PlannerError, Waypoint};
use crate::geometry::{Rect, Vec2};
use crate::sensors::CameraModel;
use crate::world::{FloorPlan, Scene};

/// How far the outermost footprints reach past the room edge, so evidence
/// against a wall survives small tracking errors.
pub const DEFAULT_EDGE_MARGIN_M: f64 = 0.15;
/// Closest a planned capture may sit to a room edge.
const WALL_STANDOFF_M: f64 = 0.3;
const REVISIT_DWELL_S: f64 = 2.0;
// nominal timing used to truncate random walks at their budget
const WALK_CRUISE_MPS: f64 = 0.3;
const WALK_TURN_S: f64 = 3.0;

fn check_altitude(plan: &FloorPlan, z: f64) -> Result<(), PlannerError> {
    if !(z > 0.0 && z < plan.ceiling_height_m) {
        return Err(PlannerError::Infeasible(format!(
            "altitude {z} m must lie below the {} m ceiling",
            plan.ceiling_height_m
        )));
    }
    let tallest = plan.max_obstacle_height();
    if z <= tallest {
        return Err(PlannerError::Infeasible(format!(
            "altitude {z} m is not above the tallest obstacle ({tallest} m)"
        )));
    }
    Ok(())
}

fn check_overlap(v: f64) -> Result<(), PlannerError> {
    if !(0.0..=0.9).contains(&v) {
        return Err(PlannerError::Config(format!("overlap {v} outside [0, 0.9]")));
    }
    Ok(())
}

/// Rectangles swept one after another: the plan's rooms, or its interior.
fn regions(plan: &FloorPlan) -> Result<Vec<Rect>, PlannerError> {
    let interior = plan
        .interior_bounds()
        .ok_or_else(|| PlannerError::Infeasible("floor plan has no free space".into()))?;
    if plan.rooms.is_empty() {
        return Ok(vec![interior]);
    }
    Ok(plan
        .rooms
        .iter()
        .map(|r| {
            Rect::new(
                r.bounds.min.x.max(interior.min.x),
                r.bounds.min.y.max(interior.min.y),
                r.bounds.max.x.min(interior.max.x),
                r.bounds.max.y.min(interior.max.y),
            )
        })
        .filter(|r| r.width() > 0.0 && r.height() > 0.0)
        .collect())
}

/// Evenly spread stations on `[a0, a1]`, the outer ones `edge` inside the
/// ends, at most `step` apart and never fewer than `min_count`.
fn stations(a0: f64, a1: f64, edge: f64, step: f64, min_count: usize) -> Vec<f64> {
    let (lo, hi) = (a0 + edge, a1 - edge);
    if hi - lo <= 1e-9 {
        return vec![0.5 * (a0 + a1)];
    }
    let n = (((hi - lo) / step - 1e-9).ceil() as usize + 1).max(min_count).max(2);
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

struct Footprint {
    width: f64,
    depth: f64,
    edge_w: f64,
    edge_d: f64,
}

fn footprint(cam: &CameraModel, z: f64) -> Result<Footprint, PlannerError> {
    cam.validate()?;
    let (width, depth) = cam.footprint_size(z);
    Ok(Footprint {
        width,
        depth,
        edge_w: (0.5 * width - DEFAULT_EDGE_MARGIN_M).max(WALL_STANDOFF_M),
        edge_d: (0.5 * depth - DEFAULT_EDGE_MARGIN_M).max(WALL_STANDOFF_M),
    })
}

/// Joins goal waypoints into a flyable path: goals in blocked space are
/// dropped, and segments without line of sight get routed transit points.
fn assemble(path: &mut Path, goals: Vec<Waypoint>, grid: &Occupancy) {
    for goal in goals {
        let p = goal.position_m.xy();
        if !grid.is_free(p) {
            continue;
        }
        let Some(prev) = path.waypoints.last().copied() else {
            path.waypoints.push(goal);
            continue;
        };
        let Some(route) = grid.route(prev.position_m.xy(), p) else {
            continue;
        };
        let mut from = prev.position_m.xy();
        for q in &route[..route.len() - 1] {
            let heading = (q.y - from.y).atan2(q.x - from.x);
            path.waypoints.push(Waypoint::new(*q, goal.position_m.z, heading, Action::Transit));
            from = *q;
        }
        path.waypoints.push(goal);
    }
}

/// Boustrophedon sweep. Lanes are laid out one after another along each
/// room's longer axis (each lane crossing the room), spaced at most
/// `footprint_width * (1 - overlap)` apart; a room no wider than the
/// footprint gets a single lane down its long axis. Captures along a lane
/// are at most `footprint_depth * (1 - overlap)` apart.
pub fn plan_snake(plan: &FloorPlan, cam: &CameraModel, altitude_m: f64, overlap: f64) -> Result<Path, PlannerError> {
    check_altitude(plan, altitude_m)?;
    check_overlap(overlap)?;
    let fp = footprint(cam, altitude_m)?;
    let spacing = fp.width * (1.0 - overlap);
    let capture_step = fp.depth * (1.0 - overlap);
    let grid = Occupancy::new(plan, altitude_m, CRAFT_RADIUS_M);

    let mut path = Path::new("snake");
    let mut goals = Vec::new();
    let mut total_lanes = 0usize;
    let mut pitch = 0.0f64;
    for r in regions(plan)? {
        let long_is_x = r.width() >= r.height();
        // (start, end) of the axis lanes are stacked along, and of the lane axis
        let (mut stack, mut run) = if long_is_x { ((r.min.x, r.max.x), (r.min.y, r.max.y)) } else { ((r.min.y, r.max.y), (r.min.x, r.max.x)) };
        let short = run.1 - run.0;
        let single = fp.width >= short;
        if single {
            std::mem::swap(&mut stack, &mut run);
        }
        let lanes = if single {
            vec![0.5 * (stack.0 + stack.1)]
        } else {
            let len = stack.1 - stack.0;
            let min_lanes = ((len / spacing) - 1e-9).ceil() as usize;
            stations(stack.0, stack.1, fp.edge_w, spacing, min_lanes)
        };
        if lanes.len() > 1 {
            pitch = pitch.max(lanes[1] - lanes[0]);
        }
        total_lanes += lanes.len();
        let along = stations(run.0, run.1, fp.edge_d, capture_step, 1);
        // lanes run along x exactly when they are stacked along y
        let lanes_run_x = single == long_is_x;
        for (k, &c) in lanes.iter().enumerate() {
            let forward = k % 2 == 0;
            let heading = match (lanes_run_x, forward) {
                (true, true) => 0.0,
                (true, false) => PI,
                (false, true) => FRAC_PI_2,
                (false, false) => -FRAC_PI_2,
            };
            let order: Vec<f64> = if forward { along.clone() } else { along.iter().rev().copied().collect() };
            for a in order {
                let xy = if lanes_run_x { Vec2::new(a, c) } else { Vec2::new(c, a) };
                goals.push(Waypoint::new(xy, altitude_m, heading, Action::Capture));
            }
        }
    }
    assemble(&mut path, goals, &grid);
    if path.waypoints.is_empty() {
        return Err(PlannerError::Infeasible("no capture position is reachable".into()));
    }
    path.params.insert("altitude_m".into(), altitude_m);
    path.params.insert("overlap".into(), overlap);
    path.params.insert("footprint_width_m".into(), fp.width);
    path.params.insert("footprint_depth_m".into(), fp.depth);
    path.params.insert("lane_spacing_m".into(), spacing);
    path.params.insert("lane_pitch_m".into(), pitch);
    path.params.insert("capture_spacing_m".into(), capture_step);
    path.params.insert("lanes".into(), total_lanes as f64);
    Ok(path)
}

/// Rectangular inward spiral per room with the snake's spacing rule; the
/// innermost ring collapses onto the room's center line.
pub fn plan_spiral(plan: &FloorPlan, cam: &CameraModel, altitude_m: f64, overlap: f64) -> Result<Path, PlannerError> {
    check_altitude(plan, altitude_m)?;
    check_overlap(overlap)?;
    let fp = footprint(cam, altitude_m)?;
    let spacing = fp.width * (1.0 - overlap);
    let capture_step = fp.depth * (1.0 - overlap);
    let grid = Occupancy::new(plan, altitude_m, CRAFT_RADIUS_M);

    let mut path = Path::new("spiral");
    let mut goals = Vec::new();
    let mut total_rings = 0usize;
    for r in regions(plan)? {
        let (long, short) = (r.width().max(r.height()), r.width().min(r.height()));
        if long <= fp.width && short <= fp.depth {
            // the whole room fits one frame: face across the long axis
            let heading = if r.width() >= r.height() { FRAC_PI_2 } else { 0.0 };
            goals.push(Waypoint::new(r.center(), altitude_m, heading, Action::Capture));
            total_rings += 1;
            continue;
        }
        let half = 0.5 * short;
        let e = fp.edge_w;
        let insets: Vec<f64> = if half <= e {
            vec![half]
        } else {
            let n = ((half / spacing) - 1e-9).ceil().max(((half - e) / spacing - 1e-9).ceil() + 1.0) as usize;
            (0..n).map(|k| e + (half - e) * k as f64 / (n - 1) as f64).collect()
        };
        total_rings += insets.len();
        for (k, &o) in insets.iter().enumerate() {
            let (xa, xb, ya, yb) = (r.min.x + o, r.max.x - o, r.min.y + o, r.max.y - o);
            let flat_x = xb - xa <= 1e-9;
            let flat_y = yb - ya <= 1e-9;
            let mut push_edge = |from: Vec2, to: Vec2, inclusive: bool| {
                let len = from.distance(to);
                let heading = (to.y - from.y).atan2(to.x - from.x);
                let n = ((len / capture_step) - 1e-9).ceil().max(1.0) as usize;
                let last = if inclusive { n } else { n - 1 };
                for j in 0..=last {
                    let p = from + (to - from) * (j as f64 / n as f64);
                    goals.push(Waypoint::new(p, altitude_m, heading, Action::Capture));
                }
            };
            if flat_x && flat_y {
                goals.push(Waypoint::new(Vec2::new(xa, ya), altitude_m, 0.0, Action::Capture));
            } else if flat_x || flat_y {
                push_edge(Vec2::new(xa.min(xb), ya.min(yb)), Vec2::new(xa.max(xb), ya.max(yb)), true);
            } else {
                let next = insets.get(k + 1).map(|n| n - o).unwrap_or(0.0).min(yb - ya);
                push_edge(Vec2::new(xa, ya), Vec2::new(xb, ya), false);
                push_edge(Vec2::new(xb, ya), Vec2::new(xb, yb), false);
                push_edge(Vec2::new(xb, yb), Vec2::new(xa, yb), false);
                push_edge(Vec2::new(xa, yb), Vec2::new(xa, ya + next), next > 0.0);
            }
        }
    }
    assemble(&mut path, goals, &grid);
    if path.waypoints.is_empty() {
        return Err(PlannerError::Infeasible("no capture position is reachable".into()));
    }
    path.params.insert("altitude_m".into(), altitude_m);
    path.params.insert("overlap".into(), overlap);
    path.params.insert("lane_spacing_m".into(), spacing);
    path.params.insert("rings".into(), total_rings as f64);
    Ok(path)
}

/// Free distance along `dir` from `p` before the grid is blocked.
fn free_run(grid: &Occupancy, p: Vec2, dir: Vec2, max: f64, step: f64) -> f64 {
    let mut d = 0.0;
    while d + step <= max && grid.is_free(p + dir * (d + step)) {
        d += step;
    }
    d
}

/// Seeded random walk: straight segments of random length and heading,
/// mirrored off walls, with captures along each segment; stops before the
/// nominal flight time would exceed `budget_s`.
pub fn plan_random_walk(
    plan: &FloorPlan,
    cam: &CameraModel,
    altitude_m: f64,
    budget_s: f64,
    seed: u64,
) -> Result<Path, PlannerError> {
    check_altitude(plan, altitude_m)?;
    if !(budget_s > 0.0) {
        return Err(PlannerError::Config(format!("budget must be positive, got {budget_s}")));
    }
    let fp = footprint(cam, altitude_m)?;
    let capture_step = 0.75 * fp.depth;
    let grid = Occupancy::new(plan, altitude_m, CRAFT_RADIUS_M + 0.1);
    let start = plan
        .spawn_point(0.5)
        .and_then(|p| grid.nearest_free(p))
        .ok_or_else(|| PlannerError::Infeasible("no free start position".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heading: f64 = rng.random_range(-PI..PI);
    let mut path = Path::new("random-walk");
    path.waypoints.push(Waypoint::new(start, altitude_m, heading, Action::Capture));
    let probe = 0.5 * plan.cell_size_m;
    let mut pos = start;
    let mut t = 0.0;
    'walk: loop {
        let mut chosen = None;
        for attempt in 0..32 {
            let theta = if attempt == 0 { heading } else { rng.random_range(-PI..PI) };
            let room = free_run(&grid, pos, Vec2::from_angle(theta), 6.0, probe);
            if room >= 0.5 {
                let want: f64 = rng.random_range(1.0..4.0);
                chosen = Some((theta, want.min(room), want > room));
                break;
            }
        }
        let Some((theta, len, hit_wall)) = chosen else { break };
        let dt = WALK_TURN_S + len / WALK_CRUISE_MPS;
        if t + dt > budget_s {
            break;
        }
        t += dt;
        let dir = Vec2::from_angle(theta);
        let n = ((len / capture_step) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            let p = pos + dir * (len * k as f64 / n as f64);
            if !grid.is_free(p) {
                break 'walk;
            }
            path.waypoints.push(Waypoint::new(p, altitude_m, theta, Action::Capture));
        }
        pos = pos + dir * len;
        heading = if hit_wall {
            // mirror about whichever axis is blocked next
            let bx = !grid.is_free(pos + Vec2::new(dir.x.signum() * 0.2, 0.0));
            let by = !grid.is_free(pos + Vec2::new(0.0, dir.y.signum() * 0.2));
            let (rx, ry) = match (bx, by) {
                (true, false) => (-dir.x, dir.y),
                (false, true) => (dir.x, -dir.y),
                _ => (-dir.x, -dir.y),
            };
            ry.atan2(rx) + rng.random_range(-0.3..0.3)
        } else {
            rng.random_range(-PI..PI)
        };
    }
    path.params.insert("altitude_m".into(), altitude_m);
    path.params.insert("budget_s".into(), budget_s);
    path.params.insert("nominal_duration_s".into(), t);
    path.params.insert("seed".into(), seed as f64);
    Ok(path)
}

/// Visiting order that always flies to the closest remaining point.
pub fn nearest_neighbor_order(start: Vec2, points: &[Vec2]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut order = Vec::with_capacity(points.len());
    let mut cur = start;
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| cur.distance(points[*a.1]).total_cmp(&cur.distance(points[*b.1])))
            .expect("non-empty");
        let k = left.remove(pos);
        order.push(k);
        cur = points[k];
    }
    order
}

/// Length of the open tour from `start` through `points` in `order`.
pub fn tour_length(start: Vec2, points: &[Vec2], order: &[usize]) -> f64 {
    let mut cur = start;
    let mut total = 0.0;
    for &k in order {
        total += cur.distance(points[k]);
        cur = points[k];
    }
    total
}

/// High-altitude snake, then low-altitude revisits of `detections` in
/// nearest-neighbor order from where the snake ends.
pub fn plan_two_phase(
    scene: &Scene,
    cam: &CameraModel,
    high_alt_m: f64,
    low_alt_m: f64,
    overlap: f64,
    detections: &[Vec2],
) -> Result<Path, PlannerError> {
    if !(low_alt_m < high_alt_m) {
        return Err(PlannerError::Config(format!(
            "low altitude {low_alt_m} must be below high altitude {high_alt_m}"
        )));
    }
    let plan = &scene.floor_plan;
    check_altitude(plan, low_alt_m)?;
    let mut path = plan_snake(plan, cam, high_alt_m, overlap)?;
    path.planner = "two-phase".into();
    path.params.insert("low_altitude_m".into(), low_alt_m);
    path.params.insert("detections".into(), detections.len() as f64);
    if detections.is_empty() {
        return Ok(path);
    }
    let low = Occupancy::new(plan, low_alt_m, CRAFT_RADIUS_M);
    let high = Occupancy::new(plan, high_alt_m, CRAFT_RADIUS_M);
    let targets: Vec<Vec2> = detections.iter().filter_map(|d| low.nearest_free(*d)).collect();
    let end = *path.waypoints.last().expect("snake is non-empty");
    let end_xy = end.position_m.xy();

    // descend at the nearest point that is clear down to the low altitude
    let drop = low
        .nearest_free(end_xy)
        .ok_or_else(|| PlannerError::Infeasible("nowhere to descend".into()))?;
    if drop != end_xy {
        assemble(&mut path, vec![Waypoint::new(drop, high_alt_m, end.heading_rad, Action::Transit)], &high);
    }
    let heading = path.waypoints.last().expect("non-empty").heading_rad;
    path.waypoints.push(Waypoint::new(drop, low_alt_m, heading, Action::Transit));

    let goals = nearest_neighbor_order(drop, &targets)
        .into_iter()
        .map(|k| {
            let mut w = Waypoint::new(targets[k], low_alt_m, 0.0, Action::Revisit);
            w.dwell_s = REVISIT_DWELL_S;
            w
        })
        .collect::<Vec<_>>();
    let mut prev = drop;
    let mut with_heading = Vec::with_capacity(goals.len());
    for mut g in goals {
        let p = g.position_m.xy();
        if p.distance(prev) > 1e-9 {
            g.heading_rad = (p.y - prev.y).atan2(p.x - prev.x);
        }
        prev = p;
        with_heading.push(g);
    }
    assemble(&mut path, with_heading, &low);
    Ok(path)
}
