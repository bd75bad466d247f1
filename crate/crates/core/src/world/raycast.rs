use serde::{Deserialize, Serialize};

use super::{Cell, FloorPlan, Scene, WorldError};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Floor,
    Ceiling,
    Wall,
    ObstacleSide,
    ObstacleTop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance_m: f64,
    pub surface: Surface,
    /// Outward unit normal of the surface that was hit.
    pub normal: [f64; 3],
}

/// Distance along a unit `direction` from `origin` to the first solid surface.
pub fn raycast(scene: &Scene, origin: [f64; 3], direction: [f64; 3]) -> Result<Option<f64>, WorldError> {
    Ok(raycast_plan(&scene.floor_plan, origin, direction)?.map(|h| h.distance_m))
}

/// Grid traversal (Amanatides-Woo) in the floor plane, with the floor,
/// ceiling and obstacle tops intersected analytically per cell.
pub fn raycast_plan(plan: &FloorPlan, origin: [f64; 3], direction: [f64; 3]) -> Result<Option<RayHit>, WorldError> {
    let [x0, y0, z0] = origin;
    let [dx, dy, dz] = direction;
    let len = (dx * dx + dy * dy + dz * dz).sqrt();
    if !(len.is_finite() && (len - 1.0).abs() < 1e-6) {
        return Err(WorldError::Domain("ray direction must be a unit vector".into()));
    }
    let h_ceil = plan.ceiling_height_m;
    let p = Vec2::new(x0, y0);
    if !plan.extent().contains(p) || !(0.0..=h_ceil).contains(&z0) {
        return Err(WorldError::Domain(format!("ray origin ({x0}, {y0}, {z0}) outside the plan volume")));
    }
    let Some((mut i, mut j)) = plan.cell_of(p) else {
        return Err(WorldError::Domain("ray origin outside the plan grid".into()));
    };
    match plan.cell(i, j) {
        Cell::Wall => return Err(WorldError::Domain("ray origin inside a wall".into())),
        Cell::Obstacle { height_m } if z0 < height_m => {
            return Err(WorldError::Domain("ray origin inside an obstacle".into()))
        }
        _ => {}
    }

    let plane_hit = if dz < 0.0 {
        Some(RayHit { distance_m: -z0 / dz, surface: Surface::Floor, normal: [0.0, 0.0, 1.0] })
    } else if dz > 0.0 {
        Some(RayHit { distance_m: (h_ceil - z0) / dz, surface: Surface::Ceiling, normal: [0.0, 0.0, -1.0] })
    } else {
        None
    };

    let c = plan.cell_size_m;
    let step_i: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_j: i64 = if dy > 0.0 { 1 } else { -1 };
    let mut t_max_x = if dx != 0.0 {
        let edge = if dx > 0.0 { (i + 1) as f64 * c } else { i as f64 * c };
        (edge - x0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        let edge = if dy > 0.0 { (j + 1) as f64 * c } else { j as f64 * c };
        (edge - y0) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { c / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { c / dy.abs() } else { f64::INFINITY };

    let mut t_enter = 0.0;
    let mut entry_normal = [0.0; 3];
    let max_steps = 4 * (plan.width_cells + plan.height_cells) + 8;
    for _ in 0..max_steps {
        let t_exit = t_max_x.min(t_max_y);
        match plan.cell(i, j) {
            Cell::Wall => {
                return Ok(Some(RayHit { distance_m: t_enter, surface: Surface::Wall, normal: entry_normal }));
            }
            Cell::Obstacle { height_m } => {
                if z0 + dz * t_enter < height_m {
                    return Ok(Some(RayHit {
                        distance_m: t_enter,
                        surface: Surface::ObstacleSide,
                        normal: entry_normal,
                    }));
                }
                if dz < 0.0 {
                    let t_top = (height_m - z0) / dz;
                    if t_top <= t_exit {
                        return Ok(Some(RayHit {
                            distance_m: t_top.max(t_enter),
                            surface: Surface::ObstacleTop,
                            normal: [0.0, 0.0, 1.0],
                        }));
                    }
                }
            }
            Cell::Free => {}
        }
        if let Some(hit) = plane_hit {
            if hit.distance_m <= t_exit {
                return Ok(Some(hit));
            }
        }
        if !t_exit.is_finite() {
            return Ok(None);
        }
        // advance to the neighbouring cell
        if t_max_x < t_max_y {
            let ni = i as i64 + step_i;
            if ni < 0 || ni as usize >= plan.width_cells {
                return Ok(None);
            }
            i = ni as usize;
            t_enter = t_max_x;
            t_max_x += t_delta_x;
            entry_normal = [-(step_i as f64), 0.0, 0.0];
        } else {
            let nj = j as i64 + step_j;
            if nj < 0 || nj as usize >= plan.height_cells {
                return Ok(None);
            }
            j = nj as usize;
            t_enter = t_max_y;
            t_max_y += t_delta_y;
            entry_normal = [0.0, -(step_j as f64), 0.0];
        }
    }
    Ok(None)
}
