use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::geometry::Vec2;
use crate::world::{Cell, FloorPlan};

/// Obstacles within this distance below the flight altitude are treated as
/// blocking.
pub const OBSTACLE_CLEARANCE_M: f64 = 0.3;
/// Horizontal keep-out radius around blocked cells used for planning.
pub const CRAFT_RADIUS_M: f64 = 0.2;

/// Blocked/free grid of a floor plan at one flight altitude, optionally
/// dilated by a keep-out radius.
#[derive(Debug, Clone)]
pub struct Occupancy {
    cell_m: f64,
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl Occupancy {
    pub fn new(plan: &FloorPlan, altitude_m: f64, radius_m: f64) -> Self {
        let (w, h) = (plan.width_cells, plan.height_cells);
        let mut base = vec![false; w * h];
        for j in 0..h {
            for i in 0..w {
                base[j * w + i] = match plan.cell(i, j) {
                    Cell::Wall => true,
                    Cell::Obstacle { height_m } => height_m > altitude_m - OBSTACLE_CLEARANCE_M,
                    Cell::Free => altitude_m >= plan.ceiling_height_m,
                };
            }
        }
        let n = (radius_m / plan.cell_size_m).ceil() as i64;
        let blocked = if n == 0 {
            base
        } else {
            let r2 = (radius_m / plan.cell_size_m).powi(2);
            let mut out = base.clone();
            for j in 0..h as i64 {
                for i in 0..w as i64 {
                    if !base[j as usize * w + i as usize] {
                        continue;
                    }
                    for dj in -n..=n {
                        for di in -n..=n {
                            if (di * di + dj * dj) as f64 > r2 {
                                continue;
                            }
                            let (x, y) = (i + di, j + dj);
                            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                                out[y as usize * w + x as usize] = true;
                            }
                        }
                    }
                }
            }
            out
        };
        Self { cell_m: plan.cell_size_m, width: w, height: h, blocked }
    }

    fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return None;
        }
        let (i, j) = ((p.x / self.cell_m).floor() as usize, (p.y / self.cell_m).floor() as usize);
        (i < self.width && j < self.height).then_some((i, j))
    }

    fn center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 + 0.5) * self.cell_m, (j as f64 + 0.5) * self.cell_m)
    }

    pub fn is_free(&self, p: Vec2) -> bool {
        self.cell_of(p).is_some_and(|(i, j)| !self.blocked[j * self.width + i])
    }

    /// Samples the segment at quarter-cell steps.
    pub fn line_of_sight(&self, a: Vec2, b: Vec2) -> bool {
        let len = a.distance(b);
        let n = (len / (0.25 * self.cell_m)).ceil().max(1.0) as usize;
        (0..=n).all(|k| self.is_free(a + (b - a) * (k as f64 / n as f64)))
    }

    /// Closest free cell center by breadth-first search, or `p` itself when free.
    pub fn nearest_free(&self, p: Vec2) -> Option<Vec2> {
        if self.is_free(p) {
            return Some(p);
        }
        let start = self.cell_of(p)?;
        let mut seen = vec![false; self.blocked.len()];
        let mut queue = VecDeque::from([start]);
        seen[start.1 * self.width + start.0] = true;
        while let Some((i, j)) = queue.pop_front() {
            if !self.blocked[j * self.width + i] {
                return Some(self.center(i, j));
            }
            for (ni, nj) in self.neighbors4(i, j) {
                let k = nj * self.width + ni;
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back((ni, nj));
                }
            }
        }
        None
    }

    fn neighbors4(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].into_iter().filter_map(move |(di, dj)| {
            let (x, y) = (i as i64 + di, j as i64 + dj);
            (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
                .then_some((x as usize, y as usize))
        })
    }

    /// Collision-free polyline from `a` to `b`: the points after `a`, ending
    /// exactly at `b`. A* over the 8-connected grid, then shortcut by line
    /// of sight.
    pub fn route(&self, a: Vec2, b: Vec2) -> Option<Vec<Vec2>> {
        if !self.is_free(a) || !self.is_free(b) {
            return None;
        }
        if self.line_of_sight(a, b) {
            return Some(vec![b]);
        }
        let cells = self.astar(self.cell_of(a)?, self.cell_of(b)?)?;
        let mut pts: Vec<Vec2> = Vec::with_capacity(cells.len() + 2);
        pts.push(a);
        pts.extend(cells.iter().skip(1).map(|&(i, j)| self.center(i, j)));
        pts.pop();
        pts.push(b);
        // greedy string pulling
        let mut out = Vec::new();
        let mut k = 0;
        while k + 1 < pts.len() {
            let mut next = k + 1;
            for m in (k + 2..pts.len()).rev() {
                if self.line_of_sight(pts[k], pts[m]) {
                    next = m;
                    break;
                }
            }
            out.push(pts[next]);
            k = next;
        }
        Some(out)
    }

    fn astar(&self, start: (usize, usize), goal: (usize, usize)) -> Option<Vec<(usize, usize)>> {
        let w = self.width;
        let idx = |(i, j): (usize, usize)| j * w + i;
        let h = |(i, j): (usize, usize)| {
            let dx = (i as i64 - goal.0 as i64).unsigned_abs();
            let dy = (j as i64 - goal.1 as i64).unsigned_abs();
            10 * dx.max(dy) + 4 * dx.min(dy)
        };
        let mut g = vec![u64::MAX; self.blocked.len()];
        let mut parent = vec![usize::MAX; self.blocked.len()];
        let mut open = BinaryHeap::new();
        g[idx(start)] = 0;
        open.push(Reverse((h(start), idx(start))));
        while let Some(Reverse((_, k))) = open.pop() {
            let (i, j) = (k % w, k / w);
            if (i, j) == goal {
                let mut path = vec![(i, j)];
                let mut cur = k;
                while parent[cur] != usize::MAX {
                    cur = parent[cur];
                    path.push((cur % w, cur / w));
                }
                path.reverse();
                return Some(path);
            }
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (x, y) = (i as i64 + di, j as i64 + dj);
                    if x < 0 || y < 0 || x as usize >= w || y as usize >= self.height {
                        continue;
                    }
                    let n = (x as usize, y as usize);
                    if self.blocked[idx(n)] {
                        continue;
                    }
                    // no corner cutting
                    if di != 0 && dj != 0
                        && (self.blocked[idx((x as usize, j))] || self.blocked[idx((i, y as usize))])
                    {
                        continue;
                    }
                    let cost = g[k] + if di != 0 && dj != 0 { 14 } else { 10 };
                    if cost < g[idx(n)] {
                        g[idx(n)] = cost;
                        parent[idx(n)] = k;
                        open.push(Reverse((cost + h(n), idx(n))));
                    }
                }
            }
        }
        None
    }
}
