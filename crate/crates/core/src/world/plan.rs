use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::WorldError;
use crate::geometry::{Rect, Vec2};

pub const DEFAULT_CELL_SIZE_M: f64 = 0.05;
pub const DEFAULT_CEILING_M: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Free,
    Wall,
    Obstacle { height_m: f64 },
}

/// Named rectangular region used by the planners to sweep a plan room by room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    pub bounds: Rect,
}

/// Occupancy/height grid of a single-storey floor plan.
///
/// Cell `(i, j)` covers `x in [i*c, (i+1)*c)` and `y in [j*c, (j+1)*c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    pub name: String,
    pub cell_size_m: f64,
    pub width_cells: usize,
    pub height_cells: usize,
    pub ceiling_height_m: f64,
    pub rooms: Vec<Room>,
    cells: Vec<Cell>,
}

impl FloorPlan {
    /// A plan with every cell free except the boundary ring of walls.
    pub fn empty(
        name: &str,
        width_cells: usize,
        height_cells: usize,
        cell_size_m: f64,
        ceiling_height_m: f64,
    ) -> Self {
        let mut cells = vec![Cell::Free; width_cells * height_cells];
        for j in 0..height_cells {
            for i in 0..width_cells {
                if i == 0 || j == 0 || i + 1 == width_cells || j + 1 == height_cells {
                    cells[j * width_cells + i] = Cell::Wall;
                }
            }
        }
        let mut plan = Self {
            name: name.to_string(),
            cell_size_m,
            width_cells,
            height_cells,
            ceiling_height_m,
            rooms: Vec::new(),
            cells,
        };
        if let Some(b) = plan.interior_bounds() {
            plan.rooms.push(Room {
                name: "main".into(),
                bounds: b,
            });
        }
        plan
    }

    /// Rectangular room whose free interior measures `width_m` x `depth_m`.
    pub fn rectangle(name: &str, width_m: f64, depth_m: f64, ceiling_m: f64, cell_m: f64) -> Self {
        let w = (width_m / cell_m).round() as usize + 2;
        let h = (depth_m / cell_m).round() as usize + 2;
        Self::empty(name, w, h, cell_m, ceiling_m)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width_cells + i
    }

    pub fn cell(&self, i: usize, j: usize) -> Cell {
        self.cells[self.index(i, j)]
    }

    pub fn set_cell(&mut self, i: usize, j: usize, cell: Cell) {
        let k = self.index(i, j);
        self.cells[k] = cell;
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Marks every cell whose center lies in `r` with `cell`.
    pub fn fill_rect(&mut self, r: Rect, cell: Cell) {
        for j in 0..self.height_cells {
            for i in 0..self.width_cells {
                if r.contains(self.cell_center(i, j)) {
                    self.set_cell(i, j, cell);
                }
            }
        }
    }

    pub fn extent(&self) -> Rect {
        Rect::new(
            0.0,
            0.0,
            self.width_cells as f64 * self.cell_size_m,
            self.height_cells as f64 * self.cell_size_m,
        )
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            (i as f64 + 0.5) * self.cell_size_m,
            (j as f64 + 0.5) * self.cell_size_m,
        )
    }

    pub fn cell_rect(&self, i: usize, j: usize) -> Rect {
        let c = self.cell_size_m;
        Rect::new(i as f64 * c, j as f64 * c, (i + 1) as f64 * c, (j + 1) as f64 * c)
    }

    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        if !(p.x >= 0.0 && p.y >= 0.0) {
            return None;
        }
        let i = (p.x / self.cell_size_m).floor() as usize;
        let j = (p.y / self.cell_size_m).floor() as usize;
        (i < self.width_cells && j < self.height_cells).then_some((i, j))
    }

    pub fn cell_at(&self, p: Vec2) -> Option<Cell> {
        self.cell_of(p).map(|(i, j)| self.cell(i, j))
    }

    /// True when a point at height `z` inside cell `p` is solid.
    pub fn is_solid(&self, p: Vec2, z: f64) -> bool {
        match self.cell_at(p) {
            None | Some(Cell::Wall) => true,
            Some(Cell::Obstacle { height_m }) => z < height_m,
            Some(Cell::Free) => false,
        }
    }

    pub fn is_wall(&self, p: Vec2) -> bool {
        matches!(self.cell_at(p), None | Some(Cell::Wall))
    }

    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.height_cells {
            for i in 0..self.width_cells {
                if self.cell(i, j) == Cell::Free {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn free_area_m2(&self) -> f64 {
        self.free_cells().len() as f64 * self.cell_size_m * self.cell_size_m
    }

    pub fn max_obstacle_height(&self) -> f64 {
        self.cells
            .iter()
            .filter_map(|c| match c {
                Cell::Obstacle { height_m } => Some(*height_m),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    /// Bounding box of all non-wall cells.
    pub fn interior_bounds(&self) -> Option<Rect> {
        let (mut i0, mut j0, mut i1, mut j1) = (usize::MAX, usize::MAX, 0, 0);
        for j in 0..self.height_cells {
            for i in 0..self.width_cells {
                if self.cell(i, j) != Cell::Wall {
                    i0 = i0.min(i);
                    j0 = j0.min(j);
                    i1 = i1.max(i);
                    j1 = j1.max(j);
                }
            }
        }
        if i0 == usize::MAX {
            return None;
        }
        let c = self.cell_size_m;
        Some(Rect::new(
            i0 as f64 * c,
            j0 as f64 * c,
            (i1 + 1) as f64 * c,
            (j1 + 1) as f64 * c,
        ))
    }

    /// A free point with at least `clearance` of free cells around it,
    /// preferring the center of the first room.
    pub fn spawn_point(&self, clearance: f64) -> Option<Vec2> {
        let preferred = self
            .rooms
            .first()
            .map(|r| r.bounds.center())
            .or_else(|| self.interior_bounds().map(|b| b.center()))?;
        let clear = |p: Vec2| {
            let n = (clearance / self.cell_size_m).ceil() as i64;
            let Some((ci, cj)) = self.cell_of(p) else {
                return false;
            };
            for dj in -n..=n {
                for di in -n..=n {
                    let (i, j) = (ci as i64 + di, cj as i64 + dj);
                    if i < 0 || j < 0 || i as usize >= self.width_cells || j as usize >= self.height_cells {
                        return false;
                    }
                    if self.cell(i as usize, j as usize) != Cell::Free {
                        return false;
                    }
                }
            }
            true
        };
        if clear(preferred) {
            return Some(preferred);
        }
        self.free_cells()
            .into_iter()
            .map(|(i, j)| self.cell_center(i, j))
            .filter(|p| clear(*p))
            .min_by(|a, b| {
                a.distance(preferred)
                    .partial_cmp(&b.distance(preferred))
                    .unwrap()
            })
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let invalid = |reason: String| WorldError::Validation { item: None, reason };
        if self.width_cells == 0 || self.height_cells == 0 {
            return Err(invalid("floor plan has zero cells".into()));
        }
        if self.cells.len() != self.width_cells * self.height_cells {
            return Err(invalid("cell count does not match dimensions".into()));
        }
        if !(self.cell_size_m > 0.0) || !(self.ceiling_height_m > 0.0) {
            return Err(invalid("cell size and ceiling height must be positive".into()));
        }
        for j in 0..self.height_cells {
            for i in 0..self.width_cells {
                let c = self.cell(i, j);
                let boundary =
                    i == 0 || j == 0 || i + 1 == self.width_cells || j + 1 == self.height_cells;
                if boundary && c != Cell::Wall {
                    return Err(invalid(format!("boundary cell ({i}, {j}) is not a wall")));
                }
                if let Cell::Obstacle { height_m } = c {
                    if !(height_m > 0.0 && height_m <= self.ceiling_height_m) {
                        return Err(invalid(format!(
                            "obstacle at ({i}, {j}) has height {height_m} outside (0, ceiling]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn to_doc(&self) -> FloorPlanDoc {
        let mut legend: Vec<(u64, char)> = Vec::new();
        let mut rows = Vec::with_capacity(self.height_cells);
        for j in 0..self.height_cells {
            let mut row = String::with_capacity(self.width_cells);
            for i in 0..self.width_cells {
                row.push(match self.cell(i, j) {
                    Cell::Free => '.',
                    Cell::Wall => '#',
                    Cell::Obstacle { height_m } => {
                        let bits = height_m.to_bits();
                        match legend.iter().find(|(b, _)| *b == bits) {
                            Some((_, ch)) => *ch,
                            None => {
                                let ch = LEGEND_CHARS[legend.len() % LEGEND_CHARS.len()] as char;
                                legend.push((bits, ch));
                                ch
                            }
                        }
                    }
                });
            }
            rows.push(row);
        }
        FloorPlanDoc {
            name: self.name.clone(),
            cell_size_m: self.cell_size_m,
            width_cells: self.width_cells,
            height_cells: self.height_cells,
            ceiling_height_m: self.ceiling_height_m,
            obstacle_heights: legend
                .into_iter()
                .map(|(bits, ch)| (ch.to_string(), f64::from_bits(bits)))
                .collect(),
            rooms: self.rooms.clone(),
            rows,
        }
    }

    pub(crate) fn from_doc(doc: FloorPlanDoc) -> Result<Self, WorldError> {
        let invalid = |reason: String| WorldError::Validation { item: None, reason };
        if doc.obstacle_heights.len() > LEGEND_CHARS.len() {
            return Err(invalid("too many distinct obstacle heights".into()));
        }
        if doc.rows.len() != doc.height_cells {
            return Err(invalid(format!(
                "expected {} rows, found {}",
                doc.height_cells,
                doc.rows.len()
            )));
        }
        let mut cells = Vec::with_capacity(doc.width_cells * doc.height_cells);
        for (j, row) in doc.rows.iter().enumerate() {
            if row.chars().count() != doc.width_cells {
                return Err(invalid(format!("row {j} has wrong width")));
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '.' => Cell::Free,
                    '#' => Cell::Wall,
                    other => {
                        let h = doc
                            .obstacle_heights
                            .get(&other.to_string())
                            .ok_or_else(|| invalid(format!("unknown cell symbol `{other}`")))?;
                        Cell::Obstacle { height_m: *h }
                    }
                });
            }
        }
        let plan = FloorPlan {
            name: doc.name,
            cell_size_m: doc.cell_size_m,
            width_cells: doc.width_cells,
            height_cells: doc.height_cells,
            ceiling_height_m: doc.ceiling_height_m,
            rooms: doc.rooms,
            cells,
        };
        plan.validate()?;
        Ok(plan)
    }
}

const LEGEND_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// On-disk form: one string per grid row (row 0 = lowest y), `#` wall,
/// `.` free, any other symbol an obstacle looked up in `obstacle_heights`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct FloorPlanDoc {
    name: String,
    cell_size_m: f64,
    width_cells: usize,
    height_cells: usize,
    ceiling_height_m: f64,
    #[serde(default)]
    obstacle_heights: BTreeMap<String, f64>,
    #[serde(default)]
    rooms: Vec<Room>,
    rows: Vec<String>,
}

impl Serialize for FloorPlan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FloorPlan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = FloorPlanDoc::deserialize(d)?;
        FloorPlan::from_doc(doc).map_err(serde::de::Error::custom)
    }
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 5] = ["hint", "hint-empty", "nfc-villa", "lab-4x3", "lab-20x20"];

/// Built-in floor plans.
pub fn preset(name: &str) -> Result<FloorPlan, WorldError> {
    let c = DEFAULT_CELL_SIZE_M;
    match name {
        // 50 m^2 smart-home lab, modeled as a plain 10 m x 5 m rectangle.
        "hint-empty" => Ok(FloorPlan::rectangle("hint-empty", 10.0, 5.0, DEFAULT_CEILING_M, c)),
        "hint" => {
            let mut p = FloorPlan::rectangle("hint", 10.0, 5.0, DEFAULT_CEILING_M, c);
            // dining table, sofa, bed
            p.fill_rect(Rect::new(2.0, 2.0, 3.2, 2.9), Cell::Obstacle { height_m: 0.75 });
            p.fill_rect(Rect::new(5.5, 4.1, 7.5, 5.0), Cell::Obstacle { height_m: 0.85 });
            p.fill_rect(Rect::new(8.4, 0.1, 10.0, 2.1), Cell::Obstacle { height_m: 0.55 });
            Ok(p)
        }
        "nfc-villa" => Ok(nfc_villa()),
        "lab-4x3" => Ok(FloorPlan::rectangle("lab-4x3", 4.0, 3.0, DEFAULT_CEILING_M, c)),
        "lab-20x20" => Ok(FloorPlan::rectangle("lab-20x20", 20.0, 20.0, 3.0, c)),
        other => Err(WorldError::UnknownPreset(other.to_string())),
    }
}

/// Four-room training house, 12 m x 8 m, one doorway per interior wall segment.
fn nfc_villa() -> FloorPlan {
    let c = DEFAULT_CELL_SIZE_M;
    let mut p = FloorPlan::rectangle("nfc-villa", 12.0, 8.0, DEFAULT_CEILING_M, c);
    // interior coordinates span [c, 12 + c] x [c, 8 + c]
    let (x0, y0) = (c, c);
    let wall_x = x0 + 6.0;
    let wall_y = y0 + 4.0;
    p.fill_rect(Rect::new(wall_x - 0.06, y0, wall_x + 0.06, y0 + 8.0), Cell::Wall);
    p.fill_rect(Rect::new(x0, wall_y - 0.06, x0 + 12.0, wall_y + 0.06), Cell::Wall);
    // doorways
    p.fill_rect(Rect::new(wall_x - 0.06, y0 + 1.5, wall_x + 0.06, y0 + 2.5), Cell::Free);
    p.fill_rect(Rect::new(wall_x - 0.06, y0 + 5.5, wall_x + 0.06, y0 + 6.5), Cell::Free);
    p.fill_rect(Rect::new(x0 + 2.5, wall_y - 0.06, x0 + 3.5, wall_y + 0.06), Cell::Free);
    p.fill_rect(Rect::new(x0 + 8.5, wall_y - 0.06, x0 + 9.5, wall_y + 0.06), Cell::Free);
    // furniture
    p.fill_rect(Rect::new(x0 + 1.0, y0 + 1.0, x0 + 3.0, y0 + 1.9), Cell::Obstacle { height_m: 0.85 });
    p.fill_rect(Rect::new(x0 + 8.0, y0 + 1.5, x0 + 9.2, y0 + 2.4), Cell::Obstacle { height_m: 0.75 });
    p.fill_rect(Rect::new(x0 + 0.2, y0 + 6.0, x0 + 2.2, y0 + 7.8), Cell::Obstacle { height_m: 0.55 });
    p.fill_rect(Rect::new(x0 + 10.5, y0 + 6.8, x0 + 11.8, y0 + 7.8), Cell::Obstacle { height_m: 1.2 });
    let g = 0.1;
    p.rooms = vec![
        Room { name: "living".into(), bounds: Rect::new(x0, y0, wall_x - g, wall_y - g) },
        Room { name: "kitchen".into(), bounds: Rect::new(wall_x + g, y0, x0 + 12.0, wall_y - g) },
        Room { name: "office".into(), bounds: Rect::new(wall_x + g, wall_y + g, x0 + 12.0, y0 + 8.0) },
        Room { name: "bedroom".into(), bounds: Rect::new(x0, wall_y + g, wall_x - g, y0 + 8.0) },
    ];
    p
}
