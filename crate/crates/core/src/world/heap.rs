use std::f64::consts::FRAC_PI_2;

use super::{EvidenceItem, EvidenceKind, FloorPlan, Scene, WorldError, DEFAULT_AMBIENT_C, DEFAULT_CEILING_M};
use crate::geometry::Vec2;

/// Cell block `(cols, rows)` an item needs on a heap grid of `cell_m` cells.
pub fn heap_block_cells(kind: &EvidenceKind, cell_m: f64) -> (usize, usize) {
    let n = |len: f64| ((len / cell_m) - 1e-9).ceil().max(1.0) as usize;
    (n(kind.footprint_m[0]), n(kind.footprint_m[1]))
}

/// Packs all items into one heap: largest block first (ties keep input
/// order), each anchored at the first row-major cell where it fits. An item
/// that fits nowhere unrotated is tried again turned by 90 degrees.
///
/// The heap grid is surrounded by a one-cell wall ring, so heap cell
/// `(c, r)` is plan cell `(c + 1, r + 1)`.
pub fn generate_heap(items: &[EvidenceKind], grid: (usize, usize), cell_m: f64) -> Result<Scene, WorldError> {
    let (cols, rows) = grid;
    if cols == 0 || rows == 0 {
        return Err(WorldError::Domain("heap grid dimensions must be positive".into()));
    }
    if !(cell_m > 0.0) {
        return Err(WorldError::Domain("heap cell size must be positive".into()));
    }
    let plan = FloorPlan::empty("heap", cols + 2, rows + 2, cell_m, DEFAULT_CEILING_M);

    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&k| {
        let (w, d) = heap_block_cells(&items[k], cell_m);
        std::cmp::Reverse(w * d)
    });

    let mut used = vec![false; cols * rows];
    let mut evidence = Vec::with_capacity(items.len());
    for (id, &k) in order.iter().enumerate() {
        let kind = &items[k];
        kind.validate()
            .map_err(|reason| WorldError::Placement { item: kind.name.to_string(), reason })?;
        let (w, d) = heap_block_cells(kind, cell_m);
        let fits_grid = |bw: usize, bd: usize| bw <= cols && bd <= rows;
        if !fits_grid(w, d) && !fits_grid(d, w) {
            return Err(WorldError::Placement {
                item: kind.name.to_string(),
                reason: format!("needs {w}x{d} cells but the heap grid is {cols}x{rows}"),
            });
        }
        let spot = first_fit(&used, cols, rows, w, d)
            .map(|a| (a, w, d, 0.0))
            .or_else(|| first_fit(&used, cols, rows, d, w).map(|a| (a, d, w, FRAC_PI_2)));
        let Some(((c0, r0), bw, bd, theta)) = spot else {
            return Err(WorldError::Placement {
                item: kind.name.to_string(),
                reason: "no room left in the heap grid".into(),
            });
        };
        for r in r0..r0 + bd {
            for c in c0..c0 + bw {
                used[r * cols + c] = true;
            }
        }
        let center = Vec2::new(
            (c0 as f64 + 1.0 + bw as f64 / 2.0) * cell_m,
            (r0 as f64 + 1.0 + bd as f64 / 2.0) * cell_m,
        );
        evidence.push(EvidenceItem {
            id: id as u32,
            kind: kind.clone(),
            position_m: center,
            orientation_rad: theta,
            touched_at_s: None,
            displaced: false,
        });
    }

    Ok(Scene {
        floor_plan: plan,
        evidence,
        ambient_temp_c: DEFAULT_AMBIENT_C,
        seed: 0,
    })
}

fn first_fit(used: &[bool], cols: usize, rows: usize, w: usize, d: usize) -> Option<(usize, usize)> {
    if w > cols || d > rows {
        return None;
    }
    for r in 0..=rows - d {
        for c in 0..=cols - w {
            let free = (r..r + d).all(|rr| (c..c + w).all(|cc| !used[rr * cols + cc]));
            if free {
                return Some((c, r));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{default7, KindName, MassClass};

    fn square(label: &str, side_cells: f64, cell: f64) -> EvidenceKind {
        EvidenceKind {
            name: KindName::Other(label.into()),
            footprint_m: [side_cells * cell, side_cells * cell],
            mass_class: MassClass::Medium,
            scatterable: false,
        }
    }

    fn anchor(scene: &Scene, id: u32, bw: usize, bd: usize) -> (usize, usize) {
        let e = scene.item(id).unwrap();
        let c = scene.floor_plan.cell_size_m;
        let c0 = (e.position_m.x / c - bw as f64 / 2.0 - 1.0).round() as usize;
        let r0 = (e.position_m.y / c - bd as f64 / 2.0 - 1.0).round() as usize;
        (c0, r0)
    }

    #[test]
    fn four_one_one_into_three_by_three() {
        // Hand-packed: the 2x2 block takes (0,0)-(1,1); row-major scanning then
        // finds (2,0) for the first 1x1 and (2,1) for the second.
        let cell = 0.1;
        let items = vec![square("a", 1.0, cell), square("big", 2.0, cell), square("b", 1.0, cell)];
        let scene = generate_heap(&items, (3, 3), cell).unwrap();
        assert_eq!(scene.evidence[0].kind.name, KindName::Other("big".into()));
        assert_eq!(anchor(&scene, 0, 2, 2), (0, 0));
        assert_eq!(scene.evidence[1].kind.name, KindName::Other("a".into()));
        assert_eq!(anchor(&scene, 1, 1, 1), (2, 0));
        assert_eq!(scene.evidence[2].kind.name, KindName::Other("b".into()));
        assert_eq!(anchor(&scene, 2, 1, 1), (2, 1));
    }

    #[test]
    fn empty_item_list() {
        let scene = generate_heap(&[], (4, 4), 0.1).unwrap();
        assert!(scene.evidence.is_empty());
    }

    #[test]
    fn grid_sized_item_fills_grid() {
        let scene = generate_heap(&[square("slab", 3.0, 0.1)], (3, 3), 0.1).unwrap();
        assert_eq!(scene.evidence.len(), 1);
        assert_eq!(anchor(&scene, 0, 3, 3), (0, 0));
    }

    #[test]
    fn oversized_item_names_itself() {
        let err = generate_heap(&[square("crate", 5.0, 0.1)], (3, 3), 0.1).unwrap_err();
        match err {
            WorldError::Placement { item, .. } => assert_eq!(item, "other:crate"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_grid_rejected() {
        assert!(generate_heap(&[], (0, 3), 0.1).is_err());
    }

    #[test]
    fn default7_fits_six_by_six() {
        let scene = generate_heap(&default7(), (6, 6), 0.15).unwrap();
        assert_eq!(scene.evidence.len(), 7);
        scene.validate().unwrap();
        let areas: Vec<usize> = scene
            .evidence
            .iter()
            .map(|e| {
                let (w, d) = heap_block_cells(&e.kind, 0.15);
                w * d
            })
            .collect();
        assert!(areas.windows(2).all(|w| w[0] >= w[1]));
    }
}
