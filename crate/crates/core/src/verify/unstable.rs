//! Growth of the unstable set `W^u_loc(p, a1) ⊃ U x {a1}` under iteration.
//!
//! The image of `U x {a1}` is tracked exactly as a family of horizontal
//! pieces `arc x {y}`: on each constant-fiber branch of the current fiber a
//! piece is cut, and its image is `F(part) x {f2(part, y)}`. Pieces are pruned
//! to one per fiber cell of width `1/(4 grid_k)`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::IfsPair;
use crate::map::SkewProduct;
use crate::precise::{bits_lost_per_step, Fixed, PrecisePoint, FRACTION_BITS};
use crate::torus::{reduce, Arc};

#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub parent: Option<usize>,
    /// Sub-arc of the parent's image that this piece is the image of.
    pub part: Option<Arc>,
    pub image: Arc,
    pub fiber: f64,
    pub depth: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub grid_k: usize,
    /// Cumulative fraction of cells hit by iterates `0..=k`, indexed by `k`.
    pub fractions: Vec<f64>,
    /// First iterate hitting each cell, row-major with the fiber as row.
    pub first_hit: Vec<Option<usize>>,
    #[serde(skip)]
    pub source: Vec<Option<usize>>,
    #[serde(skip)]
    pub pieces: Vec<Piece>,
}

impl CoverageReport {
    pub fn cell(&self, ix: usize, iy: usize) -> usize {
        iy * self.grid_k + ix
    }

    pub fn hit_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.first_hit
            .iter()
            .enumerate()
            .filter_map(|(c, h)| h.map(|_| c))
    }

    pub fn final_fraction(&self) -> f64 {
        *self.fractions.last().expect("iterate 0 is always present")
    }
}

fn cell_of(y: f64, cells: usize) -> usize {
    ((y * cells as f64) as usize).min(cells - 1)
}

fn capped_width(a: &Arc) -> f64 {
    a.width().min(1.0)
}

/// Columns of a `k`-grid met by the open arc.
fn columns(arc: &Arc, k: usize) -> Vec<usize> {
    if arc.width() >= 1.0 {
        return (0..k).collect();
    }
    let (lo, hi) = arc.lifted();
    let start = (lo * k as f64).floor() as i64;
    let end = (hi * k as f64).ceil() as i64 - 1;
    (start..=end).map(|c| c.rem_euclid(k as i64) as usize).collect()
}

pub fn unstable_coverage<M: SkewProduct + ?Sized>(
    map: &M,
    seed_arc: Arc,
    seed_fiber: f64,
    grid_k: usize,
    max_iters: usize,
) -> Result<CoverageReport> {
    if grid_k < 2 {
        return Err(Error::Domain(format!("grid_k must be at least 2, got {grid_k}")));
    }
    if map.base_dim() != 1 {
        return Err(Error::Domain("unstable coverage runs on a circle base".into()));
    }
    let d = map.base_map().multiplier() as f64;
    let prune = 4 * grid_k;
    let cells = grid_k * grid_k;
    let mut first_hit = vec![None; cells];
    let mut source = vec![None; cells];
    let mut hits = 0usize;
    let mut pieces = vec![Piece {
        parent: None,
        part: None,
        image: seed_arc,
        fiber: reduce(seed_fiber),
        depth: 0,
    }];
    // best (capped) image width per pruning cell and the piece holding it
    let mut best: HashMap<usize, f64> = HashMap::new();
    best.insert(cell_of(pieces[0].fiber, prune), capped_width(&seed_arc));

    let mut mark = |idx: usize, piece: &Piece, iterate: usize, hits: &mut usize| {
        let row = cell_of(piece.fiber, grid_k);
        for col in columns(&piece.image, grid_k) {
            let c = row * grid_k + col;
            if first_hit[c].is_none() {
                first_hit[c] = Some(iterate);
                source[c] = Some(idx);
                *hits += 1;
            }
        }
    };
    mark(0, &pieces[0].clone(), 0, &mut hits);
    let mut fractions = vec![hits as f64 / cells as f64];
    let mut frontier = vec![0usize];

    for iterate in 1..=max_iters {
        let mut next = Vec::new();
        for &idx in &frontier {
            let (image, y) = (pieces[idx].image, pieces[idx].fiber);
            for branch in map.fiber_branches(y) {
                for part in image.intersection(&branch.arc) {
                    let (lo, hi) = part.lifted();
                    let mid = reduce(0.5 * (lo + hi));
                    let fiber = map.fiber_image(mid, y);
                    let Ok(new_image) = Arc::from_lifted(d * lo, d * hi) else {
                        continue;
                    };
                    let key = cell_of(fiber, prune);
                    let w = capped_width(&new_image);
                    if best.get(&key).is_some_and(|&old| old >= w) {
                        continue;
                    }
                    best.insert(key, w);
                    pieces.push(Piece {
                        parent: Some(idx),
                        part: Some(part),
                        image: new_image,
                        fiber,
                        depth: iterate,
                    });
                    let new_idx = pieces.len() - 1;
                    next.push(new_idx);
                }
            }
        }
        for &idx in &next {
            let piece = pieces[idx].clone();
            mark(idx, &piece, iterate, &mut hits);
        }
        fractions.push(hits as f64 / cells as f64);
        frontier = next;
    }
    Ok(CoverageReport {
        grid_k,
        fractions,
        first_hit,
        source,
        pieces,
    })
}

/// Cumulative fraction of fiber rows of a `grid_k` grid met by the semigroup
/// orbit of `start` with words of length `< k`, indexed by `k`; iterate `k` of
/// the unstable set contains the full rows of these points.
pub fn semigroup_row_oracle(pair: &IfsPair, start: f64, grid_k: usize, max_iters: usize) -> Vec<f64> {
    let levels = pair.orbit_levels(start, 4 * grid_k, max_iters.saturating_sub(1));
    let mut rows = vec![false; grid_k];
    let mut hit = 0usize;
    let mut out = vec![0.0];
    for level in levels.iter().take(max_iters) {
        for &y in level {
            let r = cell_of(y, grid_k);
            if !rows[r] {
                rows[r] = true;
                hit += 1;
            }
        }
        out.push(hit as f64 / grid_k as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReplay {
    pub cell: usize,
    pub landed_cell: usize,
    pub steps: usize,
    pub start: crate::torus::TorusPoint,
}

impl CoverageReplay {
    pub fn ok(&self) -> bool {
        self.cell == self.landed_cell
    }
}

/// Re-derive a point of the seed piece whose iterate lands in `cell`, by
/// exact preimages along the recorded piece chain, then iterate it forward.
pub fn replay_cell<M: SkewProduct + ?Sized>(
    map: &M,
    report: &CoverageReport,
    cell: usize,
) -> Result<CoverageReplay> {
    let k = report.grid_k;
    let idx = report.source[cell]
        .ok_or_else(|| Error::Domain(format!("cell {cell} was never hit")))?;
    let piece = &report.pieces[idx];
    let mult = map.base_map().multiplier();
    if piece.depth as u32 * bits_lost_per_step(mult) > FRACTION_BITS - 64 {
        return Err(Error::Precision(format!(
            "{} steps exceed the extended-precision budget",
            piece.depth
        )));
    }
    let ix = cell % k;
    let (lo, hi) = piece.image.lifted();
    let (c0, c1) = (ix as f64 / k as f64, (ix + 1) as f64 / k as f64);
    let x = [-1.0, 0.0, 1.0, 2.0]
        .iter()
        .find_map(|t| {
            let (a, b) = (lo.max(c0 + t), hi.min(c1 + t));
            (a < b).then(|| reduce(0.5 * (a + b)))
        })
        .ok_or_else(|| Error::Internal(format!("piece {idx} does not meet column {ix}")))?;

    let mut xf = Fixed::from_f64(x);
    let mut cur = idx;
    while let Some(parent) = report.pieces[cur].parent {
        let part = report.pieces[cur].part.expect("non-root pieces record their part");
        let guess = (part.center() * mult as f64 - xf.to_f64()).round() as i64;
        let pre = [0i64, -1, 1, -2, 2]
            .iter()
            .map(|o| Fixed::preimage(&xf, (guess + o).rem_euclid(mult as i64) as u64, mult))
            .find(|p| part.contains(p.to_f64()))
            .ok_or_else(|| Error::Internal(format!("no preimage of piece {cur} in its part")))?;
        xf = pre;
        cur = parent;
    }
    let root = &report.pieces[cur];
    let mut pt = PrecisePoint {
        base: [xf].into_iter().collect(),
        fiber: root.fiber,
    };
    let start = pt.to_point();
    for _ in 0..piece.depth {
        map.step_precise(&mut pt);
    }
    let end = pt.to_point();
    let landed = cell_of(end.fiber(), k) * k + cell_of(end.coord(0), k);
    Ok(CoverageReplay {
        cell,
        landed_cell: landed,
        steps: piece.depth,
        start,
    })
}
