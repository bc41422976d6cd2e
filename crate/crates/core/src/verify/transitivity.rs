//! Sampled reachability between the cells of a `k x k` grid on `T^2`.
//!
//! An edge `a -> b` is recorded only with a witness: a sample point of `a`
//! whose `n`-th iterate (`1 <= n <= horizon`) lies in `b`. Missing edges
//! mean "not found at this sampling", never "impossible".

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::Endomorphism;
use crate::precise::{bits_lost_per_step, PrecisePoint, FRACTION_BITS};
use crate::torus::TorusPoint;

pub const MAX_CELLS: usize = 16_384;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeWitness {
    pub dst: u32,
    pub sample: u32,
    pub steps: u32,
}

/// Cell digraph stored as one bitset row per source cell.
#[derive(Clone, Debug)]
pub struct ReachabilityGrid {
    pub grid_k: usize,
    pub horizon: usize,
    pub samples_per_cell: usize,
    pub seed: u64,
    words: usize,
    rows: Vec<Vec<u64>>,
    pub witnesses: Vec<Vec<EdgeWitness>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitivityReport {
    pub grid_k: usize,
    pub horizon: usize,
    pub samples_per_cell: usize,
    pub seed: u64,
    pub edge_count: usize,
    pub strongly_connected: bool,
    /// Longest shortest path in the cell digraph, when strongly connected.
    pub diameter: Option<usize>,
    /// Cells not reached from cell 0 (forward) and cells that cannot reach
    /// cell 0 (backward); empty when strongly connected.
    pub unreached_forward: usize,
    pub unreached_backward: usize,
    pub note: String,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `sample`-th start point of `cell`, reproducible from the seed alone.
pub fn sample_point(seed: u64, grid_k: usize, cell: usize, sample: usize) -> PrecisePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(cell as u64)) ^ sample as u64);
    let (ix, iy) = (cell % grid_k, cell / grid_k);
    let k = grid_k as f64;
    let x = (ix as f64 + rng.gen::<f64>()) / k;
    let y = (iy as f64 + rng.gen::<f64>()) / k;
    PrecisePoint::from_point(&TorusPoint::new(&[x.min(1.0 - f64::EPSILON), y.min(1.0 - f64::EPSILON)]))
        .with_random_tail(&mut rng)
}

/// Row-major cell index, fiber as row.
pub fn cell_index(pt: &TorusPoint, grid_k: usize) -> usize {
    let c = |v: f64| ((v * grid_k as f64) as usize).min(grid_k - 1);
    c(pt.fiber()) * grid_k + c(pt.coord(0))
}

impl ReachabilityGrid {
    pub fn build<M: Endomorphism + ?Sized>(
        map: &M,
        grid_k: usize,
        horizon: usize,
        samples_per_cell: usize,
        seed: u64,
    ) -> Result<Self> {
        if grid_k < 1 {
            return Err(Error::Domain("grid_k must be positive".into()));
        }
        if map.dim() != 2 {
            return Err(Error::Domain("the reachability grid lives on T^2".into()));
        }
        let n = grid_k * grid_k;
        if n > MAX_CELLS {
            return Err(Error::Domain(format!(
                "{n} cells exceed the supported maximum of {MAX_CELLS}"
            )));
        }
        if let Some(mult) = map.base_multiplier() {
            if horizon as u32 * bits_lost_per_step(mult) > FRACTION_BITS - 64 {
                return Err(Error::Precision(format!(
                    "horizon {horizon} exceeds the extended-precision budget"
                )));
            }
        }
        let words = n.div_ceil(64);
        let built: Vec<(Vec<u64>, Vec<EdgeWitness>)> = (0..n)
            .into_par_iter()
            .map(|cell| {
                let mut row = vec![0u64; words];
                let mut wit = Vec::new();
                for s in 0..samples_per_cell {
                    let mut pt = sample_point(seed, grid_k, cell, s);
                    for t in 1..=horizon {
                        map.step_precise(&mut pt);
                        let dst = cell_index(&pt.to_point(), grid_k);
                        let (w, b) = (dst / 64, dst % 64);
                        if row[w] >> b & 1 == 0 {
                            row[w] |= 1 << b;
                            wit.push(EdgeWitness {
                                dst: dst as u32,
                                sample: s as u32,
                                steps: t as u32,
                            });
                        }
                    }
                }
                (row, wit)
            })
            .collect();
        let (rows, witnesses) = built.into_iter().unzip();
        Ok(Self {
            grid_k,
            horizon,
            samples_per_cell,
            seed,
            words,
            rows,
            witnesses,
        })
    }

    pub fn cells(&self) -> usize {
        self.grid_k * self.grid_k
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.rows[a][b / 64] >> (b % 64) & 1 == 1
    }

    pub fn edge_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.iter().map(|w| w.count_ones() as usize).sum::<usize>())
            .sum()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|w| w.count_ones() as usize).sum())
            .collect()
    }

    fn transpose(&self) -> Vec<Vec<u64>> {
        let n = self.cells();
        let mut t = vec![vec![0u64; self.words]; n];
        for a in 0..n {
            for (wi, &word) in self.rows[a].iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let b = wi * 64 + bits.trailing_zeros() as usize;
                    t[b][a / 64] |= 1 << (a % 64);
                    bits &= bits - 1;
                }
            }
        }
        t
    }

    /// Breadth-first levels from `src`; returns (reached count, eccentricity).
    fn bfs(rows: &[Vec<u64>], words: usize, n: usize, src: usize) -> (usize, usize) {
        let mut visited = vec![0u64; words];
        visited[src / 64] |= 1 << (src % 64);
        let mut frontier = visited.clone();
        let mut reached = 1;
        let mut depth = 0;
        loop {
            let mut next = vec![0u64; words];
            for (wi, &word) in frontier.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let v = wi * 64 + bits.trailing_zeros() as usize;
                    for (acc, r) in next.iter_mut().zip(&rows[v]) {
                        *acc |= r;
                    }
                    bits &= bits - 1;
                }
            }
            let mut added = 0;
            for (nx, vis) in next.iter_mut().zip(visited.iter_mut()) {
                *nx &= !*vis;
                *vis |= *nx;
                added += nx.count_ones() as usize;
            }
            if added == 0 {
                break;
            }
            reached += added;
            depth += 1;
            frontier = next;
        }
        debug_assert!(reached <= n);
        (reached, depth)
    }

    pub fn report(&self, with_diameter: bool) -> TransitivityReport {
        let n = self.cells();
        let (fwd, _) = Self::bfs(&self.rows, self.words, n, 0);
        let (bwd, _) = Self::bfs(&self.transpose(), self.words, n, 0);
        let strongly_connected = fwd == n && bwd == n;
        let diameter = (strongly_connected && with_diameter).then(|| {
            (0..n)
                .into_par_iter()
                .map(|s| Self::bfs(&self.rows, self.words, n, s).1)
                .max()
                .unwrap_or(0)
        });
        let note = if strongly_connected {
            "every cell reaches every other cell through witnessed edges".to_string()
        } else {
            format!(
                "not strongly connected at this sampling: {} cells unreached from cell 0, {} cells cannot reach it; absence of an edge is inconclusive",
                n - fwd,
                n - bwd
            )
        };
        TransitivityReport {
            grid_k: self.grid_k,
            horizon: self.horizon,
            samples_per_cell: self.samples_per_cell,
            seed: self.seed,
            edge_count: self.edge_count(),
            strongly_connected,
            diameter,
            unreached_forward: n - fwd,
            unreached_backward: n - bwd,
            note,
        }
    }

    /// Iterate the stored witness of edge number `i` of `src` and report the
    /// cell it lands in.
    pub fn replay_witness<M: Endomorphism + ?Sized>(&self, map: &M, src: usize, i: usize) -> usize {
        let w = self.witnesses[src][i];
        let mut pt = sample_point(self.seed, self.grid_k, src, w.sample as usize);
        for _ in 0..w.steps {
            map.step_precise(&mut pt);
        }
        cell_index(&pt.to_point(), self.grid_k)
    }
}

pub fn box_transitivity<M: Endomorphism + ?Sized>(
    map: &M,
    grid_k: usize,
    horizon: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<TransitivityReport> {
    Ok(ReachabilityGrid::build(map, grid_k, horizon, samples_per_cell, seed)?.report(true))
}
