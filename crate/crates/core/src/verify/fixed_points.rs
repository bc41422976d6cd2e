use serde::Serialize;

use crate::map::{Endomorphism, SkewProduct};
use crate::torus::{circle_delta, TorusPoint};

/// Eigenvalue moduli within this distance of 1 count as neutral.
pub const NEUTRAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedPointKind {
    Source,
    Saddle,
    Sink,
    Nonhyperbolic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub point: TorusPoint,
    /// `dist(f(point), point)` in the sup metric.
    pub residual: f64,
    pub eigenvalues: Vec<Eigenvalue>,
    pub classification: FixedPointKind,
}

impl FixedPointReport {
    pub fn exactly_fixed(&self) -> bool {
        self.residual == 0.0
    }
}

pub fn classify_moduli(moduli: &[f64]) -> FixedPointKind {
    if moduli.iter().any(|m| (m - 1.0).abs() <= NEUTRAL_TOL) {
        FixedPointKind::Nonhyperbolic
    } else if moduli.iter().all(|&m| m > 1.0) {
        FixedPointKind::Source
    } else if moduli.iter().all(|&m| m < 1.0) {
        FixedPointKind::Sink
    } else {
        FixedPointKind::Saddle
    }
}

pub fn classify_point<M: Endomorphism + ?Sized>(map: &M, pt: &TorusPoint) -> FixedPointReport {
    let jac = map.jacobian(pt);
    let mut eigenvalues: Vec<Eigenvalue> = jac
        .complex_eigenvalues()
        .iter()
        .map(|c| Eigenvalue { re: c.re, im: c.im })
        .collect();
    eigenvalues.sort_by(|a, b| b.modulus().total_cmp(&a.modulus()));
    let moduli: Vec<f64> = eigenvalues.iter().map(Eigenvalue::modulus).collect();
    FixedPointReport {
        point: pt.clone(),
        residual: map.eval(pt).dist(pt),
        classification: classify_moduli(&moduli),
        eigenvalues,
    }
}

pub fn classify_fixed_points<M: Endomorphism + ?Sized>(
    map: &M,
    candidates: &[TorusPoint],
) -> Vec<FixedPointReport> {
    candidates.iter().map(|pt| classify_point(map, pt)).collect()
}

/// Fixed points over the base fixed points `x_j = j/(D - 1)` on a circle
/// base. Each fiber is scanned on `fiber_cells` nodes for sign changes of
/// the displacement, refined by bisection. A fiber on which the map is the
/// identity is reported once, at `y = 0`, and so is each run of fixed nodes.
pub fn scan_fixed_points<M: SkewProduct + ?Sized>(map: &M, fiber_cells: usize) -> Vec<FixedPointReport> {
    let d = map.base_map().multiplier();
    let mut out = Vec::new();
    for j in 0..d - 1 {
        let x = j as f64 / (d - 1) as f64;
        let disp = |y: f64| circle_delta(y, map.fiber_image(x, y));
        let values: Vec<f64> = (0..=fiber_cells)
            .map(|i| disp(i as f64 / fiber_cells as f64))
            .collect();
        if values.iter().all(|&v| v == 0.0) {
            out.push(classify_point(map, &TorusPoint::new(&[x, 0.0])));
            continue;
        }
        for i in 0..fiber_cells {
            let (a, b) = (values[i], values[i + 1]);
            let (mut lo, mut hi) = (i as f64 / fiber_cells as f64, (i + 1) as f64 / fiber_cells as f64);
            if a == 0.0 {
                // one report per run of exactly fixed nodes
                if i == 0 || values[i - 1] != 0.0 {
                    out.push(classify_point(map, &TorusPoint::new(&[x, lo])));
                }
                continue;
            }
            if b == 0.0 || a.signum() == b.signum() || (a - b).abs() > 0.25 {
                continue;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if disp(mid).signum() == a.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(classify_point(map, &TorusPoint::new(&[x, 0.5 * (lo + hi)])));
        }
    }
    out
}
