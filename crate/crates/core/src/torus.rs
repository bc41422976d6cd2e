//! Points, arcs and boxes on torus products `T^d = (R/Z)^d`.
//!
//! Coordinates are stored reduced to the half-open unit interval; every
//! region is an open product of arcs.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported total dimension (`m1 <= 2`, `m2 = 1`).
pub const MAX_DIM: usize = 3;

/// Reduce a real number to its representative in `[0, 1)`.
#[inline]
pub fn reduce(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `x` in `[-1/2, 1/2)`.
#[inline]
pub fn lift_centered(x: f64) -> f64 {
    let r = reduce(x);
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Signed circle displacement `b - a`, taken in `[-1/2, 1/2)`.
#[inline]
pub fn circle_delta(a: f64, b: f64) -> f64 {
    lift_centered(b - a)
}

/// `min_k |a - b + k|`, always in `[0, 1/2]`.
#[inline]
pub fn dist_circle(a: f64, b: f64) -> f64 {
    let d = reduce(a - b);
    d.min(1.0 - d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: ArrayVec<f64, MAX_DIM>,
}

impl TorusPoint {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "torus dimension must be in 1..={MAX_DIM}"
        );
        Self {
            coords: coords.iter().map(|&c| reduce(c)).collect(),
        }
    }

    pub fn from_parts(base: &[f64], fiber: f64) -> Self {
        let mut coords: ArrayVec<f64, MAX_DIM> = base.iter().map(|&c| reduce(c)).collect();
        coords.push(reduce(fiber));
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// All coordinates except the last one.
    pub fn base(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }

    /// The last coordinate, the circle fiber.
    pub fn fiber(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.coords[i] = reduce(value);
    }

    /// Sup-metric distance on the torus.
    pub fn dist(&self, other: &TorusPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| dist_circle(a, b))
            .fold(0.0, f64::max)
    }

    /// Euclidean (flat) distance on the torus.
    pub fn dist_euclid(&self, other: &TorusPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| dist_circle(a, b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Open arc `{ y : dist_circle(y, center) < half_width }`.
///
/// A half-width of exactly `1/2` is the circle minus the antipode of the
/// center; anything wider is the whole circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    center: f64,
    half_width: f64,
}

impl Arc {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() || !center.is_finite() {
            return Err(Error::Domain(format!(
                "arc needs a finite center and a positive half-width, got ({center}, {half_width})"
            )));
        }
        Ok(Self {
            center: reduce(center),
            half_width,
        })
    }

    /// Arc spanning the open lifted interval `(lo, hi)`.
    pub fn from_lifted(lo: f64, hi: f64) -> Result<Self> {
        Self::new(0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    /// Circle minus the single point `cut`.
    pub fn full(cut: f64) -> Self {
        Self {
            center: reduce(cut + 0.5),
            half_width: 0.5,
        }
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    /// Lifted endpoints `(center - half_width, center + half_width)`.
    pub fn lifted(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn contains(&self, y: f64) -> bool {
        dist_circle(y, self.center) < self.half_width
    }

    pub fn fatten(&self, eps: f64) -> Arc {
        Arc {
            center: self.center,
            half_width: self.half_width + eps,
        }
    }

    /// Shrink by `eps`; `None` when nothing is left.
    pub fn shrink(&self, eps: f64) -> Option<Arc> {
        let hw = self.half_width - eps;
        (hw > 0.0).then_some(Arc {
            center: self.center,
            half_width: hw,
        })
    }

    pub fn overlaps(&self, other: &Arc) -> bool {
        dist_circle(self.center, other.center) < self.half_width + other.half_width
    }

    /// Connected components of the intersection of two open arcs.
    pub fn intersection(&self, other: &Arc) -> Vec<Arc> {
        let (a0, a1) = self.lifted();
        let (b0, b1) = other.lifted();
        // bring the other arc's center within 1/2 of ours, then try the
        // neighbouring integer translates
        let shift = (self.center - other.center).round();
        let mut out = Vec::new();
        for t in [-1.0, 0.0, 1.0] {
            let lo = a0.max(b0 + shift + t);
            let hi = a1.min(b1 + shift + t);
            if lo < hi {
                if let Ok(arc) = Arc::from_lifted(lo, hi) {
                    out.push(arc);
                }
            }
        }
        out
    }
}

/// Product of open arcs, one per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusBox {
    arcs: Vec<Arc>,
}

impl TorusBox {
    pub fn new(arcs: Vec<Arc>) -> Result<Self> {
        if arcs.is_empty() || arcs.len() > MAX_DIM {
            return Err(Error::Domain(format!(
                "a box needs 1..={MAX_DIM} arcs, got {}",
                arcs.len()
            )));
        }
        Ok(Self { arcs })
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn dim(&self) -> usize {
        self.arcs.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.arcs.len() && self.arcs.iter().zip(x).all(|(a, &c)| a.contains(c))
    }

    pub fn fatten(&self, eps: f64) -> TorusBox {
        TorusBox {
            arcs: self.arcs.iter().map(|a| a.fatten(eps)).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.arcs.iter().map(|a| a.width().min(1.0)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.arcs.iter().map(Arc::center).collect()
    }

    pub fn min_width(&self) -> f64 {
        self.arcs.iter().map(Arc::width).fold(f64::INFINITY, f64::min)
    }

    /// Product of `self` with one more arc (e.g. a base box times a fiber arc).
    pub fn extend(&self, arc: Arc) -> Result<TorusBox> {
        let mut arcs = self.arcs.clone();
        arcs.push(arc);
        TorusBox::new(arcs)
    }

    pub fn intersects(&self, other: &TorusBox) -> Result<bool> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.arcs.iter().zip(&other.arcs).all(|(a, b)| a.overlaps(b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dist_circle_examples() {
        assert!((dist_circle(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(dist_circle(0.25, 0.25), 0.0);
        assert_eq!(dist_circle(0.0, 0.5), 0.5);
    }

    #[test]
    fn reduce_half_open() {
        assert_eq!(reduce(1.0), 0.0);
        assert_eq!(reduce(-1e-300), 0.0);
        assert_eq!(reduce(-0.25), 0.75);
        assert_eq!(reduce(2.5), 0.5);
    }

    #[test]
    fn box_intersects_examples() {
        let a = TorusBox::new(vec![Arc::new(0.1, 0.05).unwrap(), Arc::new(0.5, 0.1).unwrap()])
            .unwrap();
        let b = TorusBox::new(vec![Arc::new(0.12, 0.02).unwrap(), Arc::new(0.45, 0.1).unwrap()])
            .unwrap();
        assert!(a.intersects(&b).unwrap());
        assert!(a.intersects(&a).unwrap());
        let c = TorusBox::new(vec![Arc::new(0.3, 0.05).unwrap(), Arc::new(0.5, 0.1).unwrap()])
            .unwrap();
        assert!(!a.intersects(&c).unwrap());
        let d = TorusBox::new(vec![Arc::new(0.3, 0.05).unwrap()]).unwrap();
        assert!(matches!(
            a.intersects(&d),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn wrapping_arcs_overlap() {
        let a = Arc::new(0.98, 0.03).unwrap();
        let b = Arc::new(0.02, 0.02).unwrap();
        assert!(a.overlaps(&b));
        let parts = a.intersection(&b);
        assert_eq!(parts.len(), 1);
        assert!((parts[0].width() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn full_arc_splits_at_cut() {
        let u = Arc::new(0.0, 0.02).unwrap();
        let parts = u.intersection(&Arc::full(0.0));
        assert_eq!(parts.len(), 2);
        assert!(!Arc::full(0.3).contains(0.3));
        assert!(Arc::full(0.3).contains(0.31));
    }

    #[test]
    fn volume_in_unit_interval() {
        let b = TorusBox::new(vec![Arc::new(0.0, 0.1).unwrap(), Arc::new(0.5, 0.25).unwrap()])
            .unwrap();
        assert!((b.volume() - 0.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn dist_symmetric_bounded(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let d = dist_circle(a, b);
            prop_assert!((d - dist_circle(b, a)).abs() <= 4.0 * f64::EPSILON);
            prop_assert!((0.0..=0.5).contains(&d));
        }

        #[test]
        fn triangle_inequality(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            prop_assert!(dist_circle(a, c) <= dist_circle(a, b) + dist_circle(b, c) + 1e-15);
        }

        #[test]
        fn reduce_idempotent(x in -1e6f64..1e6) {
            let r = reduce(x);
            prop_assert!((0.0..1.0).contains(&r));
            prop_assert_eq!(reduce(r), r);
        }

        #[test]
        fn arc_membership_matches_distance(c in 0.0f64..1.0, hw in 0.001f64..0.5, y in 0.0f64..1.0) {
            let arc = Arc::new(c, hw).unwrap();
            prop_assert_eq!(arc.contains(y), dist_circle(y, c) < hw);
        }

        #[test]
        fn fattening_is_monotone(c in 0.0f64..1.0, hw in 0.001f64..0.4, y in 0.0f64..1.0, eps in 1e-9f64..0.1) {
            let arc = Arc::new(c, hw).unwrap();
            let fat = arc.fatten(eps);
            prop_assert_eq!(fat.half_width(), hw + eps);
            if arc.contains(y) {
                prop_assert!(fat.contains(y));
            }
        }

        #[test]
        fn intersection_membership(c1 in 0.0f64..1.0, h1 in 0.01f64..0.5,
                                   c2 in 0.0f64..1.0, h2 in 0.01f64..0.5, y in 0.0f64..1.0) {
            let a = Arc::new(c1, h1).unwrap();
            let b = Arc::new(c2, h2).unwrap();
            let parts = a.intersection(&b);
            let in_parts = parts.iter().any(|p| p.contains(y));
            // stay away from boundaries where rounding decides
            let margin = [dist_circle(y, c1) - h1, dist_circle(y, c2) - h2]
                .iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
            if margin > 1e-12 {
                prop_assert_eq!(in_parts, a.contains(y) && b.contains(y));
            }
        }
    }
}
