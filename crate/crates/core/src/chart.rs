//! Identity-on-window charts from the torus into euclidean space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{lift_centered, reduce, TorusBox, TorusPoint};

pub const DEFAULT_WINDOW: f64 = 0.45;

/// Each coordinate `y` is sent to its unique lift in
/// `(offset - 1/2, offset + 1/2)`; only lifts within `window_half_width` of
/// the offset are in the chart domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    base_offsets: Vec<f64>,
    window_half_width: f64,
}

impl Chart {
    pub fn new(base_offsets: Vec<f64>, window_half_width: f64) -> Result<Self> {
        if !(window_half_width > 0.0 && window_half_width < 0.5) {
            return Err(Error::Config(format!(
                "chart window half-width must lie in (0, 1/2), got {window_half_width}"
            )));
        }
        Ok(Self {
            base_offsets,
            window_half_width,
        })
    }

    /// Chart centered at the origin in every coordinate, so `mu_1(p) = 0`.
    pub fn centered(dim: usize) -> Self {
        Self {
            base_offsets: vec![0.0; dim],
            window_half_width: DEFAULT_WINDOW,
        }
    }

    pub fn dim(&self) -> usize {
        self.base_offsets.len()
    }

    pub fn window_half_width(&self) -> f64 {
        self.window_half_width
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.base_offsets[i]
    }

    /// Chart value of coordinate `i`, or `None` outside the window.
    pub fn coord(&self, i: usize, y: f64) -> Option<f64> {
        let off = self.base_offsets[i];
        let rel = lift_centered(y - off);
        (rel.abs() < self.window_half_width).then_some(off + rel)
    }

    pub fn forward(&self, pt: &TorusPoint) -> Result<Vec<f64>> {
        if pt.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: pt.dim(),
            });
        }
        pt.coords()
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                self.coord(i, y).ok_or_else(|| {
                    Error::Domain(format!("coordinate {i} = {y} lies outside the chart window"))
                })
            })
            .collect()
    }

    pub fn backward(&self, v: &[f64]) -> Result<TorusPoint> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        for (i, &c) in v.iter().enumerate() {
            if (c - self.base_offsets[i]).abs() >= self.window_half_width {
                return Err(Error::Domain(format!(
                    "chart value {c} of coordinate {i} lies outside the window image"
                )));
            }
        }
        Ok(TorusPoint::new(v))
    }

    /// Inverse of a single coordinate.
    pub fn coord_inv(&self, _i: usize, v: f64) -> f64 {
        reduce(v)
    }

    /// Largest euclidean norm of a chart image point over the given boxes,
    /// using the first `box.dim()` chart coordinates (a supremum over open
    /// boxes, so the norm itself is not attained).
    pub fn sup_norm_over(&self, boxes: &[TorusBox]) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for b in boxes {
            let mut sq = 0.0;
            for (i, arc) in b.arcs().iter().enumerate() {
                let off = self.base_offsets[i];
                let c = off + lift_centered(arc.center() - off);
                let far = (c - arc.half_width()).abs().max((c + arc.half_width()).abs());
                if far - off > self.window_half_width + 1e-12 {
                    return Err(Error::Domain(format!(
                        "box arc around {} leaves the chart window",
                        arc.center()
                    )));
                }
                sq += far * far;
            }
            sup = sup.max(sq.sqrt());
        }
        Ok(sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Arc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn s_maps_to_quarter_quarter() {
        let chart = Chart::centered(2);
        let s = TorusPoint::new(&[0.25, 0.25]);
        assert_eq!(chart.forward(&s).unwrap(), vec![0.25, 0.25]);
    }

    #[test]
    fn p_fiber_has_zero_base_coordinate() {
        let chart = Chart::centered(2);
        let v = chart.forward(&TorusPoint::new(&[0.0, 0.3])).unwrap();
        assert_eq!(v[0], 0.0);
        // wrapped coordinates lift to negative values
        let w = chart.forward(&TorusPoint::new(&[0.9, 0.3])).unwrap();
        assert!((w[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn out_of_window_is_domain_error() {
        let chart = Chart::centered(2);
        assert!(matches!(
            chart.forward(&TorusPoint::new(&[0.5, 0.1])),
            Err(Error::Domain(_))
        ));
        assert!(chart.backward(&[0.46, 0.0]).is_err());
    }

    #[test]
    fn round_trip_on_window() {
        let chart = Chart::centered(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.449..0.449)).collect();
            let pt = chart.backward(&v).unwrap();
            let back = chart.forward(&pt).unwrap();
            let again = chart.backward(&back).unwrap();
            assert_eq!(pt, again);
            for (a, b) in v.iter().zip(&back) {
                assert!((a - b).abs() <= f64::EPSILON, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn blending_boxes_inside_tenth_ball() {
        let chart = Chart::centered(2);
        let u = TorusBox::new(vec![Arc::new(0.0, 0.02).unwrap()]).unwrap().fatten(0.01);
        let v = TorusBox::new(vec![Arc::new(0.07, 0.02).unwrap()]).unwrap().fatten(0.01);
        let sup = chart.sup_norm_over(&[u, v]).unwrap();
        assert!(sup <= 0.1 + 1e-12);
    }
}
