//! The expanding base map and its blending-region Cantor set.
//!
//! The base is the diagonal toral endomorphism `x -> d x mod 1`; its power
//! `F = f0^N` is chosen so that both blending boxes cover the whole base
//! torus in one step.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::precise::Fixed;
use crate::torus::{reduce, Arc, TorusBox, TorusPoint};

/// Widths below this are indistinguishable from rounding noise near 1.
const MIN_RESOLVABLE_WIDTH: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpandingBase {
    degree: u64,
    power: u32,
    multiplier: u64,
    u: TorusBox,
    v: TorusBox,
    epsilon: f64,
}

impl ExpandingBase {
    /// Smallest power `N` for which `F = f0^N` maps each of `u` and `v`
    /// onto the whole base.
    pub fn build(degree: u64, u: TorusBox, v: TorusBox, epsilon: f64) -> Result<Self> {
        Self::validate(degree, &u, &v, epsilon)?;
        let n = Self::covering_power(degree, u.min_width().min(v.min_width()))?;
        Self::assemble(degree, n, u, v, epsilon)
    }

    /// Fixed power `N`; still has to satisfy the covering property.
    pub fn with_power(
        degree: u64,
        power: u32,
        u: TorusBox,
        v: TorusBox,
        epsilon: f64,
    ) -> Result<Self> {
        Self::validate(degree, &u, &v, epsilon)?;
        let base = Self::assemble(degree, power, u, v, epsilon)?;
        if !(base.covers(&base.u) && base.covers(&base.v)) {
            return Err(Error::Config(format!(
                "power N = {power} is too small: F(U) = F(V) = M1 requires degree^N * width >= 1"
            )));
        }
        Ok(base)
    }

    fn validate(degree: u64, u: &TorusBox, v: &TorusBox, epsilon: f64) -> Result<()> {
        if degree < 2 {
            return Err(Error::Config(format!(
                "expanding base needs degree >= 2, got {degree}"
            )));
        }
        if u.dim() != v.dim() || !(1..=2).contains(&u.dim()) {
            return Err(Error::Config(format!(
                "U and V must both live on T^m1 with m1 in {{1, 2}}, got dims {} and {}",
                u.dim(),
                v.dim()
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
        }
        if u.fatten(epsilon).intersects(&v.fatten(epsilon))? {
            return Err(Error::Config(
                "blending boxes overlap after fattening: U_ε ∩ V_ε = ∅ is violated".into(),
            ));
        }
        if !u.contains(&vec![0.0; u.dim()]) {
            return Err(Error::Config(
                "U must be a neighbourhood of the fixed point p = 0".into(),
            ));
        }
        Ok(())
    }

    fn covering_power(degree: u64, width: f64) -> Result<u32> {
        let mut n = 1u32;
        loop {
            let mult = degree
                .checked_pow(n)
                .ok_or_else(|| Error::Config("degree^N overflows u64".into()))?;
            if mult as f64 * width >= 1.0 {
                return Ok(n);
            }
            n += 1;
        }
    }

    fn assemble(degree: u64, power: u32, u: TorusBox, v: TorusBox, epsilon: f64) -> Result<Self> {
        if power == 0 {
            return Err(Error::Config("power N must be positive".into()));
        }
        let multiplier = degree
            .checked_pow(power)
            .ok_or_else(|| Error::Config("degree^N overflows u64".into()))?;
        Ok(Self {
            degree,
            power,
            multiplier,
            u,
            v,
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn degree(&self) -> u64 {
        self.degree
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    /// `degree^N`, the per-coordinate derivative of `F`.
    pub fn multiplier(&self) -> u64 {
        self.multiplier
    }

    pub fn u(&self) -> &TorusBox {
        &self.u
    }

    pub fn v(&self) -> &TorusBox {
        &self.v
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn u_eps(&self) -> TorusBox {
        self.u.fatten(self.epsilon)
    }

    pub fn v_eps(&self) -> TorusBox {
        self.v.fatten(self.epsilon)
    }

    /// The fixed point `p`.
    pub fn p(&self) -> TorusPoint {
        TorusPoint::new(&vec![0.0; self.dim()])
    }

    /// `det D_x F`, constant for the linear map.
    pub fn det(&self) -> f64 {
        (self.multiplier as f64).powi(self.dim() as i32)
    }

    /// Constants `(c, k)` with `|D f0^n v| >= c k^n |v|`.
    pub fn expansion_constants(&self) -> (f64, f64) {
        (1.0, self.degree as f64)
    }

    pub fn eval_coord(&self, x: f64) -> f64 {
        reduce(self.multiplier as f64 * x)
    }

    pub fn eval(&self, x: &TorusPoint) -> TorusPoint {
        let coords: Vec<f64> = x.coords().iter().map(|&c| self.eval_coord(c)).collect();
        TorusPoint::new(&coords)
    }

    /// Exact step on an extended-precision coordinate.
    pub fn step_fixed(&self, x: &Fixed) -> Fixed {
        x.mul_u64(self.multiplier)
    }

    /// Lifted-length criterion: `F(b)` is the whole base.
    pub fn covers(&self, b: &TorusBox) -> bool {
        self.multiplier as f64 * b.min_width() >= 1.0
    }

    /// Smallest `m` with `F^m(b) = M1`.
    pub fn steps_to_cover(&self, b: &TorusBox) -> u32 {
        let mut m = 0u32;
        let mut w = b.min_width();
        while w < 1.0 {
            w *= self.multiplier as f64;
            m += 1;
        }
        m
    }

    /// Sampling certificate that `F(b)` meets every cell of a grid with
    /// `cells` cells per axis. Sample spacing in the image is at most half
    /// a cell, so a miss means a real gap.
    pub fn covering_certificate(&self, b: &TorusBox, cells: usize) -> bool {
        let dim = b.dim();
        let per_axis: Vec<usize> = b
            .arcs()
            .iter()
            .map(|a| (a.width() * self.multiplier as f64 * cells as f64 * 2.0).ceil() as usize + 1)
            .collect();
        let mut hit = vec![false; cells.pow(dim as u32)];
        let mut idx = vec![0usize; dim];
        loop {
            let mut flat = 0usize;
            for (axis, arc) in b.arcs().iter().enumerate() {
                let (lo, _) = arc.lifted();
                let x = lo + (idx[axis] as f64 + 0.5) * arc.width() / per_axis[axis] as f64;
                let fx = self.eval_coord(x);
                let c = ((fx * cells as f64) as usize).min(cells - 1);
                flat = flat * cells + c;
            }
            hit[flat] = true;
            // odometer over the sample lattice
            let mut axis = 0;
            loop {
                if axis == dim {
                    return hit.iter().all(|&h| h);
                }
                idx[axis] += 1;
                if idx[axis] < per_axis[axis] {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }

    /// Connected components of `F^{-1}(target) ∩ within` on the circle
    /// (`m1 = 1`), computed by slicing the linear branches.
    pub fn preimage_components(&self, target: &Arc, within: &Arc) -> Vec<Arc> {
        let d = self.multiplier as f64;
        if target.width() > 1.0 {
            return vec![*within];
        }
        let (t0, t1) = target.lifted();
        let mut out = Vec::new();
        if within.width() < 1.0 {
            let (w0, w1) = within.lifted();
            let kmin = (w0 * d - t1).floor() as i64;
            let kmax = (w1 * d - t0).ceil() as i64;
            for k in kmin..=kmax {
                let lo = ((t0 + k as f64) / d).max(w0);
                let hi = ((t1 + k as f64) / d).min(w1);
                if lo < hi {
                    if let Ok(arc) = Arc::from_lifted(lo, hi) {
                        out.push(arc);
                    }
                }
            }
        } else {
            for k in 0..self.multiplier {
                let branch = Arc::from_lifted((t0 + k as f64) / d, (t1 + k as f64) / d)
                    .expect("branch arcs have positive width");
                out.extend(branch.intersection(within));
            }
        }
        out
    }

    /// Box form of [`Self::preimage_components`]; only defined for `m1 = 1`.
    pub fn preimage_components_box(&self, target: &TorusBox, within: &TorusBox) -> Result<Vec<TorusBox>> {
        if target.dim() != 1 || within.dim() != 1 {
            return Err(Error::Domain(
                "preimage components are computed on the circle base only (m1 = 1)".into(),
            ));
        }
        Ok(self
            .preimage_components(&target.arcs()[0], &within.arcs()[0])
            .into_iter()
            .map(|a| TorusBox::new(vec![a]).expect("one arc"))
            .collect())
    }

    /// Components of `{x in U ∪ V : F^t(x) in U ∪ V for t = 1..=depth}`.
    pub fn cantor_components(&self, depth: usize) -> Result<CantorApproximation> {
        if self.dim() != 1 {
            return Err(Error::Domain(
                "the Cantor approximation is computed on the circle base only (m1 = 1)".into(),
            ));
        }
        let blocks = [self.u.arcs()[0], self.v.arcs()[0]];
        let mut components: Vec<Arc> = blocks.to_vec();
        for level in 1..=depth {
            components = components
                .par_iter()
                .flat_map_iter(|c| {
                    blocks
                        .iter()
                        .flat_map(|w| self.preimage_components(c, w))
                        .collect::<Vec<_>>()
                })
                .collect();
            let narrowest = components.iter().map(Arc::width).fold(f64::INFINITY, f64::min);
            if narrowest < MIN_RESOLVABLE_WIDTH {
                return Err(Error::Precision(format!(
                    "component width {narrowest:e} at depth {level} is below {MIN_RESOLVABLE_WIDTH:e}"
                )));
            }
        }
        components.sort_by(|a, b| a.lifted().0.total_cmp(&b.lifted().0));
        Ok(CantorApproximation { depth, components })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CantorApproximation {
    pub depth: usize,
    pub components: Vec<Arc>,
}

impl CantorApproximation {
    pub fn count(&self) -> usize {
        self.components.len()
    }

    pub fn max_width(&self) -> f64 {
        self.components.iter().map(Arc::width).fold(0.0, f64::max)
    }

    pub fn pairwise_disjoint(&self) -> bool {
        let mut sorted: Vec<(f64, f64)> = self
            .components
            .iter()
            .map(|a| {
                let (lo, hi) = a.lifted();
                let shift = lo.floor();
                (lo - shift, hi - shift)
            })
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let wrap_ok = match (sorted.first(), sorted.last()) {
            (Some(first), Some(last)) if sorted.len() > 1 => last.1 <= first.0 + 1.0,
            _ => true,
        };
        wrap_ok && sorted.windows(2).all(|w| w[0].1 <= w[1].0)
    }
}
