//! The blending map `f_hat` and the skew product `f`.
//!
//! On the circle fiber the convex combination
//! `u(x) f_hat(x, y) + (1 - u(x)) (F(x), y)` is taken on lifts: the fiber is
//! moved by `u(x)` times the lifted displacement of the active `g_i`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::base::ExpandingBase;
use crate::bump::{BlendBranch, BumpProfile};
use crate::error::{Error, Result};
use crate::ifs::IfsPair;
use crate::map::{BranchKind, Endomorphism, FiberBranch, SkewProduct};
use crate::precise::PrecisePoint;
use crate::torus::{reduce, Arc, TorusPoint};

/// Margin kept between constant-fiber branch arcs and the ramp boundaries.
pub(crate) const BRANCH_MARGIN: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct SkewMap {
    base: ExpandingBase,
    pair: IfsPair,
    bump: BumpProfile,
}

impl SkewMap {
    pub fn new(base: ExpandingBase, pair: IfsPair) -> Self {
        let bump = BumpProfile::new(base.u().clone(), base.v().clone(), base.epsilon());
        Self { base, pair, bump }
    }

    pub fn base(&self) -> &ExpandingBase {
        &self.base
    }

    pub fn pair(&self) -> &IfsPair {
        &self.pair
    }

    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }

    /// `(p, a1)`.
    pub fn saddle_point(&self) -> TorusPoint {
        TorusPoint::from_parts(self.base.p().coords(), self.pair.a1())
    }

    /// `(p, r1)`.
    pub fn source_point(&self) -> TorusPoint {
        TorusPoint::from_parts(self.base.p().coords(), self.pair.r1())
    }

    fn displacement(&self, branch: BlendBranch, y: f64) -> (f64, f64) {
        match branch {
            BlendBranch::U => (
                self.pair.g1_displacement(y),
                self.pair.g1_displacement_deriv(y),
            ),
            BlendBranch::V => (self.pair.g2_displacement(), 0.0),
            BlendBranch::Outside => (0.0, 0.0),
        }
    }

    /// Second component `f2(x, y)`.
    pub fn fiber(&self, x: &[f64], y: f64) -> f64 {
        let b = self.bump.sample(x);
        match (b.value, b.branch) {
            (v, _) if v == 0.0 => return y,
            (v, BlendBranch::U) if v == 1.0 => return self.pair.g1(y),
            (v, BlendBranch::V) if v == 1.0 => return self.pair.g2(y),
            _ => {}
        }
        let (delta, _) = self.displacement(b.branch, y);
        reduce(y + b.value * delta)
    }

    /// `f_hat`, defined on `(U_eps ∪ V_eps) x M2` only.
    pub fn fhat_eval(&self, x: &[f64], y: f64) -> Result<TorusPoint> {
        let fy = match self.bump.branch(x) {
            BlendBranch::U => self.pair.g1(y),
            BlendBranch::V => self.pair.g2(y),
            BlendBranch::Outside => {
                return Err(Error::Domain(format!(
                    "f_hat is only defined over U_eps ∪ V_eps, got x = {x:?}"
                )))
            }
        };
        let fx: Vec<f64> = x.iter().map(|&c| self.base.eval_coord(c)).collect();
        Ok(TorusPoint::from_parts(&fx, fy))
    }
}

impl Endomorphism for SkewMap {
    fn base_dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, pt: &TorusPoint) -> TorusPoint {
        let fx: Vec<f64> = pt.base().iter().map(|&c| self.base.eval_coord(c)).collect();
        TorusPoint::from_parts(&fx, self.fiber(pt.base(), pt.fiber()))
    }

    fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64> {
        let m1 = self.base.dim();
        let d = m1 + 1;
        let mut j = DMatrix::zeros(d, d);
        for i in 0..m1 {
            j[(i, i)] = self.base.multiplier() as f64;
        }
        let b = self.bump.sample(pt.base());
        let (delta, delta_prime) = self.displacement(b.branch, pt.fiber());
        for i in 0..m1 {
            j[(m1, i)] = b.grad[i] * delta;
        }
        j[(m1, m1)] = 1.0 + b.value * delta_prime;
        j
    }

    fn det(&self, pt: &TorusPoint) -> f64 {
        let b = self.bump.sample(pt.base());
        let (_, delta_prime) = self.displacement(b.branch, pt.fiber());
        self.base.det() * (1.0 + b.value * delta_prime)
    }

    fn step_precise(&self, pt: &mut PrecisePoint) {
        let approx = pt.to_point();
        pt.fiber = self.fiber(approx.base(), approx.fiber());
        for b in pt.base.iter_mut() {
            *b = self.base.step_fixed(b);
        }
    }

    fn base_multiplier(&self) -> Option<u64> {
        Some(self.base.multiplier())
    }
}

/// Open arcs covering the circle minus the two fattened blending arcs.
pub(crate) fn outside_blending_arcs(base: &ExpandingBase) -> Vec<Arc> {
    let (a0, a1) = base.u_eps().arcs()[0].lifted();
    let (mut b0, mut b1) = base.v_eps().arcs()[0].lifted();
    while b0 < a1 {
        b0 += 1.0;
        b1 += 1.0;
    }
    [(a1, b0), (b1, a0 + 1.0)]
        .into_iter()
        .filter(|(lo, hi)| hi - lo > 2.0 * BRANCH_MARGIN)
        .filter_map(|(lo, hi)| Arc::from_lifted(lo + BRANCH_MARGIN, hi - BRANCH_MARGIN).ok())
        .collect()
}

pub(crate) fn core_branches(base: &ExpandingBase) -> Vec<FiberBranch> {
    let mut out = Vec::new();
    if let Some(arc) = base.u().arcs()[0].shrink(BRANCH_MARGIN) {
        out.push(FiberBranch {
            arc,
            kind: BranchKind::G1,
        });
    }
    if let Some(arc) = base.v().arcs()[0].shrink(BRANCH_MARGIN) {
        out.push(FiberBranch {
            arc,
            kind: BranchKind::G2,
        });
    }
    out
}

impl SkewProduct for SkewMap {
    fn base_map(&self) -> &ExpandingBase {
        &self.base
    }

    fn fiber_branches(&self, _y: f64) -> Vec<FiberBranch> {
        assert_eq!(self.base.dim(), 1, "fiber branches are defined for m1 = 1");
        let mut out = core_branches(&self.base);
        out.extend(outside_blending_arcs(&self.base).into_iter().map(|arc| FiberBranch {
            arc,
            kind: BranchKind::Identity,
        }));
        out
    }

    fn fiber_image(&self, x: f64, y: f64) -> f64 {
        self.fiber(&[x], y)
    }
}
