//! Common interface of the torus endomorphisms and a few reference maps.

use nalgebra::DMatrix;

use crate::base::ExpandingBase;
use crate::precise::PrecisePoint;
use crate::torus::{circle_delta, Arc, TorusPoint};

pub trait Endomorphism: Send + Sync {
    /// Dimension `m1` of the base factor; the fiber is one circle.
    fn base_dim(&self) -> usize;

    fn dim(&self) -> usize {
        self.base_dim() + 1
    }

    fn eval(&self, pt: &TorusPoint) -> TorusPoint;

    fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64>;

    fn det(&self, pt: &TorusPoint) -> f64 {
        self.jacobian(pt).determinant()
    }

    /// One step on an extended-precision orbit state. Implementations agree
    /// with [`Endomorphism::eval`] on the `f64` rounding of the state.
    fn step_precise(&self, pt: &mut PrecisePoint);

    /// Base multiplier used to budget precise-orbit bits; `None` when the
    /// base does not lose fraction bits.
    fn base_multiplier(&self) -> Option<u64> {
        None
    }
}

impl<T: Endomorphism + ?Sized> Endomorphism for &T {
    fn base_dim(&self) -> usize {
        (**self).base_dim()
    }
    fn eval(&self, pt: &TorusPoint) -> TorusPoint {
        (**self).eval(pt)
    }
    fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64> {
        (**self).jacobian(pt)
    }
    fn det(&self, pt: &TorusPoint) -> f64 {
        (**self).det(pt)
    }
    fn step_precise(&self, pt: &mut PrecisePoint) {
        (**self).step_precise(pt)
    }
    fn base_multiplier(&self) -> Option<u64> {
        (**self).base_multiplier()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    G1,
    G2,
    Identity,
}

/// A base arc on which the fiber image of a given `y` does not depend on `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberBranch {
    pub arc: Arc,
    pub kind: BranchKind,
}

/// Skew products `(x, y) -> (F(x), f2(x, y))` over the linear base, on the
/// circle base `m1 = 1`.
pub trait SkewProduct: Endomorphism {
    fn base_map(&self) -> &ExpandingBase;

    /// Base arcs on which `f2(., y)` is constant.
    fn fiber_branches(&self, y: f64) -> Vec<FiberBranch>;

    fn fiber_image(&self, x: f64, y: f64) -> f64 {
        self.eval(&TorusPoint::new(&[x, y])).fiber()
    }
}

/// Central differences with circle-aware output differences.
pub fn finite_difference_jacobian<M: Endomorphism + ?Sized>(map: &M, pt: &TorusPoint, h: f64) -> DMatrix<f64> {
    let d = pt.dim();
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut plus = pt.clone();
        plus.set(j, pt.coord(j) + h);
        let mut minus = pt.clone();
        minus.set(j, pt.coord(j) - h);
        let (fp, fm) = (map.eval(&plus), map.eval(&minus));
        for i in 0..d {
            jac[(i, j)] = circle_delta(fm.coord(i), fp.coord(i)) / (2.0 * h);
        }
    }
    jac
}

/// The identity map, a known-degenerate reference.
#[derive(Clone, Copy, Debug)]
pub struct IdentityMap {
    pub base_dim: usize,
}

impl Endomorphism for IdentityMap {
    fn base_dim(&self) -> usize {
        self.base_dim
    }
    fn eval(&self, pt: &TorusPoint) -> TorusPoint {
        pt.clone()
    }
    fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64> {
        DMatrix::identity(pt.dim(), pt.dim())
    }
    fn step_precise(&self, _pt: &mut PrecisePoint) {}
}

/// `F x Id`: the expanding base with an uncoupled fiber. Fiber circles are
/// invariant, so it is never transitive.
#[derive(Clone, Debug)]
pub struct ProductMap {
    base: ExpandingBase,
}

impl ProductMap {
    pub fn new(base: ExpandingBase) -> Self {
        Self { base }
    }
}

impl Endomorphism for ProductMap {
    fn base_dim(&self) -> usize {
        self.base.dim()
    }
    fn eval(&self, pt: &TorusPoint) -> TorusPoint {
        let base: Vec<f64> = pt.base().iter().map(|&x| self.base.eval_coord(x)).collect();
        TorusPoint::from_parts(&base, pt.fiber())
    }
    fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64> {
        let mut j = DMatrix::identity(pt.dim(), pt.dim());
        for i in 0..self.base.dim() {
            j[(i, i)] = self.base.multiplier() as f64;
        }
        j
    }
    fn step_precise(&self, pt: &mut PrecisePoint) {
        for b in pt.base.iter_mut() {
            *b = self.base.step_fixed(b);
        }
    }
    fn base_multiplier(&self) -> Option<u64> {
        Some(self.base.multiplier())
    }
}

impl SkewProduct for ProductMap {
    fn base_map(&self) -> &ExpandingBase {
        &self.base
    }

    fn fiber_branches(&self, _y: f64) -> Vec<FiberBranch> {
        vec![FiberBranch {
            arc: Arc::full(0.0),
            kind: BranchKind::Identity,
        }]
    }

    fn fiber_image(&self, _x: f64, y: f64) -> f64 {
        y
    }
}
