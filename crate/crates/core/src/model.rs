//! Default parameters and one-call construction of the three maps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::base::ExpandingBase;
use crate::error::Result;
use crate::ifs::{IfsPair, GOLDEN_ROTATION};
use crate::map::{Endomorphism, FiberBranch, ProductMap, SkewProduct};
use crate::precise::PrecisePoint;
use crate::skew::SkewMap;
use crate::surgery::{SingularMap, SurgeryParams};
use crate::torus::{Arc, TorusBox, TorusPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub degree: u64,
    pub power: Option<u32>,
    /// `(center, half_width)` per base coordinate.
    pub u: Vec<(f64, f64)>,
    pub v: Vec<(f64, f64)>,
    pub epsilon: f64,
    pub beta: f64,
    pub alpha: f64,
    pub r: f64,
    pub theta: f64,
    pub delta: f64,
    pub s_chart: Vec<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        let surgery = SurgeryParams::default();
        Self {
            degree: 2,
            power: None,
            u: vec![(0.0, 0.02)],
            v: vec![(0.07, 0.02)],
            epsilon: 0.01,
            beta: 0.1,
            alpha: GOLDEN_ROTATION,
            r: surgery.r,
            theta: surgery.theta,
            delta: surgery.delta,
            s_chart: surgery.s_chart,
        }
    }
}

fn to_box(arcs: &[(f64, f64)]) -> Result<TorusBox> {
    TorusBox::new(
        arcs.iter()
            .map(|&(c, w)| Arc::new(c, w))
            .collect::<Result<Vec<_>>>()?,
    )
}

impl ModelParams {
    pub fn base(&self) -> Result<ExpandingBase> {
        let (u, v) = (to_box(&self.u)?, to_box(&self.v)?);
        match self.power {
            Some(n) => ExpandingBase::with_power(self.degree, n, u, v, self.epsilon),
            None => ExpandingBase::build(self.degree, u, v, self.epsilon),
        }
    }

    pub fn pair(&self) -> Result<IfsPair> {
        IfsPair::new(self.beta, self.alpha)
    }

    pub fn surgery(&self) -> SurgeryParams {
        SurgeryParams {
            r: self.r,
            theta: self.theta,
            delta: self.delta,
            s_chart: self.s_chart.clone(),
        }
    }

    pub fn skew(&self) -> Result<SkewMap> {
        Ok(SkewMap::new(self.base()?, self.pair()?))
    }

    pub fn singular(&self) -> Result<SingularMap> {
        SingularMap::new(self.skew()?, &self.surgery())
    }

    pub fn product(&self) -> Result<ProductMap> {
        Ok(ProductMap::new(self.base()?))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    /// The map `A` with the surgery.
    #[default]
    Singular,
    /// The skew product `f` without surgery.
    Skew,
    /// `F x Id`, a known non-transitive control.
    Product,
}

/// One of the three maps, chosen at run time.
#[derive(Clone, Debug)]
pub enum AnyMap {
    Singular(SingularMap),
    Skew(SkewMap),
    Product(ProductMap),
}

impl ModelParams {
    pub fn build(&self, kind: MapKind) -> Result<AnyMap> {
        Ok(match kind {
            MapKind::Singular => AnyMap::Singular(self.singular()?),
            MapKind::Skew => AnyMap::Skew(self.skew()?),
            MapKind::Product => AnyMap::Product(self.product()?),
        })
    }
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            AnyMap::Singular($m) => $e,
            AnyMap::Skew($m) => $e,
            AnyMap::Product($m) => $e,
        }
    };
}

impl AnyMap {
    pub fn kind(&self) -> MapKind {
        match self {
            AnyMap::Singular(_) => MapKind::Singular,
            AnyMap::Skew(_) => MapKind::Skew,
            AnyMap::Product(_) => MapKind::Product,
        }
    }

    pub fn as_singular(&self) -> Option<&SingularMap> {
        match self {
            AnyMap::Singular(a) => Some(a),
            _ => None,
        }
    }
}

impl Endomorphism for AnyMap {
    fn base_dim(&self) -> usize {
        delegate!(self, m => m.base_dim())
    }
    fn eval(&self, pt: &TorusPoint) -> TorusPoint {
        delegate!(self, m => m.eval(pt))
    }
    fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64> {
        delegate!(self, m => m.jacobian(pt))
    }
    fn det(&self, pt: &TorusPoint) -> f64 {
        delegate!(self, m => m.det(pt))
    }
    fn step_precise(&self, pt: &mut PrecisePoint) {
        delegate!(self, m => m.step_precise(pt))
    }
    fn base_multiplier(&self) -> Option<u64> {
        delegate!(self, m => m.base_multiplier())
    }
}

impl SkewProduct for AnyMap {
    fn base_map(&self) -> &ExpandingBase {
        delegate!(self, m => m.base_map())
    }
    fn fiber_branches(&self, y: f64) -> Vec<FiberBranch> {
        delegate!(self, m => m.fiber_branches(y))
    }
    fn fiber_image(&self, x: f64, y: f64) -> f64 {
        delegate!(self, m => m.fiber_image(x, y))
    }
}
