//! A robustly transitive, robustly singular skew-product endomorphism on
//! torus products, with numerical verifiers for its dynamical properties.
//!
//! The base is a linear expanding circle map `F`, the fiber carries an
//! iterated function system `{g1, g2}` blended in over two small arcs, and a
//! local surgery near a point `s` creates a persistent critical set.

pub mod base;
pub mod bump;
pub mod chart;
pub mod error;
pub mod ifs;
pub mod map;
pub mod model;
pub mod perturb;
pub mod precise;
pub mod skew;
pub mod surgery;
pub mod torus;
pub mod verify;

pub use base::{CantorApproximation, ExpandingBase};
pub use error::{Error, Result};
pub use ifs::{IfsPair, Letter, SemigroupWord};
pub use map::{Endomorphism, ProductMap, SkewProduct};
pub use model::{AnyMap, MapKind, ModelParams};
pub use perturb::{PerturbationSpec, PerturbedMap};
pub use skew::SkewMap;
pub use surgery::{SingularMap, SurgeryParams};
pub use torus::{Arc, TorusBox, TorusPoint};
