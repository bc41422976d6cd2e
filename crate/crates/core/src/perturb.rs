//! Small smooth perturbations of a map, with a C¹-norm budget.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::Endomorphism;
use crate::precise::PrecisePoint;
use crate::torus::{circle_delta, dist_circle, reduce, TorusPoint};

/// `exp(1 - 1/(1 - z^2))` on `|z| < 1`, peak value 1 at the origin.
fn unit_bump(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - z * z)).exp()
    }
}

fn unit_bump_deriv(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        return 0.0;
    }
    let w = 1.0 - z * z;
    unit_bump(z) * (-2.0 * z / (w * w))
}

/// Upper bound for `sup |unit_bump'|` (the true value is about 2.17036).
const UNIT_BUMP_SLOPE_BOUND: f64 = 2.1704;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpTerm {
    pub center: Vec<f64>,
    /// Half-width of the support in every coordinate.
    pub width: f64,
    /// Displacement of each output coordinate at the bump peak.
    pub amplitude: Vec<f64>,
}

impl BumpTerm {
    fn profile(&self, pt: &TorusPoint) -> Option<Vec<f64>> {
        let z: Vec<f64> = self
            .center
            .iter()
            .zip(pt.coords())
            .map(|(&c, &x)| circle_delta(c, x) / self.width)
            .collect();
        z.iter().all(|v| v.abs() < 1.0).then_some(z)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub seed: u64,
    pub eta: f64,
    pub bump_count: usize,
    pub bumps: Vec<BumpTerm>,
}

/// Region whose neighbourhood the bumps must avoid.
#[derive(Clone, Debug, PartialEq)]
pub struct Exclusion {
    pub center: TorusPoint,
    pub radius: f64,
}

impl PerturbationSpec {
    /// Seeded random bumps on `T^dim`, rescaled so the analytic C⁰ and C¹
    /// bounds of the field are at most `eta`.
    pub fn random(seed: u64, eta: f64, bump_count: usize, dim: usize) -> Result<Self> {
        Self::random_avoiding(seed, eta, bump_count, dim, None)
    }

    pub fn random_avoiding(
        seed: u64,
        eta: f64,
        bump_count: usize,
        dim: usize,
        exclusion: Option<&Exclusion>,
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::Config(format!(
                "perturbation size must satisfy 0 <= eta < 1/2, got {eta}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bumps = Vec::with_capacity(bump_count);
        let mut attempts = 0;
        while bumps.len() < bump_count {
            attempts += 1;
            if attempts > 10_000 * bump_count.max(1) {
                return Err(Error::SearchExhausted(
                    "no bump placement avoids the excluded region".into(),
                ));
            }
            let center: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
            let width = rng.gen_range(0.05..0.25);
            let amplitude: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if let Some(ex) = exclusion {
                // sup-metric distance from the exclusion center to the support
                let gap = center
                    .iter()
                    .zip(ex.center.coords())
                    .map(|(&c, &e)| dist_circle(c, e))
                    .fold(0.0, f64::max);
                if gap < width + ex.radius {
                    continue;
                }
            }
            bumps.push(BumpTerm {
                center,
                width,
                amplitude,
            });
        }
        let mut spec = Self {
            seed,
            eta,
            bump_count,
            bumps,
        };
        let bound = spec.c1_bound();
        let scale = if bound > 0.0 { eta / bound } else { 0.0 };
        for b in spec.bumps.iter_mut() {
            for a in b.amplitude.iter_mut() {
                *a *= scale;
            }
        }
        Ok(spec)
    }

    /// Analytic bound for `max(sup |zeta|, sup ||D zeta||)` with the
    /// max-abs-row-sum matrix norm.
    pub fn c1_bound(&self) -> f64 {
        let dim = self.bumps.first().map_or(0, |b| b.center.len()) as f64;
        let (mut c0, mut c1) = (0.0f64, 0.0f64);
        let outputs = self.bumps.first().map_or(0, |b| b.amplitude.len());
        for i in 0..outputs {
            let mut v = 0.0;
            let mut d = 0.0;
            for b in &self.bumps {
                v += b.amplitude[i].abs();
                d += b.amplitude[i].abs() * dim * UNIT_BUMP_SLOPE_BOUND / b.width;
            }
            c0 = c0.max(v);
            c1 = c1.max(d);
        }
        c0.max(c1)
    }

    pub fn field(&self) -> PerturbationField {
        PerturbationField {
            bumps: self.bumps.clone(),
        }
    }
}

/// `zeta: T^d -> R^d`, a finite sum of product bumps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationField {
    bumps: Vec<BumpTerm>,
}

impl PerturbationField {
    pub fn zero() -> Self {
        Self { bumps: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.bumps
            .iter()
            .all(|b| b.amplitude.iter().all(|&a| a == 0.0))
    }

    pub fn bumps(&self) -> &[BumpTerm] {
        &self.bumps
    }

    pub fn eval(&self, pt: &TorusPoint) -> Vec<f64> {
        let mut out = vec![0.0; pt.dim()];
        for b in &self.bumps {
            if let Some(z) = b.profile(pt) {
                let h: f64 = z.iter().map(|&v| unit_bump(v)).product();
                for (o, a) in out.iter_mut().zip(&b.amplitude) {
                    *o += a * h;
                }
            }
        }
        out
    }

    pub fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64> {
        let d = pt.dim();
        let mut jac = DMatrix::zeros(d, d);
        for b in &self.bumps {
            if let Some(z) = b.profile(pt) {
                let hs: Vec<f64> = z.iter().map(|&v| unit_bump(v)).collect();
                for j in 0..d {
                    let partial: f64 = (0..d)
                        .map(|k| {
                            if k == j {
                                unit_bump_deriv(z[k]) / b.width
                            } else {
                                hs[k]
                            }
                        })
                        .product();
                    for i in 0..d {
                        jac[(i, j)] += b.amplitude[i] * partial;
                    }
                }
            }
        }
        jac
    }

    /// Sampled `(sup |zeta|, sup ||D zeta||)`, the derivative taken by central
    /// differences with step `h`.
    pub fn measured_norms(&self, dim: usize, samples: usize, seed: u64, h: f64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut c0, mut c1) = (0.0f64, 0.0f64);
        let mut probe = |pt: TorusPoint| {
            let v = self.eval(&pt);
            c0 = c0.max(v.iter().fold(0.0, |m, x| m.max(x.abs())));
            let mut rows = vec![0.0; dim];
            for j in 0..dim {
                let mut plus = pt.clone();
                plus.set(j, pt.coord(j) + h);
                let mut minus = pt.clone();
                minus.set(j, pt.coord(j) - h);
                let (p, m) = (self.eval(&plus), self.eval(&minus));
                for i in 0..dim {
                    rows[i] += ((p[i] - m[i]) / (2.0 * h)).abs();
                }
            }
            c1 = c1.max(rows.iter().fold(0.0, |m, x| m.max(*x)));
        };
        for b in &self.bumps {
            probe(TorusPoint::new(&b.center));
        }
        for _ in 0..samples {
            let pt: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
            probe(TorusPoint::new(&pt));
        }
        (c0, c1)
    }
}

/// `g = map + zeta`, with the sum taken on lifts.
#[derive(Clone, Debug)]
pub struct PerturbedMap<M> {
    inner: M,
    field: PerturbationField,
}

impl<M: Endomorphism> PerturbedMap<M> {
    pub fn new(inner: M, field: PerturbationField) -> Self {
        Self { inner, field }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn field(&self) -> &PerturbationField {
        &self.field
    }
}

impl<M: Endomorphism> Endomorphism for PerturbedMap<M> {
    fn base_dim(&self) -> usize {
        self.inner.base_dim()
    }

    fn eval(&self, pt: &TorusPoint) -> TorusPoint {
        let out = self.inner.eval(pt);
        if self.field.is_zero() {
            return out;
        }
        let z = self.field.eval(pt);
        let shifted: Vec<f64> = out.coords().iter().zip(&z).map(|(a, b)| reduce(a + b)).collect();
        TorusPoint::new(&shifted)
    }

    fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64> {
        let j = self.inner.jacobian(pt);
        if self.field.is_zero() {
            return j;
        }
        j + self.field.jacobian(pt)
    }

    fn step_precise(&self, pt: &mut PrecisePoint) {
        if self.field.is_zero() {
            return self.inner.step_precise(pt);
        }
        let z = self.field.eval(&pt.to_point());
        self.inner.step_precise(pt);
        let m1 = pt.base.len();
        for (b, dz) in pt.base.iter_mut().zip(&z[..m1]) {
            *b = b.add_f64(*dz);
        }
        pt.fiber = reduce(pt.fiber + z[m1]);
    }

    fn base_multiplier(&self) -> Option<u64> {
        self.inner.base_multiplier()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{finite_difference_jacobian, ProductMap};
    use crate::base::ExpandingBase;
    use crate::torus::{Arc, TorusBox};

    fn product() -> ProductMap {
        ProductMap::new(
            ExpandingBase::build(
                2,
                TorusBox::new(vec![Arc::new(0.0, 0.02).unwrap()]).unwrap(),
                TorusBox::new(vec![Arc::new(0.07, 0.02).unwrap()]).unwrap(),
                0.01,
            )
            .unwrap(),
        )
    }

    #[test]
    fn slope_bound_is_an_upper_bound() {
        let sup = (0..200_000)
            .map(|k| unit_bump_deriv(-1.0 + 2.0 * k as f64 / 200_000.0).abs())
            .fold(0.0, f64::max);
        assert!(sup < UNIT_BUMP_SLOPE_BOUND && sup > 2.17, "{sup}");
    }

    #[test]
    fn norms_within_budget() {
        for seed in 0..20 {
            let spec = PerturbationSpec::random(seed, 0.01, 4, 2).unwrap();
            assert!((spec.c1_bound() - 0.01).abs() < 1e-15);
            let (c0, c1) = spec.field().measured_norms(2, 2000, seed, 1e-6);
            assert!(c0 > 0.0 && c0 <= 0.01, "{c0}");
            assert!(c1 > 0.0 && c1 <= 0.01, "{c1}");
        }
    }

    #[test]
    fn refuses_large_eta() {
        assert!(PerturbationSpec::random(1, 0.5, 3, 2).is_err());
        assert!(PerturbationSpec::random(1, -0.1, 3, 2).is_err());
    }

    #[test]
    fn zero_eta_is_bit_identical() {
        let spec = PerturbationSpec::random(7, 0.0, 4, 2).unwrap();
        let f = product();
        let g = PerturbedMap::new(product(), spec.field());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let pt = TorusPoint::new(&[rng.gen(), rng.gen()]);
            assert_eq!(g.eval(&pt), f.eval(&pt));
            assert_eq!(g.jacobian(&pt), f.jacobian(&pt));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let spec = PerturbationSpec::random(3, 0.01, 4, 2).unwrap();
        let g = PerturbedMap::new(product(), spec.field());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let pt = TorusPoint::new(&[rng.gen(), rng.gen()]);
            let an = g.jacobian(&pt);
            let fd = finite_difference_jacobian(&g, &pt, 1e-6);
            assert!((&an - &fd).abs().max() < 1e-5 * an.abs().max(), "{an} {fd}");
        }
    }

    #[test]
    fn exclusion_keeps_bumps_away() {
        let ex = Exclusion {
            center: TorusPoint::new(&[0.25, 0.25]),
            radius: 0.12,
        };
        let spec = PerturbationSpec::random_avoiding(5, 0.01, 4, 2, Some(&ex)).unwrap();
        let field = spec.field();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let pt = TorusPoint::new(&[
                0.25 + rng.gen_range(-0.12..0.12),
                0.25 + rng.gen_range(-0.12..0.12),
            ]);
            assert_eq!(field.eval(&pt), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn precise_step_matches_eval() {
        let spec = PerturbationSpec::random(9, 0.01, 4, 2).unwrap();
        let g = PerturbedMap::new(product(), spec.field());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..500 {
            let pt = TorusPoint::new(&[rng.gen(), rng.gen()]);
            let mut p = PrecisePoint::from_point(&pt);
            g.step_precise(&mut p);
            assert!(p.to_point().dist(&g.eval(&pt)) < 1e-15);
        }
    }
}
