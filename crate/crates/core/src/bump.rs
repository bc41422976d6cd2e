//! Smooth bump `u` equal to 1 on `U ∪ V` and 0 off `U_eps ∪ V_eps`.

use arrayvec::ArrayVec;
use serde::Serialize;

use crate::torus::{circle_delta, dist_circle, TorusBox};

/// `exp(-1/t)` for `t > 0`, else 0.
fn flat_exp(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// C-infinity step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = flat_exp(t);
        a / (a + flat_exp(1.0 - t))
    }
}

pub fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let (a, b) = (flat_exp(t), flat_exp(1.0 - t));
    let (da, db) = (a / (t * t), b / ((1.0 - t) * (1.0 - t)));
    (da * b + a * db) / ((a + b) * (a + b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BlendBranch {
    /// Inside `U_eps`: the fiber follows `g1`.
    U,
    /// Inside `V_eps`: the fiber follows `g2`.
    V,
    /// Outside both fattened boxes.
    Outside,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BumpSample {
    pub value: f64,
    pub grad: ArrayVec<f64, 2>,
    pub branch: BlendBranch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpProfile {
    u: TorusBox,
    v: TorusBox,
    epsilon: f64,
}

impl BumpProfile {
    pub fn new(u: TorusBox, v: TorusBox, epsilon: f64) -> Self {
        Self { u, v, epsilon }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Product over coordinates of `1 - smoothstep(excess / eps)`.
    fn box_factor(&self, b: &TorusBox, x: &[f64]) -> (f64, ArrayVec<f64, 2>) {
        let mut factors: ArrayVec<f64, 2> = ArrayVec::new();
        let mut partials: ArrayVec<f64, 2> = ArrayVec::new();
        for (arc, &xi) in b.arcs().iter().zip(x) {
            let excess = (dist_circle(xi, arc.center()) - arc.half_width()) / self.epsilon;
            factors.push(1.0 - smoothstep(excess));
            let sign = circle_delta(arc.center(), xi).signum();
            partials.push(-smoothstep_deriv(excess) * sign / self.epsilon);
        }
        let value = factors.iter().product();
        let grad = (0..factors.len())
            .map(|i| {
                factors
                    .iter()
                    .enumerate()
                    .map(|(j, &f)| if i == j { partials[i] } else { f })
                    .product()
            })
            .collect();
        (value, grad)
    }

    pub fn branch(&self, x: &[f64]) -> BlendBranch {
        if self.u.fatten(self.epsilon).contains(x) {
            BlendBranch::U
        } else if self.v.fatten(self.epsilon).contains(x) {
            BlendBranch::V
        } else {
            BlendBranch::Outside
        }
    }

    pub fn sample(&self, x: &[f64]) -> BumpSample {
        let branch = self.branch(x);
        let (value, grad) = match branch {
            BlendBranch::U => self.box_factor(&self.u, x),
            BlendBranch::V => self.box_factor(&self.v, x),
            BlendBranch::Outside => (0.0, x.iter().map(|_| 0.0).collect()),
        };
        BumpSample {
            value,
            grad,
            branch,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.sample(x).value
    }

    pub fn grad(&self, x: &[f64]) -> ArrayVec<f64, 2> {
        self.sample(x).grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{reduce, Arc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn profile() -> BumpProfile {
        BumpProfile::new(
            TorusBox::new(vec![Arc::new(0.0, 0.02).unwrap()]).unwrap(),
            TorusBox::new(vec![Arc::new(0.07, 0.02).unwrap()]).unwrap(),
            0.01,
        )
    }

    #[test]
    fn smoothstep_shape() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert!(smoothstep_deriv(0.5) > 0.0);
        assert!(smoothstep(0.3) < smoothstep(0.31));
        for i in 1..100 {
            let t = i as f64 / 100.0;
            assert!(smoothstep(t) >= smoothstep(t - 0.01));
        }
    }

    #[test]
    fn one_on_blocks_zero_outside() {
        let b = profile();
        assert_eq!(b.eval(&[0.0]), 1.0);
        assert_eq!(b.eval(&[0.985]), 1.0);
        assert_eq!(b.eval(&[0.07]), 1.0);
        assert_eq!(b.grad(&[0.01])[0], 0.0);
        assert_eq!(b.eval(&[0.5]), 0.0);
        assert_eq!(b.eval(&[0.2]), 0.0);
        assert_eq!(b.grad(&[0.2])[0], 0.0);
    }

    #[test]
    fn ramp_midpoint() {
        let b = profile();
        let s = b.sample(&[0.025]);
        assert!((s.value - 0.5).abs() < 1e-15);
        assert!(s.grad[0] < 0.0);
        assert_eq!(s.branch, BlendBranch::U);
        let s = b.sample(&[0.045]);
        assert!((s.value - 0.5).abs() < 1e-12);
        assert!(s.grad[0] > 0.0);
        assert_eq!(s.branch, BlendBranch::V);
    }

    #[test]
    fn values_in_unit_interval_and_gradient_matches_fd() {
        let b = profile();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-7;
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-0.04..0.11);
            let v = b.eval(&[reduce(x)]);
            assert!((0.0..=1.0).contains(&v));
            let fd = (b.eval(&[reduce(x + h)]) - b.eval(&[reduce(x - h)])) / (2.0 * h);
            let an = b.grad(&[reduce(x)])[0];
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "x={x}: {fd} vs {an}");
        }
    }

    #[test]
    fn product_ramp_in_two_dimensions() {
        let b = BumpProfile::new(
            TorusBox::new(vec![Arc::new(0.0, 0.02).unwrap(), Arc::new(0.0, 0.02).unwrap()]).unwrap(),
            TorusBox::new(vec![Arc::new(0.07, 0.02).unwrap(), Arc::new(0.07, 0.02).unwrap()])
                .unwrap(),
            0.01,
        );
        assert_eq!(b.eval(&[0.01, 0.99]), 1.0);
        let s = b.sample(&[0.025, 0.025]);
        assert!((s.value - 0.25).abs() < 1e-15);
        assert!(s.grad[0] < 0.0 && s.grad[1] < 0.0);
        assert_eq!(b.eval(&[0.01, 0.5]), 0.0);
    }
}
