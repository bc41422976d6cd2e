//! Extended-precision base coordinates for deep iteration.
//!
//! Every `f64` is a dyadic rational, so iterating `x -> 2^k x mod 1` in
//! double precision collapses onto the fixed point `0` after about `53/k`
//! steps. Orbits that need more steps carry their base coordinates as
//! 512-bit binary fractions, on which multiplication by an integer modulo 1
//! is exact.

use arrayvec::ArrayVec;
use rand::Rng;

use crate::torus::{reduce, TorusPoint, MAX_DIM};

pub const LIMBS: usize = 8;
pub const FRACTION_BITS: u32 = 64 * LIMBS as u32;

/// A number in `[0, 1)` stored as `sum limbs[i] * 2^(-64 (i + 1))`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Fixed {
    limbs: [u64; LIMBS],
}

const TWO_POW_64: f64 = 18446744073709551616.0;

impl Fixed {
    pub const ZERO: Fixed = Fixed { limbs: [0; LIMBS] };

    /// Exact conversion (bits below `2^-512` are dropped).
    pub fn from_f64(x: f64) -> Self {
        let mut rest = reduce(x);
        let mut limbs = [0u64; LIMBS];
        for limb in limbs.iter_mut() {
            if rest == 0.0 {
                break;
            }
            let scaled = rest * TWO_POW_64;
            let whole = scaled.floor();
            *limb = whole as u64;
            rest = scaled - whole;
        }
        Fixed { limbs }
    }

    pub fn to_f64(&self) -> f64 {
        let hi = self.limbs[0] as f64 / TWO_POW_64;
        let lo = self.limbs[1] as f64 / (TWO_POW_64 * TWO_POW_64);
        reduce(hi + lo)
    }

    pub fn limbs(&self) -> &[u64; LIMBS] {
        &self.limbs
    }

    /// `k * self mod 1`.
    pub fn mul_u64(&self, k: u64) -> Self {
        let mut limbs = [0u64; LIMBS];
        let mut carry: u128 = 0;
        for i in (0..LIMBS).rev() {
            let t = self.limbs[i] as u128 * k as u128 + carry;
            limbs[i] = t as u64;
            carry = t >> 64;
        }
        Fixed { limbs }
    }

    /// `self + other mod 1`.
    pub fn add(&self, other: &Fixed) -> Self {
        let mut limbs = [0u64; LIMBS];
        let mut carry = false;
        for i in (0..LIMBS).rev() {
            let (s1, c1) = self.limbs[i].overflowing_add(other.limbs[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            limbs[i] = s2;
            carry = c1 || c2;
        }
        Fixed { limbs }
    }

    /// `self + x mod 1` for any finite `x`.
    pub fn add_f64(&self, x: f64) -> Self {
        self.add(&Fixed::from_f64(x))
    }

    /// The branch-`j` preimage `(self + j) / degree` under `x -> degree x`.
    pub fn preimage(&self, branch: u64, degree: u64) -> Self {
        debug_assert!(branch < degree);
        let mut limbs = [0u64; LIMBS];
        let mut rem = branch as u128;
        for i in 0..LIMBS {
            let cur = (rem << 64) | self.limbs[i] as u128;
            limbs[i] = (cur / degree as u128) as u64;
            rem = cur % degree as u128;
        }
        Fixed { limbs }
    }

    /// Fill every limb after the first two with random bits, i.e. move the
    /// point by less than `2^-128` to a generic neighbour.
    pub fn with_random_tail<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        for limb in self.limbs.iter_mut().skip(2) {
            *limb = rng.gen();
        }
        self
    }
}

/// Orbit state: extended-precision base coordinates and an `f64` fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisePoint {
    pub base: ArrayVec<Fixed, { MAX_DIM - 1 }>,
    pub fiber: f64,
}

impl PrecisePoint {
    pub fn from_point(pt: &TorusPoint) -> Self {
        Self {
            base: pt.base().iter().map(|&x| Fixed::from_f64(x)).collect(),
            fiber: pt.fiber(),
        }
    }

    pub fn to_point(&self) -> TorusPoint {
        let base: ArrayVec<f64, { MAX_DIM - 1 }> = self.base.iter().map(Fixed::to_f64).collect();
        TorusPoint::from_parts(&base, self.fiber)
    }

    pub fn with_random_tail<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        for b in self.base.iter_mut() {
            *b = b.with_random_tail(rng);
        }
        self
    }
}

/// Number of fraction bits a multiplication by `k` shifts out for good.
pub fn bits_lost_per_step(k: u64) -> u32 {
    k.trailing_zeros()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn doubling_collapses_in_f64_but_not_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0: f64 = 0.123456789;
        let mut x = x0;
        for _ in 0..60 {
            x = reduce(32.0 * x);
        }
        assert_eq!(x, 0.0);
        let mut fx = Fixed::from_f64(x0).with_random_tail(&mut rng);
        for _ in 0..60 {
            fx = fx.mul_u64(32);
        }
        assert_ne!(fx, Fixed::ZERO);
    }

    #[test]
    fn fixed_matches_f64_while_exact() {
        let x0 = 0.3141592653589793;
        let mut x = x0;
        let mut fx = Fixed::from_f64(x0);
        for _ in 0..9 {
            x = reduce(32.0 * x);
            fx = fx.mul_u64(32);
            assert_eq!(fx.to_f64(), x);
        }
    }

    #[test]
    fn preimage_inverts_multiplication() {
        let x = Fixed::from_f64(0.7071);
        for j in 0..32 {
            let pre = x.preimage(j, 32);
            assert_eq!(pre.mul_u64(32), x);
            let approx = pre.to_f64();
            assert!((approx - (0.7071 + j as f64) / 32.0).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_offsets_wrap() {
        let x = Fixed::from_f64(0.25).add_f64(-0.5);
        assert_eq!(x.to_f64(), 0.75);
    }

    proptest! {
        #[test]
        fn f64_round_trip(x in 0.0f64..1.0) {
            prop_assert_eq!(Fixed::from_f64(x).to_f64(), x);
        }

        #[test]
        fn add_commutes_with_f64(a in 0.0f64..1.0, b in -2.0f64..2.0) {
            let s = Fixed::from_f64(a).add_f64(b).to_f64();
            let expect = reduce(a + b);
            let d = (s - expect).abs();
            prop_assert!(d.min(1.0 - d) < 1e-15);
        }

        #[test]
        fn multiplication_distributes(a in 0.0f64..1.0, k in 2u64..100, m in 2u64..100) {
            let x = Fixed::from_f64(a);
            prop_assert_eq!(x.mul_u64(k).mul_u64(m), x.mul_u64(k * m));
        }
    }
}
