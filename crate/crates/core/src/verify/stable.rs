//! Points of an arbitrary box whose forward orbit lands on `{p} x B`.
//!
//! The construction follows the base itinerary forward on arcs: first free
//! steps until the base image is the whole circle (through a tiny sliver when
//! the fiber image varies with `x` on the whole arc), then one step per letter
//! of a semigroup word steering the fiber into `B`, each time through the
//! matching blending block. The base point is then solved backwards from
//! `p = 0` by exact preimages.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{IfsPair, Letter};
use crate::map::{BranchKind, SkewProduct};
use crate::precise::{bits_lost_per_step, Fixed, PrecisePoint, FRACTION_BITS};
use crate::torus::{dist_circle, reduce, Arc, TorusBox, TorusPoint};

/// Default radius of the ball `B` around `a1`.
pub const STABLE_BALL_RADIUS: f64 = 0.05;
/// Default landing tolerance.
pub const LANDING_TOL: f64 = 1e-6;

const WORD_MAX_DEPTH: usize = 200;
const FREE_STEP_LIMIT: usize = 64;
const PINCH_HALF_WIDTH: f64 = 1e-12;
const PINCH_MARGIN: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StableWitness {
    pub point: TorusPoint,
    #[serde(skip)]
    pub precise: PrecisePoint,
    pub m: usize,
    pub n: usize,
    pub word: String,
    pub landing: TorusPoint,
    pub landing_error: f64,
}

/// Sup-metric distance from `pt` to `{p} x ball` on a circle base.
pub fn distance_to_target(pt: &TorusPoint, p: f64, ball: &Arc) -> f64 {
    let dx = dist_circle(pt.coord(0), p);
    let dy = (dist_circle(pt.fiber(), ball.center()) - ball.half_width()).max(0.0);
    dx.max(dy)
}

/// Forward replay of a precise orbit state; returns the end point.
pub fn replay<M: SkewProduct + ?Sized>(map: &M, start: &PrecisePoint, steps: usize) -> TorusPoint {
    let mut pt = start.clone();
    for _ in 0..steps {
        map.step_precise(&mut pt);
    }
    pt.to_point()
}

pub fn stable_witness<M: SkewProduct + ?Sized>(
    map: &M,
    pair: &IfsPair,
    w: &TorusBox,
    ball: &Arc,
    tol: f64,
) -> Result<StableWitness> {
    if w.dim() != 2 || map.base_dim() != 1 {
        return Err(Error::Domain("stable witnesses are built on T^2".into()));
    }
    let base = map.base_map();
    let mult = base.multiplier();
    let (w1, w2) = (w.arcs()[0], w.arcs()[1]);
    let y0 = if w2.contains(pair.a1()) { pair.a1() } else { w2.center() };

    // itinerary[t] is the base arc used at step t; the fiber is constant on it
    let mut itinerary: Vec<Arc> = Vec::new();
    let mut current = w1;
    let mut y = y0;
    let mut pinched = false;
    let step = |arc: &Arc, y: f64, itinerary: &mut Vec<Arc>| -> (Arc, f64) {
        let (lo, hi) = arc.lifted();
        let next_y = map.fiber_image(reduce(0.5 * (lo + hi)), y);
        itinerary.push(*arc);
        let d = mult as f64;
        (Arc::from_lifted(d * lo, d * hi).expect("positive width"), next_y)
    };

    while current.width() < 1.0 {
        if itinerary.len() >= FREE_STEP_LIMIT {
            return Err(Error::SearchExhausted(
                "base arc did not grow to the whole circle".into(),
            ));
        }
        let part = map
            .fiber_branches(y)
            .iter()
            .flat_map(|b| current.intersection(&b.arc))
            .max_by(|a, b| a.width().total_cmp(&b.width()));
        let part = match part {
            Some(part) => part,
            None => {
                // the fiber image depends on x all over the arc; follow a
                // sliver short enough that the spread stays negligible
                pinched = true;
                Arc::new(current.center(), PINCH_HALF_WIDTH)?
            }
        };
        (current, y) = step(&part, y, &mut itinerary);
    }
    let m = itinerary.len();

    let margin = if pinched { PINCH_MARGIN } else { 1e-9 };
    let target = ball.shrink(margin).unwrap_or(*ball);
    let word = pair.branch_to_target(y, &target, WORD_MAX_DEPTH)?;
    for letter in word.acting_order() {
        let kind = match letter {
            Letter::G1 => BranchKind::G1,
            Letter::G2 => BranchKind::G2,
        };
        let block = map
            .fiber_branches(y)
            .into_iter()
            .find(|b| b.kind == kind)
            .ok_or_else(|| Error::Internal(format!("map has no {kind:?} branch")))?
            .arc;
        // current is the whole circle, so the block is inside it
        (current, y) = step(&block, y, &mut itinerary);
        debug_assert!(current.width() >= 1.0);
    }
    let n = word.len();

    let steps = m + n;
    if steps as u32 * bits_lost_per_step(mult) > FRACTION_BITS - 64 {
        return Err(Error::Precision(format!(
            "{steps} steps exceed the extended-precision budget"
        )));
    }
    let mut x = Fixed::ZERO;
    for (t, part) in itinerary.iter().enumerate().rev() {
        let guess = (part.center() * mult as f64 - x.to_f64()).round() as i64;
        x = (-3i64..=3)
            .map(|o| x.preimage((guess + o).rem_euclid(mult as i64) as u64, mult))
            .filter(|p| part.contains(p.to_f64()))
            .min_by(|a, b| {
                dist_circle(a.to_f64(), part.center()).total_cmp(&dist_circle(b.to_f64(), part.center()))
            })
            .ok_or_else(|| Error::Internal(format!("no preimage inside the step-{t} arc")))?;
    }
    let precise = PrecisePoint {
        base: [x].into_iter().collect(),
        fiber: y0,
    };
    let point = precise.to_point();
    if !w.contains(point.coords()) {
        return Err(Error::Internal("witness left the target box".into()));
    }
    let landing = replay(map, &precise, steps);
    let landing_error = distance_to_target(&landing, base.p().coord(0), ball);
    if landing_error >= tol {
        return Err(Error::Internal(format!(
            "witness lands at distance {landing_error:e} from {{p}} x B, tolerance {tol:e}"
        )));
    }
    Ok(StableWitness {
        point,
        precise,
        m,
        n,
        word: word.to_string(),
        landing,
        landing_error,
    })
}
