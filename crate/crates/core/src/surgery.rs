//! Local surgery that turns the skew product into a singular map `A`.
//!
//! Inside the ball `B(s, r)` the fiber is pushed by `phi(mu2(y)) * psi(|mu1(x)|^2)`.
//! With `phi'(1/4) psi(1/16) = 1` the Jacobian determinant vanishes at `s`,
//! and it takes opposite signs at the two marked points `q1`, `q2` above `s1`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::map::{BranchKind, Endomorphism, FiberBranch, SkewProduct};
use crate::precise::PrecisePoint;
use crate::skew::SkewMap;
use crate::torus::{circle_delta, Arc, TorusBox, TorusPoint};

pub const PSI_PEAK_AT: f64 = 1.0 / 16.0;
pub const PSI_PEAK: f64 = 2.0;

/// `2 exp(1 - 1/(1 - z^2))` with `z = (t - 1/16) / theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsiProfile {
    theta: f64,
}

impl PsiProfile {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PSI_PEAK_AT) {
            return Err(Error::Config(format!(
                "psi needs 0 < theta < 1/16 so its support stays in t > 0, got theta = {theta}"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Open support `(1/16 - theta, 1/16 + theta)`.
    pub fn support(&self) -> (f64, f64) {
        (PSI_PEAK_AT - self.theta, PSI_PEAK_AT + self.theta)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = (t - PSI_PEAK_AT) / self.theta;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        PSI_PEAK * (1.0 - 1.0 / (1.0 - z * z)).exp()
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let z = (t - PSI_PEAK_AT) / self.theta;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - z * z;
        self.eval(t) * (-2.0 * z / (w * w)) / self.theta
    }
}

/// C² piecewise quintic through five knots spaced `delta/4` apart, starting
/// at `1/4 - delta/4`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiProfile {
    delta: f64,
    knots: [f64; 5],
    /// Monomial coefficients in the local variable `(t - knot_i) / h`.
    segments: [[f64; 6]; 4],
}

/// First derivatives at the five knots.
const PHI_SLOPES: [f64; 5] = [0.0, 0.5, -3.0, 3.0, 0.0];
/// Second derivatives at the knots, in units of `1/delta`.
const PHI_CURVATURES: [f64; 5] = [0.0, -6.0, 5.0, 6.0, 0.0];

impl PhiProfile {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("phi needs 0 < delta < 1, got {delta}")));
        }
        let h = delta / 4.0;
        let knots: [f64; 5] = std::array::from_fn(|i| 0.25 + (i as f64 - 1.0) * h);
        let segments = std::array::from_fn(|i| {
            let (v0, v1) = (h * PHI_SLOPES[i], h * PHI_SLOPES[i + 1]);
            let (a0, a1) = (
                h * h * PHI_CURVATURES[i] / delta,
                h * h * PHI_CURVATURES[i + 1] / delta,
            );
            // knot values are all zero
            [
                0.0,
                v0,
                a0 / 2.0,
                -6.0 * v0 - 4.0 * v1 - (3.0 * a0 - a1) / 2.0,
                8.0 * v0 + 7.0 * v1 + (3.0 * a0 - 2.0 * a1) / 2.0,
                -3.0 * v0 - 3.0 * v1 - (a0 - a1) / 2.0,
            ]
        });
        Ok(Self {
            delta,
            knots,
            segments,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn knots(&self) -> [f64; 5] {
        self.knots
    }

    /// Closed support `[1/4 - delta/4, 1/4 + 3 delta/4]`.
    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[4])
    }

    pub fn slopes(&self) -> [f64; 5] {
        PHI_SLOPES
    }

    pub fn curvatures(&self) -> [f64; 5] {
        PHI_CURVATURES.map(|c| c / self.delta)
    }

    /// Value and first two derivatives.
    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        let h = self.delta / 4.0;
        if !(t > self.knots[0] && t < self.knots[4]) {
            return (0.0, 0.0, 0.0);
        }
        let i = (((t - self.knots[0]) / h) as usize).min(3);
        let s = (t - self.knots[i]) / h;
        let c = &self.segments[i];
        let p = ((((c[5] * s + c[4]) * s + c[3]) * s + c[2]) * s + c[1]) * s + c[0];
        let dp = (((5.0 * c[5] * s + 4.0 * c[4]) * s + 3.0 * c[3]) * s + 2.0 * c[2]) * s + c[1];
        let ddp = ((20.0 * c[5] * s + 12.0 * c[4]) * s + 6.0 * c[3]) * s + 2.0 * c[2];
        (p, dp / h, ddp / (h * h))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.jet(t).0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.jet(t).1
    }

    pub fn second_deriv(&self, t: f64) -> f64 {
        self.jet(t).2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurgeryParams {
    pub r: f64,
    pub theta: f64,
    pub delta: f64,
    /// Chart coordinates of `s`, base first.
    pub s_chart: Vec<f64>,
}

impl Default for SurgeryParams {
    fn default() -> Self {
        Self {
            r: 0.12,
            theta: 0.03,
            delta: 0.04,
            s_chart: vec![0.25, 0.25],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularMap {
    skew: SkewMap,
    chart: Chart,
    s: TorusPoint,
    s_chart: Vec<f64>,
    r: f64,
    psi: PsiProfile,
    phi: PhiProfile,
}

const TIGHT: f64 = 1e-12;

impl SingularMap {
    pub fn new(skew: SkewMap, params: &SurgeryParams) -> Result<Self> {
        let m1 = skew.base().dim();
        if m1 != 1 {
            return Err(Error::Config(format!(
                "the surgery is implemented over a circle base (m1 = 1), got m1 = {m1}"
            )));
        }
        let SurgeryParams {
            r,
            theta,
            delta,
            ref s_chart,
        } = *params;
        if !(0.0 < delta && delta < 2.0 * theta) {
            return Err(Error::Config(format!(
                "0<δ<2θ is violated: delta = {delta}, theta = {theta}"
            )));
        }
        if !(2.0 * theta < r) {
            return Err(Error::Config(format!(
                "0<2θ<r is violated: theta = {theta}, r = {r}"
            )));
        }
        if s_chart.len() != m1 + 1 {
            return Err(Error::DimensionMismatch {
                expected: m1 + 1,
                got: s_chart.len(),
            });
        }
        let s1_norm = s_chart[..m1].iter().map(|c| c * c).sum::<f64>().sqrt();
        if (s1_norm - 0.25).abs() > TIGHT || (s_chart[m1] - 0.25).abs() > TIGHT {
            return Err(Error::Config(format!(
                "s must satisfy |mu1(s1)| = 1/4 and mu2(s2) = 1/4, got chart coordinates {s_chart:?}"
            )));
        }
        if s1_norm - r < 0.1 {
            return Err(Error::Config(format!(
                "B(mu1(s1), r) must miss B(0, 1/10): |mu1(s1)| - r = {} < 1/10",
                s1_norm - r
            )));
        }
        let chart = Chart::centered(m1 + 1);
        let blocks = [skew.base().u_eps(), skew.base().v_eps()];
        let reach = chart.sup_norm_over(&blocks)?;
        if reach > 0.1 + TIGHT {
            return Err(Error::Config(format!(
                "mu1(U_eps ∪ V_eps) must lie in B(0, 1/10), reaches {reach}"
            )));
        }
        let psi = PsiProfile::new(theta)?;
        let phi = PhiProfile::new(delta)?;
        let s = chart.backward(s_chart)?;
        let map = Self {
            skew,
            chart,
            s,
            s_chart: s_chart.clone(),
            r,
            psi,
            phi,
        };
        let reach = map.support_reach();
        if reach >= r {
            return Err(Error::Config(format!(
                "the surgery support reaches {reach} from s, outside B(s, r) with r = {r}"
            )));
        }
        Ok(map)
    }

    pub fn skew(&self) -> &SkewMap {
        &self.skew
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn s(&self) -> &TorusPoint {
        &self.s
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn psi(&self) -> &PsiProfile {
        &self.psi
    }

    pub fn phi(&self) -> &PhiProfile {
        &self.phi
    }

    /// `(s1, q1)` with `mu2(q1) = 1/4 + delta/4`.
    pub fn q1(&self) -> TorusPoint {
        self.above_s1(self.phi.knots[2])
    }

    /// `(s1, q2)` with `mu2(q2) = 1/4 + delta/2`.
    pub fn q2(&self) -> TorusPoint {
        self.above_s1(self.phi.knots[3])
    }

    fn above_s1(&self, fiber_chart: f64) -> TorusPoint {
        let mut pt = self.s.clone();
        pt.set(pt.dim() - 1, self.chart.coord_inv(pt.dim() - 1, fiber_chart));
        pt
    }

    /// Closed box (in chart coordinates) outside which `phi * psi` vanishes,
    /// as `(base range, fiber range)` for `m1 = 1`.
    pub fn support_rect(&self) -> ((f64, f64), (f64, f64)) {
        let (t0, t1) = self.psi.support();
        ((t0.sqrt(), t1.sqrt()), self.phi.support())
    }

    /// Largest chart distance from `s` to a point of the support.
    pub fn support_reach(&self) -> f64 {
        let ((x0, x1), (y0, y1)) = self.support_rect();
        let (sx, sy) = (self.s_chart[0], self.s_chart[1]);
        let dx = (x0 - sx).abs().max((x1 - sx).abs());
        let dy = (y0 - sy).abs().max((y1 - sy).abs());
        dx.hypot(dy)
    }

    /// Chart coordinates of `pt` when it lies in the open ball `B(s, r)`.
    pub fn chart_in_ball(&self, pt: &TorusPoint) -> Option<Vec<f64>> {
        let v = self.chart.forward(pt).ok()?;
        let d2: f64 = v.iter().zip(&self.s_chart).map(|(a, b)| (a - b) * (a - b)).sum();
        (d2 < self.r * self.r).then_some(v)
    }

    pub fn in_ball(&self, pt: &TorusPoint) -> bool {
        self.chart_in_ball(pt).is_some()
    }

    /// `(phi(mu2 y), phi'(mu2 y), psi(|mu1 x|^2), psi'(|mu1 x|^2), |mu1 x|^2)`
    /// for a point in the ball.
    fn profiles(&self, v: &[f64]) -> (f64, f64, f64, f64, f64) {
        let m1 = v.len() - 1;
        let t: f64 = v[..m1].iter().map(|c| c * c).sum();
        let (p, dp, _) = self.phi.jet(v[m1]);
        (p, dp, self.psi.eval(t), self.psi.deriv(t), t)
    }

    fn fiber(&self, pt: &TorusPoint) -> f64 {
        if let Some(v) = self.chart_in_ball(pt) {
            let (p, _, q, _, _) = self.profiles(&v);
            let push = p * q;
            if push != 0.0 {
                let m1 = v.len() - 1;
                return self.chart.coord_inv(m1, v[m1] - push);
            }
        }
        self.skew.fiber(pt.base(), pt.fiber())
    }

    pub fn critical_trace(&self, resolution: f64) -> Result<CriticalTrace> {
        trace_critical_set(
            self,
            &self.s,
            self.r,
            resolution,
            CRITICAL_REL_TOL * self.skew.base().det(),
        )
    }
}

impl Endomorphism for SingularMap {
    fn base_dim(&self) -> usize {
        self.skew.base_dim()
    }

    fn eval(&self, pt: &TorusPoint) -> TorusPoint {
        let fx: Vec<f64> = pt.base().iter().map(|&c| self.skew.base().eval_coord(c)).collect();
        TorusPoint::from_parts(&fx, self.fiber(pt))
    }

    fn jacobian(&self, pt: &TorusPoint) -> DMatrix<f64> {
        let Some(v) = self.chart_in_ball(pt) else {
            return self.skew.jacobian(pt);
        };
        let m1 = v.len() - 1;
        let mut j = DMatrix::zeros(m1 + 1, m1 + 1);
        for i in 0..m1 {
            j[(i, i)] = self.skew.base().multiplier() as f64;
        }
        let (p, dp, q, dq, _) = self.profiles(&v);
        for i in 0..m1 {
            j[(m1, i)] = -p * dq * 2.0 * v[i];
        }
        j[(m1, m1)] = 1.0 - dp * q;
        j
    }

    fn det(&self, pt: &TorusPoint) -> f64 {
        match self.chart_in_ball(pt) {
            Some(v) => {
                let (_, dp, q, _, _) = self.profiles(&v);
                self.skew.base().det() * (1.0 - dp * q)
            }
            None => self.skew.det(pt),
        }
    }

    fn step_precise(&self, pt: &mut PrecisePoint) {
        let approx = pt.to_point();
        pt.fiber = self.fiber(&approx);
        for b in pt.base.iter_mut() {
            *b = self.skew.base().step_fixed(b);
        }
    }

    fn base_multiplier(&self) -> Option<u64> {
        Some(self.skew.base().multiplier())
    }
}

impl SkewProduct for SingularMap {
    fn base_map(&self) -> &crate::base::ExpandingBase {
        self.skew.base()
    }

    /// The skew branches. On fibers where `phi` is nonzero the base columns
    /// over the support of `psi` (both signs of `mu1`) are removed from the
    /// identity arcs; elsewhere `A` agrees with `f`.
    fn fiber_branches(&self, y: f64) -> Vec<FiberBranch> {
        let branches = self.skew.fiber_branches(y);
        let (lo, hi) = self.phi.support();
        if !self.chart.coord(1, y).is_some_and(|v| lo < v && v < hi) {
            return branches;
        }
        let ((x0, x1), _) = self.support_rect();
        let keep = [
            Arc::from_lifted(-x0, x0).expect("x0 > 0"),
            Arc::from_lifted(x1, 1.0 - x1).expect("x1 < 1/2"),
        ];
        branches
            .into_iter()
            .flat_map(|b| match b.kind {
                BranchKind::Identity => keep
                    .iter()
                    .flat_map(|k| b.arc.intersection(k))
                    .map(|arc| FiberBranch { arc, kind: b.kind })
                    .collect::<Vec<_>>(),
                _ => vec![b],
            })
            .collect()
    }

    fn fiber_image(&self, x: f64, y: f64) -> f64 {
        self.fiber(&TorusPoint::new(&[x, y]))
    }
}

/// Relative determinant tolerance for located critical points.
pub const CRITICAL_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub point: TorusPoint,
    pub det_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalTrace {
    pub points: Vec<CriticalPoint>,
    pub resolution: f64,
    pub tolerance: f64,
}

impl CriticalTrace {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest_to(&self, target: &TorusPoint) -> Option<f64> {
        self.points
            .iter()
            .map(|c| c.point.dist_euclid(target))
            .min_by(f64::total_cmp)
    }
}

/// Bisect `det` on the segment `a -> b` (given in lifted coordinates) whose
/// endpoint determinants have opposite signs; `None` when the residual
/// tolerance is not reached.
pub fn bisect_det<M: Endomorphism + ?Sized>(
    map: &M,
    a: &[f64],
    b: &[f64],
    tol: f64,
) -> Option<CriticalPoint> {
    let at = |t: f64| -> TorusPoint {
        let v: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect();
        TorusPoint::new(&v)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut d_lo = map.det(&at(lo));
    let d_hi = map.det(&at(hi));
    if d_lo == 0.0 {
        return Some(CriticalPoint {
            point: at(lo),
            det_residual: 0.0,
        });
    }
    if d_hi == 0.0 {
        return Some(CriticalPoint {
            point: at(hi),
            det_residual: 0.0,
        });
    }
    if d_lo.signum() == d_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let pt = at(mid);
        let d = map.det(&pt);
        if d.abs() <= tol {
            return Some(CriticalPoint {
                point: pt,
                det_residual: d.abs(),
            });
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if d.signum() == d_lo.signum() {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
        }
    }
    None
}

/// Grid scan of the ball `B(center, r)` on a two-dimensional torus for sign
/// changes of `det`, each refined by bisection to `|det| <= tol`.
pub fn trace_critical_set<M: Endomorphism + ?Sized>(
    map: &M,
    center: &TorusPoint,
    r: f64,
    resolution: f64,
    tol: f64,
) -> Result<CriticalTrace> {
    if !(resolution > 0.0) {
        return Err(Error::Domain(format!("resolution must be positive, got {resolution}")));
    }
    if center.dim() != 2 {
        return Err(Error::Domain("critical tracing runs on T^2 only".into()));
    }
    let n = (2.0 * r / resolution).ceil() as usize;
    let step = 2.0 * r / n as f64;
    let (cx, cy) = (center.coord(0), center.coord(1));
    let node = |i: usize, j: usize| [cx - r + i as f64 * step, cy - r + j as f64 * step];
    let inside = |v: &[f64; 2]| (v[0] - cx).hypot(v[1] - cy) < r;
    let pt = |v: &[f64; 2]| TorusPoint::new(v);

    let dets: Vec<Vec<f64>> = (0..=n)
        .into_par_iter()
        .map(|i| (0..=n).map(|j| map.det(&pt(&node(i, j)))).collect())
        .collect();

    let mut points: Vec<CriticalPoint> = (0..=n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut found = Vec::new();
            for j in 0..=n {
                let a = node(i, j);
                if !inside(&a) {
                    continue;
                }
                if dets[i][j] == 0.0 {
                    found.push(CriticalPoint {
                        point: pt(&a),
                        det_residual: 0.0,
                    });
                    continue;
                }
                for (ni, nj) in [(i + 1, j), (i, j + 1)] {
                    if ni > n || nj > n {
                        continue;
                    }
                    let b = node(ni, nj);
                    if dets[ni][nj] == 0.0 || dets[i][j].signum() == dets[ni][nj].signum() {
                        continue;
                    }
                    if let Some(c) = bisect_det(map, &a, &b, tol) {
                        let lifted = [
                            cx + circle_delta(cx, c.point.coord(0)),
                            cy + circle_delta(cy, c.point.coord(1)),
                        ];
                        if inside(&lifted) {
                            found.push(c);
                        }
                    }
                }
            }
            found
        })
        .collect();
    points.sort_by(|a, b| {
        a.point.coords()[0]
            .total_cmp(&b.point.coords()[0])
            .then(a.point.coords()[1].total_cmp(&b.point.coords()[1]))
    });
    Ok(CriticalTrace {
        points,
        resolution,
        tolerance: tol,
    })
}

/// Box around the surgery ball, handy for sampling.
pub fn ball_bounding_box(map: &SingularMap) -> TorusBox {
    TorusBox::new(
        map.s
            .coords()
            .iter()
            .map(|&c| Arc::new(c, map.r).expect("positive radius"))
            .collect(),
    )
    .expect("dimension fits")
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::ExpandingBase;
    use crate::ifs::{IfsPair, GOLDEN_ROTATION};
    use crate::map::finite_difference_jacobian;
    use crate::torus::reduce;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn skew() -> SkewMap {
        let base = ExpandingBase::build(
            2,
            TorusBox::new(vec![Arc::new(0.0, 0.02).unwrap()]).unwrap(),
            TorusBox::new(vec![Arc::new(0.07, 0.02).unwrap()]).unwrap(),
            0.01,
        )
        .unwrap();
        SkewMap::new(base, IfsPair::new(0.1, GOLDEN_ROTATION).unwrap())
    }

    fn singular() -> SingularMap {
        SingularMap::new(skew(), &SurgeryParams::default()).unwrap()
    }

    #[test]
    fn psi_examples() {
        let psi = PsiProfile::new(0.03).unwrap();
        assert_eq!(psi.eval(1.0 / 16.0), 2.0);
        assert_eq!(psi.deriv(1.0 / 16.0), 0.0);
        assert_eq!(psi.eval(1.0 / 16.0 + 0.03), 0.0);
        assert_eq!(psi.eval(0.5), 0.0);
        for k in 1..100 {
            let t = 1.0 / 16.0 - 0.03 + 0.06 * k as f64 / 100.0;
            let d = psi.deriv(t);
            if t < 1.0 / 16.0 - 1e-12 {
                assert!(d > 0.0);
            } else if t > 1.0 / 16.0 + 1e-12 {
                assert!(d < 0.0);
            }
        }
    }

    #[test]
    fn phi_knot_data() {
        let phi = PhiProfile::new(0.04).unwrap();
        let k = phi.knots();
        let want = [0.0, 0.5, -3.0, 3.0, 0.0];
        for i in 1..4 {
            let (v, d, _) = phi.jet(k[i] + 0.0);
            assert!(v.abs() < 1e-10, "value at knot {i}: {v}");
            assert!((d - want[i]).abs() < 1e-10, "slope at knot {i}: {d}");
        }
        assert_eq!(phi.jet(k[0]), (0.0, 0.0, 0.0));
        assert_eq!(phi.jet(k[4]), (0.0, 0.0, 0.0));
        assert_eq!(phi.eval(0.5), 0.0);
        assert!((phi.second_deriv(0.25) - (-6.0 / 0.04)).abs() < 1e-8);
    }

    #[test]
    fn phi_is_c2_across_knots() {
        let phi = PhiProfile::new(0.04).unwrap();
        let h = 1e-9;
        for t in phi.knots() {
            let (l, r) = (phi.jet(t - h), phi.jet(t + h));
            assert!((l.0 - r.0).abs() < 1e-8);
            assert!((l.1 - r.1).abs() < 1e-6);
            let (l2, r2) = (phi.second_deriv(t - 1e-12), phi.second_deriv(t + 1e-12));
            assert!((l2 - r2).abs() < 1e-5, "second derivative jumps at {t}: {l2} {r2}");
        }
    }

    #[test]
    fn determinant_identities() {
        let a = singular();
        let det_f = a.skew().base().det();
        assert_eq!(det_f, 32.0);
        let d1 = a.det(&a.q1());
        let d2 = a.det(&a.q2());
        let d0 = a.det(a.s());
        assert!((d1 - 7.0 * det_f).abs() <= 1e-9 * 7.0 * det_f, "{d1}");
        assert!((d2 + 5.0 * det_f).abs() <= 1e-9 * 5.0 * det_f, "{d2}");
        assert!(d0.abs() <= 1e-9 * det_f, "{d0}");
    }

    #[test]
    fn marked_points_are_unmoved_in_the_fiber() {
        let a = singular();
        assert_eq!(a.eval(a.s()), TorusPoint::new(&[0.0, 0.25]));
        let q1 = a.q1();
        assert_eq!(a.eval(&q1).fiber(), q1.fiber());
        assert!(a.in_ball(&q1) && a.in_ball(&a.q2()));
    }

    #[test]
    fn parameter_chain_is_enforced() {
        let bad = |p: SurgeryParams| SingularMap::new(skew(), &p).unwrap_err().to_string();
        let msg = bad(SurgeryParams {
            delta: 0.08,
            ..SurgeryParams::default()
        });
        assert!(msg.contains("0<δ<2θ"), "{msg}");
        let msg = bad(SurgeryParams {
            theta: 0.05,
            delta: 0.04,
            r: 0.1,
            ..SurgeryParams::default()
        });
        assert!(msg.contains("0<2θ<r"), "{msg}");
        let msg = bad(SurgeryParams {
            r: 0.16,
            ..SurgeryParams::default()
        });
        assert!(msg.contains("B(0, 1/10)"), "{msg}");
    }

    #[test]
    fn equals_skew_map_off_the_support() {
        let a = singular();
        let f = skew();
        let ((x0, x1), (y0, y1)) = a.support_rect();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 10_000 {
            let pt = TorusPoint::new(&[rng.gen(), rng.gen()]);
            let (x, y) = (pt.coord(0), pt.coord(1));
            if x > x0 && x < x1 && y >= y0 && y <= y1 {
                continue;
            }
            assert_eq!(a.eval(&pt), f.eval(&pt));
            checked += 1;
        }
    }

    #[test]
    fn jacobian_and_det_match_finite_differences_in_ball() {
        let a = singular();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = a.s().clone();
        let mut checked = 0;
        while checked < 2000 {
            let pt = TorusPoint::new(&[
                s.coord(0) + rng.gen_range(-0.12..0.12),
                s.coord(1) + rng.gen_range(-0.12..0.12),
            ]);
            if !a.in_ball(&pt) {
                continue;
            }
            checked += 1;
            let an = a.jacobian(&pt);
            let fd = finite_difference_jacobian(&a, &pt, 1e-6);
            let err = (&an - &fd).abs().max();
            assert!(err / an.abs().max() < 1e-5, "{pt:?}: {an} {fd}");
            let det = a.det(&pt);
            assert!((det - an.determinant()).abs() <= 1e-9 * 32.0);
        }
    }

    #[test]
    fn critical_set_near_s() {
        let a = singular();
        let trace = a.critical_trace(0.005).unwrap();
        assert!(!trace.is_empty());
        assert!(trace.nearest_to(a.s()).unwrap() <= 0.005);
        for c in &trace.points {
            assert!(c.det_residual <= 1e-9 * 32.0);
            assert!(a.in_ball(&c.point));
        }
        let control = trace_critical_set(&skew(), a.s(), a.r(), 0.005, 32e-9).unwrap();
        assert!(control.is_empty());
    }

    #[test]
    fn halved_delta_still_singular() {
        let p = SurgeryParams {
            delta: 0.02,
            ..SurgeryParams::default()
        };
        let a = SingularMap::new(skew(), &p).unwrap();
        assert!(a.det(&a.q1()) > 0.0 && a.det(&a.q2()) < 0.0);
        assert!(!a.critical_trace(0.004).unwrap().is_empty());
    }

    #[test]
    fn branches_skip_the_surgery_column() {
        let a = singular();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for y in [0.245, 0.25, 0.26, 0.275, 0.3, 0.7] {
            for br in a.fiber_branches(y) {
                let (lo, hi) = br.arc.lifted();
                let first = a.fiber_image(reduce(lo + 1e-9), y);
                for _ in 0..500 {
                    let x = reduce(rng.gen_range(lo..hi));
                    assert_eq!(a.fiber_image(x, y), first);
                }
            }
        }
    }
}
