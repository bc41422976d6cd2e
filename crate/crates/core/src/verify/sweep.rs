//! Seeded C¹-small perturbations of the singular map and the two robust
//! properties checked on each of them.

use serde::Serialize;

use crate::error::Result;
use crate::map::Endomorphism;
use crate::perturb::{PerturbationSpec, PerturbedMap};
use crate::surgery::{bisect_det, CriticalPoint, SingularMap, CRITICAL_REL_TOL};
use crate::torus::circle_delta;
use crate::verify::transitivity::box_transitivity;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub trials: usize,
    pub eta: f64,
    pub seed: u64,
    pub bump_count: usize,
    /// Transitivity is checked on the first this-many trials.
    pub transitivity_trials: usize,
    pub grid_k: usize,
    pub horizon: usize,
    pub samples_per_cell: usize,
    /// Samples used to measure the perturbation norms.
    pub norm_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            eta: 0.01,
            seed: 0,
            bump_count: 4,
            transitivity_trials: 20,
            grid_k: 32,
            horizon: 40,
            samples_per_cell: 25,
            norm_samples: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub measured_c0: f64,
    pub measured_c1: f64,
    pub det_q1: f64,
    pub det_q2: f64,
    pub zero: Option<CriticalPoint>,
    pub singular_pass: bool,
    pub transitive_pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub trials: Vec<TrialResult>,
}

impl SweepReport {
    pub fn singular_passes(&self) -> usize {
        self.trials.iter().filter(|t| t.singular_pass).count()
    }

    pub fn transitive_checked(&self) -> usize {
        self.trials.iter().filter(|t| t.transitive_pass.is_some()).count()
    }

    pub fn transitive_passes(&self) -> usize {
        self.trials.iter().filter(|t| t.transitive_pass == Some(true)).count()
    }

    pub fn all_pass(&self) -> bool {
        self.trials
            .iter()
            .all(|t| t.singular_pass && t.transitive_pass != Some(false))
    }
}

/// Zero of `det` on the fiber segment from `(s1, q1)` to `(s1, q2)`.
pub fn singular_check<M: Endomorphism + ?Sized>(
    map: &M,
    a: &SingularMap,
) -> (f64, f64, Option<CriticalPoint>) {
    let (q1, q2) = (a.q1(), a.q2());
    let tol = CRITICAL_REL_TOL * a.skew().base().det();
    let (d1, d2) = (map.det(&q1), map.det(&q2));
    let start = [q1.coord(0), q1.fiber()];
    let end = [q1.coord(0), q1.fiber() + circle_delta(q1.fiber(), q2.fiber())];
    let zero = if d1 > 0.0 && d2 < 0.0 {
        bisect_det(map, &start, &end, tol)
    } else {
        None
    };
    (d1, d2, zero)
}

pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

pub fn robustness_sweep(map: &SingularMap, cfg: &SweepConfig) -> Result<SweepReport> {
    let mut trials = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, trial);
        let spec = PerturbationSpec::random(seed, cfg.eta, cfg.bump_count, map.dim())?;
        let field = spec.field();
        let (c0, c1) = field.measured_norms(map.dim(), cfg.norm_samples, seed, 1e-6);
        let g = PerturbedMap::new(map, field);
        let (det_q1, det_q2, zero) = singular_check(&g, map);
        let transitive_pass = if trial < cfg.transitivity_trials {
            Some(
                box_transitivity(&g, cfg.grid_k, cfg.horizon, cfg.samples_per_cell, seed)?
                    .strongly_connected,
            )
        } else {
            None
        };
        trials.push(TrialResult {
            trial,
            seed,
            measured_c0: c0,
            measured_c1: c1,
            det_q1,
            det_q2,
            singular_pass: zero.is_some(),
            zero,
            transitive_pass,
        });
    }
    Ok(SweepReport {
        config: cfg.clone(),
        trials,
    })
}
