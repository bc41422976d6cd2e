//! The verification commands. Each one adds its artifacts to the run and
//! returns whether its check passed.

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtmap_core::chart::Chart;
use rtmap_core::precise::PrecisePoint;
use rtmap_core::surgery::{trace_critical_set, CRITICAL_REL_TOL};
use rtmap_core::verify::{
    classify_point, replay_cell, robustness_sweep, scan_fixed_points, semigroup_row_oracle,
    stable_witness, unstable_coverage, FixedPointKind, ReachabilityGrid,
};
use rtmap_core::{AnyMap, Arc, Endomorphism, Error, IfsPair, MapKind, SkewProduct, TorusBox, TorusPoint};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{scale_to_bytes, Artifacts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Build,
    Orbit,
    FixedPoints,
    UnstableCoverage,
    StableWitness,
    Transitivity,
    CriticalSet,
    Cantor,
    PerturbSweep,
    All,
}

impl Command {
    pub const CHECKS: [Command; 9] = [
        Command::Build,
        Command::Orbit,
        Command::FixedPoints,
        Command::UnstableCoverage,
        Command::StableWitness,
        Command::Transitivity,
        Command::CriticalSet,
        Command::Cantor,
        Command::PerturbSweep,
    ];

    pub fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
        }
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub map: AnyMap,
    pub pair: IfsPair,
}

impl Context {
    pub fn new(cfg: RunConfig) -> rtmap_core::Result<Self> {
        let params = cfg.model_params();
        let map = params.build(cfg.model.map)?;
        let pair = params.pair()?;
        Ok(Self { cfg, map, pair })
    }

    fn p(&self) -> TorusPoint {
        TorusPoint::from_parts(self.map.base_map().p().coords(), 0.0)
    }

    fn marked(&self, y: f64) -> TorusPoint {
        let mut pt = self.p();
        pt.set(self.map.base_dim(), y);
        pt
    }

    /// The surgery center and radius, also for maps without the surgery.
    fn surgery_ball(&self) -> rtmap_core::Result<(TorusPoint, f64)> {
        match &self.map {
            AnyMap::Singular(a) => Ok((a.s().clone(), a.r())),
            _ => {
                let chart = Chart::centered(self.map.dim());
                Ok((chart.backward(&self.cfg.surgery.s_chart_coords)?, self.cfg.surgery.r))
            }
        }
    }
}

pub fn run(cmd: Command, ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    match cmd {
        Command::Build => build(ctx, out),
        Command::Orbit => orbit(ctx, out),
        Command::FixedPoints => fixed_points(ctx, out),
        Command::UnstableCoverage => coverage(ctx, out),
        Command::StableWitness => witnesses(ctx, out),
        Command::Transitivity => transitivity(ctx, out),
        Command::CriticalSet => critical_set(ctx, out),
        Command::Cantor => cantor(ctx, out),
        Command::PerturbSweep => sweep(ctx, out),
        Command::All => unreachable!("`all` is expanded by the caller"),
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

fn build(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    let base = ctx.map.base_map();
    let det_f = base.det();
    let (lambda, sigma) = base.expansion_constants();
    let mut report = json!({
        "map": ctx.cfg.model.map,
        "degree": base.degree(),
        "power": base.power(),
        "multiplier": base.multiplier(),
        "det_f": det_f,
        "expansion": { "lambda": lambda, "sigma": sigma },
        "u": base.u(),
        "v": base.v(),
        "epsilon": base.epsilon(),
        "u_eps": base.u_eps(),
        "v_eps": base.v_eps(),
        "covers_u": base.covers(base.u()),
        "covers_v": base.covers(base.v()),
        "beta": ctx.pair.beta(),
        "alpha": ctx.pair.alpha(),
        "a1": ctx.pair.a1(),
        "r1": ctx.pair.r1(),
    });
    let mut pass = base.covers(base.u()) && base.covers(base.v());
    let mut summary = format!("D = {}, detF = {det_f}", base.multiplier());
    if let AnyMap::Singular(a) = &ctx.map {
        let (q1, q2, s) = (a.q1(), a.q2(), a.s().clone());
        let dets = [a.det(&q1), a.det(&q2), a.det(&s)];
        let ok = rel_close(dets[0], 7.0 * det_f, 1e-9)
            && rel_close(dets[1], -5.0 * det_f, 1e-9)
            && dets[2].abs() <= 1e-9 * det_f;
        pass &= ok;
        summary += &format!(", det at q1/q2/s = {}/{}/{}", dets[0], dets[1], dets[2]);
        report["surgery"] = json!({
            "r": a.r(),
            "theta": a.psi().theta(),
            "delta": a.phi().delta(),
            "s": s,
            "q1": q1,
            "q2": q2,
            "det_q1": dets[0],
            "det_q2": dets[1],
            "det_s": dets[2],
            "support_rect": a.support_rect(),
            "support_reach": a.support_reach(),
            "determinant_identities_hold": ok,
        });
    }
    out.json("build.json", &report);
    Ok(Outcome::new(pass, summary))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn orbit(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    let v = &ctx.cfg.verification;
    let m1 = ctx.map.base_dim();
    let start = TorusPoint::new(&v.orbit_start);
    let mut pt = PrecisePoint::from_point(&start);
    let mut header: Vec<String> = (0..m1).map(|i| format!("x{i}")).collect();
    header.insert(0, "step".into());
    header.push("y".into());
    let row = |step: usize, p: &TorusPoint| -> Vec<String> {
        std::iter::once(step.to_string())
            .chain(p.coords().iter().map(|&c| fmt(c)))
            .collect()
    };
    let mut rows = vec![row(0, &pt.to_point())];
    for step in 1..=v.orbit_steps {
        ctx.map.step_precise(&mut pt);
        rows.push(row(step, &pt.to_point()));
    }
    out.csv_records("orbit.csv", &header, &rows);
    Ok(Outcome::new(true, format!("{} steps from {:?}", v.orbit_steps, start.coords())))
}

fn fixed_points(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    let saddle = classify_point(&ctx.map, &ctx.marked(ctx.pair.a1()));
    let source = classify_point(&ctx.map, &ctx.marked(ctx.pair.r1()));
    let scan = if ctx.map.base_dim() == 1 {
        scan_fixed_points(&ctx.map, ctx.cfg.verification.fiber_scan_cells)
    } else {
        Vec::new()
    };
    let pass = saddle.exactly_fixed()
        && source.exactly_fixed()
        && saddle.classification == FixedPointKind::Saddle
        && source.classification == FixedPointKind::Source;
    let summary = format!(
        "(p,a1) {:?} residual {}, (p,r1) {:?} residual {}, {} fixed points on the scanned fibers",
        saddle.classification,
        saddle.residual,
        source.classification,
        source.residual,
        scan.len()
    );
    out.json(
        "fixed_points.json",
        &json!({ "p_a1": saddle, "p_r1": source, "scan": scan }),
    );
    Ok(Outcome::new(pass, summary))
}

#[derive(Serialize)]
struct CoverageRow {
    iterate: usize,
    fraction: f64,
}

fn coverage(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    if ctx.map.base_dim() != 1 {
        return Err(Error::Domain("unstable coverage runs on a circle base".into()));
    }
    let v = &ctx.cfg.verification;
    let k = v.coverage_grid_k;
    let seed_arc = ctx.map.base_map().u().arcs()[0];
    let report = unstable_coverage(&ctx.map, seed_arc, ctx.pair.a1(), k, v.max_iters)?;
    let oracle = semigroup_row_oracle(&ctx.pair, ctx.pair.a1(), k, v.max_iters);
    let dominated = report
        .fractions
        .iter()
        .zip(&oracle)
        .all(|(c, o)| *c >= *o);
    let mut failed_replays = 0usize;
    let mut replays = 0usize;
    for cell in report.hit_cells().collect::<Vec<_>>() {
        replays += 1;
        match replay_cell(&ctx.map, &report, cell) {
            Ok(r) if r.ok() => {}
            _ => failed_replays += 1,
        }
    }
    let final_fraction = report.final_fraction();
    let first_full = report.fractions.iter().position(|&f| f >= 0.99);
    let pass = final_fraction >= 0.99 && dominated && failed_replays == 0;

    out.csv(
        "coverage.csv",
        report
            .fractions
            .iter()
            .enumerate()
            .map(|(iterate, &fraction)| CoverageRow { iterate, fraction }),
    );
    let horizon = (v.max_iters + 1) as f64;
    let earliness: Vec<f64> = report
        .first_hit
        .iter()
        .map(|h| h.map_or(0.0, |t| horizon - t as f64))
        .collect();
    out.pgm("coverage.pgm", k, k, &scale_to_bytes(&earliness, horizon));
    out.json(
        "coverage.json",
        &json!({
            "grid_k": k,
            "max_iters": v.max_iters,
            "fractions": report.fractions,
            "oracle_row_fractions": oracle,
            "dominates_oracle": dominated,
            "first_iterate_at_0.99": first_full,
            "replays": replays,
            "failed_replays": failed_replays,
        }),
    );
    Ok(Outcome::new(
        pass,
        format!(
            "final coverage {final_fraction} (>= 0.99 at iterate {first_full:?}), oracle dominated: {dominated}, {failed_replays}/{replays} replays failed"
        ),
    ))
}

/// Random boxes with arcs of half-width in `[0.01, 0.1]`.
pub fn random_boxes(seed: u64, count: usize, dim: usize) -> Vec<TorusBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let arcs = (0..dim)
                .map(|_| {
                    let c = rng.gen::<f64>();
                    let w = rng.gen_range(0.01..=0.1);
                    Arc::new(c, w).expect("valid arc")
                })
                .collect();
            TorusBox::new(arcs).expect("valid box")
        })
        .collect()
}

fn witnesses(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    let v = &ctx.cfg.verification;
    let ball = Arc::new(ctx.pair.a1(), v.ball_radius)?;
    let boxes = random_boxes(v.seed, v.witness_boxes, ctx.map.dim());
    let mut entries = Vec::new();
    let mut found = 0;
    for w in &boxes {
        match stable_witness(&ctx.map, &ctx.pair, w, &ball, v.tol) {
            Ok(wit) => {
                found += 1;
                entries.push(json!({ "box": w, "witness": wit }));
            }
            Err(e) => entries.push(json!({ "box": w, "error": e.to_string() })),
        }
    }
    out.json(
        "witnesses.json",
        &json!({ "ball": ball, "tol": v.tol, "seed": v.seed, "results": entries }),
    );
    Ok(Outcome::new(
        found == boxes.len(),
        format!("{found}/{} boxes have a witness landing on {{p}} x B", boxes.len()),
    ))
}

fn transitivity(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    let v = &ctx.cfg.verification;
    let grid = ReachabilityGrid::build(&ctx.map, v.grid_k, v.horizon, v.samples_per_cell, v.seed)?;
    let report = grid.report(true);
    let bad_replays = (0..grid.cells())
        .filter(|&c| !grid.witnesses[c].is_empty())
        .filter(|&c| grid.replay_witness(&ctx.map, c, 0) != grid.witnesses[c][0].dst as usize)
        .count();
    let degrees: Vec<f64> = grid.out_degrees().iter().map(|&d| d as f64).collect();
    out.pgm(
        "transitivity.pgm",
        v.grid_k,
        v.grid_k,
        &scale_to_bytes(&degrees, grid.cells() as f64),
    );
    out.json(
        "transitivity.json",
        &json!({ "report": report, "failed_witness_replays": bad_replays }),
    );
    let pass = report.strongly_connected && bad_replays == 0;
    Ok(Outcome::new(
        pass,
        format!(
            "{}x{} grid, {} edges, strongly connected: {}, diameter {:?}",
            v.grid_k, v.grid_k, report.edge_count, report.strongly_connected, report.diameter
        ),
    ))
}

#[derive(Serialize)]
struct CriticalRow {
    x: f64,
    y: f64,
    det_residual: f64,
}

fn critical_set(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    if ctx.map.dim() != 2 {
        return Err(Error::Domain("critical tracing runs on T^2 only".into()));
    }
    let (s, r) = ctx.surgery_ball()?;
    let tol = CRITICAL_REL_TOL * ctx.map.base_map().det();
    let trace = trace_critical_set(&ctx.map, &s, r, ctx.cfg.verification.critical_resolution, tol)?;
    out.csv(
        "critical_set.csv",
        trace.points.iter().map(|c| CriticalRow {
            x: c.point.coord(0),
            y: c.point.coord(1),
            det_residual: c.det_residual,
        }),
    );
    let nearest = trace.nearest_to(&s);
    let note = if trace.is_empty() {
        "empty critical set: det has no sign change in B(s, r)".to_string()
    } else {
        format!("{} critical points, nearest to s at distance {:e}", trace.points.len(), nearest.unwrap_or(f64::NAN))
    };
    out.json(
        "critical_set.json",
        &json!({
            "s": s,
            "r": r,
            "resolution": trace.resolution,
            "tolerance": trace.tolerance,
            "count": trace.points.len(),
            "nearest_to_s": nearest,
            "note": note,
        }),
    );
    Ok(Outcome::new(!trace.is_empty(), note))
}

#[derive(Serialize)]
struct CantorRow {
    depth: usize,
    count: usize,
    required: usize,
    max_width: f64,
    contraction: Option<f64>,
}

fn cantor(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    let base = ctx.map.base_map();
    let d = base.multiplier() as f64;
    let mut rows: Vec<CantorRow> = Vec::new();
    for depth in 0..=ctx.cfg.verification.cantor_depth {
        let c = base.cantor_components(depth)?;
        let contraction = rows.last().map(|prev| prev.max_width / c.max_width());
        rows.push(CantorRow {
            depth,
            count: c.count(),
            required: 1usize << (depth + 1),
            max_width: c.max_width(),
            contraction,
        });
    }
    let pass = rows.iter().all(|r| {
        r.count >= r.required && r.contraction.is_none_or(|f| f >= d * (1.0 - 1e-9))
    });
    let last = rows.last().expect("depth 0 is always present");
    let summary = format!(
        "depth {}: {} components (need {}), max width {:e}",
        last.depth, last.count, last.required, last.max_width
    );
    out.csv("cantor.csv", rows);
    Ok(Outcome::new(pass, summary))
}

#[derive(Serialize)]
struct SweepRow {
    trial: usize,
    seed: u64,
    singular_pass: bool,
    transitive_pass: Option<bool>,
}

fn sweep(ctx: &Context, out: &mut Artifacts) -> rtmap_core::Result<Outcome> {
    let Some(a) = ctx.map.as_singular() else {
        return Ok(Outcome::new(
            false,
            format!(
                "perturb-sweep needs the singular map, the config selects {:?}",
                ctx.map.kind()
            ),
        ));
    };
    debug_assert_eq!(ctx.cfg.model.map, MapKind::Singular);
    let cfg = ctx.cfg.sweep_config();
    let report = robustness_sweep(a, &cfg)?;
    let c1_ok = report.trials.iter().all(|t| t.measured_c1 <= cfg.eta);
    out.csv(
        "sweep.csv",
        report.trials.iter().map(|t| SweepRow {
            trial: t.trial,
            seed: t.seed,
            singular_pass: t.singular_pass,
            transitive_pass: t.transitive_pass,
        }),
    );
    out.json(
        "sweep.json",
        &json!({
            "note": "eta is an empirical stand-in for the unknown robustness radius",
            "measured_c1_within_eta": c1_ok,
            "report": report,
        }),
    );
    Ok(Outcome::new(
        report.all_pass() && c1_ok,
        format!(
            "singular {}/{}, transitive {}/{}",
            report.singular_passes(),
            report.trials.len(),
            report.transitive_passes(),
            report.transitive_checked()
        ),
    ))
}
