//! Dispatch of a [`RunConfig`] to the analysis modules.
//!
//! Numerical failures inside a check become failed checks. Only problems
//! with the configuration itself (unknown names, bad dimensions, unwritable
//! output) are returned as errors.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{BaseMapSpec, Operation, RunConfig};
use crate::conjugate::conjugate_scan;
use crate::error::{Error, Result};
use crate::fixtures::{fixture, Fixture, KernelExpectation};
use crate::genfun::{
    mollifier_moments, radial_directions, symplecticity_residual, zero_section_identities, BaseMap, ExtensionMap,
    GeneratingFunction,
};
use crate::green::{default_horizons, green_bundle, GreenOptions};
use crate::hamiltonian::vector_field;
use crate::homology::{homology_iterate, HomologyAction, OrbitClass};
use crate::integrate::{flow, FlowOptions};
use crate::report::{write_table, Check, OutputDir, Summary};
use crate::submanifold::{
    characteristic_field, characteristic_flow, graph_test, homotopy_degree, invariance_check, leaf_fill_ratio,
    lipschitz_sample, sample, Grid, Projector,
};
use crate::symplectic::{omega_matrix, PhasePoint};

/// Default starting parameter, truncated to the parameter dimension.
const DEFAULT_THETA: [f64; 3] = [0.1, 0.2, 0.3];

/// Speed below which a sampled orbit counts as near an equilibrium.
const NEAR_EQUILIBRIUM: f64 = 0.5;

/// Largest admissible angle between neighbouring characteristic vectors.
const MAX_NEIGHBOR_ANGLE: f64 = PI / 6.0;

/// Runs one configuration, writes its files, and returns the summary.
pub fn run(config: &RunConfig) -> Result<Summary> {
    config.validate()?;
    let out = OutputDir::create(&config.run.output_dir)?;
    let mut summary = Summary::new(config);
    match config.run.operation {
        Operation::Analyze => analyze(config, &fixture(&config.run.target)?, &out, &mut summary)?,
        Operation::Flow => flow_op(config, &fixture(&config.run.target)?, &out, &mut summary)?,
        Operation::Green => green_op(config, &fixture(&config.run.target)?, &out, &mut summary)?,
        Operation::Conjugate => conjugate_op(config, &fixture(&config.run.target)?, &out, &mut summary)?,
        Operation::Characteristic => characteristic_op(config, &fixture(&config.run.target)?, &out, &mut summary)?,
        Operation::Extend => extend_op(config, &out, &mut summary)?,
        Operation::Homology => homology_op(config, &out, &mut summary)?,
    }
    out.write_summary(&summary)?;
    Ok(summary)
}

/// Exit status for a finished run: 0 when every check passed.
pub fn exit_code(result: &Result<Summary>) -> i32 {
    match result {
        Ok(s) if s.passed => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

fn flow_options(cfg: &RunConfig, fx: &Fixture) -> FlowOptions {
    FlowOptions {
        step: cfg.flow.step.unwrap_or(fx.flow_step),
        scheme: cfg.flow.scheme,
        use_exact: cfg.flow.use_exact,
        energy_tol: None,
        record_every: cfg.flow.record_every,
        ..FlowOptions::default()
    }
}

fn theta0(cfg: &RunConfig, fx: &Fixture) -> Result<DVector<f64>> {
    let k = fx.manifold.param_dim();
    if cfg.points.theta0.is_empty() {
        return Ok(DVector::from_fn(k, |i, _| DEFAULT_THETA[i % DEFAULT_THETA.len()]));
    }
    if cfg.points.theta0.len() != k {
        return Err(Error::Config(format!("points.theta0 needs {k} entries, got {}", cfg.points.theta0.len())));
    }
    Ok(DVector::from_column_slice(&cfg.points.theta0))
}

/// `(x0, on_manifold)`: the explicit phase point if given, else the
/// embedding of `theta0`.
fn start_point(cfg: &RunConfig, fx: &Fixture) -> Result<(PhasePoint, bool)> {
    let d = fx.hamiltonian.dim();
    let x0 = &cfg.points.x0;
    if x0.is_empty() {
        return Ok((fx.manifold.embed(&theta0(cfg, fx)?), true));
    }
    if x0.len() != 2 * d {
        return Err(Error::Config(format!("points.x0 needs {} entries, got {}", 2 * d, x0.len())));
    }
    Ok((PhasePoint::from_slices(&x0[..d], &x0[d..])?, false))
}

fn csv_name(summary: &mut Summary, out: &OutputDir, name: &str, header: Vec<String>, rows: &[Vec<f64>]) -> Result<()> {
    out.write_with(name, |w| write_table(w, &header, rows))?;
    summary.files.push(name.into());
    Ok(())
}

fn integer_det(w: &[Vec<i64>]) -> Option<i64> {
    let n = w.len();
    if w.iter().any(|r| r.len() != n) {
        return None;
    }
    let m = DMatrix::from_fn(n, n, |i, j| w[i][j] as f64);
    Some(m.determinant().round() as i64)
}

fn analyze(cfg: &RunConfig, fx: &Fixture, out: &OutputDir, s: &mut Summary) -> Result<()> {
    let h = fx.hamiltonian.as_ref();
    let m = fx.manifold.as_ref();
    let k = m.param_dim();
    let d = m.phase_dim();
    let e = fx.expected;
    let tol = &cfg.tolerances;
    let opts = flow_options(cfg, fx);
    s.insert("expected", &e);
    s.insert("rationale", &fx.rationale.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<Vec<_>>());

    match sample(m, &Grid::uniform(k, cfg.grid.analysis)) {
        Ok(rep) => {
            let header: Vec<String> = (1..=k)
                .map(|i| format!("theta{i}"))
                .chain(["kernel_dim", "defect", "raw_defect"].map(String::from))
                .collect();
            let rows: Vec<Vec<f64>> = rep
                .points
                .iter()
                .map(|p| {
                    let mut r: Vec<f64> = p.theta.iter().copied().collect();
                    r.extend([p.kernel_dim as f64, p.defect, p.raw_defect]);
                    r
                })
                .collect();
            csv_name(s, out, "samples.csv", header, &rows)?;
            s.insert("kernel_histogram", &rep.histogram);
            let max_raw = rep.points.iter().map(|p| p.raw_defect).fold(0.0, f64::max);
            if let Some(kd) = e.kernel_dim {
                let c = match kd {
                    KernelExpectation::Constant(c) => {
                        let off = rep.points.iter().filter(|p| p.kernel_dim != c).count();
                        Check::expect("kernel-dim", true, off == 0, format!("{off} grid points with kernel dim != {c}"))
                    }
                    KernelExpectation::NonConstant => Check::expect(
                        "kernel-dim",
                        false,
                        rep.rank_constant,
                        format!("histogram {:?}", rep.histogram),
                    ),
                };
                s.push(c);
            }
            if let Some(lag) = e.lagrangian {
                let is_lag = rep.histogram.keys().all(|&kd| kd == d) && k == d;
                let mut c = Check::expect("lagrangian", lag, is_lag, format!("max |omega(di j, dj j)| = {max_raw:.3e}"));
                c.value = Some(max_raw);
                s.push(c);
            }
        }
        Err(err) => {
            if e.kernel_dim.is_some() {
                s.push(Check::failed("kernel-dim", &err));
            }
            if e.lagrangian.is_some() {
                s.push(Check::failed("lagrangian", &err));
            }
        }
    }

    if let Some(stationary) = e.stationary {
        let grid = Grid::uniform(k, cfg.grid.analysis);
        let r: Result<f64> = (0..grid.len())
            .map(|i| vector_field(h, &m.embed(&grid.theta(i))).map(|v| v.norm()))
            .try_fold(0.0f64, |a, v| v.map(|v| a.max(v)));
        s.push_result(
            "stationary",
            r.map(|v| {
                let mut c = Check::expect("stationary", stationary, v <= tol.stationary, "sup |X_H| on the grid");
                c.value = Some(v);
                c.tolerance = Some(tol.stationary);
                c
            }),
        );
    }

    if let Some(inv) = e.invariant {
        let times = if cfg.horizons.invariance.is_empty() { fx.invariance_horizons.clone() } else { cfg.horizons.invariance.clone() };
        match invariance_check(h, m, &Grid::uniform(k, cfg.grid.invariance), &times, &opts) {
            Ok(rep) => {
                let exact = opts.use_exact && fx.analytic_flow;
                let mut c = Check::expect(
                    "invariant",
                    inv,
                    rep.max_deviation <= tol.invariance,
                    format!(
                        "{} flow, worst at grid index {} t = {}",
                        if exact { "exact" } else { "integrated" },
                        rep.worst.0,
                        rep.worst.1
                    ),
                );
                c.value = Some(rep.max_deviation);
                c.tolerance = Some(tol.invariance);
                s.insert("invariance", &rep);
                s.push(c);
            }
            Err(err) => s.push(Check::failed("invariant", &err)),
        }
    }

    if let Some(graph) = e.graph {
        match graph_test(m, &Grid::uniform(k, cfg.grid.graph)) {
            Ok(v) => {
                let detail = match &v.witness {
                    Some(w) => format!("two parameters over base {:?}, fibre gap {:.3}", w.base.as_slice(), w.fiber_gap),
                    None if v.fold.is_some() => "det D(pi j) changes sign".into(),
                    None => format!("min |det D(pi j)| = {:.3e}", v.min_abs_det),
                };
                s.insert("graph", &v);
                s.push(Check::expect("graph", graph, v.is_graph, detail));
            }
            Err(err) => s.push(Check::failed("graph", &err)),
        }
    }

    if let Some(homotopic) = e.homotopic_to_zero_section {
        match homotopy_degree(m, &Grid::uniform(k, cfg.grid.winding)) {
            Ok(w) => {
                let det = integer_det(&w);
                s.insert("winding", &w);
                s.push(Check::expect(
                    "homotopic-to-zero-section",
                    homotopic,
                    det.is_some_and(|v| v.abs() == 1),
                    format!("winding matrix {w:?}"),
                ));
            }
            Err(err) => s.push(Check::failed("homotopic-to-zero-section", &err)),
        }
    }

    if let Some(free) = e.conjugate_free {
        let r = conjugate_free_check(cfg, fx, &opts);
        s.push_result(
            "conjugate-free",
            r.map(|(hits, scanned, horizon)| {
                let mut c = Check::expect(
                    "conjugate-free",
                    free,
                    hits == 0,
                    format!("{hits} of {scanned} sampled orbits have conjugate points up to T = {horizon}"),
                );
                c.value = Some(hits as f64);
                c
            }),
        );
    }

    let t_lip = cfg.horizons.lipschitz.unwrap_or_else(|| fx.invariance_horizons.last().copied().unwrap_or(1.0));
    match lipschitz_sample(h, m, t_lip, cfg.horizons.lipschitz_pairs, cfg.run.seed, &opts) {
        Ok(ratio) => s.insert("lipschitz", &serde_json::json!({ "t": t_lip, "max_ratio": ratio })),
        Err(err) => s.insert("lipschitz", &serde_json::json!({ "t": t_lip, "error": err.to_string() })),
    }
    Ok(())
}

/// Scans random orbits of the submanifold, skipping starts near equilibria
/// unless the whole submanifold is stationary.
fn conjugate_free_check(cfg: &RunConfig, fx: &Fixture, opts: &FlowOptions) -> Result<(usize, usize, f64)> {
    let h = fx.hamiltonian.as_ref();
    let m = fx.manifold.as_ref();
    let horizon = cfg.horizons.conjugate.unwrap_or(fx.conjugate_horizon);
    let skip_slow = fx.expected.stationary != Some(true);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut hits = 0;
    let mut scanned = 0;
    let mut attempts = 0;
    while scanned < cfg.horizons.conjugate_orbits {
        attempts += 1;
        if attempts > 100 * cfg.horizons.conjugate_orbits.max(1) {
            return Err(Error::TooFewSamples { needed: cfg.horizons.conjugate_orbits, got: scanned });
        }
        let theta = DVector::from_fn(m.param_dim(), |_, _| rng.random::<f64>());
        let x0 = m.embed(&theta);
        if skip_slow && vector_field(h, &x0)?.norm() < NEAR_EQUILIBRIUM {
            continue;
        }
        scanned += 1;
        if !conjugate_scan(h, &x0, horizon, cfg.horizons.conjugate_step, opts)?.is_conjugate_free() {
            hits += 1;
        }
    }
    Ok((hits, scanned, horizon))
}

fn flow_op(cfg: &RunConfig, fx: &Fixture, out: &OutputDir, s: &mut Summary) -> Result<()> {
    let h = fx.hamiltonian.as_ref();
    let (x0, on_manifold) = start_point(cfg, fx)?;
    let t = cfg.points.t;
    match flow(h, &x0, t, &flow_options(cfg, fx)) {
        Ok(traj) => {
            out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
            s.files.push("trajectory.csv".into());
            let drift = traj.max_energy_drift();
            s.push(Check::within("energy-drift", drift, cfg.tolerances.energy, format!("over t = {t}")));
            let end = traj.endpoint().clone();
            s.insert("endpoint", &end);
            s.insert("samples", &traj.times.len());
            if on_manifold {
                match Projector::new(fx.manifold.as_ref()).project(&end.normalized()) {
                    Ok((_, dist)) => s.insert("distance_to_submanifold", &dist),
                    Err(err) => s.insert("distance_to_submanifold", &err.to_string()),
                }
            }
        }
        Err(err) => s.push(Check::failed("flow", &err)),
    }
    Ok(())
}

fn green_op(cfg: &RunConfig, fx: &Fixture, out: &OutputDir, s: &mut Summary) -> Result<()> {
    let h = fx.hamiltonian.as_ref();
    let (x0, _) = start_point(cfg, fx)?;
    let horizons = if cfg.horizons.green.is_empty() { default_horizons() } else { cfg.horizons.green.clone() };
    let opts = GreenOptions { flow: flow_options(cfg, fx), ..GreenOptions::default() };
    match green_bundle(h, &x0, cfg.points.side, &horizons, &opts) {
        Ok(est) => {
            let d = h.dim();
            let header: Vec<String> = std::iter::once("T".to_string())
                .chain((0..d).flat_map(|i| (0..d).map(move |j| format!("s{}{}", i + 1, j + 1))))
                .chain(["norm".to_string()])
                .collect();
            let rows: Vec<Vec<f64>> = est
                .history
                .iter()
                .map(|(t, m)| {
                    let mut r = vec![*t];
                    r.extend((0..d).flat_map(|i| (0..d).map(move |j| m[(i, j)])));
                    r.push(m.norm());
                    r
                })
                .collect();
            csv_name(s, out, "green.csv", header, &rows)?;
            s.push(Check::within(
                "green-converged",
                est.residual,
                cfg.tolerances.green,
                format!("|S_T - S_T'| over the last two horizons, T = {}", est.horizon),
            ));
            s.insert("green", &est);
        }
        Err(err) => s.push(Check::failed("green-converged", &err)),
    }
    Ok(())
}

fn conjugate_op(cfg: &RunConfig, fx: &Fixture, out: &OutputDir, s: &mut Summary) -> Result<()> {
    let h = fx.hamiltonian.as_ref();
    let (x0, on_manifold) = start_point(cfg, fx)?;
    let horizon = cfg.horizons.conjugate.unwrap_or(fx.conjugate_horizon);
    match conjugate_scan(h, &x0, horizon, cfg.horizons.conjugate_step, &flow_options(cfg, fx)) {
        Ok(rep) => {
            let rows: Vec<Vec<f64>> = rep.determinant_trace.iter().map(|(t, v)| vec![*t, *v]).collect();
            csv_name(s, out, "conjugate.csv", vec!["t".into(), "overlap".into()], &rows)?;
            let free = rep.is_conjugate_free();
            let detail = format!("zeros at {:?}, grazing at {:?}", rep.zeros, rep.grazing);
            match fx.expected.conjugate_free {
                Some(expected) if on_manifold => s.push(Check::expect("conjugate-free", expected, free, detail)),
                _ => s.push(Check::expect("scan", true, true, detail)),
            }
            s.insert("zeros", &rep.zeros);
            s.insert("grazing", &rep.grazing);
            s.insert("window", &rep.window);
        }
        Err(err) => s.push(Check::failed("scan", &err)),
    }
    Ok(())
}

fn characteristic_op(cfg: &RunConfig, fx: &Fixture, out: &OutputDir, s: &mut Summary) -> Result<()> {
    let m = fx.manifold.as_ref();
    let k = m.param_dim();
    let theta = theta0(cfg, fx)?;
    let field = match characteristic_field(m, &Grid::uniform(k, cfg.grid.characteristic)) {
        Ok(f) => f,
        Err(err) => {
            s.push(Check::failed("characteristic-field", &err));
            return Ok(());
        }
    };
    s.push(Check::within(
        "field-smooth",
        field.max_neighbor_angle,
        MAX_NEIGHBOR_ANGLE,
        "largest angle between neighbouring kernel vectors",
    ));
    let step = (cfg.points.t.abs() / 10_000.0).max(1e-3);
    let curve = match characteristic_flow(m, &field, &theta, cfg.points.t, step, 1.0) {
        Ok(c) => c,
        Err(err) => {
            s.push(Check::failed("characteristic-flow", &err));
            return Ok(());
        }
    };
    let omega = omega_matrix(m.phase_dim());
    let mut residual = 0.0f64;
    let rows: Vec<Vec<f64>> = curve
        .times
        .windows(2)
        .zip(curve.thetas.windows(2))
        .map(|(t, th)| {
            let jac = m.jacobian(&th[0]);
            let c = (&th[1] - &th[0]) / (t[1] - t[0]);
            let x = &jac * &c;
            let form = jac.transpose() * &omega * &x;
            residual = residual.max(form.amax() / (jac.norm() * x.norm()).max(f64::MIN_POSITIVE));
            std::iter::once(t[0]).chain(th[0].iter().copied()).collect()
        })
        .collect();
    let header = std::iter::once("t".to_string()).chain((1..=k).map(|i| format!("theta{i}"))).collect();
    csv_name(s, out, "characteristic.csv", header, &rows)?;
    s.push(Check::within(
        "tangent-to-kernel",
        residual,
        cfg.tolerances.identities,
        "relative |omega(X, dj)| along the curve, X from step differences",
    ));
    s.insert("endpoint", &curve.endpoint().as_slice());
    if k >= 2 {
        s.insert("leaf_fill_ratio_12", &leaf_fill_ratio(&curve, (0, 1), 32));
    }
    Ok(())
}

fn uniform_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return v * radius;
        }
    }
}

fn extend_op(cfg: &RunConfig, out: &OutputDir, s: &mut Summary) -> Result<()> {
    let base = cfg.basemap()?;
    let e = &cfg.extend;
    let tol = &cfg.tolerances;
    let d = base.dim();
    s.target = match &cfg.extend.basemap {
        Some(BaseMapSpec::Named(name)) => name.clone(),
        Some(BaseMapSpec::Explicit(_)) => "explicit".into(),
        None => cfg.run.target.clone(),
    };
    s.insert("basemap", &base);
    let gf = match GeneratingFunction::new(base.clone(), e.order) {
        Ok(g) => g,
        Err(err) => {
            s.push(Check::failed("quadrature", &err));
            return Ok(());
        }
    };
    s.insert("moments", &mollifier_moments(gf.rule()));
    let ext = match ExtensionMap::new(gf, e.solver) {
        Ok(x) => x,
        Err(err) => {
            s.push(Check::failed("near-identity", &err));
            return Ok(());
        }
    };
    s.insert("closeness", &ext.closeness);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);

    let dirs = radial_directions(d, 2 * d + (1 << d.min(4)) - 1);
    let qs: Vec<DVector<f64>> = (0..e.identity_points).map(|_| DVector::from_fn(d, |_, _| rng.random::<f64>())).collect();
    let ids: Result<f64> = qs
        .iter()
        .map(|q| zero_section_identities(&ext.generating, q, &dirs, e.fd_step).map(|r| r.max()))
        .try_fold(0.0f64, |a, v| v.map(|v| a.max(v)));
    s.push_result(
        "zero-section-identities",
        ids.map(|v| Check::within("zero-section-identities", v, tol.identities, "finite-difference oracles of A at p = 0")),
    );

    let restriction: Result<f64> = qs
        .iter()
        .map(|q| {
            let x = ext.solve(q, &DVector::zeros(d))?;
            Ok((x.q - base.eval(q)).norm().max(x.p.norm()))
        })
        .try_fold(0.0f64, |a, v: Result<f64>| v.map(|v| a.max(v)));
    s.push_result(
        "zero-section-restriction",
        restriction.map(|v| Check::within("zero-section-restriction", v, tol.zero_section, "|F(q, 0) - (f(q), 0)|")),
    );

    let samples: Vec<(DVector<f64>, DVector<f64>)> = (0..e.samples)
        .map(|_| (DVector::from_fn(d, |_, _| rng.random::<f64>()), uniform_ball(&mut rng, d, e.sample_radius)))
        .collect();
    s.push_result(
        "symplectic",
        symplecticity_residual(&ext, &samples).map(|v| {
            Check::within("symplectic", v, tol.symplectic, format!("{} samples with |p| <= {}", e.samples, e.sample_radius))
        }),
    );

    let shift = match &base {
        BaseMap::Identity { d } => Some(DVector::zeros(*d)),
        BaseMap::Translation { c } => Some(DVector::from_column_slice(c)),
        _ => None,
    };
    let mut rows = Vec::with_capacity(samples.len());
    let mut closed = 0.0f64;
    let mut solve_err = None;
    for (q, p) in &samples {
        match ext.solve(q, p) {
            Ok(x) => {
                if let Some(c) = &shift {
                    closed = closed.max((&x.q - q - c).norm().max((&x.p - p).norm()));
                }
                let mut r: Vec<f64> = q.iter().chain(p.iter()).chain(x.q.iter()).chain(x.p.iter()).copied().collect();
                r.extend([x.residual, x.iterations as f64]);
                rows.push(r);
            }
            Err(err) => {
                solve_err.get_or_insert(err);
            }
        }
    }
    let header: Vec<String> = ["q", "p", "Q", "P"]
        .iter()
        .flat_map(|n| (1..=d).map(move |i| format!("{n}{i}")))
        .chain(["residual".to_string(), "iterations".to_string()])
        .collect();
    csv_name(s, out, "extension.csv", header, &rows)?;
    if shift.is_some() {
        let c = match &solve_err {
            Some(err) => Check::failed("closed-form", err),
            None => Check::within("closed-form", closed, tol.closed_form, "F(q, p) = (q + c, p)"),
        };
        s.push(c);
    }
    if let Some(err) = solve_err {
        s.push(Check::failed("solve", &err));
    }
    Ok(())
}

/// Closed-form classification from the trace and the `±1` eigenvectors.
pub fn trace_oracle(a: [[i64; 2]; 2], v: [i64; 2]) -> OrbitClass {
    let a = a.map(|r| r.map(i128::from));
    let v = v.map(i128::from);
    let tr = a[0][0] + a[1][1];
    if tr.abs() < 2 {
        return OrbitClass::FiniteOrbit;
    }
    if tr.abs() > 2 {
        return OrbitClass::HyperbolicGrowth;
    }
    let sgn = tr.signum();
    let av = [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
    if av == [sgn * v[0], sgn * v[1]] {
        OrbitClass::FiniteOrbit
    } else {
        OrbitClass::ParabolicGrowth
    }
}

/// `(spectral radius, angle of its eigenline in [0, ½))` for `|tr A| > 2`.
pub fn unstable_eigenline(a: [[i64; 2]; 2]) -> (f64, f64) {
    let [[p, q], [r, t]] = a.map(|row| row.map(|x| x as f64));
    let tr = p + t;
    let rho = (tr.abs() + (tr * tr - 4.0).sqrt()) / 2.0;
    let lambda = rho.copysign(tr);
    let (x, y) = if q.abs() >= r.abs() { (q, lambda - p) } else { (lambda - t, r) };
    (rho, (y.atan2(x) / TAU).rem_euclid(0.5))
}

fn homology_op(cfg: &RunConfig, out: &OutputDir, s: &mut Summary) -> Result<()> {
    let hc = &cfg.homology;
    let h = match HomologyAction::new(hc.matrix, hc.v0) {
        Ok(h) => h,
        Err(err) => {
            s.push(Check::failed("unimodular", &err));
            return Ok(());
        }
    };
    let orbit = match homology_iterate(&h, hc.n) {
        Ok(o) => o,
        Err(err) => {
            s.push(Check::failed("iterate", &err));
            return Ok(());
        }
    };
    out.write_with("homology.csv", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "x", "y"]).map_err(|e| Error::Io(e.to_string()))?;
        for (n, v) in orbit.sequence.iter().enumerate() {
            wr.write_record([n.to_string(), v[0].to_string(), v[1].to_string()])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    })?;
    s.files.push("homology.csv".into());
    let oracle = trace_oracle(hc.matrix, hc.v0);
    s.push(Check::expect(
        "classification",
        true,
        orbit.classification == oracle,
        format!("{:?}, trace oracle {:?}", orbit.classification, oracle),
    ));
    if orbit.classification == OrbitClass::HyperbolicGrowth {
        let (rho, alpha) = unstable_eigenline(hc.matrix);
        if let Some(rate) = orbit.growth_rate {
            s.push(Check::within(
                "growth-rate",
                (rate / rho - 1.0).abs(),
                cfg.tolerances.growth,
                format!("|A^n v0| / |A^(n-1) v0| = {rate:.6} vs spectral radius {rho:.6}"),
            ));
        }
        if let Some(a) = orbit.limit_direction {
            let diff = (a - alpha).rem_euclid(0.5);
            s.push(Check::within(
                "limit-direction",
                diff.min(0.5 - diff),
                cfg.tolerances.direction,
                format!("alpha = {a:.12} vs eigenline {alpha:.12}"),
            ));
        }
    }
    s.insert("orbit", &orbit);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BaseMapSpec;

    fn config(op: Operation, target: &str, dir: &std::path::Path) -> RunConfig {
        let mut c = RunConfig::default();
        c.run.operation = op;
        c.run.target = target.into();
        c.run.output_dir = dir.to_path_buf();
        c
    }

    fn names(s: &Summary) -> Vec<&str> {
        s.checks.iter().map(|c| c.name.as_str()).collect()
    }

    #[test]
    fn analyze_zero_section_passes() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(Operation::Analyze, "zero-section", dir.path());
        c.grid.analysis = 6;
        c.grid.graph = 6;
        c.grid.winding = 8;
        c.horizons.conjugate = Some(5.0);
        c.horizons.conjugate_orbits = 3;
        let s = run(&c).unwrap();
        assert!(s.passed, "{}", s.render());
        assert!(names(&s).contains(&"stationary"));
        assert!(dir.path().join("samples.csv").exists());
    }

    #[test]
    fn homology_defaults_pass() {
        let dir = tempfile::tempdir().unwrap();
        let s = run(&config(Operation::Homology, "", dir.path())).unwrap();
        assert!(s.passed, "{}", s.render());
        assert_eq!(names(&s), ["classification", "growth-rate", "limit-direction"]);
    }

    #[test]
    fn non_unimodular_is_a_failed_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(Operation::Homology, "", dir.path());
        c.homology.matrix = [[2, 0], [0, 1]];
        let r = run(&c);
        assert_eq!(exit_code(&r), 1);
    }

    #[test]
    fn extend_translation_matches_closed_form() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(Operation::Extend, "", dir.path());
        c.extend.basemap = Some(BaseMapSpec::Named("translation(0.03, -0.07)".into()));
        c.extend.samples = 10;
        let s = run(&c).unwrap();
        assert!(s.passed, "{}", s.render());
        assert!(names(&s).contains(&"closed-form"));
    }

    #[test]
    fn unknown_names_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(exit_code(&run(&config(Operation::Analyze, "nope", dir.path()))), 2);
        assert_eq!(exit_code(&run(&config(Operation::Extend, "rotation", dir.path()))), 2);
    }

    #[test]
    fn eigenline_oracle() {
        let (rho, alpha) = unstable_eigenline([[2, 1], [1, 1]]);
        let lambda = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((rho - lambda).abs() < 1e-14);
        assert!((alpha - (lambda - 2.0).atan() / TAU).abs() < 1e-14);
        let (_, alpha) = unstable_eigenline([[-2, -1], [-1, -1]]);
        assert!((alpha - (lambda - 2.0).atan() / TAU).abs() < 1e-14);
    }
}
