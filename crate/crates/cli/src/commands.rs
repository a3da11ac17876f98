//! Subcommand bodies: each maps a validated config to a results payload and
//! the tables to emit.

use serde::Serialize;
use serde_json::{json, Value};

use up24_core::chromatic::{chromatic_table, threshold};
use up24_core::circulant::{search_circulant, verify_operator_bounds, SearchOptions, Strategy, EXHAUSTIVE_MAX_N};
use up24_core::equilibrium::{
    alpha_threshold, equilibrium_radius, heatmap_region, minimize_field_energy, minimize_on_body, Body, BodyOptions,
    EquilibriumOptions, EquilibriumResult,
};
use up24_core::frame_torus::{
    best_two_point_energy, maximize_distance_energy, minimize_pframe, torus_phase_scan, DiscreteMeasureResult,
    DistanceDomain, FrameOptions, MeasureSetting,
};
use up24_core::gegenbauer::{first_negative_index, geodesic_riesz_sign_scan, ZonalKernel};
use up24_core::quad_weights::{weight_statistics, FeketeOptions};
use up24_core::snake::{compute_snake, snake_report, Majorant, MarkovOptions, SnakeOptions};
use up24_core::special::stieltjes_gamma1;
use up24_core::sphere_asymptotics::{
    c22_identity_residual, constant_c22, constant_cbhs, fit_expansion, log_constant_lower_bound, maximize_f,
    minimal_energy_table, FitOptions, TableOptions,
};
use up24_core::{Configuration, FieldSpec, Result};

use crate::config::*;
use crate::output::{Cell, Table};

pub struct Outcome {
    pub results: Value,
    pub tables: Vec<Table>,
}

fn value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("results serialize to JSON")
}

/// Plain string for unit enums, compact JSON otherwise.
fn label<T: Serialize>(t: &T) -> String {
    match value(t) {
        Value::String(s) => s,
        v => v.to_string(),
    }
}

fn kernel_label(k: &ZonalKernel) -> String {
    match *k {
        ZonalKernel::AbsPower { p } => format!("abs_power(p={p})"),
        ZonalKernel::Monomial { k } => format!("monomial(k={k})"),
        ZonalKernel::Constant { value } => format!("constant({value})"),
        ZonalKernel::Gegenbauer { k } => format!("gegenbauer(k={k})"),
        ZonalKernel::GeodesicRiesz { s } => format!("geodesic_riesz(s={s})"),
    }
}

fn point_table(name: &str, cfg: &Configuration) -> Table {
    let d = cfg.dim();
    let mut cols: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    cols.push("weight".into());
    cols.push("radius".into());
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(name, &refs);
    for (p, &w) in cfg.points().zip(cfg.weights()) {
        let mut row: Vec<Cell> = p.iter().map(|&v| v.into()).collect();
        row.push(w.into());
        row.push(p.iter().map(|v| v * v).sum::<f64>().sqrt().into());
        t.push(row);
    }
    t
}

fn equilibrium_outcome(res: &EquilibriumResult, extra: Value) -> Outcome {
    let mut modes = Table::new("radial_modes", &["radius", "mass_fraction", "width"]);
    for m in &res.classification.radial_modes {
        modes.push(vec![m.radius.into(), m.mass_fraction.into(), m.width.into()]);
    }
    let results = json!({
        "classification": value(&res.classification),
        "shell_count": res.classification.shell_count(),
        "central_mass": res.classification.central_mass(),
        "report": value(&res.report),
        "reference": extra,
    });
    Outcome { results, tables: vec![point_table("points", &res.configuration), modes] }
}

pub fn equilibrium(cfg: &EquilibriumConfig, seed: u64) -> Result<Outcome> {
    let field = FieldSpec::new(cfg.gamma, cfg.alpha)?;
    let opts = EquilibriumOptions { seed, restarts: cfg.restarts, max_iter: cfg.max_iter, tol: cfg.tol, radius_cap: None };
    let res = minimize_field_energy(cfg.d, cfg.s, &field, cfg.n, &opts)?;
    let threshold = alpha_threshold(cfg.s, cfg.d).ok();
    let radius = equilibrium_radius(cfg.s, cfg.d, cfg.alpha, cfg.gamma).ok();
    let extra = json!({
        "alpha_threshold": threshold,
        "sphere_radius": radius,
        "uniform_sphere_expected": threshold.map(|a| cfg.alpha >= a),
    });
    Ok(equilibrium_outcome(&res, extra))
}

pub fn body(cfg: &BodyConfig, seed: u64) -> Result<Outcome> {
    let body = match cfg.body {
        BodyKind::Ball => Body::Ball { dim: cfg.dim },
        BodyKind::Cube => Body::Cube { dim: cfg.dim },
        BodyKind::Simplex => Body::Simplex { dim: cfg.dim },
    };
    let opts = BodyOptions {
        seed,
        restarts: cfg.restarts,
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        optimize_weights: cfg.optimize_weights,
        rounds: cfg.rounds,
    };
    let res = minimize_on_body(body, cfg.s, cfg.n, &opts)?;
    let mut out = equilibrium_outcome(&res, Value::Null);
    let mut atoms = Table::new("atoms", &["mass", "spread", "center"]);
    for a in &res.classification.atoms {
        let center: Vec<String> = a.center.iter().map(|v| format!("{v:?}")).collect();
        atoms.push(vec![a.mass.into(), a.spread.into(), center.join(" ").into()]);
    }
    out.tables.push(atoms);
    Ok(out)
}

pub fn asymptotics(cfg: &AsymptoticsConfig, seed: u64) -> Result<Outcome> {
    let n_list = cfg.n_list();
    let opts = TableOptions { restarts: cfg.restarts, seed, max_iter: cfg.max_iter, tol: cfg.tol };
    let table = minimal_energy_table(cfg.kernel, &n_list, &opts)?;
    let lo = *n_list.iter().min().unwrap_or(&2);
    let hi = *n_list.iter().max().unwrap_or(&2);
    let window = cfg.window.unwrap_or((lo, hi));
    let fit = fit_expansion(&table, window, &FitOptions { probe: cfg.probe, free_leading: cfg.free_leading })?;
    let mut t = Table::new("energy_table", &["N", "energy", "grad_norm", "restarts"]);
    for r in &table.rows {
        t.push(vec![r.n.into(), r.best_energy.into(), r.grad_norm.into(), r.restarts_used.into()]);
    }
    let results = json!({
        "table": value(&table),
        "fit": value(&fit),
        "constant": fit.constant(),
        "c_bhs": constant_cbhs(),
        "lower_bound": log_constant_lower_bound(),
    });
    Ok(Outcome { results, tables: vec![t] })
}

pub fn constants() -> Result<Outcome> {
    let (c_star, f_max) = maximize_f()?;
    let results = json!({
        "C_BHS": constant_cbhs(),
        "log2_minus_three_quarters": log_constant_lower_bound(),
        "F_max": f_max,
        "c_star": c_star,
        "C22": constant_c22()?,
        "identity_residual": c22_identity_residual()?,
        "gamma1": {
            "1": stieltjes_gamma1(1.0)?,
            "1/3": stieltjes_gamma1(1.0 / 3.0)?,
            "2/3": stieltjes_gamma1(2.0 / 3.0)?,
        },
    });
    Ok(Outcome { results, tables: Vec::new() })
}

pub fn gegenbauer(cfg: &GegenbauerConfig) -> Result<Outcome> {
    let mut coeffs = Table::new("coefficients", &["kernel", "l", "coefficient", "error_estimate"]);
    let mut kernels = Vec::new();
    for k in &cfg.kernels {
        let scan = first_negative_index(k, cfg.d, cfg.max_degree)?;
        for (l, (c, e)) in scan.expansion.coeffs.iter().zip(&scan.expansion.coeff_errors).enumerate() {
            coeffs.push(vec![kernel_label(k).into(), l.into(), (*c).into(), (*e).into()]);
        }
        kernels.push(json!({ "kernel": value(k), "scan": value(&scan) }));
    }
    let mut tables = vec![coeffs];
    let mut scan_value = Value::Null;
    if let Some(sc) = &cfg.scan {
        let grid = linspace(sc.s_min, sc.s_max, sc.steps);
        let scan = geodesic_riesz_sign_scan(sc.d, &grid, sc.max_degree)?;
        let mut t = Table::new("scan", &["s", "first_negative_index", "indeterminate"]);
        for r in &scan.rows {
            t.push(vec![r.s.into(), r.first_negative.into(), r.indeterminate.len().into()]);
        }
        tables.push(t);
        scan_value = value(&scan);
    }
    Ok(Outcome { results: json!({ "kernels": kernels, "geodesic_scan": scan_value }), tables })
}

fn frame_options(seed: u64, restarts: usize, rounds: usize, max_iter: usize, tol: f64, polish: bool) -> FrameOptions {
    FrameOptions { seed, restarts, rounds, max_iter, tol, polish }
}

fn support_table(res: &DiscreteMeasureResult) -> Table {
    let d = res.configuration.dim();
    let mut cols: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    cols.push("weight".into());
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new("support", &refs);
    for (p, &w) in res.configuration.points().zip(res.configuration.weights()) {
        let mut row: Vec<Cell> = p.iter().map(|&v| v.into()).collect();
        row.push(w.into());
        t.push(row);
    }
    t
}

pub fn pframe(cfg: &PframeConfig, seed: u64) -> Result<Outcome> {
    let opts = frame_options(seed, cfg.restarts, cfg.rounds, cfg.max_iter, cfg.tol, cfg.polish);
    let (res, setting, two_point) = match cfg.problem {
        MeasureProblem::Pframe { p, d } => (minimize_pframe(p, d, cfg.n_support, &opts)?, MeasureSetting::PFrame { p, d }, None),
        MeasureProblem::Distance { domain, alpha } => (
            maximize_distance_energy(domain, alpha, cfg.n_support, &opts)?,
            MeasureSetting::Distance { domain, alpha },
            Some(best_two_point_energy(domain, alpha)),
        ),
    };
    let mut trace = Table::new("trace", &["phase", "energy"]);
    for (i, e) in res.trace.iter().enumerate() {
        trace.push(vec![i.into(), (*e).into()]);
    }
    let results = json!({
        "result": value(&res),
        "uniform_energy": setting.uniform_energy()?,
        "two_point_energy": two_point,
    });
    Ok(Outcome { results, tables: vec![support_table(&res), trace] })
}

pub fn torus_scan(cfg: &TorusScanConfig, seed: u64) -> Result<Outcome> {
    let opts = frame_options(seed, cfg.restarts, cfg.rounds, cfg.max_iter, cfg.tol, cfg.polish);
    let grid = linspace(cfg.alpha_min, cfg.alpha_max, cfg.steps);
    let scan = torus_phase_scan(&grid, cfg.n_support, &opts)?;
    let mut t = Table::new("scan", &["alpha", "best_energy", "uniform_energy", "gap", "classification", "support_size"]);
    for r in &scan.rows {
        t.push(vec![
            r.alpha.into(),
            r.best_energy.into(),
            r.uniform_energy.into(),
            r.gap.into(),
            label(&r.classification).into(),
            r.support_size.into(),
        ]);
    }
    Ok(Outcome { results: value(&scan), tables: vec![t] })
}

fn snake_options(cfg: &SnakeConfig) -> (SnakeOptions, MarkovOptions) {
    (
        SnakeOptions { grid_size: cfg.grid_size, max_exchanges: cfg.max_exchanges, tol: cfg.tol, perturb: 0.0 },
        MarkovOptions { constraint_grid: cfg.constraint_grid, eval_grid: cfg.eval_grid },
    )
}

pub fn snake(cfg: &SnakeConfig) -> Result<Outcome> {
    let (sopts, mopts) = snake_options(cfg);
    let mut t = Table::new(
        "extremal",
        &["majorant", "n", "pattern", "residual", "degenerate", "k", "markov", "duffin_schaeffer", "snake_norm"],
    );
    let mut reports = Vec::new();
    for m in &cfg.majorants {
        let mut per_degree = Vec::new();
        for &n in &cfg.degrees {
            match snake_report(m, n, &cfg.ks, &sopts, &mopts) {
                Ok(r) => {
                    for row in &r.extremal {
                        t.push(vec![
                            m.name().into(),
                            n.into(),
                            label(&r.pattern).into(),
                            r.snake.equioscillation_residual.into(),
                            r.snake.degenerate.into(),
                            row.k.into(),
                            row.markov.into(),
                            row.duffin_schaeffer.into(),
                            row.snake_norm.into(),
                        ]);
                    }
                    per_degree.push(json!({ "n": n, "report": value(&r) }));
                }
                // Degrees below the number of zeros of μ have no snake.
                Err(e) => per_degree.push(json!({ "n": n, "error": e.to_string() })),
            }
        }
        reports.push(json!({ "majorant": value(m), "name": m.name(), "degrees": per_degree }));
    }
    Ok(Outcome { results: json!({ "majorants": reports }), tables: vec![t] })
}

pub fn weights(cfg: &WeightsConfig, seed: u64) -> Result<Outcome> {
    let fekete = FeketeOptions { seed, restarts: cfg.fekete_restarts, iters: cfg.fekete_iters, ..Default::default() };
    let mut t = Table::new("trials", &["n", "sampler", "trial", "positive", "max_dev", "sum_check", "cond_estimate"]);
    let mut summary = Vec::new();
    for &n in &cfg.degrees {
        for &sampler in &cfg.samplers {
            let stats = weight_statistics(n, cfg.trials, sampler, seed, &fekete)?;
            for r in &stats.rows {
                t.push(vec![
                    n.into(),
                    label(&sampler).into(),
                    r.trial.into(),
                    r.positive.into(),
                    r.max_dev.into(),
                    r.sum_check.into(),
                    r.cond_estimate.into(),
                ]);
            }
            summary.push(value(&stats));
        }
    }
    Ok(Outcome { results: json!({ "statistics": summary }), tables: vec![t] })
}

fn sequence_string(seq: &[i8]) -> String {
    seq.iter().map(|&v| if v > 0 { '+' } else { '-' }).collect()
}

pub fn circulant(cfg: &CirculantConfig, seed: u64) -> Result<Outcome> {
    let opts = SearchOptions { seed, restarts: cfg.restarts, sweeps: cfg.sweeps, t0: cfg.t0, cooling: cfg.cooling };
    let mut t = Table::new("leaderboard", &["n", "strategy", "ratio", "c", "C", "observed_min", "observed_max", "sequence"]);
    let mut best = Vec::new();
    let mut skipped = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        let applicable = match cfg.strategy {
            Strategy::Exhaustive => n <= EXHAUSTIVE_MAX_N,
            Strategy::Legendre => up24_core::circulant::legendre_sequence(n).is_ok(),
            Strategy::Anneal | Strategy::Local => true,
        };
        if !applicable {
            skipped.push(n);
            continue;
        }
        let r = search_circulant(n, cfg.strategy, &opts)?;
        let bounds = verify_operator_bounds(&r.sequence, cfg.verify_trials, seed)?;
        t.push(vec![
            n.into(),
            label(&cfg.strategy).into(),
            r.ratio.into(),
            r.c.into(),
            r.c_upper.into(),
            bounds.min_ratio.into(),
            bounds.max_ratio.into(),
            sequence_string(&r.sequence).into(),
        ]);
        best.push(json!({
            "n": n,
            "sequence": r.sequence,
            "c": r.c,
            "C": r.c_upper,
            "ratio": if r.ratio.is_finite() { json!(r.ratio) } else { json!("inf") },
            "strategy": label(&cfg.strategy),
            "seed": seed,
            "operator_bounds": value(&bounds),
        }));
    }
    Ok(Outcome { results: json!({ "best": best, "skipped_n": skipped }), tables: vec![t] })
}

pub fn chromatic(cfg: &ChromaticConfig) -> Result<Outcome> {
    let rows = chromatic_table(&cfg.radii())?;
    let mut t = Table::new("bound", &["R", "base", "regime"]);
    for r in &rows {
        t.push(vec![r.r.into(), r.base.into(), label(&r.regime).into()]);
    }
    let results = json!({
        "rows": value(&rows),
        "threshold": threshold(),
        "note": "base only; the o(1) correction is taken as zero",
    });
    Ok(Outcome { results, tables: vec![t] })
}

pub fn fig1_heatmap(cfg: &HeatmapConfig) -> Result<Outcome> {
    // Only s with -2 < s < d-3 and α + s > 0 have a threshold radius.
    let grid: Vec<f64> = linspace(cfg.s_min, cfg.s_max, cfg.steps)
        .into_iter()
        .filter(|&s| alpha_threshold(s, cfg.d).is_ok_and(|a| equilibrium_radius(s, cfg.d, a, cfg.gamma).is_ok()))
        .collect();
    let rows = heatmap_region(cfg.d, &grid, cfg.gamma)?;
    let mut t = Table::new("fig1_heatmap", &["s", "alpha_threshold", "r_star"]);
    for r in &rows {
        t.push(vec![r.s.into(), r.alpha_threshold.into(), r.r_star.into()]);
    }
    Ok(Outcome { results: json!({ "d": cfg.d, "rows": rows.len() }), tables: vec![t] })
}

pub fn fig2_pointcloud(cfg: &EquilibriumConfig, seed: u64) -> Result<Outcome> {
    let mut out = equilibrium(cfg, seed)?;
    for t in &mut out.tables {
        t.name = format!("fig2_{}", t.name);
    }
    Ok(out)
}

pub fn fig3_transitions(cfg: &TransitionsConfig) -> Result<Outcome> {
    let mut t = Table::new("fig3_transitions", &["metric", "alpha", "uniform_energy", "two_point_energy", "difference"]);
    for (name, domain) in [("euclid", DistanceDomain::SphereEuclid { d: cfg.d }), ("geodesic", DistanceDomain::SphereGeodesic { d: cfg.d })] {
        for alpha in linspace(cfg.alpha_min, cfg.alpha_max, cfg.steps) {
            let u = MeasureSetting::Distance { domain, alpha }.uniform_energy()?;
            let tp = best_two_point_energy(domain, alpha);
            t.push(vec![name.into(), alpha.into(), u.into(), tp.into(), (u - tp).into()]);
        }
    }
    Ok(Outcome { results: json!({ "d": cfg.d, "rows": t.rows.len() }), tables: vec![t] })
}

pub fn fig4_snakes(cfg: &SnakeFigureConfig) -> Result<Outcome> {
    let mut tables = Vec::new();
    let mut summary = Vec::new();
    for m in Majorant::catalog() {
        let s = match compute_snake(&m, cfg.degree, &SnakeOptions::default()) {
            Ok(s) => s,
            Err(e) => {
                summary.push(json!({ "majorant": m.name(), "error": e.to_string() }));
                continue;
            }
        };
        let mut coeffs = Table::new(format!("fig4_{}_coeffs", m.name()), &["j", "coefficient"]);
        for (j, c) in s.cheb_coeffs.iter().enumerate() {
            coeffs.push(vec![j.into(), (*c).into()]);
        }
        let mut curve = Table::new(format!("fig4_{}_curve", m.name()), &["x", "omega", "mu"]);
        for x in linspace(-1.0, 1.0, cfg.samples) {
            curve.push(vec![x.into(), s.eval(x).into(), m.eval(x).into()]);
        }
        tables.push(coeffs);
        tables.push(curve);
        summary.push(json!({ "majorant": m.name(), "residual": s.equioscillation_residual, "degenerate": s.degenerate }));
    }
    Ok(Outcome { results: json!({ "degree": cfg.degree, "majorants": summary }), tables })
}
