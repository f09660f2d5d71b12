//! One function per subcommand; each returns the tables to write.

use crate::cli::config::Settings;
use crate::cli::table::ResultTable;
use crate::dynamics::{
    amplitude_sweep, classify_attractor, fit_power_law, integrate_classical, random_initial_state,
    AttractorKind, AttractorReport,
};
use crate::entanglement::{
    boundary_constant_scan, default_boundary_samples, entanglement_sweep, entanglement_trace,
    steady_state_entanglement, temperature_sweep, EntanglementTrace,
};
use crate::error::{Error, Result};
use crate::fixed_points::{eigen_crossings, stability_margin, stable_fixed_point};
use crate::paths::PathSpec;
use crate::phase::{boundary_curve, cross_check, sweep_phase_diagram};
use crate::sweep::{derive_seed, par_map};
use crate::ModelParams;

pub const COMMANDS: &[(&str, &str)] = &[
    ("phase-diagram", "region I/II classification over (lambda, delta) plus the boundary"),
    ("trajectory", "mean-field time series at --lambda/--delta"),
    ("amplitude", "oscillation amplitude along a cut, with near-threshold fit"),
    ("entanglement", "E_max/E_min of the log negativity along a cut"),
    ("fluctuation", "mechanical fluctuation radius along a cut"),
    ("temperature", "E_max/E_min along a cut for every nbar in --nbar-list"),
    ("boundary-constant", "stationary E_N just inside the lasing boundary"),
];

/// Tables produced by a command. `failure` makes the run exit with the
/// numerical-failure status after the files are written.
#[derive(Debug, Default)]
pub struct Output {
    /// `(file stem, table)`; the first stem is the command name.
    pub tables: Vec<(String, ResultTable)>,
    pub failure: Option<String>,
}

impl Output {
    fn single(command: &str, table: ResultTable) -> Self {
        Output {
            tables: vec![(command.to_string(), table)],
            failure: None,
        }
    }

    fn fail_if(mut self, failures: usize, what: &str) -> Self {
        if failures > 0 {
            self.failure = Some(format!("{failures} {what} failed"));
        }
        self
    }
}

pub fn run_command(command: &str, s: &Settings) -> Result<Output> {
    match command {
        "phase-diagram" => phase_diagram(s),
        "trajectory" => trajectory(s),
        "amplitude" => amplitude(s),
        "entanglement" => entanglement(s),
        "fluctuation" => fluctuation(s),
        "temperature" => temperature(s),
        "boundary-constant" => boundary_constant(s),
        other => Err(Error::Config(format!("unknown command '{other}'"))),
    }
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn kind_code(kind: AttractorKind) -> f64 {
    match kind {
        AttractorKind::FixedPoint => 1.0,
        AttractorKind::LimitCycle => 2.0,
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn phase_diagram(s: &Settings) -> Result<Output> {
    let template = s.params()?;
    let threads = s.threads()?;
    let diagram = sweep_phase_diagram(&template, &s.grid("lambda_grid")?, &s.grid("delta_grid")?, threads)?;
    let mut grid = ResultTable::new(&["lambda", "delta", "region", "max_re", "roots"]);
    for c in &diagram.cells {
        grid.push(vec![c.lambda, c.delta, c.region.code() as f64, c.max_re, c.roots as f64]);
    }
    grid.meta("region_codes", "1 = I (stable fixed point), 2 = II (limit cycle), 0 = unknown");
    let unknown = diagram.unknown_fraction();
    grid.meta("unknown_fraction", unknown);

    let checks = cross_check(
        &diagram,
        &template,
        &s.integrator()?,
        s.cross_check()?,
        s.seed()?,
        threads,
    )?;
    let disagreements: Vec<_> = checks.iter().filter(|c| !c.agrees()).collect();
    grid.meta("cross_checked", checks.len());
    grid.meta("cross_check_disagreements", disagreements.len());
    for c in &disagreements {
        let got = match &c.attractor {
            Ok(k) => k.to_string(),
            Err(e) => format!("error: {e}"),
        };
        grid.meta(
            "disagreement",
            format!("lambda={} delta={} eigen={} integration={got}", c.lambda, c.delta, c.region),
        );
    }

    let mut boundary = ResultTable::new(&["delta", "lambda_grid", "lambda_eigen", "lambda_gamma"]);
    for r in boundary_curve(&diagram, &template, threads)? {
        boundary.push(vec![r.delta, opt(r.lambda_grid), opt(r.lambda_eigen), opt(r.lambda_gamma)]);
    }
    let mut out = Output::single("phase-diagram", grid);
    out.tables.push(("phase-diagram-boundary".into(), boundary));
    if unknown > 0.01 {
        out.failure = Some(format!("{:.2}% of cells could not be classified", 100.0 * unknown));
    }
    Ok(out)
}

fn trajectory(s: &Settings) -> Result<Output> {
    let params = s.params()?;
    let cfg = s.integrator()?;
    let traj = integrate_classical(&params, &random_initial_state(s.seed()?, cfg.init_scale), &cfg)?;
    let mut t = ResultTable::new(&["t", "x1", "y1", "x2", "y2", "q", "p"]);
    for (k, st) in traj.states.iter().enumerate() {
        let mut row = vec![traj.time(k)];
        row.extend_from_slice(&st.to_array());
        t.push(row);
    }
    match classify_attractor(&traj, &params, &cfg) {
        Ok(r) => {
            t.meta("attractor", r.kind);
            t.meta("amplitude", r.amplitude);
            t.meta("q0", r.q0);
            t.meta("period", opt(r.period));
            t.meta("extrema_per_period", opt(r.extrema_per_period.map(f64::from)));
        }
        Err(e) => t.meta("attractor", format!("unclassified ({e})")),
    }
    Ok(Output::single("trajectory", t))
}

/// Thresholds along the cut and, for each, the lasing direction (+1 or -1).
fn thresholds(template: &ModelParams, path: &PathSpec) -> Result<Vec<(f64, f64)>> {
    let base = path.base(template);
    eigen_crossings(&base, path.axis, &path.values)?
        .into_iter()
        .map(|th| {
            let probe = 1e-6 * th.abs().max(1.0);
            let above = stability_margin(&path.axis.apply(&base, th + probe))? > 0.0;
            Ok((th, if above { 1.0 } else { -1.0 }))
        })
        .collect()
}

fn amplitude(s: &Settings) -> Result<Output> {
    let template = s.params()?;
    let path = s.path_spec(&template)?;
    let cfg = s.integrator()?;
    let sweep = amplitude_sweep(&template, &path, &cfg, s.threads()?)?;
    let mut t = ResultTable::new(&[path.axis.name(), "kind", "amplitude", "q0", "period", "extrema_per_period"]);
    let mut failures = 0;
    for (v, r) in &sweep {
        match r {
            Ok(r) => t.push(vec![
                *v,
                kind_code(r.kind),
                r.amplitude,
                r.q0,
                opt(r.period),
                opt(r.extrema_per_period.map(f64::from)),
            ]),
            Err(e) => {
                failures += 1;
                log::error!("{} = {v}: {e}", path.axis.name());
                t.push(vec![*v, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
            }
        }
    }
    t.meta("kind_codes", "1 = fixed point, 2 = limit cycle, nan = failed");
    t.meta("path", &path.label);
    t.meta("fixed", path.fixed);
    let n_fit = s.fit_points()?;
    for (k, (th, dir)) in thresholds(&template, &path)?.into_iter().enumerate() {
        let mut lasing: Vec<(f64, f64)> = sweep
            .iter()
            .filter_map(|(v, r)| match r {
                Ok(AttractorReport { kind: AttractorKind::LimitCycle, amplitude, .. })
                    if (v - th) * dir > 0.0 =>
                {
                    Some((*v, *amplitude))
                }
                _ => None,
            })
            .collect();
        lasing.sort_by(|a, b| (a.0 - th).abs().total_cmp(&(b.0 - th).abs()));
        lasing.truncate(n_fit);
        t.meta(&format!("threshold_{k}"), th);
        match fit_power_law(&lasing, th) {
            Some(fit) => {
                t.meta(&format!("fit_exponent_{k}"), fit.exponent);
                t.meta(&format!("fit_points_{k}"), fit.points);
            }
            None => t.meta(&format!("fit_exponent_{k}"), "nan"),
        }
    }
    Ok(Output::single("amplitude", t).fail_if(failures, "points"))
}

fn is_breakdown(e: &Error) -> bool {
    matches!(e, Error::LinearizationBreakdown { .. })
}

fn entanglement(s: &Settings) -> Result<Output> {
    let template = s.params()?;
    let path = s.path_spec(&template)?;
    let cfg = s.entanglement()?;
    let sweep = entanglement_sweep(&template, &path, &cfg, s.threads()?)?;
    let mut t = ResultTable::new(&[path.axis.name(), "e_max", "e_min", "is_constant", "period", "excluded"]);
    let mut series = ResultTable::new(&[path.axis.name(), "t", "e_n"]);
    let mut failures = 0;
    for (v, r) in &sweep {
        match r {
            Ok(tr) => {
                t.push(vec![*v, tr.e_max, tr.e_min, flag(tr.is_constant), opt(tr.period), 0.0]);
                for (k, e) in tr.series.iter().enumerate() {
                    series.push(vec![*v, k as f64 * tr.dt, *e]);
                }
            }
            Err(e) => {
                let excluded = is_breakdown(e);
                if !excluded {
                    failures += 1;
                }
                log::warn!("{} = {v}: {e}", path.axis.name());
                t.push(vec![*v, f64::NAN, f64::NAN, f64::NAN, f64::NAN, flag(excluded)]);
            }
        }
    }
    t.meta("path", &path.label);
    t.meta("fixed", path.fixed);
    let mut out = Output::single("entanglement", t);
    if cfg.keep_series {
        out.tables.push(("entanglement-series".into(), series));
    }
    Ok(out.fail_if(failures, "points"))
}

fn fluctuation(s: &Settings) -> Result<Output> {
    let template = s.params()?;
    let path = s.path_spec(&template)?;
    let cfg = s.entanglement()?;
    let seed = s.seed()?;
    // (stable region?, radius_q, radius_p) per point
    let radii = par_map(&path.values, s.threads()?, |i, &v| -> Result<(bool, f64, f64)> {
        let p = path.params_at(&template, v);
        if stable_fixed_point(&p)?.is_some() {
            let st = steady_state_entanglement(&p, cfg.convention)?;
            Ok((true, st.radius.0, st.radius.1))
        } else {
            let tr: EntanglementTrace = entanglement_trace(&p, &cfg, derive_seed(seed, i as u64))?;
            Ok((false, tr.radius.0, tr.radius.1))
        }
    })?;
    let mut t = ResultTable::new(&[path.axis.name(), "radius_q", "radius_p", "excluded"]);
    let mut failures = 0;
    for (i, r) in radii.iter().enumerate() {
        let v = path.values[i];
        match r {
            Ok((stable, rq, rp)) => {
                // excluded when the radius jumps by more than 10x relative
                // to a stable neighbour
                let neighbour = [i.checked_sub(1), Some(i + 1)]
                    .into_iter()
                    .flatten()
                    .filter_map(|j| match radii.get(j) {
                        Some(Ok((true, q, _))) => Some(*q),
                        _ => None,
                    })
                    .fold(f64::INFINITY, f64::min);
                let excluded = *stable && *rq > crate::entanglement::EXCLUSION_RATIO * neighbour;
                t.push(vec![v, *rq, *rp, flag(excluded)]);
            }
            Err(e) => {
                let excluded = is_breakdown(e);
                if !excluded {
                    failures += 1;
                }
                log::warn!("{} = {v}: {e}", path.axis.name());
                t.push(vec![v, f64::NAN, f64::NAN, flag(excluded)]);
            }
        }
    }
    t.meta("path", &path.label);
    t.meta("fixed", path.fixed);
    Ok(Output::single("fluctuation", t).fail_if(failures, "points"))
}

fn temperature(s: &Settings) -> Result<Output> {
    let nbars = s.nbar_list()?;
    let template = s.params()?;
    let path = s.path_spec(&template)?;
    let cfg = s.entanglement()?;
    let rows = temperature_sweep(&template, &path, &nbars, &cfg, s.threads()?)?;
    let mut t = ResultTable::new(&[path.axis.name(), "nbar", "e_max", "e_min", "is_constant"]);
    let mut failures = 0;
    for r in &rows {
        match &r.trace {
            Ok(tr) => t.push(vec![r.value, r.nbar, tr.e_max, tr.e_min, flag(tr.is_constant)]),
            Err(e) => {
                if !is_breakdown(e) {
                    failures += 1;
                }
                log::warn!("{} = {}, nbar = {}: {e}", path.axis.name(), r.value, r.nbar);
                t.push(vec![r.value, r.nbar, f64::NAN, f64::NAN, f64::NAN]);
            }
        }
    }
    t.meta("path", &path.label);
    t.meta("fixed", path.fixed);
    Ok(Output::single("temperature", t).fail_if(failures, "points"))
}

fn boundary_constant(s: &Settings) -> Result<Output> {
    let template = s.params()?;
    let samples = default_boundary_samples(&template)?;
    let scan = boundary_constant_scan(&template, &samples, s.offset()?, s.convention()?, s.threads()?)?;
    let mut t = ResultTable::new(&["sample", "delta", "lambda", "e_n", "radius", "excluded"]);
    for (k, p) in scan.points.iter().enumerate() {
        t.push(vec![
            k as f64,
            p.delta,
            p.lambda,
            opt(p.log_negativity),
            opt(p.radius),
            flag(p.excluded.is_some()),
        ]);
    }
    for (k, p) in scan.points.iter().enumerate() {
        t.meta(&format!("sample_{k}"), format!("{} threshold={}", p.sample.label, p.sample.threshold));
        if let Some(why) = &p.excluded {
            t.meta(&format!("excluded_{k}"), why);
        }
    }
    t.meta("mean", scan.mean);
    t.meta("relative_spread", scan.relative_spread);
    t.meta("admissible", scan.admissible);
    let mut out = Output::single("boundary-constant", t);
    if scan.admissible == 0 {
        out.failure = Some("no admissible boundary samples".into());
    }
    Ok(out)
}
