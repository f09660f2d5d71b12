//! Fluctuation covariance along the mean-field orbit and the entanglement
//! between supermode 2 and the mechanical mode.

use crate::dynamics::{random_initial_state, settle, IntegratorConfig};
use crate::error::{Error, Result};
use crate::fixed_points::{eigen_crossings, eigen_threshold, stable_fixed_point, SweepAxis};
use crate::gaussian::{
    fluctuation_radius, log_negativity, lyapunov_flow, steady_lyapunov_solve, CovarianceMatrix,
    PACKED_LEN,
};
use crate::model::{
    build_diffusion_matrix, build_drift_matrix, classical_rhs_supermode, ClassicalState,
    DriftConvention, ModelParams,
};
use crate::ode::{Dopri5, SampleGrid};
use crate::paths::PathSpec;
use crate::spectral;
use crate::sweep::{derive_seed, par_map};

const DIM: usize = 6 + PACKED_LEN;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementConfig {
    pub integrator: IntegratorConfig,
    pub convention: DriftConvention,
    /// Start from a seeded random covariance instead of the vacuum.
    pub random_v0: bool,
    pub v0_scale: f64,
    /// Mechanical periods of `E_N(t)` kept after the steady state is reached.
    pub sample_periods: usize,
    /// Steady once the per-period `(E_max, E_min)` changes by less than
    /// this (relative) for `steady_periods` periods in a row.
    pub steady_tol: f64,
    pub steady_periods: usize,
    /// Co-integration time before the steady-state check. `None` uses the
    /// stretched mean-field transient when a stable fixed point exists and
    /// the base transient otherwise.
    pub covariance_transient: Option<f64>,
    /// Give up waiting for a steady state after this many periods.
    pub max_settle_periods: usize,
    /// `E_max - E_min` below which the trace counts as constant.
    pub constant_tol: f64,
    /// Largest covariance entry tolerated before the linearization is
    /// declared broken.
    pub breakdown_norm: f64,
    /// Use the algebraic stationary covariance when a stable fixed point
    /// exists instead of integrating.
    pub algebraic_fixed_points: bool,
    /// Keep the sampled `E_N(t)` series in the trace.
    pub keep_series: bool,
}

impl Default for EntanglementConfig {
    fn default() -> Self {
        EntanglementConfig {
            integrator: IntegratorConfig::default(),
            convention: DriftConvention::default(),
            random_v0: false,
            v0_scale: 0.5,
            sample_periods: 16,
            steady_tol: 1e-6,
            steady_periods: 5,
            covariance_transient: None,
            max_settle_periods: 200_000,
            constant_tol: 1e-6,
            breakdown_norm: 1e8,
            algebraic_fixed_points: false,
            keep_series: false,
        }
    }
}

pub const MIN_SAMPLE_PERIODS: usize = 10;

impl EntanglementConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if self.sample_periods < MIN_SAMPLE_PERIODS {
            return Err(Error::Config(format!(
                "sample_periods must be >= {MIN_SAMPLE_PERIODS}"
            )));
        }
        if self.integrator.samples_per_period < 64 {
            return Err(Error::Config(
                "entanglement sampling needs >= 64 samples per period".into(),
            ));
        }
        if !(self.steady_tol > 0.0 && self.constant_tol > 0.0 && self.breakdown_norm > 0.0)
            || self.steady_periods == 0
            || !(self.v0_scale >= 0.0)
            || self.covariance_transient.is_some_and(|t| !(t >= 0.0))
        {
            return Err(Error::Config("invalid entanglement tolerances".into()));
        }
        Ok(())
    }

    fn initial_covariance(&self, nbar: f64, seed: u64) -> CovarianceMatrix {
        if self.random_v0 {
            CovarianceMatrix::random(derive_seed(seed, V0_STREAM), nbar, self.v0_scale)
        } else {
            CovarianceMatrix::vacuum(nbar)
        }
    }
}

/// Seed stream for the random initial covariance.
const V0_STREAM: u64 = 0xc0;

#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementTrace {
    pub t0: f64,
    pub dt: f64,
    /// Sampled `E_N(t)`; empty unless requested.
    pub series: Vec<f64>,
    pub e_max: f64,
    pub e_min: f64,
    pub is_constant: bool,
    /// Autocorrelation period of `E_N(t)` for non-constant traces.
    pub period: Option<f64>,
    /// Whether the steady-state criterion was met before sampling.
    pub steady: bool,
    /// Smallest symplectic eigenvalue of `V` over the sampled window.
    pub min_symplectic: f64,
    /// Window averages of `sqrt(V_qq)/2` and `sqrt(V_pp)/2`.
    pub radius: (f64, f64),
    pub terminal_state: ClassicalState,
    pub terminal_cov: CovarianceMatrix,
    /// Whether the algebraic stationary solution was used.
    pub algebraic: bool,
}

fn split(y: &[f64; DIM]) -> (ClassicalState, CovarianceMatrix) {
    let mut x = [0.0; 6];
    x.copy_from_slice(&y[..6]);
    (ClassicalState::from_array(x), CovarianceMatrix::from_packed(&y[6..]))
}

fn join(s: &ClassicalState, v: &CovarianceMatrix) -> [f64; DIM] {
    let mut y = [0.0; DIM];
    y[..6].copy_from_slice(&s.to_array());
    y[6..].copy_from_slice(&v.to_packed());
    y
}

fn co_rhs(
    params: ModelParams,
    convention: DriftConvention,
) -> Result<impl FnMut(f64, &[f64; DIM], &mut [f64; DIM])> {
    let d = build_diffusion_matrix(&params)?.0;
    Ok(move |_t: f64, y: &[f64; DIM], dy: &mut [f64; DIM]| {
        let mut x = [0.0; 6];
        x.copy_from_slice(&y[..6]);
        let s = ClassicalState::from_array(x);
        dy[..6].copy_from_slice(&classical_rhs_supermode(&params, &s).to_array());
        let drift = build_drift_matrix(&params, &s, convention).0;
        lyapunov_flow(&drift, &d, &y[6..], &mut dy[6..]);
    })
}

fn check_breakdown(t: f64, y: &[f64; DIM], limit: f64) -> Result<()> {
    let norm = y[6..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(norm <= limit) {
        return Err(Error::LinearizationBreakdown { t, norm });
    }
    Ok(())
}

/// Co-integrate the mean field and the covariance from `(initial, v0)`,
/// sampling every `dt` up to `t_end`.
pub fn integrate_covariance(
    params: &ModelParams,
    initial: &ClassicalState,
    v0: &CovarianceMatrix,
    config: &EntanglementConfig,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, ClassicalState, CovarianceMatrix)>> {
    params.validate()?;
    config.validate()?;
    let mut stepper = Dopri5::new(
        co_rhs(*params, config.convention)?,
        0.0,
        join(initial, v0),
        config.integrator.stepper(params),
    );
    let mut out = vec![(0.0, *initial, *v0)];
    let mut grid = SampleGrid::after(0.0, dt);
    let mut failure = None;
    stepper.advance_sampled(t_end, &mut grid, &mut |t, y| {
        if failure.is_none() {
            if let Err(e) = check_breakdown(t, y, config.breakdown_norm) {
                failure = Some(e);
            }
        }
        let (s, v) = split(y);
        out.push((t, s, v));
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Stationary covariance and entanglement at the stable fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyEntanglement {
    pub fixed_point: ClassicalState,
    pub covariance: CovarianceMatrix,
    pub log_negativity: f64,
    pub radius: (f64, f64),
}

pub fn steady_state_entanglement(
    params: &ModelParams,
    convention: DriftConvention,
) -> Result<SteadyEntanglement> {
    params.validate()?;
    let fp = stable_fixed_point(params)?.ok_or_else(|| {
        let max_re = crate::fixed_points::stability_margin(params).unwrap_or(f64::NAN);
        Error::NotHurwitz { max_re }
    })?;
    let s = build_drift_matrix(params, &fp.state, convention);
    let d = build_diffusion_matrix(params)?;
    let v = steady_lyapunov_solve(&s, &d)?;
    Ok(SteadyEntanglement {
        fixed_point: fp.state,
        log_negativity: log_negativity(&v.two_mode())?,
        radius: fluctuation_radius(&v)?,
        covariance: v,
    })
}

fn algebraic_trace(params: &ModelParams, config: &EntanglementConfig) -> Result<EntanglementTrace> {
    let st = steady_state_entanglement(params, config.convention)?;
    let dt = params.mechanical_period() / config.integrator.samples_per_period as f64;
    let n = config.sample_periods * config.integrator.samples_per_period + 1;
    Ok(EntanglementTrace {
        t0: f64::INFINITY,
        dt,
        series: if config.keep_series {
            vec![st.log_negativity; n]
        } else {
            Vec::new()
        },
        e_max: st.log_negativity,
        e_min: st.log_negativity,
        is_constant: true,
        period: None,
        steady: true,
        min_symplectic: st.covariance.min_symplectic_eigenvalue()?,
        radius: st.radius,
        terminal_state: st.fixed_point,
        terminal_cov: st.covariance,
        algebraic: true,
    })
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Run mean field and covariance from seeded random initial values until
/// `E_N` is steady, then sample it over `sample_periods` periods.
pub fn entanglement_trace(
    params: &ModelParams,
    config: &EntanglementConfig,
    seed: u64,
) -> Result<EntanglementTrace> {
    params.validate()?;
    config.validate()?;
    if config.algebraic_fixed_points && stable_fixed_point(params)?.is_some() {
        return algebraic_trace(params, config);
    }
    let icfg = &config.integrator;
    // the mean field settles alone first; the covariance follows the
    // settled orbit
    let initial = settle(
        params,
        &random_initial_state(seed, icfg.init_scale),
        icfg,
        icfg.transient_for(params),
    )?;
    let v0 = config.initial_covariance(params.nbar, seed);
    let mut stepper = Dopri5::new(
        co_rhs(*params, config.convention)?,
        0.0,
        join(&initial, &v0),
        icfg.stepper(params),
    );
    let period = params.mechanical_period();
    let spp = icfg.samples_per_period;
    let dt = period / spp as f64;

    let transient = config.covariance_transient.unwrap_or_else(|| {
        if stable_fixed_point(params).ok().flatten().is_some() {
            icfg.transient_for(params)
        } else {
            icfg.base_transient(params)
        }
    });
    let chunks = (transient / period).ceil() as usize;
    for k in 1..=chunks {
        stepper.advance_to((k as f64 * period).min(transient))?;
        check_breakdown(stepper.t(), stepper.state(), config.breakdown_norm)?;
    }

    // sample one period at a time; returns E_N at spp + 1 points
    let sample_period = |stepper: &mut Dopri5<DIM, _>,
                             mut each: Option<&mut dyn FnMut(&ClassicalState, &CovarianceMatrix)>|
     -> Result<Vec<f64>> {
        let t0 = stepper.t();
        let mut ys = Vec::with_capacity(spp + 1);
        ys.push(*stepper.state());
        let mut grid = SampleGrid::after(t0, dt);
        stepper.advance_sampled(t0 + period, &mut grid, &mut |_, y| ys.push(*y))?;
        if ys.len() == spp {
            ys.push(*stepper.state());
        }
        let mut es = Vec::with_capacity(ys.len());
        for y in &ys {
            check_breakdown(stepper.t(), y, config.breakdown_norm)?;
            let (s, v) = split(y);
            es.push(log_negativity(&v.two_mode())?);
            if let Some(f) = each.as_mut() {
                f(&s, &v);
            }
        }
        Ok(es)
    };

    let mut steady = false;
    let mut calm = 0;
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..config.max_settle_periods {
        let es = sample_period(&mut stepper, None)?;
        let pair = (
            es.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            es.iter().copied().fold(f64::INFINITY, f64::min),
        );
        if let Some(p) = prev {
            let change = relative_change(p.0, pair.0).max(relative_change(p.1, pair.1));
            calm = if change < config.steady_tol { calm + 1 } else { 0 };
            if calm >= config.steady_periods {
                steady = true;
                break;
            }
        }
        prev = Some(pair);
    }
    if !steady {
        log::warn!(
            "E_N not steady after {} periods at delta={}, lambda={}",
            config.max_settle_periods,
            params.delta,
            params.lambda
        );
    }

    let t0 = stepper.t();
    let mut series: Vec<f64> = Vec::with_capacity(config.sample_periods * spp + 1);
    let mut min_symplectic = f64::INFINITY;
    let mut radius_sum = (0.0, 0.0);
    let mut count = 0usize;
    let mut sym_err = None;
    for k in 0..config.sample_periods {
        let mut each = |_: &ClassicalState, v: &CovarianceMatrix| {
            match v.min_symplectic_eigenvalue() {
                Ok(m) => min_symplectic = min_symplectic.min(m),
                Err(e) => sym_err = Some(e),
            }
            if let Ok((rq, rp)) = fluctuation_radius(v) {
                radius_sum.0 += rq;
                radius_sum.1 += rp;
                count += 1;
            }
        };
        let es = sample_period(&mut stepper, Some(&mut each))?;
        // consecutive periods share their boundary sample
        let skip = usize::from(k > 0);
        series.extend_from_slice(&es[skip..]);
    }
    if let Some(e) = sym_err {
        return Err(e);
    }
    let e_max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e_min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let is_constant = e_max - e_min < config.constant_tol;
    let period = if is_constant {
        None
    } else {
        spectral::autocorrelation_period(&series, dt)
    };
    if min_symplectic < 0.5 - 1e-6 {
        log::warn!(
            "covariance violates the uncertainty bound (min symplectic eigenvalue {min_symplectic})"
        );
    }
    let (terminal_state, terminal_cov) = split(stepper.state());
    Ok(EntanglementTrace {
        t0,
        dt,
        series: if config.keep_series { series } else { Vec::new() },
        e_max,
        e_min,
        is_constant,
        period,
        steady,
        min_symplectic,
        radius: (radius_sum.0 / count as f64, radius_sum.1 / count as f64),
        terminal_state,
        terminal_cov,
        algebraic: false,
    })
}

/// Entanglement trace at every point of a cut, in parallel.
pub fn entanglement_sweep(
    template: &ModelParams,
    path: &PathSpec,
    config: &EntanglementConfig,
    threads: usize,
) -> Result<Vec<(f64, Result<EntanglementTrace>)>> {
    config.validate()?;
    let seed = config.integrator.seed;
    let traces = par_map(&path.values, threads, |i, &v| {
        entanglement_trace(&path.params_at(template, v), config, derive_seed(seed, i as u64))
    })?;
    Ok(path.values.iter().copied().zip(traces).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperaturePoint {
    pub value: f64,
    pub nbar: f64,
    pub trace: Result<EntanglementTrace>,
}

/// Traces for every (path point, nbar) pair; rows ordered by path point,
/// then by the order of `nbars`.
pub fn temperature_sweep(
    template: &ModelParams,
    path: &PathSpec,
    nbars: &[f64],
    config: &EntanglementConfig,
    threads: usize,
) -> Result<Vec<TemperaturePoint>> {
    if nbars.is_empty() {
        return Err(Error::Config("nbar list is empty".into()));
    }
    if let Some(bad) = nbars.iter().find(|n| !(**n >= 0.0)) {
        return Err(Error::Config(format!("nbar must be >= 0 (got {bad})")));
    }
    config.validate()?;
    let jobs: Vec<(usize, f64, f64)> = path
        .values
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| nbars.iter().map(move |&n| (i, v, n)))
        .collect();
    let seed = config.integrator.seed;
    let traces = par_map(&jobs, threads, |_, &(i, v, n)| {
        let params = path.params_at(template, v).with_nbar(n);
        // same initial conditions for every temperature at a given point
        entanglement_trace(&params, config, derive_seed(seed, i as u64))
    })?;
    Ok(jobs
        .into_iter()
        .zip(traces)
        .map(|((_, value, nbar), trace)| TemperaturePoint { value, nbar, trace })
        .collect())
}

/// A point on the lasing boundary together with the direction, along
/// `axis`, that leads into the stable region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub label: &'static str,
    pub axis: SweepAxis,
    /// Parameter held fixed (delta for a lambda cut and vice versa).
    pub fixed: f64,
    pub threshold: f64,
    /// `-1` or `+1`.
    pub inward: f64,
}

impl BoundarySample {
    pub fn params_at(&self, template: &ModelParams, offset: f64) -> ModelParams {
        let v = self.threshold + self.inward * offset;
        match self.axis {
            SweepAxis::Lambda => template.with_delta(self.fixed).with_lambda(v),
            SweepAxis::Delta => template.with_lambda(self.fixed).with_delta(v),
        }
    }
}

/// Boundary points on the three reference cuts (both crossings of the
/// detuning cut) plus four more lambda thresholds at nearby detunings.
pub fn default_boundary_samples(template: &ModelParams) -> Result<Vec<BoundarySample>> {
    let mut out = Vec::new();
    for (label, delta) in [("path1", template.j), ("path3", 9.5)] {
        out.push(BoundarySample {
            label,
            axis: SweepAxis::Lambda,
            fixed: delta,
            threshold: eigen_threshold(template, delta)?,
            inward: -1.0,
        });
    }
    let p2 = PathSpec::reference(2, template, None)?;
    let crossings = eigen_crossings(&p2.base(template), SweepAxis::Delta, &p2.values)?;
    if crossings.len() != 2 {
        return Err(Error::NoBracket(format!(
            "expected two boundary crossings on path2, found {}",
            crossings.len()
        )));
    }
    out.push(BoundarySample {
        label: "path2-low",
        axis: SweepAxis::Delta,
        fixed: p2.fixed,
        threshold: crossings[0],
        inward: -1.0,
    });
    out.push(BoundarySample {
        label: "path2-high",
        axis: SweepAxis::Delta,
        fixed: p2.fixed,
        threshold: crossings[1],
        inward: 1.0,
    });
    for delta in [9.6, 9.8, 10.2, 10.4] {
        out.push(BoundarySample {
            label: "boundary",
            axis: SweepAxis::Lambda,
            fixed: delta,
            threshold: eigen_threshold(template, delta)?,
            inward: -1.0,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub sample: BoundarySample,
    pub delta: f64,
    pub lambda: f64,
    pub log_negativity: Option<f64>,
    pub radius: Option<f64>,
    /// Set when the point was skipped, with the reason.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScan {
    pub points: Vec<BoundaryPoint>,
    pub mean: f64,
    /// Population standard deviation over the mean.
    pub relative_spread: f64,
    pub admissible: usize,
}

/// A near-boundary point is dropped when its fluctuation radius exceeds
/// this multiple of the radius one offset further into the stable region.
pub const EXCLUSION_RATIO: f64 = 10.0;

/// Stationary `E_N` at `offset` inside the stable region from each sample.
pub fn boundary_constant_scan(
    template: &ModelParams,
    samples: &[BoundarySample],
    offset: f64,
    convention: DriftConvention,
    threads: usize,
) -> Result<BoundaryScan> {
    if !(offset > 0.0) {
        return Err(Error::Config(format!("offset must be > 0 (got {offset})")));
    }
    let points = par_map(samples, threads, |_, s| {
        let p = s.params_at(template, offset);
        let mut pt = BoundaryPoint {
            sample: *s,
            delta: p.delta,
            lambda: p.lambda,
            log_negativity: None,
            radius: None,
            excluded: None,
        };
        let near = steady_state_entanglement(&p, convention);
        let far = steady_state_entanglement(&s.params_at(template, 2.0 * offset), convention);
        match (near, far) {
            (Ok(n), Ok(f)) => {
                pt.radius = Some(n.radius.0);
                if n.radius.0 > EXCLUSION_RATIO * f.radius.0 {
                    pt.excluded = Some(format!(
                        "radius {} > {EXCLUSION_RATIO} x {}",
                        n.radius.0, f.radius.0
                    ));
                } else {
                    pt.log_negativity = Some(n.log_negativity);
                }
            }
            (Err(e), _) | (_, Err(e)) => pt.excluded = Some(e.to_string()),
        }
        pt
    })?;
    let values: Vec<f64> = points.iter().filter_map(|p| p.log_negativity).collect();
    let (mean, relative_spread) = if values.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let m = spectral::mean(&values);
        let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
        (m, var.sqrt() / m)
    };
    Ok(BoundaryScan {
        admissible: values.len(),
        points,
        mean,
        relative_spread,
    })
}
