//! Long-time integration of the mean-field equations and characterization
//! of the attractor that is reached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixed_points::{solve_fixed_point, stability_margin};
use crate::model::{classical_jacobian, classical_rhs_supermode, ClassicalState, ModelParams};
use crate::ode::{Dopri5, SampleGrid, StepperConfig};
use crate::paths::PathSpec;
use crate::spectral;
use crate::sweep::{derive_seed, par_map};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step, in mechanical periods.
    pub max_step: f64,
    /// Transient discarded before observing; `None` means `50 / gamma_m`.
    pub t_transient: Option<f64>,
    /// Observation window; rounded up to whole mechanical periods.
    /// `None` means 64 periods.
    pub t_observe: Option<f64>,
    pub seed: u64,
    /// Random initial conditions are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub samples_per_period: usize,
    /// Peak-to-peak variation of `q` below which the attractor is a fixed point.
    pub eps_a: f64,
    /// Stretch the transient to this many slowest linear relaxation times
    /// (from the fixed-point eigenvalues); 0 disables the stretch.
    pub settle_factor: f64,
    /// Hard cap on the (stretched) transient.
    pub max_time: f64,
    /// Integration time for the Lyapunov-exponent estimate; `None` means
    /// `200 / gamma_m`.
    pub t_lyapunov: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 0.1,
            t_transient: None,
            t_observe: None,
            seed: 1,
            init_scale: 1.0,
            samples_per_period: 64,
            eps_a: 1e-3,
            settle_factor: 25.0,
            max_time: 4e6,
            t_lyapunov: None,
        }
    }
}

pub const DEFAULT_OBSERVE_PERIODS: usize = 64;
pub const MIN_OBSERVE_PERIODS: usize = 20;

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("eps_a", self.eps_a),
            ("max_time", self.max_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0 (got {v})")));
            }
        }
        if !(self.init_scale >= 0.0) || !(self.settle_factor >= 0.0) {
            return Err(Error::Config("init_scale and settle_factor must be >= 0".into()));
        }
        if self.samples_per_period < 8 {
            return Err(Error::Config("samples_per_period must be >= 8".into()));
        }
        for (name, v) in [
            ("t_transient", self.t_transient),
            ("t_observe", self.t_observe),
            ("t_lyapunov", self.t_lyapunov),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return Err(Error::Config(format!("{name} must be >= 0 (got {v})")));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn stepper(&self, params: &ModelParams) -> StepperConfig {
        StepperConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step * params.mechanical_period(),
            ..StepperConfig::default()
        }
    }

    pub fn base_transient(&self, params: &ModelParams) -> f64 {
        self.t_transient.unwrap_or(50.0 / params.gamma_m)
    }

    /// Base transient, stretched near a bifurcation where the linear
    /// relaxation rate of the fixed point goes to zero.
    pub fn transient_for(&self, params: &ModelParams) -> f64 {
        let base = self.base_transient(params);
        if self.settle_factor == 0.0 {
            return base;
        }
        match stability_margin(params) {
            Ok(m) if m != 0.0 && m.is_finite() => {
                let rate = if m < 0.0 { m.abs() } else { 2.0 * m };
                base.max((self.settle_factor / rate).min(self.max_time))
            }
            _ => base,
        }
    }

    pub fn observe_periods(&self, params: &ModelParams) -> usize {
        match self.t_observe {
            None => DEFAULT_OBSERVE_PERIODS,
            Some(t) => ((t / params.mechanical_period()).ceil() as usize).max(MIN_OBSERVE_PERIODS),
        }
    }

    pub fn lyapunov_time(&self, params: &ModelParams) -> f64 {
        self.t_lyapunov.unwrap_or(200.0 / params.gamma_m)
    }
}

pub fn random_initial_state(seed: u64, scale: f64) -> ClassicalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = [0.0; 6];
    for v in a.iter_mut() {
        *v = if scale > 0.0 {
            rng.random_range(-scale..=scale)
        } else {
            0.0
        };
    }
    ClassicalState::from_array(a)
}

/// Uniformly sampled post-transient trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<ClassicalState>,
    pub samples_per_period: usize,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn terminal(&self) -> ClassicalState {
        *self.states.last().expect("trajectory has at least one sample")
    }

    pub fn component(&self, f: impl Fn(&ClassicalState) -> f64) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.states.len() - 1) as f64
    }
}

fn rhs(params: ModelParams) -> impl FnMut(f64, &[f64; 6], &mut [f64; 6]) {
    move |_t, y, dy| {
        *dy = classical_rhs_supermode(&params, &ClassicalState::from_array(*y)).to_array();
    }
}

/// Mean-field state after integrating for `duration` from `initial`.
pub fn settle(
    params: &ModelParams,
    initial: &ClassicalState,
    config: &IntegratorConfig,
    duration: f64,
) -> Result<ClassicalState> {
    let mut stepper = Dopri5::new(rhs(*params), 0.0, initial.to_array(), config.stepper(params));
    stepper.advance_to(duration)?;
    Ok(ClassicalState::from_array(*stepper.state()))
}

/// Integrate for `transient`, then sample `periods` mechanical periods.
pub fn integrate_window(
    params: &ModelParams,
    initial: &ClassicalState,
    config: &IntegratorConfig,
    transient: f64,
    periods: usize,
) -> Result<Trajectory> {
    let mut stepper = Dopri5::new(rhs(*params), 0.0, initial.to_array(), config.stepper(params));
    stepper.advance_to(transient)?;
    let dt = params.mechanical_period() / config.samples_per_period as f64;
    let n = periods * config.samples_per_period;
    let mut states = Vec::with_capacity(n + 1);
    states.push(ClassicalState::from_array(*stepper.state()));
    let t0 = stepper.t();
    let mut grid = SampleGrid::after(t0, dt);
    stepper.advance_sampled(t0 + n as f64 * dt, &mut grid, &mut |_, y| {
        states.push(ClassicalState::from_array(*y))
    })?;
    // the final grid point can be lost to rounding of t0 + n * dt
    if states.len() == n {
        states.push(ClassicalState::from_array(*stepper.state()));
    }
    Ok(Trajectory {
        t0,
        dt,
        states,
        samples_per_period: config.samples_per_period,
    })
}

/// Integrate past the (possibly stretched) transient and sample the
/// observation window.
pub fn integrate_classical(
    params: &ModelParams,
    initial: &ClassicalState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    params.validate()?;
    config.validate()?;
    integrate_window(
        params,
        initial,
        config,
        config.transient_for(params),
        config.observe_periods(params),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractorKind {
    FixedPoint,
    LimitCycle,
}

impl std::fmt::Display for AttractorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttractorKind::FixedPoint => "fixed-point",
            AttractorKind::LimitCycle => "limit-cycle",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorReport {
    pub kind: AttractorKind,
    pub fixed_point: Option<ClassicalState>,
    /// Mean mechanical displacement.
    pub q0: f64,
    /// Half the peak-to-peak excursion of `q`.
    pub amplitude: f64,
    pub period: Option<f64>,
    /// Local maxima of `x1` per period of the orbit.
    pub extrema_per_period: Option<u32>,
    pub max_lyapunov: Option<f64>,
    /// `|rhs|` at the last sample.
    pub terminal_residual: f64,
    pub terminal: ClassicalState,
}

pub fn classify_attractor(
    trajectory: &Trajectory,
    params: &ModelParams,
    config: &IntegratorConfig,
) -> Result<AttractorReport> {
    let q = trajectory.component(|s| s.q);
    let ptp = spectral::peak_to_peak(&q);
    let terminal = trajectory.terminal();
    let terminal_residual = classical_rhs_supermode(params, &terminal).norm();
    let q0 = spectral::mean(&q);
    if ptp < config.eps_a {
        return Ok(AttractorReport {
            kind: AttractorKind::FixedPoint,
            fixed_point: Some(terminal),
            q0,
            amplitude: 0.5 * ptp,
            period: None,
            extrema_per_period: None,
            max_lyapunov: None,
            terminal_residual,
            terminal,
        });
    }
    if ptp < 2.0 * config.eps_a {
        return Err(Error::Ambiguous { variation: ptp });
    }
    let period = spectral::dominant_period(&q, trajectory.dt);
    let extrema_per_period = period.map(|p| {
        let x1 = trajectory.component(|s| s.x1);
        let prominence = 0.01 * spectral::peak_to_peak(&x1);
        let maxima = spectral::count_prominent_maxima(&x1, prominence) as f64;
        let cycles = trajectory.duration() / p;
        ((maxima / cycles).round() as u32).max(1)
    });
    Ok(AttractorReport {
        kind: AttractorKind::LimitCycle,
        fixed_point: None,
        q0,
        amplitude: 0.5 * ptp,
        period,
        extrema_per_period,
        max_lyapunov: None,
        terminal_residual,
        terminal,
    })
}

/// Integrate from a seeded random initial state and classify; an ambiguous
/// result is retried with the observation continued from where it stopped.
pub fn simulate_attractor(
    params: &ModelParams,
    config: &IntegratorConfig,
    seed: u64,
) -> Result<AttractorReport> {
    const RETRIES: usize = 3;
    let initial = random_initial_state(seed, config.init_scale);
    let mut traj = integrate_classical(params, &initial, config)?;
    let mut extra = config.transient_for(params);
    for attempt in 0..=RETRIES {
        match classify_attractor(&traj, params, config) {
            Err(Error::Ambiguous { .. }) if attempt < RETRIES => {
                traj = integrate_window(
                    params,
                    &traj.terminal(),
                    config,
                    extra,
                    config.observe_periods(params),
                )?;
                extra *= 2.0;
            }
            other => return other,
        }
    }
    unreachable!()
}

/// Largest Lyapunov exponent from the growth of a tangent vector that is
/// renormalized once per mechanical period.
pub fn max_lyapunov_exponent(
    params: &ModelParams,
    initial: &ClassicalState,
    config: &IntegratorConfig,
) -> Result<f64> {
    params.validate()?;
    config.validate()?;
    let p = *params;
    let mut stepper = Dopri5::new(rhs(p), 0.0, initial.to_array(), config.stepper(params));
    stepper.advance_to(config.transient_for(params))?;

    let mut y = [0.0; 12];
    y[..6].copy_from_slice(stepper.state());
    let v0 = random_initial_state(derive_seed(config.seed, 0x7a9), 1.0).to_array();
    let v_norm = v0.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for i in 0..6 {
        y[6 + i] = v0[i] / v_norm;
    }
    let tangent = move |_t: f64, y: &[f64; 12], dy: &mut [f64; 12]| {
        let mut x = [0.0; 6];
        x.copy_from_slice(&y[..6]);
        let s = ClassicalState::from_array(x);
        let f = classical_rhs_supermode(&p, &s).to_array();
        let jac = classical_jacobian(&p, &s);
        for i in 0..6 {
            dy[i] = f[i];
            let mut acc = 0.0;
            for j in 0..6 {
                acc += jac[(i, j)] * y[6 + j];
            }
            dy[6 + i] = acc;
        }
    };
    let t0 = stepper.t();
    let mut tan = Dopri5::new(tangent, t0, y, config.stepper(params));
    let period = params.mechanical_period();
    let n_periods = (config.lyapunov_time(params) / period).ceil().max(4.0) as usize;
    let mut log_sum = 0.0;
    let mut running = Vec::with_capacity(n_periods);
    for k in 1..=n_periods {
        tan.advance_to(t0 + k as f64 * period)?;
        let mut y = *tan.state();
        let norm = y[6..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Unbounded { t: tan.t() });
        }
        log_sum += norm.ln();
        for v in y[6..].iter_mut() {
            *v /= norm;
        }
        tan.reset_state(y);
        running.push(log_sum / (k as f64 * period));
    }
    let estimate = *running.last().unwrap();
    let tail = &running[running.len() * 3 / 4..];
    let spread = spectral::peak_to_peak(tail);
    let tol = (0.05 * estimate.abs()).max(0.02 * params.gamma_m);
    if spread > tol {
        return Err(Error::NotConverged(format!(
            "Lyapunov estimate {estimate:e} still varies by {spread:e} over the last quarter"
        )));
    }
    Ok(estimate)
}

/// Classify every point of a one-dimensional cut, in parallel.
pub fn amplitude_sweep(
    template: &ModelParams,
    path: &PathSpec,
    config: &IntegratorConfig,
    threads: usize,
) -> Result<Vec<(f64, Result<AttractorReport>)>> {
    config.validate()?;
    let reports = par_map(&path.values, threads, |i, &v| {
        let params = path.params_at(template, v);
        simulate_attractor(&params, config, derive_seed(config.seed, i as u64))
    })?;
    Ok(path.values.iter().copied().zip(reports).collect())
}

/// Least-squares power law `A = c |x - x_th|^exponent` in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub points: usize,
}

pub fn fit_power_law(points: &[(f64, f64)], threshold: f64) -> Option<PowerLawFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, a)| *a > 0.0 && (x - threshold).abs() > 0.0)
        .map(|(x, a)| ((x - threshold).abs().ln(), a.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    Some(PowerLawFit {
        exponent,
        prefactor: (my - exponent * mx).exp(),
        points: logs.len(),
    })
}

/// The fixed point closest to `terminal`, if any lies within `tol`.
pub fn matching_fixed_point(
    params: &ModelParams,
    terminal: &ClassicalState,
    tol: f64,
) -> Result<Option<ClassicalState>> {
    Ok(solve_fixed_point(params)?
        .into_iter()
        .map(|s| s.state)
        .find(|s| {
            let a = s.to_array();
            let b = terminal.to_array();
            a.iter().zip(&b).all(|(x, y)| (x - y).abs() < tol)
        }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undriven_system_decays_to_origin() {
        let p = ModelParams::reference(10.0, 0.0);
        let cfg = IntegratorConfig {
            t_transient: Some(20.0 / p.gamma_m),
            settle_factor: 0.0,
            ..Default::default()
        };
        let traj = integrate_classical(&p, &random_initial_state(3, 0.01), &cfg).unwrap();
        assert!(traj.terminal().norm() < 1e-6, "{}", traj.terminal().norm());
    }

    #[test]
    fn deterministic_given_seed() {
        let p = ModelParams::reference(10.0, 6.0);
        let cfg = IntegratorConfig {
            t_transient: Some(200.0),
            settle_factor: 0.0,
            ..Default::default()
        };
        let a = integrate_classical(&p, &random_initial_state(11, 1.0), &cfg).unwrap();
        let b = integrate_classical(&p, &random_initial_state(11, 1.0), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn observation_window_has_whole_periods() {
        let p = ModelParams::reference(10.0, 3.0);
        let cfg = IntegratorConfig {
            t_transient: Some(10.0),
            settle_factor: 0.0,
            t_observe: Some(21.0 * p.mechanical_period() - 1e-9),
            ..Default::default()
        };
        let traj = integrate_classical(&p, &ClassicalState::ZERO, &cfg).unwrap();
        assert_eq!(traj.states.len(), 21 * 64 + 1);
        assert!((traj.duration() - 21.0 * p.mechanical_period()).abs() < 1e-9);
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let pts: Vec<(f64, f64)> = (1..=10)
            .map(|k| {
                let x = 5.0 + 0.01 * k as f64;
                (x, 0.7 * (x - 5.0).powf(0.25))
            })
            .collect();
        let fit = fit_power_law(&pts, 5.0).unwrap();
        assert!((fit.exponent - 0.25).abs() < 1e-10);
        assert!((fit.prefactor - 0.7).abs() < 1e-10);
    }

    #[test]
    fn classification_hysteresis_band() {
        let p = ModelParams::reference(10.0, 3.0);
        let cfg = IntegratorConfig::default();
        let make = |amp: f64| Trajectory {
            t0: 0.0,
            dt: p.mechanical_period() / 64.0,
            states: (0..64 * 20)
                .map(|k| ClassicalState {
                    q: 0.01 + amp * (2.0 * std::f64::consts::PI * k as f64 / 64.0).cos(),
                    x1: (2.0 * std::f64::consts::PI * k as f64 / 64.0).sin(),
                    ..ClassicalState::ZERO
                })
                .collect(),
            samples_per_period: 64,
        };
        let fp = classify_attractor(&make(1e-4), &p, &cfg).unwrap();
        assert_eq!(fp.kind, AttractorKind::FixedPoint);
        assert!(matches!(
            classify_attractor(&make(7e-4), &p, &cfg),
            Err(Error::Ambiguous { .. })
        ));
        let lc = classify_attractor(&make(0.1), &p, &cfg).unwrap();
        assert_eq!(lc.kind, AttractorKind::LimitCycle);
        assert!((lc.amplitude - 0.1).abs() < 1e-6);
        assert!((lc.period.unwrap() - p.mechanical_period()).abs() < 1e-6);
        assert_eq!(lc.extrema_per_period, Some(1));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        let bad = IntegratorConfig {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig {
            samples_per_period: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
