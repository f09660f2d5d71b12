//! Steady states of the mean-field equations, their linear stability, the
//! radiation-pressure damping rate and lasing thresholds.

use nalgebra::{Complex, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::{
    build_drift_matrix, classical_rhs_supermode, ClassicalState, DriftConvention, ModelParams,
    KAPPA,
};

/// Sign-change scan resolution for the self-consistency equation.
const ROOT_SCAN_POINTS: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSolution {
    pub state: ClassicalState,
    /// Norm of the mean-field right-hand side at `state`.
    pub residual: f64,
    /// Eigenvalues of the drift matrix, real part descending.
    pub eigenvalues: [Complex<f64>; 6],
    pub stable: bool,
}

impl FixedPointSolution {
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues[0].re
    }
}

/// Optical steady state for a frozen mechanical displacement `q`.
pub fn optical_steady_state(params: &ModelParams, q: f64) -> Result<(Complex<f64>, Complex<f64>)> {
    let i = Complex::new(0.0, 1.0);
    let hk = Complex::new(0.5 * KAPPA, 0.0);
    let shift = i * (0.5 * params.g * q);
    let a = Matrix2::new(
        i * (params.delta - params.j) - hk + shift,
        -shift,
        -shift,
        i * (params.delta + params.j) - hk + shift,
    );
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).powi(2);
    if !(det.norm() > 1e-14 * scale.max(1.0)) {
        return Err(Error::SingularOpticalSystem { q });
    }
    let drive = Complex::new(-params.lambda * std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let b = Vector2::new(drive, drive);
    // Cramer's rule on the 2x2 system
    let c1 = (b[0] * a[(1, 1)] - a[(0, 1)] * b[1]) / det;
    let c2 = (a[(0, 0)] * b[1] - b[0] * a[(1, 0)]) / det;
    Ok((c1, c2))
}

/// `F(q) = q - (g / 2 omega_m) |c1(q) - c2(q)|^2`; fixed points are its roots.
pub fn self_consistency(params: &ModelParams, q: f64) -> Result<f64> {
    let (c1, c2) = optical_steady_state(params, q)?;
    Ok(q - params.g / (2.0 * params.omega_m) * (c1 - c2).norm_sqr())
}

/// Upper bound on the steady displacement: photon number is at most
/// `(2 Lambda / kappa)^2`, which caps the radiation-pressure force.
pub fn displacement_bound(params: &ModelParams) -> f64 {
    params.g * (2.0 * params.lambda / KAPPA).powi(2) / params.omega_m
}

fn expand(params: &ModelParams, q: f64) -> Result<ClassicalState> {
    let (c1, c2) = optical_steady_state(params, q)?;
    Ok(ClassicalState {
        x1: c1.re,
        y1: c1.im,
        x2: c2.re,
        y2: c2.im,
        q,
        p: 0.0,
    })
}

/// Refine a bracketed root of `f` with Newton steps (finite-difference
/// slope), falling back to bisection whenever Newton leaves the bracket.
fn safeguarded_newton(
    f: impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
) -> Result<f64> {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == (f_lo < 0.0) {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        let h = 1e-7 * x.abs().max(1e-9);
        let slope = (f(x + h)? - f(x - h)?) / (2.0 * h);
        let newton = x - fx / slope;
        let next = if slope.is_finite() && slope != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo < 1e-300 {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

pub fn stability_eigenvalues(
    params: &ModelParams,
    state: &ClassicalState,
) -> Result<[Complex<f64>; 6]> {
    let s = build_drift_matrix(params, state, DriftConvention::Quadrature).0;
    let schur = s.try_schur(1e-14, 10_000).ok_or(Error::EigenFailure)?;
    let ev = schur.complex_eigenvalues();
    let mut out = [Complex::new(0.0, 0.0); 6];
    for (o, e) in out.iter_mut().zip(ev.iter()) {
        *o = *e;
    }
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenFailure);
    }
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(out)
}

/// All fixed points, ordered by increasing displacement.
pub fn solve_fixed_point(params: &ModelParams) -> Result<Vec<FixedPointSolution>> {
    params.validate()?;
    let q_max = displacement_bound(params);
    let mut roots = Vec::new();
    if q_max <= 0.0 {
        // undriven or uncoupled: q = 0 exactly
        roots.push(0.0);
    } else {
        let f = |q: f64| self_consistency(params, q);
        let upper = q_max * (1.0 + 1e-9);
        let mut q_prev = 0.0;
        let mut f_prev = f(0.0)?;
        if f_prev == 0.0 {
            roots.push(0.0);
        }
        for k in 1..=ROOT_SCAN_POINTS {
            let q = upper * k as f64 / ROOT_SCAN_POINTS as f64;
            let fq = f(q)?;
            if fq == 0.0 {
                roots.push(q);
            } else if f_prev != 0.0 && (fq < 0.0) != (f_prev < 0.0) {
                roots.push(safeguarded_newton(f, q_prev, q, f_prev)?);
            }
            q_prev = q;
            f_prev = fq;
        }
        if roots.is_empty() {
            return Err(Error::NoRoot(format!(
                "F(0) = {:e}, F(q_max = {q_max:e}) = {:e}",
                f(0.0)?,
                f(upper)?
            )));
        }
    }
    roots
        .into_iter()
        .map(|q| {
            let state = expand(params, q)?;
            let residual = classical_rhs_supermode(params, &state).norm();
            let eigenvalues = stability_eigenvalues(params, &state)?;
            Ok(FixedPointSolution {
                state,
                residual,
                stable: eigenvalues[0].re < 0.0,
                eigenvalues,
            })
        })
        .collect()
}

/// Largest eigenvalue real part of the most stable fixed point. Negative
/// means at least one fixed point is linearly stable.
pub fn stability_margin(params: &ModelParams) -> Result<f64> {
    let fps = solve_fixed_point(params)?;
    Ok(fps
        .iter()
        .map(FixedPointSolution::max_real_eigenvalue)
        .fold(f64::INFINITY, f64::min))
}

/// The first linearly stable fixed point, if any.
pub fn stable_fixed_point(params: &ModelParams) -> Result<Option<FixedPointSolution>> {
    Ok(solve_fixed_point(params)?.into_iter().find(|s| s.stable))
}

/// Radiation-pressure contribution to the mechanical damping, from the
/// mechanical susceptibility with `B = J^2 + kappa^2/4` and the cavity-2
/// amplitude `alpha2 = (c1 - c2)/sqrt(2)` at the fixed point.
pub fn gamma_opt(params: &ModelParams, fixed_point: &ClassicalState) -> f64 {
    let (ar, ai) = fixed_point.alpha2();
    let alpha2_sq = ar * ar + ai * ai;
    let k = KAPPA;
    let w = params.omega_m;
    let d = params.delta;
    let b = params.j * params.j + 0.25 * k * k;
    let num = 2.0 * k * d * (3.0 * b * b - 2.0 * b * (w * w + d * d) - (w * w - d * d).powi(2) - b * k * k);
    let plus = (b - (w + d).powi(2)).powi(2) + k * k * (w + d).powi(2);
    let minus = (b - (w - d).powi(2)).powi(2) + k * k * (w - d).powi(2);
    w * alpha2_sq * params.g * params.g * num / (plus * minus)
}

/// Which parameter a one-dimensional cut varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    Delta,
}

impl SweepAxis {
    pub fn apply(self, template: &ModelParams, value: f64) -> ModelParams {
        match self {
            SweepAxis::Lambda => template.with_lambda(value),
            SweepAxis::Delta => template.with_delta(value),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::Delta => "delta",
        }
    }
}

/// Range scanned for a bracket by [`find_threshold`].
pub const THRESHOLD_SCAN: (f64, f64, f64) = (0.05, 30.0, 0.05);

fn bisect(
    f: impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let mut f_lo = f(lo)?;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Drive amplitude at which `gamma_m + gamma_opt` first vanishes for the
/// template's detuning `delta`.
pub fn find_threshold(template: &ModelParams, delta: f64) -> Result<f64> {
    let base = template.with_delta(delta);
    let gamma_eff = |lambda: f64| -> Result<f64> {
        let p = base.with_lambda(lambda);
        let fp = solve_fixed_point(&p)?;
        Ok(p.gamma_m + gamma_opt(&p, &fp[0].state))
    };
    let (start, stop, step) = THRESHOLD_SCAN;
    let mut prev = start;
    let mut f_prev = gamma_eff(prev)?;
    let n = ((stop - start) / step).round() as usize;
    for k in 1..=n {
        let l = start + k as f64 * step;
        let fl = gamma_eff(l)?;
        if f_prev > 0.0 && fl <= 0.0 {
            return bisect(gamma_eff, prev, l, 1e-11);
        }
        prev = l;
        f_prev = fl;
    }
    Err(Error::NoBracket(format!(
        "gamma_m + gamma_opt stays positive for lambda in [{start}, {stop}] at delta = {delta}"
    )))
}

/// Parameter value in `[lo, hi]` where the stability margin changes sign,
/// located by bisection. The margin must have opposite signs at the ends.
pub fn eigen_crossing(
    template: &ModelParams,
    axis: SweepAxis,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let margin = |v: f64| stability_margin(&axis.apply(template, v));
    let (m_lo, m_hi) = (margin(lo)?, margin(hi)?);
    if (m_lo < 0.0) == (m_hi < 0.0) {
        return Err(Error::NoBracket(format!(
            "stability margin has the same sign at {} = {lo} ({m_lo:e}) and {hi} ({m_hi:e})",
            axis.name()
        )));
    }
    bisect(margin, lo, hi, 1e-11)
}

/// Scan `values` (monotone) and refine every stability change by bisection.
pub fn eigen_crossings(
    template: &ModelParams,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, bool)> = None;
    for &v in values {
        let stable = stability_margin(&axis.apply(template, v))? < 0.0;
        if let Some((pv, ps)) = prev {
            if ps != stable {
                out.push(eigen_crossing(template, axis, pv, v)?);
            }
        }
        prev = Some((v, stable));
    }
    Ok(out)
}

/// Lasing threshold in `lambda` at fixed `delta` from the eigenvalue
/// criterion (first loss of stability on the scan of [`THRESHOLD_SCAN`]).
pub fn eigen_threshold(template: &ModelParams, delta: f64) -> Result<f64> {
    let base = template.with_delta(delta);
    let (start, stop, step) = THRESHOLD_SCAN;
    let n = ((stop - start) / step).round() as usize;
    let mut prev = start;
    let mut was_stable = stability_margin(&base.with_lambda(prev))? < 0.0;
    for k in 1..=n {
        let l = start + k as f64 * step;
        let stable = stability_margin(&base.with_lambda(l))? < 0.0;
        if was_stable && !stable {
            return eigen_crossing(&base, SweepAxis::Lambda, prev, l);
        }
        prev = l;
        was_stable = stable;
    }
    Err(Error::NoBracket(format!(
        "fixed point stays stable for lambda in [{start}, {stop}] at delta = {delta}"
    )))
}
