//! Dormand-Prince 5(4) stepper with continuous (dense) output.
//!
//! The stepper is stateful so long integrations can be advanced in chunks
//! without restarting the step-size controller. Samples on a uniform time
//! grid are produced from the 4th-order continuous extension of each
//! accepted step.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Any component exceeding this magnitude is reported as unbounded.
    pub overflow_guard: f64,
    pub max_steps: u64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: f64::INFINITY,
            overflow_guard: 1e12,
            max_steps: u64::MAX,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Adaptive integrator for `y' = f(t, y)` with a fixed-size real state.
pub struct Dopri5<const N: usize, F> {
    f: F,
    cfg: StepperConfig,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    steps: u64,
    evals: u64,
    post_step: Option<fn(&mut [f64; N])>,
}

impl<const N: usize, F> Dopri5<N, F>
where
    F: FnMut(f64, &[f64; N], &mut [f64; N]),
{
    pub fn new(mut f: F, t0: f64, y0: [f64; N], cfg: StepperConfig) -> Self {
        let mut k1 = [0.0; N];
        f(t0, &y0, &mut k1);
        let mut stepper = Dopri5 {
            f,
            cfg,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            steps: 0,
            evals: 1,
            post_step: None,
        };
        stepper.h = stepper.initial_step();
        stepper
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn evaluations(&self) -> u64 {
        self.evals
    }

    /// Replace the current state (e.g. after renormalizing a tangent vector).
    pub fn reset_state(&mut self, y: [f64; N]) {
        self.y = y;
        (self.f)(self.t, &self.y, &mut self.k1);
        self.evals += 1;
    }

    fn initial_step(&mut self) -> f64 {
        // Hairer, Norsett & Wanner starting-step heuristic.
        let sc = |y: f64| self.cfg.abs_tol + self.cfg.rel_tol * y.abs();
        let n = N as f64;
        let d0 = (self.y.iter().map(|&v| (v / sc(v)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self
            .y
            .iter()
            .zip(&self.k1)
            .map(|(&v, &k)| (k / sc(v)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.cfg.max_step);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = self.y[i] + h0 * self.k1[i];
        }
        let mut f1 = [0.0; N];
        (self.f)(self.t + h0, &y1, &mut f1);
        self.evals += 1;
        let d2 = (self
            .y
            .iter()
            .zip(f1.iter().zip(&self.k1))
            .map(|(&v, (&a, &b))| ((a - b) / sc(v)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.cfg.max_step)
    }

    /// Advance to `t_end` without sampling.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        self.run(t_end, None, &mut |_, _| {})
    }

    /// Advance to `t_end`, calling `observer` at `t0 + k * dt` for every
    /// integer `k` with `t0 + k * dt` in `(t_current, t_end]`.
    pub fn advance_sampled(
        &mut self,
        t_end: f64,
        grid: &mut SampleGrid,
        observer: &mut dyn FnMut(f64, &[f64; N]),
    ) -> Result<()> {
        self.run(t_end, Some(grid), observer)
    }

    /// Install a projection applied to every accepted step (e.g. to re-impose
    /// a symmetry). The derivative at the new point is recomputed.
    pub fn with_post_step(mut self, hook: fn(&mut [f64; N])) -> Self {
        self.post_step = Some(hook);
        self
    }

    fn run(
        &mut self,
        t_end: f64,
        mut grid: Option<&mut SampleGrid>,
        observer: &mut dyn FnMut(f64, &[f64; N]),
    ) -> Result<()> {
        let mut k2 = [0.0; N];
        let mut k3 = [0.0; N];
        let mut k4 = [0.0; N];
        let mut k5 = [0.0; N];
        let mut k6 = [0.0; N];
        let mut k7 = [0.0; N];
        let mut tmp = [0.0; N];
        let mut y_new = [0.0; N];

        while self.t < t_end {
            if self.steps >= self.cfg.max_steps {
                return Err(Error::NotConverged(format!(
                    "step budget of {} exhausted at t = {}",
                    self.cfg.max_steps, self.t
                )));
            }
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let t = self.t;
            let y = &self.y;
            let k1 = &self.k1;

            for i in 0..N {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            (self.f)(t + C2 * h, &tmp, &mut k2);
            for i in 0..N {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            (self.f)(t + C3 * h, &tmp, &mut k3);
            for i in 0..N {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            (self.f)(t + C4 * h, &tmp, &mut k4);
            for i in 0..N {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            (self.f)(t + C5 * h, &tmp, &mut k5);
            for i in 0..N {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            (self.f)(t + h, &tmp, &mut k6);
            for i in 0..N {
                y_new[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            (self.f)(t + h, &y_new, &mut k7);
            self.evals += 6;

            let mut err = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / N as f64).sqrt();

            if !err.is_finite() {
                return Err(Error::Unbounded { t });
            }

            if err <= 1.0 {
                // continuous extension coefficients
                let mut rc = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rc[0][i] = y[i];
                    rc[1][i] = ydiff;
                    rc[2][i] = bspl;
                    rc[3][i] = ydiff - h * k7[i] - bspl;
                    rc[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let t_next = if last { t_end } else { t + h };
                if let Some(g) = grid.as_deref_mut() {
                    let mut out = [0.0; N];
                    while let Some(ts) = g.peek() {
                        if ts > t_next {
                            break;
                        }
                        if ts > t {
                            let theta = (ts - t) / h;
                            let th1 = 1.0 - theta;
                            for i in 0..N {
                                out[i] = rc[0][i]
                                    + theta
                                        * (rc[1][i]
                                            + th1
                                                * (rc[2][i]
                                                    + theta * (rc[3][i] + th1 * rc[4][i])));
                            }
                            observer(ts, &out);
                        }
                        g.advance();
                    }
                }

                self.t = t_next;
                self.y = y_new;
                self.k1 = k7;
                self.steps += 1;
                if let Some(hook) = self.post_step {
                    hook(&mut self.y);
                    (self.f)(self.t, &self.y, &mut self.k1);
                    self.evals += 1;
                }
                if self
                    .y
                    .iter()
                    .any(|v| !v.is_finite() || v.abs() > self.cfg.overflow_guard)
                {
                    return Err(Error::Unbounded { t: self.t });
                }
                let fac = (SAFETY * err.max(1e-10).powf(-0.2)).clamp(FAC_MIN, FAC_MAX);
                if !last {
                    self.h = (h * fac).min(self.cfg.max_step);
                }
            } else {
                let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
                self.h = h * fac;
                let h_min = 1e-13 * self.t.abs().max(1.0);
                if self.h < h_min {
                    return Err(Error::StepSizeUnderflow { t: self.t });
                }
            }
        }
        Ok(())
    }
}

/// Uniform sampling grid `t0 + k * dt`, `k = 0, 1, ...`.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    t0: f64,
    dt: f64,
    k: u64,
}

impl SampleGrid {
    pub fn new(t0: f64, dt: f64) -> Self {
        assert!(dt > 0.0);
        SampleGrid { t0, dt, k: 0 }
    }

    /// Grid starting one step after `t0`.
    pub fn after(t0: f64, dt: f64) -> Self {
        SampleGrid { t0, dt, k: 1 }
    }

    fn peek(&self) -> Option<f64> {
        Some(self.t0 + self.k as f64 * self.dt)
    }

    fn advance(&mut self) {
        self.k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_accuracy() {
        let cfg = StepperConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let mut s = Dopri5::new(|_t, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = -y[0], 0.0, [1.0], cfg);
        s.advance_to(5.0).unwrap();
        assert_eq!(s.t(), 5.0);
        assert!((s.state()[0] - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_on_harmonic_oscillator() {
        let w = 3.0;
        let cfg = StepperConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.5,
            ..Default::default()
        };
        let mut s = Dopri5::new(
            move |_t, y: &[f64; 2], dy: &mut [f64; 2]| {
                dy[0] = w * y[1];
                dy[1] = -w * y[0];
            },
            0.0,
            [1.0, 0.0],
            cfg,
        );
        let mut grid = SampleGrid::after(0.0, 0.01);
        let mut worst: f64 = 0.0;
        let mut count = 0;
        s.advance_sampled(10.0, &mut grid, &mut |t, y| {
            worst = worst.max((y[0] - (w * t).cos()).abs());
            worst = worst.max((y[1] + (w * t).sin()).abs());
            count += 1;
        })
        .unwrap();
        assert_eq!(count, 1000);
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn chunked_integration_matches_single_run() {
        let f = |_t: f64, y: &[f64; 2], dy: &mut [f64; 2]| {
            dy[0] = y[1];
            dy[1] = -y[0] - 0.1 * y[1] + 0.3 * y[0] * y[0];
        };
        let cfg = StepperConfig::default();
        let mut a = Dopri5::new(f, 0.0, [0.5, 0.0], cfg);
        a.advance_to(20.0).unwrap();
        let mut b = Dopri5::new(f, 0.0, [0.5, 0.0], cfg);
        for k in 1..=20 {
            b.advance_to(k as f64).unwrap();
        }
        assert!((a.state()[0] - b.state()[0]).abs() < 1e-7);
    }

    #[test]
    fn blow_up_reported() {
        let cfg = StepperConfig {
            overflow_guard: 1e6,
            ..Default::default()
        };
        let mut s = Dopri5::new(|_t, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0] * y[0], 0.0, [1.0], cfg);
        let err = s.advance_to(2.0).unwrap_err();
        assert!(matches!(err, Error::Unbounded { .. } | Error::StepSizeUnderflow { .. }));
    }
}
