//! Model parameters, mean-field equations of motion and the linear
//! fluctuation matrices of the two-cavity phonon laser.
//!
//! Every rate is measured in units of the cavity decay rate, so `KAPPA` is
//! one and time is measured in `1/KAPPA`. Complex cavity amplitudes are
//! stored as (real, imaginary) pairs so a single real 6-vector carries the
//! whole classical state.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Matrix6;

use crate::error::{Error, Result};

/// Cavity decay rate. All other rates are expressed relative to it.
pub const KAPPA: f64 = 1.0;

/// Mechanical quality factor below which the Markovian Brownian-noise model
/// is questionable.
pub const MIN_QUALITY_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Tunnelling rate between the two cavities.
    pub j: f64,
    pub omega_m: f64,
    /// Single-photon optomechanical coupling.
    pub g: f64,
    pub gamma_m: f64,
    /// Laser detuning from the bare cavity resonance.
    pub delta: f64,
    /// Drive amplitude on cavity 1.
    pub lambda: f64,
    /// Mean thermal phonon occupation.
    pub nbar: f64,
}

impl ModelParams {
    /// Parameter set of the reference phase diagram: J = 10, omega_m = 20,
    /// g = 0.02, gamma_m = 0.01, zero temperature.
    pub fn reference(delta: f64, lambda: f64) -> Self {
        ModelParams {
            j: 10.0,
            omega_m: 20.0,
            g: 0.02,
            gamma_m: 0.01,
            delta,
            lambda,
            nbar: 0.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_nbar(mut self, nbar: f64) -> Self {
        self.nbar = nbar;
        self
    }

    pub fn quality_factor(&self) -> f64 {
        self.omega_m / self.gamma_m
    }

    pub fn mechanical_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_m
    }

    /// Checks finiteness and signs. Zero coupling, zero drive and zero
    /// tunnelling are accepted so the decoupled and undriven limits stay
    /// reachable; the mechanical frequency and damping must be positive.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("J", self.j),
            ("omega_m", self.omega_m),
            ("g", self.g),
            ("gamma_m", self.gamma_m),
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("nbar", self.nbar),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite ({v})")));
            }
        }
        if self.omega_m <= 0.0 || self.gamma_m <= 0.0 {
            return Err(Error::InvalidParams(
                "omega_m and gamma_m must be strictly positive".into(),
            ));
        }
        for (name, v) in [("J", self.j), ("g", self.g), ("lambda", self.lambda)] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0 (got {v})")));
            }
        }
        if self.nbar < 0.0 {
            return Err(Error::InvalidParams(format!(
                "nbar must be >= 0 (got {})",
                self.nbar
            )));
        }
        if self.quality_factor() < MIN_QUALITY_FACTOR {
            log::warn!(
                "mechanical quality factor {:.1} < {MIN_QUALITY_FACTOR}: Markovian thermal noise is a poor approximation",
                self.quality_factor()
            );
        }
        Ok(())
    }
}

/// Supermode mean fields `c1 = x1 + i y1`, `c2 = x2 + i y2` and the
/// mechanical position and momentum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassicalState {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub q: f64,
    pub p: f64,
}

impl ClassicalState {
    pub const ZERO: ClassicalState = ClassicalState {
        x1: 0.0,
        y1: 0.0,
        x2: 0.0,
        y2: 0.0,
        q: 0.0,
        p: 0.0,
    };

    pub fn from_array(a: [f64; 6]) -> Self {
        ClassicalState {
            x1: a[0],
            y1: a[1],
            x2: a[2],
            y2: a[3],
            q: a[4],
            p: a[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x1, self.y1, self.x2, self.y2, self.q, self.p]
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Intracavity amplitude of cavity 2, `(c1 - c2)/sqrt(2)`.
    pub fn alpha2(&self) -> (f64, f64) {
        (
            (self.x1 - self.x2) * FRAC_1_SQRT_2,
            (self.y1 - self.y2) * FRAC_1_SQRT_2,
        )
    }
}

/// Bare cavity amplitudes `a1`, `a2` (as real pairs) and the mechanics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BareModeState {
    pub a1_re: f64,
    pub a1_im: f64,
    pub a2_re: f64,
    pub a2_im: f64,
    pub q: f64,
    pub p: f64,
}

impl BareModeState {
    pub fn from_array(a: [f64; 6]) -> Self {
        BareModeState {
            a1_re: a[0],
            a1_im: a[1],
            a2_re: a[2],
            a2_im: a[3],
            q: a[4],
            p: a[5],
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.a1_re, self.a1_im, self.a2_re, self.a2_im, self.q, self.p]
    }
}

/// `c1 = (a1 + a2)/sqrt(2)`, `c2 = (a1 - a2)/sqrt(2)`.
pub fn to_supermodes(s: &BareModeState) -> ClassicalState {
    ClassicalState {
        x1: (s.a1_re + s.a2_re) * FRAC_1_SQRT_2,
        y1: (s.a1_im + s.a2_im) * FRAC_1_SQRT_2,
        x2: (s.a1_re - s.a2_re) * FRAC_1_SQRT_2,
        y2: (s.a1_im - s.a2_im) * FRAC_1_SQRT_2,
        q: s.q,
        p: s.p,
    }
}

/// Inverse of [`to_supermodes`]; the mixing matrix is its own inverse.
pub fn to_bare_modes(s: &ClassicalState) -> BareModeState {
    BareModeState {
        a1_re: (s.x1 + s.x2) * FRAC_1_SQRT_2,
        a1_im: (s.y1 + s.y2) * FRAC_1_SQRT_2,
        a2_re: (s.x1 - s.x2) * FRAC_1_SQRT_2,
        a2_im: (s.y1 - s.y2) * FRAC_1_SQRT_2,
        q: s.q,
        p: s.p,
    }
}

/// Time derivative of the supermode mean fields.
pub fn classical_rhs_supermode(params: &ModelParams, s: &ClassicalState) -> ClassicalState {
    let half_k = 0.5 * KAPPA;
    let det1 = params.delta - params.j;
    let det2 = params.delta + params.j;
    let hg = 0.5 * params.g;
    let drive = params.lambda * FRAC_1_SQRT_2;
    let dx = s.x1 - s.x2;
    let dy = s.y1 - s.y2;
    ClassicalState {
        x1: -half_k * s.x1 - det1 * s.y1 - hg * s.q * dy + drive,
        y1: det1 * s.x1 - half_k * s.y1 + hg * s.q * dx,
        x2: -half_k * s.x2 - det2 * s.y2 + hg * s.q * dy + drive,
        y2: det2 * s.x2 - half_k * s.y2 - hg * s.q * dx,
        q: params.omega_m * s.p,
        p: -params.omega_m * s.q - params.gamma_m * s.p + hg * (dx * dx + dy * dy),
    }
}

/// Time derivative of the bare-mode mean fields, radiation pressure taken
/// at its mean-field value `g |a2|^2`.
pub fn classical_rhs_baremode(params: &ModelParams, s: &BareModeState) -> BareModeState {
    let half_k = 0.5 * KAPPA;
    let d = params.delta;
    let j = params.j;
    let g = params.g;
    // a1' = (i D - k/2) a1 - i J a2 + L
    // a2' = (i D - k/2) a2 - i J a1 + i g q a2
    BareModeState {
        a1_re: -half_k * s.a1_re - d * s.a1_im + j * s.a2_im + params.lambda,
        a1_im: d * s.a1_re - half_k * s.a1_im - j * s.a2_re,
        a2_re: -half_k * s.a2_re - d * s.a2_im + j * s.a1_im - g * s.q * s.a2_im,
        a2_im: d * s.a2_re - half_k * s.a2_im - j * s.a1_re + g * s.q * s.a2_re,
        q: params.omega_m * s.p,
        p: -params.omega_m * s.q - params.gamma_m * s.p
            + g * (s.a2_re * s.a2_re + s.a2_im * s.a2_im),
    }
}

/// Which coordinates the linearized fluctuation dynamics are written in.
///
/// `Quadrature` uses `dX = (dc + dc^+)/sqrt(2)`, `dY = (dc - dc^+)/(sqrt(2) i)`
/// so the vacuum has variance 1/2 in every quadrature; the cross entries
/// between optical quadratures and the mechanics both carry `g/sqrt(2)`.
///
/// `MeanField` is the Jacobian of the classical equations in the
/// `(Re c, Im c, q, p)` coordinates: `g/2` in the mechanical column and `g`
/// in the momentum row. It has the same spectrum (the two are related by a
/// diagonal similarity transform) but does not describe quadrature
/// fluctuations with vacuum variance 1/2, so covariances built from it can
/// violate the uncertainty bound slightly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftConvention {
    #[default]
    Quadrature,
    MeanField,
}

impl std::str::FromStr for DriftConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(DriftConvention::Quadrature),
            "mean-field" | "meanfield" | "jacobian" => Ok(DriftConvention::MeanField),
            other => Err(Error::Config(format!(
                "unknown drift convention '{other}' (expected quadrature | mean-field)"
            ))),
        }
    }
}

impl std::fmt::Display for DriftConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriftConvention::Quadrature => f.write_str("quadrature"),
            DriftConvention::MeanField => f.write_str("mean-field"),
        }
    }
}

/// Drift matrix of the fluctuations `(dX1, dY1, dX2, dY2, dq, dp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix(pub Matrix6<f64>);

/// Diagonal noise matrix of the fluctuation dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix(pub Matrix6<f64>);

pub fn build_drift_matrix(
    params: &ModelParams,
    s: &ClassicalState,
    convention: DriftConvention,
) -> DriftMatrix {
    let hk = 0.5 * KAPPA;
    let hg = 0.5 * params.g;
    let det1 = params.delta - params.j;
    let det2 = params.delta + params.j;
    let dx = s.x1 - s.x2;
    let dy = s.y1 - s.y2;
    let gq = hg * s.q;
    let (col, row) = match convention {
        DriftConvention::MeanField => (hg, params.g),
        DriftConvention::Quadrature => (params.g * FRAC_1_SQRT_2, params.g * FRAC_1_SQRT_2),
    };
    let om = params.omega_m;
    #[rustfmt::skip]
    let m = Matrix6::new(
        -hk,           -det1 - gq,   0.0,          gq,           -col * dy, 0.0,
        det1 + gq,     -hk,          -gq,          0.0,          col * dx,  0.0,
        0.0,           gq,           -hk,          -det2 - gq,   col * dy,  0.0,
        -gq,           0.0,          det2 + gq,    -hk,          -col * dx, 0.0,
        0.0,           0.0,          0.0,          0.0,          0.0,       om,
        row * dx,      row * dy,     -row * dx,    -row * dy,    -om,       -params.gamma_m,
    );
    DriftMatrix(m)
}

/// The exact Jacobian of [`classical_rhs_supermode`].
pub fn classical_jacobian(params: &ModelParams, s: &ClassicalState) -> Matrix6<f64> {
    build_drift_matrix(params, s, DriftConvention::MeanField).0
}

pub fn build_diffusion_matrix(params: &ModelParams) -> Result<DiffusionMatrix> {
    if !(params.nbar >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "nbar must be >= 0 (got {})",
            params.nbar
        )));
    }
    let hk = 0.5 * KAPPA;
    let thermal = params.gamma_m * (2.0 * params.nbar + 1.0);
    Ok(DiffusionMatrix(Matrix6::from_diagonal(
        &nalgebra::Vector6::new(hk, hk, hk, hk, 0.0, thermal),
    )))
}

/// Bose-Einstein occupation for `hbar omega_m / (k_B T)`.
pub fn nbar_from_ratio(hbar_omega_over_kt: f64) -> Result<f64> {
    if !(hbar_omega_over_kt > 0.0) || !hbar_omega_over_kt.is_finite() {
        return Err(Error::InvalidParams(format!(
            "hbar*omega/kT must be finite and > 0 (got {hbar_omega_over_kt})"
        )));
    }
    Ok(1.0 / hbar_omega_over_kt.exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scale factor between `MeanField` and `Quadrature` optical coordinates.
    use std::f64::consts::SQRT_2;
    const QUADRATURE_SCALE: f64 = SQRT_2;
    use approx::assert_relative_eq;

    fn sample_state() -> ClassicalState {
        ClassicalState::from_array([0.3, -1.2, 0.7, 0.25, 0.04, -0.5])
    }

    #[test]
    fn undriven_origin_is_fixed() {
        let p = ModelParams::reference(10.0, 0.0);
        let d = classical_rhs_supermode(&p, &ClassicalState::ZERO);
        assert_eq!(d, ClassicalState::ZERO);
        let b = classical_rhs_baremode(&p, &BareModeState::default());
        assert_eq!(b.to_array(), [0.0; 6]);
    }

    #[test]
    fn zero_coupling_decouples_mechanics() {
        let p = ModelParams {
            g: 0.0,
            ..ModelParams::reference(10.0, 3.0)
        };
        let s = sample_state();
        let d = classical_rhs_supermode(&p, &s);
        assert_eq!(d.q, p.omega_m * s.p);
        assert_eq!(d.p, -p.omega_m * s.q - p.gamma_m * s.p);
    }

    #[test]
    fn supermode_transform_examples() {
        let z = (0.8, -0.3);
        let same = BareModeState {
            a1_re: z.0,
            a1_im: z.1,
            a2_re: z.0,
            a2_im: z.1,
            q: 0.1,
            p: 0.2,
        };
        let c = to_supermodes(&same);
        assert_relative_eq!(c.x1, SQRT_2 * z.0, epsilon = 1e-15);
        assert_relative_eq!(c.y1, SQRT_2 * z.1, epsilon = 1e-15);
        assert_eq!((c.x2, c.y2), (0.0, 0.0));
        assert_eq!((c.q, c.p), (0.1, 0.2));

        let opposite = BareModeState {
            a2_re: -z.0,
            a2_im: -z.1,
            ..same
        };
        let c = to_supermodes(&opposite);
        assert_eq!((c.x1, c.y1), (0.0, 0.0));
        assert_relative_eq!(c.x2, SQRT_2 * z.0, epsilon = 1e-15);
        assert_relative_eq!(c.y2, SQRT_2 * z.1, epsilon = 1e-15);
    }

    #[test]
    fn drift_matrix_at_origin_and_zero_coupling() {
        let p = ModelParams::reference(10.5, 3.0);
        for conv in [DriftConvention::Quadrature, DriftConvention::MeanField] {
            let s = build_drift_matrix(&p, &ClassicalState::ZERO, conv).0;
            assert_eq!(s[(0, 1)], -(p.delta - p.j));
            assert_eq!(s[(2, 3)], -(p.delta + p.j));
            for i in 0..4 {
                assert_eq!(s[(i, 4)], 0.0);
                assert_eq!(s[(5, i)], 0.0);
            }
            assert_eq!(s[(4, 5)], p.omega_m);
            assert_eq!(s[(5, 4)], -p.omega_m);
            assert_eq!(s[(5, 5)], -p.gamma_m);
        }
        let decoupled = ModelParams { g: 0.0, ..p };
        let s = build_drift_matrix(&decoupled, &sample_state(), DriftConvention::Quadrature).0;
        for i in 0..4 {
            for j in 4..6 {
                assert_eq!(s[(i, j)], 0.0);
                assert_eq!(s[(j, i)], 0.0);
            }
        }
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)] {
            assert_eq!(s[(i, j)], 0.0);
        }
    }

    #[test]
    fn mechanical_rows_fixed() {
        let p = ModelParams::reference(9.3, 7.0);
        let s = build_drift_matrix(&p, &sample_state(), DriftConvention::Quadrature).0;
        for j in 0..4 {
            assert_eq!(s[(4, j)], 0.0);
        }
        assert_eq!(s[(4, 4)], 0.0);
        assert_eq!(s[(4, 5)], p.omega_m);
        assert_eq!(s[(5, 4)], -p.omega_m);
        assert_eq!(s[(5, 5)], -p.gamma_m);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = ModelParams::reference(10.0, 5.0);
        let s0 = sample_state().to_array();
        let jac = classical_jacobian(&p, &ClassicalState::from_array(s0));
        let h = 1e-6;
        for j in 0..6 {
            let mut plus = s0;
            let mut minus = s0;
            plus[j] += h;
            minus[j] -= h;
            let fp = classical_rhs_supermode(&p, &ClassicalState::from_array(plus)).to_array();
            let fm = classical_rhs_supermode(&p, &ClassicalState::from_array(minus)).to_array();
            for i in 0..6 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - jac[(i, j)]).abs() < 1e-8, "entry ({i},{j}): {fd} vs {}", jac[(i, j)]);
            }
        }
    }

    #[test]
    fn conventions_are_similar_matrices() {
        let p = ModelParams::reference(10.0, 5.0);
        let s = sample_state();
        let mf = build_drift_matrix(&p, &s, DriftConvention::MeanField).0;
        let qd = build_drift_matrix(&p, &s, DriftConvention::Quadrature).0;
        let t = Matrix6::from_diagonal(&nalgebra::Vector6::new(
            QUADRATURE_SCALE,
            QUADRATURE_SCALE,
            QUADRATURE_SCALE,
            QUADRATURE_SCALE,
            1.0,
            1.0,
        ));
        let t_inv = t.try_inverse().unwrap();
        let mapped = t * mf * t_inv;
        assert!((mapped - qd).amax() < 1e-14);
    }

    #[test]
    fn diffusion_entries() {
        let p = ModelParams::reference(10.0, 3.0);
        let d = build_diffusion_matrix(&p).unwrap().0;
        assert_eq!(d[(5, 5)], p.gamma_m);
        assert_eq!(d[(4, 4)], 0.0);
        let hot = build_diffusion_matrix(&p.with_nbar(50.0)).unwrap().0;
        assert_relative_eq!(hot[(5, 5)], 1.01, epsilon = 1e-15);
        assert_eq!(hot[(4, 4)], 0.0);
        assert!(build_diffusion_matrix(&p.with_nbar(-0.1)).is_err());
    }

    #[test]
    fn bose_einstein_occupation() {
        assert!(nbar_from_ratio(50.0).unwrap() < 1e-21);
        assert_relative_eq!(nbar_from_ratio(std::f64::consts::LN_2).unwrap(), 1.0, epsilon = 1e-14);
        // high-temperature series 1/x - 1/2 + x/12
        let x = 0.01;
        let series = 1.0 / x - 0.5 + x / 12.0;
        assert_relative_eq!(nbar_from_ratio(x).unwrap(), series, max_relative = 1e-9);
        assert!((nbar_from_ratio(x).unwrap() - 99.5).abs() < 1e-3);
        assert!(nbar_from_ratio(0.0).is_err());
        assert!(nbar_from_ratio(-1.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(ModelParams::reference(10.0, 3.0).validate().is_ok());
        assert!(ModelParams::reference(-4.0, 3.0).validate().is_ok());
        assert!(ModelParams::reference(10.0, f64::NAN).validate().is_err());
        assert!(ModelParams::reference(10.0, 3.0).with_nbar(-1.0).validate().is_err());
        let bad = ModelParams {
            gamma_m: 0.0,
            ..ModelParams::reference(10.0, 3.0)
        };
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state() -> impl Strategy<Value = [f64; 6]> {
            proptest::array::uniform6(-5.0f64..5.0)
        }

        proptest! {
            #[test]
            fn transform_round_trip(a in state()) {
                let b = BareModeState::from_array(a);
                let back = to_bare_modes(&to_supermodes(&b)).to_array();
                for i in 0..6 {
                    prop_assert!((back[i] - a[i]).abs() < 1e-14);
                }
            }

            #[test]
            fn rhs_commutes_with_basis_change(a in state(), delta in 8.0f64..12.0, lambda in 0.0f64..12.0) {
                let p = ModelParams::reference(delta, lambda);
                let b = BareModeState::from_array(a);
                let lhs = to_supermodes(&classical_rhs_baremode(&p, &b)).to_array();
                let rhs = classical_rhs_supermode(&p, &to_supermodes(&b)).to_array();
                for i in 0..6 {
                    prop_assert!((lhs[i] - rhs[i]).abs() < 1e-12 * (1.0 + rhs[i].abs()));
                }
            }

            #[test]
            fn drift_depends_only_on_differences(a in state(), shift_x in -3.0f64..3.0, shift_y in -3.0f64..3.0) {
                let p = ModelParams::reference(10.0, 5.0);
                let s = ClassicalState::from_array(a);
                let shifted = ClassicalState {
                    x1: s.x1 + shift_x,
                    x2: s.x2 + shift_x,
                    y1: s.y1 + shift_y,
                    y2: s.y2 + shift_y,
                    p: s.p + 1.0,
                    ..s
                };
                for conv in [DriftConvention::Quadrature, DriftConvention::MeanField] {
                    let d0 = build_drift_matrix(&p, &s, conv).0;
                    let d1 = build_drift_matrix(&p, &shifted, conv).0;
                    prop_assert!((d0 - d1).amax() < 1e-12);
                }
            }
        }
    }
}
