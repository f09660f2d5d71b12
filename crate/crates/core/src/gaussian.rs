//! Gaussian covariance matrices of the fluctuations: symplectic spectrum,
//! logarithmic negativity and the stationary Lyapunov equation.

use nalgebra::{Matrix2, Matrix4, Matrix6, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{DiffusionMatrix, DriftMatrix};

/// Number of independent entries of a symmetric 6x6 matrix.
pub const PACKED_LEN: usize = 21;

/// Row-major upper-triangle index of `(i, j)`, either order.
pub const fn packed_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * 6 - i * (i + 1) / 2 + j
}

/// `(i, j)` with `i <= j` for every packed slot.
const PACKED_PAIRS: [(usize, usize); PACKED_LEN] = {
    let mut out = [(0, 0); PACKED_LEN];
    let mut k = 0;
    let mut i = 0;
    while i < 6 {
        let mut j = i;
        while j < 6 {
            out[k] = (i, j);
            k += 1;
            j += 1;
        }
        i += 1;
    }
    out
};

/// Symmetric 6x6 covariance `V_ij = <u_i u_j + u_j u_i>/2`, ordered
/// `(X1, Y1, X2, Y2, q, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix(pub Matrix6<f64>);

impl CovarianceMatrix {
    /// Optical vacuum with a thermal mechanical mode.
    pub fn vacuum(nbar: f64) -> Self {
        let m = nbar + 0.5;
        CovarianceMatrix(Matrix6::from_diagonal(&nalgebra::Vector6::new(
            0.5, 0.5, 0.5, 0.5, m, m,
        )))
    }

    /// `vacuum(nbar) + scale * A A^T` with `A` uniform in `[-1, 1]`; always
    /// symmetric and at least as noisy as the vacuum.
    pub fn random(seed: u64, nbar: f64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix6::from_fn(|_, _| rng.random_range(-1.0..=1.0));
        let v = CovarianceMatrix(Self::vacuum(nbar).0 + scale * a * a.transpose());
        // a * a^T is symmetric only up to rounding
        Self::from_packed(&v.to_packed())
    }

    pub fn from_packed(p: &[f64]) -> Self {
        debug_assert_eq!(p.len(), PACKED_LEN);
        CovarianceMatrix(Matrix6::from_fn(|i, j| p[packed_index(i, j)]))
    }

    /// Upper triangle, row-major. The lower triangle is ignored.
    pub fn to_packed(&self) -> [f64; PACKED_LEN] {
        PACKED_PAIRS.map(|(i, j)| self.0[(i, j)])
    }

    /// `max |V - V^T|`.
    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).amax()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// Optical supermode 2 together with the mechanical mode.
    pub fn two_mode(&self) -> TwoModeCovariance {
        TwoModeCovariance(self.0.fixed_view::<4, 4>(2, 2).into_owned())
    }

    /// The three symplectic eigenvalues, ascending.
    pub fn symplectic_eigenvalues(&self) -> Result<[f64; 3]> {
        let omega = Matrix6::from_fn(|i, j| match (i % 2, j) {
            (0, j) if j == i + 1 => 1.0,
            (1, j) if j + 1 == i => -1.0,
            _ => 0.0,
        });
        let schur = (omega * self.0)
            .try_schur(1e-15, 10_000)
            .ok_or(Error::EigenFailure)?;
        let mut moduli: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        if moduli.iter().any(|m| !m.is_finite()) {
            return Err(Error::EigenFailure);
        }
        moduli.sort_by(f64::total_cmp);
        // eigenvalues of Omega V come in pairs +-i nu
        Ok([moduli[0], moduli[2], moduli[4]])
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        Ok(self.symplectic_eigenvalues()?[0])
    }

    /// `max |S V + V S^T + D|`.
    pub fn lyapunov_residual(&self, s: &DriftMatrix, d: &DiffusionMatrix) -> f64 {
        (s.0 * self.0 + self.0 * s.0.transpose() + d.0).amax()
    }
}

/// Two-mode block `W = [[M, C], [C^T, N]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCovariance(pub Matrix4<f64>);

impl TwoModeCovariance {
    /// From 16 entries in row-major order.
    pub fn from_row_slice(w: &[f64]) -> Self {
        TwoModeCovariance(Matrix4::from_row_slice(w))
    }

    pub fn from_blocks(m: Matrix2<f64>, n: Matrix2<f64>, c: Matrix2<f64>) -> Self {
        let mut w = Matrix4::zeros();
        w.fixed_view_mut::<2, 2>(0, 0).copy_from(&m);
        w.fixed_view_mut::<2, 2>(2, 2).copy_from(&n);
        w.fixed_view_mut::<2, 2>(0, 2).copy_from(&c);
        w.fixed_view_mut::<2, 2>(2, 0).copy_from(&c.transpose());
        TwoModeCovariance(w)
    }

    pub fn m(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn n(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn c(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// `det M + det N - 2 det C`.
    pub fn sigma(&self) -> f64 {
        self.m().determinant() + self.n().determinant() - 2.0 * self.c().determinant()
    }

    /// Smallest symplectic eigenvalue of the partial transpose.
    pub fn eta_minus(&self) -> Result<f64> {
        let sigma = self.sigma();
        let det = self.0.determinant();
        let disc = sigma * sigma - 4.0 * det;
        let tol = 1e-9 * sigma.abs().max(1.0).powi(2);
        if !(disc >= -tol) || !(det >= -tol) {
            return Err(Error::NonPhysical(format!(
                "sigma^2 - 4 det W = {disc:e}, det W = {det:e}"
            )));
        }
        let root = disc.max(0.0).sqrt();
        let det = det.max(0.0);
        // sigma - root loses all precision when det W << sigma^2
        let eta_sq = if sigma > 0.0 {
            2.0 * det / (sigma + root)
        } else {
            0.5 * (sigma - root)
        };
        Ok(eta_sq.max(0.0).sqrt())
    }
}

/// `E_N = max(0, -ln 2 eta_minus)`.
pub fn log_negativity(w: &TwoModeCovariance) -> Result<f64> {
    let eta = w.eta_minus()?;
    if eta == 0.0 {
        return Err(Error::NonPhysical("partial transpose has eta_minus = 0".into()));
    }
    Ok((-(2.0 * eta).ln()).max(0.0))
}

/// `(sqrt(V_qq) / 2, sqrt(V_pp) / 2)`.
pub fn fluctuation_radius(v: &CovarianceMatrix) -> Result<(f64, f64)> {
    let (vq, vp) = (v.0[(4, 4)], v.0[(5, 5)]);
    if !(vq >= 0.0 && vp >= 0.0) {
        return Err(Error::NonPhysical(format!(
            "negative mechanical variance (V_qq = {vq:e}, V_pp = {vp:e})"
        )));
    }
    Ok((0.5 * vq.sqrt(), 0.5 * vp.sqrt()))
}

/// `d/dt V = S V + V S^T + D` on the packed upper triangle.
pub fn lyapunov_flow(s: &Matrix6<f64>, d: &Matrix6<f64>, v: &[f64], dv: &mut [f64]) {
    let vm = Matrix6::from_fn(|i, j| v[packed_index(i, j)]);
    let sv = s * vm;
    for (k, &(i, j)) in PACKED_PAIRS.iter().enumerate() {
        dv[k] = sv[(i, j)] + sv[(j, i)] + d[(i, j)];
    }
}

/// Unique stationary covariance for a Hurwitz drift matrix.
pub fn steady_lyapunov_solve(s: &DriftMatrix, d: &DiffusionMatrix) -> Result<CovarianceMatrix> {
    let schur = s.0.try_schur(1e-14, 10_000).ok_or(Error::EigenFailure)?;
    let max_re = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_re < 0.0) {
        return Err(Error::NotHurwitz { max_re });
    }
    // row (i, j): sum_k S_ik V_kj + S_jk V_ik = -D_ij
    let mut a = SMatrix::<f64, PACKED_LEN, PACKED_LEN>::zeros();
    let mut b = SVector::<f64, PACKED_LEN>::zeros();
    for (row, &(i, j)) in PACKED_PAIRS.iter().enumerate() {
        for k in 0..6 {
            a[(row, packed_index(k, j))] += s.0[(i, k)];
            a[(row, packed_index(i, k))] += s.0[(j, k)];
        }
        b[row] = -d.0[(i, j)];
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or(Error::NotHurwitz { max_re })?;
    Ok(CovarianceMatrix::from_packed(x.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_points::stable_fixed_point;
    use crate::model::{build_diffusion_matrix, build_drift_matrix, DriftConvention, ModelParams};
    use proptest::prelude::*;

    fn squeezed(r: f64) -> TwoModeCovariance {
        let ch = 0.5 * (2.0 * r).cosh();
        let sh = 0.5 * (2.0 * r).sinh();
        TwoModeCovariance::from_blocks(
            Matrix2::identity() * ch,
            Matrix2::identity() * ch,
            Matrix2::new(sh, 0.0, 0.0, -sh),
        )
    }

    #[test]
    fn packing_round_trip() {
        let v = CovarianceMatrix::random(5, 2.0, 0.3);
        assert_eq!(CovarianceMatrix::from_packed(&v.to_packed()), v);
        assert_eq!(packed_index(0, 0), 0);
        assert_eq!(packed_index(0, 5), 5);
        assert_eq!(packed_index(1, 1), 6);
        assert_eq!(packed_index(5, 5), 20);
        assert_eq!(packed_index(4, 2), packed_index(2, 4));
    }

    #[test]
    fn vacuum_is_separable() {
        let w = CovarianceMatrix::vacuum(0.0).two_mode();
        assert!((w.eta_minus().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(log_negativity(&w).unwrap(), 0.0);
        let (rq, rp) = fluctuation_radius(&CovarianceMatrix::vacuum(0.0)).unwrap();
        assert!((rq - 0.5 * 0.5f64.sqrt()).abs() < 1e-15 && rq == rp);
    }

    #[test]
    fn squeezed_state_benchmark() {
        for r in [0.1, 0.5, 1.0] {
            let w = squeezed(r);
            assert!((w.eta_minus().unwrap() - 0.5 * (-2.0 * r).exp()).abs() < 1e-12);
            assert!((log_negativity(&w).unwrap() - 2.0 * r).abs() < 1e-9);
        }
    }

    #[test]
    fn thermal_radius() {
        let (rq, _) = fluctuation_radius(&CovarianceMatrix::vacuum(50.0)).unwrap();
        assert!((rq - 0.5 * 50.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unphysical_block_is_rejected() {
        let w = TwoModeCovariance(Matrix4::from_diagonal(&nalgebra::Vector4::new(
            1.0, -1.0, 1.0, 1.0,
        )));
        assert!(matches!(log_negativity(&w), Err(Error::NonPhysical(_))));
        let mut v = CovarianceMatrix::vacuum(0.0);
        v.0[(4, 4)] = -1.0;
        assert!(fluctuation_radius(&v).is_err());
    }

    #[test]
    fn symplectic_spectrum_of_thermal_state() {
        let ev = CovarianceMatrix::vacuum(3.0).symplectic_eigenvalues().unwrap();
        assert!((ev[0] - 0.5).abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12);
        assert!((ev[2] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn toy_lyapunov() {
        let s = DriftMatrix(Matrix6::identity() * -0.5);
        let d = DiffusionMatrix(Matrix6::identity() * 0.5);
        let v = steady_lyapunov_solve(&s, &d).unwrap();
        assert!((v.0 - Matrix6::identity() * 0.5).amax() < 1e-14);
        let bad = DriftMatrix(Matrix6::identity() * 0.1);
        assert!(matches!(
            steady_lyapunov_solve(&bad, &d),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn thermal_mechanics_from_lyapunov() {
        let p = ModelParams::reference(10.0, 0.0).with_nbar(50.0);
        let s = build_drift_matrix(&p, &crate::model::ClassicalState::ZERO, DriftConvention::Quadrature);
        let d = build_diffusion_matrix(&p).unwrap();
        let v = steady_lyapunov_solve(&s, &d).unwrap();
        let rel = p.gamma_m / p.omega_m;
        assert!((v.0[(4, 4)] - 50.5).abs() < 50.5 * rel);
        assert!((v.0[(5, 5)] - 50.5).abs() < 50.5 * rel);
        assert!((v.0[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_covariance_is_physical() {
        let p = ModelParams::reference(10.0, 3.0);
        let fp = stable_fixed_point(&p).unwrap().unwrap();
        let s = build_drift_matrix(&p, &fp.state, DriftConvention::Quadrature);
        let d = build_diffusion_matrix(&p).unwrap();
        let v = steady_lyapunov_solve(&s, &d).unwrap();
        assert!(v.lyapunov_residual(&s, &d) < 1e-8);
        assert!(v.asymmetry() == 0.0);
        assert!(v.min_symplectic_eigenvalue().unwrap() >= 0.5 - 1e-9);
        assert!(log_negativity(&v.two_mode()).unwrap() > 0.0);
    }

    proptest! {
        #[test]
        fn random_covariances_are_physical(seed in any::<u64>(), nbar in 0.0..20.0f64) {
            let v = CovarianceMatrix::random(seed, nbar, 0.2);
            prop_assert!(v.asymmetry() == 0.0);
            prop_assert!(v.min_symplectic_eigenvalue().unwrap() >= 0.5 - 1e-9);
            prop_assert!(log_negativity(&v.two_mode()).is_ok());
        }

        #[test]
        fn log_negativity_nonnegative_and_monotone_in_squeezing(r in 0.0..2.0f64, dr in 0.01..0.5f64) {
            let a = log_negativity(&squeezed(r)).unwrap();
            let b = log_negativity(&squeezed(r + dr)).unwrap();
            prop_assert!(a >= 0.0 && b > a);
        }
    }
}
