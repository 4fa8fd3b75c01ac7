//! Scalar second-order test problems on the half-line with Dirichlet data:
//! `mu u'' - m u' + q(x) u - c xi^2 u = lambda u`, phase variable `(u, u')`.

use super::{EvansError, EvansProblem};
use crate::linalg::CMatrix;
use num_complex::Complex64;
use std::sync::Arc;

type Potential = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ScalarProblem {
    pub diffusion: f64,
    pub drift: f64,
    /// Decaying potential `q`.
    potential: Potential,
    pub transverse_weight: f64,
    pub xi: f64,
    pub x_max: f64,
    /// Steps per unit length needed to resolve the potential.
    pub steps_per_unit: f64,
}

impl ScalarProblem {
    pub fn new(diffusion: f64, drift: f64, potential: Potential, x_max: f64) -> Self {
        Self { diffusion, drift, potential, transverse_weight: 0.0, xi: 0.0, x_max, steps_per_unit: 50.0 }
    }

    /// `mu u'' - m u' = lambda u`.
    pub fn convection_diffusion(diffusion: f64, drift: f64, x_max: f64) -> Self {
        Self::new(diffusion, drift, Arc::new(|_| 0.0), x_max)
    }

    /// `u'' = lambda u`.
    pub fn heat(x_max: f64) -> Self {
        Self::convection_diffusion(1.0, 0.0, x_max)
    }

    /// `u'' + 6 sech^2(x) u = lambda u`; its only Dirichlet eigenvalue is `lambda = 1`.
    pub fn poschl_teller(x_max: f64) -> Self {
        Self::new(1.0, 0.0, Arc::new(|x: f64| 6.0 / x.cosh().powi(2)), x_max)
    }

    /// `u'' + 6 sech^2(x) u - 5 xi^2 u = lambda u`, with eigenvalue `1 - 5 xi^2`.
    pub fn poschl_teller_family(xi: f64, x_max: f64) -> Self {
        Self { transverse_weight: 5.0, xi, ..Self::poschl_teller(x_max) }
    }

    pub fn potential(&self, x: f64) -> f64 {
        (self.potential)(x)
    }

    fn pair(&self, q: f64) -> (CMatrix, CMatrix) {
        let mu = self.diffusion;
        let shift = self.transverse_weight * self.xi * self.xi;
        let base = CMatrix::from_row_slice(2, 2, &[0.0, 1.0, (shift - q) / mu, self.drift / mu].map(Complex64::from));
        let slope = CMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0 / mu, 0.0].map(Complex64::from));
        (base, slope)
    }
}

impl EvansProblem for ScalarProblem {
    fn phase_dim(&self) -> usize {
        2
    }

    fn solution_dim(&self) -> usize {
        1
    }

    fn x_max(&self) -> f64 {
        self.x_max
    }

    fn resolution_steps(&self) -> usize {
        (self.steps_per_unit * self.x_max).ceil() as usize
    }

    fn coefficient(&self, x: f64) -> Result<(CMatrix, CMatrix), EvansError> {
        Ok(self.pair(self.potential(x)))
    }

    fn limiting(&self) -> (CMatrix, CMatrix) {
        self.pair(0.0)
    }

    fn boundary_basis(&self) -> Result<CMatrix, EvansError> {
        Ok(CMatrix::from_column_slice(2, 1, &[Complex64::from(0.0), Complex64::from(1.0)]))
    }

    fn forcing(&self, _x: f64) -> Result<CMatrix, EvansError> {
        Ok(CMatrix::from_column_slice(2, 1, &[Complex64::from(0.0), Complex64::from(1.0 / self.diffusion)]))
    }

    fn transverse_norm(&self) -> f64 {
        self.xi.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evans::{EvansFunction, EvansOptions};

    /// Decaying solution of the sech^2 problem at `lambda = kappa^2`:
    /// `e^{-kappa x} (kappa^2 - 1 + 3 kappa t + 3 t^2)` with `t = tanh x`.
    fn jost(kappa: f64, x: f64) -> f64 {
        let t = x.tanh();
        (-kappa * x).exp() * (kappa * kappa - 1.0 + 3.0 * kappa * t + 3.0 * t * t)
    }

    #[test]
    fn jost_oracle_solves_the_equation() {
        let kappa = 1.3;
        let h = 1e-3;
        for &x in &[0.2, 1.0, 2.5] {
            let d2 = (jost(kappa, x + h) - 2.0 * jost(kappa, x) + jost(kappa, x - h)) / (h * h);
            let resid = d2 + 6.0 / x.cosh().powi(2) * jost(kappa, x) - kappa * kappa * jost(kappa, x);
            assert!(resid.abs() < 1e-5, "{resid}");
        }
    }

    #[test]
    fn eigenfunction_at_the_zero_is_sech_tanh() {
        let problem = Arc::new(ScalarProblem::poschl_teller(20.0));
        let evans = EvansFunction::new(problem, EvansOptions::default()).unwrap();
        let frame = evans.frame_at(Complex64::from(1.0)).unwrap();
        // the decaying frame at the wall is (u(0), u'(0)) ~ (0, 1) for sech*tanh
        let v = frame.phi_plus.column(0);
        assert!(v[0].norm() < 1e-7, "{}", v[0]);
    }

    #[test]
    fn determinant_ratios_match_jost_values() {
        let problem = Arc::new(ScalarProblem::poschl_teller(20.0));
        let evans = EvansFunction::new(problem, EvansOptions::default()).unwrap();
        let d = |lam: f64| {
            let frame = evans.frame_at(Complex64::from(lam)).unwrap();
            let kappa = lam.sqrt();
            let anchor = evans.transport(&evans.anchor(Complex64::from(1.0)).unwrap(), Complex64::from(lam)).unwrap();
            // frame started from c (1, -kappa); the Jost solution tends to
            // e^{-kappa x} (kappa + 1)(kappa + 2)
            let scale = anchor.basis[(0, 0)] / ((kappa + 1.0) * (kappa + 2.0));
            (frame.determinant() / scale, jost(kappa, 0.0))
        };
        let (d1, j1) = d(2.0);
        let (d2, j2) = d(3.5);
        let ratio = (d1 / d2) / (j1 / j2);
        assert!((ratio - 1.0).norm() < 1e-6, "{ratio}");
    }

    #[test]
    fn convection_diffusion_never_vanishes() {
        let problem = Arc::new(ScalarProblem::convection_diffusion(1.0, -0.5, 20.0));
        let evans = EvansFunction::new(problem, EvansOptions::default()).unwrap();
        for &(re, im) in &[(0.01, 0.0), (0.5, 2.0), (3.0, -4.0), (0.0, 1.0)] {
            let d = evans.eval(Complex64::new(re, im)).unwrap();
            assert!(d.norm() > 1e-3, "D({re}+{im}i) = {d}");
        }
    }

    #[test]
    fn poschl_teller_zero_location() {
        let problem = Arc::new(ScalarProblem::poschl_teller(20.0));
        let evans = EvansFunction::new(problem, EvansOptions::default()).unwrap();
        let z = evans.find_zero(Complex64::from(0.8), Complex64::from(1.3), 1e-12).unwrap();
        assert!((z - 1.0).norm() < 1e-6, "{z}");
    }

    #[test]
    fn doubling_truncation_keeps_the_frame() {
        let lambda = Complex64::new(0.7, 0.4);
        let short = EvansFunction::new(Arc::new(ScalarProblem::poschl_teller(12.0)), EvansOptions::default()).unwrap();
        let long = EvansFunction::new(Arc::new(ScalarProblem::poschl_teller(24.0)), EvansOptions::default()).unwrap();
        let a = short.frame_at(lambda).unwrap();
        let b = long.frame_at(lambda).unwrap();
        assert!(crate::linalg::subspace_distance(&a.phi_plus, &b.phi_plus) < 1e-6);
    }
}
