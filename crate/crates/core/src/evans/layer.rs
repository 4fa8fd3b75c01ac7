//! First-order form of the linearized eigenvalue equation about a layer profile.
//!
//! With `A^j = dF^j(U) - dB^{j0}[.] U'` and tangential frequencies `xi_j`,
//! the Fourier-transformed equation reads `(B^{00} U' + P U)' + Q U' + R U = 0`:
//!
//! ```text
//! P = sum_k i xi_k B^{0k} - A^0
//! Q = sum_j i xi_j B^{j0}
//! R = -sum_jk xi_j xi_k B^{jk} - sum_j i xi_j A^j - lambda
//! ```
//!
//! The phase variable is `Z = (U, z)` with the parabolic flux `z = (B^{00} U' + P U)_p`.
//! Hyperbolic rows of `B` vanish, so `U'` solves `M U' = (-(P_h' + R_h) U, z - P_p U)`
//! with `M = (P_h; B^{00}_p)`.

use super::{EvansError, EvansProblem};
use crate::linalg::{to_complex, CMatrix, RMatrix, RVector, I};
use crate::model::{FlowCase, SystemDefinition};
use crate::profile::Profile;
use num_complex::Complex64;
use std::sync::Arc;

pub struct LayerProblem {
    sys: Arc<dyn SystemDefinition>,
    profile: Arc<Profile>,
    xi_tilde: Vec<f64>,
    case: FlowCase,
}

struct Reduction {
    base: CMatrix,
    slope: CMatrix,
    forcing: CMatrix,
}

impl LayerProblem {
    pub fn new(
        sys: Arc<dyn SystemDefinition>,
        profile: Arc<Profile>,
        xi_tilde: Vec<f64>,
        case: FlowCase,
    ) -> Result<Self, EvansError> {
        let d = sys.dimension();
        if xi_tilde.len() + 1 != d {
            return Err(EvansError::InvalidInput(format!(
                "system has dimension {d}, so {} transverse frequencies are needed, got {}",
                d - 1,
                xi_tilde.len()
            )));
        }
        if profile.size() != sys.size() {
            return Err(EvansError::InvalidInput("profile size differs from system size".into()));
        }
        Ok(Self { sys, profile, xi_tilde, case })
    }

    pub fn xi_tilde(&self) -> &[f64] {
        &self.xi_tilde
    }

    pub fn case(&self) -> FlowCase {
        self.case
    }

    pub fn system(&self) -> &Arc<dyn SystemDefinition> {
        &self.sys
    }

    pub fn profile(&self) -> &Arc<Profile> {
        &self.profile
    }

    /// `A(x; lambda)` of the first-order system.
    pub fn assemble(&self, x: f64, lambda: Complex64) -> Result<CMatrix, EvansError> {
        let (base, slope) = self.coefficient(x)?;
        Ok(base + slope * lambda)
    }

    /// `A` at the end state.
    pub fn limiting_matrix(&self, lambda: Complex64) -> CMatrix {
        let (base, slope) = self.limiting();
        base + slope * lambda
    }

    fn reduce(&self, x: f64, u: &RVector, du: &RVector) -> Result<Reduction, EvansError> {
        let sys = self.sys.as_ref();
        let n = sys.size();
        let r = sys.parabolic_rank();
        let h = n - r;
        let OperatorTerms { b00, p, q, r0 } = operator_terms(sys, &self.xi_tilde, u, du);
        // x-derivative of the normal flux Jacobian along the profile
        let dp_h = if du.amax() == 0.0 {
            CMatrix::zeros(h, n)
        } else {
            let eps = 1e-6 * sys.state_scale(u) / du.amax();
            let plus = sys.flux_jacobian(0, &(u + du * eps));
            let minus = sys.flux_jacobian(0, &(u - du * eps));
            to_complex(&(-(plus - minus) / (2.0 * eps)).rows(0, h).into_owned())
        };

        let mut m = CMatrix::zeros(n, n);
        m.rows_mut(0, h).copy_from(&p.rows(0, h));
        m.rows_mut(h, r).copy_from(&b00.rows(h, r));
        let sv = m.singular_values();
        if sv.min() <= 1e-12 * sv.max() {
            return Err(EvansError::SingularReduction { x });
        }
        let minv = m.try_inverse().ok_or(EvansError::SingularReduction { x })?;

        let mut rhs0 = CMatrix::zeros(n, n);
        rhs0.rows_mut(0, h).copy_from(&(-(dp_h + r0.rows(0, h))));
        rhs0.rows_mut(h, r).copy_from(&(-p.rows(h, r)));
        let g0 = &minv * rhs0;
        let mut e_h = CMatrix::zeros(n, n);
        for i in 0..h {
            e_h[(i, i)] = Complex64::from(1.0);
        }
        let g1 = &minv * e_h;
        let hz = minv.columns(h, r).into_owned();
        let q_p = q.rows(h, r).into_owned();

        let dim = n + r;
        let mut base = CMatrix::zeros(dim, dim);
        base.view_mut((0, 0), (n, n)).copy_from(&g0);
        base.view_mut((0, n), (n, r)).copy_from(&hz);
        base.view_mut((n, 0), (r, n)).copy_from(&(-(&q_p * &g0) - r0.rows(h, r)));
        base.view_mut((n, n), (r, r)).copy_from(&(-(&q_p * &hz)));
        let mut slope = CMatrix::zeros(dim, dim);
        slope.view_mut((0, 0), (n, n)).copy_from(&g1);
        let mut lower = -(&q_p * &g1);
        for i in 0..r {
            lower[(i, h + i)] += Complex64::from(1.0);
        }
        slope.view_mut((n, 0), (r, n)).copy_from(&lower);

        let mut forcing = CMatrix::zeros(dim, n);
        let mh = minv.columns(0, h).into_owned();
        forcing.view_mut((0, 0), (n, h)).copy_from(&mh);
        forcing.view_mut((n, 0), (r, h)).copy_from(&(-(&q_p * &mh)));
        for i in 0..r {
            forcing[(n + i, h + i)] = Complex64::from(1.0);
        }
        Ok(Reduction { base, slope, forcing })
    }

    fn reduce_at(&self, x: f64) -> Result<Reduction, EvansError> {
        let (u, du) = self.profile.eval(x);
        self.reduce(x, &u, &du)
    }

    /// Wall constraint on `U(0)`: the parabolic rows of `B^{00}` for outflow, and
    /// additionally the Schur complement `A_11 - A_12 b_2^{-1} b_1` for inflow.
    pub fn boundary_constraint(&self) -> Result<RMatrix, EvansError> {
        let sys = self.sys.as_ref();
        let n = sys.size();
        let r = sys.parabolic_rank();
        let h = n - r;
        let wall = &self.profile.wall_value;
        let b00 = sys.viscosity(0, 0, wall);
        let bp = b00.rows(h, r).into_owned();
        match self.case {
            FlowCase::Outflow => Ok(bp),
            FlowCase::Inflow => {
                let a = sys.flux_jacobian(0, wall);
                let b1 = bp.columns(0, h).into_owned();
                let b2 = bp.columns(h, r).into_owned();
                let b2inv = b2.try_inverse().ok_or(EvansError::SingularReduction { x: 0.0 })?;
                let schur = a.view((0, 0), (h, h)) - a.view((0, h), (h, r)) * b2inv * b1;
                let mut c = RMatrix::zeros(n, n);
                c.view_mut((0, 0), (h, h)).copy_from(&schur);
                c.rows_mut(h, r).copy_from(&bp);
                Ok(c)
            }
        }
    }
}

/// Coefficients of `L U = (B^{00} U' + P U)' + Q U' + R U` at a profile point.
pub struct OperatorTerms {
    pub b00: CMatrix,
    pub p: CMatrix,
    pub q: CMatrix,
    pub r0: CMatrix,
}

/// `dB^{j0}[.] U'` as a matrix acting on the perturbation.
fn viscosity_drift(sys: &dyn SystemDefinition, j: usize, u: &RVector, du: &RVector) -> RMatrix {
    let n = sys.size();
    let mut m = RMatrix::zeros(n, n);
    if du.amax() == 0.0 {
        return m;
    }
    for c in 0..n {
        let mut e = RVector::zeros(n);
        e[c] = 1.0;
        m.set_column(c, &(sys.viscosity_derivative(j, 0, u, &e) * du));
    }
    m
}

/// `P`, `Q` and `R` (without `-lambda`) at state `u` with slope `du`.
pub fn operator_terms(sys: &dyn SystemDefinition, xi_tilde: &[f64], u: &RVector, du: &RVector) -> OperatorTerms {
    let n = sys.size();
    let d = sys.dimension();
    let xi = |j: usize| xi_tilde[j - 1];
    let a_eff: Vec<CMatrix> =
        (0..d).map(|j| to_complex(&(sys.flux_jacobian(j, u) - viscosity_drift(sys, j, u, du)))).collect();
    let b = |j: usize, k: usize| to_complex(&sys.viscosity(j, k, u));
    let mut p = -a_eff[0].clone();
    let mut q = CMatrix::zeros(n, n);
    let mut r0 = CMatrix::zeros(n, n);
    for j in 1..d {
        p += b(0, j) * (I * xi(j));
        q += b(j, 0) * (I * xi(j));
        r0 -= &a_eff[j] * (I * xi(j));
        for k in 1..d {
            r0 -= b(j, k) * Complex64::from(xi(j) * xi(k));
        }
    }
    OperatorTerms { b00: b(0, 0), p, q, r0 }
}

/// Basis of phase vectors `(U, z)` whose trace satisfies the wall conditions.
pub fn boundary_subspace(problem: &LayerProblem) -> Result<CMatrix, EvansError> {
    problem.boundary_basis()
}

impl EvansProblem for LayerProblem {
    fn phase_dim(&self) -> usize {
        self.sys.size() + self.sys.parabolic_rank()
    }

    fn solution_dim(&self) -> usize {
        self.sys.size()
    }

    fn x_max(&self) -> f64 {
        self.profile.x_max()
    }

    fn resolution_steps(&self) -> usize {
        if self.profile.amplitude() == 0.0 {
            16
        } else {
            4 * self.profile.grid.len()
        }
    }

    fn coefficient(&self, x: f64) -> Result<(CMatrix, CMatrix), EvansError> {
        let red = self.reduce_at(x)?;
        Ok((red.base, red.slope))
    }

    fn limiting(&self) -> (CMatrix, CMatrix) {
        let u = &self.profile.end_state.u_plus;
        let red = self
            .reduce(f64::INFINITY, u, &RVector::zeros(u.len()))
            .expect("end state is noncharacteristic");
        (red.base, red.slope)
    }

    fn boundary_basis(&self) -> Result<CMatrix, EvansError> {
        let n = self.sys.size();
        let r = self.sys.parabolic_rank();
        let kernel = crate::linalg::null_space(&self.boundary_constraint()?, 1e-10);
        let k = kernel.ncols();
        let mut basis = CMatrix::zeros(n + r, k + r);
        basis.view_mut((0, 0), (n, k)).copy_from(&to_complex(&kernel));
        for i in 0..r {
            basis[(n + i, k + i)] = Complex64::from(1.0);
        }
        Ok(basis)
    }

    fn forcing(&self, x: f64) -> Result<CMatrix, EvansError> {
        Ok(self.reduce_at(x)?.forcing)
    }

    fn transverse_norm(&self) -> f64 {
        self.xi_tilde.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evans::{limiting_split, EvansFunction, EvansOptions};
    use crate::model::{build_isentropic_2d, ConstantCoefficientSystem, EndState, IsentropicParams};
    use crate::profile::{explicit_transverse, layer_grid, uniform_grid};

    fn convection_diffusion(mu: f64, m: f64) -> LayerProblem {
        let sys = ConstantCoefficientSystem::new(
            vec![RMatrix::from_element(1, 1, m)],
            vec![vec![RMatrix::from_element(1, 1, mu)]],
            RMatrix::identity(1, 1),
            1,
        );
        let end = EndState::new(&sys, RVector::zeros(1));
        let profile = Profile::constant(uniform_grid(20.0, 41), end);
        LayerProblem::new(Arc::new(sys), Arc::new(profile), vec![], FlowCase::Outflow).unwrap()
    }

    fn transverse(u_inf: f64) -> (Arc<dyn SystemDefinition>, Arc<Profile>) {
        let params = IsentropicParams { rho0: 1.0, v_wall: -0.1, u_inf, mu: 0.1, eta: 0.0, a: 1.0, gamma: 1.4 };
        let sys = build_isentropic_2d(params).unwrap();
        let profile = explicit_transverse(&params, &layer_grid(30.0, 400)).unwrap();
        (Arc::new(sys), Arc::new(profile))
    }

    #[test]
    fn scalar_reduction_is_similar_to_companion_matrix() {
        let (mu, m) = (0.7, -0.4);
        let problem = convection_diffusion(mu, m);
        let lambda = Complex64::new(0.3, 1.1);
        let a = problem.assemble(1.0, lambda).unwrap();
        // (u, u') = T (u, z) with z = mu u' - m u
        let t = CMatrix::from_row_slice(2, 2, &[1.0, 0.0, m / mu, 1.0 / mu].map(Complex64::from));
        let companion = &t * a * t.clone().try_inverse().unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, m / mu].map(Complex64::from))
            + CMatrix::from_row_slice(2, 2, &[Complex64::from(0.0), Complex64::from(0.0), lambda / mu, Complex64::from(0.0)]);
        assert!((companion - expected).norm() < 1e-13);
    }

    #[test]
    fn scalar_stable_root_matches_quadratic_formula() {
        let (mu, m) = (0.5, -0.3);
        let problem = convection_diffusion(mu, m);
        let lambda = Complex64::new(0.8, -0.4);
        let split = limiting_split(&problem, lambda).unwrap();
        assert_eq!(split.k_plus, 1);
        let kappa = (m - (Complex64::from(m * m) + lambda * 4.0 * mu).sqrt()) / (2.0 * mu);
        assert!((split.stable_trace - kappa).norm() < 1e-12);
    }

    #[test]
    fn scalar_dirichlet_boundary_is_free_derivative() {
        let problem = convection_diffusion(1.0, -1.0);
        let basis = problem.boundary_basis().unwrap();
        assert_eq!(basis.ncols(), 1);
        assert!(basis[(0, 0)].norm() < 1e-15);
        assert!((basis[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_profile_coefficients_equal_limit() {
        let problem = convection_diffusion(1.0, -0.5);
        let lambda = Complex64::new(1.0, 2.0);
        let a = problem.assemble(3.0, lambda).unwrap();
        assert!((a - problem.limiting_matrix(lambda)).norm() < 1e-14);
    }

    #[test]
    fn transverse_layer_decouples_at_zero_frequency() {
        let (sys, profile) = transverse(0.5);
        let problem = LayerProblem::new(sys, profile, vec![0.0], FlowCase::Outflow).unwrap();
        // Z = (rho, m_u, m_v, z_u, z_v): the (rho, v) block does not see u
        let a = problem.assemble(0.7, Complex64::new(0.4, 0.3)).unwrap();
        for &row in &[0usize, 2, 4] {
            for &col in &[1usize, 3] {
                assert!(a[(row, col)].norm() < 1e-9, "A[{row},{col}] = {}", a[(row, col)]);
            }
        }
    }

    #[test]
    fn isentropic_boundary_dimensions() {
        let (sys, profile) = transverse(0.5);
        let out = LayerProblem::new(sys.clone(), profile.clone(), vec![0.5], FlowCase::Outflow).unwrap();
        let inflow = LayerProblem::new(sys, profile, vec![0.5], FlowCase::Inflow).unwrap();
        let lambda = Complex64::new(1.0, 0.5);
        let k_out = limiting_split(&out, lambda).unwrap().k_plus;
        let phi_out = out.boundary_basis().unwrap();
        assert_eq!(phi_out.ncols() + k_out, 5);
        // hyperbolic trace unconstrained: a pure density change in W lies in the subspace
        let dw_du = out.system().w_jacobian(&out.profile().wall_value);
        let du = dw_du.try_inverse().unwrap().column(0).into_owned();
        let e0 = crate::linalg::CVector::from_fn(5, |i, _| Complex64::from(if i < 3 { du[i] } else { 0.0 }));
        let resid = &e0 - &phi_out * (phi_out.adjoint() * &e0);
        assert!(resid.norm() < 1e-12);
        let phi_in = inflow.boundary_basis().unwrap();
        assert!(phi_in.ncols() < phi_out.ncols());
        // constraint is met exactly
        let c = out.boundary_constraint().unwrap();
        assert!((to_complex(&c) * phi_out.rows(0, 3)).norm() < 1e-14);
    }

    #[test]
    fn stable_count_is_constant_in_right_half_plane() {
        let (sys, profile) = transverse(0.5);
        let problem = LayerProblem::new(sys, profile, vec![0.5], FlowCase::Outflow).unwrap();
        let counts: Vec<usize> = [0.1, 1.0, 10.0, 100.0]
            .iter()
            .flat_map(|&re| [-3.0, 0.0, 5.0].map(|im| limiting_split(&problem, Complex64::new(re, im)).unwrap().k_plus))
            .collect();
        // r + number of incoming hyperbolic modes (none for outflow)
        assert!(counts.iter().all(|&k| k == 2), "{counts:?}");
    }

    #[test]
    fn constant_profile_frame_is_the_eigenbasis() {
        let problem = Arc::new(convection_diffusion(1.0, -1.0));
        let evans = EvansFunction::new(problem.clone(), EvansOptions::default()).unwrap();
        let lambda = Complex64::new(0.5, 0.2);
        let anchor = evans.anchor(lambda).unwrap();
        let frame = evans.frame(&anchor).unwrap();
        assert!(crate::linalg::subspace_distance(&frame.phi_plus, &anchor.basis) < 1e-9);
        // backward growth e^{-kappa X} is cancelled by the recorded trace term
        let kappa = anchor.split.stable_trace;
        let overlap = (frame.phi_plus.adjoint() * &anchor.basis)[(0, 0)];
        let growth = frame.log_scale - kappa * evans.x_max();
        let expected = -kappa * evans.x_max() + overlap.ln();
        assert!((growth - expected).norm() < 1e-6, "{growth} vs {expected}");
    }
}
