//! Two-dimensional isentropic compressible Navier-Stokes.
//!
//! Conserved variables are `U = (rho, rho*u, rho*v)` where `u` is the
//! tangential velocity (along `x2`) and `v` the wall-normal velocity (along
//! `x1`). Pressure follows `p = a rho^gamma`; the viscous stress is
//! `mu (grad w + grad w^T) + eta (div w) I`.
//!
//! Symmetric form uses `W = (rho, u, v)`:
//!
//! ```text
//! A0   = diag(p'/rho, rho, rho)
//! A^j  = [[p' w_j / rho, p' e_j^T], [p' e_j, rho w_j I]]
//! B^jk = blockdiag(0, C^jk),  C^jk_ab = mu d_jk d_ab + mu d_ak d_jb + eta d_aj d_bk
//! ```
//!
//! obtained by multiplying the mass equation by `p'/rho`. With constant
//! viscosities the symmetric form has no quadratic source.

use super::{invalid, EndState, ModelError, SystemDefinition};
use crate::linalg::{RMatrix, RVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsentropicParams {
    /// Upstream density.
    pub rho0: f64,
    /// Normal velocity at the wall; negative is suction (outflow).
    #[serde(rename = "V")]
    pub v_wall: f64,
    /// Tangential velocity far from the wall.
    pub u_inf: f64,
    pub mu: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn one() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    1.4
}

impl IsentropicParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = [self.rho0, self.v_wall, self.u_inf, self.mu, self.eta, self.a, self.gamma];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(invalid("params", "all parameters must be finite"));
        }
        if self.rho0 <= 0.0 {
            return Err(invalid("params.rho0", "density must be positive"));
        }
        if self.gamma < 1.0 {
            return Err(invalid("params.gamma", "adiabatic exponent must be at least 1"));
        }
        if self.a <= 0.0 {
            return Err(invalid("params.a", "pressure constant must be positive"));
        }
        if self.mu <= 0.0 {
            return Err(invalid("params.mu", "viscosity must be positive"));
        }
        if self.eta.abs() > self.mu {
            return Err(invalid("params.eta", "second viscosity must satisfy |eta| <= mu"));
        }
        Ok(())
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }

    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 1.0)
    }

    pub fn sound_speed(&self, rho: f64) -> f64 {
        self.pressure_derivative(rho).sqrt()
    }

    /// Far-field state `(rho0, rho0 u_inf, rho0 V)`.
    pub fn end_state_vector(&self) -> RVector {
        RVector::from_vec(vec![self.rho0, self.rho0 * self.u_inf, self.rho0 * self.v_wall])
    }

    /// Wall values of `W = (rho, u, v)`: no slip tangentially, prescribed normal velocity.
    pub fn wall_w(&self) -> RVector {
        RVector::from_vec(vec![self.rho0, 0.0, self.v_wall])
    }
}

#[derive(Debug, Clone)]
pub struct Isentropic2d {
    pub params: IsentropicParams,
}

pub fn build_isentropic_2d(params: IsentropicParams) -> Result<Isentropic2d, ModelError> {
    params.validate()?;
    Ok(Isentropic2d { params })
}

/// Position of the velocity along direction `j` inside `U` and `W`.
fn velocity_slot(j: usize) -> usize {
    if j == 0 {
        2
    } else {
        1
    }
}

impl Isentropic2d {
    pub fn end_state(&self) -> EndState {
        EndState::new(self, self.params.end_state_vector())
    }

    /// Velocity vector indexed by direction: `w[0] = v`, `w[1] = u`.
    fn velocity(u: &RVector) -> [f64; 2] {
        [u[2] / u[0], u[1] / u[0]]
    }

    /// Viscous coefficient `C^{jk}_{ab}` between velocity directions `a`, `b`.
    fn stress_coefficient(&self, j: usize, k: usize, a: usize, b: usize) -> f64 {
        let (mu, eta) = (self.params.mu, self.params.eta);
        let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
        mu * d(j, k) * d(a, b) + mu * d(a, k) * d(j, b) + eta * d(a, j) * d(b, k)
    }
}

impl SystemDefinition for Isentropic2d {
    fn name(&self) -> &str {
        "isentropic2d"
    }

    fn dimension(&self) -> usize {
        2
    }

    fn size(&self) -> usize {
        3
    }

    fn parabolic_rank(&self) -> usize {
        2
    }

    fn flux(&self, j: usize, u: &RVector) -> RVector {
        let w = Self::velocity(u);
        let p = self.params.pressure(u[0]);
        let mut f = RVector::from_vec(vec![u[0] * w[j], u[1] * w[j], u[2] * w[j]]);
        f[velocity_slot(j)] += p;
        f
    }

    fn flux_jacobian(&self, j: usize, u: &RVector) -> RMatrix {
        let rho = u[0];
        let w = Self::velocity(u);
        let wj = w[j];
        let sj = velocity_slot(j);
        let mut m = RMatrix::zeros(3, 3);
        // mass row: d(m_j)/dU
        m[(0, sj)] = 1.0;
        for c in 1..3 {
            let wc = u[c] / rho;
            // F_c = m_c m_j / rho (+ p on the j slot)
            m[(c, 0)] = -wc * wj;
            m[(c, c)] += wj;
            m[(c, sj)] += wc;
        }
        m[(sj, 0)] += self.params.pressure_derivative(rho);
        m
    }

    fn viscosity(&self, j: usize, k: usize, u: &RVector) -> RMatrix {
        let rho = u[0];
        let w = Self::velocity(u);
        let mut m = RMatrix::zeros(3, 3);
        for a in 0..2 {
            let row = velocity_slot(a);
            for b in 0..2 {
                let c = self.stress_coefficient(j, k, a, b) / rho;
                m[(row, velocity_slot(b))] += c;
                m[(row, 0)] -= c * w[b];
            }
        }
        m
    }

    fn to_w(&self, u: &RVector) -> RVector {
        RVector::from_vec(vec![u[0], u[1] / u[0], u[2] / u[0]])
    }

    fn from_w(&self, w: &RVector) -> RVector {
        RVector::from_vec(vec![w[0], w[0] * w[1], w[0] * w[2]])
    }

    fn w_jacobian(&self, u: &RVector) -> RMatrix {
        let rho = u[0];
        RMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.0, 0.0, -u[1] / (rho * rho), 1.0 / rho, 0.0, -u[2] / (rho * rho), 0.0, 1.0 / rho],
        )
    }

    fn sym_a0(&self, w: &RVector) -> RMatrix {
        let rho = w[0];
        RMatrix::from_diagonal(&RVector::from_vec(vec![self.params.pressure_derivative(rho) / rho, rho, rho]))
    }

    fn sym_a(&self, j: usize, w: &RVector) -> RMatrix {
        let rho = w[0];
        let pp = self.params.pressure_derivative(rho);
        let sj = velocity_slot(j);
        let wj = w[sj];
        let mut m = RMatrix::zeros(3, 3);
        m[(0, 0)] = pp * wj / rho;
        m[(0, sj)] = pp;
        m[(sj, 0)] = pp;
        m[(1, 1)] = rho * wj;
        m[(2, 2)] = rho * wj;
        m
    }

    fn sym_b(&self, j: usize, k: usize, _w: &RVector) -> RMatrix {
        let mut m = RMatrix::zeros(3, 3);
        for a in 0..2 {
            for b in 0..2 {
                m[(velocity_slot(a), velocity_slot(b))] = self.stress_coefficient(j, k, a, b);
            }
        }
        m
    }

    fn admissible(&self, u: &RVector) -> bool {
        u[0] > 0.0 && u.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_eigenvalues;
    use proptest::prelude::*;

    fn params(v: f64) -> IsentropicParams {
        IsentropicParams { rho0: 1.0, v_wall: v, u_inf: 1.0, mu: 0.1, eta: 0.0, a: 1.0, gamma: 2.0 }
    }

    #[test]
    fn pressure_law_values() {
        let p = params(-0.1);
        assert_eq!(p.pressure(1.0), 1.0);
        assert_eq!(p.pressure_derivative(1.0), 2.0);
        assert!((p.sound_speed(1.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = params(-0.1);
        p.eta = p.mu;
        assert!(build_isentropic_2d(p).is_ok());
        p.eta = 1.5 * p.mu;
        assert!(build_isentropic_2d(p).is_err());
        let mut q = params(-0.1);
        q.gamma = 0.9;
        assert!(build_isentropic_2d(q).is_err());
        let mut q = params(-0.1);
        q.rho0 = 0.0;
        assert!(build_isentropic_2d(q).is_err());
    }

    #[test]
    fn normal_jacobian_spectrum() {
        let sys = build_isentropic_2d(params(-0.1)).unwrap();
        let u = sys.params.end_state_vector();
        let mut ev: Vec<f64> = real_eigenvalues(&sys.flux_jacobian(0, &u)).iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        let c = 2f64.sqrt();
        for (a, b) in ev.iter().zip([-0.1 - c, -0.1, -0.1 + c]) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn viscous_terms_reproduce_momentum_equations() {
        // x-momentum: (2mu+eta) u_xx + mu u_yy + (mu+eta) v_xy, with x = x2 (index 1), y = x1 (index 0)
        let mut p = params(-0.1);
        p.eta = 0.03;
        let sys = build_isentropic_2d(p).unwrap();
        let w = RVector::from_vec(vec![1.0, 0.0, 0.0]);
        let c = |j, k, a, b| sys.sym_b(j, k, &w)[(velocity_slot(a), velocity_slot(b))];
        // coefficient of u_xx in the u equation: C^{11}_{uu}
        assert!((c(1, 1, 1, 1) - (2.0 * p.mu + p.eta)).abs() < 1e-15);
        assert!((c(0, 0, 1, 1) - p.mu).abs() < 1e-15);
        assert!((c(1, 0, 1, 0) + c(0, 1, 1, 0) - (p.mu + p.eta)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn analytic_jacobian_matches_differences(rho in 0.3f64..3.0, mu_ in -2.0f64..2.0, mv in -2.0f64..2.0, j in 0usize..2) {
            let sys = build_isentropic_2d(params(-0.1)).unwrap();
            let u = RVector::from_vec(vec![rho, mu_, mv]);
            let analytic = sys.flux_jacobian(j, &u);
            let mut numeric = RMatrix::zeros(3, 3);
            for c in 0..3 {
                let h = 1e-6;
                let mut up = u.clone();
                let mut um = u.clone();
                up[c] += h;
                um[c] -= h;
                numeric.set_column(c, &((sys.flux(j, &up) - sys.flux(j, &um)) / (2.0 * h)));
            }
            prop_assert!((&analytic - &numeric).norm() <= 1e-6 * analytic.norm().max(1.0));
        }

        #[test]
        fn symmetric_form_is_similar_to_conservative(rho in 0.3f64..3.0, u in -1.0f64..1.0, v in -1.0f64..1.0, j in 0usize..2) {
            // A0^{-1} A^j = dW/dU * dF^j * (dW/dU)^{-1}
            let sys = build_isentropic_2d(params(-0.1)).unwrap();
            let w = RVector::from_vec(vec![rho, u, v]);
            let uc = sys.from_w(&w);
            let t = sys.w_jacobian(&uc);
            let lhs = sys.sym_a0(&w).try_inverse().unwrap() * sys.sym_a(j, &w);
            let rhs = &t * sys.flux_jacobian(j, &uc) * t.clone().try_inverse().unwrap();
            prop_assert!((&lhs - &rhs).norm() < 1e-10 * lhs.norm().max(1.0));
        }
    }
}
