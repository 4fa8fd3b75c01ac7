//! Hyperbolic-parabolic systems on the half-space `x1 > 0`.
//!
//! Direction index `0` is the wall-normal direction `x1`; the remaining
//! indices are tangential. Conserved variables split as `U = (u_h, u_p)` with
//! `n - r` hyperbolic and `r` parabolic components.

mod audit;
mod isentropic;
mod spec;
mod tabulated;

pub use audit::{
    branch_points_of_symbol, check_constant_multiplicity, check_genuine_coupling, check_hyperbolicity,
    check_noncharacteristic, check_structure, find_branch_points, sample_directions, BranchPoint, BranchScan,
    Classification, HypothesisReport, Verdict,
};
pub use isentropic::{build_isentropic_2d, Isentropic2d, IsentropicParams};
pub use spec::{BuiltModel, ModelSpec, SamplingSpec};
pub use tabulated::{ConstantCoefficientSystem, TabulatedParams};

use crate::linalg::{RMatrix, RVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("state outside the physical domain: {0}")]
    NonphysicalState(String),
}

pub fn invalid(field: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter { field: field.to_string(), reason: reason.into() }
}

/// Sign of the normal hyperbolic coefficient at the wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowCase {
    Inflow,
    Outflow,
}

impl FlowCase {
    /// Number of scalar Dirichlet conditions imposed on the `W` coordinates.
    pub fn boundary_condition_count(self, n: usize, r: usize) -> usize {
        match self {
            FlowCase::Inflow => n,
            FlowCase::Outflow => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndState {
    pub u_plus: RVector,
    pub w_plus: RVector,
}

impl EndState {
    pub fn new(sys: &dyn SystemDefinition, u_plus: RVector) -> Self {
        let w_plus = sys.to_w(&u_plus);
        Self { u_plus, w_plus }
    }
}

/// Conservative system `U_t + sum_j F^j(U)_j = sum_jk (B^{jk}(U) U_k)_j` together
/// with its symmetric form in the coordinates `W = W(U)`.
pub trait SystemDefinition: Send + Sync {
    fn name(&self) -> &str;
    /// Spatial dimension `d`.
    fn dimension(&self) -> usize;
    /// Number of conserved variables `n`.
    fn size(&self) -> usize;
    /// Parabolic rank `r`.
    fn parabolic_rank(&self) -> usize;

    fn hyperbolic_size(&self) -> usize {
        self.size() - self.parabolic_rank()
    }

    fn flux(&self, j: usize, u: &RVector) -> RVector;

    fn flux_jacobian(&self, j: usize, u: &RVector) -> RMatrix {
        let n = self.size();
        let mut jac = RMatrix::zeros(n, n);
        for c in 0..n {
            let h = 1e-6 * u[c].abs().max(1.0);
            let mut up = u.clone();
            let mut um = u.clone();
            up[c] += h;
            um[c] -= h;
            let col = (self.flux(j, &up) - self.flux(j, &um)) / (2.0 * h);
            jac.set_column(c, &col);
        }
        jac
    }

    fn viscosity(&self, j: usize, k: usize, u: &RVector) -> RMatrix;

    /// Derivative of `B^{jk}` at `u` in the direction `du`.
    fn viscosity_derivative(&self, j: usize, k: usize, u: &RVector, du: &RVector) -> RMatrix {
        let scale = du.amax();
        if scale == 0.0 {
            return RMatrix::zeros(self.size(), self.size());
        }
        let h = 1e-6 * u.amax().max(1.0) / scale;
        (self.viscosity(j, k, &(u + du * h)) - self.viscosity(j, k, &(u - du * h))) / (2.0 * h)
    }

    fn to_w(&self, u: &RVector) -> RVector;
    fn from_w(&self, w: &RVector) -> RVector;
    /// `dW/dU` at `u`.
    fn w_jacobian(&self, u: &RVector) -> RMatrix;

    fn sym_a0(&self, w: &RVector) -> RMatrix;
    fn sym_a(&self, j: usize, w: &RVector) -> RMatrix;
    fn sym_b(&self, j: usize, k: usize, w: &RVector) -> RMatrix;

    /// Quadratic source `g(W_x, W_x)` of the symmetric form; `w_grad[j]` is `dW/dx_j`.
    fn source(&self, _w: &RVector, _w_grad: &[RVector]) -> RVector {
        RVector::zeros(self.size())
    }

    /// Whether `u` lies in the physical domain.
    fn admissible(&self, _u: &RVector) -> bool {
        true
    }

    /// Characteristic scale of the state, used for relative tolerances.
    fn state_scale(&self, u: &RVector) -> f64 {
        u.amax().max(1.0)
    }
}

/// Row block `p` (parabolic rows) of a matrix.
pub fn parabolic_rows(m: &RMatrix, r: usize) -> RMatrix {
    let n = m.nrows();
    m.rows(n - r, r).into_owned()
}

/// Row block `h` (hyperbolic rows) of a matrix.
pub fn hyperbolic_rows(m: &RMatrix, r: usize) -> RMatrix {
    let n = m.nrows();
    m.rows(0, n - r).into_owned()
}
