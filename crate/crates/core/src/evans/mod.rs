//! Evans function of the linearized layer problem.
//!
//! The eigenvalue equation at transverse frequency `xi` is written as a
//! first-order system `Z' = A(x; lambda) Z` on `[0, x_max]` with `A` affine in
//! `lambda`. Decaying solutions are integrated backward from `x_max` by
//! fourth-order Magnus steps (exact for constant coefficients, so stiffness
//! from fast modes does not limit the step) with a QR-orthonormalized frame.
//! The discarded triangular factors are kept as a complex log-scale so that
//! `D = det(phi_zero, phi_plus)` stays analytic.
//! Initial bases are carried between spectral parameters by Kato transport.

mod layer;
mod resolvent;
mod scalar;
mod winding;

pub use layer::{boundary_subspace, operator_terms, LayerProblem, OperatorTerms};
pub use resolvent::{resolvent_solve, ResolventOptions, ResolventSolution};
pub use scalar::ScalarProblem;
pub use winding::{
    check_condition_d, winding_number, ConditionDEntry, ConditionDReport, Contour, WindingOptions, WindingResult,
};

use crate::linalg::{det, eigenvalues, orthonormal_range, spectral_radius, stable_projector, thin_qr, CMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvansError {
    #[error("limiting matrix has an eigenvalue on the imaginary axis at lambda = {lambda}")]
    CenterEigenvalue { lambda: Complex64 },
    #[error("first-order reduction is singular at x1 = {x}")]
    SingularReduction { x: f64 },
    #[error("manifold integration did not settle at lambda = {lambda} (frame change {change:.2e})")]
    StiffnessFailure { lambda: Complex64, change: f64 },
    #[error("boundary subspace has dimension {boundary}, decaying manifold {decaying}, phase space {phase}")]
    DimensionMismatch { boundary: usize, decaying: usize, phase: usize },
    #[error("Evans function vanishes on the contour near lambda = {lambda}")]
    ZeroOnContour { lambda: Complex64 },
    #[error("resolvent system is nearly singular (condition estimate {condition:.2e})")]
    NearSingular { condition: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Transverse frequency and spectral parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub xi_tilde: Vec<f64>,
    pub lambda: Complex64,
}

impl Frequency {
    pub fn new(xi_tilde: Vec<f64>, lambda: Complex64) -> Self {
        Self { xi_tilde, lambda }
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi_tilde.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `|(xi, lambda)|`.
    pub fn rho(&self) -> f64 {
        (self.xi_norm().powi(2) + self.lambda.norm_sqr()).sqrt()
    }

    /// Point `lambda = i k - theta1 (k^2 + |xi|^2)` of the parabolic surface.
    pub fn on_surface(xi_tilde: Vec<f64>, k: f64, theta1: f64) -> Self {
        let xi2: f64 = xi_tilde.iter().map(|x| x * x).sum();
        Self { xi_tilde, lambda: Complex64::new(-theta1 * (k * k + xi2), k) }
    }

    /// Signed distance in `Re lambda` from the parabolic surface; zero on it.
    pub fn surface_offset(&self, theta1: f64) -> f64 {
        let k = self.lambda.im;
        self.lambda.re + theta1 * (k * k + self.xi_norm().powi(2))
    }
}

/// A linear eigenvalue problem `Z' = (base(x) + lambda slope(x)) Z` on the half-line
/// with boundary conditions at `x = 0` and decay at infinity.
pub trait EvansProblem: Send + Sync {
    fn phase_dim(&self) -> usize;
    /// Number of leading phase components that make up the solution `U`.
    fn solution_dim(&self) -> usize;
    /// Default truncation point; coefficients are constant beyond it.
    fn x_max(&self) -> f64;
    /// Minimal number of uniform steps on `[0, x_max]` resolving the coefficients.
    fn resolution_steps(&self) -> usize;
    fn coefficient(&self, x: f64) -> Result<(CMatrix, CMatrix), EvansError>;
    fn limiting(&self) -> (CMatrix, CMatrix);
    /// Basis of phase vectors satisfying the boundary conditions.
    fn boundary_basis(&self) -> Result<CMatrix, EvansError>;
    /// Matrix `F(x)` with `Z' = A Z + F f` for the forced problem `(L - lambda) U = f`.
    fn forcing(&self, x: f64) -> Result<CMatrix, EvansError>;
    /// `|xi|`, entering the forcing norm of the resolvent.
    fn transverse_norm(&self) -> f64 {
        0.0
    }
}

fn affine(pair: &(CMatrix, CMatrix), lambda: Complex64) -> CMatrix {
    &pair.0 + &pair.1 * lambda
}

/// Limiting matrix with its stable spectral projector.
#[derive(Debug, Clone)]
pub struct LimitingSplit {
    pub lambda: Complex64,
    pub matrix: CMatrix,
    pub projector: CMatrix,
    pub k_plus: usize,
    /// `tr(P A)`: sum of the stable eigenvalues.
    pub stable_trace: Complex64,
}

const CENTER_TOL: f64 = 1e-9;

pub fn limiting_split(problem: &dyn EvansProblem, lambda: Complex64) -> Result<LimitingSplit, EvansError> {
    let matrix = affine(&problem.limiting(), lambda);
    let scale = 1.0 + spectral_radius(&matrix);
    if eigenvalues(&matrix).iter().any(|z| z.re.abs() < CENTER_TOL * scale) {
        return Err(EvansError::CenterEigenvalue { lambda });
    }
    let (projector, k_plus) = stable_projector(&matrix).ok_or(EvansError::CenterEigenvalue { lambda })?;
    let stable_trace = (&projector * &matrix).trace();
    Ok(LimitingSplit { lambda, matrix, projector, k_plus, stable_trace })
}

/// Initial basis of the decaying subspace at a spectral parameter.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub basis: CMatrix,
    pub split: LimitingSplit,
}

impl Anchor {
    pub fn lambda(&self) -> Complex64 {
        self.split.lambda
    }
}

/// One midpoint Kato step: the new basis lies in the range of `p_to` and its
/// increment is annihilated by the averaged projector.
fn kato_step(basis: &CMatrix, p_from: &CMatrix, p_to: &CMatrix, k: usize) -> CMatrix {
    let mid = (p_from + p_to) * Complex64::from(0.5);
    let left = orthonormal_range(&mid.adjoint(), k);
    let range = orthonormal_range(p_to, k);
    let lhs = left.adjoint() * &range;
    let rhs = left.adjoint() * basis;
    let c = lhs.lu().solve(&rhs).unwrap_or_else(|| CMatrix::identity(k, k));
    range * c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvansOptions {
    /// Truncation point; defaults to the problem's own.
    pub x_max: Option<f64>,
    /// Accepted frame change between a step count and its double.
    pub frame_tol: f64,
    pub max_refinements: usize,
    /// Step bound `h * rho(A_inf) <= safety` keeping the Magnus exponent moderate.
    pub safety: f64,
    /// Largest spectral-parameter increment per Kato step, relative to `1 + |lambda|`.
    pub kato_step: f64,
    /// Anchor used by [`EvansFunction::eval`].
    pub reference: Complex64,
}

impl Default for EvansOptions {
    fn default() -> Self {
        Self {
            x_max: None,
            frame_tol: 1e-8,
            max_refinements: 5,
            safety: 2.0,
            kato_step: 0.02,
            reference: Complex64::new(1.0, 0.0),
        }
    }
}

/// Decaying frame at `x = 0` with its normalization.
#[derive(Debug, Clone)]
pub struct EvansFrame {
    pub lambda: Complex64,
    pub k_plus: usize,
    /// Orthonormal columns spanning the decaying manifold at `x = 0`.
    pub phi_plus: CMatrix,
    pub phi_zero: CMatrix,
    /// Log of the factor between `phi_plus` and the analytically normalized frame,
    /// including the limiting growth `tr(P A_inf) x_max`.
    pub log_scale: Complex64,
    pub steps: usize,
    /// Frame change measured against half the steps.
    pub change: f64,
}

impl EvansFrame {
    pub fn log_determinant(&self) -> Complex64 {
        let mut m = CMatrix::zeros(self.phi_zero.nrows(), self.phi_zero.ncols() + self.k_plus);
        m.columns_mut(0, self.phi_zero.ncols()).copy_from(&self.phi_zero);
        m.columns_mut(self.phi_zero.ncols(), self.k_plus).copy_from(&self.phi_plus);
        det(&m).ln() + self.log_scale
    }

    pub fn determinant(&self) -> Complex64 {
        self.log_determinant().exp()
    }
}

type CoefficientTable = Vec<(CMatrix, CMatrix)>;

/// Evans function of one problem with cached coefficient tables.
pub struct EvansFunction {
    problem: Arc<dyn EvansProblem>,
    options: EvansOptions,
    phi_zero: CMatrix,
    x_max: f64,
    tables: Mutex<HashMap<usize, Arc<CoefficientTable>>>,
}

impl EvansFunction {
    pub fn new(problem: Arc<dyn EvansProblem>, options: EvansOptions) -> Result<Self, EvansError> {
        let phi_zero = problem.boundary_basis()?;
        let x_max = options.x_max.unwrap_or_else(|| problem.x_max());
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(EvansError::InvalidInput(format!("x_max must be positive, got {x_max}")));
        }
        Ok(Self { problem, options, phi_zero, x_max, tables: Mutex::new(HashMap::new()) })
    }

    pub fn problem(&self) -> &Arc<dyn EvansProblem> {
        &self.problem
    }

    pub fn options(&self) -> &EvansOptions {
        &self.options
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn phi_zero(&self) -> &CMatrix {
        &self.phi_zero
    }

    /// Fresh orthonormal basis of the stable subspace at `lambda`.
    pub fn anchor(&self, lambda: Complex64) -> Result<Anchor, EvansError> {
        let split = limiting_split(self.problem.as_ref(), lambda)?;
        let basis = orthonormal_range(&split.projector, split.k_plus);
        Ok(Anchor { basis, split })
    }

    /// Carry an anchor's basis along the straight segment to `lambda`.
    pub fn transport(&self, from: &Anchor, lambda: Complex64) -> Result<Anchor, EvansError> {
        let start = from.lambda();
        let dist = (lambda - start).norm();
        let step = self.options.kato_step * (1.0 + start.norm().min(lambda.norm()));
        let pieces = (dist / step).ceil().max(1.0) as usize;
        let mut basis = from.basis.clone();
        let mut split = from.split.clone();
        for s in 1..=pieces {
            let mu = start + (lambda - start) * (s as f64 / pieces as f64);
            let next = limiting_split(self.problem.as_ref(), mu)?;
            if next.k_plus != split.k_plus {
                return Err(EvansError::CenterEigenvalue { lambda: mu });
            }
            basis = kato_step(&basis, &split.projector, &next.projector, next.k_plus);
            split = next;
        }
        Ok(Anchor { basis, split })
    }

    /// Coefficients at the two Gauss points of every step, ordered from the wall.
    fn table(&self, steps: usize) -> Result<Arc<CoefficientTable>, EvansError> {
        if let Some(t) = self.tables.lock().expect("table cache poisoned").get(&steps) {
            return Ok(t.clone());
        }
        let h = self.x_max / steps as f64;
        let offset = 3f64.sqrt() / 6.0;
        let table = (0..steps)
            .flat_map(|s| [(s as f64 + 0.5 - offset) * h, (s as f64 + 0.5 + offset) * h])
            .map(|x| self.problem.coefficient(x))
            .collect::<Result<Vec<_>, _>>()?;
        let table = Arc::new(table);
        self.tables.lock().expect("table cache poisoned").insert(steps, table.clone());
        Ok(table)
    }

    fn initial_steps(&self, split: &LimitingSplit) -> usize {
        let stiff = (self.x_max * spectral_radius(&split.matrix) / self.options.safety).ceil() as usize;
        stiff.max(self.problem.resolution_steps()).max(16).next_power_of_two()
    }

    /// Backward fourth-order Magnus steps with a QR step after each.
    fn integrate(&self, anchor: &Anchor, steps: usize) -> Result<(CMatrix, Complex64), EvansError> {
        let table = self.table(steps)?;
        let lambda = anchor.lambda();
        let h = -self.x_max / steps as f64;
        let commutator_weight = Complex64::from(3f64.sqrt() * h * h / 12.0);
        let mut y = anchor.basis.clone();
        let mut log_scale = anchor.split.stable_trace * self.x_max;
        for s in (0..steps).rev() {
            // marching backward, the first Gauss point of the step is the one farther out
            let a1 = affine(&table[2 * s + 1], lambda);
            let a2 = affine(&table[2 * s], lambda);
            let omega = (&a1 + &a2) * Complex64::from(0.5 * h) + (&a2 * &a1 - &a1 * &a2) * commutator_weight;
            let (q, r) = thin_qr(&(omega.exp() * &y));
            for i in 0..r.nrows() {
                let rii = r[(i, i)];
                if rii.norm() == 0.0 || !rii.is_finite() {
                    return Err(EvansError::StiffnessFailure { lambda, change: f64::INFINITY });
                }
                log_scale += rii.ln();
            }
            y = q;
        }
        Ok((y, log_scale))
    }

    /// Decaying frame at `x = 0`, doubling the step count until it settles.
    pub fn frame(&self, anchor: &Anchor) -> Result<EvansFrame, EvansError> {
        let phase = self.problem.phase_dim();
        let k = anchor.split.k_plus;
        if self.phi_zero.ncols() + k != phase {
            return Err(EvansError::DimensionMismatch { boundary: self.phi_zero.ncols(), decaying: k, phase });
        }
        let lambda = anchor.lambda();
        let mut steps = self.initial_steps(&anchor.split);
        let (mut q, mut ls) = self.integrate(anchor, steps)?;
        let mut change = f64::INFINITY;
        for _ in 0..=self.options.max_refinements {
            steps *= 2;
            let (q2, ls2) = self.integrate(anchor, steps)?;
            let angle = crate::linalg::subspace_distance(&q, &q2);
            let volume = (det(&(q2.adjoint() * &q)) * (ls - ls2).exp() - 1.0).norm();
            change = angle.max(volume);
            q = q2;
            ls = ls2;
            if change <= self.options.frame_tol {
                return Ok(EvansFrame {
                    lambda,
                    k_plus: k,
                    phi_plus: q,
                    phi_zero: self.phi_zero.clone(),
                    log_scale: ls,
                    steps,
                    change,
                });
            }
        }
        Err(EvansError::StiffnessFailure { lambda, change })
    }

    /// `D(lambda)` with the basis carried straight from the reference anchor.
    pub fn eval(&self, lambda: Complex64) -> Result<Complex64, EvansError> {
        Ok(self.frame_at(lambda)?.determinant())
    }

    pub fn frame_at(&self, lambda: Complex64) -> Result<EvansFrame, EvansError> {
        let anchor = self.anchor(self.options.reference)?;
        self.frame(&self.transport(&anchor, lambda)?)
    }

    /// Frames along a path, carrying the basis from sample to sample.
    pub fn along_path(&self, path: &[Complex64]) -> Result<Vec<EvansFrame>, EvansError> {
        if path.is_empty() {
            return Ok(Vec::new());
        }
        let mut anchors = Vec::with_capacity(path.len());
        anchors.push(self.anchor(path[0])?);
        for &lambda in &path[1..] {
            let next = self.transport(anchors.last().expect("nonempty"), lambda)?;
            anchors.push(next);
        }
        anchors.par_iter().map(|a| self.frame(a)).collect()
    }

    /// Zero of `D` by the secant method started from two guesses.
    pub fn find_zero(&self, mut a: Complex64, mut b: Complex64, tol: f64) -> Result<Complex64, EvansError> {
        let mut fa = self.eval(a)?;
        let mut fb = self.eval(b)?;
        for _ in 0..60 {
            let denom = fb - fa;
            if denom.norm() == 0.0 {
                break;
            }
            let c = b - fb * (b - a) / denom;
            a = b;
            fa = fb;
            b = c;
            if (b - a).norm() <= tol * (1.0 + b.norm()) {
                return Ok(b);
            }
            fb = self.eval(b)?;
        }
        Err(EvansError::InvalidInput(format!("secant iteration for a zero did not converge near {b}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_membership() {
        let f = Frequency::on_surface(vec![0.5], 2.0, 0.1);
        assert!(f.surface_offset(0.1).abs() < 1e-15);
        assert!((f.lambda.re + 0.1 * 4.25).abs() < 1e-15);
        assert!(f.rho() > 0.0);
    }

    #[test]
    fn kato_step_stays_in_range() {
        let p0 = CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]));
        let c = Complex64::new(0.1f64.cos(), 0.0);
        let s = Complex64::new(0.1f64.sin(), 0.0);
        let v = crate::linalg::CVector::from_vec(vec![c, s]);
        let p1 = &v * v.adjoint();
        let basis = CMatrix::from_column_slice(2, 1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let next = kato_step(&basis, &p0, &p1, 1);
        assert!((&p1 * &next - &next).norm() < 1e-12);
        // rotation by a small angle keeps the length to second order
        assert!((next.norm() - 1.0).abs() < 1e-2);
    }
}
