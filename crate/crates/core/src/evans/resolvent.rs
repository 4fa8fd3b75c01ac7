//! Resolvent equation `(L - lambda) U = f` as a two-point boundary value problem
//! on `[0, x_max]`, discretized by Hermite-Simpson collocation.
//!
//! Rows: boundary conditions at the wall (annihilators of the boundary basis),
//! one block per interval, and the decay condition `(I - P) Z(x_max) = 0` with
//! `P` the stable projector of the limiting matrix.

use super::{affine, limiting_split, EvansError, EvansProblem};
use crate::linalg::{complex_null_space, orthonormal_range, spectral_radius, BandedMatrix, CMatrix, CVector};
use crate::stencil;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolventOptions {
    /// Fixed interval count; chosen from the coefficients when absent.
    pub intervals: Option<usize>,
    pub x_max: Option<f64>,
    /// Step bound `h * rho(A_inf) <= safety` for the automatic interval count.
    pub safety: f64,
    /// Condition estimate above which the system is reported as nearly singular.
    pub max_condition: f64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self { intervals: None, x_max: None, safety: 0.5, max_condition: 1e13 }
    }
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub grid: Vec<f64>,
    /// Solution components `U` at the grid nodes.
    pub solution: Vec<CVector>,
    pub u_norm: f64,
    /// `((1 + |xi|)^2 |f|^2 + |f'|^2)^{1/2}` in `L^2`.
    pub f_norm: f64,
    pub ratio: f64,
    /// Lower bound for the infinity-norm condition number of the collocation matrix.
    pub condition: f64,
}

fn l2_norm(grid: &[f64], values: &[CVector]) -> f64 {
    let sq: Vec<f64> = values.iter().map(|v| v.norm_squared()).collect();
    stencil::trapezoid(grid, &sq).sqrt()
}

pub fn resolvent_solve(
    problem: &dyn EvansProblem,
    lambda: Complex64,
    forcing: &dyn Fn(f64) -> CVector,
    options: &ResolventOptions,
) -> Result<ResolventSolution, EvansError> {
    let m = problem.phase_dim();
    let q = problem.solution_dim();
    let x_max = options.x_max.unwrap_or_else(|| problem.x_max());
    let split = limiting_split(problem, lambda)?;
    let k = split.k_plus;
    let phi_zero = problem.boundary_basis()?;
    if phi_zero.ncols() + k != m {
        return Err(EvansError::DimensionMismatch { boundary: phi_zero.ncols(), decaying: k, phase: m });
    }
    let intervals = options.intervals.unwrap_or_else(|| {
        let stiff = (x_max * spectral_radius(&split.matrix) / options.safety).ceil() as usize;
        stiff.max(problem.resolution_steps()).max(64)
    });
    let h = x_max / intervals as f64;
    let grid: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();

    let wall_rows = complex_null_space(&phi_zero.adjoint(), 1e-12).adjoint();
    let unstable = CMatrix::identity(m, m) - &split.projector;
    let far_rows = orthonormal_range(&unstable.adjoint(), m - k).adjoint();

    let n_unknowns = (intervals + 1) * m;
    let kl = k + m - 1;
    let ku = (m - 1).max(2 * m - 1 - k.min(2 * m - 1));
    let mut band = BandedMatrix::<Complex64>::zeros(n_unknowns, kl, ku);
    let mut rhs = vec![Complex64::from(0.0); n_unknowns];

    for i in 0..k {
        for j in 0..m {
            band.set(i, j, wall_rows[(i, j)]);
        }
    }

    let eye = CMatrix::identity(m, m);
    let coeff = |x: f64| -> Result<(CMatrix, CVector), EvansError> {
        let a = affine(&problem.coefficient(x)?, lambda);
        let b = problem.forcing(x)? * forcing(x);
        Ok((a, b))
    };
    let (mut a_left, mut b_left) = coeff(0.0)?;
    let c = |v: f64| Complex64::from(v);
    for s in 0..intervals {
        let (a_mid, b_mid) = coeff(grid[s] + 0.5 * h)?;
        let (a_right, b_right) = coeff(grid[s + 1])?;
        let left = -&eye - &a_left * c(h / 6.0) - &a_mid * (&eye * c(0.5) + &a_left * c(h / 8.0)) * c(2.0 * h / 3.0);
        let right = &eye - &a_right * c(h / 6.0) - &a_mid * (&eye * c(0.5) - &a_right * c(h / 8.0)) * c(2.0 * h / 3.0);
        let load = (&b_left + &b_right) * c(h / 6.0) + (&a_mid * (&b_left - &b_right) * c(h / 8.0) + &b_mid) * c(2.0 * h / 3.0);
        let row0 = k + s * m;
        for i in 0..m {
            for j in 0..m {
                band.set(row0 + i, s * m + j, left[(i, j)]);
                band.set(row0 + i, (s + 1) * m + j, right[(i, j)]);
            }
            rhs[row0 + i] = load[i];
        }
        a_left = a_right;
        b_left = b_right;
    }
    let row0 = k + intervals * m;
    for i in 0..m - k {
        for j in 0..m {
            band.set(row0 + i, intervals * m + j, far_rows[(i, j)]);
        }
    }

    let norm = (0..n_unknowns)
        .map(|i| band.row_range(i).map(|j| band.get(i, j).norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let lu = band.factor().ok_or(EvansError::NearSingular { condition: f64::INFINITY })?;
    // a generic right-hand side excites the near-null direction, so |x|/|b| bounds |A^{-1}| from below
    let mut probe: Vec<Complex64> =
        (0..n_unknowns).map(|i| Complex64::new((0.618 * i as f64).sin(), (0.414 * i as f64).cos())).collect();
    let probe_norm = probe.iter().map(|z| z.norm()).fold(0.0, f64::max);
    lu.solve_in_place(&mut probe);
    let condition = norm * probe.iter().map(|z| z.norm()).fold(0.0, f64::max) / probe_norm;
    if !(condition <= options.max_condition) {
        return Err(EvansError::NearSingular { condition });
    }
    lu.solve_in_place(&mut rhs);

    let solution: Vec<CVector> =
        (0..=intervals).map(|s| CVector::from_fn(q, |i, _| rhs[s * m + i])).collect();
    let f_values: Vec<CVector> = grid.iter().map(|&x| forcing(x)).collect();
    let dim_f = f_values.first().map_or(0, |v| v.len());
    let mut f_prime = vec![CVector::zeros(dim_f); grid.len()];
    for comp in 0..dim_f {
        let col: Vec<Complex64> = f_values.iter().map(|v| v[comp]).collect();
        for (i, d) in stencil::derivative_complex(&grid, &col, 1, 5).into_iter().enumerate() {
            f_prime[i][comp] = d;
        }
    }
    let weight = 1.0 + problem.transverse_norm();
    let f_norm = ((weight * l2_norm(&grid, &f_values)).powi(2) + l2_norm(&grid, &f_prime).powi(2)).sqrt();
    let u_norm = l2_norm(&grid, &solution);
    Ok(ResolventSolution { grid, solution, u_norm, f_norm, ratio: u_norm / f_norm, condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evans::{EvansFunction, EvansOptions, ScalarProblem};
    use std::sync::Arc;

    fn real_forcing(f: impl Fn(f64) -> f64 + 'static) -> impl Fn(f64) -> CVector {
        move |x| CVector::from_element(1, Complex64::from(f(x)))
    }

    #[test]
    fn heat_equation_closed_form() {
        // u'' - u = e^{-x}, u(0) = 0, decaying: u = -x e^{-x} / 2
        let problem = ScalarProblem::heat(30.0);
        let f = real_forcing(|x| (-x).exp());
        let sol = resolvent_solve(&problem, Complex64::from(1.0), &f, &ResolventOptions::default()).unwrap();
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for (x, u) in sol.grid.iter().zip(&sol.solution) {
            let exact = -0.5 * x * (-x).exp();
            err = err.max((u[0] - exact).norm());
            scale = scale.max(exact.abs());
        }
        assert!(err / scale <= 1e-6, "relative error {}", err / scale);
    }

    #[test]
    fn high_frequency_scaling_is_bounded() {
        let problem = ScalarProblem::heat(30.0);
        let f = real_forcing(|x| x * (-x).exp());
        let scaled: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&im| {
                let lambda = Complex64::new(1.0, im);
                let sol = resolvent_solve(&problem, lambda, &f, &ResolventOptions::default()).unwrap();
                sol.ratio * lambda.norm().sqrt()
            })
            .collect();
        let max = scaled.iter().cloned().fold(0.0, f64::max);
        assert!(max < 2.0, "{scaled:?}");
    }

    #[test]
    fn ratio_tracks_the_inverse_evans_function() {
        let problem = Arc::new(ScalarProblem::poschl_teller(20.0));
        let evans = EvansFunction::new(problem.clone(), EvansOptions::default()).unwrap();
        let f = real_forcing(|x| x * (-x).exp());
        let products: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| {
                let lambda = Complex64::new(1.0 + eps, 0.5 * eps);
                let sol = resolvent_solve(problem.as_ref(), lambda, &f, &ResolventOptions::default()).unwrap();
                sol.ratio * evans.eval(lambda).unwrap().norm()
            })
            .collect();
        let (lo, hi) = products.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &p| (l.min(p), h.max(p)));
        assert!(hi / lo < 10.0, "{products:?}");
    }

    #[test]
    fn eigenvalue_is_nearly_singular() {
        let problem = ScalarProblem::poschl_teller(20.0);
        let f = real_forcing(|x| (-x).exp());
        let opts = ResolventOptions { max_condition: 1e8, ..ResolventOptions::default() };
        let err = resolvent_solve(&problem, Complex64::from(1.0), &f, &opts).unwrap_err();
        assert!(matches!(err, EvansError::NearSingular { .. }));
    }
}
