//! Numerical checks of the Duhamel formula and of boundary homogenization.

use super::linear::{EvolveOptions, Forcing, LinearizedOperator, Trace};
use super::{l2_norm, DynamicsError};
use crate::linalg::{CMatrix, CVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    /// Largest relative L2 difference over the output times.
    pub residual: f64,
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
}

fn relative(op: &LinearizedOperator, a: &[Complex64], b: &[Complex64]) -> f64 {
    let n = op.size();
    let split = |u: &[Complex64]| -> Vec<CVector> { u.chunks(n).map(CVector::from_column_slice).collect() };
    let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let err = l2_norm(op.grid(), &split(&diff));
    let scale = l2_norm(op.grid(), &split(a));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

fn summarize(times: Vec<f64>, residuals: Vec<f64>) -> IdentityResidual {
    let residual = residuals.iter().copied().fold(0.0, f64::max);
    IdentityResidual { residual, times, residuals }
}

/// Compares the forced solution (zero wall data) with
/// `S(t) U0 + int_0^t S(t - s) f(s) ds`, the integral taken by the trapezoid
/// rule on the time grid and `S` realized by homogeneous solves.
pub fn duhamel_residual(
    op: &LinearizedOperator,
    u0: &[CVector],
    f: Forcing,
    options: &EvolveOptions,
) -> Result<IdentityResidual, DynamicsError> {
    let k = op.wall_conditions();
    let zero_trace = move |_t: f64| CVector::zeros(k);
    let steps = options.steps();
    let every = options.output_every.max(1);
    let outputs = steps / every;
    let dt = options.dt;
    let nodal = |t: f64| op.sample(&|x| f(x, t));

    let mut direct = vec![Vec::new(); outputs];
    op.evolve_with(u0, &zero_trace, Some(&nodal), options, &mut |step, _, u| {
        if step > 0 && step % every == 0 {
            direct[step / every - 1] = u.to_vec();
        }
    })?;
    let mut duhamel = vec![Vec::new(); outputs];
    op.evolve_with(u0, &zero_trace, None, options, &mut |step, _, u| {
        if step > 0 && step % every == 0 {
            duhamel[step / every - 1] = u.to_vec();
        }
    })?;
    let grid = op.grid();
    for source in 0..=steps {
        let data: Vec<CVector> = grid.iter().map(|&x| f(x, source as f64 * dt)).collect();
        let remaining = EvolveOptions { t_end: (steps - source) as f64 * dt, ..*options };
        op.evolve_with(&data, &zero_trace, None, &remaining, &mut |step, _, u| {
            let target = source + step;
            if target == 0 || target % every != 0 {
                return;
            }
            let weight = if source == 0 || step == 0 { 0.5 * dt } else { dt };
            for (acc, v) in duhamel[target / every - 1].iter_mut().zip(u) {
                *acc += v * weight;
            }
        })?;
    }
    let times = (1..=outputs).map(|j| (j * every) as f64 * dt).collect();
    let residuals = direct.iter().zip(&duhamel).map(|(a, b)| relative(op, a, b)).collect();
    Ok(summarize(times, residuals))
}

/// Solves with wall data `h` directly and as `g + V`, where `g = e^{-x} G h(t)`
/// lifts the data (`G` a right inverse of the wall matrix) and `V` has
/// homogeneous wall data, initial value `-g(0)` and forcing `L g - g_t`.
pub fn boundary_homogenization_check(
    op: &LinearizedOperator,
    h: Trace,
    options: &EvolveOptions,
) -> Result<IdentityResidual, DynamicsError> {
    let n = op.size();
    let k = op.wall_conditions();
    let h0 = h(0.0);
    if h0.norm() > 1e-10 {
        return Err(DynamicsError::CompatibilityViolation { trace: h0.norm() });
    }
    let wall = op.wall_matrix();
    let gram = (wall * wall.adjoint())
        .try_inverse()
        .ok_or_else(|| DynamicsError::InvalidInput("wall conditions are not independent".into()))?;
    let right_inverse: CMatrix = wall.adjoint() * gram;
    let profile: Vec<Complex64> = op.grid().iter().map(|&x| Complex64::from((-x).exp())).collect();
    let lift_with = |v: CVector| -> Vec<Complex64> {
        let base = &right_inverse * v;
        profile.iter().flat_map(|e| (&base * *e).iter().copied().collect::<Vec<_>>()).collect()
    };
    let delta = 1e-5;
    let forcing = |t: f64| -> Vec<Complex64> {
        let g = lift_with(h(t));
        let gt = lift_with((h(t + delta) - h(t - delta)) / Complex64::from(2.0 * delta));
        op.apply(&g).iter().zip(&gt).map(|(a, b)| a - b).collect()
    };
    let every = options.output_every.max(1);
    let zeros = vec![CVector::zeros(n); op.grid().len()];
    let mut direct = Vec::new();
    op.evolve_with(&zeros, h, None, options, &mut |step, _, u| {
        if step > 0 && step % every == 0 {
            direct.push(u.to_vec());
        }
    })?;
    let zero_trace = move |_t: f64| CVector::zeros(k);
    let mut residuals = Vec::new();
    let mut times = Vec::new();
    op.evolve_with(&zeros, &zero_trace, Some(&forcing), options, &mut |step, t, v| {
        if step > 0 && step % every == 0 {
            let total: Vec<Complex64> = v.iter().zip(lift_with(h(t))).map(|(a, b)| a + b).collect();
            residuals.push(relative(op, &direct[residuals.len()], &total));
            times.push(t);
        }
    })?;
    Ok(summarize(times, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evans::{resolvent_solve, ResolventOptions, ScalarProblem};
    use crate::profile::uniform_grid;

    fn scalar(v: f64) -> CVector {
        CVector::from_element(1, Complex64::from(v))
    }

    fn level_options(level: u32, t_end: f64) -> EvolveOptions {
        EvolveOptions { dt: 0.1 / 2f64.powi(level as i32), t_end, output_every: 1 << level, smoothing_steps: 0, ..Default::default() }
    }

    fn heat(level: u32) -> LinearizedOperator {
        LinearizedOperator::convection_diffusion(uniform_grid(15.0, 50 * (1 << level) + 1), 1.0, 0.0)
    }

    fn duhamel_levels(f: Forcing, levels: u32) -> Vec<f64> {
        (0..levels)
            .map(|l| {
                let op = heat(l);
                let u0 = vec![scalar(0.0); op.grid().len()];
                duhamel_residual(&op, &u0, f, &level_options(l, 1.0)).unwrap().residual
            })
            .collect()
    }

    #[test]
    fn duhamel_without_forcing_is_exact() {
        let op = heat(1);
        let u0: Vec<CVector> = op.grid().iter().map(|&y| scalar(y * (-y).exp())).collect();
        let r = duhamel_residual(&op, &u0, &|_, _| scalar(0.0), &level_options(1, 1.0)).unwrap();
        assert!(r.residual < 1e-14, "{}", r.residual);
    }

    #[test]
    fn duhamel_converges_at_second_order_for_compatible_forcing() {
        let res = duhamel_levels(&|y, t| scalar(y * (-y).exp() * (-t).exp()), 3);
        for w in res.windows(2) {
            assert!(w[0] / w[1] > 3.7, "{res:?}");
        }
        assert!(res[2] < 3e-4, "{res:?}");
    }

    #[test]
    fn duhamel_with_a_wall_incompatible_forcing_converges_slower() {
        // f(0, 0) != 0 puts a (t - s)^{1/4} layer into the integrand
        let res = duhamel_levels(&|y, t| scalar((-y).exp() * (-t).exp()), 3);
        for w in res.windows(2) {
            assert!(w[0] / w[1] > 1.8, "{res:?}");
        }
    }

    #[test]
    fn constant_forcing_reaches_the_stationary_resolvent() {
        // u_t = u'' + u' + e^{-y}; the steady state solves (L - 0) u = -f
        let op = LinearizedOperator::convection_diffusion(uniform_grid(30.0, 601), 1.0, -1.0);
        let u0 = vec![scalar(0.0); op.grid().len()];
        let opts = EvolveOptions { dt: 0.05, t_end: 80.0, output_every: 100, ..Default::default() };
        let (_, state) = op.evolve(&u0, &|_| scalar(0.0), Some(&|y, _| scalar((-y).exp())), &opts).unwrap();
        let problem = ScalarProblem::convection_diffusion(1.0, -1.0, 30.0);
        let steady =
            resolvent_solve(&problem, Complex64::from(1e-8), &|y| scalar(-(-y).exp()), &ResolventOptions::default())
                .unwrap();
        let max = steady.solution.iter().map(|v| v[0].norm()).fold(0.0, f64::max);
        let mut err = 0.0f64;
        let mut matched = 0;
        for (x, v) in steady.grid.iter().zip(&steady.solution) {
            let i = (x / 0.05).round() as usize;
            if (op.grid()[i] - x).abs() < 1e-9 {
                err = err.max((state.fields[i][0] - v[0]).norm());
                matched += 1;
            }
        }
        assert!(matched > 100, "{matched}");
        assert!(err <= 0.01 * max, "{err} vs {max}");
    }

    #[test]
    fn zero_trace_homogenizes_exactly() {
        let r = boundary_homogenization_check(&heat(1), &|_| scalar(0.0), &level_options(1, 1.0)).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn incompatible_trace_is_rejected() {
        let err = boundary_homogenization_check(&heat(0), &|_| scalar(1.0), &level_options(0, 1.0)).unwrap_err();
        assert!(matches!(err, DynamicsError::CompatibilityViolation { .. }));
    }

    #[test]
    fn homogenization_converges_at_second_order() {
        let res: Vec<f64> = (0..4)
            .map(|l| boundary_homogenization_check(&heat(l), &|t| scalar(1.0 - (-t).exp()), &level_options(l, 2.0)).unwrap().residual)
            .collect();
        assert!(res[2] / res[3] > 3.8, "{res:?}");
        assert!(res[3] < 1e-4, "{res:?}");
    }
}
