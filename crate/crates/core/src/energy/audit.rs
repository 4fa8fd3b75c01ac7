//! Gronwall audit of a linearized per-mode trajectory about a layer profile.
//!
//! The conserved perturbation `U` is mapped to `W' = dW/dU(U_bar) U` node by
//! node; real and imaginary parts enter the (real, quadratic) energy separately.

use super::gronwall::{energy_series, gronwall_audit, GronwallOptions, GronwallReport, GronwallSample};
use super::kawashima::kawashima_k;
use super::weight::weight_alpha;
use super::{EnergyError, EnergyParams};
use crate::dynamics::{EvolveOptions, LinearizedOperator};
use crate::linalg::{CVector, RMatrix, RVector};
use crate::model::{FlowCase, SystemDefinition};
use crate::profile::Profile;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearizedAuditOptions {
    pub order: usize,
    pub c_star: f64,
    pub evolve: EvolveOptions,
    pub gronwall: GronwallOptions,
}

impl Default for LinearizedAuditOptions {
    fn default() -> Self {
        Self {
            order: 1,
            c_star: 1.0,
            evolve: EvolveOptions { dt: 0.02, t_end: 20.0, output_every: 10, ..EvolveOptions::default() },
            gronwall: GronwallOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedAudit {
    pub xi_tilde: Vec<f64>,
    pub report: GronwallReport,
    pub samples: Vec<GronwallSample>,
    pub m: f64,
    pub eps: f64,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.iter().position(|&p| p >= x) {
        None => *ys.last().expect("nonempty weight"),
        Some(0) => ys[0],
        Some(i) => {
            let s = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] + s * (ys[i] - ys[i - 1])
        }
    }
}

/// Evolves `u0` (sampled at the nodes of `grid`) with zero wall data and fits
/// the energy inequality to the resulting trajectory.
pub fn audit_linearized(
    sys: &dyn SystemDefinition,
    profile: &Profile,
    xi_tilde: &[f64],
    case: FlowCase,
    grid: Vec<f64>,
    u0: &[CVector],
    options: &LinearizedAuditOptions,
) -> Result<LinearizedAudit, EnergyError> {
    let op = LinearizedOperator::layer(sys, profile, xi_tilde, case, grid)
        .map_err(|e| EnergyError::InvalidInput(e.to_string()))?;
    let evolve = EvolveOptions { keep_snapshots: true, ..options.evolve };
    let zero = CVector::zeros(op.wall_conditions());
    let (record, _) =
        op.evolve(u0, &|_| zero.clone(), None, &evolve).map_err(|e| EnergyError::InvalidInput(e.to_string()))?;

    let grid = op.grid();
    let jacobians: Vec<RMatrix> = grid.iter().map(|&x| sys.w_jacobian(&profile.eval(x).0)).collect();
    let split = |fields: &[CVector], part: fn(&num_complex::Complex64) -> f64| -> Vec<RVector> {
        fields.iter().zip(&jacobians).map(|(u, j)| j * u.map(|z| part(&z))).collect()
    };
    let re: Vec<(f64, Vec<RVector>)> =
        record.times.iter().zip(&record.snapshots).map(|(&t, f)| (t, split(f, |z| z.re))).collect();
    let im: Vec<(f64, Vec<RVector>)> =
        record.times.iter().zip(&record.snapshots).map(|(&t, f)| (t, split(f, |z| z.im))).collect();

    let weight = weight_alpha(sys, profile, options.c_star, case);
    let alpha: Vec<f64> = grid.iter().map(|&x| interpolate(&weight.grid, &weight.alpha, x)).collect();
    let w_plus = sys.to_w(&profile.end_state.u_plus);
    let mut normal = vec![0.0; sys.dimension()];
    normal[0] = 1.0;
    let (k, theta2) = match kawashima_k(sys, &w_plus, &normal) {
        Ok(km) => (km.k, km.theta2),
        Err(EnergyError::Infeasible { .. }) => (RMatrix::zeros(sys.size(), sys.size()), 0.0),
        Err(e) => return Err(e),
    };
    let params = EnergyParams::defaults(options.order, sys.sym_a0(&w_plus), k, theta2);
    let a = energy_series(grid, &re, &alpha, &params, None);
    let b = energy_series(grid, &im, &alpha, &params, None);
    let samples: Vec<GronwallSample> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| GronwallSample { t: x.t, energy: x.energy + y.energy, l2_sq: x.l2_sq + y.l2_sq, boundary: 0.0 })
        .collect();
    let report = gronwall_audit(&samples, &options.gronwall)?;
    Ok(LinearizedAudit { xi_tilde: xi_tilde.to_vec(), report, samples, m: params.m, eps: params.eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_isentropic_2d, IsentropicParams};
    use crate::profile::{explicit_transverse, layer_grid, uniform_grid};

    #[test]
    fn interpolation_is_piecewise_linear() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [1.0, 3.0, 7.0];
        assert_eq!(interpolate(&xs, &ys, 2.0), 5.0);
        assert_eq!(interpolate(&xs, &ys, -1.0), 1.0);
        assert_eq!(interpolate(&xs, &ys, 9.0), 7.0);
    }

    #[test]
    fn small_layer_modes_admit_an_energy_bound() {
        let params = IsentropicParams { rho0: 1.0, v_wall: -0.1, u_inf: 0.01, mu: 0.1, eta: 0.0, a: 1.0, gamma: 1.4 };
        let sys = build_isentropic_2d(params).unwrap();
        let profile = explicit_transverse(&params, &layer_grid(30.0, 300)).unwrap();
        let grid = uniform_grid(20.0, 201);
        let u0: Vec<CVector> = grid
            .iter()
            .map(|&x| CVector::from_fn(3, |i, _| num_complex::Complex64::from(x * (-(x - 3.0).powi(2)).exp() * (1.0 + i as f64))))
            .collect();
        let options = LinearizedAuditOptions {
            evolve: EvolveOptions { dt: 0.05, t_end: 10.0, output_every: 4, ..EvolveOptions::default() },
            ..LinearizedAuditOptions::default()
        };
        for xi in [0.0, 0.5] {
            let audit = audit_linearized(&sys, &profile, &[xi], FlowCase::Outflow, grid.clone(), &u0, &options).unwrap();
            assert!(audit.report.feasible && audit.report.theta > 0.0, "{:?}", audit.report);
        }
    }
}
