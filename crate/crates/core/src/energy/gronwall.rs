//! Fit of `E(t) <= C e^{-theta t} E(0) + C int_0^t e^{-theta (t - s)} (|W|^2 + B^2) ds`
//! along a sampled trajectory.

use super::functional::{energy_functional, EnergyParams};
use super::EnergyError;
use crate::io::{self, IoError};
use crate::linalg::RVector;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallSample {
    pub t: f64,
    pub energy: f64,
    /// `|W(t)|_{L^2}^2`.
    pub l2_sq: f64,
    /// Boundary measure `B_h(t)`.
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GronwallOptions {
    pub thetas: Vec<f64>,
    /// Largest constant accepted as feasible.
    pub c_max: f64,
}

impl Default for GronwallOptions {
    fn default() -> Self {
        let thetas = (0..41).map(|k| 10f64.powf(-3.0 + 4.0 * k as f64 / 40.0)).collect();
        Self { thetas, c_max: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub feasible: bool,
    pub theta: f64,
    pub c: f64,
    /// Largest rate on the grid whose constant stays below `c_max`.
    pub max_feasible_theta: Option<f64>,
    /// `(theta, minimal C)` for every rate on the grid.
    pub table: Vec<(f64, f64)>,
    pub samples: usize,
}

/// Minimal constant for a fixed rate.
pub fn minimal_constant(samples: &[GronwallSample], theta: f64) -> f64 {
    let Some(first) = samples.first() else { return 0.0 };
    let forcing = |s: &GronwallSample| s.l2_sq + s.boundary * s.boundary;
    let mut integral = 0.0;
    let mut c = 0.0f64;
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            let prev = &samples[i - 1];
            let dt = s.t - prev.t;
            let decay = (-theta * dt).exp();
            integral = decay * integral + 0.5 * dt * (decay * forcing(prev) + forcing(s));
        }
        let bound = (-theta * (s.t - first.t)).exp() * first.energy + integral;
        if s.energy > 0.0 {
            c = c.max(if bound > 0.0 { s.energy / bound } else { f64::INFINITY });
        }
    }
    c
}

pub fn gronwall_audit(samples: &[GronwallSample], options: &GronwallOptions) -> Result<GronwallReport, EnergyError> {
    let thetas: Vec<f64> = options.thetas.iter().copied().filter(|t| *t > 0.0).collect();
    if thetas.is_empty() {
        return Err(EnergyError::InvalidInput("need at least one positive rate".into()));
    }
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(EnergyError::InvalidInput("sample times must increase".into()));
    }
    let table: Vec<(f64, f64)> = thetas.iter().map(|&th| (th, minimal_constant(samples, th))).collect();
    let (theta, c) = table.iter().copied().fold((thetas[0], f64::INFINITY), |best, p| if p.1 < best.1 { p } else { best });
    if !(c <= options.c_max) {
        return Err(EnergyError::NoFeasiblePair { best_c: c, theta });
    }
    let max_feasible_theta = table.iter().filter(|p| p.1 <= options.c_max).map(|p| p.0).fold(None, |m: Option<f64>, t| {
        Some(m.map_or(t, |v| v.max(t)))
    });
    Ok(GronwallReport { feasible: true, theta, c, max_feasible_theta, table, samples: samples.len() })
}

/// Energy samples for snapshots `(t, W(t))` on a common grid.
pub fn energy_series(
    grid: &[f64],
    snapshots: &[(f64, Vec<RVector>)],
    alpha: &[f64],
    params: &EnergyParams,
    boundary: Option<&[f64]>,
) -> Vec<GronwallSample> {
    snapshots
        .iter()
        .enumerate()
        .map(|(i, (t, w))| {
            let e = energy_functional(grid, w, alpha, params);
            GronwallSample { t: *t, energy: e.energy, l2_sq: e.l2_sq, boundary: boundary.map_or(0.0, |b| b[i]) }
        })
        .collect()
}

/// CSV with columns `t, E_s, L2, B_h`.
pub fn write_energy_csv(path: &Path, samples: &[GronwallSample]) -> Result<(), IoError> {
    let header: Vec<String> = ["t", "E_s", "L2", "B_h"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.t, s.energy, s.l2_sq.sqrt(), s.boundary]).collect();
    io::write_table_file(path, &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMatrix;
    use crate::profile::uniform_grid;
    use std::f64::consts::PI;

    #[test]
    fn heat_trajectory_is_feasible() {
        // u_t = u_xx on (0, pi) with Dirichlet data; the slowest mode decays like e^{-t}
        let grid = uniform_grid(PI, 201);
        let snapshots: Vec<(f64, Vec<RVector>)> = (0..=100)
            .map(|k| {
                let t = 0.05 * k as f64;
                let w = grid
                    .iter()
                    .map(|&x| RVector::from_element(1, (-t).exp() * x.sin() + 0.3 * (-4.0 * t).exp() * (2.0 * x).sin()))
                    .collect();
                (t, w)
            })
            .collect();
        let params = EnergyParams { order: 1, a0: RMatrix::identity(1, 1), compensator: RMatrix::zeros(1, 1), m: 10.0, eps: 0.0 };
        let samples = energy_series(&grid, &snapshots, &vec![1.0; grid.len()], &params, None);
        let report = gronwall_audit(&samples, &GronwallOptions::default()).unwrap();
        assert!(report.c < 10.0, "{report:?}");
        // the constant stays O(1) up to rates near the gap 2
        assert!(report.max_feasible_theta.unwrap() >= 1.0);
    }

    #[test]
    fn zero_trajectory_is_trivially_feasible() {
        let samples: Vec<GronwallSample> =
            (0..10).map(|k| GronwallSample { t: k as f64, energy: 0.0, l2_sq: 0.0, boundary: 0.0 }).collect();
        let report = gronwall_audit(&samples, &GronwallOptions::default()).unwrap();
        assert_eq!(report.c, 0.0);
    }

    #[test]
    fn compression_has_no_feasible_pair() {
        // u_t = x u_x gives u(x, t) = u0(x e^t): |u|^2 = e^{-t} a, |u_x|^2 = e^{t} b
        let (a, b) = (0.3, 0.5);
        let samples: Vec<GronwallSample> = (0..=120)
            .map(|k| {
                let t = 0.1 * k as f64;
                let l2 = (-t).exp() * a;
                GronwallSample { t, energy: t.exp() * b + 10.0 * l2, l2_sq: l2, boundary: 0.0 }
            })
            .collect();
        let err = gronwall_audit(&samples, &GronwallOptions::default()).unwrap_err();
        assert!(matches!(err, EnergyError::NoFeasiblePair { .. }));
    }
}
