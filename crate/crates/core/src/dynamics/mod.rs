//! Time integration on the half-line: one linearized transverse mode, the
//! one-dimensional nonlinear equations, and checks of the integral identities.

mod identities;
mod linear;
mod nonlinear;
mod shear;

pub use identities::{boundary_homogenization_check, duhamel_residual, IdentityResidual};
pub use linear::{EvolveOptions, FarBoundary, Forcing, LinearizedOperator, NodalForcing, Trace};
pub use nonlinear::{amplitude_sweep, nonlinear_evolve_1d, NonlinearOptions, NonlinearRun};
pub use shear::{periodic_shear_rate, shear_operator};

use crate::io::{self, IoError};
use crate::linalg::CVector;
use crate::stencil;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("solution blew up at t = {t} (L2 norm {norm:.3e})")]
    BlowUp { t: f64, norm: f64 },
    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("wall data must vanish at t = 0 (|h(0)| = {trace:.3e})")]
    CompatibilityViolation { trace: f64 },
    #[error("decay fit failed: {0}")]
    FitFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone)]
pub struct HalfLineState {
    pub grid: Vec<f64>,
    pub t: f64,
    pub fields: Vec<CVector>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
    /// Euclidean size of the wall data.
    pub boundary: Vec<f64>,
    /// Integrals of the conserved variables (nonlinear runs only).
    pub totals: Vec<Vec<f64>>,
    #[serde(skip)]
    pub snapshots: Vec<Vec<CVector>>,
}

impl TrajectoryRecord {
    /// CSV with columns `t, L2, Linf, B_h` followed by the conserved totals.
    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        let comps = self.totals.first().map_or(0, |v| v.len());
        let mut header: Vec<String> = ["t", "L2", "Linf", "B_h"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=comps).map(|c| format!("total_{c}")));
        let rows: Vec<Vec<f64>> = (0..self.times.len())
            .map(|i| {
                let mut row = vec![self.times[i], self.l2[i], self.linf[i], self.boundary.get(i).copied().unwrap_or(0.0)];
                if let Some(t) = self.totals.get(i) {
                    row.extend(t);
                }
                row
            })
            .collect();
        io::write_table_file(path, &header, &rows)
    }
}

pub(crate) fn l2_norm(grid: &[f64], fields: &[CVector]) -> f64 {
    let sq: Vec<f64> = fields.iter().map(|v| v.norm_squared()).collect();
    stencil::trapezoid(grid, &sq).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L2,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `-d log|U| / dt`; positive for decay.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `log |U(t)|` against `t` over `window`.
pub fn measure_decay(record: &TrajectoryRecord, norm: NormKind, window: (f64, f64)) -> Result<DecayFit, DynamicsError> {
    let values = match norm {
        NormKind::L2 => &record.l2,
        NormKind::Linf => &record.linf,
    };
    let pts: Vec<(f64, f64)> = record
        .times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 3 {
        return Err(DynamicsError::FitFailed(format!("{} samples in the window", pts.len())));
    }
    if pts.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(DynamicsError::FitFailed("norm vanishes inside the window".into()));
    }
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, v)| (a + t, b + v.ln()));
    let (mt, my) = (st / m, sy / m);
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, v) in &pts {
        let (dt, dy) = (t - mt, v.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let r_squared = if syy > 0.0 { sty * sty / (stt * syy) } else { 1.0 };
    Ok(DecayFit { rate: -slope, r_squared, points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(f: impl Fn(f64) -> f64) -> TrajectoryRecord {
        let times: Vec<f64> = (0..=40).map(|i| 0.25 * i as f64).collect();
        let l2 = times.iter().map(|&t| f(t)).collect();
        TrajectoryRecord { times, l2, ..Default::default() }
    }

    #[test]
    fn exponential_rate_is_recovered() {
        let fit = measure_decay(&record(|t| 3.0 * (-0.7 * t).exp()), NormKind::L2, (0.0, 10.0)).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points, 41);
    }

    #[test]
    fn stationary_rate_is_zero() {
        let fit = measure_decay(&record(|_| 2.0), NormKind::L2, (1.0, 9.0)).unwrap();
        assert_eq!(fit.rate, 0.0);
    }

    #[test]
    fn fit_needs_samples_and_positive_norms() {
        assert!(matches!(measure_decay(&record(|_| 1.0), NormKind::L2, (20.0, 30.0)), Err(DynamicsError::FitFailed(_))));
        assert!(matches!(measure_decay(&record(|_| 0.0), NormKind::L2, (0.0, 10.0)), Err(DynamicsError::FitFailed(_))));
    }
}
