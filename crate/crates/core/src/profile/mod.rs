//! Standing boundary-layer profiles `U(x1)` connecting a wall state to `U+`.

mod shooting;

pub use shooting::{profile_ode_residual, solve_profile, solve_profile_with, Integrator, ShootingOptions, WallConstraints};

use crate::io::{self, IoError};
use crate::linalg::RVector;
use crate::model::{EndState, IsentropicParams, SystemDefinition};
use crate::stencil;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ProfileError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no connection to the wall data (best residual {residual:.3e})")]
    NoConnection { residual: f64 },
    #[error("{} distinct profiles match the wall data", profiles.len())]
    NonuniqueOutflow { profiles: Vec<Profile> },
    #[error("decay fit failed for derivative order {order}: {reason}")]
    FitFailed { order: usize, reason: String },
    #[error("profile equation is singular at x1 = {x}")]
    SingularReduction { x: f64 },
    #[error("integration failed at x1 = {x}")]
    IntegrationFailed { x: f64 },
}

#[derive(Debug, Clone)]
pub struct Profile {
    pub grid: Vec<f64>,
    pub values: Vec<RVector>,
    pub derivative: Vec<RVector>,
    pub end_state: EndState,
    pub wall_value: RVector,
    /// Fitted exponential decay rate; `None` when the layer is trivial.
    pub theta_fit: Option<f64>,
    second: Vec<RVector>,
}

/// Nodes on `[0, x_max]`: a geometric block near the wall (first quarter of
/// the nodes, spacing growing by a factor 8) followed by a uniform tail.
pub fn layer_grid(x_max: f64, nodes: usize) -> Vec<f64> {
    let intervals = nodes.max(8) - 1;
    let geometric = intervals / 4;
    let ratio = 8f64.powf(1.0 / geometric as f64);
    let geometric_length = 7.0 / 8.0 / (ratio - 1.0);
    let h_tail = x_max / ((intervals - geometric) as f64 + geometric_length);
    let mut grid = Vec::with_capacity(intervals + 1);
    let mut x = 0.0;
    grid.push(x);
    let mut h = h_tail / 8.0;
    for k in 0..intervals {
        if k < geometric {
            x += h;
            h *= ratio;
        } else {
            x += h_tail;
        }
        grid.push(x);
    }
    *grid.last_mut().expect("grid is nonempty") = x_max;
    grid
}

pub fn uniform_grid(x_max: f64, nodes: usize) -> Vec<f64> {
    let n = nodes.max(2) - 1;
    (0..=n).map(|k| x_max * k as f64 / n as f64).collect()
}

fn quintic_weights(t: f64) -> ([f64; 6], [f64; 6]) {
    let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
    let v = [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
        0.5 * (t3 - 2.0 * t4 + t5),
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
    ];
    let d = [
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
        0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
    ];
    (v, d)
}

impl Profile {
    pub fn new(grid: Vec<f64>, values: Vec<RVector>, derivative: Vec<RVector>, end_state: EndState) -> Self {
        let n = end_state.u_plus.len();
        let mut second = vec![RVector::zeros(n); grid.len()];
        if grid.len() >= 5 {
            for c in 0..n {
                let col: Vec<f64> = derivative.iter().map(|d| d[c]).collect();
                for (i, v) in stencil::derivative(&grid, &col, 1, 5).into_iter().enumerate() {
                    second[i][c] = v;
                }
            }
        }
        let wall_value = values[0].clone();
        let mut p = Self { grid, values, derivative, end_state, wall_value, theta_fit: None, second };
        p.theta_fit = verify_decay(&p, 0).ok().map(|d| d.orders[0].theta);
        p
    }

    /// Profile identically equal to `state`.
    pub fn constant(grid: Vec<f64>, end_state: EndState) -> Self {
        let n = end_state.u_plus.len();
        let values = vec![end_state.u_plus.clone(); grid.len()];
        let derivative = vec![RVector::zeros(n); grid.len()];
        Self::new(grid, values, derivative, end_state)
    }

    pub fn x_max(&self) -> f64 {
        *self.grid.last().expect("grid is nonempty")
    }

    pub fn size(&self) -> usize {
        self.end_state.u_plus.len()
    }

    /// Value and derivative at `x` by quintic Hermite interpolation; `U+` beyond the grid.
    pub fn eval(&self, x: f64) -> (RVector, RVector) {
        let n = self.size();
        if x >= self.x_max() {
            return (self.end_state.u_plus.clone(), RVector::zeros(n));
        }
        let x = x.max(0.0);
        let i = (self.grid.partition_point(|&g| g <= x)).clamp(1, self.grid.len() - 1) - 1;
        let h = self.grid[i + 1] - self.grid[i];
        let t = (x - self.grid[i]) / h;
        let (w, dw) = quintic_weights(t);
        let (y0, y1) = (&self.values[i], &self.values[i + 1]);
        let (d0, d1) = (&self.derivative[i], &self.derivative[i + 1]);
        let (s0, s1) = (&self.second[i], &self.second[i + 1]);
        let value = y0 * w[0] + d0 * (h * w[1]) + s0 * (h * h * w[2]) + s1 * (h * h * w[3]) + d1 * (h * w[4]) + y1 * w[5];
        let slope = (y0 * dw[0] + y1 * dw[5]) / h + d0 * dw[1] + d1 * dw[4] + (s0 * dw[2] + s1 * dw[3]) * h;
        (value, slope)
    }

    /// Largest deviation from the end state over the grid.
    pub fn amplitude(&self) -> f64 {
        self.values.iter().map(|v| (v - &self.end_state.u_plus).amax()).fold(0.0, f64::max)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let n = self.size();
        let mut h = vec!["x1".to_string()];
        h.extend((1..=n).map(|c| format!("U_{c}")));
        h.extend((1..=n).map(|c| format!("dU_{c}")));
        h
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.grid
            .iter()
            .zip(self.values.iter().zip(&self.derivative))
            .map(|(x, (v, d))| {
                let mut row = vec![*x];
                row.extend(v.iter());
                row.extend(d.iter());
                row
            })
            .collect()
    }

    pub fn sidecar(&self) -> ProfileSidecar {
        ProfileSidecar {
            theta_fit: self.theta_fit,
            wall_value: self.wall_value.iter().copied().collect(),
            end_state: self.end_state.u_plus.iter().copied().collect(),
            x_max: self.x_max(),
            nodes: self.grid.len(),
        }
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn write(&self, csv_path: &Path) -> Result<(), IoError> {
        io::write_table_file(csv_path, &self.csv_header(), &self.csv_rows())?;
        io::write_json_file(&csv_path.with_extension("json"), &self.sidecar())
    }

    pub fn read(sys: &dyn SystemDefinition, csv_path: &Path) -> Result<Self, IoError> {
        let (header, rows) = io::read_table_file(csv_path)?;
        let n = (header.len().saturating_sub(1)) / 2;
        if n == 0 || header.len() != 2 * n + 1 || rows.is_empty() {
            return Err(IoError::Malformed("expected columns x1, U_1..U_n, dU_1..dU_n".into()));
        }
        let grid = rows.iter().map(|r| r[0]).collect();
        let values = rows.iter().map(|r| RVector::from_row_slice(&r[1..=n])).collect::<Vec<_>>();
        let derivative = rows.iter().map(|r| RVector::from_row_slice(&r[n + 1..])).collect();
        let end = EndState::new(sys, values.last().cloned().expect("rows nonempty"));
        Ok(Self::new(grid, values, derivative, end))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub theta_fit: Option<f64>,
    pub wall_value: Vec<f64>,
    pub end_state: Vec<f64>,
    pub x_max: f64,
    pub nodes: usize,
}

fn check_outflow(params: &IsentropicParams) -> Result<(), ProfileError> {
    params.validate().map_err(|e| ProfileError::InvalidInput(e.to_string()))?;
    if params.v_wall >= 0.0 {
        return Err(ProfileError::InvalidInput("transverse layers need suction, V < 0".into()));
    }
    Ok(())
}

/// Exact purely tangential layer: `rho = rho0`, `v = V`, `u = u_inf (1 - exp(rho0 V y / mu))`.
pub fn explicit_transverse(params: &IsentropicParams, grid: &[f64]) -> Result<Profile, ProfileError> {
    check_outflow(params)?;
    let (rho, v, u_inf) = (params.rho0, params.v_wall, params.u_inf);
    let rate = rho * v / params.mu;
    let values = grid
        .iter()
        .map(|&y| RVector::from_vec(vec![rho, -rho * u_inf * (rate * y).exp_m1(), rho * v]))
        .collect();
    let derivative = grid.iter().map(|&y| RVector::from_vec(vec![0.0, -rho * u_inf * rate * (rate * y).exp(), 0.0])).collect();
    let sys = crate::model::build_isentropic_2d(*params).map_err(|e| ProfileError::InvalidInput(e.to_string()))?;
    Ok(Profile::new(grid.to_vec(), values, derivative, sys.end_state()))
}

/// Decay rate `rho0 |V| / mu` of the tangential layer.
pub fn transverse_decay_rate(params: &IsentropicParams) -> f64 {
    params.rho0 * params.v_wall.abs() / params.mu
}

/// Wall shear stress `mu u'(0) = u_inf rho0 |V|`.
pub fn drag(params: &IsentropicParams) -> Result<f64, ProfileError> {
    check_outflow(params)?;
    Ok(params.u_inf * params.rho0 * params.v_wall.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub order: usize,
    pub theta: f64,
    pub constant: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub orders: Vec<DecayFit>,
    pub passed: bool,
    /// max/min ratio of the fitted rates.
    pub spread: f64,
}

/// Log-linear fits of `|d^k (U - U+)|` on the tail half of the grid for `k = 0..=k_max`.
pub fn verify_decay(profile: &Profile, k_max: usize) -> Result<DecayReport, ProfileError> {
    let grid = &profile.grid;
    let n = profile.size();
    let x_half = 0.5 * profile.x_max();
    let floor = 1e-14 * (1.0 + profile.end_state.u_plus.amax());
    let mut derivs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k_max + 1);
    derivs.push((0..n).map(|c| profile.values.iter().map(|v| v[c] - profile.end_state.u_plus[c]).collect()).collect());
    if k_max >= 1 {
        derivs.push((0..n).map(|c| profile.derivative.iter().map(|v| v[c]).collect()).collect());
    }
    for k in 2..=k_max {
        let prev = &derivs[k - 1];
        derivs.push(prev.iter().map(|col| stencil::derivative(grid, col, 1, 5)).collect());
    }
    let mut orders = Vec::with_capacity(k_max + 1);
    for (k, cols) in derivs.iter().enumerate() {
        let floor_k = floor * 10f64.powi(k as i32);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, &x) in grid.iter().enumerate() {
            if x < x_half {
                continue;
            }
            let mag = cols.iter().map(|col| col[i] * col[i]).sum::<f64>().sqrt();
            if mag <= floor_k {
                break;
            }
            xs.push(x);
            ys.push(mag.ln());
        }
        if xs.len() < 5 {
            return Err(ProfileError::FitFailed { order: k, reason: "tail at rounding floor before the fit window".into() });
        }
        let m = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / m;
        let my = ys.iter().sum::<f64>() / m;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        orders.push(DecayFit { order: k, theta: -slope, constant: (my - slope * mx).exp(), points: xs.len() });
    }
    let thetas: Vec<f64> = orders.iter().map(|o| o.theta).collect();
    let max = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = thetas.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = max / min;
    Ok(DecayReport { passed: min > 0.0 && spread <= 1.2, orders, spread })
}
