//! Exponential weight `alpha` solving `alpha' = -sign(A11) c_* |W'| alpha`, `alpha(0) = 1`.

use crate::linalg::{symmetric_eigen, RMatrix};
use crate::model::{FlowCase, SystemDefinition};
use crate::profile::Profile;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub grid: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `omega = c_* theta1 |W'|`.
    pub omega: Vec<f64>,
    pub c_star: f64,
    /// Smallest `|eig(A11)|` along the profile.
    pub theta1: f64,
    pub case: FlowCase,
    /// `|W'|` at the grid nodes.
    pub slope: Vec<f64>,
}

/// `-sign(A11)`: the weight grows into the interior for outflow.
fn direction(case: FlowCase) -> f64 {
    match case {
        FlowCase::Outflow => 1.0,
        FlowCase::Inflow => -1.0,
    }
}

fn normal_block(sys: &dyn SystemDefinition, profile: &Profile, x: f64) -> RMatrix {
    let h = sys.hyperbolic_size();
    let (u, _) = profile.eval(x);
    sys.sym_a(0, &sys.to_w(&u)).view((0, 0), (h, h)).into_owned()
}

fn w_slope(sys: &dyn SystemDefinition, profile: &Profile, x: f64) -> f64 {
    let (u, du) = profile.eval(x);
    (sys.w_jacobian(&u) * du).norm()
}

pub fn weight_alpha(sys: &dyn SystemDefinition, profile: &Profile, c_star: f64, case: FlowCase) -> WeightProfile {
    let grid = profile.grid.clone();
    let sign = direction(case);
    // three-point Gauss rule per interval on the interpolated profile
    let nodes = [0.5 - 0.15f64.sqrt(), 0.5, 0.5 + 0.15f64.sqrt()];
    let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let mut integral = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        let (a, b) = (grid[i - 1], grid[i]);
        let piece: f64 = nodes.iter().zip(&weights).map(|(t, w)| w * w_slope(sys, profile, a + t * (b - a))).sum();
        integral[i] = integral[i - 1] + piece * (b - a);
    }
    let alpha = integral.iter().map(|s| (sign * c_star * s).exp()).collect();
    let slope: Vec<f64> = grid.iter().map(|&x| w_slope(sys, profile, x)).collect();
    let theta1 = grid
        .iter()
        .map(|&x| symmetric_eigen(&normal_block(sys, profile, x)).0.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    let omega = slope.iter().map(|s| c_star * theta1 * s).collect();
    WeightProfile { grid, alpha, omega, c_star, theta1, case, slope }
}

impl WeightProfile {
    /// `alpha'/alpha` at the grid nodes.
    pub fn log_derivative(&self) -> Vec<f64> {
        self.slope.iter().map(|s| direction(self.case) * self.c_star * s).collect()
    }

    /// Largest eigenvalue of `(alpha'/alpha) A11 + omega` over the grid; nonpositive when the weight is admissible.
    pub fn estimate_residual(&self, sys: &dyn SystemDefinition, profile: &Profile) -> f64 {
        let h = sys.hyperbolic_size();
        self.grid
            .iter()
            .zip(self.log_derivative())
            .zip(&self.omega)
            .map(|((&x, g), w)| {
                let m = normal_block(sys, profile, x) * g + RMatrix::identity(h, h) * *w;
                *symmetric_eigen(&m).0.last().unwrap_or(&f64::NEG_INFINITY)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.alpha.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &a| (lo.min(a), hi.max(a)))
    }

    pub fn uniform(grid: Vec<f64>, case: FlowCase) -> Self {
        let n = grid.len();
        Self { grid, alpha: vec![1.0; n], omega: vec![0.0; n], c_star: 0.0, theta1: 0.0, case, slope: vec![0.0; n] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_isentropic_2d, IsentropicParams};
    use crate::profile::{explicit_transverse, layer_grid};

    fn params() -> IsentropicParams {
        IsentropicParams { rho0: 1.0, v_wall: -0.1, u_inf: 1.0, mu: 0.1, eta: 0.0, a: 1.0, gamma: 2.0 }
    }

    #[test]
    fn constant_profile_has_unit_weight() {
        let sys = build_isentropic_2d(params()).unwrap();
        let profile = Profile::constant(layer_grid(20.0, 50), sys.end_state());
        let w = weight_alpha(&sys, &profile, 3.0, FlowCase::Outflow);
        assert!(w.alpha.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn transverse_layer_closed_form() {
        let p = params();
        let sys = build_isentropic_2d(p).unwrap();
        let profile = explicit_transverse(&p, &layer_grid(40.0, 400)).unwrap();
        let rate = p.rho0 * p.v_wall / p.mu;
        for (case, sign) in [(FlowCase::Outflow, 1.0), (FlowCase::Inflow, -1.0)] {
            let w = weight_alpha(&sys, &profile, 1.0, case);
            for (x, a) in w.grid.iter().zip(&w.alpha) {
                // int_0^y |u'| = u_inf (1 - e^{rate y}), density constant so |W'| = |u'|
                let exact = (sign * p.u_inf * (-(rate * x).exp_m1())).exp();
                assert!((a - exact).abs() < 1e-8, "{x}: {a} vs {exact}");
            }
            assert!(w.alpha.windows(2).all(|p| sign * (p[1] - p[0]) >= 0.0));
        }
        // only the outflow sign matches A11 < 0 of this suction layer
        let w = weight_alpha(&sys, &profile, 1.0, FlowCase::Outflow);
        assert!(w.estimate_residual(&sys, &profile) <= 1e-10);
        let wrong = weight_alpha(&sys, &profile, 1.0, FlowCase::Inflow);
        assert!(wrong.estimate_residual(&sys, &profile) > 0.0);
    }
}
