//! Tangential shear mode about the transverse layer: `rho u_t + m u_y = mu u_yy`.

use super::linear::{EvolveOptions, FarBoundary, LinearizedOperator};
use super::{measure_decay, DynamicsError, NormKind, TrajectoryRecord};
use crate::linalg::{CMatrix, CVector};
use nalgebra::LU;
use num_complex::Complex64;

/// Half-line shear operator with a no-slip wall and a homogeneous far field.
pub fn shear_operator(rho: f64, m: f64, mu: f64, grid: Vec<f64>) -> LinearizedOperator {
    LinearizedOperator::convection_diffusion(grid, mu / rho, m / rho).with_far_boundary(FarBoundary::Dirichlet)
}

/// Decay rate of `e^{i k y}` data under the periodic central-difference shear
/// operator, measured from a Crank-Nicolson run; the continuous value is `mu k^2 / rho`.
pub fn periodic_shear_rate(rho: f64, m: f64, mu: f64, k: f64, nodes: usize) -> Result<f64, DynamicsError> {
    if nodes < 8 || !(k > 0.0) {
        return Err(DynamicsError::InvalidInput("need k > 0 and at least eight nodes".into()));
    }
    let length = 2.0 * std::f64::consts::PI / k;
    let h = length / nodes as f64;
    let (d, v) = (mu / rho, m / rho);
    let mut a = CMatrix::zeros(nodes, nodes);
    for i in 0..nodes {
        let (l, r) = ((i + nodes - 1) % nodes, (i + 1) % nodes);
        a[(i, l)] += Complex64::from(d / (h * h) + v / (2.0 * h));
        a[(i, i)] += Complex64::from(-2.0 * d / (h * h));
        a[(i, r)] += Complex64::from(d / (h * h) - v / (2.0 * h));
    }
    let decay = mu * k * k / rho;
    let options = EvolveOptions { dt: 0.01 / decay, t_end: 3.0 / decay, output_every: 10, ..Default::default() };
    let eye = CMatrix::identity(nodes, nodes);
    let half = Complex64::from(0.5 * options.dt);
    let implicit = LU::new(&eye - &a * half);
    let explicit = &eye + &a * half;
    let mut u = CVector::from_fn(nodes, |i, _| Complex64::from_polar(1.0, k * h * i as f64));
    let mut record = TrajectoryRecord::default();
    for step in 0..=options.steps() {
        if step > 0 {
            u = implicit.solve(&(&explicit * &u)).ok_or_else(|| DynamicsError::InvalidInput("singular step".into()))?;
        }
        if step % options.output_every == 0 {
            record.times.push(step as f64 * options.dt);
            record.l2.push((u.norm_squared() * h).sqrt());
            record.linf.push(u.camax());
        }
    }
    Ok(measure_decay(&record, NormKind::L2, (0.0, options.t_end))?.rate)
}
