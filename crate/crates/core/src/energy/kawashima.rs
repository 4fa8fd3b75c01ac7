//! Skew-symmetric compensators for degenerate viscosity.
//!
//! For a direction `xi` the compensated symbol is
//! `S(K) = sym(B_xi - K A0^{-1} A_xi)` with `A_xi = sum xi_j A^j`,
//! `B_xi = sum xi_j xi_k B^{jk}` in symmetric coordinates. The search maximizes
//! `lambda_min(S(K))` over skew `K`. The objective is concave, so a log-barrier
//! Newton method reaches the optimum without restarts.

use super::EnergyError;
use crate::linalg::{symmetric_eigen, RMatrix, RVector};
use crate::model::SystemDefinition;
use nalgebra::Cholesky;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KawashimaMatrix {
    pub xi: Vec<f64>,
    #[serde(with = "matrix_rows")]
    pub k: RMatrix,
    pub theta2: f64,
    /// The search hit the norm bound on `K`; the margin may be improvable.
    pub at_bound: bool,
}

mod matrix_rows {
    use crate::linalg::RMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &RMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RMatrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        Ok(RMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }
}

/// `(sym(B_xi), A0^{-1} A_xi)` at `w`.
fn symbols(sys: &dyn SystemDefinition, w: &RVector, xi: &[f64]) -> Result<(RMatrix, RMatrix), EnergyError> {
    let n = sys.size();
    let d = sys.dimension();
    if xi.len() != d {
        return Err(EnergyError::InvalidInput(format!("direction has {} components, expected {d}", xi.len())));
    }
    let mut a = RMatrix::zeros(n, n);
    let mut b = RMatrix::zeros(n, n);
    for j in 0..d {
        a += sys.sym_a(j, w) * xi[j];
        for k in 0..d {
            b += sys.sym_b(j, k, w) * (xi[j] * xi[k]);
        }
    }
    let a0_inv = sys
        .sym_a0(w)
        .try_inverse()
        .ok_or_else(|| EnergyError::InvalidInput("symmetrizer is singular".into()))?;
    Ok(((&b + b.transpose()) * 0.5, a0_inv * a))
}

fn sym(m: &RMatrix) -> RMatrix {
    (m + m.transpose()) * 0.5
}

/// `lambda_min(S(K)) / |xi|^2`, computed by a symmetric eigensolver.
pub fn compensated_margin(sys: &dyn SystemDefinition, w: &RVector, k: &RMatrix, xi: &[f64]) -> Result<f64, EnergyError> {
    let (b, m) = symbols(sys, w, xi)?;
    let norm2: f64 = xi.iter().map(|x| x * x).sum();
    let s = b - sym(&(k * m));
    Ok(symmetric_eigen(&s).0[0] / norm2)
}

fn skew_basis(n: usize) -> Vec<RMatrix> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let mut e = RMatrix::zeros(n, n);
            e[(a, b)] = 1.0;
            e[(b, a)] = -1.0;
            out.push(e);
        }
    }
    out
}

struct Barrier {
    s0: RMatrix,
    gens: Vec<RMatrix>,
    radius2: f64,
}

impl Barrier {
    fn slack(&self, x: &[f64]) -> (RMatrix, f64) {
        let p = self.gens.len();
        let n = self.s0.nrows();
        let mut f = &self.s0 - RMatrix::identity(n, n) * x[p];
        for (g, xi) in self.gens.iter().zip(x) {
            f += g * *xi;
        }
        let ball = self.radius2 - x[..p].iter().map(|v| v * v).sum::<f64>();
        (f, ball)
    }

    /// Barrier value, or `None` outside the feasible set.
    fn value(&self, x: &[f64], tau: f64) -> Option<f64> {
        let (f, ball) = self.slack(x);
        if ball <= 0.0 {
            return None;
        }
        let chol = Cholesky::new(f)?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Some(-tau * x[x.len() - 1] - logdet - ball.ln())
    }

    fn newton_step(&self, x: &[f64], tau: f64) -> Option<(Vec<f64>, f64)> {
        let p = self.gens.len();
        let n = self.s0.nrows();
        let (f, ball) = self.slack(x);
        let f_inv = Cholesky::new(f)?.inverse();
        let minus_eye = -RMatrix::identity(n, n);
        let mats: Vec<RMatrix> =
            self.gens.iter().chain(std::iter::once(&minus_eye)).map(|g| &f_inv * g).collect();
        let dim = p + 1;
        let mut grad = nalgebra::DVector::<f64>::zeros(dim);
        let mut hess = RMatrix::zeros(dim, dim);
        for i in 0..dim {
            grad[i] = -mats[i].trace();
            for j in 0..=i {
                let v = (&mats[i] * &mats[j]).trace();
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        grad[p] -= tau;
        for i in 0..p {
            grad[i] += 2.0 * x[i] / ball;
            hess[(i, i)] += 2.0 / ball;
            for j in 0..p {
                hess[(i, j)] += 4.0 * x[i] * x[j] / (ball * ball);
            }
        }
        let step = Cholesky::new(hess)?.solve(&(-&grad));
        let decrement = -grad.dot(&step);
        Some((step.iter().copied().collect(), decrement))
    }

    fn solve(&self, start: Vec<f64>, gap_tol: f64) -> Vec<f64> {
        let n = self.s0.nrows();
        let mut x = start;
        let mut tau = 1.0;
        loop {
            for _ in 0..100 {
                let Some((step, decrement)) = self.newton_step(&x, tau) else { break };
                if decrement < 1e-14 {
                    break;
                }
                let f0 = self.value(&x, tau).expect("iterate stays feasible");
                let mut t = 1.0;
                let mut accepted = false;
                while t > 1e-12 {
                    let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                    if let Some(f1) = self.value(&trial, tau) {
                        if f1 <= f0 - 0.25 * t * decrement {
                            x = trial;
                            accepted = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            if (n + 1) as f64 / tau < gap_tol {
                return x;
            }
            tau *= 8.0;
        }
    }
}

/// Maximizes the compensated dissipation margin at `w` in direction `xi`.
pub fn kawashima_k(sys: &dyn SystemDefinition, w: &RVector, xi: &[f64]) -> Result<KawashimaMatrix, EnergyError> {
    let n = sys.size();
    let norm2: f64 = xi.iter().map(|x| x * x).sum();
    if !(norm2 > 0.0) {
        return Err(EnergyError::InvalidInput("direction must be nonzero".into()));
    }
    let (b, m) = symbols(sys, w, xi)?;
    let scale = b.norm().max(m.norm());
    let mut k = RMatrix::zeros(n, n);
    let mut at_bound = false;
    if m.norm() > 1e-14 * scale && n > 1 {
        let basis = skew_basis(n);
        // work with O(1) entries; K itself is scale free
        let s0 = &b / scale;
        let gens: Vec<RMatrix> = basis.iter().map(|e| -sym(&(e * &m)) / scale).collect();
        let radius = 100.0 * (1.0 + b.norm() / m.norm());
        let barrier = Barrier { s0, gens, radius2: radius * radius };
        let mut start = vec![0.0; basis.len() + 1];
        start[basis.len()] = symmetric_eigen(&barrier.s0).0[0] - 1.0;
        let x = barrier.solve(start, 1e-11);
        for (e, c) in basis.iter().zip(&x) {
            k += e * *c;
        }
        let norm = x[..basis.len()].iter().map(|v| v * v).sum::<f64>().sqrt();
        at_bound = norm > 0.99 * radius;
    }
    let theta2 = symmetric_eigen(&(&b - sym(&(&k * &m)))).0[0] / norm2;
    if theta2 <= 1e-9 * scale / norm2 {
        return Err(EnergyError::Infeasible { theta2, xi: xi.to_vec() });
    }
    Ok(KawashimaMatrix { xi: xi.to_vec(), k, theta2, at_bound })
}

/// Compensators for several directions, searched in parallel.
pub fn kawashima_family(
    sys: &dyn SystemDefinition,
    w: &RVector,
    directions: &[Vec<f64>],
) -> Vec<Result<KawashimaMatrix, EnergyError>> {
    directions.par_iter().map(|xi| kawashima_k(sys, w, xi)).collect()
}
