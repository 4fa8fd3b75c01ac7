//! Weighted energy `E_k = <A0 D^k W, D^k W> + M E_{k-1} + eps <K D^k W, D^{k-1} W>`
//! with `<f, g> = int alpha f.g dx1` and `E_0 = <A0 W, W>`.

use crate::linalg::{symmetric_eigen, RMatrix, RVector};
use crate::stencil;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    pub order: usize,
    pub a0: RMatrix,
    pub compensator: RMatrix,
    pub m: f64,
    pub eps: f64,
}

impl EnergyParams {
    /// Defaults: `M = 10 C` with `C = cond(A0)`, and
    /// `eps = min(theta2, 1) lambda_min(A0) / (4 |K|)`.
    pub fn defaults(order: usize, a0: RMatrix, compensator: RMatrix, theta2: f64) -> Self {
        let (vals, _) = symmetric_eigen(&a0);
        let lo = vals[0];
        let hi = *vals.last().expect("nonempty symmetrizer");
        let k_norm = compensator.norm();
        let eps = if k_norm > 0.0 { theta2.clamp(0.0, 1.0) * lo / (4.0 * k_norm) } else { 0.0 };
        Self { order, a0, compensator, m: 10.0 * (hi / lo).max(1.0), eps }
    }

    /// Constants `(c1, c2)` with `c1 |W|_{H^s}^2 <= E_s <= c2 |W|_{H^s}^2` in the
    /// `alpha`-weighted norm; multiply by the bounds of `alpha` for the plain norm.
    pub fn equivalence(&self) -> (f64, f64) {
        let (vals, _) = symmetric_eigen(&self.a0);
        let (lo, hi) = (vals[0], *vals.last().expect("nonempty symmetrizer"));
        let cross = 0.5 * self.eps * self.compensator.norm();
        let mut lower = vec![lo];
        let mut upper = vec![hi];
        for _ in 1..=self.order {
            lower.iter_mut().for_each(|v| *v *= self.m);
            upper.iter_mut().for_each(|v| *v *= self.m);
            let last = lower.len() - 1;
            lower[last] -= cross;
            upper[last] += cross;
            lower.push(lo - cross);
            upper.push(hi + cross);
        }
        (lower.iter().copied().fold(f64::INFINITY, f64::min), upper.iter().copied().fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub energy: f64,
    /// Unweighted `|W|_{H^s}^2`.
    pub sobolev_sq: f64,
    pub l2_sq: f64,
}

impl EnergyValue {
    pub fn ratio(&self) -> f64 {
        self.energy / self.sobolev_sq
    }
}

/// `D^k W` for `k = 0..=order`, each a list of nodal vectors.
pub fn derivatives(grid: &[f64], w: &[RVector], order: usize) -> Vec<Vec<RVector>> {
    let n = w.first().map_or(0, |v| v.len());
    let mut out = vec![w.to_vec()];
    for k in 1..=order {
        let mut level = vec![RVector::zeros(n); grid.len()];
        for c in 0..n {
            let col: Vec<f64> = w.iter().map(|v| v[c]).collect();
            for (i, d) in stencil::derivative(grid, &col, k, k + 5).into_iter().enumerate() {
                level[i][c] = d;
            }
        }
        out.push(level);
    }
    out
}

fn inner(grid: &[f64], alpha: &[f64], m: &RMatrix, f: &[RVector], g: &[RVector]) -> f64 {
    let vals: Vec<f64> = f.iter().zip(g).zip(alpha).map(|((a, b), w)| w * (m * a).dot(b)).collect();
    stencil::trapezoid(grid, &vals)
}

pub fn energy_functional(grid: &[f64], w: &[RVector], alpha: &[f64], params: &EnergyParams) -> EnergyValue {
    let d = derivatives(grid, w, params.order);
    let n = params.a0.nrows();
    let eye = RMatrix::identity(n, n);
    let ones = vec![1.0; grid.len()];
    let mut energy = inner(grid, alpha, &params.a0, &d[0], &d[0]);
    let mut sobolev_sq = inner(grid, &ones, &eye, &d[0], &d[0]);
    let l2_sq = sobolev_sq;
    for k in 1..=params.order {
        energy = inner(grid, alpha, &params.a0, &d[k], &d[k])
            + params.m * energy
            + params.eps * inner(grid, alpha, &params.compensator, &d[k], &d[k - 1]);
        sobolev_sq += inner(grid, &ones, &eye, &d[k], &d[k]);
    }
    EnergyValue { energy, sobolev_sq, l2_sq }
}

/// `sum_k <D^k W, D^k W>` with weight `alpha`.
pub fn weighted_sobolev_sq(grid: &[f64], w: &[RVector], alpha: &[f64], order: usize) -> f64 {
    let d = derivatives(grid, w, order);
    let n = w.first().map_or(0, |v| v.len());
    let eye = RMatrix::identity(n, n);
    d.iter().map(|dk| inner(grid, alpha, &eye, dk, dk)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        crate::profile::uniform_grid(10.0, 401)
    }

    fn field(grid: &[f64], coeffs: &[f64]) -> Vec<RVector> {
        grid.iter()
            .map(|&x| {
                let g = (-0.3 * x * x).exp();
                RVector::from_vec(vec![
                    g * (coeffs[0] * x.sin() + coeffs[1]),
                    g * (coeffs[2] * (2.0 * x).cos() + coeffs[3] * x),
                ])
            })
            .collect()
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let g = grid();
        let w = vec![RVector::zeros(2); g.len()];
        let p = EnergyParams::defaults(2, RMatrix::identity(2, 2), RMatrix::identity(2, 2), 0.5);
        assert_eq!(energy_functional(&g, &w, &vec![1.0; g.len()], &p).energy, 0.0);
    }

    #[test]
    fn definition_collapse_without_compensator() {
        let g = grid();
        let w = field(&g, &[1.0, 0.5, -0.3, 0.2]);
        let p = EnergyParams { order: 1, a0: RMatrix::identity(2, 2), compensator: RMatrix::zeros(2, 2), m: 7.0, eps: 0.3 };
        let e = energy_functional(&g, &w, &vec![1.0; g.len()], &p);
        let d = derivatives(&g, &w, 1);
        let sq = |f: &[RVector]| stencil::trapezoid(&g, &f.iter().map(|v| v.norm_squared()).collect::<Vec<_>>());
        assert!((e.energy - (sq(&d[1]) + 7.0 * sq(&d[0]))).abs() < 1e-12 * e.energy);
    }

    fn skew() -> RMatrix {
        RMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn energy_is_coercive(coeffs in proptest::collection::vec(-2.0f64..2.0, 4), c in 0.0f64..2.0) {
            prop_assume!(coeffs.iter().any(|x| x.abs() > 1e-3));
            let g = grid();
            let w = field(&g, &coeffs);
            let alpha: Vec<f64> = g.iter().map(|x| (c * (1.0 - (-x).exp())).exp()).collect();
            let a0 = RMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
            let p = EnergyParams::defaults(2, a0, skew(), 0.5);
            let (c1, c2) = p.equivalence();
            prop_assert!(c1 > 0.0);
            let e = energy_functional(&g, &w, &alpha, &p);
            let weighted = weighted_sobolev_sq(&g, &w, &alpha, 2);
            prop_assert!(e.energy >= c1 * weighted * (1.0 - 1e-12));
            prop_assert!(e.energy <= c2 * weighted * (1.0 + 1e-12));
        }

        #[test]
        fn weighted_norm_sandwich(coeffs in proptest::collection::vec(-2.0f64..2.0, 4), c in 0.0f64..2.0) {
            let g = grid();
            let w = field(&g, &coeffs);
            let alpha: Vec<f64> = g.iter().map(|x| (c * (1.0 - (-x).exp())).exp()).collect();
            let (lo, hi) = alpha.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &a| (l.min(a), h.max(a)));
            let plain = weighted_sobolev_sq(&g, &w, &vec![1.0; g.len()], 2);
            let weighted = weighted_sobolev_sq(&g, &w, &alpha, 2);
            prop_assert!(weighted >= lo * plain * (1.0 - 1e-12));
            prop_assert!(weighted <= hi * plain * (1.0 + 1e-12));
        }
    }
}
