//! Constant-coefficient systems given by explicit matrices.

use super::{invalid, ModelError, SystemDefinition};
use crate::linalg::{RMatrix, RVector};
use serde::{Deserialize, Serialize};

/// Matrices in row-major nested form, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedParams {
    pub d: usize,
    pub n: usize,
    pub r: usize,
    /// `a[j]` is the flux Jacobian in direction `j`.
    pub a: Vec<Vec<Vec<f64>>>,
    /// `b[j][k]` is the viscosity matrix `B^{jk}`.
    pub b: Vec<Vec<Vec<Vec<f64>>>>,
    /// Symmetrizer; identity when absent.
    #[serde(default)]
    pub a0: Option<Vec<Vec<f64>>>,
    pub end_state: Vec<f64>,
    #[serde(default)]
    pub wall_state: Option<Vec<f64>>,
}

fn matrix(rows: &[Vec<f64>], n: usize, field: &str) -> Result<RMatrix, ModelError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(field, format!("expected a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(RMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `U_t + sum_j A^j U_j = sum_jk B^{jk} U_jk` with `W = U` and symmetrizer `A0`.
#[derive(Debug, Clone)]
pub struct ConstantCoefficientSystem {
    pub d: usize,
    pub n: usize,
    pub r: usize,
    pub a: Vec<RMatrix>,
    pub b: Vec<Vec<RMatrix>>,
    pub a0: RMatrix,
}

impl ConstantCoefficientSystem {
    pub fn new(a: Vec<RMatrix>, b: Vec<Vec<RMatrix>>, a0: RMatrix, r: usize) -> Self {
        let d = a.len();
        let n = a0.nrows();
        Self { d, n, r, a, b, a0 }
    }

    pub fn from_params(p: &TabulatedParams) -> Result<Self, ModelError> {
        if p.d == 0 || p.n == 0 || p.r > p.n {
            return Err(invalid("params", "need d >= 1, n >= 1 and r <= n"));
        }
        if p.a.len() != p.d {
            return Err(invalid("params.a", format!("expected {} matrices", p.d)));
        }
        let a = p
            .a
            .iter()
            .enumerate()
            .map(|(j, m)| matrix(m, p.n, &format!("params.a[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        if p.b.len() != p.d || p.b.iter().any(|row| row.len() != p.d) {
            return Err(invalid("params.b", format!("expected a {0}x{0} array of matrices", p.d)));
        }
        let mut b = Vec::with_capacity(p.d);
        for (j, row) in p.b.iter().enumerate() {
            let mut out = Vec::with_capacity(p.d);
            for (k, m) in row.iter().enumerate() {
                let bm = matrix(m, p.n, &format!("params.b[{j}][{k}]"))?;
                let h = p.n - p.r;
                if bm.rows(0, h).iter().any(|x| *x != 0.0) {
                    return Err(invalid(
                        &format!("params.b[{j}][{k}]"),
                        "the first n - r rows must vanish",
                    ));
                }
                out.push(bm);
            }
            b.push(out);
        }
        let a0 = match &p.a0 {
            Some(m) => matrix(m, p.n, "params.a0")?,
            None => RMatrix::identity(p.n, p.n),
        };
        if p.end_state.len() != p.n {
            return Err(invalid("params.end_state", format!("expected {} entries", p.n)));
        }
        if let Some(ws) = &p.wall_state {
            if ws.len() != p.n {
                return Err(invalid("params.wall_state", format!("expected {} entries", p.n)));
            }
        }
        Ok(Self::new(a, b, a0, p.r))
    }
}

impl SystemDefinition for ConstantCoefficientSystem {
    fn name(&self) -> &str {
        "custom-tabulated"
    }

    fn dimension(&self) -> usize {
        self.d
    }

    fn size(&self) -> usize {
        self.n
    }

    fn parabolic_rank(&self) -> usize {
        self.r
    }

    fn flux(&self, j: usize, u: &RVector) -> RVector {
        &self.a[j] * u
    }

    fn flux_jacobian(&self, j: usize, _u: &RVector) -> RMatrix {
        self.a[j].clone()
    }

    fn viscosity(&self, j: usize, k: usize, _u: &RVector) -> RMatrix {
        self.b[j][k].clone()
    }

    fn viscosity_derivative(&self, _j: usize, _k: usize, _u: &RVector, _du: &RVector) -> RMatrix {
        RMatrix::zeros(self.n, self.n)
    }

    fn to_w(&self, u: &RVector) -> RVector {
        u.clone()
    }

    fn from_w(&self, w: &RVector) -> RVector {
        w.clone()
    }

    fn w_jacobian(&self, _u: &RVector) -> RMatrix {
        RMatrix::identity(self.n, self.n)
    }

    fn sym_a0(&self, _w: &RVector) -> RMatrix {
        self.a0.clone()
    }

    fn sym_a(&self, j: usize, _w: &RVector) -> RMatrix {
        &self.a0 * &self.a[j]
    }

    fn sym_b(&self, j: usize, k: usize, _w: &RVector) -> RMatrix {
        &self.a0 * &self.b[j][k]
    }
}
