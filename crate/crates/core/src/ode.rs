//! Explicit Runge-Kutta integrators for real first-order systems.

use crate::linalg::RVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeFailure {
    /// Step size fell below the representable minimum.
    StepUnderflow { at: f64 },
    /// Right-hand side returned a non-finite value or refused the state.
    Breakdown { at: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 200_000 }
    }
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of `y' = f(x, y)` from `x0` to `x1`
/// (either direction). `f` returns `None` where the field is undefined.
pub fn dopri<F>(f: &F, x0: f64, y0: &RVector, x1: f64, tol: &Tolerances, h_init: Option<f64>) -> Result<RVector, OdeFailure>
where
    F: Fn(f64, &RVector) -> Option<RVector>,
{
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(y0.clone());
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0.clone();
    let mut h = h_init.unwrap_or(span.abs() * 1e-3).min(span.abs()) * dir;
    let mut k: Vec<RVector> = Vec::with_capacity(7);
    for _ in 0..tol.max_steps {
        if (x1 - x) * dir <= 0.0 {
            return Ok(y);
        }
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        k.clear();
        let mut ok = true;
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys.axpy(h * A[s][j], kj, 1.0);
                }
            }
            match f(x + C[s] * h, &ys) {
                Some(v) if v.iter().all(|z| z.is_finite()) => k.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            h *= 0.25;
            if h.abs() < 1e-14 * x.abs().max(1.0) {
                return Err(OdeFailure::Breakdown { at: x });
            }
            continue;
        }
        let mut y5 = y.clone();
        let mut err = RVector::zeros(y.len());
        for s in 0..7 {
            y5.axpy(h * B5[s], &k[s], 1.0);
            err.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
        }
        let scaled = err
            .iter()
            .zip(y.iter().zip(y5.iter()))
            .map(|(e, (a, b))| {
                let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum::<f64>()
            / y.len().max(1) as f64;
        let err_norm = scaled.sqrt();
        if err_norm <= 1.0 {
            x += h;
            y = y5;
            let fac = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.9);
            if h.abs() < 1e-14 * x.abs().max(1.0) {
                return Err(OdeFailure::StepUnderflow { at: x });
            }
        }
    }
    Err(OdeFailure::StepUnderflow { at: x })
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(f: &F, x: f64, y: &RVector, h: f64) -> Option<RVector>
where
    F: Fn(f64, &RVector) -> Option<RVector>,
{
    let k1 = f(x, y)?;
    let k2 = f(x + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = f(x + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = f(x + h, &(y + &k3 * h))?;
    Some(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dopri_exponential() {
        let f = |_x: f64, y: &RVector| Some(-y * 2.0);
        let y = dopri(&f, 0.0, &RVector::from_vec(vec![1.0]), 3.0, &Tolerances::default(), None).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-13);
        let back = dopri(&f, 3.0, &y, 0.0, &Tolerances::default(), None).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rk4_fourth_order() {
        let f = |x: f64, _y: &RVector| Some(RVector::from_vec(vec![x.cos()]));
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = RVector::zeros(1);
            for i in 0..n {
                y = rk4_step(&f, i as f64 * h, &y, h).unwrap();
            }
            (y[0] - 1.0f64.sin()).abs()
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 14.0, "ratio {ratio}");
    }
}
