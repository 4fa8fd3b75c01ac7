//! Boundary measure of wall data `h(x~, t)` sampled on a periodic tangential grid.
//!
//! Outflow: `|h|_{H^s} + sum_{i <= [(s+1)/2]} |d_t^i h|_{L^2}`.
//! Inflow: `|h|_{H^s} + sum_{i <= [(s+1)/2]} |d_t^i h2|_{L^2} + sum_{i <= s} |d_t^i h1|_{L^2}`,
//! where `h1` holds the first `hyperbolic` components.

use super::EnergyError;
use crate::model::FlowCase;
use crate::stencil;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub times: Vec<f64>,
    /// Length of the tangential period.
    pub period: f64,
    /// `values[t][j]` is the trace vector at time `t` and tangential node `j`.
    pub values: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    pub case: FlowCase,
    pub order: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Stencil width for a 4th-order time derivative of order `i`.
fn time_width(i: usize) -> usize {
    i + 4
}

/// `|f|_{H^s}^2` of one periodic component by a discrete Fourier sum.
fn sobolev_sq(samples: &[f64], period: f64, s: usize) -> f64 {
    let n = samples.len();
    let mut total = 0.0;
    for k in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in samples.iter().enumerate() {
            let phase = -2.0 * PI * (k * j) as f64 / n as f64;
            re += v * phase.cos();
            im += v * phase.sin();
        }
        // symmetric wavenumber assignment; the Nyquist mode keeps |k|
        let wave = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = 2.0 * PI * wave / period;
        total += (1.0 + xi * xi).powi(s as i32) * (re * re + im * im) / (n * n) as f64;
    }
    total * period
}

/// `|d_t^i h_c|_{L^2}` for components `comps`, at every time.
fn time_derivative_norms(h: &TraceSeries, comps: std::ops::Range<usize>, i: usize) -> Vec<f64> {
    let nt = h.times.len();
    let nx = h.values.first().map_or(0, |v| v.len());
    let mut sq = vec![0.0; nt];
    for c in comps {
        for j in 0..nx {
            let series: Vec<f64> = h.values.iter().map(|row| row[j][c]).collect();
            let d = if i == 0 { series } else { stencil::derivative(&h.times, &series, i, time_width(i)) };
            for (t, v) in d.iter().enumerate() {
                sq[t] += v * v * h.period / nx as f64;
            }
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

pub fn boundary_measure(
    h: &TraceSeries,
    case: FlowCase,
    order: usize,
    hyperbolic: usize,
) -> Result<BoundaryMeasure, EnergyError> {
    let dim = h.values.first().and_then(|r| r.first()).map_or(0, |v| v.len());
    if h.values.len() != h.times.len() || h.values.iter().flatten().any(|v| v.len() != dim) {
        return Err(EnergyError::InvalidInput("trace samples do not match the time grid".into()));
    }
    if hyperbolic > dim {
        return Err(EnergyError::InvalidInput("hyperbolic count exceeds the trace size".into()));
    }
    let half = (order + 1) / 2;
    let top = match case {
        FlowCase::Outflow => half,
        FlowCase::Inflow => if hyperbolic > 0 { order.max(half) } else { half },
    };
    let needed = time_width(top);
    if top > 0 && h.times.len() < needed {
        return Err(EnergyError::InsufficientSampling { order: top, needed, available: h.times.len() });
    }
    let mut values: Vec<f64> = h
        .values
        .iter()
        .map(|row| (0..dim).map(|c| sobolev_sq(&row.iter().map(|v| v[c]).collect::<Vec<_>>(), h.period, order)).sum::<f64>().sqrt())
        .collect();
    let (parabolic, hyper) = match case {
        FlowCase::Outflow => (0..dim, 0..0),
        FlowCase::Inflow => (hyperbolic..dim, 0..hyperbolic),
    };
    for i in 0..=half {
        for (v, d) in values.iter_mut().zip(time_derivative_norms(h, parabolic.clone(), i)) {
            *v += d;
        }
    }
    if !hyper.is_empty() {
        for i in 0..=order {
            for (v, d) in values.iter_mut().zip(time_derivative_norms(h, hyper.clone(), i)) {
                *v += d;
            }
        }
    }
    Ok(BoundaryMeasure { case, order, times: h.times.clone(), values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64, f64) -> Vec<f64>, nt: usize, nx: usize) -> TraceSeries {
        let times: Vec<f64> = (0..nt).map(|k| 2.0 * k as f64 / (nt - 1) as f64).collect();
        let period = 2.0 * PI;
        let xs: Vec<f64> = (0..nx).map(|j| period * j as f64 / nx as f64).collect();
        let values = times.iter().map(|&t| xs.iter().map(|&x| f(x, t)).collect()).collect();
        TraceSeries { times, period, values }
    }

    #[test]
    fn zero_trace_has_zero_measure() {
        let h = series(|_, _| vec![0.0, 0.0], 41, 16);
        let b = boundary_measure(&h, FlowCase::Inflow, 2, 1).unwrap();
        assert!(b.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decaying_sine_closed_form() {
        let h = series(|x, t| vec![(-t).exp() * x.sin()], 401, 32);
        let b = boundary_measure(&h, FlowCase::Outflow, 2, 0).unwrap();
        // |sin|_{H^2} = 2 sqrt(pi), |d_t^i h| = e^{-t} sqrt(pi) for i = 0, 1
        for (t, v) in b.times.iter().zip(&b.values) {
            let exact = 4.0 * PI.sqrt() * (-t).exp();
            assert!((v - exact).abs() < 1e-4, "t = {t}: {v} vs {exact}");
        }
    }

    #[test]
    fn inflow_dominates_outflow_measure_of_parabolic_part() {
        let h = series(|x, t| vec![(t * x.cos()).sin(), (-t).exp() * (2.0 * x).sin() + 0.3 * t], 201, 16);
        let h2 = TraceSeries {
            values: h.values.iter().map(|row| row.iter().map(|v| vec![v[1]]).collect()).collect(),
            ..h.clone()
        };
        let inflow = boundary_measure(&h, FlowCase::Inflow, 3, 1).unwrap();
        let outflow = boundary_measure(&h2, FlowCase::Outflow, 3, 0).unwrap();
        for (a, b) in inflow.values.iter().zip(&outflow.values) {
            assert!(a >= b, "{a} < {b}");
        }
    }

    #[test]
    fn coarse_sampling_is_rejected() {
        let h = series(|x, t| vec![t * x.sin()], 4, 8);
        let err = boundary_measure(&h, FlowCase::Outflow, 4, 0).unwrap_err();
        assert!(matches!(err, EnergyError::InsufficientSampling { order: 2, .. }));
    }
}
