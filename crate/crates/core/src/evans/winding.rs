//! Argument-principle root counting on closed contours.

use super::{EvansError, EvansFrame, EvansFunction};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Closed contour parametrized by `t` in `[0, 1]`, counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contour {
    Circle { center: Complex64, radius: f64 },
    /// Boundary of `{Re lambda >= shift, |lambda - shift| <= radius}`, indented
    /// into the region by a half-circle of radius `origin_ball` around `shift`
    /// when it is positive.
    Semicircle { radius: f64, origin_ball: f64, shift: f64 },
}

impl Contour {
    pub fn circle(center: Complex64, radius: f64) -> Self {
        Contour::Circle { center, radius }
    }

    pub fn semicircle(radius: f64, origin_ball: f64) -> Self {
        Contour::Semicircle { radius, origin_ball, shift: 0.0 }
    }

    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            Contour::Circle { center, radius } => center + Complex64::from_polar(radius, 2.0 * PI * t),
            Contour::Semicircle { radius, origin_ball, shift } => {
                let base = Complex64::from(shift);
                let arc = |s: f64, r: f64, from: f64, to: f64| base + Complex64::from_polar(r, from + (to - from) * s);
                if origin_ball > 0.0 {
                    // down the axis (log spaced), around the ball, down again, then the outer arc
                    let ratio = origin_ball / radius;
                    if t < 0.25 {
                        base + Complex64::new(0.0, radius * ratio.powf(t / 0.25))
                    } else if t < 0.35 {
                        arc((t - 0.25) / 0.1, origin_ball, FRAC_PI_2, -FRAC_PI_2)
                    } else if t < 0.6 {
                        base - Complex64::new(0.0, origin_ball * ratio.powf(-(t - 0.35) / 0.25))
                    } else {
                        arc((t - 0.6) / 0.4, radius, -FRAC_PI_2, FRAC_PI_2)
                    }
                } else if t < 0.4 {
                    base + Complex64::new(0.0, radius * (1.0 - 2.0 * t / 0.4))
                } else {
                    arc((t - 0.4) / 0.6, radius, -FRAC_PI_2, FRAC_PI_2)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindingOptions {
    pub initial_samples: usize,
    pub max_depth: usize,
    /// Samples with `|D|` below this fraction of the running maximum count as zeros.
    pub zero_threshold: f64,
}

impl Default for WindingOptions {
    fn default() -> Self {
        Self { initial_samples: 64, max_depth: 14, zero_threshold: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingResult {
    pub xi_tilde: Vec<f64>,
    pub contour: Vec<Complex64>,
    pub winding: i64,
    #[serde(rename = "min_abs_D")]
    pub min_abs_d: f64,
    #[serde(rename = "max_abs_D")]
    pub max_abs_d: f64,
    pub refinement_depth: usize,
    /// `|D(end)/D(start) - 1|` after carrying the basis once around the contour.
    pub closure_error: f64,
    pub max_arg_step: f64,
    /// Points moved off the essential spectrum by a small real shift.
    pub perturbed: Vec<Complex64>,
    #[serde(skip)]
    pub values: Vec<Complex64>,
}

impl WindingResult {
    /// `min |D| / max |D|` on the contour.
    pub fn relative_margin(&self) -> f64 {
        if self.max_abs_d > 0.0 {
            self.min_abs_d / self.max_abs_d
        } else {
            0.0
        }
    }
}

struct Sample {
    t: f64,
    lambda: Complex64,
    anchor: super::Anchor,
    d: Complex64,
}

/// Anchor at `lambda`, nudged to the right if it sits on the essential spectrum.
fn guarded<F>(lambda: Complex64, attempt: F, perturbed: &mut Vec<Complex64>) -> Result<(Complex64, super::Anchor), EvansError>
where
    F: Fn(Complex64) -> Result<super::Anchor, EvansError>,
{
    match attempt(lambda) {
        Err(EvansError::CenterEigenvalue { .. }) => {
            let shifted = lambda + 1e-6 * lambda.norm().max(1.0);
            perturbed.push(lambda);
            Ok((shifted, attempt(shifted)?))
        }
        other => other.map(|a| (lambda, a)),
    }
}

fn frames(evans: &EvansFunction, anchors: &[&super::Anchor]) -> Result<Vec<EvansFrame>, EvansError> {
    anchors.par_iter().map(|a| evans.frame(a)).collect()
}

fn arg_step(a: Complex64, b: Complex64) -> f64 {
    (b / a).arg()
}

/// Winding number of `D` around `contour`, bisecting until every argument step is below `pi/2`.
pub fn winding_number(
    evans: &EvansFunction,
    xi_tilde: &[f64],
    contour: &Contour,
    options: &WindingOptions,
) -> Result<WindingResult, EvansError> {
    let n0 = options.initial_samples.max(8);
    let mut perturbed = Vec::new();
    let mut samples: Vec<Sample> = Vec::with_capacity(n0 + 1);
    let mut anchors = Vec::with_capacity(n0 + 1);
    for i in 0..=n0 {
        let t = i as f64 / n0 as f64;
        let target = contour.point(t);
        let (_, anchor) = match anchors.last() {
            None => guarded(target, |l| evans.anchor(l), &mut perturbed)?,
            Some((_, prev)) => guarded(target, |l| evans.transport(prev, l), &mut perturbed)?,
        };
        anchors.push((t, anchor));
    }
    let refs: Vec<&super::Anchor> = anchors.iter().map(|(_, a)| a).collect();
    let fr = frames(evans, &refs)?;
    for ((t, anchor), f) in anchors.into_iter().zip(fr) {
        samples.push(Sample { t, lambda: f.lambda, d: f.determinant(), anchor });
    }

    let mut depth = 0;
    loop {
        let bad: Vec<usize> = (0..samples.len() - 1)
            .filter(|&i| arg_step(samples[i].d, samples[i + 1].d).abs() >= FRAC_PI_2)
            .collect();
        if bad.is_empty() {
            break;
        }
        if depth == options.max_depth {
            let worst = bad.iter().copied().min_by(|&a, &b| samples[a].d.norm().total_cmp(&samples[b].d.norm()));
            return Err(EvansError::ZeroOnContour { lambda: samples[worst.unwrap_or(0)].lambda });
        }
        depth += 1;
        let mut mids = Vec::with_capacity(bad.len());
        for &i in &bad {
            let t = 0.5 * (samples[i].t + samples[i + 1].t);
            let (_, anchor) =
                guarded(contour.point(t), |l| evans.transport(&samples[i].anchor, l), &mut perturbed)?;
            mids.push((i, t, anchor));
        }
        let refs: Vec<&super::Anchor> = mids.iter().map(|(_, _, a)| a).collect();
        let fr = frames(evans, &refs)?;
        // insert from the back so earlier indices stay valid
        for ((i, t, anchor), f) in mids.into_iter().zip(fr).rev() {
            samples.insert(i + 1, Sample { t, lambda: f.lambda, d: f.determinant(), anchor });
        }
    }

    let max_abs = samples.iter().map(|s| s.d.norm()).fold(0.0, f64::max);
    let (min_idx, min_abs) = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.d.norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("samples are nonempty");
    if !(max_abs > 0.0) || min_abs < options.zero_threshold * max_abs {
        return Err(EvansError::ZeroOnContour { lambda: samples[min_idx].lambda });
    }
    let steps: Vec<f64> = samples.windows(2).map(|w| arg_step(w[0].d, w[1].d)).collect();
    let first = samples[0].d;
    let last = samples.last().expect("nonempty").d;
    let closing = arg_step(last, first);
    let total: f64 = steps.iter().sum::<f64>() + closing;
    let max_arg_step = steps.iter().fold(closing.abs(), |m, s| m.max(s.abs()));
    Ok(WindingResult {
        xi_tilde: xi_tilde.to_vec(),
        contour: samples.iter().map(|s| s.lambda).collect(),
        winding: (total / (2.0 * PI)).round() as i64,
        min_abs_d: min_abs,
        max_abs_d: max_abs,
        refinement_depth: depth,
        closure_error: (last / first - 1.0).norm(),
        max_arg_step,
        perturbed,
        values: samples.iter().map(|s| s.d).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionDEntry {
    pub xi_tilde: Vec<f64>,
    pub result: Option<WindingResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionDReport {
    pub passed: bool,
    /// Smallest `min |D| / max |D|` over the frequency grid.
    pub min_margin: f64,
    pub worst_xi: Option<Vec<f64>>,
    pub margin_tol: f64,
    pub entries: Vec<ConditionDEntry>,
}

/// Sweep transverse frequencies; passes iff every winding is zero and the
/// relative margin exceeds `margin_tol`.
pub fn check_condition_d<F>(
    make: F,
    xi_grid: &[Vec<f64>],
    contour: &Contour,
    options: &WindingOptions,
    margin_tol: f64,
) -> ConditionDReport
where
    F: Fn(&[f64]) -> Result<EvansFunction, EvansError> + Sync,
{
    let entries: Vec<ConditionDEntry> = xi_grid
        .par_iter()
        .map(|xi| {
            let outcome = make(xi).and_then(|evans| winding_number(&evans, xi, contour, options));
            match outcome {
                Ok(res) => ConditionDEntry { xi_tilde: xi.clone(), result: Some(res), error: None },
                Err(e) => ConditionDEntry { xi_tilde: xi.clone(), result: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let mut passed = !entries.is_empty();
    let mut min_margin = f64::INFINITY;
    let mut worst: Option<(f64, Vec<f64>)> = None;
    for e in &entries {
        // failures rank below any margin: winding errors first, then nonzero windings
        let score = match &e.result {
            None => -2.0,
            Some(r) if r.winding != 0 => -1.0,
            Some(r) => r.relative_margin(),
        };
        if score < margin_tol {
            passed = false;
        }
        if let Some(r) = &e.result {
            min_margin = min_margin.min(r.relative_margin());
        }
        if worst.as_ref().is_none_or(|(s, _)| score < *s) {
            worst = Some((score, e.xi_tilde.clone()));
        }
    }
    ConditionDReport {
        passed,
        min_margin: if min_margin.is_finite() { min_margin } else { 0.0 },
        worst_xi: worst.map(|(_, xi)| xi),
        margin_tol,
        entries,
    }
}
