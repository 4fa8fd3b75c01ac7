//! Stability maps over the isentropic parameters: drag, condition (D) margin
//! and total winding for each point. Points are independent; a failing point
//! is recorded in its row and the sweep goes on.

use crate::evans::{check_condition_d, Contour, EvansFunction, EvansOptions, LayerProblem, WindingOptions};
use crate::io::{IoError, SCHEMA_VERSION};
use crate::model::{build_isentropic_2d, FlowCase, IsentropicParams, SystemDefinition};
use crate::profile::{drag, explicit_transverse, layer_grid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

/// Parameter grid; every combination of the two axes is one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axes", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepGrid {
    /// Wall velocity against far-field tangential velocity.
    VelocityDrift { base: IsentropicParams, v_wall: Vec<f64>, u_inf: Vec<f64> },
    /// Adiabatic exponent against layer amplitude (the tangential jump `u_inf`).
    GammaAmplitude { base: IsentropicParams, gamma: Vec<f64>, amplitude: Vec<f64> },
}

impl SweepGrid {
    pub fn points(&self) -> Vec<IsentropicParams> {
        match self {
            SweepGrid::VelocityDrift { base, v_wall, u_inf } => v_wall
                .iter()
                .flat_map(|&v| u_inf.iter().map(move |&u| IsentropicParams { v_wall: v, u_inf: u, ..*base }))
                .collect(),
            SweepGrid::GammaAmplitude { base, gamma, amplitude } => gamma
                .iter()
                .flat_map(|&g| amplitude.iter().map(move |&a| IsentropicParams { gamma: g, u_inf: a, ..*base }))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub xi_grid: Vec<f64>,
    /// Semicircle radius of the spectral region.
    pub radius: f64,
    /// Radius of the ball cut out around the origin at `xi = 0`.
    pub origin_ball: f64,
    pub margin_tol: f64,
    pub profile_nodes: usize,
    /// Profile truncation in units of the decay length `mu / (rho0 |V|)`.
    pub decay_lengths: f64,
    pub winding: WindingOptions,
    pub evans: EvansOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            xi_grid: vec![0.0, 0.5, 1.0],
            radius: 10.0,
            origin_ball: 1e-3,
            margin_tol: 1e-8,
            profile_nodes: 400,
            decay_lengths: 30.0,
            winding: WindingOptions::default(),
            evans: EvansOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    #[serde(rename = "V")]
    pub v_wall: f64,
    pub u_inf: f64,
    pub gamma: f64,
    pub mu: f64,
    pub drag: Option<f64>,
    pub theta: Option<f64>,
    #[serde(rename = "min_abs_D")]
    pub min_abs_d: Option<f64>,
    /// Smallest `min |D| / max |D|` over the frequencies.
    pub margin: Option<f64>,
    pub winding_total: Option<i64>,
    pub passed: bool,
    pub error: Option<String>,
}

fn failed(index: usize, p: &IsentropicParams, error: String) -> SweepRow {
    SweepRow {
        index,
        v_wall: p.v_wall,
        u_inf: p.u_inf,
        gamma: p.gamma,
        mu: p.mu,
        drag: None,
        theta: None,
        min_abs_d: None,
        margin: None,
        winding_total: None,
        passed: false,
        error: Some(error),
    }
}

pub fn sweep_point(index: usize, params: &IsentropicParams, options: &SweepOptions) -> SweepRow {
    let base = failed(index, params, String::new());
    let drag = match drag(params) {
        Ok(d) => d,
        Err(e) => return failed(index, params, e.to_string()),
    };
    let sys: Arc<dyn SystemDefinition> = match build_isentropic_2d(*params) {
        Ok(s) => Arc::new(s),
        Err(e) => return failed(index, params, e.to_string()),
    };
    let decay = params.rho0 * params.v_wall.abs() / params.mu;
    let grid = layer_grid(options.decay_lengths / decay, options.profile_nodes);
    let profile = match explicit_transverse(params, &grid) {
        Ok(p) => Arc::new(p),
        Err(e) => return failed(index, params, e.to_string()),
    };
    let make = |xi: &[f64]| {
        let problem = LayerProblem::new(sys.clone(), profile.clone(), xi.to_vec(), FlowCase::Outflow)?;
        EvansFunction::new(Arc::new(problem), options.evans)
    };
    let mut winding_total = 0;
    let mut min_abs_d = f64::INFINITY;
    let mut margin = f64::INFINITY;
    let mut passed = true;
    let mut error = None;
    for &xi in &options.xi_grid {
        let ball = if xi == 0.0 { options.origin_ball } else { 0.0 };
        let contour = Contour::semicircle(options.radius, ball);
        let report = check_condition_d(make, &[vec![xi]], &contour, &options.winding, options.margin_tol);
        passed &= report.passed;
        for entry in report.entries {
            match entry.result {
                Some(r) => {
                    winding_total += r.winding;
                    min_abs_d = min_abs_d.min(r.min_abs_d);
                    margin = margin.min(r.relative_margin());
                }
                None => {
                    error.get_or_insert_with(|| format!("xi = {xi}: {}", entry.error.unwrap_or_default()));
                }
            }
        }
    }
    let any = error.is_none() || min_abs_d.is_finite();
    SweepRow {
        drag: Some(drag),
        theta: profile.theta_fit,
        min_abs_d: any.then_some(min_abs_d).filter(|v| v.is_finite()),
        margin: any.then_some(margin).filter(|v| v.is_finite()),
        winding_total: error.is_none().then_some(winding_total),
        passed: passed && error.is_none(),
        error,
        ..base
    }
}

/// Evaluates every grid point; rows come back in grid order either way.
pub fn run_sweep(points: &[IsentropicParams], options: &SweepOptions, parallel: bool) -> Vec<SweepRow> {
    if parallel {
        points.par_iter().enumerate().map(|(i, p)| sweep_point(i, p, options)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("single-thread pool");
        pool.install(|| points.iter().enumerate().map(|(i, p)| sweep_point(i, p, options)).collect())
    }
}

/// `# schema=1` comment, header, one record per row; absent values are empty fields.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<(), IoError> {
    writeln!(out, "# schema={SCHEMA_VERSION}").map_err(|e| IoError::Malformed(e.to_string()))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "index",
        "V",
        "u_inf",
        "gamma",
        "mu",
        "drag",
        "theta",
        "min_abs_D",
        "margin",
        "winding_total",
        "passed",
        "error",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| IoError::Malformed(e.to_string()))?;
    Ok(())
}
