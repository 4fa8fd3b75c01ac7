//! Conservative finite-volume scheme for the one-dimensional equations
//! `U_t + F^0(U)_y = (B^{00}(U) U_y)_y`.
//!
//! Convective fluxes are explicit (Rusanov with a fixed speed bound), viscous
//! fluxes implicit with `B` frozen at the old state. At the wall the imposed
//! `W` components come from the data and the free ones from the first cell;
//! at `x_max` incoming characteristics are set to the end state.
//!
//! The perturbation is measured against an unperturbed companion run, so the
//! first-order error of the discrete steady state does not enter the norms.

use super::{DynamicsError, TrajectoryRecord};
use crate::linalg::{real_eigenvalues, BandedMatrix, RMatrix, RVector};
use crate::model::{FlowCase, SystemDefinition};
use crate::profile::Profile;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearOptions {
    pub cells: usize,
    pub x_max: f64,
    /// Convective CFL number.
    pub cfl: f64,
    pub t_end: f64,
    pub output_every: usize,
    pub blowup_factor: f64,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        Self { cells: 400, x_max: 20.0, cfl: 0.4, t_end: 100.0, output_every: 50, blowup_factor: 1e6 }
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearRun {
    /// Norms of the perturbation; totals of the perturbed run.
    pub record: TrajectoryRecord,
    /// Largest per-step mismatch between the change of the totals and the boundary fluxes.
    pub max_drift: f64,
    pub dt: f64,
    pub steps: usize,
    pub perturbation: Vec<RVector>,
}

struct Scheme<'a> {
    sys: &'a dyn SystemDefinition,
    case: FlowCase,
    n: usize,
    h: usize,
    dx: f64,
    speed: f64,
    u_plus: RVector,
    wall_w: RVector,
    /// Projector onto the characteristics leaving through `x_max`.
    outgoing: RMatrix,
}

impl<'a> Scheme<'a> {
    fn wall_state(&self, first: &RVector, trace: &RVector) -> RVector {
        let mut w = self.wall_w.clone();
        match self.case {
            FlowCase::Outflow => {
                let inner = self.sys.to_w(first);
                for i in 0..self.h {
                    w[i] = inner[i];
                }
                for i in self.h..self.n {
                    w[i] += trace[i - self.h];
                }
            }
            FlowCase::Inflow => w += trace,
        }
        self.sys.from_w(&w)
    }

    fn far_state(&self, last: &RVector) -> RVector {
        &self.u_plus + &self.outgoing * (last - &self.u_plus)
    }

    fn rusanov(&self, left: &RVector, right: &RVector) -> RVector {
        (self.sys.flux(0, left) + self.sys.flux(0, right)) * 0.5 - (right - left) * (0.5 * self.speed)
    }

    /// One step; returns the new state and the net boundary flux into the domain.
    fn step(&self, u: &[RVector], dt: f64, trace: &RVector) -> (Vec<RVector>, RVector) {
        let (n, cells, dx) = (self.n, u.len(), self.dx);
        let wall = self.wall_state(&u[0], trace);
        let far = self.far_state(&u[cells - 1]);
        let mut conv = Vec::with_capacity(cells + 1);
        conv.push(self.sys.flux(0, &wall));
        for i in 1..cells {
            conv.push(self.rusanov(&u[i - 1], &u[i]));
        }
        conv.push(self.rusanov(&u[cells - 1], &far));
        let star: Vec<RVector> = (0..cells).map(|i| &u[i] - (&conv[i + 1] - &conv[i]) * (dt / dx)).collect();

        // faces: B at the wall state, the face averages and the far state
        let b_wall = self.sys.viscosity(0, 0, &wall);
        let b_far = self.sys.viscosity(0, 0, &far);
        let b_face: Vec<RMatrix> =
            (1..cells).map(|i| self.sys.viscosity(0, 0, &((&u[i - 1] + &u[i]) * 0.5))).collect();
        let mut band = BandedMatrix::<f64>::zeros(cells * n, 2 * n, 2 * n);
        let mut rhs: Vec<f64> = star.iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect();
        let s = dt / (dx * dx);
        for i in 0..cells {
            for a in 0..n {
                band.add(i * n + a, i * n + a, 1.0);
            }
            let mut couple = |j: usize, bm: &RMatrix, scale: f64| {
                for a in 0..n {
                    for b in 0..n {
                        let v = bm[(a, b)] * scale;
                        band.add(i * n + a, i * n + b, v);
                        band.add(i * n + a, j * n + b, -v);
                    }
                }
            };
            if i + 1 < cells {
                couple(i + 1, &b_face[i], s);
            }
            if i > 0 {
                couple(i - 1, &b_face[i - 1], s);
            }
            // half-cell distance to the boundary states
            if i == 0 {
                let v = &b_wall * (2.0 * s);
                for a in 0..n {
                    for b in 0..n {
                        band.add(a, b, v[(a, b)]);
                    }
                }
                let known = &v * &wall;
                for a in 0..n {
                    rhs[a] += known[a];
                }
            }
            if i + 1 == cells {
                let v = &b_far * (2.0 * s);
                for a in 0..n {
                    for b in 0..n {
                        band.add(i * n + a, i * n + b, v[(a, b)]);
                    }
                }
                let known = &v * &far;
                for a in 0..n {
                    rhs[i * n + a] += known[a];
                }
            }
        }
        let lu = band.factor().expect("viscous step matrix is nonsingular");
        lu.solve_in_place(&mut rhs);
        let next: Vec<RVector> = rhs.chunks(n).map(RVector::from_column_slice).collect();
        let g_wall = &b_wall * (&next[0] - &wall) * (2.0 / dx);
        let g_far = &b_far * (&far - &next[cells - 1]) * (2.0 / dx);
        let net = (&conv[0] - &conv[cells]) + (g_far - g_wall);
        (next, net)
    }
}

fn l2(a: &[RVector], b: &[RVector], dx: f64) -> (f64, f64) {
    let mut sq = 0.0;
    let mut sup = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sq += d.norm_squared() * dx;
        sup = sup.max(d.amax());
    }
    (sq.sqrt(), sup)
}

/// Evolves `profile + perturbation` with wall data `profile + trace(t)` and
/// records the difference to the unperturbed run.
pub fn nonlinear_evolve_1d(
    sys: &dyn SystemDefinition,
    profile: &Profile,
    case: FlowCase,
    perturbation: &dyn Fn(f64) -> RVector,
    trace: &dyn Fn(f64) -> RVector,
    options: &NonlinearOptions,
) -> Result<NonlinearRun, DynamicsError> {
    let n = sys.size();
    let r = sys.parabolic_rank();
    if options.cells < 4 || !(options.x_max > 0.0) || !(options.cfl > 0.0) {
        return Err(DynamicsError::InvalidInput("need at least four cells, x_max > 0 and cfl > 0".into()));
    }
    let dx = options.x_max / options.cells as f64;
    let centers: Vec<f64> = (0..options.cells).map(|i| (i as f64 + 0.5) * dx).collect();
    let base: Vec<RVector> = centers.iter().map(|&x| profile.eval(x).0).collect();
    let mut u: Vec<RVector> = base.iter().zip(&centers).map(|(b, &x)| b + perturbation(x)).collect();
    let mut v = base.clone();

    let radius = |s: &RVector| real_eigenvalues(&sys.flux_jacobian(0, s)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let speed = 1.2 * u.iter().chain(&base).map(radius).fold(0.0, f64::max);
    let u_plus = profile.end_state.u_plus.clone();
    let a_plus = sys.flux_jacobian(0, &u_plus);
    let eig = a_plus.clone().complex_eigenvalues();
    let mut outgoing = RMatrix::zeros(n, n);
    // spectral projector onto the positive eigenvalues, one rank-one term per eigenvalue
    for k in 0..n {
        let lam = eig[k].re;
        if lam <= 0.0 {
            continue;
        }
        let mut p = RMatrix::identity(n, n);
        for j in 0..n {
            if j != k {
                let mu = eig[j].re;
                p = p * (&a_plus - RMatrix::identity(n, n) * mu) / (lam - mu);
            }
        }
        outgoing += p;
    }
    let scheme = Scheme {
        sys,
        case,
        n,
        h: n - r,
        dx,
        speed,
        u_plus,
        wall_w: sys.to_w(&profile.wall_value),
        outgoing,
    };
    let dt = options.cfl * dx / speed.max(f64::MIN_POSITIVE);
    let steps = (options.t_end / dt).ceil() as usize;
    let dt = options.t_end / steps as f64;
    let zero_trace = RVector::zeros(match case {
        FlowCase::Outflow => r,
        FlowCase::Inflow => n,
    });
    let totals = |s: &[RVector]| -> RVector { s.iter().fold(RVector::zeros(n), |acc, x| acc + x) * dx };

    let mut record = TrajectoryRecord::default();
    let mut max_drift = 0.0f64;
    let (l2_0, sup_0) = l2(&u, &v, dx);
    let reference = l2_0.max(1e-300);
    let push = |record: &mut TrajectoryRecord, t: f64, l: f64, s: f64, u: &[RVector], h: f64| {
        record.times.push(t);
        record.l2.push(l);
        record.linf.push(s);
        record.boundary.push(h);
        record.totals.push(totals(u).iter().copied().collect());
    };
    push(&mut record, 0.0, l2_0, sup_0, &u, trace(0.0).norm());
    for step in 1..=steps {
        let t = step as f64 * dt;
        let h = trace(t);
        let before = totals(&u);
        let (next, net) = scheme.step(&u, dt, &h);
        let drift = (totals(&next) - before - net * dt).amax();
        max_drift = max_drift.max(drift);
        u = next;
        v = scheme.step(&v, dt, &zero_trace).0;
        if let Some(bad) = u.iter().position(|s| !sys.admissible(s) || s.iter().any(|x| !x.is_finite())) {
            return Err(DynamicsError::StepRejected { t, reason: format!("inadmissible state in cell {bad}") });
        }
        let (l, s) = l2(&u, &v, dx);
        if !(l <= options.blowup_factor * reference.max(1e-3)) {
            return Err(DynamicsError::BlowUp { t, norm: l });
        }
        if step % options.output_every.max(1) == 0 || step == steps {
            push(&mut record, t, l, s, &u, h.norm());
        }
    }
    let perturbation = u.iter().zip(&v).map(|(a, b)| a - b).collect();
    Ok(NonlinearRun { record, max_drift, dt, steps, perturbation })
}

/// Runs `amplitude * shape` perturbations in parallel with zero wall data.
pub fn amplitude_sweep(
    sys: &dyn SystemDefinition,
    profile: &Profile,
    case: FlowCase,
    shape: &(dyn Fn(f64) -> RVector + Sync),
    amplitudes: &[f64],
    options: &NonlinearOptions,
) -> Vec<Result<NonlinearRun, DynamicsError>> {
    let k = match case {
        FlowCase::Outflow => sys.parabolic_rank(),
        FlowCase::Inflow => sys.size(),
    };
    amplitudes
        .par_iter()
        .map(|&a| {
            let pert = |x: f64| shape(x) * a;
            nonlinear_evolve_1d(sys, profile, case, &pert, &|_| RVector::zeros(k), options)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_isentropic_2d, IsentropicParams};
    use crate::profile::{explicit_transverse, layer_grid};

    fn setup() -> (Box<dyn SystemDefinition>, Profile) {
        let params = IsentropicParams { rho0: 1.0, v_wall: -0.1, u_inf: 0.01, mu: 0.1, eta: 0.0, a: 1.0, gamma: 2.0 };
        let sys = build_isentropic_2d(params).unwrap();
        let profile = explicit_transverse(&params, &layer_grid(40.0, 400)).unwrap();
        (Box::new(sys), profile)
    }

    fn bump(n: usize, amplitude: f64) -> impl Fn(f64) -> RVector {
        move |x| RVector::from_fn(n, |i, _| amplitude * x * (-x).exp() * (1.0 + 0.3 * i as f64))
    }

    fn options() -> NonlinearOptions {
        NonlinearOptions { cells: 200, t_end: 30.0, output_every: 100, ..Default::default() }
    }

    #[test]
    fn small_perturbation_decays_conservatively() {
        let (sys, profile) = setup();
        let zero = RVector::zeros(sys.parabolic_rank());
        let run = nonlinear_evolve_1d(sys.as_ref(), &profile, FlowCase::Outflow, &bump(sys.size(), 1e-3), &|_| zero.clone(), &options())
            .unwrap();
        let l2 = &run.record.l2;
        assert!(l2.last().unwrap() < &(0.3 * l2[0]), "{l2:?}");
        assert!(run.max_drift <= 1e-10, "{}", run.max_drift);
    }

    #[test]
    fn zero_perturbation_stays_on_the_companion() {
        let (sys, profile) = setup();
        let zero = RVector::zeros(sys.parabolic_rank());
        let run = nonlinear_evolve_1d(sys.as_ref(), &profile, FlowCase::Outflow, &bump(sys.size(), 0.0), &|_| zero.clone(), &options())
            .unwrap();
        assert!(run.record.l2.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn sweep_is_deterministic() {
        let (sys, profile) = setup();
        let shape = bump(sys.size(), 1.0);
        let opts = NonlinearOptions { t_end: 5.0, ..options() };
        let a = amplitude_sweep(sys.as_ref(), &profile, FlowCase::Outflow, &shape, &[1e-4, 1e-3], &opts);
        let b = amplitude_sweep(sys.as_ref(), &profile, FlowCase::Outflow, &shape, &[1e-4, 1e-3], &opts);
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            assert_eq!(x.record.l2, y.record.l2);
            assert_eq!(x.perturbation, y.perturbation);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let (sys, profile) = setup();
        let zero = RVector::zeros(sys.parabolic_rank());
        let opts = NonlinearOptions { cells: 2, ..options() };
        let err = nonlinear_evolve_1d(sys.as_ref(), &profile, FlowCase::Outflow, &bump(sys.size(), 1e-3), &|_| zero.clone(), &opts);
        assert!(matches!(err, Err(DynamicsError::InvalidInput(_))));
    }
}
