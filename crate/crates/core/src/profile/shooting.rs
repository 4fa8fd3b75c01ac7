//! Backward shooting along the stable manifold of the end state.
//!
//! The integrated profile equation `B11(U) U' = F1(U) - F1(U+)` is solved in
//! the form `M(U) U' = (0, F1_p(U) - F1_p(U+))` with
//! `M = [dF1_h; B11_p]`; the hyperbolic rows keep `F1_h` constant.

use super::{layer_grid, Profile, ProfileError};
use crate::linalg::{real_eigenvalues, stable_projector, to_complex, RMatrix, RVector};
use crate::model::{EndState, FlowCase, IsentropicParams, SystemDefinition};
use crate::ode::{dopri, rk4_step, Tolerances};

/// Dirichlet data for the `W` coordinates at the wall: the parabolic block in
/// the outflow case, all of `W` in the inflow case.
#[derive(Debug, Clone, PartialEq)]
pub struct WallConstraints {
    pub case: FlowCase,
    pub w_values: RVector,
}

impl WallConstraints {
    /// No-slip tangential velocity and prescribed normal velocity; the inflow
    /// case also fixes the wall density to `rho0`.
    pub fn isentropic(params: &IsentropicParams, case: FlowCase) -> Self {
        let w = params.wall_w();
        match case {
            FlowCase::Outflow => Self { case, w_values: w.rows(1, 2).into_owned() },
            FlowCase::Inflow => Self { case, w_values: w },
        }
    }

    fn first_index(&self, n: usize, r: usize) -> usize {
        match self.case {
            FlowCase::Outflow => n - r,
            FlowCase::Inflow => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Dormand-Prince with tight tolerances between grid nodes.
    Adaptive,
    /// One classical RK4 step per grid interval; only for non-stiff verification runs.
    FixedRk4,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    pub nodes: usize,
    pub x_max: Option<f64>,
    pub integrator: Integrator,
    pub rtol: f64,
    /// Relative wall mismatch accepted as a connection.
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { nodes: 400, x_max: None, integrator: Integrator::Adaptive, rtol: 1e-12, residual_tol: 1e-10, max_iterations: 60 }
    }
}

struct ProfileOde<'a> {
    sys: &'a dyn SystemDefinition,
    u_plus: RVector,
    flux_plus: RVector,
}

impl ProfileOde<'_> {
    fn rhs(&self, u: &RVector) -> Option<RVector> {
        if !self.sys.admissible(u) {
            return None;
        }
        let n = self.sys.size();
        let h = self.sys.hyperbolic_size();
        let jac = self.sys.flux_jacobian(0, u);
        let visc = self.sys.viscosity(0, 0, u);
        let mut m = RMatrix::zeros(n, n);
        m.rows_mut(0, h).copy_from(&jac.rows(0, h));
        m.rows_mut(h, n - h).copy_from(&visc.rows(h, n - h));
        let f = self.sys.flux(0, u) - &self.flux_plus;
        let mut rhs = RVector::zeros(n);
        rhs.rows_mut(h, n - h).copy_from(&f.rows(h, n - h));
        let sol = m.lu().solve(&rhs)?;
        sol.iter().all(|x| x.is_finite()).then_some(sol)
    }

    fn jacobian(&self) -> Option<RMatrix> {
        let n = self.sys.size();
        let mut j = RMatrix::zeros(n, n);
        for c in 0..n {
            let h = 1e-7 * self.u_plus[c].abs().max(1.0);
            let mut up = self.u_plus.clone();
            let mut um = self.u_plus.clone();
            up[c] += h;
            um[c] -= h;
            j.set_column(c, &((self.rhs(&up)? - self.rhs(&um)?) / (2.0 * h)));
        }
        Some(j)
    }
}

struct StableManifold {
    basis: RMatrix,
    generator: RMatrix,
    slowest_rate: f64,
}

impl StableManifold {
    /// Linearized connection `Q exp(T x) c` at `x`.
    fn linear(&self, x: f64, c: &RVector) -> RVector {
        &self.basis * ((&self.generator * x).exp() * c)
    }

    /// Point beyond which the linearized manifold is accurate to `delta^2`.
    fn switch_point(&self, c: &RVector, delta: f64, x_max: f64) -> f64 {
        let size = (&self.basis * c).amax();
        if size <= delta || !self.slowest_rate.is_finite() {
            return 0.0;
        }
        ((size / delta).ln() / self.slowest_rate).clamp(0.0, x_max)
    }
}

fn stable_manifold(jac: &RMatrix) -> Option<StableManifold> {
    let n = jac.nrows();
    let eig = real_eigenvalues(jac);
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let stable: Vec<f64> = eig.iter().filter(|z| z.re < -1e-9 * radius).map(|z| -z.re).collect();
    if stable.is_empty() {
        return Some(StableManifold { basis: RMatrix::zeros(n, 0), generator: RMatrix::zeros(0, 0), slowest_rate: f64::INFINITY });
    }
    let slowest = stable.iter().copied().fold(f64::INFINITY, f64::min);
    // shift so that zero modes of the slaved hyperbolic part count as unstable
    let shifted = to_complex(jac) + crate::linalg::CMatrix::identity(n, n) * num_complex::Complex64::from(0.5 * slowest);
    let (p, k) = stable_projector(&shifted)?;
    let p_real = p.map(|z| z.re);
    let svd = p_real.svd(true, false);
    let u = svd.u?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let basis = RMatrix::from_fn(n, k, |i, j| u[(i, idx[j])]);
    let generator = basis.transpose() * jac * &basis;
    Some(StableManifold { basis, generator, slowest_rate: slowest })
}

/// Integrates in deviation variables `U - U+` so that the tiny departure from
/// the end state at `x_max` is resolved to relative accuracy.
fn integrate(ode: &ProfileOde, x0: f64, u0: &RVector, x1: f64, rtol: f64) -> Option<RVector> {
    let f = |_x: f64, z: &RVector| ode.rhs(&(z + &ode.u_plus));
    let z0 = u0 - &ode.u_plus;
    let atol = (1e-3 * rtol * z0.amax()).max(1e-300);
    let tol = Tolerances { rtol, atol, max_steps: 500_000 };
    dopri(&f, x0, &z0, x1, &tol, None).ok().map(|z| z + &ode.u_plus)
}

/// Solves for the layer profile with default options and optional truncation length.
pub fn solve_profile(
    sys: &dyn SystemDefinition,
    end: &EndState,
    wall: &WallConstraints,
    x_max: Option<f64>,
) -> Result<Profile, ProfileError> {
    solve_profile_with(sys, end, wall, &ShootingOptions { x_max, ..Default::default() })
}

pub fn solve_profile_with(
    sys: &dyn SystemDefinition,
    end: &EndState,
    wall: &WallConstraints,
    opts: &ShootingOptions,
) -> Result<Profile, ProfileError> {
    let n = sys.size();
    let r = sys.parabolic_rank();
    let first = wall.first_index(n, r);
    if wall.w_values.len() != n - first {
        return Err(ProfileError::InvalidInput(format!(
            "expected {} wall values for the {:?} case, got {}",
            n - first,
            wall.case,
            wall.w_values.len()
        )));
    }
    let ode = ProfileOde { sys, u_plus: end.u_plus.clone(), flux_plus: sys.flux(0, &end.u_plus) };
    let jac = ode.jacobian().ok_or(ProfileError::SingularReduction { x: f64::INFINITY })?;
    let manifold = stable_manifold(&jac).ok_or(ProfileError::SingularReduction { x: f64::INFINITY })?;
    let k = manifold.basis.ncols();
    let x_max = opts.x_max.unwrap_or(if manifold.slowest_rate.is_finite() { 30.0 / manifold.slowest_rate } else { 30.0 });
    let target = wall.w_values.clone();
    let target_scale = 1.0 + target.amax();
    let tol = opts.residual_tol * target_scale;

    // below this deviation the neglected quadratic terms stay under 1e-12
    let delta = 1e-6 * (1.0 + end.u_plus.amax());
    let residual = |c: &RVector| -> Option<RVector> {
        let xs = manifold.switch_point(c, delta, x_max);
        let us = &end.u_plus + manifold.linear(xs, c);
        let u0 = integrate(&ode, xs, &us, 0.0, opts.rtol)?;
        let w0 = sys.to_w(&u0);
        Some(w0.rows(first, n - first).into_owned() - &target)
    };

    let mut w_guess = end.w_plus.clone();
    w_guess.rows_mut(first, n - first).copy_from(&target);
    let c0 = manifold.basis.transpose() * (sys.from_w(&w_guess) - &end.u_plus);
    let spread = c0.norm().max(1e-12 * target_scale);
    let mut guesses = Vec::new();
    for m in [1.0, 0.5, 2.0, -1.0, 0.25, 4.0, -0.5, -2.0] {
        guesses.push(&c0 * m);
    }
    for i in 0..k {
        for s in [1.0, -1.0] {
            let mut g = c0.clone();
            g[i] += s * spread;
            guesses.push(g);
        }
    }

    let mut solutions: Vec<RVector> = Vec::new();
    let mut best = f64::INFINITY;
    if k == 0 {
        // only the constant state leaves U+ forward; it connects iff the data match
        let r0 = residual(&RVector::zeros(0)).map(|r| r.norm()).unwrap_or(f64::INFINITY);
        if r0 <= tol {
            solutions.push(RVector::zeros(0));
        }
        best = r0;
    }
    for guess in guesses.iter().filter(|_| k > 0) {
        let mut c = guess.clone();
        let Some(mut res) = residual(&c) else { continue };
        let mut lambda = 1e-3;
        for _ in 0..opts.max_iterations {
            let norm = res.norm();
            best = best.min(norm);
            if norm <= tol {
                break;
            }
            let mut jac_c = RMatrix::zeros(res.len(), k);
            let mut ok = true;
            for i in 0..k {
                let h = 1e-7 * (1.0 + c.norm());
                let mut cp = c.clone();
                cp[i] += h;
                match residual(&cp) {
                    Some(rp) => jac_c.set_column(i, &((rp - &res) / h)),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                break;
            }
            let jtj = jac_c.transpose() * &jac_c;
            let jtr = jac_c.transpose() * &res;
            let mut improved = false;
            for _ in 0..12 {
                let mut lhs = jtj.clone();
                for i in 0..k {
                    lhs[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
                }
                let Some(step) = lhs.lu().solve(&jtr) else { break };
                let trial = &c - step;
                if let Some(rt) = residual(&trial) {
                    if rt.norm() < norm {
                        c = trial;
                        res = rt;
                        lambda = (lambda * 0.3).max(1e-12);
                        improved = true;
                        break;
                    }
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        let norm = res.norm();
        best = best.min(norm);
        if norm <= tol && !solutions.iter().any(|s| (s - &c).norm() <= 1e-6 * (1.0 + c.norm())) {
            solutions.push(c);
        }
    }
    if solutions.is_empty() {
        return Err(ProfileError::NoConnection { residual: best });
    }
    let grid = layer_grid(x_max, opts.nodes);
    let mut profiles = Vec::with_capacity(solutions.len());
    for c in &solutions {
        profiles.push(build_profile(&ode, &grid, &manifold, c, manifold.switch_point(c, delta, x_max), end, opts)?);
    }
    if profiles.len() > 1 {
        return Err(ProfileError::NonuniqueOutflow { profiles });
    }
    Ok(profiles.pop().expect("one profile"))
}

fn build_profile(
    ode: &ProfileOde,
    grid: &[f64],
    manifold: &StableManifold,
    c: &RVector,
    x_switch: f64,
    end: &EndState,
    opts: &ShootingOptions,
) -> Result<Profile, ProfileError> {
    let m = grid.len();
    let mut values = vec![end.u_plus.clone(); m];
    for i in (0..m).rev() {
        if grid[i] >= x_switch {
            values[i] = &end.u_plus + manifold.linear(grid[i], c);
            continue;
        }
        let (x0, u0) = if i + 1 == m || grid[i + 1] >= x_switch {
            (x_switch, &end.u_plus + manifold.linear(x_switch, c))
        } else {
            (grid[i + 1], values[i + 1].clone())
        };
        let next = match opts.integrator {
            Integrator::Adaptive => integrate(ode, x0, &u0, grid[i], opts.rtol),
            Integrator::FixedRk4 => {
                let f = |_x: f64, u: &RVector| ode.rhs(u);
                rk4_step(&f, x0, &u0, grid[i] - x0)
            }
        };
        values[i] = next.ok_or(ProfileError::IntegrationFailed { x: grid[i] })?;
    }
    let derivative = values
        .iter()
        .zip(grid)
        .map(|(u, &x)| ode.rhs(u).ok_or(ProfileError::SingularReduction { x }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Profile::new(grid.to_vec(), values, derivative, end.clone()))
}

/// Largest node defect of the profile equation, relative to `1 + |U+|`.
///
/// Re-integrates each grid interval backward with fixed-step RK4 (an
/// integrator independent of the one used for shooting) and adds the drift of
/// the conserved hyperbolic flux.
pub fn profile_ode_residual(sys: &dyn SystemDefinition, profile: &Profile) -> f64 {
    let end = &profile.end_state;
    let ode = ProfileOde { sys, u_plus: end.u_plus.clone(), flux_plus: sys.flux(0, &end.u_plus) };
    let radius = ode
        .jacobian()
        .map(|j| real_eigenvalues(&j).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or(1.0);
    let h_rows = sys.hyperbolic_size();
    let scale = 1.0 + end.u_plus.amax();
    let f = |_x: f64, u: &RVector| ode.rhs(u);
    let mut worst: f64 = 0.0;
    for i in 0..profile.grid.len() - 1 {
        let h = profile.grid[i + 1] - profile.grid[i];
        let steps = ((h * radius / 0.5).ceil() as usize).max(16);
        let dh = -h / steps as f64;
        let mut u = profile.values[i + 1].clone();
        let mut x = profile.grid[i + 1];
        for _ in 0..steps {
            match rk4_step(&f, x, &u, dh) {
                Some(next) => u = next,
                None => return f64::INFINITY,
            }
            x += dh;
        }
        worst = worst.max((u - &profile.values[i]).amax() / scale);
        let drift = (sys.flux(0, &profile.values[i]) - &ode.flux_plus).rows(0, h_rows).amax();
        worst = worst.max(drift / scale);
    }
    worst
}
