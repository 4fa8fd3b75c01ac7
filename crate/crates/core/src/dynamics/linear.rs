//! Method-of-lines solver for one transverse Fourier mode of the linearized
//! equations, `U_t = L U + f` on `[0, x_max]`.
//!
//! Three-point finite differences in the interior, a one-sided stencil for
//! the free (outgoing) components at the wall, Dirichlet rows for the imposed
//! `W` components, and quadratic extrapolation at `x_max`. Time stepping is
//! Crank-Nicolson, started with four backward Euler half steps so that rough
//! or incompatible data do not excite undamped oscillations.

use super::{l2_norm, DynamicsError, HalfLineState, TrajectoryRecord};
use crate::evans::{operator_terms, OperatorTerms};
use crate::linalg::{to_complex, BandedLu, BandedMatrix, CMatrix, CVector};
use crate::model::{FlowCase, SystemDefinition};
use crate::profile::Profile;
use crate::stencil::fornberg_weights;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Differential,
    /// Wall condition number `k`.
    Wall(usize),
    Far,
}

/// Closure condition at `x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FarBoundary {
    /// Quadratic extrapolation; lets constant states pass through, which puts
    /// a near-neutral eigenvalue into the discrete spectrum.
    #[default]
    Extrapolate,
    /// `U(x_max) = 0`.
    Dirichlet,
}

/// Discretized `L` with its boundary rows.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    grid: Vec<f64>,
    n: usize,
    kinds: Vec<Row>,
    rows: Vec<Vec<(usize, Complex64)>>,
    /// Wall condition matrix acting on `U(0)`.
    wall: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Record norms every this many steps.
    pub output_every: usize,
    pub keep_snapshots: bool,
    /// Growth of the L2 norm over `max(|U0|, 1)` reported as blow-up.
    pub blowup_factor: f64,
    /// Leading steps done as two backward Euler half steps each.
    pub smoothing_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { dt: 0.01, t_end: 1.0, output_every: 10, keep_snapshots: false, blowup_factor: 1e6, smoothing_steps: 2 }
    }
}

impl EvolveOptions {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Pointwise forcing `f(x, t)`.
pub type Forcing<'a> = &'a dyn Fn(f64, f64) -> CVector;
/// Forcing at all nodes at once, flattened node by node.
pub type NodalForcing<'a> = &'a dyn Fn(f64) -> Vec<Complex64>;
/// Wall data `h(t)`.
pub type Trace<'a> = &'a dyn Fn(f64) -> CVector;

fn c(x: f64) -> Complex64 {
    Complex64::from(x)
}

impl LinearizedOperator {
    /// `L U = c2 U'' + c1 U' + c0 U` with the given wall conditions; `wall_rows[k]`
    /// is the component at `x = 0` whose equation is replaced by condition `k`.
    pub fn from_coefficients(
        grid: Vec<f64>,
        coefficients: &dyn Fn(f64) -> (CMatrix, CMatrix, CMatrix),
        wall: CMatrix,
        wall_rows: &[usize],
    ) -> Result<Self, DynamicsError> {
        let n = wall.ncols();
        let nodes = grid.len();
        if nodes < 5 {
            return Err(DynamicsError::InvalidInput("need at least five grid nodes".into()));
        }
        if wall.nrows() != wall_rows.len() || wall_rows.iter().any(|&c| c >= n) {
            return Err(DynamicsError::InvalidInput("wall rows do not match the wall conditions".into()));
        }
        let dim = nodes * n;
        let mut kinds = vec![Row::Differential; dim];
        let mut rows = vec![Vec::new(); dim];
        for (k, &comp) in wall_rows.iter().enumerate() {
            kinds[comp] = Row::Wall(k);
            rows[comp] = (0..n).map(|j| (j, c(1.0) * wall[(k, j)])).collect();
        }
        let last = nodes - 1;
        for comp in 0..n {
            kinds[last * n + comp] = Row::Far;
        }
        for i in 0..last {
            let window: Vec<usize> = if i == 0 { vec![0, 1, 2] } else { vec![i - 1, i, i + 1] };
            let xs: Vec<f64> = window.iter().map(|&j| grid[j]).collect();
            let w = fornberg_weights(grid[i], &xs, 2);
            let (c2, c1, c0) = coefficients(grid[i]);
            for comp in 0..n {
                let row = i * n + comp;
                if kinds[row] != Row::Differential {
                    continue;
                }
                let mut entries = Vec::with_capacity(3 * n);
                for (s, &j) in window.iter().enumerate() {
                    for q in 0..n {
                        let mut v = c2[(comp, q)] * w[2][s] + c1[(comp, q)] * w[1][s];
                        if j == i {
                            v += c0[(comp, q)];
                        }
                        if v != c(0.0) {
                            entries.push((j * n + q, v));
                        }
                    }
                }
                rows[row] = entries;
            }
        }
        Ok(Self { grid, n, kinds, rows, wall }.with_far_boundary(FarBoundary::Extrapolate))
    }

    /// Linearization about `profile` at transverse frequency `xi_tilde`; the wall
    /// conditions fix the parabolic `W` components (outflow) or all of `W` (inflow).
    pub fn layer(
        sys: &dyn SystemDefinition,
        profile: &Profile,
        xi_tilde: &[f64],
        case: FlowCase,
        grid: Vec<f64>,
    ) -> Result<Self, DynamicsError> {
        let n = sys.size();
        let r = sys.parabolic_rank();
        if xi_tilde.len() + 1 != sys.dimension() || profile.size() != n {
            return Err(DynamicsError::InvalidInput("frequency or profile does not match the system".into()));
        }
        let terms = |x: f64| {
            let (u, du) = profile.eval(x);
            operator_terms(sys, xi_tilde, &u, &du)
        };
        let delta = 1e-4;
        let derivative = |x: f64, pick: &dyn Fn(&OperatorTerms) -> CMatrix| -> CMatrix {
            if x >= delta {
                (pick(&terms(x + delta)) - pick(&terms(x - delta))) / c(2.0 * delta)
            } else {
                (pick(&terms(x)) * c(-3.0) + pick(&terms(x + delta)) * c(4.0) - pick(&terms(x + 2.0 * delta)))
                    / c(2.0 * delta)
            }
        };
        let coefficients = |x: f64| {
            let t = terms(x);
            let db = derivative(x, &|t| t.b00.clone());
            let dp = derivative(x, &|t| t.p.clone());
            (t.b00.clone(), db + &t.p + &t.q, dp + &t.r0)
        };
        let jac = to_complex(&sys.w_jacobian(&profile.wall_value));
        let (wall, wall_rows): (CMatrix, Vec<usize>) = match case {
            FlowCase::Outflow => (jac.rows(n - r, r).into_owned(), (n - r..n).collect()),
            FlowCase::Inflow => (jac, (0..n).collect()),
        };
        Self::from_coefficients(grid, &coefficients, wall, &wall_rows)
    }

    /// `u_t = diffusion u'' - velocity u'` with a Dirichlet wall.
    pub fn convection_diffusion(grid: Vec<f64>, diffusion: f64, velocity: f64) -> Self {
        let one = |v: f64| CMatrix::from_element(1, 1, c(v));
        let coefficients = move |_x: f64| (one(diffusion), one(-velocity), one(0.0));
        Self::from_coefficients(grid, &coefficients, one(1.0), &[0]).expect("valid scalar operator")
    }

    /// Replaces the rows at `x_max`.
    pub fn with_far_boundary(mut self, far: FarBoundary) -> Self {
        let n = self.n;
        let last = self.grid.len() - 1;
        for comp in 0..n {
            let row = last * n + comp;
            self.rows[row] = match far {
                FarBoundary::Extrapolate => [(0, 1.0), (1, -3.0), (2, 3.0), (3, -1.0)]
                    .iter()
                    .map(|&(back, w)| ((last - back) * n + comp, c(w)))
                    .collect(),
                FarBoundary::Dirichlet => vec![(row, c(1.0))],
            };
        }
        self
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn wall_conditions(&self) -> usize {
        self.wall.nrows()
    }

    pub fn wall_matrix(&self) -> &CMatrix {
        &self.wall
    }

    fn dim(&self) -> usize {
        self.rows.len()
    }

    /// `(L U)` on differential rows, zero elsewhere.
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .zip(&self.kinds)
            .map(|(row, kind)| match kind {
                Row::Differential => row.iter().map(|&(j, v)| v * u[j]).sum(),
                _ => c(0.0),
            })
            .collect()
    }

    fn factor(&self, theta_dt: f64) -> Result<BandedLu<Complex64>, DynamicsError> {
        let n = self.n;
        let mut band = BandedMatrix::<Complex64>::zeros(self.dim(), 4 * n, 3 * n);
        for (i, (row, kind)) in self.rows.iter().zip(&self.kinds).enumerate() {
            match kind {
                Row::Differential => {
                    band.add(i, i, c(1.0));
                    for &(j, v) in row {
                        band.add(i, j, -v * theta_dt);
                    }
                }
                _ => {
                    for &(j, v) in row {
                        band.add(i, j, v);
                    }
                }
            }
        }
        band.factor().ok_or_else(|| DynamicsError::InvalidInput("singular step matrix".into()))
    }

    /// Dense generator on the differential unknowns after eliminating boundary rows.
    pub fn reduced_matrix(&self) -> Result<CMatrix, DynamicsError> {
        let dim = self.dim();
        let mut full = CMatrix::zeros(dim, dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                full[(i, j)] += v;
            }
        }
        let alg: Vec<usize> = (0..dim).filter(|&i| self.kinds[i] != Row::Differential).collect();
        let diff: Vec<usize> = (0..dim).filter(|&i| self.kinds[i] == Row::Differential).collect();
        let pick = |rs: &[usize], cs: &[usize]| CMatrix::from_fn(rs.len(), cs.len(), |i, j| full[(rs[i], cs[j])]);
        let c_aa = pick(&alg, &alg)
            .try_inverse()
            .ok_or_else(|| DynamicsError::InvalidInput("boundary rows do not determine the boundary unknowns".into()))?;
        Ok(pick(&diff, &diff) - pick(&diff, &alg) * c_aa * pick(&alg, &diff))
    }

    /// Eigenvalues of [`Self::reduced_matrix`].
    pub fn spectrum(&self) -> Result<Vec<Complex64>, DynamicsError> {
        Ok(crate::linalg::eigenvalues(&self.reduced_matrix()?))
    }

    fn flatten(&self, fields: &[CVector]) -> Vec<Complex64> {
        fields.iter().flat_map(|v| v.iter().copied()).collect()
    }

    fn unflatten(&self, u: &[Complex64]) -> Vec<CVector> {
        u.chunks(self.n).map(|ch| CVector::from_column_slice(ch)).collect()
    }

    /// `f(., t)` at the nodes, flattened.
    pub fn sample(&self, f: &dyn Fn(f64) -> CVector) -> Vec<Complex64> {
        self.grid.iter().flat_map(|&x| f(x).iter().copied().collect::<Vec<_>>()).collect()
    }

    /// Fills boundary rows of `rhs` with the data at time `t`.
    fn boundary_rhs(&self, rhs: &mut [Complex64], h: &CVector) {
        for (i, kind) in self.kinds.iter().enumerate() {
            match kind {
                Row::Wall(k) => rhs[i] = h[*k],
                Row::Far => rhs[i] = c(0.0),
                Row::Differential => {}
            }
        }
    }

    /// Steps `U0` to `t_end`, calling `visit(step, t, U)` after every step (and at step 0).
    pub fn evolve_with(
        &self,
        u0: &[CVector],
        h: Trace,
        f: Option<NodalForcing>,
        options: &EvolveOptions,
        visit: &mut dyn FnMut(usize, f64, &[Complex64]),
    ) -> Result<Vec<Complex64>, DynamicsError> {
        if u0.len() != self.grid.len() || u0.iter().any(|v| v.len() != self.n) {
            return Err(DynamicsError::InvalidInput("initial data does not match the grid".into()));
        }
        let steps = options.steps();
        let dt = options.dt;
        let mut u = self.flatten(u0);
        visit(0, 0.0, &u);
        if steps == 0 {
            return Ok(u);
        }
        let forcing = |t: f64| -> Vec<Complex64> {
            match f {
                Some(f) => f(t),
                None => vec![c(0.0); self.dim()],
            }
        };
        // backward Euler half steps and Crank-Nicolson steps share I - (dt/2) L
        let lu = self.factor(0.5 * dt)?;
        let mut t = 0.0;
        let mut f_old = forcing(0.0);
        for step in 1..=steps {
            if step <= options.smoothing_steps {
                for _ in 0..2 {
                    let t_new = t + 0.5 * dt;
                    let f_new = forcing(t_new);
                    let mut rhs: Vec<Complex64> = u.iter().zip(&f_new).map(|(a, b)| a + b * (0.5 * dt)).collect();
                    self.boundary_rhs(&mut rhs, &h(t_new));
                    lu.solve_in_place(&mut rhs);
                    u = rhs;
                    t = t_new;
                    f_old = f_new;
                }
            } else {
                let t_new = step as f64 * dt;
                let f_new = forcing(t_new);
                let lu_u = self.apply(&u);
                let mut rhs: Vec<Complex64> =
                    (0..u.len()).map(|i| u[i] + (lu_u[i] + f_old[i] + f_new[i]) * (0.5 * dt)).collect();
                self.boundary_rhs(&mut rhs, &h(t_new));
                lu.solve_in_place(&mut rhs);
                u = rhs;
                t = t_new;
                f_old = f_new;
            }
            if u.iter().any(|z| !z.is_finite()) {
                return Err(DynamicsError::BlowUp { t, norm: f64::INFINITY });
            }
            visit(step, t, &u);
        }
        Ok(u)
    }

    /// Evolves and records norms every `output_every` steps.
    pub fn evolve(
        &self,
        u0: &[CVector],
        h: Trace,
        f: Option<Forcing>,
        options: &EvolveOptions,
    ) -> Result<(TrajectoryRecord, HalfLineState), DynamicsError> {
        let steps = options.steps();
        let every = options.output_every.max(1);
        let mut record = TrajectoryRecord::default();
        let mut reference = 0.0;
        let mut blow_up = None;
        let nodal = f.map(|f| move |t: f64| self.sample(&|x| f(x, t)));
        let nodal_ref = nodal.as_ref().map(|g| g as &dyn Fn(f64) -> Vec<Complex64>);
        let last = self.evolve_with(u0, h, nodal_ref, options, &mut |step, t, u| {
            if step % every != 0 && step != steps {
                return;
            }
            let fields = self.unflatten(u);
            let l2 = l2_norm(&self.grid, &fields);
            if step == 0 {
                reference = l2.max(1.0);
            }
            if blow_up.is_none() && l2 > options.blowup_factor * reference {
                blow_up = Some((t, l2));
            }
            record.times.push(t);
            record.l2.push(l2);
            record.linf.push(fields.iter().map(|v| v.camax()).fold(0.0, f64::max));
            record.boundary.push(h(t).norm());
            if options.keep_snapshots {
                record.snapshots.push(fields);
            }
        })?;
        if let Some((t, norm)) = blow_up {
            return Err(DynamicsError::BlowUp { t, norm });
        }
        let t = steps as f64 * options.dt;
        Ok((record, HalfLineState { grid: self.grid.clone(), t, fields: self.unflatten(&last) }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{measure_decay, NormKind};
    use crate::model::{build_isentropic_2d, IsentropicParams};
    use crate::profile::{explicit_transverse, layer_grid, uniform_grid};

    fn scalar(v: f64) -> CVector {
        CVector::from_element(1, c(v))
    }

    fn zero_trace(_t: f64) -> CVector {
        CVector::zeros(1)
    }

    #[test]
    fn heat_similarity_decay() {
        // y e^{-y^2} spreads as y (1+4t)^{-3/2} e^{-y^2/(1+4t)}, so |u|_2 ~ (1+4t)^{-3/4}
        let grid = uniform_grid(20.0, 401);
        let op = LinearizedOperator::convection_diffusion(grid.clone(), 1.0, 0.0);
        let u0: Vec<CVector> = grid.iter().map(|&y| scalar(y * (-y * y).exp())).collect();
        let opts = EvolveOptions { dt: 0.01, t_end: 5.0, output_every: 50, ..Default::default() };
        let (rec, state) = op.evolve(&u0, &zero_trace, None, &opts).unwrap();
        for (t, l) in rec.times.iter().zip(&rec.l2) {
            let exact = rec.l2[0] * (1.0 + 4.0 * t).powf(-0.75);
            assert!((l - exact).abs() <= 5e-4 * exact, "t = {t}: {l} vs {exact}");
        }
        assert!((state.t - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let op = LinearizedOperator::convection_diffusion(uniform_grid(10.0, 101), 0.5, -0.2);
        let u0 = vec![scalar(0.0); 101];
        let (rec, state) = op.evolve(&u0, &zero_trace, None, &EvolveOptions::default()).unwrap();
        assert!(rec.l2.iter().all(|&l| l == 0.0));
        assert!(state.fields.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn semigroup_property() {
        let grid = uniform_grid(10.0, 201);
        let op = LinearizedOperator::convection_diffusion(grid.clone(), 1.0, -0.5);
        let u0: Vec<CVector> = grid.iter().map(|&y| scalar(y * y * (-y).exp())).collect();
        let opts = |t_end| EvolveOptions { dt: 0.01, t_end, smoothing_steps: 0, ..Default::default() };
        let (_, whole) = op.evolve(&u0, &zero_trace, None, &opts(1.0)).unwrap();
        let (_, half) = op.evolve(&u0, &zero_trace, None, &opts(0.4)).unwrap();
        let (_, rest) = op.evolve(&half.fields, &zero_trace, None, &opts(0.6)).unwrap();
        let err = whole.fields.iter().zip(&rest.fields).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn dirichlet_far_boundary_removes_the_neutral_mode() {
        let grid = uniform_grid(20.0, 161);
        let extrapolated = LinearizedOperator::convection_diffusion(grid.clone(), 0.1, -0.1);
        let closed = extrapolated.clone().with_far_boundary(FarBoundary::Dirichlet);
        let top = |op: &LinearizedOperator| op.spectrum().unwrap().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        // continuous edge -v^2/(4D)
        assert!(top(&closed) < -0.02, "{}", top(&closed));
        assert!(top(&extrapolated) > -1e-3);
    }

    #[test]
    fn layer_mode_decays_at_the_dispersion_abscissa() {
        let params = IsentropicParams { rho0: 1.0, v_wall: -0.1, u_inf: 0.01, mu: 0.1, eta: 0.0, a: 1.0, gamma: 2.0 };
        let sys = build_isentropic_2d(params).unwrap();
        let profile = explicit_transverse(&params, &layer_grid(40.0, 400)).unwrap();
        let xi = 0.5;
        let op = LinearizedOperator::layer(&sys, &profile, &[xi], FlowCase::Outflow, uniform_grid(30.0, 601)).unwrap();
        // sup over real k of Re spec(-k^2 B + ik(P + Q) + R) at the end state
        let u_plus = &profile.end_state.u_plus;
        let t = operator_terms(&sys, &[xi], u_plus, &crate::linalg::RVector::zeros(u_plus.len()));
        let abscissa = (0..=2000)
            .map(|i| -10.0 + 0.01 * i as f64)
            .flat_map(|k| {
                let m = &t.b00 * c(-k * k) + (&t.p + &t.q) * Complex64::new(0.0, k) + &t.r0;
                crate::linalg::eigenvalues(&m)
            })
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let n = op.size();
        let u0: Vec<CVector> = op
            .grid()
            .iter()
            .map(|&x| CVector::from_fn(n, |i, _| c(x * (-(x - 5.0).powi(2) / 4.0).exp() * (1.0 + i as f64))))
            .collect();
        let opts = EvolveOptions { dt: 0.02, t_end: 100.0, output_every: 25, ..Default::default() };
        let (rec, _) = op.evolve(&u0, &|_| CVector::zeros(op.wall_conditions()), None, &opts).unwrap();
        let fit = measure_decay(&rec, NormKind::L2, (60.0, 100.0)).unwrap();
        assert!(abscissa < 0.0);
        assert!((fit.rate + abscissa).abs() <= 0.1 * abscissa.abs(), "rate {} abscissa {abscissa}", fit.rate);
    }

    #[test]
    fn boundary_conditions_hold_along_the_run() {
        let grid = uniform_grid(10.0, 101);
        let op = LinearizedOperator::convection_diffusion(grid.clone(), 1.0, 0.0);
        let u0 = vec![scalar(0.0); 101];
        let h = |t: f64| scalar(t.sin());
        let opts = EvolveOptions { dt: 0.05, t_end: 1.0, ..Default::default() };
        let (_, state) = op.evolve(&u0, &h, None, &opts).unwrap();
        assert!((state.fields[0][0] - c(1f64.sin())).norm() < 1e-12);
    }
}
