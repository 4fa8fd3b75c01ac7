//! Sampling-based audits of the structural hypotheses.
//!
//! Every check returns a [`Verdict`] with a signed margin: positive margins
//! measure the distance to violation, nonpositive margins mark a failure.

use super::{EndState, FlowCase, SystemDefinition};
use crate::linalg::{min_symmetric_eigenvalue, real_eigenvalues, spd_sqrt_pair, symmetric_eigen, RMatrix, RVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

/// Relative tolerance deciding that two eigenvalues coincide.
pub const COLLISION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub margin: f64,
    pub samples: usize,
    pub note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

impl Verdict {
    fn new(passed: bool, margin: f64, samples: usize, note: impl Into<String>) -> Self {
        Self { passed, margin, samples, note: note.into(), witness: None }
    }

    fn with_witness(mut self, w: Vec<f64>) -> Self {
        self.witness = Some(w);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub tau: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchScan {
    pub points: Vec<BranchPoint>,
    /// Intervals of `tau` where eigenvalues stay clustered and multiplicity is not resolved.
    pub unresolved: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub case: Option<FlowCase>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub schema: u32,
    pub system: String,
    pub a1: Option<Verdict>,
    pub a2: Option<Verdict>,
    pub a3: Option<Verdict>,
    pub h1: Option<Verdict>,
    pub h2: Option<Verdict>,
    pub h3: Option<Verdict>,
    pub h4: Option<Verdict>,
    pub b: Option<Verdict>,
    pub case: Option<FlowCase>,
    /// Eigenvalues of the normal flux Jacobian at the end state.
    pub normal_eigenvalues: Vec<f64>,
    pub branch_points: Vec<BranchPoint>,
    pub unresolved_clusters: Vec<(f64, f64)>,
    pub h0: String,
}

impl HypothesisReport {
    pub fn new(system: &str) -> Self {
        Self {
            schema: 1,
            system: system.to_string(),
            h0: "smoothness order is a proof requirement and is not checked numerically".to_string(),
            ..Default::default()
        }
    }

    /// Overall verdict over the hypotheses that were audited.
    pub fn all_passed(&self) -> bool {
        [&self.a1, &self.a2, &self.a3, &self.h1, &self.h2, &self.h3, &self.h4, &self.b]
            .iter()
            .filter_map(|v| v.as_ref())
            .all(|v| v.passed)
    }

    pub fn merge(&mut self, other: HypothesisReport) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(a1, a2, a3, h1, h2, h3, h4, b, case);
        if !other.normal_eigenvalues.is_empty() {
            self.normal_eigenvalues = other.normal_eigenvalues;
        }
        if !other.branch_points.is_empty() {
            self.branch_points = other.branch_points;
        }
        if !other.unresolved_clusters.is_empty() {
            self.unresolved_clusters = other.unresolved_clusters;
        }
    }
}

/// Deterministic unit directions in `R^d`: equally spaced angles for `d = 2`
/// (starting on the `x1` axis), a Fibonacci lattice for `d = 3`, seeded
/// Gaussian samples otherwise.
pub fn sample_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let rad = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![z, rad * t.cos(), rad * t.sin()]
                })
                .collect()
        }
        _ => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
            (0..count)
                .map(|_| {
                    let v: Vec<f64> = (0..d)
                        .map(|_| {
                            // Box-Muller
                            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                            let u2: f64 = rng.gen();
                            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                        })
                        .collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / norm).collect()
                })
                .collect()
        }
    }
}

fn weighted_sum(xi: &[f64], mats: impl Fn(usize) -> RMatrix) -> RMatrix {
    let mut out = mats(0) * xi[0];
    for (j, x) in xi.iter().enumerate().skip(1) {
        out += mats(j) * *x;
    }
    out
}

fn asymmetry(m: &RMatrix) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(f64::MIN_POSITIVE)
}

/// (A1) symmetry and definiteness of the symmetrizer, (A3) block form and
/// parabolicity of the symmetric viscosity, over the sampled states.
pub fn check_structure(sys: &dyn SystemDefinition, states: &[RVector], directions: usize) -> HypothesisReport {
    let n = sys.size();
    let r = sys.parabolic_rank();
    let h = n - r;
    let d = sys.dimension();
    let dirs = sample_directions(d, directions);
    let sym_tol = 1e-10;

    let mut a1_margin = f64::INFINITY;
    let mut a1_note = String::from("min eigenvalue of A0");
    let mut a1_witness = Vec::new();
    let mut a3_margin = f64::INFINITY;
    let mut a3_note = String::from("min eigenvalue of the parabolic viscosity symbol over unit directions");
    let mut a3_witness = Vec::new();

    for u in states {
        let w = sys.to_w(u);
        let a0 = sys.sym_a0(&w);
        let mut defects = vec![asymmetry(&a0)];
        for j in 0..d {
            defects.push(asymmetry(&sys.sym_a(j, &w)));
        }
        let a1 = sys.sym_a(0, &w);
        if h > 0 {
            defects.push(asymmetry(&a1.view((0, 0), (h, h)).into_owned()));
        }
        let block_leak = if h > 0 && r > 0 {
            a0.view((0, h), (h, r)).norm() + a0.view((h, 0), (r, h)).norm()
        } else {
            0.0
        };
        let worst_asym = defects.iter().copied().fold(0.0, f64::max);
        let lam = min_symmetric_eigenvalue(&a0);
        let margin = if worst_asym > sym_tol {
            a1_note = format!("coefficient not symmetric (relative defect {worst_asym:.3e})");
            -worst_asym
        } else if block_leak > sym_tol * a0.norm() {
            a1_note = format!("A0 not block diagonal (off-block norm {block_leak:.3e})");
            -block_leak
        } else {
            lam
        };
        if margin < a1_margin {
            a1_margin = margin;
            a1_witness = u.iter().copied().collect();
        }

        for j in 0..d {
            for k in 0..d {
                let b = sys.sym_b(j, k, &w);
                let leak = if h > 0 { b.rows(0, h).norm() + b.columns(0, h).norm() } else { 0.0 };
                if leak > sym_tol * b.norm().max(1.0) {
                    a3_note = format!("viscosity B^{{{j}{k}}} has hyperbolic entries (norm {leak:.3e})");
                    if -leak < a3_margin {
                        a3_margin = -leak;
                        a3_witness = u.iter().copied().collect();
                    }
                }
            }
        }
        if r > 0 {
            for xi in &dirs {
                let mut symbol = RMatrix::zeros(n, n);
                for j in 0..d {
                    for k in 0..d {
                        symbol += sys.sym_b(j, k, &w) * (xi[j] * xi[k]);
                    }
                }
                let lam = min_symmetric_eigenvalue(&symbol.view((h, h), (r, r)).into_owned());
                if lam < a3_margin {
                    a3_margin = lam;
                    a3_witness = xi.clone();
                }
            }
        }
    }
    let mut report = HypothesisReport::new(sys.name());
    let scale = 1e-12;
    report.a1 = Some(Verdict::new(a1_margin > scale, a1_margin, states.len(), a1_note).with_witness(a1_witness));
    let a3_samples = states.len() * dirs.len();
    report.a3 = Some(Verdict::new(a3_margin > scale, a3_margin, a3_samples, a3_note).with_witness(a3_witness));
    report
}

/// (H1): sign of the normal hyperbolic block of the symmetric form.
pub fn check_noncharacteristic(sys: &dyn SystemDefinition, end: &EndState, wall_state: &RVector) -> Classification {
    let h = sys.hyperbolic_size();
    let mut eigs = Vec::new();
    for w in [sys.to_w(wall_state), end.w_plus.clone()] {
        if h == 0 {
            break;
        }
        let block = sys.sym_a(0, &w).view((0, 0), (h, h)).into_owned();
        eigs.extend(symmetric_eigen(&block).0);
    }
    if h == 0 {
        let v = Verdict::new(true, f64::INFINITY, 0, "no hyperbolic block; classified as outflow");
        return Classification { case: Some(FlowCase::Outflow), verdict: v };
    }
    let margin = eigs.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let scale = eigs.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale;
    let case = if eigs.iter().all(|&x| x > tol) {
        Some(FlowCase::Inflow)
    } else if eigs.iter().all(|&x| x < -tol) {
        Some(FlowCase::Outflow)
    } else {
        None
    };
    let note = match case {
        Some(FlowCase::Inflow) => "positive definite: inflow",
        Some(FlowCase::Outflow) => "negative definite: outflow",
        None => "indefinite or singular: characteristic boundary",
    };
    let margin = if case.is_some() { margin } else { margin.min(0.0) };
    Classification { case, verdict: Verdict::new(case.is_some(), margin, 2, note).with_witness(eigs) }
}

fn sorted_real_parts(m: &RMatrix) -> (Vec<f64>, f64) {
    let ev = real_eigenvalues(m);
    let max_im = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    (re, max_im)
}

/// (H2): eigenvalues of the normal flux Jacobian at the end state are real,
/// distinct and nonzero.
pub fn check_hyperbolicity(sys: &dyn SystemDefinition, end: &EndState) -> HypothesisReport {
    let jac = sys.flux_jacobian(0, &end.u_plus);
    let (ev, max_im) = sorted_real_parts(&jac);
    let radius = ev.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = COLLISION_TOL * radius;
    let min_mod = ev.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let min_gap = ev.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    let mut margin = min_mod.min(min_gap);
    let mut note = format!("min |eigenvalue| {min_mod:.6e}, min gap {min_gap:.6e}");
    if max_im > tol {
        margin = -max_im;
        note = format!("complex eigenvalues (max |Im| {max_im:.3e})");
    }
    let mut report = HypothesisReport::new(sys.name());
    report.h2 = Some(Verdict::new(margin > tol, margin, 1, note).with_witness(ev.clone()));
    report.normal_eigenvalues = ev;
    report
}

fn multiplicity_signature(values: &[f64], tol: f64) -> (Vec<usize>, f64) {
    let mut sig = Vec::new();
    let mut count = 1;
    let mut min_sep = f64::INFINITY;
    for p in values.windows(2) {
        let gap = p[1] - p[0];
        if gap <= tol {
            count += 1;
        } else {
            min_sep = min_sep.min(gap);
            sig.push(count);
            count = 1;
        }
    }
    if !values.is_empty() {
        sig.push(count);
    }
    (sig, min_sep)
}

/// (H3): the multiplicity signature of the symbol `sum_j xi_j dF^j(U+)` is the
/// same at every sampled direction.
pub fn check_constant_multiplicity(sys: &dyn SystemDefinition, end: &EndState, directions: usize) -> HypothesisReport {
    let d = sys.dimension();
    let dirs = sample_directions(d, directions);
    let jacs: Vec<RMatrix> = (0..d).map(|j| sys.flux_jacobian(j, &end.u_plus)).collect();
    let mut margin = f64::INFINITY;
    let mut signatures = Vec::with_capacity(dirs.len());
    for xi in &dirs {
        let symbol = weighted_sum(xi, |j| jacs[j].clone());
        let (ev, _) = sorted_real_parts(&symbol);
        let radius = ev.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let (sig, sep) = multiplicity_signature(&ev, COLLISION_TOL * radius);
        signatures.push(sig);
        if sep.is_finite() {
            margin = margin.min(sep);
        }
    }
    // the most common signature is the reference; the first deviating direction is the witness
    let reference = signatures
        .iter()
        .max_by_key(|s| signatures.iter().filter(|t| t == s).count())
        .cloned();
    let failure = signatures
        .iter()
        .zip(&dirs)
        .find(|(s, _)| Some(*s) != reference.as_ref())
        .map(|(s, xi)| (xi.clone(), s.clone()));
    let mut report = HypothesisReport::new(sys.name());
    let verdict = match failure {
        Some((xi, sig)) => {
            let rsig = reference.unwrap_or_default();
            Verdict::new(false, 0.0, dirs.len(), format!("signature {sig:?} differs from {rsig:?}")).with_witness(xi)
        }
        None => {
            let rsig = reference.unwrap_or_default();
            let margin = if margin.is_finite() { margin } else { f64::INFINITY };
            Verdict::new(true, margin, dirs.len(), format!("signature {rsig:?} at every direction"))
        }
    };
    report.h3 = Some(verdict);
    report
}

/// Eigenvalue data of the real symbol `S(tau) = A1^{-1} (tau A0 + A_xi)`;
/// the frequency symbol of the audit is `i S(tau)`.
struct Symbol {
    base: RMatrix,
    slope: RMatrix,
}

impl Symbol {
    fn eig(&self, tau: f64) -> Vec<num_complex::Complex64> {
        real_eigenvalues(&(&self.slope * tau + &self.base))
    }
}

fn complex_pair_count(ev: &[num_complex::Complex64], tol: f64) -> usize {
    ev.iter().filter(|z| z.im > tol).count()
}

fn min_gap(ev: &[num_complex::Complex64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            g = g.min((ev[i] - ev[j]).norm());
        }
    }
    g
}

fn cluster_size(ev: &[num_complex::Complex64], tol: f64) -> usize {
    let mut best = 1;
    for a in ev {
        let c = ev.iter().filter(|b| (*a - **b).norm() <= tol).count();
        best = best.max(c);
    }
    best
}

/// Branch points of the symbol `A1^{-1}(tau A0 + sum_j xi_j A^j)` in `tau`.
///
/// `a_tangential[k]` pairs with `xi[k]`. Square-root branch points show up as
/// changes in the number of complex eigenvalue pairs; crossings as local
/// minima of the eigenvalue gap.
pub fn branch_points_of_symbol(
    a1: &RMatrix,
    a0: &RMatrix,
    a_tangential: &[RMatrix],
    xi: &[f64],
    tau_max: f64,
    samples: usize,
) -> Option<BranchScan> {
    let inv = a1.clone().try_inverse()?;
    let n = a1.nrows();
    let mut a_xi = RMatrix::zeros(n, n);
    for (m, x) in a_tangential.iter().zip(xi) {
        a_xi += m * *x;
    }
    let sym = Symbol { base: &inv * a_xi, slope: &inv * a0 };
    let scale = {
        let r = |m: &RMatrix| real_eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        r(&sym.base).max(r(&sym.slope)).max(sym.base.norm() * 1e-3).max(f64::MIN_POSITIVE)
    };
    let tight = COLLISION_TOL * scale;
    let loose = 1e-5 * scale;
    let samples = samples.max(3) | 1;
    let taus: Vec<f64> = (0..samples).map(|k| -tau_max + 2.0 * tau_max * k as f64 / (samples - 1) as f64).collect();
    let data: Vec<(usize, f64)> = taus
        .iter()
        .map(|&t| {
            let ev = sym.eig(t);
            (complex_pair_count(&ev, tight), min_gap(&ev))
        })
        .collect();
    let mut scan = BranchScan::default();
    let push = |scan: &mut BranchScan, tau: f64, mult: usize| {
        if !scan.points.iter().any(|p| (p.tau - tau).abs() < 1e-6 * tau_max) {
            scan.points.push(BranchPoint { tau, multiplicity: mult });
        }
    };
    let dtau = taus[1] - taus[0];
    for k in 0..samples - 1 {
        if data[k].0 != data[k + 1].0 {
            let (mut lo, mut hi) = (taus[k], taus[k + 1]);
            let c_lo = data[k].0;
            while hi - lo > 1e-13 * tau_max.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if complex_pair_count(&sym.eig(mid), tight) == c_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let mult = cluster_size(&sym.eig(tau), loose).max(2);
            push(&mut scan, tau, mult);
        }
    }
    // crossings: local minima of the gap that reach the collision tolerance
    let mut run_start: Option<usize> = None;
    for k in 0..samples {
        let below = data[k].1 <= tight;
        match (below, run_start) {
            (true, None) => run_start = Some(k),
            (false, Some(s)) => {
                if k - s > 2 {
                    scan.unresolved.push((taus[s], taus[k - 1]));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        if samples - s > 2 {
            scan.unresolved.push((taus[s], taus[samples - 1]));
        }
    }
    let near_sign_change = |t: f64| {
        (0..samples - 1).any(|k| data[k].0 != data[k + 1].0 && t > taus[k] - 1.5 * dtau && t < taus[k + 1] + 1.5 * dtau)
    };
    let in_unresolved = |t: f64, scan: &BranchScan| scan.unresolved.iter().any(|&(a, b)| t >= a - dtau && t <= b + dtau);
    for k in 1..samples - 1 {
        let (g0, g1, g2) = (data[k - 1].1, data[k].1, data[k + 1].1);
        if !(g1 <= g0 && g1 <= g2) || (g1 == g0 && g1 == g2) {
            continue;
        }
        if near_sign_change(taus[k]) || in_unresolved(taus[k], &scan) {
            continue;
        }
        let gap = |t: f64| min_gap(&sym.eig(t));
        let (mut a, mut b) = (taus[k - 1], taus[k + 1]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut gc, mut gd) = (gap(c), gap(d));
        for _ in 0..200 {
            if b - a < 1e-14 * tau_max.max(1.0) {
                break;
            }
            if gc <= gd {
                b = d;
                d = c;
                gd = gc;
                c = b - phi * (b - a);
                gc = gap(c);
            } else {
                a = c;
                c = d;
                gc = gd;
                d = a + phi * (b - a);
                gd = gap(d);
            }
        }
        let mut tau = 0.5 * (a + b);
        // snap to a sample when it already sits on the collision
        if g1 <= gap(tau) {
            tau = taus[k];
        }
        let ev = sym.eig(tau);
        let local_scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(scale * 1e-3);
        if min_gap(&ev) <= COLLISION_TOL * local_scale.max(scale) {
            push(&mut scan, tau, cluster_size(&ev, 1e-6 * scale).max(2));
        }
    }
    scan.points.sort_by(|p, q| p.tau.total_cmp(&q.tau));
    Some(scan)
}

/// (H4): branch points of the normal symbol at tangential frequency `xi_tilde`.
pub fn find_branch_points(sys: &dyn SystemDefinition, end: &EndState, xi_tilde: &[f64]) -> HypothesisReport {
    let w = &end.w_plus;
    let d = sys.dimension();
    let a1 = sys.sym_a(0, w);
    let a0 = sys.sym_a0(w);
    let tangential: Vec<RMatrix> = (1..d).map(|j| sys.sym_a(j, w)).collect();
    let mut report = HypothesisReport::new(sys.name());
    // branch points lie where tangential speeds balance normal ones
    let xi_norm = xi_tilde.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tangential_speed = a0
        .clone()
        .try_inverse()
        .map(|inv| {
            tangential
                .iter()
                .map(|m| real_eigenvalues(&(&inv * m)).iter().map(|z| z.norm()).fold(0.0, f64::max))
                .fold(0.0, f64::max)
        })
        .unwrap_or(1.0);
    let tau_max = 20.0 * (xi_norm * tangential_speed).max(1.0);
    match branch_points_of_symbol(&a1, &a0, &tangential, xi_tilde, tau_max, 4001) {
        Some(scan) => {
            let unresolved = !scan.unresolved.is_empty();
            let note = if unresolved {
                format!("{} branch points; unresolved clusters present", scan.points.len())
            } else {
                format!("{} branch points on |tau| <= {tau_max:.3e}", scan.points.len())
            };
            let margin = if unresolved { 0.0 } else { 1.0 };
            let mult: Vec<f64> = scan.points.iter().map(|p| p.multiplicity as f64).collect();
            report.h4 = Some(Verdict::new(!unresolved, margin, 4001, note).with_witness(mult));
            report.branch_points = scan.points;
            report.unresolved_clusters = scan.unresolved;
        }
        None => {
            report.h4 = Some(Verdict::new(false, 0.0, 0, "normal coefficient is singular"));
        }
    }
    report
}

/// (A2): no eigenvector of `A_xi A0^{-1}` lies in the kernel of `B_xi A0^{-1}`.
///
/// The margin is the smallest value of `|B_xi A0^{-1} e|` over unit vectors `e`
/// in a single eigenspace, minimized over sampled directions.
pub fn check_genuine_coupling(sys: &dyn SystemDefinition, end: &EndState, directions: usize) -> HypothesisReport {
    let w = &end.w_plus;
    let d = sys.dimension();
    let n = sys.size();
    let dirs = sample_directions(d, directions);
    let a0 = sys.sym_a0(w);
    let mut report = HypothesisReport::new(sys.name());
    let Some((sqrt0, isqrt0)) = spd_sqrt_pair(&a0) else {
        report.a2 = Some(Verdict::new(false, f64::NAN, 0, "A0 is not positive definite"));
        return report;
    };
    let a0_inv = &isqrt0 * &isqrt0;
    let mut margin = f64::INFINITY;
    let mut witness = Vec::new();
    for xi in &dirs {
        let a_xi = weighted_sum(xi, |j| sys.sym_a(j, w));
        let mut b_xi = RMatrix::zeros(n, n);
        for j in 0..d {
            for k in 0..d {
                b_xi += sys.sym_b(j, k, w) * (xi[j] * xi[k]);
            }
        }
        let (vals, q) = symmetric_eigen(&(&isqrt0 * &a_xi * &isqrt0));
        let e = &sqrt0 * &q;
        let radius = vals.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut start = 0;
        while start < n {
            let mut end_ = start + 1;
            while end_ < n && vals[end_] - vals[end_ - 1] <= COLLISION_TOL * radius {
                end_ += 1;
            }
            let block = e.columns(start, end_ - start).into_owned();
            let basis = block.qr().q();
            let image = &b_xi * &a0_inv * basis;
            let s = image.singular_values().min();
            if s < margin {
                margin = s;
                witness = xi.clone();
            }
            start = end_;
        }
    }
    let tol = 1e-10 * a0.norm().max(1.0);
    report.a2 = Some(
        Verdict::new(margin > tol, margin, dirs.len(), "min |B_xi A0^{-1} e| over unit eigenvectors")
            .with_witness(witness),
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_isentropic_2d, ConstantCoefficientSystem, IsentropicParams};

    fn iso(v: f64) -> crate::model::Isentropic2d {
        build_isentropic_2d(IsentropicParams { rho0: 1.0, v_wall: v, u_inf: 1.0, mu: 0.1, eta: 0.0, a: 1.0, gamma: 2.0 })
            .unwrap()
    }

    fn m(rows: &[&[f64]]) -> RMatrix {
        RMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn isentropic_structure_passes() {
        let sys = iso(-0.1);
        let states = vec![RVector::from_vec(vec![1.0, 0.0, -0.1])];
        let rep = check_structure(&sys, &states, 128);
        assert!(rep.a1.as_ref().unwrap().passed);
        assert!(rep.a3.as_ref().unwrap().passed);
        assert!(rep.a3.unwrap().margin > 0.0);
    }

    #[test]
    fn degenerate_viscosity_fails_parabolicity() {
        let z = RMatrix::zeros(2, 2);
        let a = vec![m(&[&[0.0, 1.0], &[1.0, 0.0]])];
        let sys = ConstantCoefficientSystem::new(a, vec![vec![z]], RMatrix::identity(2, 2), 1);
        let rep = check_structure(&sys, &[RVector::zeros(2)], 10);
        let v = rep.a3.unwrap();
        assert!(!v.passed);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn negative_symmetrizer_fails_with_its_eigenvalue() {
        let a = vec![m(&[&[1.0, 0.0], &[0.0, 2.0]])];
        let b = vec![vec![m(&[&[0.0, 0.0], &[0.0, 1.0]])]];
        let sys = ConstantCoefficientSystem::new(a, b, m(&[&[1.0, 0.0], &[0.0, -0.5]]), 1);
        let v = check_structure(&sys, &[RVector::zeros(2)], 10).a1.unwrap();
        assert!(!v.passed);
        assert!((v.margin + 0.5).abs() < 1e-14);
    }

    #[test]
    fn classification_by_normal_velocity() {
        for (v, expect) in [(-0.1, Some(FlowCase::Outflow)), (0.1, Some(FlowCase::Inflow)), (0.0, None)] {
            let sys = iso(v);
            let end = sys.end_state();
            let c = check_noncharacteristic(&sys, &end, &sys.from_w(&sys.params.wall_w()));
            assert_eq!(c.case, expect);
            if expect.is_none() {
                assert_eq!(c.verdict.margin, 0.0);
            }
        }
    }

    #[test]
    fn hyperbolicity_and_sonic_failure() {
        let sys = iso(-0.1);
        let rep = check_hyperbolicity(&sys, &sys.end_state());
        assert!(rep.h2.unwrap().passed);
        let c = 2f64.sqrt();
        let sonic = iso(-c);
        let rep = check_hyperbolicity(&sonic, &sonic.end_state());
        assert!(!rep.h2.unwrap().passed);
    }

    #[test]
    fn hyperbolicity_spectrum_independent_of_tangential_speed() {
        let mut base = None;
        for u_inf in [0.0, 1.0, -3.0] {
            let mut p = iso(-0.1).params;
            p.u_inf = u_inf;
            let sys = build_isentropic_2d(p).unwrap();
            let rep = check_hyperbolicity(&sys, &sys.end_state());
            let ev = rep.normal_eigenvalues.clone();
            if let Some(b) = &base {
                let b: &Vec<f64> = b;
                assert!(ev.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
            }
            base = Some(ev);
        }
    }

    #[test]
    fn constant_multiplicity() {
        let sys = iso(-0.1);
        let v = check_constant_multiplicity(&sys, &sys.end_state(), 128).h3.unwrap();
        assert!(v.passed, "{v:?}");
        assert!(v.note.contains("[1, 1, 1]"));

        let scalar = ConstantCoefficientSystem::new(
            vec![m(&[&[1.0]]), m(&[&[2.0]])],
            vec![vec![m(&[&[1.0]]), m(&[&[0.0]])], vec![m(&[&[0.0]]), m(&[&[1.0]])]],
            m(&[&[1.0]]),
            1,
        );
        let end = EndState::new(&scalar, RVector::zeros(1));
        assert!(check_constant_multiplicity(&scalar, &end, 100).h3.unwrap().passed);

        // symbol diag(xi1, xi1 + xi2) is degenerate exactly on xi2 = 0
        let z = RMatrix::zeros(2, 2);
        let crossing = ConstantCoefficientSystem::new(
            vec![RMatrix::identity(2, 2), m(&[&[0.0, 0.0], &[0.0, 1.0]])],
            vec![vec![z.clone(), z.clone()], vec![z.clone(), z]],
            RMatrix::identity(2, 2),
            0,
        );
        let end = EndState::new(&crossing, RVector::zeros(2));
        let v = check_constant_multiplicity(&crossing, &end, 100).h3.unwrap();
        assert!(!v.passed);
        let w = v.witness.unwrap();
        assert!(w[1].abs() < 1e-12, "witness {w:?}");
    }

    #[test]
    fn designed_square_root_branch_point() {
        // S(tau) = [[0, 1], [tau - 1, 0]]
        let a1 = RMatrix::identity(2, 2);
        let a0 = m(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let a2 = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let scan = branch_points_of_symbol(&a1, &a0, &[a2], &[1.0], 5.0, 2001).unwrap();
        assert_eq!(scan.points.len(), 1, "{scan:?}");
        assert!((scan.points[0].tau - 1.0).abs() < 1e-9);
        assert_eq!(scan.points[0].multiplicity, 2);
    }

    #[test]
    fn distinct_diagonal_has_no_branch_points() {
        let a1 = m(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let a0 = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let a2 = m(&[&[3.0, 0.0], &[0.0, 5.0]]);
        let scan = branch_points_of_symbol(&a1, &a0, &[a2], &[1.0], 50.0, 2001).unwrap();
        // diag(tau + 3, (tau + 5)/2) crosses at tau = -1 only... keep entries distinct
        assert!(scan.points.iter().all(|p| (p.tau + 1.0).abs() < 1e-9));
        let a1 = RMatrix::identity(2, 2);
        let a0 = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let scan = branch_points_of_symbol(&a1, &a0, &[a2_clone()], &[1.0], 50.0, 2001).unwrap();
        assert!(scan.points.is_empty(), "{scan:?}");
        assert!(scan.unresolved.is_empty());
    }

    fn a2_clone() -> RMatrix {
        m(&[&[3.0, 0.0], &[0.0, 5.0]])
    }

    #[test]
    fn isentropic_branch_points_symmetric_at_zero_frequency() {
        let sys = iso(-0.1);
        let rep = find_branch_points(&sys, &sys.end_state(), &[0.0]);
        let pts = rep.branch_points;
        assert!(pts.iter().all(|p| p.tau.abs() < 1e-9), "{pts:?}");
        for p in &pts {
            assert!(pts.iter().any(|q| (q.tau + p.tau).abs() < 1e-9 && q.multiplicity == p.multiplicity));
        }
    }

    #[test]
    fn genuine_coupling_isentropic_and_uncoupled() {
        let sys = iso(-0.1);
        let v = check_genuine_coupling(&sys, &sys.end_state(), 128).a2.unwrap();
        assert!(v.passed, "{v:?}");
        let z = RMatrix::zeros(2, 2);
        let sys = ConstantCoefficientSystem::new(
            vec![m(&[&[0.0, 1.0], &[1.0, 0.0]])],
            vec![vec![z]],
            RMatrix::identity(2, 2),
            1,
        );
        let end = EndState::new(&sys, RVector::zeros(2));
        let v = check_genuine_coupling(&sys, &end, 10).a2.unwrap();
        assert!(!v.passed);
    }

    #[test]
    fn verdicts_stable_under_state_rescaling() {
        let sys = iso(-0.1);
        let base = RVector::from_vec(vec![1.0, 0.3, -0.1]);
        let reference = check_structure(&sys, &[base.clone()], 64);
        for s in [0.5, 0.8, 1.3, 2.0] {
            let rep = check_structure(&sys, &[&base * s], 64);
            assert_eq!(rep.a1.unwrap().passed, reference.a1.clone().unwrap().passed);
            assert_eq!(rep.a3.unwrap().passed, reference.a3.clone().unwrap().passed);
        }
    }
}
