//! Dense and banded linear algebra helpers shared by the solvers.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type CVector = DVector<Complex64>;
pub type RVector = DVector<f64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Eigenvalues of a complex matrix from its Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = nalgebra::linalg::Schur::new(m.clone()).unpack();
    t.diagonal().iter().copied().collect()
}

/// Eigenvalues of a real matrix, possibly complex.
pub fn real_eigenvalues(m: &RMatrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn symmetric_eigen(m: &RMatrix) -> (Vec<f64>, RMatrix) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = RMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn min_symmetric_eigenvalue(m: &RMatrix) -> f64 {
    symmetric_eigen(m).0.first().copied().unwrap_or(f64::INFINITY)
}

/// Symmetric square root and inverse square root of a positive definite matrix.
pub fn spd_sqrt_pair(m: &RMatrix) -> Option<(RMatrix, RMatrix)> {
    let (vals, vecs) = symmetric_eigen(m);
    if vals.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let s = RMatrix::from_diagonal(&RVector::from_iterator(vals.len(), vals.iter().map(|v| v.sqrt())));
    let si = RMatrix::from_diagonal(&RVector::from_iterator(vals.len(), vals.iter().map(|v| 1.0 / v.sqrt())));
    Some((&vecs * s * vecs.transpose(), &vecs * si * vecs.transpose()))
}

pub fn spectral_radius(m: &CMatrix) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Matrix sign function by scaled Newton iteration. `None` if an iterate is singular
/// or the iteration stalls, which happens when eigenvalues sit on the imaginary axis.
pub fn sign_function(m: &CMatrix) -> Option<CMatrix> {
    let n = m.nrows();
    let mut s = m.clone();
    for _ in 0..100 {
        let lu = s.clone().lu();
        let det = lu.determinant();
        if !det.is_finite() || det.norm() == 0.0 {
            return None;
        }
        let inv = lu.try_inverse()?;
        let scale = det.norm().powf(-1.0 / n as f64);
        let next = (&s * Complex64::from(scale) + inv * Complex64::from(1.0 / scale)) * Complex64::from(0.5);
        let change = (&next - &s).norm();
        s = next;
        if change <= 1e-14 * s.norm().max(1.0) {
            return Some(s);
        }
        if !s.norm().is_finite() {
            return None;
        }
    }
    None
}

/// Spectral projector onto the generalized eigenspace with Re < 0 and its rank.
pub fn stable_projector(m: &CMatrix) -> Option<(CMatrix, usize)> {
    let n = m.nrows();
    let sign = sign_function(m)?;
    let p = (CMatrix::identity(n, n) - sign) * Complex64::from(0.5);
    let rank = p.trace().re.round().max(0.0) as usize;
    Some((p, rank))
}

/// Orthonormal basis (columns) for the range of a rank-`k` matrix.
pub fn orthonormal_range(p: &CMatrix, k: usize) -> CMatrix {
    let svd = p.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    CMatrix::from_fn(p.nrows(), k, |i, j| u[(i, idx[j])])
}

/// Orthonormal basis for the null space of a real matrix with `cols` columns.
pub fn null_space(m: &RMatrix, rel_tol: f64) -> RMatrix {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return RMatrix::identity(cols, cols);
    }
    // pad to a square matrix so the SVD returns a full right basis
    let rows = m.nrows().max(cols);
    let mut padded = RMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max().max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..cols).filter(|&k| svd.singular_values[k] <= rel_tol * smax).collect();
    RMatrix::from_fn(cols, keep.len(), |i, j| vt[(keep[j], i)])
}

/// Orthonormal basis for the null space of a complex matrix.
pub fn complex_null_space(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return CMatrix::identity(cols, cols);
    }
    let rows = m.nrows().max(cols);
    let mut padded = CMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max().max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..cols).filter(|&k| svd.singular_values[k] <= rel_tol * smax).collect();
    CMatrix::from_fn(cols, keep.len(), |i, j| vt[(keep[j], i)].conj())
}

/// Orthonormalize columns and return the factor relating old to new: `a = q * r`.
pub fn thin_qr(a: &CMatrix) -> (CMatrix, CMatrix) {
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Sine of the largest principal angle between the spans of two orthonormal frames.
pub fn subspace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let proj = b - a * (a.adjoint() * b);
    proj.singular_values().max()
}

pub fn det(m: &CMatrix) -> Complex64 {
    if m.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

/// Square matrix stored by diagonals with room for pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![T::zero(); n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl, "entry ({i},{j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.kl < i || j > i + self.ku + self.kl {
            return T::zero();
        }
        self.data[self.slot(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row_range(i).fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j]))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// LU factorization with partial pivoting. `None` on an exactly zero pivot.
    pub fn factor(mut self) -> Option<BandedLu<T>> {
        let n = self.n;
        let mut pivots = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).modulus();
            for i in k + 1..=last_row {
                let v = self.get(i, k).modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            if best == 0.0 {
                return None;
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let factor = self.data[s] / pivot;
                self.data[s] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = self.data[self.slot(k, j)];
                    let ij = self.slot(i, j);
                    self.data[ij] -= factor * kj;
                }
            }
        }
        Some(BandedLu { m: self, pivots, pivot_ratio: min_pivot / max_pivot })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu<T> {
    m: BandedMatrix<T>,
    pivots: Vec<usize>,
    pivot_ratio: f64,
}

impl<T: ComplexField<RealField = f64> + Copy> BandedLu<T> {
    /// Ratio of smallest to largest pivot modulus, a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let ku = self.m.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.m.get(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                acc -= self.m.get(k, j) * b[j];
            }
            b[k] = acc / self.m.get(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn banded_solve_matches_dense() {
        let n = 12;
        let mut band = BandedMatrix::<Complex64>::zeros(n, 2, 3);
        for i in 0..n {
            for j in band.row_range(i) {
                let v = Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 * 0.3);
                band.set(i, j, v);
            }
        }
        let dense = band.to_dense();
        let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let lu = band.factor().expect("nonsingular");
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let residual = &dense * CVector::from_vec(x) - CVector::from_vec(rhs);
        assert!(residual.norm() < 1e-10, "residual {}", residual.norm());
    }

    #[test]
    fn stable_projector_of_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(-2.0, 1.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(-0.5, -4.0),
        ]));
        let (p, rank) = stable_projector(&m).unwrap();
        assert_eq!(rank, 2);
        assert_relative_eq!(p[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p[(1, 1)].re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p[(2, 2)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sign_function_fails_on_imaginary_axis() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)]));
        assert!(sign_function(&m).is_none());
    }

    #[test]
    fn null_space_of_row() {
        let m = RMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
    }

    #[test]
    fn complex_null_space_annihilates() {
        let m = CMatrix::from_row_slice(1, 2, &[Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0)]);
        let ns = complex_null_space(&m, 1e-12);
        assert_eq!(ns.ncols(), 1);
        assert!((&m * &ns).norm() < 1e-12);
    }
}
