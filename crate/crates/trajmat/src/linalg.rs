//! Symmetric matrices stored as a single upper triangle, plus the few dense
//! helpers the rest of the crate needs. Storing one triangle makes symmetry
//! structural: there is no lower triangle that could drift out of sync.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric `n x n` matrix; only the upper triangle is stored (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    tri: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, tri: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn from_triangle(n: usize, tri: Vec<f64>) -> Result<Self> {
        if tri.len() != n * (n + 1) / 2 {
            return Err(Error::DimMismatch {
                context: "SymMat::from_triangle",
                expected: n * (n + 1) / 2,
                got: tri.len(),
            });
        }
        Ok(Self { n, tri })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn triangle(&self) -> &[f64] {
        &self.tri
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.n);
        // offset of row i within the packed triangle
        i * self.n - i * (i.saturating_sub(1)) / 2 - i + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.tri[self.idx(a, b)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let k = self.idx(a, b);
        self.tri[k] = v;
    }

    /// `self += v v^T` (rank-one update).
    pub fn add_outer(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.n);
        let mut k = 0;
        for i in 0..self.n {
            let vi = v[i];
            for &vj in &v[i..] {
                self.tri[k] += vi * vj;
                k += 1;
            }
        }
    }

    /// `self += s * other` (entrywise on the triangle).
    pub fn add_scaled(&mut self, other: &SymMat, s: f64) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.tri.iter_mut().zip(other.tri.iter()) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.tri {
            *a *= s;
        }
    }

    /// Frobenius inner product <A, B> = tr(A B), using triangle storage:
    /// diagonal once, off-diagonal twice.
    pub fn inner(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..self.n {
            acc += self.tri[k] * other.tri[k];
            k += 1;
            for _ in (i + 1)..self.n {
                acc += 2.0 * self.tri[k] * other.tri[k];
                k += 1;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn frobenius_distance(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..self.n {
            let d = self.tri[k] - other.tri[k];
            acc += d * d;
            k += 1;
            for _ in (i + 1)..self.n {
                let d = self.tri[k] - other.tri[k];
                acc += 2.0 * d * d;
                k += 1;
            }
        }
        acc.max(0.0).sqrt()
    }

    /// Squared Frobenius distance with early exit once `cutoff` is exceeded;
    /// used by reachable-set deduplication and nearest-member scans.
    pub fn frobenius_distance_sq_capped(&self, other: &SymMat, cutoff: f64) -> f64 {
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..self.n {
            let d = self.tri[k] - other.tri[k];
            acc += d * d;
            k += 1;
            for _ in (i + 1)..self.n {
                let d = self.tri[k] - other.tri[k];
                acc += 2.0 * d * d;
                k += 1;
            }
            if acc > cutoff {
                return acc;
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.tri.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.tri.iter().all(|v| v.is_finite())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Store the symmetric part (A + A^T)/2 of a dense matrix.
    pub fn from_dense_symmetrized(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimMismatch {
                context: "SymMat::from_dense_symmetrized",
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let n = a.nrows();
        let mut out = Self::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                out.tri[k] = 0.5 * (a[(i, j)] + a[(j, i)]);
                k += 1;
            }
        }
        Ok(out)
    }

    /// Eigenvalues sorted descending (symmetric eigensolver on the
    /// reconstructed dense matrix).
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        let mut vals = symmetric_eigenvalues_jacobi(&self.to_dense());
        vals.sort_by(|a, b| b.total_cmp(a));
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues_desc().last().copied().unwrap_or(0.0)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations
/// (unsorted). Always converges on symmetric input and never produces
/// NaN, unlike tridiagonalization-based QL on some exactly rank-deficient
/// matrices with repeated eigenvalues.
pub fn symmetric_eigenvalues_jacobi(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-15 * scale;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).collect()
}

/// Max |A_ij - A_ji| over a dense square matrix.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Kronecker product `a (x) b` with row-major block convention:
/// entry ((i*p + k), (j*q + l)) = a[i,j] * b[k,l] for b of size p x q.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Kronecker product of vectors with the same convention:
/// (u (x) v)[i * v.len() + j] = u[i] * v[j].
pub fn kron_vec(u: &[f64], v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), u.len() * v.len());
    let mut k = 0;
    for ui in u {
        for vj in v {
            out[k] = ui * vj;
            k += 1;
        }
    }
}

/// |det| of a square matrix via LU.
pub fn abs_determinant(a: &DMatrix<f64>) -> f64 {
    a.clone().lu().determinant().abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_indexing_round_trip() {
        for n in 1..8 {
            let mut m = SymMat::zeros(n);
            let mut counter = 1.0;
            for i in 0..n {
                for j in i..n {
                    m.set(i, j, counter);
                    counter += 1.0;
                }
            }
            let d = m.to_dense();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(d[(i, j)], m.get(i, j));
                    assert_eq!(d[(i, j)], d[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn outer_product_matches_dense() {
        let v = [1.0, -2.0, 0.5, 3.0];
        let mut m = SymMat::zeros(4);
        m.add_outer(&v);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), v[i] * v[j]);
            }
        }
    }

    #[test]
    fn inner_matches_trace_product() {
        let v = [0.3, 1.0, -1.5];
        let w = [2.0, -0.25, 0.75];
        let mut a = SymMat::zeros(3);
        a.add_outer(&v);
        let mut b = SymMat::zeros(3);
        b.add_outer(&w);
        let dense = (a.to_dense() * b.to_dense()).trace();
        assert!((a.inner(&b) - dense).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_rank_one() {
        let v = [3.0, 4.0];
        let mut m = SymMat::zeros(2);
        m.add_outer(&v);
        let eig = m.eigenvalues_desc();
        assert!((eig[0] - 25.0).abs() < 1e-9);
        assert!(eig[1].abs() < 1e-9);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // diag(1, 2, 3) rotated by a random orthogonal-ish congruence has
        // the same eigenvalues as computed by the solver on the original.
        let d = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let mut vals = symmetric_eigenvalues_jacobi(&d);
        vals.sort_by(|a, b| a.total_cmp(b));
        let expect = [1.0, 3.0, 5.0];
        for (v, e) in vals.iter().zip(expect.iter()) {
            assert!((v - e).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn jacobi_handles_rank_deficient_sparse_outer_sums() {
        // Sums of sparse outer products with repeated zero eigenvalues;
        // the solver must stay finite and PSD-consistent.
        let n = 28;
        let mut m = SymMat::zeros(n);
        for k in 0..3 {
            let mut v = vec![0.0; n];
            v[0] = 0.142857142857 * (k as f64);
            v[1] = 0.2857142857;
            v[10 + k] = 1.0;
            v[26] = -0.01;
            v[27] = 1.0;
            m.add_outer(&v);
        }
        let vals = m.eigenvalues_desc();
        assert!(vals.iter().all(|v| v.is_finite()));
        assert!(vals.len() == n);
        // PSD: nonnegative up to roundoff, exactly three nonzero values.
        assert!(vals[27] >= -1e-12);
        assert!(vals[3].abs() < 1e-12);
        let trace: f64 = (0..n).map(|i| m.get(i, i)).sum();
        let eig_sum: f64 = vals.iter().sum();
        assert!((trace - eig_sum).abs() < 1e-10);
    }

    #[test]
    fn kron_vec_row_major_convention() {
        let u = [2.0, 3.0];
        let v = [1.0, 10.0, 100.0];
        let mut out = [0.0; 6];
        kron_vec(&u, &v, &mut out);
        assert_eq!(out, [2.0, 20.0, 200.0, 3.0, 30.0, 300.0]);
    }

    #[test]
    fn kron_matrix_matches_vector_convention() {
        // (U u) (x) (S v) must equal (U (x) S)(u (x) v) under one convention.
        let u_mat = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s_mat = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 1.5]);
        let u = [1.0, -1.0];
        let v = [2.0, 0.5];
        let mut uv = [0.0; 4];
        kron_vec(&u, &v, &mut uv);
        let lhs = kron(&u_mat, &s_mat) * DMatrix::from_column_slice(4, 1, &uv);
        let uu = &u_mat * DMatrix::from_column_slice(2, 1, &u);
        let sv = &s_mat * DMatrix::from_column_slice(2, 1, &v);
        let mut rhs = [0.0; 4];
        kron_vec(uu.as_slice(), sv.as_slice(), &mut rhs);
        for i in 0..4 {
            assert!((lhs[(i, 0)] - rhs[i]).abs() < 1e-12);
        }
    }
}
