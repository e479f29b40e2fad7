//! Dense symmetric linear algebra.
//!
//! Full spectra come from Householder tridiagonalization followed by the
//! implicit QL iteration with Wilkinson shifts. Single eigenvalues (λ2 for
//! the certificates, λmax for the ratio experiments) skip the QL phase and
//! bisect the Sturm count of the tridiagonal form.

use crate::error::{Error, Result};

/// Relative tolerance used by the invariants checks throughout the crate.
pub const TOL: f64 = 1e-10;

/// Maximum number of implicit QL sweeps spent on a single eigenvalue.
pub const MAX_QL_SWEEPS: usize = 30;

/// Dense real symmetric matrix.
///
/// Entries are stored in full row-major form, but every write goes through
/// [`SymmetricMatrix::set`], which mirrors the value, so `get(i, j)` and
/// `get(j, i)` are always bit-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// The all-ones matrix `J = 11ᵀ`.
    pub fn ones(n: usize) -> Self {
        SymmetricMatrix {
            n,
            data: vec![1.0; n * n],
        }
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::NonFinite(i, i));
            }
            m.data[i * n + i] = d;
        }
        Ok(m)
    }

    /// Builds a matrix from the upper triangle: `f(i, j)` is called once for
    /// every `i <= j` and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite(i, j));
                }
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        Ok(m)
    }

    /// Builds a matrix from rows that must already be exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() {
                    return Err(Error::NonFinite(i, j));
                }
                if j > i && v.to_bits() != data[j * n + i].to_bits() {
                    return Err(Error::Asymmetric(i, j));
                }
            }
        }
        Ok(SymmetricMatrix { n, data })
    }

    /// Symmetrizes a dense row-major array by averaging with its transpose.
    /// Returns the matrix and the largest absolute asymmetry encountered.
    pub fn from_dense_symmetrized(n: usize, data: &[f64]) -> Result<(Self, f64)> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        let mut asym = 0.0_f64;
        let m = Self::from_fn(n, |i, j| {
            let (a, b) = (data[i * n + j], data[j * n + i]);
            asym = asym.max((a - b).abs());
            0.5 * (a + b)
        })?;
        if asym.is_nan() {
            return Err(Error::NonFinite(0, 0));
        }
        Ok((m, asym))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Writes `v` at `(i, j)` and `(j, i)`.
    ///
    /// Panics if `v` is not finite.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Adds `v` to `(i, j)` and, off the diagonal, to `(j, i)`.
    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Row-major view of all entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        assert!(c.is_finite());
        SymmetricMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        SymmetricMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    /// `self + diag(d)`.
    pub fn add_diag(&self, d: &[f64]) -> Self {
        assert_eq!(self.n, d.len());
        let mut m = self.clone();
        for (i, &v) in d.iter().enumerate() {
            m.data[i * self.n + i] += v;
        }
        m
    }

    /// `diag(s) · self · diag(s)` for a sign vector `s`.
    pub fn conjugate_signs(&self, s: &[i8]) -> Self {
        assert_eq!(self.n, s.len());
        let n = self.n;
        let mut m = self.clone();
        for i in 0..n {
            for j in 0..n {
                if s[i] != s[j] {
                    m.data[i * n + j] = -m.data[i * n + j];
                }
            }
        }
        m
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `row[j] -= v[i] w[j] + w[i] v[j]` over the columns covered by `row`,
/// where `row` starts at column `col0` and the vectors at index `off`.
fn rank2_row(row: &mut [f64], i: usize, col0: usize, off: usize, v: &[f64], w: &[f64]) {
    let (vi, wi) = (v[i - off], w[i - off]);
    let (v, w) = (&v[col0 - off..], &w[col0 - off..]);
    for ((r, &vj), &wj) in row.iter_mut().zip(v).zip(w) {
        *r -= vi * wj + wi * vj;
    }
}

/// Symmetric tridiagonal matrix, optionally with the orthogonal `Q` such
/// that `M = Q T Qᵀ`.
#[derive(Clone, Debug)]
pub struct TriDiagonal {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    /// Row-major `n × n`.
    pub q_accum: Option<Vec<f64>>,
}

/// Eigenvalues in ascending order, with optional eigenvectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Row `j` of this row-major `n × n` array is the unit eigenvector for
    /// `eigenvalues[j]`.
    pub eigenvectors: Option<Vec<f64>>,
    /// `max_j ‖M v_j − λ_j v_j‖`; zero when eigenvectors were not requested.
    pub residual: f64,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, j: usize) -> Option<&[f64]> {
        let n = self.n();
        self.eigenvectors.as_ref().map(|v| &v[j * n..(j + 1) * n])
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.n() - 1]
    }
}

/// Householder reduction to tridiagonal form.
pub fn tridiagonalize(m: &SymmetricMatrix, want_q: bool) -> TriDiagonal {
    let n = m.n();
    let mut a = m.data.clone();
    let mut diag = vec![0.0; n];
    let mut offdiag = vec![0.0; n.saturating_sub(1)];
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut p = vec![0.0; n];
    // The rank-2 update of each step is applied lazily, one row at a time,
    // in the same pass that forms the next product `A v`.
    let mut pending: Option<(usize, Vec<f64>, Vec<f64>)> = None;

    for k in 0..n.saturating_sub(2) {
        if let Some((off, pv, pw)) = &pending {
            rank2_row(&mut a[k * n + k..k * n + n], k, k, *off, pv, pw);
        }
        diag[k] = a[k * n + k];
        let start = k + 1;
        let len = n - start;
        let x = &a[k * n + start..k * n + n];
        let scale = x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let tail_zero = x[1..].iter().all(|&v| v == 0.0);
        if scale == 0.0 || tail_zero {
            offdiag[k] = x[0];
            continue;
        }
        let norm = scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt();
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|t| t * t).sum();
        let beta = 2.0 / vtv;

        // p = beta * A_sub v, finishing the previous update row by row.
        for i in 0..len {
            let row = &mut a[(start + i) * n + start..(start + i) * n + n];
            if let Some((off, pv, pw)) = &pending {
                rank2_row(row, start + i, start, *off, pv, pw);
            }
            p[i] = beta * dot(row, &v);
        }
        let kappa = 0.5 * beta * dot(&p[..len], &v);
        for i in 0..len {
            p[i] -= kappa * v[i];
        }
        // A_sub -= v wᵀ + w vᵀ with w = p
        pending = Some((start, v.clone(), p[..len].to_vec()));
        offdiag[k] = alpha;
        if want_q {
            reflectors.push((start, v, beta));
        }
    }
    if n >= 2 {
        if let Some((off, pv, pw)) = &pending {
            for i in n - 2..n {
                rank2_row(&mut a[i * n + n - 2..i * n + n], i, n - 2, *off, pv, pw);
            }
        }
        diag[n - 2] = a[(n - 2) * n + n - 2];
        offdiag[n - 2] = a[(n - 1) * n + n - 2];
    }
    if n >= 1 {
        diag[n - 1] = a[(n - 1) * n + n - 1];
    }

    let q_accum = want_q.then(|| {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        // Q = H_0 H_1 ... applied right to left; H_k only touches rows and
        // columns >= start of its reflector.
        let mut s = vec![0.0; n];
        for (start, v, beta) in reflectors.iter().rev() {
            let start = *start;
            s[start..].iter_mut().for_each(|t| *t = 0.0);
            for (i, &vi) in v.iter().enumerate() {
                let row = &q[(start + i) * n + start..(start + i) * n + n];
                for (sc, &r) in s[start..].iter_mut().zip(row) {
                    *sc += vi * r;
                }
            }
            for (i, &vi) in v.iter().enumerate() {
                let f = beta * vi;
                let row = &mut q[(start + i) * n + start..(start + i) * n + n];
                for (r, &sc) in row.iter_mut().zip(&s[start..]) {
                    *r -= f * sc;
                }
            }
        }
        q
    });

    TriDiagonal {
        diag,
        offdiag,
        q_accum,
    }
}

impl TriDiagonal {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    fn pivmin(&self) -> f64 {
        let emax = self.offdiag.iter().fold(1.0_f64, |acc, e| acc.max(e * e));
        f64::MIN_POSITIVE * emax
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.offdiag[i - 1].abs();
            }
            if i + 1 < n {
                r += self.offdiag[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.n() {
            let coupling = if i == 0 {
                0.0
            } else {
                let e = self.offdiag[i - 1];
                e * e / q
            };
            q = self.diag[i] - x - coupling;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (1-based) by bisection, resolved to a few
    /// ulps of the spectral radius.
    pub fn kth_smallest(&self, k: usize) -> Result<f64> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        let (glo, ghi) = self.gershgorin();
        if glo == ghi {
            return Ok(glo);
        }
        let w = glo.abs().max(ghi.abs());
        let pad = 8.0 * f64::EPSILON * w + 4.0 * self.pivmin();
        let (mut lo, mut hi) = (glo - pad, ghi + pad);
        let tol = 2.0 * f64::EPSILON * w + self.pivmin();
        for _ in 0..256 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Eigenvalues only, via implicit QL.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut d = self.diag.clone();
        let mut e = self.offdiag.clone();
        e.push(0.0);
        implicit_ql(&mut d, &mut e, None)?;
        d.sort_by(f64::total_cmp);
        Ok(d)
    }
}

/// Implicit QL with Wilkinson shifts on `(d, e)`; `e[i]` couples `i` and
/// `i + 1` and `e[n-1]` is scratch. When `zt` is supplied its rows are
/// rotated alongside, so on entry row `j` should hold the `j`-th column of
/// the basis that reduced the matrix.
fn implicit_ql(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(Error::NonConvergence {
                    index: l,
                    sweeps: MAX_QL_SWEEPS,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = zt.as_deref_mut() {
                    let (head, tail) = z.split_at_mut((i + 1) * n);
                    let zi = &mut head[i * n..];
                    let zi1 = &mut tail[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Full eigendecomposition, eigenvalues ascending.
pub fn eig_all(m: &SymmetricMatrix, want_vectors: bool) -> Result<Spectrum> {
    let n = m.n();
    let tri = tridiagonalize(m, want_vectors);
    let mut d = tri.diag.clone();
    let mut e = tri.offdiag.clone();
    e.push(0.0);

    let mut zt = tri.q_accum.map(|q| transpose(&q, n));
    implicit_ql(&mut d, &mut e, zt.as_deref_mut())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&j| d[j]).collect();

    let eigenvectors = zt.map(|z| {
        let mut out = Vec::with_capacity(n * n);
        for &j in &order {
            out.extend_from_slice(&z[j * n..(j + 1) * n]);
        }
        out
    });

    let residual = match &eigenvectors {
        Some(v) => (0..n)
            .map(|j| {
                let vj = &v[j * n..(j + 1) * n];
                let mv = m.matvec(vj);
                mv.iter()
                    .zip(vj)
                    .map(|(a, b)| (a - eigenvalues[j] * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max),
        None => 0.0,
    };

    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        residual,
    })
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// `k`-th smallest eigenvalue (1-based, with multiplicity).
pub fn lambda_k(m: &SymmetricMatrix, k: usize) -> Result<f64> {
    if k == 0 || k > m.n() {
        return Err(Error::IndexOutOfRange { index: k, n: m.n() });
    }
    tridiagonalize(m, false).kth_smallest(k)
}

/// Several order statistics of the spectrum from one reduction.
pub fn lambdas(m: &SymmetricMatrix, ks: &[usize]) -> Result<Vec<f64>> {
    let tri = tridiagonalize(m, false);
    ks.iter().map(|&k| tri.kth_smallest(k)).collect()
}

pub fn lambda_max(m: &SymmetricMatrix) -> Result<f64> {
    lambda_k(m, m.n())
}

/// `‖M‖ = max(|λ1|, |λn|)`.
pub fn spectral_norm(m: &SymmetricMatrix) -> Result<f64> {
    if m.n() == 0 {
        return Ok(0.0);
    }
    let tri = tridiagonalize(m, false);
    let lo = tri.kth_smallest(1)?;
    let hi = tri.kth_smallest(m.n())?;
    Ok(lo.abs().max(hi.abs()))
}
