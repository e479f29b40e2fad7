//! Reference implementations used as test oracles. They share no code with
//! the library's eigen-solver.
#![allow(dead_code)]

use lapcert::ensembles::{derive_stream, RngStream};
use lapcert::SymmetricMatrix;

pub fn dense(m: &SymmetricMatrix) -> Vec<Vec<f64>> {
    (0..m.n()).map(|i| m.row(i).to_vec()).collect()
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
pub fn jacobi_eigenvalues(m: &SymmetricMatrix) -> Vec<f64> {
    let n = m.n();
    let mut a = dense(m);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `det(M - x I)` by LU with partial pivoting.
pub fn char_poly_at(m: &SymmetricMatrix, x: f64) -> f64 {
    let n = m.n();
    let mut a = dense(m);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= x;
    }
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// Roots of the characteristic polynomial: sign changes on a fine grid over
/// the Gershgorin interval, refined by bisection. Assumes simple roots.
pub fn char_poly_roots(m: &SymmetricMatrix, grid: usize) -> Vec<f64> {
    let n = m.n();
    let r = (0..n)
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let (lo, hi) = (-r, r);
    let h = (hi - lo) / grid as f64;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = char_poly_at(m, x0);
    for k in 1..=grid {
        let x1 = lo + k as f64 * h;
        let f1 = char_poly_at(m, x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let fm = char_poly_at(m, mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// `sqrt(λmax(M²))` by power iteration.
pub fn power_norm(m: &SymmetricMatrix, iters: usize) -> f64 {
    let n = m.n();
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 7919 + 13) % 101) as f64 / 101.0 + 0.5).collect();
    let mut est = 0.0;
    for _ in 0..iters {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let w = m.matvec(&m.matvec(&v));
        est = w.iter().map(|x| x * x).sum::<f64>().sqrt().sqrt();
        v = w;
    }
    est
}

/// Symmetric matrix with i.i.d. uniform entries in `[-scale, scale]`.
pub fn uniform_matrix(n: usize, scale: f64, rng: &mut RngStream) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(n, |_, _| scale * (2.0 * rng.uniform() - 1.0)).unwrap()
}

pub fn random_signs(n: usize, rng: &mut RngStream) -> Vec<i8> {
    (0..n).map(|_| if rng.bernoulli(0.5) { 1 } else { -1 }).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + scale)
}

/// Nonnegative weights with equal row sums: a positive combination of
/// `P + Pᵀ` over fixed-point-free permutations `P`.
pub fn equal_row_profile(n: usize, layers: usize, seed: u64) -> (SymmetricMatrix, f64) {
    let mut rng = derive_stream(seed, 7);
    let mut w = SymmetricMatrix::zeros(n);
    let mut total = 0.0;
    for _ in 0..layers {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            perm.swap(i, j);
        }
        let shift = 1 + rng.below(n as u64 - 1) as usize;
        let c = 0.1 + rng.uniform();
        total += 2.0 * c;
        for i in 0..n {
            let (a, b) = (perm[i], perm[(i + shift) % n]);
            let cur = w.get(a, b);
            // i -> i + shift and its transpose both land on (a, b).
            w.set(a, b, cur + c);
        }
    }
    // Every node is the source and the target of one arc per layer, so each
    // row gains 2c (a 2-cycle hits the same pair twice).
    let sums: Vec<f64> = (0..n).map(|i| w.row(i).iter().sum()).collect();
    let sigma2 = sums[0];
    for s in &sums {
        assert!((s - sigma2).abs() <= 1e-9 * sigma2, "profile rows {sums:?} vs {total}");
    }
    (w, sigma2)
}
