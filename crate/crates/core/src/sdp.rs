//! Low-rank (Burer–Monteiro) solver for `max Tr(YX) s.t. X_ii = 1, X ⪰ 0`,
//! used as an independent check of the certificate verdicts.
//!
//! `X = RRᵀ` with unit-norm rows of `R ∈ R^{n×k}`; feasibility is kept by
//! renormalizing rows after each Riemannian gradient step.

use serde::{Deserialize, Serialize};

use crate::certificates::{dual_diagonal, TAU_POS};
use crate::ensembles::{derive_stream, mix64, validate_signs, RngStream};
use crate::error::{Error, Result};
use crate::symm_eig::{dot, eig_all, tridiagonalize, SymmetricMatrix};
use crate::Signs;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const RESTART_SALT: u64 = 0x5eed_0f_5ec0_9d;

/// Rank `ceil(sqrt(2n))`, at least 2.
pub fn default_rank(n: usize) -> usize {
    ((2.0 * n as f64).sqrt().ceil() as usize).max(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorPoint {
    pub n: usize,
    pub k: usize,
    /// Row-major `n × k`, unit-norm rows.
    pub r: Vec<f64>,
}

impl FactorPoint {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.r[i * self.k..(i + 1) * self.k]
    }

    /// `max_i |‖row_i‖ - 1|`.
    pub fn feasibility_error(&self) -> f64 {
        (0..self.n)
            .map(|i| (dot(self.row(i), self.row(i)).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `Tr(Y RRᵀ)`.
    pub fn objective(&self, y: &SymmetricMatrix) -> f64 {
        let yr = mul_yr(y, self);
        dot(&yr, &self.r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCheck {
    /// `λ1(D - Y) >= -τ(1 + ‖D - Y‖)`.
    pub feasible: bool,
    /// `Tr(D) - xᵀYx`; zero up to rounding whenever `x` is a sign vector.
    pub gap: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Uniqueness is certified only when `λ2` clears the dead band.
    pub unique: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: f64,
    pub rounded_x: Signs,
    pub rounded_objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// `false` when the iteration cap was reached before the gradient
    /// tolerance.
    pub converged: bool,
    /// `None` when the dual built from `rounded_x` is infeasible.
    pub dual_gap: Option<f64>,
    /// Objective after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmOptions {
    pub rank: Option<usize>,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for BmOptions {
    fn default() -> Self {
        BmOptions {
            rank: None,
            max_iters: 20_000,
            grad_tol: 1e-7,
        }
    }
}

fn mul_yr(y: &SymmetricMatrix, pt: &FactorPoint) -> Vec<f64> {
    let (n, k) = (pt.n, pt.k);
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        let acc = &mut out[i * k..(i + 1) * k];
        for (j, &v) in y.row(i).iter().enumerate() {
            if v != 0.0 {
                for (a, &r) in acc.iter_mut().zip(pt.row(j)) {
                    *a += v * r;
                }
            }
        }
    }
    out
}

fn normalize_rows(r: &mut [f64], k: usize) {
    for row in r.chunks_exact_mut(k) {
        let norm = dot(row, row).sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        } else {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[0] = 1.0;
        }
    }
}

/// Rows i.i.d. uniform on the unit sphere of `R^k`.
pub fn random_point(n: usize, k: usize, rng: &mut RngStream) -> FactorPoint {
    let mut r: Vec<f64> = (0..n * k).map(|_| rng.normal()).collect();
    normalize_rows(&mut r, k);
    FactorPoint { n, k, r }
}

/// Power-iteration estimate of `‖Y‖` (a lower bound, tight after enough
/// steps).
fn norm_estimate(y: &SymmetricMatrix) -> f64 {
    let n = y.n();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
    let mut est = 0.0;
    for _ in 0..30 {
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        v = y.matvec(&v);
        est = dot(&v, &v).sqrt();
    }
    est
}

/// Riemannian gradient ascent with backtracking on the product of spheres.
///
/// Returns the final point and a report; hitting `max_iters` is flagged by
/// `converged == false` rather than an error.
pub fn bm_solve(
    y: &SymmetricMatrix,
    k: usize,
    max_iters: usize,
    grad_tol: f64,
    rng: &mut RngStream,
) -> Result<(FactorPoint, SolveReport)> {
    let n = y.n();
    if k < 2 {
        return Err(Error::domain(format!("rank must be >= 2, got {k}")));
    }
    if !(grad_tol > 0.0) {
        return Err(Error::domain("grad_tol must be positive"));
    }
    let norm = norm_estimate(y);
    let stop = grad_tol * (1.0 + norm);
    let t0 = 1.0 / norm.max(f64::MIN_POSITIVE);

    let mut pt = random_point(n, k, rng);
    let mut yr = mul_yr(y, &pt);
    let mut f = dot(&yr, &pt.r);
    let mut history = vec![f];
    let mut grad = vec![0.0; n * k];
    let mut grad_norm;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // Riemannian gradient of Tr(Y RRᵀ): project 2YR row-wise onto the
        // tangent space of each sphere.
        let mut g2 = 0.0;
        for i in 0..n {
            let r = &pt.r[i * k..(i + 1) * k];
            let e = &yr[i * k..(i + 1) * k];
            let radial = dot(e, r);
            for c in 0..k {
                let g = 2.0 * (e[c] - radial * r[c]);
                grad[i * k + c] = g;
                g2 += g * g;
            }
        }
        grad_norm = g2.sqrt();
        if grad_norm <= stop || norm == 0.0 {
            converged = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }
        let mut t = t0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand: Vec<f64> = pt.r.iter().zip(&grad).map(|(r, g)| r + t * g).collect();
            normalize_rows(&mut cand, k);
            let cp = FactorPoint { n, k, r: cand };
            let cyr = mul_yr(y, &cp);
            // f(R') - f(R) = <Y(R' + R), R' - R>, free of the cancellation
            // in subtracting two objectives near n².
            let gain: f64 = cyr
                .iter()
                .zip(&yr)
                .zip(cp.r.iter().zip(&pt.r))
                .map(|((a, b), (c, d))| (a + b) * (c - d))
                .sum();
            if gain >= ARMIJO * t * g2 {
                accepted = Some((cp, cyr, f + gain));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cp, cyr, cf)) => {
                pt = cp;
                yr = cyr;
                f = cf;
                history.push(f);
                iterations += 1;
            }
            // No ascent step survives the line search: stationary to
            // working precision.
            None => {
                converged = true;
                break;
            }
        }
    }

    let (rounded_x, rounded_objective) = round_rank_one(&pt, y)?;
    let dual = verify_optimal(y, &rounded_x)?;
    let report = SolveReport {
        objective: f,
        rounded_x,
        rounded_objective,
        grad_norm,
        iterations,
        converged,
        dual_gap: dual.feasible.then_some(dual.gap),
        history,
    };
    Ok((pt, report))
}

/// Signs of the top eigenvector of `RRᵀ` (computed through the `k × k`
/// Gram matrix `RᵀR`); zero entries round to `+1`. Returns the signs and
/// `xᵀYx`.
pub fn round_rank_one(pt: &FactorPoint, y: &SymmetricMatrix) -> Result<(Signs, f64)> {
    let (n, k) = (pt.n, pt.k);
    let gram = SymmetricMatrix::from_fn(k, |a, b| {
        (0..n).map(|i| pt.r[i * k + a] * pt.r[i * k + b]).sum()
    })?;
    let spec = eig_all(&gram, true)?;
    let top = spec.eigenvector(k - 1).expect("vectors requested");
    let x: Signs = (0..n)
        .map(|i| if dot(pt.row(i), top) >= 0.0 { 1 } else { -1 })
        .collect();
    let xf: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
    let obj = dot(&xf, &y.matvec(&xf));
    Ok((x, obj))
}

/// Builds `D` from `(Y, x)` and checks dual feasibility of `D - Y`.
pub fn verify_optimal(y: &SymmetricMatrix, x: &[i8]) -> Result<DualCheck> {
    validate_signs(y.n(), x)?;
    let n = y.n();
    let d = dual_diagonal(y, x)?;
    let xf: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
    let gap = d.iter().sum::<f64>() - dot(&xf, &y.matvec(&xf));
    let dm = y.scaled(-1.0).add_diag(&d);
    let tri = tridiagonalize(&dm, false);
    let lambda1 = tri.kth_smallest(1)?;
    let lambda_n = tri.kth_smallest(n)?;
    let lambda2 = if n >= 2 { tri.kth_smallest(2)? } else { f64::INFINITY };
    let band = TAU_POS * (1.0 + lambda1.abs().max(lambda_n.abs()));
    Ok(DualCheck {
        feasible: lambda1 >= -band,
        gap,
        lambda1,
        lambda2,
        unique: lambda2 > band,
    })
}

/// Outcome of solving, rounding and verifying against a known truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub recovered: bool,
    pub dual_feasible: bool,
    pub restarts: usize,
    pub report: SolveReport,
}

pub fn same_up_to_sign(a: &[i8], b: &[i8]) -> bool {
    a.len() == b.len() && (a == b || a.iter().zip(b).all(|(x, y)| *x == -*y))
}

/// Solve + round + verify, with one restart from a fresh stream if the
/// first rounding misses `truth`.
pub fn cross_check(
    y: &SymmetricMatrix,
    truth: &[i8],
    opts: &BmOptions,
    master_seed: u64,
    stream_id: u64,
) -> Result<CrossCheck> {
    let k = opts.rank.unwrap_or_else(|| default_rank(y.n()));
    let mut restarts = 0;
    let mut rng = derive_stream(master_seed, stream_id);
    loop {
        let (_, report) = bm_solve(y, k, opts.max_iters, opts.grad_tol, &mut rng)?;
        let recovered = same_up_to_sign(&report.rounded_x, truth);
        if recovered || restarts == 1 {
            return Ok(CrossCheck {
                recovered,
                dual_feasible: report.dual_gap.is_some(),
                restarts,
                report,
            });
        }
        restarts += 1;
        rng = derive_stream(mix64(master_seed ^ RESTART_SALT), stream_id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zzt(z: &[i8]) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(z.len(), |i, j| f64::from(z[i] * z[j])).unwrap()
    }

    #[test]
    fn noiseless_converges_to_n_squared() {
        let z: Vec<i8> = (0..20).map(|i| if i % 3 == 0 { -1 } else { 1 }).collect();
        let y = zzt(&z);
        let (pt, rep) = bm_solve(&y, 2, 20_000, 1e-9, &mut derive_stream(1, 0)).unwrap();
        assert!((rep.objective - 400.0).abs() <= 1e-6 * 400.0, "{}", rep.objective);
        assert!(same_up_to_sign(&rep.rounded_x, &z));
        assert_eq!(rep.dual_gap.map(|g| g.abs() < 1e-9), Some(true));
        assert!(pt.feasibility_error() <= 1e-12);
    }

    #[test]
    fn zero_and_identity_objectives() {
        let (_, rep) = bm_solve(&SymmetricMatrix::zeros(6), 3, 100, 1e-8, &mut derive_stream(2, 0)).unwrap();
        assert_eq!(rep.objective, 0.0);
        let (pt, rep) = bm_solve(&SymmetricMatrix::identity(6), 3, 100, 1e-8, &mut derive_stream(2, 1)).unwrap();
        assert!((rep.objective - 6.0).abs() < 1e-12);
        assert!((pt.objective(&SymmetricMatrix::identity(6)) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        let y = SymmetricMatrix::zeros(3);
        assert!(bm_solve(&y, 1, 10, 1e-6, &mut derive_stream(0, 0)).is_err());
        assert!(bm_solve(&y, 2, 10, 0.0, &mut derive_stream(0, 0)).is_err());
        assert!(matches!(verify_optimal(&y, &[1, 2, 1]), Err(Error::NonSignVector(1))));
    }

    #[test]
    fn rank_one_rounding() {
        let z: Vec<i8> = vec![1, -1, -1, 1, 1];
        let r: Vec<f64> = z.iter().flat_map(|&s| [f64::from(s), 0.0, 0.0]).collect();
        let pt = FactorPoint { n: 5, k: 3, r };
        let (x, obj) = round_rank_one(&pt, &zzt(&z)).unwrap();
        assert!(same_up_to_sign(&x, &z));
        assert_eq!(obj, 25.0);
    }

    #[test]
    fn tied_blocks_round_deterministically() {
        let r: Vec<f64> = (0..6)
            .flat_map(|i| if i < 3 { [1.0, 0.0] } else { [0.0, 1.0] })
            .collect();
        let pt = FactorPoint { n: 6, k: 2, r };
        let y = SymmetricMatrix::identity(6);
        let a = round_rank_one(&pt, &y).unwrap();
        let b = round_rank_one(&pt, &y).unwrap();
        assert_eq!(a, b);
        assert!(a.0.iter().all(|&s| s == 1 || s == -1));
    }

    #[test]
    fn verify_cases() {
        let z: Vec<i8> = vec![1, -1, 1, 1];
        let v = verify_optimal(&zzt(&z), &z).unwrap();
        assert!(v.feasible && v.unique);
        assert_eq!(v.gap, 0.0);
        assert!((v.lambda2 - 4.0).abs() < 1e-12);

        let v = verify_optimal(&SymmetricMatrix::ones(2), &[1, -1]).unwrap();
        assert!(!v.feasible);
        assert!((v.lambda1 + 2.0).abs() < 1e-12);

        let v = verify_optimal(&SymmetricMatrix::zeros(3), &[1, 1, -1]).unwrap();
        assert!(v.feasible && !v.unique);
        assert_eq!(v.gap, 0.0);
    }

    #[test]
    fn default_rank_values() {
        assert_eq!(default_rank(1), 2);
        assert_eq!(default_rank(50), 10);
        assert_eq!(default_rank(51), 11);
    }
}
