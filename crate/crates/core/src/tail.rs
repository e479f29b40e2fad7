//! Tail bounds, the exact law of `Σ (Z_i - W_i)`, closed-form recovery
//! thresholds and the greedy half-cut.

use serde::{Deserialize, Serialize};

use crate::ensembles::RngStream;
use crate::error::{check_probability, Error, Result};
use crate::symm_eig::SymmetricMatrix;

/// Chernoff lower-tail bound for a degree in `G(n, ρ log n / n)`:
/// `P[deg < t E deg] <= exp(-(1 - t - t log(1/t)) E deg)`, with
/// `E deg = ((n-1)/n) ρ log n`.
pub fn chernoff_degree_bound(n: usize, rho: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::domain(format!("t must lie in (0, 1], got {t}")));
    }
    if n < 2 || !(rho >= 0.0) {
        return Err(Error::domain("need n >= 2 and rho >= 0"));
    }
    let nf = n as f64;
    let rate = 1.0 - t - t * (1.0 / t).ln();
    Ok((-rate * (nf - 1.0) / nf * rho * nf.ln()).exp())
}

/// Expected degree `(n-1) p` with `p = ρ log n / n`.
pub fn expected_degree(n: usize, rho: f64) -> f64 {
    let nf = n as f64;
    (nf - 1.0) * rho * nf.ln() / nf
}

/// Bernstein bound for a sum of `m` i.i.d. centered variables:
/// `P[Σ x_j > t] <= exp(-(t²/2) / (m E x² + (t/3) ‖x‖∞))`.
pub fn bernstein_bound(t: f64, m: usize, var_each: f64, linf_each: f64) -> Result<f64> {
    if !(t >= 0.0) || !(var_each >= 0.0) || !(linf_each >= 0.0) {
        return Err(Error::domain("t, variance and sup bound must be >= 0"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let denom = m as f64 * var_each + t / 3.0 * linf_each;
    if denom <= 0.0 {
        return Err(Error::domain("variance must be positive when t > 0"));
    }
    Ok((-(t * t / 2.0) / denom).exp())
}

/// Law of `S = Σ_{i<m} (Z_i - W_i)` with `Z_i ~ Bernoulli(q)`,
/// `W_i ~ Bernoulli(p)`; entry `s + m` holds `P[S = s]`.
pub fn t_distribution(m: usize, p: f64, q: f64) -> Result<Vec<f64>> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    let up = q * (1.0 - p);
    let down = p * (1.0 - q);
    let stay = 1.0 - up - down;
    let width = 2 * m + 1;
    let mut cur = vec![0.0; width];
    cur[m] = 1.0;
    let mut next = vec![0.0; width];
    // After s steps the support is [m - s, m + s].
    for s in 0..m {
        next.iter_mut().for_each(|v| *v = 0.0);
        for idx in (m - s)..=(m + s) {
            let v = cur[idx];
            next[idx] += stay * v;
            next[idx + 1] += up * v;
            next[idx - 1] += down * v;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `T(m, p, q, δ) = P[Σ (Z_i - W_i) >= δ] = P[S >= ⌈δ⌉]`.
pub fn t_exact(m: usize, p: f64, q: f64, delta: f64) -> Result<f64> {
    if delta.is_nan() {
        return Err(Error::domain("delta is NaN"));
    }
    let dist = t_distribution(m, p, q)?;
    let mi = m as i64;
    let lo = delta.ceil();
    if lo <= -(mi as f64) {
        return Ok(1.0);
    }
    if lo > mi as f64 {
        return Ok(0.0);
    }
    let start = (lo as i64 + mi) as usize;
    Ok(dist[start..].iter().sum::<f64>().min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Frequency estimate of `T(m, p, q, δ)`, with standard error
/// `sqrt(p̂(1 - p̂)/trials)`.
pub fn t_montecarlo(
    m: usize,
    p: f64,
    q: f64,
    delta: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    check_probability("p", p)?;
    check_probability("q", q)?;
    if trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    let mut hits = 0usize;
    for _ in 0..trials {
        let mut s = 0i64;
        for _ in 0..m {
            if rng.bernoulli(q) {
                s += 1;
            }
            if rng.bernoulli(p) {
                s -= 1;
            }
        }
        if s as f64 >= delta {
            hits += 1;
        }
    }
    let est = hits as f64 / trials as f64;
    Ok(McEstimate {
        estimate: est,
        std_err: (est * (1.0 - est) / trials as f64).sqrt(),
        trials,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ThresholdQuery {
    /// `p = ρ log n / n`.
    ErConnectivity { rho: f64 },
    Z2Gaussian { n: usize, sigma: f64 },
    /// `k` and `delta` are the free constants of the sufficient condition.
    Z2Er {
        n: usize,
        p: f64,
        eps: f64,
        k: f64,
        delta: f64,
    },
    /// `p = α log n / n`, `q = β log n / n`.
    Sbm { alpha: f64, beta: f64 },
}

/// `√(n / (2 log n))`, the Gaussian synchronization threshold.
pub fn gaussian_sigma_star(n: usize) -> f64 {
    let nf = n as f64;
    (nf / (2.0 * nf.ln())).sqrt()
}

/// Signed distance to the predicted threshold; positive means recovery is
/// predicted with high probability.
pub fn threshold_margin(query: &ThresholdQuery) -> Result<f64> {
    match *query {
        ThresholdQuery::ErConnectivity { rho } => {
            if !(rho >= 0.0) {
                return Err(Error::domain("rho must be >= 0"));
            }
            Ok(rho - 1.0)
        }
        ThresholdQuery::Z2Gaussian { n, sigma } => {
            if n < 2 || !(sigma >= 0.0) {
                return Err(Error::domain("need n >= 2 and sigma >= 0"));
            }
            Ok(gaussian_sigma_star(n) - sigma)
        }
        ThresholdQuery::Z2Er { n, p, eps, k, delta } => {
            check_probability("p", p)?;
            check_probability("eps", eps)?;
            if n < 2 || eps >= 0.5 {
                return Err(Error::domain("need n >= 2 and eps < 1/2"));
            }
            let nf = n as f64;
            let ln = nf.ln();
            let c = 1.0 - 2.0 * eps;
            let rhs = (1.0 + delta) * 2.0 / (c * c) * (1.0 + k / ln.sqrt() + 5.0 / 3.0 * c) * ln;
            Ok((nf - 1.0) * p - rhs)
        }
        ThresholdQuery::Sbm { alpha, beta } => {
            if !(alpha >= 0.0 && beta >= 0.0) {
                return Err(Error::domain("alpha and beta must be >= 0"));
            }
            Ok(alpha.sqrt() - beta.sqrt() - 2f64.sqrt())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    /// The larger side.
    pub s: Vec<usize>,
    pub complement: Vec<usize>,
    pub weight: f64,
    /// `Σ_{i<j} w_ij`.
    pub total: f64,
}

fn check_weights(w: &SymmetricMatrix) -> Result<()> {
    let n = w.n();
    for i in 0..n {
        if w.get(i, i) != 0.0 {
            return Err(Error::domain(format!("nonzero diagonal weight at {i}")));
        }
        for j in i + 1..n {
            if w.get(i, j) < 0.0 {
                return Err(Error::domain(format!("negative weight at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Greedy cut: nodes are placed in index order on whichever side cuts more
/// weight to the nodes already placed (ties go to side A), which cuts at
/// least half of the total weight.
pub fn greedy_half_cut(w: &SymmetricMatrix) -> Result<Cut> {
    check_weights(w)?;
    let n = w.n();
    let mut side_a = vec![false; n];
    let mut weight = 0.0;
    for v in 0..n {
        let (mut to_a, mut to_b) = (0.0, 0.0);
        for u in 0..v {
            if side_a[u] {
                to_a += w.get(v, u);
            } else {
                to_b += w.get(v, u);
            }
        }
        if to_b >= to_a {
            side_a[v] = true;
            weight += to_b;
        } else {
            weight += to_a;
        }
    }
    let a: Vec<usize> = (0..n).filter(|&i| side_a[i]).collect();
    let b: Vec<usize> = (0..n).filter(|&i| !side_a[i]).collect();
    let (s, complement) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let total = (0..n)
        .map(|i| w.row(i)[i + 1..].iter().sum::<f64>())
        .sum();
    Ok(Cut {
        s,
        complement,
        weight,
        total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceSets {
    pub i_set: Vec<usize>,
    pub j_set: Vec<usize>,
}

/// Splits the nodes of a variance profile `w_ij = E X_ij²` with equal row
/// sums `σ²`: `J` is the smaller side of the greedy cut and `I` the nodes
/// of the larger side with `Σ_{j∈J} w_ij >= σ²/8`. Then `|I| >= n/8`.
pub fn build_variance_sets(w: &SymmetricMatrix, sigma2: f64) -> Result<VarianceSets> {
    let n = w.n();
    for i in 0..n {
        let sum: f64 = w
            .row(i)
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v)
            .sum();
        if (sum - sigma2).abs() > 1e-9 * sigma2.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::UnequalRowSums {
                row: i,
                sum,
                expected: sigma2,
            });
        }
    }
    let cut = greedy_half_cut(w)?;
    let threshold = sigma2 / 8.0;
    let i_set = cut
        .s
        .iter()
        .copied()
        .filter(|&i| cut.complement.iter().map(|&j| w.get(i, j)).sum::<f64>() >= threshold)
        .collect();
    Ok(VarianceSets {
        i_set,
        j_set: cut.complement,
    })
}
