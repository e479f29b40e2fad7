//! Tightness certificates for the rank-one SDP relaxation
//! `max Tr(YX) s.t. X_ii = 1, X ⪰ 0`.
//!
//! For a candidate sign vector `x` the dual diagonal is
//! `D_ii = Σ_j Y_ij x_i x_j`. It always satisfies `Tr(D) = xᵀYx` and
//! `(D - Y)x = 0`, so `xxᵀ` is the unique optimum as soon as
//! `λ2(D - Y) > 0`. The model-specific certificates below evaluate that
//! second eigenvalue on the structured form of `D - Y` (`L_Synch`,
//! `2Γ_SBM + 11ᵀ`, `L_{11ᵀ} - σ L_{[-W]}`).

use serde::{Deserialize, Serialize};

use crate::ensembles::{validate_signs, EnsembleProfile, GraphParams, GraphSample, SyncInstance, SyncParams};
use crate::error::{Error, Result};
use crate::laplacian::{
    centered_gamma_sbm, degree_split, gamma_sbm, graph_laplacian, l_synch, laplacian_of, sync_degrees,
};
use crate::symm_eig::{dot, lambda_max, spectral_norm, tridiagonalize, SymmetricMatrix};

/// Positivity dead band for λ2, relative to `1 + ‖D - Y‖`.
pub const TAU_POS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSide {
    Above,
    Below,
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub d_diag: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `‖(D - Y)x‖₂`.
    pub residual_null: f64,
    pub tight: bool,
    /// λ2 for the rank-one and graph certificates; `n/σ - λmax(L_[-W])`
    /// for the Gaussian synchronization path.
    pub margin: f64,
    pub side: ThresholdSide,
    /// `1 + ‖D - Y‖`, the scale the dead band is measured against.
    pub scale: f64,
}

/// The per-instance degree statistic of the MLE oracles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub min_stat: f64,
    pub oracle_block: bool,
}

/// Certificate verdict and oracle statistic for one instance. Both are
/// measurements; `certified` does not imply `!oracle_block` or vice versa.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryVerdict {
    pub certified: bool,
    pub oracle_block: bool,
    pub min_stat: f64,
    pub threshold_side: ThresholdSide,
}

impl RecoveryVerdict {
    pub fn combine(report: &CertificateReport, oracle: OracleVerdict) -> Self {
        RecoveryVerdict {
            certified: report.tight,
            oracle_block: oracle.oracle_block,
            min_stat: oracle.min_stat,
            threshold_side: report.side,
        }
    }
}

fn classify(lambda2: f64, scale: f64, tau: f64) -> (bool, ThresholdSide) {
    let band = tau * scale;
    if lambda2 > band {
        (true, ThresholdSide::Above)
    } else if lambda2 < -band {
        (false, ThresholdSide::Below)
    } else {
        (false, ThresholdSide::Boundary)
    }
}

/// `D_ii = Σ_j Y_ij x_i x_j`.
pub fn dual_diagonal(y: &SymmetricMatrix, x: &[i8]) -> Result<Vec<f64>> {
    validate_signs(y.n(), x)?;
    Ok((0..y.n())
        .map(|i| {
            let xi = f64::from(x[i]);
            y.row(i)
                .iter()
                .zip(x)
                .map(|(v, &xj)| v * xi * f64::from(xj))
                .sum()
        })
        .collect())
}

/// Spectral report on an explicitly formed `D - Y` whose null vector is `x`.
fn report_on(dm: &SymmetricMatrix, d_diag: Vec<f64>, x: &[f64], tau: f64) -> Result<CertificateReport> {
    let n = dm.n();
    let mx = dm.matvec(x);
    let residual_null = dot(&mx, &mx).sqrt();
    if n == 1 {
        // X_11 = 1 is the only feasible point.
        let l1 = dm.get(0, 0);
        return Ok(CertificateReport {
            d_diag,
            lambda1: l1,
            lambda2: f64::INFINITY,
            residual_null,
            tight: true,
            margin: f64::INFINITY,
            side: ThresholdSide::Above,
            scale: 1.0 + l1.abs(),
        });
    }
    let tri = tridiagonalize(dm, false);
    let lambda1 = tri.kth_smallest(1)?;
    let lambda2 = tri.kth_smallest(2)?;
    let lambda_n = tri.kth_smallest(n)?;
    let scale = 1.0 + lambda1.abs().max(lambda_n.abs());
    let (tight, side) = classify(lambda2, scale, tau);
    Ok(CertificateReport {
        d_diag,
        lambda1,
        lambda2,
        residual_null,
        tight,
        margin: lambda2,
        side,
        scale,
    })
}

/// Dual certificate for `X = xxᵀ` with the default dead band.
pub fn certify_rank_one(y: &SymmetricMatrix, x: &[i8]) -> Result<CertificateReport> {
    certify_rank_one_with(y, x, TAU_POS)
}

pub fn certify_rank_one_with(y: &SymmetricMatrix, x: &[i8], tau: f64) -> Result<CertificateReport> {
    let d = dual_diagonal(y, x)?;
    let dm = y.scaled(-1.0).add_diag(&d);
    let xf: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
    report_on(&dm, d, &xf, tau)
}

/// Certificate for a synchronization instance and its ground truth.
///
/// Discrete instances are certified on `L_Synch` with `x = 1` (the
/// conjugation by `diag(z)` preserves the spectrum). Gaussian instances
/// compare `λmax(L_[-W])` against `n/σ`.
pub fn certify_z2sync(inst: &SyncInstance) -> Result<CertificateReport> {
    certify_z2sync_with(inst, TAU_POS)
}

pub fn certify_z2sync_with(inst: &SyncInstance, tau: f64) -> Result<CertificateReport> {
    match inst.params {
        SyncParams::Er { .. } => {
            let l = l_synch(inst)?;
            let d = dual_diagonal(&inst.y, &inst.z)?;
            report_on(&l, d, &vec![1.0; inst.n], tau)
        }
        SyncParams::Gaussian { sigma } => certify_gaussian(inst, sigma, tau),
    }
}

fn certify_gaussian(inst: &SyncInstance, sigma: f64, tau: f64) -> Result<CertificateReport> {
    let n = inst.n;
    let nf = n as f64;
    let d = dual_diagonal(&inst.y, &inst.z)?;
    let zf: Vec<f64> = inst.z.iter().map(|&s| f64::from(s)).collect();
    let residual_null = {
        let dm = inst.y.scaled(-1.0).add_diag(&d);
        let r = dm.matvec(&zf);
        dot(&r, &r).sqrt()
    };
    if sigma == 0.0 || n == 1 {
        return Ok(CertificateReport {
            d_diag: d,
            lambda1: 0.0,
            lambda2: if n == 1 { f64::INFINITY } else { nf },
            residual_null,
            tight: true,
            margin: f64::INFINITY,
            side: ThresholdSide::Above,
            scale: 1.0 + nf,
        });
    }
    // Recover the conjugated noise diag(z) W diag(z) from the measurements.
    let z = &inst.z;
    let w = SymmetricMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            (f64::from(z[i] * z[j]) * inst.y.get(i, j) - 1.0) / sigma
        }
    })?;
    let l = laplacian_of(&w.scaled(-1.0));
    let tri = tridiagonalize(&l, false);
    let mu_max = tri.kth_smallest(n)?;
    let mu_next = tri.kth_smallest(n - 1)?;
    let mu_min = tri.kth_smallest(1)?;

    let margin = nf / sigma - mu_max;
    let smallest = nf - sigma * mu_max;
    let (lambda1, lambda2) = if smallest > 0.0 {
        (0.0, smallest)
    } else {
        (smallest, (nf - sigma * mu_next).min(0.0))
    };
    let scale = 1.0 + nf + sigma * mu_max.abs().max(mu_min.abs());
    let (tight, side) = classify(sigma * margin, scale, tau);
    Ok(CertificateReport {
        d_diag: d,
        lambda1,
        lambda2,
        residual_null,
        tight,
        margin,
        side,
        scale,
    })
}

/// Certificate for the planted SBM partition on `2Γ_SBM + 11ᵀ`, which is
/// `D - B` for the signed adjacency `B = 2A - (J - I)`.
pub fn certify_sbm(g: &GraphSample) -> Result<CertificateReport> {
    certify_sbm_with(g, TAU_POS)
}

pub fn certify_sbm_with(g: &GraphSample, tau: f64) -> Result<CertificateReport> {
    let labels = g.labels().ok_or(Error::MissingLabels)?;
    let n = g.n();
    let dm = gamma_sbm(g)?
        .scaled(2.0)
        .add_scaled(1.0, &SymmetricMatrix::ones(n));
    let split = degree_split(g)?;
    let d: Vec<f64> = (0..n)
        .map(|i| 2.0 * (split.deg_in[i] as f64 - split.deg_out[i] as f64) + 1.0)
        .collect();
    let xf: Vec<f64> = labels.iter().map(|&s| f64::from(s)).collect();
    report_on(&dm, d, &xf, tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientCondition {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `λmax(E[Γ_SBM] - Γ_SBM) < (n/2)(p - q)`.
pub fn sufficient_condition_sbm(g: &GraphSample) -> Result<SufficientCondition> {
    let (p, q) = match g.params() {
        GraphParams::Sbm { p, q } => (p, q),
        _ => return Err(Error::MissingParams("sbm")),
    };
    let centered = centered_gamma_sbm(g)?;
    let lhs = lambda_max(&centered)?;
    let rhs = g.n() as f64 / 2.0 * (p - q);
    Ok(SufficientCondition {
        lhs,
        rhs,
        holds: lhs < rhs,
    })
}

/// Connectivity via `λ2(L_G) > TAU_POS · n`.
pub fn connectivity_spectral(g: &GraphSample) -> bool {
    connectivity_spectral_with(g, TAU_POS)
}

pub fn connectivity_spectral_with(g: &GraphSample, tau: f64) -> bool {
    let n = g.n();
    if n <= 1 {
        return true;
    }
    let l = graph_laplacian(g);
    let lambda2 = tridiagonalize(&l, false)
        .kth_smallest(2)
        .expect("2 <= n");
    lambda2 > tau * n as f64
}

/// Disjoint-set forest with union by rank and path halving.
#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `true` when `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

pub fn connectivity_unionfind(g: &GraphSample) -> bool {
    let mut dsu = DisjointSet::new(g.n());
    for &(i, j) in g.edges() {
        dsu.union(i, j);
    }
    dsu.components() <= 1
}

/// `min_i Σ_{j≠i} Y_ij z_i z_j`: flipping node `i` changes `zᵀYz` by
/// `-4` times its term, so a negative minimum means the ground truth is not
/// the MLE. For discrete instances this is `min_i (deg_+(i) - deg_-(i))`.
pub fn flip_statistic(y: &SymmetricMatrix, z: &[i8]) -> Result<OracleVerdict> {
    validate_signs(y.n(), z)?;
    let mut min_stat = f64::INFINITY;
    for i in 0..y.n() {
        let zi = f64::from(z[i]);
        let s: f64 = y
            .row(i)
            .iter()
            .zip(z)
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (v, &zj))| v * zi * f64::from(zj))
            .sum();
        min_stat = min_stat.min(s);
    }
    Ok(OracleVerdict {
        min_stat,
        oracle_block: min_stat < 0.0,
    })
}

/// Single-node MLE oracle for discrete synchronization:
/// `min_i (deg_+(i) - deg_-(i))`, blocking when negative.
pub fn mle_flip_oracle_z2(inst: &SyncInstance) -> Result<OracleVerdict> {
    let deg = sync_degrees(inst)?;
    let min_stat = deg
        .plus
        .iter()
        .zip(&deg.minus)
        .map(|(&p, &m)| p as i64 - m as i64)
        .min()
        .unwrap_or(0) as f64;
    Ok(OracleVerdict {
        min_stat,
        oracle_block: min_stat < 0.0,
    })
}

/// `min_i (deg_in(i) - deg_out(i))` for a labelled graph, blocking when
/// negative.
pub fn degree_diag_oracle_sbm(g: &GraphSample) -> Result<OracleVerdict> {
    let split = degree_split(g)?;
    let min_stat = split
        .deg_in
        .iter()
        .zip(&split.deg_out)
        .map(|(&a, &b)| a as i64 - b as i64)
        .min()
        .unwrap_or(0) as f64;
    Ok(OracleVerdict {
        min_stat,
        oracle_block: min_stat < 0.0,
    })
}

pub fn assess_z2sync(inst: &SyncInstance) -> Result<RecoveryVerdict> {
    let report = certify_z2sync(inst)?;
    let oracle = if inst.is_discrete() {
        mle_flip_oracle_z2(inst)?
    } else {
        flip_statistic(&inst.y, &inst.z)?
    };
    Ok(RecoveryVerdict::combine(&report, oracle))
}

pub fn assess_sbm(g: &GraphSample) -> Result<RecoveryVerdict> {
    let report = certify_sbm(g)?;
    Ok(RecoveryVerdict::combine(&report, degree_diag_oracle_sbm(g)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainRatio {
    pub ratio: f64,
    pub max_diag: f64,
    pub lam_max: f64,
}

/// `λmax(L) / max_i L_ii` for a Laplacian `L`.
pub fn theorem_main_ratio(l: &SymmetricMatrix) -> Result<MainRatio> {
    let n = l.n();
    let slack = 1e-9 * (1.0 + n as f64 * l.max_abs());
    for (row, sum) in l.row_sums().into_iter().enumerate() {
        if sum.abs() > slack {
            return Err(Error::NonLaplacian { row, sum });
        }
    }
    let max_diag = l.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) {
        return Err(Error::NonPositiveDiagonalMax(max_diag));
    }
    let lam_max = lambda_max(l)?;
    Ok(MainRatio {
        ratio: lam_max / max_diag,
        max_diag,
        lam_max,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBoundCheck {
    pub norm: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Evaluates `‖X‖ <= 3σ + t` with `σ` the profile's row deviation.
pub fn norm_bound_check(x: &SymmetricMatrix, profile: &EnsembleProfile, t: f64) -> Result<NormBoundCheck> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t must be >= 0, got {t}")));
    }
    let norm = spectral_norm(x)?;
    let bound = 3.0 * profile.sigma + t;
    Ok(NormBoundCheck {
        norm,
        bound,
        holds: norm <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{planted_labels, GraphParams};

    fn zzt(z: &[i8]) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(z.len(), |i, j| f64::from(z[i] * z[j])).unwrap()
    }

    fn sbm_graph(n: usize, edges: &[(usize, usize)], p: f64, q: f64) -> GraphSample {
        GraphSample::from_edges(n, edges, Some(planted_labels(n)), GraphParams::Sbm { p, q }).unwrap()
    }

    #[test]
    fn dual_diagonal_cases() {
        let z: Vec<i8> = vec![1, -1, 1, -1, -1];
        assert_eq!(dual_diagonal(&zzt(&z), &z).unwrap(), vec![5.0; 5]);
        assert_eq!(
            dual_diagonal(&SymmetricMatrix::ones(2), &[1, -1]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(dual_diagonal(&SymmetricMatrix::zeros(3), &[1, 1, -1]).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            dual_diagonal(&SymmetricMatrix::zeros(2), &[1, 0]),
            Err(Error::NonSignVector(1))
        ));
    }

    #[test]
    fn rank_one_cases() {
        let z: Vec<i8> = vec![1, -1, 1, 1, -1];
        let r = certify_rank_one(&zzt(&z), &z).unwrap();
        assert!((r.lambda2 - 5.0).abs() < 1e-12);
        assert!(r.tight);
        assert!(r.residual_null < 1e-12);

        let r = certify_rank_one(&SymmetricMatrix::ones(2), &[1, -1]).unwrap();
        assert!((r.lambda1 + 2.0).abs() < 1e-12);
        assert!(r.lambda2.abs() < 1e-12);
        assert!(!r.tight);
        assert_eq!(r.side, ThresholdSide::Boundary);

        let r = certify_rank_one(&SymmetricMatrix::zeros(4), &[1, 1, 1, 1]).unwrap();
        assert_eq!(r.lambda2, 0.0);
        assert!(!r.tight);
    }

    #[test]
    fn sbm_small_cases() {
        let g = sbm_graph(4, &[(0, 1), (2, 3)], 1.0, 0.0);
        let r = certify_sbm(&g).unwrap();
        assert!((r.lambda2 - 4.0).abs() < 1e-12);
        assert!(r.tight);
        let s = sufficient_condition_sbm(&g).unwrap();
        assert!(s.lhs.abs() < 1e-12);
        assert_eq!(s.rhs, 2.0);
        assert!(s.holds);

        let empty = sbm_graph(4, &[], 0.1, 0.1);
        let r = certify_sbm(&empty).unwrap();
        assert!(r.lambda2.abs() < 1e-12);
        assert!(!r.tight);
        assert!(!sufficient_condition_sbm(&empty).unwrap().holds);

        let unlabelled = GraphSample::from_edges(4, &[], None, GraphParams::Fixed).unwrap();
        assert!(matches!(certify_sbm(&unlabelled), Err(Error::MissingLabels)));
    }

    #[test]
    fn sbm_oracle_limits() {
        let n = 6;
        let within: Vec<(usize, usize)> = vec![(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)];
        let v = degree_diag_oracle_sbm(&sbm_graph(n, &within, 1.0, 0.0)).unwrap();
        assert_eq!(v.min_stat, (n / 2 - 1) as f64);
        assert!(!v.oracle_block);
        let across: Vec<(usize, usize)> = (0..3).flat_map(|i| (3..6).map(move |j| (i, j))).collect();
        let v = degree_diag_oracle_sbm(&sbm_graph(n, &across, 0.0, 1.0)).unwrap();
        assert_eq!(v.min_stat, -((n / 2) as f64));
        assert!(v.oracle_block);
    }

    #[test]
    fn connectivity_small() {
        let p3 = GraphSample::from_edges(3, &[(0, 1), (1, 2)], None, GraphParams::Fixed).unwrap();
        assert!(connectivity_spectral(&p3) && connectivity_unionfind(&p3));
        let two = GraphSample::from_edges(4, &[(0, 1), (2, 3)], None, GraphParams::Fixed).unwrap();
        assert!(!connectivity_spectral(&two) && !connectivity_unionfind(&two));
    }

    #[test]
    fn single_corrupted_edge_blocks() {
        let mut y = SymmetricMatrix::zeros(2);
        y.set(0, 1, -1.0);
        let inst = SyncInstance {
            n: 2,
            y,
            z: vec![1, 1],
            g_edges: vec![(0, 1)],
            h_edges: vec![(0, 1)],
            params: SyncParams::Er { p: 1.0, eps: 0.1 },
        };
        let v = mle_flip_oracle_z2(&inst).unwrap();
        assert_eq!(v.min_stat, -1.0);
        assert!(v.oracle_block);
        assert_eq!(flip_statistic(&inst.y, &inst.z).unwrap(), v);
    }

    #[test]
    fn ratio_cases() {
        let l = laplacian_of(&SymmetricMatrix::ones(3));
        let r = theorem_main_ratio(&l).unwrap();
        assert!((r.lam_max - 3.0).abs() < 1e-12);
        assert_eq!(r.max_diag, 2.0);
        assert!((r.ratio - 1.5).abs() < 1e-12);
        assert!(matches!(
            theorem_main_ratio(&SymmetricMatrix::zeros(3)),
            Err(Error::NonPositiveDiagonalMax(_))
        ));
        assert!(matches!(
            theorem_main_ratio(&SymmetricMatrix::identity(3)),
            Err(Error::NonLaplacian { .. })
        ));
    }

    #[test]
    fn norm_bound_cases() {
        let profile = EnsembleProfile {
            sigma: 1.0,
            sigma_inf: 1.0,
            n: 10,
        };
        for t in [0.0, 1.0, 10.0] {
            assert!(norm_bound_check(&SymmetricMatrix::zeros(10), &profile, t).unwrap().holds);
        }
        let mut x = SymmetricMatrix::zeros(10);
        x.set(0, 1, 10.0);
        assert!(!norm_bound_check(&x, &profile, 1.0).unwrap().holds);
    }

    #[test]
    fn dsu_components() {
        let mut d = DisjointSet::new(5);
        assert!(d.union(0, 1));
        assert!(!d.union(1, 0));
        d.union(3, 4);
        assert_eq!(d.components(), 3);
        assert_eq!(d.find(0), d.find(1));
        assert_ne!(d.find(0), d.find(3));
    }
}
