//! Matrix constructions: `L_X = D_X - X`, graph Laplacians, centered
//! Laplacians, `L_Synch`, `Γ_SBM` and the signed adjacency.
//!
//! Here a Laplacian is any symmetric matrix with zero row sums; it need not
//! be positive semidefinite.

use crate::ensembles::{GraphParams, GraphSample, SyncInstance};
use crate::error::{Error, Result};
use crate::symm_eig::SymmetricMatrix;

/// `L_X = D_X - X`, where `D_X` is the diagonal of row sums of `X`.
///
/// The diagonal of `X` cancels: `L_ii = Σ_{j≠i} x_ij`, summed without ever
/// touching `x_ii`, so the result is bit-identical for any diagonal.
pub fn laplacian_of(x: &SymmetricMatrix) -> SymmetricMatrix {
    let n = x.n();
    let mut l = SymmetricMatrix::zeros(n);
    for i in 0..n {
        let row = x.row(i);
        let mut s = 0.0;
        for (j, &v) in row.iter().enumerate() {
            if j != i {
                s += v;
                if j > i {
                    l.set(i, j, -v);
                }
            }
        }
        l.set(i, i, s);
    }
    l
}

/// Standard graph Laplacian `L_A = D_A - A`.
pub fn graph_laplacian(g: &GraphSample) -> SymmetricMatrix {
    let n = g.n();
    let mut l = SymmetricMatrix::zeros(n);
    for (i, d) in g.degrees().into_iter().enumerate() {
        l.set(i, i, d as f64);
    }
    for &(i, j) in g.edges() {
        l.set(i, j, -1.0);
    }
    l
}

/// `E[L_G] - L_G` for `G ~ G(n, p)`: diagonal `(n-1)p - deg(i)`, off the
/// diagonal `A_ij - p`.
pub fn centered_neg_laplacian(g: &GraphSample, p: f64) -> SymmetricMatrix {
    let n = g.n();
    let mut l = SymmetricMatrix::zeros(n);
    let expected = (n as f64 - 1.0) * p;
    for i in 0..n {
        for j in i + 1..n {
            l.set(i, j, -p);
        }
    }
    for &(i, j) in g.edges() {
        l.set(i, j, 1.0 - p);
    }
    for (i, d) in g.degrees().into_iter().enumerate() {
        l.set(i, i, expected - d as f64);
    }
    l
}

/// Per-node counts of uncorrupted and corrupted measurements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyncDegrees {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

pub fn sync_degrees(inst: &SyncInstance) -> Result<SyncDegrees> {
    if !inst.is_discrete() {
        return Err(Error::RequiresDiscreteInstance);
    }
    let mut plus = vec![0usize; inst.n];
    let mut minus = vec![0usize; inst.n];
    for &(i, j) in &inst.g_edges {
        plus[i] += 1;
        plus[j] += 1;
    }
    for &(i, j) in &inst.h_edges {
        plus[i] -= 1;
        plus[j] -= 1;
        minus[i] += 1;
        minus[j] += 1;
    }
    Ok(SyncDegrees { plus, minus })
}

/// `L_Synch = L_G - 2 L_H`.
pub fn l_synch(inst: &SyncInstance) -> Result<SymmetricMatrix> {
    let deg = sync_degrees(inst)?;
    let n = inst.n;
    let mut l = SymmetricMatrix::zeros(n);
    for &(i, j) in &inst.g_edges {
        l.set(i, j, -1.0);
    }
    for &(i, j) in &inst.h_edges {
        l.set(i, j, 1.0);
    }
    for i in 0..n {
        l.set(i, i, deg.plus[i] as f64 - deg.minus[i] as f64);
    }
    Ok(l)
}

/// Same-cluster and cross-cluster degrees of a labelled graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeSplit {
    pub deg_in: Vec<usize>,
    pub deg_out: Vec<usize>,
}

pub fn degree_split(g: &GraphSample) -> Result<DegreeSplit> {
    let labels = g.labels().ok_or(Error::MissingLabels)?;
    let n = g.n();
    let mut deg_in = vec![0usize; n];
    let mut deg_out = vec![0usize; n];
    for &(i, j) in g.edges() {
        if labels[i] == labels[j] {
            deg_in[i] += 1;
            deg_in[j] += 1;
        } else {
            deg_out[i] += 1;
            deg_out[j] += 1;
        }
    }
    Ok(DegreeSplit { deg_in, deg_out })
}

/// `Γ_SBM = D_+ - D_- - A` with `D_±` the inner/outer degree diagonals.
pub fn gamma_sbm(g: &GraphSample) -> Result<SymmetricMatrix> {
    let split = degree_split(g)?;
    let mut m = SymmetricMatrix::zeros(g.n());
    for &(i, j) in g.edges() {
        m.set(i, j, -1.0);
    }
    for i in 0..g.n() {
        m.set(i, i, split.deg_in[i] as f64 - split.deg_out[i] as f64);
    }
    Ok(m)
}

/// `E[Γ_SBM]` for the balanced SBM with the sample's labels.
pub fn expected_gamma_sbm(labels: &[i8], p: f64, q: f64) -> SymmetricMatrix {
    let n = labels.len();
    let half = n as f64 / 2.0;
    let diag = (half - 1.0) * p - half * q;
    let mut m = SymmetricMatrix::zeros(n);
    for i in 0..n {
        m.set(i, i, diag);
        for j in i + 1..n {
            m.set(i, j, if labels[i] == labels[j] { -p } else { -q });
        }
    }
    m
}

fn sbm_params(g: &GraphSample) -> Result<(f64, f64)> {
    match g.params() {
        GraphParams::Sbm { p, q } => Ok((p, q)),
        _ => Err(Error::MissingParams("sbm")),
    }
}

/// `E[Γ_SBM] - Γ_SBM`, the centered matrix of the SBM sufficient
/// condition.
pub fn centered_gamma_sbm(g: &GraphSample) -> Result<SymmetricMatrix> {
    let (p, q) = sbm_params(g)?;
    let labels = g.labels().ok_or(Error::MissingLabels)?;
    let gamma = gamma_sbm(g)?;
    Ok(expected_gamma_sbm(labels, p, q).add_scaled(-1.0, &gamma))
}

/// `diag(g) (E[Γ_SBM] - Γ_SBM) diag(g)`, which has zero row sums.
pub fn centered_sbm_laplacian(g: &GraphSample) -> Result<SymmetricMatrix> {
    let labels = g.labels().ok_or(Error::MissingLabels)?;
    Ok(centered_gamma_sbm(g)?.conjugate_signs(labels))
}

/// `B = 2A - (J - I)`: +1 on edges, -1 on non-edges, zero diagonal.
pub fn signed_adjacency(g: &GraphSample) -> SymmetricMatrix {
    let n = g.n();
    let mut b = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            b.set(i, j, -1.0);
        }
    }
    for &(i, j) in g.edges() {
        b.set(i, j, 1.0);
    }
    b
}
