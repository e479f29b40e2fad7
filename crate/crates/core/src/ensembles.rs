//! Seeded samplers for the random models: Wigner matrices, Erdős–Rényi
//! graphs, the balanced two-community SBM and Z2 synchronization
//! instances (Erdős–Rényi measurement graph or dense Gaussian noise).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::symm_eig::SymmetricMatrix;
use crate::Signs;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible stream of 64-bit uniforms identified by
/// `(master_seed, stream_id)`.
///
/// Not meant to be shared between threads; each parallel trial derives its
/// own stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
    master_seed: u64,
    stream_id: u64,
    spare_normal: Option<f64>,
}

/// Derives the stream for `(master_seed, stream_id)`. Both words pass
/// through the SplitMix64 finalizer before the ChaCha key is expanded.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RngStream {
    let mut state = mix64(master_seed) ^ mix64(stream_id.wrapping_add(GOLDEN_GAMMA));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    RngStream {
        rng: ChaCha8Rng::from_seed(key),
        master_seed,
        stream_id,
        spare_normal: None,
    }
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal by the Marsaglia polar method; the second variate of
    /// each accepted pair is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare_normal.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    /// Uniform index in `0..n` (Lemire's widening multiply).
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GraphParams {
    Er { p: f64 },
    Sbm { p: f64, q: f64 },
    /// Built by hand rather than sampled.
    Fixed,
}

/// An undirected simple graph, optionally with a planted balanced
/// partition.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSample {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    labels: Option<Signs>,
    params: GraphParams,
}

impl GraphSample {
    /// Builds a graph from an edge list. Duplicate edges are merged; self
    /// loops and out-of-range endpoints are rejected.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize)],
        labels: Option<Signs>,
        params: GraphParams,
    ) -> Result<Self> {
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::IndexOutOfRange {
                    index: a.max(b),
                    n,
                });
            }
            if a == b {
                return Err(Error::domain(format!("self-loop at node {a}")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        if let Some(l) = &labels {
            validate_labels(n, l)?;
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &norm {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(GraphSample {
            n,
            edges: norm,
            neighbors,
            labels,
            params,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    pub fn params(&self) -> GraphParams {
        self.params
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency(&self) -> SymmetricMatrix {
        let mut a = SymmetricMatrix::zeros(self.n);
        for &(i, j) in &self.edges {
            a.set(i, j, 1.0);
        }
        a
    }
}

fn validate_labels(n: usize, labels: &[i8]) -> Result<()> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if let Some(i) = labels.iter().position(|&s| s != 1 && s != -1) {
        return Err(Error::NonSignVector(i));
    }
    let plus = labels.iter().filter(|&&s| s == 1).count();
    if n % 2 != 0 || 2 * plus != n {
        return Err(Error::domain("planted labels must be balanced"));
    }
    Ok(())
}

pub(crate) fn validate_signs(n: usize, x: &[i8]) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    match x.iter().position(|&s| s != 1 && s != -1) {
        Some(i) => Err(Error::NonSignVector(i)),
        None => Ok(()),
    }
}

/// `+1` on the first half of the nodes, `-1` on the rest.
pub fn planted_labels(n: usize) -> Signs {
    (0..n).map(|i| if i < n / 2 { 1 } else { -1 }).collect()
}

/// Symmetric matrix with i.i.d. standard normal entries on and above the
/// diagonal, drawn row by row.
pub fn sample_wigner(n: usize, rng: &mut RngStream) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(n, |_, _| rng.normal()).expect("normal draws are finite")
}

/// `G(n, p)`: every pair `i < j`, visited in lexicographic order, is an
/// edge with probability `p`.
pub fn sample_er(n: usize, p: f64, rng: &mut RngStream) -> Result<GraphSample> {
    check_probability("p", p)?;
    let edges = bernoulli_pairs(n, rng, |_, _| p);
    GraphSample::from_edges(n, &edges, None, GraphParams::Er { p })
}

/// Balanced two-community SBM with the planted labels of
/// [`planted_labels`].
pub fn sample_sbm(n: usize, p: f64, q: f64, rng: &mut RngStream) -> Result<GraphSample> {
    if n % 2 != 0 {
        return Err(Error::OddDimension(n));
    }
    check_probability("p", p)?;
    check_probability("q", q)?;
    let half = n / 2;
    let edges = bernoulli_pairs(n, rng, |i, j| if (i < half) == (j < half) { p } else { q });
    GraphSample::from_edges(n, &edges, Some(planted_labels(n)), GraphParams::Sbm { p, q })
}

fn bernoulli_pairs(
    n: usize,
    rng: &mut RngStream,
    prob: impl Fn(usize, usize) -> f64,
) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.bernoulli(prob(i, j)) {
                edges.push((i, j));
            }
        }
    }
    edges
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SyncParams {
    Er { p: f64, eps: f64 },
    Gaussian { sigma: f64 },
}

/// A Z2 synchronization instance: measurements `y`, ground truth `z`, the
/// measurement graph `G` and its corrupted subgraph `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncInstance {
    pub n: usize,
    pub y: SymmetricMatrix,
    pub z: Signs,
    pub g_edges: Vec<(usize, usize)>,
    pub h_edges: Vec<(usize, usize)>,
    pub params: SyncParams,
}

impl SyncInstance {
    pub fn is_discrete(&self) -> bool {
        matches!(self.params, SyncParams::Er { .. })
    }
}

/// Discrete model: `G ~ G(n, p)`, then every edge of `G` (in edge order)
/// is corrupted independently with probability `eps`.
pub fn sample_z2sync_er(
    n: usize,
    p: f64,
    eps: f64,
    z: &[i8],
    rng: &mut RngStream,
) -> Result<SyncInstance> {
    check_probability("p", p)?;
    check_probability("eps", eps)?;
    if eps >= 0.5 {
        return Err(Error::InvalidProbability {
            name: "eps",
            value: eps,
        });
    }
    validate_signs(n, z)?;
    let g_edges = bernoulli_pairs(n, rng, |_, _| p);
    let mut h_edges = Vec::new();
    let mut y = SymmetricMatrix::zeros(n);
    for &(i, j) in &g_edges {
        let zz = f64::from(z[i] * z[j]);
        if rng.bernoulli(eps) {
            h_edges.push((i, j));
            y.set(i, j, -zz);
        } else {
            y.set(i, j, zz);
        }
    }
    Ok(SyncInstance {
        n,
        y,
        z: z.to_vec(),
        g_edges,
        h_edges,
        params: SyncParams::Er { p, eps },
    })
}

/// Gaussian model: `y = zzᵀ + σ W` with `W` from [`sample_wigner`].
pub fn sample_z2sync_gaussian(
    n: usize,
    sigma: f64,
    z: &[i8],
    rng: &mut RngStream,
) -> Result<SyncInstance> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    validate_signs(n, z)?;
    let w = sample_wigner(n, rng);
    let y = SymmetricMatrix::from_fn(n, |i, j| f64::from(z[i] * z[j]) + sigma * w.get(i, j))?;
    let g_edges = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    Ok(SyncInstance {
        n,
        y,
        z: z.to_vec(),
        g_edges,
        h_edges: Vec::new(),
        params: SyncParams::Gaussian { sigma },
    })
}

/// Random models whose scale parameters can be profiled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ensemble", rename_all = "kebab-case")]
pub enum Ensemble {
    /// `E[L_G] - L_G` for `G ~ G(n, p)`.
    CenteredEr { p: f64 },
    /// `E[Γ] - Γ` for the balanced SBM, conjugated by the planted signs.
    CenteredSbm { p: f64, q: f64 },
    /// Standard Gaussian off-diagonal entries.
    Wigner,
}

impl Ensemble {
    pub fn parse(name: &str, p: Option<f64>, q: Option<f64>) -> Result<Self> {
        match name {
            "centered-er" => Ok(Ensemble::CenteredEr {
                p: p.ok_or(Error::MissingParams("centered-er"))?,
            }),
            "centered-sbm" => Ok(Ensemble::CenteredSbm {
                p: p.ok_or(Error::MissingParams("centered-sbm"))?,
                q: q.ok_or(Error::MissingParams("centered-sbm"))?,
            }),
            "wigner" | "wigner-neg-laplacian" => Ok(Ensemble::Wigner),
            other => Err(Error::UnknownEnsemble(other.to_string())),
        }
    }
}

/// Row deviation `σ` and entrywise bound `σ∞` of an ensemble's
/// off-diagonal entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleProfile {
    pub sigma: f64,
    /// `f64::INFINITY` marks an unbounded ensemble.
    pub sigma_inf: f64,
    pub n: usize,
}

impl EnsembleProfile {
    pub fn is_bounded(&self) -> bool {
        self.sigma_inf.is_finite()
    }
}

/// Essential supremum of `|B - p|` for `B ~ Bernoulli(p)`.
fn centered_bernoulli_sup(p: f64) -> f64 {
    if p == 0.0 || p == 1.0 {
        0.0
    } else {
        p.max(1.0 - p)
    }
}

pub fn profile_of(ensemble: Ensemble, n: usize) -> Result<EnsembleProfile> {
    let nf = n as f64;
    let (sigma2, sigma_inf) = match ensemble {
        Ensemble::CenteredEr { p } => {
            check_probability("p", p)?;
            ((nf - 1.0) * p * (1.0 - p), centered_bernoulli_sup(p))
        }
        Ensemble::CenteredSbm { p, q } => {
            check_probability("p", p)?;
            check_probability("q", q)?;
            if n % 2 != 0 {
                return Err(Error::OddDimension(n));
            }
            let half = nf / 2.0;
            let s2 = (half - 1.0) * (p - p * p) + half * (q - q * q);
            let sup = match (p - p * p > 0.0, q - q * q > 0.0) {
                (false, false) => 0.0,
                (true, false) => centered_bernoulli_sup(p),
                (false, true) => centered_bernoulli_sup(q),
                (true, true) => centered_bernoulli_sup(p).max(centered_bernoulli_sup(q)),
            };
            (s2, sup)
        }
        Ensemble::Wigner => (nf - 1.0, f64::INFINITY),
    };
    Ok(EnsembleProfile {
        sigma: sigma2.max(0.0).sqrt(),
        sigma_inf,
        n,
    })
}
