//! Monte Carlo sweeps over parameter grids.
//!
//! Every trial is a pure function of `(master_seed, cell_index, trial)`:
//! its random stream is `derive_stream(master_seed, cell_index << 32 | trial)`.
//! Trials may run on any number of workers; results are reduced in
//! `(cell, trial)` order, so the output does not depend on the schedule.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    certify_sbm_with, certify_z2sync_with, connectivity_spectral_with, connectivity_unionfind,
    degree_diag_oracle_sbm, flip_statistic, mle_flip_oracle_z2, norm_bound_check, sufficient_condition_sbm,
    theorem_main_ratio, ThresholdSide, TAU_POS,
};
use crate::ensembles::{
    derive_stream, mix64, planted_labels, profile_of, sample_er, sample_sbm, sample_wigner, sample_z2sync_er,
    sample_z2sync_gaussian, Ensemble, RngStream,
};
use crate::error::{Error, Result};
use crate::laplacian::{centered_neg_laplacian, centered_sbm_laplacian, laplacian_of, signed_adjacency};
use crate::sdp::{cross_check, BmOptions};
use crate::symm_eig::SymmetricMatrix;
use crate::tail::{gaussian_sigma_star, threshold_margin, ThresholdQuery};

pub const TOOL_VERSION: &str = concat!("lapcert ", env!("CARGO_PKG_VERSION"));

/// Salt separating the solver streams from the sampling streams.
const CROSSCHECK_SALT: u64 = 0xc0ff_ee00_b0a7_1157;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Er,
    Z2gauss,
    Z2er,
    Sbm,
    Ratio,
    Normbound,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Er => "er",
            Experiment::Z2gauss => "z2gauss",
            Experiment::Z2er => "z2er",
            Experiment::Sbm => "sbm",
            Experiment::Ratio => "ratio",
            Experiment::Normbound => "normbound",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "er" => Ok(Experiment::Er),
            "z2gauss" => Ok(Experiment::Z2gauss),
            "z2er" => Ok(Experiment::Z2er),
            "sbm" => Ok(Experiment::Sbm),
            "ratio" => Ok(Experiment::Ratio),
            "normbound" => Ok(Experiment::Normbound),
            other => Err(Error::config(format!("unknown experiment `{other}`"))),
        }
    }
}

/// Ensembles of the ratio experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioEnsemble {
    WignerNegLaplacian,
    CenteredEr,
    CenteredSbm,
}

impl FromStr for RatioEnsemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wigner-neg-laplacian" => Ok(RatioEnsemble::WignerNegLaplacian),
            "centered-er" => Ok(RatioEnsemble::CenteredEr),
            "centered-sbm" => Ok(RatioEnsemble::CenteredSbm),
            other => Err(Error::UnknownEnsemble(other.to_string())),
        }
    }
}

/// Values of one swept parameter.
///
/// Parsed from `start:stop:step` (inclusive of `stop` when it lies within
/// `1e-9` of a lattice point), a comma list, or a single value.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(pub Vec<f64>);

/// Config files may spell a grid as a number, a grid string or a list.
impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(f64),
            Text(String),
            Many(Vec<f64>),
        }
        let grid = match Raw::deserialize(d)? {
            Raw::One(v) => Grid(vec![v]),
            Raw::Many(v) => Grid(v),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom)?,
        };
        if grid.0.is_empty() {
            return Err(serde::de::Error::custom("empty grid"));
        }
        if grid.0.iter().any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("non-finite grid value"));
        }
        Ok(grid)
    }
}

impl Grid {
    pub fn single(v: f64) -> Self {
        Grid(vec![v])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| -> Result<f64> {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("invalid number `{t}` in grid `{s}`")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::config(format!("non-finite value in grid `{s}`")))
            }
        };
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [one] => one.split(',').map(num).collect::<Result<Vec<_>>>()?,
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if !(step > 0.0) {
                    return Err(Error::config(format!("grid step must be > 0 in `{s}`")));
                }
                if stop < start {
                    return Err(Error::config(format!("grid stop < start in `{s}`")));
                }
                let span = (stop - start) / step;
                let mut count = span.floor() as usize;
                if span - count as f64 > 1.0 - 1e-9 {
                    count += 1;
                }
                (0..=count).map(|i| start + i as f64 * step).collect()
            }
            _ => return Err(Error::config(format!("malformed grid `{s}`"))),
        };
        if values.is_empty() {
            return Err(Error::config(format!("empty grid `{s}`")));
        }
        Ok(Grid(values))
    }
}

/// Full description of a sweep; echoed into the `.meta.json` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub n: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_scale: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<RatioEnsemble>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Factorization rank of the cross-check solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_k: Option<usize>,
    #[serde(default = "default_tau")]
    pub tau_pos: f64,
    #[serde(default = "default_grad_tol")]
    pub bm_grad_tol: f64,
    #[serde(default = "default_bm_iters")]
    pub bm_max_iters: usize,
    /// Run the low-rank solver on every trial and compare with the
    /// certificate.
    #[serde(default)]
    pub crosscheck: bool,
    /// For `er`: also evaluate the spectral connectivity test.
    #[serde(default = "default_true")]
    pub spectral: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Constant `K` of the z2er sufficient condition.
    #[serde(default)]
    pub k_const: f64,
    /// Slack `δ` of the z2er sufficient condition.
    #[serde(default)]
    pub delta: f64,
    /// `t = t_scale · σ∞ · sqrt(log n)` in the norm-bound experiment.
    #[serde(default = "default_t_scale")]
    pub t_scale: f64,
}

fn default_trials() -> usize {
    100
}
fn default_tau() -> f64 {
    TAU_POS
}
fn default_grad_tol() -> f64 {
    BmOptions::default().grad_tol
}
fn default_bm_iters() -> usize {
    BmOptions::default().max_iters
}
fn default_true() -> bool {
    true
}
fn default_t_scale() -> f64 {
    3.0
}

impl SweepConfig {
    /// A configuration with the given experiment and sizes and every
    /// optional knob at its default.
    pub fn new(experiment: Experiment, n: Grid, trials: usize, seed: u64) -> Self {
        SweepConfig {
            experiment,
            n,
            p: None,
            q: None,
            rho: None,
            alpha: None,
            beta: None,
            eps: None,
            sigma: None,
            sigma_scale: None,
            ensemble: None,
            trials,
            seed,
            out: None,
            rank_k: None,
            tau_pos: TAU_POS,
            bm_grad_tol: default_grad_tol(),
            bm_max_iters: default_bm_iters(),
            crosscheck: false,
            spectral: true,
            workers: None,
            k_const: 0.0,
            delta: 0.0,
            t_scale: 3.0,
        }
    }

    fn bm_options(&self) -> BmOptions {
        BmOptions {
            rank: self.rank_k,
            max_iters: self.bm_max_iters,
            grad_tol: self.bm_grad_tol,
        }
    }

    fn grid(&self, axis: Axis) -> Option<&Grid> {
        match axis {
            Axis::N => Some(&self.n),
            Axis::P => self.p.as_ref(),
            Axis::Q => self.q.as_ref(),
            Axis::Rho => self.rho.as_ref(),
            Axis::Alpha => self.alpha.as_ref(),
            Axis::Beta => self.beta.as_ref(),
            Axis::Eps => self.eps.as_ref(),
            Axis::Sigma => self.sigma.as_ref(),
            Axis::SigmaScale => self.sigma_scale.as_ref(),
        }
    }

    /// Swept axes in declaration order: each slot is a set of mutually
    /// exclusive parameterizations of which exactly one must be given.
    fn slots(&self) -> Result<Vec<&'static [Axis]>> {
        use Axis::*;
        Ok(match self.experiment {
            Experiment::Er | Experiment::Normbound => vec![&[N], &[P, Rho]],
            Experiment::Z2gauss => vec![&[N], &[Sigma, SigmaScale]],
            Experiment::Z2er => vec![&[N], &[P, Rho], &[Eps]],
            Experiment::Sbm => vec![&[N], &[Alpha, P], &[Beta, Q]],
            Experiment::Ratio => match self.ensemble {
                None => return Err(Error::config("--ensemble is required for the ratio experiment")),
                Some(RatioEnsemble::WignerNegLaplacian) => vec![&[N]],
                Some(RatioEnsemble::CenteredEr) => vec![&[N], &[P, Rho]],
                Some(RatioEnsemble::CenteredSbm) => vec![&[N], &[Alpha, P], &[Beta, Q]],
            },
        })
    }

    fn validate(&self) -> Result<Vec<(Axis, Vec<f64>)>> {
        if self.trials == 0 {
            return Err(Error::config("--trials must be >= 1"));
        }
        if self.trials as u64 > u32::MAX as u64 {
            return Err(Error::config("--trials must fit in 32 bits"));
        }
        if !(self.tau_pos >= 0.0) || !(self.bm_grad_tol > 0.0) {
            return Err(Error::config("tolerances must be positive"));
        }
        if matches!(self.rank_k, Some(k) if k < 2) {
            return Err(Error::config("--rank-k must be >= 2"));
        }
        if self.workers == Some(0) {
            return Err(Error::config("--workers must be >= 1"));
        }
        let slots = self.slots()?;
        let mut axes = Vec::new();
        let mut used = Vec::new();
        for slot in &slots {
            let given: Vec<Axis> = slot.iter().copied().filter(|&a| self.grid(a).is_some()).collect();
            match given.as_slice() {
                [a] => {
                    axes.push((*a, self.grid(*a).unwrap().0.clone()));
                    used.push(*a);
                }
                [] => {
                    let names: Vec<String> = slot.iter().map(|a| format!("--{}", a.flag())).collect();
                    return Err(Error::config(format!(
                        "{} requires {}",
                        self.experiment.name(),
                        names.join(" or ")
                    )));
                }
                _ => {
                    let names: Vec<String> = given.iter().map(|a| format!("--{}", a.flag())).collect();
                    return Err(Error::config(format!("{} are mutually exclusive", names.join(" and "))));
                }
            }
        }
        for axis in Axis::ALL {
            if self.grid(axis).is_some() && !used.contains(&axis) {
                return Err(Error::config(format!(
                    "--{} does not apply to the {} experiment",
                    axis.flag(),
                    self.experiment.name()
                )));
            }
        }
        for &n in &self.n.0 {
            if n.fract() != 0.0 || n < 2.0 {
                return Err(Error::config(format!("--n values must be integers >= 2, got {n}")));
            }
            let needs_even = self.experiment == Experiment::Sbm
                || self.ensemble == Some(RatioEnsemble::CenteredSbm) && self.experiment == Experiment::Ratio;
            if needs_even && (n as usize) % 2 != 0 {
                return Err(Error::config(format!("--n must be even for the SBM, got {n}")));
            }
        }
        Ok(axes)
    }

    /// Resolved parameter tuples in lexicographic grid order.
    pub fn cells(&self) -> Result<Vec<CellParams>> {
        let axes = self.validate()?;
        let mut combos: Vec<Vec<(Axis, f64)>> = vec![Vec::new()];
        for (axis, values) in &axes {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push((*axis, v));
                        c
                    })
                })
                .collect();
        }
        combos.into_iter().map(|c| CellParams::resolve(self.experiment, &c)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    N,
    P,
    Q,
    Rho,
    Alpha,
    Beta,
    Eps,
    Sigma,
    SigmaScale,
}

impl Axis {
    const ALL: [Axis; 9] = [
        Axis::N,
        Axis::P,
        Axis::Q,
        Axis::Rho,
        Axis::Alpha,
        Axis::Beta,
        Axis::Eps,
        Axis::Sigma,
        Axis::SigmaScale,
    ];

    fn flag(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::P => "p",
            Axis::Q => "q",
            Axis::Rho => "rho",
            Axis::Alpha => "alpha",
            Axis::Beta => "beta",
            Axis::Eps => "eps",
            Axis::Sigma => "sigma",
            Axis::SigmaScale => "sigma-scale",
        }
    }
}

/// One resolved parameter tuple. Both parameterizations of each scale
/// (`p`/`rho`, `p`/`alpha`, `q`/`beta`, `sigma`/`sigma_scale`) are filled in;
/// parameters that do not apply are NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub sigma: f64,
    pub sigma_scale: f64,
}

impl CellParams {
    fn resolve(experiment: Experiment, combo: &[(Axis, f64)]) -> Result<Self> {
        let mut c = CellParams {
            n: 0,
            p: f64::NAN,
            q: f64::NAN,
            rho: f64::NAN,
            alpha: f64::NAN,
            beta: f64::NAN,
            eps: f64::NAN,
            sigma: f64::NAN,
            sigma_scale: f64::NAN,
        };
        for &(axis, v) in combo {
            match axis {
                Axis::N => c.n = v as usize,
                Axis::P => c.p = v,
                Axis::Q => c.q = v,
                Axis::Rho => c.rho = v,
                Axis::Alpha => c.alpha = v,
                Axis::Beta => c.beta = v,
                Axis::Eps => c.eps = v,
                Axis::Sigma => c.sigma = v,
                Axis::SigmaScale => c.sigma_scale = v,
            }
        }
        let nf = c.n as f64;
        let per = nf.ln() / nf;
        let sbm_like = combo.iter().any(|(a, _)| matches!(a, Axis::Alpha | Axis::Beta | Axis::Q));
        if sbm_like {
            // p <-> alpha, q <-> beta
            if c.alpha.is_nan() {
                c.alpha = c.p / per;
            } else {
                c.p = c.alpha * per;
            }
            if c.beta.is_nan() {
                c.beta = c.q / per;
            } else {
                c.q = c.beta * per;
            }
        } else if combo.iter().any(|(a, _)| matches!(a, Axis::P | Axis::Rho)) {
            if c.rho.is_nan() {
                c.rho = c.p / per;
            } else {
                c.p = c.rho * per;
            }
        }
        if experiment == Experiment::Z2gauss {
            let star = gaussian_sigma_star(c.n);
            if c.sigma.is_nan() {
                c.sigma = c.sigma_scale * star;
            } else {
                c.sigma_scale = c.sigma / star;
            }
            if !(c.sigma >= 0.0) {
                return Err(Error::config(format!("sigma must be >= 0, got {}", c.sigma)));
            }
        }
        for (name, v) in [("p", c.p), ("q", c.q), ("eps", c.eps)] {
            if !v.is_nan() && !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!(
                    "resolved {name} = {v} at n = {} is not a probability",
                    c.n
                )));
            }
        }
        if !c.eps.is_nan() && c.eps >= 0.5 {
            return Err(Error::config(format!("eps must be < 1/2, got {}", c.eps)));
        }
        for (name, v) in [("rho", c.rho), ("alpha", c.alpha), ("beta", c.beta)] {
            if v < 0.0 {
                return Err(Error::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub valid_trials: usize,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
    /// `(median - 1) · sqrt(log n)`.
    pub c1_surrogate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub freq_holds: f64,
    pub mean_norm: f64,
    pub max_norm: f64,
    pub bound: f64,
    pub sigma: f64,
    pub sigma_inf: f64,
    pub t: f64,
}

/// Aggregated outcome of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub index: usize,
    pub params: CellParams,
    pub trials: usize,
    pub freq_certified: f64,
    pub freq_boundary: f64,
    pub freq_oracle_block: f64,
    pub freq_connected: Option<f64>,
    pub freq_isolated: Option<f64>,
    pub spectral_mismatches: Option<usize>,
    pub freq_sufficient: Option<f64>,
    pub sufficiency_violations: Option<usize>,
    pub freq_bm_recovered: Option<f64>,
    pub crosscheck_violations: Option<usize>,
    pub ratio: Option<RatioStats>,
    pub norm: Option<NormStats>,
    pub predicted_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub cells: Vec<PhaseCell>,
    pub tool_version: String,
    pub wall_time_secs: f64,
}

/// Per-trial measurements before aggregation.
#[derive(Clone, Copy, Debug, Default)]
struct Trial {
    certified: bool,
    boundary: bool,
    oracle_block: bool,
    connected: bool,
    isolated: bool,
    spectral_mismatch: bool,
    sufficient: bool,
    sufficiency_violation: bool,
    bm_recovered: bool,
    crosscheck_violation: bool,
    ratio: Option<f64>,
    norm: f64,
    norm_holds: bool,
}

pub fn trial_stream_id(cell_index: usize, trial: usize) -> u64 {
    ((cell_index as u64) << 32) | trial as u64
}

struct Runner<'a> {
    cfg: &'a SweepConfig,
}

impl Runner<'_> {
    fn run_trial(&self, cell_index: usize, c: &CellParams, trial: usize) -> Result<Trial> {
        let stream_id = trial_stream_id(cell_index, trial);
        let mut rng = derive_stream(self.cfg.seed, stream_id);
        let mut out = Trial::default();
        match self.cfg.experiment {
            Experiment::Er => self.er_trial(c, &mut rng, &mut out)?,
            Experiment::Z2gauss | Experiment::Z2er => self.z2_trial(c, &mut rng, stream_id, &mut out)?,
            Experiment::Sbm => self.sbm_trial(c, &mut rng, stream_id, &mut out)?,
            Experiment::Ratio => self.ratio_trial(c, &mut rng, &mut out)?,
            Experiment::Normbound => self.norm_trial(c, &mut rng, &mut out)?,
        }
        Ok(out)
    }

    fn er_trial(&self, c: &CellParams, rng: &mut RngStream, out: &mut Trial) -> Result<()> {
        let g = sample_er(c.n, c.p, rng)?;
        out.connected = connectivity_unionfind(&g);
        out.isolated = g.degrees().contains(&0);
        out.oracle_block = out.isolated;
        if self.cfg.spectral {
            out.certified = connectivity_spectral_with(&g, self.cfg.tau_pos);
            out.spectral_mismatch = out.certified != out.connected;
        }
        Ok(())
    }

    fn z2_trial(&self, c: &CellParams, rng: &mut RngStream, stream_id: u64, out: &mut Trial) -> Result<()> {
        let z = planted_labels(c.n);
        let inst = if self.cfg.experiment == Experiment::Z2er {
            sample_z2sync_er(c.n, c.p, c.eps, &z, rng)?
        } else {
            sample_z2sync_gaussian(c.n, c.sigma, &z, rng)?
        };
        let report = certify_z2sync_with(&inst, self.cfg.tau_pos)?;
        let oracle = if inst.is_discrete() {
            mle_flip_oracle_z2(&inst)?
        } else {
            flip_statistic(&inst.y, &inst.z)?
        };
        out.certified = report.tight;
        out.boundary = report.side == ThresholdSide::Boundary;
        out.oracle_block = oracle.oracle_block;
        if self.cfg.crosscheck {
            self.crosscheck(&inst.y, &inst.z, report.tight, stream_id, out)?;
        }
        Ok(())
    }

    fn sbm_trial(&self, c: &CellParams, rng: &mut RngStream, stream_id: u64, out: &mut Trial) -> Result<()> {
        let g = sample_sbm(c.n, c.p, c.q, rng)?;
        let report = certify_sbm_with(&g, self.cfg.tau_pos)?;
        let oracle = degree_diag_oracle_sbm(&g)?;
        let suff = sufficient_condition_sbm(&g)?;
        out.certified = report.tight;
        out.boundary = report.side == ThresholdSide::Boundary;
        out.oracle_block = oracle.oracle_block;
        out.sufficient = suff.holds;
        out.sufficiency_violation = suff.holds && !report.tight;
        if self.cfg.crosscheck {
            let b = signed_adjacency(&g);
            let labels = g.labels().expect("sbm samples are labelled").to_vec();
            self.crosscheck(&b, &labels, report.tight, stream_id, out)?;
        }
        Ok(())
    }

    fn crosscheck(
        &self,
        y: &SymmetricMatrix,
        truth: &[i8],
        tight: bool,
        stream_id: u64,
        out: &mut Trial,
    ) -> Result<()> {
        let cc = cross_check(
            y,
            truth,
            &self.cfg.bm_options(),
            mix64(self.cfg.seed ^ CROSSCHECK_SALT),
            stream_id,
        )?;
        out.bm_recovered = cc.recovered;
        out.crosscheck_violation = tight && !(cc.recovered && cc.dual_feasible);
        Ok(())
    }

    fn ratio_trial(&self, c: &CellParams, rng: &mut RngStream, out: &mut Trial) -> Result<()> {
        let l = match self.cfg.ensemble.expect("validated") {
            RatioEnsemble::WignerNegLaplacian => laplacian_of(&sample_wigner(c.n, rng).scaled(-1.0)),
            RatioEnsemble::CenteredEr => centered_neg_laplacian(&sample_er(c.n, c.p, rng)?, c.p),
            RatioEnsemble::CenteredSbm => centered_sbm_laplacian(&sample_sbm(c.n, c.p, c.q, rng)?)?,
        };
        out.ratio = match theorem_main_ratio(&l) {
            Ok(r) => Some(r.ratio),
            Err(Error::NonPositiveDiagonalMax(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(())
    }

    fn norm_trial(&self, c: &CellParams, rng: &mut RngStream, out: &mut Trial) -> Result<()> {
        let g = sample_er(c.n, c.p, rng)?;
        let x = centered_adjacency(&g.adjacency(), c.p);
        let profile = profile_of(Ensemble::CenteredEr { p: c.p }, c.n)?;
        let t = self.norm_t(c, profile.sigma_inf);
        let check = norm_bound_check(&x, &profile, t)?;
        out.norm = check.norm;
        out.norm_holds = check.holds;
        Ok(())
    }

    fn norm_t(&self, c: &CellParams, sigma_inf: f64) -> f64 {
        self.cfg.t_scale * sigma_inf * (c.n as f64).ln().sqrt()
    }

    fn predicted_margin(&self, c: &CellParams) -> Result<f64> {
        let q = match self.cfg.experiment {
            Experiment::Er => ThresholdQuery::ErConnectivity { rho: c.rho },
            Experiment::Z2gauss => ThresholdQuery::Z2Gaussian { n: c.n, sigma: c.sigma },
            Experiment::Z2er => ThresholdQuery::Z2Er {
                n: c.n,
                p: c.p,
                eps: c.eps,
                k: self.cfg.k_const,
                delta: self.cfg.delta,
            },
            Experiment::Sbm => ThresholdQuery::Sbm {
                alpha: c.alpha,
                beta: c.beta,
            },
            Experiment::Ratio | Experiment::Normbound => return Ok(f64::NAN),
        };
        threshold_margin(&q)
    }

    fn aggregate(&self, index: usize, c: CellParams, trials: &[Trial]) -> Result<PhaseCell> {
        let m = trials.len();
        let freq = |f: fn(&Trial) -> bool| trials.iter().filter(|t| f(t)).count() as f64 / m as f64;
        let count = |f: fn(&Trial) -> bool| trials.iter().filter(|t| f(t)).count();
        let exp = self.cfg.experiment;
        let is = |e: &[Experiment]| e.contains(&exp);
        let recovery = is(&[Experiment::Z2gauss, Experiment::Z2er, Experiment::Sbm]);

        let ratio = (exp == Experiment::Ratio).then(|| ratio_stats(c.n, trials));
        let norm = if exp == Experiment::Normbound {
            let profile = profile_of(Ensemble::CenteredEr { p: c.p }, c.n)?;
            let t = self.norm_t(&c, profile.sigma_inf);
            Some(NormStats {
                freq_holds: freq(|t| t.norm_holds),
                mean_norm: trials.iter().map(|t| t.norm).sum::<f64>() / m as f64,
                max_norm: trials.iter().map(|t| t.norm).fold(f64::NEG_INFINITY, f64::max),
                bound: 3.0 * profile.sigma + t,
                sigma: profile.sigma,
                sigma_inf: profile.sigma_inf,
                t,
            })
        } else {
            None
        };
        let er_spectral = exp == Experiment::Er && self.cfg.spectral;
        let nan_unless = |cond: bool, v: f64| if cond { v } else { f64::NAN };

        Ok(PhaseCell {
            index,
            params: c,
            trials: m,
            freq_certified: nan_unless(recovery || er_spectral, freq(|t| t.certified)),
            freq_boundary: nan_unless(recovery || er_spectral, freq(|t| t.boundary)),
            freq_oracle_block: nan_unless(recovery || exp == Experiment::Er, freq(|t| t.oracle_block)),
            freq_connected: (exp == Experiment::Er).then(|| freq(|t| t.connected)),
            freq_isolated: (exp == Experiment::Er).then(|| freq(|t| t.isolated)),
            spectral_mismatches: er_spectral.then(|| count(|t| t.spectral_mismatch)),
            freq_sufficient: (exp == Experiment::Sbm).then(|| freq(|t| t.sufficient)),
            sufficiency_violations: (exp == Experiment::Sbm).then(|| count(|t| t.sufficiency_violation)),
            freq_bm_recovered: (recovery && self.cfg.crosscheck).then(|| freq(|t| t.bm_recovered)),
            crosscheck_violations: (recovery && self.cfg.crosscheck).then(|| count(|t| t.crosscheck_violation)),
            ratio,
            norm,
            predicted_margin: self.predicted_margin(&c)?,
        })
    }
}

/// `X = A - p(J - I)`: the centered adjacency of `G(n, p)`.
pub fn centered_adjacency(a: &SymmetricMatrix, p: f64) -> SymmetricMatrix {
    let n = a.n();
    let mut x = a.clone();
    for i in 0..n {
        for j in i + 1..n {
            x.set(i, j, a.get(i, j) - p);
        }
    }
    x
}

fn ratio_stats(n: usize, trials: &[Trial]) -> RatioStats {
    let mut r: Vec<f64> = trials.iter().filter_map(|t| t.ratio).collect();
    r.sort_by(f64::total_cmp);
    let m = r.len();
    if m == 0 {
        return RatioStats {
            valid_trials: 0,
            min: f64::NAN,
            mean: f64::NAN,
            median: f64::NAN,
            q95: f64::NAN,
            max: f64::NAN,
            c1_surrogate: f64::NAN,
        };
    }
    let median = if m % 2 == 1 {
        r[m / 2]
    } else {
        0.5 * (r[m / 2 - 1] + r[m / 2])
    };
    let q95 = r[((0.95 * m as f64).ceil() as usize).clamp(1, m) - 1];
    RatioStats {
        valid_trials: m,
        min: r[0],
        mean: r.iter().sum::<f64>() / m as f64,
        median,
        q95,
        max: r[m - 1],
        c1_surrogate: (median - 1.0) * (n as f64).ln().sqrt(),
    }
}

/// Runs every cell of the sweep. The result is identical for any worker
/// count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let start = Instant::now();
    let cells = cfg.cells()?;
    let runner = Runner { cfg };
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let run = || -> Result<Vec<Trial>> {
        jobs.par_iter()
            .map(|&(c, t)| runner.run_trial(c, &cells[c], t))
            .collect()
    };
    let trials = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::config(format!("cannot start {w} workers: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut out = Vec::with_capacity(cells.len());
    for (idx, (c, chunk)) in cells.iter().zip(trials.chunks(cfg.trials)).enumerate() {
        out.push(runner.aggregate(idx, *c, chunk)?);
    }
    Ok(SweepResult {
        config: cfg.clone(),
        cells: out,
        tool_version: TOOL_VERSION.to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// The ratio sweep: `λmax(L) / max_i L_ii` per trial, summarized per `n`.
pub fn run_ratio_experiment(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.experiment != Experiment::Ratio {
        return Err(Error::config("run_ratio_experiment needs experiment = ratio"));
    }
    run_sweep(cfg)
}

/// Round to 9 significant digits and print in shortest round-trip form.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".into()
    } else {
        format!("{rounded}")
    }
}

/// Column names of the CSV for an experiment.
pub fn csv_columns(experiment: Experiment) -> Vec<&'static str> {
    let recovery_tail = [
        "trials",
        "freq_certified",
        "freq_boundary",
        "freq_oracle_block",
        "freq_bm_recovered",
        "crosscheck_violations",
        "predicted_margin",
    ];
    let mut cols = match experiment {
        Experiment::Er => vec![
            "n",
            "p",
            "rho",
            "trials",
            "freq_connected",
            "freq_isolated",
            "freq_certified",
            "freq_boundary",
            "freq_oracle_block",
            "spectral_mismatches",
            "predicted_margin",
        ],
        Experiment::Z2gauss => vec!["n", "sigma", "sigma_scale"],
        Experiment::Z2er => vec!["n", "p", "rho", "eps"],
        Experiment::Sbm => vec!["n", "alpha", "beta", "p", "q"],
        Experiment::Ratio => vec![
            "n",
            "p",
            "q",
            "trials",
            "valid_trials",
            "min_ratio",
            "mean_ratio",
            "median_ratio",
            "q95_ratio",
            "max_ratio",
            "c1_surrogate",
        ],
        Experiment::Normbound => vec![
            "n",
            "p",
            "rho",
            "trials",
            "freq_bound_holds",
            "mean_norm",
            "max_norm",
            "bound",
            "sigma",
            "sigma_inf",
            "t",
        ],
    };
    match experiment {
        Experiment::Z2gauss | Experiment::Z2er => cols.extend(recovery_tail),
        Experiment::Sbm => {
            cols.extend(&recovery_tail[..4]);
            cols.extend(["freq_sufficient", "sufficiency_violations"]);
            cols.extend(&recovery_tail[4..]);
        }
        _ => {}
    }
    cols
}

fn cell_value(cell: &PhaseCell, column: &str) -> f64 {
    let p = &cell.params;
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    let cnt = |v: Option<usize>| v.map_or(f64::NAN, |c| c as f64);
    let ratio = |f: fn(&RatioStats) -> f64| cell.ratio.as_ref().map_or(f64::NAN, f);
    let norm = |f: fn(&NormStats) -> f64| cell.norm.as_ref().map_or(f64::NAN, f);
    match column {
        "n" => p.n as f64,
        "p" => p.p,
        "q" => p.q,
        "rho" => p.rho,
        "alpha" => p.alpha,
        "beta" => p.beta,
        "eps" => p.eps,
        "sigma" if cell.norm.is_some() => norm(|s| s.sigma),
        "sigma" => p.sigma,
        "sigma_scale" => p.sigma_scale,
        "trials" => cell.trials as f64,
        "freq_certified" => cell.freq_certified,
        "freq_boundary" => cell.freq_boundary,
        "freq_oracle_block" => cell.freq_oracle_block,
        "freq_connected" => opt(cell.freq_connected),
        "freq_isolated" => opt(cell.freq_isolated),
        "spectral_mismatches" => cnt(cell.spectral_mismatches),
        "freq_sufficient" => opt(cell.freq_sufficient),
        "sufficiency_violations" => cnt(cell.sufficiency_violations),
        "freq_bm_recovered" => opt(cell.freq_bm_recovered),
        "crosscheck_violations" => cnt(cell.crosscheck_violations),
        "predicted_margin" => cell.predicted_margin,
        "valid_trials" => ratio(|r| r.valid_trials as f64),
        "min_ratio" => ratio(|r| r.min),
        "mean_ratio" => ratio(|r| r.mean),
        "median_ratio" => ratio(|r| r.median),
        "q95_ratio" => ratio(|r| r.q95),
        "max_ratio" => ratio(|r| r.max),
        "c1_surrogate" => ratio(|r| r.c1_surrogate),
        "freq_bound_holds" => norm(|s| s.freq_holds),
        "mean_norm" => norm(|s| s.mean_norm),
        "max_norm" => norm(|s| s.max_norm),
        "bound" => norm(|s| s.bound),
        "sigma_inf" => norm(|s| s.sigma_inf),
        "t" => norm(|s| s.t),
        other => unreachable!("unknown column {other}"),
    }
}

/// The CSV body: header, one row per cell, trailing newline.
pub fn to_csv_string(result: &SweepResult) -> String {
    let cols = csv_columns(result.config.experiment);
    let mut out = cols.join(",");
    out.push('\n');
    for cell in &result.cells {
        let row: Vec<String> = cols.iter().map(|c| format_number(cell_value(cell, c))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Sidecar path: `out.csv` -> `out.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

#[derive(Serialize)]
struct Meta<'a> {
    tool_version: &'a str,
    experiment: &'a str,
    seed: u64,
    trials: usize,
    cells: usize,
    wall_time_secs: f64,
    config: &'a SweepConfig,
}

/// Writes the CSV and its `.meta.json` sidecar.
pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(result))?;
    let meta = Meta {
        tool_version: &result.tool_version,
        experiment: result.config.experiment.name(),
        seed: result.config.seed,
        trials: result.config.trials,
        cells: result.cells.len(),
        wall_time_secs: result.wall_time_secs,
        config: &result.config,
    };
    let mut json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.into()))?;
    json.push('\n');
    fs::write(meta_path(path), json)?;
    Ok(())
}

/// Human-readable one-line-per-cell summary.
pub fn summary(result: &SweepResult) -> String {
    let cols = csv_columns(result.config.experiment);
    let mut s = String::new();
    for cell in &result.cells {
        let parts: Vec<String> = cols
            .iter()
            .map(|c| format!("{c}={}", format_number(cell_value(cell, c))))
            .collect();
        let _ = writeln!(s, "{}", parts.join(" "));
    }
    s
}
