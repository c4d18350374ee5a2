//! Omega-limit proxies and parameter sweeps.
//!
//! For each parameter value and seed: draw an age profile, build a segment
//! with `H0 = 0`, iterate `T`, keep the tail, and reduce every kept segment to
//! its L1 norm. The union over seeds, per parameter value, is the data of a
//! bifurcation-style diagram.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::d0::RandomGShape;
use crate::error::{Error, Result};
use crate::functional::{Model, D0_TOLERANCE};
use crate::model::{Grid, Nonlinearity, Parameters};
use crate::segment::HistorySegment;

/// Nonlinearity family swept over `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Hill,
    ArctanSine,
    /// `f = 0` regardless of `alpha`.
    Zero,
}

impl Family {
    pub fn at(self, alpha: f64) -> Nonlinearity {
        match self {
            Self::Hill => Nonlinearity::Hill { alpha },
            Self::ArctanSine => Nonlinearity::ArctanSine { alpha },
            Self::Zero => Nonlinearity::Zero,
        }
    }
}

fn default_n_iter() -> usize {
    600
}

fn default_n_keep() -> usize {
    100
}

fn default_cluster_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default = "default_n_keep")]
    pub n_keep: usize,
    pub n_seeds: usize,
    #[serde(default)]
    pub seed0: u64,
    pub params: Parameters,
    pub family: Family,
    /// Grid step; `tau0 / 20` when absent.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub shape: RandomGShape,
    /// Gap that separates clusters of norms.
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
}

impl SweepConfig {
    pub fn new(params: Parameters, family: Family, alphas: Vec<f64>, n_seeds: usize) -> Self {
        Self {
            alphas,
            n_iter: default_n_iter(),
            n_keep: default_n_keep(),
            n_seeds,
            seed0: 0,
            params,
            family,
            h: None,
            shape: RandomGShape::default(),
            cluster_tol: default_cluster_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameters(msg));
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !a.is_finite()) {
            return bad("alphas must be a nonempty list of finite values".into());
        }
        if self.n_keep == 0 || self.n_keep > self.n_iter {
            return bad(format!(
                "need 0 < n_keep <= n_iter, got {} and {}",
                self.n_keep, self.n_iter
            ));
        }
        if !(self.cluster_tol.is_finite() && self.cluster_tol > 0.0) {
            return bad(format!("cluster_tol must be > 0, got {}", self.cluster_tol));
        }
        for &alpha in &self.alphas {
            self.family.at(alpha).validate()?;
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<Grid> {
        match self.h {
            Some(h) => Grid::new(&self.params, h),
            None => Grid::finest_within(&self.params, self.params.tau0 / 20.0),
        }
    }

    /// RNG seed of task (`alpha`, `index`).
    pub fn task_seed(&self, alpha: f64, index: usize) -> u64 {
        self.seed0
            ^ splitmix64(alpha.to_bits() ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitSetLabel {
    FixedPoint,
    FiniteSet(usize),
    ContinuumOrAperiodic,
}

impl fmt::Display for LimitSetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FixedPoint => write!(f, "fixed-point"),
            Self::FiniteSet(k) => write!(f, "finite-set({k})"),
            Self::ContinuumOrAperiodic => write!(f, "continuum-or-aperiodic"),
        }
    }
}

/// Tail norms of one (`alpha`, seed) task, in iteration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub alpha: f64,
    pub seed_index: usize,
    pub seed: u64,
    /// `norms[i]` belongs to iterate `n_iter - n_keep + 1 + i`.
    pub norms: Vec<f64>,
    /// Largest sup-distance between two kept segments.
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    /// Sorted union of the norms of every seed.
    pub norms: Vec<f64>,
    pub label: LimitSetLabel,
    pub n_clusters: usize,
    /// Seed indices whose construction failed.
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<SeedRun>,
    pub per_alpha: Vec<AlphaSummary>,
}

/// Number of gap-separated clusters in sorted `norms` and the resulting label.
pub fn classify_limit_set(norms: &[f64], tol: f64) -> (LimitSetLabel, usize) {
    let clusters = if norms.is_empty() {
        0
    } else {
        1 + norms.windows(2).filter(|w| w[1] - w[0] > tol).count()
    };
    let label = match clusters {
        0 | 1 => LimitSetLabel::FixedPoint,
        k @ 2..=20 => LimitSetLabel::FiniteSet(k),
        _ => LimitSetLabel::ContinuumOrAperiodic,
    };
    (label, clusters)
}

/// The last `n_keep` of `n_iter` iterates of `T` from `u0`, which must have `H0 = 0`.
pub fn omega_limit(
    model: &Model,
    u0: &HistorySegment,
    n_iter: usize,
    n_keep: usize,
) -> Result<Vec<HistorySegment>> {
    let m = model.membership(u0, D0_TOLERANCE)?;
    if !m.in_d0 {
        return Err(Error::NotAdmissible { h0: m.h0 });
    }
    model.iterate_t(u0, n_iter, Some(n_keep))
}

fn diameter(segments: &[HistorySegment]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in segments.iter().enumerate() {
        for b in &segments[i + 1..] {
            best = best.max(a.max_abs_diff(b));
        }
    }
    best
}

fn run_task(cfg: &SweepConfig, grid: Grid, alpha: f64, index: usize) -> Result<Option<SeedRun>> {
    let model = Model::on_grid(cfg.params, cfg.family.at(alpha), grid)?;
    let seed = cfg.task_seed(alpha, index);
    let u0 = match model
        .random_g(seed, &cfg.shape)
        .and_then(|g| model.build_d0_segment(&g))
    {
        Ok(u0) => u0,
        Err(e @ Error::ConstructionFailed { .. }) => {
            log::warn!("alpha = {alpha}, seed index {index}: skipped ({e})");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let tail = omega_limit(&model, &u0, cfg.n_iter, cfg.n_keep)?;
    Ok(Some(SeedRun {
        alpha,
        seed_index: index,
        seed,
        norms: tail.iter().map(HistorySegment::l1_norm).collect(),
        diameter: diameter(&tail),
    }))
}

/// Run every (`alpha`, seed) task on the current rayon pool and merge.
///
/// The result depends only on `cfg`, not on the number of workers.
pub fn n_omega_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let tasks: Vec<(usize, f64, usize)> = cfg
        .alphas
        .iter()
        .enumerate()
        .flat_map(|(ai, &a)| (0..cfg.n_seeds).map(move |s| (ai, a, s)))
        .collect();
    let outcomes: Vec<(usize, usize, Option<SeedRun>)> = tasks
        .par_iter()
        .map(|&(ai, alpha, s)| run_task(cfg, grid, alpha, s).map(|r| (ai, s, r)))
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(outcomes.len());
    let mut per_alpha: Vec<AlphaSummary> = cfg
        .alphas
        .iter()
        .map(|&alpha| AlphaSummary {
            alpha,
            norms: Vec::new(),
            label: LimitSetLabel::FixedPoint,
            n_clusters: 0,
            skipped: Vec::new(),
        })
        .collect();
    for (ai, s, run) in outcomes {
        match run {
            Some(run) => {
                per_alpha[ai].norms.extend_from_slice(&run.norms);
                runs.push(run);
            }
            None => per_alpha[ai].skipped.push(s),
        }
    }
    for summary in &mut per_alpha {
        summary.norms.sort_by(f64::total_cmp);
        let (label, k) = classify_limit_set(&summary.norms, cfg.cluster_tol);
        summary.label = label;
        summary.n_clusters = k;
    }
    Ok(SweepResult { runs, per_alpha })
}

/// [`n_omega_sweep`] on a dedicated pool of `workers` threads.
pub fn n_omega_sweep_with_workers(cfg: &SweepConfig, workers: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| n_omega_sweep(cfg))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn small(family: Family, alphas: Vec<f64>) -> SweepConfig {
        SweepConfig {
            n_iter: 30,
            n_keep: 5,
            ..SweepConfig::new(Parameters::diagram(), family, alphas, 2)
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_limit_set(&[1.0, 1.0 + 1e-6, 1.0 + 2e-6], 1e-4),
            (LimitSetLabel::FixedPoint, 1)
        );
        assert_eq!(
            classify_limit_set(&[1.0, 1.00001, 2.0, 2.00001], 1e-4),
            (LimitSetLabel::FiniteSet(2), 2)
        );
        let spread: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        assert_eq!(
            classify_limit_set(&spread, 1e-4).0,
            LimitSetLabel::ContinuumOrAperiodic
        );
        assert_eq!(LimitSetLabel::FiniteSet(3).to_string(), "finite-set(3)");
    }

    #[test]
    fn config_validation() {
        let mut cfg = small(Family::Hill, vec![1.0]);
        assert!(cfg.validate().is_ok());
        cfg.n_keep = 31;
        assert!(cfg.validate().is_err());
        let cfg = small(Family::Hill, vec![]);
        assert!(cfg.validate().is_err());
        let cfg = small(Family::Hill, vec![f64::NAN]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_grid_is_tau0_over_20() {
        let g = small(Family::Hill, vec![1.0]).grid().unwrap();
        assert_relative_eq!(g.h, 0.005, max_relative = 1e-12);
        assert_eq!(g.segment_len(), 201);
    }

    #[test]
    fn task_seeds_differ() {
        let cfg = small(Family::Hill, vec![1.0, 2.0]);
        let seeds = [
            cfg.task_seed(1.0, 0),
            cfg.task_seed(1.0, 1),
            cfg.task_seed(2.0, 0),
        ];
        assert_ne!(seeds[0], seeds[1]);
        assert_ne!(seeds[0], seeds[2]);
    }

    #[test]
    fn zero_family_gives_zero_norms() {
        let res = n_omega_sweep(&small(Family::Zero, vec![0.0])).unwrap();
        let worst = res.per_alpha[0]
            .norms
            .iter()
            .fold(0.0f64, |a, n| a.max(n.abs()));
        assert!(worst < 1e-9, "{worst:e}");
        assert_eq!(res.per_alpha[0].label, LimitSetLabel::FixedPoint);
    }

    #[test]
    fn omega_limit_rejects_positive_h0() {
        let m = Model::new(
            Parameters::diagram(),
            Nonlinearity::Hill { alpha: 3.0 },
            0.005,
        )
        .unwrap();
        let u = HistorySegment::constant(&m.grid, 3.0);
        assert!(matches!(
            omega_limit(&m, &u, 10, 2),
            Err(Error::NotAdmissible { .. })
        ));
    }

    #[test]
    fn omega_limit_of_steady_state() {
        let m = Model::new(
            Parameters::diagram(),
            Nonlinearity::Hill { alpha: 3.0 },
            0.005,
        )
        .unwrap();
        let star = m.steady_state().unwrap();
        let u = HistorySegment::constant(&m.grid, star);
        let tail = omega_limit(&m, &u, 50, 5).unwrap();
        assert_eq!(tail.len(), 5);
        for seg in tail {
            assert!(seg.values.iter().all(|v| (v - star).abs() < 1e-8));
        }
    }

    #[test]
    fn worker_count_does_not_matter() {
        let cfg = small(Family::Hill, vec![0.5, 3.0]);
        let a = n_omega_sweep_with_workers(&cfg, 1).unwrap();
        let b = n_omega_sweep_with_workers(&cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs.len(), 4);
    }
}
