//! Path functionals (transition counts, occupation times, survival curves)
//! and empirical distribution distances.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::network::Status;
use crate::ssa::JumpPath;

#[derive(Debug, Error)]
pub enum PathsError {
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("distribution type mismatch (discrete vs continuous)")]
    TypeMismatch,
    #[error("path starts at {got:?}, expected {want:?}")]
    WrongInitialStatus { got: Status, want: Status },
    #[error("time {t} beyond the path horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
}

/// Number of jumps of `path` from `from` to `to`.
pub fn count_transitions(path: &JumpPath<Status>, from: Status, to: Status) -> u64 {
    path.transitions()
        .filter(|&(_, pre, post)| *pre == from && *post == to)
        .count() as u64
}

/// Lebesgue measure of `{t <= horizon : path(t) in statuses}`.
pub fn occupation_time(
    path: &JumpPath<Status>,
    statuses: &[Status],
    horizon: f64,
) -> Result<f64, PathsError> {
    if horizon > path.horizon() + 1e-12 {
        return Err(PathsError::BeyondHorizon {
            t: horizon,
            horizon: path.horizon(),
        });
    }
    let mut total = 0.0;
    let mut cur = *path.initial();
    let mut since = 0.0;
    for (t, _, post) in path.transitions() {
        if t >= horizon {
            break;
        }
        if statuses.contains(&cur) {
            total += t - since;
        }
        cur = *post;
        since = t;
    }
    if statuses.contains(&cur) {
        total += horizon - since;
    }
    Ok(total)
}

/// Fraction of paths still in their initial status at each grid time. Paths
/// that leave and return are counted as departed (first-exit survival).
pub fn survival_curve(
    paths: &[JumpPath<Status>],
    initial: Status,
    grid: &[f64],
) -> Result<Vec<f64>, PathsError> {
    if paths.is_empty() {
        return Err(PathsError::EmptyEnsemble);
    }
    for p in paths {
        if *p.initial() != initial {
            return Err(PathsError::WrongInitialStatus {
                got: *p.initial(),
                want: initial,
            });
        }
    }
    // First exit time per path (infinity if it never leaves).
    let exits: Vec<f64> = paths
        .iter()
        .map(|p| p.times().first().copied().unwrap_or(f64::INFINITY))
        .collect();
    Ok(grid
        .iter()
        .map(|&t| exits.iter().filter(|&&e| e > t).count() as f64 / paths.len() as f64)
        .collect())
}

/// Empirical distribution of a path functional.
#[derive(Debug, Clone)]
pub enum EmpiricalDistribution {
    /// value -> count
    Discrete(BTreeMap<u64, u64>),
    /// sorted samples
    Continuous(Vec<f64>),
}

impl EmpiricalDistribution {
    pub fn from_counts(values: impl IntoIterator<Item = u64>) -> Self {
        let mut map = BTreeMap::new();
        for v in values {
            *map.entry(v).or_insert(0) += 1;
        }
        EmpiricalDistribution::Discrete(map)
    }

    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        EmpiricalDistribution::Continuous(samples)
    }

    pub fn n(&self) -> usize {
        match self {
            EmpiricalDistribution::Discrete(m) => m.values().sum::<u64>() as usize,
            EmpiricalDistribution::Continuous(s) => s.len(),
        }
    }

    /// Empirical CDF at `x` (continuous variant only).
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            EmpiricalDistribution::Continuous(s) => {
                s.partition_point(|&v| v <= x) as f64 / s.len() as f64
            }
            EmpiricalDistribution::Discrete(m) => {
                let total: u64 = m.values().sum();
                let below: u64 = m.range(..=(x.floor().max(0.0) as u64)).map(|(_, &c)| c).sum();
                below as f64 / total as f64
            }
        }
    }
}

/// Total variation between discrete empirical distributions, or
/// Kolmogorov-Smirnov between continuous ones.
pub fn distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64, PathsError> {
    match (a, b) {
        (EmpiricalDistribution::Discrete(ma), EmpiricalDistribution::Discrete(mb)) => {
            let na: u64 = ma.values().sum();
            let nb: u64 = mb.values().sum();
            if na == 0 || nb == 0 {
                return Err(PathsError::EmptyEnsemble);
            }
            let keys: std::collections::BTreeSet<u64> =
                ma.keys().chain(mb.keys()).copied().collect();
            let tv = 0.5
                * keys
                    .iter()
                    .map(|k| {
                        let pa = *ma.get(k).unwrap_or(&0) as f64 / na as f64;
                        let pb = *mb.get(k).unwrap_or(&0) as f64 / nb as f64;
                        (pa - pb).abs()
                    })
                    .sum::<f64>();
            Ok(tv)
        }
        (EmpiricalDistribution::Continuous(sa), EmpiricalDistribution::Continuous(sb)) => {
            if sa.is_empty() || sb.is_empty() {
                return Err(PathsError::EmptyEnsemble);
            }
            // Two-sample KS: sup over the merged sample points of |Fa - Fb|,
            // checking both one-sided limits at each point.
            let mut ks: f64 = 0.0;
            for &x in sa.iter().chain(sb.iter()) {
                let fa = sa.partition_point(|&v| v <= x) as f64 / sa.len() as f64;
                let fb = sb.partition_point(|&v| v <= x) as f64 / sb.len() as f64;
                ks = ks.max((fa - fb).abs());
                let fa_l = sa.partition_point(|&v| v < x) as f64 / sa.len() as f64;
                let fb_l = sb.partition_point(|&v| v < x) as f64 / sb.len() as f64;
                ks = ks.max((fa_l - fb_l).abs());
            }
            Ok(ks)
        }
        _ => Err(PathsError::TypeMismatch),
    }
}

/// One-sample KS statistic of sorted samples against a CDF.
pub fn ks_statistic_against(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = samples.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        ks = ks.max((f - i as f64 / n).abs());
        ks = ks.max(((i + 1) as f64 / n - f).abs());
    }
    ks
}
