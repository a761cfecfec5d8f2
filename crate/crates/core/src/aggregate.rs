//! Aggregate approximation: the sum of many independent single-molecule
//! trajectories, weighted by 1/alpha per species, approximating the tracked
//! coordinates of the full stochastic system.

use rayon::prelude::*;
use thiserror::Error;

use crate::fluid::FluidSolution;
use crate::network::{AugmentedNetwork, ReactionNetwork, Status, StatusSchema, ROW_SUM_TOL};
use crate::rng::{stream, PURPOSE_SINGLE};
use crate::singlemol::{LimitRateTable, SingleError, SingleMoleculeSimulator};
use crate::ssa::JumpPath;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("model is not sub-conservative: {} violating (reaction, status) pairs", .0.len())]
    NotSubConservative(Vec<(usize, usize)>),
    #[error(transparent)]
    Single(#[from] SingleError),
    #[error("initial condition has dimension {got}, network has {want}")]
    DimensionMismatch { got: usize, want: usize },
}

/// Checks the sub-conservation identity: for every reaction `y -> y'` and
/// every status `tau'`, the tracked inflow `sum_tau y_{sigma(tau)} p(tau, tau')`
/// must equal `y'_{sigma(tau')}`. An empty return means the model qualifies
/// (tracked mass can then only decrease, via the cemetery).
pub fn check_subconservative(
    net: &ReactionNetwork,
    schema: &StatusSchema,
) -> Vec<(usize, usize)> {
    let mut violations = Vec::new();
    for (r, reaction) in net.reactions().iter().enumerate() {
        for to in 0..schema.n_statuses() {
            let inflow: f64 = (0..schema.n_statuses())
                .map(|from| {
                    reaction.reactant.coeff(schema.sigma(from)) as f64
                        * schema.prob(r, from, Status::Alive(to))
                })
                .sum();
            let want = reaction.product.coeff(schema.sigma(to)) as f64;
            if (inflow - want).abs() > ROW_SUM_TOL {
                violations.push((r, to));
            }
        }
    }
    violations
}

/// An ensemble of independent single-molecule paths with the bookkeeping
/// needed to evaluate the aggregate trajectory.
pub struct AggregateEnsemble {
    /// Initial path count per status.
    pub counts0: Vec<u64>,
    /// Statuses per species.
    pub alpha: Vec<u32>,
    /// sigma: status -> species.
    pub sigma: Vec<usize>,
    /// All paths, grouped by initial status in status order.
    pub paths: Vec<JumpPath<Status>>,
    pub volume: f64,
    pub horizon: f64,
}

/// Starts `floor(V * z_star_S)` paths at the designated initial status of each
/// tracked species and simulates them independently in parallel. Path `i`
/// always uses the stream `(seed, first_id + i)`, so results do not depend on
/// the thread count.
pub fn build_aggregate(
    aug: &AugmentedNetwork,
    table: &LimitRateTable,
    sol: &FluidSolution,
    z_star: &[f64],
    volume: f64,
    seed: u64,
    first_id: u64,
) -> Result<AggregateEnsemble, AggregateError> {
    let net = aug.base();
    let schema = aug.schema();
    if z_star.len() != net.dim() {
        return Err(AggregateError::DimensionMismatch {
            got: z_star.len(),
            want: net.dim(),
        });
    }
    let violations = check_subconservative(net, schema);
    if !violations.is_empty() {
        return Err(AggregateError::NotSubConservative(violations));
    }
    let mut counts0 = vec![0u64; schema.n_statuses()];
    for s in schema.tracked_species(net.dim()) {
        let tau = schema
            .initial_status_for(s)
            .expect("tracked species has a status");
        counts0[tau] = (volume * z_star[s]).floor().max(0.0) as u64;
    }
    let sim = SingleMoleculeSimulator::new(table, sol)?;
    // Global path index -> initial status, in status order.
    let mut tau_of: Vec<usize> = Vec::new();
    for (tau, &c) in counts0.iter().enumerate() {
        tau_of.extend(std::iter::repeat(tau).take(c as usize));
    }
    let paths: Result<Vec<_>, SingleError> = tau_of
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut rng = stream(seed, first_id + i as u64, PURPOSE_SINGLE);
            sim.simulate(tau, &mut rng)
        })
        .collect();
    Ok(AggregateEnsemble {
        counts0,
        alpha: (0..net.dim()).map(|s| schema.alpha(s)).collect(),
        sigma: (0..schema.n_statuses()).map(|t| schema.sigma(t)).collect(),
        paths: paths?,
        volume,
        horizon: sol.horizon(),
    })
}

impl AggregateEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Aggregate concentrations at each grid time: component `S` is
    /// `(1/V) * sum_paths 1{sigma(status) = S} / alpha(S)`; cemetery paths
    /// contribute nothing.
    pub fn trajectory(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        let dim = self.alpha.len();
        grid.iter()
            .map(|&t| {
                let mut z = vec![0.0; dim];
                for p in &self.paths {
                    if let Status::Alive(tau) = *p.state_at(t) {
                        let s = self.sigma[tau];
                        z[s] += 1.0 / self.alpha[s] as f64;
                    }
                }
                for v in &mut z {
                    *v /= self.volume;
                }
                z
            })
            .collect()
    }

    /// `sum_S alpha(S) * X_S(t)`: one unit per alive path, so non-increasing.
    pub fn tracked_mass(&self, t: f64) -> f64 {
        self.paths
            .iter()
            .filter(|p| !p.state_at(t).is_cemetery())
            .count() as f64
    }
}
