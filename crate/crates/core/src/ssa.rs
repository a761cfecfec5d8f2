//! Exact stochastic simulation (direct method) of a reaction network, and of
//! the coupled (status, counts) chain for a tracked molecule.
//!
//! The tracked simulation consumes participation randomness from a separate
//! stream ([`crate::rng::PURPOSE_TRACKING`]), and draws from it only when the
//! participation probability is positive, so the species path under a given
//! `(seed, id)` is identical whether or not tracking is enabled.

use rand::Rng;
use thiserror::Error;

use crate::network::{AugmentedNetwork, ReactionNetwork, Status};
use crate::rng::{stream, PURPOSE_EVENTS, PURPOSE_TRACKING};

/// Per-path event cap; exceeding it suggests an explosion (or a mis-scaled
/// rate constant), not a workload we should silently grind through.
pub const MAX_EVENTS: u64 = 2_000_000_000;

#[derive(Debug, Error)]
pub enum SsaError {
    #[error("initial state has dimension {got}, network has {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("total intensity is not finite at t = {t}")]
    NonFiniteIntensity { t: f64 },
    #[error("event count exceeded {MAX_EVENTS} before the horizon; explosion suspected")]
    TooManyEvents,
    #[error("tracked molecule starts in status `{status}` but its species has count 0")]
    EmptyInitialSpecies { status: String },
    #[error("horizon must be non-negative")]
    NegativeHorizon,
}

/// Right-continuous piecewise-constant path: `initial` on `[0, times[0])`,
/// `states[i]` on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath<S> {
    initial: S,
    times: Vec<f64>,
    states: Vec<S>,
    horizon: f64,
}

impl<S: Clone + PartialEq> JumpPath<S> {
    pub fn new(initial: S, times: Vec<f64>, states: Vec<S>, horizon: f64) -> Self {
        debug_assert_eq!(times.len(), states.len());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(times.last().is_none_or(|&t| t <= horizon));
        JumpPath {
            initial,
            times,
            states,
            horizon,
        }
    }

    pub fn initial(&self) -> &S {
        &self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_jumps(&self) -> usize {
        self.times.len()
    }

    /// State in effect at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> &S {
        let n = self.times.partition_point(|&u| u <= t);
        if n == 0 {
            &self.initial
        } else {
            &self.states[n - 1]
        }
    }

    pub fn final_state(&self) -> &S {
        self.states.last().unwrap_or(&self.initial)
    }

    /// Jumps as (time, pre-state, post-state) triples.
    pub fn transitions(&self) -> impl Iterator<Item = (f64, &S, &S)> + '_ {
        self.times.iter().enumerate().map(move |(i, &t)| {
            let pre = if i == 0 { &self.initial } else { &self.states[i - 1] };
            (t, pre, &self.states[i])
        })
    }
}

/// Coupled path of a tracked molecule: the full species-count path and the
/// status path. Status jump times are a subset of species jump times.
#[derive(Debug, Clone)]
pub struct TrackedPath {
    pub species: JumpPath<Vec<u64>>,
    pub status: JumpPath<Status>,
}

/// Compact per-reaction data for the hot simulation loop.
struct Engine {
    /// (species, reactant coefficient) pairs per reaction.
    reactants: Vec<Vec<(usize, u32)>>,
    /// Non-zero stoichiometry (species, delta) pairs per reaction.
    deltas: Vec<Vec<(usize, i64)>>,
    /// Rate constant folded with the volume scaling `k * V^(1-|y|)`.
    scaled_k: Vec<f64>,
}

impl Engine {
    fn new(net: &ReactionNetwork, volume: f64) -> Self {
        let dim = net.dim();
        let mut reactants = Vec::new();
        let mut deltas = Vec::new();
        let mut scaled_k = Vec::new();
        for r in net.reactions() {
            reactants.push(r.reactant.iter().collect());
            deltas.push(
                r.stoichiometry(dim)
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, d)| d != 0)
                    .collect(),
            );
            scaled_k.push(r.rate_constant * volume.powi(1 - r.reactant.order() as i32));
        }
        Engine {
            reactants,
            deltas,
            scaled_k,
        }
    }

    #[inline]
    fn intensity(&self, r: usize, x: &[u64]) -> f64 {
        let mut prod = self.scaled_k[r];
        for &(s, c) in &self.reactants[r] {
            if x[s] < c as u64 {
                return 0.0;
            }
            for j in 0..c as u64 {
                prod *= (x[s] - j) as f64;
            }
        }
        prod
    }

    #[inline]
    fn apply(&self, r: usize, x: &mut [u64]) {
        for &(s, d) in &self.deltas[r] {
            x[s] = x[s].wrapping_add_signed(d);
        }
    }
}

fn check_initial(net: &ReactionNetwork, x0: &[u64], horizon: f64) -> Result<(), SsaError> {
    if x0.len() != net.dim() {
        return Err(SsaError::DimensionMismatch {
            got: x0.len(),
            want: net.dim(),
        });
    }
    if horizon < 0.0 {
        return Err(SsaError::NegativeHorizon);
    }
    Ok(())
}

/// Exact direct-method path of the volume-scaled chain on `[0, horizon]`.
pub fn simulate_ssa(
    net: &ReactionNetwork,
    x0: &[u64],
    volume: f64,
    horizon: f64,
    rng: &mut impl Rng,
) -> Result<JumpPath<Vec<u64>>, SsaError> {
    check_initial(net, x0, horizon)?;
    let engine = Engine::new(net, volume);
    let n_reactions = net.reactions().len();
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut rates = vec![0.0; n_reactions];
    let mut events: u64 = 0;
    loop {
        let mut total = 0.0;
        for r in 0..n_reactions {
            rates[r] = engine.intensity(r, &x);
            total += rates[r];
        }
        if !total.is_finite() {
            return Err(SsaError::NonFiniteIntensity { t });
        }
        if total == 0.0 {
            break;
        }
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        if t > horizon {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = n_reactions - 1;
        for r in 0..n_reactions {
            if u < rates[r] {
                chosen = r;
                break;
            }
            u -= rates[r];
        }
        engine.apply(chosen, &mut x);
        times.push(t);
        states.push(x.clone());
        events += 1;
        if events > MAX_EVENTS {
            return Err(SsaError::TooManyEvents);
        }
    }
    Ok(JumpPath::new(x0.to_vec(), times, states, horizon))
}

/// What the tracked simulation should record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Record {
    Full,
    StatusOnly,
}

fn simulate_tracked_inner(
    aug: &AugmentedNetwork,
    x0: &[u64],
    tau0: usize,
    volume: f64,
    horizon: f64,
    seed: u64,
    id: u64,
    record: Record,
) -> Result<TrackedPath, SsaError> {
    let net = aug.base();
    check_initial(net, x0, horizon)?;
    let schema = aug.schema();
    if x0[schema.sigma(tau0)] == 0 {
        return Err(SsaError::EmptyInitialSpecies {
            status: schema.statuses()[tau0].to_string(),
        });
    }
    let engine = Engine::new(net, volume);
    let n_reactions = net.reactions().len();
    // Per (reaction, status): the reactant coefficient of sigma(status), and
    // the destination row. theta is coeff / x[sigma(status)].
    let sigma: Vec<usize> = (0..schema.n_statuses()).map(|t| schema.sigma(t)).collect();
    let coeff: Vec<Vec<u32>> = (0..n_reactions)
        .map(|r| {
            (0..schema.n_statuses())
                .map(|t| net.reactions()[r].reactant.coeff(sigma[t]))
                .collect()
        })
        .collect();
    let rows: Vec<Vec<&[(Status, f64)]>> = (0..n_reactions)
        .map(|r| (0..schema.n_statuses()).map(|t| schema.row(r, t)).collect())
        .collect();

    let mut ev = stream(seed, id, PURPOSE_EVENTS);
    let mut tr = stream(seed, id, PURPOSE_TRACKING);

    let mut x = x0.to_vec();
    let mut status = Status::Alive(tau0);
    let mut t = 0.0;
    let mut sp_times = Vec::new();
    let mut sp_states = Vec::new();
    let mut st_times = Vec::new();
    let mut st_states = Vec::new();
    let mut rates = vec![0.0; n_reactions];
    let mut events: u64 = 0;
    loop {
        let mut total = 0.0;
        for r in 0..n_reactions {
            rates[r] = engine.intensity(r, &x);
            total += rates[r];
        }
        if !total.is_finite() {
            return Err(SsaError::NonFiniteIntensity { t });
        }
        if total == 0.0 {
            break;
        }
        t += -(1.0 - ev.random::<f64>()).ln() / total;
        if t > horizon {
            break;
        }
        let mut u = ev.random::<f64>() * total;
        let mut chosen = n_reactions - 1;
        for r in 0..n_reactions {
            if u < rates[r] {
                chosen = r;
                break;
            }
            u -= rates[r];
        }
        if let Status::Alive(tau) = status {
            let c = coeff[chosen][tau] as u64;
            // The reaction fired, so x >= y component-wise and theta = c/x_s.
            if c > 0 {
                let th = c as f64 / x[sigma[tau]] as f64;
                let v = tr.random::<f64>();
                if v < th {
                    // Destination from the row, reusing the residual uniform.
                    let mut w = v / th;
                    let row = rows[chosen][tau];
                    let mut next = row.last().map(|&(to, _)| to).unwrap_or(Status::Cemetery);
                    for &(to, p) in row {
                        if w < p {
                            next = to;
                            break;
                        }
                        w -= p;
                    }
                    if next != status {
                        status = next;
                        st_times.push(t);
                        st_states.push(status);
                    }
                }
            }
        }
        engine.apply(chosen, &mut x);
        if record == Record::Full {
            sp_times.push(t);
            sp_states.push(x.clone());
        }
        events += 1;
        if events > MAX_EVENTS {
            return Err(SsaError::TooManyEvents);
        }
    }
    Ok(TrackedPath {
        species: JumpPath::new(x0.to_vec(), sp_times, sp_states, horizon),
        status: JumpPath::new(Status::Alive(tau0), st_times, st_states, horizon),
    })
}

/// Exact simulation of the coupled (status, counts) chain. The species path
/// under `(seed, id)` coincides with `simulate_ssa` driven by
/// `stream(seed, id, PURPOSE_EVENTS)`.
pub fn simulate_tracked(
    aug: &AugmentedNetwork,
    x0: &[u64],
    tau0: usize,
    volume: f64,
    horizon: f64,
    seed: u64,
    id: u64,
) -> Result<TrackedPath, SsaError> {
    simulate_tracked_inner(aug, x0, tau0, volume, horizon, seed, id, Record::Full)
}

/// Same chain as [`simulate_tracked`] but records only the status path,
/// keeping memory flat for large volumes.
pub fn simulate_tracked_status(
    aug: &AugmentedNetwork,
    x0: &[u64],
    tau0: usize,
    volume: f64,
    horizon: f64,
    seed: u64,
    id: u64,
) -> Result<JumpPath<Status>, SsaError> {
    simulate_tracked_inner(aug, x0, tau0, volume, horizon, seed, id, Record::StatusOnly)
        .map(|p| p.status)
}

/// Initial counts `floor(V * z)` for a fluid initial condition.
pub fn scaled_initial_state(z: &[f64], volume: f64) -> Vec<u64> {
    z.iter().map(|&v| (volume * v).floor().max(0.0) as u64).collect()
}
