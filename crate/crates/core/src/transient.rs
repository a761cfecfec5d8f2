//! Exact transient distributions for small state spaces, via uniformization.
//!
//! Serves as an independent oracle for the simulators: the state space is
//! enumerated by breadth-first search, the generator is uniformized, and the
//! Poisson series is truncated at absolute tail mass 1e-10.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::network::{theta, AugmentedNetwork, ReactionNetwork, Status};

/// Default cap on the enumerated state space.
pub const DEFAULT_STATE_CAP: usize = 200_000;
/// Absolute truncation error of the Poisson series.
pub const TAIL_TOL: f64 = 1e-10;
/// Beyond this uniformization rate * time the Poisson weights underflow.
pub const MAX_RATE_TIME: f64 = 700.0;

#[derive(Debug, Error)]
pub enum TransientError {
    #[error("reachable state space exceeds the cap of {cap} states")]
    StateCapExceeded { cap: usize },
    #[error("uniformization rate * time = {0} too large (> {MAX_RATE_TIME}); Poisson weights underflow")]
    RateTimeTooLarge(f64),
    #[error("initial state has dimension {got}, network has {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("time must be non-negative")]
    NegativeTime,
}

/// Probability table over enumerated states; `states[i]` has mass `probs[i]`.
#[derive(Debug, Clone)]
pub struct TransientDistribution<K> {
    pub states: Vec<K>,
    pub probs: Vec<f64>,
}

impl<K: Clone + Eq + std::hash::Hash> TransientDistribution<K> {
    pub fn prob_of(&self, key: &K) -> f64 {
        self.states
            .iter()
            .position(|s| s == key)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Pushes mass through `f`, merging states with equal images.
    pub fn map_states<L: Clone + Eq + std::hash::Hash>(
        &self,
        f: impl Fn(&K) -> L,
    ) -> TransientDistribution<L> {
        let mut index: HashMap<L, usize> = HashMap::new();
        let mut states = Vec::new();
        let mut probs = Vec::new();
        for (s, &p) in self.states.iter().zip(&self.probs) {
            let l = f(s);
            match index.get(&l) {
                Some(&i) => probs[i] += p,
                None => {
                    index.insert(l.clone(), states.len());
                    states.push(l);
                    probs.push(p);
                }
            }
        }
        TransientDistribution { states, probs }
    }

    /// Total variation distance to another table over the same key type.
    pub fn tv_distance(&self, other: &TransientDistribution<K>) -> f64 {
        let mut index: HashMap<&K, f64> = HashMap::new();
        for (s, &p) in self.states.iter().zip(&self.probs) {
            *index.entry(s).or_insert(0.0) += p;
        }
        for (s, &q) in other.states.iter().zip(&other.probs) {
            *index.entry(s).or_insert(0.0) -= q;
        }
        0.5 * index.values().map(|d| d.abs()).sum::<f64>()
    }
}

/// Generic uniformization over an enumerated chain: `explore(state)` lists
/// (destination, rate) pairs. Destinations outside the explored set are added
/// breadth-first until exhaustion or the cap.
fn uniformize<K: Clone + Eq + std::hash::Hash>(
    initial: K,
    explore: impl Fn(&K) -> Vec<(K, f64)>,
    t: f64,
    cap: usize,
) -> Result<TransientDistribution<K>, TransientError> {
    if t < 0.0 {
        return Err(TransientError::NegativeTime);
    }
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut states: Vec<K> = Vec::new();
    let mut edges: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(initial.clone(), 0);
    states.push(initial);
    edges.push(Vec::new());
    queue.push_back(0usize);
    while let Some(i) = queue.pop_front() {
        let moves = explore(&states[i]);
        let mut row: HashMap<usize, f64> = HashMap::new();
        for (dest, rate) in moves {
            if rate <= 0.0 {
                continue;
            }
            let j = match index.get(&dest) {
                Some(&j) => j,
                None => {
                    let j = states.len();
                    if j >= cap {
                        return Err(TransientError::StateCapExceeded { cap });
                    }
                    index.insert(dest.clone(), j);
                    states.push(dest);
                    edges.push(Vec::new()); // filled when this state is dequeued
                    queue.push_back(j);
                    j
                }
            };
            *row.entry(j).or_insert(0.0) += rate;
        }
        let mut row: Vec<(usize, f64)> = row.into_iter().collect();
        row.sort_unstable_by_key(|&(j, _)| j);
        edges[i] = row;
    }
    let n = states.len();
    let max_out = edges
        .iter()
        .map(|row| row.iter().map(|&(_, r)| r).sum::<f64>())
        .fold(0.0f64, f64::max);
    // Strictly above every exit rate so the uniformized chain keeps a
    // positive self-loop everywhere.
    let lambda = if max_out > 0.0 { max_out * 1.02 } else { 1.0 };
    if lambda * t > MAX_RATE_TIME {
        return Err(TransientError::RateTimeTooLarge(lambda * t));
    }

    let mut probs = vec![0.0; n];
    let mut cur = vec![0.0; n];
    cur[0] = 1.0;
    // Poisson(lambda*t) weights, accumulated until the tail is below TAIL_TOL.
    let mut weight = (-lambda * t).exp();
    let mut cum = 0.0;
    let mut k = 0u64;
    let mut next = vec![0.0; n];
    loop {
        for i in 0..n {
            probs[i] += weight * cur[i];
        }
        cum += weight;
        if 1.0 - cum <= TAIL_TOL {
            break;
        }
        // cur <- cur * P with P = I + Q/lambda.
        next.copy_from_slice(&cur);
        for (i, row) in edges.iter().enumerate() {
            if cur[i] == 0.0 {
                continue;
            }
            let mass = cur[i];
            for &(j, rate) in row {
                let p = rate / lambda;
                next[j] += mass * p;
                next[i] -= mass * p;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        k += 1;
        weight *= lambda * t / k as f64;
    }
    Ok(TransientDistribution { states, probs })
}

/// Transient distribution of the plain volume-scaled chain at time `t`.
pub fn plain_transient(
    net: &ReactionNetwork,
    x0: &[u64],
    volume: f64,
    t: f64,
    cap: usize,
) -> Result<TransientDistribution<Vec<u64>>, TransientError> {
    if x0.len() != net.dim() {
        return Err(TransientError::DimensionMismatch {
            got: x0.len(),
            want: net.dim(),
        });
    }
    let dim = net.dim();
    let stoich: Vec<Vec<i64>> = net.reactions().iter().map(|r| r.stoichiometry(dim)).collect();
    uniformize(
        x0.to_vec(),
        |x| {
            let mut out = Vec::new();
            for r in 0..net.reactions().len() {
                let rate = net.scaled_intensity(r, x, volume);
                if rate > 0.0 {
                    let dest: Vec<u64> = x
                        .iter()
                        .zip(&stoich[r])
                        .map(|(&v, &d)| v.wrapping_add_signed(d))
                        .collect();
                    out.push((dest, rate));
                }
            }
            out
        },
        t,
        cap,
    )
}

/// Transient distribution of the coupled (status, counts) chain at time `t`.
pub fn tracked_transient(
    aug: &AugmentedNetwork,
    x0: &[u64],
    tau0: usize,
    volume: f64,
    t: f64,
    cap: usize,
) -> Result<TransientDistribution<(Status, Vec<u64>)>, TransientError> {
    let net = aug.base();
    if x0.len() != net.dim() {
        return Err(TransientError::DimensionMismatch {
            got: x0.len(),
            want: net.dim(),
        });
    }
    let schema = aug.schema();
    let dim = net.dim();
    let stoich: Vec<Vec<i64>> = net.reactions().iter().map(|r| r.stoichiometry(dim)).collect();
    uniformize(
        (Status::Alive(tau0), x0.to_vec()),
        |(status, x)| {
            let mut out = Vec::new();
            for r in 0..net.reactions().len() {
                let rate = net.scaled_intensity(r, x, volume);
                if rate <= 0.0 {
                    continue;
                }
                let dest_x: Vec<u64> = x
                    .iter()
                    .zip(&stoich[r])
                    .map(|(&v, &d)| v.wrapping_add_signed(d))
                    .collect();
                let th = match *status {
                    Status::Alive(tau) => {
                        theta(&net.reactions()[r].reactant, schema.sigma(tau), x)
                    }
                    Status::Cemetery => 0.0,
                };
                if th > 0.0 {
                    let Status::Alive(tau) = *status else { unreachable!() };
                    for &(to, p) in schema.row(r, tau) {
                        out.push(((to, dest_x.clone()), th * p * rate));
                    }
                }
                if th < 1.0 {
                    out.push(((*status, dest_x), (1.0 - th) * rate));
                }
            }
            out
        },
        t,
        cap,
    )
}
