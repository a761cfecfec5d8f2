//! Reaction networks, tracking status schemas, and the augmented network
//! that realizes a tracked molecule as ordinary species.
//!
//! Species are referred to by index into the network's ordered species list.
//! Complexes are sparse non-negative integer combinations of species.
//! Mass-action kinetics is assumed throughout: the stochastic intensity of a
//! reaction with reactant complex `y` and rate constant `k` in volume `V` is
//! `k * V^(1 - |y|) * x! / (x - y)!`, so that intensities scaled by `1/V`
//! converge to the deterministic rate `k * z^y` under the classical scaling.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for transformation-probability row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Sparse complex: a non-negative integer combination of species.
/// Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Complex(BTreeMap<usize, u32>);

impl Complex {
    pub fn empty() -> Self {
        Complex(BTreeMap::new())
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, u32)>>(pairs: I) -> Self {
        let mut map = BTreeMap::new();
        for (s, c) in pairs {
            if c > 0 {
                *map.entry(s).or_insert(0) += c;
            }
        }
        Complex(map)
    }

    /// Coefficient of species `s` (0 if absent).
    pub fn coeff(&self, s: usize) -> u32 {
        self.0.get(&s).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().map(|(&s, &c)| (s, c))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.keys().copied()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0.contains_key(&s)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total molecularity `|y|_1`.
    pub fn order(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn max_species(&self) -> Option<usize> {
        self.0.keys().next_back().copied()
    }

    /// `z^y` with the convention `0^0 = 1`.
    pub fn monomial(&self, z: &[f64]) -> f64 {
        self.iter()
            .map(|(s, c)| z[s].powi(c as i32))
            .product()
    }

    /// Falling factorial `x! / (x - y)!`, or 0 when `x < y` component-wise.
    pub fn falling_factorial(&self, x: &[u64]) -> f64 {
        let mut prod = 1.0;
        for (s, c) in self.iter() {
            if x[s] < c as u64 {
                return 0.0;
            }
            for j in 0..c as u64 {
                prod *= (x[s] - j) as f64;
            }
        }
        prod
    }

    pub fn format_with(&self, species: &[String]) -> String {
        if self.is_empty() {
            return "0".to_string();
        }
        self.iter()
            .map(|(s, c)| {
                if c == 1 {
                    species[s].clone()
                } else {
                    format!("{} {}", c, species[s])
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// A directed reaction `y -> y'` with a volume-independent rate constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub reactant: Complex,
    pub product: Complex,
    pub rate_constant: f64,
}

impl Reaction {
    pub fn stoichiometry(&self, dim: usize) -> Vec<i64> {
        let mut v = vec![0i64; dim];
        for (s, c) in self.product.iter() {
            v[s] += c as i64;
        }
        for (s, c) in self.reactant.iter() {
            v[s] -= c as i64;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateSpecies(String),
    SelfLoop(usize),
    NonPositiveRate(usize),
    UnusedSpecies(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateSpecies(n) => write!(f, "duplicate species name `{n}`"),
            Violation::SelfLoop(r) => write!(f, "reaction {r} is a self-loop (reactant equals product)"),
            Violation::NonPositiveRate(r) => write!(f, "reaction {r} has a non-positive rate constant"),
            Violation::UnusedSpecies(n) => write!(f, "species `{n}` appears in no reaction"),
        }
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("reaction {reaction} references species index {species} out of range (dimension {dim})")]
    SpeciesOutOfRange {
        reaction: usize,
        species: usize,
        dim: usize,
    },
    #[error("network has no species")]
    Empty,
}

/// A reaction network: an ordered species list and a list of reactions.
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self, NetworkError> {
        if species.is_empty() {
            return Err(NetworkError::Empty);
        }
        let dim = species.len();
        for (i, r) in reactions.iter().enumerate() {
            for c in [&r.reactant, &r.product] {
                if let Some(s) = c.max_species() {
                    if s >= dim {
                        return Err(NetworkError::SpeciesOutOfRange {
                            reaction: i,
                            species: s,
                            dim,
                        });
                    }
                }
            }
        }
        Ok(ReactionNetwork { species, reactions })
    }

    pub fn dim(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    /// Structural diagnostics. An empty list means the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, name) in self.species.iter().enumerate() {
            if self.species[..i].iter().any(|s| s == name) {
                out.push(Violation::DuplicateSpecies(name.clone()));
            }
        }
        let mut used = vec![false; self.dim()];
        for (i, r) in self.reactions.iter().enumerate() {
            if r.reactant == r.product {
                out.push(Violation::SelfLoop(i));
            }
            if !(r.rate_constant > 0.0) {
                out.push(Violation::NonPositiveRate(i));
            }
            for c in [&r.reactant, &r.product] {
                for s in c.support() {
                    used[s] = true;
                }
            }
        }
        for (s, u) in used.iter().enumerate() {
            if !u {
                out.push(Violation::UnusedSpecies(self.species[s].clone()));
            }
        }
        out
    }

    /// Stochastic mass-action intensity with the rate constant taken as-is
    /// (no volume scaling): `k * x!/(x-y)! * 1{x >= y}`.
    pub fn stochastic_intensity(&self, reaction: usize, x: &[u64]) -> f64 {
        let r = &self.reactions[reaction];
        r.rate_constant * r.reactant.falling_factorial(x)
    }

    /// Volume-scaled stochastic intensity: the V-indexed rate constant is
    /// `k * V^(1 - |y|)`, so second-order reactions get `k / V`.
    pub fn scaled_intensity(&self, reaction: usize, x: &[u64], volume: f64) -> f64 {
        let r = &self.reactions[reaction];
        let order = r.reactant.order() as i32;
        r.rate_constant * volume.powi(1 - order) * r.reactant.falling_factorial(x)
    }

    /// Deterministic mass-action rate `k * z^y` with `0^0 = 1`.
    pub fn deterministic_rate(&self, reaction: usize, z: &[f64]) -> f64 {
        let r = &self.reactions[reaction];
        r.rate_constant * r.reactant.monomial(z)
    }

    /// Right-hand side of the reaction ODE: `sum_r (y'-y) k z^y`.
    pub fn drift(&self, z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, r) in self.reactions.iter().enumerate() {
            let rate = self.deterministic_rate(i, z);
            if rate == 0.0 {
                continue;
            }
            for (s, c) in r.product.iter() {
                out[s] += c as f64 * rate;
            }
            for (s, c) in r.reactant.iter() {
                out[s] -= c as f64 * rate;
            }
        }
    }
}

/// Status of the tracked molecule: one of the schema's statuses, or the
/// absorbing cemetery (the tracked molecule has been degraded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    Alive(usize),
    Cemetery,
}

impl Status {
    pub fn is_cemetery(self) -> bool {
        matches!(self, Status::Cemetery)
    }
}

/// Probability that the tracked molecule (of species `sigma_tau`) takes part
/// in a firing of a reaction with reactant complex `y` at state `x`:
/// `y_s / x_s` when `x_s >= y_s >= 1`, otherwise 0.
pub fn theta(reactant: &Complex, sigma_tau: usize, x: &[u64]) -> f64 {
    let ys = reactant.coeff(sigma_tau) as u64;
    if ys >= 1 && x[sigma_tau] >= ys {
        ys as f64 / x[sigma_tau] as f64
    } else {
        0.0
    }
}

/// Deterministic-limit analogue of [`theta`]: `y_s / z_s` when both positive.
pub fn theta_fluid(reactant: &Complex, sigma_tau: usize, z: &[f64]) -> f64 {
    let ys = reactant.coeff(sigma_tau);
    if ys >= 1 && z[sigma_tau] > 0.0 {
        ys as f64 / z[sigma_tau]
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemaViolation {
    DuplicateStatus(String),
    SigmaOutOfRange { status: String, species: usize },
    ProbabilityOutOfRange { reaction: usize, from: String, value: f64 },
    /// p > 0 although sigma(from) is not in the reactant support, or the
    /// destination's species is not in the product support.
    UnsupportedTransform { reaction: usize, from: String, to: String },
    /// A status with sigma(tau) in the reactant support whose destination
    /// probabilities do not sum to 1.
    RowSum { reaction: usize, from: String, sum: f64 },
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaViolation::DuplicateStatus(n) => write!(f, "duplicate status name `{n}`"),
            SchemaViolation::SigmaOutOfRange { status, species } => {
                write!(f, "status `{status}` maps to species index {species} out of range")
            }
            SchemaViolation::ProbabilityOutOfRange { reaction, from, value } => write!(
                f,
                "reaction {reaction}: probability {value} from status `{from}` outside [0,1]"
            ),
            SchemaViolation::UnsupportedTransform { reaction, from, to } => write!(
                f,
                "reaction {reaction}: positive probability `{from}` -> `{to}` not supported by the reaction's complexes"
            ),
            SchemaViolation::RowSum { reaction, from, sum } => write!(
                f,
                "reaction {reaction}: probabilities from status `{from}` sum to {sum}, expected 1"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("invalid status schema: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<SchemaViolation>),
}

/// Tracking status schema: the status set T (the cemetery is implicit), the
/// species map sigma, and the transformation probabilities per reaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusSchema {
    statuses: Vec<String>,
    sigma: Vec<usize>,
    /// Marks the designated initial status of its species for aggregate runs.
    initial: Vec<bool>,
    /// Row representation of p_{y->y'}(tau, tau'): entries with p > 0 only,
    /// keyed by (reaction index, from-status index).
    rows: BTreeMap<(usize, usize), Vec<(Status, f64)>>,
}

impl StatusSchema {
    pub fn new(
        statuses: Vec<String>,
        sigma: Vec<usize>,
        initial: Vec<bool>,
        transform_probs: impl IntoIterator<Item = ((usize, usize, Status), f64)>,
    ) -> Self {
        let mut rows: BTreeMap<(usize, usize), Vec<(Status, f64)>> = BTreeMap::new();
        for ((reaction, from, to), p) in transform_probs {
            if p != 0.0 {
                rows.entry((reaction, from)).or_default().push((to, p));
            }
        }
        for row in rows.values_mut() {
            row.sort_by_key(|&(to, _)| to);
        }
        StatusSchema {
            statuses,
            sigma,
            initial,
            rows,
        }
    }

    pub fn n_statuses(&self) -> usize {
        self.statuses.len()
    }

    pub fn statuses(&self) -> &[String] {
        &self.statuses
    }

    pub fn status_index(&self, name: &str) -> Option<usize> {
        self.statuses.iter().position(|s| s == name)
    }

    pub fn sigma(&self, status: usize) -> usize {
        self.sigma[status]
    }

    pub fn is_initial(&self, status: usize) -> bool {
        self.initial[status]
    }

    /// Number of statuses mapping to `species` (alpha in the aggregate
    /// construction). Zero means the species is not tracked.
    pub fn alpha(&self, species: usize) -> u32 {
        self.sigma.iter().filter(|&&s| s == species).count() as u32
    }

    /// Tracked species, in species order.
    pub fn tracked_species(&self, dim: usize) -> Vec<usize> {
        (0..dim).filter(|&s| self.alpha(s) > 0).collect()
    }

    /// Designated initial status for a tracked species: the one flagged
    /// `initial`, falling back to the first status mapping to the species.
    pub fn initial_status_for(&self, species: usize) -> Option<usize> {
        (0..self.statuses.len())
            .find(|&t| self.sigma[t] == species && self.initial[t])
            .or_else(|| (0..self.statuses.len()).find(|&t| self.sigma[t] == species))
    }

    pub fn prob(&self, reaction: usize, from: usize, to: Status) -> f64 {
        self.rows
            .get(&(reaction, from))
            .and_then(|row| row.iter().find(|&&(t, _)| t == to))
            .map(|&(_, p)| p)
            .unwrap_or(0.0)
    }

    /// Positive-probability destinations for (reaction, from), sorted by status.
    pub fn row(&self, reaction: usize, from: usize) -> &[(Status, f64)] {
        self.rows
            .get(&(reaction, from))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Status, f64)> + '_ {
        self.rows
            .iter()
            .flat_map(|(&(r, from), row)| row.iter().map(move |&(to, p)| (r, from, to, p)))
    }

    /// Checks the schema against Definition-style constraints: probabilities
    /// in [0,1], support consistency, and exact row sums (including the
    /// cemetery column) for every status consumed by a reaction.
    pub fn validate(&self, net: &ReactionNetwork) -> Vec<SchemaViolation> {
        let mut out = Vec::new();
        for (i, name) in self.statuses.iter().enumerate() {
            if self.statuses[..i].iter().any(|s| s == name) {
                out.push(SchemaViolation::DuplicateStatus(name.clone()));
            }
        }
        for (i, &s) in self.sigma.iter().enumerate() {
            if s >= net.dim() {
                out.push(SchemaViolation::SigmaOutOfRange {
                    status: self.statuses[i].clone(),
                    species: s,
                });
                return out;
            }
        }
        for (r, from, to, p) in self.entries() {
            if r >= net.reactions().len() {
                out.push(SchemaViolation::UnsupportedTransform {
                    reaction: r,
                    from: self.statuses[from].clone(),
                    to: self.status_name(to),
                });
                continue;
            }
            let reaction = &net.reactions()[r];
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                out.push(SchemaViolation::ProbabilityOutOfRange {
                    reaction: r,
                    from: self.statuses[from].clone(),
                    value: p,
                });
            }
            let from_ok = reaction.reactant.contains(self.sigma[from]);
            let to_ok = match to {
                Status::Cemetery => true,
                Status::Alive(t) => reaction.product.contains(self.sigma[t]),
            };
            if !(from_ok && to_ok) {
                out.push(SchemaViolation::UnsupportedTransform {
                    reaction: r,
                    from: self.statuses[from].clone(),
                    to: self.status_name(to),
                });
            }
        }
        for (r, reaction) in net.reactions().iter().enumerate() {
            for from in 0..self.statuses.len() {
                if !reaction.reactant.contains(self.sigma[from]) {
                    continue;
                }
                let sum: f64 = self.row(r, from).iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(SchemaViolation::RowSum {
                        reaction: r,
                        from: self.statuses[from].clone(),
                        sum,
                    });
                }
            }
        }
        out
    }

    pub fn status_name(&self, status: Status) -> String {
        match status {
            Status::Alive(t) => self.statuses[t].clone(),
            Status::Cemetery => "delta".to_string(),
        }
    }
}

/// One element of the tracked reaction set: the tracked molecule moves from
/// `from` to `to` when the base reaction fires and the molecule participates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedReaction {
    pub from: usize,
    pub to: Status,
    pub reaction: usize,
    pub prob: f64,
}

/// A reaction network together with a validated status schema and the
/// enumerated tracked reactions (exactly the positive-probability triples).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentedNetwork {
    base: ReactionNetwork,
    schema: StatusSchema,
    tracked: Vec<TrackedReaction>,
}

pub fn build_augmented(
    net: &ReactionNetwork,
    schema: &StatusSchema,
) -> Result<AugmentedNetwork, SchemaError> {
    let violations = schema.validate(net);
    if !violations.is_empty() {
        return Err(SchemaError::Invalid(violations));
    }
    let mut tracked = Vec::new();
    for (reaction, from, to, prob) in schema.entries() {
        tracked.push(TrackedReaction {
            from,
            to,
            reaction,
            prob,
        });
    }
    Ok(AugmentedNetwork {
        base: net.clone(),
        schema: schema.clone(),
        tracked,
    })
}

impl AugmentedNetwork {
    pub fn base(&self) -> &ReactionNetwork {
        &self.base
    }

    pub fn schema(&self) -> &StatusSchema {
        &self.schema
    }

    pub fn tracked(&self) -> &[TrackedReaction] {
        &self.tracked
    }

    /// Intensity of tracked reaction `idx` at coupled state (`status`, `x`):
    /// `1{status = from} * theta_y(from, x) * p * lambda^V(x)`.
    pub fn tracked_intensity(&self, idx: usize, status: Status, x: &[u64], volume: f64) -> f64 {
        let tr = &self.tracked[idx];
        match status {
            Status::Alive(t) if t == tr.from => {
                let s = self.schema.sigma(tr.from);
                let reactant = &self.base.reactions()[tr.reaction].reactant;
                theta(reactant, s, x) * tr.prob * self.base.scaled_intensity(tr.reaction, x, volume)
            }
            _ => 0.0,
        }
    }
}
