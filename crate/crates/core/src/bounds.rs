//! Numerical evaluation of the deviation bounds: the centered-Poisson maximal
//! inequality, the tube-exit bound for the scaled process, the single-molecule
//! expectation bound, and the aggregate deviation bound.
//!
//! All suprema over the tube (the eps-neighbourhood of the deterministic
//! trajectory in the sup norm, intersected with the orthant) are computed by
//! evaluating at the clipped upper corner `max(Z(u) + eps, 0)`: mass-action
//! monomials, their gradients, and the lattice discrepancies below are
//! coordinate-wise non-decreasing, so the corner realizes the supremum.
//! Integrals use the trapezoid rule on the fluid grid, inflated by 1%
//! to keep upper-bound semantics despite quadrature error.

use serde::Serialize;

use thiserror::Error;

use crate::fluid::FluidSolution;
use crate::network::{AugmentedNetwork, ReactionNetwork};
use crate::singlemol::{LimitRateTable, Monomial};

/// Multiplicative inflation absorbing trapezoid quadrature error.
pub const QUADRATURE_INFLATION: f64 = 1.01;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("eta = {eta:e} is not positive: V too small for this bound")]
    VolumeTooSmall { eta: f64 },
    #[error("tube touches the boundary for tracked species {species} (z - eps = {margin:e} <= 0)")]
    BoundaryTouched { species: usize, margin: f64 },
    #[error("horizon {t} exceeds the trajectory horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },
    #[error("invalid input: {0}")]
    BadInput(String),
}

/// A probability bound, reported raw (possibly > 1) and clamped.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ProbBound {
    pub raw: f64,
    pub clamped: f64,
    pub vacuous: bool,
}

impl ProbBound {
    pub fn new(raw: f64) -> Self {
        ProbBound {
            raw,
            clamped: raw.clamp(0.0, 1.0),
            vacuous: raw > 1.0,
        }
    }
}

/// Maximal-deviation bound for a centered unit Poisson process observed on
/// `[0, nT]` and scaled by `1/n`: `6 exp(e T / 2 - eps sqrt(n) / 3)`.
pub fn centered_poisson_bound(t: f64, epsilon: f64, n: u64) -> ProbBound {
    ProbBound::new(6.0 * (std::f64::consts::E * t / 2.0 - epsilon * (n as f64).sqrt() / 3.0).exp())
}

/// Tube suprema of the plain network rates over `[0, t]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlainTube {
    pub epsilon: f64,
    pub t: f64,
    /// Running sup of the summed rates over the tube.
    pub lambda0: f64,
    /// Its integral over [0, t].
    pub lambda1: f64,
    /// Running sup of the summed all-coordinates Lipschitz weights.
    pub l0: f64,
    pub l1: f64,
    /// Running sup of the summed kinetics discrepancy at lattice points.
    pub delta0: f64,
    pub delta1: f64,
}

/// Largest stoichiometric jump, `max_r ||y' - y||_inf`.
pub fn max_jump(net: &ReactionNetwork) -> f64 {
    net.reactions()
        .iter()
        .map(|r| {
            r.stoichiometry(net.dim())
                .iter()
                .map(|d| d.unsigned_abs())
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0) as f64
}

/// Grid times of `sol` up to `t`, ending exactly at `t`.
fn sample_times(sol: &FluidSolution, t: f64) -> Result<Vec<f64>, BoundError> {
    if t < 0.0 {
        return Err(BoundError::BadInput("t must be non-negative".into()));
    }
    if t > sol.horizon() + 1e-12 {
        return Err(BoundError::HorizonExceeded {
            t,
            horizon: sol.horizon(),
        });
    }
    let mut us: Vec<f64> = sol.grid().iter().copied().filter(|&u| u < t).collect();
    us.push(t.min(sol.horizon()));
    Ok(us)
}

/// Running supremum of `f` and the (inflated) trapezoid integral of that
/// running supremum.
fn running_sup_integral(us: &[f64], f: &[f64]) -> (f64, f64) {
    let mut sup = f64::NEG_INFINITY;
    let mut run = Vec::with_capacity(f.len());
    for &v in f {
        sup = sup.max(v);
        run.push(sup);
    }
    let mut integral = 0.0;
    for i in 1..us.len() {
        integral += 0.5 * (run[i - 1] + run[i]) * (us[i] - us[i - 1]);
    }
    (sup, integral * QUADRATURE_INFLATION)
}

fn upper_corner(z: &[f64], epsilon: f64) -> Vec<f64> {
    z.iter().map(|&v| (v + epsilon).max(0.0)).collect()
}

/// Exact discrepancy `prod x^y - x!/(x-y)!` at the lattice point, divided by
/// `V^{|y|}`; non-negative and non-decreasing in each coordinate of `x`.
fn lattice_discrepancy(coeff: f64, exps: &[u32], corner: &[f64], volume: f64) -> f64 {
    let x: Vec<f64> = corner.iter().map(|&c| (volume * c).floor().max(0.0)).collect();
    let mut monom = 1.0;
    let mut ff = 1.0;
    let mut order = 0u32;
    for (s, &e) in exps.iter().enumerate() {
        order += e;
        for j in 0..e {
            monom *= x[s];
            ff *= (x[s] - j as f64).max(0.0);
        }
    }
    coeff * (monom - ff).max(0.0) / volume.powi(order as i32)
}

fn reaction_monomials(net: &ReactionNetwork) -> Vec<Monomial> {
    net.reactions()
        .iter()
        .map(|r| {
            let mut exps = vec![0u32; net.dim()];
            for (s, c) in r.reactant.iter() {
                exps[s] = c;
            }
            Monomial {
                coeff: r.rate_constant,
                exps,
            }
        })
        .collect()
}

/// Tube suprema and integrals of the plain rates, Lipschitz weights, and
/// kinetics discrepancy over `[0, t]`.
pub fn plain_tube_quantities(
    net: &ReactionNetwork,
    sol: &FluidSolution,
    epsilon: f64,
    t: f64,
    volume: f64,
) -> Result<PlainTube, BoundError> {
    if epsilon <= 0.0 {
        return Err(BoundError::BadInput("epsilon must be positive".into()));
    }
    let us = sample_times(sol, t)?;
    let monomials = reaction_monomials(net);
    let mut lam = Vec::with_capacity(us.len());
    let mut lip = Vec::with_capacity(us.len());
    let mut disc = Vec::with_capacity(us.len());
    let mut z = vec![0.0; sol.dim()];
    for &u in &us {
        sol.eval_into(u, &mut z);
        let corner = upper_corner(&z, epsilon);
        lam.push(monomials.iter().map(|m| m.eval(&corner)).sum());
        lip.push(monomials.iter().map(|m| m.grad_l1(&corner)).sum());
        disc.push(
            monomials
                .iter()
                .map(|m| lattice_discrepancy(m.coeff, &m.exps, &corner, volume))
                .sum(),
        );
    }
    let (lambda0, lambda1) = running_sup_integral(&us, &lam);
    let (l0, l1) = running_sup_integral(&us, &lip);
    let (delta0, delta1) = running_sup_integral(&us, &disc);
    Ok(PlainTube {
        epsilon,
        t,
        lambda0,
        lambda1,
        l0,
        l1,
        delta0,
        delta1,
    })
}

/// `eta^{V,eps,t}(gamma) = exp(-L1 at 2 eps) * gamma * eps - delta1 at 2 eps`.
pub fn eta(q_at_2eps: &PlainTube, gamma: f64, epsilon: f64) -> f64 {
    (-q_at_2eps.l1).exp() * gamma * epsilon - q_at_2eps.delta1
}

/// Everything that went into a tube-exit bound, for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct PBoundDetail {
    pub epsilon: f64,
    pub t: f64,
    pub volume: f64,
    pub gamma: f64,
    pub p0: f64,
    pub r_max: f64,
    pub at_2eps: PlainTube,
    pub at_4eps: PlainTube,
    pub eta: f64,
    pub eta_hypothesis: f64,
    pub bound: ProbBound,
}

/// Probability that the scaled process leaves the eps-tube by time `t`,
/// bounded by `p0 + 6 exp(e Lambda1 / 2 + e delta1 / 2 - eta sqrt(V) / (3R))`
/// with the tube quantities at radius `2 eps`. Requires the hypothesis
/// `eta at doubled radius > 0`; otherwise the volume is too small.
pub fn p_bound(
    net: &ReactionNetwork,
    sol: &FluidSolution,
    epsilon: f64,
    t: f64,
    volume: f64,
    gamma: f64,
    p0: f64,
) -> Result<PBoundDetail, BoundError> {
    if !(0.0 < gamma && gamma <= 1.0) {
        return Err(BoundError::BadInput("gamma must be in (0, 1]".into()));
    }
    let at_2eps = plain_tube_quantities(net, sol, 2.0 * epsilon, t, volume)?;
    let at_4eps = plain_tube_quantities(net, sol, 4.0 * epsilon, t, volume)?;
    let eta_val = eta(&at_2eps, gamma, epsilon);
    // The theorem's hypothesis is stated at doubled radius.
    let eta_hyp = eta(&at_4eps, gamma, 2.0 * epsilon);
    if eta_hyp <= 0.0 || eta_val <= 0.0 {
        return Err(BoundError::VolumeTooSmall {
            eta: eta_hyp.min(eta_val),
        });
    }
    let r_max = max_jump(net);
    let e = std::f64::consts::E;
    let exponent =
        e * at_2eps.lambda1 / 2.0 + e * at_2eps.delta1 / 2.0 - eta_val * volume.sqrt() / (3.0 * r_max);
    let bound = ProbBound::new(p0 + 6.0 * exponent.exp());
    Ok(PBoundDetail {
        epsilon,
        t,
        volume,
        gamma,
        p0,
        r_max,
        at_2eps,
        at_4eps,
        eta: eta_val,
        eta_hypothesis: eta_hyp,
        bound,
    })
}

/// Closed-form tube-exit bound specialized to the two-reaction epidemic model
/// with conserved total concentration `z1 = z_S + z_I`:
/// `6 exp(t/2 (z1+2e)(k1 (z1+2e)+k2) - e sqrt(V)/6 exp(-t (k1 (z1+2e)-k2)))`.
pub fn sis_rough_p_bound(z1: f64, k1: f64, k2: f64, epsilon: f64, t: f64, volume: f64) -> ProbBound {
    let a = z1 + 2.0 * epsilon;
    let exponent =
        t / 2.0 * a * (k1 * a + k2) - epsilon * volume.sqrt() / 6.0 * (-t * (k1 * a - k2)).exp();
    ProbBound::new(6.0 * exponent.exp())
}

/// Tube quantities of the limit single-molecule rates over `[0, t]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrackedTube {
    pub epsilon: f64,
    pub t: f64,
    /// Max over statuses of the summed limit rates along the trajectory.
    pub lambda0: f64,
    pub lambda1: f64,
    /// Max over statuses of the summed Lipschitz weights over the tube.
    pub l0: f64,
    pub l1: f64,
    /// Max over statuses of the summed kinetics discrepancy over the tube.
    pub delta0: f64,
    pub delta1: f64,
}

/// Computes the tracked tube quantities. Refuses when the tube touches the
/// boundary in a coordinate that appears as the species of a source status
/// (the limit rates are only controlled away from the boundary there).
pub fn tracked_tube_quantities(
    aug: &AugmentedNetwork,
    table: &LimitRateTable,
    sol: &FluidSolution,
    epsilon: f64,
    t: f64,
    volume: f64,
) -> Result<TrackedTube, BoundError> {
    if epsilon <= 0.0 {
        return Err(BoundError::BadInput("epsilon must be positive".into()));
    }
    let schema = aug.schema();
    let us = sample_times(sol, t)?;
    let mut source_species: Vec<usize> = table.entries().iter().map(|e| schema.sigma(e.from)).collect();
    source_species.sort_unstable();
    source_species.dedup();
    let n_statuses = table.n_statuses();
    let mut lam = Vec::with_capacity(us.len());
    let mut lip = Vec::with_capacity(us.len());
    let mut disc = Vec::with_capacity(us.len());
    let mut z = vec![0.0; sol.dim()];
    for &u in &us {
        sol.eval_into(u, &mut z);
        for &s in &source_species {
            if z[s] - epsilon <= 0.0 {
                return Err(BoundError::BoundaryTouched {
                    species: s,
                    margin: z[s] - epsilon,
                });
            }
        }
        let corner = upper_corner(&z, epsilon);
        let mut best_lam: f64 = 0.0;
        let mut best_lip: f64 = 0.0;
        let mut best_disc: f64 = 0.0;
        for tau in 0..n_statuses {
            let mut sum_lam = 0.0;
            let mut sum_lip = 0.0;
            let mut sum_disc = 0.0;
            for e in table.entries_from(tau) {
                sum_lam += e.rate.eval(&z);
                sum_lip += e.rate.grad_l1(&corner);
                sum_disc += lattice_discrepancy(e.rate.coeff, &e.rate.exps, &corner, volume);
            }
            best_lam = best_lam.max(sum_lam);
            best_lip = best_lip.max(sum_lip);
            best_disc = best_disc.max(sum_disc);
        }
        lam.push(best_lam);
        lip.push(best_lip);
        disc.push(best_disc);
    }
    let (lambda0, lambda1) = running_sup_integral(&us, &lam);
    let (l0, l1) = running_sup_integral(&us, &lip);
    let (delta0, delta1) = running_sup_integral(&us, &disc);
    Ok(TrackedTube {
        epsilon,
        t,
        lambda0,
        lambda1,
        l0,
        l1,
        delta0,
        delta1,
    })
}

/// Bound on `sup_t E||Y^V(t) - Y(t)||`: the tube-exit probability plus the
/// accumulated rate discrepancy `(delta1 + eps L1) exp(2 Lambda1)`.
pub fn single_molecule_bound(
    p_exit: &ProbBound,
    tracked: &TrackedTube,
    epsilon: f64,
    min_component: f64,
) -> Result<ProbBound, BoundError> {
    if epsilon >= min_component {
        return Err(BoundError::BoundaryTouched {
            species: usize::MAX,
            margin: min_component - epsilon,
        });
    }
    let raw = p_exit.raw
        + (tracked.delta1 + epsilon * tracked.l1) * (2.0 * tracked.lambda1).exp();
    Ok(ProbBound::new(raw))
}

/// Quantities specific to the aggregate deviation bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AggregateQuantities {
    /// Largest stoichiometric jump projected on tracked species.
    pub r_hat_jump: f64,
    /// Largest single-path contribution jump (1/alpha scale).
    pub r_hat_path: f64,
    pub lambda_hat_1: f64,
    pub lambda_hat_2: f64,
    pub lambda_hat_3: f64,
    pub omega: f64,
    pub zeta: f64,
    /// Total tracked concentration `sum_S alpha(S) z*_S`.
    pub c: f64,
}

/// Computes the aggregate quantities over `[0, t]`.
pub fn aggregate_quantities(
    aug: &AugmentedNetwork,
    table: &LimitRateTable,
    sol: &FluidSolution,
    z_star: &[f64],
    epsilon: f64,
    t: f64,
    volume: f64,
) -> Result<AggregateQuantities, BoundError> {
    let net = aug.base();
    let schema = aug.schema();
    let us = sample_times(sol, t)?;
    let dim = net.dim();

    let tracked: Vec<usize> = schema.tracked_species(dim);
    let r_hat_jump = net
        .reactions()
        .iter()
        .map(|r| {
            let st = r.stoichiometry(dim);
            tracked
                .iter()
                .map(|&s| st[s].unsigned_abs())
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0) as f64;

    let r_hat_path = table
        .entries()
        .iter()
        .map(|e| {
            let from_s = schema.sigma(e.from);
            let a_from = 1.0 / schema.alpha(from_s) as f64;
            match e.to {
                crate::network::Status::Cemetery => a_from,
                crate::network::Status::Alive(to) => {
                    let to_s = schema.sigma(to);
                    if to_s == from_s {
                        0.0
                    } else {
                        a_from.max(1.0 / schema.alpha(to_s) as f64)
                    }
                }
            }
        })
        .fold(0.0f64, f64::max);

    let monomials = reaction_monomials(net);
    let n_statuses = table.n_statuses();
    let mut z = vec![0.0; sol.dim()];
    let mut sum_rates = Vec::with_capacity(us.len());
    let mut scaled_sum = Vec::with_capacity(us.len());
    let mut lip_full = Vec::with_capacity(us.len());
    let mut zeta_f = Vec::with_capacity(us.len());
    let mut hazards: Vec<Vec<f64>> = vec![Vec::with_capacity(us.len()); n_statuses];
    for &u in &us {
        sol.eval_into(u, &mut z);
        let corner = upper_corner(&z, epsilon);
        sum_rates.push(table.entries().iter().map(|e| e.rate.eval(&z)).sum::<f64>());
        // Scaled stochastic rates at the lattice corner: monomial minus the
        // discrepancy equals the falling-factorial intensity over V^{|y|}.
        scaled_sum.push(
            monomials
                .iter()
                .map(|m| {
                    let x: Vec<f64> = corner.iter().map(|&c| (volume * c).floor().max(0.0)).collect();
                    let mut ff = m.coeff;
                    let mut order = 0u32;
                    for (s, &e) in m.exps.iter().enumerate() {
                        order += e;
                        for j in 0..e {
                            ff *= (x[s] - j as f64).max(0.0);
                        }
                    }
                    ff / volume.powi(order as i32)
                })
                .sum::<f64>(),
        );
        lip_full.push(table.entries().iter().map(|e| e.rate.grad_l1(&corner)).sum::<f64>());
        zeta_f.push(z.iter().cloned().fold(0.0f64, f64::max) + epsilon);
        for tau in 0..n_statuses {
            hazards[tau].push(table.entries_from(tau).map(|e| e.rate.eval(&z)).sum());
        }
    }
    let (_, lambda_hat_1_base) = running_sup_integral(&us, &sum_rates);
    let lambda_hat_1 = r_hat_path * lambda_hat_1_base;
    let lambda_hat_2 = (0..n_statuses)
        .map(|tau| trapezoid(&us, &hazards[tau]))
        .fold(0.0f64, f64::max);
    let (_, lambda_hat_3) = running_sup_integral(&us, &scaled_sum);
    let omega = r_hat_path * epsilon * lip_full.iter().cloned().fold(0.0f64, f64::max);
    let zeta = trapezoid(&us, &zeta_f);
    let c = (0..dim).map(|s| schema.alpha(s) as f64 * z_star[s]).sum();
    Ok(AggregateQuantities {
        r_hat_jump,
        r_hat_path,
        lambda_hat_1,
        lambda_hat_2,
        lambda_hat_3,
        omega,
        zeta,
        c,
    })
}

fn trapezoid(us: &[f64], f: &[f64]) -> f64 {
    let mut integral = 0.0;
    for i in 1..us.len() {
        integral += 0.5 * (f[i - 1] + f[i]) * (us[i] - us[i - 1]);
    }
    integral * QUADRATURE_INFLATION
}

/// Aggregate deviation bound: returns the deviation level `nu` and the
/// probability that the aggregate strays farther than `nu` from the tracked
/// coordinates of the full process by time `t`.
pub fn aggregate_bound(
    q: &AggregateQuantities,
    p_exit: &ProbBound,
    plain_delta1: f64,
    volume: f64,
    nu1: f64,
    nu2: f64,
    nu3: f64,
    p_init: f64,
) -> (f64, ProbBound) {
    let e = std::f64::consts::E;
    let nu = q.lambda_hat_1.exp()
        * (q.r_hat_jump * nu1 + q.r_hat_path * nu2 + nu3 + q.r_hat_jump * plain_delta1 + q.omega * q.zeta);
    let sqrt_v = volume.sqrt();
    let raw = 6.0 * (e * q.lambda_hat_3 / 2.0 - nu1 * sqrt_v / 3.0).exp()
        + 6.0 * (e * q.c * q.lambda_hat_2 / 2.0 - nu2 * sqrt_v / 3.0).exp()
        + p_init
        + p_exit.raw;
    (nu, ProbBound::new(raw))
}

/// Naive grid search: the epsilon among `candidates` minimizing the raw
/// tube-exit bound, if any candidate admits one.
pub fn grid_search_p_bound(
    net: &ReactionNetwork,
    sol: &FluidSolution,
    t: f64,
    volume: f64,
    gamma: f64,
    p0: f64,
    candidates: &[f64],
) -> Option<PBoundDetail> {
    candidates
        .iter()
        .filter_map(|&eps| p_bound(net, sol, eps, t, volume, gamma, p0).ok())
        .min_by(|a, b| a.bound.raw.partial_cmp(&b.bound.raw).unwrap())
}
