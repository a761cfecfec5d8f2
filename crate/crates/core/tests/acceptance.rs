//! End-to-end acceptance suite. Each test prints a single PASS/FAIL line
//! with the measured quantities, then asserts at the pinned tolerance.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use rayon::prelude::*;

use moltrack::aggregate::build_aggregate;
use moltrack::bounds::{
    centered_poisson_bound, p_bound, single_molecule_bound, sis_rough_p_bound,
    tracked_tube_quantities,
};
use moltrack::fluid::{si_survival, solve_fluid};
use moltrack::models;
use moltrack::network::{build_augmented, AugmentedNetwork, Status};
use moltrack::paths::{
    count_transitions, distance, ks_statistic_against, occupation_time, survival_curve,
    EmpiricalDistribution,
};
use moltrack::rng::{stream, PURPOSE_EVENTS};
use moltrack::singlemol::{build_limit_rates, SingleMoleculeSimulator};
use moltrack::ssa::{simulate_ssa, simulate_tracked, simulate_tracked_status, JumpPath};
use moltrack::transient::{plain_transient, tracked_transient, DEFAULT_STATE_CAP};

fn aug_of(m: &moltrack::model::Model) -> AugmentedNetwork {
    build_augmented(&m.network, m.schema.as_ref().unwrap()).unwrap()
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Empirical first-exit survival over a grid from status paths.
fn empirical_survival(paths: &[JumpPath<Status>], tau0: usize, grid: &[f64]) -> Vec<f64> {
    survival_curve(paths, Status::Alive(tau0), grid).unwrap()
}

// 1. SI survival: fluid matches the closed form to 1e-6; 1000 tracked-SSA
//    molecules and 1000 limit paths each reproduce it within 0.05 sup-norm.
#[test]
fn criterion_1_si_survival() {
    let m = models::si();
    let (beta, rho) = (1.0, 0.01);
    let horizon = 10.0;
    let sol = solve_fluid(&m.network, &m.init, horizon, 1e-3).unwrap();
    let mut fluid_err: f64 = 0.0;
    for i in 0..=1000 {
        let t = horizon * i as f64 / 1000.0;
        fluid_err = fluid_err.max((sol.eval(t)[0] - si_survival(beta, rho, t)).abs());
    }

    let grid: Vec<f64> = (0..=200).map(|i| horizon * i as f64 / 200.0).collect();
    let aug = aug_of(&m);
    let volume = 1000.0;
    let x0 = vec![1000u64, 10u64];
    let ssa_paths: Vec<_> = (0..1000u64)
        .into_par_iter()
        .map(|i| simulate_tracked_status(&aug, &x0, 0, volume, horizon, 10, i).unwrap())
        .collect();
    let ssa_curve = empirical_survival(&ssa_paths, 0, &grid);

    let table = build_limit_rates(&aug);
    let sim = SingleMoleculeSimulator::new(&table, &sol).unwrap();
    let limit_paths = sim.simulate_batch(0, 1000, 11, 0).unwrap();
    let limit_curve = empirical_survival(&limit_paths, 0, &grid);

    let sup = |curve: &[f64]| -> f64 {
        grid.iter()
            .zip(curve)
            .map(|(&t, &f)| (f - si_survival(beta, rho, t)).abs())
            .fold(0.0, f64::max)
    };
    let (ssa_err, limit_err) = (sup(&ssa_curve), sup(&limit_curve));
    let pass = fluid_err < 1e-6 && ssa_err < 0.05 && limit_err < 0.05;
    report(
        "1",
        pass,
        &format!("fluid sup-err {fluid_err:.2e}, tracked-ssa sup-err {ssa_err:.4}, limit sup-err {limit_err:.4}"),
    );
    assert!(pass);
}

// 2. Marginal-law oracle at V=5: 1e5 tracked samples at t=1 vs the
//    uniformization transient (TV < 0.02), and the tracked-vs-plain exact
//    transients agree entrywise within 1e-9.
#[test]
fn criterion_2_marginal_oracle() {
    let m = models::sis();
    let aug = aug_of(&m);
    let (volume, t) = (5.0, 1.0);
    let x0 = vec![4u64, 1u64];

    let plain = plain_transient(&m.network, &x0, volume, t, DEFAULT_STATE_CAP).unwrap();
    let tracked = tracked_transient(&aug, &x0, 1, volume, t, DEFAULT_STATE_CAP).unwrap();
    let marginal = tracked.map_states(|(_, x)| x.clone());
    let mut max_gap: f64 = 0.0;
    for s in &plain.states {
        max_gap = max_gap.max((plain.prob_of(s) - marginal.prob_of(s)).abs());
    }

    let n = 100_000u64;
    let counts: std::collections::HashMap<Vec<u64>, u64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = simulate_tracked(&aug, &x0, 1, volume, t, 21, i).unwrap();
            p.species.state_at(t).clone()
        })
        .fold(std::collections::HashMap::new, |mut acc, s| {
            *acc.entry(s).or_insert(0) += 1;
            acc
        })
        .reduce(std::collections::HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    let mut tv = 0.0;
    let mut seen = 0u64;
    for s in &plain.states {
        let emp = *counts.get(s).unwrap_or(&0);
        seen += emp;
        tv += (emp as f64 / n as f64 - plain.prob_of(s)).abs();
    }
    tv = 0.5 * (tv + (n - seen) as f64 / n as f64);

    let pass = tv < 0.02 && max_gap < 1e-9;
    report(
        "2",
        pass,
        &format!("empirical TV {tv:.4} (n = {n}), tracked-vs-plain transient gap {max_gap:.2e}"),
    );
    assert!(pass);
}

// 3. Tracked mass sum_S alpha(S) X_S is non-increasing at every jump on all
//    sub-conservative bundled models: exact assertion over 10^3 paths.
#[test]
fn criterion_3_subconservation_pathwise() {
    let sub_models = [
        models::si(),
        models::sis(),
        models::autophos(),
        models::mm_full(),
        models::mm_futile(),
    ];
    let mut checked_paths = 0usize;
    let mut violations = 0usize;
    for m in &sub_models {
        let schema = m.schema.as_ref().unwrap();
        let weights: Vec<u64> = (0..m.network.dim())
            .map(|s| schema.alpha(s) as u64)
            .collect();
        let volume = 100.0;
        let x0: Vec<u64> = m.init.iter().map(|&z| (volume * z).floor() as u64).collect();
        let mass = |x: &[u64]| -> u64 { x.iter().zip(&weights).map(|(a, b)| a * b).sum() };
        for id in 0..200u64 {
            let mut rng = stream(33, id, PURPOSE_EVENTS);
            let path = simulate_ssa(&m.network, &x0, volume, 5.0, &mut rng).unwrap();
            let mut prev = mass(&x0);
            for s in path.states() {
                let cur = mass(s);
                if cur > prev {
                    violations += 1;
                }
                prev = cur;
            }
            checked_paths += 1;
        }
    }
    let pass = violations == 0 && checked_paths == 1000;
    report(
        "3",
        pass,
        &format!("{checked_paths} paths over {} models, {violations} mass increases", sub_models.len()),
    );
    assert!(pass);
}

// 4. Infection-count distribution on the epidemic model at V=1000: TV between
//    1000 tracked-SSA and 1000 limit replications < 0.1, and the self-distance
//    of two independent limit batches < 0.1.
#[test]
fn criterion_4_transition_count_distribution() {
    let m = models::sis();
    let aug = aug_of(&m);
    let horizon = 10.0;
    let volume = 1000.0;
    let x0 = vec![990u64, 10u64];
    let psi = |p: &JumpPath<Status>| count_transitions(p, Status::Alive(0), Status::Alive(1));

    let ssa_samples: Vec<u64> = (0..1000u64)
        .into_par_iter()
        .map(|i| psi(&simulate_tracked_status(&aug, &x0, 0, volume, horizon, 41, i).unwrap()))
        .collect();

    let sol = solve_fluid(&m.network, &m.init, horizon, 1e-3).unwrap();
    let table = build_limit_rates(&aug);
    let sim = SingleMoleculeSimulator::new(&table, &sol).unwrap();
    let limit_a: Vec<u64> = sim
        .simulate_batch(0, 1000, 42, 0)
        .unwrap()
        .iter()
        .map(psi)
        .collect();
    let limit_b: Vec<u64> = sim
        .simulate_batch(0, 1000, 43, 0)
        .unwrap()
        .iter()
        .map(psi)
        .collect();

    let d_ssa_limit = distance(
        &EmpiricalDistribution::from_counts(ssa_samples),
        &EmpiricalDistribution::from_counts(limit_a.clone()),
    )
    .unwrap();
    let d_self = distance(
        &EmpiricalDistribution::from_counts(limit_a),
        &EmpiricalDistribution::from_counts(limit_b),
    )
    .unwrap();
    let pass = d_ssa_limit < 0.1 && d_self < 0.1;
    report(
        "4",
        pass,
        &format!("TV(ssa, limit) = {d_ssa_limit:.4}, TV(limit, limit') = {d_self:.4}"),
    );
    assert!(pass);
}

// 5. Enzyme occupation time on the futile-cycle mechanism at V=1000:
//    KS distance between 1000 tracked-SSA and 1000 limit samples < 0.1.
#[test]
fn criterion_5_occupation_time_distribution() {
    let m = models::mm_futile();
    let aug = aug_of(&m);
    let horizon = 10.0;
    let volume = 1000.0;
    let x0: Vec<u64> = m.init.iter().map(|&z| (volume * z).floor() as u64).collect();
    let bound_status = aug.schema().status_index("C_E").unwrap();
    let tau0 = aug.schema().status_index("E~").unwrap();
    let upsilon = |p: &JumpPath<Status>| {
        occupation_time(p, &[Status::Alive(bound_status)], horizon).unwrap()
    };

    let ssa_samples: Vec<f64> = (0..1000u64)
        .into_par_iter()
        .map(|i| upsilon(&simulate_tracked_status(&aug, &x0, tau0, volume, horizon, 51, i).unwrap()))
        .collect();

    let sol = solve_fluid(&m.network, &m.init, horizon, 1e-3).unwrap();
    let table = build_limit_rates(&aug);
    let sim = SingleMoleculeSimulator::new(&table, &sol).unwrap();
    let limit_samples: Vec<f64> = sim
        .simulate_batch(tau0, 1000, 52, 0)
        .unwrap()
        .iter()
        .map(upsilon)
        .collect();

    let ks = distance(
        &EmpiricalDistribution::from_samples(ssa_samples),
        &EmpiricalDistribution::from_samples(limit_samples),
    )
    .unwrap();
    let pass = ks < 0.1;
    report("5", pass, &format!("KS(ssa, limit) = {ks:.4}"));
    assert!(pass);
}

// 6. Aggregate approximation at V=1000 with a 10%-infected start: mean
//    trajectories of X_S/V agree within 0.02 sup-norm over [0,10] (100 runs
//    each), and the aggregate variance at t=5 is not significantly larger
//    than the true variance (one-sided F-test at level 1e-2).
#[test]
fn criterion_6_aggregate_mean_and_variance() {
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};

    let m = models::sis();
    let aug = aug_of(&m);
    let horizon = 10.0;
    let volume = 1000.0;
    let z_star = [0.9, 0.1];
    let x0 = vec![900u64, 100u64];
    let grid: Vec<f64> = (0..=100).map(|i| horizon * i as f64 / 100.0).collect();
    let runs = 100usize;

    let ssa_curves: Vec<Vec<f64>> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(61, i, PURPOSE_EVENTS);
            let p = simulate_ssa(&m.network, &x0, volume, horizon, &mut rng).unwrap();
            grid.iter().map(|&t| p.state_at(t)[0] as f64 / volume).collect()
        })
        .collect();

    let sol = solve_fluid(&m.network, &z_star, horizon, 1e-3).unwrap();
    let table = build_limit_rates(&aug);
    let agg_curves: Vec<Vec<f64>> = (0..runs)
        .map(|r| {
            let ens = build_aggregate(
                &aug,
                &table,
                &sol,
                &z_star,
                volume,
                62,
                (r * 1_000_000) as u64,
            )
            .unwrap();
            ens.trajectory(&grid).iter().map(|z| z[0]).collect()
        })
        .collect();

    let mean_at = |curves: &[Vec<f64>], j: usize| -> f64 {
        curves.iter().map(|c| c[j]).sum::<f64>() / curves.len() as f64
    };
    let mut sup_diff: f64 = 0.0;
    for j in 0..grid.len() {
        sup_diff = sup_diff.max((mean_at(&ssa_curves, j) - mean_at(&agg_curves, j)).abs());
    }

    let j5 = grid.iter().position(|&t| (t - 5.0).abs() < 1e-9).unwrap();
    let var_at = |curves: &[Vec<f64>]| -> f64 {
        let mean = mean_at(curves, j5);
        curves.iter().map(|c| (c[j5] - mean).powi(2)).sum::<f64>() / (curves.len() - 1) as f64
    };
    let (var_ssa, var_agg) = (var_at(&ssa_curves), var_at(&agg_curves));
    let f_crit = FisherSnedecor::new((runs - 1) as f64, (runs - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    let variance_ok = var_agg <= var_ssa * f_crit;

    let pass = sup_diff < 0.02 && variance_ok;
    report(
        "6",
        pass,
        &format!(
            "sup mean diff {sup_diff:.4}; var(aggregate) {var_agg:.3e} vs var(ssa) {var_ssa:.3e} (F crit {f_crit:.2})"
        ),
    );
    assert!(pass);
}

// 7a. The centered-Poisson maximal bound dominates Monte Carlo sup-deviation
//     frequencies (1e5 paths, n in {100, 10^4}).
#[test]
fn criterion_7a_poisson_bound_dominates() {
    let t_end = 1.0;
    let n_paths = 100_000u64;
    let mut all_ok = true;
    let mut lines = Vec::new();
    for &n in &[100u64, 10_000u64] {
        // Empirical sup_u |N(n u)/n - u| per path.
        let sups: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(71 + n, i, PURPOSE_EVENTS);
                let mut t = 0.0f64;
                let mut k = 0u64;
                let mut sup = 0.0f64;
                loop {
                    let gap = -(1.0 - rand::Rng::random::<f64>(&mut rng)).ln() / n as f64;
                    let next = t + gap;
                    if next >= t_end {
                        sup = sup.max((k as f64 / n as f64 - t_end).abs());
                        break;
                    }
                    // Just before the jump the centered path is lowest ...
                    sup = sup.max((k as f64 / n as f64 - next).abs());
                    k += 1;
                    // ... and highest immediately after.
                    sup = sup.max((k as f64 / n as f64 - next).abs());
                    t = next;
                }
                sup
            })
            .collect();
        for &eps in &[0.3, 0.5, 1.0] {
            let freq = sups.iter().filter(|&&s| s > eps).count() as f64 / n_paths as f64;
            let bound = centered_poisson_bound(t_end, eps, n);
            let ok = freq <= bound.raw;
            all_ok &= ok;
            lines.push(format!("n={n} eps={eps}: freq {freq:.3e} <= bound {:.3e}: {ok}", bound.raw));
        }
    }
    report("7a", all_ok, &lines.join("; "));
    assert!(all_ok);
}

// 7b. The generic tube-exit bound is at most the rough closed form on the
//     (eps, t, V) grid wherever the bound is available.
#[test]
fn criterion_7b_generic_vs_rough() {
    let m = models::sis();
    let sol = solve_fluid(&m.network, &m.init, 10.0, 1e-3).unwrap();
    let mut all_ok = true;
    let mut lines = Vec::new();
    for &t in &[1.0, 5.0, 10.0] {
        for &volume in &[1e4, 1e6] {
            for &eps in &[0.02, 0.05, 0.1] {
                let rough = sis_rough_p_bound(1.0, 1.0, 0.5, eps, t, volume);
                match p_bound(&m.network, &sol, eps, t, volume, 1.0, 0.0) {
                    Ok(d) => {
                        let ok = d.bound.raw <= rough.raw;
                        all_ok &= ok;
                        lines.push(format!(
                            "t={t} V={volume:.0e} eps={eps}: generic {:.3e} {} rough {:.3e}",
                            d.bound.raw,
                            if ok { "<=" } else { ">" },
                            rough.raw
                        ));
                    }
                    Err(_) => lines.push(format!("t={t} V={volume:.0e} eps={eps}: unavailable (skipped)")),
                }
            }
        }
    }
    report("7b", all_ok, &lines.join("\n    "));
    assert!(all_ok);
}

// 7c. The single-molecule expectation bound dominates the empirical
//     disagreement fraction sup_t P(Y^V(t) != Y(t)) from 2000 coupled-seed
//     replications at V = 10^6.
#[test]
fn criterion_7c_expectation_bound_dominates() {
    let m = models::sis();
    let aug = aug_of(&m);
    let horizon = 10.0;
    let volume = 1e6;
    let eps = 0.005;
    let x0 = vec![990_000u64, 10_000u64];
    let sol = solve_fluid(&m.network, &m.init, horizon, 1e-3).unwrap();
    let table = build_limit_rates(&aug);
    let sim = SingleMoleculeSimulator::new(&table, &sol).unwrap();

    let grid: Vec<f64> = (0..=100).map(|i| horizon * i as f64 / 100.0).collect();
    let n_pairs = 2000u64;
    let disagree_counts: Vec<u64> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let yv = simulate_tracked_status(&aug, &x0, 0, volume, horizon, 73, i).unwrap();
            let mut rng = stream(73, i, moltrack::rng::PURPOSE_SINGLE);
            let y = sim.simulate(0, &mut rng).unwrap();
            let mut counts = vec![0u64; grid.len()];
            for (j, &t) in grid.iter().enumerate() {
                if yv.state_at(t) != y.state_at(t) {
                    counts[j] = 1;
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let empirical = disagree_counts
        .iter()
        .map(|&c| c as f64 / n_pairs as f64)
        .fold(0.0f64, f64::max);

    let detail = p_bound(&m.network, &sol, eps, horizon, volume, 1.0, 0.0).unwrap();
    let tracked = tracked_tube_quantities(&aug, &table, &sol, eps, horizon, volume).unwrap();
    let bound = single_molecule_bound(&detail.bound, &tracked, eps, sol.min_component()).unwrap();

    let pass = empirical <= bound.raw;
    report(
        "7c",
        pass,
        &format!("empirical sup disagreement {empirical:.4} <= bound {:.3e} (vacuous: {})", bound.raw, bound.vacuous),
    );
    assert!(pass);
}

// 8. Limit rate identities on the epidemic model (hazards k1 Z_I and k2 to
//    1e-12 relative error) and KS exponentiality of constant-rate holding
//    times at level 1e-3 on 10^4 samples.
#[test]
fn criterion_8_rate_identities_and_exponentiality() {
    let m = models::sis();
    let aug = aug_of(&m);
    let table = build_limit_rates(&aug);
    let sol = solve_fluid(&m.network, &m.init, 10.0, 1e-3).unwrap();
    let (k1, k2) = (1.0, 0.5);
    let mut max_rel: f64 = 0.0;
    for i in 0..=100 {
        let t = 10.0 * i as f64 / 100.0;
        let z = sol.eval(t);
        let h_s = table.hazard_at(Status::Alive(0), &z);
        let want_s = k1 * z[1];
        max_rel = max_rel.max((h_s - want_s).abs() / want_s.abs().max(1e-300));
        // The recovery transition fires at the constant rate k2.
        let rec: f64 = table
            .entries_from(1)
            .filter(|e| e.to == Status::Alive(0))
            .map(|e| e.rate.eval(&z))
            .sum();
        max_rel = max_rel.max((rec - k2).abs() / k2);
    }

    // Constant-hazard model: a single tracked status whose only transition is
    // degradation at rate k2; holding times must be Exp(k2).
    let text = "species: I S\nreaction: I -> S @ 0.5\nstatus: I~ = I initial\ntrack: 1 : I~ -> delta @ 1\ninit: I = 1 S = 0.01\n";
    let cm = moltrack::model::parse(text).unwrap();
    let caug = aug_of(&cm);
    let ctable = build_limit_rates(&caug);
    let csol = solve_fluid(&cm.network, &cm.init, 20.0, 1e-3).unwrap();
    let csim = SingleMoleculeSimulator::new(&ctable, &csol).unwrap();
    let n = 10_000usize;
    let paths = csim.simulate_batch(0, n, 81, 0).unwrap();
    let mut samples: Vec<f64> = paths
        .iter()
        .filter_map(|p| p.times().first().copied())
        .collect();
    let censored = n - samples.len();
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks = ks_statistic_against(&samples, |x| 1.0 - (-k2 * x).exp());
    // One-sample KS critical value at significance 1e-3.
    let alpha = 1e-3f64;
    let critical = ((2.0 / alpha).ln() / 2.0).sqrt() / (samples.len() as f64).sqrt();

    let pass = max_rel < 1e-12 && ks < critical && censored <= 2;
    report(
        "8",
        pass,
        &format!("max hazard rel-err {max_rel:.2e}; KS {ks:.4} < critical {critical:.4} ({censored} censored)"),
    );
    assert!(pass);
}

// 9. Bit-identical results under a fixed seed with 1 vs 8 worker threads for
//    every parallel pipeline.
#[test]
fn criterion_9_thread_count_reproducibility() {
    let m = models::sis();
    let aug = aug_of(&m);
    let sol = solve_fluid(&m.network, &m.init, 5.0, 1e-3).unwrap();
    let table = build_limit_rates(&aug);
    let x0 = vec![990u64, 10u64];

    let run_all = || {
        let sim = SingleMoleculeSimulator::new(&table, &sol).unwrap();
        let limit = sim.simulate_batch(0, 256, 91, 0).unwrap();
        let tracked: Vec<_> = (0..64u64)
            .into_par_iter()
            .map(|i| {
                let p = simulate_tracked(&aug, &x0, 0, 1000.0, 5.0, 92, i).unwrap();
                (p.species.times().to_vec(), p.status.times().to_vec())
            })
            .collect();
        let ens = build_aggregate(&aug, &table, &sol, &m.init, 500.0, 93, 0).unwrap();
        let agg = ens.trajectory(&[0.0, 1.0, 2.5, 5.0]);
        (limit, tracked, agg)
    };

    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let a = pool1.install(run_all);
    let b = pool8.install(run_all);
    let pass = a == b;
    report(
        "9",
        pass,
        &format!(
            "limit batch ({} paths), tracked batch (64), aggregate trajectory: identical = {pass}",
            a.0.len()
        ),
    );
    assert!(pass);
}
