//! Command-line front end: parse a model file, run one of the pipelines
//! (fluid / ssa / tracked / single / aggregate / bounds / functional), write
//! CSV outputs, and print a JSON summary to stdout.
//!
//! Exit codes: 0 success, 2 invalid input, 3 bound unavailable at these
//! parameters (eta <= 0 or the tube touches the boundary).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use moltrack::aggregate::{build_aggregate, check_subconservative};
use moltrack::bounds::{
    aggregate_bound, aggregate_quantities, p_bound, single_molecule_bound,
    tracked_tube_quantities, BoundError,
};
use moltrack::fluid::{solve_fluid, FluidSolution};
use moltrack::model::{parse, Model};
use moltrack::models;
use moltrack::network::{build_augmented, AugmentedNetwork, Status};
use moltrack::paths::{count_transitions, distance, occupation_time, survival_curve, EmpiricalDistribution};
use moltrack::rng::{stream, PURPOSE_EVENTS};
use moltrack::singlemol::{build_limit_rates, SingleMoleculeSimulator};
use moltrack::ssa::{scaled_initial_state, simulate_ssa, simulate_tracked, JumpPath, TrackedPath};

#[derive(Parser)]
#[command(name = "moltrack", about = "Single-molecule tracking in stochastic reaction networks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Model file path, or the name of a bundled model
    /// (si, sis, sis_migration, autophos, mm_full, mm_futile).
    model: String,
    /// Master seed for all random streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = library default).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Directory for CSV outputs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Time horizon.
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Integrator step for the deterministic trajectory.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file: network structure, status schema, sub-conservation.
    Validate { model: String },
    /// Integrate the deterministic (fluid) trajectory.
    Fluid {
        #[command(flatten)]
        common: Common,
        /// Output grid resolution.
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Exact stochastic simulation of the species counts.
    Ssa {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        volume: f64,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// How many individual paths to export as CSV.
        #[arg(long, default_value_t = 3)]
        export_paths: usize,
    },
    /// Coupled simulation of a tracked molecule and the species counts.
    Tracked {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        volume: f64,
        /// Initial status name (default: the initial status of the first
        /// tracked species).
        #[arg(long)]
        status: Option<String>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 3)]
        export_paths: usize,
    },
    /// Simulate the limit single-molecule process along the fluid trajectory.
    Single {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        status: Option<String>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Aggregate approximation: many independent limit paths, alpha-weighted.
    Aggregate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        volume: f64,
        /// Independent ensemble replications.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Evaluate the deviation bounds and emit a JSON report.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        volume: f64,
        /// Tube radius.
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Initial-condition deviation probability.
        #[arg(long, default_value_t = 0.0)]
        p0: f64,
        #[arg(long, default_value_t = 0.1)]
        nu1: f64,
        #[arg(long, default_value_t = 0.1)]
        nu2: f64,
        #[arg(long, default_value_t = 0.0)]
        nu3: f64,
    },
    /// Compare a path functional between tracked SSA and the limit process.
    Functional {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        volume: f64,
        /// transitions <from> <to>, or occupation <status,...>.
        #[arg(long, value_parser = ["transitions", "occupation"])]
        kind: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        /// Comma-separated status names for occupation time.
        #[arg(long)]
        statuses: Option<String>,
        /// Initial status.
        #[arg(long)]
        status: Option<String>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    BoundUnavailable(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::VolumeTooSmall { .. } | BoundError::BoundaryTouched { .. } => {
                CliError::BoundUnavailable(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

fn invalid<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Invalid(e.to_string())
}

fn load_model(spec: &str) -> Result<Model, CliError> {
    if Path::new(spec).exists() {
        let text = fs::read_to_string(spec)?;
        return parse(&text).map_err(invalid);
    }
    models::by_name(spec)
        .ok_or_else(|| CliError::Invalid(format!("`{spec}` is neither a file nor a bundled model")))
}

fn require_schema(m: &Model) -> Result<AugmentedNetwork, CliError> {
    let schema = m
        .schema
        .as_ref()
        .ok_or_else(|| CliError::Invalid("model has no tracking statuses".into()))?;
    build_augmented(&m.network, schema).map_err(invalid)
}

fn resolve_status(aug: &AugmentedNetwork, name: Option<&str>) -> Result<usize, CliError> {
    let schema = aug.schema();
    match name {
        Some(n) => schema
            .status_index(n)
            .ok_or_else(|| CliError::Invalid(format!("unknown status `{n}`"))),
        None => {
            let s = *schema
                .tracked_species(aug.base().dim())
                .first()
                .ok_or_else(|| CliError::Invalid("no tracked species".into()))?;
            Ok(schema.initial_status_for(s).unwrap())
        }
    }
}

fn setup_threads(threads: usize) -> Result<(), CliError> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    Ok(())
}

fn fluid_for(m: &Model, common: &Common) -> Result<FluidSolution, CliError> {
    solve_fluid(&m.network, &m.init, common.horizon, common.step).map_err(invalid)
}

fn time_grid(horizon: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect()
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{row}")?;
    }
    Ok(())
}

fn species_header(m: &Model) -> String {
    let mut h = "t".to_string();
    for s in m.network.species() {
        h.push(',');
        h.push_str(s);
    }
    h
}

fn export_species_path(
    path: &Path,
    m: &Model,
    p: &JumpPath<Vec<u64>>,
) -> Result<(), CliError> {
    let fmt = |t: f64, x: &[u64]| {
        let mut row = format!("{t}");
        for v in x {
            row.push_str(&format!(",{v}"));
        }
        row
    };
    let rows = std::iter::once(fmt(0.0, p.initial()))
        .chain(p.times().iter().zip(p.states()).map(|(&t, x)| fmt(t, x)))
        .chain(std::iter::once(fmt(p.horizon(), p.final_state())));
    write_csv(path, &species_header(m), rows)
}

fn export_tracked_path(
    path: &Path,
    m: &Model,
    aug: &AugmentedNetwork,
    p: &TrackedPath,
) -> Result<(), CliError> {
    let name = |s: Status| aug.schema().status_name(s);
    let fmt = |t: f64, x: &[u64], st: Status| {
        let mut row = format!("{t}");
        for v in x {
            row.push_str(&format!(",{v}"));
        }
        row.push(',');
        row.push_str(&name(st));
        row
    };
    let header = format!("{},status", species_header(m));
    let rows = std::iter::once(fmt(0.0, p.species.initial(), *p.status.initial()))
        .chain(p.species.times().iter().zip(p.species.states()).map(|(&t, x)| {
            fmt(t, x, *p.status.state_at(t))
        }))
        .chain(std::iter::once(fmt(
            p.species.horizon(),
            p.species.final_state(),
            *p.status.final_state(),
        )));
    write_csv(path, &header, rows)
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let started = Instant::now();
    let mut out = match cli.command {
        Command::Validate { model } => {
            let m = load_model(&model)?;
            let network_violations: Vec<String> =
                m.network.validate().iter().map(|v| v.to_string()).collect();
            let (schema_violations, subcons): (Vec<String>, Vec<(usize, String)>) = match &m.schema {
                Some(schema) => {
                    let sv: Vec<String> =
                        schema.validate(&m.network).iter().map(|v| v.to_string()).collect();
                    let sc = if sv.is_empty() {
                        check_subconservative(&m.network, schema)
                            .into_iter()
                            .map(|(r, tau)| (r, schema.statuses()[tau].clone()))
                            .collect()
                    } else {
                        Vec::new()
                    };
                    (sv, sc)
                }
                None => (Vec::new(), Vec::new()),
            };
            let valid = network_violations.is_empty() && schema_violations.is_empty();
            let report = json!({
                "mode": "validate",
                "valid": valid,
                "network_violations": network_violations,
                "schema_violations": schema_violations,
                "subconservation_violations": subcons,
                "species": m.network.species(),
                "reactions": m.network.reactions().len(),
            });
            if !valid {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
                return Err(CliError::Invalid("model failed validation".into()));
            }
            report
        }
        Command::Fluid { common, points } => {
            setup_threads(common.threads)?;
            let m = load_model(&common.model)?;
            let sol = fluid_for(&m, &common)?;
            let grid = time_grid(common.horizon, points);
            write_csv(
                &common.out_dir.join("fluid.csv"),
                &species_header(&m),
                grid.iter().map(|&t| {
                    let z = sol.eval(t);
                    let mut row = format!("{t}");
                    for v in z {
                        row.push_str(&format!(",{v}"));
                    }
                    row
                }),
            )?;
            json!({
                "mode": "fluid",
                "min_component": sol.min_component(),
                "final": sol.eval(common.horizon),
                "out": common.out_dir.join("fluid.csv"),
            })
        }
        Command::Ssa {
            common,
            volume,
            reps,
            export_paths,
        } => {
            setup_threads(common.threads)?;
            let m = load_model(&common.model)?;
            let x0 = scaled_initial_state(&m.init, volume);
            use rayon::prelude::*;
            let paths: Result<Vec<_>, _> = (0..reps)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(common.seed, i as u64, PURPOSE_EVENTS);
                    simulate_ssa(&m.network, &x0, volume, common.horizon, &mut rng)
                })
                .collect();
            let paths = paths.map_err(invalid)?;
            for (i, p) in paths.iter().take(export_paths).enumerate() {
                export_species_path(&common.out_dir.join(format!("ssa_path_{i:03}.csv")), &m, p)?;
            }
            let mean_final: Vec<f64> = (0..m.network.dim())
                .map(|s| {
                    paths.iter().map(|p| p.final_state()[s] as f64).sum::<f64>()
                        / (reps as f64 * volume)
                })
                .collect();
            json!({
                "mode": "ssa",
                "reps": reps,
                "volume": volume,
                "mean_final_concentration": mean_final,
                "mean_jumps": paths.iter().map(|p| p.n_jumps()).sum::<usize>() as f64 / reps as f64,
            })
        }
        Command::Tracked {
            common,
            volume,
            status,
            reps,
            export_paths,
        } => {
            setup_threads(common.threads)?;
            let m = load_model(&common.model)?;
            let aug = require_schema(&m)?;
            let tau0 = resolve_status(&aug, status.as_deref())?;
            let x0 = scaled_initial_state(&m.init, volume);
            use rayon::prelude::*;
            let paths: Result<Vec<_>, _> = (0..reps)
                .into_par_iter()
                .map(|i| {
                    simulate_tracked(&aug, &x0, tau0, volume, common.horizon, common.seed, i as u64)
                })
                .collect();
            let paths = paths.map_err(invalid)?;
            for (i, p) in paths.iter().take(export_paths).enumerate() {
                export_tracked_path(
                    &common.out_dir.join(format!("tracked_path_{i:03}.csv")),
                    &m,
                    &aug,
                    p,
                )?;
            }
            let mut final_statuses = std::collections::BTreeMap::new();
            for p in &paths {
                *final_statuses
                    .entry(aug.schema().status_name(*p.status.final_state()))
                    .or_insert(0u64) += 1;
            }
            json!({
                "mode": "tracked",
                "reps": reps,
                "volume": volume,
                "initial_status": aug.schema().statuses()[tau0],
                "final_status_counts": final_statuses,
            })
        }
        Command::Single {
            common,
            status,
            reps,
            points,
        } => {
            setup_threads(common.threads)?;
            let m = load_model(&common.model)?;
            let aug = require_schema(&m)?;
            let tau0 = resolve_status(&aug, status.as_deref())?;
            let sol = fluid_for(&m, &common)?;
            let table = build_limit_rates(&aug);
            let sim = SingleMoleculeSimulator::new(&table, &sol).map_err(invalid)?;
            let paths = sim.simulate_batch(tau0, reps, common.seed, 0).map_err(invalid)?;
            let grid = time_grid(common.horizon, points);
            let curve =
                survival_curve(&paths, Status::Alive(tau0), &grid).map_err(invalid)?;
            write_csv(
                &common.out_dir.join("survival.csv"),
                "t,surviving_fraction",
                grid.iter().zip(&curve).map(|(t, f)| format!("{t},{f}")),
            )?;
            json!({
                "mode": "single",
                "reps": reps,
                "initial_status": aug.schema().statuses()[tau0],
                "mean_jumps": paths.iter().map(|p| p.n_jumps()).sum::<usize>() as f64 / reps as f64,
                "out": common.out_dir.join("survival.csv"),
            })
        }
        Command::Aggregate {
            common,
            volume,
            runs,
            points,
        } => {
            setup_threads(common.threads)?;
            let m = load_model(&common.model)?;
            let aug = require_schema(&m)?;
            let sol = fluid_for(&m, &common)?;
            let table = build_limit_rates(&aug);
            let grid = time_grid(common.horizon, points);
            let dim = m.network.dim();
            let mut mean = vec![vec![0.0; dim]; grid.len()];
            let mut n_paths = 0usize;
            for run in 0..runs {
                let ens = build_aggregate(
                    &aug,
                    &table,
                    &sol,
                    &m.init,
                    volume,
                    common.seed,
                    (run * 1_000_000) as u64,
                )
                .map_err(invalid)?;
                n_paths = ens.n_paths();
                let traj = ens.trajectory(&grid);
                write_csv(
                    &common.out_dir.join(format!("aggregate_run_{run:03}.csv")),
                    &species_header(&m),
                    grid.iter().zip(&traj).map(|(t, z)| {
                        let mut row = format!("{t}");
                        for v in z {
                            row.push_str(&format!(",{v}"));
                        }
                        row
                    }),
                )?;
                for (acc, z) in mean.iter_mut().zip(&traj) {
                    for (a, v) in acc.iter_mut().zip(z) {
                        *a += v / runs as f64;
                    }
                }
            }
            write_csv(
                &common.out_dir.join("aggregate_mean.csv"),
                &species_header(&m),
                grid.iter().zip(&mean).map(|(t, z)| {
                    let mut row = format!("{t}");
                    for v in z {
                        row.push_str(&format!(",{v}"));
                    }
                    row
                }),
            )?;
            json!({
                "mode": "aggregate",
                "runs": runs,
                "paths_per_run": n_paths,
                "volume": volume,
            })
        }
        Command::Bounds {
            common,
            volume,
            epsilon,
            gamma,
            p0,
            nu1,
            nu2,
            nu3,
        } => {
            setup_threads(common.threads)?;
            let m = load_model(&common.model)?;
            let sol = fluid_for(&m, &common)?;
            let detail = p_bound(&m.network, &sol, epsilon, common.horizon, volume, gamma, p0)?;
            let mut report = json!({
                "mode": "bounds",
                "tube_exit": detail,
            });
            if let Some(schema) = &m.schema {
                let aug = build_augmented(&m.network, schema).map_err(invalid)?;
                let table = build_limit_rates(&aug);
                let tracked =
                    tracked_tube_quantities(&aug, &table, &sol, epsilon, common.horizon, volume)?;
                let single =
                    single_molecule_bound(&detail.bound, &tracked, epsilon, sol.min_component())?;
                report["tracked_tube"] = serde_json::to_value(&tracked).unwrap();
                report["single_molecule_bound"] = serde_json::to_value(single).unwrap();
                if check_subconservative(&m.network, schema).is_empty() {
                    let q = aggregate_quantities(
                        &aug,
                        &table,
                        &sol,
                        &m.init,
                        epsilon,
                        common.horizon,
                        volume,
                    )?;
                    let (nu, agg) = aggregate_bound(
                        &q,
                        &detail.bound,
                        detail.at_2eps.delta1,
                        volume,
                        nu1,
                        nu2,
                        nu3,
                        p0,
                    );
                    report["aggregate_quantities"] = serde_json::to_value(q).unwrap();
                    report["aggregate_bound"] =
                        json!({ "nu": nu, "bound": serde_json::to_value(agg).unwrap() });
                }
            }
            report
        }
        Command::Functional {
            common,
            volume,
            kind,
            from,
            to,
            statuses,
            status,
            reps,
        } => {
            setup_threads(common.threads)?;
            let m = load_model(&common.model)?;
            let aug = require_schema(&m)?;
            let tau0 = resolve_status(&aug, status.as_deref())?;
            let sol = fluid_for(&m, &common)?;
            let table = build_limit_rates(&aug);
            let sim = SingleMoleculeSimulator::new(&table, &sol).map_err(invalid)?;
            let x0 = scaled_initial_state(&m.init, volume);
            use rayon::prelude::*;
            let ssa_paths: Result<Vec<_>, _> = (0..reps)
                .into_par_iter()
                .map(|i| {
                    simulate_tracked(&aug, &x0, tau0, volume, common.horizon, common.seed, i as u64)
                        .map(|p| p.status)
                })
                .collect();
            let ssa_paths = ssa_paths.map_err(invalid)?;
            let limit_paths = sim.simulate_batch(tau0, reps, common.seed, 0).map_err(invalid)?;
            let parse_status = |n: &str| -> Result<Status, CliError> {
                if n == "delta" {
                    Ok(Status::Cemetery)
                } else {
                    aug.schema()
                        .status_index(n)
                        .map(Status::Alive)
                        .ok_or_else(|| CliError::Invalid(format!("unknown status `{n}`")))
                }
            };
            let (dist_ssa, dist_limit, value_header): (EmpiricalDistribution, EmpiricalDistribution, &str) =
                match kind.as_str() {
                    "transitions" => {
                        let f = parse_status(
                            from.as_deref()
                                .ok_or_else(|| CliError::Invalid("--from required".into()))?,
                        )?;
                        let t = parse_status(
                            to.as_deref()
                                .ok_or_else(|| CliError::Invalid("--to required".into()))?,
                        )?;
                        (
                            EmpiricalDistribution::from_counts(
                                ssa_paths.iter().map(|p| count_transitions(p, f, t)),
                            ),
                            EmpiricalDistribution::from_counts(
                                limit_paths.iter().map(|p| count_transitions(p, f, t)),
                            ),
                            "value",
                        )
                    }
                    "occupation" => {
                        let set: Vec<Status> = statuses
                            .as_deref()
                            .ok_or_else(|| CliError::Invalid("--statuses required".into()))?
                            .split(',')
                            .map(parse_status)
                            .collect::<Result<_, _>>()?;
                        let occ = |p: &JumpPath<Status>| {
                            occupation_time(p, &set, common.horizon).map_err(invalid)
                        };
                        (
                            EmpiricalDistribution::from_samples(
                                ssa_paths.iter().map(occ).collect::<Result<_, _>>()?,
                            ),
                            EmpiricalDistribution::from_samples(
                                limit_paths.iter().map(occ).collect::<Result<_, _>>()?,
                            ),
                            "time",
                        )
                    }
                    other => return Err(CliError::Invalid(format!("unknown kind `{other}`"))),
                };
            for (name, d) in [("functional_ssa.csv", &dist_ssa), ("functional_limit.csv", &dist_limit)] {
                match d {
                    EmpiricalDistribution::Discrete(map) => write_csv(
                        &common.out_dir.join(name),
                        &format!("{value_header},n"),
                        map.iter().map(|(v, c)| format!("{v},{c}")),
                    )?,
                    EmpiricalDistribution::Continuous(samples) => write_csv(
                        &common.out_dir.join(name),
                        value_header,
                        samples.iter().map(|v| format!("{v}")),
                    )?,
                }
            }
            let d = distance(&dist_ssa, &dist_limit).map_err(invalid)?;
            json!({
                "mode": "functional",
                "kind": kind,
                "reps": reps,
                "distance": d,
            })
        }
    };
    out["runtime_sec"] = json!(started.elapsed().as_secs_f64());
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            ExitCode::SUCCESS
        }
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::BoundUnavailable(msg)) => {
            eprintln!("error: bound unavailable: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!("io error: {e}");
            ExitCode::FAILURE
        }
    }
}
