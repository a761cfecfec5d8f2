//! Deterministic (fluid) trajectories of a reaction network.
//!
//! Fixed-step RK4 with stored derivatives for cubic Hermite dense output.
//! A fixed grid (rather than adaptive stepping) keeps downstream consumers —
//! rate majorants and tube suprema — deterministic and reproducible.

use thiserror::Error;

use crate::network::ReactionNetwork;

/// Default integration step as a fraction of the horizon.
pub const DEFAULT_STEPS: usize = 10_000;
/// Components may undershoot zero by at most this much before we refuse.
pub const ORTHANT_TOL: f64 = 1e-12;
/// Step-halving agreement required from the integrator.
pub const STEP_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FluidError {
    #[error("step too large: solutions at h and h/2 differ by {diff:e} (> {tol:e})")]
    StepTooLarge { diff: f64, tol: f64 },
    #[error("solution left the non-negative orthant: component {species} = {value} at t = {t}")]
    LeftOrthant { species: usize, value: f64, t: f64 },
    #[error("invalid input: {0}")]
    BadInput(String),
}

/// Dense-output solution on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct FluidSolution {
    grid: Vec<f64>,
    values: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    min_component: f64,
    horizon: f64,
}

fn rk4_step(net: &ReactionNetwork, z: &[f64], h: f64, out: &mut Vec<f64>) {
    let d = z.len();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    net.drift(z, &mut k1);
    for i in 0..d {
        tmp[i] = z[i] + 0.5 * h * k1[i];
    }
    net.drift(&tmp, &mut k2);
    for i in 0..d {
        tmp[i] = z[i] + 0.5 * h * k2[i];
    }
    net.drift(&tmp, &mut k3);
    for i in 0..d {
        tmp[i] = z[i] + h * k3[i];
    }
    net.drift(&tmp, &mut k4);
    out.clear();
    out.extend(
        (0..d).map(|i| z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])),
    );
}

fn integrate(
    net: &ReactionNetwork,
    z0: &[f64],
    horizon: f64,
    n_steps: usize,
) -> Result<Vec<Vec<f64>>, FluidError> {
    let h = horizon / n_steps as f64;
    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(z0.to_vec());
    let mut next = Vec::new();
    for step in 0..n_steps {
        rk4_step(net, values.last().unwrap(), h, &mut next);
        for (s, v) in next.iter_mut().enumerate() {
            if *v < -ORTHANT_TOL {
                return Err(FluidError::LeftOrthant {
                    species: s,
                    value: *v,
                    t: (step + 1) as f64 * h,
                });
            }
            if *v < 0.0 {
                *v = 0.0; // machine-precision undershoot near the boundary
            }
        }
        values.push(next.clone());
    }
    Ok(values)
}

/// Integrates the reaction ODE from `z0` over `[0, horizon]` with fixed step
/// `step`. The result is validated by re-integrating at half the step and
/// comparing on the shared grid.
pub fn solve_fluid(
    net: &ReactionNetwork,
    z0: &[f64],
    horizon: f64,
    step: f64,
) -> Result<FluidSolution, FluidError> {
    if z0.len() != net.dim() {
        return Err(FluidError::BadInput(format!(
            "initial condition has dimension {}, network has {}",
            z0.len(),
            net.dim()
        )));
    }
    if z0.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(FluidError::BadInput(
            "initial condition must be non-negative and finite".into(),
        ));
    }
    if horizon < 0.0 || !(step > 0.0) {
        return Err(FluidError::BadInput("need horizon >= 0 and step > 0".into()));
    }
    if horizon == 0.0 {
        let mut deriv = vec![0.0; net.dim()];
        net.drift(z0, &mut deriv);
        let min_component = z0.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok(FluidSolution {
            grid: vec![0.0],
            values: vec![z0.to_vec()],
            derivs: vec![deriv],
            min_component,
            horizon: 0.0,
        });
    }
    let n_steps = (horizon / step).round().max(1.0) as usize;
    let values = integrate(net, z0, horizon, n_steps)?;
    let fine = integrate(net, z0, horizon, 2 * n_steps)?;
    let mut diff: f64 = 0.0;
    for (i, v) in values.iter().enumerate() {
        for (a, b) in v.iter().zip(&fine[2 * i]) {
            diff = diff.max((a - b).abs());
        }
    }
    if diff > STEP_CHECK_TOL {
        return Err(FluidError::StepTooLarge {
            diff,
            tol: STEP_CHECK_TOL,
        });
    }

    let h = horizon / n_steps as f64;
    let grid: Vec<f64> = (0..=n_steps).map(|i| i as f64 * h).collect();
    let mut derivs = Vec::with_capacity(values.len());
    let mut d = vec![0.0; net.dim()];
    for v in &values {
        net.drift(v, &mut d);
        derivs.push(d.clone());
    }
    let mut sol = FluidSolution {
        grid,
        values,
        derivs,
        min_component: f64::INFINITY,
        horizon,
    };
    // Certify the minimum on a 10x refinement of the interpolant.
    let mut m = f64::INFINITY;
    let mut buf = vec![0.0; net.dim()];
    for i in 0..n_steps {
        for j in 0..10 {
            let t = sol.grid[i] + h * j as f64 / 10.0;
            sol.eval_into(t, &mut buf);
            for &v in &buf {
                m = m.min(v);
            }
        }
    }
    for &v in sol.values.last().unwrap() {
        m = m.min(v);
    }
    sol.min_component = m;
    Ok(sol)
}

impl FluidSolution {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn derivs(&self) -> &[Vec<f64>] {
        &self.derivs
    }

    /// Minimum of any component over the (refined) grid; strictly positive
    /// for mass-action systems started in the interior.
    pub fn min_component(&self) -> f64 {
        self.min_component
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Index of the grid cell containing `t` (clamped to the last cell).
    fn cell(&self, t: f64) -> usize {
        let n = self.grid.len();
        match self
            .grid
            .binary_search_by(|g| g.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Hermite interpolation; exact at grid points.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        assert!(
            (0.0..=self.horizon + 1e-12).contains(&t),
            "time {t} outside [0, {}]",
            self.horizon
        );
        if self.grid.len() == 1 {
            out.copy_from_slice(&self.values[0]);
            return;
        }
        let i = self.cell(t);
        let h = self.grid[i + 1] - self.grid[i];
        let s = ((t - self.grid[i]) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for k in 0..out.len() {
            out[k] = h00 * self.values[i][k]
                + h10 * h * self.derivs[i][k]
                + h01 * self.values[i + 1][k]
                + h11 * h * self.derivs[i + 1][k];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }
}

/// Closed-form surviving-susceptible fraction of the SI model with infection
/// rate constant `beta` and initial infected fraction `rho` (susceptible
/// fraction normalized to 1).
pub fn si_survival(beta: f64, rho: f64, t: f64) -> f64 {
    (1.0 + rho) / (1.0 + rho * (beta * (1.0 + rho) * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn si_matches_closed_form() {
        let m = models::si();
        let sol = solve_fluid(&m.network, &[1.0, 0.01], 10.0, 1e-3).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let t = 10.0 * i as f64 / 1000.0;
            let z = sol.eval(t);
            worst = worst.max((z[0] - si_survival(1.0, 0.01, t)).abs());
        }
        assert!(worst < 1e-6, "sup-norm error {worst}");
    }

    #[test]
    fn zero_horizon_is_a_single_point() {
        let m = models::sis();
        let sol = solve_fluid(&m.network, &[0.4, 0.6], 0.0, 1e-3).unwrap();
        assert_eq!(sol.grid(), &[0.0]);
        assert_eq!(sol.eval(0.0), vec![0.4, 0.6]);
    }

    #[test]
    fn sis_conserves_total_population() {
        let m = models::sis();
        let sol = solve_fluid(&m.network, &m.init, 10.0, 1e-3).unwrap();
        for i in 0..=100 {
            let z = sol.eval(10.0 * i as f64 / 100.0);
            assert!((z[0] + z[1] - 1.0).abs() < 1e-10);
        }
        let z = sol.eval(5.0);
        assert!((z[0] + z[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eval_reproduces_grid_points_exactly() {
        let m = models::mm_futile();
        let sol = solve_fluid(&m.network, &m.init, 5.0, 1e-3).unwrap();
        for i in [0, 1, 17, 2500, 5000] {
            let t = sol.grid()[i];
            assert_eq!(sol.eval(t), sol.values()[i]);
        }
        assert_eq!(sol.eval(5.0), *sol.values().last().unwrap());
    }

    #[test]
    fn step_halving_is_order_four() {
        for m in models::all() {
            let init: Vec<f64> = m
                .init
                .iter()
                .map(|&v| if v > 0.0 { v } else { 0.1 })
                .collect();
            let h = 0.01;
            let a = integrate(&m.network, &init, 2.0, (2.0 / h) as usize).unwrap();
            let b = integrate(&m.network, &init, 2.0, 2 * (2.0 / h) as usize).unwrap();
            let c = integrate(&m.network, &init, 2.0, 4 * (2.0 / h) as usize).unwrap();
            let mut d_ab: f64 = 0.0;
            let mut d_bc: f64 = 0.0;
            for i in 0..a.len() {
                for k in 0..a[i].len() {
                    d_ab = d_ab.max((a[i][k] - b[2 * i][k]).abs());
                    d_bc = d_bc.max((b[2 * i][k] - c[4 * i][k]).abs());
                }
            }
            // Order-4 convergence: halving the step shrinks the error ~16x.
            // Allow slack for error-constant variation between cells.
            assert!(
                d_ab <= 16.0 * d_bc * 1.5 + 1e-15,
                "h-diff {d_ab}, h/2-diff {d_bc}"
            );
        }
    }

    #[test]
    fn positive_start_stays_positive() {
        for m in models::all() {
            let init: Vec<f64> = m
                .init
                .iter()
                .map(|&v| if v > 0.0 { v } else { 0.1 })
                .collect();
            let sol = solve_fluid(&m.network, &init, 10.0, 1e-3).unwrap();
            assert!(sol.min_component() > 0.0);
        }
    }

    #[test]
    fn conservation_laws_hold_along_solutions() {
        // Any w orthogonal to all stoichiometric vectors gives a conserved
        // linear functional.
        let cases: Vec<(crate::model::Model, Vec<f64>)> = vec![
            (models::sis(), vec![1.0, 1.0]),
            // E + C and S + C + P totals for the futile Michaelis-Menten.
            (models::mm_futile(), vec![1.0, 0.0, 1.0, 0.0]),
            (models::mm_futile(), vec![0.0, 1.0, 1.0, 1.0]),
        ];
        for (m, w) in cases {
            for r in m.network.reactions() {
                let st = r.stoichiometry(m.network.dim());
                let dot: f64 = w.iter().zip(&st).map(|(a, &b)| a * b as f64).sum();
                assert_eq!(dot, 0.0, "w is not a conservation law of the test model");
            }
            let sol = solve_fluid(&m.network, &m.init, 10.0, 1e-3).unwrap();
            let c0: f64 = w.iter().zip(&m.init).map(|(a, b)| a * b).sum();
            for i in 0..=200 {
                let z = sol.eval(10.0 * i as f64 / 200.0);
                let c: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
                assert!((c - c0).abs() < 1e-8);
            }
        }
    }
}
