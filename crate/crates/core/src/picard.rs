//! Successive-approximation (Picard) scheme on a fixed uniform grid.
//!
//! Each iterate solves the integral form of the system with the right-hand
//! side frozen at the previous iterate, so one step is pure quadrature, not
//! an ODE solve. The sup-norm distances between consecutive iterates decay
//! factorially; the contraction report fits the constant of that bound and
//! verifies it over the produced range.

use thiserror::Error;

use crate::core_types::{DataError, InitialData, ReducedState};
use crate::evolution::reduced_rhs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PicardError {
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error("iterate length {values} does not match grid length {times}")]
    GridMismatch { times: usize, values: usize },
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("need at least 3 iterations, got {0}")]
    TooFewIterations(usize),
    #[error("scheme diverged at iterate {n}: distance {beta} vs initial {beta2}")]
    Divergence { n: usize, beta: f64, beta2: f64 },
    #[error("lower-bound check needs psi0 > 0, got {0}")]
    NonPositivePsi0(f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Shared uniform time grid with the iterate values produced so far.
/// Iterate 0 is the constant function equal to the initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateGrid {
    pub times: Vec<f64>,
    pub iterates: Vec<Vec<ReducedState>>,
}

/// Sup-norm distances between consecutive iterates and the fitted factorial
/// bound. `betas[0]` is the distance indexed `n = 2` between iterates 3 and 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub betas: Vec<f64>,
    pub fitted_c2: f64,
    pub factorial_bound_ok: bool,
}

/// Factorial decay bound `beta2 * (c2 * zeta)^{n-2} / (n-2)!` for `n >= 2`.
pub fn factorial_bound(beta2: f64, c2: f64, zeta: f64, n: usize) -> f64 {
    assert!(n >= 2);
    let mut bound = beta2;
    for m in 0..(n - 2) {
        bound *= c2 * zeta / (m + 1) as f64;
    }
    bound
}

// Cumulative quadrature on a uniform grid, exact for quadratics: the running
// integral advances by the integral of the parabola through three
// neighbouring samples.
fn cumulative_simpson(h: f64, f: &[f64]) -> Vec<f64> {
    let n = f.len();
    debug_assert!(n >= 3);
    let mut integral = vec![0.0; n];
    integral[1] = h * (5.0 * f[0] + 8.0 * f[1] - f[2]) / 12.0;
    for k in 2..n {
        integral[k] = integral[k - 1] + h * (-f[k - 2] + 8.0 * f[k - 1] + 5.0 * f[k]) / 12.0;
    }
    integral
}

/// One scheme step: integrates the right-hand side of the previous iterate
/// from the shared initial state.
pub fn picard_step(
    times: &[f64],
    prev: &[ReducedState],
    s0: &ReducedState,
    lambda: f64,
) -> Result<Vec<ReducedState>, PicardError> {
    if times.len() < 3 {
        return Err(PicardError::GridTooSmall(times.len()));
    }
    if prev.len() != times.len() {
        return Err(PicardError::GridMismatch { times: times.len(), values: prev.len() });
    }
    let h = times[1] - times[0];
    let rates: Vec<[f64; 5]> = prev.iter().map(|s| reduced_rhs(s, lambda)).collect();

    let mut next = vec![*s0; times.len()];
    for c in 0..5 {
        let component: Vec<f64> = rates.iter().map(|r| r[c]).collect();
        let integral = cumulative_simpson(h, &component);
        let base = s0.components()[c];
        for (k, value) in integral.iter().enumerate() {
            let mut fields = next[k].components();
            fields[c] = base + value;
            next[k] = ReducedState::from_components(fields);
        }
    }
    Ok(next)
}

/// Runs the scheme from the given data on `[0, horizon]` until the sup-norm
/// distance between consecutive iterates falls below `beta_tol` or `n_max`
/// iterates were produced. Returns all iterates and the contraction report.
pub fn run_scheme(
    data: &InitialData,
    horizon: f64,
    n_max: usize,
    grid_points: usize,
    beta_tol: f64,
) -> Result<(IterateGrid, ContractionReport), PicardError> {
    data.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(PicardError::BadHorizon(horizon));
    }
    if grid_points < 3 {
        return Err(PicardError::GridTooSmall(grid_points));
    }
    if n_max < 3 {
        return Err(PicardError::TooFewIterations(n_max));
    }
    let s0 = ReducedState::from_initial_data(data);
    let dt = horizon / (grid_points - 1) as f64;
    let times: Vec<f64> = (0..grid_points).map(|k| k as f64 * dt).collect();

    let mut iterates = vec![vec![s0; grid_points]];
    let mut betas = Vec::new();
    loop {
        let next = picard_step(&times, iterates.last().unwrap(), &s0, data.lambda)?;
        let produced = iterates.len(); // index of `next`
        if produced >= 3 {
            let n = produced - 1; // distance between iterates n+1 and n
            let beta = sup_distance(&next, &iterates[produced - 1]);
            betas.push(beta);
            let beta2 = betas[0];
            if beta2 > 0.0 && beta > 1e6 * beta2 {
                return Err(PicardError::Divergence { n, beta, beta2 });
            }
            iterates.push(next);
            if beta < beta_tol || produced + 1 > n_max {
                break;
            }
        } else {
            iterates.push(next);
        }
    }

    let report = contraction_report(&betas, horizon);
    Ok((IterateGrid { times, iterates }, report))
}

fn sup_distance(a: &[ReducedState], b: &[ReducedState]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let xc = x.components();
            let yc = y.components();
            (0..5).map(|i| (xc[i] - yc[i]).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn contraction_report(betas: &[f64], zeta: f64) -> ContractionReport {
    // Fit the contraction constant from consecutive ratios:
    // beta_{n+1} / beta_n <= c2 * zeta / (n - 1).
    let mut fitted_c2 = 0.0f64;
    for (i, pair) in betas.windows(2).enumerate() {
        let n = i + 2;
        if pair[0] > 0.0 {
            fitted_c2 = fitted_c2.max(pair[1] / pair[0] * (n - 1) as f64 / zeta);
        }
    }
    let beta2 = betas.first().copied().unwrap_or(0.0);
    let factorial_bound_ok = betas.iter().enumerate().all(|(i, beta)| {
        let bound = factorial_bound(beta2, fitted_c2, zeta, i + 2);
        *beta <= bound * (1.0 + 1e-9) + 1e-300
    });
    ContractionReport { betas: betas.to_vec(), fitted_c2, factorial_bound_ok }
}

/// Checks the scheme's lower bound on the scalar sector: every iterate keeps
/// `ψ ≥ ψ₀/2` up to the time `ψ₀ / (2C)`, where `C` is the largest magnitude
/// of the iterated ψ-equation right-hand side seen across iterates.
pub fn psi_lower_bound_check(grid: &IterateGrid, data: &InitialData) -> Result<bool, PicardError> {
    let psi0 = data.psi0();
    if !(psi0 > 0.0) {
        return Err(PicardError::NonPositivePsi0(psi0));
    }
    let mut c = 0.0f64;
    for iterate in &grid.iterates {
        for s in iterate {
            c = c.max((2.0 * (s.u + 2.0 * s.v) * s.psi).abs());
        }
    }
    let t_limit = if c == 0.0 { f64::INFINITY } else { psi0 / (2.0 * c) };
    let floor = psi0 / 2.0 * (1.0 - 1e-12);
    for iterate in &grid.iterates {
        for (t, s) in grid.times.iter().zip(iterate) {
            if *t <= t_limit && s.psi < floor {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Horizon for which the iterates stay inside the unit box around the data:
/// bounds the right-hand side over `{|S - S0|_inf <= 1}` component-wise and
/// returns half the reciprocal of the largest bound.
pub fn pick_horizon(data: &InitialData) -> f64 {
    let s0 = ReducedState::from_initial_data(data);
    let mu = s0.u.abs() + 1.0;
    let mv = s0.v.abs() + 1.0;
    let mrho = s0.rho.abs() + 1.0;
    let mpsi = s0.psi + 1.0;
    let lam = 2.0 / 3.0 * data.lambda.abs();
    let scalar_pull = crate::EIGHT_PI / 3.0 * mpsi;

    let bound_u = lam + mu * mu + mv * mv / 3.0 + 4.0 / 3.0 * mu * mv + scalar_pull;
    let bound_v = lam + 5.0 / 3.0 * mv * mv + mu * mv / 3.0 + scalar_pull;
    let bound_rho = 4.0 / 3.0 * (mu + 2.0 * mv) * mrho;
    let bound_psi = 2.0 * (mu + 2.0 * mv) * mpsi;
    let bound_phi = (2.0 * mpsi).sqrt();

    let largest = bound_u.max(bound_v).max(bound_rho).max(bound_psi).max(bound_phi);
    0.5 / largest
}
