//! Right-hand side of the reduced first-order system and its time
//! integrators: an embedded explicit Runge–Kutta 5(4) pair with
//! proportional–integral step control, and a fixed-step classical RK4
//! reference method for cross-checks.

use thiserror::Error;

use crate::bounds;
use crate::conserved;
use crate::constraint::{self, quadratic_form};
use crate::core_types::{
    DataError, ExtendedState, InitialData, ReducedState, SampleDiagnostics, TerminationReason,
    Tolerances, Trajectory, TrajectoryMeta,
};
use crate::EIGHT_PI;

const EIGHT_PI_THIRDS: f64 = EIGHT_PI / 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("non-finite state component {0}")]
    NonFiniteState(&'static str),
    #[error("psi must be non-negative, got {0}")]
    NegativePsi(f64),
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Time derivatives of the extended state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub du: f64,
    pub dv: f64,
    pub drho: f64,
    pub dpsi: f64,
    pub dphi: f64,
    pub da: f64,
    pub db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Adaptive,
    FixedRk4,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Adaptive => "adaptive",
            Method::FixedRk4 => "fixed_rk4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub tolerances: Tolerances,
    pub t_end: f64,
    pub max_samples: usize,
    /// Integration aborts once `|u| + |v|` exceeds this ceiling.
    pub blowup_ceiling: f64,
    /// Diagnostic mode: reset `ρ` from the constraint at every accepted step.
    pub project_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Adaptive,
            initial_step: 1e-3,
            min_step: 1e-10,
            max_step: 0.25,
            tolerances: Tolerances::default(),
            t_end: 10.0,
            max_samples: 1001,
            blowup_ceiling: 1e12,
            project_rho: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        self.tolerances.validate().map_err(EvolutionError::BadConfig)?;
        for (value, name) in [
            (self.initial_step, "initial_step"),
            (self.min_step, "min_step"),
            (self.max_step, "max_step"),
            (self.t_end, "t_end"),
            (self.blowup_ceiling, "blowup_ceiling"),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(EvolutionError::BadConfig(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.min_step <= self.initial_step && self.initial_step <= self.max_step) {
            return Err(EvolutionError::BadConfig(format!(
                "need min_step <= initial_step <= max_step, got {} / {} / {}",
                self.min_step, self.initial_step, self.max_step
            )));
        }
        if self.max_samples < 2 {
            return Err(EvolutionError::BadConfig(format!(
                "max_samples must be at least 2, got {}",
                self.max_samples
            )));
        }
        Ok(())
    }
}

// Internal state layout: [u, v, rho, psi, phi, a, b].
const DIM: usize = 7;
type StateVec = [f64; DIM];

fn pack(state: &ExtendedState) -> StateVec {
    let r = &state.reduced;
    [r.u, r.v, r.rho, r.psi, r.phi, state.a, state.b]
}

fn unpack(y: &StateVec) -> ExtendedState {
    ExtendedState {
        reduced: ReducedState {
            u: y[0],
            v: y[1],
            rho: y[2],
            psi: y[3],
            phi: y[4],
        },
        a: y[5],
        b: y[6],
    }
}

/// Right-hand side of the five reduced equations. `ψ` is clamped to zero
/// before the square root; the polynomial terms use the raw value.
pub fn reduced_rhs(s: &ReducedState, lambda: f64) -> [f64; 5] {
    let ReducedState { u, v, psi, rho, .. } = *s;
    let lam = 2.0 / 3.0 * lambda;
    let expansion = u + 2.0 * v;
    [
        lam - u * u + v * v / 3.0 - 4.0 / 3.0 * u * v - EIGHT_PI_THIRDS * psi,
        lam - 5.0 / 3.0 * v * v - u * v / 3.0 - EIGHT_PI_THIRDS * psi,
        -4.0 / 3.0 * expansion * rho,
        -2.0 * expansion * psi,
        (2.0 * psi.max(0.0)).sqrt(),
    ]
}

fn rhs_raw(y: &StateVec, lambda: f64) -> StateVec {
    let s = ReducedState {
        u: y[0],
        v: y[1],
        rho: y[2],
        psi: y[3],
        phi: y[4],
    };
    let [du, dv, drho, dpsi, dphi] = reduced_rhs(&s, lambda);
    [du, dv, drho, dpsi, dphi, y[0] * y[5], y[1] * y[6]]
}

/// Evaluates the full right-hand side at one extended state.
pub fn rhs(state: &ExtendedState, lambda: f64) -> Result<Derivative, EvolutionError> {
    let y = pack(state);
    let names = ["u", "v", "rho", "psi", "phi", "a", "b"];
    for (value, name) in y.iter().zip(names) {
        if !value.is_finite() {
            return Err(EvolutionError::NonFiniteState(name));
        }
    }
    if !lambda.is_finite() {
        return Err(EvolutionError::NonFiniteState("lambda"));
    }
    if state.reduced.psi < 0.0 {
        return Err(EvolutionError::NegativePsi(state.reduced.psi));
    }
    let d = rhs_raw(&y, lambda);
    Ok(Derivative {
        du: d[0],
        dv: d[1],
        drho: d[2],
        dpsi: d[3],
        dphi: d[4],
        da: d[5],
        db: d[6],
    })
}

// Dormand–Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Counters {
    accepted: u64,
    rejected: u64,
    evals: u64,
}

struct EnvelopeContext {
    rho0: f64,
    lambda: f64,
    h0: f64,
}

fn diagnostics(
    state: &ExtendedState,
    t: f64,
    lambda: f64,
    tol: &Tolerances,
    envelope: &Option<EnvelopeContext>,
) -> SampleDiagnostics {
    let snap = conserved::snapshot(state).expect("scale factors checked before sampling");
    let w = envelope
        .as_ref()
        .and_then(|ctx| bounds::envelope_w(ctx.rho0, ctx.lambda, ctx.h0, t).ok());
    SampleDiagnostics {
        constraint: constraint::residual_reduced(&state.reduced, lambda, tol),
        expansion: bounds::expansion_scalar(&state.reduced),
        envelope: w,
        conserved: snap,
    }
}

fn state_lost(y: &StateVec, ceiling: f64) -> bool {
    if y.iter().any(|c| !c.is_finite()) {
        return true;
    }
    if y[0].abs() + y[1].abs() > ceiling {
        return true;
    }
    y[5] <= 0.0 || y[6] <= 0.0
}

fn project_density(y: &mut StateVec, lambda: f64) {
    y[2] = (quadratic_form(y[0], y[1]) - lambda - EIGHT_PI * y[3]) / EIGHT_PI;
}

/// Integrates the system from the given data up to `config.t_end`, sampling
/// on a uniform grid of `config.max_samples` points. Stops early with a
/// recorded termination reason on blow-up or step underflow.
pub fn integrate(data: &InitialData, config: &SolverConfig) -> Result<Trajectory, EvolutionError> {
    config.validate()?;
    data.validate()?;
    let lambda = data.lambda;
    let y0 = pack(&ExtendedState::from_initial_data(data));

    let envelope = if lambda >= 0.0 {
        Some(EnvelopeContext {
            rho0: data.rho0,
            lambda,
            h0: y0[0] + 2.0 * y0[1],
        })
    } else {
        None
    };

    let n = config.max_samples;
    let dt_sample = config.t_end / (n - 1) as f64;
    let sample_time = |k: usize| k as f64 * dt_sample;

    let mut times = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut diags = Vec::with_capacity(n);
    let mut counters = Counters { accepted: 0, rejected: 0, evals: 0 };

    let state0 = unpack(&y0);
    times.push(0.0);
    diags.push(diagnostics(&state0, 0.0, lambda, &config.tolerances, &envelope));
    states.push(state0);

    let termination = match config.method {
        Method::Adaptive => run_adaptive(
            y0,
            lambda,
            config,
            sample_time,
            &mut times,
            &mut states,
            &mut diags,
            &mut counters,
            &envelope,
        ),
        Method::FixedRk4 => run_fixed_rk4(
            y0,
            lambda,
            config,
            sample_time,
            &mut times,
            &mut states,
            &mut diags,
            &mut counters,
            &envelope,
        ),
    };

    Ok(Trajectory {
        times,
        states,
        diagnostics: diags,
        meta: TrajectoryMeta {
            solver: config.method.label().to_string(),
            lambda,
            tolerances: config.tolerances,
            initial_step: config.initial_step,
            min_step: config.min_step,
            max_step: config.max_step,
            termination,
            steps_accepted: counters.accepted,
            steps_rejected: counters.rejected,
            rhs_evals: counters.evals,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn run_adaptive(
    mut y: StateVec,
    lambda: f64,
    config: &SolverConfig,
    sample_time: impl Fn(usize) -> f64,
    times: &mut Vec<f64>,
    states: &mut Vec<ExtendedState>,
    diags: &mut Vec<SampleDiagnostics>,
    counters: &mut Counters,
    envelope: &Option<EnvelopeContext>,
) -> TerminationReason {
    const SAFETY: f64 = 0.9;
    const ALPHA: f64 = 0.7 / 5.0;
    const BETA: f64 = 0.4 / 5.0;
    const FAC_MIN: f64 = 0.2;
    const FAC_MAX: f64 = 5.0;

    let tol = &config.tolerances;
    let mut t = 0.0f64;
    let mut k1 = rhs_raw(&y, lambda);
    counters.evals += 1;
    let mut h_ctrl = config.initial_step.clamp(config.min_step, config.max_step);
    let mut err_old = 1e-4f64;
    let mut rejected_last = false;

    for sample in 1..config.max_samples {
        let t_target = sample_time(sample);
        loop {
            if h_ctrl < config.min_step {
                return TerminationReason::StepUnderflow { t };
            }
            let remaining = t_target - t;
            let h = h_ctrl.min(remaining).min(config.max_step);
            let landing = h >= remaining;

            // Stages of the embedded pair; the last stage sits at the new
            // solution point and is reused as the next step's first stage.
            let stage = |coeffs: &[f64], ks: &[&StateVec]| -> StateVec {
                let mut out = y;
                for (c, k) in coeffs.iter().zip(ks) {
                    for i in 0..DIM {
                        out[i] += h * c * k[i];
                    }
                }
                out
            };
            let k2 = rhs_raw(&stage(&A2, &[&k1]), lambda);
            let k3 = rhs_raw(&stage(&A3, &[&k1, &k2]), lambda);
            let k4 = rhs_raw(&stage(&A4, &[&k1, &k2, &k3]), lambda);
            let k5 = rhs_raw(&stage(&A5, &[&k1, &k2, &k3, &k4]), lambda);
            let k6 = rhs_raw(&stage(&A6, &[&k1, &k2, &k3, &k4, &k5]), lambda);
            let y_new = stage(&B5, &[&k1, &k2, &k3, &k4, &k5, &k6]);
            let k7 = rhs_raw(&y_new, lambda);
            counters.evals += 6;

            let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
            // The scalar field decouples, so its error is ignored while psi
            // sits below the absolute tolerance (the square root makes its
            // local error estimate meaningless there).
            let skip_phi = y[3] < tol.abs_tol;
            let mut err_sq = 0.0f64;
            let mut n_comp = 0u32;
            for i in 0..DIM {
                if skip_phi && i == 4 {
                    continue;
                }
                let mut e = 0.0f64;
                for (j, k) in ks.iter().enumerate() {
                    e += (B4[j]
                        - if j < 6 { B5[j] } else { 0.0 })
                        * k[i];
                }
                e *= h;
                let sc = tol.abs_tol + tol.rel_tol * y[i].abs().max(y_new[i].abs());
                err_sq += (e / sc) * (e / sc);
                n_comp += 1;
            }
            let mut err = (err_sq / n_comp as f64).sqrt();
            if !err.is_finite() {
                err = 1e10;
            }

            if err <= 1.0 {
                counters.accepted += 1;
                t = if landing { t_target } else { t + h };
                y = y_new;
                k1 = k7;
                if config.project_rho {
                    project_density(&mut y, lambda);
                    k1 = rhs_raw(&y, lambda);
                    counters.evals += 1;
                }
                if state_lost(&y, config.blowup_ceiling) {
                    return TerminationReason::BlowUp { t };
                }
                let fac_max = if rejected_last { 1.0 } else { FAC_MAX };
                let fac = if err == 0.0 {
                    fac_max
                } else {
                    (SAFETY * err.powf(-ALPHA) * err_old.powf(BETA)).clamp(FAC_MIN, fac_max)
                };
                let proposal = (h * fac).min(config.max_step);
                h_ctrl = if landing { h_ctrl.max(proposal) } else { proposal };
                err_old = err.max(1e-10);
                rejected_last = false;
                if landing {
                    break;
                }
            } else {
                counters.rejected += 1;
                h_ctrl = h * (SAFETY * err.powf(-0.2)).max(FAC_MIN);
                rejected_last = true;
            }
        }
        let state = unpack(&y);
        times.push(t);
        diags.push(diagnostics(&state, t, lambda, tol, envelope));
        states.push(state);
    }
    TerminationReason::Completed
}

#[allow(clippy::too_many_arguments)]
fn run_fixed_rk4(
    mut y: StateVec,
    lambda: f64,
    config: &SolverConfig,
    sample_time: impl Fn(usize) -> f64,
    times: &mut Vec<f64>,
    states: &mut Vec<ExtendedState>,
    diags: &mut Vec<SampleDiagnostics>,
    counters: &mut Counters,
    envelope: &Option<EnvelopeContext>,
) -> TerminationReason {
    let dt_sample = sample_time(1);
    let n_sub = (dt_sample / config.initial_step).ceil().max(1.0) as usize;
    let h = dt_sample / n_sub as f64;

    for sample in 1..config.max_samples {
        let mut t = sample_time(sample - 1);
        for _ in 0..n_sub {
            let k1 = rhs_raw(&y, lambda);
            let mut y2 = y;
            for i in 0..DIM {
                y2[i] += 0.5 * h * k1[i];
            }
            let k2 = rhs_raw(&y2, lambda);
            let mut y3 = y;
            for i in 0..DIM {
                y3[i] += 0.5 * h * k2[i];
            }
            let k3 = rhs_raw(&y3, lambda);
            let mut y4 = y;
            for i in 0..DIM {
                y4[i] += h * k3[i];
            }
            let k4 = rhs_raw(&y4, lambda);
            for i in 0..DIM {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            counters.evals += 4;
            counters.accepted += 1;
            t += h;
            if config.project_rho {
                project_density(&mut y, lambda);
            }
            if state_lost(&y, config.blowup_ceiling) {
                return TerminationReason::BlowUp { t };
            }
        }
        let t_target = sample_time(sample);
        let state = unpack(&y);
        times.push(t_target);
        diags.push(diagnostics(&state, t_target, lambda, &config.tolerances, envelope));
        states.push(state);
    }
    TerminationReason::Completed
}
