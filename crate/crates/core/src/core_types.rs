//! State spaces, initial-data container, and shared configuration records.

use thiserror::Error;

use crate::conserved::ConservedSnapshot;
use crate::constraint::ConstraintReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("initial scale factor a0 must be positive, got {0}")]
    NonPositiveA0(f64),
    #[error("initial scale factor b0 must be positive, got {0}")]
    NonPositiveB0(f64),
    #[error("initial scalar-field rate phi_dot0 must be positive, got {0}")]
    NonPositivePhiDot0(f64),
    #[error("initial scalar-field rate phi_dot0 must be non-negative, got {0}")]
    NegativePhiDot0(f64),
    #[error("initial matter density rho0 must be non-negative, got {0}")]
    NegativeRho0(f64),
    #[error("field {0} must be finite")]
    NonFinite(&'static str),
    #[error("scale factor {0} must be positive")]
    NonPositiveScaleFactor(&'static str),
}

/// Dynamical variables of the reduced first-order system:
/// `u = ȧ/a`, `v = ḃ/b`, the radiation density `ρ`, `ψ = φ̇²/2`, and the
/// scalar field `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub u: f64,
    pub v: f64,
    pub rho: f64,
    pub psi: f64,
    pub phi: f64,
}

impl ReducedState {
    /// The change of variables applied to initial data. Assumes the data have
    /// been validated; performs no checks of its own.
    pub fn from_initial_data(data: &InitialData) -> Self {
        ReducedState {
            u: data.a_dot0 / data.a0,
            v: data.b_dot0 / data.b0,
            rho: data.rho0,
            psi: data.phi_dot0 * data.phi_dot0 / 2.0,
            phi: data.phi0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.v.is_finite()
            && self.rho.is_finite()
            && self.psi.is_finite()
            && self.phi.is_finite()
    }

    pub fn components(&self) -> [f64; 5] {
        [self.u, self.v, self.rho, self.psi, self.phi]
    }

    pub fn from_components(c: [f64; 5]) -> Self {
        ReducedState {
            u: c[0],
            v: c[1],
            rho: c[2],
            psi: c[3],
            phi: c[4],
        }
    }
}

/// Reduced state augmented with the scale factors, carried along the flow so
/// that conserved quantities and the metric need no separate quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState {
    pub reduced: ReducedState,
    pub a: f64,
    pub b: f64,
}

impl ExtendedState {
    pub fn new(reduced: ReducedState, a: f64, b: f64) -> Result<Self, DataError> {
        if !(a > 0.0) {
            return Err(DataError::NonPositiveScaleFactor("a"));
        }
        if !(b > 0.0) {
            return Err(DataError::NonPositiveScaleFactor("b"));
        }
        Ok(ExtendedState { reduced, a, b })
    }

    /// Initial extended state: reduced variables plus `a(0) = a0`, `b(0) = b0`.
    pub fn from_initial_data(data: &InitialData) -> Self {
        ExtendedState {
            reduced: ReducedState::from_initial_data(data),
            a: data.a0,
            b: data.b0,
        }
    }
}

/// The seven numbers fixing a Cauchy problem, plus the cosmological constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub a0: f64,
    pub a_dot0: f64,
    pub b0: f64,
    pub b_dot0: f64,
    pub phi0: f64,
    pub phi_dot0: f64,
    pub rho0: f64,
    pub lambda: f64,
}

impl InitialData {
    /// Structural validation. `phi_dot0 = 0` is admitted here so that vacuum
    /// and exact-solution runs can be expressed; the strict positivity of the
    /// non-decreasing scalar-field choice is enforced by [`from_physical`].
    pub fn validate(&self) -> Result<(), DataError> {
        let fields = [
            (self.a0, "a0"),
            (self.a_dot0, "a_dot0"),
            (self.b0, "b0"),
            (self.b_dot0, "b_dot0"),
            (self.phi0, "phi0"),
            (self.phi_dot0, "phi_dot0"),
            (self.rho0, "rho0"),
            (self.lambda, "lambda"),
        ];
        for (value, name) in fields {
            if !value.is_finite() {
                return Err(DataError::NonFinite(name));
            }
        }
        if !(self.a0 > 0.0) {
            return Err(DataError::NonPositiveA0(self.a0));
        }
        if !(self.b0 > 0.0) {
            return Err(DataError::NonPositiveB0(self.b0));
        }
        if self.phi_dot0 < 0.0 {
            return Err(DataError::NegativePhiDot0(self.phi_dot0));
        }
        if self.rho0 < 0.0 {
            return Err(DataError::NegativeRho0(self.rho0));
        }
        Ok(())
    }

    pub fn u0(&self) -> f64 {
        self.a_dot0 / self.a0
    }

    pub fn v0(&self) -> f64 {
        self.b_dot0 / self.b0
    }

    pub fn psi0(&self) -> f64 {
        self.phi_dot0 * self.phi_dot0 / 2.0
    }
}

/// Maps initial data to the reduced variables at `t = 0`.
///
/// `ψ(0) = φ̇₀²/2`, consistent with the defining substitution for `ψ`.
/// Rejects `a0 ≤ 0`, `b0 ≤ 0`, and `phi_dot0 ≤ 0` (the scalar field is chosen
/// non-decreasing with strictly positive initial rate).
pub fn from_physical(data: &InitialData) -> Result<ReducedState, DataError> {
    data.validate()?;
    if !(data.phi_dot0 > 0.0) {
        return Err(DataError::NonPositivePhiDot0(data.phi_dot0));
    }
    Ok(ReducedState::from_initial_data(data))
}

/// Error-control and constraint-classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Relative constraint residual above which a sample is flagged.
    pub constraint_warn: f64,
    /// Relative constraint residual above which a sample counts as violated.
    pub constraint_fail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            constraint_warn: 1e-8,
            constraint_fail: 1e-5,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), String> {
        for (value, name) in [
            (self.abs_tol, "abs_tol"),
            (self.rel_tol, "rel_tol"),
            (self.constraint_warn, "constraint_warn"),
            (self.constraint_fail, "constraint_fail"),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if self.constraint_warn > self.constraint_fail {
            return Err(format!(
                "constraint_warn ({}) must not exceed constraint_fail ({})",
                self.constraint_warn, self.constraint_fail
            ));
        }
        Ok(())
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminationReason {
    Completed,
    /// `|u| + |v|` exceeded the configured ceiling, or a state component lost
    /// finiteness or scale-factor positivity, at time `t`.
    BlowUp { t: f64 },
    /// The step controller requested a step below the configured minimum.
    StepUnderflow { t: f64 },
}

impl TerminationReason {
    pub fn label(&self) -> &'static str {
        match self {
            TerminationReason::Completed => "completed",
            TerminationReason::BlowUp { .. } => "blow-up detected",
            TerminationReason::StepUnderflow { .. } => "step underflow",
        }
    }
}

/// Per-sample diagnostics recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDiagnostics {
    pub constraint: ConstraintReport,
    /// Expansion-type scalar `H = u + 2v`.
    pub expansion: f64,
    /// Riccati envelope value dominating `H`, when defined for the run's data.
    pub envelope: Option<f64>,
    pub conserved: ConservedSnapshot,
}

/// Solver identification and step-control parameters echoed with a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub solver: String,
    pub lambda: f64,
    pub tolerances: Tolerances,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub termination: TerminationReason,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub rhs_evals: u64,
}

/// Time grid, extended-state samples, and per-sample diagnostics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ExtendedState>,
    pub diagnostics: Vec<SampleDiagnostics>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &ExtendedState {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// Sup-norm distance between the reduced components of two trajectories
    /// sampled on the same time grid.
    pub fn reduced_sup_distance(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.len(), other.len(), "trajectories sampled on different grids");
        let mut sup = 0.0f64;
        for (s, o) in self.states.iter().zip(&other.states) {
            let sc = s.reduced.components();
            let oc = o.reduced.components();
            for i in 0..5 {
                sup = sup.max((sc[i] - oc[i]).abs());
            }
        }
        sup
    }
}
