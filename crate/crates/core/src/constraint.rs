//! Hamiltonian-constraint evaluation in both variable sets, and the initial
//! constraint solved for the matter density.

use thiserror::Error;

use crate::core_types::{ReducedState, Tolerances};
use crate::EIGHT_PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("scale factor {0} must be positive")]
    NonPositiveScaleFactor(&'static str),
    #[error("initial constraint infeasible: required rho0 = {0} is negative")]
    Infeasible(f64),
}

/// `v² + 2uv`, the quadratic combination `v(v + 2u)` entering the constraint.
///
/// Kept as the single evaluation site so that residual checks and the
/// global-existence window bounds agree bit-for-bit.
pub fn quadratic_form(u: f64, v: f64) -> f64 {
    v * v + 2.0 * u * v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintStatus {
    Satisfied,
    Warn,
    Violated,
}

impl ConstraintStatus {
    pub fn label(&self) -> &'static str {
        match self {
            ConstraintStatus::Satisfied => "satisfied",
            ConstraintStatus::Warn => "warn",
            ConstraintStatus::Violated => "violated",
        }
    }
}

/// Raw and normalized constraint residual with its classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub residual: f64,
    /// Residual divided by the largest of the five additive terms, so the
    /// warn/fail thresholds carry meaning across regimes.
    pub relative_residual: f64,
    pub status: ConstraintStatus,
}

fn classify(relative: f64, tol: &Tolerances) -> ConstraintStatus {
    let mag = relative.abs();
    if mag <= tol.constraint_warn {
        ConstraintStatus::Satisfied
    } else if mag <= tol.constraint_fail {
        ConstraintStatus::Warn
    } else {
        ConstraintStatus::Violated
    }
}

/// Residual of the constraint in reduced variables:
/// `v² + 2uv − Λ − 8πρ − 8πψ`.
pub fn residual_reduced(state: &ReducedState, lambda: f64, tol: &Tolerances) -> ConstraintReport {
    let vv = state.v * state.v;
    let uv2 = 2.0 * state.u * state.v;
    let matter = EIGHT_PI * state.rho;
    let scalar = EIGHT_PI * state.psi;
    let residual = quadratic_form(state.u, state.v) - lambda - matter - scalar;
    let scale = vv
        .abs()
        .max(uv2.abs())
        .max(lambda.abs())
        .max(matter.abs())
        .max(scalar.abs());
    let relative = if scale == 0.0 { 0.0 } else { residual / scale };
    ConstraintReport {
        residual,
        relative_residual: relative,
        status: classify(relative, tol),
    }
}

/// Residual of the constraint in physical variables:
/// `(ḃ/b)² + 2(ȧ/a)(ḃ/b) − Λ − 8πρ − 4πφ̇²`.
///
/// Evaluated through the reduced form under the change of variables, so it
/// agrees exactly with [`residual_reduced`] on mapped data.
#[allow(clippy::too_many_arguments)]
pub fn residual_physical(
    a: f64,
    a_dot: f64,
    b: f64,
    b_dot: f64,
    rho: f64,
    phi_dot: f64,
    lambda: f64,
    tol: &Tolerances,
) -> Result<ConstraintReport, ConstraintError> {
    if !(a > 0.0) {
        return Err(ConstraintError::NonPositiveScaleFactor("a"));
    }
    if !(b > 0.0) {
        return Err(ConstraintError::NonPositiveScaleFactor("b"));
    }
    let state = ReducedState {
        u: a_dot / a,
        v: b_dot / b,
        rho,
        psi: phi_dot * phi_dot / 2.0,
        phi: 0.0,
    };
    Ok(residual_reduced(&state, lambda, tol))
}

/// Solves the initial constraint for the matter density:
/// `ρ₀ = (v₀² + 2u₀v₀ − Λ − 8πψ₀) / 8π`.
pub fn solve_initial_density(u0: f64, v0: f64, psi0: f64, lambda: f64) -> Result<f64, ConstraintError> {
    let rho0 = (quadratic_form(u0, v0) - lambda - EIGHT_PI * psi0) / EIGHT_PI;
    if rho0 < 0.0 {
        return Err(ConstraintError::Infeasible(rho0));
    }
    Ok(rho0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_types::{from_physical, InitialData};
    use proptest::prelude::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn state(u: f64, v: f64, rho: f64, psi: f64) -> ReducedState {
        ReducedState { u, v, rho, psi, phi: 0.0 }
    }

    #[test]
    fn de_sitter_closes_the_constraint() {
        let r = residual_reduced(&state(1.0, 1.0, 0.0, 0.0), 3.0, &tol());
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.status, ConstraintStatus::Satisfied);
    }

    #[test]
    fn zero_state_has_zero_residual() {
        let r = residual_reduced(&state(0.0, 0.0, 0.0, 0.0), 0.0, &tol());
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.relative_residual, 0.0);
    }

    #[test]
    fn scalar_only_residual_matches_hand_value() {
        // 1 + 1 - 8*pi*0.05 = 2 - 0.4*pi
        let r = residual_reduced(&state(0.5, 1.0, 0.0, 0.05), 0.0, &tol());
        let expected = 2.0 - 0.4 * std::f64::consts::PI;
        assert!((r.residual - expected).abs() < 1e-15);
        assert_eq!(r.status, ConstraintStatus::Violated);
    }

    #[test]
    fn physical_form_matches_reduced_de_sitter_numbers() {
        let r = residual_physical(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 3.0, &tol()).unwrap();
        assert_eq!(r.residual, 0.0);
        let r0 = residual_physical(1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, &tol()).unwrap();
        assert_eq!(r0.residual, 0.0);
    }

    #[test]
    fn physical_form_rejects_degenerate_scale_factors() {
        assert!(residual_physical(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, &tol()).is_err());
        assert!(residual_physical(1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, &tol()).is_err());
    }

    #[test]
    fn solved_density_matches_algebraic_inversion() {
        let rho0 = solve_initial_density(0.5, 1.0, 0.05, 0.0).unwrap();
        let expected = (2.0 - 0.4 * std::f64::consts::PI) / EIGHT_PI;
        assert_eq!(rho0, expected);
        assert!((rho0 - 0.029577).abs() < 1e-5);
    }

    #[test]
    fn de_sitter_needs_no_matter() {
        assert_eq!(solve_initial_density(1.0, 1.0, 0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn oversized_scalar_sector_is_infeasible() {
        let err = solve_initial_density(0.5, 1.0, 0.1, 0.0).unwrap_err();
        assert!(matches!(err, ConstraintError::Infeasible(r) if r < 0.0));
    }

    proptest! {
        #[test]
        fn physical_and_reduced_residuals_agree_exactly(
            a0 in 0.1f64..10.0,
            a_dot0 in -5.0f64..5.0,
            b0 in 0.1f64..10.0,
            b_dot0 in -5.0f64..5.0,
            phi_dot0 in 0.01f64..3.0,
            rho0 in 0.0f64..1.0,
            lambda in -3.0f64..3.0,
        ) {
            let data = InitialData { a0, a_dot0, b0, b_dot0, phi0: 0.0, phi_dot0, rho0, lambda };
            let reduced = from_physical(&data).unwrap();
            let via_physical =
                residual_physical(a0, a_dot0, b0, b_dot0, rho0, phi_dot0, lambda, &tol()).unwrap();
            let via_reduced = residual_reduced(&reduced, lambda, &tol());
            prop_assert_eq!(via_physical.residual, via_reduced.residual);
            prop_assert_eq!(via_physical.relative_residual, via_reduced.relative_residual);
        }

        #[test]
        fn solving_then_checking_vanishes_to_rounding(
            u0 in -2.0f64..2.0,
            v0 in 0.1f64..2.0,
            psi0 in 0.0f64..0.05,
            lambda in 0.0f64..3.0,
        ) {
            if let Ok(rho0) = solve_initial_density(u0, v0, psi0, lambda) {
                let r = residual_reduced(
                    &ReducedState { u: u0, v: v0, rho: rho0, psi: psi0, phi: 0.0 },
                    lambda,
                    &tol(),
                );
                let scale = quadratic_form(u0, v0).abs().max(lambda.abs()).max(1.0);
                prop_assert!(r.residual.abs() <= 4.0 * f64::EPSILON * scale);
            }
        }
    }
}
