//! Exact first integrals of the radiation and scalar sectors, and their
//! numerical drift along a trajectory.
//!
//! The evolution equations for `ρ` and `ψ` are total logarithmic derivatives
//! of powers of the comoving volume `a b²`, so `ρ (a b²)^{4/3}`, `ψ (a b²)²`,
//! and `φ̇ a b²` are constant along the continuum flow. Their drift is a pure
//! integrator-quality metric.

use thiserror::Error;

use crate::core_types::{ExtendedState, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConservedError {
    #[error("scale factor {0} must be positive")]
    NonPositiveScaleFactor(&'static str),
    #[error("trajectory has no samples")]
    EmptyTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedSnapshot {
    /// `ρ (a b²)^{4/3}`
    pub radiation_invariant: f64,
    /// `ψ (a b²)²`
    pub scalar_invariant: f64,
    /// `φ̇ a b² = √(2ψ) a b²`
    pub momentum_invariant: f64,
}

/// Evaluates the three invariants at one extended state.
pub fn snapshot(state: &ExtendedState) -> Result<ConservedSnapshot, ConservedError> {
    if !(state.a > 0.0) {
        return Err(ConservedError::NonPositiveScaleFactor("a"));
    }
    if !(state.b > 0.0) {
        return Err(ConservedError::NonPositiveScaleFactor("b"));
    }
    let volume = state.a * state.b * state.b;
    Ok(ConservedSnapshot {
        radiation_invariant: state.reduced.rho * volume.powf(4.0 / 3.0),
        scalar_invariant: state.reduced.psi * volume * volume,
        momentum_invariant: (2.0 * state.reduced.psi).sqrt() * volume,
    })
}

fn relative_deviation(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((value - reference) / reference).abs()
    }
}

/// Maximum relative deviation of each invariant from its initial value, in
/// the order (radiation, scalar, momentum).
pub fn drift(traj: &Trajectory) -> Result<(f64, f64, f64), ConservedError> {
    let first = traj.states.first().ok_or(ConservedError::EmptyTrajectory)?;
    let reference = snapshot(first)?;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for state in &traj.states {
        let s = snapshot(state)?;
        worst.0 = worst.0.max(relative_deviation(s.radiation_invariant, reference.radiation_invariant));
        worst.1 = worst.1.max(relative_deviation(s.scalar_invariant, reference.scalar_invariant));
        worst.2 = worst.2.max(relative_deviation(s.momentum_invariant, reference.momentum_invariant));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_types::ReducedState;

    fn ext(rho: f64, psi: f64, a: f64, b: f64) -> ExtendedState {
        ExtendedState {
            reduced: ReducedState { u: 0.0, v: 0.0, rho, psi, phi: 0.0 },
            a,
            b,
        }
    }

    #[test]
    fn unit_volume_returns_raw_fields() {
        let s = snapshot(&ext(0.1, 0.5, 1.0, 1.0)).unwrap();
        assert_eq!(s.radiation_invariant, 0.1);
        assert_eq!(s.scalar_invariant, 0.5);
        assert_eq!(s.momentum_invariant, 1.0);
    }

    #[test]
    fn doubled_volume_scales_each_invariant() {
        let s = snapshot(&ext(0.1, 0.5, 2.0, 1.0)).unwrap();
        assert!((s.radiation_invariant - 0.1 * 2.0f64.powf(4.0 / 3.0)).abs() < 1e-15);
        assert_eq!(s.scalar_invariant, 2.0);
        assert_eq!(s.momentum_invariant, 2.0);
    }

    #[test]
    fn vacuum_sectors_give_zero_invariants() {
        let s = snapshot(&ext(0.0, 0.0, 3.0, 0.7)).unwrap();
        assert_eq!(s.radiation_invariant, 0.0);
        assert_eq!(s.scalar_invariant, 0.0);
        assert_eq!(s.momentum_invariant, 0.0);
    }

    #[test]
    fn degenerate_scale_factor_is_rejected() {
        assert!(snapshot(&ext(0.0, 0.0, 0.0, 1.0)).is_err());
        assert!(snapshot(&ext(0.0, 0.0, 1.0, -1.0)).is_err());
    }

    #[test]
    fn scalar_invariant_is_half_squared_momentum_invariant() {
        for (rho, psi, a, b) in [(0.1, 0.5, 2.0, 1.0), (0.0, 0.25, 0.3, 4.0), (1.0, 2.0, 1.5, 0.5)] {
            let s = snapshot(&ext(rho, psi, a, b)).unwrap();
            let half_sq = s.momentum_invariant * s.momentum_invariant / 2.0;
            assert!(
                (s.scalar_invariant - half_sq).abs() <= 1e-14 * s.scalar_invariant.max(1e-300),
                "scalar {} vs momentum^2/2 {}",
                s.scalar_invariant,
                half_sq
            );
        }
    }
}
