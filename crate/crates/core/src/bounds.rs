//! Global-existence machinery: the expansion-type scalar `H = u + 2v`, the
//! closed-form solution of the Riccati comparison equation `ẏ = K² − α²y²`,
//! the envelope `W` dominating `H`, and the certificate that checks every
//! boundedness condition of the global-existence argument on a trajectory.

use thiserror::Error;

use crate::constraint::quadratic_form;
use crate::core_types::{InitialData, ReducedState, Trajectory};
use crate::EIGHT_PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid Riccati parameters: {0}")]
    InvalidParams(String),
    #[error("time {t} precedes the initial time {t0}")]
    TimeBeforeStart { t: f64, t0: f64 },
    #[error("closed form has a pole at t = {0}")]
    Pole(f64),
    #[error("envelope requires lambda >= 0, got {0}")]
    NegativeLambda(f64),
    #[error("envelope requires rho0 >= 0, got {0}")]
    NegativeRho0(f64),
    #[error("certificate regime violation: {0}")]
    RegimeViolation(String),
    #[error("trajectory has no samples")]
    EmptyTrajectory,
}

/// `H = u + 2v`, the expansion-type scalar controlled from above.
pub fn expansion_scalar(state: &ReducedState) -> f64 {
    state.u + 2.0 * state.v
}

/// Parameters of the comparison problem `ẏ = K² − α²y²`, `y(t0) = y0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiParams {
    pub k: f64,
    pub alpha: f64,
    pub y0: f64,
    pub t0: f64,
}

impl RiccatiParams {
    pub fn new(k: f64, alpha: f64, y0: f64, t0: f64) -> Result<Self, BoundsError> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(BoundsError::InvalidParams(format!("K must be positive, got {k}")));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(BoundsError::InvalidParams(format!("alpha must be positive, got {alpha}")));
        }
        if !y0.is_finite() || !t0.is_finite() {
            return Err(BoundsError::InvalidParams("y0 and t0 must be finite".to_string()));
        }
        Ok(RiccatiParams { k, alpha, y0, t0 })
    }

    fn h1(&self) -> f64 {
        self.alpha * self.y0 - self.k
    }

    fn h2(&self) -> f64 {
        self.alpha * self.y0 + self.k
    }

    /// Location of the pole of the closed form, if one exists for `t >= t0`
    /// (possible only when `y0 < -K/alpha`).
    pub fn pole(&self) -> Option<f64> {
        let (h1, h2) = (self.h1(), self.h2());
        if h2 >= 0.0 {
            return None;
        }
        // h1 < h2 < 0 here, so the ratio exceeds one and the pole is real.
        let t = self.t0 + (h1 / h2).ln() / (2.0 * self.alpha * self.k);
        Some(t)
    }
}

/// Closed-form solution of `ẏ = K² − α²y²`:
/// `y(t) = (K/α)·[1 + 2h₁ / (h₂·e^{2αK(t−t0)} − h₁)]` with
/// `h₁ = αy₀ − K`, `h₂ = αy₀ + K`. Tends to `K/α` as `t → ∞`.
pub fn riccati_closed_form(p: &RiccatiParams, t: f64) -> Result<f64, BoundsError> {
    if t < p.t0 {
        return Err(BoundsError::TimeBeforeStart { t, t0: p.t0 });
    }
    let (h1, h2) = (p.h1(), p.h2());
    let equilibrium = p.k / p.alpha;
    // h2 = 0 means y0 = -K/alpha, the repelling constant solution.
    if h2 == 0.0 {
        return Ok(-equilibrium);
    }
    let growth = (2.0 * p.alpha * p.k * (t - p.t0)).exp();
    let denom = h2 * growth - h1;
    if denom == 0.0 {
        return Err(BoundsError::Pole(t));
    }
    Ok(equilibrium * (1.0 + 2.0 * h1 / denom))
}

/// Envelope `W` dominating `H`: solves `Ẇ = C₀² − W²` with `C₀² = 3Λ + 8πρ₀`
/// and `W(0) = h0`. The degenerate case `C₀ = 0` reduces to `Ẇ = −W²`, solved
/// separately; it is diagnostic-only and excluded from certificates.
pub fn envelope_w(rho0: f64, lambda: f64, h0: f64, t: f64) -> Result<f64, BoundsError> {
    if lambda < 0.0 {
        return Err(BoundsError::NegativeLambda(lambda));
    }
    if rho0 < 0.0 {
        return Err(BoundsError::NegativeRho0(rho0));
    }
    if t < 0.0 {
        return Err(BoundsError::TimeBeforeStart { t, t0: 0.0 });
    }
    let c0_sq = 3.0 * lambda + EIGHT_PI * rho0;
    if c0_sq == 0.0 {
        let denom = 1.0 + h0 * t;
        if denom <= 0.0 {
            return Err(BoundsError::Pole(t));
        }
        return Ok(h0 / denom);
    }
    let p = RiccatiParams::new(c0_sq.sqrt(), 1.0, h0, 0.0)?;
    riccati_closed_form(&p, t)
}

/// Fixed-step RK4 tabulation of the comparison problem, used as the
/// independent numerical route against the closed form.
pub fn riccati_numeric_table(p: &RiccatiParams, t_end: f64, samples: usize) -> Vec<(f64, f64)> {
    assert!(samples >= 2, "need at least two samples");
    assert!(t_end > p.t0, "t_end must exceed t0");
    let f = |y: f64| p.k * p.k - p.alpha * p.alpha * y * y;
    let dt = (t_end - p.t0) / (samples - 1) as f64;
    // Step small relative to the decay rate 2*alpha*K so the fourth-order
    // truncation error sits well below the comparison tolerances.
    let h_target = 5e-4 / (p.alpha * p.k / 2.0).max(1.0);
    let n_sub = (dt / h_target).ceil().max(1.0) as usize;
    let h = dt / n_sub as f64;

    let mut out = Vec::with_capacity(samples);
    let mut y = p.y0;
    out.push((p.t0, y));
    for s in 1..samples {
        for _ in 0..n_sub {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push((p.t0 + s as f64 * dt, y));
    }
    out
}

/// One checked condition with its worst raw margin and where it occurred.
/// A positive margin means the inequality held with room to spare at every
/// sample; the pass verdict allows the configured slack below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRecord {
    pub name: &'static str,
    pub passed: bool,
    pub worst_margin: f64,
    pub worst_time: f64,
}

/// Pass/fail record of every boundedness condition over a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub conditions: Vec<ConditionRecord>,
    pub overall_pass: bool,
    /// Smallest `u` seen, reported without a threshold: only `H` and `v` are
    /// controlled by the argument, so `u` alone is a diagnostic.
    pub min_u: f64,
    pub min_u_time: f64,
    /// Absolute slack scale applied to each condition: 10x the constraint
    /// warning threshold, tied to integrator tolerance.
    pub slack: f64,
}

struct Worst {
    margin: f64,
    time: f64,
}

impl Worst {
    fn new() -> Self {
        Worst { margin: f64::INFINITY, time: 0.0 }
    }

    fn update(&mut self, margin: f64, time: f64) {
        if margin < self.margin {
            self.margin = margin;
            self.time = time;
        }
    }
}

/// Checks every global-existence condition on a trajectory produced from
/// `data`. Requires the global-existence regime: `Λ ≥ 0`, `ḃ₀ > 0`, `ρ₀ > 0`,
/// `ψ₀ > 0`.
pub fn certify(traj: &Trajectory, data: &InitialData) -> Result<Certificate, BoundsError> {
    if data.lambda < 0.0 {
        return Err(BoundsError::RegimeViolation(format!(
            "lambda must be non-negative, got {}",
            data.lambda
        )));
    }
    if !(data.b_dot0 > 0.0) {
        return Err(BoundsError::RegimeViolation(format!(
            "b_dot0 must be positive, got {}",
            data.b_dot0
        )));
    }
    if !(data.rho0 > 0.0) {
        return Err(BoundsError::RegimeViolation(format!(
            "rho0 must be strictly positive, got {}",
            data.rho0
        )));
    }
    let psi0 = data.psi0();
    if !(psi0 > 0.0) {
        return Err(BoundsError::RegimeViolation(format!(
            "psi0 must be strictly positive, got {psi0}"
        )));
    }
    if traj.is_empty() {
        return Err(BoundsError::EmptyTrajectory);
    }

    let slack = 10.0 * traj.meta.tolerances.constraint_warn;
    let lambda = data.lambda;
    let rho0 = data.rho0;
    let h0 = expansion_scalar(&traj.states[0].reduced);
    let window_top = lambda + EIGHT_PI * rho0 + EIGHT_PI * psi0;

    let mut v_pos = Worst::new();
    let mut v2u_pos = Worst::new();
    let mut rho_ok = Worst::new();
    let mut psi_ok = Worst::new();
    let mut window = Worst::new();
    let mut below_envelope = Worst::new();
    let mut rho_positive = true;
    let mut psi_positive = true;
    let mut min_u = f64::INFINITY;
    let mut min_u_time = 0.0;

    let mut prev: Option<&ReducedState> = None;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let s = &state.reduced;
        v_pos.update(s.v, *t);
        v2u_pos.update(s.v + 2.0 * s.u, *t);

        rho_ok.update(s.rho, *t);
        rho_ok.update(rho0 - s.rho, *t);
        psi_ok.update(s.psi, *t);
        psi_ok.update(psi0 - s.psi, *t);
        if let Some(p) = prev {
            rho_ok.update(p.rho - s.rho, *t);
            psi_ok.update(p.psi - s.psi, *t);
        }
        rho_positive &= s.rho > 0.0;
        psi_positive &= s.psi > 0.0;

        let q = quadratic_form(s.u, s.v);
        window.update(q - lambda, *t);
        window.update(window_top - q, *t);

        let w = envelope_w(rho0, lambda, h0, *t)?;
        below_envelope.update(w - expansion_scalar(s), *t);

        if s.u < min_u {
            min_u = s.u;
            min_u_time = *t;
        }
        prev = Some(s);
    }

    let scale_v = traj.states[0].reduced.v.abs().max(1.0);
    let scale_h = h0.abs().max(1.0);
    let scale_window = window_top.abs().max(1.0);
    let conditions = vec![
        ConditionRecord {
            name: "v_positive",
            passed: v_pos.margin > -slack * scale_v,
            worst_margin: v_pos.margin,
            worst_time: v_pos.time,
        },
        ConditionRecord {
            name: "v_plus_2u_positive",
            passed: v2u_pos.margin > -slack * scale_h,
            worst_margin: v2u_pos.margin,
            worst_time: v2u_pos.time,
        },
        ConditionRecord {
            name: "rho_monotone_bounded",
            passed: rho_positive && rho_ok.margin >= -slack * rho0,
            worst_margin: rho_ok.margin,
            worst_time: rho_ok.time,
        },
        ConditionRecord {
            name: "psi_monotone_bounded",
            passed: psi_positive && psi_ok.margin >= -slack * psi0,
            worst_margin: psi_ok.margin,
            worst_time: psi_ok.time,
        },
        ConditionRecord {
            name: "quadratic_form_window",
            passed: window.margin >= -slack * scale_window,
            worst_margin: window.margin,
            worst_time: window.time,
        },
        ConditionRecord {
            name: "expansion_below_envelope",
            passed: below_envelope.margin >= -slack * scale_h,
            worst_margin: below_envelope.margin,
            worst_time: below_envelope.time,
        },
    ];
    let overall_pass = conditions.iter().all(|c| c.passed);
    Ok(Certificate { conditions, overall_pass, min_u, min_u_time, slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::solve_initial_density;
    use crate::core_types::InitialData;
    use crate::evolution::{integrate, SolverConfig};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(u: f64, v: f64) -> ReducedState {
        ReducedState { u, v, rho: 0.0, psi: 0.0, phi: 0.0 }
    }

    #[test]
    fn expansion_scalar_is_u_plus_2v() {
        assert_eq!(expansion_scalar(&state(0.5, 1.0)), 2.5);
        assert_eq!(expansion_scalar(&state(1.0, 1.0)), 3.0);
        assert_eq!(expansion_scalar(&state(-2.0, 1.0)), 0.0);
    }

    #[test]
    fn closed_form_starts_at_the_initial_value() {
        let p = RiccatiParams::new(1.7, 0.6, 2.3, 0.4).unwrap();
        let y = riccati_closed_form(&p, 0.4).unwrap();
        assert!((y - 2.3).abs() < 1e-14);
    }

    #[test]
    fn closed_form_reduces_to_tanh() {
        let p = RiccatiParams::new(2.0, 1.0, 0.0, 0.0).unwrap();
        for t in [0.0, 0.1, 0.5, 1.0, 3.0, 10.0] {
            let y = riccati_closed_form(&p, t).unwrap();
            let exact = 2.0 * (2.0 * t).tanh();
            assert!((y - exact).abs() < 1e-12, "t={t}: {y} vs {exact}");
        }
        let y_half = riccati_closed_form(&p, 0.5).unwrap();
        assert!((y_half - 1.52323).abs() < 1e-5);
    }

    #[test]
    fn closed_form_approaches_the_equilibrium() {
        let p = RiccatiParams::new(3.0, 2.0, 7.0, 1.0).unwrap();
        let y = riccati_closed_form(&p, 40.0).unwrap();
        assert!((y - 1.5).abs() < 1e-12);
    }

    #[test]
    fn pole_detected_below_the_repelling_branch() {
        let p = RiccatiParams::new(1.0, 1.0, -2.0, 0.0).unwrap();
        let pole = p.pole().expect("pole expected");
        assert!((pole - (3.0f64.ln() / 2.0)).abs() < 1e-12);
        assert!(riccati_closed_form(&p, pole - 0.05).is_ok());
        // Above the repelling branch there is no pole.
        assert!(RiccatiParams::new(1.0, 1.0, -0.5, 0.0).unwrap().pole().is_none());
        assert!(RiccatiParams::new(1.0, 1.0, 4.0, 0.0).unwrap().pole().is_none());
    }

    #[test]
    fn closed_form_matches_numerical_integration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let k = 5.0 * (1.0 - rng.gen::<f64>());
            let alpha = 3.0 * (1.0 - rng.gen::<f64>());
            let y0 = 10.0 * rng.gen::<f64>();
            let p = RiccatiParams::new(k, alpha, y0, 0.0).unwrap();
            let table = riccati_numeric_table(&p, 10.0, 101);
            let mut worst = 0.0f64;
            for (t, numeric) in table {
                let closed = riccati_closed_form(&p, t).unwrap();
                let dev = (closed - numeric).abs() / closed.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(dev);
            }
            assert!(worst < 1e-8, "K={k} alpha={alpha} y0={y0}: deviation {worst}");
        }
    }

    #[test]
    fn envelope_is_constant_at_equilibrium_data() {
        // De Sitter numbers: C0 = 3, h0 = 3.
        for t in [0.0, 0.5, 2.0, 20.0] {
            let w = envelope_w(0.0, 3.0, 3.0, t).unwrap();
            assert!((w - 3.0).abs() < 1e-13, "t={t}: {w}");
        }
    }

    #[test]
    fn degenerate_envelope_underestimates_radiation_expansion() {
        // Vacuum-scalar radiation numbers make C0 = 0; the separate branch
        // gives W = h0/(1 + h0 t), which sits BELOW the exact H, so this
        // branch is diagnostic-only and certificates exclude it.
        let w0 = 1.0;
        let h0 = 3.0 * w0;
        for t in [0.1, 1.0, 5.0] {
            let w = envelope_w(0.0, 0.0, h0, t).unwrap();
            let exact_h = 3.0 * w0 / (1.0 + 2.0 * w0 * t);
            assert!((w - h0 / (1.0 + h0 * t)).abs() < 1e-14);
            assert!(exact_h > w, "t={t}: H={exact_h} W={w}");
        }
    }

    #[test]
    fn envelope_rejects_out_of_domain_inputs() {
        assert!(matches!(envelope_w(0.1, -1.0, 1.0, 0.0), Err(BoundsError::NegativeLambda(_))));
        assert!(matches!(envelope_w(-0.1, 1.0, 1.0, 0.0), Err(BoundsError::NegativeRho0(_))));
    }

    fn regime_data(u0: f64, v0: f64, psi0: f64, lambda: f64) -> InitialData {
        let rho0 = solve_initial_density(u0, v0, psi0, lambda).unwrap();
        InitialData {
            a0: 1.0,
            a_dot0: u0,
            b0: 1.0,
            b_dot0: v0,
            phi0: 0.0,
            phi_dot0: (2.0 * psi0).sqrt(),
            rho0,
            lambda,
        }
    }

    #[test]
    fn regime_trajectory_earns_a_passing_certificate() {
        let data = regime_data(0.9, 1.0, 1e-3, 3.0);
        assert!(data.rho0 > 0.0);
        let traj = integrate(
            &data,
            &SolverConfig { t_end: 20.0, max_samples: 2001, ..Default::default() },
        )
        .unwrap();
        let cert = certify(&traj, &data).unwrap();
        assert!(cert.overall_pass, "{:#?}", cert.conditions);
        // H stays positive, so the diagnostic minimum of u is bounded too.
        assert!(cert.min_u.is_finite());
    }

    #[test]
    fn contracting_b_direction_violates_the_regime() {
        let mut data = regime_data(0.9, 1.0, 1e-3, 3.0);
        data.b_dot0 = -1.0;
        let traj = integrate(
            &data,
            &SolverConfig { t_end: 1.0, max_samples: 11, ..Default::default() },
        )
        .unwrap();
        assert!(matches!(certify(&traj, &data), Err(BoundsError::RegimeViolation(_))));
    }

    #[test]
    fn tampered_density_increase_fails_with_location() {
        let data = regime_data(0.9, 1.0, 1e-3, 3.0);
        let mut traj = integrate(
            &data,
            &SolverConfig { t_end: 2.0, max_samples: 201, ..Default::default() },
        )
        .unwrap();
        let bump = 120;
        traj.states[bump].reduced.rho += 1e-3;
        let cert = certify(&traj, &data).unwrap();
        assert!(!cert.overall_pass);
        let cond = cert
            .conditions
            .iter()
            .find(|c| c.name == "rho_monotone_bounded")
            .unwrap();
        assert!(!cond.passed);
        assert_eq!(cond.worst_time, traj.times[bump]);
    }

    #[test]
    fn comparison_inequality_holds_in_finite_differences() {
        let data = regime_data(0.5, 1.2, 0.02, 2.0);
        let traj = integrate(
            &data,
            &SolverConfig { t_end: 10.0, max_samples: 1001, ..Default::default() },
        )
        .unwrap();
        let bound = 3.0 * data.lambda + EIGHT_PI * data.rho0;
        let slack = 5e-3 * bound.max(1.0);
        for k in 1..traj.len() - 1 {
            let h_prev = traj.diagnostics[k - 1].expansion;
            let h_next = traj.diagnostics[k + 1].expansion;
            let h_here = traj.diagnostics[k].expansion;
            let dt = traj.times[k + 1] - traj.times[k - 1];
            let h_dot = (h_next - h_prev) / dt;
            assert!(
                h_dot <= bound - h_here * h_here + slack,
                "t={}: Hdot {} exceeds {}",
                traj.times[k],
                h_dot,
                bound - h_here * h_here
            );
        }
    }

    #[test]
    fn window_identity_matches_residual_bitwise() {
        let data = regime_data(0.5, 1.2, 0.02, 2.0);
        let traj = integrate(
            &data,
            &SolverConfig { t_end: 5.0, max_samples: 501, ..Default::default() },
        )
        .unwrap();
        for (s, d) in traj.states.iter().zip(&traj.diagnostics) {
            let r = &s.reduced;
            let lhs = quadratic_form(r.u, r.v)
                - data.lambda
                - EIGHT_PI * r.rho
                - EIGHT_PI * r.psi;
            assert_eq!(lhs, d.constraint.residual);
        }
    }
}
