//! Analytic phase-shift power flow between the three ports.
//!
//! Link powers are named by direction: `P21` flows from port 2 to port 1,
//! `P31` from 3 to 1, `P23` from 2 to 3, each driven by the phase lead of
//! the source bridge over the destination, `φij = δi − δj`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::modulation::wrap_phase;

/// Inter-port phase shifts in radians, each in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSet {
    pub phi21: f64,
    pub phi31: f64,
    pub phi23: f64,
}

impl PhaseSet {
    pub fn new(phi21: f64, phi31: f64, phi23: f64) -> Self {
        Self { phi21: wrap_phase(phi21), phi31: wrap_phase(phi31), phi23: wrap_phase(phi23) }
    }

    /// From absolute bridge phase leads `(δ1, δ2, δ3)`.
    pub fn from_bridge_phases(delta: [f64; 3]) -> Self {
        let [d1, d2, d3] = delta;
        Self::new(d2 - d1, d3 - d1, d2 - d3)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.phi21, self.phi31, self.phi23]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// `P1 = P21 + P31`, `P2 = P21 + P23`, `P3 = P23 − P31`, exactly as the
    /// published model writes them. Does not conserve power.
    PaperLiteral,
    /// Each port's net output is the sum of its outgoing link powers, with
    /// `Pij = −Pji`; the three port powers always sum to zero.
    #[default]
    ConservationConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    /// `(P21, P31, P23)` in watts.
    pub link_powers: [f64; 3],
    /// `(P1, P2, P3)`, positive when the port delivers power into the converter.
    pub port_net: [f64; 3],
    pub aggregation_mode: AggregationMode,
}

/// Phase-shift link power `S·φ·(1 − |φ|/π)`, odd in `φ`.
pub fn link_power(s: f64, phi: f64) -> f64 {
    s * phi * (1.0 - phi.abs() / PI)
}

/// `d/dφ` of [`link_power`].
fn link_power_slope(s: f64, phi: f64) -> f64 {
    s * (1.0 - 2.0 * phi.abs() / PI)
}

pub fn port_powers(s: [f64; 3], phases: &PhaseSet, mode: AggregationMode) -> PowerSolution {
    let [s21, s31, s23] = s;
    let p21 = link_power(s21, phases.phi21);
    let p31 = link_power(s31, phases.phi31);
    let p23 = link_power(s23, phases.phi23);
    let port_net = match mode {
        AggregationMode::PaperLiteral => [p21 + p31, p21 + p23, p23 - p31],
        AggregationMode::ConservationConsistent => {
            let p1 = -p21 - p31;
            let p2 = p21 + p23;
            // Closing the sum this way makes it exactly zero in floating point.
            [p1, p2, -(p1 + p2)]
        }
    };
    PowerSolution { link_powers: [p21, p31, p23], port_net, aggregation_mode: mode }
}

/// Largest power a link with coefficient `s` can carry (at `φ = π/2`).
pub fn max_link_power(s: f64) -> f64 {
    s * FRAC_PI_4
}

/// The phase shift with `|φ| ≤ π/2` that transfers `target` watts.
pub fn invert_link_power(s: f64, target: f64) -> Result<f64> {
    if target == 0.0 {
        return Ok(0.0);
    }
    let max = max_link_power(s);
    if !(s > 0.0) || target.abs() > max {
        return Err(Error::Infeasible {
            reason: format!("link power {target} W exceeds the link limit"),
            max_watts: max.max(0.0),
        });
    }
    let x = (target.abs() / max).min(1.0);
    // (π/2)(1 − √(1 − x)) rewritten without cancellation for small x.
    let phi = FRAC_PI_2 * x / (1.0 + (1.0 - x).sqrt());
    Ok(phi.copysign(target))
}

/// Output of [`dispatch_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    /// Bridge phase leads `(δ1, δ2, δ3)` with `δ1 = 0`.
    pub bridge_phases: [f64; 3],
    pub phases: PhaseSet,
    pub power: PowerSolution,
    pub iterations: usize,
    pub residual: f64,
}

const DISPATCH_TOLERANCE: f64 = 1e-9;
const DISPATCH_MAX_ITERATIONS: usize = 100;
const FEASIBILITY_MARGIN: f64 = 0.999;

fn dispatch_residual(s: [f64; 3], d2: f64, d3: f64, grid: f64, load: f64) -> [f64; 2] {
    let sol = port_powers(s, &PhaseSet::from_bridge_phases([0.0, d2, d3]), AggregationMode::ConservationConsistent);
    [sol.port_net[0] - grid, sol.port_net[2] + load]
}

/// Decoupled starting point: pick the link flows that satisfy the port
/// balances with the lowest worst-case link utilization, then invert each
/// link on its own. Returns `(δ2, δ3)` and that utilization.
fn decoupled_guess(s: [f64; 3], grid: f64, load: f64) -> Result<(f64, f64, f64)> {
    let caps = s.map(max_link_power);
    // Flows: 2→1 = t, 1→3 = grid + t, 2→3 = load − grid − t.
    let utilization = |t: f64| {
        (t.abs() / caps[0]).max((grid + t).abs() / caps[1]).max((load - grid - t).abs() / caps[2])
    };
    let span = grid.abs() + load.abs() + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if utilization(a) <= utilization(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let t = 0.5 * (lo + hi);
    // Snap to an exact zero flow when it is as good; keeps symmetric cases exact.
    let t = if utilization(0.0) <= utilization(t) { 0.0 } else { t };
    let u = utilization(t);
    if u > FEASIBILITY_MARGIN {
        let into_load = caps[1] + caps[2];
        let out_of_grid = caps[0] + caps[1];
        let (reason, max_watts) = if load.abs() > into_load {
            ("load power exceeds what ports 1 and 2 can deliver", into_load)
        } else if grid.abs() > out_of_grid {
            ("grid power exceeds what port 1 can exchange", out_of_grid)
        } else {
            ("requested flows exceed the link limits", into_load)
        };
        return Err(Error::Infeasible { reason: reason.into(), max_watts });
    }
    let d2 = invert_link_power(s[0], t)?;
    let d3 = invert_link_power(s[1], -(grid + t))?;
    Ok((d2, d3, u))
}

/// Finds bridge phases with `δ1 = 0` such that port 1 delivers `grid`
/// watts and port 3 absorbs `load` watts; port 2 covers the balance.
///
/// Damped Newton iteration on the two port equations with the analytic
/// Jacobian, stopping once both residuals are below 1e-9 W.
pub fn dispatch_solve(s: [f64; 3], grid: f64, load: f64) -> Result<DispatchSolution> {
    if s.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid(format!("dispatch needs positive link coefficients, got {s:?}")));
    }
    if !grid.is_finite() || !load.is_finite() {
        return Err(invalid("dispatch targets must be finite"));
    }
    let (mut d2, mut d3, _) = decoupled_guess(s, grid, load)?;
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let mut r = dispatch_residual(s, d2, d3, grid, load);
    let mut iterations = 0;
    while norm(r) >= DISPATCH_TOLERANCE {
        if iterations == DISPATCH_MAX_ITERATIONS {
            return Err(Error::NonConvergent { iterations, residual: norm(r) });
        }
        iterations += 1;
        let g21 = link_power_slope(s[0], wrap_phase(d2));
        let g31 = link_power_slope(s[1], wrap_phase(d3));
        let g23 = link_power_slope(s[2], wrap_phase(d2 - d3));
        // ∂(P1, P3)/∂(δ2, δ3)
        let j = [[-g21, -g31], [-g23, g31 + g23]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-12 * (s[0] * s[1] + s[1] * s[2] + s[2] * s[0]) {
            return Err(Error::NonConvergent { iterations, residual: norm(r) });
        }
        let step2 = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let step3 = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=10 {
            let (n2, n3) = (d2 - lambda * step2, d3 - lambda * step3);
            let nr = dispatch_residual(s, n2, n3, grid, load);
            if norm(nr) < norm(r) {
                d2 = n2;
                d3 = n3;
                r = nr;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // Stalled at round-off level; accept if already within tolerance.
            if norm(r) < DISPATCH_TOLERANCE {
                break;
            }
            return Err(Error::NonConvergent { iterations, residual: norm(r) });
        }
    }
    let bridge_phases = [0.0, wrap_phase(d2), wrap_phase(d3)];
    let phases = PhaseSet::from_bridge_phases(bridge_phases);
    let power = port_powers(s, &phases, AggregationMode::ConservationConsistent);
    Ok(DispatchSolution { bridge_phases, phases, power, iterations, residual: norm(r) })
}

/// Output voltage under delivering-bridge duty control:
/// `V_out = D · V_in · n_out / n_in`.
pub fn duty_voltage(duty: f64, v_in: f64, n_in: f64, n_out: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&duty) {
        return Err(invalid(format!("duty must lie in [0, 1], got {duty}")));
    }
    if !(n_in > 0.0 && n_out > 0.0) {
        return Err(invalid("turn counts must be positive"));
    }
    Ok(duty * v_in * n_out / n_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // 100 V on every port, 100 µH links, 10 kHz.
    const S: f64 = 1591.5494309189535;

    #[test]
    fn link_power_examples() {
        assert!((link_power(S, FRAC_PI_2) - 1250.0).abs() < 1e-9);
        assert_eq!(link_power(1234.0, 0.0), 0.0);
        assert!((link_power(S, FRAC_PI_4) - 937.5).abs() < 1e-9);
        assert!((link_power(S, FRAC_PI_4) - 0.75 * link_power(S, FRAC_PI_2)).abs() < 1e-9);
    }

    #[test]
    fn port_power_examples() {
        let phases = PhaseSet::from_bridge_phases([0.0, 0.0, -FRAC_PI_4]);
        let sol = port_powers([S; 3], &phases, AggregationMode::ConservationConsistent);
        assert!((sol.port_net[0] - 937.5).abs() < 1e-9);
        assert!((sol.port_net[1] - 937.5).abs() < 1e-9);
        assert!((sol.port_net[2] + 1875.0).abs() < 1e-9);

        let zero = port_powers([S; 3], &PhaseSet::new(0.0, 0.0, 0.0), AggregationMode::ConservationConsistent);
        assert_eq!(zero.link_powers, [0.0; 3]);
        assert_eq!(zero.port_net, [0.0; 3]);

        let literal = port_powers([S; 3], &PhaseSet::new(FRAC_PI_4, FRAC_PI_4, 0.0), AggregationMode::PaperLiteral);
        assert!((literal.port_net[0] - 1875.0).abs() < 1e-9);
        assert!((literal.port_net[1] - 937.5).abs() < 1e-9);
        assert!((literal.port_net[2] + 937.5).abs() < 1e-9);
    }

    #[test]
    fn inversion_examples() {
        assert!((invert_link_power(S, 1250.0).unwrap() - FRAC_PI_2).abs() < 1e-7);
        assert_eq!(invert_link_power(S, 0.0).unwrap(), 0.0);
        // Both quadratic roots carry 937.5 W; the inverse picks the small one.
        assert!((link_power(S, 3.0 * FRAC_PI_4) - 937.5).abs() < 1e-9);
        assert!((invert_link_power(S, 937.5).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert!((invert_link_power(S, -937.5).unwrap() + FRAC_PI_4).abs() < 1e-12);
        match invert_link_power(S, 1300.0) {
            Err(Error::Infeasible { max_watts, .. }) => assert!((max_watts - 1250.0).abs() < 1e-9),
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn dispatch_examples() {
        let sol = dispatch_solve([S; 3], 937.5, 1875.0).unwrap();
        assert!(sol.bridge_phases[1].abs() < 1e-9);
        assert!((sol.bridge_phases[2] + FRAC_PI_4).abs() < 1e-9);

        let sol = dispatch_solve([S; 3], 0.0, 0.0).unwrap();
        assert_eq!(sol.bridge_phases, [0.0; 3]);

        let sol = dispatch_solve([S; 3], 0.0, 1875.0).unwrap();
        assert!(sol.power.port_net[0].abs() < 1e-9);
        assert!((sol.power.port_net[2] + 1875.0).abs() < 1e-9);

        match dispatch_solve([S; 3], 0.0, 1e6) {
            Err(Error::Infeasible { max_watts, .. }) => assert!((max_watts - 2500.0).abs() < 1e-9),
            other => panic!("expected Infeasible, got {other:?}"),
        }
        assert!(dispatch_solve([S, 0.0, S], 1.0, 1.0).is_err());
    }

    #[test]
    fn duty_voltage_examples() {
        assert_eq!(duty_voltage(0.5, 15.0, 1.0, 1.0).unwrap(), 7.5);
        assert_eq!(duty_voltage(0.0, 15.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(duty_voltage(1.0, 100.0, 1.0, 2.0).unwrap(), 200.0);
        assert!(duty_voltage(1.5, 100.0, 1.0, 1.0).is_err());
        assert!(duty_voltage(0.5, 100.0, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn mirror_symmetry(s in 1.0f64..1e4, phi in 0.0f64..PI) {
            let a = link_power(s, phi);
            let b = link_power(s, PI - phi);
            prop_assert!((a - b).abs() <= 1e-9 * s);
        }

        #[test]
        fn odd_symmetry(s in 1.0f64..1e4, phi in 0.0f64..PI) {
            prop_assert_eq!(link_power(s, -phi), -link_power(s, phi));
        }

        #[test]
        fn increasing_to_quarter_wave(s in 1.0f64..1e4, a in 0.0f64..FRAC_PI_2, b in 0.0f64..FRAC_PI_2) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(link_power(s, lo) < link_power(s, hi));
            prop_assert!((link_power(s, FRAC_PI_2) - s * FRAC_PI_4).abs() <= 1e-12 * s);
        }

        #[test]
        fn conservation_is_exact(
            s in proptest::array::uniform3(1.0f64..5e3),
            d in proptest::array::uniform3(-PI..PI),
        ) {
            let sol = port_powers(s, &PhaseSet::from_bridge_phases(d), AggregationMode::ConservationConsistent);
            prop_assert_eq!(sol.port_net.iter().sum::<f64>(), 0.0);
            prop_assert_eq!(sol.port_net[0] + sol.port_net[1] + sol.port_net[2], 0.0);
        }

        #[test]
        fn duty_voltage_is_linear(d in 0.0f64..0.5, a in 0.0f64..2.0, v in 1.0f64..500.0) {
            let base = duty_voltage(d, v, 1.0, 1.5).unwrap();
            let scaled = duty_voltage(a * d, v, 1.0, 1.5).unwrap();
            prop_assert!((scaled - a * base).abs() <= 1e-12 * v);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn inversion_round_trip(s in 1.0f64..1e4, frac in -1.0f64..=1.0) {
            let p = frac * max_link_power(s);
            let phi = invert_link_power(s, p).unwrap();
            prop_assert!(phi.abs() <= FRAC_PI_2);
            let back = link_power(s, phi);
            prop_assert!((back - p).abs() <= 1e-12 * p.abs().max(f64::MIN_POSITIVE));
        }
    }
}
