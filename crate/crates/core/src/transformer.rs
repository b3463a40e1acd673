//! Three-winding high-frequency transformer, modeled as the delta network
//! of link inductances between the windings. Magnetizing inductance is
//! taken as infinite.
//!
//! Link inductances are referred to winding 1.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerSpec {
    /// Winding turns `(n1, n2, n3)`.
    pub turns: [f64; 3],
    /// Delta link inductances `(L21, L31, L23)` in henries, referred to winding 1.
    pub links: [f64; 3],
}

impl TransformerSpec {
    pub fn new(turns: [f64; 3], links: [f64; 3]) -> Result<Self> {
        let spec = Self { turns, links };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.turns.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return Err(invalid(format!("winding turns must be positive, got {:?}", self.turns)));
        }
        if self.links.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(invalid(format!("link inductances must be positive, got {:?}", self.links)));
        }
        Ok(())
    }

    /// Voltage ratio taking winding `port` (0-based) to the winding-1 side.
    pub fn referral(&self, port: usize) -> f64 {
        self.turns[0] / self.turns[port]
    }
}

/// Ideal-transformer voltage referral: `v · to_turns / from_turns`.
pub fn refer_voltage(v: f64, from_turns: f64, to_turns: f64) -> f64 {
    v * (to_turns / from_turns)
}

/// Star-to-delta conversion of per-winding leakage `(L1, L2, L3)` into link
/// inductances `(L21, L31, L23)`: each link is `(L1·L2 + L2·L3 + L3·L1)`
/// divided by the branch of the winding it does not touch.
pub fn delta_from_star(star: [f64; 3]) -> Result<[f64; 3]> {
    if star.iter().any(|&l| !(l > 0.0)) {
        return Err(invalid(format!("star branches must be positive, got {star:?}")));
    }
    let [l1, l2, l3] = star;
    let sum = l1 * l2 + l2 * l3 + l3 * l1;
    Ok([sum / l3, sum / l2, sum / l1])
}

/// Power-transfer coefficients `(S21, S31, S23)` in watts per radian for
/// square-wave phase-shift operation at switching frequency `fs`.
pub fn link_coefficients(spec: &TransformerSpec, port_voltages: [f64; 3], fs: f64) -> Result<[f64; 3]> {
    spec.validate()?;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(invalid(format!("switching frequency must be positive, got {fs}")));
    }
    if port_voltages.iter().any(|&v| !(v >= 0.0)) {
        return Err(invalid(format!("port voltages must be non-negative, got {port_voltages:?}")));
    }
    let omega = TAU * fs;
    let [n1, n2, n3] = spec.turns;
    let [v1, v2, v3] = port_voltages;
    let [l21, l31, l23] = spec.links;
    Ok([
        v2 * v1 / (n2 * n1 * omega * l21),
        v3 * v1 / (n3 * n1 * omega * l31),
        v3 * v2 / (n3 * n2 * omega * l23),
    ])
}
