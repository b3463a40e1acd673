//! Piecewise-linear network of one TAB converter and its fixed-step
//! integrator.
//!
//! Unknowns per step, all referred to winding 1:
//! link currents `i21, i31, i23` (from the first-named port to the second),
//! bridge node voltages `u1, u2, u3`, the output capacitor voltage and, for
//! half bridges, the lower divider capacitor voltage of each port.
//!
//! Each bridge is a voltage `c · V_rail` behind its switch resistance, where
//! the leg states fix `c` when every leg is gated. A leg with both switches
//! off conducts through whichever antiparallel diode the current selects,
//! or blocks the winding current altogether when the node voltage sits
//! between the two diode clamps.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::modulation::{LegState, Topology};

pub(crate) const I21: usize = 0;
pub(crate) const I31: usize = 1;
pub(crate) const I23: usize = 2;
pub(crate) const U: usize = 3;
pub(crate) const VC: usize = 6;
pub(crate) const VB: usize = 7;

/// Referred winding current out of each bridge in terms of `(i21, i31, i23)`.
const WINDING: [[f64; 3]; 3] = [[-1.0, -1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, -1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum DiodeMode {
    /// Winding current leaves the bridge.
    Forward,
    /// Winding current enters the bridge.
    Reverse,
    Blocking,
}

/// Rail multipliers a bridge can present for its current leg states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BridgeDrive {
    Fixed(i8),
    /// Some leg is ungated: `forward` applies for positive winding current,
    /// `reverse` for negative, anything between blocks.
    Diode { forward: i8, reverse: i8 },
}

pub(crate) fn bridge_drive(topology: Topology, legs: [LegState; 2]) -> BridgeDrive {
    // Leg A carries the winding current out of its midpoint, leg B back in.
    let level_a = |l: LegState, m: DiodeMode| match (l, m) {
        (LegState::High, _) => 1,
        (LegState::Low, _) => 0,
        (LegState::Off, DiodeMode::Reverse) => 1,
        (LegState::Off, _) => 0,
    };
    let level_b = |l: LegState, m: DiodeMode| match (l, m) {
        (LegState::High, _) => 1,
        (LegState::Low, _) => 0,
        (LegState::Off, DiodeMode::Forward) => 1,
        (LegState::Off, _) => 0,
    };
    let any_off = match topology {
        Topology::FullBridge => legs.contains(&LegState::Off),
        Topology::HalfBridge => legs[0] == LegState::Off,
    };
    let coeff = |m| match topology {
        Topology::FullBridge => level_a(legs[0], m) - level_b(legs[1], m),
        Topology::HalfBridge => level_a(legs[0], m),
    };
    if any_off {
        BridgeDrive::Diode { forward: coeff(DiodeMode::Forward), reverse: coeff(DiodeMode::Reverse) }
    } else {
        BridgeDrive::Fixed(coeff(DiodeMode::Forward))
    }
}

/// Conduction state of one bridge during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Conduction {
    Conduct(i8),
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    ports: [Conduction; 3],
    backward_euler: bool,
}

struct Factored {
    lu: LU<f64, Dyn, Dyn>,
    g: DMatrix<f64>,
}

pub(crate) struct NetworkParams {
    pub topology: Topology,
    /// Voltage referral `n1 / nk` per port.
    pub referral: [f64; 3],
    pub links: [f64; 3],
    pub source_voltages: [f64; 2],
    pub filter_capacitance: f64,
    pub load_resistance: f64,
    pub switch_resistance: f64,
    pub divider_capacitance: f64,
    pub dt: f64,
}

pub(crate) struct Network {
    p: NetworkParams,
    n: usize,
    mass: DMatrix<f64>,
    cache: HashMap<Key, Option<Factored>>,
}

/// Result of one accepted step.
pub(crate) struct StepResult {
    pub z: DVector<f64>,
    pub g: DVector<f64>,
    pub conduction: [Conduction; 3],
}

impl Network {
    pub fn new(p: NetworkParams) -> Self {
        let n = match p.topology {
            Topology::FullBridge => 7,
            Topology::HalfBridge => 10,
        };
        let mut mass = DMatrix::zeros(n, n);
        mass[(I21, I21)] = p.links[0];
        mass[(I31, I31)] = p.links[1];
        mass[(I23, I23)] = p.links[2];
        match p.topology {
            Topology::FullBridge => mass[(VC, VC)] = p.filter_capacitance,
            Topology::HalfBridge => {
                let cd = p.divider_capacitance;
                for k in 0..3 {
                    mass[(VB + k, VB + k)] = 2.0 * cd;
                }
                mass[(VB + 2, VC)] = -cd;
                mass[(VC, VC)] = p.filter_capacitance + cd;
                mass[(VC, VB + 2)] = -cd;
            }
        }
        Self { p, n, mass, cache: HashMap::new() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &NetworkParams {
        &self.p
    }

    fn series_resistance(&self) -> f64 {
        match self.p.topology {
            Topology::FullBridge => 2.0 * self.p.switch_resistance,
            Topology::HalfBridge => self.p.switch_resistance,
        }
    }

    /// Linear right-hand side `g` of `M ẋ = g` for the given conduction.
    fn dynamics(&self, ports: &[Conduction; 3]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        g[(I21, U + 1)] = 1.0;
        g[(I21, U)] = -1.0;
        g[(I31, U + 2)] = 1.0;
        g[(I31, U)] = -1.0;
        g[(I23, U + 1)] = 1.0;
        g[(I23, U + 2)] = -1.0;
        let r = self.p.referral;
        let c3 = match ports[2] {
            Conduction::Conduct(c) => c as f64,
            Conduction::Block => 0.0,
        };
        // Output capacitor: loses the rail current drawn by bridge 3 and the load current.
        for j in 0..3 {
            g[(VC, j)] = -c3 * r[2] * WINDING[2][j];
        }
        g[(VC, VC)] = -1.0 / self.p.load_resistance;
        if self.p.topology == Topology::HalfBridge {
            for k in 0..3 {
                for j in 0..3 {
                    g[(VB + k, j)] = r[k] * WINDING[k][j];
                }
            }
        }
        g
    }

    fn factor(&mut self, key: Key) -> Option<&Factored> {
        if !self.cache.contains_key(&key) {
            let g = self.dynamics(&key.ports);
            let theta = if key.backward_euler { 1.0 } else { 0.5 };
            let mut a = &self.mass - g.clone() * (theta * self.p.dt);
            let r = self.p.referral;
            let rs = self.series_resistance();
            for k in 0..3 {
                let row = U + k;
                a.row_mut(row).fill(0.0);
                match key.ports[k] {
                    Conduction::Block => {
                        for j in 0..3 {
                            a[(row, j)] = WINDING[k][j];
                        }
                    }
                    Conduction::Conduct(c) => {
                        a[(row, U + k)] = 1.0;
                        for j in 0..3 {
                            a[(row, j)] = rs * r[k] * r[k] * WINDING[k][j];
                        }
                        if k == 2 {
                            a[(row, VC)] -= r[k] * c as f64;
                        }
                        if self.p.topology == Topology::HalfBridge {
                            a[(row, VB + k)] += r[k];
                        }
                    }
                }
            }
            let lu = a.lu();
            // A singular system (every bridge blocking) has no unique solution.
            let factored = if lu.is_invertible() { Some(Factored { lu, g }) } else { None };
            self.cache.insert(key, factored);
        }
        self.cache.get(&key).and_then(|f| f.as_ref())
    }

    fn solve(
        &mut self,
        ports: [Conduction; 3],
        backward_euler: bool,
        z_prev: &DVector<f64>,
        g_prev: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let theta = if backward_euler { 1.0 } else { 0.5 };
        let mut b = &self.mass * z_prev + g_prev * ((1.0 - theta) * self.p.dt);
        let r = self.p.referral;
        for k in 0..3 {
            b[U + k] = match ports[k] {
                Conduction::Conduct(c) if k < 2 => r[k] * c as f64 * self.p.source_voltages[k],
                _ => 0.0,
            };
        }
        let f = self.factor(Key { ports, backward_euler })?;
        let z = f.lu.solve(&b)?;
        let g = &f.g * &z;
        Some((z, g))
    }

    pub fn rail(&self, z: &DVector<f64>, port: usize) -> f64 {
        if port < 2 {
            self.p.source_voltages[port]
        } else {
            z[VC]
        }
    }

    /// Actual (unreferred) winding current out of bridge `port`.
    pub fn winding_current(&self, z: &DVector<f64>, port: usize) -> f64 {
        let w: f64 = (0..3).map(|j| WINDING[port][j] * z[j]).sum();
        self.p.referral[port] * w
    }

    /// Actual bridge output voltage.
    pub fn bridge_voltage(&self, z: &DVector<f64>, port: usize) -> f64 {
        z[U + port] / self.p.referral[port]
    }

    /// Offset subtracted from `c · V_rail`: the divider midpoint for half bridges.
    fn midpoint(&self, z: &DVector<f64>, port: usize) -> f64 {
        match self.p.topology {
            Topology::FullBridge => 0.0,
            Topology::HalfBridge => z[VB + port],
        }
    }

    fn consistent(&self, z: &DVector<f64>, port: usize, drive: BridgeDrive, mode: DiodeMode, scale: (f64, f64)) -> Option<DiodeMode> {
        let BridgeDrive::Diode { forward, reverse } = drive else {
            return None;
        };
        let (tol_i, tol_v) = scale;
        match mode {
            DiodeMode::Forward if self.winding_current(z, port) < -tol_i => Some(DiodeMode::Blocking),
            DiodeMode::Reverse if self.winding_current(z, port) > tol_i => Some(DiodeMode::Blocking),
            DiodeMode::Blocking => {
                let rail = self.rail(z, port);
                let mid = self.midpoint(z, port);
                let v = self.bridge_voltage(z, port);
                let lo = forward as f64 * rail - mid;
                let hi = reverse as f64 * rail - mid;
                if v < lo - tol_v {
                    Some(DiodeMode::Forward)
                } else if v > hi + tol_v {
                    Some(DiodeMode::Reverse)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn conduction(drive: BridgeDrive, mode: DiodeMode) -> Conduction {
        match (drive, mode) {
            (BridgeDrive::Fixed(c), _) => Conduction::Conduct(c),
            (BridgeDrive::Diode { .. }, DiodeMode::Blocking) => Conduction::Block,
            (BridgeDrive::Diode { forward, .. }, DiodeMode::Forward) => Conduction::Conduct(forward),
            (BridgeDrive::Diode { reverse, .. }, DiodeMode::Reverse) => Conduction::Conduct(reverse),
        }
    }

    /// Advances one step, resolving diode states by fixed-point sweeps and,
    /// failing that, by enumeration with blocking tried first.
    pub fn step(
        &mut self,
        drives: [BridgeDrive; 3],
        modes: &mut [DiodeMode; 3],
        backward_euler: bool,
        z_prev: &DVector<f64>,
        g_prev: &DVector<f64>,
        scale: (f64, f64),
    ) -> Option<StepResult> {
        let ports_for = |modes: &[DiodeMode; 3]| {
            [0, 1, 2].map(|k| Self::conduction(drives[k], modes[k]))
        };
        let mut last = None;
        for _ in 0..8 {
            let ports = ports_for(modes);
            let Some((z, g)) = self.solve(ports, backward_euler, z_prev, g_prev) else {
                break;
            };
            let mut changed = false;
            for k in 0..3 {
                if let Some(next) = self.consistent(&z, k, drives[k], modes[k], scale) {
                    modes[k] = next;
                    changed = true;
                }
            }
            if !changed {
                return Some(StepResult { z, g, conduction: ports });
            }
            last = Some((z, g, ports));
        }
        let free: Vec<usize> = (0..3).filter(|&k| matches!(drives[k], BridgeDrive::Diode { .. })).collect();
        const ORDER: [DiodeMode; 3] = [DiodeMode::Blocking, DiodeMode::Forward, DiodeMode::Reverse];
        for combo in 0..3usize.pow(free.len() as u32) {
            let mut trial = *modes;
            let mut c = combo;
            for &k in &free {
                trial[k] = ORDER[c % 3];
                c /= 3;
            }
            let ports = ports_for(&trial);
            let Some((z, g)) = self.solve(ports, backward_euler, z_prev, g_prev) else {
                continue;
            };
            if (0..3).all(|k| self.consistent(&z, k, drives[k], trial[k], scale).is_none()) {
                *modes = trial;
                return Some(StepResult { z, g, conduction: ports });
            }
            if last.is_none() {
                last = Some((z, g, ports));
            }
        }
        // No consistent assignment: keep the last fixed-point iterate.
        last.map(|(z, g, conduction)| StepResult { z, g, conduction })
    }
}
