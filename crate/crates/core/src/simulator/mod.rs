//! Time-domain simulation of a TAB converter.
//!
//! Ports 1 and 2 are stiff DC sources; port 3 feeds a capacitor filter and a
//! resistive load. Switches are ideal with a small on-resistance and an
//! antiparallel diode. The network is integrated with a fixed-step
//! trapezoidal rule; steps that begin with a change of gate state or diode
//! conduction use a backward-Euler step instead, which damps the spurious
//! oscillation the trapezoidal rule leaves on algebraic jumps.

mod network;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::modulation::{bridge_gates, GateSchedule, LegDrive, LegState, Modulation, SquarePwmConfig, Topology};
use crate::transformer::TransformerSpec;
use network::{bridge_drive, BridgeDrive, Conduction, DiodeMode, Network, NetworkParams, I21, I23, I31, VB, VC};

pub const DEFAULT_SWITCH_RESISTANCE: f64 = 1e-3;

/// Gate drive of one bridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortSwitching {
    pub modulation: Modulation,
    #[serde(default)]
    pub drive: LegDrive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverterSpec {
    pub topology: Topology,
    /// DC rail of the two delivering ports.
    pub port_dc_voltages: [f64; 2],
    pub transformer: TransformerSpec,
    /// Per-port gating; `None` leaves every switch of that bridge off so
    /// only its diodes can conduct.
    pub switching: [Option<PortSwitching>; 3],
    pub filter_capacitance: f64,
    pub load_resistance: f64,
    pub switch_on_resistance: f64,
    /// Capacitance of each divider capacitor; sized automatically when absent.
    #[serde(default)]
    pub half_bridge_divider_capacitance: Option<f64>,
    #[serde(default)]
    pub dead_time: f64,
}

impl ConverterSpec {
    pub fn validate(&self) -> Result<()> {
        self.transformer.validate()?;
        let positive = [
            ("port 1 voltage", self.port_dc_voltages[0]),
            ("port 2 voltage", self.port_dc_voltages[1]),
            ("filter capacitance", self.filter_capacitance),
            ("load resistance", self.load_resistance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.switch_on_resistance.is_finite() && self.switch_on_resistance >= 0.0) {
            return Err(invalid("switch on-resistance must be non-negative"));
        }
        if let Some(c) = self.half_bridge_divider_capacitance {
            if !(c.is_finite() && c > 0.0) {
                return Err(invalid(format!("divider capacitance must be positive, got {c}")));
            }
        }
        self.base_period().map(|_| ())
    }

    /// Divider capacitance in use: the configured value, or one sized so the
    /// midpoint ripple stays near 1% of the rail at the load's rated power.
    pub fn divider_capacitance(&self) -> f64 {
        self.half_bridge_divider_capacitance.unwrap_or_else(|| {
            let v = self.port_dc_voltages[0];
            let rated = v * v / self.load_resistance;
            let f = 1.0 / self.base_period().unwrap_or(1.0);
            100.0 * rated / (v * v * f)
        })
    }

    /// Common period of every bridge's gating pattern.
    pub fn base_period(&self) -> Result<f64> {
        let periods: Vec<f64> = self.switching.iter().flatten().map(|s| s.modulation.period()).collect();
        let Some(&longest) = periods.iter().max_by(|a, b| a.total_cmp(b)) else {
            return Err(invalid("at least one bridge must be switched"));
        };
        for p in &periods {
            let ratio = longest / p;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                return Err(invalid(format!("bridge periods {p} s and {longest} s are incommensurate")));
            }
        }
        Ok(longest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub steps_per_period: usize,
    pub max_periods: usize,
    pub steady_tolerance: f64,
    /// Number of final periods kept in the trace.
    pub capture_periods: usize,
    pub initial_output_voltage: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            steps_per_period: 2000,
            max_periods: 2000,
            steady_tolerance: 1e-4,
            capture_periods: 1,
            initial_output_voltage: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period < 200 {
            return Err(invalid(format!("steps_per_period must be at least 200, got {}", self.steps_per_period)));
        }
        if !(self.steady_tolerance > 0.0) {
            return Err(invalid("steady_tolerance must be positive"));
        }
        if self.capture_periods == 0 || self.max_periods < self.capture_periods {
            return Err(invalid("capture_periods must be in [1, max_periods]"));
        }
        if !self.initial_output_voltage.is_finite() {
            return Err(invalid("initial output voltage must be finite"));
        }
        Ok(())
    }
}

pub const CHANNELS: [&str; 11] =
    ["t_s", "v_bridge1", "v_bridge2", "v_bridge3", "i_l21", "i_l31", "i_l23", "v_out", "p1", "p2", "p3"];

/// Uniformly sampled simulation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformTrace {
    pub dt: f64,
    /// Frequency of the gating pattern; the trace spans whole periods of it.
    pub base_frequency: f64,
    pub names: Vec<String>,
    pub channels: Vec<Vec<f64>>,
    /// False when the run hit `max_periods` before settling.
    pub steady: bool,
    pub periods_run: usize,
    /// Voltage referral `n1 / nk` of each port, for link-power evaluation.
    #[serde(default = "unit_referral")]
    pub referral: [f64; 3],
}

fn unit_referral() -> [f64; 3] {
    [1.0; 3]
}

impl WaveformTrace {
    pub fn new(dt: f64, base_frequency: f64, names: Vec<String>, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("trace dt must be positive"));
        }
        if names.len() != channels.len() {
            return Err(invalid("one name per channel required"));
        }
        if channels.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(invalid("trace channels differ in length"));
        }
        Ok(Self { dt, base_frequency, names, channels, steady: true, periods_run: 0, referral: unit_referral() })
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.channels[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn samples_per_period(&self) -> usize {
        ((1.0 / (self.base_frequency * self.dt)).round() as usize).max(1)
    }

    /// The last full period of `name`.
    pub fn final_period(&self, name: &str) -> Option<&[f64]> {
        let ch = self.channel(name)?;
        let n = self.samples_per_period();
        (ch.len() >= n).then(|| &ch[ch.len() - n..])
    }

    /// CSV with a header row; values use Rust's shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = self.channels.iter().map(|c| format!("{}", c[i])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn final_mean(trace: &WaveformTrace, name: &str) -> Result<f64> {
    let data = trace
        .final_period(name)
        .ok_or_else(|| Error::Precondition(format!("trace lacks a full period of channel {name}")))?;
    Ok(data.iter().sum::<f64>() / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOutput {
    pub volts: f64,
    pub warning: Option<String>,
}

/// Mean output voltage over the final period.
pub fn steady_state_output(trace: &WaveformTrace) -> Result<SteadyOutput> {
    let volts = final_mean(trace, "v_out")?;
    let warning = (!trace.steady)
        .then(|| format!("output did not settle within {} periods", trace.periods_run));
    Ok(SteadyOutput { volts, warning })
}

/// Mean DC-side power of `port` (1-based) over the final period, positive
/// when the port delivers.
pub fn port_power_measure(trace: &WaveformTrace, port: usize) -> Result<f64> {
    if !(1..=3).contains(&port) {
        return Err(Error::Precondition(format!("port must be 1, 2 or 3, got {port}")));
    }
    final_mean(trace, &format!("p{port}"))
}

/// Mean power carried by one link inductor over the final period, from the
/// first-named port to the second (`"21"` flows from port 2 to port 1).
/// Link currents in the trace are referred to winding 1.
pub fn link_power_measure(trace: &WaveformTrace, link: &str) -> Result<f64> {
    let (from, current) = match link {
        "21" => (1, "i_l21"),
        "31" => (2, "i_l31"),
        "23" => (1, "i_l23"),
        _ => return Err(Error::Precondition(format!("unknown link {link}"))),
    };
    let short = || Error::Precondition("trace lacks a full period".into());
    let v = trace.final_period(&format!("v_bridge{}", from + 1)).ok_or_else(short)?;
    let i = trace.final_period(current).ok_or_else(short)?;
    let r = trace.referral[from];
    Ok(r * v.iter().zip(i).map(|(v, i)| v * i).sum::<f64>() / v.len() as f64)
}

struct Gates {
    topology: Topology,
    schedules: [Option<GateSchedule>; 3],
}

impl Gates {
    fn drives(&self, t: f64) -> [BridgeDrive; 3] {
        [0, 1, 2].map(|k| {
            let legs = self.schedules[k].as_ref().map_or([LegState::Off; 2], |s| s.leg_states(t));
            bridge_drive(self.topology, legs)
        })
    }
}

/// Integrates the converter until the output settles or `max_periods` pass
/// and returns the final captured periods.
pub fn simulate(spec: &ConverterSpec, sim: &SimConfig) -> Result<WaveformTrace> {
    spec.validate()?;
    sim.validate()?;
    let period = spec.base_period()?;
    let steps = sim.steps_per_period;
    let dt = period / steps as f64;
    let referral = [0, 1, 2].map(|k| spec.transformer.referral(k));
    let mut schedules: [Option<GateSchedule>; 3] = [None, None, None];
    for (k, s) in spec.switching.iter().enumerate() {
        if let Some(s) = s {
            schedules[k] = Some(bridge_gates(spec.topology, &s.modulation, spec.dead_time, s.drive)?);
        }
    }
    let gates = Gates { topology: spec.topology, schedules };
    let cd = spec.divider_capacitance();
    let mut net = Network::new(NetworkParams {
        topology: spec.topology,
        referral,
        links: spec.transformer.links,
        source_voltages: spec.port_dc_voltages,
        filter_capacitance: spec.filter_capacitance,
        load_resistance: spec.load_resistance,
        switch_resistance: spec.switch_on_resistance,
        divider_capacitance: cd,
        dt,
    });

    let rail = spec.port_dc_voltages[0].max(spec.port_dc_voltages[1]).max(sim.initial_output_voltage.abs());
    let l_min = spec.transformer.links.iter().cloned().fold(f64::INFINITY, f64::min);
    let tolerances = (1e-9 * rail * period / l_min, 1e-9 * rail);
    let limit = 1e6 * rail;

    let mut z = DVector::zeros(net.size());
    z[VC] = sim.initial_output_voltage;
    if spec.topology == Topology::HalfBridge {
        z[VB] = 0.5 * spec.port_dc_voltages[0];
        z[VB + 1] = 0.5 * spec.port_dc_voltages[1];
        z[VB + 2] = 0.5 * sim.initial_output_voltage;
    }
    let mut g = DVector::zeros(net.size());
    let mut modes = [DiodeMode::Blocking; 3];
    let mut prev_drives: Option<[BridgeDrive; 3]> = None;
    let mut prev_conduction: Option<[Conduction; 3]> = None;

    let capture = sim.capture_periods;
    let mut ring: Vec<Vec<Vec<f64>>> = Vec::with_capacity(capture);
    let mut means: Vec<f64> = Vec::new();
    let mut settled_for = 0;
    let mut steady = false;
    let mut periods_run = 0;

    for p in 0..sim.max_periods {
        let mut rows = vec![Vec::with_capacity(steps); CHANNELS.len()];
        let mut vc_sum = 0.0;
        for s in 0..steps {
            let n = p * steps + s;
            let t0 = n as f64 * dt;
            let drives = gates.drives((t0 + 0.5 * dt).rem_euclid(period));
            let mut backward = prev_drives != Some(drives);
            let mut trial_modes = modes;
            let mut res = net
                .step(drives, &mut trial_modes, backward, &z, &g, tolerances)
                .ok_or(Error::SimulationDiverged { time: t0 })?;
            if !backward && prev_conduction != Some(res.conduction) {
                backward = true;
                trial_modes = modes;
                res = net
                    .step(drives, &mut trial_modes, backward, &z, &g, tolerances)
                    .ok_or(Error::SimulationDiverged { time: t0 })?;
            }
            modes = trial_modes;
            let zn = res.z;
            if zn.iter().any(|x| !x.is_finite() || x.abs() > limit) {
                return Err(Error::SimulationDiverged { time: t0 + dt });
            }

            let power = port_step_power(&net, spec.topology, &res.conduction, &z, &zn, dt);
            let row = &mut rows;
            row[0].push(t0 + dt);
            for k in 0..3 {
                row[1 + k].push(net.bridge_voltage(&zn, k));
                row[8 + k].push(power[k]);
            }
            row[4].push(zn[I21]);
            row[5].push(zn[I31]);
            row[6].push(zn[I23]);
            row[7].push(zn[VC]);
            vc_sum += zn[VC];

            prev_drives = Some(drives);
            prev_conduction = Some(res.conduction);
            z = zn;
            g = res.g;
        }
        periods_run = p + 1;
        if ring.len() == capture {
            ring.remove(0);
        }
        ring.push(rows);

        let mean = vc_sum / steps as f64;
        if let Some(&last) = means.last() {
            let scale = mean.abs().max(1e-6 * rail);
            if (mean - last).abs() / scale < sim.steady_tolerance {
                settled_for += 1;
            } else {
                settled_for = 0;
            }
        }
        means.push(mean);
        if settled_for >= 3 && periods_run >= capture {
            steady = true;
            break;
        }
    }

    let channels: Vec<Vec<f64>> =
        (0..CHANNELS.len()).map(|c| ring.iter().flat_map(|rows| rows[c].iter().copied()).collect()).collect();
    let mut trace =
        WaveformTrace::new(dt, 1.0 / period, CHANNELS.iter().map(|s| s.to_string()).collect(), channels)?;
    trace.steady = steady;
    trace.periods_run = periods_run;
    trace.referral = referral;
    Ok(trace)
}

/// DC-side power of each bridge averaged over one step.
fn port_step_power(
    net: &Network,
    topology: Topology,
    conduction: &[Conduction; 3],
    z0: &DVector<f64>,
    z1: &DVector<f64>,
    dt: f64,
) -> [f64; 3] {
    let cd = net.params().divider_capacitance;
    [0, 1, 2].map(|k| {
        let c = match conduction[k] {
            Conduction::Conduct(c) => c as f64,
            Conduction::Block => 0.0,
        };
        let w = 0.5 * (net.winding_current(z0, k) + net.winding_current(z1, k));
        let rail = 0.5 * (net.rail(z0, k) + net.rail(z1, k));
        let current = match topology {
            Topology::FullBridge => c * w,
            Topology::HalfBridge => {
                // Upper divider capacitor current drawn from the rail.
                let upper = (net.rail(z1, k) - z1[VB + k]) - (net.rail(z0, k) - z0[VB + k]);
                c * w + cd * upper / dt
            }
        };
        rail * current
    })
}

/// Steady output voltage for each delivering-port duty on a half-bridge
/// converter. Both switched delivering bridges receive the duty.
pub fn half_bridge_duty_response(spec: &ConverterSpec, sim: &SimConfig, duties: &[f64]) -> Result<Vec<(f64, f64)>> {
    if spec.topology != Topology::HalfBridge {
        return Err(Error::Precondition("half_bridge_duty_response needs a half-bridge converter".into()));
    }
    duties
        .iter()
        .map(|&d| {
            let run = with_delivering_duty(spec, d)?;
            let trace = simulate(&run, sim)?;
            Ok((d, steady_state_output(&trace)?.volts))
        })
        .collect()
}

/// Copy of `spec` with the square-PWM duty of ports 1 and 2 replaced.
///
/// The phase moves with the duty so each conduction pulse stays centred
/// where it was; duty then changes only the pulse width, not its timing
/// relative to the other bridges.
pub fn with_delivering_duty(spec: &ConverterSpec, duty: f64) -> Result<ConverterSpec> {
    let mut out = spec.clone();
    for s in out.switching[..2].iter_mut().flatten() {
        match &mut s.modulation {
            Modulation::Square(c) => {
                let phase = c.phase + (c.duty - duty) * std::f64::consts::FRAC_PI_2;
                *c = SquarePwmConfig::new(c.frequency, duty, phase, c.amplitude)?;
            }
            Modulation::Spwm(_) => return Err(invalid("duty applies only to square-PWM bridges")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
