//! Gate-drive waveform generation: square-wave PWM with duty and phase,
//! sinusoidal PWM by carrier comparison, and per-switch gate schedules for
//! full- and half-bridge legs.
//!
//! Phase angles here are *delays*: a phase of `p` shifts the whole pattern
//! later in time by `p / 2π` of a period.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Bipolar square-wave PWM for one bridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquarePwmConfig {
    pub frequency: f64,
    pub duty: f64,
    pub phase: f64,
    pub amplitude: f64,
}

impl SquarePwmConfig {
    pub fn new(frequency: f64, duty: f64, phase: f64, amplitude: f64) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(invalid(format!("switching frequency must be positive, got {frequency}")));
        }
        if !(0.0..=1.0).contains(&duty) {
            return Err(invalid(format!("duty must lie in [0, 1], got {duty}")));
        }
        if !phase.is_finite() || !amplitude.is_finite() {
            return Err(invalid("phase and amplitude must be finite"));
        }
        Ok(Self { frequency, duty, phase: wrap_phase(phase), amplitude })
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// Time delay introduced by `phase`.
    pub fn delay(&self) -> f64 {
        self.phase / TAU * self.period()
    }
}

/// Bridge output of a left-aligned symmetric bipolar square wave at time `t`.
///
/// Each half-period starts with a conduction span of `duty · period / 2`
/// (positive in the first half, negative in the second) and freewheels at
/// zero for the remainder.
pub fn square_pwm(config: &SquarePwmConfig, t: f64) -> f64 {
    let period = config.period();
    let half = 0.5 * period;
    let tau = (t - config.delay()).rem_euclid(period);
    let span = config.duty * half;
    if tau < half {
        if tau < span {
            config.amplitude
        } else {
            0.0
        }
    } else if tau - half < span {
        -config.amplitude
    } else {
        0.0
    }
}

/// Sinusoidal PWM by sine/triangle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpwmConfig {
    pub carrier_frequency: f64,
    pub reference_frequency: f64,
    pub sine_amplitude: f64,
    pub triangle_amplitude: f64,
    pub dc_rail: f64,
    /// Delay of the whole pattern, as an angle of the reference period.
    #[serde(default)]
    pub phase: f64,
}

impl SpwmConfig {
    pub fn new(
        carrier_frequency: f64,
        reference_frequency: f64,
        sine_amplitude: f64,
        triangle_amplitude: f64,
        dc_rail: f64,
    ) -> Result<Self> {
        let cfg = Self {
            carrier_frequency,
            reference_frequency,
            sine_amplitude,
            triangle_amplitude,
            dc_rail,
            phase: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = wrap_phase(phase);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference_frequency > 0.0 && self.reference_frequency.is_finite()) {
            return Err(invalid("reference frequency must be positive"));
        }
        if !(self.carrier_frequency >= self.reference_frequency && self.carrier_frequency.is_finite()) {
            return Err(invalid(format!(
                "carrier frequency {} must be at least the reference frequency {}",
                self.carrier_frequency, self.reference_frequency
            )));
        }
        if !(self.sine_amplitude > 0.0 && self.triangle_amplitude > 0.0 && self.dc_rail > 0.0) {
            return Err(invalid("SPWM amplitudes and rail must be positive"));
        }
        Ok(())
    }

    pub fn carrier_ratio(&self) -> f64 {
        self.carrier_frequency / self.reference_frequency
    }

    pub fn modulation_index(&self) -> f64 {
        self.sine_amplitude / self.triangle_amplitude
    }

    pub fn period(&self) -> f64 {
        1.0 / self.reference_frequency
    }

    pub fn delay(&self) -> f64 {
        self.phase / TAU * self.period()
    }

    pub fn sine(&self, t: f64) -> f64 {
        self.sine_amplitude * (TAU * self.reference_frequency * (t - self.delay())).sin()
    }

    /// Symmetric triangle carrier, at its positive peak when the pattern starts.
    pub fn triangle(&self, t: f64) -> f64 {
        let x = ((t - self.delay()) * self.carrier_frequency).rem_euclid(1.0);
        let a = self.triangle_amplitude;
        if x < 0.5 {
            a * (1.0 - 4.0 * x)
        } else {
            a * (4.0 * x - 3.0)
        }
    }

    /// Comparator output sign: `+1` while the sine is at or below the carrier.
    pub fn polarity(&self, t: f64) -> f64 {
        if self.sine(t) <= self.triangle(t) {
            1.0
        } else {
            -1.0
        }
    }
}

/// SPWM bridge output: `+dc_rail` while sine ≤ triangle, `-dc_rail` otherwise.
pub fn spwm(config: &SpwmConfig, t: f64) -> f64 {
    config.polarity(t) * config.dc_rail
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationIndex {
    pub value: f64,
    /// Set above 1, where the fundamental is no longer linear in the index.
    pub overmodulated: bool,
}

pub fn modulation_index(sine_amplitude: f64, triangle_amplitude: f64) -> Result<ModulationIndex> {
    if !(triangle_amplitude > 0.0) {
        return Err(invalid(format!("triangle amplitude must be positive, got {triangle_amplitude}")));
    }
    let value = sine_amplitude / triangle_amplitude;
    Ok(ModulationIndex { value, overmodulated: value > 1.0 })
}

/// Either modulation scheme a bridge can run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulation {
    Square(SquarePwmConfig),
    Spwm(SpwmConfig),
}

impl Modulation {
    pub fn period(&self) -> f64 {
        match self {
            Modulation::Square(c) => c.period(),
            Modulation::Spwm(c) => c.period(),
        }
    }

    pub fn output(&self, t: f64) -> f64 {
        match self {
            Modulation::Square(c) => square_pwm(c, t),
            Modulation::Spwm(c) => spwm(c, t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    FullBridge,
    HalfBridge,
}

impl Topology {
    pub fn switch_count(self) -> usize {
        match self {
            Topology::FullBridge => 4,
            Topology::HalfBridge => 2,
        }
    }

    pub fn leg_count(self) -> usize {
        self.switch_count() / 2
    }
}

/// How square-PWM legs are driven outside the conduction span.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegDrive {
    /// Legs are always gated high or low. A full bridge produces its zero
    /// level by shorting the winding through both upper or both lower
    /// switches (phase-shifted legs); a half bridge runs asymmetric
    /// complementary PWM.
    #[default]
    Complementary,
    /// Only the diagonal pair for the active polarity is gated; every switch
    /// is off outside the conduction span and the antiparallel diodes decide
    /// the bridge voltage.
    Pulsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchId {
    AHigh = 0,
    ALow = 1,
    BHigh = 2,
    BLow = 3,
}

impl SwitchId {
    pub const ALL: [SwitchId; 4] = [SwitchId::AHigh, SwitchId::ALow, SwitchId::BHigh, SwitchId::BLow];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Commanded state of one bridge leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LegState {
    High,
    Low,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub time: f64,
    pub switch: SwitchId,
    pub on: bool,
}

/// Per-switch on/off timing over one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub topology: Topology,
    pub period: f64,
    pub dead_time: f64,
    /// Switch states at the end of the previous period (`t = 0⁻`).
    pub initial: [bool; 4],
    pub transitions: Vec<Transition>,
    #[serde(skip)]
    snapshots: Vec<[bool; 4]>,
}

impl GateSchedule {
    fn from_transitions(
        topology: Topology,
        period: f64,
        dead_time: f64,
        initial: [bool; 4],
        mut transitions: Vec<Transition>,
    ) -> Self {
        transitions.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.switch.cmp(&b.switch)));
        let mut state = initial;
        let snapshots = transitions
            .iter()
            .map(|tr| {
                state[tr.switch.index()] = tr.on;
                state
            })
            .collect();
        Self { topology, period, dead_time, initial, transitions, snapshots }
    }

    /// Switch states at time `t` (any `t`; the schedule repeats).
    pub fn state_at(&self, t: f64) -> [bool; 4] {
        let tau = t.rem_euclid(self.period);
        let idx = self.transitions.partition_point(|tr| tr.time <= tau);
        if idx == 0 {
            self.initial
        } else {
            self.snapshots[idx - 1]
        }
    }

    pub fn leg_states(&self, t: f64) -> [LegState; 2] {
        let s = self.state_at(t);
        let leg = |hi: bool, lo: bool| match (hi, lo) {
            (true, false) => LegState::High,
            (false, true) => LegState::Low,
            (false, false) => LegState::Off,
            // Shoot-through never appears in a generated schedule.
            (true, true) => LegState::Off,
        };
        [leg(s[0], s[1]), leg(s[2], s[3])]
    }

    /// Bridge output with ideal switches and no load current: rail times the
    /// leg difference when every leg is gated, zero when any leg floats.
    pub fn ideal_output(&self, t: f64, rail: f64) -> f64 {
        let legs = self.leg_states(t);
        let level = |l: LegState| match l {
            LegState::High => Some(1.0),
            LegState::Low => Some(0.0),
            LegState::Off => None,
        };
        match self.topology {
            Topology::FullBridge => match (level(legs[0]), level(legs[1])) {
                (Some(a), Some(b)) => rail * (a - b),
                _ => 0.0,
            },
            Topology::HalfBridge => match level(legs[0]) {
                Some(a) => rail * (a - 0.5),
                None => 0.0,
            },
        }
    }

    /// Total on-time of one switch within a period.
    pub fn on_time(&self, switch: SwitchId) -> f64 {
        let k = switch.index();
        let mut on = self.initial[k];
        let mut last = 0.0;
        let mut total = 0.0;
        for tr in self.transitions.iter().filter(|tr| tr.switch == switch) {
            if on {
                total += tr.time - last;
            }
            on = tr.on;
            last = tr.time;
        }
        if on {
            total += self.period - last;
        }
        total
    }
}

/// Piecewise-constant leg command over one period: `(start, state)` pairs,
/// starts sorted in `[0, period)`, first start at 0.
type LegPlan = Vec<(f64, LegState)>;

fn plan_from_intervals(period: f64, default: LegState, intervals: &[(f64, f64, LegState)]) -> LegPlan {
    // Intervals are given unwrapped; fold each onto [0, period).
    let mut pieces: Vec<(f64, f64, LegState)> = Vec::new();
    for &(start, len, state) in intervals {
        if len <= 0.0 {
            continue;
        }
        if len >= period {
            pieces.push((0.0, period, state));
            continue;
        }
        let s = start.rem_euclid(period);
        let e = s + len;
        if e <= period {
            pieces.push((s, e, state));
        } else {
            pieces.push((s, period, state));
            pieces.push((0.0, e - period, state));
        }
    }
    let mut cuts: Vec<f64> = vec![0.0];
    for &(s, e, _) in &pieces {
        cuts.push(s);
        if e < period {
            cuts.push(e);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut plan: LegPlan = Vec::new();
    for c in cuts {
        let state = pieces
            .iter()
            .find(|&&(s, e, _)| c >= s && c < e)
            .map_or(default, |p| p.2);
        if plan.last().map(|p| p.1) != Some(state) {
            plan.push((c, state));
        }
    }
    plan
}

fn insert_dead_time(plan: &LegPlan, period: f64, dead_time: f64) -> LegPlan {
    if dead_time <= 0.0 || plan.len() < 2 {
        return plan.clone();
    }
    let n = plan.len();
    let mut out: LegPlan = Vec::new();
    for i in 0..n {
        let (start, state) = plan[i];
        let prev = plan[(i + n - 1) % n].1;
        let end = if i + 1 < n { plan[i + 1].0 } else { period + plan[0].0 };
        let opposite = matches!(
            (prev, state),
            (LegState::High, LegState::Low) | (LegState::Low, LegState::High)
        );
        if opposite {
            let delayed = start + dead_time;
            if delayed >= end {
                out.push((start, LegState::Off));
            } else {
                out.push((start, LegState::Off));
                out.push((delayed, state));
            }
        } else {
            out.push((start, state));
        }
    }
    // Fold anything pushed past the period end back to the front.
    let mut folded: LegPlan = out
        .into_iter()
        .map(|(t, s)| (if t >= period { t - period } else { t }, s))
        .collect();
    folded.sort_by(|a, b| a.0.total_cmp(&b.0));
    if folded[0].0 > 0.0 {
        let tail = folded.last().unwrap().1;
        folded.insert(0, (0.0, tail));
    }
    let mut merged: LegPlan = Vec::new();
    for (t, s) in folded {
        match merged.last_mut() {
            Some(last) if last.0 == t => last.1 = s,
            Some(last) if last.1 == s => {}
            _ => merged.push((t, s)),
        }
    }
    merged
}

fn leg_transitions(plan: &LegPlan, high: SwitchId, low: SwitchId, out: &mut Vec<Transition>) -> (bool, bool) {
    let on = |s: LegState| (s == LegState::High, s == LegState::Low);
    let last = plan.last().map(|p| p.1).unwrap_or(LegState::Off);
    let (mut hi, mut lo) = on(last);
    let initial = (hi, lo);
    for &(t, s) in plan {
        let (h, l) = on(s);
        // Turn-offs first so a zero-dead-time swap never overlaps.
        if hi && !h {
            out.push(Transition { time: t, switch: high, on: false });
        }
        if lo && !l {
            out.push(Transition { time: t, switch: low, on: false });
        }
        if !hi && h {
            out.push(Transition { time: t, switch: high, on: true });
        }
        if !lo && l {
            out.push(Transition { time: t, switch: low, on: true });
        }
        hi = h;
        lo = l;
    }
    initial
}

/// Sign changes of the SPWM comparator over one reference period, with the
/// polarity in force at the start.
fn spwm_edges(cfg: &SpwmConfig) -> (f64, Vec<(f64, f64)>) {
    let period = cfg.period();
    let delay = cfg.delay();
    // Work in pattern-local time and shift at the end.
    let local = SpwmConfig { phase: 0.0, ..*cfg };
    let diff = |t: f64| local.sine(t) - local.triangle(t);
    let half_carrier = 0.5 / cfg.carrier_frequency;
    let pieces = (period / half_carrier).ceil() as usize;
    let sub = 64;
    let mut edges = Vec::new();
    let polarity = |d: f64| if d <= 0.0 { 1.0 } else { -1.0 };
    let start_pol = polarity(diff(0.0));
    let mut prev_t = 0.0;
    let mut prev_pol = start_pol;
    for p in 0..pieces {
        for s in 1..=sub {
            let t = ((p * sub + s) as f64 * half_carrier / sub as f64).min(period);
            let pol = polarity(diff(t));
            if pol != prev_pol {
                let (mut lo, mut hi) = (prev_t, t);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if polarity(diff(mid)) == prev_pol {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if hi < period {
                    edges.push((hi, pol));
                }
                prev_pol = pol;
            }
            prev_t = t;
            if t >= period {
                break;
            }
        }
    }
    let shifted: Vec<(f64, f64)> = edges.into_iter().map(|(t, p)| ((t + delay).rem_euclid(period), p)).collect();
    (start_pol, shifted)
}

/// Builds the per-switch gate schedule realizing `modulation` on a bridge.
///
/// Complementary switches of a leg are separated by `dead_time`, which must
/// be non-negative and below a tenth of the period.
pub fn bridge_gates(
    topology: Topology,
    modulation: &Modulation,
    dead_time: f64,
    drive: LegDrive,
) -> Result<GateSchedule> {
    let period = modulation.period();
    if !(dead_time >= 0.0 && dead_time < period / 10.0) {
        return Err(invalid(format!(
            "dead time {dead_time} s must be in [0, {}) for period {period} s",
            period / 10.0
        )));
    }
    let half = 0.5 * period;
    use LegState::*;
    let plans: Vec<LegPlan> = match *modulation {
        Modulation::Square(c) => {
            let d = c.delay();
            let span = c.duty * half;
            match (topology, drive) {
                (Topology::FullBridge, LegDrive::Complementary) => vec![
                    plan_from_intervals(period, Low, &[(d, half, High)]),
                    plan_from_intervals(period, Low, &[(d + span, half, High)]),
                ],
                (Topology::FullBridge, LegDrive::Pulsed) => vec![
                    plan_from_intervals(period, Off, &[(d, span, High), (d + half, span, Low)]),
                    plan_from_intervals(period, Off, &[(d, span, Low), (d + half, span, High)]),
                ],
                (Topology::HalfBridge, LegDrive::Complementary) => {
                    vec![plan_from_intervals(period, Low, &[(d, span, High)])]
                }
                (Topology::HalfBridge, LegDrive::Pulsed) => {
                    vec![plan_from_intervals(period, Off, &[(d, span, High), (d + half, span, Low)])]
                }
            }
        }
        Modulation::Spwm(c) => {
            c.validate()?;
            let ratio = c.carrier_ratio();
            if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                return Err(invalid(format!("SPWM gate schedule needs an integer carrier ratio, got {ratio}")));
            }
            let (start_pol, edges) = spwm_edges(&c);
            let state_for = |pol: f64, leg: usize| match (pol > 0.0, leg) {
                (true, 0) | (false, 1) => High,
                _ => Low,
            };
            (0..topology.leg_count())
                .map(|leg| {
                    let mut plan: LegPlan = Vec::with_capacity(edges.len() + 1);
                    let mut sorted = edges.clone();
                    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                    // Polarity at time 0 of the shifted pattern.
                    let pol0 = sorted.last().map(|e| e.1).unwrap_or(start_pol);
                    let pol0 = if sorted.first().map(|e| e.0 == 0.0).unwrap_or(false) { sorted[0].1 } else { pol0 };
                    plan.push((0.0, state_for(pol0, leg)));
                    for (t, p) in sorted {
                        let s = state_for(p, leg);
                        if t == 0.0 {
                            plan[0].1 = s;
                        } else if plan.last().map(|x| x.1) != Some(s) {
                            plan.push((t, s));
                        }
                    }
                    plan
                })
                .collect()
        }
    };
    let mut transitions = Vec::new();
    let mut initial = [false; 4];
    let switches = [(SwitchId::AHigh, SwitchId::ALow), (SwitchId::BHigh, SwitchId::BLow)];
    for (plan, &(hi, lo)) in plans.iter().zip(switches.iter()) {
        let plan = insert_dead_time(plan, period, dead_time);
        let (h0, l0) = leg_transitions(&plan, hi, lo, &mut transitions);
        initial[hi.index()] = h0;
        initial[lo.index()] = l0;
    }
    Ok(GateSchedule::from_transitions(topology, period, dead_time, initial, transitions))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(duty: f64, phase: f64) -> SquarePwmConfig {
        SquarePwmConfig::new(10e3, duty, phase, 100.0).unwrap()
    }

    #[test]
    fn square_examples() {
        assert_eq!(square_pwm(&sq(0.5, 0.0), 10e-6), 100.0);
        for k in 0..100 {
            assert_eq!(square_pwm(&sq(0.0, 0.3), k as f64 * 1.37e-6), 0.0);
        }
        let base = sq(0.5, 0.0);
        let shifted = sq(0.5, PI / 2.0);
        for k in 0..400 {
            let t = k as f64 * 0.25e-6 + 0.1e-6;
            assert_eq!(square_pwm(&shifted, t + 25e-6), square_pwm(&base, t));
        }
    }

    #[test]
    fn square_rejects_bad_config() {
        assert!(SquarePwmConfig::new(0.0, 0.5, 0.0, 1.0).is_err());
        assert!(SquarePwmConfig::new(1e3, 1.2, 0.0, 1.0).is_err());
        assert!(SquarePwmConfig::new(1e3, -0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn phase_is_wrapped() {
        let c = sq(0.5, 3.0 * PI);
        assert!((c.phase - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert_eq!(wrap_phase(0.0), 0.0);
    }

    #[test]
    fn spwm_comparator_convention() {
        let cfg = SpwmConfig::new(200e3, 10e3, 0.8, 1.0, 50.0).unwrap();
        // Search instants with the two orderings and one tie.
        let mut found_pos = false;
        let mut found_neg = false;
        for k in 0..10_000 {
            let t = k as f64 * 1e-8;
            let (s, tri) = (cfg.sine(t), cfg.triangle(t));
            if s < tri {
                assert_eq!(spwm(&cfg, t), 50.0);
                found_pos = true;
            } else if s > tri {
                assert_eq!(spwm(&cfg, t), -50.0);
                found_neg = true;
            }
        }
        assert!(found_pos && found_neg);
        // At t = 0 the sine is 0 and the carrier sits at its positive peak.
        assert_eq!(cfg.triangle(0.0), 1.0);
        assert_eq!(spwm(&cfg, 0.0), 50.0);
    }

    #[test]
    fn spwm_tie_is_positive() {
        // Unit sine equal to the carrier peak at the sine crest: a quarter
        // reference period in, with the carrier back at its peak.
        let cfg = SpwmConfig::new(40e3, 10e3, 1.0, 1.0, 10.0).unwrap();
        let t = 25e-6;
        assert!((cfg.sine(t) - cfg.triangle(t)).abs() < 1e-12);
        let tie = SpwmConfig { sine_amplitude: cfg.triangle(t) / (TAU * 10e3 * t).sin(), ..cfg };
        assert_eq!(tie.sine(t), tie.triangle(t));
        assert_eq!(spwm(&tie, t), 10.0);
    }

    #[test]
    fn modulation_index_examples() {
        let m = modulation_index(0.8, 1.0).unwrap();
        assert_eq!((m.value, m.overmodulated), (0.8, false));
        let m = modulation_index(1.0, 1.0).unwrap();
        assert_eq!((m.value, m.overmodulated), (1.0, false));
        let m = modulation_index(1.2, 1.0).unwrap();
        assert!((m.value - 1.2).abs() < 1e-15 && m.overmodulated);
        assert!(modulation_index(1.0, 0.0).is_err());
        assert!(modulation_index(1.0, -2.0).is_err());
    }

    #[test]
    fn full_bridge_half_duty() {
        let m = Modulation::Square(sq(0.5, 0.0));
        let g = bridge_gates(Topology::FullBridge, &m, 0.0, LegDrive::Complementary).unwrap();
        // Phase-shifted legs: every switch conducts half the period.
        for s in SwitchId::ALL {
            assert!((g.on_time(s) - 50e-6).abs() < 1e-12, "{s:?} {}", g.on_time(s));
        }
        let pulsed = bridge_gates(Topology::FullBridge, &m, 0.0, LegDrive::Pulsed).unwrap();
        for s in SwitchId::ALL {
            assert!((pulsed.on_time(s) - 25e-6).abs() < 1e-12);
        }
    }

    #[test]
    fn half_bridge_is_two_switch_complementary() {
        let m = Modulation::Square(sq(0.5, 0.0));
        for drive in [LegDrive::Complementary, LegDrive::Pulsed] {
            let g = bridge_gates(Topology::HalfBridge, &m, 0.0, drive).unwrap();
            assert!(g.transitions.iter().all(|t| matches!(t.switch, SwitchId::AHigh | SwitchId::ALow)));
            for k in 0..10_000 {
                let s = g.state_at(k as f64 * 1e-8);
                assert!(!(s[0] && s[1]));
                assert!(!s[2] && !s[3]);
            }
        }
    }

    #[test]
    fn diagonal_pair_volt_seconds() {
        let cfg = sq(0.3, 0.0);
        let m = Modulation::Square(cfg);
        for drive in [LegDrive::Complementary, LegDrive::Pulsed] {
            let g = bridge_gates(Topology::FullBridge, &m, 0.0, drive).unwrap();
            let n = 100_000;
            let dt = cfg.period() / n as f64;
            let (mut pos, mut neg, mut vs_gate, mut vs_ref) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..n {
                let t = (k as f64 + 0.5) * dt;
                let s = g.state_at(t);
                if s[0] && s[3] {
                    pos += dt;
                }
                if s[1] && s[2] {
                    neg += dt;
                }
                vs_gate += g.ideal_output(t, 100.0).abs() * dt;
                vs_ref += square_pwm(&cfg, t).abs() * dt;
            }
            let expected = 0.3 * cfg.period() / 2.0;
            assert!((pos - expected).abs() < 2.0 * dt);
            assert!((neg - expected).abs() < 2.0 * dt);
            assert!((vs_gate - vs_ref).abs() < 1e-3 * vs_ref);
        }
        let pulsed = bridge_gates(Topology::FullBridge, &m, 0.0, LegDrive::Pulsed).unwrap();
        for s in SwitchId::ALL {
            assert!((pulsed.on_time(s) - 0.3 * 50e-6).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_output_matches_square_pwm() {
        for &(duty, phase) in &[(1.0, 0.0), (0.5, 0.7), (0.25, -2.0), (0.8, PI)] {
            let cfg = sq(duty, phase);
            let g = bridge_gates(Topology::FullBridge, &Modulation::Square(cfg), 0.0, LegDrive::Complementary)
                .unwrap();
            for k in 0..2000 {
                let t = (k as f64 + 0.37) * 5e-8;
                assert_eq!(g.ideal_output(t, 100.0), square_pwm(&cfg, t), "duty {duty} phase {phase} t {t}");
            }
        }
    }

    #[test]
    fn dead_time_limits() {
        let m = Modulation::Square(sq(0.5, 0.0));
        assert!(bridge_gates(Topology::FullBridge, &m, 10e-6, LegDrive::Complementary).is_err());
        assert!(bridge_gates(Topology::FullBridge, &m, -1e-9, LegDrive::Complementary).is_err());
        let g = bridge_gates(Topology::FullBridge, &m, 1e-6, LegDrive::Complementary).unwrap();
        assert!((g.on_time(SwitchId::AHigh) - 49e-6).abs() < 1e-12);
    }

    #[test]
    fn transitions_sorted_and_in_period() {
        let spwm_cfg = SpwmConfig::new(200e3, 10e3, 0.7, 1.0, 100.0).unwrap().with_phase(0.4);
        let mods = [Modulation::Square(sq(0.4, 1.0)), Modulation::Spwm(spwm_cfg)];
        for m in &mods {
            for topo in [Topology::FullBridge, Topology::HalfBridge] {
                let g = bridge_gates(topo, m, 0.2e-6, LegDrive::Complementary).unwrap();
                for w in g.transitions.windows(2) {
                    assert!((w[0].time, w[0].switch) < (w[1].time, w[1].switch));
                }
                assert!(g.transitions.iter().all(|t| t.time >= 0.0 && t.time < g.period));
            }
        }
    }

    #[test]
    fn spwm_gates_follow_comparator() {
        let cfg = SpwmConfig::new(200e3, 10e3, 0.6, 1.0, 100.0).unwrap().with_phase(-0.9);
        let g = bridge_gates(Topology::FullBridge, &Modulation::Spwm(cfg), 0.0, LegDrive::Complementary).unwrap();
        let mut mismatched = 0;
        let n = 20_000;
        for k in 0..n {
            let t = (k as f64 + 0.5) * cfg.period() / n as f64;
            if g.ideal_output(t, 100.0) != spwm(&cfg, t) {
                mismatched += 1;
            }
        }
        assert_eq!(mismatched, 0);
        assert!(bridge_gates(
            Topology::FullBridge,
            &Modulation::Spwm(SpwmConfig::new(205e3, 10e3, 0.6, 1.0, 1.0).unwrap()),
            0.0,
            LegDrive::Complementary
        )
        .is_err());
    }
}
