//! Experiment configuration files.
//!
//! A configuration is a TOML document with the sections `topology`, `ports`,
//! `transformer`, `switching`, `filter`, `load` and `sim`; keys carry their
//! SI unit. A top-level `preset = "ref_a"` starts from the built-in
//! reference converter and lets the file override any key.
//!
//! ```toml
//! preset = "ref_a"
//!
//! [switching.port3]
//! mode = "square"
//! duty = 1.0
//! phase_rad = 0.7853981633974483
//!
//! [load]
//! load_ohm = 5.333
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::modulation::{LegDrive, Modulation, SpwmConfig, SquarePwmConfig, Topology};
use crate::simulator::{ConverterSpec, PortSwitching, SimConfig};
use crate::transformer::{link_coefficients, TransformerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: Topology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortsSection {
    pub v1_v: f64,
    pub v2_v: f64,
    /// Output voltage assumed by the analytic power-flow model.
    pub v3_nominal_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerSection {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub l21_h: f64,
    pub l31_h: f64,
    pub l23_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortMode {
    Square,
    Spwm,
    /// All switches off; only the antiparallel diodes conduct.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSection {
    pub mode: PortMode,
    #[serde(default = "one")]
    pub duty: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub drive: LegDrive,
    /// SPWM modulation index (sine over triangle amplitude).
    #[serde(default = "one")]
    pub ma: f64,
    /// SPWM carrier frequency over `fs_hz`.
    #[serde(default = "default_carrier_ratio")]
    pub carrier_ratio: f64,
}

fn one() -> f64 {
    1.0
}

fn default_carrier_ratio() -> f64 {
    21.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingSection {
    pub fs_hz: f64,
    #[serde(default)]
    pub dead_time_s: f64,
    pub switch_on_ohm: f64,
    pub port1: PortSection,
    pub port2: PortSection,
    pub port3: PortSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub capacitance_f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divider_capacitance_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub load_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub steps_per_period: usize,
    pub max_periods: usize,
    pub steady_tolerance: f64,
    #[serde(default = "default_capture")]
    pub capture_periods: usize,
    #[serde(default)]
    pub initial_output_v: f64,
}

fn default_capture() -> usize {
    1
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub topology: TopologySection,
    pub ports: PortsSection,
    pub transformer: TransformerSection,
    pub switching: SwitchingSection,
    pub filter: FilterSection,
    pub load: LoadSection,
    pub sim: SimSection,
}

const REF_A: &str = r#"
[topology]
kind = "full_bridge"

[ports]
v1_v = 100.0
v2_v = 100.0
v3_nominal_v = 100.0

[transformer]
n1 = 1.0
n2 = 1.0
n3 = 1.0
l21_h = 100e-6
l31_h = 100e-6
l23_h = 100e-6

[switching]
fs_hz = 10000.0
dead_time_s = 0.0
switch_on_ohm = 1e-3

[switching.port1]
mode = "square"
duty = 1.0
phase_rad = 0.0

[switching.port2]
mode = "square"
duty = 1.0
phase_rad = 0.0

[switching.port3]
mode = "off"

[filter]
capacitance_f = 100e-6

[load]
load_ohm = 40.0

[sim]
steps_per_period = 2000
max_periods = 2000
steady_tolerance = 1e-4
"#;

/// Names of the built-in presets.
pub const PRESETS: [&str; 1] = ["ref_a"];

fn preset_table(name: &str) -> Result<toml::Table> {
    match name {
        "ref_a" => Ok(REF_A.parse().expect("built-in preset parses")),
        other => Err(invalid(format!("unknown preset {other:?}; known presets: {PRESETS:?}"))),
    }
}

/// Recursively overlays `top` on `base`.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl Config {
    pub fn preset(name: &str) -> Result<Self> {
        Self::from_table(preset_table(name)?)
    }

    pub fn ref_a() -> Self {
        Self::preset("ref_a").expect("built-in preset is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| invalid(format!("config is not valid TOML: {e}")))?;
        if let Some(preset) = table.remove("preset") {
            let name = preset.as_str().ok_or_else(|| invalid("preset must be a string"))?;
            let mut base = preset_table(name)?;
            merge(&mut base, table);
            table = base;
        }
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Config = toml::Value::Table(table).try_into().map_err(|e| invalid(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.converter_spec()?.validate()?;
        self.sim_config().validate()?;
        if !(self.ports.v3_nominal_v > 0.0) {
            return Err(invalid("v3_nominal_v must be positive"));
        }
        Ok(())
    }

    pub fn transformer_spec(&self) -> Result<TransformerSpec> {
        let t = &self.transformer;
        TransformerSpec::new([t.n1, t.n2, t.n3], [t.l21_h, t.l31_h, t.l23_h])
    }

    fn port_rail(&self, port: usize) -> f64 {
        match port {
            0 => self.ports.v1_v,
            1 => self.ports.v2_v,
            _ => self.ports.v3_nominal_v,
        }
    }

    fn port_switching(&self, port: usize) -> Result<Option<PortSwitching>> {
        let s = &self.switching;
        let p = [&s.port1, &s.port2, &s.port3][port];
        let rail = self.port_rail(port);
        let modulation = match p.mode {
            PortMode::Off => return Ok(None),
            PortMode::Square => Modulation::Square(SquarePwmConfig::new(s.fs_hz, p.duty, p.phase_rad, rail)?),
            PortMode::Spwm => {
                // The comparator drives the bridge high while the sine is below
                // the carrier, which inverts the fundamental; shifting by half a
                // period lines it up with a square wave of the same phase.
                let cfg = SpwmConfig::new(p.carrier_ratio * s.fs_hz, s.fs_hz, p.ma, 1.0, rail)?;
                Modulation::Spwm(cfg.with_phase(p.phase_rad + PI))
            }
        };
        Ok(Some(PortSwitching { modulation, drive: p.drive }))
    }

    pub fn converter_spec(&self) -> Result<ConverterSpec> {
        Ok(ConverterSpec {
            topology: self.topology.kind,
            port_dc_voltages: [self.ports.v1_v, self.ports.v2_v],
            transformer: self.transformer_spec()?,
            switching: [self.port_switching(0)?, self.port_switching(1)?, self.port_switching(2)?],
            filter_capacitance: self.filter.capacitance_f,
            load_resistance: self.load.load_ohm,
            switch_on_resistance: self.switching.switch_on_ohm,
            half_bridge_divider_capacitance: self.filter.divider_capacitance_f,
            dead_time: self.switching.dead_time_s,
        })
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            steps_per_period: self.sim.steps_per_period,
            max_periods: self.sim.max_periods,
            steady_tolerance: self.sim.steady_tolerance,
            capture_periods: self.sim.capture_periods,
            initial_output_voltage: self.sim.initial_output_v,
        }
    }

    /// Link coefficients `(S21, S31, S23)` at the nominal port voltages.
    pub fn link_coefficients(&self) -> Result<[f64; 3]> {
        link_coefficients(
            &self.transformer_spec()?,
            [self.ports.v1_v, self.ports.v2_v, self.ports.v3_nominal_v],
            self.switching.fs_hz,
        )
    }

    /// Switching section by zero-based index (`0` is port 1).
    pub fn port(&self, port: usize) -> &PortSection {
        [&self.switching.port1, &self.switching.port2, &self.switching.port3][port]
    }

    pub fn port_mut(&mut self, port: usize) -> &mut PortSection {
        match port {
            0 => &mut self.switching.port1,
            1 => &mut self.switching.port2,
            2 => &mut self.switching.port3,
            _ => panic!("port index {port} out of range"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn ref_a_matches_reference_values() {
        let cfg = Config::ref_a();
        let spec = cfg.converter_spec().unwrap();
        assert_eq!(spec.port_dc_voltages, [100.0, 100.0]);
        assert_eq!(spec.transformer.links, [100e-6; 3]);
        assert_eq!(spec.load_resistance, 40.0);
        assert_eq!(cfg.sim_config().steps_per_period, 2000);
        let s = cfg.link_coefficients().unwrap();
        assert!((s[0] - 1591.5494309189535).abs() < 1e-9);
    }

    #[test]
    fn preset_overrides_merge_per_key() {
        let cfg = Config::from_toml("preset = \"ref_a\"\n[load]\nload_ohm = 10.0\n[switching.port2]\nmode = \"off\"\n").unwrap();
        assert_eq!(cfg.load.load_ohm, 10.0);
        assert_eq!(cfg.switching.port2.mode, PortMode::Off);
        assert_eq!(cfg.switching.fs_hz, 10e3);
        assert!(cfg.converter_spec().unwrap().switching[1].is_none());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = Config::ref_a();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "not toml [",
            "preset = \"nope\"",
            "preset = 3",
            "preset = \"ref_a\"\n[load]\nload_ohm = -1.0\n",
            "preset = \"ref_a\"\n[load]\nload_ohms = 1.0\n",
            "preset = \"ref_a\"\n[sim]\nsteps_per_period = 10\n",
            "preset = \"ref_a\"\n[switching.port1]\nmode = \"square\"\nduty = 2.0\n",
            "[load]\nload_ohm = 1.0\n",
        ] {
            assert!(matches!(Config::from_toml(text), Err(Error::InvalidConfig(_))), "{text}");
        }
    }

    #[test]
    fn spwm_port_uses_carrier_ratio() {
        let cfg = Config::from_toml(
            "preset = \"ref_a\"\n[switching.port1]\nmode = \"spwm\"\nma = 0.8\ncarrier_ratio = 21.0\n",
        )
        .unwrap();
        let spec = cfg.converter_spec().unwrap();
        let Some(PortSwitching { modulation: Modulation::Spwm(s), .. }) = spec.switching[0] else { panic!() };
        assert_eq!(s.carrier_frequency, 210e3);
        assert!((s.modulation_index() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn spwm_fundamental_is_aligned_with_square() {
        use crate::analysis::dft_fundamental;
        let cfg = Config::from_toml(
            "preset = \"ref_a\"\n[switching.port1]\nmode = \"spwm\"\nma = 0.8\nphase_rad = 0.5\n[switching.port2]\nmode = \"square\"\nphase_rad = 0.5\n",
        )
        .unwrap();
        let spec = cfg.converter_spec().unwrap();
        let n = 8192;
        let dt = 1e-4 / n as f64;
        let wave = |k: usize| {
            let m = spec.switching[k].unwrap().modulation;
            (0..n).map(|i| m.output(i as f64 * dt)).collect::<Vec<_>>()
        };
        let (a_spwm, ph_spwm) = dft_fundamental(&wave(0), dt, 1e4).unwrap();
        let (_, ph_square) = dft_fundamental(&wave(1), dt, 1e4).unwrap();
        assert!((a_spwm - 80.0).abs() < 2.0);
        assert!((ph_spwm - ph_square).abs() < 0.01, "{ph_spwm} {ph_square}");
    }
}
