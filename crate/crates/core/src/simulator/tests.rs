use std::f64::consts::PI;

use super::*;
use crate::modulation::SquarePwmConfig;

const S: f64 = 1591.5494309189535;

fn sw(duty: f64, phase: f64, drive: LegDrive) -> Option<PortSwitching> {
    let m = Modulation::Square(SquarePwmConfig::new(10e3, duty, phase, 100.0).unwrap());
    Some(PortSwitching { modulation: m, drive })
}

fn square(duty: f64, phase: f64) -> Option<PortSwitching> {
    sw(duty, phase, LegDrive::Complementary)
}

fn ref_a(topology: Topology) -> ConverterSpec {
    ConverterSpec {
        topology,
        port_dc_voltages: [100.0, 100.0],
        transformer: TransformerSpec::new([1.0; 3], [100e-6; 3]).unwrap(),
        switching: [square(1.0, 0.0), square(1.0, 0.0), square(1.0, 0.0)],
        filter_capacitance: 100e-6,
        load_resistance: 40.0,
        switch_on_resistance: DEFAULT_SWITCH_RESISTANCE,
        half_bridge_divider_capacitance: None,
        dead_time: 0.0,
    }
}

/// Port 2 idle; port 3 lags port 1 by `phi` and the load is sized for ~100 V.
fn two_port(phi: f64) -> ConverterSpec {
    let mut spec = ref_a(Topology::FullBridge);
    spec.switching = [square(1.0, 0.0), None, square(1.0, phi)];
    // The idle port leaves links 21 and 23 in series across link 31.
    spec.load_resistance = 1e4 / (1.5 * S * phi * (1.0 - phi / PI));
    spec
}

fn start_at_100() -> SimConfig {
    SimConfig { initial_output_voltage: 100.0, ..SimConfig::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn two_port_link_power_matches_analytic() {
    let mut outputs = vec![];
    for phi in [PI / 12.0, PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0] {
        let trace = simulate(&two_port(phi), &start_at_100()).unwrap();
        assert!(trace.steady);
        let p = -link_power_measure(&trace, "31").unwrap();
        let want = S * phi * (1.0 - phi / PI);
        assert!(rel(p, want) < 0.02, "phi {phi}: {p} vs {want}");
        outputs.push(p);
    }
    assert!(outputs.windows(2).all(|w| w[1] > w[0]));
    assert!(rel(outputs[4], 1250.0) < 0.02);
}

#[test]
fn output_falls_as_phase_shrinks() {
    let mut spec = two_port(PI / 4.0);
    let mut volts = vec![];
    for phi in [PI / 2.0, PI / 4.0, PI / 12.0] {
        spec.switching[2] = square(1.0, phi);
        volts.push(steady_state_output(&simulate(&spec, &start_at_100()).unwrap()).unwrap().volts);
    }
    assert!(volts[0] > volts[1] && volts[1] > volts[2], "{volts:?}");
}

#[test]
fn unexcited_network_stays_at_rest() {
    let mut spec = ref_a(Topology::FullBridge);
    spec.switching = [square(0.0, 0.0), square(0.0, 0.0), square(0.0, 0.0)];
    let trace = simulate(&spec, &SimConfig::default()).unwrap();
    assert!(trace.steady);
    for name in ["i_l21", "i_l31", "i_l23", "v_out"] {
        assert!(trace.channel(name).unwrap().iter().all(|x| x.abs() < 1e-9), "{name}");
    }
    for port in 1..=3 {
        assert!(port_power_measure(&trace, port).unwrap().abs() < 1e-9);
    }
}

#[test]
fn three_port_powers_match_aggregation() {
    let mut spec = ref_a(Topology::FullBridge);
    spec.switching[2] = square(1.0, PI / 4.0);
    spec.load_resistance = 1e4 / 1875.0;
    let trace = simulate(&spec, &start_at_100()).unwrap();
    let p: Vec<f64> = (1..=3).map(|k| port_power_measure(&trace, k).unwrap()).collect();
    assert!(rel(p[0], 937.5) < 0.02, "{p:?}");
    assert!(rel(p[1], 937.5) < 0.02, "{p:?}");
    assert!(rel(p[2], -1875.0) < 0.02, "{p:?}");
}

// Ideal half bridges leave an undamped LC loop through the divider
// capacitors, so their lossless runs never become periodic; conservation is
// checked on the full bridge.
#[test]
fn lossless_runs_conserve_power() {
    let cases = [
        [square(0.6, 0.0), square(1.0, -0.3), square(1.0, PI / 5.0)],
        [square(1.0, 0.0), square(0.8, 0.4), sw(0.5, PI / 4.0, LegDrive::Pulsed)],
        [square(0.3, 0.2), None, square(1.0, PI / 3.0)],
    ];
    for switching in cases {
        let mut spec = ref_a(Topology::FullBridge);
        spec.switch_on_resistance = 0.0;
        spec.switching = switching;
        let trace = simulate(&spec, &start_at_100()).unwrap();
        assert!(trace.steady);
        let p: Vec<f64> = (1..=3).map(|k| port_power_measure(&trace, k).unwrap()).collect();
        let max = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max > 10.0);
        assert!(p.iter().sum::<f64>().abs() < 1e-3 * max, "{p:?}");
    }
}

#[test]
fn halving_the_step_barely_moves_the_output() {
    let spec = two_port(PI / 4.0);
    let coarse = simulate(&spec, &start_at_100()).unwrap();
    let fine = simulate(&spec, &SimConfig { steps_per_period: 4000, ..start_at_100() }).unwrap();
    let a = steady_state_output(&coarse).unwrap().volts;
    let b = steady_state_output(&fine).unwrap().volts;
    assert!(rel(a, b) < 0.002, "{a} vs {b}");
}

#[test]
fn runs_are_bit_identical() {
    let spec = two_port(PI / 3.0);
    let sim = SimConfig { max_periods: 50, capture_periods: 2, ..SimConfig::default() };
    let a = simulate(&spec, &sim).unwrap();
    let b = simulate(&spec, &sim).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.len(), 4000);
}

#[test]
fn receiving_bridge_duty_does_not_matter_with_diodes() {
    let run = |d3: f64| {
        let mut spec = ref_a(Topology::FullBridge);
        spec.switching[2] = sw(d3, PI / 4.0, LegDrive::Pulsed);
        steady_state_output(&simulate(&spec, &SimConfig::default()).unwrap()).unwrap().volts
    };
    let base = run(0.5);
    for d3 in [0.2, 0.35] {
        assert!(rel(run(d3), base) < 0.02);
    }
}

#[test]
fn steady_output_of_synthetic_traces() {
    let n = 400;
    let dt = 1e-4 / n as f64;
    let flat = WaveformTrace::new(dt, 1e4, vec!["v_out".into()], vec![vec![8.1; n]]).unwrap();
    assert!((steady_state_output(&flat).unwrap().volts - 8.1).abs() < 1e-12);

    let tri: Vec<f64> =
        (0..n).map(|k| 7.9 + 0.4 * (1.0 - (2.0 * (k as f64 + 0.5) / n as f64 - 1.0).abs())).collect();
    let mut trace = WaveformTrace::new(dt, 1e4, vec!["v_out".into()], vec![tri]).unwrap();
    let out = steady_state_output(&trace).unwrap();
    assert!((out.volts - 8.1).abs() < 1e-9);
    assert!(out.warning.is_none());

    trace.steady = false;
    assert!(steady_state_output(&trace).unwrap().warning.is_some());
}

#[test]
fn unsettled_run_is_flagged_not_failed() {
    let trace = simulate(&two_port(PI / 4.0), &SimConfig { max_periods: 3, ..SimConfig::default() }).unwrap();
    assert!(!trace.steady);
    assert_eq!(trace.periods_run, 3);
    assert!(steady_state_output(&trace).unwrap().warning.is_some());
}

#[test]
fn trace_layout() {
    let trace = simulate(&two_port(PI / 4.0), &SimConfig { max_periods: 5, capture_periods: 3, ..SimConfig::default() }).unwrap();
    assert_eq!(trace.names, CHANNELS);
    assert_eq!(trace.len(), 6000);
    let t = trace.channel("t_s").unwrap();
    assert!((t[1] - t[0] - trace.dt).abs() < 1e-15);
    assert!((t[5999] - 5e-4).abs() < 1e-12);
    let csv = trace.to_csv();
    assert!(csv.starts_with("t_s,v_bridge1,v_bridge2,v_bridge3,i_l21,i_l31,i_l23,v_out,p1,p2,p3\n"));
    assert_eq!(csv.lines().count(), 6001);
}

#[test]
fn half_bridge_duty_response_guards_topology() {
    let sim = SimConfig::default();
    assert!(matches!(
        half_bridge_duty_response(&ref_a(Topology::FullBridge), &sim, &[0.5]),
        Err(Error::Precondition(_))
    ));
    let mut spec = ref_a(Topology::HalfBridge);
    spec.switching[2] = None;
    let out = half_bridge_duty_response(&spec, &SimConfig { max_periods: 20, ..sim }, &[0.35]).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].0, 0.35);
    assert!(out[0].1 > 0.0);
}

#[test]
fn delivering_duty_keeps_pulse_centre() {
    let mut spec = ref_a(Topology::FullBridge);
    spec.switching[0] = square(1.0, 0.2);
    let out = with_delivering_duty(&spec, 0.5).unwrap();
    let Some(PortSwitching { modulation: Modulation::Square(c), .. }) = out.switching[0] else { panic!() };
    assert_eq!(c.duty, 0.5);
    assert!((c.phase - (0.2 + PI / 4.0)).abs() < 1e-12);
    assert!(with_delivering_duty(&spec, 1.5).is_err());
}

#[test]
fn rejects_bad_configs() {
    let spec = ref_a(Topology::FullBridge);
    assert!(simulate(&spec, &SimConfig { steps_per_period: 100, ..SimConfig::default() }).is_err());
    assert!(simulate(&spec, &SimConfig { steady_tolerance: 0.0, ..SimConfig::default() }).is_err());
    let mut bad = spec.clone();
    bad.load_resistance = 0.0;
    assert!(matches!(simulate(&bad, &SimConfig::default()), Err(Error::InvalidConfig(_))));
    let mut idle = spec.clone();
    idle.switching = [None, None, None];
    assert!(idle.validate().is_err());
    let mut ron = spec;
    ron.switch_on_resistance = -1.0;
    assert!(ron.validate().is_err());
}

#[test]
fn ports_are_one_based() {
    let trace = WaveformTrace::new(1.0, 1.0, vec!["p1".into()], vec![vec![1.0]]).unwrap();
    assert!(port_power_measure(&trace, 0).is_err());
    assert!(port_power_measure(&trace, 4).is_err());
    assert!(link_power_measure(&trace, "12").is_err());
}


