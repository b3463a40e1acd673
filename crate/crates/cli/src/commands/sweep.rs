use std::path::Path;

use serde_json::{json, Value};
use tab_core::analysis::{is_strictly_monotone, linear_fit, proportional_fit};
use tab_core::config::{Config, PortMode};
use tab_core::modulation::Topology;
use tab_core::reference::{implied_load, HARDWARE_DUTY_SWEEP, HARDWARE_SOURCE_VOLTS};
use tab_core::simulator::{with_delivering_duty, ConverterSpec};

use super::{map_points, run_point, Point};
use crate::report::{self, csv, sibling, ExperimentReport};
use crate::{CliError, Outcome, SweepKind};

pub fn linspace(from: f64, to: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(CliError::config("sweep range needs finite bounds and at least one step"));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    Ok((0..steps).map(|k| from + (to - from) * k as f64 / (steps - 1) as f64).collect())
}

/// Converter spec for one sweep value.
fn point_spec(base: &Config, kind: SweepKind, value: f64) -> tab_core::Result<ConverterSpec> {
    match kind {
        SweepKind::Duty | SweepKind::HalfbridgeDuty => with_delivering_duty(&base.converter_spec()?, value),
        SweepKind::Phase => {
            let mut cfg = base.clone();
            cfg.switching.port3.phase_rad = value;
            cfg.converter_spec()
        }
        SweepKind::Ma => {
            let mut cfg = base.clone();
            for k in 0..3 {
                if cfg.port(k).mode == PortMode::Spwm {
                    cfg.port_mut(k).ma = value;
                }
            }
            cfg.converter_spec()
        }
    }
}

fn check_kind(config: &Config, kind: SweepKind) -> Result<(), CliError> {
    let delivering = [config.port(0).mode, config.port(1).mode];
    let ok = match kind {
        SweepKind::Duty | SweepKind::HalfbridgeDuty => {
            delivering.contains(&PortMode::Square) && !delivering.contains(&PortMode::Spwm)
        }
        SweepKind::Phase => config.port(2).mode == PortMode::Square,
        SweepKind::Ma => (0..3).any(|k| config.port(k).mode == PortMode::Spwm),
    };
    if ok {
        Ok(())
    } else {
        let need = match kind {
            SweepKind::Duty | SweepKind::HalfbridgeDuty => "square-PWM delivering bridges",
            SweepKind::Phase => "a square-PWM consuming bridge",
            SweepKind::Ma => "at least one SPWM bridge",
        };
        Err(CliError::config(format!("{kind:?} sweep needs {need}")))
    }
}

fn kind_name(kind: SweepKind) -> &'static str {
    match kind {
        SweepKind::Duty => "duty",
        SweepKind::Phase => "phase",
        SweepKind::Ma => "ma",
        SweepKind::HalfbridgeDuty => "halfbridge_duty",
    }
}

fn run_sweep(
    config: &Config,
    kind: SweepKind,
    values: &[f64],
    parallel: bool,
) -> Result<Vec<Result<Point, tab_core::Error>>, CliError> {
    // Validate every point before spending time on simulations.
    let specs: Vec<ConverterSpec> =
        values.iter().map(|&v| point_spec(config, kind, v)).collect::<tab_core::Result<_>>()?;
    let sim = config.sim_config();
    Ok(map_points(&specs, parallel, |spec| run_point(spec, &sim)))
}

fn variation(points: &[(f64, f64)]) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    hi - lo
}

/// The published bench duty sweep, with the load each row implies and the
/// line through its rows at 20% duty and above.
pub fn hardware_reference() -> Result<Value, CliError> {
    let rows = implied_load(&HARDWARE_DUTY_SWEEP)?;
    let trend: Vec<(f64, f64)> =
        HARDWARE_DUTY_SWEEP.iter().filter(|r| r.duty_percent >= 20.0).map(|r| (r.duty_percent / 100.0, r.v_out)).collect();
    Ok(json!({
        "source_v": HARDWARE_SOURCE_VOLTS,
        "measurements": HARDWARE_DUTY_SWEEP,
        "implied": rows,
        "trend_fit": linear_fit(&trend)?,
    }))
}

pub fn sweep(
    config: &Config,
    kind: SweepKind,
    from: f64,
    to: f64,
    steps: usize,
    out: &Path,
    parallel: bool,
) -> Result<Outcome, CliError> {
    let values = linspace(from, to, steps)?;
    let mut config = config.clone();
    if kind == SweepKind::HalfbridgeDuty {
        config.topology.kind = Topology::HalfBridge;
    }
    check_kind(&config, kind)?;
    let results = run_sweep(&config, kind, &values, parallel)?;

    // The half-bridge sweep is judged against the same sweep on full bridges.
    let full_bridge = if kind == SweepKind::HalfbridgeDuty {
        let mut fb = config.clone();
        fb.topology.kind = Topology::FullBridge;
        Some(run_sweep(&fb, SweepKind::Duty, &values, parallel)?)
    } else {
        None
    };

    let mut rep = ExperimentReport::new(&format!("sweep_{}", kind_name(kind)), &config);
    let mut header = vec!["parameter", "v_out", "p1", "p2", "p3"];
    if full_bridge.is_some() {
        header.push("v_out_full_bridge");
    }
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    let mut fb_curve = Vec::new();
    let mut nonsteady = 0;
    for (i, (&x, r)) in values.iter().zip(&results).enumerate() {
        let fb = full_bridge.as_ref().map(|f| &f[i]);
        match (r, fb) {
            (Ok(p), None) => {
                rows.push(vec![x, p.v_out, p.p1, p.p2, p.p3]);
                curve.push((x, p.v_out));
                nonsteady += usize::from(!p.steady);
                rep.rows.push(json!({ "parameter": x, "point": p, "status": "ok" }));
            }
            (Ok(p), Some(Ok(f))) => {
                rows.push(vec![x, p.v_out, p.p1, p.p2, p.p3, f.v_out]);
                curve.push((x, p.v_out));
                fb_curve.push((x, f.v_out));
                nonsteady += usize::from(!p.steady) + usize::from(!f.steady);
                rep.rows.push(json!({ "parameter": x, "point": p, "full_bridge": f, "status": "ok" }));
            }
            (Err(e), _) | (_, Some(Err(e))) => {
                rep.rows.push(json!({ "parameter": x, "status": "failed", "error": e.to_string() }));
            }
        }
    }
    report::write(out, &csv(&header, &rows))?;

    let ys: Vec<f64> = curve.iter().map(|p| p.1).collect();
    rep.flag("points_total", values.len());
    rep.flag("points_ok", curve.len());
    rep.flag("nonsteady_points", nonsteady);
    rep.flag("monotone_increasing", curve.len() > 1 && is_strictly_monotone(&ys, 1.0));
    rep.flag("monotone_decreasing", curve.len() > 1 && is_strictly_monotone(&ys, -1.0));
    if matches!(kind, SweepKind::Duty | SweepKind::HalfbridgeDuty) {
        if let Ok(fit) = proportional_fit(&curve) {
            let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
            rep.flag("linear_fit", fit);
            rep.flag("linear_fit_relative_residual", if scale > 0.0 { fit.max_residual / scale } else { 0.0 });
        }
        rep.flag("hardware_reference", hardware_reference()?);
    }
    if full_bridge.is_some() {
        let (hb, fb) = (variation(&curve), variation(&fb_curve));
        rep.flag("variation", hb);
        rep.flag("full_bridge_variation", fb);
        rep.flag("variation_ratio", if fb > 0.0 { Value::from(hb / fb) } else { Value::Null });
    }
    rep.flag("csv_path", out.display().to_string());
    report::write(&sibling(out, ".json"), &rep.render())?;

    let mut outcome = Outcome::default();
    if nonsteady > 0 {
        outcome.warnings.push(format!("{nonsteady} sweep point(s) did not settle"));
    }
    // At least 90% of the points must succeed.
    if 10 * curve.len() < 9 * values.len() {
        outcome.exit_code = 3;
        outcome.warnings.push(format!("only {} of {} sweep points succeeded", curve.len(), values.len()));
    }
    Ok(outcome)
}
