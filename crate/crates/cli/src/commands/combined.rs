use std::f64::consts::PI;
use std::path::Path;

use serde_json::json;
use tab_core::analysis::is_strictly_monotone;
use tab_core::config::{Config, PortMode};

use super::{map_points, run_point, Point};
use crate::report::{self, csv, sibling, ExperimentReport};
use crate::{CliError, Outcome};

/// Consuming-bridge phases visited.
pub const PHASES: [f64; 4] = [0.0, PI / 12.0, PI / 6.0, PI / 4.0];

fn check(config: &Config) -> Result<(), CliError> {
    let delivering = [config.port(0).mode, config.port(1).mode];
    let spwm_delivery = delivering.contains(&PortMode::Spwm) && !delivering.contains(&PortMode::Square);
    if spwm_delivery && config.port(2).mode == PortMode::Square {
        Ok(())
    } else {
        Err(CliError::config("combined mode needs SPWM delivering bridges and a square-PWM consuming bridge"))
    }
}

/// The same converter with every SPWM bridge replaced by a full square wave.
fn square_counterpart(config: &Config) -> Config {
    let mut sq = config.clone();
    for k in 0..2 {
        if sq.port(k).mode == PortMode::Spwm {
            let p = sq.port_mut(k);
            p.mode = PortMode::Square;
            p.duty = 1.0;
        }
    }
    sq
}

fn run_phases(config: &Config, parallel: bool) -> Result<Vec<Point>, CliError> {
    let specs = PHASES
        .iter()
        .map(|&phi| {
            let mut cfg = config.clone();
            cfg.switching.port3.phase_rad = phi;
            cfg.converter_spec()
        })
        .collect::<tab_core::Result<Vec<_>>>()?;
    let sim = config.sim_config();
    let points = map_points(&specs, parallel, |s| run_point(s, &sim));
    Ok(points.into_iter().collect::<tab_core::Result<_>>()?)
}

fn relative_ripple(points: &[Point]) -> f64 {
    points.iter().map(|p| if p.v_out.abs() > 0.0 { p.ripple_pp / p.v_out.abs() } else { 0.0 }).sum::<f64>()
        / points.len() as f64
}

pub fn combined_mode(config: &Config, out: &Path, parallel: bool) -> Result<Outcome, CliError> {
    check(config)?;
    let combined = run_phases(config, parallel)?;
    let square = run_phases(&square_counterpart(config), parallel)?;

    let rows: Vec<Vec<f64>> = PHASES
        .iter()
        .zip(combined.iter().zip(&square))
        .map(|(&phi, (c, s))| vec![phi, c.v_out, c.ripple_pp, s.v_out, s.ripple_pp])
        .collect();
    report::write(out, &csv(&["phase_rad", "v_out", "ripple_pp", "v_out_square", "ripple_pp_square"], &rows))?;

    let mut rep = ExperimentReport::new("combined_mode", config);
    for ((&phi, c), s) in PHASES.iter().zip(&combined).zip(&square) {
        rep.rows.push(json!({ "phase_rad": phi, "combined": c, "square": s }));
    }
    let v: Vec<f64> = combined.iter().map(|p| p.v_out).collect();
    let monotone = is_strictly_monotone(&v, 1.0) || is_strictly_monotone(&v, -1.0);
    let (rc, rs) = (relative_ripple(&combined), relative_ripple(&square));
    rep.flag("phase_monotone", monotone);
    rep.flag("relative_ripple", rc);
    rep.flag("relative_ripple_square", rs);
    rep.flag("ripple_vs_square", if rc > rs { "larger" } else { "smaller" });
    rep.flag("csv_path", out.display().to_string());
    report::write(&sibling(out, ".json"), &rep.render())?;

    let mut outcome = Outcome::default();
    let nonsteady = combined.iter().chain(&square).filter(|p| !p.steady).count();
    if nonsteady > 0 {
        outcome.warnings.push(format!("{nonsteady} run(s) did not settle"));
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_square_config_is_rejected() {
        let err = check(&Config::ref_a()).unwrap_err();
        assert_eq!(err.code, 1);
    }

    #[test]
    fn counterpart_replaces_spwm() {
        let mut cfg = Config::ref_a();
        cfg.switching.port1.mode = PortMode::Spwm;
        cfg.switching.port1.duty = 0.3;
        let sq = square_counterpart(&cfg);
        assert_eq!(sq.port(0).mode, PortMode::Square);
        assert_eq!(sq.port(0).duty, 1.0);
    }
}
