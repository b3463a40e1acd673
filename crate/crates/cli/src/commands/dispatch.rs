use serde_json::json;
use tab_core::config::Config;
use tab_core::powerflow::dispatch_solve;

use crate::report::{render_json, to_value};
use crate::{CliError, Outcome};

/// Prints the phase solution as JSON. Bridge angles are leads; the matching
/// modulation phases (delays) are listed alongside.
pub fn solve_dispatch(config: &Config, grid: f64, load: f64) -> Result<Outcome, CliError> {
    let s = config.link_coefficients()?;
    let sol = dispatch_solve(s, grid, load)?;
    let value = json!({
        "bridge_phases_rad": sol.bridge_phases,
        "iterations": sol.iterations,
        "link_coefficients": s,
        "modulation_phases_rad": sol.bridge_phases.map(|d| 0.0 - d),
        "phases": to_value(&sol.phases),
        "power": to_value(&sol.power),
        "residual_w": sol.residual,
        "targets": { "grid_w": grid, "load_w": load },
    });
    Ok(Outcome { stdout: render_json(&value), ..Outcome::default() })
}
