use std::path::Path;

use serde_json::json;
use tab_core::config::Config;
use tab_core::simulator::{self, port_power_measure, steady_state_output};

use crate::report::{self, sibling, ExperimentReport};
use crate::{CliError, Outcome};

pub fn simulate(config: &Config, out: &Path) -> Result<Outcome, CliError> {
    let spec = config.converter_spec()?;
    let mut rep = ExperimentReport::new("simulate", config);
    let sidecar = sibling(out, ".json");
    let trace = match simulator::simulate(&spec, &config.sim_config()) {
        Ok(t) => t,
        Err(e @ tab_core::Error::SimulationDiverged { .. }) => {
            rep.flag("diverged", true);
            rep.flag("error", e.to_string());
            report::write(&sidecar, &rep.render())?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    report::write(out, &trace.to_csv())?;

    let steady = steady_state_output(&trace)?;
    rep.rows.push(json!({
        "p1": port_power_measure(&trace, 1)?,
        "p2": port_power_measure(&trace, 2)?,
        "p3": port_power_measure(&trace, 3)?,
        "periods_run": trace.periods_run,
        "v_out": steady.volts,
    }));
    rep.flag("diverged", false);
    rep.flag("steady", trace.steady);
    rep.flag("trace_path", out.display().to_string());
    report::write(&sidecar, &rep.render())?;

    let mut outcome = Outcome::default();
    if let Some(w) = steady.warning {
        outcome.warnings.push(w);
        outcome.exit_code = 3;
    }
    Ok(outcome)
}
