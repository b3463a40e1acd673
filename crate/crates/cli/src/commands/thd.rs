use std::path::Path;

use serde_json::json;
use tab_core::analysis::{spectrum, thd, Spectrum};
use tab_core::config::Config;
use tab_core::modulation::{spwm, square_pwm, SpwmConfig, SquarePwmConfig};

use crate::report::{self, sibling, ExperimentReport};
use crate::{CliError, Outcome};

/// Samples per fundamental period; a power of two well above the carrier.
pub const SAMPLES_PER_PERIOD: usize = 1 << 14;
pub const MAX_ORDER: usize = 199;
/// Upper end of the low-order band that SPWM is expected to clean up.
pub const LOW_ORDER_MAX: usize = 9;
pub const MIN_CARRIER_RATIO: f64 = 20.0;

pub struct Comparison {
    pub square: Spectrum,
    pub spwm: Spectrum,
    pub square_thd: f64,
    pub spwm_thd: f64,
    pub square_low_thd: f64,
    pub spwm_low_thd: f64,
}

/// Full-duty square wave and SPWM at the same rail and fundamental frequency.
pub fn compare(rail: f64, fs: f64, ma: f64, carrier_ratio: f64) -> tab_core::Result<Comparison> {
    let sq = SquarePwmConfig::new(fs, 1.0, 0.0, rail)?;
    let sp = SpwmConfig::new(carrier_ratio * fs, fs, ma, 1.0, rail)?;
    let dt = 1.0 / (fs * SAMPLES_PER_PERIOD as f64);
    let sample = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { (0..SAMPLES_PER_PERIOD).map(|k| f(k as f64 * dt)).collect() };
    let square = spectrum(&sample(&|t| square_pwm(&sq, t)), dt, fs, MAX_ORDER)?;
    let spwm_spec = spectrum(&sample(&|t| spwm(&sp, t)), dt, fs, MAX_ORDER)?;
    Ok(Comparison {
        square_thd: thd(&square, MAX_ORDER)?,
        spwm_thd: thd(&spwm_spec, MAX_ORDER)?,
        square_low_thd: thd(&square, LOW_ORDER_MAX)?,
        spwm_low_thd: thd(&spwm_spec, LOW_ORDER_MAX)?,
        square,
        spwm: spwm_spec,
    })
}

/// Writes the report to `out` and the two spectra next to it.
pub fn thd_compare(config: &Config, out: &Path) -> Result<Outcome, CliError> {
    let port = config.port(0);
    let (ma, ratio) = (port.ma, port.carrier_ratio);
    let c = compare(config.ports.v1_v, config.switching.fs_hz, ma, ratio)?;
    let square_path = sibling(out, "_square.csv");
    let spwm_path = sibling(out, "_spwm.csv");
    report::write(&square_path, &c.square.to_csv())?;
    report::write(&spwm_path, &c.spwm.to_csv())?;

    let mut rep = ExperimentReport::new("thd_compare", config);
    let ratio_low = c.spwm_low_thd / c.square_low_thd;
    rep.rows.push(json!({
        "waveform": "square",
        "fundamental": c.square.fundamental(),
        "thd": c.square_thd,
        "thd_low_order": c.square_low_thd,
        "spectrum_path": square_path.display().to_string(),
    }));
    rep.rows.push(json!({
        "waveform": "spwm",
        "fundamental": c.spwm.fundamental(),
        "thd": c.spwm_thd,
        "thd_low_order": c.spwm_low_thd,
        "spectrum_path": spwm_path.display().to_string(),
        "ma": ma,
        "carrier_ratio": ratio,
    }));
    rep.flag("low_order_band", [2, LOW_ORDER_MAX]);
    rep.flag("low_order_thd_ratio", ratio_low);
    rep.flag("spwm_less_low_order_distortion", ratio_low < 0.2);
    let mut outcome = Outcome::default();
    if ratio < MIN_CARRIER_RATIO {
        let w = format!("carrier ratio {ratio} is below {MIN_CARRIER_RATIO}; low-order comparison may not hold");
        rep.flag("warning", &w);
        outcome.warnings.push(w);
    }
    report::write(out, &rep.render())?;
    Ok(outcome)
}
