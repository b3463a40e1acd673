//! Published hardware measurements of the duty-cycle control experiment:
//! a 15 V source driving a resistive load through the converter.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyRow {
    /// Delivering-bridge duty in percent.
    pub duty_percent: f64,
    pub v_out: f64,
    pub p_in: f64,
    pub p_out: f64,
}

pub const HARDWARE_DUTY_SWEEP: [DutyRow; 9] = [
    DutyRow { duty_percent: 10.0, v_out: 0.13, p_in: 0.075, p_out: 0.0004225 },
    DutyRow { duty_percent: 15.0, v_out: 0.2, p_in: 0.12, p_out: 0.001 },
    DutyRow { duty_percent: 20.0, v_out: 1.24, p_in: 0.24, p_out: 0.03844 },
    DutyRow { duty_percent: 25.0, v_out: 2.52, p_in: 0.45, p_out: 0.15876 },
    DutyRow { duty_percent: 30.0, v_out: 3.6, p_in: 0.63, p_out: 0.324 },
    DutyRow { duty_percent: 35.0, v_out: 4.3, p_in: 0.69, p_out: 0.46225 },
    DutyRow { duty_percent: 40.0, v_out: 5.7, p_in: 1.155, p_out: 0.81225 },
    DutyRow { duty_percent: 45.0, v_out: 6.88, p_in: 1.86, p_out: 1.18336 },
    DutyRow { duty_percent: 50.0, v_out: 8.1, p_in: 2.595, p_out: 1.64025 },
];

/// Source voltage of the hardware experiment.
pub const HARDWARE_SOURCE_VOLTS: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadRow {
    pub duty_percent: f64,
    /// `V_out² / P_out`.
    pub load_ohm: f64,
    pub efficiency: f64,
}

/// Load resistance implied by each row.
pub fn implied_load(rows: &[DutyRow]) -> Result<Vec<LoadRow>> {
    rows.iter()
        .map(|r| {
            if !(r.p_out > 0.0 && r.p_in > 0.0) {
                return Err(invalid(format!("row at {}% has non-positive power", r.duty_percent)));
            }
            Ok(LoadRow { duty_percent: r.duty_percent, load_ohm: r.v_out * r.v_out / r.p_out, efficiency: r.p_out / r.p_in })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_row_implies_forty_ohms() {
        for row in implied_load(&HARDWARE_DUTY_SWEEP).unwrap() {
            assert!((row.load_ohm - 40.0).abs() < 0.2, "{row:?}");
            assert!(row.efficiency > 0.0 && row.efficiency < 1.0);
        }
    }

    #[test]
    fn output_rises_with_duty() {
        assert!(HARDWARE_DUTY_SWEEP.windows(2).all(|w| w[1].v_out > w[0].v_out && w[1].duty_percent > w[0].duty_percent));
    }

    #[test]
    fn rejects_zero_power() {
        let row = DutyRow { duty_percent: 0.0, v_out: 0.0, p_in: 0.0, p_out: 0.0 };
        assert!(implied_load(&[row]).is_err());
    }
}
