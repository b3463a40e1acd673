//! One function per subcommand.

mod combined;
mod dispatch;
mod simulate;
mod sweep;
mod thd;

pub use combined::combined_mode;
pub use dispatch::solve_dispatch;
pub use simulate::simulate;
pub use sweep::sweep;
pub use thd::thd_compare;

use rayon::prelude::*;
use serde::Serialize;
use tab_core::analysis::ripple;
use tab_core::simulator::{self, port_power_measure, steady_state_output, ConverterSpec, SimConfig};

/// Steady-state summary of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub v_out: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub ripple_pp: f64,
    pub steady: bool,
    pub periods_run: usize,
}

pub fn run_point(spec: &ConverterSpec, sim: &SimConfig) -> tab_core::Result<Point> {
    let trace = simulator::simulate(spec, sim)?;
    let v_out = steady_state_output(&trace)?.volts;
    let final_v = trace.final_period("v_out").expect("simulated traces hold a full period");
    Ok(Point {
        v_out,
        p1: port_power_measure(&trace, 1)?,
        p2: port_power_measure(&trace, 2)?,
        p3: port_power_measure(&trace, 3)?,
        ripple_pp: ripple(final_v)?.peak_to_peak,
        steady: trace.steady,
        periods_run: trace.periods_run,
    })
}

/// Maps `f` over `items`, concurrently when asked; results keep input order.
pub(crate) fn map_points<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}
