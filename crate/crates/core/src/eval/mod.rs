//! False-alarm calibration, Monte Carlo run lengths and efficiency reports.

mod calibrate;
mod report;
mod run_length;

pub use calibrate::{
    calibrate_threshold, calibrate_threshold_mc, CalibrationConfig, CalibrationMethod,
};
pub use report::{
    efficiency_report, kappa, least_squares_slope, mean_information, theoretical_delay_bound,
    EfficiencyConfig, EfficiencyReport,
};
pub use run_length::{
    estimate_delay, estimate_delay_random_gamma, estimate_mtfa, simulate_run_lengths,
    RunLengthEstimate,
};
