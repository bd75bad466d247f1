//! Downward camera, single-point LiDARs and the interlaced thermal array.

mod camera;
mod lidar;
mod thermal;

pub use camera::{
    camera_capture, camera_footprint, captured_in, footprint_unclipped, render_footprint_png, CameraFrame,
    CameraModel,
};
pub use lidar::{lidar_read, reading_from_truth, LidarModel, LidarMount, LidarReading, LidarSample};
pub use thermal::{
    heat_source_temperature, heat_sources, hotspot_detect, thermal_capture, true_thermal_field, HeatSource, Hotspot, ThermalFrame,
    ThermalModel, THERMAL_COLS, THERMAL_ROWS,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("degenerate camera footprint at altitude {0} m")]
    DegenerateFootprint(f64),
    #[error("sensor contract violated: {0}")]
    Contract(String),
    #[error("domain error: {0}")]
    Domain(String),
}
