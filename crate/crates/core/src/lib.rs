//! Simulator-free generation toolkit for SLAM training data: an analytic
//! ray-cast renderer, occupancy-grid exploration, RRT*-based trajectory
//! planning, dense ground-truth labels (optical flow, stereo disparity,
//! simulated LiDAR), automatic verification, motion-diversity statistics,
//! and trajectory benchmarking.

pub mod config;
pub mod evalbench;
pub mod geom;
pub mod grid;
pub mod io;
pub mod labelgen;
pub mod mapper;
pub mod motionstats;
pub mod pipeline;
pub mod planner;
pub mod poses;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod spline;
pub mod verify;

pub use geom::{CameraModel, Pose};
pub use raster::{RasterImage, DEPTH_MISS};
pub use scene::Scene;
