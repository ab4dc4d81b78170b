//! Plain-text pipeline configuration: a documented key=value grammar so
//! configs can be archived next to the sequences they produced.

use crate::labelgen::LidarSpec;
use crate::poses::DifficultyProfile;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("key {key}: {msg}")]
    Value { key: String, msg: String },
}

/// Everything a pipeline run needs; the master seed fully determines every
/// downstream random stream.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Path to a scene file, or None to generate one from the master seed.
    pub scene_file: Option<String>,
    pub seed: u64,
    pub frames: usize,
    pub difficulty: String,
    pub image_size: u32,
    pub fov_deg: f64,
    pub baseline: f64,
    pub grid_resolution: f64,
    pub clearance: f64,
    pub rrt_iters: usize,
    pub explore_budget: usize,
    pub lidar_lines: usize,
    pub lidar_points_per_line: usize,
    pub lidar_cam_resolution: u32,
    pub lidar_max_range: f64,
    pub max_photometric_error: f64,
    pub theta_occ: f64,
    pub min_obstacle_distance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scene_file: None,
            seed: 0,
            frames: 100,
            difficulty: "medium".into(),
            image_size: 320,
            fov_deg: 90.0,
            baseline: 0.25,
            grid_resolution: 0.25,
            clearance: 0.5,
            rrt_iters: 2000,
            explore_budget: 60,
            lidar_lines: 32,
            lidar_points_per_line: 360,
            lidar_cam_resolution: 256,
            lidar_max_range: 60.0,
            max_photometric_error: 5.0,
            theta_occ: 0.3,
            min_obstacle_distance: 0.25,
        }
    }
}

impl PipelineConfig {
    pub fn difficulty_profile(&self) -> Result<DifficultyProfile, ConfigError> {
        DifficultyProfile::by_name(&self.difficulty).ok_or_else(|| ConfigError::Value {
            key: "difficulty".into(),
            msg: format!(
                "unknown profile {:?}, expected easy, medium, or hard",
                self.difficulty
            ),
        })
    }

    pub fn lidar_spec(&self) -> LidarSpec {
        LidarSpec {
            n_lines: self.lidar_lines,
            points_per_line: self.lidar_points_per_line,
            cam_resolution: self.lidar_cam_resolution,
            max_range: self.lidar_max_range,
            ..Default::default()
        }
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim().to_string();
            if kv.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
                return Err(ConfigError::Parse {
                    line: line_no,
                    msg: format!("duplicate key {key:?}"),
                });
            }
        }

        let mut cfg = PipelineConfig::default();
        for (key, (line_no, value)) in &kv {
            let bad = |msg: String| ConfigError::Parse {
                line: *line_no,
                msg,
            };
            macro_rules! parse {
                ($v:expr) => {
                    $v.parse()
                        .map_err(|e| bad(format!("key {key}: {e}")))?
                };
            }
            match key.as_str() {
                "scene_file" => cfg.scene_file = Some(value.clone()),
                "seed" => cfg.seed = parse!(value),
                "frames" => cfg.frames = parse!(value),
                "difficulty" => cfg.difficulty = value.clone(),
                "image_size" => cfg.image_size = parse!(value),
                "fov_deg" => cfg.fov_deg = parse!(value),
                "baseline" => cfg.baseline = parse!(value),
                "grid_resolution" => cfg.grid_resolution = parse!(value),
                "clearance" => cfg.clearance = parse!(value),
                "rrt_iters" => cfg.rrt_iters = parse!(value),
                "explore_budget" => cfg.explore_budget = parse!(value),
                "lidar_lines" => cfg.lidar_lines = parse!(value),
                "lidar_points_per_line" => cfg.lidar_points_per_line = parse!(value),
                "lidar_cam_resolution" => cfg.lidar_cam_resolution = parse!(value),
                "lidar_max_range" => cfg.lidar_max_range = parse!(value),
                "max_photometric_error" => cfg.max_photometric_error = parse!(value),
                "theta_occ" => cfg.theta_occ = parse!(value),
                "min_obstacle_distance" => cfg.min_obstacle_distance = parse!(value),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        cfg.difficulty_profile()?;
        if cfg.frames == 0 {
            return Err(ConfigError::Value {
                key: "frames".into(),
                msg: "must be positive".into(),
            });
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_string(&self) -> String {
        let mut s = String::new();
        if let Some(f) = &self.scene_file {
            s.push_str(&format!("scene_file={f}\n"));
        }
        s.push_str(&format!("seed={}\n", self.seed));
        s.push_str(&format!("frames={}\n", self.frames));
        s.push_str(&format!("difficulty={}\n", self.difficulty));
        s.push_str(&format!("image_size={}\n", self.image_size));
        s.push_str(&format!("fov_deg={}\n", self.fov_deg));
        s.push_str(&format!("baseline={}\n", self.baseline));
        s.push_str(&format!("grid_resolution={}\n", self.grid_resolution));
        s.push_str(&format!("clearance={}\n", self.clearance));
        s.push_str(&format!("rrt_iters={}\n", self.rrt_iters));
        s.push_str(&format!("explore_budget={}\n", self.explore_budget));
        s.push_str(&format!("lidar_lines={}\n", self.lidar_lines));
        s.push_str(&format!("lidar_points_per_line={}\n", self.lidar_points_per_line));
        s.push_str(&format!("lidar_cam_resolution={}\n", self.lidar_cam_resolution));
        s.push_str(&format!("lidar_max_range={}\n", self.lidar_max_range));
        s.push_str(&format!("max_photometric_error={}\n", self.max_photometric_error));
        s.push_str(&format!("theta_occ={}\n", self.theta_occ));
        s.push_str(&format!("min_obstacle_distance={}\n", self.min_obstacle_distance));
        s
    }
}
