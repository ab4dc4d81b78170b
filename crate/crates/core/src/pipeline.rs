//! End-to-end sequence generation: scene -> exploration -> trajectory graph
//! -> loop sampling -> smoothing -> pose randomization -> rendering -> labels
//! -> verification, all derived deterministically from one master seed.

use crate::config::PipelineConfig;
use crate::geom::{look_at, CameraModel};
use crate::grid::OccupancyGrid;
use crate::io::{self, ManifestEntry};
use crate::labelgen::{compute_disparity, compute_flow, simulate_lidar, StereoRig, DEFAULT_TAU_OCC};
use crate::mapper::{explore, ExploreParams};
use crate::planner::{build_graph, sample_loop, FreeSpace, GraphParams, RrtParams};
use crate::poses::randomize_poses;
use crate::rng::derive_seed;
use crate::scene::{generate_scene, scene_from_str, scene_to_string, Scene};
use crate::spline::{smooth_path, SmoothParams};
use crate::verify::{verify_sequence, VerifyReport, VerifyThresholds};
use nalgebra::Vector3;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("stage {stage}{}: {msg}", frame.map(|f| format!(" (frame {f})")).unwrap_or_default())]
pub struct PipelineError {
    pub stage: &'static str,
    pub frame: Option<usize>,
    pub msg: String,
}

fn stage_err(stage: &'static str, err: impl std::fmt::Display) -> PipelineError {
    PipelineError {
        stage,
        frame: None,
        msg: err.to_string(),
    }
}

fn frame_err(stage: &'static str, frame: usize, err: impl std::fmt::Display) -> PipelineError {
    PipelineError {
        stage,
        frame: Some(frame),
        msg: err.to_string(),
    }
}

const N_GRAPH_NODES: usize = 24;
/// Exploration renders its own small depth panoramas; label rendering uses
/// the configured camera.
const EXPLORE_CAM_SIZE: u32 = 128;

pub struct PipelineOutput {
    pub report: VerifyReport,
    pub sigma: f64,
    pub manifest: Vec<ManifestEntry>,
}

/// Scene from the configured file, or generated from the master seed.
pub fn load_or_generate_scene(config: &PipelineConfig) -> Result<Scene, PipelineError> {
    match &config.scene_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| stage_err("scene", format!("{path}: {e}")))?;
            scene_from_str(&text).map_err(|e| stage_err("scene", e))
        }
        None => Ok(generate_scene(derive_seed(config.seed, "scene", 0))),
    }
}

/// Empty occupancy grid covering the scene bounds.
pub fn grid_for_scene(scene: &Scene, resolution: f64) -> Result<OccupancyGrid, PipelineError> {
    let span = scene.bounds_max - scene.bounds_min;
    let dims = [
        (span.x / resolution).ceil() as usize,
        (span.y / resolution).ceil() as usize,
        (span.z / resolution).ceil() as usize,
    ];
    OccupancyGrid::new(scene.bounds_min, resolution, dims).map_err(|e| stage_err("explore", e))
}

/// Maps the scene by frontier exploration starting from the bounds center.
pub fn explore_scene(
    scene: &Scene,
    config: &PipelineConfig,
) -> Result<OccupancyGrid, PipelineError> {
    let grid = grid_for_scene(scene, config.grid_resolution)?;
    let center = (scene.bounds_min + scene.bounds_max) / 2.0;
    let start = look_at(center, center + Vector3::new(1.0, 0.0, 0.0));
    let cam = CameraModel::with_fov(90.0, EXPLORE_CAM_SIZE);
    let params = ExploreParams {
        budget: config.explore_budget,
        seed: derive_seed(config.seed, "explore", 0),
        ..Default::default()
    };
    let result = explore(scene, &start, &cam, grid, &params).map_err(|e| stage_err("explore", e))?;
    Ok(result.grid)
}

/// Builds the trajectory graph on the explored map, samples a loop, and
/// smooths it into the path the camera will follow.
pub fn plan_trajectory(
    grid: &OccupancyGrid,
    config: &PipelineConfig,
) -> Result<Vec<Vector3<f64>>, PipelineError> {
    let space = FreeSpace::new(grid);
    let graph_params = GraphParams {
        rrt: RrtParams {
            clearance: config.clearance,
            max_iters: config.rrt_iters,
            early_stop: true,
            ..Default::default()
        },
        ..Default::default()
    };
    let graph = build_graph(
        &space,
        N_GRAPH_NODES,
        &graph_params,
        derive_seed(config.seed, "graph", 0),
    )
    .map_err(|e| stage_err("plan", e))?;
    let polyline = match sample_loop(&graph, derive_seed(config.seed, "loop", 0)) {
        Some(l) => l.polyline,
        None => {
            // acyclic graph: fall back to the longest single edge, traversed
            // out and back so the trajectory still loops
            let best = graph
                .edges
                .iter()
                .max_by(|a, b| a.cost.total_cmp(&b.cost))
                .ok_or_else(|| stage_err("plan", "trajectory graph has no edges"))?;
            let mut path = best.path.clone();
            path.extend(best.path.iter().rev().skip(1));
            path
        }
    };
    let smooth = smooth_path(
        &space,
        &polyline,
        &SmoothParams {
            clearance: config.clearance,
            ..Default::default()
        },
    );
    Ok(smooth)
}

fn frame_name(dir: &str, frame: usize) -> String {
    format!("{dir}/{frame:06}.ttnr")
}

/// Runs the whole pipeline into `workdir`. Returns an error if any stage
/// fails; the caller decides the exit status from `report.passed()`.
pub fn run_pipeline(config: &PipelineConfig, workdir: &Path) -> Result<PipelineOutput, PipelineError> {
    let profile = config
        .difficulty_profile()
        .map_err(|e| stage_err("config", e))?;
    let cam = CameraModel::with_fov(config.fov_deg, config.image_size);
    let rig = StereoRig::new(cam, config.baseline).map_err(|e| stage_err("config", e))?;
    let lidar_spec = config.lidar_spec();

    let mut manifest: Vec<ManifestEntry> = Vec::new();
    let mut add = |format: &str, frame: Option<usize>, rel: String| {
        manifest.push(ManifestEntry {
            format: format.into(),
            frame,
            path: rel,
        });
    };
    fs::create_dir_all(workdir).map_err(|e| stage_err("setup", e))?;
    for sub in ["rgb", "depth", "seg", "flow", "flow_mask", "disparity", "disparity_mask", "lidar"] {
        fs::create_dir_all(workdir.join(sub)).map_err(|e| stage_err("setup", e))?;
    }
    let write = |rel: &str, img: &crate::raster::RasterImage| -> Result<(), PipelineError> {
        io::write_raster(&workdir.join(rel), img).map_err(|e| stage_err("write", e))
    };

    // stage: scene
    let scene = load_or_generate_scene(config)?;
    fs::write(workdir.join("scene.txt"), scene_to_string(&scene))
        .map_err(|e| stage_err("scene", e))?;
    add("scene", None, "scene.txt".into());
    fs::write(workdir.join("config.txt"), config.to_string())
        .map_err(|e| stage_err("setup", e))?;
    add("config", None, "config.txt".into());

    // stage: exploration
    let grid = explore_scene(&scene, config)?;
    io::write_grid(&workdir.join("map.tocc"), &grid).map_err(|e| stage_err("explore", e))?;
    add("grid", None, "map.tocc".into());

    // stage: planning
    let path = plan_trajectory(&grid, config)?;

    // stage: pose randomization
    let poses = randomize_poses(&path, config.frames, &profile, derive_seed(config.seed, "poses", 0));
    io::write_poses(&workdir.join("poses.txt"), &poses).map_err(|e| stage_err("poses", e))?;
    add("poses", None, "poses.txt".into());

    // stage: rendering + labels, frame by frame
    let mut rgbs = Vec::with_capacity(poses.len());
    let mut depths = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let rgb = scene.render_rgb(pose, &cam);
        let depth = scene.render_depth(pose, &cam);
        let seg = scene.render_seg(pose, &cam);
        write(&frame_name("rgb", i), &rgb)?;
        write(&frame_name("depth", i), &depth)?;
        write(&frame_name("seg", i), &seg)?;
        add("rgb", Some(i), frame_name("rgb", i));
        add("depth", Some(i), frame_name("depth", i));
        add("seg", Some(i), frame_name("seg", i));

        let right_depth = scene.render_depth(&rig.right_pose(pose), &cam);
        let (disparity, disp_mask) = compute_disparity(&depth, &right_depth, &rig)
            .map_err(|e| frame_err("labels", i, e))?;
        write(&frame_name("disparity", i), &disparity)?;
        write(&frame_name("disparity_mask", i), &disp_mask)?;
        add("disparity", Some(i), frame_name("disparity", i));
        add("disparity_mask", Some(i), frame_name("disparity_mask", i));

        let points = simulate_lidar(&scene, pose, &lidar_spec)
            .map_err(|e| frame_err("lidar", i, e))?;
        let lidar_rel = format!("lidar/{i:06}.tldr");
        io::write_lidar(&workdir.join(&lidar_rel), &points)
            .map_err(|e| frame_err("lidar", i, e))?;
        add("lidar", Some(i), lidar_rel);

        rgbs.push(rgb);
        depths.push(depth);
    }

    let mut flows = Vec::with_capacity(poses.len().saturating_sub(1));
    for i in 0..poses.len().saturating_sub(1) {
        let flow = compute_flow(
            &depths[i],
            &poses[i],
            &poses[i + 1],
            &depths[i + 1],
            &cam,
            DEFAULT_TAU_OCC,
        )
        .map_err(|e| frame_err("flow", i, e))?;
        write(&frame_name("flow", i), &flow.flow)?;
        write(&frame_name("flow_mask", i), &flow.mask)?;
        add("flow", Some(i), frame_name("flow", i));
        add("flow_mask", Some(i), frame_name("flow_mask", i));
        flows.push(flow);
    }

    // stage: verification
    let thresholds = VerifyThresholds {
        max_photometric_error: config.max_photometric_error,
        theta_occ: config.theta_occ,
        min_obstacle_distance: config.min_obstacle_distance,
    };
    let report = verify_sequence(&rgbs, &depths, &flows, &thresholds)
        .map_err(|e| stage_err("verify", e))?;
    fs::write(workdir.join("verify.txt"), report.to_text())
        .map_err(|e| stage_err("verify", e))?;
    add("verify", None, "verify.txt".into());

    let sigma = crate::motionstats::diversity_sigma(&poses)
        .map_err(|e| stage_err("stats", e))?;
    fs::write(workdir.join("sigma.txt"), format!("{sigma:.9}\n"))
        .map_err(|e| stage_err("stats", e))?;
    add("sigma", None, "sigma.txt".into());

    io::write_manifest(&workdir.join("manifest.txt"), &manifest)
        .map_err(|e| stage_err("manifest", e))?;

    Ok(PipelineOutput {
        report,
        sigma,
        manifest,
    })
}

/// Recursive listing of (relative path, file bytes hash) for tree comparison.
pub fn hash_tree(root: &Path) -> std::io::Result<Vec<(String, u64)>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, u64)>) -> std::io::Result<()> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let bytes = fs::read(&path)?;
                // FNV-1a
                let mut h: u64 = 0xcbf29ce484222325;
                for b in &bytes {
                    h ^= *b as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, h));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn small_pipeline_run_produces_consistent_artifacts() {
        let dir = tempdir().unwrap();
        let config = PipelineConfig {
            frames: 4,
            image_size: 48,
            lidar_lines: 4,
            lidar_points_per_line: 120,
            lidar_cam_resolution: 128,
            explore_budget: 40,
            seed: 11,
            ..Default::default()
        };
        let out = run_pipeline(&config, dir.path()).unwrap();
        assert_eq!(out.report.pairs.len(), 3);

        let poses = io::read_poses(&dir.path().join("poses.txt")).unwrap();
        assert_eq!(poses.len(), 4);
        let manifest = io::read_manifest(&dir.path().join("manifest.txt")).unwrap();
        let flows = manifest.iter().filter(|e| e.format == "flow").count();
        let disps = manifest.iter().filter(|e| e.format == "disparity").count();
        assert_eq!(flows, 3);
        assert_eq!(disps, 4);
        for e in &manifest {
            assert!(dir.path().join(&e.path).exists(), "missing {}", e.path);
        }
    }

    #[test]
    fn hash_tree_detects_differences() {
        let dir = tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("a.txt"), b"hello").unwrap();
        fs::write(dir.path().join("sub/b.txt"), b"world").unwrap();
        let h1 = hash_tree(dir.path()).unwrap();
        assert_eq!(h1.len(), 2);
        fs::write(dir.path().join("sub/b.txt"), b"world!").unwrap();
        let h2 = hash_tree(dir.path()).unwrap();
        assert_ne!(h1, h2);
    }
}
