//! Command-line front end: scene generation, exploration, planning,
//! rendering, label generation, verification, statistics, and benchmarking.
//! All paths are resolved relative to --workdir. Exit codes: 0 success,
//! 1 a check failed (verify/pipeline), 2 usage or runtime error.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use trajlab::config::PipelineConfig;
use trajlab::evalbench::{ate, cut_sequences, rpe, success_rate, AlignMode};
use trajlab::geom::CameraModel;
use trajlab::io;
use trajlab::labelgen::{compute_disparity, compute_flow, simulate_lidar, StereoRig, DEFAULT_TAU_OCC};
use trajlab::motionstats::{diversity_sigma, motion_matrices, principal_motion, project_motions, DeltaFrame};
use trajlab::pipeline::{explore_scene, plan_trajectory, run_pipeline};
use trajlab::scene::{generate_scene, scene_from_str, scene_to_string};
use trajlab::verify::{verify_sequence, VerifyThresholds};

#[derive(Parser)]
#[command(name = "trajlab", about = "Synthetic SLAM sequence generation and evaluation")]
struct Cli {
    /// Root directory all relative paths are resolved against.
    #[arg(long, default_value = ".")]
    workdir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random indoor scene file.
    Genscene {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "scene.txt")]
        out: PathBuf,
    },
    /// Map a scene by frontier exploration into an occupancy grid.
    Explore {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "map.tocc")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        resolution: f64,
        #[arg(long, default_value_t = 60)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Plan a smoothed loop trajectory over an explored map.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value = "path.txt")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        clearance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render RGB/depth/segmentation rasters for a pose file.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long, default_value = "frames")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 320)]
        size: u32,
        #[arg(long, default_value_t = 90.0)]
        fov: f64,
    },
    /// Generate flow, disparity, and LiDAR labels for a pose file.
    Labels {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long, default_value = "frames")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 320)]
        size: u32,
        #[arg(long, default_value_t = 90.0)]
        fov: f64,
        #[arg(long, default_value_t = 0.25)]
        baseline: f64,
        #[arg(long, default_value_t = 32)]
        lidar_lines: usize,
    },
    /// Verify a rendered sequence directory; exit 1 on any failed check.
    Verify {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long, default_value_t = 320)]
        size: u32,
        #[arg(long, default_value_t = 90.0)]
        fov: f64,
        #[arg(long, default_value_t = 5.0)]
        max_error: f64,
        #[arg(long, default_value_t = 0.3)]
        theta_occ: f64,
        #[arg(long, default_value_t = 0.25)]
        min_depth: f64,
        #[arg(long, default_value = "verify.txt")]
        out: PathBuf,
    },
    /// Motion-diversity statistics of a pose file.
    Stats {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// ATE/RPE/SR benchmark of an estimated trajectory against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        est: PathBuf,
        /// mono applies sim3 scale correction; stereo aligns rigidly.
        #[arg(long, default_value = "stereo")]
        mode: String,
        #[arg(long, default_value_t = 200)]
        cut: usize,
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
    /// Full generation pipeline; exit 1 when verification fails.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value = "sequence")]
        out_dir: PathBuf,
    },
}

fn resolve(workdir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        workdir.join(p)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let wd = &cli.workdir;
    match cli.command {
        Command::Genscene { seed, out } => {
            let scene = generate_scene(seed);
            std::fs::write(resolve(wd, &out), scene_to_string(&scene))?;
            println!("wrote {} primitives to {}", scene.primitives.len(), out.display());
        }
        Command::Explore {
            scene,
            out,
            resolution,
            budget,
            seed,
        } => {
            let text = std::fs::read_to_string(resolve(wd, &scene))?;
            let scene = scene_from_str(&text)?;
            let config = PipelineConfig {
                grid_resolution: resolution,
                explore_budget: budget,
                seed,
                ..Default::default()
            };
            let grid = explore_scene(&scene, &config)?;
            io::write_grid(&resolve(wd, &out), &grid)?;
            println!(
                "explored: {} free, {} occupied voxels -> {}",
                grid.count(trajlab::grid::CellState::Free),
                grid.count(trajlab::grid::CellState::Occupied),
                out.display()
            );
        }
        Command::Plan {
            map,
            out,
            clearance,
            seed,
        } => {
            let grid = io::read_grid(&resolve(wd, &map))?;
            let config = PipelineConfig {
                clearance,
                seed,
                ..Default::default()
            };
            let path = plan_trajectory(&grid, &config)?;
            let mut text = String::new();
            for p in &path {
                text.push_str(&format!("{:.9} {:.9} {:.9}\n", p.x, p.y, p.z));
            }
            std::fs::write(resolve(wd, &out), text)?;
            println!("planned {} waypoints -> {}", path.len(), out.display());
        }
        Command::Render {
            scene,
            poses,
            out_dir,
            size,
            fov,
        } => {
            let scene = scene_from_str(&std::fs::read_to_string(resolve(wd, &scene))?)?;
            let poses = io::read_poses(&resolve(wd, &poses))?;
            let cam = CameraModel::with_fov(fov, size);
            let root = resolve(wd, &out_dir);
            for sub in ["rgb", "depth", "seg"] {
                std::fs::create_dir_all(root.join(sub))?;
            }
            for (i, pose) in poses.iter().enumerate() {
                io::write_raster(&root.join(format!("rgb/{i:06}.ttnr")), &scene.render_rgb(pose, &cam))?;
                io::write_raster(&root.join(format!("depth/{i:06}.ttnr")), &scene.render_depth(pose, &cam))?;
                io::write_raster(&root.join(format!("seg/{i:06}.ttnr")), &scene.render_seg(pose, &cam))?;
            }
            println!("rendered {} frames into {}", poses.len(), out_dir.display());
        }
        Command::Labels {
            scene,
            poses,
            out_dir,
            size,
            fov,
            baseline,
            lidar_lines,
        } => {
            let scene = scene_from_str(&std::fs::read_to_string(resolve(wd, &scene))?)?;
            let poses = io::read_poses(&resolve(wd, &poses))?;
            let cam = CameraModel::with_fov(fov, size);
            let rig = StereoRig::new(cam, baseline)?;
            let spec = trajlab::labelgen::LidarSpec {
                n_lines: lidar_lines,
                ..Default::default()
            };
            let root = resolve(wd, &out_dir);
            for sub in ["flow", "flow_mask", "disparity", "disparity_mask", "lidar"] {
                std::fs::create_dir_all(root.join(sub))?;
            }
            let depths: Vec<_> = poses.iter().map(|p| scene.render_depth(p, &cam)).collect();
            for i in 0..poses.len() {
                let right = scene.render_depth(&rig.right_pose(&poses[i]), &cam);
                let (disp, mask) = compute_disparity(&depths[i], &right, &rig)?;
                io::write_raster(&root.join(format!("disparity/{i:06}.ttnr")), &disp)?;
                io::write_raster(&root.join(format!("disparity_mask/{i:06}.ttnr")), &mask)?;
                let points = simulate_lidar(&scene, &poses[i], &spec)?;
                io::write_lidar(&root.join(format!("lidar/{i:06}.tldr")), &points)?;
                if i + 1 < poses.len() {
                    let flow = compute_flow(
                        &depths[i],
                        &poses[i],
                        &poses[i + 1],
                        &depths[i + 1],
                        &cam,
                        DEFAULT_TAU_OCC,
                    )?;
                    io::write_raster(&root.join(format!("flow/{i:06}.ttnr")), &flow.flow)?;
                    io::write_raster(&root.join(format!("flow_mask/{i:06}.ttnr")), &flow.mask)?;
                }
            }
            println!("labels for {} frames into {}", poses.len(), out_dir.display());
        }
        Command::Verify {
            scene,
            poses,
            size,
            fov,
            max_error,
            theta_occ,
            min_depth,
            out,
        } => {
            let scene = scene_from_str(&std::fs::read_to_string(resolve(wd, &scene))?)?;
            let poses = io::read_poses(&resolve(wd, &poses))?;
            let cam = CameraModel::with_fov(fov, size);
            let rgbs: Vec<_> = poses.iter().map(|p| scene.render_rgb(p, &cam)).collect();
            let depths: Vec<_> = poses.iter().map(|p| scene.render_depth(p, &cam)).collect();
            let mut flows = Vec::new();
            for i in 0..poses.len().saturating_sub(1) {
                flows.push(compute_flow(
                    &depths[i],
                    &poses[i],
                    &poses[i + 1],
                    &depths[i + 1],
                    &cam,
                    DEFAULT_TAU_OCC,
                )?);
            }
            let report = verify_sequence(
                &rgbs,
                &depths,
                &flows,
                &VerifyThresholds {
                    max_photometric_error: max_error,
                    theta_occ,
                    min_obstacle_distance: min_depth,
                },
            )?;
            std::fs::write(resolve(wd, &out), report.to_text())?;
            print!("{}", report.to_text());
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Stats { poses, csv } => {
            let poses = io::read_poses(&resolve(wd, &poses))?;
            let sigma = diversity_sigma(&poses)?;
            println!("sigma {sigma:.6}");
            if let Some(csv_path) = csv {
                let m = motion_matrices(&poses, DeltaFrame::Body)?;
                let pt = principal_motion(&m.translations);
                let pr = principal_motion(&m.rotations);
                let proj_t = project_motions(&m.translations, &pt);
                let proj_r = project_motions(&m.rotations, &pr);
                let mut text = String::from("frame,t1,t2,t3,r1,r2,r3\n");
                for i in 0..proj_t.ncols() {
                    text.push_str(&format!(
                        "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                        i,
                        proj_t[(0, i)],
                        proj_t[(1, i)],
                        proj_t[(2, i)],
                        proj_r[(0, i)],
                        proj_r[(1, i)],
                        proj_r[(2, i)]
                    ));
                }
                std::fs::write(resolve(wd, &csv_path), text)?;
            }
        }
        Command::Eval {
            gt,
            est,
            mode,
            cut,
            outcomes,
        } => {
            let gt = io::read_poses(&resolve(wd, &gt))?;
            let est = io::read_poses(&resolve(wd, &est))?;
            let align = match mode.as_str() {
                "mono" => AlignMode::Sim3,
                "stereo" => AlignMode::Se3,
                other => return Err(format!("unknown mode {other:?}, expected mono or stereo").into()),
            };
            println!("# window start ate rpe_t rpe_r");
            let windows_gt = cut_sequences(&[gt], cut);
            let windows_est = cut_sequences(&[est], cut);
            let n = windows_gt.len().min(windows_est.len());
            if n == 0 {
                return Err(format!("no full {cut}-frame windows to evaluate").into());
            }
            for k in 0..n {
                let a = ate(&windows_est[k].frames, &windows_gt[k].frames, align)?;
                let (rt, rr) = rpe(&windows_est[k].frames, &windows_gt[k].frames)?;
                println!("{k} {} {a:.6} {rt:.6} {rr:.6}", windows_gt[k].start);
            }
            if let Some(path) = outcomes {
                let list = io::read_outcomes(&resolve(wd, &path))?;
                println!("# success_rate {:.6}", success_rate(&list)?);
            }
        }
        Command::Pipeline {
            config,
            seed,
            frames,
            out_dir,
        } => {
            let mut cfg = match config {
                Some(path) => PipelineConfig::from_file(&resolve(wd, &path))?,
                None => PipelineConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(f) = frames {
                cfg.frames = f;
            }
            let out = run_pipeline(&cfg, &resolve(wd, &out_dir))?;
            println!(
                "pipeline done: {} frame pairs, max warp error {:.3}, sigma {:.3}",
                out.report.pairs.len(),
                out.report.max_error(),
                out.sigma
            );
            if !out.report.passed() {
                eprintln!("verification FAILED; see verify.txt");
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
