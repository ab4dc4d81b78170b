//! Frontier-based active mapping: carves an occupancy grid from rendered
//! depth images until no frontier voxels remain.

use crate::geom::{look_at, CameraModel, Pose};
use crate::grid::{CellState, GridError, OccupancyGrid};
use crate::planner::{rrt_star, FreeSpace, RrtParams};
use crate::raster::{RasterImage, DEPTH_MISS};
use crate::scene::Scene;
use nalgebra::{UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("camera pose {0:?} outside grid bounds")]
    PoseOutsideGrid(Vector3<f64>),
    #[error("start pose is inside an obstacle")]
    StartInObstacle,
    #[error("no reachable viewpoint for any frontier cluster")]
    NoReachableViewpoint,
}

/// Marks voxels along every depth-image ray: traversed voxels become free,
/// the hit voxel becomes occupied. Rays that miss (or hit beyond
/// `max_range`) carve free space up to `max_range`. Occupied wins over free
/// within a frame; across frames only unknown voxels change.
pub fn integrate_depth(
    grid: &mut OccupancyGrid,
    depth: &RasterImage,
    pose: &Pose,
    cam: &CameraModel,
    max_range: f64,
) -> Result<(), MapError> {
    let origin = pose.translation();
    if grid.voxel_of(&origin).is_none() {
        return Err(MapError::PoseOutsideGrid(origin));
    }
    let zbuf = depth.as_f32().expect("depth image must be f32");
    let nudge = grid.resolution * 1e-3;

    let mut free_ends: Vec<Vector3<f64>> = Vec::with_capacity(zbuf.len());
    let mut hits: Vec<(Vector3<f64>, Vector3<f64>)> = Vec::new(); // (hit point, dir)

    for v in 0..cam.height {
        for u in 0..cam.width {
            let z = zbuf[(v * cam.width + u) as usize] as f64;
            let d_cam = cam.ray_dir(u as f64, v as f64);
            let n = d_cam.norm();
            let d_world = pose.rotation() * (d_cam / n);
            let ray_len = z * n;
            if z >= DEPTH_MISS as f64 || ray_len > max_range {
                free_ends.push(origin + d_world * max_range);
            } else {
                hits.push((origin + d_world * ray_len, d_world));
                // carve free strictly short of the surface: a carve segment
                // ending exactly on a voxel corner can otherwise step into a
                // neighbor of the hit voxel that the hit set does not cover
                free_ends.push(origin + d_world * (ray_len - nudge).max(0.0));
            }
        }
    }

    // occupied first so free carving in this frame cannot claim hit voxels
    let mut hit_voxels = Vec::with_capacity(hits.len());
    for (p, dir) in &hits {
        // nudged along the ray so boundary hits land inside the surface voxel
        if let Some(idx) = grid.voxel_of(&(p + dir * nudge)) {
            grid.observe(idx, CellState::Occupied);
            hit_voxels.push(idx);
        }
    }
    let hit_set: std::collections::HashSet<[usize; 3]> = hit_voxels.into_iter().collect();
    for end in &free_ends {
        for idx in grid.traverse(&origin, end) {
            if !hit_set.contains(&idx) {
                grid.observe(idx, CellState::Free);
            }
        }
    }
    Ok(())
}

/// A frontier voxel: free and 6-adjacent to at least one unknown voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frontier {
    pub voxel: [usize; 3],
    pub cluster_id: usize,
}

#[derive(Debug, Clone)]
pub struct FrontierCluster {
    pub id: usize,
    pub voxels: Vec<[usize; 3]>,
    pub centroid: Vector3<f64>,
}

const NEIGH6: [[isize; 3]; 6] = [
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
];

fn offset(idx: [usize; 3], d: [isize; 3], dims: [usize; 3]) -> Option<[usize; 3]> {
    let mut out = [0usize; 3];
    for k in 0..3 {
        let v = idx[k] as isize + d[k];
        if v < 0 || v as usize >= dims[k] {
            return None;
        }
        out[k] = v as usize;
    }
    Some(out)
}

/// Frontier voxels clustered by 26-connectivity, largest cluster first.
/// Voxels beyond the grid boundary do not count as unknown.
pub fn detect_frontiers(grid: &OccupancyGrid) -> Vec<FrontierCluster> {
    let dims = grid.dims;
    let mut is_frontier = vec![false; dims[0] * dims[1] * dims[2]];
    let mut any = false;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let idx = [x, y, z];
                if grid.state(idx) != CellState::Free {
                    continue;
                }
                let frontier = NEIGH6.iter().any(|d| {
                    offset(idx, *d, dims)
                        .map_or(false, |n| grid.state(n) == CellState::Unknown)
                });
                if frontier {
                    is_frontier[grid.linear(idx)] = true;
                    any = true;
                }
            }
        }
    }
    if !any {
        return Vec::new();
    }

    // flood-fill 26-connected clusters in deterministic scan order
    let mut visited = vec![false; is_frontier.len()];
    let mut clusters = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let seed = [x, y, z];
                let li = grid.linear(seed);
                if !is_frontier[li] || visited[li] {
                    continue;
                }
                let mut voxels = Vec::new();
                let mut stack = vec![seed];
                visited[li] = true;
                while let Some(v) = stack.pop() {
                    voxels.push(v);
                    for dz in -1isize..=1 {
                        for dy in -1isize..=1 {
                            for dx in -1isize..=1 {
                                if dx == 0 && dy == 0 && dz == 0 {
                                    continue;
                                }
                                if let Some(n) = offset(v, [dx, dy, dz], dims) {
                                    let ln = grid.linear(n);
                                    if is_frontier[ln] && !visited[ln] {
                                        visited[ln] = true;
                                        stack.push(n);
                                    }
                                }
                            }
                        }
                    }
                }
                voxels.sort_unstable();
                let centroid = voxels
                    .iter()
                    .map(|&v| grid.center(v))
                    .sum::<Vector3<f64>>()
                    / voxels.len() as f64;
                clusters.push(FrontierCluster {
                    id: clusters.len(),
                    voxels,
                    centroid,
                });
            }
        }
    }
    clusters.sort_by(|a, b| b.voxels.len().cmp(&a.voxels.len()).then(a.id.cmp(&b.id)));
    clusters
}

#[derive(Debug, Clone)]
pub struct ExploreParams {
    pub max_range: f64,
    /// Viewpoints are accepted within this distance of a frontier centroid.
    pub sensor_range: f64,
    pub clearance: f64,
    pub budget: usize,
    pub nav_iters: usize,
    pub seed: u64,
}

impl Default for ExploreParams {
    fn default() -> Self {
        ExploreParams {
            max_range: 20.0,
            sensor_range: 6.0,
            clearance: 0.25,
            budget: 200,
            nav_iters: 1500,
            seed: 0,
        }
    }
}

/// True when a straight grid ray from `from` to `to` crosses no occupied voxel.
fn line_of_sight(grid: &OccupancyGrid, from: &Vector3<f64>, to: &Vector3<f64>) -> bool {
    grid.traverse(from, to)
        .iter()
        .all(|&idx| grid.state(idx) != CellState::Occupied)
}

/// Deterministically picks a collision-free viewpoint serving the largest
/// frontier cluster: the free voxel center (with clearance) nearest the
/// cluster centroid within sensor range and line of sight, oriented at the
/// centroid. Clusters with no viable viewpoint are skipped.
pub fn select_next_view(
    grid: &OccupancyGrid,
    clusters: &[FrontierCluster],
    _current: &Pose,
    params: &ExploreParams,
) -> Result<(Pose, usize), MapError> {
    let space = FreeSpace::new(grid);
    for cluster in clusters {
        let c = cluster.centroid;
        // candidate free voxels sorted by distance to the centroid
        let mut candidates: Vec<([usize; 3], f64)> = Vec::new();
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    let idx = [x, y, z];
                    if grid.state(idx) != CellState::Free {
                        continue;
                    }
                    let p = grid.center(idx);
                    let d = (p - c).norm();
                    if d < grid.resolution || d > params.sensor_range {
                        continue;
                    }
                    if !space.point_ok(&p, params.clearance) {
                        continue;
                    }
                    candidates.push((idx, d));
                }
            }
        }
        candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (idx, _) in candidates.into_iter().take(64) {
            let eye = grid.center(idx);
            if line_of_sight(grid, &eye, &c) {
                let target = if (c - eye).norm() < 1e-9 {
                    c + Vector3::new(1.0, 0.0, 0.0)
                } else {
                    c
                };
                return Ok((look_at(eye, target), cluster.id));
            }
        }
    }
    Err(MapError::NoReachableViewpoint)
}

#[derive(Debug)]
pub struct ExploreResult {
    pub grid: OccupancyGrid,
    pub visited: Vec<Pose>,
    /// False when the iteration budget ran out with frontiers remaining.
    pub complete: bool,
}

fn panorama_views(pose: &Pose) -> Vec<Pose> {
    let eye = pose.translation();
    let mut views = Vec::with_capacity(6);
    for k in 0..4 {
        let yaw = std::f64::consts::FRAC_PI_2 * k as f64;
        let dir = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
        views.push(look_at(eye, eye + dir));
    }
    // straight up / straight down to close the panorama's polar gaps;
    // rotation_between is None for the antipodal (down) direction, so that
    // case gets an explicit half-turn about x
    for up in [1.0, -1.0] {
        let dir = Vector3::new(0.0, 0.0, up);
        let rot = UnitQuaternion::rotation_between(&Vector3::new(0.0, 0.0, 1.0), &dir)
            .unwrap_or_else(|| {
                UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
            });
        views.push(Pose::new(rot, eye));
    }
    views
}

/// Render -> integrate -> detect -> select -> navigate loop until the grid
/// has no frontiers or the budget is exhausted.
pub fn explore(
    scene: &Scene,
    start: &Pose,
    cam: &CameraModel,
    mut grid: OccupancyGrid,
    params: &ExploreParams,
) -> Result<ExploreResult, MapError> {
    if scene.contains(&start.translation()) {
        return Err(MapError::StartInObstacle);
    }

    let mut current = *start;
    let mut visited = vec![current];
    let integrate_at = |pose: &Pose, grid: &mut OccupancyGrid| -> Result<(), MapError> {
        for view in panorama_views(pose) {
            let depth = scene.render_depth(&view, cam);
            integrate_depth(grid, &depth, &view, cam, params.max_range)?;
        }
        Ok(())
    };
    integrate_at(&current, &mut grid)?;

    let mut complete = false;
    for iter in 0..params.budget {
        let clusters = detect_frontiers(&grid);
        if clusters.is_empty() {
            complete = true;
            break;
        }

        // try clusters largest-first until one yields a reachable viewpoint
        let space = FreeSpace::new(&grid);
        let nav = RrtParams {
            step: grid.resolution * 3.0,
            clearance: params.clearance,
            max_iters: params.nav_iters,
            goal_bias: 0.15,
            rewire_gamma: 6.0,
            early_stop: true,
        };
        let mut nav_path: Option<(Pose, Vec<Vector3<f64>>)> = None;
        for ci in 0..clusters.len() {
            let Ok((view, _)) = select_next_view(&grid, &clusters[ci..ci + 1], &current, params)
            else {
                continue;
            };
            let seed = params
                .seed
                .wrapping_add((iter * 97 + ci) as u64)
                .wrapping_mul(0x9E37_79B9);
            if let Ok(Some(path)) =
                rrt_star(&space, current.translation(), view.translation(), &nav, seed)
            {
                nav_path = Some((view, path));
                break;
            }
        }
        let Some((view, path)) = nav_path else {
            break; // every cluster discarded: exploration ends
        };

        // integrate forward-looking frames along the way
        for w in path.windows(2) {
            if (w[1] - w[0]).norm() > 1e-9 {
                let look = look_at(w[0], w[1]);
                let depth = scene.render_depth(&look, cam);
                integrate_depth(&mut grid, &depth, &look, cam, params.max_range)?;
            }
        }
        current = view;
        visited.push(current);
        integrate_at(&current, &mut grid)?;
    }
    if detect_frontiers(&grid).is_empty() {
        complete = true;
    }
    Ok(ExploreResult {
        grid,
        visited,
        complete,
    })
}
