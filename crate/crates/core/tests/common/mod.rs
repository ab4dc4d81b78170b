//! Shared helpers for the acceptance suite: an independent A* path oracle,
//! a flood-fill reachability oracle, and a procedural extruded-maze builder.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use trajlab::grid::{CellState, OccupancyGrid};
use trajlab::planner::FreeSpace;
use trajlab::scene::Scene;

/// 26-connected A* over voxel centers; passability is the same clearance
/// test the planner uses, so both search the same configuration space.
/// Returns the path cost in meters between the start and goal voxel
/// centers, or None when no path exists.
pub fn astar_26(space: &FreeSpace, start: &Vector3<f64>, goal: &Vector3<f64>, clearance: f64) -> Option<f64> {
    let grid = space.grid;
    let s = grid.voxel_of(start)?;
    let g = grid.voxel_of(goal)?;
    if !space.point_ok(&grid.center(s), clearance) || !space.point_ok(&grid.center(g), clearance) {
        return None;
    }
    let dims = grid.dims;
    let n = dims[0] * dims[1] * dims[2];
    let res = grid.resolution;
    let heur = |idx: [usize; 3]| -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let d = (idx[k] as f64 - g[k] as f64) * res;
            d2 += d * d;
        }
        d2.sqrt()
    };

    #[derive(PartialEq)]
    struct Item {
        f: f64,
        idx: [usize; 3],
    }
    impl Eq for Item {}
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> Ordering {
            other.f.total_cmp(&self.f) // min-heap
        }
    }
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let lin = |idx: [usize; 3]| (idx[2] * dims[1] + idx[1]) * dims[0] + idx[0];
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[lin(s)] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Item { f: heur(s), idx: s });

    while let Some(Item { idx, .. }) = heap.pop() {
        let li = lin(idx);
        if done[li] {
            continue;
        }
        done[li] = true;
        if idx == g {
            return Some(dist[li]);
        }
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let nx = idx[0] as isize + dx;
                    let ny = idx[1] as isize + dy;
                    let nz = idx[2] as isize + dz;
                    if nx < 0
                        || ny < 0
                        || nz < 0
                        || nx as usize >= dims[0]
                        || ny as usize >= dims[1]
                        || nz as usize >= dims[2]
                    {
                        continue;
                    }
                    let nidx = [nx as usize, ny as usize, nz as usize];
                    let nli = lin(nidx);
                    if done[nli] || !space.point_ok(&grid.center(nidx), clearance) {
                        continue;
                    }
                    let step =
                        ((dx * dx + dy * dy + dz * dz) as f64).sqrt() * res;
                    let nd = dist[li] + step;
                    if nd < dist[nli] {
                        dist[nli] = nd;
                        heap.push(Item {
                            f: nd + heur(nidx),
                            idx: nidx,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Voxels reachable from `start` by 6-connected flood fill over voxels whose
/// centers lie outside every scene primitive. This is the ground-truth free
/// set an ideal exhaustive explorer should discover.
pub fn flood_fill_free(scene: &Scene, grid: &OccupancyGrid, start: &Vector3<f64>) -> Vec<bool> {
    let dims = grid.dims;
    let n = dims[0] * dims[1] * dims[2];
    let lin = |idx: [usize; 3]| (idx[2] * dims[1] + idx[1]) * dims[0] + idx[0];
    let mut reach = vec![false; n];
    let Some(s) = grid.voxel_of(start) else {
        return reach;
    };
    if scene.contains(&grid.center(s)) {
        return reach;
    }
    let mut stack = vec![s];
    reach[lin(s)] = true;
    while let Some(idx) = stack.pop() {
        for (k, step) in [(0usize, -1isize), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)] {
            let v = idx[k] as isize + step;
            if v < 0 || v as usize >= dims[k] {
                continue;
            }
            let mut nidx = idx;
            nidx[k] = v as usize;
            let nli = lin(nidx);
            if reach[nli] || scene.contains(&grid.center(nidx)) {
                continue;
            }
            reach[nli] = true;
            stack.push(nidx);
        }
    }
    reach
}

/// Parameters of the extruded-maze occupancy grid used by the planner tests.
pub struct Maze {
    pub grid: OccupancyGrid,
    /// Center of the entry cell, meters.
    pub start: Vector3<f64>,
    /// Center of the exit cell, meters.
    pub goal: Vector3<f64>,
}

/// Perfect 2-D maze (recursive backtracker) extruded along z into a fully
/// known occupancy grid. Corridors are `cell_vox` voxels wide, walls
/// `wall_vox` voxels thick, everything axis-aligned at `res` meters.
pub fn extruded_maze(n_cells: usize, seed: u64, res: f64) -> Maze {
    let cell_vox = 8usize; // 2.0 m corridors at 0.25 m
    let wall_vox = 2usize; // 0.5 m walls
    let height_vox = 8usize; // 2.0 m tall
    let pitch = cell_vox + wall_vox;
    let side = n_cells * pitch + wall_vox;
    let dims = [side, side, height_vox];

    // carve the maze on the cell lattice
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visited = vec![false; n_cells * n_cells];
    // open[(cell, direction)]: 0 = +x, 1 = +y (walls shared with -x/-y neighbors)
    let mut open_px = vec![false; n_cells * n_cells];
    let mut open_py = vec![false; n_cells * n_cells];
    let cid = |x: usize, y: usize| y * n_cells + x;
    let mut stack = vec![(0usize, 0usize)];
    visited[0] = true;
    while let Some(&(x, y)) = stack.last() {
        let mut options: Vec<usize> = Vec::new();
        if x + 1 < n_cells && !visited[cid(x + 1, y)] {
            options.push(0);
        }
        if y + 1 < n_cells && !visited[cid(x, y + 1)] {
            options.push(1);
        }
        if x > 0 && !visited[cid(x - 1, y)] {
            options.push(2);
        }
        if y > 0 && !visited[cid(x, y - 1)] {
            options.push(3);
        }
        if options.is_empty() {
            stack.pop();
            continue;
        }
        let dir = options[rng.gen_range(0..options.len())];
        let (nx, ny) = match dir {
            0 => (x + 1, y),
            1 => (x, y + 1),
            2 => (x - 1, y),
            _ => (x, y - 1),
        };
        match dir {
            0 => open_px[cid(x, y)] = true,
            1 => open_py[cid(x, y)] = true,
            2 => open_px[cid(nx, ny)] = true,
            _ => open_py[cid(nx, ny)] = true,
        }
        visited[cid(nx, ny)] = true;
        stack.push((nx, ny));
    }

    // rasterize: everything occupied, then carve cells and open passages
    let mut cells = vec![CellState::Occupied as u8; side * side * height_vox];
    let lin = |x: usize, y: usize, z: usize| (z * side + y) * side + x;
    let carve = |x0: usize, x1: usize, y0: usize, y1: usize, cells: &mut Vec<u8>| {
        for z in 0..height_vox {
            for y in y0..y1 {
                for x in x0..x1 {
                    cells[lin(x, y, z)] = CellState::Free as u8;
                }
            }
        }
    };
    for cy in 0..n_cells {
        for cx in 0..n_cells {
            let x0 = wall_vox + cx * pitch;
            let y0 = wall_vox + cy * pitch;
            carve(x0, x0 + cell_vox, y0, y0 + cell_vox, &mut cells);
            if open_px[cid(cx, cy)] {
                carve(x0 + cell_vox, x0 + cell_vox + wall_vox, y0, y0 + cell_vox, &mut cells);
            }
            if open_py[cid(cx, cy)] {
                carve(x0, x0 + cell_vox, y0 + cell_vox, y0 + cell_vox + wall_vox, &mut cells);
            }
        }
    }

    let grid = OccupancyGrid::from_cells(Vector3::zeros(), res, dims, cells).unwrap();
    let cell_center = |cx: usize, cy: usize| {
        Vector3::new(
            (wall_vox + cx * pitch) as f64 * res + cell_vox as f64 * res * 0.5,
            (wall_vox + cy * pitch) as f64 * res + cell_vox as f64 * res * 0.5,
            height_vox as f64 * res * 0.5,
        )
    };
    Maze {
        grid,
        start: cell_center(0, 0),
        goal: cell_center(n_cells - 1, n_cells - 1),
    }
}
