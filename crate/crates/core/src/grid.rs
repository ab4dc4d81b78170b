//! 3-D occupancy grid with exact voxel ray traversal and a Euclidean
//! clearance field used by the planner.

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("point {0:?} outside grid bounds")]
    OutOfBounds(Vector3<f64>),
    #[error("grid dimensions must be positive")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CellState {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl CellState {
    pub fn from_byte(b: u8) -> Option<CellState> {
        match b {
            0 => Some(CellState::Unknown),
            1 => Some(CellState::Free),
            2 => Some(CellState::Occupied),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub origin: Vector3<f64>,
    pub resolution: f64,
    pub dims: [usize; 3],
    cells: Vec<u8>,
}

impl OccupancyGrid {
    pub fn new(origin: Vector3<f64>, resolution: f64, dims: [usize; 3]) -> Result<Self, GridError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(GridError::EmptyGrid);
        }
        Ok(OccupancyGrid {
            origin,
            resolution,
            dims,
            cells: vec![0; dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn from_cells(
        origin: Vector3<f64>,
        resolution: f64,
        dims: [usize; 3],
        cells: Vec<u8>,
    ) -> Result<Self, GridError> {
        if dims.iter().any(|&d| d == 0) || cells.len() != dims[0] * dims[1] * dims[2] {
            return Err(GridError::EmptyGrid);
        }
        Ok(OccupancyGrid {
            origin,
            resolution,
            dims,
            cells,
        })
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]
    }

    #[inline]
    pub fn state(&self, idx: [usize; 3]) -> CellState {
        CellState::from_byte(self.cells[self.linear(idx)]).unwrap()
    }

    /// Transition a cell out of Unknown; Free and Occupied are permanent.
    pub fn observe(&mut self, idx: [usize; 3], state: CellState) {
        let i = self.linear(idx);
        if self.cells[i] == CellState::Unknown as u8 {
            self.cells[i] = state as u8;
        }
    }

    pub fn voxel_of(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.resolution;
        let mut idx = [0usize; 3];
        for k in 0..3 {
            if rel[k] < 0.0 {
                return None;
            }
            let i = rel[k].floor() as usize;
            if i >= self.dims[k] {
                return None;
            }
            idx[k] = i;
        }
        Some(idx)
    }

    pub fn center(&self, idx: [usize; 3]) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                (idx[0] as f64 + 0.5) * self.resolution,
                (idx[1] as f64 + 0.5) * self.resolution,
                (idx[2] as f64 + 0.5) * self.resolution,
            )
    }

    pub fn world_min(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn world_max(&self) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                self.dims[0] as f64 * self.resolution,
                self.dims[1] as f64 * self.resolution,
                self.dims[2] as f64 * self.resolution,
            )
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state as u8).count()
    }

    /// Every voxel the segment [origin, end] passes through, in order,
    /// via Amanatides-Woo stepping. Stops silently at the grid boundary.
    pub fn traverse(&self, origin: &Vector3<f64>, end: &Vector3<f64>) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        let Some(mut idx) = self.voxel_of(origin) else {
            return out;
        };
        let dir = end - origin;
        let len = dir.norm();
        if len < 1e-12 {
            out.push(idx);
            return out;
        }
        let dir = dir / len;
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        let mut step = [0isize; 3];
        for k in 0..3 {
            if dir[k] > 1e-15 {
                step[k] = 1;
                let next_boundary = self.origin[k] + (idx[k] as f64 + 1.0) * self.resolution;
                t_max[k] = (next_boundary - origin[k]) / dir[k];
                t_delta[k] = self.resolution / dir[k];
            } else if dir[k] < -1e-15 {
                step[k] = -1;
                let next_boundary = self.origin[k] + idx[k] as f64 * self.resolution;
                t_max[k] = (next_boundary - origin[k]) / dir[k];
                t_delta[k] = self.resolution / -dir[k];
            }
        }
        let mut t;
        loop {
            out.push(idx);
            // smallest exit time decides the axis to step
            let k = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            t = t_max[k];
            if t > len {
                break;
            }
            let next = idx[k] as isize + step[k];
            if next < 0 || next as usize >= self.dims[k] {
                break;
            }
            idx[k] = next as usize;
            t_max[k] += t_delta[k];
        }
        out
    }

    /// Euclidean distance (meters) from each voxel center to the nearest
    /// non-free voxel center. Exact separable squared distance transform.
    pub fn clearance_field(&self) -> Vec<f64> {
        let [nx, ny, nz] = self.dims;
        let n = nx * ny * nz;
        let inf = 1e18f64;
        // seed: 0 at non-free voxels
        let mut d2: Vec<f64> = self
            .cells
            .iter()
            .map(|&c| if c == CellState::Free as u8 { inf } else { 0.0 })
            .collect();

        // 1-D squared distance transform (Felzenszwalb & Huttenlocher)
        fn dt1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
            let n = f.len();
            let mut k = 0usize;
            v[0] = 0;
            z[0] = -1e20;
            z[1] = 1e20;
            for q in 1..n {
                loop {
                    let p = v[k];
                    let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                        / (2.0 * q as f64 - 2.0 * p as f64);
                    if s <= z[k] {
                        if k == 0 {
                            break;
                        }
                        k -= 1;
                    } else {
                        k += 1;
                        v[k] = q;
                        z[k] = s;
                        z[k + 1] = 1e20;
                        break;
                    }
                }
            }
            let mut k = 0usize;
            for q in 0..n {
                while z[k + 1] < q as f64 {
                    k += 1;
                }
                let p = v[k];
                let dq = q as f64 - p as f64;
                out[q] = dq * dq + f[p];
            }
        }

        let max_dim = nx.max(ny).max(nz);
        let mut fbuf = vec![0.0f64; max_dim];
        let mut obuf = vec![0.0f64; max_dim];
        let mut vbuf = vec![0usize; max_dim];
        let mut zbuf = vec![0.0f64; max_dim + 1];

        // x pass
        for z in 0..nz {
            for y in 0..ny {
                let base = (z * ny + y) * nx;
                fbuf[..nx].copy_from_slice(&d2[base..base + nx]);
                dt1d(&fbuf[..nx], &mut obuf[..nx], &mut vbuf, &mut zbuf);
                d2[base..base + nx].copy_from_slice(&obuf[..nx]);
            }
        }
        // y pass
        for z in 0..nz {
            for x in 0..nx {
                for y in 0..ny {
                    fbuf[y] = d2[(z * ny + y) * nx + x];
                }
                dt1d(&fbuf[..ny], &mut obuf[..ny], &mut vbuf, &mut zbuf);
                for y in 0..ny {
                    d2[(z * ny + y) * nx + x] = obuf[y];
                }
            }
        }
        // z pass
        for y in 0..ny {
            for x in 0..nx {
                for z in 0..nz {
                    fbuf[z] = d2[(z * ny + y) * nx + x];
                }
                dt1d(&fbuf[..nz], &mut obuf[..nz], &mut vbuf, &mut zbuf);
                for z in 0..nz {
                    d2[(z * ny + y) * nx + x] = obuf[z];
                }
            }
        }

        let res = self.resolution;
        let mut out = vec![0.0f64; n];
        for i in 0..n {
            out[i] = d2[i].min(inf).sqrt() * res;
        }
        out
    }
}
