//! Canonical on-disk formats: plain-text pose files, binary rasters ("TTNR"),
//! occupancy grids ("TOCC"), LiDAR point files ("TLDR"), outcome lists, and
//! the artifact manifest. All binary fields are little-endian.

use crate::evalbench::SequenceOutcome;
use crate::geom::{GeomError, Pose};
use crate::grid::OccupancyGrid;
use crate::raster::{Dtype, PixelData, RasterImage};
use nalgebra::Vector3;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}: line {line}: {msg}")]
    Line {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("{file}: byte offset {offset}: {msg}")]
    Binary {
        file: String,
        offset: usize,
        msg: String,
    },
    #[error("invalid pose: {0}")]
    Geom(#[from] GeomError),
}

fn line_err(file: &Path, line: usize, msg: impl Into<String>) -> IoError {
    IoError::Line {
        file: file.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn bin_err(file: &Path, offset: usize, msg: impl Into<String>) -> IoError {
    IoError::Binary {
        file: file.display().to_string(),
        offset,
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// pose files: one pose per line, "tx ty tz qx qy qz qw"

pub fn write_poses(path: &Path, poses: &[Pose]) -> Result<(), IoError> {
    let mut out = String::new();
    for p in poses {
        let t = p.translation();
        let q = p.quaternion_xyzw();
        out.push_str(&format!(
            "{:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}\n",
            t.x, t.y, t.z, q[0], q[1], q[2], q[3]
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_poses(path: &Path) -> Result<Vec<Pose>, IoError> {
    let text = fs::read_to_string(path)?;
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(line_err(
                path,
                line_no,
                format!("expected 7 fields (tx ty tz qx qy qz qw), got {}", fields.len()),
            ));
        }
        let mut vals = [0.0f64; 7];
        for (k, f) in fields.iter().enumerate() {
            vals[k] = f.parse::<f64>().map_err(|e| {
                line_err(path, line_no, format!("field {}: {e}", k + 1))
            })?;
        }
        poses.push(Pose::from_parts(
            [vals[0], vals[1], vals[2]],
            [vals[3], vals[4], vals[5], vals[6]],
        ));
    }
    Ok(poses)
}

// ---------------------------------------------------------------------------
// binary helpers

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IoError> {
        if self.pos + n > self.buf.len() {
            return Err(bin_err(
                self.path,
                self.pos,
                format!("truncated while reading {what}: need {n} bytes, have {}", self.buf.len() - self.pos),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, IoError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, IoError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self, what: &str) -> Result<f32, IoError> {
        let b = self.take(4, what)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

const RASTER_MAGIC: &[u8; 4] = b"TTNR";
const GRID_MAGIC: &[u8; 4] = b"TOCC";
const LIDAR_MAGIC: &[u8; 4] = b"TLDR";
const FORMAT_VERSION: u8 = 1;

// ---------------------------------------------------------------------------
// TTNR raster

pub fn write_raster(path: &Path, img: &RasterImage) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    f.write_all(RASTER_MAGIC)?;
    f.write_all(&[FORMAT_VERSION, img.dtype().code(), img.channels as u8])?;
    f.write_all(&img.width.to_le_bytes())?;
    f.write_all(&img.height.to_le_bytes())?;
    match &img.data {
        PixelData::U8(d) => f.write_all(d)?,
        PixelData::U16(d) => {
            let mut bytes = Vec::with_capacity(d.len() * 2);
            for v in d {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            f.write_all(&bytes)?;
        }
        PixelData::F32(d) => {
            let mut bytes = Vec::with_capacity(d.len() * 4);
            for v in d {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            f.write_all(&bytes)?;
        }
    }
    Ok(())
}

pub fn read_raster(path: &Path) -> Result<RasterImage, IoError> {
    let buf = fs::read(path)?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        path,
    };
    let magic = r.take(4, "magic")?;
    if magic != RASTER_MAGIC {
        return Err(bin_err(path, 0, format!("bad magic {magic:?}, expected \"TTNR\"")));
    }
    let version = r.u8("version")?;
    if version != FORMAT_VERSION {
        return Err(bin_err(path, 4, format!("unsupported version {version}")));
    }
    let dtype_code = r.u8("dtype")?;
    let dtype = Dtype::from_code(dtype_code)
        .ok_or_else(|| bin_err(path, 5, format!("unknown dtype code {dtype_code}")))?;
    let channels = r.u8("channels")?;
    let width = r.u32("width")?;
    let height = r.u32("height")?;
    let count = (width as usize) * (height as usize) * (channels as usize);
    let data = match dtype {
        Dtype::U8 => PixelData::U8(r.take(count, "pixel data")?.to_vec()),
        Dtype::U16 => {
            let raw = r.take(count * 2, "pixel data")?;
            PixelData::U16(
                raw.chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            )
        }
        Dtype::F32 => {
            let raw = r.take(count * 4, "pixel data")?;
            PixelData::F32(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            )
        }
    };
    RasterImage::new(width, height, channels, data)
        .map_err(|e| bin_err(path, 6, e.to_string()))
}

// ---------------------------------------------------------------------------
// TOCC occupancy grid

pub fn write_grid(path: &Path, grid: &OccupancyGrid) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    f.write_all(GRID_MAGIC)?;
    f.write_all(&[FORMAT_VERSION])?;
    f.write_all(&(grid.resolution as f32).to_le_bytes())?;
    for k in 0..3 {
        f.write_all(&(grid.origin[k] as f32).to_le_bytes())?;
    }
    for k in 0..3 {
        f.write_all(&(grid.dims[k] as u32).to_le_bytes())?;
    }
    f.write_all(grid.cells())?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<OccupancyGrid, IoError> {
    let buf = fs::read(path)?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        path,
    };
    let magic = r.take(4, "magic")?;
    if magic != GRID_MAGIC {
        return Err(bin_err(path, 0, format!("bad magic {magic:?}, expected \"TOCC\"")));
    }
    let version = r.u8("version")?;
    if version != FORMAT_VERSION {
        return Err(bin_err(path, 4, format!("unsupported version {version}")));
    }
    let resolution = r.f32("resolution")? as f64;
    let origin = Vector3::new(
        r.f32("origin.x")? as f64,
        r.f32("origin.y")? as f64,
        r.f32("origin.z")? as f64,
    );
    let dims = [
        r.u32("dims.x")? as usize,
        r.u32("dims.y")? as usize,
        r.u32("dims.z")? as usize,
    ];
    let count = dims[0] * dims[1] * dims[2];
    let cell_offset = r.pos;
    let cells = r.take(count, "cell states")?.to_vec();
    for (i, &c) in cells.iter().enumerate() {
        if c > 2 {
            return Err(bin_err(
                path,
                cell_offset + i,
                format!("invalid cell state {c}"),
            ));
        }
    }
    OccupancyGrid::from_cells(origin, resolution, dims, cells)
        .map_err(|e| bin_err(path, 5, e.to_string()))
}

// ---------------------------------------------------------------------------
// TLDR LiDAR points

pub fn write_lidar(path: &Path, points: &[Vector3<f64>]) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    f.write_all(LIDAR_MAGIC)?;
    f.write_all(&(points.len() as u32).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(points.len() * 12);
    for p in points {
        for k in 0..3 {
            bytes.extend_from_slice(&(p[k] as f32).to_le_bytes());
        }
    }
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_lidar(path: &Path) -> Result<Vec<Vector3<f64>>, IoError> {
    let buf = fs::read(path)?;
    let mut r = Reader {
        buf: &buf,
        pos: 0,
        path,
    };
    let magic = r.take(4, "magic")?;
    if magic != LIDAR_MAGIC {
        return Err(bin_err(path, 0, format!("bad magic {magic:?}, expected \"TLDR\"")));
    }
    let count = r.u32("count")? as usize;
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let x = r.f32(&format!("point {i} x"))? as f64;
        let y = r.f32(&format!("point {i} y"))? as f64;
        let z = r.f32(&format!("point {i} z"))? as f64;
        points.push(Vector3::new(x, y, z));
    }
    if r.pos != buf.len() {
        return Err(bin_err(path, r.pos, "trailing bytes after point data"));
    }
    Ok(points)
}

// ---------------------------------------------------------------------------
// outcomes file: "id tracked{0|1}" per line

pub fn read_outcomes(path: &Path) -> Result<Vec<SequenceOutcome>, IoError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(line_err(
                path,
                line_no,
                format!("expected \"id tracked\", got {} fields", fields.len()),
            ));
        }
        let tracked = match fields[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(line_err(
                    path,
                    line_no,
                    format!("tracked flag must be 0 or 1, got {other:?}"),
                ))
            }
        };
        out.push(SequenceOutcome {
            id: fields[0].to_string(),
            tracked,
        });
    }
    Ok(out)
}

pub fn write_outcomes(path: &Path, outcomes: &[SequenceOutcome]) -> Result<(), IoError> {
    let mut text = String::new();
    for o in outcomes {
        text.push_str(&format!("{} {}\n", o.id, if o.tracked { 1 } else { 0 }));
    }
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// manifest: one artifact per line, "format frame_index relative_path";
// frame index is "-" for sequence-level artifacts

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub format: String,
    pub frame: Option<usize>,
    pub path: String,
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), IoError> {
    let mut text = String::from("# format frame path\n");
    for e in entries {
        let frame = e.frame.map_or("-".to_string(), |f| f.to_string());
        text.push_str(&format!("{} {} {}\n", e.format, frame, e.path));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, IoError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(line_err(
                path,
                line_no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let frame = if fields[1] == "-" {
            None
        } else {
            Some(fields[1].parse::<usize>().map_err(|e| {
                line_err(path, line_no, format!("frame index: {e}"))
            })?)
        };
        out.push(ManifestEntry {
            format: fields[0].to_string(),
            frame,
            path: fields[2].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellState;
    use nalgebra::UnitQuaternion;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    #[test]
    fn pose_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let poses: Vec<Pose> = (0..50)
            .map(|_| {
                Pose::new(
                    UnitQuaternion::from_euler_angles(
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-1.5..1.5),
                        rng.gen_range(-3.0..3.0),
                    ),
                    Vector3::new(
                        rng.gen_range(-10.0..10.0),
                        rng.gen_range(-10.0..10.0),
                        rng.gen_range(-10.0..10.0),
                    ),
                )
            })
            .collect();
        write_poses(&path, &poses).unwrap();
        let back = read_poses(&path).unwrap();
        assert_eq!(back.len(), poses.len());
        for (a, b) in poses.iter().zip(&back) {
            assert!((a.translation() - b.translation()).norm() < 1e-8);
            assert!(a.rotation().angle_to(&b.rotation()) < 1e-8);
        }
    }

    #[test]
    fn pose_bad_field_count_names_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        fs::write(&path, "0 0 0 0 0 0 1\n1 2 3 4 5 6\n").unwrap();
        match read_poses(&path) {
            Err(IoError::Line { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn pose_bad_number_names_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("poses.txt");
        fs::write(&path, "0 0 zero 0 0 0 1\n").unwrap();
        match read_poses(&path) {
            Err(IoError::Line { line, msg, .. }) => {
                assert_eq!(line, 1);
                assert!(msg.contains("field 3"));
            }
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn raster_roundtrip_all_dtypes() {
        let dir = tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);

        let mut img_u8 = RasterImage::zeros(13, 7, 3, Dtype::U8);
        for v in img_u8.as_u8_mut().unwrap() {
            *v = rng.gen();
        }
        let mut img_u16 = RasterImage::zeros(9, 11, 1, Dtype::U16);
        for v in img_u16.as_u16_mut().unwrap() {
            *v = rng.gen();
        }
        let mut img_f32 = RasterImage::zeros(17, 5, 2, Dtype::F32);
        for v in img_f32.as_f32_mut().unwrap() {
            *v = rng.gen_range(-1e6f32..1e6);
        }

        for (name, img) in [("a.ttnr", &img_u8), ("b.ttnr", &img_u16), ("c.ttnr", &img_f32)] {
            let path = dir.path().join(name);
            write_raster(&path, img).unwrap();
            let back = read_raster(&path).unwrap();
            assert_eq!(back.width, img.width);
            assert_eq!(back.height, img.height);
            assert_eq!(back.channels, img.channels);
            assert_eq!(&back.data, &img.data);
        }
    }

    #[test]
    fn raster_truncation_names_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.ttnr");
        let img = RasterImage::zeros(8, 8, 1, Dtype::F32);
        write_raster(&path, &img).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(20);
        fs::write(&path, &bytes).unwrap();
        match read_raster(&path) {
            Err(IoError::Binary { offset, msg, .. }) => {
                assert_eq!(offset, 15);
                assert!(msg.contains("truncated"));
            }
            other => panic!("expected binary error, got {other:?}"),
        }
    }

    #[test]
    fn raster_bad_magic_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.ttnr");
        fs::write(&path, b"NOPE\x01\x03\x01\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        match read_raster(&path) {
            Err(IoError::Binary { offset: 0, msg, .. }) => assert!(msg.contains("magic")),
            other => panic!("expected magic error, got {other:?}"),
        }
    }

    #[test]
    fn raster_bad_dtype_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.ttnr");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TTNR");
        bytes.push(1); // version
        bytes.push(9); // bogus dtype
        bytes.push(1);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.push(0);
        fs::write(&path, bytes).unwrap();
        match read_raster(&path) {
            Err(IoError::Binary { offset: 5, msg, .. }) => assert!(msg.contains("dtype")),
            other => panic!("expected dtype error, got {other:?}"),
        }
    }

    #[test]
    fn grid_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("map.tocc");
        let dims = [6, 5, 4];
        let mut cells = vec![CellState::Unknown as u8; dims[0] * dims[1] * dims[2]];
        for (i, c) in cells.iter_mut().enumerate() {
            *c = (i % 3) as u8;
        }
        let grid =
            OccupancyGrid::from_cells(Vector3::new(-1.0, 2.0, 0.5), 0.25, dims, cells.clone())
                .unwrap();
        write_grid(&path, &grid).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back.dims, dims);
        assert_eq!(back.cells(), grid.cells());
        assert!((back.resolution - 0.25).abs() < 1e-7);
        assert!((back.origin - grid.origin).norm() < 1e-6);
    }

    #[test]
    fn grid_invalid_state_names_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("map.tocc");
        let grid = OccupancyGrid::new(Vector3::zeros(), 0.5, [2, 2, 2]).unwrap();
        write_grid(&path, &grid).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let header = 4 + 1 + 4 + 12 + 12;
        bytes[header + 3] = 7;
        fs::write(&path, &bytes).unwrap();
        match read_grid(&path) {
            Err(IoError::Binary { offset, msg, .. }) => {
                assert_eq!(offset, header + 3);
                assert!(msg.contains("invalid cell state 7"));
            }
            other => panic!("expected state error, got {other:?}"),
        }
    }

    #[test]
    fn lidar_roundtrip_and_trailing_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scan.tldr");
        let pts = vec![
            Vector3::new(1.0, -2.0, 3.5),
            Vector3::new(0.25, 0.0, -9.0),
        ];
        write_lidar(&path, &pts).unwrap();
        let back = read_lidar(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in pts.iter().zip(&back) {
            assert!((a - b).norm() < 1e-6);
        }

        let mut bytes = fs::read(&path).unwrap();
        bytes.push(0);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_lidar(&path), Err(IoError::Binary { .. })));
    }

    #[test]
    fn outcomes_roundtrip_and_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("outcomes.txt");
        let outcomes = vec![
            SequenceOutcome {
                id: "seq0".into(),
                tracked: true,
            },
            SequenceOutcome {
                id: "seq1".into(),
                tracked: false,
            },
        ];
        write_outcomes(&path, &outcomes).unwrap();
        let back = read_outcomes(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back[0].tracked);
        assert!(!back[1].tracked);

        fs::write(&path, "seq0 yes\n").unwrap();
        assert!(matches!(read_outcomes(&path), Err(IoError::Line { line: 1, .. })));
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        let entries = vec![
            ManifestEntry {
                format: "poses".into(),
                frame: None,
                path: "poses.txt".into(),
            },
            ManifestEntry {
                format: "depth".into(),
                frame: Some(3),
                path: "depth/000003.ttnr".into(),
            },
        ];
        write_manifest(&path, &entries).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, entries);
    }
}
