//! Analytic ray-cast scene: spheres, axis-aligned boxes, planes, and
//! triangles with procedural value-noise albedo. Stands in for a game-engine
//! renderer so the whole pipeline runs self-contained.

use crate::geom::{CameraModel, Pose};
use crate::raster::{Dtype, RasterImage, DEPTH_MISS};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("duplicate object id {0}")]
    DuplicateObjectId(u16),
    #[error("scene parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone)]
pub enum Shape {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    /// Axis-aligned box given by opposite corners.
    Box {
        min: Vector3<f64>,
        max: Vector3<f64>,
    },
    Plane {
        point: Vector3<f64>,
        normal: Vector3<f64>,
    },
    Triangle {
        a: Vector3<f64>,
        b: Vector3<f64>,
        c: Vector3<f64>,
    },
}

/// Smooth value-noise albedo over world-space position.
#[derive(Debug, Clone, Copy)]
pub struct Texture {
    pub base_rgb: [f64; 3],
    /// Spatial frequency of the noise, cycles per meter-ish.
    pub scale: f64,
    pub seed: u64,
}

impl Texture {
    /// Albedo in [0,1]^3 at a world-space point. Continuous everywhere so the
    /// photometric warp check sees only resampling noise.
    pub fn albedo(&self, p: &Vector3<f64>) -> [f64; 3] {
        let n1 = value_noise(p * self.scale, self.seed);
        let n2 = value_noise(p * (self.scale * 2.7), self.seed ^ 0x9e37_79b9);
        let m = 0.35 + 0.65 * (0.7 * n1 + 0.3 * n2);
        [
            (self.base_rgb[0] * m).clamp(0.0, 1.0),
            (self.base_rgb[1] * m).clamp(0.0, 1.0),
            (self.base_rgb[2] * m).clamp(0.0, 1.0),
        ]
    }
}

fn hash3(x: i64, y: i64, z: i64, seed: u64) -> f64 {
    let mut h = seed
        ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (z as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 30;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Trilinearly interpolated lattice noise in [0,1].
pub fn value_noise(p: Vector3<f64>, seed: u64) -> f64 {
    let xf = p.x.floor();
    let yf = p.y.floor();
    let zf = p.z.floor();
    let (xi, yi, zi) = (xf as i64, yf as i64, zf as i64);
    let tx = smoothstep(p.x - xf);
    let ty = smoothstep(p.y - yf);
    let tz = smoothstep(p.z - zf);
    let mut acc = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let w = (if dx == 0 { 1.0 - tx } else { tx })
                    * (if dy == 0 { 1.0 - ty } else { ty })
                    * (if dz == 0 { 1.0 - tz } else { tz });
                acc += w * hash3(xi + dx, yi + dy, zi + dz, seed);
            }
        }
    }
    acc
}

#[derive(Debug, Clone)]
pub struct Primitive {
    pub shape: Shape,
    pub object_id: u16,
    pub texture: Texture,
}

#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub distance: f64,
    pub object_id: u16,
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    /// World-space bounding box, meters.
    pub bounds_min: Vector3<f64>,
    pub bounds_max: Vector3<f64>,
}

const RAY_EPS: f64 = 1e-9;

fn intersect(shape: &Shape, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
    match shape {
        Shape::Sphere { center, radius } => {
            let oc = origin - center;
            let b = oc.dot(dir);
            let c = oc.norm_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            let t = if -b - sq > RAY_EPS {
                -b - sq
            } else if -b + sq > RAY_EPS {
                -b + sq
            } else {
                return None;
            };
            let n = (origin + dir * t - center).normalize();
            Some((t, n))
        }
        Shape::Box { min, max } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut axis_near = 0usize;
            let mut axis_far = 0usize;
            for k in 0..3 {
                let d = dir[k];
                if d.abs() < 1e-300 {
                    if origin[k] < min[k] || origin[k] > max[k] {
                        return None;
                    }
                    continue;
                }
                let mut t0 = (min[k] - origin[k]) / d;
                let mut t1 = (max[k] - origin[k]) / d;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                if t0 > t_near {
                    t_near = t0;
                    axis_near = k;
                }
                if t1 < t_far {
                    t_far = t1;
                    axis_far = k;
                }
                if t_near > t_far {
                    return None;
                }
            }
            if t_near > RAY_EPS {
                let mut n = Vector3::zeros();
                n[axis_near] = if dir[axis_near] > 0.0 { -1.0 } else { 1.0 };
                Some((t_near, n))
            } else if t_far > RAY_EPS {
                // origin inside the box; report the inner face
                let mut n = Vector3::zeros();
                n[axis_far] = if dir[axis_far] > 0.0 { -1.0 } else { 1.0 };
                Some((t_far, n))
            } else {
                None
            }
        }
        Shape::Plane { point, normal } => {
            let denom = dir.dot(normal);
            if denom.abs() < 1e-12 {
                return None;
            }
            let t = (point - origin).dot(normal) / denom;
            if t > RAY_EPS {
                let n = if denom < 0.0 { *normal } else { -*normal };
                Some((t, n.normalize()))
            } else {
                None
            }
        }
        Shape::Triangle { a, b, c } => {
            // Moeller-Trumbore
            let e1 = b - a;
            let e2 = c - a;
            let pvec = dir.cross(&e2);
            let det = e1.dot(&pvec);
            if det.abs() < 1e-12 {
                return None;
            }
            let inv_det = 1.0 / det;
            let tvec = origin - a;
            let u = tvec.dot(&pvec) * inv_det;
            if !(0.0..=1.0).contains(&u) {
                return None;
            }
            let qvec = tvec.cross(&e1);
            let v = dir.dot(&qvec) * inv_det;
            if v < 0.0 || u + v > 1.0 {
                return None;
            }
            let t = e2.dot(&qvec) * inv_det;
            if t <= RAY_EPS {
                return None;
            }
            let mut n = e1.cross(&e2).normalize();
            if n.dot(dir) > 0.0 {
                n = -n;
            }
            Some((t, n))
        }
    }
}

impl Scene {
    pub fn new(
        primitives: Vec<Primitive>,
        bounds_min: Vector3<f64>,
        bounds_max: Vector3<f64>,
    ) -> Result<Self, SceneError> {
        let mut seen = std::collections::HashSet::new();
        for p in &primitives {
            if !seen.insert(p.object_id) {
                return Err(SceneError::DuplicateObjectId(p.object_id));
            }
        }
        Ok(Scene {
            primitives,
            bounds_min,
            bounds_max,
        })
    }

    /// Nearest positive-distance intersection, or None on miss.
    pub fn ray_cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for prim in &self.primitives {
            if let Some((t, n)) = intersect(&prim.shape, origin, dir) {
                if best.as_ref().map_or(true, |h| t < h.distance) {
                    best = Some(Hit {
                        distance: t,
                        object_id: prim.object_id,
                        normal: n,
                    });
                }
            }
        }
        best
    }

    /// True when the point lies inside a solid primitive (spheres and boxes;
    /// planes and triangles have no volume).
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.primitives.iter().any(|prim| match &prim.shape {
            Shape::Sphere { center, radius } => (p - center).norm() <= *radius,
            Shape::Box { min, max } => (0..3).all(|k| p[k] >= min[k] && p[k] <= max[k]),
            _ => false,
        })
    }

    fn texture_of(&self, object_id: u16) -> &Texture {
        &self
            .primitives
            .iter()
            .find(|p| p.object_id == object_id)
            .expect("hit references unknown object id")
            .texture
    }

    /// Z-depth image (camera-frame z of the hit, not ray length). Misses
    /// store `DEPTH_MISS`.
    pub fn render_depth(&self, pose: &Pose, cam: &CameraModel) -> RasterImage {
        let mut img = RasterImage::zeros(cam.width, cam.height, 1, Dtype::F32);
        let origin = pose.translation();
        for v in 0..cam.height {
            for u in 0..cam.width {
                let d_cam = cam.ray_dir(u as f64, v as f64);
                let inv_n = 1.0 / d_cam.norm();
                let d_world = pose.rotation() * (d_cam * inv_n);
                let z = match self.ray_cast(&origin, &d_world) {
                    Some(hit) => (hit.distance * inv_n) as f32,
                    None => DEPTH_MISS,
                };
                img.set_f32(u, v, 0, z);
            }
        }
        img
    }

    /// Lambertian-shaded RGB under a fixed directional light. Shading depends
    /// only on the surface point and normal, never the view ray, so a static
    /// scene warps photometrically consistently between views.
    pub fn render_rgb(&self, pose: &Pose, cam: &CameraModel) -> RasterImage {
        let light = Vector3::new(0.4, 0.3, 0.85).normalize();
        let mut img = RasterImage::zeros(cam.width, cam.height, 3, Dtype::U8);
        let origin = pose.translation();
        for v in 0..cam.height {
            for u in 0..cam.width {
                let d_cam = cam.ray_dir(u as f64, v as f64);
                let d_world = (pose.rotation() * d_cam).normalize();
                let rgb = match self.ray_cast(&origin, &d_world) {
                    Some(hit) => {
                        let p = origin + d_world * hit.distance;
                        let albedo = self.texture_of(hit.object_id).albedo(&p);
                        let shade = 0.35 + 0.65 * hit.normal.dot(&light).max(0.0);
                        [
                            (albedo[0] * shade * 255.0).round() as u8,
                            (albedo[1] * shade * 255.0).round() as u8,
                            (albedo[2] * shade * 255.0).round() as u8,
                        ]
                    }
                    None => [40, 40, 60], // flat sky
                };
                for (c, val) in rgb.iter().enumerate() {
                    img.set_u8(u, v, c as u8, *val);
                }
            }
        }
        img
    }

    /// Segmentation image of object ids; 0 marks misses.
    pub fn render_seg(&self, pose: &Pose, cam: &CameraModel) -> RasterImage {
        let mut img = RasterImage::zeros(cam.width, cam.height, 1, Dtype::U16);
        let origin = pose.translation();
        for v in 0..cam.height {
            for u in 0..cam.width {
                let d_cam = cam.ray_dir(u as f64, v as f64);
                let d_world = (pose.rotation() * d_cam).normalize();
                let id = self
                    .ray_cast(&origin, &d_world)
                    .map_or(0, |hit| hit.object_id);
                img.set_u16(u, v, 0, id);
            }
        }
        img
    }
}

/// Axis-aligned room built from six wall slabs of the given thickness. The
/// interior spans [min, max]; walls carry ids starting at `first_id`.
pub fn room_walls(
    min: Vector3<f64>,
    max: Vector3<f64>,
    thickness: f64,
    first_id: u16,
    tex_seed: u64,
) -> Vec<Primitive> {
    let mut prims = Vec::new();
    let base_colors = [
        [0.85, 0.75, 0.6],
        [0.6, 0.75, 0.85],
        [0.75, 0.85, 0.6],
        [0.8, 0.65, 0.8],
        [0.7, 0.7, 0.7],
        [0.9, 0.85, 0.7],
    ];
    for k in 0..3usize {
        for (side, color_idx) in [(0usize, 2 * k), (1usize, 2 * k + 1)] {
            let mut lo = min - Vector3::repeat(thickness);
            let mut hi = max + Vector3::repeat(thickness);
            if side == 0 {
                hi[k] = min[k];
            } else {
                lo[k] = max[k];
            }
            let id = first_id + (2 * k + side) as u16;
            prims.push(Primitive {
                shape: Shape::Box { min: lo, max: hi },
                object_id: id,
                texture: Texture {
                    base_rgb: base_colors[color_idx],
                    scale: 0.8,
                    seed: tex_seed.wrapping_add(id as u64),
                },
            });
        }
    }
    prims
}

/// Deterministic procedural scene: a closed room with scattered boxes and
/// spheres, textured with seeded value noise.
pub fn generate_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_x = 6.0;
    let half_y = 6.0;
    let height = 3.0;
    let min = Vector3::new(-half_x, -half_y, 0.0);
    let max = Vector3::new(half_x, half_y, height);
    let mut prims = room_walls(min, max, 0.5, 1, seed);

    let mut next_id = 7u16;
    let n_obstacles = rng.gen_range(4..8);
    for _ in 0..n_obstacles {
        // keep a free corridor around the room center where sequences start
        let (x, y) = loop {
            let x: f64 = rng.gen_range(-half_x + 1.0..half_x - 1.0);
            let y: f64 = rng.gen_range(-half_y + 1.0..half_y - 1.0);
            if x.hypot(y) > 2.5 {
                break (x, y);
            }
        };
        let color = [
            rng.gen_range(0.4..0.95),
            rng.gen_range(0.4..0.95),
            rng.gen_range(0.4..0.95),
        ];
        let tex = Texture {
            base_rgb: color,
            scale: rng.gen_range(0.6..1.5),
            seed: rng.gen(),
        };
        if rng.gen_bool(0.5) {
            let r = rng.gen_range(0.3..0.7);
            let z = rng.gen_range(r..height - r);
            prims.push(Primitive {
                shape: Shape::Sphere {
                    center: Vector3::new(x, y, z),
                    radius: r,
                },
                object_id: next_id,
                texture: tex,
            });
        } else {
            let sx = rng.gen_range(0.3..0.8);
            let sy = rng.gen_range(0.3..0.8);
            let sz = rng.gen_range(0.5..1.8);
            prims.push(Primitive {
                shape: Shape::Box {
                    min: Vector3::new(x - sx, y - sy, 0.0),
                    max: Vector3::new(x + sx, y + sy, sz),
                },
                object_id: next_id,
                texture: tex,
            });
        }
        next_id += 1;
    }
    Scene::new(
        prims,
        min - Vector3::repeat(0.5),
        max + Vector3::repeat(0.5),
    )
    .expect("generated ids are unique")
}

fn fmt_vec(v: &Vector3<f64>) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

/// Plain-text scene description. One block per primitive:
///
/// ```text
/// bounds = -10 -10 0 10 10 5
/// [sphere]
/// id = 3
/// center = 0 0 5
/// radius = 1
/// albedo = 0.8 0.6 0.4
/// tex_scale = 0.7
/// tex_seed = 9
/// ```
pub fn scene_to_string(scene: &Scene) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "bounds = {} {}\n",
        fmt_vec(&scene.bounds_min),
        fmt_vec(&scene.bounds_max)
    ));
    for p in &scene.primitives {
        match &p.shape {
            Shape::Sphere { center, radius } => {
                out.push_str("[sphere]\n");
                out.push_str(&format!("center = {}\n", fmt_vec(center)));
                out.push_str(&format!("radius = {radius}\n"));
            }
            Shape::Box { min, max } => {
                out.push_str("[box]\n");
                out.push_str(&format!("min = {}\n", fmt_vec(min)));
                out.push_str(&format!("max = {}\n", fmt_vec(max)));
            }
            Shape::Plane { point, normal } => {
                out.push_str("[plane]\n");
                out.push_str(&format!("point = {}\n", fmt_vec(point)));
                out.push_str(&format!("normal = {}\n", fmt_vec(normal)));
            }
            Shape::Triangle { a, b, c } => {
                out.push_str("[triangle]\n");
                out.push_str(&format!("a = {}\n", fmt_vec(a)));
                out.push_str(&format!("b = {}\n", fmt_vec(b)));
                out.push_str(&format!("c = {}\n", fmt_vec(c)));
            }
        }
        out.push_str(&format!("id = {}\n", p.object_id));
        out.push_str(&format!(
            "albedo = {} {} {}\n",
            p.texture.base_rgb[0], p.texture.base_rgb[1], p.texture.base_rgb[2]
        ));
        out.push_str(&format!("tex_scale = {}\n", p.texture.scale));
        out.push_str(&format!("tex_seed = {}\n", p.texture.seed));
        out.push('\n');
    }
    out
}

pub fn scene_from_str(text: &str) -> Result<Scene, SceneError> {
    use std::collections::HashMap;

    fn parse_vec(s: &str, line: usize) -> Result<Vector3<f64>, SceneError> {
        let parts: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SceneError::Parse {
                line,
                msg: format!("bad number: {e}"),
            })?;
        if parts.len() != 3 {
            return Err(SceneError::Parse {
                line,
                msg: format!("expected 3 numbers, got {}", parts.len()),
            });
        }
        Ok(Vector3::new(parts[0], parts[1], parts[2]))
    }

    let mut bounds_min = Vector3::repeat(-100.0);
    let mut bounds_max = Vector3::repeat(100.0);
    let mut prims = Vec::new();
    let mut current: Option<(String, HashMap<String, (String, usize)>)> = None;

    let flush = |block: Option<(String, HashMap<String, (String, usize)>)>,
                     prims: &mut Vec<Primitive>|
     -> Result<(), SceneError> {
        let Some((kind, fields)) = block else {
            return Ok(());
        };
        let get = |key: &str| -> Result<(String, usize), SceneError> {
            fields.get(key).cloned().ok_or(SceneError::Parse {
                line: 0,
                msg: format!("[{kind}] block missing key '{key}'"),
            })
        };
        let getf = |key: &str| -> Result<f64, SceneError> {
            let (s, line) = get(key)?;
            s.trim().parse().map_err(|e| SceneError::Parse {
                line,
                msg: format!("bad number for '{key}': {e}"),
            })
        };
        let getv = |key: &str| -> Result<Vector3<f64>, SceneError> {
            let (s, line) = get(key)?;
            parse_vec(&s, line)
        };
        // integers are parsed directly: going through f64 would corrupt
        // 64-bit texture seeds
        fn getint<T: std::str::FromStr>(
            get: impl Fn(&str) -> Result<(String, usize), SceneError>,
            key: &str,
        ) -> Result<T, SceneError>
        where
            T::Err: std::fmt::Display,
        {
            let (s, line) = get(key)?;
            s.trim().parse().map_err(|e| SceneError::Parse {
                line,
                msg: format!("bad integer for '{key}': {e}"),
            })
        }
        let shape = match kind.as_str() {
            "sphere" => Shape::Sphere {
                center: getv("center")?,
                radius: getf("radius")?,
            },
            "box" => Shape::Box {
                min: getv("min")?,
                max: getv("max")?,
            },
            "plane" => Shape::Plane {
                point: getv("point")?,
                normal: getv("normal")?.normalize(),
            },
            "triangle" => Shape::Triangle {
                a: getv("a")?,
                b: getv("b")?,
                c: getv("c")?,
            },
            other => {
                return Err(SceneError::Parse {
                    line: 0,
                    msg: format!("unknown primitive kind '{other}'"),
                })
            }
        };
        let albedo = getv("albedo")?;
        prims.push(Primitive {
            shape,
            object_id: getint(&get, "id")?,
            texture: Texture {
                base_rgb: [albedo.x, albedo.y, albedo.z],
                scale: getf("tex_scale")?,
                seed: getint(&get, "tex_seed")?,
            },
        });
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(kind) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            flush(current.take(), &mut prims)?;
            current = Some((kind.to_string(), HashMap::new()));
        } else if let Some((key, value)) = line.split_once('=') {
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key == "bounds" && current.is_none() {
                let parts: Vec<f64> = value
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| SceneError::Parse {
                        line: line_no,
                        msg: format!("bad bounds: {e}"),
                    })?;
                if parts.len() != 6 {
                    return Err(SceneError::Parse {
                        line: line_no,
                        msg: "bounds needs 6 numbers".into(),
                    });
                }
                bounds_min = Vector3::new(parts[0], parts[1], parts[2]);
                bounds_max = Vector3::new(parts[3], parts[4], parts[5]);
            } else if let Some((_, fields)) = current.as_mut() {
                fields.insert(key, (value, line_no));
            } else {
                return Err(SceneError::Parse {
                    line: line_no,
                    msg: format!("key '{key}' outside any primitive block"),
                });
            }
        } else {
            return Err(SceneError::Parse {
                line: line_no,
                msg: format!("unparseable line: '{line}'"),
            });
        }
    }
    flush(current.take(), &mut prims)?;
    Scene::new(prims, bounds_min, bounds_max)
}
