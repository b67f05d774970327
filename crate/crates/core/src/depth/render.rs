use nalgebra::Vector3;

use crate::kinematics::{CameraIntrinsics, Capsule, KinematicModel, KinematicsError, RigidTransform};

/// Predicted depth image. `depth` is z-depth in meters, infinite where the
/// pixel ray misses every capsule.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedDepth {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub coverage: Vec<bool>,
}

impl RenderedDepth {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
            coverage: vec![false; width * height],
        }
    }

    pub fn covered_indices(&self) -> Vec<usize> {
        (0..self.depth.len()).filter(|&i| self.coverage[i]).collect()
    }

    pub fn covered_count(&self) -> usize {
        self.coverage.iter().filter(|&&c| c).count()
    }
}

/// Entry distance of the pinhole ray `t * dir` (camera at the origin) into a
/// capsule, or `None` on a miss. With `dir.z == 1`, `t` is the z-depth.
///
/// Hits with `t <= 0` (surface behind the camera) are ignored.
pub fn ray_capsule(dir: &Vector3<f64>, cap: &Capsule) -> Option<f64> {
    CapsuleRay::new(cap).intersect(dir.x, dir.y, dir.z)
}

/// Ray/capsule constants that do not depend on the ray direction.
#[derive(Clone, Copy, Debug)]
struct CapsuleRay {
    a: Vector3<f64>,
    b: Vector3<f64>,
    ba: Vector3<f64>,
    baba: f64,
    baoa: f64,
    oaoa: f64,
    r2: f64,
}

impl CapsuleRay {
    fn new(cap: &Capsule) -> Self {
        let ba = cap.b - cap.a;
        let oa = -cap.a;
        Self {
            a: cap.a,
            b: cap.b,
            ba,
            baba: ba.dot(&ba),
            baoa: ba.dot(&oa),
            oaoa: oa.dot(&oa),
            r2: cap.radius * cap.radius,
        }
    }

    #[inline]
    fn sphere(center: &Vector3<f64>, r2: f64, dx: f64, dy: f64, dz: f64, rdrd: f64) -> Option<f64> {
        // origin - center
        let (ox, oy, oz) = (-center.x, -center.y, -center.z);
        let b = dx * ox + dy * oy + dz * oz;
        let c = ox * ox + oy * oy + oz * oz - r2;
        let h = b * b - rdrd * c;
        if h < 0.0 {
            return None;
        }
        let t = (-b - h.sqrt()) / rdrd;
        (t > 0.0).then_some(t)
    }

    #[inline]
    fn intersect(&self, dx: f64, dy: f64, dz: f64) -> Option<f64> {
        let rdrd = dx * dx + dy * dy + dz * dz;
        if self.baba == 0.0 {
            return Self::sphere(&self.a, self.r2, dx, dy, dz, rdrd);
        }
        let bard = self.ba.x * dx + self.ba.y * dy + self.ba.z * dz;
        let rdoa = -(self.a.x * dx + self.a.y * dy + self.a.z * dz);
        let k2 = self.baba * rdrd - bard * bard;
        let k1 = self.baba * rdoa - self.baoa * bard;
        let k0 = self.baba * self.oaoa - self.baoa * self.baoa - self.r2 * self.baba;
        let near_a = if k2 > 1e-14 * self.baba * rdrd {
            let h = k1 * k1 - k2 * k0;
            if h < 0.0 {
                return None;
            }
            let t = (-k1 - h.sqrt()) / k2;
            let y = self.baoa + t * bard;
            if y > 0.0 && y < self.baba {
                return (t > 0.0).then_some(t);
            }
            y <= 0.0
        } else {
            // ray parallel to the axis enters through the cap it travels away from
            bard > 0.0
        };
        let center = if near_a { &self.a } else { &self.b };
        Self::sphere(center, self.r2, dx, dy, dz, rdrd)
    }

    /// Conservative pixel bounding box `(u0, u1, v0, v1)` (inclusive), or
    /// `None` when the capsule is entirely behind the camera or off-image.
    fn pixel_bounds(&self, r: f64, intr: &CameraIntrinsics) -> Option<(usize, usize, usize, usize)> {
        const NEAR: f64 = 1e-6;
        if self.a.z + r <= 0.0 && self.b.z + r <= 0.0 {
            return None;
        }
        let w = intr.width as f64;
        let h = intr.height as f64;
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for c in [&self.a, &self.b] {
            if c.z - r <= NEAR {
                return Some((0, intr.width - 1, 0, intr.height - 1));
            }
            let (zn, zf) = (c.z - r, c.z + r);
            for (lo, hi, min, max) in [(c.x - r, c.x + r, &mut xmin, &mut xmax), (c.y - r, c.y + r, &mut ymin, &mut ymax)] {
                let cand = [lo / zn, lo / zf, hi / zn, hi / zf];
                for v in cand {
                    *min = min.min(v);
                    *max = max.max(v);
                }
            }
        }
        let u0 = (intr.fx * xmin + intr.cx).floor();
        let u1 = (intr.fx * xmax + intr.cx).ceil();
        let v0 = (intr.fy * ymin + intr.cy).floor();
        let v1 = (intr.fy * ymax + intr.cy).ceil();
        if u1 < 0.0 || v1 < 0.0 || u0 > w - 1.0 || v0 > h - 1.0 {
            return None;
        }
        Some((
            u0.max(0.0) as usize,
            u1.min(w - 1.0) as usize,
            v0.max(0.0) as usize,
            v1.min(h - 1.0) as usize,
        ))
    }
}

/// Calls `visit(pixel_index, depth)` for every pixel whose ray hits `cap`
/// (capsule given in the camera frame). Pixel `(u, v)` looks along
/// `((u - cx) / fx, (v - cy) / fy, 1)`.
///
/// A capsule is convex, so its hit pixels in one row form an interval. Each
/// row is grown outward from the middle of the previous row's interval and
/// falls back to a full scan of the bounding box row when that seed misses.
pub fn raster_capsule(intr: &CameraIntrinsics, cap: &Capsule, mut visit: impl FnMut(usize, f64)) {
    let ray = CapsuleRay::new(cap);
    let Some((u0, u1, v0, v1)) = ray.pixel_bounds(cap.radius, intr) else {
        return;
    };
    let (ifx, ify) = (1.0 / intr.fx, 1.0 / intr.fy);
    let dx = |u: usize| (u as f64 - intr.cx) * ifx;
    let mut seed: Option<usize> = None;
    let mut seen_any = false;
    for v in v0..=v1 {
        let dy = (v as f64 - intr.cy) * ify;
        let row = v * intr.width;
        let hit = |u: usize| ray.intersect(dx(u), dy, 1.0);
        let mut start = seed.and_then(|u| hit(u).map(|t| (u, t)));
        if start.is_none() {
            start = (u0..=u1).find_map(|u| hit(u).map(|t| (u, t)));
        }
        let Some((us, ts)) = start else {
            if seen_any {
                break;
            }
            seed = None;
            continue;
        };
        seen_any = true;
        visit(row + us, ts);
        let mut lo = us;
        while lo > u0 {
            match hit(lo - 1) {
                Some(t) => {
                    lo -= 1;
                    visit(row + lo, t);
                }
                None => break,
            }
        }
        let mut hi = us;
        while hi < u1 {
            match hit(hi + 1) {
                Some(t) => {
                    hi += 1;
                    visit(row + hi, t);
                }
                None => break,
            }
        }
        seed = Some((lo + hi) / 2);
    }
}

/// Capsules of every link expressed in the (effective) camera frame.
pub fn scene_capsules_into(
    model: &KinematicModel,
    values: &[f64],
    poses: &mut Vec<RigidTransform>,
    out: &mut Vec<Capsule>,
) -> Result<(), KinematicsError> {
    model.forward_kinematics_into(values, poses)?;
    let cam_inv = model.camera_pose(poses).inverse();
    out.clear();
    for (link, pose) in model.links().iter().zip(poses.iter()) {
        if link.capsules.is_empty() {
            continue;
        }
        let to_cam = cam_inv.compose(pose);
        out.extend(link.capsules.iter().map(|c| c.transformed(&to_cam)));
    }
    Ok(())
}

/// Renders a set of camera-frame capsules into a dense depth image.
pub fn render_capsules(intr: &CameraIntrinsics, capsules: &[Capsule]) -> RenderedDepth {
    let mut out = RenderedDepth::empty(intr.width, intr.height);
    for cap in capsules {
        raster_capsule(intr, cap, |i, t| {
            if t < out.depth[i] {
                out.depth[i] = t;
            }
        });
    }
    for (c, d) in out.coverage.iter_mut().zip(&out.depth) {
        *c = d.is_finite();
    }
    out
}

/// Renders the model at the given joint values (virtual joints included when
/// the model is injected).
pub fn render(model: &KinematicModel, values: &[f64]) -> Result<RenderedDepth, KinematicsError> {
    render_with_extra(model, values, &[])
}

/// Renders the model plus additional camera-frame capsules (occluders).
pub fn render_with_extra(
    model: &KinematicModel,
    values: &[f64],
    extra: &[Capsule],
) -> Result<RenderedDepth, KinematicsError> {
    let mut poses = Vec::new();
    let mut caps = Vec::new();
    scene_capsules_into(model, values, &mut poses, &mut caps)?;
    caps.extend_from_slice(extra);
    Ok(render_capsules(model.intrinsics(), &caps))
}

/// Reusable renderer producing only the covered pixels. Keeps a dense
/// scratch buffer that is reset through the touched list, so each render
/// costs time proportional to the capsules' screen footprint.
#[derive(Clone, Debug)]
pub struct SparseRenderer {
    intr: CameraIntrinsics,
    depth: Vec<f64>,
    touched: Vec<u32>,
    poses: Vec<RigidTransform>,
    caps: Vec<Capsule>,
}

impl SparseRenderer {
    pub fn new(intr: CameraIntrinsics) -> Self {
        Self {
            intr,
            depth: vec![f64::INFINITY; intr.width * intr.height],
            touched: Vec::new(),
            poses: Vec::new(),
            caps: Vec::new(),
        }
    }

    pub fn render(&mut self, model: &KinematicModel, values: &[f64]) -> Result<(), KinematicsError> {
        for &i in &self.touched {
            self.depth[i as usize] = f64::INFINITY;
        }
        self.touched.clear();
        scene_capsules_into(model, values, &mut self.poses, &mut self.caps)?;
        let depth = &mut self.depth;
        let touched = &mut self.touched;
        for cap in &self.caps {
            raster_capsule(&self.intr, cap, |i, t| {
                let d = &mut depth[i];
                if d.is_infinite() {
                    touched.push(i as u32);
                    *d = t;
                } else if t < *d {
                    *d = t;
                }
            });
        }
        Ok(())
    }

    /// Covered pixels of the last render as `(index, depth)`, in first-touch order.
    pub fn covered(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.touched.iter().map(|&i| (i as usize, self.depth[i as usize]))
    }

    pub fn covered_count(&self) -> usize {
        self.touched.len()
    }
}
