#![allow(dead_code)]

use jointfusion::depth::{image_log_likelihood, render, DepthImage, PixelModelParams, PixelSubset};
use jointfusion::encoder_filter::{BeliefVector, JointBelief, JointRole};
use jointfusion::image_update::{CpfConfig, ParticleSet};
use jointfusion::kinematics::{
    model_from_document, CameraDoc, CapsuleDoc, JointDoc, JointKind, KinematicModel, LinkDoc,
    ModelDocument, OriginDoc,
};
use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3};
use rand::Rng;

pub fn camera(width: usize, height: usize, f: f64) -> CameraDoc {
    CameraDoc {
        mount_link: "base".into(),
        fx: f,
        fy: f,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        width,
        height,
        z_min: 0.3,
        z_max: 4.0,
        origin: None,
    }
}

/// Chain hanging in front of a camera at the base origin (camera frame =
/// world frame, optical axis +z). Joint `i` rotates about `axes[i]`; the
/// first joint sits 1 m ahead of the camera.
pub fn toy_chain_doc(axes: &[[f64; 3]], link_len: f64, radius: f64, cam: CameraDoc) -> ModelDocument {
    let mut links = vec![LinkDoc {
        name: "base".into(),
        capsules: vec![],
    }];
    let mut joints = Vec::new();
    for (i, axis) in axes.iter().enumerate() {
        let name = format!("l{}", i + 1);
        links.push(LinkDoc {
            name: name.clone(),
            capsules: vec![CapsuleDoc {
                a: [0.0; 3],
                b: [link_len, 0.0, 0.0],
                r: radius,
            }],
        });
        joints.push(JointDoc {
            name: format!("j{}", i + 1),
            parent: if i == 0 { "base".into() } else { format!("l{i}") },
            child: name,
            origin: Some(OriginDoc {
                xyz: if i == 0 { [-0.15, 0.0, 1.0] } else { [link_len, 0.0, 0.0] },
                rpy: [0.0; 3],
            }),
            axis: *axis,
            kind: JointKind::Revolute,
        });
    }
    ModelDocument {
        links,
        joints,
        camera: cam,
        end_effector: None,
    }
}

pub fn toy_chain(axes: &[[f64; 3]], link_len: f64, radius: f64, cam: CameraDoc) -> KinematicModel {
    model_from_document(toy_chain_doc(axes, link_len, radius, cam)).unwrap()
}

fn unit_vector<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: Vector3<f64> = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.2 && n < 1.0 {
            let u = v / n;
            return [u.x, u.y, u.z];
        }
    }
}

/// Serial chain with random origins, axes and joint kinds.
pub fn random_chain_doc<R: Rng>(rng: &mut R, n: usize) -> ModelDocument {
    let mut links = vec![LinkDoc {
        name: "base".into(),
        capsules: vec![CapsuleDoc {
            a: [0.0; 3],
            b: [0.0, 0.0, 0.1],
            r: 0.05,
        }],
    }];
    let mut joints = Vec::new();
    for i in 0..n {
        let name = format!("link{}", i + 1);
        links.push(LinkDoc {
            name: name.clone(),
            capsules: vec![CapsuleDoc {
                a: [0.0; 3],
                b: [0.1, 0.0, 0.0],
                r: 0.03,
            }],
        });
        let mut xyz = [0.0; 3];
        let mut rpy = [0.0; 3];
        for k in 0..3 {
            xyz[k] = rng.gen_range(-0.3..0.3);
            rpy[k] = rng.gen_range(-3.0..3.0);
        }
        joints.push(JointDoc {
            name: format!("j{}", i + 1),
            parent: if i == 0 { "base".into() } else { format!("link{i}") },
            child: name,
            origin: Some(OriginDoc { xyz, rpy }),
            axis: unit_vector(rng),
            kind: if rng.gen_bool(0.3) {
                JointKind::Prismatic
            } else {
                JointKind::Revolute
            },
        });
    }
    let mut cam = camera(64, 48, 60.0);
    cam.origin = Some(OriginDoc {
        xyz: [0.2, -1.0, 0.3],
        rpy: [-1.4, 0.1, 0.2],
    });
    ModelDocument {
        links,
        joints,
        camera: cam,
        end_effector: None,
    }
}

/// 4x4 homogeneous matrix from xyz + roll/pitch/yaw (fixed-axis x, y, z).
pub fn homogeneous(xyz: [f64; 3], rpy: [f64; 3]) -> Matrix4<f64> {
    let (sr, cr) = rpy[0].sin_cos();
    let (sp, cp) = rpy[1].sin_cos();
    let (sy, cy) = rpy[2].sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    block(rz * ry * rx, Vector3::from(xyz))
}

/// Rodrigues rotation about a unit axis.
pub fn axis_rotation(axis: [f64; 3], angle: f64) -> Matrix4<f64> {
    let k = Vector3::from(axis).normalize();
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    let r = Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos());
    block(r, Vector3::zeros())
}

pub fn translation(v: Vector3<f64>) -> Matrix4<f64> {
    block(Matrix3::identity(), v)
}

pub fn block(r: Matrix3<f64>, t: Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

/// Naive serial-chain forward kinematics on matrices, straight from the
/// document. Returns one matrix per link, base first.
pub fn oracle_link_matrices(doc: &ModelDocument, values: &[f64]) -> Vec<Matrix4<f64>> {
    let mut out = vec![Matrix4::identity()];
    for (j, joint) in doc.joints.iter().enumerate() {
        let parent = doc.links.iter().position(|l| l.name == joint.parent).unwrap();
        let origin = joint
            .origin
            .as_ref()
            .map_or(Matrix4::identity(), |o| homogeneous(o.xyz, o.rpy));
        let motion = match joint.kind {
            JointKind::Prismatic | JointKind::VirtualPrismatic => {
                translation(Vector3::from(joint.axis).normalize() * values[j])
            }
            _ => axis_rotation(joint.axis, values[j]),
        };
        let m = out[parent] * origin * motion;
        let child = doc.links.iter().position(|l| l.name == joint.child).unwrap();
        assert_eq!(child, out.len(), "oracle expects links listed in chain order");
        out.push(m);
    }
    out
}

pub fn oracle_camera(doc: &ModelDocument, links: &[Matrix4<f64>]) -> Matrix4<f64> {
    let mount = doc.links.iter().position(|l| l.name == doc.camera.mount_link).unwrap();
    let origin = doc
        .camera
        .origin
        .as_ref()
        .map_or(Matrix4::identity(), |o| homogeneous(o.xyz, o.rpy));
    links[mount] * origin
}

pub fn max_abs_diff(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn pixel() -> PixelModelParams {
    PixelModelParams {
        sigma_z: 0.03,
        p_occluded: 0.1,
        w_tail: 0.05,
        z_min: 0.3,
        z_max: 4.0,
    }
}

/// Noise-free frame of the chain at `truth` in front of a flat wall.
pub fn observe(model: &KinematicModel, truth: &[f64], ts: f64) -> DepthImage {
    let r = render(model, truth).unwrap();
    let depth = r.depth.iter().map(|&d| if d.is_finite() { d as f32 } else { 2.5 }).collect();
    DepthImage::new(r.width, r.height, depth, ts, 0).unwrap()
}

pub fn chain(n: usize) -> KinematicModel {
    toy_chain(&vec![[0.0, 1.0, 0.0]; n], 0.3 / n as f64 * 1.5, 0.04, camera(32, 24, 40.0))
}

pub fn gaussian_beliefs(means: &[f64], stds: &[f64], ts: f64) -> BeliefVector {
    BeliefVector {
        joints: means
            .iter()
            .zip(stds)
            .map(|(&m, &s)| JointBelief {
                mean: Vector2::new(m, 0.0),
                cov: Matrix2::new(s * s, 0.0, 0.0, 1e-4),
                timestamp: ts,
                role: JointRole::Encoder,
            })
            .collect(),
        timestamp: ts,
    }
}

pub fn cfg(l: usize, seed: u64) -> CpfConfig {
    CpfConfig {
        particle_count: l,
        seed,
        ..CpfConfig::default()
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Posterior over a regular grid: prior Gaussian times the full-frame image
/// likelihood, normalized.
pub struct Grid {
    pub points: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
}

impl Grid {
    pub fn new(model: &KinematicModel, image: &DepthImage, means: &[f64], stds: &[f64], per_dim: usize, span: f64) -> Grid {
        let dims = means.len();
        let total = per_dim.pow(dims as u32);
        let mut points = Vec::with_capacity(total);
        let mut logp = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut x = Vec::with_capacity(dims);
            let mut lp = 0.0;
            for d in 0..dims {
                let k = rem % per_dim;
                rem /= per_dim;
                let u = -span + 2.0 * span * (k as f64 + 0.5) / per_dim as f64;
                x.push(means[d] + u * stds[d]);
                lp -= 0.5 * u * u;
            }
            let rendered = render(model, &x).unwrap();
            lp += image_log_likelihood(image, &rendered, &pixel(), PixelSubset::All).unwrap();
            points.push(x);
            logp.push(lp);
        }
        let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut mass: Vec<f64> = logp.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|w| *w /= z);
        Grid { points, mass }
    }

    pub fn mean(&self, d: usize) -> f64 {
        self.points.iter().zip(&self.mass).map(|(p, w)| w * p[d]).sum()
    }

    pub fn std(&self, d: usize) -> f64 {
        let m = self.mean(d);
        self.points
            .iter()
            .zip(&self.mass)
            .map(|(p, w)| w * (p[d] - m).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn weighted_mean(set: &ParticleSet, d: usize) -> f64 {
    set.weights().iter().enumerate().map(|(l, w)| w * set.particle(l)[d]).sum()
}

/// Total variation between the particle set and the grid posterior over a
/// shared histogram (bins of `width` around `centre` per dimension, with
/// overflow bins at both ends).
pub fn total_variation(set: &ParticleSet, grid: &Grid, centre: &[f64], width: &[f64], bins: usize) -> f64 {
    let dims = centre.len();
    let bin_of = |x: &[f64]| -> usize {
        let mut idx = 0;
        for d in (0..dims).rev() {
            let u = ((x[d] - centre[d]) / width[d] + bins as f64 / 2.0).floor();
            let b = if u < 0.0 { 0 } else { (u as usize + 1).min(bins + 1) };
            idx = idx * (bins + 2) + b;
        }
        idx
    };
    let total = (bins + 2).pow(dims as u32);
    let mut p = vec![0.0; total];
    let mut q = vec![0.0; total];
    for (l, w) in set.weights().iter().enumerate() {
        p[bin_of(set.particle(l))] += w;
    }
    for (x, w) in grid.points.iter().zip(&grid.mass) {
        q[bin_of(x)] += w;
    }
    0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

