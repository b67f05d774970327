use std::f64::consts::FRAC_PI_2;

use crate::kinematics::{
    model_from_document, CameraDoc, CapsuleDoc, JointDoc, JointKind, KinematicModel, LinkDoc,
    ModelDocument, OriginDoc,
};

const LINK_LENGTHS: [f64; 7] = [0.15, 0.15, 0.15, 0.15, 0.15, 0.15, 0.1];
const LINK_RADII: [f64; 7] = [0.05, 0.045, 0.045, 0.04, 0.04, 0.035, 0.03];

/// Seven-joint arm with 1 m reach, stretched along +x from a short base
/// column, seen side-on by a 160x120 depth camera about 1.4 m away.
pub fn default_model_document() -> ModelDocument {
    let mut links = vec![LinkDoc {
        name: "base".into(),
        capsules: vec![CapsuleDoc {
            a: [0.0, 0.0, 0.0],
            b: [0.0, 0.0, 0.1],
            r: 0.06,
        }],
    }];
    let mut joints = Vec::new();
    let axes = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
    for (i, (&len, &r)) in LINK_LENGTHS.iter().zip(&LINK_RADII).enumerate() {
        let name = format!("link{}", i + 1);
        links.push(LinkDoc {
            name: name.clone(),
            capsules: vec![CapsuleDoc {
                a: [0.0, 0.0, 0.0],
                b: [len, 0.0, 0.0],
                r,
            }],
        });
        let xyz = if i == 0 {
            [0.0, 0.0, 0.1]
        } else {
            [LINK_LENGTHS[i - 1], 0.0, 0.0]
        };
        joints.push(JointDoc {
            name: format!("j{}", i + 1),
            parent: if i == 0 { "base".into() } else { format!("link{i}") },
            child: name,
            origin: Some(OriginDoc { xyz, rpy: [0.0; 3] }),
            axis: axes[i % 2],
            kind: JointKind::Revolute,
        });
    }
    ModelDocument {
        links,
        joints,
        camera: CameraDoc {
            mount_link: "base".into(),
            fx: 150.0,
            fy: 150.0,
            cx: 80.0,
            cy: 60.0,
            width: 160,
            height: 120,
            z_min: 0.3,
            z_max: 4.0,
            origin: Some(OriginDoc {
                xyz: [0.45, -1.4, 0.2],
                rpy: [-FRAC_PI_2, 0.0, 0.0],
            }),
        },
        end_effector: Some("link7".into()),
    }
}

pub fn default_model() -> KinematicModel {
    model_from_document(default_model_document()).expect("built-in model is valid")
}

/// Joint configuration around which the default trajectories oscillate.
pub const DEFAULT_CENTER: [f64; 7] = [0.0, -0.35, 0.0, 0.45, 0.0, 0.35, 0.0];
