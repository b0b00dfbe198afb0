//! Articulated-object model: a kinematic tree of box-primitive rigid parts
//! connected by single-DoF joints, plus forward kinematics.

mod builtin;
mod urdf;

pub use builtin::{make_experimental_box, ExperimentalBoxSpec};
pub use urdf::{parse_urdf, UrdfParse};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{Pose, Vec3, UNIT_TOL};

pub const MODEL_VERSION: u32 = 1;

/// Solid box, given by half extents and a pose in the owning part's frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoxPrimitive {
    pub half_extents: Vec3,
    pub local_pose: Pose,
}

impl BoxPrimitive {
    pub fn new(half_extents: Vec3, local_pose: Pose) -> Self {
        BoxPrimitive {
            half_extents,
            local_pose,
        }
    }

    pub fn centered(half_extents: Vec3) -> Self {
        BoxPrimitive::new(half_extents, Pose::IDENTITY)
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let h = self.half_extents;
        let mut out = [Vec3::ZERO; 8];
        for (n, corner) in out.iter_mut().enumerate() {
            let sx = if n & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if n & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if n & 4 == 0 { -1.0 } else { 1.0 };
            *corner = self
                .local_pose
                .transform_point(Vec3::new(sx * h.x, sy * h.y, sz * h.z));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RigidPart {
    pub name: String,
    pub boxes: Vec<BoxPrimitive>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

impl JointKind {
    pub fn is_movable(self) -> bool {
        !matches!(self, JointKind::Fixed)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectJoint {
    pub name: String,
    pub kind: JointKind,
    /// Part indices into `ArticulatedObject::parts`.
    pub parent: usize,
    pub child: usize,
    /// Child frame at zero joint value, expressed in the parent frame.
    pub origin: Pose,
    /// Motion axis in the child joint frame (after the origin rpy).
    pub axis: Vec3,
    /// [lo, hi]; required for movable joints, ignored for fixed ones.
    pub limits: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArticulatedObject {
    #[serde(default = "default_model_version")]
    pub model_version: u32,
    pub base_pose: Pose,
    pub parts: Vec<RigidPart>,
    pub joints: Vec<ObjectJoint>,
}

fn default_model_version() -> u32 {
    MODEL_VERSION
}

impl ArticulatedObject {
    /// Validates the tree invariants and returns the object.
    pub fn new(base_pose: Pose, parts: Vec<RigidPart>, joints: Vec<ObjectJoint>) -> Result<Self> {
        let obj = ArticulatedObject {
            model_version: MODEL_VERSION,
            base_pose,
            parts,
            joints,
        };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::MalformedTree("object has no parts".into()));
        }
        let mut names = std::collections::HashSet::new();
        for part in &self.parts {
            if part.boxes.is_empty() {
                return Err(Error::UnsupportedGeometry {
                    link: part.name.clone(),
                    detail: "part has no box collision geometry".into(),
                });
            }
            for b in &part.boxes {
                if !(b.half_extents.x > 0.0 && b.half_extents.y > 0.0 && b.half_extents.z > 0.0) {
                    return Err(Error::UnsupportedGeometry {
                        link: part.name.clone(),
                        detail: "box half extents must be positive".into(),
                    });
                }
            }
            if !names.insert(part.name.as_str()) {
                return Err(Error::MalformedTree(format!(
                    "duplicate part name `{}`",
                    part.name
                )));
            }
        }
        let mut parent_count = vec![0usize; self.parts.len()];
        for joint in &self.joints {
            if joint.parent >= self.parts.len() || joint.child >= self.parts.len() {
                return Err(Error::MalformedTree(format!(
                    "joint `{}` references missing part",
                    joint.name
                )));
            }
            parent_count[joint.child] += 1;
            if joint.kind.is_movable() {
                let n = joint.axis.norm();
                if (n - 1.0).abs() > UNIT_TOL {
                    return Err(Error::MalformedTree(format!(
                        "joint `{}` axis is not unit length",
                        joint.name
                    )));
                }
                match joint.limits {
                    Some([lo, hi]) if lo < hi => {}
                    Some(_) => {
                        return Err(Error::MalformedTree(format!(
                            "joint `{}` has empty limit range",
                            joint.name
                        )))
                    }
                    None => return Err(Error::MissingLimits(joint.name.clone())),
                }
            }
        }
        let roots: Vec<usize> = parent_count
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
            .collect();
        if roots.len() != 1 {
            return Err(Error::MalformedTree(format!(
                "expected exactly one base part, found {}",
                roots.len()
            )));
        }
        if parent_count.iter().any(|&c| c > 1) {
            return Err(Error::MalformedTree(
                "a part has more than one parent joint".into(),
            ));
        }
        // Reachability from the root catches cycles disconnected from it.
        self.topological_joint_order()?;
        Ok(())
    }

    pub fn base_part(&self) -> usize {
        let mut has_parent = vec![false; self.parts.len()];
        for j in &self.joints {
            has_parent[j.child] = true;
        }
        has_parent.iter().position(|&b| !b).expect("validated tree")
    }

    /// Joint indices ordered so that every parent part is posed before its
    /// children. Errors if some part is unreachable from the base (cycle).
    fn topological_joint_order(&self) -> Result<Vec<usize>> {
        let mut has_parent = vec![false; self.parts.len()];
        for j in &self.joints {
            has_parent[j.child] = true;
        }
        let base = has_parent
            .iter()
            .position(|&b| !b)
            .ok_or_else(|| Error::MalformedTree("no base part (cycle)".into()))?;
        let mut placed = vec![false; self.parts.len()];
        placed[base] = true;
        let mut order = Vec::with_capacity(self.joints.len());
        let mut remaining: Vec<usize> = (0..self.joints.len()).collect();
        while !remaining.is_empty() {
            let before = remaining.len();
            remaining.retain(|&ji| {
                let j = &self.joints[ji];
                if placed[j.parent] {
                    placed[j.child] = true;
                    order.push(ji);
                    false
                } else {
                    true
                }
            });
            if remaining.len() == before {
                return Err(Error::MalformedTree(
                    "joint graph contains a cycle or unreachable parts".into(),
                ));
            }
        }
        Ok(order)
    }

    /// Indices (into `joints`) of the movable joints, in declaration order.
    pub fn movable_joints(&self) -> Vec<usize> {
        self.joints
            .iter()
            .enumerate()
            .filter(|(_, j)| j.kind.is_movable())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let obj: ArticulatedObject = serde_json::from_str(text)?;
        obj.validate()?;
        Ok(obj)
    }
}

/// Relative motion of a joint's child frame at the given joint value.
fn joint_motion(kind: JointKind, axis: Vec3, value: f64) -> Pose {
    match kind {
        JointKind::Revolute => Pose::new(
            Vec3::ZERO,
            crate::se3::Quat::from_axis_angle_unchecked(axis, value),
        ),
        JointKind::Prismatic => Pose::from_translation(axis * value),
        JointKind::Fixed => Pose::IDENTITY,
    }
}

/// World pose of every part at the given movable-joint values
/// (`joint_values[i]` pairs with `movable_joints()[i]`).
pub fn part_pose(object: &ArticulatedObject, joint_values: &[f64]) -> Result<Vec<Pose>> {
    let movable = object.movable_joints();
    if joint_values.len() != movable.len() {
        return Err(Error::InvalidConfig(format!(
            "expected {} joint values, got {}",
            movable.len(),
            joint_values.len()
        )));
    }
    let mut value_of_joint = vec![0.0f64; object.joints.len()];
    for (slot, &ji) in movable.iter().enumerate() {
        let joint = &object.joints[ji];
        let [lo, hi] = joint.limits.expect("movable joint has limits");
        let v = joint_values[slot];
        if v < lo || v > hi {
            return Err(Error::OutOfLimits {
                joint: joint.name.clone(),
                value: v,
                lo,
                hi,
            });
        }
        value_of_joint[ji] = v;
    }
    let order = object.topological_joint_order()?;
    let mut poses = vec![Pose::IDENTITY; object.parts.len()];
    poses[object.base_part()] = object.base_pose;
    for ji in order {
        let joint = &object.joints[ji];
        let motion = joint_motion(joint.kind, joint.axis, value_of_joint[ji]);
        poses[joint.child] = poses[joint.parent].compose(joint.origin).compose(motion);
    }
    Ok(poses)
}

/// World frame of a joint at zero value: parent pose ∘ origin. The motion
/// axis expressed in world is this frame's rotation applied to `axis`.
pub fn joint_world_frame(
    object: &ArticulatedObject,
    joint_values: &[f64],
    joint_index: usize,
) -> Result<Pose> {
    let poses = part_pose(object, joint_values)?;
    let joint = &object.joints[joint_index];
    Ok(poses[joint.parent].compose(joint.origin))
}

/// Eq-style activation task: drive one movable joint from s_init to s_target.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ActivationTask {
    /// Index into `movable_joints()`.
    pub joint_index: usize,
    pub s_init: f64,
    pub s_target: f64,
}

impl ActivationTask {
    pub fn new(joint_index: usize, s_init: f64, s_target: f64) -> Self {
        ActivationTask {
            joint_index,
            s_init,
            s_target,
        }
    }

    pub fn validate(&self, object: &ArticulatedObject) -> Result<()> {
        let movable = object.movable_joints();
        let ji = *movable.get(self.joint_index).ok_or_else(|| {
            Error::InvalidTask(format!(
                "joint index {} out of range ({} movable joints)",
                self.joint_index,
                movable.len()
            ))
        })?;
        let joint = &object.joints[ji];
        let [lo, hi] = joint.limits.expect("movable joint has limits");
        if self.s_init == self.s_target {
            return Err(Error::InvalidTask("s_init equals s_target".into()));
        }
        for (label, v) in [("s_init", self.s_init), ("s_target", self.s_target)] {
            if v < lo || v > hi {
                return Err(Error::InvalidTask(format!(
                    "{label} = {v} outside joint `{}` limits [{lo}, {hi}]",
                    joint.name
                )));
            }
        }
        Ok(())
    }

    /// Index into `object.joints` of the task joint.
    pub fn joint(&self, object: &ArticulatedObject) -> usize {
        object.movable_joints()[self.joint_index]
    }

    /// Part moved by the task joint.
    pub fn moving_part(&self, object: &ArticulatedObject) -> usize {
        object.joints[self.joint(object)].child
    }

    pub fn travel(&self) -> f64 {
        self.s_target - self.s_init
    }
}
