//! Grasp feasibility surrogate: a candidate end-effector frame grasps the
//! target part when the gripper closing segment cuts a chord through the
//! part's geometry that fits the aperture window, and the palm body does
//! not collide with the rest of the object.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::object::{part_pose, ArticulatedObject, BoxPrimitive};
use crate::se3::{Pose, Vec3};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperModel {
    /// Maximum finger opening, meters.
    pub aperture_max: f64,
    /// Smallest graspable chord, meters.
    pub chord_min: f64,
    /// Clearance kept below the full aperture, meters.
    pub chord_clearance: f64,
    /// Palm collision proxy, posed relative to the TCP.
    pub body_box: BoxPrimitive,
    /// Extra transform from the end-effector frame to the TCP.
    pub tcp_offset: Pose,
}

impl GripperModel {
    /// Closing axis is gripper-local y; approach axis is gripper-local z.
    pub const CLOSING_AXIS: Vec3 = Vec3 {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const APPROACH_AXIS: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    pub fn max_grasp_chord(&self) -> f64 {
        self.aperture_max - self.chord_clearance
    }
}

impl Default for GripperModel {
    fn default() -> Self {
        // Parallel-jaw proportions: 8 cm opening, with a deep palm/wrist
        // block on the -z side of the TCP. The block's half depth exceeds
        // the 7 cm palm offset, so tilting the approach axis can never
        // shift the swept body out of the way faster than it grows: the
        // vertical reach of a side grasp is maximized at zero tilt.
        GripperModel {
            aperture_max: 0.08,
            chord_min: 0.002,
            chord_clearance: 0.002,
            body_box: BoxPrimitive::new(
                Vec3::new(0.04, 0.05, 0.076),
                Pose::from_translation(Vec3::new(0.0, 0.0, -0.07)),
            ),
            tcp_offset: Pose::IDENTITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub success: bool,
    /// Chord cut through the grasped part, meters.
    pub chord: f64,
    pub grasped_part: Option<usize>,
    /// Palm body overlaps a part other than the target.
    pub collision: bool,
}

impl GraspOutcome {
    fn failure(chord: f64, grasped_part: Option<usize>, collision: bool) -> Self {
        GraspOutcome {
            success: false,
            chord,
            grasped_part,
            collision,
        }
    }
}

/// Length of the intersection of a segment with a solid box (slab method in
/// the box frame). `box_world_pose` is the world pose of the frame the box's
/// `local_pose` is expressed in. Tangency counts as zero.
pub fn segment_box_chord(
    seg_start: Vec3,
    seg_end: Vec3,
    bx: &BoxPrimitive,
    box_world_pose: Pose,
) -> f64 {
    let to_box = box_world_pose.compose(bx.local_pose).invert();
    let s = to_box.transform_point(seg_start);
    let e = to_box.transform_point(seg_end);
    let d = e - s;
    let len = d.norm();
    if len == 0.0 {
        return 0.0;
    }
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let h = bx.half_extents.to_array();
    let sa = s.to_array();
    let da = d.to_array();
    for axis in 0..3 {
        if da[axis].abs() < 1e-15 {
            if sa[axis].abs() >= h[axis] {
                return 0.0;
            }
            continue;
        }
        let inv = 1.0 / da[axis];
        let mut near = (-h[axis] - sa[axis]) * inv;
        let mut far = (h[axis] - sa[axis]) * inv;
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 >= t1 {
            return 0.0;
        }
    }
    (t1 - t0).max(0.0) * len
}

/// Separating-axis overlap test between two oriented boxes in world frames.
/// Touching contact does not count as overlap.
pub fn boxes_overlap(a: &BoxPrimitive, a_frame: Pose, b: &BoxPrimitive, b_frame: Pose) -> bool {
    let pa = a_frame.compose(a.local_pose);
    let pb = b_frame.compose(b.local_pose);
    let axes_a: [Vec3; 3] = [
        pa.orientation.rotate(Vec3::new(1.0, 0.0, 0.0)),
        pa.orientation.rotate(Vec3::new(0.0, 1.0, 0.0)),
        pa.orientation.rotate(Vec3::new(0.0, 0.0, 1.0)),
    ];
    let axes_b: [Vec3; 3] = [
        pb.orientation.rotate(Vec3::new(1.0, 0.0, 0.0)),
        pb.orientation.rotate(Vec3::new(0.0, 1.0, 0.0)),
        pb.orientation.rotate(Vec3::new(0.0, 0.0, 1.0)),
    ];
    let d = pb.position - pa.position;
    let ha = a.half_extents.to_array();
    let hb = b.half_extents.to_array();

    let mut candidates: Vec<Vec3> = Vec::with_capacity(15);
    candidates.extend_from_slice(&axes_a);
    candidates.extend_from_slice(&axes_b);
    for ax in &axes_a {
        for bx in &axes_b {
            candidates.push(ax.cross(*bx));
        }
    }
    for axis in candidates {
        let n = axis.norm();
        if n < 1e-12 {
            continue; // parallel edges, degenerate cross product
        }
        let axis = axis * (1.0 / n);
        let ra: f64 = (0..3).map(|i| ha[i] * axes_a[i].dot(axis).abs()).sum();
        let rb: f64 = (0..3).map(|i| hb[i] * axes_b[i].dot(axis).abs()).sum();
        if d.dot(axis).abs() >= ra + rb - 1e-12 {
            return false;
        }
    }
    true
}

/// Evaluates a candidate grasp: `ee_pose` is the end-effector frame in
/// world, `target_part` the part the task moves. All failure modes are
/// encoded in the outcome rather than errors.
pub fn evaluate_grasp(
    object: &ArticulatedObject,
    joint_values: &[f64],
    gripper: &GripperModel,
    ee_pose: Pose,
    target_part: usize,
) -> Result<GraspOutcome> {
    let poses = part_pose(object, joint_values)?;
    let tcp = ee_pose.compose(gripper.tcp_offset);
    let closing_dir = tcp.orientation.rotate(GripperModel::CLOSING_AXIS);
    let half = closing_dir * (gripper.aperture_max / 2.0);
    let seg_start = tcp.position - half;
    let seg_end = tcp.position + half;

    // Chord per part: summed over that part's boxes.
    let mut best: Option<(usize, f64)> = None;
    for (pi, part) in object.parts.iter().enumerate() {
        let chord: f64 = part
            .boxes
            .iter()
            .map(|b| segment_box_chord(seg_start, seg_end, b, poses[pi]))
            .sum();
        if chord > 0.0 && best.map_or(true, |(_, c)| chord > c) {
            best = Some((pi, chord));
        }
    }

    let collision = object
        .parts
        .iter()
        .enumerate()
        .filter(|(pi, _)| *pi != target_part)
        .any(|(pi, part)| {
            part.boxes
                .iter()
                .any(|b| boxes_overlap(&gripper.body_box, tcp, b, poses[pi]))
        });

    let Some((grasped, chord)) = best else {
        return Ok(GraspOutcome::failure(0.0, None, collision));
    };
    let success = grasped == target_part
        && chord >= gripper.chord_min
        && chord <= gripper.max_grasp_chord()
        && !collision;
    Ok(GraspOutcome {
        success,
        chord,
        grasped_part: Some(grasped),
        collision,
    })
}
