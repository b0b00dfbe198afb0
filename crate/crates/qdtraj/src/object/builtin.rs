//! Synthetic experimental box: a frame, a hinged front door with a
//! protruding handle, and a top sliding tray with its own handle.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::se3::{Pose, Vec3};

use super::{ArticulatedObject, BoxPrimitive, JointKind, ObjectJoint, RigidPart};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentalBoxSpec {
    pub frame_half_extents: Vec3,
    /// Door panel half thickness (panel width follows the frame).
    pub door_half_thickness: f64,
    /// Door panel half height; the door is a wide slat, shorter than the
    /// frame face it covers.
    pub door_half_height: f64,
    /// Vertical clearance between the door slat and the guard plates that
    /// sandwich its parked-open position. Grippers must reach through the
    /// resulting slot, so only near-horizontal approaches can grasp.
    pub slot_clearance: f64,
    pub handle_half_extents: Vec3,
    /// Distance from the hinge edge to the door-handle center, measured
    /// along the door width.
    pub handle_mount: f64,
    pub tray_half_extents: Vec3,
    /// Prismatic travel of the tray, meters.
    pub tray_travel: f64,
    /// Revolute range of the door, radians.
    pub hinge_range: f64,
}

impl Default for ExperimentalBoxSpec {
    fn default() -> Self {
        ExperimentalBoxSpec {
            frame_half_extents: Vec3::new(0.2, 0.3, 0.2),
            door_half_thickness: 0.02,
            door_half_height: 0.02,
            slot_clearance: 0.04,
            handle_half_extents: Vec3::new(0.02, 0.01, 0.01),
            handle_mount: 0.55,
            tray_half_extents: Vec3::new(0.18, 0.12, 0.02),
            tray_travel: 0.20,
            hinge_range: FRAC_PI_2,
        }
    }
}

impl ExperimentalBoxSpec {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("frame", self.frame_half_extents),
            ("handle", self.handle_half_extents),
            ("tray", self.tray_half_extents),
        ];
        for (what, v) in positive {
            if !(v.x > 0.0 && v.y > 0.0 && v.z > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{what} half extents must be positive"
                )));
            }
        }
        if !(self.door_half_thickness > 0.0) {
            return Err(Error::InvalidConfig("door thickness must be positive".into()));
        }
        if !(self.door_half_height > 0.0) || !(self.slot_clearance > 0.0) {
            return Err(Error::InvalidConfig(
                "door height and slot clearance must be positive".into(),
            ));
        }
        if !(self.handle_mount > 0.0) || !(self.handle_mount < 2.0 * self.frame_half_extents.y) {
            return Err(Error::InvalidConfig(
                "handle mount must lie within the door width".into(),
            ));
        }
        if !(self.tray_travel > 0.0) || !(self.hinge_range > 0.0) {
            return Err(Error::InvalidConfig(
                "joint travel ranges must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Builds the builtin articulated object. Joint 0 is the door hinge
/// (`hinge0`, limits [0, hinge_range]); joint 1 is the tray slider
/// (`slider0`, limits [0, tray_travel]).
pub fn make_experimental_box(spec: &ExperimentalBoxSpec) -> Result<ArticulatedObject> {
    spec.validate()?;
    let f = spec.frame_half_extents;
    let dt = spec.door_half_thickness;
    let h = spec.handle_half_extents;
    let t = spec.tray_half_extents;

    // Guard plates sandwich the parked-open door slat (which, at the full
    // hinge value, extends from the hinge toward +x). A rotation about the
    // vertical hinge never changes the z-span of anything attached to the
    // door, so the plates constrain the grasp approach without ever being
    // swept by the swing itself.
    let plate_half = Vec3::new(f.y + 0.1, 0.15, 0.01);
    let plate_z = spec.door_half_height + spec.slot_clearance + plate_half.z;
    let plate_center_x = f.x + f.y;
    let frame = RigidPart {
        name: "frame".into(),
        boxes: vec![
            BoxPrimitive::centered(f),
            BoxPrimitive::new(
                plate_half,
                Pose::from_translation(Vec3::new(plate_center_x, f.y, plate_z)),
            ),
            BoxPrimitive::new(
                plate_half,
                Pose::from_translation(Vec3::new(plate_center_x, f.y, -plate_z)),
            ),
        ],
    };

    // Door child frame sits on the front (+x) face at the +y vertical edge;
    // the panel extends toward -y so a positive hinge value swings it
    // outward, clear of the frame.
    let panel = BoxPrimitive::new(
        Vec3::new(dt, f.y, spec.door_half_height),
        Pose::from_translation(Vec3::new(dt, -f.y, 0.0)),
    );
    // Knob protruding from the outer panel face, inside the guard-plate
    // slot.
    let handle_offset = Vec3::new(2.0 * dt + h.x, -spec.handle_mount, 0.0);
    let door_handle = BoxPrimitive::new(h, Pose::from_translation(handle_offset));
    let door = RigidPart {
        name: "door".into(),
        boxes: vec![panel, door_handle],
    };
    let hinge = ObjectJoint {
        name: "hinge0".into(),
        kind: JointKind::Revolute,
        parent: 0,
        child: 1,
        origin: Pose::from_translation(Vec3::new(f.x, f.y, 0.0)),
        axis: Vec3::new(0.0, 0.0, 1.0),
        limits: Some([0.0, spec.hinge_range]),
    };

    // Tray slides along +x on top of the frame.
    let tray_plate = BoxPrimitive::centered(t);
    let tray_handle = BoxPrimitive::new(h, Pose::from_translation(Vec3::new(t.x + h.x, 0.0, 0.0)));
    let tray = RigidPart {
        name: "tray".into(),
        boxes: vec![tray_plate, tray_handle],
    };
    let slider = ObjectJoint {
        name: "slider0".into(),
        kind: JointKind::Prismatic,
        parent: 0,
        child: 2,
        origin: Pose::from_translation(Vec3::new(0.0, 0.0, f.z + t.z)),
        axis: Vec3::new(1.0, 0.0, 0.0),
        limits: Some([0.0, spec.tray_travel]),
    };

    ArticulatedObject::new(Pose::IDENTITY, vec![frame, door, tray], vec![hinge, slider])
}
