//! Rigid transforms, quaternions, and the spatial binning that defines
//! archive cells.
//!
//! Poses are position + unit quaternion, quaternions stored (w, x, y, z).
//! All angles are radians. Every operation renormalizes the quaternion so
//! that |q| = 1 holds to 1e-9 throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Unit quaternion, scalar first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product.
    pub fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // q v q* expanded to avoid building intermediate quaternions.
        let u = Vec3::new(self.x, self.y, self.z);
        let uv = u.cross(v);
        let uuv = u.cross(uv);
        v + (uv * self.w + uuv) * 2.0
    }

    /// Rotation of `angle` radians about a unit `axis`.
    pub fn from_axis_angle_unchecked(axis: Vec3, angle: f64) -> Quat {
        let half = 0.5 * angle;
        let s = half.sin();
        Quat::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// URDF-style fixed-axis rpy: R = Rz(yaw) Ry(pitch) Rx(roll).
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Quat {
        let rx = Quat::from_axis_angle_unchecked(Vec3::new(1.0, 0.0, 0.0), roll);
        let ry = Quat::from_axis_angle_unchecked(Vec3::new(0.0, 1.0, 0.0), pitch);
        let rz = Quat::from_axis_angle_unchecked(Vec3::new(0.0, 0.0, 1.0), yaw);
        rz.mul(ry).mul(rx).normalized()
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Distance that treats q and -q as the same orientation:
    /// min(|q1 - q2|, |q1 + q2|).
    pub fn distance(self, o: Quat) -> f64 {
        let d1 = ((self.w - o.w).powi(2)
            + (self.x - o.x).powi(2)
            + (self.y - o.y).powi(2)
            + (self.z - o.z).powi(2))
        .sqrt();
        let d2 = ((self.w + o.w).powi(2)
            + (self.x + o.x).powi(2)
            + (self.y + o.y).powi(2)
            + (self.z + o.z).powi(2))
        .sqrt();
        d1.min(d2)
    }

    /// Geodesic rotation angle between the two orientations.
    pub fn angle_to(self, o: Quat) -> f64 {
        let c = self.dot(o).abs().clamp(0.0, 1.0);
        2.0 * c.acos()
    }

    /// Flips sign so that w >= 0 (and if w == 0, the first nonzero of
    /// x, y, z is >= 0). Serialized archives use this form so byte
    /// comparison works across runs.
    pub fn canonicalized(self) -> Quat {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            Quat::new(-self.w, -self.x, -self.y, -self.z)
        } else {
            self
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Quat {
        Quat::new(a[0], a[1], a[2], a[3])
    }
}

/// Composes rotation `q` with a rotation of `angle` about unit `axis`
/// (applied in q's local frame). Errors if the axis is not unit length.
pub fn axis_angle_rotate(q: Quat, axis: Vec3, angle: f64) -> Result<Quat> {
    let n = axis.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitAxis(n));
    }
    Ok(q.mul(Quat::from_axis_angle_unchecked(axis, angle)).normalized())
}

/// Rigid transform: rotate by `orientation`, then translate by `position`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        orientation: Quat::IDENTITY,
    };

    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Pose {
            position,
            orientation: orientation.normalized(),
        }
    }

    pub fn from_translation(position: Vec3) -> Self {
        Pose {
            position,
            orientation: Quat::IDENTITY,
        }
    }

    /// a then b in a's frame chain: (a ∘ b)(x) = a(b(x)).
    pub fn compose(self, b: Pose) -> Pose {
        Pose {
            position: self.position + self.orientation.rotate(b.position),
            orientation: self.orientation.mul(b.orientation).normalized(),
        }
    }

    pub fn invert(self) -> Pose {
        let inv_q = self.orientation.conjugate();
        Pose {
            position: -inv_q.rotate(self.position),
            orientation: inv_q.normalized(),
        }
    }

    /// R x + t.
    pub fn transform_point(self, x: Vec3) -> Vec3 {
        self.orientation.rotate(x) + self.position
    }

    pub fn approx_eq(self, o: Pose, tol: f64) -> bool {
        (self.position - o.position).norm() <= tol && self.orientation.distance(o.orientation) <= tol
    }
}

/// Index of a closed-open cube cell in the behavioral grid.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct CellKey {
    pub i: i64,
    pub j: i64,
    pub k: i64,
}

impl CellKey {
    pub fn chebyshev_distance(self, o: CellKey) -> i64 {
        (self.i - o.i)
            .abs()
            .max((self.j - o.j).abs())
            .max((self.k - o.k).abs())
    }
}

/// Maps a position to its grid cell: floor(coordinate / cell_size) per axis.
pub fn bin_descriptor(position: Vec3, cell_size: f64) -> Result<CellKey> {
    if !(cell_size > 0.0) {
        return Err(Error::InvalidCellSize(cell_size));
    }
    if !position.is_finite() {
        return Err(Error::NonFinite("bin_descriptor position"));
    }
    Ok(CellKey {
        i: (position.x / cell_size).floor() as i64,
        j: (position.y / cell_size).floor() as i64,
        k: (position.z / cell_size).floor() as i64,
    })
}
