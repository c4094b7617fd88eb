use std::ops::Mul;

use super::rotation::{self, Mat3, RpyDeg};
use super::{GeometryError, Vec3};
use crate::scalar::Real;

/// Rigid homogeneous transform, stored as a 4×4 row-major matrix with the
/// translation in millimetres.
///
/// The rotation block is kept orthonormal (det +1) to within
/// [`Real::rigid_tolerance`] and the bottom row is exactly `(0, 0, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomTransform<T = f64> {
    m: [[T; 4]; 4],
}

impl<T: Real> Default for HomTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> HomTransform<T> {
    pub fn identity() -> Self {
        Self::from_parts_unchecked(&rotation::identity(), Vec3::zero())
    }

    pub fn translation(x: T, y: T, z: T) -> Self {
        Self::from_parts_unchecked(&rotation::identity(), Vec3::new(x, y, z))
    }

    pub fn rot_x(deg: T) -> Self {
        Self::from_parts_unchecked(&rotation::rot_x(deg), Vec3::zero())
    }

    pub fn rot_y(deg: T) -> Self {
        Self::from_parts_unchecked(&rotation::rot_y(deg), Vec3::zero())
    }

    pub fn rot_z(deg: T) -> Self {
        Self::from_parts_unchecked(&rotation::rot_z(deg), Vec3::zero())
    }

    /// Builds a transform from a rotation block and translation, checking
    /// rigidity.
    pub fn from_parts(r: &Mat3<T>, t: Vec3<T>) -> Result<Self, GeometryError> {
        if !t.is_finite() || r.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        check_rigid(r)?;
        Ok(Self::from_parts_unchecked(r, t))
    }

    /// Builds a transform from a full 4×4 matrix.
    pub fn from_matrix(m: [[T; 4]; 4]) -> Result<Self, GeometryError> {
        let z = T::zero();
        if m[3] != [z, z, z, T::one()] {
            return Err(GeometryError::BadBottomRow);
        }
        let r = [[m[0][0], m[0][1], m[0][2]], [m[1][0], m[1][1], m[1][2]], [m[2][0], m[2][1], m[2][2]]];
        Self::from_parts(&r, Vec3::new(m[0][3], m[1][3], m[2][3]))
    }

    fn from_parts_unchecked(r: &Mat3<T>, t: Vec3<T>) -> Self {
        let (z, o) = (T::zero(), T::one());
        Self {
            m: [
                [r[0][0], r[0][1], r[0][2], t.x],
                [r[1][0], r[1][1], r[1][2], t.y],
                [r[2][0], r[2][1], r[2][2], t.z],
                [z, z, z, o],
            ],
        }
    }

    /// Pose with `rotation = Rz(yaw)·Ry(pitch)·Rx(roll)` and the given
    /// translation.
    pub fn from_pose(xyz: Vec3<T>, rpy: RpyDeg<T>) -> Self {
        Self::from_parts_unchecked(&rpy.to_matrix(), xyz)
    }

    pub fn to_pose(&self) -> (Vec3<T>, RpyDeg<T>) {
        (self.translation_part(), RpyDeg::from_matrix(&self.rotation()))
    }

    pub fn matrix(&self) -> &[[T; 4]; 4] {
        &self.m
    }

    pub fn rotation(&self) -> Mat3<T> {
        let m = &self.m;
        [[m[0][0], m[0][1], m[0][2]], [m[1][0], m[1][1], m[1][2]], [m[2][0], m[2][1], m[2][2]]]
    }

    pub fn translation_part(&self) -> Vec3<T> {
        Vec3::new(self.m[0][3], self.m[1][3], self.m[2][3])
    }

    /// Matrix product `self · other`. Applying the result to a point applies
    /// `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = [[T::zero(); 4]; 4];
        for (i, row) in out.iter_mut().enumerate().take(3) {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[i][0] * other.m[0][j] + self.m[i][1] * other.m[1][j] + self.m[i][2] * other.m[2][j] + self.m[i][3] * other.m[3][j];
            }
        }
        out[3] = [T::zero(), T::zero(), T::zero(), T::one()];
        let mut h = Self { m: out };
        let r = h.rotation();
        if rotation::orthonormality_error(&r) > T::rigid_tolerance() {
            h = Self::from_parts_unchecked(&rotation::reorthonormalize(&r), h.translation_part());
        }
        h
    }

    /// `[Rᵀ | −Rᵀt]`.
    pub fn inverse(&self) -> Self {
        let rt = rotation::transpose(&self.rotation());
        let t = rotation::apply(&rt, self.translation_part());
        Self::from_parts_unchecked(&rt, -t)
    }

    /// `R·p + t`.
    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    /// `R·v`, ignoring translation.
    pub fn transform_vector(&self, v: Vec3<T>) -> Vec3<T> {
        rotation::apply(&self.rotation(), v)
    }

    /// Interpolates between two poses: translation linearly, rotation along
    /// the geodesic. `s` in [0, 1].
    pub fn interpolate(&self, other: &Self, s: T) -> Self {
        let r0 = self.rotation();
        let delta = rotation::mul(&rotation::transpose(&r0), &other.rotation());
        let w = rotation::log(&delta);
        let r = rotation::mul(&r0, &rotation::exp(w * s));
        let t = self.translation_part().lerp(other.translation_part(), s);
        Self::from_parts_unchecked(&r, t)
    }

    /// Geodesic rotation angle between the two orientations, in degrees.
    pub fn rotation_angle_to(&self, other: &Self) -> T {
        rotation::angle_between_deg(&self.rotation(), &other.rotation())
    }

    /// Largest per-entry difference to another transform.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        worst
    }
}

fn check_rigid<T: Real>(r: &Mat3<T>) -> Result<(), GeometryError> {
    let err = rotation::orthonormality_error(r);
    let det = rotation::determinant(r);
    let tol = T::rigid_tolerance();
    if err > tol || (det - T::one()).abs() > tol {
        return Err(GeometryError::NotRigid {
            deviation: err.max((det - T::one()).abs()).to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

impl<T: Real> Mul for HomTransform<T> {
    type Output = HomTransform<T>;
    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

impl<T: Real> Mul<Vec3<T>> for HomTransform<T> {
    type Output = Vec3<T>;
    fn mul(self, rhs: Vec3<T>) -> Vec3<T> {
        self.transform_point(rhs)
    }
}

/// Matrix product `a · b`.
pub fn compose<T: Real>(a: &HomTransform<T>, b: &HomTransform<T>) -> HomTransform<T> {
    a.compose(b)
}

pub fn transform_point<T: Real>(h: &HomTransform<T>, p: Vec3<T>) -> Vec3<T> {
    h.transform_point(p)
}

/// Maps a point from the eye-in-hand camera frame into the robot base frame:
/// `P_base = H_tcp→base · H_cam→tcp · P_cam`.
pub fn cam_to_base<T: Real>(p_cam: Vec3<T>, h_tcp_base: &HomTransform<T>, h_cam_tcp: &HomTransform<T>) -> Vec3<T> {
    transform_point(&compose(h_tcp_base, h_cam_tcp), p_cam)
}

pub fn pose_to_transform<T: Real>(xyz: Vec3<T>, rpy: RpyDeg<T>) -> HomTransform<T> {
    HomTransform::from_pose(xyz, rpy)
}

/// Camera pose looking from `eye` towards `target`, in the optical
/// convention: +z forward, +x right, +y down in the image.
/// `up` is a world direction that should appear towards the top of the image.
pub fn look_at<T: Real>(eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> Result<HomTransform<T>, GeometryError> {
    let forward = (target - eye).normalized().ok_or(GeometryError::Degenerate)?;
    let right = forward.cross(up).normalized().ok_or(GeometryError::Degenerate)?;
    let down = forward.cross(right);
    let r = [[right.x, down.x, forward.x], [right.y, down.y, forward.y], [right.z, down.z, forward.z]];
    HomTransform::from_parts(&r, eye)
}
