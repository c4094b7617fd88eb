//! 3×3 rotation helpers: roll-pitch-yaw conversion, axis-angle log/exp and
//! re-orthonormalization.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GeometryError, Vec3};
use crate::scalar::Real;

pub type Mat3<T> = [[T; 3]; 3];

/// Roll, pitch, yaw in degrees, each normalized to (−180, 180].
///
/// The rotation is `Rz(yaw)·Ry(pitch)·Rx(roll)`: extrinsic rotations about
/// the fixed x, then y, then z axes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RpyDeg<T = f64> {
    pub roll: T,
    pub pitch: T,
    pub yaw: T,
}

/// Wraps an angle in degrees into (−180, 180].
pub fn wrap_deg<T: Real>(angle: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let wrapped = angle - full * ((angle - half) / full).ceil();
    if wrapped <= -half {
        wrapped + full
    } else {
        wrapped
    }
}

impl<T: Real> RpyDeg<T> {
    pub fn new(roll: T, pitch: T, yaw: T) -> Self {
        Self {
            roll: wrap_deg(roll),
            pitch: wrap_deg(pitch),
            yaw: wrap_deg(yaw),
        }
    }

    pub fn try_new(roll: T, pitch: T, yaw: T) -> Result<Self, GeometryError> {
        if roll.is_finite() && pitch.is_finite() && yaw.is_finite() {
            Ok(Self::new(roll, pitch, yaw))
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn to_array(self) -> [T; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn to_matrix(self) -> Mat3<T> {
        let (sr, cr) = self.roll.to_radians().sin_cos();
        let (sp, cp) = self.pitch.to_radians().sin_cos();
        let (sy, cy) = self.yaw.to_radians().sin_cos();
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    }

    /// Recovers angles from a rotation matrix. At gimbal lock (|pitch| = 90°)
    /// roll is reported as zero.
    pub fn from_matrix(r: &Mat3<T>) -> Self {
        let sp = (-r[2][0]).max(-T::one()).min(T::one());
        let pitch = sp.asin();
        let cp = pitch.cos();
        let (roll, yaw) = if cp.abs() > T::lit(1e-9) {
            (r[2][1].atan2(r[2][2]), r[1][0].atan2(r[0][0]))
        } else {
            (T::zero(), (-r[0][1]).atan2(r[1][1]))
        };
        Self::new(roll.to_degrees(), pitch.to_degrees(), yaw.to_degrees())
    }
}

impl<T: Real + Serialize> Serialize for RpyDeg<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.roll, self.pitch, self.yaw].serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for RpyDeg<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [r, p, y] = <[T; 3]>::deserialize(deserializer)?;
        RpyDeg::try_new(r, p, y).map_err(serde::de::Error::custom)
    }
}

pub fn identity<T: Real>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn apply<T: Real>(r: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    Vec3::new(
        r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
        r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
        r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
    )
}

pub fn determinant<T: Real>(r: &Mat3<T>) -> T {
    r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
}

/// Largest entry of `|RᵀR − I|`.
pub fn orthonormality_error<T: Real>(r: &Mat3<T>) -> T {
    let rtr = mul(&transpose(r), r);
    let id = identity::<T>();
    let mut worst = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((rtr[i][j] - id[i][j]).abs());
        }
    }
    worst
}

/// Pulls a nearly orthonormal matrix back onto SO(3) with Newton–Schulz
/// iterations, which converge to the orthogonal polar factor.
pub fn reorthonormalize<T: Real>(r: &Mat3<T>) -> Mat3<T> {
    let mut cur = *r;
    let half = T::lit(0.5);
    let three = T::lit(3.0);
    for _ in 0..16 {
        if orthonormality_error(&cur) <= T::epsilon() * T::lit(8.0) {
            break;
        }
        let rtr = mul(&transpose(&cur), &cur);
        let mut corr = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { three } else { T::zero() };
                corr[i][j] = (id - rtr[i][j]) * half;
            }
        }
        cur = mul(&cur, &corr);
    }
    cur
}

pub fn rot_x<T: Real>(deg: T) -> Mat3<T> {
    let (s, c) = deg.to_radians().sin_cos();
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, c, -s], [z, s, c]]
}

pub fn rot_y<T: Real>(deg: T) -> Mat3<T> {
    let (s, c) = deg.to_radians().sin_cos();
    let (o, z) = (T::one(), T::zero());
    [[c, z, s], [z, o, z], [-s, z, c]]
}

pub fn rot_z<T: Real>(deg: T) -> Mat3<T> {
    let (s, c) = deg.to_radians().sin_cos();
    let (o, z) = (T::one(), T::zero());
    [[c, -s, z], [s, c, z], [z, z, o]]
}

/// Rotation vector (axis · angle in radians) of `r`.
pub fn log<T: Real>(r: &Mat3<T>) -> Vec3<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let trace = r[0][0] + r[1][1] + r[2][2];
    let cos = ((trace - one) / two).max(-one).min(one);
    let angle = cos.acos();
    let skew = Vec3::new(r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]);
    if angle < T::lit(1e-7) {
        return skew * T::lit(0.5);
    }
    if T::lit(std::f64::consts::PI) - angle < T::lit(1e-6) {
        // Near π: R ≈ 2aaᵀ − I, recover the axis from the dominant diagonal.
        let diag = [r[0][0], r[1][1], r[2][2]];
        let k = if diag[0] >= diag[1] && diag[0] >= diag[2] {
            0
        } else if diag[1] >= diag[2] {
            1
        } else {
            2
        };
        let mut axis = [T::zero(); 3];
        axis[k] = ((diag[k] + one) / two).max(T::zero()).sqrt();
        let pivot = axis[k];
        for (i, a) in axis.iter_mut().enumerate() {
            if i != k {
                *a = (r[i][k] + r[k][i]) / (T::lit(4.0) * pivot);
            }
        }
        let axis = Vec3::from_array(axis).normalized().unwrap_or_else(Vec3::unit_z);
        // Resolve the sign using the (tiny) skew part when available.
        let axis = if axis.dot(skew) < T::zero() { -axis } else { axis };
        return axis * angle;
    }
    skew * (angle / (two * angle.sin()))
}

/// Rodrigues' formula for a rotation vector.
pub fn exp<T: Real>(w: Vec3<T>) -> Mat3<T> {
    let angle = w.norm();
    if angle < T::lit(1e-12) {
        let mut r = identity::<T>();
        r[0][1] = -w.z;
        r[0][2] = w.y;
        r[1][0] = w.z;
        r[1][2] = -w.x;
        r[2][0] = -w.y;
        r[2][1] = w.x;
        return reorthonormalize(&r);
    }
    let a = w / angle;
    let (s, c) = angle.sin_cos();
    let t = T::one() - c;
    [
        [c + a.x * a.x * t, a.x * a.y * t - a.z * s, a.x * a.z * t + a.y * s],
        [a.y * a.x * t + a.z * s, c + a.y * a.y * t, a.y * a.z * t - a.x * s],
        [a.z * a.x * t - a.y * s, a.z * a.y * t + a.x * s, c + a.z * a.z * t],
    ]
}

/// Geodesic angle between two rotations, in degrees.
pub fn angle_between_deg<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> T {
    log(&mul(&transpose(a), b)).norm().to_degrees()
}
