//! Small fixed-size linear algebra and planar footprint tests.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// 3-vector, serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Vector3<T: Real> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> From<[T; 3]> for Vector3<T> {
    fn from(v: [T; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl<T: Real> From<Vector3<T>> for [T; 3] {
    fn from(v: Vector3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Vector3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Distance in the xy plane.
    pub fn planar_distance(self, o: Self) -> T {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn to_array(self) -> [T; 3] {
        self.into()
    }

    /// Scales the vector down so its norm does not exceed `max_norm`.
    pub fn clamp_norm(self, max_norm: T) -> Self {
        let n = self.norm();
        if n > max_norm && n > T::zero() {
            self * (max_norm / n)
        } else {
            self
        }
    }
}

impl<T: Real> Add for Vector3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vector3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vector3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vector3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vector3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Row-major 3x3 matrix, used for rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix3<T: Real> {
    pub rows: [[T; 3]; 3],
}

impl<T: Real> Matrix3<T> {
    pub fn identity() -> Self {
        let (o, l) = (T::zero(), T::one());
        Self { rows: [[l, o, o], [o, l, o], [o, o, l]] }
    }

    /// Rotation `Rz(yaw) * Ry(pitch) * Rx(roll)` from a roll/pitch/yaw vector.
    pub fn from_rpy(rpy: Vector3<T>) -> Self {
        let (sr, cr) = rpy.x.sin_cos();
        let (sp, cp) = rpy.y.sin_cos();
        let (sy, cy) = rpy.z.sin_cos();
        Self {
            rows: [
                [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
                [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
                [-sp, cp * sr, cp * cr],
            ],
        }
    }

    pub fn rot_z(angle: T) -> Self {
        Self::from_rpy(Vector3::new(T::zero(), T::zero(), angle))
    }

    pub fn transpose(&self) -> Self {
        let r = &self.rows;
        Self {
            rows: [
                [r[0][0], r[1][0], r[2][0]],
                [r[0][1], r[1][1], r[2][1]],
                [r[0][2], r[1][2], r[2][2]],
            ],
        }
    }

    pub fn column(&self, c: usize) -> Vector3<T> {
        Vector3::new(self.rows[0][c], self.rows[1][c], self.rows[2][c])
    }
}

impl<T: Real> Mul<Vector3<T>> for Matrix3<T> {
    type Output = Vector3<T>;
    fn mul(self, v: Vector3<T>) -> Vector3<T> {
        let r = &self.rows;
        Vector3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }
}

impl<T: Real> Mul for Matrix3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut rows = [[T::zero(); 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).fold(T::zero(), |acc, k| acc + self.rows[i][k] * o.rows[k][j]);
            }
        }
        Self { rows }
    }
}

/// Planar outline of an upright object, in the table plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outline<T: Real> {
    /// Rectangle with half extents along the object's local x and y axes.
    Rect { half_x: T, half_y: T },
    Disc { radius: T },
}

/// An oriented planar region: an outline placed at `center` and rotated by `yaw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint<T: Real> {
    pub center: (T, T),
    pub yaw: T,
    pub outline: Outline<T>,
}

impl<T: Real> Footprint<T> {
    /// Expresses a world-frame planar point in the footprint's local frame.
    pub fn to_local(&self, x: T, y: T) -> (T, T) {
        let (s, c) = self.yaw.sin_cos();
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Whether the point lies inside the outline shrunk inward by `margin`.
    /// A negative margin grows the outline.
    pub fn contains(&self, x: T, y: T, margin: T) -> bool {
        let (lx, ly) = self.to_local(x, y);
        match self.outline {
            Outline::Rect { half_x, half_y } => {
                let hx = half_x - margin;
                let hy = half_y - margin;
                hx >= T::zero() && hy >= T::zero() && lx.abs() <= hx && ly.abs() <= hy
            }
            Outline::Disc { radius } => {
                let r = radius - margin;
                r >= T::zero() && (lx * lx + ly * ly).sqrt() <= r
            }
        }
    }

    /// World-frame corners of the rectangle (or of the disc's bounding square).
    pub fn corners(&self) -> [(T, T); 4] {
        let (hx, hy) = match self.outline {
            Outline::Rect { half_x, half_y } => (half_x, half_y),
            Outline::Disc { radius } => (radius, radius),
        };
        let (s, c) = self.yaw.sin_cos();
        let place = |lx: T, ly: T| (self.center.0 + c * lx - s * ly, self.center.1 + s * lx + c * ly);
        [place(-hx, -hy), place(hx, -hy), place(hx, hy), place(-hx, hy)]
    }

    /// Whether `inner` lies entirely within this footprint (shrunk by `margin`).
    pub fn encloses(&self, inner: &Footprint<T>, margin: T) -> bool {
        match inner.outline {
            Outline::Rect { .. } => inner.corners().iter().all(|&(x, y)| self.contains(x, y, margin)),
            Outline::Disc { radius } => {
                let (cx, cy) = self.to_local(inner.center.0, inner.center.1);
                match self.outline {
                    Outline::Rect { half_x, half_y } => {
                        cx.abs() + radius <= half_x - margin && cy.abs() + radius <= half_y - margin
                    }
                    Outline::Disc { radius: outer } => (cx * cx + cy * cy).sqrt() + radius <= outer - margin,
                }
            }
        }
    }

    /// Half extents of the axis-aligned bounding box of the footprint.
    pub fn aabb_half(&self) -> (T, T) {
        match self.outline {
            Outline::Disc { radius } => (radius, radius),
            Outline::Rect { half_x, half_y } => {
                let (s, c) = self.yaw.sin_cos();
                (c.abs() * half_x + s.abs() * half_y, s.abs() * half_x + c.abs() * half_y)
            }
        }
    }
}

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T: Real> {
    pub min: Vector3<T>,
    pub max: Vector3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn from_center_half(center: Vector3<T>, half: Vector3<T>) -> Self {
        Self { min: center - half, max: center + half }
    }

    pub fn intersects(&self, o: &Self) -> bool {
        self.min.x <= o.max.x
            && o.min.x <= self.max.x
            && self.min.y <= o.max.y
            && o.min.y <= self.max.y
            && self.min.z <= o.max.z
            && o.min.z <= self.max.z
    }

    /// Euclidean gap between the two boxes; zero when they touch or overlap.
    pub fn gap(&self, o: &Self) -> T {
        let axis = |amin: T, amax: T, bmin: T, bmax: T| (bmin - amax).max(amin - bmax).max(T::zero());
        let dx = axis(self.min.x, self.max.x, o.min.x, o.max.x);
        let dy = axis(self.min.y, self.max.y, o.min.y, o.max.y);
        let dz = axis(self.min.z, self.max.z, o.min.z, o.max.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}
