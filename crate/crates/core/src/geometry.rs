//! Small vector helpers and oriented planes in world millimetres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Point3;

pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

/// Oriented plane; `normal` has unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: Point3,
    pub normal: Point3,
}

/// Triangles with a smaller area are treated as collinear.
pub const MIN_TRIANGLE_AREA_MM2: f64 = 1e-6;

impl Plane {
    pub fn new(point: Point3, normal: Point3) -> Result<Plane> {
        let n = norm(normal);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::CollinearLandmarks(0.0));
        }
        Ok(Plane {
            point,
            normal: [normal[0] / n, normal[1] / n, normal[2] / n],
        })
    }

    /// Plane through three points, normal flipped to have a non-negative x
    /// component.
    pub fn through(a: Point3, b: Point3, c: Point3) -> Result<Plane> {
        let n = cross(sub(b, a), sub(c, a));
        let area = 0.5 * norm(n);
        if area <= MIN_TRIANGLE_AREA_MM2 {
            return Err(Error::CollinearLandmarks(area));
        }
        let s = if n[0] < 0.0 { -1.0 } else { 1.0 };
        Plane::new(a, [s * n[0], s * n[1], s * n[2]])
    }

    pub fn signed_distance(&self, p: Point3) -> f64 {
        dot(sub(p, self.point), self.normal)
    }

    /// Zero distance counts as the non-negative side.
    pub fn is_nonnegative_side(&self, p: Point3) -> bool {
        self.signed_distance(p) >= 0.0
    }

    /// Same plane shifted along its normal by `offset` mm.
    pub fn shifted(&self, offset: f64) -> Plane {
        let p = self.point;
        let n = self.normal;
        Plane {
            point: [p[0] + offset * n[0], p[1] + offset * n[1], p[2] + offset * n[2]],
            normal: n,
        }
    }
}
