use std::ops::{Add, Mul};

use super::Vec3;

/// Row-major 3x3 matrix, used for rotation matrices and inertia tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub rows: [Vec3; 3],
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3 {
        rows: [Vec3::ZERO, Vec3::ZERO, Vec3::ZERO],
    };
    pub const IDENTITY: Mat3 = Mat3 {
        rows: [Vec3::X, Vec3::Y, Vec3::Z],
    };

    pub fn from_rows(r0: Vec3, r1: Vec3, r2: Vec3) -> Self {
        Self { rows: [r0, r1, r2] }
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self::from_rows(c0, c1, c2).transpose()
    }

    pub fn diagonal(d: Vec3) -> Self {
        Self::from_rows(
            Vec3::new(d.x, 0.0, 0.0),
            Vec3::new(0.0, d.y, 0.0),
            Vec3::new(0.0, 0.0, d.z),
        )
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r][c]
    }

    pub fn col(&self, c: usize) -> Vec3 {
        Vec3::new(self.rows[0][c], self.rows[1][c], self.rows[2][c])
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_rows(self.col(0), self.col(1), self.col(2))
    }

    pub fn trace(&self) -> f64 {
        self.rows[0].x + self.rows[1].y + self.rows[2].z
    }

    pub fn determinant(&self) -> f64 {
        self.rows[0].dot(self.rows[1].cross(self.rows[2]))
    }

    /// General inverse; `None` when the matrix is singular.
    pub fn inverse(&self) -> Option<Mat3> {
        let [a, b, c] = self.rows;
        let det = self.determinant();
        if det.abs() < 1e-300 {
            return None;
        }
        let inv_det = 1.0 / det;
        // columns of the inverse are the cross products of the rows
        Some(Mat3::from_cols(
            b.cross(c) * inv_det,
            c.cross(a) * inv_det,
            a.cross(b) * inv_det,
        ))
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        Mat3::from_rows(self.rows[0] * s, self.rows[1] * s, self.rows[2] * s)
    }

    /// Skew-symmetric cross-product matrix `[v]_x`.
    pub fn skew(v: Vec3) -> Mat3 {
        Mat3::from_rows(
            Vec3::new(0.0, -v.z, v.y),
            Vec3::new(v.z, 0.0, -v.x),
            Vec3::new(-v.y, v.x, 0.0),
        )
    }

    pub fn outer(a: Vec3, b: Vec3) -> Mat3 {
        Mat3::from_rows(b * a.x, b * a.y, b * a.z)
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.rows[0].dot(v),
            self.rows[1].dot(v),
            self.rows[2].dot(v),
        )
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let c0 = o.col(0);
        let c1 = o.col(1);
        let c2 = o.col(2);
        let row = |r: Vec3| Vec3::new(r.dot(c0), r.dot(c1), r.dot(c2));
        Mat3::from_rows(row(self.rows[0]), row(self.rows[1]), row(self.rows[2]))
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        Mat3::from_rows(
            self.rows[0] + o.rows[0],
            self.rows[1] + o.rows[1],
            self.rows[2] + o.rows[2],
        )
    }
}
