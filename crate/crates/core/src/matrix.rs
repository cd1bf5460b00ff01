use crate::error::{Error, Result};
use crate::grid::Point;

/// Dense square matrix in dimension 1 or 2.
///
/// Dimension 1 uses only the top-left entry. The type is deliberately tiny:
/// the operators in this crate only ever transform points of the plane or the
/// line, so a fixed 2x2 backing store covers every case without pulling in a
/// linear-algebra dependency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    a: [[f64; 2]; 2],
}

impl SquareMatrix {
    pub fn new_1d(a: f64) -> Self {
        SquareMatrix {
            dim: 1,
            a: [[a, 0.0], [0.0, 1.0]],
        }
    }

    pub fn new_2d(rows: [[f64; 2]; 2]) -> Self {
        SquareMatrix { dim: 2, a: rows }
    }

    pub fn identity(dim: usize) -> Self {
        SquareMatrix {
            dim,
            a: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// c times the identity.
    pub fn scalar(dim: usize, c: f64) -> Self {
        SquareMatrix {
            dim,
            a: [[c, 0.0], [0.0, c]],
        }
    }

    /// Counter-clockwise rotation by `theta` radians (dimension 2).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        SquareMatrix {
            dim: 2,
            a: [[c, -s], [s, c]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn det(&self) -> f64 {
        if self.dim == 1 {
            self.a[0][0]
        } else {
            self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
        }
    }

    pub fn inverse(&self) -> Result<SquareMatrix> {
        let d = self.det();
        if d.abs() < 1e-12 {
            return Err(Error::SingularMatrix { det: d });
        }
        if self.dim == 1 {
            Ok(SquareMatrix::new_1d(1.0 / d))
        } else {
            Ok(SquareMatrix {
                dim: 2,
                a: [
                    [self.a[1][1] / d, -self.a[0][1] / d],
                    [-self.a[1][0] / d, self.a[0][0] / d],
                ],
            })
        }
    }

    /// Operator norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        if self.dim == 1 {
            return self.a[0][0].abs();
        }
        // Largest eigenvalue of A^T A via the 2x2 closed form.
        let [[a, b], [c, d]] = self.a;
        let p = a * a + c * c;
        let q = a * b + c * d;
        let r = b * b + d * d;
        let mid = 0.5 * (p + r);
        let disc = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        (mid + disc).max(0.0).sqrt()
    }

    pub fn apply(&self, p: Point) -> Point {
        if self.dim == 1 {
            Point::new_1d(self.a[0][0] * p.x)
        } else {
            Point::new_2d(
                self.a[0][0] * p.x + self.a[0][1] * p.y,
                self.a[1][0] * p.x + self.a[1][1] * p.y,
            )
        }
    }

    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.a[i][0] * other.a[0][j] + self.a[i][1] * other.a[1][j];
            }
        }
        if self.dim == 1 {
            out[1][1] = 1.0;
        }
        SquareMatrix {
            dim: self.dim,
            a: out,
        }
    }

    pub fn neg(&self) -> SquareMatrix {
        let mut a = self.a;
        for row in &mut a {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        if self.dim == 1 {
            a[1][1] = 1.0;
        }
        SquareMatrix { dim: self.dim, a }
    }

    pub fn sub(&self, other: &SquareMatrix) -> SquareMatrix {
        let mut a = self.a;
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] -= other.a[i][j];
            }
        }
        if self.dim == 1 {
            a[1][1] = 1.0;
        }
        SquareMatrix { dim: self.dim, a }
    }

    /// Largest entrywise deviation from the identity.
    pub fn sub_identity_norm(&self) -> f64 {
        let mut out = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { 1.0 } else { 0.0 };
                out = out.max((self.a[i][j] - target).abs());
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().flatten().all(|v| v.is_finite())
    }
}
