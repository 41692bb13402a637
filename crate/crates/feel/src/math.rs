//! Small fixed-size linear algebra for the 4-state filter.
//!
//! Everything is generic over [`Scalar`] so the filter math runs on `f32` or
//! `f64` alike; the simulator and CLI pin [`crate::Real`] = `f64`.

use std::fmt::{Debug, Display};
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point scalar the core math is generic over.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Default + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumCast + Default + Debug + Display + Send + Sync + 'static
{
}

/// Column vector with four entries.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec4<T>(pub [T; 4]);

impl<T: Scalar> Vec4<T> {
    pub fn zeros() -> Self {
        Vec4([T::zero(); 4])
    }

    pub fn from_f64(v: [f64; 4]) -> Self {
        Vec4(v.map(|x| T::from_f64(x).expect("representable constant")))
    }

    pub fn max_abs(&self) -> T {
        self.0
            .iter()
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }
}

impl<T: Scalar> Index<usize> for Vec4<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T: Scalar> IndexMut<usize> for Vec4<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Scalar> Add for Vec4<T> {
    type Output = Vec4<T>;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..4 {
            out.0[i] = out.0[i] + rhs.0[i];
        }
        out
    }
}

impl<T: Scalar> Sub for Vec4<T> {
    type Output = Vec4<T>;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..4 {
            out.0[i] = out.0[i] - rhs.0[i];
        }
        out
    }
}

/// Row-major 4x4 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat4<T>(pub [[T; 4]; 4]);

impl<T: Scalar> Mat4<T> {
    pub fn zeros() -> Self {
        Mat4([[T::zero(); 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = T::one();
        }
        m
    }

    pub fn from_diag(d: [T; 4]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    pub fn diag(&self) -> [T; 4] {
        [self.0[0][0], self.0[1][1], self.0[2][2], self.0[3][3]]
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2] + self.0[3][3]
    }

    /// Largest absolute entry; cheap scale estimate for pivot thresholds.
    pub fn max_abs(&self) -> T {
        self.0.iter().flatten().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// (M + Mᵀ)/2, the symmetrization applied after every covariance write.
    pub fn symmetrized(&self) -> Self {
        let half = T::from_f64(0.5).unwrap();
        let mut m = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = (self.0[i][j] + self.0[j][i]) * half;
            }
        }
        m
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        worst
    }

    /// Inverse via Gauss-Jordan elimination with partial pivoting.
    ///
    /// Returns `None` when a pivot falls below the numerical noise floor of
    /// the input's magnitude (singular or near-singular matrix).
    pub fn inverse(&self) -> Option<Self> {
        let scale = self.max_abs();
        if scale == T::zero() {
            return None;
        }
        let tiny = T::epsilon() * scale * T::from_f64(16.0).unwrap();

        let mut a = self.0;
        let mut inv = Self::identity().0;

        for col in 0..4 {
            let mut pivot_row = col;
            let mut pivot_mag = a[col][col].abs();
            for (r, row) in a.iter().enumerate().skip(col + 1) {
                if row[col].abs() > pivot_mag {
                    pivot_mag = row[col].abs();
                    pivot_row = r;
                }
            }
            if pivot_mag <= tiny {
                return None;
            }
            if pivot_row != col {
                a.swap(col, pivot_row);
                inv.swap(col, pivot_row);
            }
            let pivot = a[col][col];
            for j in 0..4 {
                a[col][j] = a[col][j] / pivot;
                inv[col][j] = inv[col][j] / pivot;
            }
            for r in 0..4 {
                if r == col {
                    continue;
                }
                let factor = a[r][col];
                if factor == T::zero() {
                    continue;
                }
                for j in 0..4 {
                    a[r][j] = a[r][j] - factor * a[col][j];
                    inv[r][j] = inv[r][j] - factor * inv[col][j];
                }
            }
        }
        Some(Mat4(inv))
    }

    pub fn mul_vec(&self, v: &Vec4<T>) -> Vec4<T> {
        let mut out = Vec4::zeros();
        for i in 0..4 {
            let mut acc = T::zero();
            for j in 0..4 {
                acc = acc + self.0[i][j] * v.0[j];
            }
            out.0[i] = acc;
        }
        out
    }
}

impl<T: Scalar> Mul for Mat4<T> {
    type Output = Mat4<T>;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = T::zero();
                for k in 0..4 {
                    acc = acc + self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = acc;
            }
        }
        out
    }
}

impl<T: Scalar> Mul<Vec4<T>> for Mat4<T> {
    type Output = Vec4<T>;
    fn mul(self, rhs: Vec4<T>) -> Vec4<T> {
        self.mul_vec(&rhs)
    }
}

impl<T: Scalar> Add for Mat4<T> {
    type Output = Mat4<T>;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = out.0[i][j] + rhs.0[i][j];
            }
        }
        out
    }
}

impl<T: Scalar> Sub for Mat4<T> {
    type Output = Mat4<T>;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = out.0[i][j] - rhs.0[i][j];
            }
        }
        out
    }
}
