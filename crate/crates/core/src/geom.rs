//! Core vector types and the precomputed pairwise/triple-product cache.
//!
//! The cache holds every inner product `⟨u_i, u_j⟩`, squared cross norm
//! `‖u_i × u_j‖²` and triple product `⟨u_k, u_i × u_j⟩` of the face
//! normals. All downstream modules (edge clipping, Jacobian assembly,
//! initial guess) read from it; nothing mutates it after construction.

use crate::real::Real;
use std::ops::{Add, Deref, Mul, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum GeomError {
    /// 3×3 system whose determinant is below the singularity threshold.
    #[error("3x3 system is numerically singular")]
    SingularMatrix,
    /// A vector with zero or non-finite norm cannot be normalised.
    #[error("vector cannot be normalised to unit length")]
    NotNormalizable,
}

/// A 3-vector with finite components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3<R> {
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Vec3<R> {
    pub fn new(x: R, y: R, z: R) -> Self {
        debug_assert!(
            x.is_finite() && y.is_finite() && z.is_finite(),
            "Vec3 components must be finite"
        );
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }

    pub fn dot(self, other: Self) -> R {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> R {
        self.dot(self)
    }

    pub fn norm(self) -> R {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [R; 3] {
        [self.x, self.y, self.z]
    }
}

impl<R: Real> Add for Vec3<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<R: Real> Sub for Vec3<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<R: Real> Neg for Vec3<R> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<R: Real> Mul<R> for Vec3<R> {
    type Output = Self;
    fn mul(self, s: R) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A 3-vector of unit Euclidean norm; an outward face normal.
///
/// Construction re-normalises the input and rejects vectors whose norm
/// cannot be brought within [`Real::UNIT_NORM_TOL`] of one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3<R>(Vec3<R>);

impl<R: Real> UnitVec3<R> {
    pub fn new(v: Vec3<R>) -> Result<Self, GeomError> {
        let n = v.norm();
        if !n.is_finite() || n <= R::zero() {
            return Err(GeomError::NotNormalizable);
        }
        let inv = R::one() / n;
        let u = v * inv;
        if (u.norm() - R::one()).abs() > R::UNIT_NORM_TOL {
            return Err(GeomError::NotNormalizable);
        }
        Ok(Self(u))
    }

    pub fn from_components(x: R, y: R, z: R) -> Result<Self, GeomError> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(GeomError::NotNormalizable);
        }
        Self::new(Vec3::new(x, y, z))
    }

    pub fn vec(self) -> Vec3<R> {
        self.0
    }
}

impl<R> Deref for UnitVec3<R> {
    type Target = Vec3<R>;
    fn deref(&self) -> &Vec3<R> {
        &self.0
    }
}

fn det3<R: Real>(m: &[[R; 3]; 3]) -> R {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn row_norm<R: Real>(row: &[R; 3]) -> R {
    (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt()
}

/// Solves `M x = rhs` for a 3×3 matrix by Cramer's rule.
///
/// The singularity test is relative to the product of the row norms, so
/// uniformly scaling the system does not change the verdict.
pub fn solve3x3<R: Real>(m: &[[R; 3]; 3], rhs: Vec3<R>) -> Result<Vec3<R>, GeomError> {
    let det = det3(m);
    let scale = row_norm(&m[0]) * row_norm(&m[1]) * row_norm(&m[2]);
    if det.abs() <= R::SINGULAR_REL_TOL * scale {
        return Err(GeomError::SingularMatrix);
    }
    let b = rhs.to_array();
    let mut cols = [R::zero(); 3];
    for (c, col) in cols.iter_mut().enumerate() {
        let mut mc = *m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *col = det3(&mc) / det;
    }
    Ok(Vec3::new(cols[0], cols[1], cols[2]))
}

/// Immutable cache of pairwise dots `d_ij`, squared cross norms
/// `s_ij = 1 − d_ij²` and triple products `a^k_ij = ⟨u_k, u_i × u_j⟩`.
///
/// Triple products are stored for `i < j` only; the accessor flips the
/// sign for the opposite ordering, which keeps the antisymmetry exact.
#[derive(Debug, Clone)]
pub struct GeometryCache<R> {
    normals: Vec<UnitVec3<R>>,
    d: Vec<R>,
    s: Vec<R>,
    a: Vec<R>,
    f: usize,
    pairs: usize,
}

impl<R: Real> GeometryCache<R> {
    /// Builds the cache. Expects at least four validated normals.
    pub fn new(normals: Vec<UnitVec3<R>>) -> Self {
        let f = normals.len();
        assert!(f >= 4, "a bounded polyhedron needs at least 4 faces");
        let pairs = f * (f - 1) / 2;

        let mut d = vec![R::zero(); f * f];
        for i in 0..f {
            for j in i..f {
                // Clamp into [−1, 1]: roundoff can push a dot of two unit
                // vectors a few ulp outside, which would make s negative.
                let dot = normals[i].vec().dot(normals[j].vec());
                let dot = dot.min(R::one()).max(-R::one());
                d[i * f + j] = dot;
                d[j * f + i] = dot;
            }
        }

        let mut s = vec![R::zero(); f * f];
        for i in 0..f {
            for j in 0..f {
                let dij = d[i * f + j];
                s[i * f + j] = R::one() - dij * dij;
            }
        }

        let mut a = vec![R::zero(); f * pairs];
        for i in 0..f {
            for j in (i + 1)..f {
                let cross = normals[i].vec().cross(normals[j].vec());
                let p = Self::pair_index(f, i, j);
                for (k, n) in normals.iter().enumerate() {
                    a[k * pairs + p] = n.vec().dot(cross);
                }
            }
        }

        Self {
            normals,
            d,
            s,
            a,
            f,
            pairs,
        }
    }

    fn pair_index(f: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < f);
        i * f - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn face_count(&self) -> usize {
        self.f
    }

    pub fn normals(&self) -> &[UnitVec3<R>] {
        &self.normals
    }

    pub fn normal(&self, i: usize) -> UnitVec3<R> {
        self.normals[i]
    }

    /// `⟨u_i, u_j⟩`.
    pub fn d(&self, i: usize, j: usize) -> R {
        self.d[i * self.f + j]
    }

    /// `‖u_i × u_j‖² = 1 − ⟨u_i, u_j⟩²`.
    pub fn s(&self, i: usize, j: usize) -> R {
        self.s[i * self.f + j]
    }

    /// `a^k_ij = ⟨u_k, u_i × u_j⟩`, antisymmetric in `(i, j)`.
    pub fn a(&self, k: usize, i: usize, j: usize) -> R {
        if i == j {
            return R::zero();
        }
        if i < j {
            self.a[k * self.pairs + Self::pair_index(self.f, i, j)]
        } else {
            -self.a[k * self.pairs + Self::pair_index(self.f, j, i)]
        }
    }

    /// Whether the pair `(i, j)` is antipodal (`⟨u_i,u_j⟩ ≤ −1 + tol`).
    pub fn antipodal(&self, i: usize, j: usize) -> bool {
        self.d(i, j) <= -R::one() + R::ANTIPODAL_TOL
    }
}
