//! Scalar abstraction for the geometry kernel.
//!
//! Everything numeric in this crate is generic over [`Real`], so the same
//! code runs in `f32` or `f64`. The numeric thresholds used by the toolkit
//! are precision-dependent, which is why they live here as associated
//! constants instead of free `const`s: each scalar width pins its own set.

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::AddAssign;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Allowed `|‖u‖ − 1|` for a unit vector after re-normalisation.
    const UNIT_NORM_TOL: Self;
    /// Minimum pairwise distance `‖u_i − u_j‖` for two normals to count as distinct.
    const DISTINCT_TOL: Self;
    /// Minimum `|⟨u_k, u_i × u_j⟩|` for a triple of normals to count as spanning.
    const SPANNING_TOL: Self;
    /// `|⟨u_i, u_j⟩| ≥ 1 − tol` marks a collinear pair during gauge selection.
    const COLLINEAR_DOT_TOL: Self;
    /// Relative closure tolerance: `‖Σ A_i u_i‖ ≤ tol · Σ |A_i|` passes validation.
    const CLOSURE_REL_TOL: Self;
    /// `⟨u_i, u_j⟩ ≤ −1 + tol` marks an antipodal pair.
    const ANTIPODAL_TOL: Self;
    /// `|a^k_ij| ≤ tol` takes the zero-triple-product branch of the edge clipping.
    const TRIPLE_PRODUCT_ZERO_TOL: Self;
    /// Face areas in `[−tol, 0)` are clamped to zero; anything lower is an internal error.
    const AREA_CLAMP_TOL: Self;
    /// `|det| ≤ tol · ‖r₁‖‖r₂‖‖r₃‖` is singular in the 3×3 solver.
    const SINGULAR_REL_TOL: Self;
    /// Base vertex containment tolerance, scaled by `1 + |h_i|` per half-space.
    const VERTEX_CONTAIN_TOL: Self;
    /// Base vertex merge tolerance, scaled by `1 + ‖v‖`.
    const VERTEX_MERGE_TOL: Self;

    /// Converts an `f64` literal into this scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal not representable in this scalar type")
    }

    /// `0.5`, spelled once.
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Real for f64 {
    const UNIT_NORM_TOL: Self = 1e-9;
    const DISTINCT_TOL: Self = 1e-9;
    const SPANNING_TOL: Self = 1e-9;
    const COLLINEAR_DOT_TOL: Self = 1e-9;
    const CLOSURE_REL_TOL: Self = 1e-9;
    const ANTIPODAL_TOL: Self = 1e-12;
    const TRIPLE_PRODUCT_ZERO_TOL: Self = 1e-12;
    const AREA_CLAMP_TOL: Self = 1e-12;
    const SINGULAR_REL_TOL: Self = 1e-12;
    const VERTEX_CONTAIN_TOL: Self = 1e-8;
    const VERTEX_MERGE_TOL: Self = 1e-7;
}

impl Real for f32 {
    const UNIT_NORM_TOL: Self = 1e-5;
    const DISTINCT_TOL: Self = 1e-5;
    const SPANNING_TOL: Self = 1e-5;
    const COLLINEAR_DOT_TOL: Self = 1e-5;
    const CLOSURE_REL_TOL: Self = 1e-4;
    const ANTIPODAL_TOL: Self = 1e-6;
    const TRIPLE_PRODUCT_ZERO_TOL: Self = 1e-6;
    const AREA_CLAMP_TOL: Self = 1e-5;
    const SINGULAR_REL_TOL: Self = 1e-6;
    const VERTEX_CONTAIN_TOL: Self = 1e-4;
    const VERTEX_MERGE_TOL: Self = 1e-3;
}
