//! Analytic Jacobian of the gauge-reduced area residual.
//!
//! With the first three support values pinned to zero, the residual
//! `g̃(h̃) = A(0, 0, 0, h̃) − A⁰` maps `R^{F−3} → R^F` and has a unique
//! root. Its Jacobian follows from differentiating the triangle sum
//! `A_i = ½ Σ λ_ij r_ij`: the `r` part is linear in `h`, and the `λ` part
//! only moves through the two clipping constraints that achieve the
//! interval bounds, which the edge table already identified. Dead pairs
//! (`λ_ij = 0`) contribute nothing, so rows of fully dead faces vanish.

use crate::areas::{face_areas_from_table, AreasError, EdgeTable, SupportVector};
use crate::geom::GeometryCache;
use crate::instance::ProblemInstance;
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum JacobianError {
    /// The edge table was computed at a different support vector.
    #[error("edge table is stale: it was built for a different support vector")]
    StaleTable,
}

/// Dense `F × (F−3)` Jacobian; column `β − 3` holds `∂A_i/∂h_β` for the
/// free support indices `β ∈ {3, …, F−1}` (zero-based gauge order).
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix<R> {
    data: Vec<R>,
    rows: usize,
    cols: usize,
}

impl<R: Real> JacobianMatrix<R> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![R::zero(); rows * cols],
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> R {
        self.data[row * self.cols + col]
    }

    fn add(&mut self, row: usize, col: usize, value: R) {
        self.data[row * self.cols + col] += value;
    }

    pub fn row(&self, row: usize) -> &[R] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

/// `N^k_ij = (⟨u_i,u_j⟩⟨u_k,u_j⟩ − ⟨u_k,u_i⟩) / ‖u_i × u_j‖²`, the
/// coefficient of `h_i` in `b^k_ij`. Undefined for antipodal pairs, which
/// the caller excludes (their `λ` is zero).
fn n_coeff<R: Real>(cache: &GeometryCache<R>, k: usize, i: usize, j: usize) -> R {
    (cache.d(i, j) * cache.d(k, j) - cache.d(k, i)) / cache.s(i, j)
}

/// `c_ij`: derivative of `λ_ij` with respect to `h_i`, nonzero only while
/// the edge is alive. Uses the achieving indices recorded in the table.
fn c_coeff<R: Real>(
    cache: &GeometryCache<R>,
    k_max: Option<usize>,
    k_min: Option<usize>,
    i: usize,
    j: usize,
) -> R {
    match (k_max, k_min) {
        (Some(kmax), Some(kmin)) => {
            n_coeff(cache, kmax, i, j) / cache.a(kmax, i, j)
                - n_coeff(cache, kmin, i, j) / cache.a(kmin, i, j)
        }
        _ => R::zero(),
    }
}

/// Assembles the Jacobian from an edge table computed at the same `h`.
///
/// Each ordered pair `(i, j)` touches at most four columns of row `i`:
/// the diagonal-like `β = i` and `β = j` terms, and the two achieving
/// indices through `y^β_ij = ±1/a^β_ij`.
pub fn jacobian<R: Real>(
    h: &SupportVector<R>,
    table: &EdgeTable<R>,
    cache: &GeometryCache<R>,
) -> Result<JacobianMatrix<R>, JacobianError> {
    debug_assert!(h.gauge_fixed(), "jacobian expects a gauge-fixed support");
    if table.support() != h.values() {
        return Err(JacobianError::StaleTable);
    }
    let f = cache.face_count();
    let half = R::half();
    let mut jac = JacobianMatrix::zeros(f, f - 3);

    for i in 0..f {
        for j in 0..f {
            if j == i {
                continue;
            }
            let rec = table.record(i, j);
            if rec.lambda <= R::zero() {
                continue;
            }
            let r_ij = rec.r;
            let lambda = rec.lambda;

            if i >= 3 {
                let c_ij = c_coeff(cache, rec.k_max, rec.k_min, i, j);
                jac.add(i, i - 3, half * (c_ij * r_ij - cache.d(i, j) * lambda));
            }
            if j >= 3 {
                // The mirrored record carries k_max^{ji} = k_min^{ij}.
                let rev = table.record(j, i);
                let c_ji = c_coeff(cache, rev.k_max, rev.k_min, j, i);
                jac.add(i, j - 3, half * (c_ji * r_ij + lambda));
            }
            if let Some(kmax) = rec.k_max {
                if kmax >= 3 {
                    jac.add(i, kmax - 3, half * r_ij / cache.a(kmax, i, j));
                }
            }
            if let Some(kmin) = rec.k_min {
                if kmin >= 3 {
                    jac.add(i, kmin - 3, -half * r_ij / cache.a(kmin, i, j));
                }
            }
        }
    }
    Ok(jac)
}

/// Gauge-reduced residual `g̃(h̃) = A(0, 0, 0, h̃) − A⁰`.
pub fn residual<R: Real>(
    free: &[R],
    instance: &ProblemInstance<R>,
    cache: &GeometryCache<R>,
) -> Result<Vec<R>, AreasError<R>> {
    assert_eq!(free.len(), instance.face_count() - 3);
    let h = SupportVector::from_free(free);
    let table = crate::areas::edge_lengths(&h, cache)?;
    let areas = face_areas_from_table(&table)?;
    Ok(areas
        .iter()
        .zip(instance.target_areas())
        .map(|(&a, &a0)| a - a0)
        .collect())
}
