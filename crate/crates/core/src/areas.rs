//! Edge lengths and face areas of the support-parametrised polyhedron.
//!
//! For support values `h`, the polyhedron is `P(h) = {x : ⟨u_i, x⟩ ≤ h_i}`.
//! The line `Q_i ∩ Q_j` of two non-parallel face planes is parametrised by
//! `o_ij + λ (u_i × u_j)`; every other half-space `k` clips it through the
//! inequality `a^k_ij λ ≤ b^k_ij`. The surviving interval has length
//! `λ_ij` in parameter units, and the face area follows as the signed
//! triangle sum `A_i = ½ Σ_{j≠i} λ_ij r_ij`.
//!
//! Two degenerate branches matter:
//! * antipodal pairs (`u_j = −u_i`) never form an edge, so `λ_ij = 0`;
//! * a clipping constraint with `a^k_ij = 0` is vacuous when `b^k_ij ≥ 0`
//!   and kills the whole edge when `b^k_ij < 0`. Skipping the second case
//!   silently produces wrong areas, so it is tracked explicitly.

use crate::geom::GeometryCache;
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum AreasError<R: Real> {
    /// Both clipping sign-sets must be populated for a bounded polyhedron;
    /// an empty one means the inputs violate the boundedness hypothesis.
    #[error("edge ({i}, {j}) is unbounded; inputs do not describe a bounded polyhedron")]
    UnboundedEdge { i: usize, j: usize },
    /// The signed triangle sum may dip a hair below zero for a dead face;
    /// anything beyond the clamp tolerance indicates an internal bug.
    #[error("face {face} area {value} is negative beyond the roundoff clamp")]
    NegativeArea { face: usize, value: R },
}

/// Support values `h`, one per face, with a flag marking the gauge form
/// `h_1 = h_2 = h_3 = 0` produced by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportVector<R> {
    values: Vec<R>,
    gauge_fixed: bool,
}

impl<R: Real> SupportVector<R> {
    pub fn new(values: Vec<R>) -> Self {
        debug_assert!(values.iter().all(|h| h.is_finite()));
        Self {
            values,
            gauge_fixed: false,
        }
    }

    /// Builds the gauge form `(0, 0, 0, h̃)` from the free values.
    pub fn from_free(free: &[R]) -> Self {
        debug_assert!(free.iter().all(|h| h.is_finite()));
        let mut values = vec![R::zero(); 3];
        values.extend_from_slice(free);
        Self {
            values,
            gauge_fixed: true,
        }
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> R {
        self.values[i]
    }

    pub fn gauge_fixed(&self) -> bool {
        self.gauge_fixed
    }

    /// The free part `h_4..h_F` of a gauge-fixed vector.
    pub fn free_values(&self) -> &[R] {
        &self.values[3..]
    }
}

/// Clipping result for one ordered pair `(i, j)`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeBounds<R> {
    pub lambda: R,
    /// `λ^min_ij`; −∞ when the negative sign-set was empty (killed edges only).
    pub lambda_min: R,
    /// `λ^max_ij`; +∞ when the positive sign-set was empty (killed edges only).
    pub lambda_max: R,
    /// Index achieving `λ^min_ij`; set only when `λ_ij > 0`.
    pub k_min: Option<usize>,
    /// Index achieving `λ^max_ij`; set only when `λ_ij > 0`.
    pub k_max: Option<usize>,
    /// First `k` with `a^k_ij ≈ 0` and `b^k_ij < 0`, which empties the edge.
    pub killed_by_zero_a: Option<usize>,
}

/// Full per-ordered-pair record of the edge table.
#[derive(Debug, Clone, Copy)]
pub struct PairRecord<R> {
    /// `r_ij = h_j − ⟨u_i, u_j⟩ h_i`.
    pub r: R,
    /// Shared edge parameter length; identical for `(i, j)` and `(j, i)`.
    pub lambda: R,
    pub lambda_min: R,
    pub lambda_max: R,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub killed_by_zero_a: Option<usize>,
    pub antipodal: bool,
}

impl<R: Real> Default for PairRecord<R> {
    fn default() -> Self {
        Self {
            r: R::zero(),
            lambda: R::zero(),
            lambda_min: R::zero(),
            lambda_max: R::zero(),
            k_min: None,
            k_max: None,
            killed_by_zero_a: None,
            antipodal: false,
        }
    }
}

/// Edge data for every ordered pair, plus the support vector it was
/// computed at (the Jacobian checks for staleness against it).
#[derive(Debug, Clone)]
pub struct EdgeTable<R> {
    records: Vec<PairRecord<R>>,
    support: Vec<R>,
    f: usize,
}

impl<R: Real> EdgeTable<R> {
    pub fn face_count(&self) -> usize {
        self.f
    }

    pub fn record(&self, i: usize, j: usize) -> &PairRecord<R> {
        debug_assert!(i != j);
        &self.records[i * self.f + j]
    }

    pub fn lambda(&self, i: usize, j: usize) -> R {
        self.record(i, j).lambda
    }

    pub fn support(&self) -> &[R] {
        &self.support
    }
}

/// Clips the line `Q_i ∩ Q_j` against every other half-space.
///
/// Candidate scans go through `k` in ascending order and only strict
/// improvements replace the incumbent, so exact ties resolve to the
/// smallest index. The kill branch takes precedence over the unbounded
/// check: an edge emptied by a `a^k_ij = 0, b^k_ij < 0` constraint is
/// simply absent, regardless of how the sign-sets look.
pub fn edge_bounds<R: Real>(
    i: usize,
    j: usize,
    h: &SupportVector<R>,
    cache: &GeometryCache<R>,
) -> Result<EdgeBounds<R>, AreasError<R>> {
    debug_assert!(i != j);
    debug_assert!(!cache.antipodal(i, j));
    let f = cache.face_count();
    let eps = R::TRIPLE_PRODUCT_ZERO_TOL;

    let hi = h.get(i);
    let hj = h.get(j);
    let dij = cache.d(i, j);
    let sij = cache.s(i, j);
    let r_ij = hj - dij * hi;
    let r_ji = hi - dij * hj;

    let mut lambda_max = R::infinity();
    let mut lambda_min = R::neg_infinity();
    let mut k_max = None;
    let mut k_min = None;
    let mut killed = None;

    for k in 0..f {
        if k == i || k == j {
            continue;
        }
        let a = cache.a(k, i, j);
        let b = h.get(k) - (r_ij * cache.d(j, k) + r_ji * cache.d(i, k)) / sij;
        if a.abs() <= eps {
            if b < R::zero() && killed.is_none() {
                killed = Some(k);
            }
            continue;
        }
        let q = b / a;
        if a > R::zero() {
            if q < lambda_max {
                lambda_max = q;
                k_max = Some(k);
            }
        } else if q > lambda_min {
            lambda_min = q;
            k_min = Some(k);
        }
    }

    if let Some(k) = killed {
        return Ok(EdgeBounds {
            lambda: R::zero(),
            lambda_min,
            lambda_max,
            k_min: None,
            k_max: None,
            killed_by_zero_a: Some(k),
        });
    }
    if k_max.is_none() || k_min.is_none() {
        return Err(AreasError::UnboundedEdge { i, j });
    }
    let lambda = (lambda_max - lambda_min).max(R::zero());
    let alive = lambda > R::zero();
    Ok(EdgeBounds {
        lambda,
        lambda_min,
        lambda_max,
        k_min: if alive { k_min } else { None },
        k_max: if alive { k_max } else { None },
        killed_by_zero_a: None,
    })
}

/// Builds the full edge table, computing each unordered pair once.
///
/// The `(j, i)` record mirrors `(i, j)` through the exact identities
/// `λ_ji = λ_ij`, `λ^max_ji = −λ^min_ij` and `k_max^ji = k_min^ij`, so
/// the symmetry constraints hold bit-for-bit by construction.
pub fn edge_lengths<R: Real>(
    h: &SupportVector<R>,
    cache: &GeometryCache<R>,
) -> Result<EdgeTable<R>, AreasError<R>> {
    let f = cache.face_count();
    assert_eq!(h.len(), f, "support vector length must match face count");
    let mut records = vec![PairRecord::default(); f * f];

    for i in 0..f {
        for j in (i + 1)..f {
            let hi = h.get(i);
            let hj = h.get(j);
            let dij = cache.d(i, j);
            let r_ij = hj - dij * hi;
            let r_ji = hi - dij * hj;

            let (fwd, bwd) = if cache.antipodal(i, j) {
                let fwd = PairRecord {
                    r: r_ij,
                    antipodal: true,
                    ..PairRecord::default()
                };
                let bwd = PairRecord { r: r_ji, ..fwd };
                (fwd, bwd)
            } else {
                let b = edge_bounds(i, j, h, cache)?;
                let fwd = PairRecord {
                    r: r_ij,
                    lambda: b.lambda,
                    lambda_min: b.lambda_min,
                    lambda_max: b.lambda_max,
                    k_min: b.k_min,
                    k_max: b.k_max,
                    killed_by_zero_a: b.killed_by_zero_a,
                    antipodal: false,
                };
                let bwd = PairRecord {
                    r: r_ji,
                    lambda: b.lambda,
                    lambda_min: -b.lambda_max,
                    lambda_max: -b.lambda_min,
                    k_min: b.k_max,
                    k_max: b.k_min,
                    killed_by_zero_a: b.killed_by_zero_a,
                    antipodal: false,
                };
                (fwd, bwd)
            };
            records[i * f + j] = fwd;
            records[j * f + i] = bwd;
        }
    }

    Ok(EdgeTable {
        records,
        support: h.values().to_vec(),
        f,
    })
}

/// Face areas from an existing edge table: `A_i = ½ Σ_{j≠i} λ_ij r_ij`.
pub fn face_areas_from_table<R: Real>(table: &EdgeTable<R>) -> Result<Vec<R>, AreasError<R>> {
    let f = table.face_count();
    let half = R::half();
    let mut areas = Vec::with_capacity(f);
    for i in 0..f {
        let mut acc = R::zero();
        for j in 0..f {
            if j == i {
                continue;
            }
            let rec = table.record(i, j);
            acc += half * rec.lambda * rec.r;
        }
        if acc < R::zero() {
            if acc >= -R::AREA_CLAMP_TOL {
                acc = R::zero();
            } else {
                return Err(AreasError::NegativeArea {
                    face: i,
                    value: acc,
                });
            }
        }
        areas.push(acc);
    }
    Ok(areas)
}

/// Face areas of `P(h)`.
pub fn face_areas<R: Real>(
    h: &SupportVector<R>,
    cache: &GeometryCache<R>,
) -> Result<Vec<R>, AreasError<R>> {
    let table = edge_lengths(h, cache)?;
    face_areas_from_table(&table)
}

/// Distance of `h` to the nearest non-differentiable point of the edge
/// clipping, measured as the smallest of: the gap between the achieving
/// `b/a` ratio and its runner-up, the interval length `|λ^max − λ^min|`,
/// and `|b^k_ij|` over zero-`a` constraints. Returns +∞ when no pair has
/// a competing candidate.
pub fn kink_margin<R: Real>(h: &SupportVector<R>, cache: &GeometryCache<R>) -> R {
    let f = cache.face_count();
    let eps = R::TRIPLE_PRODUCT_ZERO_TOL;
    let mut margin = R::infinity();

    for i in 0..f {
        for j in (i + 1)..f {
            if cache.antipodal(i, j) {
                continue;
            }
            let hi = h.get(i);
            let hj = h.get(j);
            let dij = cache.d(i, j);
            let sij = cache.s(i, j);
            let r_ij = hj - dij * hi;
            let r_ji = hi - dij * hj;

            let mut best_max = R::infinity();
            let mut second_max = R::infinity();
            let mut best_min = R::neg_infinity();
            let mut second_min = R::neg_infinity();
            for k in 0..f {
                if k == i || k == j {
                    continue;
                }
                let a = cache.a(k, i, j);
                let b = h.get(k) - (r_ij * cache.d(j, k) + r_ji * cache.d(i, k)) / sij;
                if a.abs() <= eps {
                    margin = margin.min(b.abs());
                    continue;
                }
                let q = b / a;
                if a > R::zero() {
                    if q < best_max {
                        second_max = best_max;
                        best_max = q;
                    } else {
                        second_max = second_max.min(q);
                    }
                } else if q > best_min {
                    second_min = best_min;
                    best_min = q;
                } else {
                    second_min = second_min.max(q);
                }
            }
            if second_max.is_finite() && best_max.is_finite() {
                margin = margin.min(second_max - best_max);
            }
            if second_min.is_finite() && best_min.is_finite() {
                margin = margin.min(best_min - second_min);
            }
            if best_max.is_finite() && best_min.is_finite() {
                margin = margin.min((best_max - best_min).abs());
            }
        }
    }
    margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::UnitVec3;

    fn unit(x: f64, y: f64, z: f64) -> UnitVec3<f64> {
        UnitVec3::from_components(x, y, z).unwrap()
    }

    /// (+x, +y, +z, −x, −y, −z): the gauge-ordered cube.
    fn cube_cache() -> GeometryCache<f64> {
        GeometryCache::new(vec![
            unit(1.0, 0.0, 0.0),
            unit(0.0, 1.0, 0.0),
            unit(0.0, 0.0, 1.0),
            unit(-1.0, 0.0, 0.0),
            unit(0.0, -1.0, 0.0),
            unit(0.0, 0.0, -1.0),
        ])
    }

    fn cube_h() -> SupportVector<f64> {
        SupportVector::from_free(&[1.0, 1.0, 1.0])
    }

    /// Cube plus the oblique normal (√2/2, √2/2, 0).
    fn seven_cache() -> GeometryCache<f64> {
        let r = std::f64::consts::SQRT_2 / 2.0;
        GeometryCache::new(vec![
            unit(1.0, 0.0, 0.0),
            unit(0.0, 1.0, 0.0),
            unit(0.0, 0.0, 1.0),
            unit(-1.0, 0.0, 0.0),
            unit(0.0, -1.0, 0.0),
            unit(0.0, 0.0, -1.0),
            unit(r, r, 0.0),
        ])
    }

    #[test]
    fn cube_edge_bounds_for_adjacent_pair() {
        let cache = cube_cache();
        let h = cube_h();
        // Pair (+x, +y): the +z plane caps λ at 0, the −z plane at −1.
        let b = edge_bounds(0, 1, &h, &cache).unwrap();
        assert_eq!(b.lambda_max, 0.0);
        assert_eq!(b.k_max, Some(2));
        assert_eq!(b.lambda_min, -1.0);
        assert_eq!(b.k_min, Some(5));
        assert_eq!(b.lambda, 1.0);
        // The parallel −x plane has a = 0, b = 1 ≥ 0: vacuous, no kill.
        assert_eq!(b.killed_by_zero_a, None);
    }

    #[test]
    fn cube_edge_table_and_lengths() {
        let cache = cube_cache();
        let table = edge_lengths(&cube_h(), &cache).unwrap();
        let mut edges = 0;
        for i in 0..6 {
            for j in (i + 1)..6 {
                let lam = table.lambda(i, j);
                assert_eq!(lam, table.lambda(j, i));
                if cache.antipodal(i, j) {
                    assert_eq!(lam, 0.0);
                    assert!(table.record(i, j).antipodal);
                } else {
                    // Unit cube: every geometric edge has length λ‖u×u‖ = 1.
                    assert_eq!(lam, 1.0);
                    edges += 1;
                }
            }
        }
        assert_eq!(edges, 12);
    }

    #[test]
    fn mirrored_records_are_consistent() {
        let cache = seven_cache();
        let h = SupportVector::new(vec![0.3, 0.1, 0.4, 1.0, 0.9, 1.1, 0.8]);
        let table = edge_lengths(&h, &cache).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                if i == j {
                    continue;
                }
                let fwd = table.record(i, j);
                let bwd = table.record(j, i);
                assert_eq!(fwd.lambda, bwd.lambda);
                if let (Some(km), Some(km2)) = (fwd.k_max, bwd.k_min) {
                    assert_eq!(km, km2);
                }
            }
        }
    }

    #[test]
    fn cube_face_areas_are_unit() {
        let cache = cube_cache();
        let areas = face_areas(&cube_h(), &cache).unwrap();
        for a in areas {
            assert!((a - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn antipodal_pair_has_zero_lambda() {
        let cache = cube_cache();
        let table = edge_lengths(&cube_h(), &cache).unwrap();
        assert_eq!(table.lambda(0, 3), 0.0);
        assert!(table.record(0, 3).antipodal);
    }

    #[test]
    fn oblique_face_dies_above_threshold() {
        // A_7 = 0 whenever h_7 ≥ (√2/2)(h_1 + h_2); here the threshold is 0.
        let cache = seven_cache();
        let h = SupportVector::from_free(&[1.0, 1.0, 1.0, 0.5]);
        let areas = face_areas(&h, &cache).unwrap();
        assert_eq!(areas[6], 0.0);
        for a in &areas[..6] {
            assert!((a - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_a_negative_b_kills_the_edge() {
        // Non-gauge h so the killed edge actually moves the areas: plane 7
        // has a^7_12 = 0 and b^7_12 = h_7 − √2/2·(r_12 + r_21) < 0.
        let cache = seven_cache();
        let h = SupportVector::new(vec![0.3, 0.3, 1.0, 1.0, 1.0, 1.0, 0.2]);
        let b = edge_bounds(0, 1, &h, &cache).unwrap();
        assert_eq!(b.killed_by_zero_a, Some(6));
        assert_eq!(b.lambda, 0.0);
        assert_eq!(b.k_min, None);
        assert_eq!(b.k_max, None);
    }

    #[test]
    fn unbounded_edge_is_detected() {
        // All normals in the upper half-space: the polyhedron recedes
        // downward and the (u_2, u_4) line is clipped from one side only.
        let n = (1.0f64 + 0.04).sqrt();
        let cache = GeometryCache::new(vec![
            unit(0.0, 0.0, 1.0),
            unit(1.0 / n, 0.0, 0.2 / n),
            unit(-1.0 / n, 0.0, 0.2 / n),
            unit(0.0, 1.0 / n, 0.2 / n),
            unit(0.0, -1.0 / n, 0.2 / n),
        ]);
        let h = SupportVector::new(vec![1.0; 5]);
        let err = face_areas(&h, &cache).unwrap_err();
        assert!(matches!(err, AreasError::UnboundedEdge { .. }));
    }

    #[test]
    fn kink_margin_detects_ties() {
        let cache = cube_cache();
        // Interior point: every achieving ratio is separated from its rival.
        let margin = kink_margin(&cube_h(), &cache);
        assert!(margin > 0.1, "margin = {margin}");

        // With the oblique plane exactly through the cube edge, b = 0 at a
        // zero-a constraint: the margin collapses.
        let seven = seven_cache();
        let h = SupportVector::from_free(&[1.0, 1.0, 1.0, 0.0]);
        let margin = kink_margin(&h, &seven);
        assert!(margin <= 1e-12, "margin = {margin}");
    }
}
