//! Input validation, gauge ordering and random test-instance generation.
//!
//! Minkowski's theorem guarantees a bounded convex polyhedron with the
//! given outward face normals and face areas exactly when the normals are
//! distinct, span `R³`, the areas are positive and the closure constraint
//! `Σ A_i u_i = 0` holds. Those hypotheses become validation checks here.
//! Gauge ordering moves a spanning triple of normals to the front so the
//! solver can pin the corresponding three support values to zero.

use crate::geom::{GeomError, UnitVec3, Vec3};
use crate::real::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError<R: Real> {
    #[error("normals and areas have different lengths ({normals} vs {areas})")]
    LengthMismatch { normals: usize, areas: usize },
    #[error("need at least {minimum} faces, got {actual}")]
    TooFewFaces { minimum: usize, actual: usize },
    #[error("instance fails validation:\n{0}")]
    Invalid(ValidationReport<R>),
    #[error("no spanning triple of normals found")]
    NoSpanningTriple,
    #[error("random generation failed after {attempts} attempts (seed {seed})")]
    GenerationFailed { seed: u64, attempts: usize },
    #[error("normal {index} is not usable: {source}")]
    BadNormal { index: usize, source: GeomError },
    #[error("value {what} is not finite")]
    NonFinite { what: &'static str },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Normals with their matching areas, the raw form of an instance.
pub type NormalsAreas<R> = (Vec<UnitVec3<R>>, Vec<R>);

/// Outcome of a single validation check.
#[derive(Debug, Clone, Copy)]
pub struct CheckOutcome<R> {
    pub passed: bool,
    /// The measured quantity the check looked at (defect or margin).
    pub measured: R,
    /// The threshold it was compared against.
    pub threshold: R,
}

/// Per-hypothesis validation results with measured defect magnitudes.
#[derive(Debug, Clone, Copy)]
pub struct ValidationReport<R> {
    /// Max `|‖u_i‖ − 1|`; passes when at or below the unit-norm tolerance.
    pub unit_norm: CheckOutcome<R>,
    /// Min pairwise `‖u_i − u_j‖`; passes when above the distinctness threshold.
    pub distinctness: CheckOutcome<R>,
    /// Best `|⟨u_i, u_j × u_k⟩|` over all triples; passes when above the spanning threshold.
    pub spanning: CheckOutcome<R>,
    /// Min target area; passes when strictly positive.
    pub positivity: CheckOutcome<R>,
    /// `‖Σ A_i u_i‖`; passes when at or below the relative closure tolerance.
    pub closure: CheckOutcome<R>,
}

impl<R: Real> ValidationReport<R> {
    pub fn passed(&self) -> bool {
        self.unit_norm.passed
            && self.distinctness.passed
            && self.spanning.passed
            && self.positivity.passed
            && self.closure.passed
    }
}

impl<R: Real> fmt::Display for ValidationReport<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |f: &mut fmt::Formatter<'_>, name: &str, c: &CheckOutcome<R>| {
            writeln!(
                f,
                "check_{name}={} measured={:e} threshold={:e}",
                if c.passed { "pass" } else { "fail" },
                c.measured,
                c.threshold
            )
        };
        line(f, "unit_norm", &self.unit_norm)?;
        line(f, "distinctness", &self.distinctness)?;
        line(f, "spanning", &self.spanning)?;
        line(f, "positivity", &self.positivity)?;
        line(f, "closure", &self.closure)?;
        write!(f, "valid={}", self.passed())
    }
}

/// A validated, gauge-ordered problem: the first three normals span `R³`.
///
/// `permutation[g]` is the position of gauge-slot `g` in the caller's
/// original input order, so gauge-ordered results can be mapped back.
#[derive(Debug, Clone)]
pub struct ProblemInstance<R> {
    normals: Vec<UnitVec3<R>>,
    target_areas: Vec<R>,
    permutation: Vec<usize>,
}

impl<R: Real> ProblemInstance<R> {
    pub fn face_count(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[UnitVec3<R>] {
        &self.normals
    }

    pub fn target_areas(&self) -> &[R] {
        &self.target_areas
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Maps a gauge-ordered slice back into the original input order.
    pub fn to_user_order<T: Copy>(&self, gauge_values: &[T]) -> Vec<T> {
        assert_eq!(gauge_values.len(), self.permutation.len());
        let mut out = gauge_values.to_vec();
        for (g, &orig) in self.permutation.iter().enumerate() {
            out[orig] = gauge_values[g];
        }
        out
    }

    pub fn mean_target_area(&self) -> R {
        let sum = self.target_areas.iter().fold(R::zero(), |acc, &a| acc + a);
        sum / R::from_usize(self.face_count()).unwrap()
    }
}

/// Checks the hypotheses of Minkowski's theorem and reports each defect.
pub fn validate<R: Real>(
    normals: &[UnitVec3<R>],
    areas: &[R],
) -> Result<ValidationReport<R>, InstanceError<R>> {
    if normals.len() != areas.len() {
        return Err(InstanceError::LengthMismatch {
            normals: normals.len(),
            areas: areas.len(),
        });
    }
    let f = normals.len();
    if f < 4 {
        return Err(InstanceError::TooFewFaces {
            minimum: 4,
            actual: f,
        });
    }

    let mut worst_norm = R::zero();
    for u in normals {
        worst_norm = worst_norm.max((u.vec().norm() - R::one()).abs());
    }
    let unit_norm = CheckOutcome {
        passed: worst_norm <= R::UNIT_NORM_TOL,
        measured: worst_norm,
        threshold: R::UNIT_NORM_TOL,
    };

    let mut min_dist = R::infinity();
    for i in 0..f {
        for j in (i + 1)..f {
            min_dist = min_dist.min((normals[i].vec() - normals[j].vec()).norm());
        }
    }
    let distinctness = CheckOutcome {
        passed: min_dist > R::DISTINCT_TOL,
        measured: min_dist,
        threshold: R::DISTINCT_TOL,
    };

    let mut best_triple = R::zero();
    for i in 0..f {
        for j in (i + 1)..f {
            let cross = normals[i].vec().cross(normals[j].vec());
            for u in &normals[j + 1..] {
                best_triple = best_triple.max(u.vec().dot(cross).abs());
            }
        }
    }
    let spanning = CheckOutcome {
        passed: best_triple > R::SPANNING_TOL,
        measured: best_triple,
        threshold: R::SPANNING_TOL,
    };

    let min_area = areas.iter().fold(R::infinity(), |acc, &a| acc.min(a));
    let positivity = CheckOutcome {
        passed: min_area > R::zero(),
        measured: min_area,
        threshold: R::zero(),
    };

    let mut weighted = Vec3::zero();
    let mut area_scale = R::zero();
    for (u, &a) in normals.iter().zip(areas) {
        weighted = weighted + u.vec() * a;
        area_scale += a.abs();
    }
    let defect = weighted.norm();
    let closure = CheckOutcome {
        passed: defect <= R::CLOSURE_REL_TOL * area_scale,
        measured: defect,
        threshold: R::CLOSURE_REL_TOL * area_scale,
    };

    Ok(ValidationReport {
        unit_norm,
        distinctness,
        spanning,
        positivity,
        closure,
    })
}

/// Validates and reorders the input so the first three normals span `R³`.
///
/// The scan fixes the first normal, then picks the second normal least
/// collinear with it and the third with the largest triple product,
/// breaking ties towards the smaller index. Everything downstream (the
/// Gram system of the initial guess in particular) conditions on this
/// triple, so the most orthogonal choice is worth the extra comparisons.
pub fn gauge_order<R: Real>(
    normals: &[UnitVec3<R>],
    areas: &[R],
) -> Result<ProblemInstance<R>, InstanceError<R>> {
    let report = validate(normals, areas)?;
    if !report.passed() {
        return Err(InstanceError::Invalid(report));
    }
    let f = normals.len();

    let i1 = 0usize;
    let mut i2 = None;
    let mut best_dot = R::one() - R::COLLINEAR_DOT_TOL;
    for j in 1..f {
        let dot = normals[i1].vec().dot(normals[j].vec()).abs();
        if dot < best_dot {
            best_dot = dot;
            i2 = Some(j);
        }
    }
    let i2 = i2.ok_or(InstanceError::NoSpanningTriple)?;

    let cross = normals[i1].vec().cross(normals[i2].vec());
    let mut i3 = None;
    let mut best_triple = R::SPANNING_TOL;
    for (k, u) in normals.iter().enumerate().skip(1) {
        if k == i2 {
            continue;
        }
        let triple = u.vec().dot(cross).abs();
        if triple > best_triple {
            best_triple = triple;
            i3 = Some(k);
        }
    }
    let i3 = i3.ok_or(InstanceError::NoSpanningTriple)?;

    let mut permutation = Vec::with_capacity(f);
    permutation.extend_from_slice(&[i1, i2, i3]);
    permutation.extend((0..f).filter(|&i| i != i1 && i != i2 && i != i3));

    let ordered_normals = permutation.iter().map(|&i| normals[i]).collect();
    let ordered_areas = permutation.iter().map(|&i| areas[i]).collect();
    Ok(ProblemInstance {
        normals: ordered_normals,
        target_areas: ordered_areas,
        permutation,
    })
}

fn sample_unit_sphere(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // Normalised Gaussian draws: rotation invariant and rejection-free.
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        let n = (x * x + y * y + z * z).sqrt();
        if n > 1e-12 {
            return [x / n, y / n, z / n];
        }
    }
}

const GENERATION_RETRIES: usize = 64;

/// Generates a random instance that satisfies the closure constraint.
///
/// `faces − 1` normals are drawn uniformly on the sphere and `faces − 1`
/// areas uniformly on `(0, 1]`; the last normal and area cancel the
/// weighted sum exactly. Degenerate draws (near-zero residual vector or a
/// duplicate closing normal) advance the stream and retry.
pub fn generate_random<R: Real>(faces: usize, seed: u64) -> Result<NormalsAreas<R>, InstanceError<R>> {
    if faces < 5 {
        return Err(InstanceError::TooFewFaces {
            minimum: 5,
            actual: faces,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..GENERATION_RETRIES {
        let mut normals64 = Vec::with_capacity(faces);
        let mut areas64 = Vec::with_capacity(faces);
        for _ in 0..faces - 1 {
            normals64.push(sample_unit_sphere(&mut rng));
        }
        for _ in 0..faces - 1 {
            // gen() is in [0, 1); flip to (0, 1].
            areas64.push(1.0 - rng.gen::<f64>());
        }

        let mut v = [0.0f64; 3];
        for (u, a) in normals64.iter().zip(&areas64) {
            v[0] += a * u[0];
            v[1] += a * u[1];
            v[2] += a * u[2];
        }
        let vnorm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if vnorm < 1e-6 {
            continue;
        }
        let closing = [-v[0] / vnorm, -v[1] / vnorm, -v[2] / vnorm];
        let duplicate = normals64.iter().any(|u| {
            let dx = u[0] - closing[0];
            let dy = u[1] - closing[1];
            let dz = u[2] - closing[2];
            (dx * dx + dy * dy + dz * dz).sqrt() <= 1e-9
        });
        if duplicate {
            continue;
        }
        normals64.push(closing);
        areas64.push(vnorm);

        let normals: Result<Vec<UnitVec3<R>>, _> = normals64
            .iter()
            .map(|&[x, y, z]| UnitVec3::from_components(R::lit(x), R::lit(y), R::lit(z)))
            .collect();
        let Ok(normals) = normals else { continue };
        let areas: Vec<R> = areas64.iter().map(|&a| R::lit(a)).collect();

        match validate(&normals, &areas) {
            Ok(report) if report.passed() => return Ok((normals, areas)),
            _ => continue,
        }
    }
    Err(InstanceError::GenerationFailed {
        seed,
        attempts: GENERATION_RETRIES,
    })
}

/// On-disk instance format: `{"normals": [[x,y,z],...], "areas": [...]}`.
///
/// The reader re-normalises the normals before any validation, so files
/// produced with lower-precision tooling are accepted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceJson {
    pub normals: Vec<[f64; 3]>,
    pub areas: Vec<f64>,
}

impl InstanceJson {
    pub fn read_file<R: Real>(path: &Path) -> Result<Self, InstanceError<R>> {
        let file = std::fs::File::open(path)?;
        let doc = serde_json::from_reader(std::io::BufReader::new(file))?;
        Ok(doc)
    }

    pub fn write_file<R: Real>(&self, path: &Path) -> Result<(), InstanceError<R>> {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut writer, self)?;
        use std::io::Write;
        writeln!(writer)?;
        Ok(())
    }

    pub fn from_parts<R: Real>(normals: &[UnitVec3<R>], areas: &[R]) -> Self {
        Self {
            normals: normals
                .iter()
                .map(|u| {
                    let v = u.vec();
                    [
                        v.x.to_f64().unwrap(),
                        v.y.to_f64().unwrap(),
                        v.z.to_f64().unwrap(),
                    ]
                })
                .collect(),
            areas: areas.iter().map(|a| a.to_f64().unwrap()).collect(),
        }
    }

    /// Re-normalises and converts into typed normals and areas.
    pub fn into_parts<R: Real>(self) -> Result<NormalsAreas<R>, InstanceError<R>> {
        let mut normals = Vec::with_capacity(self.normals.len());
        for (index, &[x, y, z]) in self.normals.iter().enumerate() {
            let u = UnitVec3::from_components(R::lit(x), R::lit(y), R::lit(z))
                .map_err(|source| InstanceError::BadNormal { index, source })?;
            normals.push(u);
        }
        let mut areas = Vec::with_capacity(self.areas.len());
        for &a in &self.areas {
            if !a.is_finite() {
                return Err(InstanceError::NonFinite { what: "area" });
            }
            areas.push(R::lit(a));
        }
        Ok((normals, areas))
    }
}
