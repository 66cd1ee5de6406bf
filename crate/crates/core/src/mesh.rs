//! Explicit vertex/edge/face extraction and mesh export.
//!
//! Vertices come from brute-force enumeration: every triple of face
//! planes with independent normals is solved and the intersection kept if
//! it satisfies all half-space constraints. The face polygons are then
//! incident vertices sorted angularly in the face plane. Deliberately
//! simple — this module doubles as the independent oracle for the edge
//! based area computation, so it must be more obviously correct than the
//! thing it checks. It never calls into the `areas` module.

use crate::areas::SupportVector;
use crate::geom::{solve3x3, UnitVec3, Vec3};
use crate::real::Real;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    /// The intersection is lower-dimensional or a face degenerated.
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Reconstructed polyhedron in the caller's original face order.
///
/// Face cycles are counterclockwise as seen from outside along the face
/// normal; dead faces keep an empty cycle and zero area.
#[derive(Debug, Clone)]
pub struct PolyMesh<R> {
    pub vertices: Vec<Vec3<R>>,
    pub faces: Vec<Vec<usize>>,
    pub face_normals: Vec<UnitVec3<R>>,
    pub support: Vec<R>,
    pub face_areas: Vec<R>,
}

impl<R: Real> PolyMesh<R> {
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// `V − E + F` over non-empty cycles, with `E` as half the total
    /// cycle length; equals 2 for a non-degenerate closed surface.
    pub fn euler_characteristic(&self) -> i64 {
        let v = self.vertices.len() as i64;
        let cycle_total: usize = self.faces.iter().map(|c| c.len()).sum();
        let e = (cycle_total / 2) as i64;
        let f = self.faces.iter().filter(|c| !c.is_empty()).count() as i64;
        v - e + f
    }
}

/// Enumerates the vertices of `P(h)` with their incident face sets.
///
/// Points closer than the merge tolerance collapse into the first
/// discovered representative, and their incidence sets are unioned, so
/// corners where more than three planes meet stay consistent.
pub fn enumerate_vertices<R: Real>(
    normals: &[UnitVec3<R>],
    h: &SupportVector<R>,
) -> Vec<(Vec3<R>, BTreeSet<usize>)> {
    let f = normals.len();
    assert_eq!(h.len(), f);
    let mut found: Vec<(Vec3<R>, BTreeSet<usize>)> = Vec::new();

    for i in 0..f {
        for j in (i + 1)..f {
            for k in (j + 1)..f {
                let m = [
                    normals[i].vec().to_array(),
                    normals[j].vec().to_array(),
                    normals[k].vec().to_array(),
                ];
                let rhs = Vec3::new(h.get(i), h.get(j), h.get(k));
                let Ok(v) = solve3x3(&m, rhs) else { continue };
                if !v.is_finite() {
                    continue;
                }

                let inside = (0..f).all(|q| {
                    let slack = h.get(q) - normals[q].vec().dot(v);
                    slack >= -R::VERTEX_CONTAIN_TOL * (R::one() + h.get(q).abs())
                });
                if !inside {
                    continue;
                }

                let merge_into = found.iter_mut().find(|(w, _)| {
                    (*w - v).norm() <= R::VERTEX_MERGE_TOL * (R::one() + w.norm())
                });
                match merge_into {
                    Some((_, set)) => {
                        set.insert(i);
                        set.insert(j);
                        set.insert(k);
                    }
                    None => {
                        found.push((v, BTreeSet::from([i, j, k])));
                    }
                }
            }
        }
    }
    found
}

/// In-plane orthonormal basis `(e1, e2)` with `e1 × e2 = u`, seeded from
/// the coordinate axis least aligned with `u`.
fn plane_basis<R: Real>(u: Vec3<R>) -> (Vec3<R>, Vec3<R>) {
    let ax = u.x.abs();
    let ay = u.y.abs();
    let az = u.z.abs();
    let seed = if ax <= ay && ax <= az {
        Vec3::new(R::one(), R::zero(), R::zero())
    } else if ay <= az {
        Vec3::new(R::zero(), R::one(), R::zero())
    } else {
        Vec3::new(R::zero(), R::zero(), R::one())
    };
    let e1_raw = seed - u * seed.dot(u);
    let e1 = e1_raw * (R::one() / e1_raw.norm());
    let e2 = u.cross(e1);
    (e1, e2)
}

/// Signed polygon area of an ordered cycle with respect to the normal.
fn polygon_area<R: Real>(vertices: &[Vec3<R>], cycle: &[usize], normal: Vec3<R>) -> R {
    if cycle.len() < 3 {
        return R::zero();
    }
    let mut sum = Vec3::zero();
    for t in 0..cycle.len() {
        let a = vertices[cycle[t]];
        let b = vertices[cycle[(t + 1) % cycle.len()]];
        sum = sum + a.cross(b);
    }
    R::half() * sum.dot(normal)
}

fn max_norm<R: Real>(vertices: &[Vec3<R>]) -> R {
    vertices.iter().fold(R::zero(), |acc, v| acc.max(v.norm()))
}

/// Builds the mesh for gauge-ordered inputs and maps the faces back to
/// the caller's order through `permutation` (`permutation[g]` is the
/// original position of gauge slot `g`; pass the identity when the
/// inputs are not gauge-ordered).
pub fn build_mesh<R: Real>(
    normals: &[UnitVec3<R>],
    h: &SupportVector<R>,
    permutation: &[usize],
) -> Result<PolyMesh<R>, MeshError> {
    let f = normals.len();
    assert_eq!(permutation.len(), f);
    let found = enumerate_vertices(normals, h);
    if found.len() < 4 {
        return Err(MeshError::DegenerateMesh(format!(
            "only {} vertices; the intersection is lower-dimensional",
            found.len()
        )));
    }

    let vertices: Vec<Vec3<R>> = found.iter().map(|(v, _)| *v).collect();
    let scale = R::one() + max_norm(&vertices);
    let flat_tol = R::VERTEX_MERGE_TOL * scale;

    // Rank probe: farthest point, farthest from that line, farthest from
    // that plane. A vanishing third extent means a flat solid.
    let v0 = vertices[0];
    let (mut far, mut d1) = (v0, R::zero());
    for &v in &vertices {
        let d = (v - v0).norm();
        if d > d1 {
            d1 = d;
            far = v;
        }
    }
    if d1 <= flat_tol {
        return Err(MeshError::DegenerateMesh("all vertices coincide".into()));
    }
    let axis = (far - v0) * (R::one() / d1);
    let (mut d2, mut off) = (R::zero(), Vec3::zero());
    for &v in &vertices {
        let w = v - v0;
        let perp = w - axis * w.dot(axis);
        let d = perp.norm();
        if d > d2 {
            d2 = d;
            off = perp;
        }
    }
    if d2 <= flat_tol {
        return Err(MeshError::DegenerateMesh("all vertices collinear".into()));
    }
    let plane_n = axis.cross(off * (R::one() / d2));
    let d3 = vertices.iter().fold(R::zero(), |acc, &v| {
        acc.max((v - v0).dot(plane_n).abs())
    });
    if d3 <= flat_tol {
        return Err(MeshError::DegenerateMesh("all vertices coplanar".into()));
    }

    let mut faces_gauge: Vec<Vec<usize>> = Vec::with_capacity(f);
    let mut areas_gauge: Vec<R> = Vec::with_capacity(f);
    for (g, face_normal) in normals.iter().enumerate() {
        let incident: Vec<usize> = found
            .iter()
            .enumerate()
            .filter(|(_, (_, set))| set.contains(&g))
            .map(|(idx, _)| idx)
            .collect();
        if incident.len() < 3 {
            faces_gauge.push(Vec::new());
            areas_gauge.push(R::zero());
            continue;
        }

        // Collinearity guard: max distance from the widest chord.
        let (mut pa, mut pb, mut best) = (incident[0], incident[0], R::zero());
        for (ai, &a) in incident.iter().enumerate() {
            for &b in &incident[ai + 1..] {
                let d = (vertices[a] - vertices[b]).norm();
                if d > best {
                    best = d;
                    pa = a;
                    pb = b;
                }
            }
        }
        let chord = vertices[pb] - vertices[pa];
        let chord_dir = chord * (R::one() / chord.norm());
        let line_dev = incident.iter().fold(R::zero(), |acc, &idx| {
            let w = vertices[idx] - vertices[pa];
            acc.max((w - chord_dir * w.dot(chord_dir)).norm())
        });
        if line_dev <= flat_tol {
            return Err(MeshError::DegenerateMesh(format!(
                "face {g} has {} collinear vertices",
                incident.len()
            )));
        }

        let u = face_normal.vec();
        let (e1, e2) = plane_basis(u);
        let mut centroid = Vec3::zero();
        for &idx in &incident {
            centroid = centroid + vertices[idx];
        }
        centroid = centroid * (R::one() / R::from_usize(incident.len()).unwrap());

        let mut order: Vec<(R, usize)> = incident
            .iter()
            .map(|&idx| {
                let w = vertices[idx] - centroid;
                (w.dot(e2).atan2(w.dot(e1)), idx)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut cycle: Vec<usize> = order.into_iter().map(|(_, idx)| idx).collect();

        // Canonical start for reproducible output.
        let start = cycle
            .iter()
            .enumerate()
            .min_by_key(|(_, &idx)| idx)
            .map(|(pos, _)| pos)
            .unwrap();
        cycle.rotate_left(start);

        let area = polygon_area(&vertices, &cycle, u);
        faces_gauge.push(cycle);
        areas_gauge.push(area);
    }

    // Un-permute back to the caller's face order.
    let mut faces = vec![Vec::new(); f];
    let mut face_normals = vec![normals[0]; f];
    let mut support = vec![R::zero(); f];
    let mut face_areas = vec![R::zero(); f];
    for g in 0..f {
        let orig = permutation[g];
        faces[orig] = std::mem::take(&mut faces_gauge[g]);
        face_normals[orig] = normals[g];
        support[orig] = h.get(g);
        face_areas[orig] = areas_gauge[g];
    }

    Ok(PolyMesh {
        vertices,
        faces,
        face_normals,
        support,
        face_areas,
    })
}

/// Identity permutation helper for non-gauge-ordered inputs.
pub fn identity_permutation(f: usize) -> Vec<usize> {
    (0..f).collect()
}

/// Recomputes every face area from the polygon cycles (shoelace sum).
pub fn mesh_face_areas<R: Real>(mesh: &PolyMesh<R>) -> Vec<R> {
    mesh.faces
        .iter()
        .zip(&mesh.face_normals)
        .map(|(cycle, u)| polygon_area(&mesh.vertices, cycle, u.vec()))
        .collect()
}

/// Solver metadata embedded in exported mesh documents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolverMeta {
    pub iterations: usize,
    pub residual: f64,
    pub status: String,
}

/// On-disk mesh document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshDocument {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
    pub normals: Vec<[f64; 3]>,
    pub areas: Vec<f64>,
    pub support: Vec<f64>,
    pub solver: Option<SolverMeta>,
}

impl MeshDocument {
    pub fn from_mesh<R: Real>(mesh: &PolyMesh<R>, solver: Option<SolverMeta>) -> Self {
        let to3 = |v: Vec3<R>| {
            [
                v.x.to_f64().unwrap(),
                v.y.to_f64().unwrap(),
                v.z.to_f64().unwrap(),
            ]
        };
        Self {
            vertices: mesh.vertices.iter().map(|&v| to3(v)).collect(),
            faces: mesh.faces.clone(),
            normals: mesh.face_normals.iter().map(|u| to3(u.vec())).collect(),
            areas: mesh
                .face_areas
                .iter()
                .map(|a| a.to_f64().unwrap())
                .collect(),
            support: mesh.support.iter().map(|h| h.to_f64().unwrap()).collect(),
            solver,
        }
    }

    pub fn read_file(path: &Path) -> Result<Self, MeshError> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), MeshError> {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut writer, self)?;
        writeln!(writer)?;
        Ok(())
    }
}

/// Writes Wavefront OBJ: `v x y z` lines, then one 1-based `f` line per
/// non-empty cycle. Coordinates use 17 significant digits, so identical
/// meshes produce identical bytes.
pub fn export_obj<R: Real>(mesh: &PolyMesh<R>, path: &Path) -> Result<(), MeshError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for v in &mesh.vertices {
        writeln!(w, "v {:.16e} {:.16e} {:.16e}", v.x, v.y, v.z)?;
    }
    for cycle in &mesh.faces {
        if cycle.is_empty() {
            continue;
        }
        write!(w, "f")?;
        for &idx in cycle {
            write!(w, " {}", idx + 1)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes the JSON mesh document.
pub fn export_json<R: Real>(
    mesh: &PolyMesh<R>,
    solver: Option<SolverMeta>,
    path: &Path,
) -> Result<(), MeshError> {
    MeshDocument::from_mesh(mesh, solver).write_file(path)
}
