//! Reconstruction of bounded convex polyhedra from outward face normals
//! and face areas.
//!
//! By Minkowski's theorem, distinct unit normals spanning `R³` together
//! with positive areas satisfying `Σ A_i u_i = 0` determine a bounded
//! convex polyhedron uniquely up to translation. This crate computes that
//! polyhedron: it parametrises the candidate by per-face support values,
//! evaluates face areas through edge clipping, fixes the translational
//! freedom by pinning three support values to zero, and drives the area
//! residual to its unique root with a damped Newton-type iteration using
//! the analytic Jacobian. A brute-force vertex enumeration provides an
//! independent check of the computed areas and the exportable mesh.
//!
//! ```
//! use minkrec::{gauge_order, generate_random, GeometryCache, SolveOptions};
//!
//! let (normals, areas) = generate_random::<f64>(25, 7).unwrap();
//! let instance = gauge_order(&normals, &areas).unwrap();
//! let cache = GeometryCache::new(instance.normals().to_vec());
//! let result = minkrec::solve(&instance, &cache, &SolveOptions::default()).unwrap();
//! assert_eq!(result.status, minkrec::SolveStatus::Converged);
//! ```
//!
//! All numeric code is generic over the scalar type via [`Real`]; the
//! aliases at the crate root pin the two supported widths.

pub mod areas;
pub mod geom;
pub mod instance;
pub mod jacobian;
pub mod mesh;
pub mod real;
pub mod solver;

pub use areas::{
    edge_bounds, edge_lengths, face_areas, face_areas_from_table, kink_margin, AreasError,
    EdgeBounds, EdgeTable, PairRecord, SupportVector,
};
pub use geom::{solve3x3, GeomError, GeometryCache, UnitVec3, Vec3};
pub use instance::{
    gauge_order, generate_random, validate, CheckOutcome, InstanceError, InstanceJson,
    ProblemInstance, ValidationReport,
};
pub use jacobian::{jacobian, residual, JacobianError, JacobianMatrix};
pub use mesh::{
    build_mesh, enumerate_vertices, export_json, export_obj, identity_permutation,
    mesh_face_areas, MeshDocument, MeshError, PolyMesh, SolverMeta,
};
pub use real::Real;
pub use solver::{initial_guess, solve, SolveOptions, SolveResult, SolveStatus, SolverError};

// Concrete aliases for the two supported scalar widths. The CLI and the
// file formats use the `f64` set.
pub type Vec3F64 = Vec3<f64>;
pub type Vec3F32 = Vec3<f32>;
pub type UnitVec3F64 = UnitVec3<f64>;
pub type UnitVec3F32 = UnitVec3<f32>;
pub type GeometryCacheF64 = GeometryCache<f64>;
pub type ProblemInstanceF64 = ProblemInstance<f64>;
pub type SupportVectorF64 = SupportVector<f64>;
pub type EdgeTableF64 = EdgeTable<f64>;
pub type JacobianMatrixF64 = JacobianMatrix<f64>;
pub type SolveOptionsF64 = SolveOptions<f64>;
pub type SolveResultF64 = SolveResult<f64>;
pub type PolyMeshF64 = PolyMesh<f64>;
