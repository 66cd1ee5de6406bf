//! Randomised property suites for the geometry kernel and the solver.

use minkrec::{
    build_mesh, edge_lengths, face_areas, gauge_order, generate_random, initial_guess, jacobian,
    kink_margin, mesh_face_areas, residual, solve, solve3x3, GeometryCache, ProblemInstance,
    SolveOptions, SolveStatus, SupportVector, UnitVec3, Vec3,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Setup = (ProblemInstance<f64>, GeometryCache<f64>);

fn make_instance(faces: usize, seed: u64) -> Setup {
    let (normals, areas) = generate_random::<f64>(faces, seed).unwrap();
    let instance = gauge_order(&normals, &areas).unwrap();
    let cache = GeometryCache::new(instance.normals().to_vec());
    (instance, cache)
}

/// Initial guess jittered multiplicatively; stays in the all-faces-alive
/// region for mild jitter.
fn jittered_support(setup: &Setup, jitter_seed: u64, spread: f64) -> Option<SupportVector<f64>> {
    let (instance, cache) = setup;
    let mut free = initial_guess(instance, cache, &SolveOptions::default()).ok()?;
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    for v in &mut free {
        *v *= 1.0 + spread * (rng.gen::<f64>() - 0.5);
    }
    Some(SupportVector::from_free(&free))
}

fn unit_vec_strategy() -> impl Strategy<Value = UnitVec3<f64>> {
    (-1.0f64..=1.0, -1.0f64..=1.0, -1.0f64..=1.0)
        .prop_filter_map("non-degenerate direction", |(x, y, z)| {
            UnitVec3::from_components(x, y, z).ok()
        })
}

proptest! {
    #[test]
    fn triple_products_match_determinants(
        u in unit_vec_strategy(),
        v in unit_vec_strategy(),
        w in unit_vec_strategy(),
        extra in unit_vec_strategy(),
    ) {
        let cache = GeometryCache::new(vec![u, v, w, extra]);
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    if i == j { continue; }
                    let normals = cache.normals();
                    let m = [
                        normals[k].vec().to_array(),
                        normals[i].vec().to_array(),
                        normals[j].vec().to_array(),
                    ];
                    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                    prop_assert!((cache.a(k, i, j) - det).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn cross_norm_complements_dot(
        u in unit_vec_strategy(),
        v in unit_vec_strategy(),
        w in unit_vec_strategy(),
        x in unit_vec_strategy(),
    ) {
        let cache = GeometryCache::new(vec![u, v, w, x]);
        for i in 0..4 {
            for j in 0..4 {
                let d = cache.d(i, j);
                let s = cache.s(i, j);
                prop_assert!(s >= 0.0);
                prop_assert!((s + d * d - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn solve3x3_satisfies_its_postcondition(
        rows in proptest::array::uniform9(-10.0f64..10.0),
        rhs in proptest::array::uniform3(-10.0f64..10.0),
    ) {
        let m = [
            [rows[0], rows[1], rows[2]],
            [rows[3], rows[4], rows[5]],
            [rows[6], rows[7], rows[8]],
        ];
        let b = Vec3::new(rhs[0], rhs[1], rhs[2]);
        if let Ok(x) = solve3x3(&m, b) {
            // Only assert the residual bound on reasonably conditioned
            // systems; the singularity guard filters the worst.
            let norms: f64 = m.iter()
                .map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt())
                .product();
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            prop_assume!(det.abs() > 1e-3 * norms);
            let r = Vec3::new(
                m[0][0] * x.x + m[0][1] * x.y + m[0][2] * x.z - b.x,
                m[1][0] * x.x + m[1][1] * x.y + m[1][2] * x.z - b.y,
                m[2][0] * x.x + m[2][1] * x.y + m[2][2] * x.z - b.z,
            );
            let rinf = r.x.abs().max(r.y.abs()).max(r.z.abs());
            let binf = b.x.abs().max(b.y.abs()).max(b.z.abs());
            prop_assert!(rinf <= 1e-10 * (1.0 + binf));
        }
    }

    #[test]
    fn generated_instances_close(seed in 0u64..1000, faces in 5usize..40) {
        let (normals, areas) = generate_random::<f64>(faces, seed).unwrap();
        let mut sum = Vec3::zero();
        let mut total = 0.0;
        for (u, &a) in normals.iter().zip(&areas) {
            sum = sum + u.vec() * a;
            total += a;
        }
        prop_assert!(sum.norm() <= 1e-12 * total);
    }

    #[test]
    fn gauge_round_trip_is_identity(seed in 0u64..500, faces in 5usize..20) {
        let (normals, areas) = generate_random::<f64>(faces, seed).unwrap();
        let instance = gauge_order(&normals, &areas).unwrap();
        let restored_areas = instance.to_user_order(instance.target_areas());
        prop_assert_eq!(restored_areas, areas);
        let gauge_tags: Vec<usize> = (0..faces).collect();
        let user_tags = instance.to_user_order(&gauge_tags);
        // user_tags[orig] = gauge slot of orig; inverting recovers the permutation.
        for (g, &orig) in instance.permutation().iter().enumerate() {
            prop_assert_eq!(user_tags[orig], g);
        }
    }

    #[test]
    fn lambda_symmetry_is_exact(seed in 0u64..200, faces in 5usize..12, jitter in 0u64..50) {
        let setup = make_instance(faces, seed);
        let Some(h) = jittered_support(&setup, jitter, 0.2) else { return Ok(()); };
        let Ok(table) = edge_lengths(&h, &setup.1) else { return Ok(()); };
        for i in 0..faces {
            for j in 0..faces {
                if i == j { continue; }
                prop_assert_eq!(table.lambda(i, j), table.lambda(j, i));
                let fwd = table.record(i, j);
                let bwd = table.record(j, i);
                if let (Some(a), Some(b)) = (fwd.k_max, bwd.k_min) {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn areas_are_degree_two_homogeneous(
        seed in 0u64..200,
        faces in 5usize..12,
        alpha in 0.5f64..2.0,
    ) {
        let setup = make_instance(faces, seed);
        let Some(h) = jittered_support(&setup, seed ^ 0x5eed, 0.2) else { return Ok(()); };
        let Ok(base) = face_areas(&h, &setup.1) else { return Ok(()); };
        let scaled_h = SupportVector::new(h.values().iter().map(|&v| alpha * v).collect());
        let Ok(scaled) = face_areas(&scaled_h, &setup.1) else { return Ok(()); };
        let scale = base.iter().fold(0.0f64, |m, &a| m.max(a)) * alpha * alpha;
        for (&a, &s) in base.iter().zip(&scaled) {
            prop_assert!((s - alpha * alpha * a).abs() <= 1e-10 * scale.max(1e-30));
        }
    }

    #[test]
    fn areas_are_translation_covariant(
        seed in 0u64..200,
        faces in 5usize..12,
        shift in proptest::array::uniform3(-0.5f64..0.5),
    ) {
        let setup = make_instance(faces, seed);
        let Some(h) = jittered_support(&setup, seed ^ 0xc0, 0.2) else { return Ok(()); };
        let Ok(base) = face_areas(&h, &setup.1) else { return Ok(()); };
        let c = Vec3::new(shift[0], shift[1], shift[2]);
        let translated: Vec<f64> = setup
            .1
            .normals()
            .iter()
            .zip(h.values())
            .map(|(u, &hi)| hi + u.vec().dot(c))
            .collect();
        let Ok(moved) = face_areas(&SupportVector::new(translated), &setup.1) else {
            return Ok(());
        };
        let scale = base.iter().fold(0.0f64, |m, &a| m.max(a));
        for (&a, &b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() <= 1e-9 * scale.max(1e-30));
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(seed in 0u64..100, faces in 5usize..10) {
        let (instance, cache) = make_instance(faces, seed);
        let Ok(free) = initial_guess(&instance, &cache, &SolveOptions::default()) else {
            return Ok(());
        };
        let h = SupportVector::from_free(&free);
        prop_assume!(kink_margin(&h, &cache) > 1e-7);
        let table = edge_lengths(&h, &cache).unwrap();
        let analytic = jacobian(&h, &table, &cache).unwrap();
        for b in 0..faces - 3 {
            let step = 1e-6 * free[b].abs().max(1.0);
            let mut plus = free.clone();
            plus[b] += step;
            let mut minus = free.clone();
            minus[b] -= step;
            let gp = residual(&plus, &instance, &cache).unwrap();
            let gm = residual(&minus, &instance, &cache).unwrap();
            for i in 0..faces {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                let an = analytic.get(i, b);
                let dev = (an - fd).abs();
                prop_assert!(
                    dev <= 1e-7 || dev <= 1e-5 * an.abs().max(fd.abs()),
                    "entry ({}, {}): analytic {} vs fd {}", i, b, an, fd
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // Solve-backed properties are expensive; a dozen cases each is plenty
    // on top of the deterministic acceptance suite.
    #[test]
    fn reconstruction_meshes_are_consistent(seed in 0u64..5000, faces in 6usize..30) {
        let (instance, cache) = make_instance(faces, seed);
        let result = solve(&instance, &cache, &SolveOptions::default()).unwrap();
        prop_assume!(result.status == SolveStatus::Converged);

        let areas_at_root = face_areas(&result.h_star, &cache).unwrap();
        let mut weighted = Vec3::zero();
        let mut total = 0.0;
        for (u, &a) in cache.normals().iter().zip(&areas_at_root) {
            weighted = weighted + u.vec() * a;
            total += a;
        }
        prop_assert!(weighted.norm() <= 1e-8 * total);

        let mesh = build_mesh(instance.normals(), &result.h_star, instance.permutation()).unwrap();
        prop_assert_eq!(mesh.euler_characteristic(), 2);

        // Containment: every vertex inside every half-space.
        let h_user = instance.to_user_order(result.h_star.values());
        for v in &mesh.vertices {
            for (u, &hi) in mesh.face_normals.iter().zip(&h_user) {
                prop_assert!(u.vec().dot(*v) <= hi + 1e-8 * (1.0 + hi.abs()));
            }
        }

        // Mesh closure and orientation.
        let mesh_areas = mesh_face_areas(&mesh);
        let mut closure = Vec3::zero();
        let mut mesh_total = 0.0;
        for (u, &a) in mesh.face_normals.iter().zip(&mesh_areas) {
            prop_assert!(a >= 0.0);
            closure = closure + u.vec() * a;
            mesh_total += a;
        }
        prop_assert!(closure.norm() <= 1e-8 * mesh_total);

        // The accepted residual norms decrease strictly.
        for w in result.residual_norm_history.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }
}
