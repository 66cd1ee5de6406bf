//! Initial guess construction and the damped root-finding iteration.
//!
//! The initial guess places every face plane at the same distance `D`
//! from a point `c` determined by the three gauge planes, then rescales
//! `D` so the produced areas match the targets on average. That keeps all
//! starting areas strictly positive, which matters because dead faces
//! have vanishing Jacobian rows.
//!
//! The iteration is a standard Levenberg–Marquardt loop on the reduced
//! residual with the analytic Jacobian: steps solve the damped normal
//! equations, acceptance requires a strict decrease of `‖g̃‖₂`, and the
//! damping factor moves by ×10 either way.

use crate::areas::{edge_lengths, face_areas_from_table, AreasError, EdgeTable, SupportVector};
use crate::geom::{solve3x3, GeometryCache, Vec3};
use crate::instance::ProblemInstance;
use crate::jacobian::{jacobian, JacobianMatrix};
use crate::real::Real;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError<R: Real> {
    /// The 3×3 Gram system of the gauge triple was singular; unreachable
    /// after gauge ordering, so it signals an internal inconsistency.
    #[error("gauge-triple Gram system is singular")]
    DegenerateGramSystem,
    /// The equidistant construction produced a non-positive starting area.
    #[error("initial guess gives non-positive area {area} for face {face}")]
    NonpositiveInitialArea { face: usize, area: R },
    #[error(transparent)]
    Areas(#[from] AreasError<R>),
}

/// Solver parameters. `initial_distance` is the probe distance the guess
/// construction starts from; everything else tunes the iteration.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<R> {
    pub max_iterations: usize,
    /// Convergence threshold on `‖g̃‖∞` relative to the mean target area.
    pub residual_tolerance: R,
    /// Relative step length below which the iteration reports a stall.
    pub step_tolerance: R,
    pub initial_damping: R,
    pub damping_increase: R,
    pub damping_decrease: R,
    pub initial_distance: R,
}

impl<R: Real> Default for SolveOptions<R> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            residual_tolerance: R::lit(1e-10),
            step_tolerance: R::lit(1e-12),
            initial_damping: R::lit(1e-3),
            damping_increase: R::lit(10.0),
            damping_decrease: R::lit(10.0),
            initial_distance: R::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    StalledStep,
    UnboundedEdge,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIterations => "MaxIterations",
            SolveStatus::StalledStep => "StalledStep",
            SolveStatus::UnboundedEdge => "UnboundedEdge",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<R> {
    /// Gauge-form support vector (three leading zeros).
    pub h_star: SupportVector<R>,
    /// Number of accepted steps.
    pub iterations: usize,
    pub final_residual_inf: R,
    pub status: SolveStatus,
    /// `‖g̃‖₂` at the start and after each accepted step; strictly decreasing.
    pub residual_norm_history: Vec<R>,
}

fn norm_inf<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |acc, &x| acc.max(x.abs()))
}

fn norm_2<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Equidistant-point initial guess in the gauge `h_1 = h_2 = h_3 = 0`.
pub fn initial_guess<R: Real>(
    instance: &ProblemInstance<R>,
    cache: &GeometryCache<R>,
    opts: &SolveOptions<R>,
) -> Result<Vec<R>, SolverError<R>> {
    let f = instance.face_count();
    let d0 = opts.initial_distance;

    // The point c = α₁u₁ + α₂u₂ + α₃u₃ with ⟨u_i, c⟩ = −D₀ for the gauge
    // triple; Gram entries come straight from the cache.
    let gram = [
        [R::one(), cache.d(0, 1), cache.d(0, 2)],
        [cache.d(1, 0), R::one(), cache.d(1, 2)],
        [cache.d(2, 0), cache.d(2, 1), R::one()],
    ];
    let alpha = solve3x3(&gram, Vec3::new(-d0, -d0, -d0))
        .map_err(|_| SolverError::DegenerateGramSystem)?;
    let c = cache.normal(0).vec() * alpha.x
        + cache.normal(1).vec() * alpha.y
        + cache.normal(2).vec() * alpha.z;

    let mut free: Vec<R> = (3..f).map(|i| d0 + cache.normal(i).vec().dot(c)).collect();

    let h = SupportVector::from_free(&free);
    let table = edge_lengths(&h, cache)?;
    let start_areas = face_areas_from_table(&table)?;
    for (i, &a) in start_areas.iter().enumerate() {
        if a <= R::zero() {
            return Err(SolverError::NonpositiveInitialArea { face: i, area: a });
        }
    }

    // Rescale so the produced areas match the targets on average; areas
    // are degree-2 homogeneous in h, hence the square root.
    let mut ratio_sum = R::zero();
    for (&a0, &a) in instance.target_areas().iter().zip(&start_areas) {
        ratio_sum += a0 / a;
    }
    let d = (ratio_sum / R::from_usize(f).unwrap()).sqrt();
    let factor = d / d0;
    for v in &mut free {
        *v = *v * factor;
    }
    Ok(free)
}

/// Solves the damped normal equations `(JᵀJ + μ·diag) δ = −Jᵀg` in place.
/// Returns `None` when the Cholesky factorisation breaks down.
fn solve_normal_equations<R: Real>(
    jac: &JacobianMatrix<R>,
    g: &[R],
    mu: R,
) -> Option<Vec<R>> {
    let n = jac.cols();
    let f = jac.rows();
    let diag_floor = R::lit(1e-12);

    let mut a = vec![R::zero(); n * n];
    let mut b = vec![R::zero(); n];
    for (i, &gi) in g.iter().enumerate() {
        let row = jac.row(i);
        for p in 0..n {
            let jip = row[p];
            if jip == R::zero() {
                continue;
            }
            b[p] = b[p] - jip * gi;
            for q in p..n {
                a[p * n + q] += jip * row[q];
            }
        }
    }
    // Damping proportional to the diagonal, floored so dead faces (zero
    // rows, hence zero diagonal) cannot make the system singular.
    for p in 0..n {
        let d = a[p * n + p];
        a[p * n + p] = d + mu * d.max(diag_floor);
        for q in 0..p {
            a[p * n + q] = a[q * n + p];
        }
    }

    cholesky_solve(&mut a, &mut b, n).then_some(b)
}

/// In-place LLᵀ factorisation and solve; `false` on a non-positive pivot.
fn cholesky_solve<R: Real>(a: &mut [R], b: &mut [R], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if d <= R::zero() || !d.is_finite() {
            return false;
        }
        let l = d.sqrt();
        a[j * n + j] = l;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v = v - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / l;
        }
    }
    // Forward then backward substitution.
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v = v - a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v = v - a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    true
}

struct Evaluation<R> {
    table: EdgeTable<R>,
    residual: Vec<R>,
    norm2: R,
    /// Whether every face area is strictly positive. A dead face has a
    /// zero Jacobian row and column, which traps the iteration in the
    /// wrong smooth piece, so steps that kill a face are rejected.
    all_positive: bool,
}

fn evaluate<R: Real>(
    free: &[R],
    targets: &[R],
    cache: &GeometryCache<R>,
) -> Result<Evaluation<R>, AreasError<R>> {
    let h = SupportVector::from_free(free);
    let table = edge_lengths(&h, cache)?;
    let areas = face_areas_from_table(&table)?;
    let all_positive = areas.iter().all(|&a| a > R::zero());
    let residual: Vec<R> = areas
        .iter()
        .zip(targets)
        .map(|(&a, &a0)| a - a0)
        .collect();
    let norm2 = norm_2(&residual);
    Ok(Evaluation {
        table,
        residual,
        norm2,
        all_positive,
    })
}

/// One damped iteration run against a fixed target-area vector.
///
/// A trial step that walks into an unbounded region or kills a face is
/// treated as a rejected step (the damping pulls the iterate back); only
/// a failure at the starting iterate aborts with `UnboundedEdge`.
fn lm_run<R: Real>(
    start: &[R],
    targets: &[R],
    cache: &GeometryCache<R>,
    opts: &SolveOptions<R>,
) -> Result<SolveResult<R>, SolverError<R>> {
    let f = cache.face_count();
    let mut free = start.to_vec();
    let mean_target =
        targets.iter().fold(R::zero(), |acc, &a| acc + a) / R::from_usize(f).unwrap();
    let tol = opts.residual_tolerance * mean_target;
    let mu_max = R::lit(1e16);
    let mu_min = R::lit(1e-16);

    let mut current = match evaluate(&free, targets, cache) {
        Ok(eval) => eval,
        Err(AreasError::UnboundedEdge { .. }) => {
            return Ok(SolveResult {
                h_star: SupportVector::from_free(&free),
                iterations: 0,
                final_residual_inf: R::infinity(),
                status: SolveStatus::UnboundedEdge,
                residual_norm_history: Vec::new(),
            })
        }
        Err(e) => return Err(e.into()),
    };

    let mut mu = opts.initial_damping;
    let mut iterations = 0usize;
    let mut history = vec![current.norm2];
    let mut last_step_tiny = false;
    debug_assert_eq!(current.residual.len(), f);

    let status = loop {
        if norm_inf(&current.residual) <= tol {
            break SolveStatus::Converged;
        }
        // An accepted step below the relative threshold can still clear
        // the residual check in the quadratic regime, which is why the
        // stall verdict comes after the convergence check, not before
        // the step is attempted.
        if last_step_tiny {
            break SolveStatus::StalledStep;
        }
        if iterations >= opts.max_iterations {
            break SolveStatus::MaxIterations;
        }

        let h = SupportVector::from_free(&free);
        let jac = jacobian(&h, &current.table, cache).expect("table built at this h");

        let mut accepted = false;
        'damping: while mu <= mu_max {
            let Some(step) = solve_normal_equations(&jac, &current.residual, mu) else {
                mu = mu * opts.damping_increase;
                continue;
            };
            // Backtrack along the damped direction before raising μ: a
            // full step often overshoots into a region where a face dies,
            // while a fraction of it still makes good progress.
            let mut alpha = R::one();
            for _ in 0..5 {
                let trial: Vec<R> = free
                    .iter()
                    .zip(&step)
                    .map(|(&x, &d)| x + alpha * d)
                    .collect();
                match evaluate(&trial, targets, cache) {
                    Ok(eval) if eval.norm2 < current.norm2 && eval.all_positive => {
                        let step_norm = alpha * norm_2(&step);
                        // A tiny step that still slashes the residual is
                        // quadratic convergence, not a stall.
                        last_step_tiny = step_norm
                            <= opts.step_tolerance * (norm_2(&trial) + opts.step_tolerance)
                            && eval.norm2 > R::half() * current.norm2;
                        free = trial;
                        current = eval;
                        history.push(current.norm2);
                        iterations += 1;
                        mu = (mu / opts.damping_decrease).max(mu_min);
                        accepted = true;
                        break 'damping;
                    }
                    // Worse residual, a killed face, or an excursion into
                    // an unbounded region: shorten the step.
                    Ok(_) | Err(_) => alpha = alpha * R::half(),
                }
            }
            mu = mu * opts.damping_increase;
        }
        if !accepted {
            break SolveStatus::StalledStep;
        }
    };

    Ok(SolveResult {
        h_star: SupportVector::from_free(&free),
        iterations,
        final_residual_inf: norm_inf(&current.residual),
        status,
        residual_norm_history: history,
    })
}

/// Cap on extra iteration runs spent in the continuation fallback.
const MAX_FALLBACK_RUNS: usize = 40;

/// Solves `A(0,0,0,h̃) = A⁰` starting from the equidistant initial guess.
///
/// The plain damped iteration occasionally jams against the zero-area
/// boundary when a large early step would kill a face whose target is
/// small. When that happens, a deterministic continuation retries: the
/// targets are blended from the areas of the initial guess (whose root,
/// the guess itself, is known exactly) toward `A⁰`, each stage warm
/// starting from the previous root. Blended targets inherit closure and
/// positivity, so every stage is again a well-posed instance.
pub fn solve<R: Real>(
    instance: &ProblemInstance<R>,
    cache: &GeometryCache<R>,
    opts: &SolveOptions<R>,
) -> Result<SolveResult<R>, SolverError<R>> {
    let start = initial_guess(instance, cache, opts)?;
    let targets = instance.target_areas();
    let direct = lm_run(&start, targets, cache, opts)?;
    if matches!(
        direct.status,
        SolveStatus::Converged | SolveStatus::UnboundedEdge
    ) {
        return Ok(direct);
    }

    let h0 = SupportVector::from_free(&start);
    let start_areas = match crate::areas::face_areas(&h0, cache) {
        Ok(areas) => areas,
        Err(_) => return Ok(direct),
    };
    let blend = |t: R| -> Vec<R> {
        start_areas
            .iter()
            .zip(targets)
            .map(|(&ai, &a0)| (R::one() - t) * ai + t * a0)
            .collect()
    };

    let mut reached = R::zero();
    let mut stride = R::half();
    let mut warm = start;
    let mut extra_iterations = direct.iterations;
    let min_stride = R::lit(1.0 / 256.0);

    // Intermediate stages are only warm-start material, so they may stop
    // two orders of magnitude earlier; the final stage keeps the caller's
    // tolerance.
    let stage_opts = SolveOptions {
        residual_tolerance: opts.residual_tolerance * R::lit(100.0),
        ..*opts
    };

    for _ in 0..MAX_FALLBACK_RUNS {
        let t_try = (reached + stride).min(R::one());
        let final_stage = t_try >= R::one();
        let stage = lm_run(
            &warm,
            &blend(t_try),
            cache,
            if final_stage { opts } else { &stage_opts },
        )?;
        extra_iterations += stage.iterations;
        if stage.status == SolveStatus::Converged {
            warm = stage.h_star.free_values().to_vec();
            reached = t_try;
            if final_stage {
                return Ok(SolveResult {
                    iterations: extra_iterations,
                    ..stage
                });
            }
            stride = stride + stride;
        } else {
            stride = stride * R::half();
            if stride < min_stride {
                break;
            }
        }
        stride = stride.min(R::one() - reached);
    }

    // Continuation exhausted; report a final attempt at the true targets
    // from the best point reached.
    let last = lm_run(&warm, targets, cache, opts)?;
    Ok(SolveResult {
        iterations: extra_iterations + last.iterations,
        ..last
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::UnitVec3;
    use crate::instance::{gauge_order, generate_random};

    fn unit(x: f64, y: f64, z: f64) -> UnitVec3<f64> {
        UnitVec3::from_components(x, y, z).unwrap()
    }

    fn cube_instance(area: f64) -> (ProblemInstance<f64>, GeometryCache<f64>) {
        let normals = vec![
            unit(1.0, 0.0, 0.0),
            unit(0.0, 1.0, 0.0),
            unit(0.0, 0.0, 1.0),
            unit(-1.0, 0.0, 0.0),
            unit(0.0, -1.0, 0.0),
            unit(0.0, 0.0, -1.0),
        ];
        let instance = gauge_order(&normals, &[area; 6]).unwrap();
        let cache = GeometryCache::new(instance.normals().to_vec());
        (instance, cache)
    }

    #[test]
    fn cube_initial_guess_is_exact() {
        let (instance, cache) = cube_instance(1.0);
        let opts = SolveOptions::default();
        let guess = initial_guess(&instance, &cache, &opts).unwrap();
        for v in &guess {
            assert!((v - 1.0).abs() <= 1e-12, "guess = {guess:?}");
        }
        // Areas of 4 at D₀ = 1 give the exact 2-cube for targets of 4.
        let (instance4, cache4) = cube_instance(4.0);
        let guess4 = initial_guess(&instance4, &cache4, &opts).unwrap();
        for v in &guess4 {
            assert!((v - 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn cube_solve_converges_immediately() {
        let (instance, cache) = cube_instance(1.0);
        let result = solve(&instance, &cache, &SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Converged);
        assert!(result.iterations <= 1);
        assert!(result.final_residual_inf <= 1e-14);
        assert_eq!(result.h_star.values()[..3], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn random_instances_converge() {
        for seed in [1u64, 2, 3] {
            let (normals, areas) = generate_random::<f64>(25, seed).unwrap();
            let instance = gauge_order(&normals, &areas).unwrap();
            let cache = GeometryCache::new(instance.normals().to_vec());
            let result = solve(&instance, &cache, &SolveOptions::default()).unwrap();
            assert_eq!(result.status, SolveStatus::Converged, "seed {seed}");

            // Independent root verification: recompute the areas.
            let areas_at_root =
                crate::areas::face_areas(&result.h_star, &cache).unwrap();
            let max_rel = areas_at_root
                .iter()
                .zip(instance.target_areas())
                .map(|(&a, &a0)| ((a - a0) / a0).abs())
                .fold(0.0f64, f64::max);
            assert!(max_rel <= 1e-6, "seed {seed}: rel err {max_rel}");

            // Accepted residual norms must decrease strictly.
            for w in result.residual_norm_history.windows(2) {
                assert!(w[1] < w[0]);
            }
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let (normals, areas) = generate_random::<f64>(30, 11).unwrap();
        let instance = gauge_order(&normals, &areas).unwrap();
        let cache = GeometryCache::new(instance.normals().to_vec());
        let a = solve(&instance, &cache, &SolveOptions::default()).unwrap();
        let b = solve(&instance, &cache, &SolveOptions::default()).unwrap();
        assert_eq!(a.h_star.values(), b.h_star.values());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn scaled_areas_scale_the_root() {
        let (normals, areas) = generate_random::<f64>(20, 5).unwrap();
        let instance = gauge_order(&normals, &areas).unwrap();
        let cache = GeometryCache::new(instance.normals().to_vec());
        let base = solve(&instance, &cache, &SolveOptions::default()).unwrap();
        assert_eq!(base.status, SolveStatus::Converged);

        let scaled_areas: Vec<f64> = areas.iter().map(|a| 9.0 * a).collect();
        let scaled_instance = gauge_order(&normals, &scaled_areas).unwrap();
        let scaled = solve(&scaled_instance, &cache, &SolveOptions::default()).unwrap();
        assert_eq!(scaled.status, SolveStatus::Converged);

        for (hs, hb) in scaled.h_star.free_values().iter().zip(base.h_star.free_values()) {
            assert!((hs / hb - 3.0).abs() <= 1e-6, "{hs} vs {hb}");
        }
    }

    #[test]
    fn single_precision_cube_solves_exactly() {
        // The cube pipeline is closed-form, so it stays exact even in f32.
        let normals: Vec<UnitVec3<f32>> = vec![
            UnitVec3::from_components(1.0f32, 0.0, 0.0).unwrap(),
            UnitVec3::from_components(0.0f32, 1.0, 0.0).unwrap(),
            UnitVec3::from_components(0.0f32, 0.0, 1.0).unwrap(),
            UnitVec3::from_components(-1.0f32, 0.0, 0.0).unwrap(),
            UnitVec3::from_components(0.0f32, -1.0, 0.0).unwrap(),
            UnitVec3::from_components(0.0f32, 0.0, -1.0).unwrap(),
        ];
        let instance = gauge_order(&normals, &[1.0f32; 6]).unwrap();
        let cache = GeometryCache::new(instance.normals().to_vec());
        let result = solve(&instance, &cache, &SolveOptions::<f32>::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Converged);
        assert_eq!(result.final_residual_inf, 0.0f32);
    }

    #[test]
    fn initial_guess_areas_positive_at_scale() {
        let (normals, areas) = generate_random::<f64>(50, 9).unwrap();
        let instance = gauge_order(&normals, &areas).unwrap();
        let cache = GeometryCache::new(instance.normals().to_vec());
        let guess = initial_guess(&instance, &cache, &SolveOptions::default()).unwrap();
        let h = SupportVector::from_free(&guess);
        let areas0 = crate::areas::face_areas(&h, &cache).unwrap();
        assert!(areas0.iter().all(|&a| a > 0.0));
    }
}
