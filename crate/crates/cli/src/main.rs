//! `minkrec`: reconstruct convex polyhedra from face normals and areas.
//!
//! Exit codes follow a fixed contract so scripted sweeps can consume the
//! results: 0 on success, 1 on a numeric failure (non-convergence,
//! unbounded edge, tolerance breach), 2 on input failure (I/O, parsing,
//! validation).

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use minkrec::{
    build_mesh, edge_lengths, export_json, export_obj, face_areas, gauge_order, generate_random,
    initial_guess, jacobian, kink_margin, mesh_face_areas, residual, solve, validate, AreasError,
    GeometryCache, InstanceJson, SolveOptions, SolveStatus, SolverMeta, SupportVector, UnitVec3,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_OK: u8 = 0;
const EXIT_NUMERIC: u8 = 1;
const EXIT_INPUT: u8 = 2;

/// Deviation tolerance of the Jacobian check: max(1e-5 relative, 1e-7 absolute).
const JACOBIAN_REL_TOL: f64 = 1e-5;
const JACOBIAN_ABS_TOL: f64 = 1e-7;
/// Achieving-index margins below this flag proximity to a kink.
const KINK_MARGIN: f64 = 1e-7;
/// A reconstruction counts as successful only if the mesh-oracle area
/// error stays within this bound.
const ORACLE_REL_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "minkrec",
    version,
    about = "Reconstructs a bounded convex polyhedron from its outward face normals and face areas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit the summary as a single JSON document instead of key=value lines.
    #[arg(long, global = true)]
    json: bool,
    /// Increase verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file against the reconstruction hypotheses.
    Validate {
        /// Instance JSON: {"normals": [[x,y,z],...], "areas": [...]}.
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate a random instance satisfying the closure constraint.
    Generate {
        /// Number of faces (at least 5).
        #[arg(long, short = 'F')]
        faces: usize,
        /// RNG seed; identical seeds give byte-identical files.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Reconstruct the polyhedron and export its mesh.
    Reconstruct(ReconstructArgs),
    /// Evaluate face areas at given support values (input face order).
    Areas {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated support values, one per face.
        #[arg(long)]
        support: String,
    },
    /// Compare the analytic Jacobian against central finite differences.
    CheckJacobian {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated free support values (gauge order, F-3 entries);
        /// defaults to the solver's initial guess.
        #[arg(long)]
        support: Option<String>,
        /// Base finite-difference step (scaled per coordinate).
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Obj)]
    format: Format,
    /// Residual tolerance override (relative to the mean target area).
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap override.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Obj,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_INPUT
        }
    };
    ExitCode::from(code)
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Validate { input } => cmd_validate(cli, input),
        Command::Generate {
            faces,
            seed,
            output,
        } => cmd_generate(cli, *faces, *seed, output),
        Command::Reconstruct(args) => cmd_reconstruct(cli, args),
        Command::Areas { input, support } => cmd_areas(cli, input, support),
        Command::CheckJacobian {
            input,
            support,
            step,
        } => cmd_check_jacobian(cli, input, support.as_deref(), *step),
    }
}

fn load_instance(path: &Path) -> Result<(Vec<UnitVec3<f64>>, Vec<f64>)> {
    let doc = InstanceJson::read_file::<f64>(path)
        .with_context(|| format!("cannot read instance file {}", path.display()))?;
    doc.into_parts::<f64>()
        .with_context(|| format!("malformed instance in {}", path.display()))
}

fn parse_support(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("cannot parse support value {t:?}"))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(anyhow!(
            "{what} needs {expected} comma-separated values, got {}",
            values.len()
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(anyhow!("support values must be finite"));
    }
    Ok(values)
}

fn cmd_validate(cli: &Cli, input: &Path) -> Result<u8> {
    let (normals, areas) = load_instance(input)?;
    let report = validate(&normals, &areas)?;
    if cli.json {
        let check = |c: &minkrec::CheckOutcome<f64>| {
            serde_json::json!({"pass": c.passed, "measured": c.measured, "threshold": c.threshold})
        };
        let doc = serde_json::json!({
            "valid": report.passed(),
            "unit_norm": check(&report.unit_norm),
            "distinctness": check(&report.distinctness),
            "spanning": check(&report.spanning),
            "positivity": check(&report.positivity),
            "closure": check(&report.closure),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("{report}");
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    })
}

fn cmd_generate(cli: &Cli, faces: usize, seed: u64, output: &Path) -> Result<u8> {
    if faces < 5 {
        return Err(anyhow!("--faces must be at least 5"));
    }
    match generate_random::<f64>(faces, seed) {
        Ok((normals, areas)) => {
            InstanceJson::from_parts(&normals, &areas)
                .write_file::<f64>(output)
                .with_context(|| format!("cannot write {}", output.display()))?;
            if cli.json {
                let doc = serde_json::json!({
                    "output": output.display().to_string(),
                    "faces": faces,
                    "seed": seed,
                });
                println!("{}", serde_json::to_string_pretty(&doc)?);
            } else {
                println!("output={}", output.display());
                println!("faces={faces}");
                println!("seed={seed}");
            }
            Ok(EXIT_OK)
        }
        Err(err) => {
            eprintln!("generation failed: {err}");
            Ok(EXIT_NUMERIC)
        }
    }
}

fn cmd_reconstruct(cli: &Cli, args: &ReconstructArgs) -> Result<u8> {
    let started = Instant::now();
    let (normals, areas) = load_instance(&args.input)?;
    let report = validate(&normals, &areas)?;
    if !report.passed() {
        return Err(anyhow!("instance fails validation:\n{report}"));
    }

    let instance = gauge_order(&normals, &areas)?;
    let cache = GeometryCache::new(instance.normals().to_vec());
    let mut opts = SolveOptions::<f64>::default();
    if let Some(tol) = args.tol {
        if tol <= 0.0 {
            return Err(anyhow!("--tol must be positive"));
        }
        opts.residual_tolerance = tol;
    }
    if let Some(max_iter) = args.max_iter {
        opts.max_iterations = max_iter;
    }

    let result = match solve(&instance, &cache, &opts) {
        Ok(result) => result,
        Err(err) => {
            eprintln!("solver failed: {err}");
            return Ok(EXIT_NUMERIC);
        }
    };

    let mut oracle_error = f64::INFINITY;
    let mut exported = false;
    if result.status == SolveStatus::Converged {
        let mesh = build_mesh(
            instance.normals(),
            &result.h_star,
            instance.permutation(),
        );
        match mesh {
            Ok(mesh) => {
                // The reported error comes from the independent vertex
                // enumeration path, never from the solver's bookkeeping.
                let oracle_areas = mesh_face_areas(&mesh);
                oracle_error = oracle_areas
                    .iter()
                    .zip(&areas)
                    .map(|(&a, &a0)| ((a - a0) / a0).abs())
                    .fold(0.0, f64::max);
                let meta = SolverMeta {
                    iterations: result.iterations,
                    residual: result.final_residual_inf,
                    status: result.status.to_string(),
                };
                match args.format {
                    Format::Obj => export_obj(&mesh, &args.output)?,
                    Format::Json => export_json(&mesh, Some(meta), &args.output)?,
                }
                exported = true;
            }
            Err(err) => eprintln!("mesh extraction failed: {err}"),
        }
    }

    let wall = started.elapsed().as_secs_f64();
    let ok = result.status == SolveStatus::Converged && oracle_error <= ORACLE_REL_TOL && exported;
    if cli.json {
        let doc = serde_json::json!({
            "status": result.status.to_string(),
            "iterations": result.iterations,
            "residual": result.final_residual_inf,
            "max_area_error": oracle_error,
            "wall_time_s": wall,
            "output": exported.then(|| args.output.display().to_string()),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("status={}", result.status);
        println!("iterations={}", result.iterations);
        println!("residual={:e}", result.final_residual_inf);
        println!("max_area_error={oracle_error:e}");
        println!("wall_time_s={wall:.6}");
        if exported {
            println!("output={}", args.output.display());
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_NUMERIC })
}

fn cmd_areas(cli: &Cli, input: &Path, support: &str) -> Result<u8> {
    let (normals, areas_targets) = load_instance(input)?;
    let f = normals.len();
    let values = parse_support(support, f, "--support")?;

    // Area evaluation needs well-formed normals but not the closure
    // constraint, so closure problems only warn here; unboundedness then
    // surfaces through the edge clipping itself.
    let report = validate(&normals, &areas_targets)?;
    if !(report.unit_norm.passed
        && report.distinctness.passed
        && report.spanning.passed
        && report.positivity.passed)
    {
        return Err(anyhow!("instance fails validation:\n{report}"));
    }
    if !report.closure.passed {
        eprintln!(
            "warning: closure defect {:e} exceeds threshold {:e}; P(h) may be unbounded",
            report.closure.measured, report.closure.threshold
        );
    }

    let cache = GeometryCache::new(normals);
    let h = SupportVector::new(values);
    if cli.verbose > 0 {
        match edge_lengths(&h, &cache) {
            Ok(table) => {
                for i in 0..f {
                    for j in (i + 1)..f {
                        println!("lambda_{}_{}={:e}", i + 1, j + 1, table.lambda(i, j));
                    }
                }
            }
            Err(err) => return areas_failure(err),
        }
    }
    match face_areas(&h, &cache) {
        Ok(computed) => {
            if cli.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({ "areas": computed }))?
                );
            } else {
                for (i, a) in computed.iter().enumerate() {
                    println!("area_{}={}", i + 1, a);
                }
            }
            Ok(EXIT_OK)
        }
        Err(err) => areas_failure(err),
    }
}

fn areas_failure(err: AreasError<f64>) -> Result<u8> {
    match err {
        AreasError::UnboundedEdge { i, j } => {
            eprintln!(
                "unbounded edge between faces {} and {}: the polyhedron is unbounded",
                i + 1,
                j + 1
            );
            Ok(EXIT_NUMERIC)
        }
        other => {
            eprintln!("area computation failed: {other}");
            Ok(EXIT_NUMERIC)
        }
    }
}

fn cmd_check_jacobian(cli: &Cli, input: &Path, support: Option<&str>, step: f64) -> Result<u8> {
    let (normals, areas) = load_instance(input)?;
    let report = validate(&normals, &areas)?;
    if !report.passed() {
        return Err(anyhow!("instance fails validation:\n{report}"));
    }
    let instance = gauge_order(&normals, &areas)?;
    let cache = GeometryCache::new(instance.normals().to_vec());
    let f = instance.face_count();

    let free = match support {
        Some(text) => parse_support(text, f - 3, "--support")?,
        None => initial_guess(&instance, &cache, &SolveOptions::default())
            .map_err(|err| anyhow!("initial guess failed: {err}"))?,
    };

    let h = SupportVector::from_free(&free);
    let margin = kink_margin(&h, &cache);
    let near_kink = margin <= KINK_MARGIN;

    let table = edge_lengths(&h, &cache).map_err(|err| anyhow!("edge clipping failed: {err}"))?;
    let analytic = jacobian(&h, &table, &cache)?;

    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for b in 0..f - 3 {
        let hstep = step * free[b].abs().max(1.0);
        let mut plus = free.clone();
        plus[b] += hstep;
        let mut minus = free.clone();
        minus[b] -= hstep;
        let gp = residual(&plus, &instance, &cache)
            .map_err(|err| anyhow!("residual evaluation failed: {err}"))?;
        let gm = residual(&minus, &instance, &cache)
            .map_err(|err| anyhow!("residual evaluation failed: {err}"))?;
        for i in 0..f {
            let fd = (gp[i] - gm[i]) / (2.0 * hstep);
            let an = analytic.get(i, b);
            let abs = (an - fd).abs();
            max_abs = max_abs.max(abs);
            if abs > JACOBIAN_ABS_TOL {
                max_rel = max_rel.max(abs / an.abs().max(fd.abs()));
            }
        }
    }

    let within = max_abs <= JACOBIAN_ABS_TOL || max_rel <= JACOBIAN_REL_TOL;
    if cli.json {
        let doc = serde_json::json!({
            "max_abs_deviation": max_abs,
            "max_rel_deviation": max_rel,
            "kink_margin": margin,
            "near_kink": near_kink,
            "within_tolerance": within,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("max_abs_deviation={max_abs:e}");
        println!("max_rel_deviation={max_rel:e}");
        println!("kink_margin={margin:e}");
        println!("near_kink={near_kink}");
        println!("within_tolerance={within}");
    }
    if within {
        Ok(EXIT_OK)
    } else if near_kink {
        // Finite differences are not trustworthy at a kink; report the
        // proximity instead of failing.
        println!("note=deviation ignored: support values sit at a non-differentiable point");
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_NUMERIC)
    }
}
