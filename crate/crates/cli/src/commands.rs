//! Subcommand bodies.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use lielag::harmonic::{
    boundary_from_fn, ep_symmetric_form, identity_boundary, random_boundary, reduced_action, solve_unreduced,
    TraceLagrangian,
};
use lielag::io::FieldFile;
use lielag::liegroup::{CoAlgebraElement, GroupElement};
use lielag::reduction::{
    ep_residual, max_multiplier_residual, multiplier_system_residual, plaquette_constraint, reconstruct_with_report,
    recover_multipliers, reduce, worst_plaquette, RecoveryTolerances, ReducedSection, UnreducedField,
};
use lielag::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{BoundaryKind, RunConfig};
use crate::report::{num, Report, Table};
use crate::suites::{self, Options};
use crate::{CliError, Suite};

pub const GENERATOR: &str = "chacha8";

/// Shared header: problem size, boundary specification and generator.
pub fn header(config: &RunConfig, command: &str) -> Report {
    let mut r = Report::default();
    r.set("command", command);
    r.set("n", config.n);
    r.set("window", format!("{}x{}", config.width, config.height));
    r.set("generator", GENERATOR);
    let b = &config.boundary;
    match b.kind {
        BoundaryKind::Identity => r.set("boundary", "identity"),
        BoundaryKind::Random => r.set("boundary", "random"),
        BoundaryKind::File => r.set("boundary", format!("file {}", b.path.as_ref().expect("validated").display())),
    }
    r.set("boundary.seed", b.seed);
    r.set_num("boundary.scale", b.scale);
    r.set("verify.seed", config.verify.seed);
    r
}

fn read_field_file(path: &Path) -> Result<FieldFile, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    FieldFile::read(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_field_file(path: &Path, file: &FieldFile) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let out = File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write(std::io::BufWriter::new(out)).map_err(CliError::from)
}

pub fn read_section(path: &Path) -> Result<ReducedSection, CliError> {
    read_field_file(path)?.to_reduced().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_unreduced(path: &Path) -> Result<UnreducedField, CliError> {
    read_field_file(path)?.to_unreduced().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// The configured boundary on the `(width+1) × (height+1)` window.
pub fn boundary(config: &RunConfig) -> Result<UnreducedField, CliError> {
    let (w, h, n) = (config.width, config.height, config.n);
    match config.boundary.kind {
        BoundaryKind::Identity => Ok(identity_boundary(w, h, n)),
        BoundaryKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.boundary.seed);
            Ok(random_boundary(w, h, n, config.boundary.scale, &mut rng))
        }
        BoundaryKind::File => {
            let path = config.boundary.path.as_ref().expect("validated");
            let field = read_unreduced(path)?;
            if field.cols() != w + 1 || field.rows() != h + 1 || field.n() != Some(n) {
                return Err(CliError::Usage(format!(
                    "{}: expected a {}x{} field of SO({n}) values",
                    path.display(),
                    w + 1,
                    h + 1
                )));
            }
            let mut missing = None;
            let b = boundary_from_fn(w, h, |i, j| match field.get(i, j) {
                Some(g) => g.clone(),
                None => {
                    missing.get_or_insert((i, j));
                    GroupElement::identity(n)
                }
            })?;
            match missing {
                Some((i, j)) => Err(CliError::Usage(format!("{}: no boundary value at ({i}, {j})", path.display()))),
                None => Ok(b),
            }
        }
    }
}

pub fn recovery_tolerances(config: &RunConfig) -> RecoveryTolerances {
    RecoveryTolerances {
        ep_tol: config.solver.ep_tol,
        admissibility_tol: config.tolerances.admissibility,
        consistency_tol: config.tolerances.consistency,
    }
}

fn emit(report: &Report, dir: &Path, stem: &str) -> Result<(), CliError> {
    print!("{}", report.render());
    report.write(dir, stem)?;
    Ok(())
}

pub fn solve(config: &RunConfig) -> Result<(), CliError> {
    let boundary = boundary(config)?;
    let solver = config.solver_config();
    let mut report = header(config, "solve");
    let (field, result) = match solve_unreduced(&solver, &boundary) {
        Ok(ok) => ok,
        Err(Error::Convergence { iterations, gradient_norm, history }) => {
            report.set("status", "not-converged");
            report.set("iterations", iterations);
            report.set_num("gradient_norm", gradient_norm);
            let mut t = Table::new("history", &["iteration", "gradient_norm"]);
            for (k, g) in history.iter().enumerate() {
                t.push(vec![k.to_string(), num(*g)]);
            }
            report.tables.push(t);
            emit(&report, &config.output, "solve")?;
            return Err(CliError::Failure(format!(
                "solver did not converge in {iterations} iterations (gradient norm {gradient_norm:e})"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let section = reduce(&field)?;
    let passes = result.passes(&solver);
    report.set("status", if passes { "ok" } else { "residuals-exceed-tolerance" });
    report.set("iterations", result.iterations);
    report.set_num("action", result.action);
    report.set_num("energy", result.energy);
    report.set_num("max_gradient", result.max_gradient);
    report.set_num("max_ep_residual", result.max_ep_residual);
    report.set_num("max_constraint_residual", result.max_constraint_residual);
    report.set("energy_non_increasing", result.is_monotone());
    report.set_num("g_tol", solver.g_tol);
    report.set_num("ep_tol", solver.ep_tol);
    let mut vertices = Table::new("vertices", &["i", "j", "gradient", "ep_residual", "ep_symmetric"]);
    for v in &result.vertices {
        vertices.push(vec![v.i.to_string(), v.j.to_string(), num(v.gradient), num(v.ep_residual), num(v.ep_symmetric)]);
    }
    let mut history = Table::new("history", &["iteration", "energy", "gradient_norm"]);
    for (k, (e, g)) in result.energy_history.iter().zip(&result.gradient_history).enumerate() {
        history.push(vec![k.to_string(), num(*e), num(*g)]);
    }
    report.tables.push(vertices);
    report.tables.push(history);
    write_field_file(&config.output.join("field.txt"), &FieldFile::from(&field))?;
    write_field_file(&config.output.join("section.txt"), &FieldFile::from(&section))?;
    emit(&report, &config.output, "solve")?;
    if passes {
        Ok(())
    } else {
        Err(CliError::Failure("post-hoc residuals exceed tolerance".into()))
    }
}

pub fn verify(config: &RunConfig, suite: Suite, options: Options) -> Result<(), CliError> {
    let outcome = suites::run(config, suite, options)?;
    let stem = format!("verify-{}", suites::name(suite));
    let mut report = header(config, &stem);
    report.set("suite", suites::name(suite));
    report.set("identity", suites::anchor(suite));
    report.records.extend(outcome.report.records);
    report.tables = outcome.report.tables;
    report.set("status", if outcome.pass { "pass" } else { "fail" });
    if !outcome.pass {
        report.set("worst", &outcome.worst);
    }
    emit(&report, &config.output, &stem)?;
    if outcome.pass {
        Ok(())
    } else {
        Err(CliError::Failure(format!("{} suite failed: {}", suites::name(suite), outcome.worst)))
    }
}

pub fn reconstruct(config: &RunConfig, section: &Path, seed_field: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let y = read_section(section)?;
    let seed = match seed_field {
        Some(path) => read_unreduced(path)?
            .get(0, 0)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("{}: no value at (0, 0)", path.display())))?,
        None => GroupElement::identity(y.n()),
    };
    let mut report = header(config, "reconstruct");
    report.set("section", section.display());
    let (field, diag) = match reconstruct_with_report(&y, &seed, config.tolerances.admissibility) {
        Ok(ok) => ok,
        Err(Error::Holonomy { i, j, defect }) => {
            report.set("status", "holonomy");
            report.set("plaquette", format!("{i} {j}"));
            report.set_num("defect", defect);
            emit(&report, &config.output, "reconstruct")?;
            return Err(CliError::Failure(format!("flatness violated at plaquette ({i}, {j}) with defect {defect:e}")));
        }
        Err(e) => return Err(e.into()),
    };
    let out: PathBuf = out.map(Path::to_path_buf).unwrap_or_else(|| config.output.join("field.txt"));
    write_field_file(&out, &FieldFile::from(&field))?;
    report.set("status", "ok");
    report.set_num("max_plaquette_defect", diag.max_plaquette_defect);
    report.set_num("path_discrepancy", diag.path_discrepancy);
    report.set("field", out.display());
    emit(&report, &config.output, "reconstruct")
}

pub fn recover(config: &RunConfig, section: &Path, random_seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let y = read_section(section)?;
    let n = y.n();
    let seed = match random_seed {
        Some(s) => CoAlgebraElement::random(n, 1.0, &mut ChaCha8Rng::seed_from_u64(s)),
        None => CoAlgebraElement::zeros(n),
    };
    let l = TraceLagrangian { n };
    let mut report = header(config, "recover-multipliers");
    report.set("section", section.display());
    report.set("seed_face", match random_seed {
        Some(s) => format!("random {s}"),
        None => "zero".into(),
    });
    let recovery = recover_multipliers(&l, &y, &seed, recovery_tolerances(config))?;
    let residual = max_multiplier_residual(&l, &y, &recovery.multiplier)?;
    let out: PathBuf = out.map(Path::to_path_buf).unwrap_or_else(|| config.output.join("multiplier.txt"));
    write_field_file(&out, &FieldFile::from_multiplier(&recovery.multiplier, n, y.cols() - 1, y.rows() - 1))?;
    let pass = residual <= config.tolerances.multiplier;
    report.set("status", if pass { "ok" } else { "residual-exceeds-tolerance" });
    report.set_num("max_system_residual", residual);
    report.set_num("max_sweep_discrepancy", recovery.max_discrepancy);
    report.set("faces_checked_twice", recovery.checked_faces);
    report.set("multiplier", out.display());
    let mut t = Table::new("vertices", &["i", "j", "first_equation", "second_equation"]);
    for (i, j) in y.interior_vertices() {
        let (a, b) = multiplier_system_residual(&l, &y, &recovery.multiplier, i, j)?;
        t.push(vec![i.to_string(), j.to_string(), num(a.norm()), num(b.norm())]);
    }
    report.tables.push(t);
    emit(&report, &config.output, "recover-multipliers")?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failure(format!("multiplier system residual {residual:e} exceeds tolerance")))
    }
}

pub fn report(config: &RunConfig, section: Option<&Path>, field: Option<&Path>) -> Result<(), CliError> {
    let (y, source) = match (section, field) {
        (Some(p), _) => (read_section(p)?, format!("section {}", p.display())),
        (None, Some(p)) => (reduce(&read_unreduced(p)?)?, format!("field {}", p.display())),
        (None, None) => return Err(CliError::Usage("pass --section or --field".into())),
    };
    let l = TraceLagrangian { n: y.n() };
    let mut report = header(config, "report");
    report.set("source", source);
    report.set("section_shape", format!("{}x{}", y.cols(), y.rows()));
    report.set_num("action", reduced_action(&y));
    let mut vertices = Table::new("vertices", &["i", "j", "ep_residual", "ep_symmetric"]);
    let mut worst_ep: f64 = 0.0;
    for (i, j) in y.ep_vertices() {
        let r = ep_residual(&l, &y, i, j)?.norm();
        worst_ep = worst_ep.max(r);
        vertices.push(vec![i.to_string(), j.to_string(), num(r), num(ep_symmetric_form(&y, i, j)?.norm())]);
    }
    let mut plaquettes = Table::new("plaquettes", &["i", "j", "defect"]);
    for (i, j) in y.plaquettes() {
        plaquettes.push(vec![i.to_string(), j.to_string(), num(plaquette_constraint(&y, i, j)?.distance_to_identity())]);
    }
    report.set_num("max_ep_residual", worst_ep);
    report.set_num("max_constraint_residual", worst_plaquette(&y).map_or(0.0, |w| w.1));
    report.tables.push(vertices);
    report.tables.push(plaquettes);
    emit(&report, &config.output, "report")
}
