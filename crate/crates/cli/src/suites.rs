//! Identity suites behind `lielag verify`.
//!
//! Random suites draw `verify.instances` instances from `verify.seed`; the
//! others run on the critical pair of the configured boundary. Each returns
//! its records, a per-item table and the worst offender.

use lielag::complex::FaceSet;
use lielag::harmonic::{
    conjugation_symmetry_field, run_multisymplectic_scenario, solve_unreduced, trace_problem, BoundaryBump,
    CriticalPair, TraceLagrangian,
};
use lielag::liegroup::{exp, log_near_identity, AlgebraElement, CoAlgebraElement};
use lielag::reduction::{
    elimination_check, multiplier_system_residual, reconstruct, reconstruct_with_report, recover_multipliers, reduce,
    PlaquetteConstraint, ReducedDensity, ReducedSection, UnreducedField,
};
use lielag::variational::{fd_constraint_form, ConstraintMap, Multiplier, Problem, Variation, FD_STEP};
use lielag::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{boundary, recovery_tolerances};
use crate::config::RunConfig;
use crate::report::{num, Report, Table};
use crate::{CliError, Suite};

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub break_symmetry: bool,
    pub free_frontier: bool,
}

pub struct Outcome {
    pub pass: bool,
    /// Location and size of the worst item.
    pub worst: String,
    pub report: Report,
}

pub fn name(suite: Suite) -> &'static str {
    match suite {
        Suite::Split => "split",
        Suite::Cartan => "cartan",
        Suite::Flatness => "flatness",
        Suite::Noether => "noether",
        Suite::Multisymplectic => "multisymplectic",
        Suite::Multipliers => "multipliers",
        Suite::Elimination => "elimination",
        Suite::Regularity => "regularity",
    }
}

/// The identity each suite checks, in words.
pub fn anchor(suite: Suite) -> &'static str {
    match suite {
        Suite::Split => "face sum of the action variation = interior Euler-Lagrange sum + boundary Cartan sum",
        Suite::Cartan => "analytic Cartan forms of the plaquette constraint = finite differences",
        Suite::Flatness => "reduce then reconstruct is the identity; tampered sections are rejected",
        Suite::Noether => "boundary Cartan sum along the conjugation symmetry vanishes at a critical pair",
        Suite::Multisymplectic => "boundary 2-form on two Jacobi fields vanishes",
        Suite::Multipliers => "recovered multipliers satisfy both equations at every interior vertex",
        Suite::Elimination => "multiplier terms cancel and the combination reproduces Euler-Poincare",
        Suite::Regularity => "constraint derivative is surjective on admissible variations",
    }
}

pub fn run(config: &RunConfig, suite: Suite, options: Options) -> Result<Outcome, CliError> {
    match suite {
        Suite::Split => split(config),
        Suite::Cartan => cartan(config),
        Suite::Flatness => flatness(config),
        Suite::Noether => noether(config, options.break_symmetry),
        Suite::Multisymplectic => multisymplectic(config),
        Suite::Multipliers => multipliers(config),
        Suite::Elimination => elimination(config),
        Suite::Regularity => regularity(config, options.free_frontier),
    }
}

type TraceProblemOn = Problem<ReducedDensity<TraceLagrangian>, PlaquetteConstraint>;

fn problem_on(y: &ReducedSection, faces: FaceSet) -> Result<TraceProblemOn, CliError> {
    let complex = y.complex()?;
    Ok(Problem::new(complex, faces, y.signature(), ReducedDensity(TraceLagrangian { n: y.n() }), PlaquetteConstraint)?)
}

fn instance_rng(config: &RunConfig, k: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.verify.seed.wrapping_add(k as u64))
}

/// Critical pair of the configured boundary, multipliers from a zero seed.
fn critical(config: &RunConfig) -> Result<CriticalPair, CliError> {
    let (field, solve) = solve_unreduced(&config.solver_config(), &boundary(config)?)?;
    let section = reduce(&field)?;
    let l = TraceLagrangian { n: config.n };
    let recovery = recover_multipliers(&l, &section, &CoAlgebraElement::zeros(config.n), recovery_tolerances(config))?;
    Ok(CriticalPair { field, section, recovery, solve })
}

/// Tracks the largest value and where it occurred.
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self { value: 0.0, at: "none".into() }
    }

    fn see(&mut self, value: f64, at: impl FnOnce() -> String) {
        if value > self.value || value.is_nan() {
            self.value = value;
            self.at = at();
        }
    }

    fn describe(&self, what: &str) -> String {
        format!("{what} {} at {}", num(self.value), self.at)
    }
}

fn split(config: &RunConfig) -> Result<Outcome, CliError> {
    let n = config.n;
    let (cols, rows) = (config.width, config.height);
    let mut table = Table::new("instances", &["instance", "faces", "face_sum", "relative_defect"]);
    let mut worst = Worst::new();
    for k in 0..config.verify.instances {
        let mut r = instance_rng(config, k);
        let y = ReducedSection::random(cols, rows, n, 1.5, &mut r);
        let complex = y.complex()?;
        // odd instances use a random face subset
        let faces = if k % 2 == 0 {
            FaceSet::all(&complex)
        } else {
            let subset: Vec<_> = complex.faces().filter(|_| r.gen_bool(0.7)).collect();
            FaceSet::new(&complex, subset)?
        };
        let count = faces.faces().len();
        let p = problem_on(&y, faces)?;
        let lambda = Multiplier::random(n, p.faces().faces().iter().copied(), 1.0, &mut r);
        let delta = Variation::random(y.signature(), 0..cols * rows, 1.0, &mut r);
        let s = p.variational_split(&y.to_section(), &lambda, &delta)?;
        worst.see(s.relative_defect(), || format!("instance {k}"));
        table.push(vec![k.to_string(), count.to_string(), num(s.face_sum), num(s.relative_defect())]);
    }
    let mut report = Report::default();
    report.set("instances", config.verify.instances);
    report.set_num("max_relative_defect", worst.value);
    report.set_num("tolerance", config.tolerances.split);
    report.tables.push(table);
    Ok(Outcome { pass: worst.value <= config.tolerances.split, worst: worst.describe("relative defect"), report })
}

fn cartan(config: &RunConfig) -> Result<Outcome, CliError> {
    let n = config.n;
    let rel = |a: &AlgebraElement, b: &AlgebraElement| (a - b).norm() / a.norm().max(1e-8);
    let mut table = Table::new("instances", &["instance", "origin", "east", "north", "all_vertices"]);
    let mut worst = Worst::new();
    for k in 0..config.verify.instances {
        let mut r = instance_rng(config, k);
        let y = ReducedSection::random(2, 2, n, 2.0, &mut r);
        let p = problem_on(&y, FaceSet::all(&y.complex()?))?;
        let jet = p.jet(&y.to_section(), 0)?;
        let vars: Vec<Vec<AlgebraElement>> =
            (0..3).map(|_| (0..2).map(|_| AlgebraElement::random(n, 1.0, &mut r)).collect()).collect();
        let mut row = vec![k.to_string()];
        let mut sum = AlgebraElement::zeros(n);
        for (local, var) in vars.iter().enumerate() {
            let analytic = PlaquetteConstraint.cartan_form(&jet, local, var);
            let e = rel(&analytic, &fd_constraint_form(&PlaquetteConstraint, &jet, local, var, FD_STEP));
            worst.see(e, || format!("instance {k} local vertex {local}"));
            row.push(num(e));
            sum = &sum + &analytic;
        }
        let move_all = |t: f64| {
            let mut j = jet.clone();
            for (local, var) in vars.iter().enumerate() {
                j = j.perturbed(local, var, t);
            }
            PlaquetteConstraint.evaluate(&j)
        };
        let total = log_near_identity(&(&move_all(-FD_STEP).inverse() * &move_all(FD_STEP)))?.scaled(0.5 / FD_STEP);
        let e = rel(&sum, &total);
        worst.see(e, || format!("instance {k} all vertices"));
        row.push(num(e));
        table.push(row);
    }
    let mut report = Report::default();
    report.set("instances", config.verify.instances);
    report.set_num("step", FD_STEP);
    report.set_num("max_relative_error", worst.value);
    report.set_num("tolerance", config.tolerances.cartan);
    report.tables.push(table);
    Ok(Outcome { pass: worst.value <= config.tolerances.cartan, worst: worst.describe("relative error"), report })
}

fn flatness(config: &RunConfig) -> Result<Outcome, CliError> {
    let n = config.n;
    let tol = config.tolerances.admissibility;
    let mut table = Table::new("instances", &["instance", "round_trip", "path_discrepancy", "tampered", "reported", "defect"]);
    let mut worst = Worst::new();
    let mut missed = Vec::new();
    for k in 0..config.verify.instances {
        let mut r = instance_rng(config, k);
        let g = UnreducedField::random(config.width + 1, config.height + 1, n, 2.0, &mut r);
        let y = reduce(&g)?;
        let seed = g.get(0, 0).expect("full field").clone();
        let (back, diag) = reconstruct_with_report(&y, &seed, tol)?;
        let round = back.max_distance(&g).max(reduce(&back)?.max_distance(&y));
        worst.see(round.max(diag.path_discrepancy), || format!("instance {k}"));

        let (i, j) = (r.gen_range(0..y.cols() - 1), r.gen_range(0..y.rows() - 1));
        let size = 10f64.powf(r.gen_range(-6.0..-2.0));
        let xi = AlgebraElement::random(n, 1.0, &mut r);
        let mut bad = y.clone();
        bad.set_u(i, j, y.u(i, j) * &exp(&xi.scaled(size / xi.norm())))?;
        let (reported, defect) = match reconstruct(&bad, &seed, tol) {
            Err(Error::Holonomy { i: hi, j: hj, defect }) => {
                // u_ij is an edge of its own plaquette and the north edge of the one below
                let named = (hi, hj) == (i, j) || (j > 0 && (hi, hj) == (i, j - 1));
                if !named || defect < 0.5 * size {
                    missed.push(k);
                }
                (format!("{hi} {hj}"), defect)
            }
            Ok(_) => {
                missed.push(k);
                ("none".into(), 0.0)
            }
            Err(e) => return Err(e.into()),
        };
        table.push(vec![
            k.to_string(),
            num(round),
            num(diag.path_discrepancy),
            format!("{i} {j}"),
            reported,
            num(defect),
        ]);
    }
    let mut report = Report::default();
    report.set("instances", config.verify.instances);
    report.set_num("max_round_trip", worst.value);
    report.set_num("tolerance", config.tolerances.roundtrip);
    report.set("tampering_detected", format!("{}/{}", config.verify.instances - missed.len(), config.verify.instances));
    report.tables.push(table);
    let pass = worst.value <= config.tolerances.roundtrip && missed.is_empty();
    let worst = match missed.first() {
        Some(k) => format!("tampering in instance {k} not attributed to an adjacent plaquette"),
        None => worst.describe("round-trip distance"),
    };
    Ok(Outcome { pass, worst, report })
}

fn noether(config: &RunConfig, break_symmetry: bool) -> Result<Outcome, CliError> {
    let pair = critical(config)?;
    let problem = pair.problem()?;
    let section = pair.section.to_section();
    let action = pair.solve.action;
    let bound = config.tolerances.noether * (1.0 + action.abs());
    let mut r = ChaCha8Rng::seed_from_u64(config.verify.seed);
    let mut fields: Vec<(String, Variation)> = Vec::new();
    if break_symmetry {
        let y = &pair.section;
        fields.push(("random".into(), Variation::random(y.signature(), 0..y.cols() * y.rows(), 1.0, &mut r)));
    } else {
        for (k, l) in lielag::liegroup::basis_indices(config.n) {
            let xi = AlgebraElement::basis(config.n, k, l);
            fields.push((format!("conjugation E_{k}{l}"), conjugation_symmetry_field(&pair.section, &xi)));
        }
        let xi = AlgebraElement::random(config.n, 1.0, &mut r);
        fields.push(("conjugation random".into(), conjugation_symmetry_field(&pair.section, &xi)));
    }
    let mut table = Table::new("fields", &["field", "boundary_sum", "lagrangian_defect", "constraint_defect", "symmetry"]);
    let mut worst = Worst::new();
    let mut pass = true;
    for (label, field) in &fields {
        let nr = problem.noether_boundary_sum(&section, pair.multiplier(), field, config.tolerances.admissibility)?;
        let ok = nr.symmetry_verified && nr.boundary_sum.abs() <= bound;
        pass &= ok;
        let badness = if nr.symmetry_verified { nr.boundary_sum.abs() } else { f64::INFINITY };
        worst.see(badness, || {
            if nr.symmetry_verified {
                label.clone()
            } else {
                format!("{label} (not a symmetry: Lagrangian defect {}, constraint defect {})",
                    num(nr.lagrangian_defect), num(nr.constraint_defect))
            }
        });
        table.push(vec![
            label.clone(),
            num(nr.boundary_sum),
            num(nr.lagrangian_defect),
            num(nr.constraint_defect),
            nr.symmetry_verified.to_string(),
        ]);
    }
    let mut report = Report::default();
    report.set_num("action", action);
    report.set_num("bound", bound);
    report.set("fields", fields.len());
    report.tables.push(table);
    Ok(Outcome { pass, worst: worst.describe("|boundary sum|"), report })
}

fn multisymplectic(config: &RunConfig) -> Result<Outcome, CliError> {
    let (w, h, n) = (config.width, config.height, config.n);
    let mut r = ChaCha8Rng::seed_from_u64(config.verify.seed);
    let bumps = [
        BoundaryBump { i: 0, j: h / 2, direction: AlgebraElement::random(n, 1.0, &mut r) },
        BoundaryBump { i: w / 2, j: h, direction: AlgebraElement::random(n, 1.0, &mut r) },
    ];
    let step = config.tolerances.jacobi_step;
    let s = run_multisymplectic_scenario(&config.solver_config(), &boundary(config)?, [&bumps[0], &bumps[1]], step)?;
    let tol = config.tolerances.jacobi;
    let mut table = Table::new("jacobi", &["bump_i", "bump_j", "residual", "admissibility"]);
    for (b, (res, adm)) in bumps.iter().zip(s.jacobi_residuals.iter().zip(&s.jacobi_admissibility)) {
        table.push(vec![b.i.to_string(), b.j.to_string(), num(*res), num(*adm)]);
    }
    let mut report = Report::default();
    report.set_num("step", step);
    report.set_num("base_action", s.base_action);
    report.set_num("defect", s.defect);
    report.set_num("swapped_defect", s.swapped_defect);
    report.set_num("antisymmetry", s.antisymmetry());
    report.set_num("diagonal_defect", s.diagonal_defect);
    report.set_num("tolerance", tol);
    report.tables.push(table);
    let pass = s.passes(tol);
    let worst = if s.jacobi_residuals.iter().any(|x| *x > tol) {
        let k = if s.jacobi_residuals[0] >= s.jacobi_residuals[1] { 0 } else { 1 };
        format!("Jacobi residual {} for the bump at ({}, {})", num(s.jacobi_residuals[k]), bumps[k].i, bumps[k].j)
    } else {
        format!("2-form defect {}", num(s.defect))
    };
    Ok(Outcome { pass, worst, report })
}

fn multipliers(config: &RunConfig) -> Result<Outcome, CliError> {
    let pair = critical(config)?;
    let y = &pair.section;
    let l = TraceLagrangian { n: config.n };
    let mut table = Table::new("vertices", &["i", "j", "first_equation", "second_equation"]);
    let mut worst = Worst::new();
    for (i, j) in y.interior_vertices() {
        let (a, b) = multiplier_system_residual(&l, y, pair.multiplier(), i, j)?;
        worst.see(a.norm().max(b.norm()), || format!("vertex ({i}, {j})"));
        table.push(vec![i.to_string(), j.to_string(), num(a.norm()), num(b.norm())]);
    }
    let mut report = Report::default();
    report.set_num("max_residual", worst.value);
    report.set_num("max_sweep_discrepancy", pair.recovery.max_discrepancy);
    report.set("faces_checked_twice", pair.recovery.checked_faces);
    report.set_num("tolerance", config.tolerances.multiplier);
    report.tables.push(table);
    Ok(Outcome { pass: worst.value <= config.tolerances.multiplier, worst: worst.describe("residual"), report })
}

fn elimination(config: &RunConfig) -> Result<Outcome, CliError> {
    let pair = critical(config)?;
    let defects = elimination_check(&TraceLagrangian { n: config.n }, &pair.section, pair.multiplier())?;
    let t = &config.tolerances;
    let mut table = Table::new("vertices", &["i", "j", "combination", "ep_via_combination", "ep_direct", "cancellation"]);
    let mut pass = true;
    let mut worst = Worst::new();
    for d in &defects {
        pass &= d.cancellation <= t.cancellation && d.ep_via_combination <= t.elimination;
        worst.see((d.cancellation / t.cancellation).max(d.ep_via_combination / t.elimination), || {
            format!("vertex ({}, {}): cancellation {}, EP {}", d.i, d.j, num(d.cancellation), num(d.ep_via_combination))
        });
        table.push(vec![
            d.i.to_string(),
            d.j.to_string(),
            num(d.combination),
            num(d.ep_via_combination),
            num(d.ep_direct),
            num(d.cancellation),
        ]);
    }
    let mut report = Report::default();
    report.set("vertices", defects.len());
    report.set_num("max_cancellation", defects.iter().map(|d| d.cancellation).fold(0.0, f64::max));
    report.set_num("max_ep_via_combination", defects.iter().map(|d| d.ep_via_combination).fold(0.0, f64::max));
    report.set_num("cancellation_tolerance", t.cancellation);
    report.set_num("elimination_tolerance", t.elimination);
    report.tables.push(table);
    Ok(Outcome { pass, worst: worst.at, report })
}

fn regularity(config: &RunConfig, free_frontier: bool) -> Result<Outcome, CliError> {
    let pair = critical(config)?;
    let p = trace_problem(&pair.section)?;
    let section = pair.section.to_section();
    let tol = config.tolerances.regularity;
    let r = p.regularity(&section, !free_frontier, tol)?;
    let interior: Vec<_> = p.classes().interior.iter().copied().collect();
    let columns = if free_frontier { (0..pair.section.cols() * pair.section.rows()).collect() } else { interior };
    let m = p.d_psi_matrix(&section, &columns)?;
    let singular = m.singular_values();
    let rank = singular.iter().filter(|s| **s > tol).count();
    let mut table = Table::new("singular_values", &["index", "value"]);
    let mut sorted: Vec<f64> = singular.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for (k, s) in sorted.iter().enumerate() {
        table.push(vec![k.to_string(), num(*s)]);
    }
    let mut report = Report::default();
    report.set("frontier", if free_frontier { "free" } else { "fixed" });
    report.set("rows", r.rows);
    report.set("columns", r.cols);
    report.set("rank", rank);
    report.set("rank_deficiency", r.rows.saturating_sub(rank));
    report.set("fixed_faces", r.fixed_faces.len());
    report.set_num("sigma_min", r.sigma_min);
    report.set_num("tolerance", tol);
    report.tables.push(table);
    let worst = format!(
        "sigma_min {} with {} of {} constraint rows independent",
        num(r.sigma_min),
        rank,
        r.rows
    );
    Ok(Outcome { pass: r.regular, worst, report })
}
