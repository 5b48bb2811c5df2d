//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are reported as FAIL with the reason
//! but do not make the process exit non-zero; every other failure does.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lielag::complex::FaceSet;
use lielag::harmonic::{
    conjugation_symmetry_field, critical_pair, ep_symmetric_form, random_boundary, run_multisymplectic_scenario,
    run_noether_scenario, BoundaryBump, SolverConfig, TraceLagrangian,
};
use lielag::liegroup::{exp, AlgebraElement, CoAlgebraElement};
use lielag::reduction::{
    elimination_check, ep_residual, max_multiplier_residual, reconstruct,
    reconstruct_with_report, recover_multipliers, reduce, PlaquetteConstraint, RecoveryTolerances, ReducedDensity,
    ReducedSection, UnreducedField,
};
use lielag::variational::{fd_constraint_form, ConstraintMap, Multiplier, Problem, Variation, JACOBI_STEP};
use lielag::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 3;

/// Criteria that cannot hold as stated; see the printed reason.
const KNOWN_UNATTAINABLE: &[(u32, &str)] = &[(
    9,
    "with the frontier fixed, the constraint derivative has dependent rows on every grid: the corner \
     plaquette has no free vertex, and the remaining plaquettes satisfy a discrete Stokes relation (their \
     conjugated product is the boundary-loop holonomy, which the frontier fixes)",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tighter than the library default so downstream identities see a clean critical pair.
fn solver() -> SolverConfig {
    SolverConfig { g_tol: 1e-12, ..SolverConfig::default() }
}

fn trace_problem_on(y: &ReducedSection, faces: Option<FaceSet>) -> Problem<ReducedDensity<TraceLagrangian>, PlaquetteConstraint> {
    let complex = y.complex().unwrap();
    let faces = faces.unwrap_or_else(|| FaceSet::all(&complex));
    Problem::new(complex, faces, y.signature(), ReducedDensity(TraceLagrangian { n: N }), PlaquetteConstraint).unwrap()
}

fn variational_split() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut r = rng(seed);
        let y = ReducedSection::random(5, 5, N, 1.5, &mut r);
        let complex = y.complex().unwrap();
        let faces = if seed % 2 == 0 {
            None
        } else {
            let subset: Vec<_> = complex.faces().filter(|_| r.gen_bool(0.7)).collect();
            Some(FaceSet::new(&complex, subset).unwrap())
        };
        let p = trace_problem_on(&y, faces);
        let lambda = Multiplier::random(N, p.faces().faces().iter().copied(), 1.0, &mut r);
        let delta = Variation::random(y.signature(), 0..25, 1.0, &mut r);
        let split = p.variational_split(&y.to_section(), &lambda, &delta).unwrap();
        worst = worst.max(split.relative_defect());
    }
    Outcome { pass: worst <= 1e-12, detail: format!("max |face − (interior + boundary)|/(1+|face|) = {worst:.2e} over 100 instances") }
}

fn cartan_forms() -> Outcome {
    let h = 1e-6;
    let rel = |a: &AlgebraElement, b: &AlgebraElement| (a - b).norm() / a.norm().max(1e-8);
    let (mut worst_vertex, mut worst_total): (f64, f64) = (0.0, 0.0);
    for seed in 0..100u64 {
        let mut r = rng(1000 + seed);
        let y = if seed % 2 == 0 {
            reduce(&UnreducedField::random(3, 3, N, 2.0, &mut r)).unwrap()
        } else {
            ReducedSection::random(2, 2, N, 2.0, &mut r)
        };
        let p = trace_problem_on(&y, None);
        let jet = p.jet(&y.to_section(), 0).unwrap();
        let vars: Vec<Vec<AlgebraElement>> =
            (0..3).map(|_| (0..2).map(|_| AlgebraElement::random(N, 1.0, &mut r)).collect()).collect();
        let mut sum = AlgebraElement::zeros(N);
        for (local, var) in vars.iter().enumerate() {
            let analytic = PlaquetteConstraint.cartan_form(&jet, local, var);
            worst_vertex = worst_vertex.max(rel(&analytic, &fd_constraint_form(&PlaquetteConstraint, &jet, local, var, h)));
            sum = &sum + &analytic;
        }
        // the decomposition: moving all adherent vertices at once
        let move_all = |t: f64| {
            let mut j = jet.clone();
            for (local, var) in vars.iter().enumerate() {
                j = j.perturbed(local, var, t);
            }
            PlaquetteConstraint.evaluate(&j)
        };
        let total = lielag::liegroup::log_near_identity(&(&move_all(-h).inverse() * &move_all(h)))
            .unwrap()
            .scaled(1.0 / (2.0 * h));
        worst_total = worst_total.max(rel(&sum, &total));
    }
    let worst = worst_vertex.max(worst_total);
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("max relative error: per vertex {worst_vertex:.2e}, summed over vertices {worst_total:.2e}"),
    }
}

fn flatness() -> Outcome {
    let (mut round, mut paths): (f64, f64) = (0.0, 0.0);
    let mut detected = 0;
    let mut injected = 0;
    for seed in 0..20u64 {
        let mut r = rng(2000 + seed);
        let g = UnreducedField::random(6, 5, N, 2.0, &mut r);
        let y = reduce(&g).unwrap();
        let (back, rep) = reconstruct_with_report(&y, g.get(0, 0).unwrap(), 1e-10).unwrap();
        round = round.max(back.max_distance(&g)).max(reduce(&back).unwrap().max_distance(&y));
        paths = paths.max(rep.path_discrepancy);
        for _ in 0..5 {
            let (i, j) = (r.gen_range(0..y.cols() - 1), r.gen_range(0..y.rows() - 1));
            let size = 10f64.powf(r.gen_range(-6.0..-2.0));
            let mut xi = AlgebraElement::random(N, 1.0, &mut r);
            xi = xi.scaled(size / xi.norm());
            let mut bad = y.clone();
            bad.set_u(i, j, y.u(i, j) * &exp(&xi)).unwrap();
            injected += 1;
            if let Err(Error::Holonomy { i: hi, j: hj, defect }) = reconstruct(&bad, &g.get(0, 0).unwrap().clone(), 1e-10) {
                // u_ij enters Δ_ij and, as the north edge, Δ_{i,j−1}; both defects have the same size
                let named = (hi, hj) == (i, j) || (j > 0 && (hi, hj) == (i, j - 1));
                if defect >= 0.5 * size && named {
                    detected += 1;
                }
            }
        }
    }
    Outcome {
        pass: round <= 1e-12 && paths <= 1e-12 && detected == injected,
        detail: format!(
            "round trip {round:.2e}, row/column paths {paths:.2e}, tampering detected {detected}/{injected} at a plaquette containing the tampered edge"
        ),
    }
}

fn solver_criterion() -> Outcome {
    let boundary = random_boundary(6, 6, N, 0.1, &mut rng(42));
    match lielag::harmonic::solve_unreduced(&solver(), &boundary) {
        Ok((_, report)) => Outcome {
            pass: report.max_ep_residual <= 1e-8 && report.max_constraint_residual <= 1e-12 && report.is_monotone(),
            detail: format!(
                "{} iterations, EP residual {:.2e}, constraint residual {:.2e}, energy non-increasing: {}",
                report.iterations,
                report.max_ep_residual,
                report.max_constraint_residual,
                report.is_monotone()
            ),
        },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn multiplier_recovery() -> Outcome {
    let boundary = random_boundary(6, 6, N, 0.1, &mut rng(42));
    let pair = match critical_pair(&solver(), &boundary, &CoAlgebraElement::zeros(N)) {
        Ok(p) => p,
        Err(e) => return Outcome { pass: false, detail: e.to_string() },
    };
    let l = TraceLagrangian { n: N };
    let y = &pair.section;
    let residual = max_multiplier_residual(&l, y, pair.multiplier()).unwrap();
    let consistency = pair.recovery.max_discrepancy;
    let seed = CoAlgebraElement::random(N, 1.0, &mut rng(7));
    let other = recover_multipliers(&l, y, &seed, RecoveryTolerances::default()).unwrap();
    let other_residual = max_multiplier_residual(&l, y, &other.multiplier).unwrap();
    let distance = other.multiplier.max_distance(pair.multiplier());
    let every_vertex = y.interior_vertices().count();
    Outcome {
        pass: residual <= 1e-10 && consistency <= 1e-9 && other_residual <= 1e-10 && distance > 1e-3,
        detail: format!(
            "zero seed: residual {residual:.2e} over {every_vertex} vertices, consistency {consistency:.2e}; \
             nonzero seed: residual {other_residual:.2e}, distance from zero-seed λ {distance:.2e}"
        ),
    }
}

fn elimination() -> Outcome {
    let boundary = random_boundary(6, 6, N, 0.1, &mut rng(42));
    let pair = critical_pair(&solver(), &boundary, &CoAlgebraElement::zeros(N)).unwrap();
    let defects = elimination_check(&TraceLagrangian { n: N }, &pair.section, pair.multiplier()).unwrap();
    let cancellation = defects.iter().map(|d| d.cancellation).fold(0.0, f64::max);
    let assembled = defects.iter().map(|d| d.ep_via_combination).fold(0.0, f64::max);
    let agreement = defects.iter().map(|d| (d.ep_via_combination - d.ep_direct).abs()).fold(0.0, f64::max);
    // the cancellation also holds at every interior vertex, not only where the full combination exists
    let y = &pair.section;
    let mut everywhere: f64 = 0.0;
    for (i, j) in y.interior_vertices() {
        for (k, l) in lielag::liegroup::basis_indices(N) {
            let e = CoAlgebraElement::basis(N, k, l);
            let a = lielag::liegroup::coadjoint(y.v(i, j - 1), &lielag::liegroup::coadjoint(y.u(i - 1, j - 1), &e));
            let b = lielag::liegroup::coadjoint(y.u(i - 1, j), &lielag::liegroup::coadjoint(y.v(i - 1, j - 1), &e));
            everywhere = everywhere.max((&a - &b).norm());
        }
    }
    Outcome {
        pass: cancellation <= 1e-12 && everywhere <= 1e-12 && assembled <= 1e-9,
        detail: format!(
            "cancellation {:.2e} (all interior vertices), EP assembled from the system {assembled:.2e} at {} vertices, \
             agreement with direct EP {agreement:.2e}",
            cancellation.max(everywhere),
            defects.len()
        ),
    }
}

fn noether() -> Outcome {
    let boundary = random_boundary(6, 6, N, 0.1, &mut rng(42));
    let xi = AlgebraElement::random(N, 1.0, &mut rng(43));
    let s = match run_noether_scenario(&solver(), &boundary, &xi) {
        Ok(s) => s,
        Err(e) => return Outcome { pass: false, detail: e.to_string() },
    };
    let mut flagged = 0;
    let mut large = 0;
    let trials = 100;
    for seed in 0..trials {
        let report = s.boundary_sum_for(&s.random_field(&mut rng(3000 + seed))).unwrap();
        flagged += usize::from(!report.symmetry_verified);
        large += usize::from(report.boundary_sum.abs() > 1e-3);
    }
    // a second symmetry direction on the same pair
    let other = conjugation_symmetry_field(&s.pair.section, &AlgebraElement::basis(N, 1, 2));
    let second = s.boundary_sum_for(&other).unwrap();
    let sum = s.noether.boundary_sum.abs().max(second.boundary_sum.abs());
    let fraction = large as f64 / trials as f64;
    Outcome {
        pass: s.passes() && second.symmetry_verified && sum <= s.tolerance && fraction >= 0.95,
        detail: format!(
            "|boundary sum| {sum:.2e} (bound {:.2e}); random fields above 1e-3: {large}/{trials}, flagged {flagged}/{trials}",
            s.tolerance
        ),
    }
}

fn multisymplectic() -> Outcome {
    let boundary = random_boundary(6, 6, N, 0.1, &mut rng(42));
    let mut r = rng(44);
    let bumps = [
        BoundaryBump { i: 0, j: 3, direction: AlgebraElement::random(N, 1.0, &mut r) },
        BoundaryBump { i: 4, j: 6, direction: AlgebraElement::random(N, 1.0, &mut r) },
    ];
    match run_multisymplectic_scenario(&solver(), &boundary, [&bumps[0], &bumps[1]], JACOBI_STEP) {
        Ok(s) => Outcome {
            pass: s.passes(1e-4) && s.antisymmetry() <= 1e-12 && s.diagonal_defect.abs() <= 1e-12,
            detail: format!(
                "Jacobi residuals {:.2e}, {:.2e}; defect {:.2e}; |ω(δ¹,δ²)+ω(δ²,δ¹)| {:.2e}; ω(δ¹,δ¹) {:.2e}",
                s.jacobi_residuals[0],
                s.jacobi_residuals[1],
                s.defect,
                s.antisymmetry(),
                s.diagonal_defect.abs()
            ),
        },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn regularity() -> Outcome {
    let mut worst: f64 = f64::INFINITY;
    let mut worst_free: f64 = f64::INFINITY;
    let mut shapes = Vec::new();
    for size in [3usize, 4] {
        for seed in 0..5u64 {
            let mut r = rng(4000 + seed);
            let y = reduce(&UnreducedField::random(size + 2, size + 2, N, 1.0, &mut r)).unwrap();
            let p = trace_problem_on(&y, None);
            let section = y.to_section();
            let report = p.regularity(&section, true, 1e-8).unwrap();
            worst = worst.min(report.sigma_min);
            // informational: the rank deficiency, and the same check with a free frontier
            worst_free = worst_free.min(p.regularity(&section, false, 1e-8).unwrap().sigma_min);
            if seed == 0 {
                let interior: Vec<_> = p.classes().interior.iter().copied().collect();
                let m = p.d_psi_matrix(&section, &interior).unwrap();
                let rank = m.singular_values().iter().filter(|s| **s > 1e-8).count();
                shapes.push(format!(
                    "{size}x{size}: {} rows, {} columns, rank {rank}, {} fixed face(s)",
                    report.rows,
                    report.cols,
                    report.fixed_faces.len()
                ));
            }
        }
    }
    Outcome {
        pass: worst > 1e-8,
        detail: format!("min σ_min {worst:.2e} ({}); with a free frontier min σ_min {worst_free:.2e}", shapes.join("; ")),
    }
}

fn two_path_ep() -> Outcome {
    let l = TraceLagrangian { n: N };
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut r = rng(5000 + seed);
        let y = if seed % 2 == 0 {
            ReducedSection::random(5, 5, N, 2.0, &mut r)
        } else {
            reduce(&UnreducedField::random(6, 6, N, 2.0, &mut r)).unwrap()
        };
        for (i, j) in y.ep_vertices() {
            let sym = ep_symmetric_form(&y, i, j).unwrap();
            let general = ep_residual(&l, &y, i, j).unwrap();
            worst = worst.max((sym + general.matrix() * 2.0).norm());
        }
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max ‖(M − Mᵀ) + 2·residual‖ = {worst:.2e} over 100 sections (symmetric form = −2 × residual)"),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 10] = [
        (1, "variational split", variational_split, Duration::from_secs(5)),
        (2, "Cartan forms of the plaquette constraint", cartan_forms, Duration::from_secs(5)),
        (3, "flatness and reconstruction", flatness, Duration::from_secs(2)),
        (4, "solver", solver_criterion, Duration::from_secs(30)),
        (5, "multiplier recovery", multiplier_recovery, Duration::from_secs(60)),
        (6, "multiplier elimination", elimination, Duration::from_secs(60)),
        (7, "Noether boundary identity", noether, Duration::from_secs(60)),
        (8, "multisymplectic form formula", multisymplectic, Duration::from_secs(120)),
        (9, "regularity with fixed frontier", regularity, Duration::from_secs(60)),
        (10, "two-path Euler–Poincaré agreement", two_path_ep, Duration::from_secs(60)),
    ];
    let mut unexpected = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        let known = KNOWN_UNATTAINABLE.iter().find(|(k, _)| *k == id);
        let mut line = format!(
            "{} {id:>2} {name}: {} [{:.2} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            match known {
                Some((_, reason)) => line.push_str(&format!(" (known: {reason})")),
                None => unexpected += 1,
            }
        }
        println!("{line}");
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
