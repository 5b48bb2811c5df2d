use lielag::harmonic::{critical_pair, random_boundary, trace_problem, SolverConfig, TraceLagrangian};
use lielag::io::FieldFile;
use lielag::liegroup::{algebra_dim, CoAlgebraElement, GroupElement};
use lielag::reduction::{max_multiplier_residual, reconstruct, reduce, UnreducedField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config() -> SolverConfig {
    SolverConfig { g_tol: 1e-12, ..SolverConfig::default() }
}

#[test]
fn solve_write_read_reconstruct() {
    let boundary = random_boundary(5, 4, 3, 0.2, &mut ChaCha8Rng::seed_from_u64(1));
    let pair = critical_pair(&config(), &boundary, &CoAlgebraElement::zeros(3)).unwrap();

    let mut buf = Vec::new();
    FieldFile::from(&pair.section).write(&mut buf).unwrap();
    let section = FieldFile::read(buf.as_slice()).unwrap().to_reduced().unwrap();
    assert!(section.max_distance(&pair.section) < 1e-14);

    let field = reconstruct(&section, pair.field.get(0, 0).unwrap(), 1e-10).unwrap();
    assert!(field.max_distance(&pair.field) < 1e-12);

    let mut buf = Vec::new();
    let (cols, rows) = (section.cols() - 1, section.rows() - 1);
    FieldFile::from_multiplier(pair.multiplier(), 3, cols, rows).write(&mut buf).unwrap();
    let lambda = FieldFile::read(buf.as_slice()).unwrap().to_multiplier().unwrap();
    assert!(max_multiplier_residual(&TraceLagrangian { n: 3 }, &section, &lambda).unwrap() < 1e-10);
}

#[test]
fn recovered_multiplier_makes_the_extended_equations_hold() {
    let boundary = random_boundary(5, 5, 3, 0.2, &mut ChaCha8Rng::seed_from_u64(2));
    let pair = critical_pair(&config(), &boundary, &CoAlgebraElement::zeros(3)).unwrap();
    let p = pair.problem().unwrap();
    assert!(p.max_extended_el(&pair.section.to_section(), pair.multiplier()).unwrap() < 1e-10);
}

#[test]
fn fixing_the_frontier_costs_two_algebra_dimensions_of_rank() {
    // One for the corner face with no free vertex, one for the Stokes relation
    // tying the product of plaquette holonomies to the fixed boundary loop.
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for size in [3usize, 4, 5] {
        let y = reduce(&UnreducedField::random(size + 2, size + 2, 3, 1.0, &mut r)).unwrap();
        let p = trace_problem(&y).unwrap();
        let section = y.to_section();
        let interior: Vec<_> = p.classes().interior.iter().copied().collect();
        let m = p.d_psi_matrix(&section, &interior).unwrap();
        let rank = m.singular_values().iter().filter(|s| **s > 1e-8).count();
        assert_eq!(m.nrows() - rank, 2 * algebra_dim(3), "size {size}");
        assert!(p.regularity(&section, false, 1e-8).unwrap().regular);
        assert!(!p.regularity(&section, true, 1e-8).unwrap().regular);
    }
}

#[test]
fn identity_problem_has_zero_everything() {
    let boundary = lielag::harmonic::identity_boundary(3, 3, 3);
    let pair = critical_pair(&config(), &boundary, &CoAlgebraElement::zeros(3)).unwrap();
    assert_eq!(pair.solve.iterations, 0);
    assert!(pair.multiplier().values().values().all(CoAlgebraElement::is_zero));
    assert_eq!(pair.solve.action, 2.0 * 9.0 * 3.0);
    assert!(pair.field.get(1, 1).unwrap().distance(&GroupElement::identity(3)) == 0.0);
}
