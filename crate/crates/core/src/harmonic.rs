//! The SO(n) harmonic-map example.
//!
//! Reduced Lagrangian `l(u, v) = tr u + tr v`. Upstairs this is the action
//! `𝒜(g) = Σ_edges tr(g_aᵀ g_b)` over the horizontal and vertical edges of the
//! faces, so critical points are solved for in the unreduced field and then
//! reduced; admissibility of the reduced section is automatic.
//!
//! The solver ascends `𝒜` (equivalently descends the Dirichlet energy
//! `E = n·#edges − 𝒜 ≥ 0`) by Riemannian gradient steps `g ↦ g·exp(t G)` with
//! Armijo backtracking. Trace is maximized at the identity, so a solution is a
//! stationary point; no claim of optimality is made.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::liegroup::{exp, project_to_group, AlgebraElement, CoAlgebraElement, GroupElement, Matrix};
use crate::reduction::{
    ep_residual, recover_multipliers, reduce, reduced_problem, worst_plaquette, PlaquetteConstraint, Recovery,
    RecoveryTolerances, ReducedDensity, ReducedLagrangian, ReducedSection, UnreducedField,
};
use crate::variational::{Multiplier, NoetherReport, Problem, Variation, JACOBI_STEP};

/// `l(u, v) = tr u + tr v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceLagrangian {
    pub n: usize,
}

impl ReducedLagrangian for TraceLagrangian {
    fn value(&self, u: &GroupElement, v: &GroupElement) -> f64 {
        u.trace() + v.trace()
    }

    fn left_differentials(&self, u: &GroupElement, v: &GroupElement) -> (CoAlgebraElement, CoAlgebraElement) {
        (skew_transpose(u), skew_transpose(v))
    }

    fn right_differentials(&self, u: &GroupElement, v: &GroupElement) -> (CoAlgebraElement, CoAlgebraElement) {
        (skew_transpose(u), skew_transpose(v))
    }
}

/// `(gᵀ − g)/2`: the coalgebra element pairing with `E_kl` to `g_lk − g_kl`.
fn skew_transpose(g: &GroupElement) -> CoAlgebraElement {
    CoAlgebraElement::new(g.matrix().transpose()).expect("square")
}

/// The four translated differentials of the trace Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDifferentials {
    pub right_u: CoAlgebraElement,
    pub left_u: CoAlgebraElement,
    pub right_v: CoAlgebraElement,
    pub left_v: CoAlgebraElement,
}

/// `R*_u dl(·, v)`, `L*_u dl(·, v)`, `R*_v dl(u, ·)`, `L*_v dl(u, ·)`.
///
/// `tr` is conjugation invariant, so left and right versions coincide.
pub fn trace_differentials(u: &GroupElement, v: &GroupElement) -> TraceDifferentials {
    TraceDifferentials {
        right_u: skew_transpose(u),
        left_u: skew_transpose(u),
        right_v: skew_transpose(v),
        left_v: skew_transpose(v),
    }
}

/// `M − Mᵀ` with `M = u_ij + v_ij − u_{i−1,j} − v_{i,j−1}`.
///
/// Equals `−2 ×` the Euler–Poincaré residual of [`TraceLagrangian`].
pub fn ep_symmetric_form(y: &ReducedSection, i: usize, j: usize) -> Result<Matrix> {
    if i == 0 || j == 0 || i >= y.cols() || j >= y.rows() {
        return Err(invalid(format!("({i}, {j}) is not an Euler–Poincaré vertex of the section")));
    }
    let m = y.u(i, j).matrix() + y.v(i, j).matrix() - y.u(i - 1, j).matrix() - y.v(i, j - 1).matrix();
    Ok(&m - m.transpose())
}

/// Interior seeding for the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initializer {
    Identity,
    /// Polar projection of the bilinear blend of the four side values, with
    /// identity fallback when the blend is singular.
    #[default]
    BoundaryBlend,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop when every interior gradient has Frobenius norm at most this.
    pub g_tol: f64,
    /// Post-hoc acceptance bound for the Euler–Poincaré residual.
    pub ep_tol: f64,
    /// Sufficient-increase constant of the Armijo test.
    pub armijo: f64,
    /// Step reduction factor on rejection, in `(0, 1)`.
    pub backtrack: f64,
    /// Largest trial step; each search starts at `min(2·t_prev, max_step)`.
    pub max_step: f64,
    pub initializer: Initializer,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            g_tol: 1e-10,
            ep_tol: 1e-8,
            armijo: 1e-4,
            backtrack: 0.5,
            max_step: 0.2,
            initializer: Initializer::BoundaryBlend,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.g_tol > 0.0
            && self.ep_tol > 0.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.max_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid solver configuration {self:?}")))
        }
    }
}

/// Post-hoc residuals at one interior vertex (unreduced coordinates, which
/// coincide with the Euler–Poincaré vertex of the reduced section).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexResidual {
    pub i: usize,
    pub j: usize,
    pub gradient: f64,
    pub ep_residual: f64,
    pub ep_symmetric: f64,
}

/// Solver outcome; every residual is recomputed from the returned field.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Reduced action `Σ l(u, v)` at the solution.
    pub action: f64,
    pub energy: f64,
    pub max_gradient: f64,
    pub max_ep_residual: f64,
    pub max_constraint_residual: f64,
    /// Energy after each accepted step, starting with the initial value.
    pub energy_history: Vec<f64>,
    pub gradient_history: Vec<f64>,
    pub vertices: Vec<VertexResidual>,
}

/// Slack for comparing energies that differ only by round-off.
pub fn energy_slack(energy: f64) -> f64 {
    1e-12 * (1.0 + energy.abs())
}

impl SolveReport {
    /// Whether the recorded energy never increases beyond round-off.
    pub fn is_monotone(&self) -> bool {
        self.energy_history.windows(2).all(|w| w[1] <= w[0] + energy_slack(w[0]))
    }

    /// Gradient, Euler–Poincaré and constraint residuals within tolerance.
    pub fn passes(&self, config: &SolverConfig) -> bool {
        self.max_gradient <= config.g_tol && self.max_ep_residual <= config.ep_tol && self.max_constraint_residual <= 1e-12
    }
}

/// Boundary data on the `(width+1) × (height+1)` vertex window of `grid(width, height)`.
///
/// Every window-edge vertex except the unused corner `(width, height)` is set.
pub fn boundary_from_fn(
    width: usize,
    height: usize,
    mut f: impl FnMut(usize, usize) -> GroupElement,
) -> Result<UnreducedField> {
    UnreducedField::from_fn(width + 1, height + 1, |i, j| {
        let corner = i == width && j == height;
        let edge = i == 0 || j == 0 || i == width || j == height;
        (edge && !corner).then(|| f(i, j))
    })
}

pub fn identity_boundary(width: usize, height: usize, n: usize) -> UnreducedField {
    boundary_from_fn(width, height, |_, _| GroupElement::identity(n)).expect("consistent sizes")
}

/// Boundary values `exp(scale·ξ)`, `ξ` uniform on `[−1, 1]` per `E_kl`
/// coordinate, drawn in row-major vertex order.
pub fn random_boundary<R: Rng + ?Sized>(width: usize, height: usize, n: usize, scale: f64, rng: &mut R) -> UnreducedField {
    boundary_from_fn(width, height, |_, _| exp(&AlgebraElement::random(n, scale, rng))).expect("consistent sizes")
}

struct Window {
    cols: usize,
    rows: usize,
}

impl Window {
    fn of(field: &UnreducedField) -> Result<Self> {
        if field.cols() < 2 || field.rows() < 2 {
            return Err(invalid("a solver window needs at least one face"));
        }
        Ok(Self { cols: field.cols(), rows: field.rows() })
    }

    fn is_corner(&self, i: usize, j: usize) -> bool {
        i + 1 == self.cols && j + 1 == self.rows
    }

    fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.cols && j + 1 < self.rows
    }

    fn interior(&self) -> Vec<(usize, usize)> {
        (1..self.rows - 1).flat_map(|j| (1..self.cols - 1).map(move |i| (i, j))).collect()
    }

    /// Edges of the faces: `((i,j),(i+1,j))` and `((i,j),(i,j+1))` below the top-right.
    fn edges(&self) -> usize {
        2 * (self.cols - 1) * (self.rows - 1)
    }
}

/// Dense working copy with every vertex but the corner populated.
struct State {
    values: Vec<GroupElement>,
    cols: usize,
    rows: usize,
}

impl State {
    fn at(&self, i: usize, j: usize) -> &GroupElement {
        &self.values[j * self.cols + i]
    }

    fn action(&self) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.rows - 1 {
            for i in 0..self.cols - 1 {
                let g = self.at(i, j).matrix();
                sum += g.dot(self.at(i + 1, j).matrix()) + g.dot(self.at(i, j + 1).matrix());
            }
        }
        sum
    }

    /// `Σ_neighbours skew(gᵀ g_n)`: the left-log gradient of the action.
    fn gradient(&self, i: usize, j: usize) -> AlgebraElement {
        let g = self.at(i, j).matrix();
        let mut m = Matrix::zeros(g.nrows(), g.ncols());
        for (a, b) in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
            m += g.transpose() * self.at(a, b).matrix();
        }
        AlgebraElement::new(m).expect("square")
    }

    fn into_field(self, window: &Window) -> UnreducedField {
        let mut values: Vec<Option<GroupElement>> = self.values.into_iter().map(Some).collect();
        values[window.rows * window.cols - 1] = None;
        UnreducedField::new(window.cols, window.rows, values).expect("consistent")
    }
}

fn initial_state(boundary: &UnreducedField, start: Option<&UnreducedField>, init: Initializer) -> Result<(Window, State)> {
    let window = Window::of(boundary)?;
    let n = boundary.n().ok_or_else(|| invalid("boundary carries no values"))?;
    if let Some(s) = start {
        if s.cols() != window.cols || s.rows() != window.rows {
            return Err(invalid("warm start does not match the boundary window"));
        }
    }
    let mut values = Vec::with_capacity(window.cols * window.rows);
    for j in 0..window.rows {
        for i in 0..window.cols {
            let g = if window.is_corner(i, j) {
                GroupElement::identity(n)
            } else if window.is_interior(i, j) {
                match start {
                    Some(s) => s.value(i, j)?.clone(),
                    None => GroupElement::identity(n),
                }
            } else {
                boundary.get(i, j).cloned().ok_or_else(|| invalid(format!("boundary value missing at ({i}, {j})")))?
            };
            if g.dim() != n {
                return Err(invalid("boundary mixes matrix sizes"));
            }
            values.push(g);
        }
    }
    let mut state = State { values, cols: window.cols, rows: window.rows };
    if start.is_none() && init == Initializer::BoundaryBlend {
        let (w, h) = ((window.cols - 1) as f64, (window.rows - 1) as f64);
        for (i, j) in window.interior() {
            let (s, t) = (i as f64 / w, j as f64 / h);
            let blend = state.at(0, j).matrix() * (1.0 - s)
                + state.at(window.cols - 1, j).matrix() * s
                + state.at(i, 0).matrix() * (1.0 - t)
                + state.at(i, window.rows - 1).matrix() * t;
            state.values[j * window.cols + i] = project_to_group(&blend).unwrap_or_else(|_| GroupElement::identity(n));
        }
    }
    Ok((window, state))
}

/// Solve for an interior field at which the action is stationary.
pub fn solve_unreduced(config: &SolverConfig, boundary: &UnreducedField) -> Result<(UnreducedField, SolveReport)> {
    config.validate()?;
    let (window, state) = initial_state(boundary, None, config.initializer)?;
    run_solver(config, window, state)
}

/// As [`solve_unreduced`], starting from the interior of `start`.
pub fn solve_unreduced_from(
    config: &SolverConfig,
    boundary: &UnreducedField,
    start: &UnreducedField,
) -> Result<(UnreducedField, SolveReport)> {
    config.validate()?;
    let (window, state) = initial_state(boundary, Some(start), config.initializer)?;
    run_solver(config, window, state)
}

fn run_solver(config: &SolverConfig, window: Window, mut state: State) -> Result<(UnreducedField, SolveReport)> {
    let interior = window.interior();
    let n = state.values[0].dim();
    let total = (n * window.edges()) as f64;
    let mut action = state.action();
    let mut energy_history = vec![total - action];
    let mut gradient_history = Vec::new();
    let mut step = config.max_step;
    let mut iterations = 0;
    loop {
        let grads: Vec<AlgebraElement> = interior.iter().map(|&(i, j)| state.gradient(i, j)).collect();
        let max_grad = grads.iter().map(AlgebraElement::norm).fold(0.0, f64::max);
        gradient_history.push(max_grad);
        if max_grad <= config.g_tol {
            break;
        }
        if iterations == config.max_iterations {
            return Err(Error::Convergence { iterations, gradient_norm: max_grad, history: gradient_history });
        }
        let slope: f64 = grads.iter().map(|g| g.norm().powi(2)).sum();
        let slack = 0.1 * energy_slack(action);
        let mut t = (2.0 * step).min(config.max_step);
        let accepted = loop {
            let mut trial = State { values: state.values.clone(), cols: state.cols, rows: state.rows };
            for (&(i, j), g) in interior.iter().zip(&grads) {
                trial.values[j * window.cols + i] = state.at(i, j).right_exp(g, t);
            }
            let trial_action = trial.action();
            if trial_action >= action + config.armijo * t * slope - slack {
                break Some((trial, trial_action));
            }
            t *= config.backtrack;
            if t < 1e-20 {
                break None;
            }
        };
        let Some((next, next_action)) = accepted else {
            return Err(Error::Convergence { iterations, gradient_norm: max_grad, history: gradient_history });
        };
        state = next;
        action = next_action;
        step = t;
        iterations += 1;
        energy_history.push(total - action);
    }
    let max_gradient = *gradient_history.last().expect("at least one evaluation");
    let vertex_grads: Vec<f64> = interior.iter().map(|&(i, j)| state.gradient(i, j).norm()).collect();
    let field = state.into_field(&window);
    let y = reduce(&field)?;
    let lagrangian = TraceLagrangian { n };
    let mut vertices = Vec::with_capacity(interior.len());
    for (&(i, j), &gradient) in interior.iter().zip(&vertex_grads) {
        vertices.push(VertexResidual {
            i,
            j,
            gradient,
            ep_residual: ep_residual(&lagrangian, &y, i, j)?.norm(),
            ep_symmetric: ep_symmetric_form(&y, i, j)?.norm(),
        });
    }
    let action = reduced_action(&y);
    let report = SolveReport {
        iterations,
        action,
        energy: total - action,
        max_gradient,
        max_ep_residual: vertices.iter().map(|v| v.ep_residual).fold(0.0, f64::max),
        max_constraint_residual: worst_plaquette(&y).map_or(0.0, |w| w.1),
        energy_history,
        gradient_history,
        vertices,
    };
    Ok((field, report))
}

/// `Σ_ij (tr u_ij + tr v_ij)` over every entry of the section, which equals
/// the unreduced action of any reconstruction.
pub fn reduced_action(y: &ReducedSection) -> f64 {
    let l = TraceLagrangian { n: y.n() };
    (0..y.rows()).flat_map(|j| (0..y.cols()).map(move |i| (i, j))).map(|(i, j)| l.value(y.u(i, j), y.v(i, j))).sum()
}

/// Left-log form of `(uξ − ξu, vξ − ξv)`: `ξ − Ad_{g⁻¹} ξ` per component.
pub fn conjugation_symmetry_field(y: &ReducedSection, xi: &AlgebraElement) -> Variation {
    let mut out = Variation::zero();
    for j in 0..y.rows() {
        for i in 0..y.cols() {
            let part = |g: &GroupElement| xi - &crate::liegroup::adjoint(&g.inverse(), xi);
            out.insert(y.vertex_id(i, j), vec![part(y.u(i, j)), part(y.v(i, j))]);
        }
    }
    out
}

pub type TraceProblem = Problem<ReducedDensity<TraceLagrangian>, PlaquetteConstraint>;

pub fn trace_problem(y: &ReducedSection) -> Result<TraceProblem> {
    reduced_problem(TraceLagrangian { n: y.n() }, y)
}

/// A solved field with its reduction and a recovered multiplier.
#[derive(Debug, Clone)]
pub struct CriticalPair {
    pub field: UnreducedField,
    pub section: ReducedSection,
    pub recovery: Recovery,
    pub solve: SolveReport,
}

impl CriticalPair {
    pub fn multiplier(&self) -> &Multiplier {
        &self.recovery.multiplier
    }

    pub fn problem(&self) -> Result<TraceProblem> {
        trace_problem(&self.section)
    }
}

fn recovery_tolerances(config: &SolverConfig) -> RecoveryTolerances {
    RecoveryTolerances { ep_tol: config.ep_tol, ..RecoveryTolerances::default() }
}

/// Solve, reduce and recover the multiplier from `seed` on the max-corner face.
pub fn critical_pair(config: &SolverConfig, boundary: &UnreducedField, seed: &CoAlgebraElement) -> Result<CriticalPair> {
    let (field, solve) = solve_unreduced(config, boundary)?;
    pair_from_field(config, field, solve, seed)
}

fn pair_from_field(
    config: &SolverConfig,
    field: UnreducedField,
    solve: SolveReport,
    seed: &CoAlgebraElement,
) -> Result<CriticalPair> {
    let section = reduce(&field)?;
    let recovery = recover_multipliers(&TraceLagrangian { n: section.n() }, &section, seed, recovery_tolerances(config))?;
    Ok(CriticalPair { field, section, recovery, solve })
}

/// Tolerance for treating a symmetry condition as satisfied.
pub const SYMMETRY_CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct NoetherScenario {
    pub pair: CriticalPair,
    pub action: f64,
    pub noether: NoetherReport,
    /// `1e-8·(1 + |action|)`.
    pub tolerance: f64,
}

impl NoetherScenario {
    pub fn passes(&self) -> bool {
        self.noether.symmetry_verified && self.noether.boundary_sum.abs() <= self.tolerance
    }

    /// Boundary sum for any other field at the same critical pair.
    pub fn boundary_sum_for(&self, field: &Variation) -> Result<NoetherReport> {
        let problem = self.pair.problem()?;
        problem.noether_boundary_sum(&self.pair.section.to_section(), self.pair.multiplier(), field, SYMMETRY_CHECK_TOL)
    }

    /// A random field with `E_kl` coordinates uniform on `[−1, 1]`.
    pub fn random_field<R: Rng + ?Sized>(&self, rng: &mut R) -> Variation {
        let y = &self.pair.section;
        Variation::random(y.signature(), 0..y.cols() * y.rows(), 1.0, rng)
    }
}

/// Solve, recover multipliers from a zero seed and sum the Cartan form of the
/// conjugation field over the frontier.
pub fn run_noether_scenario(config: &SolverConfig, boundary: &UnreducedField, xi: &AlgebraElement) -> Result<NoetherScenario> {
    let n = boundary.n().ok_or_else(|| invalid("boundary carries no values"))?;
    let pair = critical_pair(config, boundary, &CoAlgebraElement::zeros(n))?;
    let field = conjugation_symmetry_field(&pair.section, xi);
    let problem = pair.problem()?;
    let noether = problem.noether_boundary_sum(&pair.section.to_section(), pair.multiplier(), &field, SYMMETRY_CHECK_TOL)?;
    let action = pair.solve.action;
    Ok(NoetherScenario { pair, action, noether, tolerance: 1e-8 * (1.0 + action.abs()) })
}

/// Boundary perturbation `B ↦ B·exp(h·direction)` at one window-edge vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryBump {
    pub i: usize,
    pub j: usize,
    pub direction: AlgebraElement,
}

impl BoundaryBump {
    fn apply(&self, boundary: &UnreducedField, h: f64) -> Result<UnreducedField> {
        let b = boundary
            .get(self.i, self.j)
            .filter(|_| boundary.is_edge(self.i, self.j))
            .ok_or_else(|| invalid(format!("({}, {}) carries no boundary value", self.i, self.j)))?;
        let mut out = boundary.clone();
        out.set(self.i, self.j, Some(b.right_exp(&self.direction, h)));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultisymplecticScenario {
    pub base_action: f64,
    pub jacobi_residuals: [f64; 2],
    /// `max_α ‖dΨ_α(δy)‖` for each Jacobi field; `O(h)`.
    pub jacobi_admissibility: [f64; 2],
    pub defect: f64,
    pub swapped_defect: f64,
    /// Defect with both arguments equal to the first field.
    pub diagonal_defect: f64,
    pub step: f64,
}

impl MultisymplecticScenario {
    /// `|defect(δ¹, δ²) + defect(δ², δ¹)|`.
    pub fn antisymmetry(&self) -> f64 {
        (self.defect + self.swapped_defect).abs()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.jacobi_residuals.iter().all(|r| *r <= tol) && self.defect.abs() <= tol
    }
}

/// Solve the base problem and two boundary-perturbed ones (warm started from
/// the base), take difference quotients of the critical pairs as Jacobi
/// fields, and evaluate the boundary 2-form defect on them.
pub fn run_multisymplectic_scenario(
    config: &SolverConfig,
    boundary: &UnreducedField,
    bumps: [&BoundaryBump; 2],
    h: f64,
) -> Result<MultisymplecticScenario> {
    if !(h > 0.0) {
        return Err(invalid("the perturbation size must be positive"));
    }
    let n = boundary.n().ok_or_else(|| invalid("boundary carries no values"))?;
    let seed = CoAlgebraElement::zeros(n);
    let base = critical_pair(config, boundary, &seed)?;
    let y = base.section.to_section();
    let lambda = base.multiplier();
    let problem = base.problem()?;
    let mut fields = Vec::with_capacity(2);
    let mut jacobi_residuals = [0.0; 2];
    let mut jacobi_admissibility = [0.0; 2];
    for (k, bump) in bumps.iter().enumerate() {
        let moved_boundary = bump.apply(boundary, h)?;
        let (field, solve) = solve_unreduced_from(config, &moved_boundary, &base.field)?;
        let moved = pair_from_field(config, field, solve, &seed)?;
        let dy = Variation::difference_quotient(&y, &moved.section.to_section(), h)?;
        let dl = moved.multiplier().axpy(-1.0, lambda).scaled(1.0 / h);
        jacobi_residuals[k] = problem.jacobi_residual(&y, lambda, &dy, &dl, h)?;
        jacobi_admissibility[k] = problem.d_psi(&y, &dy)?.values().map(AlgebraElement::norm).fold(0.0, f64::max);
        fields.push((dy, dl));
    }
    let first = (&fields[0].0, &fields[0].1);
    let second = (&fields[1].0, &fields[1].1);
    Ok(MultisymplecticScenario {
        base_action: base.solve.action,
        jacobi_residuals,
        jacobi_admissibility,
        defect: problem.multisymplectic_defect(&y, lambda, first, second, h)?,
        swapped_defect: problem.multisymplectic_defect(&y, lambda, second, first, h)?,
        diagonal_defect: problem.multisymplectic_defect(&y, lambda, first, first, h)?,
        step: h,
    })
}

/// Default perturbation size for Jacobi difference quotients.
pub const DEFAULT_JACOBI_STEP: f64 = JACOBI_STEP;
