//! Sections, variations and the variational calculus of a constrained problem.
//!
//! Variations are stored in left-logarithmic coordinates: the component `ξ`
//! at a vertex whose value is `g` stands for the tangent of `t ↦ g·exp(tξ)`.
//! Lagrangian Cartan forms are covectors in `𝔤*` (one per fiber component);
//! constraint Cartan forms are the left-trivialized partials `Φ⁻¹ ∂_v Φ`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::complex::{classify_vertices, CellComplex, FaceId, FaceSet, VertexClass, VertexId};
use crate::error::{invalid, Result};
use crate::liegroup::{
    algebra_dim, basis_indices, exp, log_near_identity, pairing, AlgebraElement, CoAlgebraElement, GroupElement,
    Matrix,
};

/// Default central finite-difference step for Cartan forms.
pub const FD_STEP: f64 = 1e-6;
/// Default step for Jacobi-field and two-form finite differences.
pub const JACOBI_STEP: f64 = 1e-5;
/// Default admissibility tolerance on `‖Ψ(y) − I‖_F`.
pub const ADMISSIBILITY_TOL: f64 = 1e-10;

/// The values of a section at one vertex.
pub type Fiber = Vec<GroupElement>;
/// A variation at one vertex, in left-log coordinates.
pub type FiberVariation = Vec<AlgebraElement>;
/// A linear functional on a fiber variation, one coalgebra element per component.
pub type Covector = Vec<CoAlgebraElement>;

/// Evaluate a covector on a fiber variation.
pub fn apply_covector(covector: &Covector, variation: &FiberVariation) -> f64 {
    covector.iter().zip(variation).map(|(mu, xi)| pairing(mu, xi)).sum()
}

/// Values `⟨μ_c, E_kl⟩` for every component, concatenated.
pub fn covector_coords(covector: &Covector) -> Vec<f64> {
    covector.iter().flat_map(|mu| mu.dual_coords()).collect()
}

/// Number and size of the group copies forming every vertex fiber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FiberSignature {
    components: usize,
    n: usize,
}

impl FiberSignature {
    pub fn new(components: usize, n: usize) -> Result<Self> {
        if components == 0 || n < 2 {
            return Err(invalid(format!("fiber signature needs c ≥ 1 and n ≥ 2, got c={components}, n={n}")));
        }
        Ok(Self { components, n })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn algebra_dim(&self) -> usize {
        algebra_dim(self.n)
    }

    /// Real dimension of a vertex fiber.
    pub fn fiber_dim(&self) -> usize {
        self.components * self.algebra_dim()
    }

    /// The variation with `E_kl` (basis position `index`) in one component.
    pub fn basis_variation(&self, component: usize, index: usize) -> FiberVariation {
        let (k, l) = basis_indices(self.n).nth(index).expect("basis index in range");
        (0..self.components)
            .map(|c| if c == component { AlgebraElement::basis(self.n, k, l) } else { AlgebraElement::zeros(self.n) })
            .collect()
    }

}

/// A section: vertex → tuple of group elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    signature: FiberSignature,
    values: BTreeMap<VertexId, Fiber>,
}

impl Section {
    pub fn new(signature: FiberSignature, values: BTreeMap<VertexId, Fiber>) -> Result<Self> {
        for (v, fiber) in &values {
            check_fiber(signature, *v, fiber.iter().map(GroupElement::dim), fiber.len())?;
        }
        Ok(Self { signature, values })
    }

    /// The identity element in every component at every listed vertex.
    pub fn identity(signature: FiberSignature, vertices: impl IntoIterator<Item = VertexId>) -> Self {
        let fiber = vec![GroupElement::identity(signature.n); signature.components];
        Self { signature, values: vertices.into_iter().map(|v| (v, fiber.clone())).collect() }
    }

    /// Components `exp(scale·ξ)` with `ξ` uniform on the `E_kl` coordinates.
    pub fn random<R: Rng + ?Sized>(
        signature: FiberSignature,
        vertices: impl IntoIterator<Item = VertexId>,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let values = vertices
            .into_iter()
            .map(|v| {
                let fiber = (0..signature.components)
                    .map(|_| exp(&AlgebraElement::random(signature.n, scale, rng)))
                    .collect();
                (v, fiber)
            })
            .collect();
        Self { signature, values }
    }

    pub fn signature(&self) -> FiberSignature {
        self.signature
    }

    pub fn values(&self) -> &BTreeMap<VertexId, Fiber> {
        &self.values
    }

    pub fn get(&self, v: VertexId) -> Option<&Fiber> {
        self.values.get(&v)
    }

    pub fn fiber(&self, v: VertexId) -> Result<&Fiber> {
        self.values.get(&v).ok_or_else(|| invalid(format!("section has no value at vertex {v}")))
    }

    pub fn set(&mut self, v: VertexId, fiber: Fiber) -> Result<()> {
        check_fiber(self.signature, v, fiber.iter().map(GroupElement::dim), fiber.len())?;
        self.values.insert(v, fiber);
        Ok(())
    }

    /// `y·exp(t δy)` componentwise; vertices absent from `delta` are unchanged.
    pub fn retract(&self, delta: &Variation, t: f64) -> Section {
        let mut out = self.clone();
        for (v, dv) in delta.values() {
            if let Some(fiber) = out.values.get_mut(v) {
                for (g, xi) in fiber.iter_mut().zip(dv) {
                    *g = g.right_exp(xi, t);
                }
            }
        }
        out
    }

    /// Largest Frobenius distance between corresponding components.
    pub fn max_distance(&self, other: &Section) -> f64 {
        self.values
            .iter()
            .map(|(v, f)| match other.values.get(v) {
                Some(g) => f.iter().zip(g).map(|(a, b)| a.distance(b)).fold(0.0, f64::max),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

fn check_fiber(
    signature: FiberSignature,
    v: VertexId,
    dims: impl Iterator<Item = usize>,
    len: usize,
) -> Result<()> {
    if len != signature.components {
        return Err(invalid(format!("vertex {v}: expected {} components, got {len}", signature.components)));
    }
    for d in dims {
        if d != signature.n {
            return Err(invalid(format!("vertex {v}: expected {}x{} matrices, got {d}x{d}", signature.n, signature.n)));
        }
    }
    Ok(())
}

/// An infinitesimal variation in left-log coordinates; absent vertices are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Variation {
    values: BTreeMap<VertexId, FiberVariation>,
}

impl Variation {
    pub fn new(values: BTreeMap<VertexId, FiberVariation>) -> Self {
        Self { values }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(v: VertexId, fiber: FiberVariation) -> Self {
        Self { values: BTreeMap::from([(v, fiber)]) }
    }

    pub fn random<R: Rng + ?Sized>(
        signature: FiberSignature,
        vertices: impl IntoIterator<Item = VertexId>,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let values = vertices
            .into_iter()
            .map(|v| {
                let fiber = (0..signature.components)
                    .map(|_| AlgebraElement::random(signature.n, scale, rng))
                    .collect();
                (v, fiber)
            })
            .collect();
        Self { values }
    }

    /// The one-sided difference quotient `log(y⁻¹ y') / h`.
    pub fn difference_quotient(base: &Section, moved: &Section, h: f64) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (v, fiber) in base.values() {
            let other = moved.fiber(*v)?;
            let mut dv = Vec::with_capacity(fiber.len());
            for (g, g2) in fiber.iter().zip(other) {
                dv.push(log_near_identity(&(&g.inverse() * g2))?.scaled(1.0 / h));
            }
            values.insert(*v, dv);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &BTreeMap<VertexId, FiberVariation> {
        &self.values
    }

    pub fn get(&self, v: VertexId) -> Option<&FiberVariation> {
        self.values.get(&v)
    }

    pub fn insert(&mut self, v: VertexId, fiber: FiberVariation) {
        self.values.insert(v, fiber);
    }

    pub fn scaled(&self, t: f64) -> Self {
        let values = self
            .values
            .iter()
            .map(|(v, f)| (*v, f.iter().map(|x| x.scaled(t)).collect()))
            .collect();
        Self { values }
    }

    /// Restriction to the vertices accepted by `keep`.
    pub fn restricted(&self, mut keep: impl FnMut(VertexId) -> bool) -> Self {
        Self { values: self.values.iter().filter(|(v, _)| keep(**v)).map(|(v, f)| (*v, f.clone())).collect() }
    }

    /// Componentwise Lie bracket of two left-invariant fields.
    pub fn bracket(&self, other: &Variation) -> Self {
        let values = self
            .values
            .iter()
            .filter_map(|(v, a)| other.values.get(v).map(|b| (*v, a.iter().zip(b).map(|(x, y)| x.bracket(y)).collect())))
            .collect();
        Self { values }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.values().flatten().map(AlgebraElement::norm).fold(0.0, f64::max)
    }
}

/// A multiplier: face → coalgebra element; absent faces are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Multiplier {
    values: BTreeMap<FaceId, CoAlgebraElement>,
}

impl Multiplier {
    pub fn new(values: BTreeMap<FaceId, CoAlgebraElement>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize, faces: impl IntoIterator<Item = FaceId>) -> Self {
        Self { values: faces.into_iter().map(|f| (f, CoAlgebraElement::zeros(n))).collect() }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, faces: impl IntoIterator<Item = FaceId>, scale: f64, rng: &mut R) -> Self {
        Self { values: faces.into_iter().map(|f| (f, CoAlgebraElement::random(n, scale, rng))).collect() }
    }

    pub fn values(&self) -> &BTreeMap<FaceId, CoAlgebraElement> {
        &self.values
    }

    pub fn get(&self, f: FaceId) -> Option<&CoAlgebraElement> {
        self.values.get(&f)
    }

    pub fn value(&self, f: FaceId) -> Result<&CoAlgebraElement> {
        self.values.get(&f).ok_or_else(|| invalid(format!("multiplier has no value on face {f}")))
    }

    pub fn insert(&mut self, f: FaceId, mu: CoAlgebraElement) {
        self.values.insert(f, mu);
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { values: self.values.iter().map(|(f, m)| (*f, m.scaled(t))).collect() }
    }

    /// `self + t·other` on the union of supports.
    pub fn axpy(&self, t: f64, other: &Multiplier) -> Self {
        let mut values = self.values.clone();
        for (f, m) in &other.values {
            let scaled = m.scaled(t);
            let sum = match values.get(f) {
                Some(a) => a + &scaled,
                None => scaled,
            };
            values.insert(*f, sum);
        }
        Self { values }
    }

    pub fn max_distance(&self, other: &Multiplier) -> f64 {
        let keys: std::collections::BTreeSet<_> = self.values.keys().chain(other.values.keys()).collect();
        keys.into_iter()
            .map(|f| match (self.values.get(f), other.values.get(f)) {
                (Some(a), Some(b)) => (a - b).norm(),
                (Some(a), None) | (None, Some(a)) => a.norm(),
                (None, None) => 0.0,
            })
            .fold(0.0, f64::max)
    }
}

/// The first jet of a section at a face: fibers in adherence order.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub face: FaceId,
    pub values: Vec<Fiber>,
}

impl Jet1 {
    /// Move the fiber at position `local` along `g·exp(t ξ)`.
    pub fn perturbed(&self, local: usize, variation: &FiberVariation, t: f64) -> Jet1 {
        let mut out = self.clone();
        for (g, xi) in out.values[local].iter_mut().zip(variation) {
            *g = g.right_exp(xi, t);
        }
        out
    }

    fn n(&self) -> usize {
        self.values[0][0].dim()
    }
}

/// A face-local Lagrangian density.
pub trait LagrangianDensity {
    fn evaluate(&self, jet: &Jet1) -> f64;

    /// `Θ^v_α(L)` for the vertex at adherence position `local`.
    fn cartan_form(&self, jet: &Jet1, local: usize) -> Covector {
        fd_lagrangian_form(self, jet, local, FD_STEP)
    }
}

/// Central-difference Cartan form of a Lagrangian along `g·exp(±h E_kl)`.
pub fn fd_lagrangian_form<L: LagrangianDensity + ?Sized>(lagrangian: &L, jet: &Jet1, local: usize, h: f64) -> Covector {
    let n = jet.n();
    let components = jet.values[local].len();
    (0..components)
        .map(|c| {
            let coords: Vec<f64> = basis_indices(n)
                .map(|(k, l)| {
                    let mut var = vec![AlgebraElement::zeros(n); components];
                    var[c] = AlgebraElement::basis(n, k, l);
                    let plus = lagrangian.evaluate(&jet.perturbed(local, &var, h));
                    let minus = lagrangian.evaluate(&jet.perturbed(local, &var, -h));
                    (plus - minus) / (2.0 * h)
                })
                .collect();
            CoAlgebraElement::from_dual_coords(n, &coords)
        })
        .collect()
}

/// A face-local constraint map valued in the group.
pub trait ConstraintMap {
    fn evaluate(&self, jet: &Jet1) -> GroupElement;

    /// `Θ^v_α(Φ)(δy_v) = Φ⁻¹ ∂_v Φ(δy_v)` for the vertex at position `local`.
    fn cartan_form(&self, jet: &Jet1, local: usize, variation: &FiberVariation) -> AlgebraElement {
        fd_constraint_form(self, jet, local, variation, FD_STEP)
    }
}

/// Central-difference Cartan form of a constraint: `log(Φ(−h)⁻¹ Φ(+h)) / 2h`.
pub fn fd_constraint_form<C: ConstraintMap + ?Sized>(
    constraint: &C,
    jet: &Jet1,
    local: usize,
    variation: &FiberVariation,
    h: f64,
) -> AlgebraElement {
    let plus = constraint.evaluate(&jet.perturbed(local, variation, h));
    let minus = constraint.evaluate(&jet.perturbed(local, variation, -h));
    log_near_identity(&(&minus.inverse() * &plus))
        .expect("finite-difference step stays near the identity")
        .scaled(1.0 / (2.0 * h))
}

/// Worst constraint violation over the working faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub max_defect: f64,
    pub worst_face: Option<FaceId>,
}

/// The assembled `dΨ` and its smallest singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub rows: usize,
    pub cols: usize,
    /// Smallest singular value relevant to surjectivity (0 when rows > cols).
    pub sigma_min: f64,
    /// False when there are more rows than columns.
    pub structurally_surjective: bool,
    pub regular: bool,
    /// Faces whose adherent vertices are all fixed (their rows are zero).
    pub fixed_faces: Vec<FaceId>,
}

/// The extended Euler–Lagrange functional at a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ElResidual {
    pub covector: Covector,
    /// `⟨μ_c, E_kl⟩` for every component, concatenated.
    pub coords: Vec<f64>,
    pub norm: f64,
}

/// The two sides of the variational formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitReport {
    pub face_sum: f64,
    pub interior_sum: f64,
    pub boundary_sum: f64,
}

impl SplitReport {
    pub fn defect(&self) -> f64 {
        (self.face_sum - (self.interior_sum + self.boundary_sum)).abs()
    }

    pub fn relative_defect(&self) -> f64 {
        self.defect() / (1.0 + self.face_sum.abs())
    }
}

/// Boundary sum of the Cartan form along a candidate symmetry field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoetherReport {
    pub boundary_sum: f64,
    /// Largest `|(j¹D) L_α|` over faces, along the section.
    pub lagrangian_defect: f64,
    /// Largest `‖(θ∘dΦ_α)(j¹D)‖` over faces, along the section.
    pub constraint_defect: f64,
    /// Both defects are within the check tolerance. The symmetry conditions
    /// are checked along the section only, not on all of the jet bundle.
    pub symmetry_verified: bool,
}

/// A Lagrange problem: complex, working faces, density and constraint.
#[derive(Debug, Clone)]
pub struct Problem<L, C> {
    complex: CellComplex,
    faces: FaceSet,
    classes: VertexClass,
    signature: FiberSignature,
    lagrangian: L,
    constraint: C,
}

impl<L: LagrangianDensity, C: ConstraintMap> Problem<L, C> {
    pub fn new(complex: CellComplex, faces: FaceSet, signature: FiberSignature, lagrangian: L, constraint: C) -> Result<Self> {
        let classes = classify_vertices(&complex, &faces)?;
        Ok(Self { complex, faces, classes, signature, lagrangian, constraint })
    }

    pub fn complex(&self) -> &CellComplex {
        &self.complex
    }

    pub fn faces(&self) -> &FaceSet {
        &self.faces
    }

    pub fn classes(&self) -> &VertexClass {
        &self.classes
    }

    pub fn signature(&self) -> FiberSignature {
        self.signature
    }

    pub fn lagrangian(&self) -> &L {
        &self.lagrangian
    }

    pub fn constraint(&self) -> &C {
        &self.constraint
    }

    pub fn jet(&self, y: &Section, face: FaceId) -> Result<Jet1> {
        let values = self
            .complex
            .adherence(face)
            .iter()
            .map(|&v| y.fiber(v).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(Jet1 { face, values })
    }

    fn check_section(&self, y: &Section) -> Result<()> {
        if y.signature() != self.signature {
            return Err(invalid("section signature does not match the problem"));
        }
        Ok(())
    }

    /// `Σ_α L_α(j¹y(α))` over the working faces.
    pub fn action(&self, y: &Section) -> Result<f64> {
        self.check_section(y)?;
        let mut total = 0.0;
        for &f in self.faces.faces() {
            total += self.lagrangian.evaluate(&self.jet(y, f)?);
        }
        Ok(total)
    }

    /// Constraint value on every working face.
    pub fn psi(&self, y: &Section) -> Result<BTreeMap<FaceId, GroupElement>> {
        self.check_section(y)?;
        self.faces
            .faces()
            .iter()
            .map(|&f| Ok((f, self.constraint.evaluate(&self.jet(y, f)?))))
            .collect()
    }

    pub fn admissibility(&self, y: &Section) -> Result<Admissibility> {
        let mut report = Admissibility { max_defect: 0.0, worst_face: None };
        for (f, g) in self.psi(y)? {
            let d = g.distance_to_identity();
            if report.worst_face.is_none() || d > report.max_defect {
                report = Admissibility { max_defect: d, worst_face: Some(f) };
            }
        }
        Ok(report)
    }

    pub fn is_admissible(&self, y: &Section, tol: f64) -> Result<(bool, Admissibility)> {
        let report = self.admissibility(y)?;
        Ok((report.max_defect <= tol, report))
    }

    /// Images of the basis variations (component-major) under `Θ^v_α(Φ)`.
    /// Forms are applied through this table so that they are exactly linear
    /// even when the constraint relies on finite differences.
    fn constraint_table(&self, jet: &Jet1, local: usize) -> Vec<AlgebraElement> {
        let dim = self.signature.algebra_dim();
        (0..self.signature.components)
            .flat_map(|c| (0..dim).map(move |b| (c, b)))
            .map(|(c, b)| self.constraint.cartan_form(jet, local, &self.signature.basis_variation(c, b)))
            .collect()
    }

    fn apply_table(&self, table: &[AlgebraElement], delta: &FiberVariation) -> AlgebraElement {
        let n = self.signature.n;
        let mut m = Matrix::zeros(n, n);
        for (c, xi) in delta.iter().enumerate() {
            for (b, x) in xi.coords().into_iter().enumerate() {
                if x != 0.0 {
                    m += table[c * self.signature.algebra_dim() + b].matrix() * x;
                }
            }
        }
        AlgebraElement::new(m).expect("square")
    }

    /// `Θ^v_α(Φ)(δ)` for the vertex at adherence position `local`.
    pub fn constraint_form(&self, jet: &Jet1, local: usize, delta: &FiberVariation) -> AlgebraElement {
        self.apply_table(&self.constraint_table(jet, local), delta)
    }

    /// `(θ∘dΦ_α)(j¹δy)` as the sum of per-vertex Cartan forms.
    fn constraint_differential(&self, jet: &Jet1, delta: &Variation) -> AlgebraElement {
        let mut total = AlgebraElement::zeros(self.signature.n);
        for (local, &v) in self.complex.adherence(jet.face).iter().enumerate() {
            if let Some(dv) = delta.get(v) {
                total = &total + &self.constraint_form(jet, local, dv);
            }
        }
        total
    }

    /// `dL_α(j¹δy)` as the sum of per-vertex Cartan forms.
    fn lagrangian_differential(&self, jet: &Jet1, delta: &Variation) -> f64 {
        let mut total = 0.0;
        for (local, &v) in self.complex.adherence(jet.face).iter().enumerate() {
            if let Some(dv) = delta.get(v) {
                total += apply_covector(&self.lagrangian.cartan_form(jet, local), dv);
            }
        }
        total
    }

    /// `(dΨ)_y(δy)` on every working face.
    pub fn d_psi(&self, y: &Section, delta: &Variation) -> Result<BTreeMap<FaceId, AlgebraElement>> {
        self.check_section(y)?;
        self.faces
            .faces()
            .iter()
            .map(|&f| Ok((f, self.constraint_differential(&self.jet(y, f)?, delta))))
            .collect()
    }

    /// The matrix of `dΨ` from the coordinates of the listed vertices to face
    /// algebra coordinates (rows ordered by face, then basis).
    pub fn d_psi_matrix(&self, y: &Section, columns: &[VertexId]) -> Result<DMatrix<f64>> {
        self.check_section(y)?;
        let dim = self.signature.algebra_dim();
        let faces: Vec<FaceId> = self.faces.faces().iter().copied().collect();
        let row_of: BTreeMap<FaceId, usize> = faces.iter().enumerate().map(|(r, f)| (*f, r)).collect();
        let fiber_dim = self.signature.fiber_dim();
        let mut m = DMatrix::zeros(faces.len() * dim, columns.len() * fiber_dim);
        for (ci, &v) in columns.iter().enumerate() {
            for &f in self.complex.star(v) {
                let Some(&r) = row_of.get(&f) else { continue };
                let jet = self.jet(y, f)?;
                let local = self.complex.local_index(f, v).expect("star is the transpose of adherence");
                for (col, image) in self.constraint_table(&jet, local).into_iter().enumerate() {
                    for (k, x) in image.coords().into_iter().enumerate() {
                        m[(r * dim + k, ci * fiber_dim + col)] = x;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Numerical surjectivity test for `dΨ` restricted to the free vertices.
    pub fn regularity(&self, y: &Section, boundary_fixed: bool, rank_tol: f64) -> Result<RegularityReport> {
        let free: Vec<VertexId> = if boundary_fixed {
            self.classes.interior.iter().copied().collect()
        } else {
            self.faces.adherent_vertices().iter().copied().collect()
        };
        let fixed_faces = self
            .faces
            .faces()
            .iter()
            .copied()
            .filter(|&f| self.complex.adherence(f).iter().all(|v| !free.contains(v)))
            .collect();
        let m = self.d_psi_matrix(y, &free)?;
        let (rows, cols) = m.shape();
        let structurally_surjective = rows <= cols && cols > 0;
        let sigma_min = if structurally_surjective {
            m.singular_values().min()
        } else if rows == 0 {
            f64::INFINITY
        } else {
            0.0
        };
        Ok(RegularityReport {
            rows,
            cols,
            sigma_min,
            structurally_surjective,
            regular: structurally_surjective && sigma_min > rank_tol,
            fixed_faces,
        })
    }

    fn require_interior(&self, v: VertexId) -> Result<()> {
        if !self.classes.is_interior(v) {
            return Err(invalid(format!("vertex {v} is not interior to the working faces")));
        }
        Ok(())
    }

    /// `E_v(L) = Σ_{α∈S_v} Θ^v_α(L)` at an interior vertex.
    pub fn euler_lagrange_form(&self, y: &Section, v: VertexId) -> Result<Covector> {
        self.check_section(y)?;
        self.require_interior(v)?;
        let mut total = vec![CoAlgebraElement::zeros(self.signature.n); self.signature.components];
        for &f in self.complex.star(v) {
            let jet = self.jet(y, f)?;
            let local = self.complex.local_index(f, v).expect("adherent");
            for (t, mu) in total.iter_mut().zip(self.lagrangian.cartan_form(&jet, local)) {
                *t = &*t + &mu;
            }
        }
        Ok(total)
    }

    /// The functional `δ ↦ ⟨λ_α, Θ^v_α(Φ)(δ)⟩` as a covector.
    fn constraint_covector(&self, jet: &Jet1, local: usize, lambda: &CoAlgebraElement) -> Covector {
        let n = self.signature.n;
        let table = self.constraint_table(jet, local);
        table
            .chunks(self.signature.algebra_dim())
            .map(|images| {
                let coords: Vec<f64> = images.iter().map(|image| pairing(lambda, image)).collect();
                CoAlgebraElement::from_dual_coords(n, &coords)
            })
            .collect()
    }

    /// `E_v(L) + Σ_{α∈S_v} λ(α)∘Θ^v_α(Φ)` at an interior vertex.
    pub fn extended_el(&self, y: &Section, lambda: &Multiplier, v: VertexId) -> Result<ElResidual> {
        let mut covector = self.euler_lagrange_form(y, v)?;
        for &f in self.complex.star(v) {
            let mu = lambda.value(f)?;
            let jet = self.jet(y, f)?;
            let local = self.complex.local_index(f, v).expect("adherent");
            for (t, m) in covector.iter_mut().zip(self.constraint_covector(&jet, local, mu)) {
                *t = &*t + &m;
            }
        }
        let coords = covector_coords(&covector);
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(ElResidual { covector, coords, norm })
    }

    /// Extended Euler–Lagrange coordinates at every interior vertex, concatenated.
    pub fn extended_el_vector(&self, y: &Section, lambda: &Multiplier) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for &v in &self.classes.interior {
            out.extend(self.extended_el(y, lambda, v)?.coords);
        }
        Ok(out)
    }

    /// Largest extended Euler–Lagrange residual norm over interior vertices.
    pub fn max_extended_el(&self, y: &Section, lambda: &Multiplier) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &v in &self.classes.interior {
            worst = worst.max(self.extended_el(y, lambda, v)?.norm);
        }
        Ok(worst)
    }

    /// `(Θ^v_α(L) + λ_α∘Θ^v_α(Φ))(δ)` for one adherent pair.
    pub fn cartan_one_form(&self, jet: &Jet1, local: usize, lambda: &CoAlgebraElement, delta: &FiberVariation) -> f64 {
        apply_covector(&self.lagrangian.cartan_form(jet, local), delta)
            + pairing(lambda, &self.constraint_form(jet, local, delta))
    }

    /// Cartan form summed over frontier vertices and their working faces.
    pub fn boundary_form(&self, y: &Section, lambda: &Multiplier, delta: &Variation) -> Result<f64> {
        self.check_section(y)?;
        let mut total = 0.0;
        for &v in &self.classes.frontier {
            let Some(dv) = delta.get(v) else { continue };
            for &f in self.complex.star(v) {
                if !self.faces.contains(f) {
                    continue;
                }
                let jet = self.jet(y, f)?;
                let local = self.complex.local_index(f, v).expect("adherent");
                total += self.cartan_one_form(&jet, local, lambda.value(f)?, dv);
            }
        }
        Ok(total)
    }

    /// Both sides of the variational formula for `(δy, ·)`.
    pub fn variational_split(&self, y: &Section, lambda: &Multiplier, delta: &Variation) -> Result<SplitReport> {
        self.check_section(y)?;
        let mut face_sum = 0.0;
        for &f in self.faces.faces() {
            let jet = self.jet(y, f)?;
            face_sum += self.lagrangian_differential(&jet, delta)
                + pairing(lambda.value(f)?, &self.constraint_differential(&jet, delta));
        }
        let mut interior_sum = 0.0;
        for &v in &self.classes.interior {
            if let Some(dv) = delta.get(v) {
                interior_sum += apply_covector(&self.extended_el(y, lambda, v)?.covector, dv);
            }
        }
        let boundary_sum = self.boundary_form(y, lambda, delta)?;
        Ok(SplitReport { face_sum, interior_sum, boundary_sum })
    }

    /// Noether boundary sum for a candidate symmetry field `D` (left-log form).
    ///
    /// The symmetry conditions `(j¹D)L = 0` and `(θ∘dΦ)(j¹D) = 0` are checked
    /// along `img(j¹y)`; the sum is returned whether or not they hold.
    pub fn noether_boundary_sum(
        &self,
        y: &Section,
        lambda: &Multiplier,
        field: &Variation,
        check_tol: f64,
    ) -> Result<NoetherReport> {
        self.check_section(y)?;
        let mut lagrangian_defect: f64 = 0.0;
        let mut constraint_defect: f64 = 0.0;
        for &f in self.faces.faces() {
            let jet = self.jet(y, f)?;
            lagrangian_defect = lagrangian_defect.max(self.lagrangian_differential(&jet, field).abs());
            constraint_defect = constraint_defect.max(self.constraint_differential(&jet, field).norm());
        }
        let boundary_sum = self.boundary_form(y, lambda, field)?;
        Ok(NoetherReport {
            boundary_sum,
            lagrangian_defect,
            constraint_defect,
            symmetry_verified: lagrangian_defect <= check_tol && constraint_defect <= check_tol,
        })
    }

    /// Norm of the central difference of the interior extended Euler–Lagrange
    /// vector along `(δy, δλ)`.
    pub fn jacobi_residual(
        &self,
        y: &Section,
        lambda: &Multiplier,
        delta_y: &Variation,
        delta_lambda: &Multiplier,
        h: f64,
    ) -> Result<f64> {
        let plus = self.extended_el_vector(&y.retract(delta_y, h), &lambda.axpy(h, delta_lambda))?;
        let minus = self.extended_el_vector(&y.retract(delta_y, -h), &lambda.axpy(-h, delta_lambda))?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| ((a - b) / (2.0 * h)).powi(2)).sum::<f64>().sqrt())
    }

    /// `dω(X, Y) = X(ω(Y)) − Y(ω(X)) − ω([X, Y])` for the frontier Cartan form
    /// `ω`, with `X`, `Y` extended as left-invariant fields (constant λ part).
    pub fn multisymplectic_defect(
        &self,
        y: &Section,
        lambda: &Multiplier,
        first: (&Variation, &Multiplier),
        second: (&Variation, &Multiplier),
        h: f64,
    ) -> Result<f64> {
        let derivative = |along: (&Variation, &Multiplier), of: &Variation| -> Result<f64> {
            let plus = self.boundary_form(&y.retract(along.0, h), &lambda.axpy(h, along.1), of)?;
            let minus = self.boundary_form(&y.retract(along.0, -h), &lambda.axpy(-h, along.1), of)?;
            Ok((plus - minus) / (2.0 * h))
        };
        let xy = derivative(first, second.0)?;
        let yx = derivative(second, first.0)?;
        let bracket = self.boundary_form(y, lambda, &first.0.bracket(second.0))?;
        Ok(xy - yx - bracket)
    }
}
