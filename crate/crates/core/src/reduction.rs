//! Euler–Poincaré reduction on the triangulated plane.
//!
//! An unreduced field `g` lives on the vertices of a `cols × rows` window.
//! Its reduction `u_ij = g_ij⁻¹ g_{i+1,j}`, `v_ij = g_ij⁻¹ g_{i,j+1}` lives on
//! a `(cols − 1) × (rows − 1)` array, which is the vertex set of the reduced
//! complex `grid(cols − 2, rows − 2)`; reduced vertex `(i, j)` has id
//! `j·(section cols) + i`, matching [`CellComplex::build_triangulated_grid`].
//!
//! Coalgebra-valued differentials follow the trace-pairing representation:
//! `R*_u dl(·, v)` is the element `μ` with `⟨μ, ξ⟩ = d/dt l(exp(tξ)·u, v)` and
//! `L*_u dl(·, v)` uses `u·exp(tξ)` instead; `R*_u = Ad*_{u⁻¹} ∘ L*_u`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::complex::{CellComplex, FaceId, FaceSet};
use crate::error::{invalid, Error, Result};
use crate::liegroup::{
    adjoint, algebra_dim, basis_indices, coadjoint, exp, AlgebraElement, CoAlgebraElement, GroupElement,
};
use crate::variational::{
    Covector, ConstraintMap, FiberSignature, FiberVariation, Jet1, LagrangianDensity, Multiplier, Problem, Section,
    Variation, FD_STEP,
};

/// Group-valued field on the vertices of a `cols × rows` window (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct UnreducedField {
    cols: usize,
    rows: usize,
    values: Vec<Option<GroupElement>>,
}

impl UnreducedField {
    pub fn new(cols: usize, rows: usize, values: Vec<Option<GroupElement>>) -> Result<Self> {
        if values.len() != cols * rows {
            return Err(invalid(format!("expected {} values for a {cols}x{rows} field, got {}", cols * rows, values.len())));
        }
        let mut dims = values.iter().flatten().map(GroupElement::dim);
        if let Some(n) = dims.next() {
            if dims.any(|d| d != n) {
                return Err(invalid("field mixes matrix sizes"));
            }
        }
        Ok(Self { cols, rows, values })
    }

    pub fn from_fn(cols: usize, rows: usize, mut f: impl FnMut(usize, usize) -> Option<GroupElement>) -> Result<Self> {
        let values = (0..rows).flat_map(|j| (0..cols).map(move |i| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self::new(cols, rows, values)
    }

    pub fn constant(cols: usize, rows: usize, g: &GroupElement) -> Self {
        Self { cols, rows, values: vec![Some(g.clone()); cols * rows] }
    }

    /// Every value `exp(scale·ξ)` with `ξ` uniform on the `E_kl` coordinates.
    pub fn random<R: Rng + ?Sized>(cols: usize, rows: usize, n: usize, scale: f64, rng: &mut R) -> Self {
        let values = (0..cols * rows).map(|_| Some(exp(&AlgebraElement::random(n, scale, rng)))).collect();
        Self { cols, rows, values }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Matrix size, if any value is present.
    pub fn n(&self) -> Option<usize> {
        self.values.iter().flatten().next().map(GroupElement::dim)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&GroupElement> {
        if i < self.cols && j < self.rows {
            self.values[j * self.cols + i].as_ref()
        } else {
            None
        }
    }

    pub fn value(&self, i: usize, j: usize) -> Result<&GroupElement> {
        self.get(i, j).ok_or_else(|| invalid(format!("field has no value at ({i}, {j})")))
    }

    pub fn set(&mut self, i: usize, j: usize, g: Option<GroupElement>) {
        self.values[j * self.cols + i] = g;
    }

    /// Whether `(i, j)` lies on the window edge.
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.cols || j + 1 == self.rows
    }

    /// `h·g` at every vertex.
    pub fn left_multiplied(&self, h: &GroupElement) -> Self {
        let values = self.values.iter().map(|g| g.as_ref().map(|g| h * g)).collect();
        Self { cols: self.cols, rows: self.rows, values }
    }

    /// Largest distance over vertices where both fields are defined.
    pub fn max_distance(&self, other: &UnreducedField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| Some(a.as_ref()?.distance(b.as_ref()?)))
            .fold(0.0, f64::max)
    }

    pub fn values(&self) -> &[Option<GroupElement>] {
        &self.values
    }
}

/// The `(u, v)` pair field on a `cols × rows` array.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSection {
    cols: usize,
    rows: usize,
    u: Vec<GroupElement>,
    v: Vec<GroupElement>,
}

impl ReducedSection {
    pub fn new(cols: usize, rows: usize, u: Vec<GroupElement>, v: Vec<GroupElement>) -> Result<Self> {
        if cols == 0 || rows == 0 || u.len() != cols * rows || v.len() != cols * rows {
            return Err(invalid(format!("reduced section shape mismatch for {cols}x{rows}")));
        }
        let n = u[0].dim();
        if u.iter().chain(&v).any(|g| g.dim() != n) {
            return Err(invalid("reduced section mixes matrix sizes"));
        }
        Ok(Self { cols, rows, u, v })
    }

    pub fn identity(cols: usize, rows: usize, n: usize) -> Self {
        let id = GroupElement::identity(n);
        Self { cols, rows, u: vec![id.clone(); cols * rows], v: vec![id; cols * rows] }
    }

    pub fn random<R: Rng + ?Sized>(cols: usize, rows: usize, n: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = || exp(&AlgebraElement::random(n, scale, rng));
        let u = (0..cols * rows).map(|_| draw()).collect();
        let v = (0..cols * rows).map(|_| draw()).collect();
        Self { cols, rows, u, v }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn n(&self) -> usize {
        self.u[0].dim()
    }

    fn index(&self, i: usize, j: usize) -> Result<usize> {
        if i < self.cols && j < self.rows {
            Ok(j * self.cols + i)
        } else {
            Err(invalid(format!("({i}, {j}) is outside the {}x{} section", self.cols, self.rows)))
        }
    }

    pub fn u(&self, i: usize, j: usize) -> &GroupElement {
        &self.u[j * self.cols + i]
    }

    pub fn v(&self, i: usize, j: usize) -> &GroupElement {
        &self.v[j * self.cols + i]
    }

    pub fn set_u(&mut self, i: usize, j: usize, g: GroupElement) -> Result<()> {
        let k = self.index(i, j)?;
        self.u[k] = g;
        Ok(())
    }

    pub fn set_v(&mut self, i: usize, j: usize, g: GroupElement) -> Result<()> {
        let k = self.index(i, j)?;
        self.v[k] = g;
        Ok(())
    }

    /// Vertex id in the reduced complex.
    pub fn vertex_id(&self, i: usize, j: usize) -> usize {
        j * self.cols + i
    }

    /// Face id of `Δ_ij` in the reduced complex.
    pub fn face_id(&self, i: usize, j: usize) -> FaceId {
        j * (self.cols - 1) + i
    }

    /// `grid(cols − 1, rows − 1)`: the complex whose vertices carry this section.
    pub fn complex(&self) -> Result<CellComplex> {
        if self.cols < 2 || self.rows < 2 {
            return Err(invalid("a reduced complex needs at least a 2x2 section"));
        }
        CellComplex::build_triangulated_grid(self.cols - 1, self.rows - 1)
    }

    pub fn signature(&self) -> FiberSignature {
        FiberSignature::new(2, self.n()).expect("n ≥ 2 for group elements used here")
    }

    pub fn to_section(&self) -> Section {
        let values = (0..self.u.len()).map(|k| (k, vec![self.u[k].clone(), self.v[k].clone()])).collect();
        Section::new(self.signature(), values).expect("consistent by construction")
    }

    pub fn from_section(cols: usize, rows: usize, section: &Section) -> Result<Self> {
        if section.signature().components() != 2 {
            return Err(invalid("a reduced section has two components per vertex"));
        }
        let mut u = Vec::with_capacity(cols * rows);
        let mut v = Vec::with_capacity(cols * rows);
        for k in 0..cols * rows {
            let fiber = section.fiber(k)?;
            u.push(fiber[0].clone());
            v.push(fiber[1].clone());
        }
        Self::new(cols, rows, u, v)
    }

    pub fn max_distance(&self, other: &ReducedSection) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }

    /// Vertices `(i, j)`, `1 ≤ i < cols`, `1 ≤ j < rows`, where the
    /// Euler–Poincaré equations are posed.
    pub fn ep_vertices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.rows).flat_map(move |j| (1..self.cols).map(move |i| (i, j)))
    }

    /// Interior vertices of the reduced complex: `1 ≤ i ≤ cols − 2`, `1 ≤ j ≤ rows − 2`.
    pub fn interior_vertices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.rows.saturating_sub(1)).flat_map(move |j| (1..self.cols.saturating_sub(1)).map(move |i| (i, j)))
    }

    /// Faces `Δ_ij` of the reduced complex.
    pub fn plaquettes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows.saturating_sub(1)).flat_map(move |j| (0..self.cols.saturating_sub(1)).map(move |i| (i, j)))
    }
}

/// Infinitesimal gauge transformation: one algebra element per unreduced vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    cols: usize,
    rows: usize,
    values: Vec<AlgebraElement>,
}

impl GaugeField {
    pub fn new(cols: usize, rows: usize, values: Vec<AlgebraElement>) -> Result<Self> {
        if values.len() != cols * rows {
            return Err(invalid("gauge field shape mismatch"));
        }
        Ok(Self { cols, rows, values })
    }

    pub fn constant(cols: usize, rows: usize, xi: &AlgebraElement) -> Self {
        Self { cols, rows, values: vec![xi.clone(); cols * rows] }
    }

    /// Random values, zero on the window edge when `vanish_on_edge` is set.
    pub fn random<R: Rng + ?Sized>(cols: usize, rows: usize, n: usize, vanish_on_edge: bool, rng: &mut R) -> Self {
        let values = (0..cols * rows)
            .map(|k| {
                let (i, j) = (k % cols, k / cols);
                let edge = i == 0 || j == 0 || i + 1 == cols || j + 1 == rows;
                if vanish_on_edge && edge {
                    AlgebraElement::zeros(n)
                } else {
                    AlgebraElement::random(n, 1.0, rng)
                }
            })
            .collect();
        Self { cols, rows, values }
    }

    pub fn get(&self, i: usize, j: usize) -> &AlgebraElement {
        &self.values[j * self.cols + i]
    }
}

/// `u_ij = g_ij⁻¹ g_{i+1,j}`, `v_ij = g_ij⁻¹ g_{i,j+1}` on the `(cols−1) × (rows−1)` array.
pub fn reduce(g: &UnreducedField) -> Result<ReducedSection> {
    if g.cols < 2 || g.rows < 2 {
        return Err(invalid("reduction needs at least a 2x2 field"));
    }
    let (c, r) = (g.cols - 1, g.rows - 1);
    let mut u = Vec::with_capacity(c * r);
    let mut v = Vec::with_capacity(c * r);
    for j in 0..r {
        for i in 0..c {
            let inv = g.value(i, j)?.inverse();
            u.push(&inv * g.value(i + 1, j)?);
            v.push(&inv * g.value(i, j + 1)?);
        }
    }
    ReducedSection::new(c, r, u, v)
}

/// `Φ(Δ_ij) = u_ij v_{i+1,j} u_{i,j+1}⁻¹ v_ij⁻¹`.
pub fn plaquette_constraint(y: &ReducedSection, i: usize, j: usize) -> Result<GroupElement> {
    if i + 1 >= y.cols || j + 1 >= y.rows {
        return Err(invalid(format!("plaquette ({i}, {j}) is outside the section window")));
    }
    Ok(&(&(y.u(i, j) * y.v(i + 1, j)) * &y.u(i, j + 1).inverse()) * &y.v(i, j).inverse())
}

/// Worst plaquette `((i, j), ‖Φ − I‖)`, or `None` when there is no plaquette.
pub fn worst_plaquette(y: &ReducedSection) -> Option<((usize, usize), f64)> {
    y.plaquettes()
        .map(|(i, j)| ((i, j), plaquette_constraint(y, i, j).expect("in window").distance_to_identity()))
        .fold(None, |acc, item| match acc {
            Some((_, d)) if d >= item.1 => acc,
            _ => Some(item),
        })
}

/// Cartan forms of the plaquette constraint at `Δ_ij`, in left-log coordinates.
///
/// The forms are the left-trivialized partials `Φ⁻¹ ∂Φ`; with `Φ = e` they
/// reduce to `δu u⁻¹ − δv v⁻¹`, `−Ad_v(δu' u'⁻¹)` and `Ad_u(δv' v'⁻¹)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaquetteForms {
    /// `Φ⁻¹ u_ij`: conjugator for the `u` slot at the origin vertex.
    origin_u: GroupElement,
    /// `v_ij`: conjugator for the `v` slot at the origin vertex.
    origin_v: GroupElement,
    /// `v_ij u_{i,j+1}`: conjugator for the east and north vertices.
    cross: GroupElement,
}

impl PlaquetteForms {
    fn from_factors(u0: &GroupElement, v0: &GroupElement, u2: &GroupElement, phi: &GroupElement) -> Self {
        Self { origin_u: &phi.inverse() * u0, origin_v: v0.clone(), cross: v0 * u2 }
    }

    /// Vertex `(i, j)`: `(ξ, η) ↦ Ad_{Φ⁻¹u} ξ − Ad_v η`.
    pub fn origin(&self, du: &AlgebraElement, dv: &AlgebraElement) -> AlgebraElement {
        &adjoint(&self.origin_u, du) - &adjoint(&self.origin_v, dv)
    }

    /// Vertex `(i+1, j)`, `v` slot: `κ ↦ Ad_{v u'} κ`.
    pub fn east(&self, dv: &AlgebraElement) -> AlgebraElement {
        adjoint(&self.cross, dv)
    }

    /// Vertex `(i, j+1)`, `u` slot: `ζ ↦ −Ad_{v u'} ζ`.
    pub fn north(&self, du: &AlgebraElement) -> AlgebraElement {
        -&adjoint(&self.cross, du)
    }
}

/// Cartan forms of `Φ` at an admissible plaquette.
pub fn constraint_cartan_forms(y: &ReducedSection, i: usize, j: usize, tol: f64) -> Result<PlaquetteForms> {
    let phi = plaquette_constraint(y, i, j)?;
    let defect = phi.distance_to_identity();
    if defect > tol {
        return Err(invalid(format!("plaquette ({i}, {j}) is not admissible (defect {defect:e})")));
    }
    Ok(PlaquetteForms::from_factors(y.u(i, j), y.v(i, j), y.u(i, j + 1), &phi))
}

/// A Lagrangian `l(u, v)` on the reduced fiber `G × G`.
pub trait ReducedLagrangian {
    fn value(&self, u: &GroupElement, v: &GroupElement) -> f64;

    /// `(L*_u dl(·, v), L*_v dl(u, ·))`, defaulting to central differences.
    fn left_differentials(&self, u: &GroupElement, v: &GroupElement) -> (CoAlgebraElement, CoAlgebraElement) {
        let n = u.dim();
        let h = FD_STEP;
        let partial = |first: bool| {
            let coords: Vec<f64> = basis_indices(n)
                .map(|(k, l)| {
                    let e = AlgebraElement::basis(n, k, l);
                    let (plus, minus) = if first {
                        (self.value(&u.right_exp(&e, h), v), self.value(&u.right_exp(&e, -h), v))
                    } else {
                        (self.value(u, &v.right_exp(&e, h)), self.value(u, &v.right_exp(&e, -h)))
                    };
                    (plus - minus) / (2.0 * h)
                })
                .collect();
            CoAlgebraElement::from_dual_coords(n, &coords)
        };
        (partial(true), partial(false))
    }

    /// `(R*_u dl(·, v), R*_v dl(u, ·))`.
    fn right_differentials(&self, u: &GroupElement, v: &GroupElement) -> (CoAlgebraElement, CoAlgebraElement) {
        let (lu, lv) = self.left_differentials(u, v);
        (coadjoint(&u.inverse(), &lu), coadjoint(&v.inverse(), &lv))
    }
}

/// Face density `L_{Δ_ij} = l(u_ij, v_ij)`, reading the origin vertex only.
#[derive(Debug, Clone)]
pub struct ReducedDensity<L>(pub L);

impl<L: ReducedLagrangian> LagrangianDensity for ReducedDensity<L> {
    fn evaluate(&self, jet: &Jet1) -> f64 {
        self.0.value(&jet.values[0][0], &jet.values[0][1])
    }

    fn cartan_form(&self, jet: &Jet1, local: usize) -> Covector {
        if local == 0 {
            let (du, dv) = self.0.left_differentials(&jet.values[0][0], &jet.values[0][1]);
            vec![du, dv]
        } else {
            let n = jet.values[0][0].dim();
            vec![CoAlgebraElement::zeros(n); 2]
        }
    }
}

/// The plaquette constraint with analytic Cartan forms valid off the constraint set.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlaquetteConstraint;

impl ConstraintMap for PlaquetteConstraint {
    fn evaluate(&self, jet: &Jet1) -> GroupElement {
        let (u0, v0) = (&jet.values[0][0], &jet.values[0][1]);
        let v1 = &jet.values[1][1];
        let u2 = &jet.values[2][0];
        &(&(u0 * v1) * &u2.inverse()) * &v0.inverse()
    }

    fn cartan_form(&self, jet: &Jet1, local: usize, variation: &FiberVariation) -> AlgebraElement {
        let phi = self.evaluate(jet);
        let forms = PlaquetteForms::from_factors(&jet.values[0][0], &jet.values[0][1], &jet.values[2][0], &phi);
        match local {
            0 => forms.origin(&variation[0], &variation[1]),
            1 => forms.east(&variation[1]),
            2 => forms.north(&variation[0]),
            _ => AlgebraElement::zeros(phi.dim()),
        }
    }
}

/// The reduced Lagrange problem over every face of the section's complex.
pub fn reduced_problem<L: ReducedLagrangian>(
    lagrangian: L,
    y: &ReducedSection,
) -> Result<Problem<ReducedDensity<L>, PlaquetteConstraint>> {
    let complex = y.complex()?;
    let faces = FaceSet::all(&complex);
    Problem::new(complex, faces, y.signature(), ReducedDensity(lagrangian), PlaquetteConstraint)
}

/// Discrete Euler–Poincaré residual at `(i, j)`, `1 ≤ i < cols`, `1 ≤ j < rows`.
pub fn ep_residual<L: ReducedLagrangian>(l: &L, y: &ReducedSection, i: usize, j: usize) -> Result<CoAlgebraElement> {
    if i == 0 || j == 0 || i >= y.cols || j >= y.rows {
        return Err(invalid(format!("({i}, {j}) is not an Euler–Poincaré vertex of the section")));
    }
    let (ru, rv) = l.right_differentials(y.u(i, j), y.v(i, j));
    let (lu_west, _) = l.left_differentials(y.u(i - 1, j), y.v(i - 1, j));
    let (_, lv_south) = l.left_differentials(y.u(i, j - 1), y.v(i, j - 1));
    Ok(&(&(&ru - &lu_west) + &rv) - &lv_south)
}

/// Largest Euler–Poincaré residual (Frobenius norm) with its vertex.
pub fn max_ep_residual<L: ReducedLagrangian>(l: &L, y: &ReducedSection) -> Result<(Option<(usize, usize)>, f64)> {
    let mut worst = (None, 0.0);
    for (i, j) in y.ep_vertices() {
        let r = ep_residual(l, y, i, j)?.norm();
        if worst.0.is_none() || r > worst.1 {
            worst = (Some((i, j)), r);
        }
    }
    Ok(worst)
}

/// Rebuild the unreduced field from `y` and the value at `(0, 0)`.
///
/// Propagation is row-first; a column-first pass is compared against it. The
/// result is unique up to a constant left factor: seeds `h₁`, `h₂` give
/// fields related by `g₁ = (h₁ h₂⁻¹)·g₂`.
pub fn reconstruct(y: &ReducedSection, seed: &GroupElement, tol: f64) -> Result<UnreducedField> {
    Ok(reconstruct_with_report(y, seed, tol)?.0)
}

/// Diagnostics gathered by [`reconstruct_with_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionReport {
    pub max_plaquette_defect: f64,
    /// Largest distance between row-first and column-first propagation.
    pub path_discrepancy: f64,
}

pub fn reconstruct_with_report(
    y: &ReducedSection,
    seed: &GroupElement,
    tol: f64,
) -> Result<(UnreducedField, ReconstructionReport)> {
    if seed.dim() != y.n() {
        return Err(invalid("seed size does not match the section"));
    }
    let worst = worst_plaquette(y);
    if let Some(((i, j), defect)) = worst {
        if defect > tol {
            return Err(Error::Holonomy { i, j, defect });
        }
    }
    let (c, r) = (y.cols, y.rows);
    let by_rows = propagate(y, seed, true);
    let by_cols = propagate(y, seed, false);
    let path_discrepancy = by_rows.max_distance(&by_cols);
    if path_discrepancy > tol.max(1e-12) * (1 + c + r) as f64 {
        // flatness held plaquette by plaquette but the paths still disagree
        let ((i, j), defect) = worst.unwrap_or(((0, 0), path_discrepancy));
        return Err(Error::Holonomy { i, j, defect: defect.max(path_discrepancy) });
    }
    let report = ReconstructionReport { max_plaquette_defect: worst.map_or(0.0, |w| w.1), path_discrepancy };
    Ok((by_rows, report))
}

fn propagate(y: &ReducedSection, seed: &GroupElement, rows_first: bool) -> UnreducedField {
    let (c, r) = (y.cols, y.rows);
    let mut g = UnreducedField { cols: c + 1, rows: r + 1, values: vec![None; (c + 1) * (r + 1)] };
    g.set(0, 0, Some(seed.clone()));
    let step_u = |g: &mut UnreducedField, i: usize, j: usize| {
        let next = g.get(i, j).expect("propagated") * y.u(i, j);
        g.set(i + 1, j, Some(next));
    };
    let step_v = |g: &mut UnreducedField, i: usize, j: usize| {
        let next = g.get(i, j).expect("propagated") * y.v(i, j);
        g.set(i, j + 1, Some(next));
    };
    if rows_first {
        for j in 0..=r {
            if j > 0 {
                step_v(&mut g, 0, j - 1);
            }
            let last = if j < r { c } else { c - 1 };
            for i in 0..last {
                if j < r {
                    step_u(&mut g, i, j);
                } else {
                    step_v(&mut g, i + 1, j - 1);
                }
            }
        }
    } else {
        for i in 0..=c {
            if i > 0 {
                step_u(&mut g, i - 1, 0);
            }
            let last = if i < c { r } else { r - 1 };
            for j in 0..last {
                if i < c {
                    step_v(&mut g, i, j);
                } else {
                    step_u(&mut g, i - 1, j + 1);
                }
            }
        }
    }
    g
}

/// Variation of the section induced by a gauge field, in left-log coordinates:
/// `u⁻¹δu = θ_{i+1,j} − Ad_{u⁻¹} θ_ij`, `v⁻¹δv = θ_{i,j+1} − Ad_{v⁻¹} θ_ij`.
pub fn gauge_variation(y: &ReducedSection, theta: &GaugeField) -> Result<Variation> {
    if theta.cols != y.cols + 1 || theta.rows != y.rows + 1 {
        return Err(invalid("gauge field must cover the unreduced window"));
    }
    let mut values = BTreeMap::new();
    for j in 0..y.rows {
        for i in 0..y.cols {
            let t = theta.get(i, j);
            let du = theta.get(i + 1, j) - &adjoint(&y.u(i, j).inverse(), t);
            let dv = theta.get(i, j + 1) - &adjoint(&y.v(i, j).inverse(), t);
            values.insert(y.vertex_id(i, j), vec![du, dv]);
        }
    }
    Ok(Variation::new(values))
}

/// The reduced variation of `reduce(g)` along the gauge field `θ`.
pub fn reduced_variation(g: &UnreducedField, theta: &GaugeField) -> Result<Variation> {
    gauge_variation(&reduce(g)?, theta)
}

fn multiplier_at<'a>(lambda: &'a Multiplier, y: &ReducedSection, i: usize, j: usize) -> Result<&'a CoAlgebraElement> {
    lambda.get(y.face_id(i, j)).ok_or_else(|| invalid(format!("multiplier missing on face ({i}, {j})")))
}

fn require_interior(y: &ReducedSection, i: usize, j: usize) -> Result<()> {
    if i == 0 || j == 0 || i + 1 >= y.cols || j + 1 >= y.rows {
        return Err(invalid(format!("({i}, {j}) is not interior to the reduced complex")));
    }
    Ok(())
}

/// The two left-hand sides of the reduced Lagrange multiplier system at `(i, j)`:
///
/// `R*_u dl(·, v) + λ_ij − Ad*_{v_{i,j−1}} λ_{i,j−1}` and
/// `R*_v dl(u, ·) − λ_ij + Ad*_{u_{i−1,j}} λ_{i−1,j}`.
pub fn multiplier_system_residual<L: ReducedLagrangian>(
    l: &L,
    y: &ReducedSection,
    lambda: &Multiplier,
    i: usize,
    j: usize,
) -> Result<(CoAlgebraElement, CoAlgebraElement)> {
    require_interior(y, i, j)?;
    let here = multiplier_at(lambda, y, i, j)?;
    let south = multiplier_at(lambda, y, i, j - 1)?;
    let west = multiplier_at(lambda, y, i - 1, j)?;
    let (ru, rv) = l.right_differentials(y.u(i, j), y.v(i, j));
    let first = &(&ru + here) - &coadjoint(y.v(i, j - 1), south);
    let second = &(&rv - here) + &coadjoint(y.u(i - 1, j), west);
    Ok((first, second))
}

/// Largest multiplier-system residual over the reduced interior.
pub fn max_multiplier_residual<L: ReducedLagrangian>(l: &L, y: &ReducedSection, lambda: &Multiplier) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, j) in y.interior_vertices() {
        let (a, b) = multiplier_system_residual(l, y, lambda, i, j)?;
        worst = worst.max(a.norm()).max(b.norm());
    }
    Ok(worst)
}

/// Tolerances for [`recover_multipliers`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryTolerances {
    pub ep_tol: f64,
    pub admissibility_tol: f64,
    pub consistency_tol: f64,
}

impl Default for RecoveryTolerances {
    fn default() -> Self {
        Self { ep_tol: 1e-8, admissibility_tol: 1e-10, consistency_tol: 1e-9 }
    }
}

/// Recovered multiplier with its sweep-consistency report.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub multiplier: Multiplier,
    /// Largest disagreement between two determinations of the same face.
    pub max_discrepancy: f64,
    pub worst_face: Option<(usize, usize)>,
    /// Faces determined from two vertices.
    pub checked_faces: usize,
}

/// Solve the multiplier system by a sweep from the max-corner face.
///
/// Vertices of the reduced interior are visited in decreasing `(j, i)` order;
/// each determines its south and west star faces from the face it owns. The
/// first determination of a face is kept and later ones are compared with it.
/// `Δ_00` is reached by no interior vertex and is set to zero.
pub fn recover_multipliers<L: ReducedLagrangian>(
    l: &L,
    y: &ReducedSection,
    seed: &CoAlgebraElement,
    tol: RecoveryTolerances,
) -> Result<Recovery> {
    if y.cols < 2 || y.rows < 2 {
        return Err(invalid("multiplier recovery needs a 2x2 section or larger"));
    }
    if let Some(((i, j), defect)) = worst_plaquette(y) {
        if defect > tol.admissibility_tol {
            return Err(Error::Precondition(format!("section is not admissible at ({i}, {j}) (defect {defect:e})")));
        }
    }
    let (at, ep) = max_ep_residual(l, y)?;
    if ep > tol.ep_tol {
        let (i, j) = at.expect("residual implies a vertex");
        return Err(Error::Precondition(format!("Euler–Poincaré residual {ep:e} at ({i}, {j}) exceeds {:e}", tol.ep_tol)));
    }
    let (w, h) = (y.cols - 1, y.rows - 1);
    let mut known: BTreeMap<(usize, usize), CoAlgebraElement> = BTreeMap::new();
    known.insert((w - 1, h - 1), seed.clone());
    let mut max_discrepancy: f64 = 0.0;
    let mut worst_face = None;
    let mut checked_faces = 0;
    for j in (1..h).rev() {
        for i in (1..w).rev() {
            let here = known.get(&(i, j)).cloned().expect("owned face is reached before its vertex");
            let (ru, rv) = l.right_differentials(y.u(i, j), y.v(i, j));
            let south = coadjoint(&y.v(i, j - 1).inverse(), &(&ru + &here));
            let west = coadjoint(&y.u(i - 1, j).inverse(), &(&here - &rv));
            for (face, value) in [((i, j - 1), south), ((i - 1, j), west)] {
                match known.get(&face) {
                    None => {
                        known.insert(face, value);
                    }
                    Some(existing) => {
                        checked_faces += 1;
                        let d = (existing - &value).norm();
                        if d > max_discrepancy {
                            max_discrepancy = d;
                            worst_face = Some(face);
                        }
                        if d > tol.consistency_tol {
                            return Err(Error::RecoveryConflict { i: face.0, j: face.1, discrepancy: d });
                        }
                    }
                }
            }
        }
    }
    let n = y.n();
    let mut multiplier = Multiplier::default();
    for (i, j) in y.plaquettes() {
        let value = known.remove(&(i, j)).unwrap_or_else(|| CoAlgebraElement::zeros(n));
        multiplier.insert(y.face_id(i, j), value);
    }
    Ok(Recovery { multiplier, max_discrepancy, worst_face, checked_faces })
}

/// Elimination diagnostics at one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationDefect {
    pub i: usize,
    pub j: usize,
    /// `r₁(i,j) − Ad*_{u_{i−1,j}} r₁(i−1,j) + r₂(i,j) − Ad*_{v_{i,j−1}} r₂(i,j−1)`.
    pub combination: f64,
    /// Euler–Poincaré residual recovered from the combination and the
    /// multiplier on `Δ_{i−1,j−1}`; equals the direct residual identically.
    pub ep_via_combination: f64,
    /// Direct Euler–Poincaré residual.
    pub ep_direct: f64,
    /// `max_E ‖(Ad*_{v_{i,j−1}} Ad*_{u_{i−1,j−1}} − Ad*_{u_{i−1,j}} Ad*_{v_{i−1,j−1}}) E‖`
    /// over the basis; vanishes on admissible sections.
    pub cancellation: f64,
}

/// Eliminate the multipliers at every reduced-interior vertex with `i, j ≥ 2`
/// (the combination needs the system at `(i−1, j)` and `(i, j−1)`).
pub fn elimination_check<L: ReducedLagrangian>(
    l: &L,
    y: &ReducedSection,
    lambda: &Multiplier,
) -> Result<Vec<EliminationDefect>> {
    let mut out = Vec::new();
    let n = y.n();
    let vertices: Vec<_> = y.interior_vertices().filter(|&(i, j)| i >= 2 && j >= 2).collect();
    for (i, j) in vertices {
        let (r1, r2) = multiplier_system_residual(l, y, lambda, i, j)?;
        let (r1_west, _) = multiplier_system_residual(l, y, lambda, i - 1, j)?;
        let (_, r2_south) = multiplier_system_residual(l, y, lambda, i, j - 1)?;
        let combination = &(&(&r1 - &coadjoint(y.u(i - 1, j), &r1_west)) + &r2) - &coadjoint(y.v(i, j - 1), &r2_south);
        let corner = multiplier_at(lambda, y, i - 1, j - 1)?;
        let operator = |mu: &CoAlgebraElement| {
            &coadjoint(y.v(i, j - 1), &coadjoint(y.u(i - 1, j - 1), mu))
                - &coadjoint(y.u(i - 1, j), &coadjoint(y.v(i - 1, j - 1), mu))
        };
        let ep_via = &combination + &operator(corner);
        let cancellation = basis_indices(n)
            .map(|(k, l)| operator(&CoAlgebraElement::basis(n, k, l)).norm())
            .fold(0.0, f64::max);
        out.push(EliminationDefect {
            i,
            j,
            combination: combination.norm(),
            ep_via_combination: ep_via.norm(),
            ep_direct: ep_residual(l, y, i, j)?.norm(),
            cancellation,
        });
    }
    Ok(out)
}

/// Dimension of the algebra of the section's group.
pub fn section_algebra_dim(y: &ReducedSection) -> usize {
    algebra_dim(y.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{pairing, Matrix};
    use crate::variational::Multiplier;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(2024)
    }

    /// `l(u, v) = tr(A u) + tr(B v)` with closed-form left differentials
    /// `((A u)ᵀ, (B v)ᵀ)` projected to skew matrices; the FD defaults are used.
    struct Linear {
        a: Matrix,
        b: Matrix,
    }

    impl ReducedLagrangian for Linear {
        fn value(&self, u: &GroupElement, v: &GroupElement) -> f64 {
            (&self.a * u.matrix()).trace() + (&self.b * v.matrix()).trace()
        }
    }

    fn linear(r: &mut ChaCha8Rng) -> Linear {
        Linear {
            a: Matrix::from_fn(3, 3, |_, _| r.gen_range(-1.0..1.0)),
            b: Matrix::from_fn(3, 3, |_, _| r.gen_range(-1.0..1.0)),
        }
    }

    /// Full derivative of `Φ = u0 v1 u2⁻¹ v0⁻¹` by the product rule, left-trivialized.
    fn product_rule_oracle(
        u0: &Matrix,
        v0: &Matrix,
        v1: &Matrix,
        u2: &Matrix,
        d: [&Matrix; 4], // left-log directions for u0, v0, v1, u2
    ) -> Matrix {
        let (u2i, v0i) = (u2.transpose(), v0.transpose());
        let phi = u0 * v1 * &u2i * &v0i;
        let dphi = u0 * d[0] * v1 * &u2i * &v0i + u0 * v1 * d[2] * &u2i * &v0i
            - u0 * v1 * &u2i * (u2 * d[3]) * &u2i * &v0i
            - u0 * v1 * &u2i * &v0i * (v0 * d[1]) * &v0i;
        phi.transpose() * dphi
    }

    #[test]
    fn constant_field_reduces_to_identity() {
        let mut r = rng();
        let g = exp(&AlgebraElement::random(3, 2.0, &mut r));
        let y = reduce(&UnreducedField::constant(4, 3, &g)).unwrap();
        assert_eq!((y.cols(), y.rows()), (3, 2));
        assert!(y.max_distance(&ReducedSection::identity(3, 2, 3)) < 1e-14);
    }

    #[test]
    fn reduction_is_admissible_and_left_invariant() {
        let mut r = rng();
        let g = UnreducedField::random(6, 5, 3, 2.0, &mut r);
        let y = reduce(&g).unwrap();
        assert!(worst_plaquette(&y).unwrap().1 < 1e-13);
        let h = exp(&AlgebraElement::random(3, 2.0, &mut r));
        assert!(reduce(&g.left_multiplied(&h)).unwrap().max_distance(&y) < 1e-13);
    }

    #[test]
    fn reduce_needs_neighbors() {
        let mut g = UnreducedField::constant(3, 3, &GroupElement::identity(3));
        g.set(2, 0, None);
        assert!(reduce(&g).is_err());
        assert!(reduce(&UnreducedField::constant(1, 3, &GroupElement::identity(3))).is_err());
    }

    #[test]
    fn plaquette_window_is_checked() {
        let y = ReducedSection::identity(3, 3, 3);
        assert_eq!(plaquette_constraint(&y, 0, 0).unwrap().distance_to_identity(), 0.0);
        assert!(plaquette_constraint(&y, 2, 0).is_err());
    }

    #[test]
    fn perturbing_origin_u_moves_the_plaquette_by_right_translation() {
        let mut r = rng();
        let y = reduce(&UnreducedField::random(3, 3, 3, 1.0, &mut r)).unwrap();
        let xi = AlgebraElement::random(3, 1.0, &mut r);
        let h = 1e-6;
        let at = |t: f64| {
            let mut z = y.clone();
            z.set_u(0, 0, y.u(0, 0).right_exp(&xi, t)).unwrap();
            plaquette_constraint(&z, 0, 0).unwrap()
        };
        let fd = (at(h).matrix() - at(-h).matrix()) / (2.0 * h);
        // (R_{u⁻¹})_* δu = δu u⁻¹ with δu = u ξ
        let expected = y.u(0, 0).matrix() * xi.matrix() * y.u(0, 0).matrix().transpose();
        assert!((fd - expected).norm() < 1e-6);
    }

    #[test]
    fn forms_at_identity() {
        let y = ReducedSection::identity(3, 3, 3);
        let mut r = rng();
        let (du, dv, du2, dv1) = (0..4).map(|_| AlgebraElement::random(3, 1.0, &mut r)).fold(
            (None, None, None, None),
            |acc, x| match acc {
                (None, ..) => (Some(x), None, None, None),
                (a, None, ..) => (a, Some(x), None, None),
                (a, b, None, _) => (a, b, Some(x), None),
                (a, b, c, _) => (a, b, c, Some(x)),
            },
        );
        let (du, dv, du2, dv1) = (du.unwrap(), dv.unwrap(), du2.unwrap(), dv1.unwrap());
        let forms = constraint_cartan_forms(&y, 0, 0, 1e-10).unwrap();
        assert!((&forms.origin(&du, &dv) - &(&du - &dv)).norm() < 1e-15);
        assert!((&forms.north(&du2) + &du2).norm() < 1e-15);
        assert!((&forms.east(&dv1) - &dv1).norm() < 1e-15);
        let zero = AlgebraElement::zeros(3);
        assert!(forms.origin(&zero, &zero).is_zero());
    }

    #[test]
    fn forms_reject_non_admissible_plaquettes() {
        let mut r = rng();
        let y = ReducedSection::random(3, 3, 3, 1.0, &mut r);
        assert!(constraint_cartan_forms(&y, 0, 0, 1e-10).is_err());
    }

    #[test]
    fn analytic_forms_match_the_product_rule_oracle() {
        let mut r = rng();
        for admissible in [true, false] {
            let y = if admissible {
                reduce(&UnreducedField::random(3, 3, 3, 1.0, &mut r)).unwrap()
            } else {
                ReducedSection::random(2, 2, 3, 1.0, &mut r)
            };
            let d: Vec<AlgebraElement> = (0..4).map(|_| AlgebraElement::random(3, 1.0, &mut r)).collect();
            let phi = plaquette_constraint(&y, 0, 0).unwrap();
            let forms = PlaquetteForms::from_factors(y.u(0, 0), y.v(0, 0), y.u(0, 1), &phi);
            let sum = &(&forms.origin(&d[0], &d[1]) + &forms.east(&d[2])) + &forms.north(&d[3]);
            let oracle = product_rule_oracle(
                y.u(0, 0).matrix(),
                y.v(0, 0).matrix(),
                y.v(1, 0).matrix(),
                y.u(0, 1).matrix(),
                [d[0].matrix(), d[1].matrix(), d[2].matrix(), d[3].matrix()],
            );
            assert!((sum.matrix() - oracle).norm() < 1e-13, "admissible={admissible}");
        }
    }

    #[test]
    fn reconstruct_round_trips() {
        let mut r = rng();
        let g = UnreducedField::random(5, 4, 3, 1.5, &mut r);
        let y = reduce(&g).unwrap();
        let (back, rep) = reconstruct_with_report(&y, g.get(0, 0).unwrap(), 1e-10).unwrap();
        assert!(rep.path_discrepancy < 1e-12);
        assert!(back.get(4, 3).is_none());
        assert!(back.max_distance(&g) < 1e-12);
        assert!(reduce(&back).unwrap().max_distance(&y) < 1e-12);

        let ident = reconstruct(&ReducedSection::identity(3, 3, 3), &GroupElement::identity(3), 1e-10).unwrap();
        assert_eq!(ident.max_distance(&UnreducedField::constant(4, 4, &GroupElement::identity(3))), 0.0);
    }

    #[test]
    fn reconstruction_seeds_differ_by_a_constant_left_factor() {
        let mut r = rng();
        let y = reduce(&UnreducedField::random(4, 4, 3, 1.0, &mut r)).unwrap();
        let h1 = exp(&AlgebraElement::random(3, 1.0, &mut r));
        let h2 = exp(&AlgebraElement::random(3, 1.0, &mut r));
        let g1 = reconstruct(&y, &h1, 1e-10).unwrap();
        let g2 = reconstruct(&y, &h2, 1e-10).unwrap();
        let offset = &h1 * &h2.inverse();
        assert!(g1.max_distance(&g2.left_multiplied(&offset)) < 1e-12);
    }

    #[test]
    fn tampered_plaquette_is_named() {
        let mut r = rng();
        let mut y = reduce(&UnreducedField::random(5, 5, 3, 1.0, &mut r)).unwrap();
        let kick = exp(&AlgebraElement::random(3, 1e-4, &mut r));
        y.set_v(2, 2, y.v(2, 2) * &kick).unwrap();
        // v_22 enters Φ(Δ_22) and Φ(Δ_12); Φ(Δ_22) carries it conjugation-free
        match reconstruct(&y, &GroupElement::identity(3), 1e-10) {
            Err(Error::Holonomy { i, j, defect }) => {
                assert!([(2, 2), (1, 2)].contains(&(i, j)));
                assert!(defect > 1e-6);
            }
            other => panic!("expected holonomy error, got {other:?}"),
        }
    }

    #[test]
    fn gauge_variations_are_tangent_to_the_constraint() {
        let mut r = rng();
        let g = UnreducedField::random(5, 5, 3, 1.0, &mut r);
        let y = reduce(&g).unwrap();
        let theta = GaugeField::random(5, 5, 3, false, &mut r);
        let delta = reduced_variation(&g, &theta).unwrap();
        let p = reduced_problem(Linear { a: Matrix::zeros(3, 3), b: Matrix::zeros(3, 3) }, &y).unwrap();
        for (_, d) in p.d_psi(&y.to_section(), &delta).unwrap() {
            assert!(d.norm() < 1e-12);
        }
        // and they agree with differentiating reduce along g·exp(tθ)
        let h = 1e-6;
        let moved = |t: f64| {
            let field = UnreducedField::from_fn(5, 5, |i, j| Some(g.get(i, j).unwrap().right_exp(theta.get(i, j), t))).unwrap();
            reduce(&field).unwrap().to_section()
        };
        let fd = Variation::difference_quotient(&moved(-h), &moved(h), 2.0 * h).unwrap();
        for (v, dv) in delta.values() {
            for (a, b) in dv.iter().zip(fd.get(*v).unwrap()) {
                assert!((a - b).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn constant_gauge_at_identity_is_zero() {
        let y = ReducedSection::identity(3, 3, 3);
        let mut r = rng();
        let xi = AlgebraElement::random(3, 1.0, &mut r);
        let delta = gauge_variation(&y, &GaugeField::constant(4, 4, &xi)).unwrap();
        assert!(delta.max_norm() < 1e-15);
        let zero = gauge_variation(&y, &GaugeField::constant(4, 4, &AlgebraElement::zeros(3))).unwrap();
        assert_eq!(zero.max_norm(), 0.0);
    }

    #[test]
    fn fd_differentials_match_closed_form() {
        let mut r = rng();
        let l = linear(&mut r);
        let u = exp(&AlgebraElement::random(3, 1.0, &mut r));
        let v = exp(&AlgebraElement::random(3, 1.0, &mut r));
        let (lu, lv) = l.left_differentials(&u, &v);
        // d/dt tr(A u exp(tξ)) = tr(A u ξ) = ⟨(A u)ᵀ, ξ⟩
        let exact_u = CoAlgebraElement::new((&l.a * u.matrix()).transpose()).unwrap();
        let exact_v = CoAlgebraElement::new((&l.b * v.matrix()).transpose()).unwrap();
        assert!((&lu - &exact_u).norm() < 1e-8);
        assert!((&lv - &exact_v).norm() < 1e-8);
        // right translation: d/dt tr(A exp(tξ) u) = ⟨(u A)ᵀ, ξ⟩
        let (ru, _) = l.right_differentials(&u, &v);
        let exact_ru = CoAlgebraElement::new((u.matrix() * &l.a).transpose()).unwrap();
        assert!((&ru - &exact_ru).norm() < 1e-8);
    }

    #[test]
    fn ep_residual_rejects_non_ep_vertices() {
        let mut r = rng();
        let l = linear(&mut r);
        let y = ReducedSection::identity(3, 3, 3);
        assert!(ep_residual(&l, &y, 0, 1).is_err());
        assert!(ep_residual(&l, &y, 1, 3).is_err());
        assert!(ep_residual(&l, &y, 2, 2).is_ok());
    }

    #[test]
    fn core_residual_is_the_multiplier_system_seen_through_coadjoints() {
        let mut r = rng();
        let l = linear(&mut r);
        let y = reduce(&UnreducedField::random(6, 6, 3, 1.0, &mut r)).unwrap();
        let p = reduced_problem(Linear { a: l.a.clone(), b: l.b.clone() }, &y).unwrap();
        let lambda = Multiplier::random(3, p.faces().faces().iter().copied(), 1.0, &mut r);
        for (i, j) in y.interior_vertices() {
            let el = p.extended_el(&y.to_section(), &lambda, y.vertex_id(i, j)).unwrap();
            let (a, b) = multiplier_system_residual(&l, &y, &lambda, i, j).unwrap();
            assert!((&el.covector[0] - &coadjoint(y.u(i, j), &a)).norm() < 1e-8);
            assert!((&el.covector[1] - &coadjoint(y.v(i, j), &b)).norm() < 1e-8);
        }
    }

    #[test]
    fn multiplier_system_needs_interior_vertices_and_multipliers() {
        let mut r = rng();
        let l = linear(&mut r);
        let y = ReducedSection::identity(4, 4, 3);
        assert!(multiplier_system_residual(&l, &y, &Multiplier::zeros(3, 0..9), 3, 1).is_err());
        assert!(multiplier_system_residual(&l, &y, &Multiplier::default(), 1, 1).is_err());
    }

    #[test]
    fn recovery_rejects_non_critical_sections() {
        let mut r = rng();
        let l = linear(&mut r);
        let y = reduce(&UnreducedField::random(5, 5, 3, 1.0, &mut r)).unwrap();
        let err = recover_multipliers(&l, &y, &CoAlgebraElement::zeros(3), RecoveryTolerances::default());
        assert!(matches!(err, Err(Error::Precondition(_))));
        let bad = ReducedSection::random(4, 4, 3, 1.0, &mut r);
        let err = recover_multipliers(&l, &bad, &CoAlgebraElement::zeros(3), RecoveryTolerances::default());
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn recovery_on_a_critical_section_solves_the_system() {
        // A zero Lagrangian makes every admissible section critical.
        let zero = Linear { a: Matrix::zeros(3, 3), b: Matrix::zeros(3, 3) };
        let mut r = rng();
        let y = reduce(&UnreducedField::random(6, 5, 3, 1.0, &mut r)).unwrap();
        for seed in [CoAlgebraElement::zeros(3), CoAlgebraElement::random(3, 1.0, &mut r)] {
            let rec = recover_multipliers(&zero, &y, &seed, RecoveryTolerances::default()).unwrap();
            assert!(rec.checked_faces > 0);
            assert!(rec.max_discrepancy < 1e-12);
            assert!(max_multiplier_residual(&zero, &y, &rec.multiplier).unwrap() < 1e-12);
            for d in elimination_check(&zero, &y, &rec.multiplier).unwrap() {
                assert!(d.cancellation < 1e-12 && d.combination < 1e-12);
                assert!((d.ep_via_combination - d.ep_direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cancellation_fails_off_the_constraint() {
        let mut r = rng();
        let y = ReducedSection::random(4, 4, 3, 1.0, &mut r);
        let zero = Linear { a: Matrix::zeros(3, 3), b: Matrix::zeros(3, 3) };
        let defects = elimination_check(&zero, &y, &Multiplier::zeros(3, 0..9)).unwrap();
        assert_eq!(defects.len(), 1);
        let phi = plaquette_constraint(&y, 1, 1).unwrap().distance_to_identity();
        assert!(defects[0].cancellation > 1e-3 * phi);
    }

    #[test]
    fn elimination_identity_holds_for_arbitrary_multipliers() {
        // combination + operator·λ_corner = EP residual, whatever λ is.
        let mut r = rng();
        let l = linear(&mut r);
        let y = reduce(&UnreducedField::random(6, 6, 3, 1.0, &mut r)).unwrap();
        let lambda = Multiplier::random(3, 0..16, 1.0, &mut r);
        for d in elimination_check(&l, &y, &lambda).unwrap() {
            assert!((d.ep_via_combination - d.ep_direct).abs() < 1e-12 * (1.0 + d.ep_direct));
            assert!(d.cancellation < 1e-12);
        }
    }

    #[test]
    fn section_round_trips_through_core_representation() {
        let mut r = rng();
        let y = ReducedSection::random(3, 4, 3, 1.0, &mut r);
        let back = ReducedSection::from_section(3, 4, &y.to_section()).unwrap();
        assert_eq!(back, y);
        assert_eq!(section_algebra_dim(&y), 3);
    }

    #[test]
    fn pairing_of_left_differential_is_the_derivative() {
        let mut r = rng();
        let l = linear(&mut r);
        let u = exp(&AlgebraElement::random(3, 1.0, &mut r));
        let v = exp(&AlgebraElement::random(3, 1.0, &mut r));
        let xi = AlgebraElement::random(3, 1.0, &mut r);
        let h = 1e-5;
        let fd = (l.value(&u.right_exp(&xi, h), &v) - l.value(&u.right_exp(&xi, -h), &v)) / (2.0 * h);
        assert!((pairing(&l.left_differentials(&u, &v).0, &xi) - fd).abs() < 1e-8);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn reduce_then_reconstruct_is_identity(seed in any::<u64>(), cols in 2usize..6, rows in 2usize..6) {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                let g = UnreducedField::random(cols, rows, 3, 2.0, &mut r);
                let y = reduce(&g).unwrap();
                prop_assert!(worst_plaquette(&y).map_or(0.0, |w| w.1) < 1e-12);
                let back = reconstruct(&y, g.get(0, 0).unwrap(), 1e-10).unwrap();
                prop_assert!(back.max_distance(&g) < 1e-12);
            }

            #[test]
            fn gauge_variations_keep_plaquettes_flat(seed in any::<u64>()) {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                let g = UnreducedField::random(4, 4, 3, 2.0, &mut r);
                let y = reduce(&g).unwrap();
                let delta = reduced_variation(&g, &GaugeField::random(4, 4, 3, false, &mut r)).unwrap();
                let p = reduced_problem(Linear { a: Matrix::zeros(3, 3), b: Matrix::zeros(3, 3) }, &y).unwrap();
                for (_, d) in p.d_psi(&y.to_section(), &delta).unwrap() {
                    prop_assert!(d.norm() < 1e-12);
                }
            }
        }
    }
}
