//! Matrix Lie group backend for `SO(n)`.
//!
//! Group elements are special-orthogonal matrices, algebra elements are skew
//! matrices, and the coalgebra is identified with skew matrices through the
//! trace pairing `⟨μ, ξ⟩ = tr(μᵀ ξ)`. On the basis `E_kl` (+1 at `(k,l)`, −1 at
//! `(l,k)`, `k < l`) this pairing has Gram matrix `2·I`, so the dual basis
//! element of `E_kl` is `E_kl / 2`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Tolerance used when validating group and tangency invariants.
pub const GROUP_TOL: f64 = 1e-9;

/// `dim so(n) = n(n-1)/2`.
pub fn algebra_dim(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn skew_part(m: &Matrix) -> Matrix {
    (m - m.transpose()) * 0.5
}

fn check_square(m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// An element of `SO(n)`.
#[derive(Clone, PartialEq)]
pub struct GroupElement(Matrix);

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({:?})", self.0.as_slice())
    }
}

impl GroupElement {
    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n, n))
    }

    /// Validate `m` against the group invariants and re-orthonormalize it.
    pub fn new(m: Matrix) -> Result<Self> {
        check_square(&m)?;
        let n = m.nrows();
        let orth = (m.transpose() * &m - Matrix::identity(n, n)).norm();
        let det = m.determinant();
        if orth > GROUP_TOL || (det - 1.0).abs() > GROUP_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not special orthogonal (orthogonality defect {orth:e}, det {det})"
            )));
        }
        project_to_group(&m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Frobenius distance to another element.
    pub fn distance(&self, other: &GroupElement) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn distance_to_identity(&self) -> f64 {
        (&self.0 - Matrix::identity(self.dim(), self.dim())).norm()
    }

    /// `self · exp(t ξ)`: the curve used for left-logarithmic variations.
    pub fn right_exp(&self, xi: &AlgebraElement, t: f64) -> Self {
        self * &exp(&xi.scaled(t))
    }
}

impl Mul<&GroupElement> for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        GroupElement(&self.0 * &rhs.0)
    }
}

macro_rules! skew_type {
    ($name:ident) => {
        impl $name {
            /// Skew-symmetrize `m` and wrap it.
            pub fn new(m: Matrix) -> Result<Self> {
                check_square(&m)?;
                Ok(Self(skew_part(&m)))
            }

            pub fn zeros(n: usize) -> Self {
                Self(Matrix::zeros(n, n))
            }

            /// The matrix `E_kl`.
            pub fn basis(n: usize, k: usize, l: usize) -> Self {
                assert!(k < l && l < n, "basis index out of range");
                let mut m = Matrix::zeros(n, n);
                m[(k, l)] = 1.0;
                m[(l, k)] = -1.0;
                Self(m)
            }

            pub fn matrix(&self) -> &Matrix {
                &self.0
            }

            pub fn dim(&self) -> usize {
                self.0.nrows()
            }

            pub fn norm(&self) -> f64 {
                self.0.norm()
            }

            pub fn scaled(&self, t: f64) -> Self {
                Self(&self.0 * t)
            }

            pub fn is_zero(&self) -> bool {
                self.0.iter().all(|&x| x == 0.0)
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                $name(&self.0 + &rhs.0)
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                $name(&self.0 - &rhs.0)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "({:?})"), self.0.as_slice())
            }
        }
    };
}

/// An element of `so(n)`.
#[derive(Clone, PartialEq)]
pub struct AlgebraElement(Matrix);
skew_type!(AlgebraElement);

/// An element of `so(n)*`, stored as a skew matrix under the trace pairing.
#[derive(Clone, PartialEq)]
pub struct CoAlgebraElement(Matrix);
skew_type!(CoAlgebraElement);

/// Index pairs `(k, l)`, `k < l`, in the fixed basis order.
pub fn basis_indices(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |k| (k + 1..n).map(move |l| (k, l)))
}

impl AlgebraElement {
    /// Coordinates `c_kl` with `ξ = Σ c_kl E_kl`.
    pub fn coords(&self) -> Vec<f64> {
        basis_indices(self.dim()).map(|(k, l)| self.0[(k, l)]).collect()
    }

    pub fn from_coords(n: usize, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), algebra_dim(n));
        let mut m = Matrix::zeros(n, n);
        for ((k, l), &c) in basis_indices(n).zip(coords) {
            m[(k, l)] = c;
            m[(l, k)] = -c;
        }
        Self(m)
    }

    /// Matrix commutator `ξη − ηξ`.
    pub fn bracket(&self, other: &AlgebraElement) -> AlgebraElement {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// Coordinates uniform in `[-scale, scale]` over the `E_kl` basis.
    pub fn random<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Self {
        let coords: Vec<f64> = (0..algebra_dim(n)).map(|_| scale * rng.gen_range(-1.0..=1.0)).collect();
        Self::from_coords(n, &coords)
    }
}

impl CoAlgebraElement {
    /// Values `⟨μ, E_kl⟩` (coordinates in the dual basis `E*_kl`).
    pub fn dual_coords(&self) -> Vec<f64> {
        basis_indices(self.dim()).map(|(k, l)| 2.0 * self.0[(k, l)]).collect()
    }

    pub fn from_dual_coords(n: usize, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), algebra_dim(n));
        let mut m = Matrix::zeros(n, n);
        for ((k, l), &c) in basis_indices(n).zip(coords) {
            m[(k, l)] = 0.5 * c;
            m[(l, k)] = -0.5 * c;
        }
        Self(m)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Self {
        Self(AlgebraElement::random(n, scale, rng).0)
    }
}

/// A tangent vector `D_g ∈ T_g SO(n)` in ambient matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: GroupElement,
    vector: Matrix,
}

impl TangentVector {
    pub fn new(base: GroupElement, vector: Matrix) -> Result<Self> {
        let n = base.dim();
        if vector.nrows() != n || vector.ncols() != n {
            return Err(Error::InvalidArgument("tangent vector has the wrong shape".into()));
        }
        let local = base.matrix().transpose() * &vector;
        let defect = (&local + local.transpose()).norm();
        if defect > GROUP_TOL * (1.0 + vector.norm()) {
            return Err(Error::InvalidArgument(format!("vector is not tangent at base (defect {defect:e})")));
        }
        Ok(Self { base, vector })
    }

    pub fn base(&self) -> &GroupElement {
        &self.base
    }

    pub fn vector(&self) -> &Matrix {
        &self.vector
    }
}

/// Matrix exponential of a skew matrix.
pub fn exp(xi: &AlgebraElement) -> GroupElement {
    GroupElement(xi.0.clone().exp())
}

/// Principal logarithm on the region `‖g − I‖_F < 1`.
///
/// Uses `log g = 2 artanh(Z)` with the Cayley transform `Z = (g − I)(g + I)⁻¹`,
/// which is skew for orthogonal `g`. On the admitted region every rotation
/// angle satisfies `|tan(θ/2)| < 1/√3`, so the odd series converges geometrically.
pub fn log_near_identity(g: &GroupElement) -> Result<AlgebraElement> {
    let n = g.dim();
    let dist = g.distance_to_identity();
    if dist >= 1.0 {
        return Err(Error::Domain(format!("‖g − I‖ = {dist} is outside the principal region")));
    }
    let id = Matrix::identity(n, n);
    let plus = g.matrix() + &id;
    let inv = plus
        .try_inverse()
        .ok_or_else(|| Error::Domain("g + I is singular".into()))?;
    let z = skew_part(&((g.matrix() - &id) * inv));
    let z2 = &z * &z;
    let mut power = z.clone();
    let mut sum = z.clone();
    for k in 1..200 {
        power = &power * &z2;
        let term = &power / (2 * k + 1) as f64;
        sum += &term;
        if term.norm() <= 1e-18 * (1.0 + sum.norm()) {
            break;
        }
    }
    Ok(AlgebraElement(skew_part(&(sum * 2.0))))
}

/// Left Maurer–Cartan form: `D_g ↦ g⁻¹ D_g`.
pub fn maurer_cartan(d: &TangentVector) -> Result<AlgebraElement> {
    let local = d.base.matrix().transpose() * &d.vector;
    let defect = (&local + local.transpose()).norm();
    if defect > GROUP_TOL * (1.0 + d.vector.norm()) {
        return Err(Error::InvalidArgument(format!("tangency violated (defect {defect:e})")));
    }
    Ok(AlgebraElement(skew_part(&local)))
}

/// `g · ξ ∈ T_g SO(n)`, inverse of [`maurer_cartan`].
pub fn left_translate(g: &GroupElement, xi: &AlgebraElement) -> TangentVector {
    TangentVector { base: g.clone(), vector: g.matrix() * xi.matrix() }
}

/// `Ad_g ξ = g ξ g⁻¹`.
pub fn adjoint(g: &GroupElement, xi: &AlgebraElement) -> AlgebraElement {
    AlgebraElement(skew_part(&(g.matrix() * xi.matrix() * g.matrix().transpose())))
}

/// `Ad*_g μ`, defined by `⟨Ad*_g μ, ξ⟩ = ⟨μ, Ad_g ξ⟩`; equals `g⁻¹ μ g` here.
pub fn coadjoint(g: &GroupElement, mu: &CoAlgebraElement) -> CoAlgebraElement {
    CoAlgebraElement(skew_part(&(g.matrix().transpose() * mu.matrix() * g.matrix())))
}

/// Duality pairing `⟨μ, ξ⟩ = tr(μᵀ ξ)`.
pub fn pairing(mu: &CoAlgebraElement, xi: &AlgebraElement) -> f64 {
    mu.0.iter().zip(xi.0.iter()).map(|(a, b)| a * b).sum()
}

/// Nearest special-orthogonal matrix in Frobenius norm (the polar factor).
pub fn project_to_group(m: &Matrix) -> Result<GroupElement> {
    check_square(m)?;
    let det = m.determinant();
    if !det.is_finite() || det <= 0.0 {
        return Err(Error::Domain(format!("cannot project a matrix with determinant {det}")));
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-14 * smax.max(1.0) {
        return Err(Error::Domain("cannot project a singular matrix".into()));
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    Ok(GroupElement(u * vt))
}

/// `exp(scale · ξ)` with `ξ` drawn coordinatewise from `U[-1, 1]` on the `E_kl` basis.
pub fn random_group_element<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> GroupElement {
    exp(&AlgebraElement::random(n, scale, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn max_abs(m: &Matrix) -> f64 {
        m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(exp(&AlgebraElement::zeros(3)).distance_to_identity(), 0.0);
    }

    #[test]
    fn exp_quarter_turn_in_two_dimensions() {
        let g = exp(&AlgebraElement::basis(2, 0, 1).scaled(std::f64::consts::FRAC_PI_2));
        // closed form exp(θ E_12) = [[cos θ, sin θ], [-sin θ, cos θ]]
        let expected = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(max_abs(&(g.matrix() - expected)) < 1e-15);
    }

    #[test]
    fn exp_is_special_orthogonal_and_inverts() {
        let mut r = rng();
        for n in 2..6 {
            for _ in 0..20 {
                let xi = AlgebraElement::random(n, 2.0, &mut r);
                let g = exp(&xi);
                let id = Matrix::identity(n, n);
                assert!((g.matrix().transpose() * g.matrix() - &id).norm() < 1e-12);
                assert_abs_diff_eq!(g.matrix().determinant(), 1.0, epsilon = 1e-12);
                assert!((&g * &exp(&-&xi)).distance_to_identity() < 1e-12);
            }
        }
    }

    #[test]
    fn log_round_trip() {
        let mut r = rng();
        assert!(log_near_identity(&GroupElement::identity(4)).unwrap().is_zero());
        for n in 2..6 {
            for _ in 0..50 {
                let mut xi = AlgebraElement::random(n, 1.0, &mut r);
                if xi.norm() > 0.5 {
                    xi = xi.scaled(0.5 / xi.norm());
                }
                let back = log_near_identity(&exp(&xi)).unwrap();
                assert!((&back - &xi).norm() < 1e-10, "n={n}");
                assert!(exp(&back).distance(&exp(&xi)) < 1e-10);
            }
        }
    }

    #[test]
    fn log_outside_region_is_domain_error() {
        let g = exp(&AlgebraElement::basis(3, 0, 1).scaled(1.2));
        assert!(g.distance_to_identity() >= 1.0);
        assert!(matches!(log_near_identity(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn maurer_cartan_basics() {
        let mut r = rng();
        let xi = AlgebraElement::random(3, 1.0, &mut r);
        let at_id = TangentVector::new(GroupElement::identity(3), xi.matrix().clone()).unwrap();
        assert!((&maurer_cartan(&at_id).unwrap() - &xi).norm() < 1e-15);

        let g = random_group_element(3, 1.0, &mut r);
        // d/dt|0 g exp(tξ) = g ξ exactly
        let d = TangentVector::new(g.clone(), g.matrix() * xi.matrix()).unwrap();
        assert!((&maurer_cartan(&d).unwrap() - &xi).norm() < 1e-14);
        let back = left_translate(&g, &maurer_cartan(&d).unwrap());
        assert!((back.vector() - d.vector()).norm() < 1e-14);
    }

    #[test]
    fn maurer_cartan_rejects_non_tangent() {
        let g = GroupElement::identity(3);
        assert!(TangentVector::new(g, Matrix::identity(3, 3)).is_err());
    }

    #[test]
    fn maurer_cartan_left_invariance() {
        let mut r = rng();
        for _ in 0..20 {
            let g = random_group_element(4, 1.0, &mut r);
            let h = random_group_element(4, 1.0, &mut r);
            let xi = AlgebraElement::random(4, 1.0, &mut r);
            let hg = &h * &g;
            let d = TangentVector::new(hg.clone(), hg.matrix() * xi.matrix()).unwrap();
            let d0 = TangentVector::new(g.clone(), g.matrix() * xi.matrix()).unwrap();
            assert!((&maurer_cartan(&d).unwrap() - &maurer_cartan(&d0).unwrap()).norm() < 1e-13);
        }
    }

    #[test]
    fn adjoint_properties() {
        let mut r = rng();
        let xi = AlgebraElement::random(3, 1.0, &mut r);
        assert_eq!(adjoint(&GroupElement::identity(3), &xi), xi);
        let g = random_group_element(3, 1.0, &mut r);
        let h = random_group_element(3, 1.0, &mut r);
        let e12 = AlgebraElement::basis(3, 0, 1);
        let oracle = g.matrix() * e12.matrix() * g.matrix().transpose();
        assert!((adjoint(&g, &e12).matrix() - oracle).norm() < 1e-15);
        let lhs = adjoint(&(&g * &h), &xi);
        let rhs = adjoint(&g, &adjoint(&h, &xi));
        assert!((&lhs - &rhs).norm() < 1e-13);
    }

    #[test]
    fn coadjoint_duality_and_contravariance() {
        let mut r = rng();
        let mu = CoAlgebraElement::random(4, 1.0, &mut r);
        assert_eq!(coadjoint(&GroupElement::identity(4), &mu), mu);
        for _ in 0..20 {
            let g = random_group_element(4, 1.5, &mut r);
            let h = random_group_element(4, 1.5, &mut r);
            for (k, l) in basis_indices(4) {
                let e = AlgebraElement::basis(4, k, l);
                let d = pairing(&coadjoint(&g, &mu), &e) - pairing(&mu, &adjoint(&g, &e));
                assert!(d.abs() < 1e-13);
            }
            let lhs = coadjoint(&g, &coadjoint(&h, &mu));
            let rhs = coadjoint(&(&h * &g), &mu);
            assert!((&lhs - &rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn pairing_on_basis() {
        for (k, l) in basis_indices(4) {
            for (k2, l2) in basis_indices(4) {
                let mu = CoAlgebraElement::basis(4, k, l);
                let p = pairing(&mu, &AlgebraElement::basis(4, k2, l2));
                let expected = if (k, l) == (k2, l2) { 2.0 } else { 0.0 };
                assert_eq!(p, expected);
            }
        }
        let mut r = rng();
        assert_eq!(pairing(&CoAlgebraElement::zeros(3), &AlgebraElement::random(3, 1.0, &mut r)), 0.0);
    }

    #[test]
    fn dual_coordinates_round_trip() {
        let mut r = rng();
        let mu = CoAlgebraElement::random(4, 1.0, &mut r);
        let c = mu.dual_coords();
        for ((k, l), ck) in basis_indices(4).zip(&c) {
            assert_eq!(*ck, pairing(&mu, &AlgebraElement::basis(4, k, l)));
        }
        assert!((&CoAlgebraElement::from_dual_coords(4, &c) - &mu).norm() < 1e-15);
    }

    #[test]
    fn projection() {
        let mut r = rng();
        let noise = Matrix::from_fn(3, 3, |_, _| r.gen_range(-1.0..1.0));
        let p = project_to_group(&(Matrix::identity(3, 3) + noise * 1e-9)).unwrap();
        assert!(p.distance_to_identity() < 1e-8);
        let g = random_group_element(3, 1.0, &mut r);
        assert!(project_to_group(g.matrix()).unwrap().distance(&g) < 1e-14);
        let reflection = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, -1.0]));
        assert!(matches!(project_to_group(&reflection), Err(Error::Domain(_))));
        assert!(matches!(project_to_group(&Matrix::zeros(3, 3)), Err(Error::Domain(_))));
    }

    #[test]
    fn constructors_enforce_invariants() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let a = AlgebraElement::new(m).unwrap();
        assert_eq!(a.matrix(), &a.matrix().transpose().map(|x| -x));
        assert!(GroupElement::new(Matrix::identity(3, 3) * 2.0).is_err());
        let almost = Matrix::identity(3, 3) + Matrix::from_element(3, 3, 1e-12);
        assert!(GroupElement::new(almost).unwrap().distance_to_identity() < 1e-11);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn algebra(n: usize, scale: f64) -> impl Strategy<Value = AlgebraElement> {
            proptest::collection::vec(-scale..scale, algebra_dim(n))
                .prop_map(move |c| AlgebraElement::from_coords(n, &c))
        }

        proptest! {
            #[test]
            fn exp_log_round_trip(xi in algebra(3, 0.3)) {
                let back = log_near_identity(&exp(&xi)).unwrap();
                prop_assert!((&back - &xi).norm() < 1e-10);
            }

            #[test]
            fn adjoint_coadjoint_duality(a in algebra(3, 3.0), b in algebra(3, 1.0), c in algebra(3, 1.0)) {
                let g = exp(&a);
                let mu = CoAlgebraElement::new(b.matrix().clone()).unwrap();
                let d = pairing(&coadjoint(&g, &mu), &c) - pairing(&mu, &adjoint(&g, &c));
                prop_assert!(d.abs() < 1e-13);
            }
        }
    }
}
