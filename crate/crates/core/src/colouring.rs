//! The all-north KS-colouring of product rays and its consequences.
//!
//! Every complete set of n-qubit product rays contains exactly one all-north
//! member, so colouring a vertex by "all factors north" is a valid
//! KS-colouring on any product-ray scenario. This module houses that
//! colouring, a recursive-splitting generator of product bases used to
//! exercise the exactly-one-north property, and valuations on observables
//! whose eigenbases consist of product rays.

use crate::linalg::CMatrix;
use crate::rays::{
    is_all_north, is_orthogonal, is_product_ray, ProductRay, Ray, RayError, ORTHO_TOL,
};
use crate::scenario::{Colouring, RayAssignment, Scenario, ScenarioError};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ColouringError {
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("vertex {0:?} does not carry a product ray of qubits")]
    NotProduct(String),
    #[error("product basis must have 2^n members, got {0}")]
    BadMemberCount(usize),
    #[error("product basis members {0} and {1} are not orthogonal")]
    NotOrthogonal(usize, usize),
    #[error("qubit counts differ between members")]
    MixedQubitCounts,
    #[error("need at least one qubit")]
    NoQubits,
    #[error("eigenprojectors do not sum to the identity (defect {0})")]
    IncompleteProjectors(f64),
    #[error("spectral decomposition does not reproduce the observable (defect {0})")]
    BadDecomposition(f64),
    #[error("colouring assigns one to {0} eigenprojectors, expected exactly one")]
    BadProjectorCount(usize),
}

/// A complete set of n-qubit product rays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ProductBasisRepr", into = "ProductBasisRepr")]
pub struct ProductBasis {
    members: Vec<ProductRay>,
}

#[derive(Serialize, Deserialize)]
struct ProductBasisRepr {
    rays: Vec<ProductRay>,
}

impl TryFrom<ProductBasisRepr> for ProductBasis {
    type Error = ColouringError;
    fn try_from(repr: ProductBasisRepr) -> Result<Self, ColouringError> {
        ProductBasis::new(repr.rays)
    }
}

impl From<ProductBasis> for ProductBasisRepr {
    fn from(b: ProductBasis) -> Self {
        ProductBasisRepr { rays: b.members }
    }
}

impl ProductBasis {
    pub fn new(members: Vec<ProductRay>) -> Result<Self, ColouringError> {
        let n = members.first().map(ProductRay::subsystems).ok_or(ColouringError::NoQubits)?;
        if members.iter().any(|m| m.subsystems() != n || !m.is_all_qubits()) {
            return Err(ColouringError::MixedQubitCounts);
        }
        if members.len() != 1 << n {
            return Err(ColouringError::BadMemberCount(members.len()));
        }
        let flat: Vec<Ray> = members.iter().map(ProductRay::flatten).collect();
        for i in 0..flat.len() {
            for j in (i + 1)..flat.len() {
                if !is_orthogonal(&flat[i], &flat[j], ORTHO_TOL)? {
                    return Err(ColouringError::NotOrthogonal(i, j));
                }
            }
        }
        Ok(ProductBasis { members })
    }

    pub fn members(&self) -> &[ProductRay] {
        &self.members
    }

    pub fn qubits(&self) -> usize {
        self.members[0].subsystems()
    }

    pub fn flattened(&self) -> Vec<Ray> {
        self.members.iter().map(ProductRay::flatten).collect()
    }

    /// The single-qubit basis `{psi, psi_perp}`.
    pub fn pair(psi: &Ray) -> Result<Self, ColouringError> {
        let perp = psi.qubit_orthogonal()?;
        ProductBasis::new(vec![
            ProductRay::from_qubits(vec![psi.clone()])?,
            ProductRay::from_qubits(vec![perp])?,
        ])
    }

    /// The split construction: insert `psi` at qubit `position` in front of
    /// every member of `lower`, and the orthogonal ray in front of every
    /// member of `upper`. The sub-bases act on the remaining qubits.
    pub fn split(
        position: usize,
        psi: &Ray,
        lower: &ProductBasis,
        upper: &ProductBasis,
    ) -> Result<Self, ColouringError> {
        if lower.qubits() != upper.qubits() {
            return Err(ColouringError::MixedQubitCounts);
        }
        assert!(position <= lower.qubits(), "split position out of range");
        let perp = psi.qubit_orthogonal()?;
        let mut members = Vec::with_capacity(2 * lower.members.len());
        for (anchor, block) in [(psi, lower), (&perp, upper)] {
            for m in &block.members {
                let mut factors = m.factors().to_vec();
                factors.insert(position, anchor.clone());
                members.push(ProductRay::from_qubits(factors)?);
            }
        }
        ProductBasis::new(members)
    }
}

/// Draws a Haar-random qubit ray: `theta = arccos(1 - 2u)`, `phi = 2 pi v`.
pub fn haar_qubit(rng: &mut impl Rng) -> Ray {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Ray::qubit((1.0 - 2.0 * u).acos(), 2.0 * PI * v)
}

/// A random n-qubit product basis from the recursive-splitting family:
/// pick a qubit position uniformly, pick a Haar-random ray for it, and
/// recurse independently on the two outcome branches.
pub fn random_product_basis(n: usize, rng: &mut impl Rng) -> Result<ProductBasis, ColouringError> {
    if n == 0 {
        return Err(ColouringError::NoQubits);
    }
    if n == 1 {
        return ProductBasis::pair(&haar_qubit(rng));
    }
    let position = rng.random_range(0..n);
    let psi = haar_qubit(rng);
    let lower = random_product_basis(n - 1, rng)?;
    let upper = random_product_basis(n - 1, rng)?;
    ProductBasis::split(position, &psi, &lower, &upper)
}

/// True when exactly one member of the basis is all-north.
pub fn verify_exactly_one_north(b: &ProductBasis) -> Result<bool, ColouringError> {
    let mut count = 0;
    for m in b.members() {
        if is_all_north(m)? {
            count += 1;
        }
    }
    Ok(count == 1)
}

/// Factorises every assigned ray into qubit factors, failing on any vertex
/// whose ray is entangled or has non-qubit dimensions.
pub fn qubit_factorisation(
    s: &Scenario,
    a: &RayAssignment,
) -> Result<Vec<ProductRay>, ColouringError> {
    let dim = a.dim();
    let n = dim.trailing_zeros() as usize;
    if dim == 0 || dim != 1 << n {
        return Err(ColouringError::NotProduct(s.vertex_id(0).to_string()));
    }
    let dims = vec![2usize; n];
    let mut out = Vec::with_capacity(a.rays().len());
    for (v, ray) in a.rays().iter().enumerate() {
        match is_product_ray(ray, &dims, 1e-9)? {
            Some(p) => out.push(p),
            None => return Err(ColouringError::NotProduct(s.vertex_id(v).to_string())),
        }
    }
    Ok(out)
}

/// The all-north colouring `c(v) = 1` iff every qubit factor of the vertex
/// ray is north. Valid on every product-ray scenario.
pub fn all_north_colouring(
    s: &Scenario,
    a: &RayAssignment,
) -> Result<Colouring, ColouringError> {
    let products = qubit_factorisation(s, a)?;
    all_north_colouring_of_products(s, &products)
}

/// As [`all_north_colouring`] when the product structure is already known.
pub fn all_north_colouring_of_products(
    s: &Scenario,
    products: &[ProductRay],
) -> Result<Colouring, ColouringError> {
    assert_eq!(products.len(), s.vertex_count());
    let mut values = Vec::with_capacity(products.len());
    for p in products {
        values.push(u8::from(is_all_north(p)?));
    }
    Ok(Colouring::new(values, s)?)
}

// --- Valuations on observables with product eigenbases ------------------------

/// A Hermitian observable together with a spectral decomposition whose
/// eigenprojectors are spanned by product rays.
#[derive(Debug, Clone)]
pub struct ObservableWithProductEigenbasis {
    matrix: CMatrix,
    eigenspaces: Vec<(f64, Vec<ProductRay>)>,
}

impl ObservableWithProductEigenbasis {
    /// Builds the observable `sum_j lambda_j Pi_j` from eigenvalues and
    /// product-ray support bases, checking completeness and reconstruction.
    pub fn new(eigenspaces: Vec<(f64, Vec<ProductRay>)>) -> Result<Self, ColouringError> {
        assert!(!eigenspaces.is_empty(), "observable needs at least one eigenspace");
        let dim = eigenspaces[0].1[0].flatten().dim();
        let mut matrix = CMatrix::zeros(dim, dim);
        let mut projector_sum = CMatrix::zeros(dim, dim);
        for (value, support) in &eigenspaces {
            for ray in support {
                let flat = ray.flatten();
                let mut proj = CMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        proj[(i, j)] = flat.amplitude(i) * flat.amplitude(j).conj();
                    }
                }
                projector_sum = projector_sum.add(&proj);
                matrix = matrix.add(&proj.scale(Complex64::new(*value, 0.0)));
            }
        }
        let defect = projector_sum.sub(&CMatrix::identity(dim)).max_abs();
        if defect > MODEL_SUM_TOL {
            return Err(ColouringError::IncompleteProjectors(defect));
        }
        Ok(ObservableWithProductEigenbasis { matrix, eigenspaces })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn eigenspaces(&self) -> &[(f64, Vec<ProductRay>)] {
        &self.eigenspaces
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Verifies `A = sum_j lambda_j Pi_j` against an externally supplied
    /// matrix, within `1e-9`.
    pub fn check_against(&self, m: &CMatrix) -> Result<(), ColouringError> {
        let defect = self.matrix.sub(m).max_abs();
        if defect > MODEL_SUM_TOL {
            return Err(ColouringError::BadDecomposition(defect));
        }
        Ok(())
    }

    /// The observable `g(A) = sum_j g(lambda_j) Pi_j` for a polynomial `g`
    /// given by its coefficients (constant term first). Eigenspaces whose
    /// images under `g` collide are merged.
    pub fn apply_polynomial(&self, coeffs: &[f64]) -> Result<Self, ColouringError> {
        let g = |x: f64| coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
        let mut merged: Vec<(f64, Vec<ProductRay>)> = Vec::new();
        for (value, support) in &self.eigenspaces {
            let gx = g(*value);
            match merged.iter_mut().find(|(v, _)| (*v - gx).abs() <= 1e-9) {
                Some((_, rays)) => rays.extend(support.iter().cloned()),
                None => merged.push((gx, support.clone())),
            }
        }
        ObservableWithProductEigenbasis::new(merged)
    }
}

const MODEL_SUM_TOL: f64 = 1e-9;

/// The valuation `v(A) = sum_j lambda_j c(Pi_j)` where the colouring value
/// of a projector is the sum of the colouring over its rank-one support
/// (the rank-one extension rule). Exactly one eigenprojector must receive
/// one; the result is then an eigenvalue of `A`.
pub fn valuation_from_colouring(
    a: &ObservableWithProductEigenbasis,
    colour: impl Fn(&ProductRay) -> Result<u8, ColouringError>,
) -> Result<f64, ColouringError> {
    let mut total = 0.0;
    let mut ones = 0usize;
    for (value, support) in a.eigenspaces() {
        let mut c = 0u32;
        for ray in support {
            c += u32::from(colour(ray)?);
        }
        if c > 0 {
            ones += usize::from(c > 0);
            if c > 1 {
                return Err(ColouringError::BadProjectorCount(c as usize));
            }
            total += value;
        }
    }
    if ones != 1 {
        return Err(ColouringError::BadProjectorCount(ones));
    }
    Ok(total)
}

/// The all-north colouring as a projector colouring.
pub fn all_north_value(ray: &ProductRay) -> Result<u8, ColouringError> {
    Ok(u8::from(is_all_north(ray)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{scenario_from_rays, BasisMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn computational_basis(n: usize) -> ProductBasis {
        let members = (0..1usize << n)
            .map(|k| {
                ProductRay::from_qubits(
                    (0..n)
                        .map(|j| {
                            if (k >> (n - 1 - j)) & 1 == 1 {
                                Ray::ket1()
                            } else {
                                Ray::ket0()
                            }
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        ProductBasis::new(members).unwrap()
    }

    #[test]
    fn pair_basis_shape() {
        let b = ProductBasis::pair(&Ray::qubit(0.4, 1.2)).unwrap();
        assert_eq!(b.members().len(), 2);
        assert_eq!(b.qubits(), 1);
    }

    #[test]
    fn split_reproduces_generic_two_qubit_form() {
        // {psi1 psi2, psi1 psi2_perp, psi1_perp psi3, psi1_perp psi3_perp}
        let psi1 = Ray::qubit(0.3, 0.1);
        let psi2 = Ray::qubit(1.1, 2.0);
        let psi3 = Ray::qubit(2.2, 4.0);
        let b = ProductBasis::split(
            0,
            &psi1,
            &ProductBasis::pair(&psi2).unwrap(),
            &ProductBasis::pair(&psi3).unwrap(),
        )
        .unwrap();
        assert_eq!(b.members().len(), 4);
        assert!(b.members()[0].factor(0).same_ray(&psi1, 1e-12));
        assert!(b.members()[0].factor(1).same_ray(&psi2, 1e-12));
        assert!(b.members()[1].factor(1).same_ray(&psi2.qubit_orthogonal().unwrap(), 1e-12));
        assert!(b.members()[2].factor(0).same_ray(&psi1.qubit_orthogonal().unwrap(), 1e-12));
        assert!(b.members()[2].factor(1).same_ray(&psi3, 1e-12));
        assert!(verify_exactly_one_north(&b).unwrap());
    }

    #[test]
    fn split_produces_three_qubit_branching() {
        // A three-level split: the first qubit decides which two-qubit
        // sub-basis applies, each itself of the generic two-qubit form.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let psi = haar_qubit(&mut rng);
        let lower = random_product_basis(2, &mut rng).unwrap();
        let upper = random_product_basis(2, &mut rng).unwrap();
        let b = ProductBasis::split(0, &psi, &lower, &upper).unwrap();
        assert_eq!(b.members().len(), 8);
        assert_eq!(b.qubits(), 3);
        assert!(verify_exactly_one_north(&b).unwrap());
    }

    #[test]
    fn exactly_one_north_examples() {
        assert!(verify_exactly_one_north(&computational_basis(2)).unwrap());
        let b = computational_basis(3);
        let norths: Vec<bool> = b.members().iter().map(|m| is_all_north(m).unwrap()).collect();
        assert_eq!(norths.iter().filter(|&&x| x).count(), 1);
        assert!(norths[0], "|000> is the all-north member");
    }

    #[test]
    fn random_bases_have_exactly_one_north_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for n in 2..=4 {
            for _ in 0..1000 {
                let b = random_product_basis(n, &mut rng).unwrap();
                assert!(verify_exactly_one_north(&b).unwrap(), "n = {n}");
            }
        }
    }

    #[test]
    fn all_north_colouring_on_computational_basis() {
        let b = computational_basis(2);
        let flat = b.flattened();
        let (s, a) = scenario_from_rays(&flat, BasisMode::AllBases).unwrap();
        let c = all_north_colouring(&s, &a).unwrap();
        assert_eq!(c.values()[0], 1, "|00> coloured one");
        assert_eq!(&c.values()[1..], &[0, 0, 0]);
    }

    #[test]
    fn all_north_colouring_rejects_entangled_assignments() {
        let bell0 = Ray::from_reals(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let bell1 = Ray::from_reals(&[1.0, 0.0, 0.0, -1.0]).unwrap();
        let bell2 = Ray::from_reals(&[0.0, 1.0, 1.0, 0.0]).unwrap();
        let bell3 = Ray::from_reals(&[0.0, 1.0, -1.0, 0.0]).unwrap();
        let (s, a) =
            scenario_from_rays(&[bell0, bell1, bell2, bell3], BasisMode::AllBases).unwrap();
        assert!(matches!(
            all_north_colouring(&s, &a),
            Err(ColouringError::NotProduct(_))
        ));
    }

    fn z_tensor_i_observable() -> ObservableWithProductEigenbasis {
        let plus_space = vec![
            ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket0()]).unwrap(),
            ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket1()]).unwrap(),
        ];
        let minus_space = vec![
            ProductRay::from_qubits(vec![Ray::ket1(), Ray::ket0()]).unwrap(),
            ProductRay::from_qubits(vec![Ray::ket1(), Ray::ket1()]).unwrap(),
        ];
        ObservableWithProductEigenbasis::new(vec![(1.0, plus_space), (-1.0, minus_space)])
            .unwrap()
    }

    #[test]
    fn valuation_of_z_tensor_i_is_plus_one() {
        let obs = z_tensor_i_observable();
        let z = CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let id = CMatrix::identity(2);
        obs.check_against(&z.kron(&id)).unwrap();
        let v = valuation_from_colouring(&obs, all_north_value).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn valuation_of_identity_is_one() {
        let support = computational_basis(2).members().to_vec();
        let obs = ObservableWithProductEigenbasis::new(vec![(1.0, support)]).unwrap();
        let v = valuation_from_colouring(&obs, all_north_value).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn valuation_func_on_square() {
        let obs = z_tensor_i_observable();
        let squared = obs.apply_polynomial(&[0.0, 0.0, 1.0]).unwrap();
        let v = valuation_from_colouring(&obs, all_north_value).unwrap();
        let v2 = valuation_from_colouring(&squared, all_north_value).unwrap();
        assert!((v2 - v * v).abs() < 1e-12);
    }

    #[test]
    fn valuation_spec_and_func_on_random_observables() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let n = 2;
            let basis = random_product_basis(n, &mut rng).unwrap();
            // Partition the members into two eigenspaces with random values.
            let v1: f64 = rng.random_range(-3.0..3.0);
            let mut v2: f64 = rng.random_range(-3.0..3.0);
            if (v1 - v2).abs() < 1e-3 {
                v2 += 1.0;
            }
            let members = basis.members();
            let obs = ObservableWithProductEigenbasis::new(vec![
                (v1, members[..2].to_vec()),
                (v2, members[2..].to_vec()),
            ])
            .unwrap();
            let val = valuation_from_colouring(&obs, all_north_value).unwrap();
            assert!(
                (val - v1).abs() < 1e-9 || (val - v2).abs() < 1e-9,
                "valuation must land in the spectrum"
            );
            // FUNC for g of degree <= 3.
            let coeffs = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let g = |x: f64| coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
            let gval = valuation_from_colouring(&obs.apply_polynomial(&coeffs).unwrap(), all_north_value)
                .unwrap();
            assert!((gval - g(val)).abs() < 1e-9, "FUNC violated: {gval} vs {}", g(val));
        }
    }
}
