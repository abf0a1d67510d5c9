//! Complex rays of finite-dimensional Hilbert spaces.
//!
//! A ray is a unit vector identified up to global phase. Rays are stored
//! in a canonical gauge (first amplitude of modulus above [`PHASE_ANCHOR_TOL`]
//! is real and strictly positive) so that equality, deduplication and JSON
//! round-trips are well defined.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Tolerance below which an inner product counts as zero.
pub const ORTHO_TOL: f64 = 1e-9;
/// Tolerance on the Euclidean norm of a stored ray.
pub const NORM_TOL: f64 = 1e-12;
/// Smallest modulus an amplitude may have and still anchor the canonical phase.
pub const PHASE_ANCHOR_TOL: f64 = 1e-9;
/// Half-width of the band around the equator (and the poles of `phi`)
/// inside which the boundary rules of the northern hemisphere apply.
pub const NORTH_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RayError {
    #[error("ray must have at least one amplitude")]
    Empty,
    #[error("amplitudes must be finite")]
    NonFinite,
    #[error("vector norm {0} too small to normalise")]
    ZeroNorm(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("expected a qubit ray, got dimension {0}")]
    NotQubit(usize),
    #[error("factor dimensions {dims:?} do not multiply to ray dimension {dim}")]
    BadFactorDims { dims: Vec<usize>, dim: usize },
    #[error("empty factor list")]
    NoFactors,
    #[error("basis of dimension {dim} needs {dim} rays, got {got}")]
    BasisSize { dim: usize, got: usize },
    #[error("basis rays {0} and {1} are not orthogonal")]
    BasisNotOrthogonal(usize, usize),
    #[error("basis rays {0} and {1} coincide")]
    BasisDuplicate(usize, usize),
}

/// A ray: a unit vector in `C^dim`, stored in canonical phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    amplitudes: Vec<Complex64>,
}

impl Ray {
    /// Normalises and canonicalises the given amplitudes.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, RayError> {
        if amplitudes.is_empty() {
            return Err(RayError::Empty);
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(RayError::NonFinite);
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(RayError::ZeroNorm(norm));
        }
        let mut amps: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        canonicalise_phase(&mut amps);
        Ok(Ray { amplitudes: amps })
    }

    /// Builds a ray from `(re, im)` pairs.
    pub fn from_parts(parts: &[(f64, f64)]) -> Result<Self, RayError> {
        Ray::new(parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect())
    }

    /// Builds a real ray (imaginary parts zero).
    pub fn from_reals(parts: &[f64]) -> Result<Self, RayError> {
        Ray::new(parts.iter().map(|&re| Complex64::new(re, 0.0)).collect())
    }

    /// The computational basis vector `|k>` of dimension `dim`.
    pub fn basis_vector(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis vector index out of range");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        Ray { amplitudes: amps }
    }

    /// `|0>` of a qubit.
    pub fn ket0() -> Self {
        Ray::basis_vector(2, 0)
    }

    /// `|1>` of a qubit.
    pub fn ket1() -> Self {
        Ray::basis_vector(2, 1)
    }

    /// `|+> = (|0> + |1>)/sqrt(2)`.
    pub fn plus() -> Self {
        Ray::from_reals(&[1.0, 1.0]).unwrap()
    }

    /// `|-> = (|0> - |1>)/sqrt(2)`.
    pub fn minus() -> Self {
        Ray::from_reals(&[1.0, -1.0]).unwrap()
    }

    /// The qubit ray `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
    pub fn qubit(theta: f64, phi: f64) -> Self {
        let half = theta / 2.0;
        Ray::new(vec![
            Complex64::new(half.cos(), 0.0),
            Complex64::from_polar(half.sin(), phi),
        ])
        .expect("qubit amplitudes are finite and normalised")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, k: usize) -> Complex64 {
        self.amplitudes[k]
    }

    /// Componentwise comparison in the canonical gauge.
    pub fn approx_eq(&self, other: &Ray, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Whether `self` and `other` describe the same ray (up to global phase),
    /// measured by `1 - |<a|b>|`.
    pub fn same_ray(&self, other: &Ray, tol: f64) -> bool {
        self.dim() == other.dim() && (1.0 - inner_product(self, other).unwrap().norm()) <= tol
    }

    /// The unique orthogonal qubit ray.
    pub fn qubit_orthogonal(&self) -> Result<Ray, RayError> {
        if self.dim() != 2 {
            return Err(RayError::NotQubit(self.dim()));
        }
        Ray::new(vec![self.amplitudes[1].conj(), -self.amplitudes[0].conj()])
    }
}

/// Fixes the global phase so the first amplitude with modulus above
/// [`PHASE_ANCHOR_TOL`] is real and strictly positive.
fn canonicalise_phase(amps: &mut [Complex64]) {
    let anchor = amps
        .iter()
        .find(|a| a.norm() > PHASE_ANCHOR_TOL)
        .copied()
        .unwrap_or_else(|| {
            // Pathological near-zero vector after normalisation; fall back to
            // the largest amplitude.
            amps.iter()
                .copied()
                .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
                .unwrap()
        });
    let phase = anchor / anchor.norm();
    let correction = phase.conj();
    for a in amps.iter_mut() {
        *a *= correction;
    }
}

/// `<a|b>`, conjugate-linear in the first argument.
pub fn inner_product(a: &Ray, b: &Ray) -> Result<Complex64, RayError> {
    if a.dim() != b.dim() {
        return Err(RayError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Whether `|<a|b>| <= tol`.
pub fn is_orthogonal(a: &Ray, b: &Ray, tol: f64) -> Result<bool, RayError> {
    assert!(tol > 0.0, "orthogonality tolerance must be positive");
    Ok(inner_product(a, b)?.norm() <= tol)
}

/// Row-major Kronecker product of the factors, re-canonicalised.
pub fn tensor(factors: &[Ray]) -> Result<Ray, RayError> {
    let mut iter = factors.iter();
    let first = iter.next().ok_or(RayError::NoFactors)?;
    let mut amps = first.amplitudes.clone();
    for f in iter {
        let mut next = Vec::with_capacity(amps.len() * f.dim());
        for a in &amps {
            for b in &f.amplitudes {
                next.push(a * b);
            }
        }
        amps = next;
    }
    Ray::new(amps)
}

/// A point on the Bloch sphere: polar angle `theta` in `[0, pi]`,
/// azimuth `phi` stored modulo `2*pi` in `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub theta: f64,
    pub phi: f64,
}

impl BlochPoint {
    pub fn new(theta: f64, phi: f64) -> Self {
        debug_assert!((0.0..=PI + 1e-12).contains(&theta));
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        BlochPoint { theta, phi }
    }

    /// The unit vector in `R^3` with these spherical coordinates.
    pub fn unit_vector(&self) -> [f64; 3] {
        [
            self.theta.sin() * self.phi.cos(),
            self.theta.sin() * self.phi.sin(),
            self.theta.cos(),
        ]
    }

    /// Spherical coordinates of a unit vector.
    pub fn from_unit_vector(v: [f64; 3]) -> Self {
        BlochPoint::new(v[2].clamp(-1.0, 1.0).acos(), v[1].atan2(v[0]))
    }

    /// The qubit ray sitting at this point.
    pub fn ray(&self) -> Ray {
        Ray::qubit(self.theta, self.phi)
    }
}

/// Bloch coordinates of a qubit ray. At the poles (`theta` in `{0, pi}`)
/// the azimuth is gauge-fixed to zero.
pub fn bloch_of(q: &Ray) -> Result<BlochPoint, RayError> {
    if q.dim() != 2 {
        return Err(RayError::NotQubit(q.dim()));
    }
    let a0 = q.amplitudes[0];
    let a1 = q.amplitudes[1];
    let r0 = a0.norm();
    let r1 = a1.norm();
    let theta = 2.0 * r1.atan2(r0);
    if r0 <= NORM_TOL || r1 <= NORM_TOL {
        return Ok(BlochPoint::new(theta, 0.0));
    }
    // Global-phase free azimuth: arg(a1 * conj(a0)).
    let rel = a1 * a0.conj();
    Ok(BlochPoint::new(theta, rel.im.atan2(rel.re)))
}

/// Whether the qubit ray lies in the closed-boundary northern hemisphere:
/// `theta < pi/2`, or `theta = pi/2` with azimuth in `(pi, 2*pi]` where
/// `phi = 0` counts as `2*pi` (so `|+>` is north and `|->` is not).
/// Boundary comparisons use a band of width [`NORTH_EPS`].
pub fn is_north(q: &Ray) -> Result<bool, RayError> {
    let b = bloch_of(q)?;
    if b.theta < FRAC_PI_2 - NORTH_EPS {
        return Ok(true);
    }
    if b.theta > FRAC_PI_2 + NORTH_EPS {
        return Ok(false);
    }
    Ok(equator_phi_is_north(b.phi))
}

/// The equator rule shared by [`is_north`] and the hidden-variable response:
/// map `phi` near 0 to `2*pi`, then keep the half-open arc above `pi`.
pub(crate) fn equator_phi_is_north(phi: f64) -> bool {
    let phi = if phi < NORTH_EPS || phi > 2.0 * PI - NORTH_EPS { 2.0 * PI } else { phi };
    phi >= PI + NORTH_EPS
}

/// An ordered tensor factorisation of a ray, one factor per subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductRay {
    factors: Vec<Ray>,
}

impl ProductRay {
    pub fn new(factors: Vec<Ray>) -> Result<Self, RayError> {
        if factors.is_empty() {
            return Err(RayError::NoFactors);
        }
        Ok(ProductRay { factors })
    }

    /// A product of qubit factors given as existing rays.
    pub fn from_qubits(factors: Vec<Ray>) -> Result<Self, RayError> {
        for f in &factors {
            if f.dim() != 2 {
                return Err(RayError::NotQubit(f.dim()));
            }
        }
        ProductRay::new(factors)
    }

    pub fn factors(&self) -> &[Ray] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &Ray {
        &self.factors[j]
    }

    pub fn subsystems(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Ray::dim).collect()
    }

    pub fn is_all_qubits(&self) -> bool {
        self.factors.iter().all(|f| f.dim() == 2)
    }

    /// The flattened tensor-product ray.
    pub fn flatten(&self) -> Ray {
        tensor(&self.factors).expect("non-empty factor list")
    }

    pub fn approx_eq(&self, other: &ProductRay, tol: f64) -> bool {
        self.factors.len() == other.factors.len()
            && self
                .factors
                .iter()
                .zip(&other.factors)
                .all(|(a, b)| a.same_ray(b, tol))
    }
}

/// True when every factor of an all-qubit product ray is north.
pub fn is_all_north(p: &ProductRay) -> Result<bool, RayError> {
    for f in p.factors() {
        if f.dim() != 2 {
            return Err(RayError::NotQubit(f.dim()));
        }
    }
    for f in p.factors() {
        if !is_north(f)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A complete set of mutually orthogonal rays (an orthonormal basis).
#[derive(Debug, Clone)]
pub struct Basis {
    rays: Vec<Ray>,
}

impl Basis {
    pub fn new(rays: Vec<Ray>) -> Result<Self, RayError> {
        let dim = rays.first().map(Ray::dim).unwrap_or(0);
        if rays.len() != dim || dim == 0 {
            return Err(RayError::BasisSize { dim, got: rays.len() });
        }
        for i in 0..rays.len() {
            for j in (i + 1)..rays.len() {
                if rays[i].approx_eq(&rays[j], ORTHO_TOL) {
                    return Err(RayError::BasisDuplicate(i, j));
                }
                if !is_orthogonal(&rays[i], &rays[j], ORTHO_TOL)? {
                    return Err(RayError::BasisNotOrthogonal(i, j));
                }
            }
        }
        Ok(Basis { rays })
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn dim(&self) -> usize {
        self.rays.len()
    }
}

/// Attempts to factorise `r` into a tensor product over subsystems of the
/// given dimensions. Succeeds when every single-subsystem reduced density
/// operator has purity at least `1 - tol`; the factors are the dominant
/// eigenvectors of the reduced operators.
pub fn is_product_ray(r: &Ray, dims: &[usize], tol: f64) -> Result<Option<ProductRay>, RayError> {
    let prod: usize = dims.iter().product();
    if prod != r.dim() || dims.contains(&0) {
        return Err(RayError::BadFactorDims { dims: dims.to_vec(), dim: r.dim() });
    }
    if dims.len() == 1 {
        return Ok(Some(ProductRay::new(vec![r.clone()])?));
    }
    let mut factors = Vec::with_capacity(dims.len());
    for j in 0..dims.len() {
        let reduced = reduced_density(r, dims, j);
        let purity: f64 = reduced
            .iter()
            .flat_map(|row| row.iter())
            .map(|c| c.norm_sqr())
            .sum();
        if purity < 1.0 - tol {
            return Ok(None);
        }
        factors.push(dominant_eigenvector(&reduced));
    }
    Ok(Some(ProductRay::new(factors)?))
}

/// Reduced density matrix of subsystem `j` of the pure state `r`.
fn reduced_density(r: &Ray, dims: &[usize], j: usize) -> Vec<Vec<Complex64>> {
    let dj = dims[j];
    // Row-major mixed radix: stride of subsystem j and size of the blocks
    // to its left.
    let right: usize = dims[j + 1..].iter().product();
    let left: usize = dims[..j].iter().product();
    let mut rho = vec![vec![Complex64::new(0.0, 0.0); dj]; dj];
    let amps = r.amplitudes();
    for l in 0..left {
        for rr in 0..right {
            let base = l * dj * right + rr;
            for a in 0..dj {
                let va = amps[base + a * right];
                for b in 0..dj {
                    let vb = amps[base + b * right];
                    rho[a][b] += va * vb.conj();
                }
            }
        }
    }
    rho
}

/// Dominant eigenvector of a small Hermitian PSD matrix by power iteration.
fn dominant_eigenvector(m: &[Vec<Complex64>]) -> Ray {
    let d = m.len();
    // Start from the column with the largest diagonal entry; for a
    // near-rank-one matrix this is never orthogonal to the dominant space.
    let start = (0..d)
        .max_by(|&a, &b| m[a][a].re.partial_cmp(&m[b][b].re).unwrap())
        .unwrap();
    let mut v: Vec<Complex64> = (0..d).map(|i| m[i][start]).collect();
    let norm = |w: &[Complex64]| w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let n0 = norm(&v);
    if n0 < 1e-15 {
        v = vec![Complex64::new(0.0, 0.0); d];
        v[start] = Complex64::new(1.0, 0.0);
    }
    for _ in 0..64 {
        let mut next = vec![Complex64::new(0.0, 0.0); d];
        for (i, row) in m.iter().enumerate() {
            for (k, entry) in row.iter().enumerate() {
                next[i] += entry * v[k];
            }
        }
        let n = norm(&next);
        if n < 1e-15 {
            break;
        }
        for c in next.iter_mut() {
            *c /= n;
        }
        v = next;
    }
    Ray::new(v).expect("power iteration yields a unit vector")
}

// --- JSON form -------------------------------------------------------------
//
// Ray:        {"dim": d, "amplitudes": [[re, im], ...]}
// ProductRay: {"factors": [Ray, ...]}

#[derive(Serialize, Deserialize)]
struct RayRepr {
    dim: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl Serialize for Ray {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RayRepr {
            dim: self.dim(),
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ray {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = RayRepr::deserialize(d)?;
        if repr.amplitudes.len() != repr.dim {
            return Err(serde::de::Error::custom(format!(
                "ray dim {} does not match {} amplitudes",
                repr.dim,
                repr.amplitudes.len()
            )));
        }
        Ray::new(repr.amplitudes.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct ProductRayRepr {
    factors: Vec<Ray>,
}

impl Serialize for ProductRay {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ProductRayRepr { factors: self.factors.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProductRay {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = ProductRayRepr::deserialize(d)?;
        ProductRay::new(repr.factors).map_err(serde::de::Error::custom)
    }
}
