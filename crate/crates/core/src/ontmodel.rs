//! An outcome-deterministic hidden-variable model for product states and
//! unentangled measurements of n qubits.
//!
//! The ontic space is one Bloch sphere per qubit. A product projection
//! responds with outcome one exactly when, for every qubit, rotating the
//! ontic point to the pole carries the measured factor into the northern
//! hemisphere. Preparing a product state concentrates each qubit's ontic
//! point on the hemisphere around the prepared Bloch vector with density
//! `(1/pi) (chi . lambda)` there, which reproduces the Born rule.
//!
//! Sampling is seeded and counter-based: sample index ranges are split into
//! fixed batches, each driven by its own ChaCha8 stream derived from the
//! seed, so results are bit-identical for any worker count.

use crate::colouring::ProductBasis;
use crate::rays::{bloch_of, inner_product, BlochPoint, ProductRay, Ray, RayError};
use num_complex::Complex64;
use crate::scenario::{DensityOperator, ScenarioError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

/// Samples per ChaCha stream; fixed so that results do not depend on the
/// number of workers.
const BATCH: u64 = 1 << 14;

#[derive(Debug, Error)]
pub enum OntModelError {
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("qubit count mismatch: {0} vs {1}")]
    QubitCountMismatch(usize, usize),
    #[error("mixture weights must be nonnegative and sum to one (sum {0})")]
    BadWeights(f64),
    #[error("mixture must not be empty")]
    EmptyMixture,
    #[error("sample count must be positive")]
    NoSamples,
    #[error("{got} basis members responded for one sample; the basis is not a complete product basis or a boundary pathology occurred")]
    AmbiguousOutcome { got: usize },
}

/// One point on each qubit's Bloch sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct OnticState {
    points: Vec<BlochPoint>,
}

impl OnticState {
    pub fn new(points: Vec<BlochPoint>) -> Self {
        assert!(!points.is_empty(), "ontic state needs at least one qubit");
        OnticState { points }
    }

    pub fn points(&self) -> &[BlochPoint] {
        &self.points
    }

    pub fn qubits(&self) -> usize {
        self.points.len()
    }
}

/// A product pure state or a finite mixture of product pure states.
#[derive(Debug, Clone)]
pub enum EpistemicState {
    PureProduct(ProductRay),
    Mixture(Vec<(f64, ProductRay)>),
}

impl EpistemicState {
    pub fn pure(chi: ProductRay) -> Self {
        EpistemicState::PureProduct(chi)
    }

    /// A mixture of product states. Note that the induced ontic
    /// distribution depends on the decomposition, not only on the density
    /// operator: two decompositions of the same separable state reproduce
    /// identical outcome statistics from different ontic ensembles, which
    /// makes the extension preparation contextual.
    pub fn mixture(parts: Vec<(f64, ProductRay)>) -> Result<Self, OntModelError> {
        if parts.is_empty() {
            return Err(OntModelError::EmptyMixture);
        }
        let sum: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(OntModelError::BadWeights(sum));
        }
        let n = parts[0].1.subsystems();
        if parts.iter().any(|(_, chi)| chi.subsystems() != n) {
            return Err(OntModelError::QubitCountMismatch(n, 0));
        }
        Ok(EpistemicState::Mixture(parts))
    }

    pub fn qubits(&self) -> usize {
        match self {
            EpistemicState::PureProduct(chi) => chi.subsystems(),
            EpistemicState::Mixture(parts) => parts[0].1.subsystems(),
        }
    }

    /// The Born probability of the product projection `psi`.
    pub fn born_probability(&self, psi: &ProductRay) -> Result<f64, OntModelError> {
        let overlap = |chi: &ProductRay| -> Result<f64, OntModelError> {
            if chi.subsystems() != psi.subsystems() {
                return Err(OntModelError::QubitCountMismatch(chi.subsystems(), psi.subsystems()));
            }
            let mut p = 1.0;
            for (a, b) in psi.factors().iter().zip(chi.factors()) {
                p *= inner_product(a, b)?.norm_sqr();
            }
            Ok(p)
        };
        match self {
            EpistemicState::PureProduct(chi) => overlap(chi),
            EpistemicState::Mixture(parts) => {
                let mut p = 0.0;
                for (w, chi) in parts {
                    p += w * overlap(chi)?;
                }
                Ok(p)
            }
        }
    }

    /// The density operator on the flattened Hilbert space.
    pub fn density_operator(&self) -> Result<DensityOperator, OntModelError> {
        Ok(match self {
            EpistemicState::PureProduct(chi) => DensityOperator::pure(&chi.flatten()),
            EpistemicState::Mixture(parts) => {
                let flat: Vec<(f64, Ray)> =
                    parts.iter().map(|(w, chi)| (*w, chi.flatten())).collect();
                DensityOperator::mixture(&flat)?
            }
        })
    }
}

/// Monte Carlo configuration. `jobs` only affects wall-clock time; results
/// are identical for every value.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub samples: u64,
    pub seed: u64,
    pub jobs: usize,
}

impl SimConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        SimConfig { samples, seed, jobs: 1 }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }
}

/// A measured qubit factor prepared for fast response evaluation: its
/// amplitudes together with its Bloch vector.
struct MeasuredFactor {
    a0: Complex64,
    a1: Complex64,
    bloch: [f64; 3],
}

impl MeasuredFactor {
    fn new(factor: &Ray) -> Result<Self, OntModelError> {
        if factor.dim() != 2 {
            return Err(OntModelError::Ray(RayError::NotQubit(factor.dim())));
        }
        Ok(MeasuredFactor {
            a0: factor.amplitude(0),
            a1: factor.amplitude(1),
            bloch: bloch_of(factor)?.unit_vector(),
        })
    }
}

/// Amplitudes `(cos(theta/2), e^{i phi} sin(theta/2))` of the qubit ray at
/// an ontic point.
fn lam_amplitudes(p: &BlochPoint) -> (Complex64, Complex64) {
    let (s, c) = (p.theta / 2.0).sin_cos();
    (Complex64::new(c, 0.0), Complex64::from_polar(s, p.phi))
}

/// Whether `U_lambda |psi_j>` is north. Rotations preserve dot products, so
/// the polar angle of the rotated factor satisfies
/// `cos theta_rot = psi_vec . lambda_vec`; only inside the `NORTH_EPS` band
/// does the azimuth matter, and then the full amplitudes decide via the
/// shared equator rule.
fn rotated_factor_is_north(f: &MeasuredFactor, lam_vec: [f64; 3]) -> bool {
    let dot = f.bloch[0] * lam_vec[0] + f.bloch[1] * lam_vec[1] + f.bloch[2] * lam_vec[2];
    if dot > crate::rays::NORTH_EPS {
        return true;
    }
    if dot < -crate::rays::NORTH_EPS {
        return false;
    }
    // Equator band: U_lambda |psi> = <lambda|psi> |0> + <lambda_perp|psi> |1>.
    let point = BlochPoint::from_unit_vector(lam_vec);
    let (l0, l1) = lam_amplitudes(&point);
    let c0 = l0.conj() * f.a0 + l1.conj() * f.a1;
    let c1 = l1 * f.a0 - l0 * f.a1;
    let rel = c1 * c0.conj();
    let phi = rel.im.atan2(rel.re).rem_euclid(2.0 * PI);
    crate::rays::equator_phi_is_north(phi)
}

/// The deterministic response of the product projection `psi` in ontic
/// state `lam`: one iff for every qubit the rotation taking the ontic point
/// to the pole maps the measured factor into the northern hemisphere.
pub fn response(psi: &ProductRay, lam: &OnticState) -> Result<u8, OntModelError> {
    if psi.subsystems() != lam.qubits() {
        return Err(OntModelError::QubitCountMismatch(psi.subsystems(), lam.qubits()));
    }
    for (factor, point) in psi.factors().iter().zip(lam.points()) {
        let f = MeasuredFactor::new(factor)?;
        if !rotated_factor_is_north(&f, point.unit_vector()) {
            return Ok(0);
        }
    }
    Ok(1)
}

/// The per-qubit sampling frame: the rotation that carries the pole to the
/// prepared Bloch vector (axis `pole x centre`); the identity when the
/// centre is the pole, a half-turn about x when it is the antipode.
#[derive(Clone)]
struct QubitFrame {
    axis: [f64; 2],
    sin_angle: f64,
    cos_angle: f64,
    aligned: bool,
}

impl QubitFrame {
    fn new(centre: &BlochPoint) -> Self {
        let c = centre.unit_vector();
        let sin_angle = (c[0] * c[0] + c[1] * c[1]).sqrt();
        if sin_angle <= 1e-12 {
            return QubitFrame {
                axis: [1.0, 0.0],
                sin_angle: 0.0,
                cos_angle: if c[2] >= 0.0 { 1.0 } else { -1.0 },
                aligned: true,
            };
        }
        QubitFrame {
            axis: [-c[1] / sin_angle, c[0] / sin_angle],
            sin_angle,
            cos_angle: c[2],
            aligned: false,
        }
    }

    fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        if self.aligned {
            // Identity at the pole; half-turn about x at the antipode.
            if self.cos_angle >= 0.0 {
                return v;
            }
            return [v[0], -v[1], -v[2]];
        }
        let axis = [self.axis[0], self.axis[1], 0.0];
        let dot = axis[0] * v[0] + axis[1] * v[1];
        let cross = [
            axis[1] * v[2],
            -axis[0] * v[2],
            axis[0] * v[1] - axis[1] * v[0],
        ];
        let scale = dot * (1.0 - self.cos_angle);
        [
            v[0] * self.cos_angle + cross[0] * self.sin_angle + axis[0] * scale,
            v[1] * self.cos_angle + cross[1] * self.sin_angle + axis[1] * scale,
            v[2] * self.cos_angle + cross[2] * self.sin_angle + axis[2] * scale,
        ]
    }

    /// One hemisphere draw: `theta' = arcsin(sqrt(u))` realised through
    /// `sin theta' = sqrt(u)`, azimuth uniform, rotated to the global frame.
    fn sample(&self, rng: &mut impl Rng) -> [f64; 3] {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        let sin_t = u.sqrt();
        let cos_t = (1.0 - u).sqrt();
        let (sp, cp) = (2.0 * PI * v).sin_cos();
        self.rotate([sin_t * cp, sin_t * sp, cos_t])
    }
}

/// Draws one ontic state for the product state `chi`. Each qubit is
/// independent: in the frame where the prepared Bloch vector is the pole,
/// `theta' = arcsin(sqrt(u))` (density proportional to `cos theta'` on the
/// hemisphere) and `phi'` uniform, then rotated back to the global frame.
pub fn sample_ontic(chi: &ProductRay, rng: &mut impl Rng) -> Result<OnticState, OntModelError> {
    let mut points = Vec::with_capacity(chi.subsystems());
    for factor in chi.factors() {
        if factor.dim() != 2 {
            return Err(OntModelError::Ray(RayError::NotQubit(factor.dim())));
        }
        let frame = QubitFrame::new(&bloch_of(factor)?);
        points.push(BlochPoint::from_unit_vector(frame.sample(rng)));
    }
    Ok(OnticState::new(points))
}

/// Draws an ontic state from an epistemic state (mixtures first draw a
/// component with its weight).
pub fn sample_from_state(
    state: &EpistemicState,
    rng: &mut impl Rng,
) -> Result<OnticState, OntModelError> {
    match state {
        EpistemicState::PureProduct(chi) => sample_ontic(chi, rng),
        EpistemicState::Mixture(parts) => {
            let x: f64 = rng.random();
            let mut acc = 0.0;
            for (w, chi) in parts {
                acc += w;
                if x < acc {
                    return sample_ontic(chi, rng);
                }
            }
            sample_ontic(&parts.last().unwrap().1, rng)
        }
    }
}

/// Per-component sampling frames of an epistemic state, in mixture order.
struct PreparedState {
    mixture: bool,
    components: Vec<(f64, Vec<QubitFrame>)>,
}

impl PreparedState {
    fn new(state: &EpistemicState) -> Result<Self, OntModelError> {
        let frames_of = |chi: &ProductRay| -> Result<Vec<QubitFrame>, OntModelError> {
            chi.factors()
                .iter()
                .map(|f| {
                    if f.dim() != 2 {
                        return Err(OntModelError::Ray(RayError::NotQubit(f.dim())));
                    }
                    Ok(QubitFrame::new(&bloch_of(f)?))
                })
                .collect()
        };
        let (mixture, components) = match state {
            EpistemicState::PureProduct(chi) => (false, vec![(1.0, frames_of(chi)?)]),
            EpistemicState::Mixture(parts) => (
                true,
                parts
                    .iter()
                    .map(|(w, chi)| Ok((*w, frames_of(chi)?)))
                    .collect::<Result<_, OntModelError>>()?,
            ),
        };
        Ok(PreparedState { mixture, components })
    }

    /// Samples every qubit's ontic vector into `out`, consuming the same
    /// random stream as [`sample_from_state`].
    fn sample_into(&self, rng: &mut impl Rng, out: &mut Vec<[f64; 3]>) {
        let frames = if self.mixture {
            let x: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = &self.components[self.components.len() - 1].1;
            for (w, frames) in &self.components {
                acc += w;
                if x < acc {
                    chosen = frames;
                    break;
                }
            }
            chosen
        } else {
            &self.components[0].1
        };
        out.clear();
        for frame in frames {
            out.push(frame.sample(rng));
        }
    }
}

/// Runs `per_batch` over every sample batch (each with its own seeded
/// stream) on `jobs` workers and sums the integer outputs.
fn run_batches<const K: usize>(
    cfg: &SimConfig,
    per_batch: impl Fn(&mut ChaCha8Rng, u64) -> Result<[u64; K], OntModelError> + Sync,
) -> Result<[u64; K], OntModelError> {
    if cfg.samples == 0 {
        return Err(OntModelError::NoSamples);
    }
    let batches = cfg.samples.div_ceil(BATCH);
    let next = AtomicU64::new(0);
    let totals = std::sync::Mutex::new([0u64; K]);
    let error = std::sync::Mutex::new(None);
    let workers = cfg.jobs.max(1).min(batches as usize);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut local = [0u64; K];
                loop {
                    let b = next.fetch_add(1, Ordering::Relaxed);
                    if b >= batches {
                        break;
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(b);
                    let count = (cfg.samples - b * BATCH).min(BATCH);
                    match per_batch(&mut rng, count) {
                        Ok(part) => {
                            for (t, p) in local.iter_mut().zip(part) {
                                *t += p;
                            }
                        }
                        Err(e) => {
                            *error.lock().unwrap() = Some(e);
                            break;
                        }
                    }
                }
                let mut totals = totals.lock().unwrap();
                for (t, p) in totals.iter_mut().zip(local) {
                    *t += p;
                }
            });
        }
    });
    if let Some(e) = error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(totals.into_inner().unwrap())
}

/// Monte Carlo estimate of the probability of outcome `psi` on `state`,
/// with the binomial standard error `sqrt(p(1-p)/N)`.
pub fn simulate_probability(
    psi: &ProductRay,
    state: &EpistemicState,
    cfg: &SimConfig,
) -> Result<(f64, f64), OntModelError> {
    if psi.subsystems() != state.qubits() {
        return Err(OntModelError::QubitCountMismatch(psi.subsystems(), state.qubits()));
    }
    let measured: Vec<MeasuredFactor> =
        psi.factors().iter().map(MeasuredFactor::new).collect::<Result<_, _>>()?;
    let prepared = PreparedState::new(state)?;
    let [hits] = run_batches(cfg, |rng, count| {
        let mut h = 0u64;
        let mut lam = Vec::with_capacity(measured.len());
        for _ in 0..count {
            prepared.sample_into(rng, &mut lam);
            let all_north =
                measured.iter().zip(&lam).all(|(f, &v)| rotated_factor_is_north(f, v));
            h += u64::from(all_north);
        }
        Ok([h])
    })?;
    let n = cfg.samples as f64;
    let p = hits as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

/// `<psi| rho |psi>`.
pub fn born(psi: &Ray, rho: &DensityOperator) -> Result<f64, OntModelError> {
    Ok(rho.expectation(psi)?)
}

/// Estimated outcome frequency of one basis member.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MemberFrequency {
    pub member: usize,
    pub count: u64,
    pub frequency: f64,
    pub std_error: f64,
}

/// Simulates a measurement in a product basis: for every ontic sample
/// exactly one member responds (checked), and the member counts give the
/// outcome frequencies.
pub fn simulate_basis_measurement(
    basis: &ProductBasis,
    state: &EpistemicState,
    cfg: &SimConfig,
) -> Result<Vec<MemberFrequency>, OntModelError> {
    if basis.qubits() != state.qubits() {
        return Err(OntModelError::QubitCountMismatch(basis.qubits(), state.qubits()));
    }
    let members: Vec<Vec<MeasuredFactor>> = basis
        .members()
        .iter()
        .map(|m| m.factors().iter().map(MeasuredFactor::new).collect())
        .collect::<Result<_, _>>()?;
    let prepared = PreparedState::new(state)?;
    let mut counts = vec![0u64; members.len()];
    // Fixed-size accumulators keep run_batches simple; fold member counts
    // into chunks of eight.
    let chunks = members.len().div_ceil(8);
    for chunk in 0..chunks {
        let lo = chunk * 8;
        let hi = (lo + 8).min(members.len());
        let part = run_batches::<8>(cfg, |rng, count| {
            let mut local = [0u64; 8];
            let mut lam = Vec::with_capacity(basis.qubits());
            for _ in 0..count {
                prepared.sample_into(rng, &mut lam);
                let mut winner = None;
                for (k, m) in members.iter().enumerate() {
                    let hit = m.iter().zip(&lam).all(|(f, &v)| rotated_factor_is_north(f, v));
                    if hit {
                        if winner.is_some() {
                            return Err(OntModelError::AmbiguousOutcome { got: 2 });
                        }
                        winner = Some(k);
                    }
                }
                let Some(k) = winner else {
                    return Err(OntModelError::AmbiguousOutcome { got: 0 });
                };
                if (lo..hi).contains(&k) {
                    local[k - lo] += 1;
                }
            }
            Ok(local)
        })?;
        for (k, c) in (lo..hi).zip(part) {
            counts[k] = c;
        }
    }
    let n = cfg.samples as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(member, count)| {
            let f = count as f64 / n;
            MemberFrequency {
                member,
                count,
                frequency: f,
                std_error: (f * (1.0 - f) / n).sqrt(),
            }
        })
        .collect())
}

// --- Hemisphere integral -------------------------------------------------------

/// Which value the Heaviside step takes at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeavisideConvention {
    H0,
    H1,
}

fn heaviside(x: f64, convention: HeavisideConvention) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        match convention {
            HeavisideConvention::H0 => 0.0,
            HeavisideConvention::H1 => 1.0,
        }
    }
}

/// Numerically integrates the single-qubit response-times-density product
/// `(1/pi) H^y(psi . lambda) H^0(chi . lambda) (chi . lambda)` over the
/// sphere. Analytically this equals `|<psi|chi>|^2 = (1 + cos angle)/2`
/// for both step conventions; the quadrature is the independent check.
pub fn hemisphere_integral(
    psi_j: &Ray,
    chi_j: &Ray,
    convention: HeavisideConvention,
) -> Result<f64, OntModelError> {
    let p = bloch_of(psi_j)?.unit_vector();
    let c = bloch_of(chi_j)?.unit_vector();
    let cos_angle = (p[0] * c[0] + p[1] * c[1] + p[2] * c[2]).clamp(-1.0, 1.0);
    let angle = cos_angle.acos();

    // Canonical frame: chi on the x axis, psi in the xy plane at `angle`.
    let integrand = |theta: f64, phi: f64| -> f64 {
        let st = theta.sin();
        let chi_dot = st * phi.cos();
        let psi_dot = st * (phi - angle).cos();
        heaviside(psi_dot, convention)
            * heaviside(chi_dot, HeavisideConvention::H0)
            * chi_dot
            * st
            / PI
    };
    // The step factors jump along fixed azimuths; splitting there keeps the
    // adaptive rule from overlooking a support region between coarse nodes.
    let wrap = |x: f64| -> f64 {
        let mut x = (x + PI).rem_euclid(2.0 * PI) - PI;
        if x < -PI {
            x = -PI;
        }
        x
    };
    let mut cuts = vec![
        -PI,
        -FRAC_PI_2,
        FRAC_PI_2,
        wrap(angle - FRAC_PI_2),
        wrap(angle + FRAC_PI_2),
        PI,
    ];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let outer = |theta: f64| -> f64 {
        cuts.windows(2)
            .map(|w| adaptive_simpson(&|phi| integrand(theta, phi), w[0], w[1], 2e-10, 48))
            .sum()
    };
    Ok(adaptive_simpson(&outer, 0.0, PI, 1e-8, 36))
}

fn simpson_estimate(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature with a depth cap (discontinuous integrands
/// terminate with an error proportional to 2^-depth).
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    simpson_step(f, a, b, fa, fm, fb, simpson_estimate(a, b, fa, fm, fb), tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_estimate(a, m, fa, flm, fm);
    let right = simpson_estimate(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colouring::{haar_qubit, random_product_basis};


    fn pole_state(n: usize) -> OnticState {
        OnticState::new(vec![BlochPoint::new(0.0, 0.0); n])
    }

    #[test]
    fn response_examples() {
        let psi = ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket0(), Ray::ket0()]).unwrap();
        assert_eq!(response(&psi, &pole_state(3)).unwrap(), 1);

        let psi = ProductRay::from_qubits(vec![Ray::ket1()]).unwrap();
        assert_eq!(response(&psi, &pole_state(1)).unwrap(), 0);

        let psi = ProductRay::from_qubits(vec![Ray::ket0()]).unwrap();
        assert!(matches!(
            response(&psi, &pole_state(2)),
            Err(OntModelError::QubitCountMismatch(1, 2))
        ));
    }

    #[test]
    fn fused_sampler_matches_public_ops_on_identical_streams() {
        // The Monte Carlo drivers and the public sample/response pair must
        // consume the same random stream and make the same decisions.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let psi =
            ProductRay::from_qubits(vec![haar_qubit(&mut rng), haar_qubit(&mut rng)]).unwrap();
        let chi =
            ProductRay::from_qubits(vec![haar_qubit(&mut rng), haar_qubit(&mut rng)]).unwrap();
        let state = EpistemicState::mixture(vec![(0.3, chi.clone()), (0.7, psi.clone())]).unwrap();

        let n = 50_000u64;
        let (fused, _) = simulate_probability(&psi, &state, &SimConfig::new(n, 17)).unwrap();
        // Replay the identical batched streams through the public ops.
        let mut hits = 0u64;
        let batches = n.div_ceil(super::BATCH);
        for b in 0..batches {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            rng.set_stream(b);
            let count = (n - b * super::BATCH).min(super::BATCH);
            for _ in 0..count {
                let lam = sample_from_state(&state, &mut rng).unwrap();
                hits += u64::from(response(&psi, &lam).unwrap());
            }
        }
        assert_eq!(fused, hits as f64 / n as f64);
    }

    #[test]
    fn response_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let psi = ProductRay::from_qubits(vec![haar_qubit(&mut rng), haar_qubit(&mut rng)])
                .unwrap();
            let lam = sample_ontic(&psi, &mut rng).unwrap();
            let first = response(&psi, &lam).unwrap();
            for _ in 0..3 {
                assert_eq!(response(&psi, &lam).unwrap(), first);
            }
        }
    }

    #[test]
    fn responses_sum_to_one_over_a_product_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=3 {
            for _ in 0..5000 {
                let basis = random_product_basis(n, &mut rng).unwrap();
                let chi = ProductRay::from_qubits(
                    (0..n).map(|_| haar_qubit(&mut rng)).collect(),
                )
                .unwrap();
                let lam = sample_ontic(&chi, &mut rng).unwrap();
                let total: u8 = basis
                    .members()
                    .iter()
                    .map(|m| response(m, &lam).unwrap())
                    .sum();
                assert_eq!(total, 1, "exactly one member responds");
            }
        }
    }

    #[test]
    fn samples_stay_in_the_prepared_hemisphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let chi =
                ProductRay::from_qubits(vec![haar_qubit(&mut rng), haar_qubit(&mut rng)]).unwrap();
            let lam = sample_ontic(&chi, &mut rng).unwrap();
            for (factor, point) in chi.factors().iter().zip(lam.points()) {
                let c = bloch_of(factor).unwrap().unit_vector();
                let l = point.unit_vector();
                let dot = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
                assert!(dot > 0.0, "sample left the open hemisphere: {dot}");
            }
        }
    }

    #[test]
    fn sampled_dot_product_matches_quadrature_mean() {
        // Oracle: the mean of chi . lambda under the hemisphere density,
        // computed by plain Simpson quadrature of cos^2(theta) sin(theta).
        let oracle = {
            let f = |theta: f64| theta.cos() * theta.cos() * theta.sin();
            2.0 * adaptive_simpson(&f, 0.0, FRAC_PI_2, 1e-12, 40)
        };
        assert!((oracle - 2.0 / 3.0).abs() < 1e-9, "quadrature oracle");

        let chi = ProductRay::from_qubits(vec![Ray::qubit(1.0, 2.0)]).unwrap();
        let c = bloch_of(chi.factor(0)).unwrap().unit_vector();
        let n = 1_000_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let lam = sample_ontic(&chi, &mut rng).unwrap();
            let l = lam.points()[0].unit_vector();
            let dot = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
            sum += dot;
            sumsq += dot * dot;
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let sigma = (var / n as f64).sqrt();
        assert!(
            (mean - oracle).abs() <= 3.0 * sigma,
            "mean {mean} vs oracle {oracle} (3 sigma {})",
            3.0 * sigma
        );
    }

    #[test]
    fn qubit_samples_are_independent_across_factors() {
        let chi = ProductRay::from_qubits(vec![
            Ray::qubit(1.0, 0.3),
            Ray::qubit(2.0, 4.0),
            Ray::qubit(0.5, 5.5),
        ])
        .unwrap();
        let cs: Vec<[f64; 3]> =
            chi.factors().iter().map(|f| bloch_of(f).unwrap().unit_vector()).collect();
        let n = 200_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sums = [0.0f64; 3];
        let mut prods = [0.0f64; 3];
        for _ in 0..n {
            let lam = sample_ontic(&chi, &mut rng).unwrap();
            let dots: Vec<f64> = lam
                .points()
                .iter()
                .zip(&cs)
                .map(|(p, c)| {
                    let l = p.unit_vector();
                    c[0] * l[0] + c[1] * l[1] + c[2] * l[2]
                })
                .collect();
            for j in 0..3 {
                sums[j] += dots[j];
                prods[j] += dots[j] * dots[(j + 1) % 3];
            }
        }
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        for j in 0..3 {
            let cov = prods[j] / n as f64 - means[j] * means[(j + 1) % 3];
            assert!(cov.abs() < 0.01, "cross-correlation {cov} too large");
        }
    }

    #[test]
    fn simulate_probability_examples() {
        let chi00 = ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket0()]).unwrap();
        let cfg = SimConfig::new(10_000, 1);
        let (p, se) = simulate_probability(&chi00, &EpistemicState::pure(chi00.clone()), &cfg)
            .unwrap();
        assert_eq!(p, 1.0, "support of the density always responds");
        assert_eq!(se, 0.0);

        let plus = ProductRay::from_qubits(vec![Ray::plus()]).unwrap();
        let zero = ProductRay::from_qubits(vec![Ray::ket0()]).unwrap();
        let cfg = SimConfig::new(1_000_000, 42);
        let (p, se) = simulate_probability(&plus, &EpistemicState::pure(zero), &cfg).unwrap();
        assert!((p - 0.5).abs() <= 3.0 * se, "p = {p}, se = {se}");
    }

    #[test]
    fn simulate_matches_born_for_random_product_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let cfg = SimConfig::new(200_000, 9);
        for n in 1..=3 {
            for _ in 0..10 {
                let psi = ProductRay::from_qubits((0..n).map(|_| haar_qubit(&mut rng)).collect())
                    .unwrap();
                let chi = ProductRay::from_qubits((0..n).map(|_| haar_qubit(&mut rng)).collect())
                    .unwrap();
                let state = EpistemicState::pure(chi.clone());
                let born = state.born_probability(&psi).unwrap();
                let (p, se) = simulate_probability(&psi, &state, &cfg).unwrap();
                assert!(
                    (p - born).abs() <= 4.0 * se.max(1e-6),
                    "n={n}: estimate {p} vs born {born} (se {se})"
                );
            }
        }
    }

    #[test]
    fn identical_seeds_and_any_job_count_give_identical_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = ProductRay::from_qubits(vec![haar_qubit(&mut rng), haar_qubit(&mut rng)]).unwrap();
        let chi = ProductRay::from_qubits(vec![haar_qubit(&mut rng), haar_qubit(&mut rng)]).unwrap();
        let state = EpistemicState::pure(chi);
        let base = simulate_probability(&psi, &state, &SimConfig::new(100_000, 7)).unwrap();
        for jobs in [1usize, 2, 5] {
            let again =
                simulate_probability(&psi, &state, &SimConfig::new(100_000, 7).with_jobs(jobs))
                    .unwrap();
            assert_eq!(base, again, "jobs = {jobs}");
        }
    }

    #[test]
    fn born_examples() {
        let rho0 = DensityOperator::pure(&Ray::ket0());
        assert!((born(&Ray::ket0(), &rho0).unwrap() - 1.0).abs() < 1e-12);
        assert!((born(&Ray::ket0(), &DensityOperator::maximally_mixed(2)).unwrap() - 0.5).abs() < 1e-12);
        assert!((born(&Ray::plus(), &rho0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hemisphere_integral_matches_half_one_plus_cos() {
        for (i, angle) in [0.0, PI / 6.0, PI / 3.0, FRAC_PI_2, 2.0 * PI / 3.0, PI]
            .into_iter()
            .enumerate()
        {
            let chi = Ray::ket0();
            let psi = Ray::qubit(angle, 0.0);
            let expected = 0.5 * (1.0 + angle.cos());
            let h0 = hemisphere_integral(&psi, &chi, HeavisideConvention::H0).unwrap();
            let h1 = hemisphere_integral(&psi, &chi, HeavisideConvention::H1).unwrap();
            assert!((h0 - expected).abs() <= 1e-6, "case {i}: H0 {h0} vs {expected}");
            assert!((h1 - expected).abs() <= 1e-6, "case {i}: H1 {h1} vs {expected}");
            assert!((h0 - h1).abs() <= 2e-6, "case {i}: conventions disagree");
        }
    }

    #[test]
    fn basis_measurement_examples() {
        let comp2 = ProductBasis::new(vec![
            ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket0()]).unwrap(),
            ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket1()]).unwrap(),
            ProductRay::from_qubits(vec![Ray::ket1(), Ray::ket0()]).unwrap(),
            ProductRay::from_qubits(vec![Ray::ket1(), Ray::ket1()]).unwrap(),
        ])
        .unwrap();
        let chi = ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket0()]).unwrap();
        let freqs = simulate_basis_measurement(
            &comp2,
            &EpistemicState::pure(chi),
            &SimConfig::new(20_000, 4),
        )
        .unwrap();
        assert_eq!(freqs[0].frequency, 1.0);
        for f in &freqs[1..] {
            assert_eq!(f.frequency, 0.0);
        }
    }

    #[test]
    fn nonlocal_basis_measurement_on_its_own_member() {
        // Preparing |000> makes the first member of the three-qubit
        // nonlocal basis fire on every sample and all others never.
        let basis = crate::catalog::nonlocal_product_basis();
        let chi = ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket0(), Ray::ket0()]).unwrap();
        let freqs = simulate_basis_measurement(
            &basis,
            &EpistemicState::pure(chi),
            &SimConfig::new(50_000, 13),
        )
        .unwrap();
        assert_eq!(freqs[0].frequency, 1.0);
        for f in &freqs[1..] {
            assert_eq!(f.frequency, 0.0, "member {} must never fire", f.member);
        }
    }

    #[test]
    fn mixture_decompositions_agree_on_frequencies_but_not_ontic_statistics() {
        // I/2 written as (|0><0| + |1><1|)/2 and as (|+><+| + |-><-|)/2.
        let zero = ProductRay::from_qubits(vec![Ray::ket0()]).unwrap();
        let one = ProductRay::from_qubits(vec![Ray::ket1()]).unwrap();
        let plus = ProductRay::from_qubits(vec![Ray::plus()]).unwrap();
        let minus = ProductRay::from_qubits(vec![Ray::minus()]).unwrap();
        let a = EpistemicState::mixture(vec![(0.5, zero.clone()), (0.5, one)]).unwrap();
        let b = EpistemicState::mixture(vec![(0.5, plus), (0.5, minus)]).unwrap();

        let psi = ProductRay::from_qubits(vec![Ray::qubit(0.8, 0.3)]).unwrap();
        let n = 400_000u64;
        let (pa, sea) = simulate_probability(&psi, &a, &SimConfig::new(n, 21)).unwrap();
        let (pb, seb) = simulate_probability(&psi, &b, &SimConfig::new(n, 22)).unwrap();
        // Both decompositions reproduce the trace formula for the shared
        // density operator.
        let rho = a.density_operator().unwrap();
        let born = rho.expectation(&psi.flatten()).unwrap();
        assert!((born - 0.5).abs() < 1e-12);
        assert!((pa - born).abs() <= 3.0 * sea, "first decomposition matches the trace");
        assert!((pb - born).abs() <= 3.0 * seb, "second decomposition matches the trace");
        let sigma = (sea * sea + seb * seb).sqrt();
        assert!((pa - pb).abs() <= 3.0 * sigma, "outcome statistics must agree");

        // The ontic distributions differ: |lambda_z| concentrates near the
        // poles for the first decomposition only.
        let mut rng_a = ChaCha8Rng::seed_from_u64(31);
        let mut rng_b = ChaCha8Rng::seed_from_u64(31);
        let m = 100_000;
        let mut za = 0.0;
        let mut zb = 0.0;
        for _ in 0..m {
            za += sample_from_state(&a, &mut rng_a).unwrap().points()[0].unit_vector()[2].abs();
            zb += sample_from_state(&b, &mut rng_b).unwrap().points()[0].unit_vector()[2].abs();
        }
        za /= m as f64;
        zb /= m as f64;
        assert!(za - zb > 0.1, "ontic statistics should separate: {za} vs {zb}");
    }
}
