//! Concrete ray families and their verification.
//!
//! Every entry re-derives its counts at build time and its colourability
//! verdict under [`verify`]; no claim is trusted from a constant alone.

use crate::colouring::{
    all_north_colouring_of_products, verify_exactly_one_north, ColouringError, ProductBasis,
};
use crate::linalg::{eigh, CMatrix};
use crate::rays::{
    inner_product, is_orthogonal, is_product_ray, Basis, ProductRay, Ray, RayError, ORTHO_TOL,
};
use crate::scenario::{
    find_ks_colouring, scenario_from_named_rays, scenario_from_rays, BasisMode, RayAssignment,
    Scenario, ScenarioError,
};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::SQRT_2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Colouring(#[from] ColouringError),
    #[error("unknown catalog entry {0:?}")]
    UnknownEntry(String),
    #[error("{entry}: {what} is {got}, expected {expected}")]
    CountMismatch { entry: String, what: &'static str, expected: usize, got: usize },
    #[error("input rays must have dimension 3, got {0}")]
    NotQutrit(usize),
    #[error("no unentangled KS set exists when every subsystem is a qubit")]
    AllDimsBelowThree,
    #[error("the construction needs a subsystem of dimension exactly 3, got {0:?}")]
    NoQutritFactor(Vec<usize>),
    #[error("constructed basis missing from the scenario hyperedges")]
    MissingBasis,
    #[error("operators do not share an eigenbasis (residual {0})")]
    NotCommuting(f64),
}

/// Expected build-time facts about an entry.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Expected {
    pub colourable: bool,
    pub vertex_count: usize,
    pub hyperedge_count: usize,
}

/// A named scenario with its ray assignment and expectations.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub scenario: Scenario,
    pub assignment: RayAssignment,
    /// Product structure of the vertex rays, when all of them factorise.
    pub products: Option<Vec<ProductRay>>,
    pub expected: Expected,
    pub notes: String,
}

/// Entry names accepted by [`build`] and [`verify`].
pub const NAMES: &[&str] =
    &["peres_mermin", "peres57", "two_qubit_ks", "nonlocal_basis", "unentangled_2x3"];

pub fn build(name: &str) -> Result<CatalogEntry, CatalogError> {
    match name {
        "peres_mermin" => peres_mermin_scenario(),
        "peres57" => peres57_entry(),
        "two_qubit_ks" => two_qubit_ks_set(),
        "nonlocal_basis" => nonlocal_basis_entry(),
        "unentangled_2x3" => unentangled_ks_set(&[2, 3]),
        other => Err(CatalogError::UnknownEntry(other.to_string())),
    }
}

fn expect_count(
    entry: &str,
    what: &'static str,
    expected: usize,
    got: usize,
) -> Result<(), CatalogError> {
    if expected != got {
        return Err(CatalogError::CountMismatch { entry: entry.to_string(), what, expected, got });
    }
    Ok(())
}

// --- Peres rays ---------------------------------------------------------------

/// The 33 qutrit rays with components in `{0, +-1, +-sqrt(2)}`: the three
/// axes, the six diagonal rays, and the two sqrt(2) orbits.
pub fn peres33_rays() -> Vec<Ray> {
    let mut raw: Vec<[f64; 3]> = Vec::new();
    for i in 0..3 {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        raw.push(v);
    }
    // One zero, two unit entries of either relative sign.
    for zero in 0..3 {
        let (a, b) = other_positions(zero);
        for s in [1.0, -1.0] {
            let mut v = [0.0; 3];
            v[a] = 1.0;
            v[b] = s;
            raw.push(v);
        }
    }
    // One zero, entries 1 and sqrt(2) in both arrangements and signs.
    for zero in 0..3 {
        let (a, b) = other_positions(zero);
        for (x, y) in [(1.0, SQRT_2), (SQRT_2, 1.0)] {
            for s in [1.0, -1.0] {
                let mut v = [0.0; 3];
                v[a] = x;
                v[b] = s * y;
                raw.push(v);
            }
        }
    }
    // sqrt(2) in one slot, unit entries elsewhere, all relative signs.
    for pos in 0..3 {
        let (a, b) = other_positions(pos);
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                let mut v = [0.0; 3];
                v[pos] = s1 * SQRT_2;
                v[a] = 1.0;
                v[b] = s2;
                raw.push(v);
            }
        }
    }

    let mut rays: Vec<Ray> = Vec::new();
    for v in raw {
        debug_assert!(v
            .iter()
            .all(|&x| [0.0, 1.0, -1.0, SQRT_2, -SQRT_2].iter().any(|&c| (x - c).abs() < 1e-12)));
        let ray = Ray::from_reals(&v).expect("nonzero component list");
        if !rays.iter().any(|r| r.same_ray(&ray, ORTHO_TOL)) {
            rays.push(ray);
        }
    }
    assert_eq!(rays.len(), 33, "orbit enumeration must give 33 distinct rays");
    rays
}

fn other_positions(skip: usize) -> (usize, usize) {
    match skip {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Completes every orthogonal pair of qutrit rays with the third basis ray
/// (the conjugated cross product) and returns the all-bases scenario over
/// the closure.
pub fn complete_pairs(rays: &[Ray]) -> Result<(Scenario, RayAssignment), CatalogError> {
    for r in rays {
        if r.dim() != 3 {
            return Err(CatalogError::NotQutrit(r.dim()));
        }
    }
    let mut all: Vec<Ray> = Vec::new();
    for r in rays {
        if !all.iter().any(|x| x.same_ray(r, ORTHO_TOL)) {
            all.push(r.clone());
        }
    }
    let base = all.len();
    for i in 0..base {
        for j in (i + 1)..base {
            if is_orthogonal(&all[i], &all[j], ORTHO_TOL)? {
                let c = cross_conj(&all[i], &all[j])?;
                if !all.iter().any(|x| x.same_ray(&c, ORTHO_TOL)) {
                    all.push(c);
                }
            }
        }
    }
    Ok(scenario_from_rays(&all, BasisMode::AllBases)?)
}

/// The ray orthogonal to both inputs: componentwise conjugated cross product.
fn cross_conj(a: &Ray, b: &Ray) -> Result<Ray, RayError> {
    let a: Vec<Complex64> = a.amplitudes().iter().map(Complex64::conj).collect();
    let b: Vec<Complex64> = b.amplitudes().iter().map(Complex64::conj).collect();
    Ray::new(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

fn peres57_entry() -> Result<CatalogEntry, CatalogError> {
    let (scenario, assignment) = complete_pairs(&peres33_rays())?;
    let entry = "peres57";
    expect_count(entry, "vertex count", 57, scenario.vertex_count())?;
    expect_count(entry, "hyperedge count", 40, scenario.hyperedge_count())?;
    Ok(CatalogEntry {
        name: entry.to_string(),
        scenario,
        assignment,
        products: None,
        expected: Expected { colourable: false, vertex_count: 57, hyperedge_count: 40 },
        notes: "Peres' 33 qutrit rays closed under orthogonal-pair completion: \
                57 rays in 40 complete bases, KS-uncolourable"
            .to_string(),
    })
}

// --- Peres-Mermin square --------------------------------------------------------

fn pauli(name: char) -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    match name {
        'I' => CMatrix::identity(2),
        'X' => CMatrix::from_rows(vec![vec![o, l], vec![l, o]]),
        'Y' => CMatrix::from_rows(vec![vec![o, -i], vec![i, o]]),
        'Z' => CMatrix::from_rows(vec![vec![l, o], vec![o, -l]]),
        _ => unreachable!("unknown Pauli label"),
    }
}

fn two_qubit_pauli(label: &str) -> CMatrix {
    let mut chars = label.chars();
    let a = pauli(chars.next().unwrap());
    let b = pauli(chars.next().unwrap());
    a.kron(&b)
}

/// The rows and columns of the Peres-Mermin square, as Pauli labels.
pub const PERES_MERMIN_CONTEXTS: [[&str; 3]; 6] = [
    ["XI", "IX", "XX"],
    ["IY", "YI", "YY"],
    ["XY", "YX", "ZZ"],
    ["XI", "IY", "XY"],
    ["IX", "YI", "YX"],
    ["XX", "YY", "ZZ"],
];

/// The simultaneous eigenbasis of a set of commuting Hermitian operators:
/// diagonalise the first, then split every degenerate eigenspace with the
/// next operator until all spaces are one-dimensional.
pub fn simultaneous_eigenbasis(ops: &[CMatrix]) -> Result<Vec<Ray>, CatalogError> {
    let d = ops[0].rows();
    let mut blocks: Vec<CMatrix> = vec![CMatrix::identity(d)];
    for op in ops {
        let mut next = Vec::new();
        for block in &blocks {
            if block.cols() == 1 {
                next.push(block.clone());
                continue;
            }
            // Diagonalise the operator restricted to this block.
            let restricted = block.adjoint().mul(&op.mul(block));
            let (vals, vecs) = eigh(&restricted);
            let rotated = block.mul(&vecs);
            let mut start = 0;
            for k in 1..=vals.len() {
                if k == vals.len() || (vals[k] - vals[start]).abs() > 1e-9 {
                    let mut sub = CMatrix::zeros(d, k - start);
                    for col in start..k {
                        for row in 0..d {
                            sub[(row, col - start)] = rotated[(row, col)];
                        }
                    }
                    next.push(sub);
                    start = k;
                }
            }
        }
        blocks = next;
    }
    let mut rays = Vec::with_capacity(d);
    for block in &blocks {
        if block.cols() != 1 {
            return Err(CatalogError::NotCommuting(block.cols() as f64));
        }
        rays.push(Ray::new(block.column(0))?);
    }
    // Every output must be an eigenvector of every operator.
    for ray in &rays {
        for op in ops {
            let image = op.matvec(ray.amplitudes());
            let lambda: Complex64 =
                ray.amplitudes().iter().zip(&image).map(|(a, b)| a.conj() * b).sum();
            let residual: f64 = image
                .iter()
                .zip(ray.amplitudes())
                .map(|(im, a)| (im - a * lambda).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if residual > 1e-9 {
                return Err(CatalogError::NotCommuting(residual));
            }
        }
    }
    rays.sort_by(compare_rays);
    Ok(rays)
}

fn compare_rays(a: &Ray, b: &Ray) -> std::cmp::Ordering {
    for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
        match x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap()) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

/// The eigenbases of the six Peres-Mermin contexts, in context order.
pub fn peres_mermin_eigenbases() -> Result<Vec<Vec<Ray>>, CatalogError> {
    PERES_MERMIN_CONTEXTS
        .iter()
        .map(|ctx| {
            let ops: Vec<CMatrix> = ctx.iter().map(|l| two_qubit_pauli(l)).collect();
            simultaneous_eigenbasis(&ops)
        })
        .collect()
}

/// Complete orthogonal tetrads among the 24 Peres-Mermin rays.
const PM_HYPEREDGES: usize = 24;

/// Peres' 24 two-qubit rays: the union of the six row/column eigenbases of
/// the square, with the all-bases scenario over them.
pub fn peres_mermin_scenario() -> Result<CatalogEntry, CatalogError> {
    let bases = peres_mermin_eigenbases()?;
    let mut rays: Vec<Ray> = Vec::new();
    for basis in &bases {
        for ray in basis {
            if !rays.iter().any(|r| r.same_ray(ray, ORTHO_TOL)) {
                rays.push(ray.clone());
            }
        }
    }
    let entry = "peres_mermin";
    expect_count(entry, "vertex count", 24, rays.len())?;
    let (scenario, assignment) = scenario_from_rays(&rays, BasisMode::AllBases)?;
    expect_count(entry, "hyperedge count", PM_HYPEREDGES, scenario.hyperedge_count())?;
    // The six context bases must appear among the hyperedges.
    for basis in &bases {
        let mut edge: Vec<usize> = basis
            .iter()
            .map(|b| {
                rays.iter()
                    .position(|r| r.same_ray(b, ORTHO_TOL))
                    .expect("basis ray among the 24")
            })
            .collect();
        edge.sort_unstable();
        if !scenario.hyperedges().contains(&edge) {
            return Err(CatalogError::MissingBasis);
        }
    }
    Ok(CatalogEntry {
        name: entry.to_string(),
        scenario,
        assignment,
        products: None,
        expected: Expected {
            colourable: false,
            vertex_count: 24,
            hyperedge_count: PM_HYPEREDGES,
        },
        notes: "Eigenbases of the six rows/columns of the Peres-Mermin square \
                (24 rays), all-bases closure; the third-column basis is the Bell basis"
            .to_string(),
    })
}

// --- Two-qubit KS set without fully entangled bases -----------------------------

/// The real unitary mixing the two embedded copies of the Peres rays:
/// entries `(1 + sqrt 2)/3` on the diagonal and `tau/3` off it, with
/// `tau = (2 - sqrt 2 +- sqrt 6)/2`.
#[derive(Debug, Clone)]
pub struct EmbeddingUnitary {
    matrix: CMatrix,
}

impl EmbeddingUnitary {
    pub fn new() -> Self {
        let tau_plus = (2.0 - SQRT_2 + 6.0f64.sqrt()) / 2.0;
        let tau_minus = (2.0 - SQRT_2 - 6.0f64.sqrt()) / 2.0;
        let d = 1.0 + SQRT_2;
        let matrix = CMatrix::from_real_rows(&[
            &[d / 3.0, tau_minus / 3.0, tau_plus / 3.0],
            &[tau_plus / 3.0, d / 3.0, tau_minus / 3.0],
            &[tau_minus / 3.0, tau_plus / 3.0, d / 3.0],
        ]);
        assert!(matrix.unitarity_defect() < 1e-12, "embedding matrix must be unitary");
        EmbeddingUnitary { matrix }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, v: &Ray) -> Ray {
        Ray::new(self.matrix.matvec(v.amplitudes())).expect("unitary image of a unit vector")
    }
}

impl Default for EmbeddingUnitary {
    fn default() -> Self {
        EmbeddingUnitary::new()
    }
}

/// Embeds a qutrit ray `(a, b, c)` into the two-qubit subspace orthogonal
/// to `|00>`: `a|01> + b|10> + c|11>`.
pub fn embed_perp00(v: &Ray) -> Ray {
    let a = v.amplitudes();
    Ray::new(vec![Complex64::new(0.0, 0.0), a[0], a[1], a[2]]).expect("unit vector")
}

/// Embeds a qutrit ray `(a, b, c)` into the two-qubit subspace orthogonal
/// to `|01>`: `a|00> + b|10> + c|11>`.
pub fn embed_perp01(v: &Ray) -> Ray {
    let a = v.amplitudes();
    Ray::new(vec![a[0], Complex64::new(0.0, 0.0), a[1], a[2]]).expect("unit vector")
}

/// Smallest cross-copy overlap among entangled rays, with the entangled
/// counts of both embedded copies.
pub struct TwoQubitEmbeddingOverlaps {
    pub min_abs_overlap: f64,
    pub entangled_first: usize,
    pub entangled_second: usize,
}

// Pinned counts of the all-bases closure, re-derived on every build.
const TWO_QUBIT_VERTICES: usize = 115;
const TWO_QUBIT_HYPEREDGES: usize = 80;

/// A two-qubit KS set in which no basis is fully entangled: two copies of
/// the 57 Peres rays embedded in the subspaces orthogonal to `|00>` and to
/// `|01>`, the second copy rotated so that entangled rays of different
/// copies never align into a common basis.
pub fn two_qubit_ks_set() -> Result<CatalogEntry, CatalogError> {
    let (scenario3, assignment3) = complete_pairs(&peres33_rays())?;
    let peres_rays: Vec<Ray> = assignment3.rays().to_vec();
    let u = EmbeddingUnitary::new();

    let push_unique = |rays: &mut Vec<Ray>, r: Ray| {
        if !rays.iter().any(|x| x.same_ray(&r, ORTHO_TOL)) {
            rays.push(r);
        }
    };
    let mut rays: Vec<Ray> = vec![Ray::basis_vector(4, 0)];
    for v in &peres_rays {
        push_unique(&mut rays, embed_perp00(v));
    }
    for v in &peres_rays {
        push_unique(&mut rays, embed_perp01(&u.apply(v)));
    }
    let entry = "two_qubit_ks";
    expect_count(entry, "vertex count", TWO_QUBIT_VERTICES, rays.len())?;

    let (scenario, assignment) = scenario_from_rays(&rays, BasisMode::AllBases)?;
    expect_count(entry, "hyperedge count", TWO_QUBIT_HYPEREDGES, scenario.hyperedge_count())?;

    // Both families of constructed bases must be among the hyperedges,
    // including the computational basis arising from the coordinate triad.
    let find = |target: &Ray| rays.iter().position(|r| r.same_ray(target, ORTHO_TOL));
    let ket01 = find(&Ray::basis_vector(4, 1)).expect("|01> among the rays");
    for basis_edge in scenario3.hyperedges() {
        let mut first: Vec<usize> = vec![0];
        let mut second: Vec<usize> = vec![ket01];
        for &l in basis_edge {
            first.push(find(&embed_perp00(&peres_rays[l])).expect("embedded ray present"));
            second
                .push(find(&embed_perp01(&u.apply(&peres_rays[l]))).expect("rotated ray present"));
        }
        for mut edge in [first, second] {
            edge.sort_unstable();
            if !scenario.hyperedges().contains(&edge) {
                return Err(CatalogError::MissingBasis);
            }
        }
    }

    Ok(CatalogEntry {
        name: entry.to_string(),
        scenario,
        assignment,
        products: None,
        expected: Expected {
            colourable: false,
            vertex_count: TWO_QUBIT_VERTICES,
            hyperedge_count: TWO_QUBIT_HYPEREDGES,
        },
        notes: "Two embedded copies of the 57 Peres rays (second copy rotated); \
                KS-uncolourable with every basis containing a product ray"
            .to_string(),
    })
}

/// Scans every cross pair of entangled rays from the two embedded copies
/// and reports the smallest |overlap|; a strictly positive bound means no
/// basis can consist of entangled rays from both copies.
pub fn two_qubit_cross_overlaps() -> Result<TwoQubitEmbeddingOverlaps, CatalogError> {
    let (_, assignment3) = complete_pairs(&peres33_rays())?;
    let peres_rays: Vec<Ray> = assignment3.rays().to_vec();
    let u = EmbeddingUnitary::new();
    let entangled =
        |r: &Ray| -> Result<bool, CatalogError> { Ok(is_product_ray(r, &[2, 2], 1e-9)?.is_none()) };
    let mut first = Vec::new();
    let mut second = Vec::new();
    for v in &peres_rays {
        let e = embed_perp00(v);
        if entangled(&e)? {
            first.push(e);
        }
        let e = embed_perp01(&u.apply(v));
        if entangled(&e)? {
            second.push(e);
        }
    }
    let mut min_abs = f64::INFINITY;
    for a in &first {
        for b in &second {
            min_abs = min_abs.min(inner_product(a, b)?.norm());
        }
    }
    Ok(TwoQubitEmbeddingOverlaps {
        min_abs_overlap: min_abs,
        entangled_first: first.len(),
        entangled_second: second.len(),
    })
}

// --- The three-qubit nonlocal product basis ------------------------------------

/// The unentangled three-qubit basis
/// `{|000>, |+10>, |0+1>, |10+>, |111>, |-10>, |0-1>, |10->}`:
/// a complete set of product rays that no local protocol can measure.
pub fn nonlocal_product_basis() -> ProductBasis {
    let z = Ray::ket0;
    let o = Ray::ket1;
    let p = Ray::plus;
    let m = Ray::minus;
    let rows: Vec<[Ray; 3]> = vec![
        [z(), z(), z()],
        [p(), o(), z()],
        [z(), p(), o()],
        [o(), z(), p()],
        [o(), o(), o()],
        [m(), o(), z()],
        [z(), m(), o()],
        [o(), z(), m()],
    ];
    let members = rows
        .into_iter()
        .map(|fs| ProductRay::from_qubits(fs.to_vec()).expect("qubit factors"))
        .collect();
    ProductBasis::new(members).expect("the eight members form a complete product basis")
}

const NONLOCAL_BASIS_LABELS: [&str; 8] = ["000", "+10", "0+1", "10+", "111", "-10", "0-1", "10-"];

fn nonlocal_basis_entry() -> Result<CatalogEntry, CatalogError> {
    let basis = nonlocal_product_basis();
    let ids: Vec<String> = NONLOCAL_BASIS_LABELS.iter().map(|s| s.to_string()).collect();
    let flat = basis.flattened();
    let (scenario, assignment) = scenario_from_named_rays(
        &ids,
        &flat,
        BasisMode::GivenBases(vec![Basis::new(flat.clone())?]),
    )?;
    let entry = "nonlocal_basis";
    expect_count(entry, "vertex count", 8, scenario.vertex_count())?;
    expect_count(entry, "hyperedge count", 1, scenario.hyperedge_count())?;
    Ok(CatalogEntry {
        name: entry.to_string(),
        scenario,
        assignment,
        products: Some(basis.members().to_vec()),
        expected: Expected { colourable: true, vertex_count: 8, hyperedge_count: 1 },
        notes: "Three-qubit product basis that cannot be measured locally; \
                its single all-north member is |000>"
            .to_string(),
    })
}

// --- Unentangled KS sets ---------------------------------------------------------

/// An unentangled KS set on subsystems of the given dimensions: the Peres
/// 57-ray/40-basis family on a dimension-3 factor, tensored elementwise with
/// the computational bases of every other factor (direct product bases).
/// Refuses multiqubit dimension lists, where no such set exists.
pub fn unentangled_ks_set(dims: &[usize]) -> Result<CatalogEntry, CatalogError> {
    if dims.iter().all(|&d| d < 3) {
        return Err(CatalogError::AllDimsBelowThree);
    }
    let designated = dims
        .iter()
        .position(|&d| d == 3)
        .ok_or_else(|| CatalogError::NoQutritFactor(dims.to_vec()))?;

    let (scenario3, assignment3) = complete_pairs(&peres33_rays())?;
    let peres_rays: Vec<Ray> = assignment3.rays().to_vec();

    // Computational index combinations of the other factors, slowest first.
    let other_sizes: Vec<usize> =
        dims.iter().enumerate().filter(|&(i, _)| i != designated).map(|(_, &d)| d).collect();
    let combo_count: usize = other_sizes.iter().product();
    let combos: Vec<Vec<usize>> = (0..combo_count)
        .map(|mut k| {
            let mut digits = vec![0usize; other_sizes.len()];
            for (slot, &size) in other_sizes.iter().enumerate().rev() {
                digits[slot] = k % size;
                k /= size;
            }
            digits
        })
        .collect();

    let product_of = |combo: &[usize], l: usize| -> ProductRay {
        let mut factors = Vec::with_capacity(dims.len());
        let mut other_iter = combo.iter();
        for (pos, &d) in dims.iter().enumerate() {
            if pos == designated {
                factors.push(peres_rays[l].clone());
            } else {
                factors.push(Ray::basis_vector(d, *other_iter.next().unwrap()));
            }
        }
        ProductRay::new(factors).expect("non-empty factors")
    };

    let mut ids = Vec::new();
    let mut products = Vec::new();
    for combo in &combos {
        let digits: String = combo.iter().map(ToString::to_string).collect();
        for l in 0..peres_rays.len() {
            ids.push(format!("w{digits}v{l}"));
            products.push(product_of(combo, l));
        }
    }
    let flat: Vec<Ray> = products.iter().map(ProductRay::flatten).collect();

    let mut bases = Vec::with_capacity(scenario3.hyperedge_count());
    for edge in scenario3.hyperedges() {
        let mut members = Vec::new();
        for combo in &combos {
            for &l in edge {
                members.push(product_of(combo, l).flatten());
            }
        }
        bases.push(Basis::new(members)?);
    }

    let (scenario, assignment) =
        scenario_from_named_rays(&ids, &flat, BasisMode::GivenBases(bases))?;

    let dims_label: Vec<String> = dims.iter().map(ToString::to_string).collect();
    let name = format!("unentangled_{}", dims_label.join("x"));
    let expected_vertices = combo_count * peres_rays.len();
    let expected_edges = scenario3.hyperedge_count();
    expect_count(&name, "vertex count", expected_vertices, scenario.vertex_count())?;
    expect_count(&name, "hyperedge count", expected_edges, scenario.hyperedge_count())?;

    Ok(CatalogEntry {
        name,
        scenario,
        assignment,
        products: Some(products),
        expected: Expected {
            colourable: false,
            vertex_count: expected_vertices,
            hyperedge_count: expected_edges,
        },
        notes: "Direct product bases: computational bases on every factor times \
                the Peres bases on the dimension-3 factor; every ray is a product \
                ray yet the scenario is KS-uncolourable"
            .to_string(),
    })
}

// --- Verification -----------------------------------------------------------------

/// One named check with its expected and observed values.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: serde_json::Value,
    pub observed: serde_json::Value,
    pub pass: bool,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        expected: impl Into<serde_json::Value>,
        observed: impl Into<serde_json::Value>,
    ) -> Self {
        let expected = expected.into();
        let observed = observed.into();
        let pass = expected == observed;
        Check { name: name.into(), expected, observed, pass }
    }

    /// A check against a bound rather than an exact value.
    pub fn bound(name: impl Into<String>, description: &str, observed: f64, pass: bool) -> Self {
        Check {
            name: name.into(),
            expected: serde_json::Value::String(description.to_string()),
            observed: serde_json::json!(observed),
            pass,
        }
    }
}

/// Re-derived facts about one catalog entry.
#[derive(Debug, Serialize)]
pub struct VerificationReport {
    pub entry: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Rebuilds the entry and re-derives every expected property, including the
/// colourability verdict by a full solver run.
pub fn verify(name: &str) -> Result<VerificationReport, CatalogError> {
    let entry = build(name)?;
    let mut checks = Vec::new();
    checks.push(Check::new(
        "vertex_count",
        entry.expected.vertex_count,
        entry.scenario.vertex_count(),
    ));
    checks.push(Check::new(
        "hyperedge_count",
        entry.expected.hyperedge_count,
        entry.scenario.hyperedge_count(),
    ));
    let colouring = find_ks_colouring(&entry.scenario);
    checks.push(Check::new("colourable", entry.expected.colourable, colouring.is_some()));

    match name {
        "peres57" => {
            let rays33 = peres33_rays();
            checks.push(Check::new("base_ray_count", 33, rays33.len()));
            checks.push(Check::new(
                "orthogonality_graph_connected",
                true,
                orthogonality_connected(entry.assignment.rays()),
            ));
            // Idempotence of the completion.
            let (again, _) = complete_pairs(entry.assignment.rays())?;
            checks.push(Check::new("completion_idempotent", 57, again.vertex_count()));
        }
        "peres_mermin" => {
            let bases = peres_mermin_eigenbases()?;
            // The third-column eigenbasis is the Bell basis.
            let bell = &bases[5];
            let mut all_entangled = true;
            for r in bell {
                all_entangled &= is_product_ray(r, &[2, 2], 1e-9)?.is_none();
            }
            checks.push(Check::new("column3_basis_fully_entangled", true, all_entangled));
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let bell_rays = [
                Ray::from_reals(&[h, 0.0, 0.0, h]).unwrap(),
                Ray::from_reals(&[h, 0.0, 0.0, -h]).unwrap(),
                Ray::from_reals(&[0.0, h, h, 0.0]).unwrap(),
                Ray::from_reals(&[0.0, h, -h, 0.0]).unwrap(),
            ];
            let matches_bell =
                bell_rays.iter().all(|b| bell.iter().any(|r| r.same_ray(b, ORTHO_TOL)));
            checks.push(Check::new("column3_is_bell_basis", true, matches_bell));
        }
        "two_qubit_ks" => {
            let overlaps = two_qubit_cross_overlaps()?;
            checks.push(Check::bound(
                "min_entangled_cross_overlap",
                "> 1e-9",
                overlaps.min_abs_overlap,
                overlaps.min_abs_overlap > 1e-9,
            ));
            let mut fully_entangled_edges = 0usize;
            for edge in entry.scenario.hyperedges() {
                let mut all_entangled = true;
                for &v in edge {
                    if is_product_ray(entry.assignment.ray(v), &[2, 2], 1e-9)?.is_some() {
                        all_entangled = false;
                        break;
                    }
                }
                if all_entangled {
                    fully_entangled_edges += 1;
                }
            }
            checks.push(Check::new("fully_entangled_hyperedges", 0, fully_entangled_edges));
        }
        "nonlocal_basis" => {
            let basis = nonlocal_product_basis();
            checks.push(Check::new(
                "exactly_one_all_north",
                true,
                verify_exactly_one_north(&basis)?,
            ));
            let products = entry.products.as_ref().expect("product entry");
            let all_north = all_north_colouring_of_products(&entry.scenario, products)?;
            checks.push(Check::new(
                "all_north_colouring_valid",
                true,
                all_north.validate(&entry.scenario).is_ok(),
            ));
            checks.push(Check::new("north_member", "000", {
                let v = (0..8).find(|&v| all_north.value(v) == 1).unwrap();
                entry.scenario.vertex_id(v).to_string()
            }));
        }
        "unentangled_2x3" => {
            let sizes: Vec<usize> = entry.scenario.hyperedges().iter().map(Vec::len).collect();
            checks.push(Check::new("hyperedge_size", 6, sizes[0]));
            checks.push(Check::new(
                "uniform_hyperedge_size",
                true,
                sizes.iter().all(|&s| s == 6),
            ));
            let products = entry.products.as_ref().expect("product entry");
            checks.push(Check::new(
                "all_rays_product",
                true,
                products.len() == entry.scenario.vertex_count(),
            ));
        }
        _ => {}
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport { entry: entry.name, checks, pass })
}

fn orthogonality_connected(rays: &[Ray]) -> bool {
    let n = rays.len();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && is_orthogonal(&rays[i], &rays[j], ORTHO_TOL).unwrap_or(false) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|x| x)
}
