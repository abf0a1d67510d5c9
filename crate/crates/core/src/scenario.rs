//! Contextuality scenarios and their models.
//!
//! A scenario is a hypergraph whose vertices are measurement outcomes and
//! whose hyperedges are complete measurements. When the vertices carry rays,
//! each hyperedge must be a complete set (an orthonormal basis), and the
//! Born rule induces quantum models. KS-colourings are searched with a
//! complete backtracking solver driven by exactly-one propagation, and
//! classicality of a probabilistic model is a convex-hull membership query
//! over the enumerated colourings.

use crate::linalg::{eigh, CMatrix};
use crate::rays::{is_orthogonal, Ray, RayError, ORTHO_TOL};
use crate::simplex::{feasible_nonnegative, Feasibility};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Per-hyperedge normalisation tolerance for probabilistic models.
pub const MODEL_TOL: f64 = 1e-9;

/// Default cap on colouring enumeration; beyond it classicality tests
/// report themselves inconclusive rather than guessing.
pub const DEFAULT_COLOURING_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error("duplicate ray at positions {0} and {1}")]
    DuplicateRay(usize, usize),
    #[error("duplicate vertex id {0:?}")]
    DuplicateVertex(String),
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("hyperedge {0} is empty")]
    EmptyHyperedge(usize),
    #[error("duplicate hyperedge {0}")]
    DuplicateHyperedge(usize),
    #[error("given basis {basis} ray {member} does not match any scenario ray")]
    BasisRayNotFound { basis: usize, member: usize },
    #[error("hyperedge {edge} has {got} vertices but the ray dimension is {dim}")]
    IncompleteHyperedge { edge: usize, got: usize, dim: usize },
    #[error("rays {0} and {1} of a hyperedge are not orthogonal")]
    EdgeNotOrthogonal(usize, usize),
    #[error("assignment is missing a ray for vertex {0:?}")]
    MissingRay(String),
    #[error("model value {value} at vertex {vertex:?} outside [0, 1]")]
    ValueOutOfRange { vertex: String, value: f64 },
    #[error("hyperedge {edge} sums to {sum}, expected 1")]
    EdgeNotNormalised { edge: usize, sum: f64 },
    #[error("density operator is not Hermitian (defect {0})")]
    NotHermitian(f64),
    #[error("density operator trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("density operator has eigenvalue {0} below -1e-10")]
    NotPositive(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
}

/// A hypergraph over string vertex ids. Hyperedges are stored as sorted
/// vertex-index sets in lexicographic order.
#[derive(Debug, Clone)]
pub struct Scenario {
    vertices: Vec<String>,
    hyperedges: Vec<Vec<usize>>,
}

impl Scenario {
    pub fn new(vertices: Vec<String>, hyperedges: Vec<Vec<usize>>) -> Result<Self, ScenarioError> {
        for (i, id) in vertices.iter().enumerate() {
            if vertices[..i].contains(id) {
                return Err(ScenarioError::DuplicateVertex(id.clone()));
            }
        }
        let mut edges: Vec<Vec<usize>> = Vec::with_capacity(hyperedges.len());
        for (k, mut e) in hyperedges.into_iter().enumerate() {
            if e.is_empty() {
                return Err(ScenarioError::EmptyHyperedge(k));
            }
            assert!(e.iter().all(|&v| v < vertices.len()), "hyperedge vertex out of range");
            e.sort_unstable();
            e.dedup();
            edges.push(e);
        }
        edges.sort();
        for k in 1..edges.len() {
            if edges[k] == edges[k - 1] {
                return Err(ScenarioError::DuplicateHyperedge(k));
            }
        }
        Ok(Scenario { vertices, hyperedges: edges })
    }

    pub fn from_ids(
        vertices: Vec<String>,
        hyperedges: Vec<Vec<String>>,
    ) -> Result<Self, ScenarioError> {
        let index: BTreeMap<&str, usize> =
            vertices.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut edges = Vec::with_capacity(hyperedges.len());
        for e in hyperedges {
            let mut idx = Vec::with_capacity(e.len());
            for id in e {
                let &i = index
                    .get(id.as_str())
                    .ok_or_else(|| ScenarioError::UnknownVertex(id.clone()))?;
                idx.push(i);
            }
            edges.push(idx);
        }
        Scenario::new(vertices, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn hyperedge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_id(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|s| s == id)
    }

    pub fn hyperedges(&self) -> &[Vec<usize>] {
        &self.hyperedges
    }

    pub fn hyperedge_ids(&self, k: usize) -> Vec<&str> {
        self.hyperedges[k].iter().map(|&v| self.vertices[v].as_str()).collect()
    }
}

/// One ray per scenario vertex, in vertex order.
#[derive(Debug, Clone)]
pub struct RayAssignment {
    rays: Vec<Ray>,
}

impl RayAssignment {
    pub fn new(rays: Vec<Ray>) -> Self {
        RayAssignment { rays }
    }

    pub fn ray(&self, v: usize) -> &Ray {
        &self.rays[v]
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn dim(&self) -> usize {
        self.rays.first().map(Ray::dim).unwrap_or(0)
    }

    /// Checks that every hyperedge is a complete set of mutually orthogonal
    /// rays of the common dimension.
    pub fn validate(&self, s: &Scenario) -> Result<(), ScenarioError> {
        if self.rays.len() != s.vertex_count() {
            return Err(ScenarioError::MissingRay(
                s.vertices().get(self.rays.len()).cloned().unwrap_or_default(),
            ));
        }
        let dim = self.dim();
        for (k, e) in s.hyperedges().iter().enumerate() {
            if e.len() != dim {
                return Err(ScenarioError::IncompleteHyperedge { edge: k, got: e.len(), dim });
            }
            for (i, &u) in e.iter().enumerate() {
                for &v in &e[i + 1..] {
                    if !is_orthogonal(&self.rays[u], &self.rays[v], ORTHO_TOL)? {
                        return Err(ScenarioError::EdgeNotOrthogonal(u, v));
                    }
                }
            }
        }
        Ok(())
    }
}

/// How `scenario_from_rays` decides the hyperedges.
pub enum BasisMode {
    /// All complete mutually-orthogonal subsets, found by maximal-clique
    /// enumeration over the orthogonality graph.
    AllBases,
    /// Exactly the listed bases.
    GivenBases(Vec<crate::rays::Basis>),
}

/// Builds the contextuality scenario of a ray family with vertex ids
/// `r0, r1, ...` in input order.
pub fn scenario_from_rays(
    rays: &[Ray],
    mode: BasisMode,
) -> Result<(Scenario, RayAssignment), ScenarioError> {
    let ids: Vec<String> = (0..rays.len()).map(|i| format!("r{i}")).collect();
    scenario_from_named_rays(&ids, rays, mode)
}

/// As [`scenario_from_rays`] with caller-chosen vertex ids.
pub fn scenario_from_named_rays(
    ids: &[String],
    rays: &[Ray],
    mode: BasisMode,
) -> Result<(Scenario, RayAssignment), ScenarioError> {
    assert_eq!(ids.len(), rays.len(), "one id per ray");
    for i in 0..rays.len() {
        for j in (i + 1)..rays.len() {
            if rays[i].same_ray(&rays[j], ORTHO_TOL) {
                return Err(ScenarioError::DuplicateRay(i, j));
            }
        }
    }
    let dim = rays.first().map(Ray::dim).unwrap_or(0);
    let edges: Vec<Vec<usize>> = match mode {
        BasisMode::AllBases => {
            let n = rays.len();
            let mut adj = vec![vec![false; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    if is_orthogonal(&rays[i], &rays[j], ORTHO_TOL)? {
                        adj[i][j] = true;
                        adj[j][i] = true;
                    }
                }
            }
            maximal_cliques(&adj).into_iter().filter(|c| c.len() == dim).collect()
        }
        BasisMode::GivenBases(bases) => {
            let mut edges = Vec::with_capacity(bases.len());
            for (bi, basis) in bases.iter().enumerate() {
                let mut e = Vec::with_capacity(basis.dim());
                for (mi, member) in basis.rays().iter().enumerate() {
                    let v = rays
                        .iter()
                        .position(|r| r.same_ray(member, ORTHO_TOL))
                        .ok_or(ScenarioError::BasisRayNotFound { basis: bi, member: mi })?;
                    e.push(v);
                }
                edges.push(e);
            }
            edges
        }
    };
    let scenario = Scenario::new(ids.to_vec(), edges)?;
    let assignment = RayAssignment::new(rays.to_vec());
    assignment.validate(&scenario)?;
    Ok((scenario, assignment))
}

/// Bron-Kerbosch with pivoting over sorted index sets; fully deterministic.
fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut out = Vec::new();
    let mut r = Vec::new();
    let p: Vec<usize> = (0..n).collect();
    let x: Vec<usize> = Vec::new();
    bron_kerbosch(adj, &mut r, p, x, &mut out);
    out.sort();
    out
}

fn bron_kerbosch(
    adj: &[Vec<bool>],
    r: &mut Vec<usize>,
    p: Vec<usize>,
    x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        let mut clique = r.clone();
        clique.sort_unstable();
        out.push(clique);
        return;
    }
    // Pivot: vertex of P union X with most neighbours in P (smallest index wins ties).
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| (p.iter().filter(|&&v| adj[u][v]).count(), usize::MAX - u))
        .unwrap();
    let candidates: Vec<usize> = p.iter().copied().filter(|&v| !adj[pivot][v]).collect();
    let mut p = p;
    let mut x = x;
    for v in candidates {
        let np: Vec<usize> = p.iter().copied().filter(|&u| adj[v][u]).collect();
        let nx: Vec<usize> = x.iter().copied().filter(|&u| adj[v][u]).collect();
        r.push(v);
        bron_kerbosch(adj, r, np, nx, out);
        r.pop();
        p.retain(|&u| u != v);
        x.push(v);
    }
}

/// A KS-colouring: a 0/1 vertex assignment with exactly one 1 per hyperedge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Colouring {
    values: Vec<u8>,
}

impl Colouring {
    pub fn new(values: Vec<u8>, s: &Scenario) -> Result<Self, ScenarioError> {
        assert_eq!(values.len(), s.vertex_count());
        let c = Colouring { values };
        c.validate(s)?;
        Ok(c)
    }

    pub fn value(&self, v: usize) -> u8 {
        self.values[v]
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn validate(&self, s: &Scenario) -> Result<(), ScenarioError> {
        for (k, e) in s.hyperedges().iter().enumerate() {
            let sum: u32 = e.iter().map(|&v| u32::from(self.values[v])).sum();
            if sum != 1 {
                return Err(ScenarioError::EdgeNotNormalised { edge: k, sum: f64::from(sum) });
            }
        }
        Ok(())
    }

    /// JSON form `{"values": {id: 0|1}}`.
    pub fn to_json(&self, s: &Scenario) -> serde_json::Value {
        let map: BTreeMap<&str, u8> =
            s.vertices().iter().map(String::as_str).zip(self.values.iter().copied()).collect();
        serde_json::json!({ "values": map })
    }

    pub fn as_prob_model(&self) -> ProbModel {
        ProbModel { values: self.values.iter().map(|&b| f64::from(b)).collect() }
    }
}

/// A probabilistic model: `[0, 1]` vertex weights summing to one on every
/// hyperedge.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbModel {
    values: Vec<f64>,
}

impl ProbModel {
    pub fn new(values: Vec<f64>, s: &Scenario) -> Result<Self, ScenarioError> {
        assert_eq!(values.len(), s.vertex_count());
        for (v, &p) in values.iter().enumerate() {
            if !(-MODEL_TOL..=1.0 + MODEL_TOL).contains(&p) {
                return Err(ScenarioError::ValueOutOfRange {
                    vertex: s.vertex_id(v).to_string(),
                    value: p,
                });
            }
        }
        let m = ProbModel { values };
        m.validate(s)?;
        Ok(m)
    }

    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn validate(&self, s: &Scenario) -> Result<(), ScenarioError> {
        for (k, e) in s.hyperedges().iter().enumerate() {
            let sum: f64 = e.iter().map(|&v| self.values[v]).sum();
            if (sum - 1.0).abs() > MODEL_TOL * (e.len() as f64).max(1.0) {
                return Err(ScenarioError::EdgeNotNormalised { edge: k, sum });
            }
        }
        Ok(())
    }

    pub fn to_json(&self, s: &Scenario) -> serde_json::Value {
        let map: BTreeMap<&str, f64> =
            s.vertices().iter().map(String::as_str).zip(self.values.iter().copied()).collect();
        serde_json::json!({ "values": map })
    }
}

// --- KS-colouring search ----------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Cell {
    Unset,
    Zero,
    One,
}

struct Solver<'a> {
    edges: &'a [Vec<usize>],
    vertex_edges: Vec<Vec<usize>>,
    assign: Vec<Cell>,
    ones: Vec<u32>,
    unset: Vec<u32>,
    trail: Vec<usize>,
}

impl<'a> Solver<'a> {
    fn new(s: &'a Scenario) -> Self {
        let n = s.vertex_count();
        let mut vertex_edges = vec![Vec::new(); n];
        for (k, e) in s.hyperedges().iter().enumerate() {
            for &v in e {
                vertex_edges[v].push(k);
            }
        }
        Solver {
            edges: s.hyperedges(),
            vertex_edges,
            assign: vec![Cell::Unset; n],
            ones: vec![0; s.hyperedge_count()],
            unset: s.hyperedges().iter().map(|e| e.len() as u32).collect(),
            trail: Vec::with_capacity(n),
        }
    }

    /// Assigns `v := val` and propagates the exactly-one constraints.
    /// Returns false on conflict; the trail records assignments for undo.
    /// Counter updates always run to completion for a recorded assignment,
    /// so `undo_to` stays consistent after a conflicted branch.
    fn assign_and_propagate(&mut self, v: usize, val: Cell) -> bool {
        let mut queue = vec![(v, val)];
        while let Some((v, val)) = queue.pop() {
            match self.assign[v] {
                Cell::Unset => {}
                prev => {
                    if prev == val {
                        continue;
                    }
                    return false;
                }
            }
            self.assign[v] = val;
            self.trail.push(v);
            let mut conflict = false;
            for &k in &self.vertex_edges[v] {
                self.unset[k] -= 1;
                if val == Cell::One {
                    self.ones[k] += 1;
                    if self.ones[k] > 1 {
                        conflict = true;
                    }
                }
                if conflict {
                    continue;
                }
                if val == Cell::One {
                    // A one forces zero on every hyperedge mate.
                    for &u in &self.edges[k] {
                        if u != v && self.assign[u] == Cell::Unset {
                            queue.push((u, Cell::Zero));
                        }
                    }
                }
                if self.ones[k] == 0 {
                    match self.unset[k] {
                        0 => conflict = true,
                        1 => {
                            // Last candidate of an all-zero hyperedge must be one.
                            let u = *self.edges[k]
                                .iter()
                                .find(|&&u| self.assign[u] == Cell::Unset)
                                .expect("counted one unset vertex");
                            queue.push((u, Cell::One));
                        }
                        _ => {}
                    }
                }
            }
            if conflict {
                return false;
            }
        }
        true
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            let val = self.assign[v];
            self.assign[v] = Cell::Unset;
            for &k in &self.vertex_edges[v] {
                self.unset[k] += 1;
                if val == Cell::One {
                    self.ones[k] -= 1;
                }
            }
        }
    }

    /// Depth-first over vertices in input order, value one before zero.
    /// Invokes `found` on every complete colouring; `found` returns false
    /// to stop the search.
    fn search(&mut self, from: usize, found: &mut impl FnMut(&[Cell]) -> bool) -> bool {
        let next = (from..self.assign.len()).find(|&v| self.assign[v] == Cell::Unset);
        let Some(v) = next else {
            return found(&self.assign);
        };
        for val in [Cell::One, Cell::Zero] {
            let mark = self.trail.len();
            if self.assign_and_propagate(v, val) && !self.search(v + 1, found) {
                return false;
            }
            self.undo_to(mark);
        }
        true
    }
}

fn cells_to_colouring(cells: &[Cell]) -> Colouring {
    Colouring {
        values: cells
            .iter()
            .map(|c| match c {
                Cell::One => 1,
                _ => 0,
            })
            .collect(),
    }
}

/// Complete search for a KS-colouring. Returns the first colouring in the
/// canonical branch order (vertex input order, value one before zero), or
/// `None` when the scenario is KS-uncolourable.
pub fn find_ks_colouring(s: &Scenario) -> Option<Colouring> {
    let mut solver = Solver::new(s);
    let mut result = None;
    solver.search(0, &mut |cells| {
        result = Some(cells_to_colouring(cells));
        false
    });
    if let Some(c) = &result {
        debug_assert!(c.validate(s).is_ok());
    }
    result
}

/// All KS-colourings in canonical order, truncated at `cap`.
/// The second component reports whether truncation occurred.
pub fn enumerate_ks_colourings(s: &Scenario, cap: usize) -> (Vec<Colouring>, bool) {
    let mut solver = Solver::new(s);
    let mut out = Vec::new();
    let mut truncated = false;
    solver.search(0, &mut |cells| {
        if out.len() == cap {
            truncated = true;
            return false;
        }
        out.push(cells_to_colouring(cells));
        true
    });
    for c in &out {
        debug_assert!(c.validate(s).is_ok());
    }
    (out, truncated)
}

/// Verdict of the convex-hull membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classicality {
    /// The model is a convex combination of KS-colourings (weights returned).
    Classical,
    /// The model lies outside the polytope of colourings; the certificate
    /// `y` satisfies `y . p > max_c y . c` over all colourings `c`.
    NonClassical,
    /// Colouring enumeration hit the cap before the test could conclude.
    Inconclusive,
}

/// Decides whether `p` is a convex combination of the KS-colourings of `s`.
pub fn is_classical_model(
    s: &Scenario,
    p: &ProbModel,
    cap: usize,
) -> Result<Classicality, ScenarioError> {
    p.validate(s)?;
    let (details, _) = classical_decomposition(s, p, cap)?;
    Ok(details)
}

/// As [`is_classical_model`], also returning the mixing weights or the
/// separating certificate (one entry per vertex plus a constant offset).
pub fn classical_decomposition(
    s: &Scenario,
    p: &ProbModel,
    cap: usize,
) -> Result<(Classicality, Option<Vec<f64>>), ScenarioError> {
    let (colourings, truncated) = enumerate_ks_colourings(s, cap);
    if colourings.is_empty() {
        return Ok(if truncated { (Classicality::Inconclusive, None) } else {
            (Classicality::NonClassical, None)
        });
    }
    let n = s.vertex_count();
    // Rows: one equality per vertex plus the normalisation of the weights.
    let mut a = vec![vec![0.0; colourings.len()]; n + 1];
    for (j, c) in colourings.iter().enumerate() {
        for v in 0..n {
            a[v][j] = f64::from(c.value(v));
        }
        a[n][j] = 1.0;
    }
    let mut b: Vec<f64> = p.values().to_vec();
    b.push(1.0);
    match feasible_nonnegative(&a, &b) {
        Feasibility::Feasible(w) => Ok((Classicality::Classical, Some(w))),
        Feasibility::Infeasible(y) => {
            if truncated {
                Ok((Classicality::Inconclusive, None))
            } else {
                Ok((Classicality::NonClassical, Some(y)))
            }
        }
    }
}

// --- Density operators and quantum models ------------------------------------

/// A density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    mat: CMatrix,
}

impl DensityOperator {
    pub fn new(mat: CMatrix) -> Result<Self, ScenarioError> {
        assert_eq!(mat.rows(), mat.cols(), "density operator must be square");
        let herm = mat.hermiticity_defect();
        if herm > 1e-12 {
            return Err(ScenarioError::NotHermitian(herm));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(ScenarioError::BadTrace(tr.re));
        }
        let (vals, _) = eigh(&mat);
        if let Some(&lo) = vals.first() {
            if lo < -1e-10 {
                return Err(ScenarioError::NotPositive(lo));
            }
        }
        Ok(DensityOperator { mat })
    }

    /// `|psi><psi|`.
    pub fn pure(psi: &Ray) -> Self {
        let d = psi.dim();
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi.amplitude(i) * psi.amplitude(j).conj();
            }
        }
        DensityOperator { mat: m }
    }

    /// `I/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        DensityOperator { mat: CMatrix::identity(d).scale(Complex64::new(1.0 / d as f64, 0.0)) }
    }

    /// A convex mixture of pure states; weights are renormalised.
    pub fn mixture(parts: &[(f64, Ray)]) -> Result<Self, ScenarioError> {
        assert!(!parts.is_empty(), "mixture needs at least one component");
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        let d = parts[0].1.dim();
        let mut m = CMatrix::zeros(d, d);
        for (w, psi) in parts {
            if psi.dim() != d {
                return Err(ScenarioError::DimMismatch(psi.dim(), d));
            }
            m = m.add(&DensityOperator::pure(psi).mat.scale(Complex64::new(w / total, 0.0)));
        }
        DensityOperator::new(m)
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// `<psi| rho |psi>`, clamped into `[0, 1]`.
    pub fn expectation(&self, psi: &Ray) -> Result<f64, ScenarioError> {
        if psi.dim() != self.dim() {
            return Err(ScenarioError::DimMismatch(psi.dim(), self.dim()));
        }
        let rv = self.mat.matvec(psi.amplitudes());
        let val: Complex64 =
            psi.amplitudes().iter().zip(&rv).map(|(a, b)| a.conj() * b).sum();
        debug_assert!(val.im.abs() < 1e-9, "expectation not real: {val}");
        debug_assert!((-1e-9..=1.0 + 1e-9).contains(&val.re));
        Ok(val.re.clamp(0.0, 1.0))
    }

    /// JSON form `{"dim": d, "matrix": [[[re, im], ...], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let d = self.dim();
        let rows: Vec<Vec<[f64; 2]>> = (0..d)
            .map(|i| (0..d).map(|j| [self.mat[(i, j)].re, self.mat[(i, j)].im]).collect())
            .collect();
        serde_json::json!({ "dim": d, "matrix": rows })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Repr {
            dim: usize,
            matrix: Vec<Vec<[f64; 2]>>,
        }
        let repr: Repr = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        if repr.matrix.len() != repr.dim
            || repr.matrix.iter().any(|row| row.len() != repr.dim)
        {
            return Err("matrix shape does not match dim".into());
        }
        let mat = CMatrix::from_rows(
            repr.matrix
                .iter()
                .map(|row| row.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                .collect(),
        );
        DensityOperator::new(mat).map_err(|e| e.to_string())
    }
}

/// The Born-rule model `p(v) = <psi_v| rho |psi_v>` of a ray assignment.
pub fn quantum_model(
    s: &Scenario,
    a: &RayAssignment,
    rho: &DensityOperator,
) -> Result<ProbModel, ScenarioError> {
    a.validate(s)?;
    if a.dim() != rho.dim() {
        return Err(ScenarioError::DimMismatch(a.dim(), rho.dim()));
    }
    let values: Vec<f64> = a
        .rays()
        .iter()
        .map(|r| rho.expectation(r))
        .collect::<Result<_, _>>()?;
    ProbModel::new(values, s)
}

// --- JSON file form -----------------------------------------------------------
//
// {"dim": d, "vertices": [{"id": s, "ray": Ray}, ...], "hyperedges": [[id, ...], ...]}
// The ray field (and dim) are omitted for scenarios without a ray assignment.

#[derive(Serialize, Deserialize)]
struct VertexRepr {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    ray: Option<Ray>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioRepr {
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    vertices: Vec<VertexRepr>,
    hyperedges: Vec<Vec<String>>,
}

/// Serialises a scenario (and optional ray assignment) to the JSON file form.
pub fn scenario_to_json(s: &Scenario, a: Option<&RayAssignment>) -> serde_json::Value {
    let repr = ScenarioRepr {
        dim: a.map(RayAssignment::dim),
        vertices: s
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, id)| VertexRepr {
                id: id.clone(),
                ray: a.map(|a| a.ray(i).clone()),
            })
            .collect(),
        hyperedges: (0..s.hyperedge_count())
            .map(|k| s.hyperedge_ids(k).into_iter().map(str::to_string).collect())
            .collect(),
    };
    serde_json::to_value(repr).expect("scenario serialises")
}

/// Parses the JSON file form; the assignment is present when every vertex
/// carries a ray.
pub fn scenario_from_json(
    v: &serde_json::Value,
) -> Result<(Scenario, Option<RayAssignment>), String> {
    let repr: ScenarioRepr = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
    let ids: Vec<String> = repr.vertices.iter().map(|v| v.id.clone()).collect();
    let scenario = Scenario::from_ids(ids, repr.hyperedges).map_err(|e| e.to_string())?;
    let rays: Option<Vec<Ray>> = repr.vertices.into_iter().map(|v| v.ray).collect();
    let assignment = match rays {
        Some(rays) => {
            let a = RayAssignment::new(rays);
            a.validate(&scenario).map_err(|e| e.to_string())?;
            Some(a)
        }
        None => None,
    };
    Ok((scenario, assignment))
}
