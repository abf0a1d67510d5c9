//! Bell scenarios, the local polytope, and the correspondence between Bell
//! scenarios and contextuality scenarios.
//!
//! Events `a|x` of an n-party binary-outcome Bell scenario become vertices
//! of a hypergraph whose hyperedges are the outcome sets of adaptive
//! measurement protocols (global measurements are the feedback-free case);
//! the extra, adaptive hyperedges encode the no-signalling conditions.
//! Local behaviours then correspond exactly to the classical models of that
//! hypergraph, which is what the pipeline at the end of this module checks
//! on concrete instances.

use crate::rays::{inner_product, tensor, ProductRay, Ray, RayError, ORTHO_TOL};
use crate::scenario::{
    enumerate_ks_colourings, quantum_model, scenario_from_named_rays, BasisMode, Classicality,
    Colouring, DensityOperator, ProbModel, Scenario, ScenarioError,
};
use crate::simplex::{feasible_nonnegative, Feasibility};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Guard on the number of parties for hypergraph construction.
pub const MAX_PARTIES: usize = 3;
/// Guard on per-party setting counts for hypergraph construction.
pub const MAX_SETTINGS: usize = 3;
/// Guard on the number of local deterministic behaviours.
pub const MAX_DETERMINISTIC: usize = 1_000_000;

const NS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BellError {
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("a Bell scenario needs at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("setting counts must be at least one")]
    NoSettings,
    #[error("scenario too large: {0}")]
    TooLarge(String),
    #[error("outcome distribution for setting {0:?} sums to {1}, expected 1")]
    NotNormalised(String, f64),
    #[error("signalling detected: party {party} marginal changes between settings {x1:?} and {x2:?} by {delta}")]
    Signalling { party: usize, x1: String, x2: String, delta: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("qubit count mismatch between rays")]
    MixedQubitCounts,
    #[error("behaviour does not match the scenario")]
    ScenarioMismatch,
}

/// An n-party Bell scenario with two outcomes per local measurement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellScenario {
    settings: Vec<usize>,
}

impl BellScenario {
    pub fn new(settings: Vec<usize>) -> Result<Self, BellError> {
        if settings.len() < 2 {
            return Err(BellError::TooFewParties(settings.len()));
        }
        if settings.contains(&0) {
            return Err(BellError::NoSettings);
        }
        Ok(BellScenario { settings })
    }

    /// Two parties, two settings each.
    pub fn chsh() -> Self {
        BellScenario { settings: vec![2, 2] }
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    /// Global settings in lexicographic order, first party slowest.
    pub fn global_settings(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for &s in &self.settings {
            let mut next = Vec::with_capacity(out.len() * s);
            for prefix in &out {
                for k in 0..s {
                    let mut p = prefix.clone();
                    p.push(k);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }

    /// Global outcomes `{0,1}^n` in lexicographic order.
    pub fn global_outcomes(&self) -> Vec<Vec<u8>> {
        let n = self.parties();
        (0..1usize << n)
            .map(|k| (0..n).map(|r| ((k >> (n - 1 - r)) & 1) as u8).collect())
            .collect()
    }

    /// The canonical `a|x` label of an event.
    pub fn event_id(outcomes: &[u8], settings: &[usize]) -> String {
        let a: String = outcomes.iter().map(ToString::to_string).collect();
        let x: String = settings.iter().map(ToString::to_string).collect();
        format!("{a}|{x}")
    }

    /// All events in vertex order: settings outermost, outcomes innermost.
    pub fn events(&self) -> Vec<(Vec<u8>, Vec<usize>)> {
        let mut out = Vec::new();
        for x in self.global_settings() {
            for a in self.global_outcomes() {
                out.push((a, x.clone()));
            }
        }
        out
    }
}

/// A conditional outcome distribution `p(a|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Behaviour {
    scenario: BellScenario,
    /// Indexed `[global setting][global outcome]` in the canonical orders.
    p: Vec<Vec<f64>>,
}

impl Behaviour {
    /// Validates per-setting normalisation and no-signalling.
    pub fn new(scenario: BellScenario, p: Vec<Vec<f64>>) -> Result<Self, BellError> {
        let xs = scenario.global_settings();
        let outs = scenario.global_outcomes();
        assert_eq!(p.len(), xs.len(), "one distribution per global setting");
        for (xi, dist) in p.iter().enumerate() {
            assert_eq!(dist.len(), outs.len(), "one probability per outcome");
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > NS_TOL {
                let label: String = xs[xi].iter().map(ToString::to_string).collect();
                return Err(BellError::NotNormalised(label, sum));
            }
        }
        let b = Behaviour { scenario, p };
        b.check_no_signalling()?;
        Ok(b)
    }

    /// Marginal of all parties except `party` must not depend on that
    /// party's setting.
    fn check_no_signalling(&self) -> Result<(), BellError> {
        let xs = self.scenario.global_settings();
        let outs = self.scenario.global_outcomes();
        let n = self.scenario.parties();
        for party in 0..n {
            for (i, x1) in xs.iter().enumerate() {
                for (j, x2) in xs.iter().enumerate().skip(i + 1) {
                    let same_elsewhere =
                        x1.iter().zip(x2).enumerate().all(|(r, (a, b))| r == party || a == b);
                    if !same_elsewhere || x1[party] == x2[party] {
                        continue;
                    }
                    // Marginal over the remaining parties' outcomes.
                    let mut marg1: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
                    let mut marg2: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
                    for (k, a) in outs.iter().enumerate() {
                        let mut rest = a.clone();
                        rest.remove(party);
                        *marg1.entry(rest.clone()).or_insert(0.0) += self.p[i][k];
                        *marg2.entry(rest).or_insert(0.0) += self.p[j][k];
                    }
                    for (rest, v1) in &marg1 {
                        let delta = (v1 - marg2[rest]).abs();
                        if delta > NS_TOL {
                            return Err(BellError::Signalling {
                                party,
                                x1: x1.iter().map(ToString::to_string).collect(),
                                x2: x2.iter().map(ToString::to_string).collect(),
                                delta,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> &BellScenario {
        &self.scenario
    }

    pub fn probability(&self, outcomes: &[u8], settings: &[usize]) -> f64 {
        let xs = self.scenario.global_settings();
        let outs = self.scenario.global_outcomes();
        let xi = xs.iter().position(|x| x == settings).expect("known setting");
        let ai = outs.iter().position(|a| a == outcomes).expect("known outcome");
        self.p[xi][ai]
    }

    /// Flat values in the canonical event order.
    pub fn values(&self) -> Vec<f64> {
        self.p.iter().flatten().copied().collect()
    }

    /// JSON form `{"parties": n, "settings": [...], "p": {"a|x": value}}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = BTreeMap::new();
        for (a, x) in self.scenario.events() {
            map.insert(BellScenario::event_id(&a, &x), self.probability(&a, &x));
        }
        serde_json::json!({
            "parties": self.scenario.parties(),
            "settings": self.scenario.settings(),
            "p": map,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Repr {
            #[allow(dead_code)]
            parties: usize,
            settings: Vec<usize>,
            p: BTreeMap<String, f64>,
        }
        let repr: Repr = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let scenario = BellScenario::new(repr.settings).map_err(|e| e.to_string())?;
        let xs = scenario.global_settings();
        let outs = scenario.global_outcomes();
        let mut p = vec![vec![0.0; outs.len()]; xs.len()];
        for (xi, x) in xs.iter().enumerate() {
            for (ai, a) in outs.iter().enumerate() {
                let id = BellScenario::event_id(a, x);
                p[xi][ai] = *repr.p.get(&id).ok_or_else(|| format!("missing event {id:?}"))?;
            }
        }
        Behaviour::new(scenario, p).map_err(|e| e.to_string())
    }
}

/// One qubit basis per party and setting; index `[party][setting]` gives
/// the rays for outcomes 0 and 1.
#[derive(Debug, Clone)]
pub struct LocalMeasurementSet {
    parties: Vec<Vec<[Ray; 2]>>,
}

impl LocalMeasurementSet {
    pub fn new(parties: Vec<Vec<[Ray; 2]>>) -> Result<Self, BellError> {
        for settings in &parties {
            for pair in settings {
                if pair[0].dim() != 2 || pair[1].dim() != 2 {
                    return Err(BellError::Ray(RayError::NotQubit(pair[0].dim())));
                }
                if !crate::rays::is_orthogonal(&pair[0], &pair[1], ORTHO_TOL)? {
                    return Err(BellError::Ray(RayError::BasisNotOrthogonal(0, 1)));
                }
            }
        }
        Ok(LocalMeasurementSet { parties })
    }

    /// Measurements in the zx-plane of the Bloch sphere at the given polar
    /// angles, one list per party.
    pub fn zx_plane(angles: &[Vec<f64>]) -> Self {
        let parties = angles
            .iter()
            .map(|list| {
                list.iter()
                    .map(|&theta| {
                        let zero = Ray::qubit(theta, 0.0);
                        let one = zero.qubit_orthogonal().expect("qubit");
                        [zero, one]
                    })
                    .collect()
            })
            .collect();
        LocalMeasurementSet { parties }
    }

    pub fn parties(&self) -> usize {
        self.parties.len()
    }

    pub fn setting_counts(&self) -> Vec<usize> {
        self.parties.iter().map(Vec::len).collect()
    }

    pub fn outcome_ray(&self, party: usize, setting: usize, outcome: u8) -> &Ray {
        &self.parties[party][setting][outcome as usize]
    }

    /// The product ray of the event `a|x`.
    pub fn event_ray(&self, outcomes: &[u8], settings: &[usize]) -> Result<Ray, BellError> {
        let factors: Vec<Ray> = outcomes
            .iter()
            .zip(settings)
            .enumerate()
            .map(|(r, (&a, &x))| self.outcome_ray(r, x, a).clone())
            .collect();
        Ok(tensor(&factors)?)
    }

    pub fn scenario(&self) -> Result<BellScenario, BellError> {
        BellScenario::new(self.setting_counts())
    }
}

/// The projective quantum behaviour of local measurements on a state:
/// `p(a|x) = <psi_{a|x}| rho |psi_{a|x}>`.
pub fn quantum_behaviour(
    rho: &DensityOperator,
    m: &LocalMeasurementSet,
) -> Result<Behaviour, BellError> {
    let scenario = m.scenario()?;
    let expected_dim = 1usize << scenario.parties();
    if rho.dim() != expected_dim {
        return Err(BellError::DimMismatch(rho.dim(), expected_dim));
    }
    let outs = scenario.global_outcomes();
    let mut p = Vec::new();
    for x in scenario.global_settings() {
        let mut dist = Vec::with_capacity(outs.len());
        for a in &outs {
            let ray = m.event_ray(a, &x)?;
            dist.push(rho.expectation(&ray)?);
        }
        p.push(dist);
    }
    Behaviour::new(scenario, p)
}

/// All local deterministic behaviours: one per assignment of an outcome to
/// every (party, setting) pair, in lexicographic order of the assignment.
pub fn enumerate_local_deterministic(b: &BellScenario) -> Result<Vec<Behaviour>, BellError> {
    let total_settings: usize = b.settings().iter().sum();
    let count = 1usize
        .checked_shl(total_settings as u32)
        .filter(|&c| c <= MAX_DETERMINISTIC)
        .ok_or_else(|| BellError::TooLarge(format!("2^{total_settings} strategies")))?;
    let xs = b.global_settings();
    let outs = b.global_outcomes();
    let mut out = Vec::with_capacity(count);
    for code in 0..count {
        // Bit for (party, setting), party-major, first bit most significant.
        let outcome_of = |party: usize, setting: usize| -> u8 {
            let offset: usize = b.settings()[..party].iter().sum::<usize>() + setting;
            ((code >> (total_settings - 1 - offset)) & 1) as u8
        };
        let mut p = Vec::with_capacity(xs.len());
        for x in &xs {
            let chosen: Vec<u8> = x.iter().enumerate().map(|(r, &xr)| outcome_of(r, xr)).collect();
            let dist: Vec<f64> =
                outs.iter().map(|a| if *a == chosen { 1.0 } else { 0.0 }).collect();
            p.push(dist);
        }
        out.push(Behaviour::new(b.clone(), p)?);
    }
    Ok(out)
}

/// Verdict of the local-polytope membership test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Locality {
    Local,
    Nonlocal,
}

/// LP membership of the behaviour in the convex hull of the local
/// deterministic behaviours.
pub fn is_local(p: &Behaviour) -> Result<Locality, BellError> {
    Ok(local_decomposition(p)?.0)
}

/// As [`is_local`], also returning mixing weights over the deterministic
/// behaviours (local case) or a separating certificate over the events with
/// a trailing constant (nonlocal case).
pub fn local_decomposition(p: &Behaviour) -> Result<(Locality, Vec<f64>), BellError> {
    let deterministic = enumerate_local_deterministic(p.scenario())?;
    let target = p.values();
    let mut a = vec![vec![0.0; deterministic.len()]; target.len() + 1];
    for (j, d) in deterministic.iter().enumerate() {
        for (row, v) in d.values().into_iter().enumerate() {
            a[row][j] = v;
        }
        a[target.len()][j] = 1.0;
    }
    let mut b: Vec<f64> = target;
    b.push(1.0);
    Ok(match feasible_nonnegative(&a, &b) {
        Feasibility::Feasible(w) => (Locality::Local, w),
        Feasibility::Infeasible(y) => (Locality::Nonlocal, y),
    })
}

/// The largest CHSH combination `|s1 E00 + s2 E01 + s3 E10 + s4 E11|` over
/// sign patterns with an odd number of minus signs. Defined for two-party,
/// two-setting behaviours.
pub fn chsh_value(p: &Behaviour) -> Option<f64> {
    if p.scenario().settings() != [2, 2] {
        return None;
    }
    let correlator = |x: &[usize]| -> f64 {
        let mut e = 0.0;
        for a in p.scenario().global_outcomes() {
            let sign = if (a[0] ^ a[1]) == 0 { 1.0 } else { -1.0 };
            e += sign * p.probability(&a, x);
        }
        e
    };
    let e =
        [correlator(&[0, 0]), correlator(&[0, 1]), correlator(&[1, 0]), correlator(&[1, 1])];
    let mut best: f64 = 0.0;
    for pattern in 0..16u8 {
        let signs: Vec<f64> =
            (0..4).map(|i| if (pattern >> i) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        if signs.iter().product::<f64>() > 0.0 {
            continue;
        }
        let value: f64 = e.iter().zip(&signs).map(|(e, s)| e * s).sum();
        best = best.max(value.abs());
    }
    Some(best)
}

// --- The Bell hypergraph ------------------------------------------------------

/// The contextuality scenario of a Bell scenario: vertices are events
/// `a|x`; hyperedges are the leaf sets of all adaptive measurement
/// protocols (global measurements are the feedback-free ones, and the
/// remaining protocols contribute the no-signalling hyperedges).
pub fn bell_hypergraph(b: &BellScenario) -> Result<Scenario, BellError> {
    if b.parties() > MAX_PARTIES {
        return Err(BellError::TooLarge(format!("{} parties", b.parties())));
    }
    if b.settings().iter().any(|&s| s > MAX_SETTINGS) {
        return Err(BellError::TooLarge("more than three settings for a party".into()));
    }
    let events = b.events();
    let index: BTreeMap<String, usize> = events
        .iter()
        .enumerate()
        .map(|(i, (a, x))| (BellScenario::event_id(a, x), i))
        .collect();

    // Leaves of every adaptive protocol over the given parties; a leaf
    // records (party, setting, outcome) along its root-to-leaf path.
    fn protocols(b: &BellScenario, remaining: &[usize]) -> Vec<Vec<Vec<(usize, usize, u8)>>> {
        if remaining.is_empty() {
            return vec![vec![Vec::new()]];
        }
        let mut out = Vec::new();
        for (pos, &party) in remaining.iter().enumerate() {
            let rest: Vec<usize> = remaining
                .iter()
                .enumerate()
                .filter(|&(q, _)| q != pos)
                .map(|(_, &p)| p)
                .collect();
            let subtrees = protocols(b, &rest);
            for setting in 0..b.settings()[party] {
                for zero_branch in &subtrees {
                    for one_branch in &subtrees {
                        let mut leaves = Vec::new();
                        for (outcome, branch) in [(0u8, zero_branch), (1u8, one_branch)] {
                            for path in branch {
                                let mut p = path.clone();
                                p.push((party, setting, outcome));
                                leaves.push(p);
                            }
                        }
                        out.push(leaves);
                    }
                }
            }
        }
        out
    }

    let parties: Vec<usize> = (0..b.parties()).collect();
    let mut edges: BTreeSet<Vec<usize>> = BTreeSet::new();
    for protocol in protocols(b, &parties) {
        let mut edge = Vec::with_capacity(protocol.len());
        for path in &protocol {
            let mut outcomes = vec![0u8; b.parties()];
            let mut settings = vec![0usize; b.parties()];
            for &(party, setting, outcome) in path {
                outcomes[party] = outcome;
                settings[party] = setting;
            }
            edge.push(index[&BellScenario::event_id(&outcomes, &settings)]);
        }
        edge.sort_unstable();
        edges.insert(edge);
    }

    let ids: Vec<String> = events.iter().map(|(a, x)| BellScenario::event_id(a, x)).collect();
    Ok(Scenario::new(ids, edges.into_iter().collect())?)
}

/// Reads a behaviour as a probabilistic model on its Bell hypergraph.
/// No-signalling makes every adaptive hyperedge sum to one; validation
/// failure signals a signalling behaviour.
pub fn behaviour_as_model(p: &Behaviour, h: &Scenario) -> Result<ProbModel, BellError> {
    let events = p.scenario().events();
    if h.vertex_count() != events.len() {
        return Err(BellError::ScenarioMismatch);
    }
    let mut values = vec![0.0; events.len()];
    for (a, x) in &events {
        let id = BellScenario::event_id(a, x);
        let v = h.vertex_index(&id).ok_or(BellError::ScenarioMismatch)?;
        values[v] = p.probability(a, x);
    }
    Ok(ProbModel::new(values, h)?)
}

/// The deterministic behaviour as a KS-colouring of the Bell hypergraph.
pub fn deterministic_as_colouring(p: &Behaviour, h: &Scenario) -> Result<Colouring, BellError> {
    let model = behaviour_as_model(p, h)?;
    let values: Vec<u8> = model.values().iter().map(|&v| u8::from(v > 0.5)).collect();
    Ok(Colouring::new(values, h)?)
}

// --- Extending ray families to Bell scenarios -----------------------------------

/// Per party, collects the distinct pairwise non-orthogonal local factors
/// of the input rays (a ray equal or orthogonal to an earlier one folds
/// into that earlier setting), yielding one measurement per kept ray, the
/// Bell scenario they define, and the extended family of all outcome rays.
pub fn extend_rays_to_bell(
    s: &[ProductRay],
) -> Result<(LocalMeasurementSet, BellScenario, Vec<ProductRay>), BellError> {
    let n = s.first().map(ProductRay::subsystems).ok_or(BellError::NoSettings)?;
    if s.iter().any(|r| r.subsystems() != n) {
        return Err(BellError::MixedQubitCounts);
    }
    for r in s {
        for f in r.factors() {
            if f.dim() != 2 {
                return Err(BellError::Ray(RayError::NotQubit(f.dim())));
            }
        }
    }
    let mut parties: Vec<Vec<[Ray; 2]>> = Vec::with_capacity(n);
    for party in 0..n {
        let mut kept: Vec<Ray> = Vec::new();
        for r in s {
            let factor = r.factor(party);
            let redundant = kept.iter().any(|k| {
                k.same_ray(factor, ORTHO_TOL)
                    || inner_product(k, factor).map(|ip| ip.norm() <= ORTHO_TOL).unwrap_or(false)
            });
            if !redundant {
                kept.push(factor.clone());
            }
        }
        let settings: Vec<[Ray; 2]> = kept
            .into_iter()
            .map(|zero| {
                let one = zero.qubit_orthogonal().expect("qubit factor");
                [zero, one]
            })
            .collect();
        parties.push(settings);
    }
    let mset = LocalMeasurementSet::new(parties)?;
    let scenario = mset.scenario()?;
    let mut extended = Vec::new();
    for (a, x) in scenario.events() {
        let factors: Vec<Ray> = a
            .iter()
            .zip(&x)
            .enumerate()
            .map(|(r, (&ar, &xr))| mset.outcome_ray(r, xr, ar).clone())
            .collect();
        extended.push(ProductRay::from_qubits(factors)?);
    }
    Ok((mset, scenario, extended))
}

// --- The full correspondence pipeline --------------------------------------------

/// Everything the Bell-to-contextuality pipeline verifies on one instance.
#[derive(Debug, Serialize)]
pub struct PipelineReport {
    pub parties: usize,
    pub settings: Vec<usize>,
    pub input_rays: usize,
    pub extended_rays: usize,
    pub h_vertices: usize,
    pub h_hyperedges: usize,
    pub g_hyperedges: usize,
    pub bell_hyperedges: usize,
    pub extra_hyperedges: usize,
    /// Every pair of events in every extra hyperedge is locally orthogonal.
    pub local_orthogonality_ok: bool,
    /// Every deterministic behaviour sums to exactly one on every G
    /// hyperedge (so the classical models of G and of the Bell hypergraph
    /// coincide on this instance).
    pub saturation_ok: bool,
    pub model_on_h: Classicality,
    pub model_on_bell: Classicality,
    pub behaviour: Locality,
    pub chsh: Option<f64>,
    /// A violated inequality over the events, from the LP certificate:
    /// `sum coefficients[a|x] p(a|x) <= local_bound` for local behaviours.
    pub violated_inequality: Option<InequalityCertificate>,
}

#[derive(Debug, Serialize)]
pub struct InequalityCertificate {
    pub coefficients: BTreeMap<String, f64>,
    pub local_bound: f64,
    pub value: f64,
}

/// Builds the contextuality scenario of the input product rays, its Born
/// model for `rho`, the extended Bell scenario, and checks the structural
/// facts that tie non-classicality of the model to nonlocality of the
/// induced behaviour.
pub fn correspondence_pipeline(
    s: &[ProductRay],
    rho: &DensityOperator,
    cap: usize,
) -> Result<PipelineReport, BellError> {
    let flattened: Vec<Ray> = s.iter().map(ProductRay::flatten).collect();
    let (h, h_assignment) =
        crate::scenario::scenario_from_rays(&flattened, BasisMode::AllBases)?;
    let model_h = quantum_model(&h, &h_assignment, rho)?;
    let model_on_h = crate::scenario::is_classical_model(&h, &model_h, cap)?;

    let (mset, bscn, extended) = extend_rays_to_bell(s)?;
    let ids: Vec<String> =
        bscn.events().iter().map(|(a, x)| BellScenario::event_id(a, x)).collect();
    let ext_flat: Vec<Ray> = extended.iter().map(ProductRay::flatten).collect();
    let (g, _) = scenario_from_named_rays(&ids, &ext_flat, BasisMode::AllBases)?;
    let hprime = bell_hypergraph(&bscn)?;

    let bell_edges: BTreeSet<&Vec<usize>> = hprime.hyperedges().iter().collect();
    let extra: Vec<&Vec<usize>> =
        g.hyperedges().iter().filter(|e| !bell_edges.contains(e)).collect();

    // Local orthogonality of every extra hyperedge.
    let events = bscn.events();
    let mut local_orthogonality_ok = true;
    for edge in &extra {
        for (i, &u) in edge.iter().enumerate() {
            for &v in &edge[i + 1..] {
                let (au, xu) = &events[u];
                let (av, xv) = &events[v];
                let lo = au
                    .iter()
                    .zip(av)
                    .zip(xu.iter().zip(xv))
                    .any(|((a1, a2), (x1, x2))| x1 == x2 && a1 != a2);
                local_orthogonality_ok &= lo;
            }
        }
    }

    // Saturation: deterministic behaviours hit exactly one event of every
    // hyperedge of G.
    let deterministic = enumerate_local_deterministic(&bscn)?;
    let mut saturation_ok = true;
    for d in &deterministic {
        let values = d.values();
        for edge in g.hyperedges() {
            let sum: f64 = edge.iter().map(|&v| values[v]).sum();
            saturation_ok &= (sum - 1.0).abs() < 1e-12;
        }
    }

    let behaviour = quantum_behaviour(rho, &mset)?;
    let model_bell = behaviour_as_model(&behaviour, &hprime)?;
    let model_on_bell = crate::scenario::is_classical_model(&hprime, &model_bell, cap)?;
    let (locality, certificate) = local_decomposition(&behaviour)?;

    let violated_inequality = match locality {
        Locality::Local => None,
        Locality::Nonlocal => {
            // Certificate rows: one per event plus the normalisation row.
            let values = behaviour.values();
            let coeffs: Vec<f64> = certificate[..values.len()].to_vec();
            let value: f64 = coeffs.iter().zip(&values).map(|(c, p)| c * p).sum();
            let local_bound = deterministic
                .iter()
                .map(|d| d.values().iter().zip(&coeffs).map(|(p, c)| c * p).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            let coefficients: BTreeMap<String, f64> = ids
                .iter()
                .cloned()
                .zip(coeffs.iter().copied())
                .filter(|(_, c)| c.abs() > 1e-12)
                .collect();
            Some(InequalityCertificate { coefficients, local_bound, value })
        }
    };

    Ok(PipelineReport {
        parties: bscn.parties(),
        settings: bscn.settings().to_vec(),
        input_rays: s.len(),
        extended_rays: extended.len(),
        h_vertices: h.vertex_count(),
        h_hyperedges: h.hyperedge_count(),
        g_hyperedges: g.hyperedge_count(),
        bell_hyperedges: hprime.hyperedge_count(),
        extra_hyperedges: extra.len(),
        local_orthogonality_ok,
        saturation_ok,
        model_on_h,
        model_on_bell,
        behaviour: locality,
        chsh: chsh_value(&behaviour),
        violated_inequality,
    })
}

/// The singlet state `(|01> - |10>)/sqrt(2)`.
pub fn singlet() -> DensityOperator {
    let psi = Ray::from_reals(&[0.0, 1.0, -1.0, 0.0]).expect("unit vector");
    DensityOperator::pure(&psi)
}

/// Measurement angles maximising CHSH for the singlet: party A at 0 and
/// pi/2, party B at pi/4 and 3 pi/4, all in the zx-plane.
pub fn chsh_optimal_measurements() -> LocalMeasurementSet {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    LocalMeasurementSet::zx_plane(&[vec![0.0, FRAC_PI_2], vec![FRAC_PI_4, 3.0 * PI / 4.0]])
}

/// The sixteen product rays of the CHSH-optimal measurement settings.
pub fn chsh_optimal_rays() -> Vec<ProductRay> {
    let mset = chsh_optimal_measurements();
    let scenario = mset.scenario().expect("two parties");
    scenario
        .events()
        .iter()
        .map(|(a, x)| {
            let factors: Vec<Ray> = a
                .iter()
                .zip(x)
                .enumerate()
                .map(|(r, (&ar, &xr))| mset.outcome_ray(r, xr, ar).clone())
                .collect();
            ProductRay::from_qubits(factors).expect("qubit factors")
        })
        .collect()
}

/// Set equality between the KS-colourings of the Bell hypergraph and the
/// local deterministic behaviours, checked in both directions.
pub fn colourings_match_deterministic(b: &BellScenario) -> Result<bool, BellError> {
    let h = bell_hypergraph(b)?;
    let (colourings, truncated) = enumerate_ks_colourings(&h, 1 << 20);
    if truncated {
        return Err(BellError::TooLarge("colouring enumeration truncated".into()));
    }
    let deterministic = enumerate_local_deterministic(b)?;
    let from_behaviours: BTreeSet<Vec<u8>> = deterministic
        .iter()
        .map(|d| Ok(deterministic_as_colouring(d, &h)?.values().to_vec()))
        .collect::<Result<_, BellError>>()?;
    let from_solver: BTreeSet<Vec<u8>> = colourings.iter().map(|c| c.values().to_vec()).collect();
    Ok(from_behaviours == from_solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantum_behaviour_examples() {
        // |00> measured in computational bases on both sides.
        let mset = LocalMeasurementSet::zx_plane(&[vec![0.0], vec![0.0]]);
        let rho = DensityOperator::pure(&Ray::from_reals(&[1.0, 0.0, 0.0, 0.0]).unwrap());
        let b = quantum_behaviour(&rho, &mset).unwrap();
        assert!((b.probability(&[0, 0], &[0, 0]) - 1.0).abs() < 1e-12);

        // Maximally mixed: everything 1/4.
        let b = quantum_behaviour(
            &DensityOperator::maximally_mixed(4),
            &chsh_optimal_measurements(),
        )
        .unwrap();
        for (a, x) in b.scenario().events() {
            assert!((b.probability(&a, &x) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn singlet_chsh_matches_correlator_oracle() {
        let b = quantum_behaviour(&singlet(), &chsh_optimal_measurements()).unwrap();
        // Closed-form correlators -cos(thetaA - thetaB) as oracle.
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
        let angles_a = [0.0, FRAC_PI_2];
        let angles_b = [FRAC_PI_4, 3.0 * PI / 4.0];
        for (xa, ta) in angles_a.iter().enumerate() {
            for (xb, tb) in angles_b.iter().enumerate() {
                let mut e = 0.0;
                for a in b.scenario().global_outcomes() {
                    let sign = if (a[0] ^ a[1]) == 0 { 1.0 } else { -1.0 };
                    e += sign * b.probability(&a, &[xa, xb]);
                }
                assert!((e + (ta - tb).cos()).abs() < 1e-12, "correlator at ({xa},{xb}): {e}");
            }
        }
        let s = chsh_value(&b).unwrap();
        assert!((s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9, "chsh {s}");
    }

    #[test]
    fn deterministic_enumeration_counts() {
        let chsh = BellScenario::chsh();
        let d = enumerate_local_deterministic(&chsh).unwrap();
        assert_eq!(d.len(), 16);
        let three = BellScenario::new(vec![2, 2, 2]).unwrap();
        let d3 = enumerate_local_deterministic(&three).unwrap();
        assert_eq!(d3.len(), 64);
    }

    #[test]
    fn locality_examples() {
        let chsh = BellScenario::chsh();
        let d = enumerate_local_deterministic(&chsh).unwrap();
        assert_eq!(is_local(&d[5]).unwrap(), Locality::Local);

        let uniform = Behaviour::new(chsh, vec![vec![0.25; 4]; 4]).unwrap();
        assert_eq!(is_local(&uniform).unwrap(), Locality::Local);

        let singlet_b = quantum_behaviour(&singlet(), &chsh_optimal_measurements()).unwrap();
        assert_eq!(is_local(&singlet_b).unwrap(), Locality::Nonlocal);
    }

    #[test]
    fn bell_hypergraph_chsh_shape() {
        let h = bell_hypergraph(&BellScenario::chsh()).unwrap();
        assert_eq!(h.vertex_count(), 16);
        // Four global hyperedges plus eight adaptive ones.
        assert_eq!(h.hyperedge_count(), 12);

        // The canonical adaptive example: the first party measures setting
        // 0 and the second party's setting follows the first outcome.
        let example = ["00|00", "01|00", "10|01", "11|01"];
        let mut edge: Vec<usize> = example.iter().map(|id| h.vertex_index(id).unwrap()).collect();
        edge.sort_unstable();
        assert!(h.hyperedges().contains(&edge), "adaptive hyperedge present");

        // Every global hyperedge is present.
        for x in BellScenario::chsh().global_settings() {
            let mut edge: Vec<usize> = BellScenario::chsh()
                .global_outcomes()
                .iter()
                .map(|a| h.vertex_index(&BellScenario::event_id(a, &x)).unwrap())
                .collect();
            edge.sort_unstable();
            assert!(h.hyperedges().contains(&edge), "global hyperedge {x:?}");
        }
    }

    #[test]
    fn behaviours_as_models_examples() {
        let chsh = BellScenario::chsh();
        let h = bell_hypergraph(&chsh).unwrap();
        let d = enumerate_local_deterministic(&chsh).unwrap();
        // Deterministic behaviours become colourings.
        for behaviour in &d {
            let c = deterministic_as_colouring(behaviour, &h).unwrap();
            c.validate(&h).unwrap();
        }
        // The uniform behaviour becomes the uniform model.
        let uniform = Behaviour::new(chsh, vec![vec![0.25; 4]; 4]).unwrap();
        let model = behaviour_as_model(&uniform, &h).unwrap();
        assert!(model.values().iter().all(|&v| (v - 0.25).abs() < 1e-12));
        // A local mixture is a classical model on the hypergraph.
        let local = {
            let mut p = vec![vec![0.0; 4]; 4];
            for row in p.iter_mut() {
                row[0] = 0.5;
                row[3] = 0.5;
            }
            Behaviour::new(BellScenario::chsh(), p).unwrap()
        };
        let model = behaviour_as_model(&local, &h).unwrap();
        assert_eq!(
            crate::scenario::is_classical_model(&h, &model, 1 << 20).unwrap(),
            Classicality::Classical
        );
    }

    #[test]
    fn colourings_biject_with_deterministic_behaviours() {
        assert!(colourings_match_deterministic(&BellScenario::chsh()).unwrap());
    }

    #[test]
    fn extend_rays_worked_example() {
        // {|00>, |+1>, |0+>} extends to 16 rays over two settings per party.
        let s = vec![
            ProductRay::from_qubits(vec![Ray::ket0(), Ray::ket0()]).unwrap(),
            ProductRay::from_qubits(vec![Ray::plus(), Ray::ket1()]).unwrap(),
            ProductRay::from_qubits(vec![Ray::ket0(), Ray::plus()]).unwrap(),
        ];
        let (mset, scenario, extended) = extend_rays_to_bell(&s).unwrap();
        assert_eq!(mset.setting_counts(), vec![2, 2]);
        assert_eq!(scenario.settings(), &[2, 2]);
        assert_eq!(extended.len(), 16);
        // All sixteen products of {0,1,+,-} x {0,1,+,-} are present.
        let local = [Ray::ket0(), Ray::ket1(), Ray::plus(), Ray::minus()];
        for a in &local {
            for b in &local {
                let want = ProductRay::from_qubits(vec![a.clone(), b.clone()]).unwrap();
                assert!(
                    extended.iter().any(|x| x.approx_eq(&want, 1e-9)),
                    "missing extended ray"
                );
            }
        }
    }

    #[test]
    fn extend_rays_degenerate_cases() {
        // A single ray extends to one product basis.
        let s = vec![ProductRay::from_qubits(vec![Ray::plus(), Ray::ket0()]).unwrap()];
        let (_, scenario, extended) = extend_rays_to_bell(&s).unwrap();
        assert_eq!(scenario.settings(), &[1, 1]);
        assert_eq!(extended.len(), 4);

        // Orthogonal second-party rays fold into a single setting.
        let s = vec![
            ProductRay::from_qubits(vec![Ray::qubit(0.7, 0.2), Ray::ket0()]).unwrap(),
            ProductRay::from_qubits(vec![Ray::qubit(0.7, 0.2), Ray::ket1()]).unwrap(),
        ];
        let (mset, _, _) = extend_rays_to_bell(&s).unwrap();
        assert_eq!(mset.setting_counts(), vec![1, 1]);
    }

    #[test]
    fn pipeline_on_chsh_demo() {
        let report = correspondence_pipeline(&chsh_optimal_rays(), &singlet(), 1 << 20).unwrap();
        assert_eq!(report.parties, 2);
        assert_eq!(report.extended_rays, 16);
        assert!(report.local_orthogonality_ok);
        assert!(report.saturation_ok);
        assert_eq!(report.model_on_h, Classicality::NonClassical);
        assert_eq!(report.model_on_bell, Classicality::NonClassical);
        assert_eq!(report.behaviour, Locality::Nonlocal);
        let chsh = report.chsh.unwrap();
        assert!((chsh - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
        let cert = report.violated_inequality.expect("certificate for nonlocal behaviour");
        assert!(
            cert.value > cert.local_bound + 1e-7,
            "certificate must separate: {} vs {}",
            cert.value,
            cert.local_bound
        );
    }

    #[test]
    fn pipeline_on_separable_state_is_classical() {
        let report =
            correspondence_pipeline(&chsh_optimal_rays(), &DensityOperator::maximally_mixed(4), 1 << 20)
                .unwrap();
        assert_eq!(report.model_on_h, Classicality::Classical);
        assert_eq!(report.model_on_bell, Classicality::Classical);
        assert_eq!(report.behaviour, Locality::Local);
        assert!(report.violated_inequality.is_none());
    }

    #[test]
    fn two_qubit_instances_have_no_extra_hyperedges() {
        // Every two-qubit product basis has the adaptive form, so the
        // all-bases scenario over the extended rays adds nothing beyond
        // the Bell hypergraph.
        let report = correspondence_pipeline(&chsh_optimal_rays(), &singlet(), 1 << 20).unwrap();
        assert_eq!(report.extra_hyperedges, 0);
        assert_eq!(report.g_hyperedges, report.bell_hyperedges);
    }

    #[test]
    fn affine_combinations_saturate_extra_hyperedges() {
        // Extra hyperedges appear from three qubits on, where nonlocal
        // product bases exist. Signed affine combinations of deterministic
        // behaviours (weights summing to one) still sum to one on them.
        let s = crate::catalog::nonlocal_product_basis().members().to_vec();
        let (_, bscn, extended) = extend_rays_to_bell(&s).unwrap();
        let ids: Vec<String> =
            bscn.events().iter().map(|(a, x)| BellScenario::event_id(a, x)).collect();
        let flat: Vec<Ray> = extended.iter().map(ProductRay::flatten).collect();
        let (g, _) = scenario_from_named_rays(&ids, &flat, BasisMode::AllBases).unwrap();
        let hprime = bell_hypergraph(&bscn).unwrap();
        let bell_edges: BTreeSet<&Vec<usize>> = hprime.hyperedges().iter().collect();
        let extra: Vec<&Vec<usize>> =
            g.hyperedges().iter().filter(|e| !bell_edges.contains(e)).collect();
        assert!(!extra.is_empty(), "the nonlocal basis must appear as an extra hyperedge");

        let deterministic = enumerate_local_deterministic(&bscn).unwrap();
        let event_count = g.vertex_count();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let mut w: Vec<f64> =
                (0..deterministic.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            // Shift so the weights sum to one (affine, possibly signed).
            let shift = (1.0 - total) / w.len() as f64;
            w.iter_mut().for_each(|x| *x += shift);
            let combo: Vec<f64> = (0..event_count)
                .map(|v| deterministic.iter().zip(&w).map(|(d, w)| w * d.values()[v]).sum())
                .collect();
            for edge in &extra {
                let sum: f64 = edge.iter().map(|&v| combo[v]).sum();
                assert!((sum - 1.0).abs() < 1e-9, "affine saturation failed: {sum}");
            }
        }
    }

    #[test]
    fn behaviour_json_round_trip() {
        let b = quantum_behaviour(&singlet(), &chsh_optimal_measurements()).unwrap();
        let v = b.to_json();
        let back = Behaviour::from_json(&v).unwrap();
        for (a, x) in b.scenario().events() {
            assert!((b.probability(&a, &x) - back.probability(&a, &x)).abs() < 1e-12);
        }
    }

    #[test]
    fn signalling_behaviour_is_rejected() {
        // Party A's outcome flips with party B's setting choice.
        let mut p = vec![vec![0.25; 4]; 4];
        p[0] = vec![1.0, 0.0, 0.0, 0.0]; // x = 00: A always 0
        p[1] = vec![0.0, 0.0, 0.0, 1.0]; // x = 01: A always 1
        let err = Behaviour::new(BellScenario::chsh(), p);
        assert!(matches!(err, Err(BellError::Signalling { .. })));
    }

    #[test]
    fn hypergraph_guards() {
        let big = BellScenario::new(vec![2, 2, 2, 2]).unwrap();
        assert!(matches!(bell_hypergraph(&big), Err(BellError::TooLarge(_))));
        let wide = BellScenario::new(vec![4, 2]).unwrap();
        assert!(matches!(bell_hypergraph(&wide), Err(BellError::TooLarge(_))));
    }
}
