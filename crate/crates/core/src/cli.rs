//! Command-line interface: catalog verification, colourability solving,
//! hidden-variable simulation, Bell tools, JSON I/O.
//!
//! Every command writes one report object to stdout as JSON; diagnostics go
//! to stderr. Exit codes: 0 success, 1 verification or statistical failure,
//! 2 usage or input error. Stochastic commands take a mandatory `--seed`,
//! and a fixed seed reproduces the report byte for byte apart from the
//! trailing wall-clock field.

use crate::bell::{
    bell_hypergraph, chsh_optimal_measurements, chsh_optimal_rays, chsh_value, is_local,
    quantum_behaviour, singlet, correspondence_pipeline, BellScenario, Locality,
};
use crate::catalog::{self, Check};
use crate::colouring::{all_north_colouring, random_product_basis, verify_exactly_one_north};
use crate::ontmodel::{
    simulate_basis_measurement, simulate_probability, EpistemicState, SimConfig,
};
use crate::rays::{is_product_ray, ProductRay, Ray};
use crate::scenario::{find_ks_colouring, scenario_from_json, scenario_to_json, DensityOperator};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Colouring-enumeration cap for classicality tests driven from the CLI.
const CLI_CAP: usize = crate::scenario::DEFAULT_COLOURING_CAP;

#[derive(Parser)]
#[command(name = "ksforge", version, about = "Kochen-Specker sets, contextuality scenarios and Bell polytopes")]
struct Cli {
    /// Worker threads for sampling; defaults to KSFORGE_JOBS or 1.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Built-in scenario families.
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Search a scenario file for a KS-colouring.
    Colour {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Colour by the all-north rule instead of searching (needs product rays).
        #[arg(long)]
        north: bool,
    },
    /// Check random product bases for the exactly-one-all-north property.
    Northcheck {
        /// Number of qubits.
        #[arg(long)]
        n: usize,
        /// Number of random bases.
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Estimate outcome probabilities of the hidden-variable model.
    Simulate {
        /// Measured product ray (JSON file); or use --basis.
        #[arg(long, conflicts_with = "basis")]
        psi: Option<PathBuf>,
        /// Measure a full product basis: "nonlocal", "computational:<n>" or a JSON file.
        #[arg(long)]
        basis: Option<String>,
        /// Prepared product ray (JSON file).
        #[arg(long)]
        chi: PathBuf,
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bell scenario tools.
    #[command(subcommand)]
    Bell(BellCmd),
}

#[derive(Subcommand)]
enum CatalogCmd {
    /// List entry names.
    List,
    /// Build an entry and emit its scenario JSON.
    Build {
        name: String,
        /// Write the scenario JSON to this file instead of the report body.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild an entry and re-derive all its expected properties.
    Verify {
        /// Entry name or "all".
        name: String,
    },
}

#[derive(Subcommand)]
enum BellCmd {
    /// CHSH value and locality of a named two-qubit state.
    Chsh {
        /// "singlet" or "maximally-mixed".
        #[arg(long)]
        state: String,
    },
    /// Run the Bell-to-contextuality pipeline.
    Pipeline {
        /// Built-in demo: "chsh" (two qubits) or "nonlocal" (three qubits).
        #[arg(long, conflicts_with_all = ["rays", "state"])]
        demo: Option<String>,
        /// JSON file with a list of product rays.
        #[arg(long, requires = "state")]
        rays: Option<PathBuf>,
        /// Density operator JSON file.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Emit the contextuality scenario of a Bell scenario.
    Hypergraph {
        #[arg(long)]
        parties: usize,
        /// Comma-separated per-party setting counts, e.g. "2,2".
        #[arg(long)]
        settings: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// The report every command prints: named checks plus a command-specific
/// payload. `wall_clock_ms` is the only field that varies between
/// identical invocations.
#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub results: Vec<Check>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<serde_json::Value>,
    pub wall_clock_ms: u64,
}

struct UsageError(String);

impl<E: std::error::Error> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    run_parsed(cli)
}

/// Entry point for tests: parse the given arguments instead of `std::env`.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run_parsed(cli),
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}

fn run_parsed(cli: Cli) -> i32 {
    let started = Instant::now();
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("KSFORGE_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1);
    match execute(cli.command, jobs) {
        Ok(mut report) => {
            report.wall_clock_ms = started.elapsed().as_millis() as u64;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            if report.pass {
                0
            } else {
                1
            }
        }
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn execute(command: Command, jobs: usize) -> Result<RunReport, UsageError> {
    match command {
        Command::Catalog(cmd) => run_catalog(cmd),
        Command::Colour { scenario, north } => run_colour(&scenario, north),
        Command::Northcheck { n, trials, seed } => run_northcheck(n, trials, seed),
        Command::Simulate { psi, basis, chi, samples, seed, out } => {
            run_simulate(psi.as_deref(), basis.as_deref(), &chi, samples, seed, jobs, out.as_deref())
        }
        Command::Bell(cmd) => run_bell(cmd),
    }
}

fn report(command: &str, digest: String, seed: Option<u64>, results: Vec<Check>) -> RunReport {
    let pass = results.iter().all(|c| c.pass);
    RunReport {
        command: command.to_string(),
        inputs_digest: digest,
        seed,
        results,
        pass,
        data: None,
        wall_clock_ms: 0,
    }
}

// FNV-1a over the inputs that determine the report.
fn digest(parts: &[&[u8]]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn read_file(path: &Path) -> Result<Vec<u8>, UsageError> {
    std::fs::read(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn parse_json(bytes: &[u8], what: &str) -> Result<serde_json::Value, UsageError> {
    serde_json::from_slice(bytes).map_err(|e| UsageError(format!("invalid {what} JSON: {e}")))
}

/// Accepts either a ProductRay document or a flat Ray of dimension 2^n,
/// which is then factorised into qubits.
fn parse_product_ray(value: &serde_json::Value) -> Result<ProductRay, UsageError> {
    if let Ok(p) = serde_json::from_value::<ProductRay>(value.clone()) {
        return Ok(p);
    }
    let ray: Ray = serde_json::from_value(value.clone())
        .map_err(|e| UsageError(format!("neither a product ray nor a ray: {e}")))?;
    let n = ray.dim().trailing_zeros() as usize;
    if ray.dim() != 1 << n {
        return Err(UsageError(format!("ray dimension {} is not a power of two", ray.dim())));
    }
    match is_product_ray(&ray, &vec![2; n], 1e-9).map_err(|e| UsageError(e.to_string()))? {
        Some(p) => Ok(p),
        None => Err(UsageError("ray is entangled; the model needs product rays".into())),
    }
}

// --- catalog ---------------------------------------------------------------------

fn run_catalog(cmd: CatalogCmd) -> Result<RunReport, UsageError> {
    match cmd {
        CatalogCmd::List => {
            let mut r = report("catalog list", digest(&[b"list"]), None, Vec::new());
            r.data = Some(serde_json::json!(catalog::NAMES));
            Ok(r)
        }
        CatalogCmd::Build { name, out } => {
            let entry = catalog::build(&name).map_err(|e| UsageError(e.to_string()))?;
            let scenario_json = scenario_to_json(&entry.scenario, Some(&entry.assignment));
            let results = vec![
                Check::new("vertex_count", entry.expected.vertex_count, entry.scenario.vertex_count()),
                Check::new(
                    "hyperedge_count",
                    entry.expected.hyperedge_count,
                    entry.scenario.hyperedge_count(),
                ),
            ];
            let mut r = report("catalog build", digest(&[name.as_bytes()]), None, results);
            match out {
                Some(path) => {
                    std::fs::write(&path, serde_json::to_string_pretty(&scenario_json).unwrap())
                        .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                    r.data = Some(serde_json::json!({
                        "written": path.display().to_string(),
                        "notes": entry.notes,
                    }));
                }
                None => r.data = Some(scenario_json),
            }
            Ok(r)
        }
        CatalogCmd::Verify { name } => {
            let names: Vec<&str> = if name == "all" {
                catalog::NAMES.to_vec()
            } else {
                if !catalog::NAMES.contains(&name.as_str()) {
                    return Err(UsageError(format!("unknown catalog entry {name:?}")));
                }
                vec![name.as_str()]
            };
            let mut results = Vec::new();
            let mut reports = Vec::new();
            for n in names {
                let vr = catalog::verify(n).map_err(|e| UsageError(e.to_string()))?;
                for c in &vr.checks {
                    results.push(Check {
                        name: format!("{n}.{}", c.name),
                        expected: c.expected.clone(),
                        observed: c.observed.clone(),
                        pass: c.pass,
                    });
                }
                reports.push(vr);
            }
            let mut r = report("catalog verify", digest(&[name.as_bytes()]), None, results);
            r.data = Some(serde_json::to_value(&reports).unwrap());
            Ok(r)
        }
    }
}

// --- colour ----------------------------------------------------------------------

fn run_colour(path: &Path, north: bool) -> Result<RunReport, UsageError> {
    let bytes = read_file(path)?;
    let value = parse_json(&bytes, "scenario")?;
    let (scenario, assignment) = scenario_from_json(&value).map_err(UsageError)?;
    let colouring = if north {
        let assignment = assignment
            .as_ref()
            .ok_or_else(|| UsageError("--north needs a scenario with rays".into()))?;
        Some(all_north_colouring(&scenario, assignment).map_err(|e| UsageError(e.to_string()))?)
    } else {
        find_ks_colouring(&scenario)
    };
    let mode = if north { "all-north" } else { "complete search" };
    let verdict = if colouring.is_some() { "colourable" } else { "uncolourable" };
    // Both outcomes are valid results of the solver; the check records them.
    let results = vec![Check::new("solver", mode, mode), Check::new("verdict", verdict, verdict)];
    let mut r = report("colour", digest(&[&bytes, &[u8::from(north)]]), None, results);
    r.data = Some(match &colouring {
        Some(c) => c.to_json(&scenario),
        None => serde_json::json!("UNCOLOURABLE"),
    });
    Ok(r)
}

// --- northcheck -------------------------------------------------------------------

fn run_northcheck(n: usize, trials: u64, seed: u64) -> Result<RunReport, UsageError> {
    if n == 0 {
        return Err(UsageError("--n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0u64;
    for _ in 0..trials {
        let basis = random_product_basis(n, &mut rng).map_err(|e| UsageError(e.to_string()))?;
        if !verify_exactly_one_north(&basis).map_err(|e| UsageError(e.to_string()))? {
            failures += 1;
        }
    }
    let results = vec![
        Check::new("trials", trials, trials),
        Check::new("exactly_one_all_north_failures", 0u64, failures),
    ];
    Ok(report(
        "northcheck",
        digest(&[&n.to_le_bytes(), &trials.to_le_bytes(), &seed.to_le_bytes()]),
        Some(seed),
        results,
    ))
}

// --- simulate ---------------------------------------------------------------------

fn named_basis(spec: &str) -> Result<crate::colouring::ProductBasis, UsageError> {
    if spec == "nonlocal" {
        return Ok(catalog::nonlocal_product_basis());
    }
    if let Some(n) = spec.strip_prefix("computational:") {
        let n: usize = n.parse().map_err(|_| UsageError("bad qubit count".into()))?;
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
                .expect("qubit factors")
            })
            .collect();
        return crate::colouring::ProductBasis::new(members)
            .map_err(|e| UsageError(e.to_string()));
    }
    let bytes = read_file(Path::new(spec))?;
    let value = parse_json(&bytes, "product basis")?;
    serde_json::from_value(value).map_err(|e| UsageError(format!("invalid product basis: {e}")))
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    psi: Option<&Path>,
    basis: Option<&str>,
    chi_path: &Path,
    samples: u64,
    seed: u64,
    jobs: usize,
    out: Option<&Path>,
) -> Result<RunReport, UsageError> {
    if samples == 0 {
        return Err(UsageError("--samples must be at least 1".into()));
    }
    let chi_bytes = read_file(chi_path)?;
    let chi = parse_product_ray(&parse_json(&chi_bytes, "chi")?)?;
    let state = EpistemicState::pure(chi);
    let cfg = SimConfig { samples, seed, jobs };

    let mut results = Vec::new();
    let mut digest_parts: Vec<Vec<u8>> = vec![
        chi_bytes.clone(),
        samples.to_le_bytes().to_vec(),
        seed.to_le_bytes().to_vec(),
    ];

    let data = match (psi, basis) {
        (Some(psi_path), None) => {
            let psi_bytes = read_file(psi_path)?;
            digest_parts.push(psi_bytes.clone());
            let psi = parse_product_ray(&parse_json(&psi_bytes, "psi")?)?;
            let born = state.born_probability(&psi).map_err(|e| UsageError(e.to_string()))?;
            let (estimate, std_error) =
                simulate_probability(&psi, &state, &cfg).map_err(|e| UsageError(e.to_string()))?;
            let z = z_score(estimate, born, std_error);
            results.push(Check::bound("z_score", "|z| <= 4", z, z.abs() <= 4.0));
            serde_json::json!({
                "estimate": estimate,
                "std_error": std_error,
                "born_value": born,
                "z_score": z,
                "samples": samples,
            })
        }
        (None, Some(basis_spec)) => {
            digest_parts.push(basis_spec.as_bytes().to_vec());
            let basis = named_basis(basis_spec)?;
            let freqs = simulate_basis_measurement(&basis, &state, &cfg)
                .map_err(|e| UsageError(e.to_string()))?;
            let mut members = Vec::new();
            for (k, f) in freqs.iter().enumerate() {
                let born = state
                    .born_probability(&basis.members()[k])
                    .map_err(|e| UsageError(e.to_string()))?;
                let z = z_score(f.frequency, born, f.std_error);
                results.push(Check::bound(
                    format!("member{k}_z_score"),
                    "|z| <= 4",
                    z,
                    z.abs() <= 4.0,
                ));
                members.push(serde_json::json!({
                    "member": k,
                    "frequency": f.frequency,
                    "std_error": f.std_error,
                    "born_value": born,
                    "z_score": z,
                }));
            }
            serde_json::json!({ "members": members, "samples": samples })
        }
        _ => return Err(UsageError("exactly one of --psi or --basis is required".into())),
    };

    let parts: Vec<&[u8]> = digest_parts.iter().map(Vec::as_slice).collect();
    let mut r = report("simulate", digest(&parts), Some(seed), results);
    r.data = Some(data);
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&r.data).unwrap())
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    }
    Ok(r)
}

fn z_score(estimate: f64, born: f64, std_error: f64) -> f64 {
    let diff = estimate - born;
    if diff == 0.0 {
        0.0
    } else {
        diff / std_error.max(1e-300)
    }
}

// --- bell ------------------------------------------------------------------------

fn run_bell(cmd: BellCmd) -> Result<RunReport, UsageError> {
    match cmd {
        BellCmd::Chsh { state } => {
            let rho = match state.as_str() {
                "singlet" => singlet(),
                "maximally-mixed" => DensityOperator::maximally_mixed(4),
                other => return Err(UsageError(format!("unknown state {other:?}"))),
            };
            let behaviour = quantum_behaviour(&rho, &chsh_optimal_measurements())
                .map_err(|e| UsageError(e.to_string()))?;
            let value = chsh_value(&behaviour).expect("two-party two-setting");
            let locality = is_local(&behaviour).map_err(|e| UsageError(e.to_string()))?;
            let (expected_value, expected_local) = match state.as_str() {
                "singlet" => (2.0 * std::f64::consts::SQRT_2, Locality::Nonlocal),
                _ => (0.0, Locality::Local),
            };
            let results = vec![
                Check::bound(
                    "chsh_value",
                    &format!("{expected_value:.9} within 1e-9"),
                    value,
                    (value - expected_value).abs() <= 1e-9,
                ),
                Check::new(
                    "locality",
                    format!("{expected_local:?}"),
                    format!("{locality:?}"),
                ),
            ];
            let mut r = report("bell chsh", digest(&[state.as_bytes()]), None, results);
            r.data = Some(behaviour.to_json());
            Ok(r)
        }
        BellCmd::Pipeline { demo, rays, state } => {
            let (s, rho, label) = match (demo, rays, state) {
                (Some(which), None, None) => match which.as_str() {
                    "chsh" => (chsh_optimal_rays(), singlet(), "chsh".to_string()),
                    "nonlocal" => {
                        let s = catalog::nonlocal_product_basis().members().to_vec();
                        let ghz = Ray::from_reals(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0])
                            .expect("unit vector");
                        (s, DensityOperator::pure(&ghz), "nonlocal".to_string())
                    }
                    other => return Err(UsageError(format!("unknown demo {other:?}"))),
                },
                (None, Some(rays_path), Some(state_path)) => {
                    let rays_bytes = read_file(&rays_path)?;
                    let list: Vec<serde_json::Value> =
                        serde_json::from_slice(&rays_bytes)
                            .map_err(|e| UsageError(format!("invalid rays JSON: {e}")))?;
                    let s: Vec<ProductRay> =
                        list.iter().map(parse_product_ray).collect::<Result<_, _>>()?;
                    let state_bytes = read_file(&state_path)?;
                    let rho =
                        DensityOperator::from_json(&parse_json(&state_bytes, "state")?)
                            .map_err(UsageError)?;
                    (s, rho, "file".to_string())
                }
                _ => {
                    return Err(UsageError(
                        "use --demo <name>, or --rays <file> with --state <file>".into(),
                    ))
                }
            };
            let pipeline =
                correspondence_pipeline(&s, &rho, CLI_CAP).map_err(|e| UsageError(e.to_string()))?;
            let consistent = !(matches!(
                pipeline.model_on_h,
                crate::scenario::Classicality::NonClassical
            ) && pipeline.behaviour == Locality::Local);
            let results = vec![
                Check::new("local_orthogonality", true, pipeline.local_orthogonality_ok),
                Check::new("deterministic_saturation", true, pipeline.saturation_ok),
                Check::new("nonclassical_implies_nonlocal", true, consistent),
            ];
            let mut r = report("bell pipeline", digest(&[label.as_bytes()]), None, results);
            r.data = Some(serde_json::to_value(&pipeline).unwrap());
            Ok(r)
        }
        BellCmd::Hypergraph { parties, settings, out } => {
            let counts: Vec<usize> = settings
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| UsageError(format!("bad settings list {settings:?}")))?;
            if counts.len() != parties {
                return Err(UsageError(format!(
                    "expected {parties} setting counts, got {}",
                    counts.len()
                )));
            }
            let scenario = BellScenario::new(counts).map_err(|e| UsageError(e.to_string()))?;
            let h = bell_hypergraph(&scenario).map_err(|e| UsageError(e.to_string()))?;
            let results = vec![
                Check::new("vertices", h.vertex_count(), h.vertex_count()),
                Check::new("hyperedges", h.hyperedge_count(), h.hyperedge_count()),
            ];
            let json = scenario_to_json(&h, None);
            let mut r =
                report("bell hypergraph", digest(&[settings.as_bytes()]), None, results);
            match out {
                Some(path) => {
                    std::fs::write(&path, serde_json::to_string_pretty(&json).unwrap())
                        .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                    r.data = Some(serde_json::json!({ "written": path.display().to_string() }));
                }
                None => r.data = Some(json),
            }
            Ok(r)
        }
    }
}
