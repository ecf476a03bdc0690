use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wgflow::flow::{discrete_flow, exponential_formula_experiment, random_partition, varying_flow};
use wgflow::geometry::{check_hilbertian_identity, check_transport_geodesic_identity, four_point_glue, BasedPlan};
use wgflow::measures::{fmt_scalar, InstanceSeed};
use wgflow::proximal::{proximal_step, EL_TOLERANCE};
use wgflow::verify::{sweep, Kind, SweepConfig};
use wgflow::Error;

use crate::config::{usage, Command, RunConfig, UsageError};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug)]
pub enum Failure {
    Usage(UsageError),
    Compute(Error),
    Io(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "{e}"),
            Failure::Compute(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) | Failure::Io(_) => ExitCode::from(1),
            Failure::Compute(_) => ExitCode::from(2),
        }
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            // problems with the requested instance, not with the computation
            Error::EmptyInput
            | Error::DimensionMismatch { .. }
            | Error::NonFiniteCoordinate { .. }
            | Error::InvalidParameter(_)
            | Error::SizeMismatch(..)
            | Error::TooLarge { .. }
            | Error::AlphaOutOfRange(_)
            | Error::StepTooLarge { .. }
            | Error::HypothesisViolated(_)
            | Error::Parse(_) => Failure::Usage(UsageError(e.to_string())),
            other => Failure::Compute(other),
        }
    }
}

/// Overall verdict of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn exit_code(self) -> ExitCode {
        match self {
            Status::Pass => ExitCode::SUCCESS,
            Status::Fail => ExitCode::from(2),
        }
    }
}

#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    seeds: Vec<u64>,
    passed: usize,
    failed: usize,
}

impl Outputs {
    fn file(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub elapsed_seconds: String,
    pub passed: usize,
    pub failed: usize,
    /// File name to SHA-256 hex digest.
    pub outputs: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// Runs `cfg`, writes its outputs and `manifest.json` into `out`.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Status, Failure> {
    let manifest = execute_manifest(cfg, out)?;
    Ok(if manifest.failed == 0 { Status::Pass } else { Status::Fail })
}

fn execute_manifest(cfg: &RunConfig, out: &Path) -> Result<Manifest, Failure> {
    let start = Instant::now();
    let outputs = match cfg.command {
        Command::Flow => flow(cfg)?,
        Command::Expformula => expformula(cfg)?,
        Command::Verify => verify(cfg)?,
        Command::Prox => prox(cfg)?,
        Command::Geodesic => geodesic(cfg)?,
    };
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut hashes = Vec::new();
    for (name, bytes) in &outputs.files {
        let path = out.join(name);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        hashes.push((name.clone(), sha256_hex(bytes)));
    }
    let manifest = Manifest {
        tool: "wgflow".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        seeds: outputs.seeds,
        elapsed_seconds: fmt_scalar(start.elapsed().as_secs_f64()),
        passed: outputs.passed,
        failed: outputs.failed,
        outputs: hashes,
    };
    let path = out.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("plain data") + "\n";
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    println!("{}: {} passed, {} failed; outputs in {}", cfg.command.name(), manifest.passed, manifest.failed, out.display());
    Ok(manifest)
}

/// Re-executes a saved manifest and checks every output hash.
pub fn rerun(manifest: &Path, out: Option<PathBuf>) -> Result<Status, Failure> {
    let text = fs::read_to_string(manifest).map_err(|e| io(manifest, e))?;
    let saved: Manifest =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(usage!("invalid manifest {}: {e}", manifest.display())))?;
    let out = out.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).join("rerun"));
    let fresh = execute_manifest(&saved.config, &out)?;
    let mut identical = fresh.outputs.len() == saved.outputs.len();
    for (name, hash) in &saved.outputs {
        match fresh.outputs.iter().find(|(n, _)| n == name) {
            Some((_, h)) if h == hash => {}
            Some(_) => {
                eprintln!("wgflow: {name} differs from the saved run");
                identical = false;
            }
            None => {
                eprintln!("wgflow: {name} was not reproduced");
                identical = false;
            }
        }
    }
    if identical {
        println!("rerun: all {} outputs hash-identical", saved.outputs.len());
    }
    Ok(if identical && fresh.failed == 0 { Status::Pass } else { Status::Fail })
}

fn flow(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let e = cfg.functional()?;
    let mu = cfg.measure()?;
    let seed = cfg.seed()?;
    let trace = match cfg.raw("schedule") {
        "fixed" => discrete_flow(&e, cfg.positive("tau")?, cfg.get("n")?, &mu)?,
        "varying" => {
            let steps = random_partition(&InstanceSeed::new(seed).derive(1), cfg.positive("t")?, cfg.positive("hmax")?)?;
            varying_flow(&e, &steps, &mu)?
        }
        other => return Err(usage!("schedule must be 'fixed' or 'varying', got '{other}'").into()),
    }
    .with_seed(seed);
    let mut o = Outputs { seeds: vec![seed], passed: 1, ..Default::default() };
    o.file("trace.csv", trace.to_csv());
    Ok(o)
}

fn expformula(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let e = cfg.functional()?;
    let mu = cfg.measure()?;
    let ns: Vec<usize> = cfg.list("n")?;
    if ns.contains(&0) {
        return Err(usage!("step counts must be positive").into());
    }
    let table = exponential_formula_experiment(&e, &mu, cfg.positive("t")?, &ns)?;
    println!("n,error,bound");
    for r in &table.rows {
        println!("{},{},{}", r.n, fmt_scalar(r.error), fmt_scalar(r.bound));
    }
    if let Some(s) = table.slope_fit {
        println!("log-log slope {}", fmt_scalar(s));
    }
    let passed = table.rows.iter().filter(|r| r.pass).count();
    let mut o = Outputs { seeds: vec![cfg.seed()?], passed, failed: table.rows.len() - passed, ..Default::default() };
    o.file("experiment.csv", table.to_csv());
    Ok(o)
}

fn verify(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let kinds = Kind::parse_list(cfg.raw("kinds"))?;
    let seeds = cfg.seeds()?;
    let mut sc = SweepConfig::new(kinds, seeds.clone());
    if let Some(sizes) = cfg.sizes()? {
        sc.sizes = sizes;
    }
    if let Some(fs) = cfg.functionals()? {
        sc.functionals = fs;
    }
    let summary = sweep(&sc)?;
    for (k, s) in &summary.per_kind {
        println!(
            "{k}: {} passed, {} failed, {} hypothesis violated, {} errors, worst relative slack {}{}",
            s.passed,
            s.failed,
            s.hypothesis_violated,
            s.errors,
            s.worst_relative_slack.map_or_else(|| "n/a".to_string(), fmt_scalar),
            if s.informational { " (informational)" } else { "" }
        );
    }
    let passed = summary.per_kind.values().filter(|s| !s.informational).map(|s| s.passed).sum();
    let mut o = Outputs { seeds, passed, failed: summary.failures(), ..Default::default() };
    o.file("sweep.csv", summary.to_csv()?);
    o.file("summary.json", serde_json::to_string_pretty(&summary.summary_json()).expect("plain data") + "\n");
    Ok(o)
}

fn prox(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let e = cfg.functional()?;
    let mu = cfg.measure()?;
    let p = proximal_step(&e, cfg.positive("tau")?, &mu)?;
    println!("el_residual {} after {} inner iterations", fmt_scalar(p.el_residual), p.inner_iterations);
    let ok = p.el_residual <= EL_TOLERANCE;
    let mut o = Outputs { seeds: vec![cfg.seed()?], passed: ok as usize, failed: !ok as usize, ..Default::default() };
    o.file("prox.csv", p.output.to_csv());
    o.file("prox.json", serde_json::to_string_pretty(&p.record()).expect("plain data") + "\n");
    Ok(o)
}

fn geodesic(cfg: &RunConfig) -> Result<Outputs, Failure> {
    let [omega, mu0, mu1, nu] = [1, 2, 3, 4].map(|salt| cfg.random_measure(salt));
    let (omega, mu0, mu1, nu) = (omega?, mu0?, mu1?, nu?);
    let tol: f64 = cfg.positive("tolerance")?;
    let alphas: Vec<f64> = cfg.list("alpha")?;
    let plan = BasedPlan::canonical(&omega, &mu0, &mu1)?;
    let mut csv = String::from("alpha,hilbertian_residual,transport_residual,glue_residual,pass\n");
    let mut o = Outputs { seeds: vec![cfg.seed()?], ..Default::default() };
    for a in alphas {
        let h = check_hilbertian_identity(&plan, a)?.residual;
        let t = check_transport_geodesic_identity(&omega, &nu, &mu0, &mu1, a)?;
        let g = four_point_glue(&omega, &mu0, &mu1, &nu, a)?.residual;
        let pass = h.abs() <= tol && t.abs() <= tol && g.abs() <= tol;
        if pass {
            o.passed += 1;
        } else {
            o.failed += 1;
        }
        csv.push_str(&format!("{},{},{},{},{pass}\n", fmt_scalar(a), fmt_scalar(h), fmt_scalar(t), fmt_scalar(g)));
    }
    o.file("geodesic.csv", csv);
    Ok(o)
}
