//! Inequality harness: one checker per inequality or identity, each returning
//! an auditable [`InequalityReport`], plus a seeded sweep over all of them.
//!
//! Checkers recompute both sides from primitive operations (energies, slopes,
//! optimal-assignment distances) instead of reading values cached in traces.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    discrete_flow, evi_along_flow, exponential_formula_bound, random_partition, reference_flow, varying_flow,
    varying_formula_bound, DEFAULT_DT,
};
use crate::functionals::Functional;
use crate::geometry::{generalized_geodesic, pseudo_metric_sq, BasedPlan};
use crate::measures::{fmt_scalar, random_measure, InstanceSeed, ParticleMeasure};
use crate::proximal::{check_step, proximal_step};
use crate::transport::{wasserstein_distance, wasserstein_distance_sq};

pub const TOLERANCE: f64 = 1e-8;
/// Relative tolerance for kinds that carry time-discretization error.
pub const DISCRETIZATION_TOLERANCE: f64 = 1e-6;

type Measure = ParticleMeasure<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    SlopeChain,
    DiscreteEvi,
    TransportEvi,
    ContractionPos,
    ContractionNeg,
    IteratedContraction,
    AsymmetricRecursive,
    LinearGrowth,
    RasmussenBound,
    GenGeoConvexity,
    VaryingRecursive,
    VaryingLinearGrowth,
    VaryingRasmussen,
    VaryingExpFormula,
    ExpFormula,
    EviAlongFlow,
    /// `W₂(J_τμ, J_τν) ≤ W₂(μ, ν)`; recorded as data, never gating.
    ExactContraction,
}

impl Kind {
    pub const ALL: [Kind; 17] = [
        Kind::SlopeChain,
        Kind::DiscreteEvi,
        Kind::TransportEvi,
        Kind::ContractionPos,
        Kind::ContractionNeg,
        Kind::IteratedContraction,
        Kind::AsymmetricRecursive,
        Kind::LinearGrowth,
        Kind::RasmussenBound,
        Kind::GenGeoConvexity,
        Kind::VaryingRecursive,
        Kind::VaryingLinearGrowth,
        Kind::VaryingRasmussen,
        Kind::VaryingExpFormula,
        Kind::ExpFormula,
        Kind::EviAlongFlow,
        Kind::ExactContraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::SlopeChain => "slope_chain",
            Kind::DiscreteEvi => "discrete_evi",
            Kind::TransportEvi => "transport_evi",
            Kind::ContractionPos => "contraction_pos",
            Kind::ContractionNeg => "contraction_neg",
            Kind::IteratedContraction => "iterated_contraction",
            Kind::AsymmetricRecursive => "asymmetric_recursive",
            Kind::LinearGrowth => "linear_growth",
            Kind::RasmussenBound => "rasmussen_bound",
            Kind::GenGeoConvexity => "gen_geo_convexity",
            Kind::VaryingRecursive => "varying_recursive",
            Kind::VaryingLinearGrowth => "varying_linear_growth",
            Kind::VaryingRasmussen => "varying_rasmussen",
            Kind::VaryingExpFormula => "varying_exp_formula",
            Kind::ExpFormula => "exp_formula",
            Kind::EviAlongFlow => "evi_along_flow",
            Kind::ExactContraction => "exact_contraction",
        }
    }

    pub fn tolerance_scale(self) -> f64 {
        match self {
            Kind::EviAlongFlow => DISCRETIZATION_TOLERANCE,
            _ => TOLERANCE,
        }
    }

    /// Informational kinds are reported but never count as failures.
    pub fn is_informational(self) -> bool {
        matches!(self, Kind::ExactContraction)
    }

    /// Parses a comma-separated list; `all` selects every kind.
    pub fn parse_list(s: &str) -> Result<Vec<Kind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Kind::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Parse("empty kind list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown inequality kind '{s}'")))
    }
}

/// A fully specified instance. Fields irrelevant to a kind are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub seed: u64,
    pub functional: Functional<f64>,
    pub mu: Measure,
    pub nu: Measure,
    pub omega: Measure,
    pub mu1: Measure,
    pub tau: f64,
    pub h: f64,
    pub n: usize,
    pub m: usize,
    pub t: f64,
    pub alpha: f64,
    pub steps: Vec<f64>,
    pub probes: usize,
}

impl Instance {
    /// Instance with every auxiliary measure equal to `mu` and unit parameters.
    pub fn new(functional: Functional<f64>, mu: Measure) -> Self {
        Self {
            seed: 0,
            functional,
            nu: mu.clone(),
            omega: mu.clone(),
            mu1: mu.clone(),
            mu,
            tau: 0.5,
            h: 0.25,
            n: 1,
            m: 1,
            t: 1.0,
            alpha: 0.5,
            steps: Vec::new(),
            probes: 8,
        }
    }

    /// Seeded instance for `kind` with `n_atoms` atoms in dimension `dim`.
    pub fn generate(kind: Kind, seed: u64, functional: Functional<f64>, n_atoms: usize, dim: usize) -> Result<Self> {
        let root = InstanceSeed::new(seed).derive(kind as u64 + 1);
        let measure = |salt: u64| random_measure(&root.derive(salt), n_atoms, dim, 1.5);
        let mut s = root.derive(100).stream()?;
        let lm = functional.lambda_minus();
        let tau_cap = if lm > 0.0 { 0.9 / lm } else { 1.0 };
        let tau = s.next_in(0.05, 1.0) * tau_cap;
        let h = tau * s.next_in(0.1, 1.0);
        let n = 1 + s.next_index(6);
        let m = 1 + s.next_index(8);
        let (t, steps, probes) = match kind {
            Kind::ExpFormula => {
                let t = [0.25, 1.0, 4.0][s.next_index(3)];
                (t, Vec::new(), 0)
            }
            Kind::VaryingExpFormula => {
                let t = [0.25, 1.0][s.next_index(2)];
                let hmax = [0.1, 0.05, 0.025][s.next_index(3)];
                (t, random_partition(&root.derive(200), t, hmax)?, 0)
            }
            Kind::EviAlongFlow => ([0.25, 1.0][s.next_index(2)], Vec::new(), 8),
            _ => {
                // varying schedules respect h_k ≤ τ
                let steps = (0..m).map(|_| tau * s.next_in(0.1, 1.0)).collect();
                (1.0, steps, 0)
            }
        };
        let n = if kind == Kind::ExpFormula { [4, 8, 16, 32, 64][s.next_index(5)] } else { n };
        Ok(Self {
            seed,
            functional,
            mu: measure(1)?,
            nu: measure(2)?,
            omega: measure(3)?,
            mu1: measure(4)?,
            tau,
            h,
            n,
            m,
            t,
            alpha: s.next_unit(),
            steps,
            probes,
        })
    }

    fn params(&self, kind: Kind) -> Vec<(&'static str, f64)> {
        let mut p = Vec::new();
        match kind {
            Kind::SlopeChain | Kind::DiscreteEvi | Kind::TransportEvi | Kind::ContractionPos
            | Kind::ContractionNeg | Kind::ExactContraction => p.push(("tau", self.tau)),
            Kind::IteratedContraction | Kind::LinearGrowth => p.extend([("tau", self.tau), ("n", self.n as f64)]),
            Kind::AsymmetricRecursive | Kind::RasmussenBound => {
                p.extend([("tau", self.tau), ("h", self.h), ("n", self.n as f64), ("m", self.m as f64)])
            }
            Kind::GenGeoConvexity => p.push(("alpha", self.alpha)),
            Kind::VaryingRecursive | Kind::VaryingRasmussen => {
                p.extend([("tau", self.tau), ("n", self.n as f64), ("m", self.steps.len() as f64)]);
                p.push(("hmax", max_step(&self.steps)));
            }
            Kind::VaryingLinearGrowth => p.extend([("m", self.steps.len() as f64), ("hmax", max_step(&self.steps))]),
            Kind::VaryingExpFormula => p.extend([("t", self.t), ("hmax", max_step(&self.steps)), ("m", self.steps.len() as f64)]),
            Kind::ExpFormula => p.extend([("t", self.t), ("n", self.n as f64)]),
            Kind::EviAlongFlow => p.extend([("t", self.t), ("probes", self.probes as f64)]),
        }
        p
    }

    fn describe(&self, kind: Kind) -> InstanceDescriptor {
        InstanceDescriptor {
            seed: self.seed,
            functional: self.functional.to_string(),
            n_atoms: self.mu.len(),
            dim: self.mu.dim(),
            params: self.params(kind).into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

fn max_step(steps: &[f64]) -> f64 {
    steps.iter().fold(0.0, |m: f64, &h| m.max(h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub seed: u64,
    pub functional: String,
    pub n_atoms: usize,
    pub dim: usize,
    pub params: Vec<(String, f64)>,
}

impl InstanceDescriptor {
    /// `key=value` pairs joined by semicolons.
    pub fn params_string(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_scalar(*v)))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub kind: Kind,
    pub instance: InstanceDescriptor,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub pass: bool,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl InequalityReport {
    fn new(kind: Kind, inst: &Instance, lhs: f64, rhs: f64) -> Self {
        let tolerance = kind.tolerance_scale() * (1.0 + lhs.abs() + rhs.abs());
        let slack = rhs - lhs;
        Self {
            kind,
            instance: inst.describe(kind),
            lhs,
            rhs,
            slack,
            pass: slack >= -tolerance,
            tolerance,
            detail: None,
        }
    }

    /// `slack / (1 + |lhs| + |rhs|)`, the quantity compared against the tolerance scale.
    pub fn relative_slack(&self) -> f64 {
        self.slack / (1.0 + self.lhs.abs() + self.rhs.abs())
    }
}

fn hypothesis(msg: impl Into<String>) -> Error {
    Error::HypothesisViolated(msg.into())
}

fn require_step(e: &Functional<f64>, tau: f64) -> Result<()> {
    check_step(e, tau).map_err(|err| match err {
        Error::StepTooLarge { tau, limit } => hypothesis(format!("tau = {tau} must be below 1/lambda^- = {limit}")),
        other => other,
    })
}

fn w2(a: &Measure, b: &Measure) -> Result<f64> {
    wasserstein_distance_sq(a, b)
}

fn slope_sq(e: &Functional<f64>, mu: &Measure) -> Result<f64> {
    Ok(e.metric_slope(mu)?.powi(2))
}

fn prox(e: &Functional<f64>, tau: f64, mu: &Measure) -> Result<Measure> {
    Ok(proximal_step(e, tau, mu)?.output)
}

/// `J^k_τ μ` for `k = 0..=n`.
fn iterates(e: &Functional<f64>, tau: f64, n: usize, mu: &Measure) -> Result<Vec<Measure>> {
    Ok(discrete_flow(e, tau, n, mu)?.steps.into_iter().map(|s| s.measure).collect())
}

fn varying_iterates(e: &Functional<f64>, steps: &[f64], mu: &Measure) -> Result<Vec<Measure>> {
    Ok(varying_flow(e, steps, mu)?.steps.into_iter().map(|s| s.measure).collect())
}

fn lambda_plus_ok(e: &Functional<f64>, tau: f64) -> Result<f64> {
    let l = e.lambda();
    if 1.0 + l * tau <= 0.0 {
        return Err(hypothesis(format!("1 + lambda tau = {} must be positive", 1.0 + l * tau)));
    }
    Ok(l)
}

fn varying_hypotheses(e: &Functional<f64>, tau: f64, steps: &[f64]) -> Result<()> {
    require_step(e, tau)?;
    if let Some(&bad) = steps.iter().find(|&&h| !(h > 0.0 && h <= tau)) {
        return Err(hypothesis(format!("step {bad} must lie in (0, tau = {tau}]")));
    }
    Ok(())
}

/// `Π_{k≤m} (1 - λ⁻h_k)^{-1}`.
fn growth(lm: f64, steps: &[f64]) -> f64 {
    steps.iter().fold(1.0, |p, &h| p / (1.0 - lm * h))
}

/// Evaluates one inequality on one instance.
pub fn check(kind: Kind, inst: &Instance) -> Result<InequalityReport> {
    let e = &inst.functional;
    let mu = &inst.mu;
    let lm = e.lambda_minus();
    let report = |lhs: f64, rhs: f64| InequalityReport::new(kind, inst, lhs, rhs);
    match kind {
        Kind::SlopeChain => {
            require_step(e, inst.tau)?;
            let tau = inst.tau;
            let l = lambda_plus_ok(e, tau)?;
            let j = prox(e, tau, mu)?;
            let d2 = w2(mu, &j)?;
            let links = [
                (tau * tau * slope_sq(e, &j)?, d2),
                (d2, 2.0 * tau / (1.0 + l * tau) * (e.energy(mu)? - e.energy(&j)? - d2 / (2.0 * tau))),
                (
                    2.0 * tau / (1.0 + l * tau) * (e.energy(mu)? - e.energy(&j)? - d2 / (2.0 * tau)),
                    tau * tau / (1.0 + l * tau).powi(2) * slope_sq(e, mu)?,
                ),
            ];
            let (idx, worst) = links
                .iter()
                .map(|&(a, b)| report(a, b))
                .enumerate()
                .min_by(|a, b| a.1.relative_slack().total_cmp(&b.1.relative_slack()))
                .expect("three links");
            Ok(InequalityReport { detail: Some(format!("link {}", idx + 1)), ..worst })
        }
        Kind::DiscreteEvi => {
            require_step(e, inst.tau)?;
            let (tau, nu) = (inst.tau, &inst.nu);
            let j = prox(e, tau, mu)?;
            let lhs = (w2(&j, nu)? - w2(mu, nu)?) / (2.0 * tau) + e.lambda() / 2.0 * w2(&j, nu)?;
            let rhs = e.energy(nu)? - e.energy(&j)? - w2(mu, &j)? / (2.0 * tau);
            Ok(report(lhs, rhs))
        }
        Kind::TransportEvi => {
            require_step(e, inst.tau)?;
            let (tau, nu) = (inst.tau, &inst.nu);
            let l = lambda_plus_ok(e, tau)?;
            let j = prox(e, tau, mu)?;
            let tm = pseudo_metric_sq(&BasedPlan::unique(mu, &j, nu)?);
            let rhs = e.energy(nu)? - e.energy(&j)? - w2(mu, &j)? / (2.0 * tau);
            let lhs = (tm - w2(mu, nu)?) / (2.0 * tau) + l / 2.0 * tm;
            let weaker = (w2(&j, nu)? - w2(mu, nu)?) / (2.0 * tau) + l / 2.0 * w2(&j, nu)?;
            let mut r = report(lhs, rhs);
            // the W_{2,μ} form dominates the W₂ form
            let ordered = (rhs - lhs) <= (rhs - weaker) + r.tolerance;
            if !ordered {
                r.pass = false;
                r.detail = Some(format!("transport slack {} exceeds W2 slack {}", rhs - lhs, rhs - weaker));
            }
            Ok(r)
        }
        Kind::ContractionPos | Kind::ContractionNeg => {
            require_step(e, inst.tau)?;
            let l = e.lambda();
            let tau = inst.tau;
            let nu = &inst.nu;
            if kind == Kind::ContractionPos && l <= 0.0 {
                return Err(hypothesis(format!("lambda = {l} must be positive")));
            }
            if kind == Kind::ContractionNeg && l > 0.0 {
                return Err(hypothesis(format!("lambda = {l} must be nonpositive")));
            }
            lambda_plus_ok(e, tau)?;
            let lhs = (1.0 + l * tau).powi(2) * w2(&prox(e, tau, mu)?, &prox(e, tau, nu)?)?;
            let mut rhs = w2(mu, nu)? + tau * tau * slope_sq(e, mu)?;
            if kind == Kind::ContractionPos {
                let inf = e.infimum().ok_or_else(|| hypothesis("inf E unavailable"))?;
                rhs += 2.0 * l * tau * tau * (e.energy(nu)? - inf);
            }
            Ok(report(lhs, rhs))
        }
        Kind::IteratedContraction => {
            require_step(e, inst.tau)?;
            let (tau, n, nu) = (inst.tau, inst.n, &inst.nu);
            let l = lambda_plus_ok(e, tau)?;
            let a = iterates(e, tau, n, mu)?;
            let b = iterates(e, tau, n, nu)?;
            let lhs = w2(&a[n], &b[n])?;
            let decay = (1.0 + l * tau).powi(-2 * n as i32);
            let nf = n as f64;
            let rhs = if l > 0.0 {
                let inf = e.infimum().ok_or_else(|| hypothesis("inf E unavailable"))?;
                decay * w2(mu, nu)? + nf * tau * tau * (slope_sq(e, mu)? + 2.0 * l * (e.energy(nu)? - inf))
            } else {
                decay * w2(mu, nu)? + nf * tau * tau * decay * slope_sq(e, mu)?
            };
            Ok(report(lhs, rhs))
        }
        Kind::AsymmetricRecursive => {
            let (tau, h, n, m) = (inst.tau, inst.h, inst.n, inst.m);
            require_step(e, tau)?;
            if !(h > 0.0 && h <= tau) {
                return Err(hypothesis(format!("need 0 < h <= tau, got h = {h}, tau = {tau}")));
            }
            if n == 0 || m == 0 {
                return Err(hypothesis("need n, m >= 1"));
            }
            let a = iterates(e, tau, n, mu)?;
            let b = iterates(e, h, m, mu)?;
            let lhs = (1.0 - lm * h).powi(2) * w2(&a[n], &b[m])?;
            let rhs = h / tau / (1.0 - lm * tau) * w2(&a[n - 1], &b[m - 1])?
                + (tau - h) / tau * w2(&b[m - 1], &a[n])?
                + 2.0 * h * h * (1.0 - lm * h).powi(-2 * m as i32) * slope_sq(e, mu)?;
            Ok(report(lhs, rhs))
        }
        Kind::LinearGrowth => {
            let (tau, n) = (inst.tau, inst.n);
            require_step(e, tau)?;
            let a = iterates(e, tau, n, mu)?;
            let lhs = wasserstein_distance(&a[n], mu)?;
            let rhs = n as f64 * tau * (1.0 - tau * lm).powi(-(n as i32)) * e.metric_slope(mu)?;
            Ok(report(lhs, rhs))
        }
        Kind::RasmussenBound => {
            let (tau, h, n, m) = (inst.tau, inst.h, inst.n, inst.m);
            require_step(e, tau)?;
            if !(h > 0.0 && h <= tau) {
                return Err(hypothesis(format!("need 0 < h <= tau, got h = {h}, tau = {tau}")));
            }
            let a = iterates(e, tau, n, mu)?;
            let b = iterates(e, h, m, mu)?;
            let (nf, mf) = (n as f64, m as f64);
            let lhs = w2(&a[n], &b[m])?;
            let rhs = ((nf * tau - mf * h).powi(2) + tau * h * mf + 2.0 * tau * tau * nf)
                * (1.0 - lm * tau).powi(-2 * n as i32)
                * (1.0 - lm * h).powi(-2 * m as i32)
                * slope_sq(e, mu)?;
            Ok(report(lhs, rhs))
        }
        Kind::GenGeoConvexity => {
            let alpha = inst.alpha;
            let plan = BasedPlan::canonical(&inst.omega, mu, &inst.mu1)?;
            let mid = generalized_geodesic(&plan, alpha)?.measure;
            let lhs = e.energy(&mid)?;
            let rhs = (1.0 - alpha) * e.energy(mu)? + alpha * e.energy(&inst.mu1)?
                - alpha * (1.0 - alpha) * e.lambda() / 2.0 * pseudo_metric_sq(&plan);
            Ok(report(lhs, rhs))
        }
        Kind::VaryingRecursive => {
            let (tau, n, steps) = (inst.tau, inst.n, &inst.steps);
            varying_hypotheses(e, tau, steps)?;
            let m = steps.len();
            if n == 0 || m == 0 {
                return Err(hypothesis("need n, m >= 1"));
            }
            let a = iterates(e, tau, n, mu)?;
            let b = varying_iterates(e, steps, mu)?;
            let hm = steps[m - 1];
            let pm = growth(lm, steps);
            let lhs = (1.0 - lm * hm).powi(2) * w2(&a[n], &b[m])?;
            let rhs = hm / tau / (1.0 - lm * tau) * w2(&a[n - 1], &b[m - 1])?
                + (tau - hm) / tau * w2(&b[m - 1], &a[n])?
                + 2.0 * hm * hm * pm * pm * slope_sq(e, mu)?;
            Ok(report(lhs, rhs))
        }
        Kind::VaryingLinearGrowth => {
            let steps = &inst.steps;
            for &h in steps {
                require_step(e, h)?;
            }
            let m = steps.len();
            let b = varying_iterates(e, steps, mu)?;
            let s_m: f64 = steps.iter().sum();
            let lhs = wasserstein_distance(&b[m], mu)?;
            let rhs = e.metric_slope(mu)? * s_m * growth(lm, steps);
            Ok(report(lhs, rhs))
        }
        Kind::VaryingRasmussen => {
            let (tau, n, steps) = (inst.tau, inst.n, &inst.steps);
            varying_hypotheses(e, tau, steps)?;
            let m = steps.len();
            let a = iterates(e, tau, n, mu)?;
            let b = varying_iterates(e, steps, mu)?;
            let s_m: f64 = steps.iter().sum();
            let pm = growth(lm, steps);
            let nf = n as f64;
            let lhs = w2(&a[n], &b[m])?;
            let rhs = ((nf * tau - s_m).powi(2) + tau * s_m + 2.0 * tau * tau * nf)
                * (1.0 - lm * tau).powi(-2 * n as i32)
                * pm
                * pm
                * slope_sq(e, mu)?;
            Ok(report(lhs, rhs))
        }
        Kind::VaryingExpFormula => {
            let steps = &inst.steps;
            let hmax = max_step(steps);
            if steps.is_empty() || 2.0 * lm * hmax > 1.0 {
                return Err(hypothesis(format!("need a nonempty schedule with max step {hmax} <= 1/(2 lambda^-)")));
            }
            let t: f64 = steps.iter().sum();
            let b = varying_iterates(e, steps, mu)?;
            let truth = reference_flow(e, mu, t, DEFAULT_DT)?;
            let lhs = wasserstein_distance(&truth, &b[steps.len()])?;
            let rhs = varying_formula_bound(lm, t, hmax, e.metric_slope(mu)?);
            Ok(report(lhs, rhs))
        }
        Kind::ExpFormula => {
            let (t, n) = (inst.t, inst.n);
            if n == 0 || 2.0 * lm * t >= n as f64 {
                return Err(hypothesis(format!("need n = {n} > 2 lambda^- t = {}", 2.0 * lm * t)));
            }
            let a = iterates(e, t / n as f64, n, mu)?;
            let truth = reference_flow(e, mu, t, DEFAULT_DT)?;
            let lhs = wasserstein_distance(&a[n], &truth)?;
            let rhs = exponential_formula_bound(lm, t, n, e.metric_slope(mu)?);
            Ok(report(lhs, rhs))
        }
        Kind::EviAlongFlow => {
            let checks = evi_along_flow(e, mu, &inst.nu, inst.t, inst.probes.max(1))?;
            let (time, worst) = checks
                .into_iter()
                .min_by(|a, b| {
                    let ra = a.1.slack() / (1.0 + a.1.lhs.abs() + a.1.rhs.abs());
                    let rb = b.1.slack() / (1.0 + b.1.lhs.abs() + b.1.rhs.abs());
                    ra.total_cmp(&rb)
                })
                .expect("at least one probe");
            let r = report(worst.lhs, worst.rhs);
            Ok(InequalityReport { detail: Some(format!("t={}", fmt_scalar(time))), ..r })
        }
        Kind::ExactContraction => {
            require_step(e, inst.tau)?;
            let lhs = wasserstein_distance(&prox(e, inst.tau, mu)?, &prox(e, inst.tau, &inst.nu)?)?;
            Ok(report(lhs, wasserstein_distance(mu, &inst.nu)?))
        }
    }
}

/// Result of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Checked(InequalityReport),
    HypothesisViolated { kind: Kind, instance: InstanceDescriptor, message: String },
    Error { kind: Kind, instance: InstanceDescriptor, message: String },
}

impl Outcome {
    pub fn kind(&self) -> Kind {
        match self {
            Outcome::Checked(r) => r.kind,
            Outcome::HypothesisViolated { kind, .. } | Outcome::Error { kind, .. } => *kind,
        }
    }

    pub fn instance(&self) -> &InstanceDescriptor {
        match self {
            Outcome::Checked(r) => &r.instance,
            Outcome::HypothesisViolated { instance, .. } | Outcome::Error { instance, .. } => instance,
        }
    }
}

/// The functionals swept by default, spanning λ ∈ {1, 0, -1}.
pub fn default_functionals() -> Vec<Functional<f64>> {
    [
        "potential:quadratic",
        "potential:cosine",
        "potential:quadratic_cosine",
        "interaction:quadratic",
        "sum:[potential:quadratic,interaction:quadratic]",
        "sum:[potential:quadratic(2),potential:cosine]",
    ]
    .iter()
    .map(|s| s.parse().expect("catalog parses"))
    .collect()
}

/// Every `(N, d)` with `N ≤ 8`, `d ≤ 3`.
pub fn default_sizes() -> Vec<(usize, usize)> {
    (1..=8).flat_map(|n| (1..=3).map(move |d| (n, d))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kinds: Vec<Kind>,
    pub seeds: Vec<u64>,
    pub sizes: Vec<(usize, usize)>,
    pub functionals: Vec<Functional<f64>>,
}

impl SweepConfig {
    pub fn new(kinds: Vec<Kind>, seeds: Vec<u64>) -> Self {
        Self { kinds, seeds, sizes: default_sizes(), functionals: default_functionals() }
    }

    /// Functionals whose λ branch suits the kind.
    fn functionals_for(&self, kind: Kind) -> Vec<&Functional<f64>> {
        self.functionals
            .iter()
            .filter(|f| match kind {
                Kind::ContractionPos => f.lambda() > 0.0 && f.infimum().is_some(),
                Kind::ContractionNeg => f.lambda() <= 0.0,
                Kind::IteratedContraction => f.lambda() <= 0.0 || f.infimum().is_some(),
                _ => true,
            })
            .collect()
    }

    /// Seed `s` of `kind` uses size `s mod |sizes|` and cycles through the
    /// applicable functionals once per pass over the sizes.
    pub fn instance(&self, kind: Kind, seed: u64) -> Result<Instance> {
        let fs = self.functionals_for(kind);
        if fs.is_empty() || self.sizes.is_empty() {
            return Err(hypothesis(format!("no functional or size applies to {kind}")));
        }
        let ns = self.sizes.len() as u64;
        let (n_atoms, dim) = self.sizes[(seed % ns) as usize];
        let f = fs[((seed / ns) % fs.len() as u64) as usize].clone();
        Instance::generate(kind, seed, f, n_atoms, dim)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub hypothesis_violated: usize,
    pub errors: usize,
    pub worst_slack: Option<f64>,
    pub worst_relative_slack: Option<f64>,
    pub informational: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub config: SweepConfig,
    pub outcomes: Vec<Outcome>,
    pub per_kind: BTreeMap<Kind, KindSummary>,
}

impl SweepSummary {
    /// Failures and errors over gating kinds.
    pub fn failures(&self) -> usize {
        self.per_kind
            .values()
            .filter(|k| !k.informational)
            .map(|k| k.failed + k.errors)
            .sum()
    }

    pub fn hypothesis_violations(&self) -> usize {
        self.per_kind.values().map(|k| k.hypothesis_violated).sum()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::EvaluationError(format!("csv: {e}"));
        w.write_record(["kind", "seed", "functional", "n_atoms", "dim", "params", "lhs", "rhs", "slack", "pass"])
            .map_err(io)?;
        for o in &self.outcomes {
            let d = o.instance();
            let (lhs, rhs, slack, pass) = match o {
                Outcome::Checked(r) => (fmt_scalar(r.lhs), fmt_scalar(r.rhs), fmt_scalar(r.slack), r.pass.to_string()),
                Outcome::HypothesisViolated { .. } => ("nan".into(), "nan".into(), "nan".into(), "hypothesis_violated".into()),
                Outcome::Error { .. } => ("nan".into(), "nan".into(), "nan".into(), "error".into()),
            };
            w.write_record([
                o.kind().name().to_string(),
                d.seed.to_string(),
                d.functional.clone(),
                d.n_atoms.to_string(),
                d.dim.to_string(),
                d.params_string(),
                lhs,
                rhs,
                slack,
                pass,
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::EvaluationError(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::EvaluationError(e.to_string()))
    }

    /// JSON summary: per-kind counts and worst slack, grid description, tool version.
    pub fn summary_json(&self) -> serde_json::Value {
        let seeds = &self.config.seeds;
        serde_json::json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "grid": {
                "kinds": self.config.kinds.iter().map(|k| k.name()).collect::<Vec<_>>(),
                "seed_count": seeds.len(),
                "seed_min": seeds.iter().min(),
                "seed_max": seeds.iter().max(),
                "sizes": self.config.sizes,
                "functionals": self.config.functionals.iter().map(ToString::to_string).collect::<Vec<_>>(),
            },
            "kinds": self.per_kind.iter().map(|(k, s)| (k.name().to_string(), serde_json::to_value(s).expect("plain data"))).collect::<serde_json::Map<_, _>>(),
            "failures": self.failures(),
            "hypothesis_violated": self.hypothesis_violations(),
        })
    }
}

/// Runs every kind over every seed. Per-instance errors are recorded, not raised.
pub fn sweep(config: &SweepConfig) -> Result<SweepSummary> {
    if config.kinds.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one kind".into()));
    }
    let cells: Vec<(Kind, u64)> = config
        .kinds
        .iter()
        .flat_map(|&k| config.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let mut outcomes: Vec<Outcome> = cells
        .par_iter()
        .map(|&(kind, seed)| {
            let fallback = || InstanceDescriptor {
                seed,
                functional: String::new(),
                n_atoms: 0,
                dim: 0,
                params: Vec::new(),
            };
            match config.instance(kind, seed) {
                Ok(inst) => match check(kind, &inst) {
                    Ok(r) => Outcome::Checked(r),
                    Err(Error::HypothesisViolated(message)) => {
                        Outcome::HypothesisViolated { kind, instance: inst.describe(kind), message }
                    }
                    Err(e) => Outcome::Error { kind, instance: inst.describe(kind), message: e.to_string() },
                },
                Err(Error::HypothesisViolated(message)) => Outcome::HypothesisViolated { kind, instance: fallback(), message },
                Err(e) => Outcome::Error { kind, instance: fallback(), message: e.to_string() },
            }
        })
        .collect();
    outcomes.sort_by_key(|o| (o.kind(), o.instance().seed));
    let mut per_kind: BTreeMap<Kind, KindSummary> = config
        .kinds
        .iter()
        .map(|&k| (k, KindSummary { informational: k.is_informational(), ..Default::default() }))
        .collect();
    for o in &outcomes {
        let s = per_kind.get_mut(&o.kind()).expect("kind registered");
        s.total += 1;
        match o {
            Outcome::Checked(r) => {
                if r.pass {
                    s.passed += 1;
                } else {
                    s.failed += 1;
                }
                s.worst_slack = Some(s.worst_slack.map_or(r.slack, |w| w.min(r.slack)));
                let rel = r.relative_slack();
                s.worst_relative_slack = Some(s.worst_relative_slack.map_or(rel, |w| w.min(rel)));
            }
            Outcome::HypothesisViolated { .. } => s.hypothesis_violated += 1,
            Outcome::Error { .. } => s.errors += 1,
        }
    }
    Ok(SweepSummary { config: config.clone(), outcomes, per_kind })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Measure {
        ParticleMeasure::from_line(xs).unwrap()
    }

    fn f(s: &str) -> Functional<f64> {
        s.parse().unwrap()
    }

    fn seeded(kind: Kind, seed: u64, desc: &str) -> Instance {
        Instance::generate(kind, seed, f(desc), 5, 2).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in Kind::ALL {
            assert_eq!(k.name().parse::<Kind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), k.name());
        }
        assert_eq!(Kind::parse_list("all").unwrap().len(), Kind::ALL.len());
        assert_eq!(Kind::parse_list("linear_growth, slope_chain").unwrap(), vec![Kind::SlopeChain, Kind::LinearGrowth]);
        assert!(Kind::parse_list("bogus").is_err());
        assert!(Kind::parse_list("").is_err());
    }

    #[test]
    fn discrete_evi_trivial() {
        let mu = line(&[0.3, -0.7]);
        let r = check(Kind::DiscreteEvi, &Instance::new(Functional::Zero, mu)).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn contraction_pos_example() {
        let mut inst = Instance::new(f("potential:quadratic"), line(&[1.0]));
        inst.nu = line(&[3.0]);
        inst.tau = 0.5;
        let r = check(Kind::ContractionPos, &inst).unwrap();
        assert!((r.lhs - 4.0).abs() <= 1e-12);
        assert!((r.rhs - 6.5).abs() <= 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn rasmussen_example() {
        let mut inst = Instance::new(f("potential:quadratic"), line(&[1.0]));
        (inst.tau, inst.h, inst.n, inst.m) = (0.5, 0.25, 2, 4);
        let r = check(Kind::RasmussenBound, &inst).unwrap();
        let expect = (1.5f64.powi(-2) - 1.25f64.powi(-4)).powi(2);
        assert!((r.lhs - expect).abs() <= 1e-14);
        assert!((r.lhs - 1.215e-3).abs() <= 1e-6);
        assert!((r.rhs - 1.5).abs() <= 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn degenerate_cases() {
        let mu = line(&[0.4, -1.2, 2.0]);
        let quad = f("potential:quadratic");
        let cos = f("potential:cosine");
        // μ = ν: both sides of the contraction collapse to the slope term
        let r = check(Kind::ContractionNeg, &Instance::new(cos.clone(), mu.clone())).unwrap();
        assert!(r.lhs.abs() <= 1e-12 && r.pass);
        let r = check(Kind::ExactContraction, &Instance::new(cos.clone(), mu.clone())).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        // n = 0
        let mut inst = Instance::new(quad.clone(), mu.clone());
        inst.n = 0;
        for k in [Kind::LinearGrowth, Kind::IteratedContraction] {
            let r = check(k, &inst).unwrap();
            assert_eq!(r.lhs, 0.0, "{k}");
            assert!(r.pass);
        }
        inst.m = 0;
        let r = check(Kind::RasmussenBound, &inst).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(matches!(check(Kind::AsymmetricRecursive, &inst), Err(Error::HypothesisViolated(_))));
        // empty schedules
        let inst = Instance::new(quad.clone(), mu.clone());
        let r = check(Kind::VaryingLinearGrowth, &inst).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(matches!(check(Kind::VaryingRecursive, &inst), Err(Error::HypothesisViolated(_))));
        assert!(matches!(check(Kind::VaryingExpFormula, &inst), Err(Error::HypothesisViolated(_))));
        let mut inst = Instance::new(quad.clone(), mu.clone());
        inst.n = 0;
        let r = check(Kind::VaryingRasmussen, &inst).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        // α ∈ {0, 1}
        for alpha in [0.0, 1.0] {
            let mut inst = seeded(Kind::GenGeoConvexity, 3, "potential:cosine");
            inst.alpha = alpha;
            let r = check(Kind::GenGeoConvexity, &inst).unwrap();
            assert!(r.slack.abs() <= 1e-12);
        }
        // zero energy: every side vanishes
        for k in [Kind::SlopeChain, Kind::TransportEvi, Kind::ExpFormula, Kind::EviAlongFlow] {
            let r = check(k, &Instance::new(Functional::Zero, mu.clone())).unwrap();
            assert!(r.pass && r.lhs.abs() <= 1e-12, "{k}");
        }
    }

    #[test]
    fn hypotheses_are_reported() {
        let mut inst = Instance::new(f("potential:cosine"), line(&[0.2]));
        inst.tau = 1.5;
        assert!(matches!(check(Kind::SlopeChain, &inst), Err(Error::HypothesisViolated(_))));
        assert!(matches!(check(Kind::ContractionPos, &Instance::new(f("potential:cosine"), line(&[0.2]))), Err(Error::HypothesisViolated(_))));
        let mut inst = Instance::new(f("potential:cosine"), line(&[0.2]));
        (inst.t, inst.n) = (4.0, 8);
        assert!(matches!(check(Kind::ExpFormula, &inst), Err(Error::HypothesisViolated(_))));
        let mut inst = Instance::new(f("potential:quadratic"), line(&[0.2]));
        (inst.tau, inst.h) = (0.2, 0.3);
        assert!(matches!(check(Kind::RasmussenBound, &inst), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn seeded_instances_pass() {
        for k in Kind::ALL {
            if k.is_informational() {
                continue;
            }
            for desc in ["potential:quadratic", "potential:cosine", "interaction:quadratic", "potential:quadratic_cosine"] {
                let e = f(desc);
                if (k == Kind::ContractionPos && e.lambda() <= 0.0) || (k == Kind::ContractionNeg && e.lambda() > 0.0) {
                    continue;
                }
                for seed in 0..3 {
                    match check(k, &seeded(k, seed, desc)) {
                        Ok(r) => assert!(r.pass, "{k} {desc} seed {seed}: {r:?}"),
                        Err(Error::HypothesisViolated(_)) => {}
                        Err(e) => panic!("{k} {desc} seed {seed}: {e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn transport_evi_is_stronger() {
        for seed in 0..10 {
            let inst = seeded(Kind::TransportEvi, seed, "interaction:quadratic");
            let t = check(Kind::TransportEvi, &inst).unwrap();
            let d = check(Kind::DiscreteEvi, &inst).unwrap();
            assert!(t.pass);
            assert!(t.slack <= d.slack + 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn geometry_identities_scale_quadratically() {
        use crate::geometry::{check_hilbertian_identity, four_point_glue};
        let inst = seeded(Kind::GenGeoConvexity, 11, "potential:quadratic");
        let base = four_point_glue(&inst.omega, &inst.mu, &inst.mu1, &inst.nu, 0.3).unwrap();
        let plan = BasedPlan::unique(&inst.omega, &inst.mu, &inst.mu1).unwrap();
        let hil = check_hilbertian_identity(&plan, 0.3).unwrap();
        for c in [0.5, 2.0] {
            let s = |m: &Measure| m.scale(c).unwrap();
            let g = four_point_glue(&s(&inst.omega), &s(&inst.mu), &s(&inst.mu1), &s(&inst.nu), 0.3).unwrap();
            assert!((g.lhs - c * c * base.lhs).abs() <= 1e-12 * (1.0 + base.lhs));
            assert!((g.rhs - c * c * base.rhs).abs() <= 1e-12 * (1.0 + base.rhs));
            let scaled = BasedPlan::unique(&s(&inst.omega), &s(&inst.mu), &s(&inst.mu1)).unwrap();
            let h = check_hilbertian_identity(&scaled, 0.3).unwrap();
            assert!((h.pairing_cost - c * c * hil.pairing_cost).abs() <= 1e-12 * (1.0 + hil.pairing_cost));
        }
    }

    #[test]
    fn sweep_bookkeeping() {
        let empty = sweep(&SweepConfig::new(vec![Kind::SlopeChain], vec![])).unwrap();
        assert!(empty.outcomes.is_empty());
        assert_eq!(empty.per_kind[&Kind::SlopeChain].total, 0);
        assert!(sweep(&SweepConfig::new(vec![], vec![1])).is_err());

        // t = 4 with λ⁻ = 1 and small n violates n > 2λ⁻t
        let mut cfg = SweepConfig::new(vec![Kind::ExpFormula, Kind::LinearGrowth], (0..40).collect());
        cfg.functionals = vec![f("potential:cosine")];
        cfg.sizes = vec![(2, 1)];
        let s = sweep(&cfg).unwrap();
        let exp = &s.per_kind[&Kind::ExpFormula];
        assert!(exp.hypothesis_violated > 0);
        assert_eq!(exp.failed, 0);
        assert_eq!(exp.passed + exp.hypothesis_violated, 40);
        assert_eq!(s.failures(), 0);
        assert_eq!(s.per_kind[&Kind::LinearGrowth].passed, 40);
    }

    #[test]
    fn sweep_is_deterministic_and_serializes() {
        let mut cfg = SweepConfig::new(vec![Kind::DiscreteEvi, Kind::GenGeoConvexity], (1..=12).collect());
        cfg.sizes = vec![(3, 2)];
        let a = sweep(&cfg).unwrap();
        let b = sweep(&cfg).unwrap();
        assert_eq!(a.outcomes, b.outcomes);
        let csv = a.to_csv().unwrap();
        assert_eq!(csv, b.to_csv().unwrap());
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "kind,seed,functional,n_atoms,dim,params,lhs,rhs,slack,pass");
        assert_eq!(csv.lines().count(), 25);
        // sum functionals are quoted because of the embedded comma
        assert!(csv.contains("\"sum:[potential:quadratic(1),interaction:quadratic(1)]\""));
        let json = a.summary_json();
        assert_eq!(json["kinds"]["discrete_evi"]["total"], 12);
        assert_eq!(json["grid"]["seed_count"], 12);
        let report = match &a.outcomes[0] {
            Outcome::Checked(r) => r.clone(),
            other => panic!("{other:?}"),
        };
        let text = serde_json::to_string(&report).unwrap();
        assert_eq!(serde_json::from_str::<InequalityReport>(&text).unwrap(), report);
    }
}
