//! Discrete gradient flows, the reference particle ODE, and convergence experiments.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::measures::{fmt_scalar, InstanceSeed, ParticleMeasure};
use crate::proximal::{check_step, proximal_step};
use crate::scalar::Scalar;
use crate::transport::wasserstein_distance;

/// Step-doubling tolerance for the reference integrator.
pub const REFERENCE_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_DT: f64 = 1e-2;
const MAX_REFINEMENTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule<T> {
    Fixed { tau: T, n: usize },
    Varying(Vec<T>),
}

impl<T: Scalar> Schedule<T> {
    pub fn steps(&self) -> Vec<T> {
        match self {
            Schedule::Fixed { tau, n } => vec![*tau; *n],
            Schedule::Varying(h) => h.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowStep<T> {
    pub time: T,
    pub measure: ParticleMeasure<T>,
    pub energy: T,
    pub slope: T,
    /// `W₂` from the previous measure; zero for the initial entry.
    pub step_w2: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace<T> {
    pub steps: Vec<FlowStep<T>>,
    pub schedule: Schedule<T>,
    pub functional: String,
    pub seed: Option<u64>,
    lambda_minus: T,
}

impl<T: Scalar> FlowTrace<T> {
    pub fn initial(&self) -> &ParticleMeasure<T> {
        &self.steps[0].measure
    }

    pub fn last(&self) -> &ParticleMeasure<T> {
        &self.steps.last().expect("trace is never empty").measure
    }

    /// Number of proximal steps taken.
    pub fn len(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `S_m = Σ_{k≤m} h_k`.
    pub fn elapsed(&self, m: usize) -> T {
        self.steps[m].time
    }

    /// `P_m = Π_{k≤m} (1 - λ⁻h_k)^{-1}`.
    pub fn growth_factor(&self, m: usize) -> T {
        self.schedule.steps()[..m]
            .iter()
            .fold(T::one(), |p, &h| p / (T::one() - self.lambda_minus * h))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// CSV with columns `step,time,energy,slope,step_w2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,time,energy,slope,step_w2\n");
        for (k, s) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{k},{},{},{},{}",
                fmt_scalar(s.time),
                fmt_scalar(s.energy),
                fmt_scalar(s.slope),
                fmt_scalar(s.step_w2)
            );
        }
        out
    }
}

fn flow_entry<T: Scalar>(e: &Functional<T>, time: T, measure: ParticleMeasure<T>, step_w2: T) -> Result<FlowStep<T>> {
    Ok(FlowStep {
        time,
        energy: e.energy(&measure)?,
        slope: e.metric_slope(&measure)?,
        measure,
        step_w2,
    })
}

fn run_schedule<T: Scalar>(e: &Functional<T>, schedule: Schedule<T>, mu0: &ParticleMeasure<T>) -> Result<FlowTrace<T>> {
    let hs = schedule.steps();
    for &h in &hs {
        check_step(e, h)?;
    }
    let mut steps = Vec::with_capacity(hs.len() + 1);
    steps.push(flow_entry(e, T::zero(), mu0.clone(), T::zero())?);
    let mut time = T::zero();
    for &h in &hs {
        let prev = &steps.last().expect("nonempty").measure;
        let r = proximal_step(e, h, prev)?;
        time += h;
        let w = r.step_w2_sq().sqrt();
        steps.push(flow_entry(e, time, r.output, w)?);
    }
    Ok(FlowTrace {
        steps,
        schedule,
        functional: e.to_string(),
        seed: None,
        lambda_minus: e.lambda_minus(),
    })
}

/// `J_τ^k μ0` for `k = 0..=n`.
pub fn discrete_flow<T: Scalar>(e: &Functional<T>, tau: T, n: usize, mu0: &ParticleMeasure<T>) -> Result<FlowTrace<T>> {
    check_step(e, tau)?;
    run_schedule(e, Schedule::Fixed { tau, n }, mu0)
}

/// `Π_{k≤m} J_{h_k} μ0` for every prefix of the schedule.
pub fn varying_flow<T: Scalar>(e: &Functional<T>, steps: &[T], mu0: &ParticleMeasure<T>) -> Result<FlowTrace<T>> {
    run_schedule(e, Schedule::Varying(steps.to_vec()), mu0)
}

/// Steps drawn uniformly from `[h/2, h]`, the last one trimmed so they sum to `t`.
pub fn random_partition<T: Scalar>(seed: &InstanceSeed, t: T, hmax: T) -> Result<Vec<T>> {
    if !(t >= T::zero() && hmax > T::zero() && t.is_finite() && hmax.is_finite()) {
        return Err(Error::InvalidParameter(format!("need t >= 0 and hmax > 0, got t = {t}, hmax = {hmax}")));
    }
    let mut stream = seed.stream()?;
    let mut steps = Vec::new();
    let mut total = T::zero();
    let floor = T::tol(1e-12) * (T::one() + t);
    while t - total > floor {
        let h = T::lit(stream.next_in(0.5, 1.0)) * hmax;
        if total + h >= t {
            steps.push(t - total);
            break;
        }
        steps.push(h);
        total += h;
    }
    Ok(steps)
}

/// The particle system `ẋ_i = -ξ_i(μ(t))`, integrated by classical RK4 with a
/// step-doubling certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFlow<T> {
    pub functional: Functional<T>,
    pub dt: T,
    pub tolerance: T,
}

impl<T: Scalar> ReferenceFlow<T> {
    pub fn new(functional: Functional<T>, dt: T) -> Result<Self> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { functional, dt, tolerance: T::tol(REFERENCE_TOLERANCE) })
    }

    fn velocity(&self, x: &[T], dim: usize) -> Result<Vec<T>> {
        let mu = ParticleMeasure::from_flat(dim, x.to_vec())?;
        Ok(self
            .functional
            .strong_subdifferential(&mu)?
            .values()
            .iter()
            .map(|&v| -v)
            .collect())
    }

    fn rk4(&self, x0: &[T], dim: usize, span: T, steps: usize) -> Result<Vec<T>> {
        let h = span / T::from_usize_lossy(steps);
        let half = h / T::lit(2.0);
        let sixth = h / T::lit(6.0);
        let mut x = x0.to_vec();
        let axpy = |x: &[T], a: T, k: &[T]| -> Vec<T> { x.iter().zip(k).map(|(&u, &v)| u + a * v).collect() };
        for _ in 0..steps {
            let k1 = self.velocity(&x, dim)?;
            let k2 = self.velocity(&axpy(&x, half, &k1), dim)?;
            let k3 = self.velocity(&axpy(&x, half, &k2), dim)?;
            let k4 = self.velocity(&axpy(&x, h, &k3), dim)?;
            for i in 0..x.len() {
                x[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
            }
        }
        Ok(x)
    }

    /// Integrates over `[0, span]` from `mu`, refining until halving the step
    /// moves no coordinate by more than the tolerance.
    pub fn advance(&self, mu: &ParticleMeasure<T>, span: T) -> Result<ParticleMeasure<T>> {
        if !(span >= T::zero() && span.is_finite()) {
            return Err(Error::InvalidParameter(format!("time must be nonnegative, got {span}")));
        }
        if span == T::zero() || self.functional.is_zero() {
            return Ok(mu.clone());
        }
        let mut steps = (span / self.dt).ceil().to_usize().unwrap_or(1).max(1);
        let mut coarse = self.rk4(mu.coords(), mu.dim(), span, steps)?;
        let mut difference = T::infinity();
        for _ in 0..MAX_REFINEMENTS {
            let fine = self.rk4(mu.coords(), mu.dim(), span, 2 * steps)?;
            difference = coarse
                .iter()
                .zip(&fine)
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
            if difference <= self.tolerance {
                return ParticleMeasure::from_flat(mu.dim(), fine);
            }
            coarse = fine;
            steps *= 2;
        }
        Err(Error::IntegratorNotConverged { difference: difference.as_f64() })
    }

    /// Samples the flow at nondecreasing `times`, integrating between them.
    pub fn trajectory(&self, mu0: &ParticleMeasure<T>, times: &[T]) -> Result<Vec<ParticleMeasure<T>>> {
        let mut out = Vec::with_capacity(times.len());
        let mut current = mu0.clone();
        let mut now = T::zero();
        for &t in times {
            if t < now {
                return Err(Error::InvalidParameter("sample times must be nondecreasing".into()));
            }
            current = self.advance(&current, t - now)?;
            now = t;
            out.push(current.clone());
        }
        Ok(out)
    }
}

/// `μ(t)` for the particle ODE started at `mu0`.
pub fn reference_flow<T: Scalar>(e: &Functional<T>, mu0: &ParticleMeasure<T>, t: T, dt: T) -> Result<ParticleMeasure<T>> {
    ReferenceFlow::new(e.clone(), dt)?.advance(mu0, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentRow<T> {
    pub n: usize,
    pub t: T,
    pub error: T,
    pub bound: T,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable<T> {
    pub rows: Vec<ExperimentRow<T>>,
    /// Least-squares slope of `log error` against `log n`; `None` if any error vanishes.
    pub slope_fit: Option<T>,
}

impl<T: Scalar> ExperimentTable<T> {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// CSV with columns `n,t,error,bound,pass,slope_fit`.
    pub fn to_csv(&self) -> String {
        let slope = self.slope_fit.map_or_else(|| "nan".to_string(), fmt_scalar);
        let mut out = String::from("n,t,error,bound,pass,slope_fit\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.n,
                fmt_scalar(r.t),
                fmt_scalar(r.error),
                fmt_scalar(r.bound),
                r.pass,
                slope
            );
        }
        out
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope<T: Scalar>(points: &[(T, T)]) -> Option<T> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > T::zero() && y > T::zero())) {
        return None;
    }
    let m = T::from_usize_lossy(points.len());
    let lx: Vec<T> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<T> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().fold(T::zero(), |a, &b| a + b) / m;
    let my = ly.iter().fold(T::zero(), |a, &b| a + b) / m;
    let sxy = lx.iter().zip(&ly).fold(T::zero(), |a, (&x, &y)| a + (x - mx) * (y - my));
    let sxx = lx.iter().fold(T::zero(), |a, &x| a + (x - mx) * (x - mx));
    if sxx == T::zero() {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// `√3 (t/√n) e^{3λ⁻t} |∂E|(μ)`.
pub fn exponential_formula_bound<T: Scalar>(lambda_minus: T, t: T, n: usize, slope: T) -> T {
    T::lit(3.0).sqrt() * t / T::from_usize_lossy(n).sqrt() * (T::lit(3.0) * lambda_minus * t).exp() * slope
}

/// `2 (|h|² + 3|h|t)^{1/2} e^{4λ⁻t} |∂E|(μ)`.
pub fn varying_formula_bound<T: Scalar>(lambda_minus: T, t: T, hmax: T, slope: T) -> T {
    T::lit(2.0) * (hmax * hmax + T::lit(3.0) * hmax * t).sqrt() * (T::lit(4.0) * lambda_minus * t).exp() * slope
}

/// `W₂(J^n_{t/n}μ0, μ(t))` against the exponential-formula bound for each `n`.
pub fn exponential_formula_experiment<T: Scalar>(
    e: &Functional<T>,
    mu0: &ParticleMeasure<T>,
    t: T,
    n_list: &[usize],
) -> Result<ExperimentTable<T>> {
    let lm = e.lambda_minus();
    for &n in n_list {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if T::lit(2.0) * lm * t >= T::from_usize_lossy(n) {
            return Err(Error::HypothesisViolated(format!("n = {n} must exceed 2 lambda^- t = {}", T::lit(2.0) * lm * t)));
        }
    }
    let truth = reference_flow(e, mu0, t, T::lit(DEFAULT_DT))?;
    let slope0 = e.metric_slope(mu0)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let approx = if t == T::zero() {
            mu0.clone()
        } else {
            discrete_flow(e, t / T::from_usize_lossy(n), n, mu0)?.last().clone()
        };
        let error = wasserstein_distance(&approx, &truth)?;
        let bound = exponential_formula_bound(lm, t, n, slope0);
        rows.push(ExperimentRow { n, t, error, bound, pass: error <= bound + T::tol(1e-9) });
    }
    let slope_fit = log_log_slope(&rows.iter().map(|r| (T::from_usize_lossy(r.n), r.error)).collect::<Vec<_>>());
    Ok(ExperimentTable { rows, slope_fit })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaryingExperiment<T> {
    pub hmax: T,
    pub steps: usize,
    pub error: T,
    pub bound: T,
}

/// `W₂(Π J_{h_k} μ0, μ(t))` for a partition of `[0, t]`.
pub fn varying_formula_experiment<T: Scalar>(
    e: &Functional<T>,
    mu0: &ParticleMeasure<T>,
    steps: &[T],
) -> Result<VaryingExperiment<T>> {
    let hmax = steps.iter().fold(T::zero(), |m, &h| m.max(h));
    let lm = e.lambda_minus();
    if T::lit(2.0) * lm * hmax > T::one() {
        return Err(Error::HypothesisViolated(format!("max step {hmax} exceeds 1/(2 lambda^-)")));
    }
    let t = steps.iter().fold(T::zero(), |s, &h| s + h);
    let approx = varying_flow(e, steps, mu0)?;
    let truth = reference_flow(e, mu0, t, T::lit(DEFAULT_DT))?;
    Ok(VaryingExperiment {
        hmax,
        steps: steps.len(),
        error: wasserstein_distance(approx.last(), &truth)?,
        bound: varying_formula_bound(lm, t, hmax, e.metric_slope(mu0)?),
    })
}

/// One side-by-side comparison; passes when `lhs ≤ rhs + tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Scalar> Comparison<T> {
    pub fn slack(&self) -> T {
        self.rhs - self.lhs
    }
    pub fn holds(&self, tol: T) -> bool {
        self.slack() >= -tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupReport<T> {
    /// `W₂(S(t_k)μ0, μ0)` against the Lipschitz bound, along `t_k = t 2^{-k}`.
    pub continuity: Vec<(T, Comparison<T>)>,
    /// `W₂(S(t+s)μ0, S(t)S(s)μ0)` against zero.
    pub semigroup: Comparison<T>,
    /// `W₂(S(t)μ0, S(t)ν0)` against `e^{-λt} W₂(μ0, ν0)`.
    pub contraction: Comparison<T>,
    /// `W₂(μ(t), μ(s))` against `|t-s| e^{λ⁻t} e^{λ⁻s} |∂E|(μ0)`.
    pub lipschitz: Comparison<T>,
}

impl<T: Scalar> SemigroupReport<T> {
    pub fn comparisons(&self) -> impl Iterator<Item = &Comparison<T>> {
        self.continuity
            .iter()
            .map(|(_, c)| c)
            .chain([&self.semigroup, &self.contraction, &self.lipschitz])
    }

    pub fn worst_slack(&self) -> T {
        self.comparisons().map(Comparison::slack).fold(T::infinity(), T::min)
    }

    pub fn passes(&self, tol: T) -> bool {
        self.comparisons().all(|c| c.holds(tol))
    }
}

pub fn semigroup_checks<T: Scalar>(
    e: &Functional<T>,
    mu0: &ParticleMeasure<T>,
    nu0: &ParticleMeasure<T>,
    t: T,
    s: T,
    dt: T,
) -> Result<SemigroupReport<T>> {
    let flow = ReferenceFlow::new(e.clone(), dt)?;
    let lm = e.lambda_minus();
    let slope0 = e.metric_slope(mu0)?;
    let mut continuity = Vec::new();
    let mut tk = t;
    for _ in 0..8 {
        let w = wasserstein_distance(&flow.advance(mu0, tk)?, mu0)?;
        continuity.push((tk, Comparison { lhs: w, rhs: tk * (lm * tk).exp() * slope0 }));
        tk /= T::lit(2.0);
    }
    let at_s = flow.advance(mu0, s)?;
    let at_t = flow.advance(mu0, t)?;
    let semigroup = Comparison {
        lhs: wasserstein_distance(&flow.advance(mu0, t + s)?, &flow.advance(&at_s, t)?)?,
        rhs: T::zero(),
    };
    let contraction = Comparison {
        lhs: wasserstein_distance(&at_t, &flow.advance(nu0, t)?)?,
        rhs: (-e.lambda() * t).exp() * wasserstein_distance(mu0, nu0)?,
    };
    let lipschitz = Comparison {
        lhs: wasserstein_distance(&at_t, &at_s)?,
        rhs: (t - s).abs() * (lm * t).exp() * (lm * s).exp() * slope0,
    };
    Ok(SemigroupReport { continuity, semigroup, contraction, lipschitz })
}

/// `E(μ(0)) - E(μ(t)) - ∫_0^t |∂E|²(μ(s)) ds`, the integral by composite
/// Simpson on at least 64 intervals.
pub fn energy_dissipation_check<T: Scalar>(e: &Functional<T>, mu0: &ParticleMeasure<T>, t: T, n: usize) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let n = n.max(64).next_multiple_of(2);
    let h = t / T::from_usize_lossy(n);
    let times: Vec<T> = (0..=n).map(|k| h * T::from_usize_lossy(k)).collect();
    let flow = ReferenceFlow::new(e.clone(), T::lit(DEFAULT_DT))?;
    let path = flow.trajectory(mu0, &times)?;
    let mut integral = T::zero();
    for (k, mu) in path.iter().enumerate() {
        let w = if k == 0 || k == n {
            T::one()
        } else if k % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        let g = e.metric_slope(mu)?;
        integral += w * g * g;
    }
    integral = integral * h / T::lit(3.0);
    Ok(e.energy(mu0)? - e.energy(&path[n])? - integral)
}

/// Central-difference check of
/// `(1/2) d/dt W₂²(μ(t),ν) + (λ/2) W₂²(μ(t),ν) ≤ E(ν) - E(μ(t))` at `probes`
/// equally spaced times in `(0, t]`. Returns one comparison per probe time.
pub fn evi_along_flow<T: Scalar>(
    e: &Functional<T>,
    mu0: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
    t: T,
    probes: usize,
) -> Result<Vec<(T, Comparison<T>)>> {
    if !(t > T::zero()) || probes == 0 {
        return Err(Error::InvalidParameter("need t > 0 and at least one probe".into()));
    }
    let step = t / T::from_usize_lossy(probes);
    let fd = step.min(T::one()) * T::lit(1e-3);
    let mut times = Vec::with_capacity(3 * probes);
    for k in 1..=probes {
        let tk = step * T::from_usize_lossy(k);
        times.extend([tk - fd, tk, tk + fd]);
    }
    let flow = ReferenceFlow::new(e.clone(), T::lit(DEFAULT_DT))?;
    let path = flow.trajectory(mu0, &times)?;
    let e_nu = e.energy(nu)?;
    let lambda = e.lambda();
    let mut out = Vec::with_capacity(probes);
    for k in 0..probes {
        let w = |m: &ParticleMeasure<T>| -> Result<T> { Ok(wasserstein_distance(m, nu)?.powi(2)) };
        let (before, at, after) = (w(&path[3 * k])?, w(&path[3 * k + 1])?, w(&path[3 * k + 2])?);
        let derivative = (after - before) / (T::lit(2.0) * fd);
        let lhs = derivative / T::lit(2.0) + lambda / T::lit(2.0) * at;
        let rhs = e_nu - e.energy(&path[3 * k + 1])?;
        out.push((times[3 * k + 1], Comparison { lhs, rhs }));
    }
    Ok(out)
}
