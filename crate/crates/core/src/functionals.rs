//! Particle energies: potential, interaction, and sums thereof.
//!
//! Every functional exposes its value, the canonical gradient field (a strong
//! subdifferential), the metric slope, a convexity modulus along generalized
//! geodesics, and Hessian-vector products used by the proximal solver.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::BasedPlan;
use crate::measures::ParticleMeasure;
use crate::scalar::{dot, norm_sq, Scalar};
use crate::transport::optimal_assignment;

/// External potential `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential<T> {
    /// `k|x|²/2`, `k ≥ 0`.
    Quadratic { k: T },
    /// `a cos(x₁)`.
    Cosine { a: T },
    /// `|x|²/2 + cos(x₁)`.
    QuadraticCosine,
}

/// Even interaction kernel `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel<T> {
    /// `k|z|²/2`, `k ≥ 0`.
    Quadratic { k: T },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Functional<T> {
    Zero,
    Potential(Potential<T>),
    Interaction(Kernel<T>),
    Sum(Vec<Functional<T>>),
}

impl<T: Scalar> Potential<T> {
    pub fn lambda(&self) -> T {
        match *self {
            Potential::Quadratic { k } => k,
            Potential::Cosine { a } => -a.abs(),
            // 1 - cos(x₁) ≥ 0
            Potential::QuadraticCosine => T::zero(),
        }
    }

    pub fn value(&self, x: &[T]) -> T {
        match *self {
            Potential::Quadratic { k } => k * norm_sq(x) / T::lit(2.0),
            Potential::Cosine { a } => a * x[0].cos(),
            Potential::QuadraticCosine => norm_sq(x) / T::lit(2.0) + x[0].cos(),
        }
    }

    /// Adds `∇V(x)` into `out`.
    pub fn add_gradient(&self, x: &[T], out: &mut [T]) {
        match *self {
            Potential::Quadratic { k } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += k * xi;
                }
            }
            Potential::Cosine { a } => out[0] -= a * x[0].sin(),
            Potential::QuadraticCosine => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += xi;
                }
                out[0] -= x[0].sin();
            }
        }
    }

    /// Adds `∇²V(x) v` into `out`.
    pub fn add_hessian_vec(&self, x: &[T], v: &[T], out: &mut [T]) {
        match *self {
            Potential::Quadratic { k } => {
                for (o, &vi) in out.iter_mut().zip(v) {
                    *o += k * vi;
                }
            }
            Potential::Cosine { a } => out[0] -= a * x[0].cos() * v[0],
            Potential::QuadraticCosine => {
                for (o, &vi) in out.iter_mut().zip(v) {
                    *o += vi;
                }
                out[0] -= x[0].cos() * v[0];
            }
        }
    }
}

impl<T: Scalar> Kernel<T> {
    pub fn lambda(&self) -> T {
        T::zero()
    }

    pub fn value(&self, z: &[T]) -> T {
        match *self {
            Kernel::Quadratic { k } => k * norm_sq(z) / T::lit(2.0),
        }
    }

    /// Adds `s ∇W(z)` into `out`.
    pub fn add_gradient(&self, z: &[T], s: T, out: &mut [T]) {
        match *self {
            Kernel::Quadratic { k } => {
                for (o, &zi) in out.iter_mut().zip(z) {
                    *o += s * k * zi;
                }
            }
        }
    }

    /// Adds `s ∇²W(z) v` into `out`.
    pub fn add_hessian_vec(&self, _z: &[T], v: &[T], s: T, out: &mut [T]) {
        match *self {
            Kernel::Quadratic { k } => {
                for (o, &vi) in out.iter_mut().zip(v) {
                    *o += s * k * vi;
                }
            }
        }
    }

    /// `min W`, attained at `z = 0`.
    fn minimum(&self) -> T {
        T::zero()
    }
}

/// A vector field on the atoms of a measure, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdifferentialField<T> {
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> SubdifferentialField<T> {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self { dim, values: vec![T::zero(); n * dim] }
    }

    pub fn from_flat(dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "field of length {} is not a multiple of dimension {dim}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoordinate { atom: k / dim, axis: k % dim });
        }
        Ok(Self { dim, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vector(&self, i: usize) -> &[T] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `‖ξ‖_{L²(μ)}`.
    pub fn l2_norm(&self) -> T {
        (norm_sq(&self.values) / T::from_usize_lossy(self.len())).sqrt()
    }

    pub fn max_norm(&self) -> T {
        (0..self.len())
            .map(|i| norm_sq(self.vector(i)).sqrt())
            .fold(T::zero(), T::max)
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { dim: self.dim, values: self.values.iter().map(|&v| v * c).collect() }
    }

    /// Field whose atom `i` is atom `order[i]` of `self`.
    pub fn reindexed(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for &j in order {
            values.extend_from_slice(self.vector(j));
        }
        Self { dim: self.dim, values }
    }

    fn check_base(&self, mu: &ParticleMeasure<T>) -> Result<()> {
        if self.dim != mu.dim() {
            return Err(Error::DimensionMismatch { expected: mu.dim(), found: self.dim });
        }
        if self.len() != mu.len() {
            return Err(Error::SizeMismatch(mu.len(), self.len()));
        }
        Ok(())
    }
}

fn check_nonnegative<T: Scalar>(name: &str, k: T) -> Result<()> {
    if k.is_finite() && k >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} coefficient must be finite and nonnegative, got {k}")))
    }
}

impl<T: Scalar> Functional<T> {
    pub fn quadratic_potential(k: T) -> Result<Self> {
        check_nonnegative("quadratic", k)?;
        Ok(Functional::Potential(Potential::Quadratic { k }))
    }

    pub fn cosine_potential(a: T) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidParameter(format!("cosine amplitude {a} is not finite")));
        }
        Ok(Functional::Potential(Potential::Cosine { a }))
    }

    pub fn quadratic_interaction(k: T) -> Result<Self> {
        check_nonnegative("interaction", k)?;
        Ok(Functional::Interaction(Kernel::Quadratic { k }))
    }

    /// Convexity modulus along generalized geodesics; additive over sums.
    pub fn lambda(&self) -> T {
        match self {
            Functional::Zero => T::zero(),
            Functional::Potential(v) => v.lambda(),
            Functional::Interaction(w) => w.lambda(),
            Functional::Sum(parts) => parts.iter().map(Functional::lambda).fold(T::zero(), |a, b| a + b),
        }
    }

    /// `λ⁻ = max(0, -λ)`.
    pub fn lambda_minus(&self) -> T {
        (-self.lambda()).max(T::zero())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Functional::Zero => true,
            Functional::Sum(parts) => parts.iter().all(Functional::is_zero),
            _ => false,
        }
    }

    fn potentials(&self, out: &mut Vec<Potential<T>>) {
        match self {
            Functional::Potential(v) => out.push(*v),
            Functional::Sum(parts) => parts.iter().for_each(|p| p.potentials(out)),
            _ => {}
        }
    }

    pub fn energy(&self, mu: &ParticleMeasure<T>) -> Result<T> {
        let e = self.energy_unchecked(mu);
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::EvaluationError(format!("energy of {self} is not finite")))
        }
    }

    fn energy_unchecked(&self, mu: &ParticleMeasure<T>) -> T {
        let n = T::from_usize_lossy(mu.len());
        match self {
            Functional::Zero => T::zero(),
            Functional::Potential(v) => mu.points().map(|x| v.value(x)).fold(T::zero(), |a, b| a + b) / n,
            Functional::Interaction(w) => {
                let d = mu.dim();
                let mut z = vec![T::zero(); d];
                let mut total = T::zero();
                for i in 0..mu.len() {
                    for j in (i + 1)..mu.len() {
                        for (zk, (&a, &b)) in z.iter_mut().zip(mu.point(i).iter().zip(mu.point(j))) {
                            *zk = a - b;
                        }
                        total += w.value(&z);
                    }
                }
                // ordered pairs (i,j) and (j,i) plus the diagonal W(0)
                let diag = n * w.value(&vec![T::zero(); d]);
                (T::lit(2.0) * total + diag) / (T::lit(2.0) * n * n)
            }
            Functional::Sum(parts) => parts.iter().map(|p| p.energy_unchecked(mu)).fold(T::zero(), |a, b| a + b),
        }
    }

    /// The canonical gradient field `ξ_i`, a strong subdifferential.
    pub fn strong_subdifferential(&self, mu: &ParticleMeasure<T>) -> Result<SubdifferentialField<T>> {
        let mut values = vec![T::zero(); mu.coords().len()];
        self.add_gradient(mu, &mut values);
        SubdifferentialField::from_flat(mu.dim(), values)
            .map_err(|_| Error::EvaluationError(format!("gradient of {self} is not finite")))
    }

    /// Adds the gradient field into a flat buffer shaped like `mu.coords()`.
    pub(crate) fn add_gradient(&self, mu: &ParticleMeasure<T>, out: &mut [T]) {
        let d = mu.dim();
        match self {
            Functional::Zero => {}
            Functional::Potential(v) => {
                for (i, x) in mu.points().enumerate() {
                    v.add_gradient(x, &mut out[i * d..(i + 1) * d]);
                }
            }
            Functional::Interaction(w) => {
                let s = T::one() / T::from_usize_lossy(mu.len());
                let mut z = vec![T::zero(); d];
                for i in 0..mu.len() {
                    for j in 0..mu.len() {
                        if i == j {
                            continue;
                        }
                        for (zk, (&a, &b)) in z.iter_mut().zip(mu.point(i).iter().zip(mu.point(j))) {
                            *zk = a - b;
                        }
                        w.add_gradient(&z, s, &mut out[i * d..(i + 1) * d]);
                    }
                }
            }
            Functional::Sum(parts) => parts.iter().for_each(|p| p.add_gradient(mu, out)),
        }
    }

    /// Adds `H v` where `H` is `N` times the Hessian of the energy in atom positions.
    pub(crate) fn add_hessian_vec(&self, mu: &ParticleMeasure<T>, v: &[T], out: &mut [T]) {
        let d = mu.dim();
        match self {
            Functional::Zero => {}
            Functional::Potential(pot) => {
                for (i, x) in mu.points().enumerate() {
                    let r = i * d..(i + 1) * d;
                    pot.add_hessian_vec(x, &v[r.clone()], &mut out[r]);
                }
            }
            Functional::Interaction(w) => {
                let s = T::one() / T::from_usize_lossy(mu.len());
                let mut z = vec![T::zero(); d];
                let mut dv = vec![T::zero(); d];
                for i in 0..mu.len() {
                    for j in 0..mu.len() {
                        if i == j {
                            continue;
                        }
                        for k in 0..d {
                            z[k] = mu.point(i)[k] - mu.point(j)[k];
                            dv[k] = v[i * d + k] - v[j * d + k];
                        }
                        w.add_hessian_vec(&z, &dv, s, &mut out[i * d..(i + 1) * d]);
                    }
                }
            }
            Functional::Sum(parts) => parts.iter().for_each(|p| p.add_hessian_vec(mu, v, out)),
        }
    }

    /// `|∂E|(μ)`, the `L²(μ)` norm of the gradient field.
    pub fn metric_slope(&self, mu: &ParticleMeasure<T>) -> Result<T> {
        Ok(self.strong_subdifferential(mu)?.l2_norm())
    }

    /// `inf E` over measures, or `None` when not available in closed form.
    ///
    /// Coincident atoms at a minimizer of the total potential attain the
    /// infimum whenever every kernel is minimized at the origin.
    pub fn infimum(&self) -> Option<T> {
        if self.is_zero() {
            return Some(T::zero());
        }
        let mut pots = Vec::new();
        self.potentials(&mut pots);
        let kernel_min = self.kernel_minimum();
        if pots.is_empty() {
            return Some(kernel_min);
        }
        minimize_potential_sum(&pots).map(|v| v + kernel_min)
    }

    fn kernel_minimum(&self) -> T {
        match self {
            Functional::Interaction(w) => w.minimum() / T::lit(2.0),
            Functional::Sum(parts) => parts.iter().map(Functional::kernel_minimum).fold(T::zero(), |a, b| a + b),
            _ => T::zero(),
        }
    }
}

/// Minimum of `Σ V_k` over `R^d`. Quadratic terms have `k ≥ 0`, so a minimizer
/// lies on the first axis and the search is one-dimensional.
fn minimize_potential_sum<T: Scalar>(pots: &[Potential<T>]) -> Option<T> {
    let mut k = T::zero();
    let mut a = T::zero();
    for p in pots {
        match *p {
            Potential::Quadratic { k: q } => k += q,
            Potential::Cosine { a: c } => a += c,
            Potential::QuadraticCosine => {
                k += T::one();
                a += T::one();
            }
        }
    }
    if a == T::zero() {
        return Some(T::zero());
    }
    if k == T::zero() {
        return Some(-a.abs());
    }
    // f(s) = k s²/2 + a cos s ≥ k s²/2 - |a| and f(0) ≤ |a|, so minimizers have |s| ≤ 2(|a|/k)^{1/2}.
    let f = |s: T| k * s * s / T::lit(2.0) + a * s.cos();
    let bound = (T::lit(2.0) * a.abs() / k).sqrt() * T::lit(2.0) + T::one();
    let pi = T::lit(std::f64::consts::PI);
    let cells = ((bound / pi).ceil().to_usize()?.max(1)) * 16;
    let mut best = f(T::zero());
    for c in 0..=2 * cells {
        let mut s = -bound + bound * T::from_usize_lossy(c) / T::from_usize_lossy(cells);
        // safeguarded Newton on f'(s) = k s - a sin s
        for _ in 0..100 {
            let g = k * s - a * s.sin();
            let h = k - a * s.cos();
            if h <= T::zero() {
                break;
            }
            let step = g / h;
            s -= step;
            if step.abs() <= T::epsilon() * (T::one() + s.abs()) {
                break;
            }
        }
        best = best.min(f(s));
    }
    Some(best)
}

/// Worst slack of `E(ν) - E(μ) - ⟨ξ, t_μ^ν - id⟩_{L²(μ)} - (λ/2)W₂²(μ,ν)` over probes.
pub fn check_subdifferential<T: Scalar>(
    e: &Functional<T>,
    mu: &ParticleMeasure<T>,
    xi: &SubdifferentialField<T>,
    probes: &[ParticleMeasure<T>],
) -> Result<T> {
    xi.check_base(mu)?;
    let e_mu = e.energy(mu)?;
    let lambda = e.lambda();
    let n = T::from_usize_lossy(mu.len());
    let mut worst = T::infinity();
    for nu in probes {
        let a = optimal_assignment(mu, nu)?.require_unique()?;
        let mut pairing = T::zero();
        let mut w2 = T::zero();
        for (i, &j) in a.perm.iter().enumerate() {
            let (x, y) = (mu.point(i), nu.point(j));
            for k in 0..mu.dim() {
                let dk = y[k] - x[k];
                pairing += xi.vector(i)[k] * dk;
                w2 += dk * dk;
            }
        }
        let slack = e.energy(nu)? - e_mu - pairing / n - lambda / T::lit(2.0) * w2 / n;
        worst = worst.min(slack);
    }
    Ok(worst)
}

/// Worst slack of the `W_{2,ω}` subdifferential inequality for a field on `ω`:
/// `E(ν) - E(μ) - ⟨ξ, t_ω^ν - t_ω^μ⟩_{L²(ω)} - (λ/2)W²_{2,ω}(μ,ν)`.
pub fn check_base_subdifferential<T: Scalar>(
    e: &Functional<T>,
    omega: &ParticleMeasure<T>,
    mu: &ParticleMeasure<T>,
    xi: &SubdifferentialField<T>,
    probes: &[ParticleMeasure<T>],
) -> Result<T> {
    xi.check_base(omega)?;
    let e_mu = e.energy(mu)?;
    let lambda = e.lambda();
    let n = T::from_usize_lossy(omega.len());
    let mut worst = T::infinity();
    for nu in probes {
        let plan = BasedPlan::unique(omega, mu, nu)?;
        let mut pairing = T::zero();
        let mut w2 = T::zero();
        for i in 0..omega.len() {
            let (x, y) = (plan.start(i), plan.end(i));
            for k in 0..omega.dim() {
                let dk = y[k] - x[k];
                pairing += xi.vector(i)[k] * dk;
                w2 += dk * dk;
            }
        }
        let slack = e.energy(nu)? - e_mu - pairing / n - lambda / T::lit(2.0) * w2 / n;
        worst = worst.min(slack);
    }
    Ok(worst)
}

/// Worst `|slack|` of `F(ν) - F(μ) - ⟨2(t_ω^μ - id), t_ω^ν - t_ω^μ⟩_{L²(ω)} - W²_{2,ω}(μ,ν)`
/// for `F = W₂²(ω, ·)`; the identity is exact, so the slack should vanish.
pub fn check_w2_squared_subdifferential<T: Scalar>(
    omega: &ParticleMeasure<T>,
    mu: &ParticleMeasure<T>,
    probes: &[ParticleMeasure<T>],
) -> Result<T> {
    let n = T::from_usize_lossy(omega.len());
    let f_mu = optimal_assignment(omega, mu)?.require_unique()?.total_cost / n;
    let mut worst = T::zero();
    for nu in probes {
        let plan = BasedPlan::unique(omega, mu, nu)?;
        let f_nu = optimal_assignment(omega, nu)?.total_cost / n;
        let mut pairing = T::zero();
        let mut w2 = T::zero();
        for i in 0..omega.len() {
            let (w, x, y) = (omega.point(i), plan.start(i), plan.end(i));
            for k in 0..omega.dim() {
                let dk = y[k] - x[k];
                pairing += T::lit(2.0) * (x[k] - w[k]) * dk;
                w2 += dk * dk;
            }
        }
        let slack = f_nu - f_mu - pairing / n - w2 / n;
        if slack.abs() > worst.abs() {
            worst = slack;
        }
    }
    Ok(worst)
}

/// `ξ ∘ t_ω^μ`: the field on `μ` pulled back to the atoms of `ω`.
pub fn compose_to_base<T: Scalar>(
    xi: &SubdifferentialField<T>,
    mu: &ParticleMeasure<T>,
    omega: &ParticleMeasure<T>,
) -> Result<SubdifferentialField<T>> {
    xi.check_base(mu)?;
    let a = optimal_assignment(omega, mu)?.require_unique()?;
    Ok(xi.reindexed(&a.perm))
}

/// Smallest directional second derivative `vᵀ∇²V v` minus `λ` over the given
/// points and unit directions, by central differences of the gradient.
pub fn hessian_bound_margin<T: Scalar>(
    e: &Functional<T>,
    points: &ParticleMeasure<T>,
    directions: &[Vec<T>],
    h: T,
) -> Result<T> {
    let lambda = e.lambda();
    let mut worst = T::infinity();
    for dir in directions {
        if dir.len() != points.dim() {
            return Err(Error::DimensionMismatch { expected: points.dim(), found: dir.len() });
        }
        let nrm = norm_sq(dir).sqrt();
        let unit: Vec<T> = dir.iter().map(|&c| c / nrm).collect();
        // move every atom along the same direction: the interaction part is
        // translation invariant, so this probes the potential Hessian
        let shift = |s: T| points.translate(&unit.iter().map(|&c| c * s).collect::<Vec<_>>());
        let gp = e.strong_subdifferential(&shift(h)?)?;
        let gm = e.strong_subdifferential(&shift(-h)?)?;
        for i in 0..points.len() {
            let diff: Vec<T> = gp.vector(i).iter().zip(gm.vector(i)).map(|(&a, &b)| (a - b) / (T::lit(2.0) * h)).collect();
            worst = worst.min(dot(&diff, &unit) - lambda);
        }
    }
    Ok(worst)
}

fn fmt_param<T: Scalar>(x: T) -> String {
    format!("{x}")
}

impl<T: Scalar> fmt::Display for Functional<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Zero => write!(f, "zero"),
            Functional::Potential(Potential::Quadratic { k }) => write!(f, "potential:quadratic({})", fmt_param(*k)),
            Functional::Potential(Potential::Cosine { a }) => write!(f, "potential:cosine({})", fmt_param(*a)),
            Functional::Potential(Potential::QuadraticCosine) => write!(f, "potential:quadratic_cosine"),
            Functional::Interaction(Kernel::Quadratic { k }) => write!(f, "interaction:quadratic({})", fmt_param(*k)),
            Functional::Sum(parts) => {
                write!(f, "sum:[")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Splits on commas that are not nested in brackets or parentheses.
fn split_top_level(s: &str) -> Result<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(Error::Parse(format!("unbalanced brackets in '{s}'")));
        }
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced brackets in '{s}'")));
    }
    parts.push(s[start..].trim());
    Ok(parts)
}

fn parse_call<T: Scalar>(s: &str) -> Result<(&str, Option<T>)> {
    match s.find('(') {
        None => Ok((s, None)),
        Some(open) => {
            let inner = s[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("missing ')' in '{s}'")))?;
            let v = inner
                .trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("bad parameter '{inner}'")))?;
            Ok((&s[..open], Some(v)))
        }
    }
}

impl<T: Scalar> FromStr for Functional<T> {
    type Err = Error;

    /// Grammar: `zero | potential:quadratic[(k)] | potential:cosine[(a)] |
    /// potential:quadratic_cosine | interaction:quadratic[(k)] | sum:[f, ...]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(Functional::Zero);
        }
        if let Some(rest) = s.strip_prefix("sum:") {
            let inner = rest
                .trim()
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(|| Error::Parse(format!("sum must be written sum:[...], got '{s}'")))?;
            if inner.trim().is_empty() {
                return Err(Error::Parse("empty sum".into()));
            }
            let parts = split_top_level(inner)?
                .into_iter()
                .map(str::parse)
                .collect::<Result<Vec<_>>>()?;
            return Ok(Functional::Sum(parts));
        }
        let (head, param) = parse_call::<T>(s)?;
        let p = |default: f64| param.unwrap_or_else(|| T::lit(default));
        match head.trim() {
            "potential:quadratic" => Functional::quadratic_potential(p(1.0)),
            "potential:cosine" => Functional::cosine_potential(p(1.0)),
            "potential:quadratic_cosine" if param.is_none() => Ok(Functional::Potential(Potential::QuadraticCosine)),
            "interaction:quadratic" => Functional::quadratic_interaction(p(1.0)),
            other => Err(Error::Parse(format!("unknown functional '{other}'"))),
        }
    }
}
