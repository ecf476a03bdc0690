//! The proximal (minimizing movement) step `J_τ`.
//!
//! For a fixed pairing of atoms the quadratic perturbation is a smooth,
//! strictly convex function of the atom positions, minimized by damped
//! Newton-CG. The pairing is then recomputed optimally, and the loop stops once
//! it is stable. A step is accepted only if the Euler-Lagrange residual
//! `max_i |(x_i - y_i)/τ - ξ_i(ν)|` is below the gate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::measures::ParticleMeasure;
use crate::scalar::{dist_sq, Scalar};
use crate::transport::{optimal_assignment, wasserstein_distance_sq};

pub const EL_TOLERANCE: f64 = 1e-10;
pub const GRADIENT_TOLERANCE: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 10_000;
const MAX_ASSIGNMENT_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxOptions {
    pub el_tolerance: f64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ProxOptions {
    fn default() -> Self {
        Self {
            el_tolerance: EL_TOLERANCE,
            gradient_tolerance: GRADIENT_TOLERANCE,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

/// Output of a certified proximal step. Atom `i` of `output` is the image of
/// atom `i` of `input` under the optimal map.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult<T> {
    pub input: ParticleMeasure<T>,
    pub tau: T,
    pub output: ParticleMeasure<T>,
    pub el_residual: T,
    pub phi_value: T,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxRecord {
    pub tau: f64,
    pub n_atoms: usize,
    pub dim: usize,
    pub el_residual: f64,
    pub phi_value: f64,
    pub inner_iterations: usize,
    pub output: Vec<Vec<f64>>,
}

impl<T: Scalar> ProxResult<T> {
    pub fn record(&self) -> ProxRecord {
        ProxRecord {
            tau: self.tau.as_f64(),
            n_atoms: self.output.len(),
            dim: self.output.dim(),
            el_residual: self.el_residual.as_f64(),
            phi_value: self.phi_value.as_f64(),
            inner_iterations: self.inner_iterations,
            output: self
                .output
                .points()
                .map(|p| p.iter().map(|v| v.as_f64()).collect())
                .collect(),
        }
    }

    /// `W₂²(μ, J_τμ)`; the output is indexed by the optimal map.
    pub fn step_w2_sq(&self) -> T {
        let n = T::from_usize_lossy(self.input.len());
        self.input
            .points()
            .zip(self.output.points())
            .map(|(a, b)| dist_sq(a, b))
            .fold(T::zero(), |s, v| s + v)
            / n
    }
}

/// `Φ(τ,μ;ν) = W₂²(μ,ν)/(2τ) + E(ν)`.
pub fn quadratic_perturbation<T: Scalar>(
    e: &Functional<T>,
    tau: T,
    mu: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
) -> Result<T> {
    check_tau(tau)?;
    Ok(wasserstein_distance_sq(mu, nu)? / (T::lit(2.0) * tau) + e.energy(nu)?)
}

fn check_tau<T: Scalar>(tau: T) -> Result<()> {
    if tau.is_finite() && tau > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time step must be positive and finite, got {tau}")))
    }
}

/// Rejects `τ ≥ 1/λ⁻`.
pub fn check_step<T: Scalar>(e: &Functional<T>, tau: T) -> Result<()> {
    check_tau(tau)?;
    let lm = e.lambda_minus();
    if lm > T::zero() && tau * lm >= T::one() {
        return Err(Error::StepTooLarge { tau: tau.as_f64(), limit: (T::one() / lm).as_f64() });
    }
    Ok(())
}

/// Max-norm residual of `(t_ν^μ - id)/τ = ξ(ν)` over the atoms of `ν`.
pub fn el_residual<T: Scalar>(
    e: &Functional<T>,
    tau: T,
    mu: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
) -> Result<T> {
    check_tau(tau)?;
    let back = optimal_assignment(nu, mu)?.require_unique()?.perm;
    let xi = e.strong_subdifferential(nu)?;
    let mut worst = T::zero();
    for (i, &j) in back.iter().enumerate() {
        let r = nu
            .point(i)
            .iter()
            .zip(mu.point(j))
            .zip(xi.vector(i))
            .map(|((&y, &x), &g)| {
                let c = (x - y) / tau - g;
                c * c
            })
            .fold(T::zero(), |s, v| s + v)
            .sqrt();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Inner problem for a fixed pairing: atom `i` of `y` is paired with `anchor[i]`.
struct Inner<'a, T> {
    e: &'a Functional<T>,
    tau: T,
    dim: usize,
    anchor: Vec<T>,
}

impl<T: Scalar> Inner<'_, T> {
    /// `N Φ` restricted to the pairing.
    fn objective(&self, y: &ParticleMeasure<T>) -> Result<T> {
        let n = T::from_usize_lossy(y.len());
        let quad = y
            .coords()
            .iter()
            .zip(&self.anchor)
            .map(|(&a, &b)| (a - b) * (a - b))
            .fold(T::zero(), |s, v| s + v);
        Ok(quad / (T::lit(2.0) * self.tau) + n * self.e.energy(y)?)
    }

    /// `G_i = (y_i - x_i)/τ + ξ_i(y)`.
    fn gradient(&self, y: &ParticleMeasure<T>) -> Vec<T> {
        let mut g: Vec<T> = y
            .coords()
            .iter()
            .zip(&self.anchor)
            .map(|(&a, &b)| (a - b) / self.tau)
            .collect();
        self.e.add_gradient(y, &mut g);
        g
    }

    fn hessian_vec(&self, y: &ParticleMeasure<T>, v: &[T]) -> Vec<T> {
        let mut out: Vec<T> = v.iter().map(|&c| c / self.tau).collect();
        self.e.add_hessian_vec(y, v, &mut out);
        out
    }

    /// Conjugate gradients for `H s = -g`.
    fn newton_direction(&self, y: &ParticleMeasure<T>, g: &[T]) -> Vec<T> {
        let m = g.len();
        let mut s = vec![T::zero(); m];
        let mut r: Vec<T> = g.iter().map(|&c| -c).collect();
        let mut p = r.clone();
        let mut rr = dot_flat(&r, &r);
        let stop = rr * T::tol(1e-28);
        for _ in 0..(2 * m + 20) {
            if rr <= stop || rr == T::zero() {
                break;
            }
            let hp = self.hessian_vec(y, &p);
            let php = dot_flat(&p, &hp);
            if php <= T::zero() {
                break;
            }
            let a = rr / php;
            for k in 0..m {
                s[k] += a * p[k];
                r[k] -= a * hp[k];
            }
            let rr_new = dot_flat(&r, &r);
            let b = rr_new / rr;
            rr = rr_new;
            for k in 0..m {
                p[k] = r[k] + b * p[k];
            }
        }
        s
    }

    /// Damped Newton until the gradient max-norm is below `gtol` or stalls.
    fn solve(&self, mut y: ParticleMeasure<T>, gtol: T, budget: usize) -> Result<(ParticleMeasure<T>, usize)> {
        let mut g = self.gradient(&y);
        let mut gnorm = max_abs(&g);
        let mut f = self.objective(&y)?;
        let mut iters = 0;
        let mut stalls = 0;
        while gnorm > gtol && iters < budget {
            iters += 1;
            let s = self.newton_direction(&y, &g);
            let slope = dot_flat(&g, &s);
            let mut t = T::one();
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<T> = y.coords().iter().zip(&s).map(|(&a, &b)| a + t * b).collect();
                let cand = ParticleMeasure::from_flat(self.dim, trial)?;
                let fc = self.objective(&cand)?;
                let gc = self.gradient(&cand);
                let gcn = max_abs(&gc);
                let armijo = fc <= f + T::lit(1e-4) * t * slope;
                // near the optimum Φ is flat to rounding; fall back on the gradient
                if armijo || (t == T::one() && gcn < gnorm * T::lit(0.5)) {
                    accepted = Some((cand, fc, gc, gcn));
                    break;
                }
                t *= T::lit(0.5);
            }
            match accepted {
                Some((cand, fc, gc, gcn)) => {
                    if gcn >= gnorm {
                        stalls += 1;
                    } else {
                        stalls = 0;
                    }
                    y = cand;
                    f = fc;
                    g = gc;
                    gnorm = gcn;
                }
                None => stalls += 1,
            }
            if stalls >= 3 {
                break;
            }
        }
        Ok((y, iters))
    }
}

fn dot_flat<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).fold(T::zero(), |s, v| s + v)
}

fn max_abs<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
}

pub fn proximal_step<T: Scalar>(e: &Functional<T>, tau: T, mu: &ParticleMeasure<T>) -> Result<ProxResult<T>> {
    proximal_step_with(e, tau, mu, &ProxOptions::default())
}

pub fn proximal_step_with<T: Scalar>(
    e: &Functional<T>,
    tau: T,
    mu: &ParticleMeasure<T>,
    opts: &ProxOptions,
) -> Result<ProxResult<T>> {
    check_step(e, tau)?;
    let n = mu.len();
    let d = mu.dim();
    let gtol = T::tol(opts.gradient_tolerance);
    let el_tol = T::tol(opts.el_tolerance);
    // pairing[i]: the atom of μ paired with atom i of ν
    let mut pairing: Vec<usize> = (0..n).collect();
    let mut y = mu.clone();
    let mut total_iters = 0;
    let mut best: Option<(T, ParticleMeasure<T>, Vec<usize>)> = None;
    for _ in 0..MAX_ASSIGNMENT_ROUNDS {
        let mut anchor = Vec::with_capacity(n * d);
        for &j in &pairing {
            anchor.extend_from_slice(mu.point(j));
        }
        let inner = Inner { e, tau, dim: d, anchor };
        let budget = opts.max_iterations.saturating_sub(total_iters);
        let (y_new, it) = inner.solve(y, gtol, budget)?;
        total_iters += it;
        y = y_new;
        let next = optimal_assignment(&y, mu)?.perm;
        let phi = inner.objective(&y)? / T::from_usize_lossy(n);
        if best.as_ref().is_none_or(|(b, _, _)| phi < *b) {
            best = Some((phi, y.clone(), pairing.clone()));
        }
        if next == pairing || total_iters >= opts.max_iterations {
            break;
        }
        pairing = next;
    }
    let (_, y, pairing) = best.expect("at least one round");
    // reorder so that output atom j is the image of input atom j
    let mut order = vec![0; n];
    for (i, &j) in pairing.iter().enumerate() {
        order[j] = i;
    }
    let output = y.permuted(&order);
    let residual = el_residual(e, tau, mu, &output)?;
    if !(residual <= el_tol) {
        return Err(Error::NoConvergence { residual: residual.as_f64(), iterations: total_iters });
    }
    let phi_value = quadratic_perturbation(e, tau, mu, &output)?;
    Ok(ProxResult {
        input: mu.clone(),
        tau,
        output,
        el_residual: residual,
        phi_value,
        inner_iterations: total_iters,
    })
}

/// `W₂(J_τμ, J_h[((τ-h)/τ t_μ^{J_τμ} + (h/τ) id)#μ])`.
pub fn prox_split_check<T: Scalar>(e: &Functional<T>, tau: T, h: T, mu: &ParticleMeasure<T>) -> Result<T> {
    check_step(e, tau)?;
    if !(h > T::zero() && h <= tau) {
        return Err(Error::InvalidParameter(format!("need 0 < h <= tau, got h = {h}, tau = {tau}")));
    }
    let big = proximal_step(e, tau, mu)?.output;
    let a = (tau - h) / tau;
    let b = h / tau;
    let mid: Vec<T> = big.coords().iter().zip(mu.coords()).map(|(&y, &x)| a * y + b * x).collect();
    let mid = ParticleMeasure::from_flat(mu.dim(), mid)?;
    let small = proximal_step(e, h, &mid)?.output;
    Ok(wasserstein_distance_sq(&big, &small)?.max(T::zero()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{random_measure, InstanceSeed};

    fn line(xs: &[f64]) -> ParticleMeasure<f64> {
        ParticleMeasure::from_line(xs).unwrap()
    }

    fn seeded(seed: u64, n: usize, d: usize) -> ParticleMeasure<f64> {
        random_measure(&InstanceSeed::new(seed), n, d, 1.5).unwrap()
    }

    fn f(s: &str) -> Functional<f64> {
        s.parse().unwrap()
    }

    fn shipped() -> Vec<Functional<f64>> {
        ["potential:quadratic", "potential:cosine", "potential:quadratic_cosine", "interaction:quadratic"]
            .iter()
            .map(|s| f(s))
            .collect()
    }

    #[test]
    fn perturbation_examples() {
        let mu = seeded(1, 4, 2);
        let quad = f("potential:quadratic");
        assert_eq!(quadratic_perturbation(&quad, 0.3, &mu, &mu).unwrap(), quad.energy(&mu).unwrap());
        assert_eq!(quadratic_perturbation(&Functional::Zero, 0.5, &line(&[0.0]), &line(&[1.0])).unwrap(), 1.0);
        let v = quadratic_perturbation(&quad, 0.5, &line(&[2.0]), &line(&[4.0 / 3.0])).unwrap();
        // 4/9 from the transport term plus V(4/3) = 8/9
        assert!((v - 4.0 / 3.0).abs() <= 1e-14);
        assert!(matches!(
            quadratic_perturbation(&quad, 0.5, &line(&[2.0]), &line(&[1.0, 2.0])),
            Err(Error::SizeMismatch(1, 2))
        ));
    }

    #[test]
    fn prox_examples() {
        let mu = seeded(2, 5, 2);
        let zero = proximal_step(&Functional::Zero, 0.7, &mu).unwrap();
        assert_eq!(zero.output, mu);
        assert_eq!(zero.el_residual, 0.0);

        let quad = proximal_step(&f("potential:quadratic"), 0.5, &line(&[2.0])).unwrap();
        assert!((quad.output.coords()[0] - 4.0 / 3.0).abs() <= 1e-14);
        assert!(quad.el_residual <= 1e-12);

        let inter = proximal_step(&f("interaction:quadratic"), 1.0, &line(&[0.0, 2.0])).unwrap();
        assert!((inter.output.coords()[0] - 0.5).abs() <= 1e-14);
        assert!((inter.output.coords()[1] - 1.5).abs() <= 1e-14);
    }

    #[test]
    fn quadratic_prox_is_a_contraction_toward_the_origin() {
        let mu = seeded(3, 8, 3);
        for tau in [0.01, 0.3, 5.0] {
            let r = proximal_step(&f("potential:quadratic"), tau, &mu).unwrap();
            let expect = mu.scale(1.0 / (1.0 + tau)).unwrap();
            assert!(r.output.max_abs_diff(&expect) <= 1e-13);
        }
    }

    #[test]
    fn step_too_large() {
        let cos = f("potential:cosine");
        let mu = line(&[0.3]);
        assert!(matches!(proximal_step(&cos, 1.0, &mu), Err(Error::StepTooLarge { .. })));
        assert!(matches!(proximal_step(&cos, 2.0, &mu), Err(Error::StepTooLarge { tau, limit }) if tau == 2.0 && limit == 1.0));
        assert!(proximal_step(&cos, 0.9, &mu).is_ok());
        assert!(matches!(proximal_step(&cos, 0.0, &mu), Err(Error::InvalidParameter(_))));
        assert!(proximal_step(&f("potential:quadratic"), 1e6, &mu).is_ok());
    }

    #[test]
    fn el_residual_examples() {
        let mu = seeded(4, 4, 2);
        assert_eq!(el_residual(&Functional::Zero, 0.2, &mu, &mu).unwrap(), 0.0);
        let quad = f("potential:quadratic");
        assert_eq!(el_residual(&quad, 0.5, &line(&[2.0]), &line(&[2.0])).unwrap(), 2.0);
        assert!(el_residual(&quad, 0.5, &line(&[2.0]), &line(&[4.0 / 3.0])).unwrap() <= 1e-12);
    }

    #[test]
    fn shipped_functionals_certify() {
        for e in shipped() {
            for s in 0..5 {
                let mu = seeded(10 + s, 12, 2);
                for tau in [0.05, 0.5] {
                    let r = proximal_step(&e, tau, &mu).unwrap();
                    assert!(r.el_residual <= 1e-10, "{e}: {}", r.el_residual);
                    assert!(r.inner_iterations <= MAX_ITERATIONS);
                }
            }
        }
    }

    #[test]
    fn perturbed_outputs_fail_the_gate() {
        for e in shipped() {
            let mu = seeded(20, 6, 2);
            let r = proximal_step(&e, 0.25, &mu).unwrap();
            let dir = seeded(21, 6, 2);
            let bumped: Vec<f64> = r.output.coords().iter().zip(dir.coords()).map(|(a, b)| a + 1e-3 * b).collect();
            let bumped = ParticleMeasure::from_flat(2, bumped).unwrap();
            assert!(el_residual(&e, 0.25, &mu, &bumped).unwrap() > 1e-10);
        }
    }

    #[test]
    fn minimizer_certificate() {
        let mut stream = InstanceSeed::new(30).stream().unwrap();
        for e in shipped() {
            let mu = seeded(31, 6, 2);
            let tau = 0.4;
            let r = proximal_step(&e, tau, &mu).unwrap();
            let phi = r.phi_value;
            for k in 0..100 {
                let probe: Vec<f64> = if k % 2 == 0 {
                    let scale = 10f64.powi(-(k % 5));
                    r.output.coords().iter().map(|&v| v + scale * stream.next_in(-1.0, 1.0)).collect()
                } else {
                    let a = k as f64 / 100.0;
                    r.output.coords().iter().zip(mu.coords()).map(|(&y, &x)| (1.0 - a) * y + a * x).collect()
                };
                let probe = ParticleMeasure::from_flat(2, probe).unwrap();
                let other = quadratic_perturbation(&e, tau, &mu, &probe).unwrap();
                assert!(phi <= other + 1e-9, "{e}: {phi} vs {other}");
            }
            for delta in [1e-3, 1e-2] {
                let probe: Vec<f64> = r.output.coords().iter().map(|&v| v + delta * stream.next_in(-1.0, 1.0)).collect();
                let probe = ParticleMeasure::from_flat(2, probe).unwrap();
                assert!(quadratic_perturbation(&e, tau, &mu, &probe).unwrap() > phi);
            }
        }
    }

    #[test]
    fn split_identity() {
        let quad = f("potential:quadratic");
        assert_eq!(prox_split_check(&quad, 0.5, 0.5, &line(&[2.0])).unwrap(), 0.0);
        assert!(prox_split_check(&quad, 0.5, 0.25, &line(&[2.0])).unwrap() <= 1e-14);
        for e in shipped() {
            let mu = seeded(40, 8, 2);
            let d = prox_split_check(&e, 0.6, 0.2, &mu).unwrap();
            assert!(d <= 1e-8, "{e}: {d}");
        }
        assert!(matches!(prox_split_check(&quad, 0.5, 0.7, &line(&[2.0])), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn record_json() {
        let r = proximal_step(&f("potential:quadratic"), 1.0, &line(&[2.0])).unwrap();
        let json = serde_json::to_value(r.record()).unwrap();
        assert_eq!(json["tau"], 1.0);
        assert_eq!(json["output"][0][0], 1.0);
        assert_eq!(json["n_atoms"], 1);
        let back: ProxRecord = serde_json::from_value(json).unwrap();
        assert_eq!(back, r.record());
    }

    #[test]
    fn single_precision_step() {
        let e: Functional<f32> = "potential:quadratic".parse().unwrap();
        let mu = ParticleMeasure::<f32>::from_line(&[2.0, -1.0]).unwrap();
        let r = proximal_step(&e, 0.5, &mu).unwrap();
        assert!((r.output.coords()[0] - 4.0 / 3.0).abs() <= 1e-6);
    }
}
