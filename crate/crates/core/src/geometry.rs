//! Geodesics, generalized geodesics, and the metrics induced by a base measure.
//!
//! A [`BasedPlan`] glues two optimal assignments out of a common base `ω`,
//! so every quantity here is indexed by the atoms of the base: atom `i` of
//! `ω` is linked to atom `σ0(i)` of `μ0` and atom `σ1(i)` of `μ1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::ParticleMeasure;
use crate::scalar::{dist_sq, Scalar};
use crate::transport::{optimal_assignment, CostMatrix, TIE_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct BasedPlan<T> {
    base: ParticleMeasure<T>,
    mu0: ParticleMeasure<T>,
    mu1: ParticleMeasure<T>,
    sigma0: Vec<usize>,
    sigma1: Vec<usize>,
}

/// JSON form of a based plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasedPlanRecord {
    pub n: usize,
    pub sigma0: Vec<usize>,
    pub sigma1: Vec<usize>,
}

impl<T: Scalar> BasedPlan<T> {
    /// Wraps explicit assignments, rejecting any that is not optimal.
    pub fn new(
        base: ParticleMeasure<T>,
        mu0: ParticleMeasure<T>,
        mu1: ParticleMeasure<T>,
        sigma0: Vec<usize>,
        sigma1: Vec<usize>,
    ) -> Result<Self> {
        base.same_shape(&mu0)?;
        base.same_shape(&mu1)?;
        for (name, target, sigma) in [("mu0", &mu0, &sigma0), ("mu1", &mu1, &sigma1)] {
            let best = optimal_assignment(&base, target)?;
            let cost = CostMatrix::squared_distances(&base, target)?;
            if sigma.len() != base.len() {
                return Err(Error::InvalidPlan(format!("{name} assignment has wrong length")));
            }
            let mut seen = vec![false; sigma.len()];
            for &j in sigma.iter() {
                if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidPlan(format!("{name} assignment is not a permutation")));
                }
            }
            if cost.total(sigma) > best.total_cost + T::tol(TIE_TOLERANCE) {
                return Err(Error::InvalidPlan(format!("projection onto (base, {name}) is not optimal")));
            }
        }
        Ok(Self { base, mu0, mu1, sigma0, sigma1 })
    }

    /// Plan built from the optimal assignments out of `base`.
    pub fn canonical(
        base: &ParticleMeasure<T>,
        mu0: &ParticleMeasure<T>,
        mu1: &ParticleMeasure<T>,
    ) -> Result<Self> {
        let sigma0 = optimal_assignment(base, mu0)?.perm;
        let sigma1 = optimal_assignment(base, mu1)?.perm;
        Ok(Self {
            base: base.clone(),
            mu0: mu0.clone(),
            mu1: mu1.clone(),
            sigma0,
            sigma1,
        })
    }

    /// Like [`BasedPlan::canonical`] but fails on tied assignments.
    pub fn unique(
        base: &ParticleMeasure<T>,
        mu0: &ParticleMeasure<T>,
        mu1: &ParticleMeasure<T>,
    ) -> Result<Self> {
        let sigma0 = optimal_assignment(base, mu0)?.require_unique()?.perm;
        let sigma1 = optimal_assignment(base, mu1)?.require_unique()?.perm;
        Ok(Self {
            base: base.clone(),
            mu0: mu0.clone(),
            mu1: mu1.clone(),
            sigma0,
            sigma1,
        })
    }

    pub fn base(&self) -> &ParticleMeasure<T> {
        &self.base
    }
    pub fn mu0(&self) -> &ParticleMeasure<T> {
        &self.mu0
    }
    pub fn mu1(&self) -> &ParticleMeasure<T> {
        &self.mu1
    }
    pub fn sigma0(&self) -> &[usize] {
        &self.sigma0
    }
    pub fn sigma1(&self) -> &[usize] {
        &self.sigma1
    }

    /// `t_ω^{μ0}(w_i)`.
    #[inline]
    pub fn start(&self, i: usize) -> &[T] {
        self.mu0.point(self.sigma0[i])
    }

    /// `t_ω^{μ1}(w_i)`.
    #[inline]
    pub fn end(&self, i: usize) -> &[T] {
        self.mu1.point(self.sigma1[i])
    }

    pub fn record(&self) -> BasedPlanRecord {
        BasedPlanRecord {
            n: self.base.len(),
            sigma0: self.sigma0.clone(),
            sigma1: self.sigma1.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPoint<T> {
    pub alpha: T,
    pub measure: ParticleMeasure<T>,
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha >= T::zero() && alpha <= T::one() {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha.as_f64()))
    }
}

fn interpolate<T: Scalar>(a: &[T], b: &[T], alpha: T, out: &mut Vec<T>) {
    let beta = T::one() - alpha;
    out.extend(a.iter().zip(b).map(|(&x, &y)| beta * x + alpha * y));
}

/// Displacement interpolation `((1-α) id + α t_{μ0}^{μ1}) # μ0`.
pub fn geodesic<T: Scalar>(
    mu0: &ParticleMeasure<T>,
    mu1: &ParticleMeasure<T>,
    alpha: T,
) -> Result<GeodesicPoint<T>> {
    check_alpha(alpha)?;
    let sigma = optimal_assignment(mu0, mu1)?.perm;
    let mut coords = Vec::with_capacity(mu0.coords().len());
    for (i, &j) in sigma.iter().enumerate() {
        interpolate(mu0.point(i), mu1.point(j), alpha, &mut coords);
    }
    Ok(GeodesicPoint { alpha, measure: ParticleMeasure::from_flat(mu0.dim(), coords)? })
}

/// Atoms `(1-α) t_ω^{μ0}(w_i) + α t_ω^{μ1}(w_i)`, indexed by the base.
pub fn generalized_geodesic<T: Scalar>(plan: &BasedPlan<T>, alpha: T) -> Result<GeodesicPoint<T>> {
    check_alpha(alpha)?;
    let mut coords = Vec::with_capacity(plan.base.coords().len());
    for i in 0..plan.base.len() {
        interpolate(plan.start(i), plan.end(i), alpha, &mut coords);
    }
    Ok(GeodesicPoint { alpha, measure: ParticleMeasure::from_flat(plan.base.dim(), coords)? })
}

/// Mean squared distance between two base-indexed families of points.
fn paired_mean_sq<'a, T: Scalar>(pairs: impl Iterator<Item = (&'a [T], &'a [T])>, n: usize) -> T {
    pairs.map(|(a, b)| dist_sq(a, b)).fold(T::zero(), |s, v| s + v) / T::from_usize_lossy(n)
}

pub fn pseudo_metric_sq<T: Scalar>(plan: &BasedPlan<T>) -> T {
    let n = plan.base.len();
    paired_mean_sq((0..n).map(|i| (plan.start(i), plan.end(i))), n)
}

/// `W_{2,𝛚}(μ0, μ1)` for the plan's glued coupling.
pub fn pseudo_metric<T: Scalar>(plan: &BasedPlan<T>) -> T {
    pseudo_metric_sq(plan).sqrt()
}

/// Squared `(2, ω)`-transport metric; requires unique maps out of `ω`.
pub fn transport_metric_sq<T: Scalar>(
    omega: &ParticleMeasure<T>,
    mu0: &ParticleMeasure<T>,
    mu1: &ParticleMeasure<T>,
) -> Result<T> {
    Ok(pseudo_metric_sq(&BasedPlan::unique(omega, mu0, mu1)?))
}

/// `‖t_ω^{μ0} - t_ω^{μ1}‖_{L²(ω)}`.
pub fn transport_metric<T: Scalar>(
    omega: &ParticleMeasure<T>,
    mu0: &ParticleMeasure<T>,
    mu1: &ParticleMeasure<T>,
) -> Result<T> {
    transport_metric_sq(omega, mu0, mu1).map(T::sqrt)
}

/// Outcome of the base-pairing identity along a generalized geodesic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbertianCheck<T> {
    pub residual: T,
    /// `(1/N) Σ |w_i - μ_α atom i|²`, the cost of the base-indexed pairing.
    pub pairing_cost: T,
    /// Optimal `W₂²(ω, μ_α)`; at most `pairing_cost`, generically equal.
    pub w2_sq: T,
}

/// Residual of `W₂²(ω,μ_α) = (1-α)W₂²(ω,μ0) + αW₂²(ω,μ1) - α(1-α)W²_{2,𝛚}(μ0,μ1)`
/// with the left side evaluated on the base-indexed pairing.
pub fn check_hilbertian_identity<T: Scalar>(
    plan: &BasedPlan<T>,
    alpha: T,
) -> Result<HilbertianCheck<T>> {
    let mu_alpha = generalized_geodesic(plan, alpha)?.measure;
    let n = plan.base.len();
    let base = &plan.base;
    let pairing_cost = paired_mean_sq((0..n).map(|i| (base.point(i), mu_alpha.point(i))), n);
    let to0 = paired_mean_sq((0..n).map(|i| (base.point(i), plan.start(i))), n);
    let to1 = paired_mean_sq((0..n).map(|i| (base.point(i), plan.end(i))), n);
    let rhs = (T::one() - alpha) * to0 + alpha * to1
        - alpha * (T::one() - alpha) * pseudo_metric_sq(plan);
    let w2_sq = optimal_assignment(base, &mu_alpha)?.total_cost / T::from_usize_lossy(n);
    Ok(HilbertianCheck { residual: (pairing_cost - rhs).abs(), pairing_cost, w2_sq })
}

/// Residual of the transport-metric identity along the generalized geodesic
/// from `μ0` to `μ1` with base `ω`, measured from `ν`.
pub fn check_transport_geodesic_identity<T: Scalar>(
    omega: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
    mu0: &ParticleMeasure<T>,
    mu1: &ParticleMeasure<T>,
    alpha: T,
) -> Result<T> {
    let plan = BasedPlan::unique(omega, mu0, mu1)?;
    let mu_alpha = generalized_geodesic(&plan, alpha)?.measure;
    let lhs = transport_metric_sq(omega, nu, &mu_alpha)?;
    let rhs = (T::one() - alpha) * transport_metric_sq(omega, nu, mu0)?
        + alpha * transport_metric_sq(omega, nu, mu1)?
        - alpha * (T::one() - alpha) * pseudo_metric_sq(&plan);
    Ok((lhs - rhs).abs())
}

/// Sides of the four-point glue identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlueCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub residual: T,
}

/// Glues `(w_i, x_{σ0(i)}, y_{σ1(i)}, z_{σν(i)})` out of `ω` and evaluates
/// `W²_{2,𝛚_α}(ν,μ_α) = (1-α)W²_{2,𝛚0}(ν,μ0) + αW²_{2,𝛚1}(ν,μ1) - α(1-α)W²_{2,𝛚}(μ0,μ1)`
/// on the glued plan.
pub fn four_point_glue<T: Scalar>(
    omega: &ParticleMeasure<T>,
    mu0: &ParticleMeasure<T>,
    mu1: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
    alpha: T,
) -> Result<GlueCheck<T>> {
    check_alpha(alpha)?;
    omega.same_shape(nu)?;
    let plan = BasedPlan::unique(omega, mu0, mu1)?;
    let sigma_nu = optimal_assignment(omega, nu)?.require_unique()?.perm;
    let mu_alpha = generalized_geodesic(&plan, alpha)?.measure;
    let n = omega.len();
    let z = |i: usize| nu.point(sigma_nu[i]);
    let lhs = paired_mean_sq((0..n).map(|i| (z(i), mu_alpha.point(i))), n);
    let to0 = paired_mean_sq((0..n).map(|i| (z(i), plan.start(i))), n);
    let to1 = paired_mean_sq((0..n).map(|i| (z(i), plan.end(i))), n);
    let rhs = (T::one() - alpha) * to0 + alpha * to1
        - alpha * (T::one() - alpha) * pseudo_metric_sq(&plan);
    Ok(GlueCheck { lhs, rhs, residual: (lhs - rhs).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{random_measure, InstanceSeed};
    use crate::transport::{is_cyclically_monotone, optimal_map, wasserstein_distance_sq, TransportMap};

    fn plane(ps: &[[f64; 2]]) -> ParticleMeasure<f64> {
        ParticleMeasure::new(ps.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    fn line(xs: &[f64]) -> ParticleMeasure<f64> {
        ParticleMeasure::from_line(xs).unwrap()
    }

    /// Base and endpoints where the pseudo metric strictly exceeds W₂.
    fn gap_instance() -> (ParticleMeasure<f64>, ParticleMeasure<f64>, ParticleMeasure<f64>) {
        (
            plane(&[[0.0, 0.0], [1.0, 0.0]]),
            plane(&[[0.0, 0.0], [1.0, 10.0]]),
            plane(&[[0.0, 0.0], [-1.0, 9.0]]),
        )
    }

    fn seeded(seed: u64, n: usize, d: usize) -> ParticleMeasure<f64> {
        random_measure(&InstanceSeed::new(seed), n, d, 1.0).unwrap()
    }

    #[test]
    fn geodesic_endpoints_and_midpoints() {
        let mu0 = line(&[0.0, 1.0]);
        let mu1 = line(&[0.5, 1.5]);
        assert_eq!(geodesic(&mu0, &mu1, 0.0).unwrap().measure, mu0);
        assert!(geodesic(&mu0, &mu1, 1.0).unwrap().measure.eq_as_measure(&mu1, 0.0));
        assert_eq!(geodesic(&mu0, &mu1, 0.5).unwrap().measure.coords(), &[0.25, 1.25]);
        let single = geodesic(&line(&[0.0]), &line(&[2.0]), 0.25).unwrap();
        assert_eq!(single.measure.coords(), &[0.5]);
        assert!(matches!(geodesic(&mu0, &mu1, 1.5), Err(Error::AlphaOutOfRange(_))));
        assert!(matches!(geodesic(&mu0, &line(&[0.0]), 0.5), Err(Error::SizeMismatch(2, 1))));
    }

    #[test]
    fn geodesic_has_constant_speed() {
        let mu0 = seeded(3, 5, 2);
        let mu1 = seeded(4, 5, 2);
        let w = wasserstein_distance_sq(&mu0, &mu1).unwrap().sqrt();
        for (a, b) in [(0.1, 0.7), (0.25, 0.5), (0.0, 1.0)] {
            let pa = geodesic(&mu0, &mu1, a).unwrap().measure;
            let pb = geodesic(&mu0, &mu1, b).unwrap().measure;
            let d = wasserstein_distance_sq(&pa, &pb).unwrap().sqrt();
            assert!((d - (b - a) * w).abs() <= 1e-10 * w);
        }
    }

    #[test]
    fn strict_gap_instance() {
        let (omega, mu0, mu1) = gap_instance();
        let plan = BasedPlan::canonical(&omega, &mu0, &mu1).unwrap();
        assert_eq!(plan.sigma0(), &[0, 1]);
        assert_eq!(plan.sigma1(), &[1, 0]);
        assert_eq!(pseudo_metric_sq(&plan), 91.5);
        assert_eq!(transport_metric_sq(&omega, &mu0, &mu1).unwrap(), 91.5);
        assert_eq!(wasserstein_distance_sq(&mu0, &mu1).unwrap(), 2.5);
        let mid = generalized_geodesic(&plan, 0.5).unwrap().measure;
        assert_eq!(mid.coords(), &[-0.5, 4.5, 0.5, 5.0]);
        let end = generalized_geodesic(&plan, 1.0).unwrap().measure;
        assert!(end.eq_as_measure(&mu1, 0.0));
    }

    #[test]
    fn base_coincidence_reduces_to_geodesic() {
        let mu0 = seeded(5, 6, 2);
        let mu1 = seeded(6, 6, 2);
        let plan = BasedPlan::canonical(&mu0, &mu0, &mu1).unwrap();
        let gg = generalized_geodesic(&plan, 0.3).unwrap().measure;
        let g = geodesic(&mu0, &mu1, 0.3).unwrap().measure;
        assert!(gg.eq_as_measure(&g, 1e-15));
        let w2 = wasserstein_distance_sq(&mu0, &mu1).unwrap();
        assert!((pseudo_metric_sq(&plan) - w2).abs() <= 1e-12);
        assert!((transport_metric_sq(&mu0, &mu0, &mu1).unwrap() - w2).abs() <= 1e-12);
    }

    #[test]
    fn pseudo_metric_degenerate() {
        let mu = seeded(7, 4, 3);
        let plan = BasedPlan::canonical(&seeded(8, 4, 3), &mu, &mu).unwrap();
        assert_eq!(pseudo_metric(&plan), 0.0);
        assert_eq!(transport_metric(&seeded(8, 4, 3), &mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let (omega, mu0, mu1) = gap_instance();
        assert!(matches!(
            BasedPlan::new(omega.clone(), mu0.clone(), mu1.clone(), vec![0, 1], vec![0, 1]),
            Err(Error::InvalidPlan(_))
        ));
        assert!(BasedPlan::new(omega, mu0, mu1, vec![0, 1], vec![1, 0]).is_ok());
    }

    #[test]
    fn transport_metric_requires_unique_maps() {
        let omega = plane(&[[0.0, 0.0], [1.0, 1.0]]);
        let tied = plane(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            transport_metric(&omega, &tied, &tied),
            Err(Error::NonUniqueOptimum { .. })
        ));
    }

    #[test]
    fn transport_metric_on_the_line_is_w2() {
        for s in 0..30 {
            let omega = seeded(100 + s, 5, 1);
            let mu0 = seeded(200 + s, 5, 1);
            let mu1 = seeded(300 + s, 5, 1);
            let tm = transport_metric_sq(&omega, &mu0, &mu1).unwrap();
            let w2 = wasserstein_distance_sq(&mu0, &mu1).unwrap();
            assert!((tm - w2).abs() <= 1e-12, "seed {s}: {tm} vs {w2}");
        }
    }

    #[test]
    fn hilbertian_identity() {
        let (omega, mu0, mu1) = gap_instance();
        let plan = BasedPlan::canonical(&omega, &mu0, &mu1).unwrap();
        assert_eq!(check_hilbertian_identity(&plan, 0.0).unwrap().residual, 0.0);
        let mid = check_hilbertian_identity(&plan, 0.5).unwrap();
        assert!(mid.residual <= 1e-10);
        assert!(mid.w2_sq <= mid.pairing_cost + 1e-12);
        assert!(matches!(check_hilbertian_identity(&plan, -0.1), Err(Error::AlphaOutOfRange(_))));
    }

    #[test]
    fn transport_geodesic_identity_cases() {
        let omega = seeded(11, 5, 2);
        let mu0 = seeded(12, 5, 2);
        let mu1 = seeded(13, 5, 2);
        let nu = seeded(14, 5, 2);
        assert!(check_transport_geodesic_identity(&omega, &nu, &mu0, &mu1, 0.3).unwrap() <= 1e-10);
        assert!(check_transport_geodesic_identity(&omega, &mu0, &mu0, &mu1, 1.0).unwrap() <= 1e-12);
        let plan = BasedPlan::unique(&omega, &mu0, &mu1).unwrap();
        let mid = generalized_geodesic(&plan, 0.4).unwrap().measure;
        assert_eq!(transport_metric(&omega, &mid, &mid).unwrap(), 0.0);
    }

    #[test]
    fn generalized_geodesics_are_transport_geodesics() {
        let omega = seeded(21, 6, 2);
        let mu0 = seeded(22, 6, 2);
        let mu1 = seeded(23, 6, 2);
        let plan = BasedPlan::unique(&omega, &mu0, &mu1).unwrap();
        let full = transport_metric(&omega, &mu0, &mu1).unwrap();
        for (a, b) in [(0.2, 0.9), (0.0, 0.5), (0.6, 0.65)] {
            let pa = generalized_geodesic(&plan, a).unwrap().measure;
            let pb = generalized_geodesic(&plan, b).unwrap().measure;
            let d = transport_metric(&omega, &pa, &pb).unwrap();
            assert!((d - (b - a) * full).abs() <= 1e-10 * full.max(1.0));
            // t_ω^{μ_α} is the convex combination of the endpoint maps.
            let interp = TransportMap::new(omega.clone(), pa.clone(), (0..6).collect()).unwrap();
            assert!(is_cyclically_monotone(&interp, 6).unwrap());
            assert_eq!(optimal_map(&omega, &pa).unwrap().assignment(), interp.assignment());
        }
    }

    #[test]
    fn four_point_glue_cases() {
        let omega = seeded(31, 5, 3);
        let mu0 = seeded(32, 5, 3);
        let mu1 = seeded(33, 5, 3);
        let nu = seeded(34, 5, 3);
        assert!(four_point_glue(&omega, &mu0, &mu1, &nu, 0.5).unwrap().residual <= 1e-10);
        // With ν = ω the glue collapses to the base-pairing identity.
        let plan = BasedPlan::unique(&omega, &mu0, &mu1).unwrap();
        let glue = four_point_glue(&omega, &mu0, &mu1, &omega, 0.7).unwrap();
        let hil = check_hilbertian_identity(&plan, 0.7).unwrap();
        assert!((glue.lhs - hil.pairing_cost).abs() <= 1e-14);
        for alpha in [0.0, 1.0] {
            let g = four_point_glue(&omega, &mu0, &mu1, &nu, alpha).unwrap();
            assert!(g.residual <= 1e-12);
        }
    }

    #[test]
    fn based_plan_json() {
        let (omega, mu0, mu1) = gap_instance();
        let plan = BasedPlan::canonical(&omega, &mu0, &mu1).unwrap();
        let json = serde_json::to_string(&plan.record()).unwrap();
        assert_eq!(json, r#"{"n":2,"sigma0":[0,1],"sigma1":[1,0]}"#);
    }
}
