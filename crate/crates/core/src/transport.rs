//! Exact quadratic-cost optimal transport between equal-count measures.
//!
//! With uniform weights and equal atom counts every optimal plan can be
//! taken to be a permutation, so transport reduces to linear assignment on
//! the dense squared-distance matrix. The solver is the O(N³) shortest
//! augmenting path Hungarian method; among assignments whose total cost is
//! within [`TIE_TOLERANCE`] of the optimum the lexicographically smallest
//! permutation is returned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::ParticleMeasure;
use crate::scalar::{dist_sq, dot, Scalar};

/// Absolute tolerance on the total (unnormalized) cost `Σ|x_i - y_σ(i)|²`
/// under which two assignments count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Lower bound accepted for cyclical-monotonicity sums.
pub const MONOTONE_TOLERANCE: f64 = 1e-10;

pub const BRUTE_FORCE_MAX: usize = 9;

/// Row-major `n × n` matrix of squared distances.
#[derive(Debug, Clone)]
pub struct CostMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn squared_distances(mu: &ParticleMeasure<T>, nu: &ParticleMeasure<T>) -> Result<Self> {
        mu.same_shape(nu)?;
        let n = mu.len();
        let mut data = Vec::with_capacity(n * n);
        for x in mu.points() {
            for y in nu.points() {
                data.push(dist_sq(x, y));
            }
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Total cost of an assignment, summed in row order.
    pub fn total(&self, perm: &[usize]) -> T {
        perm.iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &j)| acc + self.get(i, j))
    }

    fn sub_matrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                data.push(self.get(r, c));
            }
        }
        Self { n: rows.len(), data }
    }
}

/// Minimum-cost perfect assignment; `result[i]` is the column given to row `i`.
pub fn hungarian<T: Scalar>(cost: &CostMatrix<T>) -> Vec<usize> {
    let n = cost.n;
    if n == 0 {
        return Vec::new();
    }
    let inf = T::infinity();
    // 1-based potentials; column 0 is the virtual root.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Smallest cost increase obtainable by rerouting `perm` along one cycle.
///
/// Row `a` taking the column of row `b` is an edge of weight
/// `C[a][σ(b)] - C[a][σ(a)]`; every competing assignment decomposes into
/// cycles of such edges, so the minimum cycle weight is the gap to the
/// second-best assignment. Returns `+∞` when no cycle exists. When the
/// measures are passed as `coincident`, swaps between atoms at identical positions are
/// ignored because they do not change the induced map.
pub fn optimality_gap<T: Scalar>(
    cost: &CostMatrix<T>,
    perm: &[usize],
    coincident: Option<(&ParticleMeasure<T>, &ParticleMeasure<T>)>,
) -> T {
    let n = cost.n;
    let inf = T::infinity();
    let mut d = vec![inf; n * n];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            if let Some((mu, nu)) = coincident {
                if mu.point(a) == mu.point(b) || nu.point(perm[a]) == nu.point(perm[b]) {
                    continue;
                }
            }
            d[a * n + b] = cost.get(a, perm[b]) - cost.get(a, perm[a]);
        }
    }
    floyd_warshall_min_cycle(&mut d, n)
}

fn floyd_warshall_min_cycle<T: Scalar>(d: &mut [T], n: usize) -> T {
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if dik == T::infinity() {
                continue;
            }
            for j in 0..n {
                let cand = dik + d[k * n + j];
                if cand < d[i * n + j] {
                    d[i * n + j] = cand;
                }
            }
        }
    }
    (0..n).map(|i| d[i * n + i]).fold(T::infinity(), T::min)
}

/// Lexicographically smallest assignment with total cost at most `bound`.
fn lexicographic_within<T: Scalar>(cost: &CostMatrix<T>, bound: T) -> Vec<usize> {
    let n = cost.n;
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut free_cols: Vec<usize> = (0..n).collect();
    let mut prefix = T::zero();
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let mut picked = None;
        for (slot, &col) in free_cols.iter().enumerate() {
            let head = prefix + cost.get(row, col);
            if head > bound {
                continue;
            }
            let rest_cols: Vec<usize> =
                free_cols.iter().copied().filter(|&c| c != col).collect();
            let tail = if rest_rows.is_empty() {
                T::zero()
            } else {
                let sub = cost.sub_matrix(&rest_rows, &rest_cols);
                let a = hungarian(&sub);
                sub.total(&a)
            };
            if head + tail <= bound {
                picked = Some((slot, col, head));
                break;
            }
        }
        // The optimum itself satisfies the bound, so some column always fits;
        // fall back to the cheapest one if rounding says otherwise.
        let (slot, col, head) = picked.unwrap_or_else(|| {
            let (slot, &col) = free_cols
                .iter()
                .enumerate()
                .min_by(|a, b| cost.get(row, *a.1).partial_cmp(&cost.get(row, *b.1)).unwrap())
                .expect("free column");
            (slot, col, prefix + cost.get(row, col))
        });
        chosen.push(col);
        free_cols.remove(slot);
        prefix = head;
    }
    chosen
}

/// Optimal permutation with its total cost and gap to the runner-up.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    pub perm: Vec<usize>,
    pub total_cost: T,
    /// Cost gap to the best competing map (coincident swaps ignored).
    pub gap: T,
}

impl<T: Scalar> Assignment<T> {
    pub fn is_unique(&self) -> bool {
        self.gap > T::tol(TIE_TOLERANCE)
    }

    pub fn require_unique(self) -> Result<Self> {
        if self.is_unique() {
            Ok(self)
        } else {
            Err(Error::NonUniqueOptimum { gap: self.gap.as_f64() })
        }
    }
}

/// Optimal assignment between two measures with the pinned tie-break.
pub fn optimal_assignment<T: Scalar>(
    mu: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
) -> Result<Assignment<T>> {
    let cost = CostMatrix::squared_distances(mu, nu)?;
    let mut perm = hungarian(&cost);
    let mut total = cost.total(&perm);
    let tie = T::tol(TIE_TOLERANCE);
    if optimality_gap(&cost, &perm, None) <= tie {
        perm = lexicographic_within(&cost, total + tie);
        total = cost.total(&perm);
    }
    let gap = optimality_gap(&cost, &perm, Some((mu, nu)));
    Ok(Assignment { perm, total_cost: total, gap })
}

/// Permutation-induced map from `source` onto `target`: atom `i` of the
/// source is sent to atom `assignment[i]` of the target.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap<T> {
    source: ParticleMeasure<T>,
    target: ParticleMeasure<T>,
    assignment: Vec<usize>,
}

impl<T: Scalar> TransportMap<T> {
    pub fn new(
        source: ParticleMeasure<T>,
        target: ParticleMeasure<T>,
        assignment: Vec<usize>,
    ) -> Result<Self> {
        source.same_shape(&target)?;
        if !is_permutation(&assignment, source.len()) {
            return Err(Error::InvalidParameter("assignment is not a permutation".into()));
        }
        Ok(Self { source, target, assignment })
    }

    pub fn source(&self) -> &ParticleMeasure<T> {
        &self.source
    }

    pub fn target(&self) -> &ParticleMeasure<T> {
        &self.target
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Image of source atom `i`.
    pub fn image(&self, i: usize) -> &[T] {
        self.target.point(self.assignment[i])
    }

    pub fn total_cost(&self) -> T {
        (0..self.source.len())
            .map(|i| dist_sq(self.source.point(i), self.image(i)))
            .fold(T::zero(), |a, b| a + b)
    }

    /// `(1/N) Σ |x_i - y_σ(i)|²`, i.e. `W₂²` when the map is optimal.
    pub fn cost(&self) -> T {
        self.total_cost() * self.source.atom_mass()
    }

    /// Pushes the source atoms through the map, in source order.
    pub fn pushforward(&self) -> ParticleMeasure<T> {
        let mut coords = Vec::with_capacity(self.source.coords().len());
        for i in 0..self.source.len() {
            coords.extend_from_slice(self.image(i));
        }
        ParticleMeasure::from_flat(self.source.dim(), coords).expect("finite images")
    }

    /// Set of matched point pairs, sorted, for order-free comparison.
    pub fn point_pairs(&self) -> Vec<(Vec<T>, Vec<T>)> {
        let mut pairs: Vec<_> = (0..self.source.len())
            .map(|i| (self.source.point(i).to_vec(), self.image(i).to_vec()))
            .collect();
        pairs.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        pairs
    }

    /// Cost gap to the best competing map; see [`optimality_gap`].
    pub fn optimality_gap(&self) -> T {
        let cost = CostMatrix::squared_distances(&self.source, &self.target).expect("shape checked");
        optimality_gap(&cost, &self.assignment, Some((&self.source, &self.target)))
    }

    pub fn plan(&self) -> TransportPlan<T> {
        let mass = self.source.atom_mass();
        TransportPlan {
            n: self.source.len(),
            pairs: self.assignment.iter().enumerate().map(|(i, &j)| (i, j, mass)).collect(),
        }
    }

    pub fn record(&self) -> MapRecord {
        MapRecord {
            n: self.source.len(),
            assignment: self.assignment.clone(),
            cost: self.cost().as_f64(),
        }
    }
}

fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &j in perm {
        if j >= n || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

/// Coupling stored as `(source atom, target atom, mass)` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    pub n: usize,
    pub pairs: Vec<(usize, usize, T)>,
}

impl<T: Scalar> TransportPlan<T> {
    /// Largest deviation of a row or column sum from `1/N`.
    pub fn marginal_error(&self) -> T {
        let mut rows = vec![T::zero(); self.n];
        let mut cols = vec![T::zero(); self.n];
        for &(i, j, m) in &self.pairs {
            rows[i] += m;
            cols[j] += m;
        }
        let target = T::one() / T::from_usize_lossy(self.n);
        rows.iter()
            .chain(&cols)
            .map(|&s| (s - target).abs())
            .fold(T::zero(), T::max)
    }
}

/// JSON form of a map in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub n: usize,
    pub assignment: Vec<usize>,
    pub cost: f64,
}

pub fn optimal_map<T: Scalar>(
    mu: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
) -> Result<TransportMap<T>> {
    let a = optimal_assignment(mu, nu)?;
    Ok(TransportMap { source: mu.clone(), target: nu.clone(), assignment: a.perm })
}

pub fn wasserstein_distance_sq<T: Scalar>(
    mu: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
) -> Result<T> {
    let a = optimal_assignment(mu, nu)?;
    Ok(a.total_cost * mu.atom_mass())
}

pub fn wasserstein_distance<T: Scalar>(
    mu: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
) -> Result<T> {
    wasserstein_distance_sq(mu, nu).map(T::sqrt)
}

/// Exhaustive search over all `N!` permutations (oracle, `N ≤ 9`).
pub fn brute_force_map<T: Scalar>(
    mu: &ParticleMeasure<T>,
    nu: &ParticleMeasure<T>,
) -> Result<TransportMap<T>> {
    mu.same_shape(nu)?;
    let n = mu.len();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge { n, max: BRUTE_FORCE_MAX });
    }
    let cost = CostMatrix::squared_distances(mu, nu)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = T::infinity();
    loop {
        best = best.min(cost.total(&perm));
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let bound = best + T::tol(TIE_TOLERANCE);
    perm = (0..n).collect();
    loop {
        if cost.total(&perm) <= bound {
            break;
        }
        if !next_permutation(&mut perm) {
            unreachable!("the minimum is attained");
        }
    }
    Ok(TransportMap { source: mu.clone(), target: nu.clone(), assignment: perm })
}

/// Advances to the next permutation in lexicographic order.
pub fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Checks `Σ_k ⟨x_{i_k} - x_{i_{k+1}}, t(x_{i_k})⟩ ≥ -1e-10` over every cycle
/// of matched pairs with length at most `cycle_length_max`.
pub fn is_cyclically_monotone<T: Scalar>(
    map: &TransportMap<T>,
    cycle_length_max: usize,
) -> Result<bool> {
    if cycle_length_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "cycle length bound must be at least 2, got {cycle_length_max}"
        )));
    }
    let n = map.source.len();
    let inf = T::infinity();
    let mut w = vec![inf; n * n];
    let mut diff = vec![T::zero(); map.source.dim()];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            for (k, d) in diff.iter_mut().enumerate() {
                *d = map.source.point(a)[k] - map.source.point(b)[k];
            }
            w[a * n + b] = dot(&diff, map.image(a));
        }
    }
    let worst = if cycle_length_max >= n {
        let mut d = w;
        floyd_warshall_min_cycle(&mut d, n)
    } else {
        min_closed_walk(&w, n, cycle_length_max)
    };
    Ok(worst >= -T::tol(MONOTONE_TOLERANCE))
}

/// Minimum weight of a closed walk with between 2 and `max_len` edges.
fn min_closed_walk<T: Scalar>(w: &[T], n: usize, max_len: usize) -> T {
    let inf = T::infinity();
    let mut best = inf;
    let mut cur = w.to_vec();
    for _ in 2..=max_len {
        let mut next = vec![inf; n * n];
        for s in 0..n {
            for u in 0..n {
                let dsu = cur[s * n + u];
                if dsu == inf {
                    continue;
                }
                for v in 0..n {
                    let cand = dsu + w[u * n + v];
                    if cand < next[s * n + v] {
                        next[s * n + v] = cand;
                    }
                }
            }
        }
        for s in 0..n {
            best = best.min(next[s * n + s]);
        }
        cur = next;
    }
    best
}

/// Inverse of an optimal map whose optimum is unique.
pub fn compose_inverse<T: Scalar>(map: &TransportMap<T>) -> Result<TransportMap<T>> {
    let gap = map.optimality_gap();
    if gap <= T::tol(TIE_TOLERANCE) {
        return Err(Error::NonUniqueOptimum { gap: gap.as_f64() });
    }
    let mut inverse = vec![0usize; map.assignment.len()];
    for (i, &j) in map.assignment.iter().enumerate() {
        inverse[j] = i;
    }
    Ok(TransportMap {
        source: map.target.clone(),
        target: map.source.clone(),
        assignment: inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{random_measure, InstanceSeed};

    fn line(xs: &[f64]) -> ParticleMeasure<f64> {
        ParticleMeasure::from_line(xs).unwrap()
    }

    fn plane(ps: &[[f64; 2]]) -> ParticleMeasure<f64> {
        ParticleMeasure::new(ps.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn identity_on_equal_measures() {
        let mu = plane(&[[0.3, 1.0], [2.0, -1.0], [0.0, 0.0]]);
        let map = optimal_map(&mu, &mu).unwrap();
        assert_eq!(map.assignment(), &[0, 1, 2]);
        assert_eq!(map.cost(), 0.0);
        assert_eq!(wasserstein_distance(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn monotone_map_on_the_line() {
        let map = optimal_map(&line(&[0.0, 1.0]), &line(&[0.5, 1.5])).unwrap();
        assert_eq!(map.assignment(), &[0, 1]);
        assert_eq!(wasserstein_distance(&line(&[0.0, 1.0]), &line(&[0.5, 1.5])).unwrap(), 0.5);
        // Reversed target order must give the reversed permutation.
        let map = optimal_map(&line(&[0.0, 1.0]), &line(&[1.5, 0.5])).unwrap();
        assert_eq!(map.assignment(), &[1, 0]);
    }

    #[test]
    fn planar_examples() {
        let mu = plane(&[[0.0, 0.0], [1.0, 10.0]]);
        let nu = plane(&[[0.0, 0.0], [-1.0, 9.0]]);
        let map = optimal_map(&mu, &nu).unwrap();
        assert_eq!(map.assignment(), &[0, 1]);
        assert_eq!(map.cost(), 2.5);
        let a = plane(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = plane(&[[0.0, 1.0], [1.0, 1.0]]);
        assert_eq!(wasserstein_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            optimal_map(&line(&[0.0]), &line(&[0.0, 1.0])),
            Err(Error::SizeMismatch(1, 2))
        ));
        assert!(matches!(
            optimal_map(&line(&[0.0]), &plane(&[[0.0, 0.0]])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn brute_force_limits() {
        let one = brute_force_map(&line(&[3.0]), &line(&[-1.0])).unwrap();
        assert_eq!(one.assignment(), &[0]);
        let ten: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(matches!(
            brute_force_map(&line(&ten), &line(&ten)),
            Err(Error::TooLarge { n: 10, max: 9 })
        ));
    }

    #[test]
    fn ties_resolve_to_lexicographic_smallest() {
        // Square corners to their rotation: both diagonal pairings tie.
        let mu = plane(&[[0.0, 0.0], [1.0, 1.0]]);
        let nu = plane(&[[1.0, 0.0], [0.0, 1.0]]);
        let fast = optimal_map(&mu, &nu).unwrap();
        let slow = brute_force_map(&mu, &nu).unwrap();
        assert_eq!(fast.assignment(), &[0, 1]);
        assert_eq!(fast.assignment(), slow.assignment());
        assert!(matches!(compose_inverse(&fast), Err(Error::NonUniqueOptimum { .. })));
    }

    #[test]
    fn coincident_atoms_are_not_ties() {
        let mu = line(&[0.0, 0.0, 1.0]);
        let nu = line(&[0.5, 0.5, 2.0]);
        let a = optimal_assignment(&mu, &nu).unwrap();
        assert!(a.is_unique());
        assert_eq!(a.perm[2], 2);
    }

    #[test]
    fn cyclical_monotonicity() {
        let mu = line(&[0.0, 1.0]);
        let nu = line(&[0.5, 1.5]);
        let good = optimal_map(&mu, &nu).unwrap();
        assert!(is_cyclically_monotone(&good, 2).unwrap());
        let swapped = TransportMap::new(mu.clone(), nu.clone(), vec![1, 0]).unwrap();
        assert!(!is_cyclically_monotone(&swapped, 2).unwrap());
        let id = optimal_map(&mu, &mu).unwrap();
        assert!(is_cyclically_monotone(&id, 2).unwrap());
        assert!(is_cyclically_monotone(&id, 1).is_err());
    }

    #[test]
    fn short_cycle_bound_misses_long_cycles() {
        // Identity beats every transposition here; only a 3-cycle improves it.
        let mu = plane(&[[-0.1, -1.1], [-1.1, 0.9], [0.7, 1.8]]);
        let nu = plane(&[[1.4, -1.0], [-1.2, -1.0], [-1.3, 0.8]]);
        let id = TransportMap::new(mu.clone(), nu.clone(), vec![0, 1, 2]).unwrap();
        assert!(is_cyclically_monotone(&id, 2).unwrap());
        assert!(!is_cyclically_monotone(&id, 3).unwrap());
        let opt = optimal_map(&mu, &nu).unwrap();
        assert_eq!(opt.assignment(), &[1, 2, 0]);
        assert!(is_cyclically_monotone(&opt, 3).unwrap());
    }

    #[test]
    fn inverse_matches_reverse_problem() {
        for s in 0..20 {
            let seed = InstanceSeed::new(s);
            let mu: ParticleMeasure<f64> = random_measure(&seed, 6, 2, 1.0).unwrap();
            let nu: ParticleMeasure<f64> = random_measure(&seed.derive(1), 6, 2, 1.0).unwrap();
            let fwd = optimal_map(&mu, &nu).unwrap();
            let inv = compose_inverse(&fwd).unwrap();
            let back = optimal_map(&nu, &mu).unwrap();
            assert_eq!(inv.assignment(), back.assignment());
            let round: Vec<usize> = (0..6).map(|i| inv.assignment()[fwd.assignment()[i]]).collect();
            assert_eq!(round, (0..6).collect::<Vec<_>>());
        }
        let id = optimal_map(&line(&[0.0, 1.0]), &line(&[0.0, 1.0])).unwrap();
        assert_eq!(compose_inverse(&id).unwrap().assignment(), &[0, 1]);
    }

    #[test]
    fn plan_marginals() {
        let map = optimal_map(&line(&[0.0, 1.0, 5.0]), &line(&[2.0, -1.0, 3.0])).unwrap();
        let plan = map.plan();
        assert_eq!(plan.pairs.len(), 3);
        assert!(plan.marginal_error() < 1e-15);
        assert!(map.pushforward().eq_as_measure(map.target(), 0.0));
    }

    #[test]
    fn map_record_json() {
        let map = optimal_map(&line(&[0.0, 1.0]), &line(&[0.5, 1.5])).unwrap();
        let json = serde_json::to_string(&map.record()).unwrap();
        assert_eq!(json, r#"{"n":2,"assignment":[0,1],"cost":0.25}"#);
    }

    #[test]
    fn next_permutation_enumerates_all() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn single_precision_assignment() {
        let mu = ParticleMeasure::<f32>::from_line(&[0.0, 1.0]).unwrap();
        let nu = ParticleMeasure::<f32>::from_line(&[1.5, 0.5]).unwrap();
        assert_eq!(optimal_map(&mu, &nu).unwrap().assignment(), &[1, 0]);
        assert!((wasserstein_distance(&mu, &nu).unwrap() - 0.5).abs() < 1e-6);
    }
}
