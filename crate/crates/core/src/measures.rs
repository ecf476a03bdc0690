//! Equal-mass particle measures.
//!
//! A [`ParticleMeasure`] is `N` atoms in `R^d`, each carrying mass `1/N`.
//! Coordinates are stored row-major in one contiguous buffer.

use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dist_sq, Scalar};

/// Identifier of the only generator shipped: ChaCha8 words mapped to 53-bit
/// uniforms. Bumping the algorithm requires a new identifier.
pub const GENERATOR_CHACHA8_U53: &str = "chacha8-u53";

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleMeasure<T> {
    dim: usize,
    coords: Vec<T>,
}

impl<T: Scalar> ParticleMeasure<T> {
    /// Builds a measure from atom positions, keeping their order.
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptyInput)?.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    /// Builds a measure from a row-major coordinate buffer.
    pub fn from_flat(dim: usize, coords: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: coords.len() % dim });
        }
        if let Some(k) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate { atom: k / dim, axis: k % dim });
        }
        Ok(Self { dim, coords })
    }

    /// Single-coordinate convenience for measures on the line.
    pub fn from_line(xs: &[T]) -> Result<Self> {
        Self::from_flat(1, xs.to_vec())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    /// Mass carried by each atom.
    #[inline]
    pub fn atom_mass(&self) -> T {
        T::one() / T::from_usize_lossy(self.len())
    }

    pub fn to_points(&self) -> Vec<Vec<T>> {
        self.points().map(<[T]>::to_vec).collect()
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for p in self.points() {
            for (acc, &c) in m.iter_mut().zip(p) {
                *acc += c;
            }
        }
        let w = self.atom_mass();
        m.iter_mut().for_each(|c| *c *= w);
        m
    }

    /// Shifts every atom by `v`.
    pub fn translate(&self, v: &[T]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, &c)| c + v[k % self.dim])
            .collect();
        Self::from_flat(self.dim, coords)
    }

    /// Multiplies every coordinate by `c`.
    pub fn scale(&self, c: T) -> Result<Self> {
        Self::from_flat(self.dim, self.coords.iter().map(|&x| x * c).collect())
    }

    /// Reorders atoms so that new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.len(), "permutation length");
        let mut coords = Vec::with_capacity(self.coords.len());
        for &i in order {
            coords.extend_from_slice(self.point(i));
        }
        Self { dim: self.dim, coords }
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if self.len() != other.len() {
            return Err(Error::SizeMismatch(self.len(), other.len()));
        }
        Ok(())
    }

    /// Order-insensitive equality: every atom of `self` is matched to a
    /// distinct atom of `other` within `tol` in every coordinate.
    pub fn eq_as_measure(&self, other: &Self, tol: T) -> bool {
        if self.same_shape(other).is_err() {
            return false;
        }
        let mut used = vec![false; other.len()];
        'outer: for p in self.points() {
            for (j, q) in other.points().enumerate() {
                if !used[j] && p.iter().zip(q).all(|(&a, &b)| (a - b).abs() <= tol) {
                    used[j] = true;
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    /// Largest coordinate-wise deviation between atoms with equal index.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Serializes as CSV: a `dim,n` header row, the two values, then one row
    /// of coordinates per atom, 17 significant digits each.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,n\n");
        let _ = writeln!(out, "{},{}", self.dim, self.len());
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|&c| fmt_scalar(c)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some("dim,n") => {}
            other => return Err(Error::Parse(format!("expected header `dim,n`, got {other:?}"))),
        }
        let sizes = lines.next().ok_or_else(|| Error::Parse("missing size row".into()))?;
        let (dim, n) = sizes
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("bad size row {sizes:?}")))?;
        let dim: usize = dim.trim().parse().map_err(|_| Error::Parse(format!("bad dim {dim:?}")))?;
        let n: usize = n.trim().parse().map_err(|_| Error::Parse(format!("bad n {n:?}")))?;
        let mut coords = Vec::with_capacity(dim * n);
        let mut rows = 0;
        for line in lines {
            let before = coords.len();
            for field in line.split(',') {
                let v: T = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad coordinate {field:?}")))?;
                coords.push(v);
            }
            if coords.len() - before != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: coords.len() - before });
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Parse(format!("header declares {n} atoms, found {rows}")));
        }
        Self::from_flat(dim, coords)
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_scalar<T: Scalar>(x: T) -> String {
    format!("{x:.16e}")
}

/// `(1/N) Σ |x_i|²`.
pub fn second_moment<T: Scalar>(mu: &ParticleMeasure<T>) -> T {
    let origin = vec![T::zero(); mu.dim()];
    mu.points().map(|p| dist_sq(p, &origin)).sum::<T>() * mu.atom_mass()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceSeed {
    pub seed: u64,
    pub generator: String,
}

impl InstanceSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, generator: GENERATOR_CHACHA8_U53.to_string() }
    }

    /// Independent child stream, e.g. for the second measure of an instance.
    pub fn derive(&self, salt: u64) -> Self {
        let mixed = splitmix64(self.seed ^ splitmix64(salt.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        Self { seed: mixed, generator: self.generator.clone() }
    }

    pub fn stream(&self) -> Result<UniformStream> {
        if self.generator != GENERATOR_CHACHA8_U53 {
            return Err(Error::InvalidParameter(format!("unknown generator {:?}", self.generator)));
        }
        Ok(UniformStream { rng: ChaCha8Rng::seed_from_u64(self.seed) })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Portable stream of uniforms in `[0, 1)` with 53 random bits each.
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }

    pub fn next_index(&mut self, n: usize) -> usize {
        ((self.next_unit() * n as f64) as usize).min(n - 1)
    }
}

/// `n` atoms uniform in `[-radius, radius]^d` drawn from the seeded stream.
pub fn random_measure<T: Scalar>(
    seed: &InstanceSeed,
    n: usize,
    d: usize,
    radius: T,
) -> Result<ParticleMeasure<T>> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!("need n >= 1 and d >= 1, got n={n}, d={d}")));
    }
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("box radius must be positive, got {radius}")));
    }
    let mut stream = seed.stream()?;
    let coords = (0..n * d)
        .map(|_| T::lit(2.0 * stream.next_unit() - 1.0) * radius)
        .collect();
    ParticleMeasure::from_flat(d, coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction() {
        let m = ParticleMeasure::new(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!((m.len(), m.dim()), (2, 1));
        let m = ParticleMeasure::new(vec![vec![0.0, 0.0], vec![1.0, 10.0]]).unwrap();
        assert_eq!((m.len(), m.dim()), (2, 2));
        assert_eq!(m.point(1), &[1.0, 10.0]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            ParticleMeasure::new(vec![vec![0.0], vec![f64::NAN]]),
            Err(Error::NonFiniteCoordinate { atom: 1, axis: 0 })
        );
        assert_eq!(ParticleMeasure::<f64>::new(vec![]), Err(Error::EmptyInput));
        assert!(matches!(
            ParticleMeasure::new(vec![vec![0.0], vec![1.0, 2.0]]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
        assert!(ParticleMeasure::new(vec![vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn second_moment_values() {
        let origin = ParticleMeasure::from_line(&[0.0]).unwrap();
        assert_eq!(second_moment(&origin), 0.0);
        let two = ParticleMeasure::from_line(&[1.0, -2.0]).unwrap();
        assert_eq!(second_moment(&two), 2.5);
        let planar = ParticleMeasure::new(vec![vec![3.0, 4.0]]).unwrap();
        assert_eq!(second_moment(&planar), 25.0);
    }

    #[test]
    fn random_measure_is_deterministic() {
        let a: ParticleMeasure<f64> = random_measure(&InstanceSeed::new(1), 3, 2, 1.0).unwrap();
        let b: ParticleMeasure<f64> = random_measure(&InstanceSeed::new(1), 3, 2, 1.0).unwrap();
        let c: ParticleMeasure<f64> = random_measure(&InstanceSeed::new(2), 3, 2, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.coords().iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn random_measure_rejects_bad_parameters() {
        let s = InstanceSeed::new(1);
        assert!(matches!(random_measure::<f64>(&s, 0, 2, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(random_measure::<f64>(&s, 2, 0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(random_measure::<f64>(&s, 2, 2, 0.0), Err(Error::InvalidParameter(_))));
        let bad = InstanceSeed { seed: 1, generator: "mt19937".into() };
        assert!(random_measure::<f64>(&bad, 2, 2, 1.0).is_err());
    }

    #[test]
    fn frozen_stream_prefix() {
        // Pins the generator so stored instances stay reproducible.
        let mut s = InstanceSeed::new(1).stream().unwrap();
        let first: Vec<f64> = (0..3).map(|_| s.next_unit()).collect();
        let mut again = InstanceSeed::new(1).stream().unwrap();
        for v in first {
            assert_eq!(v.to_bits(), again.next_unit().to_bits());
        }
    }

    #[test]
    fn measure_equality_ignores_order() {
        let a = ParticleMeasure::new(vec![vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let b = a.permuted(&[1, 0]);
        assert!(a.eq_as_measure(&b, 1e-12));
        let c = ParticleMeasure::new(vec![vec![0.0, 1.0], vec![2.0, 3.1]]).unwrap();
        assert!(!a.eq_as_measure(&c, 1e-12));
    }

    #[test]
    fn csv_round_trip() {
        let m = ParticleMeasure::new(vec![vec![0.1, -2.5], vec![1e-300, 3.0]]).unwrap();
        let text = m.to_csv();
        assert!(text.starts_with("dim,n\n2,2\n"));
        assert_eq!(ParticleMeasure::<f64>::from_csv(&text).unwrap(), m);
    }

    #[test]
    fn csv_rejects_malformed() {
        assert!(ParticleMeasure::<f64>::from_csv("dim,n\n2,1\n1.0\n").is_err());
        assert!(ParticleMeasure::<f64>::from_csv("dim,n\n1,2\n1.0\n").is_err());
        assert!(ParticleMeasure::<f64>::from_csv("1,1\n1.0\n").is_err());
        assert!(ParticleMeasure::<f64>::from_csv("dim,n\n1,1\nabc\n").is_err());
    }

    #[test]
    fn single_precision_measures() {
        let m = ParticleMeasure::<f32>::from_line(&[1.0, -2.0]).unwrap();
        assert_eq!(second_moment(&m), 2.5f32);
    }
}
