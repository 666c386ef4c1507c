//! Canonical data types and exact brute-force oracles.
//!
//! Every sketch in this crate is audited against [`exact_lp_power`] and
//! [`sup_error_on_net`]; they are deliberately simple and independent of the
//! sketch code paths.

use crate::error::{Result, SketchError};
use crate::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// A set of weighted rows: the matrix `A` with nonnegative per-row weights.
///
/// Rows are stored flat in row-major order. All operations treat the set as
/// immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    data: Vec<Real>,
    weights: Vec<Real>,
    dim: usize,
    p: Real,
}

impl WeightedPointSet {
    pub fn new(dim: usize, p: Real, data: Vec<Real>, weights: Vec<Real>) -> Result<Self> {
        if dim == 0 {
            return Err(SketchError::invalid("dimension must be positive"));
        }
        if p < 1.0 {
            return Err(SketchError::invalid(format!("exponent p = {p} must be >= 1")));
        }
        if data.len() % dim != 0 {
            return Err(SketchError::DimensionMismatch {
                expected: weights.len() * dim,
                got: data.len(),
            });
        }
        if data.len() / dim != weights.len() {
            return Err(SketchError::DimensionMismatch {
                expected: weights.len() * dim,
                got: data.len(),
            });
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(SketchError::invalid("weights must be finite and nonnegative"));
        }
        Ok(Self { data, weights, dim, p })
    }

    /// Uniform weights 1 (not normalized).
    pub fn unweighted(dim: usize, p: Real, data: Vec<Real>) -> Result<Self> {
        let n = data.len() / dim.max(1);
        Self::new(dim, p, data, vec![1.0; n])
    }

    pub fn from_rows(rows: &[Vec<Real>], weights: Vec<Real>, p: Real) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(SketchError::DimensionMismatch { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, p, data, weights)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn p(&self) -> Real {
        self.p
    }

    /// The exponent as an integer, if it is one (tensor paths require this).
    pub fn integer_p(&self) -> Option<u32> {
        let r = self.p.round();
        if (self.p - r).abs() < 1e-12 && r >= 1.0 {
            Some(r as u32)
        } else {
            None
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Real] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> Real {
        self.weights[i]
    }

    pub fn weights(&self) -> &[Real] {
        &self.weights
    }

    pub fn rows_flat(&self) -> &[Real] {
        &self.data
    }

    pub fn total_weight(&self) -> Real {
        self.weights.iter().sum()
    }

    /// True when the weights sum to 1 within 1e-9.
    pub fn is_normalized(&self) -> bool {
        (self.total_weight() - 1.0).abs() <= 1e-9
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[Real], Real)> + '_ {
        (0..self.len()).map(move |i| (self.row(i), self.weights[i]))
    }

    /// Subset by row indices, keeping weights.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        let mut weights = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(self.row(i));
            weights.push(self.weights[i]);
        }
        Self { data, weights, dim: self.dim, p: self.p }
    }

    pub fn push(&mut self, row: &[Real], weight: Real) -> Result<()> {
        if row.len() != self.dim {
            return Err(SketchError::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        self.data.extend_from_slice(row);
        self.weights.push(weight);
        Ok(())
    }
}

/// A query direction `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryDirection(pub Vec<Real>);

impl QueryDirection {
    pub fn new(x: Vec<Real>) -> Self {
        QueryDirection(x)
    }

    /// Construct a unit direction, erroring on zero input.
    pub fn unit(x: Vec<Real>) -> Result<Self> {
        let n = crate::scalar::norm2(&x);
        if n == 0.0 || !n.is_finite() {
            return Err(SketchError::invalid("query direction must be nonzero and finite"));
        }
        Ok(QueryDirection(x.iter().map(|v| v / n).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Real] {
        &self.0
    }
}

/// One query answer with its advertised error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchReport {
    pub estimate: Real,
    pub additive_bound: Real,
    pub multiplicative: bool,
}

/// Exact weighted power sum: `sum_i w_i |<A_i, x>|^p`.
pub fn exact_lp_power(set: &WeightedPointSet, x: &QueryDirection) -> Result<Real> {
    if x.dim() != set.dim() {
        return Err(SketchError::DimensionMismatch { expected: set.dim(), got: x.dim() });
    }
    let p = set.p();
    Ok(set
        .iter()
        .map(|(row, w)| w * crate::scalar::abs_powf(crate::scalar::dot(row, x.as_slice()), p))
        .sum())
}

/// Same oracle on a raw slice, for hot loops.
pub fn exact_lp_power_slice(set: &WeightedPointSet, x: &[Real]) -> Real {
    let p = set.p();
    set.iter()
        .map(|(row, w)| w * crate::scalar::abs_powf(crate::scalar::dot(row, x), p))
        .sum()
}

/// Result of a sup-error sweep over query directions.
#[derive(Debug, Clone, Copy)]
pub struct NetSupError {
    pub sup: Real,
    pub directions: usize,
}

/// Directions used by error sweeps: for d = 2 a deterministic angular
/// lattice at the given arc resolution, for d >= 3 seeded random unit
/// vectors plus the signed axis vectors.
pub fn net_directions(dim: usize, resolution: Real, seed: u64) -> Result<Vec<Vec<Real>>> {
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(SketchError::invalid("net resolution must lie in (0,1)"));
    }
    let mut dirs = Vec::new();
    if dim == 2 {
        // power-of-two grid size: finer nets contain coarser ones, which makes
        // the sup monotone under refinement
        let m = ((2.0 * PI / resolution).ceil() as usize).next_power_of_two();
        for k in 0..m {
            let t = 2.0 * PI * (k as Real) / (m as Real);
            dirs.push(vec![t.cos(), t.sin()]);
        }
        // a few random off-lattice directions to catch lattice-aligned artifacts
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        for _ in 0..64 {
            let t = rng.gen::<Real>() * 2.0 * PI;
            dirs.push(vec![t.cos(), t.sin()]);
        }
    } else {
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            dirs.push(e.clone());
            e[i] = -1.0;
            dirs.push(e);
        }
        let budget = ((1.0 / resolution).powi(dim as i32 - 1).ceil() as usize).clamp(128, 200_000);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        for _ in 0..budget {
            dirs.push(random_unit(dim, &mut rng));
        }
    }
    Ok(dirs)
}

/// Max absolute deviation of `sketch_eval` from the exact oracle over a net
/// of unit directions.
pub fn sup_error_on_net<F>(
    set: &WeightedPointSet,
    sketch_eval: F,
    resolution: Real,
    seed: u64,
) -> Result<NetSupError>
where
    F: Fn(&[Real]) -> Real + Sync,
{
    let dirs = net_directions(set.dim(), resolution, seed)?;
    use rayon::prelude::*;
    let sup = dirs
        .par_iter()
        .map(|x| (sketch_eval(x) - exact_lp_power_slice(set, x)).abs())
        .reduce(|| 0.0, Real::max);
    Ok(NetSupError { sup, directions: dirs.len() })
}

/// Normalize weights to the simplex; returns the new set and the original total.
pub fn normalize_weights(set: &WeightedPointSet) -> Result<(WeightedPointSet, Real)> {
    let total = set.total_weight();
    if total <= 0.0 {
        return Err(SketchError::degenerate("all weights are zero"));
    }
    let weights = set.weights().iter().map(|w| w / total).collect();
    Ok((
        WeightedPointSet::new(set.dim(), set.p(), set.rows_flat().to_vec(), weights)?,
        total,
    ))
}

/// Uniformly random unit vector.
pub fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Vec<Real> {
    loop {
        let v: Vec<Real> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::scalar::norm2(&v);
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qd(v: &[Real]) -> QueryDirection {
        QueryDirection::new(v.to_vec())
    }

    #[test]
    fn exact_identity_case() {
        let s = WeightedPointSet::unweighted(2, 1.0, vec![1.0, 0.0]).unwrap();
        assert_eq!(exact_lp_power(&s, &qd(&[1.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn exact_orthonormal_rows_p2() {
        let s = WeightedPointSet::unweighted(2, 2.0, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = exact_lp_power(&s, &qd(&[0.6, 0.8])).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_p3_scalar_oracle() {
        // single row (1,2), x = (3,1)/sqrt(10): |<row,x>|^3 = 5^3 / 10^{3/2}
        let s = WeightedPointSet::unweighted(2, 3.0, vec![1.0, 2.0]).unwrap();
        let n = (10.0 as Real).sqrt();
        let v = exact_lp_power(&s, &qd(&[3.0 / n, 1.0 / n])).unwrap();
        let expect = 125.0 / 10.0_f64.powf(1.5);
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        assert!((expect - 3.9528).abs() < 1e-4);
    }

    #[test]
    fn exact_dimension_mismatch() {
        let s = WeightedPointSet::unweighted(2, 1.0, vec![1.0, 0.0]).unwrap();
        assert!(exact_lp_power(&s, &qd(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn sup_error_self_is_zero() {
        let s = WeightedPointSet::unweighted(2, 1.0, vec![1.0, 0.0, 0.3, -0.4]).unwrap();
        let r = sup_error_on_net(&s, |x| exact_lp_power_slice(&s, x), 0.05, 7).unwrap();
        assert_eq!(r.sup, 0.0);
    }

    #[test]
    fn sup_error_constant_shift() {
        let s = WeightedPointSet::unweighted(2, 1.0, vec![1.0, 0.0, 0.3, -0.4]).unwrap();
        let r = sup_error_on_net(&s, |x| exact_lp_power_slice(&s, x) + 0.1, 0.05, 7).unwrap();
        assert!((r.sup - 0.1).abs() < 1e-12);
    }

    #[test]
    fn net_direction_count_d2() {
        let r = net_directions(2, 0.01, 3).unwrap();
        assert!(r.len() >= 629, "got {}", r.len());
        for x in &r {
            assert!((crate::scalar::norm2(x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_error_monotone_in_resolution() {
        let s = WeightedPointSet::unweighted(
            2,
            1.0,
            vec![1.0, 0.0, 0.3, -0.4, -0.7, 0.9, 0.2, 0.2],
        )
        .unwrap();
        // a crude "sketch": drop the last point
        let t = WeightedPointSet::unweighted(2, 1.0, vec![1.0, 0.0, 0.3, -0.4, -0.7, 0.9]).unwrap();
        let coarse = sup_error_on_net(&s, |x| exact_lp_power_slice(&t, x), 0.2, 7).unwrap();
        let fine = sup_error_on_net(&s, |x| exact_lp_power_slice(&t, x), 0.01, 7).unwrap();
        assert!(fine.sup >= coarse.sup - 1e-12);
    }

    #[test]
    fn normalize_weights_cases() {
        let s =
            WeightedPointSet::new(1, 1.0, vec![1.0, 2.0], vec![2.0, 2.0]).unwrap();
        let (n, total) = normalize_weights(&s).unwrap();
        assert_eq!(total, 4.0);
        assert_eq!(n.weights(), &[0.5, 0.5]);

        let s = WeightedPointSet::new(1, 1.0, vec![1.0], vec![1.0]).unwrap();
        let (n, total) = normalize_weights(&s).unwrap();
        assert_eq!(total, 1.0);
        assert_eq!(n.weights(), &[1.0]);

        let s = WeightedPointSet::new(1, 1.0, vec![1.0, 2.0, 3.0], vec![0.0, 3.0, 1.0]).unwrap();
        let (n, total) = normalize_weights(&s).unwrap();
        assert_eq!(total, 4.0);
        assert_eq!(n.weights(), &[0.0, 0.75, 0.25]);

        let s = WeightedPointSet::new(1, 1.0, vec![1.0], vec![0.0]).unwrap();
        assert!(normalize_weights(&s).is_err());
    }

    #[test]
    fn homogeneity_degree_p() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for p in [1.0, 2.0, 3.0, 1.5] {
            let data: Vec<Real> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<Real> = (0..10).map(|_| rng.gen_range(0.0..2.0)).collect();
            let s = WeightedPointSet::new(3, p, data, w).unwrap();
            let x: Vec<Real> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Real = rng.gen_range(-3.0..3.0);
            let base = exact_lp_power_slice(&s, &x);
            let scaled = exact_lp_power_slice(&s, &x.iter().map(|v| c * v).collect::<Vec<_>>());
            let expect = c.abs().powf(p) * base;
            assert!(
                (scaled - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                "p={p} c={c}: {scaled} vs {expect}"
            );
        }
    }
}
