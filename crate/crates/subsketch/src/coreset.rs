//! Coreset construction: the halving step, the iterated additive coreset,
//! and the multiplicative coreset via John-ellipsoid rounding.
//!
//! One halving round: keep the heavy rows, partition the light rows into
//! s-point groups of small angular diameter, tensorize each group, replace it
//! by a barycenter-preserving random subset of at most D+1 members
//! (D = C(d+p-1, p) is the compressed symmetric-tensor dimension), and keep
//! ungrouped leftovers verbatim. Queries whose equator misses a group see its
//! contribution exactly; intersected groups contribute an unbiased sample.

use crate::caratheodory;
use crate::error::{Result, SketchError};
use crate::model::{exact_lp_power_slice, WeightedPointSet};
use crate::rounding::{john_round_seeded, RoundingTransform};
use crate::scalar::{abs_powf, dot, norm2};
use crate::sphere;
use crate::tensor::{sym_dim, tensor_power};
use crate::{Real, SketchReport};
use rand::Rng;

/// Tunables for the builders. The theory pins only exponents, not
/// constants, so these are calibrated by the scaling tests.
#[derive(Debug, Clone)]
pub struct CoresetParams {
    /// Size multiplier for the target coreset size.
    pub c_size: Real,
    /// Packing constant for the group partition; None picks the
    /// occupancy-based default for (d, s).
    pub c1: Option<Real>,
    /// Sets smaller than this are returned unchanged by halve().
    pub min_halve: usize,
    /// Stop when a round removes less than this fraction of the points.
    pub min_shrink: Real,
}

impl Default for CoresetParams {
    fn default() -> Self {
        CoresetParams { c_size: 8.0, c1: None, min_halve: 16, min_shrink: 1.0 / 16.0 }
    }
}

/// Group size for one halving round: 2(D+1) in the compressed tensor
/// dimension, so the sampled subset is at most half the group.
pub fn group_size(d: usize, p: u32) -> usize {
    2 * (sym_dim(d, p) + 1)
}

/// Target coreset size c_size * eps^{-2(d-1)/(d+2p)}.
pub fn target_size(d: usize, p: u32, eps: Real, c_size: Real) -> usize {
    let expo = 2.0 * (d as Real - 1.0) / (d as Real + 2.0 * p as Real);
    (c_size * eps.powf(-expo)).ceil() as usize
}

/// Per-group record of one halving round, for audits.
#[derive(Debug, Clone)]
pub struct HalveGroup {
    pub members: Vec<usize>,
    pub sampled: Vec<usize>,
    pub sampled_weights: Vec<Real>,
    pub center: Vec<Real>,
    pub radius: Real,
    pub total_weight: Real,
}

/// Full provenance of one halving round.
#[derive(Debug, Clone)]
pub struct HalveOutcome {
    pub output: WeightedPointSet,
    pub groups: Vec<HalveGroup>,
    /// Rows kept verbatim (heavy rows and partition leftovers).
    pub kept: Vec<usize>,
}

/// One halving round; identity below the configured minimum size.
pub fn halve<R: Rng>(
    set: &WeightedPointSet,
    s: usize,
    rng: &mut R,
) -> Result<WeightedPointSet> {
    Ok(halve_detailed(set, s, &CoresetParams::default(), rng)?.output)
}

pub fn halve_detailed<R: Rng>(
    set: &WeightedPointSet,
    s: usize,
    params: &CoresetParams,
    rng: &mut R,
) -> Result<HalveOutcome> {
    let p = set
        .integer_p()
        .ok_or_else(|| SketchError::unsupported("halving requires an integer exponent p"))?;
    let d = set.dim();
    let n = set.len();
    if n < params.min_halve.max(s) {
        return Ok(HalveOutcome {
            output: set.clone(),
            groups: Vec::new(),
            kept: (0..n).collect(),
        });
    }

    // light rows: weight at most twice the mean (at least half the rows)
    let mean_w = set.total_weight() / n as Real;
    let mut light = Vec::with_capacity(n);
    let mut kept = Vec::new();
    for i in 0..n {
        if set.weight(i) <= 2.0 * mean_w {
            light.push(i);
        } else {
            kept.push(i);
        }
    }

    let light_set = set.subset(&light);
    let c1 = params.c1.unwrap_or_else(|| sphere::default_c1(d, s));
    let seed = rng.gen::<u64>();
    let partition = sphere::group_partition(&light_set, s, light.len(), c1, seed)?;

    for &j in &partition.leftovers {
        kept.push(light[j]);
    }

    let mut groups = Vec::with_capacity(partition.groups.len());
    for g in &partition.groups {
        let members: Vec<usize> = g.members.iter().map(|&j| light[j]).collect();
        let total_weight: Real = members.iter().map(|&i| set.weight(i)).sum();
        if total_weight <= 0.0 {
            // weightless group: nothing to carry
            groups.push(HalveGroup {
                members,
                sampled: Vec::new(),
                sampled_weights: Vec::new(),
                center: g.center.clone(),
                radius: g.radius,
                total_weight,
            });
            continue;
        }
        let tensors: Vec<Vec<Real>> = members
            .iter()
            .map(|&i| tensor_power(set.row(i), p).coeffs)
            .collect();
        let u: Vec<Real> = members.iter().map(|&i| set.weight(i) / total_weight).collect();
        let dist = caratheodory::decompose(&tensors, &u)?;
        let (sub_idx, sub_w) = caratheodory::sample(&dist, rng);
        let sampled: Vec<usize> = sub_idx.iter().map(|&k| members[k]).collect();
        let sampled_weights: Vec<Real> = sub_w.iter().map(|&w| w * total_weight).collect();
        groups.push(HalveGroup {
            members,
            sampled,
            sampled_weights,
            center: g.center.clone(),
            radius: g.radius,
            total_weight,
        });
    }

    kept.sort_unstable();
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for &i in &kept {
        rows.extend_from_slice(set.row(i));
        weights.push(set.weight(i));
    }
    for g in &groups {
        for (&i, &w) in g.sampled.iter().zip(&g.sampled_weights) {
            rows.extend_from_slice(set.row(i));
            weights.push(w);
        }
    }
    let output = WeightedPointSet::new(d, set.p(), rows, weights)?;
    Ok(HalveOutcome { output, groups, kept })
}

/// Whether a sketch answers in absolute or relative error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchMode {
    Additive,
    Multiplicative,
}

/// Rows + weights + transform metadata; answers sum_i w_i |<B_i, x>|^p.
#[derive(Debug, Clone)]
pub struct CoresetSketch {
    pub base: WeightedPointSet,
    pub eps: Real,
    pub mode: SketchMode,
    pub transform: Option<RoundingTransform>,
    /// Number of halving rounds applied.
    pub rounds: usize,
    pub flags: Vec<String>,
}

impl CoresetSketch {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn query(&self, x: &[Real]) -> Result<SketchReport> {
        if x.len() != self.base.dim() {
            return Err(SketchError::DimensionMismatch {
                expected: self.base.dim(),
                got: x.len(),
            });
        }
        let estimate = exact_lp_power_slice(&self.base, x);
        let additive_bound = match self.mode {
            SketchMode::Additive => self.eps * self.base.total_weight(),
            SketchMode::Multiplicative => self.eps * estimate,
        };
        Ok(SketchReport {
            estimate,
            additive_bound,
            multiplicative: self.mode == SketchMode::Multiplicative,
        })
    }
}

/// Iterated halving until the size target for eps is reached (or halving
/// stops shrinking the set). Rows should have norm O(1) and weights should
/// be normalized for the additive guarantee to mean anything.
pub fn build_additive<R: Rng>(
    set: &WeightedPointSet,
    eps: Real,
    rng: &mut R,
) -> Result<CoresetSketch> {
    build_additive_with(set, eps, &CoresetParams::default(), rng)
}

pub fn build_additive_with<R: Rng>(
    set: &WeightedPointSet,
    eps: Real,
    params: &CoresetParams,
    rng: &mut R,
) -> Result<CoresetSketch> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SketchError::invalid("eps must lie in (0,1)"));
    }
    let p = set
        .integer_p()
        .ok_or_else(|| SketchError::unsupported("coreset construction requires integer p"))?;
    let d = set.dim();
    let s = group_size(d, p);
    let target = target_size(d, p, eps, params.c_size);
    let mut current = set.clone();
    let mut rounds = 0usize;
    let mut flags = Vec::new();
    while current.len() > target {
        let before = current.len();
        current = halve_detailed(&current, s, params, rng)?.output;
        rounds += 1;
        let removed = before.saturating_sub(current.len());
        if (removed as Real) < params.min_shrink * before as Real {
            flags.push(format!("halving stalled at {} rows (target {target})", current.len()));
            break;
        }
    }
    Ok(CoresetSketch {
        base: current,
        eps,
        mode: SketchMode::Additive,
        transform: None,
        rounds,
        flags,
    })
}

/// Multiplicative coreset: round the John ellipsoid of Z(A), split rows into
/// unit directions and weight multipliers, build an additive coreset over
/// the directions and map back. The output rows are scalar multiples of
/// original rows.
pub fn build_multiplicative<R: Rng>(
    set: &WeightedPointSet,
    eps: Real,
    rng: &mut R,
) -> Result<CoresetSketch> {
    build_multiplicative_with(set, eps, &CoresetParams::default(), rng)
}

pub fn build_multiplicative_with<R: Rng>(
    set: &WeightedPointSet,
    eps: Real,
    params: &CoresetParams,
    rng: &mut R,
) -> Result<CoresetSketch> {
    let p = set
        .integer_p()
        .ok_or_else(|| SketchError::unsupported("coreset construction requires integer p"))?;
    let d = set.dim();
    let transform = john_round_seeded(set, rng.gen())?;
    let mut flags = Vec::new();
    if transform.rank_deficient {
        flags.push(format!("rank-deficient input: rank {} < {}", transform.rank, d));
    }
    if !transform.certified {
        flags.push(format!("rounding distortion {:.3} above target", transform.distortion));
    }

    // directions and weight multipliers in the rounded coordinates
    let pf = set.p();
    let mut dirs = Vec::new();
    let mut wmul = Vec::new();
    for (row, w) in set.iter() {
        let folded: Vec<Real> = row.iter().map(|&v| v * w.powf(1.0 / pf)).collect();
        let a = transform.apply_row(&folded);
        let n = norm2(&a);
        if n > 0.0 {
            dirs.push(a.iter().map(|v| v / n).collect::<Vec<_>>());
            wmul.push(n.powf(pf));
        }
    }
    if dirs.is_empty() {
        return Err(SketchError::degenerate("all rows are zero"));
    }
    let wsum: Real = wmul.iter().sum();
    let normalized: Vec<Real> = wmul.iter().map(|w| w / wsum).collect();
    let dir_set = WeightedPointSet::from_rows(&dirs, normalized, pf)?;

    let inner = build_additive_with(&dir_set, eps, params, rng)?;
    flags.extend(inner.flags.iter().cloned());

    // unscale weights and map rows back to the original coordinates
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for (row, v) in inner.base.iter() {
        rows.extend(transform.unapply_row(row));
        weights.push(v * wsum);
    }
    let base = WeightedPointSet::new(d, pf, rows, weights)?;
    let _ = p;
    Ok(CoresetSketch {
        base,
        eps,
        mode: SketchMode::Multiplicative,
        transform: Some(transform),
        rounds: inner.rounds,
        flags,
    })
}

/// Contribution of a group to the exact objective at x.
fn group_exact(set: &WeightedPointSet, members: &[usize], x: &[Real]) -> Real {
    let p = set.p();
    members
        .iter()
        .map(|&i| set.weight(i) * abs_powf(dot(set.row(i), x), p))
        .sum()
}

/// Contribution of the sampled replacement of a group at x.
fn group_sampled(set: &WeightedPointSet, g: &HalveGroup, x: &[Real]) -> Real {
    let p = set.p();
    g.sampled
        .iter()
        .zip(&g.sampled_weights)
        .map(|(&i, &w)| w * abs_powf(dot(set.row(i), x), p))
        .sum()
}

/// Decomposition of the halving error at x into the part attributable to
/// equator-intersected groups and the rest (which must vanish).
pub fn halve_error_split(
    set: &WeightedPointSet,
    outcome: &HalveOutcome,
    x: &[Real],
) -> (Real, Real) {
    let mut clean = 0.0;
    let mut band = 0.0;
    for g in &outcome.groups {
        let delta = group_sampled(set, g, x) - group_exact(set, &g.members, x);
        if sphere::hyperplane_intersects(&g.center, g.radius, x) {
            band += delta;
        } else {
            clean += delta;
        }
    }
    (clean, band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_unit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn uniform_circle_set(n: usize, p: Real, phase: Real) -> WeightedPointSet {
        let mut data = Vec::with_capacity(2 * n);
        for k in 0..n {
            let t = 2.0 * PI * (k as Real) / (n as Real) + phase;
            data.extend_from_slice(&[t.cos(), t.sin()]);
        }
        let w = vec![1.0 / n as Real; n];
        WeightedPointSet::new(2, p, data, w).unwrap()
    }

    #[test]
    fn halve_identical_points_preserve_weight() {
        let s = group_size(2, 1);
        let n = 4 * s;
        let data = vec![0.6, 0.8].repeat(n);
        let set = WeightedPointSet::new(2, 1.0, data, vec![1.0 / n as Real; n]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let out = halve(&set, s, &mut rng).unwrap();
        assert!(out.len() < n);
        assert!((out.total_weight() - 1.0).abs() < 1e-12);
        // all mass still on the same direction
        let v = exact_lp_power_slice(&out, &[0.6, 0.8]);
        let e = exact_lp_power_slice(&set, &[0.6, 0.8]);
        assert!((v - e).abs() < 1e-10);
    }

    #[test]
    fn halve_exact_outside_equator_band() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for p in [1.0, 2.0, 3.0] {
            let set = uniform_circle_set(600, p, 0.11);
            let s = group_size(2, p as u32);
            let outcome =
                halve_detailed(&set, s, &CoresetParams::default(), &mut rng).unwrap();
            assert!(outcome.output.len() <= (7 * set.len()).div_ceil(8));
            for _ in 0..20 {
                let x = random_unit(2, &mut rng);
                let (clean, _band) = halve_error_split(&set, &outcome, &x);
                assert!(clean.abs() <= 1e-8, "p={p}: clean error {clean}");
            }
        }
    }

    #[test]
    fn halve_total_error_within_band_budget() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let p = 1.0;
        let set = uniform_circle_set(2000, p, 0.0);
        let s = group_size(2, 1);
        let outcome = halve_detailed(&set, s, &CoresetParams::default(), &mut rng).unwrap();
        for _ in 0..20 {
            let x = random_unit(2, &mut rng);
            let err = exact_lp_power_slice(&outcome.output, &x)
                - exact_lp_power_slice(&set, &x);
            // every group member has norm 1 here, so the band bound is
            // 2 * sum over intersected groups of w_g * radius^p
            let bound: Real = outcome
                .groups
                .iter()
                .filter(|g| sphere::hyperplane_intersects(&g.center, g.radius, &x))
                .map(|g| g.total_weight * g.radius.powf(p))
                .sum();
            assert!(err.abs() <= 2.0 * bound + 1e-10, "err {err} bound {bound}");
        }
    }

    #[test]
    fn halve_small_set_identity() {
        let set = uniform_circle_set(8, 1.0, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let out = halve(&set, group_size(2, 1), &mut rng).unwrap();
        assert_eq!(out.len(), set.len());
    }

    #[test]
    fn halve_rejects_non_integer_p() {
        let set = uniform_circle_set(64, 1.5, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        assert!(halve(&set, 6, &mut rng).is_err());
    }

    #[test]
    fn build_additive_large_eps_identity() {
        // target_size(2, 1, 0.9, 8.0) = 9 >= |P| = 8: no halving at all
        let set = uniform_circle_set(8, 1.0, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let sk = build_additive(&set, 0.9, &mut rng).unwrap();
        assert_eq!(sk.len(), set.len());
        assert_eq!(sk.rounds, 0);
        let x = [1.0, 0.0];
        let r = sk.query(&x).unwrap();
        assert_eq!(r.estimate, exact_lp_power_slice(&set, &x));
        assert!(!r.multiplicative);
    }

    #[test]
    fn build_additive_hits_target_size() {
        let set = uniform_circle_set(4000, 1.0, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let eps = 0.05;
        let sk = build_additive(&set, eps, &mut rng).unwrap();
        let target = target_size(2, 1, eps, 8.0);
        assert!(sk.len() <= target, "{} > {target}", sk.len());
        assert!(sk.rounds > 0);
        // additive error sanity against the oracle
        let sup = crate::model::sup_error_on_net(
            &set,
            |x| exact_lp_power_slice(&sk.base, x),
            0.01,
            9,
        )
        .unwrap();
        assert!(sup.sup <= 3.0 * eps, "sup err {}", sup.sup);
    }

    #[test]
    fn smaller_eps_never_smaller_sketch() {
        let set = uniform_circle_set(3000, 1.0, 0.0);
        let mut sizes = Vec::new();
        for eps in [0.2, 0.1, 0.05] {
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            let sk = build_additive(&set, eps, &mut rng).unwrap();
            sizes.push(sk.len());
        }
        assert!(sizes[0] <= sizes[1] && sizes[1] <= sizes[2], "{sizes:?}");
    }

    #[test]
    fn multiplicative_single_row_exact() {
        let set = WeightedPointSet::unweighted(2, 1.0, vec![3.0, -4.0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let sk = build_multiplicative(&set, 0.1, &mut rng).unwrap();
        let mut tr = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = random_unit(2, &mut tr);
            let est = sk.query(&x).unwrap().estimate;
            let exact = exact_lp_power_slice(&set, &x);
            assert!((est - exact).abs() <= 1e-9 * exact.max(1e-12), "{est} vs {exact}");
        }
    }

    #[test]
    fn multiplicative_relative_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let n = 4000;
        let mut data = Vec::new();
        for k in 0..n {
            let t = 2.0 * PI * (k as Real) / (n as Real);
            // anisotropic cloud, not on the sphere
            data.extend_from_slice(&[3.0 * t.cos(), 0.25 * t.sin()]);
        }
        let set = WeightedPointSet::unweighted(2, 1.0, data).unwrap();
        let eps = 0.1;
        let sk = build_multiplicative(&set, eps, &mut rng).unwrap();
        assert!(sk.len() < n / 10);
        let mut qr = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = random_unit(2, &mut qr);
            let est = sk.query(&x).unwrap().estimate;
            let exact = exact_lp_power_slice(&set, &x);
            let rel = (est - exact).abs() / exact;
            assert!(rel <= 2.0 * eps, "rel {rel}");
        }
    }

    #[test]
    fn multiplicative_invariance_under_gl_map() {
        // exact values transform by change of variables; sketch errors stay
        // comparable when building on A and on A * M
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let set = uniform_circle_set(1500, 1.0, 0.2);
        let m = [[1.3, 0.4], [-0.2, 0.8]];
        let minv_t = {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            [[m[1][1] / det, -m[1][0] / det], [-m[0][1] / det, m[0][0] / det]]
        };
        let mut data2 = Vec::new();
        for (row, _) in set.iter() {
            data2.push(row[0] * m[0][0] + row[1] * m[1][0]);
            data2.push(row[0] * m[0][1] + row[1] * m[1][1]);
        }
        let set2 = WeightedPointSet::new(2, 1.0, data2, set.weights().to_vec()).unwrap();
        let eps = 0.1;
        let sk1 = build_multiplicative(&set, eps, &mut rng).unwrap();
        let sk2 = build_multiplicative(&set2, eps, &mut rng).unwrap();
        let mut qr = ChaCha12Rng::seed_from_u64(13);
        let mut worst1: Real = 0.0;
        let mut worst2: Real = 0.0;
        for _ in 0..100 {
            let x = random_unit(2, &mut qr);
            // y = M^{-t} ... exact(A M, x) = exact(A, M x); query sk1 at Mx
            let mx = [
                m[0][0] * x[0] + m[0][1] * x[1],
                m[1][0] * x[0] + m[1][1] * x[1],
            ];
            let e1 = exact_lp_power_slice(&set, &mx);
            let e2 = exact_lp_power_slice(&set2, &x);
            assert!((e1 - e2).abs() <= 1e-9 * e1.max(1.0));
            worst1 = worst1.max((sk1.query(&mx).unwrap().estimate - e1).abs() / e1);
            worst2 = worst2.max((sk2.query(&x).unwrap().estimate - e2).abs() / e2);
        }
        assert!(worst1 <= 2.0 * eps && worst2 <= 2.0 * eps, "{worst1} {worst2}");
        let _ = minv_t;
    }

    #[test]
    fn query_edge_cases() {
        let set = uniform_circle_set(100, 2.0, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let sk = build_additive(&set, 0.2, &mut rng).unwrap();
        // homogeneity of the query
        let r1 = sk.query(&[0.6, 0.8]).unwrap().estimate;
        let r2 = sk.query(&[1.2, 1.6]).unwrap().estimate;
        assert!((r2 - 4.0 * r1).abs() < 1e-9 * r1.abs().max(1.0));
        // dimension mismatch
        assert!(sk.query(&[1.0, 0.0, 0.0]).is_err());
        // empty sketch
        let empty = CoresetSketch {
            base: WeightedPointSet::new(2, 1.0, vec![], vec![]).unwrap(),
            eps: 0.1,
            mode: SketchMode::Additive,
            transform: None,
            rounds: 0,
            flags: vec![],
        };
        assert_eq!(empty.query(&[1.0, 0.0]).unwrap().estimate, 0.0);
    }
}
