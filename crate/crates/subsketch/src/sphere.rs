//! Nets, spherical caps, Voronoi region partitions of the unit sphere, and
//! the grouped point-partition used by the coreset halving step.
//!
//! The construction is net-based: a greedy maximal eta-packing whose Voronoi
//! cells (lowest-index tie-break) give regions of diameter at most 2 eta, and
//! per-region slicing into consecutive s-point groups. The two properties the
//! halving step needs, small group diameter and few equator crossings, are
//! asserted empirically by the tests.

use crate::error::{Result, SketchError};
use crate::harmonics::gamma;
use crate::model::{random_unit, WeightedPointSet};
use crate::scalar::{dist2, dot, norm2};
use crate::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;
use std::f64::consts::PI;

/// A set of eta-separated unit vectors with a grid index for nearest-center
/// lookups.
#[derive(Debug, Clone)]
pub struct SphereNet {
    centers: Vec<Real>,
    dim: usize,
    pub separation: Real,
    grid: Grid,
}

impl SphereNet {
    /// Rebuild a net from explicit centers (deserialization path).
    pub fn from_centers(dim: usize, centers: Vec<Real>, separation: Real) -> Result<Self> {
        if dim < 2 || centers.len() % dim != 0 {
            return Err(SketchError::invalid("malformed center list"));
        }
        let mut grid = Grid::new(dim, separation.max(1e-6));
        for i in 0..centers.len() / dim {
            grid.insert(i as u32, &centers[i * dim..(i + 1) * dim]);
        }
        Ok(SphereNet { centers, dim, separation, grid })
    }

    pub fn centers_flat(&self) -> &[Real] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, i: usize) -> &[Real] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the nearest center, lowest index on (bitwise) ties.
    pub fn nearest(&self, x: &[Real]) -> usize {
        self.grid.nearest(&self.centers, self.dim, x)
    }
}

/// Uniform cell grid over the bounding cube, for near-neighbor queries among
/// centers. Cell keys are packed into u64 (supports d <= 5 at the cell
/// resolutions used here); out-of-range configurations fall back to a scan.
#[derive(Debug, Clone)]
struct Grid {
    cell: Real,
    map: HashMap<u64, Vec<u32>>,
    dense_fallback: bool,
}

const GRID_BITS: u32 = 12;
const GRID_OFF: i64 = 1 << (GRID_BITS - 1);

impl Grid {
    fn new(dim: usize, cell: Real) -> Self {
        let span = (2.2 / cell).ceil() as i64 + 2;
        let dense_fallback = dim * (GRID_BITS as usize) > 60 || span >= (1 << GRID_BITS);
        Grid { cell, map: HashMap::new(), dense_fallback }
    }

    fn key(&self, x: &[Real]) -> Option<u64> {
        let mut k = 0u64;
        for &c in x {
            let i = (c / self.cell).floor() as i64 + GRID_OFF;
            if !(0..(1 << GRID_BITS)).contains(&i) {
                return None;
            }
            k = (k << GRID_BITS) | i as u64;
        }
        Some(k)
    }

    fn insert(&mut self, idx: u32, x: &[Real]) {
        if self.dense_fallback {
            return;
        }
        match self.key(x) {
            Some(k) => self.map.entry(k).or_default().push(idx),
            None => self.dense_fallback = true,
        }
    }

    /// True if some stored center lies within `r` of `x`.
    fn has_within(&self, centers: &[Real], dim: usize, x: &[Real], r: Real) -> bool {
        if self.dense_fallback {
            return (0..centers.len() / dim)
                .any(|i| dist2(&centers[i * dim..(i + 1) * dim], x) <= r);
        }
        let reach = (r / self.cell).ceil() as i64;
        let mut found = false;
        self.visit_cells(x, reach, dim, &mut |ids| {
            for &i in ids {
                let c = &centers[(i as usize) * dim..(i as usize + 1) * dim];
                if dist2(c, x) <= r {
                    found = true;
                    return false;
                }
            }
            true
        });
        found
    }

    fn nearest(&self, centers: &[Real], dim: usize, x: &[Real]) -> usize {
        let n = centers.len() / dim;
        debug_assert!(n > 0);
        let brute = |limit: usize| {
            let mut best = (Real::INFINITY, 0usize);
            for i in 0..limit {
                let d = dist2(&centers[i * dim..(i + 1) * dim], x);
                if d < best.0 || (d == best.0 && i < best.1) {
                    best = (d, i);
                }
            }
            best.1
        };
        if self.dense_fallback {
            return brute(n);
        }
        // expanding ring search: stop once best distance <= explored radius
        let mut reach = 1i64;
        loop {
            let mut best = (Real::INFINITY, usize::MAX);
            self.visit_cells(x, reach, dim, &mut |ids| {
                for &i in ids {
                    let i = i as usize;
                    let d = dist2(&centers[i * dim..(i + 1) * dim], x);
                    if d < best.0 || (d == best.0 && i < best.1) {
                        best = (d, i);
                    }
                }
                true
            });
            let explored = (reach as Real) * self.cell;
            if best.1 != usize::MAX && best.0 <= explored {
                return best.1;
            }
            reach *= 2;
            if (reach as Real) * self.cell > 4.0 {
                return brute(n);
            }
        }
    }

    fn visit_cells(
        &self,
        x: &[Real],
        reach: i64,
        dim: usize,
        f: &mut impl FnMut(&[u32]) -> bool,
    ) {
        let base: Vec<i64> =
            x.iter().map(|&c| (c / self.cell).floor() as i64 + GRID_OFF).collect();
        let mut offs = vec![-reach; dim];
        'outer: loop {
            let mut k = 0u64;
            let mut ok = true;
            for (b, o) in base.iter().zip(&offs) {
                let i = b + o;
                if !(0..(1 << GRID_BITS)).contains(&i) {
                    ok = false;
                    break;
                }
                k = (k << GRID_BITS) | i as u64;
            }
            if ok {
                if let Some(ids) = self.map.get(&k) {
                    if !f(ids) {
                        return;
                    }
                }
            }
            // odometer increment
            for pos in 0..dim {
                offs[pos] += 1;
                if offs[pos] <= reach {
                    continue 'outer;
                }
                offs[pos] = -reach;
            }
            break;
        }
    }
}

/// Greedy maximal packing at separation `eta`. For d = 2 the centers are the
/// deterministic equally spaced angular lattice (the densest packing the
/// circle admits at pairwise chordal distance > eta); for d >= 3 candidates
/// are the signed axis vectors followed by seeded random unit vectors, and
/// the loop stops once acceptances stall.
///
/// The analysis range for eta is (0, 1/2); values up to 2 are accepted to
/// support coarse single-region fallbacks on tiny sets, and produce valid
/// (just coarse) packings.
pub fn build_net(d: usize, eta: Real, seed: u64) -> Result<SphereNet> {
    build_net_with(d, eta, seed, 200)
}

/// `stall_factor` scales how long the greedy loop keeps trying after the
/// last acceptance; larger values get closer to a truly maximal packing.
pub fn build_net_with(d: usize, eta: Real, seed: u64, stall_factor: usize) -> Result<SphereNet> {
    if d < 2 {
        return Err(SketchError::invalid("dimension must be at least 2"));
    }
    if !(eta > 0.0 && eta < 2.0) {
        return Err(SketchError::invalid(format!("eta = {eta} out of range (0, 2)")));
    }
    let mut net = SphereNet {
        centers: Vec::new(),
        dim: d,
        separation: eta,
        grid: Grid::new(d, eta.max(1e-6)),
    };

    let accept = |net: &mut SphereNet, v: &[Real]| {
        if !net.grid.has_within(&net.centers, d, v, eta)
            && (!net.grid.dense_fallback
                || (0..net.len()).all(|i| dist2(net.center(i), v) > eta))
        {
            let idx = net.len() as u32;
            net.centers.extend_from_slice(v);
            net.grid.insert(idx, v);
            true
        } else {
            false
        }
    };

    if d == 2 {
        // largest m with chord 2 sin(pi/m) > eta
        let mut m = (PI / (eta / 2.0).asin()).floor() as usize;
        while m > 1 && 2.0 * (PI / m as Real).sin() <= eta {
            m -= 1;
        }
        let m = m.max(1);
        for k in 0..m {
            let t = 2.0 * PI * (k as Real) / (m as Real);
            let v = [t.cos(), t.sin()];
            accept(&mut net, &v);
        }
        return Ok(net);
    }

    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            accept(&mut net, &e);
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut stall = 0usize;
    let mut total = 0usize;
    let max_candidates = 3_000_000usize;
    loop {
        let stall_limit = 5_000.max(stall_factor * net.len());
        if stall >= stall_limit || total >= max_candidates {
            break;
        }
        let v = random_unit(d, &mut rng);
        total += 1;
        if accept(&mut net, &v) {
            stall = 0;
        } else {
            stall += 1;
        }
    }
    Ok(net)
}

/// Region labels for a point set: nearest net center per point, with
/// zero-norm points sent to the reserved null region.
#[derive(Debug, Clone)]
pub struct RegionAssignment {
    /// None marks the null region for zero-norm points.
    pub region_index: Vec<Option<usize>>,
    pub radius_bound: Real,
}

pub fn assign_regions(set: &WeightedPointSet, net: &SphereNet) -> Result<RegionAssignment> {
    if net.is_empty() {
        return Err(SketchError::invalid("empty net"));
    }
    if net.dim() != set.dim() {
        return Err(SketchError::DimensionMismatch { expected: set.dim(), got: net.dim() });
    }
    let mut region_index = Vec::with_capacity(set.len());
    let mut dir = vec![0.0; set.dim()];
    for (row, _) in set.iter() {
        let n = norm2(row);
        if n == 0.0 {
            region_index.push(None);
            continue;
        }
        for (d, &r) in dir.iter_mut().zip(row) {
            *d = r / n;
        }
        region_index.push(Some(net.nearest(&dir)));
    }
    Ok(RegionAssignment { region_index, radius_bound: 2.0 * net.separation })
}

/// One s-point group: member indices plus a certified cap around the
/// normalized member directions.
#[derive(Debug, Clone)]
pub struct Group {
    pub members: Vec<usize>,
    pub center: Vec<Real>,
    pub radius: Real,
}

/// Output of the grouped partition: disjoint equally sized groups covering a
/// large fraction of the points, plus ungrouped leftovers.
#[derive(Debug, Clone)]
pub struct GroupPartition {
    pub groups: Vec<Group>,
    pub leftovers: Vec<usize>,
    pub diameter_bound: Real,
    pub eta: Real,
}

impl GroupPartition {
    pub fn grouped_count(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }
}

/// Default packing constant: sized so that a region holds about 2s points,
/// which makes the per-region s-slicing cover most of the set.
pub fn default_c1(d: usize, s: usize) -> Real {
    let kappa = gamma(d as Real / 2.0) / (2.0 * PI.sqrt() * gamma((d as Real + 1.0) / 2.0));
    2.0 * (2.0 * s as Real / kappa).powf(1.0 / (d as Real - 1.0))
}

/// Partition the points into consecutive `s`-point groups within the Voronoi
/// regions of an eta-net, eta = c1 * N^{-1/(d-1)} clamped to (0, 2). Points
/// are normalized to unit vectors for partitioning only; zero-norm points go
/// straight to the leftovers.
pub fn group_partition(
    set: &WeightedPointSet,
    s: usize,
    n_scale: usize,
    c1: Real,
    seed: u64,
) -> Result<GroupPartition> {
    if s < 2 {
        return Err(SketchError::invalid("group size must be at least 2"));
    }
    if s > set.len() {
        return Err(SketchError::degenerate(format!(
            "group size {s} exceeds point count {}",
            set.len()
        )));
    }
    let d = set.dim();
    let eta_raw = c1 * (n_scale.max(2) as Real).powf(-1.0 / (d as Real - 1.0));
    let eta = eta_raw.clamp(1e-6, 1.99);

    let mut dirs: Vec<Vec<Real>> = Vec::with_capacity(set.len());
    let mut leftovers: Vec<usize> = Vec::new();
    let mut live: Vec<usize> = Vec::new();
    for (i, (row, _)) in set.iter().enumerate() {
        let n = norm2(row);
        if n == 0.0 {
            leftovers.push(i);
            dirs.push(Vec::new());
        } else {
            live.push(i);
            dirs.push(row.iter().map(|v| v / n).collect());
        }
    }

    // region id per live point; a single region once eta saturates the sphere
    let mut region_of: Vec<(usize, usize)> = Vec::with_capacity(live.len());
    if eta >= 1.9 {
        for &i in &live {
            region_of.push((0, i));
        }
    } else {
        let net = build_net_with(d, eta, seed, 40)?;
        for &i in &live {
            region_of.push((net.nearest(&dirs[i]), i));
        }
    }
    // stable bucketing by (region, original index)
    region_of.sort_unstable();

    let mut groups = Vec::new();
    let mut start = 0usize;
    while start < region_of.len() {
        let region = region_of[start].0;
        let mut end = start;
        while end < region_of.len() && region_of[end].0 == region {
            end += 1;
        }
        let mut k = start;
        while k + s <= end {
            let members: Vec<usize> = region_of[k..k + s].iter().map(|&(_, i)| i).collect();
            let mut center = vec![0.0; d];
            for &i in &members {
                for (c, &v) in center.iter_mut().zip(&dirs[i]) {
                    *c += v;
                }
            }
            let cn = norm2(&center);
            if cn > 1e-12 {
                for c in center.iter_mut() {
                    *c /= cn;
                }
            } else {
                // antipodally spread group; any unit center works, the
                // measured radius then marks it as always-intersected
                center = dirs[members[0]].clone();
            }
            let radius = members
                .iter()
                .map(|&i| dist2(&center, &dirs[i]))
                .fold(0.0, Real::max);
            groups.push(Group { members, center, radius });
            k += s;
        }
        for &(_, i) in &region_of[k..end] {
            leftovers.push(i);
        }
        start = end;
    }
    leftovers.sort_unstable();

    Ok(GroupPartition { groups, leftovers, diameter_bound: 2.0 * eta, eta })
}

/// Conservative test for whether the hyperplane {y : <x, y> = 0} can split a
/// cap of the given chordal radius around `group_center`: true iff
/// |<x, center>| <= radius. Never false for a genuinely split group whose
/// points lie within `group_radius` of the center.
pub fn hyperplane_intersects(group_center: &[Real], group_radius: Real, x: &[Real]) -> bool {
    dot(group_center, x).abs() <= group_radius
}

/// The two-sided cap-measure bound value at chordal radius r. The cited
/// bound has identical closed forms on both sides, so the single value is
/// returned as both bounds.
pub fn cap_measure_bounds(d: usize, r: Real) -> Result<(Real, Real)> {
    if d < 2 {
        return Err(SketchError::invalid("dimension must be at least 2"));
    }
    let limit = 2.0 * (1.0 - 1.0 / ((d as Real + 1.0).sqrt()));
    if !(r > 0.0 && r * r <= limit) {
        return Err(SketchError::invalid(format!(
            "cap radius r = {r} outside validity range r^2 <= {limit:.6}"
        )));
    }
    let kappa = gamma(d as Real / 2.0) / (2.0 * PI.sqrt() * gamma((d as Real + 1.0) / 2.0));
    let v = kappa * r.powi(d as i32 - 1) / (1.0 - r * r / 2.0)
        * (1.0 - r * r / 4.0).powf((d as Real - 1.0) / 2.0);
    Ok((v, v))
}
