//! O(1)-update region sketch: partition the sphere into Voronoi regions of
//! an eta-net and keep, per region, the sum of p-th tensor powers, a point
//! count, and one reservoir sample. Queries read regions the equator misses
//! exactly from the tensor sums and estimate the intersected band from the
//! reservoir points.

use crate::error::{Result, SketchError};
use crate::scalar::{abs_powf, dist2, dot, norm2};
use crate::sphere::{build_net_with, hyperplane_intersects, SphereNet};
use crate::tensor::{apply_direction, sym_dim, SymTensor};
use crate::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct RegionSketchConfig {
    pub dim: usize,
    pub p: u32,
    pub eps: Real,
    /// Tight mode subdivides hot regions instead of opening generations;
    /// valid for d <= 2p + 2.
    pub tight: bool,
    /// Known stream length, or 0 for the doubling estimate.
    pub n_hint: u64,
    pub seed: u64,
}

impl RegionSketchConfig {
    pub fn new(dim: usize, p: u32, eps: Real, seed: u64) -> Self {
        RegionSketchConfig { dim, p, eps, tight: false, n_hint: 0, seed }
    }

    pub fn tight(mut self) -> Self {
        self.tight = true;
        self
    }

    pub fn with_n_hint(mut self, n: u64) -> Self {
        self.n_hint = n;
        self
    }

    fn eta(&self) -> Real {
        let expo = if self.tight {
            2.0 / (self.dim as Real + 2.0 * self.p as Real)
        } else {
            2.0 / (self.dim as Real + 2.0 * self.p as Real - 1.0)
        };
        self.eps.powf(expo).min(0.49)
    }
}

/// One region record. Frozen records stop receiving points but still answer
/// queries; split/generation bookkeeping only affects where new points go.
#[derive(Debug, Clone)]
pub struct RegionRecord {
    pub center: Vec<Real>,
    /// Running max chordal distance of assigned directions to the center.
    pub radius: Real,
    pub tensor: SymTensor<Real>,
    pub count: u64,
    pub reservoir: Option<Vec<Real>>,
    pub generation: u32,
    pub level: u32,
    /// Child record indices in tight mode after a split.
    pub children: Vec<usize>,
    pub frozen: bool,
}

impl RegionRecord {
    fn new(center: Vec<Real>, dim: usize, p: u32, generation: u32, level: u32) -> Self {
        RegionRecord {
            center,
            radius: 0.0,
            tensor: SymTensor::zeros(dim, p),
            count: 0,
            reservoir: None,
            generation,
            level,
            children: Vec::new(),
            frozen: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegionSketch {
    pub config: RegionSketchConfig,
    eta: Real,
    net: SphereNet,
    records: Vec<RegionRecord>,
    /// Live record index per base net region.
    live: HashMap<usize, usize>,
    rng: ChaCha12Rng,
    n_seen: u64,
    n_est: u64,
    ignored_zero_rows: u64,
    stop_radius: Real,
}

impl RegionSketch {
    pub fn new(config: RegionSketchConfig) -> Result<Self> {
        if config.dim < 2 {
            return Err(SketchError::invalid("dimension must be at least 2"));
        }
        if !(config.eps > 0.0 && config.eps < 1.0) {
            return Err(SketchError::invalid("eps must lie in (0,1)"));
        }
        if config.tight && config.dim as u32 > 2 * config.p + 2 {
            return Err(SketchError::unsupported(
                "tight region mode requires d <= 2p + 2",
            ));
        }
        let eta = config.eta();
        let net = build_net_with(config.dim, eta, config.seed, 200)?;
        let stop_radius = config.eps.powf(1.0 / config.p as Real) / 2.0;
        let n_est = if config.n_hint > 0 { config.n_hint } else { 1024 };
        Ok(RegionSketch {
            rng: ChaCha12Rng::seed_from_u64(config.seed ^ 0x7e9),
            eta,
            net,
            records: Vec::new(),
            live: HashMap::new(),
            n_seen: 0,
            n_est,
            ignored_zero_rows: 0,
            stop_radius,
            config,
        })
    }

    /// Rebuild from serialized parts; continued ingestion routes new points
    /// to the latest generation of each base region.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        config: RegionSketchConfig,
        eta: Real,
        net_centers: Vec<Real>,
        records: Vec<RegionRecord>,
        n_seen: u64,
        n_est: u64,
        ignored_zero_rows: u64,
    ) -> Result<Self> {
        let dim = config.dim;
        let net = crate::sphere::SphereNet::from_centers(dim, net_centers, eta)?;
        let mut live = HashMap::new();
        for (i, rec) in records.iter().enumerate() {
            if rec.level == 0 && !rec.frozen && rec.children.is_empty() {
                live.insert(net.nearest(&rec.center), i);
            }
        }
        let stop_radius = config.eps.powf(1.0 / config.p as Real) / 2.0;
        Ok(RegionSketch {
            rng: ChaCha12Rng::seed_from_u64(config.seed ^ 0x7e9),
            eta,
            net,
            records,
            live,
            n_seen,
            n_est,
            ignored_zero_rows,
            stop_radius,
            config,
        })
    }

    pub fn net_centers(&self) -> &[Real] {
        self.net.centers_flat()
    }

    pub fn n_est(&self) -> u64 {
        self.n_est
    }

    pub fn eta(&self) -> Real {
        self.eta
    }

    pub fn n_seen(&self) -> u64 {
        self.n_seen
    }

    pub fn ignored_zero_rows(&self) -> u64 {
        self.ignored_zero_rows
    }

    pub fn records(&self) -> &[RegionRecord] {
        &self.records
    }

    pub fn region_count(&self) -> usize {
        self.records.len()
    }

    /// Tensor slots written per update: constant in the stream length.
    pub fn update_slot_ops(&self) -> usize {
        sym_dim(self.config.dim, self.config.p)
    }

    fn threshold(&self) -> u64 {
        let t = self.eta.powi(self.config.dim as i32 - 1) * self.n_est as Real;
        (t.ceil() as u64).max(8)
    }

    /// Route a direction to its live leaf record, creating the base record
    /// on first use.
    fn route(&mut self, dir: &[Real]) -> usize {
        let base = self.net.nearest(dir);
        let mut idx = match self.live.get(&base) {
            Some(&i) => i,
            None => {
                let rec = RegionRecord::new(
                    self.net.center(base).to_vec(),
                    self.config.dim,
                    self.config.p,
                    0,
                    0,
                );
                self.records.push(rec);
                let i = self.records.len() - 1;
                self.live.insert(base, i);
                i
            }
        };
        // descend subdivision children (tight mode)
        while !self.records[idx].children.is_empty() {
            let mut best = (Real::INFINITY, idx);
            for &c in &self.records[idx].children {
                let d = dist2(&self.records[c].center, dir);
                if d < best.0 {
                    best = (d, c);
                }
            }
            idx = best.1;
        }
        idx
    }

    pub fn ingest(&mut self, row: &[Real]) -> Result<()> {
        if row.len() != self.config.dim {
            return Err(SketchError::DimensionMismatch {
                expected: self.config.dim,
                got: row.len(),
            });
        }
        let n = norm2(row);
        if n == 0.0 {
            self.ignored_zero_rows += 1;
            return Ok(());
        }
        self.n_seen += 1;
        if self.config.n_hint == 0 && self.n_seen > self.n_est {
            // doubling epoch: thresholds recomputed from the new estimate
            self.n_est *= 2;
        }
        let dir: Vec<Real> = row.iter().map(|v| v / n).collect();
        let idx = self.route(&dir);

        let threshold = self.threshold();
        let rec = &mut self.records[idx];
        rec.tensor.accumulate_power(row, 1.0)?;
        rec.count += 1;
        let r = dist2(&rec.center, &dir);
        if r > rec.radius {
            rec.radius = r;
        }
        // reservoir of size one: replace with probability 1/count
        if self.rng.gen_range(0..rec.count) == 0 {
            rec.reservoir = Some(row.to_vec());
        }

        if rec.count > threshold && !rec.frozen {
            if self.config.tight && rec.radius / 2.0 > self.stop_radius {
                self.split(idx)?;
            } else if !self.config.tight {
                self.new_generation(idx);
            }
            // tight mode below the stop radius keeps accumulating: the band
            // contribution of such a region is negligible by construction
        }
        Ok(())
    }

    /// Default mode: freeze the hot record and open a fresh generation for
    /// the same base region.
    fn new_generation(&mut self, idx: usize) {
        let (center, generation) = {
            let rec = &mut self.records[idx];
            rec.frozen = true;
            (rec.center.clone(), rec.generation)
        };
        let rec =
            RegionRecord::new(center, self.config.dim, self.config.p, generation + 1, 0);
        self.records.push(rec);
        let new_idx = self.records.len() - 1;
        // rebind the base region to the fresh record
        let base = self.net.nearest(&self.records[new_idx].center.clone());
        self.live.insert(base, new_idx);
    }

    /// Tight mode: subdivide the hot region by a half-radius packing of its
    /// cap; new points descend to the children.
    fn split(&mut self, idx: usize) -> Result<()> {
        let (center, radius, level) = {
            let rec = &mut self.records[idx];
            rec.frozen = true;
            (rec.center.clone(), rec.radius.max(self.stop_radius), rec.level)
        };
        let child_sep = (radius / 2.0).max(self.stop_radius / 2.0);
        let centers = cap_packing(&center, radius, child_sep, &mut self.rng);
        let mut children = Vec::with_capacity(centers.len());
        for c in centers {
            let rec =
                RegionRecord::new(c, self.config.dim, self.config.p, 0, level + 1);
            self.records.push(rec);
            children.push(self.records.len() - 1);
        }
        self.records[idx].children = children;
        Ok(())
    }

    /// Single-sketch estimate of (1/n) ||Ax||_p^p at a unit direction.
    pub fn query(&self, x: &[Real]) -> Result<Real> {
        if x.len() != self.config.dim {
            return Err(SketchError::DimensionMismatch {
                expected: self.config.dim,
                got: x.len(),
            });
        }
        if self.n_seen == 0 {
            return Ok(0.0);
        }
        let p = self.config.p;
        let mut total = 0.0;
        for rec in &self.records {
            if rec.count == 0 {
                continue;
            }
            if hyperplane_intersects(&rec.center, rec.radius, x) {
                if let Some(z) = &rec.reservoir {
                    total += abs_powf(dot(z, x), p as Real) * rec.count as Real;
                }
            } else {
                // all member inner products share a sign, so the signed
                // tensor contraction recovers the absolute sum
                let v = apply_direction(&rec.tensor, x)?;
                total += v.abs();
            }
        }
        Ok(total / self.n_seen as Real)
    }
}

/// Greedy packing of a spherical cap around `center` at the given
/// separation; used to subdivide hot regions.
fn cap_packing<R: Rng>(
    center: &[Real],
    cap_radius: Real,
    separation: Real,
    rng: &mut R,
) -> Vec<Vec<Real>> {
    let d = center.len();
    let mut accepted: Vec<Vec<Real>> = vec![center.to_vec()];
    let budget = 64 * (1usize << (d - 1).min(8)).max(8);
    let mut stall = 0usize;
    let mut candidates = 0usize;
    while stall < budget && candidates < 100_000 {
        candidates += 1;
        // tangent perturbation of the cap center, projected to the sphere
        let mut v: Vec<Real> = center.to_vec();
        for item in v.iter_mut() {
            let g: Real = rng.sample(rand_distr::StandardNormal);
            *item += g * cap_radius * 0.7;
        }
        let n = norm2(&v);
        if n == 0.0 {
            continue;
        }
        for item in v.iter_mut() {
            *item /= n;
        }
        if dist2(&v, center) > cap_radius {
            continue;
        }
        if accepted.iter().all(|a| dist2(a, &v) > separation) {
            accepted.push(v);
            stall = 0;
        } else {
            stall += 1;
        }
    }
    accepted
}

/// Median-of-replicas wrapper: R independent region sketches over the same
/// stream with distinct seeds, answering with the median estimate.
#[derive(Debug, Clone)]
pub struct RegionEnsemble {
    pub replicas: Vec<RegionSketch>,
}

impl RegionEnsemble {
    pub fn new(config: RegionSketchConfig, replicas: usize) -> Result<Self> {
        let r = replicas.max(1);
        let mut v = Vec::with_capacity(r);
        for i in 0..r {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(i as u64);
            v.push(RegionSketch::new(c)?);
        }
        Ok(RegionEnsemble { replicas: v })
    }

    pub fn ingest(&mut self, row: &[Real]) -> Result<()> {
        for r in self.replicas.iter_mut() {
            r.ingest(row)?;
        }
        Ok(())
    }

    pub fn query(&self, x: &[Real]) -> Result<Real> {
        let mut vals = Vec::with_capacity(self.replicas.len());
        for r in &self.replicas {
            vals.push(r.query(x)?);
        }
        vals.sort_by(|a, b| a.total_cmp(b));
        let m = vals.len();
        Ok(if m % 2 == 1 { vals[m / 2] } else { 0.5 * (vals[m / 2 - 1] + vals[m / 2]) })
    }
}
