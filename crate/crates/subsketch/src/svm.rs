//! SVM point estimation: additive-eps evaluation of the regularized hinge
//! objective F(theta, b) at query points, via the affine lift and per-label
//! hinge coresets over a uniform pre-sample.
//!
//! The regularizer is computed exactly. Per label sign, points enter as
//! lifted rows (-l x, 1) in d+1 dimensions, so the hinge term for class l is
//! max{0, <(theta, 1 - l b), y>}; a p = 1 coreset of the lifted rows keeps
//! barycenters per group, which makes non-intersected groups exact for the
//! hinge as well.

use crate::coreset::{build_additive_with, CoresetParams};
use crate::error::{Result, SketchError};
use crate::model::WeightedPointSet;
use crate::scalar::{dot, norm2};
use crate::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// A labeled dataset for batch use and exact-oracle audits.
#[derive(Debug, Clone)]
pub struct SvmDataset {
    pub points: Vec<Vec<Real>>,
    pub labels: Vec<i8>,
    pub lambda: Real,
}

impl SvmDataset {
    pub fn new(points: Vec<Vec<Real>>, labels: Vec<i8>, lambda: Real) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(SketchError::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&l| l != 1 && l != -1) {
            return Err(SketchError::invalid("labels must be +1 or -1"));
        }
        if lambda < 0.0 {
            return Err(SketchError::invalid("lambda must be nonnegative"));
        }
        Ok(SvmDataset { points, labels, lambda })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact regularized objective
    /// F(theta, b) = lambda/2 ||(theta,b)||^2 + (1/n) sum max{0, 1 - y(<theta,x>+b)}.
    pub fn exact_objective(&self, theta: &[Real], b: Real) -> Real {
        let reg = self.lambda / 2.0
            * (dot(theta, theta) + b * b);
        if self.is_empty() {
            return reg;
        }
        let hinge: Real = self
            .points
            .iter()
            .zip(&self.labels)
            .map(|(x, &l)| (1.0 - l as Real * (dot(theta, x) + b)).max(0.0))
            .sum();
        reg + hinge / self.len() as Real
    }
}

/// Append a -1 coordinate to every row, so that
/// sum_i |<A_i, x> - b|^p = sum_i |<B_i, (x, b)>|^p.
pub fn lift_affine(set: &WeightedPointSet) -> WeightedPointSet {
    let d = set.dim();
    let mut data = Vec::with_capacity(set.len() * (d + 1));
    for (row, _) in set.iter() {
        data.extend_from_slice(row);
        data.push(-1.0);
    }
    WeightedPointSet::new(d + 1, set.p(), data, set.weights().to_vec())
        .expect("lift preserves shape")
}

/// One label class: a weighted set of lifted rows (-l x, 1) whose normalized
/// hinge sum estimates the class average.
#[derive(Debug, Clone)]
pub struct ClassSketch {
    /// Lifted rows with weights summing to ~1.
    pub rows: WeightedPointSet,
    /// Stream count of this class.
    pub n_class: u64,
}

impl ClassSketch {
    /// (1/n_class-normalized) estimate of sum max{0, <(theta, b_t), y>}.
    pub fn hinge(&self, theta: &[Real], b_t: Real) -> Real {
        let mut q = theta.to_vec();
        q.push(b_t);
        self.rows
            .iter()
            .map(|(y, w)| w * dot(y, &q).max(0.0))
            .sum()
    }
}

/// Per-label hinge sketches plus the exact regularizer data.
#[derive(Debug, Clone)]
pub struct SvmSketch {
    pub dim: usize,
    pub lambda: Real,
    pub eps: Real,
    pub n_total: u64,
    pub pos: Option<ClassSketch>,
    pub neg: Option<ClassSketch>,
    pub presample_size: usize,
}

impl SvmSketch {
    pub fn len(&self) -> usize {
        self.pos.as_ref().map_or(0, |c| c.rows.len())
            + self.neg.as_ref().map_or(0, |c| c.rows.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn class(&self, label: i8) -> Option<&ClassSketch> {
        if label > 0 {
            self.pos.as_ref()
        } else {
            self.neg.as_ref()
        }
    }

    /// Transformed per-class objective (1/n_c) sum max{0, b_t - l <theta, x>}.
    pub fn transformed_hinge_estimate(&self, label: i8, theta: &[Real], b_t: Real) -> Real {
        self.class(label).map_or(0.0, |c| c.hinge(theta, b_t))
    }

    /// Estimate of F(theta, b): exact regularizer plus the recombined
    /// per-class hinge estimates (label sign and b -> 1 - l b inverted).
    pub fn query(&self, theta: &[Real], b: Real) -> Result<Real> {
        if theta.len() != self.dim {
            return Err(SketchError::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        let reg = self.lambda / 2.0 * (dot(theta, theta) + b * b);
        if self.n_total == 0 {
            return Ok(reg);
        }
        let mut hinge = 0.0;
        for label in [1i8, -1] {
            if let Some(c) = self.class(label) {
                let frac = c.n_class as Real / self.n_total as Real;
                hinge += frac * c.hinge(theta, 1.0 - label as Real * b);
            }
        }
        Ok(reg + hinge)
    }
}

#[derive(Debug, Clone)]
pub struct SvmParams {
    /// Pre-sample size multiplier: reservoir of c/eps^2 points per class.
    pub c_presample: Real,
    pub coreset: CoresetParams,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c_presample: 8.0, coreset: CoresetParams::default() }
    }
}

/// One-pass builder: per-class reservoir pre-sample, then a p = 1 hinge
/// coreset over the lifted rows at finalize time.
#[derive(Debug)]
pub struct SvmBuilder {
    dim: usize,
    lambda: Real,
    eps: Real,
    params: SvmParams,
    rng: ChaCha12Rng,
    reservoir_cap: usize,
    pos: ReservoirClass,
    neg: ReservoirClass,
}

#[derive(Debug, Default)]
struct ReservoirClass {
    sample: Vec<Vec<Real>>,
    seen: u64,
}

impl ReservoirClass {
    fn ingest<R: Rng>(&mut self, x: &[Real], cap: usize, rng: &mut R) {
        self.seen += 1;
        if self.sample.len() < cap {
            self.sample.push(x.to_vec());
        } else {
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < cap {
                self.sample[j as usize] = x.to_vec();
            }
        }
    }
}

impl SvmBuilder {
    pub fn new(dim: usize, lambda: Real, eps: Real, seed: u64) -> Result<Self> {
        Self::with_params(dim, lambda, eps, seed, SvmParams::default())
    }

    pub fn with_params(
        dim: usize,
        lambda: Real,
        eps: Real,
        seed: u64,
        params: SvmParams,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(SketchError::invalid("eps must lie in (0,1)"));
        }
        if lambda < 0.0 {
            return Err(SketchError::invalid("lambda must be nonnegative"));
        }
        let reservoir_cap = (params.c_presample / (eps * eps)).ceil() as usize;
        Ok(SvmBuilder {
            dim,
            lambda,
            eps,
            params,
            rng: ChaCha12Rng::seed_from_u64(seed),
            reservoir_cap,
            pos: ReservoirClass::default(),
            neg: ReservoirClass::default(),
        })
    }

    pub fn ingest(&mut self, x: &[Real], label: i8) -> Result<()> {
        if x.len() != self.dim {
            return Err(SketchError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if label != 1 && label != -1 {
            return Err(SketchError::invalid("labels must be +1 or -1"));
        }
        let cap = self.reservoir_cap;
        if label > 0 {
            self.pos.ingest(x, cap, &mut self.rng);
        } else {
            self.neg.ingest(x, cap, &mut self.rng);
        }
        Ok(())
    }

    fn build_class(&mut self, label: i8) -> Result<Option<ClassSketch>> {
        let class = if label > 0 { &self.pos } else { &self.neg };
        if class.sample.is_empty() {
            return Ok(None);
        }
        let m = class.sample.len();
        let d = self.dim;
        // lifted rows (-l x, 1) with uniform normalized weights
        let mut data = Vec::with_capacity(m * (d + 1));
        for x in &class.sample {
            for &v in x {
                data.push(-(label as Real) * v);
            }
            data.push(1.0);
        }
        let lifted =
            WeightedPointSet::new(d + 1, 1.0, data, vec![1.0 / m as Real; m])?;
        let sketch =
            build_additive_with(&lifted, self.eps, &self.params.coreset, &mut self.rng)?;
        Ok(Some(ClassSketch { rows: sketch.base, n_class: class.seen }))
    }

    pub fn finalize(mut self) -> Result<SvmSketch> {
        let pos = self.build_class(1)?;
        let neg = self.build_class(-1)?;
        Ok(SvmSketch {
            dim: self.dim,
            lambda: self.lambda,
            eps: self.eps,
            n_total: self.pos.seen + self.neg.seen,
            pos,
            neg,
            presample_size: self.reservoir_cap,
        })
    }
}

/// Convenience batch build over a dataset.
pub fn svm_build(data: &SvmDataset, eps: Real, seed: u64) -> Result<SvmSketch> {
    let dim = data.points.first().map(|x| x.len()).unwrap_or(1);
    let mut b = SvmBuilder::new(dim, data.lambda, eps, seed)?;
    for (x, &l) in data.points.iter().zip(&data.labels) {
        b.ingest(x, l)?;
    }
    b.finalize()
}

/// Worst-norm guard used by input validation in front ends.
pub fn max_point_norm(data: &SvmDataset) -> Real {
    data.points.iter().map(|x| norm2(x)).fold(0.0, Real::max)
}
