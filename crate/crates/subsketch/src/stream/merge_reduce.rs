//! Merge-and-reduce: exponential block hierarchy that turns the offline
//! coreset into a one-pass streaming algorithm.
//!
//! Blocks B_0, B_1, ... hold at most M_s rows each; B_0 collects raw rows,
//! and on overflow the occupied prefix B_0..B_{i-1} is reduced into the
//! first empty block at per-level budget gamma = eps / log2(n_hint). A block
//! at level i is a (1 + gamma)^i coreset of its 2^{i-1} M_s source rows.

use crate::coreset::{
    build_multiplicative_with, target_size, CoresetParams, CoresetSketch, SketchMode,
};
use crate::error::{Result, SketchError};
use crate::model::WeightedPointSet;
use crate::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct MergeReduce {
    dim: usize,
    p: Real,
    eps: Real,
    gamma: Real,
    /// Block capacity M_s.
    pub block_capacity: usize,
    b0: WeightedPointSet,
    levels: Vec<Option<WeightedPointSet>>,
    params: CoresetParams,
    rng: ChaCha12Rng,
    n_seen: u64,
    reduce_count: usize,
    peak_rows: usize,
    transient_peak_rows: usize,
}

impl MergeReduce {
    /// `n_hint` sizes the per-level budget; it does not have to be exact,
    /// only the right order of magnitude (0 picks a default of 2^20).
    pub fn new(dim: usize, p: Real, eps: Real, n_hint: u64, seed: u64) -> Result<Self> {
        Self::with_params(dim, p, eps, n_hint, seed, CoresetParams::default(), 0)
    }

    pub fn with_params(
        dim: usize,
        p: Real,
        eps: Real,
        n_hint: u64,
        seed: u64,
        params: CoresetParams,
        min_block: usize,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(SketchError::invalid("eps must lie in (0,1)"));
        }
        let pint = if p.fract().abs() < 1e-12 && p >= 1.0 {
            p as u32
        } else {
            return Err(SketchError::unsupported("merge-reduce requires integer p"));
        };
        let n_hint = if n_hint == 0 { 1 << 20 } else { n_hint.max(4) };
        let log_n = (n_hint as Real).log2().ceil().max(1.0);
        let gamma = eps / log_n;
        let block_capacity =
            target_size(dim, pint, gamma.min(0.999), params.c_size).max(min_block.max(8));
        Ok(MergeReduce {
            dim,
            p,
            eps,
            gamma,
            block_capacity,
            b0: WeightedPointSet::new(dim, p, vec![], vec![])?,
            levels: Vec::new(),
            params,
            rng: ChaCha12Rng::seed_from_u64(seed),
            n_seen: 0,
            reduce_count: 0,
            peak_rows: 0,
            transient_peak_rows: 0,
        })
    }

    pub fn n_seen(&self) -> u64 {
        self.n_seen
    }

    pub fn reduce_count(&self) -> usize {
        self.reduce_count
    }

    /// High-water mark of rows retained across blocks between updates.
    pub fn peak_rows(&self) -> usize {
        self.peak_rows
    }

    /// High-water mark including the concatenation materialized during a
    /// reduce step.
    pub fn transient_peak_rows(&self) -> usize {
        self.transient_peak_rows
    }

    pub fn levels_in_use(&self) -> usize {
        self.levels.iter().filter(|l| l.is_some()).count()
    }

    fn retained_rows(&self) -> usize {
        self.b0.len()
            + self.levels.iter().map(|l| l.as_ref().map_or(0, |b| b.len())).sum::<usize>()
    }

    pub fn ingest(&mut self, row: &[Real], weight: Real) -> Result<()> {
        if row.len() != self.dim {
            return Err(SketchError::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        self.n_seen += 1;
        if self.b0.len() < self.block_capacity {
            self.b0.push(row, weight)?;
        } else {
            self.reduce()?;
            self.b0.push(row, weight)?;
        }
        self.peak_rows = self.peak_rows.max(self.retained_rows());
        Ok(())
    }

    fn reduce(&mut self) -> Result<()> {
        // first empty level
        let mut i = 0;
        while i < self.levels.len() && self.levels[i].is_some() {
            i += 1;
        }
        if i == self.levels.len() {
            self.levels.push(None);
        }
        // concatenate B_0 .. B_{i-1}
        let mut merged = std::mem::replace(
            &mut self.b0,
            WeightedPointSet::new(self.dim, self.p, vec![], vec![])?,
        );
        for level in self.levels.iter_mut().take(i) {
            if let Some(block) = level.take() {
                for (row, w) in block.iter() {
                    merged.push(row, w)?;
                }
            }
        }
        self.transient_peak_rows = self
            .transient_peak_rows
            .max(self.retained_rows() + merged.len());
        let reduced = reduce_to_coreset(&merged, self.gamma, &self.params, &mut self.rng)?;
        self.levels[i] = Some(reduced);
        self.reduce_count += 1;
        Ok(())
    }

    /// All currently retained rows (raw block concatenation). This is a
    /// (1 + eps)-quality summary of the full prefix at any point.
    pub fn current_rows(&self) -> Result<WeightedPointSet> {
        let mut all = self.b0.clone();
        for block in self.levels.iter().flatten() {
            for (row, w) in block.iter() {
                all.push(row, w)?;
            }
        }
        Ok(all)
    }

    /// Final coreset over all nonempty blocks at the full budget. A stream
    /// that never overflowed B_0 is returned verbatim (zero error).
    pub fn finalize(&mut self) -> Result<CoresetSketch> {
        let all = self.current_rows()?;
        if all.is_empty() || self.reduce_count == 0 {
            return Ok(CoresetSketch {
                base: all,
                eps: self.eps,
                mode: SketchMode::Multiplicative,
                transform: None,
                rounds: 0,
                flags: vec![],
            });
        }
        reduce_final(&all, self.eps, &self.params, &mut self.rng)
    }
}

fn reduce_to_coreset<R: Rng>(
    set: &WeightedPointSet,
    budget: Real,
    params: &CoresetParams,
    rng: &mut R,
) -> Result<WeightedPointSet> {
    let pint = set.integer_p().expect("validated at construction");
    if set.len() <= target_size(set.dim(), pint, budget, params.c_size) {
        return Ok(set.clone());
    }
    Ok(build_multiplicative_with(set, budget, params, rng)?.base)
}

fn reduce_final<R: Rng>(
    set: &WeightedPointSet,
    eps: Real,
    params: &CoresetParams,
    rng: &mut R,
) -> Result<CoresetSketch> {
    let pint = set.integer_p().expect("validated at construction");
    if set.len() <= target_size(set.dim(), pint, eps, params.c_size) {
        return Ok(CoresetSketch {
            base: set.clone(),
            eps,
            mode: SketchMode::Multiplicative,
            transform: None,
            rounds: 0,
            flags: vec![],
        });
    }
    build_multiplicative_with(set, eps, params, rng)
}
