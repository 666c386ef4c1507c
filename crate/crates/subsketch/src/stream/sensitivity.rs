//! Two-tier sensitivity-sampled streaming: a constant-budget merge-reduce
//! instance summarizes the prefix to score online lp sensitivities, and rows
//! survive to the accuracy-budget instance with probability proportional to
//! their sensitivity upper bound.

use crate::coreset::{CoresetParams, CoresetSketch};
use crate::error::{Result, SketchError};
use crate::rounding::OnlineSensitivityState;
use crate::stream::merge_reduce::MergeReduce;
use crate::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

#[derive(Debug, Clone)]
pub struct SensitivityParams {
    /// Multiplier in beta = c_beta * d * ln(1/eps) / eps^2.
    pub c_beta: Real,
    /// Scorer refresh cadence in rows (also refreshed whenever the observed
    /// row space grows).
    pub refresh_every: usize,
    /// Budget of the prefix-summary instance.
    pub summary_eps: Real,
}

impl Default for SensitivityParams {
    fn default() -> Self {
        SensitivityParams { c_beta: 4.0, refresh_every: 64, summary_eps: 0.5 }
    }
}

#[derive(Debug)]
pub struct SensitivityStream {
    dim: usize,
    eps: Real,
    beta: Real,
    alg1: MergeReduce,
    alg2: MergeReduce,
    scorer: OnlineSensitivityState,
    params: SensitivityParams,
    rng: ChaCha12Rng,
    rows_since_refresh: usize,
    n_seen: u64,
    sampled: u64,
    tau_sum: Real,
}

impl SensitivityStream {
    pub fn new(dim: usize, p: Real, eps: Real, n_hint: u64, seed: u64) -> Result<Self> {
        Self::with_params(dim, p, eps, n_hint, seed, SensitivityParams::default())
    }

    pub fn with_params(
        dim: usize,
        p: Real,
        eps: Real,
        n_hint: u64,
        seed: u64,
        params: SensitivityParams,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(SketchError::invalid("eps must lie in (0,1)"));
        }
        let beta =
            params.c_beta * dim as Real * (1.0 / eps).ln().max(1.0) / (eps * eps);
        // the summary instance favors fewer, larger reduces
        let alg1 = MergeReduce::with_params(
            dim,
            p,
            params.summary_eps,
            n_hint,
            seed ^ 0xa11c_e001,
            CoresetParams::default(),
            128,
        )?;
        let alg2 = MergeReduce::new(dim, p, eps, n_hint.min(1 << 16), seed ^ 0xa11c_e002)?;
        Ok(SensitivityStream {
            dim,
            eps,
            beta,
            alg1,
            alg2,
            scorer: OnlineSensitivityState::new(dim, p),
            params,
            rng: ChaCha12Rng::seed_from_u64(seed),
            rows_since_refresh: usize::MAX / 2,
            n_seen: 0,
            sampled: 0,
            tau_sum: 0.0,
        })
    }

    pub fn n_seen(&self) -> u64 {
        self.n_seen
    }

    /// Rows that survived the sampling stage.
    pub fn sampled_rows(&self) -> u64 {
        self.sampled
    }

    /// Running sum of the sensitivity upper bounds tau_t.
    pub fn tau_sum(&self) -> Real {
        self.tau_sum
    }

    pub fn peak_rows(&self) -> usize {
        self.alg1.peak_rows() + self.alg2.peak_rows()
    }

    pub fn ingest(&mut self, row: &[Real]) -> Result<()> {
        if row.len() != self.dim {
            return Err(SketchError::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        self.n_seen += 1;
        if self.scorer.needs_refresh() || self.rows_since_refresh >= self.params.refresh_every {
            let summary = self.alg1.current_rows()?;
            if !summary.is_empty() {
                self.scorer.refresh(&summary)?;
            }
            self.rows_since_refresh = 0;
        } else {
            self.rows_since_refresh += 1;
        }

        let tau = self.scorer.sensitivity_upper(row);
        self.tau_sum += tau;
        let p_t = (self.beta * tau).min(1.0);
        if p_t > 0.0 && self.rng.gen::<Real>() < p_t {
            // survival weight 1/p_t keeps the estimator unbiased
            self.alg2.ingest(row, 1.0 / p_t)?;
            self.sampled += 1;
        }
        self.scorer.observe_row(row);
        self.alg1.ingest(row, 1.0)?;
        Ok(())
    }

    pub fn finalize(&mut self) -> Result<CoresetSketch> {
        self.alg2.finalize()
    }

    pub fn eps(&self) -> Real {
        self.eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{exact_lp_power_slice, random_unit, WeightedPointSet};
    use std::f64::consts::PI;

    #[test]
    fn sampling_thins_dependent_rows() {
        // rows in general position early, later rows inside the span: the
        // later sampling probabilities drop below 1
        let n = 4000usize;
        let mut st = SensitivityStream::new(2, 1.0, 0.3, n as u64, 5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..n {
            let t = rng.gen_range(0.0..2.0 * PI);
            st.ingest(&[t.cos(), t.sin()]).unwrap();
        }
        assert!(st.sampled_rows() < n as u64 / 2, "sampled {}", st.sampled_rows());
        assert!(st.sampled_rows() > 16);
    }

    #[test]
    fn final_sketch_passes_oracle_audit() {
        let n = 4000usize;
        let eps = 0.25;
        let mut st = SensitivityStream::new(2, 1.0, eps, n as u64, 9).unwrap();
        let mut rows = Vec::new();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..n {
            let t = rng.gen_range(0.0..2.0 * PI);
            let r = [t.cos(), t.sin()];
            st.ingest(&r).unwrap();
            rows.extend_from_slice(&r);
        }
        let full = WeightedPointSet::unweighted(2, 1.0, rows).unwrap();
        let sk = st.finalize().unwrap();
        let mut qr = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..300 {
            let x = random_unit(2, &mut qr);
            let est = sk.query(&x).unwrap().estimate;
            let exact = exact_lp_power_slice(&full, &x);
            let rel = (est - exact).abs() / exact;
            assert!(rel <= 3.0 * eps, "rel {rel}");
        }
    }

    #[test]
    fn expected_sample_count_tracks_beta_tau_sum() {
        let n = 3000usize;
        let mut st = SensitivityStream::new(2, 1.0, 0.3, n as u64, 11).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..n {
            let t = rng.gen_range(0.0..2.0 * PI);
            st.ingest(&[t.cos(), t.sin()]).unwrap();
        }
        // sampled ~ sum of min(1, beta tau); tau_sum upper-bounds that sum,
        // and the count cannot be far below beta-scaled mass for this data
        assert!((st.sampled_rows() as Real) <= st.tau_sum() * st.beta + 32.0);
    }
}
