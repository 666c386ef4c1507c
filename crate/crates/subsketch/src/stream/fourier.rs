//! d = 2 harmonic-truncation sketch: maintain weighted trigonometric moments
//! sum_i w_i cos(k theta_i), sum_i w_i sin(k theta_i) for k <= K and answer
//! h(x) = sum_i w_i |cos(theta_x - theta_i)|^p from the truncated cosine
//! series of |cos|^p. The series coefficients are the Funk-Hecke eigenvalues:
//! a_0 = lambda_0 and a_k = 2 lambda_k for even k >= 2.

use crate::error::{Result, SketchError};
use crate::harmonics::LambdaTable;
use crate::Real;

#[derive(Debug, Clone)]
pub struct FourierSketch {
    pub p: Real,
    pub k_max: usize,
    lambda: Vec<Real>,
    cos_m: Vec<Real>,
    sin_m: Vec<Real>,
    total_weight: Real,
}

impl FourierSketch {
    /// Truncation order for a target additive error: K ~ (ln(1/eps)/eps)^{1/p}.
    pub fn order_for(p: Real, eps: Real) -> usize {
        let base = (1.0 / eps) * (1.0 / eps).ln().max(1.0);
        let k = (0.5 * base.powf(1.0 / p)).ceil() as usize;
        // round up to even, and keep at least the exact band for even p
        let k = k.max(p.ceil() as usize + 1).max(4);
        k + (k & 1)
    }

    pub fn new(p: Real, eps: Real) -> Result<Self> {
        Self::with_order(p, Self::order_for(p, eps))
    }

    pub fn with_order(p: Real, k_max: usize) -> Result<Self> {
        if p < 1.0 {
            return Err(SketchError::invalid("p must be at least 1"));
        }
        let table = LambdaTable::compute(2, p, k_max)?;
        if !table.converged {
            return Err(SketchError::numeric("eigenvalue quadrature did not converge"));
        }
        Ok(FourierSketch {
            p,
            k_max,
            lambda: table.values,
            cos_m: vec![0.0; k_max + 1],
            sin_m: vec![0.0; k_max + 1],
            total_weight: 0.0,
        })
    }

    pub fn total_weight(&self) -> Real {
        self.total_weight
    }

    /// Number of maintained moment slots.
    pub fn moment_count(&self) -> usize {
        2 * (self.k_max + 1)
    }

    pub fn ingest_angle(&mut self, theta: Real, weight: Real) {
        for k in 0..=self.k_max {
            let kt = k as Real * theta;
            self.cos_m[k] += weight * kt.cos();
            self.sin_m[k] += weight * kt.sin();
        }
        self.total_weight += weight;
    }

    /// Ingest a 2-vector; zero vectors are ignored, off-sphere points are
    /// used at their angular position (the caller owns any norm weighting).
    pub fn ingest_point(&mut self, row: &[Real], weight: Real) -> Result<()> {
        if row.len() != 2 {
            return Err(SketchError::unsupported("harmonic sketch supports d = 2 only"));
        }
        if row[0] == 0.0 && row[1] == 0.0 {
            return Ok(());
        }
        self.ingest_angle(row[1].atan2(row[0]), weight);
        Ok(())
    }

    /// Estimate of sum_i w_i |cos(theta_x - theta_i)|^p.
    pub fn query_angle(&self, theta_x: Real) -> Real {
        let mut acc = self.lambda[0] * self.cos_m[0];
        let mut k = 2;
        while k <= self.k_max {
            let kt = k as Real * theta_x;
            acc += 2.0 * self.lambda[k] * (kt.cos() * self.cos_m[k] + kt.sin() * self.sin_m[k]);
            k += 2;
        }
        acc
    }

    pub fn query_point(&self, x: &[Real]) -> Result<Real> {
        if x.len() != 2 {
            return Err(SketchError::DimensionMismatch { expected: 2, got: x.len() });
        }
        Ok(self.query_angle(x[1].atan2(x[0])))
    }

    /// Moment magnitudes never exceed the ingested weight mass.
    pub fn moments_bounded(&self) -> bool {
        self.cos_m
            .iter()
            .chain(&self.sin_m)
            .all(|m| m.abs() <= self.total_weight.abs() + 1e-12)
    }

    /// Slotwise merge of two sketches over the same order and exponent.
    pub fn merge(&mut self, other: &FourierSketch) -> Result<()> {
        if self.k_max != other.k_max || (self.p - other.p).abs() > 1e-12 {
            return Err(SketchError::invalid("mismatched sketch shapes"));
        }
        for k in 0..=self.k_max {
            self.cos_m[k] += other.cos_m[k];
            self.sin_m[k] += other.sin_m[k];
        }
        self.total_weight += other.total_weight;
        Ok(())
    }

    pub fn moments(&self) -> (&[Real], &[Real]) {
        (&self.cos_m, &self.sin_m)
    }

    pub fn lambda(&self) -> &[Real] {
        &self.lambda
    }

    /// Restore from serialized parts.
    pub fn from_parts(
        p: Real,
        k_max: usize,
        lambda: Vec<Real>,
        cos_m: Vec<Real>,
        sin_m: Vec<Real>,
        total_weight: Real,
    ) -> Result<Self> {
        if lambda.len() != k_max + 1 || cos_m.len() != k_max + 1 || sin_m.len() != k_max + 1 {
            return Err(SketchError::invalid("inconsistent moment table sizes"));
        }
        Ok(FourierSketch { p, k_max, lambda, cos_m, sin_m, total_weight })
    }
}
