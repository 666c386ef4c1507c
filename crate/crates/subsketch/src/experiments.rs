//! Experiment harness: the scaling-law measurements behind the acceptance
//! suite and the `experiment` CLI reports.
//!
//! Each experiment returns its grid rows plus a fitted log-log slope and the
//! expected exponent, so callers can render CSV or assert tolerances.

use crate::coreset::{build_additive_with, group_size, halve_detailed, CoresetParams};
use crate::error::Result;
use crate::harmonics::{self, ols_slope, LambdaTable};
use crate::model::{random_unit, WeightedPointSet};
use crate::svm::{SvmBuilder, SvmParams};
use crate::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;

/// One measured grid point.
#[derive(Debug, Clone, Copy)]
pub struct ScalingRow {
    /// Grid parameter (eps or N).
    pub param: Real,
    /// Measured quantity (size, error or separation).
    pub value: Real,
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Log-log slope of value against the grid parameter.
    pub fitted_slope: Real,
    pub expected_slope: Real,
}

fn fit_rows(rows: &[ScalingRow], expected: Real) -> ScalingReport {
    let xs: Vec<Real> = rows.iter().map(|r| r.param.ln()).collect();
    let ys: Vec<Real> = rows.iter().map(|r| r.value.max(1e-300).ln()).collect();
    ScalingReport { rows: rows.to_vec(), fitted_slope: ols_slope(&xs, &ys), expected_slope: expected }
}

/// Equally spaced unit vectors on the circle (with a phase), uniform weights
/// normalized to the simplex.
pub fn uniform_circle(n: usize, p: Real, phase: Real) -> WeightedPointSet {
    let mut data = Vec::with_capacity(2 * n);
    for k in 0..n {
        let t = 2.0 * PI * (k as Real) / (n as Real) + phase;
        data.extend_from_slice(&[t.cos(), t.sin()]);
    }
    WeightedPointSet::new(2, p, data, vec![1.0 / n as Real; n]).expect("valid set")
}

/// Seeded uniform random unit vectors, normalized weights.
pub fn uniform_sphere(n: usize, d: usize, p: Real, seed: u64) -> WeightedPointSet {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        data.extend(random_unit(d, &mut rng));
    }
    WeightedPointSet::new(d, p, data, vec![1.0 / n as Real; n]).expect("valid set")
}

/// Additive-coreset size against 1/eps. Expected slope 2(d-1)/(d+2p).
pub fn coreset_size_scaling(
    d: usize,
    p: u32,
    eps_grid: &[Real],
    n: usize,
    seeds: &[u64],
) -> Result<ScalingReport> {
    let params = CoresetParams::default();
    let mut rows = Vec::new();
    for &eps in eps_grid {
        let mut log_sum = 0.0;
        for &seed in seeds {
            let set = if d == 2 {
                uniform_circle(n, p as Real, seed as Real * 0.001)
            } else {
                uniform_sphere(n, d, p as Real, seed)
            };
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let sk = build_additive_with(&set, eps, &params, &mut rng)?;
            log_sum += (sk.len() as Real).ln();
        }
        let geo_mean = (log_sum / seeds.len() as Real).exp();
        rows.push(ScalingRow { param: 1.0 / eps, value: geo_mean });
    }
    let expected = 2.0 * (d as Real - 1.0) / (d as Real + 2.0 * p as Real);
    Ok(fit_rows(&rows, expected))
}

/// Sup error of a single halving round against N.
/// Expected slope -(d+2p)/(2(d-1)).
pub fn halve_error_scaling(
    d: usize,
    p: u32,
    n_grid: &[usize],
    seeds: &[u64],
) -> Result<ScalingReport> {
    let params = CoresetParams::default();
    let s = group_size(d, p);
    let mut rows = Vec::new();
    for &n in n_grid {
        let mut log_sum = 0.0;
        for &seed in seeds {
            let set = if d == 2 {
                uniform_circle(n, p as Real, seed as Real * 0.01)
            } else {
                uniform_sphere(n, d, p as Real, seed)
            };
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5a);
            let out = halve_detailed(&set, s, &params, &mut rng)?;
            let budget = (4 * n).clamp(2000, 60_000);
            let err =
                harmonics::sup_weighted_difference(&set, &out.output, budget, seed ^ 0x11)?;
            log_sum += err.max(1e-300).ln();
        }
        rows.push(ScalingRow { param: n as Real, value: (log_sum / seeds.len() as Real).exp() });
    }
    let expected = -(d as Real + 2.0 * p as Real) / (2.0 * (d as Real - 1.0));
    Ok(fit_rows(&rows, expected))
}

/// Separation delta(N) for the extremal interleaved-lattice pair on the
/// circle: A and B are the even- and odd-indexed points of a 2N-point
/// angular lattice (both symmetric around the origin, mutually separated by
/// the lattice spacing). Expected slope -(d+2p)/(2(d-1)) = -(p+1) at d=2.
pub fn delta_scaling(p: u32, n_grid: &[usize]) -> Result<ScalingReport> {
    let mut rows = Vec::new();
    for &n in n_grid {
        // 2n lattice points; even m keeps each half symmetric under negation
        let m = n + (n & 1);
        let lattice = 2 * m;
        let mut a = Vec::with_capacity(m * 2);
        let mut b = Vec::with_capacity(m * 2);
        for k in 0..lattice {
            let t = 2.0 * PI * (k as Real) / (lattice as Real);
            if k % 2 == 0 {
                a.extend_from_slice(&[t.cos(), t.sin()]);
            } else {
                b.extend_from_slice(&[t.cos(), t.sin()]);
            }
        }
        let wa = vec![1.0 / m as Real; m];
        let sa = WeightedPointSet::new(2, p as Real, a, wa.clone())?;
        let sb = WeightedPointSet::new(2, p as Real, b, wa)?;
        let budget = (6 * m).clamp(4000, 80_000);
        let delta = harmonics::separation_delta(&sa, &sb, budget, 7)? * m as Real;
        // separation_delta normalizes by n; the lattice pair is already
        // weight-normalized, so undo the extra factor
        rows.push(ScalingRow { param: m as Real, value: delta });
    }
    let expected = -(2.0 + 2.0 * p as Real) / 2.0;
    Ok(fit_rows(&rows, expected))
}

/// One row of the eigenvalue report.
#[derive(Debug, Clone, Copy)]
pub struct LambdaRow {
    pub k: usize,
    pub value: Real,
}

#[derive(Debug, Clone)]
pub struct LambdaReport {
    pub d: usize,
    pub p: Real,
    pub rows: Vec<LambdaRow>,
    pub fitted_slope: Option<Real>,
    pub expected_slope: Real,
}

/// Eigenvalue table plus the fitted decay exponent (None when the exponent
/// is meaningless, i.e. even p where the tail vanishes).
pub fn lambda_report(d: usize, p: Real, k_max: usize) -> Result<LambdaReport> {
    let table = LambdaTable::compute(d, p, k_max)?;
    let rows: Vec<LambdaRow> =
        (0..=k_max).map(|k| LambdaRow { k, value: table.value(k) }).collect();
    let even_p = (p - p.round()).abs() < 1e-12 && (p.round() as i64) % 2 == 0;
    let fitted = if even_p {
        None
    } else {
        Some(harmonics::lambda_decay_check(d, p, k_max)?)
    };
    Ok(LambdaReport {
        d,
        p,
        rows,
        fitted_slope: fitted,
        expected_slope: -(d as Real / 2.0 + p),
    })
}

/// SVM sketch size against 1/eps. Expected slope 2d/(d+3).
pub fn svm_size_scaling(
    d: usize,
    eps_grid: &[Real],
    n: usize,
    seeds: &[u64],
) -> Result<ScalingReport> {
    let mut rows = Vec::new();
    for &eps in eps_grid {
        let mut log_sum = 0.0;
        for &seed in seeds {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut b = SvmBuilder::with_params(d, 0.1, eps, seed, SvmParams::default())?;
            for _ in 0..n {
                let x = random_unit(d, &mut rng);
                let label = if rng.gen::<bool>() { 1 } else { -1 };
                b.ingest(&x, label)?;
            }
            let sk = b.finalize()?;
            log_sum += (sk.len().max(1) as Real).ln();
        }
        rows.push(ScalingRow {
            param: 1.0 / eps,
            value: (log_sum / seeds.len() as Real).exp(),
        });
    }
    let expected = 2.0 * d as Real / (d as Real + 3.0);
    Ok(fit_rows(&rows, expected))
}
