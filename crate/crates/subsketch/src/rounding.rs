//! Linear preprocessing: normalizing the John ellipsoid of
//! Z(A) = {x : ||Ax||_p <= 1}, well-conditioned bases, and online
//! lp-sensitivity approximation for streamed rows.
//!
//! The rounding transform is found by a Lewis-weight fixed point (exact for
//! p = 2, fast for the small p used here) with a boundary-sampled
//! minimum-volume-ellipsoid fallback; either way the sandwich factor is
//! certified by direction sampling and the transform is rescaled so the
//! certified maximum of ||ATx||_p over unit x is 1.

use crate::error::{Result, SketchError};
use crate::model::{random_unit, WeightedPointSet};
use crate::scalar::{abs_powf, norm2};
use crate::Real;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;

const RANK_TOL: Real = 1e-10;

/// Invertible d x d map with a certified sandwich factor:
/// after rescaling, ||ATx||_p <= 1 and >= 1/distortion for unit x in the
/// row space of A.
#[derive(Debug, Clone)]
pub struct RoundingTransform {
    pub matrix: DMatrix<Real>,
    pub inverse: DMatrix<Real>,
    /// Certified max/min ratio of ||ATx||_p over sampled unit directions.
    pub distortion: Real,
    /// Sandwich target sqrt(d(d+1)) * 1.1 was met.
    pub certified: bool,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl RoundingTransform {
    pub fn identity(d: usize) -> Self {
        RoundingTransform {
            matrix: DMatrix::identity(d, d),
            inverse: DMatrix::identity(d, d),
            distortion: 1.0,
            certified: true,
            rank: d,
            rank_deficient: false,
        }
    }

    /// Apply to a row vector: a' = T^t a.
    pub fn apply_row(&self, a: &[Real]) -> Vec<Real> {
        let v = self.matrix.tr_mul(&DVector::from_column_slice(a));
        v.as_slice().to_vec()
    }

    /// Map a sketch row back to the original coordinates: b = T^{-t} w.
    pub fn unapply_row(&self, w: &[Real]) -> Vec<Real> {
        let v = self.inverse.tr_mul(&DVector::from_column_slice(w));
        v.as_slice().to_vec()
    }
}

/// Rows of the set folded with their weights: w^{1/p} * a.
fn folded_matrix(set: &WeightedPointSet) -> DMatrix<Real> {
    let n = set.len();
    let d = set.dim();
    let p = set.p();
    let mut m = DMatrix::zeros(n, d);
    for (i, (row, w)) in set.iter().enumerate() {
        let f = w.powf(1.0 / p);
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = f * v;
        }
    }
    m
}

fn lp_norm_rows(b: &DMatrix<Real>, x: &DVector<Real>, p: Real) -> Real {
    let y = b * x;
    y.iter().map(|&v| abs_powf(v, p)).sum::<Real>().powf(1.0 / p)
}

/// Unit directions used for certification: a dense angular grid for r = 2,
/// otherwise axes plus seeded random unit vectors.
fn certify_directions(r: usize, budget: usize, seed: u64) -> Vec<DVector<Real>> {
    let mut dirs = Vec::new();
    if r == 1 {
        dirs.push(DVector::from_element(1, 1.0));
        return dirs;
    }
    if r == 2 {
        let m = budget.max(256);
        for k in 0..m {
            let t = PI * (k as Real) / (m as Real);
            dirs.push(DVector::from_column_slice(&[t.cos(), t.sin()]));
        }
        return dirs;
    }
    for i in 0..r {
        let mut e = DVector::zeros(r);
        e[i] = 1.0;
        dirs.push(e.clone());
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..budget.max(512) {
        dirs.push(DVector::from_column_slice(&random_unit(r, &mut rng)));
    }
    dirs
}

/// Lewis-weight fixed point for the matrix `b`; returns M = B^t W^{1-2/p} B.
fn lewis_quadratic(b: &DMatrix<Real>, p: Real) -> Option<DMatrix<Real>> {
    let n = b.nrows();
    let r = b.ncols();
    if p == 2.0 {
        return Some(b.tr_mul(b));
    }
    let mut w: Vec<Real> = vec![1.0; n];
    let damp = if p >= 4.0 { 0.5 } else { 1.0 };
    for _ in 0..200 {
        let mut m = DMatrix::<Real>::zeros(r, r);
        for i in 0..n {
            let f = w[i].powf(1.0 - 2.0 / p);
            let row = b.row(i);
            for a in 0..r {
                for c in 0..r {
                    m[(a, c)] += f * row[a] * row[c];
                }
            }
        }
        let minv = m.clone().try_inverse()?;
        let mut max_rel: Real = 0.0;
        for i in 0..n {
            let row = b.row(i).transpose();
            let q = (&minv * &row).dot(&row).max(0.0);
            let target = q.powf(p / 2.0);
            let next = if damp == 1.0 {
                target
            } else {
                w[i].powf(1.0 - damp) * target.powf(damp)
            };
            if next > 0.0 && w[i] > 0.0 {
                max_rel = max_rel.max((next / w[i]).ln().abs());
            }
            w[i] = next.max(1e-300);
        }
        if max_rel < 1e-12 {
            break;
        }
    }
    let mut m = DMatrix::<Real>::zeros(r, r);
    for i in 0..n {
        let f = w[i].powf(1.0 - 2.0 / p);
        let row = b.row(i);
        for a in 0..r {
            for c in 0..r {
                m[(a, c)] += f * row[a] * row[c];
            }
        }
    }
    Some(m)
}

/// Boundary-sampled minimum-volume enclosing ellipsoid of the symmetric body
/// Z(B): Khachiyan iteration over boundary points q_j = x_j / ||B x_j||_p.
fn mvee_quadratic(b: &DMatrix<Real>, p: Real, seed: u64) -> Option<DMatrix<Real>> {
    let r = b.ncols();
    let dirs = certify_directions(r, if r == 2 { 256 } else { 1024 }, seed);
    let mut pts: Vec<DVector<Real>> = Vec::with_capacity(dirs.len());
    for x in dirs {
        let g = lp_norm_rows(b, &x, p);
        if g > 1e-300 {
            pts.push(x / g);
        }
    }
    if pts.is_empty() {
        return None;
    }
    let k = pts.len();
    let mut u = vec![1.0 / k as Real; k];
    for _ in 0..20_000 {
        let mut x = DMatrix::<Real>::zeros(r, r);
        for (j, q) in pts.iter().enumerate() {
            x += u[j] * q * q.transpose();
        }
        let xinv = x.try_inverse()?;
        let (mut jmax, mut emax) = (0usize, -1.0);
        for (j, q) in pts.iter().enumerate() {
            let e = (&xinv * q).dot(q);
            if e > emax {
                emax = e;
                jmax = j;
            }
        }
        if emax <= r as Real * 1.02 {
            break;
        }
        let beta = (emax - r as Real) / (r as Real * (emax - 1.0));
        for v in u.iter_mut() {
            *v *= 1.0 - beta;
        }
        u[jmax] += beta;
    }
    let mut x = DMatrix::<Real>::zeros(r, r);
    for (j, q) in pts.iter().enumerate() {
        x += u[j] * q * q.transpose();
    }
    // E_out = {y : y^t (X^{-1}/r) y <= 1} contains Z(B); M = X^{-1}/r
    Some(x.try_inverse()? / r as Real)
}

fn inv_sqrt_sym(m: &DMatrix<Real>) -> Option<DMatrix<Real>> {
    let eig = m.clone().symmetric_eigen();
    let r = m.nrows();
    let mut d = DMatrix::zeros(r, r);
    for i in 0..r {
        let ev = eig.eigenvalues[i];
        if ev <= 0.0 || !ev.is_finite() {
            return None;
        }
        d[(i, i)] = 1.0 / ev.sqrt();
    }
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Rounding of Z(A) for the weighted set: returns T (d x d, invertible) with
/// the certified distortion. Rank-deficient inputs are rounded within their
/// row space and flagged; directions orthogonal to the row space are left
/// untouched by T.
pub fn john_round(set: &WeightedPointSet) -> Result<RoundingTransform> {
    john_round_seeded(set, 0x6a6f686e)
}

pub fn john_round_seeded(set: &WeightedPointSet, seed: u64) -> Result<RoundingTransform> {
    let d = set.dim();
    if set.is_empty() || set.iter().all(|(r, w)| w * norm2(r) == 0.0) {
        return Err(SketchError::degenerate("rounding needs at least one weighted nonzero row"));
    }
    let p = set.p();
    let a = folded_matrix(set);

    // row-space basis via SVD
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.iter().fold(0.0, |m: Real, &s| m.max(s));
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOL * smax.max(1.0)).count();
    if rank == 0 {
        return Err(SketchError::degenerate("zero-rank input"));
    }
    let rank_deficient = rank < d;
    let vr = vt.rows(0, rank).transpose(); // d x r, orthonormal columns

    let b = &a * &vr; // n x r, full column rank

    // primary: Lewis ellipsoid; fallback: boundary MVEE
    let target = (d as Real * (d as Real + 1.0)).sqrt() * 1.1;
    let mut best: Option<(DMatrix<Real>, Real)> = None;
    let consider = |tr: Option<DMatrix<Real>>, best: &mut Option<(DMatrix<Real>, Real)>| {
        if let Some(t0) = tr {
            if let Some((scaled, dist)) = certify_and_rescale(&b, &t0, p, seed) {
                if best.as_ref().map(|(_, bd)| dist < *bd).unwrap_or(true) {
                    *best = Some((scaled, dist));
                }
            }
        }
    };
    consider(lewis_quadratic(&b, p).and_then(|m| inv_sqrt_sym(&m)), &mut best);
    let need_fallback = best.as_ref().map(|(_, dist)| *dist > target).unwrap_or(true);
    if need_fallback {
        consider(mvee_quadratic(&b, p, seed).and_then(|m| inv_sqrt_sym(&m)), &mut best);
    }
    let (t_r, distortion) =
        best.ok_or_else(|| SketchError::numeric("rounding produced no invertible transform"))?;

    // embed: T = Vr T_r Vr^t + (I - Vr Vr^t)
    let full = if rank_deficient {
        let proj = &vr * vr.transpose();
        &vr * &t_r * vr.transpose() + (DMatrix::identity(d, d) - proj)
    } else {
        &vr * &t_r * vr.transpose()
    };
    let inverse = full
        .clone()
        .try_inverse()
        .ok_or_else(|| SketchError::numeric("rounding transform is singular"))?;

    Ok(RoundingTransform {
        matrix: full,
        inverse,
        distortion,
        certified: distortion <= target,
        rank,
        rank_deficient,
    })
}

/// Rescale T0 so that max over sampled unit y of ||B T0 y||_p equals 1;
/// returns the scaled transform and the certified max/min ratio.
fn certify_and_rescale(
    b: &DMatrix<Real>,
    t0: &DMatrix<Real>,
    p: Real,
    seed: u64,
) -> Option<(DMatrix<Real>, Real)> {
    let r = b.ncols();
    let dirs = certify_directions(r, if r == 2 { 512 } else { 2048 }, seed ^ 0x9e3779b9);
    let mut gmax: Real = 0.0;
    let mut gmin = Real::INFINITY;
    for y in &dirs {
        let g = lp_norm_rows(b, &(t0 * y), p);
        gmax = gmax.max(g);
        gmin = gmin.min(g);
    }
    if !(gmax.is_finite() && gmax > 0.0 && gmin > 0.0) {
        return None;
    }
    Some((t0 / gmax, gmax / gmin))
}

/// Measured distortion of an explicit transform: max/min of ||ATx||_p over
/// sampled unit directions (full space, not just the row space).
pub fn certify_rounding(
    set: &WeightedPointSet,
    transform: &DMatrix<Real>,
    directions: usize,
    seed: u64,
) -> Result<Real> {
    let d = set.dim();
    if transform.nrows() != d || transform.ncols() != d {
        return Err(SketchError::DimensionMismatch { expected: d, got: transform.nrows() });
    }
    let a = folded_matrix(set);
    let p = set.p();
    let dirs = certify_directions(d, directions, seed);
    let mut gmax: Real = 0.0;
    let mut gmin = Real::INFINITY;
    for y in &dirs {
        let g = lp_norm_rows(&a, &(transform * y), p);
        gmax = gmax.max(g);
        gmin = gmin.min(g);
    }
    if gmin == 0.0 {
        return Ok(Real::INFINITY);
    }
    Ok(gmax / gmin)
}

/// A = U * T_map with conditioning certificates. `alpha` is the entrywise
/// p-norm of U; `beta` is measured over random directions (reported, not
/// asserted). Weights are folded into the rows before decomposing.
#[derive(Debug, Clone)]
pub struct ConditionedBasis {
    pub u: DMatrix<Real>,
    pub t_map: DMatrix<Real>,
    pub alpha: Real,
    pub beta: Real,
    pub p: Real,
    pub rank: usize,
}

pub fn well_conditioned_basis(set: &WeightedPointSet, p: Real) -> Result<ConditionedBasis> {
    let a = folded_matrix(set);
    let d = set.dim();
    if p == 2.0 {
        let qr = a.clone().qr();
        let u = qr.q();
        let t_map = qr.r();
        let alpha = frob_p(&u, 2.0);
        let beta = measure_beta(&u, 2.0, d);
        return Ok(ConditionedBasis { u, t_map, alpha, beta, p, rank: d });
    }
    let tr = john_round(set)?;
    let u = &a * &tr.matrix;
    let t_map = tr.inverse.clone();
    let alpha = frob_p(&u, p);
    let beta = measure_beta(&u, p, d);
    Ok(ConditionedBasis { u, t_map, alpha, beta, p, rank: tr.rank })
}

fn frob_p(m: &DMatrix<Real>, p: Real) -> Real {
    m.iter().map(|&v| abs_powf(v, p)).sum::<Real>().powf(1.0 / p)
}

fn measure_beta(u: &DMatrix<Real>, p: Real, d: usize) -> Real {
    let q = if p == 1.0 { Real::INFINITY } else { p / (p - 1.0) };
    let dirs = certify_directions(d, 1000, 0xbeefbeef);
    let mut beta: Real = 0.0;
    for z in &dirs {
        let zq = if q.is_infinite() {
            z.iter().fold(0.0, |m: Real, &v| m.max(v.abs()))
        } else {
            z.iter().map(|&v| abs_powf(v, q)).sum::<Real>().powf(1.0 / q)
        };
        let up = lp_norm_rows(u, z, p);
        if up > 0.0 {
            beta = beta.max(zq / up);
        }
    }
    beta
}

/// Streaming state for online lp-sensitivity upper bounds: an exact
/// orthonormal basis of the streamed row space plus a transform refreshed
/// from the current summary of the prefix.
#[derive(Debug, Clone)]
pub struct OnlineSensitivityState {
    dim: usize,
    p: Real,
    span: Vec<Vec<Real>>,
    /// b = T^t a_r scorer in span coordinates, aligned with `span` length.
    scorer: Option<(DMatrix<Real>, usize)>,
}

impl OnlineSensitivityState {
    pub fn new(dim: usize, p: Real) -> Self {
        OnlineSensitivityState { dim, p, span: Vec::new(), scorer: None }
    }

    pub fn rank(&self) -> usize {
        self.span.len()
    }

    /// Project into span coordinates; returns (coords, residual norm).
    fn project(&self, a: &[Real]) -> (Vec<Real>, Real) {
        let mut res = a.to_vec();
        let mut coords = Vec::with_capacity(self.span.len());
        for b in &self.span {
            let c = crate::scalar::dot(&res, b);
            coords.push(c);
            for (r, &bv) in res.iter_mut().zip(b) {
                *r -= c * bv;
            }
        }
        (coords, norm2(&res))
    }

    /// Account a row as seen: extends the row-space basis when the row adds a
    /// new direction. Returns true if the rank grew.
    pub fn observe_row(&mut self, a: &[Real]) -> bool {
        let na = norm2(a);
        if na == 0.0 {
            return false;
        }
        let (_, resn) = self.project(a);
        if resn > 1e-9 * na && self.span.len() < self.dim {
            let mut res = a.to_vec();
            for b in &self.span {
                let c = crate::scalar::dot(&res, b);
                for (r, &bv) in res.iter_mut().zip(b) {
                    *r -= c * bv;
                }
            }
            let rn = norm2(&res);
            if rn > 0.0 {
                self.span.push(res.iter().map(|v| v / rn).collect());
                self.scorer = None;
                return true;
            }
        }
        false
    }

    /// Refresh the sensitivity scorer from a weighted summary of the prefix
    /// (typically the current merge-reduce coreset).
    pub fn refresh(&mut self, summary: &WeightedPointSet) -> Result<()> {
        if self.span.is_empty() {
            return Ok(());
        }
        let r = self.span.len();
        // summary rows in span coordinates, weights kept
        let mut rows = Vec::with_capacity(summary.len());
        let mut weights = Vec::with_capacity(summary.len());
        for (row, w) in summary.iter() {
            let (coords, _) = self.project(row);
            rows.push(coords);
            weights.push(w);
        }
        let reduced = WeightedPointSet::from_rows(&rows, weights, self.p)?;
        if reduced.iter().all(|(row, w)| w * norm2(row) == 0.0) {
            return Ok(());
        }
        let tr = john_round(&reduced)?;
        self.scorer = Some((tr.matrix.transpose(), r));
        Ok(())
    }

    pub fn needs_refresh(&self) -> bool {
        self.scorer.as_ref().map(|(_, r)| *r != self.span.len()).unwrap_or(true)
    }

    /// Upper bound on the online lp sensitivity of `a` against the observed
    /// prefix: 1 for rows outside the prefix row space, otherwise
    /// min(1, ||T^t a_r||_2^p).
    pub fn sensitivity_upper(&self, a: &[Real]) -> Real {
        let na = norm2(a);
        if na == 0.0 {
            return 0.0;
        }
        let (coords, resn) = self.project(a);
        if resn > 1e-9 * na {
            return 1.0;
        }
        match &self.scorer {
            Some((tt, r)) if *r == coords.len() => {
                let b = tt * DVector::from_column_slice(&coords);
                let s = norm2(b.as_slice()).powf(self.p);
                s.min(1.0)
            }
            _ => 1.0,
        }
    }
}
