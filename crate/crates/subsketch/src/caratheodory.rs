//! Weighted-barycenter decomposition of a point set into a distribution over
//! small subsets.
//!
//! Given `s` points in `D` dimensions with simplex weights `u`, [`decompose`]
//! produces subsets `T_1..T_s'` with weights and probabilities such that
//! every subset reproduces the barycenter exactly, each subset has at most
//! `D + 1` points, and the probability-weighted subset weights recover the
//! original `u` per point. Sampling one subset therefore keeps the tensor sum
//! of a group intact while storing only `D + 1` of its members.

use crate::error::{Result, SketchError};
use crate::Real;
use rand::Rng;

const PIVOT_TOL: Real = 1e-10;
const WEIGHT_CLAMP: Real = -1e-12;

/// Distribution over small subsets preserving the weighted barycenter.
#[derive(Debug, Clone)]
pub struct SubsetDistribution {
    /// (member indices into the input, weights on the simplex, probability)
    pub subsets: Vec<(Vec<usize>, Vec<Real>, Real)>,
    pub ambient_dim: usize,
    pub barycenter: Vec<Real>,
    /// Set when pivoting failed and the trivial distribution was returned.
    pub degenerate: bool,
}

impl SubsetDistribution {
    pub fn max_support(&self) -> usize {
        self.subsets.iter().map(|(t, _, _)| t.len()).max().unwrap_or(0)
    }

    pub fn total_probability(&self) -> Real {
        self.subsets.iter().map(|(_, _, p)| p).sum()
    }
}

/// Decompose `(points, u)` into a subset distribution. `u` must lie on the
/// simplex (weights are normalized defensively if they sum to something else
/// positive).
pub fn decompose(points: &[Vec<Real>], u: &[Real]) -> Result<SubsetDistribution> {
    let s = points.len();
    if s == 0 {
        return Err(SketchError::degenerate("empty point set"));
    }
    if u.len() != s {
        return Err(SketchError::DimensionMismatch { expected: s, got: u.len() });
    }
    let dim = points[0].len();
    if points.iter().any(|x| x.len() != dim) {
        return Err(SketchError::invalid("points of mixed dimension"));
    }
    let total: Real = u.iter().sum();
    if total <= 0.0 || u.iter().any(|&w| w < 0.0) {
        return Err(SketchError::degenerate("weights must be nonnegative with positive sum"));
    }

    let u: Vec<Real> = u.iter().map(|w| w / total).collect();
    let mut barycenter = vec![0.0; dim];
    for (x, &w) in points.iter().zip(&u) {
        for (b, &v) in barycenter.iter_mut().zip(x) {
            *b += w * v;
        }
    }

    // trivial distribution: a single subset carrying everything
    let trivial = |degenerate: bool| {
        let support: Vec<usize> = (0..s).filter(|&j| u[j] > 0.0).collect();
        let weights: Vec<Real> = support.iter().map(|&j| u[j]).collect();
        SubsetDistribution {
            subsets: vec![(support, weights, 1.0)],
            ambient_dim: dim,
            barycenter: barycenter.clone(),
            degenerate,
        }
    };

    if s <= dim + 1 {
        return Ok(trivial(false));
    }

    let mut residual = u.clone();
    let mut mass: Real = 1.0;
    let mut subsets: Vec<(Vec<usize>, Vec<Real>, Real)> = Vec::new();

    loop {
        let support: Vec<usize> = (0..s).filter(|&j| residual[j] > PIVOT_TOL * mass.max(1e-300)).collect();
        if support.len() <= dim + 1 || mass <= 1e-14 {
            if mass > 0.0 && !support.is_empty() {
                let weights: Vec<Real> = support.iter().map(|&j| residual[j] / mass).collect();
                subsets.push((support, weights, mass));
            }
            break;
        }

        // reduce v = residual/mass on its support to a basic solution of
        // {w >= 0, sum w = 1, sum w_j x_j = barycenter}
        let mut v: Vec<Real> = support.iter().map(|&j| residual[j] / mass).collect();
        let mut cols: Vec<usize> = support.clone();
        let mut ok = true;
        while cols.len() > dim + 1 {
            let z = match null_vector(points, &cols) {
                Some(z) => z,
                None => {
                    ok = false;
                    break;
                }
            };
            // move v along -z until a coordinate hits zero, keeping v >= 0
            let mut t_pos = Real::INFINITY;
            let mut t_neg = Real::INFINITY;
            for (k, &zk) in z.iter().enumerate() {
                if zk > PIVOT_TOL {
                    t_pos = t_pos.min(v[k] / zk);
                } else if zk < -PIVOT_TOL {
                    t_neg = t_neg.min(v[k] / (-zk));
                }
            }
            let (step, dir) = if t_pos.is_finite() {
                (t_pos, 1.0)
            } else if t_neg.is_finite() {
                (t_neg, -1.0)
            } else {
                ok = false;
                break;
            };
            for (vk, &zk) in v.iter_mut().zip(&z) {
                *vk -= dir * step * zk;
                if *vk < 0.0 {
                    if *vk < WEIGHT_CLAMP * 1e3 {
                        // tolerate small negatives only
                    }
                    *vk = vk.max(0.0);
                }
            }
            // drop zeroed coordinates
            let keep: Vec<usize> = (0..cols.len()).filter(|&k| v[k] > PIVOT_TOL).collect();
            if keep.len() == cols.len() {
                ok = false;
                break;
            }
            cols = keep.iter().map(|&k| cols[k]).collect();
            v = keep.iter().map(|&k| v[k]).collect();
        }
        if !ok {
            return Ok(trivial(true));
        }

        // renormalize v on its support (guards drift from the pivot steps)
        let vs: Real = v.iter().sum();
        for vk in v.iter_mut() {
            *vk /= vs;
        }

        // extract with the largest probability keeping the residual nonnegative
        let mut q = Real::INFINITY;
        for (k, &j) in cols.iter().enumerate() {
            if v[k] > 0.0 {
                q = q.min(residual[j] / v[k]);
            }
        }
        if !q.is_finite() || q <= 0.0 {
            return Ok(trivial(true));
        }
        for (k, &j) in cols.iter().enumerate() {
            residual[j] -= q * v[k];
            if residual[j] < 0.0 {
                residual[j] = 0.0;
            }
        }
        mass -= q;
        subsets.push((cols, v, q));
        if mass <= 0.0 {
            break;
        }
    }

    // final probability cleanup: exact simplex
    let pt: Real = subsets.iter().map(|(_, _, p)| *p).sum();
    for (_, _, p) in subsets.iter_mut() {
        *p /= pt;
    }

    Ok(SubsetDistribution { subsets, ambient_dim: dim, barycenter, degenerate: false })
}

/// A nonzero kernel vector of the (dim+1) x |cols| system
/// [x_j ; 1] z = 0 restricted to `cols`, found by Gaussian elimination with
/// partial pivoting; the first free column is used (Bland-style choice).
fn null_vector(points: &[Vec<Real>], cols: &[usize]) -> Option<Vec<Real>> {
    let dim = points[0].len();
    let rows = dim + 1;
    let m = cols.len();
    debug_assert!(m > rows);
    // row-major augmented matrix
    let mut a = vec![0.0; rows * m];
    for (c, &j) in cols.iter().enumerate() {
        for r in 0..dim {
            a[r * m + c] = points[j][r];
        }
        a[dim * m + c] = 1.0;
    }

    let mut pivot_col = vec![usize::MAX; rows];
    let mut r = 0;
    let mut c = 0;
    while r < rows && c < m {
        // partial pivot within column c
        let (best, mag) = (r..rows)
            .map(|i| (i, a[i * m + c].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if mag <= PIVOT_TOL {
            c += 1;
            continue;
        }
        if best != r {
            for k in 0..m {
                a.swap(r * m + k, best * m + k);
            }
        }
        let piv = a[r * m + c];
        for k in c..m {
            a[r * m + k] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = a[i * m + c];
                if f != 0.0 {
                    for k in c..m {
                        a[i * m + k] -= f * a[r * m + k];
                    }
                }
            }
        }
        pivot_col[r] = c;
        r += 1;
        c += 1;
    }

    // first non-pivot column is the free variable
    let pivots: Vec<usize> = pivot_col.iter().copied().filter(|&pc| pc != usize::MAX).collect();
    let free = (0..m).find(|cc| !pivots.contains(cc))?;
    let mut z = vec![0.0; m];
    z[free] = 1.0;
    for (ri, &pc) in pivot_col.iter().enumerate() {
        if pc != usize::MAX {
            z[pc] = -a[ri * m + free];
        }
    }
    // reject a numerically null kernel vector
    let n: Real = z.iter().map(|v| v * v).sum::<Real>().sqrt();
    if n <= PIVOT_TOL {
        None
    } else {
        Some(z)
    }
}

/// Draw one subset according to the distribution probabilities.
pub fn sample<'a, R: Rng>(
    dist: &'a SubsetDistribution,
    rng: &mut R,
) -> (&'a [usize], &'a [Real]) {
    let r: Real = rng.gen();
    let mut acc = 0.0;
    for (t, w, p) in &dist.subsets {
        acc += p;
        if r < acc {
            return (t, w);
        }
    }
    let last = dist.subsets.last().expect("nonempty distribution");
    (&last.0, &last.1)
}
