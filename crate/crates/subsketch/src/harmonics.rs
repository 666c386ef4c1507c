//! Spherical-harmonic machinery: Legendre kernels in dimension d, the
//! Funk-Hecke eigenvalues lambda_k for f(t) = |t|^p, sphere-cap packings and
//! the direction search used by the separation experiments.

use crate::error::{Result, SketchError};
use crate::model::{exact_lp_power_slice, random_unit, WeightedPointSet};
use crate::scalar::{dist2, dot, norm2, Scalar};
use crate::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

// ---------------------------------------------------------------------------
// special functions

/// Gamma function for x > 0 (Lanczos approximation, g = 7).
pub fn gamma(x: Real) -> Real {
    const G: Real = 7.0;
    const C: [Real; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as Real);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

fn ln_gamma(x: Real) -> Real {
    gamma(x).ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: Real, x: Real) -> Real {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // continued fraction for Q(a, x)
        let mut b = x + 1.0 - a;
        let mut c = 1e300;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as Real) * (i as Real - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < 1e-300 {
                d = 1e-300;
            }
            c = b + an / c;
            if c.abs() < 1e-300 {
                c = 1e-300;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-15 {
                break;
            }
        }
        1.0 - (-x + a * x.ln() - ln_gamma(a)).exp() * h
    }
}

/// Upper-tail p-value of a chi-square statistic with `df` degrees of freedom.
pub fn chi_square_pvalue(stat: Real, df: usize) -> Real {
    1.0 - gamma_p(df as Real / 2.0, stat / 2.0)
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<Real>, Vec<Real>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<Real>, Vec<Real>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&n) {
        return v.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (PI * (i as Real + 0.75) / (n as Real + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if n == 1 {
                p1 = x;
            }
            for k in 2..=n {
                let kf = k as Real;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as Real * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let out = Arc::new((nodes, weights));
    cache.lock().unwrap().insert(n, out.clone());
    out
}

// ---------------------------------------------------------------------------
// Legendre kernels and Funk-Hecke eigenvalues

/// Legendre polynomial of degree `k` in dimension `d`, normalized so that
/// P(1) = 1. Reduces to Chebyshev cos(k arccos t) for d = 2 and the classical
/// Legendre polynomials for d = 3.
pub fn legendre_p<T: Scalar>(k: usize, d: usize, t: T) -> T {
    assert!(d >= 2, "dimension must be at least 2");
    let mut p0 = T::one();
    if k == 0 {
        return p0;
    }
    let mut p1 = t;
    for j in 1..k {
        // (j + d - 2) P_{j+1} = (2j + d - 2) t P_j - j P_{j-1}
        let jf = T::of_usize(j);
        let df = T::of_usize(d);
        let two = T::c(2.0);
        let p2 = ((two * jf + df - two) * t * p1 - jf * p0) / (jf + df - two);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// All P_{0..=kmax, d}(t) in one recurrence pass.
pub fn legendre_all<T: Scalar>(kmax: usize, d: usize, t: T) -> Vec<T> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(T::one());
    if kmax == 0 {
        return out;
    }
    out.push(t);
    for j in 1..kmax {
        let jf = T::of_usize(j);
        let df = T::of_usize(d);
        let two = T::c(2.0);
        let p2 = ((two * jf + df - two) * t * out[j] - jf * out[j - 1]) / (jf + df - two);
        out.push(p2);
    }
    out
}

/// Dimension of the space of degree-k spherical harmonics in d variables.
pub fn m_count(d: usize, k: usize) -> u64 {
    fn binom(n: i64, k: i64) -> u64 {
        if n < 0 || k < 0 || k > n {
            return 0;
        }
        let mut v = 1u64;
        for i in 0..k {
            v = v * (n - i) as u64 / (i as u64 + 1);
        }
        v
    }
    let d = d as i64;
    let k = k as i64;
    binom(k + d - 2, d - 2) + binom(k + d - 3, d - 2)
}

/// Table of Funk-Hecke eigenvalues for f(t) = |t|^p in dimension d.
#[derive(Debug, Clone)]
pub struct LambdaTable {
    pub d: usize,
    pub p: Real,
    pub values: Vec<Real>,
    pub quad_order: usize,
    pub converged: bool,
}

impl LambdaTable {
    /// lambda_k, adaptively integrated. Odd-k entries are exactly zero.
    pub fn compute(d: usize, p: Real, k_max: usize) -> Result<Self> {
        if d < 2 {
            return Err(SketchError::invalid("dimension must be at least 2"));
        }
        if p < 1.0 {
            return Err(SketchError::invalid("p must be at least 1"));
        }
        let mut order = 64.max(2 * k_max);
        let mut prev: Option<Vec<Real>> = None;
        let mut converged = false;
        let mut values = vec![0.0; k_max + 1];
        while order <= 65536 {
            let vals = Self::quadrature_pass(d, p, k_max, order);
            if let Some(pv) = &prev {
                let delta = vals
                    .iter()
                    .zip(pv)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, Real::max);
                if delta <= 1e-10 {
                    converged = true;
                    values = vals;
                    break;
                }
            }
            values = vals.clone();
            prev = Some(vals);
            order *= 2;
        }
        Ok(LambdaTable { d, p, values, quad_order: order.min(65536), converged })
    }

    fn quadrature_pass(d: usize, p: Real, k_max: usize, order: usize) -> Vec<Real> {
        // lambda_k = c_d * int_0^pi |cos phi|^p sin^{d-2} phi P_{k,d}(cos phi) dphi,
        // with the even-k integrand symmetric about pi/2; odd k vanish.
        let c_d = gamma(d as Real / 2.0) / (PI.sqrt() * gamma((d as Real - 1.0) / 2.0));
        let gl = gauss_legendre(order);
        let (nodes, weights) = (&gl.0, &gl.1);
        let mut acc = vec![0.0; k_max + 1];
        // map [-1,1] -> [0, pi/2]
        for (&x, &w) in nodes.iter().zip(weights) {
            let phi = (x + 1.0) * (PI / 4.0);
            let jac = PI / 4.0;
            let t = phi.cos();
            let f = t.abs().powf(p) * phi.sin().powi(d as i32 - 2);
            let pk = legendre_all(k_max, d, t);
            for k in (0..=k_max).step_by(2) {
                acc[k] += w * jac * f * pk[k];
            }
        }
        // symmetric half doubled; odd entries remain exactly zero
        acc.iter().map(|v| 2.0 * c_d * v).collect()
    }

    pub fn value(&self, k: usize) -> Real {
        self.values[k]
    }
}

/// Single eigenvalue at fixed quadrature order (no adaptivity).
pub fn lambda_k(d: usize, p: Real, k: usize, quad_order: usize) -> Result<Real> {
    if d < 2 || p < 1.0 {
        return Err(SketchError::invalid("need d >= 2 and p >= 1"));
    }
    if k % 2 == 1 {
        return Ok(0.0);
    }
    Ok(LambdaTable::quadrature_pass(d, p, k, quad_order)[k])
}

/// Log-log slope of |lambda_k| over even k in [k_max/2, k_max].
pub fn lambda_decay_check(d: usize, p: Real, k_max: usize) -> Result<Real> {
    let table = LambdaTable::compute(d, p, k_max)?;
    if !table.converged {
        return Err(SketchError::numeric("lambda quadrature did not converge"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut k = k_max / 2;
    if k % 2 == 1 {
        k += 1;
    }
    while k <= k_max {
        let v = table.value(k).abs();
        if v > 0.0 {
            xs.push((k as Real).ln());
            ys.push(v.ln());
        }
        k += 2;
    }
    if xs.len() < 3 {
        return Err(SketchError::degenerate("not enough nonzero eigenvalues to fit"));
    }
    Ok(ols_slope(&xs, &ys))
}

/// Mean of |<u, x>|^p over the uniform sphere measure; equals lambda_0.
pub fn beta_dp(d: usize, p: Real) -> Result<Real> {
    Ok(LambdaTable::compute(d, p, 0)?.value(0))
}

/// Ordinary least squares slope.
pub fn ols_slope(xs: &[Real], ys: &[Real]) -> Real {
    let n = xs.len() as Real;
    let mx = xs.iter().sum::<Real>() / n;
    let my = ys.iter().sum::<Real>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

// ---------------------------------------------------------------------------
// packings and the separation experiment

/// An eta-separated point set on a spherical cap, with optional half-size
/// subsets of small pairwise intersection.
#[derive(Debug, Clone)]
pub struct PackingFamily {
    pub points: Vec<Vec<Real>>,
    pub subsets: Vec<Vec<usize>>,
    pub eta: Real,
    /// Set when the greedy packing or subset search hit its retry budget.
    pub truncated: bool,
}

/// Greedy eta-separated packing on the cap {x : <x, e_d> >= eta/2} (chordal
/// cap radius sqrt(2 - eta)), which also guarantees |p_i + p_j| >= eta.
pub fn build_packing(d: usize, n_param: usize, seed: u64) -> Result<PackingFamily> {
    let c1 = 3.0;
    let eta = (c1 * (n_param as Real).powf(-1.0 / (d as Real - 1.0))).min(0.5);
    build_packing_with(d, eta, n_param, seed)
}

/// Packing at explicit separation eta, stopping at `n_target` points or when
/// the greedy search stalls.
pub fn build_packing_with(d: usize, eta: Real, n_target: usize, seed: u64) -> Result<PackingFamily> {
    if d < 2 {
        return Err(SketchError::invalid("dimension must be at least 2"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(SketchError::invalid("packing separation must lie in (0,1)"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let min_last = eta / 2.0;
    let mut accepted: Vec<Vec<Real>> = Vec::new();
    let mut truncated = false;

    if d == 2 {
        // deterministic angle sweep over the cap arc
        let theta_max = (min_last).acos();
        let step = 2.0 * (eta / 2.0).asin() * 1.0001;
        let mut theta = -theta_max;
        while theta <= theta_max && accepted.len() < n_target {
            accepted.push(vec![theta.sin(), theta.cos()]);
            theta += step;
        }
        if accepted.len() < n_target {
            truncated = true;
        }
    } else {
        let mut stall = 0usize;
        let stall_limit = 40_000;
        while accepted.len() < n_target && stall < stall_limit {
            let mut v = random_unit(d, &mut rng);
            if v[d - 1] < 0.0 {
                for c in v.iter_mut() {
                    *c = -*c;
                }
            }
            if v[d - 1] < min_last {
                continue;
            }
            if accepted.iter().all(|a| dist2(a, &v) >= eta) {
                accepted.push(v);
                stall = 0;
            } else {
                stall += 1;
            }
        }
        if accepted.len() < n_target {
            truncated = true;
        }
    }

    // re-verify separation, including the antipodal condition
    for i in 0..accepted.len() {
        for j in (i + 1)..accepted.len() {
            debug_assert!(dist2(&accepted[i], &accepted[j]) >= eta * 0.999);
            let sum_norm: Real = accepted[i]
                .iter()
                .zip(&accepted[j])
                .map(|(a, b)| (a + b) * (a + b))
                .sum::<Real>()
                .sqrt();
            debug_assert!(sum_norm >= eta * 0.999);
        }
    }

    Ok(PackingFamily { points: accepted, subsets: Vec::new(), eta, truncated })
}

/// Random subsets of size alpha*n with pairwise intersections at most
/// beta*n, by rejection sampling with a retry budget.
pub fn build_subset_family(
    n: usize,
    alpha: Real,
    beta: Real,
    count: usize,
    seed: u64,
) -> (Vec<Vec<usize>>, bool) {
    let size = ((alpha * n as Real).round() as usize).max(1).min(n);
    let cap = (beta * n as Real).floor() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut family: Vec<Vec<usize>> = Vec::new();
    let mut tries = 0usize;
    let budget = 200 * count.max(1);
    let mut idx: Vec<usize> = (0..n).collect();
    while family.len() < count && tries < budget {
        tries += 1;
        // partial Fisher-Yates for a uniform size-subset
        for i in 0..size {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        let mut cand: Vec<usize> = idx[..size].to_vec();
        cand.sort_unstable();
        let ok = family.iter().all(|s| intersection_size(s, &cand) <= cap);
        if ok {
            family.push(cand);
        }
    }
    let truncated = family.len() < count;
    (family, truncated)
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Normalized separation between two weighted sets:
/// sup_x |h_A(x) - h_B(x)| / n over sampled unit directions plus local
/// ascent from the best net point. Reports an achieved value, i.e. a
/// certified lower bound on the true sup.
pub fn separation_delta(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    direction_budget: usize,
    seed: u64,
) -> Result<Real> {
    let n = a.len().max(1) as Real;
    Ok(sup_weighted_difference(a, b, direction_budget, seed)? / n)
}

/// Same search without the 1/n normalization: sup over unit x of the
/// absolute difference of the two weighted objectives.
pub fn sup_weighted_difference(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    direction_budget: usize,
    seed: u64,
) -> Result<Real> {
    if a.dim() != b.dim() {
        return Err(SketchError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if (a.p() - b.p()).abs() > 1e-12 {
        return Err(SketchError::invalid("mismatched exponents"));
    }
    let g = |x: &[Real]| (exact_lp_power_slice(a, x) - exact_lp_power_slice(b, x)).abs();

    let d = a.dim();
    let mut best_val = 0.0;
    let mut best_x = vec![0.0; d];
    best_x[0] = 1.0;

    if d == 2 {
        let m = direction_budget.max(16);
        for k in 0..m {
            let t = PI * (k as Real) / (m as Real); // half circle suffices: g is even
            let x = [t.cos(), t.sin()];
            let v = g(&x);
            if v > best_val {
                best_val = v;
                best_x = x.to_vec();
            }
        }
        // golden-section refinement on the angle around the best net point
        let t0 = best_x[1].atan2(best_x[0]);
        let half = PI / m as Real;
        let (mut lo, mut hi) = (t0 - half, t0 + half);
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let eval = |t: Real| g(&[t.cos(), t.sin()]);
        let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
        let (mut f1, mut f2) = (eval(x1), eval(x2));
        for _ in 0..60 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = eval(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = eval(x1);
            }
        }
        best_val = best_val.max(f1.max(f2));
    } else {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        for _ in 0..direction_budget.max(64) {
            let x = random_unit(d, &mut rng);
            let v = g(&x);
            if v > best_val {
                best_val = v;
                best_x = x;
            }
        }
        // spherical hill climb with finite-difference gradient
        let mut step = 0.05;
        let h = 1e-5;
        for _ in 0..200 {
            let f0 = g(&best_x);
            let mut grad = vec![0.0; d];
            for i in 0..d {
                let mut xp = best_x.clone();
                xp[i] += h;
                let nn = norm2(&xp);
                for c in xp.iter_mut() {
                    *c /= nn;
                }
                grad[i] = (g(&xp) - f0) / h;
            }
            // project out radial component
            let gr = dot(&grad, &best_x);
            for i in 0..d {
                grad[i] -= gr * best_x[i];
            }
            let gn = norm2(&grad);
            if gn < 1e-12 || step < 1e-9 {
                break;
            }
            let mut cand = best_x.clone();
            for i in 0..d {
                cand[i] += step * grad[i] / gn;
            }
            let nn = norm2(&cand);
            for c in cand.iter_mut() {
                *c /= nn;
            }
            let fc = g(&cand);
            if fc > f0 {
                best_x = cand;
                best_val = best_val.max(fc);
                step *= 1.2;
            } else {
                step *= 0.5;
            }
        }
    }
    Ok(best_val)
}

/// Shell-weighted separation: inputs live in a spherical shell
/// alpha <= |x| <= beta with beta < ((1+sqrt(3))/2)^{1/p} alpha. The shell
/// condition is validated from the measured norms; the maximization itself
/// runs on the raw (unnormalized) rows, which is equivalent to the weighted
/// normalized form.
pub fn affine_separation_delta(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    direction_budget: usize,
    seed: u64,
) -> Result<Real> {
    let p = a.p();
    let mut lo = Real::INFINITY;
    let mut hi: Real = 0.0;
    for set in [a, b] {
        for (row, _) in set.iter() {
            let n = norm2(row);
            if n > 0.0 {
                lo = lo.min(n);
                hi = hi.max(n);
            }
        }
    }
    if !lo.is_finite() || lo <= 0.0 {
        return Err(SketchError::invalid("shell sets must contain nonzero points"));
    }
    let limit = ((1.0 + 3.0_f64.sqrt()) / 2.0).powf(1.0 / p);
    if hi > lo * limit * (1.0 + 1e-12) {
        return Err(SketchError::invalid(format!(
            "shell condition violated: norm ratio {:.6} exceeds {:.6}",
            hi / lo,
            limit
        )));
    }
    separation_delta(a, b, direction_budget, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-12);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-12);
        assert!((gamma(5.0) - 24.0).abs() < 1e-10);
        assert!((gamma(1.5) - PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn legendre_low_orders() {
        for d in 2..=5 {
            for t in [-0.9_f64, -0.3, 0.0, 0.4, 1.0] {
                assert_eq!(legendre_p(0, d, t), 1.0);
                assert!((legendre_p(1, d, t) - t).abs() < 1e-14);
                assert!((legendre_p::<f64>(3, d, 1.0) - 1.0).abs() < 1e-12);
            }
        }
        // d=2 is Chebyshev
        for k in 0..8 {
            for theta in [0.3_f64, 1.1, 2.5] {
                let t: Real = theta.cos();
                assert!((legendre_p(k, 2, t) - (k as Real * theta).cos()).abs() < 1e-10);
            }
        }
        // d=3, k=2 is (3t^2-1)/2
        for t in [-0.8_f64, 0.1, 0.7] {
            assert!((legendre_p(2, 3, t) - (3.0 * t * t - 1.0) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn m_count_values() {
        for d in 2..=5 {
            assert_eq!(m_count(d, 0), 1);
        }
        assert_eq!(m_count(3, 2), 5);
        for k in 1..10 {
            assert_eq!(m_count(2, k), 2);
        }
    }

    #[test]
    fn lambda_basic_values() {
        // lambda_0(2,1) = 2/pi
        let t = LambdaTable::compute(2, 1.0, 8).unwrap();
        assert!(t.converged);
        assert!((t.value(0) - 2.0 / PI).abs() < 1e-10, "{}", t.value(0));
        // odd k vanish exactly
        assert_eq!(t.value(1), 0.0);
        assert_eq!(t.value(3), 0.0);
        // even p truncates: p=2 has lambda_4 = 0
        let t2 = LambdaTable::compute(2, 2.0, 6).unwrap();
        assert!(t2.value(4).abs() < 1e-8);
        assert!(t2.value(6).abs() < 1e-8);
        assert!((t2.value(0) - 0.5).abs() < 1e-10);
        assert!((t2.value(2) - 0.25).abs() < 1e-10);
    }

    #[test]
    fn beta_values() {
        assert!((beta_dp(2, 1.0).unwrap() - 2.0 / PI).abs() < 1e-10);
        assert!((beta_dp(3, 1.0).unwrap() - 0.5).abs() < 1e-10);
        for d in 2..=5 {
            assert!((beta_dp(d, 2.0).unwrap() - 1.0 / d as Real).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_decay_slopes() {
        let s = lambda_decay_check(2, 1.0, 48).unwrap();
        assert!((s + 2.0).abs() < 0.1, "slope {s}");
        let s = lambda_decay_check(3, 1.0, 64).unwrap();
        assert!((s + 2.5).abs() < 0.1, "slope {s}");
    }

    #[test]
    fn funk_hecke_spot_check_d2() {
        // (1/2pi) int |cos(theta - theta_y)|^p cos(k theta) dtheta
        //   = lambda_k cos(k theta_y)
        let p = 1.3;
        let table = LambdaTable::compute(2, p, 6).unwrap();
        let theta_y: Real = 0.83;
        for k in [0usize, 2, 4, 6] {
            let m = 20000;
            let mut acc = 0.0;
            for j in 0..m {
                let th = 2.0 * PI * (j as Real + 0.5) / m as Real;
                acc += (th - theta_y).cos().abs().powf(p) * (k as Real * th).cos();
            }
            acc /= m as Real;
            let expect = table.value(k) * (k as Real * theta_y).cos();
            assert!((acc - expect).abs() < 1e-6, "k={k}: {acc} vs {expect}");
        }
    }

    #[test]
    fn poisson_identity_partial_sums() {
        let r: Real = 0.9;
        let d = 3;
        let kmax = 200;
        for t in [-0.7, -0.1, 0.2, 0.8] {
            let pk = legendre_all(kmax, d, t);
            let mut sum = 0.0;
            let mut rk = 1.0;
            for (k, pkt) in pk.iter().enumerate() {
                sum += m_count(d, k) as Real * rk * pkt;
                rk *= r;
            }
            let target = (1.0 - r * r) / (1.0 + r * r - 2.0 * r * t).powf(d as Real / 2.0);
            assert!((sum - target).abs() < 1e-4, "t={t}: {sum} vs {target}");
        }
    }

    #[test]
    fn addition_theorem_d2() {
        // For d=2: sum_j Y_kj(x) Y_kj(y) with {cos k., sin k.} basis equals
        // 2 cos(k(tx - ty)) = M(2,k) P_k(cos(tx-ty))
        for k in 1..=5usize {
            for (tx, ty) in [(0.3, 1.2), (2.0, -0.4)] {
                let lhs: Real = 2.0 * ((k as Real) * (tx - ty)).cos();
                let rhs = m_count(2, k) as Real * legendre_p(k, 2, ((tx - ty) as Real).cos());
                assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn packing_and_family() {
        let pf = build_packing_with(3, 0.4, 60, 5).unwrap();
        assert!(pf.points.len() >= 20);
        for (i, a) in pf.points.iter().enumerate() {
            for b in pf.points.iter().skip(i + 1) {
                assert!(dist2(a, b) >= 0.4 * 0.999);
            }
        }
        let (fam, _trunc) = build_subset_family(8, 0.5, 0.25, 5, 3);
        for s in &fam {
            assert_eq!(s.len(), 4);
        }
        for (i, s) in fam.iter().enumerate() {
            for t in fam.iter().skip(i + 1) {
                assert!(intersection_size(s, t) <= 2);
            }
        }
    }

    #[test]
    fn subset_family_exhaustive_small() {
        // n=4, subsets of size 2, pairwise intersection <= 1: always satisfiable
        let (fam, trunc) = build_subset_family(4, 0.5, 0.25, 3, 11);
        assert!(!trunc);
        assert_eq!(fam.len(), 3);
        for (i, s) in fam.iter().enumerate() {
            for t in fam.iter().skip(i + 1) {
                assert!(intersection_size(s, t) <= 1);
            }
        }
    }

    #[test]
    fn separation_examples() {
        let a = WeightedPointSet::unweighted(2, 1.0, vec![1.0, 0.0]).unwrap();
        let same = separation_delta(&a, &a, 256, 1).unwrap();
        assert_eq!(same, 0.0);

        let b = WeightedPointSet::unweighted(2, 1.0, vec![0.0, 1.0]).unwrap();
        let d = separation_delta(&a, &b, 512, 1).unwrap();
        // sup over x of | |x_1| - |x_2| | = 1 at the axes
        assert!((d - 1.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn affine_separation_shell_checks() {
        // equal norms: reduces to separation_delta
        let a = WeightedPointSet::unweighted(2, 1.0, vec![1.0, 0.0]).unwrap();
        let b = WeightedPointSet::unweighted(2, 1.0, vec![0.0, 1.0]).unwrap();
        let d1 = affine_separation_delta(&a, &b, 512, 1).unwrap();
        let d2 = separation_delta(&a, &b, 512, 1).unwrap();
        assert!((d1 - d2).abs() < 1e-12);

        // violated shell condition errors out
        let wide = WeightedPointSet::unweighted(2, 1.0, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(affine_separation_delta(&wide, &b, 64, 1).is_err());
    }

    #[test]
    fn chi_square_pvalue_sane() {
        // df=1: P(chi2 > 3.84) ~ 0.05
        let p = chi_square_pvalue(3.841, 1);
        assert!((p - 0.05).abs() < 2e-3, "{p}");
        let p = chi_square_pvalue(0.0, 5);
        assert!((p - 1.0).abs() < 1e-12);
    }
}
