//! Symmetric p-th tensor powers in a compressed monomial basis.
//!
//! A rank-p symmetric tensor over R^d is stored as one coefficient per
//! monomial alpha with |alpha| = p (graded-lex order), C(d+p-1, p) slots in
//! total instead of d^p. Coefficients hold plain monomial products; the
//! multinomial counting factors are applied at inner-product time, so that
//! `apply_direction(tensor_power(y, p), x) == <x, y>^p`.

use crate::error::{Result, SketchError};
use crate::scalar::Scalar;

/// Number of monomials of degree exactly `p` in `d` variables: C(d+p-1, p).
pub fn sym_dim(d: usize, p: u32) -> usize {
    let p = p as usize;
    // binomial via incremental product to stay in range for small d, p
    let mut num = 1usize;
    for i in 0..p {
        num = num * (d + i) / (i + 1);
    }
    num
}

/// Monomial exponent vectors of total degree `p` over `d` variables,
/// graded-lex order (first coordinate decreasing): for d=2, p=3 this yields
/// (3,0), (2,1), (1,2), (0,3).
pub fn monomials(d: usize, p: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(sym_dim(d, p));
    let mut cur = vec![0u32; d];
    fill(&mut out, &mut cur, 0, p);
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, rem: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = rem;
        out.push(cur.clone());
        return;
    }
    for take in (0..=rem).rev() {
        cur[pos] = take;
        fill(out, cur, pos + 1, rem - take);
    }
    cur[pos] = 0;
}

/// Multinomial coefficient p! / prod(alpha_i!).
pub fn multinomial(alpha: &[u32]) -> f64 {
    let p: u32 = alpha.iter().sum();
    let mut v = 1.0f64;
    let mut k = 1u32;
    for &a in alpha {
        for j in 1..=a {
            v = v * (k as f64) / (j as f64);
            k += 1;
        }
    }
    debug_assert_eq!(k - 1, p);
    v
}

/// A symmetric tensor in the compressed monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor<T: Scalar> {
    pub d: usize,
    pub p: u32,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> SymTensor<T> {
    pub fn zeros(d: usize, p: u32) -> Self {
        SymTensor { d, p, coeffs: vec![T::zero(); sym_dim(d, p)] }
    }

    pub fn shape_matches(&self, other: &Self) -> bool {
        self.d == other.d && self.p == other.p
    }

    /// Slotwise `self += w * other`.
    pub fn accumulate(&mut self, other: &Self, w: T) -> Result<()> {
        if !self.shape_matches(other) {
            return Err(SketchError::DimensionMismatch { expected: self.coeffs.len(), got: other.coeffs.len() });
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a + w * *b;
        }
        Ok(())
    }

    /// Adds `w * x^{(x)p}` directly, without materializing the power.
    pub fn accumulate_power(&mut self, x: &[T], w: T) -> Result<()> {
        if x.len() != self.d {
            return Err(SketchError::DimensionMismatch { expected: self.d, got: x.len() });
        }
        let mut idx = 0;
        let mut scratch = vec![0u32; self.d];
        acc_rec(&mut self.coeffs, &mut idx, &mut scratch, 0, self.p, x, w, T::one());
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn acc_rec<T: Scalar>(
    coeffs: &mut [T],
    idx: &mut usize,
    alpha: &mut [u32],
    pos: usize,
    rem: u32,
    x: &[T],
    w: T,
    prod: T,
) {
    if pos + 1 == alpha.len() {
        let v = prod * pow_u32(x[pos], rem);
        coeffs[*idx] = coeffs[*idx] + w * v;
        *idx += 1;
        return;
    }
    for take in (0..=rem).rev() {
        acc_rec(coeffs, idx, alpha, pos + 1, rem - take, x, w, prod * pow_u32(x[pos], take));
    }
}

#[inline]
fn pow_u32<T: Scalar>(x: T, e: u32) -> T {
    match e {
        0 => T::one(),
        1 => x,
        2 => x * x,
        3 => x * x * x,
        _ => x.powi(e as i32),
    }
}

/// `x^{(x)p}` in the compressed basis: coeffs[alpha] = prod_i x_i^{alpha_i}.
pub fn tensor_power<T: Scalar>(x: &[T], p: u32) -> SymTensor<T> {
    let mut t = SymTensor::zeros(x.len(), p);
    t.accumulate_power(x, T::one()).expect("dims match by construction");
    t
}

/// Slotwise weighted sum of tensors with matching shape.
pub fn weighted_sum<T: Scalar>(tensors: &[SymTensor<T>], weights: &[T]) -> Result<SymTensor<T>> {
    if tensors.is_empty() {
        return Err(SketchError::invalid("weighted_sum of empty tensor list"));
    }
    if tensors.len() != weights.len() {
        return Err(SketchError::DimensionMismatch { expected: tensors.len(), got: weights.len() });
    }
    let mut acc = SymTensor::zeros(tensors[0].d, tensors[0].p);
    for (t, &w) in tensors.iter().zip(weights) {
        acc.accumulate(t, w)?;
    }
    Ok(acc)
}

/// Contraction against a direction: sum_alpha multinomial(alpha) S[alpha]
/// prod_i x_i^{alpha_i}. Equals `sum_j w_j <y_j, x>^p` when `S` is a weighted
/// sum of tensor powers of the `y_j`.
pub fn apply_direction<T: Scalar>(s: &SymTensor<T>, x: &[T]) -> Result<T> {
    if x.len() != s.d {
        return Err(SketchError::DimensionMismatch { expected: s.d, got: x.len() });
    }
    let mut acc = T::zero();
    let mut idx = 0;
    apply_rec(&s.coeffs, &mut idx, 0, s.p, x, T::one(), 1.0, s.p, &mut acc);
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn apply_rec<T: Scalar>(
    coeffs: &[T],
    idx: &mut usize,
    pos: usize,
    rem: u32,
    x: &[T],
    prod: T,
    multi: f64,
    budget_left: u32,
    acc: &mut T,
) {
    if pos + 1 == x.len() {
        // closing coordinate takes all remaining degree; multinomial factor
        // gains C(budget_left, rem) = 1 here since rem == budget_left
        let v = prod * pow_u32(x[pos], rem);
        *acc = *acc + T::c(multi) * coeffs[*idx] * v;
        *idx += 1;
        return;
    }
    for take in (0..=rem).rev() {
        let m = multi * binom_f64(budget_left, take);
        apply_rec(coeffs, idx, pos + 1, rem - take, x, prod * pow_u32(x[pos], take), m, budget_left - take, acc);
    }
}

#[inline]
fn binom_f64(n: u32, k: u32) -> f64 {
    let mut v = 1.0f64;
    for i in 0..k {
        v = v * ((n - i) as f64) / ((i + 1) as f64);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn sym_dim_counts() {
        assert_eq!(sym_dim(2, 3), 4);
        assert_eq!(sym_dim(3, 2), 6);
        assert_eq!(sym_dim(2, 1), 2);
        // vs d^p = 8 for d=2, p=3
        assert!(sym_dim(2, 3) < 8);
    }

    #[test]
    fn power_examples() {
        let t = tensor_power::<f64>(&[1.0, 0.0], 2);
        assert_eq!(t.coeffs, vec![1.0, 0.0, 0.0]);
        let t = tensor_power::<f64>(&[1.0, 1.0], 2);
        assert_eq!(t.coeffs, vec![1.0, 1.0, 1.0]);
        let t = tensor_power::<f64>(&[2.0, 3.0], 3);
        assert_eq!(t.coeffs, vec![8.0, 12.0, 18.0, 27.0]);
    }

    #[test]
    fn weighted_sum_cases() {
        let t = tensor_power::<f64>(&[0.5, -2.0], 3);
        let s = weighted_sum(&[t.clone()], &[1.0]).unwrap();
        assert_eq!(s, t);

        let z = weighted_sum(&[t.clone(), t.clone()], &[1.0, -1.0]).unwrap();
        assert!(z.coeffs.iter().all(|&c| c == 0.0));

        // odd p: x and -x cancel
        let a = tensor_power::<f64>(&[0.3, 0.7], 3);
        let b = tensor_power::<f64>(&[-0.3, -0.7], 3);
        let z = weighted_sum(&[a, b], &[0.5, 0.5]).unwrap();
        assert!(z.coeffs.iter().all(|&c| c.abs() < 1e-15));
    }

    #[test]
    fn apply_direction_examples() {
        let s = tensor_power::<f64>(&[1.0, 2.0], 3);
        let v = apply_direction(&s, &[3.0, 1.0]).unwrap();
        assert!((v - 125.0).abs() < 1e-9, "{v}");

        let z = SymTensor::<f64>::zeros(2, 3);
        assert_eq!(apply_direction(&z, &[3.0, 1.0]).unwrap(), 0.0);

        let s = tensor_power::<f64>(&[1.0, 2.0, -1.0], 1);
        let v = apply_direction(&s, &[0.5, 0.25, 4.0]).unwrap();
        assert!((v - (0.5 + 0.5 - 4.0)).abs() < 1e-12);
    }

    /// Brute-force d^p tensor inner product.
    fn flat_inner(x: &[f64], y: &[f64], s: &SymTensor<f64>) -> f64 {
        // enumerate all index tuples (i_1..i_p); compare <x^{(x)p}, T> where T
        // is the expansion of s into the flat basis via its generating data.
        // Here s must be a single tensor_power(y, p), so the flat tensor is
        // prod_j y_{i_j} and the inner product is sum over tuples of
        // prod_j x_{i_j} y_{i_j}.
        let d = x.len();
        let p = s.p as usize;
        let mut total = 0.0;
        let mut tuple = vec![0usize; p];
        loop {
            let mut v = 1.0;
            for &i in &tuple {
                v *= x[i] * y[i];
            }
            total += v;
            // increment mixed-radix counter
            let mut k = 0;
            loop {
                if k == p {
                    return total;
                }
                tuple[k] += 1;
                if tuple[k] < d {
                    break;
                }
                tuple[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn compressed_matches_flat_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..200 {
            let d = rng.gen_range(1..=3usize);
            let p = rng.gen_range(1..=3u32);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = tensor_power(&y, p);
            let a = apply_direction(&s, &x).unwrap();
            let b = flat_inner(&x, &y, &s);
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "d={d} p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn inner_product_is_dot_power() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..300 {
            let d = rng.gen_range(1..=4usize);
            let p = rng.gen_range(1..=6u32);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = apply_direction(&tensor_power(&y, p), &x).unwrap();
            let expect = crate::scalar::dot(&x, &y).powi(p as i32);
            // cancellation scale: the summed terms are of size (|x||y|)^p
            let scale = (crate::scalar::norm2(&x) * crate::scalar::norm2(&y)).powi(p as i32);
            assert!(
                (got - expect).abs() <= 1e-9 * expect.abs().max(scale),
                "d={d} p={p}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn linear_in_generating_set() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let pts: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let w: Vec<f64> = (0..6).map(|_| rng.gen_range(0.1..1.0)).collect();
        let all = weighted_sum(&pts.iter().map(|y| tensor_power(y, 2)).collect::<Vec<_>>(), &w).unwrap();
        let first = weighted_sum(&pts[..3].iter().map(|y| tensor_power(y, 2)).collect::<Vec<_>>(), &w[..3]).unwrap();
        let second = weighted_sum(&pts[3..].iter().map(|y| tensor_power(y, 2)).collect::<Vec<_>>(), &w[3..]).unwrap();
        let merged = weighted_sum(&[first, second], &[1.0, 1.0]).unwrap();
        for (a, b) in all.coeffs.iter().zip(&merged.coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn monomial_order_graded_lex() {
        let m = monomials(2, 3);
        assert_eq!(m, vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
        assert_eq!(multinomial(&[2, 1]), 3.0);
        assert_eq!(multinomial(&[1, 1, 1]), 6.0);
    }

    #[test]
    fn generic_f32_path() {
        let s = tensor_power::<f32>(&[0.5f32, -1.5], 3);
        let v = apply_direction(&s, &[2.0f32, 1.0]).unwrap();
        let expect = (0.5f32 * 2.0 + (-1.5) * 1.0).powi(3);
        assert!((v - expect).abs() < 1e-5);
    }
}
