//! Property tests for the algebraic invariants.

use proptest::prelude::*;
use subsketch::caratheodory;
use subsketch::model::{exact_lp_power_slice, WeightedPointSet};
use subsketch::stream::FourierSketch;
use subsketch::tensor::{apply_direction, tensor_power, weighted_sum};
use subsketch::Real;

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<Real>> {
    prop::collection::vec(-1.0..1.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lp_power_is_p_homogeneous(
        rows in prop::collection::vec(vec_strategy(3), 1..12),
        x in vec_strategy(3),
        c in -4.0..4.0f64,
        p in 1u32..4,
    ) {
        let weights = vec![1.0; rows.len()];
        let set = WeightedPointSet::from_rows(&rows, weights, p as Real).unwrap();
        let base = exact_lp_power_slice(&set, &x);
        let scaled: Vec<Real> = x.iter().map(|v| c * v).collect();
        let got = exact_lp_power_slice(&set, &scaled);
        let expect = c.abs().powi(p as i32) * base;
        prop_assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn tensor_inner_product_identity(
        x in vec_strategy(3),
        y in vec_strategy(3),
        p in 1u32..6,
    ) {
        let got = apply_direction(&tensor_power(&y, p), &x).unwrap();
        let dot: Real = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let expect = dot.powi(p as i32);
        let scale = x.iter().map(|v| v * v).sum::<Real>().sqrt()
            * y.iter().map(|v| v * v).sum::<Real>().sqrt();
        prop_assert!((got - expect).abs() <= 1e-9 * expect.abs().max(scale.powi(p as i32)));
    }

    #[test]
    fn even_p_power_sum_equals_tensor_route(
        rows in prop::collection::vec(vec_strategy(2), 1..10),
        x in vec_strategy(2),
    ) {
        // for even p the absolute value drops and the objective is the
        // contraction of the weighted tensor sum
        let p = 2u32;
        let w: Vec<Real> = (0..rows.len()).map(|i| 0.25 + i as Real * 0.1).collect();
        let set = WeightedPointSet::from_rows(&rows, w.clone(), p as Real).unwrap();
        let direct = exact_lp_power_slice(&set, &x);
        let tensors: Vec<_> = rows.iter().map(|r| tensor_power(r, p)).collect();
        let summed = weighted_sum(&tensors, &w).unwrap();
        let via_tensor = apply_direction(&summed, &x).unwrap();
        prop_assert!((direct - via_tensor).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn caratheodory_marginals_recover_weights(
        rows in prop::collection::vec(vec_strategy(3), 2..16),
        raw_w in prop::collection::vec(0.05..1.0f64, 16),
    ) {
        let s = rows.len();
        let total: Real = raw_w[..s].iter().sum();
        let u: Vec<Real> = raw_w[..s].iter().map(|w| w / total).collect();
        let dist = caratheodory::decompose(&rows, &u).unwrap();
        prop_assert!((dist.total_probability() - 1.0).abs() <= 1e-9);
        prop_assert!(dist.max_support() <= 4);
        for k in 0..s {
            let mut m = 0.0;
            for (t, w, p) in &dist.subsets {
                if let Some(pos) = t.iter().position(|&j| j == k) {
                    m += p * w[pos];
                }
            }
            prop_assert!((m - u[k]).abs() <= 1e-8);
        }
    }

    #[test]
    fn fourier_sketch_is_linear(
        angles in prop::collection::vec(0.0..std::f64::consts::TAU, 2..24),
        weights in prop::collection::vec(0.1..2.0f64, 24),
        query in 0.0..std::f64::consts::TAU,
    ) {
        let mut whole = FourierSketch::with_order(1.0, 8).unwrap();
        let mut first = FourierSketch::with_order(1.0, 8).unwrap();
        let mut second = FourierSketch::with_order(1.0, 8).unwrap();
        let half = angles.len() / 2;
        for (i, (&t, &w)) in angles.iter().zip(&weights).enumerate() {
            whole.ingest_angle(t, w);
            if i < half {
                first.ingest_angle(t, w);
            } else {
                second.ingest_angle(t, w);
            }
        }
        first.merge(&second).unwrap();
        prop_assert!((first.query_angle(query) - whole.query_angle(query)).abs() <= 1e-10);
    }
}
