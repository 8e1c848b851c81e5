//! Randomized invariants spanning modules: the factorized/naive equivalence,
//! the constructive rank bound, and sampling/metric properties.

use proptest::prelude::*;

use futon::basis::BasisKind;
use futon::grid::{GridSignal, ValueRange};
use futon::metrics::psnr;
use futon::model::{Activation, FutonModel};
use futon::optim::sample_batch;
use futon::tensor::{
    cp_materialize, fiber_cp_construction, generalized_dot, outer_product, FullCoeffTensor,
};

use rand::rngs::StdRng;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Factorized forward equals the naive contraction of the outer-product
    /// feature tensor against the materialized CP tensor.
    #[test]
    fn cp_and_naive_paths_agree(
        c in 1usize..=3,
        k in 1usize..=8,
        r in 1usize..=6,
        d in 1usize..=3,
        seed in any::<u64>(),
        coords in proptest::collection::vec(0.0f64..=1.0, 3),
    ) {
        let model = FutonModel::init(c, k, r, d, BasisKind::Cosine, Activation::None, seed)
            .unwrap();
        let x = &coords[..c];
        let fast = model.forward(x).unwrap();
        let w = cp_materialize(model.factors()).unwrap();
        let per_axis: Vec<Vec<f64>> =
            x.iter().map(|&xc| model.basis().eval(xc).unwrap()).collect();
        let views: Vec<&[f64]> = per_axis.iter().map(|v| v.as_slice()).collect();
        let naive = generalized_dot(&outer_product(&views).unwrap(), &w).unwrap();
        for (a, b) in fast.iter().zip(naive.data()) {
            prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    /// Fiber construction has exactly prod of non-mode dims terms and
    /// reconstructs the tensor.
    #[test]
    fn fiber_construction_is_exact(
        shape in proptest::collection::vec(1usize..=5, 1..=4),
        seed in any::<u64>(),
    ) {
        let len: usize = shape.iter().product();
        let mut rng = StdRng::seed_from_u64(seed);
        use rand::Rng;
        let data: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let w = FullCoeffTensor::from_data(shape.clone(), data).unwrap();
        for mode in 0..shape.len() {
            let expected: usize = shape
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != mode)
                .map(|(_, &d)| d)
                .product();
            let dec = fiber_cp_construction(&w, mode).unwrap();
            prop_assert_eq!(dec.rank(), expected);
            prop_assert!(dec.materialize().unwrap().max_abs_diff(&w) < 1e-12);
        }
    }

    #[test]
    fn batch_samples_are_distinct_and_in_range(
        n in 1usize..400,
        fraction in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let mut rng = StdRng::seed_from_u64(seed);
        let batch = sample_batch(&mut rng, n, fraction).unwrap();
        let mut sorted = batch.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), batch.len());
        prop_assert!(batch.iter().all(|&i| i < n));
        prop_assert!(!batch.is_empty() && batch.len() <= n);
    }

    #[test]
    fn psnr_is_symmetric(
        a in proptest::collection::vec(0.0f64..=1.0, 16),
        b in proptest::collection::vec(0.0f64..=1.0, 16),
    ) {
        let ga = GridSignal::from_data(vec![4, 4], 1, ValueRange::UNIT, a).unwrap();
        let gb = GridSignal::from_data(vec![4, 4], 1, ValueRange::UNIT, b).unwrap();
        let ab = psnr(&ga, &gb, 1.0).unwrap();
        let ba = psnr(&gb, &ga, 1.0).unwrap();
        prop_assert!(ab == ba || (ab.is_infinite() && ba.is_infinite()));
    }
}
