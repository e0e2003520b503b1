mod common;

use common::*;
use degen::data::{parse_idx_images, parse_idx_labels, synthetic_classification, write_idx};
use degen::harness::{parse_records_csv, records_to_csv, MetricsRecord};
use degen::nn::{Activation, FisherOperator};
use degen::optim::smoothing_kappa;
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Relu), Just(Activation::Tanh)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hvp_is_linear(seed in 0u64..1000, act in activation(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let batch = batch_8x8(8, seed);
        let m = perturb(&model(64, vec![5], 10, act, seed), 0.2, seed + 1);
        let d = m.param_count();
        let u = random_vector(d, seed + 2);
        let v = random_vector(d, seed + 3);
        let mut combo = u.scaled(a);
        combo.axpy(b, &v);
        let lhs = m.hvp(&batch, &combo).unwrap();
        let mut rhs = m.hvp(&batch, &u).unwrap().scaled(a);
        rhs.axpy(b, &m.hvp(&batch, &v).unwrap());
        prop_assert!(vec_rel_err(lhs.as_slice(), rhs.as_slice()) < 1e-11);
    }

    #[test]
    fn hessian_is_symmetric(seed in 0u64..1000, act in activation()) {
        let batch = batch_8x8(8, seed);
        let m = perturb(&model(64, vec![4, 3], 10, act, seed), 0.2, seed + 1);
        let d = m.param_count();
        let u = random_vector(d, seed + 2);
        let v = random_vector(d, seed + 3);
        let uhv = u.dot(&m.hvp(&batch, &v).unwrap());
        let vhu = v.dot(&m.hvp(&batch, &u).unwrap());
        prop_assert!(rel_err(uhv, vhu, 1e-12) < 1e-10);
    }

    #[test]
    fn fisher_is_positive_semidefinite(seed in 0u64..1000, act in activation()) {
        let batch = batch_8x8(6, seed);
        let m = perturb(&model(64, vec![5], 10, act, seed), 0.2, seed + 1);
        let op = FisherOperator::new(&m, &batch).unwrap();
        let v = random_vector(m.param_count(), seed + 2);
        let vfv = v.dot(&op.apply(&v).unwrap());
        prop_assert!(vfv >= -1e-14 * op.trace() * v.norm_sq());
    }

    #[test]
    fn kappa_is_monotone(tr in 0.0f64..1e3, a1 in 1e-6f64..1e3, a2 in 1e-6f64..1e3, e1 in 1e-12f64..1e3, e2 in 1e-12f64..1e3, d in 1usize..10_000) {
        let (alo, ahi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let (elo, ehi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(smoothing_kappa(tr, alo, elo, d) <= smoothing_kappa(tr, ahi, elo, d));
        prop_assert!(smoothing_kappa(tr, alo, elo, d) <= smoothing_kappa(tr, alo, ehi, d));
        prop_assert!(smoothing_kappa(tr, alo, elo, d) > 0.0);
    }

    #[test]
    fn idx_round_trip_within_quantisation(n in 1usize..20, seed in 0u64..100) {
        let ds = synthetic_classification(n, 16, 4, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        write_idx(&ds, &ip, &lp).unwrap();
        let images = parse_idx_images(&std::fs::read(&ip).unwrap()).unwrap();
        let labels = parse_idx_labels(&std::fs::read(&lp).unwrap()).unwrap();
        prop_assert_eq!(images.count, n);
        prop_assert_eq!(labels.iter().map(|&l| l as usize).collect::<Vec<_>>(), ds.labels().to_vec());
        for (q, x) in images.pixels.iter().zip(ds.inputs()) {
            prop_assert!((*q as f64 / 255.0 - x).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn csv_round_trip(rows in proptest::collection::vec(record(), 0..12)) {
        let text = records_to_csv(&rows).unwrap();
        let back = parse_records_csv(text.as_bytes()).unwrap();
        prop_assert_eq!(back, rows);
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3f64..1e3]
}

fn record() -> impl Strategy<Value = MetricsRecord> {
    (
        0usize..1000,
        (finite(), finite(), finite()),
        proptest::option::of(finite()),
        proptest::option::of(finite()),
        proptest::option::of(finite()),
        proptest::option::of(finite()),
        proptest::option::of(finite()),
        proptest::option::of(finite()),
    )
        .prop_map(|(epoch, (tl, vl, un), lh, ls, wb, ht, hs, km)| MetricsRecord {
            epoch,
            train_loss: tl,
            val_loss: vl,
            update_norm: un,
            lambda_hat: lh,
            lambda_se: ls,
            wbic: wb,
            hessian_trace: ht,
            hessian_se: hs,
            kappa_mean: km,
        })
}
