//! Randomized invariants over metrics, transforms, and input construction.

use hermes::corrector::{build_z_input, phase};
use hermes::metrics::{classify_trend, mase, smape};
use hermes::panel::{fashion_forward_ratio, resize_to_length};
use hermes::predictors::Forecast;
use proptest::prelude::*;

fn positive_series(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.0e-2..1.0e4f64, len)
}

proptest! {
    #[test]
    fn smape_bounded_and_symmetric(
        y in positive_series(8),
        p in positive_series(8),
    ) {
        let a = smape(&y, &p);
        prop_assert!((0.0..=200.0).contains(&a));
        prop_assert!((a - smape(&p, &y)).abs() < 1e-9);
    }

    #[test]
    fn mase_scale_and_shift_invariant(
        history in positive_series(30),
        truth in positive_series(5),
        pred in positive_series(5),
        scale in 0.1..50.0f64,
        shift in 0.0..100.0f64,
    ) {
        // Skip degenerate histories (zero snaive denominator).
        if let Ok(base) = mase(&history, &truth, &pred, 4) {
            let s: Vec<f64> = history.iter().map(|v| v * scale + shift).collect();
            let t: Vec<f64> = truth.iter().map(|v| v * scale + shift).collect();
            let p: Vec<f64> = pred.iter().map(|v| v * scale + shift).collect();
            let scaled = mase(&s, &t, &p, 4).unwrap();
            prop_assert!((scaled - base).abs() < 1e-6 * base.max(1.0));
        }
    }

    #[test]
    fn trend_label_scale_invariant(
        prev in positive_series(6),
        next in positive_series(6),
        scale in 0.1..100.0f64,
    ) {
        let a = classify_trend(&prev, &next, 0.05).unwrap();
        let ps: Vec<f64> = prev.iter().map(|v| v * scale).collect();
        let ns: Vec<f64> = next.iter().map(|v| v * scale).collect();
        prop_assert_eq!(a, classify_trend(&ps, &ns, 0.05).unwrap());
    }

    #[test]
    fn forward_ratio_complement(
        a in positive_series(20),
        b in positive_series(20),
    ) {
        let ab = fashion_forward_ratio(&a, &b).unwrap();
        let ba = fashion_forward_ratio(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((x + y - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(x));
        }
    }

    #[test]
    fn resize_hits_target_and_preserves_tail(
        series in positive_series(93),
        target in 93usize..400,
    ) {
        let out = resize_to_length(&series, target, 52).unwrap();
        prop_assert_eq!(out.len(), target);
        let keep = series.len().min(target);
        prop_assert_eq!(&out[target - keep..], &series[series.len() - keep..]);
    }

    #[test]
    fn phase_map_in_range_and_periodic(i in 1usize..1000, h in 1usize..60) {
        let k = phase(i, h);
        prop_assert!((1..=h).contains(&k));
        prop_assert_eq!(k, phase(i + h, h));
    }

    #[test]
    fn z_input_invariant_under_joint_scaling(
        window in positive_series(12),
        fc in positive_series(4),
        scale in 0.5..20.0f64,
    ) {
        let pred = Forecast { origin: 12, values: fc.clone() };
        let a = build_z_input(&window, &pred, 12, 4).unwrap();
        let sw: Vec<f64> = window.iter().map(|v| v * scale).collect();
        let sp = Forecast { origin: 12, values: fc.iter().map(|v| v * scale).collect() };
        let b = build_z_input(&sw, &sp, 12, 4).unwrap();
        for (x, y) in a.z.iter().zip(&b.z) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
