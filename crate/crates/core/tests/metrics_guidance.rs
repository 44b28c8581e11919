use proptest::prelude::*;
use zoirl_core::metrics::{peak_guidance, score_ratios, RawMetrics};

/// Guidance rebuilt from its definition: the `m` largest hours (earliest
/// first on ties) get `v`, the rest share `-m v` equally.
fn reference_guidance(e: &[f64], m: usize, v: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..e.len()).collect();
    order.sort_by(|&a, &b| e[b].total_cmp(&e[a]).then(a.cmp(&b)));
    let rest = -(m as f64) * v / (e.len() - m) as f64;
    let mut g = vec![rest; e.len()];
    for &i in &order[..m] {
        g[i] = v;
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn guidance_sums_to_zero_and_ignores_scale(
        e in prop::collection::vec(-50.0f64..200.0, 24),
        m in 1usize..6,
        v in 1e-4f64..1.0,
        scale in 1e-3f64..1e3,
    ) {
        let g = peak_guidance(&e, m, v).unwrap();
        prop_assert_eq!(g.values().iter().sum::<f64>(), 0.0);
        let scaled: Vec<f64> = e.iter().map(|x| x * scale).collect();
        prop_assert_eq!(peak_guidance(&scaled, m, v).unwrap(), g.clone());
        let expected = reference_guidance(&e, m, v);
        for (a, b) in g.values().iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-12 * v);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn self_comparison_scores_one(
        e in prop::collection::vec(0.5f64..50.0, 24 * 8),
        k in 0.1f64..1.0,
    ) {
        let intensity = vec![k; e.len()];
        let raw = RawMetrics::compute(&e, &intensity).unwrap();
        let r = score_ratios(&raw, &raw).unwrap();
        prop_assert!(r.ratios.iter().all(|x| (x - 1.0).abs() < 1e-12));
        prop_assert!((r.total_score - 1.0).abs() < 1e-12);
    }
}
