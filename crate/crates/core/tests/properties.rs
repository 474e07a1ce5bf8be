use proptest::prelude::*;

use segsel_core::model::segments;
use segsel_core::polyhedra::gamma;
use segsel_core::rng::{derive_seed, rng_for};
use segsel_core::saturated::{tg_pvalue, truncation_bounds};
use segsel_core::segmentation::{detect, draw_intervals, same_selection};
use segsel_core::sim::{ks_optimism, ks_uniform};
use segsel_core::{bonferroni, segment_contrast, Algorithm};

const ALGOS: [Algorithm; 4] = [Algorithm::Bs, Algorithm::Wbs, Algorithm::Cbs, Algorithm::Fl];

fn series() -> impl Strategy<Value = Vec<f64>> {
    (6usize..24).prop_flat_map(|n| prop::collection::vec(-3.0f64..3.0, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observed_data_lies_in_its_event(y in series(), algo in 0usize..4, k in 1usize..3, seed in any::<u64>()) {
        let n = y.len();
        let w = draw_intervals(n, 20, &mut rng_for(seed, 1, 0)).unwrap();
        let Ok(m) = detect(ALGOS[algo], &y, k, &[], Some(&w)) else { return Ok(()) };
        let p = gamma(&m, Some(&w)).unwrap();
        let slack = p.slack(&y).unwrap();
        let scale = y.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        prop_assert!(slack.iter().all(|&s| s >= -1e-10 * scale));
        prop_assert!(same_selection(&m, &m));
    }

    #[test]
    fn shifting_moves_the_event(y in series(), k in 1usize..3, shift in prop::collection::vec(-1.0f64..1.0, 24)) {
        let n = y.len();
        let Ok(m) = detect(Algorithm::Bs, &y, k, &[], None) else { return Ok(()) };
        let p = gamma(&m, None).unwrap();
        let w = &shift[..n];
        let q = p.shifted(w).unwrap();
        let x: Vec<f64> = y.iter().zip(w).map(|(a, b)| a - b).collect();
        let a = q.slack(&x).unwrap();
        let b = p.slack(&y).unwrap();
        for (s, t) in a.iter().zip(&b) {
            prop_assert!((s - t).abs() < 1e-9);
        }
    }

    #[test]
    fn segment_contrast_ignores_flat_means(y in series(), level in -2.0f64..2.0, k in 1usize..3) {
        let n = y.len();
        let Ok(m) = detect(Algorithm::Bs, &y, k, &[], None) else { return Ok(()) };
        for j in 1..=m.k() {
            let v = segment_contrast(&m, j).unwrap();
            let flat = vec![level; n];
            prop_assert!(v.dot(&flat).abs() < 1e-10);
            // distinct levels elsewhere, equal levels on both sides of the break
            let cp = m.sorted_changepoints()[j - 1].location;
            let mut theta = vec![0.0; n];
            for (i, (s, e)) in segments(n, &m.boundaries()).into_iter().enumerate() {
                let lvl = if e == cp || s == cp + 1 { level } else { i as f64 * 1.7 };
                for t in &mut theta[s - 1..e] {
                    *t = lvl;
                }
            }
            prop_assert!(v.dot(&theta).abs() < 1e-10);
        }
    }

    #[test]
    fn saturated_pvalues_are_probabilities(y in series(), algo in 0usize..4, sigma in 0.2f64..3.0) {
        let n = y.len();
        let w = draw_intervals(n, 20, &mut rng_for(7, 1, 0)).unwrap();
        let Ok(m) = detect(ALGOS[algo], &y, 1, &[], Some(&w)) else { return Ok(()) };
        let p = gamma(&m, Some(&w)).unwrap();
        for j in 1..=m.sorted_changepoints().len() {
            let v = segment_contrast(&m, j).unwrap();
            let tb = truncation_bounds(&p, &y, &v, sigma * sigma).unwrap();
            prop_assert!(tb.vlo <= tb.vty + 1e-9 && tb.vty <= tb.vup + 1e-9);
            if let Ok(pv) = tg_pvalue(&tb) {
                prop_assert!((0.0..=1.0).contains(&pv));
            }
        }
    }

    #[test]
    fn tg_pvalue_decreases_in_the_statistic(lo in -4.0f64..0.0, width in 0.5f64..8.0, a in 0.0f64..1.0, b in 0.0f64..1.0, sd in 0.1f64..3.0) {
        let up = lo + width;
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let at = |t: f64| {
            let tb = segsel_core::saturated::TruncationBounds { vlo: lo, vup: up, vty: lo + t * width, sd };
            tg_pvalue(&tb).unwrap()
        };
        prop_assert!(at(a) >= at(b) - 1e-12);
    }

    #[test]
    fn bonferroni_scales_and_caps(p in prop::collection::vec(0.0f64..=1.0, 1..10), k in 1usize..10) {
        let adj = bonferroni(&p, k).unwrap();
        for (a, raw) in adj.iter().zip(&p) {
            prop_assert!(*a >= *raw && *a <= 1.0);
            prop_assert!((a - (raw * k as f64).min(1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn ks_pvalues_are_probabilities(p in prop::collection::vec(0.0f64..=1.0, 2..200)) {
        let two = ks_uniform(&p).unwrap();
        let one = ks_optimism(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&two.pvalue));
        prop_assert!((0.0..=1.0).contains(&one.pvalue));
        prop_assert!(one.statistic <= two.statistic + 1e-12);
    }

    #[test]
    fn seeds_separate_streams(master in any::<u64>(), stream in 0u64..8, index in 0u64..1000) {
        prop_assert_eq!(derive_seed(master, stream, index), derive_seed(master, stream, index));
        prop_assert_ne!(derive_seed(master, stream, index), derive_seed(master, stream + 1, index));
        prop_assert_ne!(derive_seed(master, stream, index), derive_seed(master, stream, index + 1));
    }
}
