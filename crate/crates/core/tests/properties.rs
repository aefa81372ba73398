use poisearch::eda::{estimate_marginals, run_umda_with, sample_population, InitStrategy, UmdaConfig};
use poisearch::poi::PoiCandidate;
use poisearch::template::{rank_of_scores, KeyGuessingVector};
use proptest::prelude::*;

fn key_scores() -> impl Strategy<Value = Vec<f64>> {
    // Small integers keep ties frequent and the shift exact.
    prop::collection::vec((-20i32..20).prop_map(f64::from), 256)
}

proptest! {
    #[test]
    fn ranking_is_shift_invariant(s in key_scores(), c in -1000i32..1000, key: u8) {
        let shifted: Vec<f64> = s.iter().map(|v| v + f64::from(c)).collect();
        let a = KeyGuessingVector::from_scores(s.clone()).unwrap();
        let b = KeyGuessingVector::from_scores(shifted.clone()).unwrap();
        prop_assert_eq!(a.ranking, b.ranking);
        prop_assert_eq!(rank_of_scores(&s, key), rank_of_scores(&shifted, key));
    }

    #[test]
    fn ranking_is_a_consistent_permutation(s in key_scores()) {
        let kgv = KeyGuessingVector::from_scores(s.clone()).unwrap();
        let mut seen = [false; 256];
        for (pos, &k) in kgv.ranking.iter().enumerate() {
            prop_assert!(!seen[k as usize]);
            seen[k as usize] = true;
            prop_assert_eq!(rank_of_scores(&s, k), pos);
        }
    }

    #[test]
    fn marginals_respect_clamp(
        bits in prop::collection::vec(prop::collection::vec(any::<bool>(), 12), 1..10),
        lo in 0.01f64..0.2,
    ) {
        let selected: Vec<PoiCandidate> = bits.into_iter().map(PoiCandidate::from_mask).collect();
        let hi = 1.0 - lo;
        let m = estimate_marginals(&selected, (lo, hi)).unwrap();
        prop_assert!(m.iter().all(|&p| (lo..=hi).contains(&p)));
    }

    #[test]
    fn sampled_genomes_are_never_empty(p in prop::collection::vec(0.001f64..0.05, 5..30), seed: u64) {
        for c in sample_population(&p, 20, seed) {
            prop_assert!(c.selected_count() >= 1);
            prop_assert_eq!(c.len(), p.len());
        }
    }

    #[test]
    fn best_fitness_never_increases(weights in prop::collection::vec(-1.0f64..1.0, 16), seed: u64) {
        // Stateless but arbitrary landscape over 16-bit genomes.
        let f = |c: &PoiCandidate| -> f64 {
            c.indices().iter().map(|&i| weights[i]).sum::<f64>().sin()
        };
        let cfg = UmdaConfig {
            population_size: 12,
            selection_size: 4,
            max_generations: 15,
            stagnation_limit: 15,
            init: InitStrategy::Uniform { p0: 0.3 },
            seed,
            ..UmdaConfig::default()
        };
        let out = run_umda_with::<f64, _>(&f, 16, &cfg, None).unwrap();
        for w in out.history.windows(2) {
            prop_assert!(w[1].best_fitness <= w[0].best_fitness);
        }
        prop_assert_eq!(out.best_fitness, f(&out.best));
    }
}
