use astm::harness::{corruption_prob, ExperimentConfig};
use astm::lattice::{flip_count, flip_pixels, hamming, random_movie};
use astm::recording::{record, WeightMatrix};
use astm::stats::Estimate;
use astm::{ConnectivityMap, Exec, LatticeConfig, Method, Movie};
use proptest::prelude::*;

fn lattice() -> impl Strategy<Value = LatticeConfig> {
    (1usize..8, 1usize..8).prop_filter_map("window fits", |(l, w)| {
        let side = 2 * l + 1;
        let window = 2 * w + 1;
        LatticeConfig::new(side, window).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn connectivity_is_symmetric_with_full_windows(cfg in lattice()) {
        let conn = ConnectivityMap::build(&cfg);
        prop_assert_eq!(conn.arity(), cfg.window() * cfg.window() - 1);
        prop_assert!(astm::selftest::connectivity_is_valid(&conn));
    }

    #[test]
    fn movie_text_round_trip(cfg in lattice(), frames in 1usize..6, seed in any::<u64>()) {
        let movie = random_movie(cfg.cell_count(), frames, 0.5, seed).unwrap();
        let text = movie.to_text(&cfg).unwrap();
        let (c2, m2) = Movie::parse_text(&text).unwrap();
        prop_assert_eq!(c2, cfg);
        prop_assert_eq!(m2.to_text(&c2).unwrap(), text);
    }

    #[test]
    fn weight_text_round_trip(cfg in lattice(), values in proptest::collection::vec(-1e6f64..1e6, 1..4)) {
        let n = cfg.cell_count() * cfg.connectivity();
        let w: Vec<f64> = (0..n).map(|i| values[i % values.len()] / (1 + i) as f64).collect();
        let wm = WeightMatrix::new(cfg.cell_count(), cfg.connectivity(), w).unwrap();
        let (_, parsed) = WeightMatrix::parse_text(&wm.to_text(&cfg).unwrap()).unwrap();
        prop_assert_eq!(parsed, wm);
    }

    #[test]
    fn hebb_weights_sit_on_the_integer_lattice(frames in 1usize..12, seed in any::<u64>()) {
        let cfg = LatticeConfig::new(7, 3).unwrap();
        let conn = ConnectivityMap::build(&cfg);
        let movie = random_movie(49, frames, 0.5, seed).unwrap();
        let (w, _) = record(&movie, &conn, &Method::Hebb, Exec::Sequential).unwrap();
        for &v in w.as_slice() {
            let s = v * frames as f64;
            prop_assert_eq!(s, s.round());
            prop_assert!(s.abs() <= frames as f64);
        }
    }

    #[test]
    fn flips_touch_exactly_round_f_n_pixels(n in 1usize..300, f in 0.0f64..=1.0, seed in any::<u64>()) {
        let frame = vec![1i8; n];
        let out = flip_pixels(&frame, f, seed).unwrap();
        prop_assert_eq!(hamming(&frame, &out), flip_count(n, f));
    }

    #[test]
    fn binomial_stderr_formula(trials in 1u64..10_000, frac in 0.0f64..=1.0) {
        let events = ((trials as f64) * frac).floor() as u64;
        let e = Estimate::new(events, trials);
        let p = events as f64 / trials as f64;
        prop_assert_eq!(e.stderr(), (p * (1.0 - p) / trials as f64).sqrt());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn estimates_ignore_the_worker_count(seed in any::<u64>(), frames in 2usize..40, flip in 0.0f64..0.3) {
        let cfg = LatticeConfig::new(7, 5).unwrap();
        let method = Method::from_name("dgd").unwrap();
        let mut c = ExperimentConfig::new(cfg, method, frames, 12, seed);
        c.flip = flip;
        c.exec = Exec::Sequential;
        let a = corruption_prob(&c).unwrap();
        c.exec = Exec::Threads(3);
        prop_assert_eq!(a, corruption_prob(&c).unwrap());
    }
}
