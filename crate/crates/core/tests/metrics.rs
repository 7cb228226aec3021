mod common;

use common::{leakage_reference, orthogonal_noise_estimate, random_spectrogram, white};
use proptest::prelude::*;
use windnet::metrics::{leakage, mix_at_snr, si_sdr, snr_db, EvalReport, FileScore, SI_SDR_CAP_DB};
use windnet::Error;

#[test]
fn leakage_matches_double_loop() {
    for seed in 0..20 {
        let frames = 1 + seed as usize % 4;
        let (d, w) = (random_spectrogram(frames, seed), random_spectrogram(frames, seed + 100));
        let a = leakage(&d, &w).unwrap();
        let b = leakage_reference(&d, &w);
        assert!((a - b).abs() <= 1e-9, "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn leakage_of_identical_spectra_is_zero_and_shapes_must_agree() {
    let d = random_spectrogram(2, 1);
    assert_eq!(leakage(&d, &d).unwrap(), 0.0);
    assert!(matches!(leakage(&d, &random_spectrogram(3, 2)), Err(Error::Shape { .. })));
}

#[test]
fn orthogonal_noise_gives_requested_si_sdr() {
    for (i, snr) in [20.0, 0.0, -5.0, 35.0].into_iter().enumerate() {
        let (est, s) = orthogonal_noise_estimate(4000, snr, i as u64);
        let v = si_sdr(&est, &s).unwrap();
        assert!((v - snr).abs() < 1e-9, "{snr}: {v}");
    }
}

#[test]
fn si_sdr_edge_cases() {
    let s = white(100, 3);
    assert_eq!(si_sdr(&s, &s).unwrap(), SI_SDR_CAP_DB);
    assert!(matches!(si_sdr(&s, &[0.0; 100]), Err(Error::UndefinedMetric(_))));
    assert!(matches!(si_sdr(&s, &s[..50]), Err(Error::Shape { .. })));
    assert!(matches!(si_sdr(&[], &[]), Err(Error::EmptyInput(_))));
    assert_eq!(si_sdr(&[0.0; 100], &s).unwrap(), -SI_SDR_CAP_DB);
}

#[test]
fn mixing_hits_requested_snr() {
    let d = white(8000, 4);
    let w: Vec<f64> = white(8000, 5).iter().map(|v| v * 3.0).collect();
    for target in [-20.0, -10.0, 0.0, 10.0, 20.0] {
        let (mix, scaled) = mix_at_snr(&d, &w, target).unwrap();
        assert!((snr_db(&d, &scaled).unwrap() - target).abs() < 1e-9);
        for i in 0..d.len() {
            assert!((mix[i] - d[i] - scaled[i]).abs() < 1e-12);
        }
    }
    assert!(matches!(mix_at_snr(&d, &[0.0; 8000], 0.0), Err(Error::UndefinedMetric(_))));
}

#[test]
fn report_averages_files() {
    let f = |s: f64, m: f64| FileScore {
        name: "x".into(),
        snr_db: 0.0,
        si_sdr_db: s,
        leakage: -1.0,
        mixture_si_sdr_db: m,
        mixture_leakage: -0.5,
    };
    let r = EvalReport::from_files(vec![f(4.0, 0.0), f(8.0, 2.0)]).unwrap();
    assert_eq!(r.si_sdr_db, 6.0);
    assert_eq!(r.si_sdr_improvement_db(), 5.0);
    let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(json["si_sdr_db"], 6.0);
    assert!(r.to_key_value().contains("si_sdr_db"));
}

proptest! {
    #[test]
    fn si_sdr_is_scale_invariant(seed in any::<u64>(), k in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0]) {
        let s = white(512, seed);
        let e: Vec<f64> = s.iter().zip(white(512, seed ^ 1)).map(|(a, b)| a + 0.3 * b).collect();
        let scaled: Vec<f64> = e.iter().map(|v| v * k).collect();
        let (a, b) = (si_sdr(&e, &s).unwrap(), si_sdr(&scaled, &s).unwrap());
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn leakage_is_symmetric_and_nonpositive(seed in any::<u64>()) {
        let (d, w) = (random_spectrogram(2, seed), random_spectrogram(2, seed ^ 7));
        let a = leakage(&d, &w).unwrap();
        prop_assert!(a <= 0.0);
        prop_assert!((a - leakage(&w, &d).unwrap()).abs() < 1e-12);
    }
}
