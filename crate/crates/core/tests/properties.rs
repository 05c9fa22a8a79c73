use std::f64::consts::PI;

use proptest::prelude::*;

use spoofsense_core::audio::{decode_wav, encode_wav_pcm16, resample, AudioBuffer};
use spoofsense_core::classifier::{
    decode_model, encode_model, init_model, score, Activation, Standardizer,
};
use spoofsense_core::entropy::power_spectral_entropy;
use spoofsense_core::f0::{estimate_f0, F0Config};
use spoofsense_core::metrics::{det_points, eer, ScoreSet};
use spoofsense_core::spectral::{
    band_aperiodicity, spectral_envelope, AperiodicityConfig, EnvelopeConfig,
};
use spoofsense_core::store::{decode_feature, encode_feature};
use spoofsense_core::trials::cosine_score;
use spoofsense_core::{FeatureKind, FeatureMatrix};

fn samples(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..=1.0, 1..max)
}

fn distinct_split() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::btree_set(-1_000_000i64..1_000_000, 2..120),
        any::<u64>(),
    )
        .prop_map(|(set, mask)| {
            let v: Vec<f64> = set.into_iter().map(|x| x as f64 / 1000.0).collect();
            let (mut pos, mut neg) = (Vec::new(), Vec::new());
            for (i, s) in v.iter().enumerate() {
                if (mask.rotate_left(i as u32) & 1 == 1 || neg.is_empty()) && i != 0 {
                    pos.push(*s);
                } else {
                    neg.push(*s);
                }
            }
            if pos.is_empty() {
                pos.push(neg.pop().unwrap());
            }
            (pos, neg)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wav_round_trip_within_one_lsb(s in samples(2000), rate in 8000u32..48000) {
        let buf = AudioBuffer::new(s, rate).unwrap();
        let back = decode_wav(&encode_wav_pcm16(&buf)).unwrap();
        prop_assert_eq!(back.sample_rate(), rate);
        prop_assert_eq!(back.len(), buf.len());
        for (a, b) in buf.samples().iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn feature_file_round_trip(frames in 0usize..20, dims in 2usize..40, seed in any::<u32>(), hop in 0.0f64..0.1) {
        let data: Vec<f64> = (0..frames * dims)
            .map(|i| ((i as f64 + seed as f64) * 0.618).sin() * 100.0)
            .collect();
        let m = FeatureMatrix::new(FeatureKind::Stft, data, frames, dims, hop, "x").unwrap();
        let bytes = encode_feature(&m).unwrap();
        prop_assert_eq!(bytes.len(), 22 + 4 * frames * dims);
        let back = decode_feature(&bytes, "x").unwrap();
        prop_assert_eq!(back.hop, hop);
        for (a, b) in m.data().iter().zip(back.data()) {
            prop_assert_eq!((*a as f32) as f64, *b);
        }
        prop_assert_eq!(encode_feature(&back).unwrap(), bytes);
    }

    #[test]
    fn pse_is_bounded_and_scale_free(x in prop::collection::vec(-100.0f64..100.0, 2..300), alpha in 1e-3f64..1e3) {
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let h = power_spectral_entropy(&x).unwrap();
        let bound = ((x.len() / 2 + 1) as f64).ln();
        prop_assert!((0.0..=bound).contains(&h));
        let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
        prop_assert!((power_spectral_entropy(&scaled).unwrap() - h).abs() < 1e-9);
    }

    #[test]
    fn eer_ignores_trial_order((pos, neg) in distinct_split(), rot in 0usize..200) {
        let base = ScoreSet::from_split(&pos, &neg).unwrap();
        let mut scores = base.scores().to_vec();
        let mut labels = base.labels().to_vec();
        let k = rot % scores.len();
        scores.rotate_left(k);
        labels.rotate_left(k);
        scores.reverse();
        labels.reverse();
        let shuffled = ScoreSet::new(scores, labels).unwrap();
        prop_assert_eq!(eer(&base).unwrap(), eer(&shuffled).unwrap());
    }

    #[test]
    fn eer_is_invariant_to_increasing_maps((pos, neg) in distinct_split(), a in 0.01f64..10.0, b in -5.0f64..5.0) {
        let f = |v: &[f64]| v.iter().map(|x| a * x.atan() + b).collect::<Vec<_>>();
        let e0 = eer(&ScoreSet::from_split(&pos, &neg).unwrap()).unwrap().eer;
        let e1 = eer(&ScoreSet::from_split(&f(&pos), &f(&neg)).unwrap()).unwrap().eer;
        prop_assert_eq!(e0, e1);
    }

    // Negating scores and swapping labels mirrors the sweep, so the smallest-threshold
    // tie-break lands on the last minimizer of the original. With a unique minimizer
    // both ends coincide.
    #[test]
    fn eer_negation_duality((pos, neg) in distinct_split()) {
        let flip = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let e0 = eer(&ScoreSet::from_split(&pos, &neg).unwrap()).unwrap().eer;
        let e1 = eer(&ScoreSet::from_split(&flip(&neg), &flip(&pos)).unwrap()).unwrap().eer;
        let (np, nn) = (pos.len() as i64, neg.len() as i64);
        let pts = det_points(&ScoreSet::from_split(&pos, &neg).unwrap()).unwrap();
        let gap = |p: &spoofsense_core::metrics::DetPoint| {
            ((p.far * nn as f64).round() as i64 * np - (p.frr * np as f64).round() as i64 * nn).abs()
        };
        let best = pts.iter().map(gap).min().unwrap();
        let minimizers: Vec<_> = pts.iter().filter(|p| gap(p) == best).collect();
        let first = minimizers[0];
        let last = minimizers[minimizers.len() - 1];
        prop_assert!((e0 - (first.far + first.frr) / 2.0).abs() < 1e-12);
        prop_assert!((e1 - (last.far + last.frr) / 2.0).abs() < 1e-12, "{} vs {}", e0, e1);
        if minimizers.len() == 1 {
            prop_assert!((e0 - e1).abs() < 1e-12);
        }
    }

    #[test]
    fn det_curve_is_monotone((pos, neg) in distinct_split()) {
        let pts = det_points(&ScoreSet::from_split(&pos, &neg).unwrap()).unwrap();
        prop_assert_eq!((pts[0].far, pts[0].frr), (1.0, 0.0));
        for w in pts.windows(2) {
            prop_assert!(w[1].threshold > w[0].threshold);
            prop_assert!(w[1].far <= w[0].far);
            prop_assert!(w[1].frr >= w[0].frr);
        }
        let e = eer(&ScoreSet::from_split(&pos, &neg).unwrap()).unwrap().eer;
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn cosine_ignores_positive_scaling(
        a in prop::collection::vec(-10.0f64..10.0, 1..16),
        seed in any::<u16>(),
        alpha in 1e-3f64..1e3,
        beta in 1e-3f64..1e3,
    ) {
        let b: Vec<f64> = (0..a.len()).map(|i| ((i as f64 + seed as f64) * 1.3).cos()).collect();
        prop_assume!(a.iter().any(|v| *v != 0.0));
        let c0 = cosine_score(&a, &b).unwrap();
        let sa: Vec<f64> = a.iter().map(|v| v * alpha).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * beta).collect();
        prop_assert!((cosine_score(&sa, &sb).unwrap() - c0).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&c0));
    }

    #[test]
    fn model_bytes_round_trip(d in 1usize..6, h1 in 1usize..6, h2 in 1usize..6, seed in any::<u64>(), tanh in any::<bool>()) {
        let act = if tanh { Activation::Tanh } else { Activation::Relu };
        let m = init_model(&[d, h1, h2, 2], act, seed).unwrap();
        let bytes = encode_model(&m);
        let back = decode_model(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn folded_standardizer_matches_explicit_scaling(
        rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..20),
        seed in any::<u64>(),
    ) {
        let st = Standardizer::fit(&rows).unwrap();
        let m = init_model(&[3, 4, 4, 2], Activation::Tanh, seed).unwrap();
        let mut folded = m.clone();
        st.fold_into(&mut folded);
        for r in &rows {
            let a = score(&m, &st.apply(r)).unwrap();
            let b = score(&folded, r).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn f0_values_stay_in_band(f in 20.0f64..2000.0, amp in 0.05f64..0.9, noise_seed in any::<u32>()) {
        let s: Vec<f64> = (0..4000)
            .map(|i| {
                let n = ((i as f64 * 12.9898 + noise_seed as f64).sin() * 43758.5453).fract() * 0.02;
                (amp * (2.0 * PI * f * i as f64 / 16000.0).sin() + n).clamp(-1.0, 1.0)
            })
            .collect();
        let c = estimate_f0(&AudioBuffer::new(s, 16000).unwrap(), &F0Config::default()).unwrap();
        prop_assert!(c.values.iter().all(|&v| v == 0.0 || (75.0..=500.0).contains(&v)));
    }

    #[test]
    fn aperiodicity_in_unit_range_and_envelope_nonnegative(s in prop::collection::vec(-1.0f64..=1.0, 1600..3200), f in 80.0f64..400.0) {
        let tonal: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(i, n)| 0.6 * (2.0 * PI * f * i as f64 / 16000.0).sin() + 0.3 * n)
            .collect();
        let buf = AudioBuffer::new(tonal.iter().map(|v| v.clamp(-1.0, 1.0)).collect(), 16000).unwrap();
        let contour = estimate_f0(&buf, &F0Config::default()).unwrap();
        let ap = band_aperiodicity(&buf, &contour, &AperiodicityConfig::default()).unwrap();
        prop_assert_eq!(ap.num_frames(), contour.len());
        prop_assert!(ap.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let sp = spectral_envelope(&buf, &contour, &EnvelopeConfig::default()).unwrap();
        prop_assert_eq!(sp.dims(), 513);
        prop_assert!(sp.data().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn resampled_length_follows_rate(n in 100usize..4000, from in 8000u32..48000, to in 8000u32..48000) {
        let buf = AudioBuffer::new((0..n).map(|i| (i as f64 * 0.01).sin() * 0.5).collect(), from).unwrap();
        let out = resample(&buf, to).unwrap();
        let want = n as f64 * to as f64 / from as f64;
        prop_assert!((out.len() as f64 - want).abs() <= 1.0);
        prop_assert!(out.samples().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
