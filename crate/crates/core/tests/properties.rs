use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kernelfuse::bandwidth::{
    delta_at, estimate_p, maxmin_sq_dist, select_bandwidth_ad, BandwidthConfig,
};
use kernelfuse::connectivity::{multiview_degree_stats, verify_proposition1, SupportMatrix};
use kernelfuse::features::{
    frame_count, frame_signal, label_ground_truth, measured_snr_db, mfcc_features,
    mix_interference, FrameSpec, MfccConfig, SampleBuffer,
};
use kernelfuse::kernel::{
    build_affinity, fuse_alternating, has_off_diagonal_edge, pairwise_sq_dists, FeatureMatrix,
    MarkovMatrix,
};
use kernelfuse::matrix::Matrix;
use kernelfuse::spectral::{leading_nontrivial_eigenvector, EigenMethod};
use kernelfuse::vad::{orient_sign, roc, threshold_indicator};

fn clustered(rng: &mut ChaCha8Rng, n: usize, dim: usize, spread: f64) -> FeatureMatrix {
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            centers[i % 3]
                .iter()
                .map(|c| c + spread * rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(&rows).unwrap()
}

fn noise_buffer(rng: &mut ChaCha8Rng, len: usize) -> SampleBuffer {
    SampleBuffer::new((0..len).map(|_| rng.random_range(-0.5..0.5)).collect(), 8000).unwrap()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn connectivity_transfers_through_fusion(seed in any::<u64>(), n in 2usize..13, pv in 0.0f64..0.4, pw in 0.0f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pattern = |p: f64| {
            let mut m = Matrix::identity(n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < p {
                        m.row_mut(i)[j] = 1.0;
                        m.row_mut(j)[i] = 1.0;
                    }
                }
            }
            MarkovMatrix::from_nonnegative(m).unwrap()
        };
        let (mv, mw) = (pattern(pv), pattern(pw));
        let fused = fuse_alternating(&mv, &mw).unwrap();
        for i in 0..n {
            let either = has_off_diagonal_edge(mv.as_matrix(), i) || has_off_diagonal_edge(mw.as_matrix(), i);
            prop_assert_eq!(has_off_diagonal_edge(fused.as_matrix(), i), either);
        }
        let sv = SupportMatrix::from_fn(n, |i, j| mv.get(i, j) > 0.0);
        let sw = SupportMatrix::from_fn(n, |i, j| mw.get(i, j) > 0.0);
        prop_assert!(verify_proposition1(&sv, &sw).unwrap());
    }

    #[test]
    fn symmetric_direct_and_symmetrized_agree(seed in any::<u64>(), n in 4usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
        a = Matrix::from_fn(n, n, |i, j| a.row(i)[j] + a.row(j)[i]);
        let r = a.row_sums().into_iter().fold(0.0, f64::max) * 1.1;
        let sums = a.row_sums();
        let m = Matrix::from_fn(n, n, |i, j| if i == j { a.row(i)[j] / r + 1.0 - sums[i] / r } else { a.row(i)[j] / r });

        let mut abs: Vec<f64> = DMatrix::from_row_slice(n, n, m.as_slice())
            .symmetric_eigenvalues().iter().map(|v| v.abs()).collect();
        abs.sort_by(|x, y| y.total_cmp(x));
        prop_assume!(abs[1] - abs[2] > 1e-3);

        let m = MarkovMatrix::new(m).unwrap();
        let d = leading_nontrivial_eigenvector(&m, EigenMethod::Direct).unwrap();
        let s = leading_nontrivial_eigenvector(&m, EigenMethod::Symmetrized).unwrap();
        let same = d.vector.iter().zip(&s.vector).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let flipped = d.vector.iter().zip(&s.vector).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        prop_assert!(same.min(flipped) < 1e-6);
    }

    #[test]
    fn delta_grows_with_bandwidth(seed in any::<u64>(), n in 5usize..60, spread in 0.05f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = pairwise_sq_dists(&clustered(&mut rng, n, 3, spread));
        let maxmin = maxmin_sq_dist(&d).unwrap();
        let deltas: Vec<f64> = (1..=40).map(|k| delta_at(&d, maxmin, k as f64 * 0.05).unwrap()).collect();
        for w in deltas.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn search_lands_next_to_the_target(seed in any::<u64>(), n in 20usize..80, spread in 0.2f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = pairwise_sq_dists(&clustered(&mut rng, n, 3, spread));
        let report = select_bandwidth_ad(&d, &BandwidthConfig::default()).unwrap();
        prop_assume!(!report.sparse_single_view);
        let deltas: Vec<f64> = (1..=40).map(|k| delta_at(&d, report.maxmin, k as f64 * 0.05).unwrap()).collect();
        let k = report.k_ad;
        let mut step = 0.0f64;
        if k > 1 {
            step = step.max((deltas[k - 1] / deltas[k - 2]).ln());
        }
        if k < 40 {
            step = step.max((deltas[k] / deltas[k - 1]).ln());
        }
        let gap = (report.delta_ad.ln() - 0.5 * report.delta_hat.ln()).abs();
        prop_assert!(gap <= step + 1e-12, "gap {} step {}", gap, step);
    }

    #[test]
    fn bandwidth_is_scale_covariant(seed in any::<u64>(), n in 10usize..50, s in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = clustered(&mut rng, n, 2, 0.7);
        let a = select_bandwidth_ad(&pairwise_sq_dists(&x), &BandwidthConfig::default()).unwrap();
        let b = select_bandwidth_ad(&pairwise_sq_dists(&x.scaled(s).unwrap()), &BandwidthConfig::default()).unwrap();
        let rel = |p: f64, q: f64| (p - q).abs() <= 1e-9 * p.abs().max(q.abs());
        prop_assert!(rel(b.maxmin, s * s * a.maxmin));
        prop_assert!(rel(b.epsilon_single, s * s * a.epsilon_single));
        prop_assert!(rel(b.epsilon_ad, s * s * a.epsilon_ad));
        prop_assert!(rel(b.delta_hat, a.delta_hat));
        prop_assert_eq!(b.k_ad, a.k_ad);
        let pa = estimate_p(&build_affinity(&pairwise_sq_dists(&x), a.epsilon_single).unwrap());
        let pb = estimate_p(&build_affinity(&pairwise_sq_dists(&x.scaled(s).unwrap()), b.epsilon_single).unwrap());
        prop_assert!(rel(pa, pb));
    }

    #[test]
    fn roc_is_monotone(seed in any::<u64>(), n in 2usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[n - 1] = 1;
        let score: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64) * 0.1).collect();
        let curve = roc(&score, &labels).unwrap();
        for (t, p) in curve.thresholds.windows(2).zip(curve.points.windows(2)) {
            prop_assert!(t[1] < t[0]);
            prop_assert!(p[1].0 >= p[0].0 && p[1].1 >= p[0].1);
        }
        prop_assert!((0.0..=1.0).contains(&curve.auc));
    }

    #[test]
    fn roc_ignores_increasing_transforms(seed in any::<u64>(), n in 2usize..200, a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 1;
        labels[n - 1] = 0;
        let score: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let transformed: Vec<f64> = score.iter().map(|s| (a * s + b).exp()).collect();
        let (r1, r2) = (roc(&score, &labels).unwrap(), roc(&transformed, &labels).unwrap());
        prop_assert_eq!(r1.points, r2.points);
        prop_assert_eq!(r1.auc, r2.auc);
    }

    #[test]
    fn threshold_at_a_score_excludes_that_frame(seed in any::<u64>(), n in 1usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let score: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let i = rng.random_range(0..n);
        let ind = threshold_indicator(&score, score[i]);
        prop_assert_eq!(ind[i], 0);
        for (j, &s) in score.iter().enumerate() {
            prop_assert_eq!(ind[j], u8::from(s > score[i]));
        }
    }

    #[test]
    fn orientation_agrees_with_reference(seed in any::<u64>(), n in 3usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nu: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reference: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let out = orient_sign(&nu, &reference, "test").unwrap();
        prop_assert!(correlation(&out.nu1, &reference) >= 0.0);
        for (a, b) in out.nu1.iter().zip(&nu) {
            prop_assert_eq!(a.abs(), b.abs());
        }
    }

    #[test]
    fn framing_reconstructs_boundaries(len in 0usize..6000, frame_len in 1usize..700, hop_frac in 0.01f64..1.0) {
        let hop = ((frame_len as f64 * hop_frac) as usize).max(1);
        let spec = FrameSpec { frame_len, hop };
        let expected = if len < frame_len { 0 } else { (len - frame_len) / hop + 1 };
        prop_assert_eq!(frame_count(len, &spec), expected);
        if len > 0 {
            let buf = SampleBuffer::new((0..len).map(|i| i as f64).collect(), 8000).unwrap();
            if expected == 0 {
                prop_assert!(frame_signal(&buf, &spec).is_err());
                return Ok(());
            }
            let frames = frame_signal(&buf, &spec).unwrap();
            prop_assert_eq!(frames.len(), expected);
            for (i, f) in frames.iter().enumerate() {
                let r = spec.bounds(i);
                prop_assert_eq!(f.len(), frame_len);
                prop_assert_eq!(f[0], r.start as f64);
                prop_assert!(r.end <= len);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn labels_ignore_global_gain(seed in any::<u64>(), gain in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..8000)
            .map(|i| if (i / 1500) % 2 == 0 { rng.random_range(-0.5..0.5) } else { rng.random_range(-0.004..0.004) })
            .collect();
        let a = SampleBuffer::new(samples.clone(), 8000).unwrap();
        let b = SampleBuffer::new(samples.iter().map(|s| s * gain).collect(), 8000).unwrap();
        let spec = FrameSpec::default();
        prop_assert_eq!(label_ground_truth(&a, &spec).unwrap(), label_ground_truth(&b, &spec).unwrap());
    }

    #[test]
    fn mixing_hits_requested_snr(seed in any::<u64>(), snr in -20.0f64..30.0, with_transients in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clean = noise_buffer(&mut rng, 8000);
        let noise = noise_buffer(&mut rng, 3000);
        let bursts = SampleBuffer::new(
            (0..500).map(|i| if i < 40 { rng.random_range(-1.0..1.0) } else { 0.0 }).collect(),
            8000,
        ).unwrap();
        let out = mix_interference(&clean, Some(&noise), with_transients.then_some(&bursts), snr).unwrap();
        // SNR refers to the noise; transients sit on top at the clean peak level
        let tiled: Vec<f64> = bursts.samples().iter().copied().cycle().take(clean.len()).collect();
        let without_transients: Vec<f64> = out
            .mixed
            .samples()
            .iter()
            .zip(&tiled)
            .map(|(m, t)| m - out.gains.transient * t)
            .collect();
        let noisy = SampleBuffer::new(without_transients, 8000).unwrap();
        prop_assert!((measured_snr_db(&clean, &noisy) - snr).abs() < 0.01);
        if with_transients {
            let peak = bursts.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!((out.gains.transient * peak - clean.peak()).abs() < 1e-12);
        } else {
            prop_assert_eq!(out.gains.transient, 0.0);
        }
    }

    #[test]
    fn mfcc_is_deterministic_and_gain_invariant(seed in any::<u64>(), gain in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let buf = noise_buffer(&mut rng, 4000);
        let spec = FrameSpec::default();
        let cfg = MfccConfig::default();
        let a = mfcc_features(&buf, &spec, &cfg).unwrap();
        prop_assert_eq!(&a, &mfcc_features(&buf, &spec, &cfg).unwrap());
        let scaled = SampleBuffer::new(buf.samples().iter().map(|s| s * gain).collect(), 8000).unwrap();
        let b = mfcc_features(&scaled, &spec, &cfg).unwrap();
        for n in 0..a.n_frames() {
            for j in 1..13 {
                prop_assert!((a.row(n)[j] - b.row(n)[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn multiview_stats_are_reproducible(seed in any::<u64>()) {
        let a = multiview_degree_stats(200, 2.0, 1.5, 3, seed).unwrap();
        prop_assert_eq!(&a, &multiview_degree_stats(200, 2.0, 1.5, 3, seed).unwrap());
    }
}
