//! Cross-checks against independent reference computations.

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kernelfuse::bandwidth::{
    estimate_delta, maxmin_sq_dist, select_bandwidth_ad, BandwidthConfig,
};
use kernelfuse::connectivity::{
    fused_degree_histograms, multiview_degree_stats, sample_view_graph, single_view_stats,
    binomial_fit, RandomGraphSpec,
};
use kernelfuse::features::{
    context_concat, frame_count, frame_signal, label_ground_truth, load_video_features,
    synth_multiview, FrameSpec, SampleBuffer, SynthConfig,
};
use kernelfuse::kernel::{
    build_affinity, pairwise_sq_dists, row_normalize, FeatureMatrix, MarkovMatrix,
};
use kernelfuse::matrix::Matrix;
use kernelfuse::spectral::{leading_nontrivial_eigenvector, EigenMethod};
use kernelfuse::vad::{detect, roc, threshold_indicator, BandwidthMode, DetectorConfig, FusionMode};

fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> MarkovMatrix {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
    MarkovMatrix::from_nonnegative(m).unwrap()
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn gaussian_kernel_markov(rng: &mut ChaCha8Rng, n: usize) -> MarkovMatrix {
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..4.0), rng.random_range(0.0..1.0)])
        .collect();
    let d = pairwise_sq_dists(&FeatureMatrix::from_rows(&pts).unwrap());
    row_normalize(&build_affinity(&d, 2.0 * maxmin_sq_dist(&d).unwrap()).unwrap())
}

#[test]
fn eigenpair_matches_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for (i, n) in [5, 12, 40, 150, 260].into_iter().cycle().take(15).enumerate() {
        let m = if i % 2 == 0 {
            gaussian_kernel_markov(&mut rng, n)
        } else {
            random_stochastic(&mut rng, n)
        };
        let r = leading_nontrivial_eigenvector(&m, EigenMethod::Direct).unwrap();
        let a = to_nalgebra(m.as_matrix());

        let nu = nalgebra::DVector::from_column_slice(&r.vector);
        if !r.fell_back() {
            let res = (&a * &nu - r.eigenvalue * &nu).norm();
            assert!(res < 1e-8 * n as f64, "n={n} residual {res}");
            let mut ev: Vec<_> = a.complex_eigenvalues().iter().copied().collect();
            ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
            assert_abs_diff_eq!(ev[0].re, 1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(r.eigenvalue.abs(), ev[1].norm(), epsilon = 1e-8);
        } else {
            let s = &a * a.transpose();
            let res = (&s * &nu - r.eigenvalue * &nu).norm();
            assert!(res < 1e-8 * n as f64);
        }
    }
}

#[test]
fn audio_only_equals_single_view_pipeline() {
    let data = synth_multiview(&SynthConfig {
        n_frames: 120,
        seed: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = DetectorConfig {
        fusion: FusionMode::AudioOnly,
        ..DetectorConfig::default()
    };
    let det = detect(&data.v, &data.w, Some(&data.energy), &cfg).unwrap();

    let d = pairwise_sq_dists(&data.v);
    let mv = row_normalize(&build_affinity(&d, 2.0 * maxmin_sq_dist(&d).unwrap()).unwrap());
    let direct = leading_nontrivial_eigenvector(&mv, EigenMethod::Direct).unwrap();
    assert_eq!(det.spectral, direct);
    let sign = if det.score.nu1[0] == direct.vector[0] { 1.0 } else { -1.0 };
    for (a, b) in det.score.nu1.iter().zip(&direct.vector) {
        assert_eq!(*a, sign * b);
    }
}

/// Kernel, row sums and δ written out from the definitions.
fn naive_delta(x: &FeatureMatrix, eps: f64) -> f64 {
    let n = x.n_frames();
    let mut total = 0.0;
    for m in 0..n {
        for k in 0..n {
            if k != m {
                let d2: f64 = x.row(m).iter().zip(x.row(k)).map(|(a, b)| (a - b) * (a - b)).sum();
                total += (-d2 / eps).exp();
            }
        }
    }
    total / n as f64
}

fn naive_maxmin(x: &FeatureMatrix) -> f64 {
    let n = x.n_frames();
    (0..n)
        .map(|m| {
            (0..n)
                .filter(|&k| k != m)
                .map(|k| x.row(m).iter().zip(x.row(k)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// The search as written: keep the set itself, probe its |𝒞|/2-th element,
/// keep the lower or the upper half. Returns visited grid values and the
/// surviving one.
fn transcribed_search(x: &FeatureMatrix, c: f64, size: usize) -> (Vec<f64>, f64) {
    let maxmin = naive_maxmin(x);
    let target = naive_delta(x, c * maxmin).sqrt();
    let mut set: Vec<f64> = (1..=size).map(|k| k as f64 / size as f64 * c).collect();
    let mut visited = Vec::new();
    while set.len() != 1 {
        let half = set.len() / 2;
        let c_ad = set[half - 1];
        visited.push(c_ad);
        if naive_delta(x, c_ad * maxmin) > target {
            set.truncate(half);
        } else {
            set.drain(..half);
        }
    }
    (visited, set[0])
}

#[test]
fn search_trace_matches_transcription() {
    for seed in 0..3 {
        let data = synth_multiview(&SynthConfig {
            n_frames: 150,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let report =
            select_bandwidth_ad(&pairwise_sq_dists(&data.v), &BandwidthConfig::default()).unwrap();
        let (visited, survivor) = transcribed_search(&data.v, 2.0, 40);
        let got: Vec<f64> = report.visited.iter().map(|p| p.c).collect();
        assert_eq!(got.len(), visited.len());
        for (a, b) in got.iter().zip(&visited) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(report.c_ad, survivor, epsilon = 1e-12);
        assert!(report.visited.len() <= 6);
    }
}

#[test]
fn selected_delta_is_near_the_root_target() {
    let data = synth_multiview(&SynthConfig {
        n_frames: 500,
        seed: 21,
        ..SynthConfig::default()
    })
    .unwrap();
    let d = pairwise_sq_dists(&data.v);
    let report = select_bandwidth_ad(&d, &BandwidthConfig::default()).unwrap();
    let target = report.delta_hat.sqrt();
    assert!(report.delta_ad >= target / 1.5 && report.delta_ad <= 1.5 * target);

    // exhaustive evaluation of the grid: the answer is the first grid
    // element whose δ exceeds the target
    let deltas: Vec<f64> = (1..=40)
        .map(|k| estimate_delta(&build_affinity(&d, k as f64 * 0.05 * report.maxmin).unwrap()))
        .collect();
    let first_above = deltas.iter().position(|&x| x > target).unwrap() + 1;
    assert_eq!(report.k_ad, first_above);
}

#[test]
fn single_view_rule_links_every_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts: Vec<[f64; 2]> = (0..80)
        .map(|i| {
            let c = (i % 3) as f64 * 4.0;
            [c + rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]
        })
        .collect();
    let d = pairwise_sq_dists(&FeatureMatrix::from_rows(&pts).unwrap());
    let k = build_affinity(&d, 2.0 * maxmin_sq_dist(&d).unwrap()).unwrap();
    for m in 0..80 {
        let best = (0..80).filter(|&j| j != m).map(|j| k.get(m, j)).fold(0.0, f64::max);
        assert!(best >= (-0.5f64).exp() - 1e-15);
    }
}

#[test]
fn fused_degrees_match_boolean_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..20 {
        let n = rng.random_range(3..25);
        let spec = |p: f64, seed: u64| RandomGraphSpec {
            n,
            p_edge: p,
            seed,
            trials: 1,
        };
        let gv = sample_view_graph(&spec(rng.random_range(0.0..0.3), trial), 0).unwrap();
        let gw = sample_view_graph(&spec(rng.random_range(0.0..0.3), trial + 100), 0).unwrap();
        let (inc, exc) = fused_degree_histograms(&gv, &gw);

        let mut inc_oracle = vec![0u64; n];
        let mut exc_oracle = vec![0u64; n];
        for a in 0..n {
            let (mut di, mut de) = (0, 0);
            for b in 0..n {
                if a == b {
                    continue;
                }
                let with_loops = (0..n).any(|l| {
                    (l == a || gv.has_edge(a, l)) && (l == b || gw.has_edge(l, b))
                });
                let through_third =
                    (0..n).any(|l| l != a && l != b && gv.has_edge(a, l) && gw.has_edge(l, b));
                di += usize::from(with_loops);
                de += usize::from(through_third);
            }
            inc_oracle[di] += 1;
            exc_oracle[de] += 1;
        }
        let trim = |mut h: Vec<u64>| {
            while h.len() > 1 && h.last() == Some(&0) {
                h.pop();
            }
            h
        };
        assert_eq!(inc, trim(inc_oracle));
        assert_eq!(exc, trim(exc_oracle));
    }
}

#[test]
fn single_view_mean_degree() {
    let stats = single_view_stats(&RandomGraphSpec {
        n: 1000,
        p_edge: 3.0 / 999.0,
        seed: 5,
        trials: 200,
    })
    .unwrap();
    assert!((stats.mean_degree - 3.0).abs() <= 0.15, "{}", stats.mean_degree);
}

#[test]
fn degree_distribution_fits_binomial() {
    for (s, seed) in [(2.0, 1), (3.0, 2), (5.0, 3)] {
        let n = 2000;
        let p = s / (n - 1) as f64;
        let stats = single_view_stats(&RandomGraphSpec {
            n,
            p_edge: p,
            seed,
            trials: 100,
        })
        .unwrap();
        let fit = binomial_fit(&stats, n, p).unwrap();
        assert!(fit.statistic < fit.critical_999, "S={s}: {fit:?}");
    }
}

#[test]
fn two_hop_isolation_follows_the_exact_law() {
    // A point with no view-1 neighbour has no two-step path through a third
    // point, so isolation in the fused graph is far more likely than the
    // independent-edge approximation e^{-S_v S_w}:
    //   through a third point: exp(S_v (e^{-S_w} - 1))
    //   with self-loops:       e^{-S_v} e^{-S_w}
    let (sv, sw) = (3.0f64, 3.0f64);
    let stats = multiview_degree_stats(2000, sv, sw, 100, 17).unwrap();
    let exclusive = (sv * ((-sw).exp() - 1.0)).exp();
    let inclusive = (-sv - sw).exp();
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(stats.exclusive.isolated_fraction, exclusive) < 0.1);
    assert!(rel(stats.inclusive.isolated_fraction, inclusive) < 0.2);
    assert!(stats.exclusive.isolated_fraction > 100.0 * stats.predicted_isolated_fraction);
}

#[test]
fn connectivity_is_reproducible() {
    let a = multiview_degree_stats(300, 2.0, 2.0, 5, 99).unwrap();
    let b = multiview_degree_stats(300, 2.0, 2.0, 5, 99).unwrap();
    assert_eq!(a, b);
}

#[test]
fn framing_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = FrameSpec::default();
    for _ in 0..200 {
        let len = rng.random_range(634..5000);
        let mut starts = Vec::new();
        let mut s = 0;
        while s + 634 <= len {
            starts.push(s);
            s += 317;
        }
        assert_eq!(frame_count(len, &spec), starts.len());
        let buf = SampleBuffer::new((0..len).map(|i| i as f64).collect(), 8000).unwrap();
        let frames = frame_signal(&buf, &spec).unwrap();
        for (f, &start) in frames.iter().zip(&starts) {
            assert_eq!(f[0], start as f64);
            assert_eq!(f[633], (start + 633) as f64);
        }
    }
    // one minute at 8 kHz
    let mut count = 0;
    let mut s = 0;
    while s + 634 <= 480_000 {
        count += 1;
        s += 317;
    }
    assert_eq!(frame_count(480_000, &spec), count);
    assert_eq!(count, 1513);
}

#[test]
fn context_matches_index_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = FeatureMatrix::new(Matrix::from_fn(17, 4, |_, _| rng.random_range(-1.0..1.0))).unwrap();
    let y = context_concat(&x).unwrap();
    for n in 0..17 {
        for (block, src) in [n.max(1) - 1, n, (n + 1).min(16)].into_iter().enumerate() {
            for j in 0..4 {
                assert_eq!(y.row(n)[block * 4 + j], x.row(src)[j]);
            }
        }
    }
}

#[test]
fn video_features_match_reference_parser() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows: Vec<Vec<f64>> = (0..9)
        .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let text: String = std::iter::once("a,b,c".to_string())
        .chain(rows.iter().map(|r| {
            r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
        }))
        .collect::<Vec<_>>()
        .join("\n");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("motion.csv");
    std::fs::write(&path, &text).unwrap();

    let parsed: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|t| t.parse::<f64>().unwrap().abs()).collect())
        .collect();
    let w = load_video_features(&path, Some(9)).unwrap();
    for n in 0..9 {
        let expected: Vec<f64> = [n.max(1) - 1, n, (n + 1).min(8)]
            .iter()
            .flat_map(|&i| parsed[i].clone())
            .collect();
        assert_eq!(w.row(n), expected.as_slice());
    }
}

#[test]
fn labels_match_direct_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let samples: Vec<f64> = (0..20_000)
        .map(|i| {
            let envelope = ((i as f64 / 3000.0).sin()).max(0.0).powi(3);
            envelope * rng.random_range(-1.0..1.0)
        })
        .collect();
    let buf = SampleBuffer::new(samples.clone(), 8000).unwrap();
    let spec = FrameSpec::default();
    let labels = label_ground_truth(&buf, &spec).unwrap();

    let energies: Vec<f64> = (0..frame_count(samples.len(), &spec))
        .map(|i| samples[i * 317..i * 317 + 634].iter().map(|s| s * s).sum())
        .collect();
    let max = energies.iter().copied().fold(0.0, f64::max);
    let expected: Vec<u8> = energies.iter().map(|&e| u8::from(e > 0.01 * max)).collect();
    assert_eq!(labels, expected);
    assert!(labels.contains(&0) && labels.contains(&1));
}

fn mann_whitney(score: &[f64], labels: &[u8]) -> f64 {
    let mut u = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in score.iter().enumerate() {
        for (j, &sj) in score.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    u += 1.0;
                } else if si == sj {
                    u += 0.5;
                }
            }
        }
    }
    u / pairs
}

#[test]
fn auc_matches_rank_statistic() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let n = rng.random_range(2..200);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // coarse scores so that ties occur
        let score: Vec<f64> = labels
            .iter()
            .map(|&l| (rng.random_range(0..8) as f64 + l as f64 * 2.0) / 4.0)
            .collect();
        assert_abs_diff_eq!(roc(&score, &labels).unwrap().auc, mann_whitney(&score, &labels), epsilon = 1e-10);
    }
}

#[test]
fn chance_level_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let labels: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
    let score: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1.0)).collect();
    let auc = roc(&score, &labels).unwrap().auc;
    assert!((auc - 0.5).abs() < 0.05, "{auc}");
}

#[test]
fn median_threshold_splits_in_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for n in [7usize, 10, 101] {
        let score: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut sorted = score.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[(n - 1) / 2];
        let ones = threshold_indicator(&score, median).iter().filter(|&&x| x == 1).count();
        assert!(ones == n / 2 || ones == n.div_ceil(2), "n={n} ones={ones}");
    }
}

#[test]
fn noiseless_views_are_separable() {
    let cfg = SynthConfig {
        n_frames: 200,
        seed: 31,
        noise: 0.0,
        transient_rate: 0.0,
        movement_rate: 0.0,
        context: false,
        ..SynthConfig::default()
    };
    let data = synth_multiview(&cfg).unwrap();
    for fusion in FusionMode::ALL {
        let det = detect(
            &data.v,
            &data.w,
            Some(&data.energy),
            &DetectorConfig {
                fusion,
                ..DetectorConfig::default()
            },
        )
        .unwrap();
        assert_eq!(roc(&det.score.nu1, &data.labels).unwrap().auc, 1.0, "{fusion:?}");
    }
}

#[test]
fn audio_interference_leaves_video_detection_unchanged() {
    let clean = SynthConfig {
        n_frames: 200,
        seed: 32,
        transient_rate: 0.0,
        movement_rate: 0.0,
        ..SynthConfig::default()
    };
    let noisy = SynthConfig {
        transient_rate: 0.2,
        ..clean.clone()
    };
    let cfg = DetectorConfig {
        fusion: FusionMode::VideoOnly,
        bandwidth_mode: BandwidthMode::SingleViewRule,
        ..DetectorConfig::default()
    };
    let auc = |c: &SynthConfig| {
        let d = synth_multiview(c).unwrap();
        // orient by the latent state so the audio-side energy does not enter
        let reference: Vec<f64> = d.labels.iter().map(|&l| l as f64).collect();
        let det = detect(&d.v, &d.w, Some(&reference), &cfg).unwrap();
        roc(&det.score.nu1, &d.labels).unwrap().auc
    };
    assert_eq!(auc(&clean), auc(&noisy));
}

#[test]
fn multiview_mean_degree_tracks_product() {
    for (s, seed) in [(2.0, 40), (3.0, 41)] {
        let stats = multiview_degree_stats(2000, s, s, 100, seed).unwrap();
        let target = s * s;
        let rel = (stats.exclusive.mean_degree - target).abs() / target;
        assert!(rel <= 0.2, "S={s}: {}", stats.exclusive.mean_degree);
        assert_eq!(stats.predicted_mean_degree, target);
    }
}
