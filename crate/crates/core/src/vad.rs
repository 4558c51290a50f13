//! Voice activity detection from two views.
//!
//! [`detect`] builds a Gaussian kernel per view, normalizes it into a
//! Markov matrix, fuses the two matrices and returns the leading
//! non-trivial eigenvector as a continuous speech score. The score is
//! oriented so that it correlates positively with frame energy and then
//! compared against a threshold, or evaluated over all thresholds by
//! [`roc`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{maxmin_sq_dist, select_bandwidth_ad, BandwidthConfig, BandwidthReport};
use crate::error::{Error, Result};
use crate::kernel::{
    build_affinity, pairwise_sq_dists, row_normalize, DistanceMatrix, FeatureMatrix, Fusion,
    MarkovMatrix,
};
use crate::spectral::{leading_nontrivial_eigenvector, EigenMethod, SpectralResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FusionMode {
    Alternating,
    Hadamard,
    Sum,
    AudioOnly,
    VideoOnly,
}

impl FusionMode {
    pub const ALL: [FusionMode; 5] = [
        FusionMode::Alternating,
        FusionMode::Hadamard,
        FusionMode::Sum,
        FusionMode::AudioOnly,
        FusionMode::VideoOnly,
    ];

    fn fusion(self) -> Option<Fusion> {
        match self {
            FusionMode::Alternating => Some(Fusion::Alternating),
            FusionMode::Hadamard => Some(Fusion::Hadamard),
            FusionMode::Sum => Some(Fusion::Sum),
            FusionMode::AudioOnly | FusionMode::VideoOnly => None,
        }
    }

    pub fn uses_audio(self) -> bool {
        self != FusionMode::VideoOnly
    }

    pub fn uses_video(self) -> bool {
        self != FusionMode::AudioOnly
    }

    pub fn name(self) -> &'static str {
        match self {
            FusionMode::Alternating => "alternating",
            FusionMode::Hadamard => "hadamard",
            FusionMode::Sum => "sum",
            FusionMode::AudioOnly => "audio_only",
            FusionMode::VideoOnly => "video_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum BandwidthMode {
    /// `ε = C · maxmin` with the single-view `C`.
    SingleViewRule,
    /// Reduced bandwidth from the binary search on the `C` grid.
    Algorithm1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Audio,
    Video,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub fusion: FusionMode,
    pub bandwidth_mode: BandwidthMode,
    /// Views whose bandwidth comes from the search when `bandwidth_mode` is
    /// `algorithm1`; the others use the single-view rule.
    pub algorithm1_views: Vec<View>,
    pub eigen_method: EigenMethod,
    pub c_single: f64,
    pub grid_size: usize,
    /// Fixed audio multiplier overriding `bandwidth_mode` for the audio
    /// view.
    pub audio_c: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            fusion: FusionMode::Alternating,
            bandwidth_mode: BandwidthMode::Algorithm1,
            algorithm1_views: vec![View::Audio],
            eigen_method: EigenMethod::Direct,
            c_single: 2.0,
            grid_size: 40,
            audio_c: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.bandwidth_config().validate()?;
        if let Some(c) = self.audio_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "audio bandwidth multiplier must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }

    pub fn bandwidth_config(&self) -> BandwidthConfig {
        BandwidthConfig {
            c_single: self.c_single,
            grid_size: self.grid_size,
        }
    }

    fn searches(&self, view: View) -> bool {
        // single-view baselines keep the single-view rule: the reduced
        // bandwidth only makes sense when the other view can fill the gaps
        self.bandwidth_mode == BandwidthMode::Algorithm1
            && self.fusion.fusion().is_some()
            && self.algorithm1_views.contains(&view)
    }
}

/// Bandwidth actually used for one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewBandwidth {
    pub maxmin: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Present when the bandwidth came from the search.
    pub search: Option<BandwidthReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityScore {
    pub nu1: Vec<f64>,
    pub orientation_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub score: ActivityScore,
    pub spectral: SpectralResult,
    pub audio: Option<ViewBandwidth>,
    pub video: Option<ViewBandwidth>,
}

/// Squared distances and max-min statistic of one view, reusable across
/// bandwidths.
struct PreparedView {
    d: DistanceMatrix,
    maxmin: f64,
}

impl PreparedView {
    fn new(x: &FeatureMatrix) -> Result<Self> {
        let d = pairwise_sq_dists(x);
        let maxmin = maxmin_sq_dist(&d)?;
        if maxmin <= 0.0 {
            return Err(Error::Degenerate(
                "every frame has an exact duplicate (max-min squared distance is 0)".into(),
            ));
        }
        Ok(Self { d, maxmin })
    }

    fn bandwidth(&self, view: View, cfg: &DetectorConfig) -> Result<ViewBandwidth> {
        let fixed = |c: f64| ViewBandwidth {
            maxmin: self.maxmin,
            c,
            epsilon: c * self.maxmin,
            search: None,
        };
        if let (View::Audio, Some(c)) = (view, cfg.audio_c) {
            return Ok(fixed(c));
        }
        if cfg.searches(view) {
            let report = select_bandwidth_ad(&self.d, &cfg.bandwidth_config())?;
            return Ok(ViewBandwidth {
                maxmin: self.maxmin,
                c: report.c_ad,
                epsilon: report.epsilon_ad,
                search: Some(report),
            });
        }
        Ok(fixed(cfg.c_single))
    }

    fn markov(&self, bw: &ViewBandwidth) -> Result<MarkovMatrix> {
        Ok(row_normalize(&build_affinity(&self.d, bw.epsilon)?))
    }
}

struct Prepared {
    audio: Option<PreparedView>,
    video: Option<PreparedView>,
}

impl Prepared {
    fn new(v: &FeatureMatrix, w: &FeatureMatrix, fusion: FusionMode) -> Result<Self> {
        if v.n_frames() != w.n_frames() {
            return Err(Error::DimensionMismatch {
                what: "frames in the video view",
                expected: v.n_frames(),
                found: w.n_frames(),
            });
        }
        Ok(Self {
            audio: fusion.uses_audio().then(|| PreparedView::new(v)).transpose()?,
            video: fusion.uses_video().then(|| PreparedView::new(w)).transpose()?,
        })
    }

    fn detect(&self, reference: &Reference, cfg: &DetectorConfig) -> Result<Detection> {
        let audio = match &self.audio {
            Some(p) => Some((p, p.bandwidth(View::Audio, cfg)?)),
            None => None,
        };
        let video = match &self.video {
            Some(p) => Some((p, p.bandwidth(View::Video, cfg)?)),
            None => None,
        };
        let m = match (&audio, &video, cfg.fusion.fusion()) {
            (Some((pa, ba)), Some((pv, bv)), Some(f)) => f.apply(&pa.markov(ba)?, &pv.markov(bv)?)?,
            (Some((pa, ba)), None, None) => pa.markov(ba)?,
            (None, Some((pv, bv)), None) => pv.markov(bv)?,
            _ => unreachable!("views are prepared according to the fusion mode"),
        };
        let spectral = leading_nontrivial_eigenvector(&m, cfg.eigen_method)?;
        let score = orient_sign(&spectral.vector, &reference.values, &reference.source)?;
        Ok(Detection {
            score,
            spectral,
            audio: audio.map(|(_, b)| b),
            video: video.map(|(_, b)| b),
        })
    }
}

struct Reference {
    values: Vec<f64>,
    source: String,
}

impl Reference {
    fn new(v: &FeatureMatrix, energy: Option<&[f64]>) -> Result<Self> {
        match energy {
            Some(e) if e.len() != v.n_frames() => Err(Error::DimensionMismatch {
                what: "energy values",
                expected: v.n_frames(),
                found: e.len(),
            }),
            Some(e) => Ok(Self {
                values: e.to_vec(),
                source: "energy".into(),
            }),
            None => Ok(Self {
                values: (0..v.n_frames())
                    .map(|i| v.row(i).iter().map(|x| x * x).sum())
                    .collect(),
                source: "audio feature squared norm".into(),
            }),
        }
    }
}

/// Runs the detector. `energy` orients the score; without it the squared
/// norm of each audio feature row is used.
pub fn detect(
    v: &FeatureMatrix,
    w: &FeatureMatrix,
    energy: Option<&[f64]>,
    cfg: &DetectorConfig,
) -> Result<Detection> {
    cfg.validate()?;
    let prepared = Prepared::new(v, w, cfg.fusion)?;
    prepared.detect(&Reference::new(v, energy)?, cfg)
}

fn pearson(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    (cov, va, vb)
}

/// Flips `nu1` when it correlates negatively with `reference`.
pub fn orient_sign(nu1: &[f64], reference: &[f64], source: &str) -> Result<ActivityScore> {
    if nu1.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            what: "orientation reference",
            expected: nu1.len(),
            found: reference.len(),
        });
    }
    let (cov, var_nu, var_ref) = pearson(nu1, reference);
    if var_nu.is_nan() || var_nu <= 0.0 {
        return Err(Error::Degenerate(
            "leading eigenvector is constant; the embedding carries no information".into(),
        ));
    }
    if var_ref.is_nan() || var_ref <= 0.0 {
        return Err(Error::Degenerate(format!(
            "orientation reference ({source}) is constant"
        )));
    }
    let nu1 = if cov < 0.0 {
        nu1.iter().map(|x| -x).collect()
    } else {
        nu1.to_vec()
    };
    Ok(ActivityScore {
        nu1,
        orientation_source: source.to_string(),
    })
}

/// `1` where `score > tau`.
pub fn threshold_indicator(score: &[f64], tau: f64) -> Vec<u8> {
    score.iter().map(|&s| u8::from(s > tau)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `+∞`, the distinct scores in decreasing order, `−∞`.
    pub thresholds: Vec<f64>,
    /// `(pfa, pd)` for each threshold.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Empirical ROC over every distinct score value.
pub fn roc(score: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if score.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: score.len(),
            found: labels.len(),
        });
    }
    if let Some(i) = score.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::InvalidParameter(format!(
            "label {} at frame {i} is not 0 or 1",
            labels[i]
        )));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InsufficientData(
            "labels must contain both speech and non-speech frames".into(),
        ));
    }

    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));

    let (p, q) = (positives as f64, negatives as f64);
    let mut thresholds = vec![f64::INFINITY];
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = score[order[i]];
        // frames strictly above s were counted by the previous groups
        thresholds.push(s);
        points.push((fp as f64 / q, tp as f64 / p));
        while i < order.len() && score[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }
    thresholds.push(f64::NEG_INFINITY);
    points.push((1.0, 1.0));

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(RocCurve {
        thresholds,
        points,
        auc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c: f64,
    pub auc: f64,
}

/// AUC as a function of the audio multiplier `c`, the video view keeping
/// the single-view rule.
pub fn sweep_c(
    v: &FeatureMatrix,
    w: &FeatureMatrix,
    labels: &[u8],
    energy: Option<&[f64]>,
    c_grid: &[f64],
    cfg: &DetectorConfig,
) -> Result<Vec<SweepPoint>> {
    if c_grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    cfg.validate()?;
    if labels.len() != v.n_frames() {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: v.n_frames(),
            found: labels.len(),
        });
    }
    let base = DetectorConfig {
        algorithm1_views: cfg
            .algorithm1_views
            .iter()
            .copied()
            .filter(|&v| v != View::Audio)
            .collect(),
        ..cfg.clone()
    };
    let prepared = Prepared::new(v, w, cfg.fusion)?;
    let reference = Reference::new(v, energy)?;
    c_grid
        .par_iter()
        .map(|&c| {
            let point_cfg = DetectorConfig {
                audio_c: Some(c),
                ..base.clone()
            };
            point_cfg.validate()?;
            let det = prepared.detect(&reference, &point_cfg)?;
            Ok(SweepPoint {
                c,
                auc: roc(&det.score.nu1, labels)?.auc,
            })
        })
        .collect()
}

/// `c_min, c_min + step, ...` with `steps` points ending at `c_max`.
pub fn linear_grid(c_min: f64, c_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Usage("sweep needs at least one step".into()));
    }
    if !(c_min > 0.0 && c_max >= c_min && c_max.is_finite()) {
        return Err(Error::Usage(format!(
            "sweep range must satisfy 0 < c_min <= c_max, got [{c_min}, {c_max}]"
        )));
    }
    if steps == 1 {
        return Ok(vec![c_min]);
    }
    let h = (c_max - c_min) / (steps - 1) as f64;
    Ok((0..steps).map(|i| c_min + h * i as f64).collect())
}
