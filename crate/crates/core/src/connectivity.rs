//! Monte Carlo laboratory for the random-graph connectivity model behind
//! the bandwidth rule.
//!
//! Each view is modelled as an Erdős–Rényi graph: every unordered pair of
//! distinct points is connected independently with probability `p`. With
//! `p = S / (N − 1)` a point has on average `S` neighbours and is isolated
//! with probability `(1 − p)^{N−1} ≈ e^{−S}`. In the fused graph two points
//! are linked through a third one connected to the first in view 1 and to
//! the second in view 2, which gives on average `S_v · S_w` neighbours.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed` and switched to stream `2 · trial + view`, so every trial is
//! reproducible on its own and serial and parallel runs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomGraphSpec {
    pub n: usize,
    pub p_edge: f64,
    pub seed: u64,
    pub trials: usize,
}

impl RandomGraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "graph needs at least 2 nodes, got {}",
                self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.p_edge) {
            return Err(Error::InvalidParameter(format!(
                "edge probability must lie in [0, 1], got {}",
                self.p_edge
            )));
        }
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Undirected simple graph stored as sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<u32>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&(b as u32)).is_ok()
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        self.neighbors[a].push(b as u32);
        self.neighbors[b].push(a as u32);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityStats {
    pub isolated_fraction: f64,
    pub mean_degree: f64,
    /// `degree_histogram[d]` counts nodes with degree `d`, pooled over trials.
    pub degree_histogram: Vec<u64>,
}

impl ConnectivityStats {
    fn from_degrees(histogram: Vec<u64>) -> Self {
        let nodes: u64 = histogram.iter().sum();
        let total: u64 = histogram
            .iter()
            .enumerate()
            .map(|(d, &c)| d as u64 * c)
            .sum();
        let isolated = histogram.first().copied().unwrap_or(0);
        Self {
            isolated_fraction: isolated as f64 / nodes as f64,
            mean_degree: total as f64 / nodes as f64,
            degree_histogram: histogram,
        }
    }
}

/// Samples the view graph of trial `trial` (stream `2 · trial`).
pub fn sample_view_graph(spec: &RandomGraphSpec, trial: usize) -> Result<Graph> {
    spec.validate()?;
    Ok(sample_gnp(spec.n, spec.p_edge, spec.seed, 2 * trial as u64))
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// G(n, p) by geometric skipping over the pairs `(v, w)`, `w < v`, in
/// row-major order.
fn sample_gnp(n: usize, p: f64, seed: u64, stream: u64) -> Graph {
    let mut g = Graph::empty(n);
    if p <= 0.0 {
        return g;
    }
    let mut rng = trial_rng(seed, stream);
    let skip = (p < 1.0).then(|| Geometric::new(p).expect("0 < p < 1"));
    let mut v = 1usize;
    let mut w: i64 = -1;
    while v < n {
        let gap = skip.as_ref().map_or(0, |d| d.sample(&mut rng));
        w = w.saturating_add(1).saturating_add(gap.min(i64::MAX as u64 / 2) as i64);
        while v < n && w >= v as i64 {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            g.add_edge(v, w as usize);
        }
    }
    for list in &mut g.neighbors {
        list.sort_unstable();
    }
    g
}

pub fn isolated_fraction(g: &Graph) -> f64 {
    let isolated = (0..g.n()).filter(|&v| g.degree(v) == 0).count();
    isolated as f64 / g.n() as f64
}

pub fn graph_stats(g: &Graph) -> ConnectivityStats {
    let mut hist = vec![0u64; g.n()];
    for v in 0..g.n() {
        hist[g.degree(v)] += 1;
    }
    trim(&mut hist);
    ConnectivityStats::from_degrees(hist)
}

/// Pooled statistics of `spec.trials` independent single-view graphs.
pub fn single_view_stats(spec: &RandomGraphSpec) -> Result<ConnectivityStats> {
    spec.validate()?;
    let hist = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let g = sample_gnp(spec.n, spec.p_edge, spec.seed, 2 * t as u64);
            graph_stats(&g).degree_histogram
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Vec::new(), add_histograms);
    Ok(ConnectivityStats::from_degrees(hist))
}

/// Two-view degree statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiviewStats {
    pub n: usize,
    pub s_v: f64,
    pub s_w: f64,
    pub trials: usize,
    pub seed: u64,
    pub view_v: ConnectivityStats,
    pub view_w: ConnectivityStats,
    /// Support of the product of the two transition matrices, self-loops
    /// included: `m` is a neighbour of `n` when some `l` (possibly `n` or
    /// `m` itself) links `n` to `l` in view 1 and `l` to `m` in view 2.
    pub inclusive: ConnectivityStats,
    /// Only paths through a third point `l ∉ {n, m}`, the count the
    /// binomial model describes.
    pub exclusive: ConnectivityStats,
    /// `S_v · S_w`
    pub predicted_mean_degree: f64,
    /// `e^{−S_v S_w}`
    pub predicted_isolated_fraction: f64,
}

pub fn multiview_degree_stats(
    n: usize,
    s_v: f64,
    s_w: f64,
    trials: usize,
    seed: u64,
) -> Result<MultiviewStats> {
    if !(s_v >= 0.0 && s_w >= 0.0 && s_v.is_finite() && s_w.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "average degrees must be non-negative, got s_v={s_v}, s_w={s_w}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    if s_v * s_w >= (n - 1) as f64 {
        return Err(Error::InvalidParameter(format!(
            "model requires s_v·s_w < n−1, got {} >= {}",
            s_v * s_w,
            n - 1
        )));
    }
    let p_v = s_v / (n - 1) as f64;
    let p_w = s_w / (n - 1) as f64;
    for p in [p_v, p_w] {
        if p > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "average degree exceeds n−1 (edge probability {p})"
            )));
        }
    }
    if trials < 1 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }

    let per_trial: Vec<[Vec<u64>; 4]> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let gv = sample_gnp(n, p_v, seed, 2 * t as u64);
            let gw = sample_gnp(n, p_w, seed, 2 * t as u64 + 1);
            let (inc, exc) = fused_degree_histograms(&gv, &gw);
            [
                graph_stats(&gv).degree_histogram,
                graph_stats(&gw).degree_histogram,
                inc,
                exc,
            ]
        })
        .collect();

    let mut pooled: [Vec<u64>; 4] = Default::default();
    for hists in per_trial {
        for (acc, h) in pooled.iter_mut().zip(hists) {
            *acc = add_histograms(std::mem::take(acc), h);
        }
    }
    let [hv, hw, hi, he] = pooled;
    Ok(MultiviewStats {
        n,
        s_v,
        s_w,
        trials,
        seed,
        view_v: ConnectivityStats::from_degrees(hv),
        view_w: ConnectivityStats::from_degrees(hw),
        inclusive: ConnectivityStats::from_degrees(hi),
        exclusive: ConnectivityStats::from_degrees(he),
        predicted_mean_degree: s_v * s_w,
        predicted_isolated_fraction: (-s_v * s_w).exp(),
    })
}

/// Degree histograms of the fused graph: `(inclusive, exclusive)`, see
/// [`MultiviewStats`].
pub fn fused_degree_histograms(gv: &Graph, gw: &Graph) -> (Vec<u64>, Vec<u64>) {
    let n = gv.n();
    let mut stamp_inc = vec![usize::MAX; n];
    let mut stamp_exc = vec![usize::MAX; n];
    let mut inc = vec![0u64; n];
    let mut exc = vec![0u64; n];
    for a in 0..n {
        let mut d_inc = 0usize;
        let mut d_exc = 0usize;
        let mut mark_inc = |m: usize, d: &mut usize| {
            if m != a && stamp_inc[m] != a {
                stamp_inc[m] = a;
                *d += 1;
            }
        };
        // l = a: view-2 neighbours of a; l = m: view-1 neighbours of a
        for &m in gw.neighbors(a) {
            mark_inc(m as usize, &mut d_inc);
        }
        for &l in gv.neighbors(a) {
            mark_inc(l as usize, &mut d_inc);
            for &m in gw.neighbors(l as usize) {
                let m = m as usize;
                mark_inc(m, &mut d_inc);
                if m != a && stamp_exc[m] != a {
                    stamp_exc[m] = a;
                    d_exc += 1;
                }
            }
        }
        inc[d_inc] += 1;
        exc[d_exc] += 1;
    }
    trim(&mut inc);
    trim(&mut exc);
    (inc, exc)
}

fn trim(hist: &mut Vec<u64>) {
    while hist.len() > 1 && hist.last() == Some(&0) {
        hist.pop();
    }
}

fn add_histograms(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Dense boolean support of an `n × n` transition matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMatrix {
    n: usize,
    cells: Vec<bool>,
}

impl SupportMatrix {
    pub fn new(n: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "support matrix cells",
                expected: n * n,
                found: cells.len(),
            });
        }
        Ok(Self { n, cells })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let cells = (0..n * n).map(|c| f(c / n, c % n)).collect();
        Self { n, cells }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i))
    }

    /// Boolean matrix product: `(i, j)` is set when some `l` has `(i, l)` in
    /// `self` and `(l, j)` in `other`.
    pub fn product(&self, other: &SupportMatrix) -> SupportMatrix {
        let n = self.n;
        SupportMatrix::from_fn(n, |i, j| (0..n).any(|l| self.get(i, l) && other.get(l, j)))
    }

    pub fn connected_elsewhere(&self, i: usize) -> bool {
        (0..self.n).any(|j| j != i && self.get(i, j))
    }
}

/// Checks, for every node, that it has a neighbour in the fused support
/// exactly when it has a neighbour in at least one view.
pub fn verify_proposition1(mv: &SupportMatrix, mw: &SupportMatrix) -> Result<bool> {
    if mv.n() != mw.n() {
        return Err(Error::DimensionMismatch {
            what: "view supports",
            expected: mv.n(),
            found: mw.n(),
        });
    }
    if !mv.has_self_loops() || !mw.has_self_loops() {
        return Err(Error::InvalidParameter(
            "both supports must contain every self-loop".into(),
        ));
    }
    let fused = mv.product(mw);
    Ok((0..mv.n()).all(|i| {
        fused.connected_elsewhere(i) == (mv.connected_elsewhere(i) || mw.connected_elsewhere(i))
    }))
}

/// Pearson chi-square test of a pooled degree histogram against
/// `Binomial(n − 1, p)`. Tail cells are merged until every expected count is
/// at least 5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    /// 0.999 quantile of the chi-square distribution with `dof` degrees.
    pub critical_999: f64,
}

pub fn binomial_fit(stats: &ConnectivityStats, n: usize, p: f64) -> Result<GoodnessOfFit> {
    let nodes: u64 = stats.degree_histogram.iter().sum();
    let binom = Binomial::new(p, (n - 1) as u64)
        .map_err(|e| Error::InvalidParameter(format!("binomial model: {e}")))?;
    let observed = |d: usize| stats.degree_histogram.get(d).copied().unwrap_or(0) as f64;

    // cells: [0..=d_1], (d_1, d_2], ..., with the last cell absorbing the
    // upper tail
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let total = nodes as f64;
    let mut exp_acc = 0.0;
    let mut obs_acc = 0.0;
    let mut cdf = 0.0;
    for d in 0..n {
        let pmf = binom.pmf(d as u64);
        cdf += pmf;
        exp_acc += pmf * total;
        obs_acc += observed(d);
        if exp_acc >= 5.0 && (1.0 - cdf) * total >= 5.0 {
            cells.push((obs_acc, exp_acc));
            exp_acc = 0.0;
            obs_acc = 0.0;
        }
    }
    let closed_obs: f64 = cells.iter().map(|c| c.0).sum();
    let closed_exp: f64 = cells.iter().map(|c| c.1).sum();
    cells.push((total - closed_obs, (total - closed_exp).max(0.0)));
    if cells.len() < 2 {
        return Err(Error::InsufficientData(
            "too few nodes for a chi-square test".into(),
        ));
    }
    let statistic = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else { 0.0 })
        .sum();
    let dof = cells.len() - 1;
    let chi = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Numerical(format!("chi-square distribution: {e}")))?;
    Ok(GoodnessOfFit {
        statistic,
        dof,
        critical_999: chi.inverse_cdf(0.999),
    })
}
