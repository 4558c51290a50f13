//! Kernel bandwidth selection.
//!
//! The single-view rule sets `ε = C · max_m min_{n≠m} ||x_n − x_m||²` with
//! `C` in `[2, 3]`, which keeps every point connected to at least one other
//! point. When two views are fused by the alternating product, a point only
//! needs to be connected in one of them, so each view can use far fewer
//! connections: if a single view needs `δ` connections per point on
//! average, the fused graph reaches the same connectivity when each view
//! has `√δ`.
//!
//! [`select_bandwidth_ad`] implements the search for that reduced bandwidth:
//! estimate `δ̂` at the single-view `C`, then binary-search a linear grid
//! `C_k = (k / |𝒞|) · C` for the element whose average connection count
//! `δ^AD` reaches `√δ̂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{build_affinity, AffinityKernel, DistanceMatrix};

/// Exponent applied to `δ̂` to obtain the per-view target.
pub const TARGET_EXPONENT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandwidthConfig {
    /// Single-view multiplier `C`.
    pub c_single: f64,
    /// Number of grid elements `|𝒞|`.
    pub grid_size: usize,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            c_single: 2.0,
            grid_size: 40,
        }
    }
}

impl BandwidthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_single > 0.0 && self.c_single.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "c_single must be positive, got {}",
                self.c_single
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid_size must be at least 2, got {}",
                self.grid_size
            )));
        }
        Ok(())
    }

    /// `C_k` for the 1-based grid index `k`.
    pub fn grid_value(&self, k: usize) -> f64 {
        k as f64 / self.grid_size as f64 * self.c_single
    }

    pub fn step(&self) -> f64 {
        self.c_single / self.grid_size as f64
    }
}

/// One probe of the binary search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridProbe {
    /// 1-based grid index.
    pub k: usize,
    pub c: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub maxmin: f64,
    pub c_single: f64,
    pub epsilon_single: f64,
    pub delta_hat: f64,
    /// `√δ̂`
    pub target: f64,
    pub grid_size: usize,
    /// 1-based grid index of the selected element.
    pub k_ad: usize,
    pub c_ad: f64,
    pub epsilon_ad: f64,
    pub delta_ad: f64,
    /// Every grid element evaluated by the search, in order.
    pub visited: Vec<GridProbe>,
    /// Set when `δ̂ < 1`: the single-view graph is already sparser than the
    /// target, so the single-view `C` is returned instead of the search
    /// result.
    pub sparse_single_view: bool,
}

/// `max_m min_{n≠m} d²(n, m)`.
pub fn maxmin_sq_dist(d: &DistanceMatrix) -> Result<f64> {
    let n = d.n();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "max-min distance needs at least 2 points, got {n}"
        )));
    }
    let m = d.as_matrix();
    let best = (0..n)
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best)
}

/// Single-view bandwidth `c · maxmin`.
pub fn epsilon_single(d: &DistanceMatrix, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth multiplier must be positive, got {c}"
        )));
    }
    let maxmin = maxmin_sq_dist(d)?;
    if maxmin <= 0.0 {
        return Err(Error::Degenerate(
            "every point has an exact duplicate (max-min squared distance is 0); \
             remove duplicate frames or add jitter"
                .into(),
        ));
    }
    Ok(c * maxmin)
}

/// Probability that two distinct points are connected, estimated as the
/// mean off-diagonal kernel value.
pub fn estimate_p(k: &AffinityKernel) -> f64 {
    let n = k.n();
    off_diagonal_sum(k) / (n as f64 * (n as f64 - 1.0))
}

/// Average number of connections per point, `(N − 1) · p̂`.
pub fn estimate_delta(k: &AffinityKernel) -> f64 {
    off_diagonal_sum(k) / k.n() as f64
}

fn off_diagonal_sum(k: &AffinityKernel) -> f64 {
    let m = k.as_matrix();
    m.row_iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .sum::<f64>()
        })
        .sum()
}

/// `δ` of the kernel built with bandwidth `c · maxmin`.
pub fn delta_at(d: &DistanceMatrix, maxmin: f64, c: f64) -> Result<f64> {
    Ok(estimate_delta(&build_affinity(d, c * maxmin)?))
}

pub fn select_bandwidth_ad(d: &DistanceMatrix, cfg: &BandwidthConfig) -> Result<BandwidthReport> {
    cfg.validate()?;
    let epsilon_single = epsilon_single(d, cfg.c_single)?;
    let maxmin = epsilon_single / cfg.c_single;
    let delta_hat = estimate_delta(&build_affinity(d, epsilon_single)?);
    let target = delta_hat.powf(TARGET_EXPONENT);

    // The live set is the contiguous index range lo..lo+len of the grid.
    let mut lo = 1usize;
    let mut len = cfg.grid_size;
    let mut visited = Vec::new();
    while len != 1 {
        let half = len / 2;
        let k = lo + half - 1;
        let c = cfg.grid_value(k);
        let delta = delta_at(d, maxmin, c)?;
        visited.push(GridProbe { k, c, delta });
        if delta > target {
            len = half;
        } else {
            lo = k + 1;
            len -= half;
        }
    }

    let sparse_single_view = delta_hat < 1.0;
    let k_ad = if sparse_single_view { cfg.grid_size } else { lo };
    let c_ad = cfg.grid_value(k_ad);
    let delta_ad = match visited.iter().find(|p| p.k == k_ad) {
        Some(p) => p.delta,
        None => delta_at(d, maxmin, c_ad)?,
    };
    Ok(BandwidthReport {
        maxmin,
        c_single: cfg.c_single,
        epsilon_single,
        delta_hat,
        target,
        grid_size: cfg.grid_size,
        k_ad,
        c_ad,
        epsilon_ad: c_ad * maxmin,
        delta_ad,
        visited,
        sparse_single_view,
    })
}
