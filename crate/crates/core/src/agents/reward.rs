use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How neighbor rewards are weighted by road distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborWeighting {
    /// w_i ∝ 1/d_i: nearer junctions count more.
    #[default]
    InverseDistance,
    /// w_i ∝ d_i.
    Distance,
}

/// Negative mean of the per-step vicinity counts of one cycle.
pub fn own_reward(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Lifecycle(
            "no samples collected for the cycle".into(),
        ));
    }
    Ok(-(samples.iter().sum::<f64>() / samples.len() as f64))
}

/// `own_weight · own + neighbor_weight · Σ w_i r_i` with normalized
/// distance weights. Without neighbors the own reward is returned unchanged.
pub fn combined_reward(
    own: f64,
    neighbors: &[(f64, f64)],
    own_weight: f64,
    neighbor_weight: f64,
    weighting: NeighborWeighting,
) -> Result<f64> {
    if let Some((_, d)) = neighbors.iter().find(|(_, d)| !d.is_finite() || *d <= 0.0) {
        return Err(Error::Contract(format!(
            "neighbor distance must be positive, got {d}"
        )));
    }
    if neighbors.is_empty() {
        return Ok(own);
    }
    let raw = |d: f64| match weighting {
        NeighborWeighting::InverseDistance => 1.0 / d,
        NeighborWeighting::Distance => d,
    };
    let total: f64 = neighbors.iter().map(|(_, d)| raw(*d)).sum();
    let blended: f64 = neighbors.iter().map(|(r, d)| raw(*d) / total * r).sum();
    Ok(own_weight * own + neighbor_weight * blended)
}
