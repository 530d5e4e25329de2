use crate::error::{Error, Result};

/// Fence multiplier conventionally used with Tukey's fences.
pub const DEFAULT_K_FENCE: f64 = 1.5;

/// Lower Tukey fence over a score distribution: `tau = q1 - k_fence * (q3 - q1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TukeyThreshold {
    pub tau: f64,
    pub q1: f64,
    pub q3: f64,
    pub k_fence: f64,
}

fn sorted_finite(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("quartiles of an empty score list"));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite score {bad}")));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Linear interpolation between order statistics at position `p * (N - 1)`.
fn interpolated(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// First and third quartiles by linear interpolation of order statistics.
pub fn quartiles(scores: &[f64]) -> Result<(f64, f64)> {
    let sorted = sorted_finite(scores)?;
    Ok((interpolated(&sorted, 0.25), interpolated(&sorted, 0.75)))
}

pub fn tukey_threshold(scores: &[f64], k_fence: f64) -> Result<TukeyThreshold> {
    if !(k_fence > 0.0 && k_fence.is_finite()) {
        return Err(Error::invalid(format!("k_fence must be positive, got {k_fence}")));
    }
    let (q1, q3) = quartiles(scores)?;
    Ok(TukeyThreshold {
        tau: q1 - k_fence * (q3 - q1),
        q1,
        q3,
        k_fence,
    })
}
