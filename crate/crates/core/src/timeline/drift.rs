use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FrameDescription, Timeline};

/// Constant offset plus linear accumulation plus seeded uniform jitter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriftModel {
    #[serde(default)]
    pub offset_ms: i64,
    #[serde(default)]
    pub rate_s_per_hour: f64,
    #[serde(default)]
    pub jitter_ms: u64,
}

impl DriftModel {
    pub fn is_identity(&self) -> bool {
        self.offset_ms == 0 && self.rate_s_per_hour == 0.0 && self.jitter_ms == 0
    }

    /// Deterministic part of the shift at `t_ms`.
    pub fn shift_ms(&self, t_ms: u64) -> i64 {
        let linear = (self.rate_s_per_hour * t_ms as f64 / 3_600_000.0 * 1000.0).round() as i64;
        self.offset_ms + linear
    }
}

/// Shifts every frame by the model, clamps at zero and re-sorts. Frames that
/// land on an occupied millisecond are nudged forward so timestamps stay
/// strictly increasing.
pub fn apply_drift(timeline: &Timeline, model: &DriftModel, seed: u64) -> Timeline {
    if model.is_identity() {
        return timeline.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = model.jitter_ms as i64;
    let mut frames: Vec<FrameDescription> = timeline
        .frames()
        .iter()
        .map(|f| {
            let noise = if jitter > 0 {
                rng.random_range(-jitter..=jitter)
            } else {
                0
            };
            let t = f.t_ms as i64 + model.shift_ms(f.t_ms) + noise;
            FrameDescription {
                t_ms: t.max(0) as u64,
                ..f.clone()
            }
        })
        .collect();
    frames.sort_by_key(|f| f.t_ms);
    for i in 1..frames.len() {
        if frames[i].t_ms <= frames[i - 1].t_ms {
            frames[i].t_ms = frames[i - 1].t_ms + 1;
        }
    }
    Timeline { frames }
}
