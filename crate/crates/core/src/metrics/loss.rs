//! Forward evaluation of the soft Dice + focal training loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volgrid::{BinaryMask, VoxelGrid};

/// Smoothing term of the soft Dice ratio.
pub const SOFT_DICE_SMOOTH: f64 = 1e-5;

/// Lower clamp applied before taking logarithms.
pub const FOCAL_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Foreground class weight; background gets `1 - alpha`.
    pub alpha: f64,
    pub gamma: f64,
    pub dice_weight: f64,
    pub focal_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.5,
            gamma: 2.0,
            dice_weight: 1.0,
            focal_weight: 1.0,
        }
    }
}

/// `dice_weight * (1 - softDice) + focal_weight * mean focal term`.
pub fn dice_focal_loss(prob: &VoxelGrid, reference: &BinaryMask, cfg: &LossConfig) -> Result<f64> {
    prob.geometry().ensure_compatible(reference.geometry())?;
    if !(0.0..=1.0).contains(&cfg.alpha) || cfg.gamma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in [0, 1] and gamma be >= 0, got alpha={} gamma={}",
            cfg.alpha, cfg.gamma
        )));
    }
    if let Some(bad) = prob.data().iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("probability {bad} outside [0, 1]")));
    }
    let n = prob.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let (mut inter, mut sum_p, mut sum_r, mut focal) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &r) in prob.data().iter().zip(reference.as_bytes()) {
        let fg = r != 0;
        let rv = f64::from(r);
        inter += p * rv;
        sum_p += p;
        sum_r += rv;
        let (pt, at) = if fg { (p, cfg.alpha) } else { (1.0 - p, 1.0 - cfg.alpha) };
        let modulating = if cfg.gamma == 0.0 { 1.0 } else { (1.0 - pt).powf(cfg.gamma) };
        focal += -at * modulating * pt.max(FOCAL_LOG_FLOOR).ln();
    }
    let soft_dice = (2.0 * inter + SOFT_DICE_SMOOTH) / (sum_p + sum_r + SOFT_DICE_SMOOTH);
    Ok(cfg.dice_weight * (1.0 - soft_dice) + cfg.focal_weight * focal / n as f64)
}
