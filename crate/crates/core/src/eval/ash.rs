use image::RgbImage;
use serde::{Deserialize, Serialize};

/// Thresholds of the ash-presence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AshThresholds {
    /// Pixels with luminance strictly below this value count as ash.
    pub luminance: f64,
    /// Ash is present when the dark fraction strictly exceeds this.
    pub fraction: f64,
}

impl Default for AshThresholds {
    fn default() -> Self {
        Self {
            luminance: 128.0,
            fraction: 0.005,
        }
    }
}

/// Rec. 601 luma, computed in integer thousandths so gray pixels map
/// exactly onto their level.
pub fn luminance(rgb: [u8; 3]) -> f64 {
    let [r, g, b] = rgb.map(u32::from);
    (299 * r + 587 * g + 114 * b) as f64 / 1000.0
}

pub fn dark_fraction(mask: &RgbImage, luminance_threshold: f64) -> f64 {
    let total = mask.width() as usize * mask.height() as usize;
    if total == 0 {
        return 0.0;
    }
    let dark = mask
        .pixels()
        .filter(|p| luminance(p.0) < luminance_threshold)
        .count();
    dark as f64 / total as f64
}

/// Whether a black-on-white mask marks any ash.
pub fn ash_presence(mask: &RgbImage, thresholds: &AshThresholds) -> bool {
    dark_fraction(mask, thresholds.luminance) > thresholds.fraction
}
