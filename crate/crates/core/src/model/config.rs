use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

/// How region and pixel-count thresholds are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Counts are divided by the area of the reference region first.
    #[default]
    Fraction,
    /// Counts are compared as raw pixel numbers.
    Absolute,
}

/// Thresholds for the three rejection filters.
///
/// Stored on disk as TOML with the same field names; missing keys take the
/// defaults below.
///
/// ```toml
/// threshold_mode = "fraction"   # or "absolute"
/// face_thresh = 0.10            # face and contour symmetric difference
/// eye_thresh = 0.30
/// teeth_thresh = 0.50
/// mu_thresh = 20                # per-pixel intensity change counted as makeup
/// mu_pixel_thresh = 0.05        # modified face pixels must exceed this
/// bg_thresh = 25                # per-pixel intensity change counted as inconsistent
/// bg_pixel_thresh = 0.02        # inconsistent background pixels must not exceed this
/// min_region_area = 32          # eyes/teeth below this area are treated as absent
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub threshold_mode: ThresholdMode,
    pub face_thresh: f64,
    pub eye_thresh: f64,
    pub teeth_thresh: f64,
    pub mu_thresh: u8,
    pub mu_pixel_thresh: f64,
    pub bg_thresh: u8,
    pub bg_pixel_thresh: f64,
    pub min_region_area: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            threshold_mode: ThresholdMode::Fraction,
            face_thresh: 0.10,
            eye_thresh: 0.30,
            teeth_thresh: 0.50,
            mu_thresh: 20,
            mu_pixel_thresh: 0.05,
            bg_thresh: 25,
            bg_pixel_thresh: 0.02,
            min_region_area: 32,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("face_thresh", self.face_thresh),
            ("eye_thresh", self.eye_thresh),
            ("teeth_thresh", self.teeth_thresh),
            ("mu_pixel_thresh", self.mu_pixel_thresh),
            ("bg_pixel_thresh", self.bg_pixel_thresh),
        ];
        for (name, value) in counts {
            if !value.is_finite() || value < 0.0 {
                return Err(ForgeError::Config(format!(
                    "{name} = {value} must be a non-negative number"
                )));
            }
            if self.threshold_mode == ThresholdMode::Fraction && value > 1.0 {
                return Err(ForgeError::Config(format!(
                    "{name} = {value} is outside [0, 1] in fraction mode"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: FilterConfig =
            toml::from_str(text).map_err(|e| ForgeError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ForgeError::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| ForgeError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("FilterConfig serializes")
    }
}
