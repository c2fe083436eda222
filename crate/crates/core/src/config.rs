//! Run-time tunables. Loaded from one JSON file; command-line flags override.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationParams;
use crate::error::{Error, Result};
use crate::heatmap::SelectionParams;
use crate::session::{LandscapeParams, Orientation, SessionConfig};
use crate::temporal::bottom_up_frames;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bin_threshold: u8,
    pub scs_threshold: f64,
    pub window_n: usize,
    pub cut_window_n: usize,
    /// Frames of bottom-up attention after a cut. Derived from `handover_ms`
    /// and the stream frame rate when absent.
    pub bottom_up_frames: Option<u64>,
    pub handover_ms: f64,
    pub cut_hash_threshold: u32,
    pub zscore: bool,
    pub zscore_alpha: f64,
    pub cluster_epsilon: f64,
    /// ⌈window / 3⌉ when absent.
    pub cluster_min_size: Option<usize>,
    pub head_move_threshold: f64,
    pub window_cap_multiplier: usize,
    pub orientation: Orientation,
    pub landscape: LandscapeParams,
    pub history: Option<PathBuf>,
    pub recalibration: bool,
    /// Check every frame for cuts instead of key frames only.
    pub all_frames_key: bool,
    pub working_width: usize,
    pub working_height: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bin_threshold: 128,
            scs_threshold: 0.6,
            window_n: 10,
            cut_window_n: 5,
            bottom_up_frames: None,
            handover_ms: 150.0,
            cut_hash_threshold: 10,
            zscore: true,
            zscore_alpha: 3.0,
            cluster_epsilon: 0.1,
            cluster_min_size: None,
            head_move_threshold: 0.005,
            window_cap_multiplier: 4,
            orientation: Orientation::Portrait,
            landscape: LandscapeParams::default(),
            history: None,
            recalibration: true,
            all_frames_key: false,
            working_width: 68,
            working_height: 68,
        }
    }
}

fn require(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = Error::parse_json(text, "config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        require((0.0..=1.0).contains(&self.scs_threshold), "scs_threshold", "must be in [0, 1]")?;
        require(self.window_n >= 2, "window_n", "must be at least 2")?;
        require(self.cut_window_n >= 1, "cut_window_n", "must be at least 1")?;
        require(
            self.handover_ms.is_finite() && self.handover_ms >= 0.0,
            "handover_ms",
            "must be finite and non-negative",
        )?;
        require(self.cut_hash_threshold <= 64, "cut_hash_threshold", "must be at most 64")?;
        require(
            self.zscore_alpha.is_finite() && self.zscore_alpha > 0.0,
            "zscore_alpha",
            "must be positive",
        )?;
        require(
            self.cluster_epsilon.is_finite() && self.cluster_epsilon > 0.0,
            "cluster_epsilon",
            "must be positive",
        )?;
        require(self.cluster_min_size != Some(0), "cluster_min_size", "must be at least 1")?;
        require(
            self.head_move_threshold.is_finite() && self.head_move_threshold >= 0.0,
            "head_move_threshold",
            "must be finite and non-negative",
        )?;
        require(self.window_cap_multiplier >= 1, "window_cap_multiplier", "must be at least 1")?;
        let l = &self.landscape;
        require(
            l.kx.is_finite() && l.y_floor.is_finite() && l.cy.is_finite(),
            "landscape",
            "parameters must be finite",
        )?;
        require(
            self.working_width >= 8 && self.working_height >= 8,
            "working_width",
            "working resolution must be at least 8x8",
        )?;
        Ok(())
    }

    pub fn session_config(&self, fps: f64) -> Result<SessionConfig> {
        self.validate()?;
        let bu = match self.bottom_up_frames {
            Some(n) => n,
            None => {
                require(fps.is_finite() && fps > 0.0, "fps", "stream frame rate must be positive")?;
                bottom_up_frames(fps, self.handover_ms)
            }
        };
        Ok(SessionConfig {
            working_width: self.working_width,
            working_height: self.working_height,
            selection: SelectionParams {
                bin_threshold: self.bin_threshold,
                scs_threshold: self.scs_threshold,
            },
            calibration: CalibrationParams {
                zscore_alpha: self.zscore.then_some(self.zscore_alpha),
                epsilon: self.cluster_epsilon,
                min_size: self.cluster_min_size,
                cap_multiplier: self.window_cap_multiplier,
            },
            window_n: self.window_n,
            cut_window_n: self.cut_window_n,
            bottom_up_frames: bu,
            cut_hash_threshold: self.cut_hash_threshold,
            head_move_threshold: self.head_move_threshold,
            orientation: self.orientation,
            landscape: self.landscape,
            recalibration: self.recalibration,
            all_frames_key: self.all_frames_key,
        })
    }
}
