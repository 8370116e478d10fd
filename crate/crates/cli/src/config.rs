//! Run configuration: a TOML file with one table per module, overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use bubbletrack::analytics::AnalyticsConfig;
use bubbletrack::evaluation::IouMode;
use bubbletrack::kinematics::KinematicsConfig;
use bubbletrack::TrackerConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub mode: IouMode,
}

/// Module parameters, as read from the config file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub tracker: TrackerConfig,
    pub kinematics: KinematicsConfig,
    pub analytics: AnalyticsConfig,
    pub evaluation: EvaluationConfig,
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub delta_frames: Option<u64>,
    pub bins: Option<usize>,
    pub sigma_position: Option<f64>,
    pub sigma_time: Option<f64>,
    pub debounce: Option<usize>,
    pub iou_threshold: Option<f64>,
    pub stride: Option<usize>,
    pub histogram_bin_mm: Option<f64>,
    pub eval_mode: Option<IouMode>,
}

impl Settings {
    pub fn from_toml_str(text: &str, source: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("{}: {e}", source.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Settings::from_toml_str(&text, path)
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        let k = &mut self.kinematics;
        k.delta_frames = o.delta_frames.unwrap_or(k.delta_frames);
        k.bins = o.bins.unwrap_or(k.bins);
        k.sigma_position = o.sigma_position.unwrap_or(k.sigma_position);
        k.sigma_time = o.sigma_time.unwrap_or(k.sigma_time);
        k.stride = o.stride.unwrap_or(k.stride);
        let a = &mut self.analytics;
        a.debounce = o.debounce.unwrap_or(a.debounce);
        a.histogram_bin_mm = o.histogram_bin_mm.unwrap_or(a.histogram_bin_mm);
        self.tracker.iou_threshold = o.iou_threshold.unwrap_or(self.tracker.iou_threshold);
        self.evaluation.mode = o.eval_mode.unwrap_or(self.evaluation.mode);
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.tracker.validate().map_err(|e| CliError::usage(format!("tracker: {e}")))?;
        self.kinematics.validate().map_err(|e| CliError::usage(format!("kinematics: {e}")))?;
        self.analytics.validate().map_err(|e| CliError::usage(format!("analytics: {e}")))?;
        Ok(())
    }
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub settings: Settings,
}
