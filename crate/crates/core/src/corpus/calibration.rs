use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Pixel scale and frame rate of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pixels_per_cm: f64,
    frame_rate: f64,
}

impl Calibration {
    pub fn new(pixels_per_cm: f64, frame_rate: f64) -> Result<Self, CorpusError> {
        check_positive("pixels_per_cm", pixels_per_cm)?;
        check_positive("frame_rate", frame_rate)?;
        Ok(Calibration {
            pixels_per_cm,
            frame_rate,
        })
    }

    /// Pixels per centimetre (the scale value α).
    pub fn pixels_per_cm(&self) -> f64 {
        self.pixels_per_cm
    }

    /// Frames per second.
    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn cm_per_px(&self) -> f64 {
        1.0 / self.pixels_per_cm
    }

    /// Seconds elapsed over `frames` frame intervals.
    pub fn frames_to_seconds(&self, frames: f64) -> f64 {
        frames / self.frame_rate
    }
}

/// Builds a calibration from a reference object of known physical width,
/// e.g. the heater surface seen as `reference_px` pixels over `reference_cm`.
pub fn calibrate(
    reference_px: f64,
    reference_cm: f64,
    frame_rate: f64,
) -> Result<Calibration, CorpusError> {
    check_positive("reference_px", reference_px)?;
    check_positive("reference_cm", reference_cm)?;
    Calibration::new(reference_px / reference_cm, frame_rate)
}

fn check_positive(name: &str, value: f64) -> Result<(), CorpusError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(CorpusError::Domain(format!(
            "{name} must be a finite positive number, got {value}"
        )))
    }
}
