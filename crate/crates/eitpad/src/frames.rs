//! Measurement frames: one voltage reading per channel, and timed series
//! of such frames.

use crate::error::{Error, Result};

/// One reading per channel of a plan, in plan order. Volts.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameVector {
    values: Vec<f64>,
}

impl FrameVector {
    pub fn new(values: Vec<f64>) -> Result<FrameVector> {
        if values.is_empty() {
            return Err(Error::param("frame must have at least one channel"));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite reading at channel {bad}"
            )));
        }
        Ok(FrameVector { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Frames sampled at a fixed rate; `frames[i]` was taken at `i / rate_hz`
/// seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSeries {
    frames: Vec<FrameVector>,
    rate_hz: f64,
}

impl FrameSeries {
    pub fn new(frames: Vec<FrameVector>, rate_hz: f64) -> Result<FrameSeries> {
        if frames.is_empty() {
            return Err(Error::param("series must contain at least one frame"));
        }
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(Error::param(format!(
                "frame rate must be positive and finite, got {rate_hz}"
            )));
        }
        let width = frames[0].len();
        if let Some(bad) = frames.iter().position(|f| f.len() != width) {
            return Err(Error::DimensionMismatch(format!(
                "frame {bad} has {} channels, expected {width}",
                frames[bad].len()
            )));
        }
        Ok(FrameSeries { frames, rate_hz })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Channels per frame.
    pub fn width(&self) -> usize {
        self.frames[0].len()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn frame(&self, i: usize) -> &FrameVector {
        &self.frames[i]
    }

    pub fn frames(&self) -> &[FrameVector] {
        &self.frames
    }

    /// Acquisition time of each frame, seconds from the start.
    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.frames.len())
            .map(|i| i as f64 / self.rate_hz)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_empty_and_non_finite() {
        assert!(FrameVector::new(vec![]).is_err());
        assert!(FrameVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(FrameVector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn series_enforces_uniform_width_and_rate() {
        let a = FrameVector::new(vec![1.0, 2.0]).unwrap();
        let b = FrameVector::new(vec![3.0]).unwrap();
        assert!(FrameSeries::new(vec![a.clone(), b], 3.0).is_err());
        assert!(FrameSeries::new(vec![a.clone()], 0.0).is_err());
        assert!(FrameSeries::new(vec![], 3.0).is_err());
        let s = FrameSeries::new(vec![a.clone(), a], 3.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.width(), 2);
    }

    #[test]
    fn timestamps_follow_the_rate() {
        let f = FrameVector::new(vec![0.0]).unwrap();
        let s = FrameSeries::new(vec![f.clone(), f.clone(), f], 4.0).unwrap();
        assert_eq!(s.timestamps(), vec![0.0, 0.25, 0.5]);
    }
}
