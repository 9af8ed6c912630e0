use crate::error::{Error, Result};

/// Time-domain samples for one or more channels sharing a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelWaveform {
    sample_rate: u32,
    channels: Vec<Vec<f64>>,
}

impl MultichannelWaveform {
    pub fn new(sample_rate: u32, channels: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidWaveform("sample rate must be positive".into()));
        }
        if channels.is_empty() {
            return Err(Error::InvalidWaveform("no channels".into()));
        }
        let len = channels[0].len();
        for (i, ch) in channels.iter().enumerate() {
            if ch.len() != len {
                return Err(Error::InvalidWaveform(format!(
                    "channel {i} has {} samples, channel 0 has {len}",
                    ch.len()
                )));
            }
            if let Some(n) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidWaveform(format!("non-finite sample at channel {i}, index {n}")));
            }
        }
        Ok(Self { sample_rate, channels })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Keeps the first `len` samples of every channel.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self {
            sample_rate: self.sample_rate,
            channels: self.channels.iter().map(|c| c[..len].to_vec()).collect(),
        }
    }
}
