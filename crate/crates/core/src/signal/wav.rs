//! PCM-16 and float-32 WAV files, little-endian, any channel count.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::MultichannelWaveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelWaveform> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::Format { what: "wav", detail: format!("unsupported encoding {fmt:?}/{bits} bit") })
        }
    };
    let mut out = vec![Vec::with_capacity(interleaved.len() / channels.max(1)); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, &v) in out.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    MultichannelWaveform::new(spec.sample_rate, out)
}

/// Reads a file and checks its header rate against `expected_rate`.
pub fn read_wav_at(path: impl AsRef<Path>, expected_rate: u32) -> Result<MultichannelWaveform> {
    let wav = read_wav(path)?;
    if wav.sample_rate() != expected_rate {
        return Err(Error::SampleRateMismatch { expected: expected_rate, actual: wav.sample_rate() });
    }
    Ok(wav)
}

pub fn write_wav(path: impl AsRef<Path>, wave: &MultichannelWaveform, encoding: WavEncoding) -> Result<()> {
    let spec = WavSpec {
        channels: wave.channel_count() as u16,
        sample_rate: wave.sample_rate(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for n in 0..wave.len() {
        for ch in wave.channels() {
            match encoding {
                WavEncoding::Pcm16 => writer.write_sample((ch[n] * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?,
                WavEncoding::Float32 => writer.write_sample(ch[n] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}
