//! Multichannel WAV reading and writing (PCM 16/24-bit and 32-bit float).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

impl std::str::FromStr for WavFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(Self::Pcm16),
            "pcm24" => Ok(Self::Pcm24),
            "float32" => Ok(Self::Float32),
            other => Err(Error::invalid(format!(
                "unknown wav format '{other}' (expected pcm16, pcm24 or float32)"
            ))),
        }
    }
}

/// Deinterleaved audio, samples scaled to [-1, 1] for integer formats.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl Audio {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_wav(path: &Path) -> Result<Audio> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let nch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let full = (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full))
                .collect::<std::result::Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::invalid(format!(
                "unsupported wav encoding {fmt:?} with {bits} bits"
            )))
        }
    };
    let frames = interleaved.len() / nch;
    let channels = (0..nch)
        .map(|c| (0..frames).map(|n| interleaved[n * nch + c]).collect())
        .collect();
    Ok(Audio {
        sample_rate: spec.sample_rate,
        channels,
    })
}

pub fn write_wav(path: &Path, audio: &Audio, format: WavFormat) -> Result<()> {
    let nch = audio.channels.len();
    if nch == 0 || nch > u16::MAX as usize {
        return Err(Error::invalid("wav output needs 1..65535 channels"));
    }
    let len = audio.len();
    if audio.channels.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("channels differ in length"));
    }
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Pcm24 => (24, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: nch as u16,
        sample_rate: audio.sample_rate,
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for n in 0..len {
        for ch in &audio.channels {
            let v = ch[n];
            match format {
                WavFormat::Float32 => writer.write_sample(v as f32)?,
                WavFormat::Pcm16 | WavFormat::Pcm24 => {
                    let full = (1i64 << (bits - 1)) as f64;
                    let q = (v * full).round().clamp(-full, full - 1.0) as i32;
                    writer.write_sample(q)?
                }
            }
        }
    }
    writer.finalize()?;
    Ok(())
}
