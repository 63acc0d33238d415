//! Short-time Fourier transform with a square-root Hann analysis window and
//! the matching overlap-add synthesis window.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub sample_rate: u32,
    pub window_length: usize,
    pub shift: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_length: 1000,
            shift: 200,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if self.window_length < 2 || self.shift == 0 || self.shift > self.window_length {
            return Err(Error::invalid(format!(
                "need 0 < shift <= window length, got shift {} and window {}",
                self.shift, self.window_length
            )));
        }
        Ok(())
    }

    /// Non-redundant frequency bins.
    pub fn n_bins(&self) -> usize {
        self.window_length / 2 + 1
    }

    /// Frames produced for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        let (l, r) = (self.window_length, self.shift);
        let padded = len + 2 * (l - r);
        (padded - l).div_ceil(r) + 1
    }

    fn lead(&self) -> usize {
        self.window_length - self.shift
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.window_length as f64
    }
}

/// Analysis and synthesis windows for one configuration.
#[derive(Clone)]
pub struct Windows {
    pub analysis: Vec<f64>,
    pub synthesis: Vec<f64>,
}

impl Windows {
    pub fn new(cfg: &StftConfig) -> Result<Self> {
        cfg.validate()?;
        let (l, r) = (cfg.window_length, cfg.shift);
        let analysis: Vec<f64> = (0..l)
            .map(|n| {
                let h = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / l as f64).cos();
                h.sqrt()
            })
            .collect();
        // overlap-add of analysis * synthesis must be one at every sample
        let mut denom = vec![0.0; r];
        for (n, w) in analysis.iter().enumerate() {
            denom[n % r] += w * w;
        }
        if denom.iter().any(|&v| v < 1e-12) {
            return Err(Error::invalid(format!(
                "window {l} with shift {r} does not allow reconstruction"
            )));
        }
        let synthesis = analysis
            .iter()
            .enumerate()
            .map(|(n, w)| w / denom[n % r])
            .collect();
        Ok(Self {
            analysis,
            synthesis,
        })
    }
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

fn check_channels(wave: &[Vec<f64>]) -> Result<usize> {
    let len = wave
        .first()
        .ok_or_else(|| Error::invalid("no channels"))?
        .len();
    if wave.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("channels differ in length"));
    }
    Ok(len)
}

/// Spectra of a multichannel signal: one `channels x frames` matrix per bin.
pub fn stft(wave: &[Vec<f64>], cfg: &StftConfig) -> Result<Vec<CMat>> {
    let win = Windows::new(cfg)?;
    let len = check_channels(wave)?;
    if len < cfg.window_length {
        return Err(Error::invalid(format!(
            "signal of {len} samples is shorter than the window ({})",
            cfg.window_length
        )));
    }
    if wave.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    let (l, r) = (cfg.window_length, cfg.shift);
    let frames = cfg.n_frames(len);
    let bins = cfg.n_bins();
    let d = wave.len();
    let fft = plan(l, false);
    let lead = cfg.lead() as isize;

    // per channel: frames x bins
    let per_channel: Vec<Vec<C64>> = wave
        .par_iter()
        .map(|ch| {
            let mut out = vec![C64::default(); frames * bins];
            let mut buf = vec![C64::default(); l];
            for m in 0..frames {
                let start = (m * r) as isize - lead;
                for (n, b) in buf.iter_mut().enumerate() {
                    let idx = start + n as isize;
                    let v = if idx >= 0 && (idx as usize) < len {
                        ch[idx as usize]
                    } else {
                        0.0
                    };
                    *b = C64::new(v * win.analysis[n], 0.0);
                }
                fft.process(&mut buf);
                out[m * bins..(m + 1) * bins].copy_from_slice(&buf[..bins]);
            }
            out
        })
        .collect();

    Ok((0..bins)
        .map(|k| CMat::from_fn(d, frames, |c, m| per_channel[c][m * bins + k]))
        .collect())
}

/// Overlap-add synthesis back to `len` samples per channel.
pub fn istft(spectra: &[CMat], len: usize, cfg: &StftConfig) -> Result<Vec<Vec<f64>>> {
    let win = Windows::new(cfg)?;
    let (l, r) = (cfg.window_length, cfg.shift);
    let bins = cfg.n_bins();
    if spectra.len() != bins {
        return Err(Error::invalid(format!(
            "expected {bins} bins, got {}",
            spectra.len()
        )));
    }
    let (d, frames) = spectra[0].shape();
    if spectra.iter().any(|s| s.shape() != (d, frames)) {
        return Err(Error::invalid("bins differ in shape"));
    }
    if frames != cfg.n_frames(len) {
        return Err(Error::invalid(format!(
            "{frames} frames do not match a signal of {len} samples"
        )));
    }
    let ifft = plan(l, true);
    let lead = cfg.lead();
    let scale = 1.0 / l as f64;
    let out = (0..d)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; len + 2 * lead + l];
            let mut buf = vec![C64::default(); l];
            for m in 0..frames {
                for k in 0..bins {
                    buf[k] = spectra[k][(c, m)];
                }
                for k in bins..l {
                    buf[k] = buf[l - k].conj();
                }
                // imaginary parts of DC and Nyquist cannot survive a real signal
                buf[0].im = 0.0;
                if l % 2 == 0 {
                    buf[l / 2].im = 0.0;
                }
                ifft.process(&mut buf);
                let start = m * r;
                for n in 0..l {
                    acc[start + n] += buf[n].re * scale * win.synthesis[n];
                }
            }
            acc[lead..lead + len].to_vec()
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn frame_count_covers_the_signal() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.n_bins(), 501);
        assert_eq!(cfg.n_frames(1000), 9);
        assert_eq!(cfg.n_frames(1001), 10);
    }

    #[test]
    fn round_trip_with_uneven_shift() {
        let cfg = StftConfig {
            sample_rate: 8000,
            window_length: 64,
            shift: 24,
        };
        let mut rng = seeded(1);
        let x: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let spec = stft(std::slice::from_ref(&x), &cfg).unwrap();
        let y = istft(&spec, x.len(), &cfg).unwrap();
        let err: f64 = x.iter().zip(&y[0]).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err.sqrt() < 1e-10);
    }

    #[test]
    fn rejects_short_input_and_bad_shift() {
        let cfg = StftConfig::default();
        assert!(stft(&[vec![0.0; 999]], &cfg).is_err());
        let bad = StftConfig { shift: 0, ..cfg };
        assert!(bad.validate().is_err());
    }
}
