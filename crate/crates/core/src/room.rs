//! Shoebox-room impulse responses by the image-source method and synthetic
//! two-speaker reverberant scenes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::dsp::convolve;
use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};

pub const SPEED_OF_SOUND: f64 = 343.0;
/// Half-width of the windowed-sinc fractional delay, in samples.
const SINC_HALF_WIDTH: isize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    /// Length, width, height in meters.
    pub dims: [f64; 3],
    /// Reverberation time in seconds.
    pub t60: f64,
}

impl Room {
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("room dimensions must be positive"));
        }
        if !(self.t60 > 0.0 && self.t60.is_finite()) {
            return Err(Error::invalid("T60 must be positive"));
        }
        Ok(())
    }

    /// Wall reflection coefficient giving the requested T60 (Eyring/Sabine
    /// relation with equal absorption on all walls).
    pub fn reflection(&self) -> f64 {
        let [lx, ly, lz] = self.dims;
        let inv = 1.0 / lx + 1.0 / ly + 1.0 / lz;
        (-13.82 / (inv * SPEED_OF_SOUND * self.t60)).exp()
    }

    fn contains(&self, p: &[f64; 3]) -> bool {
        p.iter().zip(&self.dims).all(|(v, l)| *v > 0.0 && v < l)
    }
}

/// Impulse response of `len` samples from `src` to `mic`.
pub fn image_method_rir(
    room: &Room,
    src: [f64; 3],
    mic: [f64; 3],
    fs: f64,
    len: usize,
) -> Result<Vec<f64>> {
    room.validate()?;
    if !room.contains(&src) || !room.contains(&mic) {
        return Err(Error::invalid(
            "source and microphone must lie inside the room",
        ));
    }
    let beta = room.reflection();
    let max_dist = len as f64 / fs * SPEED_OF_SOUND;
    let bound: Vec<i64> = room
        .dims
        .iter()
        .map(|l| (max_dist / (2.0 * l)).ceil() as i64 + 1)
        .collect();
    let mut h = vec![0.0; len];
    for nx in -bound[0]..=bound[0] {
        for ny in -bound[1]..=bound[1] {
            for nz in -bound[2]..=bound[2] {
                let n = [nx, ny, nz];
                for p in 0..8u32 {
                    let mut dist2 = 0.0;
                    let mut order = 0;
                    for ax in 0..3 {
                        let q = ((p >> ax) & 1) as i64;
                        let img = (1 - 2 * q) as f64 * src[ax] + 2.0 * n[ax] as f64 * room.dims[ax];
                        dist2 += (img - mic[ax]).powi(2);
                        order += (n[ax] - q).abs() + n[ax].abs();
                    }
                    let dist = dist2.sqrt();
                    if dist > max_dist {
                        continue;
                    }
                    let gain =
                        beta.powi(order as i32) / (4.0 * std::f64::consts::PI * dist.max(1e-3));
                    add_fractional_impulse(&mut h, dist / SPEED_OF_SOUND * fs, gain);
                }
            }
        }
    }
    Ok(h)
}

fn add_fractional_impulse(h: &mut [f64], delay: f64, gain: f64) {
    let center = delay.round() as isize;
    for t in center - SINC_HALF_WIDTH..=center + SINC_HALF_WIDTH {
        if t < 0 || t as usize >= h.len() {
            continue;
        }
        let x = t as f64 - delay;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
        };
        let win = 0.5 + 0.5 * (std::f64::consts::PI * x / (SINC_HALF_WIDTH as f64 + 1.0)).cos();
        h[t as usize] += gain * sinc * win;
    }
}

/// Speech-like source: resonant autoregressive noise gated by syllable-like
/// bursts with pauses.
pub fn speech_like(rng: &mut SimRng, len: usize, fs: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let mut t = (rng.random_range(0.0..0.3) * fs) as usize;
    while t < len {
        let on = (rng.random_range(0.1..0.4) * fs) as usize;
        let off = (rng.random_range(0.05..0.35) * fs) as usize;
        // two resonances per burst
        let poles: Vec<(f64, f64)> = (0..2)
            .map(|i| {
                let f = if i == 0 {
                    rng.random_range(200.0..900.0)
                } else {
                    rng.random_range(900.0..3000.0)
                };
                let r: f64 = rng.random_range(0.93..0.98);
                (
                    2.0 * r * (2.0 * std::f64::consts::PI * f / fs).cos(),
                    -r * r,
                )
            })
            .collect();
        let level: f64 = rng.random_range(0.5..1.5);
        let mut state = [[0.0f64; 2]; 2];
        let end = (t + on).min(len);
        for n in t..end {
            let u: f64 = StandardNormal.sample(rng);
            let mut v = u;
            for (s, (a1, a2)) in state.iter_mut().zip(&poles) {
                let y = v + a1 * s[0] + a2 * s[1];
                s[1] = s[0];
                s[0] = y;
                v = y;
            }
            let phase = (n - t) as f64 / on as f64;
            let env = (std::f64::consts::PI * phase).sin().powf(0.5);
            out[n] = level * env * v;
        }
        t = end + off;
    }
    let p = out.iter().map(|v| v * v).sum::<f64>() / len as f64;
    if p > 0.0 {
        out.iter_mut().for_each(|v| *v /= p.sqrt());
    }
    out
}

/// Signal emitted by the second source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Competitor {
    #[default]
    Speech,
    /// Stationary white noise from a point source.
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub fs: u32,
    pub duration_s: f64,
    pub mics: usize,
    pub mic_spacing: f64,
    pub room: Room,
    /// Target-to-competitor power ratio at the reference microphone, dB.
    pub sir_db: f64,
    pub competitor: Competitor,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            fs: 16_000,
            duration_s: 3.0,
            mics: 4,
            mic_spacing: 0.05,
            room: Room {
                dims: [6.0, 5.0, 3.0],
                t60: 0.2,
            },
            sir_db: 0.0,
            competitor: Competitor::Speech,
        }
    }
}

/// Reverberant two-speaker mixture with its per-source images.
#[derive(Debug, Clone)]
pub struct Scene {
    pub fs: u32,
    /// `mics x samples`.
    pub mixture: Vec<Vec<f64>>,
    /// `source x mics x samples`; source 0 is the target.
    pub images: Vec<Vec<Vec<f64>>>,
    pub dry: Vec<Vec<f64>>,
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// Two speakers at random directions 1 to 2 m from a linear array near the
/// room center.
pub fn two_speaker_scene(cfg: &SceneConfig, seed: u64) -> Result<Scene> {
    cfg.room.validate()?;
    if cfg.mics == 0 || !(cfg.duration_s > 0.0) {
        return Err(Error::invalid(
            "scene needs microphones and a positive duration",
        ));
    }
    let mut rng = seeded(seed);
    let fs = cfg.fs as f64;
    let len = (cfg.duration_s * fs) as usize;
    let [lx, ly, _] = cfg.room.dims;
    let center = [lx / 2.0, ly / 2.0, 1.5];
    let mics: Vec<[f64; 3]> = (0..cfg.mics)
        .map(|i| {
            let off = (i as f64 - (cfg.mics - 1) as f64 / 2.0) * cfg.mic_spacing;
            [center[0] + off, center[1], center[2]]
        })
        .collect();
    // directions at least 30 degrees apart
    let az0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let sep: f64 = rng.random_range(30f64.to_radians()..150f64.to_radians());
    let azimuths = [az0, az0 + sep];
    let rir_len = (cfg.room.t60 * fs).ceil() as usize;
    let mut images = Vec::with_capacity(2);
    let mut dry = Vec::with_capacity(2);
    for (i, az) in azimuths.into_iter().enumerate() {
        let dist: f64 = rng.random_range(1.0..2.0);
        let src = [
            center[0] + dist * az.cos(),
            center[1] + dist * az.sin(),
            center[2] + rng.random_range(-0.2..0.2),
        ];
        let s = if i == 1 && cfg.competitor == Competitor::Noise {
            (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
        } else {
            speech_like(&mut rng, len, fs)
        };
        let img = mics
            .iter()
            .map(|m| {
                let h = image_method_rir(&cfg.room, src, *m, fs, rir_len)?;
                let mut y = convolve(&s, &h);
                y.truncate(len);
                Ok(y)
            })
            .collect::<Result<Vec<_>>>()?;
        images.push(img);
        dry.push(s);
    }
    let gain = (power(&images[1][0]) / power(&images[0][0]) * 10f64.powf(cfg.sir_db / 10.0)).sqrt();
    images[0].iter_mut().flatten().for_each(|v| *v *= gain);
    dry[0].iter_mut().for_each(|v| *v *= gain);
    // overall level around -20 dBFS
    let norm = 0.1 / (power(&images[0][0]) + power(&images[1][0])).sqrt();
    for v in images
        .iter_mut()
        .flatten()
        .flatten()
        .chain(dry.iter_mut().flatten())
    {
        *v *= norm;
    }
    let mixture = (0..cfg.mics)
        .map(|m| {
            images[0][m]
                .iter()
                .zip(&images[1][m])
                .map(|(a, b)| a + b)
                .collect()
        })
        .collect();
    Ok(Scene {
        fs: cfg.fs,
        mixture,
        images,
        dry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_path_arrives_at_the_geometric_delay() {
        let room = Room {
            dims: [5.0, 4.0, 3.0],
            t60: 0.3,
        };
        let h = image_method_rir(&room, [1.0, 1.0, 1.5], [3.0, 1.0, 1.5], 16_000.0, 4000).unwrap();
        let direct = 1.0 / (4.0 * std::f64::consts::PI * 2.0);
        let first = h.iter().position(|v| v.abs() > 0.5 * direct).unwrap();
        let expect = 2.0 / SPEED_OF_SOUND * 16_000.0;
        assert!((first as f64 - expect).abs() <= 1.0, "{first} vs {expect}");
    }

    #[test]
    fn energy_decays_at_the_requested_rate() {
        let room = Room {
            dims: [6.0, 5.0, 3.0],
            t60: 0.4,
        };
        let fs = 8000.0;
        let h = image_method_rir(&room, [2.0, 2.0, 1.2], [4.0, 3.0, 1.6], fs, 4000).unwrap();
        // Schroeder integral, slope between -5 and -25 dB
        let mut edc: Vec<f64> = h
            .iter()
            .rev()
            .scan(0.0, |s, v| {
                *s += v * v;
                Some(*s)
            })
            .collect();
        edc.reverse();
        let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / edc[0]).log10()).collect();
        let t5 = db.iter().position(|&v| v < -5.0).unwrap() as f64;
        let t25 = db.iter().position(|&v| v < -25.0).unwrap() as f64;
        let t60 = 3.0 * (t25 - t5) / fs;
        // the late field of a shoebox is not diffuse, so the measured decay
        // runs somewhat longer than the Eyring value used for the walls
        assert!(t60 > 0.3 && t60 < 0.8, "{t60}");
    }

    #[test]
    fn rejects_points_outside() {
        let room = Room {
            dims: [3.0, 3.0, 3.0],
            t60: 0.2,
        };
        assert!(image_method_rir(&room, [4.0, 1.0, 1.0], [1.0, 1.0, 1.0], 16_000.0, 100).is_err());
    }

    #[test]
    fn scene_images_sum_to_the_mixture() {
        let cfg = SceneConfig {
            duration_s: 0.5,
            ..SceneConfig::default()
        };
        let scene = two_speaker_scene(&cfg, 1).unwrap();
        assert_eq!(scene.mixture.len(), 4);
        for m in 0..4 {
            for n in (0..8000).step_by(97) {
                let sum = scene.images[0][m][n] + scene.images[1][m][n];
                assert!((sum - scene.mixture[m][n]).abs() < 1e-15);
            }
        }
        let ratio = power(&scene.images[0][0]) / power(&scene.images[1][0]);
        assert!((10.0 * ratio.log10()).abs() < 1e-9);
    }

    #[test]
    fn speech_like_sources_pause() {
        let s = speech_like(&mut seeded(3), 32_000, 16_000.0);
        let silent = s.iter().filter(|v| **v == 0.0).count();
        assert!(silent > 1000 && silent < 24_000, "{silent}");
    }
}
