//! Target-speaker extraction in the STFT domain: one joint informed
//! extraction over all frequency bins driven by a single per-frame pilot.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stft::{istft, stft, StftConfig};
use crate::error::{Error, Result};
use crate::extractor::{run_extraction, ExtractionConfig, IterationTrace, Mode};
use crate::linalg::{CMat, CVec, C64};
use crate::signal::{MixtureTensor, SideInfo};

/// Bins whose energy is below this fraction of the mean bin energy are passed
/// through instead of extracted.
pub const LOW_ENERGY_RATIO: f64 = 1e-10;

/// Per-frame nonnegative guide shared by every frequency bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSignal {
    r: Vec<f64>,
}

impl PilotSignal {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if let Some(v) = r.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "pilot values must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self { r })
    }

    pub fn values(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Shared-mode side information for the extractor.
    pub fn side_info(&self) -> Result<SideInfo> {
        SideInfo::shared(self.r.iter().map(|&v| C64::new(v, 0.0)).collect())
    }
}

/// Pilot equal to the mixture frame energy where the target dominates, zero elsewhere.
pub fn pilot_from_dominance(dominance: &[bool], mixture_energy: &[f64]) -> Result<PilotSignal> {
    if dominance.len() != mixture_energy.len() {
        return Err(Error::invalid(format!(
            "dominance has {} frames, energy has {}",
            dominance.len(),
            mixture_energy.len()
        )));
    }
    PilotSignal::new(
        dominance
            .iter()
            .zip(mixture_energy)
            .map(|(&d, &e)| if d { e } else { 0.0 })
            .collect(),
    )
}

/// Energy per frame of one channel, summed over bins.
pub fn frame_energies(spec: &[CMat], channel: usize) -> Vec<f64> {
    let mut out = vec![0.0; spec.first().map_or(0, |m| m.ncols())];
    for m in spec {
        for (n, e) in out.iter_mut().enumerate() {
            *e += m[(channel, n)].norm_sqr();
        }
    }
    out
}

/// Oracle dominance: the target's frame energy exceeds every competitor's,
/// all measured on the given single-channel images.
pub fn oracle_dominance(
    target: &[f64],
    competitors: &[Vec<f64>],
    cfg: &StftConfig,
) -> Result<Vec<bool>> {
    let et = frame_energies(&stft(&[target.to_vec()], cfg)?, 0);
    let others = competitors
        .iter()
        .map(|c| Ok(frame_energies(&stft(std::slice::from_ref(c), cfg)?, 0)))
        .collect::<Result<Vec<_>>>()?;
    if others.iter().any(|o| o.len() != et.len()) {
        return Err(Error::invalid("reference signals differ in length"));
    }
    Ok((0..et.len())
        .map(|n| others.iter().all(|o| et[n] > o[n]))
        .collect())
}

/// Pilot from reference-channel images: mixture frame energy on the frames
/// where `target` dominates every competitor.
pub fn oracle_pilot(
    mixture: &[f64],
    target: &[f64],
    competitors: &[Vec<f64>],
    cfg: &StftConfig,
) -> Result<PilotSignal> {
    let dominance = oracle_dominance(target, competitors, cfg)?;
    let energy = frame_energies(&stft(&[mixture.to_vec()], cfg)?, 0);
    pilot_from_dominance(&dominance, &energy)
}

/// How the per-bin mixing vectors are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Principal eigenvector of the covariance over pilot-active frames.
    #[default]
    Pilot,
    /// Random vectors from the extraction seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub stft: StftConfig,
    /// Leading channels used; `None` takes all.
    pub mics: Option<usize>,
    pub init: InitStrategy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            mics: Some(4),
            init: InitStrategy::Pilot,
        }
    }
}

/// Per-bin linear filters found by the extraction. Bins without a filter are
/// passed through.
#[derive(Debug, Clone)]
pub struct FrequencyFilters {
    pub stft: StftConfig,
    pub channels: usize,
    /// `(w, a)` per bin.
    pub bins: Vec<Option<(CVec, CVec)>>,
}

impl FrequencyFilters {
    /// Source image `a (w^H x)` per channel; pass-through bins keep `x`.
    pub fn apply_spectra(&self, spec: &[CMat]) -> Result<Vec<CMat>> {
        if spec.len() != self.bins.len() || spec.iter().any(|m| m.nrows() != self.channels) {
            return Err(Error::invalid("spectra do not match the filters"));
        }
        Ok(spec
            .par_iter()
            .zip(&self.bins)
            .map(|(x, f)| match f {
                Some((w, a)) => {
                    let s = w.adjoint() * x;
                    a * s
                }
                None => x.clone(),
            })
            .collect())
    }

    pub fn apply(&self, wave: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let wave = &wave[..self.channels.min(wave.len())];
        let len = wave.first().map_or(0, Vec::len);
        let spec = stft(wave, &self.stft)?;
        istft(&self.apply_spectra(&spec)?, len, &self.stft)
    }

    /// Reference-channel output.
    pub fn apply_mono(&self, wave: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.apply(wave)?.swap_remove(0))
    }
}

#[derive(Debug, Clone)]
pub struct SpeakerExtraction {
    /// Target image at every used channel.
    pub image: Vec<Vec<f64>>,
    /// Image at the reference channel 0.
    pub mono: Vec<f64>,
    pub filters: FrequencyFilters,
    /// Bins handed to the extractor, in order.
    pub extracted_bins: Vec<usize>,
    pub trace: IterationTrace,
}

fn principal_vector(x: &CMat, active: &[bool]) -> CVec {
    let d = x.nrows();
    let mut c = CMat::zeros(d, d);
    for (n, col) in x.column_iter().enumerate() {
        if active[n] {
            c += col * col.adjoint();
        }
    }
    let eig = c.symmetric_eigen();
    let (best, _) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
    let v = eig.eigenvectors.column(best).into_owned();
    if v.norm() > 0.0 {
        v
    } else {
        CVec::from_element(d, C64::new(1.0, 0.0))
    }
}

/// Result of the joint extraction on precomputed spectra.
#[derive(Debug, Clone)]
pub struct SpectralExtraction {
    /// `(w, a)` per bin; `None` for passed-through bins.
    pub bins: Vec<Option<(CVec, CVec)>>,
    /// Bins handed to the extractor, in order.
    pub extracted_bins: Vec<usize>,
    /// Extracted signals, one row per entry of `extracted_bins`.
    pub s: CMat,
    pub trace: IterationTrace,
}

/// Joint informed extraction over the bins of `spec` (one `channels x frames`
/// matrix per bin) with `pilot` shared by all bins.
pub fn extract_spectra(
    spec: &[CMat],
    pilot: &PilotSignal,
    init: InitStrategy,
    ext: &ExtractionConfig,
) -> Result<SpectralExtraction> {
    if ext.mode != Mode::Informed {
        return Err(Error::invalid("speaker extraction runs in informed mode"));
    }
    let frames = spec
        .first()
        .ok_or_else(|| Error::invalid("no frequency bins"))?
        .ncols();
    if pilot.len() != frames {
        return Err(Error::invalid(format!(
            "pilot has {} frames, the STFT has {frames}",
            pilot.len()
        )));
    }
    let side = pilot.side_info()?;

    let energies: Vec<f64> = spec
        .iter()
        .map(|m| m.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let extracted_bins: Vec<usize> = (0..spec.len())
        .filter(|&k| energies[k] > LOW_ENERGY_RATIO * mean)
        .collect();
    if extracted_bins.is_empty() {
        return Err(Error::invalid("no frequency bin carries energy"));
    }
    let x = MixtureTensor::new(extracted_bins.iter().map(|&k| spec[k].clone()).collect())?;
    let a_init = match init {
        InitStrategy::Pilot => {
            let active: Vec<bool> = pilot.values().iter().map(|&v| v > 0.0).collect();
            Some(
                x.mixtures()
                    .iter()
                    .map(|m| principal_vector(m, &active))
                    .collect::<Vec<_>>(),
            )
        }
        InitStrategy::Random => None,
    };
    let result = run_extraction(&x, Some(&side), ext, a_init.as_deref()).map_err(|e| {
        match e.mixture_index() {
            Some(k) => Error::AtFrequency {
                bin: extracted_bins[k],
                source: Box::new(e),
            },
            None => e,
        }
    })?;

    let mut bins = vec![None; spec.len()];
    for (i, &k) in extracted_bins.iter().enumerate() {
        bins[k] = Some((result.w[i].as_vec().clone(), result.a[i].as_vec().clone()));
    }
    Ok(SpectralExtraction {
        bins,
        extracted_bins,
        s: result.s,
        trace: result.trace,
    })
}

/// Joint informed extraction of the speaker indicated by `pilot`.
pub fn extract_speaker(
    wave: &[Vec<f64>],
    pilot: &PilotSignal,
    cfg: &PipelineConfig,
    ext: &ExtractionConfig,
) -> Result<SpeakerExtraction> {
    let channels = cfg.mics.unwrap_or(wave.len());
    if channels == 0 || channels > wave.len() {
        return Err(Error::invalid(format!(
            "requested {channels} microphones, input has {}",
            wave.len()
        )));
    }
    let wave = &wave[..channels];
    let len = wave[0].len();
    let spec = stft(wave, &cfg.stft)?;
    let out = extract_spectra(&spec, pilot, cfg.init, ext)?;
    let filters = FrequencyFilters {
        stft: cfg.stft,
        channels,
        bins: out.bins,
    };
    let image = istft(&filters.apply_spectra(&spec)?, len, &cfg.stft)?;
    Ok(SpeakerExtraction {
        mono: image[0].clone(),
        image,
        filters,
        extracted_bins: out.extracted_bins,
        trace: out.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pilot_follows_dominance() {
        let e = [1.0, 2.0, 3.0];
        assert_eq!(
            pilot_from_dominance(&[true; 3], &e).unwrap().values(),
            &e[..]
        );
        let p = pilot_from_dominance(&[false, true, false], &e).unwrap();
        assert_eq!(p.values(), &[0.0, 2.0, 0.0]);
        assert!(pilot_from_dominance(&[true], &e).is_err());
        assert!(PilotSignal::new(vec![-1.0]).is_err());
    }

    #[test]
    fn all_zero_pilot_is_rejected_by_the_extractor() {
        let p = pilot_from_dominance(&[false; 4], &[1.0; 4]).unwrap();
        assert!(p.side_info().is_err());
    }
}
