//! Frequency-domain speaker extraction: STFT, pilot construction, joint
//! informed extraction over bins, reconstruction and scoring.

pub mod bss_eval;
pub mod dsp;
pub mod pipeline;
pub mod stft;
pub mod wav;

pub use bss_eval::{evaluate_bss, EvalScores};
pub use pipeline::{
    extract_speaker, extract_spectra, frame_energies, oracle_dominance, oracle_pilot,
    pilot_from_dominance, FrequencyFilters, InitStrategy, PilotSignal, PipelineConfig,
    SpeakerExtraction, SpectralExtraction,
};
pub use stft::{istft, stft, StftConfig};
pub use wav::{read_wav, write_wav, Audio, WavFormat};
