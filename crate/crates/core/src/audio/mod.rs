//! Sample-domain primitives: buffers, convolution, level measurement, WAV I/O.

mod buffer;
mod convolve;
mod level;
mod wav;

pub use buffer::{AudioBuffer, LevelDb, SAMPLE_RATE};
pub use convolve::{convolve, convolve_fft, convolve_slices};
pub use level::{
    active_speech_level, rms_level_db, rms_level_db_slice, ENVELOPE_TIME_CONSTANT, HANGOVER,
    MARGIN_DB,
};
pub use wav::{quantize_pcm16, read_wav, write_wav, BitDepth};
