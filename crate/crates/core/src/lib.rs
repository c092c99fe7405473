//! gvox: a speech coding toolkit built around autoregressive conditional
//! symbol models.
//!
//! The crate provides two coding paths over a shared model interface:
//!
//! * a **parametric coder** that transmits 50-bit frames of spectral
//!   envelope, pitch, power and voicing parameters at 2500 b/s, and whose
//!   decoder reconstructs speech by recursively sampling a conditional
//!   distribution model driven by those parameters;
//! * a **waveform coder** that quantizes samples to the 256-symbol G.711
//!   mu-law alphabet and entropy-codes each symbol under the model's
//!   per-sample conditional PMF, in a closed loop so encoder and decoder
//!   model states stay identical.
//!
//! Supporting modules implement bit-exact mu-law companding and WAV I/O,
//! 2x polyphase resampling between 8 kHz and 16 kHz, a range coder, and
//! the entropy-rate estimators used to characterize both coders.
//!
//! Model implementations live behind the [`model::ConditionalModel`]
//! trait and are selected by name through [`model::registry`].

pub mod bits;
pub mod coder;
pub mod model;
pub mod parametric;
pub mod rate;
pub mod signal;
pub mod synth;
pub mod waveform;

pub use signal::PcmSignal;
