//! Frame-level silence detection, used to exclude pauses from rate statistics.

use super::PcmSignal;

/// Default RMS threshold relative to full scale.
pub const DEFAULT_SILENCE_DB: f64 = -40.0;
/// Default analysis frame length.
pub const DEFAULT_SILENCE_FRAME_MS: u32 = 20;

/// Marks each `frame_ms` frame silent when its RMS energy in dBFS falls
/// below `threshold_db`. A trailing partial frame is judged over its
/// actual samples. All-zero frames are always silent.
pub fn detect_silence(signal: &PcmSignal, frame_ms: u32, threshold_db: f64) -> Vec<bool> {
    assert!(frame_ms > 0, "frame_ms must be positive");
    let frame_len = (signal.sample_rate as usize * frame_ms as usize) / 1000;
    let mut mask = Vec::with_capacity(signal.len().div_ceil(frame_len.max(1)));
    for chunk in signal.samples.chunks(frame_len.max(1)) {
        let energy: f64 = chunk.iter().map(|&s| (s as f64) * (s as f64)).sum();
        let rms = (energy / chunk.len() as f64).sqrt();
        let db = if rms > 0.0 {
            20.0 * (rms / 32768.0).log10()
        } else {
            f64::NEG_INFINITY
        };
        mask.push(db < threshold_db);
    }
    mask
}

/// Expands a per-frame mask to per-sample flags.
pub fn sample_silence_mask(signal: &PcmSignal, frame_ms: u32, threshold_db: f64) -> Vec<bool> {
    let frame_len = (signal.sample_rate as usize * frame_ms as usize) / 1000;
    let frames = detect_silence(signal, frame_ms, threshold_db);
    let mut out = Vec::with_capacity(signal.len());
    for (i, silent) in frames.iter().enumerate() {
        let n = (signal.len() - i * frame_len).min(frame_len);
        out.extend(std::iter::repeat(*silent).take(n));
    }
    out
}
