//! Synthetic per-frame audio features, shaped (T, 28, 12) like cepstral
//! blocks. Each frame is
//!
//! ```text
//! features(t) = content_basis(m, t) + sign(m) * emotion_pattern(p) + noise
//! ```
//!
//! The content basis lives in a band determined by the parity of m (rows
//! 0..14 for even m, 14..28 for odd) and is modulated in time by the same
//! mouth-openness trajectory the sprite renderer uses. The emotion pattern is
//! multiplied by a parity-dependent sign, so a linear probe on raw features
//! cannot recover the emotion reliably, while an encoder that first detects
//! the band (and hence the sign) can.

use ndarray::Array3;

use crate::audio::types::AudioFeatureClip;
use crate::error::Result;
use crate::nn::SeedStream;
use crate::synth::sprite::mouth_openness;
use crate::synth::EMOTION_COUNT;

pub const FEAT_ROWS: usize = 28;
pub const FEAT_COLS: usize = 12;

/// Default standard deviation of the additive noise.
pub const DEFAULT_NOISE_SCALE: f64 = 0.25;

/// Amplitude of the emotion offset pattern.
const EMOTION_AMP: f32 = 0.35;

/// Distinct (row frequency, column frequency) pairs per emotion.
const EMOTION_FREQS: [(f32, f32); EMOTION_COUNT] = [
    (1.0, 1.0),
    (1.0, 2.0),
    (2.0, 1.0),
    (2.0, 3.0),
    (3.0, 2.0),
    (3.0, 4.0),
    (4.0, 3.0),
    (4.0, 5.0),
];

/// Emotion offset pattern, spread over all rows so it overlaps both content
/// bands.
pub fn emotion_pattern(emotion_id: u8) -> [[f32; FEAT_COLS]; FEAT_ROWS] {
    let (fr, fc) = EMOTION_FREQS[emotion_id as usize % EMOTION_COUNT];
    let mut out = [[0.0f32; FEAT_COLS]; FEAT_ROWS];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let a = std::f32::consts::TAU * fr * r as f32 / FEAT_ROWS as f32;
            let b = std::f32::consts::TAU * fc * c as f32 / FEAT_COLS as f32;
            *v = EMOTION_AMP * a.cos() * b.cos();
        }
    }
    out
}

/// Parity-dependent sign applied to the emotion pattern.
pub fn content_sign(content_id: u16) -> f32 {
    if content_id % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Content basis for frame t: band-limited pattern scaled by the
/// mouth-openness trajectory.
pub fn content_basis(content_id: u16, t: usize, t_total: usize) -> [[f32; FEAT_COLS]; FEAT_ROWS] {
    let mut out = [[0.0f32; FEAT_COLS]; FEAT_ROWS];
    let open = mouth_openness(content_id, t, t_total);
    let band = if content_id % 2 == 0 {
        0..FEAT_ROWS / 2
    } else {
        FEAT_ROWS / 2..FEAT_ROWS
    };
    let shape = 1.0 + (content_id / 2) as f32; // within-band frequency
    for r in band {
        let rr = (r % (FEAT_ROWS / 2)) as f32;
        for (c, v) in out[r].iter_mut().enumerate() {
            let a = std::f32::consts::TAU * shape * rr / (FEAT_ROWS / 2) as f32;
            let b = std::f32::consts::PI * (c as f32 + 0.5) / FEAT_COLS as f32;
            *v = (0.4 + 0.6 * open) * a.sin() * b.sin();
        }
    }
    out
}

/// Build a synthetic clip. Deterministic in (m, p, T, seed, noise_scale);
/// with zero noise the clip is exactly basis + signed pattern.
pub fn synth_audio(
    content_id: u16,
    emotion_id: u8,
    t_total: usize,
    seed: u64,
    noise_scale: f64,
) -> Result<AudioFeatureClip> {
    let mut rng = SeedStream::new(seed).child("synth-audio");
    let pattern = emotion_pattern(emotion_id);
    let sign = content_sign(content_id);
    let mut data = Array3::<f32>::zeros((t_total, FEAT_ROWS, FEAT_COLS));
    for t in 0..t_total {
        let basis = content_basis(content_id, t, t_total);
        for r in 0..FEAT_ROWS {
            for c in 0..FEAT_COLS {
                let noise = if noise_scale > 0.0 {
                    (noise_scale * rng.normal()) as f32
                } else {
                    0.0
                };
                data[[t, r, c]] = basis[r][c] + sign * pattern[r][c] + noise;
            }
        }
    }
    AudioFeatureClip::new(data, Some(content_id), Some(emotion_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_is_t_by_28_by_12() {
        let clip = synth_audio(0, 0, 25, 1, DEFAULT_NOISE_SCALE).unwrap();
        assert_eq!(clip.features().dim(), (25, 28, 12));
    }

    #[test]
    fn zero_noise_is_exactly_basis_plus_offset() {
        let clip = synth_audio(3, 5, 4, 99, 0.0).unwrap();
        let pattern = emotion_pattern(5);
        let sign = content_sign(3);
        for t in 0..4 {
            let basis = content_basis(3, t, 4);
            for r in 0..FEAT_ROWS {
                for c in 0..FEAT_COLS {
                    let expect = basis[r][c] + sign * pattern[r][c];
                    assert_eq!(clip.features()[[t, r, c]], expect);
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = synth_audio(2, 6, 25, 7, DEFAULT_NOISE_SCALE).unwrap();
        let b = synth_audio(2, 6, 25, 7, DEFAULT_NOISE_SCALE).unwrap();
        assert_eq!(a.features(), b.features());
        let c = synth_audio(2, 6, 25, 8, DEFAULT_NOISE_SCALE).unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn parity_flips_the_emotion_offset() {
        // difference between emotions has opposite sign across content parity
        let e0 = synth_audio(0, 0, 1, 1, 0.0).unwrap();
        let e4 = synth_audio(0, 4, 1, 1, 0.0).unwrap();
        let o0 = synth_audio(1, 0, 1, 1, 0.0).unwrap();
        let o4 = synth_audio(1, 4, 1, 1, 0.0).unwrap();
        let even_diff = &e4.features().clone() - &e0.features().clone();
        let odd_diff = &o4.features().clone() - &o0.features().clone();
        let dot: f32 = even_diff.iter().zip(odd_diff.iter()).map(|(a, b)| a * b).sum();
        assert!(dot < 0.0, "emotion offsets must flip sign with parity");
    }

    #[test]
    fn emotion_patterns_are_distinct() {
        for a in 0..8u8 {
            for b in (a + 1)..8 {
                let pa = emotion_pattern(a);
                let pb = emotion_pattern(b);
                let diff: f32 = pa
                    .iter()
                    .flatten()
                    .zip(pb.iter().flatten())
                    .map(|(x, y)| (x - y).abs())
                    .sum();
                assert!(diff > 1.0, "patterns {a} and {b} nearly equal");
            }
        }
    }
}
