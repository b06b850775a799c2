//! Audio-side domain types and the per-clip binary feature format.

use std::io::{Read, Write};

use ndarray::Array3;

use crate::error::{Error, Result};

pub const FEAT_ROWS: usize = 28;
pub const FEAT_COLS: usize = 12;

/// T frames of 28x12 cepstral-style features with optional labels. Labels
/// exist for the synthetic corpus; ingested real data may leave them unset.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatureClip {
    features: Array3<f32>, // (T, 28, 12)
    content_id: Option<u16>,
    emotion_id: Option<u8>,
}

impl AudioFeatureClip {
    pub fn new(
        features: Array3<f32>,
        content_id: Option<u16>,
        emotion_id: Option<u8>,
    ) -> Result<Self> {
        let (t, r, c) = features.dim();
        if t < 1 {
            return Err(Error::data("audio clip needs at least one frame"));
        }
        if r != FEAT_ROWS || c != FEAT_COLS {
            return Err(Error::data(format!(
                "audio features must be (T, {FEAT_ROWS}, {FEAT_COLS}), got (T, {r}, {c})"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("audio features must be finite"));
        }
        Ok(Self {
            features,
            content_id,
            emotion_id,
        })
    }

    pub fn features(&self) -> &Array3<f32> {
        &self.features
    }

    pub fn frames(&self) -> usize {
        self.features.dim().0
    }

    pub fn content_id(&self) -> Option<u16> {
        self.content_id
    }

    pub fn emotion_id(&self) -> Option<u8> {
        self.emotion_id
    }

    /// Mean over T of the flattened 28x12 block: the pooled 336-dim view the
    /// encoders (and raw-feature probes) consume.
    pub fn pooled(&self) -> Vec<f32> {
        let t = self.frames() as f32;
        let mut out = vec![0.0f32; FEAT_ROWS * FEAT_COLS];
        for frame in self.features.outer_iter() {
            for (o, v) in out.iter_mut().zip(frame.iter()) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= t);
        out
    }
}

/// Fixed-size emotion embedding extracted from a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionComponent(pub Vec<f32>);

/// Fixed-size content embedding extracted from a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentComponent(pub Vec<f32>);

impl EmotionComponent {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl ContentComponent {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Write one clip record: u32 T, T*28*12 f32, i32 content_id, i32 emotion_id
/// (-1 when unset). Little-endian throughout.
pub fn write_audio_clip(w: &mut impl Write, clip: &AudioFeatureClip) -> Result<()> {
    w.write_all(&(clip.frames() as u32).to_le_bytes())?;
    for v in clip.features.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    let content = clip.content_id.map(|v| v as i32).unwrap_or(-1);
    let emotion = clip.emotion_id.map(|v| v as i32).unwrap_or(-1);
    w.write_all(&content.to_le_bytes())?;
    w.write_all(&emotion.to_le_bytes())?;
    Ok(())
}

pub fn read_audio_clip(r: &mut impl Read) -> Result<AudioFeatureClip> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let t = u32::from_le_bytes(b4) as usize;
    if t == 0 || t > (1 << 20) {
        return Err(Error::data(format!("audio clip length {t} out of range")));
    }
    let mut raw = vec![0u8; t * FEAT_ROWS * FEAT_COLS * 4];
    r.read_exact(&mut raw)?;
    let data: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    r.read_exact(&mut b4)?;
    let content = i32::from_le_bytes(b4);
    r.read_exact(&mut b4)?;
    let emotion = i32::from_le_bytes(b4);
    AudioFeatureClip::new(
        Array3::from_shape_vec((t, FEAT_ROWS, FEAT_COLS), data)
            .map_err(|e| Error::data(e.to_string()))?,
        (content >= 0).then_some(content as u16),
        (emotion >= 0).then_some(emotion as u8),
    )
}

pub fn save_audio_clip(path: impl AsRef<std::path::Path>, clip: &AudioFeatureClip) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_audio_clip(&mut f, clip)
}

pub fn load_audio_clip(path: impl AsRef<std::path::Path>) -> Result<AudioFeatureClip> {
    let mut f = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::data(format!("cannot open audio clip {}: {e}", path.as_ref().display()))
    })?;
    read_audio_clip(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(t: usize, fill: f32) -> AudioFeatureClip {
        AudioFeatureClip::new(Array3::from_elem((t, 28, 12), fill), Some(3), Some(5)).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(AudioFeatureClip::new(Array3::zeros((0, 28, 12)), None, None).is_err());
        assert!(AudioFeatureClip::new(Array3::zeros((2, 27, 12)), None, None).is_err());
        assert!(
            AudioFeatureClip::new(Array3::from_elem((1, 28, 12), f32::NAN), None, None).is_err()
        );
    }

    #[test]
    fn pooled_is_temporal_mean() {
        let mut data = Array3::zeros((2, 28, 12));
        data[[0, 0, 0]] = 1.0;
        data[[1, 0, 0]] = 3.0;
        let c = AudioFeatureClip::new(data, None, None).unwrap();
        let p = c.pooled();
        assert_eq!(p.len(), 336);
        assert_eq!(p[0], 2.0);
    }

    #[test]
    fn record_round_trip() {
        let c = clip(5, 0.25);
        let mut buf = Vec::new();
        write_audio_clip(&mut buf, &c).unwrap();
        assert_eq!(buf.len(), 4 + 5 * 336 * 4 + 8);
        let back = read_audio_clip(&mut buf.as_slice()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unlabeled_round_trip() {
        let c = AudioFeatureClip::new(Array3::zeros((1, 28, 12)), None, None).unwrap();
        let mut buf = Vec::new();
        write_audio_clip(&mut buf, &c).unwrap();
        let back = read_audio_clip(&mut buf.as_slice()).unwrap();
        assert_eq!(back.content_id(), None);
        assert_eq!(back.emotion_id(), None);
    }
}
