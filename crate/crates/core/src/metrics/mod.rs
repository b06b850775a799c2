//! Quantitative evaluation: landmark distance / velocity metrics on 68-point
//! sequences and windowed SSIM / PSNR on frames. All functions are pure and
//! symmetric in their two arguments.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vq::types::Frame;

/// A sequence of 68-point landmarks, (T, 68, 2), pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSeq {
    points: Array3<f32>,
}

/// Which landmark subset a metric runs over. The mouth region is the
/// conventional 48..=67 slice of the 68-point layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    Mouth,
    Face,
}

impl Subset {
    pub fn indices(&self) -> std::ops::Range<usize> {
        match self {
            Subset::Mouth => 48..68,
            Subset::Face => 0..68,
        }
    }
}

impl LandmarkSeq {
    pub fn new(points: Array3<f32>) -> Result<Self> {
        let (_, p, c) = points.dim();
        if p != 68 || c != 2 {
            return Err(Error::data(format!(
                "landmark sequence must be (T, 68, 2), got (T, {p}, {c})"
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("landmarks must be finite"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &Array3<f32> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mean Euclidean distance between corresponding landmarks over all frames
/// and the chosen subset (M-LD / F-LD).
pub fn ld(gen: &LandmarkSeq, reference: &LandmarkSeq, subset: Subset) -> Result<f64> {
    if gen.len() != reference.len() {
        return Err(Error::data(format!(
            "landmark sequences differ in length: {} vs {}",
            gen.len(),
            reference.len()
        )));
    }
    let range = subset.indices();
    let mut total = 0.0f64;
    let mut count = 0usize;
    for t in 0..gen.len() {
        for p in range.clone() {
            let dx = (gen.points[[t, p, 0]] - reference.points[[t, p, 0]]) as f64;
            let dy = (gen.points[[t, p, 1]] - reference.points[[t, p, 1]]) as f64;
            total += (dx * dx + dy * dy).sqrt();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Mean Euclidean norm of the frame-to-frame velocity difference (M-LVD /
/// F-LVD). Velocities are p_{t+1} - p_t, so constant offsets cancel.
pub fn lvd(gen: &LandmarkSeq, reference: &LandmarkSeq, subset: Subset) -> Result<f64> {
    if gen.len() != reference.len() {
        return Err(Error::data("landmark sequences differ in length"));
    }
    if gen.len() < 2 {
        return Err(Error::data("lvd needs at least two frames"));
    }
    let range = subset.indices();
    let mut total = 0.0f64;
    let mut count = 0usize;
    for t in 0..gen.len() - 1 {
        for p in range.clone() {
            let vg = (
                (gen.points[[t + 1, p, 0]] - gen.points[[t, p, 0]]) as f64,
                (gen.points[[t + 1, p, 1]] - gen.points[[t, p, 1]]) as f64,
            );
            let vr = (
                (reference.points[[t + 1, p, 0]] - reference.points[[t, p, 0]]) as f64,
                (reference.points[[t + 1, p, 1]] - reference.points[[t, p, 1]]) as f64,
            );
            let dx = vg.0 - vr.0;
            let dy = vg.1 - vr.1;
            total += (dx * dx + dy * dy).sqrt();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
const SSIM_WINDOW: usize = 8;

/// Structural similarity with uniform 8x8 sliding windows, averaged over
/// channels and window positions. Result lies in [-1, 1]; 1 iff identical.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    if a.pixels().dim() != b.pixels().dim() {
        return Err(Error::data("ssim: frame shapes differ"));
    }
    let (h, w, _) = a.pixels().dim();
    let win = SSIM_WINDOW.min(h).min(w);
    if win == 0 {
        return Err(Error::data("ssim: empty frame"));
    }
    let area = (win * win) as f64;
    let mut total = 0.0f64;
    let mut count = 0usize;
    for c in 0..3 {
        for i in 0..=(h - win) {
            for j in 0..=(w - win) {
                let mut sum_a = 0.0f64;
                let mut sum_b = 0.0f64;
                let mut sum_aa = 0.0f64;
                let mut sum_bb = 0.0f64;
                let mut sum_ab = 0.0f64;
                for di in 0..win {
                    for dj in 0..win {
                        let va = a.pixels()[[i + di, j + dj, c]] as f64;
                        let vb = b.pixels()[[i + di, j + dj, c]] as f64;
                        sum_a += va;
                        sum_b += vb;
                        sum_aa += va * va;
                        sum_bb += vb * vb;
                        sum_ab += va * vb;
                    }
                }
                let mu_a = sum_a / area;
                let mu_b = sum_b / area;
                let var_a = sum_aa / area - mu_a * mu_a;
                let var_b = sum_bb / area - mu_b * mu_b;
                let cov = sum_ab / area - mu_a * mu_b;
                let s = ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2));
                total += s;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Cap reported when the mean squared error is exactly zero.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Peak signal-to-noise ratio in dB for [0, 1]-range frames:
/// 10 log10(1 / MSE), capped at 100 dB for identical inputs.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    if a.pixels().dim() != b.pixels().dim() {
        return Err(Error::data("psnr: frame shapes differ"));
    }
    let mut total = 0.0f64;
    let mut count = 0usize;
    for (va, vb) in a.pixels().iter().zip(b.pixels().iter()) {
        let diff = (*va - *vb) as f64;
        total += diff * diff;
        count += 1;
    }
    let mse = total / count as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Aggregate metric values for one clip comparison. Mirrors the six headline
/// columns plus the FID slot, which this build reports as unavailable (it
/// would need an external pretrained classifier).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricValues {
    pub m_ld: f64,
    pub m_lvd: f64,
    pub f_ld: f64,
    pub f_lvd: f64,
    pub ssim: f64,
    pub psnr: f64,
    pub fid: String,
}

impl MetricValues {
    pub fn unavailable_fid() -> String {
        "unavailable".to_string()
    }
}

/// Per-clip and aggregate report, serialized as the evaluation JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub clips: Vec<(String, MetricValues)>,
    pub aggregate: MetricValues,
}

/// Compare aligned landmark + frame sequences and produce the metric set.
pub fn clip_metrics(
    gen_landmarks: &LandmarkSeq,
    ref_landmarks: &LandmarkSeq,
    gen_frames: &[Frame],
    ref_frames: &[Frame],
) -> Result<MetricValues> {
    if gen_frames.len() != ref_frames.len() {
        return Err(Error::data("frame sequences differ in length"));
    }
    let mut ssim_total = 0.0;
    let mut psnr_total = 0.0;
    for (g, r) in gen_frames.iter().zip(ref_frames.iter()) {
        ssim_total += ssim(g, r)?;
        psnr_total += psnr(g, r)?;
    }
    let n = gen_frames.len() as f64;
    Ok(MetricValues {
        m_ld: ld(gen_landmarks, ref_landmarks, Subset::Mouth)?,
        m_lvd: lvd(gen_landmarks, ref_landmarks, Subset::Mouth)?,
        f_ld: ld(gen_landmarks, ref_landmarks, Subset::Face)?,
        f_lvd: lvd(gen_landmarks, ref_landmarks, Subset::Face)?,
        ssim: ssim_total / n,
        psnr: psnr_total / n,
        fid: MetricValues::unavailable_fid(),
    })
}

/// Average per-clip values into the aggregate row.
pub fn aggregate(values: &[MetricValues]) -> MetricValues {
    let n = values.len().max(1) as f64;
    MetricValues {
        m_ld: values.iter().map(|v| v.m_ld).sum::<f64>() / n,
        m_lvd: values.iter().map(|v| v.m_lvd).sum::<f64>() / n,
        f_ld: values.iter().map(|v| v.f_ld).sum::<f64>() / n,
        f_lvd: values.iter().map(|v| v.f_lvd).sum::<f64>() / n,
        ssim: values.iter().map(|v| v.ssim).sum::<f64>() / n,
        psnr: values.iter().map(|v| v.psnr).sum::<f64>() / n,
        fid: MetricValues::unavailable_fid(),
    }
}
