//! VQ-GAN training losses.
//!
//! Reduction convention: every term is the mean over grid positions (and
//! batch) of the per-position squared Euclidean norm, i.e. the vector
//! dimension (channels for images, code dim for latents) is summed, spatial
//! positions are averaged. A single-cell grid therefore reduces to the plain
//! squared norm.

use candle_core::{DType, Device, Tensor, D};

use crate::error::{Error, Result};
use crate::nn::{ParamStore, SeedStream};
use crate::vq::types::{Frame, LatentGrid};

/// Sum over the last dim, mean over everything else.
fn mean_sq_norm(diff: &Tensor) -> Result<Tensor> {
    let sq = diff.sqr()?;
    let per_cell = sq.sum(D::Minus1)?;
    Ok(per_cell.mean_all()?)
}

/// The three VQ terms on tensors, keeping the stop-gradient structure:
/// reconstruction + codebook + beta * commitment.
///
/// `x`/`xhat` are (b, h, w, c) or (b, 3, H, W) rearranged to channel-last by
/// the caller; `latent` is the raw encoder output, `entries` the selected
/// codebook rows, both (b, h, w, d).
pub fn vq_loss_t(
    x: &Tensor,
    xhat: &Tensor,
    latent: &Tensor,
    entries: &Tensor,
    beta: f64,
) -> Result<Tensor> {
    let recon = mean_sq_norm(&(x - xhat)?)?;
    let codebook = mean_sq_norm(&(latent.detach() - entries)?)?;
    let commit = mean_sq_norm(&(entries.detach() - latent)?)?;
    Ok((recon + codebook + (commit * beta)?)?)
}

/// Frame-level VQ loss on plain arrays; same arithmetic as `vq_loss_t`.
pub fn vq_loss(
    x: &Frame,
    xhat: &Frame,
    latent: &LatentGrid,
    entries: &LatentGrid,
    beta: f64,
) -> Result<f64> {
    if x.pixels().dim() != xhat.pixels().dim() {
        return Err(Error::data("frame shapes differ"));
    }
    if latent.values().dim() != entries.values().dim() {
        return Err(Error::data("latent/entry shapes differ"));
    }
    let (h, w, _) = x.pixels().dim();
    let recon: f64 = x
        .pixels()
        .iter()
        .zip(xhat.pixels().iter())
        .map(|(a, b)| ((a - b) as f64).powi(2))
        .sum::<f64>()
        / (h * w) as f64;
    let (gh, gw, _) = latent.values().dim();
    let cells = (gh * gw) as f64;
    let codebook: f64 = latent
        .values()
        .iter()
        .zip(entries.values().iter())
        .map(|(a, b)| ((a - b) as f64).powi(2))
        .sum::<f64>()
        / cells;
    Ok(recon + codebook + beta * codebook)
}

/// Frozen random convolutional feature stack used as the perceptual metric.
/// Weights are seeded by a fixed constant, never trained, and identical for
/// every model instance.
pub struct PerceptualNet {
    stages: Vec<(Tensor, Tensor)>, // (weight, bias)
}

const PERCEPTUAL_SEED: u64 = 0x7065_7263_6570_7431; // "percept1"

impl PerceptualNet {
    pub fn new(device: &Device, dtype: DType) -> Result<Self> {
        let mut rng = SeedStream::new(PERCEPTUAL_SEED);
        let widths = [(3usize, 16usize), (16, 32), (32, 64)];
        let mut stages = Vec::new();
        for (c_in, c_out) in widths {
            let fan_in = c_in * 9;
            let std = (2.0 / fan_in as f64).sqrt();
            let w = Tensor::from_vec(
                rng.normal_vec(c_out * c_in * 9, 0.0, std),
                (c_out, c_in, 3, 3),
                device,
            )?
            .to_dtype(dtype)?;
            let b = Tensor::zeros((c_out,), dtype, device)?;
            stages.push((w, b));
        }
        Ok(Self { stages })
    }

    /// Feature maps after each stride-2 stage.
    pub fn features(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut h = x.clone();
        let mut feats = Vec::new();
        for (w, b) in &self.stages {
            h = h
                .conv2d(w, 1, 2, 1, 1)?
                .broadcast_add(&b.reshape((1, b.dim(0)?, 1, 1))?)?
                .relu()?;
            feats.push(h.clone());
        }
        Ok(feats)
    }

    /// Mean squared feature distance, summed over stages.
    pub fn loss(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let fa = self.features(a)?;
        let fb = self.features(b)?;
        let mut total: Option<Tensor> = None;
        for (x, y) in fa.iter().zip(fb.iter()) {
            let term = (x - y)?.sqr()?.mean_all()?;
            total = Some(match total {
                Some(t) => (t + term)?,
                None => term,
            });
        }
        Ok(total.expect("at least one stage"))
    }
}

fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&(x * slope)?)?)
}

/// Small patch-wise discriminator with hinge objectives.
pub struct PatchDiscriminator {
    store: ParamStore,
    convs: Vec<(Tensor, Tensor, usize)>, // (w, b, stride)
}

impl PatchDiscriminator {
    pub fn new(device: &Device, dtype: DType, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new(device, dtype);
        let mut rng = SeedStream::new(seed).child("disc-init");
        let plan = [(3usize, 32usize, 2usize), (32, 64, 2), (64, 1, 1)];
        let mut convs = Vec::new();
        for (i, (c_in, c_out, stride)) in plan.into_iter().enumerate() {
            let fan_in = c_in * 9;
            let std = (2.0 / fan_in as f64).sqrt();
            let w = store.normal(&format!("disc.conv{i}.w"), &[c_out, c_in, 3, 3], std, &mut rng)?;
            let b = store.zeros(&format!("disc.conv{i}.b"), &[c_out])?;
            convs.push((w, b, stride));
        }
        Ok(Self { store, convs })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// Patch logits (b, 1, h', w').
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        let last = self.convs.len() - 1;
        for (i, (w, b, stride)) in self.convs.iter().enumerate() {
            h = h
                .conv2d(w, 1, *stride, 1, 1)?
                .broadcast_add(&b.reshape((1, b.dim(0)?, 1, 1))?)?;
            if i != last {
                h = leaky_relu(&h, 0.2)?;
            }
        }
        Ok(h)
    }

    /// Hinge loss for the discriminator update.
    pub fn disc_loss(&self, real: &Tensor, fake: &Tensor) -> Result<Tensor> {
        let d_real = self.forward(real)?;
        let d_fake = self.forward(&fake.detach())?;
        let one = 1.0f64;
        let l_real = ((d_real * (-1.0))? + one)?.relu()?.mean_all()?;
        let l_fake = (d_fake + one)?.relu()?.mean_all()?;
        Ok((l_real + l_fake)?)
    }

    /// Hinge generator term: -mean(D(fake)). May be negative; on the clamped
    /// [0, 1] input domain it is bounded for any fixed discriminator.
    pub fn gen_loss(&self, fake: &Tensor) -> Result<Tensor> {
        let d_fake = self.forward(fake)?;
        Ok((d_fake.mean_all()? * (-1.0))?)
    }
}

/// Components of the full VQ-GAN objective for one batch, kept separate for
/// logging. `total` is the tensor to backprop through the generator side.
pub struct VqGanLoss {
    pub total: Tensor,
    pub recon_codebook_commit: f64,
    pub perceptual: f64,
    pub adversarial: f64,
}

/// L_VQ + L_adv + L_per with the adversarial term optionally gated off
/// (warm-up). `x`/`xhat` are (b, 3, H, W); latent/entries are (b, h, w, d).
#[allow(clippy::too_many_arguments)]
pub fn vqgan_loss_t(
    x: &Tensor,
    xhat: &Tensor,
    latent: &Tensor,
    entries: &Tensor,
    beta: f64,
    perceptual: &PerceptualNet,
    perceptual_weight: f64,
    disc: Option<(&PatchDiscriminator, f64)>,
) -> Result<VqGanLoss> {
    // channel-last views for the per-position norm convention
    let x_cl = x.permute((0, 2, 3, 1))?;
    let xhat_cl = xhat.permute((0, 2, 3, 1))?;
    let vq = vq_loss_t(&x_cl, &xhat_cl, latent, entries, beta)?;
    let per = (perceptual.loss(x, xhat)? * perceptual_weight)?;
    let mut total = (&vq + &per)?;
    let mut adv_val = 0.0f64;
    if let Some((d, weight)) = disc {
        let adv = (d.gen_loss(xhat)? * weight)?;
        adv_val = adv.to_dtype(DType::F64)?.to_scalar()?;
        total = (total + adv)?;
    }
    Ok(VqGanLoss {
        total,
        recon_codebook_commit: vq.to_dtype(DType::F64)?.to_scalar()?,
        perceptual: per.to_dtype(DType::F64)?.to_scalar()?,
        adversarial: adv_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vq::types::{Frame, LatentGrid};
    use ndarray::Array3;

    fn ones_frame() -> Frame {
        Frame::new(Array3::from_elem((4, 4, 3), 0.5f32)).unwrap()
    }

    #[test]
    fn vq_loss_zero_when_everything_matches() {
        let f = ones_frame();
        let lg = LatentGrid::new(Array3::from_elem((2, 2, 3), 0.7f32)).unwrap();
        let v = vq_loss(&f, &f, &lg, &lg, 0.25).unwrap();
        assert_eq!(v, 0.0);
        // any entries/beta: still zero when x == xhat and latent == entries
        let lg2 = LatentGrid::new(Array3::from_elem((2, 2, 3), -3.0f32)).unwrap();
        assert_eq!(vq_loss(&f, &f, &lg2, &lg2, 7.0).unwrap(), 0.0);
    }

    #[test]
    fn vq_loss_single_cell_hand_value() {
        // codebook term 0.05, commitment 0.25 * 0.05 -> 0.0625 total
        let f = ones_frame();
        let latent =
            LatentGrid::new(Array3::from_shape_vec((1, 1, 2), vec![0.9f32, 1.2]).unwrap()).unwrap();
        let entries =
            LatentGrid::new(Array3::from_shape_vec((1, 1, 2), vec![1.0f32, 1.0]).unwrap()).unwrap();
        let v = vq_loss(&f, &f, &latent, &entries, 0.25).unwrap();
        assert!((v - 0.0625).abs() < 1e-7, "got {v}");
    }

    #[test]
    fn tensor_and_array_paths_agree() {
        let dev = Device::Cpu;
        let mut rng = SeedStream::new(9);
        let px: Vec<f32> = rng.uniform_vec(4 * 4 * 3, 0.0, 1.0).iter().map(|v| *v as f32).collect();
        let px2: Vec<f32> = rng.uniform_vec(4 * 4 * 3, 0.0, 1.0).iter().map(|v| *v as f32).collect();
        let lat: Vec<f32> = rng.normal_vec(2 * 2 * 5, 0.0, 1.0).iter().map(|v| *v as f32).collect();
        let ent: Vec<f32> = rng.normal_vec(2 * 2 * 5, 0.0, 1.0).iter().map(|v| *v as f32).collect();

        let x = Frame::new(Array3::from_shape_vec((4, 4, 3), px.clone()).unwrap()).unwrap();
        let xh = Frame::new(Array3::from_shape_vec((4, 4, 3), px2.clone()).unwrap()).unwrap();
        let lg = LatentGrid::new(Array3::from_shape_vec((2, 2, 5), lat.clone()).unwrap()).unwrap();
        let eg = LatentGrid::new(Array3::from_shape_vec((2, 2, 5), ent.clone()).unwrap()).unwrap();
        let array_val = vq_loss(&x, &xh, &lg, &eg, 0.25).unwrap();

        let xt = Tensor::from_vec(px, (1, 4, 4, 3), &dev).unwrap();
        let xht = Tensor::from_vec(px2, (1, 4, 4, 3), &dev).unwrap();
        let lt = Tensor::from_vec(lat, (1, 2, 2, 5), &dev).unwrap();
        let et = Tensor::from_vec(ent, (1, 2, 2, 5), &dev).unwrap();
        let tensor_val: f32 = vq_loss_t(&xt, &xht, &lt, &et, 0.25)
            .unwrap()
            .to_scalar()
            .unwrap();
        assert!((array_val - tensor_val as f64).abs() < 1e-5);
    }

    #[test]
    fn commitment_gradient_skips_entries() {
        use candle_core::Var;
        let dev = Device::Cpu;
        // With x == xhat and the codebook term's latent detached, entries only
        // receive gradient through the codebook term; the commitment term must
        // contribute nothing to entries.
        let latent = Tensor::from_vec(vec![0.9f64, 1.2], (1, 1, 1, 2), &dev).unwrap();
        let entries = Var::from_vec(vec![1.0f64, 1.0], (1, 1, 1, 2), &dev).unwrap();
        // isolate the commitment term: beta * ||sg[entries] - latent||^2
        let commit = super::mean_sq_norm(&(entries.as_tensor().detach() - &latent).unwrap()).unwrap();
        let grads = commit.backward().unwrap();
        assert!(grads.get(entries.as_tensor()).is_none(), "sg[] must block entry gradients");
    }

    #[test]
    fn perceptual_is_frozen_and_zero_on_identity() {
        let dev = Device::Cpu;
        let p1 = PerceptualNet::new(&dev, DType::F32).unwrap();
        let p2 = PerceptualNet::new(&dev, DType::F32).unwrap();
        let x = Tensor::rand(0f32, 1f32, (1, 3, 16, 16), &dev).unwrap();
        let l_self: f32 = p1.loss(&x, &x).unwrap().to_scalar().unwrap();
        assert_eq!(l_self, 0.0);
        // fixed seed: two instances agree bit-for-bit
        let y = Tensor::rand(0f32, 1f32, (1, 3, 16, 16), &dev).unwrap();
        let a: f32 = p1.loss(&x, &y).unwrap().to_scalar().unwrap();
        let b: f32 = p2.loss(&x, &y).unwrap().to_scalar().unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn hinge_components_have_expected_signs() {
        let dev = Device::Cpu;
        let disc = PatchDiscriminator::new(&dev, DType::F32, 3).unwrap();
        let real = Tensor::rand(0f32, 1f32, (2, 3, 32, 32), &dev).unwrap();
        let fake = Tensor::rand(0f32, 1f32, (2, 3, 32, 32), &dev).unwrap();
        let d: f32 = disc.disc_loss(&real, &fake).unwrap().to_scalar().unwrap();
        assert!(d >= 0.0, "hinge disc loss is non-negative");
        // generator term may be negative; just check finiteness
        let g: f32 = disc.gen_loss(&fake).unwrap().to_scalar().unwrap();
        assert!(g.is_finite());
    }

    #[test]
    fn vqgan_loss_vanishes_without_disc_on_perfect_recon() {
        let dev = Device::Cpu;
        let per = PerceptualNet::new(&dev, DType::F32).unwrap();
        let x = Tensor::rand(0f32, 1f32, (1, 3, 32, 32), &dev).unwrap();
        let latent = Tensor::rand(0f32, 1f32, (1, 8, 8, 4), &dev).unwrap();
        let parts = vqgan_loss_t(&x, &x, &latent, &latent, 0.25, &per, 0.1, None).unwrap();
        assert_eq!(parts.recon_codebook_commit, 0.0);
        assert_eq!(parts.perceptual, 0.0);
        let t: f32 = parts.total.to_scalar().unwrap();
        assert_eq!(t, 0.0);
    }
}
