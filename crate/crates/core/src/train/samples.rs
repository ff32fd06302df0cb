use crate::dataset::{ImagePair, PixelDomain};
use crate::error::{Error, Result};
use crate::model::{Discriminator, Generator};
use crate::nn::{bce_with_logits, patch_accuracy, Adam, Rng, Tensor};

/// A batch of real (source, target) pairs labelled "real".
#[derive(Debug, Clone, PartialEq)]
pub struct RealSamples {
    pub sources: Tensor,
    pub targets: Tensor,
    /// All-ones patch maps, `[n, 1, patch, patch]`.
    pub labels: Tensor,
}

/// Generated images labelled "fake".
#[derive(Debug, Clone, PartialEq)]
pub struct FakeSamples {
    pub generated: Tensor,
    /// All-zeros patch maps, `[n, 1, patch, patch]`.
    pub labels: Tensor,
}

pub fn make_real_samples(batch: &[ImagePair], patch: usize) -> Result<RealSamples> {
    if batch.is_empty() {
        return Ok(RealSamples {
            sources: Tensor::zeros([0, 3, 0, 0]),
            targets: Tensor::zeros([0, 3, 0, 0]),
            labels: Tensor::zeros([0, 1, patch, patch]),
        });
    }
    if let Some(p) = batch.iter().find(|p| p.domain() != PixelDomain::Normalized) {
        return Err(Error::Domain(format!(
            "pair {:?} is not normalized to [-1, 1]",
            p.id
        )));
    }
    let sources: Vec<Tensor> = batch.iter().map(|p| p.source().to_tensor()).collect();
    let targets: Vec<Tensor> = batch.iter().map(|p| p.target().to_tensor()).collect();
    Ok(RealSamples {
        sources: Tensor::stack(&sources)?,
        targets: Tensor::stack(&targets)?,
        labels: Tensor::full([batch.len(), 1, patch, patch], 1.0),
    })
}

/// Translates `sources` with the generator. Dropout is active only when an
/// RNG is supplied.
pub fn make_fake_samples(
    generator: &mut Generator,
    sources: &Tensor,
    patch: usize,
    dropout: Option<&mut Rng>,
) -> Result<FakeSamples> {
    if sources.batch() == 0 {
        return Ok(FakeSamples {
            generated: sources.clone(),
            labels: Tensor::zeros([0, 1, patch, patch]),
        });
    }
    let generated = generator.forward(sources, dropout, false)?;
    Ok(FakeSamples {
        labels: Tensor::zeros([sources.batch(), 1, patch, patch]),
        generated,
    })
}

/// Loss and patch accuracy of one discriminator pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorScore {
    pub loss: f32,
    pub accuracy: f32,
}

/// Weight applied to each real/fake discriminator loss.
pub const DISCRIMINATOR_LOSS_WEIGHT: f32 = 0.5;

/// One standalone discriminator update on `(sources, candidates)` against a
/// constant `label`. Reported loss and accuracy come from the pre-update pass.
pub fn discriminator_step(
    discriminator: &mut Discriminator,
    optimizer: &mut Adam,
    sources: &Tensor,
    candidates: &Tensor,
    label: f32,
) -> Result<DiscriminatorScore> {
    let was_trainable = discriminator.is_trainable();
    discriminator.set_trainable(true);
    discriminator.zero_grad();
    let result = discriminator
        .forward(sources, candidates, true)
        .map(|logits| {
            let (loss, grad) = bce_with_logits(&logits, label);
            discriminator.backward(&grad.map(|g| g * DISCRIMINATOR_LOSS_WEIGHT));
            optimizer.step_model(discriminator);
            DiscriminatorScore {
                loss: DISCRIMINATOR_LOSS_WEIGHT * loss,
                accuracy: patch_accuracy(&logits, label),
            }
        });
    discriminator.set_trainable(was_trainable);
    result
}

/// Mean discriminator score over real pairs, one pair per pass, without updates.
pub fn score_real_pairs(
    discriminator: &mut Discriminator,
    pairs: &[ImagePair],
) -> Result<Option<DiscriminatorScore>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let (mut loss, mut accuracy) = (0.0f64, 0.0f64);
    for pair in pairs {
        let real = make_real_samples(std::slice::from_ref(pair), 0)?;
        let logits = discriminator.forward(&real.sources, &real.targets, false)?;
        loss += (DISCRIMINATOR_LOSS_WEIGHT * bce_with_logits(&logits, 1.0).0) as f64;
        accuracy += patch_accuracy(&logits, 1.0) as f64;
    }
    let n = pairs.len() as f64;
    Ok(Some(DiscriminatorScore {
        loss: (loss / n) as f32,
        accuracy: (accuracy / n) as f32,
    }))
}
