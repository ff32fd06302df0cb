use super::discriminator::Discriminator;
use super::generator::Generator;
use crate::error::{Error, Result};
use crate::nn::{bce_with_logits, l1, sigmoid, Adam, Rng, Tensor};

/// Losses of one composite (generator) update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLoss {
    /// Cross-entropy of the patch map against all-real labels.
    pub adversarial: f32,
    /// Mean absolute error between generated and target images.
    pub l1: f32,
    /// `adversarial + λ · l1`, the objective being minimised.
    pub total: f32,
}

/// Generator chained into the discriminator. Inside the composite the
/// discriminator is frozen: gradients flow through it to the generator, but
/// only generator parameters are updated.
pub struct Composite<'a> {
    generator: &'a mut Generator,
    discriminator: &'a mut Discriminator,
    lambda_l1: f32,
}

pub fn build_composite<'a>(
    generator: &'a mut Generator,
    discriminator: &'a mut Discriminator,
    lambda_l1: f32,
) -> Result<Composite<'a>> {
    let g = generator.spec();
    let d = discriminator.spec();
    if g.input_size != d.input_size || g.output.filters != d.image_channels {
        return Err(Error::Shape(format!(
            "generator produces {0}×{0}×{1} but the discriminator judges {2}×{2}×{3}",
            g.input_size, g.output.filters, d.input_size, d.image_channels
        )));
    }
    if !(lambda_l1.is_finite() && lambda_l1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("invalid λ {lambda_l1}")));
    }
    Ok(Composite {
        generator,
        discriminator,
        lambda_l1,
    })
}

impl Composite<'_> {
    pub fn lambda_l1(&self) -> f32 {
        self.lambda_l1
    }

    /// Maps sources to (patch probabilities on (source, generated), generated images).
    pub fn forward(
        &mut self,
        source: &Tensor,
        dropout: Option<&mut Rng>,
    ) -> Result<(Tensor, Tensor)> {
        let generated = self.generator.forward(source, dropout, false)?;
        let patches = self
            .discriminator
            .forward(source, &generated, false)?
            .map(sigmoid);
        Ok((patches, generated))
    }

    /// One generator update towards "judged real" and "close to `target` in L1".
    pub fn train_step(
        &mut self,
        source: &Tensor,
        target: &Tensor,
        optimizer: &mut Adam,
        dropout: Option<&mut Rng>,
    ) -> Result<GeneratorLoss> {
        let was_trainable = self.discriminator.is_trainable();
        self.discriminator.set_trainable(false);
        let result = self.step_frozen(source, target, optimizer, dropout);
        self.discriminator.set_trainable(was_trainable);
        result
    }

    fn step_frozen(
        &mut self,
        source: &Tensor,
        target: &Tensor,
        optimizer: &mut Adam,
        dropout: Option<&mut Rng>,
    ) -> Result<GeneratorLoss> {
        self.generator.zero_grad();
        let generated = self.generator.forward(source, dropout, true)?;
        let logits = self.discriminator.forward(source, &generated, true)?;
        let (adversarial, grad_logits) = bce_with_logits(&logits, 1.0);
        let (l1_loss, grad_l1) = l1(&generated, target)?;
        let mut grad = self.discriminator.backward(&grad_logits);
        for (g, r) in grad.data_mut().iter_mut().zip(grad_l1.data()) {
            *g += self.lambda_l1 * r;
        }
        self.generator.backward(&grad);
        optimizer.step_model(self.generator);
        Ok(GeneratorLoss {
            adversarial,
            l1: l1_loss,
            total: adversarial + self.lambda_l1 * l1_loss,
        })
    }
}
