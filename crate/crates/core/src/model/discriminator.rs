use super::spec::DiscriminatorSpec;
use super::stage::Stage;
use crate::error::{Error, Result};
use crate::nn::{derive_seed, seeded_rng, sigmoid, NamedParams, Param, Tensor};

/// Conditional PatchGAN discriminator.
///
/// `forward` returns per-patch logits; `predict` maps them through the sigmoid.
#[derive(Debug, Clone)]
pub struct Discriminator {
    spec: DiscriminatorSpec,
    body: Vec<Stage>,
    head: Stage,
    trainable: bool,
}

/// Builds a discriminator with N(0, 0.02) weights drawn from `seed`.
pub fn build_discriminator(spec: &DiscriminatorSpec, seed: u64) -> Result<Discriminator> {
    spec.validate()?;
    let mut rng = seeded_rng(derive_seed(seed, "discriminator", 0));
    let mut channels = spec.fused_channels();
    let mut body = Vec::with_capacity(spec.body.len());
    for layer in &spec.body {
        body.push(Stage::new(layer, channels, spec.leaky_slope, &mut rng));
        channels = layer.filters;
    }
    let head = Stage::new(&spec.head, channels, spec.leaky_slope, &mut rng);
    Ok(Discriminator {
        spec: spec.clone(),
        body,
        head,
        trainable: true,
    })
}

impl Discriminator {
    pub fn spec(&self) -> &DiscriminatorSpec {
        &self.spec
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    /// Frozen discriminators still propagate input gradients but never
    /// accumulate parameter gradients.
    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn patch_shape(&self, batch: usize) -> [usize; 4] {
        let p = self.spec.patch_size();
        [batch, 1, p, p]
    }

    fn check_inputs(&self, source: &Tensor, candidate: &Tensor) -> Result<()> {
        let want = [
            source.batch(),
            self.spec.image_channels,
            self.spec.input_size,
            self.spec.input_size,
        ];
        if source.shape() != want || candidate.shape() != want {
            return Err(Error::Shape(format!(
                "discriminator expects two {want:?} inputs, got {:?} and {:?}",
                source.shape(),
                candidate.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&mut self, source: &Tensor, candidate: &Tensor, record: bool) -> Result<Tensor> {
        self.check_inputs(source, candidate)?;
        let mut h = Tensor::concat_channels(source, candidate)?;
        for stage in &mut self.body {
            h = stage.forward(&h, None, None, record)?;
        }
        self.head.forward(&h, None, None, record)
    }

    /// Output shape of every body stage and the head, in audit-row order.
    pub fn stage_shapes(&mut self, source: &Tensor, candidate: &Tensor) -> Result<Vec<[usize; 4]>> {
        self.check_inputs(source, candidate)?;
        let mut shapes = Vec::new();
        let mut h = Tensor::concat_channels(source, candidate)?;
        for stage in &mut self.body {
            h = stage.forward(&h, None, None, false)?;
            shapes.push(h.shape());
        }
        shapes.push(self.head.forward(&h, None, None, false)?.shape());
        Ok(shapes)
    }

    /// Patch-map probabilities in `[0, 1]`.
    pub fn predict(&mut self, source: &Tensor, candidate: &Tensor) -> Result<Tensor> {
        Ok(self.forward(source, candidate, false)?.map(sigmoid))
    }

    /// Backpropagates a gradient on the logits; returns the gradient with
    /// respect to the candidate image.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Tensor {
        let param_grads = self.trainable;
        let (mut g, _) = self.head.backward(grad_logits, param_grads);
        for stage in self.body.iter_mut().rev() {
            g = stage.backward(&g, param_grads).0;
        }
        g.split_channels(self.spec.image_channels).1
    }

    pub fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |_, p| p.zero_grad());
    }
}

impl NamedParams for Discriminator {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        for (i, s) in self.body.iter().enumerate() {
            s.visit(&format!("body{i}"), f);
        }
        self.head.visit("head", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        for (i, s) in self.body.iter_mut().enumerate() {
            s.visit_mut(&format!("body{i}"), f);
        }
        self.head.visit_mut("head", f);
    }
}
