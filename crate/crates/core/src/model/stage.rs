//! One convolutional stage: kernel → batch norm → dropout → skip concat → activation.

use super::spec::{ActivationKind, LayerKind, LayerSpec};
use crate::error::Result;
use crate::nn::{
    dropout_mask, mul_elementwise, Activation, BatchNorm2d, Conv2d, ConvTranspose2d, Param, Rng,
    Tensor,
};

#[derive(Debug, Clone)]
enum Kernel {
    Conv(Conv2d),
    Transposed(ConvTranspose2d),
}

#[derive(Debug, Clone)]
pub(crate) struct Stage {
    kernel: Kernel,
    norm: Option<BatchNorm2d>,
    dropout_rate: f32,
    activation: Activation,
    mask: Option<Vec<f32>>,
    output: Option<Tensor>,
    own_channels: usize,
}

impl Stage {
    pub fn new(spec: &LayerSpec, in_channels: usize, leaky_slope: f32, rng: &mut Rng) -> Self {
        let kernel = match spec.kind {
            LayerKind::Conv => Kernel::Conv(Conv2d::new(
                in_channels,
                spec.filters,
                spec.kernel[0],
                spec.stride(),
                rng,
            )),
            LayerKind::TransposedConv => Kernel::Transposed(ConvTranspose2d::new(
                in_channels,
                spec.filters,
                spec.kernel[0],
                spec.stride(),
                rng,
            )),
        };
        let activation = match spec.activation {
            ActivationKind::LeakyRelu => Activation::LeakyRelu(leaky_slope),
            ActivationKind::Relu => Activation::Relu,
            ActivationKind::Tanh => Activation::Tanh,
            // Sigmoid heads emit logits; the loss and `predict` apply the sigmoid.
            ActivationKind::Sigmoid | ActivationKind::None => Activation::Identity,
        };
        Self {
            kernel,
            norm: spec.batch_norm.then(|| BatchNorm2d::new(spec.filters)),
            dropout_rate: spec.dropout_rate,
            activation,
            mask: None,
            output: None,
            own_channels: spec.filters,
        }
    }

    pub fn forward(
        &mut self,
        x: &Tensor,
        skip: Option<&Tensor>,
        dropout: Option<&mut Rng>,
        record: bool,
    ) -> Result<Tensor> {
        let mut h = match &mut self.kernel {
            Kernel::Conv(c) => c.forward(x, record)?,
            Kernel::Transposed(c) => c.forward(x, record)?,
        };
        if let Some(norm) = &mut self.norm {
            h = norm.forward(&h, record);
        }
        self.mask = None;
        if let (Some(rng), true) = (dropout, self.dropout_rate > 0.0) {
            let mask = dropout_mask(h.len(), self.dropout_rate, rng);
            h = mul_elementwise(&h, &mask);
            if record {
                self.mask = Some(mask);
            }
        }
        if let Some(skip) = skip {
            h = Tensor::concat_channels(&h, skip)?;
        }
        let out = self.activation.apply(&h);
        self.output = record.then(|| out.clone());
        Ok(out)
    }

    /// Returns the gradient for the stage input and, if a skip was concatenated,
    /// for the skip tensor.
    pub fn backward(&mut self, grad: &Tensor, param_grads: bool) -> (Tensor, Option<Tensor>) {
        let output = self
            .output
            .take()
            .expect("stage backward called without a recorded forward pass");
        let mut g = self.activation.backward(&output, grad);
        let mut skip_grad = None;
        if g.channels() > self.own_channels {
            let (own, skip) = g.split_channels(self.own_channels);
            g = own;
            skip_grad = Some(skip);
        }
        if let Some(mask) = self.mask.take() {
            g = mul_elementwise(&g, &mask);
        }
        if let Some(norm) = &mut self.norm {
            g = norm.backward(&g, param_grads);
        }
        let dx = match &mut self.kernel {
            Kernel::Conv(c) => c.backward(&g, param_grads),
            Kernel::Transposed(c) => c.backward(&g, param_grads),
        };
        (dx, skip_grad)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        let [w, b] = match &self.kernel {
            Kernel::Conv(c) => c.params(),
            Kernel::Transposed(c) => c.params(),
        };
        f(&format!("{prefix}.conv.weight"), w);
        f(&format!("{prefix}.conv.bias"), b);
        if let Some(norm) = &self.norm {
            let [g, b] = norm.params();
            f(&format!("{prefix}.norm.gamma"), g);
            f(&format!("{prefix}.norm.beta"), b);
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        let [w, b] = match &mut self.kernel {
            Kernel::Conv(c) => c.params_mut(),
            Kernel::Transposed(c) => c.params_mut(),
        };
        f(&format!("{prefix}.conv.weight"), w);
        f(&format!("{prefix}.conv.bias"), b);
        if let Some(norm) = &mut self.norm {
            let [g, b] = norm.params_mut();
            f(&format!("{prefix}.norm.gamma"), g);
            f(&format!("{prefix}.norm.beta"), b);
        }
    }
}
