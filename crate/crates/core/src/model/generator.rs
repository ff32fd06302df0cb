use super::spec::GeneratorSpec;
use super::stage::Stage;
use crate::error::{Error, Result};
use crate::nn::{derive_seed, seeded_rng, NamedParams, Param, Rng, Tensor};

/// U-Net generator with skip connections between mirrored stages.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    encoder: Vec<Stage>,
    bottleneck: Stage,
    decoder: Vec<Stage>,
    output: Stage,
    trainable: bool,
    skips_recorded: bool,
}

/// Builds a generator with N(0, 0.02) weights drawn from `seed`.
pub fn build_generator(spec: &GeneratorSpec, seed: u64) -> Result<Generator> {
    spec.validate()?;
    let mut rng = seeded_rng(derive_seed(seed, "generator", 0));
    let slope = spec.leaky_slope;
    let mut channels = spec.image_channels;
    let mut encoder = Vec::with_capacity(spec.encoder.len());
    for layer in &spec.encoder {
        encoder.push(Stage::new(layer, channels, slope, &mut rng));
        channels = layer.filters;
    }
    let bottleneck = Stage::new(&spec.bottleneck, channels, slope, &mut rng);
    channels = spec.bottleneck.filters;
    let mut decoder = Vec::with_capacity(spec.decoder.len());
    for (j, layer) in spec.decoder.iter().enumerate() {
        decoder.push(Stage::new(layer, channels, slope, &mut rng));
        channels = spec.concat_channels(j);
    }
    let output = Stage::new(&spec.output, channels, slope, &mut rng);
    Ok(Generator {
        spec: spec.clone(),
        encoder,
        bottleneck,
        decoder,
        output,
        trainable: true,
        skips_recorded: false,
    })
}

impl Generator {
    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn input_shape(&self, batch: usize) -> [usize; 4] {
        let s = self.spec.input_size;
        [batch, self.spec.image_channels, s, s]
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape(x.batch()) || x.batch() == 0 {
            return Err(Error::Shape(format!(
                "generator expects {:?}, got {:?}",
                self.input_shape(x.batch().max(1)),
                x.shape()
            )));
        }
        Ok(())
    }

    /// Translates a batch of normalised source images. Dropout layers are
    /// active only when a generator is supplied.
    pub fn forward(
        &mut self,
        x: &Tensor,
        mut dropout: Option<&mut Rng>,
        record: bool,
    ) -> Result<Tensor> {
        self.check_input(x)?;
        let mut skips = Vec::with_capacity(self.encoder.len());
        let mut h = x.clone();
        for stage in &mut self.encoder {
            h = stage.forward(&h, None, None, record)?;
            skips.push(h.clone());
        }
        h = self.bottleneck.forward(&h, None, None, record)?;
        for (stage, skip) in self.decoder.iter_mut().zip(skips.iter().rev()) {
            h = stage.forward(&h, Some(skip), dropout.as_deref_mut(), record)?;
        }
        let out = self.output.forward(&h, None, None, record)?;
        self.skips_recorded = record;
        Ok(out)
    }

    /// Output shape of every stage (encoder, bottleneck, decoder, output) for
    /// input `x`, in audit-row order. Dropout is off.
    pub fn stage_shapes(&mut self, x: &Tensor) -> Result<Vec<[usize; 4]>> {
        self.check_input(x)?;
        let mut shapes = Vec::new();
        let mut skips = Vec::new();
        let mut h = x.clone();
        for stage in &mut self.encoder {
            h = stage.forward(&h, None, None, false)?;
            shapes.push(h.shape());
            skips.push(h.clone());
        }
        h = self.bottleneck.forward(&h, None, None, false)?;
        shapes.push(h.shape());
        for (stage, skip) in self.decoder.iter_mut().zip(skips.iter().rev()) {
            h = stage.forward(&h, Some(skip), None, false)?;
            shapes.push(h.shape());
        }
        shapes.push(self.output.forward(&h, None, None, false)?.shape());
        Ok(shapes)
    }

    /// Backpropagates a gradient on the generated images into the parameter gradients.
    pub fn backward(&mut self, grad: &Tensor) {
        assert!(
            self.skips_recorded,
            "generator backward called without a recorded forward pass"
        );
        self.skips_recorded = false;
        let param_grads = self.trainable;
        let (mut g, _) = self.output.backward(grad, param_grads);
        let mut skip_grads = Vec::with_capacity(self.decoder.len());
        for stage in self.decoder.iter_mut().rev() {
            let (gin, gskip) = stage.backward(&g, param_grads);
            skip_grads.push(gskip.expect("decoder stages concatenate a skip"));
            g = gin;
        }
        // skip_grads[k] belongs to decoder stage n-1-k, i.e. encoder stage k.
        g = self.bottleneck.backward(&g, param_grads).0;
        for (stage, skip) in self.encoder.iter_mut().zip(skip_grads).rev() {
            for (a, b) in g.data_mut().iter_mut().zip(skip.data()) {
                *a += b;
            }
            g = stage.backward(&g, param_grads).0;
        }
    }

    pub fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |_, p| p.zero_grad());
    }
}

impl NamedParams for Generator {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param)) {
        for (i, s) in self.encoder.iter().enumerate() {
            s.visit(&format!("enc{i}"), f);
        }
        self.bottleneck.visit("bottleneck", f);
        for (j, s) in self.decoder.iter().enumerate() {
            s.visit(&format!("dec{j}"), f);
        }
        self.output.visit("output", f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        for (i, s) in self.encoder.iter_mut().enumerate() {
            s.visit_mut(&format!("enc{i}"), f);
        }
        self.bottleneck.visit_mut("bottleneck", f);
        for (j, s) in self.decoder.iter_mut().enumerate() {
            s.visit_mut(&format!("dec{j}"), f);
        }
        self.output.visit_mut("output", f);
    }
}
