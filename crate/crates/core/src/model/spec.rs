//! Declarative layer schedules for the generator and discriminator.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, IoContext, Result};

pub const ARCHITECTURE_VERSION: u32 = 1;
pub const KERNEL: usize = 4;
pub const LEAKY_SLOPE: f32 = 0.2;
pub const DEFAULT_LAMBDA_L1: f32 = 100.0;

const DISCRIMINATOR_FILTERS: [usize; 5] = [64, 128, 256, 512, 512];
const DISCRIMINATOR_STRIDES: [usize; 5] = [2, 2, 2, 2, 1];
const ENCODER_FILTERS: [usize; 7] = [64, 128, 256, 512, 512, 512, 512];
const DECODER_DROPOUT_LAYERS: usize = 3;
const DROPOUT_RATE: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    TransposedConv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    LeakyRelu,
    Relu,
    Sigmoid,
    Tanh,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub filters: usize,
    pub kernel: [usize; 2],
    pub stride: [usize; 2],
    pub padding: Padding,
    pub batch_norm: bool,
    pub activation: ActivationKind,
    #[serde(default)]
    pub dropout_rate: f32,
}

impl LayerSpec {
    pub fn conv(
        filters: usize,
        stride: usize,
        batch_norm: bool,
        activation: ActivationKind,
    ) -> Self {
        Self {
            kind: LayerKind::Conv,
            filters,
            kernel: [KERNEL, KERNEL],
            stride: [stride, stride],
            padding: Padding::Same,
            batch_norm,
            activation,
            dropout_rate: 0.0,
        }
    }

    pub fn transposed(
        filters: usize,
        batch_norm: bool,
        activation: ActivationKind,
        dropout_rate: f32,
    ) -> Self {
        Self {
            kind: LayerKind::TransposedConv,
            dropout_rate,
            ..Self::conv(filters, 2, batch_norm, activation)
        }
    }

    pub fn stride(&self) -> usize {
        self.stride[0]
    }

    fn check(&self, name: &str) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(format!("{name}: {msg}")));
        if self.filters == 0 {
            return fail("filters must be positive".into());
        }
        if self.kernel != [KERNEL, KERNEL] {
            return fail(format!("kernel must be 4×4, got {:?}", self.kernel));
        }
        if self.stride[0] != self.stride[1] || !matches!(self.stride[0], 1 | 2) {
            return fail(format!(
                "stride must be (1,1) or (2,2), got {:?}",
                self.stride
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    fn expect(
        &self,
        name: &str,
        kind: LayerKind,
        stride: usize,
        activation: ActivationKind,
    ) -> Result<()> {
        self.check(name)?;
        if self.kind != kind || self.stride() != stride || self.activation != activation {
            return Err(Error::InvalidSpec(format!(
                "{name}: expected {kind:?} stride {stride} with {activation:?}, got {:?} stride {} with {:?}",
                self.kind,
                self.stride(),
                self.activation
            )));
        }
        Ok(())
    }
}

/// Conditional PatchGAN: source and candidate are stacked on channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorSpec {
    pub input_size: usize,
    pub image_channels: usize,
    pub body: Vec<LayerSpec>,
    pub head: LayerSpec,
    pub leaky_slope: f32,
}

impl DiscriminatorSpec {
    pub fn standard() -> Self {
        Self::with_width(256, 1)
    }

    /// Same five-layer schedule with every filter count divided by `width_divisor`.
    pub fn with_width(input_size: usize, width_divisor: usize) -> Self {
        let body = DISCRIMINATOR_FILTERS
            .iter()
            .zip(DISCRIMINATOR_STRIDES)
            .enumerate()
            .map(|(i, (&f, s))| {
                LayerSpec::conv(
                    (f / width_divisor).max(1),
                    s,
                    i > 0,
                    ActivationKind::LeakyRelu,
                )
            })
            .collect();
        Self {
            input_size,
            image_channels: 3,
            body,
            head: LayerSpec::conv(1, 1, false, ActivationKind::Sigmoid),
            leaky_slope: LEAKY_SLOPE,
        }
    }

    /// Input channels seen by the first layer.
    pub fn fused_channels(&self) -> usize {
        2 * self.image_channels
    }

    /// Side length of the output patch map.
    pub fn patch_size(&self) -> usize {
        self.body
            .iter()
            .chain(std::iter::once(&self.head))
            .fold(self.input_size, |size, l| size.div_ceil(l.stride()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.body.len() != DISCRIMINATOR_FILTERS.len() {
            return Err(Error::InvalidSpec(format!(
                "discriminator needs exactly {} body layers, got {}",
                DISCRIMINATOR_FILTERS.len(),
                self.body.len()
            )));
        }
        if self.input_size == 0 || self.image_channels == 0 {
            return Err(Error::InvalidSpec(
                "discriminator input must be non-empty".into(),
            ));
        }
        for (i, (layer, stride)) in self.body.iter().zip(DISCRIMINATOR_STRIDES).enumerate() {
            layer.expect(
                &format!("discriminator layer {i}"),
                LayerKind::Conv,
                stride,
                ActivationKind::LeakyRelu,
            )?;
        }
        let base = self.body[0].filters;
        let want: Vec<usize> = DISCRIMINATOR_FILTERS
            .iter()
            .map(|f| f / 64 * base)
            .collect();
        let got: Vec<usize> = self.body.iter().map(|l| l.filters).collect();
        if got != want {
            return Err(Error::InvalidSpec(format!(
                "discriminator filter schedule {got:?} does not follow {want:?}"
            )));
        }
        self.head.expect(
            "discriminator head",
            LayerKind::Conv,
            1,
            ActivationKind::Sigmoid,
        )?;
        if self.head.filters != 1 || self.head.batch_norm {
            return Err(Error::InvalidSpec(
                "discriminator head must be a single filter without batch norm".into(),
            ));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "leaky slope {} outside (0, 1)",
                self.leaky_slope
            )));
        }
        Ok(())
    }
}

/// U-Net generator. Decoder stage `j` is concatenated with encoder stage
/// `encoder.len() - 1 - j` before its activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub input_size: usize,
    pub image_channels: usize,
    pub encoder: Vec<LayerSpec>,
    pub bottleneck: LayerSpec,
    pub decoder: Vec<LayerSpec>,
    pub output: LayerSpec,
    pub leaky_slope: f32,
}

impl GeneratorSpec {
    pub fn standard() -> Self {
        Self::scaled(256, 1).expect("standard schedule is valid")
    }

    /// Generator for `input_size` inputs: the deepest encoder stages and their
    /// decoder mirrors are dropped so the bottleneck still reaches 1×1, and
    /// filter counts are divided by `width_divisor`.
    pub fn scaled(input_size: usize, width_divisor: usize) -> Result<Self> {
        if !input_size.is_power_of_two() || !(8..=256).contains(&input_size) {
            return Err(Error::InvalidSpec(format!(
                "generator input size must be a power of two in 8..=256, got {input_size}"
            )));
        }
        if width_divisor == 0 || 64 % width_divisor != 0 {
            return Err(Error::InvalidSpec(format!(
                "width divisor must divide 64, got {width_divisor}"
            )));
        }
        let stages = input_size.trailing_zeros() as usize - 1;
        let filters: Vec<usize> = ENCODER_FILTERS[..stages]
            .iter()
            .map(|f| f / width_divisor)
            .collect();
        let encoder = filters
            .iter()
            .enumerate()
            .map(|(i, &f)| LayerSpec::conv(f, 2, i > 0, ActivationKind::LeakyRelu))
            .collect();
        let decoder = filters
            .iter()
            .rev()
            .enumerate()
            .map(|(j, &f)| {
                let rate = if j < DECODER_DROPOUT_LAYERS {
                    DROPOUT_RATE
                } else {
                    0.0
                };
                LayerSpec::transposed(f, true, ActivationKind::Relu, rate)
            })
            .collect();
        Ok(Self {
            input_size,
            image_channels: 3,
            encoder,
            bottleneck: LayerSpec::conv(512 / width_divisor, 2, false, ActivationKind::Relu),
            decoder,
            output: LayerSpec::transposed(3, false, ActivationKind::Tanh, 0.0),
            leaky_slope: LEAKY_SLOPE,
        })
    }

    /// Spatial size after each encoder stage, then after the bottleneck.
    pub fn encoder_trace(&self) -> Vec<usize> {
        let mut size = self.input_size;
        self.encoder
            .iter()
            .chain(std::iter::once(&self.bottleneck))
            .map(|l| {
                size = size.div_ceil(l.stride());
                size
            })
            .collect()
    }

    /// Channels entering decoder stage `j + 1` (or the output layer): own filters plus the skip.
    pub fn concat_channels(&self, j: usize) -> usize {
        let skip = self.encoder[self.encoder.len() - 1 - j].filters;
        self.decoder[j].filters + skip
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() {
            return Err(Error::InvalidSpec("generator has no encoder stages".into()));
        }
        if self.decoder.len() != self.encoder.len() {
            return Err(Error::InvalidSpec(format!(
                "generator has {} encoder but {} decoder stages",
                self.encoder.len(),
                self.decoder.len()
            )));
        }
        if self.image_channels == 0 {
            return Err(Error::InvalidSpec("generator needs image channels".into()));
        }
        for (i, l) in self.encoder.iter().enumerate() {
            l.expect(
                &format!("encoder stage {i}"),
                LayerKind::Conv,
                2,
                ActivationKind::LeakyRelu,
            )?;
        }
        self.bottleneck
            .expect("bottleneck", LayerKind::Conv, 2, ActivationKind::Relu)?;
        if self.bottleneck.batch_norm {
            return Err(Error::InvalidSpec("bottleneck takes no batch norm".into()));
        }
        for (j, l) in self.decoder.iter().enumerate() {
            l.expect(
                &format!("decoder stage {j}"),
                LayerKind::TransposedConv,
                2,
                ActivationKind::Relu,
            )?;
        }
        self.output.expect(
            "output layer",
            LayerKind::TransposedConv,
            2,
            ActivationKind::Tanh,
        )?;
        if self.output.filters != self.image_channels {
            return Err(Error::InvalidSpec(format!(
                "output layer must produce {} channels, got {}",
                self.image_channels, self.output.filters
            )));
        }
        let base = self.encoder[0].filters;
        let want: Vec<usize> = ENCODER_FILTERS
            .iter()
            .take(self.encoder.len())
            .map(|f| f / 64 * base)
            .collect();
        let got: Vec<usize> = self.encoder.iter().map(|l| l.filters).collect();
        if self.encoder.len() > ENCODER_FILTERS.len() || got != want {
            return Err(Error::InvalidSpec(format!(
                "encoder filter schedule {got:?} does not follow {want:?}"
            )));
        }
        let mirrored: Vec<usize> = got.iter().rev().copied().collect();
        let dec: Vec<usize> = self.decoder.iter().map(|l| l.filters).collect();
        if dec != mirrored {
            return Err(Error::InvalidSpec(format!(
                "decoder filter schedule {dec:?} must mirror the encoder {mirrored:?}"
            )));
        }
        let expected_input = 1usize << (self.encoder.len() + 1);
        if self.input_size != expected_input {
            return Err(Error::InvalidSpec(format!(
                "{} encoder stages plus the bottleneck need a {expected_input}×{expected_input} input, got {}",
                self.encoder.len(),
                self.input_size
            )));
        }
        Ok(())
    }
}

/// Generator, discriminator, and the weight of the L1 term in the composite loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub version: u32,
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
    pub lambda_l1: f32,
}

impl ArchitectureSpec {
    pub fn standard() -> Self {
        Self {
            version: ARCHITECTURE_VERSION,
            generator: GeneratorSpec::standard(),
            discriminator: DiscriminatorSpec::standard(),
            lambda_l1: DEFAULT_LAMBDA_L1,
        }
    }

    /// Reduced architecture for small inputs (tests and desk-scale runs).
    pub fn scaled(input_size: usize, width_divisor: usize) -> Result<Self> {
        Ok(Self {
            version: ARCHITECTURE_VERSION,
            generator: GeneratorSpec::scaled(input_size, width_divisor)?,
            discriminator: DiscriminatorSpec::with_width(input_size, width_divisor),
            lambda_l1: DEFAULT_LAMBDA_L1,
        })
    }

    pub fn input_size(&self) -> usize {
        self.generator.input_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != ARCHITECTURE_VERSION {
            return Err(Error::InvalidSpec(format!(
                "unsupported architecture version {}",
                self.version
            )));
        }
        self.generator.validate()?;
        self.discriminator.validate()?;
        if self.generator.input_size != self.discriminator.input_size
            || self.generator.image_channels != self.discriminator.image_channels
        {
            return Err(Error::InvalidSpec(
                "generator output does not match the discriminator candidate input".into(),
            ));
        }
        if !(self.lambda_l1.is_finite() && self.lambda_l1 >= 0.0) {
            return Err(Error::InvalidSpec(format!("invalid λ {}", self.lambda_l1)));
        }
        Ok(())
    }

    pub fn is_standard_schedule(&self) -> bool {
        self.generator == GeneratorSpec::standard() && self.discriminator == DiscriminatorSpec::standard()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(format!("architecture file: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_json().as_bytes())
    }

    /// SHA-256 of the compact JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serialises");
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
