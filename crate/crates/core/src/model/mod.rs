//! Architecture specs, the U-Net generator, the PatchGAN discriminator, and
//! the composite used to train the generator.

mod audit;
mod composite;
mod discriminator;
mod generator;
mod receptive;
mod spec;
mod stage;

pub use audit::{
    audit_discriminator, audit_generator, audit_model, layer_params, AuditReport, AuditRow,
};
pub use composite::{build_composite, Composite, GeneratorLoss};
pub use discriminator::{build_discriminator, Discriminator};
pub use generator::{build_generator, Generator};
pub use receptive::receptive_field;
pub use spec::{
    ActivationKind, ArchitectureSpec, DiscriminatorSpec, GeneratorSpec, LayerKind, LayerSpec,
    Padding, ARCHITECTURE_VERSION, DEFAULT_LAMBDA_L1, KERNEL, LEAKY_SLOPE,
};
