//! Minimal CPU tensor engine: NCHW tensors, convolution layers with explicit
//! backward passes, losses, Adam, and weight (de)serialisation.

mod layers;
mod loss;
pub(crate) mod ops;
mod param;
mod store;
mod tensor;

pub use layers::{
    dropout_mask, mul_elementwise, sigmoid, Activation, BatchNorm2d, Conv2d, ConvTranspose2d,
    INIT_STD,
};
pub use loss::{bce_with_logits, l1, patch_accuracy};
pub use param::{Adam, Param};
pub use store::{load_tensors, save_tensors, NamedParams, StoredTensor};
pub use tensor::Tensor;

/// Random generator used for initialisation, dropout and shuffling.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a label.
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
