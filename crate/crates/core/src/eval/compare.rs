use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{save_rgb, ImageFormat, ImagePair};
use crate::error::{Error, Result};
use crate::model::ArchitectureSpec;
use crate::nn::{derive_seed, seeded_rng};
use crate::train::{generate_images, triptych, CheckpointRecord};

pub const COMPARE_DIR: &str = "compare";
pub const INDEX_FILE: &str = "index.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub grids: Vec<(usize, PathBuf)>,
    /// Checkpoints that could not be loaded, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
    pub index_path: PathBuf,
}

/// Renders a source / generated / target grid per checkpoint into
/// `out_dir/compare/epoch_{N}.png` and lists them in `compare/index.txt`.
/// Dropout is seeded from `seed` and the epoch when `seed` is given.
pub fn compare_checkpoints(
    checkpoints: &[CheckpointRecord],
    arch: &ArchitectureSpec,
    pairs: &[ImagePair],
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<Comparison> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument("no checkpoints to compare".into()));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "no sample pairs to compare on".into(),
        ));
    }
    let pairs: Vec<ImagePair> = pairs
        .iter()
        .map(|p| match p.domain() {
            crate::dataset::PixelDomain::Raw => p.normalized(),
            crate::dataset::PixelDomain::Normalized => Ok(p.clone()),
        })
        .collect::<Result<_>>()?;
    let dir = out_dir.join(COMPARE_DIR);
    let mut grids = Vec::new();
    let mut skipped = Vec::new();
    let mut index = String::from("epoch\tgrid\n");
    for record in checkpoints {
        let grid = record.load_generator(arch).and_then(|mut g| {
            let mut rng = seed.map(|s| seeded_rng(derive_seed(s, "compare", record.epoch as u64)));
            let generated = generate_images(&mut g, &pairs, rng.as_mut())?;
            triptych(&pairs, &generated)
        });
        match grid {
            Ok(img) => {
                let name = format!("epoch_{}.png", record.epoch);
                save_rgb(&img, &dir.join(&name), ImageFormat::Png)?;
                writeln!(index, "{}\t{name}", record.epoch).expect("string write");
                grids.push((record.epoch, dir.join(name)));
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", record.weights_path.display());
                writeln!(
                    index,
                    "{}\tSKIPPED {}: {e}",
                    record.epoch,
                    record.weights_path.display()
                )
                .expect("string write");
                skipped.push((record.weights_path.clone(), e.to_string()));
            }
        }
    }
    let index_path = dir.join(INDEX_FILE);
    crate::write_atomic(&index_path, index.as_bytes())?;
    Ok(Comparison {
        grids,
        skipped,
        index_path,
    })
}
