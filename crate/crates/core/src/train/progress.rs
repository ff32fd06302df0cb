use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::dataset::{denormalize, save_rgb, ImageFormat, ImagePair, PixelDomain, PixelTensor};
use crate::error::{Error, Result};
use crate::model::Generator;
use crate::nn::Rng;

pub const PROGRESS_DIR: &str = "progress";

/// Runs the generator on each pair's source, one image per pass, and returns
/// the normalised outputs.
pub fn generate_images(
    generator: &mut Generator,
    pairs: &[ImagePair],
    mut dropout: Option<&mut Rng>,
) -> Result<Vec<PixelTensor>> {
    pairs
        .iter()
        .map(|pair| {
            let out =
                generator.forward(&pair.source().to_tensor(), dropout.as_deref_mut(), false)?;
            PixelTensor::from_tensor(&out, 0, PixelDomain::Normalized)
        })
        .collect()
}

/// Tiles equally sized images into a grid without gaps; `rows[r][c]` lands at
/// row `r`, column `c`.
pub fn image_grid(rows: &[Vec<RgbImage>]) -> Result<RgbImage> {
    let first = rows
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| Error::InvalidArgument("image grid needs at least one cell".into()))?;
    let (w, h) = first.dimensions();
    let columns = rows[0].len();
    if rows.iter().any(|r| r.len() != columns) {
        return Err(Error::Shape("image grid rows differ in length".into()));
    }
    let mut grid = RgbImage::new(w * columns as u32, h * rows.len() as u32);
    for (r, row) in rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if cell.dimensions() != (w, h) {
                return Err(Error::Shape(format!(
                    "grid cell is {:?}, expected {:?}",
                    cell.dimensions(),
                    (w, h)
                )));
            }
            image::imageops::replace(
                &mut grid,
                cell,
                (c as u32 * w) as i64,
                (r as u32 * h) as i64,
            );
        }
    }
    Ok(grid)
}

fn to_display(img: &PixelTensor) -> Result<RgbImage> {
    match img.domain() {
        PixelDomain::Normalized => denormalize(img)?.to_rgb(),
        PixelDomain::Raw => img.to_rgb(),
    }
}

/// Three-row grid: sources, generated images, targets; one column per pair.
pub fn triptych(pairs: &[ImagePair], generated: &[PixelTensor]) -> Result<RgbImage> {
    if pairs.len() != generated.len() {
        return Err(Error::Shape(format!(
            "{} pairs but {} generated images",
            pairs.len(),
            generated.len()
        )));
    }
    let sources: Vec<&PixelTensor> = pairs.iter().map(ImagePair::source).collect();
    let targets: Vec<&PixelTensor> = pairs.iter().map(ImagePair::target).collect();
    let row = |images: Vec<&PixelTensor>| -> Result<Vec<RgbImage>> {
        images.into_iter().map(to_display).collect()
    };
    image_grid(&[
        row(sources)?,
        row(generated.iter().collect())?,
        row(targets)?,
    ])
}

/// Writes `progress/epoch_{epoch}.png` under `out_dir`: the generator's
/// current outputs for `samples` between their sources and targets.
pub fn summarize_progress(
    generator: &mut Generator,
    samples: &[ImagePair],
    epoch: usize,
    out_dir: &Path,
    dropout: Option<&mut Rng>,
) -> Result<PathBuf> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "progress summary needs at least one sample pair".into(),
        ));
    }
    let generated = generate_images(generator, samples, dropout)?;
    let grid = triptych(samples, &generated)?;
    let path = out_dir
        .join(PROGRESS_DIR)
        .join(format!("epoch_{epoch}.png"));
    save_rgb(&grid, &path, ImageFormat::Png)?;
    Ok(path)
}
