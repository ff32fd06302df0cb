//! Procedural paired datasets: gray "ash plumes" over coloured backgrounds
//! as sources, and white canvases with the same plumes filled black as
//! targets. The plume geometry is analytic, so every target has an exact
//! ground-truth mask.

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb, RgbImage};
use rand::Rng as _;
use rand_distr::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::dataset::{save_rgb, ImageFormat, RawPair, Satellite};
use crate::error::{Error, Result};
use crate::nn::{derive_seed, seeded_rng, Rng};

pub const SOURCE_DIR: &str = "source";
pub const TARGET_DIR: &str = "target";
pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub size: usize,
    /// Inclusive range of plumes per image; 0 yields an ash-free pair.
    pub blob_count_range: (usize, usize),
    pub seed: u64,
    /// Relative frequency of each satellite, in [`Satellite::ALL`] order.
    pub satellite_weights: [f64; 4],
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 16,
            size: 256,
            blob_count_range: (0, 4),
            seed: 0,
            satellite_weights: [1.0; 4],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 8 {
            return Err(Error::InvalidArgument(format!(
                "synthetic images must be at least 8 pixels wide, got {}",
                self.size
            )));
        }
        let (lo, hi) = self.blob_count_range;
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "blob count range {lo}..={hi} is empty"
            )));
        }
        WeightedIndex::new(self.satellite_weights).map_err(|e| {
            Error::InvalidArgument(format!(
                "satellite weights {:?}: {e}",
                self.satellite_weights
            ))
        })?;
        Ok(())
    }
}

/// Rotated ellipse in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f32,
    pub cy: f32,
    pub rx: f32,
    pub ry: f32,
    pub angle: f32,
}

impl Ellipse {
    pub fn contains(&self, x: f32, y: f32) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * c + dy * s) / self.rx;
        let v = (-dx * s + dy * c) / self.ry;
        u * u + v * v <= 1.0
    }
}

/// Everything random about one sample, drawn before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub id: String,
    pub satellite: Satellite,
    /// Each plume is a union of 2 to 5 overlapping ellipses.
    pub plumes: Vec<Vec<Ellipse>>,
    pub background: [f32; 3],
    pub plume_gray: f32,
}

impl SamplePlan {
    /// Exact plume mask, row-major; a pixel is ash when its centre lies in
    /// any ellipse.
    pub fn mask(&self, size: usize) -> Vec<bool> {
        let ellipses: Vec<&Ellipse> = self.plumes.iter().flatten().collect();
        (0..size * size)
            .map(|i| {
                let (x, y) = ((i % size) as f32 + 0.5, (i / size) as f32 + 0.5);
                ellipses.iter().any(|e| e.contains(x, y))
            })
            .collect()
    }
}

fn draw_plume(rng: &mut Rng, size: f32) -> Vec<Ellipse> {
    let margin = 0.2 * size;
    let (cx, cy) = (
        rng.gen_range(margin..size - margin),
        rng.gen_range(margin..size - margin),
    );
    let parts = rng.gen_range(2..=5);
    (0..parts)
        .map(|_| Ellipse {
            cx: cx + rng.gen_range(-0.08..0.08) * size,
            cy: cy + rng.gen_range(-0.08..0.08) * size,
            rx: rng.gen_range(0.07..0.16) * size,
            ry: rng.gen_range(0.05..0.12) * size,
            angle: rng.gen_range(0.0..std::f32::consts::PI),
        })
        .collect()
}

/// Draws the random content of sample `index`. Each sample has its own
/// seeded stream, so plans do not depend on generation order.
pub fn plan_sample(config: &SynthConfig, index: usize) -> Result<SamplePlan> {
    config.validate()?;
    let mut rng = seeded_rng(derive_seed(config.seed, "synth", index as u64));
    let tags = WeightedIndex::new(config.satellite_weights).expect("validated");
    let satellite = Satellite::ALL[tags.sample(&mut rng)];
    let (lo, hi) = config.blob_count_range;
    let blobs = rng.gen_range(lo..=hi);
    let size = config.size as f32;
    let plumes = (0..blobs).map(|_| draw_plume(&mut rng, size)).collect();
    let background = [
        rng.gen_range(20.0..110.0),
        rng.gen_range(60.0..170.0),
        rng.gen_range(90.0..230.0),
    ];
    Ok(SamplePlan {
        id: format!("{}_{index:04}", satellite.prefix()),
        satellite,
        plumes,
        background,
        plume_gray: rng.gen_range(170.0..220.0),
    })
}

/// Renders (source, target). The source blends a Gaussian-blurred plume
/// mask over a shaded background; the target is the hard mask, black on white.
pub fn render_sample(plan: &SamplePlan, size: usize) -> (RgbImage, RgbImage) {
    let mask = plan.mask(size);
    let n = size as u32;
    let hard: ImageBuffer<Luma<f32>, Vec<f32>> = ImageBuffer::from_raw(
        n,
        n,
        mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
    )
    .expect("sized from mask");
    let soft = image::imageops::blur(&hard, (size as f32 / 64.0).max(0.8));
    let source = RgbImage::from_fn(n, n, |x, y| {
        let alpha = soft.get_pixel(x, y).0[0].clamp(0.0, 1.0) * 0.9;
        let shade = 0.85 + 0.15 * (y as f32 / n as f32);
        Rgb(std::array::from_fn(|c| {
            let bg = plan.background[c] * shade;
            (bg * (1.0 - alpha) + plan.plume_gray * alpha)
                .round()
                .clamp(0.0, 255.0) as u8
        }))
    });
    let target = RgbImage::from_fn(n, n, |x, y| {
        if mask[(y * n + x) as usize] {
            Rgb([0, 0, 0])
        } else {
            Rgb([255, 255, 255])
        }
    });
    (source, target)
}

/// One row of `truth.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub id: String,
    pub satellite: Satellite,
    pub blob_count: usize,
    pub ash_pixels: usize,
    pub has_ash: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub pairs: Vec<RawPair>,
    pub truth: Vec<TruthRecord>,
    pub truth_path: PathBuf,
}

/// Writes `source/<id>.png`, `target/<id>.png` and `truth.csv` under `out_dir`.
pub fn generate(config: &SynthConfig, out_dir: &Path) -> Result<SynthDataset> {
    config.validate()?;
    let mut pairs = Vec::with_capacity(config.count);
    let mut truth = Vec::with_capacity(config.count);
    for index in 0..config.count {
        let plan = plan_sample(config, index)?;
        let (source, target) = render_sample(&plan, config.size);
        let file = format!("{}.png", plan.id);
        let source_path = out_dir.join(SOURCE_DIR).join(&file);
        let target_path = out_dir.join(TARGET_DIR).join(&file);
        save_rgb(&source, &source_path, ImageFormat::Png)?;
        save_rgb(&target, &target_path, ImageFormat::Png)?;
        let ash_pixels = plan.mask(config.size).iter().filter(|&&m| m).count();
        truth.push(TruthRecord {
            id: plan.id.clone(),
            satellite: plan.satellite,
            blob_count: plan.plumes.len(),
            ash_pixels,
            has_ash: ash_pixels > 0,
        });
        pairs.push(RawPair {
            id: plan.id,
            source_path,
            target_path,
            satellite: plan.satellite,
        });
    }
    let truth_path = out_dir.join(TRUTH_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &truth {
        w.serialize(row)
            .map_err(|e| Error::Runtime(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Runtime(e.to_string()))?;
    crate::write_atomic(&truth_path, &bytes)?;
    log::info!(
        "wrote {} synthetic pairs to {}",
        config.count,
        out_dir.display()
    );
    Ok(SynthDataset {
        pairs,
        truth,
        truth_path,
    })
}
