//! Directory ingestion and the prepared dataset layout:
//! `<out>/{train,val,test}/<id>.{jpg,png}` holding `N × 2N` combined images,
//! plus `<out>/manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::pixels::{load_rgb, save_rgb, ImageFormat, PixelTensor};
use super::split::{Split, SplitCounts, SplitManifest};
use super::transform::{combine_pair, resize_image};
use super::{ImagePair, RawPair, Satellite};
use crate::error::{Error, IoContext, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Image files (png, jpg, jpeg) directly inside `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).context(|| format!("listing {}", dir.display()))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .context(|| format!("listing {}", dir.display()))?
            .path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Debug, Deserialize)]
struct SatelliteRow {
    filename: String,
    satellite: String,
}

/// Reads a `filename,satellite` CSV mapping.
pub fn read_satellite_csv(path: &Path) -> Result<BTreeMap<String, Satellite>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("reading {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, row) in reader.deserialize::<SatelliteRow>().enumerate() {
        let row = row.map_err(|e| Error::Data(format!("{} row {}: {e}", path.display(), i + 2)))?;
        map.insert(row.filename, row.satellite.parse()?);
    }
    Ok(map)
}

/// Pairs every image in `source_dir` with the same-named file in `target_dir`.
/// The satellite comes from `mapping` (keyed by filename or stem) or, failing
/// that, from the filename prefix.
pub fn discover_pairs(
    source_dir: &Path,
    target_dir: &Path,
    mapping: Option<&BTreeMap<String, Satellite>>,
) -> Result<Vec<RawPair>> {
    let targets: BTreeMap<String, PathBuf> = list_images(target_dir)?
        .into_iter()
        .map(|p| (stem(&p), p))
        .collect();
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for source in list_images(source_dir)? {
        let id = stem(&source);
        let file_name = source
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let exact = target_dir.join(&file_name);
        let target = if exact.is_file() {
            exact
        } else if let Some(t) = targets.get(&id) {
            t.clone()
        } else {
            missing.push(file_name);
            continue;
        };
        let satellite = mapping
            .and_then(|m| m.get(&file_name).or_else(|| m.get(&id)).copied())
            .or_else(|| Satellite::from_filename(&file_name))
            .ok_or_else(|| {
                Error::Data(format!(
                    "cannot determine the satellite of {file_name}; add it to the mapping CSV \
                     or prefix the name with goes16/goes17/himawari8/meteosat11"
                ))
            })?;
        pairs.push(RawPair {
            id,
            source_path: source,
            target_path: target,
            satellite,
        });
    }
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "no target mask for: {}",
            missing.join(", ")
        )));
    }
    if pairs.is_empty() {
        return Err(Error::Data(format!(
            "no images found in {}",
            source_dir.display()
        )));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareOptions {
    /// Side length of each half of the combined image.
    pub size: usize,
    pub format: ImageFormat,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            size: 256,
            format: ImageFormat::DATASET_JPEG,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareReport {
    pub counts: SplitCounts,
    pub manifest_path: PathBuf,
}

/// Resizes, combines and writes every pair into its split directory, then
/// writes the manifest.
pub fn prepare_dataset(
    pairs: &[RawPair],
    manifest: &SplitManifest,
    out_dir: &Path,
    options: PrepareOptions,
) -> Result<PrepareReport> {
    let by_id: BTreeMap<&str, &RawPair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    for split in Split::ALL {
        let dir = out_dir.join(split.dir_name());
        crate::fsutil::ensure_dir(&dir)?;
        for id in manifest.ids(split) {
            let pair = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("manifest lists unknown pair {id:?}")))?;
            let load = |p: &Path| -> Result<PixelTensor> {
                let img = PixelTensor::from_rgb(&load_rgb(p)?);
                resize_image(&img, options.size, options.size)
            };
            let combined = combine_pair(&load(&pair.source_path)?, &load(&pair.target_path)?)?;
            let path = dir.join(format!("{id}.{}", options.format.extension()));
            save_rgb(&combined.to_rgb()?, &path, options.format)?;
        }
    }
    let manifest_path = out_dir.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;
    log::info!(
        "prepared {} train / {} val / {} test pairs in {}",
        manifest.train.len(),
        manifest.val.len(),
        manifest.test.len(),
        out_dir.display()
    );
    Ok(PrepareReport {
        counts: manifest.totals(),
        manifest_path,
    })
}

/// Locates `<dir>/<id>.{png,jpg,jpeg}`.
pub fn find_split_image(dir: &Path, id: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

/// Loads the raw pairs of one split from a prepared directory.
pub fn load_split(
    prepared_dir: &Path,
    manifest: &SplitManifest,
    split: Split,
) -> Result<Vec<ImagePair>> {
    let dir = prepared_dir.join(split.dir_name());
    manifest
        .ids(split)
        .iter()
        .map(|id| {
            let path = find_split_image(&dir, id).ok_or_else(|| {
                Error::Data(format!(
                    "prepared image for {id:?} not found in {}",
                    dir.display()
                ))
            })?;
            let combined = PixelTensor::from_rgb(&load_rgb(&path)?);
            ImagePair::from_combined(id.clone(), manifest.satellites.get(id).copied(), &combined)
        })
        .collect()
}
