//! Paired satellite/mask images: preprocessing, stratified splitting, and the
//! on-disk prepared layout.

mod ingest;
mod pixels;
mod split;
mod transform;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ingest::{
    discover_pairs, find_split_image, list_images, load_split, prepare_dataset, read_satellite_csv,
    PrepareOptions, PrepareReport, MANIFEST_FILE,
};
pub use pixels::{load_rgb, save_rgb, ImageFormat, PixelDomain, PixelTensor};
pub use split::{split_dataset, stratum_quotas, Split, SplitCounts, SplitFractions, SplitManifest};
pub use transform::{
    combine_pair, denormalize, denormalize_value, normalize, normalize_value, resize_image,
    split_combined,
};

use crate::error::{Error, Result};

/// Satellite that produced a source image; used to stratify splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Satellite {
    #[serde(rename = "GOES16")]
    Goes16,
    #[serde(rename = "GOES17")]
    Goes17,
    #[serde(rename = "HIMAWARI8")]
    Himawari8,
    #[serde(rename = "METEOSAT11")]
    Meteosat11,
}

impl Satellite {
    pub const ALL: [Satellite; 4] = [
        Satellite::Goes16,
        Satellite::Goes17,
        Satellite::Himawari8,
        Satellite::Meteosat11,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Satellite::Goes16 => "GOES16",
            Satellite::Goes17 => "GOES17",
            Satellite::Himawari8 => "HIMAWARI8",
            Satellite::Meteosat11 => "METEOSAT11",
        }
    }

    /// Lower-case filename prefix used by [`Satellite::from_filename`].
    pub fn prefix(self) -> &'static str {
        match self {
            Satellite::Goes16 => "goes16",
            Satellite::Goes17 => "goes17",
            Satellite::Himawari8 => "himawari8",
            Satellite::Meteosat11 => "meteosat11",
        }
    }

    /// Infers the satellite from a filename such as `goes16_sangay_0001.jpg` or
    /// `Himawari-8_x.png`.
    pub fn from_filename(name: &str) -> Option<Satellite> {
        let squashed: String = name
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Satellite::ALL
            .into_iter()
            .find(|s| squashed.starts_with(s.prefix()))
    }
}

impl fmt::Display for Satellite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Satellite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let squashed: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Satellite::ALL
            .into_iter()
            .find(|sat| sat.prefix() == squashed)
            .ok_or_else(|| Error::Data(format!("unknown satellite tag {s:?}")))
    }
}

/// A source image and its mask on disk, before preprocessing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPair {
    pub id: String,
    pub source_path: PathBuf,
    pub target_path: PathBuf,
    pub satellite: Satellite,
}

impl RawPair {
    /// A pair with no files behind it, for split bookkeeping.
    pub fn placeholder(id: impl Into<String>, satellite: Satellite) -> Self {
        Self {
            id: id.into(),
            source_path: PathBuf::new(),
            target_path: PathBuf::new(),
            satellite,
        }
    }
}

/// Source and target halves of one training sample, both in the same domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub id: String,
    pub satellite: Option<Satellite>,
    source: PixelTensor,
    target: PixelTensor,
}

impl ImagePair {
    pub fn new(
        id: impl Into<String>,
        satellite: Option<Satellite>,
        source: PixelTensor,
        target: PixelTensor,
    ) -> Result<Self> {
        // combine_pair performs all the shape/domain checks.
        combine_pair(&source, &target)?;
        Ok(Self {
            id: id.into(),
            satellite,
            source,
            target,
        })
    }

    pub fn from_combined(
        id: impl Into<String>,
        satellite: Option<Satellite>,
        combined: &PixelTensor,
    ) -> Result<Self> {
        let (source, target) = split_combined(combined)?;
        Ok(Self {
            id: id.into(),
            satellite,
            source,
            target,
        })
    }

    pub fn source(&self) -> &PixelTensor {
        &self.source
    }

    pub fn target(&self) -> &PixelTensor {
        &self.target
    }

    pub fn domain(&self) -> PixelDomain {
        self.source.domain()
    }

    pub fn size(&self) -> usize {
        self.source.height()
    }

    pub fn combined(&self) -> PixelTensor {
        combine_pair(&self.source, &self.target).expect("checked at construction")
    }

    pub fn normalized(&self) -> Result<ImagePair> {
        Ok(Self {
            id: self.id.clone(),
            satellite: self.satellite,
            source: normalize(&self.source)?,
            target: normalize(&self.target)?,
        })
    }
}
