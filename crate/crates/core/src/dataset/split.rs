use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{RawPair, Satellite};
use crate::error::{Error, IoContext, Result};
use crate::nn::{derive_seed, seeded_rng};

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const DEFAULT: SplitFractions = SplitFractions {
        train: 0.80,
        val: 0.15,
        test: 0.05,
    };

    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = Self { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl std::str::FromStr for SplitFractions {
    type Err = Error;

    /// Parses `"0.8,0.15,0.05"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("fraction {p:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match parts[..] {
            [a, b, c] => Self::new(a, b, c),
            _ => Err(Error::InvalidArgument(format!(
                "expected three comma-separated fractions, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Quotas for one stratum of `n` pairs: the train share is floored, the test
/// share is rounded (at least one pair when the test fraction is non-zero),
/// and validation takes the remainder.
pub fn stratum_quotas(n: usize, fractions: &SplitFractions) -> SplitCounts {
    if n == 0 {
        return SplitCounts::default();
    }
    let train = ((n as f64 * fractions.train) + 1e-9).floor() as usize;
    let mut test = (n as f64 * fractions.test).round() as usize;
    if fractions.test > 0.0 {
        test = test.max(1);
    }
    let train = train.min(n);
    let test = test.min(n - train);
    SplitCounts {
        train,
        val: n - train - test,
        test,
    }
}

/// Reproducible, satellite-stratified split of pair identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub seed: u64,
    pub fractions: SplitFractions,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub per_satellite_counts: BTreeMap<Satellite, SplitCounts>,
    pub satellites: BTreeMap<String, Satellite>,
}

impl SplitManifest {
    pub fn totals(&self) -> SplitCounts {
        SplitCounts {
            train: self.train.len(),
            val: self.val.len(),
            test: self.test.len(),
        }
    }

    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("manifest {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Splits `pairs` per satellite stratum with [`stratum_quotas`]; membership
/// inside a stratum is a seeded shuffle of the identifiers in sorted order, so
/// the result does not depend on input order.
pub fn split_dataset(
    pairs: &[RawPair],
    fractions: SplitFractions,
    seed: u64,
) -> Result<SplitManifest> {
    fractions.validate()?;
    let mut seen = BTreeSet::new();
    let mut strata: BTreeMap<Satellite, Vec<&str>> = BTreeMap::new();
    let mut satellites = BTreeMap::new();
    for p in pairs {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Data(format!("duplicate pair identifier {:?}", p.id)));
        }
        strata.entry(p.satellite).or_default().push(&p.id);
        satellites.insert(p.id.clone(), p.satellite);
    }

    let mut manifest = SplitManifest {
        seed,
        fractions,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        per_satellite_counts: BTreeMap::new(),
        satellites,
    };
    for (index, satellite) in Satellite::ALL.into_iter().enumerate() {
        let mut ids = strata.remove(&satellite).unwrap_or_default();
        let quotas = stratum_quotas(ids.len(), &fractions);
        manifest.per_satellite_counts.insert(satellite, quotas);
        ids.sort_unstable();
        let mut rng = seeded_rng(derive_seed(seed, "split", index as u64));
        ids.shuffle(&mut rng);
        let (train, rest) = ids.split_at(quotas.train);
        let (val, test) = rest.split_at(quotas.val);
        manifest.train.extend(train.iter().map(|s| s.to_string()));
        manifest.val.extend(val.iter().map(|s| s.to_string()));
        manifest.test.extend(test.iter().map(|s| s.to_string()));
    }
    manifest.train.sort();
    manifest.val.sort();
    manifest.test.sort();
    Ok(manifest)
}
