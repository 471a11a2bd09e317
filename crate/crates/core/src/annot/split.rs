//! Deterministic grouped train/val/test splits.
//!
//! Images that show different sides of the same beets share a `group_id`
//! and must land in the same partition, so the split assigns whole groups.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnnotatedImage;
use crate::error::{Error, Result};

/// Three disjoint sets of image ids covering the whole dataset.
///
/// Ids are kept sorted, so serializing a split is byte-stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split always serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DatasetSplit> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("invalid split file: {e}")))
    }
}

/// Partition images into train/val/test by whole groups.
///
/// Groups are shuffled with a seeded RNG and then assigned one by one to
/// the partition with the largest remaining deficit against its target
/// image count (ties prefer train, then val). This keeps every achieved
/// count within one group's size of its target while staying a pure
/// function of `(images, ratios, seed)`.
pub fn make_split(
    images: &[AnnotatedImage],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (r_train, r_val, r_test) = ratios;
    for r in [r_train, r_val, r_test] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Validation(format!("ratio {r} outside [0, 1]")));
        }
    }
    if (r_train + r_val + r_test - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "ratios must sum to 1, got {}",
            r_train + r_val + r_test
        )));
    }

    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for image in images {
        groups
            .entry(image.group_id.as_str())
            .or_default()
            .push(image.image_id.as_str());
    }
    let mut groups: Vec<(&str, Vec<&str>)> = groups.into_iter().collect();

    let total = images.len() as f64;
    let targets = [r_train * total, r_val * total, r_test * total];
    // a partition holds whole images, so its capacity is the rounded-up target
    let capacity = targets.iter().cloned().fold(0.0, f64::max).ceil();
    if let Some((group_id, members)) = groups.iter().find(|(_, m)| m.len() as f64 > capacity) {
        return Err(Error::Validation(format!(
            "group `{group_id}` ({} images) is larger than any target partition",
            members.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);

    let mut sets: [Vec<String>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut assigned = [0.0f64; 3];
    for (_, members) in groups {
        let mut best = 0;
        for k in 1..3 {
            if targets[k] - assigned[k] > targets[best] - assigned[best] {
                best = k;
            }
        }
        assigned[best] += members.len() as f64;
        sets[best].extend(members.iter().map(|id| id.to_string()));
    }
    let [mut train, mut val, mut test] = sets;
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    Ok(DatasetSplit { train, val, test })
}
