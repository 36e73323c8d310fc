//! Seeded per-class train/test splitting of labeled pixels.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::hsc::LabelMap;
use crate::error::{Error, Result};

/// How many labeled pixels per class go into the training set.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    /// Default per-class train count.
    pub per_class: usize,
    /// Class-specific overrides (class label -> train count).
    #[serde(default)]
    pub overrides: BTreeMap<i32, usize>,
    pub seed: u64,
}

impl SplitSpec {
    /// The same train count for every class.
    pub fn fixed(per_class: usize, seed: u64) -> Self {
        SplitSpec { per_class, overrides: BTreeMap::new(), seed }
    }

    /// 150 per class, except 10 each for the six scarce classes
    /// 1, 5, 7, 9, 15, 16 of the 16-class Indian Pines layout.
    pub fn indian_pines(seed: u64) -> Self {
        SplitSpec {
            per_class: 150,
            overrides: [1, 5, 7, 9, 15, 16].into_iter().map(|c| (c, 10)).collect(),
            seed,
        }
    }

    fn count_for(&self, class: i32) -> usize {
        self.overrides.get(&class).copied().unwrap_or(self.per_class)
    }
}

/// Flat pixel indices (row-major into `H·W`), disjoint by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Samples `spec`'s train count per class without replacement from the
/// labeled pixels; everything else labeled becomes test. Unlabeled (0)
/// pixels are ignored. Both index lists come back sorted.
pub fn split_per_class(labels: &LabelMap, spec: &SplitSpec) -> Result<Split> {
    labels.validate()?;
    if spec.per_class == 0 || spec.overrides.values().any(|&n| n == 0) {
        return Err(Error::config("per-class train count must be >= 1"));
    }
    let mut by_class: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &lab) in labels.labels.iter().enumerate() {
        if lab > 0 {
            by_class.entry(lab).or_default().push(i);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (&class, pixels) in &by_class {
        let want = spec.count_for(class);
        if pixels.len() < want + 1 {
            let name = labels
                .class_names
                .get(class as usize - 1)
                .map(String::as_str)
                .unwrap_or("?");
            return Err(Error::data(format!(
                "class {class} ({name}) has {} labeled pixels; {want} train + >=1 test required",
                pixels.len()
            )));
        }
        let mut chosen: Vec<usize> = sample(&mut rng, pixels.len(), want).into_vec();
        chosen.sort_unstable();
        let mut next = chosen.iter().peekable();
        for (j, &px) in pixels.iter().enumerate() {
            if next.peek() == Some(&&j) {
                train.push(px);
                next.next();
            } else {
                test.push(px);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
