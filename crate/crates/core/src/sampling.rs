//! Participant-level sampling protocols.
//!
//! All sampling is uniform without replacement over participants and takes
//! an explicit seed. Sub-datasets keep the original participant and choice
//! order, so the output depends only on which participants were drawn.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::seq::SliceRandom;

use crate::error::CoreError;
use crate::model::{Attribute, PreferenceDataset};
use crate::rng::{derive_seed, label_stream, rng_from_seed};

/// Round half up: `round_half_up(13.5) == 14`, `round_half_up(13.35) == 13`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// A probabilistic sample of `fraction` of the participants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    fraction: f64,
    seed: u64,
}

impl SampleSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self, CoreError> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(CoreError::InvalidFraction(fraction));
        }
        Ok(Self { fraction, seed })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `round(fraction × population)`, at least 1 and at most `population`.
    pub fn sample_size(&self, population: usize) -> usize {
        round_half_up(self.fraction * population as f64)
            .max(1)
            .min(population)
    }
}

fn draw(population: usize, amount: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut picked = index::sample(&mut rng, population, amount).into_vec();
    picked.sort_unstable();
    picked
}

pub fn sample_participants(dataset: &PreferenceDataset, spec: &SampleSpec) -> PreferenceDataset {
    let n = dataset.participants().len();
    let k = spec.sample_size(n);
    dataset.restrict_to_indices(&draw(n, k, spec.seed))
}

/// Splits participants into train and test. The train side receives
/// `round(fraction × population)` participants (clamped so both sides are
/// non-empty when the population has at least two participants).
pub fn split_train_test(
    dataset: &PreferenceDataset,
    fraction: f64,
    seed: u64,
) -> Result<(PreferenceDataset, PreferenceDataset), CoreError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CoreError::InvalidFraction(fraction));
    }
    let n = dataset.participants().len();
    let mut k = round_half_up(fraction * n as f64);
    if n >= 2 {
        k = k.clamp(1, n - 1);
    } else {
        k = k.min(n);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let (train, test) = order.split_at(k);
    Ok((
        dataset.restrict_to_indices(train),
        dataset.restrict_to_indices(test),
    ))
}

/// Two non-overlapping samples of exactly `size` participants each.
pub fn disjoint_pair(
    dataset: &PreferenceDataset,
    size: usize,
    seed: u64,
) -> Result<(PreferenceDataset, PreferenceDataset), CoreError> {
    let n = dataset.participants().len();
    if size == 0 || 2 * size > n {
        return Err(CoreError::SizeTooLarge {
            requested: size,
            population: n,
        });
    }
    let mut rng = rng_from_seed(seed);
    let picked = index::sample(&mut rng, n, 2 * size).into_vec();
    let (a, b) = picked.split_at(size);
    Ok((
        dataset.restrict_to_indices(a),
        dataset.restrict_to_indices(b),
    ))
}

/// Drops participants lacking `attribute`, then downsamples every category to
/// the size of the smallest one.
///
/// For enumerated attributes every category of the enumeration must be
/// present; free-text attributes (city, state) use the observed values.
pub fn balance_by_attribute(
    dataset: &PreferenceDataset,
    attribute: Attribute,
    seed: u64,
) -> Result<PreferenceDataset, CoreError> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    if let Some(levels) = attribute.levels() {
        for level in levels {
            groups.insert((*level).to_owned(), Vec::new());
        }
    }
    for (i, p) in dataset.participants().iter().enumerate() {
        if let Some(cat) = p.demographics.category(attribute) {
            groups.entry(cat).or_default().push(i);
        }
    }
    if let Some((cat, _)) = groups.iter().find(|(_, members)| members.is_empty()) {
        return Err(CoreError::EmptyCategory {
            attribute,
            category: cat.clone(),
        });
    }
    if groups.is_empty() {
        return Err(CoreError::EmptyCategory {
            attribute,
            category: String::from("<any>"),
        });
    }
    let smallest = groups.values().map(Vec::len).min().unwrap_or(0);
    let mut keep = Vec::with_capacity(smallest * groups.len());
    for (cat, members) in &groups {
        let mut rng = rng_from_seed(derive_seed(seed, label_stream(cat)));
        keep.extend(
            index::sample(&mut rng, members.len(), smallest)
                .into_iter()
                .map(|j| members[j]),
        );
    }
    Ok(dataset.restrict_to_indices(&keep))
}
