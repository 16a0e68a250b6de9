//! Seeded fixture generators: planted factor models, planted attributes,
//! label-independent metadata text and imbalanced truth sets.
//!
//! The generators know their own ground truth, which makes them usable as
//! oracles for end-to-end checks of training, expansion and noise detection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};

use crate::dataset::{IdTable, Label, LabelSet, MetadataCorpus, RatingDataset};
use crate::error::Result;
use crate::factor::{ModelKind, PerceptualSpace};

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub n_items: usize,
    pub n_users: usize,
    pub dim: usize,
    /// Probability that a given item/user pair is rated.
    pub density: f64,
    /// Standard deviation of the Gaussian rating noise.
    pub noise: f64,
    /// Standard deviation of every planted coordinate.
    pub coord_sd: f64,
    pub bias_sd: f64,
    pub mu: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_items: 200,
            n_users: 500,
            dim: 4,
            density: 0.2,
            noise: 0.1,
            coord_sd: 0.35,
            bias_sd: 0.5,
            mu: 3.5,
            seed: 1,
        }
    }
}

/// A planted Euclidean-embedding model and the noisy ratings drawn from it.
#[derive(Clone, Debug)]
pub struct Planted {
    pub truth: PerceptualSpace,
    pub ratings: RatingDataset,
}

pub fn item_id(i: usize) -> String {
    format!("m{i:05}")
}

pub fn user_id(u: usize) -> String {
    format!("u{u:06}")
}

/// Samples a planted model and observes each pair with probability `density`,
/// adding Gaussian noise to the exact estimate.
pub fn planted_ratings(cfg: &PlantedConfig) -> Result<Planted> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coord = Normal::new(0.0, cfg.coord_sd).expect("coord_sd must be finite and non-negative");
    let bias = Normal::new(0.0, cfg.bias_sd).expect("bias_sd must be finite and non-negative");
    let noise = Normal::new(0.0, cfg.noise).expect("noise must be finite and non-negative");

    let items: IdTable = (0..cfg.n_items).map(item_id).collect();
    let users: IdTable = (0..cfg.n_users).map(user_id).collect();
    let mut truth = PerceptualSpace::zeros(ModelKind::Euclidean, cfg.dim, cfg.mu, items, users);
    for x in truth.item_coords.iter_mut().chain(truth.user_coords.iter_mut()) {
        *x = coord.sample(&mut rng);
    }
    for x in truth.item_bias.iter_mut().chain(truth.user_bias.iter_mut()) {
        *x = bias.sample(&mut rng);
    }

    let mut triples = Vec::new();
    for m in 0..cfg.n_items {
        for u in 0..cfg.n_users {
            if rng.random::<f64>() < cfg.density {
                let r = truth.predict(m, u)? + noise.sample(&mut rng);
                triples.push((m, u, r));
            }
        }
    }
    let lo = triples.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
    let hi = triples.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
    let ids: Vec<(String, String, f64)> = triples
        .into_iter()
        .map(|(m, u, r)| (item_id(m), user_id(u), r))
        .collect();
    let (ratings, _) =
        RatingDataset::from_triples(ids.iter().map(|(m, u, r)| (m.as_str(), u.as_str(), *r)), lo.floor(), hi.ceil())?;
    Ok(Planted { truth, ratings })
}

/// Positive exactly when the planted item coordinate `axis` is positive.
pub fn planted_attribute(truth: &PerceptualSpace, axis: usize, name: &str) -> LabelSet {
    LabelSet::from_labels(
        name,
        truth
            .items
            .iter()
            .enumerate()
            .map(|(i, id)| (id.to_owned(), Label::from_bool(truth.item_row(i)[axis] > 0.0))),
    )
}

/// Random descriptions drawn from a Zipf-distributed vocabulary,
/// independent of anything else about the items.
pub fn random_metadata<'a>(
    ids: impl IntoIterator<Item = &'a str>,
    vocabulary: usize,
    words_per_doc: usize,
    seed: u64,
) -> MetadataCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = Zipf::new(vocabulary as f64, 1.1).expect("vocabulary must be non-empty");
    ids.into_iter()
        .map(|id| {
            let len = rng.random_range(words_per_doc / 2..=words_per_doc * 3 / 2).max(1);
            let words: Vec<String> = (0..len)
                .map(|_| format!("w{}", zipf.sample(&mut rng) as usize))
                .collect();
            (id.to_owned(), words.join(" "))
        })
        .collect()
}

/// `n` items of which `round(positive_rate · n)` are positive, at random positions.
pub fn random_truth(n: usize, positive_rate: f64, seed: u64, name: &str) -> LabelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives = (positive_rate * n as f64).round() as usize;
    let chosen = rand::seq::index::sample(&mut rng, n, positives);
    let mut labels = vec![Label::Negative; n];
    for i in chosen {
        labels[i] = Label::Positive;
    }
    LabelSet::from_labels(name, labels.into_iter().enumerate().map(|(i, l)| (item_id(i), l)))
}
