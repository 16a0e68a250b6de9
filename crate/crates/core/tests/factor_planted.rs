use perceptual_space::dataset::{split_holdout, RatingDataset};
use perceptual_space::factor::{cost, rmse, train, ModelKind, PerceptualSpace, TrainConfig};
use perceptual_space::synthetic::{planted_ratings, PlantedConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct transcription of the regularised objective, written without the library's helpers.
fn naive_cost(s: &PerceptualSpace, ds: &RatingDataset, lambda: f64) -> f64 {
    let mut total = 0.0;
    for r in &ds.ratings {
        let (m, u) = (r.item as usize, r.user as usize);
        let a = &s.item_coords[m * s.dim..(m + 1) * s.dim];
        let b = &s.user_coords[u * s.dim..(u + 1) * s.dim];
        total += match s.kind {
            ModelKind::Euclidean => {
                let d2: f64 = (0..s.dim).map(|k| (a[k] - b[k]).powi(2)).sum();
                let est = s.mu + s.item_bias[m] + s.user_bias[u] - d2;
                (r.score - est).powi(2) + lambda * (d2 * d2 + s.item_bias[m].powi(2) + s.user_bias[u].powi(2))
            }
            ModelKind::Svd => {
                let dot: f64 = (0..s.dim).map(|k| a[k] * b[k]).sum();
                let na: f64 = a.iter().map(|v| v * v).sum();
                let nb: f64 = b.iter().map(|v| v * v).sum();
                (r.score - dot).powi(2) + lambda * (na + nb)
            }
        };
    }
    total
}

fn small_planted() -> RatingDataset {
    planted_ratings(&PlantedConfig {
        n_items: 40,
        n_users: 60,
        density: 0.3,
        ..PlantedConfig::default()
    })
    .unwrap()
    .ratings
}

#[test]
fn cost_matches_naive_oracle() {
    let ds = small_planted();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in [ModelKind::Euclidean, ModelKind::Svd] {
        let mut s = PerceptualSpace::zeros(kind, 5, ds.mean_score(), ds.items.clone(), ds.users.clone());
        for v in s.item_coords.iter_mut().chain(s.user_coords.iter_mut()) {
            *v = rng.random_range(-0.7..0.7);
        }
        for v in s.item_bias.iter_mut().chain(s.user_bias.iter_mut()) {
            *v = rng.random_range(-1.0..1.0);
        }
        for lambda in [0.0, 0.02, 1.3] {
            let a = cost(&s, &ds, lambda).unwrap();
            let b = naive_cost(&s, &ds, lambda);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn report_costs_use_public_cost() {
    let ds = small_planted();
    let cfg = TrainConfig { dim: 3, epochs: 4, ..TrainConfig::default() };
    let (space, report) = train(&ds, &cfg, None).unwrap();
    assert_eq!(report.epoch_costs.len(), 4);
    assert_eq!(report.final_cost, cost(&space, &ds, cfg.lambda).unwrap());
    assert_eq!(*report.epoch_costs.last().unwrap(), report.final_cost);
    assert!((space.mu - ds.mean_score()).abs() == 0.0);
}

#[test]
fn training_is_bitwise_deterministic() {
    let ds = small_planted();
    let cfg = TrainConfig { dim: 4, epochs: 5, seed: 9, ..TrainConfig::default() };
    let (a, _) = train(&ds, &cfg, None).unwrap();
    let (b, _) = train(&ds, &cfg, None).unwrap();
    assert_eq!(a, b);
    let (c, _) = train(&ds, &TrainConfig { seed: 10, ..cfg }, None).unwrap();
    assert_ne!(a, c);
}

#[test]
fn planted_recovery_and_monotone_default_cost() {
    let planted = planted_ratings(&PlantedConfig::default()).unwrap();
    let (train_set, test_set) = split_holdout(&planted.ratings, 0.1, 3).unwrap();

    let defaults = TrainConfig { dim: 4, seed: 1, ..TrainConfig::default() };
    let (_, report) = train(&train_set, &defaults, None).unwrap();
    let mut previous = report.initial_cost;
    for c in &report.epoch_costs {
        assert!(*c <= previous, "cost rose from {previous} to {c}");
        previous = *c;
    }
    let (_, one) = train(&train_set, &TrainConfig { epochs: 1, ..defaults.clone() }, None).unwrap();
    assert!(one.final_cost <= one.initial_cost);

    let tuned = TrainConfig {
        lambda: 0.002,
        learning_rate: 0.003,
        epochs: 120,
        ..defaults
    };
    let (space, report) = train(&train_set, &tuned, Some(&test_set)).unwrap();
    let held_out = report.test_rmse.unwrap();
    assert_eq!(held_out, rmse(&space, &test_set).unwrap());
    assert!(held_out <= 1.3 * 0.1, "held-out rmse {held_out}");
}
