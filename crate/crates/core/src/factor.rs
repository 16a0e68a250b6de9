//! Biased Euclidean-embedding factor model and the plain SVD baseline,
//! trained by stochastic gradient descent.
//!
//! Euclidean kind: `r̂ = μ + δ_m + δ_u − ‖a_m − b_u‖²`, per-rating cost
//! `(r − r̂)² + λ(‖a_m − b_u‖⁴ + δ_m² + δ_u²)`.
//! SVD kind: `r̂ = a_m · b_u`, per-rating cost `(r − r̂)² + λ(‖a_m‖² + ‖b_u‖²)`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{IdTable, RatingDataset};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Euclidean,
    Svd,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Euclidean => "EUCLIDEAN",
            ModelKind::Svd => "SVD",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EUCLIDEAN" => Ok(ModelKind::Euclidean),
            "SVD" => Ok(ModelKind::Svd),
            _ => Err(Error::InvalidArgument(format!("unknown model kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Half-width of the uniform initialisation; `None` means `0.1 / √dim`.
    pub init_scale: Option<f64>,
    pub seed: u64,
    pub kind: ModelKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            lambda: 0.02,
            learning_rate: 0.005,
            epochs: 30,
            init_scale: None,
            seed: 0,
            kind: ModelKind::Euclidean,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_owned()));
        if self.dim == 0 {
            return bad("dimension must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad("init scale must be positive");
            }
        }
        Ok(())
    }

    pub fn effective_init_scale(&self) -> f64 {
        self.init_scale.unwrap_or(0.1 / (self.dim as f64).sqrt())
    }
}

/// Trained item and user coordinates with biases.
///
/// Coordinates are stored row-major: row `i` of the item matrix is
/// `item_coords[i * dim..(i + 1) * dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptualSpace {
    pub kind: ModelKind,
    pub dim: usize,
    pub mu: f64,
    pub items: IdTable,
    pub users: IdTable,
    pub item_coords: Vec<f64>,
    pub user_coords: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub user_bias: Vec<f64>,
}

impl PerceptualSpace {
    /// A space with all coordinates and biases zero.
    pub fn zeros(kind: ModelKind, dim: usize, mu: f64, items: IdTable, users: IdTable) -> Self {
        let (n_m, n_u) = (items.len(), users.len());
        Self {
            kind,
            dim,
            mu,
            items,
            users,
            item_coords: vec![0.0; n_m * dim],
            user_coords: vec![0.0; n_u * dim],
            item_bias: vec![0.0; n_m],
            user_bias: vec![0.0; n_u],
        }
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn item_row(&self, item: usize) -> &[f64] {
        &self.item_coords[item * self.dim..(item + 1) * self.dim]
    }

    pub fn user_row(&self, user: usize) -> &[f64] {
        &self.user_coords[user * self.dim..(user + 1) * self.dim]
    }

    pub fn item_row_mut(&mut self, item: usize) -> &mut [f64] {
        &mut self.item_coords[item * self.dim..(item + 1) * self.dim]
    }

    pub fn user_row_mut(&mut self, user: usize) -> &mut [f64] {
        &mut self.user_coords[user * self.dim..(user + 1) * self.dim]
    }

    /// Checks that every matrix and bias vector matches the id tables.
    pub fn check_shape(&self) -> Result<()> {
        let (n_m, n_u, d) = (self.n_items(), self.n_users(), self.dim);
        if self.item_coords.len() != n_m * d
            || self.user_coords.len() != n_u * d
            || self.item_bias.len() != n_m
            || self.user_bias.len() != n_u
        {
            return Err(Error::Shape(format!(
                "expected {n_m}x{d} items and {n_u}x{d} users with matching biases"
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.mu.is_finite()
            && [&self.item_coords, &self.user_coords, &self.item_bias, &self.user_bias]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn check_index(&self, item: usize, user: usize) -> Result<()> {
        if item >= self.n_items() {
            return Err(Error::IndexOutOfRange {
                what: "items",
                index: item,
                len: self.n_items(),
            });
        }
        if user >= self.n_users() {
            return Err(Error::IndexOutOfRange {
                what: "users",
                index: user,
                len: self.n_users(),
            });
        }
        Ok(())
    }

    /// Estimated rating of `item` by `user`. Not clamped to any scale.
    pub fn predict(&self, item: usize, user: usize) -> Result<f64> {
        self.check_index(item, user)?;
        Ok(self.predict_unchecked(item, user))
    }

    fn predict_unchecked(&self, item: usize, user: usize) -> f64 {
        estimate(
            self.kind,
            self.mu,
            self.item_row(item),
            self.user_row(user),
            self.item_bias[item],
            self.user_bias[user],
        )
    }

    fn term(&self, item: usize, user: usize, score: f64, lambda: f64) -> f64 {
        rating_term(
            self.kind,
            self.mu,
            lambda,
            score,
            self.item_row(item),
            self.user_row(user),
            self.item_bias[item],
            self.user_bias[user],
        )
    }

    fn check_compatible(&self, ds: &RatingDataset) -> Result<()> {
        if ds.n_items() > self.n_items() || ds.n_users() > self.n_users() {
            return Err(Error::Shape(format!(
                "dataset has {}x{} items/users, space has {}x{}",
                ds.n_items(),
                ds.n_users(),
                self.n_items(),
                self.n_users()
            )));
        }
        Ok(())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn estimate(kind: ModelKind, mu: f64, a: &[f64], b: &[f64], dm: f64, du: f64) -> f64 {
    match kind {
        ModelKind::Euclidean => mu + dm + du - squared_distance(a, b),
        ModelKind::Svd => dot(a, b),
    }
}

/// Cost contributed by a single observed rating.
#[allow(clippy::too_many_arguments)]
pub fn rating_term(kind: ModelKind, mu: f64, lambda: f64, score: f64, a: &[f64], b: &[f64], dm: f64, du: f64) -> f64 {
    match kind {
        ModelKind::Euclidean => {
            let s = squared_distance(a, b);
            let e = score - (mu + dm + du - s);
            e * e + lambda * (s * s + dm * dm + du * du)
        }
        ModelKind::Svd => {
            let e = score - dot(a, b);
            e * e + lambda * (dot(a, a) + dot(b, b))
        }
    }
}

/// Per-rating term together with its gradient. Gradients with respect to the
/// coordinates are written into `grad_a` / `grad_b`; the return value is
/// `(term, ∂/∂δ_m, ∂/∂δ_u)`.
#[allow(clippy::too_many_arguments)]
pub fn rating_term_grad(
    kind: ModelKind,
    mu: f64,
    lambda: f64,
    score: f64,
    a: &[f64],
    b: &[f64],
    dm: f64,
    du: f64,
    grad_a: &mut [f64],
    grad_b: &mut [f64],
) -> (f64, f64, f64) {
    match kind {
        ModelKind::Euclidean => {
            let s = squared_distance(a, b);
            let e = score - (mu + dm + du - s);
            let coef = 4.0 * (e + lambda * s);
            for k in 0..a.len() {
                let diff = a[k] - b[k];
                grad_a[k] = coef * diff;
                grad_b[k] = -coef * diff;
            }
            let value = e * e + lambda * (s * s + dm * dm + du * du);
            (value, -2.0 * e + 2.0 * lambda * dm, -2.0 * e + 2.0 * lambda * du)
        }
        ModelKind::Svd => {
            let e = score - dot(a, b);
            for k in 0..a.len() {
                grad_a[k] = -2.0 * e * b[k] + 2.0 * lambda * a[k];
                grad_b[k] = -2.0 * e * a[k] + 2.0 * lambda * b[k];
            }
            let value = e * e + lambda * (dot(a, a) + dot(b, b));
            (value, 0.0, 0.0)
        }
    }
}

/// Regularised training cost of `space` over the observed ratings of `ds`,
/// summed in dataset order.
pub fn cost(space: &PerceptualSpace, ds: &RatingDataset, lambda: f64) -> Result<f64> {
    space.check_compatible(ds)?;
    Ok(ds
        .ratings
        .iter()
        .map(|r| space.term(r.item as usize, r.user as usize, r.score, lambda))
        .sum())
}

/// Root-mean-square prediction error over `ds`.
pub fn rmse(space: &PerceptualSpace, ds: &RatingDataset) -> Result<f64> {
    space.check_compatible(ds)?;
    if ds.is_empty() {
        return Err(Error::InvalidArgument("rmse of an empty dataset".into()));
    }
    let sse: f64 = ds
        .ratings
        .iter()
        .map(|r| {
            let e = r.score - space.predict_unchecked(r.item as usize, r.user as usize);
            e * e
        })
        .sum();
    Ok((sse / ds.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Regularised cost after each epoch.
    pub epoch_costs: Vec<f64>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub test_rmse: Option<f64>,
    pub wall_time: Duration,
}

/// Trains a space on `ds` by plain SGD with a fixed learning rate.
pub fn train(
    ds: &RatingDataset,
    cfg: &TrainConfig,
    test: Option<&RatingDataset>,
) -> Result<(PerceptualSpace, TrainReport)> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut space = PerceptualSpace::zeros(cfg.kind, cfg.dim, ds.mean_score(), ds.items.clone(), ds.users.clone());
    let scale = cfg.effective_init_scale();
    for x in space.item_coords.iter_mut().chain(space.user_coords.iter_mut()) {
        *x = rng.random_range(-scale..=scale);
    }

    let initial_cost = cost(&space, ds, cfg.lambda)?;
    let mut epoch_costs = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut grad_a = vec![0.0; cfg.dim];
    let mut grad_b = vec![0.0; cfg.dim];
    let lr = cfg.learning_rate;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let r = ds.ratings[idx];
            let (m, u) = (r.item as usize, r.user as usize);
            let (_, g_dm, g_du) = rating_term_grad(
                space.kind,
                space.mu,
                cfg.lambda,
                r.score,
                space.item_row(m),
                space.user_row(u),
                space.item_bias[m],
                space.user_bias[u],
                &mut grad_a,
                &mut grad_b,
            );
            space.item_bias[m] -= lr * g_dm;
            space.user_bias[u] -= lr * g_du;
            for (x, g) in space.item_row_mut(m).iter_mut().zip(&grad_a) {
                *x -= lr * g;
            }
            for (x, g) in space.user_row_mut(u).iter_mut().zip(&grad_b) {
                *x -= lr * g;
            }
        }
        if !space.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        let c = cost(&space, ds, cfg.lambda)?;
        if !c.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epoch_costs.push(c);
    }

    let test_rmse = test.map(|t| rmse(&space, t)).transpose()?;
    let final_cost = *epoch_costs.last().expect("epochs >= 1");
    let report = TrainReport {
        epoch_costs,
        initial_cost,
        final_cost,
        test_rmse,
        wall_time: start.elapsed(),
    };
    Ok((space, report))
}

/// Compares analytic per-rating gradients against central finite differences
/// at `points` random parameter settings and returns the largest error
/// `|analytic − numeric| / max(1, |numeric|)` over all parameter blocks.
pub fn gradient_check(cfg: &TrainConfig, points: usize, step: f64, seed: u64) -> f64 {
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut grad_a = vec![0.0; d];
    let mut grad_b = vec![0.0; d];
    let rel = |analytic: f64, numeric: f64| (analytic - numeric).abs() / numeric.abs().max(1.0);

    for _ in 0..points {
        let mut a: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dm: f64 = rng.random_range(-1.0..1.0);
        let du: f64 = rng.random_range(-1.0..1.0);
        let mu: f64 = rng.random_range(1.0..5.0);
        let r: f64 = rng.random_range(1.0..5.0);
        let f = |a: &[f64], b: &[f64], dm: f64, du: f64| rating_term(cfg.kind, mu, cfg.lambda, r, a, b, dm, du);

        let (_, g_dm, g_du) = rating_term_grad(cfg.kind, mu, cfg.lambda, r, &a, &b, dm, du, &mut grad_a, &mut grad_b);

        let num_dm = (f(&a, &b, dm + step, du) - f(&a, &b, dm - step, du)) / (2.0 * step);
        let num_du = (f(&a, &b, dm, du + step) - f(&a, &b, dm, du - step)) / (2.0 * step);
        worst = worst.max(rel(g_dm, num_dm)).max(rel(g_du, num_du));

        for k in 0..d {
            let orig = a[k];
            a[k] = orig + step;
            let plus = f(&a, &b, dm, du);
            a[k] = orig - step;
            let minus = f(&a, &b, dm, du);
            a[k] = orig;
            worst = worst.max(rel(grad_a[k], (plus - minus) / (2.0 * step)));

            let orig = b[k];
            b[k] = orig + step;
            let plus = f(&a, &b, dm, du);
            b[k] = orig - step;
            let minus = f(&a, &b, dm, du);
            b[k] = orig;
            worst = worst.max(rel(grad_b[k], (plus - minus) / (2.0 * step)));
        }
    }
    worst
}
