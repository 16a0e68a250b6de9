//! Soft-margin RBF support-vector classification and ε-insensitive
//! regression, solved in the dual by two-variable SMO steps.
//!
//! Both problems are cast as
//!
//! ```text
//! min ½ αᵀQα + pᵀα   s.t.  yᵀα = 0,  0 ≤ α_t ≤ C,  y_t ∈ {−1, +1}
//! ```
//!
//! with `Q_ts = y_t y_s K(x_t, x_s)`. Classification uses `p = −1`;
//! regression doubles the variables into `(α, α*)` with
//! `p = (ε − z, ε + z)` and `y = (+1, −1)`.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::factor::squared_distance;
use crate::metrics::{gmean, Confusion};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    /// Box constraint.
    pub c: f64,
    /// RBF width in `exp(−γ‖x − y‖²)`.
    pub gamma: f64,
    /// Half-width of the insensitive tube (regression only).
    pub epsilon_tube: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl KernelConfig {
    /// Defaults for `dim`-dimensional inputs: `C = 1`, `γ = 1/dim`.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            c: 1.0,
            gamma: 1.0 / dim.max(1) as f64,
            epsilon_tube: 0.1,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.c) && positive(self.gamma) && positive(self.epsilon_tube) && positive(self.tolerance)) {
            return Err(Error::InvalidArgument(format!("kernel parameters must be positive: {self:?}")));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// The C × γ log grid `{0.1, 1, 10, 100} × {0.01, 0.1, 1, 10}/dim`.
pub fn default_grid(dim: usize) -> Vec<KernelConfig> {
    let base = KernelConfig::for_dim(dim);
    let mut grid = Vec::with_capacity(16);
    for c in [0.1, 1.0, 10.0, 100.0] {
        for g in [0.01, 0.1, 1.0, 10.0] {
            grid.push(KernelConfig {
                c,
                gamma: g / dim.max(1) as f64,
                ..base
            });
        }
    }
    grid
}

pub fn rbf(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(x, y)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Classifier,
    Regressor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportVector {
    pub x: Vec<f64>,
    /// Class sign (±1) for classifiers, target value for regressors.
    pub y: f64,
    /// Dual weight: `α` for classifiers, `α − α*` for regressors.
    pub alpha: f64,
    /// Weight of `K(x, ·)` in the decision function.
    pub coef: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel {
    pub mode: Mode,
    pub support: Vec<SupportVector>,
    pub bias: f64,
    pub gamma: f64,
    pub dim: usize,
    /// Full dual solution in training order (`2n` entries `α ‖ α*` for regressors).
    pub dual: Vec<f64>,
    /// Dual objective `½ αᵀQα + pᵀα` at the solution.
    pub objective: f64,
    /// Maximal KKT violation when the solver stopped.
    pub violation: f64,
    pub iterations: usize,
}

impl KernelModel {
    /// `Σ coef_i K(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!("input has dimension {}, model expects {}", x.len(), self.dim)));
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|sv| sv.coef * rbf(&sv.x, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    /// Sign of the decision value (zero counts as negative) and the value itself.
    pub fn predict_label(&self, x: &[f64]) -> Result<(Label, f64)> {
        let margin = self.decision(x)?;
        Ok((Label::from_bool(margin > 0.0), margin))
    }

    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        self.decision(x)
    }

    /// Decision values for many inputs, preserving order.
    pub fn decision_batch<X: AsRef<[f64]> + Sync>(&self, xs: &[X], exec: Exec) -> Result<Vec<f64>> {
        if let Some(bad) = xs.iter().find(|x| x.as_ref().len() != self.dim) {
            return Err(Error::Shape(format!(
                "input has dimension {}, model expects {}",
                bad.as_ref().len(),
                self.dim
            )));
        }
        Ok(exec.map(xs, |x| self.decision_unchecked(x.as_ref())))
    }
}

const TAU: f64 = 1e-12;
/// Cached kernel rows are capped at roughly this many bytes.
const CACHE_BYTES: usize = 256 << 20;

/// Kernel rows over the training points, computed on demand.
struct KernelRows<'a, X> {
    points: &'a [X],
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    fifo: VecDeque<usize>,
    capacity: usize,
}

impl<'a, X: AsRef<[f64]>> KernelRows<'a, X> {
    fn new(points: &'a [X], gamma: f64) -> Self {
        let n = points.len();
        let capacity = (CACHE_BYTES / (8 * n.max(1))).clamp(2, n.max(2));
        Self {
            points,
            gamma,
            rows: vec![None; n],
            fifo: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.fifo.len() == self.capacity {
                let old = self.fifo.pop_front().expect("non-empty");
                self.rows[old] = None;
            }
            let xi = self.points[i].as_ref();
            let row = self.points.iter().map(|xj| rbf(xi, xj.as_ref(), self.gamma)).collect();
            self.rows[i] = Some(row);
            self.fifo.push_back(i);
        }
        self.rows[i].as_deref().expect("just filled")
    }

    /// Rows `i` and `j` together; capacity is at least two, so filling one never evicts the other twice.
    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.row(i);
        self.row(j);
        if self.rows[i].is_none() {
            self.row(i);
        }
        (
            self.rows[i].as_deref().expect("filled"),
            self.rows[j].as_deref().expect("filled"),
        )
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    objective: f64,
    violation: f64,
    iterations: usize,
}

const SHRINK_EVERY: usize = 1000;

fn select_up(active: &[usize], y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for &t in active {
        let can_rise = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
        if can_rise && -y[t] * grad[t] > best.0 {
            best = (-y[t] * grad[t], t);
        }
    }
    best
}

fn extremes(active: &[usize], y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> (f64, f64) {
    let (mut up_max, mut low_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &t in active {
        let yg = y[t] * grad[t];
        let (can_rise, can_fall) = if y[t] > 0.0 {
            (alpha[t] < c, alpha[t] > 0.0)
        } else {
            (alpha[t] > 0.0, alpha[t] < c)
        };
        if can_rise {
            up_max = up_max.max(-yg);
        }
        if can_fall {
            low_max = low_max.max(yg);
        }
    }
    (up_max, low_max)
}

/// A variable pinned at a bound whose gradient rules it out of every violating pair.
fn shrinkable(t: usize, y: &[f64], alpha: &[f64], grad: &[f64], c: f64, up_max: f64, low_max: f64) -> bool {
    let yg = y[t] * grad[t];
    let at_upper = alpha[t] >= c;
    let at_lower = alpha[t] <= 0.0;
    // only in the low set when (y > 0, upper) or (y < 0, lower); only in the up set otherwise
    match (y[t] > 0.0, at_upper, at_lower) {
        (true, true, _) | (false, _, true) => yg + up_max < 0.0,
        (true, false, true) | (false, true, false) => -yg + low_max < 0.0,
        _ => false,
    }
}

/// Recomputes the gradient of every inactive variable and reactivates all of them.
fn restore<X: AsRef<[f64]>>(
    kernel: &mut KernelRows<'_, X>,
    active: &mut Vec<usize>,
    y: &[f64],
    p: &[f64],
    alpha: &[f64],
    grad: &mut [f64],
    point: &[usize],
) {
    let l = y.len();
    if active.len() == l {
        return;
    }
    let mut is_active = vec![false; l];
    for &t in active.iter() {
        is_active[t] = true;
    }
    let inactive: Vec<usize> = (0..l).filter(|&t| !is_active[t]).collect();
    for &t in &inactive {
        grad[t] = p[t];
    }
    for s in 0..l {
        if alpha[s] == 0.0 {
            continue;
        }
        let w = alpha[s] * y[s];
        let row = kernel.row(point[s]);
        for &t in &inactive {
            grad[t] += y[t] * row[point[t]] * w;
        }
    }
    *active = (0..l).collect();
}

/// SMO with second-order working-set selection. Variable `t` maps to kernel
/// point `t % n_points`.
fn solve<X: AsRef<[f64]>>(points: &[X], y: &[f64], p: &[f64], cfg: &KernelConfig) -> Result<Solution> {
    solve_from(points, y, p, cfg, None)
}

/// [`solve`] started from a feasible `start` instead of zero.
fn solve_from<X: AsRef<[f64]>>(
    points: &[X],
    y: &[f64],
    p: &[f64],
    cfg: &KernelConfig,
    start: Option<Vec<f64>>,
) -> Result<Solution> {
    let l = y.len();
    let n = points.len();
    let c = cfg.c;
    let mut kernel = KernelRows::new(points, cfg.gamma);
    let point: Vec<usize> = (0..l).map(|t| t % n).collect();
    let mut alpha = start.unwrap_or_else(|| vec![0.0; l]);
    let mut grad = p.to_vec();
    for s in 0..l {
        if alpha[s] != 0.0 {
            let w = alpha[s] * y[s];
            let row = kernel.row(point[s]);
            for t in 0..l {
                grad[t] += y[t] * row[point[t]] * w;
            }
        }
    }
    // K(x, x) = 1 for the RBF kernel
    let q_diag = 1.0;

    let mut iterations = 0;
    // indices still considered by selection; bound variables that cannot re-enter are dropped
    let mut active: Vec<usize> = (0..l).collect();
    let mut countdown = l.min(SHRINK_EVERY);
    let mut unshrunk = false;
    let mut pick = select_up(&active, y, &alpha, &grad, c);
    let violation = loop {
        countdown -= 1;
        if countdown == 0 {
            countdown = l.min(SHRINK_EVERY);
            let (up_max, low_max) = extremes(&active, y, &alpha, &grad, c);
            if !unshrunk && up_max + low_max <= 10.0 * cfg.tolerance {
                unshrunk = true;
                restore(&mut kernel, &mut active, y, p, &alpha, &mut grad, &point);
            }
            active.retain(|&t| !shrinkable(t, y, &alpha, &grad, c, up_max, low_max));
            pick = select_up(&active, y, &alpha, &grad, c);
        }

        // i: maximal violator from the "up" set, refreshed by every gradient update
        let (up_max, i) = pick;
        // j: largest second-order decrease paired with i from the "low" set
        let mut low_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        if i != usize::MAX {
            let row_i = kernel.row(i % n);
            let mut best = f64::INFINITY;
            for &t in &active {
                let can_fall = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
                if !can_fall {
                    continue;
                }
                let v = y[t] * grad[t];
                low_max = low_max.max(v);
                let diff = up_max + v;
                if diff > 0.0 {
                    let quad = (2.0 * q_diag - 2.0 * row_i[point[t]]).max(TAU);
                    let decrease = -diff * diff / quad;
                    if decrease <= best {
                        best = decrease;
                        j = t;
                    }
                }
            }
        }
        let gap = up_max + low_max;
        if i == usize::MAX || j == usize::MAX || gap < cfg.tolerance {
            if active.len() < l {
                // stopping is only decided on the full problem
                restore(&mut kernel, &mut active, y, p, &alpha, &mut grad, &point);
                pick = select_up(&active, y, &alpha, &grad, c);
                countdown = l.min(SHRINK_EVERY);
                continue;
            }
            break gap.max(0.0);
        }
        if iterations >= cfg.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                violation: gap,
            });
        }
        iterations += 1;

        let k_ij = kernel.row(i % n)[j % n];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (2.0 * q_diag + 2.0 * k_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (2.0 * q_diag - 2.0 * k_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = (alpha[i] - old_i) * y[i];
        let d_j = (alpha[j] - old_j) * y[j];
        let (row_i, row_j) = kernel.pair(i % n, j % n);
        let mut next = (f64::NEG_INFINITY, usize::MAX);
        for &t in &active {
            let g = grad[t] + y[t] * (row_i[point[t]] * d_i + row_j[point[t]] * d_j);
            grad[t] = g;
            let can_rise = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if can_rise && -y[t] * g > next.0 {
                next = (-y[t] * g, t);
            }
        }
        pick = next;
    };

    // rho: average of y_t G_t over free variables, else the middle of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..l {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = 0.5 * alpha.iter().zip(grad.iter().zip(p)).map(|(a, (g, p))| a * (g + p)).sum::<f64>();

    Ok(Solution {
        alpha,
        rho,
        objective,
        violation,
        iterations,
    })
}

fn check_points<X: AsRef<[f64]>>(points: &[X]) -> Result<usize> {
    let dim = points.first().map(|x| x.as_ref().len()).unwrap_or(0);
    if dim == 0 {
        return Err(Error::InvalidArgument("empty training set or zero-dimensional inputs".into()));
    }
    if points.iter().any(|x| x.as_ref().len() != dim || x.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::Shape("training inputs must share one dimension and be finite".into()));
    }
    Ok(dim)
}

/// Fits a soft-margin RBF classifier.
pub fn fit_classifier<X: AsRef<[f64]>>(points: &[X], labels: &[Label], cfg: &KernelConfig) -> Result<KernelModel> {
    fit_classifier_from(points, labels, cfg, None)
}

fn fit_classifier_from<X: AsRef<[f64]>>(points: &[X], labels: &[Label], cfg: &KernelConfig, start: Option<Vec<f64>>) -> Result<KernelModel> {
    cfg.validate()?;
    if points.len() != labels.len() {
        return Err(Error::Shape(format!("{} points but {} labels", points.len(), labels.len())));
    }
    let dim = check_points(points)?;
    if !labels.iter().any(|l| l.is_positive()) {
        return Err(Error::SingleClass("negatives"));
    }
    if labels.iter().all(|l| l.is_positive()) {
        return Err(Error::SingleClass("positives"));
    }
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let p = vec![-1.0; y.len()];
    let sol = solve_from(points, &y, &p, cfg, start)?;

    let support = points
        .iter()
        .zip(&y)
        .zip(&sol.alpha)
        .filter(|(_, &a)| a > 0.0)
        .map(|((x, &yi), &a)| SupportVector {
            x: x.as_ref().to_vec(),
            y: yi,
            alpha: a,
            coef: a * yi,
        })
        .collect();
    Ok(KernelModel {
        mode: Mode::Classifier,
        support,
        bias: -sol.rho,
        gamma: cfg.gamma,
        dim,
        dual: sol.alpha,
        objective: sol.objective,
        violation: sol.violation,
        iterations: sol.iterations,
    })
}

/// Fits an ε-insensitive RBF regressor.
pub fn fit_regressor<X: AsRef<[f64]>>(points: &[X], targets: &[f64], cfg: &KernelConfig) -> Result<KernelModel> {
    cfg.validate()?;
    if points.len() != targets.len() {
        return Err(Error::Shape(format!("{} points but {} targets", points.len(), targets.len())));
    }
    if points.len() < 2 {
        return Err(Error::InvalidArgument("regression needs at least two points".into()));
    }
    let dim = check_points(points)?;
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("regression targets must be finite".into()));
    }
    let n = points.len();
    let eps = cfg.epsilon_tube;
    let y: Vec<f64> = (0..2 * n).map(|t| if t < n { 1.0 } else { -1.0 }).collect();
    let p: Vec<f64> = (0..2 * n)
        .map(|t| if t < n { eps - targets[t] } else { eps + targets[t - n] })
        .collect();
    let sol = solve(points, &y, &p, cfg)?;

    let support = (0..n)
        .filter_map(|i| {
            let a = sol.alpha[i] - sol.alpha[i + n];
            (a != 0.0).then(|| SupportVector {
                x: points[i].as_ref().to_vec(),
                y: targets[i],
                alpha: a,
                coef: a,
            })
        })
        .collect();
    Ok(KernelModel {
        mode: Mode::Regressor,
        support,
        bias: -sol.rho,
        gamma: cfg.gamma,
        dim,
        dual: sol.alpha,
        objective: sol.objective,
        violation: sol.violation,
        iterations: sol.iterations,
    })
}

/// Largest KKT violation of `model` on its training data, recomputed from the
/// dual weights and fresh kernel evaluations.
///
/// Classifier targets are class signs, regressor targets are real values.
pub fn kkt_violation<X: AsRef<[f64]>>(model: &KernelModel, points: &[X], targets: &[f64], cfg: &KernelConfig) -> f64 {
    let n = points.len();
    let coef: Vec<f64> = match model.mode {
        Mode::Classifier => (0..n).map(|i| model.dual[i] * targets[i]).collect(),
        Mode::Regressor => (0..n).map(|i| model.dual[i] - model.dual[i + n]).collect(),
    };
    let decision = |i: usize| {
        (0..n)
            .map(|j| coef[j] * rbf(points[j].as_ref(), points[i].as_ref(), model.gamma))
            .sum::<f64>()
            + model.bias
    };
    // violation of "value >= 0" / "value <= 0" / "value == 0" by bound status of a
    let status = |a: f64, value: f64| {
        if a <= 0.0 {
            (-value).max(0.0)
        } else if a >= cfg.c {
            value.max(0.0)
        } else {
            value.abs()
        }
    };
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let f = decision(i);
        match model.mode {
            Mode::Classifier => {
                worst = worst.max(status(model.dual[i], targets[i] * f - 1.0));
            }
            Mode::Regressor => {
                let eps = cfg.epsilon_tube;
                worst = worst.max(status(model.dual[i], eps - (targets[i] - f)));
                worst = worst.max(status(model.dual[i + n], eps - (f - targets[i])));
            }
        }
    }
    worst
}

fn sorted_grid(grid: &[KernelConfig]) -> Vec<KernelConfig> {
    let mut g = grid.to_vec();
    g.sort_by(|a, b| a.c.total_cmp(&b.c).then(a.gamma.total_cmp(&b.gamma)));
    g
}

/// Fold index per point; stratified by class when `strata` is given.
fn assign_folds(n: usize, folds: usize, strata: Option<&[Label]>, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; n];
    if folds >= n {
        for (i, f) in fold_of.iter_mut().enumerate() {
            *f = i;
        }
        return fold_of;
    }
    let groups: Vec<Vec<usize>> = match strata {
        Some(labels) => [Label::Positive, Label::Negative]
            .iter()
            .map(|&c| (0..n).filter(|&i| labels[i] == c).collect())
            .collect(),
        None => vec![(0..n).collect()],
    };
    let mut offset = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for (k, &i) in group.iter().enumerate() {
            fold_of[i] = (offset + k) % folds;
        }
        offset += group.len();
    }
    fold_of
}

fn check_selection(n: usize, grid: &[KernelConfig], folds: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("hyperparameter grid is empty".into()));
    }
    if folds < 2 || n < folds {
        return Err(Error::InvalidArgument(format!("need 2 <= folds <= points, got {folds} folds for {n} points")));
    }
    Ok(())
}

/// Cross-validated g-mean of one classifier configuration, from predictions
/// pooled over all folds. `None` if a fold failed to converge.
pub fn cv_gmean<X: AsRef<[f64]> + Sync>(
    points: &[X],
    labels: &[Label],
    cfg: &KernelConfig,
    fold_of: &[usize],
    folds: usize,
) -> Option<f64> {
    cv_gmean_chain(points, labels, std::slice::from_ref(cfg), fold_of, folds)[0]
}

/// Cross-validated g-means for configs sharing one `γ`, in ascending `C`. Each
/// fold's fit starts from the previous config's solution scaled by the ratio of
/// the `C` values, which stays feasible.
fn cv_gmean_chain<X: AsRef<[f64]> + Sync>(
    points: &[X],
    labels: &[Label],
    chain: &[KernelConfig],
    fold_of: &[usize],
    folds: usize,
) -> Vec<Option<f64>> {
    let mut confusion = vec![Confusion::default(); chain.len()];
    let mut failed = vec![false; chain.len()];
    for fold in 0..folds {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..points.len()).partition(|&i| fold_of[i] != fold);
        if test.is_empty() {
            continue;
        }
        let train_x: Vec<&[f64]> = train.iter().map(|&i| points[i].as_ref()).collect();
        let train_y: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        let mut previous: Option<(f64, Vec<f64>)> = None;
        for (k, cfg) in chain.iter().enumerate() {
            let start = previous
                .take()
                .filter(|(c, _)| *c <= cfg.c)
                .map(|(c, dual)| dual.into_iter().map(|a| a * (cfg.c / c)).collect());
            match fit_classifier_from(&train_x, &train_y, cfg, start) {
                Ok(model) => {
                    for &i in &test {
                        let predicted = Label::from_bool(model.decision_unchecked(points[i].as_ref()) > 0.0);
                        confusion[k].record(predicted, labels[i]);
                    }
                    previous = Some((cfg.c, model.dual));
                }
                Err(Error::SingleClass(_)) => {
                    for &i in &test {
                        confusion[k].record(train_y[0], labels[i]);
                    }
                }
                Err(_) => failed[k] = true,
            }
        }
    }
    confusion
        .iter()
        .zip(&failed)
        .map(|(m, &bad)| if bad { None } else { gmean(m).ok() })
        .collect()
}

/// Picks the grid point with the best k-fold cross-validated g-mean; ties go
/// to the smaller `C`, then the smaller `γ`.
pub fn select_hyperparams<X: AsRef<[f64]> + Sync>(
    points: &[X],
    labels: &[Label],
    grid: &[KernelConfig],
    folds: usize,
    seed: u64,
) -> Result<KernelConfig> {
    check_selection(points.len(), grid, folds)?;
    if points.len() != labels.len() {
        return Err(Error::Shape(format!("{} points but {} labels", points.len(), labels.len())));
    }
    let grid = sorted_grid(grid);
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let folds = folds.min(points.len());
    let fold_of = assign_folds(points.len(), folds, Some(labels), seed);
    // one warm-started chain per γ; the sorted grid keeps each chain in ascending C
    let mut gammas: Vec<f64> = grid.iter().map(|g| g.gamma).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let chains: Vec<Vec<usize>> = gammas
        .iter()
        .map(|&g| (0..grid.len()).filter(|&k| grid[k].gamma == g).collect())
        .collect();
    let chain_scores = Exec::default().map(&chains, |members| {
        let configs: Vec<KernelConfig> = members.iter().map(|&k| grid[k]).collect();
        cv_gmean_chain(points, labels, &configs, &fold_of, folds)
    });
    let mut scores = vec![None; grid.len()];
    for (members, found) in chains.iter().zip(chain_scores) {
        for (&k, score) in members.iter().zip(found) {
            scores[k] = score;
        }
    }
    best_by(&grid, &scores, |a, b| a > b)
}

/// Regression counterpart of [`select_hyperparams`], minimising CV mean squared error.
pub fn select_regression_hyperparams<X: AsRef<[f64]> + Sync>(
    points: &[X],
    targets: &[f64],
    grid: &[KernelConfig],
    folds: usize,
    seed: u64,
) -> Result<KernelConfig> {
    check_selection(points.len(), grid, folds)?;
    let grid = sorted_grid(grid);
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let folds = folds.min(points.len());
    let fold_of = assign_folds(points.len(), folds, None, seed);
    let scores = Exec::default().map(&grid, |cfg| {
        let mut sse = 0.0;
        for fold in 0..folds {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..points.len()).partition(|&i| fold_of[i] != fold);
            let train_x: Vec<&[f64]> = train.iter().map(|&i| points[i].as_ref()).collect();
            let train_y: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
            let model = fit_regressor(&train_x, &train_y, cfg).ok()?;
            for &i in &test {
                let e = model.decision_unchecked(points[i].as_ref()) - targets[i];
                sse += e * e;
            }
        }
        Some(sse / points.len() as f64)
    });
    best_by(&grid, &scores, |a, b| a < b)
}

fn best_by(grid: &[KernelConfig], scores: &[Option<f64>], better: impl Fn(f64, f64) -> bool) -> Result<KernelConfig> {
    let mut best: Option<(usize, f64)> = None;
    for (k, score) in scores.iter().enumerate() {
        if let Some(s) = *score {
            if best.is_none_or(|(_, b)| better(s, b)) {
                best = Some((k, s));
            }
        }
    }
    best.map(|(k, _)| grid[k])
        .ok_or_else(|| Error::InvalidArgument("no grid point could be evaluated".into()))
}
