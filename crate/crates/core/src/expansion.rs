//! Schema expansion from a gold sample, the incremental boosting loop over a
//! judgment stream, and detection of labels that contradict the space.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crowd::{majority_votes, Judgment};
use crate::dataset::{GoldSample, Label, LabelSet};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernel::{
    default_grid, fit_classifier, fit_regressor, select_hyperparams, select_regression_hyperparams, KernelConfig,
    KernelModel,
};
use crate::space::ItemEmbedding;

/// How kernel hyperparameters are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    /// Cross-validated search over the default grid.
    Auto { folds: usize, seed: u64 },
    Fixed(KernelConfig),
}

impl Default for Selection {
    fn default() -> Self {
        Selection::Auto { folds: 5, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionResult {
    pub attribute: String,
    /// Label and decision value for every item of the space.
    pub predictions: BTreeMap<String, (Label, f64)>,
    pub training_size: usize,
    pub config: KernelConfig,
}

impl ExpansionResult {
    pub fn to_label_set(&self) -> LabelSet {
        LabelSet::from_labels(&self.attribute, self.predictions.iter().map(|(id, &(l, _))| (id.clone(), l)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionResult {
    pub attribute: String,
    pub predictions: BTreeMap<String, f64>,
    pub training_size: usize,
    pub config: KernelConfig,
}

fn resolve<E: ItemEmbedding + ?Sized>(space: &E, ids: impl IntoIterator<Item = impl AsRef<str>>) -> Result<Vec<usize>> {
    let mut missing = Vec::new();
    let mut found = Vec::new();
    for id in ids {
        match space.item_ids().get(id.as_ref()) {
            Some(i) => found.push(i as usize),
            None => missing.push(id.as_ref().to_owned()),
        }
    }
    if missing.is_empty() {
        Ok(found)
    } else {
        Err(Error::UnknownItem(missing.join(", ")))
    }
}

fn classifier_for(points: &[&[f64]], labels: &[Label], dim: usize, selection: &Selection) -> Result<KernelModel> {
    let cfg = selected_config(selection, points, labels, dim)?;
    fit_classifier(points, labels, &cfg)
}

fn predict_all<E: ItemEmbedding + ?Sized>(space: &E, model: &KernelModel) -> Result<Vec<f64>> {
    let rows: Vec<&[f64]> = (0..space.n_items()).map(|i| space.coords(i)).collect();
    model.decision_batch(&rows, Exec::default())
}

fn label_map<E: ItemEmbedding + ?Sized>(space: &E, margins: &[f64]) -> BTreeMap<String, (Label, f64)> {
    space
        .item_ids()
        .iter()
        .zip(margins)
        .map(|(id, &m)| (id.to_owned(), (Label::from_bool(m > 0.0), m)))
        .collect()
}

fn selected_config(selection: &Selection, points: &[&[f64]], labels: &[Label], dim: usize) -> Result<KernelConfig> {
    match selection {
        Selection::Fixed(cfg) => Ok(*cfg),
        Selection::Auto { folds, seed } => {
            select_hyperparams(points, labels, &default_grid(dim), (*folds).min(points.len()), *seed)
        }
    }
}

/// Trains on the gold items and predicts every item of the space, gold items included.
pub fn expand<E: ItemEmbedding + ?Sized>(
    space: &E,
    gold: &GoldSample,
    attribute: &str,
    selection: &Selection,
) -> Result<ExpansionResult> {
    gold.validate()?;
    let labels: Vec<Label> = gold.iter().map(|(_, l)| l).collect();
    let index = resolve(space, gold.iter().map(|(id, _)| id))?;
    let points: Vec<&[f64]> = index.iter().map(|&i| space.coords(i)).collect();
    let config = selected_config(selection, &points, &labels, space.dim())?;
    let model = fit_classifier(&points, &labels, &config)?;
    let margins = predict_all(space, &model)?;
    Ok(ExpansionResult {
        attribute: attribute.to_owned(),
        predictions: label_map(space, &margins),
        training_size: points.len(),
        config,
    })
}

/// Numeric counterpart of [`expand`], trained on `scores.scores`.
pub fn expand_regression<E: ItemEmbedding + ?Sized>(
    space: &E,
    scores: &LabelSet,
    selection: &Selection,
) -> Result<RegressionResult> {
    let targets = scores
        .scores
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("attribute `{}` carries no numeric scores", scores.attribute)))?;
    let index = resolve(space, targets.keys())?;
    let points: Vec<&[f64]> = index.iter().map(|&i| space.coords(i)).collect();
    let values: Vec<f64> = targets.values().copied().collect();
    let config = match selection {
        Selection::Fixed(cfg) => *cfg,
        Selection::Auto { folds, seed } => select_regression_hyperparams(
            &points,
            &values,
            &default_grid(space.dim()),
            (*folds).min(points.len()),
            *seed,
        )?,
    };
    let model = fit_regressor(&points, &values, &config)?;
    let predictions = space.item_ids().iter().zip(predict_all(space, &model)?).map(|(id, v)| (id.to_owned(), v)).collect();
    Ok(RegressionResult {
        attribute: scores.attribute.clone(),
        predictions,
        training_size: points.len(),
        config,
    })
}

/// Cost of a stream prefix: each worker is paid for whole HITs completed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HitPricing {
    pub hit_size: usize,
    pub price_cents: u64,
}

impl Default for HitPricing {
    fn default() -> Self {
        Self {
            hit_size: 10,
            price_cents: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub minutes: f64,
    pub cents: u64,
    /// Items with a majority label at this instant.
    pub train_size: usize,
    /// Items whose model prediction matches the truth (majority-only count while no model exists).
    pub correct: Option<usize>,
    /// Items whose crowd majority alone matches the truth.
    pub majority_correct: Option<usize>,
    pub model_fitted: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoostTimeline {
    pub checkpoints: Vec<Checkpoint>,
}

/// Replays `stream`, retraining at every `interval` minutes on the current
/// majority labels and re-predicting every item. The last checkpoint sits at
/// the final judgment.
pub fn boost_loop<E: ItemEmbedding + ?Sized>(
    space: &E,
    stream: &[Judgment],
    interval: f64,
    truth: Option<&LabelSet>,
    selection: &Selection,
    pricing: HitPricing,
) -> Result<BoostTimeline> {
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(Error::InvalidArgument("interval must be positive".into()));
    }
    if pricing.hit_size == 0 {
        return Err(Error::InvalidArgument("hit_size must be positive".into()));
    }
    let Some(end) = stream.last().map(|j| j.minutes) else {
        return Ok(BoostTimeline {
            checkpoints: vec![Checkpoint {
                minutes: 0.0,
                cents: 0,
                train_size: 0,
                correct: truth.map(|_| 0),
                majority_correct: truth.map(|_| 0),
                model_fitted: false,
            }],
        });
    };
    let mut times = Vec::new();
    let mut k = 1.0;
    while k * interval < end {
        times.push(k * interval);
        k += 1.0;
    }
    times.push(end);

    let items: Vec<String> = {
        let seen: BTreeSet<&str> = stream.iter().map(|j| j.item.as_str()).collect();
        seen.into_iter().filter(|id| space.item_ids().get(id).is_some()).map(str::to_owned).collect()
    };
    let truth_index: Option<Vec<(usize, Label)>> = truth.map(|t| {
        t.labels
            .iter()
            .filter_map(|(id, &l)| space.item_ids().get(id).map(|i| (i as usize, l)))
            .collect()
    });

    let mut checkpoints = Vec::with_capacity(times.len());
    let mut current: Option<Vec<f64>> = None;
    let mut consumed = 0;
    let mut per_worker: BTreeMap<&str, u64> = BTreeMap::new();
    for &t in &times {
        while consumed < stream.len() && stream[consumed].minutes <= t {
            *per_worker.entry(&stream[consumed].worker).or_default() += 1;
            consumed += 1;
        }
        let cents = per_worker.values().map(|n| n / pricing.hit_size as u64).sum::<u64>() * pricing.price_cents;
        let votes = majority_votes(&stream[..consumed], &items);
        let training: Vec<(usize, Label)> = votes
            .iter()
            .filter_map(|(id, v)| Some((space.item_ids().get(id)? as usize, v.label()?)))
            .collect();
        let majority_correct = truth.map(|t| {
            votes
                .iter()
                .filter(|(id, v)| v.label().is_some() && v.label() == t.labels.get(*id).copied())
                .count()
        });

        let has_both = training.iter().any(|(_, l)| l.is_positive()) && training.iter().any(|(_, l)| !l.is_positive());
        let mut fitted = false;
        if has_both {
            let points: Vec<&[f64]> = training.iter().map(|&(i, _)| space.coords(i)).collect();
            let labels: Vec<Label> = training.iter().map(|&(_, l)| l).collect();
            let model = classifier_for(&points, &labels, space.dim(), selection)?;
            current = Some(predict_all(space, &model)?);
            fitted = true;
        }
        let correct = match (&truth_index, &current) {
            (Some(ti), Some(margins)) => Some(ti.iter().filter(|&&(i, l)| Label::from_bool(margins[i] > 0.0) == l).count()),
            (Some(_), None) => majority_correct,
            (None, _) => None,
        };
        checkpoints.push(Checkpoint {
            minutes: t,
            cents,
            train_size: training.len(),
            correct,
            majority_correct,
            model_fitted: fitted,
        });
    }
    Ok(BoostTimeline { checkpoints })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlagReport {
    /// Labeled items whose given label differs from the prediction.
    pub flagged: BTreeSet<String>,
    /// Decision value for every labeled item.
    pub margins: BTreeMap<String, f64>,
    pub config: KernelConfig,
}

/// Trains on all given labels and flags the items the model disagrees with.
pub fn detect_noise<E: ItemEmbedding + ?Sized>(space: &E, labels: &LabelSet, selection: &Selection) -> Result<FlagReport> {
    let index = resolve(space, labels.labels.keys())?;
    let points: Vec<&[f64]> = index.iter().map(|&i| space.coords(i)).collect();
    let given: Vec<Label> = labels.labels.values().copied().collect();
    let config = selected_config(selection, &points, &given, space.dim())?;
    let model = fit_classifier(&points, &given, &config)?;
    let margins = model.decision_batch(&points, Exec::default())?;
    let mut flagged = BTreeSet::new();
    let mut per_item = BTreeMap::new();
    for ((id, &label), &m) in labels.labels.iter().zip(&margins) {
        if Label::from_bool(m > 0.0) != label {
            flagged.insert(id.clone());
        }
        per_item.insert(id.clone(), m);
    }
    Ok(FlagReport {
        flagged,
        margins: per_item,
        config,
    })
}

/// Precision and recall of the flagged set against the true flips; `None` where undefined.
pub fn evaluate_flags(report: &FlagReport, flips: &BTreeSet<String>) -> (Option<f64>, Option<f64>) {
    let hits = report.flagged.intersection(flips).count() as f64;
    let precision = (!report.flagged.is_empty()).then(|| hits / report.flagged.len() as f64);
    let recall = (!flips.is_empty()).then(|| hits / flips.len() as f64);
    (precision, recall)
}

/// Flips `round(fraction · n)` labels chosen uniformly at random.
pub fn flip_labels(labels: &LabelSet, fraction: f64, seed: u64) -> Result<(LabelSet, BTreeSet<String>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("flip fraction {fraction} outside [0, 1]")));
    }
    let ids: Vec<&String> = labels.labels.keys().collect();
    let n = (fraction * ids.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flips: BTreeSet<String> = rand::seq::index::sample(&mut rng, ids.len(), n)
        .into_iter()
        .map(|i| ids[i].clone())
        .collect();
    let mut noisy = labels.clone();
    for id in &flips {
        let l = noisy.labels.get_mut(id).expect("flip ids come from the label set");
        *l = l.flipped();
    }
    Ok((noisy, flips))
}

/// `item_id<TAB>{1|0}<TAB>margin` lines in id order.
pub fn format_predictions(result: &ExpansionResult) -> String {
    let mut out = String::new();
    for (id, (label, margin)) in &result.predictions {
        out.push_str(&format!("{id}\t{}\t{margin}\n", u8::from(label.is_positive())));
    }
    out
}

/// `item_id<TAB>value` lines in id order.
pub fn format_regression(result: &RegressionResult) -> String {
    let mut out = String::new();
    for (id, value) in &result.predictions {
        out.push_str(&format!("{id}\t{value}\n"));
    }
    out
}

/// `sim_minutes<TAB>dollars<TAB>train_size<TAB>correct`; `NA` when no truth was given.
pub fn format_timeline(timeline: &BoostTimeline) -> String {
    let mut out = String::new();
    for c in &timeline.checkpoints {
        let correct = c.correct.map_or_else(|| "NA".to_owned(), |n| n.to_string());
        out.push_str(&format!(
            "{}\t{}\t{}\t{correct}\n",
            c.minutes,
            crate::crowd::format_dollars(c.cents),
            c.train_size
        ));
    }
    out
}

/// `item_id<TAB>margin` for flagged items in id order.
pub fn format_flags(report: &FlagReport) -> String {
    let mut out = String::new();
    for id in &report.flagged {
        out.push_str(&format!("{id}\t{}\n", report.margins[id]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::IdTable;
    use crate::factor::{ModelKind, PerceptualSpace};
    use crate::metrics::{confusion, gmean};
    use rand::Rng;

    /// Items scattered in 2-d; the attribute is the sign of the first coordinate.
    fn scattered(n: usize, seed: u64) -> (PerceptualSpace, LabelSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items: IdTable = (0..n).map(|i| format!("i{i:04}")).collect();
        let mut s = PerceptualSpace::zeros(ModelKind::Euclidean, 2, 3.0, items, IdTable::new());
        for x in s.item_coords.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        let truth = LabelSet::from_labels(
            "a",
            (0..n).map(|i| (format!("i{i:04}"), Label::from_bool(s.item_row(i)[0] > 0.0))),
        );
        (s, truth)
    }

    fn fixed() -> Selection {
        Selection::Fixed(KernelConfig {
            c: 10.0,
            gamma: 1.0,
            ..KernelConfig::for_dim(2)
        })
    }

    #[test]
    fn expansion_covers_every_item() {
        let (space, truth) = scattered(300, 1);
        let gold = crate::dataset::sample_gold(&truth, 10, 4).unwrap();
        for sel in [fixed(), Selection::default()] {
            let r = expand(&space, &gold, "a", &sel).unwrap();
            assert_eq!(r.predictions.len(), 300);
            assert_eq!(r.training_size, 20);
            let g = gmean(&confusion(&r.to_label_set(), &truth).unwrap()).unwrap();
            assert!(g > 0.85, "{g}");
        }
    }

    #[test]
    fn expansion_rejects_single_class_and_unknown_items() {
        let (space, _) = scattered(20, 1);
        let gold = GoldSample {
            positives: ["i0001".to_owned(), "i0002".to_owned()].into(),
            negatives: BTreeSet::new(),
        };
        assert!(matches!(expand(&space, &gold, "a", &fixed()), Err(Error::SingleClass(_))));
        let gold = GoldSample {
            positives: ["i0001".to_owned()].into(),
            negatives: ["nope".to_owned()].into(),
        };
        assert!(matches!(expand(&space, &gold, "a", &fixed()), Err(Error::UnknownItem(_))));
    }

    #[test]
    fn regression_expansion() {
        let (space, _) = scattered(100, 2);
        let scores: BTreeMap<String, f64> = (0..40).map(|i| (format!("i{i:04}"), space.item_row(i)[1] * 2.0)).collect();
        let set = LabelSet {
            attribute: "humor".into(),
            labels: BTreeMap::new(),
            scores: Some(scores),
        };
        let sel = Selection::Fixed(KernelConfig {
            c: 10.0,
            gamma: 0.5,
            epsilon_tube: 0.05,
            ..KernelConfig::for_dim(2)
        });
        let r = expand_regression(&space, &set, &sel).unwrap();
        assert_eq!(r.predictions.len(), 100);
        let err: f64 = (40..100)
            .map(|i| (r.predictions[&format!("i{i:04}")] - space.item_row(i)[1] * 2.0).abs())
            .sum::<f64>()
            / 60.0;
        assert!(err < 0.15, "{err}");
        assert!(expand_regression(&space, &LabelSet::new("x"), &sel).is_err());
    }

    #[test]
    fn noise_fixed_point_and_flags() {
        let (space, truth) = scattered(200, 3);
        let first = detect_noise(&space, &truth, &fixed()).unwrap();
        // relabel with the model's own predictions: nothing left to flag
        let own = LabelSet::from_labels(
            "a",
            first.margins.iter().map(|(id, &m)| (id.clone(), Label::from_bool(m > 0.0))),
        );
        let again = detect_noise(&space, &own, &fixed()).unwrap();
        assert!(again.flagged.is_empty(), "{:?}", again.flagged);

        let (noisy, flips) = flip_labels(&truth, 0.2, 5).unwrap();
        assert_eq!(flips.len(), 40);
        let report = detect_noise(&space, &noisy, &fixed()).unwrap();
        assert!(report.flagged.iter().all(|id| noisy.labels.contains_key(id)));
        let (p, r) = evaluate_flags(&report, &flips);
        assert!(p.unwrap() > 0.6 && r.unwrap() > 0.6, "{p:?} {r:?}");
        assert_eq!(detect_noise(&space, &noisy, &fixed()).unwrap(), report);

        let (_, none) = flip_labels(&truth, 0.0, 5).unwrap();
        assert_eq!(evaluate_flags(&first, &none).1, None);
    }

    #[test]
    fn flag_metrics() {
        let report = |ids: &[&str]| FlagReport {
            flagged: ids.iter().map(|s| s.to_string()).collect(),
            margins: BTreeMap::new(),
            config: KernelConfig::for_dim(1),
        };
        let set = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(evaluate_flags(&report(&["a", "b"]), &set(&["a", "b"])), (Some(1.0), Some(1.0)));
        assert_eq!(evaluate_flags(&report(&["a"]), &set(&["b"])), (Some(0.0), Some(0.0)));
        assert_eq!(evaluate_flags(&report(&["a", "b"]), &set(&["b", "c"])), (Some(0.5), Some(0.5)));
        assert_eq!(evaluate_flags(&report(&[]), &set(&["b"])), (None, Some(0.0)));
    }

    fn judgment(minutes: f64, worker: &str, item: &str, positive: bool) -> Judgment {
        Judgment {
            minutes,
            worker: worker.into(),
            item: item.into(),
            response: crate::crowd::Response::from(Label::from_bool(positive)),
        }
    }

    #[test]
    fn empty_stream_single_checkpoint() {
        let (space, truth) = scattered(10, 1);
        let t = boost_loop(&space, &[], 5.0, Some(&truth), &fixed(), HitPricing::default()).unwrap();
        assert_eq!(t.checkpoints.len(), 1);
        assert_eq!(t.checkpoints[0].correct, Some(0));
        assert!(!t.checkpoints[0].model_fitted);
    }

    #[test]
    fn timeline_invariants_and_carry_forward() {
        let (space, truth) = scattered(50, 4);
        let ids: Vec<&String> = truth.labels.keys().collect();
        let mut stream = Vec::new();
        // first 12 minutes: positives only, then both classes
        for (k, id) in ids.iter().enumerate() {
            let l = truth.labels[*id];
            let minutes = if l.is_positive() { 1.0 + k as f64 * 0.1 } else { 12.0 + k as f64 * 0.1 };
            stream.push(judgment(minutes, &format!("w{}", k % 3), id, l.is_positive()));
        }
        stream.sort_by(|a, b| a.minutes.total_cmp(&b.minutes));
        let t = boost_loop(&space, &stream, 5.0, Some(&truth), &fixed(), HitPricing { hit_size: 2, price_cents: 3 }).unwrap();
        let c = &t.checkpoints;
        assert!(c.windows(2).all(|w| w[1].minutes > w[0].minutes && w[1].cents >= w[0].cents));
        assert!(!c[0].model_fitted && !c[1].model_fitted);
        assert_eq!(c[0].correct, c[0].majority_correct);
        assert!(c.last().unwrap().model_fitted);
        assert_eq!(c.last().unwrap().minutes, stream.last().unwrap().minutes);
        assert_eq!(c.last().unwrap().train_size, 50);
        assert!(c.last().unwrap().correct.unwrap() >= c[0].correct.unwrap());
        let text = format_timeline(&t);
        assert_eq!(text.lines().count(), c.len());
        assert!(text.starts_with("5\t"));
    }
}
