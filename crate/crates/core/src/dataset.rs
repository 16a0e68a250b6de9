//! Rating data, label sets, gold samples and item metadata.
//!
//! External ids are opaque strings; internally items and users are dense
//! `u32` indices handed out by an [`IdTable`] in first-seen order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Bidirectional map between external string ids and dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdTable {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index for `id`, assigning the next free one if unseen.
    pub fn intern(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = u32::try_from(self.ids.len()).expect("more than u32::MAX ids");
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: u32) -> Option<&str> {
        self.ids.get(index as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }
}

impl<S: AsRef<str>> FromIterator<S> for IdTable {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut table = IdTable::new();
        for id in iter {
            table.intern(id.as_ref());
        }
        table
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rating {
    pub item: u32,
    pub user: u32,
    pub score: f64,
}

/// Sparse item/user rating triples on a declared scale.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingDataset {
    pub items: IdTable,
    pub users: IdTable,
    pub ratings: Vec<Rating>,
    pub scale_min: f64,
    pub scale_max: f64,
}

/// Column layout and rating scale of a ratings file.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingFormat {
    pub delimiter: String,
    pub item_col: usize,
    pub user_col: usize,
    pub score_col: usize,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for RatingFormat {
    fn default() -> Self {
        Self {
            delimiter: "\t".into(),
            item_col: 0,
            user_col: 1,
            score_col: 2,
            scale_min: 1.0,
            scale_max: 5.0,
        }
    }
}

impl RatingFormat {
    pub fn with_scale(scale_min: f64, scale_max: f64) -> Self {
        Self {
            scale_min,
            scale_max,
            ..Self::default()
        }
    }

    /// MovieLens `u.data` layout: `user item rating timestamp`, scale 1–5.
    pub fn movielens() -> Self {
        Self {
            item_col: 1,
            user_col: 0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub records: usize,
    pub duplicates: usize,
}

impl RatingDataset {
    /// Builds a dataset from in-memory triples with the same validation and
    /// last-wins duplicate rule as [`load_ratings`].
    pub fn from_triples<'a, I>(triples: I, scale_min: f64, scale_max: f64) -> Result<(Self, LoadReport)>
    where
        I: IntoIterator<Item = (&'a str, &'a str, f64)>,
    {
        let mut builder = Builder::new(scale_min, scale_max)?;
        for (n, (item, user, score)) in triples.into_iter().enumerate() {
            if !(scale_min..=scale_max).contains(&score) {
                return Err(Error::OutOfScale {
                    path: "<memory>".into(),
                    line: n + 1,
                    score,
                    min: scale_min,
                    max: scale_max,
                });
            }
            builder.push(item, user, score);
        }
        builder.finish()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Arithmetic mean of all scores, summed in dataset order.
    pub fn mean_score(&self) -> f64 {
        let sum: f64 = self.ratings.iter().map(|r| r.score).sum();
        sum / self.ratings.len() as f64
    }

    fn with_ratings(&self, ratings: Vec<Rating>) -> Self {
        Self {
            items: self.items.clone(),
            users: self.users.clone(),
            ratings,
            scale_min: self.scale_min,
            scale_max: self.scale_max,
        }
    }
}

struct Builder {
    items: IdTable,
    users: IdTable,
    ratings: Vec<Rating>,
    positions: HashMap<(u32, u32), usize>,
    report: LoadReport,
    scale_min: f64,
    scale_max: f64,
}

impl Builder {
    fn new(scale_min: f64, scale_max: f64) -> Result<Self> {
        if !(scale_min.is_finite() && scale_max.is_finite() && scale_min <= scale_max) {
            return Err(Error::InvalidArgument(format!(
                "invalid rating scale [{scale_min}, {scale_max}]"
            )));
        }
        Ok(Self {
            items: IdTable::new(),
            users: IdTable::new(),
            ratings: Vec::new(),
            positions: HashMap::new(),
            report: LoadReport::default(),
            scale_min,
            scale_max,
        })
    }

    fn push(&mut self, item: &str, user: &str, score: f64) {
        let item = self.items.intern(item);
        let user = self.users.intern(user);
        self.report.records += 1;
        match self.positions.get(&(item, user)) {
            Some(&pos) => {
                self.ratings[pos].score = score;
                self.report.duplicates += 1;
            }
            None => {
                self.positions.insert((item, user), self.ratings.len());
                self.ratings.push(Rating { item, user, score });
            }
        }
    }

    fn finish(self) -> Result<(RatingDataset, LoadReport)> {
        if self.ratings.is_empty() {
            return Err(Error::InvalidArgument("no ratings".into()));
        }
        Ok((
            RatingDataset {
                items: self.items,
                users: self.users,
                ratings: self.ratings,
                scale_min: self.scale_min,
                scale_max: self.scale_max,
            },
            self.report,
        ))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Iterates `(line_number, line)` over non-empty lines that are not `#` comments.
fn data_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let reader = open(path)?;
    Ok(reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(e) => Some(Err(Error::io(path, e))),
            Ok(l) => {
                let trimmed = l.trim_end_matches('\r');
                if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, trimmed.to_owned())))
                }
            }
        }))
}

/// Loads a ratings file. Duplicate `(item, user)` pairs keep the last score.
pub fn load_ratings(path: impl AsRef<Path>, format: &RatingFormat) -> Result<(RatingDataset, LoadReport)> {
    let path = path.as_ref();
    let mut builder = Builder::new(format.scale_min, format.scale_max)?;
    let needed = format.item_col.max(format.user_col).max(format.score_col) + 1;
    for line in data_lines(path)? {
        let (n, line) = line?;
        let fields: Vec<&str> = if format.delimiter.trim().is_empty() && format.delimiter != "\t" {
            line.split_whitespace().collect()
        } else {
            line.split(format.delimiter.as_str()).collect()
        };
        if fields.len() < needed {
            return Err(Error::parse(
                path,
                n,
                format!("expected at least {needed} fields, found {}", fields.len()),
            ));
        }
        let (item, user) = (fields[format.item_col].trim(), fields[format.user_col].trim());
        if item.is_empty() || user.is_empty() {
            return Err(Error::parse(path, n, "empty item or user id"));
        }
        let raw = fields[format.score_col].trim();
        let score: f64 = raw
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::parse(path, n, format!("invalid score `{raw}`")))?;
        if !(format.scale_min..=format.scale_max).contains(&score) {
            return Err(Error::OutOfScale {
                path: path.to_owned(),
                line: n,
                score,
                min: format.scale_min,
                max: format.scale_max,
            });
        }
        builder.push(item, user, score);
    }
    builder.finish()
}

/// Splits ratings into disjoint train/test sets.
///
/// A rating only moves to the test side while its item and user keep at least
/// one other training rating. Both halves share the full id tables, so indices
/// stay compatible with a space trained on the train half.
/// `item<TAB>user<TAB>score` lines in stored order; reloads with the default format.
pub fn format_ratings(ds: &RatingDataset) -> String {
    let mut out = String::new();
    for r in &ds.ratings {
        let item = ds.items.id(r.item).expect("rating refers to a known item");
        let user = ds.users.id(r.user).expect("rating refers to a known user");
        out.push_str(&format!("{item}\t{user}\t{}\n", r.score));
    }
    out
}

pub fn split_holdout(ds: &RatingDataset, fraction: f64, seed: u64) -> Result<(RatingDataset, RatingDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("holdout fraction {fraction} not in (0, 1)")));
    }
    let target = (fraction * ds.len() as f64).round() as usize;
    if target == 0 {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction {fraction} of {} ratings selects nothing",
            ds.len()
        )));
    }

    let mut item_count = vec![0usize; ds.n_items()];
    let mut user_count = vec![0usize; ds.n_users()];
    for r in &ds.ratings {
        item_count[r.item as usize] += 1;
        user_count[r.user as usize] += 1;
    }

    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut in_test = vec![false; ds.len()];
    let mut selected = 0;
    for idx in order {
        if selected == target {
            break;
        }
        let r = ds.ratings[idx];
        let (i, u) = (r.item as usize, r.user as usize);
        if item_count[i] > 1 && user_count[u] > 1 {
            item_count[i] -= 1;
            user_count[u] -= 1;
            in_test[idx] = true;
            selected += 1;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, &t) in ds.ratings.iter().zip(&in_test) {
        if t {
            test.push(*r);
        } else {
            train.push(*r);
        }
    }
    Ok((ds.with_ratings(train), ds.with_ratings(test)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// `+1.0` or `-1.0`.
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

/// Binary (or numeric) attribute values keyed by item id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelSet {
    pub attribute: String,
    pub labels: BTreeMap<String, Label>,
    pub scores: Option<BTreeMap<String, f64>>,
}

impl LabelSet {
    pub fn new(attribute: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            ..Self::default()
        }
    }

    pub fn from_labels<I, S>(attribute: impl Into<String>, labels: I) -> Self
    where
        I: IntoIterator<Item = (S, Label)>,
        S: Into<String>,
    {
        Self {
            attribute: attribute.into(),
            labels: labels.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            scores: None,
        }
    }

    pub fn positives(&self) -> impl Iterator<Item = &str> {
        self.with_label(Label::Positive)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &str> {
        self.with_label(Label::Negative)
    }

    fn with_label(&self, label: Label) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .filter(move |(_, &l)| l == label)
            .map(|(k, _)| k.as_str())
    }

    /// Ids that do not resolve in `items`.
    pub fn unresolved(&self, items: &IdTable) -> Vec<String> {
        let keys = self
            .labels
            .keys()
            .chain(self.scores.iter().flat_map(|s| s.keys()));
        keys.filter(|id| items.get(id).is_none()).cloned().collect()
    }
}

fn attribute_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn two_fields<'a>(path: &Path, n: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let mut fields = line.split('\t');
    match (fields.next(), fields.next()) {
        (Some(id), Some(value)) if !id.trim().is_empty() => Ok((id.trim(), value.trim())),
        _ => Err(Error::parse(path, n, "expected `item_id<TAB>value`")),
    }
}

/// Loads `item_id<TAB>{1|0}` lines, or `item_id<TAB>real` when `regression`.
/// Extra trailing columns are ignored so prediction files load as labels.
pub fn load_labels(path: impl AsRef<Path>, regression: bool) -> Result<LabelSet> {
    let path = path.as_ref();
    let mut set = LabelSet::new(attribute_name(path));
    let mut scores = BTreeMap::new();
    for line in data_lines(path)? {
        let (n, line) = line?;
        let (id, value) = two_fields(path, n, &line)?;
        if regression {
            let v: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(path, n, format!("invalid value `{value}`")))?;
            scores.insert(id.to_owned(), v);
        } else {
            let label = match value {
                "1" => Label::Positive,
                "0" => Label::Negative,
                other => return Err(Error::parse(path, n, format!("label must be 1 or 0, found `{other}`"))),
            };
            set.labels.insert(id.to_owned(), label);
        }
    }
    if regression {
        set.scores = Some(scores);
    }
    Ok(set)
}

/// Training examples for one binary attribute.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldSample {
    pub positives: BTreeSet<String>,
    pub negatives: BTreeSet<String>,
}

impl GoldSample {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }

    /// Checks disjointness and that both classes are present.
    pub fn validate(&self) -> Result<()> {
        if let Some(id) = self.positives.intersection(&self.negatives).next() {
            return Err(Error::InvalidArgument(format!("gold item `{id}` is both positive and negative")));
        }
        if self.positives.is_empty() {
            return Err(Error::SingleClass("negatives"));
        }
        if self.negatives.is_empty() {
            return Err(Error::SingleClass("positives"));
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Label)> {
        self.positives
            .iter()
            .map(|id| (id.as_str(), Label::Positive))
            .chain(self.negatives.iter().map(|id| (id.as_str(), Label::Negative)))
    }

    pub fn to_label_set(&self, attribute: impl Into<String>) -> LabelSet {
        LabelSet::from_labels(attribute, self.iter().map(|(id, l)| (id.to_owned(), l)))
    }
}

/// Loads `item_id<TAB>{+|-}` lines.
pub fn load_gold(path: impl AsRef<Path>) -> Result<GoldSample> {
    let path = path.as_ref();
    let mut gold = GoldSample::default();
    for line in data_lines(path)? {
        let (n, line) = line?;
        let (id, value) = two_fields(path, n, &line)?;
        let target = match value {
            "+" => &mut gold.positives,
            "-" => &mut gold.negatives,
            other => return Err(Error::parse(path, n, format!("gold label must be + or -, found `{other}`"))),
        };
        target.insert(id.to_owned());
    }
    Ok(gold)
}

/// `item<TAB>{1|0}` lines, or `item<TAB>real` for a scored set.
pub fn format_labels(set: &LabelSet) -> String {
    let mut out = String::new();
    match &set.scores {
        Some(scores) => {
            for (id, v) in scores {
                out.push_str(&format!("{id}\t{v}\n"));
            }
        }
        None => {
            for (id, l) in &set.labels {
                out.push_str(&format!("{id}\t{}\n", u8::from(l.is_positive())));
            }
        }
    }
    out
}

pub fn format_gold(gold: &GoldSample) -> String {
    let mut out = String::new();
    for (id, label) in gold.iter() {
        out.push_str(id);
        out.push('\t');
        out.push(if label.is_positive() { '+' } else { '-' });
        out.push('\n');
    }
    out
}

/// Draws `n` positives and `n` negatives uniformly without replacement.
pub fn sample_gold(truth: &LabelSet, n: usize, seed: u64) -> Result<GoldSample> {
    let positives: Vec<&str> = truth.positives().collect();
    let negatives: Vec<&str> = truth.negatives().collect();
    if positives.len() < n {
        return Err(Error::InsufficientClass {
            class: "positives",
            needed: n,
            available: positives.len(),
        });
    }
    if negatives.len() < n {
        return Err(Error::InsufficientClass {
            class: "negatives",
            needed: n,
            available: negatives.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |pool: &[&str]| -> BTreeSet<String> {
        rand::seq::index::sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| pool[i].to_owned())
            .collect()
    };
    let positives = draw(&positives);
    let negatives = draw(&negatives);
    Ok(GoldSample { positives, negatives })
}

/// Free-text descriptions keyed by item id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetadataCorpus {
    pub documents: BTreeMap<String, String>,
}

impl MetadataCorpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for MetadataCorpus {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Self {
            documents: iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }
}

/// Loads `item_id<TAB>free text` lines. Repeated ids append to the document.
pub fn load_metadata(path: impl AsRef<Path>) -> Result<MetadataCorpus> {
    let path = path.as_ref();
    let mut corpus = MetadataCorpus::default();
    for line in data_lines(path)? {
        let (n, line) = line?;
        let (id, text) = line
            .split_once('\t')
            .map(|(a, b)| (a.trim(), b.trim()))
            .ok_or_else(|| Error::parse(path, n, "expected `item_id<TAB>text`"))?;
        if id.is_empty() || text.is_empty() {
            return Err(Error::parse(path, n, "empty item id or document"));
        }
        corpus
            .documents
            .entry(id.to_owned())
            .and_modify(|doc| {
                doc.push(' ');
                doc.push_str(text);
            })
            .or_insert_with(|| text.to_owned());
    }
    Ok(corpus)
}
