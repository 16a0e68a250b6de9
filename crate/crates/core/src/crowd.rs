//! Simulated crowd campaigns: worker populations, HIT batching, timing,
//! payment, majority voting and gold-question filtering.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Label, LabelSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerProfile {
    /// Probability that the worker recognises a given item.
    pub know_prob: f64,
    pub honest: bool,
    /// Probability of answering positive when not answering honestly.
    pub positive_bias: f64,
    /// Probability that an honest answer on a known item matches the truth.
    pub accuracy: f64,
    pub judgments_per_minute: f64,
    pub population_weight: f64,
}

impl WorkerProfile {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.know_prob, self.positive_bias, self.accuracy, self.population_weight];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(format!("worker probabilities must lie in [0, 1]: {self:?}")));
        }
        if !(self.judgments_per_minute > 0.0 && self.judgments_per_minute.is_finite()) {
            return Err(Error::InvalidArgument("judgments_per_minute must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Response {
    Positive,
    Negative,
    Unknown,
}

impl Response {
    pub fn label(self) -> Option<Label> {
        match self {
            Response::Positive => Some(Label::Positive),
            Response::Negative => Some(Label::Negative),
            Response::Unknown => None,
        }
    }

    fn code(self) -> &'static str {
        match self {
            Response::Positive => "1",
            Response::Negative => "0",
            Response::Unknown => "?",
        }
    }
}

impl From<Label> for Response {
    fn from(l: Label) -> Self {
        match l {
            Label::Positive => Response::Positive,
            Label::Negative => Response::Negative,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Vote {
    Positive,
    Negative,
    Unclassified,
}

impl Vote {
    pub fn label(self) -> Option<Label> {
        match self {
            Vote::Positive => Some(Label::Positive),
            Vote::Negative => Some(Label::Negative),
            Vote::Unclassified => None,
        }
    }
}

impl From<Label> for Vote {
    fn from(l: Label) -> Self {
        match l {
            Label::Positive => Vote::Positive,
            Label::Negative => Vote::Negative,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Judgment {
    pub minutes: f64,
    pub worker: String,
    pub item: String,
    pub response: Response,
}

/// Exclusion rule for workers who fail gold questions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldRule {
    pub min_golds_seen: usize,
    pub max_error_rate: f64,
}

impl Default for GoldRule {
    fn default() -> Self {
        Self {
            min_golds_seen: 5,
            max_error_rate: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignConfig {
    pub judgments_per_item: usize,
    pub hit_size: usize,
    pub price_cents: u64,
    /// Gold items added per target item; drawn from truth items outside the targets.
    pub gold_ratio: f64,
    pub gold_rule: GoldRule,
    /// Workers present at the start; more join only when every present worker is out of work.
    pub workers: usize,
    /// Whether a "don't know" answer is offered.
    pub allow_unknown: bool,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            judgments_per_item: 10,
            hit_size: 10,
            price_cents: 2,
            gold_ratio: 0.0,
            gold_rule: GoldRule::default(),
            workers: 50,
            allow_unknown: true,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorkerStats {
    pub worker: String,
    pub profile: usize,
    pub hits: u64,
    pub judgments: u64,
    pub first_minutes: f64,
    pub last_minutes: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CampaignLedger {
    pub hits: u64,
    pub price_cents: u64,
    pub total_minutes: f64,
    pub judgments: u64,
    pub workers: Vec<WorkerStats>,
    pub excluded: Vec<String>,
    /// Gold items and their known answers.
    pub gold: BTreeMap<String, Label>,
}

/// Payment in cents: completed HITs times the HIT price.
pub fn campaign_cost(ledger: &CampaignLedger) -> u64 {
    ledger.hits * ledger.price_cents
}

pub fn format_dollars(cents: u64) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}

pub fn worker_id(k: usize) -> String {
    format!("w{k:04}")
}

/// Draws one simulated campaign over `items`.
///
/// Each item is judged `judgments_per_item` times: every pass shuffles the
/// items (targets and gold) into HITs of `hit_size`. The worker who becomes
/// free first takes the first queued HIT containing nothing it has already
/// judged; a worker with no such HIT leaves, and a fresh cohort joins once
/// everyone has left.
pub fn simulate_campaign(
    truth: &LabelSet,
    items: &[String],
    profiles: &[WorkerProfile],
    cfg: &CampaignConfig,
) -> Result<(Vec<Judgment>, CampaignLedger)> {
    if profiles.is_empty() {
        return Err(Error::InvalidArgument("no worker profiles".into()));
    }
    for p in profiles {
        p.validate()?;
    }
    let weight_sum: f64 = profiles.iter().map(|p| p.population_weight).sum();
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("profile weights sum to {weight_sum}, expected 1")));
    }
    if cfg.hit_size == 0 || cfg.judgments_per_item == 0 || cfg.workers == 0 {
        return Err(Error::InvalidArgument("hit_size, judgments_per_item and workers must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.gold_ratio) {
        return Err(Error::InvalidArgument("gold_ratio must lie in [0, 1]".into()));
    }
    let unique: BTreeSet<&String> = items.iter().collect();
    if unique.len() != items.len() {
        return Err(Error::InvalidArgument("campaign items must be distinct".into()));
    }
    let missing: Vec<String> = items.iter().filter(|i| !truth.labels.contains_key(*i)).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::CoverageGap(missing));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_gold = (cfg.gold_ratio * items.len() as f64).round() as usize;
    let pool: Vec<&String> = truth.labels.keys().filter(|k| !unique.contains(k)).collect();
    if pool.len() < n_gold {
        return Err(Error::InsufficientClass {
            class: "gold candidates",
            needed: n_gold,
            available: pool.len(),
        });
    }
    let gold: BTreeMap<String, Label> = rand::seq::index::sample(&mut rng, pool.len(), n_gold)
        .into_iter()
        .map(|i| (pool[i].clone(), truth.labels[pool[i]]))
        .collect();

    let mut all_items: Vec<&str> = items.iter().map(String::as_str).collect();
    all_items.extend(gold.keys().map(String::as_str));
    let mut queue: Vec<Vec<&str>> = Vec::new();
    for _ in 0..cfg.judgments_per_item {
        let mut pass = all_items.clone();
        pass.shuffle(&mut rng);
        queue.extend(pass.chunks(cfg.hit_size).map(<[&str]>::to_vec));
    }

    let mixture = WeightedIndex::new(profiles.iter().map(|p| p.population_weight))
        .map_err(|e| Error::InvalidArgument(format!("profile weights: {e}")))?;
    struct Worker<'a> {
        profile: usize,
        clock: f64,
        seen: HashSet<&'a str>,
        active: bool,
        stats: WorkerStats,
    }
    let mut workers: Vec<Worker> = Vec::new();
    let hire = |workers: &mut Vec<Worker>, rng: &mut ChaCha8Rng, clock: f64| {
        let k = workers.len();
        workers.push(Worker {
            profile: mixture.sample(rng),
            clock,
            seen: HashSet::new(),
            active: true,
            stats: WorkerStats {
                worker: worker_id(k),
                ..WorkerStats::default()
            },
        });
    };
    for _ in 0..cfg.workers {
        hire(&mut workers, &mut rng, 0.0);
    }

    let mut stream = Vec::new();
    let mut hits = 0u64;
    while !queue.is_empty() {
        let next = workers
            .iter()
            .enumerate()
            .filter(|(_, w)| w.active)
            .min_by(|(_, a), (_, b)| a.clock.total_cmp(&b.clock))
            .map(|(k, _)| k);
        let Some(k) = next else {
            let clock = workers.iter().map(|w| w.clock).fold(0.0, f64::max);
            for _ in 0..cfg.workers.min(queue.len()) {
                hire(&mut workers, &mut rng, clock);
            }
            continue;
        };
        let w = &mut workers[k];
        let Some(pos) = queue.iter().position(|hit| hit.iter().all(|i| !w.seen.contains(i))) else {
            w.active = false;
            continue;
        };
        let hit = queue.remove(pos);
        let profile = &profiles[w.profile];
        if w.stats.hits == 0 {
            w.stats.first_minutes = w.clock;
        }
        for item in hit {
            w.clock += 1.0 / profile.judgments_per_minute;
            w.seen.insert(item);
            let actual = truth.labels[item];
            stream.push(Judgment {
                minutes: w.clock,
                worker: w.stats.worker.clone(),
                item: item.to_owned(),
                response: respond(profile, actual, cfg.allow_unknown, &mut rng),
            });
            w.stats.judgments += 1;
        }
        w.stats.hits += 1;
        w.stats.last_minutes = w.clock;
        hits += 1;
    }
    // stable: simultaneous judgments keep assignment order
    stream.sort_by(|a, b| a.minutes.total_cmp(&b.minutes));

    let ledger = CampaignLedger {
        hits,
        price_cents: cfg.price_cents,
        total_minutes: stream.last().map_or(0.0, |j| j.minutes),
        judgments: stream.len() as u64,
        workers: workers
            .into_iter()
            .map(|w| WorkerStats { profile: w.profile, ..w.stats })
            .collect(),
        excluded: Vec::new(),
        gold,
    };
    Ok((stream, ledger))
}

fn respond(p: &WorkerProfile, actual: Label, allow_unknown: bool, rng: &mut ChaCha8Rng) -> Response {
    let knows = rng.random::<f64>() < p.know_prob;
    let guess = |rng: &mut ChaCha8Rng| Response::from(Label::from_bool(rng.random::<f64>() < p.positive_bias));
    match (knows, p.honest) {
        (true, true) => {
            let correct = rng.random::<f64>() < p.accuracy;
            Response::from(if correct { actual } else { actual.flipped() })
        }
        (true, false) => guess(rng),
        (false, _) if allow_unknown => Response::Unknown,
        (false, _) => guess(rng),
    }
}

/// Strict majority over the non-UNKNOWN responses.
pub fn majority_vote(responses: impl IntoIterator<Item = Response>) -> Vote {
    let (mut pos, mut neg) = (0usize, 0usize);
    for r in responses {
        match r {
            Response::Positive => pos += 1,
            Response::Negative => neg += 1,
            Response::Unknown => {}
        }
    }
    match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => Vote::Positive,
        std::cmp::Ordering::Less => Vote::Negative,
        std::cmp::Ordering::Equal => Vote::Unclassified,
    }
}

/// Majority per item of `items` over `stream`; items without judgments are unclassified.
pub fn majority_votes<'a>(stream: impl IntoIterator<Item = &'a Judgment>, items: &[String]) -> BTreeMap<String, Vote> {
    let mut responses: BTreeMap<&str, Vec<Response>> = items.iter().map(|i| (i.as_str(), Vec::new())).collect();
    for j in stream {
        if let Some(r) = responses.get_mut(j.item.as_str()) {
            r.push(j.response);
        }
    }
    responses
        .into_iter()
        .map(|(item, r)| (item.to_owned(), majority_vote(r)))
        .collect()
}

/// Drops every judgment of workers that fail the gold rule, returning the
/// surviving stream and the excluded workers in order of exclusion.
pub fn apply_gold_filter(stream: &[Judgment], gold: &BTreeMap<String, Label>, rule: GoldRule) -> (Vec<Judgment>, Vec<String>) {
    let mut seen: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut excluded: Vec<String> = Vec::new();
    let mut is_excluded: HashSet<&str> = HashSet::new();
    for j in stream {
        let Some(&answer) = gold.get(&j.item) else { continue };
        if is_excluded.contains(j.worker.as_str()) {
            continue;
        }
        let entry = seen.entry(&j.worker).or_default();
        entry.0 += 1;
        if j.response.label() != Some(answer) {
            entry.1 += 1;
        }
        let (total, wrong) = *entry;
        if total >= rule.min_golds_seen && wrong as f64 / total as f64 > rule.max_error_rate {
            is_excluded.insert(&j.worker);
            excluded.push(j.worker.clone());
        }
    }
    let kept = stream.iter().filter(|j| !is_excluded.contains(j.worker.as_str())).cloned().collect();
    (kept, excluded)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Open population with a large dishonest group.
    Exp1,
    /// Dishonest group removed from the population.
    Exp2,
    /// Look-up task without a "don't know" option, gold questions and a higher price.
    Exp3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Exp1, Preset::Exp2, Preset::Exp3];

    pub fn profiles(self) -> Vec<WorkerProfile> {
        let honest = WorkerProfile {
            know_prob: 0.26,
            honest: true,
            positive_bias: 0.3,
            accuracy: HONEST_ACCURACY,
            judgments_per_minute: 1.0,
            population_weight: 1.0,
        };
        let dishonest = WorkerProfile {
            know_prob: 0.94,
            honest: false,
            positive_bias: 0.56,
            accuracy: 0.5,
            judgments_per_minute: 1.0,
            population_weight: 0.0,
        };
        match self {
            Preset::Exp1 => vec![
                WorkerProfile {
                    judgments_per_minute: 1.14,
                    population_weight: 0.6,
                    ..honest
                },
                WorkerProfile {
                    judgments_per_minute: 1.14,
                    population_weight: 0.4,
                    ..dishonest
                },
            ],
            Preset::Exp2 => vec![WorkerProfile {
                judgments_per_minute: 3.55,
                ..honest
            }],
            Preset::Exp3 => vec![
                WorkerProfile {
                    know_prob: 1.0,
                    accuracy: 0.95,
                    judgments_per_minute: 0.39,
                    population_weight: 0.7,
                    ..honest
                },
                WorkerProfile {
                    know_prob: 1.0,
                    positive_bias: 0.5,
                    judgments_per_minute: 0.39,
                    population_weight: 0.3,
                    ..dishonest
                },
            ],
        }
    }

    pub fn config(self, seed: u64) -> CampaignConfig {
        let base = CampaignConfig {
            seed,
            ..CampaignConfig::default()
        };
        match self {
            Preset::Exp1 => CampaignConfig { workers: 89, ..base },
            Preset::Exp2 => CampaignConfig { workers: 27, ..base },
            Preset::Exp3 => CampaignConfig {
                workers: 51,
                price_cents: 3,
                gold_ratio: 0.1,
                allow_unknown: false,
                ..base
            },
        }
    }
}

/// Honest-worker accuracy on known items, the single calibration constant.
pub const HONEST_ACCURACY: f64 = 0.70;

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Exp1 => "exp1",
            Preset::Exp2 => "exp2",
            Preset::Exp3 => "exp3",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Preset::Exp1),
            "exp2" => Ok(Preset::Exp2),
            "exp3" => Ok(Preset::Exp3),
            other => Err(Error::InvalidArgument(format!("unknown preset {other:?} (expected exp1, exp2 or exp3)"))),
        }
    }
}

/// Result of running a preset: the stream after gold filtering and the
/// majority vote over the target items.
#[derive(Clone, Debug)]
pub struct PresetRun {
    pub stream: Vec<Judgment>,
    pub ledger: CampaignLedger,
    pub majorities: BTreeMap<String, Vote>,
}

pub fn run_preset(preset: Preset, truth: &LabelSet, items: &[String], seed: u64) -> Result<PresetRun> {
    let cfg = preset.config(seed);
    let (raw, mut ledger) = simulate_campaign(truth, items, &preset.profiles(), &cfg)?;
    let stream = if ledger.gold.is_empty() {
        raw
    } else {
        let (kept, excluded) = apply_gold_filter(&raw, &ledger.gold, cfg.gold_rule);
        ledger.excluded = excluded;
        kept
    };
    let majorities = majority_votes(&stream, items);
    Ok(PresetRun {
        stream,
        ledger,
        majorities,
    })
}

pub fn format_stream(stream: &[Judgment]) -> String {
    let mut out = String::new();
    for j in stream {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", j.minutes, j.worker, j.item, j.response.code()));
    }
    out
}

/// Reads `sim_minutes<TAB>worker<TAB>item<TAB>{1|0|?}` lines.
pub fn load_stream(path: &Path) -> Result<Vec<Judgment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stream(&text, path)
}

pub fn parse_stream(text: &str, path: &Path) -> Result<Vec<Judgment>> {
    let mut stream = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(path, line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let minutes: f64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad timestamp {:?}", fields[0])))?;
        if !(minutes >= 0.0 && minutes.is_finite()) {
            return Err(Error::parse(path, line_no, "timestamps must be finite and non-negative"));
        }
        let response = match fields[3] {
            "1" => Response::Positive,
            "0" => Response::Negative,
            "?" => Response::Unknown,
            other => return Err(Error::parse(path, line_no, format!("bad response {other:?}"))),
        };
        stream.push(Judgment {
            minutes,
            worker: fields[1].to_owned(),
            item: fields[2].to_owned(),
            response,
        });
    }
    if stream.windows(2).any(|w| w[1].minutes < w[0].minutes) {
        return Err(Error::InvalidArgument(format!("{}: judgments are not in time order", path.display())));
    }
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::classified_correct;
    use crate::synthetic::random_truth;
    use proptest::prelude::*;

    fn truth(n: usize) -> (LabelSet, Vec<String>) {
        let t = random_truth(n, 0.301, 11, "is_comedy");
        let items = t.labels.keys().cloned().collect();
        (t, items)
    }

    fn single(p: WorkerProfile) -> Vec<WorkerProfile> {
        vec![WorkerProfile { population_weight: 1.0, ..p }]
    }

    fn honest(know: f64, acc: f64) -> WorkerProfile {
        WorkerProfile {
            know_prob: know,
            honest: true,
            positive_bias: 0.5,
            accuracy: acc,
            judgments_per_minute: 2.0,
            population_weight: 1.0,
        }
    }

    use Response::{Negative as N, Positive as P, Unknown as U};

    #[test]
    fn majority_rules() {
        let mut v = vec![P; 5];
        v.extend([N; 3]);
        v.extend([U; 2]);
        assert_eq!(majority_vote(v), Vote::Positive);
        let mut v = vec![P; 4];
        v.extend([N; 4]);
        v.extend([U; 2]);
        assert_eq!(majority_vote(v), Vote::Unclassified);
        assert_eq!(majority_vote([]), Vote::Unclassified);
        assert_eq!(majority_vote([U, U]), Vote::Unclassified);
    }

    #[test]
    fn cost_examples() {
        let (t, items) = truth(1000);
        let (_, ledger) = simulate_campaign(&t, &items, &single(honest(0.5, 0.9)), &CampaignConfig::default()).unwrap();
        assert_eq!(ledger.hits, 1000);
        assert_eq!(format_dollars(campaign_cost(&ledger)), "20.00");
        assert_eq!(campaign_cost(&CampaignLedger::default()), 0);

        let (t, _) = truth(1100);
        let items: Vec<String> = t.labels.keys().take(1000).cloned().collect();
        let cfg = CampaignConfig {
            price_cents: 3,
            gold_ratio: 0.1,
            ..CampaignConfig::default()
        };
        let (stream, ledger) = simulate_campaign(&t, &items, &single(honest(0.5, 0.9)), &cfg).unwrap();
        assert_eq!(ledger.gold.len(), 100);
        assert_eq!(stream.len(), 11_000);
        assert_eq!(format_dollars(campaign_cost(&ledger)), "33.00");
    }

    #[test]
    fn stream_invariants() {
        let (t, items) = truth(300);
        let (stream, ledger) = simulate_campaign(&t, &items, &Preset::Exp1.profiles(), &CampaignConfig::default()).unwrap();
        assert_eq!(stream.len(), 3000);
        assert_eq!(ledger.judgments, 3000);
        let mut pairs = HashSet::new();
        let mut last: BTreeMap<&str, f64> = BTreeMap::new();
        for j in &stream {
            assert!(pairs.insert((&j.worker, &j.item)), "worker judged an item twice");
            let prev = last.insert(&j.worker, j.minutes).unwrap_or(0.0);
            assert!(j.minutes >= prev);
        }
        let per_item = majority_votes(&stream, &items);
        assert_eq!(per_item.len(), 300);
    }

    #[test]
    fn nobody_knows_anything() {
        let (t, items) = truth(100);
        let (stream, _) = simulate_campaign(&t, &items, &single(honest(0.0, 1.0)), &CampaignConfig::default()).unwrap();
        assert!(stream.iter().all(|j| j.response == U));
    }

    #[test]
    fn perfect_honest_crowd_reproduces_truth() {
        let (t, items) = truth(200);
        let (stream, _) = simulate_campaign(&t, &items, &single(honest(1.0, 1.0)), &CampaignConfig::default()).unwrap();
        let votes = majority_votes(&stream, &items);
        for (id, v) in votes {
            assert_eq!(v.label(), Some(t.labels[&id]));
        }
    }

    #[test]
    fn dishonest_positive_rate() {
        let (t, items) = truth(1000);
        let p = WorkerProfile {
            know_prob: 0.94,
            honest: false,
            positive_bias: 0.56,
            accuracy: 0.5,
            judgments_per_minute: 1.0,
            population_weight: 1.0,
        };
        let (stream, _) = simulate_campaign(&t, &items, &[p], &CampaignConfig::default()).unwrap();
        let pos = stream.iter().filter(|j| j.response == P).count() as f64 / stream.len() as f64;
        assert!((pos - 0.56 * 0.94).abs() < 0.03, "{pos}");
    }

    #[test]
    fn weights_must_sum_to_one() {
        let (t, items) = truth(10);
        let bad = vec![WorkerProfile {
            population_weight: 0.5,
            ..honest(0.5, 0.5)
        }];
        assert!(simulate_campaign(&t, &items, &bad, &CampaignConfig::default()).is_err());
    }

    #[test]
    fn deterministic_stream() {
        let (t, items) = truth(200);
        let cfg = CampaignConfig { seed: 9, ..CampaignConfig::default() };
        let a = simulate_campaign(&t, &items, &Preset::Exp1.profiles(), &cfg).unwrap().0;
        let b = simulate_campaign(&t, &items, &Preset::Exp1.profiles(), &cfg).unwrap().0;
        assert_eq!(format_stream(&a), format_stream(&b));
    }

    fn j(worker: &str, item: &str, r: Response, minutes: f64) -> Judgment {
        Judgment {
            minutes,
            worker: worker.into(),
            item: item.into(),
            response: r,
        }
    }

    #[test]
    fn gold_filter_rules() {
        let gold: BTreeMap<String, Label> = (0..5).map(|i| (format!("g{i}"), Label::Positive)).collect();
        let mut stream = vec![j("bad", "x", P, 0.5), j("good", "x", P, 0.5)];
        for i in 0..5 {
            stream.push(j("good", &format!("g{i}"), P, 1.0 + i as f64));
            stream.push(j("bad", &format!("g{i}"), N, 1.0 + i as f64));
        }
        stream.push(j("bad", "y", P, 9.0));
        let (kept, excluded) = apply_gold_filter(&stream, &gold, GoldRule::default());
        assert_eq!(excluded, vec!["bad"]);
        assert!(kept.iter().all(|j| j.worker == "good"));
        assert_eq!(kept.len(), 6);
    }

    #[test]
    fn stream_file_round_trip() {
        let (t, items) = truth(50);
        let (stream, _) = simulate_campaign(&t, &items, &Preset::Exp1.profiles(), &CampaignConfig::default()).unwrap();
        let text = format_stream(&stream);
        let back = parse_stream(&text, Path::new("s.tsv")).unwrap();
        assert_eq!(back, stream);
        assert!(parse_stream("1\tw\tm\tx\n", Path::new("s.tsv")).is_err());
        assert!(parse_stream("2\tw\tm\t1\n1\tw\tn\t1\n", Path::new("s.tsv")).is_err());
    }

    #[test]
    fn exp1_lands_in_band() {
        let (t, items) = truth(1000);
        let run = run_preset(Preset::Exp1, &t, &items, 1).unwrap();
        let cc = classified_correct(&run.majorities, &t);
        let pct = cc.percent.unwrap();
        assert!((50.0..=70.0).contains(&pct), "{pct}");
    }

    proptest! {
        #[test]
        fn majority_ignores_unknown_and_order(
            mut votes in proptest::collection::vec(0u8..3, 0..30),
            extra in 0usize..10,
        ) {
            let to = |v: &u8| match v { 0 => P, 1 => N, _ => U };
            let base = majority_vote(votes.iter().map(to));
            votes.reverse();
            prop_assert_eq!(majority_vote(votes.iter().map(to)), base);
            votes.extend(std::iter::repeat_n(2u8, extra));
            prop_assert_eq!(majority_vote(votes.iter().map(to)), base);
        }
    }
}
