use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use perceptual_space::crowd::{
    campaign_cost, format_dollars, format_stream, load_stream, run_preset, Preset,
};
use perceptual_space::dataset::{
    load_gold, load_labels, load_metadata, load_ratings, sample_gold, IdTable, LabelSet, RatingFormat,
};
use perceptual_space::expansion::{
    boost_loop, detect_noise, expand, expand_regression, format_flags, format_predictions, format_regression,
    format_timeline, HitPricing, Selection,
};
use perceptual_space::factor::{gradient_check, train, ModelKind, PerceptualSpace, TrainConfig};
use perceptual_space::lsi::{build_metadata_space, format_metadata_space};
use perceptual_space::metrics::{classified_correct, confusion, gmean};
use perceptual_space::space::{format_space, nearest_neighbors};

use crate::io::{sub_seed, AnySpace, Outputs, Stream};
use crate::{Cli, Command, Metric, Model, SpaceArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    let mut out = Outputs::default();
    let mut report = String::new();
    match &cli.command {
        Command::BuildSpace { train, out: path } => {
            let space = train_space(train, seed, cli.verbose, &mut report)?;
            out.add(path, format_space(&space));
        }
        Command::Neighbors { space, item, k, out: path } => {
            let space = AnySpace::load(space)?;
            let space = space.embedding();
            let index = space
                .item_ids()
                .get(item)
                .with_context(|| format!("item `{item}` is not in the space"))?;
            let mut lines = String::new();
            for (j, d) in nearest_neighbors(space, index as usize, *k)? {
                writeln!(lines, "{}\t{}", space.item_ids().id(j as u32).expect("index from this space"), num(d))?;
            }
            report.push_str(&lines);
            if let Some(path) = path {
                out.add(path, lines);
            }
        }
        Command::Expand {
            space,
            gold,
            truth,
            n,
            labels,
            regression,
            folds,
            out: path,
        } => {
            let space = AnySpace::load(space)?;
            let space = space.embedding();
            let selection = selection(*folds, seed);
            if *regression {
                let labels = labels.as_ref().context("missing input: --regression needs --labels")?;
                let scores = load_labels(labels, true)?;
                let result = expand_regression(space, &scores, &selection)?;
                writeln!(report, "items\t{}", result.predictions.len())?;
                writeln!(report, "training\t{}", result.training_size)?;
                out.add(path, format_regression(&result));
            } else {
                let truth = truth.as_deref().map(|p| load_labels(p, false)).transpose()?;
                let (gold, attribute) = match (gold, &truth, n) {
                    (Some(g), _, _) => (load_gold(g)?, stem(g)),
                    (None, Some(t), Some(n)) => {
                        let t = restrict(t, space.item_ids());
                        (sample_gold(&t, *n, sub_seed(seed, Stream::Sample))?, t.attribute.clone())
                    }
                    _ => bail!("missing input: --gold, or --truth together with --n"),
                };
                let result = expand(space, &gold, &attribute, &selection)?;
                let positives = result.predictions.values().filter(|(l, _)| l.is_positive()).count();
                writeln!(report, "items\t{}", result.predictions.len())?;
                writeln!(report, "positive\t{positives}")?;
                writeln!(report, "training\t{}", result.training_size)?;
                writeln!(report, "C\t{}", num(result.config.c))?;
                writeln!(report, "gamma\t{}", num(result.config.gamma))?;
                if let Some(t) = &truth {
                    let c = confusion(&result.to_label_set(), &restrict(t, space.item_ids()))?;
                    writeln!(report, "gmean\t{}", num(gmean(&c)?))?;
                }
                out.add(path, format_predictions(&result));
            }
        }
        Command::DetectNoise {
            space,
            labels,
            folds,
            out: path,
        } => {
            let space = AnySpace::load(space)?;
            let labels = load_labels(labels, false)?;
            let flags = detect_noise(space.embedding(), &labels, &selection(*folds, seed))?;
            writeln!(report, "labeled\t{}", labels.labels.len())?;
            writeln!(report, "flagged\t{}", flags.flagged.len())?;
            out.add(path, format_flags(&flags));
        }
        Command::SimulateCrowd {
            truth,
            preset,
            n,
            out: path,
        } => {
            let truth = load_labels(truth, false)?;
            let items = campaign_targets(&truth, *preset, *n)?;
            let run = run_preset(*preset, &truth, &items, sub_seed(seed, Stream::Crowd))?;
            let score = classified_correct(&run.majorities, &truth);
            writeln!(report, "items\t{}", items.len())?;
            writeln!(report, "judgments\t{}", run.ledger.judgments)?;
            writeln!(report, "kept\t{}", run.stream.len())?;
            writeln!(report, "workers\t{}", run.ledger.workers.len())?;
            writeln!(report, "excluded\t{}", run.ledger.excluded.len())?;
            writeln!(report, "minutes\t{}", num(run.ledger.total_minutes))?;
            writeln!(report, "dollars\t{}", format_dollars(campaign_cost(&run.ledger)))?;
            writeln!(report, "classified\t{}", score.classified)?;
            writeln!(report, "correct\t{}", score.correct)?;
            writeln!(report, "percent\t{}", score.percent.map_or("NA".into(), num))?;
            out.add(path, format_stream(&run.stream));
        }
        Command::Boost {
            space,
            judgments,
            truth,
            interval,
            preset,
            folds,
            out: path,
        } => {
            let space = AnySpace::load(space)?;
            let stream = load_stream(judgments)?;
            let truth = truth.as_deref().map(|p| load_labels(p, false)).transpose()?;
            let pricing = preset.map_or_else(HitPricing::default, pricing_of);
            let timeline = boost_loop(
                space.embedding(),
                &stream,
                *interval,
                truth.as_ref(),
                &selection(*folds, seed),
                pricing,
            )?;
            let last = timeline.checkpoints.last().expect("at least one checkpoint");
            writeln!(report, "checkpoints\t{}", timeline.checkpoints.len())?;
            writeln!(report, "train_size\t{}", last.train_size)?;
            if let (Some(c), Some(m)) = (last.correct, last.majority_correct) {
                writeln!(report, "correct\t{c}")?;
                writeln!(report, "majority_correct\t{m}")?;
            }
            out.add(path, format_timeline(&timeline));
        }
        Command::Eval {
            pred,
            truth,
            metric,
            out: path,
        } => {
            let pred = load_labels(pred, false)?;
            let truth = load_labels(truth, false)?;
            let c = confusion(&pred, &truth)?;
            let mut lines = String::new();
            match metric {
                Metric::Gmean => writeln!(lines, "gmean\t{}", num(gmean(&c)?))?,
                Metric::Pr => {
                    writeln!(lines, "precision\t{}", c.precision().map_or("NA".into(), num))?;
                    writeln!(lines, "recall\t{}", c.recall().map_or("NA".into(), num))?;
                }
                Metric::Accuracy => writeln!(lines, "accuracy\t{}", c.accuracy().map_or("NA".into(), num))?,
            }
            report.push_str(&lines);
            if let Some(path) = path {
                out.add(path, lines);
            }
        }
        Command::Lsi { metadata, k, out: path } => {
            let corpus = load_metadata(metadata)?;
            let space = build_metadata_space(&corpus, *k, sub_seed(seed, Stream::Train))?;
            writeln!(report, "documents\t{}", space.items.len())?;
            writeln!(report, "terms\t{}", space.vocabulary.len())?;
            writeln!(report, "k\t{}", space.k)?;
            out.add(path, format_metadata_space(&space));
        }
        Command::Gradcheck { dim, n, out: path } => {
            let mut lines = String::new();
            for kind in [ModelKind::Euclidean, ModelKind::Svd] {
                let cfg = TrainConfig {
                    dim: *dim,
                    kind,
                    ..TrainConfig::default()
                };
                cfg.validate()?;
                let err = gradient_check(&cfg, *n, 1e-5, sub_seed(seed, Stream::Train));
                writeln!(lines, "{}\t{}", kind.to_string().to_lowercase(), num(err))?;
            }
            report.push_str(&lines);
            if let Some(path) = path {
                out.add(path, lines);
            }
        }
        Command::Experiment(exp) => crate::experiment::run(exp, seed, cli.verbose, &mut out, &mut report)?,
    }
    out.commit()?;
    print!("{report}");
    Ok(())
}

/// Shortest round-trip decimal form, always with a fractional part.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn selection(folds: usize, seed: u64) -> Selection {
    Selection::Auto {
        folds,
        seed: sub_seed(seed, Stream::Sample),
    }
}

pub fn pricing_of(preset: Preset) -> HitPricing {
    let cfg = preset.config(0);
    HitPricing {
        hit_size: cfg.hit_size,
        price_cents: cfg.price_cents,
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Labels for items present in `items` only.
pub fn restrict(labels: &LabelSet, items: &IdTable) -> LabelSet {
    LabelSet::from_labels(
        labels.attribute.clone(),
        labels
            .labels
            .iter()
            .filter(|(id, _)| items.get(id).is_some())
            .map(|(id, &l)| (id.clone(), l)),
    )
}

/// The first `n` truth items in id order; by default all of them, or as many
/// as leave room for the preset's gold ratio.
pub fn campaign_targets(truth: &LabelSet, preset: Preset, n: Option<usize>) -> Result<Vec<String>> {
    let ratio = preset.config(0).gold_ratio;
    let n = n.unwrap_or_else(|| (truth.labels.len() as f64 / (1.0 + ratio)).floor() as usize);
    if n == 0 || n > truth.labels.len() {
        bail!("--n must be between 1 and {} (the truth file size)", truth.labels.len());
    }
    Ok(truth.labels.keys().take(n).cloned().collect())
}

pub fn train_space(args: &TrainArgs, seed: u64, verbose: bool, report: &mut String) -> Result<PerceptualSpace> {
    let ratings = args.ratings.as_ref().context("missing input: --ratings")?;
    let mut format = if args.movielens {
        RatingFormat::movielens()
    } else {
        RatingFormat::default()
    };
    (format.scale_min, format.scale_max) = args.scale;
    let (ds, loaded) = load_ratings(ratings, &format)?;
    let cfg = TrainConfig {
        dim: args.dim,
        lambda: args.lambda,
        learning_rate: args.lr,
        epochs: args.epochs,
        init_scale: None,
        seed: sub_seed(seed, Stream::Train),
        kind: match args.model {
            Model::Euclidean => ModelKind::Euclidean,
            Model::Svd => ModelKind::Svd,
        },
    };
    if verbose {
        eprintln!(
            "training {} model, d={} on {} ratings ({} items, {} users)",
            cfg.kind,
            cfg.dim,
            ds.len(),
            ds.n_items(),
            ds.n_users()
        );
    }
    let (space, tr) = train(&ds, &cfg, None)?;
    writeln!(report, "items\t{}", ds.n_items())?;
    writeln!(report, "users\t{}", ds.n_users())?;
    writeln!(report, "ratings\t{}", ds.len())?;
    writeln!(report, "duplicates\t{}", loaded.duplicates)?;
    writeln!(report, "initial_cost\t{}", num(tr.initial_cost))?;
    writeln!(report, "final_cost\t{}", num(tr.final_cost))?;
    Ok(space)
}

/// Loads `--space`, or trains one from the ratings flags.
pub fn space_from(args: &SpaceArgs, seed: u64, verbose: bool, report: &mut String) -> Result<AnySpace> {
    match &args.space {
        Some(path) => AnySpace::load(path),
        None => Ok(AnySpace::Perceptual(train_space(&args.train, seed, verbose, report)?)),
    }
}
