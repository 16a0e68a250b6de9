//! Seeded multi-repetition runners behind `pspace experiment`.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use perceptual_space::crowd::run_preset;
use perceptual_space::dataset::{load_labels, load_metadata, sample_gold, LabelSet};
use perceptual_space::expansion::{boost_loop, detect_noise, evaluate_flags, expand, flip_labels};
use perceptual_space::lsi::build_metadata_space;
use perceptual_space::metrics::{confusion, gmean, mean_std};
use perceptual_space::space::ItemEmbedding;

use crate::commands::{campaign_targets, num, pricing_of, restrict, selection, space_from};
use crate::io::{sub_seed, AnySpace, Outputs, Stream};
use crate::Experiment;

pub fn run(exp: &Experiment, seed: u64, verbose: bool, out: &mut Outputs, report: &mut String) -> Result<()> {
    match exp {
        Experiment::Table3 {
            source,
            truth,
            metadata,
            k,
            n,
            reps,
            folds,
            out: path,
        } => {
            let perceptual = space_from(source, seed, verbose, report)?;
            let meta = match metadata {
                Some(p) => {
                    let corpus = load_metadata(p)?;
                    Some(AnySpace::Metadata(build_metadata_space(&corpus, *k, sub_seed(seed, Stream::Train))?))
                }
                None => None,
            };
            let mut spaces: Vec<(&str, &dyn ItemEmbedding)> = vec![("perceptual", perceptual.embedding())];
            if let Some(m) = &meta {
                spaces.push(("metadata", m.embedding()));
            }
            let mut table = String::from("# attribute\tn\tspace\tmean\tstd\n");
            for path in truth {
                let mut labels = load_labels(path, false)?;
                for (_, s) in &spaces {
                    labels = restrict(&labels, s.item_ids());
                }
                for &size in n {
                    for &(name, space) in &spaces {
                        let mut scores = Vec::new();
                        for rep in rep_seeds(seed, *reps) {
                            let gold = sample_gold(&labels, size, sub_seed(rep, Stream::Sample))
                                .with_context(|| format!("{}: n = {size}", labels.attribute))?;
                            let result = expand(space, &gold, &labels.attribute, &selection(*folds, rep))?;
                            let g = gmean(&confusion(&result.to_label_set(), &labels)?)?;
                            if verbose {
                                writeln!(report, "{}\t{size}\t{name}\t{rep}\t{}", labels.attribute, num(g))?;
                            }
                            scores.push(g);
                        }
                        let (mean, sd) = mean_std(&scores);
                        writeln!(table, "{}\t{size}\t{name}\t{}\t{}", labels.attribute, num(mean), num(sd))?;
                    }
                }
            }
            report.push_str(&table);
            out.add(path, table);
        }
        Experiment::Table4 {
            source,
            truth,
            x,
            reps,
            folds,
            out: path,
        } => {
            let space = space_from(source, seed, verbose, report)?;
            let space = space.embedding();
            let labels = restrict(&load_labels(truth, false)?, space.item_ids());
            let mut table = String::from("# x\tprecision_mean\tprecision_std\trecall_mean\trecall_std\n");
            for &pct in x {
                let (mut precision, mut recall) = (Vec::new(), Vec::new());
                for rep in rep_seeds(seed, *reps) {
                    let (noisy, flips) = flip_labels(&labels, pct / 100.0, sub_seed(rep, Stream::Sample))?;
                    let flags = detect_noise(space, &noisy, &selection(*folds, rep))?;
                    let (p, r) = evaluate_flags(&flags, &flips);
                    if verbose {
                        let show = |v: Option<f64>| v.map_or("NA".into(), num);
                        writeln!(report, "{}\t{rep}\t{}\t{}", num(pct), show(p), show(r))?;
                    }
                    precision.extend(p);
                    recall.extend(r);
                }
                writeln!(table, "{}\t{}\t{}", num(pct), summary(&precision), summary(&recall))?;
            }
            report.push_str(&table);
            out.add(path, table);
        }
        Experiment::Figures34 {
            source,
            truth,
            preset,
            interval,
            folds,
            out: path,
        } => {
            let space = space_from(source, seed, verbose, report)?;
            let space = space.embedding();
            let all = load_labels(truth, false)?;
            let targets = campaign_targets(&all, *preset, None)?;
            let run = run_preset(*preset, &all, &targets, sub_seed(seed, Stream::Crowd))?;
            let scored = LabelSet::from_labels(
                all.attribute.clone(),
                targets.iter().map(|id| (id.clone(), all.labels[id])),
            );
            let scored = restrict(&scored, space.item_ids());
            let timeline = boost_loop(
                space,
                &run.stream,
                *interval,
                Some(&scored),
                &selection(*folds, seed),
                pricing_of(*preset),
            )?;
            let mut table = String::from("# sim_minutes\tdollars\ttrain_size\tcorrect\tmajority_correct\n");
            for c in &timeline.checkpoints {
                writeln!(
                    table,
                    "{}\t{}\t{}\t{}\t{}",
                    c.minutes,
                    perceptual_space::crowd::format_dollars(c.cents),
                    c.train_size,
                    c.correct.expect("truth given"),
                    c.majority_correct.expect("truth given"),
                )?;
            }
            writeln!(report, "checkpoints\t{}", timeline.checkpoints.len())?;
            writeln!(report, "judgments\t{}", run.stream.len())?;
            out.add(path, table);
        }
    }
    Ok(())
}

/// Repetition seeds `seed, seed + 1, …`; the default root seed gives 1..=reps.
fn rep_seeds(seed: u64, reps: u64) -> impl Iterator<Item = u64> {
    (0..reps).map(move |r| seed + r)
}

fn summary(values: &[f64]) -> String {
    if values.is_empty() {
        return "NA\tNA".into();
    }
    let (mean, sd) = mean_std(values);
    format!("{}\t{}", num(mean), num(sd))
}
