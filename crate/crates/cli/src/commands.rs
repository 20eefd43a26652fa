use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use dialclean_core::chunker::{chunk_conversation, Hit};
use dialclean_core::detectors::{build_detector, DetectorContext, DetectorSpec, Lexicon, Scope};
use dialclean_core::io::{read_jsonl, to_jsonl_string};
use dialclean_core::markup::{
    annotate_disfluencies, preprocess_conversation, MarkupOptions, RawConversation,
};
use dialclean_core::model::{dataset_stats, Conversation, LabelSet, LabelSource, PipelineConfig};
use dialclean_core::par::Executor;
use dialclean_core::pipeline::{
    evaluate_corpus, render_clean, render_marked, run_combined_corpus, run_two_stage_corpus,
    union_example,
};
use dialclean_core::quality::{corpus_kappa, turn_ratings, Annotation, TurnRatings};
use dialclean_service::payload::CreateBatch;
use dialclean_service::store::read_only;
use dialclean_service::Settings;
use serde_json::json;

use crate::error::CliError;
use crate::output::Outputs;
use crate::{
    AggregateArgs, ChunkArgs, DetectArgs, EvaluateArgs, KappaArgs, Mode, PreprocessArgs, StatsArgs,
};

fn load<T: serde::de::DeserializeOwned>(
    out: &mut Outputs,
    path: &Path,
) -> Result<Vec<T>, CliError> {
    out.input(path);
    Ok(read_jsonl(path)?)
}

fn by_conv(sets: Vec<LabelSet>, path: &Path) -> Result<BTreeMap<String, LabelSet>, CliError> {
    let mut map = BTreeMap::new();
    for set in sets {
        let id = set.conv_id.clone();
        if map.insert(id.clone(), set).is_some() {
            return Err(CliError::data(
                "duplicate",
                format!("{}: more than one label set for {id}", path.display()),
            ));
        }
    }
    Ok(map)
}

fn markup_options(cfg: &PipelineConfig) -> MarkupOptions {
    MarkupOptions {
        keep_uncertain_words: cfg.keep_uncertain_words,
    }
}

pub fn preprocess(a: &PreprocessArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut out = Outputs::new("preprocess", a, cfg);
    let raws: Vec<RawConversation> = load(&mut out, &a.input)?;
    let want_full =
        a.full_output.is_some() || a.disfluency_gold_output.is_some() || a.mtd_gold.is_some();
    let opts = markup_options(cfg);
    let exec = Executor::new(a.jobs);
    let results = exec.try_map(&raws, |r| {
        let pre = preprocess_conversation(r, opts)?;
        let ann = if want_full {
            Some(annotate_disfluencies(r, opts)?)
        } else {
            None
        };
        Ok::<_, CliError>((pre, ann))
    })?;

    let cleaned: Vec<&Conversation> = results.iter().map(|(p, _)| &p.conversation).collect();
    out.write(
        &a.output,
        to_jsonl_string(cleaned.iter().copied()).as_bytes(),
    )?;
    if let Some(path) = &a.trace {
        out.write(
            path,
            to_jsonl_string(results.iter().map(|(p, _)| &p.trace)).as_bytes(),
        )?;
    }
    let anns: Vec<_> = results.iter().filter_map(|(_, a)| a.as_ref()).collect();
    if let Some(path) = &a.full_output {
        out.write(
            path,
            to_jsonl_string(anns.iter().map(|a| &a.full)).as_bytes(),
        )?;
    }
    if let Some(path) = &a.disfluency_gold_output {
        out.write(
            path,
            to_jsonl_string(anns.iter().map(|a| &a.disfluencies)).as_bytes(),
        )?;
    }
    if let Some(gold_path) = &a.mtd_gold {
        let gold = by_conv(load(&mut out, gold_path)?, gold_path)?;
        let mut examples = Vec::with_capacity(anns.len());
        for ann in &anns {
            let id = ann.cleaned.conv_id();
            let set = gold.get(id).ok_or_else(|| {
                CliError::data(
                    "missing_gold",
                    format!("{}: no label set for {id}", gold_path.display()),
                )
            })?;
            examples.push(union_example(ann, set)?);
        }
        if let Some(path) = &a.mtd_gold_output {
            out.write(
                path,
                to_jsonl_string(examples.iter().map(|e| &e.multi_turn)).as_bytes(),
            )?;
        }
        if let Some(path) = &a.union_gold_output {
            out.write(
                path,
                to_jsonl_string(examples.iter().map(|e| &e.union)).as_bytes(),
            )?;
        }
    }
    out.commit()?;
    Ok(())
}

pub fn chunk(a: &ChunkArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut out = Outputs::new("chunk", a, cfg);
    let convs: Vec<Conversation> = load(&mut out, &a.input)?;
    let mut hits: Vec<Hit> = Vec::new();
    for conv in &convs {
        hits.extend(chunk_conversation(conv, cfg)?);
    }
    out.write(&a.output, to_jsonl_string(&hits).as_bytes())?;
    if let (Some(path), Some(batch_id)) = (&a.batch_output, &a.batch_id) {
        let body = CreateBatch {
            batch_id: batch_id.clone(),
            conversations: convs,
            hits,
            checkpoints: Vec::new(),
        };
        out.write_json(path, &body)?;
    }
    out.commit()?;
    Ok(())
}

pub fn aggregate(a: &AggregateArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let base = Settings {
        pipeline: cfg.clone(),
        ..Settings::default()
    };
    let (state, settings, _) = read_only(&a.data_dir, base)?;
    let mut out = Outputs::new("aggregate", a, &settings.pipeline);
    out.input(&a.data_dir);
    let export = state.export_labels();
    out.write(&a.output, to_jsonl_string(&export.labels).as_bytes())?;
    if let Some(path) = &a.report {
        out.write_json(
            path,
            &json!({
                "provenance": export.provenance,
                "unlabeled": export.unlabeled,
                "stats": export.stats,
                "annotations": state.annotations().len(),
                "purged_annotations": state.purged_count(),
            }),
        )?;
    }
    if a.analytics.is_some() || a.analytics_csv.is_some() {
        let report = state.analytics(&settings);
        if let Some(path) = &a.analytics {
            out.write_json(path, &report)?;
        }
        if let Some(path) = &a.analytics_csv {
            out.write(path, report.to_csv().as_bytes())?;
        }
    }
    out.commit()?;
    Ok(())
}

pub fn kappa(a: &KappaArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut out = Outputs::new("kappa", a, cfg);
    let (convs, hits, anns): (Vec<Conversation>, Vec<Hit>, Vec<Annotation>) =
        match (&a.data_dir, &a.input) {
            (Some(dir), _) => {
                let base = Settings {
                    pipeline: cfg.clone(),
                    ..Settings::default()
                };
                let (state, _, _) = read_only(dir, base)?;
                out.input(dir);
                (
                    state.conversations().cloned().collect(),
                    state.hits().cloned().collect(),
                    state.annotations().to_vec(),
                )
            }
            (None, Some(input)) => {
                let hits_path = a.hits.as_ref().expect("required by clap");
                let anns_path = a.annotations.as_ref().expect("required by clap");
                (
                    load(&mut out, input)?,
                    load(&mut out, hits_path)?,
                    load(&mut out, anns_path)?,
                )
            }
            (None, None) => {
                return Err(CliError::usage("either --data-dir or --input is required"))
            }
        };
    let hits: BTreeMap<String, Hit> = hits.into_iter().map(|h| (h.hit_id.clone(), h)).collect();
    let mut ratings: Vec<TurnRatings> = Vec::new();
    for conv in &convs {
        ratings.extend(turn_ratings(conv, &hits, &anns)?);
    }
    let report = corpus_kappa(&ratings, &Executor::new(a.jobs));
    out.write_json(&a.output, &report)?;
    if let Some(path) = &a.ratings_output {
        out.write(path, to_jsonl_string(&ratings).as_bytes())?;
    }
    out.commit()?;
    Ok(())
}

fn union_gold(
    a: Option<&BTreeMap<String, LabelSet>>,
    b: Option<&BTreeMap<String, LabelSet>>,
) -> BTreeMap<String, LabelSet> {
    let mut merged: BTreeMap<String, LabelSet> = BTreeMap::new();
    for map in [a, b].into_iter().flatten() {
        for (id, set) in map {
            let entry = merged
                .entry(id.clone())
                .or_insert_with(|| LabelSet::new(id.clone(), LabelSource::Gold));
            for (tok, cat) in &set.removals {
                entry.removals.entry(*tok).or_insert(*cat);
            }
        }
    }
    merged
}

pub fn detect(a: &DetectArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut out = Outputs::new("detect", a, cfg);
    let convs: Vec<Conversation> = load(&mut out, &a.input)?;
    let mut read_gold =
        |p: &Option<std::path::PathBuf>| -> Result<Option<BTreeMap<String, LabelSet>>, CliError> {
            p.as_ref()
                .map(|p| by_conv(load(&mut out, p)?, p))
                .transpose()
        };
    let std_gold = read_gold(&a.std_gold)?;
    let mtd_gold = read_gold(&a.mtd_gold)?;
    let lexicon = match &a.lexicon {
        Some(p) => {
            out.input(p);
            Some(Arc::new(Lexicon::load(p)?))
        }
        None => None,
    };
    let timeout = match a.timeout_seconds {
        Some(s) if !(s.is_finite() && s > 0.0) => {
            return Err(CliError::usage(
                "--timeout-seconds must be a positive number",
            ))
        }
        s => s.map(Duration::from_secs_f64),
    };
    let ctx = |gold: Option<BTreeMap<String, LabelSet>>| DetectorContext {
        gold: gold.map(Arc::new),
        lexicon: lexicon.clone(),
        timeout,
    };
    let exec = Executor::new(a.jobs);

    let labels: Vec<LabelSet> = match a.mode {
        Mode::TwoStage => {
            let std = a
                .std
                .as_deref()
                .ok_or_else(|| CliError::usage("--std is required in two-stage mode"))?;
            let std = build_detector(
                &DetectorSpec::parse(std, Scope::SingleTurn, cfg.std_max_seq)?,
                &ctx(std_gold),
            )?;
            let mtd = build_detector(
                &DetectorSpec::parse(&a.mtd, Scope::MultiTurn, cfg.mtd_max_seq)?,
                &ctx(mtd_gold),
            )?;
            let stages = run_two_stage_corpus(&convs, std.as_ref(), mtd.as_ref(), cfg, &exec)?;
            if let Some(path) = &a.stages_output {
                out.write(path, to_jsonl_string(&stages).as_bytes())?;
            }
            stages.into_iter().map(|s| s.union).collect()
        }
        Mode::Combined => {
            if a.std.is_some() {
                return Err(CliError::usage("--std is not used in combined mode"));
            }
            if a.stages_output.is_some() {
                return Err(CliError::usage("--stages-output needs two-stage mode"));
            }
            let gold = (std_gold.is_some() || mtd_gold.is_some())
                .then(|| union_gold(std_gold.as_ref(), mtd_gold.as_ref()));
            let det = build_detector(
                &DetectorSpec::parse(&a.mtd, Scope::MultiTurn, cfg.mtd_max_seq)?,
                &ctx(gold),
            )?;
            run_combined_corpus(&convs, det.as_ref(), cfg, &exec)?
        }
    };

    out.write(&a.output, to_jsonl_string(&labels).as_bytes())?;
    for (path, render) in [
        (
            &a.clean_text,
            render_clean as fn(&Conversation, &LabelSet) -> String,
        ),
        (&a.marked_text, render_marked),
    ] {
        if let Some(path) = path {
            let lines: Vec<_> = convs
                .iter()
                .zip(&labels)
                .map(|(c, l)| json!({ "conv_id": c.conv_id(), "text": render(c, l) }))
                .collect();
            out.write(path, to_jsonl_string(&lines).as_bytes())?;
        }
    }
    out.commit()?;
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut out = Outputs::new("evaluate", a, cfg);
    let convs: Vec<Conversation> = load(&mut out, &a.input)?;
    let pred = by_conv(load(&mut out, &a.pred)?, &a.pred)?;
    let gold = by_conv(load(&mut out, &a.gold)?, &a.gold)?;
    let report = evaluate_corpus(&convs, &pred, &gold)?;
    out.write_json(&a.output, &report)?;
    out.commit()?;
    Ok(())
}

pub fn stats(a: &StatsArgs, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut out = Outputs::new("stats", a, cfg);
    let convs: Vec<Conversation> = load(&mut out, &a.input)?;
    let labels: Vec<LabelSet> = match &a.labels {
        Some(p) => load(&mut out, p)?,
        None => Vec::new(),
    };
    let mut report = dataset_stats(&convs, &labels)?;
    if let Some(p) = &a.hits {
        let hits: Vec<Hit> = load(&mut out, p)?;
        report.add_hits(&convs, hits.iter().map(|h| h.conv_id.as_str()))?;
    }
    out.write_json(&a.output, &report)?;
    out.commit()?;
    Ok(())
}
