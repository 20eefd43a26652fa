//! Seeded crowd simulation built only from the pure quality functions.
//!
//! A pool of qualified workers labels batches of HITs. A fixed share of the
//! pool is sloppy (near-random labels) and much faster, so before filtering
//! it does most of the work. Every worker takes the batch checkpoint first;
//! once a batch is filled, checkpoint scores are filtered, excluded workers
//! lose all their annotations, and deficient HITs are reposted to the
//! remaining workers.

use std::collections::{BTreeMap, BTreeSet};

use dialclean_core::chunker::{chunk_conversation, Hit};
use dialclean_core::model::{Category, Conversation, PipelineConfig, Split, TurnRecord};
use dialclean_core::quality::{
    checkpoint_filter, purge_and_repost, qualify_worker, worker_analytics, AnalyticsReport,
    Annotation, CheckpointResult, CheckpointScore, WorkerRecord,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub struct SimConfig {
    pub seed: u64,
    pub workers: usize,
    pub low_workers: usize,
    /// Relative pick weight of a sloppy worker; careful workers weigh 1.
    pub low_speed: f64,
    pub conversations: usize,
    pub batches: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            workers: 100,
            low_workers: 23,
            low_speed: 60.0,
            conversations: 30,
            batches: 3,
        }
    }
}

pub struct SimOutcome {
    pub low_workers: BTreeSet<String>,
    pub excluded: BTreeSet<String>,
    pub records: BTreeMap<String, WorkerRecord>,
    /// Analytics after the first batch, scored on the start checkpoint.
    pub start: AnalyticsReport,
    pub kept: Vec<Annotation>,
    pub hits: Vec<Hit>,
    pub threshold: f64,
    pub min_annotations: usize,
    pub assignments: usize,
    pub reposted: usize,
}

fn gold_labels(rng: &mut StdRng, n: usize) -> Vec<Option<Category>> {
    (0..n)
        .map(|_| {
            rng.random_bool(0.12)
                .then(|| Category::ALL[rng.random_range(0..Category::ALL.len())])
        })
        .collect()
}

fn label(rng: &mut StdRng, sloppy: bool, gold: &[Option<Category>]) -> Vec<Option<Category>> {
    gold.iter()
        .map(|g| {
            if sloppy {
                rng.random_bool(0.1).then_some(Category::Others)
            } else {
                match g {
                    Some(c) if rng.random_bool(0.9) => Some(*c),
                    Some(_) => None,
                    None => rng.random_bool(0.02).then_some(Category::Others),
                }
            }
        })
        .collect()
}

fn conversation(rng: &mut StdRng, id: &str, tokens: usize) -> Conversation {
    let mut turns = Vec::new();
    let mut left = tokens;
    let mut t = 0;
    while left > 0 {
        let n = rng.random_range(3..=40).min(left);
        turns.push(TurnRecord {
            speaker: if t % 2 == 0 { "A" } else { "B" }.into(),
            slash_units: vec![(0..n).map(|i| format!("w{t}_{i}")).collect()],
        });
        left -= n;
        t += 1;
    }
    Conversation::new(id, Split::Train, turns).expect("valid conversation")
}

fn pick(rng: &mut StdRng, weights: &[(String, f64)]) -> Option<String> {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if total <= 0.0 {
        return None;
    }
    let mut x = rng.random_range(0.0..total);
    for (id, w) in weights {
        if x < *w {
            return Some(id.clone());
        }
        x -= w;
    }
    weights.last().map(|w| w.0.clone())
}

pub fn run(cfg: &SimConfig) -> SimOutcome {
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let pc = PipelineConfig::default();
    let threshold = pc.qualification_threshold;
    let min = pc.min_annotations_per_hit;

    let mut hits = Vec::new();
    let mut hit_gold: BTreeMap<String, Vec<Option<Category>>> = BTreeMap::new();
    for c in 0..cfg.conversations {
        let len = rng.random_range(900..1500);
        let conv = conversation(&mut rng, &format!("conv{c:03}"), len);
        let gold = gold_labels(&mut rng, conv.token_count());
        for h in chunk_conversation(&conv, &pc).expect("chunkable") {
            hit_gold.insert(h.hit_id.clone(), gold[h.token_start..h.token_end].to_vec());
            hits.push(h);
        }
    }

    let ids: Vec<String> = (0..cfg.workers).map(|i| format!("w{i:03}")).collect();
    let low_workers: BTreeSet<String> = ids.iter().take(cfg.low_workers).cloned().collect();
    let mut records: Vec<WorkerRecord> = ids.iter().map(WorkerRecord::new).collect();

    // Everyone passes qualification: sloppy workers are careful here.
    let qual_gold = gold_labels(&mut rng, 300);
    for w in &mut records {
        let ann = Annotation {
            worker_id: w.worker_id.clone(),
            hit_id: "qualification".into(),
            labels: label(&mut rng, false, &qual_gold),
            submitted_at: 0,
            elapsed_seconds: 0.0,
        };
        let q = qualify_worker(&ann, Some(&qual_gold), threshold).expect("gold present");
        w.qualified = q.passed;
        w.f1_history.push(CheckpointScore {
            checkpoint_id: "qualification".into(),
            f1: q.f1,
        });
    }

    let mut annotations: Vec<Annotation> = Vec::new();
    let mut excluded = BTreeSet::new();
    let mut assignments = 0;
    let mut reposted = 0;
    let mut start = None;
    let per_batch = hits.len().div_ceil(cfg.batches);
    let all_hit_ids: Vec<String> = hits.iter().map(|h| h.hit_id.clone()).collect();

    let fill = |rng: &mut StdRng,
                records: &mut [WorkerRecord],
                annotations: &mut Vec<Annotation>,
                hit: &str,
                need: usize|
     -> usize {
        let mut added = 0;
        for _ in 0..need {
            let done: BTreeSet<&str> = annotations
                .iter()
                .filter(|a| a.hit_id == hit)
                .map(|a| a.worker_id.as_str())
                .collect();
            let weights: Vec<(String, f64)> = records
                .iter()
                .filter(|w| w.qualified && !done.contains(w.worker_id.as_str()))
                .map(|w| {
                    let speed = if low_workers.contains(&w.worker_id) {
                        cfg.low_speed
                    } else {
                        1.0
                    };
                    (w.worker_id.clone(), speed)
                })
                .collect();
            let Some(worker) = pick(rng, &weights) else {
                break;
            };
            let sloppy = low_workers.contains(&worker);
            let labels = label(rng, sloppy, &hit_gold[hit]);
            let rec = records
                .iter_mut()
                .find(|r| r.worker_id == worker)
                .expect("known worker");
            rec.record_submission(if sloppy { 20.0 } else { 90.0 });
            annotations.push(Annotation {
                worker_id: worker,
                hit_id: hit.to_string(),
                labels,
                submitted_at: 0,
                elapsed_seconds: 0.0,
            });
            added += 1;
        }
        added
    };

    for (b, batch) in hits.chunks(per_batch).enumerate() {
        let cp_id = format!("checkpoint{b}");
        let cp_gold = gold_labels(&mut rng, 300);
        let results: Vec<CheckpointResult> = records
            .iter()
            .filter(|w| w.qualified)
            .map(|w| {
                let ann = Annotation {
                    worker_id: w.worker_id.clone(),
                    hit_id: cp_id.clone(),
                    labels: label(&mut rng, low_workers.contains(&w.worker_id), &cp_gold),
                    submitted_at: 0,
                    elapsed_seconds: 0.0,
                };
                CheckpointResult::score(&ann, Some(&cp_gold)).expect("gold present")
            })
            .collect();

        for h in batch {
            assignments += fill(&mut rng, &mut records, &mut annotations, &h.hit_id, min);
        }

        if b == 0 {
            let view: Vec<WorkerRecord> = records
                .iter()
                .map(|w| {
                    let mut v = w.clone();
                    v.f1_history = results
                        .iter()
                        .filter(|r| r.worker_id == w.worker_id)
                        .map(|r| CheckpointScore {
                            checkpoint_id: r.checkpoint_id.clone(),
                            f1: r.f1,
                        })
                        .collect();
                    v
                })
                .collect();
            start = Some(worker_analytics(&view, threshold));
        }

        let newly = checkpoint_filter(&mut records, &results, threshold);
        excluded.extend(newly);
        loop {
            let posted: Vec<&str> = all_hit_ids[..((b + 1) * per_batch).min(all_hit_ids.len())]
                .iter()
                .map(String::as_str)
                .collect();
            let out = purge_and_repost(std::mem::take(&mut annotations), &excluded, posted, min);
            annotations = out.kept;
            for a in &out.purged {
                if let Some(r) = records.iter_mut().find(|r| r.worker_id == a.worker_id) {
                    r.hit_count -= 1;
                    r.elapsed_times.pop();
                }
            }
            if out.repost.is_empty() {
                break;
            }
            let mut added = 0;
            for entry in &out.repost {
                reposted += entry.need;
                added += fill(
                    &mut rng,
                    &mut records,
                    &mut annotations,
                    &entry.hit_id,
                    entry.need,
                );
            }
            assignments += added;
            if added == 0 {
                break;
            }
        }
    }

    SimOutcome {
        low_workers,
        excluded,
        records: records
            .into_iter()
            .map(|r| (r.worker_id.clone(), r))
            .collect(),
        start: start.expect("at least one batch"),
        kept: annotations,
        hits,
        threshold,
        min_annotations: min,
        assignments,
        reposted,
    }
}
