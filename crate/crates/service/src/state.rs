//! The service's state machine.
//!
//! Commands are validated against the current state and turned into events
//! that carry every decision (timestamps, checkpoint positions). Applying an
//! event never fails, so replaying the event log rebuilds the state exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use dialclean_core::chunker::Hit;
use dialclean_core::model::{
    dataset_stats, Category, Conversation, LabelSet, StatsReport, TokenId,
};
use dialclean_core::quality::{
    aggregate_conversation, checkpoint_filter, purge_and_repost, qualify_worker, worker_analytics,
    AnalyticsReport, Annotation, CheckpointResult, CheckpointScore, WorkerRecord,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, SpanDiff};
use crate::payload::{
    BatchState, BatchView, ConversationExport, CreateBatch, HitPayload, LabelsExport, PayloadToken,
    PayloadTurn, Submit, SubmitOutcome, SubmittedLabels, TokenRef, UnlabeledTurns, WorkerView,
};
use crate::settings::Settings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHit {
    pub hit: Hit,
    pub gold: Vec<Option<Category>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    BatchCreated {
        batch_id: String,
        /// Conversations new to the service.
        conversations: Vec<Conversation>,
        hits: Vec<Hit>,
        checkpoints: Vec<CheckpointHit>,
        /// Posting order with checkpoints interleaved.
        order: Vec<String>,
        at: u64,
    },
    Assigned {
        worker_id: String,
        hit_id: String,
        at: u64,
        expires_at: u64,
    },
    Submitted {
        worker_id: String,
        hit_id: String,
        labels: Vec<Option<Category>>,
        at: u64,
        /// Lease issue to submission, from the service clock.
        elapsed_seconds: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_elapsed_seconds: Option<f64>,
    },
}

#[derive(Debug, Clone)]
pub enum Command {
    CreateBatch(CreateBatch),
    NextHit {
        worker_id: String,
    },
    Submit {
        worker_id: String,
        hit_id: String,
        submit: Submit,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Batch(BatchView),
    Hit(HitPayload),
    Submitted(SubmitOutcome),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitEntry {
    pub hit: Hit,
    pub batch_id: String,
    /// Present for checkpoint hits.
    pub gold: Option<Vec<Option<Category>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_id: String,
    pub order: Vec<String>,
    pub checkpoints: Vec<String>,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lease {
    pub hit_id: String,
    pub issued_at: u64,
    pub expires_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServiceState {
    /// Number of events applied.
    pub seq: u64,
    conversations: BTreeMap<String, Arc<Conversation>>,
    hits: BTreeMap<String, HitEntry>,
    batches: Vec<BatchRecord>,
    workers: BTreeMap<String, WorkerRecord>,
    /// Regular-hit annotations still counted.
    annotations: Vec<Annotation>,
    checkpoint_submissions: Vec<Annotation>,
    purged: usize,
    /// Active or stale lease per worker; one at a time.
    leases: BTreeMap<String, Lease>,
    /// Every hit ever assigned to each worker.
    served: BTreeMap<String, BTreeSet<String>>,
    /// Kept annotations per regular hit.
    counts: BTreeMap<String, usize>,
}

/// Checks a hit against its conversation: in range, non-empty, and with turn
/// bounds matching its token range.
pub fn validate_hit(hit: &Hit, conv: &Conversation) -> Result<(), ServiceError> {
    let bad = |reason: String| ServiceError::InvalidHit {
        hit_id: hit.hit_id.clone(),
        reason,
    };
    if hit.hit_id.is_empty() {
        return Err(ServiceError::BadRequest("empty hit id".into()));
    }
    if hit.conv_id != conv.conv_id() {
        return Err(bad(format!(
            "belongs to {}, not {}",
            hit.conv_id,
            conv.conv_id()
        )));
    }
    if hit.token_start >= hit.token_end || hit.token_end > conv.token_count() {
        return Err(bad(format!(
            "token range {}..{} outside 0..{}",
            hit.token_start,
            hit.token_end,
            conv.token_count()
        )));
    }
    let first = conv.id_at(hit.token_start).expect("in range").turn;
    let last = conv.id_at(hit.token_end - 1).expect("in range").turn;
    if (hit.turn_start, hit.turn_end) != (first, last + 1) {
        return Err(bad(format!(
            "turn range {}..{} does not match tokens (turns {}..{})",
            hit.turn_start,
            hit.turn_end,
            first,
            last + 1
        )));
    }
    Ok(())
}

fn payload(conv: &Conversation, hit: &Hit, expires_at: u64) -> HitPayload {
    let mut turns: Vec<PayloadTurn> = Vec::new();
    for id in hit.token_ids(conv) {
        let token = conv.token(id).expect("hit inside conversation");
        if turns.last().is_none_or(|t| t.turn != id.turn) {
            let turn_range = conv.turn_offset(id.turn)..conv.turn_offset(id.turn + 1);
            turns.push(PayloadTurn {
                turn: id.turn,
                speaker: conv.turns()[id.turn].speaker.clone(),
                partial: turn_range.start < hit.token_start || turn_range.end > hit.token_end,
                tokens: Vec::new(),
            });
        }
        turns.last_mut().expect("pushed").tokens.push(PayloadToken {
            position: id.position,
            text: token.text.clone(),
        });
    }
    HitPayload {
        hit_id: hit.hit_id.clone(),
        lease_expires_at: expires_at,
        turns,
    }
}

/// Turns submitted labels into one label per hit token, or a diff.
fn dense_labels(
    hit: &Hit,
    conv: &Conversation,
    submitted: &SubmittedLabels,
) -> Result<Vec<Option<Category>>, ServiceError> {
    let ids: Vec<TokenId> = hit.token_ids(conv).collect();
    let to_ref = |id: TokenId| TokenRef {
        turn: id.turn,
        position: id.position,
    };
    match submitted {
        SubmittedLabels::Dense(labels) if labels.len() == ids.len() => Ok(labels.clone()),
        SubmittedLabels::Dense(labels) => {
            let (missing, unexpected) = if labels.len() < ids.len() {
                (
                    ids[labels.len()..].iter().map(|&id| to_ref(id)).collect(),
                    Vec::new(),
                )
            } else {
                (Vec::new(), Vec::new())
            };
            Err(ServiceError::LabelSpanMismatch(Box::new(SpanDiff {
                hit_id: hit.hit_id.clone(),
                expected: ids.len(),
                got: labels.len(),
                missing,
                unexpected,
                duplicated: Vec::new(),
            })))
        }
        SubmittedLabels::Tokens(tokens) => {
            let want: BTreeSet<TokenRef> = ids.iter().map(|&id| to_ref(id)).collect();
            let mut got: BTreeMap<TokenRef, Option<Category>> = BTreeMap::new();
            let mut duplicated = Vec::new();
            let mut unexpected = Vec::new();
            for t in tokens {
                let r = TokenRef {
                    turn: t.turn,
                    position: t.position,
                };
                if !want.contains(&r) {
                    unexpected.push(r);
                } else if got.insert(r, t.category).is_some() {
                    duplicated.push(r);
                }
            }
            let missing: Vec<TokenRef> = want
                .iter()
                .filter(|r| !got.contains_key(r))
                .copied()
                .collect();
            if missing.is_empty() && unexpected.is_empty() && duplicated.is_empty() {
                Ok(ids.iter().map(|&id| got[&to_ref(id)]).collect())
            } else {
                Err(ServiceError::LabelSpanMismatch(Box::new(SpanDiff {
                    hit_id: hit.hit_id.clone(),
                    expected: ids.len(),
                    got: tokens.len(),
                    missing,
                    unexpected,
                    duplicated,
                })))
            }
        }
    }
}

impl ServiceState {
    /// Validates `cmd`, applies the resulting event and returns it with the
    /// reply. Commands that only read (re-requesting a held lease) produce no
    /// event.
    pub fn handle(
        &mut self,
        settings: &Settings,
        cmd: Command,
        now: u64,
    ) -> Result<(Option<Event>, Reply), ServiceError> {
        let event = match cmd {
            Command::CreateBatch(req) => self.decide_batch(settings, req, now)?,
            Command::NextHit { worker_id } => match self.decide_next(settings, &worker_id, now)? {
                Ok(event) => event,
                Err(held) => return Ok((None, Reply::Hit(held))),
            },
            Command::Submit {
                worker_id,
                hit_id,
                submit,
            } => self.decide_submit(settings, &worker_id, &hit_id, submit, now)?,
        };
        let reply = self.apply(settings, &event);
        Ok((Some(event), reply))
    }

    fn lookup<'a>(
        &'a self,
        settings: &'a Settings,
        hit_id: &str,
    ) -> Option<(&'a Conversation, &'a Hit)> {
        if let Some(q) = settings
            .qualification
            .as_deref()
            .filter(|q| q.hit.hit_id == hit_id)
        {
            return Some((&q.conversation, &q.hit));
        }
        let entry = self.hits.get(hit_id)?;
        Some((&*self.conversations[&entry.hit.conv_id], &entry.hit))
    }

    fn decide_batch(
        &self,
        settings: &Settings,
        req: CreateBatch,
        now: u64,
    ) -> Result<Event, ServiceError> {
        if req.batch_id.is_empty() {
            return Err(ServiceError::BadRequest("empty batch id".into()));
        }
        if self.batches.iter().any(|b| b.batch_id == req.batch_id) {
            return Err(ServiceError::DuplicateBatch(req.batch_id));
        }
        if req.hits.is_empty() {
            return Err(ServiceError::EmptyManifest);
        }
        let mut fresh: BTreeMap<String, Conversation> = BTreeMap::new();
        for conv in req.conversations {
            let id = conv.conv_id().to_string();
            let known = self.conversations.get(&id).map(|c| &**c).or(fresh.get(&id));
            match known {
                Some(k) if *k != conv => return Err(ServiceError::ConversationConflict(id)),
                Some(_) => {}
                None => {
                    fresh.insert(id, conv);
                }
            }
        }
        let conv_of = |hit: &Hit| {
            self.conversations
                .get(&hit.conv_id)
                .map(|c| &**c)
                .or(fresh.get(&hit.conv_id))
                .ok_or_else(|| ServiceError::UnknownConversation(hit.conv_id.clone()))
        };
        let qual_id = settings
            .qualification
            .as_ref()
            .map(|q| q.hit.hit_id.as_str());
        let mut ids = BTreeSet::new();
        let all = req
            .hits
            .iter()
            .chain(req.checkpoints.iter().map(|c| &c.hit));
        for hit in all {
            if self.hits.contains_key(&hit.hit_id)
                || qual_id == Some(hit.hit_id.as_str())
                || !ids.insert(&hit.hit_id)
            {
                return Err(ServiceError::DuplicateHit(hit.hit_id.clone()));
            }
            validate_hit(hit, conv_of(hit)?)?;
        }
        let mut checkpoints = Vec::with_capacity(req.checkpoints.len());
        for c in &req.checkpoints {
            let conv = conv_of(&c.hit)?;
            c.gold
                .validate_against(conv)
                .map_err(|e| ServiceError::InvalidGold {
                    hit_id: c.hit.hit_id.clone(),
                    reason: e.to_string(),
                })?;
            checkpoints.push(CheckpointHit {
                hit: c.hit.clone(),
                gold: c.hit.labels_from(conv, &c.gold),
            });
        }
        let mut rng =
            StdRng::seed_from_u64(settings.seed ^ self.seq.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut order: Vec<String> = req.hits.iter().map(|h| h.hit_id.clone()).collect();
        for c in &checkpoints {
            let pos = rng.random_range(0..=order.len());
            order.insert(pos, c.hit.hit_id.clone());
        }
        Ok(Event::BatchCreated {
            batch_id: req.batch_id,
            conversations: fresh.into_values().collect(),
            hits: req.hits,
            checkpoints,
            order,
            at: now,
        })
    }

    /// `Ok(Err(payload))` when the worker already holds a live lease.
    fn decide_next(
        &self,
        settings: &Settings,
        worker_id: &str,
        now: u64,
    ) -> Result<Result<Event, HitPayload>, ServiceError> {
        if worker_id.is_empty() {
            return Err(ServiceError::BadRequest("empty worker id".into()));
        }
        let worker = self.workers.get(worker_id);
        if worker.is_some_and(|w| w.excluded) {
            return Err(ServiceError::ExcludedWorker(worker_id.into()));
        }
        if let Some(lease) = self.leases.get(worker_id).filter(|l| l.expires_at > now) {
            let (conv, hit) = self
                .lookup(settings, &lease.hit_id)
                .expect("leased hit exists");
            return Ok(Err(payload(conv, hit, lease.expires_at)));
        }
        let served = self.served.get(worker_id);
        let was_served = |h: &str| served.is_some_and(|s| s.contains(h));
        let assign = |hit_id: &str| {
            Ok(Ok(Event::Assigned {
                worker_id: worker_id.into(),
                hit_id: hit_id.into(),
                at: now,
                expires_at: now + settings.lease_ms,
            }))
        };
        let qualified = worker.map_or(settings.qualification.is_none(), |w| w.qualified);
        if !qualified {
            return match settings.qualification.as_deref() {
                Some(q) if !was_served(&q.hit.hit_id) => assign(&q.hit.hit_id),
                _ => Err(ServiceError::UnqualifiedWorker(worker_id.into())),
            };
        }

        let mut leased: BTreeMap<&str, usize> = BTreeMap::new();
        for l in self.leases.values().filter(|l| l.expires_at > now) {
            *leased.entry(l.hit_id.as_str()).or_default() += 1;
        }
        let min = settings.min_annotations();
        let mut best: Option<(usize, &str)> = None;
        'batches: for batch in &self.batches {
            for hit_id in &batch.order {
                if was_served(hit_id) {
                    continue;
                }
                // Every worker takes each checkpoint, so it never fills up.
                let load = if self.hits[hit_id].gold.is_some() {
                    0
                } else {
                    let load = self.counts.get(hit_id).copied().unwrap_or(0)
                        + leased.get(hit_id.as_str()).copied().unwrap_or(0);
                    if load >= min {
                        continue;
                    }
                    load
                };
                if best.is_none_or(|(b, _)| load < b) {
                    best = Some((load, hit_id));
                    if load == 0 {
                        break 'batches;
                    }
                }
            }
        }
        match best {
            Some((_, hit_id)) => assign(hit_id),
            None => Err(ServiceError::NoWorkAvailable(worker_id.into())),
        }
    }

    fn decide_submit(
        &self,
        settings: &Settings,
        worker_id: &str,
        hit_id: &str,
        submit: Submit,
        now: u64,
    ) -> Result<Event, ServiceError> {
        let (conv, hit) = self
            .lookup(settings, hit_id)
            .ok_or_else(|| ServiceError::UnknownHit(hit_id.into()))?;
        if !self.workers.contains_key(worker_id) {
            return Err(ServiceError::UnknownWorker(worker_id.into()));
        }
        let lease = self
            .leases
            .get(worker_id)
            .filter(|l| l.hit_id == hit_id && l.expires_at > now)
            .ok_or_else(|| ServiceError::LeaseExpired {
                worker_id: worker_id.into(),
                hit_id: hit_id.into(),
            })?;
        let labels = dense_labels(hit, conv, &submit.labels)?;
        if let Some(e) = submit
            .elapsed_seconds
            .filter(|e| !e.is_finite() || *e < 0.0)
        {
            return Err(ServiceError::BadRequest(format!(
                "elapsed_seconds must be a non-negative number, got {e}"
            )));
        }
        Ok(Event::Submitted {
            worker_id: worker_id.into(),
            hit_id: hit_id.into(),
            labels,
            at: now,
            elapsed_seconds: now.saturating_sub(lease.issued_at) as f64 / 1000.0,
            client_elapsed_seconds: submit.elapsed_seconds,
        })
    }

    /// Applies an event produced by [`ServiceState::handle`] (or read back
    /// from the log).
    pub fn apply(&mut self, settings: &Settings, event: &Event) -> Reply {
        self.seq += 1;
        match event {
            Event::BatchCreated {
                batch_id,
                conversations,
                hits,
                checkpoints,
                order,
                at,
            } => {
                for c in conversations {
                    self.conversations
                        .insert(c.conv_id().to_string(), Arc::new(c.clone()));
                }
                for h in hits {
                    self.hits.insert(
                        h.hit_id.clone(),
                        HitEntry {
                            hit: h.clone(),
                            batch_id: batch_id.clone(),
                            gold: None,
                        },
                    );
                }
                for c in checkpoints {
                    self.hits.insert(
                        c.hit.hit_id.clone(),
                        HitEntry {
                            hit: c.hit.clone(),
                            batch_id: batch_id.clone(),
                            gold: Some(c.gold.clone()),
                        },
                    );
                }
                self.batches.push(BatchRecord {
                    batch_id: batch_id.clone(),
                    order: order.clone(),
                    checkpoints: checkpoints.iter().map(|c| c.hit.hit_id.clone()).collect(),
                    created_at: *at,
                });
                Reply::Batch(self.batch_view(settings, batch_id).expect("just created"))
            }
            Event::Assigned {
                worker_id,
                hit_id,
                at,
                expires_at,
            } => {
                self.workers.entry(worker_id.clone()).or_insert_with(|| {
                    let mut w = WorkerRecord::new(worker_id.clone());
                    w.qualified = settings.qualification.is_none();
                    w
                });
                self.served
                    .entry(worker_id.clone())
                    .or_default()
                    .insert(hit_id.clone());
                self.leases.insert(
                    worker_id.clone(),
                    Lease {
                        hit_id: hit_id.clone(),
                        issued_at: *at,
                        expires_at: *expires_at,
                    },
                );
                let (conv, hit) = self.lookup(settings, hit_id).expect("assigned hit exists");
                Reply::Hit(payload(conv, hit, *expires_at))
            }
            Event::Submitted {
                worker_id,
                hit_id,
                labels,
                at,
                elapsed_seconds,
                ..
            } => {
                self.leases.remove(worker_id);
                let annotation = Annotation {
                    worker_id: worker_id.clone(),
                    hit_id: hit_id.clone(),
                    labels: labels.clone(),
                    submitted_at: *at,
                    elapsed_seconds: *elapsed_seconds,
                };
                let outcome = self.record_submission(settings, annotation);
                Reply::Submitted(outcome)
            }
        }
    }

    fn record_submission(&mut self, settings: &Settings, annotation: Annotation) -> SubmitOutcome {
        let threshold = settings.threshold();
        let worker_id = annotation.worker_id.clone();
        if let Some(q) = settings
            .qualification
            .as_deref()
            .filter(|q| q.hit.hit_id == annotation.hit_id)
        {
            let result = qualify_worker(&annotation, Some(q.gold.as_slice()), threshold)
                .expect("length checked on submit");
            let w = self.workers.get_mut(&worker_id).expect("assigned worker");
            w.qualified = result.passed;
            w.f1_history.push(CheckpointScore {
                checkpoint_id: annotation.hit_id,
                f1: result.f1,
            });
            return if result.passed {
                SubmitOutcome::Qualified { f1: result.f1 }
            } else {
                SubmitOutcome::NotQualified { f1: result.f1 }
            };
        }

        let entry = &self.hits[&annotation.hit_id];
        let Some(gold) = entry.gold.as_ref() else {
            *self.counts.entry(annotation.hit_id.clone()).or_default() += 1;
            self.workers
                .get_mut(&worker_id)
                .expect("assigned worker")
                .record_submission(annotation.elapsed_seconds);
            self.annotations.push(annotation);
            return SubmitOutcome::Accepted;
        };

        let result = CheckpointResult::score(&annotation, Some(gold.as_slice()))
            .expect("length checked on submit");
        self.checkpoint_submissions.push(annotation);
        let mut record = [self.workers.remove(&worker_id).expect("assigned worker")];
        let excluded = checkpoint_filter(&mut record, &[result], threshold);
        let [mut record] = record;
        if excluded.is_empty() {
            self.workers.insert(worker_id, record);
            return SubmitOutcome::Accepted;
        }

        let regular: Vec<&str> = self
            .batches
            .iter()
            .flat_map(|b| b.order.iter())
            .filter(|h| self.hits[*h].gold.is_none())
            .map(String::as_str)
            .collect();
        let out = purge_and_repost(
            std::mem::take(&mut self.annotations),
            &excluded,
            regular,
            settings.min_annotations(),
        );
        let touched: BTreeSet<&str> = out.purged.iter().map(|a| a.hit_id.as_str()).collect();
        let reposted: Vec<String> = out
            .repost
            .iter()
            .filter(|r| touched.contains(r.hit_id.as_str()))
            .map(|r| r.hit_id.clone())
            .collect();
        let purged = out.purged.len();
        self.purged += purged;
        self.annotations = out.kept;
        self.counts.clear();
        for a in &self.annotations {
            *self.counts.entry(a.hit_id.clone()).or_default() += 1;
        }
        record.hit_count = 0;
        record.elapsed_times.clear();
        self.workers.insert(worker_id.clone(), record);
        self.leases.remove(&worker_id);
        SubmitOutcome::Excluded { purged, reposted }
    }

    pub fn batch_view(&self, settings: &Settings, batch_id: &str) -> Option<BatchView> {
        let batch = self.batches.iter().find(|b| b.batch_id == batch_id)?;
        let min = settings.min_annotations();
        let regular: Vec<&String> = batch
            .order
            .iter()
            .filter(|h| self.hits[*h].gold.is_none())
            .collect();
        let complete = regular
            .iter()
            .filter(|h| self.counts.get(**h).copied().unwrap_or(0) >= min)
            .count();
        let state = if complete < regular.len() {
            BatchState::Open
        } else {
            let ids: BTreeSet<&str> = regular.iter().map(|h| h.as_str()).collect();
            let checkpoint_ids: BTreeSet<&str> = self
                .hits
                .iter()
                .filter(|(_, e)| e.gold.is_some())
                .map(|(id, _)| id.as_str())
                .collect();
            let vetted = self
                .annotations
                .iter()
                .filter(|a| ids.contains(a.hit_id.as_str()))
                .all(|a| {
                    self.workers[&a.worker_id]
                        .f1_history
                        .iter()
                        .any(|s| checkpoint_ids.contains(s.checkpoint_id.as_str()))
                });
            if vetted {
                BatchState::Filtered
            } else {
                BatchState::Closed
            }
        };
        Some(BatchView {
            batch_id: batch.batch_id.clone(),
            state,
            hit_ids: batch.order.clone(),
            checkpoint_ids: batch.checkpoints.clone(),
            hits_complete: complete,
            hits_total: regular.len(),
        })
    }

    pub fn batch_ids(&self) -> impl Iterator<Item = &str> {
        self.batches.iter().map(|b| b.batch_id.as_str())
    }

    pub fn worker_view(&self, worker_id: &str) -> Option<WorkerView> {
        let w = self.workers.get(worker_id)?;
        Some(WorkerView {
            worker_id: w.worker_id.clone(),
            qualified: w.qualified,
            excluded: w.excluded,
            hit_count: w.hit_count,
            mean_f1: w.mean_f1(),
            f1_history: w.f1_history.clone(),
            mean_elapsed_seconds: w.mean_elapsed(),
            active_lease: self.leases.get(worker_id).map(|l| l.hit_id.clone()),
        })
    }

    pub fn workers(&self) -> impl Iterator<Item = &WorkerRecord> {
        self.workers.values()
    }

    /// Kept annotations on regular hits, in submission order.
    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn checkpoint_submissions(&self) -> &[Annotation] {
        &self.checkpoint_submissions
    }

    pub fn purged_count(&self) -> usize {
        self.purged
    }

    /// Every (worker, hit) assignment ever made.
    pub fn assignments(&self) -> impl Iterator<Item = (&str, &str)> {
        self.served
            .iter()
            .flat_map(|(w, hits)| hits.iter().map(move |h| (w.as_str(), h.as_str())))
    }

    pub fn analytics(&self, settings: &Settings) -> AnalyticsReport {
        let records: Vec<WorkerRecord> = self.workers.values().cloned().collect();
        worker_analytics(&records, settings.threshold())
    }

    /// Best-worker aggregation over every conversation with regular hits.
    pub fn export_labels(&self) -> LabelsExport {
        let mut hits_by_conv: BTreeMap<&str, BTreeMap<String, Hit>> = BTreeMap::new();
        for (id, e) in self.hits.iter().filter(|(_, e)| e.gold.is_none()) {
            hits_by_conv
                .entry(e.hit.conv_id.as_str())
                .or_default()
                .insert(id.clone(), e.hit.clone());
        }
        let mut anns_by_conv: BTreeMap<&str, Vec<Annotation>> = BTreeMap::new();
        for a in &self.annotations {
            let conv = self.hits[&a.hit_id].hit.conv_id.as_str();
            anns_by_conv.entry(conv).or_default().push(a.clone());
        }
        let mut labels = Vec::new();
        let mut provenance = Vec::new();
        let mut unlabeled = Vec::new();
        let mut convs = Vec::new();
        let empty = Vec::new();
        for (conv_id, hits) in &hits_by_conv {
            let conv = &self.conversations[*conv_id];
            let anns = anns_by_conv.get(conv_id).unwrap_or(&empty);
            let agg = aggregate_conversation(conv, hits, anns, &self.workers)
                .expect("annotation lengths checked on submit");
            if !agg.unlabeled_turns.is_empty() {
                unlabeled.push(UnlabeledTurns {
                    conv_id: conv_id.to_string(),
                    turns: agg.unlabeled_turns,
                });
            }
            provenance.push(ConversationExport {
                conv_id: conv_id.to_string(),
                turns: agg.turns,
            });
            labels.push(agg.labels);
            convs.push((**conv).clone());
        }
        let mut stats: StatsReport =
            dataset_stats(&convs, &labels).expect("labels built from these conversations");
        stats
            .add_hits(
                &convs,
                hits_by_conv
                    .values()
                    .flat_map(|h| h.values().map(|h| h.conv_id.as_str())),
            )
            .expect("hits belong to these conversations");
        LabelsExport {
            labels,
            provenance,
            unlabeled,
            stats,
        }
    }

    /// Regular (non-checkpoint) hits in id order.
    pub fn hits(&self) -> impl Iterator<Item = &Hit> {
        self.hits
            .values()
            .filter(|e| e.gold.is_none())
            .map(|e| &e.hit)
    }

    pub fn conversations(&self) -> impl Iterator<Item = &Conversation> {
        self.conversations.values().map(|c| &**c)
    }

    pub fn label_sets(&self) -> Vec<LabelSet> {
        self.export_labels().labels
    }
}
