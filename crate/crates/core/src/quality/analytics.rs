use serde::{Deserialize, Serialize};

use super::workers::{meets_threshold, WorkerRecord};

/// Number of equal-width F1 histogram bins over [0, 1].
pub const HISTOGRAM_BINS: usize = 10;

/// Share of all completed HITs above which sub-threshold workers are flagged
/// as dominating the workload.
pub const DOMINANCE_SHARE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRow {
    pub worker_id: String,
    /// Running mean F1; `None` for workers with no scored HIT.
    pub f1: Option<f64>,
    pub hit_count: usize,
    pub mean_elapsed_seconds: Option<f64>,
    pub below_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub threshold: f64,
    pub workers: usize,
    pub workers_scored: usize,
    /// Fraction of scored workers with F1 below the threshold.
    pub below_threshold_fraction: f64,
    /// Fraction of all completed HITs done by those workers.
    pub below_threshold_hit_share: f64,
    /// Set when sub-threshold workers completed more than
    /// [`DOMINANCE_SHARE`] of all HITs.
    pub low_quality_dominates: bool,
    pub histogram: Vec<HistogramBin>,
    pub rows: Vec<WorkerRow>,
}

impl AnalyticsReport {
    /// Plot-ready table, one row per worker.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "worker_id",
            "f1",
            "hit_count",
            "mean_elapsed_seconds",
            "below_threshold",
        ])
        .expect("in-memory write");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.worker_id.clone(),
                opt(r.f1),
                r.hit_count.to_string(),
                opt(r.mean_elapsed_seconds),
                r.below_threshold.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }
}

fn bin_of(f1: f64) -> usize {
    ((f1.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

/// F1 histogram and per-worker (F1, HIT count, mean elapsed) rows. Rows are
/// sorted by worker id.
pub fn worker_analytics(records: &[WorkerRecord], threshold: f64) -> AnalyticsReport {
    let mut histogram: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|i| HistogramBin {
            lower: i as f64 / HISTOGRAM_BINS as f64,
            upper: (i + 1) as f64 / HISTOGRAM_BINS as f64,
            count: 0,
        })
        .collect();
    let mut rows: Vec<WorkerRow> = records
        .iter()
        .map(|w| {
            let f1 = w.mean_f1();
            WorkerRow {
                worker_id: w.worker_id.clone(),
                f1,
                hit_count: w.hit_count,
                mean_elapsed_seconds: w.mean_elapsed(),
                below_threshold: f1.is_some_and(|f| !meets_threshold(f, threshold)),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.worker_id.cmp(&b.worker_id));

    let mut scored = 0;
    let mut below = 0;
    let mut total_hits = 0;
    let mut below_hits = 0;
    for r in &rows {
        total_hits += r.hit_count;
        if let Some(f) = r.f1 {
            scored += 1;
            histogram[bin_of(f)].count += 1;
        }
        if r.below_threshold {
            below += 1;
            below_hits += r.hit_count;
        }
    }
    let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let below_threshold_hit_share = frac(below_hits, total_hits);
    AnalyticsReport {
        threshold,
        workers: rows.len(),
        workers_scored: scored,
        below_threshold_fraction: frac(below, scored),
        below_threshold_hit_share,
        low_quality_dominates: below_threshold_hit_share > DOMINANCE_SHARE,
        histogram,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::CheckpointScore;

    fn worker(id: &str, f1: f64, hits: usize) -> WorkerRecord {
        let mut w = WorkerRecord::new(id);
        w.hit_count = hits;
        w.elapsed_times = vec![30.0; hits];
        w.f1_history.push(CheckpointScore {
            checkpoint_id: "q".into(),
            f1,
        });
        w
    }

    #[test]
    fn single_worker_one_row() {
        let r = worker_analytics(&[worker("w", 0.55, 3)], 0.3);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.histogram[5].count, 1);
        assert_eq!(r.histogram.iter().map(|b| b.count).sum::<usize>(), 1);
    }

    #[test]
    fn uniform_scores_give_flat_histogram() {
        let ws: Vec<_> = (0..HISTOGRAM_BINS)
            .map(|i| worker(&format!("w{i}"), (i as f64 + 0.5) / 10.0, 1))
            .collect();
        let r = worker_analytics(&ws, 0.3);
        assert!(r.histogram.iter().all(|b| b.count == 1));
    }

    #[test]
    fn perfect_score_lands_in_last_bin() {
        let r = worker_analytics(&[worker("w", 1.0, 1)], 0.3);
        assert_eq!(r.histogram[HISTOGRAM_BINS - 1].count, 1);
    }

    #[test]
    fn start_checkpoint_profile_is_flagged() {
        // 23 of 100 workers below threshold doing 85 HITs each; the other 77
        // do 19 HITs between them.
        let mut ws = Vec::new();
        for i in 0..23 {
            ws.push(worker(&format!("low{i:02}"), 0.1, 85));
        }
        for i in 0..77 {
            ws.push(worker(&format!("ok{i:02}"), 0.7, usize::from(i < 19)));
        }
        let r = worker_analytics(&ws, 0.3);
        assert_eq!(r.below_threshold_fraction, 0.23);
        let share = 23.0 * 85.0 / (23.0 * 85.0 + 19.0);
        assert!((r.below_threshold_hit_share - share).abs() < 1e-12);
        assert!(r.low_quality_dominates);
    }

    #[test]
    fn csv_table_has_header_and_rows() {
        let mut unscored = WorkerRecord::new("b");
        unscored.hit_count = 0;
        let r = worker_analytics(&[worker("a", 0.25, 2), unscored], 0.3);
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "worker_id,f1,hit_count,mean_elapsed_seconds,below_threshold"
        );
        assert_eq!(lines[1], "a,0.250000,2,30.000000,true");
        assert_eq!(lines[2], "b,,0,,false");
    }
}
