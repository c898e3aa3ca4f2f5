//! Side-by-side comparison of two runs: per-class feature spread with
//! relative-change columns, and accuracy aggregated over repeats.

use crate::error::{Error, Result};
use crate::train::MetricsRecord;

/// Relative change of `baseline` over `ours`, in percent. `None` when
/// `ours` is zero (rendered as the "inf" sentinel).
pub fn delta_percent(baseline: f64, ours: f64) -> Option<f64> {
    if ours == 0.0 {
        None
    } else {
        Some((baseline - ours) / ours * 100.0)
    }
}

pub fn format_delta(delta: Option<f64>) -> String {
    match delta {
        Some(v) => format!("{v:.2}"),
        None => "inf".to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub class_count: usize,
    pub repeats_a: usize,
    pub repeats_b: usize,
    /// Per-class final-epoch spread, averaged over repeats.
    pub train_icj_a: Vec<f64>,
    pub train_icj_b: Vec<f64>,
    pub train_delta: Vec<Option<f64>>,
    pub test_icj_a: Vec<f64>,
    pub test_icj_b: Vec<f64>,
    pub test_delta: Vec<Option<f64>>,
    pub acc_avg_a: f64,
    pub acc_avg_b: f64,
    pub acc_max_a: f64,
    pub acc_max_b: f64,
    pub acc_avg_delta: Option<f64>,
    pub acc_max_delta: Option<f64>,
}

struct SideSummary {
    repeats: usize,
    train_icj: Vec<f64>,
    test_icj: Vec<f64>,
    acc_avg: f64,
    acc_max: f64,
    class_count: usize,
}

fn summarize(runs: &[Vec<MetricsRecord>], side: &str) -> Result<SideSummary> {
    if runs.is_empty() {
        return Err(Error::Report(format!("run {side} has no metrics")));
    }
    let mut finals = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        finals.push(run.last().ok_or_else(|| {
            Error::Report(format!("run {side} repeat {i} has no epochs"))
        })?);
    }
    let class_count = finals[0].wk.len();
    if finals.iter().any(|r| r.wk.len() != class_count) {
        return Err(Error::Report(format!(
            "run {side} mixes class counts across repeats"
        )));
    }
    let k = finals.len() as f64;
    let mean_series = |pick: fn(&MetricsRecord) -> &Vec<f64>| -> Vec<f64> {
        (0..class_count)
            .map(|j| {
                finals
                    .iter()
                    .map(|r| pick(r).get(j).copied().unwrap_or(f64::NAN))
                    .sum::<f64>()
                    / k
            })
            .collect()
    };
    // Prefer the held-out accuracy; fall back to train accuracy for
    // runs without a test split.
    let accuracy = |r: &MetricsRecord| {
        if r.test_accuracy.is_finite() {
            r.test_accuracy
        } else {
            r.train_accuracy
        }
    };
    Ok(SideSummary {
        repeats: finals.len(),
        train_icj: mean_series(|r| &r.train_icj),
        test_icj: mean_series(|r| &r.test_icj),
        acc_avg: finals.iter().map(|r| accuracy(r)).sum::<f64>() / k,
        acc_max: finals.iter().map(|r| accuracy(r)).fold(f64::NEG_INFINITY, f64::max),
        class_count,
    })
}

/// Compare run A (the baseline) against run B (ours). Each side is a
/// list of repeats; each repeat is that run's full metrics history.
pub fn compare(a: &[Vec<MetricsRecord>], b: &[Vec<MetricsRecord>]) -> Result<ComparisonReport> {
    let sa = summarize(a, "A")?;
    let sb = summarize(b, "B")?;
    if sa.class_count != sb.class_count {
        return Err(Error::Report(format!(
            "class-count mismatch: run A has {}, run B has {}",
            sa.class_count, sb.class_count
        )));
    }
    let deltas = |xa: &[f64], xb: &[f64]| -> Vec<Option<f64>> {
        xa.iter().zip(xb).map(|(&va, &vb)| delta_percent(va, vb)).collect()
    };
    Ok(ComparisonReport {
        class_count: sa.class_count,
        repeats_a: sa.repeats,
        repeats_b: sb.repeats,
        train_delta: deltas(&sa.train_icj, &sb.train_icj),
        test_delta: deltas(&sa.test_icj, &sb.test_icj),
        train_icj_a: sa.train_icj,
        train_icj_b: sb.train_icj,
        test_icj_a: sa.test_icj,
        test_icj_b: sb.test_icj,
        acc_avg_delta: delta_percent(sa.acc_avg, sb.acc_avg),
        acc_max_delta: delta_percent(sa.acc_max, sb.acc_max),
        acc_avg_a: sa.acc_avg,
        acc_avg_b: sb.acc_avg,
        acc_max_a: sa.acc_max,
        acc_max_b: sb.acc_max,
    })
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "row,a,b,delta_pct\n",
        );
        for j in 0..self.class_count {
            out.push_str(&format!(
                "train_icj_{j},{},{},{}\n",
                self.train_icj_a[j],
                self.train_icj_b[j],
                format_delta(self.train_delta[j])
            ));
        }
        for j in 0..self.class_count {
            out.push_str(&format!(
                "test_icj_{j},{},{},{}\n",
                self.test_icj_a[j],
                self.test_icj_b[j],
                format_delta(self.test_delta[j])
            ));
        }
        out.push_str(&format!(
            "accuracy_avg,{},{},{}\n",
            self.acc_avg_a,
            self.acc_avg_b,
            format_delta(self.acc_avg_delta)
        ));
        out.push_str(&format!(
            "accuracy_max,{},{},{}\n",
            self.acc_max_a,
            self.acc_max_b,
            format_delta(self.acc_max_delta)
        ));
        out.push_str(&format!("repeats,{},{},\n", self.repeats_a, self.repeats_b));
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>12} {:>12} {:>10}\n",
            "row", "A", "B", "delta%"
        );
        let mut push = |name: String, a: f64, b: f64, d: Option<f64>| {
            out.push_str(&format!(
                "{name:<16} {a:>12.4} {b:>12.4} {:>10}\n",
                format_delta(d)
            ));
        };
        for j in 0..self.class_count {
            push(
                format!("train_icj_{j}"),
                self.train_icj_a[j],
                self.train_icj_b[j],
                self.train_delta[j],
            );
        }
        for j in 0..self.class_count {
            push(
                format!("test_icj_{j}"),
                self.test_icj_a[j],
                self.test_icj_b[j],
                self.test_delta[j],
            );
        }
        push("accuracy_avg".into(), self.acc_avg_a, self.acc_avg_b, self.acc_avg_delta);
        push("accuracy_max".into(), self.acc_max_a, self.acc_max_b, self.acc_max_delta);
        out.push_str(&format!(
            "{:<16} {:>12} {:>12}\n",
            "repeats", self.repeats_a, self.repeats_b
        ));
        out
    }
}
