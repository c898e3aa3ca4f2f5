//! Append-only CSV metrics log, one row per epoch.
//!
//! The header is fixed for a given class count; appending to an
//! existing file verifies the header instead of rewriting it. Values
//! are written with Rust's shortest round-trip float formatting, so a
//! read-back is exact.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::train::MetricsRecord;

pub fn header(class_count: usize) -> String {
    let mut cols = vec![
        "epoch".to_string(),
        "train_acc".to_string(),
        "test_acc".to_string(),
        "total_loss".to_string(),
        "xent".to_string(),
        "aux".to_string(),
    ];
    for prefix in ["train_icj", "test_icj", "wk"] {
        for j in 0..class_count {
            cols.push(format!("{prefix}_{j}"));
        }
    }
    cols.join(",")
}

fn format_row(record: &MetricsRecord, class_count: usize) -> String {
    let mut cols = vec![
        record.epoch.to_string(),
        record.train_accuracy.to_string(),
        record.test_accuracy.to_string(),
        record.total_loss.to_string(),
        record.xent.to_string(),
        record.aux.to_string(),
    ];
    for values in [&record.train_icj, &record.test_icj, &record.wk] {
        for j in 0..class_count {
            cols.push(values.get(j).copied().unwrap_or(f64::NAN).to_string());
        }
    }
    cols.join(",")
}

/// Append one record, writing the header first on a fresh file.
pub fn append_record(path: &Path, class_count: usize, record: &MetricsRecord) -> Result<()> {
    let expected = header(class_count);
    let fresh = match std::fs::read_to_string(path) {
        Ok(existing) => {
            let first = existing.lines().next().unwrap_or("");
            if !existing.is_empty() && first != expected {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    msg: format!("existing header {first:?} does not match {expected:?}"),
                });
            }
            existing.is_empty()
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => true,
        Err(e) => return Err(e.into()),
    };
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "{expected}")?;
    }
    writeln!(file, "{}", format_row(record, class_count))?;
    Ok(())
}

/// Write a header-only file, truncating anything present.
pub fn write_empty(path: &Path, class_count: usize) -> Result<()> {
    std::fs::write(path, format!("{}\n", header(class_count)))?;
    Ok(())
}

/// Read a metrics file back into records, returning the class count
/// inferred from the header.
pub fn read_metrics(path: &Path) -> Result<(usize, Vec<MetricsRecord>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Format {
        path: path.display().to_string(),
        msg: "empty metrics file".into(),
    })?;
    let cols: Vec<&str> = head.split(',').collect();
    if cols.len() < 6 || (cols.len() - 6) % 3 != 0 || cols[0] != "epoch" {
        return Err(Error::Format {
            path: path.display().to_string(),
            msg: format!("unrecognized header {head:?}"),
        });
    }
    let class_count = (cols.len() - 6) / 3;
    if head != header(class_count) {
        return Err(Error::Format {
            path: path.display().to_string(),
            msg: format!("unrecognized header {head:?}"),
        });
    }

    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Format {
                path: path.display().to_string(),
                msg: format!("line {}: {} fields, expected {}", lineno + 2, fields.len(), cols.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|_| Error::Format {
                path: path.display().to_string(),
                msg: format!("line {}: bad number {:?}", lineno + 2, fields[i]),
            })
        };
        let series = |offset: usize| -> Result<Vec<f64>> {
            (0..class_count).map(|j| num(6 + offset * class_count + j)).collect()
        };
        records.push(MetricsRecord {
            epoch: fields[0].parse().map_err(|_| Error::Format {
                path: path.display().to_string(),
                msg: format!("line {}: bad epoch {:?}", lineno + 2, fields[0]),
            })?,
            train_accuracy: num(1)?,
            test_accuracy: num(2)?,
            total_loss: num(3)?,
            xent: num(4)?,
            aux: num(5)?,
            train_icj: series(0)?,
            test_icj: series(1)?,
            wk: series(2)?,
        });
    }
    Ok((class_count, records))
}
