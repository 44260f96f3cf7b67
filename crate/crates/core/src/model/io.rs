//! CSV label/truth files and the text checkpoint format.

use std::io::{BufRead, Read, Write};

use super::{ConfusionTensor, Cube, GroundTruth, LabelSet, LabelSetBuilder, ROW_SUM_TOLERANCE};
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, which round-trips every `f64`.
pub fn format_sig17(value: f64) -> String {
    format!("{value:.16e}")
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

fn csv_line(err: &csv::Error) -> u64 {
    err.position().map(|p| p.line()).unwrap_or(0)
}

fn map_csv(err: csv::Error) -> Error {
    match err.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(err),
        _ => Error::Format {
            line: csv_line(&err),
            message: err.to_string(),
        },
    }
}

fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = reader.headers().map_err(map_csv)?;
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(Error::Format {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

fn parse_label(line: u64, field: &str) -> Result<i64> {
    field.parse::<i64>().map_err(|_| Error::Format {
        line,
        message: format!("label {field:?} is not an integer"),
    })
}

/// Reads an `item,worker,label` CSV. Ids are assigned dense indices in
/// first-appearance order; `k` is `declared_classes` or the largest label seen.
pub fn load_labels<R: Read>(source: R, declared_classes: Option<usize>) -> Result<LabelSet> {
    let mut reader = csv_reader(source);
    check_header(&mut reader, &["item", "worker", "label"])?;
    let mut builder = LabelSetBuilder::new(declared_classes);
    for record in reader.records() {
        let record = record.map_err(map_csv)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let label = parse_label(line, &record[2])?;
        builder.push(line, &record[0], &record[1], label)?;
    }
    builder.finish()
}

/// Reads an `item,label` CSV against the item ids of `labels`.
pub fn load_ground_truth<R: Read>(source: R, labels: &LabelSet) -> Result<GroundTruth> {
    let mut reader = csv_reader(source);
    check_header(&mut reader, &["item", "label"])?;
    let classes = labels.num_classes();
    let mut truth = GroundTruth::default();
    for record in reader.records() {
        let record = record.map_err(map_csv)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = &record[0];
        let item = labels.item_ids().get(id).ok_or_else(|| Error::UnknownItem {
            line,
            id: id.to_owned(),
        })?;
        let label = parse_label(line, &record[1])?;
        if label < 1 || label as u64 > classes as u64 {
            return Err(Error::LabelOutOfRange {
                line,
                label,
                classes,
            });
        }
        if truth.insert(item, label as usize - 1).is_some() {
            return Err(Error::Format {
                line,
                message: format!("item {id:?} has more than one true label"),
            });
        }
    }
    Ok(truth)
}

pub fn write_labels<W: Write>(labels: &LabelSet, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["item", "worker", "label"])?;
    for o in labels.observations() {
        writer.write_record([
            labels.item_ids().id(o.item),
            labels.worker_ids().id(o.worker),
            &(o.class + 1).to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_truth<W: Write>(truth: &GroundTruth, labels: &LabelSet, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["item", "label"])?;
    for (item, class) in truth.iter() {
        writer.write_record([labels.item_ids().id(item), &(class + 1).to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes `item,label` rows for every item, labels 1-based.
pub fn write_predictions<W: Write>(predicted: &[usize], labels: &LabelSet, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["item", "label"])?;
    for (item, class) in predicted.iter().enumerate() {
        writer.write_record([labels.item_ids().id(item), &(class + 1).to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes `m k` followed by `m·k` rows of `k` values, worker-major.
pub fn save_checkpoint<W: Write>(confusion: &ConfusionTensor, mut sink: W) -> Result<()> {
    let (m, k) = (confusion.workers(), confusion.classes());
    writeln!(sink, "{m} {k}")?;
    for i in 0..m {
        for l in 0..k {
            let row: Vec<String> = confusion.row(i, l).iter().map(|&v| format_sig17(v)).collect();
            writeln!(sink, "{}", row.join(" "))?;
        }
    }
    sink.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: BufRead>(source: R) -> Result<ConfusionTensor> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(n, line)| line.map(|l| (n + 1, l.trim_end_matches('\r').to_owned())));
    let err = |line: usize, message: String| Error::Checkpoint { line, message };

    let (_, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| err(1, "empty checkpoint".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| err(1, format!("header {header:?} is not `m k`")))?;
    let &[m, k] = dims.as_slice() else {
        return Err(err(1, format!("header {header:?} is not `m k`")));
    };
    if k < 2 {
        return Err(err(1, format!("class count {k} is below 2")));
    }

    let mut data = Vec::with_capacity(m * k * k);
    let mut rows = 0usize;
    for item in lines {
        let (n, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        if rows == m * k {
            return Err(err(n, format!("more than {} rows", m * k)));
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(n, format!("unparseable row {line:?}")))?;
        if values.len() != k {
            return Err(err(n, format!("row has {} values, expected {k}", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(err(n, format!("entry {bad} is not strictly inside (0, 1)")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(err(n, format!("row sums to {sum}, expected 1")));
        }
        data.extend(values);
        rows += 1;
    }
    if rows != m * k {
        return Err(err(rows + 1, format!("found {rows} rows, expected {}", m * k)));
    }
    ConfusionTensor::new(Cube::from_vec(m, k, data)?)
}

#[cfg(test)]
fn truth_by_id(truth: &GroundTruth, labels: &LabelSet) -> std::collections::BTreeMap<String, usize> {
    truth
        .iter()
        .map(|(j, l)| (labels.item_ids().id(j).to_owned(), l + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "item,worker,label\na,w1,1\na,w2,2\nb,w1,2\n";

    #[test]
    fn loads_toy_label_file() {
        let labels = load_labels(TOY.as_bytes(), None).unwrap();
        assert_eq!(labels.num_workers(), 2);
        assert_eq!(labels.num_items(), 2);
        assert_eq!(labels.num_classes(), 2);
        assert_eq!(labels.observations().len(), 3);
        assert_eq!(labels.worker_ids().id(1), "w2");
    }

    #[test]
    fn declared_class_count_overrides() {
        let inferred = load_labels(TOY.as_bytes(), None).unwrap();
        let declared = load_labels(TOY.as_bytes(), Some(5)).unwrap();
        assert_eq!(declared.num_classes(), 5);
        assert_eq!(declared.observations(), inferred.observations());
    }

    #[test]
    fn crlf_is_accepted() {
        let labels = load_labels(TOY.replace('\n', "\r\n").as_bytes(), None).unwrap();
        assert_eq!(labels.observations().len(), 3);
    }

    #[test]
    fn duplicate_pair_reports_second_row() {
        let src = "item,worker,label\na,w1,1\na,w1,2\n";
        match load_labels(src.as_bytes(), None) {
            Err(Error::DuplicatePair { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn label_range_errors_carry_line() {
        let zero = "item,worker,label\na,w1,0\n";
        assert!(matches!(
            load_labels(zero.as_bytes(), None),
            Err(Error::LabelOutOfRange { line: 2, label: 0, .. })
        ));
        let high = "item,worker,label\na,w1,1\nb,w1,3\n";
        assert!(matches!(
            load_labels(high.as_bytes(), Some(2)),
            Err(Error::LabelOutOfRange { line: 3, label: 3, .. })
        ));
    }

    #[test]
    fn malformed_rows_are_format_errors() {
        let short = "item,worker,label\na,w1\n";
        assert!(matches!(load_labels(short.as_bytes(), None), Err(Error::Format { line: 2, .. })));
        let text = "item,worker,label\na,w1,x\n";
        assert!(matches!(load_labels(text.as_bytes(), None), Err(Error::Format { line: 2, .. })));
        let header = "task,worker,label\na,w1,1\n";
        assert!(matches!(load_labels(header.as_bytes(), None), Err(Error::Format { line: 1, .. })));
    }

    #[test]
    fn truth_loading() {
        let labels = load_labels(TOY.as_bytes(), None).unwrap();
        let truth = load_ground_truth("item,label\na,1\nb,2\n".as_bytes(), &labels).unwrap();
        let by_id = truth_by_id(&truth, &labels);
        assert_eq!(by_id["a"], 1);
        assert_eq!(by_id["b"], 2);

        let empty = load_ground_truth("item,label\n".as_bytes(), &labels).unwrap();
        assert!(empty.is_empty());

        let err = load_ground_truth("item,label\nc,1\n".as_bytes(), &labels).unwrap_err();
        assert!(err.to_string().contains("\"c\""), "{err}");

        assert!(load_ground_truth("item,label\na,3\n".as_bytes(), &labels).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let cube = Cube::from_vec(1, 2, vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let c = ConfusionTensor::new(cube).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next(), Some("1 2"));
        let back = load_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn checkpoint_validation() {
        let sum = load_checkpoint("1 2\n0.5 0.6\n0.5 0.5\n".as_bytes()).unwrap_err();
        assert!(sum.to_string().contains("sums to"), "{sum}");
        let zero = load_checkpoint("1 2\n1.0 0.0\n0.5 0.5\n".as_bytes()).unwrap_err();
        assert!(zero.to_string().contains("strictly"), "{zero}");
        let short = load_checkpoint("2 2\n0.5 0.5\n0.5 0.5\n".as_bytes()).unwrap_err();
        assert!(short.to_string().contains("expected 4"), "{short}");
        let wide = load_checkpoint("1 2\n0.5 0.25 0.25\n0.5 0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(wide, Error::Checkpoint { line: 2, .. }));
    }
}
