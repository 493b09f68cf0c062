use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub label_column: String,
    pub segment_column: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: "LABEL".into(),
            segment_column: "SEGMENT".into(),
        }
    }
}

/// One row per audio frame, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// Recording id per row when the file has a segment column.
    pub segments: Option<Vec<String>>,
}

impl FeatureTable {
    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_feature_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header of {}: {e}", path.display())))?
        .clone();

    let label_idx = headers
        .iter()
        .position(|h| h.trim() == options.label_column)
        .ok_or_else(|| {
            Error::Schema(format!(
                "{} has no label column '{}'",
                path.display(),
                options.label_column
            ))
        })?;
    let segment_idx = headers
        .iter()
        .position(|h| h.trim() == options.segment_column);
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && Some(i) != segment_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Schema(format!(
            "{} has no feature columns besides the label",
            path.display()
        )));
    }

    let mut table = FeatureTable {
        feature_names: feature_cols
            .iter()
            .map(|&i| headers[i].trim().to_string())
            .collect(),
        rows: Vec::new(),
        labels: Vec::new(),
        segments: segment_idx.map(|_| Vec::new()),
    };
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let mut values = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: headers[c].to_string(),
                message: format!("'{cell}' is not a number"),
            })?;
            values.push(v);
        }
        table.rows.push(values);
        table
            .labels
            .push(record.get(label_idx).unwrap_or("").trim().to_string());
        if let (Some(segs), Some(si)) = (table.segments.as_mut(), segment_idx) {
            segs.push(record.get(si).unwrap_or("").trim().to_string());
        }
    }
    Ok(table)
}

/// Lexicographically smaller class name → 0, larger → 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub classes: [String; 2],
}

impl LabelMap {
    pub fn code(&self, label: &str) -> Option<u8> {
        self.classes.iter().position(|c| c == label).map(|i| i as u8)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub segments: Option<Vec<String>>,
    pub label_map: LabelMap,
}

impl EncodedTable {
    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.labels.len() - ones, ones]
    }
}

pub fn encode_labels(table: &FeatureTable) -> Result<EncodedTable> {
    let distinct: BTreeSet<&str> = table.labels.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        let listed: Vec<&str> = distinct.iter().copied().collect();
        let detail = if listed.len() > 2 {
            format!("unexpected extra class '{}'", listed[2..].join("', '"))
        } else {
            "need exactly two".to_string()
        };
        return Err(Error::Schema(format!(
            "expected 2 label classes, found {} ({}): {detail}",
            listed.len(),
            listed.join(", ")
        )));
    }
    let mut it = distinct.into_iter();
    let label_map = LabelMap {
        classes: [it.next().unwrap().to_string(), it.next().unwrap().to_string()],
    };
    let labels = table
        .labels
        .iter()
        .map(|l| label_map.code(l).expect("label present in class set"))
        .collect();
    Ok(EncodedTable {
        feature_names: table.feature_names.clone(),
        rows: table.rows.clone(),
        labels,
        segments: table.segments.clone(),
        label_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn table_with_labels(labels: &[&str]) -> FeatureTable {
        FeatureTable {
            feature_names: vec!["a".into()],
            rows: labels.iter().map(|_| vec![0.0]).collect(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            segments: None,
        }
    }

    #[test]
    fn parses_small_file() {
        let f = write_tmp("x,y,z,LABEL\n1,2,3,REAL\n4,5.5,-6,FAKE\n");
        let t = load_feature_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.width(), 3);
        assert_eq!(t.rows[1], vec![4.0, 5.5, -6.0]);
        assert_eq!(t.labels, vec!["REAL", "FAKE"]);
        assert!(t.segments.is_none());
    }

    #[test]
    fn segment_column_is_not_a_feature() {
        let f = write_tmp("SEGMENT,x,LABEL\nr1,1,REAL\nr1,2,REAL\n");
        let t = load_feature_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(t.feature_names, vec!["x"]);
        assert_eq!(t.segments.unwrap(), vec!["r1", "r1"]);
    }

    #[test]
    fn schema_and_parse_errors() {
        let f = write_tmp("LABEL\nREAL\n");
        assert!(matches!(
            load_feature_csv(f.path(), &CsvOptions::default()),
            Err(Error::Schema(_))
        ));
        let f = write_tmp("x,y\n1,2\n");
        assert!(matches!(
            load_feature_csv(f.path(), &CsvOptions::default()),
            Err(Error::Schema(_))
        ));
        let f = write_tmp("x,y,LABEL\n1,2,A\n3,oops,B\n");
        match load_feature_csv(f.path(), &CsvOptions::default()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            load_feature_csv("/nonexistent/features.csv", &CsvOptions::default()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn lexicographic_encoding() {
        let e = encode_labels(&table_with_labels(&["REAL", "FAKE", "REAL"])).unwrap();
        assert_eq!(e.labels, vec![1, 0, 1]);
        assert_eq!(e.label_map.classes, ["FAKE".to_string(), "REAL".to_string()]);
    }

    #[test]
    fn three_classes_rejected_naming_the_extra() {
        let err = encode_labels(&table_with_labels(&["a", "b", "c"])).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("'c'")), "{err}");
        assert!(encode_labels(&table_with_labels(&["a", "a"])).is_err());
    }

    #[test]
    fn encoding_is_idempotent_on_numeric_labels() {
        let e = encode_labels(&table_with_labels(&["0", "1", "1"])).unwrap();
        assert_eq!(e.labels, vec![0, 1, 1]);
        let again = FeatureTable {
            labels: e.labels.iter().map(|y| y.to_string()).collect(),
            ..table_with_labels(&["0", "1", "1"])
        };
        assert_eq!(encode_labels(&again).unwrap().labels, e.labels);
    }
}
