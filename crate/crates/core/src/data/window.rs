use std::ops::Range;

use crate::error::{Error, Result};

use super::table::EncodedTable;

/// Fixed-size windows of consecutive frames, flattened row-major
/// (`frame * features + feature`), each with a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub window: usize,
    pub features: usize,
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl WindowedDataset {
    pub fn empty(window: usize, features: usize) -> Self {
        Self {
            window,
            features,
            samples: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Self::empty(self.window, self.features);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!(
                    "sample index {i} out of range ({} samples)",
                    self.len()
                )));
            }
            out.samples.push(self.samples[i].clone());
            out.labels.push(self.labels[i]);
        }
        Ok(out)
    }
}

/// Maximal runs of rows sharing both segment id and label.
pub fn segments(table: &EncodedTable) -> Vec<Range<usize>> {
    let n = table.rows.len();
    let same = |a: usize, b: usize| {
        table.labels[a] == table.labels[b]
            && table
                .segments
                .as_ref()
                .is_none_or(|s| s[a] == s[b])
    };
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || !same(i - 1, i) {
            if start < i {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// First row of every window, in output order.
pub(crate) fn window_starts(table: &EncodedTable, window: usize) -> Result<Vec<usize>> {
    if window == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    let mut starts = Vec::new();
    for seg in segments(table) {
        if seg.len() < window {
            log::warn!(
                "segment at rows {}..{} has {} frames, fewer than the window of {window}; skipped",
                seg.start + 1,
                seg.end,
                seg.len()
            );
            continue;
        }
        starts.extend(seg.start..=seg.end - window);
    }
    Ok(starts)
}

/// Stride-1 windows that never cross a segment boundary. Segments shorter
/// than `window` contribute nothing.
pub fn make_windows(table: &EncodedTable, window: usize) -> Result<WindowedDataset> {
    let features = table.width();
    let mut ds = WindowedDataset::empty(window, features);
    for start in window_starts(table, window)? {
        let mut sample = Vec::with_capacity(window * features);
        for row in &table.rows[start..start + window] {
            sample.extend_from_slice(row);
        }
        ds.samples.push(sample);
        ds.labels.push(table.labels[start]);
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::table::LabelMap;

    fn table(labels: &[u8], segs: Option<&[&str]>) -> EncodedTable {
        EncodedTable {
            feature_names: vec!["f".into(), "g".into()],
            rows: (0..labels.len()).map(|i| vec![i as f64, -(i as f64)]).collect(),
            labels: labels.to_vec(),
            segments: segs.map(|s| s.iter().map(|x| x.to_string()).collect()),
            label_map: LabelMap {
                classes: ["A".into(), "B".into()],
            },
        }
    }

    #[test]
    fn single_segment_count() {
        let ds = make_windows(&table(&[1; 10], None), 5).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.samples[0], vec![0.0, -0.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0]);
    }

    #[test]
    fn unit_window_is_identity() {
        let t = table(&[0, 0, 1, 1], None);
        let ds = make_windows(&t, 1).unwrap();
        assert_eq!(ds.samples, t.rows);
        assert_eq!(ds.labels, t.labels);
    }

    #[test]
    fn windows_stay_inside_segments() {
        let mut labels = vec![0u8; 7];
        labels.extend([1u8; 6]);
        let ds = make_windows(&table(&labels, None), 5).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.labels, vec![0, 0, 0, 1, 1]);
        // First window of the second segment starts at frame 7.
        assert_eq!(ds.samples[3][0], 7.0);
    }

    #[test]
    fn segment_column_splits_same_label_runs() {
        let segs = ["a", "a", "a", "b", "b", "b"];
        let ds = make_windows(&table(&[1; 6], Some(&segs)), 2).unwrap();
        assert_eq!(ds.len(), 4);
        assert!(ds.samples.iter().all(|s| s[2] - s[0] == 1.0));
    }

    #[test]
    fn short_segment_yields_nothing() {
        let ds = make_windows(&table(&[0, 0, 1, 1, 1, 1, 1], None), 3).unwrap();
        assert_eq!(ds.labels, vec![1, 1, 1]);
        assert!(make_windows(&table(&[0], None), 0).is_err());
    }
}
