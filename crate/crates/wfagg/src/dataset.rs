//! CSV import for real feature matrices.
//!
//! Format: a header row, then one sample per row. The first column is the
//! integer class label in `0..C`; the remaining columns are the features
//! as decimal numbers. Every row must have the same number of columns.
//!
//! ```text
//! label,x0,x1,x2
//! 3,0.0,0.25,1.0
//! 0,0.5,0.0,0.75
//! ```

use std::path::Path;

use wfagg_core::learning::{split_even, Dataset};
use wfagg_core::rng::{stream, Purpose};

use crate::{Error, Result};

/// Reads a labelled feature matrix. `classes` defaults to one more than the
/// largest label.
pub fn load_csv(path: &Path, classes: Option<usize>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, classes)
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R, origin: &Path, classes: Option<usize>) -> Result<Dataset> {
    let bad = |line: u64, reason: String| Error::Dataset {
        path: origin.to_path_buf(),
        line,
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(bad(1, "need a label column and at least one feature column".into()));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let label: usize = record[0]
            .parse()
            .map_err(|_| bad(line, format!("label {:?} is not a non-negative integer", &record[0])))?;
        for field in record.iter().skip(1) {
            let x: f64 = field.parse().map_err(|_| bad(line, format!("feature {field:?} is not a number")))?;
            if !x.is_finite() {
                return Err(bad(line, format!("feature {field:?} is not finite")));
            }
            features.push(x);
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(bad(1, "no samples".into()));
    }
    let seen = labels.iter().max().map_or(0, |&m| m + 1);
    let classes = classes.unwrap_or(seen);
    if seen > classes {
        return Err(bad(0, format!("label {} outside 0..{classes}", seen - 1)));
    }
    Ok(Dataset::new(features, labels, width - 1, classes)?)
}

/// Shuffles `train` with the experiment seed and splits it evenly across
/// `nodes` clients.
pub fn shard(train: &Dataset, nodes: usize, seed: u64) -> Result<Vec<Dataset>> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut stream(seed, 0, 2, Purpose::Data));
    Ok(split_even(&train.subset(&order), nodes)?)
}
