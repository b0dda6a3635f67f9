//! `features.csv`: `subject_id,start_index,c0_rms,...,c<C-1>_band_pow`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{feature_names, FeatureError, FeatureVector, FEATURES_PER_CHANNEL};

pub fn write_features_csv(
    path: impl AsRef<Path>,
    rows: &[FeatureVector],
) -> Result<(), FeatureError> {
    let dim = rows.first().map_or(0, |r| r.values.len());
    if dim == 0 || !dim.is_multiple_of(FEATURES_PER_CHANNEL) {
        return Err(FeatureError::Table(format!(
            "cannot write {} rows of dimension {dim}",
            rows.len()
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    let mut header = vec!["subject_id".to_string(), "start_index".to_string()];
    header.extend(feature_names(dim / FEATURES_PER_CHANNEL));
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        if r.values.len() != dim {
            return Err(FeatureError::Table("rows differ in dimension".into()));
        }
        let vals: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{},{}", r.subject_id, r.start_index, vals.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut reader =
        csv::Reader::from_path(path.as_ref()).map_err(|e| FeatureError::Table(e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| FeatureError::Table(e.to_string()))?
        .clone();
    if header.len() < 2 + FEATURES_PER_CHANNEL || (header.len() - 2) % FEATURES_PER_CHANNEL != 0 {
        return Err(FeatureError::Table(format!(
            "unexpected column count {}",
            header.len()
        )));
    }
    let dim = header.len() - 2;
    let expected = feature_names(dim / FEATURES_PER_CHANNEL);
    if &header[0] != "subject_id"
        || &header[1] != "start_index"
        || header
            .iter()
            .skip(2)
            .ne(expected.iter().map(String::as_str))
    {
        return Err(FeatureError::Table(
            "header does not match the feature layout".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| FeatureError::Table(e.to_string()))?;
        let bad = |what: &str| FeatureError::Table(format!("row {i}: bad {what}"));
        let subject_id = rec[0].trim().parse().map_err(|_| bad("subject_id"))?;
        let start_index = rec[1].trim().parse().map_err(|_| bad("start_index"))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| bad("feature value"))?;
        rows.push(FeatureVector {
            values,
            subject_id,
            start_index,
        });
    }
    Ok(rows)
}
