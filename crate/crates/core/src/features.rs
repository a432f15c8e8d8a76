//! Feature tables on disk: a CSV of signatures plus a JSON sidecar that
//! records how they were extracted, and evaluation/sweep reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{EvalResult, FeatureTable, SweepRow};
use crate::signature::SignatureMeta;

/// Description of a feature CSV, stored next to it as `<csv>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub library_version: String,
    #[serde(flatten)]
    pub meta: SignatureMeta,
    pub feature_count: usize,
    pub samples: usize,
    pub class_names: Vec<String>,
    pub csv_sha256: String,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One extracted row: relative image path, class name, values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub path: String,
    pub class_name: String,
    pub values: Vec<f64>,
}

/// Renders rows as CSV text. Values use the shortest representation that
/// parses back to the same double.
pub fn render_csv(meta: &SignatureMeta, rows: &[FeatureRow]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["path".to_string(), "class".to_string()];
    header.extend(meta.feature_names());
    writer.write_record(&header).map_err(csv_error)?;
    for row in rows {
        if row.values.len() != meta.feature_count() {
            return Err(Error::Parameter(format!(
                "row for {} has {} values, expected {}",
                row.path,
                row.values.len(),
                meta.feature_count()
            )));
        }
        let mut record = vec![row.path.clone(), row.class_name.clone()];
        record.extend(row.values.iter().map(|v| v.to_string()));
        writer.write_record(&record).map_err(csv_error)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Serialization(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Writes the CSV and its sidecar.
pub fn write_feature_table(
    csv_path: &Path,
    meta: &SignatureMeta,
    class_names: &[String],
    rows: &[FeatureRow],
) -> Result<Sidecar> {
    let bytes = render_csv(meta, rows)?;
    let sidecar = Sidecar {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        meta: meta.clone(),
        feature_count: meta.feature_count(),
        samples: rows.len(),
        class_names: class_names.to_vec(),
        csv_sha256: sha256_hex(&bytes),
    };
    write_file(csv_path, &bytes)?;
    write_json(&sidecar_path(csv_path), &sidecar)?;
    Ok(sidecar)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_sidecar(csv_path: &Path) -> Result<Sidecar> {
    let path = sidecar_path(csv_path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: format!("{}: {e}", path.display()),
    })
}

/// A feature CSV read back together with its validated sidecar.
#[derive(Debug, Clone)]
pub struct LoadedFeatures {
    pub sidecar: Sidecar,
    pub rows: Vec<FeatureRow>,
}

impl LoadedFeatures {
    /// Class ids follow the sidecar's class list.
    pub fn to_table(&self) -> Result<FeatureTable> {
        let mut labels = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let id = self
                .sidecar
                .class_names
                .iter()
                .position(|c| *c == row.class_name)
                .ok_or_else(|| {
                    Error::Validation(format!("class '{}' is not listed in the sidecar", row.class_name))
                })?;
            labels.push(id);
        }
        let values: Vec<Vec<f64>> = self.rows.iter().map(|r| r.values.clone()).collect();
        FeatureTable::from_rows(&values, labels)
    }
}

/// Reads a feature CSV, checking it against its sidecar (hash, header,
/// row count and width).
pub fn read_feature_table(csv_path: &Path) -> Result<LoadedFeatures> {
    let sidecar = read_sidecar(csv_path)?;
    let bytes = fs::read(csv_path).map_err(|e| Error::io(csv_path, e))?;
    if sha256_hex(&bytes) != sidecar.csv_sha256 {
        return Err(Error::Validation(format!(
            "{} does not match the hash recorded in its sidecar",
            csv_path.display()
        )));
    }
    if sidecar.feature_count != sidecar.meta.feature_count() {
        return Err(Error::Validation("sidecar feature count is inconsistent".into()));
    }

    let rows = parse_csv(&bytes, &sidecar.meta)?;
    if rows.len() != sidecar.samples {
        return Err(Error::Validation(format!(
            "CSV has {} rows, sidecar records {}",
            rows.len(),
            sidecar.samples
        )));
    }
    Ok(LoadedFeatures { sidecar, rows })
}

/// Parses feature CSV text; errors carry the 1-based line number.
pub fn parse_csv(bytes: &[u8], meta: &SignatureMeta) -> Result<Vec<FeatureRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = reader.records();

    let header = records
        .next()
        .ok_or(Error::Parse {
            line: 1,
            message: "empty file".into(),
        })?
        .map_err(csv_error)?;
    let mut expected = vec!["path".to_string(), "class".to_string()];
    expected.extend(meta.feature_names());
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            message: "header does not match the sidecar parameters".into(),
        });
    }

    let width = expected.len();
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .skip(2)
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("'{field}' is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            path: record[0].to_string(),
            class_name: record[1].to_string(),
            values,
        });
    }
    Ok(rows)
}

/// JSON form of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub gamma: f64,
    #[serde(flatten)]
    pub result: EvalResult,
}

/// Plain-text summary: overall accuracy, per-class accuracy and the
/// confusion matrix.
pub fn render_eval_text(report: &EvalReport) -> String {
    let r = &report.result;
    let mut out = String::new();
    out.push_str(&format!(
        "leave-one-out LDA (gamma={}), {} folds\naccuracy: {}%\n\n",
        report.gamma,
        r.folds,
        r.accuracy_percent()
    ));
    let name_width = report.class_names.iter().map(String::len).max().unwrap_or(5).max(5);
    out.push_str(&format!("{:<name_width$}  {:>8}  {:>7}\n", "class", "samples", "acc %"));
    for (c, name) in report.class_names.iter().enumerate() {
        let total: usize = r.confusion[c].iter().sum();
        out.push_str(&format!(
            "{:<name_width$}  {:>8}  {:>7.2}\n",
            name,
            total,
            r.per_class_accuracy[c] * 100.0
        ));
    }
    out.push_str("\nconfusion (rows = true class, columns = predicted)\n");
    for row in &r.confusion {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>4}")).collect();
        out.push_str(&cells.join(""));
        out.push('\n');
    }
    out
}

pub fn render_sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["radii", "qs", "features", "accuracy"])
        .map_err(csv_error)?;
    for row in rows {
        let join = |v: Vec<String>| v.join(" ");
        writer
            .write_record([
                join(row.radii.iter().map(u32::to_string).collect()),
                join(row.qs.iter().map(usize::to_string).collect()),
                row.features.to_string(),
                row.accuracy.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Serialization(e.to_string()))
}
