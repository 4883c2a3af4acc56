//! Placement files: CSV with `index,distance_m` columns (extra columns are
//! ignored), or JSON as emitted by `--format json` or `{"distances": [...]}`.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
struct Row {
    index: usize,
    distance_m: f64,
}

fn parse_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn from_rows(path: &Path, mut rows: Vec<Row>) -> Result<Vec<f64>, CliError> {
    if rows.is_empty() {
        return Err(parse_error(path, "no placement rows"));
    }
    rows.sort_by_key(|r| r.index);
    for (k, r) in rows.iter().enumerate() {
        if r.index != k + 1 {
            return Err(parse_error(
                path,
                format!("expected index {} but found {}", k + 1, r.index),
            ));
        }
    }
    Ok(rows.into_iter().map(|r| r.distance_m).collect())
}

fn read_csv(path: &Path, text: &str) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows = reader
        .deserialize::<Row>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| parse_error(path, e.to_string()))?;
    from_rows(path, rows)
}

fn read_json(path: &Path, text: &str) -> Result<Vec<f64>, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_error(path, e.to_string()))?;
    let distances = match &value {
        Value::Array(_) => {
            let rows: Vec<Row> =
                serde_json::from_value(value).map_err(|e| parse_error(path, e.to_string()))?;
            return from_rows(path, rows);
        }
        Value::Object(obj) => obj
            .get("distances")
            .or_else(|| obj.get("placement").and_then(|p| p.get("distances"))),
        _ => None,
    };
    let distances = distances.ok_or_else(|| parse_error(path, "no 'distances' array"))?;
    serde_json::from_value(distances.clone()).map_err(|e| parse_error(path, e.to_string()))
}

/// Reads link distances `d_1..d_N`, sink side first.
pub fn read_distances(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with(['[', '{']);
    if is_json {
        read_json(path, &text)
    } else {
        read_csv(path, &text)
    }
}
