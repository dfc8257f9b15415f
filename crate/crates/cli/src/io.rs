//! Dataset CSV ingestion and emission, number formatting and file digests.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use frailty::{ClusteredDataset, Record};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// `%.17g`: 17 significant digits, trailing zeros removed.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Column names used to read a dataset.
#[derive(Debug, Clone)]
pub struct Columns {
    pub time: String,
    pub status: String,
    pub cluster: String,
    /// All remaining columns except `rep` when absent.
    pub covariates: Option<Vec<String>>,
}

#[derive(Debug)]
pub struct Ingested {
    pub data: ClusteredDataset,
    pub rows_read: usize,
    pub rows_dropped: usize,
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "na" | "NaN" | "nan" | ".")
}

fn parse_status(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "TRUE" | "true" | "T" => Some(true),
        "0" | "FALSE" | "false" | "F" => Some(false),
        _ => None,
    }
}

/// Reads a dataset, dropping rows with a missing value in any used column.
/// Non-integer cluster labels are numbered by first appearance.
pub fn read_dataset(path: &Path, cols: &Columns) -> Result<Ingested, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("--data {}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("--data {}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let find = |name: &str, flag: &str| -> Result<usize, CliError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{flag}: column '{name}' not found in {}", path.display())))
    };
    let it = find(&cols.time, "--time")?;
    let is = find(&cols.status, "--status")?;
    let ic = find(&cols.cluster, "--cluster")?;
    let cov_names: Vec<String> = match &cols.covariates {
        Some(v) => v.clone(),
        None => header
            .iter()
            .filter(|h| ![&cols.time, &cols.status, &cols.cluster].contains(h) && h.as_str() != "rep")
            .cloned()
            .collect(),
    };
    let icov = cov_names.iter().map(|c| find(c, "--covariates")).collect::<Result<Vec<_>, _>>()?;

    let mut raw = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("--data {}: {e}", path.display())))?;
        rows_read += 1;
        let used = std::iter::once(it).chain([is, ic]).chain(icov.iter().copied());
        if used.clone().any(|k| rec.get(k).is_none_or(is_missing)) {
            rows_dropped += 1;
            continue;
        }
        let bad = |what: &str, v: &str| CliError::Usage(format!("{}: row {}: {what} '{v}'", path.display(), line + 2));
        let time: f64 = rec[it].parse().map_err(|_| bad("non-numeric time", &rec[it]))?;
        let status = parse_status(&rec[is]).ok_or_else(|| bad("status must be 0 or 1, found", &rec[is]))?;
        let covariates = icov
            .iter()
            .map(|&k| rec[k].parse::<f64>().map_err(|_| bad("non-numeric covariate", &rec[k])))
            .collect::<Result<Vec<_>, _>>()?;
        raw.push((rec[ic].to_string(), time, status, covariates));
    }

    let numeric: Option<Vec<u64>> = raw.iter().map(|r| r.0.parse::<u64>().ok()).collect();
    let labels: Vec<u64> = match numeric {
        Some(v) => v,
        None => {
            let mut ids: HashMap<&str, u64> = HashMap::new();
            raw.iter()
                .map(|r| {
                    let next = ids.len() as u64 + 1;
                    *ids.entry(r.0.as_str()).or_insert(next)
                })
                .collect()
        }
    };
    let mut members: HashMap<u64, u32> = HashMap::new();
    let records = raw
        .into_iter()
        .zip(labels)
        .map(|((_, time, status, covariates), cluster)| {
            let m = members.entry(cluster).or_insert(0);
            *m += 1;
            Record {
                cluster,
                member: *m,
                time,
                status,
                covariates,
            }
        })
        .collect();
    let data = ClusteredDataset::new(records, Some(cov_names)).map_err(|e| CliError::Usage(format!("--data {}: {e}", path.display())))?;
    Ok(Ingested {
        data,
        rows_read,
        rows_dropped,
    })
}

fn open_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes rows of already formatted fields.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = open_writer(path)?;
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `family,rep,time,status,<covariates>`.
pub fn write_dataset(path: &Path, data: &ClusteredDataset) -> Result<(), CliError> {
    let mut header: Vec<String> = ["family", "rep", "time", "status"].iter().map(|s| s.to_string()).collect();
    header.extend(data.covariate_names.iter().cloned());
    let rows: Vec<Vec<String>> = data
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.cluster.to_string(), r.member.to_string(), num(r.time), u8::from(r.status).to_string()];
            row.extend(r.covariates.iter().map(|&z| num(z)));
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}
