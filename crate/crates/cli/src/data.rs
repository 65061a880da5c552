//! Sample file parsing.

use std::collections::{BTreeSet, HashSet};
use std::io::Read;

use crate::error::SchemaError;

/// Unit-level columns of a sample file. Domains are 0-based here and
/// stratum labels are mapped to `0..H` in sorted label order (numeric when
/// every label is an integer).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub unit_ids: Vec<String>,
    pub y: Vec<f64>,
    pub pi: Vec<f64>,
    pub domain: Vec<usize>,
    pub stratum: Option<Vec<usize>>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<&'a str, SchemaError> {
    rec.get(idx)
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| SchemaError(format!("line {line}: missing {name}")))
}

fn number(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64, SchemaError> {
    let v = field(rec, idx, name, line)?;
    v.parse::<f64>().map_err(|_| SchemaError(format!("line {line}: {name} {v:?} is not a number")))
}

/// Parses a sample file with a header row. Domain ids are 1-based and must
/// not exceed `n_domains`.
pub fn read_sample<R: Read>(reader: R, n_domains: usize) -> Result<SampleTable, SchemaError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| SchemaError(format!("header: {e}")))?.clone();
    let require = |name: &str| column(&headers, name).ok_or_else(|| SchemaError(format!("missing column {name}")));
    let (id_col, y_col, domain_col) = (require("unit_id")?, require("y")?, require("domain")?);
    let (pi_col, weight_col) = (column(&headers, "pi"), column(&headers, "weight"));
    let stratum_col = column(&headers, "stratum");
    let prob_col = match (pi_col, weight_col) {
        (Some(_), Some(_)) => return Err(SchemaError("give either pi or weight, not both".into())),
        (None, None) => return Err(SchemaError("missing column pi (or weight)".into())),
        (Some(c), None) | (None, Some(c)) => c,
    };

    let mut table = SampleTable { unit_ids: Vec::new(), y: Vec::new(), pi: Vec::new(), domain: Vec::new(), stratum: None };
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| SchemaError(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = field(&rec, id_col, "unit_id", line)?.to_string();
        if !seen.insert(id.clone()) {
            return Err(SchemaError(format!("line {line}: duplicate unit_id {id}")));
        }
        let y = number(&rec, y_col, "y", line)?;
        let p = number(&rec, prob_col, if weight_col.is_some() { "weight" } else { "pi" }, line)?;
        let pi = if weight_col.is_some() {
            if p.is_nan() || p < 1.0 {
                return Err(SchemaError(format!("line {line}: weight {p} below 1")));
            }
            1.0 / p
        } else {
            p
        };
        let d = field(&rec, domain_col, "domain", line)?;
        let d: usize = d.parse().map_err(|_| SchemaError(format!("line {line}: domain {d:?} is not a positive integer")))?;
        if d == 0 || d > n_domains {
            return Err(SchemaError(format!("line {line}: domain {d} outside 1..={n_domains}")));
        }
        if let Some(c) = stratum_col {
            labels.push(field(&rec, c, "stratum", line)?.to_string());
        }
        table.unit_ids.push(id);
        table.y.push(y);
        table.pi.push(pi);
        table.domain.push(d - 1);
    }
    if table.y.is_empty() {
        return Err(SchemaError("no units".into()));
    }
    if stratum_col.is_some() {
        table.stratum = Some(index_labels(&labels));
    }
    Ok(table)
}

fn index_labels(labels: &[String]) -> Vec<usize> {
    let numeric: Option<Vec<i64>> = labels.iter().map(|l| l.parse().ok()).collect();
    match numeric {
        Some(values) => {
            let sorted: Vec<i64> = values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            values.iter().map(|v| sorted.binary_search(v).expect("present")).collect()
        }
        None => {
            let sorted: Vec<&String> = labels.iter().collect::<BTreeSet<_>>().into_iter().collect();
            labels.iter().map(|l| sorted.binary_search(&l).expect("present")).collect()
        }
    }
}
