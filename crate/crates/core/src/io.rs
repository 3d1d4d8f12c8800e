//! CSV ingestion and export.
//!
//! All files are UTF-8, comma-delimited, with a header row. Numbers are
//! written with Rust's shortest round-trip formatting, so a network written by
//! [`write_firm_network`] reads back bit-identical.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{FirmNetwork, IndustryNetwork};
use crate::propagation::{EssentialityTable, InputClass, PropagationResult};
use crate::shock::EmploymentRecord;

/// Label of the industry that collects firms without a classification.
pub const RESIDUAL_LABEL: &str = "NA";

fn reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<Box<dyn Read>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    reader_from(Box::new(file), path, expected)
}

fn reader_from<R: Read>(src: R, path: &Path, expected: &[&str]) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(src);
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::parse(
            path,
            1,
            format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(rdr)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(create(path)?))
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Orders labels numerically when both parse as integers, lexicographically
/// otherwise (numbers first).
pub(crate) fn label_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Reads `supplier,buyer,weight` edges and `firm,industry` metadata.
///
/// Firm indices follow the order of the metadata file. Duplicate edges are
/// summed. Firms with a blank industry go to a residual industry placed after
/// all labelled industries.
pub fn read_firm_network(edge_path: &Path, meta_path: &Path) -> Result<FirmNetwork> {
    let edges = File::open(edge_path).map_err(|e| Error::io(edge_path, e))?;
    let meta = File::open(meta_path).map_err(|e| Error::io(meta_path, e))?;
    parse_firm_network(edges, edge_path, meta, meta_path)
}

/// [`read_firm_network`] over arbitrary readers; the paths only label errors.
pub fn parse_firm_network<E: Read, M: Read>(
    edge_src: E,
    edge_path: &Path,
    meta: M,
    meta_path: &Path,
) -> Result<FirmNetwork> {
    let mut ids: Vec<String> = Vec::new();
    let mut raw_labels: Vec<Option<String>> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();

    let mut meta = reader_from(meta, meta_path, &["firm", "industry"])?;
    for row in meta.records() {
        let row = row.map_err(|e| Error::csv(meta_path, e))?;
        let firm = row.get(0).unwrap_or("").to_string();
        if firm.is_empty() {
            return Err(Error::parse(meta_path, line_of(&row), "empty firm id"));
        }
        let label = row.get(1).filter(|s| !s.is_empty()).map(str::to_string);
        if index.insert(firm.clone(), ids.len()).is_some() {
            return Err(Error::parse(
                meta_path,
                line_of(&row),
                format!("duplicate firm `{firm}`"),
            ));
        }
        ids.push(firm);
        raw_labels.push(label);
    }

    let mut labels: Vec<String> = raw_labels
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    labels.sort_by(|a, b| label_order(a, b));
    let mut residual = None;
    if raw_labels.iter().any(Option::is_none) {
        let mut name = RESIDUAL_LABEL.to_string();
        while labels.contains(&name) {
            name.push('_');
        }
        residual = Some(labels.len());
        labels.push(name);
    }
    let label_index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(k, l)| (l.as_str(), k))
        .collect();
    let industry: Vec<usize> = raw_labels
        .iter()
        .map(|l| match l {
            Some(l) => label_index[l.as_str()],
            None => residual.expect("residual exists when a label is missing"),
        })
        .collect();

    let mut edges = Vec::new();
    let mut rdr = reader_from(edge_src, edge_path, &["supplier", "buyer", "weight"])?;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(edge_path, e))?;
        let line = line_of(&row);
        let lookup = |col: usize| -> Result<usize> {
            let id = row.get(col).unwrap_or("");
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownFirm(id.to_string()))
        };
        let (i, j) = (lookup(0)?, lookup(1)?);
        let w: f64 = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(edge_path, line, "weight is not a number"))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::parse(
                edge_path,
                line,
                format!("weight {w} must be positive"),
            ));
        }
        if i == j {
            return Err(Error::parse(edge_path, line, "self-loop"));
        }
        edges.push((i, j, w));
    }

    let net = FirmNetwork::new(ids, industry, labels, edges)?;
    Ok(match residual {
        Some(r) => net.with_residual(r),
        None => net,
    })
}

/// Writes the canonical edge and metadata files for `net`.
pub fn write_firm_network(net: &FirmNetwork, edge_path: &Path, meta_path: &Path) -> Result<()> {
    let mut w = csv_writer(edge_path)?;
    let err = |e| Error::csv(edge_path, e);
    w.write_record(["supplier", "buyer", "weight"])
        .map_err(err)?;
    for (i, j, weight) in net.graph().edges() {
        w.write_record([net.firm_id(i), net.firm_id(j), &weight.to_string()])
            .map_err(err)?;
    }
    finish(edge_path, w)?;

    let mut w = csv_writer(meta_path)?;
    let err = |e| Error::csv(meta_path, e);
    w.write_record(["firm", "industry"]).map_err(err)?;
    for v in 0..net.firm_count() {
        let k = net.industry(v);
        let label = if Some(k) == net.residual_industry() {
            ""
        } else {
            net.industry_label(k)
        };
        w.write_record([net.firm_id(v), label]).map_err(err)?;
    }
    finish(meta_path, w)
}

/// Writes `Z` with industry labels as header row and first column.
pub fn write_industry_matrix(z: &IndustryNetwork, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| Error::csv(path, e);
    let mut header = vec!["industry".to_string()];
    header.extend(z.labels().iter().cloned());
    w.write_record(&header).map_err(err)?;
    let m = z.industry_count();
    for k in 0..m {
        let mut row = vec![z.labels()[k].clone()];
        row.extend((0..m).map(|l| z.flow(k, l).to_string()));
        w.write_record(&row).map_err(err)?;
    }
    finish(path, w)
}

/// Reads a `producer_industry,input_industry,class` table. Rows naming
/// industries absent from `labels` are skipped.
pub fn read_essentiality(
    path: &Path,
    labels: &[String],
    default: InputClass,
) -> Result<EssentialityTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_essentiality(file, path, labels, default)
}

/// [`read_essentiality`] over an arbitrary reader.
pub fn parse_essentiality<R: Read>(
    src: R,
    path: &Path,
    labels: &[String],
    default: InputClass,
) -> Result<EssentialityTable> {
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(k, l)| (l.as_str(), k))
        .collect();
    let mut table = EssentialityTable::new(default);
    let mut rdr = reader_from(src, path, &["producer_industry", "input_industry", "class"])?;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let class: InputClass = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e: String| Error::parse(path, line_of(&row), e))?;
        let (Some(&p), Some(&q)) = (
            index.get(row.get(0).unwrap_or("")),
            index.get(row.get(1).unwrap_or("")),
        ) else {
            continue;
        };
        table.set(p, q, class);
    }
    Ok(table)
}

/// Reads `firm,e_jan,e_may`; blank cells are missing counts.
pub fn read_employment(path: &Path) -> Result<Vec<EmploymentRecord>> {
    let mut out = Vec::new();
    let mut rdr = reader(path, &["firm", "e_jan", "e_may"])?;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = line_of(&row);
        let count = |col: usize| -> Result<Option<u64>> {
            let cell = row.get(col).unwrap_or("");
            if cell.is_empty() {
                return Ok(None);
            }
            let v: i64 = cell
                .parse()
                .map_err(|_| Error::parse(path, line, format!("`{cell}` is not an integer")))?;
            u64::try_from(v)
                .map(Some)
                .map_err(|_| Error::parse(path, line, format!("negative head count {v}")))
        };
        out.push(EmploymentRecord {
            firm: row.get(0).unwrap_or("").to_string(),
            e_jan: count(1)?,
            e_may: count(2)?,
        });
    }
    Ok(out)
}

/// Reads a `firm,psi` file into a capacity vector aligned with `net`.
/// Firms absent from the file keep full capacity.
pub fn read_shock(path: &Path, net: &FirmNetwork) -> Result<Vec<f64>> {
    let mut psi = vec![1.0; net.firm_count()];
    let mut rdr = reader(path, &["firm", "psi"])?;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let id = row.get(0).unwrap_or("");
        let i = net
            .firm_index(id)
            .ok_or_else(|| Error::UnknownFirm(id.to_string()))?;
        let v: f64 = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(path, line_of(&row), "psi is not a number"))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::parse(
                path,
                line_of(&row),
                format!("psi {v} outside [0,1]"),
            ));
        }
        psi[i] = v;
    }
    Ok(psi)
}

pub fn write_shock(path: &Path, net: &FirmNetwork, psi: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["firm", "psi"]).map_err(err)?;
    for (v, p) in psi.iter().enumerate() {
        w.write_record([net.firm_id(v), &p.to_string()])
            .map_err(err)?;
    }
    finish(path, w)
}

/// Writes `firm,h_down,h_up,h_final`; `ids` names the nodes of the result.
pub fn write_propagation(path: &Path, ids: &[String], result: &PropagationResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["firm", "h_down", "h_up", "h_final"])
        .map_err(err)?;
    for (v, id) in ids.iter().enumerate() {
        w.write_record([
            id.as_str(),
            &result.h_down[v].to_string(),
            &result.h_up[v].to_string(),
            &result.h_final[v].to_string(),
        ])
        .map_err(err)?;
    }
    finish(path, w)
}

/// Writes rows of pre-formatted cells under `header`.
pub(crate) fn write_rows<R, C>(path: &Path, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = Vec<C>>,
    C: AsRef<[u8]>,
{
    let mut w = csv_writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    finish(path, w)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn duplicate_rows_sum() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.csv", "supplier,buyer,weight\na,b,3\na,b,2\n");
        let m = write(dir.path(), "m.csv", "firm,industry\na,1\nb,2\n");
        let net = read_firm_network(&e, &m).unwrap();
        assert_eq!(net.firm_count(), 2);
        assert_eq!(net.graph().edges().collect::<Vec<_>>(), vec![(0, 1, 5.0)]);
    }

    #[test]
    fn unknown_firm_is_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.csv", "supplier,buyer,weight\na,c,1\n");
        let m = write(dir.path(), "m.csv", "firm,industry\na,1\nb,2\n");
        assert!(matches!(read_firm_network(&e, &m), Err(Error::UnknownFirm(id)) if id == "c"));
    }

    #[test]
    fn non_positive_weight_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.csv", "supplier,buyer,weight\na,b,0\n");
        let m = write(dir.path(), "m.csv", "firm,industry\na,1\nb,2\n");
        assert!(matches!(
            read_firm_network(&e, &m),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_label_goes_to_residual_and_isolated_firms_stay() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e.csv", "supplier,buyer,weight\na,b,1.5\n");
        let m = write(dir.path(), "m.csv", "firm,industry\na,10\nb,\nc,9\n");
        let net = read_firm_network(&e, &m).unwrap();
        assert_eq!(net.industry_labels(), &["9", "10", "NA"]);
        assert_eq!(net.residual_industry(), Some(2));
        assert_eq!(net.industry(1), 2);
        assert_eq!(net.strengths().s_out[2], 0.0);
    }

    #[test]
    fn negative_head_count_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "emp.csv", "firm,e_jan,e_may\na,10,\nb,-3,4\n");
        assert!(matches!(
            read_employment(&p),
            Err(Error::Parse { line: 3, .. })
        ));
        let p = write(dir.path(), "emp2.csv", "firm,e_jan,e_may\na,10,\n");
        let recs = read_employment(&p).unwrap();
        assert_eq!(recs[0].e_jan, Some(10));
        assert_eq!(recs[0].e_may, None);
    }
}
