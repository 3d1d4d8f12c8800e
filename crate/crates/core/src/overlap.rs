//! Similarity of firms' industry-level input and output profiles.
//!
//! A firm's normalised input vector holds, for every industry, the share of
//! its purchases bought from firms of that industry (output vectors: sales
//! shares). Two firms are compared with the overlap coefficient, the sum of
//! elementwise minima of their share vectors, or with the Jaccard index of
//! the sets of industries they trade with. The same measures compare one
//! firm with itself across two years.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{DegreeBin, DegreeBins, FirmNetwork, StrengthProfile};

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::In, Direction::Out];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }

    fn degree(self, s: &StrengthProfile, firm: usize) -> usize {
        match self {
            Direction::In => s.k_in[firm],
            Direction::Out => s.k_out[firm],
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Measure {
    Overlap,
    Jaccard,
    TemporalOverlap,
    Retention,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Overlap => "oc",
            Measure::Jaccard => "jaccard",
            Measure::TemporalOverlap => "temporal_oc",
            Measure::Retention => "retention",
        }
    }
}

/// Industry shares of a firm's purchases (`In`) or sales (`Out`).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedIoVector {
    pub firm: usize,
    pub direction: Direction,
    pub values: Vec<f64>,
}

/// Industries a firm buys from (`In`) or sells to (`Out`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryIoVector {
    pub firm: usize,
    pub direction: Direction,
    pub mask: Vec<bool>,
}

impl NormalizedIoVector {
    pub fn binary(&self) -> BinaryIoVector {
        BinaryIoVector {
            firm: self.firm,
            direction: self.direction,
            mask: self.values.iter().map(|&v| v > 0.0).collect(),
        }
    }
}

fn partner_flows(net: &FirmNetwork, firm: usize, direction: Direction) -> Vec<(usize, f64)> {
    let g = net.graph();
    match direction {
        Direction::In => g
            .in_edges(firm)
            .map(|(j, w)| (net.industry(j), w))
            .collect(),
        Direction::Out => g
            .out_edges(firm)
            .map(|(j, w)| (net.industry(j), w))
            .collect(),
    }
}

pub fn normalized_vector(
    net: &FirmNetwork,
    firm: usize,
    direction: Direction,
) -> Result<NormalizedIoVector> {
    let mut values = vec![0.0; net.industry_count()];
    let mut total = 0.0;
    for (k, w) in partner_flows(net, firm, direction) {
        values[k] += w;
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::UndefinedVector {
            firm,
            direction: direction.as_str(),
        });
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(NormalizedIoVector {
        firm,
        direction,
        values,
    })
}

fn check_normalized(v: &NormalizedIoVector) -> Result<()> {
    let sum: f64 = v.values.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL || v.values.iter().any(|&x| x < 0.0) {
        return Err(Error::NotNormalized(v.firm));
    }
    Ok(())
}

/// Sum of elementwise minima of two share vectors.
pub fn overlap_coefficient(a: &NormalizedIoVector, b: &NormalizedIoVector) -> Result<f64> {
    if a.direction != b.direction || a.values.len() != b.values.len() {
        return Err(Error::VectorMismatch);
    }
    check_normalized(a)?;
    check_normalized(b)?;
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x.min(*y)).sum();
    Ok(s.min(1.0))
}

/// Size of the intersection over size of the union of two masks.
pub fn jaccard_index(a: &BinaryIoVector, b: &BinaryIoVector) -> Result<f64> {
    if a.direction != b.direction || a.mask.len() != b.mask.len() {
        return Err(Error::VectorMismatch);
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.mask.iter().zip(&b.mask) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Err(Error::EmptyMasks);
    }
    Ok(inter as f64 / union as f64)
}

/// Sparse share vector, industries ascending.
#[derive(Debug, Clone)]
struct Shares(Vec<(usize, f64)>);

impl Shares {
    fn of(net: &FirmNetwork, firm: usize, direction: Direction) -> Option<Shares> {
        let mut by_industry: BTreeMap<usize, f64> = BTreeMap::new();
        let mut total = 0.0;
        for (k, w) in partner_flows(net, firm, direction) {
            *by_industry.entry(k).or_default() += w;
            total += w;
        }
        (total > 0.0).then(|| {
            Shares(
                by_industry
                    .into_iter()
                    .map(|(k, w)| (k, w / total))
                    .collect(),
            )
        })
    }

    fn overlap(&self, other: &Shares) -> f64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += a[i].1.min(b[j].1);
                    i += 1;
                    j += 1;
                }
            }
        }
        s.min(1.0)
    }

    fn jaccard(&self, other: &Shares) -> f64 {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = a.len() + b.len() - inter;
        inter as f64 / union as f64
    }
}

/// Count, moments and percentiles of a sample of similarity values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

/// Percentile of sorted data by linear interpolation between order
/// statistics at rank `(n - 1) p`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl DistributionSummary {
    /// `None` for an empty sample. Standard deviation is the population one.
    pub fn from_values(mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(DistributionSummary {
            count: values.len(),
            mean,
            std: var.sqrt(),
            p5: percentile(&values, 0.05),
            p25: percentile(&values, 0.25),
            p50: percentile(&values, 0.50),
            p75: percentile(&values, 0.75),
            p95: percentile(&values, 0.95),
        })
    }
}

fn pair_values(shares: &[Shares], measure: Measure) -> Vec<f64> {
    (0..shares.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..shares.len()).map(move |j| match measure {
                Measure::Jaccard => shares[i].jaccard(&shares[j]),
                _ => shares[i].overlap(&shares[j]),
            })
        })
        .collect()
}

fn check_pairwise(measure: Measure) -> Result<()> {
    match measure {
        Measure::Overlap | Measure::Jaccard => Ok(()),
        other => Err(Error::Config(format!(
            "{} is a temporal measure, not a pairwise one",
            other.as_str()
        ))),
    }
}

/// Summary of the measure over all unordered pairs of distinct firms in
/// `industry` whose degree in `direction` falls in `bin`. `None` when fewer
/// than two firms qualify.
pub fn pairwise_distribution(
    net: &FirmNetwork,
    industry: usize,
    bin: &DegreeBin,
    measure: Measure,
    direction: Direction,
) -> Result<Option<DistributionSummary>> {
    check_pairwise(measure)?;
    let strengths = net.strengths();
    let shares: Vec<Shares> = (0..net.firm_count())
        .filter(|&v| net.industry(v) == industry && bin.contains(direction.degree(&strengths, v)))
        .filter_map(|v| Shares::of(net, v, direction))
        .collect();
    Ok(DistributionSummary::from_values(pair_values(
        &shares, measure,
    )))
}

fn sparse_by_label(net: &FirmNetwork, firm: usize, direction: Direction) -> BTreeMap<&str, f64> {
    let mut out: BTreeMap<&str, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (k, w) in partner_flows(net, firm, direction) {
        *out.entry(net.industry_label(k)).or_default() += w;
        total += w;
    }
    out.values_mut().for_each(|v| *v /= total);
    out
}

fn locate(net: &FirmNetwork, id: &str) -> Result<usize> {
    net.firm_index(id)
        .ok_or_else(|| Error::UnknownFirm(id.to_string()))
}

fn positive_strength(net: &FirmNetwork, firm: usize, direction: Direction) -> bool {
    let g = net.graph();
    match direction {
        Direction::In => g.in_edges(firm).len() > 0,
        Direction::Out => g.out_edges(firm).len() > 0,
    }
}

/// Overlap coefficient between a firm's year-`t` and year-`t-1` share
/// vectors. Firms are matched by id and industries by label.
pub fn temporal_overlap(
    current: &FirmNetwork,
    previous: &FirmNetwork,
    firm_id: &str,
    direction: Direction,
) -> Result<f64> {
    let (now, before) = (locate(current, firm_id)?, locate(previous, firm_id)?);
    if !positive_strength(current, now, direction)
        || !positive_strength(previous, before, direction)
    {
        return Err(Error::Undefined(format!(
            "firm `{firm_id}` has zero {direction}-strength in one of the years"
        )));
    }
    let a = sparse_by_label(current, now, direction);
    let b = sparse_by_label(previous, before, direction);
    let s: f64 = a
        .iter()
        .filter_map(|(k, x)| b.get(k).map(|y| x.min(*y)))
        .sum();
    Ok(s.min(1.0))
}

/// Fraction of the industries a firm traded with in year `t-1` that it still
/// trades with in year `t`.
pub fn retention_probability(
    current: &FirmNetwork,
    previous: &FirmNetwork,
    firm_id: &str,
    direction: Direction,
) -> Result<f64> {
    let (now, before) = (locate(current, firm_id)?, locate(previous, firm_id)?);
    let b = sparse_by_label(previous, before, direction);
    if b.is_empty() {
        return Err(Error::Undefined(format!(
            "firm `{firm_id}` had no {direction}-partners in the previous year"
        )));
    }
    let a = sparse_by_label(current, now, direction);
    let kept = b.keys().filter(|k| a.contains_key(*k)).count();
    Ok(kept as f64 / b.len() as f64)
}

/// One line of an overlap report; `summary = None` renders as an empty
/// column (fewer than two firms, or no firm for temporal measures).
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRow {
    pub industry: String,
    pub bin: String,
    pub direction: Direction,
    pub measure: Measure,
    pub summary: Option<DistributionSummary>,
}

fn reported_industries(net: &FirmNetwork, include_residual: bool) -> Vec<usize> {
    (0..net.industry_count())
        .filter(|&k| include_residual || Some(k) != net.residual_industry())
        .collect()
}

/// Pairwise overlap and Jaccard summaries for every industry, degree bin and
/// direction.
pub fn overlap_report(
    net: &FirmNetwork,
    bins: &DegreeBins,
    include_residual: bool,
) -> Vec<OverlapRow> {
    let strengths = net.strengths();
    let mut rows = Vec::new();
    for direction in Direction::BOTH {
        // [industry][bin] -> share vectors
        let mut groups: Vec<Vec<Vec<Shares>>> =
            vec![vec![Vec::new(); bins.bins().len()]; net.industry_count()];
        for v in 0..net.firm_count() {
            if let Some(b) = bins.assign(direction.degree(&strengths, v)) {
                if let Some(s) = Shares::of(net, v, direction) {
                    groups[net.industry(v)][b].push(s);
                }
            }
        }
        for k in reported_industries(net, include_residual) {
            for (b, bin) in bins.bins().iter().enumerate() {
                for measure in [Measure::Overlap, Measure::Jaccard] {
                    rows.push(OverlapRow {
                        industry: net.industry_label(k).to_string(),
                        bin: bin.to_string(),
                        direction,
                        measure,
                        summary: DistributionSummary::from_values(pair_values(
                            &groups[k][b],
                            measure,
                        )),
                    });
                }
            }
        }
    }
    rows
}

/// Year-over-year overlap and retention summaries. Firms are grouped by
/// their previous-year industry and previous-year degree bin.
pub fn temporal_report(
    current: &FirmNetwork,
    previous: &FirmNetwork,
    bins: &DegreeBins,
    include_residual: bool,
) -> Vec<OverlapRow> {
    let strengths = previous.strengths();
    let mut rows = Vec::new();
    for direction in Direction::BOTH {
        let mut groups: Vec<Vec<(Vec<f64>, Vec<f64>)>> =
            vec![vec![(Vec::new(), Vec::new()); bins.bins().len()]; previous.industry_count()];
        for v in 0..previous.firm_count() {
            let id = previous.firm_id(v);
            if current.firm_index(id).is_none() {
                continue;
            }
            let Some(b) = bins.assign(direction.degree(&strengths, v)) else {
                continue;
            };
            let slot = &mut groups[previous.industry(v)][b];
            if let Ok(oc) = temporal_overlap(current, previous, id, direction) {
                slot.0.push(oc);
            }
            if let Ok(rp) = retention_probability(current, previous, id, direction) {
                slot.1.push(rp);
            }
        }
        for k in reported_industries(previous, include_residual) {
            for (b, bin) in bins.bins().iter().enumerate() {
                let (oc, rp) = std::mem::take(&mut groups[k][b]);
                for (measure, values) in [(Measure::TemporalOverlap, oc), (Measure::Retention, rp)]
                {
                    rows.push(OverlapRow {
                        industry: previous.industry_label(k).to_string(),
                        bin: bin.to_string(),
                        direction,
                        measure,
                        summary: DistributionSummary::from_values(values),
                    });
                }
            }
        }
    }
    rows
}

pub const REPORT_HEADER: [&str; 12] = [
    "industry",
    "bin",
    "direction",
    "measure",
    "count",
    "mean",
    "std",
    "p5",
    "p25",
    "p50",
    "p75",
    "p95",
];

pub fn write_overlap_rows(path: &Path, rows: &[OverlapRow]) -> Result<()> {
    crate::io::write_rows(
        path,
        &REPORT_HEADER,
        rows.iter().map(|r| {
            let mut cells = vec![
                r.industry.clone(),
                r.bin.clone(),
                r.direction.as_str().to_string(),
                r.measure.as_str().to_string(),
            ];
            match &r.summary {
                Some(s) => {
                    cells.push(s.count.to_string());
                    cells.extend(
                        [s.mean, s.std, s.p5, s.p25, s.p50, s.p75, s.p95].map(|x| x.to_string()),
                    );
                }
                None => {
                    cells.push("0".into());
                    cells.extend(std::iter::repeat_n(String::new(), 7));
                }
            }
            cells
        }),
    )
}
