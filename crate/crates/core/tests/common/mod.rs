//! Random instances and dense brute-force reference implementations.
#![allow(dead_code)]

use prodnet::overlap::{Direction, DistributionSummary, Measure};
use prodnet::propagation::{EssentialityTable, InputClass, Mode};
use prodnet::{DegreeBin, FirmNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub net: FirmNetwork,
    pub table: EssentialityTable,
    pub psi: Vec<f64>,
}

/// Small random economy: `n <= 50` firms, `m <= 6` industries, some pure
/// buyers, a random essentiality table and a random capacity vector.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=6);
    let n = rng.random_range(m.max(2)..=50);
    let mut industry: Vec<usize> = (0..n)
        .map(|i| if i < m { i } else { rng.random_range(0..m) })
        .collect();
    industry.rotate_left(rng.random_range(0..n));
    let density = rng.random_range(0.02..0.25);
    let mut edges = Vec::new();
    for i in 0..n {
        if rng.random::<f64>() < 0.15 {
            continue;
        }
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                let w: f64 = if rng.random::<f64>() < 0.3 {
                    rng.random_range(1..5) as f64
                } else {
                    rng.random_range(0.01..10.0)
                };
                edges.push((i, j, w));
            }
        }
    }
    let net = FirmNetwork::from_indexed(industry, m, edges).unwrap();
    let mut table = EssentialityTable::new(InputClass::NonEssential);
    for p in 0..m {
        for q in 0..m {
            if rng.random::<f64>() < 0.3 {
                table.set(p, q, InputClass::Essential);
            }
        }
    }
    let psi = (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => 1.0,
            1 => 0.0,
            _ => rng.random::<f64>(),
        })
        .collect();
    Instance { net, table, psi }
}

/// Dense `n x n` weight matrix, `w[i][j]` = flow from supplier `i` to buyer `j`.
pub fn dense_weights(net: &FirmNetwork) -> Vec<Vec<f64>> {
    let n = net.firm_count();
    let mut w = vec![vec![0.0; n]; n];
    for (i, j, x) in net.graph().edges() {
        w[i][j] += x;
    }
    w
}

pub fn dense_aggregate(net: &FirmNetwork) -> Vec<Vec<f64>> {
    let w = dense_weights(net);
    let m = net.industry_count();
    let mut z = vec![vec![0.0; m]; m];
    for (i, row) in w.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            z[net.industry(i)][net.industry(j)] += x;
        }
    }
    z
}

/// Dense share vector over industries; `None` for zero strength.
pub fn dense_shares(net: &FirmNetwork, firm: usize, direction: Direction) -> Option<Vec<f64>> {
    let w = dense_weights(net);
    let mut v = vec![0.0; net.industry_count()];
    for j in 0..net.firm_count() {
        let x = match direction {
            Direction::In => w[j][firm],
            Direction::Out => w[firm][j],
        };
        v[net.industry(j)] += x;
    }
    let total: f64 = v.iter().sum();
    (total > 0.0).then(|| v.iter().map(|x| x / total).collect())
}

pub fn dense_degree(net: &FirmNetwork, firm: usize, direction: Direction) -> usize {
    let w = dense_weights(net);
    (0..net.firm_count())
        .filter(|&j| match direction {
            Direction::In => w[j][firm] > 0.0,
            Direction::Out => w[firm][j] > 0.0,
        })
        .count()
}

pub fn dense_measure(a: &[f64], b: &[f64], measure: Measure) -> f64 {
    match measure {
        Measure::Jaccard => {
            let inter = a
                .iter()
                .zip(b)
                .filter(|(x, y)| **x > 0.0 && **y > 0.0)
                .count();
            let union = a
                .iter()
                .zip(b)
                .filter(|(x, y)| **x > 0.0 || **y > 0.0)
                .count();
            inter as f64 / union as f64
        }
        _ => a
            .iter()
            .zip(b)
            .map(|(x, y)| x.min(*y))
            .sum::<f64>()
            .min(1.0),
    }
}

/// Sorted-sample percentile by linear interpolation, written out longhand.
pub fn dense_percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() as f64 - 1.0);
    let below = pos.floor();
    let frac = pos - below;
    let k = below as usize;
    if k + 1 < sorted.len() {
        sorted[k] * (1.0 - frac) + sorted[k + 1] * frac
    } else {
        sorted[k]
    }
}

pub fn dense_summary(mut values: Vec<f64>) -> Option<DistributionSummary> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let p = |q| dense_percentile(&values, q);
    Some(DistributionSummary {
        count: values.len(),
        mean,
        std,
        p5: p(0.05),
        p25: p(0.25),
        p50: p(0.5),
        p75: p(0.75),
        p95: p(0.95),
    })
}

pub fn dense_pairwise(
    net: &FirmNetwork,
    industry: usize,
    bin: &DegreeBin,
    measure: Measure,
    direction: Direction,
) -> Option<DistributionSummary> {
    let vectors: Vec<Vec<f64>> = (0..net.firm_count())
        .filter(|&v| net.industry(v) == industry && bin.contains(dense_degree(net, v, direction)))
        .filter_map(|v| dense_shares(net, v, direction))
        .collect();
    let mut values = Vec::new();
    for a in 0..vectors.len() {
        for b in 0..vectors.len() {
            if a < b {
                values.push(dense_measure(&vectors[a], &vectors[b], measure));
            }
        }
    }
    dense_summary(values)
}

/// Shares keyed by industry label, for comparing two years.
pub fn labelled_shares(
    net: &FirmNetwork,
    id: &str,
    direction: Direction,
) -> Option<Vec<(String, f64)>> {
    let v = dense_shares(net, net.firm_index(id)?, direction)?;
    Some(
        v.into_iter()
            .enumerate()
            .filter(|(_, x)| *x > 0.0)
            .map(|(k, x)| (net.industry_label(k).to_string(), x))
            .collect(),
    )
}

pub fn dense_temporal_overlap(
    cur: &FirmNetwork,
    prev: &FirmNetwork,
    id: &str,
    d: Direction,
) -> Option<f64> {
    let a = labelled_shares(cur, id, d)?;
    let b = labelled_shares(prev, id, d)?;
    let mut s = 0.0;
    for (ka, xa) in &a {
        for (kb, xb) in &b {
            if ka == kb {
                s += xa.min(*xb);
            }
        }
    }
    Some(s.min(1.0))
}

pub fn dense_retention(
    cur: &FirmNetwork,
    prev: &FirmNetwork,
    id: &str,
    d: Direction,
) -> Option<f64> {
    let b = labelled_shares(prev, id, d)?;
    let a = labelled_shares(cur, id, d).unwrap_or_default();
    let kept = b
        .iter()
        .filter(|(k, _)| a.iter().any(|(l, _)| l == k))
        .count();
    Some(kept as f64 / b.len() as f64)
}

/// Dense fixed point of both propagation passes, iterated until no level
/// moves by more than `tol`. Returns `(h_down, h_up)`.
pub fn dense_propagation(
    w: &[Vec<f64>],
    category: &[usize],
    table: &EssentialityTable,
    mode: Mode,
    cap_down: &[f64],
    cap_up: &[f64],
    tol: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let m = category.iter().max().map_or(0, |k| k + 1);
    let x0: Vec<f64> = (0..n).map(|i| w[i].iter().sum()).collect();
    let s_in: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[j][i]).sum()).collect();
    let essential = |i: usize, k: usize| {
        mode == Mode::Glpf && table.get(category[i], k) == InputClass::Essential
    };
    let down = |h: &[f64], i: usize| -> f64 {
        if x0[i] <= 0.0 {
            return cap_down[i];
        }
        let mut level = cap_down[i];
        let (mut pi_ess, mut pi_ne, mut flow_ne) = (0.0, 0.0, 0.0);
        for k in 0..m {
            let pi: f64 = (0..n).filter(|&j| category[j] == k).map(|j| w[j][i]).sum();
            let flow: f64 = (0..n)
                .filter(|&j| category[j] == k)
                .map(|j| w[j][i] * h[j])
                .sum();
            if pi <= 0.0 {
                continue;
            }
            if essential(i, k) {
                pi_ess += pi;
                level = level.min(flow / pi);
            } else {
                pi_ne += pi;
                flow_ne += flow;
            }
        }
        if pi_ne > 0.0 {
            let d = x0[i].max(s_in[i]) - pi_ess;
            let beta = (1.0 - pi_ne / d).max(0.0);
            level = level.min(beta + flow_ne / d);
        }
        level
    };
    let up = |h: &[f64], i: usize| -> f64 {
        if x0[i] <= 0.0 {
            return cap_up[i];
        }
        let demand: f64 = (0..n).map(|l| w[i][l] * h[l]).sum();
        (demand / x0[i]).min(cap_up[i])
    };
    let mut hd = cap_down.to_vec();
    let mut hu = cap_up.to_vec();
    for _ in 0..2_000_000 {
        let nd: Vec<f64> = (0..n).map(|i| down(&hd, i)).collect();
        let nu: Vec<f64> = (0..n).map(|i| up(&hu, i)).collect();
        let delta = nd
            .iter()
            .zip(&hd)
            .chain(nu.iter().zip(&hu))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        hd = nd;
        hu = nu;
        if delta < tol {
            break;
        }
    }
    (hd, hu)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn summaries_close(
    a: &Option<DistributionSummary>,
    b: &Option<DistributionSummary>,
    tol: f64,
) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            a.count == b.count
                && [
                    (a.mean, b.mean),
                    (a.std, b.std),
                    (a.p5, b.p5),
                    (a.p25, b.p25),
                    (a.p50, b.p50),
                    (a.p75, b.p75),
                    (a.p95, b.p95),
                ]
                .iter()
                .all(|(x, y)| close(*x, *y, tol))
        }
        _ => false,
    }
}

/// A perturbed copy of `net` standing in for the previous year: some firms
/// dropped, some edges removed or reweighted, industries relabelled for a
/// few firms.
pub fn previous_year(net: &FirmNetwork, seed: u64) -> FirmNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = net.firm_count();
    let keep: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.85).collect();
    let mut pos = vec![None; n];
    for (p, &i) in keep.iter().enumerate() {
        pos[i] = Some(p);
    }
    let m = net.industry_count();
    let ids = keep.iter().map(|&i| net.firm_id(i).to_string()).collect();
    let industry = keep
        .iter()
        .map(|&i| {
            if rng.random::<f64>() < 0.1 {
                rng.random_range(0..m)
            } else {
                net.industry(i)
            }
        })
        .collect();
    let mut edges = Vec::new();
    for (i, j, w) in net.graph().edges() {
        if let (Some(a), Some(b)) = (pos[i], pos[j]) {
            if rng.random::<f64>() < 0.8 {
                edges.push((a, b, w * rng.random_range(0.5..2.0)));
            }
        }
    }
    FirmNetwork::new(ids, industry, net.industry_labels().to_vec(), edges).unwrap()
}
