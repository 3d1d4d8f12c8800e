//! Shock propagation with generalised Leontief production functions.
//!
//! Every node starts at its baseline output `x0` (out-strength). After a
//! shock caps node `i` at a fraction `ψ_i` of its baseline, two level vectors
//! are iterated to a fixed point:
//!
//! * the downstream-constrained level `h_d`, limited by the inputs a node
//!   still receives from its suppliers;
//! * the upstream-constrained level `h_u`, limited by the demand of its
//!   customers.
//!
//! For the input side, the inputs of node `i` are grouped by the category
//! (industry) of the supplier. Essential input categories enter as Leontief
//! constraints `Σ_{j∈k} W_ji h_j / Π_ik`. Non-essential inputs enter jointly
//! through the linear term `β_i + Σ_{j∈ne} W_ji h_j / D_i`, where
//! `D_i = max(x0_i, s_in_i) - Π_i^es` and `β_i = 1 - Π_i^ne / D_i`. Both
//! terms equal one when all inputs are at baseline.

use std::collections::HashMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FirmNetwork, Graph, IndustryNetwork};

/// Nodes above this size are swept in parallel.
const PARALLEL_SWEEP_MIN: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputClass {
    Essential,
    NonEssential,
}

impl FromStr for InputClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "essential" => Ok(InputClass::Essential),
            "non_essential" => Ok(InputClass::NonEssential),
            other => Err(format!("unknown input class `{other}`")),
        }
    }
}

/// Class of every (producer industry, input industry) pair, with a default
/// for pairs not listed.
#[derive(Debug, Clone, PartialEq)]
pub struct EssentialityTable {
    default: InputClass,
    pairs: HashMap<(usize, usize), InputClass>,
}

impl EssentialityTable {
    pub fn new(default: InputClass) -> Self {
        EssentialityTable {
            default,
            pairs: HashMap::new(),
        }
    }

    pub fn set(&mut self, producer: usize, input: usize, class: InputClass) {
        self.pairs.insert((producer, input), class);
    }

    pub fn get(&self, producer: usize, input: usize) -> InputClass {
        self.pairs
            .get(&(producer, input))
            .copied()
            .unwrap_or(self.default)
    }

    pub fn default_class(&self) -> InputClass {
        self.default
    }
}

impl Default for EssentialityTable {
    fn default() -> Self {
        EssentialityTable::new(InputClass::Essential)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Glpf,
    /// Every input is non-essential.
    Linear,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "glpf" => Ok(Mode::Glpf),
            "linear" => Ok(Mode::Linear),
            other => Err(format!("unknown propagation mode `{other}`")),
        }
    }
}

const NON_ESSENTIAL: u32 = u32::MAX;

/// Production-function parameters of every node of a graph.
#[derive(Debug, Clone)]
pub struct Calibration {
    x0: Vec<f64>,
    // essential input groups of node i: ess_offsets[i]..ess_offsets[i+1]
    ess_offsets: Vec<usize>,
    ess_category: Vec<usize>,
    ess_baseline: Vec<f64>,
    // per in-edge slot (buyer-major order): local group or NON_ESSENTIAL
    edge_group: Vec<u32>,
    ne_baseline: Vec<f64>,
    ne_denominator: Vec<f64>,
    beta: Vec<f64>,
}

impl Calibration {
    /// Calibrates node `i` to baseline output `x0[i]`, grouping its inputs by
    /// supplier category and classifying them with `table` (ignored in
    /// linear mode).
    pub fn new(graph: &Graph, x0: Vec<f64>, table: &EssentialityTable, mode: Mode) -> Result<Self> {
        let n = graph.node_count();
        if x0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: x0.len(),
            });
        }
        let mut cal = Calibration {
            x0,
            ess_offsets: Vec::with_capacity(n + 1),
            ess_category: Vec::new(),
            ess_baseline: Vec::new(),
            edge_group: vec![NON_ESSENTIAL; graph.in_sources().len()],
            ne_baseline: vec![0.0; n],
            ne_denominator: vec![0.0; n],
            beta: vec![1.0; n],
        };
        cal.ess_offsets.push(0);
        let sources = graph.in_sources();
        let weights = graph.in_weights();
        for i in 0..n {
            let start = cal.ess_category.len();
            let producer = graph.category(i);
            let mut s_in = 0.0;
            for e in graph.in_range(i) {
                let k = graph.category(sources[e]);
                let w = weights[e];
                s_in += w;
                let essential =
                    mode == Mode::Glpf && table.get(producer, k) == InputClass::Essential;
                if !essential {
                    cal.ne_baseline[i] += w;
                    continue;
                }
                let local = match cal.ess_category[start..].iter().position(|&c| c == k) {
                    Some(p) => p,
                    None => {
                        cal.ess_category.push(k);
                        cal.ess_baseline.push(0.0);
                        cal.ess_category.len() - 1 - start
                    }
                };
                cal.ess_baseline[start + local] += w;
                cal.edge_group[e] = local as u32;
            }
            cal.ess_offsets.push(cal.ess_category.len());
            if cal.ne_baseline[i] > 0.0 {
                let essential_total: f64 = cal.ess_baseline[start..].iter().sum();
                let d = cal.x0[i].max(s_in) - essential_total;
                cal.ne_denominator[i] = d;
                cal.beta[i] = (1.0 - cal.ne_baseline[i] / d).max(0.0);
            }
        }
        Ok(cal)
    }

    /// Calibration of a firm network with `x0 = s_out`.
    pub fn for_firms(net: &FirmNetwork, table: &EssentialityTable, mode: Mode) -> Result<Self> {
        let x0 = net.strengths().s_out;
        Calibration::new(net.graph(), x0, table, mode)
    }

    pub fn node_count(&self) -> usize {
        self.x0.len()
    }

    pub fn baseline_output(&self, i: usize) -> f64 {
        self.x0[i]
    }

    /// Nodes with zero baseline output only consume; they keep `h = ψ`.
    pub fn is_pass_through(&self, i: usize) -> bool {
        self.x0[i] <= 0.0
    }

    /// `(category, Π_ik / x0_i)` for every essential input category.
    pub fn essential_coefficients(&self, i: usize) -> Vec<(usize, f64)> {
        let r = self.ess_offsets[i]..self.ess_offsets[i + 1];
        self.ess_category[r.clone()]
            .iter()
            .zip(&self.ess_baseline[r])
            .map(|(&k, &p)| (k, p / self.x0[i]))
            .collect()
    }

    /// Output floor without any non-essential input, as a share of `x0`.
    pub fn beta(&self, i: usize) -> f64 {
        self.beta[i]
    }

    pub fn has_non_essential_inputs(&self, i: usize) -> bool {
        self.ne_baseline[i] > 0.0
    }
}

fn check_levels(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: v.len(),
        });
    }
    if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Config(format!("{name} value {x} outside [0,1]")));
    }
    Ok(())
}

fn sweep(n: usize, out: &mut [f64], f: impl Fn(usize) -> f64 + Sync + Send) {
    if n >= PARALLEL_SWEEP_MIN {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    } else {
        out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
}

fn downstream_level(graph: &Graph, cal: &Calibration, h: &[f64], cap: f64, i: usize) -> f64 {
    if cal.is_pass_through(i) {
        return cap;
    }
    let groups = cal.ess_offsets[i]..cal.ess_offsets[i + 1];
    let mut acc = [0.0f64; 16];
    let mut spill: Vec<f64>;
    let sums: &mut [f64] = if groups.len() <= acc.len() {
        &mut acc[..groups.len()]
    } else {
        spill = vec![0.0; groups.len()];
        &mut spill
    };
    let mut ne = 0.0;
    let sources = graph.in_sources();
    let weights = graph.in_weights();
    for e in graph.in_range(i) {
        let flow = weights[e] * h[sources[e]];
        match cal.edge_group[e] {
            NON_ESSENTIAL => ne += flow,
            g => sums[g as usize] += flow,
        }
    }
    let mut level = cap;
    for (s, p) in sums.iter().zip(&cal.ess_baseline[groups]) {
        level = level.min(s / p);
    }
    if cal.has_non_essential_inputs(i) {
        level = level.min(cal.beta[i] + ne / cal.ne_denominator[i]);
    }
    level
}

fn upstream_level(graph: &Graph, cal: &Calibration, h: &[f64], cap: f64, i: usize) -> f64 {
    if cal.is_pass_through(i) {
        return cap;
    }
    let targets = graph.out_targets();
    let weights = graph.out_weights();
    let demand: f64 = graph.out_range(i).map(|e| weights[e] * h[targets[e]]).sum();
    (demand / cal.x0[i]).min(cap)
}

/// One synchronous downstream update of all nodes.
pub fn downstream_step(graph: &Graph, cal: &Calibration, h_down: &[f64], cap: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h_down.len()];
    sweep(h_down.len(), &mut out, |i| {
        downstream_level(graph, cal, h_down, cap[i], i)
    });
    out
}

/// One synchronous upstream update of all nodes.
pub fn upstream_step(graph: &Graph, cal: &Calibration, h_up: &[f64], cap: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h_up.len()];
    sweep(h_up.len(), &mut out, |i| {
        upstream_level(graph, cal, h_up, cap[i], i)
    });
    out
}

/// The level a node finally produces given both constraints.
pub fn combine_levels(h_down: f64, h_up: f64) -> f64 {
    h_down.min(h_up)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            tol: 1e-9,
            max_iter: 100_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationResult {
    pub h_final: Vec<f64>,
    pub h_down: Vec<f64>,
    pub h_up: Vec<f64>,
    /// `1 +` the number of sweeps that moved some level by at least `tol`.
    pub iterations: usize,
    pub converged: bool,
    /// Largest level change of every sweep, when requested.
    pub trace: Option<Vec<f64>>,
}

/// Iteration state; exposed so callers can inspect intermediate levels.
#[derive(Debug, Clone)]
pub struct Propagation<'a> {
    graph: &'a Graph,
    cal: &'a Calibration,
    cap_down: &'a [f64],
    cap_up: &'a [f64],
    h_down: Vec<f64>,
    h_up: Vec<f64>,
    next_down: Vec<f64>,
    next_up: Vec<f64>,
}

impl<'a> Propagation<'a> {
    /// Starts both level vectors at their caps.
    pub fn start(
        graph: &'a Graph,
        cal: &'a Calibration,
        cap_down: &'a [f64],
        cap_up: &'a [f64],
    ) -> Result<Self> {
        let n = graph.node_count();
        if cal.node_count() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: cal.node_count(),
            });
        }
        check_levels("downstream cap", cap_down, n)?;
        check_levels("upstream cap", cap_up, n)?;
        Ok(Propagation {
            graph,
            cal,
            cap_down,
            cap_up,
            h_down: cap_down.to_vec(),
            h_up: cap_up.to_vec(),
            next_down: vec![0.0; n],
            next_up: vec![0.0; n],
        })
    }

    /// Advances both vectors by one sweep; returns the largest change.
    pub fn step(&mut self) -> f64 {
        let (g, cal) = (self.graph, self.cal);
        let (hd, hu) = (&self.h_down, &self.h_up);
        let (cd, cu) = (self.cap_down, self.cap_up);
        let n = hd.len();
        sweep(n, &mut self.next_down, |i| {
            downstream_level(g, cal, hd, cd[i], i)
        });
        sweep(n, &mut self.next_up, |i| {
            upstream_level(g, cal, hu, cu[i], i)
        });
        let delta = self
            .next_down
            .iter()
            .zip(hd)
            .chain(self.next_up.iter().zip(hu))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut self.h_down, &mut self.next_down);
        std::mem::swap(&mut self.h_up, &mut self.next_up);
        delta
    }

    pub fn h_down(&self) -> &[f64] {
        &self.h_down
    }

    pub fn h_up(&self) -> &[f64] {
        &self.h_up
    }

    pub fn h_final(&self) -> Vec<f64> {
        self.h_down
            .iter()
            .zip(&self.h_up)
            .map(|(&d, &u)| combine_levels(d, u))
            .collect()
    }

    pub fn run(mut self, opts: &PropagationOptions) -> PropagationResult {
        let mut trace = opts.record_trace.then(Vec::new);
        let mut iterations = 1;
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let delta = self.step();
            if let Some(t) = trace.as_mut() {
                t.push(delta);
            }
            if delta < opts.tol {
                converged = true;
                break;
            }
            iterations += 1;
        }
        PropagationResult {
            h_final: self.h_final(),
            h_down: self.h_down,
            h_up: self.h_up,
            iterations,
            converged,
            trace,
        }
    }
}

/// Propagates caps over an arbitrary calibrated graph.
pub fn propagate(
    graph: &Graph,
    cal: &Calibration,
    cap_down: &[f64],
    cap_up: &[f64],
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    Ok(Propagation::start(graph, cal, cap_down, cap_up)?.run(opts))
}

/// Firm-level propagation of remaining capacities `psi`.
pub fn propagate_firms(
    net: &FirmNetwork,
    cal: &Calibration,
    psi: &[f64],
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    propagate(net.graph(), cal, psi, psi, opts)
}

/// Industry-level propagation: the graph of `z` with output `x0 = s_out`,
/// downstream cap `phi_down` and upstream cap `phi_up`.
pub fn propagate_industry(
    z: &IndustryNetwork,
    table: &EssentialityTable,
    mode: Mode,
    phi_up: &[f64],
    phi_down: &[f64],
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    let graph = z.graph();
    let cal = Calibration::new(&graph, z.out_strength().to_vec(), table, mode)?;
    propagate(&graph, &cal, phi_down, phi_up, opts)
}

/// Output-weighted mean of `1 - h`; `None` when total weight is zero.
pub fn economy_loss(s_out: &[f64], h: &[f64]) -> Option<f64> {
    let total: f64 = s_out.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let lost: f64 = s_out.iter().zip(h).map(|(s, x)| s * (1.0 - x)).sum();
    Some((lost / total).clamp(0.0, 1.0))
}

/// Output-weighted mean of `1 - h` within every category; `None` for
/// categories with zero total weight.
pub fn industry_losses(
    category: &[usize],
    categories: usize,
    s_out: &[f64],
    h: &[f64],
) -> Vec<Option<f64>> {
    let mut lost = vec![0.0; categories];
    let mut total = vec![0.0; categories];
    for ((&k, s), x) in category.iter().zip(s_out).zip(h) {
        lost[k] += s * (1.0 - x);
        total[k] += s;
    }
    lost.iter()
        .zip(&total)
        .map(|(l, t)| (*t > 0.0).then(|| (l / t).clamp(0.0, 1.0)))
        .collect()
}

/// Economy and per-industry losses of a firm-level result.
pub fn firm_losses(net: &FirmNetwork, h: &[f64]) -> (Option<f64>, Vec<Option<f64>>) {
    let s_out = net.strengths().s_out;
    (
        economy_loss(&s_out, h),
        industry_losses(net.industries(), net.industry_count(), &s_out, h),
    )
}
