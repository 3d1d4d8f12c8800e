//! Synthetic firm-level shocks that aggregate to a given industry shock.
//!
//! For every industry the sampler first draws shocks for random firms until
//! the strength-weighted shock reaches one of the two targets
//! ([`draw_shocks`]), then rescales the draft so that both the in-strength
//! and the out-strength weighted sums hit their targets ([`rescale_shocks`]).
//! Rescaling splits the industry into an in-heavy and an out-heavy group and
//! solves a 2x2 system for one scale factor per group. Firms pushed above
//! one are clamped and locked.

use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::FirmNetwork;
use crate::seed::task_rng;
use crate::shock::FirmShock;

/// Distribution single shock increments are drawn from.
#[derive(Debug, Clone)]
pub enum DonorDistribution {
    Empirical(Vec<f64>),
    Beta(Beta<f64>),
}

impl DonorDistribution {
    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config(
                "empirical donor distribution is empty".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("donor value {v} outside [0,1]")));
        }
        Ok(DonorDistribution::Empirical(values))
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        Beta::new(a, b)
            .map(DonorDistribution::Beta)
            .map_err(|e| Error::Config(format!("beta({a}, {b}): {e}")))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            DonorDistribution::Empirical(v) => *v.choose(rng).expect("validated non-empty"),
            DonorDistribution::Beta(d) => d.sample(rng),
        }
    }

    fn can_shock(&self) -> bool {
        match self {
            DonorDistribution::Empirical(v) => v.iter().any(|&x| x > 0.0),
            DonorDistribution::Beta(_) => true,
        }
    }
}

/// How donor distributions are chosen per industry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DonorSpec {
    /// The base shocks of the industry's own firms.
    Empirical,
    Beta {
        a: f64,
        b: f64,
    },
}

impl FromStr for DonorSpec {
    type Err = String;

    /// `empirical` or `beta(a,b)`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "empirical" {
            return Ok(DonorSpec::Empirical);
        }
        let args = s
            .strip_prefix("beta(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("donor must be `empirical` or `beta(a,b)`, got `{s}`"))?;
        let parts: Vec<f64> = args
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match parts[..] {
            [a, b] if a > 0.0 && b > 0.0 => Ok(DonorSpec::Beta { a, b }),
            _ => Err(format!("beta needs two positive parameters, got `{args}`")),
        }
    }
}

/// Strength-weighted shock an industry must carry, in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingTarget {
    pub target_in: f64,
    pub target_out: f64,
}

/// Targets of every industry implied by `base`: `Σ ζ_i s_in_i` and
/// `Σ ζ_i s_out_i` over the industry's firms.
pub fn sampling_targets(net: &FirmNetwork, base: &FirmShock) -> Result<Vec<SamplingTarget>> {
    if base.len() != net.firm_count() {
        return Err(Error::Dimension {
            expected: net.firm_count(),
            actual: base.len(),
        });
    }
    let s = net.strengths();
    let mut out = vec![
        SamplingTarget {
            target_in: 0.0,
            target_out: 0.0
        };
        net.industry_count()
    ];
    for (i, &z) in base.zeta().iter().enumerate() {
        let t = &mut out[net.industry(i)];
        t.target_in += z * s.s_in[i];
        t.target_out += z * s.s_out[i];
    }
    Ok(out)
}

/// Strengths of the firms of one industry, in member order.
#[derive(Debug, Clone, PartialEq)]
pub struct IndustryStrengths {
    pub industry: usize,
    pub s_in: Vec<f64>,
    pub s_out: Vec<f64>,
}

impl IndustryStrengths {
    pub fn of(net: &FirmNetwork, industry: usize, members: &[usize]) -> Self {
        let g = net.graph();
        IndustryStrengths {
            industry,
            s_in: members.iter().map(|&i| g.in_strength(i)).collect(),
            s_out: members.iter().map(|&i| g.out_strength(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.s_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_in.is_empty()
    }

    fn weighted(&self, zeta: &[f64]) -> (f64, f64) {
        zeta.iter()
            .zip(self.s_in.iter().zip(&self.s_out))
            .fold((0.0, 0.0), |(a, b), (z, (i, o))| (a + z * i, b + z * o))
    }
}

/// Adds donor draws to random firms, without replacement until every firm
/// was drawn once, while both weighted sums are below their targets.
pub fn draw_shocks(
    firms: &IndustryStrengths,
    donor: &DonorDistribution,
    target: SamplingTarget,
    rng: &mut ChaCha8Rng,
    max_draws: usize,
) -> Result<Vec<f64>> {
    let n = firms.len();
    let mut zeta = vec![0.0; n];
    if !(target.target_in > 0.0 && target.target_out > 0.0) {
        return Ok(zeta);
    }
    let total_in: f64 = firms.s_in.iter().sum();
    let total_out: f64 = firms.s_out.iter().sum();
    let slack = 1e-9 * (1.0 + total_in.max(total_out));
    if target.target_in > total_in + slack
        || target.target_out > total_out + slack
        || !donor.can_shock()
    {
        return Err(Error::InfeasibleTarget {
            industry: firms.industry,
        });
    }
    let (mut sum_in, mut sum_out) = (0.0, 0.0);
    let mut pool: Vec<usize> = Vec::with_capacity(n);
    let mut saturated = 0;
    let mut draws = 0;
    while sum_in < target.target_in && sum_out < target.target_out {
        if saturated == n {
            break;
        }
        if draws == max_draws {
            return Err(Error::InfeasibleTarget {
                industry: firms.industry,
            });
        }
        draws += 1;
        if pool.is_empty() {
            pool.extend((0..n).rev());
        }
        let i = pool.swap_remove(rng.random_range(0..pool.len()));
        let eta = donor.sample(rng);
        let before = zeta[i];
        let after = (before + eta).min(1.0);
        if after == 1.0 && before < 1.0 {
            saturated += 1;
        }
        zeta[i] = after;
        sum_in += (after - before) * firms.s_in[i];
        sum_out += (after - before) * firms.s_out[i];
    }
    Ok(zeta)
}

/// Which firms stop being rescaled after a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockRule {
    /// Firms whose scaled shock exceeded one and was clamped.
    #[default]
    Clamped,
    /// Every firm with a positive shock.
    AnyShocked,
}

impl LockRule {
    /// Decides from the shock a firm would have before clamping.
    pub fn locks(self, scaled: f64) -> bool {
        match self {
            LockRule::Clamped => scaled > 1.0,
            LockRule::AnyShocked => scaled > 0.0,
        }
    }
}

impl FromStr for LockRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "clamped" => Ok(LockRule::Clamped),
            "any_shocked" => Ok(LockRule::AnyShocked),
            other => Err(format!("unknown lock rule `{other}`")),
        }
    }
}

/// Moore-Penrose inverse of a 2x2 matrix `[[a, b], [c, d]]` (row-major).
/// Singular values below `1e-12` times the largest are treated as zero.
pub fn pinv2x2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let [[a, b], [c, d]] = m;
    // eigen-decomposition of M^T M = [[p, q], [q, r]]
    let p = a * a + c * c;
    let q = a * b + c * d;
    let r = b * b + d * d;
    let half_gap = ((p - r) / 2.0).hypot(q);
    let l1 = (p + r) / 2.0 + half_gap;
    if l1 <= 0.0 {
        return [[0.0; 2]; 2];
    }
    let s1 = l1.sqrt();
    let s2 = (a * d - b * c).abs() / s1;
    if s2 > 1e-12 * s1 {
        let det = a * d - b * c;
        return [[d / det, -b / det], [-c / det, a / det]];
    }
    // rank one: pinv = v1 u1^T / s1 with u1 = M v1 / s1
    let (vx, vy) = if q != 0.0 {
        let (x, y) = (l1 - r, q);
        let norm = x.hypot(y);
        (x / norm, y / norm)
    } else if p >= r {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let (ux, uy) = ((a * vx + b * vy) / s1, (c * vx + d * vy) / s1);
    [[vx * ux / s1, vx * uy / s1], [vy * ux / s1, vy * uy / s1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescaleOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    pub lock_rule: LockRule,
}

impl Default for RescaleOptions {
    fn default() -> Self {
        RescaleOptions {
            epsilon: 0.01,
            max_iters: 1000,
            lock_rule: LockRule::Clamped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub zeta: Vec<f64>,
    pub iterations: usize,
    pub res_in: f64,
    pub res_out: f64,
    pub locked: Vec<bool>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Group {
    InHeavy,
    OutHeavy,
    Inert,
}

/// Rescales a draft until both weighted sums are within `epsilon` of their
/// targets.
pub fn rescale_shocks(
    firms: &IndustryStrengths,
    draft: Vec<f64>,
    target: SamplingTarget,
    rng: &mut ChaCha8Rng,
    opts: &RescaleOptions,
) -> Result<Rescaled> {
    let n = firms.len();
    if draft.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: draft.len(),
        });
    }
    let (s_in, s_out) = (&firms.s_in, &firms.s_out);
    let mut zeta = draft;
    let mut locked = vec![false; n];
    let mut groups = vec![Group::Inert; n];
    let mut iteration = 0;
    loop {
        let (sum_in, sum_out) = firms.weighted(&zeta);
        let res_in = (sum_in - target.target_in).abs();
        let res_out = (sum_out - target.target_out).abs();
        if res_in <= opts.epsilon && res_out <= opts.epsilon {
            return Ok(Rescaled {
                zeta,
                iterations: iteration,
                res_in,
                res_out,
                locked,
            });
        }
        let diverged = Error::RescaleDiverged {
            industry: firms.industry,
            iterations: iteration,
            res_in,
            res_out,
        };
        if iteration == opts.max_iters {
            return Err(diverged);
        }
        iteration += 1;

        let mut b_in = target.target_in;
        let mut b_out = target.target_out;
        for i in (0..n).filter(|&i| locked[i]) {
            b_in -= zeta[i] * s_in[i];
            b_out -= zeta[i] * s_out[i];
        }
        if b_in < -opts.epsilon || b_out < -opts.epsilon {
            // locked firms alone overshoot; no scaling of the rest helps
            return Err(diverged);
        }
        let (b_in, b_out) = (b_in.max(0.0), b_out.max(0.0));

        let (mut n_in, mut n_out) = (0, 0);
        let mut ties = Vec::new();
        for i in 0..n {
            groups[i] = Group::Inert;
            if locked[i] || (s_in[i] == 0.0 && s_out[i] == 0.0) {
                continue;
            }
            let lhs = s_in[i] * b_out;
            let rhs = b_in * s_out[i];
            if lhs > rhs {
                groups[i] = Group::InHeavy;
                n_in += 1;
            } else if lhs < rhs {
                groups[i] = Group::OutHeavy;
                n_out += 1;
            } else {
                ties.push(i);
            }
        }
        let tie_group = if n_in <= n_out {
            Group::InHeavy
        } else {
            Group::OutHeavy
        };
        for i in ties {
            groups[i] = tie_group;
        }

        let build = |zeta: &[f64]| -> [[f64; 2]; 2] {
            let mut a = [[0.0; 2]; 2];
            for i in 0..n {
                let col = match groups[i] {
                    Group::InHeavy => 0,
                    Group::OutHeavy => 1,
                    Group::Inert => continue,
                };
                a[0][col] += zeta[i] * s_in[i];
                a[1][col] += zeta[i] * s_out[i];
            }
            a
        };
        let mut a = build(&zeta);
        let repairs: [(bool, &dyn Fn(usize) -> bool); 4] = [
            (b_in > 0.0 && a[0][0] + a[0][1] == 0.0, &|i| s_in[i] > 0.0),
            (b_out > 0.0 && a[1][0] + a[1][1] == 0.0, &|i| s_out[i] > 0.0),
            (a[0][0] + a[1][0] == 0.0, &|i| groups[i] == Group::InHeavy),
            (a[0][1] + a[1][1] == 0.0, &|i| groups[i] == Group::OutHeavy),
        ];
        for (needed, eligible) in repairs {
            if !needed {
                continue;
            }
            let candidates: Vec<usize> = (0..n)
                .filter(|&i| groups[i] != Group::Inert && zeta[i] == 0.0 && eligible(i))
                .collect();
            if let Some(&i) = candidates.choose(rng) {
                zeta[i] = rng.random::<f64>();
                a = build(&zeta);
            }
        }

        let p = pinv2x2(a);
        let v_in = (p[0][0] * b_in + p[0][1] * b_out).max(0.0);
        let v_out = (p[1][0] * b_in + p[1][1] * b_out).max(0.0);
        for i in 0..n {
            let v = match groups[i] {
                Group::InHeavy => v_in,
                Group::OutHeavy => v_out,
                Group::Inert => continue,
            };
            let scaled = zeta[i] * v;
            if opts.lock_rule.locks(scaled) {
                locked[i] = true;
            }
            zeta[i] = scaled.min(1.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub epsilon: f64,
    pub donor: DonorSpec,
    pub max_rescale_iters: usize,
    pub max_scenario_retries: usize,
    pub lock_rule: LockRule,
    /// Draws per firm allowed in one drawing pass before giving up.
    pub max_draws_per_firm: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            epsilon: 0.01,
            donor: DonorSpec::Empirical,
            max_rescale_iters: 1000,
            max_scenario_retries: 20,
            lock_rule: LockRule::Clamped,
            max_draws_per_firm: 1000,
        }
    }
}

/// Residuals of one industry in one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub res_in: f64,
    pub res_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEnsemble {
    pub seed: u64,
    /// Remaining capacities `ψ` of every scenario.
    pub scenarios: Vec<Vec<f64>>,
    /// `residuals[scenario][industry]`.
    pub residuals: Vec<Vec<Residual>>,
    /// Attempts each scenario needed.
    pub attempts: Vec<usize>,
}

struct Plan {
    members: Vec<Vec<usize>>,
    firms: Vec<IndustryStrengths>,
    targets: Vec<SamplingTarget>,
    donors: Vec<Option<DonorDistribution>>,
}

fn plan(net: &FirmNetwork, base: &FirmShock, cfg: &SamplerConfig) -> Result<Plan> {
    let targets = sampling_targets(net, base)?;
    let members = net.members();
    let firms = members
        .iter()
        .enumerate()
        .map(|(k, m)| IndustryStrengths::of(net, k, m))
        .collect();
    let donors = members
        .iter()
        .map(|m| match cfg.donor {
            DonorSpec::Empirical if m.is_empty() => Ok(None),
            DonorSpec::Empirical => {
                DonorDistribution::empirical(m.iter().map(|&i| base.zeta()[i]).collect()).map(Some)
            }
            DonorSpec::Beta { a, b } => DonorDistribution::beta(a, b).map(Some),
        })
        .collect::<Result<_>>()?;
    Ok(Plan {
        members,
        firms,
        targets,
        donors,
    })
}

fn sample_industry(
    plan: &Plan,
    k: usize,
    rng: &mut ChaCha8Rng,
    cfg: &SamplerConfig,
) -> Result<Rescaled> {
    let firms = &plan.firms[k];
    let target = plan.targets[k];
    let max_draws = cfg.max_draws_per_firm.saturating_mul(firms.len().max(1));
    let draft = match &plan.donors[k] {
        Some(donor) => draw_shocks(firms, donor, target, rng, max_draws)?,
        None => Vec::new(),
    };
    let opts = RescaleOptions {
        epsilon: cfg.epsilon,
        max_iters: cfg.max_rescale_iters,
        lock_rule: cfg.lock_rule,
    };
    rescale_shocks(firms, draft, target, rng, &opts)
}

fn sample_scenario(
    plan: &Plan,
    n: usize,
    scenario: usize,
    seed: u64,
    cfg: &SamplerConfig,
) -> Result<(Vec<f64>, Vec<Residual>, usize)> {
    let mut last = None;
    for attempt in 0..=cfg.max_scenario_retries {
        let mut psi = vec![1.0; n];
        let mut residuals = Vec::with_capacity(plan.members.len());
        let outcome = (0..plan.members.len()).try_for_each(|k| {
            let mut rng = task_rng(seed, &[scenario as u64, attempt as u64, k as u64]);
            let r = sample_industry(plan, k, &mut rng, cfg)?;
            for (&i, z) in plan.members[k].iter().zip(&r.zeta) {
                psi[i] = 1.0 - z;
            }
            residuals.push(Residual {
                res_in: r.res_in,
                res_out: r.res_out,
            });
            Ok::<(), Error>(())
        });
        match outcome {
            Ok(()) => return Ok((psi, residuals, attempt + 1)),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::ScenarioFailed {
        scenario,
        attempts: cfg.max_scenario_retries + 1,
        last: Box::new(last.expect("at least one attempt ran")),
    })
}

/// Samples `count` scenarios whose industry aggregates match those of
/// `base` within `cfg.epsilon`. Scenarios run in parallel; each one derives
/// its randomness from `(seed, scenario, attempt, industry)` only.
pub fn sample_ensemble(
    net: &FirmNetwork,
    base: &FirmShock,
    count: usize,
    seed: u64,
    cfg: &SamplerConfig,
) -> Result<ScenarioEnsemble> {
    if !(cfg.epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {}",
            cfg.epsilon
        )));
    }
    let plan = plan(net, base, cfg)?;
    let n = net.firm_count();
    let results = (0..count)
        .into_par_iter()
        .map(|s| sample_scenario(&plan, n, s, seed, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut ensemble = ScenarioEnsemble {
        seed,
        scenarios: Vec::with_capacity(count),
        residuals: Vec::with_capacity(count),
        attempts: Vec::with_capacity(count),
    };
    for (psi, res, attempts) in results {
        ensemble.scenarios.push(psi);
        ensemble.residuals.push(res);
        ensemble.attempts.push(attempts);
    }
    Ok(ensemble)
}
