//! Seeded synthetic firm networks with heavy-tailed degrees and weights.

use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::FirmNetwork;
use crate::seed::task_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Power-law out-degrees, suppliers attach to buyers with Pareto fitness.
    #[default]
    PowerLaw,
    /// Path `0 -> 1 -> ... -> n-1`; firm `i` is in industry `i mod m`.
    Chain,
}

impl FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "power_law" => Ok(Topology::PowerLaw),
            "chain" => Ok(Topology::Chain),
            other => Err(format!("unknown topology `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticNetworkSpec {
    pub n: usize,
    pub m: usize,
    pub topology: Topology,
    /// Tail exponent of the out-degree and in-fitness distributions.
    pub exponent: f64,
    pub min_degree: usize,
    /// Parameters of the log-normal edge weights.
    pub weight_mu: f64,
    pub weight_sigma: f64,
    /// Industry `r` (0-based rank) gets size proportional to `(r+1)^-s`.
    pub industry_exponent: f64,
    /// Share of firms that only buy (final consumers).
    pub sink_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticNetworkSpec {
    fn default() -> Self {
        SyntheticNetworkSpec {
            n: 1000,
            m: 20,
            topology: Topology::PowerLaw,
            exponent: 2.1,
            min_degree: 1,
            weight_mu: 0.0,
            weight_sigma: 1.0,
            industry_exponent: 1.0,
            sink_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticNetworkSpec {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.m == 0 || self.n < self.m {
            return fail(format!(
                "need n >= m >= 1, got n = {}, m = {}",
                self.n, self.m
            ));
        }
        if self.topology == Topology::PowerLaw {
            if self.min_degree == 0 || self.min_degree >= self.n {
                return fail(format!(
                    "min_degree must be in 1..{}, got {}",
                    self.n, self.min_degree
                ));
            }
            if !(self.exponent > 1.0) {
                return fail(format!("exponent must exceed 1, got {}", self.exponent));
            }
        }
        if !(self.weight_sigma >= 0.0 && self.weight_mu.is_finite()) {
            return fail("invalid log-normal weight parameters".into());
        }
        if !(0.0..1.0).contains(&self.sink_fraction) {
            return fail(format!(
                "sink_fraction must lie in [0,1), got {}",
                self.sink_fraction
            ));
        }
        if !(self.industry_exponent >= 0.0) {
            return fail("industry_exponent must be non-negative".into());
        }
        Ok(())
    }
}

fn pareto(rng: &mut ChaCha8Rng, scale: f64, exponent: f64) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    scale * u.powf(-1.0 / (exponent - 1.0))
}

fn industry_sizes(spec: &SyntheticNetworkSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let weights: Vec<f64> = (0..spec.m)
        .map(|r| ((r + 1) as f64).powf(-spec.industry_exponent))
        .collect();
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    let mut sizes = vec![1usize; spec.m];
    for _ in spec.m..spec.n {
        sizes[pick.sample(rng)] += 1;
    }
    sizes
}

/// Builds a network per `spec`; identical specs give identical networks.
pub fn generate_network(spec: &SyntheticNetworkSpec) -> Result<FirmNetwork> {
    spec.validate()?;
    let n = spec.n;
    let weights = LogNormal::new(spec.weight_mu, spec.weight_sigma)
        .map_err(|e| Error::Config(format!("log-normal weights: {e}")))?;

    if spec.topology == Topology::Chain {
        let mut rng = task_rng(spec.seed, &[0]);
        let industry = (0..n).map(|i| i % spec.m).collect();
        let edges: Vec<_> = (1..n)
            .map(|i| (i - 1, i, weights.sample(&mut rng)))
            .collect();
        return FirmNetwork::from_indexed(industry, spec.m, edges);
    }

    let mut rng = task_rng(spec.seed, &[1]);
    let mut industry: Vec<usize> = industry_sizes(spec, &mut rng)
        .iter()
        .enumerate()
        .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
        .collect();
    industry.shuffle(&mut rng);

    let fitness: Vec<f64> = (0..n)
        .map(|_| pareto(&mut rng, 1.0, spec.exponent))
        .collect();
    let sink: Vec<bool> = (0..n)
        .map(|_| rng.random::<f64>() < spec.sink_fraction)
        .collect();
    let attach = WeightedIndex::new(&fitness).expect("positive fitness");
    let mut edges = Vec::new();
    let mut chosen = vec![false; n];
    for i in (0..n).filter(|&i| !sink[i]) {
        let k = (pareto(&mut rng, spec.min_degree as f64, spec.exponent).floor() as usize)
            .clamp(spec.min_degree, n - 1);
        let targets: Vec<usize> = if 4 * k > n {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others
                .choose_multiple_weighted(&mut rng, k, |&j| fitness[j])
                .map_err(|e| Error::Config(format!("weighted sampling: {e}")))?
                .copied()
                .collect()
        } else {
            let mut picked = Vec::with_capacity(k);
            chosen[i] = true;
            while picked.len() < k {
                let j = attach.sample(&mut rng);
                if !chosen[j] {
                    chosen[j] = true;
                    picked.push(j);
                }
            }
            chosen[i] = false;
            for &j in &picked {
                chosen[j] = false;
            }
            picked
        };
        edges.extend(
            targets
                .into_iter()
                .map(|j| (i, j, weights.sample(&mut rng))),
        );
    }
    FirmNetwork::from_indexed(industry, spec.m, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_has_distinct_industries() {
        let spec = SyntheticNetworkSpec {
            n: 5,
            m: 5,
            topology: Topology::Chain,
            ..Default::default()
        };
        let net = generate_network(&spec).unwrap();
        let pairs: Vec<(usize, usize)> = net.graph().edges().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(net.industries(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn every_industry_is_populated_and_generation_is_deterministic() {
        let spec = SyntheticNetworkSpec {
            n: 300,
            m: 12,
            seed: 4,
            ..Default::default()
        };
        let a = generate_network(&spec).unwrap();
        assert!(a.members().iter().all(|g| !g.is_empty()));
        let b = generate_network(&spec).unwrap();
        assert_eq!(a.graph(), b.graph());
        let s = a.strengths();
        let sinks = s.k_out.iter().filter(|&&k| k == 0).count();
        assert!(sinks > 0 && sinks < 100);
        let closed = SyntheticNetworkSpec {
            sink_fraction: 0.0,
            ..spec
        };
        assert!(generate_network(&closed)
            .unwrap()
            .strengths()
            .k_out
            .iter()
            .all(|&k| k >= 1));
    }

    #[test]
    fn unsatisfiable_specs_are_rejected() {
        let bad = [
            SyntheticNetworkSpec {
                n: 3,
                m: 4,
                ..Default::default()
            },
            SyntheticNetworkSpec {
                n: 5,
                m: 2,
                min_degree: 5,
                ..Default::default()
            },
            SyntheticNetworkSpec {
                n: 5,
                m: 2,
                exponent: 1.0,
                ..Default::default()
            },
            SyntheticNetworkSpec {
                n: 5,
                m: 0,
                ..Default::default()
            },
        ];
        for spec in bad {
            assert!(matches!(generate_network(&spec), Err(Error::Config(_))));
        }
    }
}
