//! Pairwise and year-over-year similarity of firms' industry profiles on a
//! synthetic network and a perturbed copy of it.

use prodnet::overlap::{overlap_report, temporal_report};
use prodnet::synth::generate_network;
use prodnet::{DegreeBins, FirmNetwork, SyntheticNetworkSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> prodnet::Result<()> {
    let spec = SyntheticNetworkSpec {
        n: 2000,
        m: 8,
        seed: 1,
        ..Default::default()
    };
    let current = generate_network(&spec)?;

    // previous year: a fifth of the links absent
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let edges: Vec<_> = current
        .graph()
        .edges()
        .filter(|_| rng.random::<f64>() < 0.8)
        .collect();
    let previous = FirmNetwork::new(
        current.firm_ids().to_vec(),
        current.industries().to_vec(),
        current.industry_labels().to_vec(),
        edges,
    )?;

    let bins = DegreeBins::canonical();
    println!("industry bin       dir measure      count   mean    p50");
    let rows = overlap_report(&current, &bins, false)
        .into_iter()
        .chain(temporal_report(&current, &previous, &bins, false));
    for row in rows.filter(|r| r.industry == "0") {
        if let Some(s) = row.summary {
            println!(
                "{:<8} {:<10} {:<3} {:<12} {:>5} {:>6.3} {:>6.3}",
                row.industry,
                row.bin,
                row.direction,
                row.measure.as_str(),
                s.count,
                s.mean,
                s.p50
            );
        }
    }
    Ok(())
}
