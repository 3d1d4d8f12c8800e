//! Generates a heavy-tailed synthetic network and prints its degree and
//! industry structure.

use prodnet::synth::generate_network;
use prodnet::{DegreeBins, SyntheticNetworkSpec};

fn main() -> prodnet::Result<()> {
    let spec = SyntheticNetworkSpec {
        n: 5000,
        m: 12,
        seed: 3,
        ..Default::default()
    };
    let net = generate_network(&spec)?;
    let s = net.strengths();
    println!(
        "{} firms, {} links",
        net.firm_count(),
        net.graph().edge_count()
    );
    let bins = DegreeBins::canonical();
    for (name, degrees) in [("in", &s.k_in), ("out", &s.k_out)] {
        let mut counts = vec![0; bins.bins().len()];
        let mut zero = 0;
        for &k in degrees.iter() {
            match bins.assign(k) {
                Some(b) => counts[b] += 1,
                None => zero += 1,
            }
        }
        let max = degrees.iter().max().unwrap();
        print!("{name}-degree: {zero} firms with none");
        for (b, c) in bins.bins().iter().zip(&counts) {
            print!(", {b}: {c}");
        }
        println!(", max {max}");
    }
    for (k, members) in net.members().iter().enumerate() {
        let out: f64 = members.iter().map(|&v| s.s_out[v]).sum();
        println!(
            "industry {:>2}: {:>4} firms, output {out:.1}",
            net.industry_label(k),
            members.len()
        );
    }
    Ok(())
}
