//! Knocks out single firms of the bundled 11-firm economy and prints the
//! resulting production levels and industry losses.

use prodnet::propagation::{firm_losses, propagate_firms, Calibration, Mode, PropagationOptions};
use prodnet::toy;

fn main() -> prodnet::Result<()> {
    let net = toy::network();
    let table = toy::essentiality(&net);
    let cal = Calibration::for_firms(&net, &table, Mode::Glpf)?;
    for id in ["3", "5", "8"] {
        let psi = toy::knockout(&net, id);
        let r = propagate_firms(&net, &cal, &psi, &PropagationOptions::default())?;
        let (total, per_industry) = firm_losses(&net, &r.h_final);
        println!("firm {id} shut down ({} sweeps)", r.iterations);
        for (v, h) in r.h_final.iter().enumerate() {
            if *h < 1.0 {
                println!("  firm {:>2} produces {h:.4}", net.firm_id(v));
            }
        }
        for (k, l) in per_industry.iter().enumerate() {
            println!(
                "  industry {} loses {:.4}",
                net.industry_label(k),
                l.unwrap_or(0.0)
            );
        }
        println!("  economy loses {:.4}", total.unwrap_or(0.0));
    }
    Ok(())
}
