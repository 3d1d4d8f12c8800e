//! Runs the full firm- versus industry-level comparison on a synthetic
//! network. Pass a directory to keep the outputs.

use prodnet::experiment::{run_aggregation_error_experiment, ExperimentConfig};

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "aggregation_error_out".into());
    let cfg = ExperimentConfig {
        output_dir: dir.into(),
        scenario_count: 200,
        seed: 42,
        ..Default::default()
    };
    match run_aggregation_error_experiment(&cfg) {
        Ok(r) => {
            let d = &r.fpn_losses;
            println!(
                "firms {}, industries {}, links {}",
                r.firms, r.industries, r.edges
            );
            println!("industry-level loss  {:.4}", r.l_ind.unwrap_or(f64::NAN));
            if let Some(s) = &d.summary {
                println!(
                    "firm-level losses    mean {:.4}, p5 {:.4}, p95 {:.4}",
                    s.mean, s.p5, s.p95
                );
            }
            println!(
                "relative deviation   {:+.4}",
                r.relative_deviation.unwrap_or(f64::NAN)
            );
            println!("outputs in {}", cfg.output_dir.display());
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}
