// Saves a fitted model, reloads it and checks the fixed-point diagnostics.

use online_dawid_skene::metrics::batch_statistic;
use online_dawid_skene::prelude::*;

pub struct Diagnostics {
    pub residual: f64,
    pub gap: f64,
    pub max_roundtrip_diff: f64,
}

pub fn run_example() -> Result<Diagnostics, Box<dyn std::error::Error>> {
    let instance = gen_instance(&SynthConfig {
        items: 300,
        seed: 4,
        ..SynthConfig::default()
    })?;
    let labels = &instance.labels;
    let config = EmConfig {
        tol: 1e-12,
        max_iter: 5000,
        ..EmConfig::default()
    };
    let fit = em_fit(labels, &mv_posterior(labels), &config)?;

    let mut buffer = Vec::new();
    save_checkpoint(&fit.confusion, &mut buffer)?;
    let restored = load_checkpoint(buffer.as_slice())?;
    let max_roundtrip_diff = restored.max_abs_diff(fit.confusion.cube());

    let stats = batch_statistic(restored.cube(), labels);
    let residual = fixed_point_residual(&stats, labels).max_abs;
    let gap = stationarity_gap(&restored, labels, 1e-5)?;
    println!("checkpoint is {} bytes, round-trip diff {max_roundtrip_diff:e}", buffer.len());
    println!("residual {residual:.3e}, stationarity gap {gap:.3e}");
    Ok(Diagnostics {
        residual,
        gap,
        max_roundtrip_diff,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
