// Log-domain posterior and likelihood against exact enumeration.

use online_dawid_skene::oracle::{brute_marginal, brute_posterior};
use online_dawid_skene::prelude::*;

pub fn run_example() -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let instance = gen_instance(&SynthConfig {
        workers: 4,
        items: 6,
        classes: 3,
        labels_per_item: 3,
        seed: 2,
        ..SynthConfig::default()
    })?;
    let labels = &instance.labels;
    let fit = em_fit(labels, &mv_posterior(labels), &EmConfig::default())?;
    let c = &fit.confusion;

    let mut posterior_dev: f64 = 0.0;
    for j in 0..labels.num_items() {
        let fast = posterior(c, labels.votes(j));
        let exact = brute_posterior(c, labels.votes(j))?;
        for (a, b) in fast.iter().zip(&exact) {
            posterior_dev = posterior_dev.max((a - b).abs());
        }
    }
    let ll = marginal_log_likelihood(c, labels);
    let exact_ll = brute_marginal(c, labels)?;
    println!("max posterior deviation {posterior_dev:.3e}");
    println!("loglik {ll:.15} vs enumeration {exact_ll:.15}");
    Ok((posterior_dev, (ll - exact_ll).abs()))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
