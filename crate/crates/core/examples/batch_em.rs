// Batch EM on a synthetic instance, compared with majority vote.

use online_dawid_skene::batch_em::em_fit_with;
use online_dawid_skene::prelude::*;

pub struct Summary {
    pub mv_error: f64,
    pub em_error: f64,
    pub log_likelihood: Vec<f64>,
}

pub fn run_example() -> Result<Summary, Box<dyn std::error::Error>> {
    let instance = gen_instance(&SynthConfig {
        workers: 20,
        items: 500,
        accuracy_lo: 0.4,
        accuracy_hi: 0.9,
        labels_per_item: 5,
        seed: 11,
        ..SynthConfig::default()
    })?;
    let labels = &instance.labels;
    let init = mv_posterior(labels);
    let mv_error = error_rate(&predict(&init), &instance.truth)?;

    let fit = em_fit_with(labels, &init, &EmConfig::default(), |iter, _, ll| {
        if iter % 5 == 0 {
            println!("iter {iter:>3}  loglik {ll:.6}");
        }
    })?;
    let em_error = error_rate(&predict(&posterior_all(&fit.confusion, labels)), &instance.truth)?;
    println!(
        "majority vote {}%, EM {}% after {} iterations (converged: {})",
        format_error_rate(mv_error),
        format_error_rate(em_error),
        fit.iterations(),
        fit.converged
    );
    Ok(Summary {
        mv_error,
        em_error,
        log_likelihood: fit.log_likelihood,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
