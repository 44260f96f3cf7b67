// Writes a synthetic instance to disk, reads it back and fits it.

use std::fs::File;
use std::io::BufReader;

use online_dawid_skene::prelude::*;

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("ods-synth-{}", std::process::id()));
    let instance = gen_instance(&SynthConfig {
        workers: 10,
        items: 200,
        seed: 7,
        ..SynthConfig::default()
    })?;
    instance.write_to_dir(&dir)?;

    let labels = load_labels(BufReader::new(File::open(dir.join("labels.csv"))?), None)?;
    let truth = load_ground_truth(BufReader::new(File::open(dir.join("truth.csv"))?), &labels)?;
    let model = load_checkpoint(BufReader::new(File::open(dir.join("true_model.txt"))?))?;
    assert_eq!(labels, instance.labels);

    let oracle_error = error_rate(&predict(&posterior_all(&model, &labels)), &truth)?;
    let fit = em_fit(&labels, &mv_posterior(&labels), &EmConfig::default())?;
    let em_error = error_rate(&predict(&posterior_all(&fit.confusion, &labels)), &truth)?;
    println!("files in {}", dir.display());
    println!("true model {}%, fitted EM {}%", format_error_rate(oracle_error), format_error_rate(em_error));
    std::fs::remove_dir_all(&dir)?;
    Ok(em_error - oracle_error)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
