// Majority vote on a small inline label file.

use online_dawid_skene::prelude::*;

const LABELS: &str = "item,worker,label
q1,ann,1
q1,bob,1
q1,cy,2
q2,ann,2
q2,bob,2
q2,cy,2
q3,ann,1
q3,bob,2
";

const TRUTH: &str = "item,label
q1,1
q2,2
q3,2
";

pub fn run_example() -> Result<Vec<usize>, Box<dyn std::error::Error>> {
    let labels = load_labels(LABELS.as_bytes(), None)?;
    let truth = load_ground_truth(TRUTH.as_bytes(), &labels)?;
    let predicted = predict(&mv_posterior(&labels));
    // q3 is a tie and goes to the smaller label
    println!("predicted classes: {predicted:?}");
    println!("error_rate={}", format_error_rate(error_rate(&predicted, &truth)?));
    Ok(predicted)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
